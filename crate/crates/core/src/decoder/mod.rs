//! User-side recovery of the desired file from a response stream.
//!
//! * [`recover_plain`]: per-block erasure decoding in `C * D` followed by
//!   peeling of the already known stripes.
//! * [`recover_window`]: the same peeling, with bursts of erased blocks
//!   resolved by solving the accumulated linear system.
//! * [`decode_um`]: unit-memory trellis decoding under symbol errors.

mod plain;
mod um;
mod window;

use std::fmt;

use thiserror::Error;

use crate::field::Fe;
use crate::grs::GrsError;
use crate::pir::{BlockStatus, PirScheme, ResponseBlock};

pub use plain::recover_plain;
pub use um::{decode_um, decode_um_traced, TraceLine};
pub use window::{recover_window, RecoveringCertificate};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("stripe {stripe} cannot be determined (rank deficient)")]
    RankDeficient { stripe: usize },
    #[error("block {block} is inconsistent with the scheme")]
    InconsistentBlock { block: usize },
    #[error("uncorrectable erasure pattern: {0}")]
    UncorrectablePattern(String),
    #[error("decoding failure: {0}")]
    DecodingFailure(String),
    #[error("block {block} has status {status}, not accepted by this decoder")]
    UnexpectedStatus { block: usize, status: BlockStatus },
    #[error("decoder does not handle the {0} variant")]
    WrongVariant(crate::pir::Variant),
    #[error("stream has {got} blocks, scheme expects {expected}")]
    StreamLength { expected: usize, got: usize },
    #[error("certificate does not belong to this scheme")]
    CertificateMismatch,
    #[error(transparent)]
    Grs(#[from] GrsError),
}

/// How a stripe was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Decoded from its own block.
    Direct,
    /// Solved jointly with other stripes after erasures.
    WindowSolved,
    /// Chosen by the trellis search.
    Trellis,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Direct => "direct",
            Provenance::WindowSolved => "window",
            Provenance::Trellis => "trellis",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredFile {
    pub stripes: Vec<Vec<Fe>>,
    pub provenance: Vec<Provenance>,
}

/// Block and coset distances of the unit-memory code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UmDistanceProfile {
    pub d_alpha: usize,
    pub d1: usize,
    pub d2: usize,
}

impl UmDistanceProfile {
    /// Distances of the Byzantine construction: `d_alpha = n-3k-t+2`,
    /// `d1 = d2 = n-2k-t+2`.
    pub fn byzantine(n: usize, k: usize, t: usize) -> Self {
        UmDistanceProfile {
            d_alpha: (n + 2).saturating_sub(3 * k + t),
            d1: (n + 2).saturating_sub(2 * k + t),
            d2: (n + 2).saturating_sub(2 * k + t),
        }
    }

    /// Designed extended row distance `d1 + (L-1) d_alpha + d2` for `L >= 1`.
    pub fn extended_row_distance(&self, len: usize) -> usize {
        self.d1 + len.saturating_sub(1) * self.d_alpha + self.d2
    }
}

/// True iff every window of `L >= 1` consecutive blocks carries total error
/// weight below half the designed extended row distance for `L`.
pub fn check_guarantee(weights: &[usize], profile: &UmDistanceProfile) -> bool {
    (0..weights.len()).all(|s| {
        let mut sum = 0;
        (s..weights.len()).all(|e| {
            sum += weights[e];
            2 * sum < profile.extended_row_distance(e - s + 1)
        })
    })
}

/// Recovers `sum_z alpha_j^(zk) Y^i_{b-z, j}` on the support from one intact
/// block by erasure decoding every sub-round in `C * D`. Values follow the
/// order of `scheme.support()`.
pub(crate) fn peel_block(scheme: &PirScheme, b: usize, block: &ResponseBlock) -> Result<Vec<Fe>, DecodeError> {
    if block.status != BlockStatus::Intact {
        return Err(DecodeError::UnexpectedStatus { block: b, status: block.status });
    }
    if block.rounds.len() != scheme.rounds().len() {
        return Err(DecodeError::InconsistentBlock { block: b });
    }
    let f = scheme.field();
    let star = scheme.star_code();
    let mut out = vec![Fe::ZERO; scheme.support().len()];
    for (part, word) in scheme.rounds().iter().zip(&block.rounds) {
        if word.len() != scheme.n() {
            return Err(DecodeError::InconsistentBlock { block: b });
        }
        let erased: Vec<Option<Fe>> =
            word.iter().enumerate().map(|(j, &x)| (!part.contains(&j)).then_some(x)).collect();
        let msg = star.erasure_decode(&erased).map_err(|e| match e {
            GrsError::InconsistentWord => DecodeError::InconsistentBlock { block: b },
            other => other.into(),
        })?;
        let cw = star.encode(&msg)?;
        for &j in part {
            let pos = scheme.support().binary_search(&j).expect("rounds partition the support");
            out[pos] = f.sub(word[j], cw[j]);
        }
    }
    Ok(out)
}
