use std::collections::{BTreeMap, BTreeSet};

use super::{peel_block, DecodeError, Provenance, RecoveredFile};
use crate::channel::ErasureSchedule;
use crate::field::Fe;
use crate::linalg::{self, Matrix};
use crate::pir::{BlockStatus, PirScheme, ResponseStream, Variant};
use crate::recovering::{build_window, RecoveringMatrix};

/// Proof that the scheme's support resolves a worst-case burst: the window
/// matrix for `N` stripes seen through `N - eps` blocks has full rank `N k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveringCertificate {
    matrix: RecoveringMatrix,
}

impl RecoveringCertificate {
    pub fn new(scheme: &PirScheme) -> Result<Self, DecodeError> {
        if scheme.variant() != Variant::BlockErasure {
            return Err(DecodeError::WrongVariant(scheme.variant()));
        }
        let locs = support_locators(scheme);
        let matrix = build_window(scheme.field(), scheme.k(), scheme.window(), scheme.burst(), &locs)
            .map_err(|e| DecodeError::UncorrectablePattern(e.to_string()))?;
        if !matrix.verdict() {
            return Err(DecodeError::RankDeficient { stripe: 0 });
        }
        Ok(RecoveringCertificate { matrix })
    }

    pub fn matrix(&self) -> &RecoveringMatrix {
        &self.matrix
    }
}

fn support_locators(scheme: &PirScheme) -> Vec<Fe> {
    let locs = scheme.storage_code().locators();
    scheme.support().iter().map(|&j| locs[j]).collect()
}

/// Linear equation over the stripe unknowns: `sum_x <coeffs[x], X_x> = rhs`.
#[derive(Debug, Clone)]
struct Equation {
    coeffs: BTreeMap<usize, Vec<Fe>>,
    rhs: Fe,
}

/// Recovers the desired file from a stream with erased blocks.
///
/// Intact blocks are peeled as in [`super::recover_plain`]; each surviving
/// equation that still involves unknown stripes is kept until the pending
/// system determines them. Stripe `x` must be determined by block
/// `x + N - 1` (or the last block), otherwise `RankDeficient` is returned.
pub fn recover_window(
    stream: &ResponseStream,
    scheme: &PirScheme,
    cert: &RecoveringCertificate,
) -> Result<RecoveredFile, DecodeError> {
    if scheme.variant() != Variant::BlockErasure {
        return Err(DecodeError::WrongVariant(scheme.variant()));
    }
    let m = &cert.matrix;
    if m.k != scheme.k()
        || m.window != scheme.window()
        || m.burst != scheme.burst()
        || m.locators != support_locators(scheme)
    {
        return Err(DecodeError::CertificateMismatch);
    }
    let total = scheme.block_count();
    if stream.len() != total {
        return Err(DecodeError::StreamLength { expected: total, got: stream.len() });
    }
    let mut erased = Vec::new();
    for (b, block) in stream.blocks.iter().enumerate() {
        match block.status {
            BlockStatus::Intact => {}
            BlockStatus::Erased => erased.push(b),
            status => return Err(DecodeError::UnexpectedStatus { block: b, status }),
        }
    }
    let schedule = ErasureSchedule::new(erased);
    if !schedule.is_admissible(total, scheme.window(), scheme.burst()) {
        return Err(DecodeError::UncorrectablePattern(format!(
            "erased blocks {:?} violate burst <= {} with gaps >= {}",
            schedule.blocks,
            scheme.burst(),
            scheme.window() - scheme.burst()
        )));
    }

    let f = scheme.field();
    let code = scheme.storage_code();
    let (k, ell, memory) = (scheme.k(), scheme.ell(), scheme.memory());
    let locs = code.locators();
    let mults = code.multipliers();
    let support = scheme.support();

    let mut stripes: Vec<Option<Vec<Fe>>> = vec![None; ell];
    let mut encoded: Vec<Option<Vec<Fe>>> = vec![None; ell];
    let mut provenance = vec![Provenance::Direct; ell];
    let mut pending: Vec<Equation> = Vec::new();

    for (b, block) in stream.blocks.iter().enumerate() {
        if block.status == BlockStatus::Intact {
            let w = peel_block(scheme, b, block)?;
            for (pos, &j) in support.iter().enumerate() {
                let mut eq = Equation { coeffs: BTreeMap::new(), rhs: w[pos] };
                for z in 0..=memory {
                    let Some(x) = b.checked_sub(z) else { break };
                    if x >= ell {
                        continue;
                    }
                    let scale = f.mul(mults[j], f.pow(locs[j], (z * k) as u64));
                    match &encoded[x] {
                        Some(y) => eq.rhs = f.sub(eq.rhs, f.mul(f.pow(locs[j], (z * k) as u64), y[j])),
                        None => {
                            let row = (0..k).map(|i| f.mul(scale, f.pow(locs[j], i as u64))).collect();
                            eq.coeffs.insert(x, row);
                        }
                    }
                }
                if eq.coeffs.is_empty() {
                    if !eq.rhs.is_zero() {
                        return Err(DecodeError::InconsistentBlock { block: b });
                    }
                } else {
                    pending.push(eq);
                }
            }
            let solved = solve_pending(f, k, &mut pending).ok_or(DecodeError::InconsistentBlock { block: b })?;
            for (x, msg) in solved {
                if x != b {
                    provenance[x] = Provenance::WindowSolved;
                }
                encoded[x] = Some(code.encode(&msg)?);
                stripes[x] = Some(msg);
            }
            substitute(f, &mut pending, &stripes, b)?;
        }
        for x in 0..ell.min(b + 1) {
            if stripes[x].is_none() && (x + scheme.window() - 1).min(total - 1) <= b {
                return Err(DecodeError::RankDeficient { stripe: x });
            }
        }
    }
    let stripes = stripes
        .into_iter()
        .enumerate()
        .map(|(x, s)| s.ok_or(DecodeError::RankDeficient { stripe: x }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RecoveredFile { stripes, provenance })
}

/// Solves the pending system; returns every stripe whose `k` coordinates
/// are uniquely determined, or `None` if the system is inconsistent.
fn solve_pending(f: &crate::field::Field, k: usize, pending: &mut Vec<Equation>) -> Option<Vec<(usize, Vec<Fe>)>> {
    if pending.is_empty() {
        return Some(Vec::new());
    }
    let unknowns: Vec<usize> =
        pending.iter().flat_map(|e| e.coeffs.keys().copied()).collect::<BTreeSet<_>>().into_iter().collect();
    let col_of = |x: usize| unknowns.binary_search(&x).expect("collected above") * k;
    let cols = unknowns.len() * k;
    let mut aug = Matrix::zeros(pending.len(), cols + 1);
    for (r, eq) in pending.iter().enumerate() {
        for (&x, row) in &eq.coeffs {
            for (i, &c) in row.iter().enumerate() {
                aug[(r, col_of(x) + i)] = c;
            }
        }
        aug[(r, cols)] = eq.rhs;
    }
    let pivots = linalg::rref(f, &mut aug);
    if pivots.last() == Some(&cols) {
        return None;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut value = vec![None; cols];
    for (r, &c) in pivots.iter().enumerate() {
        if free.iter().all(|&fc| aug[(r, fc)].is_zero()) {
            value[c] = Some(aug[(r, cols)]);
        }
    }
    let solved = unknowns
        .iter()
        .enumerate()
        .filter_map(|(u, &x)| value[u * k..(u + 1) * k].iter().copied().collect::<Option<Vec<Fe>>>().map(|v| (x, v)))
        .collect();
    // keep the reduced rows: equivalent system, no redundant rows
    *pending = (0..pivots.len())
        .map(|r| Equation {
            coeffs: unknowns
                .iter()
                .enumerate()
                .filter_map(|(u, &x)| {
                    let row: Vec<Fe> = (0..k).map(|i| aug[(r, u * k + i)]).collect();
                    row.iter().any(|c| !c.is_zero()).then_some((x, row))
                })
                .collect(),
            rhs: aug[(r, cols)],
        })
        .collect();
    Some(solved)
}

/// Moves newly known stripes to the right-hand side and drops equations
/// without unknowns.
fn substitute(
    f: &crate::field::Field,
    pending: &mut Vec<Equation>,
    stripes: &[Option<Vec<Fe>>],
    b: usize,
) -> Result<(), DecodeError> {
    for eq in pending.iter_mut() {
        let known: Vec<usize> = eq.coeffs.keys().copied().filter(|&x| stripes[x].is_some()).collect();
        for x in known {
            let row = eq.coeffs.remove(&x).expect("key listed above");
            let msg = stripes[x].as_ref().expect("filtered on is_some");
            eq.rhs = f.sub(eq.rhs, f.dot(&row, msg));
        }
    }
    let mut bad = false;
    pending.retain(|eq| {
        bad |= eq.coeffs.is_empty() && !eq.rhs.is_zero();
        !eq.coeffs.is_empty()
    });
    if bad {
        return Err(DecodeError::InconsistentBlock { block: b });
    }
    Ok(())
}
