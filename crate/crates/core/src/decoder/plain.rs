use super::{peel_block, DecodeError, Provenance, RecoveredFile};
use crate::field::Fe;
use crate::pir::{PirScheme, ResponseStream, Variant};

/// Sequential recovery from an erasure-free stream: block `b` yields
/// `sum_z alpha^(zk) Y_{b-z}` on the support, the known stripes `b-1..b-M`
/// are subtracted, and the rest is erasure decoded in the storage code.
pub fn recover_plain(stream: &ResponseStream, scheme: &PirScheme) -> Result<RecoveredFile, DecodeError> {
    if scheme.variant() == Variant::ByzantineUm {
        return Err(DecodeError::WrongVariant(scheme.variant()));
    }
    if stream.len() != scheme.block_count() {
        return Err(DecodeError::StreamLength { expected: scheme.block_count(), got: stream.len() });
    }
    let f = scheme.field();
    let code = scheme.storage_code();
    let support = scheme.support();
    let locs = code.locators();
    let k = scheme.k() as u64;
    let mut stripes: Vec<Vec<Fe>> = Vec::with_capacity(scheme.ell());
    let mut encoded: Vec<Vec<Fe>> = Vec::with_capacity(scheme.ell());

    for (b, block) in stream.blocks.iter().enumerate() {
        let mut w = peel_block(scheme, b, block)?;
        for z in 1..=scheme.memory() {
            let Some(x) = b.checked_sub(z) else { break };
            if x >= encoded.len() {
                continue;
            }
            for (pos, &j) in support.iter().enumerate() {
                let c = f.mul(f.pow(locs[j], z as u64 * k), encoded[x][j]);
                w[pos] = f.sub(w[pos], c);
            }
        }
        if b < scheme.ell() {
            let mut word = vec![None; scheme.n()];
            for (pos, &j) in support.iter().enumerate() {
                word[j] = Some(w[pos]);
            }
            let msg = code.erasure_decode(&word).map_err(|e| match e {
                crate::grs::GrsError::InconsistentWord => DecodeError::InconsistentBlock { block: b },
                crate::grs::GrsError::TooManyErasures { .. } => DecodeError::RankDeficient { stripe: b },
                other => other.into(),
            })?;
            encoded.push(code.encode(&msg)?);
            stripes.push(msg);
        } else if w.iter().any(|x| !x.is_zero()) {
            // termination blocks carry no new stripe
            return Err(DecodeError::InconsistentBlock { block: b });
        }
    }
    let provenance = vec![Provenance::Direct; stripes.len()];
    Ok(RecoveredFile { stripes, provenance })
}
