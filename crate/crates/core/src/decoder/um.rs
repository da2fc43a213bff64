//! Unit-memory trellis decoding for the Byzantine scheme.
//!
//! Block `b` is a codeword of `C_alpha = RS(n, 3k+t-1, v alpha^-k)` with
//! message layout `[X_b | u_b | X_{b-1}]`, corrupted by symbol errors. The
//! states are the stripes `X_0..X_{ell-1}` with `X_{-1} = X_ell = 0`.
//!
//! 1. Every block is list decoded in `C_alpha`; results anchor both states.
//! 2. From each known state, chains walk forward through `C_1` (layout
//!    `[X_b | u]`) and backward through `C_2` (layout `[u | X_{b-1}]`).
//! 3. A Viterbi pass over the candidate states picks the path minimising the
//!    summed distance of each block residual to `C * D`.

use std::collections::BTreeSet;
use std::fmt;

use super::{DecodeError, Provenance, RecoveredFile};
use crate::field::{Fe, Field};
use crate::grs::{hamming_distance, star_vec, GrsCode};
use crate::pir::{BlockStatus, PirScheme, ResponseStream, Variant};

/// Candidate states kept per stage.
const MAX_CANDIDATES: usize = 32;
/// Exact nearest-codeword search enumerates at most this many supports.
const MAX_SUBSETS: usize = 20_000;

/// One line of the decoding trace, per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLine {
    pub block: usize,
    pub status: BlockStatus,
    /// Candidates for the state entered by this block (1 at the end).
    pub candidates: usize,
    /// Distance of the block to the chosen path.
    pub metric: usize,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "block {}: status={} candidates={} metric={}",
            self.block + 1,
            self.status,
            self.candidates,
            self.metric
        )
    }
}

struct UmCodes<'a> {
    f: &'a Field,
    storage: &'a GrsCode,
    k: usize,
    t: usize,
    e1: Vec<Fe>,
    e2: Vec<Fe>,
    c_alpha: GrsCode,
    c1: GrsCode,
    c2: GrsCode,
    cd: &'a GrsCode,
    /// For each `|S| = dim(C*D)` support: codewords that are the unit vectors on `S`.
    lagrange: Option<Vec<(Vec<usize>, Vec<Vec<Fe>>)>>,
}

impl<'a> UmCodes<'a> {
    fn new(scheme: &'a PirScheme) -> Result<Self, DecodeError> {
        let f = scheme.field().as_ref();
        let storage = scheme.storage_code();
        let (k, t) = (scheme.k(), scheme.t());
        let offs = scheme.offset_rows(0);
        let e1 = offs.row(0).to_vec();
        let e2 = offs.row(1).to_vec();
        let locs = storage.locators().to_vec();
        let va = star_vec(f, storage.multipliers(), &e1);
        let field = scheme.field().clone();
        let c_alpha = GrsCode::new(field.clone(), 3 * k + t - 1, locs.clone(), va.clone())?;
        let c1 = GrsCode::new(field.clone(), 2 * k + t - 1, locs.clone(), va)?;
        let c2 = GrsCode::new(field, 2 * k + t - 1, locs, storage.multipliers().to_vec())?;
        let cd = scheme.star_code();
        let lagrange = lagrange_bases(cd)?;
        Ok(UmCodes { f, storage, k, t, e1, e2, c_alpha, c1, c2, cd, lagrange })
    }

    fn part(&self, offset: &[Fe], x: &[Fe]) -> Vec<Fe> {
        let y = self.storage.encode(x).expect("state length is k");
        star_vec(self.f, offset, &y)
    }

    fn minus(&self, a: &[Fe], b: &[Fe]) -> Vec<Fe> {
        a.iter().zip(b).map(|(&x, &y)| self.f.sub(x, y)).collect()
    }

    /// Nearest codeword of `C * D` and its distance; `None` when the exact
    /// search is too large and bounded decoding failed.
    fn nearest(&self, word: &[Fe]) -> Option<(usize, Vec<Fe>)> {
        if let Ok(d) = self.cd.bmd_decode(word) {
            return Some((d.errors.len(), d.codeword));
        }
        let bases = self.lagrange.as_ref()?;
        let n = word.len();
        let mut best: Option<(usize, Vec<Fe>)> = None;
        for (support, basis) in bases {
            let mut cw = vec![Fe::ZERO; n];
            for (&j, l) in support.iter().zip(basis) {
                for (c, &lv) in cw.iter_mut().zip(l) {
                    *c = self.f.add(*c, self.f.mul(word[j], lv));
                }
            }
            let d = hamming_distance(&cw, word);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, cw));
            }
        }
        best
    }
}

fn lagrange_bases(cd: &GrsCode) -> Result<Option<Vec<(Vec<usize>, Vec<Vec<Fe>>)>>, DecodeError> {
    let (n, dim) = (cd.n(), cd.k());
    if binomial(n, dim) > MAX_SUBSETS as u128 {
        return Ok(None);
    }
    let mut out = Vec::new();
    let mut support: Vec<usize> = (0..dim).collect();
    loop {
        let mut basis = Vec::with_capacity(dim);
        for &i in &support {
            let word: Vec<Option<Fe>> = (0..n)
                .map(|j| support.contains(&j).then_some(if j == i { Fe::ONE } else { Fe::ZERO }))
                .collect();
            basis.push(cd.encode(&cd.erasure_decode(&word)?)?);
        }
        out.push((support.clone(), basis));
        if !next_combination(&mut support, n) {
            break;
        }
    }
    Ok(Some(out))
}

fn binomial(n: usize, r: usize) -> u128 {
    (0..r.min(n)).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Advances a sorted combination of `0..n`; false after the last one.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let r = c.len();
    for i in (0..r).rev() {
        if c[i] < n - r + i {
            c[i] += 1;
            for j in i + 1..r {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All messages whose codewords lie within `floor((d-1)/2) + 1` of `word`:
/// bounded decoding plus a Chase pass that erases one (d even) or two
/// (d odd) positions.
fn list_decode(code: &GrsCode, word: &[Fe]) -> Vec<Vec<Fe>> {
    let n = code.n();
    let d = code.d();
    let radius = (d - 1) / 2 + 1;
    let mut found = BTreeSet::new();
    if let Ok(r) = code.bmd_decode(word) {
        found.insert(r.message);
    }
    let width = if d % 2 == 0 { 1 } else { 2 };
    if width > n || d <= width {
        return found.into_iter().collect();
    }
    let mut erase: Vec<usize> = (0..width).collect();
    loop {
        let w: Vec<Option<Fe>> = (0..n).map(|j| (!erase.contains(&j)).then_some(word[j])).collect();
        if let Ok(r) = code.errors_and_erasures_decode(&w) {
            if hamming_distance(&r.codeword, word) <= radius {
                found.insert(r.message);
            }
        }
        if !next_combination(&mut erase, n) {
            break;
        }
    }
    found.into_iter().collect()
}

/// Trellis decoding of a Byzantine stream. See [`decode_um_traced`].
pub fn decode_um(stream: &ResponseStream, scheme: &PirScheme) -> Result<RecoveredFile, DecodeError> {
    decode_um_traced(stream, scheme).map(|(file, _)| file)
}

/// Trellis decoding returning one trace line per block.
pub fn decode_um_traced(
    stream: &ResponseStream,
    scheme: &PirScheme,
) -> Result<(RecoveredFile, Vec<TraceLine>), DecodeError> {
    if scheme.variant() != Variant::ByzantineUm {
        return Err(DecodeError::WrongVariant(scheme.variant()));
    }
    let ell = scheme.ell();
    let total = scheme.block_count();
    if stream.len() != total {
        return Err(DecodeError::StreamLength { expected: total, got: stream.len() });
    }
    let n = scheme.n();
    let codes = UmCodes::new(scheme)?;
    let (k, t) = (codes.k, codes.t);
    let zero = vec![Fe::ZERO; k];

    let mut received: Vec<Option<&[Fe]>> = Vec::with_capacity(total);
    for (b, block) in stream.blocks.iter().enumerate() {
        match block.status {
            BlockStatus::Erased => received.push(None),
            _ => match block.vector() {
                Some(v) if v.len() == n => received.push(Some(v)),
                _ => return Err(DecodeError::InconsistentBlock { block: b }),
            },
        }
    }

    // stage s holds candidates for X_s, s in 0..ell
    let mut cands: Vec<BTreeSet<Vec<Fe>>> = vec![BTreeSet::new(); ell];
    let mut anchored: Vec<BTreeSet<Vec<Fe>>> = vec![BTreeSet::new(); ell];
    // work items: (stage, state) with stage in -1..=ell
    let mut work: Vec<(isize, Vec<Fe>)> = vec![(-1, zero.clone()), (ell as isize, zero.clone())];
    let add = |cands: &mut Vec<BTreeSet<Vec<Fe>>>, work: &mut Vec<(isize, Vec<Fe>)>, s: usize, x: Vec<Fe>| {
        if cands[s].len() < MAX_CANDIDATES && cands[s].insert(x.clone()) {
            work.push((s as isize, x));
        }
    };

    // step 1: anchors from the full block code
    for (b, r) in received.iter().enumerate() {
        let Some(r) = r else { continue };
        for msg in list_decode(&codes.c_alpha, r) {
            let (xb, xp) = (&msg[..k], &msg[2 * k + t - 1..]);
            if (b == 0 && xp != zero.as_slice()) || (b == ell && xb != zero.as_slice()) {
                continue;
            }
            if b < ell {
                anchored[b].insert(xb.to_vec());
                add(&mut cands, &mut work, b, xb.to_vec());
            }
            if b >= 1 {
                add(&mut cands, &mut work, b - 1, xp.to_vec());
            }
        }
    }

    // step 2: chains through the coset codes
    while let Some((s, x)) = work.pop() {
        let next = s + 1;
        if next < ell as isize {
            let b = next as usize;
            if let Some(r) = received[b] {
                let res = codes.minus(r, &codes.part(&codes.e2, &x));
                for msg in list_decode(&codes.c1, &res) {
                    add(&mut cands, &mut work, b, msg[..k].to_vec());
                }
            }
        }
        if s >= 1 {
            let b = s as usize;
            if let Some(r) = received[b] {
                let res = codes.minus(r, &codes.part(&codes.e1, &x));
                for msg in list_decode(&codes.c2, &res) {
                    add(&mut cands, &mut work, b - 1, msg[k + t - 1..].to_vec());
                }
            }
        }
    }

    // step 3: Viterbi; `None` is the unknown node with saturated metrics
    let stages: Vec<Vec<Option<Vec<Fe>>>> = (0..=ell + 1)
        .map(|i| match i {
            0 => vec![Some(zero.clone())],
            i if i == ell + 1 => vec![Some(zero.clone())],
            i => cands[i - 1].iter().cloned().map(Some).chain([None]).collect(),
        })
        .collect();
    let saturated = n + 1;
    let edge = |b: usize, prev: &Option<Vec<Fe>>, cur: &Option<Vec<Fe>>| -> (usize, Option<Vec<Fe>>) {
        let Some(r) = received[b] else { return (0, None) };
        let (Some(p), Some(c)) = (prev, cur) else { return (saturated, None) };
        let res = codes.minus(&codes.minus(r, &codes.part(&codes.e1, c)), &codes.part(&codes.e2, p));
        match codes.nearest(&res) {
            Some((d, cw)) => (d, Some(cw)),
            None => (saturated, None),
        }
    };
    let mut cost = vec![0usize];
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(total);
    for b in 0..total {
        let (prev, cur) = (&stages[b], &stages[b + 1]);
        let mut next_cost = Vec::with_capacity(cur.len());
        let mut ptr = Vec::with_capacity(cur.len());
        for c in cur {
            let mut best = (usize::MAX, 0);
            for (pi, p) in prev.iter().enumerate() {
                let m = cost[pi].saturating_add(edge(b, p, c).0);
                if m < best.0 {
                    best = (m, pi);
                }
            }
            next_cost.push(best.0);
            ptr.push(best.1);
        }
        cost = next_cost;
        back.push(ptr);
    }
    let mut path = vec![0usize; total + 1];
    for b in (0..total).rev() {
        path[b] = back[b][path[b + 1]];
    }
    let states: Vec<&Option<Vec<Fe>>> = (0..=total).map(|i| &stages[i][path[i]]).collect();
    if let Some(s) = states.iter().position(|x| x.is_none()) {
        return Err(DecodeError::DecodingFailure(format!("no candidate state survives for stripe {s}")));
    }

    // step 4: re-split each block and record the trace
    let mut trace = Vec::with_capacity(total);
    for b in 0..total {
        let (metric, cw) = edge(b, states[b], states[b + 1]);
        if let (Some(cw), Some(r)) = (cw, received[b]) {
            let (Some(p), Some(c)) = (states[b], states[b + 1]) else { unreachable!("checked above") };
            let u = codes.cd.erasure_decode(&cw.iter().map(|&x| Some(x)).collect::<Vec<_>>())?;
            let msg: Vec<Fe> = c.iter().chain(&u).chain(p.iter()).copied().collect();
            let whole = codes.c_alpha.encode(&msg)?;
            if hamming_distance(&whole, r) != metric {
                return Err(DecodeError::DecodingFailure(format!("block {b} does not split into its layout")));
            }
        }
        trace.push(TraceLine {
            block: b,
            status: stream.blocks[b].status,
            candidates: stages[b + 1].len() - usize::from(b < ell),
            metric,
        });
    }
    let stripes: Vec<Vec<Fe>> = states[1..=ell].iter().map(|x| (*x).clone().expect("checked above")).collect();
    let provenance = stripes
        .iter()
        .enumerate()
        .map(|(s, x)| if anchored[s].contains(x) { Provenance::Direct } else { Provenance::Trellis })
        .collect();
    Ok((RecoveredFile { stripes, provenance }, trace))
}
