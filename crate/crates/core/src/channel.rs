//! Seedable channel models: whole-block erasure bursts and symbol errors.
//!
//! Block and server indices are 0-based in memory and 1-based in CSV.

use std::collections::BTreeSet;
use std::io;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::decoder::{check_guarantee, UmDistanceProfile};
use crate::field::{Fe, Field};
use crate::pir::{BlockStatus, ResponseStream};
use crate::rng::{stream_rng, Purpose};

/// Guard for exhaustive enumeration of admissible erasure schedules.
pub const MAX_ENUMERATED_BLOCKS: usize = 20;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("malformed schedule row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Set of erased blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ErasureSchedule {
    pub blocks: BTreeSet<usize>,
}

impl ErasureSchedule {
    pub fn new(blocks: impl IntoIterator<Item = usize>) -> Self {
        ErasureSchedule { blocks: blocks.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Maximal runs of consecutive erased blocks as `(start, length)`.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let mut runs: Vec<(usize, usize)> = Vec::new();
        for &b in &self.blocks {
            match runs.last_mut() {
                Some((s, len)) if *s + *len == b => *len += 1,
                _ => runs.push((b, 1)),
            }
        }
        runs
    }

    /// Every run has length at most `eps` and consecutive runs are separated
    /// by at least `window - eps` intact blocks, all within `0..total`.
    pub fn is_admissible(&self, total: usize, window: usize, eps: usize) -> bool {
        if self.blocks.iter().any(|&b| b >= total) {
            return false;
        }
        let runs = self.runs();
        runs.iter().all(|&(_, len)| len <= eps)
            && runs.windows(2).all(|w| w[1].0 - (w[0].0 + w[0].1) >= window - eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurstMode {
    /// A single burst of every length `1..=eps` at every position.
    Exhaustive,
    /// Every admissible schedule (small streams only).
    AllAdmissible,
    /// The `N` shifts of "erase the first `eps` blocks of every window".
    ShiftedFamily,
    /// `count` random admissible schedules.
    Random { seed: u64, count: usize },
}

/// Erasure schedules over the `ell + M` blocks of a stream.
pub fn gen_burst_patterns(
    ell: usize,
    memory: usize,
    window: usize,
    eps: usize,
    mode: BurstMode,
) -> Result<Vec<ErasureSchedule>, ChannelError> {
    if window <= eps {
        return Err(ChannelError::InvalidParams(format!("need N > eps (N={window}, eps={eps})")));
    }
    let total = ell + memory;
    if eps == 0 {
        return Ok(vec![ErasureSchedule::default()]);
    }
    let out = match mode {
        BurstMode::Exhaustive => (1..=eps)
            .flat_map(|len| (0..=total.saturating_sub(len)).map(move |s| ErasureSchedule::new(s..s + len)))
            .filter(|s| !s.is_empty() && s.blocks.iter().all(|&b| b < total))
            .collect(),
        BurstMode::AllAdmissible => {
            if total > MAX_ENUMERATED_BLOCKS {
                return Err(ChannelError::InvalidParams(format!(
                    "{total} blocks exceed the enumeration limit {MAX_ENUMERATED_BLOCKS}"
                )));
            }
            (0u32..1 << total)
                .map(|mask| ErasureSchedule::new((0..total).filter(|&b| mask >> b & 1 == 1)))
                .filter(|s| s.is_admissible(total, window, eps))
                .collect()
        }
        BurstMode::ShiftedFamily => {
            // 1-based block positions lN+z+1..lN+z+eps, wrapped modulo
            // ceil(ell/N) N and kept within 1..=ell+eps.
            let periods = ell.div_ceil(window);
            let span = periods * window;
            (0..window)
                .map(|z| {
                    let mut set = BTreeSet::new();
                    for l in 0..periods {
                        for e in 1..=eps {
                            let mut pos = l * window + z + e;
                            if pos > span {
                                pos -= span;
                            }
                            if pos <= ell + eps && pos <= total {
                                set.insert(pos - 1);
                            }
                        }
                    }
                    ErasureSchedule { blocks: set }
                })
                .collect()
        }
        BurstMode::Random { seed, count } => (0..count)
            .map(|i| {
                let mut rng = stream_rng(seed, Purpose::Schedule, i as u64);
                let mut set = BTreeSet::new();
                let mut b = 0;
                while b < total {
                    if rng.random_range(0..window) == 0 {
                        let len = rng.random_range(1..=eps).min(total - b);
                        set.extend(b..b + len);
                        b += len + (window - eps);
                    } else {
                        b += 1;
                    }
                }
                ErasureSchedule { blocks: set }
            })
            .collect(),
    };
    Ok(out)
}

/// Marks the scheduled blocks erased and drops their symbols.
pub fn apply_erasures(stream: &ResponseStream, schedule: &ErasureSchedule) -> ResponseStream {
    let mut out = stream.clone();
    for &b in &schedule.blocks {
        if let Some(block) = out.blocks.get_mut(b) {
            block.status = BlockStatus::Erased;
            block.rounds.clear();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErrorMode {
    /// No errors.
    Empty,
    /// Random per-block weights respecting the extended-row-distance budget.
    Budget,
    /// `weight` random errors in every block, ignoring the budget.
    Adversarial { weight: usize },
    /// The same `b` servers answer wrongly in every block.
    ByzantineFixed { b: usize },
}

/// Positions of substituted symbols. Substituted values are drawn when the
/// schedule is applied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorSchedule {
    /// Per block, the sorted corrupted servers.
    pub blocks: Vec<Vec<usize>>,
    /// Corrupted server set when it is fixed across blocks.
    pub fixed_servers: Option<Vec<usize>>,
    /// Whether the budget condition was re-verified on the weights.
    pub guarantee_checked: bool,
}

impl ErrorSchedule {
    pub fn weights(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn total_weight(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }
}

/// Error schedule over `blocks` blocks of `n` symbols.
pub fn gen_error_schedule(
    profile: &UmDistanceProfile,
    n: usize,
    blocks: usize,
    mode: &ErrorMode,
    seed: u64,
) -> Result<ErrorSchedule, ChannelError> {
    let mut rng = stream_rng(seed, Purpose::Channel, 0);
    let positions = |w: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
        let mut v = sample(rng, n, w.min(n)).into_vec();
        v.sort_unstable();
        v
    };
    match *mode {
        ErrorMode::Empty => Ok(ErrorSchedule { blocks: vec![Vec::new(); blocks], fixed_servers: None, guarantee_checked: true }),
        ErrorMode::Adversarial { weight } => {
            if weight > n {
                return Err(ChannelError::InvalidParams(format!("weight {weight} exceeds n = {n}")));
            }
            let blocks = (0..blocks).map(|_| positions(weight, &mut rng)).collect();
            Ok(ErrorSchedule { blocks, fixed_servers: None, guarantee_checked: false })
        }
        ErrorMode::ByzantineFixed { b } => {
            if b > n {
                return Err(ChannelError::InvalidParams(format!("b = {b} exceeds n = {n}")));
            }
            let servers = positions(b, &mut rng);
            let sched = vec![servers.clone(); blocks];
            let checked = check_guarantee(&vec![b; blocks], profile);
            Ok(ErrorSchedule { blocks: sched, fixed_servers: Some(servers), guarantee_checked: checked })
        }
        ErrorMode::Budget => {
            // Each block takes a random weight up to the largest value that
            // keeps every window ending at it within budget.
            let mut weights: Vec<usize> = Vec::with_capacity(blocks);
            for _ in 0..blocks {
                let mut cap = n;
                let mut sum = 0usize;
                for len in 1..=weights.len() + 1 {
                    if len > 1 {
                        sum += weights[weights.len() - (len - 1)];
                    }
                    // need 2 (sum + w) < dbar_len
                    let limit = profile.extended_row_distance(len);
                    let max_w = (limit.saturating_sub(1) / 2).saturating_sub(sum);
                    if 2 * sum >= limit {
                        cap = 0;
                        break;
                    }
                    cap = cap.min(max_w);
                }
                let w = if rng.random_bool(0.5) { 0 } else { rng.random_range(0..=cap) };
                weights.push(w);
            }
            let ok = check_guarantee(&weights, profile);
            if !ok {
                return Err(ChannelError::InvalidParams("distance profile admits no error budget".into()));
            }
            let sched = weights.iter().map(|&w| positions(w, &mut rng)).collect();
            Ok(ErrorSchedule { blocks: sched, fixed_servers: None, guarantee_checked: true })
        }
    }
}

/// Replaces every scheduled symbol with a uniformly random different value
/// and marks touched blocks errored.
pub fn apply_errors(field: &Field, stream: &ResponseStream, schedule: &ErrorSchedule, seed: u64) -> ResponseStream {
    let mut rng = stream_rng(seed, Purpose::Channel, 1);
    let mut out = stream.clone();
    for (b, servers) in schedule.blocks.iter().enumerate() {
        let Some(block) = out.blocks.get_mut(b) else { break };
        if block.status == BlockStatus::Erased || servers.is_empty() {
            continue;
        }
        for round in block.rounds.iter_mut() {
            for &j in servers {
                let orig = round[j];
                let mut v = orig;
                while v == orig {
                    v = Fe(rng.random_range(0..field.order()));
                }
                round[j] = v;
            }
        }
        block.status = BlockStatus::Errored;
    }
    out
}

/// Writes `block,server,kind` rows (1-based; server `*` marks a whole-block
/// erasure).
pub fn write_schedule_csv<W: io::Write>(
    erasures: &ErasureSchedule,
    errors: &ErrorSchedule,
    out: W,
) -> Result<(), ChannelError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["block", "server", "kind"])?;
    for &b in &erasures.blocks {
        w.write_record([(b + 1).to_string(), "*".to_string(), "erasure".to_string()])?;
    }
    for (b, servers) in errors.blocks.iter().enumerate() {
        for &j in servers {
            w.write_record([(b + 1).to_string(), (j + 1).to_string(), "error".to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parses the format of [`write_schedule_csv`] for `blocks` blocks.
pub fn read_schedule_csv<R: io::Read>(input: R, blocks: usize) -> Result<(ErasureSchedule, ErrorSchedule), ChannelError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut erasures = ErasureSchedule::default();
    let mut errors = ErrorSchedule { blocks: vec![Vec::new(); blocks], ..Default::default() };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let bad = |reason: &str| ChannelError::BadRow { row, reason: reason.to_string() };
        let b: usize = rec.get(0).and_then(|s| s.trim().parse().ok()).filter(|&b| b >= 1 && b <= blocks).ok_or_else(|| bad("block out of range"))?;
        match rec.get(2).map(str::trim) {
            Some("erasure") => {
                erasures.blocks.insert(b - 1);
            }
            Some("error") => {
                let j: usize = rec.get(1).and_then(|s| s.trim().parse().ok()).filter(|&j| j >= 1).ok_or_else(|| bad("bad server"))?;
                errors.blocks[b - 1].push(j - 1);
            }
            _ => return Err(bad("kind must be erasure or error")),
        }
    }
    for v in errors.blocks.iter_mut() {
        v.sort_unstable();
        v.dedup();
    }
    Ok((erasures, errors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pir::ResponseBlock;

    fn profile() -> UmDistanceProfile {
        UmDistanceProfile::byzantine(10, 2, 2)
    }

    fn stream(n: usize, blocks: usize) -> ResponseStream {
        ResponseStream {
            blocks: (0..blocks)
                .map(|b| ResponseBlock { status: BlockStatus::Intact, rounds: vec![(0..n).map(|j| Fe((b * n + j) as u32 % 16)).collect()] })
                .collect(),
            downloaded: (n * blocks) as u64,
        }
    }

    #[test]
    fn shifted_family_matches_figure() {
        let pats = gen_burst_patterns(22, 2, 5, 2, BurstMode::ShiftedFamily).unwrap();
        assert_eq!(pats.len(), 5);
        let one_based = |s: &ErasureSchedule| s.blocks.iter().map(|b| b + 1).collect::<Vec<_>>();
        assert_eq!(one_based(&pats[0]), vec![1, 2, 6, 7, 11, 12, 16, 17, 21, 22]);
        assert_eq!(one_based(&pats[1]), vec![2, 3, 7, 8, 12, 13, 17, 18, 22, 23]);
        assert_eq!(one_based(&pats[2]), vec![3, 4, 8, 9, 13, 14, 18, 19, 23, 24]);
        assert_eq!(one_based(&pats[3]), vec![4, 5, 9, 10, 14, 15, 19, 20, 24]);
        assert_eq!(one_based(&pats[4]), vec![1, 5, 6, 10, 11, 15, 16, 20, 21]);
        // every block erased exactly eps times over the family
        for b in 0..24 {
            assert_eq!(pats.iter().filter(|p| p.blocks.contains(&b)).count(), 2, "block {}", b + 1);
        }
        assert!(pats.iter().all(|p| p.is_admissible(24, 5, 2)));
    }

    #[test]
    fn exhaustive_and_trivial() {
        assert_eq!(gen_burst_patterns(5, 0, 3, 0, BurstMode::Exhaustive).unwrap(), vec![ErasureSchedule::default()]);
        let pats = gen_burst_patterns(4, 1, 3, 1, BurstMode::Exhaustive).unwrap();
        assert_eq!(pats, (0..5).map(|b| ErasureSchedule::new([b])).collect::<Vec<_>>());
        assert!(gen_burst_patterns(4, 1, 1, 1, BurstMode::Exhaustive).is_err());
        let all = gen_burst_patterns(4, 1, 3, 1, BurstMode::AllAdmissible).unwrap();
        assert!(all.contains(&ErasureSchedule::new([0, 3])));
        assert!(!all.contains(&ErasureSchedule::new([0, 2])));
        for s in gen_burst_patterns(30, 2, 6, 2, BurstMode::Random { seed: 3, count: 50 }).unwrap() {
            assert!(s.is_admissible(32, 6, 2));
        }
    }

    #[test]
    fn erasure_application() {
        let s = stream(6, 5);
        assert_eq!(apply_erasures(&s, &ErasureSchedule::default()), s);
        let all = apply_erasures(&s, &ErasureSchedule::new(0..5));
        assert!(all.blocks.iter().all(|b| b.status == BlockStatus::Erased));
        let one = apply_erasures(&s, &ErasureSchedule::new([1]));
        assert_eq!(one.blocks[1].status, BlockStatus::Erased);
        assert_eq!(one.blocks[0], s.blocks[0]);
    }

    #[test]
    fn error_schedules() {
        let p = profile();
        for seed in 0..200 {
            let e = gen_error_schedule(&p, 10, 8, &ErrorMode::Budget, seed).unwrap();
            assert!(check_guarantee(&e.weights(), &p));
        }
        let e = gen_error_schedule(&p, 10, 8, &ErrorMode::Empty, 0).unwrap();
        assert_eq!(e.total_weight(), 0);
        let e = gen_error_schedule(&p, 10, 8, &ErrorMode::ByzantineFixed { b: 1 }, 4).unwrap();
        let first = e.blocks[0].clone();
        assert!(e.blocks.iter().all(|b| *b == first));
        assert_eq!(e.fixed_servers, Some(first));
    }

    #[test]
    fn error_application() {
        let f = Field::with_order(16).unwrap();
        let s = stream(10, 4);
        let empty = ErrorSchedule { blocks: vec![Vec::new(); 4], ..Default::default() };
        assert_eq!(apply_errors(&f, &s, &empty, 1), s);
        let mut one = empty.clone();
        one.blocks[2] = vec![7];
        for seed in 0..100 {
            let out = apply_errors(&f, &s, &one, seed);
            let diff: usize = (0..4).map(|b| crate::grs::hamming_distance(&out.blocks[b].rounds[0], &s.blocks[b].rounds[0])).sum();
            assert_eq!(diff, 1);
            assert_eq!(out.blocks[2].status, BlockStatus::Errored);
        }
        assert_eq!(apply_errors(&f, &s, &one, 5), apply_errors(&f, &s, &one, 5));
    }

    #[test]
    fn schedule_csv_round_trip() {
        let er = ErasureSchedule::new([1, 4]);
        let mut ee = ErrorSchedule { blocks: vec![Vec::new(); 6], ..Default::default() };
        ee.blocks[0] = vec![2, 5];
        ee.blocks[3] = vec![0];
        let mut buf = Vec::new();
        write_schedule_csv(&er, &ee, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("block,server,kind\n2,*,erasure\n"));
        let (er2, ee2) = read_schedule_csv(buf.as_slice(), 6).unwrap();
        assert_eq!(er2, er);
        assert_eq!(ee2.blocks, ee.blocks);
    }
}
