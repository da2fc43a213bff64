//! Coded storage, convolutional star-product queries, honest server
//! responses and the exhaustive collusion privacy audit.
//!
//! Indexing is 0-based throughout: stripes `0..ell`, blocks `0..ell+M`,
//! servers `0..n`, files `0..m`. Block `b` mixes stripes `b, b-1, ..., b-M`;
//! stripes outside `0..ell` are zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::field::{Fe, Field, FieldError};
use crate::grs::{star_vec, GrsCode, GrsError};
use crate::linalg::{self, Matrix};
use crate::rng::{random_vector, stream_rng, Purpose};

/// Upper limit on randomness combinations enumerated by the privacy audit.
pub const AUDIT_LIMIT: u128 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PirError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("support of size {size} exceeds d* - 1 = {max}")]
    SupportTooLarge { size: usize, max: usize },
    #[error("support of size {size} is below the minimum {min}")]
    SupportTooSmall { size: usize, min: usize },
    #[error("invalid support set: {0}")]
    InvalidSupport(String),
    #[error("locator 0 is not allowed when negative powers are used")]
    ZeroLocator,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("audit needs {combinations} randomness combinations, limit is {limit}")]
    AuditTooLarge { combinations: u128, limit: u128 },
    #[error("colluding set has {size} servers but the scheme protects only {t}")]
    CollusionTooLarge { size: usize, t: usize },
    #[error(transparent)]
    Grs(#[from] GrsError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    PlainConv,
    BlockErasure,
    ByzantineUm,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "plain" | "plain_conv" => Ok(Variant::PlainConv),
            "block" | "block_erasure" => Ok(Variant::BlockErasure),
            "byzantine" | "byzantine_um" => Ok(Variant::ByzantineUm),
            other => Err(format!("unknown variant {other:?} (expected plain_conv, block_erasure or byzantine_um)")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::PlainConv => "plain_conv",
            Variant::BlockErasure => "block_erasure",
            Variant::ByzantineUm => "byzantine_um",
        })
    }
}

/// `m` files of `ell` stripes, each stripe encoded with the storage code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageSystem {
    code: GrsCode,
    /// `files[s][x]` is stripe `x` of file `s` (k symbols).
    files: Vec<Vec<Vec<Fe>>>,
    /// `encoded[x][s]` is the codeword of stripe `x` of file `s` (n symbols).
    encoded: Vec<Vec<Vec<Fe>>>,
}

pub fn storage_encode(files: Vec<Vec<Vec<Fe>>>, code: &GrsCode) -> Result<StorageSystem, PirError> {
    let m = files.len();
    if m == 0 {
        return Err(PirError::ShapeMismatch("no files".into()));
    }
    let ell = files[0].len();
    if ell == 0 {
        return Err(PirError::ShapeMismatch("files have no stripes".into()));
    }
    for (s, file) in files.iter().enumerate() {
        if file.len() != ell {
            return Err(PirError::ShapeMismatch(format!("file {s} has {} stripes, expected {ell}", file.len())));
        }
        if let Some(x) = file.iter().position(|st| st.len() != code.k()) {
            return Err(PirError::ShapeMismatch(format!("file {s} stripe {x} does not have {} symbols", code.k())));
        }
    }
    let mut encoded = Vec::with_capacity(ell);
    for x in 0..ell {
        let row: Result<Vec<_>, _> = files.iter().map(|file| code.encode(&file[x])).collect();
        encoded.push(row?);
    }
    Ok(StorageSystem { code: code.clone(), files, encoded })
}

/// Uniformly random file contents from a seed.
pub fn random_files(field: &Field, m: usize, ell: usize, k: usize, seed: u64) -> Vec<Vec<Vec<Fe>>> {
    let mut rng = stream_rng(seed, Purpose::Files, 0);
    (0..m).map(|_| (0..ell).map(|_| random_vector(field, k, &mut rng)).collect()).collect()
}

impl StorageSystem {
    pub fn code(&self) -> &GrsCode {
        &self.code
    }

    pub fn m(&self) -> usize {
        self.files.len()
    }

    pub fn ell(&self) -> usize {
        self.encoded.len()
    }

    pub fn file(&self, s: usize) -> &[Vec<Fe>] {
        &self.files[s]
    }

    /// Encoded stripe `x` of file `s`, or `None` outside `0..ell`.
    pub fn encoded_stripe(&self, x: isize, s: usize) -> Option<&[Fe]> {
        (x >= 0 && (x as usize) < self.ell()).then(|| self.encoded[x as usize][s].as_slice())
    }

    /// Symbol stored on server `j` for stripe `x` of file `s`, zero-padded.
    pub fn symbol(&self, x: isize, s: usize, j: usize) -> Fe {
        self.encoded_stripe(x, s).map_or(Fe::ZERO, |c| c[j])
    }

    /// Re-encodes every stripe and compares with the stored symbols.
    pub fn verify(&self) -> bool {
        (0..self.ell()).all(|x| (0..self.m()).all(|s| self.code.encode(&self.files[s][x]).ok().as_ref() == Some(&self.encoded[x][s])))
    }
}

/// One retrieval plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PirScheme {
    variant: Variant,
    storage: GrsCode,
    retrieval: GrsCode,
    star: GrsCode,
    m: usize,
    ell: usize,
    memory: usize,
    desired: usize,
    support: Vec<usize>,
    rounds: Vec<Vec<usize>>,
    window: usize,
    burst: usize,
}

impl PirScheme {
    /// Convolutional scheme with memory `memory` and support `support`.
    pub fn plain(
        storage: GrsCode,
        t: usize,
        m: usize,
        ell: usize,
        memory: usize,
        support: Vec<usize>,
        desired: usize,
    ) -> Result<Self, PirError> {
        let (retrieval, star) = Self::codes(&storage, t)?;
        let support = validate_support(storage.n(), support)?;
        let max = star.d() - 1;
        if support.len() > max {
            return Err(PirError::SupportTooLarge { size: support.len(), max });
        }
        if support.len() < storage.k() {
            return Err(PirError::SupportTooSmall { size: support.len(), min: storage.k() });
        }
        check_common(m, ell, desired)?;
        Ok(PirScheme {
            variant: Variant::PlainConv,
            rounds: vec![support.clone()],
            storage,
            retrieval,
            star,
            m,
            ell,
            memory,
            desired,
            support,
            window: 1,
            burst: 0,
        })
    }

    /// Block-erasure scheme for bursts of up to `eps` blocks resolved within
    /// windows of `window` blocks; memory equals `eps`. When the support is
    /// larger than `d* - 1` each block is split into sub-rounds.
    pub fn block_erasure(
        storage: GrsCode,
        t: usize,
        m: usize,
        ell: usize,
        window: usize,
        eps: usize,
        support: Vec<usize>,
        desired: usize,
    ) -> Result<Self, PirError> {
        if window <= eps {
            return Err(PirError::InvalidParams(format!("window N={window} must exceed burst length eps={eps}")));
        }
        let (retrieval, star) = Self::codes(&storage, t)?;
        let support = validate_support(storage.n(), support)?;
        let min = (window * storage.k()).div_ceil(window - eps);
        if support.len() < min {
            return Err(PirError::SupportTooSmall { size: support.len(), min });
        }
        check_common(m, ell, desired)?;
        let per_round = star.d() - 1;
        if per_round == 0 {
            return Err(PirError::InvalidParams("C*D has distance 1, no position can be erased".into()));
        }
        let rounds = support.chunks(per_round).map(|c| c.to_vec()).collect();
        Ok(PirScheme {
            variant: Variant::BlockErasure,
            storage,
            retrieval,
            star,
            m,
            ell,
            memory: eps,
            desired,
            support,
            rounds,
            window,
            burst: eps,
        })
    }

    /// Unit-memory scheme for Byzantine servers with full support.
    pub fn byzantine(storage: GrsCode, t: usize, m: usize, ell: usize, desired: usize) -> Result<Self, PirError> {
        let (n, k) = (storage.n(), storage.k());
        if n <= 3 * k + t - 1 {
            return Err(PirError::InvalidParams(format!("byzantine scheme needs n > 3k+t-1 (n={n}, k={k}, t={t})")));
        }
        if storage.locators().iter().any(|a| a.is_zero()) {
            return Err(PirError::ZeroLocator);
        }
        let (retrieval, star) = Self::codes(&storage, t)?;
        check_common(m, ell, desired)?;
        let support: Vec<usize> = (0..n).collect();
        let scheme = PirScheme {
            variant: Variant::ByzantineUm,
            storage,
            retrieval,
            star,
            m,
            ell,
            memory: 1,
            desired,
            rounds: vec![support.clone()],
            support,
            window: 1,
            burst: 0,
        };
        // the three constituent codes must intersect trivially
        let f = scheme.field();
        let g = scheme.storage.generator_matrix();
        let offs = scheme.offset_rows(0);
        let g1 = Matrix::from_rows(&(0..k).map(|r| star_vec(f, g.row(r), offs.row(0))).collect::<Vec<_>>());
        let g2 = Matrix::from_rows(&(0..k).map(|r| star_vec(f, g.row(r), offs.row(1))).collect::<Vec<_>>());
        let stacked = g1.vstack(&scheme.star.generator_matrix()).vstack(&g2);
        if linalg::rank(f, &stacked) != 3 * k + t - 1 {
            return Err(PirError::InvalidParams("constituent codes do not form a direct sum".into()));
        }
        Ok(scheme)
    }

    fn codes(storage: &GrsCode, t: usize) -> Result<(GrsCode, GrsCode), PirError> {
        if t == 0 {
            return Err(PirError::InvalidParams("privacy level t must be at least 1".into()));
        }
        let n = storage.n();
        if storage.k() + t - 1 >= n {
            return Err(PirError::InvalidParams(format!(
                "k+t-1 = {} must be below n = {n}",
                storage.k() + t - 1
            )));
        }
        let retrieval = GrsCode::reed_solomon(storage.field().clone(), t, storage.locators().to_vec())?;
        let star = storage.star(&retrieval)?;
        Ok((retrieval, star))
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn field(&self) -> &Arc<Field> {
        self.storage.field()
    }

    pub fn storage_code(&self) -> &GrsCode {
        &self.storage
    }

    pub fn retrieval_code(&self) -> &GrsCode {
        &self.retrieval
    }

    /// The star product code `C * D`.
    pub fn star_code(&self) -> &GrsCode {
        &self.star
    }

    pub fn n(&self) -> usize {
        self.storage.n()
    }

    pub fn k(&self) -> usize {
        self.storage.k()
    }

    pub fn t(&self) -> usize {
        self.retrieval.k()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn desired(&self) -> usize {
        self.desired
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Support positions handled in each sub-round of a block.
    pub fn rounds(&self) -> &[Vec<usize>] {
        &self.rounds
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn burst(&self) -> usize {
        self.burst
    }

    pub fn block_count(&self) -> usize {
        self.ell + self.memory
    }

    /// Rows of the randomness matrix and length of each query vector.
    pub fn query_rows(&self) -> usize {
        (self.memory + 1) * self.m
    }

    /// Symbols downloaded per block over all sub-rounds.
    pub fn downloads_per_block(&self) -> usize {
        self.rounds.len() * self.n()
    }

    /// Total symbols downloaded by one protocol run.
    pub fn total_downloads(&self) -> u64 {
        (self.block_count() * self.downloads_per_block()) as u64
    }

    /// Offset rows `E_1..E_{M+1}` for sub-round `round`, an `(M+1) x n` matrix.
    pub fn offset_rows(&self, round: usize) -> Matrix {
        let f = self.field();
        let k = self.k() as i64;
        let t = self.t() as i64;
        let locs = self.storage.locators();
        match self.variant {
            Variant::ByzantineUm => Matrix::from_fn(2, self.n(), |z, j| {
                let e = if z == 0 { -k } else { k + t - 1 };
                f.pow_signed(locs[j], e).expect("byzantine locators are nonzero")
            }),
            _ => {
                let part = &self.rounds[round];
                Matrix::from_fn(self.memory + 1, self.n(), |z, j| {
                    if part.contains(&j) {
                        f.pow(locs[j], (z as u64) * k as u64)
                    } else {
                        Fe::ZERO
                    }
                })
            }
        }
    }

    /// Same plan retrieving a different file.
    pub fn with_desired(&self, desired: usize) -> Result<Self, PirError> {
        check_common(self.m, self.ell, desired)?;
        Ok(PirScheme { desired, ..self.clone() })
    }

    fn check_storage(&self, sys: &StorageSystem) -> Result<(), PirError> {
        if sys.code != self.storage {
            return Err(PirError::ShapeMismatch("storage code differs from the scheme's".into()));
        }
        if sys.m() != self.m || sys.ell() != self.ell {
            return Err(PirError::ShapeMismatch(format!(
                "storage holds {} files of {} stripes, scheme expects {} of {}",
                sys.m(),
                sys.ell(),
                self.m,
                self.ell
            )));
        }
        Ok(())
    }
}

fn validate_support(n: usize, support: Vec<usize>) -> Result<Vec<usize>, PirError> {
    let mut seen = BTreeSet::new();
    for &j in &support {
        if j >= n {
            return Err(PirError::InvalidSupport(format!("position {} outside 1..={n}", j + 1)));
        }
        if !seen.insert(j) {
            return Err(PirError::InvalidSupport(format!("position {} repeated", j + 1)));
        }
    }
    Ok(seen.into_iter().collect())
}

fn check_common(m: usize, ell: usize, desired: usize) -> Result<(), PirError> {
    if m == 0 || ell == 0 {
        return Err(PirError::InvalidParams("m and ell must be positive".into()));
    }
    if desired >= m {
        return Err(PirError::InvalidParams(format!("desired file {} outside 1..={m}", desired + 1)));
    }
    Ok(())
}

/// Queries of one sub-round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRound {
    /// Randomness matrix: each row a uniform codeword of the retrieval code.
    pub d_mat: Matrix,
    /// `d_mat` plus the offsets; column `j` is the query sent to server `j`.
    pub queries: Matrix,
}

impl QueryRound {
    pub fn query(&self, j: usize) -> Vec<Fe> {
        self.queries.column(j)
    }
}

/// Query generation. Round `r` draws its randomness from its own stream of
/// `seed`, so every round is reproducible on its own.
pub fn make_queries(scheme: &PirScheme, seed: u64) -> Vec<QueryRound> {
    let f = scheme.field();
    let rows = scheme.query_rows();
    (0..scheme.rounds.len())
        .map(|r| {
            let mut rng = stream_rng(seed, Purpose::Query, r as u64);
            let d_rows: Vec<Vec<Fe>> = (0..rows)
                .map(|_| {
                    let msg = random_vector(f, scheme.t(), &mut rng);
                    scheme.retrieval.encode(&msg).expect("message has length t")
                })
                .collect();
            let d_mat = Matrix::from_rows(&d_rows);
            let offs = scheme.offset_rows(r);
            let mut queries = d_mat.clone();
            for z in 0..=scheme.memory {
                let row = z * scheme.m + scheme.desired;
                for j in 0..scheme.n() {
                    queries[(row, j)] = f.add(queries[(row, j)], offs[(z, j)]);
                }
            }
            QueryRound { d_mat, queries }
        })
        .collect()
}

/// Honest answer of server `j` in block `block` to query `q_j`: the inner
/// product with the stacked column `(Y_b, Y_{b-1}, ..., Y_{b-M})` at `j`.
pub fn server_respond(sys: &StorageSystem, scheme: &PirScheme, q_j: &[Fe], block: usize, j: usize) -> Fe {
    let f = scheme.field();
    let m = scheme.m;
    let mut acc = Fe::ZERO;
    for z in 0..=scheme.memory {
        let x = block as isize - z as isize;
        if x < 0 || x as usize >= sys.ell() {
            continue;
        }
        for s in 0..m {
            acc = f.add(acc, f.mul(q_j[z * m + s], sys.symbol(x, s, j)));
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockStatus {
    Intact,
    Erased,
    Errored,
}

impl fmt::Display for BlockStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockStatus::Intact => "intact",
            BlockStatus::Erased => "erased",
            BlockStatus::Errored => "errored",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseBlock {
    pub status: BlockStatus,
    /// One length-`n` response vector per sub-round; empty when erased.
    pub rounds: Vec<Vec<Fe>>,
}

impl ResponseBlock {
    /// Response vector of the first sub-round.
    pub fn vector(&self) -> Option<&[Fe]> {
        self.rounds.first().map(|v| v.as_slice())
    }
}

/// The `ell + M` received blocks of one protocol run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseStream {
    pub blocks: Vec<ResponseBlock>,
    /// Symbols requested from the servers, including those later lost.
    pub downloaded: u64,
}

impl ResponseStream {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Writes `block,server,symbol,round` rows (1-based indices), skipping
    /// erased blocks.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["block", "server", "symbol", "round"])?;
        for (b, block) in self.blocks.iter().enumerate() {
            for (r, v) in block.rounds.iter().enumerate() {
                for (j, x) in v.iter().enumerate() {
                    w.write_record([(b + 1).to_string(), (j + 1).to_string(), x.0.to_string(), (r + 1).to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs all `ell + M` iterations with honest servers.
pub fn run_protocol(sys: &StorageSystem, scheme: &PirScheme, seed: u64) -> Result<ResponseStream, PirError> {
    scheme.check_storage(sys)?;
    let queries = make_queries(scheme, seed);
    let per_server: Vec<Vec<Vec<Fe>>> =
        queries.iter().map(|qr| (0..scheme.n()).map(|j| qr.query(j)).collect()).collect();
    let blocks = (0..scheme.block_count())
        .map(|b| ResponseBlock {
            status: BlockStatus::Intact,
            rounds: per_server
                .iter()
                .map(|qs| (0..scheme.n()).map(|j| server_respond(sys, scheme, &qs[j], b, j)).collect())
                .collect(),
        })
        .collect();
    Ok(ResponseStream { blocks, downloaded: scheme.total_downloads() })
}

/// Query distribution under audit: randomness rows drawn from a retrieval
/// code of dimension `dim` (possibly 0) plus the offsets of the desired file.
#[derive(Debug, Clone)]
pub struct AuditFamily {
    field: Arc<Field>,
    retrieval: Option<GrsCode>,
    offsets: Matrix,
    m: usize,
    memory: usize,
    t: usize,
}

impl AuditFamily {
    /// The family realized by `scheme` (first sub-round).
    pub fn from_scheme(scheme: &PirScheme) -> Self {
        AuditFamily {
            field: scheme.field().clone(),
            retrieval: Some(scheme.retrieval.clone()),
            offsets: scheme.offset_rows(0),
            m: scheme.m,
            memory: scheme.memory,
            t: scheme.t(),
        }
    }

    /// Same offsets but randomness from a code of dimension `dim`; `dim < t`
    /// gives a deliberately broken scheme.
    pub fn with_retrieval_dim(scheme: &PirScheme, dim: usize) -> Result<Self, PirError> {
        let retrieval = if dim == 0 {
            None
        } else {
            Some(scheme.retrieval.with_dimension(dim)?)
        };
        Ok(AuditFamily { retrieval, ..Self::from_scheme(scheme) })
    }

    fn dim(&self) -> usize {
        self.retrieval.as_ref().map_or(0, |c| c.k())
    }

    fn rows(&self) -> usize {
        (self.memory + 1) * self.m
    }

    /// Number of randomness matrices enumerated per file index.
    pub fn combinations(&self) -> u128 {
        (self.field.order() as u128).checked_pow((self.dim() * self.rows()) as u32).unwrap_or(u128::MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivergenceWitness {
    /// Joint view of the colluding servers, query by query.
    pub view: Vec<Fe>,
    pub index_a: usize,
    pub count_a: u64,
    pub index_b: usize,
    pub count_b: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditVerdict {
    Identical { draws: u128, distinct_views: usize },
    Divergent(DivergenceWitness),
}

impl AuditVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, AuditVerdict::Identical { .. })
    }
}

/// Enumerates every randomness matrix and compares, across all file indices,
/// the exact distribution of the queries seen by the servers in `colluding`.
pub fn privacy_audit(family: &AuditFamily, colluding: &[usize]) -> Result<AuditVerdict, PirError> {
    if colluding.len() > family.t {
        return Err(PirError::CollusionTooLarge { size: colluding.len(), t: family.t });
    }
    let n = family.offsets.cols();
    let servers = validate_support(n, colluding.to_vec())?;
    let combos = family.combinations();
    if combos > AUDIT_LIMIT {
        return Err(PirError::AuditTooLarge { combinations: combos, limit: AUDIT_LIMIT });
    }
    let f = &family.field;
    let q = f.order() as u128;
    let dim = family.dim();
    let rows = family.rows();

    // All codewords of the randomness code restricted to the colluding set.
    let restricted: Vec<Vec<Fe>> = match &family.retrieval {
        None => vec![vec![Fe::ZERO; servers.len()]],
        Some(code) => (0..q.pow(dim as u32))
            .map(|mut c| {
                let msg: Vec<Fe> = (0..dim)
                    .map(|_| {
                        let d = Fe((c % q) as u32);
                        c /= q;
                        d
                    })
                    .collect();
                let cw = code.encode(&msg).expect("message has code dimension");
                servers.iter().map(|&j| cw[j]).collect()
            })
            .collect(),
    };
    let per_row = restricted.len() as u128;

    let histograms: Vec<BTreeMap<Vec<Fe>, u64>> = (0..family.m)
        .map(|i| {
            let mut hist = BTreeMap::new();
            for mut c in 0..combos {
                let mut view = Vec::with_capacity(rows * servers.len());
                for r in 0..rows {
                    let pick = &restricted[(c % per_row) as usize];
                    c /= per_row;
                    let (z, s) = (r / family.m, r % family.m);
                    for (idx, &j) in servers.iter().enumerate() {
                        let off = if s == i { family.offsets[(z, j)] } else { Fe::ZERO };
                        view.push(f.add(pick[idx], off));
                    }
                }
                *hist.entry(view).or_insert(0u64) += 1;
            }
            hist
        })
        .collect();

    let base = &histograms[0];
    for (i, hist) in histograms.iter().enumerate().skip(1) {
        let keys: BTreeSet<&Vec<Fe>> = base.keys().chain(hist.keys()).collect();
        for key in keys {
            let a = base.get(key).copied().unwrap_or(0);
            let b = hist.get(key).copied().unwrap_or(0);
            if a != b {
                return Ok(AuditVerdict::Divergent(DivergenceWitness {
                    view: key.clone(),
                    index_a: 0,
                    count_a: a,
                    index_b: i,
                    count_b: b,
                }));
            }
        }
    }
    Ok(AuditVerdict::Identical { draws: combos, distinct_views: base.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf5_code() -> GrsCode {
        let f = Arc::new(Field::prime(5).unwrap());
        GrsCode::reed_solomon(f, 2, vec![Fe(1), Fe(2), Fe(3), Fe(4)]).unwrap()
    }

    fn example2() -> (StorageSystem, PirScheme) {
        let f = Arc::new(Field::with_order(16).unwrap());
        let code = GrsCode::reed_solomon(f.clone(), 2, (1..=6).map(Fe).collect()).unwrap();
        let files = random_files(&f, 3, 4, 2, 11);
        let sys = storage_encode(files, &code).unwrap();
        let scheme = PirScheme::block_erasure(code, 1, 3, 4, 3, 1, vec![3, 4, 5], 1).unwrap();
        (sys, scheme)
    }

    #[test]
    fn storage_examples() {
        let code = gf5_code();
        let sys = storage_encode(vec![vec![vec![Fe(0), Fe(1)]]], &code).unwrap();
        assert_eq!(sys.encoded_stripe(0, 0).unwrap(), &[Fe(1), Fe(2), Fe(3), Fe(4)]);
        assert_eq!(sys.symbol(-1, 0, 2), Fe::ZERO);
        assert_eq!(sys.symbol(1, 0, 2), Fe::ZERO);
        let zero = storage_encode(vec![vec![vec![Fe(0); 2]; 3]; 2], &code).unwrap();
        assert!((0..3).all(|x| (0..2).all(|s| zero.encoded_stripe(x, s).unwrap().iter().all(|v| v.is_zero()))));
        let (sys, _) = example2();
        assert_eq!((sys.ell(), sys.m(), sys.code().n()), (4, 3, 6));
        assert!(sys.verify());
        assert!(matches!(storage_encode(vec![vec![vec![Fe(0)]]], &code), Err(PirError::ShapeMismatch(_))));
    }

    #[test]
    fn example2_offsets() {
        let (_, scheme) = example2();
        let f = scheme.field().clone();
        let qs = make_queries(&scheme, 5);
        assert_eq!(qs.len(), 1);
        let offset = {
            let mut m = qs[0].queries.clone();
            for r in 0..6 {
                for j in 0..6 {
                    m[(r, j)] = f.sub(m[(r, j)], qs[0].d_mat[(r, j)]);
                }
            }
            m
        };
        let a = |j: u32| f.pow(Fe(j), 2);
        let mut expected = Matrix::zeros(6, 6);
        for j in 3..6 {
            expected[(1, j)] = Fe::ONE;
            expected[(4, j)] = a(j as u32 + 1);
        }
        assert_eq!(offset, expected);
        // t = 1: every randomness row is constant
        for r in 0..6 {
            assert!(qs[0].d_mat.row(r).iter().all(|&x| x == qs[0].d_mat[(r, 0)]));
        }
        assert_eq!(make_queries(&scheme, 5), qs);
    }

    #[test]
    fn byzantine_offsets() {
        let f = Arc::new(Field::with_order(16).unwrap());
        let code = GrsCode::reed_solomon(f.clone(), 2, (1..=10).map(Fe).collect()).unwrap();
        let s = PirScheme::byzantine(code.clone(), 2, 2, 3, 0).unwrap();
        let offs = s.offset_rows(0);
        for j in 0..10 {
            let a = Fe(j as u32 + 1);
            assert_eq!(offs[(0, j)], f.pow(f.inv(a).unwrap(), 2));
            assert_eq!(offs[(1, j)], f.pow(a, 3));
        }
        assert_eq!(s.block_count(), 4);
        let zero_loc = GrsCode::reed_solomon(f.clone(), 2, (0..10).map(Fe).collect()).unwrap();
        assert_eq!(PirScheme::byzantine(zero_loc, 2, 2, 3, 0), Err(PirError::ZeroLocator));
        let short = GrsCode::reed_solomon(f, 2, (1..=7).map(Fe).collect()).unwrap();
        assert!(matches!(PirScheme::byzantine(short, 2, 2, 3, 0), Err(PirError::InvalidParams(_))));
    }

    #[test]
    fn support_limits() {
        let f = Arc::new(Field::with_order(16).unwrap());
        let code = GrsCode::reed_solomon(f, 2, (1..=6).map(Fe).collect()).unwrap();
        assert_eq!(
            PirScheme::plain(code.clone(), 1, 2, 3, 1, vec![0, 1, 2, 3, 4], 0),
            Err(PirError::SupportTooLarge { size: 5, max: 4 })
        );
        assert_eq!(PirScheme::plain(code.clone(), 1, 2, 3, 1, vec![0], 0), Err(PirError::SupportTooSmall { size: 1, min: 2 }));
        assert_eq!(
            PirScheme::block_erasure(code.clone(), 1, 2, 3, 3, 1, vec![0, 1], 0),
            Err(PirError::SupportTooSmall { size: 2, min: 3 })
        );
        // support above d*-1 splits into sub-rounds
        let s = PirScheme::block_erasure(code, 1, 2, 3, 3, 1, vec![0, 1, 2, 3, 4, 5], 0).unwrap();
        assert_eq!(s.rounds().len(), 2);
        assert_eq!(s.total_downloads(), (4 * 2 * 6) as u64);
    }

    #[test]
    fn responses_match_naive_evaluation() {
        let (sys, scheme) = example2();
        let stream = run_protocol(&sys, &scheme, 9).unwrap();
        assert_eq!(stream.len(), 5);
        let f = scheme.field();
        let qs = make_queries(&scheme, 9);
        for b in 0..5usize {
            for j in 0..6 {
                // naive: sum over (z, s) of q_j[zm+s] * Y[b-z][s][j]
                let mut acc = Fe::ZERO;
                for z in 0..2usize {
                    for s in 0..3 {
                        if let Some(x) = b.checked_sub(z).filter(|&x| x < 4) {
                            let y = sys.code().encode(&sys.file(s)[x]).unwrap()[j];
                            acc = f.add(acc, f.mul(qs[0].queries[(z * 3 + s, j)], y));
                        }
                    }
                }
                assert_eq!(stream.blocks[b].rounds[0][j], acc);
            }
        }
    }

    #[test]
    fn response_decomposes_into_star_code() {
        let (sys, scheme) = example2();
        let stream = run_protocol(&sys, &scheme, 3).unwrap();
        let f = scheme.field();
        let offs = scheme.offset_rows(0);
        for b in 0..scheme.block_count() {
            let mut v = stream.blocks[b].rounds[0].clone();
            for z in 0..=scheme.memory() {
                if let Some(y) = sys.encoded_stripe(b as isize - z as isize, scheme.desired()) {
                    let e = star_vec(f, offs.row(z), y);
                    // outside J the offset contribution vanishes
                    for j in 0..3 {
                        assert!(e[j].is_zero());
                    }
                    v = v.iter().zip(&e).map(|(&a, &c)| f.sub(a, c)).collect();
                }
            }
            assert!(scheme.star_code().is_codeword(&v));
        }
    }

    #[test]
    fn zero_everything_gives_zero() {
        let code = gf5_code();
        let sys = storage_encode(vec![vec![vec![Fe(0); 2]]], &code).unwrap();
        let scheme = PirScheme::plain(code, 1, 1, 1, 0, vec![0, 1], 0).unwrap();
        assert_eq!(server_respond(&sys, &scheme, &[Fe(0)], 0, 0), Fe::ZERO);
        let stream = run_protocol(&sys, &scheme, 1).unwrap();
        assert_eq!(stream.len(), 1);
        assert!(stream.blocks[0].rounds[0].iter().all(|x| x.is_zero()));
    }

    #[test]
    fn memoryless_response_form() {
        let code = gf5_code();
        let f = code.field().clone();
        let files = random_files(&f, 2, 1, 2, 4);
        let sys = storage_encode(files, &code).unwrap();
        let scheme = PirScheme::plain(code, 1, 2, 1, 0, vec![0, 1], 1).unwrap();
        let qs = make_queries(&scheme, 8);
        let offs = scheme.offset_rows(0);
        for j in 0..4 {
            let got = server_respond(&sys, &scheme, &qs[0].query(j), 0, j);
            let mut want = f.mul(offs[(0, j)], sys.symbol(0, 1, j));
            for s in 0..2 {
                want = f.add(want, f.mul(qs[0].d_mat[(s, j)], sys.symbol(0, s, j)));
            }
            assert_eq!(got, want);
        }
    }

    #[test]
    fn audit_small_instances() {
        let code = gf5_code();
        let scheme = PirScheme::plain(code, 1, 2, 1, 0, vec![0, 1], 0).unwrap();
        let fam = AuditFamily::from_scheme(&scheme);
        for j in 0..4 {
            assert!(privacy_audit(&fam, &[j]).unwrap().passed());
        }
        let broken = AuditFamily::with_retrieval_dim(&scheme, 0).unwrap();
        assert!(matches!(privacy_audit(&broken, &[0]).unwrap(), AuditVerdict::Divergent(_)));
        assert_eq!(privacy_audit(&fam, &[0, 1]), Err(PirError::CollusionTooLarge { size: 2, t: 1 }));
    }
}
