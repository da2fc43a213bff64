//! Generalized Reed-Solomon codes RS(n, k, v).
//!
//! A message `(f_0, ..., f_{k-1})` is the coefficient vector of
//! `f(x) = sum f_i x^i` and encodes to `c_j = v_j f(alpha_j)`.

use std::sync::Arc;

use thiserror::Error;

use crate::field::{Fe, Field, FieldError};
use crate::linalg::{self, Matrix, Solution};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrsError {
    #[error("expected length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{erased} erasures exceed the correctable maximum {max}")]
    TooManyErasures { erased: usize, max: usize },
    #[error("surviving symbols are not consistent with any codeword")]
    InconsistentWord,
    #[error("no codeword within the decoding radius")]
    DecodingFailure,
    #[error("codes do not share locators")]
    LocatorMismatch,
    #[error("star product dimension {dim} exceeds length {n}")]
    DegenerateProduct { dim: usize, n: usize },
    #[error("locators are not pairwise distinct")]
    DuplicateLocators,
    #[error("column multipliers must be nonzero")]
    ZeroMultiplier,
    #[error("invalid dimension k={k} for length n={n}")]
    InvalidDimension { n: usize, k: usize },
    #[error("position {index} out of range for length {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("duplicate position {0} in erasure pattern")]
    DuplicateIndex(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Set of erased column indices (0-based, sorted, distinct).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ErasurePattern {
    indices: Vec<usize>,
}

impl ErasurePattern {
    pub fn new(n: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self, GrsError> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        for w in v.windows(2) {
            if w[0] == w[1] {
                return Err(GrsError::DuplicateIndex(w[0]));
            }
        }
        if let Some(&last) = v.last() {
            if last >= n {
                return Err(GrsError::IndexOutOfRange { index: last, n });
            }
        }
        Ok(ErasurePattern { indices: v })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// Applies the pattern to a full word.
    pub fn apply(&self, word: &[Fe]) -> Vec<Option<Fe>> {
        word.iter().enumerate().map(|(j, &x)| (!self.contains(j)).then_some(x)).collect()
    }
}

/// Result of bounded-distance decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BmdDecoded {
    pub message: Vec<Fe>,
    pub codeword: Vec<Fe>,
    /// Positions where the received word differs from the codeword.
    pub errors: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct GrsCode {
    field: Arc<Field>,
    k: usize,
    locators: Vec<Fe>,
    multipliers: Vec<Fe>,
}

impl PartialEq for GrsCode {
    fn eq(&self, other: &Self) -> bool {
        *self.field == *other.field
            && self.k == other.k
            && self.locators == other.locators
            && self.multipliers == other.multipliers
    }
}

impl Eq for GrsCode {}

impl GrsCode {
    pub fn new(field: Arc<Field>, k: usize, locators: Vec<Fe>, multipliers: Vec<Fe>) -> Result<Self, GrsError> {
        let n = locators.len();
        if multipliers.len() != n {
            return Err(GrsError::LengthMismatch { expected: n, got: multipliers.len() });
        }
        if k == 0 || k > n {
            return Err(GrsError::InvalidDimension { n, k });
        }
        for &x in locators.iter().chain(&multipliers) {
            field.elem(x.0 as u64)?;
        }
        let mut sorted = locators.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(GrsError::DuplicateLocators);
        }
        if multipliers.iter().any(|v| v.is_zero()) {
            return Err(GrsError::ZeroMultiplier);
        }
        Ok(GrsCode { field, k, locators, multipliers })
    }

    /// RS code with all column multipliers equal to one.
    pub fn reed_solomon(field: Arc<Field>, k: usize, locators: Vec<Fe>) -> Result<Self, GrsError> {
        let n = locators.len();
        Self::new(field, k, locators, vec![Fe::ONE; n])
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.locators.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Minimum distance `n - k + 1`.
    pub fn d(&self) -> usize {
        self.n() - self.k + 1
    }

    pub fn locators(&self) -> &[Fe] {
        &self.locators
    }

    pub fn multipliers(&self) -> &[Fe] {
        &self.multipliers
    }

    /// Same locators and multipliers with a different dimension.
    pub fn with_dimension(&self, k: usize) -> Result<Self, GrsError> {
        Self::new(self.field.clone(), k, self.locators.clone(), self.multipliers.clone())
    }

    /// Same code with every multiplier scaled coordinatewise by `scale`.
    pub fn rescaled(&self, scale: &[Fe]) -> Result<Self, GrsError> {
        if scale.len() != self.n() {
            return Err(GrsError::LengthMismatch { expected: self.n(), got: scale.len() });
        }
        let v = self.multipliers.iter().zip(scale).map(|(&a, &b)| self.field.mul(a, b)).collect();
        Self::new(self.field.clone(), self.k, self.locators.clone(), v)
    }

    /// `k x n` generator matrix with entries `v_j alpha_j^i`.
    pub fn generator_matrix(&self) -> Matrix {
        let f = &self.field;
        Matrix::from_fn(self.k, self.n(), |i, j| f.mul(self.multipliers[j], f.pow(self.locators[j], i as u64)))
    }

    pub fn encode(&self, message: &[Fe]) -> Result<Vec<Fe>, GrsError> {
        if message.len() != self.k {
            return Err(GrsError::LengthMismatch { expected: self.k, got: message.len() });
        }
        let f = &self.field;
        Ok(self
            .locators
            .iter()
            .zip(&self.multipliers)
            .map(|(&a, &v)| f.mul(v, f.eval_poly(message, a)))
            .collect())
    }

    pub fn is_codeword(&self, word: &[Fe]) -> bool {
        word.len() == self.n() && self.erasure_decode(&word.iter().map(|&x| Some(x)).collect::<Vec<_>>()).is_ok()
    }

    /// Recovers the message from a word with erasures (`None`).
    pub fn erasure_decode(&self, word: &[Option<Fe>]) -> Result<Vec<Fe>, GrsError> {
        if word.len() != self.n() {
            return Err(GrsError::LengthMismatch { expected: self.n(), got: word.len() });
        }
        let known: Vec<usize> = (0..self.n()).filter(|&j| word[j].is_some()).collect();
        let erased = self.n() - known.len();
        if erased > self.n() - self.k {
            return Err(GrsError::TooManyErasures { erased, max: self.n() - self.k });
        }
        let f = &self.field;
        let basis = &known[..self.k];
        let vand = Matrix::from_fn(self.k, self.k, |r, i| f.pow(self.locators[basis[r]], i as u64));
        let rhs: Vec<Fe> = basis
            .iter()
            .map(|&j| f.div(word[j].unwrap(), self.multipliers[j]).expect("multipliers are nonzero"))
            .collect();
        let msg = match linalg::solve(f, &vand, &rhs) {
            Solution::Unique(x) => x,
            _ => unreachable!("Vandermonde matrix on distinct locators is invertible"),
        };
        for &j in &known[self.k..] {
            let c = f.mul(self.multipliers[j], f.eval_poly(&msg, self.locators[j]));
            if Some(c) != word[j] {
                return Err(GrsError::InconsistentWord);
            }
        }
        Ok(msg)
    }

    /// Erasure decoding with the erased set given separately.
    pub fn erasure_decode_pattern(&self, word: &[Fe], erased: &ErasurePattern) -> Result<Vec<Fe>, GrsError> {
        if word.len() != self.n() {
            return Err(GrsError::LengthMismatch { expected: self.n(), got: word.len() });
        }
        self.erasure_decode(&erased.apply(word))
    }

    /// Bounded-minimum-distance decoding: returns the unique codeword within
    /// distance `< d/2`, or `DecodingFailure`.
    pub fn bmd_decode(&self, word: &[Fe]) -> Result<BmdDecoded, GrsError> {
        let w: Vec<Option<Fe>> = word.iter().map(|&x| Some(x)).collect();
        self.errors_and_erasures_decode(&w)
    }

    /// Berlekamp-Welch decoding on the non-erased positions: corrects up to
    /// `floor((n - |E| - k) / 2)` errors among the surviving symbols.
    pub fn errors_and_erasures_decode(&self, word: &[Option<Fe>]) -> Result<BmdDecoded, GrsError> {
        if word.len() != self.n() {
            return Err(GrsError::LengthMismatch { expected: self.n(), got: word.len() });
        }
        let f = &self.field;
        let known: Vec<usize> = (0..self.n()).filter(|&j| word[j].is_some()).collect();
        let n1 = known.len();
        if n1 < self.k {
            return Err(GrsError::TooManyErasures { erased: self.n() - n1, max: self.n() - self.k });
        }
        let e = (n1 - self.k) / 2;
        let xs: Vec<Fe> = known.iter().map(|&j| self.locators[j]).collect();
        let ys: Vec<Fe> = known
            .iter()
            .map(|&j| f.div(word[j].unwrap(), self.multipliers[j]).expect("multipliers are nonzero"))
            .collect();

        // Unknowns: E_0..E_{e-1} (E monic of degree e), N_0..N_{e+k-1}.
        // Equation per position: N(x) - y E_low(x) = y x^e.
        let cols = e + e + self.k;
        let a = Matrix::from_fn(n1, cols, |r, c| {
            if c < e {
                f.neg(f.mul(ys[r], f.pow(xs[r], c as u64)))
            } else {
                f.pow(xs[r], (c - e) as u64)
            }
        });
        let b: Vec<Fe> = (0..n1).map(|r| f.mul(ys[r], f.pow(xs[r], e as u64))).collect();
        let sol = match linalg::solve(f, &a, &b) {
            Solution::Unique(x) => x,
            Solution::Many { particular, .. } => particular,
            Solution::Inconsistent => return Err(GrsError::DecodingFailure),
        };
        let mut err_loc = sol[..e].to_vec();
        err_loc.push(Fe::ONE);
        let num = &sol[e..];
        let (quot, rem) = poly_divmod(f, num, &err_loc);
        if rem.iter().any(|x| !x.is_zero()) {
            return Err(GrsError::DecodingFailure);
        }
        let mut message = quot;
        message.resize(self.k.max(message.len()), Fe::ZERO);
        if message[self.k..].iter().any(|x| !x.is_zero()) {
            return Err(GrsError::DecodingFailure);
        }
        message.truncate(self.k);
        let codeword = self.encode(&message)?;
        let errors: Vec<usize> = known.iter().copied().filter(|&j| Some(codeword[j]) != word[j]).collect();
        if errors.len() > e {
            return Err(GrsError::DecodingFailure);
        }
        Ok(BmdDecoded { message, codeword, errors })
    }

    /// Star product with `other`: RS(n, k1+k2-1, v1*v2) on shared locators.
    pub fn star(&self, other: &GrsCode) -> Result<GrsCode, GrsError> {
        if *self.field != *other.field || self.locators != other.locators {
            return Err(GrsError::LocatorMismatch);
        }
        let dim = self.k + other.k - 1;
        if dim > self.n() {
            return Err(GrsError::DegenerateProduct { dim, n: self.n() });
        }
        let f = &self.field;
        let v = self.multipliers.iter().zip(&other.multipliers).map(|(&a, &b)| f.mul(a, b)).collect();
        GrsCode::new(self.field.clone(), dim, self.locators.clone(), v)
    }
}

/// Convenience wrapper for [`GrsCode::star`].
pub fn star_product_code(c1: &GrsCode, c2: &GrsCode) -> Result<GrsCode, GrsError> {
    c1.star(c2)
}

/// Polynomial long division; `den` must have a nonzero leading coefficient.
pub fn poly_divmod(f: &Field, num: &[Fe], den: &[Fe]) -> (Vec<Fe>, Vec<Fe>) {
    let mut den = den.to_vec();
    while den.len() > 1 && den.last().unwrap().is_zero() {
        den.pop();
    }
    let dd = den.len() - 1;
    let lead_inv = f.inv(den[dd]).expect("divisor is nonzero");
    let mut rem = num.to_vec();
    if rem.len() <= dd {
        return (vec![Fe::ZERO], rem);
    }
    let mut quot = vec![Fe::ZERO; rem.len() - dd];
    for i in (0..quot.len()).rev() {
        let c = f.mul(rem[i + dd], lead_inv);
        quot[i] = c;
        if c.is_zero() {
            continue;
        }
        for (t, &dc) in den.iter().enumerate() {
            rem[i + t] = f.sub(rem[i + t], f.mul(c, dc));
        }
    }
    rem.truncate(dd);
    (quot, rem)
}

/// Coordinatewise product of two vectors.
pub fn star_vec(f: &Field, a: &[Fe], b: &[Fe]) -> Vec<Fe> {
    a.iter().zip(b).map(|(&x, &y)| f.mul(x, y)).collect()
}

pub fn hamming_distance(a: &[Fe], b: &[Fe]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rs42() -> GrsCode {
        let f = Arc::new(Field::prime(5).unwrap());
        GrsCode::reed_solomon(f, 2, vec![Fe(1), Fe(2), Fe(3), Fe(4)]).unwrap()
    }

    #[test]
    fn encode_examples() {
        let c = rs42();
        assert_eq!(c.encode(&[Fe(1), Fe(0)]).unwrap(), vec![Fe(1); 4]);
        assert_eq!(c.encode(&[Fe(0), Fe(1)]).unwrap(), vec![Fe(1), Fe(2), Fe(3), Fe(4)]);
        assert_eq!(c.encode(&[Fe(0), Fe(0)]).unwrap(), vec![Fe(0); 4]);
        assert_eq!(c.encode(&[Fe(0)]), Err(GrsError::LengthMismatch { expected: 2, got: 1 }));
        assert_eq!(c.d(), 3);
    }

    #[test]
    fn erasure_examples() {
        let c = rs42();
        assert_eq!(c.erasure_decode(&[None, Some(Fe(2)), Some(Fe(3)), None]).unwrap(), vec![Fe(0), Fe(1)]);
        let full: Vec<_> = [1, 2, 3, 4].iter().map(|&x| Some(Fe(x))).collect();
        assert_eq!(c.erasure_decode(&full).unwrap(), vec![Fe(0), Fe(1)]);
        assert_eq!(
            c.erasure_decode(&[None, None, Some(Fe(3)), None]),
            Err(GrsError::TooManyErasures { erased: 3, max: 2 })
        );
        assert_eq!(c.erasure_decode(&[Some(Fe(1)), Some(Fe(2)), Some(Fe(3)), Some(Fe(0))]), Err(GrsError::InconsistentWord));
    }

    #[test]
    fn bmd_single_error() {
        let c = rs42();
        let out = c.bmd_decode(&[Fe(3), Fe(2), Fe(3), Fe(4)]).unwrap();
        assert_eq!(out.message, vec![Fe(0), Fe(1)]);
        assert_eq!(out.errors, vec![0]);
        let clean = c.bmd_decode(&[Fe(1), Fe(2), Fe(3), Fe(4)]).unwrap();
        assert!(clean.errors.is_empty());
    }

    #[test]
    fn constructor_checks() {
        let f = Arc::new(Field::prime(5).unwrap());
        assert_eq!(GrsCode::reed_solomon(f.clone(), 2, vec![Fe(1), Fe(1)]), Err(GrsError::DuplicateLocators));
        assert_eq!(GrsCode::new(f.clone(), 1, vec![Fe(1), Fe(2)], vec![Fe(1), Fe(0)]), Err(GrsError::ZeroMultiplier));
        assert_eq!(GrsCode::reed_solomon(f, 3, vec![Fe(1), Fe(2)]), Err(GrsError::InvalidDimension { n: 2, k: 3 }));
    }

    #[test]
    fn star_examples() {
        let f = Arc::new(Field::with_order(16).unwrap());
        let locs: Vec<Fe> = (1..=6).map(Fe).collect();
        let c = GrsCode::reed_solomon(f.clone(), 2, locs.clone()).unwrap();
        let d = GrsCode::reed_solomon(f.clone(), 1, locs.clone()).unwrap();
        assert_eq!(c.star(&d).unwrap(), c);
        let locs10: Vec<Fe> = (1..=10).map(Fe).collect();
        let c10 = GrsCode::reed_solomon(f.clone(), 2, locs10).unwrap();
        let p = c10.star(&c10).unwrap();
        assert_eq!((p.k(), p.d()), (3, 8));
        // span of pairwise products of generator rows equals the product code
        let g = c10.generator_matrix();
        let rows: Vec<Vec<Fe>> = (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(a, b)| star_vec(&f, g.row(a), g.row(b)))
            .collect();
        let span = Matrix::from_rows(&rows);
        let pg = p.generator_matrix();
        assert_eq!(linalg::rank(&f, &span), 3);
        assert_eq!(linalg::rank(&f, &span.vstack(&pg)), 3);
        let c43 = GrsCode::reed_solomon(f.clone(), 3, locs[..4].to_vec()).unwrap();
        assert_eq!(c43.star(&c43), Err(GrsError::DegenerateProduct { dim: 5, n: 4 }));
        let other = GrsCode::reed_solomon(f, 2, (2..=7).map(Fe).collect()).unwrap();
        assert_eq!(c.star(&other), Err(GrsError::LocatorMismatch));
    }

    #[test]
    fn mds_weight_exhaustive() {
        let c = rs42();
        for a in 0..5 {
            for b in 0..5 {
                if a == 0 && b == 0 {
                    continue;
                }
                let w = c.encode(&[Fe(a), Fe(b)]).unwrap();
                assert!(w.iter().filter(|x| !x.is_zero()).count() >= 3);
            }
        }
    }

    #[test]
    fn erasures_and_errors_together() {
        let f = Arc::new(Field::with_order(16).unwrap());
        let c = GrsCode::reed_solomon(f, 3, (1..=10).map(Fe).collect()).unwrap();
        let cw = c.encode(&[Fe(5), Fe(7), Fe(9)]).unwrap();
        let mut w: Vec<Option<Fe>> = cw.iter().map(|&x| Some(x)).collect();
        w[0] = None;
        w[1] = None;
        w[5] = Some(Fe(cw[5].0 ^ 1));
        w[7] = Some(Fe(cw[7].0 ^ 3));
        // n' = 8, k = 3, corrects 2
        let out = c.errors_and_erasures_decode(&w).unwrap();
        assert_eq!(out.codeword, cw);
        assert_eq!(out.errors, vec![5, 7]);
    }

    fn arb_code() -> impl Strategy<Value = (GrsCode, Vec<Fe>, Vec<usize>)> {
        (prop_oneof![Just(16u64), Just(13), Just(256), Just(9)], 2usize..=12, any::<u64>()).prop_flat_map(|(q, n, seed)| {
            let n = n.min(q as usize - 1);
            (1..=n).prop_flat_map(move |k| {
                let f = Arc::new(Field::with_order(q).unwrap());
                let qq = q as u32;
                (
                    proptest::sample::subsequence((1..qq).collect::<Vec<u32>>(), n),
                    proptest::collection::vec(1..qq, n),
                    proptest::collection::vec(0..qq, k),
                    proptest::sample::subsequence((0..n).collect::<Vec<usize>>(), 0..=n - k),
                    Just(seed),
                )
                    .prop_map(move |(locs, mults, msg, erased, _)| {
                        let code = GrsCode::new(
                            f.clone(),
                            k,
                            locs.into_iter().map(Fe).collect(),
                            mults.into_iter().map(Fe).collect(),
                        )
                        .unwrap();
                        (code, msg.into_iter().map(Fe).collect(), erased)
                    })
            })
        })
    }

    proptest! {
        #[test]
        fn erasure_round_trip((code, msg, erased) in arb_code()) {
            let cw = code.encode(&msg).unwrap();
            let pat = ErasurePattern::new(code.n(), erased).unwrap();
            prop_assert_eq!(code.erasure_decode_pattern(&cw, &pat).unwrap(), msg);
        }

        #[test]
        fn bmd_corrects_within_radius((code, msg, erased) in arb_code(), delta in 1u32..255) {
            let cw = code.encode(&msg).unwrap();
            let e = (code.d() - 1) / 2;
            let q = code.field().order();
            let mut w = cw.clone();
            for &j in erased.iter().take(e) {
                w[j] = Fe((w[j].0 + delta % (q - 1) + 1) % q);
            }
            let out = code.bmd_decode(&w).unwrap();
            prop_assert_eq!(out.codeword, cw);
            prop_assert_eq!(out.message, msg);
        }
    }
}
