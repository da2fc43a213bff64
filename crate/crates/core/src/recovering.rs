//! Locator sets with the recovering property.
//!
//! For locators `alpha_1..alpha_gamma` let `G_z = Vand_k * diag(alpha^((z-1)k))`.
//! A window of `N` stripes observed through `N - eps` consecutive blocks of a
//! memory-`eps` code is decodable exactly when the banded block matrix built
//! from the `G_z` has rank `N k`.

use std::sync::Arc;

use rand::seq::index::sample;
use thiserror::Error;

use crate::field::{Fe, Field, FieldError};
use crate::linalg::{self, Matrix};
use crate::par::{map_indices, Exec};
use crate::rng::{stream_rng, Purpose};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecoveringError {
    #[error("locators are not pairwise distinct")]
    DuplicateLocators,
    #[error("{got} locators given, at least {min} needed")]
    TooFewLocators { got: usize, min: usize },
    #[error("locator 0 has no negative powers")]
    ZeroLocator,
    #[error("gamma = 3k/2 is not an integer for k = {k}")]
    GammaNotIntegral { k: usize },
    #[error("GF({q}) has no multiplicative subgroup of order {gamma}{}", if *.even_gamma_char2 { " (gamma is even and q is a power of 2)" } else { "" })]
    NoSuitableSubgroup { gamma: usize, q: u32, even_gamma_char2: bool },
    #[error("field of order {q} cannot supply {needed} distinct locators")]
    FieldTooSmall { q: u32, needed: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// The block matrix for a decoding window together with its rank verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveringMatrix {
    pub k: usize,
    pub memory: usize,
    pub window: usize,
    pub burst: usize,
    pub locators: Vec<Fe>,
    pub matrix: Matrix,
    pub rank: usize,
}

impl RecoveringMatrix {
    /// Rank equals the number of unknown stripe symbols `N k`.
    pub fn verdict(&self) -> bool {
        self.rank == self.window * self.k
    }

    pub fn gamma(&self) -> usize {
        self.locators.len()
    }
}

/// Smallest admissible support size `ceil(N k / (N - eps))`.
pub fn min_gamma(k: usize, window: usize, burst: usize) -> usize {
    (window * k).div_ceil(window - burst)
}

/// `G_z` for `z` possibly negative: `k x gamma` with entries
/// `alpha_j^(i + (z-1)k)`.
pub fn g_block(f: &Field, k: usize, z: i64, locators: &[Fe]) -> Result<Matrix, RecoveringError> {
    let shift = (z - 1) * k as i64;
    let mut out = Matrix::zeros(k, locators.len());
    for (j, &a) in locators.iter().enumerate() {
        for i in 0..k {
            let e = i as i64 + shift;
            out[(i, j)] = f.pow_signed(a, e).map_err(|_| RecoveringError::ZeroLocator)?;
        }
    }
    Ok(out)
}

fn check_locators(locators: &[Fe], min: usize) -> Result<(), RecoveringError> {
    let mut sorted = locators.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(RecoveringError::DuplicateLocators);
    }
    if locators.len() < min {
        return Err(RecoveringError::TooFewLocators { got: locators.len(), min });
    }
    Ok(())
}

/// Assembles the matrix for `N = 2M+1` stripes seen through `M+1` blocks:
/// block-row `i`, block-column `j` holds `G_{i-j+1}` inside the band.
pub fn build_a(f: &Field, k: usize, memory: usize, locators: &[Fe]) -> Result<RecoveringMatrix, RecoveringError> {
    let window = 2 * memory + 1;
    check_locators(locators, min_gamma(k, window, memory))?;
    Ok(assemble_a(f, k, memory, locators))
}

/// As [`build_a`] without the precondition checks, so degenerate inputs
/// (duplicates, too few locators) can be examined.
pub fn assemble_a(f: &Field, k: usize, memory: usize, locators: &[Fe]) -> RecoveringMatrix {
    let gamma = locators.len();
    let window = 2 * memory + 1;
    let blocks: Vec<Matrix> =
        (1..=memory as i64 + 1).map(|z| g_block(f, k, z, locators).expect("nonnegative exponents")).collect();
    let mut a = Matrix::zeros(window * k, (memory + 1) * gamma);
    for j in 0..=memory {
        for z in 0..=memory {
            a.set_block((j + z) * k, j * gamma, &blocks[z]);
        }
    }
    let rank = linalg::rank(f, &a);
    RecoveringMatrix { k, memory, window, burst: memory, locators: locators.to_vec(), matrix: a, rank }
}

/// General window of `window` stripes observed through the last
/// `window - burst` blocks of a memory-`burst` code. Stripe `x` enters
/// block `b` through `G_{b-x+1}`.
pub fn build_window(
    f: &Field,
    k: usize,
    window: usize,
    burst: usize,
    locators: &[Fe],
) -> Result<RecoveringMatrix, RecoveringError> {
    if window <= burst {
        return Err(RecoveringError::InvalidParams(format!("window {window} must exceed burst {burst}")));
    }
    check_locators(locators, min_gamma(k, window, burst))?;
    let gamma = locators.len();
    let memory = burst;
    let blocks: Vec<Matrix> =
        (1..=memory as i64 + 1).map(|z| g_block(f, k, z, locators).expect("nonnegative exponents")).collect();
    let received = window - burst;
    let mut a = Matrix::zeros(window * k, received * gamma);
    for c in 0..received {
        let b = burst + c;
        for z in 0..=memory {
            if let Some(x) = b.checked_sub(z) {
                a.set_block(x * k, c * gamma, &blocks[z]);
            }
        }
    }
    let rank = linalg::rank(f, &a);
    Ok(RecoveringMatrix { k, memory, window, burst, locators: locators.to_vec(), matrix: a, rank })
}

/// Evaluates whether `<G_1> + sum_{i=1..M} (<G_1> cap <G_{-M}>) V_i` is a
/// direct sum. Needs nonzero locators.
pub fn check_direct_sum(f: &Field, k: usize, memory: usize, locators: &[Fe]) -> Result<bool, RecoveringError> {
    check_locators(locators, min_gamma(k, 2 * memory + 1, memory))?;
    if locators.iter().any(|a| a.is_zero()) {
        return Err(RecoveringError::ZeroLocator);
    }
    let g1 = g_block(f, k, 1, locators)?;
    let g_neg = g_block(f, k, -(memory as i64), locators)?;
    let inter = linalg::intersect_row_spaces(f, &g1, &g_neg);
    let base = linalg::row_space_basis(f, &g1);
    let mut stacked = base.clone();
    for i in 1..=memory {
        let scaled = Matrix::from_fn(inter.rows(), inter.cols(), |r, j| {
            f.mul(inter[(r, j)], f.pow(locators[j], (i * k) as u64))
        });
        stacked = stacked.vstack(&scaled);
    }
    let expected = base.rows() + memory * inter.rows();
    Ok(linalg::rank(f, &stacked) == expected)
}

/// Locators `sigma, sigma^2, ..., sigma^gamma` for `sigma` of order `Mk + gamma`.
pub fn construct_regset(f: &Field, k: usize, memory: usize, gamma: usize) -> Result<Vec<Fe>, RecoveringError> {
    let min = min_gamma(k, 2 * memory + 1, memory);
    if gamma < min {
        return Err(RecoveringError::TooFewLocators { got: gamma, min });
    }
    let order = (memory * k + gamma) as u64;
    let sigma = f.find_element_of_order(order)?;
    Ok((1..=gamma as u64).map(|i| f.pow(sigma, i)).collect())
}

/// Unit memory with `gamma = 3k/2`: the whole subgroup of order `gamma`.
pub fn construct_unit_memory(f: &Field, k: usize) -> Result<Vec<Fe>, RecoveringError> {
    if k % 2 != 0 {
        return Err(RecoveringError::GammaNotIntegral { k });
    }
    let gamma = 3 * k / 2;
    let q = f.order();
    if (q as u64 - 1) % gamma as u64 != 0 {
        return Err(RecoveringError::NoSuitableSubgroup {
            gamma,
            q,
            even_gamma_char2: f.characteristic() == 2 && gamma % 2 == 0,
        });
    }
    Ok(f.subgroup(gamma as u64)?)
}

/// Where `random_search` draws locators from.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub enum LocatorPool {
    /// Every field element, zero included.
    #[default]
    WholeField,
    /// Nonzero elements only.
    NonZero,
}

impl std::str::FromStr for LocatorPool {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whole" | "whole_field" | "all" => Ok(LocatorPool::WholeField),
            "nonzero" | "non_zero" => Ok(LocatorPool::NonZero),
            other => Err(format!("unknown locator pool {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub k: usize,
    pub memory: usize,
    pub window: usize,
    pub q: u32,
    pub gamma: usize,
    pub trials: usize,
    pub full: usize,
}

impl SearchResult {
    pub fn p_full(&self) -> f64 {
        self.full as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchParams {
    pub k: usize,
    pub memory: usize,
    /// Defaults to `ceil((2M+1)k / (M+1))`.
    pub gamma: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub pool: LocatorPool,
}

/// Fraction of uniformly drawn distinct-locator sets whose matrix `A` has
/// full rank. Trial `i` draws from its own random stream.
pub fn random_search(f: &Arc<Field>, params: &SearchParams, exec: Exec) -> Result<SearchResult, RecoveringError> {
    let SearchParams { k, memory, trials, seed, pool, .. } = *params;
    if k == 0 {
        return Err(RecoveringError::InvalidParams("k must be positive".into()));
    }
    let window = 2 * memory + 1;
    let gamma = params.gamma.unwrap_or_else(|| min_gamma(k, window, memory));
    let offset = match pool {
        LocatorPool::WholeField => 0,
        LocatorPool::NonZero => 1,
    };
    let available = f.order() as usize - offset;
    if available < gamma {
        return Err(RecoveringError::FieldTooSmall { q: f.order(), needed: gamma });
    }
    let hits = map_indices(exec, trials, |i| {
        let mut rng = stream_rng(seed, Purpose::Locators, i as u64);
        let locs: Vec<Fe> = sample(&mut rng, available, gamma).into_iter().map(|x| Fe((x + offset) as u32)).collect();
        assemble_a(f, k, memory, &locs).verdict()
    });
    Ok(SearchResult { k, memory, window, q: f.order(), gamma, trials, full: hits.into_iter().filter(|&h| h).count() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(q: u64) -> Field {
        Field::with_order(q).unwrap()
    }

    #[test]
    fn duplicate_locator_is_rank_deficient() {
        let f = gf(16);
        let a = assemble_a(&f, 2, 1, &[Fe(2), Fe(2), Fe(3)]);
        assert!(a.rank < 6);
        assert_eq!(build_a(&f, 2, 1, &[Fe(2), Fe(2), Fe(3)]), Err(RecoveringError::DuplicateLocators));
        assert!(matches!(build_a(&f, 2, 1, &[Fe(2), Fe(3)]), Err(RecoveringError::TooFewLocators { got: 2, min: 3 })));
    }

    #[test]
    fn subgroup_of_order_three_in_gf7() {
        let f = gf(7);
        let locs = f.subgroup(3).unwrap();
        assert_eq!(locs, vec![Fe(1), Fe(2), Fe(4)]);
        assert_eq!(build_a(&f, 2, 1, &locs).unwrap().rank, 6);
    }

    #[test]
    fn distinct_squares_in_gf16() {
        // squaring is injective in characteristic 2
        let f = gf(16);
        for a in 0..16u32 {
            for b in a + 1..16 {
                for c in b + 1..16 {
                    let m = build_a(&f, 2, 1, &[Fe(a), Fe(b), Fe(c)]).unwrap();
                    assert!(m.verdict(), "locators {a},{b},{c}");
                }
            }
        }
    }

    #[test]
    fn window_matrix_matches_a_up_to_row_order() {
        let f = gf(16);
        let locs = [Fe(3), Fe(7), Fe(9)];
        let a = build_a(&f, 2, 1, &locs).unwrap();
        let w = build_window(&f, 2, 3, 1, &locs).unwrap();
        assert_eq!(a.rank, w.rank);
        assert_eq!((w.matrix.rows(), w.matrix.cols()), (6, 6));
    }

    #[test]
    fn constructions() {
        let f16 = gf(16);
        let locs = construct_regset(&f16, 2, 1, 3).unwrap();
        assert_eq!(f16.element_order(locs[0]).unwrap(), 5);
        assert!(build_a(&f16, 2, 1, &locs).unwrap().verdict());
        assert!(check_direct_sum(&f16, 2, 1, &locs).unwrap());
        let f23 = gf(23);
        let locs = construct_regset(&f23, 3, 2, 5).unwrap();
        assert!(build_a(&f23, 3, 2, &locs).unwrap().verdict());
        assert_eq!(construct_regset(&f16, 2, 1, 2), Err(RecoveringError::TooFewLocators { got: 2, min: 3 }));

        let um = construct_unit_memory(&f16, 2).unwrap();
        assert_eq!(um.len(), 3);
        assert!(build_a(&f16, 2, 1, &um).unwrap().verdict());
        assert!(build_a(&gf(7), 2, 1, &construct_unit_memory(&gf(7), 2).unwrap()).unwrap().verdict());
        for s in 1..=8 {
            let f = Field::new(2, s, None).unwrap();
            assert!(matches!(
                construct_unit_memory(&f, 4),
                Err(RecoveringError::NoSuitableSubgroup { gamma: 6, even_gamma_char2: true, .. })
            ));
        }
        assert_eq!(construct_unit_memory(&f16, 3), Err(RecoveringError::GammaNotIntegral { k: 3 }));
    }

    #[test]
    fn search_is_deterministic_and_policy_independent() {
        let f = Arc::new(gf(16));
        let p = SearchParams { k: 4, memory: 1, gamma: None, trials: 200, seed: 5, pool: LocatorPool::WholeField };
        let a = random_search(&f, &p, Exec::Sequential).unwrap();
        let b = random_search(&f, &p, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gamma, 6);
        let big = SearchParams { k: 8, memory: 3, ..p };
        assert!(matches!(random_search(&Arc::new(gf(7)), &big, Exec::Sequential), Err(RecoveringError::FieldTooSmall { .. })));
    }

    proptest! {
        #[test]
        fn direct_sum_agrees_with_rank(k in 1usize..5, memory in 1usize..3, extra in 0usize..3, seed in any::<u64>()) {
            let f = gf(16);
            let gamma = min_gamma(k, 2 * memory + 1, memory) + extra;
            prop_assume!(gamma <= 15);
            let mut rng = stream_rng(seed, Purpose::Locators, 0);
            let locs: Vec<Fe> = sample(&mut rng, 15, gamma).into_iter().map(|x| Fe(x as u32 + 1)).collect();
            let rank_ok = build_a(&f, k, memory, &locs).unwrap().verdict();
            prop_assert_eq!(check_direct_sum(&f, k, memory, &locs).unwrap(), rank_ok);
        }

        #[test]
        fn extra_locator_never_lowers_rank(k in 1usize..4, memory in 1usize..3, seed in any::<u64>()) {
            let f = gf(32);
            let gamma = min_gamma(k, 2 * memory + 1, memory);
            let mut rng = stream_rng(seed, Purpose::Locators, 1);
            let locs: Vec<Fe> = sample(&mut rng, 32, gamma + 1).into_iter().map(|x| Fe(x as u32)).collect();
            let small = assemble_a(&f, k, memory, &locs[..gamma]);
            let large = assemble_a(&f, k, memory, &locs);
            prop_assert!(large.rank >= small.rank);
        }
    }
}
