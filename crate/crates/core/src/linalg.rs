//! Dense matrices over a finite field: elimination, rank, solving, kernels
//! and subspace intersection.

use crate::field::{Fe, Field};

/// Row-major dense matrix of field elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Fe>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Fe::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Fe::ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Fe>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix { rows: rows.len(), cols, data: rows.concat() }
    }

    /// Builds a `rows x cols` matrix from a generator function.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Fe) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Fe] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Fe] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Fe>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<Fe> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)])
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix { rows: self.rows + other.rows, cols: self.cols, data }
    }

    /// Places `other` to the right of `self`.
    pub fn hstack(&self, other: &Matrix) -> Self {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    /// Copies `block` into `self` with its top-left corner at `(r, c)`.
    pub fn set_block(&mut self, r: usize, c: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r + i, c + j)] = block[(i, j)];
            }
        }
    }

    pub fn mul(&self, f: &Field, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = f.add(out[(i, j)], f.mul(a, other[(l, j)]));
                    out[(i, j)] = v;
                }
            }
        }
        out
    }

    /// Row vector times matrix: `x * self`.
    pub fn left_mul_vec(&self, f: &Field, x: &[Fe]) -> Vec<Fe> {
        assert_eq!(x.len(), self.rows, "vector length mismatch");
        let mut out = vec![Fe::ZERO; self.cols];
        for (i, &a) in x.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o = f.add(*o, f.mul(a, m));
            }
        }
        out
    }

    /// Matrix times column vector: `self * x`.
    pub fn mul_vec(&self, f: &Field, x: &[Fe]) -> Vec<Fe> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        (0..self.rows).map(|i| f.dot(self.row(i), x)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Fe;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Fe {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Fe {
        &mut self.data[i * self.cols + j]
    }
}

/// Reduced row echelon form, computed in place. Returns pivot columns.
pub fn rref(f: &Field, m: &mut Matrix) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..m.cols {
        if r == m.rows {
            break;
        }
        let Some(p) = (r..m.rows).find(|&i| !m[(i, c)].is_zero()) else {
            continue;
        };
        if p != r {
            for j in 0..m.cols {
                m.data.swap(p * m.cols + j, r * m.cols + j);
            }
        }
        let inv = f.inv(m[(r, c)]).expect("pivot is nonzero");
        for j in c..m.cols {
            m[(r, j)] = f.mul(m[(r, j)], inv);
        }
        for i in 0..m.rows {
            if i == r {
                continue;
            }
            let factor = m[(i, c)];
            if factor.is_zero() {
                continue;
            }
            for j in c..m.cols {
                let v = f.sub(m[(i, j)], f.mul(factor, m[(r, j)]));
                m[(i, j)] = v;
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rank by forward elimination only (cheaper than full reduction).
pub fn rank(f: &Field, m: &Matrix) -> usize {
    let mut a = m.clone();
    let mut r = 0;
    for c in 0..a.cols {
        if r == a.rows {
            break;
        }
        let Some(p) = (r..a.rows).find(|&i| !a[(i, c)].is_zero()) else {
            continue;
        };
        if p != r {
            for j in 0..a.cols {
                a.data.swap(p * a.cols + j, r * a.cols + j);
            }
        }
        let inv = f.inv(a[(r, c)]).expect("pivot is nonzero");
        for i in r + 1..a.rows {
            let factor = f.mul(a[(i, c)], inv);
            if factor.is_zero() {
                continue;
            }
            for j in c..a.cols {
                let v = f.sub(a[(i, j)], f.mul(factor, a[(r, j)]));
                a[(i, j)] = v;
            }
        }
        r += 1;
    }
    r
}

/// Outcome of solving `A x = b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    /// Exactly one solution.
    Unique(Vec<Fe>),
    /// Consistent but underdetermined; one particular solution (free
    /// variables set to zero) and the kernel dimension.
    Many { particular: Vec<Fe>, kernel_dim: usize },
    Inconsistent,
}

/// Solves `A x = b` for a column vector `x`.
pub fn solve(f: &Field, a: &Matrix, b: &[Fe]) -> Solution {
    assert_eq!(a.rows, b.len(), "right-hand side length mismatch");
    let bm = Matrix { rows: b.len(), cols: 1, data: b.to_vec() };
    let mut aug = a.hstack(&bm);
    let pivots = rref(f, &mut aug);
    if pivots.last() == Some(&a.cols) {
        return Solution::Inconsistent;
    }
    let mut x = vec![Fe::ZERO; a.cols];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = aug[(r, a.cols)];
    }
    if pivots.len() == a.cols {
        Solution::Unique(x)
    } else {
        Solution::Many { particular: x, kernel_dim: a.cols - pivots.len() }
    }
}

/// Basis of the right kernel `{x : A x = 0}`, one vector per row.
pub fn null_space(f: &Field, a: &Matrix) -> Matrix {
    let mut r = a.clone();
    let pivots = rref(f, &mut r);
    let free: Vec<usize> = (0..a.cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Matrix::zeros(free.len(), a.cols);
    for (b, &fc) in free.iter().enumerate() {
        basis[(b, fc)] = Fe::ONE;
        for (row, &pc) in pivots.iter().enumerate() {
            basis[(b, pc)] = f.neg(r[(row, fc)]);
        }
    }
    basis
}

/// Basis (in reduced echelon form) of the row space.
pub fn row_space_basis(f: &Field, a: &Matrix) -> Matrix {
    let mut r = a.clone();
    let pivots = rref(f, &mut r);
    r.select_rows(&(0..pivots.len()).collect::<Vec<_>>())
}

/// Basis of the intersection of the row spaces of `a` and `b` by the
/// Zassenhaus algorithm.
pub fn intersect_row_spaces(f: &Field, a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols, b.cols, "ambient dimension mismatch");
    let n = a.cols;
    let top = a.hstack(a);
    let bottom = b.hstack(&Matrix::zeros(b.rows, n));
    let mut z = top.vstack(&bottom);
    let pivots = rref(f, &mut z);
    let rows: Vec<usize> = pivots.iter().enumerate().filter(|(_, &c)| c >= n).map(|(r, _)| r).collect();
    Matrix::from_fn(rows.len(), n, |i, j| z[(rows[i], n + j)])
}
