//! Matrix-free linear operator algebra.
//!
//! Operators are immutable values built from a small set of structured
//! kinds. Application and adjoint application never materialize the full
//! matrix; [`LinearOperator::to_dense`] exists as a capped test oracle and
//! assembles each kind structurally (not by probing with basis vectors).

mod build;
mod sparse;

pub use build::{
    fd_patch, fd_patch_border, fd_pixel, gaussian_blur_operator, selection_operator,
    tikhonov_augment,
};
pub use sparse::SparseMatrix;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::dictionary::GlobalDictionary;

/// Default entry cap for dense materialization.
pub const DEFAULT_DENSE_CAP: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("operator expects input of length {expected}, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error(
        "cannot compose a {outer_rows}x{outer_cols} operator after a {inner_rows}x{inner_cols} one"
    )]
    ComposeShape {
        outer_rows: usize,
        outer_cols: usize,
        inner_rows: usize,
        inner_cols: usize,
    },
    #[error("vertical stack blocks disagree on column count ({first} vs {got})")]
    StackShape { first: usize, got: usize },
    #[error("vertical stack needs at least one block")]
    EmptyStack,
    #[error("stack weight must be finite, got {0}")]
    BadWeight(f64),
    #[error("index map of length {0} is not a permutation")]
    NotPermutation(usize),
    #[error("kept indices must be strictly increasing and below {n}")]
    BadKeptIndices { n: usize },
    #[error("dense form of a {rows}x{cols} operator exceeds the {cap}-entry cap")]
    DenseTooLarge {
        rows: usize,
        cols: usize,
        cap: usize,
    },
    #[error("sparse structure invalid: {0}")]
    InvalidSparse(String),
    #[error("triplet ({row}, {col}) lies outside a {n_rows}x{n_cols} matrix")]
    TripletOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("matrix entries must be finite")]
    NonFiniteEntry,
    #[error("bandwidth must satisfy 1 <= bandwidth <= {n}, got {bandwidth}")]
    InvalidBandwidth { bandwidth: usize, n: usize },
    #[error("blur width must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("finite differences need at least 2 pixels per side, got {rows}x{cols}")]
    DegenerateGrid { rows: usize, cols: usize },
    #[error("patch size {p}x{q} must divide the {m}x{n} grid")]
    PatchGrid {
        m: usize,
        n: usize,
        p: usize,
        q: usize,
    },
    #[error("regularization weight must be non-negative and finite, got {0}")]
    InvalidRegWeight(f64),
    #[error(
        "regularizer has {reg_cols} columns, matching neither the solution space ({data_cols} \
         columns) nor the image space of the data operator"
    )]
    AugmentShape { reg_cols: usize, data_cols: usize },
}

/// A real linear map with a matching adjoint.
///
/// Variant data is public so callers can inspect structure, but values
/// should be built through the provided constructors, which validate the
/// shape invariants that `apply` relies on.
#[derive(Clone, Debug)]
pub enum LinearOperator {
    /// Explicit sparse matrix.
    Sparse(SparseMatrix),
    /// Kronecker product `left (x) right`, acting on column-major
    /// vectorized matrices: `(A (x) B) vec(X) = vec(B X A^T)`.
    Kronecker {
        left: Box<LinearOperator>,
        right: Box<LinearOperator>,
    },
    /// `outer * inner`; `inner` is applied first.
    Composition {
        outer: Box<LinearOperator>,
        inner: Box<LinearOperator>,
    },
    /// Weighted blocks stacked on top of each other; all blocks share the
    /// same column count.
    Stack(Vec<(f64, LinearOperator)>),
    /// Square reindexing: output `i` is input `map[i]`.
    Permutation(Vec<usize>),
    /// A subset of identity rows: output `i` is input `kept[i]`.
    Selection { n_cols: usize, kept: Vec<usize> },
    /// Patch-dictionary synthesis map (see the dictionary module).
    Dictionary(GlobalDictionary),
}

impl LinearOperator {
    pub fn sparse(matrix: SparseMatrix) -> Self {
        LinearOperator::Sparse(matrix)
    }

    pub fn identity(n: usize) -> Self {
        LinearOperator::Permutation((0..n).collect())
    }

    pub fn kronecker(left: LinearOperator, right: LinearOperator) -> Self {
        LinearOperator::Kronecker {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// `outer * inner`. Fails unless `outer.n_cols() == inner.n_rows()`.
    pub fn compose(outer: LinearOperator, inner: LinearOperator) -> Result<Self, OpError> {
        if outer.n_cols() != inner.n_rows() {
            return Err(OpError::ComposeShape {
                outer_rows: outer.n_rows(),
                outer_cols: outer.n_cols(),
                inner_rows: inner.n_rows(),
                inner_cols: inner.n_cols(),
            });
        }
        Ok(LinearOperator::Composition {
            outer: Box::new(outer),
            inner: Box::new(inner),
        })
    }

    /// Stacks weighted blocks vertically. All blocks must share a column
    /// count and all weights must be finite.
    pub fn stack(blocks: Vec<(f64, LinearOperator)>) -> Result<Self, OpError> {
        let first = match blocks.first() {
            Some((_, op)) => op.n_cols(),
            None => return Err(OpError::EmptyStack),
        };
        for (w, op) in &blocks {
            if !w.is_finite() {
                return Err(OpError::BadWeight(*w));
            }
            if op.n_cols() != first {
                return Err(OpError::StackShape {
                    first,
                    got: op.n_cols(),
                });
            }
        }
        Ok(LinearOperator::Stack(blocks))
    }

    /// Builds a permutation operator from a forward index map, which must
    /// visit every index below its length exactly once.
    pub fn permutation(map: Vec<usize>) -> Result<Self, OpError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &j in &map {
            if j >= n || seen[j] {
                return Err(OpError::NotPermutation(n));
            }
            seen[j] = true;
        }
        Ok(LinearOperator::Permutation(map))
    }

    pub fn n_rows(&self) -> usize {
        match self {
            LinearOperator::Sparse(m) => m.n_rows(),
            LinearOperator::Kronecker { left, right } => left.n_rows() * right.n_rows(),
            LinearOperator::Composition { outer, .. } => outer.n_rows(),
            LinearOperator::Stack(blocks) => blocks.iter().map(|(_, op)| op.n_rows()).sum(),
            LinearOperator::Permutation(map) => map.len(),
            LinearOperator::Selection { kept, .. } => kept.len(),
            LinearOperator::Dictionary(g) => g.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            LinearOperator::Sparse(m) => m.n_cols(),
            LinearOperator::Kronecker { left, right } => left.n_cols() * right.n_cols(),
            LinearOperator::Composition { inner, .. } => inner.n_cols(),
            LinearOperator::Stack(blocks) => blocks[0].1.n_cols(),
            LinearOperator::Permutation(map) => map.len(),
            LinearOperator::Selection { n_cols, .. } => *n_cols,
            LinearOperator::Dictionary(g) => g.n_cols(),
        }
    }

    /// Computes `self * x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, OpError> {
        if x.len() != self.n_cols() {
            return Err(OpError::InputLength {
                expected: self.n_cols(),
                got: x.len(),
            });
        }
        Ok(self.apply_unchecked(x))
    }

    /// Computes `self^T * y`.
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>, OpError> {
        if y.len() != self.n_rows() {
            return Err(OpError::InputLength {
                expected: self.n_rows(),
                got: y.len(),
            });
        }
        Ok(self.apply_adjoint_unchecked(y))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            LinearOperator::Sparse(m) => {
                let mut out = vec![0.0; m.n_rows()];
                m.apply_into(x, &mut out);
                out
            }
            LinearOperator::Kronecker { left, right } => kron_apply(left, right, x, false),
            LinearOperator::Composition { outer, inner } => {
                outer.apply_unchecked(&inner.apply_unchecked(x))
            }
            LinearOperator::Stack(blocks) => {
                let mut out = Vec::with_capacity(self.n_rows());
                for (w, op) in blocks {
                    out.extend(op.apply_unchecked(x).iter().map(|v| w * v));
                }
                out
            }
            LinearOperator::Permutation(map) => map.iter().map(|&j| x[j]).collect(),
            LinearOperator::Selection { kept, .. } => kept.iter().map(|&j| x[j]).collect(),
            LinearOperator::Dictionary(g) => g.apply(x),
        }
    }

    pub(crate) fn apply_adjoint_unchecked(&self, y: &[f64]) -> Vec<f64> {
        match self {
            LinearOperator::Sparse(m) => {
                let mut out = vec![0.0; m.n_cols()];
                m.apply_transpose_into(y, &mut out);
                out
            }
            LinearOperator::Kronecker { left, right } => kron_apply(left, right, y, true),
            LinearOperator::Composition { outer, inner } => {
                inner.apply_adjoint_unchecked(&outer.apply_adjoint_unchecked(y))
            }
            LinearOperator::Stack(blocks) => {
                let mut out = vec![0.0; self.n_cols()];
                let mut offset = 0;
                for (w, op) in blocks {
                    let rows = op.n_rows();
                    let part = op.apply_adjoint_unchecked(&y[offset..offset + rows]);
                    for (acc, v) in out.iter_mut().zip(&part) {
                        *acc += w * v;
                    }
                    offset += rows;
                }
                out
            }
            LinearOperator::Permutation(map) => {
                let mut out = vec![0.0; map.len()];
                for (i, &j) in map.iter().enumerate() {
                    out[j] = y[i];
                }
                out
            }
            LinearOperator::Selection { n_cols, kept } => {
                let mut out = vec![0.0; *n_cols];
                for (i, &j) in kept.iter().enumerate() {
                    out[j] = y[i];
                }
                out
            }
            LinearOperator::Dictionary(g) => g.apply_adjoint(y),
        }
    }

    /// Dense form, refused beyond [`DEFAULT_DENSE_CAP`] entries.
    pub fn to_dense(&self) -> Result<DMatrix<f64>, OpError> {
        self.to_dense_with_cap(DEFAULT_DENSE_CAP)
    }

    /// Dense form with an explicit entry cap. Each structural piece is
    /// assembled directly, so comparing columns against `apply` on basis
    /// vectors is a meaningful consistency check.
    pub fn to_dense_with_cap(&self, cap: usize) -> Result<DMatrix<f64>, OpError> {
        let (rows, cols) = (self.n_rows(), self.n_cols());
        if rows.checked_mul(cols).is_none_or(|n| n > cap) {
            return Err(OpError::DenseTooLarge { rows, cols, cap });
        }
        Ok(match self {
            LinearOperator::Sparse(m) => m.to_dense(),
            LinearOperator::Kronecker { left, right } => {
                let a = left.to_dense_with_cap(cap)?;
                let b = right.to_dense_with_cap(cap)?;
                let mut out = DMatrix::zeros(rows, cols);
                for ai in 0..a.nrows() {
                    for aj in 0..a.ncols() {
                        let scale = a[(ai, aj)];
                        for bi in 0..b.nrows() {
                            for bj in 0..b.ncols() {
                                out[(ai * b.nrows() + bi, aj * b.ncols() + bj)] =
                                    scale * b[(bi, bj)];
                            }
                        }
                    }
                }
                out
            }
            LinearOperator::Composition { outer, inner } => {
                outer.to_dense_with_cap(cap)? * inner.to_dense_with_cap(cap)?
            }
            LinearOperator::Stack(blocks) => {
                let mut out = DMatrix::zeros(rows, cols);
                let mut offset = 0;
                for (w, op) in blocks {
                    let dense = op.to_dense_with_cap(cap)?;
                    for i in 0..dense.nrows() {
                        for j in 0..cols {
                            out[(offset + i, j)] = w * dense[(i, j)];
                        }
                    }
                    offset += dense.nrows();
                }
                out
            }
            LinearOperator::Permutation(map) => {
                let mut out = DMatrix::zeros(rows, cols);
                for (i, &j) in map.iter().enumerate() {
                    out[(i, j)] = 1.0;
                }
                out
            }
            LinearOperator::Selection { kept, .. } => {
                let mut out = DMatrix::zeros(rows, cols);
                for (i, &j) in kept.iter().enumerate() {
                    out[(i, j)] = 1.0;
                }
                out
            }
            LinearOperator::Dictionary(g) => g.to_dense(),
        })
    }
}

/// Applies `left (x) right` (or its adjoint) to a column-major vectorized
/// matrix by routing columns through `right` and rows through `left`.
fn kron_apply(left: &LinearOperator, right: &LinearOperator, x: &[f64], adjoint: bool) -> Vec<f64> {
    let (a_rows, a_cols) = if adjoint {
        (left.n_cols(), left.n_rows())
    } else {
        (left.n_rows(), left.n_cols())
    };
    let (b_rows, b_cols) = if adjoint {
        (right.n_cols(), right.n_rows())
    } else {
        (right.n_rows(), right.n_cols())
    };

    // x is vec(X) with X of shape b_cols x a_cols; T = right * X.
    let mut t = vec![0.0; b_rows * a_cols];
    for j in 0..a_cols {
        let col = &x[j * b_cols..(j + 1) * b_cols];
        let y = if adjoint {
            right.apply_adjoint_unchecked(col)
        } else {
            right.apply_unchecked(col)
        };
        t[j * b_rows..(j + 1) * b_rows].copy_from_slice(&y);
    }

    // out = vec(T * left^T): row i of T runs through `left`.
    let mut out = vec![0.0; b_rows * a_rows];
    let mut row = vec![0.0; a_cols];
    for i in 0..b_rows {
        for j in 0..a_cols {
            row[j] = t[i + j * b_rows];
        }
        let y = if adjoint {
            left.apply_adjoint_unchecked(&row)
        } else {
            left.apply_unchecked(&row)
        };
        for (k, v) in y.iter().enumerate() {
            out[i + k * b_rows] = *v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_sparse(rows: usize, cols: usize, seed: u64) -> SparseMatrix {
        // Cheap deterministic fill; roughly half the entries present.
        let mut triplets = Vec::new();
        let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
        for i in 0..rows {
            for j in 0..cols {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                if state & 1 == 1 {
                    let v = ((state >> 16) & 0xffff) as f64 / 65536.0 - 0.5;
                    triplets.push((i, j, v));
                }
            }
        }
        SparseMatrix::from_triplets(rows, cols, &triplets).unwrap()
    }

    fn dense_apply(d: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
        (0..d.nrows())
            .map(|i| (0..d.ncols()).map(|j| d[(i, j)] * x[j]).sum())
            .collect()
    }

    #[test]
    fn selection_apply_and_adjoint() {
        let op = selection_operator(3, vec![0, 2]).unwrap();
        assert_eq!(op.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 3.0]);
        assert_eq!(op.apply_adjoint(&[5.0, 7.0]).unwrap(), vec![5.0, 0.0, 7.0]);
        let dense = op.to_dense().unwrap();
        assert_eq!(
            dense,
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
        );
    }

    #[test]
    fn stack_concatenates_weighted_blocks() {
        let a = LinearOperator::identity(2);
        let l = LinearOperator::sparse(
            SparseMatrix::from_triplets(1, 2, &[(0, 0, -1.0), (0, 1, 1.0)]).unwrap(),
        );
        let w = 2.0f64.sqrt();
        let st = LinearOperator::stack(vec![(1.0, a), (w, l)]).unwrap();
        let y = st.apply(&[3.0, 5.0]).unwrap();
        assert_eq!(y[..2], [3.0, 5.0]);
        assert!((y[2] - w * 2.0).abs() < 1e-15);
        assert_eq!(st.to_dense().unwrap().nrows(), 3);
    }

    #[test]
    fn composition_applies_inner_first() {
        let inner = small_sparse(5, 4, 3);
        let outer = small_sparse(6, 5, 4);
        let op = LinearOperator::compose(
            LinearOperator::sparse(outer.clone()),
            LinearOperator::sparse(inner.clone()),
        )
        .unwrap();
        let x = [0.5, -1.0, 2.0, 0.25];
        let want = dense_apply(&outer.to_dense(), &dense_apply(&inner.to_dense(), &x));
        let got = op.apply(&x).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
        // Adjoint runs the factors in the opposite order.
        let y = [1.0, 0.0, -2.0, 0.5, 0.25, -1.0];
        let dt = op.to_dense().unwrap().transpose();
        let want_t = dense_apply(&dt, &y);
        let got_t = op.apply_adjoint(&y).unwrap();
        for (g, w) in got_t.iter().zip(&want_t) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn kronecker_matches_dense_kron() {
        let a = small_sparse(3, 4, 1);
        let b = small_sparse(4, 3, 2);
        let op = LinearOperator::kronecker(
            LinearOperator::sparse(a.clone()),
            LinearOperator::sparse(b.clone()),
        );
        let dense = op.to_dense().unwrap();
        assert_eq!(dense.nrows(), 12);
        assert_eq!(dense.ncols(), 12);
        // Structural dense form against basis-vector probing.
        for j in 0..12 {
            let mut e = vec![0.0; 12];
            e[j] = 1.0;
            let col = op.apply(&e).unwrap();
            for i in 0..12 {
                assert!((dense[(i, j)] - col[i]).abs() < 1e-14);
            }
        }
        // vec identity: (A (x) B) vec(X) = vec(B X A^T).
        let x: Vec<f64> = (0..12).map(|k| 0.1 * k as f64 - 0.4).collect();
        let xm = DMatrix::from_column_slice(3, 4, &x);
        let want = b.to_dense() * xm * a.to_dense().transpose();
        let got = op.apply(&x).unwrap();
        for (k, v) in got.iter().enumerate() {
            assert!((v - want[(k % 4, k / 4)]).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_round_trips() {
        let op = LinearOperator::permutation(vec![2, 0, 1]).unwrap();
        let y = op.apply(&[10.0, 20.0, 30.0]).unwrap();
        assert_eq!(y, vec![30.0, 10.0, 20.0]);
        let back = op.apply_adjoint(&y).unwrap();
        assert_eq!(back, vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn invalid_permutation_rejected() {
        assert!(matches!(
            LinearOperator::permutation(vec![0, 0, 2]),
            Err(OpError::NotPermutation(3))
        ));
        assert!(matches!(
            LinearOperator::permutation(vec![0, 3, 2]),
            Err(OpError::NotPermutation(3))
        ));
    }

    #[test]
    fn dimension_mismatch_reports_both_sizes() {
        let op = LinearOperator::identity(3);
        let err = op.apply(&[1.0, 2.0]).unwrap_err();
        assert!(matches!(
            err,
            OpError::InputLength {
                expected: 3,
                got: 2
            }
        ));
    }

    #[test]
    fn compose_shape_mismatch_rejected() {
        let a = LinearOperator::identity(3);
        let b = LinearOperator::identity(4);
        assert!(matches!(
            LinearOperator::compose(a, b),
            Err(OpError::ComposeShape { .. })
        ));
    }

    #[test]
    fn dense_cap_enforced() {
        let op = LinearOperator::identity(40);
        let err = op.to_dense_with_cap(100).unwrap_err();
        assert!(matches!(err, OpError::DenseTooLarge { cap: 100, .. }));
    }

    #[test]
    fn empty_stack_rejected() {
        assert!(matches!(
            LinearOperator::stack(vec![]),
            Err(OpError::EmptyStack)
        ));
    }

    #[test]
    fn adjoint_identity_random_kinds() {
        let ops = vec![
            LinearOperator::sparse(small_sparse(10, 7, 9)),
            LinearOperator::kronecker(
                LinearOperator::sparse(small_sparse(3, 2, 5)),
                LinearOperator::sparse(small_sparse(2, 4, 6)),
            ),
            LinearOperator::stack(vec![
                (1.0, LinearOperator::sparse(small_sparse(3, 5, 7))),
                (0.5, LinearOperator::sparse(small_sparse(2, 5, 8))),
            ])
            .unwrap(),
        ];
        for op in &ops {
            let (m, n) = (op.n_rows(), op.n_cols());
            let x: Vec<f64> = (0..n).map(|j| (j as f64 * 0.37).sin()).collect();
            let y: Vec<f64> = (0..m).map(|i| (i as f64 * 0.73).cos()).collect();
            let ax = op.apply(&x).unwrap();
            let aty = op.apply_adjoint(&y).unwrap();
            let lhs: f64 = ax.iter().zip(&y).map(|(u, v)| u * v).sum();
            let rhs: f64 = x.iter().zip(&aty).map(|(u, v)| u * v).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
