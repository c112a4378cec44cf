//! Constructors for the structured operators used by the experiment
//! builders: separable blur, masking, finite differences at pixel and
//! patch granularity, and Tikhonov-style stacking.

use super::{LinearOperator, OpError, SparseMatrix};

/// Separable Gaussian-profile blur on an `n x n` image, as the Kronecker
/// product of one banded Toeplitz factor with itself.
///
/// The factor has entries `exp(-k^2 / (2 sigma^2))` on the `k`-th
/// off-diagonal for `|k| < bandwidth` and is not normalized, so
/// `bandwidth == 1` yields the identity.
pub fn gaussian_blur_operator(
    n: usize,
    bandwidth: usize,
    sigma: f64,
) -> Result<LinearOperator, OpError> {
    if bandwidth == 0 || bandwidth > n {
        return Err(OpError::InvalidBandwidth { bandwidth, n });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(OpError::InvalidSigma(sigma));
    }
    let band: Vec<f64> = (0..bandwidth)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let mut triplets = Vec::new();
    for i in 0..n {
        let lo = i.saturating_sub(bandwidth - 1);
        let hi = (i + bandwidth).min(n);
        for j in lo..hi {
            let k = i.abs_diff(j);
            triplets.push((i, j, band[k]));
        }
    }
    let factor = SparseMatrix::from_triplets(n, n, &triplets)?;
    Ok(LinearOperator::kronecker(
        LinearOperator::sparse(factor.clone()),
        LinearOperator::sparse(factor),
    ))
}

/// Keeps the listed coordinates of a length-`n` vector, in order. The
/// indices must be strictly increasing and within range.
pub fn selection_operator(n: usize, kept: Vec<usize>) -> Result<LinearOperator, OpError> {
    let increasing = kept.windows(2).all(|w| w[0] < w[1]);
    if !increasing || kept.last().is_some_and(|&j| j >= n) {
        return Err(OpError::BadKeptIndices { n });
    }
    Ok(LinearOperator::Selection { n_cols: n, kept })
}

/// First differences between every pair of vertically or horizontally
/// adjacent pixels of an `m x n` column-major image.
///
/// Vertical (down-column) differences come first, column by column, then
/// horizontal ones, giving `n(m-1) + m(n-1)` rows in total.
pub fn fd_pixel(m: usize, n: usize) -> Result<LinearOperator, OpError> {
    if m < 2 || n < 2 {
        return Err(OpError::DegenerateGrid { rows: m, cols: n });
    }
    let n_vert = n * (m - 1);
    let n_horz = m * (n - 1);
    let mut triplets = Vec::with_capacity(2 * (n_vert + n_horz));
    let mut row = 0;
    for j in 0..n {
        for i in 0..m - 1 {
            triplets.push((row, j * m + i, -1.0));
            triplets.push((row, j * m + i + 1, 1.0));
            row += 1;
        }
    }
    for j in 0..n - 1 {
        for i in 0..m {
            triplets.push((row, j * m + i, -1.0));
            triplets.push((row, (j + 1) * m + i, 1.0));
            row += 1;
        }
    }
    let matrix = SparseMatrix::from_triplets(n_vert + n_horz, m * n, &triplets)?;
    Ok(LinearOperator::sparse(matrix))
}

/// Differences across patch seams only: for each pair of pixels that face
/// each other across a boundary between `p x q` patches, one row takes
/// their difference. An `m x n` image tiled by `p x q` patches yields
/// `m (n/q - 1)` vertical-seam rows plus `n (m/p - 1)` horizontal-seam
/// rows.
pub fn fd_patch_border(m: usize, n: usize, p: usize, q: usize) -> Result<LinearOperator, OpError> {
    check_patch_tiling(m, n, p, q)?;
    let n_vseam = m * (n / q - 1);
    let n_hseam = n * (m / p - 1);
    let mut triplets = Vec::with_capacity(2 * (n_vseam + n_hseam));
    let mut row = 0;
    // Vertical seams: columns q-1 | q, 2q-1 | 2q, ...
    for seam in 1..n / q {
        let j = seam * q;
        for i in 0..m {
            triplets.push((row, (j - 1) * m + i, -1.0));
            triplets.push((row, j * m + i, 1.0));
            row += 1;
        }
    }
    // Horizontal seams: rows p-1 | p, 2p-1 | 2p, ...
    for seam in 1..m / p {
        let i = seam * p;
        for j in 0..n {
            triplets.push((row, j * m + i - 1, -1.0));
            triplets.push((row, j * m + i, 1.0));
            row += 1;
        }
    }
    let matrix = SparseMatrix::from_triplets(n_vseam + n_hseam, m * n, &triplets)?;
    Ok(LinearOperator::sparse(matrix))
}

/// Differences between whole adjacent patches: for each pair of
/// horizontally or vertically adjacent `p x q` patches, `p q` rows take
/// the pixelwise difference of the two patches. With an `(m/p) x (n/q)`
/// patch grid this gives `(m/p)(n/q - 1) + (m/p - 1)(n/q)` pairs.
pub fn fd_patch(m: usize, n: usize, p: usize, q: usize) -> Result<LinearOperator, OpError> {
    check_patch_tiling(m, n, p, q)?;
    let gm = m / p;
    let gn = n / q;
    let pairs = gm * (gn - 1) + (gm - 1) * gn;
    let mut triplets = Vec::with_capacity(2 * pairs * p * q);
    let mut row = 0;
    let emit = |triplets: &mut Vec<(usize, usize, f64)>,
                row: &mut usize,
                (bi_a, bj_a): (usize, usize),
                (bi_b, bj_b): (usize, usize)| {
        for pj in 0..q {
            for pi in 0..p {
                let a = (bj_a * q + pj) * m + bi_a * p + pi;
                let b = (bj_b * q + pj) * m + bi_b * p + pi;
                triplets.push((*row, a, -1.0));
                triplets.push((*row, b, 1.0));
                *row += 1;
            }
        }
    };
    for bj in 0..gn - 1 {
        for bi in 0..gm {
            emit(&mut triplets, &mut row, (bi, bj), (bi, bj + 1));
        }
    }
    for bj in 0..gn {
        for bi in 0..gm - 1 {
            emit(&mut triplets, &mut row, (bi, bj), (bi + 1, bj));
        }
    }
    let matrix = SparseMatrix::from_triplets(pairs * p * q, m * n, &triplets)?;
    Ok(LinearOperator::sparse(matrix))
}

fn check_patch_tiling(m: usize, n: usize, p: usize, q: usize) -> Result<(), OpError> {
    if p == 0 || q == 0 || !m.is_multiple_of(p) || !n.is_multiple_of(q) || m / p < 1 || n / q < 1 {
        return Err(OpError::PatchGrid { m, n, p, q });
    }
    Ok(())
}

/// Stacks a regularizer under a data operator with weight `sqrt(2 mu)`,
/// so that least squares on the stack minimizes
/// `||data x - b||^2 + 2 mu ||reg_block x||^2` over zero-padded data.
///
/// When `data` is a composition `outer * inner` and `reg` instead acts on
/// the intermediate space (`reg.n_cols() == inner.n_rows()`), the stacked
/// block becomes `reg * inner` so both halves share the solution space.
/// Returns the stacked operator together with the number of appended rows,
/// which callers use to zero-pad the right-hand side.
pub fn tikhonov_augment(
    data: LinearOperator,
    reg: LinearOperator,
    mu: f64,
) -> Result<(LinearOperator, usize), OpError> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(OpError::InvalidRegWeight(mu));
    }
    let data_cols = data.n_cols();
    let reg_block = match &data {
        LinearOperator::Composition { inner, .. } if reg.n_cols() == inner.n_rows() => {
            LinearOperator::compose(reg, inner.as_ref().clone())?
        }
        _ if reg.n_cols() == data_cols => reg,
        _ => {
            return Err(OpError::AugmentShape {
                reg_cols: reg.n_cols(),
                data_cols,
            })
        }
    };
    let padding = reg_block.n_rows();
    let stacked = LinearOperator::stack(vec![(1.0, data), ((2.0 * mu).sqrt(), reg_block)])?;
    Ok((stacked, padding))
}
