//! Downsampling and subpixel-warp operators for multi-frame
//! superresolution.

use super::ProblemError;
use crate::linop::{LinearOperator, SparseMatrix};

/// Averages each `factor` by `factor` block of an `n` by `n` image into
/// one low-resolution pixel. Both images are column-major; the output
/// has side `n / factor`, and `factor` must divide `n`.
pub fn block_average_operator(n: usize, factor: usize) -> Result<LinearOperator, ProblemError> {
    if factor == 0 || n == 0 || !n.is_multiple_of(factor) {
        return Err(ProblemError::InvalidFactor { n, factor });
    }
    let low = n / factor;
    let weight = 1.0 / (factor * factor) as f64;
    let mut row_offsets = Vec::with_capacity(low * low + 1);
    row_offsets.push(0usize);
    let mut col_indices = Vec::with_capacity(low * low * factor * factor);
    let mut values = Vec::with_capacity(low * low * factor * factor);
    for bj in 0..low {
        for bi in 0..low {
            // Column-major scan of the block is already sorted by index.
            for pj in 0..factor {
                for pi in 0..factor {
                    col_indices.push((bj * factor + pj) * n + bi * factor + pi);
                    values.push(weight);
                }
            }
            row_offsets.push(col_indices.len());
        }
    }
    let matrix = SparseMatrix::new(low * low, n * n, row_offsets, col_indices, values)?;
    Ok(LinearOperator::sparse(matrix))
}

/// Resamples an `n` by `n` image rotated by `angle_deg` degrees
/// counterclockwise about the center of its upper-left pixel, with
/// bilinear interpolation and zero fill outside the source. Zero
/// interpolation weights are dropped, so a zero angle yields exactly
/// the identity.
pub fn rotation_resample_operator(n: usize, angle_deg: f64) -> LinearOperator {
    let phi = angle_deg.to_radians();
    let (sin, cos) = (phi.sin(), phi.cos());
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(4 * n * n);
    for out_col in 0..n {
        for out_row in 0..n {
            // Source location of this output pixel under the inverse
            // rotation, in (row, col) pixel-center coordinates.
            let (oc, or) = (out_col as f64, out_row as f64);
            let src_row = oc * sin + or * cos;
            let src_col = oc * cos - or * sin;
            let base_row = src_row.floor();
            let base_col = src_col.floor();
            let fr = src_row - base_row;
            let fc = src_col - base_col;
            let out_idx = out_col * n + out_row;
            for (dr, dc, w) in [
                (0.0, 0.0, (1.0 - fr) * (1.0 - fc)),
                (0.0, 1.0, (1.0 - fr) * fc),
                (1.0, 0.0, fr * (1.0 - fc)),
                (1.0, 1.0, fr * fc),
            ] {
                if w == 0.0 {
                    continue;
                }
                let row = base_row + dr;
                let col = base_col + dc;
                if row < 0.0 || col < 0.0 || row >= n as f64 || col >= n as f64 {
                    continue;
                }
                triplets.push((out_idx, col as usize * n + row as usize, w));
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(n * n, n * n, &triplets)
        .expect("in-range triplets with finite weights");
    LinearOperator::sparse(matrix)
}
