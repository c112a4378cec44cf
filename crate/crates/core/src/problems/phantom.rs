//! Rasterized head phantom used as tomography ground truth.

use super::ProblemError;

/// Additive ellipse components of the phantom: intensity, semi-axes
/// `(a, b)` along the ellipse axes, center `(x0, y0)` in `[-1, 1]^2`
/// coordinates, and rotation angle in degrees.
///
/// Note the two "eye" ellipses differ in size and tilt sign, so the
/// phantom is not mirror-symmetric about the vertical axis.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Rasterizes the phantom on an `n` by `n` pixel grid covering
/// `[-1, 1]^2`, sampling ellipse membership at pixel centers and
/// clipping the summed intensities into `[0, 1]`. Column-major, row 0
/// at the top. Needs `n >= 16` to resolve the smallest ellipses.
pub fn shepp_logan(n: usize) -> Result<Vec<f64>, ProblemError> {
    if n < 16 {
        return Err(ProblemError::PhantomTooSmall(n));
    }
    let rotations: Vec<(f64, f64)> = ELLIPSES
        .iter()
        .map(|e| {
            let phi = e.5.to_radians();
            (phi.cos(), phi.sin())
        })
        .collect();
    let mut image = vec![0.0; n * n];
    for col in 0..n {
        let x = -1.0 + (col as f64 + 0.5) * 2.0 / n as f64;
        for row in 0..n {
            let y = 1.0 - (row as f64 + 0.5) * 2.0 / n as f64;
            let mut v = 0.0;
            for ((value, a, b, x0, y0, _), (c, s)) in ELLIPSES.iter().zip(&rotations) {
                let dx = x - x0;
                let dy = y - y0;
                let u = (dx * c + dy * s) / a;
                let w = (-dx * s + dy * c) / b;
                if u * u + w * w <= 1.0 {
                    v += value;
                }
            }
            image[col * n + row] = v.clamp(0.0, 1.0);
        }
    }
    Ok(image)
}
