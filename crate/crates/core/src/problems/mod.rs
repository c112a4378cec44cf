//! Builders for the four experiment instances (deblurring, completion,
//! tomography, superresolution), the test phantom, the noise model, and
//! PGM image I/O.
//!
//! Every builder produces a [`ProblemInstance`]: a forward operator, the
//! observations it generated from a ground-truth image, a regularizer
//! acting on images, its weight, and the patch geometry under which the
//! image will be represented. Builders are pure functions of their
//! configuration; all randomness is seeded.

mod pgm;
mod phantom;
mod superres;
mod tomo;

pub use pgm::{read_pgm, write_pgm, PgmDepth, PgmError};
pub use phantom::shepp_logan;
pub use superres::{block_average_operator, rotation_resample_operator};
pub use tomo::parallel_beam_projector;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dictionary::{DictError, PatchGeometry};
use crate::linop::{
    fd_patch, fd_patch_border, fd_pixel, gaussian_blur_operator, selection_operator,
    LinearOperator, OpError,
};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Patch(#[from] DictError),
    #[error("noise level must be non-negative and finite, got {0}")]
    InvalidNoiseLevel(f64),
    #[error("removal fraction must lie in [0, 1), got {0}")]
    InvalidRemoveFraction(f64),
    #[error("expected a length-{expected} image, got {got}")]
    ImageSize { expected: usize, got: usize },
    #[error("image entries must be finite and lie in [0, 1]")]
    ImageRange,
    #[error("phantom needs at least 16 pixels per side, got {0}")]
    PhantomTooSmall(usize),
    #[error("projection angles must lie in [0, 180), got {0}")]
    BadAngle(f64),
    #[error("ray and angle counts must be at least 1")]
    EmptyProjector,
    #[error("downsampling factor {factor} must divide the image side {n}")]
    InvalidFactor { n: usize, factor: usize },
    #[error("frame count must be at least 1")]
    NoFrames,
    #[error("observations have length {got}, operator produces {expected}")]
    ObservationLength { expected: usize, got: usize },
}

/// Relative noise level and generator seed for [`add_noise`].
#[derive(Clone, Copy, Debug)]
pub struct NoiseSpec {
    /// Target value of `||noise|| / ||clean data||`.
    pub level: f64,
    pub seed: u64,
}

/// Adds seeded Gaussian-direction noise scaled so that the perturbation
/// norm is exactly `level` times the clean data norm.
pub fn add_noise(b_clean: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>, ProblemError> {
    if !(spec.level.is_finite() && spec.level >= 0.0) {
        return Err(ProblemError::InvalidNoiseLevel(spec.level));
    }
    if spec.level == 0.0 || b_clean.is_empty() {
        return Ok(b_clean.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let direction: Vec<f64> = (0..b_clean.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let dir_norm = l2(&direction);
    if dir_norm == 0.0 {
        return Ok(b_clean.to_vec());
    }
    let scale = spec.level * l2(b_clean) / dir_norm;
    Ok(b_clean
        .iter()
        .zip(&direction)
        .map(|(b, e)| b + scale * e)
        .collect())
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One inverse problem: recover `ground_truth` from `observations =
/// forward(ground_truth) (+ noise)`, regularized by `reg_weight` times
/// the energy of `regularizer` applied to the image, with images
/// represented on the patch grid of `geometry`.
///
/// Builders guarantee the shape relations checked by [`Self::validate`]
/// and ground-truth entries in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub forward: LinearOperator,
    pub observations: Vec<f64>,
    pub ground_truth: Vec<f64>,
    pub regularizer: LinearOperator,
    pub reg_weight: f64,
    pub geometry: PatchGeometry,
}

impl ProblemInstance {
    /// Checks the shape relations between the fields and non-negativity
    /// of the ground truth.
    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.forward.n_cols() != self.ground_truth.len() {
            return Err(ProblemError::ImageSize {
                expected: self.forward.n_cols(),
                got: self.ground_truth.len(),
            });
        }
        if self.observations.len() != self.forward.n_rows() {
            return Err(ProblemError::ObservationLength {
                expected: self.forward.n_rows(),
                got: self.observations.len(),
            });
        }
        if self
            .ground_truth
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(ProblemError::ImageRange);
        }
        Ok(())
    }
}

/// A deterministic smooth test image: a few Gaussian bumps on a dark
/// background, clipped into `[0, 1]`, column-major.
pub fn synthetic_image(n: usize) -> Vec<f64> {
    let bumps: [(f64, f64, f64, f64); 3] = [
        (0.32, 0.38, 0.16, 0.9),
        (0.68, 0.62, 0.22, 0.7),
        (0.45, 0.78, 0.11, 0.55),
    ];
    let mut image = vec![0.0; n * n];
    for col in 0..n {
        for row in 0..n {
            let x = (col as f64 + 0.5) / n as f64;
            let y = (row as f64 + 0.5) / n as f64;
            let mut v = 0.0;
            for (cx, cy, width, height) in bumps {
                let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                v += height * (-d2 / (2.0 * width * width)).exp();
            }
            image[col * n + row] = v.min(1.0);
        }
    }
    image
}

fn checked_image(supplied: Option<&[f64]>, n: usize) -> Result<Vec<f64>, ProblemError> {
    match supplied {
        None => Ok(synthetic_image(n)),
        Some(img) => {
            if img.len() != n * n {
                return Err(ProblemError::ImageSize {
                    expected: n * n,
                    got: img.len(),
                });
            }
            if img.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) {
                return Err(ProblemError::ImageRange);
            }
            Ok(img.to_vec())
        }
    }
}

/// Settings for [`build_deblurring`]; defaults match the full-scale
/// experiment (256 pixels per side, bandwidth 3, decay rate 4, noise
/// level 1e-4, smoothing weight 1e-4, 16x16 patches).
#[derive(Clone, Debug)]
pub struct DeblurringConfig {
    pub size: usize,
    pub bandwidth: usize,
    pub sigma: f64,
    pub noise_level: f64,
    pub noise_seed: u64,
    pub mu: f64,
    pub patch_rows: usize,
    pub patch_cols: usize,
    /// Column-major ground-truth image; synthesized when absent.
    pub image: Option<Vec<f64>>,
}

impl Default for DeblurringConfig {
    fn default() -> Self {
        DeblurringConfig {
            size: 256,
            bandwidth: 3,
            sigma: 4.0,
            noise_level: 1e-4,
            noise_seed: 0,
            mu: 1e-4,
            patch_rows: 16,
            patch_cols: 16,
            image: None,
        }
    }
}

/// Separable Gaussian blur with additive noise, regularized by pixel
/// differences.
pub fn build_deblurring(config: &DeblurringConfig) -> Result<ProblemInstance, ProblemError> {
    let n = config.size;
    let ground_truth = checked_image(config.image.as_deref(), n)?;
    let forward = gaussian_blur_operator(n, config.bandwidth, config.sigma)?;
    let clean = forward.apply(&ground_truth)?;
    let observations = add_noise(
        &clean,
        &NoiseSpec {
            level: config.noise_level,
            seed: config.noise_seed,
        },
    )?;
    let instance = ProblemInstance {
        forward,
        observations,
        ground_truth,
        regularizer: fd_pixel(n, n)?,
        reg_weight: config.mu,
        geometry: PatchGeometry::new(n, n, config.patch_rows, config.patch_cols)?,
    };
    instance.validate()?;
    Ok(instance)
}

/// Settings for [`build_completion`]; defaults match the full-scale
/// experiment (128 pixels per side, 60% of pixels removed, noiseless).
#[derive(Clone, Debug)]
pub struct CompletionConfig {
    pub size: usize,
    pub remove_frac: f64,
    pub mu: f64,
    pub seed: u64,
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub image: Option<Vec<f64>>,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            size: 128,
            remove_frac: 0.6,
            mu: 1e-3,
            seed: 0,
            patch_rows: 16,
            patch_cols: 16,
            image: None,
        }
    }
}

/// Pixel removal: a seeded uniform sample of pixels is kept and observed
/// without noise. Regularized by differences across patch seams.
pub fn build_completion(config: &CompletionConfig) -> Result<ProblemInstance, ProblemError> {
    if !(config.remove_frac >= 0.0 && config.remove_frac < 1.0) {
        return Err(ProblemError::InvalidRemoveFraction(config.remove_frac));
    }
    let n = config.size;
    let ground_truth = checked_image(config.image.as_deref(), n)?;
    let total = n * n;
    let n_kept = ((1.0 - config.remove_frac) * total as f64).round() as usize;
    let mut indices: Vec<usize> = (0..total).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    indices.shuffle(&mut rng);
    let mut kept: Vec<usize> = indices.into_iter().take(n_kept).collect();
    kept.sort_unstable();
    let forward = selection_operator(total, kept)?;
    let observations = forward.apply(&ground_truth)?;
    let instance = ProblemInstance {
        forward,
        observations,
        ground_truth,
        regularizer: fd_patch_border(n, n, config.patch_rows, config.patch_cols)?,
        reg_weight: config.mu,
        geometry: PatchGeometry::new(n, n, config.patch_rows, config.patch_cols)?,
    };
    instance.validate()?;
    Ok(instance)
}

/// Settings for [`build_tomography`]; defaults match the full-scale
/// experiment (256 pixels per side, `floor(sqrt(2) * size)` rays, 100
/// angles spanning 0 to 179 degrees, patch smoothing weight 1).
#[derive(Clone, Debug)]
pub struct TomographyConfig {
    pub size: usize,
    pub mu: f64,
    pub patch_rows: usize,
    pub patch_cols: usize,
    /// Rays per angle; `floor(sqrt(2) * size)` when absent.
    pub n_rays: Option<usize>,
    pub n_angles: usize,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        TomographyConfig {
            size: 256,
            mu: 1.0,
            patch_rows: 16,
            patch_cols: 16,
            n_rays: None,
            n_angles: 100,
        }
    }
}

/// Equispaced angles covering `[0, 179]` degrees.
fn projection_angles(n_angles: usize) -> Vec<f64> {
    if n_angles == 1 {
        return vec![0.0];
    }
    (0..n_angles)
        .map(|k| 179.0 * k as f64 / (n_angles - 1) as f64)
        .collect()
}

/// Parallel-beam tomography of the phantom, observed noiselessly and
/// regularized by differences between whole adjacent patches.
pub fn build_tomography(config: &TomographyConfig) -> Result<ProblemInstance, ProblemError> {
    let n = config.size;
    let ground_truth = shepp_logan(n)?;
    let n_rays = config
        .n_rays
        .unwrap_or_else(|| (2.0f64.sqrt() * n as f64).floor() as usize);
    let forward = parallel_beam_projector(n, n_rays, &projection_angles(config.n_angles))?;
    let observations = forward.apply(&ground_truth)?;
    let instance = ProblemInstance {
        forward,
        observations,
        ground_truth,
        regularizer: fd_patch(n, n, config.patch_rows, config.patch_cols)?,
        reg_weight: config.mu,
        geometry: PatchGeometry::new(n, n, config.patch_rows, config.patch_cols)?,
    };
    instance.validate()?;
    Ok(instance)
}

/// Settings for [`build_superresolution`]; defaults match the full-scale
/// experiment (512 pixels per side, 10 frames, downsampling factor 8,
/// frame rotations stepping by half a degree).
#[derive(Clone, Debug)]
pub struct SuperresolutionConfig {
    pub size: usize,
    pub n_frames: usize,
    pub factor: usize,
    pub mu: f64,
    pub patch_rows: usize,
    pub patch_cols: usize,
    /// Rotation increment between consecutive frames, degrees
    /// counterclockwise; frame `i` is rotated by `(i - 1)` increments.
    pub angle_step_deg: f64,
    pub image: Option<Vec<f64>>,
}

impl Default for SuperresolutionConfig {
    fn default() -> Self {
        SuperresolutionConfig {
            size: 512,
            n_frames: 10,
            factor: 8,
            mu: 1e-2,
            patch_rows: 16,
            patch_cols: 16,
            angle_step_deg: 0.5,
            image: None,
        }
    }
}

/// Multi-frame downsampling: each frame rotates the image by a known
/// small angle, then block-averages it to low resolution. Observations
/// are the stacked noiseless frames; regularized by differences across
/// patch seams.
pub fn build_superresolution(
    config: &SuperresolutionConfig,
) -> Result<ProblemInstance, ProblemError> {
    if config.n_frames < 1 {
        return Err(ProblemError::NoFrames);
    }
    let n = config.size;
    let ground_truth = checked_image(config.image.as_deref(), n)?;
    let restrict = block_average_operator(n, config.factor)?;
    let mut blocks = Vec::with_capacity(config.n_frames);
    for frame in 0..config.n_frames {
        let angle = config.angle_step_deg * frame as f64;
        let warp = rotation_resample_operator(n, angle);
        blocks.push((1.0, LinearOperator::compose(restrict.clone(), warp)?));
    }
    let forward = LinearOperator::stack(blocks)?;
    let observations = forward.apply(&ground_truth)?;
    let instance = ProblemInstance {
        forward,
        observations,
        ground_truth,
        regularizer: fd_patch_border(n, n, config.patch_rows, config.patch_cols)?,
        reg_weight: config.mu,
        geometry: PatchGeometry::new(n, n, config.patch_rows, config.patch_cols)?,
    };
    instance.validate()?;
    Ok(instance)
}
