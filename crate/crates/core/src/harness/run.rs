//! Experiment execution: problem assembly, solving, artifact output,
//! sweeps, and dictionary training.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::dictionary::{
    extract_patches, global_dictionary_operator, learn_dictionary_admm, load_dictionary,
    save_dictionary, DictLearnConfig, Dictionary, PatchGeometry,
};
use crate::linop::{tikhonov_augment, LinearOperator, SparseMatrix};
use crate::problems::{
    build_completion, build_deblurring, build_superresolution, build_tomography, read_pgm,
    shepp_logan, write_pgm, CompletionConfig, DeblurringConfig, PgmDepth, ProblemInstance,
    SuperresolutionConfig, TomographyConfig,
};
use crate::solvers::{
    mrnsd_observed, sp_mrnsd_observed, sp_nngd_observed, IterationRecord, MappingParams,
    SolverOptions,
};

use super::metrics::{self, MetricsReport};
use super::{ExperimentConfig, HarnessError, SolverKind, Task};

/// Settings for [`train_dictionary`]. Defaults: 16x16 patches, 100
/// atoms, non-overlapping extraction, and the learner's usual penalty
/// weights.
#[derive(Clone, Debug)]
pub struct TrainSettings {
    /// PGM image supplying the training patches.
    pub image: PathBuf,
    /// Dictionary file to write.
    pub out: PathBuf,
    pub patch: (usize, usize),
    pub atoms: usize,
    pub sweeps: usize,
    pub seed: u64,
    pub l1_weight: f64,
    pub penalty: f64,
    /// Extraction stride; patch-sized (non-overlapping) when absent.
    pub stride: Option<(usize, usize)>,
}

impl TrainSettings {
    pub fn new(image: PathBuf, out: PathBuf) -> Self {
        TrainSettings {
            image,
            out,
            patch: (16, 16),
            atoms: 100,
            sweeps: 200,
            seed: 0,
            l1_weight: 0.1,
            penalty: 1.0,
            stride: None,
        }
    }
}

/// Learns a patch dictionary from an image on disk and writes it out,
/// returning the learned dictionary.
pub fn train_dictionary(settings: &TrainSettings) -> Result<Dictionary, HarnessError> {
    let (width, height, data) = read_pgm(&settings.image)
        .map_err(|e| HarnessError::io(format!("image {}", settings.image.display()), into_io(e)))?;
    let (p, q) = settings.patch;
    let (stride_rows, stride_cols) = settings.stride.unwrap_or((p, q));
    let train = extract_patches(&data, height, width, p, q, stride_rows, stride_cols)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut learn = DictLearnConfig::new(p, q, settings.atoms);
    learn.l1_weight = settings.l1_weight;
    learn.penalty = settings.penalty;
    learn.sweeps = settings.sweeps;
    learn.seed = settings.seed;
    let outcome =
        learn_dictionary_admm(&train, &learn).map_err(|e| HarnessError::Config(e.to_string()))?;
    save_dictionary(&outcome.dictionary, &settings.out).map_err(|e| {
        HarnessError::io(format!("dictionary {}", settings.out.display()), into_io(e))
    })?;
    Ok(outcome.dictionary)
}

/// Writes the rasterized test phantom as an 8-bit PGM image.
pub fn write_phantom(size: usize, path: &Path) -> Result<(), HarnessError> {
    let image = shepp_logan(size).map_err(|e| HarnessError::Config(e.to_string()))?;
    write_pgm(path, size, size, &image, PgmDepth::Eight)
        .map_err(|e| HarnessError::io(format!("phantom {}", path.display()), into_io(e)))
}

fn into_io<E: std::error::Error>(e: E) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

fn internal(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Numerical(format!("operator assembly: {e}"))
}

/// The built-in 2-unknown demonstration problem. Its non-negative
/// optimum zeroes the first entry and puts 94/85 in the second, which
/// exceeds 1; the unit-range convention for images deliberately does
/// not apply here.
fn toy_instance() -> ProblemInstance {
    let forward = SparseMatrix::from_triplets(
        2,
        2,
        &[(0, 0, 20.0), (0, 1, 5.0), (1, 0, 5.0), (1, 1, 20.0)],
    )
    .expect("static toy matrix");
    let regularizer = SparseMatrix::from_triplets(1, 2, &[(0, 0, -1.0), (0, 1, 1.0)])
        .expect("static toy regularizer");
    ProblemInstance {
        forward: LinearOperator::sparse(forward),
        observations: vec![2.0, 23.0],
        ground_truth: vec![0.0, 94.0 / 85.0],
        regularizer: LinearOperator::sparse(regularizer),
        reg_weight: 0.0,
        geometry: PatchGeometry::new(2, 1, 2, 1).expect("static toy geometry"),
    }
}

fn load_image(path: &Path, size: usize) -> Result<Vec<f64>, HarnessError> {
    let (width, height, data) = read_pgm(path)
        .map_err(|e| HarnessError::io(format!("image {}", path.display()), into_io(e)))?;
    if width != size || height != size {
        return Err(HarnessError::Config(format!(
            "image {} is {width}x{height}, task needs {size}x{size}",
            path.display()
        )));
    }
    Ok(data)
}

fn build_instance(config: &ExperimentConfig) -> Result<ProblemInstance, HarnessError> {
    let image = match &config.image {
        Some(path) => Some(load_image(path, config.size)?),
        None => None,
    };
    let (patch_rows, patch_cols) = config.patch;
    let built = match config.task {
        Task::Toy => {
            // The static instance carries weight 0; a configured smoothing
            // weight still applies so the toy exercises augmentation too.
            let mut instance = toy_instance();
            instance.reg_weight = config.mu;
            return Ok(instance);
        }
        Task::Deblur => build_deblurring(&DeblurringConfig {
            size: config.size,
            mu: config.mu,
            noise_seed: config.seed,
            patch_rows,
            patch_cols,
            image,
            ..Default::default()
        }),
        Task::Complete => build_completion(&CompletionConfig {
            size: config.size,
            mu: config.mu,
            seed: config.seed,
            patch_rows,
            patch_cols,
            image,
            ..Default::default()
        }),
        Task::Tomo => build_tomography(&TomographyConfig {
            size: config.size,
            mu: config.mu,
            patch_rows,
            patch_cols,
            ..Default::default()
        }),
        Task::Superres => build_superresolution(&SuperresolutionConfig {
            size: config.size,
            mu: config.mu,
            patch_rows,
            patch_cols,
            image,
            ..Default::default()
        }),
    };
    built.map_err(|e| HarnessError::Config(e.to_string()))
}

fn synthesis_operator(
    config: &ExperimentConfig,
    geometry: &PatchGeometry,
) -> Result<LinearOperator, HarnessError> {
    if config.task == Task::Toy {
        return Ok(LinearOperator::identity(2));
    }
    let path = config
        .dict
        .as_ref()
        .expect("resolve requires a dictionary for non-toy tasks");
    let dict = load_dictionary(path)
        .map_err(|e| HarnessError::io(format!("dictionary {}", path.display()), into_io(e)))?;
    if (dict.patch_rows(), dict.patch_cols()) != (geometry.patch_rows(), geometry.patch_cols()) {
        return Err(HarnessError::Config(format!(
            "dictionary patches are {}x{}, task patches are {}x{}",
            dict.patch_rows(),
            dict.patch_cols(),
            geometry.patch_rows(),
            geometry.patch_cols()
        )));
    }
    global_dictionary_operator(dict, *geometry).map_err(|e| HarnessError::Config(e.to_string()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn write_text(path: &Path, content: &str) -> Result<(), HarnessError> {
    fs::write(path, content).map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// Solves one configured experiment and writes its artifacts into the
/// output directory: `trace.csv` (per-iteration progress on the
/// unaugmented system), `metrics.txt` (final metrics as key=value),
/// `recon.pgm` (synthesized image), `coeffs.pgm` (coefficient sparsity
/// pattern, one column per patch, nonzero entries white), and
/// `config.resolved` (all settings echoed back).
pub fn run_experiment(config: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    if config.grid_lambda.is_some() || config.grid_a.is_some() || config.grid_c.is_some() {
        return Err(HarnessError::Config(
            "parameter grids only apply to the sweep command".into(),
        ));
    }
    let instance = build_instance(config)?;
    let ProblemInstance {
        forward,
        observations,
        ground_truth,
        regularizer,
        reg_weight,
        geometry,
    } = instance;
    let synthesis = synthesis_operator(config, &geometry)?;
    let coeff_len = synthesis.n_cols();
    let data_op = LinearOperator::compose(forward, synthesis).map_err(internal)?;
    let n_data_rows = data_op.n_rows();

    // The solver minimizes the augmented system; progress and final
    // metrics are reported against the data part only.
    let (system, rhs) = if reg_weight > 0.0 {
        let (system, padding) =
            tikhonov_augment(data_op, regularizer, reg_weight).map_err(internal)?;
        let mut rhs = observations;
        rhs.resize(n_data_rows + padding, 0.0);
        (system, rhs)
    } else {
        (data_op, observations)
    };
    let (data_ref, rhs_data) = match &system {
        LinearOperator::Stack(blocks) => (&blocks[0].1, &rhs[..n_data_rows]),
        other => (other, &rhs[..]),
    };
    let LinearOperator::Composition {
        inner: synthesis_ref,
        ..
    } = data_ref
    else {
        return Err(internal("expected a composed data operator"));
    };
    let b0_norm = l2(rhs_data);

    let mut trace_rows: Vec<String> = Vec::with_capacity(config.iters);
    let observer = |record: &IterationRecord, x: &[f64]| {
        let ax = data_ref
            .apply(x)
            .expect("iterate matches the data operator");
        let misfit = ax
            .iter()
            .zip(rhs_data)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        let rel = if b0_norm > 0.0 {
            misfit / b0_norm
        } else {
            misfit
        };
        trace_rows.push(format!(
            "{},{},{},{}",
            record.iter, rel, record.sparsity_proxy, record.step_size
        ));
    };

    let opts = SolverOptions {
        max_iters: config.iters,
        ..Default::default()
    };
    let result = match config.solver {
        SolverKind::Mrnsd => mrnsd_observed(&system, &rhs, &opts, observer)?,
        SolverKind::SpMrnsd => sp_mrnsd_observed(&system, &rhs, config.lambda, &opts, observer)?,
        SolverKind::SpNngd => {
            let params = MappingParams::new(config.steepness, config.switch_point)?;
            sp_nngd_observed(&system, &rhs, &params, &opts, observer)?
        }
    };

    let x = &result.solution;
    let report = MetricsReport {
        rel_residual: metrics::rel_residual(data_ref, x, rhs_data)?,
        rel_error: metrics::rel_error(&ground_truth, synthesis_ref, x)?,
        rel_sparsity: metrics::rel_sparsity(x, &ground_truth)?,
    };

    fs::create_dir_all(&config.out)
        .map_err(|e| HarnessError::io(config.out.display().to_string(), e))?;
    let mut trace = String::from("iter,rel_residual,sparsity_proxy,step_size\n");
    for row in &trace_rows {
        trace.push_str(row);
        trace.push('\n');
    }
    write_text(&config.out.join("trace.csv"), &trace)?;
    write_text(
        &config.out.join("metrics.txt"),
        &format!(
            "rel_error={}\nrel_residual={}\nrel_sparsity={}\n",
            report.rel_error, report.rel_residual, report.rel_sparsity
        ),
    )?;
    let recon = synthesis_ref.apply(x).map_err(internal)?;
    let recon_path = config.out.join("recon.pgm");
    write_pgm(
        &recon_path,
        geometry.image_cols(),
        geometry.image_rows(),
        &recon,
        PgmDepth::Eight,
    )
    .map_err(|e| HarnessError::io(recon_path.display().to_string(), into_io(e)))?;
    let n_patches = geometry.n_patches();
    let pattern: Vec<f64> = x
        .iter()
        .map(|&v| if v != 0.0 { 1.0 } else { 0.0 })
        .collect();
    let coeffs_path = config.out.join("coeffs.pgm");
    write_pgm(
        &coeffs_path,
        n_patches,
        coeff_len / n_patches,
        &pattern,
        PgmDepth::Eight,
    )
    .map_err(|e| HarnessError::io(coeffs_path.display().to_string(), into_io(e)))?;
    let mut resolved = config.resolved_lines().join("\n");
    resolved.push('\n');
    write_text(&config.out.join("config.resolved"), &resolved)?;

    Ok(report)
}

/// Runs one experiment per grid point into `run_NNN` subdirectories and
/// writes an aggregate `sweep.csv`. Returns the grid points with their
/// final metrics, in run order.
pub fn run_sweep(
    config: &ExperimentConfig,
) -> Result<Vec<(Vec<f64>, MetricsReport)>, HarnessError> {
    enum Mode {
        Shrinkage,
        Mapping,
    }
    let (mode, header, points): (Mode, &str, Vec<Vec<f64>>) =
        if let Some(grid) = &config.grid_lambda {
            (
                Mode::Shrinkage,
                "lambda,rel_error,rel_sparsity",
                grid.iter().map(|&l| vec![l]).collect(),
            )
        } else if config.grid_a.is_some() || config.grid_c.is_some() {
            let a_grid = config
                .grid_a
                .clone()
                .unwrap_or_else(|| vec![config.steepness]);
            let c_grid = config
                .grid_c
                .clone()
                .unwrap_or_else(|| vec![config.switch_point]);
            let mut points = Vec::with_capacity(a_grid.len() * c_grid.len());
            for &a in &a_grid {
                for &c in &c_grid {
                    points.push(vec![a, c]);
                }
            }
            (Mode::Mapping, "a,c,rel_error,rel_sparsity", points)
        } else {
            return Err(HarnessError::Config(
                "sweep needs grid_lambda, or grid_a and/or grid_c".into(),
            ));
        };

    fs::create_dir_all(&config.out)
        .map_err(|e| HarnessError::io(config.out.display().to_string(), e))?;
    let mut results = Vec::with_capacity(points.len());
    for (idx, point) in points.iter().enumerate() {
        let mut sub = config.clone();
        sub.grid_lambda = None;
        sub.grid_a = None;
        sub.grid_c = None;
        match mode {
            Mode::Shrinkage => sub.lambda = point[0],
            Mode::Mapping => {
                sub.steepness = point[0];
                sub.switch_point = point[1];
            }
        }
        sub.out = config.out.join(format!("run_{idx:03}"));
        let report = run_experiment(&sub)?;
        results.push((point.clone(), report));
    }

    let mut csv = String::from(header);
    csv.push('\n');
    for (point, report) in &results {
        for value in point {
            csv.push_str(&value.to_string());
            csv.push(',');
        }
        csv.push_str(&format!("{},{}\n", report.rel_error, report.rel_sparsity));
    }
    write_text(&config.out.join("sweep.csv"), &csv)?;
    Ok(results)
}
