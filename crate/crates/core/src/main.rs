//! Command-line interface: solve single experiments, sweep parameter
//! grids, train dictionaries, and emit the test phantom.

use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};

use dictsolve::harness::{self, parse_patch, ConfigDraft, HarnessError, TrainSettings};

#[derive(Parser)]
#[command(
    name = "dictsolve",
    version,
    about = "Non-negative sparse solvers over patch dictionaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one experiment and write its artifacts.
    Run(ExperimentArgs),
    /// Run one experiment per parameter grid point and aggregate the
    /// final metrics.
    Sweep(ExperimentArgs),
    /// Learn a patch dictionary from a PGM image.
    Train(TrainArgs),
    /// Write the rasterized test phantom as a PGM image.
    Phantom(PhantomArgs),
}

/// Settings shared by `run` and `sweep`; every flag overrides the same
/// key in the config file.
#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value config file read before applying flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// deblur, complete, tomo, superres, or toy.
    #[arg(long)]
    task: Option<String>,
    /// mrnsd, spmrnsd, or spnngd.
    #[arg(long)]
    solver: Option<String>,
    /// Shrinkage weight (spmrnsd only).
    #[arg(long)]
    lambda: Option<f64>,
    /// Mapping steepness (spnngd only).
    #[arg(long)]
    a: Option<f64>,
    /// Mapping switch point (spnngd only).
    #[arg(long)]
    c: Option<f64>,
    /// Smoothing weight.
    #[arg(long)]
    mu: Option<f64>,
    /// Iteration budget.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dictionary file (required except for the toy task).
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Ground-truth PGM image; synthesized when absent.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Image side length override.
    #[arg(long)]
    size: Option<usize>,
    /// Patch shape, ROWSxCOLS or one number for square.
    #[arg(long)]
    patch: Option<String>,
    /// Comma-separated lambda grid for sweeps.
    #[arg(long, value_delimiter = ',')]
    grid_lambda: Option<Vec<f64>>,
    /// Comma-separated steepness grid for sweeps.
    #[arg(long, value_delimiter = ',')]
    grid_a: Option<Vec<f64>>,
    /// Comma-separated switch-point grid for sweeps.
    #[arg(long, value_delimiter = ',')]
    grid_c: Option<Vec<f64>>,
}

impl ExperimentArgs {
    fn into_draft(self) -> Result<ConfigDraft, HarnessError> {
        let file = match &self.config {
            Some(path) => ConfigDraft::from_file(path)?,
            None => ConfigDraft::default(),
        };
        let patch = self.patch.as_deref().map(parse_patch).transpose()?;
        let flags = ConfigDraft {
            task: self.task,
            solver: self.solver,
            lambda: self.lambda,
            steepness: self.a,
            switch_point: self.c,
            mu: self.mu,
            iters: self.iters,
            seed: self.seed,
            dict: self.dict,
            image: self.image,
            out: self.out,
            size: self.size,
            patch,
            grid_lambda: self.grid_lambda,
            grid_a: self.grid_a,
            grid_c: self.grid_c,
        };
        Ok(file.merge(flags))
    }
}

#[derive(Args)]
struct TrainArgs {
    /// PGM image supplying the training patches.
    #[arg(long)]
    image: PathBuf,
    /// Dictionary file to write.
    #[arg(long)]
    out: PathBuf,
    /// Patch shape, ROWSxCOLS or one number for square.
    #[arg(long, default_value = "16")]
    patch: String,
    /// Number of atoms to learn.
    #[arg(long, default_value_t = 100)]
    atoms: usize,
    /// Alternating sweeps to run.
    #[arg(long, default_value_t = 200)]
    sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coefficient sparsity weight.
    #[arg(long, default_value_t = 0.1)]
    l1: f64,
    /// Splitting penalty.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Extraction stride, ROWSxCOLS; patch-sized when absent.
    #[arg(long)]
    stride: Option<String>,
}

#[derive(Args)]
struct PhantomArgs {
    /// Side length in pixels (at least 16).
    #[arg(long, default_value_t = 256)]
    size: usize,
    /// PGM file to write.
    #[arg(long)]
    out: PathBuf,
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(args) => {
            let config = args.into_draft()?.resolve()?;
            let report = harness::run_experiment(&config)?;
            println!(
                "rel_residual={} rel_error={} rel_sparsity={}",
                report.rel_residual, report.rel_error, report.rel_sparsity
            );
            Ok(())
        }
        Command::Sweep(args) => {
            let config = args.into_draft()?.resolve()?;
            let results = harness::run_sweep(&config)?;
            println!(
                "{} runs -> {}",
                results.len(),
                config.out.join("sweep.csv").display()
            );
            Ok(())
        }
        Command::Train(args) => {
            let mut settings = TrainSettings::new(args.image, args.out);
            settings.patch = parse_patch(&args.patch)?;
            settings.atoms = args.atoms;
            settings.sweeps = args.sweeps;
            settings.seed = args.seed;
            settings.l1_weight = args.l1;
            settings.penalty = args.rho;
            settings.stride = args.stride.as_deref().map(parse_patch).transpose()?;
            let dict = harness::train_dictionary(&settings)?;
            println!(
                "{} atoms of {}x{} -> {}",
                dict.atom_count(),
                dict.patch_rows(),
                dict.patch_cols(),
                settings.out.display()
            );
            Ok(())
        }
        Command::Phantom(args) => {
            harness::write_phantom(args.size, &args.out)?;
            println!(
                "{}x{} phantom -> {}",
                args.size,
                args.size,
                args.out.display()
            );
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = execute(cli) {
        eprintln!("error: {error}");
        process::exit(error.exit_code());
    }
}
