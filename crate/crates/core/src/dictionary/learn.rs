//! Dictionary learning via alternating least squares with an ADMM-style
//! split: unconstrained factors (U, V) are tied to a box-constrained
//! dictionary copy D and a non-negative sparse coefficient copy X through
//! scaled dual variables.

use nalgebra::{Cholesky, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DictError, Dictionary};

/// Settings for [`learn_dictionary_admm`].
#[derive(Clone, Debug)]
pub struct DictLearnConfig {
    /// Patch height; together with `patch_cols` this must match the row
    /// count of the training matrix.
    pub patch_rows: usize,
    pub patch_cols: usize,
    /// Number of atoms to learn.
    pub atoms: usize,
    /// Weight on the l1 penalty that sparsifies the coefficients.
    pub l1_weight: f64,
    /// ADMM penalty coupling the split variables; also the ridge shift
    /// that keeps the least-squares subproblems positive definite.
    pub penalty: f64,
    /// Alternating sweeps to run.
    pub sweeps: usize,
    /// Seed for the random initial factors.
    pub seed: u64,
}

impl DictLearnConfig {
    pub fn new(patch_rows: usize, patch_cols: usize, atoms: usize) -> Self {
        DictLearnConfig {
            patch_rows,
            patch_cols,
            atoms,
            l1_weight: 0.1,
            penalty: 1.0,
            sweeps: 200,
            seed: 0,
        }
    }

    fn validate(&self, train_rows: usize, train_cols: usize) -> Result<(), DictError> {
        let mut problems = Vec::new();
        if self.atoms < 1 {
            problems.push("atom count must be at least 1".to_string());
        }
        if !(self.l1_weight.is_finite() && self.l1_weight >= 0.0) {
            problems.push(format!(
                "l1 weight must be non-negative, got {}",
                self.l1_weight
            ));
        }
        if !(self.penalty.is_finite() && self.penalty > 0.0) {
            problems.push(format!("penalty must be positive, got {}", self.penalty));
        }
        if self.sweeps < 1 {
            problems.push("sweep count must be at least 1".to_string());
        }
        if self.patch_rows * self.patch_cols != train_rows {
            problems.push(format!(
                "{}x{} patches have {} entries but training columns have {}",
                self.patch_rows,
                self.patch_cols,
                self.patch_rows * self.patch_cols,
                train_rows
            ));
        }
        if train_cols == 0 {
            problems.push("training matrix has no columns".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(DictError::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Result of a learning run: the validated dictionary, the non-negative
/// sparse coefficients, and per-sweep diagnostics.
#[derive(Clone, Debug)]
pub struct LearnOutcome {
    pub dictionary: Dictionary,
    /// Split coefficient matrix X; exactly non-negative and sparse.
    pub coefficients: DMatrix<f64>,
    /// Frobenius data misfit of the unconstrained factors per sweep.
    pub fit_history: Vec<f64>,
    /// Frobenius gap between the free factor U and its constrained copy D
    /// per sweep.
    pub split_residual_dict: Vec<f64>,
    /// Frobenius gap between V and X per sweep.
    pub split_residual_coeffs: Vec<f64>,
}

impl LearnOutcome {
    /// Whether both split gaps ended below 1e-3, i.e. the constrained
    /// copies agree with the factors actually fitting the data.
    pub fn converged(&self) -> bool {
        let last_ok = |v: &[f64]| v.last().is_some_and(|&r| r < 1e-3);
        last_ok(&self.split_residual_dict) && last_ok(&self.split_residual_coeffs)
    }
}

/// Learns a patch dictionary `D` and non-negative sparse coefficients `X`
/// with `train ~ D X` by alternating ridge-regularized least-squares
/// updates of free factors with projections onto the constraint sets.
///
/// Per sweep: U and V solve their penalized least-squares subproblems
/// against the current constrained copies, D clips `U + dual` into the
/// unit box, X shrinks `V + dual` towards zero and clamps at zero, and
/// both duals accumulate the remaining split gaps. Atoms that end up
/// numerically zero are replaced by uniform patches so the dictionary
/// invariants always hold.
pub fn learn_dictionary_admm(
    train: &DMatrix<f64>,
    config: &DictLearnConfig,
) -> Result<LearnOutcome, DictError> {
    config.validate(train.nrows(), train.ncols())?;
    if train.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) {
        return Err(DictError::TrainRange);
    }

    let pq = train.nrows();
    let n_train = train.ncols();
    let s = config.atoms;
    let rho = config.penalty;
    let shrink = config.l1_weight / rho;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut u = DMatrix::from_iterator(pq, s, (0..pq * s).map(|_| rng.gen::<f64>()));
    let mut d = u.clone();
    let mut v = DMatrix::zeros(s, n_train);
    let mut x = DMatrix::zeros(s, n_train);
    let mut dual_d = DMatrix::zeros(pq, s);
    let mut dual_x = DMatrix::zeros(s, n_train);

    let mut fit_history = Vec::with_capacity(config.sweeps);
    let mut split_residual_dict = Vec::with_capacity(config.sweeps);
    let mut split_residual_coeffs = Vec::with_capacity(config.sweeps);

    let ridge = DMatrix::identity(s, s) * rho;
    for _ in 0..config.sweeps {
        // U-update: (V V^T + rho I) U^T = (Y V^T + rho (D - dual_d))^T.
        let gram_v = &v * v.transpose() + &ridge;
        let rhs_u = train * v.transpose() + (&d - &dual_d) * rho;
        let chol = Cholesky::new(gram_v).ok_or(DictError::SubproblemFactorization)?;
        u = chol.solve(&rhs_u.transpose()).transpose();

        // V-update: (U^T U + rho I) V = U^T Y + rho (X - dual_x).
        let gram_u = u.transpose() * &u + &ridge;
        let rhs_v = u.transpose() * train + (&x - &dual_x) * rho;
        let chol = Cholesky::new(gram_u).ok_or(DictError::SubproblemFactorization)?;
        v = chol.solve(&rhs_v);

        d = (&u + &dual_d).map(|t| t.clamp(0.0, 1.0));
        // max(0, soft_threshold(t, g)) collapses to max(0, t - g).
        x = (&v + &dual_x).map(|t| (t - shrink).max(0.0));

        dual_d += &u - &d;
        dual_x += &v - &x;

        fit_history.push((train - &u * &v).norm());
        split_residual_dict.push((&u - &d).norm());
        split_residual_coeffs.push((&v - &x).norm());
    }

    revive_dead_atoms(&mut d);
    let dictionary = Dictionary::new(config.patch_rows, config.patch_cols, d)?;
    Ok(LearnOutcome {
        dictionary,
        coefficients: x,
        fit_history,
        split_residual_dict,
        split_residual_coeffs,
    })
}

/// Replaces columns with no entry above 1e-12 by uniform patches of value
/// `1 / rows`, so a learned matrix always satisfies the no-zero-atom
/// invariant.
fn revive_dead_atoms(atoms: &mut DMatrix<f64>) {
    let fill = 1.0 / atoms.nrows() as f64;
    for mut col in atoms.column_iter_mut() {
        if col.iter().all(|v| v.abs() < 1e-12) {
            col.fill(fill);
        }
    }
}
