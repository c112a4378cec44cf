//! Final-quality metrics shared by single runs and sweeps.

use thiserror::Error;

use crate::linop::{LinearOperator, OpError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("relative residual is undefined for zero observations")]
    ZeroObservations,
    #[error("relative error is undefined for a zero ground truth")]
    ZeroTruth,
    #[error("relative sparsity is undefined for an all-zero ground truth")]
    ZeroTruthSupport,
    #[error(transparent)]
    Op(#[from] OpError),
}

/// The three final metrics of a run. Lower is better for all of them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    /// `||A x - b|| / ||b||` on the unaugmented system.
    pub rel_residual: f64,
    /// `||y_true - G x|| / ||y_true||`.
    pub rel_error: f64,
    /// `nnz(x) / nnz(y_true)`; below 1 means the coefficients are
    /// cheaper to store than the image they reproduce.
    pub rel_sparsity: f64,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn nnz(v: &[f64]) -> usize {
    v.iter().filter(|&&x| x != 0.0).count()
}

/// `||A x - b|| / ||b||`.
pub fn rel_residual(a: &LinearOperator, x: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    let b_norm = l2(b);
    if b_norm == 0.0 {
        return Err(MetricsError::ZeroObservations);
    }
    let ax = a.apply(x)?;
    let misfit = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok(misfit / b_norm)
}

/// `||y_true - G x|| / ||y_true||` where `G` synthesizes the image from
/// the coefficients.
pub fn rel_error(
    y_true: &[f64],
    synthesis: &LinearOperator,
    x: &[f64],
) -> Result<f64, MetricsError> {
    let truth_norm = l2(y_true);
    if truth_norm == 0.0 {
        return Err(MetricsError::ZeroTruth);
    }
    let gx = synthesis.apply(x)?;
    let misfit = gx
        .iter()
        .zip(y_true)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt();
    Ok(misfit / truth_norm)
}

/// `nnz(x) / nnz(y_true)`, both counted with an exact-zero test.
pub fn rel_sparsity(x: &[f64], y_true: &[f64]) -> Result<f64, MetricsError> {
    let truth_nnz = nnz(y_true);
    if truth_nnz == 0 {
        return Err(MetricsError::ZeroTruthSupport);
    }
    Ok(nnz(x) as f64 / truth_nnz as f64)
}
