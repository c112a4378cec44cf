//! Solvers for linear inverse problems whose solutions must be non-negative
//! and sparse, written matrix-free so that large structured operators
//! (blur kernels, pixel masks, tomography projectors, multi-frame
//! downsamplers) never have to be materialized.
//!
//! The crate is layered bottom-up:
//!
//! * [`linop`]: sparse matrices, lazy operator algebra (Kronecker products,
//!   compositions, vertical stacks, selections) and constructors for the
//!   structured operators used by the experiment builders.
//! * [`solvers`]: three first-order descent methods for non-negative least
//!   squares. One keeps iterates positive through a multiplicative scaling
//!   of the gradient, one adds an l1 penalty applied through
//!   soft-thresholding, and one reparametrizes the unknowns through a
//!   smooth non-negative mapping with exact zeros.
//! * [`dictionary`]: non-overlapping patch extraction, the global patch
//!   dictionary synthesis operator, a seeded ADMM dictionary learner, and a
//!   small binary file format for trained dictionaries.
//! * [`problems`]: builders for deblurring, inpainting/completion,
//!   parallel-beam tomography and multi-frame superresolution instances,
//!   plus the phantom and noise models they share.
//! * [`harness`]: experiment configuration, metrics, per-iteration trace
//!   capture, and the parameter-sweep driver behind the CLI.

pub mod dictionary;
pub mod harness;
pub mod linop;
pub mod problems;
pub mod solvers;
