//! Numerical fractional calculus with respect to a monotone kernel function,
//! and verification tooling for free-terminal-time variational problems.
//!
//! The library is organized in layers:
//!
//! * [`special`] — scalar special functions (gamma, digamma, Mittag-Leffler).
//! * [`psi`], [`grid`], [`path`] — the kernel map ψ, quadrature grids and
//!   trajectory descriptions shared by every operator.
//! * [`ops`] — the ψ-fractional integrals and derivatives themselves,
//!   discretized by product integration that is exact for integrands
//!   piecewise linear in ψ-space.
//! * [`variational`] — residual evaluators for the first- and second-order
//!   optimality conditions (Euler–Lagrange, transversality, Legendre,
//!   isoperimetric, delay, high-order, optimal fractional order).
//! * [`solvers`] — bracketing root finders and a Nelder–Mead direct
//!   minimizer that turn those conditions into computed answers.
//! * [`expr`], [`probfile`], [`presets`] — a small expression language,
//!   a line-oriented problem-file format, and the bundled demo problems
//!   used by the `psifrac` CLI.

pub mod error;
pub mod expr;
pub mod grid;
pub mod lagrangian;
pub mod ops;
pub mod path;
pub mod presets;
pub mod probfile;
pub mod problem;
pub mod psi;
pub mod solvers;
pub mod special;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{GridScheme, QuadGrid};
pub use ops::Order;
pub use path::Path;
pub use psi::PsiMap;

/// Caps the worker pool used by the per-node parallel loops.
///
/// `0` selects one worker per available core. Calling this more than once,
/// or after any parallel work ran, has no effect; the first configuration
/// wins.
pub fn configure_threads(n: usize) {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if n > 0 {
        builder = builder.num_threads(n);
    }
    let _ = builder.build_global();
}
