//! Sparse support recovery with high-SNR consistent tuning.
//!
//! Solvers for the l0 penalty, the l1 penalty (LASSO), the l1 error
//! constraint, the orthonormal Dantzig selector and OMP; fixed and
//! noise-adaptive tuning rules; matrix qualifiers (coherence, ERC, spark);
//! analytic error bounds; and a deterministic Monte Carlo harness for
//! probability-of-error curves.

#[cfg(test)]
#[macro_use]
mod test_macros;

pub mod bounds;
pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod qualifiers;
pub mod solvers;
pub mod textio;
pub mod tuning;

pub use error::{Error, Result};
pub use linalg::{DesignMatrix, GramDiagnostics, SupportSet};
pub use solvers::{Algorithm, RecoveryResult};
pub use tuning::{Adaptation, Criterion, Target, TuningRule};
