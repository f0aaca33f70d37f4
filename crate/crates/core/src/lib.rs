//! Robust stability of linear systems with polynomial dependence on
//! parameters in the unit simplex.
//!
//! The pipeline is: homogenize `A(α)` ([`polymatrix`]), build the Polya
//! coefficient tables ([`polya`]), assemble a block-diagonal semidefinite
//! program ([`sdp_assembly`]) and solve it with a structure-preserving
//! predictor-corrector interior-point method ([`sdp_solver`]), optionally
//! spread over worker threads ([`parallel_runtime`]).

pub mod error;
pub mod monomial;
pub mod parallel_runtime;
pub mod polya;
pub mod polymatrix;
pub mod sdp_assembly;
pub mod sdp_solver;

pub use error::{Error, Result};
pub use monomial::{cardinality, enumerate, lex_index, Exponent, MonomialBasis};
pub use polya::PolyaConfig;
pub use polymatrix::{homogenize, lyapunov_residual, MatrixPolynomial, Term};
pub use sdp_assembly::{BlockPartition, SdpProblem, SymBasis};
pub use sdp_solver::{BlockDiagMatrix, SolverOptions, SolverResult, SolverStatus};
