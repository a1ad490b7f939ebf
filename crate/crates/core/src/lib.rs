//! Generalized nonlinear opinion dynamics `ẋ = A(x)Ex` on signed digraphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`signed_graph`]: signed adjacency matrices, edge-list ingestion,
//!   Laplacian and structural predicates.
//! - [`spectral`]: dominant eigenstructure, Perron–Frobenius and
//!   eventual-positivity certificates, construction of the system matrix `E`.
//! - [`stability`]: diagonal scaling certificates `H(ΓE) ⪯ 0`,
//!   `rank H(ΓE) = rank E`, and the supporting semidefinite and rank checks.
//! - [`dynamics`]: susceptibility laws, the vector field, its Jacobian,
//!   fixed-step RK4 integration and the variational (flow-Jacobian) system.
//! - [`equilibria`]: index partitions, permuted block systems, boundary
//!   equilibria and the Lyapunov functions used in the convergence proofs.
//! - [`verify`]: theorem-clause prediction and the sampling harness that
//!   checks predicted limits numerically.
//!
//! Numerical defaults live in [`tolerances`].

pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod matrix;
pub mod signed_graph;
pub mod spectral;
pub mod stability;
pub mod tolerances;
pub mod verify;

pub use dynamics::{
    Clock, ConvergenceReport, IntegrateOptions, ScenarioKind, ScenarioSpec, Termination, Trajectory,
};
pub use equilibria::{BlockSystem, IndexPartition, LyapunovKind, LyapunovParams};
pub use error::{Error, Result};
pub use matrix::SignedMatrix;
pub use spectral::{Regime, SpectralCertificate, SystemMatrix};
pub use stability::{GammaMethod, StabilityCertificate};
pub use verify::{ExpectedLimit, TheoremClause, TheoremPrediction, VerificationReport};
