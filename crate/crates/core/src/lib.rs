//! Goal-oriented adaptive finite elements for linear elliptic problems in 2D.
//!
//! The crate couples newest-vertex-bisection mesh refinement, lowest-order
//! Lagrange assembly, residual error estimators for a primal and a dual
//! problem, product-type Dörfler marking and contractive Krylov solvers into
//! a single adaptive loop ([`driver::run`]) that approximates a linear goal
//! functional `G(u)` and accounts for the total work spent on every solver
//! step.
//!
//! Module map:
//!
//! * [`mesh`]: conforming triangulations, NVB refinement, conformity checks
//!   and the plain-text mesh format.
//! * [`assembly`]: P1 stiffness operator, loads, goal evaluation, energy norm,
//!   prolongation and the sparse direct solve used for diagnostics.
//! * [`solver`]: CG / Jacobi-PCG / multilevel additive Schwarz PCG.
//! * [`estimator`]: weighted residual indicators for primal and dual problem.
//! * [`marking`]: the three product marking strategies.
//! * [`driver`]: the adaptive loop, stopping rules, work ledger, rates.
//! * [`bench`]: the two benchmark problems.
//! * [`cli`]: argument parsing, CSV and plot-script output.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bench;
pub mod cli;
pub mod driver;
pub mod estimator;
pub mod marking;
pub mod mesh;
pub mod quadrature;
pub mod solver;

pub use assembly::{DofMap, FemVector, SparseSymmetricOperator};
pub use driver::{run, AdaptiveConfig, History, StepRecord, StoppingMode};
pub use estimator::Indicators;
pub use marking::{MarkingConfig, MarkingStrategy};
pub use mesh::{BoundaryKind, Mesh, Point, Triangle};
pub use solver::SolverKind;
