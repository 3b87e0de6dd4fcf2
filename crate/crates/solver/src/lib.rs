//! Linear and mixed-integer linear optimization for the hub toolchain.
//!
//! The crate is self-contained: it owns the instance representation
//! ([`Problem`]), a bounded-variable revised simplex method with sparse LU
//! factorization of the basis ([`solve_lp`]), a best-first branch-and-bound
//! search for integer variables ([`solve_milp`]), fixed-layout MPS reading and
//! writing for interchange with external solvers ([`mps`]), and a plain-text
//! solution-file format ([`solution`]).
//!
//! All entry points are deterministic: identical inputs produce identical
//! pivot sequences, identical solutions, and byte-identical serialized
//! artifacts.

mod branch;
pub mod enumerate;
mod external;
mod lu;
pub mod mps;
mod presolve;
mod problem;
mod simplex;
pub mod solution;

pub use branch::solve_milp;
pub use external::external_solve;
pub use problem::{
    audit, AuditReport, Constraint, Problem, Sense, SolveStatus, Solution, SolverConfig,
    SolverError, VarId, VarKind, Variable,
};
pub use simplex::solve_lp;
