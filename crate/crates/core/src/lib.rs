//! Package dependency resolution as pseudo-Boolean optimization.
//!
//! The crate is `no_std` (it needs `alloc`). It holds everything that is
//! pure computation: the package universe and its text format, Debian
//! version ordering, the PB encoder, the OPB instance format, the embedded
//! PB solver, the transaction planner and the synthetic scenario generator.
//! Process spawning, wall-clock deadlines and the CLI live in the `debpbo`
//! crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod encode;
pub mod opb;
pub mod pb;
pub mod plan;
pub mod scenario;
pub mod solver;
pub mod universe;
pub mod version;

pub use encode::{encode, EncodeError, Scope, VarMap, Weights};
pub use pb::{Assignment, Lit, PbConstraint, PbRelation, PboInstance, Term, Var};
pub use plan::{
    closure, decode, plan, Backend, ClosureMode, EmbeddedBackend, PlanError, PlanOptions,
    PlanStatus, TransactionPlan,
};
pub use solver::{optimize, solve_decision, Budget, ConflictLimit, SolveOutcome, SolveStatus, Solver, Unlimited};
pub use universe::{ConstraintRef, DependencyClause, PackageUnit, Relation, UnitId, Universe};
pub use version::Version;
