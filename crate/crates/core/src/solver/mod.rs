//! Finite-domain constraint solver: domains, models, propagation,
//! branch-and-bound search, presolve and unsatisfiable cores.

pub mod alldiff;
pub mod core;
pub mod domain;
pub mod model;
pub mod presolve;
pub mod propagate;
pub mod search;

pub use self::core::{extract_core, Core, CoreError};
pub use domain::Domain;
pub use model::{Atom, Constraint, Group, GroupId, LinOp, Linear, Lit, Model, Origin, VarId, VarInfo, VarKind};
pub use presolve::{presolve, PresolveLog, PresolveOptions};
pub use search::{search, search_with, Budget, SearchOptions, SearchStats, SolveOutcome};

/// Presolves, then searches. Assignments refer to the variables of the
/// input model; constraint ids in an unsat outcome refer to the presolved one.
pub fn solve(
    model: &Model,
    budget: Budget,
    presolve_opts: Option<PresolveOptions>,
    opts: &SearchOptions,
) -> (SolveOutcome, SearchStats, PresolveLog) {
    let (m, log) = match presolve_opts {
        Some(p) => presolve(model, p),
        None => (model.clone(), PresolveLog::default()),
    };
    let (outcome, mut stats) = search_with(&m, budget, opts);
    stats.presolve_rewrites = log.count();
    (outcome, stats, log)
}
