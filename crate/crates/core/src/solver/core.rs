//! Unsatisfiable-core extraction over constraint groups.

use std::collections::BTreeSet;

use super::model::{GroupId, Model};
use super::search::{search_with, Budget, SearchOptions, SolveOutcome};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Core {
    /// Groups whose constraints together admit no solution.
    pub groups: Vec<GroupId>,
    /// True when removing any single group makes the rest satisfiable.
    pub minimal: bool,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("the model is satisfiable")]
    Satisfiable,
    #[error("could not establish unsatisfiability within the budget")]
    Undecided,
}

enum Verdict {
    Unsat,
    Sat,
    Unknown,
}

/// Constraints without a group are definitional and always kept.
fn restricted(model: &Model, keep: &BTreeSet<GroupId>) -> Model {
    let mut m = Model {
        vars: model.vars.clone(),
        constraints: Vec::new(),
        origins: Vec::new(),
        groups: model.groups.clone(),
        objective: None,
    };
    for (c, o) in model.constraints.iter().zip(&model.origins) {
        if o.group.is_none_or(|g| keep.contains(&g)) {
            m.constraints.push(c.clone());
            m.origins.push(o.clone());
        }
    }
    m
}

fn test(model: &Model, keep: &BTreeSet<GroupId>, budget: Budget) -> Verdict {
    let m = restricted(model, keep);
    let opts = SearchOptions {
        satisfy_only: true,
        ..SearchOptions::default()
    };
    match search_with(&m, budget, &opts).0 {
        SolveOutcome::Unsat { .. } => Verdict::Unsat,
        SolveOutcome::Optimal { .. } | SolveOutcome::Feasible { .. } => Verdict::Sat,
        SolveOutcome::Unknown { .. } => Verdict::Unknown,
    }
}

/// Deletion-based minimisation: each group is dropped in turn and stays
/// dropped when the remainder is still unsatisfiable. Tests that exhaust
/// `per_test` keep the group and mark the core non-minimal.
pub fn extract_core(model: &Model, per_test: Budget) -> Result<Core, CoreError> {
    let mut keep: BTreeSet<GroupId> = model.origins.iter().filter_map(|o| o.group).collect();
    match test(model, &keep, per_test) {
        Verdict::Unsat => {}
        Verdict::Sat => return Err(CoreError::Satisfiable),
        Verdict::Unknown => return Err(CoreError::Undecided),
    }
    let mut minimal = true;
    let all: Vec<GroupId> = keep.iter().copied().collect();
    for g in all {
        keep.remove(&g);
        match test(model, &keep, per_test) {
            Verdict::Unsat => {}
            Verdict::Sat => {
                keep.insert(g);
            }
            Verdict::Unknown => {
                keep.insert(g);
                minimal = false;
            }
        }
    }
    Ok(Core {
        groups: keep.into_iter().collect(),
        minimal,
    })
}
