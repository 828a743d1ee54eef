//! Engine lifecycle: compile once, connect a store, solve on demand and
//! report the new configuration as cell updates.

use std::time::Duration;

use crate::check::{check, CheckReport};
use crate::compiler::{self, BindOptions, GroundModel, GroundStats, Mode, ModelTemplate, Scope};
use crate::error::CompileError;
use crate::relstore::{Delta, Store, StoreError};
use crate::solver::{self, extract_core, Budget, CoreError, GroupId, Model, PresolveLog, PresolveOptions, SearchOptions, SearchStats, SolveOutcome};
use crate::value::Value;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("reconfiguration schema does not match: {0}")]
    Mismatch(String),
    #[error("no unsatisfiability to explain: the last solve found {0}")]
    NotUnsat(&'static str),
    #[error("core extraction failed: {0}")]
    Core(#[from] CoreError),
    #[error("checking the store failed: {0}")]
    Check(String),
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    pub rewrites: bool,
    /// Column ranking rows for eviction during escalation.
    pub priority_column: String,
    /// Search limit for each satisfiability test during core extraction.
    pub core_budget: Budget,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            rewrites: true,
            priority_column: "priority".to_string(),
            core_budget: Budget {
                nodes: Some(200_000),
                time: Some(Duration::from_secs(10)),
            },
        }
    }
}

/// Result of one solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub outcome: SolveOutcome,
    /// New value for every in-scope cell; empty unless a solution was found.
    pub deltas: Vec<Delta>,
    pub stats: SearchStats,
    pub model: GroundStats,
    pub presolve: PresolveLog,
    pub escalated: bool,
    /// (table, key) of rows whose placement was reset.
    pub evicted: Vec<(String, Value)>,
    /// (table, key) of rows left unset by a reconfiguration solve.
    pub unplaced: Vec<(String, Value)>,
    /// (table, key) of rows moved by a migration solve.
    pub moved: Vec<(String, Value)>,
    unsat_model: Option<Box<Model>>,
}

impl SolveReport {
    pub fn status(&self) -> &'static str {
        status_name(&self.outcome)
    }

    pub fn is_solution(&self) -> bool {
        matches!(self.outcome, SolveOutcome::Optimal { .. } | SolveOutcome::Feasible { .. })
    }

    pub fn objective(&self) -> Option<i64> {
        match &self.outcome {
            SolveOutcome::Optimal { objective, .. } | SolveOutcome::Feasible { objective, .. } => *objective,
            _ => None,
        }
    }

    /// The ground model of an unsatisfiable solve, before presolve.
    pub fn unsat_model(&self) -> Option<&Model> {
        self.unsat_model.as_deref()
    }

    pub fn stats_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nodes": self.stats.nodes,
            "failures": self.stats.failures,
            "propagations": self.stats.propagations,
            "presolve_rewrites": self.stats.presolve_rewrites,
            "vars": self.model.vars,
            "decision_vars": self.model.decision_vars,
            "constraints": self.model.constraints,
            "aux_vars": self.model.aux_vars,
            "objective": self.objective(),
            "status": self.status(),
            "escalated": self.escalated,
        })
    }
}

fn status_name(o: &SolveOutcome) -> &'static str {
    match o {
        SolveOutcome::Optimal { .. } => "optimal",
        SolveOutcome::Feasible { .. } => "feasible",
        SolveOutcome::Unsat { .. } => "unsat",
        SolveOutcome::Unknown { .. } => "unknown",
    }
}

/// The constraint rows behind an unsatisfiable solve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Explanation {
    /// `view[key, ...]` per core group.
    pub lines: Vec<String>,
    /// Group ids in the unsat model, parallel to `lines`.
    pub groups: Vec<GroupId>,
    pub minimal: bool,
}

impl std::fmt::Display for Explanation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        if !self.minimal {
            writeln!(f, "(core may not be minimal)")?;
        }
        Ok(())
    }
}

pub struct Engine {
    pub template: ModelTemplate,
    pub reconfig: ModelTemplate,
    pub options: EngineOptions,
    store: Store,
}

impl Engine {
    /// Compiles the primary schema and, optionally, a separate schema for
    /// escalation. Without one, escalation reuses the primary views.
    pub fn compile(schema: &str, reconfig: Option<&str>) -> Result<Engine, EngineError> {
        Engine::compile_with(schema, reconfig, EngineOptions::default())
    }

    pub fn compile_with(schema: &str, reconfig: Option<&str>, options: EngineOptions) -> Result<Engine, EngineError> {
        let template = compiler::synthesize(&compiler::parse_schema(schema)?)?;
        let reconfig = match reconfig {
            Some(src) => {
                let r = compiler::synthesize(&compiler::parse_schema(src)?)?;
                if r.schema.tables != template.schema.tables {
                    return Err(EngineError::Mismatch("table definitions differ from the primary schema".into()));
                }
                r
            }
            None => template.clone(),
        };
        let store = Store::for_schema(&template.schema)?;
        Ok(Engine {
            template,
            reconfig,
            options,
            store,
        })
    }

    /// Replaces the store. Its tables must match the schema.
    pub fn connect(&mut self, store: Store) -> Result<(), EngineError> {
        for t in &self.template.schema.tables {
            match store.relation(&t.name) {
                Some(r) if r.def == *t => {}
                _ => return Err(EngineError::Mismatch(format!("store table {} does not match the schema", t.name))),
            }
        }
        self.store = store;
        Ok(())
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut Store {
        &mut self.store
    }

    pub fn bind_options(&self, scope: Scope, mode: Mode) -> BindOptions {
        BindOptions {
            rewrites: self.options.rewrites,
            scope,
            mode,
        }
    }

    pub fn ground(&self, template: &ModelTemplate, options: &BindOptions) -> Result<GroundModel, EngineError> {
        Ok(compiler::bind(template, &self.store, options)?)
    }

    /// Grounds against the current store contents and searches.
    pub fn solve_once(&self, scope: Scope, budget: Budget) -> Result<SolveReport, EngineError> {
        let opts = self.bind_options(scope, Mode::Standard);
        self.solve_template(&self.template, &opts, budget)
    }

    /// Solves; when the primary model has no solution (or none was found
    /// within the budget), solves the reconfiguration model, which may leave
    /// pending rows unset and reset lower-priority rows.
    pub fn solve_or_escalate(&self, scope: Scope, budget: Budget) -> Result<SolveReport, EngineError> {
        let primary = self.solve_once(scope.clone(), budget)?;
        if primary.is_solution() {
            return Ok(primary);
        }
        let mode = Mode::Evict {
            priority: self.options.priority_column.clone(),
        };
        let opts = self.bind_options(scope, mode);
        let mut second = self.solve_template(&self.reconfig, &opts, budget)?;
        second.escalated = true;
        if !second.is_solution() && matches!(primary.outcome, SolveOutcome::Unsat { .. }) {
            let mut p = primary;
            p.escalated = true;
            return Ok(p);
        }
        Ok(second)
    }

    /// Lets every cell in `scope` change, moving at most `moves` of the
    /// currently set ones, maximising the soft views.
    pub fn rebalance(&self, scope: Scope, moves: u64, budget: Budget) -> Result<SolveReport, EngineError> {
        let opts = self.bind_options(scope, Mode::Migrate { budget: moves });
        self.solve_template(&self.reconfig, &opts, budget)
    }

    pub fn solve_template(&self, template: &ModelTemplate, opts: &BindOptions, budget: Budget) -> Result<SolveReport, EngineError> {
        let g = self.ground(template, opts)?;
        Ok(solve_ground(&g, budget))
    }

    /// Maps the unsatisfiable core of a failed solve back to view rows.
    pub fn explain_unsat(&self, report: &SolveReport) -> Result<Explanation, EngineError> {
        let model = match (&report.outcome, &report.unsat_model) {
            (SolveOutcome::Unsat { .. }, Some(m)) => m,
            (o, _) => return Err(EngineError::NotUnsat(status_name(o))),
        };
        let core = extract_core(model, self.options.core_budget)?;
        let lines = core.groups.iter().map(|&g| model.groups[g].to_string()).collect();
        Ok(Explanation {
            lines,
            groups: core.groups,
            minimal: core.minimal,
        })
    }

    /// Writes a report's deltas into the store.
    pub fn apply(&mut self, report: &SolveReport) -> Result<(), EngineError> {
        self.store.apply_deltas(&report.deltas)?;
        Ok(())
    }

    /// Re-evaluates every hard view of the primary schema on the store.
    pub fn check(&self) -> Result<CheckReport, EngineError> {
        check(&self.template, &self.store).map_err(EngineError::Check)
    }
}

/// Presolves and searches a ground model, hinting current values for
/// cells that already hold one.
pub fn solve_ground(g: &GroundModel, budget: Budget) -> SolveReport {
    let mut hints = vec![None; g.model.vars.len()];
    let mut interner = g.interner.clone();
    for c in &g.cells {
        if let Some(v) = interner.encode(&c.current) {
            hints[c.var] = Some(v);
        }
    }
    // Under eviction, settle higher-priority rows first so propagation
    // decides which lower-priority rows make room.
    let mut rank = Vec::new();
    if matches!(g.options.mode, Mode::Evict { .. }) {
        rank = vec![0; g.model.vars.len()];
        for c in &g.cells {
            rank[c.var] = -2 * c.priority - i64::from(c.current.is_unset());
        }
    }
    let opts = SearchOptions {
        hints,
        rank,
        ..SearchOptions::default()
    };
    let presolve = PresolveOptions {
        cliques: g.options.rewrites,
        ..PresolveOptions::default()
    };
    let (outcome, stats, log) = solver::solve(&g.model, budget, Some(presolve), &opts);
    let key = |c: &compiler::Cell| (c.table.clone(), c.row_key.clone());
    let (deltas, evicted, unplaced, moved) = match &outcome {
        SolveOutcome::Optimal { assignment, .. } | SolveOutcome::Feasible { assignment, .. } => (
            g.deltas(assignment),
            g.evicted(assignment).into_iter().map(key).collect(),
            g.unplaced(assignment).into_iter().map(key).collect(),
            g.moved(assignment).into_iter().map(key).collect(),
        ),
        _ => Default::default(),
    };
    let unsat_model = matches!(outcome, SolveOutcome::Unsat { .. }).then(|| Box::new(g.model.clone()));
    SolveReport {
        outcome,
        deltas,
        stats,
        model: g.stats(),
        presolve: log,
        escalated: false,
        evicted,
        unplaced,
        moved,
        unsat_model,
    }
}
