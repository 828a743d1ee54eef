//! Depth-first branch-and-bound search over the propagation engine.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::domain::Domain;
use super::model::{Model, VarId, VarKind};
use super::propagate::Engine;

/// Search limits. A limit of zero means no search at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub nodes: Option<u64>,
    pub time: Option<Duration>,
}

impl Budget {
    pub fn nodes(n: u64) -> Budget {
        Budget {
            nodes: Some(n),
            time: None,
        }
    }

    pub fn time(d: Duration) -> Budget {
        Budget {
            nodes: None,
            time: Some(d),
        }
    }

    pub fn unlimited() -> Budget {
        Budget { nodes: None, time: None }
    }

    pub fn is_zero(&self) -> bool {
        self.nodes == Some(0) || self.time == Some(Duration::ZERO)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub failures: u64,
    pub propagations: u64,
    pub presolve_rewrites: u64,
    #[serde(skip)]
    pub wall_time: Duration,
    pub wall_time_ms: u64,
    /// Objective of each successive incumbent.
    pub incumbents: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Optimal {
        assignment: Vec<i64>,
        objective: Option<i64>,
    },
    Feasible {
        assignment: Vec<i64>,
        objective: Option<i64>,
        timeout: bool,
    },
    /// `core` holds constraint ids; `minimal` tells whether it was minimised.
    Unsat { core: Vec<usize>, minimal: bool },
    Unknown { timeout: bool },
}

impl SolveOutcome {
    pub fn assignment(&self) -> Option<&[i64]> {
        match self {
            SolveOutcome::Optimal { assignment, .. } | SolveOutcome::Feasible { assignment, .. } => Some(assignment),
            _ => None,
        }
    }

    pub fn objective(&self) -> Option<i64> {
        match self {
            SolveOutcome::Optimal { objective, .. } | SolveOutcome::Feasible { objective, .. } => *objective,
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            SolveOutcome::Optimal { .. } => "optimal",
            SolveOutcome::Feasible { .. } => "feasible",
            SolveOutcome::Unsat { .. } => "unsat",
            SolveOutcome::Unknown { .. } => "unknown",
        }
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveOutcome::Unsat { .. })
    }
}

#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    /// Preferred value per variable, tried before ascending order.
    pub hints: Vec<Option<i64>>,
    /// Stop at the first solution even when an objective is present.
    pub satisfy_only: bool,
    /// Branching rank per variable; lower ranks are decided first, then
    /// smallest domain. Missing entries rank 0.
    pub rank: Vec<i64>,
}

pub fn search(model: &Model, budget: Budget) -> (SolveOutcome, SearchStats) {
    search_with(model, budget, &SearchOptions::default())
}

struct Frame {
    mark: usize,
    var: VarId,
    val: i64,
    right_done: bool,
}

/// Node and time limits counted from the start of the whole solve.
#[derive(Clone, Copy)]
struct Limits {
    nodes: Option<u64>,
    deadline: Option<Instant>,
}

impl Limits {
    fn hit(&self, stats: &SearchStats) -> bool {
        if self.nodes.is_some_and(|n| stats.nodes >= n) {
            return true;
        }
        stats.nodes % 64 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn hit_now(&self, stats: &SearchStats) -> bool {
        self.nodes.is_some_and(|n| stats.nodes >= n) || self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn tighter(self, nodes: u64, deadline: Option<Instant>) -> Limits {
        Limits {
            nodes: Some(self.nodes.map_or(nodes, |n| n.min(nodes))),
            deadline: match (self.deadline, deadline) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }
}

enum Dfs {
    /// Tree exhausted; the best leaf, if any.
    Complete(Option<(Vec<i64>, Option<i64>)>),
    Stopped(Option<(Vec<i64>, Option<i64>)>),
    /// Root propagation failed on this constraint.
    RootFailure(usize),
}

/// Branch-and-bound with first-fail variable order and hinted values.
/// Under a finite budget the deterministic pass gets a quarter of it, but
/// at least enough nodes to reach two leaves. If
/// that finds nothing, randomized restarts follow; once there is an
/// incumbent and an objective, the rest goes to large neighbourhood search.
pub fn search_with(model: &Model, budget: Budget, opts: &SearchOptions) -> (SolveOutcome, SearchStats) {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let mut propagations = 0;
    let finish = |mut stats: SearchStats, outcome: SolveOutcome, propagations: u64| {
        stats.propagations = propagations;
        stats.wall_time = start.elapsed();
        stats.wall_time_ms = stats.wall_time.as_millis() as u64;
        (outcome, stats)
    };
    if budget.is_zero() {
        return finish(stats, SolveOutcome::Unknown { timeout: true }, 0);
    }
    if model.vars.iter().any(|v| v.domain.is_empty()) {
        let unsat = SolveOutcome::Unsat {
            core: Vec::new(),
            minimal: false,
        };
        return finish(stats, unsat, 0);
    }
    let limits = Limits {
        nodes: budget.nodes,
        deadline: budget.time.map(|t| start + t),
    };
    let objective = if opts.satisfy_only { None } else { model.objective };
    let first = if budget.nodes.is_none() && budget.time.is_none() {
        limits
    } else {
        let descend = 2 * model.vars.iter().filter(|v| v.kind == VarKind::Decision).count() as u64 + 64;
        limits.tighter(budget.nodes.map_or(u64::MAX, |n| (n / 4).max(descend)), budget.time.map(|t| start + t / 4))
    };
    let (mut result, p) = dfs(model, first, opts, objective, None, &mut stats);
    propagations += p;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut round = 1;
    while matches!(result, Dfs::Stopped(None)) && !limits.hit_now(&stats) {
        let l = limits.tighter(stats.nodes + 64 * luby(round), None);
        let (r, p) = dfs(model, l, opts, objective, Some(&mut rng), &mut stats);
        propagations += p;
        round += 1;
        result = r;
    }
    let mut proved = false;
    if let (Dfs::Stopped(Some((a, Some(z)))), Some(o)) = (&result, objective) {
        if !limits.hit_now(&stats) {
            let (a, z, done, p) = improve(model, o, a.clone(), *z, limits, opts, &mut rng, &mut stats);
            propagations += p;
            proved = done;
            result = Dfs::Stopped(Some((a, Some(z))));
        }
    }
    let outcome = match result {
        Dfs::RootFailure(c) => {
            stats.failures += 1;
            SolveOutcome::Unsat {
                core: vec![c],
                minimal: false,
            }
        }
        Dfs::Complete(Some((assignment, objective))) => SolveOutcome::Optimal { assignment, objective },
        Dfs::Stopped(Some((assignment, objective))) if proved => SolveOutcome::Optimal { assignment, objective },
        Dfs::Complete(None) => SolveOutcome::Unsat {
            core: Vec::new(),
            minimal: false,
        },
        Dfs::Stopped(Some((assignment, objective))) => SolveOutcome::Feasible {
            assignment,
            objective,
            timeout: true,
        },
        Dfs::Stopped(None) => SolveOutcome::Unknown { timeout: true },
    };
    finish(stats, outcome, propagations)
}

/// 1, 1, 2, 1, 1, 2, 4, ...
fn luby(mut i: u64) -> u64 {
    loop {
        let mut k = 1;
        while (1u64 << k) - 1 < i {
            k += 1;
        }
        if (1u64 << k) - 1 == i {
            return 1 << (k - 1);
        }
        i -= (1u64 << (k - 1)) - 1;
    }
}

/// Large neighbourhood search: frees a random subset of the decision
/// variables, fixes the others to the incumbent and searches for a strictly
/// better objective. The subset grows when a neighbourhood is exhausted
/// without improvement and shrinks when its search hits the node limit.
fn improve(
    model: &Model,
    objective: VarId,
    mut best: Vec<i64>,
    mut z: i64,
    limits: Limits,
    opts: &SearchOptions,
    rng: &mut ChaCha8Rng,
    stats: &mut SearchStats,
) -> (Vec<i64>, i64, bool, u64) {
    const SUB_NODES: u64 = 2_000;
    let decision: Vec<VarId> = (0..model.vars.len())
        .filter(|&v| model.vars[v].kind == VarKind::Decision && model.vars[v].domain.size() > 1)
        .collect();
    let mut propagations = 0;
    let mut proved = false;
    let mut k = (decision.len() / 8).clamp(1, decision.len().max(1));
    let mut stale = 0;
    while !decision.is_empty() && !limits.hit_now(stats) && stale < 200 {
        let mut sub = model.clone();
        let freed = sample(rng, decision.len(), k.min(decision.len()));
        let mut free = vec![false; decision.len()];
        for i in freed.iter() {
            free[i] = true;
        }
        for (i, &v) in decision.iter().enumerate() {
            if !free[i] {
                sub.vars[v].domain = Domain::singleton(best[v]);
            }
        }
        let dom = &sub.vars[objective].domain;
        sub.vars[objective].domain = dom.with_min(z.saturating_add(1));
        if sub.vars[objective].domain.is_empty() {
            proved = true;
            break;
        }
        let mut hints = opts.hints.clone();
        hints.resize(model.vars.len(), None);
        for &v in &decision {
            hints[v] = Some(best[v]);
        }
        let sub_opts = SearchOptions {
            hints,
            satisfy_only: false,
            rank: opts.rank.clone(),
        };
        let sub_limits = limits.tighter(stats.nodes + SUB_NODES, None);
        let (r, p) = dfs(&sub, sub_limits, &sub_opts, Some(objective), None, stats);
        propagations += p;
        match r {
            Dfs::Complete(Some((a, Some(nz)))) | Dfs::Stopped(Some((a, Some(nz)))) if nz > z => {
                best = a;
                z = nz;
                stale = 0;
            }
            Dfs::Complete(_) | Dfs::RootFailure(_) => {
                stale += 1;
                if k == decision.len() {
                    // The whole problem was searched to completion.
                    proved = true;
                    break;
                }
                k = (k + 1 + k / 4).min(decision.len());
            }
            Dfs::Stopped(_) => {
                stale += 1;
                k = (k - k / 4).max(1);
                if rng.random_bool(0.5) && k > 1 {
                    k -= 1;
                }
            }
        }
    }
    (best, z, proved, propagations)
}

fn dfs(
    model: &Model,
    limits: Limits,
    opts: &SearchOptions,
    objective: Option<VarId>,
    mut rng: Option<&mut ChaCha8Rng>,
    stats: &mut SearchStats,
) -> (Dfs, u64) {
    let mut engine = Engine::new(model);
    if let Err(c) = engine.propagate() {
        return (Dfs::RootFailure(c), engine.propagations);
    }
    let order: Vec<VarId> = {
        let mut decision: Vec<VarId> = (0..model.vars.len())
            .filter(|&v| model.vars[v].kind == VarKind::Decision)
            .collect();
        let rest: Vec<VarId> = (0..model.vars.len())
            .filter(|&v| model.vars[v].kind != VarKind::Decision)
            .collect();
        decision.extend(rest);
        decision
    };
    let n_decision = order.iter().filter(|&&v| model.vars[v].kind == VarKind::Decision).count();
    let mut best: Option<(Vec<i64>, Option<i64>)> = None;
    let mut bound: Option<i64> = None;
    let mut stack: Vec<Frame> = Vec::new();
    let mut timed_out = false;

    'search: loop {
        // Descend until a leaf or a failure.
        let failed = loop {
            if limits.hit(stats) {
                timed_out = true;
                break 'search;
            }
            match select(&engine, &order, n_decision, &opts.rank) {
                None => {
                    let assignment: Vec<i64> = engine.doms.iter().map(|d| d.lb()).collect();
                    let obj = objective.map(|o| assignment[o]);
                    if let Some(z) = obj {
                        stats.incumbents.push(z);
                        bound = Some(z.saturating_add(1));
                    }
                    best = Some((assignment, obj));
                    if objective.is_none() {
                        break 'search;
                    }
                    break true;
                }
                Some(var) => {
                    let val = pick_value(&engine, var, opts, rng.as_deref_mut());
                    stats.nodes += 1;
                    let mark = engine.checkpoint();
                    stack.push(Frame {
                        mark,
                        var,
                        val,
                        right_done: false,
                    });
                    let ok = engine.fix(var, val).is_ok() && engine.propagate().is_ok();
                    if !ok {
                        stats.failures += 1;
                        break true;
                    }
                }
            }
        };
        debug_assert!(failed);
        // Backtrack to the most recent frame with an untried right branch.
        loop {
            let Some(frame) = stack.last_mut() else {
                break 'search;
            };
            engine.restore(frame.mark);
            if frame.right_done {
                stack.pop();
                continue;
            }
            frame.right_done = true;
            let (var, val) = (frame.var, frame.val);
            stats.nodes += 1;
            let ok = engine.remove(var, val).is_ok()
                && apply_bound(&mut engine, objective, bound)
                && engine.propagate().is_ok();
            if ok {
                break;
            }
            stats.failures += 1;
            if limits.hit(stats) {
                timed_out = true;
                break 'search;
            }
        }
    }
    let p = engine.propagations;
    if timed_out {
        (Dfs::Stopped(best), p)
    } else {
        (Dfs::Complete(best), p)
    }
}

fn apply_bound(engine: &mut Engine, objective: Option<VarId>, bound: Option<i64>) -> bool {
    match (objective, bound) {
        (Some(o), Some(b)) => engine.set_min(o, b).is_ok(),
        _ => true,
    }
}

/// Lowest rank, then smallest domain, ties to the lowest id; decision
/// variables before all others.
fn select(engine: &Engine, order: &[VarId], n_decision: usize, rank: &[i64]) -> Option<VarId> {
    for part in [&order[..n_decision], &order[n_decision..]] {
        let mut best: Option<(i64, u64, VarId)> = None;
        for &v in part {
            let size = engine.doms[v].size();
            if size <= 1 {
                continue;
            }
            let key = (rank.get(v).copied().unwrap_or(0), size, v);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        if let Some((_, _, v)) = best {
            return Some(v);
        }
    }
    None
}

/// The hint if still possible, else the smallest value. With a random
/// source, the hint is taken half the time and otherwise a uniform value.
fn pick_value(engine: &Engine, var: VarId, opts: &SearchOptions, rng: Option<&mut ChaCha8Rng>) -> i64 {
    let dom = &engine.doms[var];
    let hint = opts.hints.get(var).copied().flatten().filter(|h| dom.contains(*h));
    match rng {
        Some(rng) => match hint {
            Some(h) if rng.random_bool(0.5) => h,
            _ => dom.nth(rng.random_range(0..dom.size())).unwrap_or(dom.lb()),
        },
        None => hint.unwrap_or(dom.lb()),
    }
}
