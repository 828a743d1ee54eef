//! Model rewriting before search: unary constraints folded into domains,
//! fixed variables substituted into linear constraints, and cliques of
//! pairwise disequalities replaced by all-different.

use std::collections::{BTreeSet, HashMap};

use super::domain::Domain;
use super::model::{Constraint, LinOp, Linear, Model, Origin, VarId};

#[derive(Clone, Debug, Default)]
pub struct PresolveLog {
    pub rewrites: Vec<String>,
}

impl PresolveLog {
    pub fn count(&self) -> u64 {
        self.rewrites.len() as u64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PresolveOptions {
    /// Replace cliques of pairwise `≠` by all-different.
    pub cliques: bool,
    /// Smallest clique worth replacing.
    pub min_clique: usize,
}

impl Default for PresolveOptions {
    fn default() -> Self {
        PresolveOptions {
            cliques: true,
            min_clique: 3,
        }
    }
}

pub fn presolve(model: &Model, opts: PresolveOptions) -> (Model, PresolveLog) {
    let mut log = PresolveLog::default();
    let mut out = model.clone();
    for _ in 0..4 {
        if !fold_pass(&mut out, &mut log) {
            break;
        }
    }
    if opts.cliques {
        cliques(&mut out, opts.min_clique, &mut log);
    }
    (out, log)
}

/// One pass of substitution and unary folding. Returns whether anything
/// changed.
fn fold_pass(m: &mut Model, log: &mut PresolveLog) -> bool {
    let mut changed = false;
    let mut kept: Vec<Constraint> = Vec::with_capacity(m.constraints.len());
    let mut origins: Vec<Origin> = Vec::with_capacity(m.constraints.len());
    let constraints = std::mem::take(&mut m.constraints);
    let old_origins = std::mem::take(&mut m.origins);
    for (c, o) in constraints.into_iter().zip(old_origins) {
        match c {
            Constraint::Linear(l) => {
                let mut rhs = l.rhs as i128;
                let mut terms = Vec::with_capacity(l.terms.len());
                for &(a, x) in &l.terms {
                    match m.vars[x].domain.fixed() {
                        Some(v) => rhs -= a as i128 * v as i128,
                        None => terms.push((a, x)),
                    }
                }
                let substituted = terms.len() != l.terms.len();
                let rhs64 = match i64::try_from(rhs) {
                    Ok(r) => r,
                    Err(_) => {
                        kept.push(Constraint::Linear(l));
                        origins.push(o);
                        continue;
                    }
                };
                match terms.as_slice() {
                    [] => {
                        changed = true;
                        if l.op.holds(0, rhs) {
                            log.rewrites.push(format!("dropped satisfied constraint from {}", o.view));
                        } else {
                            log.rewrites.push(format!("constraint from {} is violated by fixed values", o.view));
                            kept.push(Constraint::Clause(Vec::new()));
                            origins.push(o);
                        }
                    }
                    [(a, x)] => {
                        changed = true;
                        let d = &m.vars[*x].domain;
                        let nd = unary(d, *a, l.op, rhs64);
                        log.rewrites.push(format!("folded unary constraint into domain of {}", m.vars[*x].name));
                        if nd.is_empty() {
                            kept.push(Constraint::Clause(Vec::new()));
                            origins.push(o);
                        } else {
                            m.vars[*x].domain = nd;
                        }
                    }
                    _ => {
                        if substituted {
                            changed = true;
                            log.rewrites.push(format!("substituted fixed variables in constraint from {}", o.view));
                        }
                        kept.push(Constraint::Linear(Linear::new(terms, l.op, rhs64)));
                        origins.push(o);
                    }
                }
            }
            Constraint::Membership { x, set, negated } => {
                changed = true;
                let d = &m.vars[x].domain;
                let nd = if negated { d.subtract(&set) } else { d.intersect(&set) };
                log.rewrites.push(format!("folded membership into domain of {}", m.vars[x].name));
                if nd.is_empty() {
                    kept.push(Constraint::Clause(Vec::new()));
                    origins.push(o);
                } else {
                    m.vars[x].domain = nd;
                }
            }
            other => {
                kept.push(other);
                origins.push(o);
            }
        }
    }
    m.constraints = kept;
    m.origins = origins;
    changed
}

/// Values of `x` in `d` with `a·x op rhs`.
fn unary(d: &Domain, a: i64, op: LinOp, rhs: i64) -> Domain {
    let a = a as i128;
    let r = rhs as i128;
    match op {
        LinOp::Eq | LinOp::Ne => {
            let exact = r % a == 0;
            let v = i64::try_from(r / a).ok();
            match (op, exact, v) {
                (LinOp::Eq, true, Some(v)) => d.intersect(&Domain::singleton(v)),
                (LinOp::Eq, _, _) => Domain::empty(),
                (_, true, Some(v)) => d.remove(v),
                _ => d.clone(),
            }
        }
        LinOp::Le | LinOp::Ge => {
            // a·x ≤ r  or  a·x ≥ r
            let le = op == LinOp::Le;
            let upper = (a > 0) == le;
            let q = if upper { div_floor(r, a) } else { div_ceil(r, a) };
            let q = q.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
            if upper {
                d.with_max(q)
            } else {
                d.with_min(q)
            }
        }
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if a % b != 0 && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    let q = a / b;
    if a % b != 0 && ((a < 0) == (b < 0)) {
        q + 1
    } else {
        q
    }
}

/// Pairwise `x - y ≠ 0` constraint as an unordered pair.
fn ne_pair(c: &Constraint) -> Option<(VarId, VarId)> {
    match c {
        Constraint::Linear(Linear {
            terms,
            op: LinOp::Ne,
            rhs: 0,
        }) => match terms.as_slice() {
            [(a, x), (b, y)] if *a == -*b && a.abs() == 1 && x != y => Some((*x.min(y), *x.max(y))),
            _ => None,
        },
        _ => None,
    }
}

/// Greedy clique cover of the disequality graph.
fn cliques(m: &mut Model, min_size: usize, log: &mut PresolveLog) {
    let mut edges: HashMap<(VarId, VarId), Vec<usize>> = HashMap::new();
    for (i, c) in m.constraints.iter().enumerate() {
        if let Some(p) = ne_pair(c) {
            edges.entry(p).or_default().push(i);
        }
    }
    if edges.len() < 3 {
        return;
    }
    let mut adj: HashMap<VarId, BTreeSet<VarId>> = HashMap::new();
    for &(x, y) in edges.keys() {
        adj.entry(x).or_default().insert(y);
        adj.entry(y).or_default().insert(x);
    }
    let mut uncovered: BTreeSet<(VarId, VarId)> = edges.keys().copied().collect();
    let mut removed = vec![false; m.constraints.len()];
    let mut added: Vec<(Constraint, Origin)> = Vec::new();
    let mut vertices: Vec<VarId> = adj.keys().copied().collect();
    vertices.sort_by_key(|v| (std::cmp::Reverse(adj[v].len()), *v));
    for &v in &vertices {
        loop {
            // Grow a clique from v using only its uncovered edges as seeds.
            let seeds: Vec<VarId> = adj[&v]
                .iter()
                .copied()
                .filter(|&u| uncovered.contains(&(v.min(u), v.max(u))))
                .collect();
            if seeds.len() + 1 < min_size {
                break;
            }
            let mut clique = vec![v];
            let mut cands = seeds;
            cands.sort_by_key(|u| (std::cmp::Reverse(adj[u].len()), *u));
            for u in cands {
                if clique.iter().all(|w| adj[&u].contains(w)) {
                    clique.push(u);
                }
            }
            if clique.len() < min_size {
                break;
            }
            let mut origin = None;
            let mut newly = 0;
            for i in 0..clique.len() {
                for j in i + 1..clique.len() {
                    let p = (clique[i].min(clique[j]), clique[i].max(clique[j]));
                    if uncovered.remove(&p) {
                        newly += 1;
                    }
                    for &ci in &edges[&p] {
                        if !removed[ci] {
                            removed[ci] = true;
                            origin.get_or_insert_with(|| m.origins[ci].clone());
                        }
                    }
                }
            }
            if newly == 0 {
                break;
            }
            clique.sort_unstable();
            log.rewrites.push(format!("replaced {}-clique of disequalities by all_different", clique.len()));
            added.push((Constraint::AllDifferent(clique), origin.unwrap()));
        }
    }
    let constraints = std::mem::take(&mut m.constraints);
    let origins = std::mem::take(&mut m.origins);
    for (i, (c, o)) in constraints.into_iter().zip(origins).enumerate() {
        if !removed[i] {
            m.constraints.push(c);
            m.origins.push(o);
        }
    }
    for (c, o) in added {
        m.constraints.push(c);
        m.origins.push(o);
    }
}
