use std::collections::BTreeSet;

use proptest::prelude::*;
use weave_core::solver::*;

fn brute(model: &Model) -> Vec<Vec<i64>> {
    let doms: Vec<Vec<i64>> = model.vars.iter().map(|v| v.domain.values().collect()).collect();
    let mut out = Vec::new();
    let mut cur = vec![0i64; doms.len()];
    fn rec(i: usize, doms: &[Vec<i64>], cur: &mut Vec<i64>, model: &Model, out: &mut Vec<Vec<i64>>) {
        if i == doms.len() {
            if model.constraints.iter().all(|c| c.holds(cur)) {
                out.push(cur.clone());
            }
            return;
        }
        for &v in &doms[i] {
            cur[i] = v;
            rec(i + 1, doms, cur, model, out);
        }
    }
    rec(0, &doms, &mut cur, model, &mut out);
    out
}

fn best(model: &Model, sols: &[Vec<i64>]) -> Option<i64> {
    let y = model.objective?;
    sols.iter().map(|a| a[y]).max()
}

#[derive(Clone, Debug)]
enum Spec {
    Lin(Vec<(i64, usize)>, u8, i64),
    Reif(Vec<(i64, usize)>, u8, i64),
    Clause(Vec<(usize, bool)>),
    AllDiff(Vec<usize>),
    Member(usize, Vec<i64>, bool),
    Min(Vec<usize>),
    Max(Vec<usize>),
}

fn op(k: u8) -> LinOp {
    [LinOp::Le, LinOp::Eq, LinOp::Ge, LinOp::Ne][k as usize % 4]
}

fn spec(n: usize) -> impl Strategy<Value = Spec> {
    let terms = prop::collection::vec((-3i64..=3, 0..n), 1..4);
    prop_oneof![
        (terms.clone(), 0u8..4, -4i64..8).prop_map(|(t, o, r)| Spec::Lin(t, o, r)),
        (terms, 0u8..4, -4i64..8).prop_map(|(t, o, r)| Spec::Reif(t, o, r)),
        prop::collection::vec((0..n, any::<bool>()), 1..3).prop_map(Spec::Clause),
        prop::collection::vec(0..n, 2..4).prop_map(Spec::AllDiff),
        (0..n, prop::collection::vec(0i64..4, 0..3), any::<bool>()).prop_map(|(x, s, g)| Spec::Member(x, s, g)),
        prop::collection::vec(0..n, 1..3).prop_map(Spec::Min),
        prop::collection::vec(0..n, 1..3).prop_map(Spec::Max),
    ]
}

/// Builds a model over `n` decision variables in 0..=3. Each constraint gets
/// its own group; reified indicators and min/max results are extra
/// variables. With `objective`, the sum of the decision variables weighted
/// by position is maximised.
fn build(n: usize, specs: &[Spec], objective: bool) -> Model {
    let mut m = Model::new();
    let xs: Vec<VarId> = (0..n).map(|i| m.new_var(Domain::range(0, 3), VarKind::Decision, format!("x{i}"))).collect();
    for (k, s) in specs.iter().enumerate() {
        let g = m.group("c", vec![weave_core::Value::Int(k as i64)]);
        let origin = Origin { view: "c".into(), group: Some(g) };
        let lin = |t: &Vec<(i64, usize)>, o: u8, r: i64| Linear::new(t.iter().map(|&(a, i)| (a, xs[i])).collect(), op(o), r);
        match s {
            Spec::Lin(t, o, r) => {
                m.post(Constraint::Linear(lin(t, *o, *r)), origin);
            }
            Spec::Reif(t, o, r) => {
                let b = m.new_var(Domain::range(0, 1), VarKind::Reified, format!("b{k}"));
                m.post(Constraint::Reified { b, atom: Atom::Lin(lin(t, *o, *r)) }, Origin { view: "c".into(), group: None });
                m.post(Constraint::Clause(vec![Lit::pos(b)]), origin);
            }
            Spec::Clause(lits) => {
                let mut out = Vec::new();
                for &(i, pos) in lits {
                    let b = m.new_var(Domain::range(0, 1), VarKind::Reified, format!("r{k}_{i}"));
                    m.post(
                        Constraint::Reified { b, atom: Atom::In { x: xs[i], set: Domain::range(0, 1) } },
                        Origin { view: "c".into(), group: None },
                    );
                    out.push(if pos { Lit::pos(b) } else { Lit::neg(b) });
                }
                m.post(Constraint::Clause(out), origin);
            }
            Spec::AllDiff(v) => {
                let mut v: Vec<VarId> = v.iter().map(|&i| xs[i]).collect();
                v.sort_unstable();
                v.dedup();
                m.post(Constraint::AllDifferent(v), origin);
            }
            Spec::Member(x, s, neg) => {
                m.post(Constraint::Membership { x: xs[*x], set: Domain::from_values(s.iter().copied()), negated: *neg }, origin);
            }
            Spec::Min(v) | Spec::Max(v) => {
                let y = m.new_var(Domain::range(0, 3), VarKind::Defined, format!("m{k}"));
                let v: Vec<VarId> = v.iter().map(|&i| xs[i]).collect();
                let c = if matches!(s, Spec::Min(_)) {
                    Constraint::MinOf { y, xs: v }
                } else {
                    Constraint::MaxOf { y, xs: v }
                };
                m.post(c, Origin { view: "c".into(), group: None });
                m.post(Constraint::Linear(Linear::new(vec![(1, y), (-1, xs[0])], LinOp::Ge, 0)), origin);
            }
        }
    }
    if objective {
        let hi: i64 = (0..n as i64).map(|i| 3 * (i + 1)).sum();
        let y = m.new_var(Domain::range(0, hi), VarKind::Defined, "obj");
        let mut terms: Vec<(i64, VarId)> = xs.iter().enumerate().map(|(i, &x)| (i as i64 + 1, x)).collect();
        terms.push((-1, y));
        m.add(Constraint::Linear(Linear::new(terms, LinOp::Eq, 0)));
        m.objective = Some(y);
    }
    m
}

fn model_strategy() -> impl Strategy<Value = (usize, Vec<Spec>, bool)> {
    (2usize..5).prop_flat_map(|n| (Just(n), prop::collection::vec(spec(n), 0..6), any::<bool>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn search_matches_enumeration((n, specs, obj) in model_strategy()) {
        let m = build(n, &specs, obj);
        let sols = brute(&m);
        let (out, stats) = search(&m, Budget::unlimited());
        match &out {
            SolveOutcome::Optimal { assignment, objective } => {
                prop_assert!(!sols.is_empty());
                prop_assert!(m.violations(assignment).is_empty());
                prop_assert_eq!(*objective, best(&m, &sols));
                for w in stats.incumbents.windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
            }
            SolveOutcome::Unsat { .. } => prop_assert!(sols.is_empty()),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn presolve_preserves_optimum((n, specs, obj) in model_strategy()) {
        let m = build(n, &specs, obj);
        let sols = brute(&m);
        let (out, _, _) = solve(&m, Budget::unlimited(), Some(PresolveOptions::default()), &SearchOptions::default());
        match &out {
            SolveOutcome::Optimal { assignment, objective } => {
                prop_assert!(m.violations(assignment).is_empty());
                prop_assert_eq!(*objective, best(&m, &sols));
            }
            SolveOutcome::Unsat { .. } => prop_assert!(sols.is_empty()),
            other => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn cores_are_unsat_and_minimal((n, specs, _obj) in model_strategy()) {
        let m = build(n, &specs, false);
        let sols = brute(&m);
        match extract_core(&m, Budget::unlimited()) {
            Err(CoreError::Satisfiable) => prop_assert!(!sols.is_empty()),
            Err(e) => prop_assert!(false, "{e}"),
            Ok(core) => {
                prop_assert!(sols.is_empty());
                prop_assert!(core.minimal);
                let keep: BTreeSet<GroupId> = core.groups.iter().copied().collect();
                let sub = |keep: &BTreeSet<GroupId>| {
                    let mut s = m.clone();
                    s.constraints.clear();
                    s.origins.clear();
                    for (c, o) in m.constraints.iter().zip(&m.origins) {
                        if o.group.is_none_or(|g| keep.contains(&g)) {
                            s.constraints.push(c.clone());
                            s.origins.push(o.clone());
                        }
                    }
                    s
                };
                prop_assert!(brute(&sub(&keep)).is_empty());
                for g in &core.groups {
                    let mut k = keep.clone();
                    k.remove(g);
                    prop_assert!(!brute(&sub(&k)).is_empty());
                }
            }
        }
    }

    #[test]
    fn domain_ops_match_sets(a in prop::collection::btree_set(-6i64..6, 0..8), b in prop::collection::btree_set(-6i64..6, 0..8)) {
        let da = Domain::from_values(a.iter().copied());
        let db = Domain::from_values(b.iter().copied());
        let set = |d: &Domain| d.values().collect::<BTreeSet<i64>>();
        prop_assert_eq!(set(&da.intersect(&db)), a.intersection(&b).copied().collect());
        prop_assert_eq!(set(&da.union(&db)), a.union(&b).copied().collect());
        prop_assert_eq!(set(&da.subtract(&db)), a.difference(&b).copied().collect());
        prop_assert_eq!(da.size(), a.len() as u64);
        prop_assert_eq!(da.is_subset(&db), a.is_subset(&b));
        prop_assert_eq!(da.is_disjoint(&db), a.is_disjoint(&b));
    }

    #[test]
    fn alldiff_filter_keeps_exactly_supported_values(doms in prop::collection::vec(prop::collection::btree_set(0i64..5, 1..4), 1..5)) {
        let ds: Vec<Domain> = doms.iter().map(|s| Domain::from_values(s.iter().copied())).collect();
        let refs: Vec<&Domain> = ds.iter().collect();
        // Supported values by enumeration of injective assignments.
        let mut supported: Vec<BTreeSet<i64>> = vec![BTreeSet::new(); ds.len()];
        let mut cur = Vec::new();
        fn rec(i: usize, doms: &[BTreeSet<i64>], cur: &mut Vec<i64>, sup: &mut [BTreeSet<i64>]) {
            if i == doms.len() {
                for (k, v) in cur.iter().enumerate() {
                    sup[k].insert(*v);
                }
                return;
            }
            for &v in &doms[i] {
                if !cur.contains(&v) {
                    cur.push(v);
                    rec(i + 1, doms, cur, sup);
                    cur.pop();
                }
            }
        }
        rec(0, &doms, &mut cur, &mut supported);
        match alldiff::filter(&refs) {
            Err(()) => prop_assert!(supported.iter().all(|s| s.is_empty())),
            Ok(removals) => {
                for (i, r) in removals.iter().enumerate() {
                    let kept: BTreeSet<i64> = doms[i].iter().copied().filter(|v| !r.contains(v)).collect();
                    prop_assert_eq!(&kept, &supported[i]);
                }
            }
        }
    }
}

#[test]
fn zero_budget_is_unknown() {
    let mut m = Model::new();
    m.new_var(Domain::range(0, 3), VarKind::Decision, "x");
    let (out, _) = search(&m, Budget::nodes(0));
    assert_eq!(out, SolveOutcome::Unknown { timeout: true });
}

#[test]
fn clique_of_disequalities_becomes_all_different() {
    let mut m = Model::new();
    let xs: Vec<VarId> = (0..6).map(|i| m.new_var(Domain::range(0, 5), VarKind::Decision, format!("x{i}"))).collect();
    for i in 0..6 {
        for j in i + 1..6 {
            m.add(Constraint::Linear(Linear::new(vec![(1, xs[i]), (-1, xs[j])], LinOp::Ne, 0)));
        }
    }
    let (p, log) = presolve(&m, PresolveOptions::default());
    assert_eq!(p.constraints.len(), 1);
    assert!(matches!(&p.constraints[0], Constraint::AllDifferent(v) if v.len() == 6));
    assert_eq!(log.count(), 1);
    let (p, _) = presolve(&m, PresolveOptions { cliques: false, ..Default::default() });
    assert_eq!(p.constraints.len(), 15);
}

#[test]
fn pigeonhole_is_refuted_quickly() {
    let mut m = Model::new();
    let xs: Vec<VarId> = (0..30).map(|i| m.new_var(Domain::range(0, 28), VarKind::Decision, format!("x{i}"))).collect();
    m.add(Constraint::AllDifferent(xs));
    let (out, stats) = search(&m, Budget::nodes(10));
    assert!(out.is_unsat());
    assert_eq!(stats.nodes, 0);
}
