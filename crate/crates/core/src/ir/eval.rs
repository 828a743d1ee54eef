//! Join planning shared by concrete and symbolic evaluation, plus concrete
//! evaluation of comprehensions over input relations.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use super::{lower_view, Comprehension, IrExpr, LookupKind, LookupPlan, Source};
use crate::relstore::eval::{aggregate, binary};
use crate::relstore::Store;
use crate::schema::Schema;
use crate::sqlfront::ast::BinaryOp;
use crate::value::Value;

/// What to do after binding generator `i`: which qualifiers become
/// checkable, and optionally an equality usable to probe an index.
#[derive(Clone, Debug, Default)]
pub struct LevelPlan {
    pub checks: Vec<usize>,
    /// (column of this generator, key expression over earlier generators).
    pub probe: Option<(usize, IrExpr)>,
}

#[derive(Clone, Debug)]
pub struct JoinPlan {
    pub levels: Vec<LevelPlan>,
}

pub fn join_plan(c: &Comprehension) -> JoinPlan {
    let mut levels = vec![LevelPlan::default(); c.generators.len().max(1)];
    for (i, q) in c.qualifiers.iter().enumerate() {
        let gens = q.expr.generators();
        let level = gens.last().copied().unwrap_or(0);
        levels[level].checks.push(i);
        if levels[level].probe.is_some() || level == 0 {
            continue;
        }
        if let IrExpr::Bin(BinaryOp::Eq, l, r) = &q.expr {
            for (a, b) in [(l, r), (r, l)] {
                if let IrExpr::Col { gen, col } = **a {
                    let other = b.generators();
                    if gen == level && other.iter().all(|&g| g < level) && !b.contains_aggregate() {
                        levels[level].probe = Some((col, (**b).clone()));
                        break;
                    }
                }
            }
        }
    }
    JoinPlan { levels }
}

/// Computed contents of a lookup.
#[derive(Clone, Debug)]
pub enum LookupTable {
    Set(HashMap<Vec<Value>, BTreeSet<Value>>),
    Scalar { values: HashMap<Vec<Value>, Value>, default: Value },
}

impl LookupTable {
    pub fn set(&self, key: &[Value]) -> Option<&BTreeSet<Value>> {
        match self {
            LookupTable::Set(m) => m.get(key),
            LookupTable::Scalar { .. } => None,
        }
    }

    pub fn scalar(&self, key: &[Value]) -> Value {
        match self {
            LookupTable::Scalar { values, default } => values.get(key).cloned().unwrap_or_else(|| default.clone()),
            LookupTable::Set(_) => Value::Unset,
        }
    }
}

type Rows = Rc<Vec<Vec<Value>>>;

/// Evaluates comprehensions over concrete store contents. Views read by a
/// comprehension are themselves lowered and evaluated, with caching.
pub struct ConcreteEval<'a> {
    pub schema: &'a Schema,
    pub store: &'a Store,
    views: RefCell<HashMap<String, Rows>>,
}

impl<'a> ConcreteEval<'a> {
    pub fn new(schema: &'a Schema, store: &'a Store) -> ConcreteEval<'a> {
        ConcreteEval {
            schema,
            store,
            views: RefCell::new(HashMap::new()),
        }
    }

    pub fn source_rows(&self, source: &Source) -> Result<Rows, String> {
        match source {
            Source::Table(t) => {
                let rel = self.store.relation(t).ok_or_else(|| format!("unknown table {t}"))?;
                if let Some(r) = self.views.borrow().get(t) {
                    return Ok(r.clone());
                }
                let rows = Rc::new(rel.rows().to_vec());
                self.views.borrow_mut().insert(t.clone(), rows.clone());
                Ok(rows)
            }
            Source::View(v) => self.view_rows(v),
        }
    }

    pub fn view_rows(&self, name: &str) -> Result<Rows, String> {
        if let Some(r) = self.views.borrow().get(name) {
            return Ok(r.clone());
        }
        let def = self.schema.view(name).ok_or_else(|| format!("unknown view {name}"))?;
        let c = lower_view(self.schema, def).map_err(|e| e.to_string())?;
        let rows = Rc::new(self.eval(&c)?);
        self.views.borrow_mut().insert(name.to_string(), rows.clone());
        Ok(rows)
    }

    pub fn build_lookups(&self, c: &Comprehension) -> Result<Vec<LookupTable>, String> {
        c.lookups.iter().map(|l| self.build_lookup(l)).collect()
    }

    fn build_lookup(&self, plan: &LookupPlan) -> Result<LookupTable, String> {
        let rows = self.eval(&plan.inner)?;
        Ok(match plan.kind {
            LookupKind::Set => {
                let mut m: HashMap<Vec<Value>, BTreeSet<Value>> = HashMap::new();
                for r in rows {
                    let v = r[plan.key_len].clone();
                    let entry = m.entry(r[..plan.key_len].to_vec()).or_default();
                    if !v.is_unset() {
                        entry.insert(v);
                    }
                }
                LookupTable::Set(m)
            }
            LookupKind::Scalar { default_agg } => {
                let default = match default_agg {
                    Some(f) => aggregate(f, true, Vec::new())?,
                    None => Value::Unset,
                };
                let mut values = HashMap::new();
                for r in rows {
                    let key = r[..plan.key_len].to_vec();
                    if values.insert(key, r[plan.key_len].clone()).is_some() {
                        return Err("scalar subquery returned more than one row".into());
                    }
                }
                LookupTable::Scalar { values, default }
            }
        })
    }

    /// All output rows of the comprehension, sorted.
    pub fn eval(&self, c: &Comprehension) -> Result<Vec<Vec<Value>>, String> {
        let lookups = self.build_lookups(c)?;
        let sources: Vec<Rows> = c
            .generators
            .iter()
            .map(|g| self.source_rows(&g.source))
            .collect::<Result<_, _>>()?;
        let bindings = enumerate(c, &sources, &lookups)?;
        let mut out = Vec::new();
        if c.aggregate {
            let mut groups: Vec<(Vec<Value>, Vec<Vec<usize>>)> = Vec::new();
            let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
            for b in bindings {
                let row = rows_of(&sources, &b);
                let key = c
                    .group_key
                    .iter()
                    .map(|k| eval_row(k, &row, &lookups))
                    .collect::<Result<Vec<_>, _>>()?;
                let gi = *index.entry(key.clone()).or_insert_with(|| {
                    groups.push((key, Vec::new()));
                    groups.len() - 1
                });
                groups[gi].1.push(b);
            }
            if groups.is_empty() && c.group_key.is_empty() {
                groups.push((Vec::new(), Vec::new()));
            }
            for (_, members) in &groups {
                let member_rows: Vec<Vec<&[Value]>> = members.iter().map(|b| rows_of(&sources, b)).collect();
                if let Some(h) = &c.having {
                    if eval_group(h, &member_rows, &lookups)? != Value::Bool(true) {
                        continue;
                    }
                }
                out.push(
                    c.head
                        .iter()
                        .map(|(_, e)| eval_group(e, &member_rows, &lookups))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
        } else {
            for b in bindings {
                let row = rows_of(&sources, &b);
                out.push(
                    c.head
                        .iter()
                        .map(|(_, e)| eval_row(e, &row, &lookups))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
        }
        out.sort();
        Ok(out)
    }
}

fn rows_of<'r>(sources: &'r [Rows], b: &[usize]) -> Vec<&'r [Value]> {
    b.iter().enumerate().map(|(g, &r)| sources[g][r].as_slice()).collect()
}

/// Row-index tuples of all bindings that satisfy every qualifier.
fn enumerate(c: &Comprehension, sources: &[Rows], lookups: &[LookupTable]) -> Result<Vec<Vec<usize>>, String> {
    let plan = join_plan(c);
    let mut indexes: Vec<Option<HashMap<Value, Vec<usize>>>> = vec![None; sources.len()];
    for (g, lvl) in plan.levels.iter().enumerate() {
        if let Some((col, _)) = &lvl.probe {
            let mut m: HashMap<Value, Vec<usize>> = HashMap::new();
            for (i, r) in sources[g].iter().enumerate() {
                m.entry(r[*col].clone()).or_default().push(i);
            }
            indexes[g] = Some(m);
        }
    }
    let mut out = Vec::new();
    let mut binding = Vec::with_capacity(sources.len());
    fn rec(
        c: &Comprehension,
        sources: &[Rows],
        lookups: &[LookupTable],
        plan: &JoinPlan,
        indexes: &[Option<HashMap<Value, Vec<usize>>>],
        binding: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<(), String> {
        let level = binding.len();
        if level == sources.len() {
            out.push(binding.clone());
            return Ok(());
        }
        let lp = &plan.levels[level];
        let candidates: Box<dyn Iterator<Item = usize>> = match (&lp.probe, &indexes[level]) {
            (Some((_, key)), Some(idx)) => {
                let row = rows_of(sources, binding);
                let k = eval_row(key, &row, lookups)?;
                if k.is_unset() {
                    Box::new(std::iter::empty())
                } else {
                    Box::new(idx.get(&k).cloned().unwrap_or_default().into_iter())
                }
            }
            _ => Box::new(0..sources[level].len()),
        };
        for r in candidates {
            binding.push(r);
            let row = rows_of(sources, binding);
            let mut ok = true;
            for &q in &lp.checks {
                if eval_row(&c.qualifiers[q].expr, &row, lookups)? != Value::Bool(true) {
                    ok = false;
                    break;
                }
            }
            if ok {
                rec(c, sources, lookups, plan, indexes, binding, out)?;
            }
            binding.pop();
        }
        Ok(())
    }
    rec(c, sources, lookups, &plan, &indexes, &mut binding, &mut out)?;
    Ok(out)
}

/// Evaluates a row-level expression over one binding.
pub fn eval_row(e: &IrExpr, row: &[&[Value]], lookups: &[LookupTable]) -> Result<Value, String> {
    match e {
        IrExpr::Col { gen, col } => Ok(row[*gen][*col].clone()),
        IrExpr::Lit(v) => Ok(v.clone()),
        IrExpr::Not(x) => Ok(match eval_row(x, row, lookups)? {
            Value::Bool(b) => Value::Bool(!b),
            other => other,
        }),
        IrExpr::Neg(x) => match eval_row(x, row, lookups)? {
            Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(|| "integer overflow".into()),
            other => Ok(other),
        },
        IrExpr::Bin(op, l, r) => {
            let a = eval_row(l, row, lookups)?;
            if *op == BinaryOp::And && a == Value::Bool(false) {
                return Ok(a);
            }
            if *op == BinaryOp::Or && a == Value::Bool(true) {
                return Ok(a);
            }
            binary(op, a, eval_row(r, row, lookups)?)
        }
        IrExpr::Member {
            expr,
            lookup,
            keys,
            negated,
        } => {
            let v = eval_row(expr, row, lookups)?;
            if v.is_unset() {
                return Ok(Value::Bool(*negated));
            }
            let key = keys.iter().map(|k| eval_row(k, row, lookups)).collect::<Result<Vec<_>, _>>()?;
            let found = lookups[*lookup].set(&key).is_some_and(|s| s.contains(&v));
            Ok(Value::Bool(found != *negated))
        }
        IrExpr::Lookup { lookup, keys } => {
            let key = keys.iter().map(|k| eval_row(k, row, lookups)).collect::<Result<Vec<_>, _>>()?;
            Ok(lookups[*lookup].scalar(&key))
        }
        IrExpr::Agg(..) => Err("aggregate in a row-level expression".into()),
        IrExpr::Outer { .. } | IrExpr::InSub { .. } | IrExpr::ScalarSub(_) => Err("expression was not unnested".into()),
    }
}

/// Evaluates a projection or having expression over a group of bindings.
pub fn eval_group(e: &IrExpr, members: &[Vec<&[Value]>], lookups: &[LookupTable]) -> Result<Value, String> {
    match e {
        IrExpr::Agg(f, arg) => {
            let vals = members
                .iter()
                .map(|m| match arg {
                    Some(a) => eval_row(a, m, lookups),
                    None => Ok(Value::Int(1)),
                })
                .collect::<Result<Vec<_>, _>>()?;
            aggregate(*f, arg.is_none(), vals)
        }
        IrExpr::Not(x) => Ok(match eval_group(x, members, lookups)? {
            Value::Bool(b) => Value::Bool(!b),
            other => other,
        }),
        IrExpr::Neg(x) => match eval_group(x, members, lookups)? {
            Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(|| "integer overflow".into()),
            other => Ok(other),
        },
        IrExpr::Bin(op, l, r) => binary(op, eval_group(l, members, lookups)?, eval_group(r, members, lookups)?),
        IrExpr::Lit(v) => Ok(v.clone()),
        other => match members.first() {
            Some(m) => eval_row(other, m, lookups),
            None => Ok(Value::Unset),
        },
    }
}
