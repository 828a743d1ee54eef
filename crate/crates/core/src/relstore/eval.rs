//! Straightforward nested-loop evaluation of view queries over concrete
//! store contents.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::{Store, StoreError};
use crate::schema::{OutputColumn, Schema};
use crate::sqlfront::analyze::{expand_projection, query_scope, resolve_column, Catalog, Scope};
use crate::sqlfront::ast::{AggFunc, BinaryOp, Expr, Query};
use crate::value::Value;

/// Result of evaluating a view: rows sorted by their values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewRows {
    pub columns: Vec<OutputColumn>,
    pub rows: Vec<Vec<Value>>,
}

type Rows = Rc<Vec<Vec<Value>>>;

enum RExpr {
    Col { depth: usize, item: usize, col: usize },
    Lit(Value),
    Not(Box<RExpr>),
    Neg(Box<RExpr>),
    Bin(BinaryOp, Box<RExpr>, Box<RExpr>),
    In(Box<RExpr>, Box<RQuery>, bool),
    Sub(Box<RQuery>),
    Agg(AggFunc, Option<Box<RExpr>>),
}

struct RQuery {
    sources: Vec<String>,
    ons: Vec<RExpr>,
    selection: Option<RExpr>,
    group_by: Vec<RExpr>,
    having: Option<RExpr>,
    projection: Vec<RExpr>,
    aggregate: bool,
}

pub struct Evaluator<'a> {
    schema: &'a Schema,
    store: &'a Store,
    catalog: Catalog,
    cache: RefCell<HashMap<String, Rows>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(schema: &'a Schema, store: &'a Store) -> Evaluator<'a> {
        let mut catalog = Catalog::from_tables(&schema.tables);
        for v in &schema.views {
            catalog.add_view(&v.name, &v.columns, v.variable_dependent);
        }
        Evaluator {
            schema,
            store,
            catalog,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn eval_view(&self, name: &str) -> Result<ViewRows, StoreError> {
        let v = self.schema.view(name).ok_or_else(|| StoreError::UnknownView(name.to_string()))?;
        let rows = self.relation_rows(name)?;
        Ok(ViewRows {
            columns: v.columns.clone(),
            rows: rows.as_ref().clone(),
        })
    }

    /// Evaluates an ad-hoc query against the schema's tables and views.
    pub fn eval_query(&self, q: &Query) -> Result<Vec<Vec<Value>>, StoreError> {
        let compiled = self.compile(q, &mut Vec::new()).map_err(|msg| StoreError::Eval {
            view: "<query>".into(),
            msg,
        })?;
        let mut rows = self.run(&compiled, &[]).map_err(|msg| StoreError::Eval {
            view: "<query>".into(),
            msg,
        })?;
        rows.sort();
        Ok(rows)
    }

    fn relation_rows(&self, name: &str) -> Result<Rows, StoreError> {
        if let Some(r) = self.cache.borrow().get(name) {
            return Ok(r.clone());
        }
        let rows: Rows = if let Some(rel) = self.store.relation(name) {
            Rc::new(rel.rows().to_vec())
        } else if let Some(v) = self.schema.view(name) {
            let err = |msg: String| StoreError::Eval {
                view: name.to_string(),
                msg,
            };
            let q = self.compile(&v.query, &mut Vec::new()).map_err(err)?;
            let mut rows = self.run(&q, &[]).map_err(err)?;
            rows.sort();
            Rc::new(rows)
        } else {
            return Err(StoreError::UnknownTable(name.to_string()));
        };
        self.cache.borrow_mut().insert(name.to_string(), rows.clone());
        Ok(rows)
    }

    fn compile<'c>(&'c self, q: &Query, scopes: &mut Vec<Scope<'c>>) -> Result<RQuery, String> {
        let full = query_scope(&self.catalog, q)?;
        let sources = full.items.iter().map(|(_, r)| r.name.clone()).collect();
        let mut ons = Vec::new();
        for (j, join) in q.joins.iter().enumerate() {
            scopes.push(Scope {
                items: full.items[..j + 2].to_vec(),
            });
            let e = self.compile_expr(&join.on, scopes);
            scopes.pop();
            ons.push(e?);
        }
        let projection_exprs = expand_projection(q, &full);
        scopes.push(full);
        let result = (|| {
            let selection = q.selection.as_ref().map(|e| self.compile_expr(e, scopes)).transpose()?;
            let group_by = q
                .group_by
                .iter()
                .map(|e| self.compile_expr(e, scopes))
                .collect::<Result<Vec<_>, _>>()?;
            let having = q.having.as_ref().map(|e| self.compile_expr(e, scopes)).transpose()?;
            let projection = projection_exprs
                .iter()
                .map(|(_, e)| self.compile_expr(e, scopes))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(RQuery {
                sources,
                ons,
                selection,
                group_by,
                having,
                projection,
                aggregate: q.is_aggregate(),
            })
        })();
        scopes.pop();
        result
    }

    fn compile_expr<'c>(&'c self, e: &Expr, scopes: &mut Vec<Scope<'c>>) -> Result<RExpr, String> {
        Ok(match e {
            Expr::Column { qualifier, name } => {
                let r = resolve_column(scopes, qualifier.as_deref(), name)?;
                RExpr::Col {
                    depth: r.depth,
                    item: r.item,
                    col: r.col,
                }
            }
            Expr::Literal(v) => RExpr::Lit(v.clone()),
            Expr::Not(x) => RExpr::Not(Box::new(self.compile_expr(x, scopes)?)),
            Expr::Neg(x) => RExpr::Neg(Box::new(self.compile_expr(x, scopes)?)),
            Expr::Binary { op, left, right } => RExpr::Bin(
                op.clone(),
                Box::new(self.compile_expr(left, scopes)?),
                Box::new(self.compile_expr(right, scopes)?),
            ),
            Expr::InSubquery { expr, query, negated } => {
                let x = self.compile_expr(expr, scopes)?;
                RExpr::In(Box::new(x), Box::new(self.compile(query, scopes)?), *negated)
            }
            Expr::Subquery(q) => RExpr::Sub(Box::new(self.compile(q, scopes)?)),
            Expr::Aggregate { func, arg } => RExpr::Agg(
                *func,
                arg.as_ref().map(|a| self.compile_expr(a, scopes)).transpose()?.map(Box::new),
            ),
        })
    }

    fn run(&self, q: &RQuery, outer: &[Vec<&[Value]>]) -> Result<Vec<Vec<Value>>, String> {
        let sources: Vec<Rows> = q
            .sources
            .iter()
            .map(|s| self.relation_rows(s).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        let mut env: Vec<Vec<&[Value]>> = outer.to_vec();
        env.push(Vec::with_capacity(sources.len()));
        let mut matched: Vec<Vec<&[Value]>> = Vec::new();
        self.join(q, &sources, 0, &mut env, &mut matched)?;
        let mut out = Vec::new();
        if q.aggregate {
            let mut groups: Vec<(Vec<Value>, Vec<Vec<&[Value]>>)> = Vec::new();
            let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
            for frame in matched {
                env.pop();
                env.push(frame.clone());
                let key = q
                    .group_by
                    .iter()
                    .map(|g| self.eval(g, &env))
                    .collect::<Result<Vec<_>, _>>()?;
                let gi = *index.entry(key.clone()).or_insert_with(|| {
                    groups.push((key, Vec::new()));
                    groups.len() - 1
                });
                groups[gi].1.push(frame);
            }
            if groups.is_empty() && q.group_by.is_empty() {
                groups.push((Vec::new(), Vec::new()));
            }
            for (_, members) in &groups {
                if let Some(h) = &q.having {
                    if self.eval_grouped(h, members, &mut env)? != Value::Bool(true) {
                        continue;
                    }
                }
                let row = q
                    .projection
                    .iter()
                    .map(|p| self.eval_grouped(p, members, &mut env))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(row);
            }
        } else {
            for frame in matched {
                env.pop();
                env.push(frame);
                let row = q
                    .projection
                    .iter()
                    .map(|p| self.eval(p, &env))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(row);
            }
        }
        Ok(out)
    }

    fn join<'r>(
        &self,
        q: &RQuery,
        sources: &'r [Rows],
        level: usize,
        env: &mut Vec<Vec<&'r [Value]>>,
        matched: &mut Vec<Vec<&'r [Value]>>,
    ) -> Result<(), String> {
        if level == sources.len() {
            if let Some(w) = &q.selection {
                if self.eval(w, env)? != Value::Bool(true) {
                    return Ok(());
                }
            }
            matched.push(env.last().unwrap().clone());
            return Ok(());
        }
        for row in sources[level].iter() {
            env.last_mut().unwrap().push(row.as_slice());
            let pass = level == 0 || self.eval(&q.ons[level - 1], env)? == Value::Bool(true);
            if pass {
                self.join(q, sources, level + 1, env, matched)?;
            }
            env.last_mut().unwrap().pop();
        }
        Ok(())
    }

    fn eval_grouped<'r>(
        &self,
        e: &RExpr,
        members: &[Vec<&'r [Value]>],
        env: &mut Vec<Vec<&'r [Value]>>,
    ) -> Result<Value, String> {
        match e {
            RExpr::Agg(func, arg) => {
                let mut vals = Vec::with_capacity(members.len());
                for m in members {
                    env.pop();
                    env.push(m.clone());
                    match arg {
                        Some(a) => vals.push(self.eval(a, env)?),
                        None => vals.push(Value::Int(1)),
                    }
                }
                aggregate(*func, arg.is_none(), vals)
            }
            RExpr::Not(x) => Ok(not(self.eval_grouped(x, members, env)?)),
            RExpr::Neg(x) => neg(self.eval_grouped(x, members, env)?),
            RExpr::Bin(op, l, r) => {
                let a = self.eval_grouped(l, members, env)?;
                let b = self.eval_grouped(r, members, env)?;
                binary(op, a, b)
            }
            other => {
                let Some(first) = members.first() else {
                    return match other {
                        RExpr::Lit(v) => Ok(v.clone()),
                        _ => Ok(Value::Unset),
                    };
                };
                env.pop();
                env.push(first.clone());
                self.eval(other, env)
            }
        }
    }

    fn eval(&self, e: &RExpr, env: &[Vec<&[Value]>]) -> Result<Value, String> {
        match e {
            RExpr::Col { depth, item, col } => Ok(env[env.len() - 1 - depth][*item][*col].clone()),
            RExpr::Lit(v) => Ok(v.clone()),
            RExpr::Not(x) => Ok(not(self.eval(x, env)?)),
            RExpr::Neg(x) => neg(self.eval(x, env)?),
            RExpr::Bin(op, l, r) => {
                let a = self.eval(l, env)?;
                if *op == BinaryOp::And && a == Value::Bool(false) {
                    return Ok(a);
                }
                if *op == BinaryOp::Or && a == Value::Bool(true) {
                    return Ok(a);
                }
                let b = self.eval(r, env)?;
                binary(op, a, b)
            }
            RExpr::In(x, q, negated) => {
                let v = self.eval(x, env)?;
                if v.is_unset() {
                    return Ok(Value::Bool(*negated));
                }
                let rows = self.run(q, env)?;
                let found = rows.iter().any(|r| r[0] == v);
                Ok(Value::Bool(found != *negated))
            }
            RExpr::Sub(q) => {
                let rows = self.run(q, env)?;
                match rows.len() {
                    0 => Ok(Value::Unset),
                    1 => Ok(rows[0][0].clone()),
                    n => Err(format!("scalar subquery returned {n} rows")),
                }
            }
            RExpr::Agg(..) => Err("aggregate outside of an aggregate query".into()),
        }
    }
}

fn not(v: Value) -> Value {
    match v {
        Value::Bool(b) => Value::Bool(!b),
        other => other,
    }
}

fn neg(v: Value) -> Result<Value, String> {
    match v {
        Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(|| "integer overflow".to_string()),
        other => Ok(other),
    }
}

/// Binary operator over concrete values. Comparisons with an unset cell
/// are false except `!=`, which is true.
pub fn binary(op: &BinaryOp, a: Value, b: Value) -> Result<Value, String> {
    use BinaryOp::*;
    match op {
        And => Ok(Value::Bool(a == Value::Bool(true) && b == Value::Bool(true))),
        Or => Ok(Value::Bool(a == Value::Bool(true) || b == Value::Bool(true))),
        Add | Sub | Mul => match (a, b) {
            (Value::Int(x), Value::Int(y)) => {
                let r = match op {
                    Add => x.checked_add(y),
                    Sub => x.checked_sub(y),
                    _ => x.checked_mul(y),
                };
                r.map(Value::Int).ok_or_else(|| "integer overflow".to_string())
            }
            _ => Ok(Value::Unset),
        },
        Eq | Ne | Lt | Le | Gt | Ge => {
            if a.is_unset() || b.is_unset() {
                return Ok(Value::Bool(*op == Ne));
            }
            let ord = a.cmp(&b);
            Ok(Value::Bool(match op {
                Eq => ord.is_eq(),
                Ne => ord.is_ne(),
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
    }
}

/// Aggregates concrete values; unset inputs are skipped. Over no input,
/// sum and count give 0, min and max give the unset marker.
pub fn aggregate(func: AggFunc, star: bool, vals: Vec<Value>) -> Result<Value, String> {
    let present: Vec<Value> = vals.into_iter().filter(|v| !v.is_unset()).collect();
    Ok(match func {
        AggFunc::Count => Value::Int(present.len() as i64),
        AggFunc::Sum => {
            let mut s: i64 = 0;
            for v in &present {
                let x = v.as_int().ok_or("sum over a non-integer")?;
                s = s.checked_add(x).ok_or("integer overflow")?;
            }
            Value::Int(s)
        }
        AggFunc::Min => present.into_iter().min().unwrap_or(Value::Unset),
        AggFunc::Max => present.into_iter().max().unwrap_or(Value::Unset),
        AggFunc::AllDifferent => {
            let _ = star;
            let mut seen = std::collections::HashSet::new();
            Value::Bool(present.iter().all(|v| seen.insert(v.clone())))
        }
    })
}
