//! Re-evaluates hard views on a fully concrete store and reports the rows
//! that violate them. Independent of the grounding encoders: everything
//! here runs on plain values.

use std::collections::HashMap;
use std::fmt;

use crate::compiler::{ModelTemplate, ViewTemplate};
use crate::ir::eval::{eval_row, ConcreteEval, LookupTable};
use crate::ir::{IrExpr, QualOrigin, Source};
use crate::relstore::eval::{aggregate, binary};
use crate::relstore::Store;
use crate::schema::ViewClass;
use crate::sqlfront::ast::BinaryOp;
use crate::value::{DataType, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub view: String,
    pub keys: Vec<Value>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keys: Vec<String> = self.keys.iter().map(|k| k.to_string()).collect();
        write!(f, "{}[{}]", self.view, keys.join(", "))
    }
}

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub violations: Vec<Violation>,
    /// Value of every soft view, in schema order.
    pub soft: Vec<(String, Value)>,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Sum of the integer soft values.
    pub fn objective(&self) -> i64 {
        self.soft.iter().filter_map(|(_, v)| v.as_int()).sum()
    }
}

/// Checks every hard view of the template against the store.
pub fn check(template: &ModelTemplate, store: &Store) -> Result<CheckReport, String> {
    let eval = ConcreteEval::new(&template.schema, store);
    let mut aux: HashMap<String, Vec<Vec<Value>>> = HashMap::new();
    let mut report = CheckReport::default();
    for vt in &template.views {
        let c = &vt.comp;
        let lookups = eval.build_lookups(c)?;
        let sources: Vec<Vec<Vec<Value>>> = c
            .generators
            .iter()
            .map(|g| match &g.source {
                Source::View(v) if aux.contains_key(v) => Ok(aux[v].clone()),
                s => eval.source_rows(s).map(|r| r.to_vec()),
            })
            .collect::<Result<_, String>>()?;
        let bindings = bindings(vt, &sources, &lookups)?;
        let row = |b: &Vec<usize>| -> Vec<&[Value]> { b.iter().enumerate().map(|(g, &i)| sources[g][i].as_slice()).collect() };
        let holds = |b: &Vec<usize>, pick: &dyn Fn(QualOrigin) -> bool| -> Result<bool, String> {
            for &q in &vt.split.dynamic_part {
                let qual = &c.qualifiers[q];
                if pick(qual.origin) && eval_row(&qual.expr, &row(b), &lookups)? != Value::Bool(true) {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let anchored = |b: &Vec<usize>| {
            vt.anchors.iter().all(|&g| {
                let gen = &c.generators[g];
                gen.columns
                    .iter()
                    .enumerate()
                    .all(|(i, col)| !col.variable || !sources[g][b[g]][i].is_unset())
            })
        };
        let anchor_keys = |b: &Vec<usize>| -> Vec<Value> {
            vt.anchors
                .iter()
                .filter_map(|&g| c.generators[g].primary_key.map(|pk| sources[g][b[g]][pk].clone()))
                .collect()
        };
        if !c.aggregate {
            match vt.class {
                ViewClass::Hard => {
                    for b in &bindings {
                        if !anchored(b) || !holds(b, &|o| matches!(o, QualOrigin::On(_)))? {
                            continue;
                        }
                        if !holds(b, &|o| o == QualOrigin::Where)? {
                            report.violations.push(Violation {
                                view: vt.name.clone(),
                                keys: anchor_keys(b),
                            });
                        }
                    }
                }
                ViewClass::Auxiliary => {
                    let mut rows = Vec::new();
                    for b in &bindings {
                        if holds(b, &|_| true)? {
                            let r = row(b);
                            rows.push(c.head.iter().map(|(_, e)| eval_row(e, &r, &lookups)).collect::<Result<Vec<_>, _>>()?);
                        }
                    }
                    aux.insert(vt.name.clone(), rows);
                }
                _ => {}
            }
            continue;
        }

        let mut groups: Vec<(Vec<Value>, Vec<usize>, Vec<Vec<usize>>)> = Vec::new();
        let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
        for b in &bindings {
            let r = row(b);
            let key = c.group_key.iter().map(|k| eval_row(k, &r, &lookups)).collect::<Result<Vec<_>, _>>()?;
            let gi = *index.entry(key.clone()).or_insert_with(|| {
                groups.push((key, b.clone(), Vec::new()));
                groups.len() - 1
            });
            if holds(b, &|_| true)? {
                groups[gi].2.push(b.clone());
            }
        }
        if groups.is_empty() && c.group_key.is_empty() {
            groups.push((Vec::new(), Vec::new(), Vec::new()));
        }
        let def = template.schema.view(&vt.name);
        let mut rows = Vec::new();
        for (key, first, members) in &groups {
            let first_row = (!first.is_empty()).then(|| row(first));
            let member_rows: Vec<Vec<&[Value]>> = members.iter().map(&row).collect();
            let ev = |e: &IrExpr| group_value(e, &member_rows, first_row.as_deref(), &lookups);
            match vt.class {
                ViewClass::Hard => {
                    if !first.is_empty() && !anchored(first) {
                        continue;
                    }
                    let mut ok = match &c.having {
                        Some(h) => ev(h)? == Value::Bool(true),
                        None => true,
                    };
                    for (i, (_, e)) in c.head.iter().enumerate() {
                        let is_bool = def.and_then(|d| d.columns.get(i)).is_some_and(|col| col.dtype == DataType::Boolean);
                        if is_bool && ev(e)? != Value::Bool(true) {
                            ok = false;
                        }
                    }
                    if !ok {
                        report.violations.push(Violation {
                            view: vt.name.clone(),
                            keys: key.clone(),
                        });
                    }
                }
                ViewClass::Soft => {
                    report.soft.push((vt.name.clone(), ev(&c.head[0].1)?));
                    break;
                }
                ViewClass::Auxiliary => {
                    let keep = match &c.having {
                        Some(h) => ev(h)? == Value::Bool(true),
                        None => true,
                    };
                    if keep {
                        rows.push(c.head.iter().map(|(_, e)| ev(e)).collect::<Result<Vec<_>, _>>()?);
                    }
                }
                ViewClass::Input => {}
            }
        }
        if vt.class == ViewClass::Auxiliary {
            aux.insert(vt.name.clone(), rows);
        }
    }
    Ok(report)
}

fn group_value(e: &IrExpr, members: &[Vec<&[Value]>], first: Option<&[&[Value]]>, lookups: &[LookupTable]) -> Result<Value, String> {
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
        IrExpr::Not(x) => Ok(match group_value(x, members, first, lookups)? {
            Value::Bool(b) => Value::Bool(!b),
            other => other,
        }),
        IrExpr::Neg(x) => match group_value(x, members, first, lookups)? {
            Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(|| "integer overflow".into()),
            other => Ok(other),
        },
        IrExpr::Bin(op, l, r) => binary(op, group_value(l, members, first, lookups)?, group_value(r, members, first, lookups)?),
        IrExpr::Lit(v) => Ok(v.clone()),
        other => match first {
            Some(r) => eval_row(other, r, lookups),
            None => Ok(Value::Unset),
        },
    }
}

/// Bindings satisfying the view's input-only qualifiers, probing hash
/// indexes for equality joins.
fn bindings(vt: &ViewTemplate, sources: &[Vec<Vec<Value>>], lookups: &[LookupTable]) -> Result<Vec<Vec<usize>>, String> {
    let c = &vt.comp;
    let n = sources.len();
    let mut at_level: Vec<Vec<usize>> = vec![Vec::new(); n.max(1)];
    let mut probes: Vec<Option<(usize, &IrExpr)>> = vec![None; n.max(1)];
    for &q in &vt.split.static_part {
        let e = &c.qualifiers[q].expr;
        let level = e.generators().last().copied().unwrap_or(0);
        at_level[level].push(q);
        if level == 0 || probes[level].is_some() {
            continue;
        }
        if let IrExpr::Bin(BinaryOp::Eq, l, r) = e {
            for (a, b) in [(l, r), (r, l)] {
                if let IrExpr::Col { gen, col } = **a {
                    if gen == level && b.generators().iter().all(|&g| g < level) && !b.contains_aggregate() {
                        probes[level] = Some((col, &**b));
                        break;
                    }
                }
            }
        }
    }
    let indexes: Vec<Option<HashMap<&Value, Vec<usize>>>> = (0..n)
        .map(|g| {
            probes[g].map(|(col, _)| {
                let mut m: HashMap<&Value, Vec<usize>> = HashMap::new();
                for (i, r) in sources[g].iter().enumerate() {
                    m.entry(&r[col]).or_default().push(i);
                }
                m
            })
        })
        .collect();
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let ctx = Ctx {
        c,
        sources,
        lookups,
        at_level: &at_level,
        probes: &probes,
        indexes: &indexes,
    };
    ctx.rec(&mut stack, &mut out)?;
    Ok(out)
}

struct Ctx<'a> {
    c: &'a crate::ir::Comprehension,
    sources: &'a [Vec<Vec<Value>>],
    lookups: &'a [LookupTable],
    at_level: &'a [Vec<usize>],
    probes: &'a [Option<(usize, &'a IrExpr)>],
    indexes: &'a [Option<HashMap<&'a Value, Vec<usize>>>],
}

impl Ctx<'_> {
    fn rec(&self, stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) -> Result<(), String> {
        let level = stack.len();
        if level == self.sources.len() {
            out.push(stack.clone());
            return Ok(());
        }
        let row_of = |stack: &[usize]| -> Vec<&[Value]> { stack.iter().enumerate().map(|(g, &r)| self.sources[g][r].as_slice()).collect() };
        let candidates: Vec<usize> = match (&self.probes[level], &self.indexes[level]) {
            (Some((_, key)), Some(idx)) => {
                let k = eval_row(key, &row_of(stack), self.lookups)?;
                if k.is_unset() {
                    Vec::new()
                } else {
                    idx.get(&k).cloned().unwrap_or_default()
                }
            }
            _ => (0..self.sources[level].len()).collect(),
        };
        'rows: for i in candidates {
            stack.push(i);
            let row = row_of(stack);
            for &q in &self.at_level[level] {
                if eval_row(&self.c.qualifiers[q].expr, &row, self.lookups)? != Value::Bool(true) {
                    stack.pop();
                    continue 'rows;
                }
            }
            self.rec(stack, out)?;
            stack.pop();
        }
        Ok(())
    }
}
