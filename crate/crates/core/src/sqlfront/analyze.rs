//! Name resolution and type checking of view queries.

use std::collections::HashMap;

use super::ast::{AggFunc, BinaryOp, Expr, Query, SelectItem};
use crate::schema::{OutputColumn, TableDef};
use crate::value::{DataType, Value};

#[derive(Clone, Debug)]
pub struct ColInfo {
    pub name: String,
    pub dtype: DataType,
    pub variable: bool,
}

#[derive(Clone, Debug)]
pub struct RelInfo {
    pub name: String,
    pub columns: Vec<ColInfo>,
    pub primary_key: Option<usize>,
    pub is_view: bool,
}

impl RelInfo {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// Relations visible to view queries: tables plus already analysed views.
#[derive(Clone, Debug, Default)]
pub struct Catalog {
    rels: HashMap<String, RelInfo>,
}

impl Catalog {
    pub fn from_tables(tables: &[TableDef]) -> Catalog {
        let mut rels = HashMap::new();
        for t in tables {
            rels.insert(
                t.name.clone(),
                RelInfo {
                    name: t.name.clone(),
                    columns: t
                        .columns
                        .iter()
                        .map(|c| ColInfo {
                            name: c.name.clone(),
                            dtype: c.dtype,
                            variable: c.is_variable,
                        })
                        .collect(),
                    primary_key: t.primary_key,
                    is_view: false,
                },
            );
        }
        Catalog { rels }
    }

    pub fn add_view(&mut self, name: &str, columns: &[OutputColumn], variable: bool) {
        self.rels.insert(
            name.to_string(),
            RelInfo {
                name: name.to_string(),
                columns: columns
                    .iter()
                    .map(|c| ColInfo {
                        name: c.name.clone(),
                        dtype: c.dtype,
                        variable,
                    })
                    .collect(),
                primary_key: None,
                is_view: true,
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&RelInfo> {
        self.rels.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.rels.contains_key(name)
    }
}

/// The from-items of one query level.
#[derive(Clone, Debug)]
pub struct Scope<'a> {
    pub items: Vec<(String, &'a RelInfo)>,
}

/// A resolved column: `depth` 0 is the innermost scope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColRef {
    pub depth: usize,
    pub item: usize,
    pub col: usize,
}

/// Resolves a column against nested scopes ordered outermost first.
pub fn resolve_column(scopes: &[Scope], qualifier: Option<&str>, name: &str) -> Result<ColRef, String> {
    for (depth, scope) in scopes.iter().rev().enumerate() {
        match qualifier {
            Some(q) => {
                if let Some(item) = scope.items.iter().position(|(b, _)| b == q) {
                    let rel = scope.items[item].1;
                    let matches: Vec<usize> = rel
                        .columns
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| c.name == name)
                        .map(|(i, _)| i)
                        .collect();
                    return match matches.as_slice() {
                        [col] => Ok(ColRef { depth, item, col: *col }),
                        [] => Err(format!("{} has no column {name}", rel.name)),
                        _ => Err(format!("column reference {q}.{name} is ambiguous")),
                    };
                }
            }
            None => {
                let mut found = Vec::new();
                for (item, (_, rel)) in scope.items.iter().enumerate() {
                    for (col, c) in rel.columns.iter().enumerate() {
                        if c.name == name {
                            found.push(ColRef { depth, item, col });
                        }
                    }
                }
                match found.len() {
                    0 => {}
                    1 => return Ok(found[0]),
                    _ => return Err(format!("column reference {name} is ambiguous")),
                }
            }
        }
    }
    match qualifier {
        Some(q) => Err(format!("unknown table or alias {q}")),
        None => Err(format!("unknown column {name}")),
    }
}

/// Builds the scope for a query's from-items, checking that the relations
/// exist and binders are unique.
pub fn query_scope<'a>(cat: &'a Catalog, q: &Query) -> Result<Scope<'a>, String> {
    let mut items: Vec<(String, &RelInfo)> = Vec::new();
    for t in q.from_items() {
        let rel = cat.get(&t.name).ok_or_else(|| format!("unknown table or view {}", t.name))?;
        let binder = t.binder().to_string();
        if items.iter().any(|(b, _)| *b == binder) {
            return Err(format!("duplicate table alias {binder}"));
        }
        items.push((binder, rel));
    }
    Ok(Scope { items })
}

/// Projection with `*` expanded into qualified column references. Each entry
/// is (output name, expression).
pub fn expand_projection(q: &Query, scope: &Scope) -> Vec<(String, Expr)> {
    let mut out = Vec::new();
    for (i, item) in q.projection.iter().enumerate() {
        match item {
            SelectItem::Wildcard => {
                for (binder, rel) in &scope.items {
                    for c in &rel.columns {
                        out.push((c.name.clone(), Expr::col(binder, &c.name)));
                    }
                }
            }
            SelectItem::Expr { expr, alias } => {
                let name = match (alias, expr) {
                    (Some(a), _) => a.clone(),
                    (None, Expr::Column { name, .. }) => name.clone(),
                    (None, Expr::Aggregate { func, .. }) => func.name().to_string(),
                    _ => format!("column{}", i + 1),
                };
                out.push((name, expr.clone()));
            }
        }
    }
    out
}

/// What analysis learned about one query.
#[derive(Clone, Debug, Default)]
pub struct QueryShape {
    pub columns: Vec<OutputColumn>,
    /// Every (relation, column index) referenced anywhere in the query,
    /// including subqueries.
    pub column_refs: Vec<(String, usize)>,
    /// Every relation named in a from-clause, including subqueries.
    pub relations: Vec<String>,
}

pub fn analyze_query(cat: &Catalog, q: &Query) -> Result<QueryShape, String> {
    let mut shape = QueryShape::default();
    let mut scopes = Vec::new();
    shape.columns = analyze_level(cat, q, &mut scopes, &mut shape)?;
    Ok(shape)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    /// Row-level expression (ON, WHERE, GROUP BY): no aggregates.
    Row,
    /// Projection or HAVING of an aggregate query.
    Grouped,
    /// Projection of a plain query.
    Plain,
    /// Inside an aggregate's argument.
    AggArg,
}

struct Level<'q> {
    group_by: &'q [Expr],
    /// (item, col) pairs that are functionally determined by the group key.
    determined: Vec<(usize, usize)>,
    grouped_items: Vec<usize>,
}

fn analyze_level<'a>(
    cat: &'a Catalog,
    q: &Query,
    scopes: &mut Vec<Scope<'a>>,
    shape: &mut QueryShape,
) -> Result<Vec<OutputColumn>, String> {
    let full = query_scope(cat, q)?;
    for (_, rel) in &full.items {
        shape.relations.push(rel.name.clone());
    }
    // ON clauses see the items joined so far.
    for (j, join) in q.joins.iter().enumerate() {
        let partial = Scope {
            items: full.items[..j + 2].to_vec(),
        };
        scopes.push(partial);
        let t = type_of(cat, &join.on, scopes, shape, Ctx::Row, None);
        scopes.pop();
        expect_bool(t?, "join condition")?;
    }
    scopes.push(full);
    let result = analyze_body(cat, q, scopes, shape);
    scopes.pop();
    result
}

fn analyze_body<'a>(
    cat: &'a Catalog,
    q: &Query,
    scopes: &mut Vec<Scope<'a>>,
    shape: &mut QueryShape,
) -> Result<Vec<OutputColumn>, String> {
    if let Some(w) = &q.selection {
        let t = type_of(cat, w, scopes, shape, Ctx::Row, None)?;
        expect_bool(t, "where clause")?;
    }
    for g in &q.group_by {
        type_of(cat, g, scopes, shape, Ctx::Row, None)?;
    }
    let aggregate = q.is_aggregate();
    let scope = scopes.last().unwrap().clone();
    let projection = expand_projection(q, &scope);
    let level = if aggregate {
        if q.projection.iter().any(|p| matches!(p, SelectItem::Wildcard)) {
            return Err("select * is not allowed in an aggregate query".into());
        }
        let mut determined = Vec::new();
        let mut grouped_items = Vec::new();
        for g in &q.group_by {
            if let Expr::Column { qualifier, name } = g {
                let r = resolve_column(scopes, qualifier.as_deref(), name)?;
                if r.depth == 0 {
                    determined.push((r.item, r.col));
                    let rel = scope.items[r.item].1;
                    if rel.primary_key == Some(r.col) {
                        grouped_items.push(r.item);
                    }
                }
            }
        }
        Some(Level {
            group_by: &q.group_by,
            determined,
            grouped_items,
        })
    } else {
        None
    };
    let ctx = if aggregate { Ctx::Grouped } else { Ctx::Plain };
    let mut columns = Vec::new();
    for (name, expr) in &projection {
        let dtype = type_of(cat, expr, scopes, shape, ctx, level.as_ref())?;
        columns.push(OutputColumn {
            name: name.clone(),
            dtype,
        });
    }
    if let Some(h) = &q.having {
        let t = type_of(cat, h, scopes, shape, Ctx::Grouped, level.as_ref())?;
        expect_bool(t, "having clause")?;
    }
    Ok(columns)
}

fn expect_bool(t: DataType, what: &str) -> Result<(), String> {
    if t == DataType::Boolean {
        Ok(())
    } else {
        Err(format!("{what} must be boolean, found {t}"))
    }
}

fn type_of<'a>(
    cat: &'a Catalog,
    e: &Expr,
    scopes: &mut Vec<Scope<'a>>,
    shape: &mut QueryShape,
    ctx: Ctx,
    level: Option<&Level>,
) -> Result<DataType, String> {
    if ctx == Ctx::Grouped {
        if let Some(l) = level {
            if l.group_by.iter().any(|g| g == e) {
                return type_of(cat, e, scopes, shape, Ctx::Row, None);
            }
        }
    }
    match e {
        Expr::Column { qualifier, name } => {
            let r = resolve_column(scopes, qualifier.as_deref(), name)?;
            let scope = &scopes[scopes.len() - 1 - r.depth];
            let rel = scope.items[r.item].1;
            shape.column_refs.push((rel.name.clone(), r.col));
            if ctx == Ctx::Grouped && r.depth == 0 {
                let l = level.expect("grouped context has a level");
                if !l.determined.contains(&(r.item, r.col)) && !l.grouped_items.contains(&r.item) {
                    return Err(format!(
                        "column {} must appear in group by or be used in an aggregate",
                        display_col(qualifier, name)
                    ));
                }
            }
            Ok(rel.columns[r.col].dtype)
        }
        Expr::Literal(v) => match v {
            Value::Unset => Err("unset marker is not a literal".into()),
            other => Ok(other.data_type().unwrap()),
        },
        Expr::Not(inner) => {
            let t = type_of(cat, inner, scopes, shape, ctx, level)?;
            expect_bool(t, "operand of not")?;
            Ok(DataType::Boolean)
        }
        Expr::Neg(inner) => {
            let t = type_of(cat, inner, scopes, shape, ctx, level)?;
            if t != DataType::Integer {
                return Err(format!("operand of unary minus must be integer, found {t}"));
            }
            Ok(DataType::Integer)
        }
        Expr::Binary { op, left, right } => {
            let lt = type_of(cat, left, scopes, shape, ctx, level)?;
            let rt = type_of(cat, right, scopes, shape, ctx, level)?;
            if op.is_logical() {
                expect_bool(lt, "operand of and/or")?;
                expect_bool(rt, "operand of and/or")?;
                Ok(DataType::Boolean)
            } else if op.is_arithmetic() {
                if lt != DataType::Integer || rt != DataType::Integer {
                    return Err(format!("arithmetic '{}' needs integer operands, found {lt} and {rt}", op.symbol()));
                }
                Ok(DataType::Integer)
            } else {
                if lt != rt {
                    return Err(format!("cannot compare {lt} with {rt}"));
                }
                if lt == DataType::Boolean && !matches!(op, BinaryOp::Eq | BinaryOp::Ne) {
                    return Err("booleans only support = and !=".into());
                }
                Ok(DataType::Boolean)
            }
        }
        Expr::InSubquery { expr, query, .. } => {
            let t = type_of(cat, expr, scopes, shape, ctx, level)?;
            let cols = analyze_level(cat, query, scopes, shape)?;
            if cols.len() != 1 {
                return Err(format!("IN subquery must return one column, found {}", cols.len()));
            }
            if cols[0].dtype != t {
                return Err(format!("IN compares {t} with a subquery of {}", cols[0].dtype));
            }
            Ok(DataType::Boolean)
        }
        Expr::Subquery(query) => {
            let cols = analyze_level(cat, query, scopes, shape)?;
            if cols.len() != 1 {
                return Err(format!("scalar subquery must return one column, found {}", cols.len()));
            }
            Ok(cols[0].dtype)
        }
        Expr::Aggregate { func, arg } => {
            match ctx {
                Ctx::Row => return Err(format!("aggregate {} is not allowed here", func.name())),
                Ctx::AggArg => return Err("aggregates cannot be nested".into()),
                Ctx::Grouped | Ctx::Plain => {}
            }
            let t = match arg {
                Some(a) => Some(type_of(cat, a, scopes, shape, Ctx::AggArg, None)?),
                None => None,
            };
            match func {
                AggFunc::Count => Ok(DataType::Integer),
                AggFunc::Sum => match t {
                    Some(DataType::Integer) => Ok(DataType::Integer),
                    other => Err(format!("sum needs an integer argument, found {}", show(other))),
                },
                AggFunc::Min | AggFunc::Max => match t {
                    Some(DataType::Integer) => Ok(DataType::Integer),
                    other => Err(format!("{} needs an integer argument, found {}", func.name(), show(other))),
                },
                AggFunc::AllDifferent => match t {
                    Some(_) => Ok(DataType::Boolean),
                    None => Err("all_different needs an argument".into()),
                },
            }
        }
    }
}

fn show(t: Option<DataType>) -> String {
    t.map(|t| t.to_string()).unwrap_or_else(|| "*".into())
}

fn display_col(q: &Option<String>, name: &str) -> String {
    match q {
        Some(q) => format!("{q}.{name}"),
        None => name.to_string(),
    }
}
