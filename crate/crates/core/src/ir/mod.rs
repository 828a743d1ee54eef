//! Comprehension form of view queries: `[head | generators; qualifiers]`.
//! Views are lowered, their subqueries unnested into keyed lookups, and
//! qualifiers split into input-only and variable-dependent parts.

pub mod eval;

use std::fmt;

use crate::error::CompileError;
use crate::schema::{Schema, ViewClass, ViewDef};
use crate::sqlfront::analyze::{expand_projection, query_scope, resolve_column, Catalog, ColInfo, Scope};
use crate::sqlfront::ast::{AggFunc, BinaryOp, Expr, Query};
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Table(String),
    View(String),
}

impl Source {
    pub fn name(&self) -> &str {
        match self {
            Source::Table(n) | Source::View(n) => n,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub binder: String,
    pub source: Source,
    pub columns: Vec<ColInfo>,
    pub primary_key: Option<usize>,
}

impl Generator {
    pub fn has_variables(&self) -> bool {
        self.columns.iter().any(|c| c.variable)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QualOrigin {
    /// Conjunct of the ON clause of the given join.
    On(usize),
    Where,
}

#[derive(Clone, Debug)]
pub struct Qualifier {
    pub expr: IrExpr,
    pub origin: QualOrigin,
    /// The conjunct as written.
    pub ast: Expr,
}

#[derive(Clone, Debug)]
pub enum IrExpr {
    Col { gen: usize, col: usize },
    /// Column of an enclosing comprehension; `depth` 1 is the parent.
    Outer { depth: usize, gen: usize, col: usize },
    Lit(Value),
    Not(Box<IrExpr>),
    Neg(Box<IrExpr>),
    Bin(BinaryOp, Box<IrExpr>, Box<IrExpr>),
    Agg(AggFunc, Option<Box<IrExpr>>),
    InSub { expr: Box<IrExpr>, sub: Box<Comprehension>, negated: bool },
    ScalarSub(Box<Comprehension>),
    /// `expr ∈ S(keys)` where S is lookup `lookup` of the comprehension.
    Member { expr: Box<IrExpr>, lookup: usize, keys: Vec<IrExpr>, negated: bool },
    /// Scalar value of lookup `lookup` at `keys`.
    Lookup { lookup: usize, keys: Vec<IrExpr> },
}

impl IrExpr {
    fn bin(op: BinaryOp, l: IrExpr, r: IrExpr) -> IrExpr {
        IrExpr::Bin(op, Box::new(l), Box::new(r))
    }

    /// Visits every `Col` reference at this level (not inside subqueries).
    pub fn for_each_col(&self, f: &mut impl FnMut(usize, usize)) {
        match self {
            IrExpr::Col { gen, col } => f(*gen, *col),
            IrExpr::Outer { .. } | IrExpr::Lit(_) | IrExpr::ScalarSub(_) => {}
            IrExpr::Not(x) | IrExpr::Neg(x) => x.for_each_col(f),
            IrExpr::Bin(_, l, r) => {
                l.for_each_col(f);
                r.for_each_col(f);
            }
            IrExpr::Agg(_, a) => {
                if let Some(a) = a {
                    a.for_each_col(f)
                }
            }
            IrExpr::InSub { expr, .. } => expr.for_each_col(f),
            IrExpr::Member { expr, keys, .. } => {
                expr.for_each_col(f);
                for k in keys {
                    k.for_each_col(f);
                }
            }
            IrExpr::Lookup { keys, .. } => {
                for k in keys {
                    k.for_each_col(f);
                }
            }
        }
    }

    pub fn generators(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_col(&mut |g, _| out.push(g));
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            IrExpr::Agg(..) => true,
            IrExpr::Not(x) | IrExpr::Neg(x) => x.contains_aggregate(),
            IrExpr::Bin(_, l, r) => l.contains_aggregate() || r.contains_aggregate(),
            IrExpr::Member { expr, .. } | IrExpr::InSub { expr, .. } => expr.contains_aggregate(),
            _ => false,
        }
    }

    fn has_subquery(&self) -> bool {
        match self {
            IrExpr::InSub { .. } | IrExpr::ScalarSub(_) => true,
            IrExpr::Not(x) | IrExpr::Neg(x) => x.has_subquery(),
            IrExpr::Bin(_, l, r) => l.has_subquery() || r.has_subquery(),
            IrExpr::Agg(_, Some(a)) => a.has_subquery(),
            IrExpr::Member { expr, keys, .. } => expr.has_subquery() || keys.iter().any(|k| k.has_subquery()),
            IrExpr::Lookup { keys, .. } => keys.iter().any(|k| k.has_subquery()),
            _ => false,
        }
    }

    fn has_outer(&self, min_depth: usize) -> bool {
        match self {
            IrExpr::Outer { depth, .. } => *depth >= min_depth,
            IrExpr::Not(x) | IrExpr::Neg(x) => x.has_outer(min_depth),
            IrExpr::Bin(_, l, r) => l.has_outer(min_depth) || r.has_outer(min_depth),
            IrExpr::Agg(_, Some(a)) => a.has_outer(min_depth),
            IrExpr::InSub { expr, sub, .. } => expr.has_outer(min_depth) || sub.has_outer(min_depth + 1),
            IrExpr::ScalarSub(sub) => sub.has_outer(min_depth + 1),
            IrExpr::Member { expr, keys, .. } => expr.has_outer(min_depth) || keys.iter().any(|k| k.has_outer(min_depth)),
            IrExpr::Lookup { keys, .. } => keys.iter().any(|k| k.has_outer(min_depth)),
            _ => false,
        }
    }

    fn has_local(&self) -> bool {
        let mut found = false;
        self.for_each_col(&mut |_, _| found = true);
        found
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LookupKind {
    /// Set of values per key, for `IN`.
    Set,
    /// At most one value per key, for scalar subqueries. `default` is the
    /// aggregate applied to an empty input when the key is missing.
    Scalar { default_agg: Option<AggFunc> },
}

/// A subquery over input relations, evaluated once per solve and indexed by
/// its correlation key. The inner head is `keys ++ [value]`.
#[derive(Clone, Debug)]
pub struct LookupPlan {
    pub inner: Comprehension,
    pub key_len: usize,
    pub kind: LookupKind,
}

#[derive(Clone, Debug)]
pub struct Comprehension {
    pub view: String,
    pub head: Vec<(String, IrExpr)>,
    pub generators: Vec<Generator>,
    pub qualifiers: Vec<Qualifier>,
    pub group_key: Vec<IrExpr>,
    pub having: Option<IrExpr>,
    pub aggregate: bool,
    pub lookups: Vec<LookupPlan>,
}

impl Comprehension {
    fn has_outer(&self, min_depth: usize) -> bool {
        self.qualifiers.iter().any(|q| q.expr.has_outer(min_depth))
            || self.head.iter().any(|(_, e)| e.has_outer(min_depth))
            || self.group_key.iter().any(|e| e.has_outer(min_depth))
            || self.having.as_ref().is_some_and(|e| e.has_outer(min_depth))
    }

    pub fn is_grouped(&self) -> bool {
        self.aggregate
    }
}

/// Lowers a classified view into comprehension form without unnesting.
pub fn lower(schema: &Schema, view: &ViewDef) -> Result<Comprehension, CompileError> {
    let cat = catalog(schema);
    let mut scopes = Vec::new();
    lower_query(&cat, &view.query, &view.name, &mut scopes).map_err(|msg| view_err(view, msg))
}

/// Lowers and unnests a view.
pub fn lower_view(schema: &Schema, view: &ViewDef) -> Result<Comprehension, CompileError> {
    let c = lower(schema, view)?;
    unnest(schema, c).map_err(|msg| view_err(view, msg))
}

fn view_err(view: &ViewDef, msg: String) -> CompileError {
    CompileError::View {
        view: view.name.clone(),
        line: view.line,
        msg,
    }
}

pub fn catalog(schema: &Schema) -> Catalog {
    let mut cat = Catalog::from_tables(&schema.tables);
    for v in &schema.views {
        cat.add_view(&v.name, &v.columns, v.variable_dependent);
    }
    cat
}

fn lower_query<'c>(cat: &'c Catalog, q: &Query, view: &str, scopes: &mut Vec<Scope<'c>>) -> Result<Comprehension, String> {
    let full = query_scope(cat, q)?;
    let generators: Vec<Generator> = full
        .items
        .iter()
        .map(|(binder, rel)| Generator {
            binder: binder.clone(),
            source: if rel.is_view {
                Source::View(rel.name.clone())
            } else {
                Source::Table(rel.name.clone())
            },
            columns: rel.columns.clone(),
            primary_key: rel.primary_key,
        })
        .collect();
    let mut qualifiers = Vec::new();
    for (j, join) in q.joins.iter().enumerate() {
        scopes.push(Scope {
            items: full.items[..j + 2].to_vec(),
        });
        let lowered: Result<Vec<_>, String> = join
            .on
            .conjuncts()
            .into_iter()
            .map(|c| Ok((lower_expr(cat, c, view, scopes)?, c.clone())))
            .collect();
        scopes.pop();
        for (expr, ast) in lowered? {
            qualifiers.push(Qualifier {
                expr,
                origin: QualOrigin::On(j),
                ast,
            });
        }
    }
    let projection = expand_projection(q, &full);
    scopes.push(full);
    let rest = (|| -> Result<_, String> {
        let mut quals = Vec::new();
        if let Some(w) = &q.selection {
            for c in w.conjuncts() {
                quals.push(Qualifier {
                    expr: lower_expr(cat, c, view, scopes)?,
                    origin: QualOrigin::Where,
                    ast: c.clone(),
                });
            }
        }
        let group_key = q
            .group_by
            .iter()
            .map(|e| lower_expr(cat, e, view, scopes))
            .collect::<Result<Vec<_>, _>>()?;
        let having = q.having.as_ref().map(|e| lower_expr(cat, e, view, scopes)).transpose()?;
        let head = projection
            .iter()
            .map(|(n, e)| Ok((n.clone(), lower_expr(cat, e, view, scopes)?)))
            .collect::<Result<Vec<_>, String>>()?;
        Ok((quals, group_key, having, head))
    })();
    scopes.pop();
    let (quals, group_key, having, head) = rest?;
    qualifiers.extend(quals);
    Ok(Comprehension {
        view: view.to_string(),
        head,
        generators,
        qualifiers,
        group_key,
        having,
        aggregate: q.is_aggregate(),
        lookups: Vec::new(),
    })
}

fn lower_expr<'c>(cat: &'c Catalog, e: &Expr, view: &str, scopes: &mut Vec<Scope<'c>>) -> Result<IrExpr, String> {
    Ok(match e {
        Expr::Column { qualifier, name } => {
            let r = resolve_column(scopes, qualifier.as_deref(), name)?;
            if r.depth == 0 {
                IrExpr::Col { gen: r.item, col: r.col }
            } else {
                IrExpr::Outer {
                    depth: r.depth,
                    gen: r.item,
                    col: r.col,
                }
            }
        }
        Expr::Literal(v) => IrExpr::Lit(v.clone()),
        Expr::Not(x) => IrExpr::Not(Box::new(lower_expr(cat, x, view, scopes)?)),
        Expr::Neg(x) => IrExpr::Neg(Box::new(lower_expr(cat, x, view, scopes)?)),
        Expr::Binary { op, left, right } => IrExpr::bin(
            op.clone(),
            lower_expr(cat, left, view, scopes)?,
            lower_expr(cat, right, view, scopes)?,
        ),
        Expr::InSubquery { expr, query, negated } => IrExpr::InSub {
            expr: Box::new(lower_expr(cat, expr, view, scopes)?),
            sub: Box::new(lower_query(cat, query, view, scopes)?),
            negated: *negated,
        },
        Expr::Subquery(q) => IrExpr::ScalarSub(Box::new(lower_query(cat, q, view, scopes)?)),
        Expr::Aggregate { func, arg } => IrExpr::Agg(
            *func,
            arg.as_ref().map(|a| lower_expr(cat, a, view, scopes)).transpose()?.map(Box::new),
        ),
    })
}

/// Replaces IN and scalar subqueries by keyed lookups over input relations.
pub fn unnest(schema: &Schema, mut c: Comprehension) -> Result<Comprehension, String> {
    let mut lookups = std::mem::take(&mut c.lookups);
    let mut quals = std::mem::take(&mut c.qualifiers);
    for q in &mut quals {
        q.expr = unnest_expr(schema, &c, q.expr.clone(), &mut lookups)?;
    }
    c.qualifiers = quals;
    let head = std::mem::take(&mut c.head);
    c.head = head
        .into_iter()
        .map(|(n, e)| Ok((n, unnest_expr(schema, &c, e, &mut lookups)?)))
        .collect::<Result<_, String>>()?;
    if let Some(h) = c.having.take() {
        c.having = Some(unnest_expr(schema, &c, h, &mut lookups)?);
    }
    let keys = std::mem::take(&mut c.group_key);
    c.group_key = keys
        .into_iter()
        .map(|e| unnest_expr(schema, &c, e, &mut lookups))
        .collect::<Result<_, _>>()?;
    c.lookups = lookups;
    Ok(c)
}

fn unnest_expr(schema: &Schema, outer: &Comprehension, e: IrExpr, lookups: &mut Vec<LookupPlan>) -> Result<IrExpr, String> {
    Ok(match e {
        IrExpr::Not(x) => IrExpr::Not(Box::new(unnest_expr(schema, outer, *x, lookups)?)),
        IrExpr::Neg(x) => IrExpr::Neg(Box::new(unnest_expr(schema, outer, *x, lookups)?)),
        IrExpr::Bin(op, l, r) => IrExpr::Bin(
            op,
            Box::new(unnest_expr(schema, outer, *l, lookups)?),
            Box::new(unnest_expr(schema, outer, *r, lookups)?),
        ),
        IrExpr::Agg(f, a) => IrExpr::Agg(
            f,
            a.map(|a| unnest_expr(schema, outer, *a, lookups)).transpose()?.map(Box::new),
        ),
        IrExpr::InSub { expr, sub, negated } => {
            let expr = unnest_expr(schema, outer, *expr, lookups)?;
            let (plan, keys) = build_lookup(schema, outer, *sub, LookupKind::Set)?;
            lookups.push(plan);
            IrExpr::Member {
                expr: Box::new(expr),
                lookup: lookups.len() - 1,
                keys,
                negated,
            }
        }
        IrExpr::ScalarSub(sub) => {
            let default_agg = if sub.aggregate && sub.group_key.is_empty() {
                match &sub.head[0].1 {
                    IrExpr::Agg(f, _) => Some(*f),
                    _ => None,
                }
            } else {
                None
            };
            let (plan, keys) = build_lookup(schema, outer, *sub, LookupKind::Scalar { default_agg })?;
            lookups.push(plan);
            IrExpr::Lookup {
                lookup: lookups.len() - 1,
                keys,
            }
        }
        other => other,
    })
}

/// Turns a subquery into a lookup plan plus the outer-side key expressions.
fn build_lookup(
    schema: &Schema,
    outer: &Comprehension,
    sub: Comprehension,
    kind: LookupKind,
) -> Result<(LookupPlan, Vec<IrExpr>), String> {
    let mut sub = unnest(schema, sub)?;
    for g in &sub.generators {
        let var = match &g.source {
            Source::Table(_) => g.has_variables(),
            Source::View(v) => schema.view(v).is_some_and(|v| v.class != ViewClass::Input),
        };
        if var {
            return Err(format!(
                "subquery reads {}, which depends on variable columns; only input relations may appear in subqueries",
                g.source.name()
            ));
        }
    }
    if sub.head.len() != 1 {
        return Err("subquery must return exactly one column".into());
    }
    if sub.has_outer(2) {
        return Err("subquery correlated with a query two levels out is not supported".into());
    }
    let mut inner_keys = Vec::new();
    let mut outer_keys = Vec::new();
    let mut kept = Vec::new();
    for q in std::mem::take(&mut sub.qualifiers) {
        if !q.expr.has_outer(1) {
            kept.push(q);
            continue;
        }
        let IrExpr::Bin(BinaryOp::Eq, l, r) = &q.expr else {
            return Err(format!("correlated subquery condition `{}` must be an equality", q.ast));
        };
        let (inner_side, outer_side) = match (l.has_outer(1), r.has_outer(1)) {
            (false, true) if !r.has_local() => (l, r),
            (true, false) if !l.has_local() => (r, l),
            _ => {
                return Err(format!(
                    "correlated subquery condition `{}` must equate an inner expression with an outer one",
                    q.ast
                ))
            }
        };
        let outer_expr = to_parent(outer_side);
        let mut uses_var = false;
        outer_expr.for_each_col(&mut |g, c| uses_var |= outer.generators[g].columns[c].variable);
        if uses_var {
            return Err(format!(
                "correlated subquery condition `{}` is on a variable column; correlation must use input columns",
                q.ast
            ));
        }
        inner_keys.push((**inner_side).clone());
        outer_keys.push(outer_expr);
    }
    sub.qualifiers = kept;
    if sub.head.iter().any(|(_, e)| e.has_outer(1))
        || sub.group_key.iter().any(|e| e.has_outer(1))
        || sub.having.as_ref().is_some_and(|e| e.has_outer(1))
    {
        return Err("outer columns may only appear in equality conditions of a subquery".into());
    }
    if sub.aggregate && !inner_keys.is_empty() {
        if !sub.group_key.is_empty() || sub.having.is_some() {
            return Err("correlated aggregate subqueries may not use group by or having".into());
        }
        sub.group_key = inner_keys.clone();
    }
    let key_len = inner_keys.len();
    let (name, value) = sub.head.pop().unwrap();
    let mut head: Vec<(String, IrExpr)> = inner_keys
        .into_iter()
        .enumerate()
        .map(|(i, k)| (format!("key{i}"), k))
        .collect();
    head.push((name, value));
    sub.head = head;
    Ok((
        LookupPlan {
            inner: sub,
            key_len,
            kind,
        },
        outer_keys,
    ))
}

fn to_parent(e: &IrExpr) -> IrExpr {
    match e {
        IrExpr::Outer { depth: 1, gen, col } => IrExpr::Col { gen: *gen, col: *col },
        IrExpr::Outer { depth, gen, col } => IrExpr::Outer {
            depth: depth - 1,
            gen: *gen,
            col: *col,
        },
        IrExpr::Not(x) => IrExpr::Not(Box::new(to_parent(x))),
        IrExpr::Neg(x) => IrExpr::Neg(Box::new(to_parent(x))),
        IrExpr::Bin(op, l, r) => IrExpr::bin(op.clone(), to_parent(l), to_parent(r)),
        other => other.clone(),
    }
}

/// Partition of a comprehension's qualifiers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QualifierSplit {
    /// Indices of qualifiers that read only input columns.
    pub static_part: Vec<usize>,
    /// Indices of qualifiers that depend on a decision.
    pub dynamic_part: Vec<usize>,
    /// Per generator: its rows are selected by a decision (joined against a
    /// variable column) rather than ranged over.
    pub decision_bound: Vec<bool>,
}

impl QualifierSplit {
    pub fn is_dynamic(&self, q: usize) -> bool {
        self.dynamic_part.contains(&q)
    }
}

/// A qualifier is dynamic when it reads a variable column or a generator
/// whose row is chosen through a variable column.
pub fn split_qualifiers(c: &Comprehension) -> QualifierSplit {
    let n = c.generators.len();
    let mut dynamic = vec![false; c.qualifiers.len()];
    let mut bound = vec![false; n];
    let reads_var = |e: &IrExpr| {
        let mut v = false;
        e.for_each_col(&mut |g, col| v |= c.generators[g].columns[col].variable);
        v
    };
    for (i, q) in c.qualifiers.iter().enumerate() {
        dynamic[i] = reads_var(&q.expr);
    }
    loop {
        let mut changed = false;
        for (i, q) in c.qualifiers.iter().enumerate() {
            if !dynamic[i] {
                let touches_bound = q.expr.generators().iter().any(|&g| bound[g]);
                if touches_bound {
                    dynamic[i] = true;
                    changed = true;
                }
                continue;
            }
            let mut var_gens = Vec::new();
            q.expr.for_each_col(&mut |g, col| {
                if c.generators[g].columns[col].variable {
                    var_gens.push(g)
                }
            });
            for g in q.expr.generators() {
                if !var_gens.contains(&g) && !c.generators[g].has_variables() && !bound[g] {
                    bound[g] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let static_part = (0..dynamic.len()).filter(|&i| !dynamic[i]).collect();
    let dynamic_part = (0..dynamic.len()).filter(|&i| dynamic[i]).collect();
    QualifierSplit {
        static_part,
        dynamic_part,
        decision_bound: bound,
    }
}

/// Generators whose rows identify one instance of a constraint: for plain
/// views the non-decision-bound generators with variable columns, for
/// grouped views those whose primary key is part of the group key.
pub fn anchors(c: &Comprehension, split: &QualifierSplit) -> Vec<usize> {
    (0..c.generators.len())
        .filter(|&g| {
            let gen = &c.generators[g];
            if !gen.has_variables() || !matches!(gen.source, Source::Table(_)) {
                return false;
            }
            if c.aggregate {
                gen.primary_key.is_some_and(|pk| {
                    c.group_key
                        .iter()
                        .any(|k| matches!(k, IrExpr::Col { gen: kg, col } if *kg == g && *col == pk))
                })
            } else {
                !split.decision_bound[g]
            }
        })
        .collect()
}

/// Checks shapes the compiler cannot handle; called on unnested views.
pub fn validate(c: &Comprehension) -> Result<(), String> {
    for q in &c.qualifiers {
        if q.expr.has_subquery() {
            return Err(format!("subquery in `{}` was not unnested", q.ast));
        }
    }
    Ok(())
}

struct Dump<'a> {
    c: &'a Comprehension,
    e: &'a IrExpr,
}

impl fmt::Display for Dump<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.c;
        let sub = |e| Dump { c, e };
        match self.e {
            IrExpr::Col { gen, col } => {
                let g = &c.generators[*gen];
                write!(f, "{}.{}", g.binder, g.columns[*col].name)
            }
            IrExpr::Outer { depth, gen, col } => write!(f, "outer{depth}[{gen}].{col}"),
            IrExpr::Lit(Value::Text(s)) => write!(f, "'{s}'"),
            IrExpr::Lit(v) => write!(f, "{v}"),
            IrExpr::Not(x) => write!(f, "not {}", sub(x)),
            IrExpr::Neg(x) => write!(f, "-{}", sub(x)),
            IrExpr::Bin(op, l, r) => write!(f, "({} {} {})", sub(l), op.symbol(), sub(r)),
            IrExpr::Agg(func, None) => write!(f, "{}(*)", func.name()),
            IrExpr::Agg(func, Some(a)) => write!(f, "{}({})", func.name(), sub(a)),
            IrExpr::InSub { expr, sub: s, negated } => {
                let op = if *negated { "∉" } else { "∈" };
                write!(f, "{} {op} {}", sub(expr), s)
            }
            IrExpr::ScalarSub(s) => write!(f, "{s}"),
            IrExpr::Member {
                expr,
                lookup,
                keys,
                negated,
            } => {
                let op = if *negated { "∉" } else { "∈" };
                write!(f, "{} {op} S{lookup}(", sub(expr))?;
                for (i, k) in keys.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", sub(k))?;
                }
                f.write_str(")")
            }
            IrExpr::Lookup { lookup, keys } => {
                write!(f, "V{lookup}(")?;
                for (i, k) in keys.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", sub(k))?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Comprehension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (_, e)) in self.head.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", Dump { c: self, e })?;
        }
        f.write_str(" | ")?;
        for (i, g) in self.generators.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} ← {}", g.binder, g.source.name())?;
        }
        if !self.qualifiers.is_empty() {
            f.write_str("; ")?;
            for (i, q) in self.qualifiers.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", Dump { c: self, e: &q.expr })?;
            }
        }
        if !self.group_key.is_empty() {
            f.write_str("; group by ")?;
            for (i, e) in self.group_key.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", Dump { c: self, e })?;
            }
        }
        if let Some(h) = &self.having {
            write!(f, "; having {}", Dump { c: self, e: h })?;
        }
        f.write_str("]")?;
        for (i, l) in self.lookups.iter().enumerate() {
            let kind = if l.kind == LookupKind::Set { "S" } else { "V" };
            write!(f, "\n  where {kind}{i} = {}", l.inner)?;
        }
        Ok(())
    }
}
