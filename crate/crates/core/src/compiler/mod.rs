//! Turns classified views into a model template, then grounds the template
//! against store contents into a solver model.

mod ground;
pub mod sym;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::error::CompileError;
use crate::ir::{self, anchors, lower_view, split_qualifiers, Comprehension, IrExpr, QualifierSplit, Source};
use crate::relstore::{Delta, Store};
use crate::schema::{Schema, ViewClass};
use crate::solver::{Constraint, Model, VarId, VarKind};
use crate::sqlfront::ast::{AggFunc, BinaryOp};
use crate::sqlfront::{classify_views, parse_program};
use crate::value::{DataType, Value};

/// Parses and classifies a policy program.
pub fn parse_schema(src: &str) -> Result<Schema, CompileError> {
    let (tables, views) = parse_program(src)?;
    classify_views(tables, views)
}

/// Where the values a variable column may take come from.
#[derive(Clone, Debug)]
pub enum UniverseSource {
    /// An input column joined against the variable column.
    Column { source: Source, column: usize },
    /// The values of an `IN` subquery applied to the variable column; the
    /// comprehension's last head column holds the values.
    Lookup(Comprehension),
    /// No join or `IN` mentions the column: the values currently stored in it.
    Present,
}

#[derive(Clone, Debug)]
pub struct VarGroup {
    pub table: String,
    pub column: String,
    pub col: usize,
    pub dtype: DataType,
    pub universe: Vec<UniverseSource>,
}

#[derive(Clone, Debug)]
pub struct ViewTemplate {
    pub name: String,
    pub class: ViewClass,
    pub comp: Comprehension,
    pub split: QualifierSplit,
    pub anchors: Vec<usize>,
}

/// Store-independent compiled form of a schema.
#[derive(Clone, Debug)]
pub struct ModelTemplate {
    pub schema: Schema,
    pub var_groups: Vec<VarGroup>,
    /// Variable-dependent views in dependency order.
    pub views: Vec<ViewTemplate>,
}

impl ModelTemplate {
    pub fn hard(&self) -> impl Iterator<Item = &ViewTemplate> {
        self.views.iter().filter(|v| v.class == ViewClass::Hard)
    }

    pub fn soft(&self) -> impl Iterator<Item = &ViewTemplate> {
        self.views.iter().filter(|v| v.class == ViewClass::Soft)
    }

    pub fn aux(&self) -> impl Iterator<Item = &ViewTemplate> {
        self.views.iter().filter(|v| v.class == ViewClass::Auxiliary)
    }

    pub fn view(&self, name: &str) -> Option<&ViewTemplate> {
        self.views.iter().find(|v| v.name == name)
    }
}

pub fn synthesize(schema: &Schema) -> Result<ModelTemplate, CompileError> {
    let mut views = Vec::new();
    let mut unconditional: HashMap<String, bool> = HashMap::new();
    for def in &schema.views {
        if def.class == ViewClass::Input {
            continue;
        }
        let comp = lower_view(schema, def)?;
        ir::validate(&comp).map_err(|msg| bind_err(&def.name, msg))?;
        check_supported(&comp, &unconditional).map_err(|msg| CompileError::View {
            view: def.name.clone(),
            line: def.line,
            msg,
        })?;
        unconditional.insert(def.name.clone(), rows_unconditional(&comp, &unconditional));
        let split = split_qualifiers(&comp);
        let anchors = anchors(&comp, &split);
        views.push(ViewTemplate {
            name: def.name.clone(),
            class: def.class,
            comp,
            split,
            anchors,
        });
    }
    let mut var_groups = Vec::new();
    for t in &schema.tables {
        for col in t.variable_columns() {
            let mut universe = Vec::new();
            let mut referenced = false;
            for v in &views {
                collect_universe(&v.comp, &t.name, col, &mut universe, &mut referenced);
            }
            if universe.is_empty() {
                if referenced {
                    return Err(CompileError::Schema(format!(
                        "variable column {}.{} has no value domain; join it with an input column or restrict it with IN",
                        t.name, t.columns[col].name
                    )));
                }
                universe.push(UniverseSource::Present);
            }
            var_groups.push(VarGroup {
                table: t.name.clone(),
                column: t.columns[col].name.clone(),
                col,
                dtype: t.columns[col].dtype,
                universe,
            });
        }
    }
    Ok(ModelTemplate {
        schema: schema.clone(),
        var_groups,
        views,
    })
}

fn bind_err(view: &str, msg: impl Into<String>) -> CompileError {
    CompileError::Bind {
        view: view.to_string(),
        msg: msg.into(),
    }
}

fn is_var_col(c: &Comprehension, e: &IrExpr, table: &str, col: usize) -> bool {
    matches!(e, IrExpr::Col { gen, col: c2 }
        if *c2 == col && c.generators[*gen].source == Source::Table(table.to_string()))
}

fn collect_universe(c: &Comprehension, table: &str, col: usize, out: &mut Vec<UniverseSource>, referenced: &mut bool) {
    let mut visit = |e: &IrExpr| {
        walk(e, &mut |e| match e {
            IrExpr::Bin(BinaryOp::Eq, l, r) => {
                for (a, b) in [(l, r), (r, l)] {
                    if is_var_col(c, a, table, col) {
                        if let IrExpr::Col { gen, col: bc } = **b {
                            let g = &c.generators[gen];
                            if !g.columns[bc].variable {
                                out.push(UniverseSource::Column {
                                    source: g.source.clone(),
                                    column: bc,
                                });
                            }
                        }
                    }
                }
            }
            IrExpr::Member { expr, lookup, .. } if is_var_col(c, expr, table, col) => {
                out.push(UniverseSource::Lookup(c.lookups[*lookup].inner.clone()));
            }
            _ => {}
        });
        e.for_each_col(&mut |g, cc| {
            if cc == col && c.generators[g].source == Source::Table(table.to_string()) {
                *referenced = true;
            }
        });
    };
    for q in &c.qualifiers {
        visit(&q.expr);
    }
    for (_, e) in &c.head {
        visit(e);
    }
    if let Some(h) = &c.having {
        visit(h);
    }
}

fn walk(e: &IrExpr, f: &mut impl FnMut(&IrExpr)) {
    f(e);
    match e {
        IrExpr::Not(x) | IrExpr::Neg(x) => walk(x, f),
        IrExpr::Bin(_, l, r) => {
            walk(l, f);
            walk(r, f);
        }
        IrExpr::Agg(_, Some(a)) => walk(a, f),
        IrExpr::Member { expr, keys, .. } => {
            walk(expr, f);
            keys.iter().for_each(|k| walk(k, f));
        }
        IrExpr::Lookup { keys, .. } => keys.iter().for_each(|k| walk(k, f)),
        _ => {}
    }
}

fn reads_variable(c: &Comprehension, e: &IrExpr) -> bool {
    let mut v = false;
    e.for_each_col(&mut |g, col| v |= c.generators[g].columns[col].variable);
    v
}

fn view_gens_unconditional(c: &Comprehension, unconditional: &HashMap<String, bool>) -> bool {
    c.generators.iter().all(|g| match &g.source {
        Source::View(v) => unconditional.get(v).copied().unwrap_or(true),
        Source::Table(_) => true,
    })
}

/// Whether every row of the view exists regardless of the assignment.
/// Groups of an aggregate view exist whenever some binding satisfies its
/// input-only conditions.
fn rows_unconditional(c: &Comprehension, unconditional: &HashMap<String, bool>) -> bool {
    if c.aggregate {
        c.having.as_ref().is_none_or(|h| !reads_variable(c, h))
    } else {
        !c.qualifiers.iter().any(|q| reads_variable(c, &q.expr)) && view_gens_unconditional(c, unconditional)
    }
}

/// Rejects variable-dependent expressions the grounder cannot encode.
fn check_supported(c: &Comprehension, unconditional: &HashMap<String, bool>) -> Result<(), String> {
    let conditional =
        c.qualifiers.iter().any(|q| reads_variable(c, &q.expr)) || !view_gens_unconditional(c, unconditional);
    for k in &c.group_key {
        if reads_variable(c, k) {
            return Err("group by over a variable column is not supported; group by an input column instead".into());
        }
    }
    for k in c.qualifiers.iter().map(|q| &q.expr).chain(c.head.iter().map(|h| &h.1)).chain(c.having.iter()) {
        let mut err = None;
        walk(k, &mut |e| match e {
            IrExpr::Bin(BinaryOp::Mul, l, r) if reads_variable(c, l) && reads_variable(c, r) => {
                err = Some("product of two variable-dependent expressions is not linear".to_string());
            }
            IrExpr::Agg(f, Some(arg)) if reads_variable(c, arg) && conditional => {
                let name = match f {
                    AggFunc::Sum => Some("sum"),
                    AggFunc::Min => Some("min"),
                    AggFunc::Max => Some("max"),
                    AggFunc::AllDifferent => Some("all_different"),
                    AggFunc::Count => None,
                };
                if let Some(name) = name {
                    err = Some(format!(
                        "{name} over a variable-dependent expression needs rows that are present regardless of the assignment"
                    ));
                }
            }
            IrExpr::Member { keys, .. } | IrExpr::Lookup { keys, .. } if keys.iter().any(|k| reads_variable(c, k)) => {
                err = Some("subquery keyed by a variable column".to_string());
            }
            _ => {}
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(())
}

/// Which rows get variables.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Scope {
    /// Only cells that are currently unset.
    #[default]
    Pending,
    /// Every variable cell.
    All,
    /// Every variable cell of the listed (table, primary key) rows.
    Rows(Vec<(String, Value)>),
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Standard,
    /// Pending cells may stay unset and placed cells of rows with lower
    /// priority than some pending row may be reset; the objective minimises
    /// unplaced and evicted rows, higher priorities first. Soft views are
    /// ignored.
    Evict { priority: String },
    /// In-scope cells may change; at most `budget` of them move.
    Migrate { budget: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BindOptions {
    pub rewrites: bool,
    pub scope: Scope,
    pub mode: Mode,
}

impl Default for BindOptions {
    fn default() -> Self {
        BindOptions {
            rewrites: true,
            scope: Scope::Pending,
            mode: Mode::Standard,
        }
    }
}

/// Text values and their small-integer ids.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    ids: HashMap<String, i64>,
    names: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> i64 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        self.names.push(s.to_string());
        let id = self.names.len() as i64 - 1;
        self.ids.insert(s.to_string(), id);
        id
    }

    pub fn get(&self, s: &str) -> Option<i64> {
        self.ids.get(s).copied()
    }

    pub fn name(&self, id: i64) -> Option<&str> {
        usize::try_from(id).ok().and_then(|i| self.names.get(i)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Solver encoding of a value; `None` for unset.
    pub fn encode(&mut self, v: &Value) -> Option<i64> {
        match v {
            Value::Int(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            Value::Text(s) => Some(self.intern(s)),
            Value::Unset => None,
        }
    }
}

/// Values at or above this mark stand for "unset" in evict mode.
pub const UNSET_BASE: i64 = 1 << 40;
/// Sole value of a variable whose column has no possible values.
pub const NO_VALUE: i64 = -(1 << 40);

/// A variable cell of the store represented by a decision variable.
#[derive(Clone, Debug)]
pub struct Cell {
    pub table: String,
    pub row: usize,
    pub row_key: Value,
    pub column: String,
    pub dtype: DataType,
    pub var: VarId,
    pub current: Value,
    /// Value meaning "leave unset", when the cell may end up unset.
    pub unset_value: Option<i64>,
    pub priority: i64,
}

impl Cell {
    pub fn name(&self) -> String {
        format!("{}[{}].{}", self.table, self.row_key, self.column)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct GroundStats {
    pub vars: usize,
    pub decision_vars: usize,
    pub reified_vars: usize,
    /// Optionality auxiliaries introduced by the naive sum encoding.
    pub aux_vars: usize,
    pub tseitin_vars: usize,
    pub defined_vars: usize,
    pub constraints: usize,
    pub constraints_by_kind: BTreeMap<String, usize>,
}

impl GroundStats {
    pub fn of(model: &Model) -> GroundStats {
        let mut by_kind = BTreeMap::new();
        for c in &model.constraints {
            *by_kind.entry(c.kind_name().to_string()).or_insert(0) += 1;
        }
        GroundStats {
            vars: model.vars.len(),
            decision_vars: model.count_kind(VarKind::Decision),
            reified_vars: model.count_kind(VarKind::Reified),
            aux_vars: model.count_kind(VarKind::Option),
            tseitin_vars: model.count_kind(VarKind::Tseitin),
            defined_vars: model.count_kind(VarKind::Defined),
            constraints: model.constraints.len(),
            constraints_by_kind: by_kind,
        }
    }

    pub fn count(&self, kind: &str) -> usize {
        self.constraints_by_kind.get(kind).copied().unwrap_or(0)
    }
}

/// Per-row cost terms of the evict-mode objective.
#[derive(Clone, Debug, Default)]
pub struct EvictCosts {
    /// (cell index, weight when left or made unset).
    pub weights: Vec<(usize, i64)>,
}

/// A model bound to one store snapshot.
#[derive(Clone, Debug)]
pub struct GroundModel {
    pub model: Model,
    pub cells: Vec<Cell>,
    pub interner: Interner,
    pub options: BindOptions,
    pub costs: EvictCosts,
    /// Soft views contributing to the objective.
    pub soft_views: Vec<String>,
}

impl GroundModel {
    pub fn stats(&self) -> GroundStats {
        GroundStats::of(&self.model)
    }

    pub fn decode_value(&self, cell: &Cell, v: i64) -> Value {
        if cell.unset_value == Some(v) || v == NO_VALUE {
            return Value::Unset;
        }
        match cell.dtype {
            DataType::Text => self.interner.name(v).map(Value::text).unwrap_or(Value::Unset),
            DataType::Integer => Value::Int(v),
            DataType::Boolean => Value::Bool(v != 0),
        }
    }

    /// One delta per in-scope cell.
    pub fn deltas(&self, assignment: &[i64]) -> Vec<Delta> {
        self.cells
            .iter()
            .map(|c| Delta {
                table: c.table.clone(),
                row_key: c.row_key.clone(),
                column: c.column.clone(),
                new_value: self.decode_value(c, assignment[c.var]),
            })
            .collect()
    }

    /// Cells that held a value and end up unset.
    pub fn evicted(&self, assignment: &[i64]) -> Vec<&Cell> {
        self.cells
            .iter()
            .filter(|c| !c.current.is_unset() && self.decode_value(c, assignment[c.var]).is_unset())
            .collect()
    }

    /// Cells that were unset and stay unset.
    pub fn unplaced(&self, assignment: &[i64]) -> Vec<&Cell> {
        self.cells
            .iter()
            .filter(|c| c.current.is_unset() && self.decode_value(c, assignment[c.var]).is_unset())
            .collect()
    }

    /// Cells that held a value and end up with a different value.
    pub fn moved(&self, assignment: &[i64]) -> Vec<&Cell> {
        self.cells
            .iter()
            .filter(|c| {
                let new = self.decode_value(c, assignment[c.var]);
                !c.current.is_unset() && !new.is_unset() && new != c.current
            })
            .collect()
    }

    fn show_value(&self, x: VarId, v: i64) -> String {
        if let Some(cell) = self.cells.iter().find(|c| c.var == x) {
            if cell.dtype == DataType::Text {
                return match self.decode_value(cell, v) {
                    Value::Unset => "unset".to_string(),
                    other => other.to_string(),
                };
            }
        }
        v.to_string()
    }

    /// Deterministic listing of variables, constraints and objective.
    pub fn dump(&self) -> String {
        let m = &self.model;
        let mut out = String::new();
        if !self.interner.is_empty() {
            out.push_str("values:");
            for (i, n) in self.interner.names.iter().enumerate() {
                let _ = write!(out, " {i}={n}");
            }
            out.push('\n');
        }
        for (i, v) in m.vars.iter().enumerate() {
            let kind = match v.kind {
                VarKind::Decision => "decision",
                VarKind::Reified => "reified",
                VarKind::Option => "option",
                VarKind::Defined => "defined",
                VarKind::Tseitin => "tseitin",
            };
            let _ = writeln!(out, "var x{i} {kind} {} in {}", v.name, v.domain);
        }
        for (i, (c, o)) in m.constraints.iter().zip(&m.origins).enumerate() {
            let origin = match o.group {
                Some(g) => m.groups[g].to_string(),
                None => format!("{} (definition)", o.view),
            };
            let _ = writeln!(out, "c{i} {}: {}", origin, self.show_constraint(c));
        }
        match m.objective {
            Some(y) => {
                let _ = writeln!(out, "maximize x{y}");
            }
            None => out.push_str("satisfy\n"),
        }
        out
    }

    fn show_constraint(&self, c: &Constraint) -> String {
        use crate::solver::Atom;
        let lin = |l: &crate::solver::Linear| {
            let mut s = String::new();
            for (i, (a, x)) in l.terms.iter().enumerate() {
                if i > 0 {
                    s.push_str(" + ");
                }
                let _ = write!(s, "{a}*x{x}");
            }
            if l.terms.is_empty() {
                s.push('0');
            }
            let _ = write!(s, " {} {}", l.op.symbol(), l.rhs);
            s
        };
        let set = |x: VarId, d: &crate::solver::Domain| {
            let vals: Vec<String> = d.values().take(64).map(|v| self.show_value(x, v)).collect();
            format!("{{{}}}", vals.join(", "))
        };
        let lit = |l: &crate::solver::Lit| if l.positive { format!("x{}", l.var) } else { format!("!x{}", l.var) };
        match c {
            Constraint::Linear(l) => format!("linear {}", lin(l)),
            Constraint::Reified { b, atom } => match atom {
                Atom::Lin(l) => format!("x{b} <-> ({})", lin(l)),
                Atom::In { x, set: s } => format!("x{b} <-> x{x} in {}", set(*x, s)),
            },
            Constraint::Clause(ls) => format!("clause {}", ls.iter().map(lit).collect::<Vec<_>>().join(" | ")),
            Constraint::AllDifferent(xs) => format!(
                "all_different({})",
                xs.iter().map(|x| format!("x{x}")).collect::<Vec<_>>().join(", ")
            ),
            Constraint::Membership { x, set: s, negated } => {
                format!("x{x} {} {}", if *negated { "not in" } else { "in" }, set(*x, s))
            }
            Constraint::MinOf { y, xs } | Constraint::MaxOf { y, xs } => format!(
                "x{y} = {}({})",
                if matches!(c, Constraint::MinOf { .. }) { "min" } else { "max" },
                xs.iter().map(|x| format!("x{x}")).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

/// Grounds the template against the store.
pub fn bind(template: &ModelTemplate, store: &Store, options: &BindOptions) -> Result<GroundModel, CompileError> {
    ground::bind(template, store, options)
}
