//! Symbolic evaluation of view comprehensions over store rows whose
//! variable cells are solver variables.

use std::collections::HashMap;
use std::rc::Rc;

use super::sym::{Formula, LinExpr, Overflow, Sym};
use super::{
    bind_err, BindOptions, Cell, EvictCosts, GroundModel, Interner, Mode, ModelTemplate, Scope, UniverseSource,
    ViewTemplate, NO_VALUE, UNSET_BASE,
};
use crate::error::CompileError;
use crate::ir::eval::{ConcreteEval, LookupTable};
use crate::ir::{IrExpr, QualOrigin, Source};
use crate::relstore::eval::{aggregate, binary};
use crate::relstore::Store;
use crate::schema::ViewClass;
use crate::solver::{Atom, Constraint, Domain, Group, GroupId, LinOp, Linear, Lit, Model, Origin, VarId, VarKind};
use crate::sqlfront::ast::{AggFunc, BinaryOp};
use crate::value::{DataType, Value};

type Row = Vec<Sym>;

#[derive(Clone)]
struct Rows {
    rows: Rc<Vec<Row>>,
    /// Existence condition per row, for rows of variable-dependent views.
    exist: Option<Rc<Vec<Formula>>>,
}

struct AtomEntry {
    atom: Atom,
    var: Option<VarId>,
}

struct UnitBuf {
    origin: Origin,
    x: VarId,
    allowed: Domain,
}

#[derive(Default, Clone)]
struct RowState {
    /// Some variable cell is unset and not in scope.
    unset_const: bool,
    /// (variable, value meaning unset) for cells that may end up unset.
    guards: Vec<(VarId, i64)>,
}

struct GroupData {
    key: Vec<Value>,
    first: Option<Vec<usize>>,
    members: Vec<(Formula, Vec<usize>)>,
}

type Res<T> = Result<T, String>;

fn overflow(_: Overflow) -> String {
    "integer overflow".to_string()
}

struct Grounder<'a> {
    tpl: &'a ModelTemplate,
    rewrites: bool,
    eval: ConcreteEval<'a>,
    model: Model,
    interner: Interner,
    atoms: Vec<AtomEntry>,
    atom_index: HashMap<Atom, usize>,
    tseitin: HashMap<Formula, VarId>,
    units: Vec<UnitBuf>,
    unit_index: HashMap<(GroupId, VarId), usize>,
    group_index: HashMap<Group, GroupId>,
    view: String,
    tables: HashMap<String, Rows>,
    views: HashMap<String, Rows>,
    row_state: HashMap<(usize, usize), RowState>,
    soft: Vec<(String, Sym)>,
}

pub(super) fn bind(tpl: &ModelTemplate, store: &Store, opts: &BindOptions) -> Result<GroundModel, CompileError> {
    let schema = &tpl.schema;
    for t in &schema.tables {
        if store.relation(&t.name).is_none_or(|r| r.def != *t) {
            return Err(CompileError::Schema(format!("store table {} does not match the schema", t.name)));
        }
    }
    let mut g = Grounder {
        tpl,
        rewrites: opts.rewrites,
        eval: ConcreteEval::new(schema, store),
        model: Model::new(),
        interner: Interner::default(),
        atoms: Vec::new(),
        atom_index: HashMap::new(),
        tseitin: HashMap::new(),
        units: Vec::new(),
        unit_index: HashMap::new(),
        group_index: HashMap::new(),
        view: String::new(),
        tables: HashMap::new(),
        views: HashMap::new(),
        row_state: HashMap::new(),
        soft: Vec::new(),
    };
    let cells = g.make_cells(store, opts).map_err(CompileError::Schema)?;
    let evict = matches!(opts.mode, Mode::Evict { .. });
    for vt in &tpl.views {
        if evict && vt.class == ViewClass::Soft {
            continue;
        }
        g.view = vt.name.clone();
        g.ground_view(vt).map_err(|msg| bind_err(&vt.name, msg))?;
        g.flush_units();
    }
    let costs = g.objective(&cells, opts).map_err(|msg| bind_err("objective", msg))?;
    let soft_views = g.soft.iter().map(|(n, _)| n.clone()).collect();
    Ok(GroundModel {
        model: g.model,
        cells,
        interner: g.interner,
        options: opts.clone(),
        costs,
        soft_views,
    })
}

impl<'a> Grounder<'a> {
    fn definition(&self) -> Origin {
        Origin {
            view: self.view.clone(),
            group: None,
        }
    }

    fn group(&mut self, view: &str, keys: Vec<Value>) -> GroupId {
        let g = Group {
            view: view.to_string(),
            keys,
        };
        if let Some(&id) = self.group_index.get(&g) {
            return id;
        }
        self.model.groups.push(g.clone());
        let id = self.model.groups.len() - 1;
        self.group_index.insert(g, id);
        id
    }

    /// Value universes, decision variables and symbolic table rows.
    fn make_cells(&mut self, store: &Store, opts: &BindOptions) -> Res<Vec<Cell>> {
        let schema = &self.tpl.schema;
        let mut universes: HashMap<(String, usize), Domain> = HashMap::new();
        for vg in &self.tpl.var_groups {
            let mut vals = Vec::new();
            for src in &vg.universe {
                match src {
                    UniverseSource::Column { source, column } => {
                        for r in self.eval.source_rows(source)?.iter() {
                            vals.push(r[*column].clone());
                        }
                    }
                    UniverseSource::Lookup(c) => {
                        for r in self.eval.eval(c)? {
                            vals.push(r.last().cloned().unwrap_or(Value::Unset));
                        }
                    }
                    UniverseSource::Present => {
                        for r in store.relation(&vg.table).unwrap().rows() {
                            vals.push(r[vg.col].clone());
                        }
                    }
                }
            }
            let ids: Vec<i64> = vals
                .iter()
                .filter(|v| v.data_type() == Some(vg.dtype))
                .filter_map(|v| self.interner.encode(v))
                .collect();
            universes.insert((vg.table.clone(), vg.col), Domain::from_values(ids));
        }

        let mut cells = Vec::new();
        for (tpos, t) in schema.tables.iter().enumerate() {
            let rel = store.relation(&t.name).unwrap();
            let mut rows: Vec<Row> = rel
                .rows()
                .iter()
                .map(|r| r.iter().cloned().map(Sym::Val).collect())
                .collect();
            if !t.has_variables() {
                self.tables.insert(t.name.clone(), Rows { rows: Rc::new(rows), exist: None });
                continue;
            }
            let prio_col = match &opts.mode {
                Mode::Evict { priority } => t.column_index(priority),
                _ => None,
            };
            let prio = |r: &[Value]| prio_col.and_then(|c| r[c].as_int()).unwrap_or(0);
            let var_cols: Vec<usize> = t.variable_columns().collect();
            let max_pending = rel
                .rows()
                .iter()
                .filter(|r| var_cols.iter().any(|&c| r[c].is_unset()))
                .map(|r| prio(r))
                .max();
            let listed: Vec<&Value> = match &opts.scope {
                Scope::Rows(rs) => rs.iter().filter(|(tn, _)| *tn == t.name).map(|(_, k)| k).collect(),
                _ => Vec::new(),
            };
            for (i, r) in rel.rows().iter().enumerate() {
                let key = rel.row_key(i);
                let mut state = RowState::default();
                for &c in &var_cols {
                    let current = r[c].clone();
                    let (in_scope, may_unset) = match &opts.mode {
                        Mode::Evict { .. } => {
                            let evictable = !current.is_unset() && max_pending.is_some_and(|m| prio(r) < m);
                            (current.is_unset() || evictable, true)
                        }
                        _ => {
                            let s = match &opts.scope {
                                Scope::Pending => current.is_unset(),
                                Scope::All => true,
                                Scope::Rows(_) => listed.contains(&&key),
                            };
                            (s, false)
                        }
                    };
                    if !in_scope {
                        state.unset_const |= current.is_unset();
                        continue;
                    }
                    let universe = universes[&(t.name.clone(), c)].clone();
                    let unset_value = (may_unset && t.columns[c].dtype == DataType::Text).then(|| UNSET_BASE + cells.len() as i64);
                    let mut domain = match (&opts.mode, unset_value) {
                        (Mode::Evict { .. }, Some(_)) if !current.is_unset() => {
                            Domain::from_values(self.interner.encode(&current))
                        }
                        _ => universe.clone(),
                    };
                    if let Some(u) = unset_value {
                        domain = domain.union(&Domain::singleton(u));
                    }
                    let empty = domain.is_empty();
                    if empty {
                        domain = Domain::singleton(NO_VALUE);
                    }
                    let cell = Cell {
                        table: t.name.clone(),
                        row: i,
                        row_key: key.clone(),
                        column: t.columns[c].name.clone(),
                        dtype: t.columns[c].dtype,
                        var: 0,
                        current,
                        unset_value,
                        priority: prio(r),
                    };
                    let x = self.model.new_var(domain, VarKind::Decision, cell.name());
                    if empty {
                        let g = self.group("empty domain", vec![Value::text(format!("{}.{}", t.name, cell.column)), key.clone()]);
                        self.model.post(
                            Constraint::Membership {
                                x,
                                set: Domain::empty(),
                                negated: false,
                            },
                            Origin {
                                view: "empty domain".into(),
                                group: Some(g),
                            },
                        );
                    }
                    if let Some(u) = unset_value {
                        state.guards.push((x, u));
                    }
                    rows[i][c] = Sym::Lin(LinExpr::var(x), cell.dtype);
                    cells.push(Cell { var: x, ..cell });
                }
                if state.unset_const || !state.guards.is_empty() {
                    self.row_state.insert((tpos, i), state);
                }
            }
            self.tables.insert(t.name.clone(), Rows { rows: Rc::new(rows), exist: None });
        }
        Ok(cells)
    }

    fn rows_of(&mut self, source: &Source) -> Res<Rows> {
        match source {
            Source::Table(t) => self.tables.get(t).cloned().ok_or_else(|| format!("unknown table {t}")),
            Source::View(v) => {
                if let Some(r) = self.views.get(v) {
                    return Ok(r.clone());
                }
                let rows = self.eval.view_rows(v)?;
                let r = Rows {
                    rows: Rc::new(rows.iter().map(|r| r.iter().cloned().map(Sym::Val).collect()).collect()),
                    exist: None,
                };
                self.views.insert(v.clone(), r.clone());
                Ok(r)
            }
        }
    }

    fn ground_view(&mut self, vt: &ViewTemplate) -> Res<()> {
        let c = &vt.comp;
        let lookups = self.eval.build_lookups(c)?;
        let sources: Vec<Rows> = c
            .generators
            .iter()
            .map(|g| self.rows_of(&g.source))
            .collect::<Res<_>>()?;
        let bindings = self.static_bindings(vt, &sources, &lookups)?;
        match vt.class {
            ViewClass::Hard if c.aggregate => self.hard_grouped(vt, &sources, &bindings, &lookups),
            ViewClass::Hard => self.hard_plain(vt, &sources, &bindings, &lookups),
            ViewClass::Soft => {
                let groups = self.groups(vt, &sources, &bindings, &lookups)?;
                let g = groups.first().ok_or("soft constraint produced no row")?;
                let v = self.sym_group(&c.head[0].1, g, &sources, &lookups)?;
                self.soft.push((vt.name.clone(), v));
                Ok(())
            }
            ViewClass::Auxiliary => {
                let rows = if c.aggregate {
                    let groups = self.groups(vt, &sources, &bindings, &lookups)?;
                    let mut rows = Vec::new();
                    let mut exist = Vec::new();
                    for g in &groups {
                        let mut row = Vec::new();
                        for (_, e) in &c.head {
                            row.push(self.sym_group(e, g, &sources, &lookups)?);
                        }
                        let e = match &c.having {
                            Some(h) => {
                                let s = self.sym_group(h, g, &sources, &lookups)?;
                                self.formula(s)?
                            }
                            None => Formula::Const(true),
                        };
                        if e != Formula::Const(false) {
                            rows.push(row);
                            exist.push(e);
                        }
                    }
                    Rows {
                        rows: Rc::new(rows),
                        exist: Some(Rc::new(exist)),
                    }
                } else {
                    let mut rows = Vec::new();
                    let mut exist = Vec::new();
                    for b in &bindings {
                        let row = row_of(&sources, b);
                        let mut conds = self.exists(&sources, b);
                        for &q in &vt.split.dynamic_part {
                            let s = self.sym_row(&c.qualifiers[q].expr, &row, &lookups)?;
                            conds.push(self.formula(s)?);
                        }
                        let e = Formula::and(conds);
                        if e == Formula::Const(false) {
                            continue;
                        }
                        let mut out = Vec::new();
                        for (_, h) in &c.head {
                            out.push(self.sym_row(h, &row, &lookups)?);
                        }
                        rows.push(out);
                        exist.push(e);
                    }
                    Rows {
                        rows: Rc::new(rows),
                        exist: Some(Rc::new(exist)),
                    }
                };
                self.views.insert(vt.name.clone(), rows);
                Ok(())
            }
            ViewClass::Input => Ok(()),
        }
    }

    /// Bindings that satisfy every input-only qualifier.
    fn static_bindings(&mut self, vt: &ViewTemplate, sources: &[Rows], lookups: &[LookupTable]) -> Res<Vec<Vec<usize>>> {
        let c = &vt.comp;
        let n = c.generators.len();
        let mut checks: Vec<Vec<usize>> = vec![Vec::new(); n.max(1)];
        let mut probes: Vec<Option<(usize, IrExpr)>> = vec![None; n.max(1)];
        for &q in &vt.split.static_part {
            let e = &c.qualifiers[q].expr;
            let level = e.generators().last().copied().unwrap_or(0);
            checks[level].push(q);
            if probes[level].is_some() || level == 0 {
                continue;
            }
            if let IrExpr::Bin(BinaryOp::Eq, l, r) = e {
                for (a, b) in [(l, r), (r, l)] {
                    if let IrExpr::Col { gen, col } = **a {
                        if gen == level && b.generators().iter().all(|&g| g < level) && !b.contains_aggregate() {
                            probes[level] = Some((col, (**b).clone()));
                            break;
                        }
                    }
                }
            }
        }
        let mut indexes: Vec<Option<HashMap<Value, Vec<usize>>>> = vec![None; n];
        for g in 0..n {
            if let Some((col, _)) = &probes[g] {
                let mut m: HashMap<Value, Vec<usize>> = HashMap::new();
                for (i, r) in sources[g].rows.iter().enumerate() {
                    if let Sym::Val(v) = &r[*col] {
                        m.entry(v.clone()).or_default().push(i);
                    }
                }
                indexes[g] = Some(m);
            }
        }
        let mut out = Vec::new();
        let mut binding = Vec::with_capacity(n);
        self.enumerate(c, sources, lookups, &checks, &probes, &indexes, &mut binding, &mut out)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &mut self,
        c: &crate::ir::Comprehension,
        sources: &[Rows],
        lookups: &[LookupTable],
        checks: &[Vec<usize>],
        probes: &[Option<(usize, IrExpr)>],
        indexes: &[Option<HashMap<Value, Vec<usize>>>],
        binding: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Res<()> {
        let level = binding.len();
        if level == sources.len() {
            out.push(binding.clone());
            return Ok(());
        }
        let candidates: Vec<usize> = match (&probes[level], &indexes[level]) {
            (Some((_, key)), Some(idx)) => {
                let row = row_of(sources, binding);
                match self.sym_row(key, &row, lookups)? {
                    Sym::Val(k) if !k.is_unset() => idx.get(&k).cloned().unwrap_or_default(),
                    Sym::Val(_) => Vec::new(),
                    _ => return Err("probe key depends on a variable".into()),
                }
            }
            _ => (0..sources[level].rows.len()).collect(),
        };
        'rows: for r in candidates {
            binding.push(r);
            let row = row_of(sources, binding);
            for &q in &checks[level] {
                match self.sym_row(&c.qualifiers[q].expr, &row, lookups)? {
                    Sym::Val(Value::Bool(true)) => {}
                    Sym::Val(_) => {
                        binding.pop();
                        continue 'rows;
                    }
                    _ => return Err(format!("condition `{}` unexpectedly depends on a variable", c.qualifiers[q].ast)),
                }
            }
            self.enumerate(c, sources, lookups, checks, probes, indexes, binding, out)?;
            binding.pop();
        }
        Ok(())
    }

    fn exists(&self, sources: &[Rows], b: &[usize]) -> Vec<Formula> {
        sources
            .iter()
            .zip(b)
            .filter_map(|(s, &i)| s.exist.as_ref().map(|e| e[i].clone()))
            .collect()
    }

    /// Anchor exemption: `None` when some anchor row has an unset cell that
    /// is not being decided, else the guards of cells that may become unset.
    fn anchor_guards(&mut self, vt: &ViewTemplate, b: &[usize]) -> Option<Vec<Formula>> {
        let mut guards = Vec::new();
        for &g in &vt.anchors {
            let Source::Table(t) = &vt.comp.generators[g].source else { continue };
            let tpos = self.tpl.schema.table_position(t).unwrap();
            if let Some(st) = self.row_state.get(&(tpos, b[g])) {
                if st.unset_const {
                    return None;
                }
                guards.extend(st.guards.iter().map(|&(x, u)| (x, u)));
            }
        }
        let mut out = Vec::new();
        for (x, u) in guards {
            out.push(self.atom_eq_const(x, u));
        }
        Some(out)
    }

    fn anchor_keys(&self, vt: &ViewTemplate, sources: &[Rows], b: &[usize]) -> Vec<Value> {
        vt.anchors
            .iter()
            .filter_map(|&g| {
                let pk = vt.comp.generators[g].primary_key?;
                match &sources[g].rows[b[g]][pk] {
                    Sym::Val(v) => Some(v.clone()),
                    _ => None,
                }
            })
            .collect()
    }

    fn hard_plain(&mut self, vt: &ViewTemplate, sources: &[Rows], bindings: &[Vec<usize>], lookups: &[LookupTable]) -> Res<()> {
        let c = &vt.comp;
        'bindings: for b in bindings {
            let Some(guards) = self.anchor_guards(vt, b) else { continue };
            let row = row_of(sources, b);
            let mut ante = self.exists(sources, b);
            let mut cons = Vec::new();
            for &q in &vt.split.dynamic_part {
                let s = self.sym_row(&c.qualifiers[q].expr, &row, lookups)?;
                let f = self.formula(s)?;
                match c.qualifiers[q].origin {
                    QualOrigin::On(_) => {
                        if f == Formula::Const(false) {
                            continue 'bindings;
                        }
                        ante.push(f);
                    }
                    QualOrigin::Where => cons.push(f),
                }
            }
            let mut parts = vec![Formula::and(ante).not(), Formula::and(cons)];
            parts.extend(guards);
            let f = Formula::or(parts);
            if f == Formula::Const(true) {
                continue;
            }
            let keys = self.anchor_keys(vt, sources, b);
            let g = self.group(&vt.name, keys);
            self.assert(f, Origin {
                view: vt.name.clone(),
                group: Some(g),
            })?;
        }
        Ok(())
    }

    fn groups(&mut self, vt: &ViewTemplate, sources: &[Rows], bindings: &[Vec<usize>], lookups: &[LookupTable]) -> Res<Vec<GroupData>> {
        let c = &vt.comp;
        let mut groups: Vec<GroupData> = Vec::new();
        let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
        for b in bindings {
            let row = row_of(sources, b);
            let mut key = Vec::with_capacity(c.group_key.len());
            for k in &c.group_key {
                match self.sym_row(k, &row, lookups)? {
                    Sym::Val(v) => key.push(v),
                    _ => return Err("group key depends on a variable".into()),
                }
            }
            let mut conds = self.exists(sources, b);
            for &q in &vt.split.dynamic_part {
                let s = self.sym_row(&c.qualifiers[q].expr, &row, lookups)?;
                conds.push(self.formula(s)?);
            }
            let member = Formula::and(conds);
            let gi = *index.entry(key.clone()).or_insert_with(|| {
                groups.push(GroupData {
                    key,
                    first: Some(b.clone()),
                    members: Vec::new(),
                });
                groups.len() - 1
            });
            if member != Formula::Const(false) {
                groups[gi].members.push((member, b.clone()));
            }
        }
        if groups.is_empty() && c.group_key.is_empty() {
            groups.push(GroupData {
                key: Vec::new(),
                first: None,
                members: Vec::new(),
            });
        }
        Ok(groups)
    }

    fn hard_grouped(&mut self, vt: &ViewTemplate, sources: &[Rows], bindings: &[Vec<usize>], lookups: &[LookupTable]) -> Res<()> {
        let c = &vt.comp;
        let def = self.tpl.schema.view(&vt.name).unwrap();
        let groups = self.groups(vt, sources, bindings, lookups)?;
        for g in &groups {
            let guards = match &g.first {
                Some(b) => match self.anchor_guards(vt, b) {
                    Some(gs) => gs,
                    None => continue,
                },
                None => Vec::new(),
            };
            let gid = self.group(&vt.name, g.key.clone());
            let origin = Origin {
                view: vt.name.clone(),
                group: Some(gid),
            };
            let mut parts = Vec::new();
            if let Some(h) = &c.having {
                let s = self.sym_group(h, g, sources, lookups)?;
                parts.push(self.formula(s)?);
            }
            for (i, (_, e)) in c.head.iter().enumerate() {
                if def.columns.get(i).is_none_or(|col| col.dtype != DataType::Boolean) {
                    continue;
                }
                match self.sym_group(e, g, sources, lookups)? {
                    Sym::AllDiff { vars, consts } => self.assert_all_different(vars, consts, origin.clone())?,
                    s => parts.push(self.formula(s)?),
                }
            }
            let mut all = vec![Formula::and(parts)];
            all.extend(guards);
            let f = Formula::or(all);
            self.assert(f, origin)?;
        }
        Ok(())
    }

    fn sym_group(&mut self, e: &IrExpr, g: &GroupData, sources: &[Rows], lookups: &[LookupTable]) -> Res<Sym> {
        match e {
            IrExpr::Agg(f, arg) => {
                let mut items = Vec::with_capacity(g.members.len());
                for (m, b) in &g.members {
                    let v = match arg {
                        Some(a) => Some(self.sym_row(a, &row_of(sources, b), lookups)?),
                        None => None,
                    };
                    items.push((m.clone(), v));
                }
                self.aggregate(*f, items)
            }
            IrExpr::Not(x) => {
                let s = self.sym_group(x, g, sources, lookups)?;
                self.not(s)
            }
            IrExpr::Neg(x) => {
                let s = self.sym_group(x, g, sources, lookups)?;
                self.neg(s)
            }
            IrExpr::Bin(op, l, r) => {
                let a = self.sym_group(l, g, sources, lookups)?;
                let b = self.sym_group(r, g, sources, lookups)?;
                self.apply_bin(op, a, b)
            }
            IrExpr::Lit(v) => Ok(Sym::Val(v.clone())),
            other => match &g.first {
                Some(b) => self.sym_row(other, &row_of(sources, b), lookups),
                None => Ok(Sym::Val(Value::Unset)),
            },
        }
    }

    fn aggregate(&mut self, f: AggFunc, items: Vec<(Formula, Option<Sym>)>) -> Res<Sym> {
        match f {
            AggFunc::Count | AggFunc::Sum => {
                let mut lin = LinExpr::constant(0);
                for (m, v) in items {
                    match (f, v) {
                        (_, Some(Sym::Val(Value::Unset))) => {}
                        (AggFunc::Count, _) => self.sum_term(&mut lin, &m, 1)?,
                        (_, Some(Sym::Val(Value::Int(t)))) => self.sum_term(&mut lin, &m, t)?,
                        (_, Some(Sym::Lin(e, DataType::Integer))) => match m {
                            Formula::Const(true) => lin = lin.add(&e).map_err(overflow)?,
                            Formula::Const(false) => {}
                            _ => return Err("sum of a variable-dependent expression over rows whose presence depends on variables".into()),
                        },
                        _ => return Err("sum over a non-integer expression".into()),
                    }
                }
                Ok(if lin.terms.is_empty() {
                    Sym::Val(Value::Int(lin.constant))
                } else {
                    Sym::Lin(lin, DataType::Integer)
                })
            }
            AggFunc::Min | AggFunc::Max | AggFunc::AllDifferent => {
                let mut consts = Vec::new();
                let mut vars = Vec::new();
                let mut dtype = DataType::Integer;
                for (m, v) in items {
                    match m {
                        Formula::Const(true) => {}
                        Formula::Const(false) => continue,
                        _ => return Err(format!("{} over rows whose presence depends on variables", f.name())),
                    }
                    match v {
                        Some(Sym::Val(Value::Unset)) | None => {}
                        Some(Sym::Val(val)) => consts.push(val),
                        Some(Sym::Lin(e, dt)) => {
                            dtype = dt;
                            vars.push(self.define(&e)?);
                        }
                        Some(_) => return Err(format!("{} over a boolean expression", f.name())),
                    }
                }
                if vars.is_empty() {
                    return aggregate(f, false, consts).map(Sym::Val);
                }
                if f == AggFunc::AllDifferent {
                    let consts = consts.iter().filter_map(|v| self.interner.encode(v)).collect();
                    return Ok(Sym::AllDiff { vars, consts });
                }
                if dtype != DataType::Integer {
                    return Err(format!("{} over a variable text column", f.name()));
                }
                if let Some(Value::Int(k)) = aggregate(f, false, consts)? .into() {
                    let kv = self.model.new_var(Domain::singleton(k), VarKind::Defined, format!("const {k}"));
                    vars.push(kv);
                }
                let is_min = f == AggFunc::Min;
                let lbs = vars.iter().map(|&x| self.model.vars[x].domain.lb());
                let ubs = vars.iter().map(|&x| self.model.vars[x].domain.ub());
                let (lo, hi) = if is_min {
                    (lbs.min().unwrap(), ubs.min().unwrap())
                } else {
                    (lbs.max().unwrap(), ubs.max().unwrap())
                };
                let y = self.model.new_var(Domain::range(lo, hi), VarKind::Defined, format!("{}({} values)", f.name(), vars.len()));
                let c = if is_min {
                    Constraint::MinOf { y, xs: vars }
                } else {
                    Constraint::MaxOf { y, xs: vars }
                };
                self.model.post(c, self.definition());
                Ok(Sym::Lin(LinExpr::var(y), DataType::Integer))
            }
        }
    }

    /// Adds `t·[m]` to `lin`.
    fn sum_term(&mut self, lin: &mut LinExpr, m: &Formula, t: i64) -> Res<()> {
        if t == 0 {
            return Ok(());
        }
        match m {
            Formula::Const(true) => return lin.add_constant(t).map_err(overflow),
            Formula::Const(false) => return Ok(()),
            _ => {}
        }
        let l = self.lit(m)?;
        if self.rewrites {
            if l.positive {
                lin.add_term(t, l.var).map_err(overflow)?;
            } else {
                lin.add_constant(t).map_err(overflow)?;
                lin.add_term(-t, l.var).map_err(overflow)?;
            }
        } else {
            let o = self.model.new_var(Domain::from_values([0, t]), VarKind::Option, format!("opt x{}", l.var));
            let (terms, rhs) = if l.positive {
                (vec![(1, o), (-t, l.var)], 0)
            } else {
                (vec![(1, o), (t, l.var)], t)
            };
            self.model.post(Constraint::Linear(Linear::new(terms, LinOp::Eq, rhs)), self.definition());
            lin.add_term(1, o).map_err(overflow)?;
        }
        Ok(())
    }

    /// A variable equal to `e`.
    fn define(&mut self, e: &LinExpr) -> Res<VarId> {
        if let Some(x) = e.single_var() {
            return Ok(x);
        }
        let (lo, hi) = self.bounds(&e.terms);
        let lo = lo + e.constant as i128;
        let hi = hi + e.constant as i128;
        let lo = i64::try_from(lo).map_err(|_| "integer overflow".to_string())?;
        let hi = i64::try_from(hi).map_err(|_| "integer overflow".to_string())?;
        let y = self.model.new_var(Domain::range(lo, hi), VarKind::Defined, format!("expr over {} vars", e.terms.len()));
        let mut terms = e.terms.clone();
        terms.push((-1, y));
        let rhs = e.constant.checked_neg().ok_or("integer overflow")?;
        self.model.post(Constraint::Linear(Linear::new(terms, LinOp::Eq, rhs)), self.definition());
        Ok(y)
    }

    fn bounds(&self, terms: &[(i64, VarId)]) -> (i128, i128) {
        let mut lo = 0i128;
        let mut hi = 0i128;
        for &(a, x) in terms {
            let d = &self.model.vars[x].domain;
            let (l, h) = (a as i128 * d.lb() as i128, a as i128 * d.ub() as i128);
            lo += l.min(h);
            hi += l.max(h);
        }
        (lo, hi)
    }

    fn sym_row(&mut self, e: &IrExpr, row: &[&[Sym]], lookups: &[LookupTable]) -> Res<Sym> {
        match e {
            IrExpr::Col { gen, col } => Ok(row[*gen][*col].clone()),
            IrExpr::Lit(v) => Ok(Sym::Val(v.clone())),
            IrExpr::Not(x) => {
                let s = self.sym_row(x, row, lookups)?;
                self.not(s)
            }
            IrExpr::Neg(x) => {
                let s = self.sym_row(x, row, lookups)?;
                self.neg(s)
            }
            IrExpr::Bin(op, l, r) => {
                let a = self.sym_row(l, row, lookups)?;
                match (op, &a) {
                    (BinaryOp::And, Sym::Val(v)) if *v != Value::Bool(true) => return Ok(Sym::Val(Value::Bool(false))),
                    (BinaryOp::Or, Sym::Val(Value::Bool(true))) => return Ok(a),
                    _ => {}
                }
                let b = self.sym_row(r, row, lookups)?;
                self.apply_bin(op, a, b)
            }
            IrExpr::Member {
                expr,
                lookup,
                keys,
                negated,
            } => {
                let mut key = Vec::with_capacity(keys.len());
                for k in keys {
                    match self.sym_row(k, row, lookups)? {
                        Sym::Val(v) => key.push(v),
                        _ => return Err("subquery key depends on a variable".into()),
                    }
                }
                let set = lookups[*lookup].set(&key);
                match self.sym_row(expr, row, lookups)? {
                    Sym::Val(v) => {
                        if v.is_unset() {
                            return Ok(Sym::Val(Value::Bool(*negated)));
                        }
                        let found = set.is_some_and(|s| s.contains(&v));
                        Ok(Sym::Val(Value::Bool(found != *negated)))
                    }
                    Sym::Lin(e, dt) => {
                        let x = e.single_var().ok_or("IN applied to an arithmetic expression over variables")?;
                        let ids: Vec<i64> = set
                            .into_iter()
                            .flatten()
                            .filter(|v| v.data_type() == Some(dt))
                            .filter_map(|v| self.interner.encode(v))
                            .collect();
                        let f = self.atom_in(x, Domain::from_values(ids));
                        Ok(Sym::Bool(if *negated { f.not() } else { f }))
                    }
                    _ => Err("IN applied to a boolean expression over variables".into()),
                }
            }
            IrExpr::Lookup { lookup, keys } => {
                let mut key = Vec::with_capacity(keys.len());
                for k in keys {
                    match self.sym_row(k, row, lookups)? {
                        Sym::Val(v) => key.push(v),
                        _ => return Err("subquery key depends on a variable".into()),
                    }
                }
                Ok(Sym::Val(lookups[*lookup].scalar(&key)))
            }
            IrExpr::Agg(..) => Err("aggregate in a row-level expression".into()),
            IrExpr::Outer { .. } | IrExpr::InSub { .. } | IrExpr::ScalarSub(_) => Err("expression was not unnested".into()),
        }
    }

    fn not(&mut self, s: Sym) -> Res<Sym> {
        match s {
            Sym::Val(Value::Bool(b)) => Ok(Sym::Val(Value::Bool(!b))),
            Sym::Val(v) => Ok(Sym::Val(v)),
            Sym::Bool(f) => Ok(Sym::Bool(f.not())),
            _ => Err("NOT applied to a non-boolean expression".into()),
        }
    }

    fn neg(&mut self, s: Sym) -> Res<Sym> {
        match s {
            Sym::Val(Value::Int(i)) => i.checked_neg().map(|i| Sym::Val(Value::Int(i))).ok_or_else(|| "integer overflow".into()),
            Sym::Val(v) => Ok(Sym::Val(v)),
            Sym::Lin(e, dt) => Ok(Sym::Lin(e.scale(-1).map_err(overflow)?, dt)),
            _ => Err("negation of a non-integer expression".into()),
        }
    }

    fn formula(&mut self, s: Sym) -> Res<Formula> {
        match s {
            Sym::Val(Value::Bool(b)) => Ok(Formula::Const(b)),
            Sym::Val(_) => Ok(Formula::Const(false)),
            Sym::Bool(f) => Ok(f),
            Sym::AllDiff { .. } => Err("all_different can only be required, not combined with other conditions".into()),
            Sym::Lin(..) => Err("integer expression used as a condition".into()),
        }
    }

    fn lin_of(&mut self, s: Sym) -> Res<(LinExpr, DataType)> {
        match s {
            Sym::Val(Value::Int(i)) => Ok((LinExpr::constant(i), DataType::Integer)),
            Sym::Val(Value::Bool(b)) => Ok((LinExpr::constant(b as i64), DataType::Boolean)),
            Sym::Val(Value::Text(t)) => Ok((LinExpr::constant(self.interner.intern(&t)), DataType::Text)),
            Sym::Lin(e, dt) => Ok((e, dt)),
            _ => Err("expression cannot be compared".into()),
        }
    }

    fn apply_bin(&mut self, op: &BinaryOp, a: Sym, b: Sym) -> Res<Sym> {
        use BinaryOp::*;
        if let (Sym::Val(x), Sym::Val(y)) = (&a, &b) {
            return binary(op, x.clone(), y.clone()).map(Sym::Val);
        }
        match op {
            And | Or => {
                let fa = self.formula(a)?;
                let fb = self.formula(b)?;
                Ok(Sym::Bool(if *op == And {
                    Formula::and([fa, fb])
                } else {
                    Formula::or([fa, fb])
                }))
            }
            Eq | Ne | Lt | Le | Gt | Ge => {
                if matches!(a, Sym::Val(Value::Unset)) || matches!(b, Sym::Val(Value::Unset)) {
                    return Ok(Sym::Val(Value::Bool(*op == Ne)));
                }
                match (&a, &b) {
                    (Sym::Bool(f), Sym::Val(Value::Bool(v))) | (Sym::Val(Value::Bool(v)), Sym::Bool(f)) if matches!(op, Eq | Ne) => {
                        let positive = (*op == Eq) == *v;
                        return Ok(Sym::Bool(if positive { f.clone() } else { f.clone().not() }));
                    }
                    (Sym::Bool(_), _) | (_, Sym::Bool(_)) => return Err("comparison between boolean conditions over variables".into()),
                    _ => {}
                }
                let (l, lt) = self.lin_of(a)?;
                let (r, rt) = self.lin_of(b)?;
                if matches!(op, Lt | Le | Gt | Ge) && (lt == DataType::Text || rt == DataType::Text) {
                    return Err("ordering comparison on a variable text column".into());
                }
                let d = l.sub(&r).map_err(overflow)?;
                Ok(Sym::Bool(self.compare(op, d)?))
            }
            Add | Sub | Mul => {
                if matches!(a, Sym::Val(Value::Unset)) || matches!(b, Sym::Val(Value::Unset)) {
                    return Ok(Sym::Val(Value::Unset));
                }
                let (l, lt) = self.lin_of(a)?;
                let (r, rt) = self.lin_of(b)?;
                if lt != DataType::Integer || rt != DataType::Integer {
                    return Err("arithmetic on a non-integer expression".into());
                }
                let e = match op {
                    Add => l.add(&r),
                    Sub => l.sub(&r),
                    _ => {
                        if l.terms.is_empty() {
                            r.scale(l.constant)
                        } else if r.terms.is_empty() {
                            l.scale(r.constant)
                        } else {
                            return Err("product of two variable-dependent expressions is not linear".into());
                        }
                    }
                }
                .map_err(overflow)?;
                Ok(if e.terms.is_empty() {
                    Sym::Val(Value::Int(e.constant))
                } else {
                    Sym::Lin(e, DataType::Integer)
                })
            }
        }
    }

    /// `d op 0` as a formula.
    fn compare(&mut self, op: &BinaryOp, d: LinExpr) -> Res<Formula> {
        use BinaryOp::*;
        let c = d.constant as i128;
        let neg = |t: &[(i64, VarId)]| t.iter().map(|&(a, x)| (-a, x)).collect::<Vec<_>>();
        let fit = |v: i128| i64::try_from(v).map_err(|_| "integer overflow".to_string());
        // Σ terms (op) -c
        let (terms, le, rhs) = match op {
            Le => (d.terms.clone(), true, -c),
            Lt => (d.terms.clone(), true, -c - 1),
            Ge => (neg(&d.terms), true, c),
            Gt => (neg(&d.terms), true, c - 1),
            Eq | Ne => (d.terms.clone(), false, -c),
            _ => unreachable!(),
        };
        let f = if le {
            self.atom_le(terms, fit(rhs)?)
        } else {
            self.atom_eq(terms, fit(rhs)?)
        };
        Ok(if *op == Ne { f.not() } else { f })
    }

    fn intern_atom(&mut self, atom: Atom) -> usize {
        if let Some(&i) = self.atom_index.get(&atom) {
            return i;
        }
        self.atoms.push(AtomEntry { atom: atom.clone(), var: None });
        self.atom_index.insert(atom, self.atoms.len() - 1);
        self.atoms.len() - 1
    }

    fn atom_le(&mut self, terms: Vec<(i64, VarId)>, rhs: i64) -> Formula {
        let lin = Linear::new(terms, LinOp::Le, rhs);
        let (lo, hi) = self.bounds(&lin.terms);
        if hi <= rhs as i128 {
            return Formula::Const(true);
        }
        if lo > rhs as i128 {
            return Formula::Const(false);
        }
        if let Some(r) = (rhs as i128).checked_neg().map(|v| v - 1).and_then(|v| i64::try_from(v).ok()) {
            let comp = Atom::Lin(Linear::new(lin.terms.iter().map(|&(a, x)| (-a, x)).collect(), LinOp::Le, r));
            if let Some(&i) = self.atom_index.get(&comp) {
                return Formula::Atom(i, false);
            }
        }
        Formula::Atom(self.intern_atom(Atom::Lin(lin)), true)
    }

    fn atom_eq(&mut self, terms: Vec<(i64, VarId)>, rhs: i64) -> Formula {
        let mut lin = Linear::new(terms, LinOp::Eq, rhs);
        let (lo, hi) = self.bounds(&lin.terms);
        let r = rhs as i128;
        if r < lo || r > hi {
            return Formula::Const(false);
        }
        if lo == hi {
            return Formula::Const(true);
        }
        if let [(a, x)] = lin.terms[..] {
            if rhs % a != 0 {
                return Formula::Const(false);
            }
            return self.atom_eq_const(x, rhs / a);
        }
        if lin.terms[0].0 < 0 {
            lin = Linear::new(lin.terms.iter().map(|&(a, x)| (-a, x)).collect(), LinOp::Eq, -rhs);
        }
        Formula::Atom(self.intern_atom(Atom::Lin(lin)), true)
    }

    fn atom_eq_const(&mut self, x: VarId, v: i64) -> Formula {
        let d = &self.model.vars[x].domain;
        if !d.contains(v) {
            return Formula::Const(false);
        }
        if d.fixed() == Some(v) {
            return Formula::Const(true);
        }
        Formula::Atom(self.intern_atom(Atom::Lin(Linear::new(vec![(1, x)], LinOp::Eq, v))), true)
    }

    fn atom_in(&mut self, x: VarId, set: Domain) -> Formula {
        let d = self.model.vars[x].domain.clone();
        let s = set.intersect(&d);
        if s.is_empty() {
            return Formula::Const(false);
        }
        if d.is_subset(&s) {
            return Formula::Const(true);
        }
        if let Some(v) = s.fixed() {
            return self.atom_eq_const(x, v);
        }
        if !self.rewrites {
            let eqs: Vec<Formula> = s.values().collect::<Vec<_>>().into_iter().map(|v| self.atom_eq_const(x, v)).collect();
            return Formula::or(eqs);
        }
        Formula::Atom(self.intern_atom(Atom::In { x, set: s }), true)
    }

    fn reify(&mut self, i: usize) -> VarId {
        if let Some(b) = self.atoms[i].var {
            return b;
        }
        let atom = self.atoms[i].atom.clone();
        let name = match &atom {
            Atom::Lin(l) => {
                let terms: Vec<String> = l.terms.iter().map(|(a, x)| format!("{a}*x{x}")).collect();
                format!("[{} {} {}]", terms.join(" + "), l.op.symbol(), l.rhs)
            }
            Atom::In { x, set } => format!("[x{x} in {set}]"),
        };
        let b = self.model.new_var(Domain::range(0, 1), VarKind::Reified, name);
        self.model.post(Constraint::Reified { b, atom }, self.definition());
        self.atoms[i].var = Some(b);
        b
    }

    /// A literal equivalent to a non-constant formula.
    fn lit(&mut self, f: &Formula) -> Res<Lit> {
        match f {
            Formula::Atom(i, p) => Ok(Lit {
                var: self.reify(*i),
                positive: *p,
            }),
            Formula::And(fs) | Formula::Or(fs) => {
                if let Some(&t) = self.tseitin.get(f) {
                    return Ok(Lit::pos(t));
                }
                let lits = fs.iter().map(|g| self.lit(g)).collect::<Res<Vec<_>>>()?;
                let t = self.model.new_var(Domain::range(0, 1), VarKind::Tseitin, format!("t{}", self.tseitin.len()));
                let origin = self.definition();
                if matches!(f, Formula::And(_)) {
                    for &l in &lits {
                        self.model.post(Constraint::Clause(vec![Lit::neg(t), l]), origin.clone());
                    }
                    let mut c = vec![Lit::pos(t)];
                    c.extend(lits.iter().map(|l| l.negate()));
                    self.model.post(Constraint::Clause(c), origin);
                } else {
                    for &l in &lits {
                        self.model.post(Constraint::Clause(vec![Lit::pos(t), l.negate()]), origin.clone());
                    }
                    let mut c = vec![Lit::neg(t)];
                    c.extend(lits);
                    self.model.post(Constraint::Clause(c), origin);
                }
                self.tseitin.insert(f.clone(), t);
                Ok(Lit::pos(t))
            }
            Formula::Const(_) => Err("internal: literal for a constant".into()),
        }
    }

    /// Requires `f` to hold.
    fn assert(&mut self, f: Formula, origin: Origin) -> Res<()> {
        match f {
            Formula::Const(true) => Ok(()),
            Formula::Const(false) => {
                self.model.post(Constraint::Clause(Vec::new()), origin);
                Ok(())
            }
            Formula::Atom(i, p) => {
                self.assert_atom(i, p, origin);
                Ok(())
            }
            Formula::And(fs) => {
                for g in fs {
                    self.assert(g, origin.clone())?;
                }
                Ok(())
            }
            Formula::Or(fs) => {
                let lits = fs.iter().map(|g| self.lit(g)).collect::<Res<Vec<_>>>()?;
                self.model.post(Constraint::Clause(lits), origin);
                Ok(())
            }
        }
    }

    fn assert_atom(&mut self, i: usize, positive: bool, origin: Origin) {
        let atom = self.atoms[i].atom.clone();
        if self.rewrites {
            let unit = match &atom {
                Atom::Lin(l) if l.op == LinOp::Eq && l.terms.len() == 1 && l.terms[0].0 == 1 => {
                    Some((l.terms[0].1, Domain::singleton(l.rhs)))
                }
                Atom::In { x, set } => Some((*x, set.clone())),
                _ => None,
            };
            if let (Some((x, set)), Some(g)) = (unit, origin.group) {
                let k = *self.unit_index.entry((g, x)).or_insert_with(|| {
                    self.units.push(UnitBuf {
                        origin: origin.clone(),
                        x,
                        allowed: self.model.vars[x].domain.clone(),
                    });
                    self.units.len() - 1
                });
                let u = &mut self.units[k];
                u.allowed = if positive { u.allowed.intersect(&set) } else { u.allowed.subtract(&set) };
                return;
            }
        }
        match atom {
            Atom::Lin(l) => {
                let l = if positive { l } else { l.negated() };
                self.model.post(Constraint::Linear(l), origin);
            }
            Atom::In { x, set } => {
                self.model.post(
                    Constraint::Membership {
                        x,
                        set,
                        negated: !positive,
                    },
                    origin,
                );
            }
        }
    }

    /// Posts one membership per (group, variable) for buffered restrictions.
    fn flush_units(&mut self) {
        for u in std::mem::take(&mut self.units) {
            if u.allowed != self.model.vars[u.x].domain {
                self.model.post(
                    Constraint::Membership {
                        x: u.x,
                        set: u.allowed,
                        negated: false,
                    },
                    u.origin,
                );
            }
        }
        self.unit_index.clear();
    }

    fn assert_all_different(&mut self, vars: Vec<VarId>, consts: Vec<i64>, origin: Origin) -> Res<()> {
        let mut seen = std::collections::HashSet::new();
        if !consts.iter().all(|c| seen.insert(*c)) {
            self.model.post(Constraint::Clause(Vec::new()), origin);
            return Ok(());
        }
        for &x in &vars {
            for &c in &consts {
                let f = self.atom_eq_const(x, c).not();
                self.assert(f, origin.clone())?;
            }
        }
        let mut vars = vars;
        vars.sort_unstable();
        vars.dedup();
        if self.rewrites {
            if vars.len() > 1 {
                self.model.post(Constraint::AllDifferent(vars), origin);
            }
        } else {
            for i in 0..vars.len() {
                for j in i + 1..vars.len() {
                    self.model.post(
                        Constraint::Linear(Linear::new(vec![(1, vars[i]), (-1, vars[j])], LinOp::Ne, 0)),
                        origin.clone(),
                    );
                }
            }
        }
        Ok(())
    }

    /// Width of the interval a linear expression can take.
    fn range_of(&self, e: &LinExpr) -> i64 {
        let mut w: i64 = 0;
        for &(c, x) in &e.terms {
            let d = &self.model.vars[x].domain;
            let span = d.ub().saturating_sub(d.lb());
            w = w.saturating_add(c.saturating_abs().saturating_mul(span));
        }
        w
    }

    fn objective(&mut self, cells: &[Cell], opts: &BindOptions) -> Res<EvictCosts> {
        self.view = "objective".into();
        let mut total = LinExpr::constant(0);
        let mut any = false;
        for (name, s) in std::mem::take(&mut self.soft) {
            any = true;
            match s {
                Sym::Val(Value::Int(v)) => total.add_constant(v).map_err(overflow)?,
                Sym::Val(_) => {}
                Sym::Lin(e, DataType::Integer) => total = total.add(&e).map_err(overflow)?,
                _ => return Err(format!("soft constraint {name} is not an integer")),
            }
            self.soft.push((name, Sym::Val(Value::Unset)));
        }
        let mut costs = EvictCosts::default();
        match &opts.mode {
            Mode::Evict { .. } => {
                any = true;
                // Placement outranks every soft view: scale costs past the
                // soft objective's whole range.
                let scale = self.range_of(&total).checked_add(1).ok_or("integer overflow")?;
                let mut levels: Vec<i64> = cells.iter().filter(|c| c.unset_value.is_some()).map(|c| c.priority).collect();
                levels.sort_unstable();
                levels.dedup();
                let mut weight: HashMap<i64, i64> = HashMap::new();
                let mut cum: i64 = 0;
                for &p in &levels {
                    let w = cum.checked_add(1).ok_or("integer overflow")?;
                    weight.insert(p, w);
                    let n = cells.iter().filter(|c| c.unset_value.is_some() && c.priority == p).count() as i64;
                    let per = w.checked_mul(2).and_then(|v| v.checked_add(1)).ok_or("integer overflow")?;
                    cum = cum.checked_add(per.checked_mul(n).ok_or("integer overflow")?).ok_or("integer overflow")?;
                }
                for (i, c) in cells.iter().enumerate() {
                    let Some(u) = c.unset_value else { continue };
                    let w = weight[&c.priority];
                    let cost = if c.current.is_unset() { 2 * w } else { 2 * w + 1 };
                    costs.weights.push((i, cost));
                    let cost = cost.checked_mul(scale).ok_or("integer overflow")?;
                    let f = self.atom_eq_const(c.var, u);
                    self.sum_term(&mut total, &f, -cost)?;
                }
            }
            Mode::Migrate { budget } => {
                let mut moved = LinExpr::constant(0);
                for c in cells {
                    let Some(cur) = self.interner.encode(&c.current) else { continue };
                    let stay = self.atom_eq_const(c.var, cur);
                    self.sum_term(&mut moved, &stay.not(), 1)?;
                }
                let g = self.group("migration budget", Vec::new());
                let k = i64::try_from(*budget).map_err(|_| "migration budget too large")?;
                let rhs = k.checked_sub(moved.constant).ok_or("integer overflow")?;
                let origin = Origin {
                    view: "migration budget".into(),
                    group: Some(g),
                };
                if moved.terms.is_empty() {
                    if rhs < 0 {
                        self.model.post(Constraint::Clause(Vec::new()), origin);
                    }
                } else {
                    self.model.post(Constraint::Linear(Linear::new(moved.terms, LinOp::Le, rhs)), origin);
                }
            }
            Mode::Standard => {}
        }
        if any {
            let y = if total.terms.is_empty() {
                self.model.new_var(Domain::singleton(total.constant), VarKind::Defined, "objective")
            } else {
                let y = self.define(&total)?;
                if total.single_var().is_some() {
                    // keep the objective a distinct defined variable
                    let (lo, hi) = (self.model.vars[y].domain.lb(), self.model.vars[y].domain.ub());
                    let z = self.model.new_var(Domain::range(lo, hi), VarKind::Defined, "objective");
                    self.model.post(Constraint::Linear(Linear::new(vec![(1, y), (-1, z)], LinOp::Eq, 0)), self.definition());
                    z
                } else {
                    self.model.vars[y].name = "objective".into();
                    y
                }
            };
            self.model.objective = Some(y);
        }
        Ok(costs)
    }
}

fn row_of<'r>(sources: &'r [Rows], b: &[usize]) -> Vec<&'r [Sym]> {
    b.iter().enumerate().map(|(g, &r)| sources[g].rows[r].as_slice()).collect()
}
