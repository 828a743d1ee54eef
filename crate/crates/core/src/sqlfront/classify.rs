use std::collections::{HashMap, HashSet};

use super::analyze::{analyze_query, Catalog};
use super::ast::{Expr, SelectItem};
use crate::error::CompileError;
use crate::schema::{Schema, TableDef, ViewClass, ViewDef};
use crate::value::DataType;

/// Resolves every view, assigns its class and orders views so that each
/// comes after the views it reads.
pub fn classify_views(tables: Vec<TableDef>, views: Vec<ViewDef>) -> Result<Schema, CompileError> {
    let mut names = HashSet::new();
    for t in &tables {
        if !names.insert(t.name.clone()) {
            return Err(CompileError::Schema(format!("duplicate table name {}", t.name)));
        }
    }
    for v in &views {
        if !names.insert(v.name.clone()) {
            return Err(view_err(v, "name already used by another table or view"));
        }
    }
    let view_pos: HashMap<&str, usize> = views.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();

    let deps: Vec<Vec<usize>> = views
        .iter()
        .map(|v| {
            let mut d: Vec<usize> = referenced_relations(v)
                .iter()
                .filter_map(|n| view_pos.get(n.as_str()).copied())
                .collect();
            d.sort_unstable();
            d.dedup();
            d
        })
        .collect();
    let order = topo_order(&views, &deps)?;
    let view_names: Vec<String> = views.iter().map(|v| v.name.clone()).collect();

    let mut cat = Catalog::from_tables(&tables);
    let mut analysed: Vec<Option<ViewDef>> = views.into_iter().map(Some).collect();
    let mut ordered: Vec<ViewDef> = Vec::new();
    let mut var_dep: HashMap<String, bool> = HashMap::new();
    for &i in &order {
        let mut v = analysed[i].take().unwrap();
        for &d in &deps[i] {
            let dep = ordered.iter().find(|o| o.name == view_names[d]).unwrap();
            if matches!(dep.annotated, Some(ViewClass::Hard) | Some(ViewClass::Soft)) {
                return Err(view_err(&v, &format!("reads constraint view {}; constraint views cannot be referenced", dep.name)));
            }
        }
        let shape = analyze_query(&cat, &v.query).map_err(|m| view_err(&v, &m))?;
        let mut variable = false;
        for (rel, col) in &shape.column_refs {
            if let Some(t) = tables.iter().find(|t| &t.name == rel) {
                variable |= t.columns[*col].is_variable;
            } else if var_dep.get(rel).copied().unwrap_or(false) {
                variable = true;
            }
        }
        for rel in &shape.relations {
            if var_dep.get(rel).copied().unwrap_or(false) {
                variable = true;
            }
        }
        v.columns = shape.columns;
        v.variable_dependent = variable;
        var_dep.insert(v.name.clone(), variable);
        cat.add_view(&v.name, &v.columns, variable);
        match v.annotated {
            Some(ViewClass::Hard) => {
                if !variable {
                    return Err(view_err(&v, "hard constraint does not depend on any variable column"));
                }
                v.class = ViewClass::Hard;
            }
            Some(ViewClass::Soft) => {
                check_soft_shape(&v)?;
                v.class = ViewClass::Soft;
            }
            _ => v.class = if variable { ViewClass::Auxiliary } else { ViewClass::Input },
        }
        ordered.push(v);
    }

    // Auxiliary views must feed some constraint view, possibly through other
    // auxiliary views.
    let mut used: HashSet<String> = HashSet::new();
    for v in ordered.iter().rev() {
        if matches!(v.class, ViewClass::Hard | ViewClass::Soft) || used.contains(&v.name) {
            for r in referenced_relations(v) {
                used.insert(r);
            }
        }
    }
    for v in &ordered {
        if v.class == ViewClass::Auxiliary && !used.contains(&v.name) {
            return Err(view_err(
                v,
                "unannotated view depends on variable columns but no constraint view uses it",
            ));
        }
    }
    // Soft views may not read other soft views, directly or through auxiliary ones.
    for v in ordered.iter().filter(|v| v.class == ViewClass::Soft) {
        let mut stack: Vec<String> = referenced_relations(v).into_iter().collect();
        let mut seen = HashSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n.clone()) {
                continue;
            }
            if let Some(dep) = ordered.iter().find(|o| o.name == n) {
                if dep.class == ViewClass::Soft {
                    return Err(view_err(v, &format!("soft constraint reads soft constraint {n}")));
                }
                stack.extend(referenced_relations(dep));
            }
        }
    }
    Ok(Schema::new(tables, ordered))
}

fn view_err(v: &ViewDef, msg: &str) -> CompileError {
    CompileError::View {
        view: v.name.clone(),
        line: v.line,
        msg: msg.to_string(),
    }
}

fn check_soft_shape(v: &ViewDef) -> Result<(), CompileError> {
    let q = &v.query;
    if !q.group_by.is_empty() || q.having.is_some() {
        return Err(view_err(v, "soft constraint must produce a single row (no group by / having)"));
    }
    let only_aggregate = matches!(q.projection.as_slice(), [SelectItem::Expr { expr, .. }] if expr.contains_aggregate());
    if !only_aggregate || v.columns.len() != 1 {
        return Err(view_err(v, "soft constraint must select exactly one aggregate expression"));
    }
    if v.columns[0].dtype != DataType::Integer {
        return Err(view_err(v, "soft constraint must produce an integer"));
    }
    Ok(())
}

fn topo_order(views: &[ViewDef], deps: &[Vec<usize>]) -> Result<Vec<usize>, CompileError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    fn visit(
        i: usize,
        deps: &[Vec<usize>],
        marks: &mut [Mark],
        path: &mut Vec<usize>,
        out: &mut Vec<usize>,
        views: &[ViewDef],
    ) -> Result<(), CompileError> {
        match marks[i] {
            Mark::Done => return Ok(()),
            Mark::Active => {
                let start = path.iter().position(|&p| p == i).unwrap();
                let mut cycle: Vec<&str> = path[start..].iter().map(|&p| views[p].name.as_str()).collect();
                cycle.push(&views[i].name);
                return Err(CompileError::Cycle(cycle.join(" -> ")));
            }
            Mark::New => {}
        }
        marks[i] = Mark::Active;
        path.push(i);
        for &d in &deps[i] {
            visit(d, deps, marks, path, out, views)?;
        }
        path.pop();
        marks[i] = Mark::Done;
        out.push(i);
        Ok(())
    }
    let mut marks = vec![Mark::New; views.len()];
    let mut out = Vec::new();
    for i in 0..views.len() {
        visit(i, deps, &mut marks, &mut Vec::new(), &mut out, views)?;
    }
    Ok(out)
}

/// Names of all relations a view reads, including inside subqueries.
pub fn referenced_relations(v: &ViewDef) -> Vec<String> {
    let mut out = Vec::new();
    collect_query(&v.query, &mut out);
    out.sort();
    out.dedup();
    out
}

fn collect_query(q: &super::ast::Query, out: &mut Vec<String>) {
    for t in q.from_items() {
        out.push(t.name.clone());
    }
    for j in &q.joins {
        collect_expr(&j.on, out);
    }
    for item in &q.projection {
        if let SelectItem::Expr { expr, .. } = item {
            collect_expr(expr, out);
        }
    }
    for e in q.selection.iter().chain(q.group_by.iter()).chain(q.having.iter()) {
        collect_expr(e, out);
    }
}

fn collect_expr(e: &Expr, out: &mut Vec<String>) {
    match e {
        Expr::Column { .. } | Expr::Literal(_) => {}
        Expr::Not(x) | Expr::Neg(x) => collect_expr(x, out),
        Expr::Binary { left, right, .. } => {
            collect_expr(left, out);
            collect_expr(right, out);
        }
        Expr::InSubquery { expr, query, .. } => {
            collect_expr(expr, out);
            collect_query(query, out);
        }
        Expr::Subquery(q) => collect_query(q, out),
        Expr::Aggregate { arg, .. } => {
            if let Some(a) = arg {
                collect_expr(a, out);
            }
        }
    }
}
