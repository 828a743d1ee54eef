//! Front end for the annotated SQL subset: lexing, parsing, name
//! resolution and view classification.

pub mod analyze;
pub mod ast;
pub mod classify;
pub mod lexer;
pub mod parser;

use std::fmt;

use crate::schema::{ColumnDef, TableDef, ViewClass, ViewDef};
use ast::{Annotation, Statement};

pub use classify::classify_views;

/// Syntax error with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct SqlError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl SqlError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> SqlError {
        SqlError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for SqlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

/// Parses DDL and view definitions. Views come back unclassified: `class`
/// holds the annotated class or `Input` as a placeholder.
pub fn parse_program(src: &str) -> Result<(Vec<TableDef>, Vec<ViewDef>), SqlError> {
    let mut tables = Vec::new();
    let mut views = Vec::new();
    for stmt in parser::parse_statements(src)? {
        match stmt {
            Statement::Table(t) => {
                if t.columns.is_empty() {
                    return Err(SqlError::new(t.line, 1, format!("table {} has no columns", t.name)));
                }
                let mut seen = std::collections::HashSet::new();
                for c in &t.columns {
                    if !seen.insert(c.name.as_str()) {
                        return Err(SqlError::new(t.line, 1, format!("duplicate column {} in table {}", c.name, t.name)));
                    }
                }
                let pks: Vec<usize> = t
                    .columns
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.primary_key)
                    .map(|(i, _)| i)
                    .collect();
                if pks.len() > 1 {
                    return Err(SqlError::new(t.line, 1, format!("table {} declares more than one primary key column", t.name)));
                }
                let mut columns: Vec<ColumnDef> = t
                    .columns
                    .iter()
                    .map(|c| ColumnDef::new(&c.name, c.dtype))
                    .collect();
                for a in &t.annotations {
                    if let Annotation::VariableColumns(names) = a {
                        for n in names {
                            let Some(col) = columns.iter_mut().find(|c| &c.name == n) else {
                                return Err(SqlError::new(t.line, 1, format!("@variable_columns names unknown column {n} of table {}", t.name)));
                            };
                            if col.dtype == crate::value::DataType::Boolean {
                                return Err(SqlError::new(t.line, 1, format!("variable column {}.{n} is boolean; use an integer 0/1 column", t.name)));
                            }
                            if pks.first().is_some_and(|&i| t.columns[i].name == *n) {
                                return Err(SqlError::new(t.line, 1, format!("primary key column {}.{n} cannot be variable", t.name)));
                            }
                            col.is_variable = true;
                        }
                    }
                }
                let def = TableDef {
                    name: t.name.clone(),
                    columns,
                    primary_key: pks.first().copied(),
                };
                if def.has_variables() && def.primary_key.is_none() {
                    return Err(SqlError::new(t.line, 1, format!("table {} has variable columns but no primary key", t.name)));
                }
                tables.push(def);
            }
            Statement::View(v) => {
                let annotated = v.annotations.first().map(|a| match a {
                    Annotation::HardConstraint => ViewClass::Hard,
                    _ => ViewClass::Soft,
                });
                views.push(ViewDef {
                    name: v.name,
                    query: v.query,
                    annotated,
                    class: annotated.unwrap_or(ViewClass::Input),
                    columns: Vec::new(),
                    variable_dependent: false,
                    line: v.line,
                });
            }
        }
    }
    Ok((tables, views))
}
