//! Table and view definitions shared by the store, the front end and the
//! compiler.

use std::collections::HashMap;
use std::fmt;

use crate::sqlfront::ast::Query;
use crate::value::DataType;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub dtype: DataType,
    pub is_variable: bool,
}

impl ColumnDef {
    pub fn new(name: &str, dtype: DataType) -> ColumnDef {
        ColumnDef {
            name: name.to_string(),
            dtype,
            is_variable: false,
        }
    }

    pub fn variable(name: &str, dtype: DataType) -> ColumnDef {
        ColumnDef {
            name: name.to_string(),
            dtype,
            is_variable: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    /// Index into `columns`.
    pub primary_key: Option<usize>,
}

impl TableDef {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn has_variables(&self) -> bool {
        self.columns.iter().any(|c| c.is_variable)
    }

    pub fn variable_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_variable)
            .map(|(i, _)| i)
    }

    pub fn primary_key_name(&self) -> Option<&str> {
        self.primary_key.map(|i| self.columns[i].name.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViewClass {
    /// Touches only input columns; evaluated directly over the store.
    Input,
    Hard,
    Soft,
    /// Unannotated, variable-dependent, consumed by a constraint view.
    Auxiliary,
}

impl fmt::Display for ViewClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewClass::Input => "input",
            ViewClass::Hard => "hard",
            ViewClass::Soft => "soft",
            ViewClass::Auxiliary => "auxiliary",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputColumn {
    pub name: String,
    pub dtype: DataType,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewDef {
    pub name: String,
    pub query: Query,
    /// Class requested by an annotation, if any.
    pub annotated: Option<ViewClass>,
    /// Final class; only meaningful after classification.
    pub class: ViewClass,
    /// Output columns; filled in by classification.
    pub columns: Vec<OutputColumn>,
    /// True when a variable column is reachable from this view.
    pub variable_dependent: bool,
    pub line: usize,
}

/// A classified program: tables plus views in dependency order.
#[derive(Clone, Debug, Default)]
pub struct Schema {
    pub tables: Vec<TableDef>,
    pub views: Vec<ViewDef>,
    table_index: HashMap<String, usize>,
    view_index: HashMap<String, usize>,
}

impl Schema {
    pub fn new(tables: Vec<TableDef>, views: Vec<ViewDef>) -> Schema {
        let table_index = tables.iter().enumerate().map(|(i, t)| (t.name.clone(), i)).collect();
        let view_index = views.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
        Schema {
            tables,
            views,
            table_index,
            view_index,
        }
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.table_index.get(name).map(|&i| &self.tables[i])
    }

    pub fn table_position(&self, name: &str) -> Option<usize> {
        self.table_index.get(name).copied()
    }

    pub fn view(&self, name: &str) -> Option<&ViewDef> {
        self.view_index.get(name).map(|&i| &self.views[i])
    }

    pub fn views_of(&self, class: ViewClass) -> impl Iterator<Item = &ViewDef> {
        self.views.iter().filter(move |v| v.class == class)
    }
}
