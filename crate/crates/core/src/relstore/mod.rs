//! In-memory relational store holding cluster state.

pub mod eval;

use std::collections::HashMap;

use crate::schema::{Schema, TableDef, ViewClass};
use crate::value::{DataType, Value};

pub use eval::ViewRows;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("table {0} already exists")]
    DuplicateTable(String),
    #[error("table {0} has no columns")]
    NoColumns(String),
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("unknown column {table}.{column}")]
    UnknownColumn { table: String, column: String },
    #[error("row {row} of {table}: expected {expected} values, found {found}")]
    Arity {
        table: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{table}.{column}: value {value} does not have type {dtype}")]
    Type {
        table: String,
        column: String,
        value: String,
        dtype: DataType,
    },
    #[error("{table}.{column}: unset marker in a non-variable column")]
    UnsetInput { table: String, column: String },
    #[error("duplicate primary key {key} in {table}")]
    DuplicateKey { table: String, key: String },
    #[error("CSV header for {table}: {msg}")]
    Header { table: String, msg: String },
    #[error("CSV for {table}, line {line}: {msg}")]
    Csv { table: String, line: u64, msg: String },
    #[error("no row with key {key} in {table}")]
    UnknownRow { table: String, key: String },
    #[error("{table}.{column} is not a variable column")]
    NotVariable { table: String, column: String },
    #[error("table {0} has no primary key")]
    NoPrimaryKey(String),
    #[error("view {0} reads a variable column; it must be compiled, not evaluated")]
    VariableView(String),
    #[error("unknown view {0}")]
    UnknownView(String),
    #[error("evaluating {view}: {msg}")]
    Eval { view: String, msg: String },
}

/// Rows of one table plus a primary-key index.
#[derive(Clone, Debug)]
pub struct Relation {
    pub def: TableDef,
    rows: Vec<Vec<Value>>,
    key_index: HashMap<Value, usize>,
}

impl Relation {
    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row_index(&self, key: &Value) -> Option<usize> {
        self.key_index.get(key).copied()
    }

    pub fn row_by_key(&self, key: &Value) -> Option<&[Value]> {
        self.row_index(key).map(|i| self.rows[i].as_slice())
    }

    /// Primary-key value of row `i`, or the row position when there is no key.
    pub fn row_key(&self, i: usize) -> Value {
        match self.def.primary_key {
            Some(k) => self.rows[i][k].clone(),
            None => Value::Int(i as i64),
        }
    }
}

/// An update of one variable cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Delta {
    pub table: String,
    pub row_key: Value,
    pub column: String,
    pub new_value: Value,
}

impl serde::Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(v) => s.serialize_i64(*v),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Text(t) => s.serialize_str(t),
            Value::Unset => s.serialize_str("?"),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Store {
    tables: Vec<Relation>,
    index: HashMap<String, usize>,
}

impl Store {
    pub fn new() -> Store {
        Store::default()
    }

    /// A store with one empty relation per table of the schema.
    pub fn for_schema(schema: &Schema) -> Result<Store, StoreError> {
        let mut s = Store::new();
        for t in &schema.tables {
            s.create_table(t.clone())?;
        }
        Ok(s)
    }

    pub fn create_table(&mut self, def: TableDef) -> Result<(), StoreError> {
        if self.index.contains_key(&def.name) {
            return Err(StoreError::DuplicateTable(def.name));
        }
        if def.columns.is_empty() {
            return Err(StoreError::NoColumns(def.name));
        }
        self.index.insert(def.name.clone(), self.tables.len());
        self.tables.push(Relation {
            def,
            rows: Vec::new(),
            key_index: HashMap::new(),
        });
        Ok(())
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.index.get(name).map(|&i| &self.tables[i])
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.tables.iter()
    }

    fn relation_mut(&mut self, name: &str) -> Result<&mut Relation, StoreError> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.tables[i]),
            None => Err(StoreError::UnknownTable(name.to_string())),
        }
    }

    /// Appends rows after checking all of them; on error nothing is inserted.
    pub fn insert_rows(&mut self, table: &str, rows: Vec<Vec<Value>>) -> Result<usize, StoreError> {
        let rel = self.relation_mut(table)?;
        let mut new_keys = HashMap::new();
        for (n, row) in rows.iter().enumerate() {
            check_row(&rel.def, n, row)?;
            if let Some(k) = rel.def.primary_key {
                let key = &row[k];
                if rel.key_index.contains_key(key) || new_keys.insert(key.clone(), ()).is_some() {
                    return Err(StoreError::DuplicateKey {
                        table: table.to_string(),
                        key: key.to_string(),
                    });
                }
            }
        }
        let count = rows.len();
        for row in rows {
            if let Some(k) = rel.def.primary_key {
                rel.key_index.insert(row[k].clone(), rel.rows.len());
            }
            rel.rows.push(row);
        }
        Ok(count)
    }

    /// Removes the rows with the given primary keys; unknown keys are errors.
    pub fn delete_rows(&mut self, table: &str, keys: &[Value]) -> Result<usize, StoreError> {
        let rel = self.relation_mut(table)?;
        if rel.def.primary_key.is_none() {
            return Err(StoreError::NoPrimaryKey(table.to_string()));
        }
        for k in keys {
            if !rel.key_index.contains_key(k) {
                return Err(StoreError::UnknownRow {
                    table: table.to_string(),
                    key: k.to_string(),
                });
            }
        }
        let kc = rel.def.primary_key.unwrap();
        let doomed: std::collections::HashSet<&Value> = keys.iter().collect();
        rel.rows.retain(|r| !doomed.contains(&r[kc]));
        rel.key_index = rel.rows.iter().enumerate().map(|(i, r)| (r[kc].clone(), i)).collect();
        Ok(keys.len())
    }

    /// Parses CSV text with a header row. `?` in a variable column is the
    /// unset marker.
    pub fn load_csv(&mut self, table: &str, text: &str) -> Result<usize, StoreError> {
        let def = self
            .relation(table)
            .ok_or_else(|| StoreError::UnknownTable(table.to_string()))?
            .def
            .clone();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| StoreError::Header {
            table: table.to_string(),
            msg: e.to_string(),
        })?;
        let header_names: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
        let mut order = Vec::new();
        for c in &def.columns {
            match header_names.iter().position(|h| *h == c.name) {
                Some(p) => order.push(p),
                None => {
                    return Err(StoreError::Header {
                        table: table.to_string(),
                        msg: format!("missing column {}", c.name),
                    })
                }
            }
        }
        if header_names.len() != def.columns.len() {
            let extra: Vec<&String> = header_names.iter().filter(|h| def.column_index(h).is_none()).collect();
            return Err(StoreError::Header {
                table: table.to_string(),
                msg: format!("unexpected columns {extra:?}"),
            });
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| StoreError::Csv {
                table: table.to_string(),
                line: e.position().map(|p| p.line()).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let mut row = Vec::with_capacity(def.columns.len());
            for (c, &p) in def.columns.iter().zip(&order) {
                let field = rec.get(p).unwrap_or("");
                let v = parse_field(field, c.dtype, c.is_variable).map_err(|msg| StoreError::Csv {
                    table: table.to_string(),
                    line,
                    msg: format!("column {}: {msg}", c.name),
                })?;
                row.push(v);
            }
            rows.push(row);
        }
        self.insert_rows(table, rows)
    }

    /// Writes a relation as CSV with a header row.
    pub fn export_csv(&self, table: &str) -> Result<String, StoreError> {
        let rel = self.relation(table).ok_or_else(|| StoreError::UnknownTable(table.to_string()))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = rel.def.columns.iter().map(|c| c.name.as_str()).collect();
        w.write_record(&header).expect("write to memory");
        for r in &rel.rows {
            w.write_record(r.iter().map(|v| v.to_csv_field())).expect("write to memory");
        }
        Ok(String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 csv"))
    }

    /// Applies all deltas or none.
    pub fn apply_deltas(&mut self, deltas: &[Delta]) -> Result<(), StoreError> {
        let mut resolved = Vec::with_capacity(deltas.len());
        for d in deltas {
            let rel = self.relation(&d.table).ok_or_else(|| StoreError::UnknownTable(d.table.clone()))?;
            let col = rel.def.column_index(&d.column).ok_or_else(|| StoreError::UnknownColumn {
                table: d.table.clone(),
                column: d.column.clone(),
            })?;
            let cdef = &rel.def.columns[col];
            if !cdef.is_variable {
                return Err(StoreError::NotVariable {
                    table: d.table.clone(),
                    column: d.column.clone(),
                });
            }
            if !d.new_value.is_unset() && d.new_value.data_type() != Some(cdef.dtype) {
                return Err(StoreError::Type {
                    table: d.table.clone(),
                    column: d.column.clone(),
                    value: d.new_value.to_string(),
                    dtype: cdef.dtype,
                });
            }
            let row = rel.row_index(&d.row_key).ok_or_else(|| StoreError::UnknownRow {
                table: d.table.clone(),
                key: d.row_key.to_string(),
            })?;
            resolved.push((self.index[&d.table], row, col, d.new_value.clone()));
        }
        for (t, r, c, v) in resolved {
            self.tables[t].rows[r][c] = v;
        }
        Ok(())
    }

    /// Evaluates a view that reads only input columns.
    pub fn eval_input_view(&self, schema: &Schema, view: &str) -> Result<ViewRows, StoreError> {
        let v = schema.view(view).ok_or_else(|| StoreError::UnknownView(view.to_string()))?;
        if v.variable_dependent || v.class != ViewClass::Input {
            return Err(StoreError::VariableView(view.to_string()));
        }
        eval::Evaluator::new(schema, self).eval_view(view)
    }

    /// Evaluates any view over the current cell values, variable cells
    /// included. Unset cells compare unequal to everything.
    pub fn eval_view(&self, schema: &Schema, view: &str) -> Result<ViewRows, StoreError> {
        eval::Evaluator::new(schema, self).eval_view(view)
    }
}

fn check_row(def: &TableDef, n: usize, row: &[Value]) -> Result<(), StoreError> {
    if row.len() != def.columns.len() {
        return Err(StoreError::Arity {
            table: def.name.clone(),
            row: n,
            expected: def.columns.len(),
            found: row.len(),
        });
    }
    for (c, v) in def.columns.iter().zip(row) {
        match v.data_type() {
            None if !c.is_variable => {
                return Err(StoreError::UnsetInput {
                    table: def.name.clone(),
                    column: c.name.clone(),
                })
            }
            Some(t) if t != c.dtype => {
                return Err(StoreError::Type {
                    table: def.name.clone(),
                    column: c.name.clone(),
                    value: v.to_string(),
                    dtype: c.dtype,
                })
            }
            _ => {}
        }
    }
    Ok(())
}

fn parse_field(field: &str, dtype: DataType, variable: bool) -> Result<Value, String> {
    if variable && field == "?" {
        return Ok(Value::Unset);
    }
    match dtype {
        DataType::Integer => field
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("'{field}' is not an integer")),
        DataType::Boolean => match field.to_ascii_lowercase().as_str() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("'{field}' is not a boolean")),
        },
        DataType::Text => Ok(Value::Text(field.to_string())),
    }
}
