//! Compiles cluster-management policies written as annotated SQL views into
//! constraint models, solves them, and reports new configurations as table
//! updates.

pub mod check;
pub mod compiler;
pub mod error;
pub mod ir;
pub mod relstore;
pub mod runtime;
pub mod schema;
pub mod solver;
pub mod sqlfront;
pub mod value;

pub use error::CompileError;
pub use relstore::{Delta, Store, StoreError};
pub use schema::{ColumnDef, Schema, TableDef, ViewClass, ViewDef};
pub use value::{DataType, Value};
