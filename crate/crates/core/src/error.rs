use crate::sqlfront::SqlError;

/// Errors raised while turning SQL source into a model template or a
/// grounded model.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("{0}")]
    Syntax(#[from] SqlError),
    #[error("{0}")]
    Schema(String),
    #[error("view {view} (line {line}): {msg}")]
    View { view: String, line: usize, msg: String },
    #[error("cycle in view dependencies: {0}")]
    Cycle(String),
    #[error("binding view {view}: {msg}")]
    Bind { view: String, msg: String },
}

impl CompileError {
    /// Renders the error as `file:line:col: message` where a position is known.
    pub fn render(&self, file: &str) -> String {
        match self {
            CompileError::Syntax(e) => format!("{file}:{}:{}: {}", e.line, e.col, e.msg),
            CompileError::View { view, line, msg } => format!("{file}:{line}:1: view {view}: {msg}"),
            other => format!("{file}: {other}"),
        }
    }
}
