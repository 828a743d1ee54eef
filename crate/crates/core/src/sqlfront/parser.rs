use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SqlError;
use crate::value::{DataType, Value};

const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "join", "inner", "on", "and", "or", "not",
    "in", "as", "create", "table", "view", "true", "false", "null", "limit", "order", "distinct",
    "union", "left", "right", "outer", "full", "cross", "primary", "key", "offset", "exists",
];

pub fn parse_statements(src: &str) -> Result<Vec<Statement>, SqlError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut out = Vec::new();
    loop {
        let annotations = p.annotations()?;
        if p.at_end() {
            if let Some(_a) = annotations.first() {
                return Err(p.error_here("annotation is not followed by a statement"));
            }
            break;
        }
        if p.eat(&Tok::Semi) {
            if !annotations.is_empty() {
                return Err(p.error_here("annotation is not followed by a statement"));
            }
            continue;
        }
        out.push(p.statement(annotations)?);
        if !p.eat(&Tok::Semi) && !p.at_end() && !matches!(p.peek(), Some(Tok::Annotation(_))) && !p.peek_kw("create") {
            return Err(p.error_here(&format!("unexpected {}", p.describe())));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, off: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + off).map(|t| &t.tok)
    }

    fn position(&self) -> (usize, usize) {
        match self.tokens.get(self.pos).or_else(|| self.tokens.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        }
    }

    fn error_here(&self, msg: &str) -> SqlError {
        let (l, c) = self.position();
        SqlError::new(l, c, msg)
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Ident(s)) => format!("'{s}'"),
            Some(Tok::Int(v)) => format!("'{v}'"),
            Some(Tok::Str(s)) => format!("string '{s}'"),
            Some(Tok::Annotation(a)) => format!("annotation '{a}'"),
            Some(t) => format!("{t:?}"),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), SqlError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error_here(&format!("expected {what}, found {}", self.describe())))
        }
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn peek_kw_at(&self, off: usize, kw: &str) -> bool {
        matches!(self.peek_at(off), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error_here(&format!("expected '{kw}', found {}", self.describe())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SqlError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_reserved(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here(&format!("expected {what}, found {}", self.describe()))),
        }
    }

    fn annotations(&mut self) -> Result<Vec<Annotation>, SqlError> {
        let mut out = Vec::new();
        while let Some(Tok::Annotation(text)) = self.peek() {
            let text = text.clone();
            let ann = parse_annotation(&text).map_err(|m| self.error_here(&m))?;
            out.push(ann);
            self.pos += 1;
        }
        Ok(out)
    }

    fn statement(&mut self, annotations: Vec<Annotation>) -> Result<Statement, SqlError> {
        let (line, _) = self.position();
        self.expect_kw("create")?;
        if self.eat_kw("table") {
            for a in &annotations {
                if !matches!(a, Annotation::VariableColumns(_)) {
                    return Err(SqlError::new(line, 1, format!("annotation '{a}' is not allowed on a table")));
                }
            }
            if annotations.len() > 1 {
                return Err(SqlError::new(line, 1, "at most one @variable_columns annotation per table"));
            }
            let name = self.ident("table name")?;
            self.expect(&Tok::LParen, "'('")?;
            let mut columns: Vec<ColumnSpec> = Vec::new();
            loop {
                if self.eat_kw("primary") {
                    self.expect_kw("key")?;
                    self.expect(&Tok::LParen, "'('")?;
                    let col = self.ident("column name")?;
                    self.expect(&Tok::RParen, "')'")?;
                    match columns.iter_mut().find(|c| c.name == col) {
                        Some(c) => c.primary_key = true,
                        None => return Err(self.error_here(&format!("primary key names unknown column '{col}'"))),
                    }
                } else {
                    columns.push(self.column_spec()?);
                }
                if self.eat(&Tok::Comma) {
                    continue;
                }
                self.expect(&Tok::RParen, "',' or ')'")?;
                break;
            }
            Ok(Statement::Table(CreateTable {
                name,
                columns,
                annotations,
                line,
            }))
        } else if self.eat_kw("view") {
            for a in &annotations {
                if matches!(a, Annotation::VariableColumns(_)) {
                    return Err(SqlError::new(line, 1, "@variable_columns is only allowed on a table"));
                }
            }
            if annotations.len() > 1 {
                return Err(SqlError::new(line, 1, "a view takes at most one constraint annotation"));
            }
            let name = self.ident("view name")?;
            self.expect_kw("as")?;
            let query = self.query()?;
            Ok(Statement::View(CreateView {
                name,
                query,
                annotations,
                line,
            }))
        } else {
            Err(self.error_here(&format!("expected 'table' or 'view', found {}", self.describe())))
        }
    }

    fn column_spec(&mut self) -> Result<ColumnSpec, SqlError> {
        let name = self.ident("column name")?;
        let ty = match self.peek() {
            Some(Tok::Ident(s)) => s.to_ascii_lowercase(),
            _ => return Err(self.error_here(&format!("expected column type, found {}", self.describe()))),
        };
        let dtype = match ty.as_str() {
            "integer" | "int" | "bigint" | "smallint" => DataType::Integer,
            "boolean" | "bool" => DataType::Boolean,
            "varchar" | "text" | "char" | "string" => DataType::Text,
            other => return Err(self.error_here(&format!("unsupported column type '{other}'"))),
        };
        self.pos += 1;
        if self.eat(&Tok::LParen) {
            match self.peek() {
                Some(Tok::Int(_)) => self.pos += 1,
                _ => return Err(self.error_here("expected type length")),
            }
            self.expect(&Tok::RParen, "')'")?;
        }
        let mut primary_key = false;
        loop {
            if self.peek_kw("not") && self.peek_kw_at(1, "null") {
                self.pos += 2;
            } else if self.eat_kw("null") {
            } else if self.eat_kw("primary") {
                self.expect_kw("key")?;
                primary_key = true;
            } else {
                break;
            }
        }
        Ok(ColumnSpec {
            name,
            dtype,
            primary_key,
        })
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        self.expect_kw("select")?;
        if self.peek_kw("distinct") {
            return Err(self.error_here("DISTINCT is not supported"));
        }
        let mut projection = Vec::new();
        loop {
            if self.eat(&Tok::Star) {
                projection.push(SelectItem::Wildcard);
            } else {
                let expr = self.expr()?;
                let alias = if self.eat_kw("as") {
                    Some(self.ident("alias")?)
                } else if matches!(self.peek(), Some(Tok::Ident(s)) if !is_reserved(s)) {
                    Some(self.ident("alias")?)
                } else {
                    None
                };
                projection.push(SelectItem::Expr { expr, alias });
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect_kw("from")?;
        let from = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            if self.eat_kw("inner") {
                self.expect_kw("join")?;
            } else if !self.eat_kw("join") {
                break;
            }
            let table = self.table_ref()?;
            self.expect_kw("on")?;
            let on = self.expr()?;
            joins.push(Join { table, on });
        }
        let selection = if self.eat_kw("where") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            loop {
                group_by.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let having = if self.eat_kw("having") { Some(self.expr()?) } else { None };
        for kw in ["limit", "order", "union", "offset"] {
            if self.peek_kw(kw) {
                return Err(self.error_here(&format!("{} is not supported", kw.to_uppercase())));
            }
        }
        for kw in ["left", "right", "full", "outer", "cross"] {
            if self.peek_kw(kw) {
                return Err(self.error_here("only inner joins are supported"));
            }
        }
        Ok(Query {
            projection,
            from,
            joins,
            selection,
            group_by,
            having,
        })
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        if self.peek() == Some(&Tok::LParen) {
            return Err(self.error_here("subqueries in FROM are not supported"));
        }
        let name = self.ident("table name")?;
        let alias = if self.eat_kw("as") {
            Some(self.ident("alias")?)
        } else if matches!(self.peek(), Some(Tok::Ident(s)) if !is_reserved(s)) {
            Some(self.ident("alias")?)
        } else {
            None
        };
        Ok(TableRef { name, alias })
    }

    fn expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("or") {
            let right = self.and_expr()?;
            left = Expr::binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_kw("and") {
            let right = self.not_expr()?;
            left = Expr::binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.eat_kw("not") {
            return Ok(Expr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SqlError> {
        let left = self.additive()?;
        let negated = self.peek_kw("not") && self.peek_kw_at(1, "in");
        if negated {
            self.pos += 1;
        }
        if self.eat_kw("in") {
            self.expect(&Tok::LParen, "'(' after IN")?;
            if !self.peek_kw("select") {
                return Err(self.error_here("IN requires a subquery"));
            }
            let query = self.query()?;
            self.expect(&Tok::RParen, "')'")?;
            return Ok(Expr::InSubquery {
                expr: Box::new(left),
                query: Box::new(query),
                negated,
            });
        }
        if self.peek_kw("is") {
            return Err(self.error_here("IS [NOT] NULL is not supported"));
        }
        let op = match self.peek() {
            Some(Tok::Eq) => BinaryOp::Eq,
            Some(Tok::Ne) => BinaryOp::Ne,
            Some(Tok::Lt) => BinaryOp::Lt,
            Some(Tok::Le) => BinaryOp::Le,
            Some(Tok::Gt) => BinaryOp::Gt,
            Some(Tok::Ge) => BinaryOp::Ge,
            _ => return Ok(left),
        };
        self.pos += 1;
        let right = self.additive()?;
        Ok(Expr::binary(op, left, right))
    }

    fn additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinaryOp::Add,
                Some(Tok::Minus) => BinaryOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let right = self.multiplicative()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        while self.eat(&Tok::Star) {
            let right = self.unary()?;
            left = Expr::binary(BinaryOp::Mul, left, right);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(Expr::Literal(Value::Int(v)))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Literal(Value::Text(s)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                if self.peek_kw("select") {
                    let q = self.query()?;
                    self.expect(&Tok::RParen, "')'")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect(&Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(word)) => {
                let lower = word.to_ascii_lowercase();
                match lower.as_str() {
                    "true" => {
                        self.pos += 1;
                        return Ok(Expr::Literal(Value::Bool(true)));
                    }
                    "false" => {
                        self.pos += 1;
                        return Ok(Expr::Literal(Value::Bool(false)));
                    }
                    "null" => return Err(self.error_here("NULL is not supported")),
                    _ => {}
                }
                if self.peek_at(1) == Some(&Tok::LParen) {
                    let Some(func) = AggFunc::from_name(&word) else {
                        return Err(self.error_here(&format!("unknown function '{word}'")));
                    };
                    self.pos += 2;
                    let arg = if self.eat(&Tok::Star) {
                        if func != AggFunc::Count {
                            return Err(self.error_here("only count accepts '*'"));
                        }
                        None
                    } else {
                        Some(Box::new(self.expr()?))
                    };
                    self.expect(&Tok::RParen, "')'")?;
                    return Ok(Expr::Aggregate { func, arg });
                }
                let first = self.ident("expression")?;
                if self.eat(&Tok::Dot) {
                    let name = self.ident("column name")?;
                    Ok(Expr::Column {
                        qualifier: Some(first),
                        name,
                    })
                } else {
                    Ok(Expr::Column {
                        qualifier: None,
                        name: first,
                    })
                }
            }
            _ => Err(self.error_here(&format!("expected expression, found {}", self.describe()))),
        }
    }
}

fn is_reserved(s: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(s))
}

fn parse_annotation(text: &str) -> Result<Annotation, String> {
    let body = text.trim().trim_start_matches('@');
    let (name, rest) = match body.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')) {
        Some(i) => (&body[..i], body[i..].trim()),
        None => (body, ""),
    };
    match name {
        "hard_constraint" if rest.is_empty() => Ok(Annotation::HardConstraint),
        "soft_constraint" if rest.is_empty() => Ok(Annotation::SoftConstraint),
        "variable_columns" => {
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| "expected @variable_columns (col, ...)".to_string())?;
            let cols: Vec<String> = inner
                .split(',')
                .map(|c| c.trim().to_string())
                .filter(|c| !c.is_empty())
                .collect();
            if cols.is_empty() {
                return Err("@variable_columns needs at least one column".to_string());
            }
            Ok(Annotation::VariableColumns(cols))
        }
        "hard_constraint" | "soft_constraint" => Err(format!("unexpected text after @{name}")),
        other => Err(format!("unknown annotation '@{other}'")),
    }
}
