use super::lexer::{lex, Tok, Token};
use super::*;

/// Words that cannot be used as a bare alias or column name.
const RESERVED: &[&str] = &[
    "ALL", "AND", "AS", "ASC", "BETWEEN", "BY", "CASE", "CAST", "CROSS", "DESC", "DISTINCT", "ELSE", "END",
    "EXCEPT", "EXISTS", "FROM", "FULL", "GROUP", "HAVING", "IN", "INNER", "INTERSECT", "IS", "JOIN", "LEFT",
    "LIKE", "LIMIT", "NATURAL", "NOT", "NULL", "OFFSET", "ON", "OR", "ORDER", "OUTER", "OVER", "RIGHT",
    "SELECT", "THEN", "UNION", "USING", "WHEN", "WHERE", "WINDOW", "WITH",
];

/// Parses one statement of the supported subset.
pub fn parse_sql(src: &str) -> Result<Query, SqlError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, pos: 0 };
    if p.peek_kw("WITH") {
        return Err(p.unsupported("common table expressions (WITH)"));
    }
    let q = p.query()?;
    if p.peek_kw("UNION") || p.peek_kw("INTERSECT") || p.peek_kw("EXCEPT") {
        return Err(p.unsupported("set operations"));
    }
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, msg: impl Into<String>) -> SqlError {
        SqlError::new(SqlErrorKind::Syntax, self.offset(), msg)
    }

    fn unsupported(&self, what: &str) -> SqlError {
        SqlError::new(SqlErrorKind::Unsupported, self.offset(), what)
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Word { text, .. } => format!("`{text}`"),
            Tok::Quoted(s) => format!("`\"{s}\"`"),
            Tok::Number(n) => format!("`{n}`"),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn expected(&self, what: &str) -> SqlError {
        self.syntax(format!("expected {what}, found {}", self.describe()))
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word { upper, .. } if upper == kw)
    }

    fn peek_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Tok::Word { upper, .. } if upper == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.expected(kw))
        }
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{s}`")))
        }
    }

    fn peek_ident(&self) -> bool {
        match self.peek() {
            Tok::Word { upper, .. } => !RESERVED.contains(&upper.as_str()),
            Tok::Quoted(_) => true,
            _ => false,
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SqlError> {
        if !self.peek_ident() {
            return Err(self.expected(what));
        }
        match self.bump().tok {
            Tok::Word { text, .. } | Tok::Quoted(text) => Ok(text),
            _ => unreachable!(),
        }
    }

    fn alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_kw("AS") {
            return match self.peek() {
                Tok::Str(_) => match self.bump().tok {
                    Tok::Str(s) => Ok(Some(s)),
                    _ => unreachable!(),
                },
                _ => self.ident("alias").map(Some),
            };
        }
        if self.peek_ident() {
            return self.ident("alias").map(Some);
        }
        Ok(None)
    }

    fn query(&mut self) -> Result<Query, SqlError> {
        self.expect_kw("SELECT")?;
        let distinct = self.eat_kw("DISTINCT");
        if !distinct {
            self.eat_kw("ALL");
        }
        let mut select = vec![self.select_item()?];
        while self.eat_sym(",") {
            select.push(self.select_item()?);
        }

        let mut from = None;
        let mut joins = Vec::new();
        if self.eat_kw("FROM") {
            from = Some(self.table_ref()?);
            loop {
                if self.eat_sym(",") {
                    let table = self.table_ref()?;
                    joins.push(Join {
                        kind: JoinKind::Comma,
                        table,
                        on: None,
                        using: Vec::new(),
                    });
                    continue;
                }
                let Some(kind) = self.join_kind()? else { break };
                let table = self.table_ref()?;
                let mut on = None;
                let mut using = Vec::new();
                if kind != JoinKind::Cross {
                    if self.eat_kw("ON") {
                        on = Some(self.expr()?);
                    } else if self.eat_kw("USING") {
                        self.expect_sym("(")?;
                        using.push(self.ident("column name")?);
                        while self.eat_sym(",") {
                            using.push(self.ident("column name")?);
                        }
                        self.expect_sym(")")?;
                    }
                }
                joins.push(Join { kind, table, on, using });
            }
        }

        let where_clause = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            group_by.push(self.expr()?);
            while self.eat_sym(",") {
                group_by.push(self.expr()?);
            }
        }
        let having = if self.eat_kw("HAVING") { Some(self.expr()?) } else { None };
        if self.peek_kw("WINDOW") {
            return Err(self.unsupported("window functions"));
        }
        let mut order_by = Vec::new();
        if self.eat_kw("ORDER") {
            self.expect_kw("BY")?;
            loop {
                let expr = self.expr()?;
                let descending = if self.eat_kw("DESC") {
                    true
                } else {
                    self.eat_kw("ASC");
                    false
                };
                if self.eat_kw("NULLS") && !(self.eat_kw("FIRST") || self.eat_kw("LAST")) {
                    return Err(self.expected("FIRST or LAST"));
                }
                order_by.push(OrderItem { expr, descending });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let mut limit = None;
        let mut offset = None;
        if self.eat_kw("LIMIT") {
            limit = Some(self.expr()?);
            if self.eat_kw("OFFSET") {
                offset = Some(self.expr()?);
            } else if self.eat_sym(",") {
                // SQLite's `LIMIT offset, count`.
                offset = limit.take();
                limit = Some(self.expr()?);
            }
        }
        Ok(Query {
            distinct,
            select,
            from,
            joins,
            where_clause,
            group_by,
            having,
            order_by,
            limit,
            offset,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Wildcard);
        }
        if self.peek_ident() && matches!(self.peek_at(1), Tok::Sym(".")) && matches!(self.peek_at(2), Tok::Sym("*")) {
            let q = self.ident("table name")?;
            self.bump();
            self.bump();
            return Ok(SelectItem::QualifiedWildcard(q));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        if self.peek_sym("(") {
            if self.peek_kw_at(1, "SELECT") {
                return Err(self.unsupported("subqueries"));
            }
            return Err(self.expected("table name"));
        }
        if self.peek_kw("UNNEST") {
            return Err(self.unsupported("UNNEST"));
        }
        let offset = self.offset();
        let mut name = self.ident("table name")?;
        while self.eat_sym(".") {
            // Schema-qualified names keep only the last part.
            name = self.ident("table name")?;
        }
        if self.peek_sym("(") {
            return Err(self.unsupported("table-valued functions"));
        }
        let alias = self.alias()?;
        Ok(TableRef { name, alias, offset })
    }

    fn join_kind(&mut self) -> Result<Option<JoinKind>, SqlError> {
        if self.peek_kw("NATURAL") {
            return Err(self.unsupported("NATURAL joins"));
        }
        let kind = if self.eat_kw("JOIN") {
            return Ok(Some(JoinKind::Inner));
        } else if self.eat_kw("INNER") {
            JoinKind::Inner
        } else if self.eat_kw("LEFT") {
            self.eat_kw("OUTER");
            JoinKind::Left
        } else if self.eat_kw("RIGHT") {
            self.eat_kw("OUTER");
            JoinKind::Right
        } else if self.eat_kw("FULL") {
            self.eat_kw("OUTER");
            JoinKind::Full
        } else if self.eat_kw("CROSS") {
            JoinKind::Cross
        } else {
            return Ok(None);
        };
        self.expect_kw("JOIN")?;
        Ok(Some(kind))
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, SqlError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.and_expr()?;
        while self.eat_kw("OR") {
            let right = self.and_expr()?;
            left = binary(BinaryOp::Or, left, right);
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.not_expr()?;
        while self.eat_kw("AND") {
            let right = self.not_expr()?;
            left = binary(BinaryOp::And, left, right);
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<Expr, SqlError> {
        if self.peek_kw("NOT") && !self.peek_kw_at(1, "EXISTS") {
            self.bump();
            let expr = self.not_expr()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Not,
                expr: Box::new(expr),
            });
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Expr, SqlError> {
        let left = self.concat_expr()?;
        let op = match self.peek() {
            Tok::Sym("=") | Tok::Sym("==") => Some(BinaryOp::Eq),
            Tok::Sym("!=") | Tok::Sym("<>") => Some(BinaryOp::NotEq),
            Tok::Sym("<") => Some(BinaryOp::Lt),
            Tok::Sym("<=") => Some(BinaryOp::LtEq),
            Tok::Sym(">") => Some(BinaryOp::Gt),
            Tok::Sym(">=") => Some(BinaryOp::GtEq),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            if self.peek_kw("ANY") || self.peek_kw("ALL") || self.peek_kw("SOME") {
                return Err(self.unsupported("quantified comparisons"));
            }
            let right = self.concat_expr()?;
            return Ok(binary(op, left, right));
        }
        if self.eat_kw("IS") {
            let negated = self.eat_kw("NOT");
            self.expect_kw("NULL")?;
            return Ok(Expr::IsNull {
                expr: Box::new(left),
                negated,
            });
        }
        if self.eat_kw("NOTNULL") {
            return Ok(Expr::IsNull {
                expr: Box::new(left),
                negated: true,
            });
        }
        if self.eat_kw("ISNULL") {
            return Ok(Expr::IsNull {
                expr: Box::new(left),
                negated: false,
            });
        }
        let negated = if self.peek_kw("NOT")
            && (self.peek_kw_at(1, "BETWEEN") || self.peek_kw_at(1, "IN") || self.peek_kw_at(1, "LIKE"))
        {
            self.bump();
            true
        } else {
            false
        };
        if self.eat_kw("BETWEEN") {
            let low = self.concat_expr()?;
            self.expect_kw("AND")?;
            let high = self.concat_expr()?;
            return Ok(Expr::Between {
                expr: Box::new(left),
                low: Box::new(low),
                high: Box::new(high),
                negated,
            });
        }
        if self.eat_kw("IN") {
            self.expect_sym("(")?;
            if self.peek_kw("SELECT") {
                return Err(self.unsupported("subqueries"));
            }
            let mut list = vec![self.expr()?];
            while self.eat_sym(",") {
                list.push(self.expr()?);
            }
            self.expect_sym(")")?;
            return Ok(Expr::InList {
                expr: Box::new(left),
                list,
                negated,
            });
        }
        if self.eat_kw("LIKE") {
            let pattern = self.concat_expr()?;
            if self.eat_kw("ESCAPE") {
                self.concat_expr()?;
            }
            return Ok(Expr::Like {
                expr: Box::new(left),
                pattern: Box::new(pattern),
                negated,
            });
        }
        if negated {
            return Err(self.expected("BETWEEN, IN or LIKE"));
        }
        Ok(left)
    }

    fn concat_expr(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.additive()?;
        while self.eat_sym("||") {
            let right = self.additive()?;
            left = binary(BinaryOp::Concat, left, right);
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = if self.eat_sym("+") {
                BinaryOp::Add
            } else if self.eat_sym("-") {
                BinaryOp::Sub
            } else {
                return Ok(left);
            };
            let right = self.multiplicative()?;
            left = binary(op, left, right);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, SqlError> {
        let mut left = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinaryOp::Mul
            } else if self.eat_sym("/") {
                BinaryOp::Div
            } else if self.eat_sym("%") {
                BinaryOp::Mod
            } else {
                return Ok(left);
            };
            let right = self.unary()?;
            left = binary(op, left, right);
        }
    }

    fn unary(&mut self) -> Result<Expr, SqlError> {
        if self.eat_sym("-") {
            let expr = self.unary()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Neg,
                expr: Box::new(expr),
            });
        }
        if self.eat_sym("+") {
            let expr = self.unary()?;
            return Ok(Expr::Unary {
                op: UnaryOp::Plus,
                expr: Box::new(expr),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::Literal(SqlLiteral::Number(n)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Literal(SqlLiteral::String(s)))
            }
            Tok::Sym("(") => {
                if self.peek_kw_at(1, "SELECT") || self.peek_kw_at(1, "WITH") {
                    self.bump();
                    return Err(self.unsupported("subqueries"));
                }
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Word { upper, text } => match upper.as_str() {
                "NULL" => {
                    self.bump();
                    Ok(Expr::Literal(SqlLiteral::Null))
                }
                "TRUE" | "FALSE" if !matches!(self.peek_at(1), Tok::Sym("(") | Tok::Sym(".")) => {
                    self.bump();
                    Ok(Expr::Literal(SqlLiteral::Boolean(upper == "TRUE")))
                }
                "EXISTS" => Err(self.unsupported("EXISTS")),
                "NOT" if self.peek_kw_at(1, "EXISTS") => {
                    self.bump();
                    Err(self.unsupported("EXISTS"))
                }
                "CASE" => self.case_expr(),
                "CAST" => self.cast_expr(),
                "UNNEST" => Err(self.unsupported("UNNEST")),
                // DATE '2017-01-01' style typed literals.
                "DATE" | "TIMESTAMP" if matches!(self.peek_at(1), Tok::Str(_)) => {
                    self.bump();
                    self.primary()
                }
                _ if RESERVED.contains(&upper.as_str()) => Err(self.expected("expression")),
                _ => {
                    self.bump();
                    self.after_name(text)
                }
            },
            Tok::Quoted(text) => {
                self.bump();
                self.after_name(text)
            }
            _ => Err(self.expected("expression")),
        }
    }

    fn after_name(&mut self, name: String) -> Result<Expr, SqlError> {
        if self.peek_sym("(") {
            return self.function(name);
        }
        if self.eat_sym(".") {
            if self.peek_sym("*") {
                return Err(self.syntax("qualified wildcard is only allowed as a select item"));
            }
            let column = self.ident("column name")?;
            if self.peek_sym(".") {
                return Err(self.syntax("too many name qualifiers"));
            }
            return Ok(Expr::Column {
                qualifier: Some(name),
                name: column,
            });
        }
        Ok(Expr::Column { qualifier: None, name })
    }

    fn function(&mut self, name: String) -> Result<Expr, SqlError> {
        let upper = name.to_ascii_uppercase();
        self.expect_sym("(")?;
        let mut args = Vec::new();
        let mut distinct = false;
        let mut star = false;
        if self.eat_sym("*") {
            star = true;
        } else if !self.peek_sym(")") {
            distinct = self.eat_kw("DISTINCT");
            if !distinct {
                self.eat_kw("ALL");
            }
            args.push(self.expr()?);
            while self.eat_sym(",") {
                args.push(self.expr()?);
            }
        }
        self.expect_sym(")")?;
        if self.peek_kw("FILTER") {
            return Err(self.unsupported("aggregate FILTER clauses"));
        }
        if self.peek_kw("OVER") {
            return Err(self.unsupported("window functions"));
        }
        Ok(Expr::Function {
            name: upper,
            args,
            distinct,
            star,
        })
    }

    fn case_expr(&mut self) -> Result<Expr, SqlError> {
        self.expect_kw("CASE")?;
        let operand = if self.peek_kw("WHEN") { None } else { Some(Box::new(self.expr()?)) };
        let mut whens = Vec::new();
        while self.eat_kw("WHEN") {
            let cond = self.expr()?;
            self.expect_kw("THEN")?;
            let value = self.expr()?;
            whens.push((cond, value));
        }
        if whens.is_empty() {
            return Err(self.expected("WHEN"));
        }
        let otherwise = if self.eat_kw("ELSE") { Some(Box::new(self.expr()?)) } else { None };
        self.expect_kw("END")?;
        Ok(Expr::Case {
            operand,
            whens,
            otherwise,
        })
    }

    fn cast_expr(&mut self) -> Result<Expr, SqlError> {
        self.expect_kw("CAST")?;
        self.expect_sym("(")?;
        let expr = self.expr()?;
        self.expect_kw("AS")?;
        let mut words = vec![self.ident("type name")?];
        while self.peek_ident() {
            words.push(self.ident("type name")?);
        }
        let mut type_name = words.join(" ").to_ascii_uppercase();
        if self.eat_sym("(") {
            let mut args = Vec::new();
            loop {
                match self.bump().tok {
                    Tok::Number(n) => args.push(n),
                    _ => return Err(self.expected("type length")),
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym(")")?;
            type_name = format!("{type_name}({})", args.join(","));
        }
        self.expect_sym(")")?;
        Ok(Expr::Cast {
            expr: Box::new(expr),
            type_name,
        })
    }
}

fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
    Expr::Binary {
        op,
        left: Box::new(left),
        right: Box::new(right),
    }
}
