//! Candidate SQL validation in three levels: executability against the
//! database, consistency with the terminals and scaffold, and agreement with
//! the question's math entities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::SimilarityModel;
use crate::decompose::{match_attribute, ColumnRef, EntityKind, Literal, MathEntity};
use crate::schema::sqlite::open_read_only;
use crate::schema::Schema;
use crate::sql::{parse_sql, BinaryOp, Expr, JoinKind, Query, SelectItem, SqlErrorKind, SqlLiteral, UnaryOp};
use crate::steiner::SteinerScaffold;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    Syntax,
    Execution,
    MissingTerminal,
    IrrelevantJoin,
    UnmappedAttribute,
    GroupbyRule,
    AggMismatch,
    ConstraintMismatch,
}

impl ViolationCode {
    pub fn level(self) -> u8 {
        match self {
            ViolationCode::Syntax | ViolationCode::Execution => 1,
            ViolationCode::MissingTerminal | ViolationCode::IrrelevantJoin | ViolationCode::UnmappedAttribute => 2,
            ViolationCode::GroupbyRule | ViolationCode::AggMismatch | ViolationCode::ConstraintMismatch => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::Syntax => "SYNTAX",
            ViolationCode::Execution => "EXECUTION",
            ViolationCode::MissingTerminal => "MISSING_TERMINAL",
            ViolationCode::IrrelevantJoin => "IRRELEVANT_JOIN",
            ViolationCode::UnmappedAttribute => "UNMAPPED_ATTRIBUTE",
            ViolationCode::GroupbyRule => "GROUPBY_RULE",
            ViolationCode::AggMismatch => "AGG_MISMATCH",
            ViolationCode::ConstraintMismatch => "CONSTRAINT_MISMATCH",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub level: u8,
    pub code: ViolationCode,
    pub message: String,
    /// Table, column, phrase or `a -- b` edge the violation is about.
    pub subject: String,
}

impl Violation {
    fn new(code: ViolationCode, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            level: code.level(),
            code,
            message: message.into(),
            subject: subject.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[L{} {}] {}: {}", self.level, self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelStatus {
    Pass,
    Fail,
    /// Suppressed by an earlier failure.
    NotRun,
    /// The query is outside the parsed subset; only execution was checked.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelResult {
    pub status: LevelStatus,
    pub violations: Vec<Violation>,
}

impl LevelResult {
    fn from_violations(violations: Vec<Violation>) -> Self {
        let status = if violations.is_empty() { LevelStatus::Pass } else { LevelStatus::Fail };
        LevelResult { status, violations }
    }

    pub fn passed(&self) -> bool {
        self.status == LevelStatus::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub level: LevelResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub level1: LevelStatus,
    pub level2: LevelStatus,
    pub level3: LevelStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_count: Option<u64>,
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ValidationReport {
    /// Levels 2 and 3 did not fail. A skipped level counts as not failing.
    pub fn semantic_ok(&self) -> bool {
        self.level1 == LevelStatus::Pass && self.level2 != LevelStatus::Fail && self.level3 != LevelStatus::Fail
    }

    pub fn all_passed(&self) -> bool {
        [self.level1, self.level2, self.level3].iter().all(|s| *s == LevelStatus::Pass)
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::MalformedDocument(format!("validation report: {e}")))
    }
}

/// Everything levels 2 and 3 check a query against.
pub struct ValidationContext<'a> {
    pub schema: &'a Schema,
    pub terminals: &'a [String],
    /// Join conditions may follow a scaffold edge; without one only FKs count.
    pub scaffold: Option<&'a SteinerScaffold>,
    pub entities: &'a [MathEntity],
    pub model: &'a SimilarityModel<'a>,
}

fn quoted_subject(msg: &str, prefix: &str) -> Option<String> {
    let rest = &msg[msg.find(prefix)? + prefix.len()..];
    let end = rest.find(|c: char| c.is_whitespace() || c == ',').unwrap_or(rest.len());
    (end > 0).then(|| rest[..end].to_string())
}

fn engine_violation(msg: &str) -> Violation {
    if let Some(func) = quoted_subject(msg, "no such function: ") {
        return Violation::new(
            ViolationCode::Execution,
            func.clone(),
            format!("function `{func}` is not available in the bundled SQLite engine ({msg})"),
        );
    }
    if msg.contains("syntax error") || msg.contains("incomplete input") || msg.contains("unrecognized token") {
        return Violation::new(ViolationCode::Syntax, "statement", msg);
    }
    let subject = ["no such column: ", "no such table: ", "ambiguous column name: "]
        .iter()
        .find_map(|p| quoted_subject(msg, p))
        .unwrap_or_else(|| "statement".to_string());
    Violation::new(ViolationCode::Execution, subject, msg)
}

fn engine_message(e: &rusqlite::Error) -> String {
    match e {
        rusqlite::Error::SqliteFailure(_, Some(m)) => m.clone(),
        other => other.to_string(),
    }
}

/// Level 1: runs `sql` on a read-only handle and counts the rows.
///
/// Engine errors become violations; an unreadable database is an `Err`.
pub fn validate_execution(sql: &str, path: &Path) -> Result<ExecutionResult> {
    let conn = open_read_only(path)?;
    let fail = |v: Violation| ExecutionResult {
        level: LevelResult::from_violations(vec![v]),
        row_count: None,
    };
    let mut stmt = match conn.prepare(sql) {
        Ok(s) => s,
        Err(rusqlite::Error::MultipleStatement) => {
            return Ok(fail(Violation::new(
                ViolationCode::Syntax,
                "statement",
                "multiple statements are not allowed",
            )))
        }
        Err(e) => return Ok(fail(engine_violation(&engine_message(&e)))),
    };
    if !stmt.readonly() {
        return Ok(fail(Violation::new(
            ViolationCode::Execution,
            "statement",
            "only read-only SELECT statements are accepted",
        )));
    }
    let mut rows = match stmt.query([]) {
        Ok(r) => r,
        Err(e) => return Ok(fail(engine_violation(&engine_message(&e)))),
    };
    let mut count = 0u64;
    loop {
        match rows.next() {
            Ok(Some(_)) => count += 1,
            Ok(None) => break,
            Err(e) => return Ok(fail(engine_violation(&engine_message(&e)))),
        }
    }
    Ok(ExecutionResult {
        level: LevelResult::from_violations(Vec::new()),
        row_count: Some(count),
    })
}

/// Resolves query names to schema tables and columns.
struct Binder<'a> {
    schema: &'a Schema,
    /// (binding, table) in FROM/JOIN order.
    bindings: Vec<(String, String)>,
}

impl<'a> Binder<'a> {
    fn new(query: &Query, schema: &'a Schema) -> Self {
        let bindings = query
            .tables()
            .iter()
            .map(|t| (t.binding().to_string(), canonical_table(schema, &t.name)))
            .collect();
        Binder { schema, bindings }
    }

    fn tables(&self) -> BTreeSet<&str> {
        self.bindings.iter().map(|(_, t)| t.as_str()).collect()
    }

    fn table_for(&self, qualifier: &str) -> Option<&str> {
        self.bindings
            .iter()
            .find(|(b, _)| b.eq_ignore_ascii_case(qualifier))
            .or_else(|| self.bindings.iter().find(|(_, t)| t.eq_ignore_ascii_case(qualifier)))
            .map(|(_, t)| t.as_str())
    }

    fn column_in(&self, table: &str, name: &str) -> Option<String> {
        self.schema.table(table)?.column_ci(name).map(|c| c.name.clone())
    }

    /// `(table, column)` for a column reference, or `None` for names that are
    /// not columns of any bound table (select aliases, typos).
    fn resolve(&self, qualifier: Option<&str>, name: &str) -> Option<(String, String)> {
        match qualifier {
            Some(q) => {
                let table = self.table_for(q)?;
                let column = self.column_in(table, name).unwrap_or_else(|| name.to_string());
                Some((table.to_string(), column))
            }
            None => self
                .bindings
                .iter()
                .find_map(|(_, t)| self.column_in(t, name).map(|c| (t.clone(), c))),
        }
    }

    fn resolve_expr(&self, e: &Expr) -> Vec<(String, String)> {
        e.columns().into_iter().filter_map(|(q, n)| self.resolve(q, n)).collect()
    }

    /// Copy of `e` with every resolvable column rewritten to `table.column`,
    /// so equivalent spellings compare equal.
    fn canonical(&self, e: &Expr) -> Expr {
        match e {
            Expr::Column { qualifier, name } => match self.resolve(qualifier.as_deref(), name) {
                Some((t, c)) => Expr::column(Some(&t), &c),
                None => Expr::column(qualifier.as_deref(), &name.to_ascii_lowercase()),
            },
            Expr::Literal(_) => e.clone(),
            Expr::Unary { op, expr } => Expr::Unary {
                op: *op,
                expr: Box::new(self.canonical(expr)),
            },
            Expr::Binary { op, left, right } => Expr::Binary {
                op: *op,
                left: Box::new(self.canonical(left)),
                right: Box::new(self.canonical(right)),
            },
            Expr::IsNull { expr, negated } => Expr::IsNull {
                expr: Box::new(self.canonical(expr)),
                negated: *negated,
            },
            Expr::Between { expr, low, high, negated } => Expr::Between {
                expr: Box::new(self.canonical(expr)),
                low: Box::new(self.canonical(low)),
                high: Box::new(self.canonical(high)),
                negated: *negated,
            },
            Expr::InList { expr, list, negated } => Expr::InList {
                expr: Box::new(self.canonical(expr)),
                list: list.iter().map(|x| self.canonical(x)).collect(),
                negated: *negated,
            },
            Expr::Like { expr, pattern, negated } => Expr::Like {
                expr: Box::new(self.canonical(expr)),
                pattern: Box::new(self.canonical(pattern)),
                negated: *negated,
            },
            Expr::Function { name, args, distinct, star } => Expr::Function {
                name: name.clone(),
                args: args.iter().map(|x| self.canonical(x)).collect(),
                distinct: *distinct,
                star: *star,
            },
            Expr::Case { operand, whens, otherwise } => Expr::Case {
                operand: operand.as_ref().map(|x| Box::new(self.canonical(x))),
                whens: whens.iter().map(|(w, t)| (self.canonical(w), self.canonical(t))).collect(),
                otherwise: otherwise.as_ref().map(|x| Box::new(self.canonical(x))),
            },
            Expr::Cast { expr, type_name } => Expr::Cast {
                expr: Box::new(self.canonical(expr)),
                type_name: type_name.clone(),
            },
        }
    }
}

fn canonical_table(schema: &Schema, name: &str) -> String {
    schema.table_ci(name).map_or_else(|| name.to_string(), |t| t.name.clone())
}

fn column_text(qualifier: Option<&str>, name: &str) -> String {
    match qualifier {
        Some(q) => format!("{q}.{name}"),
        None => name.to_string(),
    }
}

fn edge_subject(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a} -- {b}")
    } else {
        format!("{b} -- {a}")
    }
}

/// A column-equality join condition between two different tables.
struct JoinCondition {
    left: (String, String),
    right: (String, String),
}

fn join_conditions(query: &Query, binder: &Binder) -> Vec<JoinCondition> {
    let mut out = Vec::new();
    let push_eq = |e: &Expr, out: &mut Vec<JoinCondition>| {
        for c in e.conjuncts() {
            if let Expr::Binary {
                op: BinaryOp::Eq,
                left,
                right,
            } = c
            {
                if let (Expr::Column { qualifier: ql, name: nl }, Expr::Column { qualifier: qr, name: nr }) =
                    (&**left, &**right)
                {
                    if let (Some(l), Some(r)) = (binder.resolve(ql.as_deref(), nl), binder.resolve(qr.as_deref(), nr)) {
                        if l.0 != r.0 {
                            out.push(JoinCondition { left: l, right: r });
                        }
                    }
                }
            }
        }
    };
    for (k, join) in query.joins.iter().enumerate() {
        if let Some(on) = &join.on {
            push_eq(on, &mut out);
        }
        let right_table = &binder.bindings[k + 1].1;
        for col in &join.using {
            let left = binder.bindings[..=k]
                .iter()
                .find_map(|(_, t)| binder.column_in(t, col).map(|c| (t.clone(), c)));
            if let (Some(left), Some(rc)) = (left, binder.column_in(right_table, col)) {
                out.push(JoinCondition {
                    left,
                    right: (right_table.clone(), rc),
                });
            }
        }
    }
    // Comma joins put their conditions in WHERE.
    if query.joins.iter().any(|j| j.kind == JoinKind::Comma) {
        if let Some(w) = &query.where_clause {
            push_eq(w, &mut out);
        }
    }
    out
}

struct Matcher<'a> {
    schema: &'a Schema,
    model: &'a SimilarityModel<'a>,
    cache: BTreeMap<String, Vec<ColumnRef>>,
}

impl<'a> Matcher<'a> {
    fn new(schema: &'a Schema, model: &'a SimilarityModel<'a>) -> Self {
        Matcher {
            schema,
            model,
            cache: BTreeMap::new(),
        }
    }

    fn columns(&mut self, phrase: &str) -> Result<Vec<ColumnRef>> {
        if let Some(c) = self.cache.get(phrase) {
            return Ok(c.clone());
        }
        let c = match_attribute(phrase, self.schema, self.model)?;
        self.cache.insert(phrase.to_string(), c.clone());
        Ok(c)
    }

    /// Matches of every target phrase of an entity, in phrase order.
    fn entity_columns(&mut self, e: &MathEntity) -> Result<Vec<ColumnRef>> {
        let mut out = Vec::new();
        for t in &e.target_attributes {
            for c in self.columns(t)? {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        Ok(out)
    }
}

fn hits(matches: &[ColumnRef], used: &[(String, String)]) -> bool {
    matches.iter().any(|m| {
        used.iter().any(|(t, c)| {
            *t == m.table && m.column.as_deref().is_none_or(|mc| mc.eq_ignore_ascii_case(c))
        })
    })
}

/// Level 2: terminals present, joins justified, attributes mapped.
pub fn validate_semantic(query: &Query, ctx: &ValidationContext) -> Result<LevelResult> {
    let binder = Binder::new(query, ctx.schema);
    let mut violations = Vec::new();

    let tables = binder.tables();
    for t in ctx.terminals {
        if !tables.iter().any(|q| q.eq_ignore_ascii_case(t)) {
            violations.push(Violation::new(
                ViolationCode::MissingTerminal,
                t.clone(),
                format!("terminal table `{t}` is not among the FROM/JOIN tables"),
            ));
        }
    }

    let mut reported = BTreeSet::new();
    for jc in join_conditions(query, &binder) {
        let ((ta, ca), (tb, cb)) = (&jc.left, &jc.right);
        let on_scaffold = ctx.scaffold.is_some_and(|s| s.has_edge(ta, tb));
        let on_fk = ctx.schema.fks_between(ta, tb).any(|fk| {
            (fk.from_table == *ta && fk.from_column.eq_ignore_ascii_case(ca) && fk.to_column.eq_ignore_ascii_case(cb))
                || (fk.from_table == *tb && fk.from_column.eq_ignore_ascii_case(cb) && fk.to_column.eq_ignore_ascii_case(ca))
        });
        let subject = edge_subject(ta, tb);
        if !on_scaffold && !on_fk && reported.insert(subject.clone()) {
            violations.push(Violation::new(
                ViolationCode::IrrelevantJoin,
                subject,
                format!("join condition {ta}.{ca} = {tb}.{cb} follows neither a scaffold edge nor a foreign key"),
            ));
        }
    }

    let used: Vec<(String, String)> = query.expressions().iter().flat_map(|e| binder.resolve_expr(e)).collect();
    let mut matcher = Matcher::new(ctx.schema, ctx.model);
    let mut seen = BTreeSet::new();
    for e in ctx.entities {
        for phrase in &e.target_attributes {
            if !seen.insert(phrase.as_str()) {
                continue;
            }
            let matches = matcher.columns(phrase)?;
            if matches.is_empty() {
                continue;
            }
            let table_level = matches
                .iter()
                .any(|m| m.column.is_none() && tables.contains(m.table.as_str()));
            if !table_level && !hits(&matches, &used) {
                let names: Vec<String> = matches
                    .iter()
                    .map(|m| match &m.column {
                        Some(c) => format!("{}.{c}", m.table),
                        None => m.table.clone(),
                    })
                    .collect();
                violations.push(Violation::new(
                    ViolationCode::UnmappedAttribute,
                    phrase.clone(),
                    format!("`{phrase}` maps to {} but the query references none of them", names.join(", ")),
                ));
            }
        }
    }
    Ok(LevelResult::from_violations(violations))
}

fn group_by_rule(query: &Query, binder: &Binder) -> Vec<Violation> {
    if !query.is_aggregated() {
        return Vec::new();
    }
    let aliases = query.select_aliases();
    let mut group_aliases = BTreeSet::new();
    let mut group_exprs = Vec::new();
    for g in &query.group_by {
        match g {
            Expr::Literal(SqlLiteral::Number(n)) => {
                if let Some(SelectItem::Expr { expr, alias }) =
                    n.parse::<usize>().ok().and_then(|k| k.checked_sub(1)).and_then(|k| query.select.get(k))
                {
                    group_exprs.push(binder.canonical(expr));
                    if let Some(a) = alias {
                        group_aliases.insert(a.to_ascii_lowercase());
                    }
                }
            }
            Expr::Column { qualifier: None, name }
                if binder.resolve(None, name).is_none() && aliases.iter().any(|a| a.eq_ignore_ascii_case(name)) =>
            {
                group_aliases.insert(name.to_ascii_lowercase());
            }
            other => group_exprs.push(binder.canonical(other)),
        }
    }
    let mut out = Vec::new();
    for item in &query.select {
        let (expr, alias) = match item {
            SelectItem::Expr { expr, alias } => (expr, alias),
            SelectItem::Wildcard | SelectItem::QualifiedWildcard(_) => {
                out.push(Violation::new(
                    ViolationCode::GroupbyRule,
                    "*",
                    "wildcard in an aggregated SELECT list",
                ));
                continue;
            }
        };
        if alias.as_ref().is_some_and(|a| group_aliases.contains(&a.to_ascii_lowercase())) {
            continue;
        }
        let canon = binder.canonical(expr);
        if group_exprs.contains(&canon) {
            continue;
        }
        for (q, name) in expr.bare_columns() {
            let c = binder.canonical(&Expr::column(q, name));
            if !group_exprs.contains(&c) {
                let text = column_text(q, name);
                if !out.iter().any(|v: &Violation| v.subject == text) {
                    out.push(Violation::new(
                        ViolationCode::GroupbyRule,
                        text.clone(),
                        format!("`{text}` is selected without aggregation but is not in GROUP BY"),
                    ));
                }
            }
        }
    }
    out
}

/// (operation, argument columns, star)
type AggForm = (String, Vec<(String, String)>, bool);

/// Aggregate functions in the query.
fn aggregate_forms(query: &Query, binder: &Binder) -> Vec<AggForm> {
    let mut exprs: Vec<&Expr> = query
        .select
        .iter()
        .filter_map(|s| match s {
            SelectItem::Expr { expr, .. } => Some(expr),
            _ => None,
        })
        .collect();
    exprs.extend(query.having.iter());
    exprs.extend(query.order_by.iter().map(|o| &o.expr));
    let mut out = Vec::new();
    for e in exprs {
        e.walk(&mut |node| {
            if let Expr::Binary {
                op: BinaryOp::Div,
                left,
                right,
            } = node
            {
                // The single aggregate on each side, through casts and scaling.
                let only_call = |x: &'_ Expr| match x.aggregate_calls()[..] {
                    [Expr::Function { name, .. }] => Some(name.clone()),
                    _ => None,
                };
                if matches!(only_call(left).as_deref(), Some("SUM" | "TOTAL"))
                    && only_call(right).as_deref() == Some("COUNT")
                {
                    out.push(("AVG".to_string(), binder.resolve_expr(left), false));
                }
            }
            if let Expr::Function { name, star, .. } = node {
                if node.is_aggregate_call() {
                    let op = if name == "TOTAL" { "SUM" } else { name.as_str() };
                    out.push((op.to_string(), binder.resolve_expr(node), *star));
                }
            }
        });
    }
    out
}

#[derive(Debug)]
enum Atom {
    Cmp {
        cols: Vec<(String, String)>,
        op: BinaryOp,
        lit: SqlLiteral,
    },
    Between {
        cols: Vec<(String, String)>,
        low: SqlLiteral,
        high: SqlLiteral,
    },
    Null {
        cols: Vec<(String, String)>,
        negated: bool,
    },
    In {
        cols: Vec<(String, String)>,
        list: Vec<SqlLiteral>,
    },
}

fn literal_of(e: &Expr) -> Option<SqlLiteral> {
    match e {
        Expr::Literal(l) => Some(l.clone()),
        Expr::Unary {
            op: UnaryOp::Neg,
            expr,
        } => match &**expr {
            Expr::Literal(SqlLiteral::Number(n)) => Some(SqlLiteral::Number(format!("-{n}"))),
            _ => None,
        },
        Expr::Cast { expr, .. } => literal_of(expr),
        Expr::Function { name, args, .. } if matches!(name.as_str(), "DATE" | "DATETIME") && args.len() == 1 => {
            literal_of(&args[0])
        }
        _ => None,
    }
}

fn collect_atoms(e: &Expr, binder: &Binder, negated: bool, out: &mut Vec<Atom>) {
    match e {
        Expr::Binary {
            op: BinaryOp::And | BinaryOp::Or,
            left,
            right,
        } => {
            collect_atoms(left, binder, negated, out);
            collect_atoms(right, binder, negated, out);
        }
        Expr::Unary { op: UnaryOp::Not, expr } => collect_atoms(expr, binder, !negated, out),
        Expr::IsNull { expr, negated: n } => out.push(Atom::Null {
            cols: binder.resolve_expr(expr),
            negated: *n != negated,
        }),
        _ if negated => {}
        Expr::Binary { op, left, right } if op.is_comparison() => {
            if let Some(lit) = literal_of(right) {
                out.push(Atom::Cmp {
                    cols: binder.resolve_expr(left),
                    op: *op,
                    lit,
                });
            } else if let Some(lit) = literal_of(left) {
                out.push(Atom::Cmp {
                    cols: binder.resolve_expr(right),
                    op: op.flipped(),
                    lit,
                });
            }
        }
        Expr::Between {
            expr,
            low,
            high,
            negated: false,
        } => {
            if let (Some(low), Some(high)) = (literal_of(low), literal_of(high)) {
                out.push(Atom::Between {
                    cols: binder.resolve_expr(expr),
                    low,
                    high,
                });
            }
        }
        Expr::InList {
            expr,
            list,
            negated: false,
        } => {
            let list: Vec<SqlLiteral> = list.iter().filter_map(literal_of).collect();
            out.push(Atom::In {
                cols: binder.resolve_expr(expr),
                list,
            });
        }
        _ => {}
    }
}

fn digits(s: &str) -> String {
    s.chars().filter(char::is_ascii_digit).collect()
}

fn literal_matches(want: &Literal, got: &SqlLiteral) -> bool {
    match want {
        Literal::Number(x) => got.as_f64().is_some_and(|y| (x - y).abs() <= 1e-9 * x.abs().max(1.0)),
        Literal::String(s) => matches!(got, SqlLiteral::String(g) if g == s),
        Literal::Date(d) => match got {
            SqlLiteral::String(g) => {
                let (gd, dd) = (digits(g), digits(d));
                !dd.is_empty() && gd.starts_with(&dd)
            }
            _ => false,
        },
        Literal::Null => matches!(got, SqlLiteral::Null),
    }
}

fn entity_op(op: &str) -> Option<BinaryOp> {
    Some(match op {
        "=" | "==" => BinaryOp::Eq,
        "!=" | "<>" => BinaryOp::NotEq,
        "<" => BinaryOp::Lt,
        "<=" => BinaryOp::LtEq,
        ">" => BinaryOp::Gt,
        ">=" => BinaryOp::GtEq,
        _ => return None,
    })
}

fn literal_text(l: &Literal) -> String {
    match l {
        Literal::Number(x) if x.fract() == 0.0 && x.abs() < 1e15 => format!("{}", *x as i64),
        Literal::Number(x) => format!("{x}"),
        Literal::String(s) => format!("'{s}'"),
        Literal::Date(d) => format!("'{d}'"),
        Literal::Null => "NULL".to_string(),
    }
}

fn constraint_subject(e: &MathEntity) -> String {
    let target = e.target_attributes.first().map_or("?", String::as_str);
    match e.operation.as_str() {
        "IS NULL" | "IS NOT NULL" => format!("{target} {}", e.operation),
        "BETWEEN" => format!(
            "{target} BETWEEN {} AND {}",
            e.literals.first().map_or_else(String::new, literal_text),
            e.literals.get(1).map_or_else(String::new, literal_text)
        ),
        op => format!("{target} {op} {}", e.literals.first().map_or_else(String::new, literal_text)),
    }
}

fn constraint_found(e: &MathEntity, matches: &[ColumnRef], atoms: &[Atom]) -> bool {
    let on_target = |cols: &[(String, String)]| matches.is_empty() || hits(matches, cols);
    match e.operation.as_str() {
        op @ ("IS NULL" | "IS NOT NULL") => {
            let want_negated = op == "IS NOT NULL";
            atoms
                .iter()
                .any(|a| matches!(a, Atom::Null { cols, negated } if *negated == want_negated && on_target(cols)))
        }
        "BETWEEN" => {
            let [low, high] = &e.literals[..] else { return false };
            let direct = atoms.iter().any(|a| {
                matches!(a, Atom::Between { cols, low: l, high: h }
                    if on_target(cols) && literal_matches(low, l) && literal_matches(high, h))
            });
            let bound = |want: BinaryOp, lit: &Literal| {
                atoms
                    .iter()
                    .any(|a| matches!(a, Atom::Cmp { cols, op, lit: l } if *op == want && on_target(cols) && literal_matches(lit, l)))
            };
            direct || (bound(BinaryOp::GtEq, low) && bound(BinaryOp::LtEq, high))
        }
        op => {
            let Some(want) = entity_op(op) else { return true };
            let Some(lit) = e.literals.first() else { return true };
            atoms.iter().any(|a| match a {
                Atom::Cmp { cols, op, lit: l } => *op == want && on_target(cols) && literal_matches(lit, l),
                Atom::In { cols, list } => {
                    want == BinaryOp::Eq && on_target(cols) && list.iter().any(|l| literal_matches(lit, l))
                }
                _ => false,
            })
        }
    }
}

/// Level 3: group-by rule, aggregate operations and constraint literals.
pub fn validate_math(query: &Query, ctx: &ValidationContext) -> Result<LevelResult> {
    let binder = Binder::new(query, ctx.schema);
    let mut violations = group_by_rule(query, &binder);
    let mut matcher = Matcher::new(ctx.schema, ctx.model);

    let forms = aggregate_forms(query, &binder);
    for e in ctx.entities.iter().filter(|e| e.kind == EntityKind::Aggregation) {
        let want = match e.operation.as_str() {
            "TOTAL" => "SUM",
            op => op,
        };
        let matches = matcher.entity_columns(e)?;
        let ok = forms.iter().any(|(op, cols, star)| {
            op == want && (matches.is_empty() || (*star && want == "COUNT") || hits(&matches, cols))
        });
        if !ok {
            let subject = format!("{}({})", e.operation, e.target_attributes.join(", "));
            violations.push(Violation::new(
                ViolationCode::AggMismatch,
                subject.clone(),
                format!("no aggregate in the query computes {subject}"),
            ));
        }
    }

    let mut atoms = Vec::new();
    for clause in query.where_clause.iter().chain(query.having.iter()) {
        collect_atoms(clause, &binder, false, &mut atoms);
    }
    for e in ctx.entities.iter().filter(|e| e.is_constraint()) {
        let matches = matcher.entity_columns(e)?;
        if !constraint_found(e, &matches, &atoms) {
            let subject = constraint_subject(e);
            violations.push(Violation::new(
                ViolationCode::ConstraintMismatch,
                subject.clone(),
                format!("WHERE/HAVING has no predicate `{subject}`"),
            ));
        }
    }
    Ok(LevelResult::from_violations(violations))
}

/// All three levels. Level 1 gates the others; levels 2 and 3 both run
/// when level 1 passes. Queries outside the parsed subset get
/// execution-only validation with a note.
pub fn validate_all(sql: &str, db: &Path, ctx: &ValidationContext) -> Result<ValidationReport> {
    let exec = validate_execution(sql, db)?;
    let mut report = ValidationReport {
        level1: exec.level.status,
        level2: LevelStatus::NotRun,
        level3: LevelStatus::NotRun,
        row_count: exec.row_count,
        violations: exec.level.violations,
        notes: Vec::new(),
    };
    if report.level1 != LevelStatus::Pass {
        return Ok(report);
    }
    let query = match parse_sql(sql) {
        Ok(q) => q,
        Err(e) => {
            let why = match e.kind {
                SqlErrorKind::Unsupported => "outside the checked SQL subset",
                SqlErrorKind::Syntax => "not readable by the subset parser",
            };
            report.level2 = LevelStatus::Skipped;
            report.level3 = LevelStatus::Skipped;
            report.notes.push(format!("query is {why} ({e}); execution-only validation"));
            return Ok(report);
        }
    };
    let l2 = validate_semantic(&query, ctx)?;
    let l3 = validate_math(&query, ctx)?;
    report.level2 = l2.status;
    report.level3 = l3.status;
    report.violations.extend(l2.violations);
    report.violations.extend(l3.violations);
    Ok(report)
}
