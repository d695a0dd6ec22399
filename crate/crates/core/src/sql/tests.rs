use super::*;

const GOLDEN: &str = "SELECT strftime('%Y-%m', ga_sessions.date) AS month,
       CASE WHEN totals.transactions >= 1 AND hits.productRevenue IS NOT NULL THEN 'purchase'
            ELSE 'non_purchase' END AS session_type,
       SUM(totals.pageviews) / COUNT(DISTINCT ga_sessions.fullVisitorId) AS avg_pageviews
FROM ga_sessions
JOIN totals ON totals.session_id = ga_sessions.session_id
JOIN hits ON hits.session_id = ga_sessions.session_id
WHERE ga_sessions.date BETWEEN '2017-04-01' AND '2017-07-31'
  AND ((totals.transactions >= 1 AND hits.productRevenue IS NOT NULL)
       OR (totals.transactions IS NULL AND hits.productRevenue IS NULL))
GROUP BY month, session_type
ORDER BY month;";

fn err(sql: &str) -> SqlError {
    parse_sql(sql).expect_err(sql)
}

#[test]
fn parses_golden_query() {
    let q = parse_sql(GOLDEN).unwrap();
    assert_eq!(q.select.len(), 3);
    let names: Vec<&str> = q.tables().iter().map(|t| t.name.as_str()).collect();
    assert_eq!(names, ["ga_sessions", "totals", "hits"]);
    assert_eq!(q.select_aliases(), ["month", "session_type", "avg_pageviews"]);
    assert_eq!(q.group_by, [Expr::column(None, "month"), Expr::column(None, "session_type")]);
    assert!(q.is_aggregated());
    let SelectItem::Expr { expr, .. } = &q.select[2] else { panic!() };
    let Expr::Binary { op: BinaryOp::Div, left, right } = expr else { panic!("{expr:?}") };
    assert!(matches!(&**left, Expr::Function { name, .. } if name == "SUM"));
    assert!(matches!(&**right, Expr::Function { name, distinct: true, .. } if name == "COUNT"));
    let conj = q.where_clause.as_ref().unwrap().conjuncts();
    assert_eq!(conj.len(), 2);
    assert!(matches!(conj[0], Expr::Between { negated: false, .. }));
}

#[test]
fn misspelled_keyword_reports_offset_zero() {
    let e = err("SELEC a FROM t");
    assert_eq!(e.kind, SqlErrorKind::Syntax);
    assert_eq!(e.offset, 0);
}

#[test]
fn syntax_errors_point_at_the_offending_token() {
    let e = err("SELECT a FROM t WHERE");
    assert_eq!((e.kind, e.offset), (SqlErrorKind::Syntax, 21));
    let e = err("SELECT a, FROM t");
    assert_eq!((e.kind, e.offset), (SqlErrorKind::Syntax, 10));
    let e = err("SELECT 'abc FROM t");
    assert_eq!((e.kind, e.offset), (SqlErrorKind::Syntax, 7));
    let e = err("SELECT a FROM t GROUP a");
    assert_eq!((e.kind, e.offset), (SqlErrorKind::Syntax, 22));
}

#[test]
fn unsupported_constructs_are_distinct_from_syntax_errors() {
    for sql in [
        "WITH x AS (SELECT 1) SELECT * FROM x",
        "SELECT a FROM t UNION SELECT a FROM u",
        "SELECT a FROM (SELECT a FROM t)",
        "SELECT a FROM t WHERE a IN (SELECT a FROM u)",
        "SELECT a FROM t WHERE EXISTS (SELECT 1 FROM u)",
        "SELECT a FROM t WHERE NOT EXISTS (SELECT 1 FROM u)",
        "SELECT ROW_NUMBER() OVER (ORDER BY a) FROM t",
        "SELECT x FROM UNNEST(t.arr)",
        "SELECT (SELECT MAX(a) FROM t) AS m",
        "SELECT a FROM t; SELECT b FROM u",
    ] {
        assert_eq!(err(sql).kind, SqlErrorKind::Unsupported, "{sql}");
    }
}

#[test]
fn operator_precedence() {
    let q = parse_sql("SELECT a FROM t WHERE a = 1 OR b = 2 AND NOT c < 3 + 4 * 5").unwrap();
    let Some(Expr::Binary { op: BinaryOp::Or, right, .. }) = &q.where_clause else { panic!() };
    let Expr::Binary { op: BinaryOp::And, right, .. } = &**right else { panic!() };
    let Expr::Unary { op: UnaryOp::Not, expr } = &**right else { panic!() };
    let Expr::Binary { op: BinaryOp::Lt, right, .. } = &**expr else { panic!() };
    let Expr::Binary { op: BinaryOp::Add, right, .. } = &**right else { panic!() };
    assert!(matches!(&**right, Expr::Binary { op: BinaryOp::Mul, .. }));
}

#[test]
fn joins_aliases_and_clauses() {
    let q = parse_sql(
        "SELECT DISTINCT e.name AS n, d.* FROM emp e LEFT OUTER JOIN dept AS d USING (dept_id), site \
         CROSS JOIN region r WHERE e.salary NOT BETWEEN 1 AND 2 AND e.name NOT LIKE 'A%' \
         AND e.id NOT IN (1, 2) AND e.x IS NULL HAVING COUNT(*) > 1 ORDER BY 1 DESC, n LIMIT 10 OFFSET 5",
    )
    .unwrap();
    assert!(q.distinct);
    assert_eq!(q.from.as_ref().unwrap().binding(), "e");
    let kinds: Vec<JoinKind> = q.joins.iter().map(|j| j.kind).collect();
    assert_eq!(kinds, [JoinKind::Left, JoinKind::Comma, JoinKind::Cross]);
    assert_eq!(q.joins[0].using, ["dept_id"]);
    assert_eq!(q.joins[0].table.binding(), "d");
    assert_eq!(q.select[1], SelectItem::QualifiedWildcard("d".into()));
    assert_eq!(q.where_clause.as_ref().unwrap().conjuncts().len(), 4);
    assert!(q.order_by[0].descending);
    assert!(q.limit.is_some() && q.offset.is_some());
    let Some(Expr::Binary { left, .. }) = &q.having else { panic!() };
    assert!(matches!(&**left, Expr::Function { star: true, .. }));
}

#[test]
fn cast_case_and_literals() {
    let q = parse_sql(
        "SELECT CAST(a AS DECIMAL(10, 2)), CASE b WHEN 1 THEN 'x' END, -1.5e3, \"quoted col\", [br], `bt`, \
         'it''s', NULL, TRUE FROM t",
    )
    .unwrap();
    let exprs: Vec<&Expr> = q.expressions();
    assert!(matches!(exprs[0], Expr::Cast { type_name, .. } if type_name == "DECIMAL(10,2)"));
    assert!(matches!(exprs[1], Expr::Case { operand: Some(_), otherwise: None, .. }));
    assert!(matches!(exprs[2], Expr::Unary { op: UnaryOp::Neg, .. }));
    assert_eq!(exprs[3], &Expr::column(None, "quoted col"));
    assert_eq!(exprs[4], &Expr::column(None, "br"));
    assert_eq!(exprs[6], &Expr::Literal(SqlLiteral::String("it's".into())));
    assert_eq!(exprs[7], &Expr::Literal(SqlLiteral::Null));
    assert_eq!(exprs[8], &Expr::Literal(SqlLiteral::Boolean(true)));
}

#[test]
fn column_helpers() {
    let q = parse_sql("SELECT d.dept, salary, AVG(e.salary) FROM e").unwrap();
    let cols: Vec<_> = q.expressions().iter().flat_map(|e| e.bare_columns()).collect();
    assert_eq!(cols, [(Some("d"), "dept"), (None, "salary")]);
    let all: Vec<_> = q.expressions().iter().flat_map(|e| e.columns()).collect();
    assert_eq!(all.len(), 3);
}

#[test]
fn comments_and_trailing_semicolon() {
    let q = parse_sql("-- header\nSELECT /* inline */ a FROM t ;  \n").unwrap();
    assert_eq!(q.tables()[0].name, "t");
    assert_eq!(err("SELECT a /* open").kind, SqlErrorKind::Syntax);
}
