use super::*;
use crate::cost::{CostWeights, TrigramEmbedder};
use crate::schema::load_schema_from_database;

const ANALYTICS: &str = include_str!("../../../../fixtures/analytics.sql");
const COSTS: &str = include_str!("../../../../fixtures/analytics_costs.json");

const QUESTION: &str = "Between April 1 and July 31 of 2017, using the hits product revenue data along with the totals \
    transactions to classify sessions as purchase (transactions ≥ 1 and productRevenue not null) or non-purchase \
    (transactions null and productRevenue null), compare the average pageviews per visitor for each group by month.";

const GOLDEN: &str = "SELECT strftime('%Y-%m', ga_sessions.date) AS month,
       CASE WHEN totals.transactions >= 1 AND hits.productRevenue IS NOT NULL THEN 'purchase'
            ELSE 'non_purchase' END AS session_type,
       SUM(totals.pageviews) * 1.0 / COUNT(DISTINCT ga_sessions.fullVisitorId) AS avg_pageviews_per_visitor
FROM ga_sessions
JOIN totals ON totals.session_id = ga_sessions.session_id
JOIN hits ON hits.session_id = ga_sessions.session_id
WHERE ga_sessions.date BETWEEN '2017-04-01' AND '2017-07-31'
  AND ((totals.transactions >= 1 AND hits.productRevenue IS NOT NULL)
       OR (totals.transactions IS NULL AND hits.productRevenue IS NULL))
GROUP BY month, session_type";

/// Same shape without `hits`.
const NO_HITS: &str = "SELECT strftime('%Y-%m', ga_sessions.date) AS month,
       SUM(totals.pageviews) * 1.0 / COUNT(DISTINCT ga_sessions.fullVisitorId) AS avg_pageviews_per_visitor
FROM ga_sessions JOIN totals ON totals.session_id = ga_sessions.session_id
WHERE ga_sessions.date BETWEEN '2017-04-01' AND '2017-07-31' AND totals.transactions >= 1
GROUP BY month";

struct Env {
    _dir: tempfile::TempDir,
    db: std::path::PathBuf,
    schema: Schema,
    costs: CostTable,
    provider: TrigramEmbedder,
    templates: Templates,
}

fn env() -> Env {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("analytics.db");
    rusqlite::Connection::open(&db).unwrap().execute_batch(ANALYTICS).unwrap();
    let schema = load_schema_from_database(&db).unwrap();
    Env {
        _dir: dir,
        db,
        schema,
        costs: CostTable::parse(COSTS).unwrap(),
        provider: TrigramEmbedder::default(),
        templates: Templates::builtin(),
    }
}

fn run(env: &Env, plan: Option<Decomposition>, client: &dyn GeneratorClient) -> PipelineResult {
    let model = SimilarityModel::new(&env.provider, CostWeights::default());
    let p = Pipeline {
        schema: &env.schema,
        db: &env.db,
        model: &model,
        stats: None,
        overrides: Some(&env.costs),
        templates: &env.templates,
        max_iterations: 3,
    };
    match plan {
        Some(plan) => p.run_with_plan(&plan, client).unwrap(),
        None => p.run(QUESTION, client).unwrap(),
    }
}

fn plan_without_hits(env: &Env) -> Decomposition {
    let model = SimilarityModel::new(&env.provider, CostWeights::default());
    let mut plan = decompose(QUESTION, &env.schema, &model, &Lexicon::builtin()).unwrap();
    plan.terminals = TerminalSet::from_tables(&["ga_sessions", "totals"], TerminalReason::DirectReference);
    plan
}

#[test]
fn golden_reply_succeeds_on_first_iteration() {
    let env = env();
    let r = run(&env, None, &StubGenerator::constant(GOLDEN));
    assert_eq!(r.outcome, Outcome::Sql);
    assert_eq!(r.iterations_used, 1);
    assert_eq!(r.sql.as_deref(), Some(GOLDEN));
    let t = &r.trace[0];
    assert_eq!(t.terminals, ["ga_sessions", "hits", "totals"]);
    assert_eq!(t.scaffold.total_cost.to_string(), "0.17");
    assert!(t.prompt.contains("totals -- ga_sessions -- hits"));
    assert!(t.report.all_passed());
}

#[test]
fn unmapped_attribute_grows_terminals_then_succeeds() {
    let env = env();
    let stub = StubGenerator::new(vec![
        StubRule {
            question: None,
            prompt_contains: Some("totals -- ga_sessions -- hits".into()),
            sql: GOLDEN.into(),
        },
        StubRule {
            question: None,
            prompt_contains: None,
            sql: NO_HITS.into(),
        },
    ]);
    let r = run(&env, Some(plan_without_hits(&env)), &stub);
    assert_eq!(r.outcome, Outcome::Sql);
    assert_eq!(r.iterations_used, 2);
    assert_eq!(r.trace[0].terminals, ["ga_sessions", "totals"]);
    assert!(r.trace[0].report.has(ViolationCode::UnmappedAttribute));
    assert_eq!(r.trace[1].terminals, ["ga_sessions", "hits", "totals"]);
    assert!(r.trace[1].prompt.contains("Fix from the previous attempt"));
}

#[test]
fn persistent_failure_stops_after_three_iterations() {
    let env = env();
    let r = run(&env, None, &StubGenerator::constant(NO_HITS));
    assert_eq!(r.outcome, Outcome::MaxIterations);
    assert_eq!(r.iterations_used, 3);
    assert_eq!(r.trace.len(), 3);
    assert!(r.sql.is_none());
    for t in &r.trace {
        assert_eq!(t.report.level2, LevelStatus::Fail);
        assert!(t.report.has(ViolationCode::MissingTerminal));
    }
    assert!(r.trace[1].prompt.contains("Table `hits` was missing"));
}

#[test]
fn level_one_failure_returns_immediately() {
    let env = env();
    let r = run(&env, None, &StubGenerator::constant("SELEC month FROM ga_sessions"));
    assert_eq!(r.outcome, Outcome::SyntaxError);
    assert_eq!(r.iterations_used, 1);
    assert_eq!(r.trace[0].report.level2, LevelStatus::NotRun);
}

#[test]
fn irrelevant_join_excludes_the_edge_next_time() {
    let env = env();
    let stray = "SELECT COUNT(*) FROM ga_sessions JOIN totals ON totals.session_id = ga_sessions.session_id \
                 JOIN hits ON hits.hit_id = totals.pageviews WHERE ga_sessions.date BETWEEN '2017-04-01' AND '2017-07-31'";
    let r = run(&env, None, &StubGenerator::constant(stray));
    let first = &r.trace[0].report;
    assert!(first.violations.iter().any(|v| v.code == ViolationCode::IrrelevantJoin && v.subject == "hits -- totals"));
    assert!(r.trace[0].excluded_edges.is_empty());
    assert_eq!(r.trace[1].excluded_edges, ["hits -- totals"]);
    assert!(!r.trace[1].prompt.contains("hits -- totals (cost"));
}

#[test]
fn update_rules() {
    let env = env();
    let model = SimilarityModel::new(&env.provider, CostWeights::default());
    let terminals = TerminalSet::from_tables(&["ga_sessions", "totals"], TerminalReason::DirectReference);
    let report = |code: ViolationCode, subject: &str| ValidationReport {
        level1: LevelStatus::Pass,
        level2: if code.level() == 2 { LevelStatus::Fail } else { LevelStatus::Pass },
        level3: if code.level() == 3 { LevelStatus::Fail } else { LevelStatus::Pass },
        row_count: Some(0),
        violations: vec![crate::validate::Violation {
            level: code.level(),
            code,
            message: "m".into(),
            subject: subject.into(),
        }],
        notes: vec![],
    };
    let r = update_terminals(&terminals, &report(ViolationCode::UnmappedAttribute, "productRevenue"), &env.schema, &model)
        .unwrap();
    assert_eq!(r.terminals.tables(), ["ga_sessions", "hits", "totals"]);

    let r = update_terminals(&terminals, &report(ViolationCode::AggMismatch, "AVG(x)"), &env.schema, &model).unwrap();
    assert_eq!(r.terminals, terminals);
    assert_eq!(r.notes.requirements, ["AGG_MISMATCH m"]);

    let r = update_terminals(&terminals, &report(ViolationCode::MissingTerminal, "hits"), &env.schema, &model).unwrap();
    assert_eq!(r.terminals, terminals);
    assert_eq!(r.notes.must_include, ["hits"]);

    let r = update_terminals(&terminals, &report(ViolationCode::IrrelevantJoin, "hits -- totals"), &env.schema, &model)
        .unwrap();
    assert_eq!(r.exclude, [("hits".to_string(), "totals".to_string())]);

    let mut passing = report(ViolationCode::AggMismatch, "x");
    passing.level3 = LevelStatus::Pass;
    passing.violations.clear();
    assert!(matches!(
        update_terminals(&terminals, &passing, &env.schema, &model),
        Err(Error::NothingToReplan)
    ));
}

#[test]
fn runs_are_byte_reproducible() {
    let env = env();
    let stub = StubGenerator::constant(NO_HITS);
    assert_eq!(run(&env, None, &stub).to_json(), run(&env, None, &stub).to_json());
}

#[test]
fn prompt_sections_and_plan() {
    let env = env();
    let model = SimilarityModel::new(&env.provider, CostWeights::default());
    let options = GraphOptions {
        overrides: Some(env.costs.clone()),
        ..GraphOptions::default()
    };
    let graph = build_schema_graph(&env.schema, None, &model, &options).unwrap();
    let scaffold = solve_steiner(&graph, &["ga_sessions", "totals", "hits"]).unwrap();
    let notes = PromptNotes::default();
    let a = build_prompt(&scaffold, Some(&graph), &env.schema, QUESTION, &env.templates, &notes).unwrap();
    let b = build_prompt(&scaffold, Some(&graph), &env.schema, QUESTION, &env.templates, &notes).unwrap();
    assert_eq!(a, b);
    assert_eq!(plan_chain(&scaffold).as_deref(), Some("totals -- ga_sessions -- hits"));
    for (_, body) in a.sections() {
        assert!(!body.trim().is_empty());
    }
    assert!(a.optimal_query_plan.contains("2. JOIN ga_sessions ON ga_sessions.session_id = totals.session_id"));
    assert!(a.build_relation.contains("ga_sessions -- totals (cost 0.08)"));
    assert!(!a.build_relation.contains("0.58"));
    let rendered = a.render();
    let order: Vec<usize> = ["## Role-Play", "## Critical Requirements", "## Build Relation", "## Optimal Query Plan", "## Behavioral Guidelines"]
        .iter()
        .map(|h| rendered.find(h).unwrap())
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
    assert!(matches!(
        build_prompt(&scaffold, None, &env.schema, "  ", &env.templates, &notes),
        Err(Error::EmptyQuestion)
    ));
}

#[test]
fn missing_template_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("role_play.txt"), "x").unwrap();
    match Templates::load(dir.path()) {
        Err(Error::MissingTemplate(p)) => assert!(p.ends_with("critical_requirements.txt")),
        other => panic!("{other:?}"),
    }
}
