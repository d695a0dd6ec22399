//! End-to-end planning loop: decompose the question once, then per
//! iteration build the schema graph, solve the scaffold, prompt the
//! generator and validate its SQL, re-planning from the violations.

mod generator;
mod prompt;

pub use generator::{extract_sql, GeneratorClient, HttpGenerator, StubGenerator, StubRule};
pub use prompt::{build_prompt, join_order, plan_chain, PromptBundle, PromptNotes, Templates, EXAMPLES_FILE, SECTIONS};

use std::path::Path;

use serde::Serialize;

use crate::config::Config;
use crate::cost::{build_schema_graph, CostTable, GraphOptions, SimilarityModel};
use crate::decompose::{decompose, find_containing_tables, Decomposition, Lexicon, TerminalReason, TerminalSet};
use crate::schema::{profile_statistics, Schema, StatsProfile};
use crate::steiner::{solve_steiner, SteinerScaffold};
use crate::validate::{validate_all, LevelStatus, ValidationContext, ValidationReport, ViolationCode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Sql,
    SyntaxError,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub terminals: Vec<String>,
    /// Edges left out of this iteration's graph, as `a -- b`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub excluded_edges: Vec<String>,
    pub scaffold: SteinerScaffold,
    pub prompt: String,
    pub sql: String,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineResult {
    pub question: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
    pub iterations_used: usize,
    pub trace: Vec<IterationTrace>,
}

impl PipelineResult {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("pipeline result serializes");
        out.push('\n');
        out
    }
}

/// What a failed report changes for the next iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Replan {
    pub terminals: TerminalSet,
    pub exclude: Vec<(String, String)>,
    pub notes: PromptNotes,
}

fn split_edge(subject: &str) -> Option<(String, String)> {
    let (a, b) = subject.split_once(" -- ")?;
    Some((a.trim().to_string(), b.trim().to_string()))
}

/// Translates level-2 and level-3 violations into the next iteration's
/// inputs:
///
/// - `MISSING_TERMINAL`: terminals unchanged; the table is marked
///   must-include in the prompt;
/// - `UNMAPPED_ATTRIBUTE`: the phrase's owning tables join the terminals;
/// - `IRRELEVANT_JOIN`: the edge is excluded from the next graph;
/// - `GROUPBY_RULE`, `AGG_MISMATCH`, `CONSTRAINT_MISMATCH`: terminals
///   unchanged; the violation becomes a requirement line.
pub fn update_terminals(
    terminals: &TerminalSet,
    report: &ValidationReport,
    schema: &Schema,
    model: &SimilarityModel,
) -> Result<Replan> {
    if report.level2 != LevelStatus::Fail && report.level3 != LevelStatus::Fail {
        return Err(Error::NothingToReplan);
    }
    let mut out = Replan {
        terminals: terminals.clone(),
        ..Replan::default()
    };
    for v in &report.violations {
        match v.code {
            ViolationCode::MissingTerminal => {
                if !out.notes.must_include.contains(&v.subject) {
                    out.notes.must_include.push(v.subject.clone());
                }
            }
            ViolationCode::UnmappedAttribute => {
                for t in find_containing_tables(&[&v.subject], schema, model)?.tables {
                    out.terminals.insert(&t, TerminalReason::DirectReference);
                }
            }
            ViolationCode::IrrelevantJoin => {
                if let Some(edge) = split_edge(&v.subject) {
                    if !out.exclude.contains(&edge) {
                        out.exclude.push(edge);
                    }
                }
            }
            ViolationCode::GroupbyRule | ViolationCode::AggMismatch | ViolationCode::ConstraintMismatch => {
                out.notes.requirements.push(format!("{} {}", v.code, v.message));
            }
            ViolationCode::Syntax | ViolationCode::Execution => {}
        }
    }
    Ok(out)
}

/// Shared, read-only inputs of a run.
pub struct Pipeline<'a> {
    pub schema: &'a Schema,
    pub db: &'a Path,
    pub model: &'a SimilarityModel<'a>,
    pub stats: Option<&'a StatsProfile>,
    pub overrides: Option<&'a CostTable>,
    pub templates: &'a Templates,
    pub max_iterations: usize,
}

impl Pipeline<'_> {
    /// Stage 1 on `question`, then the loop.
    pub fn run(&self, question: &str, client: &dyn GeneratorClient) -> Result<PipelineResult> {
        let plan = decompose(question, self.schema, self.model, &Lexicon::builtin())?;
        self.run_with_plan(&plan, client)
    }

    /// The loop from a given Stage-1 plan.
    pub fn run_with_plan(&self, plan: &Decomposition, client: &dyn GeneratorClient) -> Result<PipelineResult> {
        let question = plan.question.trim();
        if question.is_empty() {
            return Err(Error::EmptyQuestion);
        }
        let mut terminals = plan.terminals.clone();
        let mut options = GraphOptions {
            overrides: self.overrides.cloned(),
            ..GraphOptions::default()
        };
        let mut notes = PromptNotes::default();
        let mut trace = Vec::new();

        for iteration in 1..=self.max_iterations {
            let graph = build_schema_graph(self.schema, self.stats, self.model, &options)?;
            let names = terminals.tables();
            let scaffold = solve_steiner(&graph, &names)?;
            let bundle = build_prompt(&scaffold, Some(&graph), self.schema, question, self.templates, &notes)?;
            let prompt = bundle.render();
            let sql = client.generate(&prompt, question)?;
            let ctx = ValidationContext {
                schema: self.schema,
                terminals: &names,
                scaffold: Some(&scaffold),
                entities: &plan.entities,
                model: self.model,
            };
            let report = validate_all(&sql, self.db, &ctx)?;
            let level1_failed = report.level1 != LevelStatus::Pass;
            let accepted = report.semantic_ok();
            trace.push(IterationTrace {
                iteration,
                terminals: names,
                excluded_edges: options.excluded.iter().map(|(a, b)| format!("{a} -- {b}")).collect(),
                scaffold,
                prompt,
                sql: sql.clone(),
                report: report.clone(),
            });
            let outcome = if level1_failed {
                Some(Outcome::SyntaxError)
            } else if accepted {
                Some(Outcome::Sql)
            } else {
                None
            };
            if let Some(outcome) = outcome {
                return Ok(PipelineResult {
                    question: question.to_string(),
                    outcome,
                    sql: (outcome == Outcome::Sql).then_some(sql),
                    iterations_used: iteration,
                    trace,
                });
            }
            if iteration == self.max_iterations {
                break;
            }
            let replan = update_terminals(&terminals, &report, self.schema, self.model)?;
            terminals = replan.terminals;
            for (a, b) in &replan.exclude {
                options.exclude(a, b);
            }
            for t in replan.notes.must_include {
                if !notes.must_include.contains(&t) {
                    notes.must_include.push(t);
                }
            }
            for r in replan.notes.requirements {
                if !notes.requirements.contains(&r) {
                    notes.requirements.push(r);
                }
            }
        }
        Ok(PipelineResult {
            question: question.to_string(),
            outcome: Outcome::MaxIterations,
            sql: None,
            iterations_used: trace.len(),
            trace,
        })
    }
}

/// Runs the whole pipeline with the embedding provider, statistics and
/// templates named by `config`. A given `plan` replaces Stage 1 and its
/// question replaces `question`.
pub fn run_pipeline(
    question: &str,
    plan: Option<&Decomposition>,
    schema: &Schema,
    db: &Path,
    config: &Config,
    overrides: Option<&CostTable>,
    client: &dyn GeneratorClient,
) -> Result<PipelineResult> {
    if plan.is_none() && question.trim().is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let provider = config.embedding_provider();
    let model = SimilarityModel::new(provider.as_ref(), config.weights);
    let stats = profile_statistics(schema, db, config.sample_limit)?;
    let templates = Templates::from_dir(config.templates_dir.as_ref())?;
    let pipeline = Pipeline {
        schema,
        db,
        model: &model,
        stats: Some(&stats),
        overrides,
        templates: &templates,
        max_iterations: config.max_iterations,
    };
    match plan {
        Some(plan) => pipeline.run_with_plan(plan, client),
        None => pipeline.run(question, client),
    }
}

#[cfg(test)]
mod tests;
