use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cost::SchemaGraph;
use crate::schema::Schema;
use crate::steiner::SteinerScaffold;
use crate::{Error, Result};

/// Section names in prompt order; each has a `<name>.txt` template.
pub const SECTIONS: [&str; 5] = [
    "role_play",
    "critical_requirements",
    "build_relation",
    "optimal_query_plan",
    "behavioral_guidelines",
];

/// Optional exemplar slot appended to the behavioral guidelines.
pub const EXAMPLES_FILE: &str = "examples.txt";

const BUILTIN: [&str; 5] = [
    include_str!("../../templates/role_play.txt"),
    include_str!("../../templates/critical_requirements.txt"),
    include_str!("../../templates/build_relation.txt"),
    include_str!("../../templates/optimal_query_plan.txt"),
    include_str!("../../templates/behavioral_guidelines.txt"),
];
const BUILTIN_EXAMPLES: &str = include_str!("../../templates/examples.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    sections: [String; 5],
    examples: String,
}

impl Templates {
    pub fn builtin() -> Self {
        Templates {
            sections: BUILTIN.map(str::to_string),
            examples: BUILTIN_EXAMPLES.to_string(),
        }
    }

    /// Reads `<section>.txt` for every section from `dir`. `examples.txt`
    /// may be absent.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut sections: [String; 5] = Default::default();
        for (slot, name) in sections.iter_mut().zip(SECTIONS) {
            let path = dir.join(format!("{name}.txt"));
            *slot = std::fs::read_to_string(&path).map_err(|_| Error::MissingTemplate(path.clone()))?;
        }
        let examples = std::fs::read_to_string(dir.join(EXAMPLES_FILE)).unwrap_or_default();
        Ok(Templates { sections, examples })
    }

    pub fn from_dir(dir: Option<&PathBuf>) -> Result<Self> {
        dir.map_or_else(|| Ok(Templates::builtin()), |d| Templates::load(d))
    }
}

/// Re-planning feedback carried into the next prompt.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PromptNotes {
    /// Tables a previous attempt left out.
    pub must_include: Vec<String>,
    /// Violations a previous attempt produced, as requirement lines.
    pub requirements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptBundle {
    pub role_play: String,
    pub critical_requirements: String,
    pub build_relation: String,
    pub optimal_query_plan: String,
    pub behavioral_guidelines: String,
    pub scaffold_json: String,
    pub schema_excerpt: String,
}

impl PromptBundle {
    pub fn sections(&self) -> [(&'static str, &str); 5] {
        [
            ("Role-Play", &self.role_play),
            ("Critical Requirements", &self.critical_requirements),
            ("Build Relation", &self.build_relation),
            ("Optimal Query Plan", &self.optimal_query_plan),
            ("Behavioral Guidelines", &self.behavioral_guidelines),
        ]
    }

    /// The system prompt: sections under `## ` headings in order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (title, body)) in self.sections().iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            writeln!(out, "## {title}\n{}", body.trim_end()).unwrap();
        }
        out
    }
}

/// Replaces `{{key}}` placeholders. A line holding only a placeholder whose
/// value is empty is dropped.
fn fill(template: &str, values: &BTreeMap<&str, String>) -> String {
    let mut out = String::new();
    for line in template.lines() {
        let trimmed = line.trim();
        if let Some(key) = trimmed.strip_prefix("{{").and_then(|r| r.strip_suffix("}}")) {
            if values.get(key).is_some_and(|v| v.is_empty()) {
                continue;
            }
        }
        let mut l = line.to_string();
        for (k, v) in values {
            l = l.replace(&format!("{{{{{k}}}}}"), v);
        }
        out.push_str(&l);
        out.push('\n');
    }
    out
}

fn schema_excerpt(scaffold: &SteinerScaffold, schema: &Schema) -> String {
    let mut out = String::new();
    for t in &scaffold.vertices {
        let Some(table) = schema.table(t) else {
            writeln!(out, "{t}").unwrap();
            continue;
        };
        let cols: Vec<String> = table
            .columns
            .iter()
            .map(|c| {
                let pk = if c.is_primary_key { " primary key" } else { "" };
                format!("{} {}{pk}", c.name, c.declared_type)
            })
            .collect();
        writeln!(out, "{t}({})", cols.join(", ")).unwrap();
    }
    out.trim_end().to_string()
}

/// Scaffold edges in join order: start at the leaf whose edge is cheapest,
/// then repeatedly take the cheapest edge leaving the joined set. Ties break
/// by table name.
pub fn join_order(scaffold: &SteinerScaffold) -> (String, Vec<(String, String)>) {
    let Some(first_vertex) = scaffold.vertices.first() else {
        return (String::new(), Vec::new());
    };
    if scaffold.edges.is_empty() {
        return (first_vertex.clone(), Vec::new());
    }
    let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &scaffold.edges {
        *degree.entry(&e.a).or_default() += 1;
        *degree.entry(&e.b).or_default() += 1;
    }
    let start = scaffold
        .edges
        .iter()
        .flat_map(|e| [(e.cost, &e.a), (e.cost, &e.b)])
        .filter(|(_, v)| degree[v.as_str()] == 1)
        .min()
        .map(|(_, v)| v.clone())
        .expect("a tree with edges has leaves");
    let mut joined = BTreeSet::from([start.clone()]);
    let mut steps = Vec::new();
    while steps.len() < scaffold.edges.len() {
        let next = scaffold
            .edges
            .iter()
            .filter_map(|e| match (joined.contains(&e.a), joined.contains(&e.b)) {
                (true, false) => Some((e.cost, e.b.clone(), e.a.clone())),
                (false, true) => Some((e.cost, e.a.clone(), e.b.clone())),
                _ => None,
            })
            .min()
            .expect("scaffold is connected");
        joined.insert(next.1.clone());
        steps.push((next.2, next.1));
    }
    (start, steps)
}

/// `a -- b -- c` when the join order is a simple path, else `None`.
pub fn plan_chain(scaffold: &SteinerScaffold) -> Option<String> {
    let (start, steps) = join_order(scaffold);
    let mut chain = vec![start];
    for (from, to) in steps {
        if chain.last() != Some(&from) {
            return None;
        }
        chain.push(to);
    }
    Some(chain.join(" -- "))
}

fn join_condition(graph: Option<&SchemaGraph>, from: &str, to: &str) -> Option<String> {
    let e = graph?.edge_between(from, to)?;
    let (ca, cb) = &e.cost.best_column_pair;
    if ca.is_empty() || cb.is_empty() {
        return None;
    }
    let (cf, ct) = if e.a == from { (ca, cb) } else { (cb, ca) };
    Some(format!("{to}.{ct} = {from}.{cf}"))
}

/// Assembles the five prompt sections from `templates`. The plan section
/// walks the scaffold in [`join_order`]; `graph` supplies join columns.
pub fn build_prompt(
    scaffold: &SteinerScaffold,
    graph: Option<&SchemaGraph>,
    schema: &Schema,
    question: &str,
    templates: &Templates,
    notes: &PromptNotes,
) -> Result<PromptBundle> {
    let question = question.trim();
    if question.is_empty() {
        return Err(Error::EmptyQuestion);
    }
    let schema_text = schema_excerpt(scaffold, schema);
    let scaffold_json = scaffold.to_json().trim_end().to_string();

    let edges = if scaffold.edges.is_empty() {
        "(single table, no joins)".to_string()
    } else {
        scaffold
            .edges
            .iter()
            .map(|e| format!("{} -- {} (cost {})", e.a, e.b, e.cost))
            .collect::<Vec<_>>()
            .join("\n")
    };

    let (start, steps) = join_order(scaffold);
    let chain = plan_chain(scaffold).unwrap_or_else(|| {
        steps
            .iter()
            .map(|(a, b)| format!("{a} -- {b}"))
            .collect::<Vec<_>>()
            .join("; ")
    });
    let mut step_text = format!("1. FROM {start}");
    for (i, (from, to)) in steps.iter().enumerate() {
        write!(step_text, "\n{}. JOIN {to}", i + 2).unwrap();
        if let Some(on) = join_condition(graph, from, to) {
            write!(step_text, " ON {on}").unwrap();
        }
    }

    let must_include = notes
        .must_include
        .iter()
        .map(|t| format!("- Table `{t}` was missing from the previous attempt; it must appear in FROM or JOIN."))
        .collect::<Vec<_>>()
        .join("\n");
    let feedback = notes
        .requirements
        .iter()
        .map(|r| format!("- Fix from the previous attempt: {r}"))
        .collect::<Vec<_>>()
        .join("\n");

    let values: BTreeMap<&str, String> = BTreeMap::from([
        ("question", question.to_string()),
        ("terminals", scaffold.terminals.join(", ")),
        ("must_include", must_include),
        ("feedback", feedback),
        ("schema", schema_text.clone()),
        ("edges", edges),
        ("chain", chain),
        ("steps", step_text),
        ("scaffold_json", scaffold_json.clone()),
        ("examples", templates.examples.trim().to_string()),
    ]);
    let [role_play, critical_requirements, build_relation, optimal_query_plan, behavioral_guidelines] =
        templates.sections.clone().map(|t| fill(&t, &values));
    let bundle = PromptBundle {
        role_play,
        critical_requirements,
        build_relation,
        optimal_query_plan,
        behavioral_guidelines,
        scaffold_json,
        schema_excerpt: schema_text,
    };
    if let Some((name, _)) = bundle.sections().iter().find(|(_, body)| body.trim().is_empty()) {
        return Err(Error::Config(format!("prompt section {name} is empty")));
    }
    Ok(bundle)
}
