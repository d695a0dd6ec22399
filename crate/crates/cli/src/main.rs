use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use join_scaffold::bench::run_bench;
use join_scaffold::config::{parse_weights, Config, Layer};
use join_scaffold::cost::{build_schema_graph, CostTable, GraphOptions, SchemaGraph, SimilarityModel};
use join_scaffold::decompose::{decompose, Decomposition, Lexicon};
use join_scaffold::par::Execution;
use join_scaffold::pipeline::{run_pipeline, GeneratorClient, HttpGenerator, Outcome, StubGenerator};
use join_scaffold::random::{instance, Family};
use join_scaffold::schema::{load_schema, profile_statistics, Schema};
use join_scaffold::steiner::{exact_steiner_oracle, solve_steiner, SteinerScaffold};
use join_scaffold::validate::{validate_all, ValidationContext};
use join_scaffold::Error;

#[derive(Parser)]
#[command(name = "join-scaffold", version, about = "Steiner-tree join planning and SQL validation")]
struct Cli {
    /// TOML config file (also JOIN_SCAFFOLD_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cost weights as alpha,beta,gamma.
    #[arg(long, global = true, value_name = "A,B,G")]
    weights: Option<String>,
    /// Edge admission threshold.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Write the document here instead of stdout.
    #[arg(short = 'o', long = "output", global = true)]
    output: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    show_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the weighted schema graph.
    Graph(GraphArgs),
    /// Solve the Steiner scaffold for a terminal set.
    Solve(SolveArgs),
    /// Extract math entities and terminal tables from a question.
    Plan(PlanArgs),
    /// Validate a SQL query at all three levels.
    Validate(ValidateArgs),
    /// Run the full generate-validate-replan loop.
    Run(RunArgs),
    /// Compare KMB, the two baselines and the exact oracle on random graphs.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SchemaSource {
    /// Schema document (JSON) or SQLite database.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// SQLite database; also the schema when --schema is absent.
    #[arg(long)]
    db: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    source: SchemaSource,
    /// Pinned edge costs (JSON cost table).
    #[arg(long)]
    override_costs: Option<PathBuf>,
    /// Print the per-edge component table instead of the export.
    #[arg(long)]
    costs: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Uniform,
    Ties,
    Hub,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Uniform => Family::Uniform,
            FamilyArg::Ties => Family::Ties,
            FamilyArg::Hub => Family::Hub,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: SchemaSource,
    /// Cost table used as the whole graph.
    #[arg(long, conflicts_with_all = ["schema", "db", "seed"])]
    graph: Option<PathBuf>,
    #[arg(long)]
    override_costs: Option<PathBuf>,
    /// Random instance seed; uses the instance's terminals unless given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 8, requires = "seed")]
    nodes: usize,
    #[arg(long, value_enum, default_value = "uniform", requires = "seed")]
    family: FamilyArg,
    #[arg(long, value_delimiter = ',')]
    terminals: Vec<String>,
    /// Also run the exact oracle and report both costs and their ratio.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    source: SchemaSource,
    /// Lexicon TOML replacing the built-in one.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    question: String,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    source: SchemaSource,
    /// SQL text, or `@path` to read it from a file.
    sql: String,
    #[arg(long, value_delimiter = ',')]
    terminals: Vec<String>,
    /// Scaffold document whose edges count as sanctioned joins.
    #[arg(long)]
    scaffold: Option<PathBuf>,
    /// Question to decompose for the level-3 checks.
    #[arg(long, conflicts_with = "plan")]
    question: Option<String>,
    /// Decomposition document for the level-3 checks.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SchemaSource,
    /// Scripted generator replies; without it the HTTP generator is used.
    #[arg(long)]
    stub_responses: Option<PathBuf>,
    /// Decomposition document replacing Stage 1.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    override_costs: Option<PathBuf>,
    #[arg(required_unless_present = "plan")]
    question: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Number of seeds per family.
    #[arg(long, default_value_t = 50)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 8)]
    nodes: usize,
    /// Emit JSON instead of the table.
    #[arg(long)]
    json: bool,
    /// Run seeds on one thread.
    #[arg(long)]
    sequential: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_domain() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn infra(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type CmdResult = Result<(String, u8), Failure>;

fn resolve_config(cli: &Cli) -> Result<Config, Failure> {
    let env = Layer::from_process_env()?;
    let flags = Layer {
        weights: cli.weights.as_deref().map(parse_weights).transpose()?,
        tau: cli.tau,
        ..Layer::default()
    };
    let file = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(join_scaffold::config::ENV_CONFIG).map(PathBuf::from));
    Ok(Config::resolve(file.as_deref(), &env, &flags)?)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| infra(format!("cannot read {}: {e}", path.display())))
}

fn read_costs(path: Option<&PathBuf>) -> Result<Option<CostTable>, Failure> {
    path.map(|p| CostTable::parse(&read_text(p)?).map_err(Failure::from)).transpose()
}

impl SchemaSource {
    fn load(&self) -> Result<Schema, Failure> {
        match (&self.schema, &self.db) {
            (Some(p), _) | (None, Some(p)) => Ok(load_schema(p)?),
            (None, None) => Err(infra("a schema is required: pass --schema or --db")),
        }
    }

    fn db(&self) -> Result<&Path, Failure> {
        self.db.as_deref().ok_or_else(|| infra("--db is required"))
    }
}

fn schema_graph(
    source: &SchemaSource,
    overrides: Option<CostTable>,
    config: &Config,
) -> Result<(Schema, SchemaGraph), Failure> {
    let schema = source.load()?;
    let provider = config.embedding_provider();
    let model = SimilarityModel::new(provider.as_ref(), config.weights);
    let stats = match &source.db {
        Some(db) => Some(profile_statistics(&schema, db, config.sample_limit)?),
        None => None,
    };
    let options = GraphOptions {
        overrides,
        ..GraphOptions::default()
    };
    let graph = build_schema_graph(&schema, stats.as_ref(), &model, &options)?;
    Ok((schema, graph))
}

fn cmd_graph(args: &GraphArgs, config: &Config) -> CmdResult {
    let overrides = read_costs(args.override_costs.as_ref())?;
    let (_, graph) = schema_graph(&args.source, overrides, config)?;
    let text = if args.costs {
        graph.cost_breakdown()
    } else {
        graph.export_text()
    };
    Ok((text, 0))
}

fn cmd_solve(args: &SolveArgs, config: &Config) -> CmdResult {
    let mut terminals = args.terminals.clone();
    let graph = if let Some(path) = &args.graph {
        SchemaGraph::from_cost_table(&CostTable::parse(&read_text(path)?)?)?
    } else if let Some(seed) = args.seed {
        if args.nodes < 2 {
            return Err(infra("--nodes must be at least 2"));
        }
        let inst = instance(args.family.into(), seed, args.nodes);
        if terminals.is_empty() {
            terminals = inst.terminals;
        }
        inst.graph
    } else {
        schema_graph(&args.source, read_costs(args.override_costs.as_ref())?, config)?.1
    };
    let scaffold = solve_steiner(&graph, &terminals)?;
    if !args.exact {
        return Ok((scaffold.to_json(), 0));
    }
    let exact = exact_steiner_oracle(&graph, &terminals)?;
    let doc = json!({
        "kmb": scaffold,
        "exact": exact,
        "kmb_cost": scaffold.total_cost.to_string(),
        "exact_cost": exact.total_cost.to_string(),
        "ratio": scaffold.total_cost.ratio(exact.total_cost),
    });
    Ok((pretty(&doc), 0))
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

fn lexicon(path: Option<&PathBuf>) -> Result<Lexicon, Failure> {
    match path {
        Some(p) => Ok(Lexicon::from_toml(&read_text(p)?)?),
        None => Ok(Lexicon::builtin()),
    }
}

fn cmd_plan(args: &PlanArgs, config: &Config) -> CmdResult {
    let schema = args.source.load()?;
    let provider = config.embedding_provider();
    let model = SimilarityModel::new(provider.as_ref(), config.weights);
    let plan = decompose(&args.question, &schema, &model, &lexicon(args.lexicon.as_ref())?)?;
    Ok((plan.to_json(), 0))
}

fn cmd_validate(args: &ValidateArgs, config: &Config) -> CmdResult {
    let schema = args.source.load()?;
    let db = args.source.db()?;
    let sql = match args.sql.strip_prefix('@') {
        Some(path) => read_text(Path::new(path))?,
        None => args.sql.clone(),
    };
    let provider = config.embedding_provider();
    let model = SimilarityModel::new(provider.as_ref(), config.weights);
    let scaffold = match &args.scaffold {
        Some(p) => Some(SteinerScaffold::from_json(&read_text(p)?)?),
        None => None,
    };
    let plan = match (&args.plan, &args.question) {
        (Some(p), _) => Some(Decomposition::from_json(&read_text(p)?)?),
        (None, Some(q)) => Some(decompose(q, &schema, &model, &Lexicon::builtin())?),
        (None, None) => None,
    };
    let terminals = if !args.terminals.is_empty() {
        args.terminals.clone()
    } else if let Some(s) = &scaffold {
        s.terminals.clone()
    } else {
        plan.as_ref().map(|p| p.terminals.tables()).unwrap_or_default()
    };
    let ctx = ValidationContext {
        schema: &schema,
        terminals: &terminals,
        scaffold: scaffold.as_ref(),
        entities: plan.as_ref().map_or(&[], |p| &p.entities),
        model: &model,
    };
    let report = validate_all(&sql, db, &ctx)?;
    Ok((report.to_json(), if report.semantic_ok() { 0 } else { 2 }))
}

fn cmd_run(args: &RunArgs, config: &Config) -> CmdResult {
    let schema = args.source.load()?;
    let db = args.source.db()?;
    let plan = match &args.plan {
        Some(p) => Some(Decomposition::from_json(&read_text(p)?)?),
        None => None,
    };
    let overrides = read_costs(args.override_costs.as_ref())?;
    let client: Box<dyn GeneratorClient> = match &args.stub_responses {
        Some(p) => Box::new(StubGenerator::from_file(p)?),
        None => Box::new(HttpGenerator::from_config(&config.generator)?),
    };
    let question = args.question.as_deref().unwrap_or_default();
    let result = run_pipeline(question, plan.as_ref(), &schema, db, config, overrides.as_ref(), client.as_ref())?;
    let code = if result.outcome == Outcome::Sql { 0 } else { 2 };
    Ok((result.to_json(), code))
}

fn cmd_bench(args: &BenchArgs) -> CmdResult {
    if args.nodes < 2 {
        return Err(infra("--nodes must be at least 2"));
    }
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let report = run_bench(args.first_seed, args.seeds, args.nodes, exec);
    let text = if args.json {
        let mut s = serde_json::to_string_pretty(&report).expect("bench report serializes");
        s.push('\n');
        s
    } else {
        report.table()
    };
    Ok((text, 0))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| infra(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| infra(format!("stdout: {e}")))
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let config = resolve_config(cli)?;
    let (text, code) = match (&cli.command, cli.show_config) {
        (_, true) => (config.to_toml(), 0),
        (None, false) => return Err(infra("no command given; see --help")),
        (Some(Command::Graph(a)), _) => cmd_graph(a, &config)?,
        (Some(Command::Solve(a)), _) => cmd_solve(a, &config)?,
        (Some(Command::Plan(a)), _) => cmd_plan(a, &config)?,
        (Some(Command::Validate(a)), _) => cmd_validate(a, &config)?,
        (Some(Command::Run(a)), _) => cmd_run(a, &config)?,
        (Some(Command::Bench(a)), _) => cmd_bench(a)?,
    };
    emit(&text, cli.output.as_deref())?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
