use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use derivtree::curriculum::{
    build_curriculum, curriculum_stats, generate_dataset, read_curriculum, read_problems,
    write_atomic, write_curriculum, write_problems, CurriculumStats, DatasetError, GenError,
    GeneratorConfig,
};
use derivtree::decompose::{build_tree, render_table, DecompositionTree, TreeEdge};
use derivtree::expr::{parse, render};
use derivtree::problem::Problem;
use derivtree::reward::{
    accuracy_by_level, grade_base, grade_extended, AccuracyReport, GradedRecord, ResponseRecord,
};
use derivtree::rl::{group_advantages, group_records, grpo_objective, RlConfig, SampleRecord};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        CliError::Usage(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "derivtree",
    version,
    about = "Verified decomposition of differentiation problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded dataset of problems per difficulty level
    Gen(GenArgs),
    /// Decompose one expression or every problem in a file
    Decompose(DecomposeArgs),
    /// Build an ordered curriculum from target problems
    Curriculum(CurriculumArgs),
    /// Summarize a curriculum file
    Stats(StatsArgs),
    /// Grade responses and report per-level accuracy
    Grade(GradeArgs),
    /// Group advantages or the full objective
    Rl(RlArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    per_level: usize,
    #[arg(long, env = "DERIVTREE_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    expr: Option<String>,
    /// Problems file (JSONL)
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Show the full recursive tree instead of the first level only
    #[arg(long)]
    tree: bool,
    /// Emit JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CurriculumArgs {
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Audit the ordering invariants; exit 4 on a violation
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    curriculum: PathBuf,
}

#[derive(Args)]
struct GradeArgs {
    #[arg(long)]
    problems: PathBuf,
    /// Responses file: JSONL of {"id", "response"}
    #[arg(long)]
    responses: PathBuf,
    /// Graded output file
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add rule, child and step bonuses
    #[arg(long)]
    extended: bool,
    /// Graded file of a baseline run, for relative improvement
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Args)]
struct RlArgs {
    /// Comma-separated rewards of one group
    #[arg(long, conflicts_with = "samples", required_unless_present = "samples")]
    rewards: Option<String>,
    /// Samples file: JSONL of {"problem_id", "reward", "logp", "logp_ref"}
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    eps_norm: f64,
    #[arg(long, default_value_t = 0.2)]
    clip: f64,
    #[arg(long, default_value_t = 0.001)]
    beta: f64,
    #[arg(long, default_value_t = 4)]
    group_size: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Curriculum(a) => cmd_curriculum(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Grade(a) => cmd_grade(a),
        Command::Rl(a) => cmd_rl(a),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::Usage(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn cmd_gen(a: GenArgs) -> Result<String> {
    let cfg = GeneratorConfig::with_per_level(a.seed, a.per_level);
    let problems = generate_dataset(&cfg)?;
    write_problems(&a.out, &problems)?;
    let mut out = String::new();
    for k in cfg.per_level.keys() {
        let n = problems.iter().filter(|p| p.level == *k).count();
        writeln!(out, "D{k}: {n}").unwrap();
    }
    writeln!(out, "total: {} -> {}", problems.len(), a.out.display()).unwrap();
    Ok(out)
}

#[derive(Serialize)]
struct NodeJson<'a> {
    id: &'a str,
    problem: String,
    answer: String,
    depth: usize,
    level: usize,
    multiplicity: u64,
}

#[derive(Serialize)]
struct TreeJson<'a> {
    root: usize,
    depth: usize,
    nodes: Vec<NodeJson<'a>>,
    edges: &'a [TreeEdge],
}

fn tree_json(tree: &DecompositionTree) -> String {
    let nodes = tree
        .nodes
        .iter()
        .zip(&tree.multiplicity)
        .map(|(p, &m)| NodeJson {
            id: &p.id,
            problem: render(&p.expr),
            answer: render(&p.solution),
            depth: p.depth,
            level: p.level,
            multiplicity: m,
        })
        .collect();
    let doc = TreeJson { root: tree.root, depth: tree.depth(), nodes, edges: &tree.edges };
    serde_json::to_string(&doc).expect("tree serializes")
}

fn cmd_decompose(a: DecomposeArgs) -> Result<String> {
    let problems = match (&a.expr, &a.input) {
        (Some(e), _) => {
            let expr = parse(e).map_err(|err| CliError::Usage(format!("--expr: {err}")))?;
            vec![Problem::new("expr", expr)]
        }
        (None, Some(path)) => read_problems(path)?,
        (None, None) => return Err(CliError::Usage("one of --expr or --in is required".into())),
    };
    let single = a.expr.is_some();
    let mut out = String::new();
    for (i, p) in problems.iter().enumerate() {
        let full = build_tree(p).map_err(|e| CliError::Check(e.to_string()))?;
        let tree = if a.tree { full } else { full.first_level() };
        if a.json {
            writeln!(out, "{}", tree_json(&tree)).unwrap();
            continue;
        }
        if !single {
            if i > 0 {
                out.push('\n');
            }
            writeln!(out, "# {}", p.id).unwrap();
        }
        out.push_str(&render_table(&tree));
    }
    Ok(out)
}

fn stats_table(stats: &CurriculumStats) -> String {
    let mut out = String::new();
    writeln!(out, "level  count  multiplicity").unwrap();
    for (k, s) in &stats.levels {
        writeln!(out, "D{k:<5} {:>5}  {:>12}", s.count, s.multiplicity).unwrap();
    }
    writeln!(out, "total  {:>5}", stats.total).unwrap();
    let edges: Vec<String> = stats.edges.iter().map(|(r, n)| format!("{r}={n}")).collect();
    writeln!(out, "edges  {}", edges.join(" ")).unwrap();
    out
}

fn cmd_curriculum(a: CurriculumArgs) -> Result<String> {
    let targets = read_problems(&a.targets)?;
    if targets.is_empty() {
        return Err(CliError::Usage(format!("{}: no target problems", a.targets.display())));
    }
    let c = build_curriculum(&targets).map_err(|e| CliError::Check(e.to_string()))?;
    if a.check {
        c.check().map_err(|e| CliError::Check(e.to_string()))?;
    }
    write_curriculum(&a.out, &c)?;
    let mut out = stats_table(&curriculum_stats(&c));
    if a.check {
        writeln!(out, "check: ok ({} entries, {} edges)", c.len(), c.edges().len()).unwrap();
    }
    Ok(out)
}

fn cmd_stats(a: StatsArgs) -> Result<String> {
    let c = read_curriculum(&a.curriculum)?;
    Ok(stats_table(&curriculum_stats(&c)))
}

fn percent(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

fn accuracy_table(r: &AccuracyReport) -> String {
    let mut out = String::new();
    let with_base = r.baseline_overall.is_some();
    if with_base {
        writeln!(out, "level      n   base  trained  delta").unwrap();
    } else {
        writeln!(out, "level      n  accuracy").unwrap();
    }
    let delta = |d: Option<f64>| d.map_or("n/a".to_string(), |d| format!("{d:+.1}%"));
    for (k, l) in &r.levels {
        if with_base {
            let base = l.baseline.map_or("n/a".to_string(), percent);
            let line = format!(
                "D{k:<4} {:>5} {base:>6} {:>8} {:>6}",
                l.total,
                percent(l.accuracy),
                delta(l.delta_pct)
            );
            writeln!(out, "{}", line.trim_end()).unwrap();
        } else {
            writeln!(out, "D{k:<4} {:>5} {:>9}", l.total, percent(l.accuracy)).unwrap();
        }
    }
    let total: usize = r.levels.values().map(|l| l.total).sum();
    match r.baseline_overall {
        Some(b) => writeln!(
            out,
            "all   {total:>5} {:>6} {:>8} {:>6}",
            percent(b),
            percent(r.overall),
            delta(r.overall_delta_pct)
        ),
        None => writeln!(out, "all   {total:>5} {:>9}", percent(r.overall)),
    }
    .unwrap();
    out
}

fn cmd_grade(a: GradeArgs) -> Result<String> {
    let problems = read_problems(&a.problems)?;
    let responses: Vec<ResponseRecord> = read_jsonl(&a.responses)?;
    let mut graded = Vec::with_capacity(responses.len());
    for r in &responses {
        let p = problems
            .iter()
            .find(|p| p.id == r.id)
            .ok_or_else(|| CliError::Usage(format!("response for unknown problem `{}`", r.id)))?;
        graded.push(if a.extended {
            let tree = build_tree(p).map_err(|e| CliError::Check(e.to_string()))?;
            grade_extended(p, &r.response, &tree)
        } else {
            grade_base(p, &r.response)
        });
    }
    if let Some(path) = &a.out {
        let mut text = String::new();
        for g in &graded {
            text.push_str(&serde_json::to_string(&GradedRecord::from(g)).expect("record"));
            text.push('\n');
        }
        write_atomic(path, text.as_bytes())?;
    }
    let baseline: Option<Vec<GradedRecord>> = a.baseline.as_deref().map(read_jsonl).transpose()?;
    let report = accuracy_by_level(&graded, &problems, baseline.as_deref())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(accuracy_table(&report))
}

fn cmd_rl(a: RlArgs) -> Result<String> {
    let cfg =
        RlConfig { group_size: a.group_size, clip: a.clip, beta: a.beta, eps_norm: a.eps_norm };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let json = if let Some(list) = &a.rewards {
        let rewards = list
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("--rewards: {e}")))?;
        let adv =
            group_advantages(&rewards, a.eps_norm).map_err(|e| CliError::Usage(e.to_string()))?;
        serde_json::json!({ "advantages": adv })
    } else {
        let path = a.samples.as_deref().expect("clap enforces one input");
        let records: Vec<SampleRecord> = read_jsonl(path)?;
        let groups: Vec<_> = group_records(&records).into_iter().map(|(_, g)| g).collect();
        let objective =
            grpo_objective(&groups, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
        serde_json::json!({ "objective": objective, "groups": groups.len() })
    };
    Ok(format!("{json}\n"))
}
