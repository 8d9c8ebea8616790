use std::error::Error as StdError;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ikep_core::allocation::{core_allocation, core_membership_bruteforce, core_membership_width1, Allocation, AllocationError};
use ikep_core::balancing::{strongly_close, weakly_close, BalancingError, BalancingOptions};
use ikep_core::campaign::{run_campaign, CampaignConfig};
use ikep_core::game::{coalition_table, Coalition, GameError, GameOracle, TuGame};
use ikep_core::graph::{generate_pool, CompatibilityGraph, GeneratorConfig, GraphError};
use ikep_core::packing::{max_packing, transplant_vector, ExchangeBound, PackingError};
use ikep_core::par::Execution;
use ikep_core::simulator::{Concept, Scenario, SimulationError};
use ikep_core::Rational;

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CAP: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "ikep", version, about = "Credit-based balancing for international kidney exchange")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instance pools, one JSON file per (seed, country count).
    Generate(GenerateArgs),
    /// Solve one question about a graph or pool file and print JSON.
    Solve(SolveArgs),
    /// Run a simulation campaign and write CSV (and optionally JSON) reports.
    Simulate(SimulateArgs),
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 60)]
    pairs: usize,
    #[arg(long, value_delimiter = ',', default_value = "4")]
    countries: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seed: Vec<u64>,
    #[arg(long, default_value_t = 24)]
    rounds: u32,
    #[arg(long, default_value_t = 0.25)]
    initial_fraction: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum What {
    Value,
    Values,
    Packing,
    Shapley,
    Banzhaf,
    Nucleolus,
    Benefit,
    Contribution,
    Core,
    CoreCheck,
    Weak,
    Lexmin,
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Graph or pool JSON file.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum)]
    what: What,
    #[arg(long, default_value = "infinity")]
    bound: ExchangeBound,
    /// 1-based country list for `value`.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    coalition: Option<Vec<usize>>,
    /// Concept giving the target of `weak`/`lexmin`.
    #[arg(long)]
    target: Option<Concept>,
    /// Explicit allocation, e.g. `3/2,7/2,0`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<Rational>>,
    /// Write the ladder models as LP files here.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// JSON campaign config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    countries: Option<Vec<usize>>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    concepts: Option<Vec<Concept>>,
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<Scenario>>,
    #[arg(long, value_delimiter = ',')]
    bounds: Option<Vec<ExchangeBound>>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long, default_value = "ikep-out")]
    out_dir: PathBuf,
    /// Also write every round log as `runs.json`.
    #[arg(long)]
    json: bool,
    /// Run combinations one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Writes a line to stdout; a closed pipe ends the process quietly.
fn emit(line: &str) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => r,
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain().find_map(classify).unwrap_or(1)
}

fn classify(e: &(dyn StdError + 'static)) -> Option<u8> {
    if e.is::<Usage>() {
        return Some(EXIT_USAGE);
    }
    if e.is::<std::io::Error>() {
        return Some(EXIT_IO);
    }
    if e.is::<GraphError>() {
        return Some(EXIT_USAGE);
    }
    if let Some(e) = e.downcast_ref::<PackingError>() {
        return packing_code(e);
    }
    if let Some(e) = e.downcast_ref::<GameError>() {
        return game_code(e);
    }
    if let Some(e) = e.downcast_ref::<AllocationError>() {
        return allocation_code(e);
    }
    if let Some(e) = e.downcast_ref::<BalancingError>() {
        return balancing_code(e);
    }
    if let Some(e) = e.downcast_ref::<SimulationError>() {
        return match e {
            SimulationError::Config(_) | SimulationError::Graph(_) => Some(EXIT_USAGE),
            SimulationError::Game(e) => game_code(e),
            SimulationError::Allocation(e) => allocation_code(e),
            SimulationError::Balancing(e) => balancing_code(e),
            SimulationError::Packing(e) => packing_code(e),
        };
    }
    None
}

fn packing_code(e: &PackingError) -> Option<u8> {
    match e {
        PackingError::CapExceeded { .. } | PackingError::SolverLimit => Some(EXIT_CAP),
        PackingError::WidthViolation { .. } | PackingError::UnknownVertex(_) | PackingError::IntervalCount { .. } => {
            Some(EXIT_USAGE)
        }
        _ => None,
    }
}

fn game_code(e: &GameError) -> Option<u8> {
    match e {
        GameError::CapExceeded { .. } => Some(EXIT_CAP),
        GameError::Packing(e) => packing_code(e),
        GameError::TableSize { .. } => None,
    }
}

fn allocation_code(e: &AllocationError) -> Option<u8> {
    match e {
        AllocationError::CapExceeded { .. } => Some(EXIT_CAP),
        AllocationError::WidthViolation { .. } | AllocationError::Length { .. } => Some(EXIT_USAGE),
        AllocationError::EmptyImputationSet => Some(EXIT_INFEASIBLE),
        _ => None,
    }
}

fn balancing_code(e: &BalancingError) -> Option<u8> {
    match e {
        BalancingError::Infeasible(_) => Some(EXIT_INFEASIBLE),
        BalancingError::SolverLimit(_) => Some(EXIT_CAP),
        BalancingError::Export(_) => Some(EXIT_IO),
        BalancingError::Length { .. } => Some(EXIT_USAGE),
        BalancingError::Packing(e) => packing_code(e),
        BalancingError::Solver(_) => None,
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for &n in &a.countries {
        let cfg = GeneratorConfig {
            pairs: a.pairs,
            countries: n,
            rounds: a.rounds,
            initial_fraction: a.initial_fraction,
            ..GeneratorConfig::default()
        };
        cfg.validate()?;
        for &seed in &a.seed {
            let pool = generate_pool(&cfg, seed)?;
            let path = a.out_dir.join(format!("pool_seed{seed}_n{n}.json"));
            fs::write(&path, pool.to_json()).with_context(|| format!("writing {}", path.display()))?;
            emit(&path.display().to_string())?;
        }
    }
    Ok(())
}

fn read_graph(path: &Path) -> Result<CompatibilityGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(CompatibilityGraph::from_json(&text)?)
}

fn concept_of(what: What) -> Option<Concept> {
    match what {
        What::Shapley => Some(Concept::Shapley),
        What::Banzhaf => Some(Concept::Banzhaf),
        What::Nucleolus => Some(Concept::Nucleolus),
        What::Benefit => Some(Concept::Benefit),
        What::Contribution => Some(Concept::Contribution),
        _ => None,
    }
}

fn explicit_x(a: &SolveArgs, n: usize) -> Result<Option<Allocation>> {
    match &a.x {
        None => Ok(None),
        Some(x) if x.len() != n => Err(usage(format!("--x has {} entries for {n} countries", x.len()))),
        Some(x) => Ok(Some(Allocation(x.clone()))),
    }
}

fn solve(a: SolveArgs) -> Result<()> {
    let g = read_graph(&a.graph)?;
    let n = g.country_count();
    let exec = Execution::default();
    let out: Value = match a.what {
        What::Value => {
            let members = a.coalition.clone().ok_or_else(|| usage("--what value needs --coalition"))?;
            if let Some(&p) = members.iter().find(|&&p| p == 0 || p > n) {
                return Err(usage(format!("country {p} is not in 1..={n}")));
            }
            let s = Coalition::from_members(members.iter().map(|p| p - 1));
            let value = match a.bound {
                ExchangeBound::Infinity => GameOracle::new(g)?.coalition_value(s),
                ExchangeBound::Two => max_packing(&g.induced_subgraph(s.members()), a.bound)?.size() as i64,
            };
            json!(value)
        }
        What::Values => {
            let table = coalition_table(&g, a.bound, exec)?;
            let rows: Vec<Value> = Coalition::all(n)
                .map(|s| json!({ "coalition": s.members().map(|p| p + 1).collect::<Vec<_>>(), "value": table.value(s) }))
                .collect();
            json!(rows)
        }
        What::Packing => {
            let p = max_packing(&g, a.bound)?;
            let s = transplant_vector(&p, &g)?;
            json!({ "packing": p, "transplants": s.0 })
        }
        What::Core => {
            if a.bound != ExchangeBound::Infinity {
                return Err(usage("--what core is only available for --bound infinity"));
            }
            serde_json::to_value(core_allocation(&GameOracle::new(g)?))?
        }
        What::CoreCheck => {
            let x = explicit_x(&a, n)?.ok_or_else(|| usage("--what core-check needs --x"))?;
            let inside = if a.bound == ExchangeBound::Infinity && g.width() <= 1 {
                core_membership_width1(&g, &x)?
            } else {
                core_membership_bruteforce(&coalition_table(&g, a.bound, exec)?, &x)?
            };
            json!(inside)
        }
        What::Weak | What::Lexmin => {
            let x = match (explicit_x(&a, n)?, a.target) {
                (Some(_), Some(_)) => return Err(usage("give either --x or --target, not both")),
                (Some(x), None) => x,
                (None, Some(c)) => c.allocate(&coalition_table(&g, a.bound, exec)?)?,
                (None, None) => return Err(usage("--what weak/lexmin needs --x or --target")),
            };
            let opts = BalancingOptions { bound: a.bound, export_dir: a.export_dir.clone(), ..BalancingOptions::default() };
            if a.what == What::Weak {
                let w = weakly_close(&g, &x.0, &opts)?;
                let s = transplant_vector(&w.packing, &g)?;
                json!({ "target": x, "packing": w.packing, "transplants": s.0, "deviation": w.deviation })
            } else {
                let r = strongly_close(&g, &x.0, &opts)?;
                let s = transplant_vector(&r.packing, &g)?;
                json!({
                    "target": x,
                    "packing": r.packing,
                    "transplants": s.0,
                    "profile": r.profile,
                    "solver_calls": r.solver_calls,
                })
            }
        }
        other => {
            let concept = concept_of(other).expect("remaining variants are concepts");
            serde_json::to_value(concept.allocate(&coalition_table(&g, a.bound, exec)?)?)?
        }
    };
    emit(&serde_json::to_string_pretty(&out)?)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("bad config {}: {e}", path.display())))?
        }
        None => CampaignConfig::default(),
    };
    if let Some(v) = a.seeds {
        cfg.seeds = v;
    }
    if let Some(v) = a.countries {
        cfg.countries = v;
    }
    if let Some(v) = a.pairs {
        cfg.pairs = v;
    }
    if let Some(v) = a.concepts {
        cfg.concepts = v;
    }
    if let Some(v) = a.scenarios {
        cfg.scenarios = v;
    }
    if let Some(v) = a.bounds {
        cfg.bounds = v;
    }
    if let Some(v) = a.rounds {
        cfg.rounds = v;
    }
    cfg.validate().map_err(usage)?;
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let result = run_campaign(&cfg, exec).map_err(usage)?;
    let files = result
        .write_to(&a.out_dir, &cfg.bounds, a.json)
        .with_context(|| format!("writing reports to {}", a.out_dir.display()))?;
    if !result.failures.is_empty() {
        eprintln!("warning: {} of {} combinations failed; see failures.csv", result.failures.len(), cfg.combinations());
    }
    let summary = json!({
        "combinations": cfg.combinations(),
        "runs": result.runs.len(),
        "failures": result.failures.len(),
        "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    emit(&serde_json::to_string_pretty(&summary)?)?;
    if result.runs.is_empty() {
        bail!("every combination failed");
    }
    Ok(())
}
