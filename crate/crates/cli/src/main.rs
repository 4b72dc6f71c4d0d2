//! Command-line surface for the inference engine: network validation,
//! exact and anytime inference, empirical profiling, and scenario runs of
//! the metalevel strategy selector.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use infera_core::anytime::{
    AnytimeEngine, BoundPropagator, CompletenessModulator, DefaultPolicyEngine,
    DefaultPolicyTable, LogicSampler,
};
use infera_core::exact;
use infera_core::meta::{self, profile_strategy, MetaDecision, PrecisionProfile};
use infera_core::network::{parse_network, validate_file, Evidence, Network, NetworkFile, Query};
use infera_core::problems;
use infera_core::scenarios::BuiltinScenario;
use infera_core::value::ValueContext;
use infera_core::Problem;

const EXIT_DOMAIN: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "infera", version, about = "Bounded-resource probabilistic inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file and print a validation report.
    Validate {
        /// Path to a network JSON file.
        network: PathBuf,
    },
    /// Compute a posterior with a chosen strategy.
    Infer {
        network: PathBuf,
        /// Observed states, e.g. "B=t,C=f".
        #[arg(long, default_value = "")]
        evidence: String,
        /// Target assignment, e.g. "A=t".
        #[arg(long)]
        query: String,
        #[arg(long, value_enum, default_value_t = Strategy::Exact)]
        strategy: Strategy,
        /// Number of refinement steps for anytime strategies.
        #[arg(long, default_value_t = 0)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Descending importance thresholds for `modulate`, e.g. "0.5,0".
        #[arg(long, default_value = "0.5,0")]
        ladder: String,
        /// Default-policy table (JSON) for `default`.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Context key into the policy table.
        #[arg(long)]
        context: Option<String>,
    },
    /// Run the strategy selector over a catalog and emit value curves as CSV.
    Scenario {
        /// Builtin name (icu-mild, icu-sharp, icu-extreme) or a config file.
        scenario: String,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an empirical precision profile for a strategy on random networks.
    Profile {
        #[arg(long, value_enum)]
        strategy: ProfiledStrategy,
        /// Nodes per sampled network.
        #[arg(long, default_value_t = 8)]
        nodes: usize,
        #[arg(long, default_value_t = 2)]
        max_parents: usize,
        #[arg(long, default_value_t = 20)]
        trials: u32,
        /// Ascending step checkpoints, e.g. "1,16,256".
        #[arg(long, default_value = "1,4,16,64,256")]
        checkpoints: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        quantile: f64,
        /// Output path for the profile JSON.
        #[arg(long)]
        out: PathBuf,
        /// Policy table for the `default` strategy.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long)]
        context: Option<String>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Strategy {
    Exact,
    Sample,
    Bounds,
    Modulate,
    Default,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ProfiledStrategy {
    Sample,
    Bounds,
    Modulate,
    Default,
}

/// A scenario run assembled from files rather than the builtin catalog.
#[derive(Deserialize)]
struct ScenarioConfig {
    value_context: PathBuf,
    catalog_dir: Option<PathBuf>,
    horizon: f64,
    grid_n: usize,
    #[serde(default)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

struct CmdError {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> CmdError {
    CmdError { code: EXIT_USAGE, message: message.into() }
}

fn domain(message: impl Into<String>) -> CmdError {
    CmdError { code: EXIT_DOMAIN, message: message.into() }
}

fn read_file(path: &Path) -> Result<String, CmdError> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, CmdError> {
    let text = read_file(path)?;
    parse_network(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parse_assignments(text: &str) -> Result<Vec<(String, String)>, CmdError> {
    let mut pairs = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (var, state) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("expected VAR=STATE, got \"{part}\"")))?;
        pairs.push((var.trim().to_string(), state.trim().to_string()));
    }
    Ok(pairs)
}

fn run(cli: Cli) -> Result<(), CmdError> {
    match cli.command {
        Command::Validate { network } => cmd_validate(&network),
        Command::Infer { network, evidence, query, strategy, budget, seed, ladder, policy, context } => {
            cmd_infer(&network, &evidence, &query, strategy, budget, seed, &ladder, policy.as_deref(), context.as_deref())
        }
        Command::Scenario { scenario, out } => cmd_scenario(&scenario, out.as_deref()),
        Command::Profile { strategy, nodes, max_parents, trials, checkpoints, seed, quantile, out, policy, context } => {
            cmd_profile(strategy, nodes, max_parents, trials, &checkpoints, seed, quantile, &out, policy.as_deref(), context.as_deref())
        }
    }
}

fn cmd_validate(path: &Path) -> Result<(), CmdError> {
    let text = read_file(path)?;
    let raw: NetworkFile = serde_json::from_str(&text)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let report = validate_file(&raw);
    if report.is_empty() {
        println!("ok: {} is a valid network", path.display());
        Ok(())
    } else {
        let count = report.issues.len();
        print!("{report}");
        Err(domain(format!("{count} validation issue(s)")))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_infer(
    path: &Path,
    evidence: &str,
    query: &str,
    strategy: Strategy,
    budget: u64,
    seed: u64,
    ladder: &str,
    policy: Option<&Path>,
    context: Option<&str>,
) -> Result<(), CmdError> {
    let net = Arc::new(load_network(path)?);
    let ev_pairs = parse_assignments(evidence)?;
    let ev = Evidence::new(ev_pairs.iter().map(|(v, s)| (v.as_str(), s.as_str())))
        .map_err(|e| usage(e.to_string()))?;
    let q_pairs = parse_assignments(query)?;
    if q_pairs.len() != 1 {
        return Err(usage("query must be a single VAR=STATE assignment"));
    }
    let q = Query::new(q_pairs[0].0.as_str(), q_pairs[0].1.as_str());

    let started = Instant::now();
    let (estimate, steps) = match strategy {
        Strategy::Exact => {
            let post = exact::variable_elimination(&net, &ev, &q)
                .map_err(|e| domain(e.to_string()))?;
            println!("mean: {:.6}", post.probability);
            println!("interval: [{:.6}, {:.6}]", post.probability, post.probability);
            println!("precision: 1.000000");
            println!("steps: -");
            println!("elapsed_secs: {:.6}", started.elapsed().as_secs_f64());
            return Ok(());
        }
        Strategy::Sample => {
            let mut e = LogicSampler::new(net, &ev, &q, seed).map_err(|e| domain(e.to_string()))?;
            e.step(budget);
            (e.estimate(), budget)
        }
        Strategy::Bounds => {
            let mut e = BoundPropagator::new(net, &ev, &q).map_err(|e| domain(e.to_string()))?;
            e.step(budget);
            (e.estimate(), budget)
        }
        Strategy::Modulate => {
            let rungs: Vec<f64> = ladder
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|e| usage(format!("ladder: {e}"))))
                .collect::<Result<_, _>>()?;
            let mut e = CompletenessModulator::new(net, &ev, &q, &rungs)
                .map_err(|e| domain(e.to_string()))?;
            e.step(budget);
            (e.estimate(), budget)
        }
        Strategy::Default => {
            let policy = policy.ok_or_else(|| usage("--policy is required for default"))?;
            let key = context.ok_or_else(|| usage("--context is required for default"))?;
            let table = DefaultPolicyTable::from_json(&read_file(policy)?)
                .map_err(|e| usage(format!("{}: {e}", policy.display())))?;
            let mut e = DefaultPolicyEngine::new(&table, key).map_err(|e| domain(e.to_string()))?;
            e.step(budget);
            if let Some(action) = e.recommended_action() {
                println!("action: {action}");
            }
            (e.estimate(), budget)
        }
    };
    println!("mean: {:.6}", estimate.mean);
    println!("interval: [{:.6}, {:.6}]", estimate.low, estimate.high);
    println!("precision: {:.6}", estimate.precision());
    println!("steps: {steps}");
    println!("elapsed_secs: {:.6}", started.elapsed().as_secs_f64());
    Ok(())
}

fn render_csv(decision: &MetaDecision) -> String {
    let mut csv = String::from("strategy,t,precision,v_o,discount,v_c\n");
    for curve in &decision.curves {
        for p in &curve.points {
            csv.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                curve.strategy_id, p.t, p.precision, p.object_value, p.discount, p.comprehensive
            ));
        }
    }
    csv
}

fn load_catalog(dir: &Path) -> Result<Vec<PrecisionProfile>, CmdError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| usage(format!("{}: {e}", dir.display())))?
        .filter_map(|r| r.ok().map(|d| d.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    let mut catalog = Vec::new();
    for path in entries {
        let profile = PrecisionProfile::from_json(&read_file(&path)?)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        profile.check().map_err(|e| domain(format!("{}: {e}", path.display())))?;
        catalog.push(profile);
    }
    if catalog.is_empty() {
        return Err(domain(format!("no profiles in {}", dir.display())));
    }
    Ok(catalog)
}

fn cmd_scenario(scenario: &str, out: Option<&Path>) -> Result<(), CmdError> {
    let (decision, config_out) = if let Some(builtin) = BuiltinScenario::from_name(scenario) {
        (builtin.select().map_err(|e| domain(e.to_string()))?, None)
    } else {
        let path = Path::new(scenario);
        let config: ScenarioConfig = serde_json::from_str(&read_file(path)?)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let ctx = ValueContext::from_json(&read_file(&config.value_context)?)
            .map_err(|e| usage(format!("{}: {e}", config.value_context.display())))?;
        ctx.check().map_err(|e| domain(e.to_string()))?;
        let dir = config
            .catalog_dir
            .clone()
            .or_else(|| std::env::var_os("INFERA_CATALOG_DIR").map(PathBuf::from))
            .ok_or_else(|| usage("no catalog_dir in config and INFERA_CATALOG_DIR unset"))?;
        let catalog = load_catalog(&dir)?;
        let decision = meta::select_strategy(&catalog, &ctx, config.horizon, config.grid_n)
            .map_err(|e| domain(e.to_string()))?;
        (decision, config.out)
    };

    let csv = render_csv(&decision);
    match out.map(Path::to_path_buf).or(config_out) {
        Some(path) => fs::write(&path, &csv)
            .map_err(|e| domain(format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    println!(
        "SELECTED {} t_max={:.6} v_c_max={:.6}",
        decision.selected, decision.t_max, decision.v_c_max
    );
    eprintln!("metalevel_overhead_secs: {:.6}", decision.metalevel_overhead_secs);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_profile(
    strategy: ProfiledStrategy,
    nodes: usize,
    max_parents: usize,
    trials: u32,
    checkpoints: &str,
    seed: u64,
    quantile: f64,
    out: &Path,
    policy: Option<&Path>,
    context: Option<&str>,
) -> Result<(), CmdError> {
    let checkpoints: Vec<u64> = checkpoints
        .split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| usage(format!("checkpoints: {e}"))))
        .collect::<Result<_, _>>()?;
    let class = format!("random-{nodes}-{max_parents}");
    let sample = |s: u64| problems::random_problem(nodes, max_parents, s);
    let (id, profile) = match strategy {
        ProfiledStrategy::Sample => (
            "sample",
            profile_strategy(
                "sample",
                &class,
                sample,
                |p: &Problem, s| Ok(Box::new(LogicSampler::new(p.net.clone(), &p.evidence, &p.query, s)?) as Box<dyn AnytimeEngine>),
                &checkpoints,
                trials,
                seed,
                quantile,
            ),
        ),
        ProfiledStrategy::Bounds => (
            "bounds",
            profile_strategy(
                "bounds",
                &class,
                sample,
                |p: &Problem, _| Ok(Box::new(BoundPropagator::new(p.net.clone(), &p.evidence, &p.query)?) as Box<dyn AnytimeEngine>),
                &checkpoints,
                trials,
                seed,
                quantile,
            ),
        ),
        ProfiledStrategy::Modulate => (
            "modulate",
            profile_strategy(
                "modulate",
                &class,
                sample,
                |p: &Problem, _| {
                    Ok(Box::new(CompletenessModulator::new(p.net.clone(), &p.evidence, &p.query, &[0.5, 0.0])?) as Box<dyn AnytimeEngine>)
                },
                &checkpoints,
                trials,
                seed,
                quantile,
            ),
        ),
        ProfiledStrategy::Default => {
            let policy = policy.ok_or_else(|| usage("--policy is required for default"))?;
            let key = context
                .ok_or_else(|| usage("--context is required for default"))?
                .to_string();
            let table = DefaultPolicyTable::from_json(&read_file(policy)?)
                .map_err(|e| usage(format!("{}: {e}", policy.display())))?;
            (
                "default",
                profile_strategy(
                    "default",
                    &class,
                    sample,
                    move |_, _| Ok(Box::new(DefaultPolicyEngine::new(&table, &key)?) as Box<dyn AnytimeEngine>),
                    &checkpoints,
                    trials,
                    seed,
                    quantile,
                ),
            )
        }
    };
    let profile = profile.map_err(|e| domain(e.to_string()))?;
    fs::write(out, profile.to_json()).map_err(|e| domain(format!("{}: {e}", out.display())))?;
    println!(
        "wrote {} profile ({} checkpoints, {:.0} steps/s) to {}",
        id,
        profile.points.len(),
        profile.steps_per_second,
        out.display()
    );
    Ok(())
}
