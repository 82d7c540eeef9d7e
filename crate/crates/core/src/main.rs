use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fleetplan::bench::{expand_kinds, parse_spec, run_bench, BenchError, InstanceSource, RunConfig};
use fleetplan::instance::{generate, save, Balance, GenSpec, Instance, Layout};
use fleetplan::lp::Tolerances;
use fleetplan::model::{initial_state, profit_bounds, BoundMode, EvaluationCache, StateKey, DEFAULT_NODE_LIMIT};
use fleetplan::search::{astar, oracle_enumerate, HeuristicKind, SearchError, WeightedBase};

#[derive(Parser)]
#[command(name = "fleetplan", version, about = "Plan station openings and fleet growth for vehicle sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance file.
    Gen(GenArgs),
    /// Solve one instance with one search variant.
    Solve(SolveArgs),
    /// Run an instance × heuristic matrix and write CSV.
    Bench(BenchArgs),
    /// Exact optimum by enumerating every opening order.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    /// C, H or Q.
    #[arg(long)]
    layout: Layout,
    #[arg(long)]
    size: usize,
    /// BAL or IMB.
    #[arg(long, default_value = "BAL")]
    balance: Balance,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Lattice spacing in km.
    #[arg(long)]
    spacing: Option<f64>,
    /// Output file; defaults to `<name>.json` in `--dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    dir: PathBuf,
}

#[derive(Args)]
struct SourceArgs {
    /// Instance file.
    #[arg(long, short, conflicts_with = "spec")]
    instance: Option<PathBuf>,
    /// Generated instance such as `Q-9-BAL` or `Q-9-BAL-s3`.
    #[arg(long)]
    spec: Option<String>,
    /// Seed for `--spec` without an `-s` suffix.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Start state as comma-separated 0-based stations; defaults to the
    /// budget-constrained initial state.
    #[arg(long, value_delimiter = ',')]
    start: Option<Vec<usize>>,
}

impl SourceArgs {
    fn load(&self) -> Result<Instance, BenchError> {
        let src = match (&self.instance, &self.spec) {
            (Some(path), _) => InstanceSource::File(path.clone()),
            (None, Some(spec)) => InstanceSource::Generated(parse_spec(spec, self.seed)?),
            (None, None) => return Err(BenchError::Config("give --instance or --spec".into())),
        };
        Ok(src.resolve()?)
    }

    fn start(&self, instance: &Instance, cache: &mut EvaluationCache) -> Result<StateKey, BenchError> {
        match &self.start {
            Some(stations) => {
                if let Some(&bad) = stations.iter().find(|&&i| i >= instance.stations) {
                    return Err(BenchError::Config(format!("station {bad} out of range 0..{}", instance.stations)));
                }
                Ok(StateKey::from_stations(stations.iter().copied()))
            }
            None => Ok(initial_state(instance, cache)?.state),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// dijkstra, eh1, eh2, eh3, ah1, ah2, w-eh2, w-eh3 (a `:param` suffix
    /// is accepted in place of --gamma / --weight).
    #[arg(long, default_value = "eh2")]
    kind: String,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    weight: Option<f64>,
    #[arg(long, default_value = "lp_relaxation")]
    bounds: BoundMode,
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    node_limit: usize,
    /// Print the result as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance files.
    #[arg(long, short)]
    instance: Vec<PathBuf>,
    /// Generated instances such as `Q-9-BAL`.
    #[arg(long, value_delimiter = ',')]
    spec: Vec<String>,
    /// Add the eleven benchmark-family instances.
    #[arg(long)]
    family: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "dijkstra,eh1,eh2,eh3")]
    kinds: Vec<HeuristicKind>,
    /// Adds one ah2 cell per value.
    #[arg(long, value_delimiter = ',')]
    gammas: Vec<f64>,
    /// Adds w-eh2 and w-eh3 cells per value.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[arg(long, default_value = "lp_relaxation")]
    bounds: BoundMode,
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    node_limit: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV output; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    source: SourceArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_gen(a: GenArgs) -> Result<(), BenchError> {
    let mut spec = GenSpec::new(a.layout, a.size, a.balance, a.seed);
    if let Some(spacing) = a.spacing {
        spec.spacing = spacing;
    }
    let instance = generate(&spec)?;
    let path = a.out.unwrap_or_else(|| a.dir.join(format!("{}.json", instance.name)));
    save(&instance, &path)?;
    println!(
        "{}: R={} layout={} balance={} seed={} budget={} -> {}",
        instance.name,
        instance.stations,
        spec.layout,
        spec.balance,
        spec.seed,
        instance.budget,
        path.display()
    );
    Ok(())
}

fn resolve_kind(a: &SolveArgs) -> Result<HeuristicKind, BenchError> {
    let invalid = |msg: String| BenchError::Search(SearchError::InvalidKind(msg));
    let kind = match (a.kind.to_ascii_lowercase().as_str(), a.gamma, a.weight) {
        ("ah2", Some(gamma), _) => HeuristicKind::Ah2 { gamma },
        ("w-eh2", _, Some(w)) => HeuristicKind::Weighted { base: WeightedBase::Eh2, w },
        ("w-eh3", _, Some(w)) => HeuristicKind::Weighted { base: WeightedBase::Eh3, w },
        (_, Some(_), _) | (_, _, Some(_)) if !a.kind.contains(':') => {
            return Err(invalid(format!("--gamma/--weight do not apply to {}", a.kind)))
        }
        _ => a.kind.parse::<HeuristicKind>().map_err(|e| invalid(e.to_string()))?,
    };
    kind.validate()?;
    Ok(kind)
}

fn cmd_solve(a: SolveArgs) -> Result<(), BenchError> {
    let kind = resolve_kind(&a)?;
    let tol = Tolerances::from_env().map_err(BenchError::Tolerance)?;
    let instance = a.source.load()?;
    let mut cache = EvaluationCache::new(tol);
    let start = a.source.start(&instance, &mut cache)?;
    let bounds = if kind.needs_bounds() || !kind.is_exact() {
        Some(profit_bounds(&instance, a.bounds, start.len(), &tol, a.node_limit)?)
    } else {
        None
    };
    let result = astar(&instance, start, kind, bounds.as_ref(), &mut cache)?;
    let gap = if kind.is_exact() {
        0.0
    } else {
        let exact = astar(&instance, start, HeuristicKind::Eh2, bounds.as_ref(), &mut cache)?;
        fleetplan::bench::gap_pct(result.optimal_time, exact.optimal_time)
    };
    let mut out = io::stdout().lock();
    let io_err = |e: io::Error| BenchError::Output(e.to_string());
    if a.json {
        let body = serde_json::json!({
            "instance": instance.name,
            "start": start.stations().collect::<Vec<_>>(),
            "bound_mode": a.bounds,
            "gap_pct": gap,
            "result": result,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("result serializes")).map_err(io_err)?;
    } else {
        writeln!(out, "instance {}  kind {}  start {}", instance.name, kind, start).map_err(io_err)?;
        write!(out, "{}", result.report()).map_err(io_err)?;
        writeln!(
            out,
            "opt {:.6}  gap_pct {:.4}  expanded {}  remaining {}  evaluations {}  time_ms {:.3}",
            result.optimal_time,
            gap,
            result.stats.expanded,
            result.stats.remaining,
            result.stats.evaluations,
            result.stats.elapsed.as_secs_f64() * 1e3
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), BenchError> {
    let mut instances: Vec<InstanceSource> = a.instance.into_iter().map(InstanceSource::File).collect();
    for s in &a.spec {
        instances.push(InstanceSource::Generated(parse_spec(s, a.seed)?));
    }
    if a.family {
        instances.extend(GenSpec::benchmark_family(a.seed).into_iter().map(InstanceSource::Generated));
    }
    let kinds = expand_kinds(&a.kinds, &a.gammas, &a.weights)?;
    let config = RunConfig { instances, kinds, bound_mode: a.bounds, node_limit: a.node_limit, jobs: a.jobs };
    let report = run_bench(&config)?;
    match a.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| BenchError::Output(format!("{}: {e}", dir.display())))?;
            }
            let file = File::create(&path).map_err(|e| BenchError::Output(format!("{}: {e}", path.display())))?;
            report.write_csv(BufWriter::new(file))?;
        }
        None => report.write_csv(io::stdout().lock())?,
    }
    let failed = report.failures().count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", report.rows.len());
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), BenchError> {
    let tol = Tolerances::from_env().map_err(BenchError::Tolerance)?;
    let instance = a.source.load()?;
    let mut cache = EvaluationCache::new(tol);
    let start = a.source.start(&instance, &mut cache)?;
    let opt = oracle_enumerate(&instance, start, &mut cache)?;
    println!("instance {}  start {}  opt {:.6}  evaluations {}", instance.name, start, opt, cache.misses());
    Ok(())
}
