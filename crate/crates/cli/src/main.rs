use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ftspan_core::gen::{generate, generate_metric, to_text, Distribution};
use ftspan_core::verify::{
    audit, exhaustive_ft_check, fault_set_count, sampled_ft_check, surrogate_attack_sets, Bounds, EXHAUSTIVE_BUDGET,
};
use ftspan_core::{build_ft_spanner, load_points, Build, Config, InputFormat, Metric, NetTree, Profile, WeightedGraph};
use log::{info, warn};
use serde_json::json;

/// Fault-tolerant light spanners for point sets and finite metrics.
#[derive(Parser)]
#[command(name = "ftspan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a spanner and write its edge list and report.
    Build(BuildArgs),
    /// Audit a spanner file against its metric.
    Verify(VerifyArgs),
    /// Build and measure over a grid of sizes and fault counts (CSV).
    Bench(BenchArgs),
    /// Summaries of a metric, and of a spanner over it if given.
    Stats(StatsArgs),
    /// Generate a point set.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    faults: usize,
    #[arg(long, default_value_t = 8.0)]
    lambda_kappa: f64,
    #[arg(long, default_value_t = 16.0)]
    xi: f64,
    /// SSList capacity constant.
    #[arg(long, default_value_t = 32.0)]
    ssc: f64,
    #[arg(long, default_value_t = Profile::Practical)]
    profile: Profile,
    #[arg(long)]
    fast_pools: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ConfigArgs {
    fn config(&self) -> Config {
        Config {
            eps: self.eps,
            faults: self.faults,
            lambda_kappa: self.lambda_kappa,
            xi: self.xi,
            ss_capacity: self.ssc,
            profile: self.profile,
            fast_pools: self.fast_pools,
            seed: self.seed,
            ..Config::default()
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    input: PathBuf,
    #[arg(long, default_value = "coords")]
    format: InputFormat,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value = "spanner.edges")]
    out: PathBuf,
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    input: PathBuf,
    spanner: PathBuf,
    #[arg(long, default_value = "coords")]
    format: InputFormat,
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Random fault sets of size f, on top of the attack sets.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Enumerate every fault set of size at most f.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 64)]
    n_min: usize,
    #[arg(long, default_value_t = 1024)]
    n_max: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    fault_grid: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = Distribution::Uniform)]
    dist: Distribution,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    input: PathBuf,
    #[arg(long, default_value = "coords")]
    format: InputFormat,
    #[arg(long)]
    spanner: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = Distribution::Uniform)]
    dist: Distribution,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Usage and IO problems exit with 2, failed verdicts with 1.
enum Failure {
    Usage(anyhow::Error),
    Verdict(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn load(path: &Path, format: InputFormat) -> anyhow::Result<Metric> {
    if !path.exists() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(load_points(path, format)?)
}

fn log_config(cfg: &Config) {
    info!("config {}", serde_json::to_string(cfg).expect("config serializes"));
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run_build(args: &BuildArgs) -> Result<(), Failure> {
    let cfg = args.cfg.config();
    log_config(&cfg);
    let m = load(&args.input, args.format)?;
    if cfg.profile == Profile::Faithful && m.len() > 50 {
        warn!(
            "faithful constants make every pair a level-0 cross neighbor for n = {}; the hierarchy collapses at this scale",
            m.len()
        );
    }
    let build = build_ft_spanner(m, &cfg)?;
    build
        .spanner
        .graph
        .write(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    fs::write(&args.report, build.report.to_json()?).with_context(|| format!("writing {}", args.report.display()))?;
    info!(
        "{} edges, max degree {}, lightness {:.3}",
        build.report.edges, build.report.max_degree, build.report.lightness
    );
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let cfg = args.cfg.config();
    log_config(&cfg);
    let m = load(&args.input, args.format)?;
    let build = build_ft_spanner(m, &cfg)?;
    let h = WeightedGraph::read(&args.spanner, &build.metric)?;
    let f = cfg.faults;
    let verdict = if args.exhaustive {
        let needed = fault_set_count(build.metric.len(), f);
        if needed > EXHAUSTIVE_BUDGET {
            return Err(Failure::Usage(anyhow::anyhow!(
                "exhaustive check needs {needed} fault sets, budget is {EXHAUSTIVE_BUDGET}"
            )));
        }
        exhaustive_ft_check(&h, &build.metric, cfg.eps, f)?
    } else {
        let attacks = surrogate_attack_sets(&build);
        sampled_ft_check(&h, &build.metric, cfg.eps, f, args.trials, cfg.seed, &attacks)
    };
    let report = audit(&h, &build, &Bounds::for_build(&build), Some(verdict.clone()));
    let text = report.to_json()?;
    match &args.report {
        Some(p) => fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    if report.pass {
        return Ok(());
    }
    let mut why = Vec::new();
    if !verdict.pass {
        why.push(format!(
            "stretch {:.6} > {:.6} for pair {:?} under faults {:?}",
            verdict.worst.max_stretch, verdict.bound, verdict.worst.pair, verdict.worst.faults
        ));
    }
    if !report.verdicts.degree {
        why.push(format!("max degree {} > {}", report.max_degree, report.bounds.degree));
    }
    Err(Failure::Verdict(why.join("; ")))
}

fn bench_row(build: &Build, ms: u128, trials: usize) -> [String; 9] {
    let cfg = &build.config;
    let attacks = surrogate_attack_sets(build);
    let v = sampled_ft_check(
        &build.spanner.graph,
        &build.metric,
        cfg.eps,
        cfg.faults,
        trials,
        cfg.seed,
        &attacks,
    );
    [
        build.metric.len().to_string(),
        cfg.faults.to_string(),
        cfg.eps.to_string(),
        cfg.seed.to_string(),
        ms.to_string(),
        build.report.edges.to_string(),
        build.report.max_degree.to_string(),
        format!("{:.6}", build.report.lightness),
        format!("{:.6}", v.worst.max_stretch),
    ]
}

fn run_bench(args: &BenchArgs) -> Result<(), Failure> {
    if args.n_min == 0 || args.n_min > args.n_max {
        return Err(Failure::Usage(anyhow::anyhow!("need 1 <= n-min <= n-max")));
    }
    let base = args.cfg.config();
    log_config(&base);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "n",
        "f",
        "eps",
        "seed",
        "build_ms",
        "edges",
        "max_deg",
        "lightness",
        "worst_sampled_stretch",
    ])?;
    let sizes = std::iter::successors(Some(args.n_min), |&n| n.checked_mul(2)).take_while(|&n| n <= args.n_max);
    for n in sizes {
        let m = generate_metric(n, args.dim, args.dist, base.seed.wrapping_add(n as u64))?;
        for &f in &args.fault_grid {
            let cfg = Config {
                faults: f,
                ..base.clone()
            };
            let start = Instant::now();
            let build = build_ft_spanner(m.clone(), &cfg)?;
            let ms = start.elapsed().as_millis();
            wtr.write_record(bench_row(&build, ms, args.trials))?;
            info!("n={n} f={f} done in {ms} ms");
        }
    }
    let bytes = wtr.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
    write_out(args.out.as_deref(), &String::from_utf8(bytes)?)?;
    Ok(())
}

fn run_stats(args: &StatsArgs) -> Result<(), Failure> {
    let m = load(&args.input, args.format)?.normalize()?;
    let tree = NetTree::build(&m);
    let nets: Vec<usize> = (0..=tree.top()).map(|i| tree.level_nodes(i).len()).collect();
    let (lo, hi) = if m.len() >= 2 { m.extent()? } else { (0.0, 0.0) };
    let mut out = json!({
        "n": m.len(),
        "scale_factor": m.scale_factor(),
        "min_distance": lo,
        "diameter": hi,
        "top_level": tree.top(),
        "net_sizes": nets,
    });
    if let Some(path) = &args.spanner {
        let h = WeightedGraph::read(path, &m)?;
        let (_, mst_weight) = ftspan_core::mst(&m);
        out["spanner"] = json!({
            "edges": h.edge_count(),
            "max_degree": h.max_degree(),
            "min_degree": h.min_degree(),
            "weight": h.weight(),
            "lightness": ftspan_core::lightness(&h, mst_weight)?,
        });
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run_gen(args: &GenArgs) -> Result<(), Failure> {
    let pts = generate(args.n, args.dim, args.dist, args.seed)?;
    write_out(args.out.as_deref(), &to_text(&pts))?;
    Ok(())
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FTSPAN_THREADS") {
        let threads: usize = v
            .parse()
            .with_context(|| format!("FTSPAN_THREADS must be a count, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = init_threads().map_err(Failure::Usage).and_then(|_| match &cli.command {
        Command::Build(a) => run_build(a),
        Command::Verify(a) => run_verify(a),
        Command::Bench(a) => run_bench(a),
        Command::Stats(a) => run_stats(a),
        Command::Gen(a) => run_gen(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Verdict(why)) => {
            eprintln!("verification failed: {why}");
            ExitCode::from(1)
        }
    }
}
