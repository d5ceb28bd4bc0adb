mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use histsel::gue::{verify_identities, DEFAULT_SIGMA};
use histsel::histories::{ConsistencyKind, TrivialityCriterion, TrivialityKind};
use histsel::output::{self, format_key_values, OutputBundle};
use histsel::selection::{run, EpsilonSchedule, RunConfig};
use histsel::stats::{
    asymptotic_epsilon, consistent_set_cdf, estimate_percentiles, reprojection_beta_cdf, PercentileConfig,
    PercentileTable, ThresholdInputs, ThresholdReport,
};

use config::{parse_k_range, parse_p_list, FileValues};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(histsel::Error),
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 1,
            CliError::Check(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Check(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<histsel::Error> for CliError {
    fn from(e: histsel::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "histsel", version, about = "Consistent-set selection by Schmidt projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the selection algorithm and write an output bundle.
    Simulate(SimulateArgs),
    /// Estimate the epsilon percentile table by Monte Carlo.
    Percentiles(PercentileArgs),
    /// Check the GUE moment identities by Monte Carlo.
    VerifyGue(VerifyGueArgs),
    /// Evaluate the closed-form thresholds and distributions.
    Analytic {
        #[command(subcommand)]
        query: AnalyticQuery,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// `key = value` file with defaults for any flag below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    /// Schmidt rank of the initial state.
    #[arg(long)]
    rank: Option<usize>,
    /// medium-dhc, weak-dhc or absolute.
    #[arg(long)]
    criterion: Option<ConsistencyKind>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// relative or absolute.
    #[arg(long)]
    delta_mode: Option<TrivialityKind>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    max_histories: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bisect_tol: Option<f64>,
    /// const or percentile.
    #[arg(long)]
    epsilon_mode: Option<String>,
    #[arg(long)]
    percentile_p: Option<f64>,
    #[arg(long)]
    percentile_table: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PercentileArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    /// Range `a..b` (inclusive) or comma-separated list.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated percentiles.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// medium-dhc or weak-dhc.
    #[arg(long)]
    criterion: Option<ConsistencyKind>,
    /// Bootstrap resamples for the standard errors (0 disables).
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyGueArgs {
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
}

#[derive(Debug, Subcommand)]
enum AnalyticQuery {
    /// Reprojection probabilities and delta/epsilon thresholds.
    Thresholds {
        #[arg(long, default_value_t = 0.05)]
        q: f64,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 45)]
        d: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        support_norm_sq: f64,
    },
    /// CDF of the squared reprojection statistic.
    Beta {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        r: usize,
    },
    /// CDF of the extension statistic for a consistent set.
    Cdf {
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 45)]
        d: usize,
        #[arg(long)]
        k: usize,
    },
    /// Closed-form long-time epsilon.
    Asymptotic {
        #[arg(long, default_value_t = 45)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 3)]
        np: usize,
    },
}

fn load_table(path: &Path) -> Result<PercentileTable, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    PercentileTable::from_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn build_run_config(args: SimulateArgs) -> Result<(RunConfig, PathBuf, Option<String>), CliError> {
    let mut file = FileValues::load(args.config.as_deref())?;
    file.ignore(&["percentile-table-hash", "stop", "version", "steps", "projections", "live-leaves"]);
    let kind = file.pick("criterion", args.criterion, ConsistencyKind::MediumDhc)?;
    let delta = file.pick("delta", args.delta, 1e-8)?;
    let delta_mode = file.pick("delta-mode", args.delta_mode, TrivialityKind::Relative)?;
    let triviality = TrivialityCriterion::new(delta_mode, delta).map_err(|e| CliError::Config(e.to_string()))?;
    let mut c = RunConfig::new(
        file.pick("d1", args.d1, 3)?,
        file.pick("d2", args.d2, 15)?,
        file.pick("rank", args.rank, 1)?,
        kind,
        0.0,
        triviality,
        file.pick("seed", args.seed, 0)?,
    );
    c.dt = file.pick("dt", args.dt, c.dt)?;
    c.t_max = file.pick("t-max", args.t_max, c.t_max)?;
    c.max_histories = file.pick("max-histories", args.max_histories, c.max_histories)?;
    c.max_steps = file.pick("max-steps", args.max_steps, c.max_steps)?;
    c.bisect_tol = file.pick("bisect-tol", args.bisect_tol, c.bisect_tol)?;
    let epsilon = file.pick("epsilon", args.epsilon, 0.15)?;
    let mode: String = file.pick("epsilon-mode", args.epsilon_mode, "const".to_string())?;
    let p = file.pick("percentile-p", args.percentile_p, 0.5)?;
    let table_path: Option<PathBuf> = file.pick_opt("percentile-table", args.percentile_table)?;
    let out = file.pick("out", args.out, PathBuf::from("out"))?;
    file.finish()?;

    let mut table_source = None;
    c.schedule = match mode.as_str() {
        "const" => EpsilonSchedule::Constant(epsilon),
        "percentile" => {
            let path = table_path
                .ok_or_else(|| CliError::Config("--epsilon-mode percentile needs --percentile-table".into()))?;
            table_source = Some(path.display().to_string());
            EpsilonSchedule::Percentile {
                p,
                table: load_table(&path)?,
            }
        }
        other => return Err(CliError::Config(format!("unknown epsilon mode `{other}`"))),
    };
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok((c, out, table_source))
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let (config, out, table_source) = build_run_config(args)?;
    let record = run(&config)?;
    let extra = vec![
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("stop".to_string(), record.stop.to_string()),
        ("steps".to_string(), (record.steps.len() - 1).to_string()),
        ("projections".to_string(), record.events.len().to_string()),
        ("live-leaves".to_string(), record.tree.live_leaf_count().to_string()),
    ];
    let bundle = OutputBundle::new(&out).write_run(&config, &record, table_source.as_deref(), &extra)?;
    println!(
        "{} projections, {} live histories, stopped at {}; output in {}",
        record.events.len(),
        record.tree.live_leaf_count(),
        record.stop,
        bundle.dir.display()
    );
    Ok(())
}

fn percentiles(args: PercentileArgs) -> Result<(), CliError> {
    let mut file = FileValues::load(args.config.as_deref())?;
    let ks_text: String = file.pick("k", args.k, "2..30".to_string())?;
    let ps_text: String = file.pick("p", args.p, "0.01,0.5,0.99".to_string())?;
    let ks = parse_k_range(&ks_text).map_err(CliError::Config)?;
    let ps = parse_p_list(&ps_text).map_err(CliError::Config)?;
    let mut c = PercentileConfig::new(
        file.pick("d1", args.d1, 3)?,
        file.pick("d2", args.d2, 15)?,
        ks,
        ps,
        file.pick("samples", args.samples, 10_000)?,
        file.pick("seed", args.seed, 0)?,
    );
    c.kind = file.pick("criterion", args.criterion, ConsistencyKind::MediumDhc)?;
    c.bootstrap_resamples = file.pick("bootstrap", args.bootstrap, 0)?;
    let out: Option<PathBuf> = file.pick_opt("out", args.out)?;
    file.finish()?;
    if c.kind == ConsistencyKind::Absolute {
        return Err(CliError::Config("percentile tables are defined for medium-dhc and weak-dhc".into()));
    }
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let canonical = format_key_values(&[
        ("d1".into(), c.d1.to_string()),
        ("d2".into(), c.d2.to_string()),
        ("k".into(), ks_text),
        ("p".into(), ps_text),
        ("samples".into(), c.samples.to_string()),
        ("seed".into(), c.seed.to_string()),
        ("criterion".into(), c.kind.to_string()),
    ]);
    let table = estimate_percentiles(&c)?;
    let mut text = output::percentile_csv(&table, &output::config_hash(&canonical));
    if let Some(se) = &table.standard_errors {
        for (pi, p) in table.ps.iter().enumerate() {
            for (ki, k) in table.ks.iter().enumerate() {
                text.push_str(&format!("# bootstrap_se k={k} p={p} se={}\n", se[pi][ki]));
            }
        }
    }
    match out {
        Some(path) => fs::write(&path, text).map_err(|e| CliError::Core(e.into()))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Core(e.into()))?,
    }
    Ok(())
}

fn verify_gue(args: VerifyGueArgs) -> Result<(), CliError> {
    let checks = verify_identities(args.dim, args.sigma, args.samples, args.seed)
        .map_err(|e| if e.is_numerical() { CliError::Core(e) } else { CliError::Config(e.to_string()) })?;
    let mut failed = 0;
    for c in &checks {
        let ok = c.passes();
        failed += usize::from(!ok);
        println!(
            "{} {:<22} analytic {:>10.5} {:>+10.5}i  estimate {:>10.5} {:>+10.5}i  se {:.2e}",
            if ok { "PASS" } else { "FAIL" },
            c.identity.name(),
            c.analytic.re,
            c.analytic.im,
            c.estimate.re,
            c.estimate.im,
            c.standard_error
        );
    }
    if failed > 0 {
        return Err(CliError::Check(format!("{failed} identities failed")));
    }
    Ok(())
}

fn analytic(query: AnalyticQuery) -> Result<(), CliError> {
    let config_err = |e: histsel::Error| CliError::Config(e.to_string());
    match query {
        AnalyticQuery::Thresholds {
            q,
            r,
            d,
            epsilon,
            delta,
            support_norm_sq,
        } => {
            let report = ThresholdReport::evaluate(ThresholdInputs {
                q,
                r,
                d,
                epsilon,
                delta,
                support_norm_sq,
            })
            .map_err(config_err)?;
            println!("{report}");
        }
        AnalyticQuery::Beta { lambda, r } => {
            println!("{}", reprojection_beta_cdf(lambda, r).map_err(config_err)?);
        }
        AnalyticQuery::Cdf { lambda, d, k } => {
            println!("{}", consistent_set_cdf(lambda, d, k).map_err(config_err)?);
        }
        AnalyticQuery::Asymptotic { d, k, p, np } => {
            let a = asymptotic_epsilon(d, k, p, np).map_err(config_err)?;
            println!("exact = {}\nlarge_k = {}", a.exact, a.large_k);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Percentiles(a) => percentiles(a),
        Command::VerifyGue(a) => verify_gue(a),
        Command::Analytic { query } => analytic(query),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
