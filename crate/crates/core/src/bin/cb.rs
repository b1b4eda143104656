//! `cb`: run calibrated-bootstrap scenarios from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use calboot::harness::{run_scenario, ErrorRecord, ScenarioConfig, ScenarioKind};
use calboot::{Error, Result};

#[derive(Parser)]
#[command(name = "cb", version, about = "Calibrated bootstrap experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report and plot data.
    Run(Box<RunArgs>),
    /// List the scenario names.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name (see `cb list`).
    scenario: ScenarioKind,
    /// Key/value config file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// p/n ratio, an alternative to --p.
    #[arg(long)]
    kappa: Option<String>,
    /// Von Mises concentration.
    #[arg(long)]
    concentration: Option<String>,
    /// Comma-separated α levels.
    #[arg(long)]
    alpha: Option<String>,
    /// α levels whose RA runs feed the DR pool.
    #[arg(long)]
    pool_alphas: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// Penalty value or `cv`.
    #[arg(long)]
    lambda: Option<String>,
    /// Noise level or `unknown`.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    coordinate: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    full_scale: bool,
    /// Input CSV (lasso-diabetes).
    #[arg(long)]
    data: Option<String>,
    /// Soft-threshold convention: displayed or mean-scale.
    #[arg(long)]
    convention: Option<String>,
    /// DR tie-break: random or lowest-index.
    #[arg(long)]
    tie_break: Option<String>,
    #[arg(long)]
    emit_contour_histogram: bool,
    /// Inner replicates per RA step.
    #[arg(long = "ra-b")]
    ra_b: Option<String>,
    /// RA step constant as a multiple of n.
    #[arg(long = "ra-d")]
    ra_d: Option<String>,
    /// RA iterations.
    #[arg(long = "ra-t")]
    ra_t: Option<String>,
    #[arg(long = "ra-m-lower")]
    ra_m_lower: Option<String>,
    #[arg(long = "ra-m-upper")]
    ra_m_upper: Option<String>,
    #[arg(long = "ra-m0")]
    ra_m0: Option<String>,
    #[arg(long)]
    b_out: Option<String>,
    #[arg(long)]
    boot_reps: Option<String>,
    #[arg(long)]
    draws: Option<String>,
    #[arg(long)]
    mc_reps: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::new(self.scenario);
        if let Some(path) = &self.config {
            cfg.merge_kv_str(&std::fs::read_to_string(path)?)?;
        }
        let pairs = [
            ("seed", &self.seed),
            ("n", &self.n),
            ("p", &self.p),
            ("kappa", &self.kappa),
            ("concentration", &self.concentration),
            ("alpha", &self.alpha),
            ("pool_alphas", &self.pool_alphas),
            ("reps", &self.reps),
            ("lambda", &self.lambda),
            ("sigma", &self.sigma),
            ("theta", &self.theta),
            ("coordinate", &self.coordinate),
            ("out", &self.out),
            ("threads", &self.threads),
            ("data", &self.data),
            ("convention", &self.convention),
            ("tie_break", &self.tie_break),
            ("ra.b", &self.ra_b),
            ("ra.d", &self.ra_d),
            ("ra.t", &self.ra_t),
            ("ra.m_lower", &self.ra_m_lower),
            ("ra.m_upper", &self.ra_m_upper),
            ("ra.m0", &self.ra_m0),
            ("b_out", &self.b_out),
            ("boot_reps", &self.boot_reps),
            ("draws", &self.draws),
            ("mc_reps", &self.mc_reps),
            ("grid", &self.grid),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v)?;
        }
        if self.full_scale {
            cfg.full_scale = true;
        }
        if self.emit_contour_histogram {
            cfg.emit_contour_histogram = true;
        }
        Ok(cfg)
    }
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let out = run_scenario(&cfg)?;
    let dir = cfg.output_dir.clone();
    for path in out.write(&dir)? {
        println!("{}", path.display());
    }
    eprintln!("{} finished in {:.1}s on {} thread(s)", cfg.scenario, out.wall_seconds, out.threads);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for s in ScenarioKind::ALL {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{}", ErrorRecord::from(&e).to_json());
                ExitCode::from(2)
            }
        },
    }
}
