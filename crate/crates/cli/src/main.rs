use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dispatch_cli::commands::{cmd_compare, cmd_region, cmd_validate};
use dispatch_cli::{CliError, MasterChoice, ModelChoice, RunConfig, OUT_ENV};

/// Dispatchable regions of radial distribution networks.
#[derive(Parser, Debug)]
#[command(name = "dregion", version)]
struct Cli {
    /// TOML run configuration; flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for oracle sweeps and sampling.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute one region and write facets, vertices, trace and report.
    Region(Overrides),
    /// Compare against the oracle sweep, or run the k or r/x sweeps.
    Compare {
        #[command(flatten)]
        common: Overrides,
        /// Inclusive cone-depth range, e.g. 2..8.
        #[arg(long)]
        sweep_k: Option<String>,
        /// Comma-separated impedance factors; 1.0 is always added.
        #[arg(long, value_delimiter = ',')]
        scale_rx: Option<Vec<f64>>,
    },
    /// Check the case and run the projection self-test.
    Validate(Overrides),
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Case file (.dnet or .m) or builtin:NAME.
    #[arg(long)]
    case: Option<String>,
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// Leave out the power-circle facets.
    #[arg(long)]
    no_circle: bool,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    big_m: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    master: Option<MasterChoice>,
    /// Oracle grid spacing in MW.
    #[arg(long)]
    resolution_mw: Option<f64>,
    #[arg(long)]
    tol_exact: Option<f64>,
    #[arg(long)]
    oracle_k: Option<usize>,
    #[arg(long)]
    grid_cap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident: $($f:ident),*) => {
        $(if let Some(v) = $o.$f { $cfg.$f = v; })*
    };
}

impl Overrides {
    fn apply(self, cfg: &mut RunConfig) {
        apply!(cfg, self: model, k, t, margin, max_iter, master, resolution_mw, tol_exact, oracle_k, grid_cap, seed);
        if let Some(c) = self.case {
            cfg.case = c;
        }
        if self.no_circle {
            cfg.include_circle = false;
        }
        if self.delta.is_some() {
            cfg.delta = self.delta;
        }
        if self.big_m.is_some() {
            cfg.big_m = self.big_m;
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    match &cli.config {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            RunConfig::from_toml(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = load_config(&cli)?;
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    if let Some(n) = cfg.workers {
        if n == 0 {
            return Err(CliError::validation("workers must be positive"));
        }
        // Fails only when a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Region(o) => {
            o.apply(&mut cfg);
            cmd_region(&cfg)
        }
        Command::Compare { common, sweep_k, scale_rx } => {
            common.apply(&mut cfg);
            if sweep_k.is_some() {
                cfg.sweep_k = sweep_k;
            }
            if scale_rx.is_some() {
                cfg.scale_rx = scale_rx;
            }
            cmd_compare(&cfg)
        }
        Command::Validate(o) => {
            o.apply(&mut cfg);
            cmd_validate(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{}", summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(u8::try_from(e.code).unwrap_or(1))
        }
    }
}
