mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{Candidate, Command, GammaSpec, ModelName, RunConfig};
use dualpde::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Dual variational solver, consistency and Dafermos harnesses, Burgers substitute.
#[derive(Parser)]
#[command(name = "dualpde", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the discrete saddle problem and report the duality gap.
    Solve(Common),
    /// Build the optimal dual pair of a strong solution and verify it.
    Consistency(Common),
    /// Shock-free substitute of Burgers data and its residual identities.
    BurgersSubstitute {
        #[command(flatten)]
        common: Common,
        /// Envelope samples per period.
        #[arg(long)]
        samples: Option<usize>,
        /// Number of time snapshots in the CSV.
        #[arg(long)]
        snapshots: Option<usize>,
    },
    /// Compare a subsolution's entropy timeline against the strong solution.
    Dafermos {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long, value_enum)]
        candidate: Option<Candidate>,
        /// Multiple of the identity added to M for the inflated candidate.
        #[arg(long)]
        inflate: Option<f64>,
        #[arg(long)]
        residual_tol: Option<f64>,
        #[arg(long)]
        delta_rel: Option<f64>,
        #[arg(long)]
        gamma_cap: Option<f64>,
    },
    /// Conservativity, convexity and operator identities of a model.
    VerifyModel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Duality gap across grid sizes.
    GapStudy {
        #[command(flatten)]
        common: Common,
        /// Comma-separated Nx values (Nt = Nx).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Run the command named in a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct Common {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $DUALPDE_OUT/<command> or dualpde-out/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Single-threaded reductions for byte-identical reports.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum)]
    model: Option<ModelName>,
    /// log, gamma:<g> or power:<coef>:<exp>.
    #[arg(long)]
    pressure: Option<String>,
    /// Korteweg capillarity exponent.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<f64>,
    #[arg(long)]
    rho_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<f64>,
    /// Burgers datum, e.g. "sin:1".
    #[arg(long)]
    v0: Option<String>,
    /// Fluid data, e.g. "q=sin:1:0.1;rho=const:1+cos:1:0.1".
    #[arg(long)]
    data: Option<String>,
    #[arg(long = "Nx", alias = "nx")]
    nx: Option<usize>,
    #[arg(long = "Nt", alias = "nt")]
    nt: Option<usize>,
    #[arg(long = "T", alias = "t-final")]
    t: Option<f64>,
    /// "adapt" or a decay rate gamma.
    #[arg(long)]
    weight: Option<GammaSpec>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    gap_rel: Option<f64>,
    #[arg(long)]
    feas_abs: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    /// Spatial stencil order (2 or 4).
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    restarts: Option<bool>,
    #[arg(long)]
    primal_weight: Option<f64>,
}

impl Common {
    fn to_config(&self, command: Command) -> RunConfig {
        let mut c = RunConfig { command: Some(command), ..Default::default() };
        c.run.out = self.out.clone();
        c.run.seed = self.seed;
        c.run.threads = self.threads;
        c.run.deterministic = self.deterministic.then_some(true);
        c.model.name = self.model;
        c.model.pressure = self.pressure.clone();
        c.model.s = self.s;
        c.model.rho_min = self.rho_min;
        c.model.offset = self.offset;
        c.data.v0 = self.v0.clone();
        c.data.components = self.data.clone();
        c.grid.nx = self.nx;
        c.grid.nt = self.nt;
        c.grid.t = self.t;
        c.weight.gamma = self.weight.clone();
        c.solver.max_iterations = self.max_iterations;
        c.solver.gap_rel = self.gap_rel;
        c.solver.feas_abs = self.feas_abs;
        c.solver.record_every = self.record_every;
        c.solver.order = self.order;
        c.solver.restarts = self.restarts;
        c.solver.primal_weight = self.primal_weight;
        c
    }
}

fn resolve(cli: Cli) -> dualpde::Result<RunConfig> {
    let (file, flags) = match cli.cmd {
        Cmd::Run { config, out } => {
            let mut flags = RunConfig::default();
            flags.run.out = out;
            (Some(config), flags)
        }
        Cmd::Solve(c) => (c.config.clone(), c.to_config(Command::Solve)),
        Cmd::Consistency(c) => (c.config.clone(), c.to_config(Command::Consistency)),
        Cmd::BurgersSubstitute { common, samples, snapshots } => {
            let mut f = common.to_config(Command::BurgersSubstitute);
            f.substitute.samples = samples;
            f.substitute.snapshots = snapshots;
            (common.config.clone(), f)
        }
        Cmd::Dafermos { common, t0, t1, candidate, inflate, residual_tol, delta_rel, gamma_cap } => {
            let mut f = common.to_config(Command::Dafermos);
            let d = &mut f.dafermos;
            (d.t0, d.t1, d.candidate, d.inflate) = (t0, t1, candidate, inflate);
            (d.residual_tol, d.delta_rel, d.gamma_cap) = (residual_tol, delta_rel, gamma_cap);
            (common.config.clone(), f)
        }
        Cmd::VerifyModel { common, trials } => {
            let mut f = common.to_config(Command::VerifyModel);
            f.verify.trials = trials;
            (common.config.clone(), f)
        }
        Cmd::GapStudy { common, sizes } => {
            let mut f = common.to_config(Command::GapStudy);
            f.study.sizes = sizes;
            (common.config.clone(), f)
        }
    };
    let base = match file {
        Some(p) => config::load(&p)?,
        None => RunConfig::default(),
    };
    let cfg = base.overlay(&flags).with_defaults();
    cfg.command()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    if let Some(p) = &cfg.run.out {
        return p.clone();
    }
    let name = serde_json::to_value(cfg.command).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_else(|| "run".into());
    let root = std::env::var_os("DUALPDE_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("dualpde-out"));
    root.join(name)
}

fn execute(cli: Cli) -> dualpde::Result<PathBuf> {
    let cfg = resolve(cli)?;
    let threads = if cfg.run.deterministic == Some(true) { 1 } else { cfg.run.threads.unwrap_or(0) };
    // a second initialisation in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let dir = out_dir(&cfg);
    let mut out = output::OutDir::create(&dir)?;
    commands::run(&cfg, &mut out)?;
    Ok(dir)
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Shape(_) => "shape",
        Error::Config(_) => "config",
        Error::Domain { .. } => "domain",
        Error::Precondition(_) => "precondition",
        Error::Horizon { .. } => "horizon",
        Error::Weight { .. } => "weight",
        Error::NonConvergence(_) => "non-convergence",
        Error::Internal(_) => "internal",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            let payload = serde_json::json!({ "error": { "kind": error_kind(&e), "message": e.to_string(), "exit_code": code } });
            eprintln!("error: {e}");
            eprintln!("{payload}");
            ExitCode::from(code as u8)
        }
    }
}
