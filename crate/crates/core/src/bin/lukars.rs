use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lukars::pipeline::{cmd_invert, cmd_pushforward, cmd_simulate, cmd_subspace, cmd_synthetic, PipelineConfig};
use lukars::{Error, Result};

#[derive(Parser)]
#[command(name = "lukars", version, about = "LuKARS spring model and active-subspace inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the model for one parameter vector.
    Simulate(Settings),
    /// Gradient sweep, eigendecomposition and global sensitivities.
    Subspace(Settings),
    /// Active-subspace Bayesian inversion.
    Invert(Settings),
    /// Posterior discharge bands from an ensemble.
    Pushforward(Settings),
    /// Generate a synthetic twin dataset.
    Synthetic(Settings),
}

/// Every flag overrides the key of the same name in `--config`.
#[derive(Args, Default)]
struct Settings {
    /// Key-value configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    forcing: Option<String>,
    #[arg(long)]
    effective_input: Option<String>,
    #[arg(long)]
    forcing_config: Option<String>,
    #[arg(long)]
    observations: Option<String>,
    #[arg(long)]
    catchment: Option<String>,
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    params: Option<String>,
    #[arg(long)]
    truth: Option<String>,
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    subspace_dir: Option<String>,
    #[arg(long, short)]
    out_dir: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    n_gradients: Option<String>,
    #[arg(long)]
    fd_step: Option<String>,
    #[arg(long, short)]
    k: Option<String>,
    #[arg(long)]
    degree: Option<String>,
    #[arg(long)]
    bootstrap: Option<String>,
    #[arg(long)]
    surrogate_extra: Option<String>,
    #[arg(long)]
    sensitivity_m: Option<String>,
    #[arg(long)]
    prior_samples: Option<String>,
    #[arg(long)]
    n_steps: Option<String>,
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    proposal_std: Option<String>,
    #[arg(long)]
    tune: Option<String>,
    #[arg(long)]
    ess_target: Option<String>,
    #[arg(long)]
    n_z: Option<String>,
    #[arg(long)]
    inactive_burn_in: Option<String>,
    #[arg(long)]
    inactive_thin: Option<String>,
    #[arg(long)]
    band_lo: Option<String>,
    #[arg(long)]
    band_hi: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, short)]
    workers: Option<String>,
    #[arg(long)]
    years: Option<String>,
    #[arg(long)]
    start_date: Option<String>,
    #[arg(long)]
    truth_spread: Option<String>,
}

impl Settings {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("forcing", &self.forcing),
            ("effective_input", &self.effective_input),
            ("forcing_config", &self.forcing_config),
            ("observations", &self.observations),
            ("catchment", &self.catchment),
            ("prior", &self.prior),
            ("params", &self.params),
            ("truth", &self.truth),
            ("ensemble", &self.ensemble),
            ("subspace_dir", &self.subspace_dir),
            ("out_dir", &self.out_dir),
            ("eta", &self.eta),
            ("n_gradients", &self.n_gradients),
            ("fd_step", &self.fd_step),
            ("k", &self.k),
            ("degree", &self.degree),
            ("bootstrap", &self.bootstrap),
            ("surrogate_extra", &self.surrogate_extra),
            ("sensitivity_m", &self.sensitivity_m),
            ("prior_samples", &self.prior_samples),
            ("n_steps", &self.n_steps),
            ("burn_in", &self.burn_in),
            ("proposal_std", &self.proposal_std),
            ("tune", &self.tune),
            ("ess_target", &self.ess_target),
            ("n_z", &self.n_z),
            ("inactive_burn_in", &self.inactive_burn_in),
            ("inactive_thin", &self.inactive_thin),
            ("band_lo", &self.band_lo),
            ("band_hi", &self.band_hi),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("years", &self.years),
            ("start_date", &self.start_date),
            ("truth_spread", &self.truth_spread),
        ]
    }

    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::read(p)?,
            None => PipelineConfig::default(),
        };
        for (key, value) in self.pairs() {
            if let Some(v) = value {
                cfg.set(key, v, Path::new(""))?;
            }
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 2,
        "input" => 3,
        "parameter" => 4,
        "numerical" => 5,
        _ => 6,
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = match &cli.command {
        Command::Simulate(s)
        | Command::Subspace(s)
        | Command::Invert(s)
        | Command::Pushforward(s)
        | Command::Synthetic(s) => s,
    };
    let cfg = settings.resolve()?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io {
        path: cfg.out_dir.clone(),
        source: e,
    })?;
    let out = cfg.out_dir.display();
    match cli.command {
        Command::Simulate(_) => {
            let r = cmd_simulate(&cfg)?;
            println!("wrote {}", r.path.display());
            if let Some(e) = r.nse {
                println!("nse {e:.4}");
            }
        }
        Command::Subspace(_) => {
            let (a, _) = cmd_subspace(&cfg)?;
            let l = &a.decomposition.eigenvalues;
            println!(
                "{} gradient samples ({} failed), {} evaluations",
                a.samples.len(),
                a.failed,
                a.evaluations
            );
            let shown: Vec<String> = l.iter().take(cfg.k + 1).map(|v| format!("{v:.4e}")).collect();
            println!("leading eigenvalues {}", shown.join(" "));
            println!("artifacts in {out}");
        }
        Command::Invert(_) => {
            let (r, _) = cmd_invert(&cfg)?;
            println!(
                "acceptance {:.3}, ess {:.1}, stride {}, ensemble {} ({} infeasible), holdout r2 {:.4}",
                r.acceptance_rate,
                r.ensemble.ess,
                r.ensemble.stride,
                r.ensemble.len(),
                r.infeasible,
                r.surrogate.r2_holdout
            );
            println!("artifacts in {out}");
        }
        Command::Pushforward(_) => {
            let b = cmd_pushforward(&cfg)?;
            println!("{} days, {} members ({} failed), bands in {out}", b.dates.len(), b.used, b.skipped);
        }
        Command::Synthetic(_) => {
            let t = cmd_synthetic(&cfg)?;
            println!("{} days of synthetic data in {out}", t.clean.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
