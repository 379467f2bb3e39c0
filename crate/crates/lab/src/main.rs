use std::path::PathBuf;
use std::process::ExitCode;

use carlab::commands::{self, Subcommand};
use carlab::config::parse_config;
use carlab::LabError;
use clap::{Parser, Subcommand as ClapSub};

#[derive(Parser, Debug)]
#[command(name = "carlab", version, about = "Carleman estimate and inverse source laboratory")]
struct Cli {
    /// TOML experiment file. Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parent directory for run folders.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. 0 lets rayon decide.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Print the work plan and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(ClapSub, Debug)]
enum Cmd {
    /// Solve the forward problem and write Cauchy data.
    Forward,
    /// Sweep the weighted estimate over (s, gamma, sample).
    Carleman,
    /// Refinement study of the pointwise identity.
    Identities,
    /// Stability envelope over the admissible family.
    Stability,
    /// Reconstruct a source from lateral data.
    Invert {
        /// cauchy_data.csv from a forward run. Synthetic data otherwise.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        harmonics: Option<usize>,
        #[arg(long)]
        splines: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Run every value of run.lambda_grid.
        #[arg(long)]
        sweep: bool,
    },
    /// Run the verification suite.
    Check {
        #[arg(long)]
        full: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: Cli) -> Result<bool, LabError> {
    let vars: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with("CARLAB_")).collect();
    let mut cfg = parse_config(cli.config.as_deref(), vars)?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.run.out = o;
    }
    let sub = match cli.cmd {
        Cmd::Forward => Subcommand::Forward,
        Cmd::Carleman => Subcommand::Carleman,
        Cmd::Identities => Subcommand::Identities,
        Cmd::Stability => Subcommand::Stability,
        Cmd::Invert { data, harmonics, splines, lambda, noise, max_iter, sweep } => {
            cfg.run.harmonics = harmonics.unwrap_or(cfg.run.harmonics);
            cfg.run.splines = splines.unwrap_or(cfg.run.splines);
            cfg.run.lambda = lambda.unwrap_or(cfg.run.lambda);
            cfg.run.noise = noise.unwrap_or(cfg.run.noise);
            cfg.run.max_iter = max_iter.unwrap_or(cfg.run.max_iter);
            Subcommand::Invert { data, sweep }
        }
        Cmd::Check { full } => Subcommand::Check { full },
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| LabError::Usage(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let summary = pool.install(|| commands::run(&sub, &cfg, threads, cli.dry_run))?;
    match &summary.dir {
        None => summary.plan.iter().for_each(|l| println!("{l}")),
        Some(d) => println!("{}", d.display()),
    }
    Ok(summary.ok)
}
