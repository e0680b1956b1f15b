use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gkdv_lab::diagnostics::KVariant;
use gkdv_lab::runner::{self, Experiment, RunConfig};
use gkdv_lab::Error;

#[derive(Parser)]
#[command(
    name = "gkdv-lab",
    version,
    about = "Spectral experiments for gKdV and quintic NLS"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve the configured datum and write the trajectory and diagnostics.
    Simulate(RunArgs),
    /// Evolve and write diagnostics, gap, Gram and dispersion series.
    Diagnose(RunArgs),
    /// Compare gKdV evolutions of the modulated-carrier ansatz against the NLS envelope.
    Embed(RunArgs),
    /// Brute-force scan of the algebraic Gram inequality.
    GramScan(RunArgs),
    /// Mixed space-time norms over a seeded Gaussian ensemble.
    Norms(RunArgs),
    /// Emit whitespace-separated columns for one series of a finished run.
    Plot {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        series: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// corrected | paper-literal
    #[arg(long)]
    k_variant: Option<KVariant>,
    #[arg(long)]
    seed: Option<u64>,
}

fn resolve(exp: Experiment, a: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &a.config {
        Some(p) => {
            let cfg = runner::load_config(p)?;
            if cfg.experiment != exp {
                return Err(Error::Config(format!(
                    "experiment: {} asks for {:?} but the subcommand is {:?}",
                    p.display(),
                    cfg.experiment,
                    exp
                )));
            }
            cfg
        }
        None => {
            let name = serde_json::to_value(exp).expect("enum serialises");
            runner::parse_config(&format!("experiment = {name}\n"))?
        }
    };
    if let Some(k) = a.k_variant {
        cfg.k_variant = k;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.out_dir = Some(o.clone());
    }
    Ok(cfg)
}

fn run(exp: Experiment, a: &RunArgs) -> i32 {
    match resolve(exp, a) {
        Ok(cfg) => {
            let out = runner::default_out_dir(&cfg);
            let code = runner::execute(&cfg, &out);
            if code == 0 {
                println!("{}", out.display());
            } else {
                eprintln!("gkdv-lab: failed, see {}", out.join("error.json").display());
            }
            code
        }
        Err(e) => {
            eprintln!("gkdv-lab: {e}");
            if let Some(o) = &a.out {
                let _ = runner::write_error_record(o, &e);
            }
            runner::exit_code(&e)
        }
    }
}

fn plot(dir: &Path, series: &str) -> i32 {
    match runner::emit_plot_data(dir, series) {
        Ok(p) => {
            println!("{}", p.display());
            0
        }
        Err(e) => {
            eprintln!("gkdv-lab: {e}");
            runner::exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors are validation failures; 2 is reserved for blow-up.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match &cli.cmd {
        Cmd::Simulate(a) => run(Experiment::Simulate, a),
        Cmd::Diagnose(a) => run(Experiment::Diagnose, a),
        Cmd::Embed(a) => run(Experiment::Embed, a),
        Cmd::GramScan(a) => run(Experiment::GramScan, a),
        Cmd::Norms(a) => run(Experiment::Norms, a),
        Cmd::Plot { run, series } => plot(run, series),
    };
    ExitCode::from(code as u8)
}
