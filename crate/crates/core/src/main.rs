use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fwiprox::experiment::{
    gradient_check_suite, run_experiment, synth_data, synth_model, ExperimentConfig, RunOptions,
};
use fwiprox::helmholtz::io::{read_model, write_data, write_model};

#[derive(Parser)]
#[command(name = "fwiprox", version, about = "Frequency-domain waveform inversion with proximal quasi-Newton")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> fwiprox::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured true model.
    SynthModel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "model.bin")]
        out: PathBuf,
    },
    /// Predict data for a model, with the configured noise.
    SynthData {
        #[command(flatten)]
        common: Common,
        /// Model file; the configured model is used when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "data.bin")]
        out: PathBuf,
    },
    /// Run an inversion and write its artifacts.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 1 gives bitwise-reproducible output.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare adjoint gradients with central differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        coords: usize,
        /// Fail when any relative error exceeds this.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
}

fn run(cli: Cli) -> fwiprox::Result<u8> {
    match cli.command {
        Command::SynthModel { common, out } => {
            let cfg = common.load()?;
            let m = synth_model(&cfg.model, cfg.seed)?;
            write_model(&out, &m)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::SynthData { common, model, out } => {
            let cfg = common.load()?;
            let m = match model {
                Some(p) => read_model(&p)?,
                None => synth_model(&cfg.model, cfg.seed)?,
            };
            let geom = cfg.geometry.build(m.nz(), m.nx(), &cfg.frequencies_hz)?;
            geom.check_sampling(&m);
            let d = synth_data(&m, &geom, &cfg.noise, cfg.seed)?;
            write_data(&out, &d)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Invert { common, out, threads } => {
            let mut cfg = common.load()?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let art = run_experiment(&cfg, RunOptions { threads })?;
            let s = &art.summary;
            println!(
                "{:?}: {} iterations, phi {:e} -> {:e}, model rmse {:e}, {} solves",
                s.stop_reason, s.outer_iterations, s.initial_phi, s.final_phi, s.model_rmse, s.pde_solves
            );
            println!("artifacts in {}", art.dir.display());
            Ok(s.exit_code() as u8)
        }
        Command::Gradcheck { seed, coords, tol } => {
            let cases = gradient_check_suite(seed, coords)?;
            let mut worst: f64 = 0.0;
            for c in &cases {
                println!("{:<14} {:<9} max rel err {:.3e}", c.penalty, c.transform, c.max_rel_err);
                worst = worst.max(c.max_rel_err);
            }
            println!("max relative error {worst:.3e}");
            Ok(if worst < tol { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
