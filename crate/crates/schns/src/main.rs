//! Command-line driver: single runs, Monte Carlo ensembles, invariant
//! verification, and checkpoint resume.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use schns::config::{parse_config, RunConfig};
use schns::diagnostics::QPairing;
use schns::dynamics::{RngSource, State, Stepper};
use schns::ensemble::{
    aggregate, ensemble_moments, run_ensemble, supermartingale_test, EventFilter, PathStatus,
    TestVerdict,
};
use schns::error::{Result, SchnsError};
use schns::noise::{path_rng, NoiseModel};
use schns::{checkpoint, output, verify};

#[derive(Parser)]
#[command(name = "schns", about = "stochastic Cahn-Hilliard-Navier-Stokes channel solver")]
struct Cli {
    /// configuration file (line-oriented key = value with [sections])
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// override the base seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// output directory (overrides run.out_dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// override the number of steps
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// suppress progress output
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// simulate a single path and write its time series
    Run,
    /// simulate an ensemble of paths and aggregate statistics
    Ensemble,
    /// run the deterministic invariant suites
    Verify,
    /// resume a single path from a checkpoint file
    Resume {
        /// checkpoint written by a previous run
        checkpoint: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.run.out_dir = out.display().to_string();
    }
    if let Some(steps) = cli.steps {
        cfg.run.steps = steps;
    }
    Ok(cfg)
}

fn build_stepper(cfg: &RunConfig) -> Result<Stepper> {
    let grid = cfg.build_grid()?;
    let potentials = cfg.build_potentials()?;
    let noise = if cfg.noise.enabled {
        Some(NoiseModel::build(&grid, &cfg.noise.params)?)
    } else {
        None
    };
    Stepper::new(grid, cfg.scheme.clone(), potentials, noise)
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.run.out_dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Ensemble => cmd_ensemble(cli),
        Command::Verify => cmd_verify(cli),
        Command::Resume { checkpoint } => cmd_resume(cli, checkpoint),
    }
}

fn cmd_run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let dir = ensure_out_dir(&cfg)?;
    let stepper = build_stepper(&cfg)?;
    let (u0, phi0) = schns::init::build(&stepper.grid, &cfg.init);
    let state = stepper.initial_state(&u0, &phi0)?;
    let mut rng = path_rng(cfg.base_seed, 0);
    run_single(&cfg, &stepper, state, &mut rng, 0, &dir, cli.quiet)
}

fn run_single(
    cfg: &RunConfig,
    stepper: &Stepper,
    mut state: State,
    rng: &mut rand_chacha::ChaCha12Rng,
    start_step: u64,
    dir: &Path,
    quiet: bool,
) -> Result<()> {
    let g = &stepper.grid;
    let mut recorder = schns::diagnostics::PathRecorder::new(g, stepper.params.dt);
    recorder.record(g, &state, &stepper.potentials, stepper.params.epsilon);

    let total = cfg.run.steps as u64;
    for step in (start_step + 1)..=(start_step + total) {
        let rec = {
            let mut source = RngSource { rng };
            stepper.full_step(&mut state, &mut source)?
        };
        recorder.on_step(&rec);
        if step % cfg.run.record_every as u64 == 0 {
            recorder.record(g, &state, &stepper.potentials, stepper.params.epsilon);
        }
        if cfg.run.checkpoint_every > 0 && step % cfg.run.checkpoint_every as u64 == 0 {
            let path = dir.join(format!("checkpoint_{step:08}.bin"));
            checkpoint::write_file(&path, &state, rng, step, cfg)?;
        }
        if !quiet && step % 1000 == 0 {
            eprintln!("step {step}/{} t = {:.6}", start_step + total, state.t);
        }
    }
    let final_ckpt = dir.join("checkpoint_final.bin");
    checkpoint::write_file(&final_ckpt, &state, rng, start_step + total, cfg)?;
    let diag = recorder.finish(g, &state, stepper.params.cutoff);
    let csv = dir.join("run.csv");
    output::write_path_csv(&csv, &diag, QPairing::Velocity)?;
    if !quiet {
        eprintln!("wrote {} and {}", csv.display(), final_ckpt.display());
    }
    Ok(())
}

fn cmd_ensemble(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let dir = ensure_out_dir(&cfg)?;
    let stepper = build_stepper(&cfg)?;
    let outcomes = run_ensemble(&stepper, &cfg.init, &cfg.ensemble_config())?;
    for o in &outcomes {
        if let PathStatus::Failed { step, reason } = &o.status {
            eprintln!("path {} failed at step {step}: {reason}", o.index);
            continue;
        }
        let path = dir.join(format!("path_{:03}.csv", o.index));
        output::write_path_csv(&path, &o.diag, QPairing::Velocity)?;
    }
    let stats = aggregate(&outcomes, QPairing::Velocity)?;
    std::fs::write(dir.join("ensemble_stats.csv"), output::stats_csv(&stats))?;

    let moments = ensemble_moments(&outcomes, 1.0)?;
    let mut report = String::new();
    report.push_str(&format!(
        "paths: {} completed, {} failed\n",
        stats.n_completed, stats.n_failed
    ));
    report.push_str(&format!("moment table (p = {}):\n", moments.p));
    for row in &moments.rows {
        report.push_str(&format!(
            "  {:<28} mean {:>14.6e}  stderr {:>12.4e}\n",
            row.name, row.mean, row.stderr
        ));
    }
    // supermartingale summary between the quarter and three-quarter samples
    let n_rec = stats.times.len();
    if n_rec >= 4 {
        let s_idx = n_rec / 4;
        let t_idx = 3 * n_rec / 4;
        for (name, ev) in [
            ("full", EventFilter::Full),
            ("low-energy-half", EventFilter::LowEnergyHalf),
        ] {
            let t = supermartingale_test(&outcomes, s_idx, t_idx, &ev, QPairing::Velocity)?;
            report.push_str(&format!(
                "supermartingale [{name}] s={:.4} t={:.4}: {:?} (stat {:.4e}, stderr {:.4e}, {} paths)\n",
                stats.times[s_idx],
                stats.times[t_idx],
                t.verdict,
                t.statistic,
                t.stderr,
                t.n_used
            ));
            if matches!(t.verdict, TestVerdict::Fail) {
                return Err(SchnsError::Data(format!(
                    "supermartingale test failed for event {name}"
                )));
            }
        }
    }
    std::fs::write(dir.join("ensemble_report.txt"), &report)?;
    if !cli.quiet {
        print!("{report}");
    }
    Ok(())
}

fn cmd_verify(cli: &Cli) -> Result<()> {
    let failures = verify::run_all(cli.quiet);
    if failures == 0 {
        if !cli.quiet {
            println!("all suites ok");
        }
        Ok(())
    } else {
        Err(SchnsError::Data(format!(
            "{failures} verification suite(s) failed"
        )))
    }
}

fn cmd_resume(cli: &Cli, ckpt: &Path) -> Result<()> {
    let cfg = load_config(cli)?;
    let dir = ensure_out_dir(&cfg)?;
    let stepper = build_stepper(&cfg)?;
    let (state, mut rng, step) = checkpoint::read_file(ckpt, &cfg)?;
    if !cli.quiet {
        eprintln!("resuming from step {step}, t = {:.6}", state.t);
    }
    run_single(&cfg, &stepper, state, &mut rng, step, &dir, cli.quiet)
}
