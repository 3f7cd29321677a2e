//! Monte Carlo driver: independent paths with split seeds, deterministic
//! aggregation, and the statistical supermartingale test.

use rayon::prelude::*;

use crate::diagnostics::{
    moment_estimates, EnergyReport, MomentTable, PathDiagnostics, PathRecorder, QPairing,
};
use crate::dynamics::{NoiseSource, RngSource, State, Stepper};
use crate::error::{Result, SchnsError};
use crate::init::InitialCondition;
use crate::noise::path_rng;

/// Ensemble controls. The physics lives in the stepper; this only says how
/// many paths, how they are seeded, and how often to record.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub base_seed: u64,
    pub record_every: usize,
    pub steps: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(SchnsError::Parameter("n_paths must be >= 1".into()));
        }
        if self.record_every < 1 {
            return Err(SchnsError::Parameter("record_every must be >= 1".into()));
        }
        if self.steps < 1 {
            return Err(SchnsError::Parameter("steps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathStatus {
    Completed,
    Failed { step: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub index: usize,
    pub diag: PathDiagnostics,
    pub status: PathStatus,
    pub final_state: State,
}

/// Per-time aggregates over the completed paths, in fixed path order.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub energy_mean: Vec<f64>,
    pub energy_stderr: Vec<f64>,
    pub mass_mean: Vec<f64>,
    pub mass_stderr: Vec<f64>,
    pub g_mean: Vec<f64>,
    pub g_stderr: Vec<f64>,
    pub n_paths: usize,
    pub n_completed: usize,
    pub n_failed: usize,
    /// completed paths whose norms crossed twice the cut-off radius
    pub n_stopped: usize,
}

/// Run one path from the given state, recording diagnostics every
/// `record_every` steps (sample 0 is the initial state). Failures are
/// captured in the record, not propagated.
pub fn run_path(
    stepper: &Stepper,
    mut state: State,
    steps: usize,
    record_every: usize,
    source: &mut dyn NoiseSource,
) -> (PathDiagnostics, PathStatus, State) {
    let g = &stepper.grid;
    let mut rec = PathRecorder::new(g, stepper.params.dt);
    rec.record(g, &state, &stepper.potentials, stepper.params.epsilon);

    let mut status = PathStatus::Completed;
    for step in 1..=steps {
        match stepper.full_step(&mut state, source) {
            Ok(r) => {
                rec.on_step(&r);
                if step % record_every == 0 {
                    rec.record(g, &state, &stepper.potentials, stepper.params.epsilon);
                }
            }
            Err(err) => {
                rec.mark_failed(step, err.to_string());
                status = PathStatus::Failed {
                    step,
                    reason: err.to_string(),
                };
                break;
            }
        }
    }
    let diag = rec.finish(g, &state, stepper.params.cutoff);
    (diag, status, state)
}

/// Run `config.n_paths` independent paths from the same initial condition.
/// Path i uses RNG stream i of the base seed; aggregation is in path order
/// regardless of scheduling, so results are bit-reproducible.
pub fn run_ensemble(
    stepper: &Stepper,
    ic: &InitialCondition,
    config: &EnsembleConfig,
) -> Result<Vec<PathOutcome>> {
    config.validate()?;
    let (u0, phi0) = crate::init::build(&stepper.grid, ic);
    let initial = stepper.initial_state(&u0, &phi0)?;
    let outcomes: Vec<PathOutcome> = (0..config.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.base_seed, i as u64);
            let mut source = RngSource { rng: &mut rng };
            let (diag, status, final_state) = run_path(
                stepper,
                initial.clone(),
                config.steps,
                config.record_every,
                &mut source,
            );
            PathOutcome {
                index: i,
                diag,
                status,
                final_state,
            }
        })
        .collect();
    Ok(outcomes)
}

/// Deterministic order-independent aggregation over the completed paths.
pub fn aggregate(outcomes: &[PathOutcome], pairing: QPairing) -> Result<EnsembleStats> {
    let completed: Vec<&PathOutcome> = outcomes
        .iter()
        .filter(|o| o.status == PathStatus::Completed)
        .collect();
    let n_failed = outcomes.len() - completed.len();
    let first = completed
        .first()
        .ok_or_else(|| SchnsError::Data("no completed paths".into()))?;
    let times = first.diag.times.clone();
    let n_rec = times.len();

    let mut series: Vec<Vec<f64>> = Vec::with_capacity(completed.len());
    let mut masses: Vec<Vec<f64>> = Vec::with_capacity(completed.len());
    let mut gs: Vec<Vec<f64>> = Vec::with_capacity(completed.len());
    for o in &completed {
        if o.diag.times.len() != n_rec {
            return Err(SchnsError::Data(
                "completed paths recorded different sample counts".into(),
            ));
        }
        series.push(o.diag.energy_series());
        masses.push(o.diag.mass_series());
        gs.push(o.diag.g_series(pairing)?);
    }

    let mean_stderr = |cols: &[Vec<f64>], k: usize| -> (f64, f64) {
        let n = cols.len() as f64;
        let mean = cols.iter().map(|c| c[k]).sum::<f64>() / n;
        let stderr = if cols.len() > 1 {
            let var = cols.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        (mean, stderr)
    };

    let n_stopped = completed
        .iter()
        .filter(|o| o.diag.stopped_at.is_some())
        .count();
    let mut stats = EnsembleStats {
        times,
        energy_mean: Vec::with_capacity(n_rec),
        energy_stderr: Vec::with_capacity(n_rec),
        mass_mean: Vec::with_capacity(n_rec),
        mass_stderr: Vec::with_capacity(n_rec),
        g_mean: Vec::with_capacity(n_rec),
        g_stderr: Vec::with_capacity(n_rec),
        n_paths: outcomes.len(),
        n_completed: completed.len(),
        n_failed,
        n_stopped,
    };
    for k in 0..n_rec {
        let (m, s) = mean_stderr(&series, k);
        stats.energy_mean.push(m);
        stats.energy_stderr.push(s);
        let (m, s) = mean_stderr(&masses, k);
        stats.mass_mean.push(m);
        stats.mass_stderr.push(s);
        let (m, s) = mean_stderr(&gs, k);
        stats.g_mean.push(m);
        stats.g_stderr.push(s);
    }
    Ok(stats)
}

/// Moment table across the completed paths.
pub fn ensemble_moments(outcomes: &[PathOutcome], p: f64) -> Result<MomentTable> {
    let moments: Vec<_> = outcomes
        .iter()
        .filter(|o| o.status == PathStatus::Completed)
        .map(|o| o.diag.moments)
        .collect();
    moment_estimates(&moments, p)
}

// ---------------------------------------------------------------------------
// supermartingale test
// ---------------------------------------------------------------------------

/// View of one path truncated at the conditioning time: events may only
/// read history up to and including sample `s`.
pub struct TruncatedPath<'a> {
    pub times: &'a [f64],
    pub energy: &'a [EnergyReport],
}

/// Events measurable at the conditioning time.
pub enum EventFilter {
    /// full sample space
    Full,
    /// paths whose energy at s lies at or below the ensemble median at s
    LowEnergyHalf,
    /// custom predicate on the truncated record
    Custom(Box<dyn Fn(&TruncatedPath) -> bool + Sync>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestVerdict {
    Pass,
    Fail,
    Inconclusive(String),
}

#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub verdict: TestVerdict,
    /// empirical E[1_A G(t)] - E[1_A G(s)]
    pub statistic: f64,
    pub stderr: f64,
    pub n_selected: usize,
    pub n_used: usize,
}

/// Empirical supermartingale inequality between recorded samples s < t:
/// passes when the statistic does not exceed twice its standard error.
/// Paths that failed are excluded; more than 5 percent exclusions make the
/// test inconclusive.
pub fn supermartingale_test(
    outcomes: &[PathOutcome],
    s_index: usize,
    t_index: usize,
    event: &EventFilter,
    pairing: QPairing,
) -> Result<TestOutcome> {
    if s_index >= t_index {
        return Err(SchnsError::Parameter(format!(
            "need s < t, got {s_index} >= {t_index}"
        )));
    }
    let completed: Vec<&PathOutcome> = outcomes
        .iter()
        .filter(|o| o.status == PathStatus::Completed)
        .collect();
    if completed.is_empty() {
        return Ok(TestOutcome {
            verdict: TestVerdict::Inconclusive("no completed paths".into()),
            statistic: f64::NAN,
            stderr: f64::NAN,
            n_selected: 0,
            n_used: 0,
        });
    }
    let excluded = outcomes.len() - completed.len();
    if (excluded as f64) > 0.05 * outcomes.len() as f64 {
        return Ok(TestOutcome {
            verdict: TestVerdict::Inconclusive(format!(
                "{excluded} of {} paths excluded (> 5 percent)",
                outcomes.len()
            )),
            statistic: f64::NAN,
            stderr: f64::NAN,
            n_selected: 0,
            n_used: completed.len(),
        });
    }
    for o in &completed {
        if t_index >= o.diag.times.len() {
            return Err(SchnsError::Parameter(format!(
                "t index {t_index} out of range ({} samples)",
                o.diag.times.len()
            )));
        }
    }

    // event selection from the truncated records only
    let selected: Vec<bool> = match event {
        EventFilter::Full => vec![true; completed.len()],
        EventFilter::LowEnergyHalf => {
            let energies: Vec<f64> = completed
                .iter()
                .map(|o| o.diag.energy[s_index].total)
                .collect();
            let mut sorted = energies.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = sorted[(sorted.len() - 1) / 2];
            energies.iter().map(|e| *e <= median).collect()
        }
        EventFilter::Custom(f) => completed
            .iter()
            .map(|o| {
                let view = TruncatedPath {
                    times: &o.diag.times[..=s_index],
                    energy: &o.diag.energy[..=s_index],
                };
                f(&view)
            })
            .collect(),
    };
    let n_selected = selected.iter().filter(|s| **s).count();
    if n_selected == 0 {
        return Ok(TestOutcome {
            verdict: TestVerdict::Inconclusive("empty event".into()),
            statistic: f64::NAN,
            stderr: f64::NAN,
            n_selected: 0,
            n_used: completed.len(),
        });
    }

    // statistic: mean over all completed paths of 1_A (G(t) - G(s))
    let n = completed.len() as f64;
    let mut values = Vec::with_capacity(completed.len());
    for (o, sel) in completed.iter().zip(&selected) {
        let series = o.diag.g_series(pairing)?;
        let v = if *sel {
            series[t_index] - series[s_index]
        } else {
            0.0
        };
        values.push(v);
    }
    let mean = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let guard = 1e-9 * (1.0 + mean.abs());
    let verdict = if mean <= 2.0 * stderr + guard {
        TestVerdict::Pass
    } else {
        TestVerdict::Fail
    };
    Ok(TestOutcome {
        verdict,
        statistic: mean,
        stderr,
        n_selected,
        n_used: completed.len(),
    })
}
