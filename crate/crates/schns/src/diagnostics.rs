//! Energy, dissipation, mass, the compensated squared-energy process used
//! for the supermartingale test, and path-regularity diagnostics.

use crate::dynamics::{viscous_dissipation, State};
use crate::error::{Result, SchnsError};
use crate::grid::{
    grad_form_sq, h1_seminorm_sq_boundary, h1_seminorm_sq_neumann, mean, norm_sq_boundary,
    norm_sq_vec, Grid, ScalarField,
};
use crate::potentials::Potentials;

/// Energy split into its quadrature components plus the dissipation
/// assembled from the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub total: f64,
    pub kinetic: f64,
    pub gradient_bulk: f64,
    pub boundary_l2: f64,
    pub boundary_grad: f64,
    pub bulk_potential: f64,
    pub boundary_potential: f64,
    /// velocity + chemical-potential + wall dissipation (the delta term is
    /// included only when the caller supplies the realized dphi/dt)
    pub dissipation: f64,
    pub mass: f64,
    pub t: f64,
}

/// Total energy only (skips assembling the dissipation).
pub fn energy_total(g: &Grid, state: &State, potentials: &Potentials, epsilon: f64) -> f64 {
    let (k, gb, bl, bg, bp, bq) = energy_components(g, state, potentials, epsilon);
    k + gb + bl + bg + bp + bq
}

fn energy_components(
    g: &Grid,
    state: &State,
    potentials: &Potentials,
    epsilon: f64,
) -> (f64, f64, f64, f64, f64, f64) {
    let vol = g.cell_volume();
    let kinetic = 0.5 * norm_sq_vec(g, &state.u);
    let gradient_bulk = 0.5 * grad_form_sq(g, &state.phi, &state.psi);
    let boundary_l2 = 0.5 * norm_sq_boundary(g, &state.psi);
    let boundary_grad = 0.5 * h1_seminorm_sq_boundary(g, &state.psi);

    let big_f = |r: f64| -> f64 {
        if epsilon > 0.0 {
            potentials.big_f_eps(r, epsilon).expect("epsilon > 0")
        } else {
            potentials.big_f(r)
        }
    };
    let big_g = |r: f64| -> f64 {
        if epsilon > 0.0 {
            potentials.big_g_eps(r, epsilon).expect("epsilon > 0")
        } else {
            potentials.big_g(r)
        }
    };
    let bulk_potential: f64 = state.phi.data.iter().map(|&r| big_f(r)).sum::<f64>() * vol;
    let boundary_potential: f64 = state
        .psi
        .bottom
        .iter()
        .chain(state.psi.top.iter())
        .map(|&r| big_g(r))
        .sum::<f64>()
        * g.hx;
    (
        kinetic,
        gradient_bulk,
        boundary_l2,
        boundary_grad,
        bulk_potential,
        boundary_potential,
    )
}

/// Evaluate the energy of a state. `epsilon > 0` selects the truncated
/// potentials so the reported energy is the one the stepper dissipates.
/// `dphi_dt` optionally supplies (realized dphi/dt, delta) for the
/// regularization part of the dissipation.
pub fn energy(
    g: &Grid,
    state: &State,
    potentials: &Potentials,
    epsilon: f64,
    dphi_dt: Option<(&ScalarField, f64)>,
) -> EnergyReport {
    let vol = g.cell_volume();
    let (kinetic, gradient_bulk, boundary_l2, boundary_grad, bulk_potential, boundary_potential) =
        energy_components(g, state, potentials, epsilon);

    let mut dissipation = viscous_dissipation(g, &state.u)
        + h1_seminorm_sq_neumann(g, &state.mu)
        + norm_sq_boundary(g, &state.kpsi);
    if let Some((rate, delta)) = dphi_dt {
        let s: f64 = rate.data.iter().map(|r| r * r).sum();
        dissipation += delta * s * vol;
    }

    let total = kinetic
        + gradient_bulk
        + boundary_l2
        + boundary_grad
        + bulk_potential
        + boundary_potential;
    EnergyReport {
        total,
        kinetic,
        gradient_bulk,
        boundary_l2,
        boundary_grad,
        bulk_potential,
        boundary_potential,
        dissipation,
        mass: mean(g, &state.phi),
        t: state.t,
    }
}

// ---------------------------------------------------------------------------
// supermartingale process
// ---------------------------------------------------------------------------

/// Which quadratic-variation pairing enters the compensated process. The
/// velocity pairing matches the energy identity; the gradient pairing is
/// recorded alongside because the two appear interchangeably in the
/// defining displays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QPairing {
    Velocity,
    GradPhi,
}

/// Snapshot of the running sums needed to evaluate the compensated process
/// at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GSample {
    pub t: f64,
    pub energy: f64,
    /// sum of dt * E * D over completed steps
    pub sum_e_d: f64,
    /// sum of dt * E * ||h||_HS^2
    pub sum_e_hs: f64,
    /// sum of dt * (h dW, u) quadratic-variation rate
    pub sum_q_u: f64,
    /// sum of dt * (h dW, grad phi) quadratic-variation rate
    pub sum_q_gphi: f64,
}

/// The compensated squared-energy series:
/// G = E^2/2 - E(0)^2/2 + sum dt E D - sum dt E ||h||^2 - sum dt (h, .)^2.
/// Nonincreasing pathwise (up to time-discretization error) when the noise
/// is off; a supermartingale in expectation with noise on.
pub fn supermartingale_process(samples: &[GSample], pairing: QPairing) -> Result<Vec<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| SchnsError::Data("no recorded samples".into()))?;
    let e0_sq = first.energy * first.energy;
    Ok(samples
        .iter()
        .map(|s| {
            let q = match pairing {
                QPairing::Velocity => s.sum_q_u,
                QPairing::GradPhi => s.sum_q_gphi,
            };
            0.5 * s.energy * s.energy - 0.5 * e0_sq + s.sum_e_d - s.sum_e_hs - q
        })
        .collect())
}

// ---------------------------------------------------------------------------
// path-regularity seminorm
// ---------------------------------------------------------------------------

/// Discrete Holder seminorm of a sampled path of dual-norm proxy values:
/// max over sample pairs of max-abs component difference over |t-s|^beta.
pub fn holder_seminorm(samples: &[(f64, Vec<f64>)], beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(SchnsError::Parameter(format!(
            "beta must lie in (0, 1/2), got {beta}"
        )));
    }
    if samples.len() < 2 {
        return Err(SchnsError::Data("need at least two samples".into()));
    }
    let mut worst = 0.0_f64;
    for a in 0..samples.len() {
        for b in a + 1..samples.len() {
            let (ta, va) = &samples[a];
            let (tb, vb) = &samples[b];
            let dt = (tb - ta).abs();
            if dt == 0.0 {
                continue;
            }
            let diff = va
                .iter()
                .zip(vb.iter())
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            worst = worst.max(diff / dt.powf(beta));
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// per-path summary and ensemble moments
// ---------------------------------------------------------------------------

/// Pathwise functionals mirroring the uniform a priori bounds: running
/// suprema of the state norms and time integrals of the dissipation pieces.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PathMoments {
    pub sup_u_sq: f64,
    pub sup_v1_sq: f64,
    pub int_visc: f64,
    pub int_grad_mu: f64,
    pub int_k: f64,
    pub int_delta_dphi: f64,
}

impl PathMoments {
    pub fn values(&self) -> [(&'static str, f64); 6] {
        [
            ("sup_t ||u||^2", self.sup_u_sq),
            ("int ||grad u||^2 dt", self.int_visc),
            ("sup_t ||(phi,psi)||_V1^2", self.sup_v1_sq),
            ("int ||grad mu||^2 dt", self.int_grad_mu),
            ("int ||K(psi)||^2 dt", self.int_k),
            ("delta int ||dphi/dt||^2 dt", self.int_delta_dphi),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct MomentRow {
    pub name: &'static str,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct MomentTable {
    pub p: f64,
    pub rows: Vec<MomentRow>,
}

/// Sample means (with standard errors) of the p-th powers of the pathwise
/// functionals across an ensemble.
pub fn moment_estimates(paths: &[PathMoments], p: f64) -> Result<MomentTable> {
    if paths.is_empty() {
        return Err(SchnsError::Data("empty ensemble".into()));
    }
    if p < 1.0 {
        return Err(SchnsError::Parameter(format!("need p >= 1, got {p}")));
    }
    let n = paths.len() as f64;
    let names = paths[0].values().map(|(name, _)| name);
    let mut rows = Vec::with_capacity(names.len());
    for (q, name) in names.into_iter().enumerate() {
        let vals: Vec<f64> = paths.iter().map(|m| m.values()[q].1.powf(p)).collect();
        let mean: f64 = vals.iter().sum::<f64>() / n;
        let stderr = if vals.len() > 1 {
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        rows.push(MomentRow { name, mean, stderr });
    }
    Ok(MomentTable { p, rows })
}

// ---------------------------------------------------------------------------
// per-path record
// ---------------------------------------------------------------------------

/// Everything recorded along one simulated path.
#[derive(Debug, Clone, Default)]
pub struct PathDiagnostics {
    /// sampled times (stride `record_every`, sample 0 is the initial state)
    pub times: Vec<f64>,
    pub energy: Vec<EnergyReport>,
    pub g_samples: Vec<GSample>,
    /// dual-norm proxy pairings of u against the fixed test family
    pub proxy: Vec<(f64, Vec<f64>)>,
    /// per-step (||u||, ||(phi,psi)||_V1), step start, plus the final state
    pub norm_trace: Vec<(f64, f64)>,
    pub moments: PathMoments,
    /// first step at which the combined norm reached twice the cut-off
    /// radius (when a finite radius was monitored)
    pub stopped_at: Option<usize>,
    /// step at which the run failed, if it did
    pub failed_at: Option<usize>,
    pub failure: Option<String>,
}

impl PathDiagnostics {
    pub fn g_series(&self, pairing: QPairing) -> Result<Vec<f64>> {
        supermartingale_process(&self.g_samples, pairing)
    }

    pub fn energy_series(&self) -> Vec<f64> {
        self.energy.iter().map(|e| e.total).collect()
    }

    pub fn mass_series(&self) -> Vec<f64> {
        self.energy.iter().map(|e| e.mass).collect()
    }

    pub fn holder(&self, beta: f64) -> Result<f64> {
        holder_seminorm(&self.proxy, beta)
    }
}

/// Incremental builder of a `PathDiagnostics`: folds step records into the
/// running sums and snapshots them at record times.
///
/// The E * D accumulator uses the trapezoid weight (E at step start plus
/// E at step end) / 2, which is the exact discrete chain rule for E^2/2;
/// with it the compensated process is nonincreasing pathwise when the
/// noise is off. The noise compensators keep the left-point (Ito)
/// evaluation.
pub struct PathRecorder {
    proxies: Vec<crate::grid::VectorField>,
    diag: PathDiagnostics,
    sum_e_d: f64,
    sum_e_hs: f64,
    sum_q_u: f64,
    sum_q_gphi: f64,
    /// dissipation of the last step, waiting for the end-of-step energy
    pending: Option<(f64, f64)>, // (e_pre, dissipation)
    dt: f64,
}

impl PathRecorder {
    pub fn new(g: &Grid, dt: f64) -> Self {
        Self {
            proxies: proxy_test_fields(g),
            diag: PathDiagnostics::default(),
            sum_e_d: 0.0,
            sum_e_hs: 0.0,
            sum_q_u: 0.0,
            sum_q_gphi: 0.0,
            pending: None,
            dt,
        }
    }

    fn fold_pending(&mut self, e_now: f64) {
        if let Some((e_pre, d)) = self.pending.take() {
            self.sum_e_d += self.dt * 0.5 * (e_pre + e_now) * d;
        }
    }

    /// Record a sample of the current state (call before the first step and
    /// at every record stride).
    pub fn record(&mut self, g: &Grid, state: &State, potentials: &Potentials, epsilon: f64) {
        let e = energy(g, state, potentials, epsilon, None);
        self.fold_pending(e.total);
        self.diag.times.push(state.t);
        self.diag.g_samples.push(GSample {
            t: state.t,
            energy: e.total,
            sum_e_d: self.sum_e_d,
            sum_e_hs: self.sum_e_hs,
            sum_q_u: self.sum_q_u,
            sum_q_gphi: self.sum_q_gphi,
        });
        let pair: Vec<f64> = self
            .proxies
            .iter()
            .map(|w| crate::grid::inner_vec(g, &state.u, w))
            .collect();
        self.diag.proxy.push((state.t, pair));
        self.diag.energy.push(e);
    }

    /// Fold one completed step into the running sums.
    pub fn on_step(&mut self, rec: &crate::dynamics::StepRecord) {
        self.fold_pending(rec.energy_pre);
        self.pending = Some((rec.energy_pre, rec.dissipation()));
        self.sum_e_hs += self.dt * rec.energy_pre * rec.hs;
        self.sum_q_u += self.dt * rec.q_u;
        self.sum_q_gphi += self.dt * rec.q_gphi;
        self.diag.norm_trace.push((rec.u_norm, rec.v1_norm));
        let m = &mut self.diag.moments;
        m.sup_u_sq = m.sup_u_sq.max(rec.u_norm * rec.u_norm);
        m.sup_v1_sq = m.sup_v1_sq.max(rec.v1_norm * rec.v1_norm);
        m.int_visc += self.dt * rec.d_visc;
        m.int_grad_mu += self.dt * rec.d_grad_mu;
        m.int_k += self.dt * rec.d_k;
        m.int_delta_dphi += self.dt * rec.d_delta_dphi;
    }

    pub fn mark_failed(&mut self, step: usize, reason: String) {
        self.diag.failed_at = Some(step);
        self.diag.failure = Some(reason);
    }

    /// Close the record with the final state. When a finite cut-off radius
    /// was monitored, the stopping index over the recorded norm trace is
    /// stored.
    pub fn finish(
        mut self,
        g: &Grid,
        state: &State,
        cutoff: crate::regularization::CutoffParams,
    ) -> PathDiagnostics {
        let u_norm = crate::grid::norm_sq_vec(g, &state.u).sqrt();
        let v1 = crate::grid::v1_norm_sq(g, &state.phi, &state.psi).sqrt();
        self.diag.norm_trace.push((u_norm, v1));
        self.diag.moments.sup_u_sq = self.diag.moments.sup_u_sq.max(u_norm * u_norm);
        self.diag.moments.sup_v1_sq = self.diag.moments.sup_v1_sq.max(v1 * v1);
        if !cutoff.is_disabled() {
            if let Ok(crate::regularization::Stop::At(k)) =
                crate::regularization::stopping_time_index(&self.diag.norm_trace, cutoff.r)
            {
                self.diag.stopped_at = Some(k);
            }
        }
        self.diag
    }
}

/// Fixed family of smooth divergence-free test fields for the dual-norm
/// proxy: pairing u against them turns the negative-order norm of the
/// tightness bound into a computable max over a few inner products.
pub fn proxy_test_fields(g: &Grid) -> Vec<crate::grid::VectorField> {
    use std::f64::consts::PI;
    let mut fields = Vec::new();
    for (m, cos_phase) in [(1usize, false), (1, true), (2, false), (3, true)] {
        let kx = 2.0 * PI * m as f64 / g.lx;
        let f = crate::grid::VectorField::from_fn(g, |x, y| {
            let s = y / g.ly;
            let prof = s * (1.0 - s);
            let dprof = (1.0 - 2.0 * s) / g.ly;
            let (trig, dtrig) = if cos_phase {
                ((kx * x).cos(), -kx * (kx * x).sin())
            } else {
                ((kx * x).sin(), kx * (kx * x).cos())
            };
            (trig * dprof, -dtrig * prof)
        });
        let n = norm_sq_vec(g, &f).sqrt();
        let f = crate::grid::VectorField {
            ux: f.ux.iter().map(|v| v / n).collect(),
            uy: f.uy.iter().map(|v| v / n).collect(),
        };
        fields.push(f);
    }
    fields
}

// ---------------------------------------------------------------------------
// bookkeeping identity for the chemical-potential mean
// ---------------------------------------------------------------------------

/// Defect of the discrete Green identity tying the mean of mu to the wall
/// quantities: <mu> - <f> + (|Gamma|/|D|)(<K>_G - <psi>_G - <g>_G).
/// Exact (to rounding) when the supplied fields share the time levels the
/// stepper used.
pub fn mean_mu_identity_defect(
    g: &Grid,
    mu: &ScalarField,
    kpsi: &crate::grid::BoundaryField,
    psi: &crate::grid::BoundaryField,
    f_of_phi: &ScalarField,
    g_of_psi: &crate::grid::BoundaryField,
) -> f64 {
    let wall_mean = |b: &crate::grid::BoundaryField| -> f64 {
        (b.bottom.iter().sum::<f64>() + b.top.iter().sum::<f64>()) / (2.0 * g.nx as f64)
    };
    let ratio = g.wall_measure() / g.domain_volume();
    mean(g, mu) - mean(g, f_of_phi)
        + ratio * (wall_mean(kpsi) - wall_mean(psi) - wall_mean(g_of_psi))
}
