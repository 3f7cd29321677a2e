//! Coupled time stepper: phase-field substep with dynamic wall condition,
//! Stokes substep with the generalized Navier slip closure, capillary and
//! advective couplings, Leray projection, and Euler-Maruyama noise injection.
//!
//! One full step applies Lie splitting:
//!   1. phase substep (backward Euler in the linear parts, explicit
//!      nonlinearity and advection) producing (phi', psi', mu, K);
//!   2. momentum forcing assembled from the realized mu, K and the mollified
//!      transport fields, with the smooth cut-off multiplying every
//!      nonlinear term;
//!   3. semi-implicit viscous solve with Robin wall data, then projection;
//!   4. multiplicative noise increment, then projection again.
//!
//! The implicit phase system couples (phi, psi_bottom, psi_top) through the
//! wall-face closure and is solved exactly per x-wavenumber (FFT in x, small
//! LU in y), with the mean of phi pinned on the zero mode so mass drift
//! stays at rounding level over arbitrarily many steps.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;

use crate::diagnostics;
use crate::error::{Result, SchnsError};
use crate::grid::{
    self, boundary_gradient, boundary_laplacian, divergence, gradient,
    laplacian_neumann, laplacian_with_trace, linf_scalar, mean,
    normal_derivative_flux, norm_sq_boundary, norm_sq_vec, trace, v1_norm_sq,
    BoundaryField, Grid, ScalarField, VectorField,
};
use crate::mollifier::{
    mollify_boundary_with, mollify_vector_with, mollify_with, MollifierKernel,
};
use crate::noise::{apply_h_with_stats, NoiseIncrement, NoiseModel};
use crate::potentials::Potentials;
use crate::regularization::CutoffParams;
use crate::solvers::{
    conjugate_gradient, probe_y_matrix, project_divergence_free, PerKSystems, PoissonSolver,
    XTransform,
};

// ---------------------------------------------------------------------------
// state and parameters
// ---------------------------------------------------------------------------

/// Full solver state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: VectorField,
    pub phi: ScalarField,
    pub psi: BoundaryField,
    /// chemical potential realized by the last phase substep
    pub mu: ScalarField,
    /// wall potential realized by the last phase substep
    pub kpsi: BoundaryField,
    pub t: f64,
}

/// Time-stepping and regularization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    pub dt: f64,
    /// mollification radius and truncation scale; 0 disables both
    pub epsilon: f64,
    /// parabolic regularization weight inside the chemical potential
    pub delta: f64,
    /// smooth cut-off radius (infinite = disabled)
    pub cutoff: CutoffParams,
    pub div_tol: f64,
    pub trace_tol: f64,
    /// implicitness weight of the viscous solve
    pub theta: f64,
    pub blowup_guard: f64,
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(SchnsError::Parameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.epsilon < 0.0 {
            return Err(SchnsError::Parameter("epsilon must be >= 0".into()));
        }
        if self.delta < 0.0 {
            return Err(SchnsError::Parameter("delta must be >= 0".into()));
        }
        if !(self.div_tol > 0.0 && self.trace_tol > 0.0) {
            return Err(SchnsError::Parameter("tolerances must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(SchnsError::Parameter("theta must lie in [0, 1]".into()));
        }
        if !(self.blowup_guard > 0.0) {
            return Err(SchnsError::Parameter("blowup_guard must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SchemeParams {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            epsilon: 0.0,
            delta: 1e-3,
            cutoff: CutoffParams::disabled(),
            div_tol: 1e-10,
            trace_tol: 5e-2,
            theta: 1.0,
            blowup_guard: 1e6,
        }
    }
}

/// Scalar record of one completed step, consumed by the diagnostics layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// time at the end of the step
    pub t: f64,
    /// energy at the start of the step
    pub energy_pre: f64,
    /// realized dissipation pieces for this step
    pub d_visc: f64,
    pub d_grad_mu: f64,
    pub d_k: f64,
    pub d_delta_dphi: f64,
    /// Hilbert-Schmidt intensity norm at the step start (0 without noise)
    pub hs: f64,
    /// quadratic-variation rates of (h dW, u) and (h dW, grad phi)
    pub q_u: f64,
    pub q_gphi: f64,
    /// norms at the step start (the cut-off arguments)
    pub u_norm: f64,
    pub v1_norm: f64,
    pub psi_r: f64,
    /// post-step observables
    pub mass: f64,
    pub div_inf: f64,
    pub trace_dev: f64,
}

impl StepRecord {
    pub fn dissipation(&self) -> f64 {
        self.d_visc + self.d_grad_mu + self.d_k + self.d_delta_dphi
    }
}

// ---------------------------------------------------------------------------
// noise sources
// ---------------------------------------------------------------------------

/// Where the Brownian increments come from. Replaying recorded increments
/// reproduces a trajectory bit-exactly.
pub trait NoiseSource {
    fn next_increment(&mut self, model: &NoiseModel, dt: f64) -> Result<NoiseIncrement>;
}

pub struct RngSource<'a> {
    pub rng: &'a mut rand_chacha::ChaCha12Rng,
}

impl NoiseSource for RngSource<'_> {
    fn next_increment(&mut self, model: &NoiseModel, dt: f64) -> Result<NoiseIncrement> {
        crate::noise::sample_increments(model, dt, self.rng)
    }
}

pub struct ReplaySource {
    pub increments: Vec<NoiseIncrement>,
    pub cursor: usize,
}

impl NoiseSource for ReplaySource {
    fn next_increment(&mut self, _model: &NoiseModel, _dt: f64) -> Result<NoiseIncrement> {
        let inc = self
            .increments
            .get(self.cursor)
            .cloned()
            .ok_or_else(|| SchnsError::Data("replay source exhausted".into()))?;
        self.cursor += 1;
        Ok(inc)
    }
}

// ---------------------------------------------------------------------------
// bilinear forms (diagnostic quadratures)
// ---------------------------------------------------------------------------

fn advective_triple(g: &Grid, u: &VectorField, a: &VectorField, b: &VectorField) -> f64 {
    let gx = gradient(g, &ScalarField { data: a.ux.clone() }).unwrap();
    let gy = gradient(g, &ScalarField { data: a.uy.clone() }).unwrap();
    let mut s = 0.0;
    for i in 0..u.ux.len() {
        let cx = u.ux[i] * gx.ux[i] + u.uy[i] * gx.uy[i];
        let cy = u.ux[i] * gy.ux[i] + u.uy[i] * gy.uy[i];
        s += cx * b.ux[i] + cy * b.uy[i];
    }
    s * g.cell_volume()
}

/// Skew-symmetrized convection quadrature; vanishes identically when the
/// second and third arguments coincide, matching the continuous cancellation
/// for divergence-free transport.
pub fn bilinear_b0(g: &Grid, u: &VectorField, v: &VectorField, w: &VectorField) -> f64 {
    0.5 * (advective_triple(g, u, v, w) - advective_triple(g, u, w, v))
}

/// Capillary pairing  integral of mu (grad phi . eta).
pub fn bilinear_b1(g: &Grid, mu: &ScalarField, phi: &ScalarField, eta: &VectorField) -> f64 {
    let gp = gradient(g, phi).unwrap();
    let mut s = 0.0;
    for i in 0..mu.data.len() {
        s += mu.data[i] * (gp.ux[i] * eta.ux[i] + gp.uy[i] * eta.uy[i]);
    }
    s * g.cell_volume()
}

/// Transport pairing  integral of (u . grad phi) rho.
pub fn bilinear_b2(g: &Grid, u: &VectorField, phi: &ScalarField, rho: &ScalarField) -> f64 {
    let gp = gradient(g, phi).unwrap();
    let mut s = 0.0;
    for i in 0..rho.data.len() {
        s += (u.ux[i] * gp.ux[i] + u.uy[i] * gp.uy[i]) * rho.data[i];
    }
    s * g.cell_volume()
}

/// Wall transport pairing  integral over both walls of (u_tau d_tau psi) eta.
pub fn bilinear_bgamma(
    g: &Grid,
    u_tau: &BoundaryField,
    psi: &BoundaryField,
    eta: &BoundaryField,
) -> f64 {
    let dpsi = boundary_gradient(g, psi).unwrap();
    let mut s = 0.0;
    for i in 0..g.nx {
        s += u_tau.bottom[i] * dpsi.bottom[i] * eta.bottom[i];
        s += u_tau.top[i] * dpsi.top[i] * eta.top[i];
    }
    s * g.hx
}

// ---------------------------------------------------------------------------
// free-standing operations
// ---------------------------------------------------------------------------

/// Leray projection onto discretely divergence-free fields. The input is
/// expected to carry no wall-normal flux (the stepper guarantees this via
/// the Dirichlet closure of the viscous solve and the noise mode profiles).
/// The output's divergence is verified against 1e-10 and a solver error
/// with the residual is returned if the solve degraded.
pub fn helmholtz_project(g: &Grid, v: &VectorField) -> Result<VectorField> {
    if !v.is_finite() {
        return Err(SchnsError::State("projection input not finite".into()));
    }
    let solver = PoissonSolver::new(g);
    let out = project_divergence_free(g, &solver, v)?;
    let residual = linf_scalar(&divergence(g, &out)?);
    let scale = norm_sq_vec(g, v).sqrt().max(1.0);
    if residual > 1e-10 * scale {
        return Err(SchnsError::Solver {
            context: "projection residual above tolerance".into(),
            residual,
            iterations: 0,
        });
    }
    Ok(out)
}

/// One semi-implicit viscous step with Robin (slip) wall data for the
/// tangential component and zero normal velocity, followed by projection.
pub fn stokes_substep(
    g: &Grid,
    u: &VectorField,
    body_force: &VectorField,
    wall_rhs: &BoundaryField,
    dt: f64,
    theta: f64,
) -> Result<VectorField> {
    let poisson = PoissonSolver::new(g);
    stokes_substep_with(g, &poisson, u, body_force, wall_rhs, dt, theta)
}

/// Homogeneous Robin ghost weight: ghost = alpha * first + beta * ell.
fn robin_coeffs(hy: f64) -> (f64, f64) {
    ((2.0 - hy) / (2.0 + hy), 2.0 * hy / (2.0 + hy))
}

/// x component of the homogeneous viscous operator: Laplacian with Robin
/// (slip) ghost closure.
fn apply_viscous_x(g: &Grid, ux: &[f64], out_x: &mut [f64]) {
    let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let (alpha, _) = robin_coeffs(g.hy);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let (w, e) = (g.idx(g.im(i), j), g.idx(g.ip(i), j));
            let (s, n) = match j {
                0 => (alpha * ux[k], ux[g.idx(i, 1)]),
                j if j + 1 == g.ny => (ux[g.idx(i, j - 1)], alpha * ux[k]),
                _ => (ux[g.idx(i, j - 1)], ux[g.idx(i, j + 1)]),
            };
            out_x[k] = ax * (ux[w] - 2.0 * ux[k] + ux[e]) + ay * (s - 2.0 * ux[k] + n);
        }
    }
}

/// y component: Laplacian with odd ghosts (zero wall-normal velocity).
fn apply_viscous_y(g: &Grid, uy: &[f64], out_y: &mut [f64]) {
    let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let (w, e) = (g.idx(g.im(i), j), g.idx(g.ip(i), j));
            let (s, n) = match j {
                0 => (-uy[k], uy[g.idx(i, 1)]),
                j if j + 1 == g.ny => (uy[g.idx(i, j - 1)], -uy[k]),
                _ => (uy[g.idx(i, j - 1)], uy[g.idx(i, j + 1)]),
            };
            out_y[k] = ax * (uy[w] - 2.0 * uy[k] + uy[e]) + ay * (s - 2.0 * uy[k] + n);
        }
    }
}

/// Inhomogeneous wall lift of the Robin data.
fn robin_lift(g: &Grid, wall_rhs: &BoundaryField, out_x: &mut [f64]) {
    let ay = 1.0 / (g.hy * g.hy);
    let (_, beta) = robin_coeffs(g.hy);
    for i in 0..g.nx {
        out_x[g.idx(i, 0)] += ay * beta * wall_rhs.bottom[i];
        out_x[g.idx(i, g.ny - 1)] += ay * beta * wall_rhs.top[i];
    }
}

/// Quadratic form of the homogeneous viscous operator (the realized
/// velocity dissipation, interior gradient plus wall slip friction).
pub fn viscous_dissipation(g: &Grid, u: &VectorField) -> f64 {
    let mut ax = vec![0.0; u.ux.len()];
    let mut ay = vec![0.0; u.uy.len()];
    apply_viscous_x(g, &u.ux, &mut ax);
    apply_viscous_y(g, &u.uy, &mut ay);
    let mut s = 0.0;
    for i in 0..u.ux.len() {
        s += ax[i] * u.ux[i] + ay[i] * u.uy[i];
    }
    -s * g.cell_volume()
}

pub fn stokes_substep_with(
    g: &Grid,
    poisson: &PoissonSolver,
    u: &VectorField,
    body_force: &VectorField,
    wall_rhs: &BoundaryField,
    dt: f64,
    theta: f64,
) -> Result<VectorField> {
    if !(dt > 0.0) {
        return Err(SchnsError::Parameter(format!("dt must be > 0, got {dt}")));
    }
    if !wall_rhs.is_finite() || !u.is_finite() || !body_force.is_finite() {
        return Err(SchnsError::State("stokes substep input not finite".into()));
    }
    let n = g.n_cells();
    let mut rhs_x = vec![0.0; n];
    let mut rhs_y = vec![0.0; n];
    // rhs = u + dt (1 - theta) L u + dt lift + dt F
    if theta < 1.0 {
        apply_viscous_x(g, &u.ux, &mut rhs_x);
        apply_viscous_y(g, &u.uy, &mut rhs_y);
    }
    for k in 0..n {
        rhs_x[k] = u.ux[k] + dt * (1.0 - theta) * rhs_x[k] + dt * body_force.ux[k];
        rhs_y[k] = u.uy[k] + dt * (1.0 - theta) * rhs_y[k] + dt * body_force.uy[k];
    }
    {
        let mut lift = vec![0.0; n];
        robin_lift(g, wall_rhs, &mut lift);
        for k in 0..n {
            rhs_x[k] += dt * lift[k];
        }
    }

    // (I - dt theta L) u' = rhs, componentwise SPD solves
    let mut new_x = u.ux.clone();
    let mut new_y = u.uy.clone();
    if theta > 0.0 {
        let apply_x = |p: &[f64], out: &mut [f64]| {
            apply_viscous_x(g, p, out);
            for k in 0..p.len() {
                out[k] = p[k] - dt * theta * out[k];
            }
        };
        let apply_y = |p: &[f64], out: &mut [f64]| {
            apply_viscous_y(g, p, out);
            for k in 0..p.len() {
                out[k] = p[k] - dt * theta * out[k];
            }
        };
        conjugate_gradient(apply_x, &rhs_x, &mut new_x, 1e-12, 400, "stokes ux")?;
        conjugate_gradient(apply_y, &rhs_y, &mut new_y, 1e-12, 400, "stokes uy")?;
    } else {
        new_x = rhs_x;
        new_y = rhs_y;
    }

    project_divergence_free(
        g,
        poisson,
        &VectorField {
            ux: new_x,
            uy: new_y,
        },
    )
}

// ---------------------------------------------------------------------------
// coupled phase-field solver
// ---------------------------------------------------------------------------

/// Direct x-spectral solver for the implicit coupled (phi, psi) system of
/// one backward-Euler phase-field step.
pub struct ChSolver {
    xt: XTransform,
    systems: PerKSystems,
    ny: usize,
    dt: f64,
}

impl ChSolver {
    pub fn new(g: &Grid, dt: f64, delta: f64) -> Self {
        let ny = g.ny;
        // probe the y-parts of the bulk operators on x-constant fields
        let expand = |col: &[f64]| -> ScalarField {
            ScalarField {
                data: col
                    .iter()
                    .flat_map(|&v| std::iter::repeat(v).take(g.nx))
                    .collect(),
            }
        };
        let zero_b = BoundaryField::zeros(g);
        let n_mat = probe_y_matrix(ny, ny, |col| {
            let lap = laplacian_neumann(g, &expand(col)).unwrap();
            (0..ny).map(|j| lap.data[g.idx(0, j)]).collect()
        });
        let d_phi = probe_y_matrix(ny, ny, |col| {
            let lap = laplacian_with_trace(g, &expand(col), &zero_b).unwrap();
            (0..ny).map(|j| lap.data[g.idx(0, j)]).collect()
        });
        let zero_f = ScalarField::zeros(g);
        let d_psi = probe_y_matrix(2, ny, |bv| {
            let b = BoundaryField {
                bottom: vec![bv[0]; g.nx],
                top: vec![bv[1]; g.nx],
            };
            let lap = laplacian_with_trace(g, &zero_f, &b).unwrap();
            (0..ny).map(|j| lap.data[g.idx(0, j)]).collect()
        });
        let f_phi = probe_y_matrix(ny, 2, |col| {
            let fl = normal_derivative_flux(g, &expand(col), &zero_b).unwrap();
            vec![fl.bottom[0], fl.top[0]]
        });
        let f_psi = probe_y_matrix(2, 2, |bv| {
            let b = BoundaryField {
                bottom: vec![bv[0]; g.nx],
                top: vec![bv[1]; g.nx],
            };
            let fl = normal_derivative_flux(g, &zero_f, &b).unwrap();
            vec![fl.bottom[0], fl.top[0]]
        });

        let n = ny + 2;
        let nx = g.nx;
        let hx = g.hx;
        let systems = PerKSystems::new(
            nx,
            n,
            |k| {
                let lam = 4.0 * (PI * k as f64 / nx as f64).sin().powi(2) / (hx * hx);
                // Laplacians with the x symbol folded in
                let mut lap_n = n_mat.clone();
                let mut dd = DMatrix::zeros(ny, n);
                dd.view_mut((0, 0), (ny, ny)).copy_from(&d_phi);
                dd.view_mut((0, ny), (ny, 2)).copy_from(&d_psi);
                for d in 0..ny {
                    lap_n[(d, d)] -= lam;
                    dd[(d, d)] -= lam;
                }
                // bulk rows: phi'/dt + lap_n (dd X' ) - (delta/dt) lap_n phi'
                let mut m = DMatrix::zeros(n, n);
                let bulk = &lap_n * &dd;
                for r in 0..ny {
                    for c in 0..n {
                        m[(r, c)] = bulk[(r, c)];
                    }
                    m[(r, r)] += 1.0 / dt;
                    for c in 0..ny {
                        m[(r, c)] -= delta / dt * lap_n[(r, c)];
                    }
                }
                // boundary rows: psi'/dt + (A_tau + 1) psi' + flux(X')
                for (w, row) in [(0usize, ny), (1usize, ny + 1)] {
                    for c in 0..ny {
                        m[(row, c)] += f_phi[(w, c)];
                    }
                    m[(row, ny)] += f_psi[(w, 0)];
                    m[(row, ny + 1)] += f_psi[(w, 1)];
                    m[(row, row)] += 1.0 / dt + lam + 1.0;
                }
                m
            },
            |_| false,
        );
        Self {
            xt: XTransform::new(g.nx),
            systems,
            ny,
            dt,
        }
    }

    /// Solve the coupled implicit system given the assembled right-hand
    /// sides; pins the bulk mean to dt * mean(bulk_rhs) on the zero mode.
    fn solve(
        &self,
        g: &Grid,
        bulk_rhs: &ScalarField,
        bdy_rhs: &BoundaryField,
    ) -> (ScalarField, BoundaryField) {
        let nx = self.xt.nx;
        let n = self.ny + 2;
        let mut spec: Vec<Complex<f64>> = Vec::with_capacity(n * nx);
        self.xt.append_forward(&bulk_rhs.data, &mut spec);
        self.xt.append_forward(&bdy_rhs.bottom, &mut spec);
        self.xt.append_forward(&bdy_rhs.top, &mut spec);
        // exact mass target before the solve overwrites the spectrum
        let rhs_zero_mode_sum: f64 = (0..self.ny).map(|j| spec[j * nx].re).sum();
        let target_sum = self.dt * rhs_zero_mode_sum;

        self.systems.solve_all(&mut spec);

        // pin the k = 0 bulk mean; shift phi and psi together so the
        // energy-coupled wall terms are untouched
        let cur_sum: f64 = (0..self.ny).map(|j| spec[j * nx].re).sum();
        let shift = (target_sum - cur_sum) / self.ny as f64;
        for j in 0..self.ny {
            spec[j * nx].re += shift;
        }
        spec[self.ny * nx].re += shift;
        spec[(self.ny + 1) * nx].re += shift;

        let mut phi = vec![0.0; g.n_cells()];
        let mut bottom = vec![0.0; nx];
        let mut top = vec![0.0; nx];
        let split = self.ny * nx;
        let (bulk_spec, rest) = spec.split_at_mut(split);
        let (b_spec, t_spec) = rest.split_at_mut(nx);
        self.xt.inverse_into(bulk_spec, &mut phi);
        self.xt.inverse_into(b_spec, &mut bottom);
        self.xt.inverse_into(t_spec, &mut top);
        (
            ScalarField { data: phi },
            BoundaryField { bottom, top },
        )
    }
}

/// Optional manufactured sources for the phase substep (verification only).
#[derive(Debug, Clone)]
pub struct ChForcing {
    pub bulk: ScalarField,
    pub boundary: BoundaryField,
}

/// One phase-field substep. Builds a solver on the fly; the stepper caches
/// one instead.
pub fn ch_substep(
    g: &Grid,
    phi: &ScalarField,
    psi: &BoundaryField,
    u_transport: &VectorField,
    params: &SchemeParams,
    potentials: &Potentials,
) -> Result<(ScalarField, BoundaryField, ScalarField, BoundaryField)> {
    params.validate()?;
    let solver = ChSolver::new(g, params.dt, params.delta);
    let kernels = Kernels::build(g, params.epsilon)?;
    ch_substep_with(
        g, &solver, &kernels, phi, psi, u_transport, params, potentials, None,
    )
}

/// Mollifier kernels shared by a stepper (absent when epsilon = 0).
pub struct Kernels {
    pub kx: Option<MollifierKernel>,
    pub ky: Option<MollifierKernel>,
}

impl Kernels {
    pub fn build(g: &Grid, epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 {
            Ok(Self {
                kx: Some(MollifierKernel::new(epsilon, g.hx)?),
                ky: Some(MollifierKernel::new(epsilon, g.hy)?),
            })
        } else {
            Ok(Self { kx: None, ky: None })
        }
    }

    pub fn scalar(&self, g: &Grid, f: &ScalarField) -> ScalarField {
        match (&self.kx, &self.ky) {
            (Some(kx), Some(ky)) => mollify_with(g, f, kx, ky),
            _ => f.clone(),
        }
    }

    pub fn vector(&self, g: &Grid, v: &VectorField) -> VectorField {
        match (&self.kx, &self.ky) {
            (Some(kx), Some(ky)) => mollify_vector_with(g, v, kx, ky),
            _ => v.clone(),
        }
    }

    pub fn boundary(&self, g: &Grid, b: &BoundaryField) -> BoundaryField {
        match &self.kx {
            Some(kx) => mollify_boundary_with(g, b, kx),
            None => b.clone(),
        }
    }
}

/// Truncated nonlinearities when epsilon > 0, plain ones otherwise.
fn f_term(p: &Potentials, eps: f64, r: f64) -> f64 {
    if eps > 0.0 {
        p.f_eps(r, eps).expect("eps > 0")
    } else {
        p.f(r)
    }
}

fn g_term(p: &Potentials, eps: f64, r: f64) -> f64 {
    if eps > 0.0 {
        p.g_eps(r, eps).expect("eps > 0")
    } else {
        p.g(r)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn ch_substep_with(
    g: &Grid,
    solver: &ChSolver,
    kernels: &Kernels,
    phi: &ScalarField,
    psi: &BoundaryField,
    u_transport: &VectorField,
    params: &SchemeParams,
    potentials: &Potentials,
    forcing: Option<&ChForcing>,
) -> Result<(ScalarField, BoundaryField, ScalarField, BoundaryField)> {
    let tr = trace(g, phi)?;
    let dev = (0..g.nx).fold(0.0_f64, |m, i| {
        m.max((tr.bottom[i] - psi.bottom[i]).abs())
            .max((tr.top[i] - psi.top[i]).abs())
    });
    if dev > params.trace_tol {
        return Err(SchnsError::State(format!(
            "psi deviates from trace(phi) by {dev:.3e} > trace_tol {}",
            params.trace_tol
        )));
    }

    let u_norm = norm_sq_vec(g, u_transport).sqrt();
    let v1 = v1_norm_sq(g, phi, psi).sqrt();
    let psi_r = params.cutoff.psi_r(u_norm, v1)?;

    let (phi_new, psi_new, mu, kpsi, _) = ch_substep_inner(
        g, solver, kernels, phi, psi, u_transport, params, potentials, psi_r, forcing,
    )?;
    Ok((phi_new, psi_new, mu, kpsi))
}

/// Returns (phi', psi', mu, kpsi, grad of mollified phi used for advection).
#[allow(clippy::too_many_arguments)]
fn ch_substep_inner(
    g: &Grid,
    solver: &ChSolver,
    kernels: &Kernels,
    phi: &ScalarField,
    psi: &BoundaryField,
    u_transport: &VectorField,
    params: &SchemeParams,
    potentials: &Potentials,
    psi_r: f64,
    forcing: Option<&ChForcing>,
) -> Result<(
    ScalarField,
    BoundaryField,
    ScalarField,
    BoundaryField,
    VectorField,
)> {
    let dt = params.dt;
    let eps = params.epsilon;
    let n = g.n_cells();

    // explicit pieces
    let phi_moll = kernels.scalar(g, phi);
    let grad_phi_moll = gradient(g, &phi_moll)?;
    let psi_moll = kernels.boundary(g, psi);
    let dtau_psi_moll = boundary_gradient(g, &psi_moll)?;
    let u_tau = robin_face_trace(g, u_transport);

    let f_explicit: Vec<f64> = phi.data.iter().map(|&r| f_term(potentials, eps, r)).collect();
    let mu_known = ScalarField {
        data: (0..n)
            .map(|k| f_explicit[k] - params.delta / dt * phi.data[k])
            .collect(),
    };
    let lap_known = laplacian_neumann(g, &mu_known)?;

    let mut bulk_rhs = ScalarField::zeros(g);
    for k in 0..n {
        let adv = psi_r
            * (u_transport.ux[k] * grad_phi_moll.ux[k] + u_transport.uy[k] * grad_phi_moll.uy[k]);
        bulk_rhs.data[k] = phi.data[k] / dt - adv + lap_known.data[k];
    }
    let mut bdy_rhs = BoundaryField::zeros(g);
    for i in 0..g.nx {
        bdy_rhs.bottom[i] = psi.bottom[i] / dt
            - psi_r * u_tau.bottom[i] * dtau_psi_moll.bottom[i]
            - g_term(potentials, eps, psi.bottom[i]);
        bdy_rhs.top[i] = psi.top[i] / dt
            - psi_r * u_tau.top[i] * dtau_psi_moll.top[i]
            - g_term(potentials, eps, psi.top[i]);
    }
    if let Some(f) = forcing {
        for k in 0..n {
            bulk_rhs.data[k] += f.bulk.data[k];
        }
        for i in 0..g.nx {
            bdy_rhs.bottom[i] += f.boundary.bottom[i];
            bdy_rhs.top[i] += f.boundary.top[i];
        }
    }

    let (phi_new, psi_new) = solver.solve(g, &bulk_rhs, &bdy_rhs);

    // realized potentials
    let lap_phi_new = laplacian_with_trace(g, &phi_new, &psi_new)?;
    let mut mu = ScalarField::zeros(g);
    for k in 0..n {
        mu.data[k] =
            -lap_phi_new.data[k] + params.delta / dt * (phi_new.data[k] - phi.data[k]) + f_explicit[k];
    }
    let lap_tau = boundary_laplacian(g, &psi_new)?;
    let flux = normal_derivative_flux(g, &phi_new, &psi_new)?;
    let mut kpsi = BoundaryField::zeros(g);
    for i in 0..g.nx {
        kpsi.bottom[i] = -lap_tau.bottom[i]
            + flux.bottom[i]
            + psi_new.bottom[i]
            + g_term(potentials, eps, psi.bottom[i]);
        kpsi.top[i] = -lap_tau.top[i]
            + flux.top[i]
            + psi_new.top[i]
            + g_term(potentials, eps, psi.top[i]);
    }
    let _ = mu_known;
    Ok((phi_new, psi_new, mu, kpsi, grad_phi_moll))
}

/// Tangential wall velocity: trace of the x component.
pub fn trace_velocity(g: &Grid, u: &VectorField) -> Result<BoundaryField> {
    trace(
        g,
        &ScalarField {
            data: u.ux.clone(),
        },
    )
}

/// Wall-face tangential velocity as the Robin viscous operator sees it:
/// the face value of the homogeneous ghost extension. Using this trace in
/// the wall advection makes its work cancel the slip-data power of the
/// momentum solve exactly in space.
pub fn robin_face_trace(g: &Grid, u: &VectorField) -> BoundaryField {
    let w = 2.0 / (2.0 + g.hy);
    let mut bottom = vec![0.0; g.nx];
    let mut top = vec![0.0; g.nx];
    for i in 0..g.nx {
        bottom[i] = w * u.ux[g.idx(i, 0)];
        top[i] = w * u.ux[g.idx(i, g.ny - 1)];
    }
    BoundaryField { bottom, top }
}

// ---------------------------------------------------------------------------
// the full stepper
// ---------------------------------------------------------------------------

struct Shared {
    poisson: PoissonSolver,
    ch: ChSolver,
    kernels: Kernels,
    noise: Option<NoiseModel>,
}

/// Time stepper with cached solvers; cheap to clone and safe to share
/// across paths (all shared pieces are immutable).
#[derive(Clone)]
pub struct Stepper {
    pub grid: Grid,
    pub params: SchemeParams,
    pub potentials: Potentials,
    shared: Arc<Shared>,
}

impl Stepper {
    pub fn new(
        grid: Grid,
        params: SchemeParams,
        potentials: Potentials,
        noise: Option<NoiseModel>,
    ) -> Result<Self> {
        params.validate()?;
        let shared = Shared {
            poisson: PoissonSolver::new(&grid),
            ch: ChSolver::new(&grid, params.dt, params.delta),
            kernels: Kernels::build(&grid, params.epsilon)?,
            noise,
        };
        Ok(Self {
            grid,
            params,
            potentials,
            shared: Arc::new(shared),
        })
    }

    pub fn noise_model(&self) -> Option<&NoiseModel> {
        self.shared.noise.as_ref()
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.shared.poisson
    }

    /// Build a consistent initial state: psi = trace(phi), u projected,
    /// mu and K evaluated from the initial fields.
    pub fn initial_state(&self, u_raw: &VectorField, phi: &ScalarField) -> Result<State> {
        let g = &self.grid;
        let u = project_divergence_free(g, &self.shared.poisson, u_raw)?;
        let psi = trace(g, phi)?;
        let lap = laplacian_with_trace(g, phi, &psi)?;
        let eps = self.params.epsilon;
        let mu = ScalarField {
            data: phi
                .data
                .iter()
                .zip(&lap.data)
                .map(|(&r, &l)| -l + f_term(&self.potentials, eps, r))
                .collect(),
        };
        let lap_tau = boundary_laplacian(g, &psi)?;
        let flux = normal_derivative_flux(g, phi, &psi)?;
        let mut kpsi = BoundaryField::zeros(g);
        for i in 0..g.nx {
            kpsi.bottom[i] = -lap_tau.bottom[i]
                + flux.bottom[i]
                + psi.bottom[i]
                + g_term(&self.potentials, eps, psi.bottom[i]);
            kpsi.top[i] = -lap_tau.top[i]
                + flux.top[i]
                + psi.top[i]
                + g_term(&self.potentials, eps, psi.top[i]);
        }
        Ok(State {
            u,
            phi: phi.clone(),
            psi,
            mu,
            kpsi,
            t: 0.0,
        })
    }

    /// Advance the state by one step; returns the scalar step record.
    pub fn full_step(&self, state: &mut State, noise: &mut dyn NoiseSource) -> Result<StepRecord> {
        let g = &self.grid;
        let p = &self.params;
        let n = g.n_cells();

        if !(state.u.is_finite() && state.phi.is_finite() && state.psi.is_finite()) {
            return Err(SchnsError::State("state carries non-finite values".into()));
        }

        // cut-off arguments and pre-step energy
        let u_norm = norm_sq_vec(g, &state.u).sqrt();
        let v1_norm = v1_norm_sq(g, &state.phi, &state.psi).sqrt();
        let psi_r = p.cutoff.psi_r(u_norm, v1_norm)?;
        let energy_pre = diagnostics::energy_total(g, state, &self.potentials, p.epsilon);

        // noise intensity is evaluated at the step start
        let grad_phi_pre = gradient(g, &state.phi)?;
        let (hs, q_u, q_gphi, kick) = match &self.shared.noise {
            Some(model) => {
                let inc = noise.next_increment(model, p.dt)?;
                let (eta, hs, q_u, q_g) =
                    apply_h_with_stats(g, model, &state.u, &grad_phi_pre, &inc)?;
                (hs, q_u, q_g, Some(eta))
            }
            None => (0.0, 0.0, 0.0, None),
        };

        // 1. phase substep
        let (phi_new, psi_new, mu_new, kpsi_new, grad_phi_moll) = ch_substep_inner(
            g,
            &self.shared.ch,
            &self.shared.kernels,
            &state.phi,
            &state.psi,
            &state.u,
            p,
            &self.potentials,
            psi_r,
            None,
        )?;

        // 2. momentum forcing: rotational convection of the mollified
        //    velocity, capillary force, wall slip data
        let u_moll = self.shared.kernels.vector(g, &state.u);
        let curl = {
            let gx_uy = gradient(g, &ScalarField { data: u_moll.uy.clone() })?;
            let gy_ux = gradient(g, &ScalarField { data: u_moll.ux.clone() })?;
            let mut c = vec![0.0; n];
            for k in 0..n {
                c[k] = gx_uy.ux[k] - gy_ux.uy[k];
            }
            c
        };
        let mut force = VectorField::zeros(g);
        for k in 0..n {
            let conv_x = curl[k] * state.u.uy[k];
            let conv_y = -curl[k] * state.u.ux[k];
            let cap_x = mu_new.data[k] * grad_phi_moll.ux[k];
            let cap_y = mu_new.data[k] * grad_phi_moll.uy[k];
            force.ux[k] = psi_r * (conv_x + cap_x);
            force.uy[k] = psi_r * (conv_y + cap_y);
        }
        let psi_moll = self.shared.kernels.boundary(g, &state.psi);
        let dtau_psi = boundary_gradient(g, &psi_moll)?;
        let mut ell = BoundaryField::zeros(g);
        for i in 0..g.nx {
            ell.bottom[i] = psi_r * kpsi_new.bottom[i] * dtau_psi.bottom[i];
            ell.top[i] = psi_r * kpsi_new.top[i] * dtau_psi.top[i];
        }

        // 3. viscous solve + projection
        let u_star = stokes_substep_with(
            g,
            &self.shared.poisson,
            &state.u,
            &force,
            &ell,
            p.dt,
            p.theta,
        )?;
        let d_visc = viscous_dissipation(g, &u_star);

        // 4. noise injection + projection
        let u_next = match kick {
            Some(eta) => {
                let mut kicked = u_star.clone();
                for k in 0..n {
                    kicked.ux[k] += eta.ux[k];
                    kicked.uy[k] += eta.uy[k];
                }
                project_divergence_free(g, &self.shared.poisson, &kicked)?
            }
            None => u_star,
        };

        // realized dissipation pieces
        let d_grad_mu = grid::h1_seminorm_sq_neumann(g, &mu_new);
        let d_k = norm_sq_boundary(g, &kpsi_new);
        let d_delta_dphi = if p.delta > 0.0 {
            let mut s = 0.0;
            for k in 0..n {
                let r = (phi_new.data[k] - state.phi.data[k]) / p.dt;
                s += r * r;
            }
            p.delta * s * g.cell_volume()
        } else {
            0.0
        };

        // invariants
        let div_inf = linf_scalar(&divergence(g, &u_next)?);
        if div_inf > p.div_tol {
            return Err(SchnsError::Solver {
                context: "post-step divergence exceeds tolerance".into(),
                residual: div_inf,
                iterations: 0,
            });
        }
        let tr_new = trace(g, &phi_new)?;
        let trace_dev = (0..g.nx).fold(0.0_f64, |m, i| {
            m.max((tr_new.bottom[i] - psi_new.bottom[i]).abs())
                .max((tr_new.top[i] - psi_new.top[i]).abs())
        });
        if trace_dev > p.trace_tol {
            return Err(SchnsError::State(format!(
                "trace deviation {trace_dev:.3e} exceeds tolerance {}",
                p.trace_tol
            )));
        }
        let new_u_norm = norm_sq_vec(g, &u_next).sqrt();
        let new_v1 = v1_norm_sq(g, &phi_new, &psi_new).sqrt();
        if !new_u_norm.is_finite()
            || !new_v1.is_finite()
            || new_u_norm > p.blowup_guard
            || new_v1 > p.blowup_guard
        {
            return Err(SchnsError::Diverged {
                t: state.t + p.dt,
                detail: format!("||u|| = {new_u_norm:.3e}, V1 norm = {new_v1:.3e}"),
            });
        }

        let mass = mean(g, &phi_new);
        state.u = u_next;
        state.phi = phi_new;
        state.psi = psi_new;
        state.mu = mu_new;
        state.kpsi = kpsi_new;
        state.t += p.dt;

        Ok(StepRecord {
            t: state.t,
            energy_pre,
            d_visc,
            d_grad_mu,
            d_k,
            d_delta_dphi,
            hs,
            q_u,
            q_gphi,
            u_norm,
            v1_norm,
            psi_r,
            mass,
            div_inf,
            trace_dev,
        })
    }
}

// boundary L2 pairing re-export used by the acceptance identities
pub fn wall_pairing(g: &Grid, a: &BoundaryField, b: &BoundaryField, u_tau: &BoundaryField) -> f64 {
    // (a * d_tau b, u_tau) over both walls
    let db = boundary_gradient(g, b).unwrap();
    let mut s = 0.0;
    for i in 0..g.nx {
        s += a.bottom[i] * db.bottom[i] * u_tau.bottom[i];
        s += a.top[i] * db.top[i] * u_tau.top[i];
    }
    s * g.hx
}

pub use crate::grid::inner as scalar_inner;
