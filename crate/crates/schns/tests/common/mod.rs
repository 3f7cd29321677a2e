//! Shared manufactured solutions and order-fitting helpers for the
//! integration and acceptance suites.

use schns::dynamics::{
    ch_substep_with, stokes_substep_with, ChForcing, ChSolver, Kernels, SchemeParams,
};
use schns::grid::{norm_sq, norm_sq_boundary, BoundaryField, Grid, ScalarField, VectorField};
use schns::potentials::Potentials;
use schns::solvers::{project_divergence_free, PoissonSolver};
use std::f64::consts::PI;

/// Least-squares slope of log(err) against log(scale).
pub fn fitted_order(scales: &[f64], errors: &[f64]) -> f64 {
    let n = scales.len() as f64;
    let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

// ---------------------------------------------------------------------------
// manufactured Stokes problem with inhomogeneous slip data
// ---------------------------------------------------------------------------

const STOKES_LAMBDA: f64 = 4.0;

fn s_profile(y: f64) -> (f64, f64, f64, f64) {
    // s = y^2 (1-y)^2 and derivatives
    let s = y * y * (1.0 - y) * (1.0 - y);
    let s1 = 2.0 * y - 6.0 * y * y + 4.0 * y * y * y;
    let s2 = 2.0 - 12.0 * y + 12.0 * y * y;
    let s3 = -12.0 + 24.0 * y;
    (s, s1, s2, s3)
}

pub fn stokes_exact(g: &Grid, t: f64) -> VectorField {
    let k = 2.0 * PI / g.lx;
    let a = (-STOKES_LAMBDA * t).exp();
    VectorField::from_fn(g, |x, y| {
        let (s, s1, _, _) = s_profile(y);
        (a * (k * x).sin() * s1, -a * k * (k * x).cos() * s)
    })
}

fn stokes_force(g: &Grid, t: f64) -> VectorField {
    let k = 2.0 * PI / g.lx;
    let a = (-STOKES_LAMBDA * t).exp();
    VectorField::from_fn(g, |x, y| {
        let (s, s1, s2, s3) = s_profile(y);
        let fx = a * (k * x).sin() * (-STOKES_LAMBDA * s1 + k * k * s1 - s3);
        let fy = a * k * (k * x).cos() * (STOKES_LAMBDA * s - k * k * s + s2);
        (fx, fy)
    })
}

fn stokes_wall_data(g: &Grid, t: f64) -> BoundaryField {
    let k = 2.0 * PI / g.lx;
    let a = (-STOKES_LAMBDA * t).exp();
    // bottom: -d_y ux + ux = -s''(0) e sin(kx);  top: +d_y ux + ux = s''(1) e sin(kx)
    BoundaryField::from_fn(g, |x, top| {
        let sgn = if top { 2.0 } else { -2.0 };
        sgn * a * (k * x).sin()
    })
}

fn stokes_run(g: &Grid, poisson: &PoissonSolver, dt: f64, t_end: f64) -> VectorField {
    let mut u = project_divergence_free(g, poisson, &stokes_exact(g, 0.0)).unwrap();
    let steps = (t_end / dt).round() as usize;
    for step in 0..steps {
        let t_new = (step + 1) as f64 * dt;
        let force = stokes_force(g, t_new);
        let ell = stokes_wall_data(g, t_new);
        u = stokes_substep_with(g, poisson, &u, &force, &ell, dt, 1.0).unwrap();
    }
    u
}

/// L2 error of the semi-implicit Stokes substep against the manufactured
/// solution after integrating to `t_end` with step `dt`.
pub fn stokes_error(n: usize, dt: f64, t_end: f64) -> f64 {
    let g = Grid::new(n, n, 1.0, 1.0).unwrap();
    let poisson = PoissonSolver::new(&g);
    let u = stokes_run(&g, &poisson, dt, t_end);
    let exact = stokes_exact(&g, t_end);
    let diff = VectorField {
        ux: u.ux.iter().zip(&exact.ux).map(|(a, b)| a - b).collect(),
        uy: u.uy.iter().zip(&exact.uy).map(|(a, b)| a - b).collect(),
    };
    schns::grid::norm_sq_vec(&g, &diff).sqrt()
}

/// Temporal error isolated with a same-grid fine-step reference run, which
/// cancels the fixed spatial component of the error.
pub fn stokes_dt_error(n: usize, dt: f64, dt_ref: f64, t_end: f64) -> f64 {
    let g = Grid::new(n, n, 1.0, 1.0).unwrap();
    let poisson = PoissonSolver::new(&g);
    let u = stokes_run(&g, &poisson, dt, t_end);
    let u_ref = stokes_run(&g, &poisson, dt_ref, t_end);
    let diff = VectorField {
        ux: u.ux.iter().zip(&u_ref.ux).map(|(a, b)| a - b).collect(),
        uy: u.uy.iter().zip(&u_ref.uy).map(|(a, b)| a - b).collect(),
    };
    schns::grid::norm_sq_vec(&g, &diff).sqrt()
}

// ---------------------------------------------------------------------------
// manufactured phase-field problem with dynamic wall condition
// ---------------------------------------------------------------------------

const CH_LAMBDA: f64 = 2.0;
const CH_AMP: f64 = 0.3;
const CH_U0: f64 = 0.4;

fn amp(t: f64) -> (f64, f64) {
    let a = CH_AMP * (-CH_LAMBDA * t).exp();
    (a, -CH_LAMBDA * a)
}

/// Transport field whose x component satisfies the homogeneous slip
/// compatibility at both walls (so the discrete face trace is second order)
/// and whose streamfunction vanishes at the walls:
/// w = 1 + y - 9 y^2 + 6 y^3, W = int w.
fn transport(g: &Grid) -> VectorField {
    let k = 2.0 * PI / g.lx;
    VectorField::from_fn(g, |x, y| {
        let w = 1.0 + y - 9.0 * y * y + 6.0 * y * y * y;
        let big_w = y + y * y / 2.0 - 3.0 * y * y * y + 1.5 * y * y * y * y;
        (CH_U0 * (k * x).sin() * w, -CH_U0 * k * (k * x).cos() * big_w)
    })
}

fn u_tau_exact(x: f64, top: bool, k: f64) -> f64 {
    // w(0) = 1, w(1) = -1
    let w = if top { -1.0 } else { 1.0 };
    CH_U0 * (k * x).sin() * w
}

pub fn ch_exact_phi(g: &Grid, t: f64) -> ScalarField {
    let k = 2.0 * PI / g.lx;
    let (a, _) = amp(t);
    ScalarField::from_fn(g, |x, y| a * (k * x).cos() * (PI * y / g.ly).cos())
}

pub fn ch_exact_psi(g: &Grid, t: f64) -> BoundaryField {
    let k = 2.0 * PI / g.lx;
    let (a, _) = amp(t);
    BoundaryField::from_fn(g, |x, top| {
        let c = if top { (PI).cos() } else { 1.0 };
        a * (k * x).cos() * c
    })
}

/// Bulk and boundary sources that make the manufactured pair an exact
/// solution of the phase system with the double-well f, g(r) = r, and the
/// given delta.
fn ch_forcing(g: &Grid, t: f64, delta: f64) -> ChForcing {
    let k = 2.0 * PI / g.lx;
    let m = PI / g.ly;
    let kappa2 = k * k + m * m;
    let (a, da) = amp(t);
    let u = transport(g);
    let mut bulk = ScalarField::zeros(g);
    for j in 0..g.ny {
        for idx_x in 0..g.nx {
            let (x, y) = (g.x(idx_x), g.y(j));
            let (cx, sx) = ((k * x).cos(), (k * x).sin());
            let (cy, sy) = ((m * y).cos(), (m * y).sin());
            let phi = a * cx * cy;
            let dphi_dt = da * cx * cy;
            let gpx = -a * k * sx * cy;
            let gpy = -a * m * cx * sy;
            let grad_sq = gpx * gpx + gpy * gpy;
            // Delta mu = -kappa^4 phi - delta kappa^2 phi_t + 6 phi |grad phi|^2
            //            + (3 phi^2 - 1)(-kappa^2 phi)
            let lap_mu = -kappa2 * kappa2 * phi - delta * kappa2 * dphi_dt
                + 6.0 * phi * grad_sq
                + (3.0 * phi * phi - 1.0) * (-kappa2 * phi);
            let kidx = g.idx(idx_x, j);
            let adv = u.ux[kidx] * gpx + u.uy[kidx] * gpy;
            bulk.data[kidx] = dphi_dt + adv - lap_mu;
        }
    }
    let mut boundary = BoundaryField::zeros(g);
    for i in 0..g.nx {
        let x = g.x(i);
        let (cx, sx) = ((k * x).cos(), (k * x).sin());
        for top in [false, true] {
            let cy = if top { (PI).cos() } else { 1.0 };
            let psi = a * cx * cy;
            let dpsi_dt = da * cx * cy;
            let dtau_psi = -a * k * sx * cy;
            let u_tau = u_tau_exact(x, top, k);
            // K = -lap_tau psi + d_n phi + psi + g(psi); d_n phi = 0 here
            let kpsi = k * k * psi + psi + psi;
            let val = dpsi_dt + u_tau * dtau_psi + kpsi;
            if top {
                boundary.top[i] = val;
            } else {
                boundary.bottom[i] = val;
            }
        }
    }
    ChForcing { bulk, boundary }
}

fn ch_run(g: &Grid, dt: f64, t_end: f64) -> (ScalarField, BoundaryField) {
    let params = SchemeParams {
        dt,
        epsilon: 0.0,
        delta: 1e-3,
        ..SchemeParams::default()
    };
    let pots = Potentials::double_well();
    let solver = ChSolver::new(g, dt, params.delta);
    let kernels = Kernels::build(g, 0.0).unwrap();
    let u = transport(g);
    let mut phi = ch_exact_phi(g, 0.0);
    let mut psi = ch_exact_psi(g, 0.0);
    let steps = (t_end / dt).round() as usize;
    for step in 0..steps {
        let t_new = (step + 1) as f64 * dt;
        let forcing = ch_forcing(g, t_new, params.delta);
        let (phi2, psi2, _, _) = ch_substep_with(
            g,
            &solver,
            &kernels,
            &phi,
            &psi,
            &u,
            &params,
            &pots,
            Some(&forcing),
        )
        .unwrap();
        phi = phi2;
        psi = psi2;
    }
    (phi, psi)
}

/// L2 errors (phi, psi) of the forced phase substep against the
/// manufactured solution at `t_end`.
pub fn ch_error(n: usize, dt: f64, t_end: f64) -> (f64, f64) {
    let g = Grid::new(n, n, 1.0, 1.0).unwrap();
    let (phi, psi) = ch_run(&g, dt, t_end);
    let exact_phi = ch_exact_phi(&g, t_end);
    let exact_psi = ch_exact_psi(&g, t_end);
    let dphi = ScalarField {
        data: phi
            .data
            .iter()
            .zip(&exact_phi.data)
            .map(|(a, b)| a - b)
            .collect(),
    };
    let dpsi = BoundaryField {
        bottom: psi
            .bottom
            .iter()
            .zip(&exact_psi.bottom)
            .map(|(a, b)| a - b)
            .collect(),
        top: psi
            .top
            .iter()
            .zip(&exact_psi.top)
            .map(|(a, b)| a - b)
            .collect(),
    };
    (norm_sq(&g, &dphi).sqrt(), norm_sq_boundary(&g, &dpsi).sqrt())
}

/// Temporal error of the phase substep against a same-grid fine-step
/// reference.
pub fn ch_dt_error(n: usize, dt: f64, dt_ref: f64, t_end: f64) -> f64 {
    let g = Grid::new(n, n, 1.0, 1.0).unwrap();
    let (phi, _) = ch_run(&g, dt, t_end);
    let (phi_ref, _) = ch_run(&g, dt_ref, t_end);
    let d = ScalarField {
        data: phi
            .data
            .iter()
            .zip(&phi_ref.data)
            .map(|(a, b)| a - b)
            .collect(),
    };
    norm_sq(&g, &d).sqrt()
}
