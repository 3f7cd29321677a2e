//! Truncated cylindrical Wiener forcing for the momentum equation.
//!
//! The noise is W = sum_k e_k beta_k truncated to K modes. Mode shapes come
//! from streamfunctions (Fourier in x times polynomial wall-vanishing
//! profiles in y), orthonormalized in the discrete L2 inner product, so the
//! normal velocity they inject at the walls vanishes with the profile. The
//! intensity is pointwise linear in (u, grad phi) and modulated by the mode
//! shape, which makes the linear-growth and Lipschitz bounds exact identities
//! with constants the model reports.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SchnsError};
use crate::grid::{inner_vec, norm_sq_vec, Grid, VectorField};

/// Construction parameters for the default mode family.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams {
    pub k_modes: usize,
    pub sigma0: f64,
    pub gamma: f64,
    pub alpha_u: f64,
    pub alpha_phi: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            k_modes: 16,
            sigma0: 0.1,
            gamma: 1.0,
            alpha_u: 1.0,
            alpha_phi: 0.5,
        }
    }
}

/// Truncated cylindrical noise model with mode-modulated linear intensity.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub modes: Vec<VectorField>,
    pub sigma: Vec<f64>,
    pub alpha_u: f64,
    pub alpha_phi: f64,
    /// sum of sigma_k^2 (finite by construction, reported)
    pub sigma_sq_sum: f64,
    /// constant C in the linear-growth bound
    /// ||h||_HS^2 <= C (1 + ||u||^2 + ||grad phi||^2)
    pub a1_constant: f64,
}

/// One Euler-Maruyama increment batch: K independent N(0, dt) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
}

impl NoiseModel {
    /// Default family: streamfunction modes (analytically divergence free,
    /// zero normal velocity at the walls), Gram-Schmidt orthonormalized,
    /// amplitude schedule sigma_k = sigma0 * k^(-gamma).
    pub fn build(g: &Grid, params: &NoiseParams) -> Result<Self> {
        if params.k_modes < 1 {
            return Err(SchnsError::Parameter("noise needs k_modes >= 1".into()));
        }
        if !(params.gamma > 0.5) {
            return Err(SchnsError::Parameter(format!(
                "amplitude decay gamma must exceed 1/2, got {}",
                params.gamma
            )));
        }
        if !(params.sigma0 > 0.0) {
            return Err(SchnsError::Parameter("sigma0 must be positive".into()));
        }
        let raw = candidate_modes(g, params.k_modes);
        let modes = orthonormalize(g, raw, params.k_modes)?;
        let sigma: Vec<f64> = (1..=params.k_modes)
            .map(|k| params.sigma0 * (k as f64).powf(-params.gamma))
            .collect();
        Ok(Self::assemble(modes, sigma, params.alpha_u, params.alpha_phi))
    }

    /// Explicit mode set (unit L2 norm required), for tests and custom
    /// covariance structures.
    pub fn with_modes(
        g: &Grid,
        modes: Vec<VectorField>,
        sigma: Vec<f64>,
        alpha_u: f64,
        alpha_phi: f64,
    ) -> Result<Self> {
        if modes.is_empty() || modes.len() != sigma.len() {
            return Err(SchnsError::Parameter(
                "need one positive amplitude per mode".into(),
            ));
        }
        for (k, e) in modes.iter().enumerate() {
            let n = norm_sq_vec(g, e).sqrt();
            if (n - 1.0).abs() > 1e-8 {
                return Err(SchnsError::Parameter(format!(
                    "mode {k} is not unit-normalized: ||e|| = {n}"
                )));
            }
        }
        if sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(SchnsError::Parameter("amplitudes must be positive".into()));
        }
        Ok(Self::assemble(modes, sigma, alpha_u, alpha_phi))
    }

    fn assemble(modes: Vec<VectorField>, sigma: Vec<f64>, alpha_u: f64, alpha_phi: f64) -> Self {
        let sigma_sq_sum: f64 = sigma.iter().map(|s| s * s).sum();
        let alpha_max = alpha_u.abs().max(alpha_phi.abs());
        let weighted: f64 = modes
            .iter()
            .zip(&sigma)
            .map(|(e, s)| {
                let e_inf = e
                    .ux
                    .iter()
                    .chain(e.uy.iter())
                    .fold(0.0_f64, |m, v| m.max(v.abs()));
                s * s * e_inf * e_inf
            })
            .sum();
        let a1_constant = 2.0 * alpha_max * alpha_max * weighted;
        Self {
            modes,
            sigma,
            alpha_u,
            alpha_phi,
            sigma_sq_sum,
            a1_constant,
        }
    }

    pub fn k_modes(&self) -> usize {
        self.modes.len()
    }
}

/// Per-path RNG: one keyed stream per path index, so paths are independent
/// and any path can be reproduced from (base_seed, path_index) alone.
pub fn path_rng(base_seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(base_seed);
    rng.set_stream(path_index);
    rng
}

/// Draw the K independent N(0, dt) Brownian increments for one step.
pub fn sample_increments(
    model: &NoiseModel,
    dt: f64,
    rng: &mut ChaCha12Rng,
) -> Result<NoiseIncrement> {
    if dt < 0.0 {
        return Err(SchnsError::Parameter(format!("dt must be >= 0, got {dt}")));
    }
    let s = dt.sqrt();
    let dw = (0..model.k_modes())
        .map(|_| s * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(NoiseIncrement { dw, dt })
}

/// Pointwise intensity argument m = alpha_u * u + alpha_phi * grad phi.
fn intensity_field(model: &NoiseModel, u: &VectorField, gradphi: &VectorField) -> VectorField {
    let (au, ap) = (model.alpha_u, model.alpha_phi);
    VectorField {
        ux: u
            .ux
            .iter()
            .zip(&gradphi.ux)
            .map(|(a, b)| au * a + ap * b)
            .collect(),
        uy: u
            .uy
            .iter()
            .zip(&gradphi.uy)
            .map(|(a, b)| au * a + ap * b)
            .collect(),
    }
}

/// Realized noise field sum_k sigma_k (m . e_k) dW_k with componentwise
/// mode modulation.
pub fn apply_h(
    model: &NoiseModel,
    u: &VectorField,
    gradphi: &VectorField,
    inc: &NoiseIncrement,
) -> Result<VectorField> {
    if inc.dw.len() != model.k_modes() {
        return Err(SchnsError::DimensionMismatch(format!(
            "increment has {} modes, model has {}",
            inc.dw.len(),
            model.k_modes()
        )));
    }
    let m = intensity_field(model, u, gradphi);
    let n = m.ux.len();
    let mut out = VectorField {
        ux: vec![0.0; n],
        uy: vec![0.0; n],
    };
    for (k, e) in model.modes.iter().enumerate() {
        let w = model.sigma[k] * inc.dw[k];
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            out.ux[i] += w * m.ux[i] * e.ux[i];
            out.uy[i] += w * m.uy[i] * e.uy[i];
        }
    }
    Ok(out)
}

/// Hilbert-Schmidt norm squared: sum_k || sigma_k (m . e_k) ||_L2^2.
pub fn hs_norm_sq(g: &Grid, model: &NoiseModel, u: &VectorField, gradphi: &VectorField) -> f64 {
    let m = intensity_field(model, u, gradphi);
    let vol = g.cell_volume();
    let mut total = 0.0;
    for (k, e) in model.modes.iter().enumerate() {
        let mut s = 0.0;
        for i in 0..m.ux.len() {
            let hx = m.ux[i] * e.ux[i];
            let hy = m.uy[i] * e.uy[i];
            s += hx * hx + hy * hy;
        }
        total += model.sigma[k] * model.sigma[k] * s * vol;
    }
    total
}

/// One fused sweep over the modes: the realized increment field, the
/// Hilbert-Schmidt norm, and the quadratic-variation rates of the pairings
/// against u and grad phi. Equivalent to apply_h + hs_norm_sq +
/// pairing_sq_sums, evaluated once.
pub fn apply_h_with_stats(
    g: &Grid,
    model: &NoiseModel,
    u: &VectorField,
    gradphi: &VectorField,
    inc: &NoiseIncrement,
) -> Result<(VectorField, f64, f64, f64)> {
    if inc.dw.len() != model.k_modes() {
        return Err(SchnsError::DimensionMismatch(format!(
            "increment has {} modes, model has {}",
            inc.dw.len(),
            model.k_modes()
        )));
    }
    let m = intensity_field(model, u, gradphi);
    let n = m.ux.len();
    let vol = g.cell_volume();
    let mut out = VectorField {
        ux: vec![0.0; n],
        uy: vec![0.0; n],
    };
    let (mut hs, mut q_u, mut q_g) = (0.0, 0.0, 0.0);
    for (k, e) in model.modes.iter().enumerate() {
        let sigma = model.sigma[k];
        let w = sigma * inc.dw[k];
        let mut norm = 0.0;
        let mut pair_u = 0.0;
        let mut pair_g = 0.0;
        for i in 0..n {
            let hx = m.ux[i] * e.ux[i];
            let hy = m.uy[i] * e.uy[i];
            out.ux[i] += w * hx;
            out.uy[i] += w * hy;
            norm += hx * hx + hy * hy;
            pair_u += hx * u.ux[i] + hy * u.uy[i];
            pair_g += hx * gradphi.ux[i] + hy * gradphi.uy[i];
        }
        hs += sigma * sigma * norm * vol;
        q_u += (sigma * pair_u * vol).powi(2);
        q_g += (sigma * pair_g * vol).powi(2);
    }
    Ok((out, hs, q_u, q_g))
}

/// Quadratic-variation rates of the pairings (h dW, target):
/// sum_k sigma_k^2 <m . e_k, target>^2 for each requested target field.
pub fn pairing_sq_sums(
    g: &Grid,
    model: &NoiseModel,
    u: &VectorField,
    gradphi: &VectorField,
    targets: &[&VectorField],
) -> Vec<f64> {
    let m = intensity_field(model, u, gradphi);
    let mut out = vec![0.0; targets.len()];
    let mut h_k = VectorField {
        ux: vec![0.0; m.ux.len()],
        uy: vec![0.0; m.uy.len()],
    };
    for (k, e) in model.modes.iter().enumerate() {
        for i in 0..m.ux.len() {
            h_k.ux[i] = model.sigma[k] * m.ux[i] * e.ux[i];
            h_k.uy[i] = model.sigma[k] * m.uy[i] * e.uy[i];
        }
        for (t, target) in targets.iter().enumerate() {
            let p = inner_vec(g, &h_k, target);
            out[t] += p * p;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// default mode family
// ---------------------------------------------------------------------------

fn candidate_modes(g: &Grid, k_modes: usize) -> Vec<VectorField> {
    let mut cands = Vec::new();
    let mut level = 0usize;
    while cands.len() < k_modes + 2 {
        for m in 1..=4usize {
            for cos_phase in [false, true] {
                cands.push(stream_mode(g, m, level, cos_phase));
            }
        }
        level += 1;
    }
    cands
}

/// Legendre polynomial values and derivatives on [-1, 1], low orders only.
fn legendre(level: usize, t: f64) -> (f64, f64) {
    match level {
        0 => (1.0, 0.0),
        1 => (t, 1.0),
        2 => ((3.0 * t * t - 1.0) / 2.0, 3.0 * t),
        _ => ((5.0 * t * t * t - 3.0 * t) / 2.0, (15.0 * t * t - 3.0) / 2.0),
    }
}

/// Velocity mode from the streamfunction trig(2 pi m x / Lx) * Y(y) with
/// Y = yhat (1 - yhat) P_level(2 yhat - 1): e = (d/dy zeta, -d/dx zeta).
/// The Legendre weight keeps the profile family well conditioned for the
/// orthonormalization.
fn stream_mode(g: &Grid, m: usize, level: usize, cos_phase: bool) -> VectorField {
    let kx = 2.0 * std::f64::consts::PI * m as f64 / g.lx;
    VectorField::from_fn(g, |x, y| {
        let s = y / g.ly;
        let base = s * (1.0 - s);
        let t = 2.0 * s - 1.0;
        let (pl, dpl) = legendre(level, t);
        let prof = base * pl;
        let dprof = ((1.0 - 2.0 * s) * pl + base * 2.0 * dpl) / g.ly;
        let (trig, dtrig) = if cos_phase {
            ((kx * x).cos(), -kx * (kx * x).sin())
        } else {
            ((kx * x).sin(), kx * (kx * x).cos())
        };
        (trig * dprof, -dtrig * prof)
    })
}

fn orthonormalize(g: &Grid, raw: Vec<VectorField>, want: usize) -> Result<Vec<VectorField>> {
    let mut basis: Vec<VectorField> = Vec::with_capacity(want);
    for mut cand in raw {
        if basis.len() == want {
            break;
        }
        for b in &basis {
            let c = inner_vec(g, &cand, b);
            for i in 0..cand.ux.len() {
                cand.ux[i] -= c * b.ux[i];
                cand.uy[i] -= c * b.uy[i];
            }
        }
        let n = norm_sq_vec(g, &cand).sqrt();
        if n < 1e-10 {
            continue;
        }
        for v in cand.ux.iter_mut().chain(cand.uy.iter_mut()) {
            *v /= n;
        }
        basis.push(cand);
    }
    if basis.len() < want {
        return Err(SchnsError::Parameter(format!(
            "mode family degenerate: built {} of {want} modes",
            basis.len()
        )));
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::divergence;
    use approx::assert_relative_eq;

    fn grid() -> Grid {
        Grid::new(32, 32, 1.0, 1.0).unwrap()
    }

    fn model(g: &Grid) -> NoiseModel {
        NoiseModel::build(g, &NoiseParams::default()).unwrap()
    }

    fn rand_vec(g: &Grid, seed: u64) -> VectorField {
        let mut s = seed;
        let mut next = move || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        VectorField {
            ux: (0..g.n_cells()).map(|_| next()).collect(),
            uy: (0..g.n_cells()).map(|_| next()).collect(),
        }
    }

    #[test]
    fn modes_are_orthonormal() {
        let g = grid();
        let m = model(&g);
        assert_eq!(m.k_modes(), 16);
        for a in 0..m.k_modes() {
            for b in a..m.k_modes() {
                let ip = inner_vec(&g, &m.modes[a], &m.modes[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (ip - expect).abs() < 1e-10,
                    "modes {a},{b}: inner product {ip}"
                );
            }
        }
        assert!(m.sigma_sq_sum.is_finite() && m.sigma_sq_sum > 0.0);
    }

    #[test]
    fn modes_have_small_discrete_divergence_and_wall_flux() {
        // the streamfunction samples are analytically divergence free, so
        // away from the adjoint-closure wall rows the discrete divergence
        // refines at second order
        let div_worst = |n: usize| -> f64 {
            let g = Grid::new(n, n, 1.0, 1.0).unwrap();
            let m = model(&g);
            let mut worst = 0.0_f64;
            for e in &m.modes {
                let d = divergence(&g, e).unwrap();
                for j in 3..g.ny - 3 {
                    for i in 0..g.nx {
                        worst = worst.max(d.data[g.idx(i, j)].abs());
                    }
                }
            }
            worst
        };
        let (d32, d64, d128) = (div_worst(32), div_worst(64), div_worst(128));
        assert!(d64 < 0.5 * d32, "divergence not refining: {d32} {d64}");
        assert!(d128 < 0.5 * d64, "divergence not refining: {d64} {d128}");

        // the wall-face normal velocity (extrapolated) vanishes with the
        // profile: small compared to the mode's own amplitude
        let g = grid();
        let m = model(&g);
        for e in &m.modes {
            let max_uy = e.uy.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let uy_field = crate::grid::ScalarField { data: e.uy.clone() };
            let tr = crate::grid::trace(&g, &uy_field).unwrap();
            for i in 0..g.nx {
                assert!(tr.bottom[i].abs() <= g.hy * max_uy, "{}", tr.bottom[i]);
                assert!(tr.top[i].abs() <= g.hy * max_uy, "{}", tr.top[i]);
            }
        }
    }

    #[test]
    fn increments_zero_for_zero_dt() {
        let g = grid();
        let m = model(&g);
        let mut rng = path_rng(1, 0);
        let inc = sample_increments(&m, 0.0, &mut rng).unwrap();
        assert!(inc.dw.iter().all(|v| *v == 0.0));
        assert!(sample_increments(&m, -1.0, &mut rng).is_err());
    }

    #[test]
    fn increment_variance_matches_dt() {
        let g = grid();
        let m = model(&g);
        let mut rng = path_rng(7, 0);
        let dt = 0.37;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let inc = sample_increments(&m, dt, &mut rng).unwrap();
            sum += inc.dw[0];
            sum_sq += inc.dw[0] * inc.dw[0];
        }
        let var = sum_sq / n as f64 - (sum / n as f64).powi(2);
        assert!(
            var > 0.98 * dt && var < 1.02 * dt,
            "sample variance {var} vs dt {dt}"
        );
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let g = grid();
        let m = model(&g);
        let mut a = path_rng(42, 3);
        let mut b = path_rng(42, 3);
        for _ in 0..10 {
            let ia = sample_increments(&m, 1e-3, &mut a).unwrap();
            let ib = sample_increments(&m, 1e-3, &mut b).unwrap();
            assert_eq!(ia, ib);
        }
        let mut c = path_rng(42, 4);
        let ic = sample_increments(&m, 1e-3, &mut c).unwrap();
        let ia = sample_increments(&m, 1e-3, &mut a).unwrap();
        assert_ne!(ia, ic);
    }

    #[test]
    fn apply_h_zero_and_linearity() {
        let g = grid();
        let m = model(&g);
        let mut rng = path_rng(5, 0);
        let inc = sample_increments(&m, 1e-2, &mut rng).unwrap();
        let zero = VectorField::zeros(&g);
        let out = apply_h(&m, &zero, &zero, &inc).unwrap();
        assert!(norm_sq_vec(&g, &out) == 0.0);

        let u = rand_vec(&g, 1);
        let w = rand_vec(&g, 2);
        let h1 = apply_h(&m, &u, &w, &inc).unwrap();
        let u2 = VectorField {
            ux: u.ux.iter().map(|v| 2.0 * v).collect(),
            uy: u.uy.iter().map(|v| 2.0 * v).collect(),
        };
        let w2 = VectorField {
            ux: w.ux.iter().map(|v| 2.0 * v).collect(),
            uy: w.uy.iter().map(|v| 2.0 * v).collect(),
        };
        let h2 = apply_h(&m, &u2, &w2, &inc).unwrap();
        for i in 0..g.n_cells() {
            assert_relative_eq!(h2.ux[i], 2.0 * h1.ux[i], epsilon = 1e-14, max_relative = 1e-12);
            assert_relative_eq!(h2.uy[i], 2.0 * h1.uy[i], epsilon = 1e-14, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_mode_closed_form() {
        let g = grid();
        // constant unit-norm mode: e = (a, a) with 2 a^2 |D| = 1
        let a = (1.0 / (2.0 * g.domain_volume())).sqrt();
        let e = VectorField {
            ux: vec![a; g.n_cells()],
            uy: vec![a; g.n_cells()],
        };
        let m = NoiseModel::with_modes(&g, vec![e], vec![1.0], 1.0, 0.0).unwrap();
        let u = VectorField {
            ux: vec![1.0; g.n_cells()],
            uy: vec![0.0; g.n_cells()],
        };
        let zero = VectorField::zeros(&g);
        let inc = NoiseIncrement {
            dw: vec![0.3],
            dt: 1.0,
        };
        let out = apply_h(&m, &u, &zero, &inc).unwrap();
        for i in 0..g.n_cells() {
            assert_relative_eq!(out.ux[i], 0.3 * a, max_relative = 1e-14);
            assert_eq!(out.uy[i], 0.0);
        }
    }

    #[test]
    fn mode_count_mismatch_rejected() {
        let g = grid();
        let m = model(&g);
        let inc = NoiseIncrement {
            dw: vec![0.0; 3],
            dt: 0.1,
        };
        let z = VectorField::zeros(&g);
        assert!(apply_h(&m, &z, &z, &inc).is_err());
    }

    #[test]
    fn linear_growth_bound_holds() {
        let g = grid();
        let m = model(&g);
        let zero = VectorField::zeros(&g);
        assert!(hs_norm_sq(&g, &m, &zero, &zero) <= m.a1_constant);
        for trial in 0..20 {
            let u = rand_vec(&g, 100 + trial);
            let w = rand_vec(&g, 200 + trial);
            let hs = hs_norm_sq(&g, &m, &u, &w);
            let bound = m.a1_constant * (1.0 + norm_sq_vec(&g, &u) + norm_sq_vec(&g, &w));
            assert!(hs <= bound * (1.0 + 1e-10), "hs {hs} vs bound {bound}");
        }
    }

    #[test]
    fn lipschitz_identity_exact_by_linearity() {
        let g = grid();
        let m = model(&g);
        for trial in 0..20 {
            let u1 = rand_vec(&g, 300 + trial);
            let u2 = rand_vec(&g, 400 + trial);
            let w1 = rand_vec(&g, 500 + trial);
            let w2 = rand_vec(&g, 600 + trial);
            let du = VectorField {
                ux: u1.ux.iter().zip(&u2.ux).map(|(a, b)| a - b).collect(),
                uy: u1.uy.iter().zip(&u2.uy).map(|(a, b)| a - b).collect(),
            };
            let dw = VectorField {
                ux: w1.ux.iter().zip(&w2.ux).map(|(a, b)| a - b).collect(),
                uy: w1.uy.iter().zip(&w2.uy).map(|(a, b)| a - b).collect(),
            };
            let hs_diff = hs_norm_sq(&g, &m, &du, &dw);
            let bound = m.a1_constant * (norm_sq_vec(&g, &du) + norm_sq_vec(&g, &dw));
            assert!(hs_diff <= bound * (1.0 + 1e-10) + 1e-30);
        }
    }

    #[test]
    fn fused_stats_match_separate_evaluations() {
        let g = grid();
        let m = model(&g);
        let u = rand_vec(&g, 900);
        let w = rand_vec(&g, 901);
        let mut rng = path_rng(33, 0);
        let inc = sample_increments(&m, 1e-3, &mut rng).unwrap();
        let (eta, hs, q_u, q_g) = apply_h_with_stats(&g, &m, &u, &w, &inc).unwrap();
        let eta_ref = apply_h(&m, &u, &w, &inc).unwrap();
        for i in 0..g.n_cells() {
            assert_relative_eq!(eta.ux[i], eta_ref.ux[i], epsilon = 1e-15, max_relative = 1e-12);
            assert_relative_eq!(eta.uy[i], eta_ref.uy[i], epsilon = 1e-15, max_relative = 1e-12);
        }
        assert_relative_eq!(hs, hs_norm_sq(&g, &m, &u, &w), max_relative = 1e-13);
        let q = pairing_sq_sums(&g, &m, &u, &w, &[&u, &w]);
        assert_relative_eq!(q_u, q[0], max_relative = 1e-12);
        assert_relative_eq!(q_g, q[1], max_relative = 1e-12);
    }

    #[test]
    fn ito_isometry_monte_carlo() {
        let g = grid();
        let m = model(&g);
        // frozen fields and test function
        let u = rand_vec(&g, 11);
        let w = rand_vec(&g, 12);
        let v = rand_vec(&g, 13);
        // exact variance of <int_0^t h dW, v>: t * sum_k <h_k, v>^2
        let t_end = 1.0;
        let exact = pairing_sq_sums(&g, &m, &u, &w, &[&v])[0] * t_end;
        let n_paths = 10_000;
        let n_steps = 4;
        let dt = t_end / n_steps as f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for path in 0..n_paths {
            let mut rng = path_rng(2024, path);
            let mut x = 0.0;
            for _ in 0..n_steps {
                let inc = sample_increments(&m, dt, &mut rng).unwrap();
                let h = apply_h(&m, &u, &w, &inc).unwrap();
                x += inner_vec(&g, &h, &v);
            }
            sum += x;
            sum_sq += x * x;
        }
        let var = sum_sq / n_paths as f64 - (sum / n_paths as f64).powi(2);
        assert!(
            (var - exact).abs() <= 0.05 * exact,
            "MC variance {var} vs exact {exact}"
        );
    }
}
