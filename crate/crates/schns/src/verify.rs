//! Deterministic invariant suites behind the `verify` CLI command.
//!
//! Hermetic by construction: fixed seeds, no wall clock, no network. Each
//! suite prints one `ok`/`FAIL` line; the caller turns failures into a
//! nonzero exit code.

use crate::diagnostics::energy;
use crate::dynamics::{RngSource, SchemeParams, Stepper};
use crate::grid::{
    divergence, gradient, inner, inner_vec, linf_scalar, mean, norm_sq, norm_sq_vec, Grid,
    ScalarField, VectorField,
};
use crate::init::InitialCondition;
use crate::mollifier::mollify;
use crate::noise::{hs_norm_sq, path_rng, NoiseModel, NoiseParams};
use crate::potentials::Potentials;
use crate::regularization::CutoffParams;

struct Suite {
    name: &'static str,
    run: fn() -> Result<(), String>,
}

fn rand_scalar(g: &Grid, seed: u64) -> ScalarField {
    let mut s = seed;
    let mut next = move || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    ScalarField {
        data: (0..g.n_cells()).map(|_| next()).collect(),
    }
}

fn rand_vector(g: &Grid, seed: u64) -> VectorField {
    let a = rand_scalar(g, seed);
    let b = rand_scalar(g, seed ^ 0x9e3779b97f4a7c15);
    VectorField {
        ux: a.data,
        uy: b.data,
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn suite_grid_adjointness() -> Result<(), String> {
    for n in [16usize, 32, 64] {
        let g = Grid::new(n, n, 1.0, 1.0).map_err(|e| e.to_string())?;
        let f = rand_scalar(&g, 11 + n as u64);
        let v = rand_vector(&g, 17 + n as u64);
        let gf = gradient(&g, &f).map_err(|e| e.to_string())?;
        let dv = divergence(&g, &v).map_err(|e| e.to_string())?;
        let defect = inner_vec(&g, &gf, &v) + inner(&g, &f, &dv);
        let scale = norm_sq(&g, &f).sqrt() * norm_sq_vec(&g, &v).sqrt();
        check(
            defect.abs() <= 1e-10 * scale,
            format!("adjointness defect {defect:.3e} at {n}x{n}"),
        )?;
    }
    Ok(())
}

fn suite_potentials() -> Result<(), String> {
    let p = Potentials::double_well();
    check(p.f(0.0) == 0.0 && p.g(0.0) == 0.0, "zero conditions")?;
    let h = 1e-6;
    for k in 0..600 {
        let r = -3.0 + 0.01 * k as f64;
        let fd = (p.big_f(r + h) - p.big_f(r - h)) / (2.0 * h);
        check(
            (fd - p.f(r)).abs() <= 1e-6 * (1.0 + p.f(r).abs()),
            format!("F' mismatch at r = {r}"),
        )?;
        check(p.big_f(r) >= -p.c2_bulk - 1e-12, "bulk floor")?;
        check(p.big_g(r) >= -p.c2_boundary - 1e-12, "boundary floor")?;
    }
    let eps = 0.5;
    let c = p.f_eps_lipschitz(eps).map_err(|e| e.to_string())?;
    for k in 0..2000 {
        let a = -6.0 + 0.006 * k as f64;
        let b = a + 0.003;
        let lhs = (p.f_eps(a, eps).unwrap() - p.f_eps(b, eps).unwrap()).abs();
        check(
            lhs <= c * (a - b).abs() * (1.0 + 1e-10) + 1e-12,
            "Lipschitz bound",
        )?;
    }
    Ok(())
}

fn suite_mollifier() -> Result<(), String> {
    for n in [32usize, 64] {
        let g = Grid::new(n, n, 1.0, 1.0).map_err(|e| e.to_string())?;
        let f = rand_scalar(&g, 5);
        let out = mollify(&g, &f, 4.0 * g.hx).map_err(|e| e.to_string())?;
        check(
            (mean(&g, &out) - mean(&g, &f)).abs() < 1e-12,
            "mean preservation",
        )?;
        check(
            norm_sq(&g, &out) <= norm_sq(&g, &f) * (1.0 + 1e-12),
            "non-expansive",
        )?;
        let smooth = ScalarField::from_fn(&g, |x, _| (2.0 * std::f64::consts::PI * x).sin());
        let mut prev = f64::INFINITY;
        for eps in [8.0 * g.hx, 4.0 * g.hx, 2.0 * g.hx] {
            let m = mollify(&g, &smooth, eps).map_err(|e| e.to_string())?;
            let d: f64 = m
                .data
                .iter()
                .zip(&smooth.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            check(d < prev, "monotone eps ladder")?;
            prev = d;
        }
    }
    Ok(())
}

fn suite_noise_assumptions() -> Result<(), String> {
    let g = Grid::new(32, 32, 1.0, 1.0).map_err(|e| e.to_string())?;
    let m = NoiseModel::build(&g, &NoiseParams::default()).map_err(|e| e.to_string())?;
    for trial in 0..20 {
        let u = rand_vector(&g, 100 + trial);
        let w = rand_vector(&g, 200 + trial);
        let hs = hs_norm_sq(&g, &m, &u, &w);
        let bound = m.a1_constant * (1.0 + norm_sq_vec(&g, &u) + norm_sq_vec(&g, &w));
        check(hs <= bound * (1.0 + 1e-10), "linear growth bound")?;
    }
    Ok(())
}

fn small_stepper(cutoff: CutoffParams, noise: bool) -> Result<(Stepper, InitialCondition), String> {
    let g = Grid::new(32, 32, 1.0, 1.0).map_err(|e| e.to_string())?;
    let params = SchemeParams {
        dt: 2e-4,
        epsilon: 0.0,
        delta: 1e-3,
        cutoff,
        ..SchemeParams::default()
    };
    let noise_model = if noise {
        Some(NoiseModel::build(&g, &NoiseParams::default()).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let stepper = Stepper::new(g, params, Potentials::double_well(), noise_model)
        .map_err(|e| e.to_string())?;
    Ok((stepper, InitialCondition::default()))
}

fn run_steps(
    stepper: &Stepper,
    ic: &InitialCondition,
    steps: usize,
    seed: u64,
) -> Result<(Vec<crate::dynamics::StepRecord>, crate::dynamics::State), String> {
    let (u0, phi0) = crate::init::build(&stepper.grid, ic);
    let mut state = stepper.initial_state(&u0, &phi0).map_err(|e| e.to_string())?;
    let mut rng = path_rng(seed, 0);
    let mut recs = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut source = RngSource { rng: &mut rng };
        recs.push(
            stepper
                .full_step(&mut state, &mut source)
                .map_err(|e| e.to_string())?,
        );
    }
    Ok((recs, state))
}

fn suite_cutoff_neutrality() -> Result<(), String> {
    let (free, ic) = small_stepper(CutoffParams::disabled(), true)?;
    let (recs, final_free) = run_steps(&free, &ic, 50, 99)?;
    let max_norm = recs
        .iter()
        .map(|r| crate::regularization::combined_norm(r.u_norm, r.v1_norm))
        .fold(0.0_f64, f64::max);
    let (capped, _) = small_stepper(
        CutoffParams::new(10.0 * max_norm.max(1.0)).map_err(|e| e.to_string())?,
        true,
    )?;
    let (_, final_capped) = run_steps(&capped, &ic, 50, 99)?;
    check(
        final_free == final_capped,
        "large cut-off radius must reproduce the disabled run bit-identically",
    )
}

fn suite_energy_law() -> Result<(), String> {
    let (stepper, ic) = small_stepper(CutoffParams::disabled(), false)?;
    let (u0, phi0) = crate::init::build(&stepper.grid, &ic);
    let mut state = stepper
        .initial_state(&u0, &phi0)
        .map_err(|e| e.to_string())?;
    {
        let mut rng = path_rng(1, 0);
        for _ in 0..100 {
            let mut source = RngSource { rng: &mut rng };
            stepper
                .full_step(&mut state, &mut source)
                .map_err(|e| e.to_string())?;
        }
    }
    let e0 = energy(
        &stepper.grid,
        &state,
        &stepper.potentials,
        stepper.params.epsilon,
        None,
    )
    .total;
    let mut dissipated = 0.0;
    let mut rng = path_rng(1, 0);
    for _ in 0..200 {
        let mut source = RngSource { rng: &mut rng };
        let rec = stepper
            .full_step(&mut state, &mut source)
            .map_err(|e| e.to_string())?;
        dissipated += stepper.params.dt * rec.dissipation();
    }
    let e_end = energy(
        &stepper.grid,
        &state,
        &stepper.potentials,
        stepper.params.epsilon,
        None,
    )
    .total;
    let defect = (e_end + dissipated - e0).abs();
    check(
        defect <= 0.02 * e0.max(1.0),
        format!("energy defect {defect:.3e} vs budget {:.3e}", 0.02 * e0.max(1.0)),
    )
}

fn suite_mass_conservation() -> Result<(), String> {
    let (stepper, ic) = small_stepper(CutoffParams::disabled(), true)?;
    let (u0, phi0) = crate::init::build(&stepper.grid, &ic);
    let mut state = stepper
        .initial_state(&u0, &phi0)
        .map_err(|e| e.to_string())?;
    let m0 = mean(&stepper.grid, &state.phi);
    let mut rng = path_rng(7, 0);
    for step in 0..200 {
        let mut source = RngSource { rng: &mut rng };
        let rec = stepper
            .full_step(&mut state, &mut source)
            .map_err(|e| e.to_string())?;
        check(
            (rec.mass - m0).abs() <= 1e-9,
            format!("mass drift {:.3e} at step {step}", rec.mass - m0),
        )?;
    }
    Ok(())
}

fn suite_divergence_control() -> Result<(), String> {
    let (stepper, ic) = small_stepper(CutoffParams::disabled(), true)?;
    let (recs, final_state) = run_steps(&stepper, &ic, 100, 3)?;
    for (k, r) in recs.iter().enumerate() {
        check(
            r.div_inf <= stepper.params.div_tol,
            format!("divergence {:.3e} at step {k}", r.div_inf),
        )?;
    }
    let d = divergence(&stepper.grid, &final_state.u).map_err(|e| e.to_string())?;
    check(linf_scalar(&d) <= stepper.params.div_tol, "final divergence")
}

pub fn run_all(quiet: bool) -> usize {
    let suites = [
        Suite {
            name: "grid adjointness",
            run: suite_grid_adjointness,
        },
        Suite {
            name: "potentials",
            run: suite_potentials,
        },
        Suite {
            name: "mollifier",
            run: suite_mollifier,
        },
        Suite {
            name: "noise assumptions",
            run: suite_noise_assumptions,
        },
        Suite {
            name: "cut-off neutrality",
            run: suite_cutoff_neutrality,
        },
        Suite {
            name: "energy law",
            run: suite_energy_law,
        },
        Suite {
            name: "mass conservation",
            run: suite_mass_conservation,
        },
        Suite {
            name: "divergence control",
            run: suite_divergence_control,
        },
    ];
    let mut failures = 0;
    for s in suites {
        match (s.run)() {
            Ok(()) => {
                if !quiet {
                    println!("ok {}", s.name);
                }
            }
            Err(msg) => {
                failures += 1;
                println!("FAIL {}: {msg}", s.name);
            }
        }
    }
    failures
}
