//! Manufactured-solution convergence of the two substeps: second order in
//! the cell size, first order in the time step.

mod common;

use common::{ch_dt_error, ch_error, fitted_order, stokes_dt_error, stokes_error};

#[test]
fn stokes_substep_second_order_in_h() {
    // dt scales with h^2 so the time error refines at the same rate
    let mut scales = Vec::new();
    let mut errors = Vec::new();
    for n in [32usize, 64, 128] {
        let dt = 0.64 / (n * n) as f64;
        let e = stokes_error(n, dt, 0.04);
        scales.push(1.0 / n as f64);
        errors.push(e);
    }
    let order = fitted_order(&scales, &errors);
    assert!(
        (1.8..=2.2).contains(&order),
        "stokes h-order {order:.3}, errors {errors:?}"
    );
}

#[test]
fn stokes_substep_first_order_in_dt() {
    let mut scales = Vec::new();
    let mut errors = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let e = stokes_dt_error(64, dt, 1.25e-4, 0.2);
        scales.push(dt);
        errors.push(e);
    }
    let order = fitted_order(&scales, &errors);
    assert!(order >= 0.9, "stokes dt-order {order:.3}, errors {errors:?}");
}

#[test]
fn ch_substep_second_order_in_h() {
    let mut scales = Vec::new();
    let mut errors_phi = Vec::new();
    let mut errors_psi = Vec::new();
    for n in [32usize, 64, 128] {
        let dt = 0.64 / (n * n) as f64;
        let (ep, es) = ch_error(n, dt, 0.04);
        scales.push(1.0 / n as f64);
        errors_phi.push(ep);
        errors_psi.push(es);
    }
    let order_phi = fitted_order(&scales, &errors_phi);
    let order_psi = fitted_order(&scales, &errors_psi);
    assert!(
        (1.8..=2.2).contains(&order_phi),
        "phi h-order {order_phi:.3}, errors {errors_phi:?}"
    );
    assert!(
        order_psi >= 1.8,
        "psi h-order {order_psi:.3}, errors {errors_psi:?}"
    );
}

#[test]
fn ch_substep_first_order_in_dt() {
    let mut scales = Vec::new();
    let mut errors = Vec::new();
    for dt in [2e-3, 1e-3, 5e-4] {
        let e = ch_dt_error(64, dt, 6.25e-5, 0.04);
        scales.push(dt);
        errors.push(e);
    }
    let order = fitted_order(&scales, &errors);
    assert!(order >= 0.9, "ch dt-order {order:.3}, errors {errors:?}");
}
