//! Linear solvers: conjugate gradient for the SPD velocity systems, and
//! direct x-spectral solvers for the pressure Poisson problem and the
//! coupled phase-field update.
//!
//! Every implicit operator in this crate has constant coefficients in x on
//! a periodic grid, so a row FFT decouples it into independent small systems
//! over the wall-to-wall direction, one per x-wavenumber. Those systems are
//! LU-factored once and reused every step, which keeps solves exact to
//! rounding (no iteration tolerance in the mass or divergence budgets).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SchnsError};
use crate::grid::{divergence, gradient, Grid, ScalarField, VectorField};

// ---------------------------------------------------------------------------
// conjugate gradient
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Plain conjugate gradient for SPD operators given as a closure.
///
/// Converges to relative residual `tol` (measured against ||b||); returns a
/// solver error with the residual if the iteration cap is hit first.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    context: &str,
) -> Result<CgReport> {
    let n = b.len();
    assert_eq!(x.len(), n);
    let dot = |a: &[f64], c: &[f64]| -> f64 { a.iter().zip(c).map(|(p, q)| p * q).sum() };

    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(CgReport {
            iterations: 0,
            residual: 0.0,
        });
    }

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for k in 0..n {
        r[k] = b[k] - ap[k];
    }
    let mut p = r.clone();
    let mut rs = dot(&r, &r);

    for it in 0..max_iter {
        let res = rs.sqrt();
        if res <= tol * b_norm {
            return Ok(CgReport {
                iterations: it,
                residual: res,
            });
        }
        apply(&p, &mut ap);
        let alpha = rs / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    let res = rs.sqrt();
    if res <= tol * b_norm {
        Ok(CgReport {
            iterations: max_iter,
            residual: res,
        })
    } else {
        Err(SchnsError::Solver {
            context: context.to_string(),
            residual: res / b_norm,
            iterations: max_iter,
        })
    }
}

// ---------------------------------------------------------------------------
// row FFT in x
// ---------------------------------------------------------------------------

/// Cached forward/inverse FFT plans for rows of length nx.
pub struct XTransform {
    pub nx: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl XTransform {
    pub fn new(nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
        }
    }

    /// Append the row FFTs of `data` (length a multiple of nx) to `spec`.
    pub fn append_forward(&self, data: &[f64], spec: &mut Vec<Complex<f64>>) {
        assert_eq!(data.len() % self.nx, 0);
        let start = spec.len();
        spec.extend(data.iter().map(|&v| Complex::new(v, 0.0)));
        let nrows = data.len() / self.nx;
        for r in 0..nrows {
            let lo = start + r * self.nx;
            self.fwd.process(&mut spec[lo..lo + self.nx]);
        }
    }

    /// Inverse FFT each row of `spec` and write the real parts into `out`
    /// (normalized by nx). Lengths must match.
    pub fn inverse_into(&self, spec: &mut [Complex<f64>], out: &mut [f64]) {
        assert_eq!(spec.len(), out.len());
        assert_eq!(spec.len() % self.nx, 0);
        let scale = 1.0 / self.nx as f64;
        let nrows = spec.len() / self.nx;
        for r in 0..nrows {
            self.inv.process(&mut spec[r * self.nx..(r + 1) * self.nx]);
        }
        for (o, s) in out.iter_mut().zip(spec.iter()) {
            *o = s.re * scale;
        }
    }
}

// ---------------------------------------------------------------------------
// per-wavenumber LU systems
// ---------------------------------------------------------------------------

/// LU factorizations of a family of real n x n systems, one per x-wavenumber
/// k = 0..nx/2 (the matrix for k and nx-k coincides because every x-symbol
/// in this crate is even in k).
pub struct PerKSystems {
    nx: usize,
    n: usize,
    lus: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    pinned: Vec<bool>,
}

impl PerKSystems {
    /// Build and factor the per-k matrices. `build(k)` returns the system
    /// matrix for wavenumber k; `pin(k)` marks singular modes whose first
    /// row is replaced by a pin on the first unknown (the right-hand side is
    /// compatible for those modes, so pinning selects a valid representative).
    pub fn new(
        nx: usize,
        n: usize,
        build: impl Fn(usize) -> DMatrix<f64>,
        pin: impl Fn(usize) -> bool,
    ) -> Self {
        let mut lus = Vec::with_capacity(nx / 2 + 1);
        let mut pinned = Vec::with_capacity(nx / 2 + 1);
        for k in 0..=nx / 2 {
            let mut m = build(k);
            assert_eq!(m.nrows(), n);
            let is_pinned = pin(k);
            if is_pinned {
                for c in 0..n {
                    m[(0, c)] = if c == 0 { 1.0 } else { 0.0 };
                }
            }
            lus.push(m.lu());
            pinned.push(is_pinned);
        }
        Self { nx, n, lus, pinned }
    }

    /// Solve all wavenumber systems in place. `spectrum` holds n rows of nx
    /// complex values (row r = unknown index, column k = wavenumber).
    pub fn solve_all(&self, spectrum: &mut [Complex<f64>]) {
        assert_eq!(spectrum.len(), self.n * self.nx);
        let mut re = DVector::zeros(self.n);
        let mut im = DVector::zeros(self.n);
        for k in 0..self.nx {
            let kk = k.min(self.nx - k);
            for r in 0..self.n {
                let v = spectrum[r * self.nx + k];
                re[r] = v.re;
                im[r] = v.im;
            }
            if self.pinned[kk] {
                re[0] = 0.0;
                im[0] = 0.0;
            }
            let lu = &self.lus[kk];
            assert!(lu.solve_mut(&mut re), "per-k LU solve failed");
            assert!(lu.solve_mut(&mut im), "per-k LU solve failed");
            for r in 0..self.n {
                spectrum[r * self.nx + k] = Complex::new(re[r], im[r]);
            }
        }
    }
}

/// Probe the y-direction action of a grid operator that is constant in x.
///
/// `apply` maps an x-constant column profile to the operator output; the
/// columns of the returned matrix are its images of the y-basis vectors, so
/// the matrix is exactly the operator's y-part (consistent with grid.rs by
/// construction).
pub fn probe_y_matrix(ny: usize, rows: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, ny);
    let mut e = vec![0.0; ny];
    for c in 0..ny {
        e[c] = 1.0;
        let col = apply(&e);
        assert_eq!(col.len(), rows);
        for r in 0..rows {
            m[(r, c)] = col[r];
        }
        e[c] = 0.0;
    }
    m
}

// ---------------------------------------------------------------------------
// pressure Poisson solver
// ---------------------------------------------------------------------------

/// Direct solver for div(grad q) = rhs with the crate's adjoint-pair
/// divergence/gradient (Neumann-type closure), periodic in x.
pub struct PoissonSolver {
    xt: XTransform,
    systems: PerKSystems,
    ny: usize,
}

impl PoissonSolver {
    pub fn new(g: &Grid) -> Self {
        // y-part of div(grad .) probed through the real operators on
        // x-constant fields
        let my = probe_y_matrix(g.ny, g.ny, |col| {
            let f = ScalarField {
                data: col
                    .iter()
                    .flat_map(|&v| std::iter::repeat(v).take(g.nx))
                    .collect(),
            };
            let lap = divergence(g, &gradient(g, &f).unwrap()).unwrap();
            (0..g.ny).map(|j| lap.data[g.idx(0, j)]).collect()
        });
        let nx = g.nx;
        let hx = g.hx;
        let systems = PerKSystems::new(
            nx,
            g.ny,
            |k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / nx as f64;
                let sym = -(theta.sin() / hx).powi(2);
                let mut m = my.clone();
                for d in 0..g.ny {
                    m[(d, d)] += sym;
                }
                m
            },
            |k| k == 0 || (nx % 2 == 0 && k == nx / 2),
        );
        Self {
            xt: XTransform::new(g.nx),
            systems,
            ny: g.ny,
        }
    }

    /// Solve for q given the divergence right-hand side.
    pub fn solve(&self, rhs: &ScalarField) -> ScalarField {
        let mut spec = Vec::with_capacity(self.ny * self.xt.nx);
        self.xt.append_forward(&rhs.data, &mut spec);
        self.systems.solve_all(&mut spec);
        let mut out = vec![0.0; rhs.data.len()];
        self.xt.inverse_into(&mut spec, &mut out);
        ScalarField { data: out }
    }
}

/// Remove the discrete-gradient component of a velocity field:
/// out = v - grad q with div(grad q) = div v. The output's divergence
/// vanishes to rounding and the output is L2-orthogonal to every discrete
/// gradient.
pub fn project_divergence_free(
    g: &Grid,
    solver: &PoissonSolver,
    v: &VectorField,
) -> Result<VectorField> {
    let div_v = divergence(g, v)?;
    let q = solver.solve(&div_v);
    let gq = gradient(g, &q)?;
    Ok(VectorField {
        ux: v.ux.iter().zip(&gq.ux).map(|(a, b)| a - b).collect(),
        uy: v.uy.iter().zip(&gq.uy).map(|(a, b)| a - b).collect(),
    })
}
