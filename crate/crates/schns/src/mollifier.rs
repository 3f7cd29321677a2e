//! Smoothing by discrete convolution.
//!
//! The kernel is a truncated, renormalized Gaussian applied separably:
//! periodic wrap in x, even reflection at the walls in y (the
//! extension-restriction closure). Folding an even kernel at a reflecting
//! boundary keeps the 1D smoothing matrix symmetric and doubly stochastic,
//! so the operator is non-expansive in L2 and preserves the mean exactly.

use crate::error::{Result, SchnsError};
use crate::grid::{BoundaryField, Grid, ScalarField, VectorField};

/// Normalized 1D smoothing kernel.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    pub eps: f64,
    pub half_width: usize,
    pub weights: Vec<f64>,
}

impl MollifierKernel {
    /// Build the kernel for smoothing radius `eps` on spacing `h`.
    ///
    /// `half_width * h >= eps`, the Gaussian scale is eps/2, and the weights
    /// are renormalized to sum to one.
    pub fn new(eps: f64, h: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(SchnsError::Parameter(format!(
                "mollifier needs eps > 0, got {eps}"
            )));
        }
        let half_width = (eps / h).ceil() as usize;
        let sigma = (eps / 2.0).max(h * 0.5);
        let mut weights = Vec::with_capacity(2 * half_width + 1);
        for d in -(half_width as isize)..=(half_width as isize) {
            let r = d as f64 * h;
            weights.push((-0.5 * (r / sigma) * (r / sigma)).exp());
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self {
            eps,
            half_width,
            weights,
        })
    }
}

/// Convolve one periodic line in place of `out`.
fn convolve_periodic(kernel: &MollifierKernel, line: &[f64], out: &mut [f64]) {
    let n = line.len() as isize;
    let hw = kernel.half_width as isize;
    for i in 0..n {
        let mut acc = 0.0;
        for d in -hw..=hw {
            let mut j = i + d;
            j = j.rem_euclid(n);
            acc += kernel.weights[(d + hw) as usize] * line[j as usize];
        }
        out[i as usize] = acc;
    }
}

/// Convolve one wall-to-wall column with even reflection at both ends.
fn convolve_reflect(kernel: &MollifierKernel, col: &[f64], out: &mut [f64]) {
    let n = col.len() as isize;
    let hw = kernel.half_width as isize;
    for i in 0..n {
        let mut acc = 0.0;
        for d in -hw..=hw {
            let mut j = i + d;
            // even reflection about the cell-centered boundary: -1 -> 0,
            // n -> n-1 (period 2n)
            loop {
                if j < 0 {
                    j = -j - 1;
                } else if j >= n {
                    j = 2 * n - 1 - j;
                } else {
                    break;
                }
            }
            acc += kernel.weights[(d + hw) as usize] * col[j as usize];
        }
        out[i as usize] = acc;
    }
}

/// Interior mollifier: periodic in x, even reflection in y.
pub fn mollify(g: &Grid, f: &ScalarField, eps: f64) -> Result<ScalarField> {
    let kx = MollifierKernel::new(eps, g.hx)?;
    let ky = MollifierKernel::new(eps, g.hy)?;
    Ok(mollify_with(g, f, &kx, &ky))
}

pub fn mollify_with(g: &Grid, f: &ScalarField, kx: &MollifierKernel, ky: &MollifierKernel) -> ScalarField {
    let mut stage = vec![0.0; g.n_cells()];
    // x pass, row by row
    let mut row_out = vec![0.0; g.nx];
    for j in 0..g.ny {
        let row = &f.data[j * g.nx..(j + 1) * g.nx];
        convolve_periodic(kx, row, &mut row_out);
        stage[j * g.nx..(j + 1) * g.nx].copy_from_slice(&row_out);
    }
    // y pass, column by column
    let mut col = vec![0.0; g.ny];
    let mut col_out = vec![0.0; g.ny];
    let mut out = vec![0.0; g.n_cells()];
    for i in 0..g.nx {
        for j in 0..g.ny {
            col[j] = stage[g.idx(i, j)];
        }
        convolve_reflect(ky, &col, &mut col_out);
        for j in 0..g.ny {
            out[g.idx(i, j)] = col_out[j];
        }
    }
    ScalarField { data: out }
}

/// Componentwise mollification of a velocity field.
pub fn mollify_vector(g: &Grid, v: &VectorField, eps: f64) -> Result<VectorField> {
    let kx = MollifierKernel::new(eps, g.hx)?;
    let ky = MollifierKernel::new(eps, g.hy)?;
    Ok(mollify_vector_with(g, v, &kx, &ky))
}

pub fn mollify_vector_with(
    g: &Grid,
    v: &VectorField,
    kx: &MollifierKernel,
    ky: &MollifierKernel,
) -> VectorField {
    let ux = mollify_with(
        g,
        &ScalarField {
            data: v.ux.clone(),
        },
        kx,
        ky,
    );
    let uy = mollify_with(
        g,
        &ScalarField {
            data: v.uy.clone(),
        },
        kx,
        ky,
    );
    VectorField {
        ux: ux.data,
        uy: uy.data,
    }
}

/// Boundary mollifier: 1D periodic convolution along each wall.
pub fn mollify_boundary(g: &Grid, b: &BoundaryField, eps: f64) -> Result<BoundaryField> {
    let kx = MollifierKernel::new(eps, g.hx)?;
    Ok(mollify_boundary_with(g, b, &kx))
}

pub fn mollify_boundary_with(g: &Grid, b: &BoundaryField, kx: &MollifierKernel) -> BoundaryField {
    let _ = g;
    let mut bottom = vec![0.0; b.bottom.len()];
    let mut top = vec![0.0; b.top.len()];
    convolve_periodic(kx, &b.bottom, &mut bottom);
    convolve_periodic(kx, &b.top, &mut top);
    BoundaryField { bottom, top }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{
        h1_seminorm_sq_boundary, h1_seminorm_sq_neumann, mean, norm_sq, norm_sq_boundary,
    };
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 1.0).unwrap()
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

    #[test]
    fn kernel_invariants() {
        let g = grid(32);
        for eps in [2.0 * g.hx, 4.0 * g.hx, 8.0 * g.hx] {
            let k = MollifierKernel::new(eps, g.hx).unwrap();
            assert!(k.weights.iter().all(|&w| w >= 0.0));
            let total: f64 = k.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            assert!(k.half_width as f64 * g.hx >= eps - 1e-15);
        }
        assert!(MollifierKernel::new(0.0, g.hx).is_err());
        assert!(MollifierKernel::new(-1.0, g.hx).is_err());
    }

    #[test]
    fn constant_preserved_exactly() {
        let g = grid(24);
        let f = ScalarField::from_fn(&g, |_, _| 2.75);
        let out = mollify(&g, &f, 4.0 * g.hx).unwrap();
        for v in &out.data {
            assert_relative_eq!(*v, 2.75, max_relative = 1e-13);
        }
    }

    #[test]
    fn l2_non_expansive_on_random_fields() {
        let g = grid(32);
        for trial in 0..10 {
            let f = rand_scalar(&g, 100 + trial);
            let out = mollify(&g, &f, 3.0 * g.hx).unwrap();
            assert!(norm_sq(&g, &out) <= norm_sq(&g, &f) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn eps_ladder_monotone_convergence() {
        let g = grid(64);
        let f = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin());
        let h = g.hx;
        let err = |eps: f64| {
            let out = mollify(&g, &f, eps).unwrap();
            let d = ScalarField {
                data: out
                    .data
                    .iter()
                    .zip(&f.data)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            norm_sq(&g, &d).sqrt()
        };
        let (e8, e4, e2) = (err(8.0 * h), err(4.0 * h), err(2.0 * h));
        assert!(e8 > e4 && e4 > e2, "{e8} {e4} {e2}");
    }

    #[test]
    fn four_point_ladder_strictly_decreasing() {
        let g = grid(64);
        let f = ScalarField::from_fn(&g, |x, y| (2.0 * PI * x).sin() + (PI * y).cos());
        let h = g.hx;
        let mut prev = f64::INFINITY;
        for eps in [8.0 * h, 4.0 * h, 2.0 * h, h] {
            let out = mollify(&g, &f, eps).unwrap();
            let d: f64 = out
                .data
                .iter()
                .zip(&f.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn mean_preserved() {
        let g = grid(32);
        let f = rand_scalar(&g, 7);
        let out = mollify(&g, &f, 5.0 * g.hx).unwrap();
        assert!((mean(&g, &out) - mean(&g, &f)).abs() < 1e-12);
    }

    #[test]
    fn smoothing_constant_stable_across_grids() {
        // || d2 (J_eps f) || <= C / eps * || d f ||, with C stable across
        // grid sizes 32..128 (within 20 percent of their midpoint)
        let mut cs = Vec::new();
        for n in [32usize, 64, 128] {
            let g = grid(n);
            let eps = 4.0 * g.hx;
            let mut worst: f64 = 0.0;
            for trial in 0..5 {
                let f = rand_scalar(&g, 300 + trial);
                let out = mollify(&g, &f, eps).unwrap();
                let d2 = crate::grid::laplacian_neumann(&g, &out).unwrap();
                let num = norm_sq(&g, &d2).sqrt();
                let den = h1_seminorm_sq_neumann(&g, &f).sqrt() / eps;
                worst = worst.max(num / den);
            }
            cs.push(worst);
        }
        let mid = (cs.iter().cloned().fold(f64::INFINITY, f64::min)
            + cs.iter().cloned().fold(0.0, f64::max))
            / 2.0;
        for c in &cs {
            assert!(
                (c - mid).abs() <= 0.2 * mid,
                "constants not stable: {cs:?}"
            );
        }
    }

    #[test]
    fn boundary_constant_and_spike() {
        let g = grid(32);
        let c = BoundaryField {
            bottom: vec![1.5; g.nx],
            top: vec![-0.5; g.nx],
        };
        let out = mollify_boundary(&g, &c, 4.0 * g.hx).unwrap();
        for v in &out.bottom {
            assert_relative_eq!(*v, 1.5, max_relative = 1e-13);
        }

        let mut spike = BoundaryField::zeros(&g);
        spike.bottom[10] = 1.0;
        let out = mollify_boundary(&g, &spike, 4.0 * g.hx).unwrap();
        let total: f64 = out.bottom.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(out.bottom[10] < 1.0 && out.bottom[10] > 0.0);
    }

    #[test]
    fn boundary_smoothing_gain() {
        let g = grid(32);
        let mut s = 9u64;
        let mut next = move || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let b = BoundaryField {
            bottom: (0..g.nx).map(|_| next()).collect(),
            top: (0..g.nx).map(|_| next()).collect(),
        };
        let out = mollify_boundary(&g, &b, 3.0 * g.hx).unwrap();
        assert!(h1_seminorm_sq_boundary(&g, &out) <= h1_seminorm_sq_boundary(&g, &b));
        assert!(norm_sq_boundary(&g, &out) <= norm_sq_boundary(&g, &b) * (1.0 + 1e-12));
    }
}
