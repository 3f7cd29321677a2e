//! Discrete channel domain and stencil operators.
//!
//! The domain is a rectangle [0,Lx) x [0,Ly], periodic in x, with solid
//! walls at y = 0 and y = Ly. Scalars and velocity components live at cell
//! centers (colocated), boundary quantities live at wall faces (one periodic
//! line of nx samples per wall).
//!
//! Sign/closure conventions used throughout the crate:
//! * `laplacian_neumann` closes y with mirror ghosts, so the discrete
//!   integral of the output is exactly zero (zero-flux closure).
//! * `laplacian_with_trace` closes y with face values taken from a
//!   `BoundaryField` via ghost = 2*psi - interior; this is the closure whose
//!   quadratic form matches `grad_form_sq`.
//! * `divergence` is the exact negative adjoint of `gradient` in the
//!   cell-volume inner product, which makes the Helmholtz projection
//!   orthogonal to discrete gradients at machine precision.
//! * Outward normals are -e_y at the bottom wall and +e_y at the top wall.

use crate::error::{Result, SchnsError};

/// Uniform rectangular grid for the periodic channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(SchnsError::UnsupportedGrid(format!(
                "need nx, ny >= 8, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0) {
            return Err(SchnsError::Parameter(format!(
                "physical extents must be positive, got lx = {lx}, ly = {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Cell volume (area in 2D).
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }

    /// |D| = Lx * Ly.
    pub fn domain_volume(&self) -> f64 {
        self.lx * self.ly
    }

    /// |Gamma| = 2 Lx (two walls).
    pub fn wall_measure(&self) -> f64 {
        2.0 * self.lx
    }

    /// x-coordinate of cell center i.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }

    /// y-coordinate of cell center j.
    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }

    #[inline]
    pub fn ip(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn im(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }
}

/// Cell-centered scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            data: vec![0.0; g.n_cells()],
        }
    }

    pub fn from_fn(g: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = vec![0.0; g.n_cells()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                data[g.idx(i, j)] = f(g.x(i), g.y(j));
            }
        }
        Self { data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check(&self, g: &Grid, what: &str) -> Result<()> {
        if self.data.len() != g.n_cells() {
            return Err(SchnsError::DimensionMismatch(format!(
                "{what}: field has {} entries, grid has {}",
                self.data.len(),
                g.n_cells()
            )));
        }
        Ok(())
    }
}

/// Colocated cell-centered velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl VectorField {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            ux: vec![0.0; g.n_cells()],
            uy: vec![0.0; g.n_cells()],
        }
    }

    pub fn from_fn(g: &Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut ux = vec![0.0; g.n_cells()];
        let mut uy = vec![0.0; g.n_cells()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (a, b) = f(g.x(i), g.y(j));
                ux[g.idx(i, j)] = a;
                uy[g.idx(i, j)] = b;
            }
        }
        Self { ux, uy }
    }

    pub fn is_finite(&self) -> bool {
        self.ux.iter().chain(self.uy.iter()).all(|v| v.is_finite())
    }

    fn check(&self, g: &Grid, what: &str) -> Result<()> {
        if self.ux.len() != g.n_cells() || self.uy.len() != g.n_cells() {
            return Err(SchnsError::DimensionMismatch(format!(
                "{what}: vector field size ({}, {}) does not match grid ({})",
                self.ux.len(),
                self.uy.len(),
                g.n_cells()
            )));
        }
        Ok(())
    }
}

/// One value per wall cell on each of the two walls, periodic in x.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
}

impl BoundaryField {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            bottom: vec![0.0; g.nx],
            top: vec![0.0; g.nx],
        }
    }

    pub fn from_fn(g: &Grid, f: impl Fn(f64, bool) -> f64) -> Self {
        let mut bottom = vec![0.0; g.nx];
        let mut top = vec![0.0; g.nx];
        for i in 0..g.nx {
            bottom[i] = f(g.x(i), false);
            top[i] = f(g.x(i), true);
        }
        Self { bottom, top }
    }

    pub fn is_finite(&self) -> bool {
        self.bottom
            .iter()
            .chain(self.top.iter())
            .all(|v| v.is_finite())
    }

    fn check(&self, g: &Grid, what: &str) -> Result<()> {
        if self.bottom.len() != g.nx || self.top.len() != g.nx {
            return Err(SchnsError::DimensionMismatch(format!(
                "{what}: boundary field size ({}, {}) does not match nx = {}",
                self.bottom.len(),
                self.top.len(),
                g.nx
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// stencil operators
// ---------------------------------------------------------------------------

/// 5-point Laplacian, periodic in x, homogeneous-Neumann mirror closure in y.
///
/// The discrete integral of the output vanishes exactly, so the Cahn-Hilliard
/// update built on this operator conserves mass to rounding.
pub fn laplacian_neumann(g: &Grid, f: &ScalarField) -> Result<ScalarField> {
    f.check(g, "laplacian_neumann")?;
    let mut out = vec![0.0; g.n_cells()];
    let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = f.data[g.idx(i, j)];
            let w = f.data[g.idx(g.im(i), j)];
            let e = f.data[g.idx(g.ip(i), j)];
            // mirror ghosts: f[-1] = f[0], f[ny] = f[ny-1]
            let s = if j == 0 { c } else { f.data[g.idx(i, j - 1)] };
            let n = if j + 1 == g.ny {
                c
            } else {
                f.data[g.idx(i, j + 1)]
            };
            out[g.idx(i, j)] = ax * (w - 2.0 * c + e) + ay * (s - 2.0 * c + n);
        }
    }
    Ok(ScalarField { data: out })
}

/// 5-point Laplacian whose y-closure pins the wall-face values to `psi`
/// through the ghost rule ghost = 2 psi - interior.
///
/// This is the bulk operator generated by `grad_form_sq`; together with
/// `normal_derivative_flux` it satisfies a discrete Green identity exactly.
pub fn laplacian_with_trace(g: &Grid, f: &ScalarField, psi: &BoundaryField) -> Result<ScalarField> {
    f.check(g, "laplacian_with_trace")?;
    psi.check(g, "laplacian_with_trace")?;
    let mut out = vec![0.0; g.n_cells()];
    let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = f.data[g.idx(i, j)];
            let w = f.data[g.idx(g.im(i), j)];
            let e = f.data[g.idx(g.ip(i), j)];
            let s = if j == 0 {
                2.0 * psi.bottom[i] - c
            } else {
                f.data[g.idx(i, j - 1)]
            };
            let n = if j + 1 == g.ny {
                2.0 * psi.top[i] - c
            } else {
                f.data[g.idx(i, j + 1)]
            };
            out[g.idx(i, j)] = ax * (w - 2.0 * c + e) + ay * (s - 2.0 * c + n);
        }
    }
    Ok(ScalarField { data: out })
}

/// Central-difference gradient; one-sided second-order stencils in y at the
/// wall-adjacent rows (exact on quadratics).
pub fn gradient(g: &Grid, f: &ScalarField) -> Result<VectorField> {
    f.check(g, "gradient")?;
    let mut gx = vec![0.0; g.n_cells()];
    let mut gy = vec![0.0; g.n_cells()];
    let cx = 0.5 / g.hx;
    let cy = 0.5 / g.hy;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            gx[k] = cx * (f.data[g.idx(g.ip(i), j)] - f.data[g.idx(g.im(i), j)]);
            gy[k] = if j == 0 {
                cy * (-3.0 * f.data[g.idx(i, 0)] + 4.0 * f.data[g.idx(i, 1)]
                    - f.data[g.idx(i, 2)])
            } else if j + 1 == g.ny {
                cy * (3.0 * f.data[g.idx(i, j)] - 4.0 * f.data[g.idx(i, j - 1)]
                    + f.data[g.idx(i, j - 2)])
            } else {
                cy * (f.data[g.idx(i, j + 1)] - f.data[g.idx(i, j - 1)])
            };
        }
    }
    Ok(VectorField { ux: gx, uy: gy })
}

/// Divergence as the exact negative adjoint of `gradient`:
/// <grad f, v> = -<f, div v> holds to rounding for all f, v.
///
/// Interior rows reduce to plain central differences; the rows near the
/// walls carry the transposed one-sided stencils.
pub fn divergence(g: &Grid, v: &VectorField) -> Result<ScalarField> {
    v.check(g, "divergence")?;
    let mut out = vec![0.0; g.n_cells()];
    let cx = 0.5 / g.hx;
    let cy = 0.5 / g.hy;
    // x part: transpose of the periodic central difference is its negative.
    for j in 0..g.ny {
        for i in 0..g.nx {
            out[g.idx(i, j)] = cx * (v.ux[g.idx(g.ip(i), j)] - v.ux[g.idx(g.im(i), j)]);
        }
    }
    // y part: scatter the transpose of each gradient row, negated.
    for i in 0..g.nx {
        for j in 0..g.ny {
            let w = v.uy[g.idx(i, j)];
            if j == 0 {
                out[g.idx(i, 0)] -= cy * (-3.0 * w);
                out[g.idx(i, 1)] -= cy * (4.0 * w);
                out[g.idx(i, 2)] -= cy * (-w);
            } else if j + 1 == g.ny {
                out[g.idx(i, j)] -= cy * (3.0 * w);
                out[g.idx(i, j - 1)] -= cy * (-4.0 * w);
                out[g.idx(i, j - 2)] -= cy * w;
            } else {
                out[g.idx(i, j + 1)] -= cy * w;
                out[g.idx(i, j - 1)] += cy * w;
            }
        }
    }
    Ok(ScalarField { data: out })
}

/// Periodic 3-point second difference along each wall.
pub fn boundary_laplacian(g: &Grid, b: &BoundaryField) -> Result<BoundaryField> {
    b.check(g, "boundary_laplacian")?;
    let a = 1.0 / (g.hx * g.hx);
    let lap_line = |line: &[f64]| -> Vec<f64> {
        let n = line.len();
        (0..n)
            .map(|i| {
                let l = line[if i == 0 { n - 1 } else { i - 1 }];
                let r = line[if i + 1 == n { 0 } else { i + 1 }];
                a * (l - 2.0 * line[i] + r)
            })
            .collect()
    };
    Ok(BoundaryField {
        bottom: lap_line(&b.bottom),
        top: lap_line(&b.top),
    })
}

/// Periodic central difference along each wall (the tangential gradient).
pub fn boundary_gradient(g: &Grid, b: &BoundaryField) -> Result<BoundaryField> {
    b.check(g, "boundary_gradient")?;
    let c = 0.5 / g.hx;
    let grad_line = |line: &[f64]| -> Vec<f64> {
        let n = line.len();
        (0..n)
            .map(|i| {
                let l = line[if i == 0 { n - 1 } else { i - 1 }];
                let r = line[if i + 1 == n { 0 } else { i + 1 }];
                c * (r - l)
            })
            .collect()
    };
    Ok(BoundaryField {
        bottom: grad_line(&b.bottom),
        top: grad_line(&b.top),
    })
}

/// Outward normal derivative at each wall from a one-sided second-order
/// stencil on the first three interior cells. Exact on quadratics in y.
pub fn normal_derivative(g: &Grid, f: &ScalarField) -> Result<BoundaryField> {
    f.check(g, "normal_derivative")?;
    if g.ny < 3 {
        return Err(SchnsError::UnsupportedGrid(
            "normal_derivative needs ny >= 3".into(),
        ));
    }
    let c = 1.0 / g.hy;
    let mut bottom = vec![0.0; g.nx];
    let mut top = vec![0.0; g.nx];
    for i in 0..g.nx {
        let dy_bottom = c
            * (-2.0 * f.data[g.idx(i, 0)] + 3.0 * f.data[g.idx(i, 1)] - f.data[g.idx(i, 2)]);
        let dy_top = c
            * (2.0 * f.data[g.idx(i, g.ny - 1)] - 3.0 * f.data[g.idx(i, g.ny - 2)]
                + f.data[g.idx(i, g.ny - 3)]);
        bottom[i] = -dy_bottom; // n = -e_y at y = 0
        top[i] = dy_top; // n = +e_y at y = Ly
    }
    Ok(BoundaryField { bottom, top })
}

/// Two-point outward normal derivative through the wall face value `psi`.
///
/// This is the flux the coupled energy form generates; `laplacian_with_trace`
/// integrates against it exactly (discrete Green identity).
pub fn normal_derivative_flux(g: &Grid, f: &ScalarField, psi: &BoundaryField) -> Result<BoundaryField> {
    f.check(g, "normal_derivative_flux")?;
    psi.check(g, "normal_derivative_flux")?;
    let c = 2.0 / g.hy;
    let mut bottom = vec![0.0; g.nx];
    let mut top = vec![0.0; g.nx];
    for i in 0..g.nx {
        bottom[i] = -c * (f.data[g.idx(i, 0)] - psi.bottom[i]);
        top[i] = c * (psi.top[i] - f.data[g.idx(i, g.ny - 1)]);
    }
    Ok(BoundaryField { bottom, top })
}

/// Quadratic extrapolation of cell-centered values to the wall faces.
pub fn trace(g: &Grid, f: &ScalarField) -> Result<BoundaryField> {
    f.check(g, "trace")?;
    if g.ny < 3 {
        return Err(SchnsError::UnsupportedGrid("trace needs ny >= 3".into()));
    }
    let mut bottom = vec![0.0; g.nx];
    let mut top = vec![0.0; g.nx];
    for i in 0..g.nx {
        bottom[i] = (15.0 * f.data[g.idx(i, 0)] - 10.0 * f.data[g.idx(i, 1)]
            + 3.0 * f.data[g.idx(i, 2)])
            / 8.0;
        top[i] = (15.0 * f.data[g.idx(i, g.ny - 1)] - 10.0 * f.data[g.idx(i, g.ny - 2)]
            + 3.0 * f.data[g.idx(i, g.ny - 3)])
            / 8.0;
    }
    Ok(BoundaryField { bottom, top })
}

/// Cell-volume-weighted average, compensated (Kahan) summation.
pub fn mean(g: &Grid, f: &ScalarField) -> f64 {
    debug_assert_eq!(f.data.len(), g.n_cells());
    kahan_sum(&f.data) / g.n_cells() as f64
}

pub(crate) fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

// ---------------------------------------------------------------------------
// inner products, norms, quadratic forms
// ---------------------------------------------------------------------------

/// L2 inner product of two cell-centered scalars.
pub fn inner(g: &Grid, a: &ScalarField, b: &ScalarField) -> f64 {
    let s: f64 = a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum();
    s * g.cell_volume()
}

pub fn norm_sq(g: &Grid, a: &ScalarField) -> f64 {
    inner(g, a, a)
}

/// L2 inner product of two vector fields.
pub fn inner_vec(g: &Grid, a: &VectorField, b: &VectorField) -> f64 {
    let s: f64 = a
        .ux
        .iter()
        .zip(&b.ux)
        .chain(a.uy.iter().zip(&b.uy))
        .map(|(x, y)| x * y)
        .sum();
    s * g.cell_volume()
}

pub fn norm_sq_vec(g: &Grid, a: &VectorField) -> f64 {
    inner_vec(g, a, a)
}

pub fn linf_scalar(f: &ScalarField) -> f64 {
    f.data.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// L2(Gamma) inner product over both walls.
pub fn inner_boundary(g: &Grid, a: &BoundaryField, b: &BoundaryField) -> f64 {
    let s: f64 = a
        .bottom
        .iter()
        .zip(&b.bottom)
        .chain(a.top.iter().zip(&b.top))
        .map(|(x, y)| x * y)
        .sum();
    s * g.hx
}

pub fn norm_sq_boundary(g: &Grid, a: &BoundaryField) -> f64 {
    inner_boundary(g, a, a)
}

pub fn linf_boundary(f: &BoundaryField) -> f64 {
    f.bottom
        .iter()
        .chain(f.top.iter())
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// Interior-face Dirichlet form: the H1 seminorm squared that is exactly the
/// quadratic form of `laplacian_neumann` (no wall-face contribution).
pub fn h1_seminorm_sq_neumann(g: &Grid, f: &ScalarField) -> f64 {
    let vol = g.cell_volume();
    let mut s = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let d = (f.data[g.idx(g.ip(i), j)] - f.data[g.idx(i, j)]) / g.hx;
            s += d * d;
        }
    }
    for j in 0..g.ny - 1 {
        for i in 0..g.nx {
            let d = (f.data[g.idx(i, j + 1)] - f.data[g.idx(i, j)]) / g.hy;
            s += d * d;
        }
    }
    s * vol
}

/// Coupled gradient form || grad phi ||^2 with wall faces pinned to psi.
///
/// Equals `h1_seminorm_sq_neumann` plus half-cell wall-face contributions;
/// its first variation in phi is -`laplacian_with_trace` and in psi the
/// outward flux `normal_derivative_flux`.
pub fn grad_form_sq(g: &Grid, phi: &ScalarField, psi: &BoundaryField) -> f64 {
    let mut s = h1_seminorm_sq_neumann(g, phi);
    let wall_vol = g.hx * (g.hy / 2.0);
    for i in 0..g.nx {
        let db = 2.0 * (phi.data[g.idx(i, 0)] - psi.bottom[i]) / g.hy;
        let dt = 2.0 * (psi.top[i] - phi.data[g.idx(i, g.ny - 1)]) / g.hy;
        s += wall_vol * (db * db + dt * dt);
    }
    s
}

/// Tangential H1 seminorm squared on both walls (face-difference form, the
/// quadratic form of `boundary_laplacian`).
pub fn h1_seminorm_sq_boundary(g: &Grid, b: &BoundaryField) -> f64 {
    let mut s = 0.0;
    for line in [&b.bottom, &b.top] {
        let n = line.len();
        for i in 0..n {
            let d = (line[if i + 1 == n { 0 } else { i + 1 }] - line[i]) / g.hx;
            s += d * d;
        }
    }
    s * g.hx
}

/// Discrete V1 norm squared: ||phi||_H1^2 + ||psi||_H1(Gamma)^2.
pub fn v1_norm_sq(g: &Grid, phi: &ScalarField, psi: &BoundaryField) -> f64 {
    norm_sq(g, phi)
        + grad_form_sq(g, phi, psi)
        + norm_sq_boundary(g, psi)
        + h1_seminorm_sq_boundary(g, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 1.0, 1.0).unwrap()
    }

    fn rand_scalar(g: &Grid, seed: u64) -> ScalarField {
        // small deterministic hash-based pseudo-noise, good enough for
        // operator identities
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        ScalarField {
            data: (0..g.n_cells()).map(|_| next()).collect(),
        }
    }

    fn rand_vector(g: &Grid, seed: u64) -> VectorField {
        let a = rand_scalar(g, seed);
        let b = rand_scalar(g, seed ^ 0x9e3779b97f4a7c15);
        VectorField { ux: a.data, uy: b.data }
    }

    fn rand_boundary(g: &Grid, seed: u64) -> BoundaryField {
        let a = rand_scalar(g, seed);
        BoundaryField {
            bottom: a.data[..g.nx].to_vec(),
            top: a.data[g.nx..2 * g.nx].to_vec(),
        }
    }

    #[test]
    fn grid_rejects_small_dims() {
        assert!(Grid::new(4, 64, 1.0, 1.0).is_err());
        assert!(Grid::new(64, 64, -1.0, 1.0).is_err());
    }

    #[test]
    fn cell_volume_sums_to_domain() {
        let g = Grid::new(48, 96, 2.0, 0.7).unwrap();
        let total = g.cell_volume() * g.n_cells() as f64;
        assert_relative_eq!(total, g.domain_volume(), max_relative = 1e-13);
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = grid(16);
        let f = ScalarField::from_fn(&g, |_, _| 3.25);
        let lap = laplacian_neumann(&g, &f).unwrap();
        assert!(linf_scalar(&lap) < 1e-13);
    }

    #[test]
    fn laplacian_sine_refinement_order_two() {
        // f = sin(2 pi x): compare against the analytic Laplacian at two
        // resolutions and fit the order.
        let err_at = |n: usize| -> f64 {
            let g = grid(n);
            let f = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin());
            let lap = laplacian_neumann(&g, &f).unwrap();
            let exact = ScalarField::from_fn(&g, |x, _| {
                -(2.0 * PI).powi(2) * (2.0 * PI * x).sin()
            });
            lap.data
                .iter()
                .zip(&exact.data)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let e1 = err_at(64);
        let e2 = err_at(128);
        let order = (e1 / e2).log2();
        assert!(
            (1.8..=2.2).contains(&order),
            "fitted order {order}, errors {e1:.3e}, {e2:.3e}"
        );
    }

    #[test]
    fn laplacian_spike_stencil_weights() {
        let g = grid(16);
        let mut f = ScalarField::zeros(&g);
        let (i, j) = (5, 8);
        f.data[g.idx(i, j)] = 1.0;
        let lap = laplacian_neumann(&g, &f).unwrap();
        let ax = 1.0 / (g.hx * g.hx);
        let ay = 1.0 / (g.hy * g.hy);
        assert_relative_eq!(lap.data[g.idx(i, j)], -2.0 * ax - 2.0 * ay, max_relative = 1e-14);
        assert_relative_eq!(lap.data[g.idx(i + 1, j)], ax, max_relative = 1e-14);
        assert_relative_eq!(lap.data[g.idx(i - 1, j)], ax, max_relative = 1e-14);
        assert_relative_eq!(lap.data[g.idx(i, j + 1)], ay, max_relative = 1e-14);
        assert_relative_eq!(lap.data[g.idx(i, j - 1)], ay, max_relative = 1e-14);
    }

    #[test]
    fn laplacian_output_has_zero_mean() {
        let g = grid(32);
        let f = rand_scalar(&g, 7);
        let lap = laplacian_neumann(&g, &f).unwrap();
        assert!(mean(&g, &lap).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grid(16);
        let f = ScalarField::from_fn(&g, |_, _| -1.5);
        let gr = gradient(&g, &f).unwrap();
        assert!(norm_sq_vec(&g, &gr).sqrt() < 1e-13);
    }

    #[test]
    fn gradient_linear_exact_everywhere() {
        let g = grid(16);
        let a = 0.73;
        let f = ScalarField::from_fn(&g, |_, y| 2.0 + a * y);
        let gr = gradient(&g, &f).unwrap();
        for k in 0..g.n_cells() {
            assert!(gr.ux[k].abs() < 1e-12);
            assert_relative_eq!(gr.uy[k], a, max_relative = 1e-12);
        }
    }

    #[test]
    fn gradient_cosine_refinement_order_two() {
        let err_at = |n: usize| -> f64 {
            let g = grid(n);
            let f = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).cos());
            let gr = gradient(&g, &f).unwrap();
            let mut e = 0.0_f64;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let exact = -2.0 * PI * (2.0 * PI * g.x(i)).sin();
                    e = e.max((gr.ux[g.idx(i, j)] - exact).abs());
                }
            }
            e
        };
        let order = (err_at(64) / err_at(128)).log2();
        assert!((1.8..=2.2).contains(&order), "fitted order {order}");
    }

    #[test]
    fn divergence_constant_zero_in_interior() {
        let g = grid(16);
        let v = VectorField {
            ux: vec![1.3; g.n_cells()],
            uy: vec![0.8; g.n_cells()],
        };
        let d = divergence(&g, &v).unwrap();
        for j in 3..g.ny - 3 {
            for i in 0..g.nx {
                assert!(d.data[g.idx(i, j)].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn divergence_of_y_dependent_x_component_is_zero() {
        let g = grid(16);
        let v = VectorField::from_fn(&g, |_, y| ((2.0 * PI * y).sin(), 0.0));
        let d = divergence(&g, &v).unwrap();
        assert!(linf_scalar(&d) < 1e-13);
    }

    #[test]
    fn adjointness_of_gradient_and_divergence() {
        // <grad f, v> + <f, div v> = 0 to rounding, for arbitrary f and v.
        for n in [16, 32, 64, 128] {
            let g = grid(n);
            let f = rand_scalar(&g, 42 + n as u64);
            let v = rand_vector(&g, 4242 + n as u64);
            let gf = gradient(&g, &f).unwrap();
            let dv = divergence(&g, &v).unwrap();
            let lhs = inner_vec(&g, &gf, &v) + inner(&g, &f, &dv);
            let scale = norm_sq(&g, &f).sqrt() * norm_sq_vec(&g, &v).sqrt();
            assert!(
                lhs.abs() <= 1e-10 * scale.max(1e-30),
                "adjointness defect {lhs:.3e} at n = {n}"
            );
        }
    }

    #[test]
    fn divergence_of_gradient_close_to_laplacian_for_smooth_fields() {
        // div(grad f) and the 5-point Laplacian are different second-order
        // discretizations; they agree on smooth fields under refinement.
        let defect = |n: usize| -> f64 {
            let g = grid(n);
            let f = ScalarField::from_fn(&g, |x, y| {
                (2.0 * PI * x).sin() + (PI * y).cos()
            });
            let dg = divergence(&g, &gradient(&g, &f).unwrap()).unwrap();
            let lap = laplacian_neumann(&g, &f).unwrap();
            // skip the wall-adjacent strip where the one-sided adjoint rows live
            let mut e = 0.0_f64;
            for j in 3..g.ny - 3 {
                for i in 0..g.nx {
                    e = e.max((dg.data[g.idx(i, j)] - lap.data[g.idx(i, j)]).abs());
                }
            }
            e
        };
        assert!(defect(64) < defect(32));
        assert!(defect(128) < defect(64));
    }

    #[test]
    fn boundary_laplacian_constant_and_spike() {
        let g = grid(16);
        let c = BoundaryField {
            bottom: vec![2.0; g.nx],
            top: vec![-1.0; g.nx],
        };
        let lap = boundary_laplacian(&g, &c).unwrap();
        assert!(linf_boundary(&lap) < 1e-13);

        let mut s = BoundaryField::zeros(&g);
        s.bottom[4] = 1.0;
        let lap = boundary_laplacian(&g, &s).unwrap();
        let a = 1.0 / (g.hx * g.hx);
        assert_relative_eq!(lap.bottom[4], -2.0 * a, max_relative = 1e-14);
        assert_relative_eq!(lap.bottom[3], a, max_relative = 1e-14);
        assert_relative_eq!(lap.bottom[5], a, max_relative = 1e-14);
    }

    #[test]
    fn boundary_laplacian_sine_mode() {
        let g = Grid::new(128, 8, 1.0, 1.0).unwrap();
        let k = 3.0;
        let b = BoundaryField::from_fn(&g, |x, _| (2.0 * PI * k * x).sin());
        let lap = boundary_laplacian(&g, &b).unwrap();
        let factor = -(2.0 * PI * k).powi(2);
        for i in 0..g.nx {
            let exact = factor * (2.0 * PI * k * g.x(i)).sin();
            assert!((lap.bottom[i] - exact).abs() < factor.abs() * 4e-3);
        }
    }

    #[test]
    fn normal_derivative_examples() {
        let g = grid(16);
        let c = ScalarField::from_fn(&g, |_, _| 5.0);
        let nd = normal_derivative(&g, &c).unwrap();
        assert!(linf_boundary(&nd) < 1e-13);

        let b = 1.7;
        let f = ScalarField::from_fn(&g, |_, y| 0.3 + b * y);
        let nd = normal_derivative(&g, &f).unwrap();
        for i in 0..g.nx {
            assert_relative_eq!(nd.bottom[i], -b, max_relative = 1e-12);
            assert_relative_eq!(nd.top[i], b, max_relative = 1e-12);
        }

        let f = ScalarField::from_fn(&g, |_, y| y * y);
        let nd = normal_derivative(&g, &f).unwrap();
        for i in 0..g.nx {
            assert!(nd.bottom[i].abs() < 1e-12);
            assert_relative_eq!(nd.top[i], 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn trace_examples() {
        let g = grid(16);
        let c = ScalarField::from_fn(&g, |_, _| -2.5);
        let tr = trace(&g, &c).unwrap();
        for i in 0..g.nx {
            assert_relative_eq!(tr.bottom[i], -2.5, max_relative = 1e-13);
            assert_relative_eq!(tr.top[i], -2.5, max_relative = 1e-13);
        }

        let (a, b) = (1.2, -0.4);
        let f = ScalarField::from_fn(&g, |_, y| a + b * y);
        let tr = trace(&g, &f).unwrap();
        for i in 0..g.nx {
            assert_relative_eq!(tr.bottom[i], a, max_relative = 1e-12);
            assert_relative_eq!(tr.top[i], a + b * g.ly, max_relative = 1e-12);
        }
    }

    #[test]
    fn trace_matches_quadratic_fit_oracle() {
        let g = grid(32);
        let f = rand_scalar(&g, 99);
        let tr = trace(&g, &f).unwrap();
        // independent oracle: fit p(y) = c0 + c1 y + c2 y^2 through the three
        // cells nearest the bottom wall and evaluate at y = 0
        for &i in &[0usize, 7, 13, 22, 30] {
            let ys = [g.y(0), g.y(1), g.y(2)];
            let vs = [
                f.data[g.idx(i, 0)],
                f.data[g.idx(i, 1)],
                f.data[g.idx(i, 2)],
            ];
            // Lagrange evaluation at 0
            let mut p0 = 0.0;
            for a in 0..3 {
                let mut w = vs[a];
                for b in 0..3 {
                    if a != b {
                        w *= (0.0 - ys[b]) / (ys[a] - ys[b]);
                    }
                }
                p0 += w;
            }
            assert_relative_eq!(tr.bottom[i], p0, max_relative = 1e-11);
        }
    }

    #[test]
    fn mean_examples() {
        let g = grid(16);
        let c = ScalarField::from_fn(&g, |_, _| 0.123);
        assert_relative_eq!(mean(&g, &c), 0.123, max_relative = 1e-14);

        let checker = ScalarField::from_fn(&g, |x, y| {
            let i = (x * 16.0) as usize;
            let j = (y * 16.0) as usize;
            if (i + j) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        });
        assert!(mean(&g, &checker).abs() < 1e-14);

        let f = rand_scalar(&g, 3);
        let naive: f64 = f.data.iter().sum::<f64>() / g.n_cells() as f64;
        assert_relative_eq!(mean(&g, &f), naive, max_relative = 1e-12);
    }

    #[test]
    fn stencils_are_linear() {
        let g = grid(16);
        let f1 = rand_scalar(&g, 1);
        let f2 = rand_scalar(&g, 2);
        let (a, b) = (1.7, -0.3);
        let combo = ScalarField {
            data: f1
                .data
                .iter()
                .zip(&f2.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        };
        let lhs = laplacian_neumann(&g, &combo).unwrap();
        let l1 = laplacian_neumann(&g, &f1).unwrap();
        let l2 = laplacian_neumann(&g, &f2).unwrap();
        for k in 0..g.n_cells() {
            assert_relative_eq!(
                lhs.data[k],
                a * l1.data[k] + b * l2.data[k],
                epsilon = 1e-9,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn green_identity_with_flux() {
        // integral of laplacian_with_trace equals the wall integral of the
        // two-point flux, exactly.
        let g = grid(32);
        let f = rand_scalar(&g, 11);
        let psi = rand_boundary(&g, 12);
        let lap = laplacian_with_trace(&g, &f, &psi).unwrap();
        let flux = normal_derivative_flux(&g, &f, &psi).unwrap();
        let vol_sum = kahan_sum(&lap.data) * g.cell_volume();
        let wall_sum = (kahan_sum(&flux.bottom) + kahan_sum(&flux.top)) * g.hx;
        assert!(
            (vol_sum - wall_sum).abs() < 1e-10,
            "green defect {:.3e}",
            vol_sum - wall_sum
        );
    }

    #[test]
    fn grad_form_matches_trace_laplacian() {
        // <-laplacian_with_trace(phi,psi), phi> + wall flux terms on psi
        // reproduces grad_form_sq: checks the operator is the form's gradient.
        let g = grid(16);
        let phi = rand_scalar(&g, 21);
        let psi = rand_boundary(&g, 22);
        let lap = laplacian_with_trace(&g, &phi, &psi).unwrap();
        let flux = normal_derivative_flux(&g, &phi, &psi).unwrap();
        let lhs = -inner(&g, &lap, &phi) + inner_boundary(&g, &flux, &psi);
        let rhs = grad_form_sq(&g, &phi, &psi);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }
}
