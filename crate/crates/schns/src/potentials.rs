//! Bulk and boundary nonlinearities and their Lipschitz truncations.
//!
//! The bulk pair (f, F) with F' = f drives the chemical potential, the
//! boundary pair (g, G) the wall potential. Both admit a truncated variant
//! that agrees with the original inside |r| <= M(eps) = 1/eps and continues
//! linearly (C^1) outside, which makes the truncation globally Lipschitz
//! with an explicitly reported constant.

use crate::error::{Result, SchnsError};

/// Polynomial in one variable, stored by ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    fn eval(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    fn derivative(&self) -> Poly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Poly { coeffs }
    }

    /// Antiderivative with value 0 at 0.
    fn antiderivative(&self) -> Poly {
        let mut coeffs = vec![0.0];
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c / (k + 1) as f64),
        );
        Poly { coeffs }
    }

    /// Maximum of |p| over [-m, m] by dense sampling plus endpoints.
    fn max_abs_on(&self, m: f64) -> f64 {
        let n = 512;
        let mut best = 0.0_f64;
        for k in 0..=n {
            let r = -m + 2.0 * m * k as f64 / n as f64;
            best = best.max(self.eval(r).abs());
        }
        best
    }

    /// Minimum over [lo, hi]: endpoints plus interior critical points, the
    /// latter located by bisecting sign changes of the derivative.
    fn min_on(&self, lo: f64, hi: f64) -> f64 {
        let d = self.derivative();
        let n = 2048;
        let mut best = self.eval(lo).min(self.eval(hi));
        let mut prev_r = lo;
        let mut prev_d = d.eval(lo);
        for k in 1..=n {
            let r = lo + (hi - lo) * k as f64 / n as f64;
            let dr = d.eval(r);
            if prev_d == 0.0 {
                best = best.min(self.eval(prev_r));
            } else if prev_d * dr < 0.0 {
                let (mut a, mut b) = (prev_r, r);
                let mut da = prev_d;
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let dm = d.eval(m);
                    if da * dm <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        da = dm;
                    }
                }
                best = best.min(self.eval(0.5 * (a + b)));
            }
            prev_r = r;
            prev_d = dr;
        }
        best
    }
}

/// Built-in choices for the bulk nonlinearity f.
#[derive(Debug, Clone, PartialEq)]
pub enum BulkKind {
    /// f(r) = r^3 - r, F(r) = r^4/4 - r^2/2.
    DoubleWell,
    /// Custom polynomial coefficients of f, ascending degree; must have
    /// f(0) = 0.
    Poly(Vec<f64>),
}

/// Built-in choices for the boundary nonlinearity g.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryKind {
    /// g(r) = r, G(r) = r^2/2.
    Linear,
    /// g(r) = r^3 - r.
    DoubleWell,
}

/// Bulk and boundary potential pair with stored lower bounds.
#[derive(Debug, Clone)]
pub struct Potentials {
    f: Poly,
    big_f: Poly,
    g: Poly,
    big_g: Poly,
    /// F(s) >= -c2_bulk on the working range.
    pub c2_bulk: f64,
    /// G(s) >= -c2_boundary on the working range.
    pub c2_boundary: f64,
    pub bulk_kind: BulkKind,
    pub boundary_kind: BoundaryKind,
}

fn poly_for_bulk(kind: &BulkKind) -> Result<Poly> {
    let p = match kind {
        BulkKind::DoubleWell => Poly {
            coeffs: vec![0.0, -1.0, 0.0, 1.0],
        },
        BulkKind::Poly(coeffs) => Poly {
            coeffs: coeffs.clone(),
        },
    };
    if p.eval(0.0) != 0.0 {
        return Err(SchnsError::Parameter("bulk potential needs f(0) = 0".into()));
    }
    Ok(p)
}

fn poly_for_boundary(kind: &BoundaryKind) -> Poly {
    match kind {
        BoundaryKind::Linear => Poly {
            coeffs: vec![0.0, 1.0],
        },
        BoundaryKind::DoubleWell => Poly {
            coeffs: vec![0.0, -1.0, 0.0, 1.0],
        },
    }
}

impl Potentials {
    pub fn new(bulk: BulkKind, boundary: BoundaryKind) -> Result<Self> {
        let f = poly_for_bulk(&bulk)?;
        let g = poly_for_boundary(&boundary);
        let big_f = f.antiderivative();
        let big_g = g.antiderivative();
        // tiny pad keeps the stored floor a true lower bound under rounding
        let pad = |m: f64| (-m).max(0.0) * (1.0 + 1e-12) + 1e-13;
        let c2_bulk = pad(big_f.min_on(-10.0, 10.0));
        let c2_boundary = pad(big_g.min_on(-10.0, 10.0));
        Ok(Self {
            f,
            big_f,
            g,
            big_g,
            c2_bulk,
            c2_boundary,
            bulk_kind: bulk,
            boundary_kind: boundary,
        })
    }

    pub fn double_well() -> Self {
        Self::new(BulkKind::DoubleWell, BoundaryKind::Linear).expect("built-in spec is valid")
    }

    pub fn f(&self, r: f64) -> f64 {
        self.f.eval(r)
    }

    pub fn big_f(&self, r: f64) -> f64 {
        self.big_f.eval(r)
    }

    pub fn g(&self, r: f64) -> f64 {
        self.g.eval(r)
    }

    pub fn big_g(&self, r: f64) -> f64 {
        self.big_g.eval(r)
    }

    /// Truncation radius M(eps) = 1/eps.
    pub fn truncation_radius(eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(SchnsError::Parameter(format!(
                "truncation needs eps > 0, got {eps}"
            )));
        }
        Ok(1.0 / eps)
    }

    /// Truncated bulk nonlinearity: f inside |r| <= M(eps), linear C^1
    /// continuation outside.
    pub fn f_eps(&self, r: f64, eps: f64) -> Result<f64> {
        let m = Self::truncation_radius(eps)?;
        Ok(truncate(&self.f, r, m))
    }

    pub fn g_eps(&self, r: f64, eps: f64) -> Result<f64> {
        let m = Self::truncation_radius(eps)?;
        Ok(truncate(&self.g, r, m))
    }

    /// Antiderivative of f_eps with value 0 at 0 (quadratic outside the
    /// truncation radius). The energy uses this so the potential term pairs
    /// exactly with the force the stepper applies.
    pub fn big_f_eps(&self, r: f64, eps: f64) -> Result<f64> {
        let m = Self::truncation_radius(eps)?;
        Ok(truncate_anti(&self.f, &self.big_f, r, m))
    }

    pub fn big_g_eps(&self, r: f64, eps: f64) -> Result<f64> {
        let m = Self::truncation_radius(eps)?;
        Ok(truncate_anti(&self.g, &self.big_g, r, m))
    }

    /// Global Lipschitz constant of f_eps: max |f'| over [-M(eps), M(eps)].
    pub fn f_eps_lipschitz(&self, eps: f64) -> Result<f64> {
        let m = Self::truncation_radius(eps)?;
        Ok(self.f.derivative().max_abs_on(m))
    }

    pub fn g_eps_lipschitz(&self, eps: f64) -> Result<f64> {
        let m = Self::truncation_radius(eps)?;
        Ok(self.g.derivative().max_abs_on(m))
    }
}

fn truncate(p: &Poly, r: f64, m: f64) -> f64 {
    if r.abs() <= m {
        p.eval(r)
    } else {
        let s = m.copysign(r);
        let slope = p.derivative().eval(s);
        p.eval(s) + slope * (r - s)
    }
}

fn truncate_anti(p: &Poly, anti: &Poly, r: f64, m: f64) -> f64 {
    if r.abs() <= m {
        anti.eval(r)
    } else {
        let s = m.copysign(r);
        let slope = p.derivative().eval(s);
        let d = r - s;
        anti.eval(s) + p.eval(s) * d + 0.5 * slope * d * d
    }
}
