//! Named initial-condition generators. All of them are deterministic
//! functions of the grid and their parameters (the spinodal mix uses a
//! hash, not the path RNG), so every path of an ensemble starts from the
//! same fields.

use crate::grid::{Grid, ScalarField, VectorField};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// u = 0, phi = 0.
    Zero,
    /// u = 0, phi = mean + amp * hash noise (mean-corrected).
    Spinodal { mean: f64, amp: f64 },
    /// u = 0, phi = amp cos(2 pi mx x / Lx) cos(pi my y / Ly); the cosine
    /// profile in y has zero normal derivative at both walls.
    Stripe { amp: f64, mx: u32, my: u32 },
    /// Stripe phase plus a wall-compatible shear u = (u0 s(y), 0) with
    /// s = sin(pi y / Ly) (zero at the walls).
    ShearedStripe {
        u0: f64,
        amp: f64,
        mx: u32,
        my: u32,
    },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::ShearedStripe {
            u0: 0.25,
            amp: 0.2,
            mx: 1,
            my: 1,
        }
    }
}

fn hash01(i: usize, j: usize) -> f64 {
    let mut x = (i as u64) << 32 | j as u64;
    x ^= x >> 33;
    x = x.wrapping_mul(0xff51afd7ed558ccd);
    x ^= x >> 33;
    x = x.wrapping_mul(0xc4ceb9fe1a85ec53);
    x ^= x >> 33;
    (x >> 11) as f64 / (1u64 << 53) as f64
}

pub fn build(g: &Grid, ic: &InitialCondition) -> (VectorField, ScalarField) {
    match ic {
        InitialCondition::Zero => (VectorField::zeros(g), ScalarField::zeros(g)),
        InitialCondition::Spinodal { mean, amp } => {
            let mut phi = ScalarField::zeros(g);
            let mut sum = 0.0;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let v = mean + amp * (2.0 * hash01(i, j) - 1.0);
                    phi.data[g.idx(i, j)] = v;
                    sum += v;
                }
            }
            let correction = mean - sum / g.n_cells() as f64;
            for v in &mut phi.data {
                *v += correction;
            }
            (VectorField::zeros(g), phi)
        }
        InitialCondition::Stripe { amp, mx, my } => {
            let phi = stripe(g, *amp, *mx, *my);
            (VectorField::zeros(g), phi)
        }
        InitialCondition::ShearedStripe { u0, amp, mx, my } => {
            let phi = stripe(g, *amp, *mx, *my);
            let u0 = *u0;
            let u = VectorField::from_fn(g, |_, y| (u0 * (PI * y / g.ly).sin(), 0.0));
            (u, phi)
        }
    }
}

fn stripe(g: &Grid, amp: f64, mx: u32, my: u32) -> ScalarField {
    ScalarField::from_fn(g, |x, y| {
        amp * (2.0 * PI * mx as f64 * x / g.lx).cos() * (PI * my as f64 * y / g.ly).cos()
    })
}
