//! Principal Dirichlet eigenpair of the grid Laplacian on `Ω` or on the
//! nodes strictly inside `Ω₀`, by inverse power iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::conjugate_gradient;
use crate::mesh::{neg_laplacian_into, DomainSpec, Field, Mask};

pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;
pub const INNER_CG_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Omega,
    Omega0,
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    /// `+∞` when the region contains no node.
    pub lambda1: f64,
    /// Positive on the region, zero elsewhere, `‖φ₁‖∞ = 1`.
    pub phi1: Field,
    pub iterations: usize,
    pub residual: f64,
}

impl EigenPair {
    pub fn is_infinite(&self) -> bool {
        self.lambda1.is_infinite()
    }
}

pub fn principal_eigenpair(spec: &DomainSpec, region: Region) -> Result<EigenPair> {
    let mask = match region {
        Region::Omega => Mask::full(*spec.grid()),
        Region::Omega0 => spec.omega0_mask(),
    };
    eigenpair_on(&mask)
}

/// Principal eigenpair of the Laplacian restricted to the nodes flagged
/// in `region`, with zero data on every other node.
pub fn eigenpair_on(region: &Mask) -> Result<EigenPair> {
    let grid = *region.grid();
    if region.count() == 0 {
        return Ok(EigenPair {
            lambda1: f64::INFINITY,
            phi1: Field::zeros(grid),
            iterations: 0,
            residual: 0.0,
        });
    }
    let flags = region.flags();
    let n = grid.len();
    let w = grid.cell_volume();
    let apply = |v: &[f64], out: &mut [f64]| {
        neg_laplacian_into(&grid, v, out);
        for (o, &on) in out.iter_mut().zip(flags) {
            if !on {
                *o = 0.0;
            }
        }
    };

    let mut x: Vec<f64> = flags.iter().map(|&on| if on { 1.0 } else { 0.0 }).collect();
    let mut y = x.clone();
    let mut lx = vec![0.0; n];
    let mut lambda = rayleigh(&apply, &x, &mut lx);
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        // warm start from the previous direction scaled by 1/λ
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi = xi / lambda;
        }
        let bnorm = (w * x.iter().map(|v| v * v).sum::<f64>()).sqrt();
        // the inner residual reaches the eigen-residual amplified by λ;
        // inexact solves are fine, the outer residual decides convergence
        let tol = INNER_CG_TOL * bnorm.max(1.0) / lambda.max(1.0);
        let _ = conjugate_gradient(apply, &x, &mut y, w, tol, 4 * n + 100);
        normalize_positive_sup(&mut y)?;
        std::mem::swap(&mut x, &mut y);
        lambda = rayleigh(&apply, &x, &mut lx);
        residual = (w * lx.iter().zip(&x).map(|(l, v)| (l - lambda * v).powi(2)).sum::<f64>()).sqrt();
        if residual <= EIGEN_RESIDUAL_TOL {
            return Ok(EigenPair { lambda1: lambda, phi1: Field::from_raw(grid, x), iterations: it, residual });
        }
    }
    Err(Error::NotConverged { solver: "inverse power iteration", iterations: MAX_ITERATIONS, residual })
}

fn rayleigh(apply: &impl Fn(&[f64], &mut [f64]), x: &[f64], lx: &mut [f64]) -> f64 {
    apply(x, lx);
    let num: f64 = x.iter().zip(lx.iter()).map(|(a, b)| a * b).sum();
    let den: f64 = x.iter().map(|a| a * a).sum();
    num / den
}

fn normalize_positive_sup(v: &mut [f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    let sup = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(sup > 0.0 && sup.is_finite()) {
        return Err(Error::NotConverged { solver: "inverse power iteration", iterations: 0, residual: f64::NAN });
    }
    let s = sum.signum() / sup;
    for x in v.iter_mut() {
        *x *= s;
    }
    Ok(())
}
