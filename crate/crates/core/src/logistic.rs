//! Time integration of `∂ₜu − Δu = au − b(x)uᵖ` by Strang splitting:
//! exact pointwise reaction flow for half a step, one implicit diffusion
//! step, and another half reaction step.
//!
//! The reaction substep integrates `u' = au − bu^p` in closed form, so the
//! scheme has no stability restriction in `p`. Both substeps preserve order
//! on nonnegative fields, which is what the comparison utilities rely on.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CgInfo};
use crate::mesh::{neg_laplacian_into, DomainSpec, Field};
use crate::series::{step_count, Integrator, StopRule, TimeSeries};
use crate::spectral::EigenPair;

/// Below this value the absorption term is dropped in the reaction flow.
pub const TINY: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvolveParams {
    pub a: f64,
    pub p: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub cg_tol: f64,
}

impl EvolveParams {
    pub fn new(a: f64, p: f64, dt: f64, t_end: f64) -> EvolveParams {
        EvolveParams { a, p, dt, t_end, snapshot_every: 1, cg_tol: 1e-10 }
    }

    pub fn with_snapshot_every(mut self, every: usize) -> EvolveParams {
        self.snapshot_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.a.is_finite() && self.a >= 0.0) {
            return bad(format!("growth rate a must be finite and nonnegative, got {}", self.a));
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return bad(format!("exponent p must exceed 1, got {}", self.p));
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.dt > 1.0 / self.a.max(1.0) * (1.0 + 1e-12) {
            return bad(format!("dt = {} exceeds 1/max(a, 1) = {}", self.dt, 1.0 / self.a.max(1.0)));
        }
        if !(self.t_end >= self.dt) {
            return bad(format!("t_end = {} must be at least dt = {}", self.t_end, self.dt));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        if !(self.cg_tol > 0.0) {
            return bad(format!("cg_tol must be positive, got {}", self.cg_tol));
        }
        Ok(())
    }
}

/// Exact solution at time `dt` of `u' = au − bu^p` from `u ≥ 0`.
///
/// Uses `u' = u · [E + c u^{p−1}]^{−1/(p−1)}` with `E = e^{−a(p−1)dt}` and
/// `c = b(1 − E)/a`, evaluated in log space so that neither `u^{1−p}` nor
/// `u^{p−1}` can overflow.
pub fn reaction_flow(u: f64, a: f64, b: f64, p: f64, dt: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    if b == 0.0 || u < TINY {
        return u * (a * dt).exp();
    }
    let q = p - 1.0;
    let ln_e = -a * q * dt;
    let c = if a == 0.0 { b * q * dt } else { b * -ln_e.exp_m1() / a };
    let ln_cu = c.ln() + q * u.ln();
    let (hi, lo) = if ln_e > ln_cu { (ln_e, ln_cu) } else { (ln_cu, ln_e) };
    let ln_sum = hi + (lo - hi).exp().ln_1p();
    (u.ln() - ln_sum / q).exp()
}

pub fn reaction_step_exact(u: &Field, spec: &DomainSpec, a: f64, p: f64, dt: f64) -> Result<Field> {
    let mut out = u.clone();
    reaction_in_place(out.values_mut(), spec.b_values(), a, p, dt)?;
    Ok(out)
}

fn reaction_in_place(u: &mut [f64], b: &[f64], a: f64, p: f64, dt: f64) -> Result<()> {
    for (i, (v, &bi)) in u.iter_mut().zip(b).enumerate() {
        if !(*v >= 0.0) {
            return Err(Error::Domain(format!("reaction step needs u ≥ 0, got {v} at node {i}")));
        }
        *v = reaction_flow(*v, a, bi, p, dt);
    }
    Ok(())
}

/// Solves `(I + dt L) u' = u` by conjugate gradients, warm-started at `u`.
pub fn diffusion_step_implicit(u: &Field, dt: f64, cg_tol: f64) -> Result<Field> {
    let mut out = u.clone();
    diffusion_in_place(&mut out, dt, cg_tol)?;
    Ok(out)
}

fn diffusion_in_place(u: &mut Field, dt: f64, cg_tol: f64) -> Result<CgInfo> {
    let grid = *u.grid();
    let rhs = u.values().to_vec();
    let apply = |v: &[f64], out: &mut [f64]| {
        neg_laplacian_into(&grid, v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi + dt * *o;
        }
    };
    let scale = crate::mesh::l2_norm(&grid, &rhs).max(1.0);
    conjugate_gradient(apply, &rhs, u.values_mut(), grid.cell_volume(), cg_tol * scale, 10 * grid.len() + 100)
}

/// CG leaves roundoff-sized negative values where the exact solution is
/// zero or tiny; the exact solve is nonnegative, so project back.
fn clamp_roundoff(u: &mut [f64], tol: f64) -> Result<()> {
    for (i, v) in u.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::Domain(format!("diffusion produced {v} at node {i}")));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

fn check_initial(u0: &Field, spec: &DomainSpec) -> Result<()> {
    if !u0.grid().same_shape(spec.grid()) {
        return Err(Error::Config("initial data and domain use different grids".into()));
    }
    for (i, (&v, &constrained)) in u0.values().iter().zip(spec.constraint_mask().flags()).enumerate() {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("initial data must be nonnegative, got {v} at node {i}")));
        }
        if constrained && v > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("initial data exceeds 1 on Ω∖Ω₀ at node {i} ({v})")));
        }
    }
    Ok(())
}

pub fn evolve(u0: &Field, spec: &DomainSpec, params: &EvolveParams) -> Result<TimeSeries> {
    evolve_until(u0, spec, params, StopRule::EndTime)
}

/// [`evolve`] with an early-stopping rule (steady state or sup threshold).
pub fn evolve_until(u0: &Field, spec: &DomainSpec, params: &EvolveParams, stop: StopRule) -> Result<TimeSeries> {
    params.validate()?;
    check_initial(u0, spec)?;
    split_run(u0, spec.b_values(), params, stop)
}

/// The split scheme with `b ≡ 0`: `ψ` grows like `e^{at}` under the heat
/// flow and dominates every [`evolve`] run from the same data.
pub fn heat_supersolution(u0: &Field, params: &EvolveParams) -> Result<TimeSeries> {
    params.validate()?;
    if let Some(v) = u0.values().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("initial data must be nonnegative, got {v}")));
    }
    let zeros = vec![0.0; u0.len()];
    split_run(u0, &zeros, params, StopRule::EndTime)
}

fn split_run(u0: &Field, b: &[f64], params: &EvolveParams, stop: StopRule) -> Result<TimeSeries> {
    let grid = *u0.grid();
    let EvolveParams { a, p, dt, cg_tol, .. } = *params;
    let integrator = Integrator {
        dt,
        n_steps: step_count(params.t_end, dt),
        snapshot_every: params.snapshot_every,
        stop,
        absorption: Some((b, p)),
        obstacle_mask: None,
        growth_limit: None,
    };
    let mut work = Field::zeros(grid);
    integrator.run(u0.clone(), |n, u| {
        reaction_in_place(u, b, a, p, 0.5 * dt)?;
        work.values_mut().copy_from_slice(u);
        diffusion_in_place(&mut work, dt, cg_tol).map_err(|e| match e {
            Error::NotConverged { residual, .. } => Error::Divergence {
                step: n + 1,
                t: (n + 1) as f64 * dt,
                what: format!("diffusion solve failed (residual {residual:.3e})"),
            },
            other => other,
        })?;
        u.copy_from_slice(work.values());
        let scale = u.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        clamp_roundoff(u, 1e3 * cg_tol * scale)?;
        reaction_in_place(u, b, a, p, 0.5 * dt)
    })
}

/// `(a − λ₁) − max_x b(x) c^{p−1} φ₁(x)^{p−1}`. A nonnegative value means
/// `c·φ₁` is a subsolution of the logistic equation.
pub fn subsolution_margin(spec: &DomainSpec, eig: &EigenPair, c: f64, a: f64, p: f64) -> f64 {
    let worst = spec
        .b_values()
        .iter()
        .zip(eig.phi1.values())
        .map(|(&b, &phi)| if b == 0.0 { 0.0 } else { b * (c * phi).powf(p - 1.0) })
        .fold(0.0_f64, f64::max);
    (a - eig.lambda1) - worst
}

/// Largest `c` with nonnegative [`subsolution_margin`], by bisection.
/// `None` when `a ≤ λ₁`; `+∞` when `b` vanishes on the support of `φ₁`.
pub fn max_subsolution_scale(spec: &DomainSpec, eig: &EigenPair, a: f64, p: f64) -> Option<f64> {
    if !(a > eig.lambda1) {
        return None;
    }
    let margin = |c: f64| subsolution_margin(spec, eig, c, a, p);
    let mut hi = 1.0;
    while margin(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Some(f64::INFINITY);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if margin(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{sample_domain, BKind, Grid, NormKind};
    use crate::spectral::{principal_eigenpair, Region};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit(n: usize, b0: f64) -> DomainSpec {
        sample_domain(Grid::unit_interval(n).unwrap(), &[], BKind::Constant { b0 }).unwrap()
    }

    #[test]
    fn reaction_examples() {
        assert_relative_eq!(reaction_flow(0.5, 1.0, 1.0, 3.0, 1.0), (1.0 + 3.0 * (-2f64).exp()).powf(-0.5), max_relative = 1e-14);
        assert_relative_eq!(reaction_flow(0.5, 1.0, 1.0, 3.0, 1.0), 0.8433475, epsilon = 1e-6);
        assert_relative_eq!(reaction_flow(0.5, 1.0, 0.0, 3.0, 1.0), 0.5 * 1f64.exp(), max_relative = 1e-15);
        for dt in [1e-3, 0.1, 1.0, 50.0] {
            assert_relative_eq!(reaction_flow(2f64.sqrt(), 2.0, 1.0, 3.0, dt), 2f64.sqrt(), max_relative = 1e-14);
        }
        assert_eq!(reaction_flow(0.0, 3.0, 1.0, 7.0, 1.0), 0.0);
    }

    #[test]
    fn reaction_without_growth_and_huge_powers() {
        // a = 0: u' = -b u^p  =>  u(t)^{1-p} = u0^{1-p} + (p-1) b t
        let expect = (0.5f64.powf(-2.0) + 2.0 * 0.3).powf(-0.5);
        assert_relative_eq!(reaction_flow(0.5, 0.0, 1.0, 3.0, 0.3), expect, max_relative = 1e-14);
        // p = 1000 with u far from the fixed point in both directions
        let fixed = 20f64.powf(1.0 / 999.0);
        let down = reaction_flow(5.0, 20.0, 1.0, 1000.0, 0.01);
        assert!(down.is_finite() && down < 5.0);
        assert_relative_eq!(down, fixed, max_relative = 1e-12);
        let up = reaction_flow(1e-3, 20.0, 1.0, 1000.0, 0.01);
        assert_relative_eq!(up, 1e-3 * 0.2f64.exp(), max_relative = 1e-12);
        assert_eq!(reaction_flow(1e-310, 1.0, 1.0, 3.0, 1.0), 1e-310 * 1f64.exp());
    }

    #[test]
    fn reaction_rejects_negative() {
        let spec = unit(3, 1.0);
        let u = Field::from_values(*spec.grid(), vec![0.1, -0.1, 0.2]).unwrap();
        assert!(matches!(reaction_step_exact(&u, &spec, 1.0, 2.0, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn diffusion_on_eigenvector() {
        let g = Grid::unit_interval(3).unwrap();
        let u = Field::from_fn(g, |x| (PI * x[0]).sin());
        let out = diffusion_step_implicit(&u, 0.1, 1e-12).unwrap();
        let factor = 1.0 / (1.0 + 0.1 * 32.0 * (1.0 - (PI / 4.0).cos()));
        assert_relative_eq!(factor, 0.5161936, epsilon = 1e-6);
        for (o, v) in out.values().iter().zip(u.values()) {
            assert_relative_eq!(*o, factor * v, max_relative = 1e-10);
        }
        let z = diffusion_step_implicit(&Field::zeros(g), 0.1, 1e-10).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn params_validation() {
        assert!(EvolveParams::new(2.0, 3.0, 0.5, 1.0).validate().is_ok());
        assert!(EvolveParams::new(2.0, 3.0, 0.6, 1.0).validate().is_err());
        assert!(EvolveParams::new(2.0, 1.0, 0.1, 1.0).validate().is_err());
        assert!(EvolveParams::new(2.0, 3.0, 0.1, 0.05).validate().is_err());
    }

    #[test]
    fn evolve_zero_stays_zero() {
        let spec = unit(15, 1.0);
        let s = evolve(&Field::zeros(*spec.grid()), &spec, &EvolveParams::new(5.0, 4.0, 0.01, 0.5)).unwrap();
        assert!(s.snapshots.iter().all(|f| f.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn evolve_rejects_data_above_obstacle() {
        let spec = unit(7, 1.0);
        let u0 = Field::constant(*spec.grid(), 1.5);
        assert!(matches!(evolve(&u0, &spec, &EvolveParams::new(1.0, 2.0, 0.1, 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn heat_amplitude_factor() {
        let g = Grid::unit_interval(15).unwrap();
        let u0 = Field::from_fn(g, |x| (PI * x[0]).sin());
        let params = EvolveParams { cg_tol: 1e-13, ..EvolveParams::new(3.0, 2.0, 0.05, 0.5) };
        let s = heat_supersolution(&u0, &params).unwrap();
        let factor = (3.0f64 * 0.05).exp() / (1.0 + 0.05 * g.lambda_min());
        for (k, snap) in s.snapshots.iter().enumerate() {
            let expect = factor.powi(k as i32);
            for (o, v) in snap.values().iter().zip(u0.values()) {
                assert_relative_eq!(*o, expect * v, max_relative = 1e-9, epsilon = 1e-12);
            }
        }
        // a = 0: maximum principle
        let rough = Field::from_fn(g, |x| if x[0] < 0.5 { 1.0 } else { 0.2 });
        let s = heat_supersolution(&rough, &EvolveParams::new(0.0, 2.0, 0.01, 0.3)).unwrap();
        assert!(s.observables.windows(2).all(|w| w[1].sup <= w[0].sup + 1e-12));
    }

    #[test]
    fn pure_heat_on_eigenvector_l2_decay() {
        let g = Grid::unit_interval(31).unwrap();
        let spec = sample_domain(g, &[crate::mesh::AxisBox::interval(0.0, 1.0)], BKind::Indicator { b0: 1.0 }).unwrap();
        let u0 = Field::from_fn(g, |x| (PI * x[0]).sin());
        let params = EvolveParams { cg_tol: 1e-13, ..EvolveParams::new(0.0, 2.0, 0.01, 0.2) };
        let s = evolve(&u0, &spec, &params).unwrap();
        let l0 = u0.norm(NormKind::L2);
        for (n, o) in s.observables.iter().enumerate() {
            assert_relative_eq!(o.l2, l0 / (1.0 + 0.01 * g.lambda_min()).powi(n as i32), max_relative = 1e-9);
        }
    }

    #[test]
    fn margin_examples() {
        let spec = unit(31, 1.0);
        let mut eig = principal_eigenpair(&spec, Region::Omega).unwrap();
        // continuum values, as in the closed-form check
        eig.lambda1 = PI * PI;
        let m = subsolution_margin(&spec, &eig, 0.5, 2.0 * PI * PI, 3.0);
        let sup_phi = eig.phi1.sup();
        assert_relative_eq!(m, PI * PI - 0.25 * sup_phi * sup_phi, max_relative = 1e-12);
        assert_relative_eq!(PI * PI - 0.25, 9.6196044, epsilon = 1e-7);
        assert_relative_eq!(subsolution_margin(&spec, &eig, 1e-9, 2.0 * PI * PI, 3.0), PI * PI, max_relative = 1e-12);
        let c = max_subsolution_scale(&spec, &eig, 2.0 * PI * PI, 3.0).unwrap();
        assert_relative_eq!(c, PI, max_relative = 1e-12);
        assert!(max_subsolution_scale(&spec, &eig, 5.0, 3.0).is_none());
    }
}
