//! The obstacle limit: `u ≤ 1` on `Ω∖Ω₀`, `∂ₜu − Δu = au` where the
//! constraint is slack.
//!
//! Each implicit Euler step is the linear complementarity problem
//!
//! ```text
//! A u = rhs                          off the mask
//! u ≤ 1,  rhs − A u ≥ 0,  (1 − u)(rhs − A u) = 0   on the mask
//! ```
//!
//! with `A = I/dt + L − aI` and `rhs = u_n/dt`, solved by projected SOR.
//! `A` is a symmetric M-matrix whenever `dt < 1/a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{for_each_neighbor, DomainSpec, Field, Grid, Mask};
use crate::series::{step_count, Integrator, StopRule, TimeSeries, ACTIVE_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleSpec {
    mask: Mask,
}

impl ObstacleSpec {
    pub fn new(mask: Mask) -> ObstacleSpec {
        ObstacleSpec { mask }
    }

    /// `K₀`: the obstacle acts on `Ω∖Ω₀`.
    pub fn from_domain(spec: &DomainSpec) -> ObstacleSpec {
        ObstacleSpec { mask: spec.constraint_mask().clone() }
    }

    /// `K`: the obstacle acts everywhere.
    pub fn everywhere(grid: Grid) -> ObstacleSpec {
        ObstacleSpec { mask: Mask::full(grid) }
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn grid(&self) -> &Grid {
        self.mask.grid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Lexicographic.
    Forward,
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsorOptions {
    pub omega: f64,
    pub order: SweepOrder,
    pub max_sweeps: usize,
}

impl Default for PsorOptions {
    fn default() -> Self {
        PsorOptions { omega: 1.5, order: SweepOrder::Forward, max_sweeps: 1_000_000 }
    }
}

impl PsorOptions {
    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::Config(format!("relaxation factor must lie in (0, 2), got {}", self.omega)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct VIResult {
    pub u: Field,
    /// Constrained nodes where `u = 1`.
    pub active_set: Mask,
    /// `rhs − A u` on the active set, 0 elsewhere.
    pub multiplier: Field,
    pub comp_residual: f64,
    pub iterations: usize,
    step: StepOperator,
    rhs: Vec<f64>,
    constraint: Mask,
}

/// `A = I/dt + L − aI`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct StepOperator {
    a: f64,
    dt: f64,
}

impl StepOperator {
    fn diagonal(&self, grid: &Grid) -> f64 {
        1.0 / self.dt - self.a + grid.laplacian_diagonal()
    }

    /// `rhs_k − (A u)_k`.
    #[inline]
    fn defect(&self, grid: &Grid, d: f64, rhs: &[f64], u: &[f64], k: usize) -> f64 {
        let mut s = rhs[k] - d * u[k];
        for_each_neighbor(grid, k, |j, c| s -= c * u[j]);
        s
    }

    /// Max over nodes of the diagonally scaled natural residual:
    /// `|min(1 − u, (rhs − Au)/d)|` on the mask, `|rhs − Au|/d` off it.
    fn natural_residual(&self, grid: &Grid, rhs: &[f64], u: &[f64], mask: &[bool]) -> f64 {
        let d = self.diagonal(grid);
        (0..u.len())
            .map(|k| {
                let g = self.defect(grid, d, rhs, u, k) / d;
                if mask[k] { (1.0 - u[k]).min(g).abs() } else { g.abs() }
            })
            .fold(0.0, f64::max)
    }
}

fn check_step(a: f64, dt: f64, tol: f64) -> Result<()> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::Config(format!("growth rate a must be finite and nonnegative, got {a}")));
    }
    if !(dt > 0.0) || a * dt >= 1.0 {
        return Err(Error::Config(format!("obstacle step needs 0 < dt < 1/a (dt = {dt}, a = {a})")));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// One implicit Euler step of the obstacle flow from `u_n`.
pub fn parabolic_vi_step(u_n: &Field, spec: &ObstacleSpec, a: f64, dt: f64, tol: f64) -> Result<VIResult> {
    parabolic_vi_step_with(u_n, spec, a, dt, tol, &PsorOptions::default())
}

pub fn parabolic_vi_step_with(
    u_n: &Field,
    spec: &ObstacleSpec,
    a: f64,
    dt: f64,
    tol: f64,
    opts: &PsorOptions,
) -> Result<VIResult> {
    check_step(a, dt, tol)?;
    opts.validate()?;
    if !u_n.grid().same_shape(spec.grid()) {
        return Err(Error::Config("field and obstacle mask use different grids".into()));
    }
    for (i, (&v, &on)) in u_n.values().iter().zip(spec.mask.flags()).enumerate() {
        if on && v > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("u_n = {v} exceeds the obstacle at node {i}")));
        }
    }
    let step = StepOperator { a, dt };
    let rhs: Vec<f64> = u_n.values().iter().map(|v| v / dt).collect();
    let mut u = u_n.values().to_vec();
    let iterations = psor(spec.grid(), spec.mask.flags(), step, &rhs, &mut u, tol, opts)?;
    Ok(finish(spec, step, rhs, u, iterations))
}

/// Projected SOR from the contents of `u`. Returns the sweep count.
///
/// Stops once the scaled natural residual is below `tol` times the
/// diagonal-dominance margin `(1/dt − a)/d` of `A`, which bounds the sup
/// error of the iterate by roughly `tol`. For data with `‖u_n‖∞ < 1` the
/// target shrinks proportionally, so small solutions keep relative accuracy.
fn psor(grid: &Grid, mask: &[bool], step: StepOperator, rhs: &[f64], u: &mut [f64], tol: f64, opts: &PsorOptions) -> Result<usize> {
    let d = step.diagonal(grid);
    let margin = ((1.0 / step.dt - step.a) / d).min(1.0);
    let size = rhs.iter().fold(0.0_f64, |m, r| m.max(r.abs())) * step.dt;
    let target = tol * margin * size.clamp(1e-100, 1.0);
    let n = u.len();
    for (v, &on) in u.iter_mut().zip(mask) {
        if on && *v > 1.0 {
            *v = 1.0;
        }
    }
    let mut residual = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let mut max_change = 0.0_f64;
        let mut visit = |k: usize| {
            let g = step.defect(grid, d, rhs, u, k) / d;
            let mut v = u[k] + opts.omega * g;
            if mask[k] && v > 1.0 {
                v = 1.0;
            }
            max_change = max_change.max((v - u[k]).abs());
            u[k] = v;
        };
        match opts.order {
            SweepOrder::Forward => (0..n).for_each(&mut visit),
            SweepOrder::Reverse => (0..n).rev().for_each(&mut visit),
        }
        if !max_change.is_finite() {
            return Err(Error::NotConverged { solver: "psor", iterations: sweep, residual: f64::NAN });
        }
        if max_change <= target {
            residual = step.natural_residual(grid, rhs, u, mask);
            if residual <= target {
                return Ok(sweep);
            }
        }
    }
    Err(Error::NotConverged { solver: "psor", iterations: opts.max_sweeps, residual })
}

fn finish(spec: &ObstacleSpec, step: StepOperator, rhs: Vec<f64>, u: Vec<f64>, iterations: usize) -> VIResult {
    let grid = *spec.grid();
    let d = step.diagonal(&grid);
    let flags = spec.mask.flags();
    let active: Vec<bool> = u.iter().zip(flags).map(|(v, &on)| on && *v >= 1.0 - ACTIVE_TOL).collect();
    let multiplier: Vec<f64> = (0..u.len())
        .map(|k| if active[k] { step.defect(&grid, d, &rhs, &u, k).max(0.0) } else { 0.0 })
        .collect();
    let comp_residual = step.natural_residual(&grid, &rhs, &u, flags);
    VIResult {
        u: Field::from_raw(grid, u),
        active_set: Mask::new(grid, active).expect("mask length matches grid"),
        multiplier: Field::from_raw(grid, multiplier),
        comp_residual,
        iterations,
        step,
        rhs,
        constraint: spec.mask.clone(),
    }
}

/// Recomputes the scaled natural residual of a step result from scratch.
pub fn complementarity_residual(r: &VIResult) -> f64 {
    r.step.natural_residual(r.u.grid(), &r.rhs, r.u.values(), r.constraint.flags())
}

/// Constrained nodes with `u ≥ 1 − eps`.
pub fn coincidence_set(u: &Field, spec: &ObstacleSpec, eps: f64) -> Mask {
    let flags = u
        .values()
        .iter()
        .zip(spec.mask.flags())
        .map(|(v, &on)| on && *v >= 1.0 - eps)
        .collect();
    Mask::new(*u.grid(), flags).expect("mask length matches grid")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ViParams {
    pub a: f64,
    pub dt: f64,
    pub t_end: f64,
    pub tol: f64,
    pub snapshot_every: usize,
    pub psor: PsorOptions,
}

impl ViParams {
    pub fn new(a: f64, dt: f64, t_end: f64) -> ViParams {
        ViParams { a, dt, t_end, tol: 1e-10, snapshot_every: 1, psor: PsorOptions::default() }
    }

    /// `min(1/(2a), 1e−2)`.
    pub fn default_dt(a: f64) -> f64 {
        if a > 0.0 { (0.5 / a).min(1e-2) } else { 1e-2 }
    }

    pub fn with_snapshot_every(mut self, every: usize) -> ViParams {
        self.snapshot_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_step(self.a, self.dt, self.tol)?;
        self.psor.validate()?;
        if !(self.t_end >= self.dt) {
            return Err(Error::Config(format!("t_end = {} must be at least dt = {}", self.t_end, self.dt)));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_initial(u0: &Field, spec: &ObstacleSpec) -> Result<()> {
    if !u0.grid().same_shape(spec.grid()) {
        return Err(Error::Config("initial data and obstacle mask use different grids".into()));
    }
    for (i, (&v, &on)) in u0.values().iter().zip(spec.mask.flags()).enumerate() {
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("initial data must be nonnegative, got {v} at node {i}")));
        }
        if on && v > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("initial data exceeds the obstacle at node {i} ({v})")));
        }
    }
    Ok(())
}

pub fn parabolic_vi_evolve(u0: &Field, spec: &ObstacleSpec, params: &ViParams) -> Result<TimeSeries> {
    vi_evolve_until(u0, spec, params, StopRule::EndTime, None).map(|(s, _)| s)
}

/// [`parabolic_vi_evolve`] with a stopping rule; also returns the last
/// step's complementarity data.
pub fn vi_evolve_until(
    u0: &Field,
    spec: &ObstacleSpec,
    params: &ViParams,
    stop: StopRule,
    growth_limit: Option<f64>,
) -> Result<(TimeSeries, Option<VIResult>)> {
    params.validate()?;
    check_initial(u0, spec)?;
    let grid = *spec.grid();
    let step = StepOperator { a: params.a, dt: params.dt };
    let flags = spec.mask.flags();
    let integrator = Integrator {
        dt: params.dt,
        n_steps: step_count(params.t_end, params.dt),
        snapshot_every: params.snapshot_every,
        stop,
        absorption: None,
        obstacle_mask: Some(&spec.mask),
        growth_limit,
    };
    let mut prev: Option<Vec<f64>> = None;
    let mut last: Option<(Vec<f64>, usize)> = None;
    let mut max_residual = 0.0_f64;
    let series = integrator.run(u0.clone(), |n, u| {
        let rhs: Vec<f64> = u.iter().map(|v| v / params.dt).collect();
        let current = u.clone();
        // linear extrapolation as the initial guess
        if let Some(p) = &prev {
            for (v, old) in u.iter_mut().zip(p) {
                *v = (2.0 * *v - old).max(0.0);
            }
        }
        let sweeps = psor(&grid, flags, step, &rhs, u, params.tol, &params.psor).map_err(|e| match e {
            Error::NotConverged { residual, iterations, .. } => Error::Divergence {
                step: n + 1,
                t: (n + 1) as f64 * params.dt,
                what: format!("psor stalled after {iterations} sweeps (residual {residual:.3e})"),
            },
            other => other,
        })?;
        max_residual = max_residual.max(step.natural_residual(&grid, &rhs, u, flags));
        prev = Some(current);
        last = Some((rhs, sweeps));
        Ok(())
    })?;
    log::debug!("obstacle run: {} steps, worst complementarity residual {max_residual:.3e}", series.steps);
    let result = last.map(|(rhs, sweeps)| finish(spec, step, rhs, series.last().values().to_vec(), sweeps));
    Ok((series, result))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StationaryOptions {
    pub dt: f64,
    pub steady_tol: f64,
    pub t_max: f64,
    pub tol: f64,
    pub psor: PsorOptions,
}

impl StationaryOptions {
    pub fn new(a: f64) -> StationaryOptions {
        StationaryOptions { dt: ViParams::default_dt(a), steady_tol: 1e-8, t_max: 200.0, tol: 1e-10, psor: PsorOptions::default() }
    }
}

/// Stationary obstacle solution as the long-time limit of the flow from
/// `seed`. A nontrivial seed selects the nontrivial solution when
/// `λ₁(Ω) < a < λ₁(Ω₀)`; a zero seed stays at zero.
///
/// Returns [`Error::Unbounded`] when the l2 norm passes `10·|Ω|^{1/2}`,
/// the signature of `a ≥ λ₁(Ω₀)`.
pub fn stationary_vi_solve(spec: &ObstacleSpec, a: f64, seed: &Field, opts: &StationaryOptions) -> Result<VIResult> {
    let params = ViParams { a, dt: opts.dt, t_end: opts.t_max, tol: opts.tol, snapshot_every: usize::MAX, psor: opts.psor };
    let limit = 10.0 * spec.grid().domain_measure().sqrt();
    let (series, last) = vi_evolve_until(seed, spec, &params, StopRule::Steady { tol: opts.steady_tol }, Some(limit))?;
    if series.stop != crate::series::StopReason::Steady {
        let dtu = series.observables.last().map_or(f64::NAN, |o| o.dtu_l2);
        return Err(Error::NotConverged { solver: "stationary obstacle flow", iterations: series.steps, residual: dtu });
    }
    Ok(last.expect("a steady stop implies at least one step"))
}
