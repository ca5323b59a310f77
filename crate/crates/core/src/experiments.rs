//! Convergence studies: `p → ∞` at fixed horizon, `t → ∞` in each regime
//! of `a` relative to `λ₁(Ω)` and `λ₁(Ω₀)`, convergence of coincidence
//! sets, and the two orders of taking both limits.
//!
//! Every study is deterministic: the solvers use fixed sweep orders and the
//! fan-out over sweep entries never shares mutable state, so
//! [`Exec::Sequential`] and [`Exec::Parallel`] produce bit-identical reports.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::logistic::{evolve, evolve_until, max_subsolution_scale, subsolution_margin, EvolveParams};
use crate::mesh::{h1_seminorm, sample_domain, AxisBox, BKind, DomainSpec, Field, Grid, Mask, NormKind};
use crate::obstacle::{
    coincidence_set, parabolic_vi_evolve, stationary_vi_solve, vi_evolve_until, ObstacleSpec, PsorOptions,
    StationaryOptions, ViParams,
};
use crate::series::{StopReason, StopRule, TimeSeries};
use crate::spectral::{principal_eigenpair, EigenPair, Region};

/// How the initial datum is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seed {
    /// `scale · φ₁(Ω)` with `‖φ₁‖∞ = 1`.
    Phi1 { scale: f64 },
    Constant { value: f64 },
    Values { values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub extents: Vec<(f64, f64)>,
    pub n: Vec<usize>,
    pub omega0: Vec<AxisBox>,
    pub b: BKind,
    pub a: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub cg_tol: f64,
    pub vi_tol: f64,
    pub psor: PsorOptions,
    pub seed: Seed,
    pub p_list: Vec<f64>,
    pub p_max: f64,
    /// Long-time limits stop once `‖∂ₜu‖₂ ≤ steady_tol`.
    pub steady_tol: f64,
    /// Step of the stationary obstacle solve; defaults to `min(1/(2a), 1e−2)`.
    pub stationary_dt: Option<f64>,
    /// Horizon cap for long-time limits.
    pub t_max: f64,
    pub growth_threshold: f64,
    pub coincidence_eps: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ExperimentConfig {
    /// `Ω = (0,1)`, 255 interior nodes, `Ω₀ = (0.4, 0.6)`, `b = χ_{Ω∖Ω₀}`,
    /// `a = 20`, `dt = 1e−3`, `T = 10`.
    fn default() -> Self {
        ExperimentConfig {
            extents: vec![(0.0, 1.0)],
            n: vec![255],
            omega0: vec![AxisBox::interval(0.4, 0.6)],
            b: BKind::Indicator { b0: 1.0 },
            a: 20.0,
            dt: 1e-3,
            t_end: 10.0,
            snapshot_every: 10,
            cg_tol: 1e-10,
            vi_tol: 1e-10,
            psor: PsorOptions::default(),
            seed: Seed::Phi1 { scale: 0.5 },
            p_list: (1..=8).map(|k| 2f64.powi(k)).collect(),
            p_max: 256.0,
            steady_tol: 1e-8,
            stationary_dt: None,
            t_max: 50.0,
            growth_threshold: 2.0,
            coincidence_eps: 1e-6,
            exec: Exec::default(),
        }
    }
}

impl ExperimentConfig {
    /// The default configuration with `b ≡ 1` on all of `Ω`.
    pub fn nondegenerate() -> Self {
        ExperimentConfig { omega0: Vec::new(), b: BKind::Constant { b0: 1.0 }, ..Default::default() }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(&self.extents, &self.n)
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        sample_domain(self.grid()?, &self.omega0, self.b.clone())
    }

    pub fn initial_data(&self, spec: &DomainSpec, phi1: &EigenPair) -> Result<Field> {
        let grid = *spec.grid();
        match &self.seed {
            Seed::Phi1 { scale } => Ok(phi1.phi1.scaled(*scale)),
            Seed::Constant { value } => Ok(Field::constant(grid, *value)),
            Seed::Values { values } => Field::from_values(grid, values.clone()),
        }
    }

    pub fn evolve_params(&self, p: f64) -> EvolveParams {
        EvolveParams { a: self.a, p, dt: self.dt, t_end: self.t_end, snapshot_every: self.snapshot_every, cg_tol: self.cg_tol }
    }

    pub fn vi_params(&self) -> ViParams {
        ViParams { a: self.a, dt: self.dt, t_end: self.t_end, tol: self.vi_tol, snapshot_every: self.snapshot_every, psor: self.psor }
    }

    pub fn stationary_options(&self) -> StationaryOptions {
        StationaryOptions {
            dt: self.stationary_dt.unwrap_or_else(|| ViParams::default_dt(self.a)),
            steady_tol: self.steady_tol,
            t_max: self.t_max,
            tol: self.vi_tol,
            psor: self.psor,
        }
    }

    /// Checks every solver precondition that can be checked before a run.
    pub fn validate(&self) -> Result<()> {
        let spec = self.domain()?;
        self.evolve_params(self.p_max).validate()?;
        self.vi_params().validate()?;
        let st = self.stationary_options();
        ViParams { a: self.a, dt: st.dt, t_end: self.t_max, tol: self.vi_tol, snapshot_every: 1, psor: self.psor }
            .validate()?;
        if self.p_list.iter().any(|p| !(*p > 1.0)) || self.p_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("p_list must be strictly ascending with every p > 1".into()));
        }
        if let Seed::Values { values } = &self.seed {
            Field::from_values(*spec.grid(), values.clone())?;
        }
        if !(self.steady_tol > 0.0 && self.coincidence_eps > 0.0) {
            return Err(Error::Config("steady_tol and coincidence_eps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunMetadata {
    pub n_interior: Vec<usize>,
    pub extents: Vec<(f64, f64)>,
    pub cell_volume: f64,
    pub dt: f64,
    pub t_end: f64,
    pub cg_tol: f64,
    pub vi_tol: f64,
    pub lambda1_omega: f64,
    /// `None` encodes `λ₁(Ω₀) = +∞` (empty `Ω₀`).
    pub lambda1_omega0: Option<f64>,
}

/// Tabular result of a study: one row per parameter value.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepReport {
    pub study: String,
    /// Name of the swept parameter (`p` or `t`).
    pub parameter: String,
    pub values: Vec<f64>,
    pub metrics: BTreeMap<String, Vec<f64>>,
    pub scalars: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub metadata: RunMetadata,
    /// Set when a run diverged; the table then holds the entries before it.
    pub error: Option<String>,
}

impl SweepReport {
    fn new(study: &str, parameter: &str, metadata: RunMetadata) -> SweepReport {
        SweepReport { study: study.into(), parameter: parameter.into(), metadata, ..Default::default() }
    }

    pub fn metric(&self, name: &str) -> Option<&[f64]> {
        self.metrics.get(name).map(Vec::as_slice)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).copied()
    }

    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }

    /// Two-column CSV `parameter,metric`.
    pub fn write_metric_csv<W: Write>(&self, name: &str, mut w: W) -> Result<()> {
        let column = self
            .metrics
            .get(name)
            .ok_or_else(|| Error::Config(format!("report has no metric named {name}")))?;
        writeln!(w, "{},{}", self.parameter, name)?;
        for (v, m) in self.values.iter().zip(column) {
            writeln!(w, "{v},{m}")?;
        }
        Ok(())
    }
}

/// Eigenpairs on `Ω` and `Ω₀` plus the sampled domain.
pub struct Setup {
    pub spec: DomainSpec,
    pub omega: EigenPair,
    pub omega0: EigenPair,
    pub u0: Field,
    pub metadata: RunMetadata,
}

pub fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let spec = cfg.domain()?;
    let (omega, omega0) = cfg.exec.join(
        || principal_eigenpair(&spec, Region::Omega),
        || principal_eigenpair(&spec, Region::Omega0),
    );
    let (omega, omega0) = (omega?, omega0?);
    let u0 = cfg.initial_data(&spec, &omega)?;
    let grid = *spec.grid();
    let metadata = RunMetadata {
        n_interior: grid.n_interior().to_vec(),
        extents: grid.extents(),
        cell_volume: grid.cell_volume(),
        dt: cfg.dt,
        t_end: cfg.t_end,
        cg_tol: cfg.cg_tol,
        vi_tol: cfg.vi_tol,
        lambda1_omega: omega.lambda1,
        lambda1_omega0: (!omega0.is_infinite()).then_some(omega0.lambda1),
    };
    Ok(Setup { spec, omega, omega0, u0, metadata })
}

fn h1_distance(a: &Field, b: &Field) -> f64 {
    let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    h1_seminorm(a.grid(), &d)
}

fn l2_distance(a: &Field, b: &Field) -> f64 {
    let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    crate::mesh::l2_norm(a.grid(), &d)
}

/// `sqrt(Σ_k ‖u_p(t_k) − u(t_k)‖²_{H¹} (t_k − t_{k−1}))` over shared
/// snapshot times.
pub fn l2_h1_distance(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    if a.observables.len() != b.observables.len() {
        return Err(Error::Config("trajectories have different snapshot counts".into()));
    }
    let mut acc = 0.0;
    for k in 1..a.snapshots.len() {
        let (ta, tb) = (a.observables[k].t, b.observables[k].t);
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
            return Err(Error::Config(format!("snapshot times differ: {ta} vs {tb}")));
        }
        let d = h1_distance(&a.snapshots[k], &b.snapshots[k]);
        acc += d * d * (ta - a.observables[k - 1].t);
    }
    Ok(acc.sqrt())
}

/// `max(0, max u − 1)` over constrained nodes and snapshots with `t ≥ t_from`.
pub fn mask_sup_excess(series: &TimeSeries, mask: &Mask, t_from: f64) -> f64 {
    series
        .snapshots
        .iter()
        .zip(&series.observables)
        .filter(|(_, o)| o.t >= t_from - 1e-12)
        .flat_map(|(f, _)| f.values().iter().zip(mask.flags()).filter(|(_, &on)| on).map(|(v, _)| *v))
        .fold(0.0_f64, |m, v| m.max(v - 1.0))
}

/// `u_p → u` at fixed horizon: runs the logistic scheme for every `p` in
/// the list and the obstacle flow once, on identical grids and steps.
pub fn p_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let s = setup(cfg)?;
    let obstacle = ObstacleSpec::from_domain(&s.spec);
    let mut report = SweepReport::new("psweep", "p", s.metadata.clone());
    let limit = match parabolic_vi_evolve(&s.u0, &obstacle, &cfg.vi_params()) {
        Ok(limit) => limit,
        Err(err) => {
            report.error = Some(format!("obstacle flow: {err}"));
            return Ok(report);
        }
    };
    let runs = cfg.exec.map(&cfg.p_list, |&p| evolve(&s.u0, &s.spec, &cfg.evolve_params(p)));
    let (mut e, mut excess, mut sup, mut energy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (&p, run) in cfg.p_list.iter().zip(runs) {
        let run = match run {
            Ok(run) => run,
            Err(err) => {
                report.error = Some(format!("p = {p}: {err}"));
                break;
            }
        };
        report.values.push(p);
        e.push(l2_h1_distance(&run, &limit)?);
        excess.push(mask_sup_excess(&run, obstacle.mask(), 0.5 * cfg.t_end));
        sup.push(run.max_sup());
        energy.push(run.observables.last().map_or(0.0, |o| o.cum_bupp1));
    }
    report.metrics.insert("E".into(), e);
    report.metrics.insert("mask_sup_excess".into(), excess);
    report.metrics.insert("max_sup".into(), sup);
    report.metrics.insert("cum_bupp1".into(), energy);
    report.scalars.insert("limit_max_sup".into(), limit.max_sup());
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `a < λ₁(Ω)`: decay to zero.
    Subcritical,
    /// `a = λ₁(Ω)` up to `1e−9` relative: `cφ₁` is steady for every `c`.
    Critical,
    /// `λ₁(Ω) < a < λ₁(Ω₀)`: convergence to the nontrivial stationary solution.
    Intermediate,
    /// `a ≥ λ₁(Ω₀)`: unbounded growth.
    Supercritical,
}

/// Classifies `a` against the two principal eigenvalues.
pub fn classify(a: f64, lambda_omega: f64, lambda_omega0: f64) -> Regime {
    if (a - lambda_omega).abs() <= 1e-9 * lambda_omega {
        Regime::Critical
    } else if a < lambda_omega {
        Regime::Subcritical
    } else if a < lambda_omega0 {
        Regime::Intermediate
    } else {
        Regime::Supercritical
    }
}

/// Least-squares slope of `ln ‖u(t)‖₂` over snapshots with `t` in `window`.
pub fn decay_rate_fit(series: &TimeSeries, window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .observables
        .iter()
        .filter(|o| o.t >= window.0 - 1e-12 && o.t <= window.1 + 1e-12)
        .map(|o| (o.t, o.l2))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Config(format!("decay fit needs at least 3 samples in the window, got {}", pts.len())));
    }
    if let Some((t, _)) = pts.iter().find(|(_, l)| !(*l > 0.0)) {
        return Err(Error::Domain(format!("l2 norm is not positive at t = {t}")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    Ok(sxy / sxx)
}

/// Long-time behaviour of the obstacle flow in the regime named by
/// `regime`, which must agree with the computed eigenvalues.
pub fn longtime_study(cfg: &ExperimentConfig, regime: Regime) -> Result<SweepReport> {
    let s = setup(cfg)?;
    let computed = classify(cfg.a, s.omega.lambda1, s.omega0.lambda1);
    if computed != regime {
        return Err(Error::Config(format!(
            "a = {} is {computed:?} (λ₁(Ω) = {}, λ₁(Ω₀) = {}), not {regime:?}",
            cfg.a, s.omega.lambda1, s.omega0.lambda1
        )));
    }
    let obstacle = ObstacleSpec::from_domain(&s.spec);
    let mut report = SweepReport::new("longtime", "t", s.metadata.clone());
    report.notes.push(format!("regime: {regime:?}"));
    match regime {
        Regime::Subcritical => {
            let run = parabolic_vi_evolve(&s.u0, &obstacle, &cfg.vi_params())?;
            push_trajectory(&mut report, &run);
            let rate = -decay_rate_fit(&run, (0.5 * cfg.t_end, cfg.t_end))?;
            let gap = s.omega.lambda1 - cfg.a;
            report.scalars.insert("decay_rate".into(), rate);
            report.scalars.insert("lambda1_minus_a".into(), gap);
            report.scalars.insert("implicit_euler_rate".into(), (1.0 + cfg.dt * gap).ln() / cfg.dt);
            report.scalars.insert("decay_rate_rel_error".into(), (rate - gap).abs() / gap);
        }
        Regime::Critical => {
            let run = parabolic_vi_evolve(&s.u0, &obstacle, &cfg.vi_params())?;
            push_trajectory(&mut report, &run);
            let u = run.last();
            let c = u.dot(&s.omega.phi1) / s.omega.phi1.dot(&s.omega.phi1);
            report.scalars.insert("fitted_c".into(), c);
            report.scalars.insert("profile_l2_misfit".into(), l2_distance(u, &s.omega.phi1.scaled(c)));
            report.notes.push("critical a: the limit is a multiple of φ₁ depending on u0".into());
        }
        Regime::Intermediate => {
            let (w, run) = cfg.exec.join(
                || stationary_vi_solve(&obstacle, cfg.a, &s.u0, &cfg.stationary_options()),
                || parabolic_vi_evolve(&s.u0, &obstacle, &cfg.vi_params()),
            );
            let (w, run) = (w?, run?);
            push_trajectory(&mut report, &run);
            let dist: Vec<f64> = run.snapshots.iter().map(|u| h1_distance(u, &w.u)).collect();
            report.scalars.insert("terminal_h1_distance".into(), *dist.last().unwrap_or(&f64::NAN));
            report.metrics.insert("h1_distance".into(), dist);
            report.scalars.insert("w_sup".into(), w.u.sup());
            report.scalars.insert("w_sup_on_mask".into(), w.u.norm(NormKind::LInfOn(obstacle.mask())));
            report.scalars.insert("w_coincidence_measure".into(), w.active_set.measure());
            report.scalars.insert("w_comp_residual".into(), w.comp_residual);
        }
        Regime::Supercritical => {
            let (run, _) = vi_evolve_until(
                &s.u0,
                &obstacle,
                &cfg.vi_params(),
                StopRule::SupAbove { threshold: cfg.growth_threshold },
                None,
            )?;
            push_trajectory(&mut report, &run);
            let hit = (run.stop == StopReason::SupExceeded).then(|| run.final_time());
            report.scalars.insert("growth_threshold".into(), cfg.growth_threshold);
            report.scalars.insert("hit_time".into(), hit.unwrap_or(f64::INFINITY));
            if hit.is_none() {
                report.notes.push(format!("sup-norm stayed below {} up to t = {}", cfg.growth_threshold, cfg.t_end));
            }
        }
    }
    Ok(report)
}

fn push_trajectory(report: &mut SweepReport, run: &TimeSeries) {
    report.values = run.times();
    report.metrics.insert("sup".into(), run.observables.iter().map(|o| o.sup).collect());
    report.metrics.insert("l2".into(), run.observables.iter().map(|o| o.l2).collect());
    report.metrics.insert("h1".into(), run.observables.iter().map(|o| o.h1).collect());
    report.metrics.insert("dtu_l2".into(), run.observables.iter().map(|o| o.dtu_l2).collect());
    if run.observables.iter().all(|o| o.active_measure.is_some()) {
        report
            .metrics
            .insert("active_measure".into(), run.observables.iter().map(|o| o.active_measure.unwrap_or(0.0)).collect());
    }
}

/// `|{u(t) = 1} Δ {w = 1}|` along the obstacle flow from the configured
/// seed. Requires `b > 0` on all of `Ω`.
pub fn coincidence_convergence(cfg: &ExperimentConfig) -> Result<SweepReport> {
    coincidence_convergence_from(cfg, None)
}

/// As [`coincidence_convergence`]; `start = Some(u)` overrides the seed
/// (the stationary solution itself, for instance).
pub fn coincidence_convergence_from(cfg: &ExperimentConfig, start: Option<&Field>) -> Result<SweepReport> {
    let s = setup(cfg)?;
    if !s.spec.is_nondegenerate() {
        return Err(Error::Config("coincidence study needs b > 0 on all of Ω (empty Ω₀)".into()));
    }
    let obstacle = ObstacleSpec::from_domain(&s.spec);
    let u0 = start.unwrap_or(&s.u0);
    let (w, run) = cfg.exec.join(
        || stationary_vi_solve(&obstacle, cfg.a, &s.u0, &cfg.stationary_options()),
        || parabolic_vi_evolve(u0, &obstacle, &cfg.vi_params()),
    );
    let (w, run) = (w?, run?);
    let target = coincidence_set(&w.u, &obstacle, cfg.coincidence_eps);
    let sets: Vec<Mask> = run.snapshots.iter().map(|u| coincidence_set(u, &obstacle, cfg.coincidence_eps)).collect();
    let symdiff: Vec<f64> = sets.iter().map(|m| m.symmetric_difference_measure(&target)).collect();
    let cell = s.spec.grid().cell_volume();

    let mut report = SweepReport::new("coincidence", "t", s.metadata.clone());
    report.values = run.times();
    report.metrics.insert("coincidence_measure".into(), sets.iter().map(Mask::measure).collect());
    report.scalars.insert("terminal_symdiff".into(), *symdiff.last().unwrap_or(&f64::NAN));
    report.scalars.insert("terminal_symdiff_cells".into(), symdiff.last().map_or(f64::NAN, |m| m / cell));
    report.scalars.insert("w_coincidence_measure".into(), target.measure());
    report.scalars.insert("w_sup".into(), w.u.sup());
    // nonincreasing once the flow first touches the obstacle
    let first_touch = sets.iter().position(|m| m.count() > 0);
    let monotone = match first_touch {
        Some(k) => symdiff[k..].windows(2).all(|p| p[1] <= p[0]),
        None => symdiff.windows(2).all(|p| p[1] <= p[0]),
    };
    report.scalars.insert("eventually_nonincreasing".into(), if monotone { 1.0 } else { 0.0 });
    report.scalars.insert(
        "first_touch_time".into(),
        first_touch.map_or(f64::INFINITY, |k| report.values[k]),
    );
    if cfg.a < 1.1 * s.omega.lambda1 {
        report.notes.push(format!(
            "near-critical regime: a / λ₁(Ω) = {:.4}; coincidence sets may be empty at this resolution",
            cfg.a / s.omega.lambda1
        ));
        report.scalars.insert("near_critical".into(), 1.0);
    } else {
        report.scalars.insert("near_critical".into(), 0.0);
    }
    report.metrics.insert("symdiff".into(), symdiff);
    Ok(report)
}

/// Both orders of the limits `p → ∞`, `t → ∞`:
///
/// - A: long-time limit of the logistic scheme at `p_max`;
/// - B: stationary obstacle solution (long-time limit of the obstacle flow);
/// - transient: `u_{p_max}(T)` against the obstacle flow at `T`.
///
/// The reported discrepancy is `‖A − B‖₂`.
pub fn commuting_diagram(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let s = setup(cfg)?;
    let obstacle = ObstacleSpec::from_domain(&s.spec);
    let mut report = SweepReport::new("diagram", "p", s.metadata.clone());
    report.values = vec![cfg.p_max];
    let long = EvolveParams { t_end: cfg.t_max, snapshot_every: usize::MAX, ..cfg.evolve_params(cfg.p_max) };
    let ((a_run, b), (c_run, d_run)) = cfg.exec.join(
        || {
            cfg.exec.join(
                || evolve_until(&s.u0, &s.spec, &long, StopRule::Steady { tol: cfg.steady_tol }),
                || stationary_vi_solve(&obstacle, cfg.a, &s.u0, &cfg.stationary_options()),
            )
        },
        || {
            cfg.exec.join(
                || evolve(&s.u0, &s.spec, &EvolveParams { snapshot_every: usize::MAX, ..cfg.evolve_params(cfg.p_max) }),
                || parabolic_vi_evolve(&s.u0, &obstacle, &ViParams { snapshot_every: usize::MAX, ..cfg.vi_params() }),
            )
        },
    );
    let mut errors = Vec::new();
    let mut keep = |name: &str, r: Result<TimeSeries>| match r {
        Ok(run) => Some(run),
        Err(e) => {
            errors.push(format!("{name}: {e}"));
            None
        }
    };
    let (a_run, c_run, d_run) = (keep("A", a_run), keep("C", c_run), keep("D", d_run));
    let b = b.map_err(|e| errors.push(format!("B: {e}"))).ok();
    if let (Some(c), Some(d)) = (&c_run, &d_run) {
        report.scalars.insert("transient_l2_distance".into(), l2_distance(c.last(), d.last()));
    }
    let mut discrepancy = f64::NAN;
    if let (Some(a), Some(b)) = (&a_run, &b) {
        discrepancy = l2_distance(a.last(), &b.u);
        report.scalars.insert("discrepancy_l2".into(), discrepancy);
        report.scalars.insert("discrepancy_h1".into(), h1_distance(a.last(), &b.u));
        report.scalars.insert("a_steady".into(), if a.stop == StopReason::Steady { 1.0 } else { 0.0 });
        report.scalars.insert("a_time".into(), a.final_time());
        report.scalars.insert("b_sup".into(), b.u.sup());
    }
    report.metrics.insert("discrepancy_l2".into(), vec![discrepancy]);
    if !errors.is_empty() {
        report.notes.push(format!("regime: {:?}", classify(cfg.a, s.omega.lambda1, s.omega0.lambda1)));
        report.error = Some(errors.join("; "));
    }
    Ok(report)
}

/// Outcome of the `c·φ₁` subsolution check for one `p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsolutionCheck {
    pub p: f64,
    /// Largest `c` with nonnegative margin (bisection).
    pub c_max: f64,
    /// Scale actually used: `min(c_max/2, 1)`, strictly inside the
    /// certified range and admissible as initial data.
    pub c: f64,
    pub margin: f64,
    /// `min over nodes and snapshots of u(t) − c·φ₁`.
    pub min_slack: f64,
}

/// Finds a certified `c`, runs the logistic scheme from `c·φ₁(Ω)` and
/// records how far the trajectory stays above `c·φ₁`.
pub fn subsolution_check(cfg: &ExperimentConfig, p: f64) -> Result<SubsolutionCheck> {
    let s = setup(cfg)?;
    let c_max = max_subsolution_scale(&s.spec, &s.omega, cfg.a, p)
        .ok_or_else(|| Error::Config(format!("a = {} does not exceed λ₁(Ω) = {}", cfg.a, s.omega.lambda1)))?;
    let c = (0.5 * c_max).min(1.0);
    let margin = subsolution_margin(&s.spec, &s.omega, c, cfg.a, p);
    let floor = s.omega.phi1.scaled(c);
    let run = evolve(&floor, &s.spec, &cfg.evolve_params(p))?;
    let min_slack = run
        .snapshots
        .iter()
        .flat_map(|u| u.values().iter().zip(floor.values()).map(|(v, f)| v - f))
        .fold(f64::INFINITY, f64::min);
    Ok(SubsolutionCheck { p, c_max, c, margin, min_slack })
}
