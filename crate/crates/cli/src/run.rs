//! Subcommand execution: each command runs its study, writes its tables
//! and fields under the output directory, and evaluates its assertions.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use degparlog_core::experiments::{
    classify, coincidence_convergence, commuting_diagram, longtime_study, p_sweep, setup, ExperimentConfig, Regime,
    Setup, SweepReport,
};
use degparlog_core::io::{write_field_csv, write_mask_csv, write_snapshot};
use degparlog_core::logistic::evolve;
use degparlog_core::obstacle::{coincidence_set, stationary_vi_solve, vi_evolve_until, ObstacleSpec, ViParams};
use degparlog_core::spectral::EIGEN_RESIDUAL_TOL;
use degparlog_core::{Error, Field, Mask, NormKind, Result, StopRule, TimeSeries};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Eigen,
    Evolve,
    Obstacle,
    ViEvolve,
    Psweep,
    Longtime,
    Coincidence,
    Diagram,
}

#[derive(Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Default, Serialize)]
pub struct Outcome {
    pub eigenvalues: Value,
    pub metrics: Value,
    pub assertions: Vec<Assertion>,
    pub outputs: Vec<String>,
}

impl Outcome {
    fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        self.assertions.push(Assertion { name: name.into(), passed: value <= threshold, value, threshold });
    }

    fn holds(&mut self, name: &str, ok: bool) {
        let value = if ok { 1.0 } else { 0.0 };
        self.assertions.push(Assertion { name: name.into(), passed: ok, value, threshold: 1.0 });
    }
}

struct Out<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Out<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.written.push(name.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn field(&mut self, stem: &str, f: &Field) -> Result<()> {
        write_field_csv(f, self.create(&format!("{stem}.csv"))?)?;
        write_snapshot(f, self.create(&format!("{stem}.rdvi"))?)
    }

    fn mask(&mut self, name: &str, m: &Mask) -> Result<()> {
        write_mask_csv(m, self.create(name)?)
    }

    fn series(&mut self, s: &TimeSeries) -> Result<()> {
        s.write_csv(self.create("observables.csv")?)?;
        let mut times = self.create("snapshots/times.csv")?;
        writeln!(times, "index,t,file")?;
        for (k, (f, o)) in s.snapshots.iter().zip(&s.observables).enumerate() {
            let name = format!("snapshots/u_{k:05}.rdvi");
            writeln!(times, "{k},{},{}", o.t, name)?;
            write_snapshot(f, self.create(&name)?)?;
        }
        times.flush()?;
        self.field("final", s.last())
    }

    /// One CSV per metric plus a combined table of every metric aligned
    /// with the parameter values.
    fn report(&mut self, r: &SweepReport) -> Result<()> {
        let aligned: Vec<(&String, &Vec<f64>)> =
            r.metrics.iter().filter(|(_, v)| v.len() == r.values.len()).collect();
        let mut w = self.create(&format!("{}.csv", r.study))?;
        write!(w, "{}", r.parameter)?;
        for (name, _) in &aligned {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (k, v) in r.values.iter().enumerate() {
            write!(w, "{v}")?;
            for (_, column) in &aligned {
                write!(w, ",{}", column[k])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        for name in r.metrics.keys() {
            r.write_metric_csv(name, self.create(&format!("metric_{name}.csv"))?)?;
        }
        Ok(())
    }
}

fn eigen_json(s: &Setup) -> Value {
    json!({
        "lambda1_omega": s.omega.lambda1,
        "lambda1_omega0": (!s.omega0.is_infinite()).then_some(s.omega0.lambda1),
        "iterations": [s.omega.iterations, s.omega0.iterations],
        "residuals": [s.omega.residual, s.omega0.residual],
    })
}

pub fn execute(cmd: Command, cfg: &RunConfig, exp: &ExperimentConfig, dir: &Path) -> (Outcome, Result<()>) {
    let mut outcome = Outcome::default();
    let mut out = Out { dir, written: Vec::new() };
    let result = dispatch(cmd, cfg, exp, &mut out, &mut outcome);
    outcome.outputs = out.written;
    (outcome, result)
}

fn dispatch(cmd: Command, cfg: &RunConfig, exp: &ExperimentConfig, out: &mut Out, o: &mut Outcome) -> Result<()> {
    let s = setup(exp)?;
    o.eigenvalues = eigen_json(&s);
    let obstacle = ObstacleSpec::from_domain(&s.spec);
    match cmd {
        Command::Eigen => {
            out.field("phi1_omega", &s.omega.phi1)?;
            if !s.omega0.is_infinite() {
                out.field("phi1_omega0", &s.omega0.phi1)?;
            }
            o.metrics = json!({ "lambda1_h_analytic": s.spec.grid().lambda_min() });
            o.at_most("eigen_residual_omega", s.omega.residual, EIGEN_RESIDUAL_TOL);
            o.at_most("eigen_residual_omega0", s.omega0.residual, EIGEN_RESIDUAL_TOL);
        }
        Command::Evolve => {
            let p = cfg.evolve.p;
            let run = evolve(&s.u0, &s.spec, &exp.evolve_params(p))?;
            out.series(&run)?;
            let min = run.snapshots.iter().flat_map(|f| f.values()).fold(f64::INFINITY, |m, v| m.min(*v));
            o.metrics = json!({
                "p": p,
                "max_sup": run.max_sup(),
                "min_value": min,
                "final": run.observables.last(),
                "steps": run.steps,
            });
            o.holds("nonnegative", min >= 0.0);
            if s.spec.is_nondegenerate() {
                let bound = 1f64.max((exp.a / s.spec.b_inf_off_omega0()).powf(1.0 / (p - 1.0)));
                o.at_most("uniform_bound", run.max_sup(), bound + cfg.assert.bound_slack);
            }
        }
        Command::Obstacle => {
            let w = stationary_vi_solve(&obstacle, exp.a, &s.u0, &exp.stationary_options())?;
            out.field("w", &w.u)?;
            out.mask("active_set.csv", &w.active_set)?;
            let on_mask = w.u.norm(NormKind::LInfOn(obstacle.mask()));
            o.metrics = json!({
                "sup": w.u.sup(),
                "sup_on_mask": on_mask,
                "coincidence_measure": coincidence_set(&w.u, &obstacle, exp.coincidence_eps).measure(),
                "comp_residual": w.comp_residual,
                "psor_sweeps_last_step": w.iterations,
            });
            o.at_most("comp_residual", w.comp_residual, exp.vi_tol);
            o.at_most("feasibility", on_mask, 1.0 + 1e-12);
        }
        Command::ViEvolve => {
            let params = ViParams { dt: cfg.vi.dt.unwrap_or(exp.dt), ..exp.vi_params() };
            let (run, last) = vi_evolve_until(&s.u0, &obstacle, &params, StopRule::EndTime, None)?;
            out.series(&run)?;
            let on_mask = run
                .snapshots
                .iter()
                .map(|f| f.norm(NormKind::LInfOn(obstacle.mask())))
                .fold(0.0, f64::max);
            let comp = last.as_ref().map_or(0.0, |r| r.comp_residual);
            if let Some(r) = &last {
                out.mask("active_set.csv", &r.active_set)?;
            }
            o.metrics = json!({ "max_sup_on_mask": on_mask, "final": run.observables.last(), "comp_residual": comp });
            o.at_most("feasibility", on_mask, 1.0 + 1e-12);
            o.at_most("comp_residual", comp, params.tol);
        }
        Command::Psweep => {
            let r = p_sweep(exp)?;
            out.report(&r)?;
            o.holds("complete", r.is_complete());
            let excess = r.metric("mask_sup_excess").and_then(|m| m.last().copied()).unwrap_or(f64::NAN);
            o.at_most("mask_sup_excess_at_p_max", excess, cfg.assert.sup_excess_max);
            if let Some(from) = cfg.assert.e_monotone_from {
                let e = r.metric("E").unwrap_or_default();
                let start = r.values.iter().position(|&p| p >= from).unwrap_or(e.len());
                o.holds("e_nonincreasing", e[start.min(e.len())..].windows(2).all(|w| w[1] <= w[0]));
            }
            o.metrics = serde_json::to_value(&r).unwrap_or(Value::Null);
        }
        Command::Longtime => {
            let regime = cfg.sweep.regime.unwrap_or_else(|| classify(exp.a, s.omega.lambda1, s.omega0.lambda1));
            let r = longtime_study(exp, regime)?;
            out.report(&r)?;
            match regime {
                Regime::Subcritical => {
                    o.at_most("decay_rate_rel_error", r.scalar("decay_rate_rel_error").unwrap_or(f64::NAN), cfg.assert.rate_rel_tol)
                }
                Regime::Intermediate => o.at_most(
                    "terminal_h1_distance",
                    r.scalar("terminal_h1_distance").unwrap_or(f64::NAN),
                    cfg.assert.h1_distance_max,
                ),
                Regime::Supercritical => o.at_most("hit_time", r.scalar("hit_time").unwrap_or(f64::INFINITY), exp.t_end),
                Regime::Critical => {}
            }
            o.metrics = serde_json::to_value(&r).unwrap_or(Value::Null);
        }
        Command::Coincidence => {
            let r = coincidence_convergence(exp)?;
            out.report(&r)?;
            o.at_most(
                "terminal_symdiff_cells",
                r.scalar("terminal_symdiff_cells").unwrap_or(f64::NAN),
                cfg.assert.symdiff_cells_max,
            );
            o.holds("eventually_nonincreasing", r.scalar("eventually_nonincreasing") == Some(1.0));
            o.metrics = serde_json::to_value(&r).unwrap_or(Value::Null);
        }
        Command::Diagram => {
            let r = commuting_diagram(exp)?;
            out.report(&r)?;
            o.holds("complete", r.is_complete());
            o.at_most("discrepancy_l2", r.scalar("discrepancy_l2").unwrap_or(f64::NAN), cfg.assert.discrepancy_max);
            o.metrics = serde_json::to_value(&r).unwrap_or(Value::Null);
        }
    }
    Ok(())
}

pub fn error_record(e: &Error) -> Value {
    let kind = match e {
        Error::Config(_) => "config",
        Error::Domain(_) => "domain",
        Error::NotConverged { .. } => "not_converged",
        Error::Divergence { .. } => "divergence",
        Error::Unbounded { .. } => "unbounded",
        Error::Format(_) => "format",
        Error::Io(_) => "io",
    };
    json!({ "kind": kind, "message": e.to_string() })
}

pub fn write_report(dir: &Path, report: &Value) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}
