//! Trajectories of time-stepping runs: snapshots plus per-snapshot
//! observables, and the shared stepping loop that records them.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{h1_seminorm, l2_norm, Field, Mask};

/// Nodes with `u ≥ 1 − ACTIVE_TOL` count as touching the obstacle.
pub const ACTIVE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observables {
    pub t: f64,
    pub sup: f64,
    pub l2: f64,
    pub h1: f64,
    /// `‖(u_n − u_{n−1})/dt‖₂`; 0 at `t = 0`.
    pub dtu_l2: f64,
    /// Rectangle-rule `∬ b u^{p+1}` up to `t`.
    pub cum_bupp1: f64,
    /// Measure of the constrained nodes at the obstacle (obstacle runs only).
    pub active_measure: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EndTime,
    Steady,
    SupExceeded,
}

#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub snapshots: Vec<Field>,
    pub observables: Vec<Observables>,
    pub stop: StopReason,
    /// Number of time steps actually taken.
    pub steps: usize,
}

impl TimeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.observables.iter().map(|o| o.t).collect()
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("a time series always holds the initial snapshot")
    }

    pub fn final_time(&self) -> f64 {
        self.observables.last().map_or(0.0, |o| o.t)
    }

    /// Largest sup-norm over all snapshots.
    pub fn max_sup(&self) -> f64 {
        self.observables.iter().fold(0.0, |m, o| m.max(o.sup))
    }

    /// CSV with header `t,sup,l2,h1,dtu_l2,cum_bupp1`, plus
    /// `active_measure` when recorded.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let with_active = self.observables.iter().any(|o| o.active_measure.is_some());
        write!(w, "t,sup,l2,h1,dtu_l2,cum_bupp1")?;
        if with_active {
            write!(w, ",active_measure")?;
        }
        writeln!(w)?;
        for o in &self.observables {
            write!(w, "{},{},{},{},{},{}", o.t, o.sup, o.l2, o.h1, o.dtu_l2, o.cum_bupp1)?;
            if with_active {
                write!(w, ",{}", o.active_measure.unwrap_or(0.0))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// When a run may end before `t_end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    EndTime,
    /// Stop once `‖∂ₜu‖₂ ≤ tol` (backward difference).
    Steady { tol: f64 },
    /// Stop once `‖u‖∞ > threshold`.
    SupAbove { threshold: f64 },
}

pub(crate) struct Integrator<'a> {
    pub dt: f64,
    pub n_steps: usize,
    pub snapshot_every: usize,
    pub stop: StopRule,
    /// `(b, p)` for the absorption integral.
    pub absorption: Option<(&'a [f64], f64)>,
    pub obstacle_mask: Option<&'a Mask>,
    /// Raise [`Error::Unbounded`] once the l2 norm exceeds this.
    pub growth_limit: Option<f64>,
}

pub(crate) fn step_count(t_end: f64, dt: f64) -> usize {
    ((t_end / dt).round() as usize).max(1)
}

impl Integrator<'_> {
    /// Runs `step` from `u0`. The closure maps `u_n` to `u_{n+1}` in place
    /// and receives the step index (starting at 0).
    pub fn run(&self, u0: Field, mut step: impl FnMut(usize, &mut Vec<f64>) -> Result<()>) -> Result<TimeSeries> {
        let grid = *u0.grid();
        let every = self.snapshot_every.max(1);
        let mut cum = 0.0;
        let mut series = TimeSeries { snapshots: Vec::new(), observables: Vec::new(), stop: StopReason::EndTime, steps: 0 };
        let mut u = u0.into_values();
        self.record(&mut series, &grid, &u, 0.0, 0.0, cum);
        let mut prev = u.clone();
        for n in 0..self.n_steps {
            prev.copy_from_slice(&u);
            step(n, &mut u)?;
            let t = (n + 1) as f64 * self.dt;
            if let Some((b, p)) = self.absorption {
                let s: f64 = b
                    .iter()
                    .zip(&u)
                    .filter(|(b, _)| **b > 0.0)
                    .map(|(b, v)| b * v.powf(p + 1.0))
                    .sum();
                cum += self.dt * grid.cell_volume() * s;
            }
            let sup = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if !sup.is_finite() || !cum.is_finite() {
                return Err(Error::Divergence { step: n + 1, t, what: "non-finite solution or absorption integral".into() });
            }
            let diff: Vec<f64> = u.iter().zip(&prev).map(|(a, b)| (a - b) / self.dt).collect();
            let dtu = l2_norm(&grid, &diff);
            if let Some(limit) = self.growth_limit {
                let l2 = l2_norm(&grid, &u);
                if l2 > limit {
                    return Err(Error::Unbounded { t, l2, limit });
                }
            }
            let stop = match self.stop {
                StopRule::EndTime => None,
                StopRule::Steady { tol } => (dtu <= tol).then_some(StopReason::Steady),
                StopRule::SupAbove { threshold } => (sup > threshold).then_some(StopReason::SupExceeded),
            };
            series.steps = n + 1;
            if stop.is_some() || (n + 1) % every == 0 || n + 1 == self.n_steps {
                self.record(&mut series, &grid, &u, t, dtu, cum);
            }
            if let Some(reason) = stop {
                series.stop = reason;
                break;
            }
        }
        Ok(series)
    }

    fn record(&self, series: &mut TimeSeries, grid: &crate::mesh::Grid, u: &[f64], t: f64, dtu: f64, cum: f64) {
        let active_measure = self.obstacle_mask.map(|m| {
            let count = u
                .iter()
                .zip(m.flags())
                .filter(|(v, &on)| on && **v >= 1.0 - ACTIVE_TOL)
                .count();
            count as f64 * grid.cell_volume()
        });
        series.observables.push(Observables {
            t,
            sup: u.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            l2: l2_norm(grid, u),
            h1: h1_seminorm(grid, u),
            dtu_l2: dtu,
            cum_bupp1: cum,
            active_measure,
        });
        series.snapshots.push(Field::from_raw(*grid, u.to_vec()));
    }
}
