//! Run configuration: `[section]` headers with `key = value` lines. Every
//! section and key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use degparlog_core::experiments::{ExperimentConfig, Regime, Seed};
use degparlog_core::io::read_snapshot;
use degparlog_core::obstacle::{PsorOptions, SweepOrder};
use degparlog_core::{AxisBox, BKind, Error, Exec, Grid, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULTS_HELP: &str = "\
Configuration file (all sections and keys optional):

  [grid]
  dim = 1                      inferred from extents when omitted
  extents = [[0.0, 1.0]]       one [lo, hi] pair per axis
  n = [255]                    interior nodes per axis (one entry is broadcast)

  [domain]
  omega0 = [{ lo = [0.4], hi = [0.6] }]
                               degenerate boxes; default is the middle fifth
                               of every axis, [] gives b > 0 everywhere
  b_kind = \"indicator\"         indicator | constant | profile
  b0 = 1.0
  b_file = \"b.txt\"             profile samples (one per node, whitespace or
                               comma separated), required for b_kind = profile

  [evolve]
  a = 20.0
  p = 8.0                      exponent for `evolve`
  dt = 1e-3
  t_end = 10.0
  snapshot_every = 10
  cg_tol = 1e-10
  u0 = \"phi1\"                  phi1 | constant | file
  u0_scale = 0.5               u0 = u0_scale * phi1 (sup-normalised)
  u0_value = 0.5               for u0 = constant
  u0_file = \"u0.rdvi\"          RDVI1 snapshot, for u0 = file

  [vi]
  dt = ...                     step of `obstacle` and `vi-evolve`; defaults to
                               min(1/(2a), 1e-2) and evolve.dt respectively
  tol = 1e-10
  omega = 1.5
  order = \"forward\"            forward | reverse
  max_sweeps = 1000000
  steady_tol = 1e-8
  t_max = 50.0                 horizon cap for long-time limits
  eps = 1e-6                   coincidence threshold

  [sweep]
  p_list = [2, 4, 8, 16, 32, 64, 128, 256]
  p_max = 256.0
  regime = \"intermediate\"      subcritical | critical | intermediate |
                               supercritical; defaults to the computed regime
  growth_threshold = 2.0

  [assert]
  bound_slack = 1e-6
  sup_excess_max = 0.05
  e_monotone_from = 8.0        optional: require E(p) nonincreasing from here
  h1_distance_max = 1e-3
  rate_rel_tol = 0.1
  symdiff_cells_max = 2.0
  discrepancy_max = 5e-2

Relative paths are resolved against the directory of the config file.";

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub domain: DomainSection,
    pub evolve: EvolveSection,
    pub vi: ViSection,
    pub sweep: SweepSection,
    pub assert: AssertSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: Option<usize>,
    pub extents: Vec<[f64; 2]>,
    pub n: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { dim: None, extents: vec![[0.0, 1.0]], n: vec![255] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BKindName {
    Indicator,
    Constant,
    Profile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub omega0: Option<Vec<BoxSpec>>,
    pub b_kind: BKindName,
    pub b0: f64,
    pub b_file: Option<PathBuf>,
}

impl Default for DomainSection {
    fn default() -> Self {
        DomainSection { omega0: None, b_kind: BKindName::Indicator, b0: 1.0, b_file: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum U0Kind {
    Phi1,
    Constant,
    File,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub a: f64,
    pub p: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub cg_tol: f64,
    pub u0: U0Kind,
    pub u0_scale: f64,
    pub u0_value: f64,
    pub u0_file: Option<PathBuf>,
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection {
            a: 20.0,
            p: 8.0,
            dt: 1e-3,
            t_end: 10.0,
            snapshot_every: 10,
            cg_tol: 1e-10,
            u0: U0Kind::Phi1,
            u0_scale: 0.5,
            u0_value: 0.5,
            u0_file: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViSection {
    pub dt: Option<f64>,
    pub tol: f64,
    pub omega: f64,
    pub order: SweepOrder,
    pub max_sweeps: usize,
    pub steady_tol: f64,
    pub t_max: f64,
    pub eps: f64,
}

impl Default for ViSection {
    fn default() -> Self {
        let psor = PsorOptions::default();
        ViSection {
            dt: None,
            tol: 1e-10,
            omega: psor.omega,
            order: psor.order,
            max_sweeps: psor.max_sweeps,
            steady_tol: 1e-8,
            t_max: 50.0,
            eps: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub p_list: Vec<f64>,
    pub p_max: f64,
    pub regime: Option<Regime>,
    pub growth_threshold: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        SweepSection { p_list: d.p_list, p_max: d.p_max, regime: None, growth_threshold: d.growth_threshold }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssertSection {
    pub bound_slack: f64,
    pub sup_excess_max: f64,
    pub e_monotone_from: Option<f64>,
    pub h1_distance_max: f64,
    pub rate_rel_tol: f64,
    pub symdiff_cells_max: f64,
    pub discrepancy_max: f64,
}

impl Default for AssertSection {
    fn default() -> Self {
        AssertSection {
            bound_slack: 1e-6,
            sup_excess_max: 0.05,
            e_monotone_from: None,
            h1_distance_max: 1e-3,
            rate_rel_tol: 0.1,
            symdiff_cells_max: 2.0,
            discrepancy_max: 5e-2,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
}

/// Reads and parses `path`; relative file references become relative to
/// the config's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for file in [&mut cfg.domain.b_file, &mut cfg.evolve.u0_file].into_iter().flatten() {
        if file.is_relative() {
            *file = base.join(&*file);
        }
    }
    Ok(cfg)
}

impl RunConfig {
    /// Fills every default that depends on other keys, so the result can
    /// be echoed as the effective configuration.
    pub fn resolve(mut self) -> Result<RunConfig> {
        let dim = self.grid.dim.unwrap_or(self.grid.extents.len());
        if dim != self.grid.extents.len() {
            return Err(Error::Config(format!(
                "grid.dim = {dim} but {} extents were given",
                self.grid.extents.len()
            )));
        }
        if self.grid.n.len() == 1 && dim == 2 {
            self.grid.n.push(self.grid.n[0]);
        }
        if self.grid.n.len() != dim {
            return Err(Error::Config(format!("grid.n needs {dim} entries, got {}", self.grid.n.len())));
        }
        self.grid.dim = Some(dim);
        if self.domain.omega0.is_none() {
            let (lo, hi) = self.grid.extents.iter().map(|[a, b]| (a + 0.4 * (b - a), a + 0.6 * (b - a))).unzip();
            self.domain.omega0 = Some(vec![BoxSpec { lo, hi }]);
        }
        Ok(self)
    }

    pub fn grid(&self) -> Result<Grid> {
        let extents: Vec<(f64, f64)> = self.grid.extents.iter().map(|[a, b]| (*a, *b)).collect();
        Grid::new(&extents, &self.grid.n)
    }

    fn boxes(&self) -> Result<Vec<AxisBox>> {
        let dim = self.grid.extents.len();
        self.domain
            .omega0
            .iter()
            .flatten()
            .map(|b| {
                if b.lo.len() != dim || b.hi.len() != dim {
                    return Err(Error::Config(format!("omega0 box {b:?} needs {dim} coordinates per corner")));
                }
                Ok(if dim == 1 {
                    AxisBox::interval(b.lo[0], b.hi[0])
                } else {
                    AxisBox::rect((b.lo[0], b.hi[0]), (b.lo[1], b.hi[1]))
                })
            })
            .collect()
    }

    fn b_kind(&self) -> Result<BKind> {
        let b0 = self.domain.b0;
        Ok(match self.domain.b_kind {
            BKindName::Indicator => BKind::Indicator { b0 },
            BKindName::Constant => BKind::Constant { b0 },
            BKindName::Profile => {
                let path = self
                    .domain
                    .b_file
                    .as_ref()
                    .ok_or_else(|| Error::Config("b_kind = profile needs domain.b_file".into()))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let samples = text
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("{}: bad sample {s:?}: {e}", path.display()))))
                    .collect::<Result<Vec<f64>>>()?;
                BKind::Profile { samples }
            }
        })
    }

    fn seed(&self) -> Result<Seed> {
        Ok(match self.evolve.u0 {
            U0Kind::Phi1 => Seed::Phi1 { scale: self.evolve.u0_scale },
            U0Kind::Constant => Seed::Constant { value: self.evolve.u0_value },
            U0Kind::File => {
                let path = self
                    .evolve
                    .u0_file
                    .as_ref()
                    .ok_or_else(|| Error::Config("u0 = file needs evolve.u0_file".into()))?;
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
                let snap = read_snapshot(std::io::BufReader::new(file))?;
                Seed::Values { values: snap.into_field(self.grid()?)?.into_values() }
            }
        })
    }

    pub fn experiment(&self, exec: Exec) -> Result<ExperimentConfig> {
        let grid = self.grid()?;
        Ok(ExperimentConfig {
            extents: grid.extents(),
            n: grid.n_interior().to_vec(),
            omega0: self.boxes()?,
            b: self.b_kind()?,
            a: self.evolve.a,
            dt: self.evolve.dt,
            t_end: self.evolve.t_end,
            snapshot_every: self.evolve.snapshot_every,
            cg_tol: self.evolve.cg_tol,
            vi_tol: self.vi.tol,
            psor: PsorOptions { omega: self.vi.omega, order: self.vi.order, max_sweeps: self.vi.max_sweeps },
            seed: self.seed()?,
            p_list: self.sweep.p_list.clone(),
            p_max: self.sweep.p_max,
            steady_tol: self.vi.steady_tol,
            stationary_dt: self.vi.dt,
            t_max: self.vi.t_max,
            growth_threshold: self.sweep.growth_threshold,
            coincidence_eps: self.vi.eps,
            exec,
        })
    }
}
