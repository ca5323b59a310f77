//! Uniform tensor grids with homogeneous Dirichlet data, grid functions,
//! the five-point (three-point in 1D) negative Laplacian, discrete norms and
//! sampling of the absorption coefficient `b(x)` with its vanishing region.
//!
//! Nodal values are stored for interior nodes only, row-major: in 2D the
//! value at `(i0, i1)` lives at `i0 * n[1] + i1`. Boundary values are
//! implicitly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance (in units of `h`) used to decide that a node sits
/// exactly on the edge of an `Ω₀` box.
const EDGE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    n: [usize; 2],
    h: [f64; 2],
}

impl Grid {
    /// Builds a 1D or 2D grid from per-axis `(lo, hi)` extents and interior
    /// node counts.
    pub fn new(extents: &[(f64, f64)], n_interior: &[usize]) -> Result<Grid> {
        let dim = extents.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::Config(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if n_interior.len() != dim {
            return Err(Error::Config(format!(
                "expected {dim} interior node counts, got {}",
                n_interior.len()
            )));
        }
        let mut grid = Grid { dim, lo: [0.0; 2], hi: [1.0; 2], n: [1; 2], h: [1.0; 2] };
        for axis in 0..dim {
            let (lo, hi) = extents[axis];
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::Config(format!(
                    "axis {axis}: extent ({lo}, {hi}) must satisfy lo < hi"
                )));
            }
            let n = n_interior[axis];
            if n == 0 {
                return Err(Error::Config(format!("axis {axis}: need at least one interior node")));
            }
            grid.lo[axis] = lo;
            grid.hi[axis] = hi;
            grid.n[axis] = n;
            grid.h[axis] = (hi - lo) / (n + 1) as f64;
        }
        Ok(grid)
    }

    /// Unit interval with `n` interior nodes.
    pub fn unit_interval(n: usize) -> Result<Grid> {
        Grid::new(&[(0.0, 1.0)], &[n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_interior(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn extents(&self) -> Vec<(f64, f64)> {
        (0..self.dim).map(|k| (self.lo[k], self.hi[k])).collect()
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.n[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[..self.dim].iter().product()
    }

    /// Lebesgue measure of the whole domain.
    pub fn domain_measure(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }

    /// Coordinate of interior node `i` (1-based in the continuum sense:
    /// index 0 here is the first interior node `lo + h`).
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + (i + 1) as f64 * self.h[axis]
    }

    /// Coordinates of the node at flat index `idx`. Unused axes are 0.
    pub fn node(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.coord(0, idx), 0.0],
            _ => {
                let (i0, i1) = (idx / self.n[1], idx % self.n[1]);
                [self.coord(0, i0), self.coord(1, i1)]
            }
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |idx| self.node(idx))
    }

    /// Smallest eigenvalue of the discrete negative Laplacian on the full
    /// grid, `Σ_k (2/h_k²)(1 − cos(π h_k / L_k))`.
    pub fn lambda_min(&self) -> f64 {
        (0..self.dim)
            .map(|k| {
                let h = self.h[k];
                let len = self.hi[k] - self.lo[k];
                2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h / len).cos())
            })
            .sum()
    }

    /// Diagonal entry of the negative Laplacian.
    pub fn laplacian_diagonal(&self) -> f64 {
        self.h[..self.dim].iter().map(|h| 2.0 / (h * h)).sum()
    }

    pub(crate) fn same_shape(&self, other: &Grid) -> bool {
        self.dim == other.dim && self.n == other.n
    }
}

/// Applies the negative Laplacian with zero Dirichlet data:
/// `out = L f`. Slices must have length `grid.len()`.
pub fn neg_laplacian_into(grid: &Grid, f: &[f64], out: &mut [f64]) {
    debug_assert_eq!(f.len(), grid.len());
    debug_assert_eq!(out.len(), grid.len());
    match grid.dim {
        1 => {
            let n = grid.n[0];
            let c = 1.0 / (grid.h[0] * grid.h[0]);
            for i in 0..n {
                let left = if i > 0 { f[i - 1] } else { 0.0 };
                let right = if i + 1 < n { f[i + 1] } else { 0.0 };
                out[i] = c * (2.0 * f[i] - left - right);
            }
        }
        _ => {
            let (n0, n1) = (grid.n[0], grid.n[1]);
            let c0 = 1.0 / (grid.h[0] * grid.h[0]);
            let c1 = 1.0 / (grid.h[1] * grid.h[1]);
            for i0 in 0..n0 {
                for i1 in 0..n1 {
                    let k = i0 * n1 + i1;
                    let up = if i0 > 0 { f[k - n1] } else { 0.0 };
                    let down = if i0 + 1 < n0 { f[k + n1] } else { 0.0 };
                    let left = if i1 > 0 { f[k - 1] } else { 0.0 };
                    let right = if i1 + 1 < n1 { f[k + 1] } else { 0.0 };
                    out[k] = c0 * (2.0 * f[k] - up - down) + c1 * (2.0 * f[k] - left - right);
                }
            }
        }
    }
}

/// Visits the off-diagonal entries of row `k` of the negative Laplacian
/// as `(column, coefficient)` pairs. Coefficients are negative.
#[inline]
pub(crate) fn for_each_neighbor(grid: &Grid, k: usize, mut visit: impl FnMut(usize, f64)) {
    match grid.dim {
        1 => {
            let c = -1.0 / (grid.h[0] * grid.h[0]);
            if k > 0 {
                visit(k - 1, c);
            }
            if k + 1 < grid.n[0] {
                visit(k + 1, c);
            }
        }
        _ => {
            let (n0, n1) = (grid.n[0], grid.n[1]);
            let (i0, i1) = (k / n1, k % n1);
            let c0 = -1.0 / (grid.h[0] * grid.h[0]);
            let c1 = -1.0 / (grid.h[1] * grid.h[1]);
            if i0 > 0 {
                visit(k - n1, c0);
            }
            if i0 + 1 < n0 {
                visit(k + n1, c0);
            }
            if i1 > 0 {
                visit(k - 1, c1);
            }
            if i1 + 1 < n1 {
                visit(k + 1, c1);
            }
        }
    }
}

/// A grid function: one real value per interior node.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Field {
        Field { values: vec![0.0; grid.len()], grid }
    }

    pub fn constant(grid: Grid, value: f64) -> Field {
        Field { values: vec![value; grid.len()], grid }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values but the grid has {} interior nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f` at every interior node.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Field {
        let values = grid.nodes().map(f).collect();
        Field { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Field {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|v| v * s).collect())
    }

    /// `self - other`, nodewise.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_shape(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field::from_raw(self.grid, values))
    }

    pub fn check_shape(&self, other: &Field) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::Config("fields live on different grids".into()))
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Weighted inner product `Σ f_i g_i · cellvol`.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn norm(&self, kind: NormKind<'_>) -> f64 {
        norm(self, kind)
    }
}

/// Discrete negative Laplacian of `f` (positive-definite sign convention).
pub fn apply_laplacian(f: &Field) -> Field {
    let mut out = vec![0.0; f.len()];
    neg_laplacian_into(&f.grid, &f.values, &mut out);
    Field::from_raw(f.grid, out)
}

#[derive(Clone, Copy, Debug)]
pub enum NormKind<'a> {
    L2,
    H1Semi,
    LInf,
    LInfOn(&'a Mask),
}

pub fn l2_norm(grid: &Grid, values: &[f64]) -> f64 {
    (grid.cell_volume() * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Discrete H¹ seminorm over all grid edges, including the two one-sided
/// edges to the zero boundary on every grid line.
pub fn h1_seminorm(grid: &Grid, values: &[f64]) -> f64 {
    let mut acc = 0.0;
    match grid.dim {
        1 => acc += line_sum_sq(values.iter().copied(), grid.h[0]),
        _ => {
            let (n0, n1) = (grid.n[0], grid.n[1]);
            for i0 in 0..n0 {
                acc += line_sum_sq(values[i0 * n1..(i0 + 1) * n1].iter().copied(), grid.h[1]);
            }
            for i1 in 0..n1 {
                acc += line_sum_sq((0..n0).map(|i0| values[i0 * n1 + i1]), grid.h[0]);
            }
        }
    }
    (acc * grid.cell_volume()).sqrt()
}

fn line_sum_sq(line: impl Iterator<Item = f64>, h: f64) -> f64 {
    let mut prev = 0.0;
    let mut acc = 0.0;
    for v in line {
        let d = (v - prev) / h;
        acc += d * d;
        prev = v;
    }
    acc + (prev / h) * (prev / h)
}

pub fn norm(f: &Field, kind: NormKind<'_>) -> f64 {
    match kind {
        NormKind::L2 => l2_norm(&f.grid, &f.values),
        NormKind::H1Semi => h1_seminorm(&f.grid, &f.values),
        NormKind::LInf => f.sup(),
        NormKind::LInfOn(mask) => {
            if mask.count() == 0 {
                log::warn!("sup norm requested on an empty mask; returning 0");
                return 0.0;
            }
            f.values
                .iter()
                .zip(&mask.flags)
                .filter(|(_, &on)| on)
                .fold(0.0_f64, |m, (v, _)| m.max(v.abs()))
        }
    }
}

/// A boolean flag per interior node.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    grid: Grid,
    flags: Vec<bool>,
}

impl Mask {
    pub fn new(grid: Grid, flags: Vec<bool>) -> Result<Mask> {
        if flags.len() != grid.len() {
            return Err(Error::Config(format!(
                "mask has {} flags but the grid has {} interior nodes",
                flags.len(),
                grid.len()
            )));
        }
        Ok(Mask { grid, flags })
    }

    pub fn full(grid: Grid) -> Mask {
        Mask { flags: vec![true; grid.len()], grid }
    }

    pub fn empty(grid: Grid) -> Mask {
        Mask { flags: vec![false; grid.len()], grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn get(&self, idx: usize) -> bool {
        self.flags[idx]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn complement(&self) -> Mask {
        Mask { grid: self.grid, flags: self.flags.iter().map(|f| !f).collect() }
    }

    /// Measure of the symmetric difference `self Δ other`.
    pub fn symmetric_difference_measure(&self, other: &Mask) -> f64 {
        let n = self.flags.iter().zip(&other.flags).filter(|(a, b)| a != b).count();
        n as f64 * self.grid.cell_volume()
    }
}

/// An axis-aligned open box. Only the first `dim` axes are used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl AxisBox {
    pub fn interval(lo: f64, hi: f64) -> AxisBox {
        AxisBox { lo: [lo, 0.0], hi: [hi, 0.0] }
    }

    pub fn rect(x: (f64, f64), y: (f64, f64)) -> AxisBox {
        AxisBox { lo: [x.0, y.0], hi: [x.1, y.1] }
    }

    /// True when `x` lies strictly inside; nodes on an edge are outside.
    pub fn contains_strictly(&self, grid: &Grid, x: [f64; 2]) -> bool {
        (0..grid.dim).all(|k| {
            let tol = EDGE_TOL * grid.h[k];
            x[k] > self.lo[k] + tol && x[k] < self.hi[k] - tol
        })
    }
}

/// How `b(x)` is specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BKind {
    /// `b ≡ b₀` off `Ω₀` (and 0 on `Ω₀`).
    Constant { b0: f64 },
    /// `b = b₀ · χ_{Ω∖Ω₀}`.
    Indicator { b0: f64 },
    /// Per-node samples; forced to zero inside `Ω₀`.
    Profile { samples: Vec<f64> },
}

/// Domain, vanishing region `Ω₀` and sampled absorption coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    grid: Grid,
    omega0: Vec<AxisBox>,
    b_kind: BKind,
    b_values: Vec<f64>,
    constraint_mask: Mask,
    b_inf_off_omega0: f64,
}

impl DomainSpec {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn omega0(&self) -> &[AxisBox] {
        &self.omega0
    }

    pub fn b_kind(&self) -> &BKind {
        &self.b_kind
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b_values
    }

    /// Nodes of `Ω∖Ω₀`, where the obstacle `u ≤ 1` is enforced.
    pub fn constraint_mask(&self) -> &Mask {
        &self.constraint_mask
    }

    /// Nodes strictly inside `Ω₀`.
    pub fn omega0_mask(&self) -> Mask {
        self.constraint_mask.complement()
    }

    /// `inf b` over the constrained nodes; `+∞` when there are none.
    pub fn b_inf_off_omega0(&self) -> f64 {
        self.b_inf_off_omega0
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.constraint_mask.count() == self.grid.len()
    }

    /// Same grid and `Ω₀`, with `b ≡ 0`. Used for the heat supersolution.
    pub fn without_absorption(&self) -> DomainSpec {
        DomainSpec { b_values: vec![0.0; self.grid.len()], ..self.clone() }
    }
}

/// Samples `b` and builds the constraint mask for `Ω₀ = ∪ omega0`.
pub fn sample_domain(grid: Grid, omega0: &[AxisBox], b_kind: BKind) -> Result<DomainSpec> {
    for (bi, bx) in omega0.iter().enumerate() {
        for k in 0..grid.dim {
            let (lo, hi) = (grid.lo[k], grid.hi[k]);
            let tol = EDGE_TOL * grid.h[k];
            if !(bx.lo[k] < bx.hi[k]) || bx.lo[k] < lo - tol || bx.hi[k] > hi + tol {
                return Err(Error::Config(format!(
                    "omega0 box {bi}: axis {k} interval ({}, {}) must be nonempty and lie within ({lo}, {hi})",
                    bx.lo[k], bx.hi[k]
                )));
            }
        }
    }
    let flags: Vec<bool> = grid
        .nodes()
        .map(|x| !omega0.iter().any(|bx| bx.contains_strictly(&grid, x)))
        .collect();
    let mut b_values = match &b_kind {
        BKind::Constant { b0 } | BKind::Indicator { b0 } => {
            if !(b0.is_finite() && *b0 > 0.0) {
                return Err(Error::Config(format!("b0 must be positive, got {b0}")));
            }
            vec![*b0; grid.len()]
        }
        BKind::Profile { samples } => {
            if samples.len() != grid.len() {
                return Err(Error::Config(format!(
                    "b profile has {} samples, grid has {} nodes",
                    samples.len(),
                    grid.len()
                )));
            }
            if samples.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                return Err(Error::Config("b profile samples must be finite and nonnegative".into()));
            }
            samples.clone()
        }
    };
    for (b, &constrained) in b_values.iter_mut().zip(&flags) {
        if !constrained {
            *b = 0.0;
        }
    }
    let b_inf = b_values
        .iter()
        .zip(&flags)
        .filter(|(_, &c)| c)
        .fold(f64::INFINITY, |m, (b, _)| m.min(*b));
    if b_inf <= 0.0 {
        return Err(Error::Config(
            "b must be bounded away from zero on the constrained nodes".into(),
        ));
    }
    Ok(DomainSpec {
        grid,
        omega0: omega0.to_vec(),
        b_kind,
        b_values,
        constraint_mask: Mask { grid, flags },
        b_inf_off_omega0: b_inf,
    })
}
