//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use degparlog_core::Grid;
use nalgebra::{DMatrix, DVector};

/// Dense `I/dt + L − aI` with the 3- or 5-point negative Laplacian.
pub fn step_matrix(grid: &Grid, a: f64, dt: f64) -> DMatrix<f64> {
    let n = grid.n_interior().to_vec();
    let h = grid.spacing().to_vec();
    let len = grid.len();
    let mut m = DMatrix::zeros(len, len);
    let n1 = if n.len() == 2 { n[1] } else { 1 };
    for k in 0..len {
        let (i0, i1) = (k / n1, k % n1);
        m[(k, k)] = 1.0 / dt - a;
        for axis in 0..n.len() {
            let c = 1.0 / (h[axis] * h[axis]);
            m[(k, k)] += 2.0 * c;
            let (i, stride) = if axis == 0 { (i0, n1) } else { (i1, 1) };
            if i > 0 {
                m[(k, k - stride)] -= c;
            }
            if i + 1 < n[axis] {
                m[(k, k + stride)] -= c;
            }
        }
    }
    m
}

/// Solves the step LCP by enumerating every active subset of the masked
/// nodes. Returns the complementary feasible solution.
pub fn brute_force_lcp(grid: &Grid, mask: &[bool], a: f64, dt: f64, u_n: &[f64]) -> Vec<f64> {
    let m = step_matrix(grid, a, dt);
    let rhs = DVector::from_iterator(u_n.len(), u_n.iter().map(|v| v / dt));
    let masked: Vec<usize> = (0..u_n.len()).filter(|&k| mask[k]).collect();
    let scale = rhs.amax().max(1.0 / dt);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for bits in 0u32..(1 << masked.len()) {
        let active: Vec<bool> = {
            let mut v = vec![false; u_n.len()];
            for (j, &k) in masked.iter().enumerate() {
                v[k] = bits & (1 << j) != 0;
            }
            v
        };
        let free: Vec<usize> = (0..u_n.len()).filter(|&k| !active[k]).collect();
        let mut u = vec![1.0; u_n.len()];
        if !free.is_empty() {
            let aff = DMatrix::from_fn(free.len(), free.len(), |r, c| m[(free[r], free[c])]);
            let b = DVector::from_iterator(
                free.len(),
                free.iter().map(|&r| rhs[r] - (0..u_n.len()).filter(|&c| active[c]).map(|c| m[(r, c)]).sum::<f64>()),
            );
            let Some(x) = aff.lu().solve(&b) else { continue };
            for (j, &k) in free.iter().enumerate() {
                u[k] = x[j];
            }
        }
        let au = &m * DVector::from_column_slice(&u);
        // worst violation of primal feasibility and multiplier sign
        let mut viol = 0.0_f64;
        for &k in &masked {
            viol = viol.max(u[k] - 1.0);
            if active[k] {
                viol = viol.max((au[k] - rhs[k]) / scale);
            }
        }
        if best.as_ref().is_none_or(|(v, _)| viol < *v) {
            best = Some((viol, u));
        }
    }
    let (viol, u) = best.expect("at least one subset");
    assert!(viol <= 1e-10, "no complementary subset found (violation {viol:e})");
    u
}

/// Bernoulli flow `u' = au − bu^p` in closed form.
pub fn bernoulli(u: f64, a: f64, b: f64, p: f64, t: f64) -> f64 {
    let q = p - 1.0;
    if u == 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return u / (1.0 + b * q * t * u.powf(q)).powf(1.0 / q);
    }
    u * (a * t).exp() / (1.0 + b / a * u.powf(q) * (a * q * t).exp_m1()).powf(1.0 / q)
}
