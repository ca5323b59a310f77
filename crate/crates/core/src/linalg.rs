//! Conjugate gradients for the symmetric positive-definite operators built
//! from the grid Laplacian.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct CgInfo {
    pub iterations: usize,
    /// Final residual in the cell-weighted l2 norm.
    pub residual: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for SPD `A`, starting from the contents of `x`.
///
/// `weight` is the cell volume, so the stopping test
/// `sqrt(weight · Σ r_i²) ≤ tol` is the discrete L² residual.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    weight: f64,
    tol: f64,
    max_iter: usize,
) -> Result<CgInfo> {
    let n = b.len();
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rr = dot(&r, &r);
    let target = tol * tol / weight;
    if rr <= target {
        return Ok(CgInfo { iterations: 0, residual: (rr * weight).sqrt() });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged { solver: "cg", iterations: it, residual: (rr * weight).sqrt() });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new <= target {
            // confirm against the true residual; the recurrence drifts
            apply(x, &mut ap);
            let true_rr: f64 = ap.iter().zip(b).map(|(a, bi)| (bi - a) * (bi - a)).sum();
            if true_rr <= target {
                return Ok(CgInfo { iterations: it, residual: (true_rr * weight).sqrt() });
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            rr = dot(&r, &r);
            p.copy_from_slice(&r);
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged { solver: "cg", iterations: max_iter, residual: (rr * weight).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        // [[4,1],[1,3]] x = [1,2]  =>  x = [1/11, 7/11]
        let apply = |v: &[f64], out: &mut [f64]| {
            out[0] = 4.0 * v[0] + v[1];
            out[1] = v[0] + 3.0 * v[1];
        };
        let mut x = vec![0.0; 2];
        let info = conjugate_gradient(apply, &[1.0, 2.0], &mut x, 1.0, 1e-14, 10).unwrap();
        assert!(info.iterations <= 3);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-13);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-13);
    }

    #[test]
    fn reports_non_convergence() {
        let apply = |v: &[f64], out: &mut [f64]| {
            for (o, (i, vi)) in out.iter_mut().zip(v.iter().enumerate()) {
                *o = (1.0 + i as f64 * 1e3) * vi;
            }
        };
        let b = vec![1.0; 50];
        let mut x = vec![0.0; 50];
        let err = conjugate_gradient(apply, &b, &mut x, 1.0, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::NotConverged { iterations: 2, .. }));
    }
}
