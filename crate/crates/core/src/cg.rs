//! Preconditioned conjugate gradient for symmetric positive definite
//! operators given as closures.

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `|rhs - M x| / |rhs|` at exit.
    pub relative_residual: f64,
}

/// Solves `M x = rhs` in place, starting from the incoming `x`.
///
/// `apply(v, out)` writes `M v` into `out` and `precond(r, out)` writes the
/// preconditioned residual. Stops when the relative residual drops to `tol`.
pub fn pcg<F, P>(
    apply: F,
    rhs: &[f64],
    precond: P,
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome>
where
    F: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = rhs.len();
    if x.len() != n {
        return Err(invalid("pcg: length mismatch"));
    }
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut mx = vec![0.0; n];
    apply(x, &mut mx);
    let mut r: Vec<f64> = rhs.iter().zip(&mx).map(|(b, v)| b - v).collect();
    let mut rel = norm2(&r) / rhs_norm;
    if rel <= tol {
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: rel,
        });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut mp = vec![0.0; n];
    for it in 1..=max_iters {
        apply(&p, &mut mp);
        let pmp = dot(&p, &mp);
        if !(pmp > 0.0) {
            return Err(invalid(format!("pcg: operator not positive definite (p^T M p = {pmp:e})")));
        }
        let step = rz / pmp;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * mp[i];
        }
        rel = norm2(&r) / rhs_norm;
        if rel <= tol {
            return Ok(CgOutcome {
                iterations: it,
                relative_residual: rel,
            });
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        solver: "pcg",
        iterations: max_iters,
        residual: rel,
    })
}

/// Diagonal preconditioner from the reciprocal diagonal.
pub fn jacobi(inv_diag: &[f64]) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |r, out| {
        for ((o, v), d) in out.iter_mut().zip(r).zip(inv_diag) {
            *o = v * d;
        }
    }
}
