#![allow(dead_code)]

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use zoprox::pde::QpInstance;

/// Writes past the test harness capture so acceptance lines always show.
pub fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Solves the QP by eliminating the state block through the equality
/// constraints and running restarted FISTA on the control block.
///
/// Requires `A = [A_y, A_u]` with square invertible `A_y`, and `D` and the
/// box acting on the control block only.
pub fn reference_solve(inst: &QpInstance) -> (Vec<f64>, f64) {
    let m = inst.m();
    let n = inst.n();
    assert_eq!(n, 2 * m, "reference solver expects equal state and control blocks");
    let mut a = DMatrix::<f64>::zeros(m, n);
    for (r, c, v) in inst.a.triplets() {
        a[(r, c)] = v;
    }
    let mut q = DMatrix::<f64>::zeros(n, n);
    for (r, c, v) in inst.q.triplets() {
        q[(r, c)] = v;
    }
    let lo = inst.bounds.lower();
    let hi = inst.bounds.upper();
    for i in 0..m {
        assert!(inst.d[i] == 0.0 && lo[i] == f64::NEG_INFINITY && hi[i] == f64::INFINITY);
    }
    let ay = a.columns(0, m).into_owned();
    let au = a.columns(m, m).into_owned();
    let lu = ay.lu();
    let s = lu.solve(&au).expect("state block invertible");
    let y0 = lu.solve(&DVector::from_column_slice(&inst.b)).expect("state block invertible");
    // x = x0 + E u
    let mut e = DMatrix::<f64>::zeros(n, m);
    e.view_mut((0, 0), (m, m)).copy_from(&(-s));
    e.view_mut((m, 0), (m, m)).fill_with_identity();
    let mut x0 = DVector::<f64>::zeros(n);
    x0.rows_mut(0, m).copy_from(&y0);
    let c = DVector::from_column_slice(&inst.c);
    let h = e.transpose() * &q * &e;
    let g0 = e.transpose() * (&q * &x0 + &c);
    let lmax = h.clone().symmetric_eigen().eigenvalues.max();
    let eta = 1.0 / lmax;
    let w = &inst.d[m..];
    let (ulo, uhi) = (&lo[m..], &hi[m..]);
    let prox = |v: &DVector<f64>| {
        DVector::from_iterator(m, (0..m).map(|i| soft(v[i], eta * w[i]).clamp(ulo[i], uhi[i])))
    };
    let phi = |u: &DVector<f64>| {
        let l1: f64 = (0..m).map(|i| w[i] * u[i].abs()).sum();
        0.5 * u.dot(&(&h * u)) + g0.dot(u) + l1
    };
    let mut u = DVector::<f64>::zeros(m);
    let mut yv = u.clone();
    let mut t = 1.0f64;
    let mut f_prev = phi(&u);
    for _ in 0..200_000 {
        let grad = &h * &yv + &g0;
        let un = prox(&(&yv - eta * grad));
        let step = (&un - &u).norm();
        if step <= 1e-14 * (1.0 + u.norm()) {
            break;
        }
        let f = phi(&un);
        if f > f_prev + 1e-15 * f_prev.abs() {
            // Restart momentum when the objective goes up.
            t = 1.0;
            yv = u.clone();
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        yv = &un + ((t - 1.0) / tn) * (&un - &u);
        u = un;
        t = tn;
        f_prev = f;
    }
    let x = &x0 + &e * &u;
    let xs: Vec<f64> = x.iter().copied().collect();
    let f = inst.objective(&xs);
    (xs, f)
}
