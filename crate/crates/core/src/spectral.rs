//! Exact solves of the pADMM x-system on uniform-grid Poisson instances.
//!
//! When `A = [alpha K, -gamma I]` with `K` the 5-point Dirichlet stencil on
//! an `N x N` grid and the diagonal shift is constant on each block, the
//! system decouples into `N^2` independent 2x2 blocks in the sine basis.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::pde::QpInstance;

pub(crate) struct PoissonBlockSolver {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    /// `(yy, yu, uu)` entries of each inverted 2x2 block.
    inv: Vec<[f64; 3]>,
}

fn constant(v: &[f64]) -> Option<f64> {
    let c = *v.first()?;
    v.iter()
        .all(|x| (x - c).abs() <= 1e-14 * c.abs().max(1e-300))
        .then_some(c)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// `(alpha, gamma)` if `a` has the grid structure.
fn grid_coefficients(a: &crate::sparse::CsrMatrix, n: usize) -> Option<(f64, f64)> {
    let nn = n * n;
    let alpha = a.get(0, 0) / 4.0;
    let gamma = -a.get(0, nn);
    if !(alpha != 0.0 && gamma != 0.0) {
        return None;
    }
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let mut count = 0;
            for (col, v) in a.row(k) {
                let want = if col == k {
                    4.0 * alpha
                } else if col == nn + k {
                    -gamma
                } else if (i > 0 && col == k - 1)
                    || (i + 1 < n && col == k + 1)
                    || (j > 0 && col + n == k)
                    || (j + 1 < n && col == k + n)
                {
                    -alpha
                } else {
                    return None;
                };
                if !close(v, want) {
                    return None;
                }
                count += 1;
            }
            let expected = 2 + (i > 0) as usize + (i + 1 < n) as usize + (j > 0) as usize + (j + 1 < n) as usize;
            if count != expected {
                return None;
            }
        }
    }
    Some((alpha, gamma))
}

impl PoissonBlockSolver {
    /// Solver for `Diag(shift) + sigma A^T A`, or `None` if `inst` lacks the
    /// structure.
    pub(crate) fn detect(inst: &QpInstance, shift: &[f64], sigma: f64) -> Option<Self> {
        let m = inst.m();
        let n = (m as f64).sqrt().round() as usize;
        if n == 0 || n * n != m || inst.n() != 2 * m || shift.len() != 2 * m {
            return None;
        }
        let sy = constant(&shift[..m])?;
        let su = constant(&shift[m..])?;
        let (alpha, gamma) = grid_coefficients(&inst.a, n)?;
        let mu: Vec<f64> = (1..=n)
            .map(|a| {
                let s = (std::f64::consts::PI * a as f64 / (2.0 * (n + 1) as f64)).sin();
                4.0 * s * s
            })
            .collect();
        let mut inv = Vec::with_capacity(m);
        for mb in &mu {
            for ma in &mu {
                let kappa = ma + mb;
                let yy = sy + sigma * alpha * alpha * kappa * kappa;
                let yu = -sigma * alpha * gamma * kappa;
                let uu = su + sigma * gamma * gamma;
                let det = yy * uu - yu * yu;
                if !(det > 0.0) {
                    return None;
                }
                inv.push([uu / det, -yu / det, yy / det]);
            }
        }
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Some(Self { n, fft, inv })
    }

    /// Orthonormal 2-D sine transform of `data` (length `N^2`) in place.
    fn sine_transform(&self, data: &mut [Complex64], line: &mut [Complex64], buf: &mut [Complex64]) {
        let n = self.n;
        let scale = Complex64::new(0.0, 0.5 * (2.0 / (n + 1) as f64).sqrt());
        let mut pass = |get: &dyn Fn(usize) -> usize, data: &mut [Complex64]| {
            for l in 0..n {
                buf[0] = Complex64::new(0.0, 0.0);
                buf[n + 1] = Complex64::new(0.0, 0.0);
                for t in 0..n {
                    let v = data[get(l * n + t)];
                    buf[t + 1] = v;
                    buf[2 * (n + 1) - 1 - t] = -v;
                }
                self.fft.process(buf);
                for t in 0..n {
                    line[t] = buf[t + 1] * scale;
                }
                for t in 0..n {
                    data[get(l * n + t)] = line[t];
                }
            }
        };
        pass(&|k| k, data);
        pass(&|k| (k % n) * n + k / n, data);
    }

    /// `out = M^{-1} r`.
    pub(crate) fn solve(&self, r: &[f64], out: &mut [f64]) {
        let m = self.n * self.n;
        let mut data: Vec<Complex64> = (0..m).map(|k| Complex64::new(r[k], r[m + k])).collect();
        let mut line = vec![Complex64::new(0.0, 0.0); self.n];
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * (self.n + 1)];
        self.sine_transform(&mut data, &mut line, &mut buf);
        for (z, [yy, yu, uu]) in data.iter_mut().zip(&self.inv) {
            *z = Complex64::new(yy * z.re + yu * z.im, yu * z.re + uu * z.im);
        }
        self.sine_transform(&mut data, &mut line, &mut buf);
        for (k, z) in data.iter().enumerate() {
            out[k] = z.re;
            out[m + k] = z.im;
        }
    }
}
