//! Shared oracles for the integration tests: independent optimizers for the
//! likelihood objectives and small statistics utilities. Everything here is
//! deliberately generic (gradient descent, Nelder-Mead) so that agreement
//! with the library's closed-form coordinate updates is meaningful.
//!
//! Not every test target uses every oracle.
#![allow(dead_code)]

use matlrt::RelationalMatrix;
use nalgebra::{DMatrix, DVector};

/// The diagonal-model objective on a replicate stack, in log parameters:
/// f(u, v, w) = sum_i exp(-w_i) sum_jk W_ijk exp(-u_j - v_k)
///            + m p (sum u + sum v) + m^2 sum w
/// with W_ijk = y_ijk^2, d_r = exp(u), d_c = exp(v), d_obs = exp(w).
/// The homoscedastic variant pins w = 0. Convex (sum of exponentials of
/// linear maps plus a linear term), so gradient descent with a line search
/// finds the global minimum; the only flat directions are the gauge
/// rescalings, along which the gradient vanishes identically.
pub struct DiagObjective {
    w: Vec<DMatrix<f64>>,
    m: usize,
    hetero: bool,
}

impl DiagObjective {
    pub fn new(ys: &[RelationalMatrix], hetero: bool) -> Self {
        let w = ys
            .iter()
            .map(|y| y.entries().map(|x| x * x))
            .collect::<Vec<_>>();
        DiagObjective { m: ys[0].m(), w, hetero }
    }

    fn dims(&self) -> (usize, usize) {
        let p = self.w.len();
        (2 * self.m + if self.hetero { p } else { 0 }, p)
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let (m, p) = (self.m, self.w.len());
        let mut f = 0.0;
        for (i, wi) in self.w.iter().enumerate() {
            let w_log = if self.hetero { x[2 * m + i] } else { 0.0 };
            let mut tr = 0.0;
            for k in 0..m {
                for j in 0..m {
                    tr += wi[(j, k)] * (-x[j] - x[m + k]).exp();
                }
            }
            f += tr * (-w_log).exp() + (m * m) as f64 * w_log;
        }
        f += (m * p) as f64 * x.rows(0, 2 * m).sum();
        f
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (m, p) = (self.m, self.w.len());
        let (n, _) = self.dims();
        let mut g = DVector::zeros(n);
        for (i, wi) in self.w.iter().enumerate() {
            let w_log = if self.hetero { x[2 * m + i] } else { 0.0 };
            let scale = (-w_log).exp();
            let mut tr = 0.0;
            for k in 0..m {
                for j in 0..m {
                    let term = wi[(j, k)] * (-x[j] - x[m + k]).exp() * scale;
                    g[j] -= term;
                    g[m + k] -= term;
                    tr += term;
                }
            }
            if self.hetero {
                g[2 * m + i] = -tr + (m * m) as f64;
            }
        }
        for j in 0..2 * m {
            g[j] += (m * p) as f64;
        }
        g
    }

    /// Gradient descent with Armijo backtracking from the flat start.
    /// Returns (d_r, d_c, d_obs, value).
    pub fn minimize(&self) -> (DVector<f64>, DVector<f64>, DVector<f64>, f64) {
        let (n, p) = self.dims();
        let m = self.m;
        let mut x = DVector::zeros(n);
        let mut f = self.value(&x);
        let mut step = 1e-2;
        for _ in 0..200_000 {
            let g = self.gradient(&x);
            if g.amax() < 1e-11 {
                break;
            }
            let g2 = g.norm_squared();
            loop {
                let cand = &x - step * &g;
                let fc = self.value(&cand);
                if fc <= f - 1e-4 * step * g2 {
                    x = cand;
                    f = fc;
                    step *= 1.3;
                    break;
                }
                step *= 0.5;
                assert!(step > 1e-300, "line search collapsed");
            }
        }
        let d_r = x.rows(0, m).map(f64::exp);
        let d_c = x.rows(m, m).map(f64::exp);
        let d_obs = if self.hetero {
            x.rows(2 * m, p).map(f64::exp)
        } else {
            DVector::from_element(p, 1.0)
        };
        (d_r, d_c, d_obs, f)
    }
}

/// The unrestricted-model objective on a replicate stack, log-Cholesky
/// parameterized:
/// f = sum_i tr[Sr^-1 Yi Sc^-1 Yi^t] / d_i + m^2 sum_i log d_i
///   + m p (log|Sr| + log|Sc|).
pub struct FullObjective {
    ys: Vec<DMatrix<f64>>,
    m: usize,
    hetero: bool,
}

impl FullObjective {
    pub fn new(ys: &[RelationalMatrix], hetero: bool) -> Self {
        FullObjective {
            m: ys[0].m(),
            ys: ys.iter().map(|y| y.entries().clone()).collect(),
            hetero,
        }
    }

    pub fn n_params(&self) -> usize {
        let per_cov = self.m * (self.m + 1) / 2;
        2 * per_cov + if self.hetero { self.ys.len() - 1 } else { 0 }
    }

    fn chol_from(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.m;
        let mut l = DMatrix::zeros(m, m);
        let mut idx = 0;
        for j in 0..m {
            for i in j..m {
                l[(i, j)] = if i == j { x[idx].exp() } else { x[idx] };
                idx += 1;
            }
        }
        l
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let m = self.m;
        let per_cov = m * (m + 1) / 2;
        let lr = self.chol_from(&x.as_slice()[0..per_cov]);
        let lc = self.chol_from(&x.as_slice()[per_cov..2 * per_cov]);
        // log|S| = 2 sum log L_ii; the diagonal entries are exp(params).
        let mut logdet_r = 0.0;
        let mut logdet_c = 0.0;
        let mut idx = 0;
        for j in 0..m {
            logdet_r += 2.0 * x[idx];
            logdet_c += 2.0 * x[per_cov + idx];
            idx += m - j;
        }
        let mut f = (m * self.ys.len()) as f64 * (logdet_r + logdet_c);
        for (i, y) in self.ys.iter().enumerate() {
            let log_d = if self.hetero && i > 0 { x[2 * per_cov + i - 1] } else { 0.0 };
            // tr[Sr^-1 Y Sc^-1 Y^t] = |Lr^-1 Y Lc^-t|_F^2.
            let a = lr.clone().solve_lower_triangular(y).unwrap();
            let b = lc
                .clone()
                .solve_lower_triangular(&a.transpose())
                .unwrap();
            f += b.norm_squared() * (-log_d).exp() + (m * m) as f64 * log_d;
        }
        f
    }

    /// Nelder-Mead with periodic restarts around the incumbent. Value-only
    /// oracle: the minimizer itself is gauge-nonunique.
    pub fn minimize(&self, rounds: usize, iters_per_round: usize) -> f64 {
        let n = self.n_params();
        let mut best = DVector::zeros(n);
        let mut best_f = self.value(&best);
        let mut scale = 0.5;
        for _ in 0..rounds {
            let (x, f) = nelder_mead(|v| self.value(v), &best, scale, iters_per_round);
            if f < best_f {
                best = x;
                best_f = f;
            }
            scale *= 0.5;
        }
        best_f
    }
}

/// Plain Nelder-Mead on f, simplex seeded around x0 with the given spread.
pub fn nelder_mead<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    x0: &DVector<f64>,
    spread: f64,
    iters: usize,
) -> (DVector<f64>, f64) {
    let n = x0.len();
    let mut pts: Vec<DVector<f64>> = (0..=n)
        .map(|i| {
            let mut x = x0.clone();
            if i > 0 {
                x[i - 1] += spread;
            }
            x
        })
        .collect();
    let mut vals: Vec<f64> = pts.iter().map(&f).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (lo, hi, hi2) = (order[0], order[n], order[n - 1]);
        let mut centroid = DVector::zeros(n);
        for (i, p) in pts.iter().enumerate() {
            if i != hi {
                centroid += p;
            }
        }
        centroid /= n as f64;
        let reflect = &centroid * 2.0 - &pts[hi];
        let fr = f(&reflect);
        if fr < vals[lo] {
            let expand = &centroid * 3.0 - &pts[hi] * 2.0;
            let fe = f(&expand);
            if fe < fr {
                pts[hi] = expand;
                vals[hi] = fe;
            } else {
                pts[hi] = reflect;
                vals[hi] = fr;
            }
        } else if fr < vals[hi2] {
            pts[hi] = reflect;
            vals[hi] = fr;
        } else {
            let contract = (&centroid + &pts[hi]) * 0.5;
            let fc = f(&contract);
            if fc < vals[hi] {
                pts[hi] = contract;
                vals[hi] = fc;
            } else {
                for i in 0..=n {
                    if i != lo {
                        pts[i] = (&pts[i] + &pts[lo]) * 0.5;
                        vals[i] = f(&pts[i]);
                    }
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    (pts[best].clone(), vals[best])
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
