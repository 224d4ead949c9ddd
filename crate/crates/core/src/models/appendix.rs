use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::lattice::HoppingTable;
use super::{BlochSymbol, MatrixModel};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};
use crate::smooth::SmoothStep;

/// Window `w(xi_1)`: 1 on `[-inner, inner]`, 0 outside `(-outer, outer)` (mod 2 pi),
/// joined by a smoothstep. `alpha = xi_1 w + sin(xi_1)(1 - w)`, `beta = b0 (1 - w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixWindow {
    pub inner: f64,
    pub outer: f64,
    pub step: SmoothStep,
    pub b0: f64,
}

impl Default for AppendixWindow {
    fn default() -> Self {
        Self {
            inner: 1.0,
            outer: 2.5,
            step: SmoothStep::with_degree(7),
            b0: 1.0,
        }
    }
}

/// Two-band model
///
/// ```text
/// M(xi) = [ alpha(xi_1)                      beta(xi_1) + eps e^{-i nu xi_2} ]
///         [ beta(xi_1) + eps e^{i nu xi_2}   -alpha(xi_1)                    ]
/// ```
///
/// with a unique negative eigenvalue at every `xi`; its negative eigenbundle
/// has Chern number `-nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixModel {
    pub epsilon: f64,
    pub nu: i32,
    pub window: AppendixWindow,
}

const GAP_PROBE: usize = 4096;

/// Wraps into `[-pi, pi)`.
fn wrap(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        x
    } else {
        (x + PI).rem_euclid(2.0 * PI) - PI
    }
}

impl AppendixModel {
    pub fn new(epsilon: f64, nu: i32) -> Result<Self> {
        Self::with_window(epsilon, nu, AppendixWindow::default())
    }

    pub fn with_window(epsilon: f64, nu: i32, window: AppendixWindow) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidModel(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(window.inner > 0.0 && window.inner < window.outer && window.outer < PI && window.b0 > 0.0) {
            return Err(Error::InvalidModel(format!("invalid window {window:?}")));
        }
        let model = Self { epsilon, nu, window };
        let gap = model.min_abs_eigenvalue();
        if !(gap > 0.0) {
            return Err(Error::InvalidModel(format!(
                "-det M vanishes on the probe grid (min |eigenvalue| = {gap:.3e})"
            )));
        }
        Ok(model)
    }

    pub fn w(&self, xi1: f64) -> f64 {
        let a = wrap(xi1).abs();
        let win = &self.window;
        1.0 - win.step.eval((a - win.inner) / (win.outer - win.inner))
    }

    pub fn alpha(&self, xi1: f64) -> f64 {
        let w = self.w(xi1);
        wrap(xi1) * w + xi1.sin() * (1.0 - w)
    }

    pub fn beta(&self, xi1: f64) -> f64 {
        self.window.b0 * (1.0 - self.w(xi1))
    }

    /// `-det M(xi) = alpha^2 + |beta + eps e^{i nu xi_2}|^2`.
    pub fn neg_det(&self, xi: [f64; 2]) -> f64 {
        let a = self.alpha(xi[0]);
        let z = c(self.beta(xi[0]), 0.0) + C64::from_polar(self.epsilon, self.nu as f64 * xi[1]);
        a * a + z.norm_sqr()
    }

    /// `min_xi sqrt(-det M)`, exact in `xi_2` and sampled on a fine `xi_1` grid.
    pub fn min_abs_eigenvalue(&self) -> f64 {
        let mut m = f64::INFINITY;
        for j in 0..GAP_PROBE {
            let x = -PI + 2.0 * PI * j as f64 / GAP_PROBE as f64;
            let a = self.alpha(x);
            let b = self.beta(x);
            let off = if self.nu == 0 {
                b + self.epsilon
            } else {
                b.abs() - self.epsilon
            };
            m = m.min((a * a + off * off).sqrt());
        }
        m
    }

    /// Blocks of the `xi_2` Fourier series: `r2 = 0` carries `alpha, beta`; `r2 = +-nu` the `eps` terms.
    pub fn hopping_table(&self, zeta: f64) -> HoppingTable {
        let a = self.alpha(zeta);
        let b = self.beta(zeta);
        let mut t0 = linalg::zeros(2, 2);
        t0[(0, 0)] = c(a, 0.0);
        t0[(1, 1)] = c(-a, 0.0);
        t0[(0, 1)] = c(b, 0.0);
        t0[(1, 0)] = c(b, 0.0);
        let mut table = HoppingTable::new();
        if self.nu == 0 {
            t0[(0, 1)] += c(self.epsilon, 0.0);
            t0[(1, 0)] += c(self.epsilon, 0.0);
            table.insert(0, t0);
            return table;
        }
        table.insert(0, t0);
        let mut up = linalg::zeros(2, 2);
        up[(0, 1)] = c(self.epsilon, 0.0);
        let mut down = linalg::zeros(2, 2);
        down[(1, 0)] = c(self.epsilon, 0.0);
        table.insert(-self.nu, up);
        table.insert(self.nu, down);
        table
    }

    /// Finite-range tight-binding approximation keeping `|r_1| <= r1_cut` Fourier modes of `alpha, beta`.
    pub fn to_matrix_model(&self, r1_cut: usize) -> Result<MatrixModel> {
        let (ca, cb) = self.fourier_coefficients(r1_cut);
        let mut hops: Vec<((i32, i32), CMat)> = Vec::new();
        for (idx, r1) in (-(r1_cut as i32)..=r1_cut as i32).enumerate() {
            let mut t = linalg::zeros(2, 2);
            t[(0, 0)] = ca[idx];
            t[(1, 1)] = -ca[idx];
            t[(0, 1)] = cb[idx];
            t[(1, 0)] = cb[idx];
            hops.push(((r1, 0), t));
        }
        // Coefficients of real functions satisfy c_{-r} = conj(c_r) up to rounding; enforce it.
        let n = hops.len();
        for i in 0..n / 2 {
            let adj = linalg::adjoint(hops[n - 1 - i].1.as_ref());
            hops[i].1 = adj;
        }
        let mut center = hops[n / 2].1.clone();
        linalg::symmetrize(&mut center);
        hops[n / 2].1 = center;
        if self.nu == 0 {
            let t = &mut hops[n / 2].1;
            t[(0, 1)] += c(self.epsilon, 0.0);
            t[(1, 0)] += c(self.epsilon, 0.0);
        } else {
            let mut up = linalg::zeros(2, 2);
            up[(0, 1)] = c(self.epsilon, 0.0);
            let mut down = linalg::zeros(2, 2);
            down[(1, 0)] = c(self.epsilon, 0.0);
            hops.push(((0, -self.nu), up));
            hops.push(((0, self.nu), down));
        }
        MatrixModel::new(2, hops)
    }

    /// Sup-norm distance between `(alpha, beta)` and their truncated Fourier series.
    pub fn truncation_error(&self, r1_cut: usize) -> f64 {
        let (ca, cb) = self.fourier_coefficients(r1_cut);
        let mut err = 0.0f64;
        for j in 0..2048 {
            let x = -PI + 2.0 * PI * j as f64 / 2048.0;
            let mut a = C64::new(0.0, 0.0);
            let mut b = C64::new(0.0, 0.0);
            for (idx, r1) in (-(r1_cut as i32)..=r1_cut as i32).enumerate() {
                let e = C64::from_polar(1.0, r1 as f64 * x);
                a += ca[idx] * e;
                b += cb[idx] * e;
            }
            err = err.max((a.re - self.alpha(x)).abs()).max((b.re - self.beta(x)).abs());
        }
        err
    }

    fn fourier_coefficients(&self, r1_cut: usize) -> (Vec<C64>, Vec<C64>) {
        const N: usize = 4096;
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(N);
        let mut a: Vec<C64> = (0..N).map(|j| c(self.alpha(2.0 * PI * j as f64 / N as f64), 0.0)).collect();
        let mut b: Vec<C64> = (0..N).map(|j| c(self.beta(2.0 * PI * j as f64 / N as f64), 0.0)).collect();
        fft.process(&mut a);
        fft.process(&mut b);
        let pick = |v: &[C64], r: i32| v[r.rem_euclid(N as i32) as usize] / N as f64;
        let range = -(r1_cut as i32)..=r1_cut as i32;
        (
            range.clone().map(|r| pick(&a, r)).collect(),
            range.map(|r| pick(&b, r)).collect(),
        )
    }

    /// Negative-energy eigenprojector `(Id - M / sqrt(-det M)) / 2`.
    pub fn negative_projector(&self, xi: [f64; 2]) -> CMat {
        let m = self.symbol(xi);
        let s = self.neg_det(xi).sqrt();
        let mut p = linalg::scale(&m, c(-0.5 / s, 0.0));
        p[(0, 0)] += c(0.5, 0.0);
        p[(1, 1)] += c(0.5, 0.0);
        p
    }
}

impl BlochSymbol for AppendixModel {
    fn dim(&self) -> usize {
        2
    }

    fn symbol(&self, xi: [f64; 2]) -> CMat {
        let a = self.alpha(xi[0]);
        let b = self.beta(xi[0]);
        let mut m = linalg::zeros(2, 2);
        m[(0, 0)] = c(a, 0.0);
        m[(1, 1)] = c(-a, 0.0);
        m[(0, 1)] = c(b, 0.0) + C64::from_polar(self.epsilon, -(self.nu as f64) * xi[1]);
        m[(1, 0)] = c(b, 0.0) + C64::from_polar(self.epsilon, self.nu as f64 * xi[1]);
        m
    }
}
