//! Polynomial smoothstep profiles.
//!
//! `SmoothStep::new(n)` is the classical smoothstep of degree `2n+1`: it is
//! `C^n` at both joins, equal to 0 on `(-inf, 0]` and 1 on `[1, inf)`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothStep {
    /// Number of continuous derivatives at the joins.
    pub order: u32,
}

fn binomial(n: u64, k: u64) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl SmoothStep {
    pub const fn new(order: u32) -> Self {
        Self { order }
    }

    /// Smoothstep with polynomial degree `degree` (odd, >= 3).
    pub fn with_degree(degree: u32) -> Self {
        assert!(degree >= 3 && degree % 2 == 1, "smoothstep degree must be odd and >= 3");
        Self::new((degree - 1) / 2)
    }

    pub fn degree(&self) -> u32 {
        2 * self.order + 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let n = self.order as u64;
        let mut s = 0.0;
        for k in 0..=n {
            s += binomial(n + k, k) * binomial(2 * n + 1, n - k) * (-t).powi(k as i32);
        }
        s * t.powi(n as i32 + 1)
    }

    /// `c_n t^n (1-t)^n` with `c_n = (2n+1)! / (n!)^2`, integrating to 1 over `[0,1]`.
    pub fn derivative(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let n = self.order as i32;
        let cn = binomial(2 * self.order as u64 + 1, self.order as u64) * (self.order as f64 + 1.0);
        cn * (t * (1.0 - t)).powi(n)
    }
}

/// Profile rising from 0 at `x <= lo` to 1 at `x >= hi`.
pub fn ramp(step: SmoothStep, lo: f64, hi: f64, x: f64) -> f64 {
    step.eval((x - lo) / (hi - lo))
}
