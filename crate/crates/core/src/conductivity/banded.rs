//! Hermitian band matrices: storage, inertia by `L D L^H`, and pivoted LU solves.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Hermitian matrix with `A[i][j] = 0` for `|i - j| > bandwidth`; only the upper band is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBand {
    n: usize,
    kd: usize,
    /// Row `i` holds `A[i][i..=i + kd]`.
    upper: Vec<C64>,
}

impl HermitianBand {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            kd: bandwidth,
            upper: vec![ZERO; n * (bandwidth + 1)],
        }
    }

    pub fn from_dense(a: &CMat, bandwidth: usize) -> Result<Self> {
        let n = a.nrows();
        let mut b = Self::zeros(n, bandwidth);
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if i.abs_diff(j) > bandwidth {
                    if v != ZERO {
                        return Err(Error::Incompatible(format!("entry ({i}, {j}) lies outside bandwidth {bandwidth}")));
                    }
                } else if j >= i {
                    b.upper[i * (bandwidth + 1) + j - i] = v;
                }
            }
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i.abs_diff(j) > self.kd {
            ZERO
        } else if j >= i {
            self.upper[i * (self.kd + 1) + j - i]
        } else {
            self.upper[j * (self.kd + 1) + i - j].conj()
        }
    }

    /// Sets `A[i][j]` and, implicitly, `A[j][i]` to the conjugate.
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(i.abs_diff(j) <= self.kd, "entry outside the band");
        if j >= i {
            self.upper[i * (self.kd + 1) + j - i] = if i == j { C64::new(v.re, 0.0) } else { v };
        } else {
            self.upper[j * (self.kd + 1) + i - j] = v.conj();
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn to_dense(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `y = A x` for every column of `x`.
    pub fn apply(&self, x: &CMat) -> CMat {
        let mut y = linalg::zeros(self.n, x.ncols());
        let w = self.kd + 1;
        for col in 0..x.ncols() {
            for i in 0..self.n {
                let row = &self.upper[i * w..(i + 1) * w];
                let xi = x[(i, col)];
                let mut acc = row[0] * xi;
                for (t, a) in row.iter().enumerate().skip(1) {
                    let j = i + t;
                    if j >= self.n {
                        break;
                    }
                    if *a == ZERO {
                        continue;
                    }
                    acc += a * x[(j, col)];
                    y[(j, col)] += a.conj() * xi;
                }
                y[(i, col)] += acc;
            }
        }
        y
    }

    /// Number of eigenvalues below `shift`, by Sylvester's law of inertia on `A - shift = L D L^H`.
    ///
    /// Returns `None` when a pivot is too small to trust the count.
    pub fn count_below(&self, shift: f64) -> Option<usize> {
        let w = self.kd + 1;
        let mut work = self.upper.clone();
        for i in 0..self.n {
            work[i * w].re -= shift;
        }
        let tiny = 1e-14 * self.max_abs().max(shift.abs()).max(1.0);
        let mut neg = 0;
        let mut u = vec![ZERO; w];
        for j in 0..self.n {
            let d = work[j * w].re;
            if d.abs() < tiny || !d.is_finite() {
                return None;
            }
            if d < 0.0 {
                neg += 1;
            }
            let last = (j + self.kd).min(self.n - 1);
            for i in j + 1..=last {
                u[i - j] = work[j * w + i - j];
            }
            for i in j + 1..=last {
                let ci = u[i - j].conj() / d;
                if ci == ZERO {
                    continue;
                }
                for k in i..=last {
                    work[i * w + k - i] -= ci * u[k - j];
                }
            }
        }
        Some(neg)
    }

    /// Count below `shift`, nudging the shift slightly if the factorization hits a tiny pivot.
    pub fn robust_count_below(&self, shift: f64) -> Result<usize> {
        let scale = self.max_abs().max(1.0);
        for k in 0..8 {
            let s = shift + (k as f64) * 1e-11 * scale * if k % 2 == 0 { 1.0 } else { -1.0 };
            if let Some(n) = self.count_below(s) {
                return Ok(n);
            }
        }
        Err(Error::NoConvergence(format!("inertia count at {shift} hit singular pivots")))
    }

    pub fn shifted_lu(&self, shift: f64) -> Result<BandLu> {
        BandLu::factor(self, shift)
    }
}

/// LU factorization with partial pivoting of `A - shift`, in band storage.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U` after fill-in: `2 kd`.
    ku: usize,
    /// Column-major band: column `j` holds rows `j - ku ..= j + kl`.
    ab: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn at(&self, i: usize, j: usize) -> usize {
        j * (self.kl + self.ku + 1) + (i + self.ku - j)
    }

    fn factor(a: &HermitianBand, shift: f64) -> Result<Self> {
        let n = a.n;
        let kl = a.kd;
        let ku = 2 * a.kd;
        let mut lu = Self {
            n,
            kl,
            ku,
            ab: vec![ZERO; n * (kl + ku + 1)],
            piv: vec![0; n],
        };
        for j in 0..n {
            let lo = j.saturating_sub(a.kd);
            let hi = (j + a.kd).min(n - 1);
            for i in lo..=hi {
                let mut v = a.get(i, j);
                if i == j {
                    v -= shift;
                }
                let idx = lu.at(i, j);
                lu.ab[idx] = v;
            }
        }
        let tiny = 1e-300;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut best = lu.ab[lu.at(j, j)].norm();
            for i in j + 1..=j + km {
                let v = lu.ab[lu.at(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            lu.piv[j] = p;
            if best < tiny {
                return Err(Error::NoConvergence(format!("shift {shift} makes the band matrix singular")));
            }
            let ju = (j + ku).min(n - 1);
            if p != j {
                for col in j..=ju {
                    let (x, y) = (lu.at(j, col), lu.at(p, col));
                    lu.ab.swap(x, y);
                }
            }
            let pivot = lu.ab[lu.at(j, j)];
            for i in j + 1..=j + km {
                let idx = lu.at(i, j);
                lu.ab[idx] /= pivot;
            }
            for col in j + 1..=ju {
                let ujc = lu.ab[lu.at(j, col)];
                if ujc == ZERO {
                    continue;
                }
                for i in j + 1..=j + km {
                    let l = lu.ab[lu.at(i, j)];
                    let idx = lu.at(i, col);
                    lu.ab[idx] -= l * ujc;
                }
            }
        }
        Ok(lu)
    }

    /// Solves `(A - shift) x = b` in place for every column of `b`.
    pub fn solve_in_place(&self, b: &mut CMat) {
        let n = self.n;
        for col in 0..b.ncols() {
            for j in 0..n {
                let p = self.piv[j];
                if p != j {
                    let t = b[(j, col)];
                    b[(j, col)] = b[(p, col)];
                    b[(p, col)] = t;
                }
                let bj = b[(j, col)];
                if bj == ZERO {
                    continue;
                }
                let km = self.kl.min(n - 1 - j);
                for i in j + 1..=j + km {
                    b[(i, col)] -= self.ab[self.at(i, j)] * bj;
                }
            }
            for j in (0..n).rev() {
                let bj = b[(j, col)] / self.ab[self.at(j, j)];
                b[(j, col)] = bj;
                if bj == ZERO {
                    continue;
                }
                for i in j.saturating_sub(self.ku)..j {
                    b[(i, col)] -= self.ab[self.at(i, j)] * bj;
                }
            }
        }
    }
}
