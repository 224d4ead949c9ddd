//! Interface conductivity `Tr(i [H, f(x1)] g'(H))` on finite boxes.
//!
//! On a finite matrix the full trace vanishes identically, so the estimate
//! is the partial trace over sites at distance at least `margin` from the
//! box boundary. Only eigenpairs with `g'(lambda) != 0` enter, and those are
//! found with a banded shift-invert solver.

mod banded;
mod partial;

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use banded::{BandLu, HermitianBand};
pub use partial::{dense_window_eigenpairs, window_eigenpairs, PartialOptions, WindowEigenpairs};

use crate::bands::{certified_gap_distance, compute_bands, BZGrid};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::models::{chi_minus, chi_plus, chi_zero, BulkModel, JunctionFamily, MatrixModel};
use crate::smooth::SmoothStep;

/// Switch `f` along `x1` and energy cutoff `g` with its derivative `g'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchFunctions {
    /// Center of the `f` ramp.
    pub center: f64,
    /// `f = 0` for `x1 <= center - ell`, `f = 1` for `x1 >= center + ell`.
    pub ell: f64,
    pub f_step: SmoothStep,
    pub lambda0: f64,
    /// `g = 1` below `lambda0 - eps`, `g = 0` above `lambda0 + eps`.
    pub eps: f64,
    pub g_step: SmoothStep,
}

impl SwitchFunctions {
    pub fn new(center: f64, ell: f64, lambda0: f64, eps: f64) -> Result<Self> {
        if !(ell > 0.0) || !(eps > 0.0) {
            return Err(Error::Domain(format!("switch widths must be positive (ell = {ell}, eps = {eps})")));
        }
        Ok(Self {
            center,
            ell,
            f_step: SmoothStep::new(3),
            lambda0,
            eps,
            g_step: SmoothStep::new(2),
        })
    }

    pub fn with_f_step(mut self, step: SmoothStep) -> Self {
        self.f_step = step;
        self
    }

    pub fn with_g_step(mut self, step: SmoothStep) -> Self {
        self.g_step = step;
        self
    }

    pub fn f(&self, x1: f64) -> f64 {
        self.f_step.eval((x1 - self.center + self.ell) / (2.0 * self.ell))
    }

    pub fn g(&self, lambda: f64) -> f64 {
        1.0 - self.g_step.eval(self.g_arg(lambda))
    }

    pub fn g_prime(&self, lambda: f64) -> f64 {
        -self.g_step.derivative(self.g_arg(lambda)) / (2.0 * self.eps)
    }

    fn g_arg(&self, lambda: f64) -> f64 {
        (lambda - self.lambda0 + self.eps) / (2.0 * self.eps)
    }
}

/// Sites at distance at least `margin` from every box edge enter the partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub margin: usize,
}

impl WindowSpec {
    pub fn new(margin: usize, l1: usize, l2: usize) -> Result<Self> {
        let limit = l1.min(2 * l2 + 1);
        if margin == 0 || 3 * margin >= limit {
            return Err(Error::InvalidWindow(format!(
                "margin {margin} must satisfy 0 < margin < {limit}/3"
            )));
        }
        Ok(Self { margin })
    }
}

/// Junction on the box `{0..L1-1} x {-L2..L2}` with open edges, as a band matrix.
///
/// Sites are ordered with `x2` slowest, then `x1`, then the orbital, so the
/// bandwidth is about `(r2 L1 + r1) d` for hopping range `(r1, r2)`.
#[derive(Debug, Clone)]
pub struct BoxOperator {
    pub l1: usize,
    pub l2: usize,
    pub dim: usize,
    /// Bulk models (minus, barrier, plus) in real space.
    pub models: [MatrixModel; 3],
    pub matrix: HermitianBand,
}

impl BoxOperator {
    /// Appendix bulks keep `|r1| <= r1_cut` Fourier modes in `x1`.
    pub fn new(family: &JunctionFamily, l1: usize, l2: usize, r1_cut: usize) -> Result<Self> {
        let real = |m: &BulkModel| match m {
            BulkModel::Lattice(l) => l.real_space(r1_cut),
            BulkModel::Continuous(_) => Err(Error::Incompatible("box assembly needs lattice models".into())),
        };
        let models = [real(&family.minus)?, real(&family.barrier)?, real(&family.plus)?];
        Self::from_models(models, l1, l2)
    }

    pub fn from_models(models: [MatrixModel; 3], l1: usize, l2: usize) -> Result<Self> {
        let dim = models[0].dim();
        if models.iter().any(|m| m.dim() != dim) {
            return Err(Error::Incompatible("bulk models differ in dimension".into()));
        }
        if l1 < 4 || l2 < 2 {
            return Err(Error::InvalidWindow(format!("box {l1} x {} is too small", 2 * l2 + 1)));
        }
        let offsets: BTreeSet<(i32, i32)> = models.iter().flat_map(|m| m.hoppings().keys().copied()).collect();
        let bandwidth = offsets
            .iter()
            .map(|&(r1, r2)| (r2 as i64 * l1 as i64 + r1 as i64).unsigned_abs() as usize * dim + dim - 1)
            .max()
            .unwrap_or(dim - 1);
        let n = l1 * (2 * l2 + 1) * dim;
        let mut matrix = HermitianBand::zeros(n, bandwidth.min(n.saturating_sub(1)));
        let mut block = linalg::zeros(dim, dim);
        for x2 in -(l2 as i64)..=l2 as i64 {
            for x1 in 0..l1 as i64 {
                for &(r1, r2) in &offsets {
                    let (y1, y2) = (x1 + r1 as i64, x2 + r2 as i64);
                    if y1 < 0 || y1 >= l1 as i64 || y2.abs() > l2 as i64 {
                        continue;
                    }
                    let i0 = Self::site_index(l1, l2, dim, x1 as usize, x2);
                    let j0 = Self::site_index(l1, l2, dim, y1 as usize, y2);
                    if i0 > j0 {
                        continue;
                    }
                    let mid = x2 as f64 + 0.5 * r2 as f64;
                    let weights = [chi_minus(mid), chi_zero(mid), chi_plus(mid)];
                    block.fill(C64::new(0.0, 0.0));
                    let mut any = false;
                    for (w, m) in weights.iter().zip(&models) {
                        if *w == 0.0 {
                            continue;
                        }
                        if let Some(t) = m.hopping((r1, r2)) {
                            linalg::add_scaled(&mut block, t, c(*w, 0.0));
                            any = true;
                        }
                    }
                    if !any {
                        continue;
                    }
                    for a in 0..dim {
                        for b in 0..dim {
                            let (i, j) = (i0 + a, j0 + b);
                            if i <= j {
                                matrix.set(i, j, block[(a, b)]);
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            l1,
            l2,
            dim,
            models,
            matrix,
        })
    }

    fn site_index(l1: usize, l2: usize, dim: usize, x1: usize, x2: i64) -> usize {
        (((x2 + l2 as i64) as usize) * l1 + x1) * dim
    }

    /// Row of orbital `orbital` at site `(x1, x2)`.
    pub fn index(&self, x1: usize, x2: i64, orbital: usize) -> usize {
        Self::site_index(self.l1, self.l2, self.dim, x1, x2) + orbital
    }

    /// `(x1, x2, orbital)` of a row.
    pub fn coords(&self, row: usize) -> (usize, i64, usize) {
        let orbital = row % self.dim;
        let site = row / self.dim;
        (site % self.l1, (site / self.l1) as i64 - self.l2 as i64, orbital)
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// Adds a random Hermitian on-site term at `|x2| <= 2` with every block of spectral norm `strength`.
    pub fn with_interface_perturbation(&self, strength: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        let d = self.dim;
        for x2 in -2i64..=2 {
            if x2.unsigned_abs() as usize > self.l2 {
                continue;
            }
            for x1 in 0..self.l1 {
                let mut v = CMat::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                linalg::symmetrize(&mut v);
                let ev = linalg::eigvalsh(&v)?;
                let norm = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
                if norm == 0.0 {
                    continue;
                }
                let i0 = self.index(x1, x2, 0);
                for a in 0..d {
                    for b in a..d {
                        out.matrix.add(i0 + a, i0 + b, v[(a, b)] * (strength / norm));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Smallest distance from `lambda0` to the bulk bands of the three models, net of grid slack.
    pub fn certified_gap(&self, lambda0: f64, grid: usize) -> Result<f64> {
        let grid = BZGrid::square(grid)?;
        let mut best = f64::INFINITY;
        for m in &self.models {
            let b = compute_bands(m, grid, false)?;
            best = best.min(certified_gap_distance(&b, lambda0)?);
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivityResult {
    pub value: f64,
    /// Imaginary part of the partial trace; zero up to rounding.
    pub value_im: f64,
    pub two_pi_value: f64,
    pub nearest_int: i64,
    pub deviation: f64,
    /// Trace over the whole box; zero up to the eigenpair residuals.
    pub full_trace: f64,
    pub states_in_window: usize,
    pub max_residual: f64,
    pub l1: usize,
    pub l2: usize,
    pub margin: usize,
    pub ell: f64,
    pub eps: f64,
}

/// Partial trace of `i [H, F] G'` from precomputed eigenpairs covering the support of `g'`.
pub fn windowed_trace(
    b: &BoxOperator,
    pairs: &WindowEigenpairs,
    s: &SwitchFunctions,
    w: &WindowSpec,
) -> Result<ConductivityResult> {
    if pairs.lo > s.lambda0 - s.eps || pairs.hi < s.lambda0 + s.eps {
        return Err(Error::InvalidWindow(format!(
            "eigenpairs cover [{}, {}] but g' is supported on [{}, {}]",
            pairs.lo,
            pairs.hi,
            s.lambda0 - s.eps,
            s.lambda0 + s.eps
        )));
    }
    let n = b.len();
    let h = &b.matrix;
    let kd = h.bandwidth();
    let f: Vec<f64> = (0..n).map(|row| s.f(b.coords(row).0 as f64)).collect();
    let gp: Vec<f64> = pairs.values.iter().map(|&l| s.g_prime(l)).collect();
    let v = &pairs.vectors;
    let inside = |row: usize| {
        let (x1, x2, _) = b.coords(row);
        let m = w.margin;
        x1 >= m && x1 + m < b.l1 && x2.unsigned_abs() as usize + m <= b.l2
    };
    // M_ii = i sum_j H_ij (f_j - f_i) G'_ji
    let diag: Vec<(C64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = C64::new(0.0, 0.0);
            for j in i.saturating_sub(kd)..=(i + kd).min(n - 1) {
                let df = f[j] - f[i];
                if df == 0.0 {
                    continue;
                }
                let hij = h.get(i, j);
                if hij == C64::new(0.0, 0.0) {
                    continue;
                }
                let mut g = C64::new(0.0, 0.0);
                for (k, &gk) in gp.iter().enumerate() {
                    if gk != 0.0 {
                        g += v[(j, k)] * v[(i, k)].conj() * gk;
                    }
                }
                acc += hij * df * g;
            }
            (I * acc, inside(i))
        })
        .collect();
    let full: C64 = diag.iter().map(|(z, _)| *z).sum();
    let part: C64 = diag.iter().filter(|(_, keep)| *keep).map(|(z, _)| *z).sum();
    let two_pi = 2.0 * std::f64::consts::PI * part.re;
    let nearest = two_pi.round();
    Ok(ConductivityResult {
        value: part.re,
        value_im: part.im,
        two_pi_value: two_pi,
        nearest_int: nearest as i64,
        deviation: (two_pi - nearest).abs(),
        full_trace: full.norm(),
        states_in_window: pairs.len(),
        max_residual: pairs.max_residual,
        l1: b.l1,
        l2: b.l2,
        margin: w.margin,
        ell: s.ell,
        eps: s.eps,
    })
}

/// Checks that `g'` lives in the certified bulk gap and that `f` fits in the box.
fn check_switches(b: &BoxOperator, s: &SwitchFunctions) -> Result<()> {
    if s.ell > b.l1 as f64 / 4.0 {
        return Err(Error::InvalidWindow(format!("ell = {} exceeds L1/4 = {}", s.ell, b.l1 as f64 / 4.0)));
    }
    let gap = b.certified_gap(s.lambda0, 32)?;
    if !(s.eps < gap) {
        return Err(Error::GapNotCertified(format!(
            "g' support [{}, {}] reaches the bulk bands (certified distance {gap:.4})",
            s.lambda0 - s.eps,
            s.lambda0 + s.eps
        )));
    }
    Ok(())
}

/// Eigenpairs of the box in the support of `g'`.
pub fn box_eigenpairs(b: &BoxOperator, s: &SwitchFunctions, opts: &PartialOptions) -> Result<WindowEigenpairs> {
    window_eigenpairs(&b.matrix, s.lambda0 - s.eps, s.lambda0 + s.eps, opts)
}

pub fn windowed_conductivity(b: &BoxOperator, s: &SwitchFunctions, w: &WindowSpec) -> Result<ConductivityResult> {
    check_switches(b, s)?;
    WindowSpec::new(w.margin, b.l1, b.l2)?;
    let pairs = box_eigenpairs(b, s, &PartialOptions::default())?;
    windowed_trace(b, &pairs, s, w)
}

/// Parameters shared by the boxes of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConductivityParams {
    pub lambda0: f64,
    /// Half-width of the `g'` support; by default half the certified gap.
    pub eps: Option<f64>,
    /// Half-width of the `f` ramp; by default `L1 / 4`.
    pub ell: Option<f64>,
    pub margin: usize,
    pub r1_cut: usize,
    /// Random Hermitian on-site disorder of this strength near the interface.
    pub perturbation: Option<f64>,
    pub seed: u64,
}

impl Default for ConductivityParams {
    fn default() -> Self {
        Self {
            lambda0: 0.0,
            eps: None,
            ell: None,
            margin: 8,
            r1_cut: 8,
            perturbation: None,
            seed: 0,
        }
    }
}

impl ConductivityParams {
    /// Switch functions for a box: `f` centered at `L1 / 2`.
    pub fn switches(&self, b: &BoxOperator) -> Result<SwitchFunctions> {
        let eps = match self.eps {
            Some(e) => e,
            None => 0.5 * b.certified_gap(self.lambda0, 32)?,
        };
        let ell = self.ell.unwrap_or(b.l1 as f64 / 4.0);
        SwitchFunctions::new(b.l1 as f64 / 2.0, ell, self.lambda0, eps)
    }
}

/// Assembles the box and evaluates the windowed conductivity.
pub fn junction_conductivity(jf: &JunctionFamily, l1: usize, l2: usize, params: &ConductivityParams) -> Result<ConductivityResult> {
    let mut b = BoxOperator::new(jf, l1, l2, params.r1_cut).map_err(|e| e.at("box"))?;
    if let Some(strength) = params.perturbation {
        b = b.with_interface_perturbation(strength, params.seed).map_err(|e| e.at("box"))?;
    }
    let s = params.switches(&b).map_err(|e| e.at("gap"))?;
    let w = WindowSpec::new(params.margin, l1, l2).map_err(|e| e.at("window"))?;
    windowed_conductivity(&b, &s, &w).map_err(|e| e.at("conductivity"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub result: ConductivityResult,
    /// Change in `value` from the previous box.
    pub difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Largest change in `value` between successive boxes.
    pub error_bar: f64,
}

impl ConvergenceTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["l1", "l2", "margin", "states", "value", "two_pi_value", "deviation", "difference"])?;
        for r in &self.rows {
            let x = &r.result;
            w.write_record(&[
                x.l1.to_string(),
                x.l2.to_string(),
                x.margin.to_string(),
                x.states_in_window.to_string(),
                x.value.to_string(),
                x.two_pi_value.to_string(),
                x.deviation.to_string(),
                r.difference.map(|d| d.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Windowed conductivity over a sequence of boxes `(L1, L2)`, evaluated concurrently.
pub fn conductivity_convergence(
    jf: &JunctionFamily,
    sizes: &[(usize, usize)],
    params: &ConductivityParams,
) -> Result<ConvergenceTable> {
    let results: Vec<ConductivityResult> = sizes
        .par_iter()
        .map(|&(l1, l2)| junction_conductivity(jf, l1, l2, params))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(results.len());
    let mut error_bar: f64 = 0.0;
    for (k, r) in results.into_iter().enumerate() {
        let difference = (k > 0).then(|| r.value - rows.last().map_or(0.0, |p: &ConvergenceRow| p.result.value));
        if let Some(d) = difference {
            error_bar = error_bar.max(d.abs());
        }
        rows.push(ConvergenceRow { result: r, difference });
    }
    Ok(ConvergenceTable { rows, error_bar })
}
