use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::BlochSymbol;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

/// Band-limited `Z^2`-periodic function `f(y) = sum_k f_k e^{2 pi i k.y}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FourierSeries {
    terms: BTreeMap<(i32, i32), C64>,
}

impl FourierSeries {
    pub fn new(terms: impl IntoIterator<Item = ((i32, i32), C64)>) -> Self {
        let mut map = BTreeMap::new();
        for (k, v) in terms {
            *map.entry(k).or_insert(C64::new(0.0, 0.0)) += v;
        }
        map.retain(|_, v: &mut C64| v.norm() != 0.0);
        Self { terms: map }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self::new([((0, 0), c(value, 0.0))])
    }

    /// `amp * cos(2 pi k.y)` as a pair of conjugate modes.
    pub fn cosine(k: (i32, i32), amp: f64) -> Self {
        Self::new([(k, c(0.5 * amp, 0.0)), ((-k.0, -k.1), c(0.5 * amp, 0.0))])
    }

    /// `amp * sin(2 pi k.y)`.
    pub fn sine(k: (i32, i32), amp: f64) -> Self {
        Self::new([(k, c(0.0, -0.5 * amp)), ((-k.0, -k.1), c(0.0, 0.5 * amp))])
    }

    pub fn terms(&self) -> &BTreeMap<(i32, i32), C64> {
        &self.terms
    }

    pub fn coeff(&self, k: (i32, i32)) -> C64 {
        self.terms.get(&k).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn support_radius(&self) -> usize {
        self.terms
            .keys()
            .map(|&(a, b)| a.unsigned_abs().max(b.unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, y: [f64; 2]) -> C64 {
        self.terms
            .iter()
            .map(|(&(a, b), &v)| v * C64::from_polar(1.0, 2.0 * PI * (a as f64 * y[0] + b as f64 * y[1])))
            .sum()
    }

    /// Largest violation of `f_{-k} = conj(f_k)`.
    pub fn reality_defect(&self) -> f64 {
        self.terms
            .iter()
            .map(|(&(a, b), &v)| (self.coeff((-a, -b)) - v.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.terms.iter().map(|(&k, &v)| (k, v * s)))
    }

    pub fn add(&self, other: &FourierSeries) -> Self {
        Self::new(self.terms.iter().chain(other.terms.iter()).map(|(&k, &v)| (k, v)))
    }

    /// Fourier coefficients in `y_1` of `y_1 -> f(y_1, y2)` at fixed `y2`.
    pub fn restrict_y2(&self, y2: f64) -> BTreeMap<i32, C64> {
        let mut out: BTreeMap<i32, C64> = BTreeMap::new();
        for (&(a, b), &v) in &self.terms {
            *out.entry(a).or_insert(C64::new(0.0, 0.0)) += v * C64::from_polar(1.0, 2.0 * PI * b as f64 * y2);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContinuousKind {
    /// `-(grad + iA)^2 + V`; fields `V`, `A1`, `A2`.
    MagneticSchrodinger,
    /// `-div(sigma grad) + V`; fields `s11`, `s12`, `s21`, `s22`, `V`.
    DivergenceForm,
    /// `sum_{|alpha| <= 2} a_alpha D^alpha`; fields `a00`, `a10`, `a01`, `a20`, `a11`, `a02`.
    GeneralSecondOrder,
}

impl ContinuousKind {
    pub fn field_names(&self) -> &'static [&'static str] {
        match self {
            ContinuousKind::MagneticSchrodinger => &["V", "A1", "A2"],
            ContinuousKind::DivergenceForm => &["s11", "s12", "s21", "s22", "V"],
            ContinuousKind::GeneralSecondOrder => &["a00", "a10", "a01", "a20", "a11", "a02"],
        }
    }
}

/// Scalar `Z^2`-periodic second-order operator with band-limited coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousModel {
    kind: ContinuousKind,
    fields: BTreeMap<String, FourierSeries>,
    ellipticity: f64,
}

const PROBE: usize = 16;
const PROBE_ANGLES: usize = 32;
const REALITY_TOL: f64 = 1e-12;

impl ContinuousModel {
    pub fn new(kind: ContinuousKind, fields: impl IntoIterator<Item = (String, FourierSeries)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (name, f) in fields {
            if !kind.field_names().contains(&name.as_str()) {
                return Err(Error::InvalidModel(format!("unknown field {name:?} for {kind:?}")));
            }
            map.insert(name, f);
        }
        for &name in kind.field_names() {
            map.entry(name.to_string()).or_insert_with(FourierSeries::zero);
        }
        let mut model = Self {
            kind,
            fields: map,
            ellipticity: 0.0,
        };
        model.check_symmetry()?;
        model.ellipticity = model.principal_lower_bound();
        if !(model.ellipticity > 0.0) {
            return Err(Error::InvalidModel(format!(
                "not elliptic: principal symbol lower bound {:.3e}",
                model.ellipticity
            )));
        }
        Ok(model)
    }

    pub fn magnetic(v: FourierSeries, a1: FourierSeries, a2: FourierSeries) -> Result<Self> {
        Self::new(
            ContinuousKind::MagneticSchrodinger,
            [("V".to_string(), v), ("A1".to_string(), a1), ("A2".to_string(), a2)],
        )
    }

    pub fn free_laplacian() -> Self {
        Self::magnetic(FourierSeries::zero(), FourierSeries::zero(), FourierSeries::zero()).expect("elliptic")
    }

    /// `-Delta + level` written in the given kind, the barrier operator.
    pub fn barrier(kind: ContinuousKind, level: f64) -> Self {
        let fields: Vec<(String, FourierSeries)> = match kind {
            ContinuousKind::MagneticSchrodinger => vec![("V".into(), FourierSeries::constant(level))],
            ContinuousKind::DivergenceForm => vec![
                ("s11".into(), FourierSeries::constant(1.0)),
                ("s22".into(), FourierSeries::constant(1.0)),
                ("V".into(), FourierSeries::constant(level)),
            ],
            ContinuousKind::GeneralSecondOrder => vec![
                ("a20".into(), FourierSeries::constant(1.0)),
                ("a02".into(), FourierSeries::constant(1.0)),
                ("a00".into(), FourierSeries::constant(level)),
            ],
        };
        Self::new(kind, fields).expect("barrier is elliptic")
    }

    pub fn kind(&self) -> ContinuousKind {
        self.kind
    }

    pub fn field(&self, name: &str) -> &FourierSeries {
        &self.fields[name]
    }

    pub fn fields(&self) -> &BTreeMap<String, FourierSeries> {
        &self.fields
    }

    /// Stored ellipticity constant `c` with `Re(principal symbol) >= c |xi|^2` on the probe grid.
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }

    pub fn support_radius(&self) -> usize {
        self.fields.values().map(FourierSeries::support_radius).max().unwrap_or(0)
    }

    /// Fourier support of the expanded operator's coefficients. The magnetic
    /// kind carries `|A|^2`, so its vector potential counts twice.
    pub fn operator_support_radius(&self) -> usize {
        match self.kind {
            ContinuousKind::MagneticSchrodinger => {
                let a = self.field("A1").support_radius().max(self.field("A2").support_radius());
                self.field("V").support_radius().max(2 * a)
            }
            _ => self.support_radius(),
        }
    }

    /// All coefficient functions real (`sigma` real symmetric): the model is time-reversal symmetric.
    pub fn is_time_reversal_symmetric(&self) -> bool {
        let real = |f: &FourierSeries| f.reality_defect() < REALITY_TOL;
        match self.kind {
            ContinuousKind::MagneticSchrodinger => {
                real(self.field("V")) && self.field("A1").terms().is_empty() && self.field("A2").terms().is_empty()
            }
            ContinuousKind::DivergenceForm => ["s11", "s12", "s21", "s22", "V"].iter().all(|n| real(self.field(n))),
            ContinuousKind::GeneralSecondOrder => false,
        }
    }

    /// `sum_i w_i * model_i`, coefficient-wise. All models must share the kind.
    pub fn combine(terms: &[(f64, &ContinuousModel)]) -> Result<ContinuousModel> {
        let kind = terms
            .first()
            .ok_or_else(|| Error::InvalidModel("empty combination".into()))?
            .1
            .kind;
        if terms.iter().any(|(_, m)| m.kind != kind) {
            return Err(Error::Incompatible("continuous models of different kinds".into()));
        }
        let fields = kind.field_names().iter().map(|&name| {
            let mut acc = FourierSeries::zero();
            for (w, m) in terms {
                if *w != 0.0 {
                    acc = acc.add(&m.field(name).scaled(*w));
                }
            }
            (name.to_string(), acc)
        });
        ContinuousModel::new(kind, fields)
    }

    fn check_symmetry(&self) -> Result<()> {
        let defect = match self.kind {
            ContinuousKind::MagneticSchrodinger => ["V", "A1", "A2"]
                .iter()
                .map(|n| self.field(n).reality_defect())
                .fold(0.0, f64::max),
            ContinuousKind::DivergenceForm => {
                let mut d = self.field("V").reality_defect();
                for (a, b) in [("s11", "s11"), ("s22", "s22"), ("s12", "s21")] {
                    let fa = self.field(a);
                    let fb = self.field(b);
                    for (&(k1, k2), &v) in fa.terms() {
                        d = d.max((fb.coeff((-k1, -k2)) - v.conj()).norm());
                    }
                    for (&(k1, k2), &v) in fb.terms() {
                        d = d.max((fa.coeff((-k1, -k2)) - v.conj()).norm());
                    }
                }
                d
            }
            // Symmetry of general operators is checked on the assembled matrix.
            ContinuousKind::GeneralSecondOrder => 0.0,
        };
        if defect > REALITY_TOL {
            return Err(Error::InvalidModel(format!(
                "coefficients violate the reality/Hermiticity condition (defect {defect:.3e})"
            )));
        }
        Ok(())
    }

    /// Real part of the principal symbol at `(y, xi)`.
    pub fn principal_symbol(&self, y: [f64; 2], xi: [f64; 2]) -> f64 {
        match self.kind {
            ContinuousKind::MagneticSchrodinger => xi[0] * xi[0] + xi[1] * xi[1],
            ContinuousKind::DivergenceForm => {
                let s = |n: &str| self.field(n).eval(y);
                (s("s11") * xi[0] * xi[0] + (s("s12") + s("s21")) * xi[0] * xi[1] + s("s22") * xi[1] * xi[1]).re
            }
            ContinuousKind::GeneralSecondOrder => {
                let a = |n: &str| self.field(n).eval(y);
                (a("a20") * xi[0] * xi[0] + a("a11") * xi[0] * xi[1] + a("a02") * xi[1] * xi[1]).re
            }
        }
    }

    /// Minimum of the principal symbol over unit `xi` and a probe grid in `y`.
    pub fn principal_lower_bound(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..PROBE {
            for j in 0..PROBE {
                let y = [i as f64 / PROBE as f64, j as f64 / PROBE as f64];
                for t in 0..PROBE_ANGLES {
                    let th = PI * t as f64 / PROBE_ANGLES as f64;
                    m = m.min(self.principal_symbol(y, [th.cos(), th.sin()]));
                }
            }
        }
        m
    }

    /// Plane-wave matrix of `P(xi)` in the basis `e^{2 pi i k.y}`, `|k_j| <= k_max`.
    ///
    /// Basis index of `(m1, m2)` is `(m1 + K)(2K + 1) + (m2 + K)`.
    pub fn bloch_matrix(&self, xi: [f64; 2], k_max: usize) -> Result<CMat> {
        let support = self.support_radius();
        if k_max < support {
            return Err(Error::TruncationTooSmall { k: k_max, support });
        }
        let basis = PlaneWaveBasis::new(k_max);
        let mut h = match self.kind {
            ContinuousKind::MagneticSchrodinger => {
                let mut h = basis.convolution(self.field("V"));
                for (j, name) in [(0, "A1"), (1, "A2")] {
                    let mut x = basis.convolution(self.field(name));
                    basis.add_momentum(&mut x, j, xi[j]);
                    h = h + &x * &x;
                }
                h
            }
            ContinuousKind::DivergenceForm => {
                let mut h = basis.convolution(self.field("V"));
                for (j, l, name) in [(0, 0, "s11"), (0, 1, "s12"), (1, 0, "s21"), (1, 1, "s22")] {
                    let conv = basis.convolution(self.field(name));
                    let n = basis.len();
                    let kj = basis.momenta(j, xi[j]);
                    let kl = basis.momenta(l, xi[l]);
                    for b in 0..n {
                        for a in 0..n {
                            h[(a, b)] += conv[(a, b)] * (kj[a] * kl[b]);
                        }
                    }
                }
                h
            }
            ContinuousKind::GeneralSecondOrder => {
                let n = basis.len();
                let mut h = linalg::zeros(n, n);
                let k1 = basis.momenta(0, xi[0]);
                let k2 = basis.momenta(1, xi[1]);
                for (name, p1, p2) in [("a00", 0, 0), ("a10", 1, 0), ("a01", 0, 1), ("a20", 2, 0), ("a11", 1, 1), ("a02", 0, 2)] {
                    let conv = basis.convolution(self.field(name));
                    for b in 0..n {
                        let f = k1[b].powi(p1) * k2[b].powi(p2);
                        for a in 0..n {
                            h[(a, b)] += conv[(a, b)] * f;
                        }
                    }
                }
                h
            }
        };
        let residual = linalg::hermiticity_residual(&h);
        let tol = 1e-10 * linalg::max_abs(h.as_ref()).max(1.0);
        if residual > tol {
            return Err(Error::NonHermitian { residual, tolerance: tol });
        }
        linalg::symmetrize(&mut h);
        Ok(h)
    }
}

/// Square plane-wave index set `|k_j| <= K`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PlaneWaveBasis {
    pub k_max: usize,
}

impl PlaneWaveBasis {
    pub fn new(k_max: usize) -> Self {
        Self { k_max }
    }

    pub fn side(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn index(&self, m: (i32, i32)) -> Option<usize> {
        let k = self.k_max as i32;
        if m.0.abs() > k || m.1.abs() > k {
            return None;
        }
        Some(((m.0 + k) as usize) * self.side() + (m.1 + k) as usize)
    }

    pub fn label(&self, idx: usize) -> (i32, i32) {
        let k = self.k_max as i32;
        ((idx / self.side()) as i32 - k, (idx % self.side()) as i32 - k)
    }

    /// `2 pi m_j + xi_j` for every basis element.
    pub fn momenta(&self, j: usize, xi_j: f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let m = self.label(i);
                let mj = if j == 0 { m.0 } else { m.1 };
                2.0 * PI * mj as f64 + xi_j
            })
            .collect()
    }

    pub fn add_momentum(&self, x: &mut CMat, j: usize, xi_j: f64) {
        for (i, p) in self.momenta(j, xi_j).into_iter().enumerate() {
            x[(i, i)] += c(p, 0.0);
        }
    }

    /// Multiplication operator: entry `(m', m)` is `f_{m' - m}`.
    pub fn convolution(&self, f: &FourierSeries) -> CMat {
        let n = self.len();
        let mut out = linalg::zeros(n, n);
        if f.terms().is_empty() {
            return out;
        }
        for b in 0..n {
            let mb = self.label(b);
            for (&(k1, k2), &v) in f.terms() {
                if let Some(a) = self.index((mb.0 + k1, mb.1 + k2)) {
                    out[(a, b)] += v;
                }
            }
        }
        out
    }
}

/// A continuous model at a fixed plane-wave truncation, viewed as a Bloch symbol.
#[derive(Debug, Clone)]
pub struct PlaneWave {
    model: ContinuousModel,
    k_max: usize,
}

impl PlaneWave {
    pub fn new(model: ContinuousModel, k_max: usize) -> Result<Self> {
        // surface truncation and symmetry errors at construction
        model.bloch_matrix([0.0, 0.0], k_max)?;
        Ok(Self { model, k_max })
    }

    pub fn model(&self) -> &ContinuousModel {
        &self.model
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }
}

impl BlochSymbol for PlaneWave {
    fn dim(&self) -> usize {
        PlaneWaveBasis::new(self.k_max).len()
    }

    fn symbol(&self, xi: [f64; 2]) -> CMat {
        self.model
            .bloch_matrix(xi, self.k_max)
            .expect("validated at construction")
    }

    fn plane_wave_radius(&self) -> Option<usize> {
        Some(self.k_max)
    }
}
