use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::strip::StripFamily;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::models::{chi_minus, chi_plus, chi_zero, BulkModel, ContinuousKind, ContinuousModel, JunctionFamily};

/// Magnetic-Schrodinger junction reduced to a strip: Fourier modes `|m| <= modes`
/// in `x1`, a uniform grid of spacing `h` on `[-L, L]` in `x2`, Dirichlet ends.
///
/// The `x2` kinetic term is `B^dagger B` with link operators
/// `(B psi)_{j+1/2} = (U_j psi_{j+1} - psi_j) / h` and `U_j = exp(i h A2)` at the link midpoint.
#[derive(Debug, Clone)]
pub struct ContinuousStrip {
    models: [ContinuousModel; 3],
    modes: usize,
    half_length: f64,
    spacing: f64,
    heights: Vec<f64>,
}

impl ContinuousStrip {
    pub fn new(family: &JunctionFamily, modes: usize, half_length: f64, points_per_unit: usize) -> Result<Self> {
        let cont = |m: &BulkModel| match m {
            BulkModel::Continuous(c) if c.kind() == ContinuousKind::MagneticSchrodinger => Ok(c.clone()),
            BulkModel::Continuous(_) => Err(Error::Incompatible(
                "continuous strip reduction is implemented for the magnetic Schrodinger kind only".into(),
            )),
            BulkModel::Lattice(_) => Err(Error::Incompatible("use StripOperator for lattice junctions".into())),
        };
        let models = [cont(&family.minus)?, cont(&family.barrier)?, cont(&family.plus)?];
        if points_per_unit == 0 || !(half_length > 2.0) {
            return Err(Error::InvalidWindow("strip needs half_length > 2 and a positive resolution".into()));
        }
        let n_half = (half_length * points_per_unit as f64).round() as usize;
        let spacing = half_length / n_half as f64;
        let heights = (0..2 * n_half + 1).map(|j| (j as f64 - n_half as f64) * spacing).collect();
        Ok(Self {
            models,
            modes,
            half_length,
            spacing,
            heights,
        })
    }

    fn side(&self) -> usize {
        2 * self.modes + 1
    }

    /// `x1`-Fourier coefficients of a glued coefficient function at height `x2`.
    fn glued(&self, name: &str, x2: f64) -> BTreeMap<i32, C64> {
        let mut out: BTreeMap<i32, C64> = BTreeMap::new();
        for (w, m) in [chi_minus(x2), chi_zero(x2), chi_plus(x2)].into_iter().zip(&self.models) {
            if w == 0.0 {
                continue;
            }
            for (k, v) in m.field(name).restrict_y2(x2) {
                *out.entry(k).or_insert(C64::new(0.0, 0.0)) += v * w;
            }
        }
        out
    }

    fn convolution(&self, coeffs: &BTreeMap<i32, C64>) -> CMat {
        let n = self.side();
        let k = self.modes as i32;
        CMat::from_fn(n, n, |a, b| {
            let d = (a as i32 - k) - (b as i32 - k);
            coeffs.get(&d).copied().unwrap_or(C64::new(0.0, 0.0))
        })
    }

    fn onsite(&self, x2: f64, zeta: f64) -> CMat {
        let n = self.side();
        let k = self.modes as i32;
        let mut p1 = self.convolution(&self.glued("A1", x2));
        for a in 0..n {
            // e^{-i zeta} Floquet condition, as for lattice strips
            p1[(a, a)] += c(2.0 * PI * (a as i32 - k) as f64 - zeta, 0.0);
        }
        let mut h = &p1 * &p1 + self.convolution(&self.glued("V", x2));
        let diag = 2.0 / (self.spacing * self.spacing);
        for a in 0..n {
            h[(a, a)] += c(diag, 0.0);
        }
        h
    }

    fn link(&self, x_mid: f64) -> Result<CMat> {
        let a2 = self.convolution(&self.glued("A2", x_mid));
        let mut herm = a2.clone();
        linalg::symmetrize(&mut herm);
        let e = linalg::eigh(&herm)?;
        let n = self.side();
        let phases = CMat::from_fn(n, n, |i, j| if i == j { (I * (self.spacing * e.values[i])).exp() } else { C64::new(0.0, 0.0) });
        Ok(&(&e.vectors * &phases) * &e.vectors.adjoint().to_owned())
    }
}

impl StripFamily for ContinuousStrip {
    fn block_dim(&self) -> usize {
        self.side()
    }

    fn heights(&self) -> &[f64] {
        &self.heights
    }

    fn half_extent(&self) -> f64 {
        self.half_length
    }

    fn matrix(&self, zeta: f64) -> Result<CMat> {
        let d = self.side();
        let n = self.heights.len();
        let mut h = linalg::zeros(d * n, d * n);
        let inv_h2 = 1.0 / (self.spacing * self.spacing);
        for j in 0..n {
            let block = self.onsite(self.heights[j], zeta);
            for a in 0..d {
                for b in 0..d {
                    h[(j * d + a, j * d + b)] = block[(a, b)];
                }
            }
            if j + 1 < n {
                let u = self.link(0.5 * (self.heights[j] + self.heights[j + 1]))?;
                for a in 0..d {
                    for b in 0..d {
                        let v = -u[(a, b)] * inv_h2;
                        h[(j * d + a, (j + 1) * d + b)] = v;
                        h[((j + 1) * d + b, j * d + a)] = v.conj();
                    }
                }
            }
        }
        let residual = linalg::hermiticity_residual(&h);
        let tol = 1e-10 * linalg::max_abs(h.as_ref()).max(1.0);
        if residual > tol {
            return Err(Error::NonHermitian { residual, tolerance: tol });
        }
        linalg::symmetrize(&mut h);
        Ok(h)
    }
}
