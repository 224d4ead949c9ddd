use super::{ContinuousModel, LatticeModel, MatrixModel, StripSymbol};
use crate::error::{Error, Result};
use crate::smooth::SmoothStep;

/// Profile used for the `1 <= |x2| <= 2` transition.
pub const TRANSITION_STEP: SmoothStep = SmoothStep::new(3);

/// Weight of the upper bulk: 0 for `x2 <= 1`, 1 for `x2 >= 2`.
pub fn chi_plus(x2: f64) -> f64 {
    TRANSITION_STEP.eval(x2 - 1.0)
}

/// Weight of the lower bulk, the mirror image of [`chi_plus`].
pub fn chi_minus(x2: f64) -> f64 {
    chi_plus(-x2)
}

/// Weight of the barrier.
pub fn chi_zero(x2: f64) -> f64 {
    1.0 - chi_plus(x2) - chi_minus(x2)
}

/// Bulk model on either side of an interface.
#[derive(Debug, Clone, PartialEq)]
pub enum BulkModel {
    Lattice(LatticeModel),
    Continuous(ContinuousModel),
}

impl From<LatticeModel> for BulkModel {
    fn from(m: LatticeModel) -> Self {
        BulkModel::Lattice(m)
    }
}

impl From<MatrixModel> for BulkModel {
    fn from(m: MatrixModel) -> Self {
        BulkModel::Lattice(m.into())
    }
}

impl From<super::AppendixModel> for BulkModel {
    fn from(m: super::AppendixModel) -> Self {
        BulkModel::Lattice(m.into())
    }
}

impl From<ContinuousModel> for BulkModel {
    fn from(m: ContinuousModel) -> Self {
        BulkModel::Continuous(m)
    }
}

/// Coefficients of the glued operator at one height.
pub type GluedSnapshot = BulkModel;

/// `minus` below the interface, `plus` above, `barrier` in `|x2| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionFamily {
    pub minus: BulkModel,
    pub plus: BulkModel,
    pub barrier: BulkModel,
}

impl JunctionFamily {
    pub fn new(minus: impl Into<BulkModel>, plus: impl Into<BulkModel>, barrier: impl Into<BulkModel>) -> Result<Self> {
        let fam = Self {
            minus: minus.into(),
            plus: plus.into(),
            barrier: barrier.into(),
        };
        match (&fam.minus, &fam.plus, &fam.barrier) {
            (BulkModel::Lattice(a), BulkModel::Lattice(b), BulkModel::Lattice(c)) => {
                if a.dim() != b.dim() || a.dim() != c.dim() {
                    return Err(Error::Incompatible(format!(
                        "lattice dimensions {}, {}, {}",
                        a.dim(),
                        b.dim(),
                        c.dim()
                    )));
                }
            }
            (BulkModel::Continuous(a), BulkModel::Continuous(b), BulkModel::Continuous(c)) => {
                if a.kind() != b.kind() || a.kind() != c.kind() {
                    return Err(Error::Incompatible("continuous models of different kinds".into()));
                }
            }
            _ => return Err(Error::Incompatible("cannot glue lattice and continuous models".into())),
        }
        Ok(fam)
    }

    /// Barrier `|lambda0| + 2` in the model class of the bulks.
    pub fn with_default_barrier(minus: impl Into<BulkModel>, plus: impl Into<BulkModel>, lambda0: f64) -> Result<Self> {
        let minus = minus.into();
        let level = lambda0.abs() + 2.0;
        let barrier: BulkModel = match &minus {
            BulkModel::Lattice(m) => MatrixModel::barrier(m.dim(), level).into(),
            BulkModel::Continuous(m) => ContinuousModel::barrier(m.kind(), level).into(),
        };
        Self::new(minus, plus, barrier)
    }

    /// Coefficients `chi_+ plus + chi_- minus + chi_0 barrier` at height `x2`.
    ///
    /// Pure regions return clones, so bulk and barrier rows match bit for bit.
    pub fn glue(&self, x2: f64) -> Result<GluedSnapshot> {
        let weights = [(chi_minus(x2), &self.minus), (chi_zero(x2), &self.barrier), (chi_plus(x2), &self.plus)];
        let active: Vec<_> = weights.iter().filter(|(w, _)| *w != 0.0).collect();
        if active.len() == 1 && active[0].0 == 1.0 {
            return Ok(active[0].1.clone());
        }
        match &self.minus {
            BulkModel::Lattice(_) => {
                let terms = active
                    .iter()
                    .map(|(w, m)| match m {
                        BulkModel::Lattice(l) => Ok((*w, l.clone())),
                        BulkModel::Continuous(_) => Err(Error::Incompatible("mixed model classes".into())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(BulkModel::Lattice(LatticeModel::mixture(terms)?))
            }
            BulkModel::Continuous(_) => {
                let terms = active
                    .iter()
                    .map(|(w, m)| match m {
                        BulkModel::Continuous(c) => Ok((*w, c)),
                        BulkModel::Lattice(_) => Err(Error::Incompatible("mixed model classes".into())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(BulkModel::Continuous(ContinuousModel::combine(&terms)?))
            }
        }
    }

    /// Lattice snapshot, for strip and box assembly.
    pub fn lattice_at(&self, x2: f64) -> Result<LatticeModel> {
        match self.glue(x2)? {
            BulkModel::Lattice(l) => Ok(l),
            BulkModel::Continuous(_) => Err(Error::Incompatible("junction is not a lattice family".into())),
        }
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.minus, BulkModel::Lattice(_))
    }

    /// Internal dimension of lattice families.
    pub fn lattice_dim(&self) -> Option<usize> {
        match &self.minus {
            BulkModel::Lattice(l) => Some(StripSymbol::dim(l)),
            BulkModel::Continuous(_) => None,
        }
    }

    /// Largest `x2`-hopping range over the three ingredients (lattice families).
    pub fn range_x2(&self) -> Option<usize> {
        let r = |m: &BulkModel| match m {
            BulkModel::Lattice(l) => Some(l.range_x2()),
            BulkModel::Continuous(_) => None,
        };
        Some(r(&self.minus)?.max(r(&self.plus)?).max(r(&self.barrier)?))
    }

    /// Swap the two sides.
    pub fn reversed(&self) -> Self {
        Self {
            minus: self.plus.clone(),
            plus: self.minus.clone(),
            barrier: self.barrier.clone(),
        }
    }

    /// Lower bound of the principal symbol over `x2` samples in `[-3, 3]` (continuous families).
    pub fn glued_ellipticity(&self, samples: usize) -> Result<Option<f64>> {
        if self.is_lattice() {
            return Ok(None);
        }
        let mut lo = f64::INFINITY;
        for i in 0..samples.max(2) {
            let x2 = -3.0 + 6.0 * i as f64 / (samples.max(2) - 1) as f64;
            if let BulkModel::Continuous(m) = self.glue(x2)? {
                lo = lo.min(m.principal_lower_bound());
            }
        }
        Ok(Some(lo))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AppendixModel, BlochSymbol, ContinuousKind, FourierSeries};

    #[test]
    fn partition_of_unity() {
        for i in 0..=400 {
            let x = -4.0 + 8.0 * i as f64 / 400.0;
            let s = chi_plus(x) + chi_minus(x) + chi_zero(x);
            assert!((s - 1.0).abs() < 1e-15);
            assert!(chi_zero(x) >= -1e-15);
        }
        assert_eq!(chi_plus(2.0), 1.0);
        assert_eq!(chi_plus(1.0), 0.0);
        assert_eq!(chi_minus(-2.0), 1.0);
    }

    fn appendix_family() -> JunctionFamily {
        JunctionFamily::with_default_barrier(MatrixModel::barrier(2, 0.5), AppendixModel::new(0.3, 1).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn snapshots_are_exact_in_pure_regions() {
        let fam = appendix_family();
        assert_eq!(fam.glue(3.0).unwrap(), fam.plus);
        assert_eq!(fam.glue(2.0).unwrap(), fam.plus);
        assert_eq!(fam.glue(0.0).unwrap(), fam.barrier);
        assert_eq!(fam.glue(-1.0).unwrap(), fam.barrier);
        assert_eq!(fam.glue(-3.0).unwrap(), fam.minus);
    }

    #[test]
    fn transition_snapshot_is_convex_combination() {
        let fam = appendix_family();
        let x2 = 1.5;
        let snap = fam.lattice_at(x2).unwrap();
        let xi = [0.3, 1.0];
        let mut expect = crate::linalg::zeros(2, 2);
        if let (BulkModel::Lattice(p), BulkModel::Lattice(b)) = (&fam.plus, &fam.barrier) {
            crate::linalg::add_scaled(&mut expect, &p.symbol(xi), crate::linalg::c(chi_plus(x2), 0.0));
            crate::linalg::add_scaled(&mut expect, &b.symbol(xi), crate::linalg::c(chi_zero(x2), 0.0));
        }
        assert!(crate::linalg::max_abs_diff(&snap.symbol(xi), &expect) < 1e-14);
    }

    #[test]
    fn incompatible_classes_rejected() {
        let r = JunctionFamily::new(
            MatrixModel::barrier(1, 2.0),
            ContinuousModel::free_laplacian(),
            MatrixModel::barrier(1, 2.0),
        );
        assert!(matches!(r, Err(Error::Incompatible(_))));
        let r = JunctionFamily::new(MatrixModel::barrier(1, 2.0), MatrixModel::barrier(2, 2.0), MatrixModel::barrier(1, 2.0));
        assert!(matches!(r, Err(Error::Incompatible(_))));
    }

    #[test]
    fn continuous_glue_stays_elliptic() {
        let plus = ContinuousModel::new(
            ContinuousKind::DivergenceForm,
            [
                ("s11".to_string(), FourierSeries::constant(2.0).add(&FourierSeries::cosine((1, 0), 0.5))),
                ("s22".to_string(), FourierSeries::constant(1.0)),
                ("V".to_string(), FourierSeries::cosine((0, 1), 4.0)),
            ],
        )
        .unwrap();
        let minus = ContinuousModel::barrier(ContinuousKind::DivergenceForm, 1.0);
        let fam = JunctionFamily::with_default_barrier(minus, plus.clone(), 3.0).unwrap();
        let c = fam.glued_ellipticity(61).unwrap().unwrap();
        assert!(c > 0.9, "ellipticity {c}");
        assert_eq!(fam.glue(2.5).unwrap(), BulkModel::Continuous(plus));
    }
}
