use std::collections::BTreeMap;

use super::{AppendixModel, BlochSymbol, MatrixModel};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

/// Matrix-valued Fourier coefficients in `xi_2`: `H(zeta, xi_2) = sum_{r2} T_{r2}(zeta) e^{i r2 xi_2}`.
pub type HoppingTable = BTreeMap<i32, CMat>;

/// Lattice symbols that can be reduced along `x_2` for strip assembly.
pub trait StripSymbol: Sync {
    fn dim(&self) -> usize;

    fn hopping_table(&self, zeta: f64) -> HoppingTable;

    /// Largest `|r_2|` carrying a nonzero block.
    fn range_x2(&self) -> usize;
}

/// Lattice-level models that can be glued into interfaces.
#[derive(Debug, Clone, PartialEq)]
pub enum LatticeModel {
    Matrix(MatrixModel),
    Appendix(AppendixModel),
    /// Pointwise linear combination, produced by interface gluing.
    Mixture(Vec<(f64, LatticeModel)>),
}

impl LatticeModel {
    pub fn dim(&self) -> usize {
        match self {
            LatticeModel::Matrix(m) => m.dim(),
            LatticeModel::Appendix(_) => 2,
            LatticeModel::Mixture(t) => t[0].1.dim(),
        }
    }

    /// Linear combination with zero weights dropped; a single unit weight returns the model itself.
    pub fn mixture(terms: Vec<(f64, LatticeModel)>) -> Result<LatticeModel> {
        let terms: Vec<_> = terms.into_iter().filter(|(w, _)| *w != 0.0).collect();
        if terms.is_empty() {
            return Err(Error::InvalidModel("empty mixture".into()));
        }
        let dim = terms[0].1.dim();
        if terms.iter().any(|(_, m)| m.dim() != dim) {
            return Err(Error::Incompatible("mixture of models with different dimensions".into()));
        }
        if terms.len() == 1 && terms[0].0 == 1.0 {
            return Ok(terms.into_iter().next().unwrap().1);
        }
        Ok(LatticeModel::Mixture(terms))
    }

    /// Real-space hoppings; appendix components keep their `|r1| <= r1_cut` Fourier modes in `x1`.
    pub fn real_space(&self, r1_cut: usize) -> Result<MatrixModel> {
        match self {
            LatticeModel::Matrix(m) => Ok(m.clone()),
            LatticeModel::Appendix(a) => a.to_matrix_model(r1_cut),
            LatticeModel::Mixture(terms) => {
                let mut acc = MatrixModel::barrier(self.dim(), 0.0);
                for (w, m) in terms {
                    acc = acc.combine(1.0, &m.real_space(r1_cut)?, *w)?;
                }
                Ok(acc)
            }
        }
    }

    /// Real-space hoppings, available when every component is a finite-range matrix model.
    pub fn as_matrix_model(&self) -> Option<MatrixModel> {
        match self {
            LatticeModel::Matrix(m) => Some(m.clone()),
            LatticeModel::Appendix(_) => None,
            LatticeModel::Mixture(terms) => {
                let mut acc: Option<MatrixModel> = None;
                for (w, m) in terms {
                    let mm = m.as_matrix_model()?;
                    acc = Some(match acc {
                        None => MatrixModel::barrier(mm.dim(), 0.0).combine(0.0, &mm, *w).ok()?,
                        Some(a) => a.combine(1.0, &mm, *w).ok()?,
                    });
                }
                acc
            }
        }
    }
}

impl From<MatrixModel> for LatticeModel {
    fn from(m: MatrixModel) -> Self {
        LatticeModel::Matrix(m)
    }
}

impl From<AppendixModel> for LatticeModel {
    fn from(m: AppendixModel) -> Self {
        LatticeModel::Appendix(m)
    }
}

impl BlochSymbol for LatticeModel {
    fn dim(&self) -> usize {
        LatticeModel::dim(self)
    }

    fn symbol(&self, xi: [f64; 2]) -> CMat {
        match self {
            LatticeModel::Matrix(m) => m.symbol(xi),
            LatticeModel::Appendix(m) => m.symbol(xi),
            LatticeModel::Mixture(terms) => {
                let n = self.dim();
                let mut h = linalg::zeros(n, n);
                for (w, m) in terms {
                    linalg::add_scaled(&mut h, &m.symbol(xi), c(*w, 0.0));
                }
                h
            }
        }
    }
}

impl StripSymbol for LatticeModel {
    fn dim(&self) -> usize {
        LatticeModel::dim(self)
    }

    fn hopping_table(&self, zeta: f64) -> HoppingTable {
        match self {
            LatticeModel::Matrix(m) => m.hopping_table(zeta),
            LatticeModel::Appendix(m) => m.hopping_table(zeta),
            LatticeModel::Mixture(terms) => {
                let n = self.dim();
                let mut table = HoppingTable::new();
                for (w, m) in terms {
                    for (r2, t) in m.hopping_table(zeta) {
                        let e = table.entry(r2).or_insert_with(|| linalg::zeros(n, n));
                        linalg::add_scaled(e, &t, C64::new(*w, 0.0));
                    }
                }
                table
            }
        }
    }

    fn range_x2(&self) -> usize {
        match self {
            LatticeModel::Matrix(m) => m.range().1,
            LatticeModel::Appendix(m) => m.nu.unsigned_abs() as usize,
            LatticeModel::Mixture(terms) => terms.iter().map(|(_, m)| m.range_x2()).max().unwrap_or(0),
        }
    }
}

impl StripSymbol for MatrixModel {
    fn dim(&self) -> usize {
        MatrixModel::dim(self)
    }
    fn hopping_table(&self, zeta: f64) -> HoppingTable {
        MatrixModel::hopping_table(self, zeta)
    }
    fn range_x2(&self) -> usize {
        self.range().1
    }
}
