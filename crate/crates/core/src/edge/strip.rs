use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::models::{chi_minus, chi_plus, chi_zero, BulkModel, HoppingTable, JunctionFamily, LatticeModel, StripSymbol};

/// A `zeta`-family of Hermitian matrices acting on slots stacked along `x2`.
pub trait StripFamily: Sync {
    /// Rows per slot.
    fn block_dim(&self) -> usize;

    /// `x2` coordinate of each slot.
    fn heights(&self) -> &[f64];

    /// Half-extent `W` of the strip; slots with `|x2| <= W / 3` count as the interface region.
    fn half_extent(&self) -> f64;

    fn matrix(&self, zeta: f64) -> Result<CMat>;
}

/// Open lattice strip `x2 in {-W, ..., W}` built from a lattice junction.
///
/// The bond between heights `x2` and `x2 + r2` takes its coefficients from
/// the glued snapshot at the bond midpoint.
#[derive(Debug, Clone)]
pub struct StripOperator {
    models: [LatticeModel; 3],
    width: usize,
    dim: usize,
    range: usize,
    heights: Vec<f64>,
    /// `weights[slot][r2]`: weights of (minus, barrier, plus) at the bond midpoint.
    weights: Vec<Vec<[f64; 3]>>,
}

impl StripOperator {
    pub fn new(family: &JunctionFamily, width: usize) -> Result<Self> {
        let lattice = |m: &BulkModel| match m {
            BulkModel::Lattice(l) => Ok(l.clone()),
            BulkModel::Continuous(_) => Err(Error::Incompatible(
                "lattice strip needs lattice models; use ContinuousStrip for continuous ones".into(),
            )),
        };
        let models = [lattice(&family.minus)?, lattice(&family.barrier)?, lattice(&family.plus)?];
        let range = models.iter().map(StripSymbol::range_x2).max().unwrap_or(0);
        if 4 * range > width {
            return Err(Error::HoppingRange { range, width });
        }
        let dim = models[0].dim();
        let heights: Vec<f64> = (0..2 * width + 1).map(|s| s as f64 - width as f64).collect();
        let weights = heights
            .iter()
            .map(|&x2| {
                (0..=range)
                    .map(|r2| {
                        let mid = x2 + 0.5 * r2 as f64;
                        [chi_minus(mid), chi_zero(mid), chi_plus(mid)]
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            models,
            width,
            dim,
            range,
            heights,
            weights,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim * self.heights.len()
    }

    /// Hopping tables of (minus, barrier, plus) at Floquet parameter `zeta`.
    fn tables(&self, zeta: f64) -> [HoppingTable; 3] {
        // e^{-i zeta} Floquet condition, see the module docs
        let z = -zeta;
        [self.models[0].hopping_table(z), self.models[1].hopping_table(z), self.models[2].hopping_table(z)]
    }

    pub fn assemble(&self, zeta: f64) -> CMat {
        let tables = self.tables(zeta);
        let d = self.dim;
        let n = self.heights.len();
        let mut h = linalg::zeros(d * n, d * n);
        for s in 0..n {
            for r2 in 0..=self.range {
                let t = s + r2;
                if t >= n {
                    break;
                }
                let mut block = linalg::zeros(d, d);
                let mut any = false;
                for (w, table) in self.weights[s][r2].iter().zip(&tables) {
                    if *w == 0.0 {
                        continue;
                    }
                    if let Some(b) = table.get(&(r2 as i32)) {
                        linalg::add_scaled(&mut block, b, c(*w, 0.0));
                        any = true;
                    }
                }
                if !any {
                    continue;
                }
                for i in 0..d {
                    for j in 0..d {
                        h[(s * d + i, t * d + j)] = block[(i, j)];
                        if r2 > 0 {
                            h[(t * d + j, s * d + i)] = block[(i, j)].conj();
                        }
                    }
                }
            }
        }
        linalg::symmetrize(&mut h);
        h
    }
}

impl StripFamily for StripOperator {
    fn block_dim(&self) -> usize {
        self.dim
    }

    fn heights(&self) -> &[f64] {
        &self.heights
    }

    fn half_extent(&self) -> f64 {
        self.width as f64
    }

    fn matrix(&self, zeta: f64) -> Result<CMat> {
        Ok(self.assemble(zeta))
    }
}

/// Strip matrix of a lattice junction at width `W` and Floquet parameter `zeta`.
pub fn assemble_strip(family: &JunctionFamily, width: usize, zeta: f64) -> Result<CMat> {
    Ok(StripOperator::new(family, width)?.assemble(zeta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AppendixModel, MatrixModel};
    use std::f64::consts::PI;

    #[test]
    fn free_chain_spectrum() {
        let m = MatrixModel::square_lattice();
        let jf = JunctionFamily::new(m.clone(), m.clone(), m).unwrap();
        let w = 10;
        for &zeta in &[0.0, 0.7, 2.9] {
            let ev = linalg::eigvalsh(&assemble_strip(&jf, w, zeta).unwrap()).unwrap();
            let mut expect: Vec<f64> = (1..=2 * w + 1)
                .map(|j| 2.0 * f64::cos(zeta) + 2.0 * (PI * j as f64 / (2 * w + 2) as f64).cos())
                .collect();
            expect.sort_by(f64::total_cmp);
            for (a, b) in ev.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strip_is_hermitian_and_periodic() {
        let jf = JunctionFamily::with_default_barrier(MatrixModel::barrier(2, 2.0), AppendixModel::new(0.3, 2).unwrap(), 0.0).unwrap();
        let s = StripOperator::new(&jf, 12).unwrap();
        for &z in &[0.1, 1.3, 4.0] {
            let h = s.assemble(z);
            assert!(linalg::hermiticity_residual(&h) < 1e-12);
        }
        let a = linalg::eigvalsh(&s.assemble(0.0)).unwrap();
        let b = linalg::eigvalsh(&s.assemble(2.0 * PI)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn bulk_rows_are_exact() {
        let plus = AppendixModel::new(0.3, 1).unwrap();
        let jf = JunctionFamily::with_default_barrier(MatrixModel::barrier(2, 2.0), plus.clone(), 0.0).unwrap();
        let w = 12;
        let s = StripOperator::new(&jf, w).unwrap();
        let zeta = 0.83;
        let h = s.assemble(zeta);
        let table = plus.hopping_table(-zeta);
        // slot of x2 = 5, well inside the pure upper bulk
        let slot = 5 + w;
        let t0 = &table[&0];
        let t1 = &table[&1];
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(h[(2 * slot + i, 2 * slot + j)], t0[(i, j)]);
                assert_eq!(h[(2 * slot + i, 2 * (slot + 1) + j)], t1[(i, j)]);
            }
        }
        // barrier rows at x2 = 0
        let slot = w;
        assert_eq!(h[(2 * slot, 2 * slot)], c(2.0, 0.0));
        assert_eq!(h[(2 * slot, 2 * slot + 2)], c(0.0, 0.0));
    }

    #[test]
    fn hopping_range_checked() {
        let jf = JunctionFamily::with_default_barrier(MatrixModel::barrier(2, 2.0), AppendixModel::new(0.3, 3).unwrap(), 0.0).unwrap();
        assert!(matches!(StripOperator::new(&jf, 11), Err(Error::HoppingRange { .. })));
        assert!(StripOperator::new(&jf, 12).is_ok());
    }
}
