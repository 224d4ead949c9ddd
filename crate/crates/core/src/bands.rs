//! Brillouin-zone sampling, band structures and gap certification.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::models::{BlochSymbol, BulkModel, JunctionFamily, PlaneWave};

/// Uniform periodic grid `xi_ab = (2 pi a / n1, 2 pi b / n2)` on the dual torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BZGrid {
    pub n1: usize,
    pub n2: usize,
}

impl BZGrid {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 4 || n2 < 4 {
            return Err(Error::InvalidWindow(format!("grid {n1}x{n2}: both sizes must be >= 4")));
        }
        Ok(Self { n1, n2 })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index, with wrap-around in both directions.
    pub fn index(&self, a: isize, b: isize) -> usize {
        let a = a.rem_euclid(self.n1 as isize) as usize;
        let b = b.rem_euclid(self.n2 as isize) as usize;
        a * self.n2 + b
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.n2, idx % self.n2)
    }

    pub fn node(&self, idx: usize) -> [f64; 2] {
        let (a, b) = self.coords(idx);
        [2.0 * PI * a as f64 / self.n1 as f64, 2.0 * PI * b as f64 / self.n2 as f64]
    }

    pub fn step(&self) -> [f64; 2] {
        [2.0 * PI / self.n1 as f64, 2.0 * PI / self.n2 as f64]
    }

    /// Area element `(2 pi)^2 / (n1 n2)`.
    pub fn cell_area(&self) -> f64 {
        let h = self.step();
        h[0] * h[1]
    }
}

#[derive(Debug, Clone)]
pub struct BandStructure {
    pub grid: BZGrid,
    /// Ascending eigenvalues per node.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Orthonormal eigenvector columns per node, matching `eigenvalues`.
    pub eigenvectors: Option<Vec<CMat>>,
    pub dim: usize,
    /// Plane-wave radius for continuous models.
    pub truncation: Option<usize>,
}

/// Diagonalizes the symbol on every grid node. Nodes run in parallel; output order is the grid order.
pub fn compute_bands<S: BlochSymbol + ?Sized>(model: &S, grid: BZGrid, want_vectors: bool) -> Result<BandStructure> {
    let per_node: Vec<Result<(Vec<f64>, Option<CMat>)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let h = model.symbol(grid.node(i));
            if want_vectors {
                let e = linalg::eigh(&h).map_err(|_| Error::Eigensolver { node: i })?;
                Ok((e.values, Some(e.vectors)))
            } else {
                let v = linalg::eigvalsh(&h).map_err(|_| Error::Eigensolver { node: i })?;
                Ok((v, None))
            }
        })
        .collect();
    let mut eigenvalues = Vec::with_capacity(grid.len());
    let mut vectors = Vec::new();
    for r in per_node {
        let (v, u) = r?;
        eigenvalues.push(v);
        if let Some(u) = u {
            vectors.push(u);
        }
    }
    Ok(BandStructure {
        grid,
        eigenvalues,
        eigenvectors: want_vectors.then_some(vectors),
        dim: model.dim(),
        truncation: model.plane_wave_radius(),
    })
}

impl BandStructure {
    pub fn band_count(&self) -> usize {
        self.dim
    }

    /// Largest `|H v - lambda v| / |H|` and `|V^dagger V - I|` over all nodes.
    pub fn residuals<S: BlochSymbol + ?Sized>(&self, model: &S) -> Option<(f64, f64)> {
        let vecs = self.eigenvectors.as_ref()?;
        let mut eig_res: f64 = 0.0;
        let mut orth: f64 = 0.0;
        for (i, u) in vecs.iter().enumerate() {
            let h = model.symbol(self.grid.node(i));
            let hn = linalg::max_abs(h.as_ref()).max(1e-300);
            let hu = &h * u;
            for (j, &lam) in self.eigenvalues[i].iter().enumerate() {
                let r = (0..u.nrows()).map(|k| (hu[(k, j)] - u[(k, j)] * lam).norm_sqr()).sum::<f64>().sqrt();
                eig_res = eig_res.max(r / hn);
            }
            let g = &u.adjoint().to_owned() * u;
            orth = orth.max(linalg::max_abs_diff(&g, &linalg::identity(u.ncols())));
        }
        Some((eig_res, orth))
    }

    /// Per band, the largest finite-difference slope between adjacent nodes.
    pub fn lipschitz_estimates(&self) -> Vec<f64> {
        let h = self.grid.step();
        let g = self.grid;
        (0..self.dim)
            .map(|n| {
                let mut l: f64 = 0.0;
                for idx in 0..g.len() {
                    let (a, b) = g.coords(idx);
                    let here = self.eigenvalues[idx][n];
                    let right = self.eigenvalues[g.index(a as isize + 1, b as isize)][n];
                    let up = self.eigenvalues[g.index(a as isize, b as isize + 1)][n];
                    l = l.max((right - here).abs() / h[0]).max((up - here).abs() / h[1]);
                }
                l
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["xi1", "xi2", "band_index", "eigenvalue"])?;
        for (idx, vals) in self.eigenvalues.iter().enumerate() {
            let xi = self.grid.node(idx);
            for (n, v) in vals.iter().enumerate() {
                w.write_record(&[xi[0].to_string(), xi[1].to_string(), n.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub lambda0: f64,
    pub half_width: f64,
    pub gapped: bool,
    /// Bands strictly below `lambda0` (taken at the first node; constant when gapped).
    pub n_below: usize,
    /// Highest eigenvalue below `lambda0`; absent when no band lies below.
    pub max_below: Option<f64>,
    /// Lowest eigenvalue at or above `lambda0`; absent when no band lies above.
    pub min_above: Option<f64>,
    /// Largest slope of the two gap-edge bands times the larger grid step.
    pub lipschitz_slack: f64,
    /// `lipschitz_slack < half_width / 2`: the grid resolves the bands well enough to trust `gapped`.
    pub resolved: bool,
}

/// Grid-based gap certification: no eigenvalue in `[lambda0 - 2 eps, lambda0 + 2 eps]`.
pub fn check_gap(b: &BandStructure, lambda0: f64, eps: f64) -> Result<GapReport> {
    let mut max_below: Option<f64> = None;
    let mut min_above: Option<f64> = None;
    let mut counts = Vec::with_capacity(b.eigenvalues.len());
    for vals in &b.eigenvalues {
        let n = vals.iter().filter(|&&v| v < lambda0).count();
        counts.push(n);
        if n > 0 {
            let v = vals[n - 1];
            max_below = Some(max_below.map_or(v, |m| m.max(v)));
        }
        if n < vals.len() {
            let v = vals[n];
            min_above = Some(min_above.map_or(v, |m| m.min(v)));
        }
    }
    let gapped = max_below.is_none_or(|m| m < lambda0 - 2.0 * eps) && min_above.is_none_or(|m| m > lambda0 + 2.0 * eps);
    let n_below = counts.first().copied().unwrap_or(0);
    let (lo, hi) = (counts.iter().min().copied().unwrap_or(0), counts.iter().max().copied().unwrap_or(0));
    if gapped && lo != hi {
        return Err(Error::GapInconsistent(format!("band count below lambda0 varies between {lo} and {hi}")));
    }
    let h = b.grid.step();
    // only the two bands bounding the gap matter
    let lips = b.lipschitz_estimates();
    let edge = [n_below.checked_sub(1), (n_below < b.dim).then_some(n_below)];
    let slack = edge.into_iter().flatten().map(|n| lips[n]).fold(0.0, f64::max) * h[0].max(h[1]);
    Ok(GapReport {
        lambda0,
        half_width: eps,
        gapped,
        n_below,
        max_below,
        min_above,
        lipschitz_slack: slack,
        resolved: slack < eps / 2.0,
    })
}

/// Lower bound on the distance from `lambda0` to the bands between grid nodes:
/// the smallest sampled distance minus half the Lipschitz slack of the gap-edge bands.
pub fn certified_gap_distance(b: &BandStructure, lambda0: f64) -> Result<f64> {
    let report = check_gap(b, lambda0, 0.0)?;
    let dist = b
        .eigenvalues
        .iter()
        .flatten()
        .map(|v| (v - lambda0).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(dist - report.lipschitz_slack / 2.0)
}

/// Bloch symbol of a junction snapshot; continuous snapshots use plane-wave radius `k_max`.
pub fn snapshot_symbol(snap: BulkModel, k_max: usize) -> Result<Box<dyn BlochSymbol + Send>> {
    Ok(match snap {
        BulkModel::Lattice(l) => Box::new(l),
        BulkModel::Continuous(c) => Box::new(PlaneWave::new(c, k_max)?),
    })
}

/// `x2` samples covering the transition region and both pure bulks.
pub fn default_x2_samples(count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count).map(|i| -3.0 + 6.0 * i as f64 / (count - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingDiagnostic {
    /// 1-based band index: the gap examined is `lambda_{n+1} - lambda_n`.
    pub n: usize,
    pub delta: f64,
    pub x2: Vec<f64>,
    pub grid: BZGrid,
    /// `gapfn[i][node]` at height `x2[i]`.
    pub gapfn: Vec<Vec<f64>>,
    pub midpoint: Vec<Vec<f64>>,
    /// `Z_delta` membership, same layout as `gapfn`.
    pub mask: Vec<Vec<bool>>,
    pub empty: bool,
    pub min_gap: f64,
}

/// Crossing set of bands `n` and `n + 1` over a family of symbols indexed by `x2`.
pub fn crossing_diagnostic<F>(family: F, x2: &[f64], grid: BZGrid, n: usize, delta: f64) -> Result<CrossingDiagnostic>
where
    F: Fn(f64) -> Result<Box<dyn BlochSymbol + Send>>,
{
    if n == 0 {
        return Err(Error::InvalidWindow("band index is 1-based".into()));
    }
    let mut gapfn = Vec::with_capacity(x2.len());
    let mut midpoint = Vec::with_capacity(x2.len());
    for &x in x2 {
        let sym = family(x)?;
        if n + 1 > sym.dim() {
            return Err(Error::InvalidWindow(format!("band {} requested, symbol has {}", n + 1, sym.dim())));
        }
        let b = compute_bands(sym.as_ref(), grid, false)?;
        gapfn.push(b.eigenvalues.iter().map(|v| (v[n] - v[n - 1]).max(0.0)).collect::<Vec<_>>());
        midpoint.push(b.eigenvalues.iter().map(|v| 0.5 * (v[n] + v[n - 1])).collect::<Vec<_>>());
    }
    let in_z = |g: f64| if delta == 0.0 { g < 1e-8 } else { g <= 2.0 * delta };
    let mask: Vec<Vec<bool>> = gapfn.iter().map(|row| row.iter().map(|&g| in_z(g)).collect()).collect();
    let empty = !mask.iter().flatten().any(|&m| m);
    let min_gap = gapfn.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(CrossingDiagnostic {
        n,
        delta,
        x2: x2.to_vec(),
        grid,
        gapfn,
        midpoint,
        mask,
        empty,
        min_gap,
    })
}

/// [`crossing_diagnostic`] over the glued family of a junction.
pub fn junction_crossing(jf: &JunctionFamily, k_max: usize, x2: &[f64], grid: BZGrid, n: usize, delta: f64) -> Result<CrossingDiagnostic> {
    crossing_diagnostic(|x| snapshot_symbol(jf.glue(x)?, k_max), x2, grid, n, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{AppendixModel, ContinuousModel, MatrixModel};

    #[test]
    fn grid_rejects_small_sizes() {
        assert!(BZGrid::new(3, 8).is_err());
        let g = BZGrid::new(4, 6).unwrap();
        assert_eq!(g.index(-1, 6), g.index(3, 0));
        assert_eq!(g.coords(g.index(2, 5)), (2, 5));
    }

    #[test]
    fn free_laplacian_bands() {
        let pw = PlaneWave::new(ContinuousModel::free_laplacian(), 2).unwrap();
        let g = BZGrid::square(8).unwrap();
        let b = compute_bands(&pw, g, false).unwrap();
        for (i, vals) in b.eigenvalues.iter().enumerate() {
            let xi = g.node(i);
            let mut expect = Vec::new();
            for a in -2..=2 {
                for c in -2..=2 {
                    let p = [2.0 * PI * a as f64 + xi[0], 2.0 * PI * c as f64 + xi[1]];
                    expect.push(p[0] * p[0] + p[1] * p[1]);
                }
            }
            expect.sort_by(f64::total_cmp);
            assert_eq!(vals.len(), 25);
            for (x, y) in vals.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-9 * y.max(1.0));
            }
        }
    }

    #[test]
    fn appendix_bands_are_symmetric() {
        let m = AppendixModel::new(0.3, 1).unwrap();
        let g = BZGrid::square(16).unwrap();
        let b = compute_bands(&m, g, true).unwrap();
        for (i, v) in b.eigenvalues.iter().enumerate() {
            let e = m.neg_det(g.node(i)).sqrt();
            assert_eq!(v.len(), 2);
            assert!((v[0] + e).abs() < 1e-12 && (v[1] - e).abs() < 1e-12);
        }
        let (res, orth) = b.residuals(&m).unwrap();
        assert!(res < 1e-9 && orth < 1e-10);
    }

    #[test]
    fn gap_reports() {
        let g = BZGrid::square(24).unwrap();
        let free = PlaneWave::new(ContinuousModel::free_laplacian(), 2).unwrap();
        let r = check_gap(&compute_bands(&free, BZGrid::square(12).unwrap(), false).unwrap(), 1.0, 0.1).unwrap();
        assert!(!r.gapped);

        let bar = MatrixModel::barrier(2, 3.0);
        let r = check_gap(&compute_bands(&bar, g, false).unwrap(), 0.0, 0.1).unwrap();
        assert!(r.gapped && r.n_below == 0 && r.max_below.is_none());

        let m = AppendixModel::new(0.3, 1).unwrap();
        let r = check_gap(&compute_bands(&m, g, false).unwrap(), 0.0, 0.1).unwrap();
        assert!(r.gapped);
        assert_eq!(r.n_below, 1);
        // xi_1 = 0 is a grid node, where the gap is exactly eps
        assert!((r.max_below.unwrap() + 0.3).abs() < 1e-12);
    }

    #[test]
    fn time_reversal_reflection() {
        let m = crate::models::MatrixModel::from_half(
            1,
            [((1, 0), CMat::from_fn(1, 1, |_, _| linalg::c(0.7, 0.0))), ((1, 2), CMat::from_fn(1, 1, |_, _| linalg::c(-0.3, 0.0)))],
        )
        .unwrap();
        for xi in [[0.3, 1.7], [2.0, -0.4]] {
            let a = linalg::eigvalsh(&m.symbol(xi)).unwrap();
            let b = linalg::eigvalsh(&m.symbol([-xi[0], -xi[1]])).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_family_has_no_crossing() {
        let m = AppendixModel::new(0.3, 1).unwrap();
        let jf = JunctionFamily::new(m.clone(), m.clone(), m).unwrap();
        let d = junction_crossing(&jf, 0, &default_x2_samples(13), BZGrid::square(12).unwrap(), 1, 0.25).unwrap();
        assert!(d.empty);
        assert!(d.min_gap > 0.59);
    }

    #[test]
    fn mass_interpolation_closes_gap() {
        // m = 1 (Chern) to m = 3 (trivial) passes through m = 2 where the gap closes at (pi, pi)
        let jf = JunctionFamily::new(MatrixModel::qwz(1.0), MatrixModel::qwz(3.0), MatrixModel::qwz(2.0)).unwrap();
        let d = junction_crossing(&jf, 0, &default_x2_samples(25), BZGrid::square(8).unwrap(), 1, 0.0).unwrap();
        assert!(!d.empty);
        for row in &d.gapfn {
            assert!(row.iter().all(|&g| g >= 0.0));
        }
    }
}
