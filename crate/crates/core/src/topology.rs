//! Fermi projectors, Berry curvature and Chern numbers.
//!
//! Orientation: `c1 = (i / 2 pi) \int Tr(P [d1 P, d2 P])`, which gives `-nu`
//! for the window model. The lattice method is calibrated to the same sign.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bands::{BZGrid, BandStructure};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::models::{BlochSymbol, PlaneWaveBasis};

const PROJECTOR_TOL: f64 = 1e-10;

/// Entry `(m', m)` of the result is `p[(m' + k, m + k)]`, zero outside the plane-wave box.
pub(crate) fn shift_matrix(p: &CMat, k: (i32, i32), k_max: usize) -> CMat {
    let basis = PlaneWaveBasis::new(k_max);
    let n = basis.len();
    let map: Vec<Option<usize>> = (0..n)
        .map(|i| {
            let m = basis.label(i);
            basis.index((m.0 + k.0, m.1 + k.1))
        })
        .collect();
    CMat::from_fn(n, n, |a, b| match (map[a], map[b]) {
        (Some(x), Some(y)) => p[(x, y)],
        _ => C64::new(0.0, 0.0),
    })
}

/// Row `m` of the result is row `m + k` of `v`.
pub(crate) fn shift_rows(v: &CMat, k: (i32, i32), k_max: usize) -> CMat {
    let basis = PlaneWaveBasis::new(k_max);
    CMat::from_fn(v.nrows(), v.ncols(), |a, j| {
        let m = basis.label(a);
        match basis.index((m.0 + k.0, m.1 + k.1)) {
            Some(x) => v[(x, j)],
            None => C64::new(0.0, 0.0),
        }
    })
}

/// Spectral projectors sampled on a Brillouin-zone grid.
///
/// Fields coming from plane-wave symbols are not periodic: the value beyond
/// the grid edge is the index-shifted conjugate `P(xi + 2 pi k)_{m',m} = P(xi)_{m'+k, m+k}`.
#[derive(Debug, Clone)]
pub struct ProjectorField {
    pub grid: BZGrid,
    pub projectors: Vec<CMat>,
    pub rank: usize,
    /// Upper edge of the spectral window, when built from bands.
    pub lambda0: Option<f64>,
    pub plane_wave_radius: Option<usize>,
    frames: Option<Vec<CMat>>,
}

impl ProjectorField {
    /// Validates Hermiticity, idempotency and constant rank.
    pub fn new(grid: BZGrid, projectors: Vec<CMat>, plane_wave_radius: Option<usize>) -> Result<Self> {
        if projectors.len() != grid.len() {
            return Err(Error::Incompatible(format!(
                "{} projectors for a grid of {} nodes",
                projectors.len(),
                grid.len()
            )));
        }
        let mut lo = usize::MAX;
        let mut hi = 0;
        for p in &projectors {
            let herm = linalg::hermiticity_residual(p);
            let idem = linalg::max_abs_diff(&(p * p), p);
            if herm > PROJECTOR_TOL || idem > PROJECTOR_TOL {
                return Err(Error::InvalidModel(format!(
                    "not an orthogonal projector (hermiticity {herm:.2e}, idempotency {idem:.2e})"
                )));
            }
            let r = linalg::trace(p).re.round() as usize;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if lo != hi {
            return Err(Error::RankVaries { min: lo, max: hi });
        }
        Ok(Self {
            grid,
            projectors,
            rank: lo,
            lambda0: None,
            plane_wave_radius,
            frames: None,
        })
    }

    /// Samples `f` on the grid (in parallel) and validates the result.
    pub fn from_fn<F>(grid: BZGrid, plane_wave_radius: Option<usize>, f: F) -> Result<Self>
    where
        F: Fn([f64; 2]) -> CMat + Sync,
    {
        let ps: Vec<CMat> = (0..grid.len()).into_par_iter().map(|i| f(grid.node(i))).collect();
        Self::new(grid, ps, plane_wave_radius)
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].nrows()
    }

    pub fn complement(&self) -> Self {
        let id = linalg::identity(self.dim());
        Self {
            grid: self.grid,
            projectors: self.projectors.iter().map(|p| &id - p).collect(),
            rank: self.dim() - self.rank,
            lambda0: None,
            plane_wave_radius: self.plane_wave_radius,
            frames: None,
        }
    }

    fn wrap(&self, a: isize, b: isize) -> (usize, (i32, i32)) {
        let (n1, n2) = (self.grid.n1 as isize, self.grid.n2 as isize);
        let k = (a.div_euclid(n1) as i32, b.div_euclid(n2) as i32);
        (self.grid.index(a, b), k)
    }

    /// Projector at grid coordinates `(a, b)`, which may lie outside the fundamental cell.
    pub fn at(&self, a: isize, b: isize) -> CMat {
        let (idx, k) = self.wrap(a, b);
        match (self.plane_wave_radius, k) {
            (Some(kmax), k) if k != (0, 0) => shift_matrix(&self.projectors[idx], k, kmax),
            _ => self.projectors[idx].clone(),
        }
    }

    /// Per-node orthonormal basis of the range (band eigenvectors when available).
    pub fn frames(&self) -> Result<Vec<CMat>> {
        if let Some(f) = &self.frames {
            return Ok(f.clone());
        }
        self.projectors
            .par_iter()
            .map(|p| linalg::projector_frame(p, self.rank))
            .collect()
    }

    /// Largest `|P^2 - P|` and `|P - P^dagger|` over the grid.
    pub fn projector_residual(&self) -> f64 {
        self.projectors
            .iter()
            .map(|p| linalg::max_abs_diff(&(p * p), p).max(linalg::hermiticity_residual(p)))
            .fold(0.0, f64::max)
    }

    /// Largest `|[P, H]| / |H|` over the grid.
    pub fn commutator_residual<S: BlochSymbol + ?Sized>(&self, model: &S) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                let h = model.symbol(self.grid.node(i));
                let comm = linalg::commutator(&self.projectors[i], &h);
                linalg::max_abs(comm.as_ref()) / linalg::max_abs(h.as_ref()).max(1e-300)
            })
            .fold(0.0, f64::max)
    }
}

/// Projector onto the bands strictly below `lambda0`.
pub fn fermi_projector(b: &BandStructure, lambda0: f64) -> Result<ProjectorField> {
    let vecs = b
        .eigenvectors
        .as_ref()
        .ok_or_else(|| Error::InvalidModel("band structure was computed without eigenvectors".into()))?;
    let counts: Vec<usize> = b
        .eigenvalues
        .iter()
        .map(|v| v.iter().filter(|&&x| x < lambda0).count())
        .collect();
    let lo = *counts.iter().min().unwrap_or(&0);
    let hi = *counts.iter().max().unwrap_or(&0);
    if lo != hi {
        return Err(Error::RankVaries { min: lo, max: hi });
    }
    let n = b.dim;
    let frames: Vec<CMat> = vecs.iter().map(|u| u.as_ref().submatrix(0, 0, n, lo).to_owned()).collect();
    let projectors = frames.iter().map(|f| linalg::projector_from_columns(f.as_ref())).collect();
    Ok(ProjectorField {
        grid: b.grid,
        projectors,
        rank: lo,
        lambda0: Some(lambda0),
        plane_wave_radius: b.truncation,
        frames: Some(frames),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChernMethod {
    BerryQuadrature,
    LatticeGauge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernResult {
    pub value: i64,
    pub raw_re: f64,
    pub raw_im: f64,
    pub residual: f64,
    pub method: ChernMethod,
}

impl ChernResult {
    pub fn from_raw(raw: C64, method: ChernMethod) -> Result<Self> {
        let value = raw.re.round();
        let residual = (raw - c(value, 0.0)).norm();
        if !(residual < 0.5) {
            return Err(Error::UnderResolved { raw: raw.re, residual });
        }
        Ok(Self {
            value: value as i64,
            raw_re: raw.re,
            raw_im: raw.im,
            residual,
            method,
        })
    }

    pub fn raw(&self) -> C64 {
        c(self.raw_re, self.raw_im)
    }
}

/// Pointwise `Tr(P [d1 P, d2 P])` on a grid.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub grid: BZGrid,
    pub values: Vec<C64>,
}

impl CurvatureField {
    /// Trapezoid rule for `\int Tr(P [d1 P, d2 P]) dxi`.
    pub fn integral(&self) -> C64 {
        let area = self.grid.cell_area();
        self.values.iter().fold(C64::new(0.0, 0.0), |acc, &v| acc + v) * area
    }

    pub fn max_real_part(&self) -> f64 {
        self.values.iter().map(|v| v.re.abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["xi1", "xi2", "im_curvature"])?;
        for (i, v) in self.values.iter().enumerate() {
            let xi = self.grid.node(i);
            w.write_record(&[xi[0].to_string(), xi[1].to_string(), v.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Spectral derivative along one grid axis of a periodic matrix field.
pub(crate) fn fft_derivative(field: &[CMat], grid: BZGrid, axis: usize) -> Vec<CMat> {
    let (rows, cols) = (field[0].nrows(), field[0].ncols());
    let (len, other) = if axis == 0 { (grid.n1, grid.n2) } else { (grid.n2, grid.n1) };
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let factors: Vec<C64> = (0..len)
        .map(|k| {
            let k = k as i64;
            let n = len as i64;
            let freq = if 2 * k < n {
                k
            } else if 2 * k == n {
                0
            } else {
                k - n
            };
            I * freq as f64 / len as f64
        })
        .collect();
    let mut out = vec![linalg::zeros(rows, cols); field.len()];
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for o in 0..other {
        let node = |t: usize| if axis == 0 { grid.index(t as isize, o as isize) } else { grid.index(o as isize, t as isize) };
        for r in 0..rows {
            for s in 0..cols {
                for (t, x) in buf.iter_mut().enumerate() {
                    *x = field[node(t)][(r, s)];
                }
                fwd.process(&mut buf);
                for (x, f) in buf.iter_mut().zip(&factors) {
                    *x *= f;
                }
                inv.process(&mut buf);
                for (t, x) in buf.iter().enumerate() {
                    out[node(t)][(r, s)] = *x;
                }
            }
        }
    }
    out
}

/// Eighth-order central difference weights for the first derivative, offsets 1..=4.
const FD8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

fn fd_derivative(p: &ProjectorField, axis: usize) -> Vec<CMat> {
    let h = p.grid.step()[axis];
    (0..p.grid.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = p.grid.coords(i);
            let (a, b) = (a as isize, b as isize);
            let mut d = linalg::zeros(p.dim(), p.dim());
            for (s, &w) in FD8.iter().enumerate() {
                let s = s as isize + 1;
                let (fwd, back) = if axis == 0 { (p.at(a + s, b), p.at(a - s, b)) } else { (p.at(a, b + s), p.at(a, b - s)) };
                linalg::add_scaled(&mut d, &(fwd - back), c(w / h, 0.0));
            }
            d
        })
        .collect()
}

/// `d_j P` on the grid: FFT for periodic fields, eighth-order differences with shifted wrap otherwise.
pub fn projector_derivatives(p: &ProjectorField) -> [Vec<CMat>; 2] {
    match p.plane_wave_radius {
        None => [fft_derivative(&p.projectors, p.grid, 0), fft_derivative(&p.projectors, p.grid, 1)],
        Some(_) => [fd_derivative(p, 0), fd_derivative(p, 1)],
    }
}

pub fn curvature_field(p: &ProjectorField) -> CurvatureField {
    let [d1, d2] = projector_derivatives(p);
    let values = (0..p.grid.len())
        .into_par_iter()
        .map(|i| {
            let comm = linalg::commutator(&d1[i], &d2[i]);
            linalg::trace(&(&p.projectors[i] * &comm))
        })
        .collect();
    CurvatureField { grid: p.grid, values }
}

/// `c1 = (i / 2 pi) \int Tr(P [d1 P, d2 P])` by trapezoid quadrature.
pub fn berry_chern(p: &ProjectorField) -> Result<ChernResult> {
    let raw = I * curvature_field(p).integral() / (2.0 * PI);
    ChernResult::from_raw(raw, ChernMethod::BerryQuadrature)
}

/// Link variable `det(V_here^dagger V_there)`, normalized.
fn link(here: &CMat, there: &CMat) -> Option<C64> {
    let m = &here.adjoint().to_owned() * there;
    let d = linalg::det(&m);
    (d.norm() > 1e-12).then(|| d / d.norm())
}

/// Lattice field-strength Chern number from per-node orthonormal frames.
///
/// Any frame choice gives the same result; the frame phases cancel in each plaquette.
pub fn lattice_chern_frames(grid: BZGrid, frames: &[CMat], plane_wave_radius: Option<usize>) -> Result<(ChernResult, f64)> {
    let neighbor = |a: isize, b: isize| -> CMat {
        let idx = grid.index(a, b);
        let k = (a.div_euclid(grid.n1 as isize) as i32, b.div_euclid(grid.n2 as isize) as i32);
        match plane_wave_radius {
            Some(kmax) if k != (0, 0) => shift_rows(&frames[idx], k, kmax),
            _ => frames[idx].clone(),
        }
    };
    let links: Vec<Result<[C64; 2]>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = grid.coords(i);
            let (a, b) = (a as isize, b as isize);
            let u1 = link(&frames[i], &neighbor(a + 1, b));
            let u2 = link(&frames[i], &neighbor(a, b + 1));
            match (u1, u2) {
                (Some(u1), Some(u2)) => Ok([u1, u2]),
                _ => Err(Error::SingularOverlap { a: a as usize, b: b as usize }),
            }
        })
        .collect();
    let links = links.into_iter().collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    let mut max_f: f64 = 0.0;
    for i in 0..grid.len() {
        let (a, b) = grid.coords(i);
        let (a, b) = (a as isize, b as isize);
        let u = links[i][0] * links[grid.index(a + 1, b)][1] * links[grid.index(a, b + 1)][0].conj() * links[i][1].conj();
        let f = u.arg();
        if f.abs() >= PI * (1.0 - 1e-9) {
            return Err(Error::SingularOverlap { a: a as usize, b: b as usize });
        }
        max_f = max_f.max(f.abs());
        total += f;
    }
    let raw = c(-total / (2.0 * PI), 0.0);
    Ok((ChernResult::from_raw(raw, ChernMethod::LatticeGauge)?, max_f))
}

pub fn lattice_chern(p: &ProjectorField) -> Result<ChernResult> {
    let frames = p.frames()?;
    Ok(lattice_chern_frames(p.grid, &frames, p.plane_wave_radius)?.0)
}

/// Projector onto the lowest `rank` eigenvectors of `model` at `xi`.
pub fn lowest_projector<S: BlochSymbol + ?Sized>(model: &S, xi: [f64; 2], rank: usize) -> Result<CMat> {
    let e = linalg::eigh(&model.symbol(xi))?;
    let n = e.vectors.nrows();
    Ok(linalg::projector_from_columns(e.vectors.as_ref().submatrix(0, 0, n, rank)))
}

/// `Tr(P [d1 P, d2 P])` at one point, with eighth-order differences of step `h`.
pub fn curvature_at<S: BlochSymbol + ?Sized>(model: &S, xi: [f64; 2], rank: usize, h: f64) -> Result<C64> {
    let p = lowest_projector(model, xi, rank)?;
    let n = p.nrows();
    let mut d = [linalg::zeros(n, n), linalg::zeros(n, n)];
    for (axis, dj) in d.iter_mut().enumerate() {
        for (s, &w) in FD8.iter().enumerate() {
            let off = h * (s + 1) as f64;
            let mut fwd = xi;
            let mut back = xi;
            fwd[axis] += off;
            back[axis] -= off;
            let diff = lowest_projector(model, fwd, rank)? - lowest_projector(model, back, rank)?;
            linalg::add_scaled(dj, &diff, c(w / h, 0.0));
        }
    }
    Ok(linalg::trace(&(&p * &linalg::commutator(&d[0], &d[1]))))
}

/// Closed-form `Tr(P [d1 P, d2 P]) = i eps^2 nu / (2 (xi1^2 + eps^2)^{3/2})` of the window model, valid for `|xi1| <= 1`.
pub fn appendix_curvature_exact(epsilon: f64, nu: i32, xi1: f64) -> Result<C64> {
    if !(-1.0..=1.0).contains(&xi1) {
        return Err(Error::Domain(format!("xi1 = {xi1} lies outside [-1, 1]")));
    }
    let r2 = xi1 * xi1 + epsilon * epsilon;
    Ok(c(0.0, epsilon * epsilon * nu as f64 / (2.0 * r2 * r2.sqrt())))
}

/// Largest deviation between `P(xi + 2 pi k)` and the index-shifted `P(xi)`.
///
/// Plane-wave symbols are compared on the block `|m_j| <= interior`; periodic
/// symbols are compared entrywise.
pub fn equivariance_check<S: BlochSymbol + ?Sized>(model: &S, xi: [f64; 2], k: (i32, i32), rank: usize, interior: usize) -> Result<f64> {
    let shifted_xi = [xi[0] + 2.0 * PI * k.0 as f64, xi[1] + 2.0 * PI * k.1 as f64];
    let p0 = lowest_projector(model, xi, rank)?;
    let p1 = lowest_projector(model, shifted_xi, rank)?;
    let Some(kmax) = model.plane_wave_radius() else {
        return Ok(linalg::max_abs_diff(&p0, &p1));
    };
    if interior + k.0.unsigned_abs().max(k.1.unsigned_abs()) as usize > kmax {
        return Err(Error::Domain(format!(
            "interior block {interior} shifted by {k:?} leaves the truncation K = {kmax}"
        )));
    }
    let basis = PlaneWaveBasis::new(kmax);
    let r = interior as i32;
    let mut dev: f64 = 0.0;
    for a1 in -r..=r {
        for a2 in -r..=r {
            for b1 in -r..=r {
                for b2 in -r..=r {
                    let ix = |m: (i32, i32)| basis.index(m).expect("inside truncation");
                    let lhs = p1[(ix((a1, a2)), ix((b1, b2)))];
                    let rhs = p0[(ix((a1 + k.0, a2 + k.1)), ix((b1 + k.0, b2 + k.1)))];
                    dev = dev.max((lhs - rhs).norm());
                }
            }
        }
    }
    Ok(dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::compute_bands;
    use crate::models::{AppendixModel, MatrixModel};

    fn appendix_field(nu: i32, n: usize) -> ProjectorField {
        let m = AppendixModel::new(0.3, nu).unwrap();
        let b = compute_bands(&m, BZGrid::square(n).unwrap(), true).unwrap();
        fermi_projector(&b, 0.0).unwrap()
    }

    #[test]
    fn appendix_lattice_chern_is_minus_nu() {
        for nu in [1, 2, 3, -1, 0] {
            let r = lattice_chern(&appendix_field(nu, 24)).unwrap();
            assert_eq!(r.value, -nu as i64);
            assert!(r.residual < 1e-10);
        }
    }

    #[test]
    fn appendix_berry_chern_is_minus_nu() {
        for nu in [1, 2, 3] {
            let r = berry_chern(&appendix_field(nu, 24)).unwrap();
            assert_eq!(r.value, -nu as i64, "raw {:?}", r.raw());
            assert!(r.residual < 0.05);
            assert!(r.raw_im.abs() < 1e-12);
        }
        // the eps = 0.3 feature needs a finer grid for three digits
        let r = berry_chern(&appendix_field(1, 32)).unwrap();
        assert!(r.residual < 1e-3, "{}", r.residual);
    }

    #[test]
    fn constant_and_full_rank_fields_have_zero_chern() {
        let g = BZGrid::square(8).unwrap();
        let id = ProjectorField::from_fn(g, None, |_| linalg::identity(2)).unwrap();
        let r = berry_chern(&id).unwrap();
        assert_eq!(r.value, 0);
        assert!(r.residual < 1e-12);
        let fixed = linalg::projector_from_columns(CMat::from_fn(2, 1, |i, _| c(if i == 0 { 0.6 } else { 0.0 }, if i == 1 { 0.8 } else { 0.0 })).as_ref());
        let pf = ProjectorField::from_fn(g, None, |_| fixed.clone()).unwrap();
        assert!(berry_chern(&pf).unwrap().residual < 1e-12);
        assert_eq!(lattice_chern(&pf).unwrap().value, 0);
    }

    #[test]
    fn barrier_projector_is_empty() {
        let b = compute_bands(&MatrixModel::barrier(2, 3.0), BZGrid::square(8).unwrap(), true).unwrap();
        let p = fermi_projector(&b, 0.0).unwrap();
        assert_eq!(p.rank, 0);
        assert_eq!(lattice_chern(&p).unwrap().value, 0);
    }

    #[test]
    fn projector_and_complement_complete() {
        let p = appendix_field(1, 12);
        let q = p.complement();
        for (a, b) in p.projectors.iter().zip(&q.projectors) {
            assert!(linalg::max_abs_diff(&(a + b), &linalg::identity(2)) == 0.0);
        }
        assert_eq!(lattice_chern(&q).unwrap().value, 1);
    }

    #[test]
    fn rank_variation_rejected() {
        let b = compute_bands(&MatrixModel::square_lattice(), BZGrid::square(8).unwrap(), true).unwrap();
        assert!(matches!(fermi_projector(&b, 0.5), Err(Error::RankVaries { .. })));
    }

    #[test]
    fn closed_form_values() {
        assert!((appendix_curvature_exact(0.1, 1, 0.0).unwrap().im - 5.0).abs() < 1e-12);
        assert!((appendix_curvature_exact(0.1, 1, 0.1).unwrap().im - 1.767766952966).abs() < 1e-9);
        assert_eq!(appendix_curvature_exact(0.1, 0, 0.4).unwrap().im, 0.0);
        assert!(matches!(appendix_curvature_exact(0.1, 1, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn pointwise_curvature_matches_closed_form() {
        let m = AppendixModel::new(0.1, 1).unwrap();
        for &x in &[-0.9, -0.2, 0.0, 0.05, 0.5] {
            let num = curvature_at(&m, [x, 0.7], 1, 1e-3).unwrap();
            let exact = appendix_curvature_exact(0.1, 1, x).unwrap();
            assert!((num - exact).norm() / exact.norm() < 1e-6, "{x}: {num} vs {exact}");
        }
    }

    #[test]
    fn matrix_equivariance_is_periodicity() {
        let d = equivariance_check(&MatrixModel::qwz(1.0), [0.3, 0.8], (1, -2), 1, 0).unwrap();
        assert!(d < 1e-12);
    }
}
