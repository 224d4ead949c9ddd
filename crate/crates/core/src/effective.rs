//! Two-level effective symbols `E(xi; lambda)` and their contour index `J`.
//!
//! For a projector field `P1` with complement `P2 = Id - P1`, the symbol
//! `E = (lambda - lambda1) P1 + (lambda - lambda2) P2` has index
//! `J = -\oint \int Tr(d1 E . E^-1 . d2(dE/dlambda . E^-1)) dlambda/(2 pi i) dxi/(2 pi)^2`
//! over a circle around `lambda1`, and `2 pi i J` is the Chern number of `P1`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bands::BZGrid;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64, I};
use crate::topology::{curvature_field, fft_derivative, ProjectorField};

/// `lambda1 P + lambda2 (Id - P)` at every node.
pub fn two_level_rearrangement(p: &ProjectorField, lambda1: f64, lambda2: f64) -> Result<Vec<CMat>> {
    if !(lambda1 < lambda2) {
        return Err(Error::Domain(format!("two-level values need lambda1 < lambda2, got {lambda1} and {lambda2}")));
    }
    let id = linalg::identity(p.dim());
    Ok(p.projectors
        .iter()
        .map(|pi| {
            let mut q = linalg::scale(&id, c(lambda2, 0.0));
            linalg::add_scaled(&mut q, pi, c(lambda1 - lambda2, 0.0));
            q
        })
        .collect())
}

/// Compress a projector field onto per-node orthonormal frames: `P1 = F^dagger P F`.
///
/// The range of `P` must lie in the span of the frame up to `1e-8`.
pub fn reduced_projector(p: &ProjectorField, frames: &[CMat]) -> Result<ProjectorField> {
    if frames.len() != p.grid.len() {
        return Err(Error::Incompatible(format!("{} frames for {} grid nodes", frames.len(), p.grid.len())));
    }
    let mut leakage: f64 = 0.0;
    let mut reduced = Vec::with_capacity(frames.len());
    for (f, pi) in frames.iter().zip(&p.projectors) {
        if f.nrows() != p.dim() {
            return Err(Error::Incompatible(format!("frame has {} rows, projector dimension is {}", f.nrows(), p.dim())));
        }
        let fh = f.adjoint().to_owned();
        let gram = &fh * f;
        let defect = linalg::max_abs_diff(&gram, &linalg::identity(f.ncols()));
        if defect > 1e-10 {
            return Err(Error::InvalidModel(format!("frame is not orthonormal (defect {defect:.3e})")));
        }
        // (Id - F F^dagger) P
        let inside = &(f * &fh) * pi;
        let mut outside = pi.clone();
        linalg::add_scaled(&mut outside, &inside, c(-1.0, 0.0));
        leakage = leakage.max(linalg::max_abs(outside.as_ref()));
        reduced.push(&(&fh * pi) * f);
    }
    if leakage > 1e-8 {
        return Err(Error::RangeLeakage { leakage });
    }
    ProjectorField::new(p.grid, reduced, None)
}

/// Counterclockwise circle `center + radius e^{i theta}` sampled at `nodes` equispaced angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub center: f64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourSpec {
    /// Circle around `lambda1` of radius `(lambda2 - lambda1) / 2` with 64 nodes.
    pub fn around(lambda1: f64, lambda2: f64) -> Self {
        Self {
            center: lambda1,
            radius: 0.5 * (lambda2 - lambda1).abs(),
            nodes: 64,
        }
    }

    /// The circle must enclose `inside` and leave out `outside`.
    pub fn validate(&self, inside: f64, outside: f64) -> Result<()> {
        if self.nodes < 4 || !(self.radius > 0.0) {
            return Err(Error::InvalidContour(format!("{} nodes, radius {}", self.nodes, self.radius)));
        }
        let (di, dout) = ((self.center - inside).abs(), (self.center - outside).abs());
        if !(di < self.radius && self.radius < dout) {
            return Err(Error::InvalidContour(format!(
                "circle at {} of radius {} must enclose {inside} and exclude {outside}",
                self.center, self.radius
            )));
        }
        Ok(())
    }

    /// Nodes `lambda_k` and trapezoid weights for `\oint f dlambda / (2 pi i)`.
    pub fn quadrature(&self) -> Vec<(C64, C64)> {
        (0..self.nodes)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / self.nodes as f64;
                let e = (I * t).exp();
                (c(self.center, 0.0) + e * self.radius, e * (self.radius / self.nodes as f64))
            })
            .collect()
    }
}

/// A `lambda`-dependent matrix family on a periodic Brillouin-zone grid.
pub trait EffectiveSymbol: Sync {
    fn grid(&self) -> BZGrid;

    fn dim(&self) -> usize;

    fn symbol(&self, node: usize, lambda: C64) -> CMat;

    fn lambda_derivative(&self, node: usize, lambda: C64) -> CMat;

    /// Inverse of the symbol; the default solves numerically and rejects near-singular nodes.
    fn inverse(&self, node: usize, lambda: C64) -> Result<CMat> {
        let e = self.symbol(node, lambda);
        let smin = linalg::min_singular_value(&e)?;
        if smin < 1e-10 * linalg::max_abs(e.as_ref()).max(1.0) {
            return Err(Error::InvalidContour(format!("symbol is singular at node {node}, lambda = {lambda}")));
        }
        linalg::inverse(&e)
    }

    /// `(enclosed, excluded)` poles to check a contour against, when known.
    fn poles(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `E(xi; lambda) = (lambda - lambda1) P1(xi) + (lambda - lambda2) P2(xi)` with `P2 = Id - P1`.
#[derive(Debug, Clone)]
pub struct TwoLevelSymbol {
    pub projector: ProjectorField,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl TwoLevelSymbol {
    pub fn new(projector: ProjectorField, lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 < lambda2) {
            return Err(Error::Domain(format!("two-level values need lambda1 < lambda2, got {lambda1} and {lambda2}")));
        }
        if projector.plane_wave_radius.is_some() {
            return Err(Error::Incompatible(
                "effective symbols need a periodic field; compress plane-wave projectors with reduced_projector".into(),
            ));
        }
        Ok(Self {
            projector,
            lambda1,
            lambda2,
        })
    }

    /// Same levels with `P1` and `P2` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            projector: self.projector.complement(),
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        }
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self {
            projector: self.projector.clone(),
            lambda1: self.lambda1 + by,
            lambda2: self.lambda2 + by,
        }
    }
}

impl EffectiveSymbol for TwoLevelSymbol {
    fn grid(&self) -> BZGrid {
        self.projector.grid
    }

    fn dim(&self) -> usize {
        self.projector.dim()
    }

    fn symbol(&self, node: usize, lambda: C64) -> CMat {
        let p1 = &self.projector.projectors[node];
        let mut e = linalg::scale(&linalg::identity(self.dim()), lambda - self.lambda2);
        linalg::add_scaled(&mut e, p1, c(self.lambda2 - self.lambda1, 0.0));
        e
    }

    fn lambda_derivative(&self, _node: usize, _lambda: C64) -> CMat {
        linalg::identity(self.dim())
    }

    fn inverse(&self, node: usize, lambda: C64) -> Result<CMat> {
        let (a, b) = (lambda - self.lambda1, lambda - self.lambda2);
        if a.norm() < 1e-12 || b.norm() < 1e-12 {
            return Err(Error::InvalidContour(format!("lambda = {lambda} hits a level of the symbol")));
        }
        let p1 = &self.projector.projectors[node];
        let mut inv = linalg::scale(&linalg::identity(self.dim()), b.inv());
        linalg::add_scaled(&mut inv, p1, a.inv() - b.inv());
        Ok(inv)
    }

    fn poles(&self) -> Option<(f64, f64)> {
        Some((self.lambda1, self.lambda2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexMethod {
    Contour,
    Residue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveIndexResult {
    #[serde(rename = "J_re")]
    pub j_re: f64,
    #[serde(rename = "J_im")]
    pub j_im: f64,
    pub two_i_pi_j_re: f64,
    pub two_i_pi_j_im: f64,
    /// Nearest integer to the real part of `2 pi i J`.
    pub chern: i64,
    /// `|2 pi i J - chern|`.
    pub residual: f64,
    pub method: IndexMethod,
}

impl EffectiveIndexResult {
    fn from_j(j: C64, method: IndexMethod) -> Result<Self> {
        let t = I * 2.0 * PI * j;
        let chern = t.re.round();
        let residual = (t - c(chern, 0.0)).norm();
        if !(residual < 0.5) {
            return Err(Error::UnderResolved { raw: t.re, residual });
        }
        Ok(Self {
            j_re: j.re,
            j_im: j.im,
            two_i_pi_j_re: t.re,
            two_i_pi_j_im: t.im,
            chern: chern as i64,
            residual,
            method,
        })
    }

    pub fn j(&self) -> C64 {
        c(self.j_re, self.j_im)
    }

    pub fn two_i_pi_j(&self) -> C64 {
        c(self.two_i_pi_j_re, self.two_i_pi_j_im)
    }
}

/// Raw contour index: trapezoid rule on the circle, FFT derivatives in `xi`.
pub fn contour_index<S: EffectiveSymbol + ?Sized>(s: &S, contour: &ContourSpec) -> Result<C64> {
    match s.poles() {
        Some((inside, outside)) => contour.validate(inside, outside)?,
        None => contour.validate(contour.center, f64::INFINITY)?,
    }
    let grid = s.grid();
    let mut total = C64::new(0.0, 0.0);
    for (lambda, weight) in contour.quadrature() {
        let nodes: Vec<(CMat, CMat)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let inv = s.inverse(i, lambda)?;
                let f = &s.lambda_derivative(i, lambda) * &inv;
                Ok((s.symbol(i, lambda), f))
            })
            .collect::<Result<Vec<_>>>()?;
        let (e, f): (Vec<CMat>, Vec<CMat>) = nodes.into_iter().unzip();
        let d1e = fft_derivative(&e, grid, 0);
        let d2f = fft_derivative(&f, grid, 1);
        let inner: C64 = (0..grid.len())
            .into_par_iter()
            .map(|i| -> Result<C64> {
                let inv = s.inverse(i, lambda)?;
                Ok(linalg::trace(&(&(&d1e[i] * &inv) * &d2f[i])))
            })
            .collect::<Result<Vec<C64>>>()?
            .into_iter()
            .sum();
        total += weight * inner;
    }
    Ok(-total * grid.cell_area() / (4.0 * PI * PI))
}

pub fn index_j_contour<S: EffectiveSymbol + ?Sized>(s: &S, contour: &ContourSpec) -> Result<EffectiveIndexResult> {
    EffectiveIndexResult::from_j(contour_index(s, contour)?, IndexMethod::Contour)
}

/// Residue form `J = (2 pi)^-2 \int Tr(P1 [d1 P1, d2 P1])`.
pub fn index_j_residue(t: &TwoLevelSymbol) -> Result<EffectiveIndexResult> {
    let j = curvature_field(&t.projector).integral() / (4.0 * PI * PI);
    EffectiveIndexResult::from_j(j, IndexMethod::Residue)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::{compute_bands, BZGrid};
    use crate::models::AppendixModel;
    use crate::topology::{fermi_projector, lattice_chern};

    fn appendix_field(nu: i32, n: usize) -> ProjectorField {
        let m = AppendixModel::new(0.3, nu).unwrap();
        let b = compute_bands(&m, BZGrid::square(n).unwrap(), true).unwrap();
        fermi_projector(&b, 0.0).unwrap()
    }

    #[test]
    fn rearrangement_is_two_valued() {
        let p = appendix_field(1, 8);
        let q = two_level_rearrangement(&p, 0.0, 1.0).unwrap();
        for qi in &q {
            let ev = linalg::eigvalsh(qi).unwrap();
            assert!(ev[0].abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
            assert!(linalg::max_abs_diff(&(qi * qi), qi) < 1e-12);
        }
        let q = two_level_rearrangement(&p, -1.0, 1.0).unwrap();
        let m = AppendixModel::new(0.3, 1).unwrap();
        for (i, qi) in q.iter().enumerate() {
            let h = crate::models::BlochSymbol::symbol(&m, p.grid.node(i));
            assert!(linalg::max_abs(linalg::commutator(qi, &h).as_ref()) < 1e-12);
            assert!((linalg::trace(qi).re - 0.0).abs() < 1e-12);
        }
        assert!(two_level_rearrangement(&p, 1.0, 1.0).is_err());
    }

    #[test]
    fn inverse_matches_closed_form() {
        let t = TwoLevelSymbol::new(appendix_field(1, 8), -1.0, 1.0).unwrap();
        let lambda = c(0.3, 0.4);
        let e = t.symbol(5, lambda);
        let inv = t.inverse(5, lambda).unwrap();
        assert!(linalg::max_abs_diff(&(&e * &inv), &linalg::identity(2)) < 1e-13);
    }

    #[test]
    fn constant_projector_has_zero_index() {
        let grid = BZGrid::square(8).unwrap();
        let p = CMat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let field = ProjectorField::from_fn(grid, None, |_| p.clone()).unwrap();
        let t = TwoLevelSymbol::new(field, -1.0, 1.0).unwrap();
        let r = index_j_contour(&t, &ContourSpec::around(-1.0, 1.0)).unwrap();
        assert_eq!(r.j(), c(0.0, 0.0));
        assert_eq!(index_j_residue(&t).unwrap().j(), c(0.0, 0.0));
    }

    #[test]
    fn contour_and_residue_agree_with_chern() {
        let p = appendix_field(1, 32);
        let oracle = lattice_chern(&p).unwrap().value;
        let t = TwoLevelSymbol::new(p, -1.0, 1.0).unwrap();
        let a = index_j_contour(&t, &ContourSpec::around(-1.0, 1.0)).unwrap();
        let b = index_j_residue(&t).unwrap();
        assert!((a.j() - b.j()).norm() < 1e-10);
        assert_eq!(a.chern, oracle);
        assert!(a.residual < 1e-3);
        let s = index_j_contour(&t.swapped(), &ContourSpec::around(-1.0, 1.0)).unwrap();
        assert!((s.j() + a.j()).norm() < 1e-10);
    }

    #[test]
    fn contour_validation() {
        let c = ContourSpec::around(-1.0, 1.0);
        assert!(c.validate(-1.0, 1.0).is_ok());
        let bad = ContourSpec { radius: 2.5, ..c };
        assert!(matches!(bad.validate(-1.0, 1.0), Err(Error::InvalidContour(_))));
        let t = TwoLevelSymbol::new(appendix_field(1, 8), -1.0, 1.0).unwrap();
        assert!(index_j_contour(&t, &bad).is_err());
    }

    #[test]
    fn reduced_projector_with_full_frame_is_identity_map() {
        let p = appendix_field(2, 8);
        let frames = vec![linalg::identity(2); p.grid.len()];
        let r = reduced_projector(&p, &frames).unwrap();
        for (a, b) in r.projectors.iter().zip(&p.projectors) {
            assert!(linalg::max_abs_diff(a, b) < 1e-14);
        }
    }

    #[test]
    fn reduced_projector_rejects_leakage() {
        let p = appendix_field(1, 8);
        let e0 = CMat::from_fn(2, 1, |i, _| if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let frames = vec![e0; p.grid.len()];
        assert!(matches!(reduced_projector(&p, &frames), Err(Error::RangeLeakage { .. })));
    }
}
