use std::collections::BTreeMap;

use rand::Rng;

use super::lattice::HoppingTable;
use super::BlochSymbol;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

/// Tight-binding symbol `H(xi) = sum_r T_r exp(i r.xi)` on `l^2(Z^2, C^d)`.
///
/// Real-space convention: `(H psi)(x) = sum_r T_r psi(x + r)`, so the matrix
/// element between sites `x` and `x + r` is `T_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixModel {
    dim: usize,
    hoppings: BTreeMap<(i32, i32), CMat>,
}

const HERMITIAN_TOL: f64 = 1e-12;

impl MatrixModel {
    pub fn new(dim: usize, hoppings: impl IntoIterator<Item = ((i32, i32), CMat)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        let mut map = BTreeMap::new();
        for (r, t) in hoppings {
            if t.nrows() != dim || t.ncols() != dim {
                return Err(Error::InvalidModel(format!(
                    "hopping {r:?} has shape {}x{}, expected {dim}x{dim}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            if linalg::max_abs(t.as_ref()) == 0.0 {
                continue;
            }
            if map.insert(r, t).is_some() {
                return Err(Error::InvalidModel(format!("duplicate hopping {r:?}")));
            }
        }
        for (&(r1, r2), t) in &map {
            let adj = linalg::adjoint(t.as_ref());
            let partner = map.get(&(-r1, -r2));
            let residual = match partner {
                Some(p) => linalg::max_abs_diff(p, &adj),
                None => linalg::max_abs(t.as_ref()),
            };
            if residual > HERMITIAN_TOL {
                return Err(Error::NonHermitian {
                    residual,
                    tolerance: HERMITIAN_TOL,
                });
            }
        }
        Ok(Self { dim, hoppings: map })
    }

    /// Builds the model from hoppings on a half-space; partners `T_{-r} = T_r^dagger` are added.
    ///
    /// The `r = 0` block, if present, is Hermitian-symmetrized.
    pub fn from_half(dim: usize, half: impl IntoIterator<Item = ((i32, i32), CMat)>) -> Result<Self> {
        let mut all: BTreeMap<(i32, i32), CMat> = BTreeMap::new();
        for (r, t) in half {
            if r == (0, 0) {
                let mut t0 = t;
                linalg::symmetrize(&mut t0);
                accumulate(&mut all, r, &t0);
            } else {
                let adj = linalg::adjoint(t.as_ref());
                accumulate(&mut all, r, &t);
                accumulate(&mut all, (-r.0, -r.1), &adj);
            }
        }
        Self::new(dim, all)
    }

    /// Onsite `c * Id`: the trivially gapped barrier.
    pub fn barrier(dim: usize, level: f64) -> Self {
        let t = linalg::scale(&linalg::identity(dim), c(level, 0.0));
        Self::new(dim, [((0, 0), t)]).expect("scalar onsite term is Hermitian")
    }

    /// One-band nearest-neighbour model `2 cos xi_1 + 2 cos xi_2`.
    pub fn square_lattice() -> Self {
        let one = CMat::from_fn(1, 1, |_, _| c(1.0, 0.0));
        Self::from_half(1, [((1, 0), one.clone()), ((0, 1), one)]).expect("valid hoppings")
    }

    /// Two-band model `d(xi).sigma` with `d = (sin xi_1, sin xi_2, m + cos xi_1 + cos xi_2)`.
    pub fn qwz(mass: f64) -> Self {
        let sx = pauli(1);
        let sy = pauli(2);
        let sz = pauli(3);
        // sin x = (e^{ix} - e^{-ix}) / 2i, cos x = (e^{ix} + e^{-ix}) / 2
        let t10 = linalg::scale(&sx, c(0.0, -0.5)) + linalg::scale(&sz, c(0.5, 0.0));
        let t01 = linalg::scale(&sy, c(0.0, -0.5)) + linalg::scale(&sz, c(0.5, 0.0));
        let t00 = linalg::scale(&sz, c(mass, 0.0));
        Self::from_half(2, [((0, 0), t00), ((1, 0), t10), ((0, 1), t01)]).expect("valid hoppings")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hoppings(&self) -> &BTreeMap<(i32, i32), CMat> {
        &self.hoppings
    }

    pub fn hopping(&self, r: (i32, i32)) -> Option<&CMat> {
        self.hoppings.get(&r)
    }

    /// Largest `|r_1|` and `|r_2|` with a nonzero hopping.
    pub fn range(&self) -> (usize, usize) {
        self.hoppings.keys().fold((0, 0), |(a, b), &(r1, r2)| {
            (a.max(r1.unsigned_abs() as usize), b.max(r2.unsigned_abs() as usize))
        })
    }

    /// All hoppings real: the symbol then satisfies `H(-xi) = conj(H(xi))`.
    pub fn is_real(&self) -> bool {
        self.hoppings
            .values()
            .all(|t| (0..self.dim).all(|i| (0..self.dim).all(|j| t[(i, j)].im == 0.0)))
    }

    /// Fourier split along `xi_1`: `T_{r2}(zeta) = sum_{r1} T_{(r1, r2)} e^{i r1 zeta}`.
    pub fn hopping_table(&self, zeta: f64) -> HoppingTable {
        let mut table = HoppingTable::new();
        for (&(r1, r2), t) in &self.hoppings {
            let phase = C64::from_polar(1.0, r1 as f64 * zeta);
            let entry = table.entry(r2).or_insert_with(|| linalg::zeros(self.dim, self.dim));
            linalg::add_scaled(entry, t, phase);
        }
        table
    }

    /// `a * self + b * other`, hopping-wise.
    pub fn combine(&self, a: f64, other: &MatrixModel, b: f64) -> Result<MatrixModel> {
        if self.dim != other.dim {
            return Err(Error::Incompatible(format!("dimensions {} and {}", self.dim, other.dim)));
        }
        let mut all = BTreeMap::new();
        for (r, t) in &self.hoppings {
            accumulate(&mut all, *r, &linalg::scale(t, c(a, 0.0)));
        }
        for (r, t) in &other.hoppings {
            accumulate(&mut all, *r, &linalg::scale(t, c(b, 0.0)));
        }
        MatrixModel::new(self.dim, all)
    }
}

fn accumulate(map: &mut BTreeMap<(i32, i32), CMat>, r: (i32, i32), t: &CMat) {
    let n = t.nrows();
    let entry = map.entry(r).or_insert_with(|| linalg::zeros(n, n));
    linalg::add_scaled(entry, t, c(1.0, 0.0));
}

/// Pauli matrices; index 0 is the identity.
pub(crate) fn pauli(k: usize) -> CMat {
    let mut m = linalg::zeros(2, 2);
    match k {
        0 => {
            m[(0, 0)] = c(1.0, 0.0);
            m[(1, 1)] = c(1.0, 0.0);
        }
        1 => {
            m[(0, 1)] = c(1.0, 0.0);
            m[(1, 0)] = c(1.0, 0.0);
        }
        2 => {
            m[(0, 1)] = c(0.0, -1.0);
            m[(1, 0)] = c(0.0, 1.0);
        }
        3 => {
            m[(0, 0)] = c(1.0, 0.0);
            m[(1, 1)] = c(-1.0, 0.0);
        }
        _ => panic!("pauli index {k} out of range"),
    }
    m
}

impl BlochSymbol for MatrixModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn symbol(&self, xi: [f64; 2]) -> CMat {
        let mut h = linalg::zeros(self.dim, self.dim);
        for (&(r1, r2), t) in &self.hoppings {
            let phase = C64::from_polar(1.0, r1 as f64 * xi[0] + r2 as f64 * xi[1]);
            linalg::add_scaled(&mut h, t, phase);
        }
        linalg::symmetrize(&mut h);
        h
    }
}

/// Random two-band model `d(xi).sigma` with nearest and next-nearest harmonics,
/// resampled until `min |d| >= min_gap / 2` on a 48x48 probe grid, so that
/// `lambda0 = 0` lies in a gap of width at least `min_gap`.
pub fn random_gapped_two_band<R: Rng + ?Sized>(rng: &mut R, min_gap: f64) -> MatrixModel {
    const HARMONICS: [(i32, i32); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
    let sigmas = [pauli(1), pauli(2), pauli(3)];
    loop {
        let mut half = Vec::new();
        let mut t0 = linalg::zeros(2, 2);
        for s in &sigmas {
            let a: f64 = rng.random_range(-1.0..1.0);
            linalg::add_scaled(&mut t0, s, c(a, 0.0));
        }
        half.push(((0, 0), t0));
        for &r in &HARMONICS {
            let mut t = linalg::zeros(2, 2);
            for s in &sigmas {
                let re: f64 = rng.random_range(-0.6..0.6);
                let im: f64 = rng.random_range(-0.6..0.6);
                linalg::add_scaled(&mut t, s, c(re, im));
            }
            half.push((r, t));
        }
        let model = MatrixModel::from_half(2, half).expect("constructed Hermitian");
        let n = 48;
        let mut min_d = f64::INFINITY;
        for a in 0..n {
            for b in 0..n {
                let xi = [
                    2.0 * std::f64::consts::PI * a as f64 / n as f64,
                    2.0 * std::f64::consts::PI * b as f64 / n as f64,
                ];
                let h = model.symbol(xi);
                // traceless 2x2 Hermitian: eigenvalues +-|d|, |d|^2 = -det
                let d2 = -linalg::det(&h).re;
                min_d = min_d.min(d2.max(0.0).sqrt());
            }
        }
        if min_d >= 0.5 * min_gap {
            return model;
        }
    }
}
