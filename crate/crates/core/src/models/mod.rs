//! Hamiltonian families: plane-wave continuous models, tight-binding symbols,
//! the two-band window model with Chern number `-nu`, and glued interfaces.

mod appendix;
mod continuous;
mod io;
mod junction;
mod lattice;
mod matrix;

pub use appendix::{AppendixModel, AppendixWindow};
pub use continuous::{ContinuousKind, ContinuousModel, FourierSeries, PlaneWave};
pub(crate) use continuous::PlaneWaveBasis;
pub use io::{load_model_file, parse_model, parse_model_at, ModelSpec};
pub use junction::{chi_minus, chi_plus, chi_zero, BulkModel, GluedSnapshot, JunctionFamily, TRANSITION_STEP};
pub use lattice::{HoppingTable, LatticeModel, StripSymbol};
pub use matrix::{random_gapped_two_band, MatrixModel};

use crate::linalg::CMat;

/// A family `xi -> H(xi)` of finite Hermitian matrices over the Brillouin zone.
pub trait BlochSymbol: Sync {
    fn dim(&self) -> usize;

    fn symbol(&self, xi: [f64; 2]) -> CMat;

    /// Plane-wave truncation radius when the symbol comes from a continuous model.
    ///
    /// Such symbols are not periodic in `xi`; they satisfy the index-shift
    /// equivariance `H(xi + 2 pi k)_{m', m} = H(xi)_{m'+k, m+k}` instead.
    fn plane_wave_radius(&self) -> Option<usize> {
        None
    }
}

impl<T: BlochSymbol + ?Sized> BlochSymbol for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn symbol(&self, xi: [f64; 2]) -> CMat {
        (**self).symbol(xi)
    }
    fn plane_wave_radius(&self) -> Option<usize> {
        (**self).plane_wave_radius()
    }
}

impl<T: BlochSymbol + ?Sized> BlochSymbol for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn symbol(&self, xi: [f64; 2]) -> CMat {
        (**self).symbol(xi)
    }
    fn plane_wave_radius(&self) -> Option<usize> {
        (**self).plane_wave_radius()
    }
}
