//! Interface strips periodic along `x1`, their Floquet spectra, and the
//! spectral flow through a bulk gap.
//!
//! Orientation: the strip at Floquet parameter `zeta` acts on states with
//! `psi(x + e1) = e^{-i zeta} psi(x)`. With flow counted as the sign of
//! `d lambda / d zeta` at each crossing, this makes the flow equal to
//! `c1(plus) - c1(minus)` and to `2 pi` times the trace-formula conductivity.

mod continuous;
mod flow;
mod strip;
mod verify;

pub use continuous::ContinuousStrip;
pub use flow::{
    floquet_spectrum, spectral_flow, Crossing, FloquetOptions, FloquetSpectrum, SpectralFlowResult, WindowState,
};
pub use strip::{assemble_strip, StripFamily, StripOperator};
pub use verify::{concatenation_check, interface_spectrum, pair_flow, verify_bec, BecParams, BecReport, ConcatenationReport};
