use serde::{Deserialize, Serialize};

use super::continuous::ContinuousStrip;
use super::flow::{floquet_spectrum, spectral_flow, FloquetOptions, FloquetSpectrum, SpectralFlowResult};
use super::strip::{StripFamily, StripOperator};
use crate::bands::{certified_gap_distance, compute_bands, snapshot_symbol, BZGrid, BandStructure};
use crate::error::{Error, Result};
use crate::models::{BulkModel, JunctionFamily};
use crate::topology::{fermi_projector, lattice_chern};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BecParams {
    /// Lattice strip half-width `W`, or the half-length of a continuous strip.
    pub width: usize,
    pub zeta_nodes: usize,
    /// Energy window half-width; by default half the distance from `lambda0` to the nearest bulk band.
    pub half_width: Option<f64>,
    pub theta: f64,
    /// Brillouin-zone grid side for the bulk Chern numbers.
    pub grid: usize,
    pub max_nodes: Option<usize>,
    /// Plane-wave radius for continuous bulks.
    pub k_max: usize,
    /// `x1` Fourier modes of a continuous strip.
    pub strip_modes: usize,
    /// Grid points per unit length along `x2` in a continuous strip.
    pub strip_resolution: usize,
}

impl Default for BecParams {
    fn default() -> Self {
        Self {
            width: 40,
            zeta_nodes: 200,
            half_width: None,
            theta: 0.5,
            grid: 24,
            max_nodes: None,
            k_max: 4,
            strip_modes: 3,
            strip_resolution: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BecReport {
    pub c1_plus: i64,
    pub c1_minus: i64,
    pub spectral_flow: i64,
    pub unfiltered_flow: i64,
    pub crossings: usize,
    pub lambda0: f64,
    pub half_width: f64,
    pub width: usize,
    pub zeta_nodes: usize,
    #[serde(rename = "match")]
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcatenationReport {
    pub flow_minus_plus: i64,
    pub flow_minus_barrier: i64,
    pub flow_barrier_plus: i64,
    pub holds: bool,
}

fn bulk_bands(model: &BulkModel, params: &BecParams, vectors: bool) -> Result<BandStructure> {
    let grid = BZGrid::square(params.grid)?;
    let symbol = snapshot_symbol(model.clone(), params.k_max)?;
    compute_bands(symbol.as_ref(), grid, vectors)
}

/// Window half-width certified against every bulk band structure in `bands`.
fn certified_window(bands: &[&BandStructure], lambda0: f64, requested: Option<f64>, stage: &'static str) -> Result<f64> {
    let mut certified = f64::INFINITY;
    let mut nearest = f64::INFINITY;
    for b in bands {
        certified = certified.min(certified_gap_distance(b, lambda0).map_err(|e| e.at(stage))?);
        let d = b.eigenvalues.iter().flatten().map(|v| (v - lambda0).abs()).fold(f64::INFINITY, f64::min);
        nearest = nearest.min(d);
    }
    let w = requested.unwrap_or(nearest / 2.0);
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidWindow(format!("window half-width {w} is not positive")).at(stage));
    }
    if !(certified > w) {
        return Err(Error::GapNotCertified(format!(
            "window [{}, {}] is not inside the certified bulk gap",
            lambda0 - w,
            lambda0 + w
        ))
        .at(stage));
    }
    Ok(w)
}

fn strip_spectrum(jf: &JunctionFamily, lambda0: f64, w: f64, params: &BecParams) -> Result<FloquetSpectrum> {
    let strip: Box<dyn StripFamily> = if jf.is_lattice() {
        Box::new(StripOperator::new(jf, params.width).map_err(|e| e.at("strip"))?)
    } else {
        Box::new(
            ContinuousStrip::new(jf, params.strip_modes, params.width as f64, params.strip_resolution)
                .map_err(|e| e.at("strip"))?,
        )
    };
    let mut opts = FloquetOptions::new(params.zeta_nodes, w);
    opts.theta = params.theta;
    if let Some(m) = params.max_nodes {
        opts.max_nodes = m;
    }
    floquet_spectrum(strip.as_ref(), lambda0, &opts).map_err(|e| e.at("floquet_spectrum"))
}

fn strip_flow(jf: &JunctionFamily, lambda0: f64, w: f64, params: &BecParams) -> Result<SpectralFlowResult> {
    let fs = strip_spectrum(jf, lambda0, w, params)?;
    spectral_flow(&fs, params.theta, true).map_err(|e| e.at("spectral_flow"))
}

/// Floquet spectrum of the interface `minus | barrier | plus` in the certified window.
pub fn interface_spectrum(
    minus: impl Into<BulkModel>,
    plus: impl Into<BulkModel>,
    lambda0: f64,
    params: &BecParams,
) -> Result<FloquetSpectrum> {
    let (minus, plus) = (minus.into(), plus.into());
    let bm = bulk_bands(&minus, params, false).map_err(|e| e.at("bands_minus"))?;
    let bp = bulk_bands(&plus, params, false).map_err(|e| e.at("bands_plus"))?;
    let w = certified_window(&[&bm, &bp], lambda0, params.half_width, "gap")?;
    let jf = JunctionFamily::with_default_barrier(minus, plus, lambda0).map_err(|e| e.at("junction"))?;
    strip_spectrum(&jf, lambda0, w, params)
}

/// Filtered spectral flow across the interface `minus | barrier | plus` with the default barrier.
pub fn pair_flow(
    minus: impl Into<BulkModel>,
    plus: impl Into<BulkModel>,
    lambda0: f64,
    params: &BecParams,
) -> Result<SpectralFlowResult> {
    let fs = interface_spectrum(minus, plus, lambda0, params)?;
    spectral_flow(&fs, params.theta, true).map_err(|e| e.at("spectral_flow"))
}

/// Bulk Chern numbers of both sides against the spectral flow of their interface.
pub fn verify_bec(
    minus: impl Into<BulkModel>,
    plus: impl Into<BulkModel>,
    lambda0: f64,
    params: &BecParams,
) -> Result<BecReport> {
    let (minus, plus) = (minus.into(), plus.into());
    let bm = bulk_bands(&minus, params, true).map_err(|e| e.at("bands_minus"))?;
    let bp = bulk_bands(&plus, params, true).map_err(|e| e.at("bands_plus"))?;
    let w = certified_window(&[&bm, &bp], lambda0, params.half_width, "gap")?;
    let chern = |b: &BandStructure, stage| -> Result<i64> {
        let p = fermi_projector(b, lambda0).map_err(|e| e.at(stage))?;
        Ok(lattice_chern(&p).map_err(|e| e.at(stage))?.value)
    };
    let c1_minus = chern(&bm, "chern_minus")?;
    let c1_plus = chern(&bp, "chern_plus")?;
    let jf = JunctionFamily::with_default_barrier(minus, plus, lambda0).map_err(|e| e.at("junction"))?;
    let flow = strip_flow(&jf, lambda0, w, params)?;
    Ok(BecReport {
        c1_plus,
        c1_minus,
        spectral_flow: flow.flow,
        unfiltered_flow: flow.unfiltered_flow,
        crossings: flow.crossings.len(),
        lambda0,
        half_width: w,
        width: params.width,
        zeta_nodes: params.zeta_nodes,
        matches: flow.flow == c1_plus - c1_minus,
    })
}

/// Flows `(-,+)`, `(-,0)` and `(0,+)` with `middle` as the intermediate bulk.
pub fn concatenation_check(
    minus: impl Into<BulkModel>,
    plus: impl Into<BulkModel>,
    middle: impl Into<BulkModel>,
    lambda0: f64,
    params: &BecParams,
) -> Result<ConcatenationReport> {
    let (minus, plus, middle) = (minus.into(), plus.into(), middle.into());
    let mp = pair_flow(minus.clone(), plus.clone(), lambda0, params)?.flow;
    let m0 = pair_flow(minus, middle.clone(), lambda0, params)?.flow;
    let p0 = pair_flow(middle, plus, lambda0, params)?.flow;
    Ok(ConcatenationReport {
        flow_minus_plus: mp,
        flow_minus_barrier: m0,
        flow_barrier_plus: p0,
        holds: mp == m0 + p0,
    })
}
