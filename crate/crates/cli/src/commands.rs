use bec_core::bands::{certified_gap_distance, compute_bands, default_x2_samples, junction_crossing, snapshot_symbol, BZGrid};
use bec_core::conductivity::{conductivity_convergence, junction_conductivity};
use bec_core::edge::{interface_spectrum, spectral_flow, verify_bec};
use bec_core::effective::{index_j_contour, index_j_residue, TwoLevelSymbol};
use bec_core::models::{BulkModel, JunctionFamily};
use bec_core::topology::{berry_chern, curvature_field, fermi_projector, lattice_chern};
use clap::Subcommand;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cache::Outputs;
use crate::config::ExperimentConfig;
use crate::error::{numerical, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Bulk band structure on the Brillouin-zone grid.
    Bands,
    /// Chern number of the bands below lambda0, by link variables and by curvature quadrature.
    Chern,
    /// Interface eigenvalues in the gap window along the Floquet circle.
    EdgeSpectrum,
    /// Signed count of interface curves crossing lambda0.
    SpectralFlow,
    /// Windowed trace conductivity on finite boxes.
    Conductivity,
    /// Index of the two-level effective symbol, by contour and by residue.
    EffectiveIndex,
    /// Bulk Chern numbers against the interface spectral flow.
    Verify,
    /// Band crossings of the glued interface family.
    CrossingDiagnostic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Chern => "chern",
            Command::EdgeSpectrum => "edge-spectrum",
            Command::SpectralFlow => "spectral-flow",
            Command::Conductivity => "conductivity",
            Command::EffectiveIndex => "effective-index",
            Command::Verify => "verify",
            Command::CrossingDiagnostic => "crossing-diagnostic",
        }
    }

    /// The JSON artifact echoed to stdout.
    pub fn summary_file(self) -> &'static str {
        match self {
            Command::Bands => "bands.json",
            Command::Chern => "chern.json",
            Command::EdgeSpectrum => "edge_spectrum.json",
            Command::SpectralFlow => "spectral_flow.json",
            Command::Conductivity => "conductivity.json",
            Command::EffectiveIndex => "effective_index.json",
            Command::Verify => "verify.json",
            Command::CrossingDiagnostic => "crossing.json",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
        match self {
            Command::Bands => bands(cfg),
            Command::Chern => chern(cfg),
            Command::EdgeSpectrum => edge_spectrum(cfg, false),
            Command::SpectralFlow => edge_spectrum(cfg, true),
            Command::Conductivity => conductivity(cfg),
            Command::EffectiveIndex => effective_index(cfg),
            Command::Verify => verify(cfg),
            Command::CrossingDiagnostic => crossing(cfg),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn csv_text(
    stage: &'static str,
    write: impl FnOnce(&mut Vec<u8>) -> bec_core::Result<()>,
) -> Result<Value, CliError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(numerical(stage))?;
    Ok(Value::String(String::from_utf8(buf).expect("csv is utf-8")))
}

fn grid(cfg: &ExperimentConfig) -> Result<BZGrid, CliError> {
    BZGrid::square(cfg.grid).map_err(|e| CliError::Config(format!("$.grid: {e}")))
}

fn lattice_pair(cfg: &ExperimentConfig, command: &str) -> Result<(BulkModel, BulkModel), CliError> {
    let (minus, plus) = cfg.require_pair(command)?;
    for (name, m) in [("minus", &minus), ("plus", &plus)] {
        if !matches!(m, BulkModel::Lattice(_)) {
            return Err(CliError::Config(format!("$.{name}: `{command}` needs a lattice model")));
        }
    }
    Ok((minus, plus))
}

fn bands(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let model = cfg.require_bulk("model", "bands")?;
    let sym = snapshot_symbol(model, cfg.k_max).map_err(numerical("model"))?;
    let b = compute_bands(sym.as_ref(), grid(cfg)?, false).map_err(numerical("bands"))?;
    let ranges: Vec<[f64; 2]> = (0..b.band_count())
        .map(|n| {
            let vals = b.eigenvalues.iter().map(|v| v[n]);
            [vals.clone().fold(f64::INFINITY, f64::min), vals.fold(f64::NEG_INFINITY, f64::max)]
        })
        .collect();
    let summary = json!({
        "grid": [b.grid.n1, b.grid.n2],
        "dim": b.dim,
        "truncation": b.truncation,
        "lambda0": cfg.lambda0,
        "band_ranges": ranges,
        // certified distance from lambda0 to the spectrum, absent when lambda0 is not in a gap
        "gap_distance": certified_gap_distance(&b, cfg.lambda0).ok(),
    });
    let mut out = Outputs::new();
    out.insert("bands.csv".into(), csv_text("bands", |w| b.write_csv(w))?);
    out.insert("bands.json".into(), summary);
    Ok(out)
}

fn chern(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let model = cfg.require_bulk("model", "chern")?;
    let sym = snapshot_symbol(model, cfg.k_max).map_err(numerical("model"))?;
    let b = compute_bands(sym.as_ref(), grid(cfg)?, true).map_err(numerical("bands"))?;
    let p = fermi_projector(&b, cfg.lambda0).map_err(numerical("projector"))?;
    let lattice = lattice_chern(&p).map_err(numerical("lattice_chern"))?;
    let berry = berry_chern(&p).map_err(numerical("berry_chern"))?;
    let curvature = curvature_field(&p);
    let summary = json!({
        "grid": [p.grid.n1, p.grid.n2],
        "lambda0": cfg.lambda0,
        "rank": p.rank,
        "lattice_gauge": lattice,
        "berry_quadrature": berry,
        "agree": lattice.value == berry.value,
    });
    let mut out = Outputs::new();
    out.insert("curvature.csv".into(), csv_text("chern", |w| curvature.write_csv(w))?);
    out.insert("chern.json".into(), summary);
    Ok(out)
}

fn edge_spectrum(cfg: &ExperimentConfig, with_flow: bool) -> Result<Outputs, CliError> {
    let command = if with_flow { "spectral-flow" } else { "edge-spectrum" };
    let (minus, plus) = cfg.require_pair(command)?;
    let params = cfg.bec_params();
    let fs = interface_spectrum(minus, plus, cfg.lambda0, &params).map_err(numerical("floquet_spectrum"))?;
    let mut out = Outputs::new();
    out.insert("floquet.csv".into(), csv_text("floquet_spectrum", |w| fs.write_csv(w))?);
    if with_flow {
        let flow = spectral_flow(&fs, params.theta, true).map_err(numerical("spectral_flow"))?;
        out.insert("spectral_flow.json".into(), to_json(&flow));
    } else {
        let states: usize = fs.states.iter().map(Vec::len).sum();
        let summary = json!({
            "lambda0": fs.lambda0,
            "half_width": fs.half_width,
            "loc_threshold": fs.theta,
            "zeta_nodes": fs.zetas.len(),
            "window_states": states,
            "complete": fs.complete,
            "unresolved": fs.unresolved,
        });
        out.insert("edge_spectrum.json".into(), summary);
    }
    Ok(out)
}

fn verify(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let (minus, plus) = cfg.require_pair("verify")?;
    let report = verify_bec(minus, plus, cfg.lambda0, &cfg.bec_params()).map_err(numerical("verify"))?;
    let mut out = Outputs::new();
    out.insert("verify.json".into(), to_json(&report));
    Ok(out)
}

fn conductivity(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let (minus, plus) = lattice_pair(cfg, "conductivity")?;
    let jf = JunctionFamily::with_default_barrier(minus, plus, cfg.lambda0).map_err(numerical("junction"))?;
    let params = cfg.conductivity_params();
    let k = &cfg.conductivity;
    let mut out = Outputs::new();
    if k.sizes.is_empty() {
        let r = junction_conductivity(&jf, k.box_size[0], k.box_size[1], &params).map_err(numerical("conductivity"))?;
        out.insert("conductivity.json".into(), to_json(&r));
    } else {
        let sizes: Vec<(usize, usize)> = std::iter::once(&k.box_size).chain(&k.sizes).map(|s| (s[0], s[1])).collect();
        let table = conductivity_convergence(&jf, &sizes, &params).map_err(numerical("conductivity"))?;
        out.insert("conductivity.json".into(), to_json(&table.rows[0].result));
        out.insert("convergence.json".into(), to_json(&table));
        out.insert("convergence.csv".into(), csv_text("conductivity", |w| table.write_csv(w))?);
    }
    Ok(out)
}

fn effective_index(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let model = cfg.require_bulk("model", "effective-index")?;
    if !matches!(model, BulkModel::Lattice(_)) {
        return Err(CliError::Config("$.model: `effective-index` needs a lattice model".into()));
    }
    let sym = snapshot_symbol(model, cfg.k_max).map_err(numerical("model"))?;
    let b = compute_bands(sym.as_ref(), grid(cfg)?, true).map_err(numerical("bands"))?;
    let p = fermi_projector(&b, cfg.lambda0).map_err(numerical("projector"))?;
    let chern = lattice_chern(&p).map_err(numerical("lattice_chern"))?;
    let c = &cfg.contour;
    let symbol = TwoLevelSymbol::new(p, c.lambda1, c.lambda2).map_err(numerical("effective_symbol"))?;
    let contour = cfg.contour_spec();
    let by_contour = index_j_contour(&symbol, &contour).map_err(numerical("contour_index"))?;
    let by_residue = index_j_residue(&symbol).map_err(numerical("residue_index"))?;
    let summary = json!({
        "lambda1": c.lambda1,
        "lambda2": c.lambda2,
        "contour_spec": contour,
        "contour": by_contour,
        "residue": by_residue,
        "chern": chern.value,
        "consistent": by_contour.chern == chern.value && by_residue.chern == chern.value,
    });
    let mut out = Outputs::new();
    out.insert("effective_index.json".into(), summary);
    Ok(out)
}

fn crossing(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let (minus, plus) = cfg.require_pair("crossing-diagnostic")?;
    let jf = JunctionFamily::with_default_barrier(minus, plus, cfg.lambda0).map_err(numerical("junction"))?;
    let x = &cfg.crossing;
    let d = junction_crossing(&jf, cfg.k_max, &default_x2_samples(x.x2_samples), grid(cfg)?, x.band, x.delta)
        .map_err(numerical("crossing"))?;
    let mut out = Outputs::new();
    out.insert("crossing.json".into(), to_json(&d));
    Ok(out)
}
