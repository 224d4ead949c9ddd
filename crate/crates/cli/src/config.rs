//! Experiment configuration: schema, model resolution and range checks.

use std::path::{Path, PathBuf};

use bec_core::conductivity::ConductivityParams;
use bec_core::edge::BecParams;
use bec_core::effective::ContourSpec;
use bec_core::models::{parse_model_at, BulkModel, ModelSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Single bulk for `bands`, `chern` and `effective-index`: inline object or file path.
    pub model: Option<Value>,
    /// Lower and upper bulk of an interface.
    pub minus: Option<Value>,
    pub plus: Option<Value>,
    pub lambda0: f64,
    /// Brillouin-zone grid side.
    pub grid: usize,
    /// Plane-wave radius for continuous models.
    pub k_max: usize,
    pub edge: EdgeConfig,
    pub contour: ContourConfig,
    pub conductivity: ConductivityConfig,
    pub crossing: CrossingConfig,
    /// Default output directory; `--out` takes precedence.
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: None,
            minus: None,
            plus: None,
            lambda0: 0.0,
            grid: 24,
            k_max: 4,
            edge: EdgeConfig::default(),
            contour: ContourConfig::default(),
            conductivity: ConductivityConfig::default(),
            crossing: CrossingConfig::default(),
            out: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgeConfig {
    pub width: usize,
    pub zeta_nodes: usize,
    /// Half-width of the energy window around `lambda0`.
    pub window: Option<f64>,
    pub loc_threshold: f64,
    pub max_nodes: Option<usize>,
    pub strip_modes: usize,
    pub strip_resolution: usize,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            width: 40,
            zeta_nodes: 200,
            window: None,
            loc_threshold: 0.5,
            max_nodes: None,
            strip_modes: 3,
            strip_resolution: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Circle center and radius; by default centered at `lambda1` with radius `(lambda2 - lambda1) / 2`.
    pub center: Option<f64>,
    pub radius: Option<f64>,
    pub nodes: usize,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            lambda1: -1.0,
            lambda2: 1.0,
            center: None,
            radius: None,
            nodes: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConductivityConfig {
    /// `[L1, L2]`: `L1` columns and `2 L2 + 1` rows.
    #[serde(rename = "box")]
    pub box_size: [usize; 2],
    /// Extra boxes for a convergence table.
    pub sizes: Vec<[usize; 2]>,
    pub margin: usize,
    pub ell: Option<f64>,
    pub eps: Option<f64>,
    pub r1_cut: usize,
    pub perturbation: Option<f64>,
}

impl Default for ConductivityConfig {
    fn default() -> Self {
        Self {
            box_size: [48, 40],
            sizes: Vec::new(),
            margin: 8,
            ell: None,
            eps: None,
            r1_cut: 8,
            perturbation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossingConfig {
    /// 1-based lower band of the examined pair.
    pub band: usize,
    pub delta: f64,
    pub x2_samples: usize,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        Self {
            band: 1,
            delta: 0.0,
            x2_samples: 25,
        }
    }
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

/// Reads a config file, inlining model files referenced by path (relative to the config).
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(&path.display().to_string(), e))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| invalid("$", e))?;
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(raw).map_err(|e| {
        let p = e.path().to_string();
        let at = if p == "." { "$".to_string() } else { format!("$.{p}") };
        invalid(&at, e.into_inner())
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for (name, slot) in [("model", &mut cfg.model), ("minus", &mut cfg.minus), ("plus", &mut cfg.plus)] {
        if let Some(Value::String(file)) = slot {
            let file = base.join(file.as_str());
            let text = std::fs::read_to_string(&file)
                .map_err(|e| invalid(&format!("$.{name}"), format!("cannot read {}: {e}", file.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| invalid(&format!("$.{name}"), format!("{}: {e}", file.display())))?;
            *slot = Some(v);
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Range checks shared by every command.
    pub fn validate(&self) -> Result<(), CliError> {
        let check = |ok: bool, path: &str, msg: &str| if ok { Ok(()) } else { Err(invalid(path, msg)) };
        check(self.lambda0.is_finite(), "$.lambda0", "must be finite")?;
        check(self.grid >= 4, "$.grid", "must be at least 4")?;
        let e = &self.edge;
        check(e.width >= 1, "$.edge.width", "must be positive")?;
        check(e.zeta_nodes >= 3, "$.edge.zeta_nodes", "must be at least 3")?;
        check(e.window.is_none_or(|w| w > 0.0 && w.is_finite()), "$.edge.window", "must be positive")?;
        check(e.loc_threshold > 0.0 && e.loc_threshold < 1.0, "$.edge.loc_threshold", "must lie in (0, 1)")?;
        check(e.max_nodes.is_none_or(|m| m >= e.zeta_nodes), "$.edge.max_nodes", "must be at least zeta_nodes")?;
        check(e.strip_modes >= 1, "$.edge.strip_modes", "must be positive")?;
        check(e.strip_resolution >= 1, "$.edge.strip_resolution", "must be positive")?;
        let c = &self.contour;
        check(c.lambda1 < c.lambda2, "$.contour", "needs lambda1 < lambda2")?;
        check(c.nodes >= 4, "$.contour.nodes", "must be at least 4")?;
        check(c.radius.is_none_or(|r| r > 0.0), "$.contour.radius", "must be positive")?;
        self.contour_spec()
            .validate(c.lambda1, c.lambda2)
            .map_err(|e| invalid("$.contour", e))?;
        let k = &self.conductivity;
        for (i, s) in std::iter::once(&k.box_size).chain(&k.sizes).enumerate() {
            let path = if i == 0 { "$.conductivity.box".to_string() } else { format!("$.conductivity.sizes[{}]", i - 1) };
            check(s[0] >= 1 && s[1] >= 1, &path, "box sides must be positive")?;
            check(
                3 * k.margin < s[0].min(2 * s[1] + 1),
                &path,
                "box too small for the margin (need 3 margin < min(L1, 2 L2 + 1))",
            )?;
        }
        check(k.margin >= 1, "$.conductivity.margin", "must be positive")?;
        check(k.ell.is_none_or(|l| l > 0.0), "$.conductivity.ell", "must be positive")?;
        check(k.eps.is_none_or(|x| x > 0.0), "$.conductivity.eps", "must be positive")?;
        check(k.perturbation.is_none_or(|x| x >= 0.0), "$.conductivity.perturbation", "must be non-negative")?;
        let x = &self.crossing;
        check(x.band >= 1, "$.crossing.band", "bands are 1-based")?;
        check(x.delta >= 0.0, "$.crossing.delta", "must be non-negative")?;
        check(x.x2_samples >= 2, "$.crossing.x2_samples", "must be at least 2")?;
        Ok(())
    }

    pub fn contour_spec(&self) -> ContourSpec {
        let c = &self.contour;
        let mut spec = ContourSpec::around(c.lambda1, c.lambda2);
        spec.nodes = c.nodes;
        if let Some(x) = c.center {
            spec.center = x;
        }
        if let Some(r) = c.radius {
            spec.radius = r;
        }
        spec
    }

    pub fn bec_params(&self) -> BecParams {
        let e = &self.edge;
        BecParams {
            width: e.width,
            zeta_nodes: e.zeta_nodes,
            half_width: e.window,
            theta: e.loc_threshold,
            grid: self.grid,
            max_nodes: e.max_nodes,
            k_max: self.k_max,
            strip_modes: e.strip_modes,
            strip_resolution: e.strip_resolution,
        }
    }

    pub fn conductivity_params(&self) -> ConductivityParams {
        let k = &self.conductivity;
        ConductivityParams {
            lambda0: self.lambda0,
            eps: k.eps,
            ell: k.ell,
            margin: k.margin,
            r1_cut: k.r1_cut,
            perturbation: k.perturbation,
            seed: self.seed,
        }
    }

    fn model_value(&self, name: &str) -> Option<&Value> {
        match name {
            "model" => self.model.as_ref(),
            "minus" => self.minus.as_ref(),
            "plus" => self.plus.as_ref(),
            _ => None,
        }
    }

    /// Parses the named model, which the command requires.
    pub fn require_model(&self, name: &str, command: &str) -> Result<ModelSpec, CliError> {
        let path = format!("$.{name}");
        let v = self
            .model_value(name)
            .ok_or_else(|| invalid(&path, format!("required by `{command}`")))?;
        parse_model_at(v, &path).map_err(|e| match e {
            bec_core::Error::Parse(msg) => CliError::Config(msg),
            other => invalid(&path, other),
        })
    }

    pub fn require_bulk(&self, name: &str, command: &str) -> Result<BulkModel, CliError> {
        Ok(self.require_model(name, command)?.into_bulk())
    }

    /// The minus and plus bulks of an interface.
    pub fn require_pair(&self, command: &str) -> Result<(BulkModel, BulkModel), CliError> {
        Ok((self.require_bulk("minus", command)?, self.require_bulk("plus", command)?))
    }
}
