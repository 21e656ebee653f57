//! Run configuration: JSON file merged with command-line overrides.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use dptqfi::lindblad::{OperatorFamily, QModel};
use dptqfi::linalg::CMatrix;
use dptqfi::models::{instantiate, BuiltinSpec};
use dptqfi::qfi::StencilConfig;
use dptqfi::{CMat, Error, Result, C64};

/// Largest normalization defect that is silently repaired.
pub const RENORMALIZE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Builtin {
        name: String,
        #[serde(default)]
        parameters: BTreeMap<String, f64>,
    },
    /// Coefficient lists of `H(g) = Σ gⁿ H_n` and `L_j(g) = Σ gⁿ L_{j,n}`.
    Explicit {
        hamiltonian: Vec<MatrixConfig>,
        jumps: Vec<Vec<MatrixConfig>>,
        #[serde(default)]
        phase_channel: Option<usize>,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Builtin { name: "blockcat".into(), parameters: BTreeMap::new() }
    }
}

/// Row-major matrix of `[re, im]` pairs.
pub type MatrixConfig = Vec<Vec<[f64; 2]>>;

fn matrix(m: &MatrixConfig) -> Result<CMat> {
    let rows: Vec<Vec<C64>> = m.iter().map(|r| r.iter().map(|&[a, b]| C64::new(a, b)).collect()).collect();
    if rows.is_empty() {
        return Err(Error::Dimension("empty matrix in model config".into()));
    }
    CMatrix::from_rows(&rows)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Lin,
    Log,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default = "default_scale")]
    pub scale: Scale,
}

fn default_scale() -> Scale {
    Scale::Lin
}

impl GridConfig {
    /// `start:stop:count[:lin|log]`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = text.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("grid {text:?} must look like start:stop:count[:lin|log]"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("grid {text:?}: {e}"));
        let count = parts[2].trim().parse::<usize>().map_err(|e| format!("grid {text:?}: {e}"))?;
        let scale = match parts.get(3).map(|s| s.trim()) {
            None | Some("lin") => Scale::Lin,
            Some("log") => Scale::Log,
            Some(other) => return Err(format!("grid scale must be lin or log, got {other:?}")),
        };
        Ok(Self { start: num(parts[0])?, stop: num(parts[1])?, count, scale })
    }

    pub fn points(&self, what: &str) -> Result<Vec<f64>> {
        let bad = |msg: String| Err(Error::InvalidParameter(format!("{what} grid: {msg}")));
        if self.count == 0 {
            return bad("grid is empty (count = 0)".into());
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || !(self.start < self.stop) {
            return bad(format!("needs finite start < stop, got {} .. {}", self.start, self.stop));
        }
        if self.scale == Scale::Log && !(self.start > 0.0) {
            return bad("log grid needs start > 0".into());
        }
        if self.count == 1 {
            return Ok(vec![self.start]);
        }
        let n = self.count - 1;
        Ok((0..self.count)
            .map(|i| {
                let f = i as f64 / n as f64;
                match self.scale {
                    Scale::Lin => self.start + (self.stop - self.start) * f,
                    Scale::Log => (self.start.ln() + (self.stop.ln() - self.start.ln()) * f).exp(),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StencilSettings {
    pub h: f64,
    pub richardson: bool,
    pub max_halvings: usize,
}

impl Default for StencilSettings {
    fn default() -> Self {
        let d = StencilConfig::default();
        Self { h: d.h, richardson: d.richardson, max_halvings: d.max_halvings }
    }
}

impl StencilSettings {
    pub fn to_config(self) -> StencilConfig {
        StencilConfig { h: self.h, richardson: self.richardson, max_halvings: self.max_halvings }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WignerConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub nq: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
    #[serde(default)]
    pub phi: f64,
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self { q_min: -4.0, q_max: 10.0, nq: 141, p_min: -5.0, p_max: 5.0, np: 101, phi: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub g: f64,
    /// Initial state as `[re, im]` pairs; builtins fall back to their default.
    pub chi: Option<Vec<[f64; 2]>>,
    pub t_grid: Option<GridConfig>,
    pub s_grid: Option<GridConfig>,
    /// Single evaluation time for commands that take one.
    pub t: Option<f64>,
    pub methods: Vec<String>,
    pub stencil: StencilSettings,
    pub seed: u64,
    pub n_traj: usize,
    pub max_order: usize,
    pub window: Option<f64>,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub steps: Vec<usize>,
    pub wigner: WignerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            g: 0.0,
            chi: None,
            t_grid: None,
            s_grid: None,
            t: None,
            methods: vec!["fd".into()],
            stencil: StencilSettings::default(),
            seed: 0,
            n_traj: 1000,
            max_order: 4,
            window: None,
            g1: None,
            g2: None,
            steps: vec![4, 8, 16],
            wigner: WignerConfig::default(),
        }
    }
}

pub struct Resolved {
    pub model: QModel,
    pub chi: Vec<C64>,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let (model, builtin) = match &self.model {
            ModelConfig::Builtin { name, parameters } => {
                let spec = BuiltinSpec { name: name.clone(), parameters: parameters.clone() };
                (instantiate(&spec)?, Some(spec.resolve()?))
            }
            ModelConfig::Explicit { hamiltonian, jumps, phase_channel } => {
                let h = OperatorFamily::new(hamiltonian.iter().map(matrix).collect::<Result<_>>()?)?;
                let js = jumps
                    .iter()
                    .map(|fam| OperatorFamily::new(fam.iter().map(matrix).collect::<Result<_>>()?))
                    .collect::<Result<Vec<_>>>()?;
                (QModel::new(h, js, *phase_channel)?, None)
            }
        };
        let mut warnings = Vec::new();
        let chi = match (&self.chi, builtin) {
            (Some(v), _) => {
                let psi: Vec<C64> = v.iter().map(|&[a, b]| C64::new(a, b)).collect();
                if psi.len() != model.dim() {
                    return Err(Error::Dimension(format!("chi has {} entries, model dimension is {}", psi.len(), model.dim())));
                }
                let n = dptqfi::linalg::norm2(&psi);
                let defect = (n - 1.0).abs();
                if defect > RENORMALIZE_TOL || !(n > 0.0) {
                    return Err(Error::InvalidParameter(format!("chi is not normalized (norm {n})")));
                }
                if defect > 0.0 {
                    warnings.push(format!("chi renormalized (norm was {n})"));
                }
                psi.into_iter().map(|z| z / n).collect()
            }
            (None, Some(b)) => b.default_chi(),
            (None, None) => return Err(Error::InvalidParameter("explicit models need chi".into())),
        };
        Ok(Resolved { model, chi, warnings })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = GridConfig::parse("1:100:3:log").unwrap();
        let p = g.points("t").unwrap();
        assert!((p[1] - 10.0).abs() < 1e-12);
        assert!(GridConfig::parse("1:100:0:log").unwrap().points("t").is_err());
        assert!(GridConfig::parse("5:1:4").unwrap().points("t").is_err());
        assert!(GridConfig::parse("1:2").is_err());
        assert_eq!(GridConfig::parse("0:1:2").unwrap().points("s").unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn explicit_model_and_renormalization() {
        let json = r#"{
            "model": {"kind": "explicit",
                      "hamiltonian": [[[[0,0],[0,0]],[[0,0],[0,0]]]],
                      "jumps": [[[[[0,0],[1,0]],[[0,0],[0,0]]]]],
                      "phase_channel": 1},
            "chi": [[0.7071068, 0], [0.7071068, 0]]
        }"#;
        let cfg = RunConfig::from_json(json).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.model.dim(), 2);
        assert_eq!(r.warnings.len(), 1);
        let bad = RunConfig { chi: Some(vec![[1.0, 0.0], [1.0, 0.0]]), ..cfg };
        assert!(bad.resolve().is_err());
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
