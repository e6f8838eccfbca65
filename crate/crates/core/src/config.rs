//! TOML scenario files and the bundled scenario library.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::beam::BeamParams;
use crate::error::{CgoError, Result};
use crate::geometry::{Component, ConstantAmplitude, InitialData, PolynomialPhase, ReferenceSet};
use crate::linalg::{CMatrix, CVector, C64};
use crate::system::{ConstantCoefficients, Domain, SampleGrid, SystemSpec, Tolerances};
use crate::verify::SweepParams;

/// Complex matrix as separate real and imaginary row lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixConfig {
    pub fn to_matrix(&self, field: &str) -> Result<CMatrix> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        let im = self.im.clone().unwrap_or_else(|| vec![vec![0.0; cols]; rows]);
        if rows == 0 || self.re.iter().any(|r| r.len() != cols) || im.len() != rows || im.iter().any(|r| r.len() != cols) {
            return Err(CgoError::Config(format!("{field}: matrix rows must be non-empty and of equal length")));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| C64::new(self.re[i][j], im[i][j])))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorConfig {
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl VectorConfig {
    pub fn to_vector(&self, field: &str) -> Result<CVector> {
        let im = self.im.clone().unwrap_or_else(|| vec![0.0; self.re.len()]);
        if im.len() != self.re.len() || self.re.is_empty() {
            return Err(CgoError::Config(format!("{field}: re and im must have the same non-zero length")));
        }
        Ok(CVector::from_iterator(self.re.len(), self.re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b))))
    }
}

/// Constant coefficient tables `A_1..A_d`, `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    pub dim: usize,
    pub size: usize,
    pub a: Vec<MatrixConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixConfig>,
}

/// Exactly one of `builtin` and `custom`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomSystem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ReferenceConfig {
    Point(Vec<f64>),
    Segment {
        x0: Vec<f64>,
        direction: Vec<f64>,
        half_length: f64,
        samples: usize,
    },
}

/// `ψ(x) = value + ⟨k, y⟩ + ½ yᵀHy + Σ cubic_j y_j³`, `y = x − x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub value: f64,
    pub k: Vec<f64>,
    pub hessian: MatrixConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub mode: usize,
    pub reference: ReferenceConfig,
    pub phase: PhaseConfig,
    pub amplitude: VectorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub eps: Vec<f64>,
    pub system: SystemConfig,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    pub components: Vec<ComponentConfig>,
    #[serde(default)]
    pub beam: BeamParams,
    #[serde(default)]
    pub verify: SweepParams,
    #[serde(default)]
    pub check: SampleGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// Parsed scenario with its system and initial data.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub spec: SystemSpec,
    pub initial: InitialData,
}

pub const BUNDLED: [&str; 5] = [
    "advection_exact",
    "advection_cubic_phase",
    "wave2x2_beam",
    "acoustics3_beam",
    "variable_advection",
];

/// TOML text of a bundled scenario.
pub fn bundled_source(name: &str) -> Result<&'static str> {
    Ok(match name {
        "advection_exact" => include_str!("../scenarios/advection_exact.toml"),
        "advection_cubic_phase" => include_str!("../scenarios/advection_cubic_phase.toml"),
        "wave2x2_beam" => include_str!("../scenarios/wave2x2_beam.toml"),
        "acoustics3_beam" => include_str!("../scenarios/acoustics3_beam.toml"),
        "variable_advection" => include_str!("../scenarios/variable_advection.toml"),
        other => {
            return Err(CgoError::Config(format!(
                "unknown bundled scenario '{other}' (available: {})",
                BUNDLED.join(", ")
            )))
        }
    })
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CgoError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CgoError::Config(e.to_string()))
    }

    pub fn bundled(name: &str) -> Result<Self> {
        Self::parse(bundled_source(name)?)
    }

    /// A bundled scenario name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if BUNDLED.contains(&name_or_path) {
            return Self::bundled(name_or_path);
        }
        let text = std::fs::read_to_string(name_or_path)
            .map_err(|e| CgoError::Config(format!("cannot read '{name_or_path}': {e}")))?;
        Self::parse(&text)
    }

    pub fn build_spec(&self) -> Result<SystemSpec> {
        let spec = match (&self.system.builtin, &self.system.custom) {
            (Some(name), None) => SystemSpec::builtin(name, self.domain.clone())?,
            (None, Some(c)) => {
                if c.a.len() != c.dim {
                    return Err(CgoError::Config(format!(
                        "system.custom.a: expected {} matrices, got {}",
                        c.dim,
                        c.a.len()
                    )));
                }
                let a = c
                    .a
                    .iter()
                    .enumerate()
                    .map(|(j, m)| m.to_matrix(&format!("system.custom.a[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                let b = match &c.b {
                    Some(m) => m.to_matrix("system.custom.b")?,
                    None => CMatrix::zeros(c.size, c.size),
                };
                if a.iter().chain(std::iter::once(&b)).any(|m| m.nrows() != c.size || m.ncols() != c.size) {
                    return Err(CgoError::Config(format!("system.custom: matrices must be {0}x{0}", c.size)));
                }
                SystemSpec::new(&self.name, c.dim, c.size, Arc::new(ConstantCoefficients { a, b }), self.domain.clone())?
            }
            (None, None) => return Err(CgoError::Config("system: one of `builtin` or `custom` is required".into())),
            (Some(_), Some(_)) => {
                return Err(CgoError::Config("system: `builtin` and `custom` are mutually exclusive".into()))
            }
        };
        Ok(match self.tolerances {
            Some(tol) => spec.with_tolerances(tol),
            None => spec,
        })
    }

    fn build_component(&self, idx: usize, c: &ComponentConfig, dim: usize) -> Result<Component> {
        let field = format!("components[{idx}]");
        let reference = match &c.reference {
            ReferenceConfig::Point(p) => ReferenceSet::Point(p.clone()),
            ReferenceConfig::Segment {
                x0,
                direction,
                half_length,
                samples,
            } => ReferenceSet::segment(x0, direction, *half_length, *samples)?,
        };
        let hessian = c.phase.hessian.to_matrix(&format!("{field}.phase.hessian"))?;
        let cubic = c.phase.cubic.clone().unwrap_or_else(|| vec![0.0; dim]);
        if c.phase.x0.len() != dim || c.phase.k.len() != dim || cubic.len() != dim || hessian.shape() != (dim, dim) {
            return Err(CgoError::Config(format!("{field}.phase: sizes must match the dimension {dim}")));
        }
        Ok(Component {
            mode: c.mode,
            reference,
            phase: Arc::new(PolynomialPhase {
                x0: c.phase.x0.clone(),
                value: c.phase.value,
                k: c.phase.k.clone(),
                hessian,
                cubic,
            }),
            amplitude: Arc::new(ConstantAmplitude(c.amplitude.to_vector(&format!("{field}.amplitude"))?)),
        })
    }

    pub fn build(&self) -> Result<Scenario> {
        let spec = self.build_spec()?;
        if self.components.is_empty() {
            return Err(CgoError::Config("components: at least one component is required".into()));
        }
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| self.build_component(i, c, spec.dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            config: self.clone(),
            spec,
            initial: InitialData { components },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_round_trip() {
        for name in BUNDLED {
            let cfg = ScenarioConfig::bundled(name).unwrap();
            assert_eq!(cfg.name, name);
            let text = cfg.to_toml().unwrap();
            assert_eq!(ScenarioConfig::parse(&text).unwrap(), cfg, "{name}");
            let sc = cfg.build().unwrap();
            for c in &sc.initial.components {
                c.validate(&sc.spec).unwrap();
            }
        }
    }

    #[test]
    fn missing_system_reports_the_field() {
        let text = bundled_source("advection_exact").unwrap().replace("[system]\nbuiltin = \"advection\"\n", "");
        let err = ScenarioConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("system") && msg.contains("line"), "{msg}");
        let mut cfg = ScenarioConfig::bundled("advection_exact").unwrap();
        cfg.system.builtin = None;
        assert!(cfg.build().unwrap_err().to_string().contains("system"));
    }

    #[test]
    fn unknown_builtin_is_a_config_error() {
        let mut cfg = ScenarioConfig::bundled("advection_exact").unwrap();
        cfg.system.builtin = Some("maxwell".into());
        assert!(cfg.build().unwrap_err().is_config());
    }

    #[test]
    fn custom_tables_build() {
        let mut cfg = ScenarioConfig::bundled("wave2x2_beam").unwrap();
        cfg.system = SystemConfig {
            builtin: None,
            custom: Some(CustomSystem {
                dim: 1,
                size: 2,
                a: vec![MatrixConfig {
                    re: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
                    im: None,
                }],
                b: None,
            }),
        };
        let sc = cfg.build().unwrap();
        assert_eq!(sc.spec.a(0.0, &[0.3], 0)[(0, 1)], C64::from(1.0));
    }
}
