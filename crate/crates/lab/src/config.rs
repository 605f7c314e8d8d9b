//! Declarative scenario configuration. JSON only, no environment variables;
//! every random profile carries an explicit seed so runs are reproducible.

use serde::{Deserialize, Serialize};
use sktlab_core::fixedpoint::ModelParams;
use sktlab_core::skt::SKTParams;
use sktlab_core::{Grid, Result as CoreResult, TimeAxis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ScalarModel,
    Skt,
    DiagnosticsOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    /// Per-axis `[min, max]`, `dim` entries.
    pub extent: Vec<[f64; 2]>,
    pub cells: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> CoreResult<Grid> {
        match self.dim {
            1 => Grid::line(self.extent[0][0], self.extent[0][1], self.cells[0]),
            _ => Grid::rect(
                (self.extent[0][0], self.extent[0][1]),
                (self.extent[1][0], self.extent[1][1]),
                self.cells[0],
                self.cells[1],
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t0: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeSpec {
    pub fn build(&self) -> CoreResult<TimeAxis> {
        TimeAxis::span(self.t0, self.t_end, self.steps)
    }
}

/// Named analytic profiles for initial data and forcing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { value: f64 },
    /// Smooth cosine bump `floor + amplitude cos^2(pi |x-c| / (2 w))`
    /// supported on `|x - c| < w`.
    Bump { center: Vec<f64>, width: f64, amplitude: f64, floor: f64 },
    /// Cell-parity checkerboard `base +- amplitude`.
    Checkerboard { base: f64, amplitude: f64 },
    Linear { offset: f64, gradient: Vec<f64> },
    /// Uniform values in `[min, max)`; the seed is mandatory.
    Random { min: f64, max: f64, seed: u64 },
}

/// Diffusion coefficient of the scalar model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TensorSpec {
    Identity,
    Diagonal { xx: f64, yy: f64 },
    /// Diagonal checkerboard oscillation `(base +- amplitude) I`.
    Oscillatory { base: f64, amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub alpha: f64,
    pub lambda: f64,
    pub theta: f64,
    pub ellipticity: f64,
}

impl ModelBlock {
    pub fn build(&self) -> CoreResult<ModelParams> {
        ModelParams::new(self.alpha, self.lambda, self.theta, self.ellipticity)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SktBlock {
    pub d1: f64,
    pub d2: f64,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl SktBlock {
    pub fn build(&self) -> CoreResult<SKTParams> {
        SKTParams::new(
            self.d1, self.d2, self.a11, self.a12, self.a22, self.a1, self.a2, self.b1, self.b2,
            self.c1, self.c2,
        )
    }
}

/// Diagnostics that can be requested per scenario; each may appear once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiagnosticSpec {
    /// `L^p` norm of the solution (`u` for scalar runs).
    LpNorm { p: f64 },
    /// Energy functional and its data terms.
    Energy,
    /// Tail gradient ratio of the global estimate.
    EstimateRatio { p: f64, t_bar: f64 },
    /// Level-set distribution sum against its integral bound.
    LevelSet { delta: f64, n: f64, q: f64, j_max: usize },
    /// Pointwise domination check of the maximal function.
    MaximalCheck,
    /// BMO seminorm of the diffusion coefficient.
    BmoSeminorm { r_max: f64 },
    /// `max v / M0` for system runs.
    VMaxOverM0,
    /// `W^{1,p0}` monitor series, written as CSV.
    BlowupMonitor { p0: f64 },
    /// Mass series of `u` against the exponential growth bound.
    MassGronwall,
    /// `||grad v||_{L^p} / (1 + ||u||_{L^p})` for system runs.
    GradientRatio { p: f64 },
}

impl DiagnosticSpec {
    pub fn label(&self) -> &'static str {
        match self {
            DiagnosticSpec::LpNorm { .. } => "lp-norm",
            DiagnosticSpec::Energy => "energy",
            DiagnosticSpec::EstimateRatio { .. } => "estimate-ratio",
            DiagnosticSpec::LevelSet { .. } => "level-set",
            DiagnosticSpec::MaximalCheck => "maximal-check",
            DiagnosticSpec::BmoSeminorm { .. } => "bmo-seminorm",
            DiagnosticSpec::VMaxOverM0 => "v-max-over-m0",
            DiagnosticSpec::BlowupMonitor { .. } => "blowup-monitor",
            DiagnosticSpec::MassGronwall => "mass-gronwall",
            DiagnosticSpec::GradientRatio { .. } => "gradient-ratio",
        }
    }
}

/// Fixed-point iteration knobs; defaults match the solver's.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardBlock {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_l2_tolerance")]
    pub l2_tolerance: f64,
    #[serde(default = "default_relaxation")]
    pub relaxation: f64,
}

fn default_max_iterations() -> usize {
    200
}

fn default_l2_tolerance() -> f64 {
    1e-10
}

fn default_relaxation() -> f64 {
    1.0
}

impl Default for PicardBlock {
    fn default() -> Self {
        PicardBlock {
            max_iterations: default_max_iterations(),
            l2_tolerance: default_l2_tolerance(),
            relaxation: default_relaxation(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub grid: GridSpec,
    pub time: TimeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skt: Option<SktBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<TensorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<ProfileSpec>,
    /// Second-species initial datum for system runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_v: Option<ProfileSpec>,
    /// Reaction forcing `c >= 0`, constant in time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ProfileSpec>,
    /// Existing field set (sidecar path) for diagnostics-only runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticSpec>,
    /// Base seed mixed into random profiles; overridable from the CLI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Emit field snapshot files for the solution.
    #[serde(default)]
    pub emit_fields: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationError(pub String);

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid scenario: {}", self.0)
    }
}

impl std::error::Error for ValidationError {}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.dimension_mismatch() {
            return Err(ValidationError("grid dim, extent and cells disagree".into()));
        }
        match self.kind {
            ScenarioKind::ScalarModel => {
                if self.model.is_none() {
                    return Err(ValidationError("scalar-model scenario needs a model block".into()));
                }
                if self.initial.is_none() {
                    return Err(ValidationError("scalar-model scenario needs initial data".into()));
                }
            }
            ScenarioKind::Skt => {
                if self.skt.is_none() {
                    return Err(ValidationError("skt scenario needs an skt block".into()));
                }
                if self.initial.is_none() || self.initial_v.is_none() {
                    return Err(ValidationError("skt scenario needs initial and initial_v".into()));
                }
            }
            ScenarioKind::DiagnosticsOnly => {
                if self.input.is_none() {
                    return Err(ValidationError("diagnostics-only scenario needs an input".into()));
                }
            }
        }
        let mut labels: Vec<&str> = self.diagnostics.iter().map(|d| d.label()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.diagnostics.len() {
            return Err(ValidationError("duplicate diagnostics".into()));
        }
        Ok(())
    }

    fn dimension_mismatch(&self) -> bool {
        let d = self.grid.dim;
        !(1..=2).contains(&d) || self.grid.extent.len() != d || self.grid.cells.len() != d
    }

    pub fn from_json(text: &str) -> Result<Self, ValidationError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| ValidationError(format!("parse error at line {}: {}", e.line(), e)))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_scalar() -> ScenarioConfig {
        ScenarioConfig {
            kind: ScenarioKind::ScalarModel,
            name: None,
            grid: GridSpec { dim: 1, extent: vec![[0.0, 1.0]], cells: vec![16] },
            time: TimeSpec { t0: 0.0, t_end: 1.0, steps: 8 },
            model: Some(ModelBlock { alpha: 1.0, lambda: 1.0, theta: 1.0, ellipticity: 1.0 }),
            skt: None,
            coefficient: None,
            picard: None,
            initial: Some(ProfileSpec::Constant { value: 0.0 }),
            initial_v: None,
            forcing: None,
            input: None,
            diagnostics: vec![],
            seed: None,
            emit_fields: false,
        }
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = minimal_scalar();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn validation_catches_missing_blocks() {
        let mut cfg = minimal_scalar();
        cfg.model = None;
        assert!(cfg.validate().is_err());

        let mut cfg = minimal_scalar();
        cfg.kind = ScenarioKind::Skt;
        assert!(cfg.validate().is_err());

        let mut cfg = minimal_scalar();
        cfg.diagnostics = vec![DiagnosticSpec::Energy, DiagnosticSpec::Energy];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parse_error_carries_line() {
        let err = ScenarioConfig::from_json("{\n  \"kind\": ???\n}").unwrap_err();
        assert!(err.0.contains("line 2"), "{err}");
    }

    #[test]
    fn random_profile_requires_seed() {
        let json = r#"{"type":"random","min":0.0,"max":1.0}"#;
        assert!(serde_json::from_str::<ProfileSpec>(json).is_err());
    }
}
