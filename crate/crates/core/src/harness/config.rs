//! Run configuration: a flat TOML document.
//!
//! ```toml
//! n_points = 256
//! side = "80pi"          # a number, or "<k>pi"
//! epsilon = 0.05
//! dt = 0.05
//! t_end = 10.0         # optional, defaults to 10
//! ```
//!
//! Every other key has a default; see [`RunConfig`].

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::HarnessError;
use crate::dynamics::Model;
use crate::grid::Grid;
use crate::initial::{ConeSpec, PerturbationSeeds};
use crate::integrator::{Formulation, StepperConfig, DEFAULT_BLOWUP_THRESHOLD};

/// How the linear data are scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeMode {
    /// `(1/eps)(log log 1/eps)^{1/2}`.
    #[default]
    Remark11,
    /// The `amplitude` key.
    Explicit,
}

/// Torus side length; accepts a number or a string such as `"80pi"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Side(pub f64);

impl Side {
    pub fn parse(text: &str) -> Option<f64> {
        let t = text.trim().to_ascii_lowercase();
        let (body, factor) = match t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
            Some(body) => (body.trim().trim_end_matches('*').trim(), PI),
            None => (t.as_str(), 1.0),
        };
        if body.is_empty() {
            return (factor == PI).then_some(PI);
        }
        body.parse::<f64>().ok().map(|k| k * factor)
    }
}

impl Serialize for Side {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Side {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(Side(x)),
            Raw::Int(x) => Ok(Side(x as f64)),
            Raw::Text(t) => Side::parse(&t)
                .map(Side)
                .ok_or_else(|| serde::de::Error::custom(format!("cannot read side length {t:?}"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn one() -> f64 {
    1.0
}
fn default_sample_interval() -> f64 {
    0.1
}
fn default_threshold() -> f64 {
    DEFAULT_BLOWUP_THRESHOLD
}
fn default_gamma() -> f64 {
    crate::diagnostics::DEFAULT_GAMMA
}
fn default_t_end() -> f64 {
    10.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("tcm-output")
}

/// Validated run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_points: usize,
    pub side: Side,
    pub epsilon: f64,
    #[serde(default)]
    pub amplitude_mode: AmplitudeMode,
    /// Used when `amplitude_mode = "explicit"`.
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub w_amplitude: f64,
    #[serde(default)]
    pub c_amplitude: f64,
    #[serde(default)]
    pub theta_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub nu: f64,
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    /// Constant in the smallness condition reported on every row.
    #[serde(default = "one")]
    pub c_for_condition: f64,
    /// Constant for the Gronwall verdict.
    #[serde(default = "one")]
    pub c_fit: f64,
    /// Weight of the crossing term in the equivalence check.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default)]
    pub model: Model,
    /// Output directory; relative paths are taken from the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Minimal configuration with defaults for every optional key.
    pub fn new(n_points: usize, side: f64, epsilon: f64, dt: f64, t_end: f64) -> Self {
        Self {
            n_points,
            side: Side(side),
            epsilon,
            amplitude_mode: AmplitudeMode::default(),
            amplitude: 1.0,
            w_amplitude: 0.0,
            c_amplitude: 0.0,
            theta_amplitude: 0.0,
            seed: 0,
            mu: 1.0,
            nu: 1.0,
            dt,
            t_end,
            sample_interval: default_sample_interval(),
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            c_for_condition: 1.0,
            c_fit: 1.0,
            gamma: default_gamma(),
            formulation: Formulation::default(),
            model: Model::default(),
            output_dir: default_output_dir(),
        }
    }

    pub fn seeds(&self) -> PerturbationSeeds {
        PerturbationSeeds {
            w_amplitude: self.w_amplitude,
            c_amplitude: self.c_amplitude,
            theta_amplitude: self.theta_amplitude,
            seed: self.seed,
        }
    }

    pub fn grid(&self) -> Result<Grid, HarnessError> {
        Grid::new(self.n_points, self.side.0).map_err(|e| invalid("n_points", e))
    }

    pub fn cone(&self) -> Result<ConeSpec, HarnessError> {
        ConeSpec::new(self.epsilon).map_err(|e| invalid("epsilon", e))
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            t_end: self.t_end,
            blowup_threshold: self.blowup_threshold,
            formulation: self.formulation,
            model: self.model,
            mu: self.mu,
            nu: self.nu,
            sample_interval: self.sample_interval,
        }
    }

    /// Check every invariant; errors name the offending key.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let positive = |field: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive and finite, got {x}")))
            }
        };
        let nonnegative = |field: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(invalid(field, format!("must be finite and >= 0, got {x}")))
            }
        };
        positive("side", self.side.0)?;
        positive("epsilon", self.epsilon)?;
        if self.amplitude_mode == AmplitudeMode::Remark11 && self.epsilon >= (-1.0f64).exp() {
            return Err(invalid(
                "epsilon",
                format!("epsilon = {} must be below 1/e for the log-log amplitude", self.epsilon),
            ));
        }
        if !self.amplitude.is_finite() {
            return Err(invalid("amplitude", "must be finite"));
        }
        nonnegative("w_amplitude", self.w_amplitude)?;
        nonnegative("c_amplitude", self.c_amplitude)?;
        nonnegative("theta_amplitude", self.theta_amplitude)?;
        nonnegative("mu", self.mu)?;
        nonnegative("nu", self.nu)?;
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        if self.dt > self.t_end {
            return Err(invalid("dt", format!("dt = {} exceeds t_end = {}", self.dt, self.t_end)));
        }
        positive("sample_interval", self.sample_interval)?;
        if !(self.blowup_threshold > 0.0) {
            return Err(invalid("blowup_threshold", "must be positive"));
        }
        positive("c_for_condition", self.c_for_condition)?;
        positive("c_fit", self.c_fit)?;
        nonnegative("gamma", self.gamma)?;

        let grid = self.grid()?;
        let cone = self.cone()?;
        let dxi = grid.lattice_spacing();
        if dxi > 0.5 * self.epsilon * (1.0 + 1e-12) {
            return Err(invalid(
                "side",
                format!("2pi/side = {dxi} must not exceed epsilon/2 = {}", 0.5 * self.epsilon),
            ));
        }
        cone.check_resolved(&grid).map_err(|e| invalid("n_points", e))?;
        Ok(())
    }

    /// Same configuration with another `epsilon`.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }
}

fn invalid(field: &str, message: impl fmt::Display) -> HarnessError {
    HarnessError::Validation {
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// Name of the missing key in a serde "missing field `x`" message.
fn missing_field(message: &str) -> Option<String> {
    let start = message.find("missing field `")? + "missing field `".len();
    let end = message[start..].find('`')? + start;
    Some(message[start..end].to_string())
}

/// Parse and validate a configuration document.
pub fn parse_config_str(text: &str) -> Result<RunConfig, HarnessError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        HarnessError::Parse {
            field: missing_field(&message),
            message,
        }
    })?;
    config.validate()?;
    Ok(config)
}

/// Read, parse and validate a configuration file. Relative `output_dir`
/// values are resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = parse_config_str(&text)?;
    if config.output_dir.is_relative() {
        if let Some(dir) = path.parent() {
            config.output_dir = dir.join(&config.output_dir);
        }
    }
    Ok(config)
}

/// Serialize a configuration; [`parse_config_str`] reads it back unchanged.
pub fn emit_config(config: &RunConfig) -> Result<String, HarnessError> {
    toml::to_string(config).map_err(|e| HarnessError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n_points = 256\nside = \"80pi\"\nepsilon = 0.05\ndt = 0.05\nt_end = 10.0\n";

    #[test]
    fn side_strings() {
        assert_eq!(Side::parse("80pi"), Some(80.0 * PI));
        assert_eq!(Side::parse("80*pi"), Some(80.0 * PI));
        assert_eq!(Side::parse("80π"), Some(80.0 * PI));
        assert_eq!(Side::parse("pi"), Some(PI));
        assert_eq!(Side::parse("12.5"), Some(12.5));
        assert_eq!(Side::parse("abc"), None);
    }

    #[test]
    fn t_end_defaults_to_ten() {
        let cfg = parse_config_str("n_points = 256\nside = \"80pi\"\nepsilon = 0.05\ndt = 0.05\n").unwrap();
        assert_eq!(cfg.t_end, 10.0);
    }

    #[test]
    fn minimal_file_accepted() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.n_points, 256);
        assert_eq!(cfg.side.0, 80.0 * PI);
        assert_eq!(cfg.mu, 1.0);
        assert_eq!(cfg.formulation, Formulation::Perturbation);
        assert_eq!(cfg.amplitude_mode, AmplitudeMode::Remark11);
    }

    #[test]
    fn large_epsilon_rejected() {
        let text = "n_points = 64\nside = \"8pi\"\nepsilon = 0.5\ndt = 0.1\nt_end = 1.0\n";
        match parse_config_str(text) {
            Err(HarnessError::Validation { field, .. }) => assert_eq!(field, "epsilon"),
            other => panic!("{other:?}"),
        }
        // The same epsilon is fine with an explicit amplitude.
        let explicit = format!("{text}amplitude_mode = \"explicit\"\n");
        assert!(parse_config_str(&explicit).is_ok());
    }

    #[test]
    fn missing_dt_named() {
        let text = MINIMAL.replace("dt = 0.05\n", "");
        match parse_config_str(&text) {
            Err(HarnessError::Parse { field, .. }) => assert_eq!(field.as_deref(), Some("dt")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unresolved_and_malformed() {
        let coarse = MINIMAL.replace("\"80pi\"", "\"40pi\"");
        assert!(matches!(parse_config_str(&coarse), Err(HarnessError::Validation { field, .. }) if field == "side"));
        let small = MINIMAL.replace("256", "128");
        assert!(matches!(parse_config_str(&small), Err(HarnessError::Validation { field, .. }) if field == "n_points"));
        assert!(matches!(parse_config_str("n_points = ["), Err(HarnessError::Parse { .. })));
        let unknown = format!("{MINIMAL}colour = 3\n");
        assert!(matches!(parse_config_str(&unknown), Err(HarnessError::Parse { .. })));
    }

    #[test]
    fn emit_round_trip() {
        let mut cfg = parse_config_str(MINIMAL).unwrap();
        cfg.w_amplitude = 1e-3;
        cfg.seed = 42;
        cfg.model = Model::Linearized;
        let text = emit_config(&cfg).unwrap();
        assert_eq!(parse_config_str(&text).unwrap(), cfg);
    }
}
