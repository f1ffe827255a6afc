//! Run configuration: flat `key = value` files, overridable key by key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mms::{MmsConfig, PressureCase};
use crate::nfunc::{ExponentField, StressParams};
use crate::quadrature::SUPPORTED_DEGREES;
use crate::stepper::NewtonSettings;

/// Deepest supported refinement level.
pub const MAX_LEVEL: usize = 7;

/// Output encoding of a report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
    Md,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "md" | "markdown" => Ok(OutputFormat::Md),
            other => Err(Error::Config(format!("unknown output format '{other}' (csv|json|md)"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Md => "md",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    pub format: OutputFormat,
    /// `None` writes to standard output.
    pub path: Option<PathBuf>,
}

/// All scalars defining one convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub p_minus: f64,
    /// Defaults to `p_minus + 1`.
    pub p_plus: Option<f64>,
    pub alpha: f64,
    /// Defaults to `alpha`.
    pub beta: Option<f64>,
    /// Defaults to `alpha`.
    pub gamma: Option<f64>,
    pub case: PressureCase,
    pub delta: f64,
    pub nu0: f64,
    pub final_time: f64,
    pub max_level: usize,
    pub quad_degree_assembly: usize,
    pub quad_degree_error: usize,
    pub newton: NewtonSettings,
    pub output: OutputSettings,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            p_minus: 2.0,
            p_plus: None,
            alpha: 1.0,
            beta: None,
            gamma: None,
            case: PressureCase::One,
            delta: 1e-4,
            nu0: 1.0,
            final_time: 0.1,
            max_level: 4,
            quad_degree_assembly: 6,
            quad_degree_error: 8,
            newton: NewtonSettings::default(),
            output: OutputSettings::default(),
            seed: 0x5eed,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

/// Canonical key spelling: lowercase with underscores.
pub fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase()
}

/// Splits a `key = value` text into pairs, skipping blank lines and `#` comments.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{raw}'", i + 1)))?;
        out.push((normalize_key(k), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Sets one key. Unknown keys are configuration errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        let k = key.as_str();
        match k {
            "p_minus" => self.p_minus = parse(k, value)?,
            "p_plus" => self.p_plus = Some(parse(k, value)?),
            "alpha" => self.alpha = parse(k, value)?,
            "beta" => self.beta = Some(parse(k, value)?),
            "gamma" => self.gamma = Some(parse(k, value)?),
            "case" => self.case = PressureCase::from_index(parse(k, value)?)?,
            "delta" => self.delta = parse(k, value)?,
            "nu0" => self.nu0 = parse(k, value)?,
            "final_time" | "t" => self.final_time = parse(k, value)?,
            "max_level" => self.max_level = parse(k, value)?,
            "quad_degree_assembly" => self.quad_degree_assembly = parse(k, value)?,
            "quad_degree_error" => self.quad_degree_error = parse(k, value)?,
            "newton_max_iter" => self.newton.max_iter = parse(k, value)?,
            "newton_abs_tol" => self.newton.abs_tol = parse(k, value)?,
            "newton_rel_tol" => self.newton.rel_tol = parse(k, value)?,
            "newton_max_halvings" => self.newton.max_halvings = parse(k, value)?,
            "format" => self.output.format = value.parse()?,
            "out" | "path" => self.output.path = Some(PathBuf::from(value.trim())),
            "seed" => self.seed = parse(k, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Defaults overridden by the pairs of a `key = value` text.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        Self::from_kv_str(&text)
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus.unwrap_or(self.p_minus + 1.0)
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.alpha)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_level > MAX_LEVEL {
            return Err(Error::Config(format!(
                "max_level {} exceeds the supported maximum {MAX_LEVEL}",
                self.max_level
            )));
        }
        for (name, d) in [
            ("quad_degree_assembly", self.quad_degree_assembly),
            ("quad_degree_error", self.quad_degree_error),
        ] {
            if !SUPPORTED_DEGREES.contains(&d) {
                return Err(Error::Config(format!(
                    "{name} = {d} is not one of {SUPPORTED_DEGREES:?}"
                )));
            }
        }
        let n = &self.newton;
        if n.max_iter == 0 || !(n.abs_tol > 0.0) || !(n.rel_tol >= 0.0) {
            return Err(Error::Config("Newton tolerances must be positive and max_iter >= 1".into()));
        }
        self.mms_config()?.validate()
    }

    pub fn exponent(&self) -> Result<ExponentField> {
        ExponentField::new(self.p_minus, self.p_plus(), self.alpha, self.final_time)
    }

    pub fn stress(&self) -> Result<StressParams> {
        StressParams::new(self.nu0, self.delta)
    }

    pub fn mms_config(&self) -> Result<MmsConfig> {
        let cfg = MmsConfig {
            exponent: self.exponent()?,
            stress: self.stress()?,
            beta: self.beta(),
            gamma: self.gamma(),
            case: self.case,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Short label such as `p-=2.25 alpha=0.75 case=1`.
    pub fn label(&self) -> String {
        format!("p-={} alpha={} case={}", self.p_minus, self.alpha, self.case.index())
    }
}

/// A grid of studies: every combination of the listed `p_minus`, `alpha`
/// and case values on top of a base configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub p_minus: Vec<f64>,
    pub alpha: Vec<f64>,
    pub cases: Vec<PressureCase>,
    pub base: ExperimentConfig,
}

impl Default for MatrixSpec {
    /// The full published grid.
    fn default() -> Self {
        MatrixSpec {
            p_minus: vec![1.5, 1.75, 2.0, 2.25, 2.5],
            alpha: vec![1.0, 0.75, 0.5],
            cases: vec![PressureCase::One, PressureCase::Two],
            base: ExperimentConfig::default(),
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl MatrixSpec {
    /// `p_minus`, `alpha` and `case` take comma-separated lists; every other
    /// key goes to the base configuration.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut spec = MatrixSpec::default();
        for (k, v) in parse_pairs(text)? {
            match k.as_str() {
                "p_minus" => spec.p_minus = parse_list(&k, &v)?,
                "alpha" => spec.alpha = parse_list(&k, &v)?,
                "case" => {
                    spec.cases = parse_list::<u32>(&k, &v)?
                        .into_iter()
                        .map(PressureCase::from_index)
                        .collect::<Result<_>>()?
                }
                _ => spec.base.set(&k, &v)?,
            }
        }
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read matrix '{}': {e}", path.display())))?;
        Self::from_kv_str(&text)
    }

    /// Valid cells in (case, alpha, p_minus) order, and the skipped ones with a reason.
    pub fn cells(&self) -> (Vec<ExperimentConfig>, Vec<(ExperimentConfig, String)>) {
        let mut ok = Vec::new();
        let mut skipped = Vec::new();
        for &case in &self.cases {
            for &alpha in &self.alpha {
                for &p_minus in &self.p_minus {
                    let cfg = ExperimentConfig {
                        p_minus,
                        alpha,
                        case,
                        ..self.base.clone()
                    };
                    match cfg.validate() {
                        Ok(()) => ok.push(cfg),
                        Err(e) => skipped.push((cfg, e.to_string())),
                    }
                }
            }
        }
        (ok, skipped)
    }
}
