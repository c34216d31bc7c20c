//! Flat `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bullwhip_core::model::{deadbeat_gains, VendorParams};
use bullwhip_core::sdp::SolverOptions;
use bullwhip_core::simulate::{DisturbancePolicy, PolicyKind};
use bullwhip_core::synthesis::{ExtractionMode, SearchOptions};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        msg: msg.into(),
    }
}

pub const KEYS: &[&str] = &[
    "alpha",
    "beta",
    "d_inf",
    "eps_d",
    "eps_f",
    "gamma_I",
    "gamma_P",
    "gamma_D",
    "assumption4_factor",
    "feas_tol",
    "gap_tol",
    "margin",
    "max_newton",
    "lambda_min",
    "lambda_grid",
    "extraction_mode",
    "horizon",
    "trials",
    "seed",
    "policy",
    "period",
    "init_scale",
    "alpha_list",
    "beta_list",
    "lambda_list",
    "eps_f_grid",
    "output_dir",
    "emit_svg",
    "threads",
    "timing",
    "controller",
];

/// Every setting of a run, after defaults and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub d_inf: f64,
    pub eps_d: f64,
    pub eps_f: f64,
    /// `None` selects the pole-cancelling gain for the current rates.
    pub gamma_i: Option<f64>,
    pub gamma_p: Option<f64>,
    pub gamma_d: f64,
    /// Ratio by which steady values must exceed the disturbance bounds.
    pub assumption4_factor: f64,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub margin: f64,
    pub max_newton: usize,
    pub lambda_min: f64,
    /// When set, synthesis only probes these values.
    pub lambda_grid: Option<Vec<f64>>,
    pub extraction_mode: ExtractionMode,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub policy: PolicyKind,
    pub period: usize,
    pub init_scale: f64,
    pub alpha_list: Option<Vec<f64>>,
    pub beta_list: Option<Vec<f64>>,
    pub lambda_list: Vec<f64>,
    pub eps_f_grid: Vec<f64>,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    /// 0 means one worker per available core.
    pub threads: usize,
    /// Record wall-clock solve times; off keeps outputs reproducible.
    pub timing: bool,
    /// Controller file for `simulate`; synthesized inline when absent.
    pub controller: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.1,
            d_inf: 1e5,
            eps_d: 1000.0,
            eps_f: 200.0,
            gamma_i: None,
            gamma_p: None,
            gamma_d: 3.0,
            assumption4_factor: 10.0,
            feas_tol: 1e-7,
            gap_tol: 1e-8,
            margin: 1e-7,
            max_newton: 500,
            lambda_min: 1e-3,
            lambda_grid: None,
            extraction_mode: ExtractionMode::Unscaled,
            horizon: 1000,
            trials: 100,
            seed: 0,
            policy: PolicyKind::UniformBox,
            period: 20,
            init_scale: 0.0,
            alpha_list: None,
            beta_list: None,
            lambda_list: (1..=19).map(|k| k as f64 * 0.05).collect(),
            eps_f_grid: (0..=10).map(|k| k as f64 * 100.0).collect(),
            output_dir: PathBuf::from("out"),
            emit_svg: false,
            threads: 0,
            timing: false,
            controller: None,
        }
    }
}

/// Raw `key → (line, value)` pairs in file order of first appearance.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                msg: "empty key".into(),
            });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.into()));
        }
        if out.insert(k.to_string(), (line, v.to_string())).is_some() {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("duplicate key `{k}`"),
            });
        }
    }
    Ok(out)
}

fn num(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v
        .parse()
        .map_err(|_| invalid(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse()
        .map_err(|_| invalid(key, format!("`{v}` is not a nonnegative integer")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let items: Vec<f64> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(invalid(key, "list is empty"));
    }
    Ok(items)
}

fn flag(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, format!("`{v}` is not a boolean"))),
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (key, (_, v)) in parse_pairs(text)? {
            c.set(&key, &v)?;
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_text(&text)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "alpha" => self.alpha = num(key, v)?,
            "beta" => self.beta = num(key, v)?,
            "d_inf" => self.d_inf = num(key, v)?,
            "eps_d" => self.eps_d = num(key, v)?,
            "eps_f" => self.eps_f = num(key, v)?,
            "gamma_I" => self.gamma_i = Some(num(key, v)?),
            "gamma_P" => self.gamma_p = Some(num(key, v)?),
            "gamma_D" => self.gamma_d = num(key, v)?,
            "assumption4_factor" => self.assumption4_factor = num(key, v)?,
            "feas_tol" => self.feas_tol = num(key, v)?,
            "gap_tol" => self.gap_tol = num(key, v)?,
            "margin" => self.margin = num(key, v)?,
            "max_newton" => self.max_newton = count(key, v)?,
            "lambda_min" => self.lambda_min = num(key, v)?,
            "lambda_grid" => self.lambda_grid = Some(list(key, v)?),
            "extraction_mode" => {
                self.extraction_mode = v.parse().map_err(|e: String| invalid(key, e))?
            }
            "horizon" => self.horizon = count(key, v)?,
            "trials" => self.trials = count(key, v)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| invalid(key, format!("`{v}` is not a nonnegative integer")))?
            }
            "policy" => self.policy = v.parse().map_err(|e: String| invalid(key, e))?,
            "period" => self.period = count(key, v)?,
            "init_scale" => self.init_scale = num(key, v)?,
            "alpha_list" => self.alpha_list = Some(list(key, v)?),
            "beta_list" => self.beta_list = Some(list(key, v)?),
            "lambda_list" => self.lambda_list = list(key, v)?,
            "eps_f_grid" => self.eps_f_grid = list(key, v)?,
            "output_dir" => {
                if v.is_empty() {
                    return Err(invalid(key, "empty path"));
                }
                self.output_dir = PathBuf::from(v)
            }
            "emit_svg" => self.emit_svg = flag(key, v)?,
            "threads" => self.threads = count(key, v)?,
            "timing" => self.timing = flag(key, v)?,
            "controller" => {
                self.controller = (!v.is_empty()).then(|| PathBuf::from(v));
            }
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Vendor parameters, with pole-cancelling gains filled in when unset.
    pub fn vendor(&self) -> Result<VendorParams, ConfigError> {
        let (gi, gp) = if self.alpha < 1.0 {
            deadbeat_gains(self.alpha, self.beta)
        } else {
            (f64::NAN, f64::NAN)
        };
        VendorParams::new(
            self.alpha,
            self.beta,
            self.d_inf,
            self.eps_d,
            self.eps_f,
            self.gamma_i.unwrap_or(gi),
            self.gamma_p.unwrap_or(gp),
            self.gamma_d,
        )
        .map_err(|e| invalid("vendor", e.to_string()))
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            feas_tol: self.feas_tol,
            gap_tol: self.gap_tol,
            margin: self.margin,
            max_newton: self.max_newton,
            ..SolverOptions::default()
        }
    }

    pub fn search(&self) -> SearchOptions {
        SearchOptions {
            solver: self.solver(),
            lambda_min: self.lambda_min,
            extraction_mode: self.extraction_mode,
            ..SearchOptions::default()
        }
    }

    pub fn policy(&self) -> DisturbancePolicy {
        DisturbancePolicy {
            kind: self.policy,
            seed: self.seed,
            period: self.period,
        }
    }

    pub fn alphas(&self) -> Vec<f64> {
        sorted_unique(self.alpha_list.clone().unwrap_or_else(|| vec![self.alpha]))
    }

    pub fn betas(&self) -> Vec<f64> {
        sorted_unique(self.beta_list.clone().unwrap_or_else(|| vec![self.beta]))
    }

    pub fn lambdas(&self) -> Vec<f64> {
        sorted_unique(self.lambda_list.clone())
    }

    /// Checks every setting before any work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.vendor()?;
        for (key, v) in [
            ("assumption4_factor", self.assumption4_factor),
            ("feas_tol", self.feas_tol),
            ("gap_tol", self.gap_tol),
            ("margin", self.margin),
        ] {
            if !(v > 0.0) {
                return Err(invalid(key, "must be positive"));
            }
        }
        if self.max_newton == 0 {
            return Err(invalid("max_newton", "must be at least 1"));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min <= 1.0) {
            return Err(invalid("lambda_min", "must lie in (0, 1]"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.period == 0 {
            return Err(invalid("period", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.init_scale) {
            return Err(invalid("init_scale", "must lie in [0, 1]"));
        }
        for a in self.alphas() {
            if !(0.0..1.0).contains(&a) {
                return Err(invalid("alpha_list", format!("{a} is outside [0, 1)")));
            }
        }
        for b in self.betas() {
            if !(0.0..=1.0).contains(&b) {
                return Err(invalid("beta_list", format!("{b} is outside [0, 1]")));
            }
        }
        if self.eps_f_grid.iter().any(|&e| e < 0.0) {
            return Err(invalid("eps_f_grid", "entries must be nonnegative"));
        }
        Ok(())
    }
}

/// Ascending order with exact duplicates removed.
pub fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| a.total_cmp(b).is_eq());
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let v = c.vendor().unwrap();
        assert!((v.gamma_i - 0.9).abs() < 1e-15);
        assert!((v.gamma_p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parses_comments_and_lists() {
        let c = RunConfig::from_text(
            "# vendor\nalpha = 0.5  # backlog\nbeta=0.5\n\nlambda_list = 0.3, 0.1, 0.3\npolicy = CornerBangBang\nemit_svg = true\n",
        )
        .unwrap();
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.lambdas(), vec![0.1, 0.3]);
        assert_eq!(c.policy, PolicyKind::CornerBangBang);
        assert!(c.emit_svg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            RunConfig::from_text("colour = red"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            RunConfig::from_text("alpha 0.5"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::from_text("alpha = 0.1\nalpha = 0.2"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(RunConfig::from_text("alpha = x").is_err());
        assert!(RunConfig::from_text("horizon = -1").is_err());
        assert!(RunConfig::from_text("lambda_list = ").is_err());
        assert!(RunConfig::from_text("extraction_mode = Other").is_err());
        assert!(RunConfig::from_text("alpha = 1.5").unwrap().validate().is_err());
        assert!(RunConfig::from_text("lambda_min = 0").unwrap().validate().is_err());
        assert!(RunConfig::from_text("trials = 0").unwrap().validate().is_err());
    }

    #[test]
    fn explicit_gains_override_deadbeat() {
        let c = RunConfig::from_text("gamma_I = 0\ngamma_P = 0").unwrap();
        let v = c.vendor().unwrap();
        assert_eq!((v.gamma_i, v.gamma_p), (0.0, 0.0));
    }
}
