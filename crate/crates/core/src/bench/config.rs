use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CpdError, Result};
use crate::integrators::solver::MAX_STEPS;
use crate::integrators::Method;
use crate::problems::{problem_by_name, Problem};
use crate::reference::MIN_REFERENCE_TOL;
use crate::tau::DEFAULT_N_TAU;
use crate::twoscale::InitVariant;

/// Parses "0.125", "1/8", "2^-3" or "2**-3".
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || CpdError::Config(format!("cannot parse number '{s}'"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let value = if let Some((base, exp)) = s.split_once("**").or_else(|| s.split_once('^')) {
        num(base)?.powf(num(exp)?)
    } else if let Some((a, b)) = s.split_once('/') {
        num(a)? / num(b)?
    } else {
        num(s)?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

/// Comma-separated list of [`parse_number`] values.
pub fn parse_number_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_number)
        .collect()
}

/// Powers 2^-lo ... 2^-hi.
pub fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

/// A number written either as a TOML number or as a string like "2^-3".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberSpec {
    Value(f64),
    Text(String),
}

impl NumberSpec {
    pub fn value(&self) -> Result<f64> {
        match self {
            NumberSpec::Value(v) => Ok(*v),
            NumberSpec::Text(s) => parse_number(s),
        }
    }
}

/// Parameters of a convergence study. Keys of the config file mirror the
/// field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub problem: String,
    pub methods: Vec<String>,
    #[serde(alias = "h")]
    pub h_list: Vec<NumberSpec>,
    /// Defaults to 2^-1..2^-6 for planar problems, 2^-3..2^-8 for spatial ones.
    #[serde(alias = "eps")]
    pub eps_list: Option<Vec<NumberSpec>>,
    #[serde(alias = "ntau")]
    pub n_tau: usize,
    #[serde(alias = "tend")]
    pub t_end: f64,
    pub init_order: Option<usize>,
    /// "literal" or "lagged".
    pub init_variant: String,
    pub ref_tol: f64,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// When false, wall_seconds is written as 0 so output is reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            problem: "paper-2d".into(),
            methods: ["eo2", "io2", "eo4", "io4"].map(String::from).to_vec(),
            h_list: dyadic(1, 6).into_iter().map(NumberSpec::Value).collect(),
            eps_list: None,
            n_tau: DEFAULT_N_TAU,
            t_end: 1.0,
            init_order: None,
            init_variant: "literal".into(),
            ref_tol: 1e-12,
            out: None,
            jobs: None,
            record_timing: true,
        }
    }
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CpdError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn problem(&self) -> Result<Problem> {
        problem_by_name(&self.problem)
    }

    pub fn method_list(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn h_values(&self) -> Result<Vec<f64>> {
        self.h_list.iter().map(NumberSpec::value).collect()
    }

    pub fn eps_values(&self) -> Result<Vec<f64>> {
        match &self.eps_list {
            Some(list) => list.iter().map(NumberSpec::value).collect(),
            None => Ok(match self.problem()?.dim() {
                2 => dyadic(1, 6),
                _ => dyadic(3, 8),
            }),
        }
    }

    pub fn variant(&self) -> Result<InitVariant> {
        match self.init_variant.as_str() {
            "literal" => Ok(InitVariant::Literal),
            "lagged" => Ok(InitVariant::Lagged),
            other => Err(CpdError::Config(format!("unknown init variant '{other}'"))),
        }
    }

    /// Checks names, non-empty lists, positivity and the step-count guard.
    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        self.variant()?;
        let methods = self.method_list()?;
        let hs = self.h_values()?;
        let eps = self.eps_values()?;
        if methods.is_empty() || hs.is_empty() || eps.is_empty() {
            return Err(CpdError::Config("method, h and eps lists must be non-empty".into()));
        }
        if let Some(&h) = hs.iter().find(|&&h| !(h > 0.0)) {
            return Err(CpdError::BadStep(h));
        }
        if let Some(e) = eps.iter().find(|&&e| !(e > 0.0)) {
            return Err(CpdError::Config(format!("eps must be positive, got {e}")));
        }
        if !(self.t_end >= 0.0) {
            return Err(CpdError::Config(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        let hmin = hs.iter().copied().fold(f64::INFINITY, f64::min);
        if self.t_end / hmin > MAX_STEPS as f64 {
            return Err(CpdError::Config(format!(
                "t_end/h = {} exceeds {MAX_STEPS} steps",
                self.t_end / hmin
            )));
        }
        if self.n_tau == 0 || self.n_tau % 2 != 0 {
            return Err(CpdError::BadGrid(self.n_tau));
        }
        if !(self.ref_tol >= MIN_REFERENCE_TOL) {
            return Err(CpdError::Config(format!(
                "reference tolerance {:e} is below {MIN_REFERENCE_TOL:e}",
                self.ref_tol
            )));
        }
        if self.jobs == Some(0) {
            return Err(CpdError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_forms() {
        assert_eq!(parse_number("2^-3").unwrap(), 0.125);
        assert_eq!(parse_number("2**-3").unwrap(), 0.125);
        assert_eq!(parse_number("1/8").unwrap(), 0.125);
        assert_eq!(parse_number(" 0.125 ").unwrap(), 0.125);
        assert!(parse_number("abc").is_err());
        assert!(parse_number("1/0").is_err());
        assert_eq!(parse_number_list("2^-1, 1/4,0.125").unwrap(), vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn defaults_follow_problem() {
        let c = StudyConfig::default();
        assert_eq!(c.h_values().unwrap(), dyadic(1, 6));
        assert_eq!(c.eps_values().unwrap(), dyadic(1, 6));
        let c3 = StudyConfig {
            problem: "paper-3d".into(),
            ..StudyConfig::default()
        };
        assert_eq!(c3.eps_values().unwrap(), dyadic(3, 8));
        c3.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = StudyConfig::from_toml_str(
            r#"
            problem = "paper-3d"
            methods = ["eo4", "boris"]
            h_list = ["2^-2", 0.0625]
            eps = ["1/8"]
            ntau = 32
            tend = 0.5
            "#,
        )
        .unwrap();
        assert_eq!(c.h_values().unwrap(), vec![0.25, 0.0625]);
        assert_eq!(c.eps_values().unwrap(), vec![0.125]);
        assert_eq!(c.n_tau, 32);
        assert_eq!(c.t_end, 0.5);
        assert!(StudyConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn validation_errors() {
        let bad = StudyConfig {
            methods: vec!["rk45".into()],
            ..StudyConfig::default()
        };
        assert!(matches!(bad.validate(), Err(CpdError::UnknownMethod(_))));
        let bad = StudyConfig {
            h_list: vec![],
            ..StudyConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = StudyConfig {
            h_list: vec![NumberSpec::Value(1e-8)],
            ..StudyConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = StudyConfig {
            n_tau: 33,
            ..StudyConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
