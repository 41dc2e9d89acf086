//! Run configuration, read from JSON and overridden by flags.

use std::path::Path;

use gaudin_core::scalar::parse_rational;
use gaudin_core::Q;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: `{value}` is not a rational of the form p/q")]
    Rational { field: &'static str, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub panels: usize,
    pub order: usize,
    pub tolerance: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig { panels: 16, order: 32, tolerance: 1e-13 }
    }
}

/// Replace one entry of the cubic tensor `t` (negative control).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Fault {
    pub t_entry: [usize; 3],
    pub value: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Levels as "p/q"; drawn from the seed when absent.
    pub levels: Option<Vec<String>>,
    pub points: Option<Vec<String>>,
    /// Dynkin pairings `<lambda_i, alpha_j^vee>` per site, for the Verma-module checks.
    pub pairings: Option<Vec<Vec<String>>>,
    pub contour: ContourConfig,
    pub seed: u64,
    /// Random draws per check family.
    pub draws: usize,
    /// Truncation depth of the Verma module.
    pub depth: i64,
    pub fault: Option<Fault>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m: 3,
            n: 2,
            levels: None,
            points: None,
            pairings: None,
            contour: ContourConfig::default(),
            seed: 0,
            draws: 1,
            depth: 1,
            fault: None,
        }
    }
}

fn rationals(field: &'static str, v: &[String]) -> Result<Vec<Q>, ConfigError> {
    v.iter()
        .map(|s| parse_rational(s).ok_or_else(|| ConfigError::Rational { field, value: s.clone() }))
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn levels_q(&self) -> Result<Option<Vec<Q>>, ConfigError> {
        self.levels.as_deref().map(|v| rationals("levels", v)).transpose()
    }

    pub fn points_q(&self) -> Result<Option<Vec<Q>>, ConfigError> {
        self.points.as_deref().map(|v| rationals("points", v)).transpose()
    }

    pub fn pairings_q(&self) -> Result<Option<Vec<Vec<Q>>>, ConfigError> {
        self.pairings
            .as_ref()
            .map(|rows| rows.iter().map(|r| rationals("pairings", r)).collect())
            .transpose()
    }

    pub fn fault_q(&self) -> Result<Option<([usize; 3], Q)>, ConfigError> {
        match &self.fault {
            None => Ok(None),
            Some(f) => {
                let v = parse_rational(&f.value)
                    .ok_or_else(|| ConfigError::Rational { field: "fault.value", value: f.value.clone() })?;
                Ok(Some((f.t_entry, v)))
            }
        }
    }

    /// Reject inconsistent settings before any check runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |s: String| Err(ConfigError::Invalid(s));
        if !(3..=6).contains(&self.m) {
            return bad(format!("M = {} is outside the supported range 3..=6", self.m));
        }
        if self.n == 0 || self.n > 4 {
            return bad(format!("N = {} is outside the supported range 1..=4", self.n));
        }
        if self.draws == 0 {
            return bad("draws must be at least 1".into());
        }
        if !(1..=3).contains(&self.depth) {
            return bad(format!("depth = {} is outside 1..=3", self.depth));
        }
        if self.contour.panels == 0 || self.contour.order < 2 || !(self.contour.tolerance > 0.0) {
            return bad("contour needs panels >= 1, order >= 2 and a positive tolerance".into());
        }
        let m = Q::from_integer((self.m as i64).into());
        if let Some(l) = self.levels_q()? {
            if l.len() != self.n {
                return bad(format!("{} levels given for N = {}", l.len(), self.n));
            }
            if l.iter().any(|k| *k == -m.clone()) {
                return bad("a level equals -M (critical level)".into());
            }
        }
        if let Some(p) = self.points_q()? {
            if p.len() != self.n {
                return bad(format!("{} points given for N = {}", p.len(), self.n));
            }
            for i in 0..p.len() {
                if p[i + 1..].contains(&p[i]) {
                    return bad(format!("marked point {} is repeated", p[i]));
                }
            }
        }
        if self.levels.is_some() != self.points.is_some() {
            return bad("levels and points must be given together".into());
        }
        if let Some(rows) = self.pairings_q()? {
            if rows.len() != self.n || rows.iter().any(|r| r.len() != self.m) {
                return bad(format!("pairings must be {} rows of {} entries", self.n, self.m));
            }
        }
        if let Some((ix, _)) = self.fault_q()? {
            let dim = self.m * self.m - 1;
            if ix.iter().any(|&i| i >= dim) {
                return bad(format!("fault index {ix:?} out of range for dimension {dim}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let c = RunConfig { levels: Some(vec!["1/2".into()]), points: Some(vec!["0".into()]), ..Default::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { levels: Some(vec!["x".into(), "1".into()]), ..Default::default() };
        assert!(matches!(c.validate(), Err(ConfigError::Rational { .. })));
        let c = RunConfig { m: 2, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c: RunConfig = serde_json::from_str(r#"{"M": 4, "levels": ["1/2", "-3"], "points": ["0", "1"]}"#).unwrap();
        assert_eq!(c.m, 4);
        assert_eq!(c.levels_q().unwrap().unwrap()[0], Q::new(1.into(), 2.into()));
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
