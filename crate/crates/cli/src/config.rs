use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use hierwalk::fluct::TimeShift;
use hierwalk::stepdist::LawSpec;
use serde::{Deserialize, Serialize};

/// Everything an experiment needs. Every field is optional in the file;
/// commands fill in their own defaults and flags override the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub radius: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_range: Option<MRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<TimeShift>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<StatisticKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessKind>,
    /// Variance scale of the critical limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl ExperimentConfig {
    /// Fields set in `other` replace ours.
    pub fn overlay(mut self, other: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if other.$f.is_some() {
                    self.$f = other.$f;
                }
            )*};
        }
        take!(law, seed, out, replicas, tol, n, radius, kappa, grid, m_range, lambda, shift, oracle, statistic, process, scale);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Mean,
    Variance,
    FluctCov,
    PoissonMean,
    PoissonVariance,
    PoissonFluctCov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    /// The limit with covariance `M^{R(s∧t)} g_κ(s∨t)`.
    Kappa,
    /// The critical limit.
    Critical,
    /// The rescaled limit `Y`.
    Y,
    /// The limit rebuilt from independent normals through ζ.
    Zeta,
    /// Exact covariance at finite `n`.
    FiniteN,
    Poisson,
}

/// Time grid: an explicit list or the shorthand `"a^{-m}, m=m0..m1"`, where
/// the base is either a number or the letter `a` for the law's step-ratio
/// limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Points(Vec<f64>),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridBase {
    RatioLimit,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedGrid {
    Points(Vec<f64>),
    Powers { base: GridBase, range: MRange },
}

impl ParsedGrid {
    /// The time points, given the law's ratio limit for the `a` base.
    pub fn points(&self, ratio_limit: Option<f64>) -> Result<Vec<f64>, String> {
        match self {
            ParsedGrid::Points(p) => Ok(p.clone()),
            ParsedGrid::Powers { base, range } => {
                let b = match base {
                    GridBase::Value(v) => *v,
                    GridBase::RatioLimit => ratio_limit.ok_or("grid base `a` needs a law with a step-ratio limit")?,
                };
                Ok((range.start..=range.end).map(|m| b.powf(-(m as f64))).collect())
            }
        }
    }
}

impl Grid {
    pub fn parse(&self) -> Result<ParsedGrid, String> {
        match self {
            Grid::Points(p) => Ok(ParsedGrid::Points(p.clone())),
            Grid::Text(s) => s.parse(),
        }
    }
}

impl FromStr for ParsedGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some((head, tail)) = s.split_once("^{-m}") {
            let base = match head.trim() {
                "a" => GridBase::RatioLimit,
                num => GridBase::Value(num.parse().map_err(|_| format!("bad grid base `{num}`"))?),
            };
            let range = tail
                .trim()
                .strip_prefix(',')
                .map(str::trim)
                .and_then(|r| r.strip_prefix("m"))
                .map(str::trim)
                .and_then(|r| r.strip_prefix('='))
                .ok_or_else(|| format!("grid shorthand must read `a^{{-m}}, m=m0..m1`, got `{s}`"))?;
            return Ok(ParsedGrid::Powers {
                base,
                range: range.parse()?,
            });
        }
        let points = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad grid point `{}`", p.trim())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ParsedGrid::Points(points))
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.parse::<ParsedGrid>()?;
        Ok(Grid::Text(s.to_string()))
    }
}

/// Inclusive integer range, written `m0..m1` or `[m0, m1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MRange {
    pub start: i64,
    pub end: i64,
}

impl FromStr for MRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("range must read `m0..m1`, got `{s}`"))?;
        let b = b.strip_prefix('=').unwrap_or(b);
        let start = a.trim().parse().map_err(|_| format!("bad range start `{a}`"))?;
        let end = b.trim().parse().map_err(|_| format!("bad range end `{b}`"))?;
        if start > end {
            return Err(format!("empty range {start}..{end}"));
        }
        Ok(MRange { start, end })
    }
}

impl fmt::Display for MRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl Serialize for MRange {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.start, self.end].serialize(s)
    }
}

impl<'de> Deserialize<'de> for MRange {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Pair([i64; 2]),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Pair([start, end]) if start <= end => Ok(MRange { start, end }),
            Raw::Pair([start, end]) => Err(serde::de::Error::custom(format!("empty range {start}..{end}"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shorthand() {
        let g: ParsedGrid = "a^{-m}, m=0..3".parse().unwrap();
        assert_eq!(g.points(Some(0.5)).unwrap(), vec![1.0, 2.0, 4.0, 8.0]);
        let g: ParsedGrid = "0.25^{-m}, m=-1..1".parse().unwrap();
        assert_eq!(g.points(None).unwrap(), vec![0.25, 1.0, 4.0]);
        assert!("a^{-m}, m=0..3".parse::<ParsedGrid>().unwrap().points(None).is_err());
        let g: ParsedGrid = "1, 2.5,4".parse().unwrap();
        assert_eq!(g, ParsedGrid::Points(vec![1.0, 2.5, 4.0]));
        assert!("a^{-m}, k=0..3".parse::<ParsedGrid>().is_err());
        assert!("1,x".parse::<ParsedGrid>().is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!("-5..=10".parse::<MRange>().unwrap(), MRange { start: -5, end: 10 });
        assert!("3..1".parse::<MRange>().is_err());
        let r: MRange = serde_json::from_str("[1, 4]").unwrap();
        assert_eq!(r, MRange { start: 1, end: 4 });
        let r: MRange = serde_json::from_str("\"2..6\"").unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), "[2,6]");
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok: ExperimentConfig =
            serde_json::from_str(r#"{"law":{"family":"crw","M":2,"c":1.0},"n":5,"L":30,"grid":"a^{-m}, m=0..3"}"#)
                .unwrap();
        assert_eq!(ok.radius, Some(30));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"n":5,"radius":3}"#).is_err());
        let merged = ok.clone().overlay(ExperimentConfig {
            n: Some(7),
            ..Default::default()
        });
        assert_eq!((merged.n, merged.radius), (Some(7), Some(30)));
    }
}
