//! Parsers for command-line values and the flat JSON run configuration.
//!
//! Every key of [`RunConfig`] mirrors a command-line flag one-to-one
//! (`budget_draws` ↔ `--budget-draws`).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::env_field::{ConductanceLaw, Marginal};
use crate::estimator::Direction;
use crate::{Error, Result};

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{what}: cannot parse {p:?} as a number: {e}")))
        })
        .collect()
}

fn parse_marginal(s: &str) -> Result<Marginal> {
    let (kind, args) = s
        .trim()
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("law {s:?}: expected <kind>:<params>")))?;
    let params = parse_f64_list(args, "law parameters")?;
    let want = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::Parse(format!(
                "law {kind:?} takes {n} parameter(s), got {}",
                params.len()
            )))
        }
    };
    let m = match kind.trim() {
        "two_point" | "two-point" => {
            want(3)?;
            Marginal::TwoPoint { alpha: params[0], beta: params[1], prob_alpha: params[2] }
        }
        "uniform" => {
            want(2)?;
            Marginal::Uniform { alpha: params[0], beta: params[1] }
        }
        "constant" => {
            want(1)?;
            Marginal::TwoPoint { alpha: params[0], beta: params[0], prob_alpha: 1.0 }
        }
        other => return Err(Error::Parse(format!("unknown law kind {other:?}"))),
    };
    m.validate()?;
    Ok(m)
}

/// Parses `two_point:α,β,p`, `uniform:α,β` or `constant:c`. Several
/// marginals separated by `;` give one law per axis.
pub fn parse_law(s: &str) -> Result<ConductanceLaw> {
    let parts: Vec<&str> = s.split(';').collect();
    if parts.len() == 1 {
        ConductanceLaw::isotropic(parse_marginal(parts[0])?)
    } else {
        ConductanceLaw::anisotropic(parts.into_iter().map(parse_marginal).collect::<Result<_>>()?)
    }
}

/// Decimal or `0x`-prefixed hexadecimal 64-bit seed.
pub fn parse_seed(s: &str) -> Result<u64> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse::<u64>(),
    };
    parsed.map_err(|e| Error::Parse(format!("seed {s:?}: {e}")))
}

/// Comma-separated components, normalized to unit length.
pub fn parse_direction(s: &str) -> Result<Direction> {
    Direction::normalized(parse_f64_list(s, "direction")?)
}

/// Comma-separated strictly increasing positive horizons.
pub fn parse_horizons(s: &str) -> Result<Vec<u64>> {
    let hs = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("horizon {p:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    validate_horizons(&hs)?;
    Ok(hs)
}

pub fn validate_horizons(hs: &[u64]) -> Result<()> {
    if hs.is_empty() {
        return Err(Error::InvalidParameter("no horizons given".into()));
    }
    if hs[0] == 0 {
        return Err(Error::InvalidParameter("horizons must be positive".into()));
    }
    if hs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(format!("horizons {hs:?} must be strictly increasing")));
    }
    Ok(())
}

/// A law given either as flag text or as a `{kind, alpha, beta, prob_alpha}` object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LawSpec {
    Text(String),
    Object(ConductanceLaw),
}

impl LawSpec {
    pub fn resolve(&self) -> Result<ConductanceLaw> {
        match self {
            LawSpec::Text(s) => parse_law(s),
            LawSpec::Object(law) => {
                law.validate()?;
                Ok(law.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Number(u64),
    Text(String),
}

impl SeedSpec {
    pub fn resolve(&self) -> Result<u64> {
        match self {
            SeedSpec::Number(n) => Ok(*n),
            SeedSpec::Text(s) => parse_seed(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HorizonSpec {
    One(u64),
    Many(Vec<u64>),
    Text(String),
}

impl HorizonSpec {
    pub fn resolve(&self) -> Result<Vec<u64>> {
        let hs = match self {
            HorizonSpec::One(t) => vec![*t],
            HorizonSpec::Many(v) => v.clone(),
            HorizonSpec::Text(s) => return parse_horizons(s),
        };
        validate_horizons(&hs)?;
        Ok(hs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionSpec {
    Components(Vec<f64>),
    Text(String),
}

impl DirectionSpec {
    pub fn resolve(&self) -> Result<Direction> {
        match self {
            DirectionSpec::Components(v) => Direction::normalized(v.clone()),
            DirectionSpec::Text(s) => parse_direction(s),
        }
    }
}

/// Flat run configuration; absent keys fall back to defaults at resolution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<HorizonSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<DirectionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<SeedSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_draws: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table1: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `self` with every key set in `flags` replaced by the flag value.
    pub fn overridden_by(self, flags: RunConfig) -> RunConfig {
        RunConfig {
            law: flags.law.or(self.law),
            d: flags.d.or(self.d),
            t: flags.t.or(self.t),
            n: flags.n.or(self.n),
            k: flags.k.or(self.k),
            xi: flags.xi.or(self.xi),
            seed: flags.seed.or(self.seed),
            workers: flags.workers.or(self.workers),
            budget_draws: flags.budget_draws.or(self.budget_draws),
            out_dir: flags.out_dir.or(self.out_dir),
            scale: flags.scale.or(self.scale),
            table1: flags.table1.or(self.table1),
            repetitions: flags.repetitions.or(self.repetitions),
            lambda: flags.lambda.or(self.lambda),
            process: flags.process.or(self.process),
        }
    }
}
