use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::Deserialize;
use thiserror::Error;

use crate::game::{default_grid, quarter_grid};
use crate::model::{parse_rational, LoanParams, ParamsError, Price, PricePath, Rational};
use crate::protocols::{parse_trace, Protocol, TimedEvent, TraceParseError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Json(serde_json::Error),
    #[error("trace line {line}, column {column}: {message}")]
    Trace { line: usize, column: usize, message: String },
    #[error("check `{check}` applies to {needs}, scenario uses {protocol}")]
    Incompatible { check: Check, needs: Protocol, protocol: Protocol },
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("{protocol} needs a non-empty price_path")]
    MissingPath { protocol: Protocol },
    #[error("params.queries = {queries} but price_path has {len} samples")]
    QueryCount { queries: u32, len: usize },
    #[error(transparent)]
    Params(#[from] ParamsError),
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        ScenarioError::Json(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    Theorem1,
    Theorem2,
    Theorem3,
    Corollary1,
    Observations,
    UtxoEquivalence,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Theorem1,
        Check::Theorem2,
        Check::Theorem3,
        Check::Corollary1,
        Check::Observations,
        Check::UtxoEquivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Theorem1 => "theorem1",
            Check::Theorem2 => "theorem2",
            Check::Theorem3 => "theorem3",
            Check::Corollary1 => "corollary1",
            Check::Observations => "observations",
            Check::UtxoEquivalence => "utxo_equivalence",
        }
    }

    pub fn protocol(self) -> Protocol {
        match self {
            Check::Theorem1 | Check::UtxoEquivalence => Protocol::P1,
            Check::Theorem2 | Check::Observations => Protocol::P2,
            Check::Theorem3 | Check::Corollary1 => Protocol::P3,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ScenarioError::UnknownCheck(s.to_string()))
    }
}

/// Repayment amounts offered at the repay node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    #[default]
    Default,
    Quarter,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub protocol: Protocol,
    pub params: LoanParams,
    /// Oracle samples (P2) or per-round prices (P3); empty for P1.
    pub prices: Vec<Price>,
    pub grid: Vec<Rational>,
    pub trace: Option<Vec<TimedEvent>>,
    pub checks: Vec<Check>,
}

impl Scenario {
    /// The P2 oracle path: one sample per query, evenly spaced up to maturity.
    pub fn oracle_path(&self) -> PricePath {
        PricePath::evenly_spaced(self.prices.clone(), &self.params.timeline)
    }
}

struct Rat(Rational);

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map(Rat).map_err(de::Error::custom)
    }
}

struct Px(Price);

impl<'de> Deserialize<'de> for Px {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let Rat(r) = Rat::deserialize(d)?;
        Price::new(r).map(Px).map_err(de::Error::custom)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    p0: Px,
    epsilon: Rat,
    principal: Option<Rat>,
    epsilon_prime: Option<Rat>,
    delta: Option<Rat>,
    tau: Option<Px>,
    queries: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    protocol: String,
    params: RawParams,
    #[serde(default)]
    price_path: Vec<Px>,
    #[serde(default)]
    grid: GridKind,
    trace: Option<Vec<String>>,
    #[serde(default)]
    checks: Vec<String>,
}

fn parse_protocol(s: &str) -> Result<Protocol, ScenarioError> {
    match s {
        "P1" => Ok(Protocol::P1),
        "P2" => Ok(Protocol::P2),
        "P3" => Ok(Protocol::P3),
        other => Err(ScenarioError::Json(de::Error::custom(format!(
            "unknown protocol `{other}` (expected P1, P2 or P3)"
        )))),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text)?;
    let protocol = parse_protocol(&raw.protocol)?;
    let rp = raw.params;
    let mut params = LoanParams::new(rp.p0.0, rp.epsilon.0);
    if let Some(p) = rp.principal {
        params = params.with_principal(p.0);
    }
    if let Some(e) = rp.epsilon_prime {
        params = params.with_epsilon_prime(e.0);
    }
    if let Some(d) = rp.delta {
        params = params.with_delta(d.0);
    }
    if let Some(t) = rp.tau {
        params = params.with_tau(t.0);
    }
    let prices: Vec<Price> = raw.price_path.into_iter().map(|p| p.0).collect();
    if protocol != Protocol::P1 && prices.is_empty() {
        return Err(ScenarioError::MissingPath { protocol });
    }
    if protocol == Protocol::P2 {
        match rp.queries {
            Some(q) if q as usize != prices.len() => {
                return Err(ScenarioError::QueryCount { queries: q, len: prices.len() })
            }
            _ => params = params.with_queries(prices.len() as u32),
        }
    } else if let Some(q) = rp.queries {
        params = params.with_queries(q);
    }
    params.validate()?;
    let grid = match raw.grid {
        GridKind::Default => default_grid(&params),
        GridKind::Quarter => quarter_grid(&params),
    };
    let trace = match raw.trace {
        None => None,
        Some(lines) => Some(parse_trace(&lines.join("\n")).map_err(|e: TraceParseError| ScenarioError::Trace {
            line: e.line,
            column: e.column,
            message: e.message,
        })?),
    };
    let checks = raw
        .checks
        .iter()
        .map(|c| c.parse::<Check>())
        .collect::<Result<Vec<_>, _>>()?;
    validate_checks(&checks, protocol)?;
    Ok(Scenario { name: raw.name, protocol, params, prices, grid, trace, checks })
}

pub fn validate_checks(checks: &[Check], protocol: Protocol) -> Result<(), ScenarioError> {
    for &c in checks {
        if c.protocol() != protocol {
            return Err(ScenarioError::Incompatible { check: c, needs: c.protocol(), protocol });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{int, ratio};

    const P1: &str = r#"{
        "name": "p1",
        "protocol": "P1",
        "params": { "p0": "2", "epsilon": "1/10", "delta": "5" },
        "checks": ["theorem1", "utxo_equivalence"]
    }"#;

    #[test]
    fn parses_minimal_p1() {
        let s = parse_scenario(P1).unwrap();
        assert_eq!(s.protocol, Protocol::P1);
        assert_eq!(s.params.epsilon, ratio(1, 10));
        assert_eq!(s.grid, vec![int(0), int(1)]);
        assert_eq!(s.checks, vec![Check::Theorem1, Check::UtxoEquivalence]);
    }

    #[test]
    fn rejects_bad_rationals_with_position() {
        let bad = P1.replace("\"1/10\"", "\"1/0\"");
        let err = parse_scenario(&bad).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        assert!(parse_scenario(&P1.replace("\"1/10\"", "\"0.1\"")).is_err());
        assert!(parse_scenario(&P1.replace("\"1/10\"", "0.1")).is_err());
    }

    #[test]
    fn rejects_incompatible_checks() {
        let bad = P1.replace("utxo_equivalence", "theorem3");
        assert!(matches!(parse_scenario(&bad), Err(ScenarioError::Incompatible { .. })));
        let bad = P1.replace("utxo_equivalence", "theorem9");
        assert!(matches!(parse_scenario(&bad), Err(ScenarioError::UnknownCheck(_))));
    }

    #[test]
    fn p2_query_count_follows_path() {
        let s = P1.replace("\"P1\"", "\"P2\"").replace("\"checks\"", "\"price_path\": [\"2\", \"3/2\"], \"checks\"");
        let s = s.replace("\"theorem1\", \"utxo_equivalence\"", "\"theorem2\"");
        let sc = parse_scenario(&s).unwrap();
        assert_eq!(sc.params.q, 2);
        assert_eq!(sc.oracle_path().len(), 2);
        let missing = P1.replace("\"P1\"", "\"P3\"").replace("\"theorem1\", \"utxo_equivalence\"", "");
        assert!(matches!(parse_scenario(&missing), Err(ScenarioError::MissingPath { .. })));
    }

    #[test]
    fn trace_errors_carry_line() {
        let s = P1.replace("\"checks\"", "\"trace\": [\"-2 LenderDeposit 1\", \"oops\"], \"checks\"");
        match parse_scenario(&s) {
            Err(ScenarioError::Trace { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
