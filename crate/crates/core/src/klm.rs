//! Keystroke-level model estimates.
//!
//! Times are held as whole hundredths of a second so sums of published task
//! times are exact.

use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A duration in hundredths of a second. May be negative as a difference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Seconds(i64);

impl Seconds {
    pub const ZERO: Seconds = Seconds(0);

    pub fn from_centis(centis: i64) -> Self {
        Seconds(centis)
    }

    pub fn centis(self) -> i64 {
        self.0
    }

    /// Rejects values that are not a whole number of hundredths.
    pub fn from_decimal(value: f64) -> Result<Self, KlmError> {
        let scaled = value * 100.0;
        let rounded = scaled.round();
        if !value.is_finite() || (scaled - rounded).abs() > 1e-6 {
            return Err(KlmError::Precision(value));
        }
        Ok(Seconds(rounded as i64))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl Add for Seconds {
    type Output = Seconds;
    fn add(self, rhs: Self) -> Self {
        Seconds(self.0 + rhs.0)
    }
}

impl Sub for Seconds {
    type Output = Seconds;
    fn sub(self, rhs: Self) -> Self {
        Seconds(self.0 - rhs.0)
    }
}

impl Sum for Seconds {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Seconds::ZERO, Add::add)
    }
}

/// At least one decimal: `18.0`, `46.6`, `0.28`.
impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let (whole, frac) = (abs / 100, abs % 100);
        if frac % 10 == 0 {
            write!(f, "{sign}{whole}.{}", frac / 10)
        } else {
            write!(f, "{sign}{whole}.{frac:02}")
        }
    }
}

impl Serialize for Seconds {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Seconds {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Seconds::from_decimal(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KlmError {
    #[error("unknown operator {0:?}")]
    UnknownOperator(String),
    #[error("{0} is not a whole number of hundredths of a second")]
    Precision(f64),
    #[error("operator times must be positive ({0} has {1})")]
    NonPositive(String, Seconds),
    #[error("fixed step times must not be negative ({0})")]
    Negative(String),
}

impl KlmError {
    pub fn name(&self) -> &'static str {
        match self {
            KlmError::UnknownOperator(_) => "unknown-operator",
            _ => "invalid-scenario",
        }
    }
}

/// Operator symbol to time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorTable(pub BTreeMap<String, Seconds>);

impl Default for OperatorTable {
    fn default() -> Self {
        let ops = [("H", 40), ("B", 20), ("P", 110), ("K", 28), ("M", 135)];
        OperatorTable(
            ops.iter()
                .map(|(s, c)| (s.to_string(), Seconds(*c)))
                .collect(),
        )
    }
}

impl OperatorTable {
    pub fn get(&self, symbol: &str) -> Option<Seconds> {
        self.0.get(symbol).copied()
    }

    /// Overrides or adds operators.
    pub fn with(mut self, symbol: &str, time: Seconds) -> Result<Self, KlmError> {
        if time <= Seconds::ZERO {
            return Err(KlmError::NonPositive(symbol.to_string(), time));
        }
        self.0.insert(symbol.to_string(), time);
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepTiming {
    Seconds(Seconds),
    Operators(Vec<(String, u32)>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KlmStep {
    pub label: String,
    #[serde(flatten)]
    pub timing: StepTiming,
}

impl KlmStep {
    pub fn fixed(label: impl Into<String>, time: Seconds) -> Self {
        Self {
            label: label.into(),
            timing: StepTiming::Seconds(time),
        }
    }

    pub fn operators(label: impl Into<String>, ops: &[(&str, u32)]) -> Self {
        Self {
            label: label.into(),
            timing: StepTiming::Operators(ops.iter().map(|(s, n)| (s.to_string(), *n)).collect()),
        }
    }

    pub fn time(&self, table: &OperatorTable) -> Result<Seconds, KlmError> {
        match &self.timing {
            StepTiming::Seconds(s) if *s < Seconds::ZERO => Err(KlmError::Negative(self.label.clone())),
            StepTiming::Seconds(s) => Ok(*s),
            StepTiming::Operators(ops) => ops
                .iter()
                .map(|(symbol, repeat)| {
                    table
                        .get(symbol)
                        .map(|t| Seconds(t.0 * i64::from(*repeat)))
                        .ok_or_else(|| KlmError::UnknownOperator(symbol.clone()))
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KlmScenario {
    pub name: String,
    pub steps: Vec<KlmStep>,
}

impl KlmScenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn estimate(scenario: &KlmScenario, table: &OperatorTable) -> Result<Seconds, KlmError> {
    scenario.steps.iter().map(|s| s.time(table)).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDelta {
    pub label: String,
    pub a: Option<Seconds>,
    pub b: Option<Seconds>,
    /// `a - b`; absent when the label occurs in only one scenario.
    pub delta: Option<Seconds>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub total_a: Seconds,
    pub total_b: Seconds,
    pub delta: Seconds,
    pub steps: Vec<StepDelta>,
}

/// Aligns steps by label (repeated labels pair up in order); steps of `b`
/// without a partner follow at the end.
pub fn compare(
    a: &KlmScenario,
    b: &KlmScenario,
    table: &OperatorTable,
) -> Result<Comparison, KlmError> {
    let times_b = b
        .steps
        .iter()
        .map(|s| s.time(table))
        .collect::<Result<Vec<_>, _>>()?;
    let mut used = vec![false; b.steps.len()];
    let mut steps = Vec::new();
    for step in &a.steps {
        let ta = step.time(table)?;
        let partner = b
            .steps
            .iter()
            .enumerate()
            .position(|(i, s)| !used[i] && s.label == step.label);
        let tb = partner.map(|i| {
            used[i] = true;
            times_b[i]
        });
        steps.push(StepDelta {
            label: step.label.clone(),
            a: Some(ta),
            b: tb,
            delta: tb.map(|tb| ta - tb),
        });
    }
    for (i, step) in b.steps.iter().enumerate().filter(|(i, _)| !used[*i]) {
        steps.push(StepDelta {
            label: step.label.clone(),
            a: None,
            b: Some(times_b[i]),
            delta: None,
        });
    }
    let total_a = estimate(a, table)?;
    let total_b: Seconds = times_b.into_iter().sum();
    Ok(Comparison {
        total_a,
        total_b,
        delta: total_a - total_b,
        steps,
    })
}
