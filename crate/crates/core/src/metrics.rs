//! Speaker distance metrics over duration profiles. All metrics are
//! distances: smaller means more similar.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::mean_center;

/// Relative size below which a normalized vector counts as zero.
const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Cosine distance between normalized mean-duration vectors.
    Rho1,
    /// One minus the mean per-class duration ratio.
    Rho2,
    /// Ratio distance between mean speech rates.
    Rate,
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rho1" => Ok(MetricKind::Rho1),
            "rho2" => Ok(MetricKind::Rho2),
            "rate" => Ok(MetricKind::Rate),
            _ => Err(Error::invalid(format!(
                "metric must be rho1, rho2 or rate, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Rho1 => "rho1",
            MetricKind::Rho2 => "rho2",
            MetricKind::Rate => "rate",
        })
    }
}

/// Vector normalization applied before the cosine in [`rho1`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    Center,
    DivideByMean,
    None,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(Normalization::Center),
            "divide-by-mean" => Ok(Normalization::DivideByMean),
            "none" => Ok(Normalization::None),
            _ => Err(Error::invalid(format!(
                "norm must be center, divide-by-mean or none, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Center => "center",
            Normalization::DivideByMean => "divide-by-mean",
            Normalization::None => "none",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub kind: MetricKind,
    pub norm: Normalization,
    pub min_instances: u32,
}

impl MetricConfig {
    pub fn new(kind: MetricKind) -> Self {
        MetricConfig {
            kind,
            norm: Normalization::Center,
            min_instances: 1,
        }
    }

    pub fn with_min_instances(self, min_instances: u32) -> Self {
        MetricConfig {
            min_instances,
            ..self
        }
    }
}

pub fn normalize(mu: &[f64], norm: Normalization) -> Vec<f64> {
    match norm {
        Normalization::Center => mean_center(mu),
        Normalization::DivideByMean => {
            let mean = mu.iter().sum::<f64>() / mu.len() as f64;
            mu.iter().map(|v| v / mean).collect()
        }
        Normalization::None => mu.to_vec(),
    }
}

/// A normalized vector with its Euclidean norm, ready for repeated cosine evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct CosineOperand {
    v: Vec<f64>,
    norm: f64,
}

impl CosineOperand {
    pub fn new(mu: &[f64], norm: Normalization) -> Result<Self> {
        let scale = mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let v = normalize(mu, norm);
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !peak.is_finite() || peak <= DEGENERATE_EPS * scale {
            return Err(Error::DegenerateProfile);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(CosineOperand { v, norm })
    }

    /// `1 - cos`, clamped to [0, 2].
    pub fn distance(&self, other: &CosineOperand) -> Result<f64> {
        if self.v.len() != other.v.len() {
            return Err(Error::LengthMismatch(self.v.len(), other.v.len()));
        }
        let dot: f64 = self.v.iter().zip(&other.v).map(|(a, b)| a * b).sum();
        let cos = dot / (self.norm * other.norm);
        Ok((1.0 - cos).clamp(0.0, 2.0))
    }
}

pub fn rho1(mu_i: &[f64], mu_j: &[f64], norm: Normalization) -> Result<f64> {
    if mu_i.len() != mu_j.len() {
        return Err(Error::LengthMismatch(mu_i.len(), mu_j.len()));
    }
    CosineOperand::new(mu_i, norm)?.distance(&CosineOperand::new(mu_j, norm)?)
}

fn check_positive(v: &[f64]) -> Result<()> {
    match v.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        Some(index) => Err(Error::NonPositive {
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}

/// `1 - min(a/b, b/a)`, written as `|a - b| / max(a, b)` so equal inputs give exactly 0.
#[inline]
fn ratio_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.max(b)
}

pub fn rho2(mu_i: &[f64], mu_j: &[f64]) -> Result<f64> {
    if mu_i.len() != mu_j.len() {
        return Err(Error::LengthMismatch(mu_i.len(), mu_j.len()));
    }
    if mu_i.is_empty() {
        return Err(Error::invalid("empty profile"));
    }
    check_positive(mu_i)?;
    check_positive(mu_j)?;
    let gap: f64 = mu_i.iter().zip(mu_j).map(|(&a, &b)| ratio_gap(a, b)).sum();
    Ok(gap / mu_i.len() as f64)
}

pub fn rate_distance(rate_i: f64, rate_j: f64) -> Result<f64> {
    check_positive(&[rate_i, rate_j])?;
    Ok(ratio_gap(rate_i, rate_j))
}
