// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error-adjusted proportion bounds and their scaling through a pretraining
//! data mixture. Everything is a decimal fraction internally; percent
//! strings are converted at the edges by [`parse_fraction`] and
//! [`Bounds::percent`].

use serde::Serialize;
use thiserror::Error;

const SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MixtureError {
    #[error("proportion {0} is outside [0, 1]")]
    Proportion(f64),
    #[error("error {0} must be finite and non-negative")]
    Err(f64),
    #[error("component fraction {0} is outside [0, 1]")]
    Fraction(f64),
    #[error("mixture fractions sum to {0}, more than 1")]
    MixSum(f64),
    #[error("unknown mixture component {0:?}")]
    UnknownComponent(String),
    #[error("cannot parse {0:?} as a fraction or percentage")]
    Parse(String),
}

pub type Result<T, E = MixtureError> = std::result::Result<T, E>;

/// A classifier-derived share with a symmetric absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProportionEstimate {
    p: f64,
    err: f64,
}

impl ProportionEstimate {
    pub fn new(p: f64, err: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(MixtureError::Proportion(p));
        }
        if !err.is_finite() || err < 0.0 {
            return Err(MixtureError::Err(err));
        }
        Ok(Self { p, err })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn err(&self) -> f64 {
        self.err
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        for v in [lower, upper] {
            if !(-SLACK..=1.0 + SLACK).contains(&v) {
                return Err(MixtureError::Proportion(v));
            }
        }
        if lower > upper {
            return Err(MixtureError::Proportion(lower));
        }
        Ok(Self { lower, upper })
    }

    /// Both bounds in percent.
    pub fn percent(&self) -> (f64, f64) {
        (self.lower * 100.0, self.upper * 100.0)
    }
}

/// `[max(0, p − err), min(1, p + err)]`.
pub fn adjusted_bounds(e: &ProportionEstimate) -> Bounds {
    Bounds {
        lower: (e.p - e.err).max(0.0),
        upper: (e.p + e.err).min(1.0),
    }
}

/// Scales both bounds by a component's share of the whole mixture.
pub fn scale_by_mix(bounds: Bounds, component_fraction: f64) -> Result<Bounds> {
    if !(0.0..=1.0).contains(&component_fraction) {
        return Err(MixtureError::Fraction(component_fraction));
    }
    Ok(Bounds {
        lower: bounds.lower * component_fraction,
        upper: bounds.upper * component_fraction,
    })
}

/// Named shares of a pretraining corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PretrainMix {
    components: Vec<(String, f64)>,
}

impl PretrainMix {
    pub fn new<S: Into<String>>(components: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let components: Vec<(String, f64)> =
            components.into_iter().map(|(n, f)| (n.into(), f)).collect();
        let mut sum = 0.0;
        for (_, f) in &components {
            if !(0.0..=1.0).contains(f) {
                return Err(MixtureError::Fraction(*f));
            }
            sum += f;
        }
        if sum > 1.0 + SLACK {
            return Err(MixtureError::MixSum(sum));
        }
        Ok(Self { components })
    }

    /// Web 82%, code 4.5%, arXiv 2.5%; the remainder is unlisted.
    pub fn reference() -> Self {
        Self::new([("web", 0.82), ("code", 0.045), ("arxiv", 0.025)]).expect("valid mixture")
    }

    pub fn fraction(&self, name: &str) -> Result<f64> {
        self.components
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| *f)
            .ok_or_else(|| MixtureError::UnknownComponent(name.to_string()))
    }

    pub fn components(&self) -> &[(String, f64)] {
        &self.components
    }

    pub fn scale(&self, name: &str, bounds: Bounds) -> Result<Bounds> {
        scale_by_mix(bounds, self.fraction(name)?)
    }
}

/// Parses `"0.00849%"` as `0.0000849` and `"0.82"` as `0.82`.
pub fn parse_fraction(s: &str) -> Result<f64> {
    let t = s.trim();
    let (num, divisor) = match t.strip_suffix('%') {
        Some(n) => (n.trim(), 100.0),
        None => (t, 1.0),
    };
    let v: f64 = num.parse().map_err(|_| MixtureError::Parse(s.to_string()))?;
    if !v.is_finite() {
        return Err(MixtureError::Parse(s.to_string()));
    }
    Ok(v / divisor)
}
