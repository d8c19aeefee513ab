//! Rule definitions read from `key = value` files:
//!
//! ```text
//! family = symmetric      # or asymmetric
//! coeffs = 1, 0, 0        # polynomial in t, constant term first
//! offset = 0.25           # asymmetric only
//! ```
//!
//! For the symmetric family the polynomial is the weight `m(t)`; for the
//! asymmetric family it is `f'(t)`.

use std::path::Path;

use sac_core::scoring::{
    build_asymmetric_family, build_symmetric_family, ScoringRule, SymmetricWeight,
    DEFAULT_QUAD_POINTS,
};
use sac_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Symmetric { coeffs: Vec<f64> },
    Asymmetric { coeffs: Vec<f64>, offset: f64 },
}

fn poly(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn describe(coeffs: &[f64]) -> String {
    let terms: Vec<String> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| match i {
            0 => format!("{c}"),
            1 => format!("{c}t"),
            _ => format!("{c}t^{i}"),
        })
        .collect();
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

impl WeightSpec {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let (mut family, mut coeffs, mut offset) = (None, None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(path, line, "expected `key = value`"))?;
            let value = value.trim();
            match key.trim() {
                "family" => family = Some(value.to_string()),
                "coeffs" => {
                    let parsed: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(|c| c.trim().parse::<f64>()).collect();
                    coeffs = Some(parsed.map_err(|_| {
                        Error::parse(path, line, format!("coefficients must be numbers: `{value}`"))
                    })?);
                }
                "offset" => {
                    offset = Some(value.parse::<f64>().map_err(|_| {
                        Error::parse(path, line, format!("offset must be a number: `{value}`"))
                    })?)
                }
                other => return Err(Error::parse(path, line, format!("unknown key `{other}`"))),
            }
        }
        let coeffs = coeffs.ok_or_else(|| Error::parse(path, 0, "missing `coeffs`"))?;
        match family.as_deref() {
            Some("symmetric") => {
                if offset.is_some() {
                    return Err(Error::parse(path, 0, "`offset` applies to the asymmetric family only"));
                }
                Ok(WeightSpec::Symmetric { coeffs })
            }
            Some("asymmetric") => Ok(WeightSpec::Asymmetric {
                coeffs,
                offset: offset.unwrap_or(0.0),
            }),
            Some(other) => Err(Error::parse(path, 0, format!("unknown family `{other}`"))),
            None => Err(Error::parse(path, 0, "missing `family`")),
        }
    }

    pub fn build(&self) -> Result<ScoringRule> {
        match self {
            WeightSpec::Symmetric { coeffs } => {
                let c = coeffs.clone();
                let weight = SymmetricWeight::new(move |t| poly(&c, t), describe(coeffs));
                build_symmetric_family(&weight, DEFAULT_QUAD_POINTS)
            }
            WeightSpec::Asymmetric { coeffs, offset } => {
                let c = coeffs.clone();
                build_asymmetric_family(move |t| poly(&c, t), *offset, DEFAULT_QUAD_POINTS)
            }
        }
    }
}
