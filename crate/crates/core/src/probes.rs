//! Standard probe sets for transform comparisons.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Vec2;
use crate::transforms::ComplexPoint2;

/// Named probe presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `z, w ∈ {±2i, ±4i, ±8i}·scale`.
    Tensor,
    /// Imaginary parts `{4, 8}·scale` with real parts `{0, ±½}` times the height, both signs.
    Cone,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tensor" => Ok(Preset::Tensor),
            "cone" => Ok(Preset::Cone),
            _ => Err(Error::InvalidArgument(format!("unknown probe preset '{s}'"))),
        }
    }
}

/// Imaginary tensor grid `{±2i, ±4i, ±8i}² · scale` (36 points).
pub fn tensor(scale: f64) -> Vec<ComplexPoint2> {
    let axis: Vec<Complex64> = [2.0, 4.0, 8.0, -2.0, -4.0, -8.0]
        .iter()
        .map(|&y| Complex64::new(0.0, y * scale))
        .collect();
    let mut out = Vec::with_capacity(36);
    for &z in &axis {
        for &w in &axis {
            out.push(ComplexPoint2::new(z, w));
        }
    }
    out
}

/// Points with non-zero real parts inside `|Re| ≤ |Im|`.
pub fn cone(scale: f64) -> Vec<ComplexPoint2> {
    let mut axis = Vec::new();
    for &y in &[4.0, 8.0] {
        for &x in &[0.0, 0.5, -0.5] {
            for &sign in &[1.0, -1.0] {
                axis.push(Complex64::new(x * y * scale, sign * y * scale));
            }
        }
    }
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for &z in &axis {
        for &w in &axis {
            out.push(ComplexPoint2::new(z, w));
        }
    }
    out
}

pub fn preset(p: Preset, scale: f64) -> Vec<ComplexPoint2> {
    match p {
        Preset::Tensor => tensor(scale),
        Preset::Cone => cone(scale),
    }
}

/// Frequencies for characteristic-function comparisons.
pub fn frequencies(scale: f64) -> Vec<Vec2> {
    let vals = [0.25, 0.5, 1.0, -0.5];
    let mut out = Vec::new();
    for &a in &vals {
        for &b in &vals {
            out.push(Vec2::new(a * scale, b * scale));
        }
    }
    out
}
