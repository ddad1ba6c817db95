//! Dimension-independent view of a radial Stokes eigenmode family.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
}

impl Dimension {
    pub fn as_usize(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

/// Ball (or disk) of radius `radius` centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub radius: f64,
}

impl Geometry {
    pub fn new(radius: f64) -> Result<Geometry> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config("R", format!("radius must be positive and finite, got {radius}")));
        }
        Ok(Geometry { radius })
    }
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { radius: 1.0 }
    }
}

/// Eigenvalue, squared L2 norm and boundary coefficient of one mode.
///
/// The boundary coefficient `gamma` is defined so that
/// `int_{boundary} |d phi / d n|^2 = boundary_factor * gamma^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub index: usize,
    pub lambda: f64,
    pub norm_sq: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeTable {
    pub dimension: Dimension,
    pub radius: f64,
    pub modes: Vec<Mode>,
}

impl ModeTable {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Mode with 1-based index `n`.
    pub fn mode(&self, n: usize) -> Result<&Mode> {
        if n == 0 || n > self.modes.len() {
            return Err(Error::ModeOutOfRange {
                index: n,
                len: self.modes.len(),
            });
        }
        Ok(&self.modes[n - 1])
    }

    /// Offset `delta` in the reference eigenvalue `pi^2 / R^2 (n + delta)^2`.
    pub fn reference_offset(&self) -> f64 {
        match self.dimension {
            Dimension::Two => 0.25,
            Dimension::Three => 0.5,
        }
    }

    pub fn reference_eigenvalue(&self, n: f64) -> f64 {
        let q = (n + self.reference_offset()) * PI / self.radius;
        q * q
    }

    /// `8 pi R^2` on the sphere, `2 pi R` on the circle.
    pub fn boundary_factor(&self) -> f64 {
        let r = self.radius;
        match self.dimension {
            Dimension::Two => 2.0 * PI * r,
            Dimension::Three => 8.0 * PI * r * r,
        }
    }

    /// Constant in the split bound `int |d_n phi|^2 <= K (int f1^2 + int f2^2)`.
    ///
    /// In three dimensions the pointwise estimate `|w(n)|^2 <= 12` on the unit
    /// sphere, the area `4 pi R^2` and the factor 2 from `(f1 + f2)^2` give
    /// `96 pi R^2`; in two dimensions `|w(n)| = 1` and the length is `2 pi R`.
    pub fn split_bound_constant(&self) -> f64 {
        let r = self.radius;
        match self.dimension {
            Dimension::Two => 2.0 * 2.0 * PI * r,
            Dimension::Three => 2.0 * 12.0 * 4.0 * PI * r * r,
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }
}
