//! Named scalar fields on the ambient space, used as loads, boundary data and weights.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::TubeError;
use crate::Point;

/// `zero`, `one`, `const:c`, `x`, `y`, `z`, `r2` (`|x|²`) or `z2` (`3z² - 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarField {
    Constant(f64),
    Coordinate(usize),
    RadiusSquared,
    ZonalQuadratic,
}

impl ScalarField {
    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Coordinate(a) => x[*a],
            ScalarField::RadiusSquared => x.norm_squared(),
            ScalarField::ZonalQuadratic => 3.0 * x[2] * x[2] - 1.0,
        }
    }

    pub fn gradient(&self, x: &Point) -> Point {
        match self {
            ScalarField::Constant(_) => Point::zeros(),
            ScalarField::Coordinate(a) => {
                let mut g = Point::zeros();
                g[*a] = 1.0;
                g
            }
            ScalarField::RadiusSquared => x * 2.0,
            ScalarField::ZonalQuadratic => Point::new(0.0, 0.0, 6.0 * x[2]),
        }
    }

    /// Ambient Laplacian in dimension `dim`.
    pub fn laplacian(&self, dim: usize) -> f64 {
        match self {
            ScalarField::Constant(_) | ScalarField::Coordinate(_) => 0.0,
            ScalarField::RadiusSquared => 2.0 * dim as f64,
            ScalarField::ZonalQuadratic => 6.0,
        }
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) if *c == 0.0 => write!(f, "zero"),
            ScalarField::Constant(c) if *c == 1.0 => write!(f, "one"),
            ScalarField::Constant(c) => write!(f, "const:{c}"),
            ScalarField::Coordinate(a) => write!(f, "{}", ["x", "y", "z"][*a]),
            ScalarField::RadiusSquared => write!(f, "r2"),
            ScalarField::ZonalQuadratic => write!(f, "z2"),
        }
    }
}

impl FromStr for ScalarField {
    type Err = TubeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "zero" => ScalarField::Constant(0.0),
            "one" => ScalarField::Constant(1.0),
            "x" => ScalarField::Coordinate(0),
            "y" => ScalarField::Coordinate(1),
            "z" => ScalarField::Coordinate(2),
            "r2" => ScalarField::RadiusSquared,
            "z2" => ScalarField::ZonalQuadratic,
            other => match other.strip_prefix("const:").map(str::parse::<f64>) {
                Some(Ok(c)) if c.is_finite() => ScalarField::Constant(c),
                _ => return Err(TubeError::InvalidInput(format!("unknown scalar field '{other}'"))),
            },
        })
    }
}

impl Serialize for ScalarField {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScalarField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
