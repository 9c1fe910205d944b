//! Experiment domain: the box of independent-variable ranges, the samples
//! placed in it, and the map into the unit hypercube where every distance
//! and kernel evaluation happens.

use serde::{Deserialize, Serialize};

use crate::error::{AredError, Result};

/// Closed value range of one independent variable, in engineering units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRange {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl VariableRange {
    pub fn new(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            low,
            high,
        }
    }

    pub fn length(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.low && value <= self.high
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite()) || self.low >= self.high {
            return Err(AredError::DegenerateRange {
                name: self.name.clone(),
                low: self.low,
                high: self.high,
            });
        }
        Ok(())
    }
}

/// Ordered independent variables plus the name of the measured response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub ivs: Vec<VariableRange>,
    pub dv_name: String,
}

impl Domain {
    /// Builds and validates a domain.
    pub fn new(ivs: Vec<VariableRange>, dv_name: impl Into<String>) -> Result<Self> {
        validate_domain(Self {
            ivs,
            dv_name: dv_name.into(),
        })
    }

    /// Convenience constructor from `(low, high)` pairs; variables are named
    /// `x0`, `x1`, ... and the response `y`.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let ivs = bounds
            .iter()
            .enumerate()
            .map(|(i, &(low, high))| VariableRange::new(format!("x{i}"), low, high))
            .collect();
        Self::new(ivs, "y")
    }

    /// Number of independent variables.
    pub fn dim(&self) -> usize {
        self.ivs.len()
    }

    /// Length of the unit-hypercube diagonal, `sqrt(n)`.
    pub fn diagonal(&self) -> f64 {
        (self.dim() as f64).sqrt()
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.len() == self.dim()
            && self
                .ivs
                .iter()
                .zip(coords)
                .all(|(range, &x)| range.contains(x))
    }

    pub fn check_point(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(AredError::DimensionMismatch {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        for (index, (range, &value)) in self.ivs.iter().zip(coords).enumerate() {
            if !range.contains(value) {
                return Err(AredError::OutOfDomain {
                    index,
                    value,
                    low: range.low,
                    high: range.high,
                });
            }
        }
        Ok(())
    }

    /// Maps in-domain coordinates into `[0, 1]^n`.
    pub fn normalize(&self, coords: &[f64]) -> Result<Vec<f64>> {
        self.check_point(coords)?;
        Ok(self.normalize_unchecked(coords))
    }

    /// Same affine map as [`Domain::normalize`] without the containment
    /// check; used for extrapolated predictions.
    pub fn normalize_unchecked(&self, coords: &[f64]) -> Vec<f64> {
        self.ivs
            .iter()
            .zip(coords)
            .map(|(range, &x)| (x - range.low) / range.length())
            .collect()
    }

    pub fn denormalize(&self, unit: &[f64]) -> Vec<f64> {
        self.ivs
            .iter()
            .zip(unit)
            .map(|(range, &u)| range.low + u * range.length())
            .collect()
    }

    /// All `2^n` corners of the box, in lexicographic order of
    /// `(low|high)` per axis with the first axis varying slowest.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                self.ivs
                    .iter()
                    .enumerate()
                    .map(|(i, range)| {
                        if mask >> (n - 1 - i) & 1 == 1 {
                            range.high
                        } else {
                            range.low
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Returns the domain iff every range is well formed.
pub fn validate_domain(domain: Domain) -> Result<Domain> {
    if domain.ivs.is_empty() {
        return Err(AredError::EmptyDomain);
    }
    for range in &domain.ivs {
        range.validate()?;
    }
    Ok(domain)
}

/// How a sample entered the archive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Initial,
    Drawn,
    Feedback,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Initial => "initial",
            Provenance::Drawn => "drawn",
            Provenance::Feedback => "feedback",
        }
    }
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One experimental condition, optionally with its measured response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub coords: Vec<f64>,
    pub value: Option<f64>,
    pub provenance: Provenance,
    pub sequence_index: usize,
}

impl Sample {
    pub fn initial(coords: Vec<f64>, value: f64) -> Self {
        Self {
            coords,
            value: Some(value),
            provenance: Provenance::Initial,
            sequence_index: 0,
        }
    }

    pub fn is_measured(&self) -> bool {
        self.value.is_some()
    }
}
