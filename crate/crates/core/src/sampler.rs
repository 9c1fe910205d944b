//! Candidate generation: truncated normal draws filtered by a
//! minimum-distance constraint that relaxes as more cases are selected.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Provenance, Sample};
use crate::error::{AredError, Result};

/// Per-axis normal distribution with its truncation window (engineering units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalDrawSpec {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub truncation: Vec<(f64, f64)>,
}

impl NormalDrawSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu.len() == self.sigma.len()
            && self.mu.len() == self.truncation.len()
            && self.sigma.iter().all(|&s| s > 0.0 && s.is_finite())
            && self.truncation.iter().all(|&(lo, hi)| lo <= hi);
        if ok {
            Ok(())
        } else {
            Err(AredError::InvalidConfig(format!(
                "malformed normal draw spec {self:?}"
            )))
        }
    }
}

/// Coefficients of the distance control function `p*v + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintParams {
    pub p: f64,
    pub q: f64,
}

impl ConstraintParams {
    pub const fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p >= 0.0 && self.q > 0.0 && self.p.is_finite() && self.q.is_finite() {
            Ok(())
        } else {
            Err(AredError::InvalidConfig(format!(
                "constraint parameters need p >= 0 and q > 0, got p={} q={}",
                self.p, self.q
            )))
        }
    }

    /// Exploratory-regime defaults for a domain with `iv_count` variables.
    pub fn default_draw(iv_count: usize) -> Self {
        match iv_count {
            1 => Self::new(0.7, 10.0),
            2 => Self::new(0.4, 5.0),
            _ => {
                log::warn!(
                    "no tuned draw constraint for {iv_count} variables; using p=0.4 q=5, override explicitly"
                );
                Self::new(0.4, 5.0)
            }
        }
    }

    /// Feedback-regime defaults. For two variables the pair is `p=0.5, q=7`;
    /// the transposed `p=7, q=0.5` is available through explicit config.
    pub fn default_feedback(iv_count: usize) -> Self {
        match iv_count {
            1 => Self::new(1.5, 15.0),
            2 => Self::new(0.5, 7.0),
            _ => {
                log::warn!(
                    "no tuned feedback constraint for {iv_count} variables; using p=0.5 q=7, override explicitly"
                );
                Self::new(0.5, 7.0)
            }
        }
    }
}

/// The measured case around which feedback sampling concentrates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackCenter {
    pub coords: Vec<f64>,
    /// APE of the triggering case, percent; `None` for a zero-valued case.
    pub triggering_ape: Option<f64>,
}

/// Normal centered mid-range with `mu ± 2 sigma` spanning the whole range.
pub fn exploratory_spec(domain: &Domain) -> NormalDrawSpec {
    NormalDrawSpec {
        mu: domain.ivs.iter().map(|r| r.midpoint()).collect(),
        sigma: domain.ivs.iter().map(|r| r.length() / 4.0).collect(),
        truncation: domain.ivs.iter().map(|r| (r.low, r.high)).collect(),
    }
}

/// Normal centered on the feedback case, `sigma` = 10% of each range, truncated
/// to `mu ± 2 sigma` clipped to the domain.
pub fn feedback_spec(domain: &Domain, center: &FeedbackCenter) -> NormalDrawSpec {
    let mut spec = NormalDrawSpec {
        mu: Vec::with_capacity(domain.dim()),
        sigma: Vec::with_capacity(domain.dim()),
        truncation: Vec::with_capacity(domain.dim()),
    };
    for (range, &c) in domain.ivs.iter().zip(&center.coords) {
        let sigma = 0.10 * range.length();
        spec.mu.push(c);
        spec.sigma.push(sigma);
        spec.truncation
            .push(((c - 2.0 * sigma).max(range.low), (c + 2.0 * sigma).min(range.high)));
    }
    spec
}

/// Draws one point, each axis independently re-drawn until it lands inside
/// its truncation window.
pub fn draw_point<R: Rng + ?Sized>(
    spec: &NormalDrawSpec,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut coords = Vec::with_capacity(spec.mu.len());
    for ((&mu, &sigma), &(lo, hi)) in spec.mu.iter().zip(&spec.sigma).zip(&spec.truncation) {
        let mut accepted = None;
        for _ in 0..max_attempts {
            let z: f64 = StandardNormal.sample(rng);
            let x = mu + sigma * z;
            if x >= lo && x <= hi {
                accepted = Some(x);
                break;
            }
        }
        match accepted {
            Some(x) => coords.push(x),
            None => {
                return Err(AredError::DrawExhausted {
                    attempts: max_attempts,
                })
            }
        }
    }
    Ok(coords)
}

/// `L / (p*v + q)`.
pub fn constraint_threshold(diagonal: f64, v: usize, params: ConstraintParams) -> f64 {
    diagonal / (params.p * v as f64 + params.q)
}

/// Euclidean distance in normalized space between two engineering-unit points.
pub fn normalized_distance(domain: &Domain, a: &[f64], b: &[f64]) -> f64 {
    domain
        .ivs
        .iter()
        .zip(a.iter().zip(b))
        .map(|(range, (&x, &y))| {
            let d = (x - y) / range.length();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Distance from `candidate` to its nearest archived sample, in normalized space.
pub fn min_distance(candidate: &[f64], archive: &[Sample], domain: &Domain) -> Result<f64> {
    archive
        .iter()
        .map(|s| normalized_distance(domain, candidate, &s.coords))
        .min_by(f64::total_cmp)
        .ok_or(AredError::EmptyArchive)
}

/// Record of why a constrained draw was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAudit {
    pub distance: f64,
    pub threshold: f64,
    pub attempts: usize,
}

/// Inputs shared by the constrained draw.
#[derive(Debug, Clone, Copy)]
pub struct DrawContext<'a> {
    pub domain: &'a Domain,
    pub archive: &'a [Sample],
    pub v: usize,
    pub params: ConstraintParams,
    /// Overrides the default `sqrt(n)` domain length.
    pub diagonal: Option<f64>,
    pub max_attempts: usize,
}

/// Draws until a point is strictly farther than the threshold from every
/// archived sample.
pub fn draw_constrained<R: Rng + ?Sized>(
    spec: &NormalDrawSpec,
    ctx: &DrawContext<'_>,
    provenance: Provenance,
    rng: &mut R,
) -> Result<(Sample, ConstraintAudit)> {
    if ctx.archive.is_empty() {
        return Err(AredError::EmptyArchive);
    }
    let diagonal = ctx.diagonal.unwrap_or_else(|| ctx.domain.diagonal());
    let threshold = constraint_threshold(diagonal, ctx.v, ctx.params);
    for attempt in 1..=ctx.max_attempts {
        let coords = draw_point(spec, rng, ctx.max_attempts)?;
        let distance = min_distance(&coords, ctx.archive, ctx.domain)?;
        if distance > threshold {
            let sample = Sample {
                coords,
                value: None,
                provenance,
                sequence_index: ctx.archive.len(),
            };
            let audit = ConstraintAudit {
                distance,
                threshold,
                attempts: attempt,
            };
            return Ok((sample, audit));
        }
    }
    Err(AredError::DrawExhausted {
        attempts: ctx.max_attempts,
    })
}
