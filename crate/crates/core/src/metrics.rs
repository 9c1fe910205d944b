//! Error quantification and the feedback/stopping decisions built on it.

use serde::{Deserialize, Serialize};

use crate::domain::Sample;
use crate::error::{AredError, Result};
use crate::sampler::FeedbackCenter;
use crate::surrogate::SvrModel;

/// Which points an [`ErrorReport`] was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorReference {
    TrainingArchive,
    VerificationSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseError {
    pub index: usize,
    pub predicted: f64,
    pub actual: f64,
    /// Absolute percent error; `None` when the actual value is exactly zero.
    pub ape: Option<f64>,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub per_case: Vec<CaseError>,
    pub mae: f64,
    /// Mean APE over cases with a nonzero actual value; `None` if there are none.
    pub mape: Option<f64>,
    pub r: f64,
    /// Set when either series has zero variance and `r` is a placeholder.
    pub r_degenerate: bool,
    pub reference: ErrorReference,
}

/// Pearson correlation with population moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(AredError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(AredError::InsufficientData {
            needed: 2,
            have: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        // Identical series count as perfectly correlated.
        let value = if x == y { 1.0 } else { 0.0 };
        return Ok(Correlation {
            value,
            degenerate: true,
        });
    }
    let r = (cov / n) / ((vx / n).sqrt() * (vy / n).sqrt());
    Ok(Correlation {
        value: r.clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Builds a report from paired predicted/actual series.
pub fn error_report(
    predicted: &[f64],
    actual: &[f64],
    reference: ErrorReference,
) -> Result<ErrorReport> {
    if predicted.len() != actual.len() {
        return Err(AredError::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if actual.is_empty() {
        return Err(AredError::EmptyArchive);
    }
    let per_case: Vec<CaseError> = predicted
        .iter()
        .zip(actual)
        .enumerate()
        .map(|(index, (&p, &a))| {
            let abs_error = (p - a).abs();
            CaseError {
                index,
                predicted: p,
                actual: a,
                ape: (a != 0.0).then(|| ((p - a) / a).abs() * 100.0),
                abs_error,
            }
        })
        .collect();
    let mae = per_case.iter().map(|c| c.abs_error).sum::<f64>() / per_case.len() as f64;
    let apes: Vec<f64> = per_case.iter().filter_map(|c| c.ape).collect();
    let mape = (!apes.is_empty()).then(|| apes.iter().sum::<f64>() / apes.len() as f64);
    let corr = if actual.len() >= 2 {
        pearson_r(predicted, actual)?
    } else {
        Correlation {
            value: 1.0,
            degenerate: true,
        }
    };
    Ok(ErrorReport {
        per_case,
        mae,
        mape,
        r: corr.value,
        r_degenerate: corr.degenerate,
        reference,
    })
}

/// In-sample errors of `model` over measured archive samples.
pub fn case_errors(model: &SvrModel, archive: &[Sample]) -> Result<ErrorReport> {
    if archive.is_empty() {
        return Err(AredError::EmptyArchive);
    }
    let mut predicted = Vec::with_capacity(archive.len());
    let mut actual = Vec::with_capacity(archive.len());
    for (index, s) in archive.iter().enumerate() {
        let value = s.value.ok_or(AredError::UnmeasuredSample { index })?;
        predicted.push(model.predict(&s.coords));
        actual.push(value);
    }
    error_report(&predicted, &actual, ErrorReference::TrainingArchive)
}

/// Thresholds of the error-feedback trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPolicy {
    /// Feedback needs more than `base^2 + 1` measured cases.
    pub min_cases_exponent_base: usize,
    /// APE threshold, percent.
    pub ape_threshold: f64,
    /// Absolute-error threshold as a fraction of the observed response range.
    pub range_fraction: f64,
    /// Let zero-valued cases (undefined APE) trigger on absolute error alone.
    pub zero_value_abs_trigger: bool,
}

impl FeedbackPolicy {
    /// Defaults for a domain with `iv_count` variables; the exponent base is
    /// the sample-set dimension `iv_count + 1`.
    pub fn for_dimension(iv_count: usize) -> Self {
        Self {
            min_cases_exponent_base: iv_count + 1,
            ape_threshold: 10.0,
            range_fraction: 0.10,
            zero_value_abs_trigger: false,
        }
    }

    pub fn min_cases(&self) -> usize {
        self.min_cases_exponent_base * self.min_cases_exponent_base + 1
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.ape_threshold > 0.0
            && self.range_fraction > 0.0
            && self.range_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(AredError::InvalidConfig(format!(
                "feedback policy out of range: {self:?}"
            )))
        }
    }

    /// Condition (a): enough cases to trust the model.
    pub fn eligible(&self, archive_len: usize) -> bool {
        archive_len > self.min_cases()
    }
}

/// Max minus min of the measured responses.
pub fn dv_range(archive: &[Sample]) -> f64 {
    let (lo, hi) = archive
        .iter()
        .filter_map(|s| s.value)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Returns the worst qualifying case when all three trigger conditions hold.
///
/// Qualifying cases have APE above the threshold and absolute error above
/// `range_fraction * dv_range`. The winner has the largest APE, then the
/// largest absolute error, then the lowest index.
pub fn feedback_check(
    report: &ErrorReport,
    archive: &[Sample],
    policy: &FeedbackPolicy,
    dv_range: f64,
) -> Option<FeedbackCenter> {
    if !policy.eligible(archive.len()) {
        return None;
    }
    let abs_threshold = policy.range_fraction * dv_range;
    // Zero-valued cases rank below every case with a defined APE.
    let rank = |c: &CaseError| c.ape.unwrap_or(f64::NEG_INFINITY);
    report
        .per_case
        .iter()
        .filter(|c| c.abs_error > abs_threshold)
        .filter(|c| match c.ape {
            Some(ape) => ape > policy.ape_threshold,
            None => policy.zero_value_abs_trigger,
        })
        .min_by(|a, b| {
            rank(b)
                .total_cmp(&rank(a))
                .then(b.abs_error.total_cmp(&a.abs_error))
                .then(a.index.cmp(&b.index))
        })
        .map(|c| FeedbackCenter {
            coords: archive[c.index].coords.clone(),
            triggering_ape: c.ape,
        })
}

/// True iff the last `run_length` iterations all passed.
pub fn stopping_check(history: &[bool], run_length: usize) -> bool {
    run_length >= 1
        && history.len() >= run_length
        && history[history.len() - run_length..].iter().all(|&p| p)
}
