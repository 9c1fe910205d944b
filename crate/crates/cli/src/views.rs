//! JSON shapes returned by the CLI and the HTTP API.

use serde::Serialize;

use ared_core::controller::{IterationRecord, Proposal, Session, SessionStatus};
use ared_core::domain::{Domain, Provenance};
use ared_core::error::{AredError, Result};
use ared_core::sampler::FeedbackCenter;
use ared_core::surrogate::SvrHyperparams;

#[derive(Debug, Serialize)]
pub struct AuditView {
    /// Distance to the nearest archived case, normalized units.
    pub d: f64,
    pub threshold: f64,
    pub attempts: usize,
}

#[derive(Debug, Serialize)]
pub struct ProposalView {
    pub coords: Vec<f64>,
    pub predicted: Option<f64>,
    pub provenance: Provenance,
    pub sequence_index: usize,
    pub constraint: AuditView,
    pub feedback_center: Option<FeedbackCenter>,
}

impl From<&Proposal> for ProposalView {
    fn from(p: &Proposal) -> Self {
        Self {
            coords: p.sample.coords.clone(),
            predicted: p.predicted,
            provenance: p.sample.provenance,
            sequence_index: p.sample.sequence_index,
            constraint: AuditView {
                d: p.audit.distance,
                threshold: p.audit.threshold,
                attempts: p.audit.attempts,
            },
            feedback_center: p.feedback_center.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ResultView {
    pub iteration: usize,
    pub archive_size: usize,
    pub mae: f64,
    pub mape: Option<f64>,
    pub r: f64,
    pub hyperparams: SvrHyperparams,
    pub eligible: bool,
    pub passed: bool,
    pub feedback: Option<FeedbackCenter>,
    pub status: SessionStatus,
    pub converged: bool,
}

impl ResultView {
    pub fn new(record: &IterationRecord, session: &Session) -> Self {
        Self {
            iteration: record.iteration,
            archive_size: record.archive_size,
            mae: record.report.mae,
            mape: record.report.mape,
            r: record.report.r,
            hyperparams: record.hyperparams,
            eligible: record.eligible,
            passed: record.passed,
            feedback: record.feedback.clone(),
            status: session.status,
            converged: session.is_converged(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub archive_size: usize,
    pub measured: f64,
    pub predicted_before: Option<f64>,
    pub mae: f64,
    pub mape: Option<f64>,
    pub r: f64,
    pub eligible: bool,
    pub passed: bool,
    pub feedback: bool,
}

pub fn history(session: &Session) -> Vec<HistoryEntry> {
    session
        .history
        .iter()
        .map(|r| HistoryEntry {
            iteration: r.iteration,
            archive_size: r.archive_size,
            measured: r.measured,
            predicted_before: r.predicted_before,
            mae: r.report.mae,
            mape: r.report.mape,
            r: r.report.r,
            eligible: r.eligible,
            passed: r.passed,
            feedback: r.feedback.is_some(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ArchivePoint {
    pub index: usize,
    pub coords: Vec<f64>,
    pub value: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub status: SessionStatus,
    pub domain: Domain,
    pub v: usize,
    pub consecutive_passes: usize,
    pub stopping_run_length: usize,
    pub initial: usize,
    pub drawn: usize,
    pub feedback: usize,
    pub hyperparams: Option<SvrHyperparams>,
    pub feedback_center: Option<FeedbackCenter>,
    pub pending: Option<ProposalView>,
    pub archive: Vec<ArchivePoint>,
}

fn archive(session: &Session) -> Vec<ArchivePoint> {
    session
        .archive
        .iter()
        .map(|s| ArchivePoint {
            index: s.sequence_index,
            coords: s.coords.clone(),
            value: s.value,
            provenance: s.provenance,
        })
        .collect()
}

pub fn summary(id: &str, session: &Session) -> SessionSummary {
    let counts = session.case_counts();
    SessionSummary {
        id: id.to_string(),
        status: session.status,
        domain: session.config.domain.clone(),
        v: session.v,
        consecutive_passes: session.consecutive_passes,
        stopping_run_length: session.config.stopping_run_length,
        initial: counts.initial,
        drawn: counts.drawn,
        feedback: counts.feedback,
        hyperparams: session.model.as_ref().map(|m| m.hyperparams),
        feedback_center: session.feedback_center.clone(),
        pending: session.pending.as_ref().map(ProposalView::from),
        archive: archive(session),
    }
}

/// Model predictions over an evenly spaced grid plus the archive overlay.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurfaceView {
    Curve {
        x: Vec<f64>,
        predicted: Vec<f64>,
        archive: Vec<ArchivePoint>,
    },
    /// `predicted[i][j]` is the prediction at `(x[i], y[j])`.
    Grid {
        x: Vec<f64>,
        y: Vec<f64>,
        predicted: Vec<Vec<f64>>,
        archive: Vec<ArchivePoint>,
    },
}

fn axis(low: f64, high: f64, g: usize) -> Vec<f64> {
    (0..g)
        .map(|i| {
            if i + 1 == g {
                high
            } else {
                low + (high - low) * i as f64 / (g - 1) as f64
            }
        })
        .collect()
}

pub fn surface(session: &Session, resolution: usize) -> Result<SurfaceView> {
    if !(2..=501).contains(&resolution) {
        return Err(AredError::InvalidConfig(format!(
            "resolution must be in 2..=501, got {resolution}"
        )));
    }
    let model = session.model.as_ref().ok_or(AredError::EmptyArchive)?;
    let ivs = &session.config.domain.ivs;
    match ivs.len() {
        1 => {
            let x = axis(ivs[0].low, ivs[0].high, resolution);
            let predicted = x.iter().map(|&v| model.predict(&[v])).collect();
            Ok(SurfaceView::Curve {
                x,
                predicted,
                archive: archive(session),
            })
        }
        2 => {
            let x = axis(ivs[0].low, ivs[0].high, resolution);
            let y = axis(ivs[1].low, ivs[1].high, resolution);
            let predicted = x
                .iter()
                .map(|&a| y.iter().map(|&b| model.predict(&[a, b])).collect())
                .collect();
            Ok(SurfaceView::Grid {
                x,
                y,
                predicted,
                archive: archive(session),
            })
        }
        n => Err(AredError::InvalidConfig(format!(
            "surface view supports 1 or 2 variables, session has {n}"
        ))),
    }
}
