//! The propose / measure / refit loop.
//!
//! A [`Session`] alternates strictly between [`Session::propose_next`] and
//! [`Session::record_result`]. Every random decision comes from the session's
//! own ChaCha stream, so `(config, initial samples, measured values)` fully
//! determines the sequence of proposals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::domain::{Domain, Provenance, Sample};
use crate::error::{AredError, Result};
use crate::metrics::{self, ErrorReference, ErrorReport, FeedbackPolicy};
use crate::sampler::{
    self, ConstraintAudit, ConstraintParams, DrawContext, FeedbackCenter,
};
use crate::surrogate::{self, SvrConfig, SvrHyperparams, SvrModel};

/// How per-case errors are measured after each refit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseErrorMode {
    /// Predictions of the refit model at its own training points.
    InSample,
    /// Each selected case is predicted by a model trained on every other case,
    /// with the refit model's hyperparameters. Initial samples keep the refit
    /// model's own prediction: they sit on the domain corners and are always
    /// in the training set, so holding one out would measure an extrapolation
    /// the surrogate never has to make.
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub domain: Domain,
    pub draw_params: ConstraintParams,
    pub feedback_params: ConstraintParams,
    pub feedback_policy: FeedbackPolicy,
    pub svr_config: SvrConfig,
    pub stopping_run_length: usize,
    pub rng_seed: u64,
    pub max_draw_attempts: usize,
    /// Autonomous runs stop (flagged failed) once the archive reaches this size.
    pub case_budget: usize,
    /// Replaces the `sqrt(n)` domain length in the distance threshold.
    pub diagonal_override: Option<f64>,
    pub case_error_mode: CaseErrorMode,
}

impl SessionConfig {
    /// Defaults for `domain`: tuned constraint parameters for one and two
    /// variables, and `n = iv_count + 1` for the trigger and stopping counts.
    pub fn for_domain(domain: Domain, rng_seed: u64) -> Self {
        let n = domain.dim();
        Self {
            draw_params: ConstraintParams::default_draw(n),
            feedback_params: ConstraintParams::default_feedback(n),
            feedback_policy: FeedbackPolicy::for_dimension(n),
            svr_config: SvrConfig::default(),
            stopping_run_length: n + 2,
            rng_seed,
            max_draw_attempts: 10_000,
            case_budget: 200,
            diagonal_override: None,
            case_error_mode: CaseErrorMode::LeaveOneOut,
            domain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::domain::validate_domain(self.domain.clone())?;
        self.draw_params.validate()?;
        self.feedback_params.validate()?;
        self.feedback_policy.validate()?;
        self.svr_config.validate()?;
        if self.stopping_run_length < 1 || self.max_draw_attempts < 1 || self.case_budget < 1 {
            return Err(AredError::InvalidConfig(
                "stopping_run_length, max_draw_attempts and case_budget must be >= 1".into(),
            ));
        }
        if let Some(d) = self.diagonal_override {
            if !(d > 0.0 && d.is_finite()) {
                return Err(AredError::InvalidConfig(format!(
                    "diagonal override must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingMeasurement,
    ReadyToPropose,
    Converged,
    Failed,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::AwaitingMeasurement => "awaiting_measurement",
            SessionStatus::ReadyToPropose => "ready_to_propose",
            SessionStatus::Converged => "converged",
            SessionStatus::Failed => "failed",
        }
    }
}

impl std::fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A proposed case awaiting its measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub sample: Sample,
    /// Surrogate prediction at the proposed point, when a model exists.
    pub predicted: Option<f64>,
    pub audit: ConstraintAudit,
    /// Set for feedback-provenance proposals.
    pub feedback_center: Option<FeedbackCenter>,
}

/// Everything learned from one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub archive_size: usize,
    pub measured: f64,
    /// Prediction shown when the case was proposed.
    pub predicted_before: Option<f64>,
    pub hyperparams: SvrHyperparams,
    pub cv_mae: f64,
    pub report: ErrorReport,
    /// Condition (a): enough cases for feedback.
    pub eligible: bool,
    pub feedback: Option<FeedbackCenter>,
    /// Eligible and no qualifying feedback case.
    pub passed: bool,
}

/// ChaCha stream that serializes as `(seed, word position)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRng(pub ChaCha8Rng);

impl SessionRng {
    pub fn from_seed(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }
}

#[derive(Serialize, Deserialize)]
struct RngRepr {
    seed: String,
    word_pos: String,
}

impl Serialize for SessionRng {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RngRepr {
            seed: hex::encode(self.0.get_seed()),
            word_pos: self.0.get_word_pos().to_string(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SessionRng {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let repr = RngRepr::deserialize(deserializer)?;
        let bytes = hex::decode(&repr.seed).map_err(D::Error::custom)?;
        let seed: [u8; 32] = bytes
            .try_into()
            .map_err(|_| D::Error::custom("rng seed must be 32 bytes"))?;
        let word_pos: u128 = repr.word_pos.parse().map_err(D::Error::custom)?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_word_pos(word_pos);
        Ok(Self(rng))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub config: SessionConfig,
    pub archive: Vec<Sample>,
    /// Number of selected (drawn or feedback) cases so far.
    pub v: usize,
    pub model: Option<SvrModel>,
    pub history: Vec<IterationRecord>,
    pub pending: Option<Proposal>,
    pub consecutive_passes: usize,
    pub status: SessionStatus,
    /// Center for the next proposal, from the latest error analysis.
    pub feedback_center: Option<FeedbackCenter>,
    pub rng: SessionRng,
    /// Unix milliseconds at which each archive entry was recorded.
    #[serde(default)]
    pub recorded_at: Vec<u64>,
}

fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    /// Opens a session from measured initial samples covering every domain
    /// corner (both endpoints for one variable).
    pub fn start(config: SessionConfig, initial: Vec<Sample>) -> Result<Self> {
        config.validate()?;
        let domain = &config.domain;
        for (index, s) in initial.iter().enumerate() {
            domain.check_point(&s.coords)?;
            match s.value {
                None => return Err(AredError::UnmeasuredInitialSample { index }),
                Some(v) if !v.is_finite() => return Err(AredError::NonFiniteValue(v)),
                Some(_) => {}
            }
        }
        for corner in domain.corners() {
            if !initial.iter().any(|s| s.coords == corner) {
                return Err(AredError::MissingEndpoints { corner });
            }
        }
        let archive: Vec<Sample> = initial
            .into_iter()
            .enumerate()
            .map(|(i, s)| Sample {
                provenance: Provenance::Initial,
                sequence_index: i,
                ..s
            })
            .collect();
        let mut rng = SessionRng::from_seed(config.rng_seed);
        let model = surrogate::refit(None, domain, &archive, &config.svr_config, &mut rng.0)?.model;
        let recorded_at = vec![now_millis(); archive.len()];
        Ok(Self {
            recorded_at,
            config,
            archive,
            v: 0,
            model: Some(model),
            history: Vec::new(),
            pending: None,
            consecutive_passes: 0,
            status: SessionStatus::ReadyToPropose,
            feedback_center: None,
            rng,
        })
    }

    fn wrong_state(&self, operation: &'static str) -> AredError {
        AredError::WrongState {
            operation,
            status: self.status.to_string(),
        }
    }

    /// Draws the next case, from the feedback region when the last error
    /// analysis flagged one and from the exploratory distribution otherwise.
    pub fn propose_next(&mut self) -> Result<&Proposal> {
        if self.status != SessionStatus::ReadyToPropose {
            return Err(self.wrong_state("propose"));
        }
        let domain = &self.config.domain;
        let (spec, params, provenance) = match &self.feedback_center {
            Some(center) => (
                sampler::feedback_spec(domain, center),
                self.config.feedback_params,
                Provenance::Feedback,
            ),
            None => (
                sampler::exploratory_spec(domain),
                self.config.draw_params,
                Provenance::Drawn,
            ),
        };
        let ctx = DrawContext {
            domain,
            archive: &self.archive,
            v: self.v,
            params,
            diagonal: self.config.diagonal_override,
            max_attempts: self.config.max_draw_attempts,
        };
        let (sample, audit) = sampler::draw_constrained(&spec, &ctx, provenance, &mut self.rng.0)?;
        let predicted = self.model.as_ref().map(|m| m.predict(&sample.coords));
        self.v += 1;
        self.status = SessionStatus::AwaitingMeasurement;
        Ok(self.pending.insert(Proposal {
            sample,
            predicted,
            audit,
            feedback_center: self.feedback_center.clone(),
        }))
    }

    /// Adds the measurement of the pending case, refits the surrogate and
    /// decides feedback and convergence.
    pub fn record_result(&mut self, value: f64) -> Result<&IterationRecord> {
        if self.status != SessionStatus::AwaitingMeasurement {
            return Err(self.wrong_state("record"));
        }
        if !value.is_finite() {
            return Err(AredError::NonFiniteValue(value));
        }
        let pending = self.pending.as_ref().expect("pending present while awaiting");
        let mut sample = pending.sample.clone();
        sample.value = Some(value);
        sample.sequence_index = self.archive.len();
        let predicted_before = pending.predicted;

        let mut archive = self.archive.clone();
        archive.push(sample);
        let config = &self.config;
        let (outcome, report) = surrogate::refit_accepting(
            self.model.as_ref(),
            &config.domain,
            &archive,
            &config.svr_config,
            &mut self.rng.0,
            |model| case_report(config, model, &archive),
        )?;

        let policy = &config.feedback_policy;
        let eligible = policy.eligible(archive.len());
        let feedback =
            metrics::feedback_check(&report, &archive, policy, metrics::dv_range(&archive));
        let passed = eligible && feedback.is_none();

        // Commit only after every fallible step succeeded.
        self.archive = archive;
        self.recorded_at.push(now_millis());
        self.pending = None;
        self.model = Some(outcome.model);
        self.consecutive_passes = if passed { self.consecutive_passes + 1 } else { 0 };
        self.feedback_center = feedback.clone();
        self.history.push(IterationRecord {
            iteration: self.history.len() + 1,
            archive_size: self.archive.len(),
            measured: value,
            predicted_before,
            hyperparams: outcome.search.best,
            cv_mae: outcome.search.cv_mae,
            report,
            eligible,
            feedback,
            passed,
        });
        self.status = if metrics::stopping_check(&self.pass_history(), config.stopping_run_length) {
            SessionStatus::Converged
        } else {
            SessionStatus::ReadyToPropose
        };
        Ok(self.history.last().expect("just pushed"))
    }

    pub fn pass_history(&self) -> Vec<bool> {
        self.history.iter().map(|r| r.passed).collect()
    }

    pub fn is_converged(&self) -> bool {
        self.status == SessionStatus::Converged
    }

    /// Marks the session failed; used when an autonomous run gives up.
    pub fn fail(&mut self) {
        self.pending = None;
        self.status = SessionStatus::Failed;
    }

    pub fn measured_samples(&self) -> impl Iterator<Item = &Sample> {
        self.archive.iter().filter(|s| s.is_measured())
    }

    /// Measured values of the selected cases, in order; together with the
    /// config and initial samples this reproduces the session.
    pub fn measurement_log(&self) -> Vec<f64> {
        self.archive
            .iter()
            .filter(|s| s.provenance != Provenance::Initial)
            .filter_map(|s| s.value)
            .collect()
    }

    pub fn initial_samples(&self) -> Vec<Sample> {
        self.archive
            .iter()
            .filter(|s| s.provenance == Provenance::Initial)
            .cloned()
            .collect()
    }

    /// Rebuilds a session by re-running every proposal and feeding back the
    /// logged measurements.
    pub fn replay(config: SessionConfig, initial: Vec<Sample>, values: &[f64]) -> Result<Self> {
        let mut session = Self::start(config, initial)?;
        for &value in values {
            session.propose_next()?;
            session.record_result(value)?;
        }
        Ok(session)
    }

    pub fn case_counts(&self) -> CaseCounts {
        let mut counts = CaseCounts::default();
        for s in &self.archive {
            match s.provenance {
                Provenance::Initial => counts.initial += 1,
                Provenance::Drawn => counts.drawn += 1,
                Provenance::Feedback => counts.feedback += 1,
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub initial: usize,
    pub drawn: usize,
    pub feedback: usize,
}

impl CaseCounts {
    pub fn total(&self) -> usize {
        self.initial + self.drawn + self.feedback
    }
}

/// Source of measured responses for autonomous runs.
pub trait Oracle {
    fn measure(&mut self, coords: &[f64]) -> f64;
}

impl<F: FnMut(&[f64]) -> f64> Oracle for F {
    fn measure(&mut self, coords: &[f64]) -> f64 {
        self(coords)
    }
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub session: Session,
    pub counts: CaseCounts,
    pub converged: bool,
    /// Why the run stopped early, when it did.
    pub failure: Option<AredError>,
}

/// Per-case errors used for the feedback and stopping decisions.
fn case_report(config: &SessionConfig, model: &SvrModel, archive: &[Sample]) -> Result<ErrorReport> {
    match config.case_error_mode {
        CaseErrorMode::InSample => metrics::case_errors(model, archive),
        CaseErrorMode::LeaveOneOut => {
            let selected: Vec<usize> = (0..archive.len())
                .filter(|&i| archive[i].provenance != Provenance::Initial)
                .collect();
            let held = surrogate::leave_one_out_predictions(
                &config.domain,
                archive,
                &model.hyperparams,
                &config.svr_config,
                &selected,
            )?;
            let mut predicted: Vec<f64> = archive.iter().map(|s| model.predict(&s.coords)).collect();
            for (&i, p) in selected.iter().zip(held) {
                predicted[i] = p;
            }
            let actual = archive
                .iter()
                .enumerate()
                .map(|(index, s)| s.value.ok_or(AredError::UnmeasuredSample { index }))
                .collect::<Result<Vec<f64>>>()?;
            metrics::error_report(&predicted, &actual, ErrorReference::TrainingArchive)
        }
    }
}

/// Alternates propose / measure until convergence, an error, or the case budget.
pub fn run_autonomous<O: Oracle + ?Sized>(
    config: SessionConfig,
    initial: Vec<Sample>,
    oracle: &mut O,
) -> Result<SessionReport> {
    let mut session = Session::start(config, initial)?;
    let failure = loop {
        if session.is_converged() {
            break None;
        }
        if session.archive.len() >= session.config.case_budget {
            break Some(AredError::InvalidConfig(format!(
                "case budget of {} exhausted before convergence",
                session.config.case_budget
            )));
        }
        let coords = match session.propose_next() {
            Ok(p) => p.sample.coords.clone(),
            Err(e) => break Some(e),
        };
        let value = oracle.measure(&coords);
        if let Err(e) = session.record_result(value) {
            break Some(e);
        }
    };
    if failure.is_some() {
        session.fail();
    }
    Ok(SessionReport {
        counts: session.case_counts(),
        converged: session.is_converged(),
        session,
        failure,
    })
}

/// Initial samples at every corner of the domain, measured by `oracle`.
pub fn corner_samples<O: Oracle + ?Sized>(domain: &Domain, oracle: &mut O) -> Vec<Sample> {
    domain
        .corners()
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let value = oracle.measure(&c);
            Sample {
                coords: c,
                value: Some(value),
                provenance: Provenance::Initial,
                sequence_index: i,
            }
        })
        .collect()
}
