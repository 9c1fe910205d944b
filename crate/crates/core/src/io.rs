//! Session documents, model artifacts and CSV exports.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::benchmarks::{ComparisonRow, RowSource};
use crate::controller::{CaseErrorMode, Session, SessionConfig};
use crate::domain::{Domain, Provenance, Sample};
use crate::error::{AredError, Result};
use crate::metrics::FeedbackPolicy;
use crate::sampler::ConstraintParams;
use crate::surrogate::{InputScaling, ResponseScaling, SvrConfig, SvrHyperparams, SvrModel};

pub const SESSION_SCHEMA_VERSION: u32 = 1;
pub const MODEL_SCHEMA_VERSION: u32 = 1;

const DIGEST_FIELD: &str = "digest";
const VERSION_FIELD: &str = "schema_version";

/// SHA-256 over the compact JSON of `value`. Object keys serialize in sorted
/// order, so the digest does not depend on field order in the file.
fn digest_of(value: &Value) -> String {
    let bytes = serde_json::to_vec(value).expect("json values always serialize");
    hex::encode(Sha256::digest(bytes))
}

fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(bytes))
}

/// Wraps `body` as `{schema_version, digest, ...body}`.
fn seal<T: Serialize>(body: &T, version: u32) -> Result<Value> {
    let mut value = serde_json::to_value(body).map_err(|e| AredError::Io(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| AredError::Io("document body must be an object".into()))?;
    obj.insert(VERSION_FIELD.into(), Value::from(version));
    let digest = digest_of(&value);
    value
        .as_object_mut()
        .expect("still an object")
        .insert(DIGEST_FIELD.into(), Value::String(digest));
    Ok(value)
}

/// Checks version and digest, returning the body without the digest.
fn unseal(text: &str, expected: u32) -> Result<Value> {
    if text.trim().is_empty() {
        return Err(AredError::CorruptDocument("empty document".into()));
    }
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| AredError::CorruptDocument(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| AredError::CorruptDocument("top level is not an object".into()))?;
    let found = obj
        .get(VERSION_FIELD)
        .and_then(Value::as_u64)
        .ok_or_else(|| AredError::CorruptDocument("missing schema_version".into()))?;
    let stored = match obj.remove(DIGEST_FIELD) {
        Some(Value::String(s)) => s,
        _ => return Err(AredError::CorruptDocument("missing digest".into())),
    };
    if found != u64::from(expected) {
        return Err(AredError::SchemaMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected,
        });
    }
    if digest_of(&value) != stored {
        return Err(AredError::CorruptDocument("digest mismatch".into()));
    }
    value.as_object_mut().expect("object").remove(VERSION_FIELD);
    Ok(value)
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes a session to its sealed JSON text.
pub fn session_to_string(session: &Session) -> Result<String> {
    let value = seal(session, SESSION_SCHEMA_VERSION)?;
    serde_json::to_string_pretty(&value).map_err(|e| AredError::Io(e.to_string()))
}

pub fn session_from_str(text: &str) -> Result<Session> {
    let body = unseal(text, SESSION_SCHEMA_VERSION)?;
    serde_json::from_value(body).map_err(|e| AredError::CorruptDocument(e.to_string()))
}

pub fn save_session(session: &Session, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), session_to_string(session)?.as_bytes())
}

pub fn load_session(path: impl AsRef<Path>) -> Result<Session> {
    session_from_str(&fs::read_to_string(path)?)
}

/// Where the exported model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactProvenance {
    pub config_digest: String,
    pub archive_digest: String,
    pub archive_size: usize,
    pub converged: bool,
}

/// A trained surrogate detached from its session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub domain: Domain,
    pub hyperparams: SvrHyperparams,
    pub input_scaling: InputScaling,
    pub response_scaling: ResponseScaling,
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub training_fingerprint: String,
    pub provenance: ArtifactProvenance,
    /// The full model, so the artifact reloads into the same predictor.
    model: SvrModel,
}

impl ModelArtifact {
    pub fn new(model: &SvrModel, config: &SessionConfig, archive: &[Sample], converged: bool) -> Self {
        Self {
            domain: config.domain.clone(),
            hyperparams: model.hyperparams,
            input_scaling: model.input_scaling.clone(),
            response_scaling: model.response_scaling,
            support_vectors: model.support_vectors.clone(),
            coefficients: model.coefficients.clone(),
            bias: model.bias,
            training_fingerprint: model.fingerprint.clone(),
            provenance: ArtifactProvenance {
                config_digest: sha256_json(config),
                archive_digest: sha256_json(&archive),
                archive_size: archive.len(),
                converged,
            },
            model: model.clone(),
        }
    }

    pub fn model(&self) -> &SvrModel {
        &self.model
    }

    pub fn predict(&self, coords: &[f64]) -> f64 {
        self.model.predict(coords)
    }

    pub fn to_json(&self) -> Result<String> {
        let value = seal(self, MODEL_SCHEMA_VERSION)?;
        serde_json::to_string_pretty(&value).map_err(|e| AredError::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let body = unseal(text, MODEL_SCHEMA_VERSION)?;
        serde_json::from_value(body).map_err(|e| AredError::CorruptDocument(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// The session's current model as an artifact. Unless `force` is set the
/// session must have converged.
pub fn export_model(session: &Session, force: bool) -> Result<ModelArtifact> {
    if !session.is_converged() && !force {
        return Err(AredError::NotConverged);
    }
    let model = session.model.as_ref().ok_or(AredError::NotConverged)?;
    Ok(ModelArtifact::new(
        model,
        &session.config,
        &session.archive,
        session.is_converged(),
    ))
}

/// A measured starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialPoint {
    pub coords: Vec<f64>,
    pub value: f64,
}

/// Everything needed to open a session: the domain, a seed, measured initial
/// points and optional overrides of the per-domain defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    pub domain: Option<Domain>,
    /// Shorthand for a domain with default names: `[[low, high], ...]`.
    pub bounds: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial: Vec<InitialPoint>,
    pub draw_params: Option<ConstraintParams>,
    pub feedback_params: Option<ConstraintParams>,
    pub feedback_policy: Option<FeedbackPolicy>,
    pub svr_config: Option<SvrConfig>,
    pub stopping_run_length: Option<usize>,
    pub max_draw_attempts: Option<usize>,
    pub case_budget: Option<usize>,
    pub diagonal_override: Option<f64>,
    pub case_error_mode: Option<CaseErrorMode>,
}

impl SessionRequest {
    pub fn domain(&self) -> Result<Domain> {
        match (&self.domain, &self.bounds) {
            (Some(d), None) => crate::domain::validate_domain(d.clone()),
            (None, Some(b)) => Domain::from_bounds(b),
            _ => Err(AredError::InvalidConfig(
                "give exactly one of `domain` or `bounds`".into(),
            )),
        }
    }

    pub fn config(&self) -> Result<SessionConfig> {
        let mut c = SessionConfig::for_domain(self.domain()?, self.seed);
        if let Some(v) = self.draw_params {
            c.draw_params = v;
        }
        if let Some(v) = self.feedback_params {
            c.feedback_params = v;
        }
        if let Some(v) = self.feedback_policy {
            c.feedback_policy = v;
        }
        if let Some(v) = &self.svr_config {
            c.svr_config = v.clone();
        }
        if let Some(v) = self.stopping_run_length {
            c.stopping_run_length = v;
        }
        if let Some(v) = self.max_draw_attempts {
            c.max_draw_attempts = v;
        }
        if let Some(v) = self.case_budget {
            c.case_budget = v;
        }
        if self.diagonal_override.is_some() {
            c.diagonal_override = self.diagonal_override;
        }
        if let Some(v) = self.case_error_mode {
            c.case_error_mode = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn initial_samples(&self) -> Vec<Sample> {
        self.initial
            .iter()
            .map(|p| Sample::initial(p.coords.clone(), p.value))
            .collect()
    }

    pub fn start(&self) -> Result<Session> {
        Session::start(self.config()?, self.initial_samples())
    }
}

pub const TABLE_HEADER: [&str; 6] = ["trial", "case_count", "source", "mae", "mape", "r"];

fn source_label(source: RowSource) -> &'static str {
    match source {
        RowSource::Ared => "ARED",
        RowSource::Sfe => "SFE",
        RowSource::Fe => "FE",
    }
}

fn parse_source(s: &str) -> Result<RowSource> {
    match s {
        "ARED" => Ok(RowSource::Ared),
        "SFE" => Ok(RowSource::Sfe),
        "FE" => Ok(RowSource::Fe),
        other => Err(AredError::CorruptDocument(format!("unknown source {other:?}"))),
    }
}

/// Writes comparison rows; a missing MAPE becomes an empty field.
pub fn write_table<W: std::io::Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for row in rows {
        w.write_record([
            row.trial.to_string(),
            row.case_count.to_string(),
            source_label(row.source).to_string(),
            row.mae.to_string(),
            row.mape.map(|m| m.to_string()).unwrap_or_default(),
            row.r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_table(rows: &[ComparisonRow], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_table(rows, &mut buf)?;
    write_atomic(path.as_ref(), &buf)
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize) -> Result<T> {
    record
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| AredError::CorruptDocument(format!("bad field {i} in {record:?}")))
}

pub fn read_table<R: std::io::Read>(input: R) -> Result<Vec<ComparisonRow>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != TABLE_HEADER {
        return Err(AredError::CorruptDocument("unexpected table header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let mape = match rec.get(4) {
                Some("") | None => None,
                Some(_) => Some(field(&rec, 4)?),
            };
            Ok(ComparisonRow {
                trial: field(&rec, 0)?,
                case_count: field(&rec, 1)?,
                source: parse_source(rec.get(2).unwrap_or(""))?,
                mae: field(&rec, 3)?,
                mape,
                r: field(&rec, 5)?,
            })
        })
        .collect()
}

/// One row per archive entry: index, iv columns, dv column, provenance.
pub fn write_archive<W: std::io::Write>(domain: &Domain, archive: &[Sample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(domain.ivs.iter().map(|iv| iv.name.clone()));
    header.push(domain.dv_name.clone());
    header.push("provenance".into());
    w.write_record(&header)?;
    for s in archive {
        let mut rec = vec![s.sequence_index.to_string()];
        rec.extend(s.coords.iter().map(f64::to_string));
        rec.push(s.value.map(|v| v.to_string()).unwrap_or_default());
        rec.push(s.provenance.as_str().to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_archive(domain: &Domain, archive: &[Sample], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_archive(domain, archive, &mut buf)?;
    write_atomic(path.as_ref(), &buf)
}

pub fn read_archive<R: std::io::Read>(dim: usize, input: R) -> Result<Vec<Sample>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.len() != dim + 3 {
        return Err(AredError::CorruptDocument("archive column count".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let coords = (0..dim).map(|i| field(&rec, i + 1)).collect::<Result<Vec<f64>>>()?;
            let value = match rec.get(dim + 1) {
                Some("") | None => None,
                Some(_) => Some(field(&rec, dim + 1)?),
            };
            let provenance = match rec.get(dim + 2) {
                Some("initial") => Provenance::Initial,
                Some("drawn") => Provenance::Drawn,
                Some("feedback") => Provenance::Feedback,
                other => {
                    return Err(AredError::CorruptDocument(format!("provenance {other:?}")))
                }
            };
            Ok(Sample {
                coords,
                value,
                provenance,
                sequence_index: field(&rec, 0)?,
            })
        })
        .collect()
}
