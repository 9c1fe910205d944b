//! Epsilon-SVR surrogate with an RBF kernel.
//!
//! Inputs are mapped into the unit hypercube of the domain and the response is
//! standardized before training; [`SvrModel::predict`] undoes both.

mod grid;
mod smo;

pub use grid::{exponent_grid, grid_search, GridSearchOutcome};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Domain, Sample};
use crate::error::{AredError, Result};
use smo::{KernelMatrix, SmoParams};

/// `exp(-gamma * |x - y|^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(x, y)).exp()
}

pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrHyperparams {
    /// Penalty parameter.
    pub c: f64,
    /// RBF kernel width parameter.
    pub gamma: f64,
    /// Half-width of the insensitive tube, in standardized response units.
    pub epsilon: f64,
}

impl SvrHyperparams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c > 0.0
            && self.gamma > 0.0
            && self.epsilon >= 0.0
            && self.c.is_finite()
            && self.gamma.is_finite()
            && self.epsilon.is_finite();
        if ok {
            Ok(())
        } else {
            Err(AredError::InvalidConfig(format!(
                "SVR hyperparameters out of range: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    pub grid_log10_min: f64,
    pub grid_log10_max: f64,
    pub grid_log10_step: f64,
    pub cv_folds: usize,
    /// Tube half-width as a fraction of the observed response range.
    pub epsilon_fraction: f64,
    pub solver_tolerance: f64,
    /// Iteration cap for a single SMO solve.
    pub max_solver_passes: usize,
    /// Two-stage search: exponent step 2 over the full range, then the
    /// configured step within +-2 decades of the stage-one winner.
    pub coarse_to_fine: bool,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            grid_log10_min: -11.0,
            grid_log10_max: 11.0,
            grid_log10_step: 0.5,
            cv_folds: 5,
            epsilon_fraction: 0.01,
            solver_tolerance: 1e-6,
            max_solver_passes: 10_000,
            coarse_to_fine: false,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grid_log10_min < self.grid_log10_max
            && self.grid_log10_step > 0.0
            && self.cv_folds >= 2
            && self.epsilon_fraction >= 0.0
            && self.solver_tolerance > 0.0
            && self.max_solver_passes >= 1;
        if ok {
            Ok(())
        } else {
            Err(AredError::InvalidConfig(format!(
                "invalid SVR config: {self:?}"
            )))
        }
    }
}

/// Affine map of the response onto zero mean, unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseScaling {
    pub mean: f64,
    pub scale: f64,
}

impl ResponseScaling {
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let scale = var.sqrt();
        Self {
            mean,
            scale: if scale > 0.0 && scale.is_finite() {
                scale
            } else {
                1.0
            },
        }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.scale
    }

    pub fn inverse(&self, z: f64) -> f64 {
        self.mean + self.scale * z
    }
}

/// Per-axis `(low, length)` used to normalize inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub low: Vec<f64>,
    pub length: Vec<f64>,
}

impl InputScaling {
    pub fn from_domain(domain: &Domain) -> Self {
        Self {
            low: domain.ivs.iter().map(|r| r.low).collect(),
            length: domain.ivs.iter().map(|r| r.length()).collect(),
        }
    }

    pub fn forward(&self, coords: &[f64]) -> Vec<f64> {
        coords
            .iter()
            .zip(self.low.iter().zip(&self.length))
            .map(|(&x, (&lo, &len))| (x - lo) / len)
            .collect()
    }

    fn inside(&self, unit: &[f64]) -> bool {
        unit.iter().all(|u| (0.0..=1.0).contains(u))
    }
}

/// Training data in solver space.
#[derive(Debug, Clone)]
pub(crate) struct ScaledData {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub response: ResponseScaling,
    pub input: InputScaling,
}

impl ScaledData {
    pub fn new(domain: &Domain, samples: &[Sample]) -> Result<Self> {
        let mut values = Vec::with_capacity(samples.len());
        for (index, s) in samples.iter().enumerate() {
            domain.check_point(&s.coords)?;
            match s.value {
                Some(v) if v.is_finite() => values.push(v),
                Some(v) => return Err(AredError::NonFiniteValue(v)),
                None => return Err(AredError::UnmeasuredSample { index }),
            }
        }
        let response = ResponseScaling::fit(&values);
        let input = InputScaling::from_domain(domain);
        Ok(Self {
            inputs: samples.iter().map(|s| input.forward(&s.coords)).collect(),
            targets: values.iter().map(|&v| response.forward(v)).collect(),
            response,
            input,
        })
    }

    /// Tube half-width in standardized units for a given range fraction.
    pub fn epsilon(&self, fraction: f64) -> f64 {
        let (lo, hi) = self
            .targets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
                (lo.min(t), hi.max(t))
            });
        if hi > lo {
            fraction * (hi - lo)
        } else {
            0.0
        }
    }

    pub fn squared_distances(&self) -> Vec<f64> {
        let m = self.inputs.len();
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let v = squared_distance(&self.inputs[i], &self.inputs[j]);
                d[i * m + j] = v;
                d[j * m + i] = v;
            }
        }
        d
    }
}

/// Diagnostics from the final solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub kkt_gap: f64,
    /// Dual objective in maximization form.
    pub dual_objective: f64,
}

/// A trained surrogate. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub hyperparams: SvrHyperparams,
    /// Normalized coordinates of the points with nonzero coefficient.
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i - alpha*_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub input_scaling: InputScaling,
    pub response_scaling: ResponseScaling,
    pub fingerprint: String,
    pub training_size: usize,
    pub stats: SolverStats,
}

/// A prediction together with whether it extrapolates outside the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub extrapolated: bool,
}

impl SvrModel {
    /// Predicted response in engineering units.
    pub fn predict(&self, coords: &[f64]) -> f64 {
        self.predict_checked(coords).value
    }

    pub fn predict_checked(&self, coords: &[f64]) -> Prediction {
        let unit = self.input_scaling.forward(coords);
        let extrapolated = !self.input_scaling.inside(&unit);
        if extrapolated {
            log::warn!("prediction at {coords:?} extrapolates outside the training domain");
        }
        Prediction {
            value: self.response_scaling.inverse(self.decision(&unit)),
            extrapolated,
        }
    }

    /// Decision function in standardized units at a normalized point.
    pub fn decision(&self, unit: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, &coef)| coef * rbf_kernel(sv, unit, self.hyperparams.gamma))
            .sum::<f64>()
            + self.bias
    }

    /// Absolute tube half-width in engineering units.
    pub fn epsilon_abs(&self) -> f64 {
        self.hyperparams.epsilon * self.response_scaling.scale
    }
}

/// Hash of the training set's coordinates and values.
pub fn training_fingerprint(samples: &[Sample]) -> String {
    let mut hasher = Sha256::new();
    for s in samples {
        for c in &s.coords {
            hasher.update(c.to_bits().to_le_bytes());
        }
        hasher.update(s.value.unwrap_or(f64::NAN).to_bits().to_le_bytes());
        hasher.update([0xff]);
    }
    hex::encode(hasher.finalize())
}

fn kernel_matrix(sq: &[f64], gamma: f64) -> Vec<f64> {
    sq.iter().map(|&d| (-gamma * d).exp()).collect()
}

pub(crate) fn solver_params(hp: &SvrHyperparams, config: &SvrConfig) -> SmoParams {
    SmoParams {
        c: hp.c,
        epsilon: hp.epsilon,
        tolerance: config.solver_tolerance,
        max_iterations: config.max_solver_passes,
    }
}

/// Trains with fixed hyperparameters.
pub fn train(
    domain: &Domain,
    samples: &[Sample],
    hp: &SvrHyperparams,
    config: &SvrConfig,
) -> Result<SvrModel> {
    if samples.len() < 2 {
        return Err(AredError::InsufficientData {
            needed: 2,
            have: samples.len(),
        });
    }
    hp.validate()?;
    let data = ScaledData::new(domain, samples)?;
    let m = data.inputs.len();
    let k = kernel_matrix(&data.squared_distances(), hp.gamma);
    let sol = smo::solve(
        &KernelMatrix { values: &k, m },
        &data.targets,
        &solver_params(hp, config),
        None,
    )
?;

    let (support_vectors, coefficients) = data
        .inputs
        .iter()
        .zip(&sol.beta)
        .filter(|(_, &b)| b != 0.0)
        .map(|(x, &b)| (x.clone(), b))
        .unzip();
    Ok(SvrModel {
        hyperparams: *hp,
        support_vectors,
        coefficients,
        bias: sol.bias,
        input_scaling: data.input,
        response_scaling: data.response,
        fingerprint: training_fingerprint(samples),
        training_size: m,
        stats: SolverStats {
            iterations: sol.iterations,
            kkt_gap: sol.kkt_gap,
            dual_objective: -sol.objective,
        },
    })
}

/// Prediction at each sample in `held_out` from a model trained on all other
/// samples, with the hyperparameters held fixed. Returned in engineering
/// units, in the order of `held_out`.
pub fn leave_one_out_predictions(
    domain: &Domain,
    samples: &[Sample],
    hp: &SvrHyperparams,
    config: &SvrConfig,
    held_out: &[usize],
) -> Result<Vec<f64>> {
    let data = ScaledData::new(domain, samples)?;
    let m = data.inputs.len();
    if m < 2 {
        return Err(AredError::InsufficientData { needed: 2, have: m });
    }
    let full = kernel_matrix(&data.squared_distances(), hp.gamma);
    let params = solver_params(hp, config);
    let mut out = Vec::with_capacity(held_out.len());
    let mut sub = Vec::with_capacity((m - 1) * (m - 1));
    let mut targets = Vec::with_capacity(m - 1);
    for &held in held_out {
        if held >= m {
            return Err(AredError::DimensionMismatch {
                expected: m,
                got: held,
            });
        }
        sub.clear();
        targets.clear();
        let keep: Vec<usize> = (0..m).filter(|&i| i != held).collect();
        for &i in &keep {
            targets.push(data.targets[i]);
            for &j in &keep {
                sub.push(full[i * m + j]);
            }
        }
        let sol = smo::solve(
            &KernelMatrix {
                values: &sub,
                m: m - 1,
            },
            &targets,
            &params,
            None,
        )?;
        let z = keep
            .iter()
            .zip(&sol.beta)
            .map(|(&i, &b)| b * full[held * m + i])
            .sum::<f64>()
            + sol.bias;
        out.push(data.response.inverse(z));
    }
    Ok(out)
}

/// Result of [`refit`]: the model and the search that chose it.
#[derive(Debug, Clone)]
pub struct RefitOutcome {
    pub model: SvrModel,
    pub search: GridSearchOutcome,
}

/// Grid search followed by a fit on the full set. The previous model's
/// hyperparameters win exact CV ties.
pub fn refit<R: rand::Rng + ?Sized>(
    previous: Option<&SvrModel>,
    domain: &Domain,
    samples: &[Sample],
    config: &SvrConfig,
    rng: &mut R,
) -> Result<RefitOutcome> {
    Ok(refit_accepting(previous, domain, samples, config, rng, |_| Ok(()))?.0)
}

/// [`refit`] where `accept` must also succeed for the chosen model.
///
/// Near-singular kernels with very large C can exhaust the solver on the full
/// set (or in `accept`) even though every fold converged. Such candidates are
/// skipped in ranking order; other errors propagate.
pub fn refit_accepting<R, T, F>(
    previous: Option<&SvrModel>,
    domain: &Domain,
    samples: &[Sample],
    config: &SvrConfig,
    rng: &mut R,
    mut accept: F,
) -> Result<(RefitOutcome, T)>
where
    R: rand::Rng + ?Sized,
    F: FnMut(&SvrModel) -> Result<T>,
{
    let preferred = previous.map(|m| m.hyperparams);
    let mut search = grid_search(domain, samples, config, preferred.as_ref(), rng)?;
    let mut fallbacks = std::mem::take(&mut search.runners_up).into_iter();
    // Smallest C that failed for each gamma; larger C at that gamma is skipped.
    let mut failed: Vec<(f64, f64)> = Vec::new();
    loop {
        let attempt = train(domain, samples, &search.best, config)
            .and_then(|model| accept(&model).map(|extra| (model, extra)));
        match attempt {
            Ok((model, extra)) => return Ok((RefitOutcome { model, search }, extra)),
            Err(AredError::SolverDiverged { iterations }) => {
                log::warn!(
                    "solver cap hit for C={} gamma={}; trying next candidate",
                    search.best.c,
                    search.best.gamma
                );
                failed.push((search.best.gamma, search.best.c));
                let next = fallbacks.by_ref().find(|(hp, _)| {
                    !failed.iter().any(|&(g, c)| g == hp.gamma && hp.c >= c)
                });
                match next {
                    Some((hp, score)) => {
                        search.best = hp;
                        search.cv_mae = score;
                    }
                    None => return Err(AredError::SolverDiverged { iterations }),
                }
            }
            Err(e) => return Err(e),
        }
    }
}
