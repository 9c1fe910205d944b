//! (C, gamma) selection by exhaustive log-grid search under K-fold
//! cross-validation.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::smo::{self, KernelMatrix, SmoParams};
use super::{ScaledData, SvrConfig, SvrHyperparams};
use crate::domain::{Domain, Sample};
use crate::error::{AredError, Result};

/// `10^e` for `e = min, min + step, ..., max`.
pub fn exponent_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| min + k as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: SvrHyperparams,
    /// Mean per-fold MAE of the winner, in standardized response units.
    pub cv_mae: f64,
    /// Fold index of every sample.
    pub folds: Vec<usize>,
    pub candidates: usize,
    /// Remaining finite candidates in selection order, used when the winner
    /// cannot be trained on the full set.
    #[serde(skip)]
    pub runners_up: Vec<(SvrHyperparams, f64)>,
}

/// Finite candidates ordered by score, then smaller C, then smaller gamma,
/// excluding `skip`.
fn ranked(
    cs: &[f64],
    gammas: &[f64],
    scores: &[Vec<f64>],
    skip: (usize, usize),
) -> Vec<(usize, usize, f64)> {
    let mut all: Vec<(usize, usize, f64)> = (0..cs.len())
        .flat_map(|ci| (0..gammas.len()).map(move |gi| (ci, gi)))
        .filter(|&idx| idx != skip)
        .map(|(ci, gi)| (ci, gi, scores[gi][ci]))
        .filter(|t| t.2.is_finite())
        .collect();
    all.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    all
}

/// Held-out predictions of one fold across an ascending list of C values.
struct FoldRun<'a> {
    train: Vec<usize>,
    test: Vec<usize>,
    kernel: Vec<f64>,
    cross: Vec<f64>,
    targets: Vec<f64>,
    data: &'a ScaledData,
}

impl<'a> FoldRun<'a> {
    fn new(data: &'a ScaledData, folds: &[usize], fold: usize, full: &[f64]) -> Self {
        let m = data.targets.len();
        let train: Vec<usize> = (0..m).filter(|&i| folds[i] != fold).collect();
        let test: Vec<usize> = (0..m).filter(|&i| folds[i] == fold).collect();
        let kernel = train
            .iter()
            .flat_map(|&i| train.iter().map(move |&j| full[i * m + j]))
            .collect();
        let cross = test
            .iter()
            .flat_map(|&i| train.iter().map(move |&j| full[i * m + j]))
            .collect();
        let targets = train.iter().map(|&i| data.targets[i]).collect();
        Self {
            train,
            test,
            kernel,
            cross,
            targets,
            data,
        }
    }

    /// Mean absolute held-out error for each C, `None` where the solver
    /// failed. Solutions are warm-started along the ascending C axis; once no
    /// variable touches the box, larger C gives the same solution. A failure
    /// ends the sweep: a wider box only adds free directions to an already
    /// ill-conditioned problem, so larger C is scored as failed too.
    fn scores(&self, cs: &[f64], epsilon: f64, config: &SvrConfig) -> Vec<Option<f64>> {
        let mt = self.train.len();
        let km = KernelMatrix {
            values: &self.kernel,
            m: mt,
        };
        let mut out = Vec::with_capacity(cs.len());
        let mut warm: Option<Vec<f64>> = None;
        let mut saturated: Option<f64> = None;
        for &c in cs {
            if let Some(score) = saturated {
                out.push(Some(score));
                continue;
            }
            let params = SmoParams {
                c,
                epsilon,
                tolerance: config.solver_tolerance,
                max_iterations: config.max_solver_passes,
            };
            match smo::solve(&km, &self.targets, &params, warm.as_deref()) {
                Ok(sol) => {
                    let err = self.held_out_error(&sol.beta, sol.bias);
                    if !sol.has_bounded(c) {
                        saturated = Some(err);
                    }
                    warm = Some(sol.alpha);
                    out.push(Some(err));
                }
                Err(_) => {
                    out.resize(cs.len(), None);
                    break;
                }
            }
        }
        out
    }

    fn held_out_error(&self, beta: &[f64], bias: f64) -> f64 {
        let mt = self.train.len();
        let total: f64 = self
            .test
            .iter()
            .enumerate()
            .map(|(row, &i)| {
                let z = self.cross[row * mt..(row + 1) * mt]
                    .iter()
                    .zip(beta)
                    .map(|(k, b)| k * b)
                    .sum::<f64>()
                    + bias;
                (z - self.data.targets[i]).abs()
            })
            .sum();
        total / self.test.len() as f64
    }
}

fn assign_folds<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut folds = vec![0; m];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    folds
}

/// Scores every `(C, gamma)` in `cs x gammas`; returns `scores[g][c]`.
fn score_grid(
    data: &ScaledData,
    folds: &[usize],
    k: usize,
    cs: &[f64],
    gammas: &[f64],
    epsilon: f64,
    config: &SvrConfig,
) -> Vec<Vec<f64>> {
    let sq = data.squared_distances();
    gammas
        .iter()
        .map(|&gamma| {
            let full: Vec<f64> = sq.iter().map(|&d| (-gamma * d).exp()).collect();
            let mut sums = vec![0.0; cs.len()];
            let mut failed = vec![false; cs.len()];
            for fold in 0..k {
                let run = FoldRun::new(data, folds, fold, &full);
                for (idx, score) in run.scores(cs, epsilon, config).into_iter().enumerate() {
                    match score {
                        Some(s) => sums[idx] += s,
                        None => failed[idx] = true,
                    }
                }
            }
            sums.iter()
                .zip(&failed)
                .map(|(&s, &f)| if f { f64::INFINITY } else { s / k as f64 })
                .collect()
        })
        .collect()
}

fn pick_best(
    cs: &[f64],
    gammas: &[f64],
    scores: &[Vec<f64>],
    preferred: Option<(f64, f64)>,
) -> Option<(usize, usize, f64)> {
    // Smaller C wins ties, then smaller gamma.
    let mut best: Option<(usize, usize, f64)> = None;
    for (ci, _) in cs.iter().enumerate() {
        for (gi, _) in gammas.iter().enumerate() {
            let s = scores[gi][ci];
            if !s.is_finite() {
                continue;
            }
            if best.map_or(true, |(_, _, b)| s < b) {
                best = Some((ci, gi, s));
            }
        }
    }
    if let (Some((_, _, b)), Some((pc, pg))) = (best, preferred) {
        let ci = cs.iter().position(|&c| c == pc);
        let gi = gammas.iter().position(|&g| g == pg);
        if let (Some(ci), Some(gi)) = (ci, gi) {
            if scores[gi][ci] == b {
                return Some((ci, gi, b));
            }
        }
    }
    best
}

/// Chooses `(C, gamma)` minimizing mean K-fold MAE. Folds are drawn from
/// `rng` once, before any candidate is scored. When fewer samples than folds
/// are available the search falls back to leave-one-out.
pub fn grid_search<R: Rng + ?Sized>(
    domain: &Domain,
    samples: &[Sample],
    config: &SvrConfig,
    preferred: Option<&SvrHyperparams>,
    rng: &mut R,
) -> Result<GridSearchOutcome> {
    config.validate()?;
    if samples.len() < 2 {
        return Err(AredError::InsufficientData {
            needed: 2,
            have: samples.len(),
        });
    }
    let data = ScaledData::new(domain, samples)?;
    let m = data.targets.len();
    let k = config.cv_folds.min(m);
    let folds = assign_folds(m, k, rng);
    let epsilon = data.epsilon(config.epsilon_fraction);
    let preferred = preferred.map(|p| (p.c, p.gamma));

    let exps = exponent_grid(
        config.grid_log10_min,
        config.grid_log10_max,
        config.grid_log10_step,
    );
    let (cs, gammas, scores, candidates) = if config.coarse_to_fine {
        let coarse = exponent_grid(config.grid_log10_min, config.grid_log10_max, 2.0);
        let values: Vec<f64> = coarse.iter().map(|e| 10f64.powf(*e)).collect();
        let scores = score_grid(&data, &folds, k, &values, &values, epsilon, config);
        let (ci, gi, _) = pick_best(&values, &values, &scores, None).ok_or(
            AredError::SolverDiverged {
                iterations: config.max_solver_passes,
            },
        )?;
        let window = |center: f64| -> Vec<f64> {
            exps.iter()
                .copied()
                .filter(|e| (e - center).abs() <= 2.0 + 1e-9)
                .map(|e| 10f64.powf(e))
                .collect()
        };
        let cs = window(coarse[ci]);
        let gammas = window(coarse[gi]);
        let fine = score_grid(&data, &folds, k, &cs, &gammas, epsilon, config);
        let n = values.len() * values.len() + cs.len() * gammas.len();
        (cs, gammas, fine, n)
    } else {
        let values: Vec<f64> = exps.iter().map(|e| 10f64.powf(*e)).collect();
        let scores = score_grid(&data, &folds, k, &values, &values, epsilon, config);
        let n = values.len() * values.len();
        (values.clone(), values, scores, n)
    };

    let (ci, gi, cv_mae) =
        pick_best(&cs, &gammas, &scores, preferred).ok_or(AredError::SolverDiverged {
            iterations: config.max_solver_passes,
        })?;
    let hp = |ci: usize, gi: usize| SvrHyperparams {
        c: cs[ci],
        gamma: gammas[gi],
        epsilon,
    };
    let runners_up = ranked(&cs, &gammas, &scores, (ci, gi))
        .into_iter()
        .map(|(c, g, s)| (hp(c, g), s))
        .collect();
    Ok(GridSearchOutcome {
        best: hp(ci, gi),
        cv_mae,
        folds,
        candidates,
        runners_up,
    })
}
