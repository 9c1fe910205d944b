//! Two-variable decomposition solver for the epsilon-SVR dual.
//!
//! The dual is written over `2m` variables `a = [alpha; alpha*]` with signs
//! `s = [+1; -1]`:
//!
//! ```text
//! min  1/2 a'Qa + p'a   s.t.  s'a = 0,  0 <= a_t <= C
//! Q_tu = s_t s_u K(t mod m, u mod m),   p = [eps - y; eps + y]
//! ```
//!
//! Working pairs are chosen by maximal KKT violation for the first index and
//! largest guaranteed decrease for the second.

use crate::error::{AredError, Result};

const TAU: f64 = 1e-12;

/// Dense, row-major kernel matrix over the training points.
pub(crate) struct KernelMatrix<'a> {
    pub values: &'a [f64],
    pub m: usize,
}

impl KernelMatrix<'_> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m + j]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SmoSolution {
    /// Raw dual variables `[alpha; alpha*]`.
    pub alpha: Vec<f64>,
    /// `alpha_i - alpha*_i` per training point.
    pub beta: Vec<f64>,
    pub bias: f64,
    /// Minimization-form dual objective `1/2 a'Qa + p'a`.
    pub objective: f64,
    pub iterations: usize,
    pub kkt_gap: f64,
}

impl SmoSolution {
    /// True when some variable sits on the upper box bound.
    pub fn has_bounded(&self, c: f64) -> bool {
        self.alpha.iter().any(|&a| a >= c)
    }
}

pub(crate) struct SmoParams {
    pub c: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

/// Solves the dual. `warm` must be feasible for `params.c`.
pub(crate) fn solve(
    kernel: &KernelMatrix<'_>,
    targets: &[f64],
    params: &SmoParams,
    warm: Option<&[f64]>,
) -> Result<SmoSolution> {
    let m = kernel.m;
    debug_assert_eq!(targets.len(), m);
    let n = 2 * m;
    let c = params.c;
    let sign = |t: usize| if t < m { 1.0 } else { -1.0 };
    let base = |t: usize| if t < m { t } else { t - m };

    let p: Vec<f64> = (0..n)
        .map(|t| params.epsilon - sign(t) * targets[base(t)])
        .collect();
    let mut a = match warm {
        Some(w) => w.iter().map(|&x| x.clamp(0.0, c)).collect::<Vec<_>>(),
        None => vec![0.0; n],
    };

    // G = p + Qa, with Qa computed through beta to keep it O(m^2).
    let mut grad = p.clone();
    {
        let beta: Vec<f64> = (0..m).map(|i| a[i] - a[i + m]).collect();
        if beta.iter().any(|&b| b != 0.0) {
            for i in 0..m {
                let kb: f64 = (0..m).map(|j| kernel.at(i, j) * beta[j]).sum();
                grad[i] += kb;
                grad[i + m] -= kb;
            }
        }
    }

    let mut iterations = 0;
    let mut gap;
    loop {
        // i: maximal violator in I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if sign(t) > 0.0 { a[t] < c } else { a[t] > 0.0 };
            if up {
                let v = -sign(t) * grad[t];
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        // j: second-order choice over I_low.
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            let bi = base(i);
            let kii = kernel.at(bi, bi);
            for t in 0..n {
                let low = if sign(t) > 0.0 { a[t] > 0.0 } else { a[t] < c };
                if !low {
                    continue;
                }
                let sg = sign(t) * grad[t];
                if sg >= gmax2 {
                    gmax2 = sg;
                }
                let b = gmax + sg;
                if b > 0.0 {
                    let bt = base(t);
                    let quad = kii + kernel.at(bt, bt) - 2.0 * kernel.at(bi, bt);
                    let quad = if quad > 0.0 { quad } else { TAU };
                    let obj = -(b * b) / quad;
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = gmax + gmax2;
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if gap >= params.tolerance => (i, j),
            _ => break,
        };
        if iterations >= params.max_iterations {
            return Err(AredError::SolverDiverged { iterations });
        }
        iterations += 1;

        let (bi, bj) = (base(i), base(j));
        let (si, sj) = (sign(i), sign(j));
        let kij = kernel.at(bi, bj);
        let quad = kernel.at(bi, bi) + kernel.at(bj, bj) - 2.0 * kij;
        let quad = if quad > 0.0 { quad } else { TAU };
        let (old_i, old_j) = (a[i], a[j]);

        if si != sj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }

        let di = a[i] - old_i;
        let dj = a[j] - old_j;
        // Q_ti = s_t s_i K(t, i); fold the per-point sum before applying signs.
        for u in 0..m {
            let g = si * di * kernel.at(u, bi) + sj * dj * kernel.at(u, bj);
            grad[u] += g;
            grad[u + m] -= g;
        }
    }

    let bias = -rho(&a, &grad, c, m);
    let beta: Vec<f64> = (0..m).map(|i| a[i] - a[i + m]).collect();
    let objective = 0.5 * (0..n).map(|t| a[t] * (grad[t] + p[t])).sum::<f64>();
    Ok(SmoSolution {
        alpha: a,
        beta,
        bias,
        objective,
        iterations,
        kkt_gap: gap.max(0.0),
    })
}

fn rho(a: &[f64], grad: &[f64], c: f64, m: usize) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..2 * m {
        let positive = t < m;
        let yg = if positive { grad[t] } else { -grad[t] };
        if a[t] >= c {
            if positive {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if a[t] <= 0.0 {
            if positive {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (ub + lb)
    }
}
