//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ared_core::domain::{Domain, Provenance, Sample};
use ared_core::surrogate::SvrHyperparams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn samples(points: &[(Vec<f64>, f64)]) -> Vec<Sample> {
    points
        .iter()
        .enumerate()
        .map(|(i, (c, y))| Sample {
            coords: c.clone(),
            value: Some(*y),
            provenance: Provenance::Initial,
            sequence_index: i,
        })
        .collect()
}

/// Exact solution of the epsilon-SVR dual, found by enumerating which side of
/// the tube (or box) every point sits on and solving the resulting linear
/// system. Only practical for a handful of points.
pub struct OracleSolution {
    pub beta: Vec<f64>,
    pub bias: f64,
    /// Maximization-form dual objective.
    pub objective: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Zero,
    PosFree,
    NegFree,
    PosBound,
    NegBound,
}

const SIDES: [Side; 5] = [
    Side::Zero,
    Side::PosFree,
    Side::NegFree,
    Side::PosBound,
    Side::NegBound,
];

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

pub fn oracle_svr(kernel: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> Option<OracleSolution> {
    let m = y.len();
    let tol = 1e-9 * (1.0 + c);
    let total = 5usize.pow(m as u32);
    let mut sides = vec![Side::Zero; m];
    for code in 0..total {
        let mut rest = code;
        for s in sides.iter_mut() {
            *s = SIDES[rest % 5];
            rest /= 5;
        }
        let free: Vec<usize> = (0..m)
            .filter(|&i| matches!(sides[i], Side::PosFree | Side::NegFree))
            .collect();
        if free.is_empty() {
            continue;
        }
        let mut beta: Vec<f64> = sides
            .iter()
            .map(|s| match s {
                Side::PosBound => c,
                Side::NegBound => -c,
                _ => 0.0,
            })
            .collect();
        let k = free.len();
        let mut a = vec![vec![0.0; k + 1]; k + 1];
        let mut rhs = vec![0.0; k + 1];
        for (r, &i) in free.iter().enumerate() {
            for (col, &j) in free.iter().enumerate() {
                a[r][col] = kernel[i][j];
            }
            a[r][k] = 1.0;
            let sigma = if sides[i] == Side::PosFree { 1.0 } else { -1.0 };
            let fixed: f64 = (0..m).map(|j| kernel[i][j] * beta[j]).sum();
            rhs[r] = y[i] - sigma * eps - fixed;
        }
        for col in 0..k {
            a[k][col] = 1.0;
        }
        rhs[k] = -beta.iter().sum::<f64>();
        let Some(x) = solve_linear(a, rhs) else {
            continue;
        };
        let bias = x[k];
        for (r, &i) in free.iter().enumerate() {
            beta[i] = x[r];
        }
        let in_range = free.iter().all(|&i| match sides[i] {
            Side::PosFree => beta[i] > -tol && beta[i] < c + tol,
            _ => beta[i] < tol && beta[i] > -c - tol,
        });
        if !in_range {
            continue;
        }
        let kkt = (0..m).all(|i| {
            let f: f64 = (0..m).map(|j| kernel[i][j] * beta[j]).sum::<f64>() + bias;
            let r = y[i] - f;
            match sides[i] {
                Side::Zero => r.abs() <= eps + tol,
                Side::PosFree => (r - eps).abs() <= tol,
                Side::NegFree => (r + eps).abs() <= tol,
                Side::PosBound => r >= eps - tol,
                Side::NegBound => r <= -eps + tol,
            }
        });
        if !kkt {
            continue;
        }
        let bias = kkt_bias(kernel, y, &beta, c, eps, tol).unwrap_or(bias);
        let quad: f64 = (0..m)
            .map(|i| (0..m).map(|j| beta[i] * kernel[i][j] * beta[j]).sum::<f64>())
            .sum();
        let objective = y.iter().zip(&beta).map(|(yi, bi)| yi * bi).sum::<f64>()
            - eps * beta.iter().map(|b| b.abs()).sum::<f64>()
            - 0.5 * quad;
        return Some(OracleSolution {
            beta,
            bias,
            objective,
        });
    }
    None
}

/// The bias is unique when some coefficient lies strictly inside the box.
/// Otherwise every value in the KKT-feasible interval is optimal, and the
/// convention is its midpoint.
fn kkt_bias(kernel: &[Vec<f64>], y: &[f64], beta: &[f64], c: f64, eps: f64, tol: f64) -> Option<f64> {
    let m = y.len();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut free = Vec::new();
    for i in 0..m {
        let g = y[i] - (0..m).map(|j| kernel[i][j] * beta[j]).sum::<f64>();
        let b = beta[i];
        if b.abs() <= tol {
            lo = lo.max(g - eps);
            hi = hi.min(g + eps);
        } else if b >= c - tol {
            hi = hi.min(g - eps);
        } else if b <= -c + tol {
            lo = lo.max(g + eps);
        } else if b > 0.0 {
            free.push(g - eps);
        } else {
            free.push(g + eps);
        }
    }
    if !free.is_empty() {
        Some(free.iter().sum::<f64>() / free.len() as f64)
    } else if lo.is_finite() && hi.is_finite() {
        Some(0.5 * (lo + hi))
    } else {
        None
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// A dataset expressed in the solver's own space: inputs mapped to the unit
/// box, responses to zero mean and unit population standard deviation.
pub struct ScaledProblem {
    pub unit: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub mean: f64,
    pub scale: f64,
}

impl ScaledProblem {
    pub fn new(domain: &Domain, points: &[(Vec<f64>, f64)]) -> Self {
        let unit = points
            .iter()
            .map(|(c, _)| {
                c.iter()
                    .zip(&domain.ivs)
                    .map(|(x, r)| (x - r.low) / (r.high - r.low))
                    .collect()
            })
            .collect();
        let n = points.len() as f64;
        let mean = points.iter().map(|p| p.1).sum::<f64>() / n;
        let scale = (points.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n).sqrt();
        let targets = points.iter().map(|p| (p.1 - mean) / scale).collect();
        Self {
            unit,
            targets,
            mean,
            scale,
        }
    }

    pub fn kernel(&self, gamma: f64) -> Vec<Vec<f64>> {
        self.unit
            .iter()
            .map(|a| self.unit.iter().map(|b| rbf(a, b, gamma)).collect())
            .collect()
    }

    pub fn predict(&self, domain: &Domain, sol: &OracleSolution, gamma: f64, x: &[f64]) -> f64 {
        let u: Vec<f64> = x
            .iter()
            .zip(&domain.ivs)
            .map(|(x, r)| (x - r.low) / (r.high - r.low))
            .collect();
        let z: f64 = self
            .unit
            .iter()
            .zip(&sol.beta)
            .map(|(p, b)| b * rbf(p, &u, gamma))
            .sum::<f64>()
            + sol.bias;
        self.mean + self.scale * z
    }
}

pub struct OracleCase {
    pub name: String,
    pub domain: Domain,
    pub points: Vec<(Vec<f64>, f64)>,
    pub hp: SvrHyperparams,
}

/// Ten small regression problems with fixed hyperparameters: assorted sizes,
/// dimensions, smooth and rough responses, loose and tight boxes.
pub fn oracle_cases() -> Vec<OracleCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut cases = Vec::new();
    let line = Domain::from_bounds(&[(0.0, 1.0)]).unwrap();
    let square = Domain::from_bounds(&[(-3.0, 3.0), (-3.0, 3.0)]).unwrap();
    let settings: [(usize, usize, f64, f64, f64); 9] = [
        // (dims, points, C, gamma, epsilon)
        (1, 3, 10.0, 1.0, 0.05),
        (1, 5, 100.0, 5.0, 0.01),
        (1, 6, 1.0, 2.0, 0.1),
        (1, 8, 1000.0, 10.0, 0.01),
        (1, 7, 0.5, 0.5, 0.02),
        (2, 4, 10.0, 1.0, 0.05),
        (2, 6, 100.0, 3.0, 0.01),
        (2, 8, 5.0, 2.0, 0.05),
        (2, 7, 0.3, 1.0, 0.1),
    ];
    for (k, &(dims, m, c, gamma, eps)) in settings.iter().enumerate() {
        let domain = if dims == 1 { &line } else { &square };
        let points: Vec<(Vec<f64>, f64)> = (0..m)
            .map(|_| {
                let x: Vec<f64> = domain
                    .ivs
                    .iter()
                    .map(|r| rng.gen_range(r.low..=r.high))
                    .collect();
                let y = if dims == 1 {
                    (6.0 * x[0]).sin() + 0.3 * rng.gen_range(-1.0..1.0)
                } else {
                    ared_core::benchmarks::peaks(x[0], x[1]) + rng.gen_range(-0.5..0.5)
                };
                (x, y)
            })
            .collect();
        cases.push(OracleCase {
            name: format!("random-{k}"),
            domain: domain.clone(),
            points,
            hp: SvrHyperparams {
                c,
                gamma,
                epsilon: eps,
            },
        });
    }
    let grid = [-3.0, 0.0, 3.0];
    let mut points: Vec<(Vec<f64>, f64)> = grid
        .iter()
        .flat_map(|&x| grid.iter().map(move |&y| vec![x, y]))
        .filter(|p| p != &vec![0.0, 0.0])
        .map(|p| {
            let v = ared_core::benchmarks::bimodal_surface(p[0], p[1]);
            (p, v)
        })
        .collect();
    points[0].0 = vec![-1.0, 0.5];
    points[0].1 = ared_core::benchmarks::bimodal_surface(-1.0, 0.5);
    cases.push(OracleCase {
        name: "bimodal-surface".into(),
        domain: square,
        points,
        hp: SvrHyperparams {
            c: 10.0,
            gamma: 1.0,
            epsilon: 0.01,
        },
    });
    cases
}

pub fn naive_mae(p: &[f64], a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - a[i]).abs();
    }
    s / p.len() as f64
}

pub fn naive_mape(p: &[f64], a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += ((p[i] - a[i]) / a[i]).abs();
    }
    100.0 * s / p.len() as f64
}

/// Textbook sum-of-products form of the correlation coefficient.
pub fn naive_r(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// `count` random paired series of random length with no zero actuals.
pub fn random_series(count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(2..60);
            let offset: f64 = rng.gen_range(-5.0..5.0);
            let actual: Vec<f64> = (0..n)
                .map(|_| {
                    let v: f64 = rng.gen_range(0.1..10.0);
                    if rng.gen_bool(0.5) {
                        v + offset.abs()
                    } else {
                        -v - offset.abs()
                    }
                })
                .collect();
            let predicted = actual
                .iter()
                .map(|a| a + rng.gen_range(-2.0..2.0))
                .collect();
            (predicted, actual)
        })
        .collect()
}
