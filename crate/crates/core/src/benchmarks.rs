//! Analytic test functions, baseline designs, verification sets and the
//! adaptive-vs-baseline comparison runner.

use serde::{Deserialize, Serialize};

use crate::controller::{corner_samples, run_autonomous, SessionConfig};
use crate::domain::{Domain, Provenance, Sample};
use crate::error::Result;
use crate::metrics::{error_report, ErrorReference, ErrorReport};
use crate::surrogate::{self, SvrModel};

/// How the amplitude constants enter the two-peak Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeForm {
    /// `c_i = A_i`: the constants are the peak heights. Two maxima near 0.35
    /// and 0.67 with a minimum near 0.47.
    Peak,
    /// `c_i = A_i * SIG_i / sqrt(2 pi)`. With the default constants this curve
    /// has a single maximum near 0.675 and only a shoulder at the first peak.
    ScaledBySigma,
}

/// Constants of the two-peak Gaussian curve on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimodalGaussianParams {
    pub form: AmplitudeForm,
    pub a1: f64,
    pub a2: f64,
    pub m1: f64,
    pub m2: f64,
    pub sig1: f64,
    pub sig2: f64,
    pub baseline: f64,
    /// Number of scatter points used to draw the reference curve.
    pub scatter_count: usize,
}

impl Default for BimodalGaussianParams {
    fn default() -> Self {
        Self {
            form: AmplitudeForm::Peak,
            a1: 0.2,
            a2: 0.3,
            m1: 0.3126,
            m2: 0.6758,
            sig1: 0.1,
            sig2: 0.2,
            baseline: 0.0002,
            scatter_count: 10_000,
        }
    }
}

impl BimodalGaussianParams {
    fn coefficient(&self, a: f64, sig: f64) -> f64 {
        match self.form {
            AmplitudeForm::Peak => a,
            AmplitudeForm::ScaledBySigma => a * sig / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    pub fn c1(&self) -> f64 {
        self.coefficient(self.a1, self.sig1)
    }

    pub fn c2(&self) -> f64 {
        self.coefficient(self.a2, self.sig2)
    }

    pub fn k1(&self) -> f64 {
        2.0 * self.sig1 * self.sig1
    }

    pub fn k2(&self) -> f64 {
        2.0 * self.sig2 * self.sig2
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.baseline
            + self.c1() * (-(x - self.m1).powi(2) / self.k1()).exp()
            + self.c2() * (-(x - self.m2).powi(2) / self.k2()).exp()
    }
}

pub fn bimodal_gaussian(x: f64) -> f64 {
    BimodalGaussianParams::default().eval(x)
}

/// `50 y exp(-x^2 - y^2)` on `[-3, 3]^2`.
pub fn bimodal_surface(x: f64, y: f64) -> f64 {
    y * (-x * x - y * y).exp() * 50.0
}

/// The classic three-peak, three-pit test surface.
pub fn peaks(x: f64, y: f64) -> f64 {
    3.0 * (1.0 - x).powi(2) * (-x * x - (y + 1.0).powi(2)).exp()
        - 10.0 * (x / 5.0 - x.powi(3) - y.powi(5)) * (-x * x - y * y).exp()
        - (-(x + 1.0).powi(2) - y * y).exp() / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchFunction {
    Gauss2d,
    Surface3d,
    Peaks,
}

impl BenchFunction {
    pub const ALL: [BenchFunction; 3] = [
        BenchFunction::Gauss2d,
        BenchFunction::Surface3d,
        BenchFunction::Peaks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchFunction::Gauss2d => "gauss2d",
            BenchFunction::Surface3d => "surface3d",
            BenchFunction::Peaks => "peaks",
        }
    }

    pub fn domain(self) -> Domain {
        let bounds: &[(f64, f64)] = match self {
            BenchFunction::Gauss2d => &[(0.0, 1.0)],
            BenchFunction::Surface3d | BenchFunction::Peaks => &[(-3.0, 3.0), (-3.0, 3.0)],
        };
        Domain::from_bounds(bounds).expect("benchmark domains are valid")
    }

    pub fn eval(self, coords: &[f64]) -> f64 {
        match self {
            BenchFunction::Gauss2d => bimodal_gaussian(coords[0]),
            BenchFunction::Surface3d => bimodal_surface(coords[0], coords[1]),
            BenchFunction::Peaks => peaks(coords[0], coords[1]),
        }
    }

    /// Baseline design family matched against adaptive runs.
    pub fn baseline_kind(self) -> DesignKind {
        match self {
            BenchFunction::Gauss2d => DesignKind::SfeEquidistant,
            _ => DesignKind::Factorial,
        }
    }

    /// MAPE is meaningless where the surface crosses zero on a whole line.
    pub fn reports_mape(self) -> bool {
        self == BenchFunction::Gauss2d
    }
}

impl std::str::FromStr for BenchFunction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        BenchFunction::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown benchmark function `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    SfeEquidistant,
    Factorial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DesignSpec {
    /// `count` evenly spaced points over a single variable, endpoints included.
    SfeEquidistant { count: usize },
    /// Full grid with the given number of levels per axis.
    Factorial { levels: Vec<usize> },
}

impl DesignSpec {
    pub fn case_count(&self) -> usize {
        match self {
            DesignSpec::SfeEquidistant { count } => *count,
            DesignSpec::Factorial { levels } => levels.iter().product(),
        }
    }

    /// Smallest admissible design with at least `cases` points. Factorial
    /// grids are `k x k` or `k x (k+1)`.
    pub fn smallest_at_least(kind: DesignKind, dims: usize, cases: usize) -> Self {
        match kind {
            DesignKind::SfeEquidistant => DesignSpec::SfeEquidistant {
                count: cases.max(2),
            },
            DesignKind::Factorial if dims == 2 => {
                let mut k: usize = 2;
                loop {
                    if k * k >= cases {
                        return DesignSpec::Factorial { levels: vec![k, k] };
                    }
                    if k * (k + 1) >= cases {
                        return DesignSpec::Factorial {
                            levels: vec![k, k + 1],
                        };
                    }
                    k += 1;
                }
            }
            DesignKind::Factorial => {
                let mut k: usize = 2;
                while k.pow(dims as u32) < cases {
                    k += 1;
                }
                DesignSpec::Factorial {
                    levels: vec![k; dims],
                }
            }
        }
    }
}

fn levels(low: f64, high: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| {
            if i + 1 == count {
                high
            } else {
                low + (high - low) * i as f64 / (count - 1) as f64
            }
        })
        .collect()
}

/// Coordinates of a baseline design, endpoints included. Factorial points are
/// ordered with the first axis varying slowest.
pub fn design_cases(spec: &DesignSpec, domain: &Domain) -> Vec<Vec<f64>> {
    match spec {
        DesignSpec::SfeEquidistant { count } => {
            let r = &domain.ivs[0];
            levels(r.low, r.high, *count).into_iter().map(|x| vec![x]).collect()
        }
        DesignSpec::Factorial { levels: counts } => {
            let axes: Vec<Vec<f64>> = domain
                .ivs
                .iter()
                .zip(counts)
                .map(|(r, &k)| levels(r.low, r.high, k))
                .collect();
            let mut points = vec![Vec::new()];
            for axis in &axes {
                points = points
                    .into_iter()
                    .flat_map(|p| {
                        axis.iter().map(move |&x| {
                            let mut q = p.clone();
                            q.push(x);
                            q
                        })
                    })
                    .collect();
            }
            points
        }
    }
}

/// Held-out evaluation points with their exact responses: 50 points along
/// the curve, or an 11 x 11 grid for surfaces.
pub fn verification_set(function: BenchFunction) -> Vec<(Vec<f64>, f64)> {
    let domain = function.domain();
    let spec = match function {
        BenchFunction::Gauss2d => DesignSpec::SfeEquidistant { count: 50 },
        _ => DesignSpec::Factorial {
            levels: vec![11, 11],
        },
    };
    design_cases(&spec, &domain)
        .into_iter()
        .map(|c| {
            let y = function.eval(&c);
            (c, y)
        })
        .collect()
}

/// Errors of `model` over a verification set.
pub fn verification_report(model: &SvrModel, set: &[(Vec<f64>, f64)]) -> Result<ErrorReport> {
    let predicted: Vec<f64> = set.iter().map(|(c, _)| model.predict(c)).collect();
    let actual: Vec<f64> = set.iter().map(|(_, y)| *y).collect();
    error_report(&predicted, &actual, ErrorReference::VerificationSet)
}

/// Fits the standard surrogate pipeline to a fixed design.
pub fn fit_design(
    function: BenchFunction,
    points: &[Vec<f64>],
    config: &SessionConfig,
    seed: u64,
) -> Result<SvrModel> {
    use rand::SeedableRng;
    let samples: Vec<Sample> = points
        .iter()
        .enumerate()
        .map(|(i, c)| Sample {
            coords: c.clone(),
            value: Some(function.eval(c)),
            provenance: Provenance::Initial,
            sequence_index: i,
        })
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Ok(surrogate::refit(None, &config.domain, &samples, &config.svr_config, &mut rng)?.model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSource {
    Ared,
    Sfe,
    Fe,
}

impl RowSource {
    pub fn label(self, trial: usize) -> String {
        let prefix = match self {
            RowSource::Ared => "ARED",
            RowSource::Sfe => "SFE",
            RowSource::Fe => "FE",
        };
        format!("{prefix}-{trial}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub trial: usize,
    pub case_count: usize,
    pub source: RowSource,
    pub mae: f64,
    pub mape: Option<f64>,
    pub r: f64,
}

/// Per-trial details beyond the table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDetail {
    pub trial: usize,
    pub seed: u64,
    pub converged: bool,
    /// Why the session stopped early, if it did.
    pub failure: Option<String>,
    pub drawn: usize,
    pub feedback: usize,
    pub ared_archive: Vec<Sample>,
    pub baseline: DesignSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub function: BenchFunction,
    pub rows: Vec<ComparisonRow>,
    pub trials: Vec<TrialDetail>,
}

impl ComparisonTable {
    pub fn rows_for(&self, source: RowSource) -> impl Iterator<Item = &ComparisonRow> {
        self.rows.iter().filter(move |r| r.source == source)
    }
}

/// Seed of trial `trial` (1-based) derived from the run seed.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(trial as u64)
        .rotate_left(17)
}

/// Default session config used by the benchmark runner.
pub fn benchmark_config(function: BenchFunction, seed: u64) -> SessionConfig {
    SessionConfig::for_domain(function.domain(), seed)
}

/// One adaptive trial and its matched baseline.
pub fn run_trial(
    function: BenchFunction,
    trial: usize,
    seed: u64,
    configure: &dyn Fn(&mut SessionConfig),
) -> Result<(ComparisonRow, ComparisonRow, TrialDetail)> {
    let domain = function.domain();
    let tseed = trial_seed(seed, trial);
    let mut config = benchmark_config(function, tseed);
    configure(&mut config);
    let mut oracle = |c: &[f64]| function.eval(c);
    let initial = corner_samples(&domain, &mut oracle);
    let report = run_autonomous(config.clone(), initial, &mut oracle)?;
    let verification = verification_set(function);

    let session = &report.session;
    let ared_count = session.archive.len();
    let model = session
        .model
        .as_ref()
        .expect("sessions always hold a model after start");
    let ared = verification_report(model, &verification)?;

    let baseline = DesignSpec::smallest_at_least(function.baseline_kind(), domain.dim(), ared_count);
    let points = design_cases(&baseline, &domain);
    let base_model = fit_design(function, &points, &config, tseed ^ 0xBA5E)?;
    let base = verification_report(&base_model, &verification)?;

    let mape = |r: &ErrorReport| if function.reports_mape() { r.mape } else { None };
    let source = match function.baseline_kind() {
        DesignKind::SfeEquidistant => RowSource::Sfe,
        DesignKind::Factorial => RowSource::Fe,
    };
    let counts = report.counts;
    Ok((
        ComparisonRow {
            trial,
            case_count: ared_count,
            source: RowSource::Ared,
            mae: ared.mae,
            mape: mape(&ared),
            r: ared.r,
        },
        ComparisonRow {
            trial,
            case_count: baseline.case_count(),
            source,
            mae: base.mae,
            mape: mape(&base),
            r: base.r,
        },
        TrialDetail {
            trial,
            seed: tseed,
            converged: report.converged,
            failure: report.failure.as_ref().map(|e| e.to_string()),
            drawn: counts.drawn,
            feedback: counts.feedback,
            ared_archive: session.archive.clone(),
            baseline,
        },
    ))
}

/// Runs `trials` adaptive sessions with derived seeds and pairs each with a
/// baseline design of matching size.
pub fn run_comparison(function: BenchFunction, trials: usize, seed: u64) -> Result<ComparisonTable> {
    run_comparison_with(function, trials, seed, &|_| {})
}

/// [`run_comparison`] with a hook to adjust each trial's session config.
pub fn run_comparison_with(
    function: BenchFunction,
    trials: usize,
    seed: u64,
    configure: &dyn Fn(&mut SessionConfig),
) -> Result<ComparisonTable> {
    let mut table = ComparisonTable {
        function,
        rows: Vec::with_capacity(2 * trials),
        trials: Vec::with_capacity(trials),
    };
    for trial in 1..=trials {
        let (ared, base, detail) = run_trial(function, trial, seed, configure)?;
        table.rows.push(ared);
        table.rows.push(base);
        table.trials.push(detail);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sig_figs(x: f64, figs: i32) -> f64 {
        let mag = x.abs().log10().floor() as i32;
        let scale = 10f64.powi(figs - 1 - mag);
        (x * scale).round() / scale
    }

    #[test]
    fn gaussian_derived_constants() {
        let p = BimodalGaussianParams::default();
        assert_eq!(p.k1(), 2.0 * 0.1 * 0.1);
        assert_eq!(p.k2(), 2.0 * 0.2 * 0.2);
        assert_eq!((p.c1(), p.c2()), (0.2, 0.3));
        let scaled = BimodalGaussianParams {
            form: AmplitudeForm::ScaledBySigma,
            ..p
        };
        assert_relative_eq!(scaled.c1(), 0.02 / (2.0 * std::f64::consts::PI).sqrt());
    }

    fn local_extrema(f: impl Fn(f64) -> f64) -> Vec<f64> {
        let xs: Vec<f64> = (0..=10_000).map(|i| i as f64 / 10_000.0).collect();
        let v: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        (1..10_000)
            .filter(|&i| (v[i] - v[i - 1]) * (v[i + 1] - v[i]) < 0.0)
            .map(|i| xs[i])
            .collect()
    }

    #[test]
    fn scaled_form_is_unimodal() {
        let p = BimodalGaussianParams {
            form: AmplitudeForm::ScaledBySigma,
            ..BimodalGaussianParams::default()
        };
        assert_eq!(local_extrema(|x| p.eval(x)), vec![0.6751]);
        assert_relative_eq!(p.eval(0.0), 3.396_440_249_850_67e-4, max_relative = 1e-12);
        assert_relative_eq!(p.eval(1.0), 6.633_929_871_510_663e-3, max_relative = 1e-12);
    }

    #[test]
    fn gaussian_extrema_positions() {
        // Sign changes of the finite-difference derivative near the quoted
        // extremum positions.
        let h = 1e-4;
        let slope = |x: f64| bimodal_gaussian(x + h) - bimodal_gaussian(x - h);
        assert!(slope(0.30) > 0.0 && slope(0.36) < 0.0);
        assert!(slope(0.44) < 0.0 && slope(0.49) > 0.0);
        assert!(slope(0.65) > 0.0 && slope(0.70) < 0.0);
        assert_eq!(local_extrema(bimodal_gaussian), vec![0.3462, 0.4704, 0.6744]);
    }

    #[test]
    fn gaussian_endpoint_anchors() {
        // Frozen from direct evaluation of the implemented formula.
        assert_relative_eq!(bimodal_gaussian(0.0), 2.705_381_969_888_043e-3, max_relative = 1e-12);
        assert_relative_eq!(bimodal_gaussian(1.0), 8.083_735_267_009_577e-2, max_relative = 1e-12);
    }

    #[test]
    fn surface_values() {
        assert_eq!(sig_figs(bimodal_surface(-3.0, -3.0), 3), -2.28e-6);
        assert_eq!(sig_figs(bimodal_surface(3.0, 3.0), 3), 2.28e-6);
        assert_eq!(sig_figs(bimodal_surface(-3.0, 3.0), 3), 2.28e-6);
        let peak = bimodal_surface(0.0, 0.5f64.sqrt());
        assert_relative_eq!(peak, 50.0 * 0.5f64.sqrt() * (-0.5f64).exp(), epsilon = 1e-12);
        assert!((peak - 21.444).abs() < 1e-3);
        // No grid point beats the analytic maximum.
        for i in 0..=600 {
            for j in 0..=600 {
                let x = -3.0 + i as f64 * 0.01;
                let y = -3.0 + j as f64 * 0.01;
                assert!(bimodal_surface(x, y) <= peak + 1e-12);
            }
        }
    }

    #[test]
    fn surface_is_odd_in_y() {
        for i in 0..=20 {
            for j in 0..=20 {
                let x = -3.0 + 0.3 * i as f64;
                let y = -3.0 + 0.3 * j as f64;
                assert!((bimodal_surface(x, -y) + bimodal_surface(x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn peaks_values() {
        assert_eq!(sig_figs(peaks(-3.0, -3.0), 3), 6.67e-5);
        assert_eq!(sig_figs(peaks(3.0, 3.0), 2), 4.1e-5);
        assert_relative_eq!(peaks(0.0, 0.0), 8.0 / 3.0 * (-1.0f64).exp(), epsilon = 1e-12);
        assert!((peaks(0.0, 0.0) - 0.9810).abs() < 1e-4);
    }

    #[test]
    fn design_examples() {
        let unit = Domain::from_bounds(&[(0.0, 1.0)]).unwrap();
        assert_eq!(
            design_cases(&DesignSpec::SfeEquidistant { count: 3 }, &unit),
            vec![vec![0.0], vec![0.5], vec![1.0]]
        );
        let square = BenchFunction::Peaks.domain();
        let grid = design_cases(
            &DesignSpec::Factorial {
                levels: vec![6, 6],
            },
            &square,
        );
        assert_eq!(grid.len(), 36);
        for corner in square.corners() {
            assert!(grid.contains(&corner));
        }
        assert_relative_eq!(grid[1][1] - grid[0][1], 1.2, epsilon = 1e-12);
        let corners = design_cases(
            &DesignSpec::Factorial {
                levels: vec![2, 2],
            },
            &square,
        );
        assert_eq!(corners, square.corners());
    }

    #[test]
    fn baseline_sizes_match_counts() {
        let fe = |n| DesignSpec::smallest_at_least(DesignKind::Factorial, 2, n).case_count();
        assert_eq!(fe(25), 25);
        assert_eq!(fe(28), 30);
        assert_eq!(fe(33), 36);
        assert_eq!(fe(36), 36);
        assert_eq!(fe(41), 42);
        let sfe = DesignSpec::smallest_at_least(DesignKind::SfeEquidistant, 1, 13);
        assert_eq!(sfe.case_count(), 13);
    }

    #[test]
    fn verification_sets() {
        let curve = verification_set(BenchFunction::Gauss2d);
        assert_eq!(curve.len(), 50);
        assert_eq!(curve[0].0, vec![0.0]);
        assert_eq!(curve[49].0, vec![1.0]);
        let grid = verification_set(BenchFunction::Surface3d);
        assert_eq!(grid.len(), 121);
        for (c, y) in grid.iter().chain(&curve) {
            let f = if c.len() == 1 {
                BenchFunction::Gauss2d
            } else {
                BenchFunction::Surface3d
            };
            assert_eq!(*y, f.eval(c));
        }
        // Grid maximum sits at the node nearest (0, 1/sqrt 2).
        let best = grid
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(best.0, vec![0.0, 0.6000000000000001]);
    }

    #[test]
    fn function_names_parse() {
        for f in BenchFunction::ALL {
            assert_eq!(f.name().parse::<BenchFunction>().unwrap(), f);
        }
        assert!("nope".parse::<BenchFunction>().is_err());
    }
}
