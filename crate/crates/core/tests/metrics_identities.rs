mod common;

use ared_core::metrics::{error_report, pearson_r, ErrorReference};
use common::{naive_mae, naive_mape, naive_r, random_series};

#[test]
fn report_matches_naive_formulas() {
    for (predicted, actual) in random_series(100, 99) {
        let report = error_report(&predicted, &actual, ErrorReference::VerificationSet).unwrap();
        assert!((report.mae - naive_mae(&predicted, &actual)).abs() <= 1e-10);
        assert!((report.mape.unwrap() - naive_mape(&predicted, &actual)).abs() <= 1e-10);
        assert!((report.r - naive_r(&predicted, &actual)).abs() <= 1e-10);
    }
}

#[test]
fn correlation_identities() {
    for (x, _) in random_series(100, 5) {
        if x.len() < 2 {
            continue;
        }
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson_r(&x, &x).unwrap().value - 1.0).abs() <= 1e-12);
        assert!((pearson_r(&x, &neg).unwrap().value + 1.0).abs() <= 1e-12);
    }
}

#[test]
fn small_worked_example() {
    let r = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap().value;
    assert!((r - 3.0 / (2.0f64 * 42.0 / 9.0).sqrt()).abs() < 1e-12);
    let report = error_report(&[1.1, 1.8], &[1.0, 2.0], ErrorReference::VerificationSet).unwrap();
    assert!((report.mae - 0.15).abs() < 1e-12);
    assert!((report.mape.unwrap() - 10.0).abs() < 1e-9);
}
