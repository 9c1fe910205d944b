use ared_core::benchmarks::{benchmark_config, BenchFunction};
use ared_core::controller::{corner_samples, Session};
use ared_core::io;

fn proposals(session: &mut Session, f: BenchFunction, steps: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for _ in 0..steps {
        if session.is_converged() {
            break;
        }
        let coords = session.propose_next().unwrap().sample.coords.clone();
        out.push(coords.iter().map(|c| c.to_bits()).collect());
        session.record_result(f.eval(&coords)).unwrap();
    }
    out
}

fn check_resume(f: BenchFunction, before: usize, after: usize) {
    let config = benchmark_config(f, 42);
    let mut oracle = |c: &[f64]| f.eval(c);
    let initial = corner_samples(&config.domain, &mut oracle);

    let mut straight = Session::start(config.clone(), initial.clone()).unwrap();
    let mut reference = proposals(&mut straight, f, before);
    reference.extend(proposals(&mut straight, f, after));

    let mut first = Session::start(config.clone(), initial.clone()).unwrap();
    let mut resumed = proposals(&mut first, f, before);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    io::save_session(&first, &path).unwrap();
    let mut loaded = io::load_session(&path).unwrap();
    assert_eq!(loaded, first);
    resumed.extend(proposals(&mut loaded, f, after));

    assert_eq!(resumed, reference, "{} proposals diverged after reload", f.name());
    assert_eq!(loaded.archive, straight.archive);

    let rebuilt = Session::replay(config, initial, &straight.measurement_log()).unwrap();
    assert_eq!(rebuilt.archive, straight.archive);
    assert_eq!(rebuilt.model, straight.model);
}

#[test]
fn curve_session_resumes_identically() {
    check_resume(BenchFunction::Gauss2d, 4, 6);
}

#[test]
fn surface_session_resumes_identically() {
    check_resume(BenchFunction::Peaks, 5, 5);
}

#[test]
fn save_mid_proposal_keeps_pending_case() {
    let f = BenchFunction::Surface3d;
    let config = benchmark_config(f, 8);
    let mut oracle = |c: &[f64]| f.eval(c);
    let mut s = Session::start(config.clone(), corner_samples(&config.domain, &mut oracle)).unwrap();
    let pending = s.propose_next().unwrap().clone();
    let text = io::session_to_string(&s).unwrap();
    let mut back = io::session_from_str(&text).unwrap();
    assert_eq!(back.pending.as_ref(), Some(&pending));
    back.record_result(f.eval(&pending.sample.coords)).unwrap();
    s.record_result(f.eval(&pending.sample.coords)).unwrap();
    let a = s.propose_next().unwrap().sample.coords.clone();
    let b = back.propose_next().unwrap().sample.coords.clone();
    assert_eq!(a, b);
}
