use std::fs;

use proptest::prelude::*;
use unlearn_core::data::{
    generate_linear, generate_logistic, load_csv, load_model, save_csv, save_model, Dataset, DatasetMeta,
    ModelFile, RemovalInfo,
};
use unlearn_core::faer::{Col, Mat};
use unlearn_core::rng::stream;
use unlearn_core::{Error, ModelSpec};

#[test]
fn design_column_variance_is_one_over_n() {
    let (n, p) = (500, 400);
    let ds = generate_logistic(n, p, &mut stream(1)).unwrap();
    let total: f64 = (0..p).map(|k| (0..n).map(|i| ds.x[(i, k)].powi(2)).sum::<f64>()).sum();
    let pooled = total / (n * p) as f64;
    let want = 1.0 / n as f64;
    assert!((pooled - want).abs() <= 0.05 * want, "pooled {pooled} vs {want}");
}

#[test]
fn linear_predictor_variance_is_p_over_n() {
    // Conditional on β*, x ~ N(0, I/n) gives var(xᵀβ*) = ‖β*‖²/n ≈ p/n.
    let (n, p) = (200, 100);
    let mut acc = Vec::new();
    for seed in 0..40 {
        let ds = generate_logistic(n, p, &mut stream(seed)).unwrap();
        let b = ds.beta_star.as_ref().unwrap();
        let z = &ds.x * b;
        acc.extend(z.iter().copied());
    }
    let mean = acc.iter().sum::<f64>() / acc.len() as f64;
    let var = acc.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (acc.len() - 1) as f64;
    let want = p as f64 / n as f64;
    assert!((var - want).abs() <= 0.05 * want, "var {var} vs {want}");
}

#[test]
fn linear_response_variance() {
    let (n, p, sigma) = (400, 100, 0.8);
    let mut ys = Vec::new();
    for seed in 0..40 {
        ys.extend(generate_linear(n, p, sigma, &mut stream(100 + seed)).unwrap().y);
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (ys.len() - 1) as f64;
    let want = sigma * sigma + p as f64 / n as f64;
    assert!((var - want).abs() <= 0.05 * want, "var {var} vs {want}");
}

#[test]
fn csv_round_trip_is_exact() {
    let ds = generate_linear(50, 10, 1.0, &mut stream(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    save_csv(&ds, &path).unwrap();
    let back = load_csv(&path).unwrap();
    assert_eq!(back.y, ds.y);
    assert_eq!(back.x, ds.x);
    let header = fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("y,x1,x2,"));
}

#[test]
fn csv_errors_are_structured() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert!(matches!(load_csv(&empty), Err(Error::Parse { .. } | Error::Format { .. })));

    let header_only = dir.path().join("h.csv");
    fs::write(&header_only, "y,x1,x2\n").unwrap();
    let ds = load_csv(&header_only).unwrap();
    assert_eq!(ds.n(), 0);
    assert!(ds.objective(ModelSpec::squared_ridge(1.0).unwrap()).is_err());

    let ragged = dir.path().join("r.csv");
    fs::write(&ragged, "y,x1,x2\n1,2,3\n1,2\n").unwrap();
    match load_csv(&ragged) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let text = dir.path().join("t.csv");
    fs::write(&text, "y,x1\n1,abc\n").unwrap();
    assert!(matches!(load_csv(&text), Err(Error::Parse { line: 2, .. })));
}

fn sample_model(p: usize) -> ModelFile {
    ModelFile {
        spec: ModelSpec::logistic_ridge(0.5).unwrap(),
        n: 30,
        seed: Some(17),
        lineage: "logistic n=30 p=3 seed=17".into(),
        beta: Col::from_fn(p, |k| 1.0 / (k as f64 + 3.0)),
        grad_norm: 1.25e-13,
        iterations: 6,
        converged: true,
        removal: Some(RemovalInfo {
            removed: vec![2, 9],
            steps: 2,
            noise_scale: 0.125,
            epsilon: 0.1,
        }),
    }
}

#[test]
fn model_round_trip_and_compatibility() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let model = sample_model(3);
    save_model(&model, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), model);
    let text = fs::read_to_string(&path).unwrap();
    for key in ["lambda = ", "nu = ", "loss = logistic", "seed = 17"] {
        assert!(text.contains(key), "missing {key}");
    }
    let ds = generate_logistic(30, 4, &mut stream(1)).unwrap();
    assert!(matches!(model.check_compatible(&ds), Err(Error::DimensionMismatch { .. })));
    let plain = ModelFile {
        seed: None,
        removal: None,
        ..model
    };
    save_model(&plain, &path).unwrap();
    assert_eq!(load_model(&path).unwrap(), plain);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn csv_round_trips_arbitrary_finite_values(
        rows in 1usize..6,
        cols in 1usize..5,
        vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 30),
    ) {
        let x = Mat::from_fn(rows, cols, |i, k| vals[(i * cols + k) % vals.len()]);
        let y: Vec<f64> = (0..rows).map(|i| vals[(i * 7 + 3) % vals.len()]).collect();
        let ds = Dataset::new(x, y, DatasetMeta { seed: None, generator: "test".into() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_csv(&ds, &path).unwrap();
        let back = load_csv(&path).unwrap();
        prop_assert_eq!(back.y, ds.y);
        prop_assert_eq!(back.x, ds.x);
    }

    #[test]
    fn model_round_trips_arbitrary_coefficients(
        beta in prop::collection::vec(-1e6f64..1e6, 1..8),
        lambda in 1e-3f64..1e3,
        seed in any::<u64>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let model = ModelFile {
            spec: ModelSpec::squared_ridge(lambda).unwrap(),
            seed: Some(seed),
            beta: Col::from_fn(beta.len(), |k| beta[k]),
            removal: None,
            ..sample_model(1)
        };
        save_model(&model, &path).unwrap();
        prop_assert_eq!(load_model(&path).unwrap(), model);
    }
}
