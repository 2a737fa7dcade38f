use hmgcp::domain::{load_dataset, save_dataset, Domain, TaskKind};
use hmgcp::experiment::preset;
use hmgcp::inference::{fit, posterior_bands, FitConfig};
use hmgcp::kernel::{LmcHyperparams, RbfParams};
use hmgcp::quadrature::gauss_legendre;
use hmgcp::rng::{stream_indexed, Stream};
use hmgcp::simulate::{simulate_dataset, thin_poisson, SimConfig};
use hmgcp::special::sigmoid;
use hmgcp::Error;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn simulated_dataset_round_trips_through_files() {
    let p = preset("paper-5.1-d1").unwrap();
    let (ds, truth) = simulate_dataset(&p.sim, 7).unwrap();
    assert_eq!(ds.num_tasks(), 3);
    assert_eq!(
        ds.kinds(),
        vec![
            TaskKind::Regression,
            TaskKind::Classification,
            TaskKind::PointProcess
        ]
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dataset.json");
    save_dataset(&ds, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(truth.functions.len(), 3);
    assert!(truth.functions[1].iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(truth.functions[2]
        .iter()
        .all(|l| *l >= 0.0 && *l <= truth.lambda_bar[0]));
}

#[test]
fn loader_reports_bad_records() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let ok = write(
        "ok.json",
        r#"{"domain": {"lower": [0], "upper": [100]},
            "tasks": [{"type": "regression", "inputs": [[1.0], [2.0]], "outputs": [0.5, 0.1]}]}"#,
    );
    let ds = load_dataset(&ok).unwrap();
    assert_eq!((ds.num_tasks(), ds.regression.len()), (1, 1));

    let label = write(
        "label.json",
        r#"{"domain": {"lower": [0], "upper": [100]},
            "tasks": [{"type": "classification", "inputs": [[1.0], [2.0]], "labels": [1, 0]}]}"#,
    );
    assert!(matches!(
        load_dataset(&label),
        Err(Error::Schema {
            task: 0,
            record: 1,
            ..
        })
    ));

    let outside = write(
        "outside.json",
        r#"{"domain": {"lower": [0], "upper": [100]},
            "tasks": [{"type": "regression", "inputs": [[1.0]], "outputs": [0.5]},
                      {"type": "point_process", "events": [[3.0], [130.0]]}]}"#,
    );
    assert!(matches!(
        load_dataset(&outside),
        Err(Error::OutsideDomain { task: 1, record: 1 })
    ));

    let broken = write("broken.json", "{\"domain\": ");
    assert!(matches!(load_dataset(&broken), Err(Error::Parse(_))));
    assert!(matches!(
        load_dataset(dir.path().join("missing.json")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn simulation_is_deterministic() {
    let p = preset("paper-5.2").unwrap();
    let a = simulate_dataset(&p.sim, 3).unwrap();
    let b = simulate_dataset(&p.sim, 3).unwrap();
    assert_eq!(a, b);
    let c = simulate_dataset(&p.sim, 4).unwrap();
    assert_ne!(a.0, c.0);
    let test = a.1.draw_test_set(3).unwrap();
    assert_ne!(test, a.0);
    assert_eq!(test, a.1.draw_test_set(3).unwrap());
}

#[test]
fn thinned_events_follow_the_intensity() {
    let p = preset("paper-5.1-d1").unwrap();
    let (_, truth) = simulate_dataset(&p.sim, 1).unwrap();
    let g = truth.latent_function(2).unwrap();
    let lambda = truth.lambda_bar[0];
    let domain = &truth.domain;
    let bins = 10;
    let reps = 500;
    let mut counts = vec![0.0; bins];
    for r in 0..reps {
        let mut rng = stream_indexed(77, Stream::PointProcess, r);
        for e in thin_poisson(domain, lambda, |x| sigmoid(g.eval(x)), &mut rng) {
            counts[((e[0] / 10.0) as usize).min(bins - 1)] += 1.0;
        }
    }
    let stat: f64 = (0..bins)
        .map(|b| {
            let cell = Domain::interval(10.0 * b as f64, 10.0 * (b + 1) as f64).unwrap();
            let rule = gauss_legendre(&cell, &[50]).unwrap();
            let expected = reps as f64 * rule.integrate(|x| lambda * sigmoid(g.eval(x)));
            (counts[b] - expected).powi(2) / expected
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(bins as f64).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "chi-square {stat}, p = {p_value}");
}

#[test]
fn label_balance_matches_class_probability() {
    let p = preset("paper-5.1-d2").unwrap();
    let (_, truth) = simulate_dataset(&p.sim, 5).unwrap();
    let expected = truth.functions[1].iter().sum::<f64>() / truth.functions[1].len() as f64;
    let reps = 100;
    let mut positives = 0.0;
    let mut total = 0.0;
    for r in 0..reps {
        let draw = truth.draw_test_set(1000 + r).unwrap();
        let labels = &draw.classification[0].labels;
        positives += labels.iter().filter(|l| **l > 0.0).count() as f64;
        total += labels.len() as f64;
    }
    let bound = 3.0 * (expected * (1.0 - expected) / total).sqrt();
    assert!((positives / total - expected).abs() < bound);
}

#[test]
fn one_sd_bands_cover_about_two_thirds() {
    let domain = Domain::interval(0.0, 100.0).unwrap();
    let hyp = LmcHyperparams::new(
        vec![RbfParams::new(1.0, 0.01).unwrap()],
        vec![vec![1.0]],
        vec![0.1],
    )
    .unwrap();
    let sim = SimConfig {
        domain,
        kinds: vec![TaskKind::Regression],
        hyperparams: hyp.clone(),
        lambda_bar: vec![],
        regression_samples: 60,
        classification_samples: 0,
        grid_counts: vec![500],
    };
    let config = FitConfig {
        inducing_counts: vec![30],
        quadrature_counts: vec![20],
        update_hyperparams: false,
        max_iters: 2,
        ..FitConfig::default()
    };
    let seeds = 20;
    let per_seed = 10;
    let mut inside = 0usize;
    for seed in 0..seeds {
        let (ds, truth) = simulate_dataset(&sim, seed).unwrap();
        let (model, _) = fit(&ds, &hyp, &config).unwrap();
        let g = truth.latent_function(0).unwrap();
        let pts: Vec<Vec<f64>> = (0..per_seed)
            .map(|k| vec![5.0 + 10.0 * k as f64 + seed as f64 * 0.2])
            .collect();
        let bands = posterior_bands(&model, 0, &pts, 100, seed).unwrap();
        inside += pts
            .iter()
            .zip(&bands)
            .filter(|(x, b)| (b.lower..=b.upper).contains(&g.eval(x)))
            .count();
    }
    let n = (seeds * per_seed as u64) as f64;
    let rate = inside as f64 / n;
    let bound = 3.0 * (0.6827 * 0.3173 / n).sqrt();
    assert!((rate - 0.6827).abs() < bound, "coverage {rate}");
}
