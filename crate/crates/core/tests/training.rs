use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use wavecast_core::checkpoint;
use wavecast_core::config::RunConfig;
use wavecast_core::ensemble::{train_ensemble, DeepEnsemble, EnsembleOptions};
use wavecast_core::lstm::Arch;
use wavecast_core::metrics::r2;
use wavecast_core::pipeline::{fit, prepare, Prepared};
use wavecast_core::series::{fit_minmax, normalize, slice_windows, SliceSpec, TimeSeries, Unit};
use wavecast_core::synthwave::{default_training_spec, generate, preset, WaveKind};
use wavecast_core::train::{train_member, TrainConfig};

fn dominant_period(series: &TimeSeries) -> f64 {
    let n = series.len();
    let mean = series.values().iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series
        .values()
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (k, _) = buf[1..n / 2]
        .iter()
        .enumerate()
        .map(|(i, c)| (i + 1, c.norm_sqr()))
        .fold(
            (0, 0.0),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    n as f64 * series.dt() / k as f64
}

#[test]
fn synthetic_waves_peak_in_swell_band() {
    for seed in 0..8 {
        let s = generate(&default_training_spec(seed)).unwrap();
        assert_eq!(s.len(), 12_000);
        let period = dominant_period(&s);
        assert!(
            (5.0..=15.0).contains(&period),
            "seed {seed}: period {period}"
        );
    }
    let regular = generate(&preset(WaveKind::Regular, 3)).unwrap();
    assert!((dominant_period(&regular) - 8.0).abs() < 0.2);
}

#[test]
fn synthetic_generation_is_seeded() {
    let a = generate(&default_training_spec(11)).unwrap();
    let b = generate(&default_training_spec(11)).unwrap();
    let c = generate(&default_training_spec(12)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

fn sinusoid_windows() -> (wavecast_core::series::WindowedDataset, Arch) {
    let values: Vec<f64> = (0..800)
        .map(|k| (2.0 * std::f64::consts::PI * k as f64 * 0.05 / 2.0).sin())
        .collect();
    let s = TimeSeries::new(values, 0.05, Unit::Meter).unwrap();
    let norm = fit_minmax(&s).unwrap();
    let data = slice_windows(
        &normalize(&s, &norm).unwrap(),
        SliceSpec::new(40, 10, 5).unwrap(),
    )
    .unwrap();
    (data, Arch::new(8, 40, 10).unwrap())
}

#[test]
fn single_member_learns_noiseless_sinusoid() {
    let (data, arch) = sinusoid_windows();
    let cfg = TrainConfig {
        epochs: 500,
        batch_size: 16,
        lr: 5e-3,
        patience: 500,
        seed: 3,
        ..Default::default()
    };
    let (member, report) = train_member(&data, &data, &arch, &cfg).unwrap();
    let mut mu = Vec::new();
    for i in 0..data.len() {
        mu.extend(member.forward(data.input(i), arch.var_floor).unwrap().mu);
    }
    let fit = r2(data.targets(), &mu).unwrap();
    assert!(fit > 0.99, "train R² {fit}");
    assert!(report.val_nll[report.best_epoch - 1] < report.val_nll[0]);
}

fn small_run(seed: u64, models: usize, jobs: usize) -> (Prepared, DeepEnsemble) {
    let mut spec = default_training_spec(5);
    spec.duration = 90.0;
    let series = generate(&spec).unwrap();
    let mut cfg = RunConfig {
        slice: SliceSpec::new(20, 4, 15).unwrap(),
        hidden: 5,
        models,
        base_seed: seed,
        jobs,
        ..Default::default()
    };
    cfg.train.epochs = 4;
    let p = prepare(&series, &cfg, None).unwrap();
    let (e, reports) = fit(&p, &cfg).unwrap();
    assert_eq!(reports.len(), models);
    (p, e)
}

#[test]
fn ensembles_are_reproducible_and_thread_count_invariant() {
    let (_, a) = small_run(7, 3, 1);
    let (_, b) = small_run(7, 3, 1);
    let (_, c) = small_run(7, 3, 3);
    let bytes = checkpoint::to_bytes(&a).unwrap();
    assert_eq!(bytes, checkpoint::to_bytes(&b).unwrap());
    assert_eq!(bytes, checkpoint::to_bytes(&c).unwrap());
    assert_eq!(a.seeds, vec![7, 8, 9]);
    assert_ne!(a.members[0], a.members[1]);
    assert_ne!(a.members[1], a.members[2]);
}

#[test]
fn one_member_ensemble_reproduces_that_member() {
    let (p, e) = small_run(2, 1, 1);
    let x = p.test.input(0);
    let f = e.predict_normalized(x).unwrap();
    let tr = e.members[0].forward(x, e.arch.var_floor).unwrap();
    assert_eq!(f.mu, tr.mu);
    for (a, b) in f.var.iter().zip(&tr.var) {
        assert!((a - b).abs() <= 1e-15 * b.max(1.0));
    }
}

#[test]
fn member_of_ensemble_matches_standalone_training() {
    let (p, e) = small_run(4, 2, 1);
    let cfg = TrainConfig {
        epochs: 4,
        seed: 5,
        ..Default::default()
    };
    let (solo, _) = train_member(&p.train, &p.val, &e.arch, &cfg).unwrap();
    assert_eq!(solo, e.members[1]);
    let (again, _) = train_ensemble(
        &p.train,
        &p.val,
        &e.arch,
        &cfg,
        EnsembleOptions {
            models: 2,
            base_seed: 4,
            jobs: 2,
            unit: Unit::Meter,
        },
    )
    .unwrap();
    assert_eq!(again.members, e.members);
}

#[test]
fn calibrated_predictions_require_a_fitted_scale() {
    let (p, mut e) = small_run(1, 2, 1);
    assert!(e.predict_dataset(&p.test, true).is_err());
    e.set_calibration(2.0).unwrap();
    let raw = e.predict_dataset(&p.test, false).unwrap();
    let cal = e.predict_dataset(&p.test, true).unwrap();
    assert_eq!(raw.mu, cal.mu);
    for (a, b) in raw.var.iter().zip(&cal.var) {
        assert!((4.0 * a - b).abs() <= 1e-12 * b);
    }
}
