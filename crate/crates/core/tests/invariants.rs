use proptest::prelude::*;

use robust_gan::contamination::{corrupt, corrupted_count, sample_clean, AttackKind, AttackSpec, CleanFamily};
use robust_gan::discriminator::FeatureFamily;
use robust_gan::distance::{abar_deviation, estimate_distance, AscentConfig, DistanceKind};
use robust_gan::estimator::{robust_mean, robust_second_moment, MinimaxConfig};
use robust_gan::generator::{extract_estimate, generate, GeneratorParams, NoisePool};
use robust_gan::harness::{self, EstimatorSpec, ExperimentConfig, FamilySpec, SweepOptions};
use robust_gan::generator::Task;
use robust_gan::Dataset;

fn small_ascent() -> AscentConfig {
    AscentConfig {
        restarts: 4,
        steps: 150,
        ..AscentConfig::default()
    }
}

fn small_minimax(seed: u64) -> MinimaxConfig {
    MinimaxConfig {
        outer_steps: 30,
        restarts_outer: 2,
        eps: 0.1,
        seed,
        ..MinimaxConfig::default()
    }
}

fn line(values: &[f64]) -> Dataset {
    Dataset::from_rows(&values.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn replacement_bookkeeping(n in 1usize..400, d in 1usize..5, eps in 0.0f64..=0.45, r in 0.5f64..200.0, seed in any::<u64>()) {
        let clean = sample_clean(&CleanFamily::gaussian(d, 1.0), n, d, seed).unwrap();
        let spec = AttackSpec { kind: AttackKind::PointMass { direction: None, magnitude: r }, eps };
        let dirty = corrupt(&clean, &spec, seed ^ 1).unwrap();
        let k = corrupted_count(eps, n);
        let raw = eps * n as f64;
        prop_assert!(k as f64 >= raw - 1e-9 * raw.max(1.0) && (k as f64) < raw + 1.0);
        let mask = dirty.corrupted_mask.as_ref().unwrap();
        prop_assert_eq!(mask.iter().filter(|m| **m).count(), k);
        for i in 0..n {
            if !mask[i] {
                prop_assert_eq!(dirty.points.row(i), clean.points.row(i));
            }
        }
        prop_assert_eq!(&corrupt(&clean, &spec, seed ^ 1).unwrap(), &dirty);
    }

    #[test]
    fn mean_generator_reparameterizes_the_pool(m in 2usize..60, d in 1usize..5, seed in any::<u64>(), shift in -5.0f64..5.0) {
        let pool = NoisePool::gaussian(m, d, seed).unwrap();
        let theta: Vec<f64> = (0..d).map(|j| shift + j as f64).collect();
        let a = generate(&GeneratorParams::Mean { theta: theta.clone() }, &pool).unwrap();
        let b = generate(&GeneratorParams::Mean { theta: theta.clone() }, &pool).unwrap();
        prop_assert_eq!(&a, &b);
        let pool_mean = pool.z.column_means();
        for (j, got) in a.points.column_means().iter().enumerate() {
            prop_assert!((got - theta[j] - pool_mean[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn second_moment_estimate_is_psd(d in 1usize..5, entries in prop::collection::vec(-3.0f64..3.0, 16)) {
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                l[i * d + j] = entries[i * 4 + j];
            }
        }
        let mut p = GeneratorParams::SecondMoment { l, d };
        p.project();
        let m = extract_estimate(&p).as_matrix().unwrap().clone();
        prop_assert!((&m - m.transpose()).abs().max() == 0.0);
        prop_assert!(m.symmetric_eigen().eigenvalues.min() >= -1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn a1_and_a2_are_symmetric(xs in prop::collection::vec(-3.0f64..3.0, 2..12), ys in prop::collection::vec(-3.0f64..3.0, 2..12), seed in any::<u64>()) {
        let (p, q) = (line(&xs), line(&ys));
        for kind in [DistanceKind::A1, DistanceKind::A2] {
            let (pq, _) = estimate_distance(kind, FeatureFamily::Mean, &p, &q, &small_ascent(), seed).unwrap();
            let (qp, _) = estimate_distance(kind, FeatureFamily::Mean, &q, &p, &small_ascent(), seed).unwrap();
            prop_assert!((pq - qp).abs() < 2e-3, "{:?}: {} vs {}", kind, pq, qp);
        }
    }

    #[test]
    fn perturbation_bound(a in prop::collection::vec(-3.0f64..3.0, 2..10), b in prop::collection::vec(-3.0f64..3.0, 2..10), c in prop::collection::vec(-3.0f64..3.0, 2..10), seed in any::<u64>()) {
        let (p1, p2, p3) = (line(&a), line(&b), line(&c));
        let cfg = small_ascent();
        let (a12, _) = estimate_distance(DistanceKind::A1, FeatureFamily::Mean, &p1, &p2, &cfg, seed).unwrap();
        let (a13, _) = estimate_distance(DistanceKind::A1, FeatureFamily::Mean, &p1, &p3, &cfg, seed).unwrap();
        let bar = abar_deviation(DistanceKind::A1, FeatureFamily::Mean, &p2, &p3, &cfg, seed).unwrap();
        // The pair family meeting |d2| <= 1/2 is (g/2, -g/2), so A there is A1/2.
        prop_assert!(((a12 - a13) / 2.0).abs() <= bar + 2e-3, "{} {} {}", a12, a13, bar);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn robust_mean_is_translation_equivariant(seed in any::<u64>(), shift in prop::collection::vec(-50.0f64..50.0, 2)) {
        let data = sample_clean(&CleanFamily::gaussian(2, 1.0), 120, 2, seed).unwrap();
        let cfg = small_minimax(seed);
        let base = robust_mean(&data, &cfg).unwrap();
        let moved = robust_mean(&data.translated(&shift).unwrap(), &cfg).unwrap();
        let (b, m) = (base.estimate.as_vector().unwrap(), moved.estimate.as_vector().unwrap());
        for j in 0..2 {
            prop_assert!((m[j] - b[j] - shift[j]).abs() < 1e-9, "{} vs {}", m[j] - b[j], shift[j]);
        }
    }

    #[test]
    fn final_distance_is_the_best_restart(seed in any::<u64>()) {
        let data = sample_clean(&CleanFamily::gaussian(2, 1.0), 100, 2, seed).unwrap();
        let r = robust_second_moment(&data, &small_minimax(seed)).unwrap();
        let best = r.restart_distances.iter().flatten().fold(f64::INFINITY, |a, b| a.min(*b));
        prop_assert_eq!(best, r.final_distance_value);
        prop_assert_eq!(r.restart_distances[r.restart], Some(best));
    }
}

#[test]
fn sweep_writes_one_record_per_cell_trial_and_estimator() {
    let cfg = ExperimentConfig {
        name: "count".into(),
        task: Task::Mean,
        family: FamilySpec::Gaussian { sigma: 1.0, mean: 0.0 },
        attacks: vec![
            AttackKind::PointMass { direction: None, magnitude: 5.0 },
            AttackKind::Cluster { offset: 4.0, spread: 0.5 },
        ],
        eps: vec![0.0, 0.1],
        n: vec![40],
        d: vec![1, 2],
        estimators: ["EmpiricalMean", "CoordinateMedian", "TrimmedMean"].into_iter().map(|s| EstimatorSpec::parse(s).unwrap()).collect(),
        trials: 2,
        seed: 5,
        out: None,
        minimax: MinimaxConfig::default(),
        trim_fraction: 0.2,
        jsonl: true,
    };
    let dir = tempfile::tempdir().unwrap();
    let opts = SweepOptions { out: dir.path().to_path_buf(), jobs: 2, resume: false, jsonl: true };
    let recs = harness::run_sweep(&cfg, &opts).unwrap();
    assert_eq!(harness::cells(&cfg).len(), 8);
    assert_eq!(recs.len(), 8 * 2 * 3);
    assert_eq!(recs.len(), harness::record_count(&cfg));
    assert!(recs.iter().all(|r| r.error >= 0.0));
    let on_disk = harness::read_records(&dir.path().join(harness::RECORDS_CSV)).unwrap();
    assert_eq!(on_disk.len(), recs.len());
    let lines = std::fs::read_to_string(dir.path().join(harness::RECORDS_JSONL)).unwrap();
    assert_eq!(lines.lines().count(), recs.len());
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
