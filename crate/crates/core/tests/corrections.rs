use eauc::corrections::forest::{best_split, Features, ForestParams, RandomForest, Tree};
use eauc::corrections::{
    apply_correction, carve_correction_set, fit_forest_correction, fit_linear_correction,
    mlrus_cell_counts, mlrus_resample, Correction, CorrectionKind, CorrectionRecord, CorrectionSet,
    LinearVariant,
};
use eauc::metrics::PredictionRecord;
use eauc::stats::EntityStats;
use eauc::{Dataset, Error, Interaction, PredictionSet, ValueBounds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn b15() -> ValueBounds {
    ValueBounds::declared(1.0, 5.0).unwrap()
}

fn random_records(
    n: usize,
    seed: u64,
    target: impl Fn(f64, f64, f64, &mut ChaCha8Rng) -> f64,
) -> CorrectionSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rs = (0..n)
        .map(|_| {
            let (b, u, i) = (
                rng.gen_range(1.0..5.0),
                rng.gen_range(1.0..5.0),
                rng.gen_range(1.0..5.0),
            );
            let t = target(b, u, i, &mut rng);
            CorrectionRecord {
                biased: b,
                user_mean: u,
                item_mean: i,
                target: t,
            }
        })
        .collect();
    CorrectionSet::new(rs).unwrap()
}

#[test]
fn affine_targets_recover_coefficients() {
    let truth = [0.37, 0.81, -0.22, 0.145];
    let cs = random_records(300, 1, |b, u, i, _| {
        truth[0] + truth[1] * b + truth[2] * u + truth[3] * i
    });
    let c = fit_linear_correction(&cs, LinearVariant::Plain, b15(), 10, 0).unwrap();
    for (got, want) in c.coefficients().unwrap().iter().zip(truth) {
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }
    // the resampled variant sees a subset of the same exact relation
    let c = fit_linear_correction(&cs, LinearVariant::MlrusClip, b15(), 10, 3).unwrap();
    for (got, want) in c.coefficients().unwrap().iter().zip(truth) {
        assert!((got - want).abs() < 1e-8);
    }
}

#[test]
fn constant_feature_names_column() {
    let cs = random_records(50, 2, |b, _, _, _| b);
    let rs: Vec<_> = cs
        .records()
        .iter()
        .map(|r| CorrectionRecord {
            item_mean: 3.5,
            ..*r
        })
        .collect();
    let err = fit_linear_correction(
        &CorrectionSet::new(rs).unwrap(),
        LinearVariant::Plain,
        b15(),
        10,
        0,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        Error::RankDeficient {
            column: "item_mean"
        }
    ));
    assert!(err.to_string().contains("item_mean"));
    assert_eq!(err.kind(), eauc::ErrorKind::Training);
}

#[test]
fn sigmoid_variant_is_strictly_inside_bounds() {
    let cs = random_records(400, 3, |b, u, _, rng| {
        (b + 0.5 * (b - u) + rng.gen_range(-1.0..1.0)).clamp(1.0, 5.0)
    });
    let c = fit_linear_correction(&cs, LinearVariant::MlrusSigmoid, b15(), 10, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let v = c.apply_one(
            rng.gen_range(1.0..=5.0),
            rng.gen_range(1.0..=5.0),
            rng.gen_range(1.0..=5.0),
        );
        assert!(v > 1.0 && v < 5.0, "{v}");
    }
}

/// Brute force over every feature and every midpoint.
fn oracle_split(x: &[Features], y: &[f64]) -> (f64, usize, f64) {
    let sse = |ys: &[f64]| {
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        ys.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    };
    let mut best = (f64::INFINITY, 0, 0.0);
    for f in 0..3 {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<f64>, Vec<f64>) = {
                let mut l = vec![];
                let mut r = vec![];
                for (row, &v) in x.iter().zip(y) {
                    if row[f] <= t {
                        l.push(v)
                    } else {
                        r.push(v)
                    }
                }
                (l, r)
            };
            let total = sse(&l) + sse(&r);
            if total < best.0 - 1e-12 {
                best = (total, f, t);
            }
        }
    }
    best
}

#[test]
fn depth_one_split_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..200 {
        let n = rng.gen_range(2..=20);
        let x: Vec<Features> = (0..n)
            .map(|_| {
                [
                    rng.gen_range(0..6) as f64,
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0..3) as f64,
                ]
            })
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=5) as f64).collect();
        let rows: Vec<usize> = (0..n).collect();
        let (want_sse, _, _) = oracle_split(&x, &y);
        match best_split(&x, &y, &rows, &[0, 1, 2], 1) {
            Some(s) => assert!(
                (s.sse - want_sse).abs() < 1e-9,
                "trial {trial}: {} vs {want_sse}",
                s.sse
            ),
            None => assert!(want_sse.is_infinite(), "trial {trial}"),
        }
    }
}

#[test]
fn step_function_recovers_step_means() {
    // r̂ below 3 maps to 1.5, above to 4.0; the other features are noise
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<Features> = (0..20)
        .map(|k| {
            [
                1.0 + 0.2 * k as f64,
                rng.gen_range(1.0..5.0),
                rng.gen_range(1.0..5.0),
            ]
        })
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| if r[0] < 3.0 { 1.5 } else { 4.0 })
        .collect();
    let p = ForestParams {
        n_trees: 1,
        max_depth: 1,
        min_leaf: 1,
        max_features: 3,
        bootstrap: false,
    };
    let f = RandomForest::fit(&x, &y, &p, 0);
    assert_eq!(f.predict(&[1.2, 3.0, 3.0]), 1.5);
    assert_eq!(f.predict(&[4.8, 3.0, 3.0]), 4.0);
}

#[test]
fn forest_training_error_at_most_mean_tree_error() {
    let cs = random_records(500, 6, |b, u, i, rng| {
        (0.5 * b + 0.3 * u + 0.2 * i + rng.gen_range(-0.8..0.8)).clamp(1.0, 5.0)
    });
    let x: Vec<Features> = cs
        .records()
        .iter()
        .map(|r| [r.biased, r.user_mean, r.item_mean])
        .collect();
    let y: Vec<f64> = cs.records().iter().map(|r| r.target).collect();
    let p = ForestParams {
        n_trees: 20,
        max_depth: 4,
        ..ForestParams::default()
    };
    let f = RandomForest::fit(&x, &y, &p, 8);
    let mse = |pred: &dyn Fn(&Features) -> f64| {
        x.iter()
            .zip(&y)
            .map(|(r, t)| (pred(r) - t).powi(2))
            .sum::<f64>()
            / y.len() as f64
    };
    let forest = mse(&|r| f.predict(r));
    let trees: f64 = f
        .trees()
        .iter()
        .map(|t: &Tree| mse(&|r| t.predict(r)))
        .sum::<f64>()
        / f.trees().len() as f64;
    assert!(forest <= trees + 1e-12, "{forest} > {trees}");
    assert!(f.trees().iter().all(|t| t.depth() <= 4));
}

#[test]
fn forest_is_deterministic_and_bounded() {
    let cs = random_records(200, 7, |b, _, _, rng| {
        (b + rng.gen_range(-1.0..1.0)).clamp(1.0, 5.0)
    });
    let p = ForestParams {
        n_trees: 10,
        ..ForestParams::default()
    };
    let a = fit_forest_correction(&cs, &p, b15(), 2).unwrap();
    let b = fit_forest_correction(&cs, &p, b15(), 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(Correction::from_bytes(&a.to_bytes()).unwrap(), a);
    for r in cs.records() {
        let v = a.apply_one(r.biased, r.user_mean, r.item_mean);
        assert!((1.0..=5.0).contains(&v));
    }
}

#[test]
fn mlrus_flattens_cell_histogram() {
    let b = b15();
    let ratio = |c: &[usize]| {
        let nz: Vec<usize> = c.iter().copied().filter(|&v| v > 0).collect();
        *nz.iter().max().unwrap() as f64 / *nz.iter().min().unwrap() as f64
    };
    for seed in 0..30 {
        // skewed means: squared uniforms crowd the low bins
        let cs = random_records(600, 100 + seed, |b, _, _, _| b);
        let rs: Vec<_> = cs
            .records()
            .iter()
            .map(|r| {
                let s = |v: f64| 1.0 + 4.0 * ((v - 1.0) / 4.0).powi(2);
                CorrectionRecord {
                    user_mean: s(r.user_mean),
                    item_mean: s(r.item_mean),
                    ..*r
                }
            })
            .collect();
        let cs = CorrectionSet::new(rs).unwrap();
        let out = mlrus_resample(&cs, 10, b, seed).unwrap();
        let (before, after) = (
            mlrus_cell_counts(&cs, 10, b),
            mlrus_cell_counts(&out, 10, b),
        );
        assert!(ratio(&after) <= ratio(&before));
        assert!(after.iter().zip(&before).all(|(a, b)| a <= b));
        assert_eq!(out, mlrus_resample(&cs, 10, b, seed).unwrap());
    }
}

fn toy_train() -> Dataset {
    let rows = (0..60)
        .map(|k| {
            Interaction::new(
                format!("u{}", k % 6).as_str(),
                format!("i{}", k % 10).as_str(),
                1.0 + (k % 5) as f64,
            )
        })
        .collect();
    Dataset::new("toy", rows, Some(b15())).unwrap()
}

#[test]
fn carve_is_disjoint_and_reproducible() {
    let t = toy_train();
    let (fit, cor) = carve_correction_set(&t, 0.1, 3).unwrap();
    assert_eq!((fit.len(), cor.len()), (54, 6));
    let (fit2, cor2) = carve_correction_set(&t, 0.1, 3).unwrap();
    assert_eq!((fit, cor), (fit2, cor2));
    assert!(carve_correction_set(&t, 0.0, 3).is_err());
}

#[test]
fn identity_correction_clamps_and_is_idempotent() {
    let t = toy_train();
    let stats = EntityStats::compute(&t, b15()).unwrap();
    let recs = t
        .interactions()
        .iter()
        .enumerate()
        .map(|(k, r)| PredictionRecord {
            user: r.user.clone(),
            item: r.item.clone(),
            observed: r.value,
            predicted: -1.0 + 0.15 * k as f64,
        })
        .collect();
    let p = PredictionSet::new("mf", recs, b15()).unwrap();
    let id = Correction::identity(b15());
    let once = apply_correction(&id, &p, &stats).unwrap();
    assert_eq!(once.model_name(), "mf+linear");
    for (a, b) in once.records().iter().zip(p.records()) {
        assert_eq!(a.predicted, b15().clamp(b.predicted));
    }
    let twice = apply_correction(&id, &once, &stats).unwrap();
    assert!(twice
        .records()
        .iter()
        .zip(once.records())
        .all(|(a, b)| a.predicted == b.predicted));
    for kind in CorrectionKind::ALL {
        assert_eq!(kind.to_string().parse::<CorrectionKind>().unwrap(), kind);
    }
}

#[test]
fn correction_lowers_eauc_of_a_biased_predictor() {
    // A predictor that shrinks halfway to the DMV; a linear fit learns to undo it.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows: Vec<_> = (0..4000)
        .map(|_| {
            let (u, i) = (rng.gen_range(0..40), rng.gen_range(0..40));
            let v = (1.0 + (u % 5) as f64 * 0.5 + (i % 3) as f64 * 0.5 + rng.gen_range(-1.0..1.0))
                .clamp(1.0, 5.0);
            Interaction::new(format!("u{u}").as_str(), format!("i{i}").as_str(), v)
        })
        .collect();
    let d = Dataset::new("biased", rows, Some(b15())).unwrap();
    let (train, test) = eauc::data::split_train_test(&d, 0.2, 1).unwrap();
    let (fit, cor) = carve_correction_set(&train, 0.3, 1).unwrap();
    let stats = EntityStats::compute(&fit, b15()).unwrap();
    let shrunk = |ds: &Dataset| {
        let recs = ds
            .interactions()
            .iter()
            .map(|r| {
                let dmv = stats.dmv(&r.user, &r.item);
                PredictionRecord {
                    user: r.user.clone(),
                    item: r.item.clone(),
                    observed: r.value,
                    predicted: dmv + 0.5 * (r.value - dmv),
                }
            })
            .collect();
        PredictionSet::new("shrunk", recs, b15()).unwrap()
    };
    let cs = CorrectionSet::from_predictions(&shrunk(&cor), &stats).unwrap();
    let c = fit_linear_correction(&cs, LinearVariant::Plain, b15(), 10, 0).unwrap();
    let before = shrunk(&test);
    let after = apply_correction(&c, &before, &stats).unwrap();
    let (e0, _) = eauc::metrics::eauc(&stats, &before, b15()).unwrap();
    let (e1, _) = eauc::metrics::eauc(&stats, &after, b15()).unwrap();
    assert!(e1 < e0, "{e1} !< {e0}");
}
