use std::collections::BTreeMap;

use eauc::baselines::{predict_dyad_average, predict_random};
use eauc::difficulty::{dataset_ks, entity_ks};
use eauc::metrics::{
    dmv_stratified_report, eauc, ecc_error_curve_binned, per_value_rmse, rmse, PredictionRecord,
};
use eauc::stats::EntityStats;
use eauc::synthetic::{generate_synthetic, EntityDist, SynthConfig};
use eauc::{Dataset, Interaction, PredictionSet, ValueBounds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn b15() -> ValueBounds {
    ValueBounds::declared(1.0, 5.0).unwrap()
}

/// One train row per entity so that user mean = `um`, item mean = `im`.
fn fixed_means(users: &[(&str, f64)], items: &[(&str, f64)]) -> EntityStats {
    let mut rows = Vec::new();
    for (k, &(u, v)) in users.iter().enumerate() {
        rows.push(Interaction::new(u, format!("pad_u{k}").as_str(), v));
    }
    for (k, &(i, v)) in items.iter().enumerate() {
        rows.push(Interaction::new(format!("pad_i{k}").as_str(), i, v));
    }
    EntityStats::compute(&Dataset::new("fixed", rows, Some(b15())).unwrap(), b15()).unwrap()
}

fn record(u: &str, i: &str, observed: f64, predicted: f64) -> PredictionRecord {
    PredictionRecord {
        user: u.into(),
        item: i.into(),
        observed,
        predicted,
    }
}

#[test]
fn hand_computed_four_point_area() {
    // DMV = 3 for every dyad; ecc = |r - 3|
    let stats = fixed_means(&[("a", 3.0)], &[("x", 3.0)]);
    let p = PredictionSet::new(
        "m",
        vec![
            record("a", "x", 3.0, 3.5), // ecc 0, err 0.5
            record("a", "x", 4.0, 3.0), // ecc 1, err 1
            record("a", "x", 1.0, 2.0), // ecc 2, err 1
            record("a", "x", 5.0, 5.0), // ecc 2, err 0
        ],
        b15(),
    )
    .unwrap();
    // merged: (0,.5) (1,1) (2,.5) -> 0.75 + 0.75 = 1.5, over 16
    let (e, curve) = eauc(&stats, &p, b15()).unwrap();
    assert!((e - 1.5 / 16.0).abs() < 1e-15);
    assert_eq!(curve.points.len(), 4);
}

#[test]
fn two_extreme_points_give_one_half() {
    let stats = fixed_means(&[("a", 1.0)], &[("x", 1.0)]);
    let p = PredictionSet::new(
        "dmv",
        vec![record("a", "x", 1.0, 1.0), record("a", "x", 5.0, 1.0)],
        b15(),
    )
    .unwrap();
    assert_eq!(eauc(&stats, &p, b15()).unwrap().0, 0.5);
}

#[test]
fn random_instances_match_independent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..300 {
        let n_u = rng.gen_range(1..6);
        let n_i = rng.gen_range(1..6);
        let train: Vec<(usize, usize, f64)> = (0..rng.gen_range(1..30))
            .map(|_| {
                (
                    rng.gen_range(0..n_u),
                    rng.gen_range(0..n_i),
                    rng.gen_range(1..=5) as f64,
                )
            })
            .collect();
        let test: Vec<(usize, usize, f64, f64)> = (0..rng.gen_range(2..200))
            .map(|_| {
                (
                    rng.gen_range(0..n_u + 1),
                    rng.gen_range(0..n_i + 1),
                    rng.gen_range(1..=5) as f64,
                    rng.gen_range(1.0..=5.0),
                )
            })
            .collect();

        // oracle means, with global fallback
        let global = train.iter().map(|t| t.2).sum::<f64>() / train.len() as f64;
        let mean_of = |pick: &dyn Fn(&(usize, usize, f64)) -> bool| {
            let v: Vec<f64> = train.iter().filter(|t| pick(t)).map(|t| t.2).collect();
            if v.is_empty() {
                global
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        // real-arithmetic ties: true eccentricities here sit on a coarse
        // rational grid, so rounding to 1e-9 groups exactly the equal ones
        let mut merged: BTreeMap<i64, (f64, f64, usize)> = BTreeMap::new();
        for &(u, i, r, p) in &test {
            let dmv = (mean_of(&|t| t.0 == u) + mean_of(&|t| t.1 == i)) / 2.0;
            let ecc = (r - dmv).abs();
            let e = merged
                .entry((ecc * 1e9).round() as i64)
                .or_insert((ecc, 0.0, 0));
            e.1 += (p - r).abs();
            e.2 += 1;
        }
        let pts: Vec<(f64, f64)> = merged
            .values()
            .map(|&(x, s, c)| (x, s / c as f64))
            .collect();
        let area: f64 = pts
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
            .sum();
        let want = area / 16.0;

        let rows = train
            .iter()
            .map(|&(u, i, v)| {
                Interaction::new(format!("u{u}").as_str(), format!("i{i}").as_str(), v)
            })
            .collect();
        let stats =
            EntityStats::compute(&Dataset::new("t", rows, Some(b15())).unwrap(), b15()).unwrap();
        let recs = test
            .iter()
            .map(|&(u, i, r, p)| record(&format!("u{u}"), &format!("i{i}"), r, p))
            .collect();
        let (got, _) = eauc(
            &stats,
            &PredictionSet::new("m", recs, b15()).unwrap(),
            b15(),
        )
        .unwrap();
        assert!(
            (got - want).abs() <= 1e-12,
            "trial {trial}: {got} vs {want}"
        );
    }
}

#[test]
fn binned_dyad_average_curve_follows_identity() {
    let d = generate_synthetic(&SynthConfig {
        n_users: 60,
        n_items: 60,
        density: 0.5,
        ..SynthConfig::default()
    })
    .unwrap();
    let (train, test) = eauc::data::split_train_test(&d, 0.2, 0).unwrap();
    let stats = EntityStats::compute(&train, b15()).unwrap();
    let p = predict_dyad_average(&stats, test.interactions()).unwrap();
    let (_, curve) = eauc(&stats, &p, b15()).unwrap();
    let curve = ecc_error_curve_binned(&curve, 10).unwrap();
    let half = curve.ecc_range / 10.0 / 2.0;
    for b in curve.binned.iter().filter(|b| b.count > 0) {
        assert!((b.mean - b.center).abs() <= half + 1e-12, "{b:?}");
    }
}

#[test]
fn per_value_rmse_brackets_overall() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dyads: Vec<_> = (0..500)
        .map(|k| Interaction::new("u", format!("i{k}").as_str(), rng.gen_range(1..=5) as f64))
        .collect();
    let p = predict_random(&dyads, b15(), 1).unwrap();
    let pv = per_value_rmse(&p).unwrap();
    let lo = pv
        .by_value
        .iter()
        .map(|v| v.rmse)
        .fold(f64::INFINITY, f64::min);
    let hi = pv.by_value.iter().map(|v| v.rmse).fold(0.0, f64::max);
    assert!(lo <= pv.overall && pv.overall <= hi);
    assert_eq!(pv.by_value.iter().map(|v| v.count).sum::<usize>(), 500);
    // overall is the count-weighted quadratic mean of the groups
    let pooled = pv
        .by_value
        .iter()
        .map(|v| v.rmse.powi(2) * v.count as f64)
        .sum::<f64>()
        / 500.0;
    assert!((pooled.sqrt() - pv.overall).abs() < 1e-12);
}

#[test]
fn random_vs_random_rmse_closed_form() {
    // two independent U(1,5): E[(X-Y)^2] = 2 * 16/12
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dyads: Vec<_> = (0..n)
        .map(|k| Interaction::new("u", format!("i{k}").as_str(), rng.gen_range(1.0..5.0)))
        .collect();
    let p = predict_random(&dyads, b15(), 5).unwrap();
    assert!(
        (rmse(&p) - (8.0f64 / 3.0).sqrt()).abs() < 0.01,
        "{}",
        rmse(&p)
    );
}

#[test]
fn stratified_report_groups_band_members() {
    let stats = fixed_means(&[("a", 3.0), ("b", 5.0)], &[("x", 3.0)]);
    let p = PredictionSet::new(
        "m",
        vec![
            record("a", "x", 1.0, 2.0),
            record("a", "x", 1.0, 4.0),
            record("a", "x", 5.0, 3.0),
            record("b", "x", 1.0, 1.0), // dmv 4, outside band
        ],
        b15(),
    )
    .unwrap();
    let rows = dmv_stratified_report(&stats, &p, (2.5, 3.5)).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(
        (
            rows[0].observed,
            rows[0].mean_prediction,
            rows[0].std_prediction,
            rows[0].count
        ),
        (1.0, 3.0, 1.0, 2)
    );
    assert_eq!(
        (rows[1].observed, rows[1].mean_prediction, rows[1].count),
        (5.0, 3.0, 1)
    );
    assert!(dmv_stratified_report(&stats, &p, (3.5, 2.5)).is_err());
}

#[test]
fn ks_closed_forms_and_uniform_grid() {
    assert_eq!(entity_ks(&[1.0], b15()).unwrap(), 1.0);
    assert_eq!(entity_ks(&[3.0], b15()).unwrap(), 0.5);
    assert_eq!(entity_ks(&[5.0], b15()).unwrap(), 1.0);
    for n in [1usize, 2, 7, 40] {
        let grid: Vec<f64> = (0..n)
            .map(|k| 1.0 + 4.0 * (k as f64 + 0.5) / n as f64)
            .collect();
        assert!((entity_ks(&grid, b15()).unwrap() - 0.5 / n as f64).abs() < 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (0..100_000).map(|_| rng.gen_range(1.0..5.0)).collect();
    assert!(entity_ks(&xs, b15()).unwrap() < 0.01);
}

#[test]
fn constant_entities_at_a_bound_score_one() {
    let rows = (0..12)
        .map(|k| {
            Interaction::new(
                format!("u{}", k % 3).as_str(),
                format!("i{}", k % 4).as_str(),
                5.0,
            )
        })
        .collect();
    let r = dataset_ks(&Dataset::new("c", rows, Some(b15())).unwrap(), b15()).unwrap();
    assert_eq!(r.dks_dataset, 1.0);
    assert_eq!(r.per_user.len() + r.per_item.len(), 7);
}

#[test]
fn narrower_entities_are_harder() {
    let dks = |dist: EntityDist| {
        let cfg = SynthConfig {
            n_users: 150,
            n_items: 150,
            density: 0.2,
            entity_dist: dist,
            latent_rank: 0,
            noise_sigma: 0.0,
            seed: 3,
            ..SynthConfig::default()
        };
        let d = generate_synthetic(&cfg).unwrap();
        dataset_ks(&d, cfg.bounds).unwrap().dks_dataset
    };
    let sigmas = [0.1, 0.3, 1.0, 3.0];
    let by_sigma: Vec<f64> = sigmas
        .iter()
        .map(|&s| dks(EntityDist::Normal { sigma: s }))
        .collect();
    assert!(by_sigma.windows(2).all(|w| w[0] > w[1]), "{by_sigma:?}");
    let uniform = dks(EntityDist::Uniform);
    assert!(
        by_sigma.iter().all(|&d| d > uniform),
        "{uniform} vs {by_sigma:?}"
    );
}
