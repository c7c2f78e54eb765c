use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use eauc::baselines::{predict_dyad_average, predict_random};
use eauc::config::KeyValueConfig;
use eauc::corrections::{
    apply_correction, fit_correction, Correction, CorrectionKind, CorrectionSet,
};
use eauc::data::{load_interactions, rating_bounds, split_train_test, write_split, InputFormat};
use eauc::difficulty::dataset_ks;
use eauc::mf::{predict_mf, train_mf_logged, MfHyperparams, MfModel};
use eauc::report::{evaluate_with_stats, EvaluateOptions};
use eauc::synthetic::{generate_synthetic, SynthConfig};
use eauc::{Dataset, EntityStats, EvaluationReport, PredictionSet, ValueBounds};
use serde_json::json;

use crate::{Baseline, Format, Global, SynthArgs};

pub fn load_csv(path: &Path) -> Result<Dataset> {
    Ok(load_interactions(path, InputFormat::Csv)?)
}

/// The `--bounds` flag, else declared bounds, else the range of the data.
pub fn resolve_bounds(g: &Global, train: &Dataset, test: Option<&Dataset>) -> Result<ValueBounds> {
    match g.bounds {
        Some(b) => Ok(b),
        None => Ok(rating_bounds(train, test.unwrap_or(train))?),
    }
}

fn create_out(g: &Global) -> Result<()> {
    std::fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))
}

fn written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn print_report(g: &Global, r: &EvaluationReport) {
    match g.format {
        Format::Json => print!("{}", r.to_json()),
        Format::Md => print!("{}", r.to_markdown()),
    }
}

pub fn split(
    g: &Global,
    input: &Path,
    format: InputFormat,
    fraction: f64,
    name: Option<String>,
) -> Result<()> {
    let d = load_interactions(input, format)?;
    let (train, test) = split_train_test(&d, fraction, g.seed())?;
    let name = name.unwrap_or_else(|| d.name().to_string());
    let (a, b) = write_split(&g.out, &name, &train, &test)?;
    written(&[a, b]);
    Ok(())
}

pub fn synth(g: &Global, a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::from_config(&KeyValueConfig::load(p)?)?,
        None => SynthConfig::default(),
    };
    macro_rules! over {
        ($flag:ident => $field:ident) => {
            if let Some(v) = a.$flag {
                cfg.$field = v;
            }
        };
    }
    over!(users => n_users);
    over!(items => n_items);
    over!(density => density);
    over!(dist => entity_dist);
    over!(rank => latent_rank);
    over!(noise => noise_sigma);
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(b) = g.bounds {
        cfg.bounds = b;
    }
    let d = generate_synthetic(&cfg)?;
    let name = a.name.clone().unwrap_or_else(|| d.name().to_string());
    create_out(g)?;
    let data = g.out.join(format!("{name}.csv"));
    let sidecar = g.out.join(format!("{name}.synth.cfg"));
    d.save_csv(&data)?;
    std::fs::write(&sidecar, cfg.to_config().to_canonical_string())
        .with_context(|| format!("writing {}", sidecar.display()))?;
    written(&[data, sidecar]);
    Ok(())
}

pub fn train_mf(
    g: &Global,
    train: &Path,
    config: Option<&Path>,
    dim: Option<usize>,
    lr: Option<f64>,
    l2: Option<f64>,
    epochs: Option<usize>,
) -> Result<()> {
    let mut hp = match config {
        Some(p) => {
            let c = KeyValueConfig::load(p)?;
            c.reject_unknown(&MfHyperparams::KEYS)?;
            MfHyperparams::from_config(&c, "")?
        }
        None => MfHyperparams::default(),
    };
    hp.embedding_dim = dim.unwrap_or(hp.embedding_dim);
    hp.learning_rate = lr.unwrap_or(hp.learning_rate);
    hp.l2_weight = l2.unwrap_or(hp.l2_weight);
    hp.max_epochs = epochs.unwrap_or(hp.max_epochs);
    if let Some(s) = g.seed {
        hp.seed = s;
    }
    let train = load_csv(train)?;
    let bounds = resolve_bounds(g, &train, None)?;
    let (model, history) = train_mf_logged(&train, bounds, &hp)?;
    create_out(g)?;
    let mp = g.out.join("mf.model");
    let hp_path = g.out.join("mf.history.json");
    model.save(&mp)?;
    let log = json!({ "hyperparameters": hp, "history": history });
    std::fs::write(&hp_path, serde_json::to_string_pretty(&log)? + "\n")
        .with_context(|| format!("writing {}", hp_path.display()))?;
    written(&[mp, hp_path]);
    println!(
        "best epoch {} of {}, validation RMSE {:.4}",
        history.best_epoch,
        history.epochs.len(),
        history.best_validation_rmse
    );
    Ok(())
}

pub fn predict(
    g: &Global,
    test: &Path,
    model: Option<&Path>,
    baseline: Option<Baseline>,
    train: Option<&Path>,
) -> Result<()> {
    let test = load_csv(test)?;
    let p = match (model, baseline) {
        (Some(m), _) => predict_mf(&MfModel::load(m)?, test.interactions())?,
        (None, Some(Baseline::Random)) => {
            let bounds = match train {
                Some(t) => resolve_bounds(g, &load_csv(t)?, Some(&test))?,
                None => resolve_bounds(g, &test, None)?,
            };
            predict_random(test.interactions(), bounds, g.seed())?
        }
        (None, Some(Baseline::DyadAverage)) => {
            let train = load_csv(train.ok_or_else(|| {
                eauc::Error::Argument("the dyad-average baseline needs --train".into())
            })?)?;
            let stats = EntityStats::compute(&train, resolve_bounds(g, &train, Some(&test))?)?;
            predict_dyad_average(&stats, test.interactions())?
        }
        (None, None) => unreachable!("clap requires --model or --baseline"),
    };
    create_out(g)?;
    let path = g.out.join(format!("{}.predictions.csv", p.model_name()));
    p.save_csv(&path)?;
    written(&[path]);
    Ok(())
}

pub fn difficulty(g: &Global, train: &Path) -> Result<()> {
    let train = load_csv(train)?;
    let bounds = resolve_bounds(g, &train, None)?;
    let r = dataset_ks(&train, bounds)?;
    create_out(g)?;
    let path = g.out.join(format!("{}.difficulty.csv", train.name()));
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    match g.format {
        Format::Json => {
            let s = json!({
                "dataset": train.name(),
                "dks_dataset": r.dks_dataset,
                "n_users": r.per_user.len(),
                "n_items": r.per_item.len(),
                "bounds": [bounds.min_value, bounds.max_value],
            });
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Format::Md => println!(
            "| dataset | D_KS | users | items |\n|---|---|---|---|\n| {} | {:.4} | {} | {} |",
            train.name(),
            r.dks_dataset,
            r.per_user.len(),
            r.per_item.len()
        ),
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn evaluate(
    g: &Global,
    train: &Path,
    test: &Path,
    preds: &Path,
    model_name: Option<String>,
    bins: usize,
) -> Result<()> {
    let train = load_csv(train)?;
    let test = load_csv(test)?;
    let bounds = resolve_bounds(g, &train, Some(&test))?;
    let name =
        model_name.unwrap_or_else(|| stem(preds).trim_end_matches(".predictions").to_string());
    let p = PredictionSet::load_aligned(preds, &test, &name, bounds)?;
    let stats = EntityStats::compute(&train, bounds)?;
    let opts = EvaluateOptions {
        seed: g.seed,
        n_bins: bins,
        ..Default::default()
    };
    let r = evaluate_with_stats(&train, &stats, &p, &opts)?;
    let files = r.write_artifacts(&g.out, &safe_stem(&name))?;
    print_report(g, &r);
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

/// File-name friendly model name (`mf+linear` stays readable).
pub fn safe_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "+-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn correct(
    g: &Global,
    kind: CorrectionKind,
    model: &Path,
    train: &Path,
    held_out: &Path,
    test: &Path,
) -> Result<()> {
    let model = MfModel::load(model)?;
    let train = load_csv(train)?;
    let held = load_csv(held_out)?;
    let test = load_csv(test)?;
    let bounds = g.bounds.unwrap_or(model.bounds());
    let stats = EntityStats::compute(&train, bounds)?;
    let cs = CorrectionSet::from_predictions(&predict_mf(&model, held.interactions())?, &stats)?;
    let c: Correction = fit_correction(&cs, kind, bounds, g.seed())?;
    let corrected = apply_correction(&c, &predict_mf(&model, test.interactions())?, &stats)?;
    create_out(g)?;
    let cp = g.out.join(format!("{kind}.correction"));
    let pp = g
        .out
        .join(format!("{}.predictions.csv", corrected.model_name()));
    c.save(&cp)?;
    corrected.save_csv(&pp)?;
    written(&[cp, pp]);
    if let Some(beta) = c.coefficients() {
        println!("coefficients (intercept, prediction, user mean, item mean): {beta:?}");
    }
    Ok(())
}

pub fn curve(
    g: &Global,
    train: &Path,
    test: &Path,
    preds: &[(String, PathBuf)],
    bins: usize,
    file: &str,
) -> Result<()> {
    let train = load_csv(train)?;
    let test = load_csv(test)?;
    let bounds = resolve_bounds(g, &train, Some(&test))?;
    let stats = EntityStats::compute(&train, bounds)?;
    let mut curves = Vec::new();
    for (name, path) in preds {
        let p = PredictionSet::load_aligned(path, &test, name, bounds)
            .with_context(|| format!("curve `{name}`"))?;
        let (e, c) = eauc::metrics::eauc(&stats, &p, bounds)?;
        println!("{name}: EAUC {e:.4}");
        curves.push((
            name.as_str(),
            eauc::metrics::ecc_error_curve_binned(&c, bins)?,
        ));
    }
    create_out(g)?;
    let path = g.out.join(file);
    let refs: Vec<_> = curves.iter().map(|(n, c)| (*n, c)).collect();
    eauc::svg::save_curve_svg(&refs, &path)?;
    written(&[path]);
    Ok(())
}
