//! End-to-end runs driven by a flat key-value config.
//!
//! ```text
//! dataset = ml-100k/u.data     # or `synthetic`, configured by synth.* keys
//! format = movielens           # csv (default) | movielens
//! bounds = 1,5
//! test_fraction = 0.1
//! seed = 0
//! models = random,dyad_average,mf
//! correction = linear          # optional, needs mf
//! mf.embedding_dim = 64
//! ```
//!
//! Artifacts land in `<out>/run-<hash>/`, where the hash covers the canonical
//! config text, so reruns of one config overwrite the same directory with
//! identical bytes.

use std::path::Path;

use anyhow::{Context, Result};
use eauc::config::KeyValueConfig;
use eauc::corrections::{
    apply_correction, carve_correction_set, fit_correction, CorrectionKind, CorrectionSet,
};
use eauc::data::{load_interactions, rating_bounds, split_train_test, write_split, InputFormat};
use eauc::mf::{predict_mf, train_mf, MfHyperparams};
use eauc::report::{evaluate_with_stats, EvaluateOptions};
use eauc::synthetic::{generate_synthetic, SynthConfig};
use eauc::{Dataset, EntityStats, EvaluationReport, PredictionSet};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::commands::safe_stem;
use crate::{Format, Global};

const KEYS: [&str; 10] = [
    "dataset",
    "format",
    "name",
    "bounds",
    "test_fraction",
    "seed",
    "models",
    "correction",
    "correction_fraction",
    "bins",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Model {
    Random,
    DyadAverage,
    Mf,
}

fn parse_models(s: &str) -> Result<Vec<Model>, eauc::Error> {
    s.split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(|m| match m {
            "random" => Ok(Model::Random),
            "dyad_average" => Ok(Model::DyadAverage),
            "mf" => Ok(Model::Mf),
            other => Err(eauc::Error::Argument(format!(
                "unknown model `{other}` (expected random, dyad_average or mf)"
            ))),
        })
        .collect()
}

/// Keys with `prefix` stripped, rejecting unknown names.
fn sub_config(
    c: &KeyValueConfig,
    prefix: &str,
    known: &[&str],
) -> Result<KeyValueConfig, eauc::Error> {
    let mut sub = KeyValueConfig::default();
    for (k, v) in c
        .iter()
        .filter_map(|(k, v)| Some((k.strip_prefix(prefix)?, v)))
    {
        sub.set(k, v);
    }
    sub.reject_unknown(known).map_err(|_| {
        let bad = sub
            .iter()
            .map(|(k, _)| k)
            .find(|k| !known.contains(k))
            .unwrap_or_default();
        eauc::Error::Argument(format!("unknown config key `{prefix}{bad}`"))
    })?;
    Ok(sub)
}

fn validate_keys(c: &KeyValueConfig) -> Result<(), eauc::Error> {
    for (k, _) in c.iter() {
        let ok = KEYS.contains(&k) || k.starts_with("mf.") || k.starts_with("synth.");
        if !ok {
            return Err(eauc::Error::Argument(format!("unknown config key `{k}`")));
        }
    }
    sub_config(c, "mf.", &MfHyperparams::KEYS)?;
    sub_config(c, "synth.", &SynthConfig::KEYS)?;
    Ok(())
}

pub fn run_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes())
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn load_dataset(c: &KeyValueConfig, base: &Path, seed: u64) -> Result<Dataset> {
    let source = c.require("dataset")?;
    if source == "synthetic" {
        let mut sc = sub_config(c, "synth.", &SynthConfig::KEYS)?;
        let defaults = SynthConfig {
            seed,
            ..SynthConfig::default()
        }
        .to_config();
        for (k, v) in defaults.iter() {
            if sc.get(k).is_none() {
                sc.set(k, v);
            }
        }
        if let (None, Some(b)) = (c.get("synth.bounds"), c.get("bounds")) {
            sc.set("bounds", b);
        }
        return Ok(generate_synthetic(&SynthConfig::from_config(&sc)?)?);
    }
    let format: InputFormat = c
        .get_parsed::<String>("format")?
        .as_deref()
        .unwrap_or("csv")
        .parse()?;
    let path = base.join(source);
    Ok(load_interactions(&path, format)?)
}

pub fn run(g: &Global, config_path: &Path) -> Result<()> {
    let mut c = KeyValueConfig::load(config_path)?;
    if let Some(s) = g.seed {
        c.set("seed", s.to_string());
    }
    if let Some(b) = g.bounds {
        c.set("bounds", format!("{},{}", b.min_value, b.max_value));
    }
    validate_keys(&c)?;
    let canonical = c.to_canonical_string();
    let run_dir = g.out.join(format!("run-{}", run_hash(&canonical)));
    std::fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
    std::fs::write(run_dir.join("config.txt"), &canonical).context("writing config.txt")?;

    let seed: u64 = c.get_parsed("seed")?.unwrap_or(0);
    let fraction: f64 = c.get_parsed("test_fraction")?.unwrap_or(0.1);
    let bins: usize = c.get_parsed("bins")?.unwrap_or(eauc::metrics::DEFAULT_BINS);
    let models = parse_models(c.get("models").unwrap_or("random,dyad_average"))?;
    if models.is_empty() {
        return Err(eauc::Error::Argument("config `models` is empty".into()).into());
    }
    let correction: Option<CorrectionKind> = c.get("correction").map(str::parse).transpose()?;
    if correction.is_some() && !models.contains(&Model::Mf) {
        return Err(eauc::Error::Argument("`correction` needs `mf` in `models`".into()).into());
    }
    let base = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let data = load_dataset(&c, &base, seed).context("stage `load`")?;
    let name = c
        .get("name")
        .map(str::to_string)
        .unwrap_or_else(|| data.name().to_string());
    let (train, test) = split_train_test(&data, fraction, seed).context("stage `split`")?;
    write_split(&run_dir, &name, &train, &test).context("stage `split`")?;
    let bounds = match c.get("bounds") {
        Some(b) => eauc::ValueBounds::parse_declared(b)?,
        None => rating_bounds(&train, &test)?,
    };
    let stats = EntityStats::compute(&train, bounds).context("stage `stats`")?;
    let opts = EvaluateOptions {
        seed: Some(seed),
        n_bins: bins,
        ..Default::default()
    };

    let mut preds: Vec<PredictionSet> = Vec::new();
    for m in &models {
        match m {
            Model::Random => preds.push(
                eauc::baselines::predict_random(test.interactions(), bounds, seed)
                    .context("stage `predict`")?,
            ),
            Model::DyadAverage => preds.push(
                eauc::baselines::predict_dyad_average(&stats, test.interactions())
                    .context("stage `predict`")?,
            ),
            Model::Mf => {
                let mut hp = MfHyperparams::from_config(&c, "mf.").context("stage `train-mf`")?;
                if c.get("mf.seed").is_none() {
                    hp.seed = seed;
                }
                // With a correction, MF trains on the fit part and the rest fits the correction.
                let (fit, held) = match correction {
                    Some(_) => {
                        let cf = c
                            .get_parsed("correction_fraction")?
                            .unwrap_or(eauc::corrections::DEFAULT_CORRECTION_FRACTION);
                        let (a, b) =
                            carve_correction_set(&train, cf, seed).context("stage `correct`")?;
                        (a, Some(b))
                    }
                    None => (train.clone(), None),
                };
                let model = train_mf(&fit, bounds, &hp).context("stage `train-mf`")?;
                model
                    .save(&run_dir.join("mf.model"))
                    .context("stage `train-mf`")?;
                let p = predict_mf(&model, test.interactions()).context("stage `predict`")?;
                if let (Some(kind), Some(held)) = (correction, held) {
                    let fit_stats =
                        EntityStats::compute(&fit, bounds).context("stage `correct`")?;
                    let corrected = (|| -> Result<PredictionSet> {
                        let cs = CorrectionSet::from_predictions(
                            &predict_mf(&model, held.interactions())?,
                            &fit_stats,
                        )?;
                        let corr = fit_correction(&cs, kind, bounds, seed)?;
                        corr.save(&run_dir.join(format!("{kind}.correction")))?;
                        Ok(apply_correction(&corr, &p, &fit_stats)?)
                    })()
                    .context("stage `correct`")?;
                    preds.push(p);
                    preds.push(corrected);
                } else {
                    preds.push(p);
                }
            }
        }
    }

    let mut reports: Vec<EvaluationReport> = Vec::new();
    for p in &preds {
        let r = evaluate_with_stats(&train, &stats, p, &opts).context("stage `evaluate`")?;
        r.write_artifacts(&run_dir, &safe_stem(p.model_name()))
            .context("stage `evaluate`")?;
        p.save_csv(&run_dir.join(format!("{}.predictions.csv", safe_stem(p.model_name()))))?;
        reports.push(r);
    }
    let curves: Vec<_> = reports
        .iter()
        .map(|r| (r.metadata.model.as_str(), &r.curve))
        .collect();
    eauc::svg::save_curve_svg(&curves, &run_dir.join("curves.svg")).context("stage `evaluate`")?;

    let summary = json!({
        "run": run_dir.file_name().map(|s| s.to_string_lossy().into_owned()),
        "dataset": name,
        "seed": seed,
        "dks": reports[0].dks,
        "reports": reports.iter().map(|r| json!({
            "model": r.metadata.model,
            "rmse": r.rmse,
            "mae": r.mae,
            "eauc": r.eauc,
        })).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    std::fs::write(run_dir.join("summary.json"), &text).context("writing summary.json")?;
    match g.format {
        Format::Json => print!("{text}"),
        Format::Md => {
            println!(
                "# Run {}\n\n| model | RMSE | MAE | EAUC |\n|---|---|---|---|",
                run_dir.display()
            );
            for r in &reports {
                println!(
                    "| {} | {:.4} | {:.4} | {:.4} |",
                    r.metadata.model, r.rmse, r.mae, r.eauc
                );
            }
        }
    }
    eprintln!("run directory {}", run_dir.display());
    Ok(())
}
