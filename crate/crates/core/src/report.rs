//! Evaluation reports: every metric for one prediction set, rendered as JSON
//! or Markdown.
//!
//! JSON key order follows struct field order and numbers are printed with the
//! shortest round-trip form, so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use crate::data::{BoundsSource, Dataset, ValueBounds};
use crate::difficulty::dataset_ks;
use crate::error::{Error, Result};
use crate::metrics::{self, CurveBin, EccErrorCurve, PredictionSet, ValueRmse};
use crate::stats::{ColdStart, EntityStats};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsInfo {
    pub min: f64,
    pub max: f64,
    pub source: BoundsSource,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ColdStartCounts {
    pub none: usize,
    pub user: usize,
    pub item: usize,
    pub both: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub model: String,
    pub dataset: String,
    pub seed: Option<u64>,
    pub bounds: BoundsInfo,
    pub n_train: usize,
    pub n_test: usize,
    pub cold_start: ColdStartCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub metadata: ReportMetadata,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the labels look continuous (too many distinct values).
    pub per_value_rmse: Option<Vec<ValueRmse>>,
    pub eauc: f64,
    pub dks: Option<f64>,
    #[serde(serialize_with = "binned_only")]
    pub curve: EccErrorCurve,
}

#[derive(Serialize)]
struct BinnedCurve<'a> {
    ecc_range: f64,
    bins: &'a [CurveBin],
}

fn binned_only<S: Serializer>(c: &EccErrorCurve, s: S) -> std::result::Result<S::Ok, S::Error> {
    BinnedCurve {
        ecc_range: c.ecc_range,
        bins: &c.binned,
    }
    .serialize(s)
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub seed: Option<u64>,
    pub compute_dks: bool,
    pub n_bins: usize,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        EvaluateOptions {
            seed: None,
            compute_dks: true,
            n_bins: metrics::DEFAULT_BINS,
        }
    }
}

/// Computes entity means on `train`, then every metric of `p`.
pub fn evaluate(
    train: &Dataset,
    p: &PredictionSet,
    bounds: ValueBounds,
    opts: &EvaluateOptions,
) -> Result<EvaluationReport> {
    let stats = EntityStats::compute(train, bounds)?;
    evaluate_with_stats(train, &stats, p, opts)
}

pub fn evaluate_with_stats(
    train: &Dataset,
    stats: &EntityStats,
    p: &PredictionSet,
    opts: &EvaluateOptions,
) -> Result<EvaluationReport> {
    let bounds = stats.bounds();
    let (eauc, curve) = metrics::eauc(stats, p, bounds)?;
    let curve = metrics::ecc_error_curve_binned(&curve, opts.n_bins)?;
    let per_value_rmse = match metrics::per_value_rmse(p) {
        Ok(v) => Some(v.by_value),
        Err(Error::TooManyDistinctValues { .. }) => None,
        Err(e) => return Err(e),
    };
    let dks = if opts.compute_dks {
        Some(dataset_ks(train, bounds)?.dks_dataset)
    } else {
        None
    };
    let mut cold = ColdStartCounts::default();
    for r in p.records() {
        match stats.means_or_global(r.user.as_str(), r.item.as_str()).2 {
            ColdStart::None => cold.none += 1,
            ColdStart::User => cold.user += 1,
            ColdStart::Item => cold.item += 1,
            ColdStart::Both => cold.both += 1,
        }
    }
    Ok(EvaluationReport {
        metadata: ReportMetadata {
            model: p.model_name().to_string(),
            dataset: train.name().to_string(),
            seed: opts.seed,
            bounds: BoundsInfo {
                min: bounds.min_value,
                max: bounds.max_value,
                source: bounds.source,
            },
            n_train: train.len(),
            n_test: p.len(),
            cold_start: cold,
        },
        rmse: metrics::rmse(p),
        mae: metrics::mae(p),
        per_value_rmse,
        eauc,
        dks,
        curve,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self) -> String {
        let m = &self.metadata;
        let mut s = String::new();
        let _ = writeln!(s, "# Evaluation: {} on {}\n", m.model, m.dataset);
        let _ = writeln!(
            s,
            "Bounds [{}, {}] ({}), {} train rows, {} test rows, seed {}.\n",
            m.bounds.min,
            m.bounds.max,
            m.bounds.source,
            m.n_train,
            m.n_test,
            m.seed.map_or_else(|| "n/a".to_string(), |v| v.to_string())
        );
        let c = &m.cold_start;
        let _ = writeln!(
            s,
            "Cold start: {} user-only, {} item-only, {} both.\n",
            c.user, c.item, c.both
        );
        s.push_str("| metric | value |\n|---|---|\n");
        let _ = writeln!(s, "| RMSE | {:.4} |", self.rmse);
        let _ = writeln!(s, "| MAE | {:.4} |", self.mae);
        let _ = writeln!(s, "| EAUC | {:.4} |", self.eauc);
        let _ = writeln!(s, "| D_KS (train) | {} |", fmt_opt(self.dks));
        if let Some(rows) = &self.per_value_rmse {
            s.push_str("\n## RMSE by observed value\n\n| value | rmse | count |\n|---|---|---|\n");
            for r in rows {
                let _ = writeln!(s, "| {} | {:.4} | {} |", r.value, r.rmse, r.count);
            }
        }
        s.push_str("\n## Eccentricity vs absolute error\n\n| bin center | mean | std | count |\n|---|---|---|---|\n");
        for b in &self.curve.binned {
            let _ = writeln!(
                s,
                "| {:.3} | {:.4} | {:.4} | {} |",
                b.center, b.mean, b.std, b.count
            );
        }
        s
    }

    /// Writes `<stem>.json`, `<stem>.md`, `<stem>.curve.csv`,
    /// `<stem>.curve_binned.csv` and `<stem>.svg` into `dir`.
    pub fn write_artifacts(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = |ext: &str| dir.join(format!("{stem}.{ext}"));
        let mut written = Vec::new();
        let mut put = |p: PathBuf, bytes: Vec<u8>| -> Result<()> {
            std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
            written.push(p);
            Ok(())
        };
        put(path("json"), self.to_json().into_bytes())?;
        put(path("md"), self.to_markdown().into_bytes())?;
        let mut buf = Vec::new();
        self.curve.write_points_csv(&mut buf).expect("write to Vec");
        put(path("curve.csv"), buf)?;
        let mut buf = Vec::new();
        self.curve.write_binned_csv(&mut buf).expect("write to Vec");
        put(path("curve_binned.csv"), buf)?;
        put(
            path("svg"),
            crate::svg::render_curve_svg(&[(self.metadata.model.as_str(), &self.curve)])?
                .into_bytes(),
        )?;
        Ok(written)
    }
}
