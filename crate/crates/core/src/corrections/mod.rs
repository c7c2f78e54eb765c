//! Post-training corrections `(r̂, r̄_u, r̄_i) → r̂'` fitted on a held-out
//! slice of the train split.
//!
//! Four kinds are provided: plain OLS, OLS on an ML-RUS resampled set with a
//! hard clip, the same with logit targets and a logistic output, and a
//! regression random forest.

pub mod forest;
pub mod linear;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::binio::{BinReader, BinWriter};
use crate::data::{self, BoundsSource, Dataset, ValueBounds};
use crate::error::{Error, Result};
use crate::metrics::PredictionSet;
use crate::stats::EntityStats;

pub use forest::{ForestParams, RandomForest};

pub const DEFAULT_CORRECTION_FRACTION: f64 = 0.1;
pub const DEFAULT_MLRUS_BINS: usize = 10;

/// Targets are squeezed into `[EPS, 1 - EPS]` before the logit.
const LOGIT_EPS: f64 = 1e-3;
/// Logistic argument limit; keeps the output strictly inside the bounds.
const LOGISTIC_LIMIT: f64 = 30.0;

const MAGIC: &[u8; 8] = b"EAUCCOR\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionRecord {
    pub biased: f64,
    pub user_mean: f64,
    pub item_mean: f64,
    pub target: f64,
}

impl CorrectionRecord {
    fn features(&self) -> [f64; 3] {
        [self.biased, self.user_mean, self.item_mean]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSet {
    records: Vec<CorrectionRecord>,
}

impl CorrectionSet {
    pub fn new(records: Vec<CorrectionRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(k) = records.iter().position(|r| {
            !(r.biased.is_finite()
                && r.user_mean.is_finite()
                && r.item_mean.is_finite()
                && r.target.is_finite())
        }) {
            return Err(Error::InvalidData(format!(
                "correction record {k} has a non-finite field"
            )));
        }
        Ok(CorrectionSet { records })
    }

    /// Pairs each prediction with the entity means of `stats` (the fit-train
    /// split), falling back to the global mean for cold-start entities.
    pub fn from_predictions(p: &PredictionSet, stats: &EntityStats) -> Result<Self> {
        let records = p
            .records()
            .iter()
            .map(|r| {
                let (u, i, _) = stats.means_or_global(r.user.as_str(), r.item.as_str());
                CorrectionRecord {
                    biased: r.predicted,
                    user_mean: u,
                    item_mean: i,
                    target: r.observed,
                }
            })
            .collect();
        Self::new(records)
    }

    pub fn records(&self) -> &[CorrectionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Splits `train` into `(fit_train, correction)`; the correction part holds
/// `round(fraction * n)` rows.
pub fn carve_correction_set(
    train: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let (kept, held) = data::partition(train, fraction, seed)?;
    Ok((
        data::named_subset(train, format!("{}.fit", train.name()), &kept),
        data::named_subset(train, format!("{}.correction", train.name()), &held),
    ))
}

fn bin_of(v: f64, bounds: ValueBounds, n_bins: usize) -> usize {
    let t = (v - bounds.min_value) / bounds.range();
    ((t * n_bins as f64).floor().max(0.0) as usize).min(n_bins - 1)
}

/// Histogram of records over the `(user-bin, item-bin)` grid, row-major.
pub fn mlrus_cell_counts(cs: &CorrectionSet, n_bins: usize, bounds: ValueBounds) -> Vec<usize> {
    let mut counts = vec![0usize; n_bins * n_bins];
    for r in &cs.records {
        counts
            [bin_of(r.user_mean, bounds, n_bins) * n_bins + bin_of(r.item_mean, bounds, n_bins)] +=
            1;
    }
    counts
}

/// Undersamples every grid cell holding more than the median non-empty cell
/// count down to that median. Surviving rows keep their original order.
pub fn mlrus_resample(
    cs: &CorrectionSet,
    n_bins: usize,
    bounds: ValueBounds,
    seed: u64,
) -> Result<CorrectionSet> {
    if n_bins < 2 {
        return Err(Error::arg(format!(
            "ML-RUS needs at least 2 bins, got {n_bins}"
        )));
    }
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); n_bins * n_bins];
    for (k, r) in cs.records.iter().enumerate() {
        cells[bin_of(r.user_mean, bounds, n_bins) * n_bins + bin_of(r.item_mean, bounds, n_bins)]
            .push(k);
    }
    let mut sizes: Vec<usize> = cells.iter().map(Vec::len).filter(|&c| c > 0).collect();
    sizes.sort_unstable();
    let m = sizes.len();
    let quota = if m % 2 == 1 {
        sizes[m / 2]
    } else {
        (sizes[m / 2 - 1] + sizes[m / 2]) / 2
    };
    let mut rng = crate::rng::seeded(seed);
    let mut keep = vec![false; cs.len()];
    for cell in &mut cells {
        if cell.len() > quota {
            cell.partial_shuffle(&mut rng, quota);
            cell.truncate(quota);
        }
        for &k in cell.iter() {
            keep[k] = true;
        }
    }
    let records = cs
        .records
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| *r)
        .collect();
    CorrectionSet::new(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearVariant {
    Plain,
    MlrusClip,
    MlrusSigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorrectionKind {
    Linear,
    LinearMlrusClip,
    LinearMlrusSigmoid,
    RandomForest,
}

impl CorrectionKind {
    pub const ALL: [CorrectionKind; 4] = [
        CorrectionKind::Linear,
        CorrectionKind::LinearMlrusClip,
        CorrectionKind::LinearMlrusSigmoid,
        CorrectionKind::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorrectionKind::Linear => "linear",
            CorrectionKind::LinearMlrusClip => "linear_mlrus_clip",
            CorrectionKind::LinearMlrusSigmoid => "linear_mlrus_sigmoid",
            CorrectionKind::RandomForest => "random_forest",
        }
    }

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(t: u8) -> Option<Self> {
        Self::ALL.get(t as usize).copied()
    }
}

impl fmt::Display for CorrectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorrectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::arg(format!(
                    "unknown correction kind `{s}` (expected linear, linear_mlrus_clip, linear_mlrus_sigmoid or random_forest)"
                ))
            })
    }
}

impl From<LinearVariant> for CorrectionKind {
    fn from(v: LinearVariant) -> Self {
        match v {
            LinearVariant::Plain => CorrectionKind::Linear,
            LinearVariant::MlrusClip => CorrectionKind::LinearMlrusClip,
            LinearVariant::MlrusSigmoid => CorrectionKind::LinearMlrusSigmoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrectionParams {
    Linear([f64; 4]),
    Forest(RandomForest),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    kind: CorrectionKind,
    params: CorrectionParams,
    bounds: ValueBounds,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn fit_linear_correction(
    cs: &CorrectionSet,
    variant: LinearVariant,
    bounds: ValueBounds,
    n_bins: usize,
    seed: u64,
) -> Result<Correction> {
    let resampled;
    let set = match variant {
        LinearVariant::Plain => cs,
        _ => {
            resampled = mlrus_resample(cs, n_bins, bounds, seed)?;
            &resampled
        }
    };
    let x: Vec<[f64; 3]> = set.records.iter().map(CorrectionRecord::features).collect();
    let y: Vec<f64> = match variant {
        LinearVariant::MlrusSigmoid => set
            .records
            .iter()
            .map(|r| {
                let t = ((r.target - bounds.min_value) / bounds.range())
                    .clamp(LOGIT_EPS, 1.0 - LOGIT_EPS);
                (t / (1.0 - t)).ln()
            })
            .collect(),
        _ => set.records.iter().map(|r| r.target).collect(),
    };
    let beta = linear::ols(&x, &y)?;
    Ok(Correction {
        kind: variant.into(),
        params: CorrectionParams::Linear(beta),
        bounds,
    })
}

pub fn fit_forest_correction(
    cs: &CorrectionSet,
    params: &ForestParams,
    bounds: ValueBounds,
    seed: u64,
) -> Result<Correction> {
    if params.n_trees == 0 {
        return Err(Error::arg("random forest needs at least one tree"));
    }
    let x: Vec<[f64; 3]> = cs.records.iter().map(CorrectionRecord::features).collect();
    let y: Vec<f64> = cs.records.iter().map(|r| r.target).collect();
    Ok(Correction {
        kind: CorrectionKind::RandomForest,
        params: CorrectionParams::Forest(RandomForest::fit(&x, &y, params, seed)),
        bounds,
    })
}

/// Fits any kind with default ML-RUS bins and forest settings.
pub fn fit_correction(
    cs: &CorrectionSet,
    kind: CorrectionKind,
    bounds: ValueBounds,
    seed: u64,
) -> Result<Correction> {
    match kind {
        CorrectionKind::Linear => {
            fit_linear_correction(cs, LinearVariant::Plain, bounds, DEFAULT_MLRUS_BINS, seed)
        }
        CorrectionKind::LinearMlrusClip => fit_linear_correction(
            cs,
            LinearVariant::MlrusClip,
            bounds,
            DEFAULT_MLRUS_BINS,
            seed,
        ),
        CorrectionKind::LinearMlrusSigmoid => fit_linear_correction(
            cs,
            LinearVariant::MlrusSigmoid,
            bounds,
            DEFAULT_MLRUS_BINS,
            seed,
        ),
        CorrectionKind::RandomForest => {
            fit_forest_correction(cs, &ForestParams::default(), bounds, seed)
        }
    }
}

impl Correction {
    /// A linear correction with explicit coefficients
    /// `[intercept, biased_prediction, user_mean, item_mean]`.
    pub fn linear(
        kind: CorrectionKind,
        coefficients: [f64; 4],
        bounds: ValueBounds,
    ) -> Result<Self> {
        if kind == CorrectionKind::RandomForest {
            return Err(Error::arg(
                "random_forest corrections carry trees, not coefficients",
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::arg("correction coefficients must be finite"));
        }
        Ok(Correction {
            kind,
            params: CorrectionParams::Linear(coefficients),
            bounds,
        })
    }

    pub fn identity(bounds: ValueBounds) -> Self {
        Correction {
            kind: CorrectionKind::Linear,
            params: CorrectionParams::Linear([0.0, 1.0, 0.0, 0.0]),
            bounds,
        }
    }

    pub fn kind(&self) -> CorrectionKind {
        self.kind
    }

    pub fn params(&self) -> &CorrectionParams {
        &self.params
    }

    pub fn coefficients(&self) -> Option<[f64; 4]> {
        match self.params {
            CorrectionParams::Linear(b) => Some(b),
            CorrectionParams::Forest(_) => None,
        }
    }

    pub fn bounds(&self) -> ValueBounds {
        self.bounds
    }

    pub fn apply_one(&self, biased: f64, user_mean: f64, item_mean: f64) -> f64 {
        let x = [biased, user_mean, item_mean];
        let b = self.bounds;
        match (&self.params, self.kind) {
            (CorrectionParams::Linear(beta), CorrectionKind::LinearMlrusSigmoid) => {
                let z = linear::affine(beta, &x).clamp(-LOGISTIC_LIMIT, LOGISTIC_LIMIT);
                b.min_value + b.range() * logistic(z)
            }
            (CorrectionParams::Linear(beta), _) => b.clamp(linear::affine(beta, &x)),
            (CorrectionParams::Forest(f), _) => b.clamp(f.predict(&x)),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BinWriter::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u8(self.kind.tag());
        w.f64(self.bounds.min_value);
        w.f64(self.bounds.max_value);
        w.u8(matches!(self.bounds.source, BoundsSource::Declared) as u8);
        match &self.params {
            CorrectionParams::Linear(beta) => w.f64s(beta),
            CorrectionParams::Forest(f) => f.write(&mut w),
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BinReader::new(bytes, "correction");
        r.expect(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.fail(format!("unsupported version {version}")));
        }
        let tag = r.u8()?;
        let kind = CorrectionKind::from_tag(tag)
            .ok_or_else(|| r.fail(format!("unknown kind tag {tag}")))?;
        let (lo, hi) = (r.f64()?, r.f64()?);
        let source = match r.u8()? {
            0 => BoundsSource::Inferred,
            1 => BoundsSource::Declared,
            t => return Err(r.fail(format!("bad bounds source {t}"))),
        };
        let bounds = ValueBounds::new(lo, hi, source)?;
        let params = match kind {
            CorrectionKind::RandomForest => CorrectionParams::Forest(RandomForest::read(&mut r)?),
            _ => {
                let v = r.f64s(4)?;
                CorrectionParams::Linear([v[0], v[1], v[2], v[3]])
            }
        };
        r.finish()?;
        Ok(Correction {
            kind,
            params,
            bounds,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Replaces every prediction by its corrected value. Entity means come from
/// `stats`, with the usual cold-start fallbacks. The output model name is
/// `<model>+<kind>`.
pub fn apply_correction(
    c: &Correction,
    p: &PredictionSet,
    stats: &EntityStats,
) -> Result<PredictionSet> {
    let name = format!("{}+{}", p.model_name(), c.kind);
    Ok(p.map_predictions(name, |r| {
        let (u, i, _) = stats.means_or_global(r.user.as_str(), r.item.as_str());
        c.apply_one(r.predicted, u, i)
    }))
}
