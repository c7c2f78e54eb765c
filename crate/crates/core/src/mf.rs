//! Biased matrix factorization trained by mini-batch gradient descent.
//!
//! Score: `r̂ = g + b_u + b_i + p_u · q_i`, clamped to the value bounds at
//! prediction time. The per-batch objective is
//!
//! ```text
//! L(B) = 1/|B| Σ_{(u,i,r) ∈ B} [ (r̂_ui - r)² + λ (|p_u|² + |q_i|² + b_u² + b_i²) ]
//! ```
//!
//! with `g` unregularized. Early stopping monitors RMSE on a seeded
//! validation slice of the train split and restores the best parameters.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::binio::{BinReader, BinWriter};
use crate::config::KeyValueConfig;
use crate::data::{BoundsSource, Dataset, EntityId, Interaction, ValueBounds};
use crate::error::{Error, Result};
use crate::metrics::PredictionSet;

pub const MODEL_NAME: &str = "mf";

const CHECKPOINT_MAGIC: &[u8; 8] = b"EAUCMF\0\0";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            o => Err(Error::arg(format!("unknown optimizer `{o}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MfHyperparams {
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub l2_weight: f64,
    pub early_stop_patience: usize,
    pub early_stop_delta: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for MfHyperparams {
    /// Desk-scale settings: embedding dimension 64 instead of 512.
    fn default() -> Self {
        MfHyperparams {
            embedding_dim: 64,
            learning_rate: 0.001,
            l2_weight: 1e-5,
            early_stop_patience: 10,
            early_stop_delta: 1e-4,
            max_epochs: 200,
            batch_size: 1024,
            validation_fraction: 0.1,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl MfHyperparams {
    pub const KEYS: [&'static str; 10] = [
        "embedding_dim",
        "learning_rate",
        "l2_weight",
        "early_stop_patience",
        "early_stop_delta",
        "max_epochs",
        "batch_size",
        "validation_fraction",
        "seed",
        "optimizer",
    ];

    /// The published MovieLens configuration (embedding dimension 512).
    pub fn movielens_full() -> Self {
        MfHyperparams {
            embedding_dim: 512,
            ..Self::default()
        }
    }

    /// Defaults overridden by any of [`Self::KEYS`] present in `cfg`, which
    /// may be prefixed (e.g. `mf.` in a pipeline config).
    pub fn from_config(cfg: &KeyValueConfig, prefix: &str) -> Result<Self> {
        let mut hp = Self::default();
        let key = |k: &str| format!("{prefix}{k}");
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = cfg.get_parsed(&key(stringify!($field)))? {
                    hp.$field = v;
                }
            };
        }
        set!(embedding_dim);
        set!(learning_rate);
        set!(l2_weight);
        set!(early_stop_patience);
        set!(early_stop_delta);
        set!(max_epochs);
        set!(batch_size);
        set!(validation_fraction);
        set!(seed);
        set!(optimizer);
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::arg(format!("hyperparameter {m}")));
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad("l2_weight must be finite and non-negative");
        }
        if self.early_stop_patience == 0 || self.max_epochs == 0 || self.batch_size == 0 {
            return bad("early_stop_patience, max_epochs and batch_size must be positive");
        }
        if !(self.early_stop_delta >= 0.0) {
            return bad("early_stop_delta must be non-negative");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return bad("validation_fraction must lie in (0, 0.5)");
        }
        Ok(())
    }
}

/// A trained (or freshly initialized) factorization model.
#[derive(Debug, Clone, PartialEq)]
pub struct MfModel {
    dim: usize,
    users: Vec<EntityId>,
    items: Vec<EntityId>,
    user_index: HashMap<EntityId, usize>,
    item_index: HashMap<EntityId, usize>,
    global_bias: f64,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    user_emb: Vec<f64>,
    item_emb: Vec<f64>,
    bounds: ValueBounds,
    seed: u64,
}

/// Flattened gradient in [`MfModel::param`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct MfGradient(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_validation_rmse: f64,
}

/// Train row in index space.
#[derive(Debug, Clone, Copy)]
pub struct IndexedRating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

fn index_entities<'a>(
    ids: impl Iterator<Item = &'a EntityId>,
) -> (Vec<EntityId>, HashMap<EntityId, usize>) {
    let mut order = Vec::new();
    let mut index = HashMap::new();
    for id in ids {
        if !index.contains_key(id) {
            index.insert(id.clone(), order.len());
            order.push(id.clone());
        }
    }
    (order, index)
}

impl MfModel {
    /// Index maps over `train` entities (first-appearance order), embeddings
    /// drawn from `N(0, (0.1/√d)²)`, entity biases zero, global bias at the
    /// train mean.
    pub fn initialize(train: &Dataset, dim: usize, bounds: ValueBounds, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 {
            return Err(Error::arg("embedding_dim must be positive"));
        }
        let (users, user_index) = index_entities(train.interactions().iter().map(|i| &i.user));
        let (items, item_index) = index_entities(train.interactions().iter().map(|i| &i.item));
        let normal = Normal::new(0.0, 0.1 / (dim as f64).sqrt()).expect("positive stddev");
        let mut rng = crate::rng::stream(seed, 1);
        let user_emb = (0..users.len() * dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        let item_emb = (0..items.len() * dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        let global_bias = train.values().sum::<f64>() / train.len() as f64;
        Ok(MfModel {
            dim,
            user_bias: vec![0.0; users.len()],
            item_bias: vec![0.0; items.len()],
            users,
            items,
            user_index,
            item_index,
            global_bias,
            user_emb,
            item_emb,
            bounds,
            seed,
        })
    }

    /// Model with every parameter zero except `global_bias`.
    pub fn constant(
        train: &Dataset,
        dim: usize,
        bounds: ValueBounds,
        global_bias: f64,
    ) -> Result<Self> {
        let mut m = Self::initialize(train, dim, bounds, 0)?;
        m.user_emb.iter_mut().for_each(|v| *v = 0.0);
        m.item_emb.iter_mut().for_each(|v| *v = 0.0);
        m.global_bias = global_bias;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn bounds(&self) -> ValueBounds {
        self.bounds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn global_bias(&self) -> f64 {
        self.global_bias
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    /// Maps rows onto model indices; rows with unknown entities are errors.
    pub fn index_rows(&self, rows: &[Interaction]) -> Result<Vec<IndexedRating>> {
        rows.iter()
            .map(
                |r| match (self.user_index(&r.user), self.item_index(&r.item)) {
                    (Some(user), Some(item)) => Ok(IndexedRating {
                        user,
                        item,
                        value: r.value,
                    }),
                    _ => Err(Error::InvalidData(format!(
                        "dyad ({}, {}) is not covered by the model",
                        r.user, r.item
                    ))),
                },
            )
            .collect()
    }

    fn dot(&self, u: usize, i: usize) -> f64 {
        let d = self.dim;
        self.user_emb[u * d..(u + 1) * d]
            .iter()
            .zip(&self.item_emb[i * d..(i + 1) * d])
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Unclamped score for known indices.
    pub fn raw_score(&self, u: usize, i: usize) -> f64 {
        self.global_bias + self.user_bias[u] + self.item_bias[i] + self.dot(u, i)
    }

    /// Clamped prediction; an unseen user or item contributes no bias and a
    /// zero embedding.
    pub fn predict_one(&self, user: &str, item: &str) -> f64 {
        let u = self.user_index(user);
        let i = self.item_index(item);
        let mut s = self.global_bias;
        if let Some(u) = u {
            s += self.user_bias[u];
        }
        if let Some(i) = i {
            s += self.item_bias[i];
        }
        if let (Some(u), Some(i)) = (u, i) {
            s += self.dot(u, i);
        }
        self.bounds.clamp(s)
    }

    pub fn param_count(&self) -> usize {
        1 + self.user_bias.len() + self.item_bias.len() + self.user_emb.len() + self.item_emb.len()
    }

    fn offsets(&self) -> [usize; 4] {
        let a = 1;
        let b = a + self.user_bias.len();
        let c = b + self.item_bias.len();
        let d = c + self.user_emb.len();
        [a, b, c, d]
    }

    /// Flattened parameter `k`: global bias, user biases, item biases, user
    /// embeddings (row-major), item embeddings.
    pub fn param(&self, k: usize) -> f64 {
        let [a, b, c, d] = self.offsets();
        match k {
            0 => self.global_bias,
            k if k < b => self.user_bias[k - a],
            k if k < c => self.item_bias[k - b],
            k if k < d => self.user_emb[k - c],
            k => self.item_emb[k - d],
        }
    }

    pub fn set_param(&mut self, k: usize, v: f64) {
        let [a, b, c, d] = self.offsets();
        match k {
            0 => self.global_bias = v,
            k if k < b => self.user_bias[k - a] = v,
            k if k < c => self.item_bias[k - b] = v,
            k if k < d => self.user_emb[k - c] = v,
            k => self.item_emb[k - d] = v,
        }
    }

    fn params_all_finite(&self) -> bool {
        self.global_bias.is_finite()
            && self.user_bias.iter().all(|v| v.is_finite())
            && self.item_bias.iter().all(|v| v.is_finite())
            && self.user_emb.iter().all(|v| v.is_finite())
            && self.item_emb.iter().all(|v| v.is_finite())
    }

    /// Objective value over `batch` (see module docs).
    pub fn objective(&self, batch: &[IndexedRating], l2: f64) -> f64 {
        let d = self.dim;
        let total: f64 = batch
            .iter()
            .map(|r| {
                let e = self.raw_score(r.user, r.item) - r.value;
                let pu = &self.user_emb[r.user * d..(r.user + 1) * d];
                let qi = &self.item_emb[r.item * d..(r.item + 1) * d];
                let reg = pu.iter().map(|x| x * x).sum::<f64>()
                    + qi.iter().map(|x| x * x).sum::<f64>()
                    + self.user_bias[r.user].powi(2)
                    + self.item_bias[r.item].powi(2);
                e * e + l2 * reg
            })
            .sum();
        total / batch.len() as f64
    }

    /// Objective and its analytic gradient, flattened in [`Self::param`] order.
    pub fn loss_and_gradient(&self, batch: &[IndexedRating], l2: f64) -> (f64, MfGradient) {
        let mut grad = vec![0.0; self.param_count()];
        let loss = self.accumulate_gradient(batch, l2, &mut grad);
        (loss, MfGradient(grad))
    }

    fn accumulate_gradient(&self, batch: &[IndexedRating], l2: f64, grad: &mut [f64]) -> f64 {
        let d = self.dim;
        let [a, b, c, e_off] = self.offsets();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for r in batch {
            let (u, i) = (r.user, r.item);
            let pu = &self.user_emb[u * d..(u + 1) * d];
            let qi = &self.item_emb[i * d..(i + 1) * d];
            let bu = self.user_bias[u];
            let bi = self.item_bias[i];
            let e = self.raw_score(u, i) - r.value;
            let reg = pu.iter().map(|x| x * x).sum::<f64>()
                + qi.iter().map(|x| x * x).sum::<f64>()
                + bu * bu
                + bi * bi;
            loss += e * e + l2 * reg;
            let g = 2.0 * e * scale;
            let lam = 2.0 * l2 * scale;
            grad[0] += g;
            grad[a + u] += g + lam * bu;
            grad[b + i] += g + lam * bi;
            for k in 0..d {
                grad[c + u * d + k] += g * qi[k] + lam * pu[k];
                grad[e_off + i * d + k] += g * pu[k] + lam * qi[k];
            }
        }
        loss * scale
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        std::iter::once(&mut self.global_bias)
            .chain(self.user_bias.iter_mut())
            .chain(self.item_bias.iter_mut())
            .chain(self.user_emb.iter_mut())
            .chain(self.item_emb.iter_mut())
    }

    fn rmse_on(&self, rows: &[IndexedRating]) -> f64 {
        let sse: f64 = rows
            .iter()
            .map(|r| (self.bounds.clamp(self.raw_score(r.user, r.item)) - r.value).powi(2))
            .sum();
        (sse / rows.len() as f64).sqrt()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BinWriter::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u32(self.dim as u32);
        w.u32(self.users.len() as u32);
        w.u32(self.items.len() as u32);
        w.u64(self.seed);
        w.f64(self.bounds.min_value);
        w.f64(self.bounds.max_value);
        w.u8(match self.bounds.source {
            BoundsSource::Declared => 0,
            BoundsSource::Inferred => 1,
        });
        w.f64(self.global_bias);
        for id in self.users.iter().chain(&self.items) {
            w.str(id.as_str());
        }
        w.f64s(&self.user_bias);
        w.f64s(&self.item_bias);
        w.f64s(&self.user_emb);
        w.f64s(&self.item_emb);
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = BinReader::new(data, "model checkpoint");
        r.expect(CHECKPOINT_MAGIC)?;
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.fail(format!("unsupported version {version}")));
        }
        let dim = r.u32()? as usize;
        let n_users = r.u32()? as usize;
        let n_items = r.u32()? as usize;
        let seed = r.u64()?;
        let (lo, hi) = (r.f64()?, r.f64()?);
        let source = match r.u8()? {
            0 => BoundsSource::Declared,
            1 => BoundsSource::Inferred,
            s => return Err(r.fail(format!("bad bounds source {s}"))),
        };
        let bounds = ValueBounds::new(lo, hi, source)?;
        let global_bias = r.f64()?;
        let mut read_ids = |n: usize| -> Result<Vec<EntityId>> {
            (0..n).map(|_| r.str().map(|s| EntityId::new(&s))).collect()
        };
        let users = read_ids(n_users)?;
        let items = read_ids(n_items)?;
        let user_bias = r.f64s(n_users)?;
        let item_bias = r.f64s(n_items)?;
        let user_emb = r.f64s(n_users * dim)?;
        let item_emb = r.f64s(n_items * dim)?;
        r.finish()?;
        let (_, user_index) = index_entities(users.iter());
        let (_, item_index) = index_entities(items.iter());
        if user_index.len() != n_users || item_index.len() != n_items {
            return Err(r.fail("duplicate entity ids"));
        }
        Ok(MfModel {
            dim,
            users,
            items,
            user_index,
            item_index,
            global_bias,
            user_bias,
            item_bias,
            user_emb,
            item_emb,
            bounds,
            seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&data)
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_step(model: &mut MfModel, grad: &[f64], hp: &MfHyperparams, adam: &mut AdamState) {
    let lr = hp.learning_rate;
    match hp.optimizer {
        Optimizer::Sgd => {
            for (p, g) in model.params_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam => {
            adam.t += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(adam.t);
            let c2 = 1.0 - ADAM_BETA2.powi(adam.t);
            for (((p, &g), m), v) in model
                .params_mut()
                .zip(grad)
                .zip(adam.m.iter_mut())
                .zip(adam.v.iter_mut())
            {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

pub fn train_mf(train: &Dataset, bounds: ValueBounds, hp: &MfHyperparams) -> Result<MfModel> {
    train_mf_logged(train, bounds, hp).map(|(m, _)| m)
}

/// Trains and also returns the per-epoch log.
pub fn train_mf_logged(
    train: &Dataset,
    bounds: ValueBounds,
    hp: &MfHyperparams,
) -> Result<(MfModel, TrainingHistory)> {
    hp.validate()?;
    let mut model = MfModel::initialize(train, hp.embedding_dim, bounds, hp.seed)?;
    let (fit_rows, val_rows) =
        crate::data::partition(train, hp.validation_fraction, hp.seed ^ 0x005e_ed0f_u64)?;
    let rows = model.index_rows(train.interactions())?;
    let mut fit: Vec<IndexedRating> = fit_rows.iter().map(|&k| rows[k]).collect();
    let val: Vec<IndexedRating> = val_rows.iter().map(|&k| rows[k]).collect();

    let n_params = model.param_count();
    let mut grad = vec![0.0; n_params];
    let mut adam = AdamState {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let mut shuffle_rng = crate::rng::stream(hp.seed, 2);

    let mut best = model.clone();
    let mut best_rmse = model.rmse_on(&val);
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs = Vec::new();

    for epoch in 1..=hp.max_epochs {
        fit.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in fit.chunks(hp.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.accumulate_gradient(batch, hp.l2_weight, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            apply_step(&mut model, &grad, hp, &mut adam);
        }
        if !model.params_all_finite() {
            return Err(Error::Diverged { epoch });
        }
        let validation_rmse = model.rmse_on(&val);
        if !validation_rmse.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / fit.len() as f64,
            validation_rmse,
        });
        if validation_rmse < best_rmse - hp.early_stop_delta {
            best_rmse = validation_rmse;
            best_epoch = epoch;
            best.clone_from(&model);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= hp.early_stop_patience {
                break;
            }
        }
    }
    Ok((
        best,
        TrainingHistory {
            epochs,
            best_epoch,
            best_validation_rmse: best_rmse,
        },
    ))
}

pub fn predict_mf(model: &MfModel, dyads: &[Interaction]) -> Result<PredictionSet> {
    let preds: Vec<f64> = dyads
        .iter()
        .map(|d| model.predict_one(&d.user, &d.item))
        .collect();
    PredictionSet::from_dyads(MODEL_NAME, dyads, preds, model.bounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let rows = (0..40)
            .map(|k| {
                Interaction::new(
                    format!("u{}", k % 5).as_str(),
                    format!("i{}", k % 8).as_str(),
                    1.0 + ((k * 7) % 5) as f64,
                )
            })
            .collect();
        Dataset::new("tiny", rows, None).unwrap()
    }

    fn b15() -> ValueBounds {
        ValueBounds::declared(1.0, 5.0).unwrap()
    }

    #[test]
    fn constant_model_predicts_global_bias() {
        let m = MfModel::constant(&tiny(), 4, b15(), 3.0).unwrap();
        let p = predict_mf(&m, tiny().interactions()).unwrap();
        assert!(p.records().iter().all(|r| r.predicted == 3.0));
        assert_eq!(m.predict_one("nobody", "nothing"), 3.0);
    }

    #[test]
    fn predictions_are_clamped() {
        let m = MfModel::constant(&tiny(), 2, b15(), 6.2).unwrap();
        assert_eq!(m.predict_one("u0", "i0"), 5.0);
        let m = MfModel::constant(&tiny(), 2, b15(), -3.0).unwrap();
        assert_eq!(m.predict_one("u0", "i0"), 1.0);
    }

    #[test]
    fn zero_learning_rate_keeps_init() {
        let hp = MfHyperparams {
            embedding_dim: 3,
            learning_rate: 0.0,
            max_epochs: 3,
            batch_size: 8,
            seed: 11,
            ..MfHyperparams::default()
        };
        let init = MfModel::initialize(&tiny(), 3, b15(), 11).unwrap();
        let trained = train_mf(&tiny(), b15(), &hp).unwrap();
        assert_eq!(init, trained);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let hp = MfHyperparams {
            embedding_dim: 3,
            max_epochs: 2,
            batch_size: 8,
            ..MfHyperparams::default()
        };
        let m = train_mf(&tiny(), b15(), &hp).unwrap();
        let back = MfModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(m, back);
        let mut bytes = m.to_bytes();
        bytes[0] = b'X';
        assert!(MfModel::from_bytes(&bytes).is_err());
        assert!(MfModel::from_bytes(&m.to_bytes()[..20]).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let hp = MfHyperparams {
            embedding_dim: 2,
            learning_rate: 1e200,
            optimizer: Optimizer::Sgd,
            batch_size: 4,
            ..MfHyperparams::default()
        };
        assert!(matches!(
            train_mf(&tiny(), b15(), &hp),
            Err(Error::Diverged { epoch: 1 })
        ));
    }

    #[test]
    fn hyperparams_from_config() {
        let cfg = KeyValueConfig::parse("mf.embedding_dim = 8\nmf.optimizer = sgd\n").unwrap();
        let hp = MfHyperparams::from_config(&cfg, "mf.").unwrap();
        assert_eq!(hp.embedding_dim, 8);
        assert_eq!(hp.optimizer, Optimizer::Sgd);
        assert_eq!(hp.learning_rate, 0.001);
        let bad = KeyValueConfig::parse("validation_fraction = 0.7\n").unwrap();
        assert!(MfHyperparams::from_config(&bad, "").is_err());
    }
}
