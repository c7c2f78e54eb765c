//! Dataset difficulty: how far each entity's observed values are from a
//! continuous uniform distribution over the value bounds.
//!
//! Every user and item gets an exact one-sample Kolmogorov–Smirnov distance;
//! the dataset score is the unweighted mean over all users and items of the
//! train split, so an entity with one rating counts as much as a prolific one.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, EntityId, ValueBounds};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityKs {
    pub n: usize,
    pub dks: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifficultyReport {
    pub dks_dataset: f64,
    pub per_user: BTreeMap<EntityId, EntityKs>,
    pub per_item: BTreeMap<EntityId, EntityKs>,
    pub bounds: ValueBounds,
}

/// `sup_x |F_emp(x) - F_unif(x)|` for the uniform CDF on `bounds`.
///
/// The supremum of a step function against a continuous CDF is reached just
/// before or at one of the sample points, so checking both sides of every
/// step is exact.
pub fn entity_ks(values: &[f64], bounds: ValueBounds) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let range = bounds.range();
    if !(range > 0.0) {
        return Err(Error::DegenerateBounds {
            min: bounds.min_value,
            max: bounds.max_value,
        });
    }
    let mut sorted = values.to_vec();
    for &v in &sorted {
        bounds.check(v)?;
    }
    sorted.sort_by(f64::total_cmp);
    Ok(ks_sorted(&sorted, bounds.min_value, range))
}

fn ks_sorted(sorted: &[f64], min: f64, range: f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (k, &x)| {
        let f = (x - min) / range;
        let above = (k + 1) as f64 / n - f;
        let below = f - k as f64 / n;
        d.max(above).max(below)
    })
}

fn group_values<'a>(
    train: &'a Dataset,
    key: impl Fn(&'a crate::data::Interaction) -> &'a EntityId,
) -> HashMap<&'a EntityId, Vec<f64>> {
    let mut groups: HashMap<&EntityId, Vec<f64>> = HashMap::new();
    for it in train.interactions() {
        groups.entry(key(it)).or_default().push(it.value);
    }
    groups
}

fn per_entity(
    groups: HashMap<&EntityId, Vec<f64>>,
    bounds: ValueBounds,
) -> Result<BTreeMap<EntityId, EntityKs>> {
    groups
        .into_par_iter()
        .map(|(id, vals)| {
            let dks = entity_ks(&vals, bounds)?;
            Ok((id.clone(), EntityKs { n: vals.len(), dks }))
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

/// Entity-wise KS over the train split.
pub fn dataset_ks(train: &Dataset, bounds: ValueBounds) -> Result<DifficultyReport> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let per_user = per_entity(group_values(train, |i| &i.user), bounds)?;
    let per_item = per_entity(group_values(train, |i| &i.item), bounds)?;
    // Summed in id order so the result does not depend on hashing.
    let total: f64 = per_user
        .values()
        .chain(per_item.values())
        .map(|e| e.dks)
        .sum();
    let dks_dataset = total / (per_user.len() + per_item.len()) as f64;
    Ok(DifficultyReport {
        dks_dataset,
        per_user,
        per_item,
        bounds,
    })
}

impl DifficultyReport {
    /// CSV `entity_type,entity_id,n,dks`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "entity_type,entity_id,n,dks")?;
        for (kind, map) in [("user", &self.per_user), ("item", &self.per_item)] {
            for (id, e) in map {
                writeln!(w, "{kind},{id},{},{}", e.n, e.dks)?;
            }
        }
        Ok(())
    }
}
