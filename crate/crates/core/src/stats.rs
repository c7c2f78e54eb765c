//! Per-entity mean values, dyadic mean value (DMV) and eccentricity.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::data::{Dataset, EntityId, ValueBounds};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntityMean {
    pub mean: f64,
    pub count: usize,
}

/// Which side of a dyad had no train observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColdStart {
    None,
    User,
    Item,
    Both,
}

/// Train-split means. Immutable once built.
#[derive(Debug, Clone)]
pub struct EntityStats {
    user_means: HashMap<EntityId, EntityMean>,
    item_means: HashMap<EntityId, EntityMean>,
    global_mean: f64,
    bounds: ValueBounds,
}

fn accumulate(acc: &mut HashMap<EntityId, (f64, usize)>, id: &EntityId, v: f64) {
    let e = acc.entry(id.clone()).or_insert((0.0, 0));
    e.0 += v;
    e.1 += 1;
}

fn finish(acc: HashMap<EntityId, (f64, usize)>) -> HashMap<EntityId, EntityMean> {
    acc.into_iter()
        .map(|(k, (sum, count))| {
            (
                k,
                EntityMean {
                    mean: sum / count as f64,
                    count,
                },
            )
        })
        .collect()
}

impl EntityStats {
    /// Means over `train` only. Every train value must lie within `bounds`.
    pub fn compute(train: &Dataset, bounds: ValueBounds) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut users = HashMap::new();
        let mut items = HashMap::new();
        let mut total = 0.0;
        for it in train.interactions() {
            bounds.check(it.value)?;
            accumulate(&mut users, &it.user, it.value);
            accumulate(&mut items, &it.item, it.value);
            total += it.value;
        }
        Ok(EntityStats {
            user_means: finish(users),
            item_means: finish(items),
            global_mean: total / train.len() as f64,
            bounds,
        })
    }

    pub fn bounds(&self) -> ValueBounds {
        self.bounds
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn user_mean(&self, user: &str) -> Option<f64> {
        self.user_means.get(user).map(|m| m.mean)
    }

    pub fn item_mean(&self, item: &str) -> Option<f64> {
        self.item_means.get(item).map(|m| m.mean)
    }

    pub fn n_users(&self) -> usize {
        self.user_means.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_means.len()
    }

    /// User and item means with the global mean standing in for unseen entities.
    pub fn means_or_global(&self, user: &str, item: &str) -> (f64, f64, ColdStart) {
        let u = self.user_mean(user);
        let i = self.item_mean(item);
        let cold = match (u, i) {
            (Some(_), Some(_)) => ColdStart::None,
            (None, Some(_)) => ColdStart::User,
            (Some(_), None) => ColdStart::Item,
            (None, None) => ColdStart::Both,
        };
        (
            u.unwrap_or(self.global_mean),
            i.unwrap_or(self.global_mean),
            cold,
        )
    }

    /// `(r̄_u + r̄_i) / 2`, falling back to the global mean for a missing side.
    pub fn dmv(&self, user: &str, item: &str) -> f64 {
        self.dmv_detail(user, item).0
    }

    pub fn dmv_detail(&self, user: &str, item: &str) -> (f64, ColdStart) {
        let (u, i, cold) = self.means_or_global(user, item);
        ((u + i) / 2.0, cold)
    }

    pub fn eccentricity(&self, user: &str, item: &str, value: f64) -> f64 {
        (value - self.dmv(user, item)).abs()
    }

    /// CSV dump `entity_type,entity_id,mean,count`, users then items, each
    /// sorted by id.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "entity_type,entity_id,mean,count")?;
        for (kind, map) in [("user", &self.user_means), ("item", &self.item_means)] {
            let mut rows: Vec<_> = map.iter().collect();
            rows.sort_by(|a, b| a.0.cmp(b.0));
            for (id, m) in rows {
                writeln!(w, "{kind},{id},{},{}", m.mean, m.count)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Interaction;

    fn stats(rows: &[(&str, &str, f64)]) -> EntityStats {
        let d = Dataset::new(
            "t",
            rows.iter()
                .map(|&(u, i, v)| Interaction::new(u, i, v))
                .collect(),
            None,
        )
        .unwrap();
        EntityStats::compute(&d, ValueBounds::declared(1.0, 5.0).unwrap()).unwrap()
    }

    #[test]
    fn arithmetic_means() {
        let s = stats(&[("a", "x", 2.0), ("a", "y", 4.0)]);
        assert_eq!(s.user_mean("a"), Some(3.0));
        assert_eq!(s.item_mean("x"), Some(2.0));
        assert_eq!(s.global_mean(), 3.0);
        assert_eq!(s.user_mean("zz"), None);
    }

    #[test]
    fn single_interaction() {
        let s = stats(&[("a", "x", 5.0)]);
        assert_eq!(s.user_mean("a"), Some(5.0));
        assert_eq!(s.item_mean("x"), Some(5.0));
        assert_eq!(s.global_mean(), 5.0);
    }

    #[test]
    fn dmv_and_fallbacks() {
        let s = stats(&[
            ("a", "x", 2.0),
            ("a", "x", 2.0),
            ("b", "y", 4.0),
            ("b", "y", 4.0),
        ]);
        assert_eq!(s.global_mean(), 3.0);
        assert_eq!(s.dmv("a", "y"), 3.0);
        assert_eq!(s.dmv_detail("new", "y"), (3.5, ColdStart::User));
        assert_eq!(s.dmv_detail("a", "new"), (2.5, ColdStart::Item));
        assert_eq!(s.dmv_detail("new", "new"), (3.0, ColdStart::Both));
    }

    #[test]
    fn eccentricity_cases() {
        let s = stats(&[("a", "x", 2.0), ("b", "y", 4.0)]);
        assert_eq!(s.eccentricity("a", "y", 3.0), 0.0);
        assert_eq!(s.eccentricity("a", "y", 5.0), 2.0);
        let s = stats(&[("a", "x", 5.0)]);
        assert_eq!(s.eccentricity("a", "x", 1.0), 4.0);
    }

    #[test]
    fn rejects_out_of_bounds_train() {
        let d = Dataset::new("t", vec![Interaction::new("a", "x", 9.0)], None).unwrap();
        assert!(EntityStats::compute(&d, ValueBounds::declared(1.0, 5.0).unwrap()).is_err());
    }

    #[test]
    fn csv_dump() {
        let s = stats(&[("b", "x", 2.0), ("a", "x", 4.0)]);
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "entity_type,entity_id,mean,count\nuser,a,4,1\nuser,b,2,1\nitem,x,3,2\n"
        );
    }
}
