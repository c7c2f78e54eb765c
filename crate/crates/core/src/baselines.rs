//! Naive reference predictors.

use rand::Rng;

use crate::data::{Interaction, ValueBounds};
use crate::error::Result;
use crate::metrics::PredictionSet;
use crate::stats::EntityStats;

pub const RANDOM: &str = "random";
pub const DYAD_AVERAGE: &str = "dyad_average";

/// I.i.d. continuous uniform predictions on `bounds`, one draw per dyad in
/// order from a single seeded stream.
pub fn predict_random(
    dyads: &[Interaction],
    bounds: ValueBounds,
    seed: u64,
) -> Result<PredictionSet> {
    let mut rng = crate::rng::seeded(seed);
    let (lo, range) = (bounds.min_value, bounds.range());
    let preds: Vec<f64> = dyads
        .iter()
        .map(|_| lo + range * rng.gen::<f64>())
        .collect();
    PredictionSet::from_dyads(RANDOM, dyads, preds, bounds)
}

/// Predicts each dyad's DMV, so the absolute error equals the eccentricity.
pub fn predict_dyad_average(stats: &EntityStats, dyads: &[Interaction]) -> Result<PredictionSet> {
    let preds: Vec<f64> = dyads.iter().map(|d| stats.dmv(&d.user, &d.item)).collect();
    PredictionSet::from_dyads(DYAD_AVERAGE, dyads, preds, stats.bounds())
}
