//! Global error metrics, EAUC and eccentricity diagnostics.
//!
//! EAUC sorts test examples by eccentricity `|r - DMV|`, integrates the
//! absolute prediction error over eccentricity with the trapezoidal rule and
//! normalizes by `(max - min)^2` of the value bounds.
//!
//! Examples sharing an eccentricity are merged into one point carrying their
//! mean error before integration. Without this, the integral would depend on
//! the order ties happen to be sorted in. Error is the absolute residual
//! `|r̂ - r|`; a squared-residual variant is not provided.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::data::{Dataset, EntityId, Interaction, Interner, ValueBounds};
use crate::error::{Error, Result};
use crate::stats::EntityStats;
use rayon::prelude::*;

/// Default number of bins for curve summaries.
pub const DEFAULT_BINS: usize = 20;

/// Above this many distinct labels `per_value_rmse` refuses to group.
pub const MAX_DISTINCT_VALUES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub user: EntityId,
    pub item: EntityId,
    pub observed: f64,
    pub predicted: f64,
}

/// Test dyads joined with a model's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    records: Vec<PredictionRecord>,
    model_name: String,
    bounds: ValueBounds,
}

impl PredictionSet {
    pub fn new(
        model_name: impl Into<String>,
        records: Vec<PredictionRecord>,
        bounds: ValueBounds,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some((k, r)) = records
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.observed.is_finite() && r.predicted.is_finite()))
        {
            return Err(Error::InvalidData(format!(
                "prediction record {k} ({}, {}) has non-finite values",
                r.user, r.item
            )));
        }
        Ok(PredictionSet {
            records,
            model_name: model_name.into(),
            bounds,
        })
    }

    /// Pairs each dyad with the prediction at the same position.
    pub fn from_dyads(
        model_name: impl Into<String>,
        dyads: &[Interaction],
        predictions: impl IntoIterator<Item = f64>,
        bounds: ValueBounds,
    ) -> Result<Self> {
        let records: Vec<_> = dyads
            .iter()
            .zip(predictions)
            .map(|(d, p)| PredictionRecord {
                user: d.user.clone(),
                item: d.item.clone(),
                observed: d.value,
                predicted: p,
            })
            .collect();
        if records.len() != dyads.len() {
            return Err(Error::Alignment(format!(
                "{} predictions for {} dyads",
                records.len(),
                dyads.len()
            )));
        }
        Self::new(model_name, records, bounds)
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn bounds(&self) -> ValueBounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn with_model_name(mut self, name: impl Into<String>) -> Self {
        self.model_name = name.into();
        self
    }

    pub(crate) fn map_predictions(
        &self,
        name: impl Into<String>,
        f: impl Fn(&PredictionRecord) -> f64 + Sync,
    ) -> Self {
        PredictionSet {
            records: self
                .records
                .par_iter()
                .map(|r| PredictionRecord {
                    predicted: f(r),
                    ..r.clone()
                })
                .collect(),
            model_name: name.into(),
            bounds: self.bounds,
        }
    }

    /// CSV `user_id,item_id,observed,predicted`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "user_id,item_id,observed,predicted")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{}", r.user, r.item, r.observed, r.predicted)?;
        }
        w.flush()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    /// Reads a prediction CSV and checks it row-by-row against `test`: every
    /// row must match the test dyad at the same position on user, item and
    /// observed value.
    pub fn read_aligned<R: Read>(
        reader: R,
        origin: &Path,
        test: &Dataset,
        model_name: &str,
        bounds: ValueBounds,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let parse_err = |line: u64, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["user_id", "item_id", "observed", "predicted"] {
            return Err(parse_err(
                1,
                "expected header `user_id,item_id,observed,predicted`".into(),
            ));
        }
        let mut interner = Interner::default();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                parse_err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string())
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("invalid number `{}`", &rec[k])))
            };
            rows.push(PredictionRecord {
                user: interner.intern(&rec[0]),
                item: interner.intern(&rec[1]),
                observed: num(2)?,
                predicted: num(3)?,
            });
        }
        check_alignment(&rows, test.interactions())?;
        Self::new(model_name, rows, bounds)
    }

    pub fn load_aligned(
        path: &Path,
        test: &Dataset,
        model_name: &str,
        bounds: ValueBounds,
    ) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_aligned(std::io::BufReader::new(f), path, test, model_name, bounds)
    }
}

fn check_alignment(rows: &[PredictionRecord], test: &[Interaction]) -> Result<()> {
    let mut problems = Vec::new();
    if rows.len() != test.len() {
        problems.push(format!(
            "{} prediction rows for {} test dyads",
            rows.len(),
            test.len()
        ));
    }
    for (k, (p, t)) in rows.iter().zip(test).enumerate() {
        if p.user != t.user || p.item != t.item || p.observed != t.value {
            problems.push(format!(
                "row {}: ({},{},{}) vs test ({},{},{})",
                k + 1,
                p.user,
                p.item,
                p.observed,
                t.user,
                t.item,
                t.value
            ));
        }
        if problems.len() >= 6 {
            break;
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        problems.truncate(5);
        Err(Error::Alignment(problems.join("; ")))
    }
}

pub fn rmse(p: &PredictionSet) -> f64 {
    let sse: f64 = p
        .records
        .iter()
        .map(|r| (r.predicted - r.observed).powi(2))
        .sum();
    (sse / p.len() as f64).sqrt()
}

pub fn mae(p: &PredictionSet) -> f64 {
    let sae: f64 = p
        .records
        .iter()
        .map(|r| (r.predicted - r.observed).abs())
        .sum();
    sae / p.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueRmse {
    pub value: f64,
    pub rmse: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerValueRmse {
    pub by_value: Vec<ValueRmse>,
    pub overall: f64,
}

/// RMSE restricted to each distinct observed value, ascending by value.
pub fn per_value_rmse(p: &PredictionSet) -> Result<PerValueRmse> {
    let mut sq: Vec<(f64, f64)> = p
        .records
        .iter()
        .map(|r| (r.observed, (r.predicted - r.observed).powi(2)))
        .collect();
    sq.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut by_value: Vec<ValueRmse> = Vec::new();
    let mut start = 0;
    while start < sq.len() {
        let v = sq[start].0;
        let end = start + sq[start..].iter().take_while(|x| x.0 == v).count();
        if by_value.len() == MAX_DISTINCT_VALUES {
            let count = sq
                .iter()
                .map(|x| x.0.to_bits())
                .collect::<HashSet<_>>()
                .len();
            return Err(Error::TooManyDistinctValues {
                count,
                limit: MAX_DISTINCT_VALUES,
            });
        }
        let sse: f64 = sq[start..end].iter().map(|x| x.1).sum();
        by_value.push(ValueRmse {
            value: v,
            rmse: (sse / (end - start) as f64).sqrt(),
            count: end - start,
        });
        start = end;
    }
    Ok(PerValueRmse {
        by_value,
        overall: rmse(p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EccPoint {
    pub ecc: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveBin {
    pub center: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Eccentricity vs absolute error. `points` are sorted by `(ecc, abs_error)`
/// and include every example, before tie merging.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EccErrorCurve {
    pub points: Vec<EccPoint>,
    pub binned: Vec<CurveBin>,
    /// Width of the eccentricity axis, `max - min` of the bounds.
    pub ecc_range: f64,
}

impl EccErrorCurve {
    /// Sorts the points and attaches the default binned summary.
    pub fn from_points(mut points: Vec<EccPoint>, ecc_range: f64) -> Self {
        points.sort_by(|a, b| {
            a.ecc
                .total_cmp(&b.ecc)
                .then(a.abs_error.total_cmp(&b.abs_error))
        });
        let binned = bin_points(&points, ecc_range, DEFAULT_BINS);
        EccErrorCurve {
            points,
            binned,
            ecc_range,
        }
    }

    /// CSV `ecc,abs_error`.
    pub fn write_points_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "ecc,abs_error")?;
        for p in &self.points {
            writeln!(w, "{},{}", p.ecc, p.abs_error)?;
        }
        Ok(())
    }

    /// CSV `bin_center,mean,std,count`.
    pub fn write_binned_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_center,mean,std,count")?;
        for b in &self.binned {
            writeln!(w, "{},{},{},{}", b.center, b.mean, b.std, b.count)?;
        }
        Ok(())
    }
}

/// Relative width under which two eccentricities count as equal. Means carry
/// rounding error, so exact ties in real arithmetic can land an ulp apart.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Trapezoidal area under points sorted by eccentricity, with equal
/// eccentricities merged to their mean error. Values within
/// `TIE_TOLERANCE * range` of a group's first member join the group.
pub fn merged_trapezoid_area(sorted: &[EccPoint], range: f64) -> f64 {
    let tol = TIE_TOLERANCE * range;
    let mut area = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut k = 0;
    while k < sorted.len() {
        let ecc = sorted[k].ecc;
        let mut sum = 0.0;
        let mut n = 0usize;
        while k < sorted.len() && sorted[k].ecc - ecc <= tol {
            sum += sorted[k].abs_error;
            n += 1;
            k += 1;
        }
        let err = sum / n as f64;
        if let Some((pe, perr)) = prev {
            area += 0.5 * (ecc - pe) * (err + perr);
        }
        prev = Some((ecc, err));
    }
    area
}

/// EAUC of `p` against train-split `stats`, normalized by `bounds`.
pub fn eauc(
    stats: &EntityStats,
    p: &PredictionSet,
    bounds: ValueBounds,
) -> Result<(f64, EccErrorCurve)> {
    if p.len() < 2 {
        return Err(Error::arg("EAUC needs at least 2 predictions"));
    }
    let range = bounds.range();
    if !(range > 0.0) {
        return Err(Error::DegenerateBounds {
            min: bounds.min_value,
            max: bounds.max_value,
        });
    }
    let points = p
        .records
        .iter()
        .map(|r| EccPoint {
            ecc: stats.eccentricity(&r.user, &r.item, r.observed),
            abs_error: (r.predicted - r.observed).abs(),
        })
        .collect();
    let curve = EccErrorCurve::from_points(points, range);
    let area = merged_trapezoid_area(&curve.points, range);
    Ok((area / (range * range), curve))
}

fn bin_points(points: &[EccPoint], range: f64, n_bins: usize) -> Vec<CurveBin> {
    let width = range / n_bins as f64;
    let mut acc = vec![(0.0f64, 0.0f64, 0usize); n_bins];
    for p in points {
        let k = ((p.ecc / width).floor().max(0.0) as usize).min(n_bins - 1);
        acc[k].0 += p.abs_error;
        acc[k].2 += 1;
    }
    for a in acc.iter_mut() {
        if a.2 > 0 {
            a.0 /= a.2 as f64;
        }
    }
    for p in points {
        let k = ((p.ecc / width).floor().max(0.0) as usize).min(n_bins - 1);
        acc[k].1 += (p.abs_error - acc[k].0).powi(2);
    }
    acc.into_iter()
        .enumerate()
        .map(|(k, (mean, ss, count))| CurveBin {
            center: (k as f64 + 0.5) * width,
            mean,
            std: if count > 0 {
                (ss / count as f64).sqrt()
            } else {
                0.0
            },
            count,
        })
        .collect()
}

/// Rebins `curve` into `n_bins` fixed-width bins over `[0, ecc_range]`.
/// Eccentricities at or beyond the range land in the last bin; empty bins are
/// kept with `count == 0`.
pub fn ecc_error_curve_binned(curve: &EccErrorCurve, n_bins: usize) -> Result<EccErrorCurve> {
    if n_bins == 0 {
        return Err(Error::arg("n_bins must be at least 1"));
    }
    Ok(EccErrorCurve {
        points: curve.points.clone(),
        binned: bin_points(&curve.points, curve.ecc_range, n_bins),
        ecc_range: curve.ecc_range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumRow {
    pub observed: f64,
    pub mean_prediction: f64,
    pub std_prediction: f64,
    pub count: usize,
}

/// For examples whose DMV lies in `band` (inclusive), the mean and standard
/// deviation of predictions grouped by observed value.
pub fn dmv_stratified_report(
    stats: &EntityStats,
    p: &PredictionSet,
    band: (f64, f64),
) -> Result<Vec<StratumRow>> {
    let b = p.bounds();
    if !(band.0 <= band.1 && b.contains(band.0) && b.contains(band.1)) {
        return Err(Error::arg(format!(
            "DMV band [{}, {}] must be ordered and lie within [{}, {}]",
            band.0, band.1, b.min_value, b.max_value
        )));
    }
    let mut sel: Vec<(f64, f64)> = p
        .records
        .iter()
        .filter(|r| {
            let d = stats.dmv(&r.user, &r.item);
            d >= band.0 && d <= band.1
        })
        .map(|r| (r.observed, r.predicted))
        .collect();
    sel.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(sel
        .chunk_by(|a, b| a.0 == b.0)
        .map(|g| {
            let n = g.len() as f64;
            let mean = g.iter().map(|x| x.1).sum::<f64>() / n;
            let var = g.iter().map(|x| (x.1 - mean).powi(2)).sum::<f64>() / n;
            StratumRow {
                observed: g[0].0,
                mean_prediction: mean,
                std_prediction: var.sqrt(),
                count: g.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BoundsSource;

    fn b15() -> ValueBounds {
        ValueBounds::new(1.0, 5.0, BoundsSource::Declared).unwrap()
    }

    fn pset(pairs: &[(f64, f64)]) -> PredictionSet {
        let recs = pairs
            .iter()
            .enumerate()
            .map(|(k, &(o, p))| PredictionRecord {
                user: EntityId::new(&format!("u{k}")),
                item: EntityId::new("i"),
                observed: o,
                predicted: p,
            })
            .collect();
        PredictionSet::new("t", recs, b15()).unwrap()
    }

    #[test]
    fn global_errors() {
        let p = pset(&[(3.0, 3.0), (4.0, 4.0)]);
        assert_eq!((rmse(&p), mae(&p)), (0.0, 0.0));
        let p = pset(&[(3.0, 4.0), (3.0, 2.0)]);
        assert_eq!((rmse(&p), mae(&p)), (1.0, 1.0));
        let p = pset(&[(3.0, 3.0), (3.0, 5.0)]);
        assert_eq!(mae(&p), 1.0);
        assert!((rmse(&p) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn per_value_groups() {
        let p = pset(&[(3.0, 3.5), (3.0, 2.5)]);
        let pv = per_value_rmse(&p).unwrap();
        assert_eq!(
            pv.by_value,
            vec![ValueRmse {
                value: 3.0,
                rmse: 0.5,
                count: 2
            }]
        );

        let p = pset(&[(1.0, 2.0), (5.0, 5.5), (3.0, 3.0), (1.0, 1.0)]);
        let pv = per_value_rmse(&p).unwrap();
        let vals: Vec<_> = pv.by_value.iter().map(|v| v.value).collect();
        assert_eq!(vals, vec![1.0, 3.0, 5.0]);
        let lo = pv
            .by_value
            .iter()
            .map(|v| v.rmse)
            .fold(f64::INFINITY, f64::min);
        let hi = pv.by_value.iter().map(|v| v.rmse).fold(0.0, f64::max);
        assert!(lo <= pv.overall && pv.overall <= hi);
    }

    #[test]
    fn per_value_rejects_continuous() {
        let pairs: Vec<_> = (0..1001).map(|k| (1.0 + k as f64 / 1001.0, 3.0)).collect();
        assert!(matches!(
            per_value_rmse(&pset(&pairs)),
            Err(Error::TooManyDistinctValues { count: 1001, .. })
        ));
    }

    #[test]
    fn single_trapezoid() {
        let pts = [
            EccPoint {
                ecc: 0.0,
                abs_error: 0.0,
            },
            EccPoint {
                ecc: 4.0,
                abs_error: 4.0,
            },
        ];
        assert_eq!(merged_trapezoid_area(&pts, 4.0) / 16.0, 0.5);
    }

    #[test]
    fn ties_merge_to_mean() {
        // (0,0), (1,{0,2}) -> (1,1), (2,1)
        let pts = [
            EccPoint {
                ecc: 0.0,
                abs_error: 0.0,
            },
            EccPoint {
                ecc: 1.0,
                abs_error: 0.0,
            },
            EccPoint {
                ecc: 1.0,
                abs_error: 2.0,
            },
            EccPoint {
                ecc: 2.0,
                abs_error: 1.0,
            },
        ];
        assert_eq!(merged_trapezoid_area(&pts, 4.0), 0.5 + 1.0);
    }

    #[test]
    fn rounding_level_ties_still_merge() {
        let at = |ecc, abs_error| EccPoint { ecc, abs_error };
        let exact = [at(0.0, 0.0), at(1.0, 0.0), at(1.0, 2.0), at(2.0, 1.0)];
        let near = [
            at(0.0, 0.0),
            at(1.0, 0.0),
            at(1.0 + 4.0 * f64::EPSILON, 2.0),
            at(2.0, 1.0),
        ];
        let (a, b) = (
            merged_trapezoid_area(&exact, 4.0),
            merged_trapezoid_area(&near, 4.0),
        );
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn binning_cases() {
        let curve = EccErrorCurve::from_points(
            vec![
                EccPoint {
                    ecc: 0.1,
                    abs_error: 1.0,
                },
                EccPoint {
                    ecc: 3.9,
                    abs_error: 3.0,
                },
            ],
            4.0,
        );
        let b = ecc_error_curve_binned(&curve, 2).unwrap();
        assert_eq!(
            b.binned.iter().map(|x| x.count).collect::<Vec<_>>(),
            vec![1, 1]
        );
        assert_eq!(b.binned[0].center, 1.0);
        let one = ecc_error_curve_binned(&curve, 1).unwrap();
        assert_eq!(one.binned[0].mean, 2.0);
        assert_eq!(one.binned[0].std, 1.0);
        let empty = ecc_error_curve_binned(&curve, 4).unwrap();
        assert_eq!(empty.binned[1].count, 0);
        assert!(ecc_error_curve_binned(&curve, 0).is_err());
    }

    #[test]
    fn alignment_errors_list_rows() {
        let test = Dataset::new(
            "t",
            vec![
                Interaction::new("a", "x", 3.0),
                Interaction::new("b", "y", 4.0),
            ],
            None,
        )
        .unwrap();
        let text = "user_id,item_id,observed,predicted\na,x,3,3.1\nb,z,4,4\n";
        let err = PredictionSet::read_aligned(text.as_bytes(), Path::new("p"), &test, "m", b15())
            .unwrap_err();
        assert!(matches!(&err, Error::Alignment(m) if m.contains("row 2")));
        let short = "user_id,item_id,observed,predicted\na,x,3,3.1\n";
        let err = PredictionSet::read_aligned(short.as_bytes(), Path::new("p"), &test, "m", b15())
            .unwrap_err();
        assert!(matches!(&err, Error::Alignment(m) if m.contains("1 prediction rows for 2")));
        let ok = "user_id,item_id,observed,predicted\na,x,3,3.1\nb,y,4,4\n";
        let p =
            PredictionSet::read_aligned(ok.as_bytes(), Path::new("p"), &test, "m", b15()).unwrap();
        assert_eq!(p.records()[0].predicted, 3.1);
    }
}
