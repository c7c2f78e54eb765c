//! Dyadic interaction datasets: loading, validation, splitting and value bounds.

use std::borrow::Borrow;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Opaque entity identifier. Cloning is a reference-count bump, so ids can be
/// shared freely between datasets, prediction sets and statistics.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(Arc<str>);

impl EntityId {
    pub fn new(id: &str) -> Self {
        EntityId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for EntityId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl std::ops::Deref for EntityId {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl From<String> for EntityId {
    fn from(s: String) -> Self {
        EntityId(Arc::from(s))
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId::new(s)
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// Hands out shared [`EntityId`]s so repeated ids in a file reuse one allocation.
#[derive(Default)]
pub(crate) struct Interner {
    ids: HashMap<Box<str>, EntityId>,
}

impl Interner {
    pub(crate) fn intern(&mut self, id: &str) -> EntityId {
        if let Some(e) = self.ids.get(id) {
            return e.clone();
        }
        let e = EntityId::new(id);
        self.ids.insert(id.into(), e.clone());
        e
    }
}

/// One observed value for a `(user, item)` dyad.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub user: EntityId,
    pub item: EntityId,
    pub value: f64,
}

impl Interaction {
    pub fn new(user: impl Into<EntityId>, item: impl Into<EntityId>, value: f64) -> Self {
        Interaction {
            user: user.into(),
            item: item.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundsSource {
    Declared,
    Inferred,
}

impl fmt::Display for BoundsSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundsSource::Declared => "declared",
            BoundsSource::Inferred => "inferred",
        })
    }
}

/// Task value range. `min_value < max_value` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueBounds {
    pub min_value: f64,
    pub max_value: f64,
    pub source: BoundsSource,
}

impl ValueBounds {
    pub fn new(min_value: f64, max_value: f64, source: BoundsSource) -> Result<Self> {
        if !(min_value.is_finite() && max_value.is_finite() && min_value < max_value) {
            return Err(Error::DegenerateBounds {
                min: min_value,
                max: max_value,
            });
        }
        Ok(ValueBounds {
            min_value,
            max_value,
            source,
        })
    }

    pub fn declared(min_value: f64, max_value: f64) -> Result<Self> {
        Self::new(min_value, max_value, BoundsSource::Declared)
    }

    /// Parses `"min,max"`.
    pub fn parse_declared(text: &str) -> Result<Self> {
        let (lo, hi) = text
            .split_once(',')
            .ok_or_else(|| Error::arg(format!("bounds `{text}` must be `min,max`")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::arg(format!("bounds `{text}`: `{s}` is not a number")))
        };
        Self::declared(parse(lo)?, parse(hi)?)
    }

    pub fn range(&self) -> f64 {
        self.max_value - self.min_value
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min_value && v <= self.max_value
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min_value, self.max_value)
    }

    pub(crate) fn check(&self, v: f64) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                value: v,
                min: self.min_value,
                max: self.max_value,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// Header `user_id,item_id,value`.
    Csv,
    /// `user::item::rating::timestamp` (tab-separated `u.data` files are
    /// accepted as well). The timestamp is discarded.
    MovielensDat,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "movielens" | "movielens_dat" | "dat" => Ok(InputFormat::MovielensDat),
            other => Err(Error::arg(format!("unknown input format `{other}`"))),
        }
    }
}

/// An ordered collection of interactions. Duplicate dyads are kept as
/// distinct rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    interactions: Vec<Interaction>,
    declared_bounds: Option<ValueBounds>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        interactions: Vec<Interaction>,
        declared_bounds: Option<ValueBounds>,
    ) -> Result<Self> {
        if interactions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (row, it) in interactions.iter().enumerate() {
            if !it.value.is_finite() {
                return Err(Error::InvalidData(format!(
                    "row {row}: value {} is not finite",
                    it.value
                )));
            }
            if it.user.as_str().is_empty() || it.item.as_str().is_empty() {
                return Err(Error::InvalidData(format!("row {row}: empty entity id")));
            }
            if let Some(b) = &declared_bounds {
                b.check(it.value)?;
            }
        }
        let declared_bounds = declared_bounds.map(|b| ValueBounds {
            source: BoundsSource::Declared,
            ..b
        });
        Ok(Dataset {
            name: name.into(),
            interactions,
            declared_bounds,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn declared_bounds(&self) -> Option<ValueBounds> {
        self.declared_bounds
    }

    pub fn with_declared_bounds(self, bounds: ValueBounds) -> Result<Self> {
        Dataset::new(self.name, self.interactions, Some(bounds))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n_users(&self) -> usize {
        self.interactions
            .iter()
            .map(|i| &i.user)
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn n_items(&self) -> usize {
        self.interactions
            .iter()
            .map(|i| &i.item)
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.interactions.iter().map(|i| i.value)
    }

    fn subset(&self, name: String, rows: &[usize]) -> Dataset {
        Dataset {
            name,
            interactions: rows.iter().map(|&r| self.interactions[r].clone()).collect(),
            declared_bounds: self.declared_bounds,
        }
    }

    /// Writes the `user_id,item_id,value` CSV form.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io_err = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
        wtr.write_record(["user_id", "item_id", "value"])
            .map_err(io_err)?;
        for it in &self.interactions {
            wtr.write_record([it.user.as_str(), it.item.as_str(), &it.value.to_string()])
                .map_err(io_err)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Loads a dataset; its name is the file stem.
pub fn load_interactions(path: &Path, format: InputFormat) -> Result<Dataset> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    parse_interactions(BufReader::new(f), format, &name, path)
}

/// Parses a dataset from any reader. `origin` is only used in error messages.
pub fn parse_interactions<R: Read>(
    reader: R,
    format: InputFormat,
    name: &str,
    origin: &Path,
) -> Result<Dataset> {
    let interactions = match format {
        InputFormat::Csv => parse_csv(reader, origin)?,
        InputFormat::MovielensDat => parse_dat(reader, origin)?,
    };
    Dataset::new(name, interactions, None)
}

fn parse_error(origin: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_value(origin: &Path, line: u64, field: &str) -> Result<f64> {
    match field.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(
            origin,
            line,
            format!("invalid value `{}`", field.trim()),
        )),
    }
}

fn parse_csv<R: Read>(reader: R, origin: &Path) -> Result<Vec<Interaction>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_error(origin, 1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyDataset);
    }
    if headers.len() != 3
        || &headers[0] != "user_id"
        || &headers[1] != "item_id"
        || &headers[2] != "value"
    {
        return Err(parse_error(
            origin,
            1,
            format!(
                "expected header `user_id,item_id,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut interner = Interner::default();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(origin, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 3 {
            return Err(parse_error(
                origin,
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        if rec[0].is_empty() || rec[1].is_empty() {
            return Err(parse_error(origin, line, "empty entity id"));
        }
        let value = parse_value(origin, line, &rec[2])?;
        out.push(Interaction {
            user: interner.intern(&rec[0]),
            item: interner.intern(&rec[1]),
            value,
        });
    }
    Ok(out)
}

fn parse_dat<R: Read>(reader: R, origin: &Path) -> Result<Vec<Interaction>> {
    let mut interner = Interner::default();
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if line.contains("::") {
            line.split("::").collect()
        } else {
            line.split('\t').collect()
        };
        if fields.len() < 3 || fields.len() > 4 {
            return Err(parse_error(
                origin,
                lineno,
                format!(
                    "expected `user::item::rating::timestamp`, found {} fields",
                    fields.len()
                ),
            ));
        }
        let (u, i) = (fields[0].trim(), fields[1].trim());
        if u.is_empty() || i.is_empty() {
            return Err(parse_error(origin, lineno, "empty entity id"));
        }
        let value = parse_value(origin, lineno, fields[2])?;
        out.push(Interaction {
            user: interner.intern(u),
            item: interner.intern(i),
            value,
        });
    }
    Ok(out)
}

/// Uniform random partition into `(train, test)` with
/// `|test| = round(test_fraction * |d|)`. Row order inside each part follows
/// the input order.
pub fn split_train_test(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (a, b) = partition(d, test_fraction, seed)?;
    Ok((
        d.subset(format!("{}.train", d.name), &a),
        d.subset(format!("{}.test", d.name), &b),
    ))
}

/// Row indices `(kept, held_out)` of a seeded partition.
pub(crate) fn partition(d: &Dataset, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!(
            "split fraction {fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = d.len();
    if n < 2 {
        return Err(Error::arg("splitting needs at least 2 interactions"));
    }
    let n_held = (fraction * n as f64).round() as usize;
    if n_held == 0 || n_held == n {
        return Err(Error::arg(format!(
            "fraction {fraction} of {n} interactions leaves one side of the split empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::rng::seeded(seed));
    let mut held = idx[..n_held].to_vec();
    let mut kept = idx[n_held..].to_vec();
    held.sort_unstable();
    kept.sort_unstable();
    Ok((kept, held))
}

/// Named subset used by the correction workflow.
pub(crate) fn named_subset(d: &Dataset, name: String, rows: &[usize]) -> Dataset {
    d.subset(name, rows)
}

/// Writes `<name>.train.csv` and `<name>.test.csv` under `dir`, returning both paths.
pub fn write_split(
    dir: &Path,
    name: &str,
    train: &Dataset,
    test: &Dataset,
) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tp = dir.join(format!("{name}.train.csv"));
    let sp = dir.join(format!("{name}.test.csv"));
    train.save_csv(&tp)?;
    test.save_csv(&sp)?;
    Ok((tp, sp))
}

/// Declared bounds when either split carries them, otherwise the min/max over
/// both splits.
pub fn rating_bounds(train: &Dataset, test: &Dataset) -> Result<ValueBounds> {
    if let Some(b) = train.declared_bounds().or(test.declared_bounds()) {
        return Ok(b);
    }
    let (lo, hi) = train
        .values()
        .chain(test.values())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    ValueBounds::new(lo, hi, BoundsSource::Inferred)
}
