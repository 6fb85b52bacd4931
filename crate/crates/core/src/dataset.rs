//! Tabular ingestion and the normalized, one-hot encoded [`Dataset`] the
//! optimizers work on.
//!
//! Pipeline: [`load_table`] reads a delimited text file into a [`RawTable`]
//! using a [`Schema`]; [`preprocess`] drops incomplete rows, expands
//! categorical columns into one-hot features, min-max normalizes numerical
//! columns and computes the per-feature gap `ε_p` used to turn strict
//! left-branch tests into non-strict ones.
//!
//! Feature groups ([`FeatureGroup`]) restrict which features a branch node
//! may split on. [`derive_default_groups`] builds the `all`/`num`/`cat`
//! groups; [`groups_from_importance`] builds `num`/`cat` groups from an
//! external importance ranking.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of `ε_p` used as the margin in left-branch tests
/// (`x_p + margin_p <= b`).
///
/// Must stay below one half so that a one-hot split at `b = 0.5` and a
/// midpoint threshold between two values `ε_p` apart both route every sample
/// to exactly one side.
pub const MARGIN_FRACTION: f64 = 0.49;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numerical,
    Categorical,
    Target,
}

impl ColumnKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "num" | "numerical" | "numeric" => Ok(ColumnKind::Numerical),
            "cat" | "categorical" => Ok(ColumnKind::Categorical),
            "target" | "label" => Ok(ColumnKind::Target),
            other => Err(Error::Schema(format!("unknown column kind {other:?}"))),
        }
    }
}

/// Column-kind declarations. Columns not mentioned are numerical when
/// every present cell parses as a number, categorical otherwise.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    kinds: BTreeMap<String, ColumnKind>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: &str, kind: ColumnKind) -> Self {
        self.kinds.insert(column.to_string(), kind);
        self
    }

    /// Parses `name:kind` declarations separated by commas or newlines.
    /// `=` and whitespace are accepted as separators as well; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for decl in line.split(',') {
                let decl = decl.trim();
                if decl.is_empty() {
                    continue;
                }
                let (name, kind) = decl
                    .split_once(|c: char| c == ':' || c == '=' || c.is_whitespace())
                    .ok_or_else(|| Error::Schema(format!("malformed declaration {decl:?}")))?;
                schema
                    .kinds
                    .insert(name.trim().to_string(), ColumnKind::parse(kind)?);
            }
        }
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Marks `column` as the target, demoting any previously declared target.
    pub fn set_target(&mut self, column: &str) {
        for kind in self.kinds.values_mut() {
            if *kind == ColumnKind::Target {
                *kind = ColumnKind::Numerical;
            }
        }
        self.kinds.insert(column.to_string(), ColumnKind::Target);
    }

    pub fn target(&self) -> Option<&str> {
        self.kinds
            .iter()
            .find(|(_, k)| **k == ColumnKind::Target)
            .map(|(n, _)| n.as_str())
    }

    pub fn declared(&self, column: &str) -> Option<ColumnKind> {
        self.kinds.get(column).copied()
    }
}

#[derive(Debug, Clone)]
pub struct TableOptions {
    pub delimiter: u8,
    /// Cell contents treated as missing (after trimming). The empty cell is
    /// always missing.
    pub missing_markers: Vec<String>,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            missing_markers: vec!["?".to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDecl {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<ColumnDecl>,
    pub rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Target)
            .expect("RawTable always has a target column")
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }
}

pub fn load_table(
    path: impl AsRef<Path>,
    schema: &Schema,
    opts: &TableOptions,
) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(file, schema, opts)
}

pub fn read_table<R: Read>(reader: R, schema: &Schema, opts: &TableOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let target = schema
        .target()
        .ok_or_else(|| Error::Schema("no target column declared".into()))?;
    if !headers.iter().any(|h| h == target) {
        return Err(Error::UnknownTargetColumn(target.to_string()));
    }
    let is_missing = |s: &str| s.is_empty() || opts.missing_markers.iter().any(|m| m == s);
    let mut records = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            // header is line 1
            return Err(Error::RowArity {
                row: i + 2,
                expected: headers.len(),
                found: record.len(),
            });
        }
        records.push(record);
    }
    let numeric = |s: &str| s.parse::<f64>().is_ok_and(f64::is_finite);
    let columns: Vec<ColumnDecl> = headers
        .iter()
        .enumerate()
        .map(|(c, h)| {
            let kind = schema.declared(h).unwrap_or_else(|| {
                let all_numeric = records
                    .iter()
                    .map(|r| &r[c])
                    .filter(|s| !is_missing(s))
                    .all(numeric);
                if all_numeric {
                    ColumnKind::Numerical
                } else {
                    ColumnKind::Categorical
                }
            });
            ColumnDecl {
                name: h.to_string(),
                kind,
            }
        })
        .collect();

    let rows = records
        .iter()
        .map(|record| {
            record
                .iter()
                .zip(&columns)
                .map(|(s, col)| {
                    if is_missing(s) {
                        return Cell::Missing;
                    }
                    match col.kind {
                        ColumnKind::Numerical => s
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .map_or(Cell::Missing, Cell::Number),
                        ColumnKind::Categorical | ColumnKind::Target => Cell::Text(s.to_string()),
                    }
                })
                .collect()
        })
        .collect();
    Ok(RawTable { columns, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    DropRows,
    Error,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PreprocessOptions {
    pub missing: MissingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numerical {
        column: String,
    },
    #[serde(rename = "onehot")]
    OneHot {
        column: String,
        category: String,
    },
}

impl FeatureKind {
    pub fn column(&self) -> &str {
        match self {
            FeatureKind::Numerical { column } | FeatureKind::OneHot { column, .. } => column,
        }
    }

    pub fn is_one_hot(&self) -> bool {
        matches!(self, FeatureKind::OneHot { .. })
    }
}

/// Min-max parameters mapping original units to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

impl Scale {
    pub const IDENTITY: Scale = Scale { min: 0.0, max: 1.0 };

    pub fn fit(values: &[f64]) -> Scale {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Scale { min, max }
    }

    pub fn normalize(&self, x: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            (x - self.min) / range
        } else {
            x - self.min
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            v * range + self.min
        } else {
            v + self.min
        }
    }

    /// Converts a length (not a position) from normalized to original units.
    pub fn denormalize_len(&self, len: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            len * range
        } else {
            len
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    /// Smallest positive gap between adjacent distinct values; `None` for
    /// unsplittable (constant) features.
    pub epsilon: Option<f64>,
    pub scale: Scale,
}

impl FeatureMeta {
    pub fn splittable(&self) -> bool {
        self.epsilon.is_some()
    }

    /// Margin applied in left-branch tests.
    pub fn margin(&self) -> f64 {
        self.epsilon.map_or(0.0, |e| e * MARGIN_FRACTION)
    }
}

/// Original (pre-encoding) feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceColumn {
    pub name: String,
    pub kind: ColumnKind,
}

/// Normalized feature matrix plus labels. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<FeatureMeta>,
    /// Column-major values in original units (one-hot columns are 0/1).
    raw: Vec<Vec<f64>>,
    /// Column-major normalized values.
    values: Vec<Vec<f64>>,
    labels: Vec<usize>,
    label_names: Vec<String>,
    sources: Vec<SourceColumn>,
}

impl Dataset {
    /// Builds a dataset from original-unit columns, fitting min-max scales
    /// and `ε_p` on these rows.
    pub fn fit(
        kinds: Vec<(String, FeatureKind)>,
        raw: Vec<Vec<f64>>,
        labels: Vec<usize>,
        label_names: Vec<String>,
        sources: Vec<SourceColumn>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        assert_eq!(kinds.len(), raw.len(), "one raw column per feature");
        let scales: Vec<Scale> = kinds
            .iter()
            .zip(&raw)
            .map(|((_, kind), col)| match kind {
                FeatureKind::Numerical { .. } => Scale::fit(col),
                FeatureKind::OneHot { .. } => Scale::IDENTITY,
            })
            .collect();
        let values: Vec<Vec<f64>> = raw
            .iter()
            .zip(&scales)
            .map(|(col, s)| col.iter().map(|&x| s.normalize(x)).collect())
            .collect();
        let (eps, _) = compute_epsilons(&values);
        let features = kinds
            .into_iter()
            .zip(scales)
            .zip(eps)
            .map(|(((name, kind), scale), epsilon)| FeatureMeta {
                name,
                kind,
                epsilon,
                scale,
            })
            .collect();
        Ok(Dataset {
            features,
            raw,
            values,
            labels,
            label_names,
            sources,
        })
    }

    /// Rows `rows` of this dataset with normalization and `ε_p` refit on them.
    pub fn refit_subset(&self, rows: &[usize]) -> Result<Self> {
        let (raw, labels) = self.select(rows);
        let kinds = self
            .features
            .iter()
            .map(|f| (f.name.clone(), f.kind.clone()))
            .collect();
        Dataset::fit(
            kinds,
            raw,
            labels,
            self.label_names.clone(),
            self.sources.clone(),
        )
    }

    /// Rows `rows` of this dataset, normalized with `reference`'s metadata
    /// unchanged (values may fall outside `[0, 1]`).
    pub fn subset_like(&self, rows: &[usize], reference: &Dataset) -> Self {
        let (raw, labels) = self.select(rows);
        let features = reference.features.clone();
        let values = raw
            .iter()
            .zip(&features)
            .map(|(col, f)| col.iter().map(|&x| f.scale.normalize(x)).collect())
            .collect();
        Dataset {
            features,
            raw,
            values,
            labels,
            label_names: self.label_names.clone(),
            sources: self.sources.clone(),
        }
    }

    /// Re-normalizes the listed features with the given scales; all other
    /// metadata is kept. Used to apply a stored rule to new data.
    pub fn with_scales(&self, scales: &[(usize, Scale)]) -> Self {
        let mut out = self.clone();
        for &(p, scale) in scales {
            out.features[p].scale = scale;
            out.values[p] = out.raw[p].iter().map(|&x| scale.normalize(x)).collect();
        }
        out
    }

    fn select(&self, rows: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
        let raw = self
            .raw
            .iter()
            .map(|col| rows.iter().map(|&i| col[i]).collect())
            .collect();
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        (raw, labels)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn features(&self) -> &[FeatureMeta] {
        &self.features
    }

    pub fn feature(&self, p: usize) -> &FeatureMeta {
        &self.features[p]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn sources(&self) -> &[SourceColumn] {
        &self.sources
    }

    pub fn column(&self, p: usize) -> &[f64] {
        &self.values[p]
    }

    pub fn raw_column(&self, p: usize) -> &[f64] {
        &self.raw[p]
    }

    pub fn value(&self, i: usize, p: usize) -> f64 {
        self.values[p][i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.iter().map(|col| col[i]).collect()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.label_names.iter().position(|l| l == name)
    }

    /// Largest `ε_p` over splittable features (0 when none is splittable).
    pub fn epsilon_max(&self) -> f64 {
        self.features
            .iter()
            .filter_map(|f| f.epsilon)
            .fold(0.0, f64::max)
    }

    pub fn unsplittable(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&p| !self.features[p].splittable())
            .collect()
    }

    /// Sorted distinct normalized values of feature `p`.
    pub fn distinct_values(&self, p: usize) -> Vec<f64> {
        sorted_distinct(&self.values[p])
    }

    /// Per-label sample counts.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_labels()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Appends `name` to the label set if absent and returns its index.
    pub(crate) fn ensure_label(&mut self, name: &str) -> usize {
        match self.label_index(name) {
            Some(k) => k,
            None => {
                self.label_names.push(name.to_string());
                self.label_names.len() - 1
            }
        }
    }
}

fn sorted_distinct(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Smallest positive gap between adjacent distinct values of each feature,
/// and the maximum of those gaps. Features with fewer than two distinct
/// values get `None`.
pub fn compute_epsilons(columns: &[Vec<f64>]) -> (Vec<Option<f64>>, f64) {
    let eps: Vec<Option<f64>> = columns
        .iter()
        .map(|col| {
            let d = sorted_distinct(col);
            d.windows(2)
                .map(|w| w[1] - w[0])
                .filter(|g| *g > 0.0)
                .reduce(f64::min)
        })
        .collect();
    let eps_max = eps.iter().flatten().copied().fold(0.0, f64::max);
    (eps, eps_max)
}

pub fn preprocess(raw: &RawTable, opts: &PreprocessOptions) -> Result<Dataset> {
    let target = raw.target_index();
    let mut kept: Vec<&Vec<Cell>> = Vec::with_capacity(raw.rows.len());
    for (i, row) in raw.rows.iter().enumerate() {
        match row.iter().position(Cell::is_missing) {
            None => kept.push(row),
            Some(c) => {
                if opts.missing == MissingPolicy::Error {
                    return Err(Error::MissingValue {
                        row: i + 2,
                        column: raw.columns[c].name.clone(),
                    });
                }
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let text = |row: &Vec<Cell>, c: usize| -> String {
        match &row[c] {
            Cell::Text(s) => s.clone(),
            Cell::Number(v) => v.to_string(),
            Cell::Missing => unreachable!("missing rows were dropped"),
        }
    };

    let label_strings: Vec<String> = kept.iter().map(|r| text(r, target)).collect();
    let label_names = order_labels(&label_strings);
    let label_lookup: HashMap<&str, usize> = label_names
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let labels = label_strings
        .iter()
        .map(|s| label_lookup[s.as_str()])
        .collect();

    let mut kinds = Vec::new();
    let mut columns = Vec::new();
    let mut sources = Vec::new();
    for (c, decl) in raw.columns.iter().enumerate() {
        match decl.kind {
            ColumnKind::Target => continue,
            ColumnKind::Numerical => {
                let col: Vec<f64> = kept
                    .iter()
                    .map(|r| match r[c] {
                        Cell::Number(v) => v,
                        _ => unreachable!("numerical cells parse to numbers or missing"),
                    })
                    .collect();
                kinds.push((
                    decl.name.clone(),
                    FeatureKind::Numerical {
                        column: decl.name.clone(),
                    },
                ));
                columns.push(col);
            }
            ColumnKind::Categorical => {
                let cells: Vec<String> = kept.iter().map(|r| text(r, c)).collect();
                let mut categories: Vec<&str> = Vec::new();
                for s in &cells {
                    if !categories.contains(&s.as_str()) {
                        categories.push(s);
                    }
                }
                for cat in categories {
                    kinds.push((
                        format!("{}={}", decl.name, cat),
                        FeatureKind::OneHot {
                            column: decl.name.clone(),
                            category: cat.to_string(),
                        },
                    ));
                    columns.push(
                        cells
                            .iter()
                            .map(|s| if s == cat { 1.0 } else { 0.0 })
                            .collect(),
                    );
                }
            }
        }
        sources.push(SourceColumn {
            name: decl.name.clone(),
            kind: decl.kind,
        });
    }

    Dataset::fit(kinds, columns, labels, label_names, sources)
}

/// Numeric order when every label parses as a number, lexicographic
/// otherwise.
fn order_labels(labels: &[String]) -> Vec<String> {
    let mut names: Vec<String> = labels.to_vec();
    names.sort();
    names.dedup();
    if names.iter().all(|s| s.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        });
    }
    names
}

/// Deterministic shuffle-and-cut split. The train side is refit; the test
/// side reuses the train side's scales and `ε_p`.
pub fn train_test_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "ratio {ratio} must lie strictly between 0 and 1"
        )));
    }
    let n = ds.n_samples();
    let n_train = (ratio * n as f64).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidSplit(format!(
            "{n} rows at ratio {ratio} leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = ds.refit_subset(&order[..n_train])?;
    let test = ds.subset_like(&order[n_train..], &train);
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    All,
    Numerical,
    Categorical,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub members: Vec<usize>,
    pub kind: GroupKind,
}

impl FeatureGroup {
    /// Validates members against `ds` and the kind tag.
    pub fn new(name: &str, mut members: Vec<usize>, kind: GroupKind, ds: &Dataset) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if let Some(&bad) = members.iter().find(|&&p| p >= ds.n_features()) {
            return Err(Error::Group(format!(
                "group {name:?}: feature index {bad} out of range"
            )));
        }
        let ok = match kind {
            GroupKind::All => members.len() == ds.n_features(),
            GroupKind::Numerical => members.iter().all(|&p| !ds.feature(p).kind.is_one_hot()),
            GroupKind::Categorical => members.iter().all(|&p| ds.feature(p).kind.is_one_hot()),
            GroupKind::Custom => true,
        };
        if !ok {
            return Err(Error::Group(format!(
                "group {name:?}: members do not match kind {kind:?}"
            )));
        }
        Ok(FeatureGroup {
            name: name.to_string(),
            members,
            kind,
        })
    }

    /// Builds a custom group from feature names.
    pub fn custom(name: &str, feature_names: &[&str], ds: &Dataset) -> Result<Self> {
        let members = feature_names
            .iter()
            .map(|n| {
                ds.feature_index(n)
                    .ok_or_else(|| Error::Group(format!("unknown feature {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureGroup::new(name, members, GroupKind::Custom, ds)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `all` (every feature), `num` (numerical) and `cat` (one-hot); empty kinds
/// are omitted.
pub fn derive_default_groups(ds: &Dataset) -> Vec<FeatureGroup> {
    let all: Vec<usize> = (0..ds.n_features()).collect();
    let mut groups = vec![FeatureGroup {
        name: "all".into(),
        members: all,
        kind: GroupKind::All,
    }];
    groups.extend(kind_groups(ds, |_| true));
    groups
}

fn kind_groups(ds: &Dataset, keep: impl Fn(&FeatureMeta) -> bool) -> Vec<FeatureGroup> {
    let pick = |one_hot: bool| -> Vec<usize> {
        (0..ds.n_features())
            .filter(|&p| ds.feature(p).kind.is_one_hot() == one_hot && keep(ds.feature(p)))
            .collect()
    };
    let mut groups = Vec::new();
    let num = pick(false);
    if !num.is_empty() {
        groups.push(FeatureGroup {
            name: "num".into(),
            members: num,
            kind: GroupKind::Numerical,
        });
    }
    let cat = pick(true);
    if !cat.is_empty() {
        groups.push(FeatureGroup {
            name: "cat".into(),
            members: cat,
            kind: GroupKind::Categorical,
        });
    }
    groups
}

/// Parses a `column_name<TAB>score` ranking. Blank lines and `#` comments
/// are skipped; any whitespace run is accepted as the separator.
pub fn read_importance<R: Read>(reader: R) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<importance>", e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, score) = line
            .rsplit_once(|c: char| c.is_whitespace())
            .ok_or_else(|| {
                Error::Group(format!(
                    "importance line {}: expected name and score",
                    i + 1
                ))
            })?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| Error::Group(format!("importance line {}: bad score {score:?}", i + 1)))?;
        out.push((name.trim().to_string(), score));
    }
    Ok(out)
}

/// `num`/`cat` groups over the `top_k` highest-scoring original columns
/// (ties keep file order); categorical columns expand to their one-hot
/// features.
pub fn groups_from_ranking(
    ds: &Dataset,
    ranking: &[(String, f64)],
    top_k: usize,
) -> Result<Vec<FeatureGroup>> {
    for (name, _) in ranking {
        if !ds.sources.iter().any(|s| &s.name == name) {
            return Err(Error::Group(format!(
                "ranking references unknown column {name:?}"
            )));
        }
    }
    if top_k == 0 || top_k > ranking.len() {
        return Err(Error::Group(format!(
            "top_k {top_k} exceeds the {} ranked columns",
            ranking.len()
        )));
    }
    let mut order: Vec<usize> = (0..ranking.len()).collect();
    order.sort_by(|&a, &b| ranking[b].1.total_cmp(&ranking[a].1).then(a.cmp(&b)));
    let chosen: Vec<&str> = order[..top_k]
        .iter()
        .map(|&i| ranking[i].0.as_str())
        .collect();
    Ok(kind_groups(ds, |f| chosen.contains(&f.kind.column())))
}

pub fn groups_from_importance(
    ds: &Dataset,
    ranking_file: impl AsRef<Path>,
    top_k: usize,
) -> Result<Vec<FeatureGroup>> {
    let path = ranking_file.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    groups_from_ranking(ds, &read_importance(file)?, top_k)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn table(csv: &str, schema: &str) -> RawTable {
        read_table(
            csv.as_bytes(),
            &Schema::parse(schema).unwrap(),
            &TableOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn load_three_columns() {
        let t = table("a,b,y\n1,red,p\n2,blue,n\n", "a:num, b:cat, y:target");
        assert_eq!(t.n_features(), 2);
        assert_eq!(
            t.rows[0],
            vec![
                Cell::Number(1.0),
                Cell::Text("red".into()),
                Cell::Text("p".into())
            ]
        );
    }

    #[test]
    fn question_mark_is_missing() {
        let t = table("a,y\n?,p\nx,n\n3,p\n", "a:num,y:target");
        assert_eq!(t.rows[0][0], Cell::Missing);
        // unparseable numeric cell
        assert_eq!(t.rows[1][0], Cell::Missing);
        assert_eq!(t.rows[2][0], Cell::Number(3.0));
    }

    #[test]
    fn undeclared_text_column_is_categorical() {
        let t = table("a,b,y\n1,A,p\n?,B,n\n2.5,?,p\n", "y:target");
        assert_eq!(t.columns[0].kind, ColumnKind::Numerical);
        assert_eq!(t.columns[1].kind, ColumnKind::Categorical);
        assert_eq!(t.rows[1][0], Cell::Missing);
        assert_eq!(t.rows[2][1], Cell::Missing);
    }

    #[test]
    fn unknown_target_column() {
        let err = read_table(
            "a,y\n1,p\n".as_bytes(),
            &Schema::parse("z:target").unwrap(),
            &TableOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown target column"), "{err}");
    }

    #[test]
    fn arity_mismatch_reports_row() {
        let err = read_table(
            "a,b,y\n1,2,p\n1,p\n".as_bytes(),
            &Schema::parse("y:target").unwrap(),
            &TableOptions::default(),
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                Error::RowArity {
                    row: 3,
                    expected: 3,
                    found: 2
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn numerical_min_max() {
        let ds = preprocess(
            &table("a,y\n10,p\n20,n\n30,p\n", "y:target"),
            &PreprocessOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.column(0), &[0.0, 0.5, 1.0]);
        assert_eq!(ds.feature(0).epsilon, Some(0.5));
    }

    #[test]
    fn categorical_one_hot_in_first_seen_order() {
        let ds = preprocess(
            &table("c,y\nred,p\nblue,n\nred,p\n", "c:cat,y:target"),
            &PreprocessOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.feature(0).name, "c=red");
        assert_eq!(ds.column(0), &[1.0, 0.0, 1.0]);
        assert_eq!(ds.feature(1).name, "c=blue");
        assert_eq!(ds.column(1), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn drops_rows_with_missing_cells() {
        let t = table(
            "a,b,y\n1,x,p\n2,,n\n3,x,p\n4,y,n\n5,x,p\n",
            "b:cat,y:target",
        );
        let ds = preprocess(&t, &PreprocessOptions::default()).unwrap();
        assert_eq!(ds.n_samples(), 4);
        let err = preprocess(
            &t,
            &PreprocessOptions {
                missing: MissingPolicy::Error,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 3, .. }));
    }

    #[test]
    fn all_rows_missing_is_an_error() {
        let t = table("a,y\n?,p\n", "y:target");
        assert!(matches!(
            preprocess(&t, &PreprocessOptions::default()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn epsilons() {
        let (eps, max) = compute_epsilons(&[
            vec![0.0, 0.25, 0.25, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![0.4, 0.4],
        ]);
        assert_eq!(eps, vec![Some(0.25), Some(1.0), None]);
        assert_eq!(max, 1.0);
    }

    #[test]
    fn labels_sort_numerically() {
        assert_eq!(
            order_labels(&["10".into(), "2".into(), "1".into()]),
            vec!["1", "2", "10"]
        );
        assert_eq!(
            order_labels(&["pos".into(), "neg".into()]),
            vec!["neg", "pos"]
        );
    }

    fn ten_rows() -> Dataset {
        let csv: String = std::iter::once("a,y\n".to_string())
            .chain((0..10).map(|i| format!("{},{}\n", i * i, i % 2)))
            .collect();
        preprocess(&table(&csv, "y:target"), &PreprocessOptions::default()).unwrap()
    }

    #[test]
    fn split_partitions_rows() {
        let ds = ten_rows();
        let (train, test) = train_test_split(&ds, 0.8, 7).unwrap();
        assert_eq!((train.n_samples(), test.n_samples()), (8, 2));
        let mut all: Vec<f64> = train
            .raw_column(0)
            .iter()
            .chain(test.raw_column(0))
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, ds.raw_column(0));
        let (train2, test2) = train_test_split(&ds, 0.8, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        // train side is refit to [0, 1]; test reuses the train scale
        assert_eq!(
            train
                .column(0)
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
            1.0
        );
        assert_eq!(test.feature(0).scale, train.feature(0).scale);
    }

    #[test]
    fn split_rejects_empty_side() {
        let ds = ten_rows();
        assert!(train_test_split(&ds, 1.0, 7).is_err());
        assert!(train_test_split(&ds, 0.0, 7).is_err());
        assert!(train_test_split(&ds, 0.01, 7).is_ok());
        assert!(train_test_split(&ds, 0.95, 7).is_err());
    }

    fn mixed() -> Dataset {
        let t = table(
            "n1,c1,n2,c2,y\n1,a,5,u,p\n2,b,6,v,n\n3,a,7,u,p\n4,c,8,v,n\n",
            "c1:cat,c2:cat,y:target",
        );
        preprocess(&t, &PreprocessOptions::default()).unwrap()
    }

    #[test]
    fn default_groups_partition_by_kind() {
        let ds = mixed();
        let g = derive_default_groups(&ds);
        let sizes: Vec<(&str, usize)> = g.iter().map(|g| (g.name.as_str(), g.len())).collect();
        assert_eq!(sizes, vec![("all", 7), ("num", 2), ("cat", 5)]);

        let only_num = preprocess(
            &table("a,b,y\n1,2,p\n", "y:target"),
            &PreprocessOptions::default(),
        )
        .unwrap();
        assert!(derive_default_groups(&only_num)
            .iter()
            .all(|g| g.name != "cat"));
        let only_cat = preprocess(
            &table("a,y\nx,p\n", "a:cat,y:target"),
            &PreprocessOptions::default(),
        )
        .unwrap();
        assert!(derive_default_groups(&only_cat)
            .iter()
            .all(|g| g.name != "num"));
    }

    #[test]
    fn importance_top_k() {
        let ds = mixed();
        let ranking = read_importance("n1\t9\nc1\t5\nn2\t1\nc2\t0.5\n".as_bytes()).unwrap();
        let g = groups_from_ranking(&ds, &ranking, 2).unwrap();
        assert_eq!(g[0].members, vec![0]);
        assert_eq!(g[1].members, vec![1, 2, 3]);

        let full = groups_from_ranking(&ds, &ranking, 4).unwrap();
        assert_eq!(full, derive_default_groups(&ds)[1..].to_vec());

        let bad = read_importance("zz\t3\n".as_bytes()).unwrap();
        assert!(groups_from_ranking(&ds, &bad, 1).is_err());
        assert!(groups_from_ranking(&ds, &ranking, 5).is_err());
    }

    #[test]
    fn group_kind_is_checked() {
        let ds = mixed();
        assert!(FeatureGroup::new("bad", vec![0, 1], GroupKind::Numerical, &ds).is_err());
        assert!(FeatureGroup::new("bad", vec![99], GroupKind::Custom, &ds).is_err());
        assert!(FeatureGroup::custom("mine", &["n1", "c2=v"], &ds).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalize_round_trip(min in -1e3f64..1e3, span in 1e-3f64..1e3, v in 0.0f64..=1.0) {
                let s = Scale { min, max: min + span };
                prop_assert!((s.normalize(s.denormalize(v)) - v).abs() <= 1e-12);
            }

            #[test]
            fn no_two_values_closer_than_epsilon(col in prop::collection::vec(0u32..50, 2..40)) {
                let col: Vec<f64> = col.into_iter().map(|v| v as f64 / 49.0).collect();
                let (eps, _) = compute_epsilons(std::slice::from_ref(&col));
                if let Some(e) = eps[0] {
                    for a in &col {
                        for b in &col {
                            prop_assert!(a == b || (a - b).abs() >= e);
                        }
                    }
                }
            }
        }
    }
}
