//! Tabular ingestion, preprocessing and subgroup census.
//!
//! A [`LabeledDataset`] holds `(x, y, a)` triplets: a dense row-major feature
//! matrix, an integer class label per row and an integer-coded sensitive
//! attribute per row. Delimited text tables are turned into datasets by a
//! [`TableEncoder`] fitted on the training table, so that a test table is
//! expanded into exactly the same indicator columns.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset<T> {
    features: Vec<T>,
    n_features: usize,
    labels: Vec<usize>,
    attributes: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    attribute_names: Vec<String>,
}

impl<T: Scalar> LabeledDataset<T> {
    /// Build a dataset from a row-major feature buffer, checking every invariant.
    pub fn new(
        features: Vec<T>,
        feature_names: Vec<String>,
        labels: Vec<usize>,
        attributes: Vec<usize>,
        class_names: Vec<String>,
        attribute_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.len();
        let d = feature_names.len();
        if attributes.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels but {} attributes",
                n,
                attributes.len()
            )));
        }
        if features.len() != n * d {
            return Err(Error::Dimension(format!(
                "feature buffer has {} values, expected {n} rows x {d} columns",
                features.len()
            )));
        }
        if let Some(j) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at row {}, column `{}`",
                j / d.max(1),
                feature_names[j % d.max(1)]
            )));
        }
        if let Some(j) = labels.iter().position(|&y| y >= class_names.len()) {
            return Err(Error::invalid(format!(
                "row {j}: label {} out of range for {} classes",
                labels[j],
                class_names.len()
            )));
        }
        if let Some(j) = attributes.iter().position(|&a| a >= attribute_names.len()) {
            return Err(Error::invalid(format!(
                "row {j}: attribute {} out of range for {} groups",
                attributes[j],
                attribute_names.len()
            )));
        }
        Ok(Self {
            features,
            n_features: d,
            labels,
            attributes,
            feature_names,
            class_names,
            attribute_names,
        })
    }

    /// Dataset from per-row vectors with generated column, class and group names.
    pub fn from_rows(
        rows: &[Vec<T>],
        labels: Vec<usize>,
        attributes: Vec<usize>,
        n_classes: usize,
        n_attributes: usize,
    ) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Dimension(format!("row {r} has {} values, expected {d}", rows[r].len())));
        }
        if rows.len() != labels.len() {
            return Err(Error::Dimension(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        Self::new(
            rows.iter().flatten().copied().collect(),
            (0..d).map(|i| format!("x{i}")).collect(),
            labels,
            attributes,
            (0..n_classes).map(|i| i.to_string()).collect(),
            (0..n_attributes).map(|i| format!("a{i}")).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attribute_names.len()
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[T] {
        &self.features[j * self.n_features..(j + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.len()).map(move |j| self.row(j))
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn attributes(&self) -> &[usize] {
        &self.attributes
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &j in indices {
            features.extend_from_slice(self.row(j));
        }
        Self {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&j| self.labels[j]).collect(),
            attributes: indices.iter().map(|&j| self.attributes[j]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            attribute_names: self.attribute_names.clone(),
        }
    }

    /// Same rows with a different feature precision.
    pub fn cast<U: Scalar>(&self) -> LabeledDataset<U> {
        LabeledDataset {
            features: self.features.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            n_features: self.n_features,
            labels: self.labels.clone(),
            attributes: self.attributes.clone(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            attribute_names: self.attribute_names.clone(),
        }
    }

    fn with_features(&self, features: Vec<T>) -> Self {
        debug_assert_eq!(features.len(), self.features.len());
        Self {
            features,
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Self {
        Self {
            features: Vec::new(),
            n_features: self.n_features,
            labels: self.labels.clone(),
            attributes: self.attributes.clone(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            attribute_names: self.attribute_names.clone(),
        }
    }
}

/// Per-class and per-(class, attribute) sample sizes `n_i`, `n_{i,a}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupCounts {
    pub total: usize,
    pub per_class: Vec<usize>,
    /// `per_cell[i][a]`, shape `k x m`.
    pub per_cell: Vec<Vec<usize>>,
}

impl SubgroupCounts {
    /// Counts from a `k x m` cell table; class totals and the grand total are derived.
    pub fn from_cells(per_cell: Vec<Vec<usize>>) -> Result<Self> {
        let m = per_cell.first().map_or(0, Vec::len);
        if per_cell.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged cell table".into()));
        }
        let per_class: Vec<usize> = per_cell.iter().map(|r| r.iter().sum()).collect();
        Ok(Self {
            total: per_class.iter().sum(),
            per_class,
            per_cell,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.per_cell.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.per_cell.first().map_or(0, Vec::len)
    }

    pub fn cell(&self, class: usize, attribute: usize) -> usize {
        self.per_cell[class][attribute]
    }

    /// Number of rows carrying attribute `a`, over all classes.
    pub fn per_attribute(&self, attribute: usize) -> usize {
        self.per_cell.iter().map(|r| r[attribute]).sum()
    }
}

/// Tally `n`, `n_i` and `n_{i,a}`.
pub fn census<T: Scalar>(data: &LabeledDataset<T>) -> Result<SubgroupCounts> {
    if data.is_empty() {
        return Err(Error::invalid("census of an empty dataset"));
    }
    let mut cells = vec![vec![0usize; data.n_attributes()]; data.n_classes()];
    for (&y, &a) in data.labels().iter().zip(data.attributes()) {
        cells[y][a] += 1;
    }
    SubgroupCounts::from_cells(cells)
}

/// Column means and scales fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> Standardizer<T> {
    /// Population (divide-by-n) statistics. Constant columns get scale 1 and
    /// their exact value as the shift.
    pub fn fit(data: &LabeledDataset<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("cannot standardize an empty training set"));
        }
        let d = data.n_features();
        let n = T::count(data.len());
        let mut mean = vec![T::zero(); d];
        for row in data.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); d];
        let mut constant = vec![true; d];
        let first = data.row(0);
        for row in data.rows() {
            for c in 0..d {
                let dv = row[c] - mean[c];
                var[c] += dv * dv;
                if row[c] != first[c] {
                    constant[c] = false;
                }
            }
        }
        let mut scale = vec![T::one(); d];
        for c in 0..d {
            if constant[c] {
                mean[c] = first[c];
            } else {
                let sd = (var[c] / n).sqrt();
                if sd > T::zero() {
                    scale[c] = sd;
                }
            }
        }
        Ok(Self {
            mean,
            scale,
            feature_names: data.feature_names().to_vec(),
        })
    }

    pub fn apply(&self, data: &LabeledDataset<T>) -> Result<LabeledDataset<T>> {
        if data.feature_names() != self.feature_names.as_slice() {
            return Err(Error::Dimension(format!(
                "standardizer fitted on {} columns, dataset has {} (or different names)",
                self.feature_names.len(),
                data.n_features()
            )));
        }
        let d = data.n_features();
        let features = data
            .features()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = i % d;
                (v - self.mean[c]) / self.scale[c]
            })
            .collect();
        Ok(data.with_features(features))
    }
}

/// z-normalize both sets with the training statistics.
pub fn standardize<T: Scalar>(
    train: &LabeledDataset<T>,
    test: &LabeledDataset<T>,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
    let z = Standardizer::fit(train)?;
    Ok((z.apply(train)?, z.apply(test)?))
}

/// Number of rows that go to the first part of a split.
pub fn split_size(n: usize, ratio: f64) -> usize {
    let raw = (ratio * n as f64 + 1e-9).floor() as usize;
    raw.clamp(1, n.saturating_sub(1).max(1))
}

/// Seeded shuffled partition into `(first, second)` with `split_size(n, ratio)`
/// rows in the first part. Each part keeps the original row order.
pub fn split<T: Scalar>(
    data: &LabeledDataset<T>,
    ratio: f64,
    seed: u64,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} not in (0, 1)")));
    }
    if data.len() < 2 {
        return Err(Error::invalid("need at least two rows to split"));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut rng::stream(seed, "split", 0));
    let cut = split_size(data.len(), ratio);
    let (a, b) = idx.split_at_mut(cut);
    a.sort_unstable();
    b.sort_unstable();
    Ok((data.subset(a), data.subset(b)))
}

/// Column roles for a delimited table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableSchema {
    pub label: String,
    pub attribute: String,
    /// Columns ignored entirely.
    pub drop: Vec<String>,
    /// Columns forced numeric; an unparseable cell is an error.
    pub numeric: Vec<String>,
    /// Columns forced categorical. Columns in neither list are numeric when
    /// every cell parses as a finite number, categorical otherwise.
    pub categorical: Vec<String>,
    /// Whether the sensitive attribute is also expanded into feature columns.
    pub attribute_as_feature: bool,
    /// Explicit class order; sorted distinct label values otherwise.
    pub class_order: Option<Vec<String>>,
    pub attribute_order: Option<Vec<String>>,
}

impl Default for TableSchema {
    fn default() -> Self {
        Self {
            label: String::new(),
            attribute: String::new(),
            drop: Vec::new(),
            numeric: Vec::new(),
            categorical: Vec::new(),
            attribute_as_feature: true,
            class_order: None,
            attribute_order: None,
        }
    }
}

impl TableSchema {
    pub fn new(label: impl Into<String>, attribute: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            attribute: attribute.into(),
            ..Self::default()
        }
    }
}

/// A delimited text table: header plus string cells.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub path: PathBuf,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = std::fs::File::open(&path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let table_err = |e: csv::Error| Error::Table {
            path: path.clone(),
            message: e.to_string(),
        };
        let header: Vec<String> = reader
            .headers()
            .map_err(table_err)?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(table_err)?;
            rows.push(record.iter().map(str::to_owned).collect());
        }
        if header.iter().all(String::is_empty) || rows.is_empty() {
            return Err(Error::EmptyTable(path));
        }
        Ok(Self { path, header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ColumnKind {
    Numeric,
    Categorical(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ColumnPlan {
    name: String,
    kind: ColumnKind,
}

/// Column plan fitted on one table and reusable on others with the same header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEncoder {
    schema: TableSchema,
    columns: Vec<ColumnPlan>,
    class_names: Vec<String>,
    attribute_names: Vec<String>,
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn distinct(table: &RawTable, col: usize) -> Vec<String> {
    table
        .rows
        .iter()
        .map(|r| r[col].clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

impl TableEncoder {
    pub fn fit(table: &RawTable, schema: &TableSchema) -> Result<Self> {
        let label_col = table.column(&schema.label)?;
        let attr_col = table.column(&schema.attribute)?;
        for name in schema.drop.iter().chain(&schema.numeric).chain(&schema.categorical) {
            table.column(name)?;
        }
        let class_names = schema
            .class_order
            .clone()
            .unwrap_or_else(|| distinct(table, label_col));
        let attribute_names = schema
            .attribute_order
            .clone()
            .unwrap_or_else(|| distinct(table, attr_col));
        if class_names.len() < 2 {
            return Err(Error::invalid(format!(
                "label column `{}` has fewer than two classes",
                schema.label
            )));
        }
        let mut columns = Vec::new();
        for (c, name) in table.header.iter().enumerate() {
            if c == label_col || schema.drop.contains(name) {
                continue;
            }
            if c == attr_col {
                if schema.attribute_as_feature {
                    columns.push(ColumnPlan {
                        name: name.clone(),
                        kind: ColumnKind::Categorical(attribute_names.clone()),
                    });
                }
                continue;
            }
            let numeric = if schema.numeric.contains(name) {
                true
            } else if schema.categorical.contains(name) {
                false
            } else {
                table.rows.iter().all(|r| parse_number(&r[c]).is_some())
            };
            let kind = if numeric {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical(distinct(table, c))
            };
            columns.push(ColumnPlan {
                name: name.clone(),
                kind,
            });
        }
        Ok(Self {
            schema: schema.clone(),
            columns,
            class_names,
            attribute_names,
        })
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for col in &self.columns {
            match &col.kind {
                ColumnKind::Numeric => names.push(col.name.clone()),
                ColumnKind::Categorical(levels) => {
                    names.extend(levels.iter().map(|l| format!("{}={}", col.name, l)))
                }
            }
        }
        names
    }

    /// Encode a table. Categorical values unseen at fit time become all-zero
    /// indicator blocks; unseen labels or attributes are errors.
    pub fn encode<T: Scalar>(&self, table: &RawTable) -> Result<LabeledDataset<T>> {
        let label_col = table.column(&self.schema.label)?;
        let attr_col = table.column(&self.schema.attribute)?;
        let positions: Vec<usize> = self
            .columns
            .iter()
            .map(|c| table.column(&c.name))
            .collect::<Result<_>>()?;
        let feature_names = self.feature_names();
        let d = feature_names.len();
        let mut features = Vec::with_capacity(table.rows.len() * d);
        let mut labels = Vec::with_capacity(table.rows.len());
        let mut attributes = Vec::with_capacity(table.rows.len());
        let lookup = |levels: &[String], value: &str, row: usize, column: &str| {
            levels
                .iter()
                .position(|l| l == value)
                .ok_or_else(|| Error::UnknownLevel {
                    row,
                    column: column.to_owned(),
                    value: value.to_owned(),
                })
        };
        for (r, cells) in table.rows.iter().enumerate() {
            let row_no = r + 1;
            labels.push(lookup(&self.class_names, &cells[label_col], row_no, &self.schema.label)?);
            attributes.push(lookup(
                &self.attribute_names,
                &cells[attr_col],
                row_no,
                &self.schema.attribute,
            )?);
            for (plan, &c) in self.columns.iter().zip(&positions) {
                let cell = &cells[c];
                match &plan.kind {
                    ColumnKind::Numeric => {
                        let v = parse_number(cell).ok_or_else(|| Error::Parse {
                            row: row_no,
                            column: plan.name.clone(),
                            value: cell.clone(),
                        })?;
                        features.push(T::lit(v));
                    }
                    ColumnKind::Categorical(levels) => {
                        features.extend(levels.iter().map(|l| if l == cell { T::one() } else { T::zero() }));
                    }
                }
            }
        }
        LabeledDataset::new(
            features,
            feature_names,
            labels,
            attributes,
            self.class_names.clone(),
            self.attribute_names.clone(),
        )
    }
}

/// Read, fit and encode one table.
pub fn load_table<T: Scalar>(path: impl AsRef<Path>, schema: &TableSchema) -> Result<LabeledDataset<T>> {
    let table = RawTable::read(path)?;
    TableEncoder::fit(&table, schema)?.encode(&table)
}

/// Encode a training and a test table with the encoding fitted on the training table.
pub fn load_train_test<T: Scalar>(
    train_path: impl AsRef<Path>,
    test_path: impl AsRef<Path>,
    schema: &TableSchema,
) -> Result<(LabeledDataset<T>, LabeledDataset<T>)> {
    let train = RawTable::read(train_path)?;
    let test = RawTable::read(test_path)?;
    let encoder = TableEncoder::fit(&train, schema)?;
    Ok((encoder.encode(&train)?, encoder.encode(&test)?))
}
