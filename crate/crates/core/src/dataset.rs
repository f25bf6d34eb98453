//! Tabular datasets: CSV loading, min-max normalization and stratified folds.
//!
//! Attributes are stored row-major (`N × M`). Class labels are dense indices
//! `0..C` assigned in order of first appearance in the source file.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::seed::{self, Purpose};
use crate::Scalar;

/// Selects the class column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// `"last"` selects the last column, an integer selects a 0-based
    /// column index, anything else is a header name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("last") {
            Ok(LabelColumn::Last)
        } else if let Ok(i) = s.parse::<usize>() {
            Ok(LabelColumn::Index(i))
        } else {
            Ok(LabelColumn::Name(s.to_string()))
        }
    }
}

impl LabelColumn {
    fn resolve(&self, width: usize, header: Option<&[String]>) -> Result<usize> {
        match self {
            LabelColumn::Last => Ok(width - 1),
            LabelColumn::Index(i) if *i < width => Ok(*i),
            LabelColumn::Index(i) => Err(Error::validation(format!(
                "label column index {i} out of range for {width} columns"
            ))),
            LabelColumn::Name(name) => {
                let header = header.ok_or_else(|| {
                    Error::validation(format!(
                        "label column {name:?} selected by name but the file has no header"
                    ))
                })?;
                header.iter().position(|h| h == name).ok_or_else(|| {
                    Error::validation(format!("label column {name:?} not found in header"))
                })
            }
        }
    }
}

/// A labelled sample matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetDoc<F>", into = "DatasetDoc<F>")]
#[serde(bound(
    serialize = "F: Scalar",
    deserialize = "F: Scalar"
))]
pub struct Dataset<F> {
    attributes: Vec<F>,
    labels: Vec<usize>,
    attribute_names: Vec<String>,
    class_names: Vec<String>,
    class_count: usize,
}

/// JSON layout of a [`Dataset`]: one array per sample.
#[derive(Serialize, Deserialize)]
struct DatasetDoc<F> {
    attribute_names: Vec<String>,
    class_names: Vec<String>,
    class_count: usize,
    attributes: Vec<Vec<F>>,
    labels: Vec<usize>,
}

impl<F: Scalar> From<Dataset<F>> for DatasetDoc<F> {
    fn from(d: Dataset<F>) -> Self {
        let m = d.n_attributes();
        DatasetDoc {
            attributes: d.attributes.chunks(m).map(<[F]>::to_vec).collect(),
            attribute_names: d.attribute_names,
            class_names: d.class_names,
            class_count: d.class_count,
            labels: d.labels,
        }
    }
}

impl<F: Scalar> TryFrom<DatasetDoc<F>> for Dataset<F> {
    type Error = Error;

    fn try_from(doc: DatasetDoc<F>) -> Result<Self> {
        let m = doc.attribute_names.len();
        let mut flat = Vec::with_capacity(doc.attributes.len() * m);
        for row in &doc.attributes {
            check_dim(m, row.len())?;
            flat.extend_from_slice(row);
        }
        Dataset::new(flat, doc.labels, doc.attribute_names, doc.class_names)
            .and_then(|d| {
                if d.class_count == doc.class_count {
                    Ok(d)
                } else {
                    Err(Error::validation("class_count disagrees with class_names"))
                }
            })
    }
}

impl<F: Scalar> Dataset<F> {
    /// Builds a dataset, checking every invariant: rectangular finite
    /// attributes, `N ≥ 1`, `M ≥ 1`, `C ≥ 2`, labels in `[0, C)` and every
    /// class present.
    pub fn new(
        attributes: Vec<F>,
        labels: Vec<usize>,
        attribute_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let data = Self::unchecked(attributes, labels, attribute_names, class_names)?;
        if data.class_count < 2 {
            return Err(Error::validation(format!(
                "at least 2 classes required, found {}",
                data.class_count
            )));
        }
        let mut seen = vec![false; data.class_count];
        for &c in &data.labels {
            seen[c] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::validation(format!(
                "class {c} ({}) has no samples",
                data.class_names[c]
            )));
        }
        Ok(data)
    }

    /// Shape checks shared by [`Dataset::new`] and [`Dataset::subset`].
    fn unchecked(
        attributes: Vec<F>,
        labels: Vec<usize>,
        attribute_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let m = attribute_names.len();
        let n = labels.len();
        if m == 0 {
            return Err(Error::validation("at least one attribute required"));
        }
        if n == 0 {
            return Err(Error::validation("at least one sample required"));
        }
        check_dim(n * m, attributes.len())?;
        if let Some(i) = attributes.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite attribute value in sample {}",
                i / m
            )));
        }
        let class_count = class_names.len();
        if let Some(&c) = labels.iter().find(|&&c| c >= class_count) {
            return Err(Error::validation(format!(
                "label {c} out of range for {class_count} classes"
            )));
        }
        Ok(Dataset {
            attributes,
            labels,
            attribute_names,
            class_names,
            class_count,
        })
    }

    /// Convenience constructor with generated names `attr_j` / `class_c`.
    pub fn from_rows(rows: &[Vec<F>], labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * m);
        for row in rows {
            check_dim(m, row.len())?;
            flat.extend_from_slice(row);
        }
        Self::new(
            flat,
            labels,
            generated_names("attr", m),
            generated_names("class", class_count),
        )
    }

    /// Samples at `indices` (duplicates allowed), keeping the class set.
    ///
    /// Used for cross-validation splits; unlike [`Dataset::new`] a subset may
    /// lack samples of some classes.
    pub fn subset(&self, indices: &[usize]) -> Dataset<F> {
        let m = self.n_attributes();
        let mut attributes = Vec::with_capacity(indices.len() * m);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            attributes.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            attributes,
            labels,
            attribute_names: self.attribute_names.clone(),
            class_names: self.class_names.clone(),
            class_count: self.class_count,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[F] {
        let m = self.n_attributes();
        &self.attributes[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[F]> + '_ {
        self.attributes.chunks(self.n_attributes())
    }

    /// Row-major `N × M` attribute matrix.
    pub fn attributes(&self) -> &[F] {
        &self.attributes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn generated_names(prefix: &str, count: usize) -> Vec<String> {
    (0..count).map(|j| format!("{prefix}_{j}")).collect()
}

/// Loads a CSV file; see [`parse_csv`].
pub fn load_csv<F: Scalar>(
    path: impl AsRef<Path>,
    label_column: &LabelColumn,
    has_header: bool,
) -> Result<Dataset<F>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, label_column, has_header)
}

/// Parses comma-separated text into a [`Dataset`].
///
/// Every non-label field must parse as a finite real; the label field may be
/// any non-empty text and is remapped to dense indices by first appearance.
/// Without a header, attribute names are generated as `attr_0..attr_{M-1}`.
pub fn parse_csv<F: Scalar, R: Read>(
    reader: R,
    label_column: &LabelColumn,
    has_header: bool,
) -> Result<Dataset<F>> {
    let table = read_table::<F, R>(reader, Some(label_column), has_header)?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut labels = Vec::with_capacity(table.raw_labels.len());
    for raw in table.raw_labels {
        let next = class_names.len();
        let c = *index.entry(raw.clone()).or_insert_with(|| {
            class_names.push(raw);
            next
        });
        labels.push(c);
    }
    Dataset::new(table.values, labels, table.names, class_names)
}

/// Attribute matrix without labels, used when predicting.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable<F> {
    pub values: Vec<F>,
    pub names: Vec<String>,
}

impl<F: Scalar> AttributeTable<F> {
    pub fn n_attributes(&self) -> usize {
        self.names.len()
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[F]> + '_ {
        self.values.chunks(self.names.len().max(1))
    }
}

/// Loads only the attribute columns of a CSV file. When `label_column` is
/// `Some`, that column is skipped.
pub fn load_attributes<F: Scalar>(
    path: impl AsRef<Path>,
    label_column: Option<&LabelColumn>,
    has_header: bool,
) -> Result<AttributeTable<F>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let table = read_table::<F, File>(file, label_column, has_header)?;
    Ok(AttributeTable {
        values: table.values,
        names: table.names,
    })
}

struct RawTable<F> {
    values: Vec<F>,
    names: Vec<String>,
    raw_labels: Vec<String>,
}

fn read_table<F: Scalar, R: Read>(
    reader: R,
    label_column: Option<&LabelColumn>,
    has_header: bool,
) -> Result<RawTable<F>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Option<Vec<String>> = if has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut width = header.as_ref().map(Vec::len);
    let mut label_idx = None;
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut record = csv::StringRecord::new();

    while rdr.read_record(&mut record)? {
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::Parse {
                row,
                message: format!("expected {w} fields, found {}", record.len()),
            });
        }
        if let (None, Some(column)) = (label_idx, label_column) {
            if w < 2 {
                return Err(Error::validation(
                    "a labelled file needs at least one attribute column and a label column",
                ));
            }
            label_idx = Some(column.resolve(w, header.as_deref())?);
        }
        for (j, field) in record.iter().enumerate() {
            if Some(j) == label_idx {
                if field.is_empty() || field == "?" {
                    return Err(Error::Parse {
                        row,
                        message: "missing class label".into(),
                    });
                }
                raw_labels.push(field.to_string());
                continue;
            }
            let v = field
                .parse::<F>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    message: format!("column {j}: {field:?} is not a finite number"),
                })?;
            values.push(v);
        }
    }

    let w = width.ok_or_else(|| Error::validation("file contains no data rows"))?;
    if values.is_empty() && raw_labels.is_empty() {
        return Err(Error::validation("file contains no data rows"));
    }
    let names = match &header {
        Some(h) => h
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != label_idx)
            .map(|(_, s)| s.clone())
            .collect(),
        None => generated_names("attr", w - usize::from(label_idx.is_some())),
    };
    Ok(RawTable {
        values,
        names,
        raw_labels,
    })
}

/// Attribute scaling method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    MinMax,
}

/// Per-attribute ranges fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct NormalizationParams<F> {
    pub method: Normalization,
    pub min: Vec<F>,
    pub max: Vec<F>,
}

impl<F: Scalar> NormalizationParams<F> {
    /// Identity transform for `m` attributes.
    pub fn identity(m: usize) -> Self {
        NormalizationParams {
            method: Normalization::None,
            min: vec![F::zero(); m],
            max: vec![F::one(); m],
        }
    }

    pub fn n_attributes(&self) -> usize {
        self.min.len()
    }

    /// Maps `x` to `(x − min)/(max − min)` in place; constant attributes map
    /// to 0. No clipping.
    pub fn normalize_row(&self, x: &mut [F]) -> Result<()> {
        check_dim(self.min.len(), x.len())?;
        if self.method == Normalization::MinMax {
            for ((v, &lo), &hi) in x.iter_mut().zip(&self.min).zip(&self.max) {
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { F::zero() };
            }
        }
        Ok(())
    }

    /// Inverse of [`normalize_row`](Self::normalize_row) for non-constant
    /// attributes; constant attributes map back to their single value.
    pub fn denormalize_row(&self, x: &mut [F]) -> Result<()> {
        check_dim(self.min.len(), x.len())?;
        if self.method == Normalization::MinMax {
            for ((v, &lo), &hi) in x.iter_mut().zip(&self.min).zip(&self.max) {
                *v = if hi > lo { *v * (hi - lo) + lo } else { lo };
            }
        }
        Ok(())
    }
}

/// Per-attribute minimum and maximum over all samples.
pub fn fit_minmax<F: Scalar>(data: &Dataset<F>) -> NormalizationParams<F> {
    let m = data.n_attributes();
    let mut min = vec![F::infinity(); m];
    let mut max = vec![F::neg_infinity(); m];
    for row in data.rows() {
        for j in 0..m {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    NormalizationParams {
        method: Normalization::MinMax,
        min,
        max,
    }
}

/// Returns a copy of `data` with every row normalized by `params`.
pub fn apply_normalization<F: Scalar>(
    data: &Dataset<F>,
    params: &NormalizationParams<F>,
) -> Result<Dataset<F>> {
    check_dim(data.n_attributes(), params.n_attributes())?;
    let mut out = data.clone();
    let m = out.n_attributes();
    for row in out.attributes.chunks_mut(m) {
        params.normalize_row(row)?;
    }
    Ok(out)
}

/// Assignment of every sample to one of `K` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_count: usize,
    pub assignment: Vec<usize>,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

/// Stratified `k`-fold assignment.
///
/// Each class's sample indices are shuffled with the seeded RNG and dealt
/// round-robin into folds. The deal position carries over from one class to
/// the next, so per-class fold counts differ by at most one and total fold
/// sizes stay balanced.
pub fn stratified_folds<F: Scalar>(data: &Dataset<F>, k: usize, seed: u64) -> Result<FoldSplit> {
    let n = data.n_samples();
    if k < 2 {
        return Err(Error::validation(format!("fold count must be ≥ 2, got {k}")));
    }
    if k > n {
        return Err(Error::validation(format!(
            "fold count {k} exceeds sample count {n}"
        )));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); data.class_count()];
    for (i, &c) in data.labels().iter().enumerate() {
        per_class[c].push(i);
    }
    let mut rng = seed::stream(seed, Purpose::Folds, 0);
    let mut assignment = vec![0; n];
    let mut next = 0;
    for members in &mut per_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldSplit {
        fold_count: k,
        assignment,
    })
}
