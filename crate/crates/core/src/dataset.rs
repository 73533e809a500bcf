//! Tabular datasets with one binary sensitive attribute and a binary target.
//!
//! Rows are ingested from CSV against a [`DatasetSpec`] that names the
//! sensitive column, the protected value, the target column and its
//! favorable value, and the feature columns with their kind. Categorical
//! features are kept as integer codes; encoding for models happens in the
//! scorer.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type InstanceId = usize;

/// Absolute tolerance used when comparing an observed base rate to the
/// registry value.
pub const BASE_RATE_TOLERANCE: f64 = 0.0005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Protected,
    Privileged,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Protected, Group::Privileged];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Protected => "protected",
            Group::Privileged => "privileged",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Group::Protected => 0,
            Group::Privileged => 1,
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

fn default_missing_markers() -> Vec<String> {
    vec![String::new(), "?".to_string()]
}

/// Schema of one benchmark dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub protected_attribute_column: String,
    pub protected_value: String,
    pub target_column: String,
    pub favorable_value: String,
    #[serde(default)]
    pub expected_base_rate: Option<f64>,
    /// Representative privileged value; only used when writing synthetic rows.
    #[serde(default)]
    pub privileged_value: Option<String>,
    /// Representative unfavorable target value; only used when writing synthetic rows.
    #[serde(default)]
    pub unfavorable_value: Option<String>,
    #[serde(default = "default_missing_markers")]
    pub missing_markers: Vec<String>,
    pub features: Vec<FeatureSpec>,
}

impl DatasetSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: DatasetSpec = toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("DatasetSpec serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.protected_attribute_column == self.target_column {
            return Err(Error::Spec(
                "sensitive and target columns must differ".to_string(),
            ));
        }
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if f.name == self.protected_attribute_column || f.name == self.target_column {
                return Err(Error::Spec(format!(
                    "feature `{}` overlaps the sensitive or target column",
                    f.name
                )));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Spec(format!("duplicate feature `{}`", f.name)));
            }
        }
        if let Some(rate) = self.expected_base_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Spec(format!("expected_base_rate {rate} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn privileged_label(&self) -> &str {
        self.privileged_value.as_deref().unwrap_or("privileged")
    }

    pub fn unfavorable_label(&self) -> &str {
        self.unfavorable_value.as_deref().unwrap_or("unfavorable")
    }
}

/// The five benchmark schemas shipped with the crate.
pub mod registry {
    use super::DatasetSpec;
    use crate::error::{Error, Result};

    const SOURCES: [(&str, &str); 5] = [
        ("adult", include_str!("../specs/adult.toml")),
        ("compas", include_str!("../specs/compas.toml")),
        ("dutch", include_str!("../specs/dutch.toml")),
        ("law", include_str!("../specs/law.toml")),
        ("student", include_str!("../specs/student.toml")),
    ];

    pub fn names() -> impl Iterator<Item = &'static str> {
        SOURCES.iter().map(|(name, _)| *name)
    }

    pub fn get(name: &str) -> Result<DatasetSpec> {
        let (_, text) = SOURCES
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Spec(format!("no registered dataset named `{name}`")))?;
        DatasetSpec::from_toml(text)
    }

    pub fn all() -> Vec<DatasetSpec> {
        names().map(|n| get(n).expect("bundled specs are valid")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureColumn {
    Numeric {
        name: String,
        values: Vec<f64>,
    },
    /// Codes index into `levels`, which are sorted.
    Categorical {
        name: String,
        codes: Vec<u32>,
        levels: Vec<String>,
    },
}

impl FeatureColumn {
    pub fn name(&self) -> &str {
        match self {
            FeatureColumn::Numeric { name, .. } | FeatureColumn::Categorical { name, .. } => name,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            FeatureColumn::Numeric { values, .. } => values.len(),
            FeatureColumn::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, row: usize) -> String {
        match self {
            FeatureColumn::Numeric { values, .. } => format!("{}", values[row]),
            FeatureColumn::Categorical { codes, levels, .. } => {
                levels[codes[row] as usize].clone()
            }
        }
    }

    fn select(&self, rows: &[usize]) -> FeatureColumn {
        match self {
            FeatureColumn::Numeric { name, values } => FeatureColumn::Numeric {
                name: name.clone(),
                values: rows.iter().map(|&r| values[r]).collect(),
            },
            FeatureColumn::Categorical {
                name,
                codes,
                levels,
            } => FeatureColumn::Categorical {
                name: name.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
                levels: levels.clone(),
            },
        }
    }
}

/// Immutable table of instances. Instance ids are row positions `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    spec: DatasetSpec,
    header: Vec<String>,
    columns: Vec<FeatureColumn>,
    sensitive: Vec<Group>,
    label: Vec<u8>,
    privileged_value: String,
    unfavorable_value: String,
    dropped_rows: usize,
}

impl Dataset {
    /// Assemble a dataset from already-encoded parts.
    pub fn from_parts(
        spec: DatasetSpec,
        columns: Vec<FeatureColumn>,
        sensitive: Vec<Group>,
        label: Vec<u8>,
    ) -> Result<Self> {
        spec.validate()?;
        let n = sensitive.len();
        if n == 0 {
            return Err(Error::EmptyFile);
        }
        if label.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: label.len(),
            });
        }
        if let Some(bad) = label.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidParameter(format!("label value {bad} is not 0/1")));
        }
        for c in &columns {
            if c.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: c.len(),
                });
            }
        }
        for f in &spec.features {
            let col = columns
                .iter()
                .find(|c| c.name() == f.name)
                .ok_or_else(|| Error::MissingColumn(f.name.clone()))?;
            let matches = matches!(
                (f.kind, col),
                (FeatureKind::Numeric, FeatureColumn::Numeric { .. })
                    | (FeatureKind::Categorical, FeatureColumn::Categorical { .. })
            );
            if !matches {
                return Err(Error::Spec(format!("column `{}` has the wrong kind", f.name)));
            }
        }
        let mut header: Vec<String> = spec.features.iter().map(|f| f.name.clone()).collect();
        header.push(spec.protected_attribute_column.clone());
        header.push(spec.target_column.clone());
        let columns = spec
            .features
            .iter()
            .map(|f| {
                columns
                    .iter()
                    .find(|c| c.name() == f.name)
                    .cloned()
                    .expect("checked above")
            })
            .collect();
        Ok(Dataset {
            privileged_value: spec.privileged_label().to_string(),
            unfavorable_value: spec.unfavorable_label().to_string(),
            spec,
            header,
            columns,
            sensitive,
            label,
            dropped_rows: 0,
        })
    }

    pub fn spec(&self) -> &DatasetSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }

    pub fn instance_ids(&self) -> Vec<InstanceId> {
        (0..self.len()).collect()
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&FeatureColumn> {
        self.columns.iter().find(|c| c.name() == name)
    }

    pub fn groups(&self) -> &[Group] {
        &self.sensitive
    }

    pub fn labels(&self) -> &[u8] {
        &self.label
    }

    pub fn group(&self, id: InstanceId) -> Result<Group> {
        self.sensitive.get(id).copied().ok_or(Error::UnknownId(id))
    }

    pub fn label(&self, id: InstanceId) -> Result<u8> {
        self.label.get(id).copied().ok_or(Error::UnknownId(id))
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Sizes of (protected, privileged).
    pub fn group_sizes(&self) -> (usize, usize) {
        let protected = self
            .sensitive
            .iter()
            .filter(|&&g| g == Group::Protected)
            .count();
        (protected, self.len() - protected)
    }

    pub fn base_rate(&self) -> f64 {
        let positives = self.label.iter().filter(|&&y| y == 1).count();
        positives as f64 / self.len() as f64
    }

    /// Copy of the dataset with one numeric column replaced.
    pub fn with_numeric_column(&self, name: &str, values: Vec<f64>) -> Result<Dataset> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: values.len(),
            });
        }
        let mut out = self.clone();
        let col = out
            .columns
            .iter_mut()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        match col {
            FeatureColumn::Numeric { values: v, .. } => *v = values,
            FeatureColumn::Categorical { .. } => {
                return Err(Error::NonNumericColumn(name.to_string()))
            }
        }
        Ok(out)
    }

    /// Write the dataset back out with the ingested header order.
    pub fn export_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for row in 0..self.len() {
            let record: Vec<String> = self
                .header
                .iter()
                .map(|h| self.cell(h, row))
                .collect();
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn export_path(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.export_csv(file)
    }

    fn cell(&self, column: &str, row: usize) -> String {
        if column == self.spec.protected_attribute_column {
            match self.sensitive[row] {
                Group::Protected => self.spec.protected_value.clone(),
                Group::Privileged => self.privileged_value.clone(),
            }
        } else if column == self.spec.target_column {
            if self.label[row] == 1 {
                self.spec.favorable_value.clone()
            } else {
                self.unfavorable_value.clone()
            }
        } else {
            self.column(column).expect("header names a column").cell(row)
        }
    }

    /// New dataset holding only `rows`, renumbered `0..rows.len()`.
    pub fn subset(&self, rows: &[InstanceId]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.len()) {
            return Err(Error::UnknownId(bad));
        }
        Ok(Dataset {
            spec: self.spec.clone(),
            header: self.header.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            sensitive: rows.iter().map(|&r| self.sensitive[r]).collect(),
            label: rows.iter().map(|&r| self.label[r]).collect(),
            privileged_value: self.privileged_value.clone(),
            unfavorable_value: self.unfavorable_value.clone(),
            dropped_rows: 0,
        })
    }
}

/// Read a CSV file and encode it against `spec`.
pub fn ingest(csv_path: &Path, spec: &DatasetSpec) -> Result<Dataset> {
    let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    ingest_reader(file, spec)
}

pub fn ingest_reader<R: Read>(reader: R, spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let file_header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if file_header.is_empty() || (file_header.len() == 1 && file_header[0].is_empty()) {
        return Err(Error::EmptyFile);
    }

    let position = |name: &str| -> Result<usize> {
        file_header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let sensitive_pos = position(&spec.protected_attribute_column)?;
    let target_pos = position(&spec.target_column)?;
    let feature_pos: Vec<usize> = spec
        .features
        .iter()
        .map(|f| position(&f.name))
        .collect::<Result<_>>()?;

    let mut used: Vec<usize> = feature_pos.clone();
    used.push(sensitive_pos);
    used.push(target_pos);
    let mut header_order = used.clone();
    header_order.sort_unstable();
    let header: Vec<String> = header_order.iter().map(|&i| file_header[i].clone()).collect();

    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    let mut dropped = 0usize;
    for record in rdr.records() {
        let record = record?;
        let cells: Vec<String> = used
            .iter()
            .map(|&i| record.get(i).unwrap_or("").to_string())
            .collect();
        if cells.iter().any(|c| spec.missing_markers.iter().any(|m| m == c)) {
            dropped += 1;
            continue;
        }
        raw_rows.push(cells);
    }
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} rows with missing values in used columns",
            spec.name
        );
    }
    if raw_rows.is_empty() {
        return Err(Error::EmptyFile);
    }

    let nf = spec.features.len();
    let sensitive_values: BTreeSet<&str> = raw_rows.iter().map(|r| r[nf].as_str()).collect();
    if sensitive_values.len() > 2 {
        return Err(Error::NonBinarySensitive {
            column: spec.protected_attribute_column.clone(),
            count: sensitive_values.len(),
        });
    }
    let target_values: BTreeSet<&str> = raw_rows.iter().map(|r| r[nf + 1].as_str()).collect();
    if target_values.len() > 2 {
        return Err(Error::NonBinaryTarget {
            column: spec.target_column.clone(),
            count: target_values.len(),
        });
    }
    let privileged_value = sensitive_values
        .iter()
        .find(|v| **v != spec.protected_value)
        .map(|v| v.to_string())
        .unwrap_or_else(|| spec.privileged_label().to_string());
    let unfavorable_value = target_values
        .iter()
        .find(|v| **v != spec.favorable_value)
        .map(|v| v.to_string())
        .unwrap_or_else(|| spec.unfavorable_label().to_string());

    let sensitive: Vec<Group> = raw_rows
        .iter()
        .map(|r| {
            if r[nf] == spec.protected_value {
                Group::Protected
            } else {
                Group::Privileged
            }
        })
        .collect();
    let label: Vec<u8> = raw_rows
        .iter()
        .map(|r| u8::from(r[nf + 1] == spec.favorable_value))
        .collect();

    let mut columns = Vec::with_capacity(nf);
    for (j, f) in spec.features.iter().enumerate() {
        let column = match f.kind {
            FeatureKind::Numeric => {
                let values = raw_rows
                    .iter()
                    .enumerate()
                    .map(|(row, r)| {
                        r[j].parse::<f64>().map_err(|_| Error::InvalidNumber {
                            column: f.name.clone(),
                            row,
                            value: r[j].clone(),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                FeatureColumn::Numeric {
                    name: f.name.clone(),
                    values,
                }
            }
            FeatureKind::Categorical => {
                let levels: Vec<String> = raw_rows
                    .iter()
                    .map(|r| r[j].clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let index: BTreeMap<&str, u32> = levels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i as u32))
                    .collect();
                let codes = raw_rows.iter().map(|r| index[r[j].as_str()]).collect();
                FeatureColumn::Categorical {
                    name: f.name.clone(),
                    codes,
                    levels,
                }
            }
        };
        columns.push(column);
    }

    Ok(Dataset {
        spec: spec.clone(),
        header,
        columns,
        sensitive,
        label,
        privileged_value,
        unfavorable_value,
        dropped_rows: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaseRateCheck {
    pub rate: f64,
    pub expected: Option<f64>,
    /// `|rate - expected| <= BASE_RATE_TOLERANCE`.
    pub within_tolerance: Option<bool>,
    /// Rate rounded to four decimals equals the expected value.
    pub matches_to_4_decimals: Option<bool>,
}

pub fn verify_base_rate(d: &Dataset) -> BaseRateCheck {
    let rate = d.base_rate();
    let expected = d.spec.expected_base_rate;
    let within_tolerance = expected.map(|e| (rate - e).abs() <= BASE_RATE_TOLERANCE);
    let matches_to_4_decimals = expected.map(|e| ((rate * 1e4).round() - (e * 1e4).round()).abs() < 0.5);
    if within_tolerance == Some(false) {
        log::warn!(
            "{}: base rate {rate:.4} differs from expected {:.4}",
            d.name(),
            expected.unwrap_or_default()
        );
    }
    BaseRateCheck {
        rate,
        expected,
        within_tolerance,
        matches_to_4_decimals,
    }
}

/// Disjoint train / validation / test id sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_ids: Vec<InstanceId>,
    pub validation_ids: Vec<InstanceId>,
    pub test_ids: Vec<InstanceId>,
    pub seed: u64,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (
            self.train_ids.len(),
            self.validation_ids.len(),
            self.test_ids.len(),
        )
    }

    /// Ids for a role, failing when a method needs a partition that is empty.
    pub fn require(&self, role: SplitRole, method: &str) -> Result<&[InstanceId]> {
        let ids = match role {
            SplitRole::Train => &self.train_ids,
            SplitRole::Validation => &self.validation_ids,
            SplitRole::Test => &self.test_ids,
        };
        if ids.is_empty() {
            return Err(Error::DegenerateSplit {
                role: role.as_str(),
                method: method.to_string(),
            });
        }
        Ok(ids)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Validation,
    Test,
}

impl SplitRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Validation => "validation",
            SplitRole::Test => "test",
        }
    }
}

/// Seeded shuffle then partition. Validation and test sizes are floored;
/// the remainder goes to train. Each id set is returned sorted.
pub fn split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (ft, fv, fs) = fractions;
    for f in [ft, fv, fs] {
        if !(f >= 0.0) {
            return Err(Error::InvalidFractions(format!("{fractions:?} has a negative part")));
        }
    }
    if ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions(format!("{fractions:?} does not sum to 1")));
    }
    let n_val = (fv * n as f64).floor() as usize;
    let n_test = (fs * n as f64).floor() as usize;
    let n_val = n_val.min(n);
    let n_test = n_test.min(n - n_val);

    let mut order: Vec<InstanceId> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_train = n - n_val - n_test;
    let mut train_ids = order[..n_train].to_vec();
    let mut validation_ids = order[n_train..n_train + n_val].to_vec();
    let mut test_ids = order[n_train + n_val..].to_vec();
    train_ids.sort_unstable();
    validation_ids.sort_unstable();
    test_ids.sort_unstable();
    Ok(Split {
        train_ids,
        validation_ids,
        test_ids,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIXTURE: &str = "\
age,job,sex,outcome
30,clerk,F,yes
45,\"sales, retail\",M,no
22,clerk,F,yes
51,eng,M,no
38,eng,F,no
29,sales,M,yes
";

    pub(crate) fn fixture_spec() -> DatasetSpec {
        DatasetSpec {
            name: "fixture".into(),
            protected_attribute_column: "sex".into(),
            protected_value: "F".into(),
            target_column: "outcome".into(),
            favorable_value: "yes".into(),
            expected_base_rate: Some(0.5),
            privileged_value: None,
            unfavorable_value: None,
            missing_markers: default_missing_markers(),
            features: vec![
                FeatureSpec {
                    name: "age".into(),
                    kind: FeatureKind::Numeric,
                },
                FeatureSpec {
                    name: "job".into(),
                    kind: FeatureKind::Categorical,
                },
            ],
        }
    }

    #[test]
    fn six_row_fixture_counts() {
        let d = ingest_reader(FIXTURE.as_bytes(), &fixture_spec()).unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d.group_sizes(), (3, 3));
        assert_eq!(d.labels(), &[1, 0, 1, 0, 0, 1]);
        assert_eq!(d.base_rate(), 0.5);
        let check = verify_base_rate(&d);
        assert_eq!(check.rate, 0.5);
        assert_eq!(check.within_tolerance, Some(true));
        match d.column("job").unwrap() {
            FeatureColumn::Categorical { levels, codes, .. } => {
                assert_eq!(levels, &["clerk", "eng", "sales", "sales, retail"]);
                assert_eq!(codes, &[0, 3, 0, 1, 1, 2]);
            }
            other => panic!("unexpected column {other:?}"),
        }
    }

    #[test]
    fn single_row_file() {
        let text = "age,job,sex,outcome\n40,eng,F,yes\n";
        let d = ingest_reader(text.as_bytes(), &fixture_spec()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.base_rate(), 1.0);
        assert_eq!(d.groups(), &[Group::Protected]);
    }

    #[test]
    fn all_zero_labels_rate() {
        let text = "age,job,sex,outcome\n40,eng,F,no\n41,eng,M,no\n";
        let d = ingest_reader(text.as_bytes(), &fixture_spec()).unwrap();
        assert_eq!(verify_base_rate(&d).rate, 0.0);
        assert_eq!(verify_base_rate(&d).within_tolerance, Some(false));
    }

    #[test]
    fn ingestion_errors() {
        let spec = fixture_spec();
        let missing = "age,sex,outcome\n1,F,yes\n";
        assert!(matches!(
            ingest_reader(missing.as_bytes(), &spec),
            Err(Error::MissingColumn(c)) if c == "job"
        ));
        let three = "age,job,sex,outcome\n1,a,F,yes\n2,a,M,no\n3,a,X,no\n";
        assert!(matches!(
            ingest_reader(three.as_bytes(), &spec),
            Err(Error::NonBinarySensitive { count: 3, .. })
        ));
        let target = "age,job,sex,outcome\n1,a,F,yes\n2,a,M,no\n3,a,M,maybe\n";
        assert!(matches!(
            ingest_reader(target.as_bytes(), &spec),
            Err(Error::NonBinaryTarget { count: 3, .. })
        ));
        assert!(matches!(
            ingest_reader("age,job,sex,outcome\n".as_bytes(), &spec),
            Err(Error::EmptyFile)
        ));
        assert!(matches!(
            ingest_reader("".as_bytes(), &spec),
            Err(Error::EmptyFile)
        ));
        let bad_num = "age,job,sex,outcome\nold,a,F,yes\n";
        assert!(matches!(
            ingest_reader(bad_num.as_bytes(), &spec),
            Err(Error::InvalidNumber { .. })
        ));
    }

    #[test]
    fn missing_rows_are_dropped_and_counted() {
        let text = "age,job,sex,outcome\n40,?,F,yes\n41,eng,M,no\n,eng,M,yes\n";
        let d = ingest_reader(text.as_bytes(), &fixture_spec()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.dropped_rows(), 2);
    }

    #[test]
    fn export_round_trip() {
        let d = ingest_reader(FIXTURE.as_bytes(), &fixture_spec()).unwrap();
        let mut buf = Vec::new();
        d.export_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("age,job,sex,outcome\n"));
        assert!(text.contains("\"sales, retail\""));
        let again = ingest_reader(buf.as_slice(), &fixture_spec()).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn split_sizes() {
        assert_eq!(split(10, (0.6, 0.2, 0.2), 7).unwrap().sizes(), (6, 2, 2));
        assert_eq!(split(10, (1.0, 0.0, 0.0), 7).unwrap().sizes(), (10, 0, 0));
        assert_eq!(split(7, (0.6, 0.2, 0.2), 1).unwrap().sizes(), (5, 1, 1));
        assert!(split(10, (0.5, 0.2, 0.2), 1).is_err());
        assert!(split(10, (1.2, -0.2, 0.0), 1).is_err());
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let a = split(101, (0.6, 0.2, 0.2), 42).unwrap();
        let b = split(101, (0.6, 0.2, 0.2), 42).unwrap();
        assert_eq!(a, b);
        let c = split(101, (0.6, 0.2, 0.2), 43).unwrap();
        assert_ne!(a.train_ids, c.train_ids);
        let mut all: Vec<usize> = a
            .train_ids
            .iter()
            .chain(&a.validation_ids)
            .chain(&a.test_ids)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_split_is_signalled_at_use() {
        let s = split(10, (1.0, 0.0, 0.0), 0).unwrap();
        assert!(matches!(
            s.require(SplitRole::Validation, "TO"),
            Err(Error::DegenerateSplit { role: "validation", .. })
        ));
        assert_eq!(s.require(SplitRole::Train, "TO").unwrap().len(), 10);
    }

    #[test]
    fn registry_has_five_specs() {
        let specs = registry::all();
        let rates: Vec<f64> = specs.iter().map(|s| s.expected_base_rate.unwrap()).collect();
        assert_eq!(rates, vec![0.2393, 0.5216, 0.5239, 0.8897, 0.5362]);
        let adult = registry::get("Adult").unwrap();
        assert_eq!(adult.protected_value, "Female");
        assert_eq!(adult.favorable_value, ">50K");
    }

    #[test]
    fn spec_rejects_overlapping_columns() {
        let mut spec = fixture_spec();
        spec.features.push(FeatureSpec {
            name: "sex".into(),
            kind: FeatureKind::Categorical,
        });
        assert!(spec.validate().is_err());
    }
}
