use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Group, InstanceId, SplitRole};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scores outside [0, 1] by at most this much are clamped on ingestion.
pub const CLAMP_SLACK: f64 = 1e-9;

/// Per-instance scores in [0, 1] produced by one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet<T> {
    pub method: String,
    pub instance_ids: Vec<InstanceId>,
    pub scores: Vec<T>,
    pub produced_on: Option<SplitRole>,
}

impl<T: Scalar> ScoreSet<T> {
    pub fn new(
        method: impl Into<String>,
        instance_ids: Vec<InstanceId>,
        scores: Vec<T>,
        produced_on: Option<SplitRole>,
    ) -> Result<Self> {
        if instance_ids.len() != scores.len() {
            return Err(Error::LengthMismatch {
                left: instance_ids.len(),
                right: scores.len(),
            });
        }
        for (&id, &s) in instance_ids.iter().zip(&scores) {
            if !(s >= T::zero() && s <= T::one()) {
                return Err(Error::ScoreOutOfRange {
                    id,
                    score: s.as_f64(),
                });
            }
        }
        Ok(ScoreSet {
            method: method.into(),
            instance_ids,
            scores,
            produced_on,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn renamed(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }

    /// Scores re-ordered to follow `ids`; every id must be present.
    pub fn restrict(&self, ids: &[InstanceId]) -> Result<ScoreSet<T>> {
        let index: HashMap<InstanceId, usize> = self
            .instance_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let scores = ids
            .iter()
            .map(|id| index.get(id).map(|&i| self.scores[i]).ok_or(Error::UnknownId(*id)))
            .collect::<Result<Vec<T>>>()?;
        Ok(ScoreSet {
            method: self.method.clone(),
            instance_ids: ids.to_vec(),
            scores,
            produced_on: self.produced_on,
        })
    }

    /// Scores of the members of `group`, in id order of this set.
    pub fn group_scores(&self, d: &Dataset, group: Group) -> Result<Vec<T>> {
        let mut out = Vec::new();
        for (&id, &s) in self.instance_ids.iter().zip(&self.scores) {
            if d.group(id)? == group {
                out.push(s);
            }
        }
        Ok(out)
    }

    pub fn check_aligned(&self, ids: &[InstanceId]) -> Result<()> {
        if self.instance_ids != ids {
            return Err(Error::MisalignedIds(format!(
                "`{}` is not aligned with the requested ids",
                self.method
            )));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ScoreSet<U> {
        ScoreSet {
            method: self.method.clone(),
            instance_ids: self.instance_ids.clone(),
            scores: self.scores.iter().map(|s| U::of(s.as_f64())).collect(),
            produced_on: self.produced_on,
        }
    }

    /// `instance_id,score` CSV, the same layout [`ingest_external_scores`] reads.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["instance_id", "score"])?;
        for (id, s) in self.instance_ids.iter().zip(&self.scores) {
            w.write_record([id.to_string(), s.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Read `instance_id,score` rows produced by an external tool.
pub fn ingest_external_scores(csv_path: &Path, d: &Dataset, method: &str) -> Result<ScoreSet<f64>> {
    let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    read_external_scores(file, d, method)
}

pub fn read_external_scores<R: Read>(reader: R, d: &Dataset, method: &str) -> Result<ScoreSet<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_pos = headers
        .iter()
        .position(|h| h == "instance_id")
        .ok_or_else(|| Error::MissingColumn("instance_id".into()))?;
    let score_pos = headers
        .iter()
        .position(|h| h == "score")
        .ok_or_else(|| Error::MissingColumn("score".into()))?;

    let mut ids = Vec::new();
    let mut scores = Vec::new();
    let mut seen = BTreeSet::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let id_text = record.get(id_pos).unwrap_or("");
        let id: InstanceId = id_text
            .parse()
            .map_err(|_| Error::IdMismatch(format!("row {row}: bad instance id `{id_text}`")))?;
        if id >= d.len() {
            return Err(Error::IdMismatch(format!("instance {id} is not in `{}`", d.name())));
        }
        if !seen.insert(id) {
            return Err(Error::IdMismatch(format!("instance {id} appears twice")));
        }
        let score_text = record.get(score_pos).unwrap_or("");
        let score: f64 = score_text.parse().map_err(|_| Error::InvalidNumber {
            column: "score".into(),
            row,
            value: score_text.to_string(),
        })?;
        let score = if (0.0..=1.0).contains(&score) {
            score
        } else if (-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&score) {
            score.clamp(0.0, 1.0)
        } else {
            return Err(Error::ScoreOutOfRange { id, score });
        };
        ids.push(id);
        scores.push(score);
    }
    if ids.is_empty() {
        return Err(Error::EmptyFile);
    }
    ScoreSet::new(method, ids, scores, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn dataset() -> Dataset {
        synthetic::toy_dataset(&[(Group::Protected, 1), (Group::Privileged, 0), (Group::Protected, 0)])
    }

    #[test]
    fn rejects_out_of_range_on_construction() {
        assert!(ScoreSet::<f64>::new("m", vec![0], vec![1.5], None).is_err());
        assert!(ScoreSet::<f64>::new("m", vec![0], vec![f64::NAN], None).is_err());
        assert!(ScoreSet::<f64>::new("m", vec![0, 1], vec![0.5], None).is_err());
    }

    #[test]
    fn external_scores_clamp_and_errors() {
        let d = dataset();
        let ok = "instance_id,score\n0,0.2\n1,1.0000000001\n2,-0.0000000001\n";
        let s = read_external_scores(ok.as_bytes(), &d, "LFR").unwrap();
        assert_eq!(s.scores, vec![0.2, 1.0, 0.0]);
        let high = "instance_id,score\n0,1.2\n";
        assert!(matches!(
            read_external_scores(high.as_bytes(), &d, "LFR"),
            Err(Error::ScoreOutOfRange { id: 0, .. })
        ));
        let unknown = "instance_id,score\n7,0.3\n";
        assert!(matches!(
            read_external_scores(unknown.as_bytes(), &d, "LFR"),
            Err(Error::IdMismatch(_))
        ));
        let dup = "instance_id,score\n1,0.3\n1,0.4\n";
        assert!(matches!(
            read_external_scores(dup.as_bytes(), &d, "LFR"),
            Err(Error::IdMismatch(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = dataset();
        let s = ScoreSet::new("m", vec![0, 1, 2], vec![0.1, 1.0 / 3.0, 0.7], None).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = read_external_scores(buf.as_slice(), &d, "m").unwrap();
        assert_eq!(back.scores, s.scores);
    }

    #[test]
    fn restrict_reorders_by_id() {
        let s = ScoreSet::new("m", vec![0, 1, 2], vec![0.1, 0.2, 0.3], None).unwrap();
        let r = s.restrict(&[2, 0]).unwrap();
        assert_eq!(r.scores, vec![0.3, 0.1]);
        assert!(matches!(s.restrict(&[5]), Err(Error::UnknownId(5))));
    }
}
