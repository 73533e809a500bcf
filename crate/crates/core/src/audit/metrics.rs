use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::audit::rank::{kendall_tau, TauVariant};
use crate::dataset::{Dataset, Group, InstanceId};
use crate::decide::DecisionSet;
use crate::error::{Error, Result};
use crate::scalar::{ratio, Scalar};
use crate::scores::ScoreSet;

fn group_rates<T: Scalar>(
    dec: &DecisionSet<T>,
    d: &Dataset,
    keep: impl Fn(InstanceId) -> Result<bool>,
) -> Result<[(u64, u64); 2]> {
    let mut counts = [(0u64, 0u64); 2];
    for (&id, &label) in dec.instance_ids.iter().zip(&dec.labels) {
        if keep(id)? {
            let slot = &mut counts[d.group(id)?.index()];
            slot.0 += u64::from(label);
            slot.1 += 1;
        }
    }
    Ok(counts)
}

/// Protected positive rate minus privileged positive rate.
pub fn spd<T: Scalar>(dec: &DecisionSet<T>, d: &Dataset) -> Result<T> {
    let counts = group_rates(dec, d, |_| Ok(true))?;
    for g in Group::BOTH {
        if counts[g.index()].1 == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    let [p, q] = counts;
    Ok(ratio::<T>(p.0, p.1) - ratio::<T>(q.0, q.1))
}

/// Protected true positive rate minus privileged true positive rate.
pub fn eod<T: Scalar>(dec: &DecisionSet<T>, d: &Dataset) -> Result<T> {
    let counts = group_rates(dec, d, |id| Ok(d.label(id)? == 1))?;
    for g in Group::BOTH {
        if counts[g.index()].1 == 0 {
            return Err(Error::NoPositivesInGroup(g));
        }
    }
    let [p, q] = counts;
    Ok(ratio::<T>(p.0, p.1) - ratio::<T>(q.0, q.1))
}

pub fn accuracy<T: Scalar>(dec: &DecisionSet<T>, d: &Dataset) -> Result<T> {
    let mut hits = 0u64;
    for (&id, &label) in dec.instance_ids.iter().zip(&dec.labels) {
        hits += u64::from(d.label(id)? == label);
    }
    Ok(ratio(hits, dec.len() as u64))
}

/// True labels for `ids`.
pub fn true_labels(d: &Dataset, ids: &[InstanceId]) -> Result<Vec<u8>> {
    ids.iter().map(|&id| d.label(id)).collect()
}

/// AUC of the members of `group`.
pub fn group_auc<T: Scalar>(scores: &ScoreSet<T>, d: &Dataset, group: Group) -> Result<T> {
    let mut s = Vec::new();
    let mut y = Vec::new();
    for (&id, &v) in scores.instance_ids.iter().zip(&scores.scores) {
        if d.group(id)? == group {
            s.push(v);
            y.push(d.label(id)?);
        }
    }
    if s.is_empty() {
        return Err(Error::EmptyGroup(group));
    }
    crate::audit::auc(&s, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrant {
    KeptNegative,
    Upgraded,
    KeptPositive,
    Downgraded,
}

impl Quadrant {
    pub fn of(base: u8, mitigated: u8) -> Quadrant {
        match (base, mitigated) {
            (0, 0) => Quadrant::KeptNegative,
            (0, _) => Quadrant::Upgraded,
            (_, 0) => Quadrant::Downgraded,
            _ => Quadrant::KeptPositive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::KeptNegative => "kept-negative",
            Quadrant::Upgraded => "upgraded",
            Quadrant::KeptPositive => "kept-positive",
            Quadrant::Downgraded => "downgraded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Transitions {
    pub kept_negative: u64,
    pub upgraded: u64,
    pub kept_positive: u64,
    pub downgraded: u64,
}

impl Transitions {
    pub fn total(&self) -> u64 {
        self.kept_negative + self.upgraded + self.kept_positive + self.downgraded
    }

    fn add(&mut self, q: Quadrant) {
        match q {
            Quadrant::KeptNegative => self.kept_negative += 1,
            Quadrant::Upgraded => self.upgraded += 1,
            Quadrant::KeptPositive => self.kept_positive += 1,
            Quadrant::Downgraded => self.downgraded += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuadrantCounts {
    pub protected: Transitions,
    pub privileged: Transitions,
}

impl QuadrantCounts {
    pub fn group(&self, g: Group) -> &Transitions {
        match g {
            Group::Protected => &self.protected,
            Group::Privileged => &self.privileged,
        }
    }
}

fn check_same_ids<T>(a: &DecisionSet<T>, b: &DecisionSet<T>) -> Result<()> {
    if a.instance_ids != b.instance_ids {
        return Err(Error::MisalignedIds(format!(
            "`{}` and `{}` cover different instances",
            a.source_method, b.source_method
        )));
    }
    Ok(())
}

/// Per-group 2x2 transition counts from baseline to mitigated labels.
pub fn quadrant_analysis<T: Scalar>(
    base: &DecisionSet<T>,
    mitigated: &DecisionSet<T>,
    d: &Dataset,
) -> Result<QuadrantCounts> {
    check_same_ids(base, mitigated)?;
    let mut counts = QuadrantCounts::default();
    for ((&id, &b), &m) in base.instance_ids.iter().zip(&base.labels).zip(&mitigated.labels) {
        let q = Quadrant::of(b, m);
        match d.group(id)? {
            Group::Protected => counts.protected.add(q),
            Group::Privileged => counts.privileged.add(q),
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow<T> {
    pub id: InstanceId,
    pub group: Group,
    pub score_base: T,
    pub score_mitigated: T,
    pub quadrant: Quadrant,
}

/// Rows behind a baseline-versus-mitigated score scatter plot.
pub fn scatter_rows<T: Scalar>(
    base: &DecisionSet<T>,
    mitigated: &DecisionSet<T>,
    base_scores: &ScoreSet<T>,
    mitigated_scores: &ScoreSet<T>,
    d: &Dataset,
) -> Result<Vec<ScatterRow<T>>> {
    check_same_ids(base, mitigated)?;
    base_scores.check_aligned(&base.instance_ids)?;
    mitigated_scores.check_aligned(&base.instance_ids)?;
    (0..base.len())
        .map(|i| {
            let id = base.instance_ids[i];
            Ok(ScatterRow {
                id,
                group: d.group(id)?,
                score_base: base_scores.scores[i],
                score_mitigated: mitigated_scores.scores[i],
                quadrant: Quadrant::of(base.labels[i], mitigated.labels[i]),
            })
        })
        .collect()
}

/// `id,group,score_base,score_mitigated,quadrant`.
pub fn write_scatter_csv<T: Scalar, W: Write>(rows: &[ScatterRow<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "group", "score_base", "score_mitigated", "quadrant"])?;
    for r in rows {
        w.write_record([
            r.id.to_string(),
            r.group.to_string(),
            r.score_base.to_string(),
            r.score_mitigated.to_string(),
            r.quadrant.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix<T> {
    pub methods: Vec<String>,
    pub values: Vec<Vec<T>>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    pub fn get(&self, a: &str, b: &str) -> Option<T> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        Some(self.values[i][j])
    }

    /// Square CSV with the method names as header row and first column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["method".to_string()];
        header.extend(self.methods.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.methods.iter().zip(&self.values) {
            let mut record = vec![name.clone()];
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Pairwise Kendall tau between every two score sets.
pub fn method_correlation_matrix<T: Scalar>(
    sets: &[&ScoreSet<T>],
    variant: TauVariant,
) -> Result<CorrelationMatrix<T>> {
    if let Some(first) = sets.first() {
        for s in &sets[1..] {
            s.check_aligned(&first.instance_ids)?;
        }
    }
    let k = sets.len();
    let mut values = vec![vec![T::one(); k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let tau = kendall_tau(&sets[i].scores, &sets[j].scores, variant)?;
            values[i][j] = tau;
            values[j][i] = tau;
        }
    }
    Ok(CorrelationMatrix {
        methods: sets.iter().map(|s| s.method.clone()).collect(),
        values,
    })
}
