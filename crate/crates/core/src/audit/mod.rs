//! Fairness, accuracy and rank-similarity metrics, and the report that collects them.

mod metrics;
mod rank;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use metrics::{
    accuracy, eod, group_auc, method_correlation_matrix, quadrant_analysis, scatter_rows, spd, true_labels,
    write_scatter_csv, CorrelationMatrix, Quadrant, QuadrantCounts, ScatterRow, Transitions,
};
pub use rank::{auc, auc_fraction, kendall_tau, tau_counts, TauCounts, TauVariant};

use crate::dataset::{Dataset, Group};
use crate::decide::{decide, DecisionPolicy, DecisionSet, TIE_RULE};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scores::ScoreSet;

pub const BASELINE: &str = "baseline";

/// One method's outputs on the evaluation ids. Score-only methods are
/// turned into decisions with the report policy.
#[derive(Debug, Clone)]
pub struct MethodOutput<T> {
    pub name: String,
    pub scores: ScoreSet<T>,
    pub decisions: Option<DecisionSet<T>>,
}

impl<T: Scalar> MethodOutput<T> {
    pub fn scores_only(name: impl Into<String>, scores: ScoreSet<T>) -> Self {
        MethodOutput {
            name: name.into(),
            scores,
            decisions: None,
        }
    }

    pub fn with_decisions(name: impl Into<String>, scores: ScoreSet<T>, decisions: DecisionSet<T>) -> Self {
        MethodOutput {
            name: name.into(),
            scores,
            decisions: Some(decisions),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub dataset: String,
    pub fit_partition: String,
    pub eval_partition: String,
    /// train, validation, test
    pub partition_sizes: Option<[usize; 3]>,
    pub eval_group_sizes: [usize; 2],
    pub seeds: BTreeMap<String, u64>,
    pub config_hash: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow<T> {
    pub method: String,
    pub decision: String,
    pub auc: T,
    pub auc_protected: T,
    pub auc_privileged: T,
    pub acc: T,
    pub spd: T,
    pub eod: T,
    pub pdr: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRow<T> {
    pub method: String,
    pub tau_overall: T,
    pub tau_protected: T,
    pub tau_privileged: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantRow {
    pub method: String,
    pub counts: QuadrantCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport<T> {
    pub header: ReportHeader,
    pub policy: DecisionPolicy<T>,
    pub policy_label: String,
    pub tie_rule: String,
    pub tau_variant: TauVariant,
    pub rows: Vec<MetricRow<T>>,
    pub tau: Vec<TauRow<T>>,
    pub tau_matrix: CorrelationMatrix<T>,
    pub quadrants: Vec<QuadrantRow>,
    pub scatter_dumps: Vec<String>,
}

impl<T: Scalar> AuditReport<T> {
    pub fn row(&self, method: &str) -> Option<&MetricRow<T>> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn tau_row(&self, method: &str) -> Option<&TauRow<T>> {
        self.tau.iter().find(|r| r.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidParameter(format!("report serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("report parse: {e}")))
    }
}

fn metric_row<T: Scalar>(
    name: &str,
    scores: &ScoreSet<T>,
    dec: &DecisionSet<T>,
    d: &Dataset,
) -> Result<MetricRow<T>> {
    let y = true_labels(d, &scores.instance_ids)?;
    Ok(MetricRow {
        method: name.to_string(),
        decision: dec.context.describe(),
        auc: auc(&scores.scores, &y)?,
        auc_protected: group_auc(scores, d, Group::Protected)?,
        auc_privileged: group_auc(scores, d, Group::Privileged)?,
        acc: accuracy(dec, d)?,
        spd: spd(dec, d)?,
        eod: eod(dec, d)?,
        pdr: dec.realized_pdr,
    })
}

fn tau_row<T: Scalar>(
    name: &str,
    baseline: &ScoreSet<T>,
    scores: &ScoreSet<T>,
    d: &Dataset,
    variant: TauVariant,
) -> Result<TauRow<T>> {
    scores.check_aligned(&baseline.instance_ids)?;
    let per_group = |g| -> Result<T> {
        kendall_tau(&baseline.group_scores(d, g)?, &scores.group_scores(d, g)?, variant)
    };
    Ok(TauRow {
        method: name.to_string(),
        tau_overall: kendall_tau(&baseline.scores, &scores.scores, variant)?,
        tau_protected: per_group(Group::Protected)?,
        tau_privileged: per_group(Group::Privileged)?,
    })
}

/// Assemble every metric, tau and quadrant row from raw inputs. The baseline
/// is always the first row.
pub fn build_report<T: Scalar>(
    d: &Dataset,
    baseline: &ScoreSet<T>,
    methods: &[MethodOutput<T>],
    policy: &DecisionPolicy<T>,
    variant: TauVariant,
    mut header: ReportHeader,
) -> Result<AuditReport<T>> {
    let mut names = BTreeSet::from([BASELINE]);
    for m in methods {
        if !names.insert(&m.name) {
            return Err(Error::InvalidParameter(format!("method name `{}` is not unique", m.name)));
        }
    }
    let base_dec = decide(baseline, d, policy).map_err(|e| e.in_method(BASELINE))?;
    let mut rows = vec![metric_row(BASELINE, baseline, &base_dec, d).map_err(|e| e.in_method(BASELINE))?];
    let mut tau = vec![tau_row(BASELINE, baseline, baseline, d, variant).map_err(|e| e.in_method(BASELINE))?];
    let mut quadrants = Vec::new();

    for m in methods {
        let mut run = || -> Result<()> {
            m.scores.check_aligned(&baseline.instance_ids)?;
            let dec = match &m.decisions {
                Some(dec) => {
                    if dec.instance_ids != baseline.instance_ids {
                        return Err(Error::MisalignedIds("decisions do not follow the baseline ids".into()));
                    }
                    dec.clone()
                }
                None => decide(&m.scores, d, policy)?,
            };
            rows.push(metric_row(&m.name, &m.scores, &dec, d)?);
            tau.push(tau_row(&m.name, baseline, &m.scores, d, variant)?);
            quadrants.push(QuadrantRow {
                method: m.name.clone(),
                counts: quadrant_analysis(&base_dec, &dec, d)?,
            });
            Ok(())
        };
        run().map_err(|e| e.in_method(&m.name))?;
    }

    let mut sets: Vec<&ScoreSet<T>> = vec![baseline];
    sets.extend(methods.iter().map(|m| &m.scores));
    let mut tau_matrix = method_correlation_matrix(&sets, variant)?;
    tau_matrix.methods = std::iter::once(BASELINE.to_string())
        .chain(methods.iter().map(|m| m.name.clone()))
        .collect();

    let mut sizes = [0usize; 2];
    for &id in &baseline.instance_ids {
        sizes[d.group(id)?.index()] += 1;
    }
    header.eval_group_sizes = sizes;
    if header.dataset.is_empty() {
        header.dataset = d.name().to_string();
    }

    Ok(AuditReport {
        header,
        policy: policy.clone(),
        policy_label: policy.describe(),
        tie_rule: TIE_RULE.to_string(),
        tau_variant: variant,
        rows,
        tau,
        tau_matrix,
        quadrants,
        scatter_dumps: Vec::new(),
    })
}
