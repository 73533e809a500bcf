//! Decision layer: turns scores into labels under an explicit policy.
//!
//! Every top-rate selection ranks by score (descending) and breaks ties by
//! ascending instance id, so identical inputs always give identical labels.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Group, InstanceId};
use crate::error::{Error, Result};
use crate::mitigate::{CriticalRegion, GroupThresholds, MixingRates};
use crate::scalar::{ratio, Scalar};
use crate::scores::ScoreSet;

pub const TIE_RULE: &str = "ascending-instance-id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecisionPolicy<T> {
    /// label = score > t
    FixedThreshold { t: T },
    /// exactly floor(r * n) positives, highest scores first
    GlobalTopRate { r: T },
    PerGroupThresholds { thresholds: GroupThresholds<T> },
    /// round(r_g * n_g) positives inside each group
    PerGroupRates { protected: T, privileged: T },
}

impl<T: Scalar> DecisionPolicy<T> {
    pub fn validate(&self) -> Result<()> {
        let check = |v: T| {
            if v >= T::zero() && v <= T::one() {
                Ok(())
            } else {
                Err(Error::RateOutOfRange(v.as_f64()))
            }
        };
        match self {
            DecisionPolicy::FixedThreshold { t } => check(*t),
            DecisionPolicy::GlobalTopRate { r } => check(*r),
            DecisionPolicy::PerGroupThresholds { thresholds } => {
                check(thresholds.t_protected)?;
                check(thresholds.t_privileged)?;
                check(thresholds.rate)
            }
            DecisionPolicy::PerGroupRates {
                protected,
                privileged,
            } => {
                check(*protected)?;
                check(*privileged)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DecisionPolicy::FixedThreshold { t } => format!("fixed-threshold:{t}"),
            DecisionPolicy::GlobalTopRate { r } => format!("global-top-rate:{r}"),
            DecisionPolicy::PerGroupThresholds { thresholds } => format!(
                "per-group-thresholds:{}/{}",
                thresholds.t_protected, thresholds.t_privileged
            ),
            DecisionPolicy::PerGroupRates {
                protected,
                privileged,
            } => format!("per-group-rates:{protected}/{privileged}"),
        }
    }
}

/// Everything that can have produced a [`DecisionSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "context", rename_all = "kebab-case")]
pub enum DecisionContext<T> {
    Policy { policy: DecisionPolicy<T> },
    RejectOption { region: CriticalRegion<T> },
    EqualizedOddsMixing { rates: MixingRates },
}

impl<T: Scalar> DecisionContext<T> {
    pub fn describe(&self) -> String {
        match self {
            DecisionContext::Policy { policy } => policy.describe(),
            DecisionContext::RejectOption { region } => format!("reject-option:theta={}", region.theta),
            DecisionContext::EqualizedOddsMixing { rates } => format!("eo-mixing:seed={}", rates.seed),
        }
    }
}

impl<T> From<DecisionPolicy<T>> for DecisionContext<T> {
    fn from(policy: DecisionPolicy<T>) -> Self {
        DecisionContext::Policy { policy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet<T> {
    pub instance_ids: Vec<InstanceId>,
    pub labels: Vec<u8>,
    pub context: DecisionContext<T>,
    pub tie_rule: String,
    pub source_method: String,
    pub realized_pdr: T,
}

/// Mean of 0/1 labels.
pub fn positive_rate<T: Scalar>(labels: &[u8]) -> T {
    let positives = labels.iter().filter(|&&y| y == 1).count() as u64;
    ratio(positives, labels.len() as u64)
}

impl<T: Scalar> DecisionSet<T> {
    pub fn new(
        instance_ids: Vec<InstanceId>,
        labels: Vec<u8>,
        context: DecisionContext<T>,
        source_method: impl Into<String>,
    ) -> Result<Self> {
        if instance_ids.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: instance_ids.len(),
                right: labels.len(),
            });
        }
        if instance_ids.is_empty() {
            return Err(Error::InvalidParameter("a decision set needs at least one instance".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidParameter(format!("label {bad} is not 0/1")));
        }
        let realized_pdr = positive_rate(&labels);
        Ok(DecisionSet {
            instance_ids,
            labels,
            context,
            tie_rule: TIE_RULE.to_string(),
            source_method: source_method.into(),
            realized_pdr,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `instance_id,group,score,label,method,policy`.
    pub fn write_csv<W: Write>(&self, scores: &ScoreSet<T>, d: &Dataset, writer: W) -> Result<()> {
        scores.check_aligned(&self.instance_ids)?;
        let policy = self.context.describe();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["instance_id", "group", "score", "label", "method", "policy"])?;
        for ((id, label), score) in self.instance_ids.iter().zip(&self.labels).zip(&scores.scores) {
            w.write_record([
                id.to_string(),
                d.group(*id)?.to_string(),
                score.to_string(),
                label.to_string(),
                self.source_method.clone(),
                policy.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Number selected inside a group of `n` at rate `r`: nearest integer, halves up.
pub fn group_quota<T: Scalar>(r: T, n: usize) -> usize {
    let k = (r.as_f64() * n as f64 + 0.5).floor();
    (k.max(0.0) as usize).min(n)
}

fn global_quota<T: Scalar>(r: T, n: usize) -> usize {
    let k = (r.as_f64() * n as f64 + 1e-9).floor();
    (k.max(0.0) as usize).min(n)
}

/// Mark the `k` highest-scoring positions among `members` (indices into
/// `scores`/`ids`), ties broken by ascending id.
pub(crate) fn select_top<T: Scalar>(
    scores: &[T],
    ids: &[InstanceId],
    members: &[usize],
    k: usize,
    labels: &mut [u8],
) {
    let mut order = members.to_vec();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ids[a].cmp(&ids[b]))
    });
    for &i in order.iter().take(k) {
        labels[i] = 1;
    }
}

/// Positions of `ids` split by group: (protected, privileged).
pub(crate) fn partition_by_group(d: &Dataset, ids: &[InstanceId]) -> Result<[Vec<usize>; 2]> {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &id) in ids.iter().enumerate() {
        out[d.group(id)?.index()].push(i);
    }
    Ok(out)
}

pub(crate) fn require_both_groups(members: &[Vec<usize>; 2]) -> Result<()> {
    for g in Group::BOTH {
        if members[g.index()].is_empty() {
            return Err(Error::EmptyGroup(g));
        }
    }
    Ok(())
}

/// Apply group thresholds: everything strictly above `t_g`, then boundary
/// ties (`score == t_g`) by ascending id until the group reaches its quota.
pub(crate) fn apply_group_thresholds<T: Scalar>(
    thresholds: &GroupThresholds<T>,
    scores: &[T],
    ids: &[InstanceId],
    members: &[Vec<usize>; 2],
    labels: &mut [u8],
) {
    for g in Group::BOTH {
        let t = thresholds.threshold(g);
        let group = &members[g.index()];
        let quota = group_quota(thresholds.rate, group.len());
        let mut count = 0;
        let mut boundary = Vec::new();
        for &i in group {
            if scores[i] > t {
                labels[i] = 1;
                count += 1;
            } else if scores[i] == t {
                boundary.push(i);
            }
        }
        boundary.sort_by_key(|&i| ids[i]);
        for i in boundary {
            if count >= quota {
                break;
            }
            labels[i] = 1;
            count += 1;
        }
    }
}

pub fn decide<T: Scalar>(scores: &ScoreSet<T>, d: &Dataset, policy: &DecisionPolicy<T>) -> Result<DecisionSet<T>> {
    policy.validate()?;
    let n = scores.len();
    if n == 0 {
        return Err(Error::MisalignedIds("empty score set".into()));
    }
    if let Some(&bad) = scores.instance_ids.iter().find(|&&id| id >= d.len()) {
        return Err(Error::MisalignedIds(format!("instance {bad} is not in `{}`", d.name())));
    }
    let ids = &scores.instance_ids;
    let s = &scores.scores;
    let mut labels = vec![0u8; n];
    match policy {
        DecisionPolicy::FixedThreshold { t } => {
            for (l, v) in labels.iter_mut().zip(s) {
                *l = u8::from(*v > *t);
            }
        }
        DecisionPolicy::GlobalTopRate { r } => {
            let all: Vec<usize> = (0..n).collect();
            select_top(s, ids, &all, global_quota(*r, n), &mut labels);
        }
        DecisionPolicy::PerGroupThresholds { thresholds } => {
            let members = partition_by_group(d, ids)?;
            apply_group_thresholds(thresholds, s, ids, &members, &mut labels);
        }
        DecisionPolicy::PerGroupRates {
            protected,
            privileged,
        } => {
            let members = partition_by_group(d, ids)?;
            for (g, r) in [(Group::Protected, *protected), (Group::Privileged, *privileged)] {
                let group = &members[g.index()];
                select_top(s, ids, group, group_quota(r, group.len()), &mut labels);
            }
        }
    }
    DecisionSet::new(ids.clone(), labels, policy.clone().into(), scores.method.clone())
}

/// Same selection rate `r` inside both groups.
pub fn equalize_rates<T: Scalar>(scores: &ScoreSet<T>, d: &Dataset, r: T) -> Result<DecisionSet<T>> {
    let members = partition_by_group(d, &scores.instance_ids)?;
    require_both_groups(&members)?;
    decide(
        scores,
        d,
        &DecisionPolicy::PerGroupRates {
            protected: r,
            privileged: r,
        },
    )
}
