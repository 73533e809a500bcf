//! Per-group thresholds that equalize selection rates.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Group, InstanceId};
use crate::decide::{
    apply_group_thresholds, group_quota, partition_by_group, require_both_groups, DecisionPolicy, DecisionSet,
};
use crate::error::{Error, Result};
use crate::mitigate::{fmt17, parse_artifact};
use crate::scalar::{ratio, Scalar};
use crate::scores::ScoreSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FairnessTarget {
    /// Rate taken from the baseline positive rate at 0.5.
    DemographicParity,
    SelectionRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupThresholds<T> {
    pub t_protected: T,
    pub t_privileged: T,
    pub target: FairnessTarget,
    /// Selection rate every group is held to.
    pub rate: T,
}

impl<T: Scalar> GroupThresholds<T> {
    pub fn threshold(&self, g: Group) -> T {
        match g {
            Group::Protected => self.t_protected,
            Group::Privileged => self.t_privileged,
        }
    }

    pub fn to_text(&self) -> String {
        let target = match self.target {
            FairnessTarget::DemographicParity => "demographic-parity",
            FairnessTarget::SelectionRate => "selection-rate",
        };
        format!(
            "t_protected = {}\nt_privileged = {}\ntarget = \"{target}\"\nrate = {}\n",
            fmt17(self.t_protected.as_f64()),
            fmt17(self.t_privileged.as_f64()),
            fmt17(self.rate.as_f64()),
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        parse_artifact(text, "group thresholds")
    }
}

/// Fit one threshold per group on `ids` so that each group selects its
/// rounded share `r * n_g`. `rate = None` uses the baseline positive rate
/// at 0.5 on the same ids.
pub fn fit_threshold_optimizer<T: Scalar>(
    scores: &ScoreSet<T>,
    d: &Dataset,
    ids: &[InstanceId],
    rate: Option<T>,
) -> Result<GroupThresholds<T>> {
    let fit = scores.restrict(ids)?;
    let members = partition_by_group(d, &fit.instance_ids)?;
    require_both_groups(&members)?;
    let (target, r) = match rate {
        Some(r) => (FairnessTarget::SelectionRate, r),
        None => {
            let half = T::of(0.5);
            let positives = fit.scores.iter().filter(|&&s| s > half).count() as u64;
            (FairnessTarget::DemographicParity, ratio(positives, fit.len() as u64))
        }
    };
    if !(r >= T::zero() && r <= T::one()) {
        return Err(Error::RateOutOfRange(r.as_f64()));
    }
    let mut t = [T::one(); 2];
    for g in Group::BOTH {
        let mut s: Vec<T> = members[g.index()].iter().map(|&i| fit.scores[i]).collect();
        s.sort_by(|a, b| b.partial_cmp(a).expect("scores are finite"));
        let k = group_quota(r, s.len());
        if k > 0 {
            t[g.index()] = s[k - 1];
        }
    }
    Ok(GroupThresholds {
        t_protected: t[0],
        t_privileged: t[1],
        target,
        rate: r,
    })
}

/// Decisions for every instance in `scores` under fitted thresholds.
pub fn apply_thresholds<T: Scalar>(
    thresholds: &GroupThresholds<T>,
    scores: &ScoreSet<T>,
    d: &Dataset,
    method: &str,
) -> Result<DecisionSet<T>> {
    let members = partition_by_group(d, &scores.instance_ids)?;
    let mut labels = vec![0u8; scores.len()];
    apply_group_thresholds(thresholds, &scores.scores, &scores.instance_ids, &members, &mut labels);
    DecisionSet::new(
        scores.instance_ids.clone(),
        labels,
        DecisionPolicy::PerGroupThresholds {
            thresholds: thresholds.clone(),
        }
        .into(),
        method,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::spd;
    use crate::decide::equalize_rates;
    use crate::synthetic::toy_dataset;
    use proptest::prelude::*;

    const P: Group = Group::Protected;
    const Q: Group = Group::Privileged;

    fn worked() -> (Dataset, ScoreSet<f64>) {
        let d = toy_dataset(&[(P, 0), (P, 0), (P, 1), (Q, 1), (Q, 0), (Q, 1)]);
        let s = ScoreSet::new("b", (0..6).collect(), vec![0.1, 0.2, 0.9, 0.6, 0.7, 0.8], None).unwrap();
        (d, s)
    }

    #[test]
    fn worked_example_selects_top_of_each_group() {
        let (d, s) = worked();
        let ids: Vec<usize> = (0..6).collect();
        let th = fit_threshold_optimizer(&s, &d, &ids, Some(1.0 / 3.0)).unwrap();
        assert_eq!((th.t_protected, th.t_privileged), (0.9, 0.8));
        let dec = apply_thresholds(&th, &s, &d, "TO").unwrap();
        assert_eq!(dec.labels, vec![0, 0, 1, 0, 0, 1]);
        assert_eq!(spd(&dec, &d).unwrap(), 0.0);
    }

    #[test]
    fn matches_equalize_rates_at_one_half() {
        let (d, s) = worked();
        let ids: Vec<usize> = (0..6).collect();
        let th = fit_threshold_optimizer(&s, &d, &ids, Some(0.5)).unwrap();
        let to = apply_thresholds(&th, &s, &d, "TO").unwrap();
        assert_eq!(to.labels, equalize_rates(&s, &d, 0.5).unwrap().labels);
    }

    #[test]
    fn symmetric_groups_share_a_threshold() {
        let d = toy_dataset(&[(P, 0), (P, 1), (P, 1), (Q, 0), (Q, 1), (Q, 1)]);
        let s = ScoreSet::new("b", (0..6).collect(), vec![0.3, 0.6, 0.8, 0.8, 0.3, 0.6], None).unwrap();
        let th = fit_threshold_optimizer(&s, &d, &(0..6).collect::<Vec<_>>(), Some(0.5)).unwrap();
        assert_eq!(th.t_protected, th.t_privileged);
    }

    #[test]
    fn demographic_parity_defaults_to_baseline_rate() {
        let (d, s) = worked();
        let th = fit_threshold_optimizer(&s, &d, &(0..6).collect::<Vec<_>>(), None).unwrap();
        assert_eq!(th.target, FairnessTarget::DemographicParity);
        assert_eq!(th.rate, 4.0 / 6.0);
    }

    #[test]
    fn errors() {
        let (d, s) = worked();
        assert!(matches!(
            fit_threshold_optimizer(&s, &d, &[0, 1, 2], Some(0.5)),
            Err(Error::EmptyGroup(Group::Privileged))
        ));
        assert!(matches!(
            fit_threshold_optimizer(&s, &d, &(0..6).collect::<Vec<_>>(), Some(1.5)),
            Err(Error::RateOutOfRange(_))
        ));
    }

    #[test]
    fn ties_at_the_boundary_fill_by_id() {
        let d = toy_dataset(&[(P, 0), (P, 0), (P, 1), (P, 1), (Q, 1), (Q, 0)]);
        let s = ScoreSet::new("b", (0..6).collect(), vec![0.5, 0.5, 0.5, 0.9, 0.4, 0.6], None).unwrap();
        let th = fit_threshold_optimizer(&s, &d, &(0..6).collect::<Vec<_>>(), Some(0.5)).unwrap();
        let dec = apply_thresholds(&th, &s, &d, "TO").unwrap();
        assert_eq!(dec.labels, vec![1, 0, 0, 1, 0, 1]);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let th = GroupThresholds {
            t_protected: 0.1f64 + 0.2,
            t_privileged: 1.0 / 3.0,
            target: FairnessTarget::SelectionRate,
            rate: 0.25,
        };
        assert_eq!(GroupThresholds::<f64>::from_text(&th.to_text()).unwrap(), th);
    }

    proptest! {
        #[test]
        fn realized_rates_within_one_over_group_size(
            cells in prop::collection::vec(((0u8..20).prop_map(|v| v as f64 / 19.0), any::<bool>()), 2..80),
            r in 0.0f64..=1.0,
        ) {
            let rows: Vec<(Group, u8)> = cells.iter().map(|c| (if c.1 { P } else { Q }, 0)).collect();
            let d = toy_dataset(&rows);
            let (np, nq) = d.group_sizes();
            prop_assume!(np > 0 && nq > 0);
            let ids: Vec<usize> = (0..rows.len()).collect();
            let s = ScoreSet::new("b", ids.clone(), cells.iter().map(|c| c.0).collect(), None).unwrap();
            let th = fit_threshold_optimizer(&s, &d, &ids, Some(r)).unwrap();
            let dec = apply_thresholds(&th, &s, &d, "TO").unwrap();
            for (g, n) in [(P, np), (Q, nq)] {
                let pos = ids.iter().filter(|&&i| rows[i].0 == g && dec.labels[i] == 1).count();
                prop_assert!((pos as f64 / n as f64 - r).abs() <= 1.0 / n as f64 + 1e-12);
            }
            prop_assert!(spd(&dec, &d).unwrap().abs() <= 1.0 / np.min(nq) as f64 + 1e-12);
            prop_assert_eq!(dec.labels, equalize_rates(&s, &d, r).unwrap().labels);
        }
    }
}
