//! Reject option classification: inside a band around 0.5 the protected
//! group gets the favorable label and the privileged group does not.

use serde::{Deserialize, Serialize};

use crate::audit::spd;
use crate::dataset::{Dataset, Group, InstanceId};
use crate::decide::{partition_by_group, require_both_groups, DecisionContext, DecisionSet};
use crate::error::{Error, Result};
use crate::mitigate::{fmt17, parse_artifact};
use crate::scalar::Scalar;
use crate::scores::ScoreSet;

/// Band half-widths scanned: `k / 100` for `k = 0..=THETA_STEPS`.
pub const THETA_STEPS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRegion<T> {
    pub theta: T,
}

impl<T: Scalar> CriticalRegion<T> {
    pub fn new(theta: T) -> Result<Self> {
        if !(theta >= T::zero() && theta <= T::of(0.5)) {
            return Err(Error::InvalidParameter(format!("band half-width {theta} is outside [0, 0.5]")));
        }
        Ok(CriticalRegion { theta })
    }

    /// `|s - 0.5| <= theta`, with a few ulps of slack for decimal grid values.
    pub fn contains(&self, s: T) -> bool {
        (s - T::of(0.5)).abs() <= self.theta + T::slack()
    }

    pub fn label(&self, s: T, g: Group) -> u8 {
        if self.contains(s) {
            u8::from(g == Group::Protected)
        } else {
            u8::from(s > T::of(0.5))
        }
    }

    pub fn to_text(&self) -> String {
        format!("theta = {}\n", fmt17(self.theta.as_f64()))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let region: CriticalRegion<T> = parse_artifact(text, "critical region")?;
        CriticalRegion::new(region.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectOptionFit<T> {
    pub region: CriticalRegion<T>,
    /// SPD on the fitting ids at the chosen band.
    pub spd: T,
    pub met_bound: bool,
    /// The chosen band changes no label relative to plain thresholding at 0.5.
    pub unchanged: bool,
}

fn labels_for<T: Scalar>(region: &CriticalRegion<T>, scores: &ScoreSet<T>, d: &Dataset) -> Result<Vec<u8>> {
    scores
        .instance_ids
        .iter()
        .zip(&scores.scores)
        .map(|(&id, &s)| Ok(region.label(s, d.group(id)?)))
        .collect()
}

/// Apply a frozen band to any set of instances.
pub fn apply_reject_option<T: Scalar>(
    region: &CriticalRegion<T>,
    scores: &ScoreSet<T>,
    d: &Dataset,
    method: &str,
) -> Result<DecisionSet<T>> {
    let labels = labels_for(region, scores, d)?;
    DecisionSet::new(
        scores.instance_ids.clone(),
        labels,
        DecisionContext::RejectOption { region: *region },
        method,
    )
}

/// Scan the band grid on `ids` and keep the narrowest band with
/// `|SPD| <= eps`, else the first band minimizing `|SPD|`.
pub fn reject_option_classify<T: Scalar>(
    scores: &ScoreSet<T>,
    d: &Dataset,
    ids: &[InstanceId],
    eps: T,
) -> Result<(RejectOptionFit<T>, DecisionSet<T>)> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("SPD bound {eps} must be positive")));
    }
    let fit = scores.restrict(ids)?;
    require_both_groups(&partition_by_group(d, &fit.instance_ids)?)?;
    let plain: Vec<u8> = fit.scores.iter().map(|&s| u8::from(s > T::of(0.5))).collect();

    let mut best: Option<(CriticalRegion<T>, T, DecisionSet<T>)> = None;
    for k in 0..=THETA_STEPS {
        let region = CriticalRegion {
            theta: T::count(k) / T::count(100),
        };
        let dec = apply_reject_option(&region, &fit, d, &fit.method)?;
        let gap = spd(&dec, d)?;
        if gap.abs() <= eps {
            best = Some((region, gap, dec));
            break;
        }
        if best.as_ref().is_none_or(|b| gap.abs() < b.1.abs()) {
            best = Some((region, gap, dec));
        }
    }
    let (region, gap, dec) = best.expect("grid is nonempty");
    let outcome = RejectOptionFit {
        region,
        spd: gap,
        met_bound: gap.abs() <= eps,
        unchanged: dec.labels == plain,
    };
    Ok((outcome, dec))
}
