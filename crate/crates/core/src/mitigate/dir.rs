//! Disparate impact removal by within-group quantile repair.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureColumn, FeatureKind, Group};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RepairedDataset {
    pub dataset: Dataset,
    pub repair_level: f64,
    pub repaired_columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RepairSummary {
    repair_level: f64,
    repaired_columns: Vec<String>,
}

impl RepairedDataset {
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&RepairSummary {
            repair_level: self.repair_level,
            repaired_columns: self.repaired_columns.clone(),
        })
        .expect("plain struct serializes")
    }
}

/// Linear interpolation into ascending `sorted` at quantile `u`.
pub fn quantile_at<T: Scalar>(sorted: &[T], u: T) -> T {
    let last = sorted.len() - 1;
    if last == 0 {
        return sorted[0];
    }
    let pos = u * T::count(last as u64);
    let lo = pos.floor().to_usize().unwrap_or(0).min(last);
    if lo == last {
        return sorted[last];
    }
    let frac = pos - T::count(lo as u64);
    if frac == T::zero() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Within-group quantile of each member: mid-rank over `n_g - 1`, with tied
/// values sharing one quantile. Returns `(positions, ascending values, quantiles)`.
fn group_quantiles<T: Scalar>(values: &[T], members: &[usize]) -> (Vec<T>, Vec<T>) {
    let mut order = members.to_vec();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let sorted: Vec<T> = order.iter().map(|&i| values[i]).collect();
    let n = sorted.len();
    let mut u = vec![T::zero(); values.len()];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let q = if n == 1 {
            T::of(0.5)
        } else {
            // mid-rank (i + j - 1) / 2 divided by n - 1
            T::count((i + j - 1) as u64) / T::count(2 * (n as u64 - 1))
        };
        for &k in &order[i..j] {
            u[k] = q;
        }
        i = j;
    }
    (sorted, u)
}

/// Move each value towards the per-quantile median of the group quantile
/// functions: `(1 - lambda) x + lambda * median_g Q_g(u)`.
pub fn repair_values<T: Scalar>(values: &[T], groups: &[Group], lambda: T) -> Result<Vec<T>> {
    if values.len() != groups.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: groups.len(),
        });
    }
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::InvalidParameter(format!("repair level {lambda} is outside [0, 1]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotANumber("repaired column"));
    }
    if lambda == T::zero() {
        return Ok(values.to_vec());
    }
    let mut members = [Vec::new(), Vec::new()];
    for (i, g) in groups.iter().enumerate() {
        members[g.index()].push(i);
    }
    let present: Vec<usize> = (0..2).filter(|&g| !members[g].is_empty()).collect();
    let fitted: Vec<(Vec<T>, Vec<T>)> = present
        .iter()
        .map(|&g| group_quantiles(values, &members[g]))
        .collect();

    let mut out = values.to_vec();
    for (slot, &g) in present.iter().enumerate() {
        let u = &fitted[slot].1;
        for &i in &members[g] {
            let q: Vec<T> = fitted.iter().map(|(sorted, _)| quantile_at(sorted, u[i])).collect();
            // median of one or two group quantiles
            let target = if q.len() == 1 { q[0] } else { (q[0] + q[1]) / T::of(2.0) };
            out[i] = (T::one() - lambda) * values[i] + lambda * target;
        }
    }
    Ok(out)
}

/// Repair the listed numeric columns (all numeric features when empty).
pub fn disparate_impact_remove(d: &Dataset, lambda: f64, columns: &[String]) -> Result<RepairedDataset> {
    let names: Vec<String> = if columns.is_empty() {
        d.spec()
            .features
            .iter()
            .filter(|f| f.kind == FeatureKind::Numeric)
            .map(|f| f.name.clone())
            .collect()
    } else {
        columns.to_vec()
    };
    let mut out = d.clone();
    for name in &names {
        let values = match d.column(name) {
            Some(FeatureColumn::Numeric { values, .. }) => values,
            Some(FeatureColumn::Categorical { .. }) => return Err(Error::NonNumericColumn(name.clone())),
            None => return Err(Error::MissingColumn(name.clone())),
        };
        let repaired = repair_values(values, d.groups(), lambda)?;
        out = out.with_numeric_column(name, repaired)?;
    }
    Ok(RepairedDataset {
        dataset: out,
        repair_level: lambda,
        repaired_columns: names,
    })
}
