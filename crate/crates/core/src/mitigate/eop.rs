//! Equalized-odds postprocessing: randomized relabeling whose mixing
//! probabilities come from an exactly solved linear program.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Group, InstanceId};
use crate::decide::{DecisionContext, DecisionSet};
use crate::error::{Error, Result};
use crate::mitigate::lp::{LinearProgram, LpNumber};
use crate::mitigate::{fmt17, parse_artifact};
use crate::scalar::Scalar;

/// Probability of emitting 1 given the group and the base prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingRates {
    pub protected_0: f64,
    pub protected_1: f64,
    pub privileged_0: f64,
    pub privileged_1: f64,
    pub seed: u64,
}

impl MixingRates {
    pub fn identity(seed: u64) -> Self {
        MixingRates {
            protected_0: 0.0,
            protected_1: 1.0,
            privileged_0: 0.0,
            privileged_1: 1.0,
            seed,
        }
    }

    pub fn rate(&self, g: Group, base: u8) -> f64 {
        match (g, base) {
            (Group::Protected, 0) => self.protected_0,
            (Group::Protected, _) => self.protected_1,
            (Group::Privileged, 0) => self.privileged_0,
            (Group::Privileged, _) => self.privileged_1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in [self.protected_0, self.protected_1, self.privileged_0, self.privileged_1] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::RateOutOfRange(p));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "protected_0 = {}\nprotected_1 = {}\nprivileged_0 = {}\nprivileged_1 = {}\nseed = {}\n",
            fmt17(self.protected_0),
            fmt17(self.protected_1),
            fmt17(self.privileged_0),
            fmt17(self.privileged_1),
            self.seed
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rates: MixingRates = parse_artifact(text, "mixing rates")?;
        rates.validate()?;
        Ok(rates)
    }

    /// The uniform draw for one instance: keyed by seed and instance id only.
    pub fn draw(&self, id: InstanceId) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id as u64);
        rng.gen::<f64>()
    }
}

/// Base-prediction confusion counts for one group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub positives: u64,
    pub negatives: u64,
    pub true_positives: u64,
    pub false_positives: u64,
}

impl ConfusionCounts {
    pub fn tpr(&self) -> f64 {
        self.true_positives as f64 / self.positives as f64
    }

    pub fn fpr(&self) -> f64 {
        self.false_positives as f64 / self.negatives as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    /// protected, privileged
    pub tpr: [f64; 2],
    pub fpr: [f64; 2],
}

impl DerivedRates {
    pub fn tpr_gap(&self) -> f64 {
        (self.tpr[0] - self.tpr[1]).abs()
    }

    pub fn fpr_gap(&self) -> f64 {
        (self.fpr[0] - self.fpr[1]).abs()
    }
}

/// Expected TPR/FPR per group after mixing.
pub fn derived_rates(rates: &MixingRates, counts: &[ConfusionCounts; 2]) -> DerivedRates {
    let mut out = DerivedRates {
        tpr: [0.0; 2],
        fpr: [0.0; 2],
    };
    for g in Group::BOTH {
        let c = &counts[g.index()];
        let (p0, p1) = (rates.rate(g, 0), rates.rate(g, 1));
        out.tpr[g.index()] = p1 * c.tpr() + p0 * (1.0 - c.tpr());
        out.fpr[g.index()] = p1 * c.fpr() + p0 * (1.0 - c.fpr());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EopFit {
    pub rates: MixingRates,
    pub counts: [ConfusionCounts; 2],
    pub derived: DerivedRates,
    /// Expected number of errors on the fitting ids.
    pub expected_errors: f64,
    pub vertices_checked: usize,
}

fn confusion<T: Scalar>(pred: &DecisionSet<T>, d: &Dataset, ids: &[InstanceId]) -> Result<[ConfusionCounts; 2]> {
    let index: std::collections::HashMap<InstanceId, u8> =
        pred.instance_ids.iter().copied().zip(pred.labels.iter().copied()).collect();
    let mut counts = [ConfusionCounts::default(); 2];
    for &id in ids {
        let yhat = *index.get(&id).ok_or(Error::UnknownId(id))?;
        let c = &mut counts[d.group(id)?.index()];
        if d.label(id)? == 1 {
            c.positives += 1;
            c.true_positives += u64::from(yhat);
        } else {
            c.negatives += 1;
            c.false_positives += u64::from(yhat);
        }
    }
    for g in Group::BOTH {
        let c = &counts[g.index()];
        if c.positives == 0 {
            return Err(Error::DegenerateGroup { group: g, missing: "positive" });
        }
        if c.negatives == 0 {
            return Err(Error::DegenerateGroup { group: g, missing: "negative" });
        }
    }
    Ok(counts)
}

/// Program over `[protected_0, protected_1, privileged_0, privileged_1]`.
/// Rates are kept as integer ratios so the exact backend stays exact.
fn mixing_program<N: LpNumber>(counts: &[ConfusionCounts; 2]) -> LinearProgram<N> {
    let num = |v: u64| N::from_i64(v as i64);
    let mut objective = Vec::with_capacity(4);
    let mut tpr_row = Vec::with_capacity(4);
    let mut fpr_row = Vec::with_capacity(4);
    for (g, sign) in [(0usize, N::one()), (1, -N::one())] {
        let c = &counts[g];
        let tpr = num(c.true_positives) / num(c.positives);
        let fpr = num(c.false_positives) / num(c.negatives);
        // errors: positives mapped to 0 plus negatives mapped to 1
        objective.push(num(c.negatives - c.false_positives) - num(c.positives - c.true_positives));
        objective.push(num(c.false_positives) - num(c.true_positives));
        tpr_row.push(sign.clone() * (N::one() - tpr.clone()));
        tpr_row.push(sign.clone() * tpr);
        fpr_row.push(sign.clone() * (N::one() - fpr.clone()));
        fpr_row.push(sign * fpr);
    }
    LinearProgram {
        objective,
        equalities: vec![(tpr_row, N::zero()), (fpr_row, N::zero())],
    }
}

/// Fit mixing rates on `ids` that equalize expected TPR and FPR across groups
/// at the lowest expected error.
pub fn fit_equalized_odds_post<T: Scalar>(
    pred: &DecisionSet<T>,
    d: &Dataset,
    ids: &[InstanceId],
    seed: u64,
) -> Result<EopFit> {
    let counts = confusion(pred, d, ids)?;
    let lp = mixing_program::<BigRational>(&counts);
    let solution = lp.solve().expect("constant mixing is always feasible");
    let x: Vec<f64> = solution.x.iter().map(LpNumber::to_f64).collect();
    let rates = MixingRates {
        protected_0: x[0],
        protected_1: x[1],
        privileged_0: x[2],
        privileged_1: x[3],
        seed,
    };
    let positives: u64 = counts.iter().map(|c| c.positives).sum();
    let expected_errors = LpNumber::to_f64(&(solution.objective + BigRational::from_i64(positives as i64)));
    let zero_check = BigRational::zero();
    debug_assert!(solution.x.iter().all(|v| *v >= zero_check && *v <= BigRational::one()));
    Ok(EopFit {
        rates,
        counts,
        derived: derived_rates(&rates, &counts),
        expected_errors,
        vertices_checked: solution.vertices_checked,
    })
}

/// Relabel `pred` on `ids`: output 1 with probability `rate(group, base label)`.
pub fn apply_mixing<T: Scalar>(
    rates: &MixingRates,
    pred: &DecisionSet<T>,
    d: &Dataset,
    ids: &[InstanceId],
    method: &str,
) -> Result<DecisionSet<T>> {
    rates.validate()?;
    let index: std::collections::HashMap<InstanceId, u8> =
        pred.instance_ids.iter().copied().zip(pred.labels.iter().copied()).collect();
    let mut labels = Vec::with_capacity(ids.len());
    for &id in ids {
        let base = *index.get(&id).ok_or(Error::UnknownId(id))?;
        let p = rates.rate(d.group(id)?, base);
        labels.push(u8::from(rates.draw(id) < p));
    }
    DecisionSet::new(
        ids.to_vec(),
        labels,
        DecisionContext::EqualizedOddsMixing { rates: *rates },
        method,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decide::DecisionPolicy;
    use crate::synthetic::toy_dataset;

    const P: Group = Group::Protected;
    const Q: Group = Group::Privileged;

    fn preds(labels: Vec<u8>) -> DecisionSet<f64> {
        let n = labels.len();
        DecisionSet::new((0..n).collect(), labels, DecisionPolicy::FixedThreshold { t: 0.5 }.into(), "b").unwrap()
    }

    /// Two positives and two negatives per group; protected is perfect,
    /// privileged finds one of its two positives.
    fn balanced() -> (Dataset, DecisionSet<f64>) {
        let d = toy_dataset(&[(P, 1), (P, 1), (P, 0), (P, 0), (Q, 1), (Q, 1), (Q, 0), (Q, 0)]);
        (d, preds(vec![1, 1, 0, 0, 1, 0, 0, 0]))
    }

    /// Minimum expected errors over a 1e-3 grid of the privileged rates, with
    /// the protected rates solved from the two equalities.
    fn grid_oracle(counts: &[ConfusionCounts; 2]) -> (f64, [f64; 4]) {
        let (a, b) = (&counts[0], &counts[1]);
        let mut best = (f64::INFINITY, [0.0; 4]);
        for i in 0..=1000 {
            for j in 0..=1000 {
                let (q1, q0) = (i as f64 / 1000.0, j as f64 / 1000.0);
                let t = q1 * b.tpr() + q0 * (1.0 - b.tpr());
                let f = q1 * b.fpr() + q0 * (1.0 - b.fpr());
                // solve p1 * tpr_a + p0 (1 - tpr_a) = t and the fpr analogue
                let det = a.tpr() * (1.0 - a.fpr()) - a.fpr() * (1.0 - a.tpr());
                let p1 = (t * (1.0 - a.fpr()) - f * (1.0 - a.tpr())) / det;
                let p0 = (a.tpr() * f - a.fpr() * t) / det;
                if !(-1e-12..=1.0 + 1e-12).contains(&p1) || !(-1e-12..=1.0 + 1e-12).contains(&p0) {
                    continue;
                }
                let errors = a.positives as f64 * (1.0 - t)
                    + a.negatives as f64 * f
                    + b.positives as f64 * (1.0 - t)
                    + b.negatives as f64 * f;
                if errors < best.0 - 1e-12 {
                    best = (errors, [p0, p1, q0, q1]);
                }
            }
        }
        best
    }

    #[test]
    fn balanced_fixture_solves_exactly() {
        let (d, pred) = balanced();
        let fit = fit_equalized_odds_post(&pred, &d, &(0..8).collect::<Vec<_>>(), 7).unwrap();
        let r = fit.rates;
        assert_eq!([r.protected_0, r.protected_1, r.privileged_0, r.privileged_1], [0.0, 0.5, 0.0, 1.0]);
        assert_eq!(fit.derived.tpr, [0.5, 0.5]);
        assert_eq!(fit.derived.fpr, [0.0, 0.0]);
        assert_eq!(fit.expected_errors, 2.0);
        let (oracle_errors, oracle_x) = grid_oracle(&fit.counts);
        assert!((oracle_errors - fit.expected_errors).abs() < 1e-9);
        assert_eq!(oracle_x, [0.0, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn fair_predictor_keeps_identity_rates() {
        let d = toy_dataset(&[(P, 1), (P, 0), (Q, 1), (Q, 0)]);
        let fit = fit_equalized_odds_post(&preds(vec![1, 0, 1, 0]), &d, &[0, 1, 2, 3], 1).unwrap();
        assert_eq!(fit.rates, MixingRates::identity(1));
        assert_eq!(fit.expected_errors, 0.0);
    }

    #[test]
    fn randomized_fixtures_agree_with_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for g in [P, Q] {
                for y in [0u8, 1] {
                    for _ in 0..rng.gen_range(2..6) {
                        rows.push((g, y));
                        labels.push(u8::from(rng.gen::<f64>() < if y == 1 { 0.7 } else { 0.3 }));
                    }
                }
            }
            let d = toy_dataset(&rows);
            let ids: Vec<usize> = (0..rows.len()).collect();
            let Ok(fit) = fit_equalized_odds_post(&preds(labels), &d, &ids, 3) else { continue };
            let c = &fit.counts[0];
            // the oracle inverts the protected system; skip singular cases
            if c.true_positives * c.negatives == c.false_positives * c.positives {
                continue;
            }
            let (oracle, _) = grid_oracle(&fit.counts);
            assert!(fit.expected_errors <= oracle + 1e-9, "{} > {}", fit.expected_errors, oracle);
            assert!(oracle - fit.expected_errors <= 0.05, "grid oracle too far from vertex optimum");
            assert!(fit.derived.tpr_gap() <= 1e-9 && fit.derived.fpr_gap() <= 1e-9);
        }
    }

    #[test]
    fn f64_backend_agrees_with_exact_backend() {
        let (d, pred) = balanced();
        let counts = confusion(&pred, &d, &(0..8).collect::<Vec<_>>()).unwrap();
        let exact = mixing_program::<BigRational>(&counts).solve().unwrap();
        let float = mixing_program::<f64>(&counts).solve().unwrap();
        let exact_x: Vec<f64> = exact.x.iter().map(LpNumber::to_f64).collect();
        assert_eq!(exact_x, float.x);
    }

    #[test]
    fn degenerate_group_rejected() {
        let d = toy_dataset(&[(P, 1), (P, 1), (Q, 1), (Q, 0)]);
        assert!(matches!(
            fit_equalized_odds_post(&preds(vec![1, 0, 1, 0]), &d, &[0, 1, 2, 3], 1),
            Err(Error::DegenerateGroup { group: Group::Protected, missing: "negative" })
        ));
    }

    #[test]
    fn mixing_is_seeded_and_keyed_by_id() {
        let (d, pred) = balanced();
        let rates = MixingRates {
            protected_0: 0.3,
            protected_1: 0.6,
            privileged_0: 0.2,
            privileged_1: 0.9,
            seed: 5,
        };
        let ids: Vec<usize> = (0..8).collect();
        let a = apply_mixing(&rates, &pred, &d, &ids, "EOP").unwrap();
        let b = apply_mixing(&rates, &pred, &d, &ids, "EOP").unwrap();
        assert_eq!(a.labels, b.labels);
        let tail = apply_mixing(&rates, &pred, &d, &[5, 6, 7], "EOP").unwrap();
        assert_eq!(tail.labels, a.labels[5..].to_vec());
        assert_eq!(MixingRates::from_text(&rates.to_text()).unwrap(), rates);
        let identity = apply_mixing(&MixingRates::identity(9), &pred, &d, &ids, "EOP").unwrap();
        assert_eq!(identity.labels, pred.labels);
    }
}
