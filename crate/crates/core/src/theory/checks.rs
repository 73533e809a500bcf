use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Group};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::scores::ScoreSet;
use crate::theory::{rates, threshold_decision, Basis, Decision, FairWorld, PerGroup, RatePair};

pub const PARETO_TOLERANCE: f64 = 1e-9;
const MAX_WITNESSES: usize = 10;

pub const EMPIRICAL_CAVEAT: &str = "the proxy stands in for fair probabilities and the baseline is assumed to carry no \
                                    epistemic uncertainty; neither assumption can be verified from data";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoResult<T> {
    pub maximal: bool,
    pub rates: RatePair<T>,
    pub dominated_by: Option<Decision>,
    pub dominating_rates: Option<RatePair<T>>,
}

/// Compare `dec` against every ranked prefix of the grid on `basis`.
///
/// Points are ordered by basis value (descending); equal values are ordered
/// protected-first in one sweep and privileged-first in another. Prefixes
/// that cut through a block of equal values are still optimal, which is what
/// lets them catch decisions that treat tied points unevenly.
pub fn pareto_check<T: Scalar>(w: &FairWorld<T>, dec: &Decision, basis: Basis) -> Result<ParetoResult<T>> {
    let own = rates(w, dec, basis)?;
    let tol = T::of(PARETO_TOLERANCE);
    let pts = w.points();
    let pos_total = pts.iter().fold(T::zero(), |a, p| a + p.value(basis) * p.weight);
    let neg_total = pts.iter().fold(T::zero(), |a, p| a + (T::one() - p.value(basis)) * p.weight);

    for protected_first in [true, false] {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (&pts[a], &pts[b]);
            let by_group = if protected_first {
                pa.group.index().cmp(&pb.group.index())
            } else {
                pb.group.index().cmp(&pa.group.index())
            };
            pb.value(basis)
                .partial_cmp(&pa.value(basis))
                .expect("values are finite")
                .then(by_group)
                .then(a.cmp(&b))
        });
        let mut hit = T::zero();
        let mut missed_neg = T::zero();
        for k in 0..=order.len() {
            if k > 0 {
                let p = &pts[order[k - 1]];
                hit = hit + p.value(basis) * p.weight;
                missed_neg = missed_neg + (T::one() - p.value(basis)) * p.weight;
            }
            let cand = RatePair {
                tpr: hit / pos_total,
                tnr: (neg_total - missed_neg) / neg_total,
                basis,
            };
            let weakly = cand.tpr >= own.tpr - tol && cand.tnr >= own.tnr - tol;
            let strictly = cand.tpr > own.tpr + tol || cand.tnr > own.tnr + tol;
            if weakly && strictly {
                let mut labels = vec![0u8; pts.len()];
                for &i in &order[..k] {
                    labels[i] = 1;
                }
                return Ok(ParetoResult {
                    maximal: false,
                    rates: own,
                    dominated_by: Some(Decision { labels }),
                    dominating_rates: Some(cand),
                });
            }
        }
    }
    Ok(ParetoResult {
        maximal: true,
        rates: own,
        dominated_by: None,
        dominating_rates: None,
    })
}

/// A pair inside one group whose fair probability increases while the
/// score decreases. `lower`/`higher` index grid points (or instance ids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness<T> {
    pub group: Group,
    pub lower: usize,
    pub higher: usize,
    pub p_lower: T,
    pub p_higher: T,
    pub s_lower: T,
    pub s_higher: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaaResult<T> {
    pub holds: bool,
    pub violation_count: u64,
    pub witnesses: Vec<Witness<T>>,
    pub grid_size: usize,
    pub tolerance: T,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub caveat: Option<String>,
}

/// (key, fair probability, score)
type Member<T> = (usize, T, T);

/// Count pairs `i, j` with `p_i < p_j` and `s_i - s_j > tol` by merge sort.
fn count_violations<T: Scalar>(group: Group, members: &mut [Member<T>], tol: T, witnesses: &mut Vec<Witness<T>>) -> u64 {
    members.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("finite")
            .then(a.2.partial_cmp(&b.2).expect("finite"))
    });
    let n = members.len();
    let mut buf = members.to_vec();
    let mut total = 0u64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            // left and right runs are each sorted by score
            let (left, right) = (&members[start..mid], &members[mid..end]);
            let mut i = 0;
            for r in right {
                while i < left.len() && left[i].2 - r.2 <= tol {
                    i += 1;
                }
                total += (left.len() - i) as u64;
                for l in &left[i..] {
                    if witnesses.len() >= MAX_WITNESSES {
                        break;
                    }
                    witnesses.push(Witness {
                        group,
                        lower: l.0,
                        higher: r.0,
                        p_lower: l.1,
                        p_higher: r.1,
                        s_lower: l.2,
                        s_higher: r.2,
                    });
                }
            }
            let (mut a, mut b, mut k) = (start, mid, start);
            while a < mid && b < end {
                if members[b].2 < members[a].2 {
                    buf[k] = members[b];
                    b += 1;
                } else {
                    buf[k] = members[a];
                    a += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - a)].copy_from_slice(&members[a..mid]);
            k += mid - a;
            buf[k..k + (end - b)].copy_from_slice(&members[b..end]);
            start = end;
        }
        members.copy_from_slice(&buf);
        width *= 2;
    }
    total
}

fn aaa_from_groups<T: Scalar>(mut groups: [Vec<Member<T>>; 2], tolerance: T, grid_size: usize) -> AaaResult<T> {
    let mut witnesses = Vec::new();
    let mut count = 0;
    for g in Group::BOTH {
        count += count_violations(g, &mut groups[g.index()], tolerance, &mut witnesses);
    }
    AaaResult {
        holds: count == 0,
        violation_count: count,
        witnesses,
        grid_size,
        tolerance,
        caveat: None,
    }
}

/// Within each group, higher fair probability must never mean a lower score.
pub fn aaa_check<T: Scalar>(w: &FairWorld<T>, tolerance: T) -> AaaResult<T> {
    let mut groups = [Vec::new(), Vec::new()];
    for (i, p) in w.points().iter().enumerate() {
        groups[p.group.index()].push((i, p.fair_p, p.score));
    }
    aaa_from_groups(groups, tolerance, w.len())
}

/// The same criterion on two score vectors over real instances; witnesses
/// carry instance ids.
pub fn aaa_check_empirical<T: Scalar>(
    baseline: &ScoreSet<T>,
    proxy_fair: &ScoreSet<T>,
    d: &Dataset,
    tolerance: T,
) -> Result<AaaResult<T>> {
    proxy_fair.check_aligned(&baseline.instance_ids)?;
    let mut groups = [Vec::new(), Vec::new()];
    for ((&id, &s), &p) in baseline.instance_ids.iter().zip(&baseline.scores).zip(&proxy_fair.scores) {
        groups[d.group(id)?.index()].push((id, p, s));
    }
    let mut out = aaa_from_groups(groups, tolerance, baseline.len());
    out.caveat = Some(EMPIRICAL_CAVEAT.to_string());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition<T> {
    pub tau: T,
    pub decomposable: bool,
    pub thresholds: Option<PerGroup<T>>,
    pub failing_group: Option<Group>,
}

/// Try to reproduce the fair threshold decision at `tau` with one strict
/// score threshold per group. The only candidate worth testing is the
/// largest score among the group's fair negatives.
pub fn decomposition_check<T: Scalar>(w: &FairWorld<T>, tau: T) -> Decomposition<T> {
    let fair = threshold_decision(w, Basis::Fair, tau, None);
    let mut t = [T::zero(); 2];
    let mut min_pos = [T::infinity(); 2];
    for (p, &label) in w.points().iter().zip(&fair.labels) {
        let g = p.group.index();
        if label == 1 {
            min_pos[g] = min_pos[g].min(p.score);
        } else {
            t[g] = t[g].max(p.score);
        }
    }
    for g in Group::BOTH {
        if !(t[g.index()] < min_pos[g.index()]) {
            return Decomposition {
                tau,
                decomposable: false,
                thresholds: None,
                failing_group: Some(g),
            };
        }
    }
    let thresholds = PerGroup {
        protected: t[0],
        privileged: t[1],
    };
    debug_assert_eq!(threshold_decision(w, Basis::Unfair, T::zero(), Some(thresholds)), fair);
    Decomposition {
        tau,
        decomposable: true,
        thresholds: Some(thresholds),
        failing_group: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck<T> {
    pub aaa: AaaResult<T>,
    pub taus_checked: usize,
    pub all_decomposable: bool,
    pub failing_tau: Option<T>,
    /// Both sides of the equivalence agree.
    pub consistent: bool,
}

/// Run both sides of the equivalence: the comonotonicity check and the
/// decomposition at every distinct fair probability on the grid.
pub fn theorem_check<T: Scalar>(w: &FairWorld<T>) -> TheoremCheck<T> {
    let aaa = aaa_check(w, T::zero());
    let mut taus: Vec<T> = w.points().iter().map(|p| p.fair_p).collect();
    taus.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    taus.dedup();
    let failing_tau = taus.iter().copied().find(|&tau| !decomposition_check(w, tau).decomposable);
    let all_decomposable = failing_tau.is_none();
    TheoremCheck {
        consistent: aaa.holds == all_decomposable,
        aaa,
        taus_checked: taus.len(),
        all_decomposable,
        failing_tau,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{anti_monotone_world, identity_world, random_world, running_example_world, DEFAULT_GRID};

    #[test]
    fn running_example_holds_and_decomposes() {
        let w = running_example_world::<f64>(DEFAULT_GRID).unwrap();
        assert!(aaa_check(&w, 0.0).holds);
        for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let d = decomposition_check(&w, tau);
            let t = d.thresholds.unwrap();
            assert_eq!((t.privileged, t.protected), (tau, 0.9 * tau));
        }
        let edge = decomposition_check(&w, 0.0);
        assert_eq!(edge.thresholds.unwrap(), PerGroup { protected: 0.0, privileged: 0.0 });
    }

    #[test]
    fn anti_monotone_world_fails_both() {
        let w = anti_monotone_world::<f64>(21).unwrap();
        let r = aaa_check(&w, 0.0);
        assert!(!r.holds);
        assert_eq!(r.violation_count, 21 * 20 / 2);
        assert_eq!(r.witnesses.len(), 10);
        assert!(r.witnesses.iter().all(|x| x.p_lower < x.p_higher && x.s_lower > x.s_higher));
        let d = decomposition_check(&w, 0.5);
        assert!(!d.decomposable);
        assert_eq!(d.failing_group, Some(Group::Protected));
        let t = theorem_check(&w);
        assert!(t.consistent && t.failing_tau.is_some());
    }

    #[test]
    fn identity_world_holds() {
        assert!(aaa_check(&identity_world::<f64>(51).unwrap(), 0.0).holds);
    }

    #[test]
    fn pareto_claims_of_the_example() {
        let w = running_example_world::<f64>(DEFAULT_GRID).unwrap();
        let unfair = threshold_decision(&w, Basis::Unfair, 0.5, None);
        assert!(pareto_check(&w, &unfair, Basis::Unfair).unwrap().maximal);
        let fair_view = pareto_check(&w, &unfair, Basis::Fair).unwrap();
        assert!(!fair_view.maximal);
        let better = fair_view.dominating_rates.unwrap();
        assert!(better.tpr >= fair_view.rates.tpr && better.tnr >= fair_view.rates.tnr);
    }

    #[test]
    fn single_flip_is_dominated() {
        let w = running_example_world::<f64>(101).unwrap();
        let dec = threshold_decision(&w, Basis::Fair, 0.5, None);
        for i in [30, 70, 101 + 20, 101 + 80] {
            assert!(!pareto_check(&w, &dec.flipped(i), Basis::Fair).unwrap().maximal, "flip {i}");
        }
    }

    #[test]
    fn thresholds_are_never_dominated_on_their_basis() {
        for seed in 0..20 {
            let w = random_world::<f64>(seed, 80, seed % 2 == 0).unwrap();
            for basis in [Basis::Fair, Basis::Unfair] {
                for k in 0..20 {
                    let dec = threshold_decision(&w, basis, k as f64 / 20.0, None);
                    assert!(pareto_check(&w, &dec, basis).unwrap().maximal, "seed {seed} k {k}");
                }
            }
        }
    }

    #[test]
    fn theorem_holds_on_random_worlds() {
        let (mut holds, mut fails) = (0, 0);
        for seed in 0..200 {
            let w = random_world::<f64>(1000 + seed, 200, seed % 2 == 0).unwrap();
            let t = theorem_check(&w);
            assert!(t.consistent, "seed {seed}");
            if t.aaa.holds {
                holds += 1;
            } else {
                fails += 1;
            }
        }
        assert!(holds > 0 && fails > 0);
    }

    #[test]
    fn empirical_check_on_reversal() {
        use crate::synthetic::toy_dataset;
        let d = toy_dataset(&[
            (Group::Protected, 0),
            (Group::Protected, 1),
            (Group::Protected, 1),
            (Group::Privileged, 0),
            (Group::Privileged, 1),
        ]);
        let ids: Vec<usize> = (0..5).collect();
        let base = ScoreSet::new("b", ids.clone(), vec![0.1, 0.5, 0.9, 0.2, 0.7], None).unwrap();
        let rev = ScoreSet::new("r", ids, base.scores.iter().map(|v| 1.0 - v).collect(), None).unwrap();
        let same = aaa_check_empirical(&base, &base, &d, 0.0).unwrap();
        assert!(same.holds && same.caveat.is_some());
        let flipped = aaa_check_empirical(&base, &rev, &d, 0.0).unwrap();
        assert_eq!(flipped.violation_count, 3 + 1);
    }

    #[test]
    fn tolerance_ignores_small_inversions() {
        let w = running_example_world::<f64>(11)
            .unwrap()
            .with_scores(|p| if p.x == 10.0 { p.score - 0.15 } else { p.score })
            .unwrap();
        assert!(!aaa_check(&w, 0.0).holds);
        assert!(aaa_check(&w, 0.2).holds);
    }
}
