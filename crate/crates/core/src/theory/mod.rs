//! Weighted-grid worlds with a fair probability and a biased score per
//! point, decision rates on either basis, and checks of when fair optimal
//! decisions split into per-group thresholds on the biased score.

mod checks;

pub use checks::{
    aaa_check, aaa_check_empirical, decomposition_check, pareto_check, theorem_check, AaaResult, Decomposition,
    ParetoResult, TheoremCheck, Witness, EMPIRICAL_CAVEAT, PARETO_TOLERANCE,
};

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Group;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid resolution used when none is configured.
pub const DEFAULT_GRID: usize = 501;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Fair,
    Unfair,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint<T> {
    pub x: T,
    pub group: Group,
    pub weight: T,
    pub fair_p: T,
    pub score: T,
}

impl<T: Scalar> GridPoint<T> {
    pub fn value(&self, basis: Basis) -> T {
        match basis {
            Basis::Fair => self.fair_p,
            Basis::Unfair => self.score,
        }
    }
}

/// Finite discretization of the joint distribution over features and group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairWorld<T> {
    points: Vec<GridPoint<T>>,
}

/// Protected and privileged values side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerGroup<T> {
    pub protected: T,
    pub privileged: T,
}

impl<T: Copy> PerGroup<T> {
    pub fn get(&self, g: Group) -> T {
        match g {
            Group::Protected => self.protected,
            Group::Privileged => self.privileged,
        }
    }
}

impl<T: Scalar> FairWorld<T> {
    pub fn new(points: Vec<GridPoint<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("a world needs at least one grid point".into()));
        }
        let unit = |v: T| v >= T::zero() && v <= T::one();
        for (i, p) in points.iter().enumerate() {
            if !(p.weight >= T::zero()) || !unit(p.fair_p) || !unit(p.score) {
                return Err(Error::InvalidParameter(format!(
                    "grid point {i} has a weight, probability or score out of range"
                )));
            }
        }
        let total = points.iter().fold(T::zero(), |acc, p| acc + p.weight);
        let tol = T::of(1e-12).max(T::epsilon() * T::count(points.len() as u64));
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(FairWorld { points })
    }

    pub fn points(&self) -> &[GridPoint<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Copy with the biased score replaced point by point.
    pub fn with_scores(&self, score: impl Fn(&GridPoint<T>) -> T) -> Result<Self> {
        FairWorld::new(
            self.points
                .iter()
                .map(|p| GridPoint {
                    score: score(p),
                    ..*p
                })
                .collect(),
        )
    }

    /// `x,a,weight,fair_p,score_s`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "a", "weight", "fair_p", "score_s"])?;
        for p in &self.points {
            w.write_record([
                p.x.to_string(),
                p.group.to_string(),
                p.weight.to_string(),
                p.fair_p.to_string(),
                p.score.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row<T> {
            x: T,
            a: Group,
            weight: T,
            fair_p: T,
            score_s: T,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        for row in rdr.deserialize() {
            let r: Row<T> = row?;
            points.push(GridPoint {
                x: r.x,
                group: r.a,
                weight: r.weight,
                fair_p: r.fair_p,
                score: r.score_s,
            });
        }
        FairWorld::new(points)
    }
}

/// Labels for every grid point, in the world's point order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub labels: Vec<u8>,
}

impl Decision {
    pub fn constant<T>(w: &FairWorld<T>, label: u8) -> Self {
        Decision {
            labels: vec![label; w.points.len()],
        }
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut labels = self.labels.clone();
        labels[i] = 1 - labels[i];
        Decision { labels }
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePair<T> {
    pub tpr: T,
    pub tnr: T,
    pub basis: Basis,
}

/// Uniform grid on [0, 50]; both groups carry half the mass. The fair
/// probability is `x / 50` in both groups; the biased score equals it for the
/// privileged group and is 10% lower for the protected group.
pub fn running_example_world<T: Scalar>(grid_size: usize) -> Result<FairWorld<T>> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter(format!("grid size {grid_size} is below 2")));
    }
    let weight = T::one() / T::count(2 * grid_size as u64);
    let mut points = Vec::with_capacity(2 * grid_size);
    for group in Group::BOTH {
        for i in 0..grid_size {
            let fair_p = T::count(i as u64) / T::count(grid_size as u64 - 1);
            let score = match group {
                Group::Protected => T::of(0.9) * fair_p,
                Group::Privileged => fair_p,
            };
            points.push(GridPoint {
                x: fair_p * T::of(50.0),
                group,
                weight,
                fair_p,
                score,
            });
        }
    }
    FairWorld::new(points)
}

/// Running example with the protected score reversed: `(50 - x) / 50`.
pub fn anti_monotone_world<T: Scalar>(grid_size: usize) -> Result<FairWorld<T>> {
    running_example_world(grid_size)?.with_scores(|p| match p.group {
        Group::Protected => T::one() - p.fair_p,
        Group::Privileged => p.score,
    })
}

/// Running example with an unbiased score.
pub fn identity_world<T: Scalar>(grid_size: usize) -> Result<FairWorld<T>> {
    running_example_world(grid_size)?.with_scores(|p| p.fair_p)
}

/// Random two-group world with distinct probabilities and scores inside
/// each group. With `comonotone` the score is an increasing distortion of
/// the probability; otherwise a few score pairs are swapped.
pub fn random_world<T: Scalar>(seed: u64, max_points: usize, comonotone: bool) -> Result<FairWorld<T>> {
    if max_points < 4 {
        return Err(Error::InvalidParameter("random worlds need at least 4 points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::new();
    for group in Group::BOTH {
        let m = rng.gen_range(2..=max_points / 2);
        let mut p: Vec<f64> = Vec::with_capacity(m);
        while p.len() < m {
            let v = (rng.gen::<f64>() * 1e6).round() / 1e6;
            if !p.contains(&v) {
                p.push(v);
            }
        }
        p.sort_by(f64::total_cmp);
        let gamma = 0.3 + 2.0 * rng.gen::<f64>();
        let scale = 0.5 + 0.5 * rng.gen::<f64>();
        let mut s: Vec<f64> = p.iter().map(|v| scale * v.powf(gamma)).collect();
        if !comonotone {
            for _ in 0..rng.gen_range(1..=3) {
                let i = rng.gen_range(0..m);
                let j = rng.gen_range(0..m);
                s.swap(i, j);
            }
        }
        for (k, (pk, sk)) in p.into_iter().zip(s).enumerate() {
            raw.push((group, k, pk, sk, rng.gen::<f64>() + 0.05));
        }
    }
    let total: f64 = raw.iter().map(|r| r.4).sum();
    let mut points: Vec<GridPoint<T>> = raw
        .iter()
        .map(|&(group, k, p, s, w)| GridPoint {
            x: T::count(k as u64),
            group,
            weight: T::of(w / total),
            fair_p: T::of(p),
            score: T::of(s),
        })
        .collect();
    // push rounding residue into the last weight
    let sum = points.iter().fold(T::zero(), |acc, p| acc + p.weight);
    let last = points.len() - 1;
    points[last].weight = points[last].weight + (T::one() - sum);
    FairWorld::new(points)
}

/// Strict threshold on the chosen basis, optionally one threshold per group.
pub fn threshold_decision<T: Scalar>(w: &FairWorld<T>, basis: Basis, tau: T, per_group: Option<PerGroup<T>>) -> Decision {
    Decision {
        labels: w
            .points
            .iter()
            .map(|p| {
                let t = per_group.map_or(tau, |pg| pg.get(p.group));
                u8::from(p.value(basis) > t)
            })
            .collect(),
    }
}

/// True positive and true negative rate of `dec` when the label
/// probability is the chosen basis.
pub fn rates<T: Scalar>(w: &FairWorld<T>, dec: &Decision, basis: Basis) -> Result<RatePair<T>> {
    if dec.labels.len() != w.points.len() {
        return Err(Error::LengthMismatch {
            left: w.points.len(),
            right: dec.labels.len(),
        });
    }
    let (mut pos, mut neg, mut hit, mut rej) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (p, &label) in w.points.iter().zip(&dec.labels) {
        let q = p.value(basis);
        let pm = q * p.weight;
        let nm = (T::one() - q) * p.weight;
        pos = pos + pm;
        neg = neg + nm;
        if label == 1 {
            hit = hit + pm;
        } else {
            rej = rej + nm;
        }
    }
    if pos <= T::zero() {
        return Err(Error::ZeroMassDenominator("positive side"));
    }
    if neg <= T::zero() {
        return Err(Error::ZeroMassDenominator("negative side"));
    }
    Ok(RatePair {
        tpr: hit / pos,
        tnr: rej / neg,
        basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_example_values() {
        let w = running_example_world::<f64>(DEFAULT_GRID).unwrap();
        let at = |g: Group, x: f64| *w.points().iter().find(|p| p.group == g && p.x == x).unwrap();
        assert_eq!(at(Group::Protected, 25.0).fair_p, 0.5);
        assert_eq!(at(Group::Protected, 25.0).score, 0.45);
        assert_eq!(at(Group::Privileged, 50.0).score, 1.0);
        assert_eq!(w.len(), 2 * DEFAULT_GRID);
        assert!(running_example_world::<f64>(1).is_err());
    }

    #[test]
    fn constant_decisions() {
        let w = running_example_world::<f64>(11).unwrap();
        for basis in [Basis::Fair, Basis::Unfair] {
            let all = rates(&w, &Decision::constant(&w, 1), basis).unwrap();
            assert_eq!((all.tpr, all.tnr), (1.0, 0.0));
            let none = rates(&w, &Decision::constant(&w, 0), basis).unwrap();
            assert_eq!((none.tpr, none.tnr), (0.0, 1.0));
        }
        let zero = running_example_world::<f64>(3).unwrap().with_scores(|_| 0.0).unwrap();
        assert!(matches!(
            rates(&zero, &Decision::constant(&zero, 1), Basis::Unfair),
            Err(Error::ZeroMassDenominator(_))
        ));
    }

    #[test]
    fn fair_threshold_equals_shifted_group_thresholds() {
        let w = running_example_world::<f64>(DEFAULT_GRID).unwrap();
        let fair = threshold_decision(&w, Basis::Fair, 0.5, None);
        let split = threshold_decision(
            &w,
            Basis::Unfair,
            0.0,
            Some(PerGroup {
                protected: 0.45,
                privileged: 0.5,
            }),
        );
        assert_eq!(fair, split);
    }

    #[test]
    fn single_unfair_threshold_passes_over_qualified_protected_points() {
        let w = running_example_world::<f64>(DEFAULT_GRID).unwrap();
        let dec = threshold_decision(&w, Basis::Unfair, 0.5, None);
        let skipped: Vec<f64> = w
            .points()
            .iter()
            .zip(&dec.labels)
            .filter(|(p, &l)| p.group == Group::Protected && l == 0 && p.fair_p > 0.5)
            .map(|(p, _)| p.x)
            .collect();
        assert!(skipped.iter().all(|&x| x > 25.0 && x <= 27.78));
        assert_eq!(skipped.len(), 27);
        for x in &skipped {
            let male = w.points().iter().position(|p| p.group == Group::Privileged && p.x == *x).unwrap();
            assert_eq!(dec.labels[male], 1);
        }
    }

    #[test]
    fn csv_round_trip() {
        let w = running_example_world::<f64>(7).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x,a,weight,fair_p,score_s\n"));
        assert_eq!(FairWorld::<f64>::read_csv(buf.as_slice()).unwrap(), w);
    }

    #[test]
    fn rates_are_linear_in_single_flips() {
        let w = random_world::<f64>(3, 60, true).unwrap();
        let base = threshold_decision(&w, Basis::Fair, 0.4, None);
        for basis in [Basis::Fair, Basis::Unfair] {
            let r0 = rates(&w, &base, basis).unwrap();
            let pos: f64 = w.points().iter().map(|p| p.value(basis) * p.weight).sum();
            let neg: f64 = w.points().iter().map(|p| (1.0 - p.value(basis)) * p.weight).sum();
            for i in 0..w.len() {
                let r1 = rates(&w, &base.flipped(i), basis).unwrap();
                let p = &w.points()[i];
                let sign = if base.labels[i] == 1 { -1.0 } else { 1.0 };
                assert!((r1.tpr - r0.tpr - sign * p.value(basis) * p.weight / pos).abs() < 1e-12);
                assert!((r1.tnr - r0.tnr + sign * (1.0 - p.value(basis)) * p.weight / neg).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fair_rates_are_monotone_in_tau() {
        let w = running_example_world::<f64>(101).unwrap();
        let mut prev: Option<RatePair<f64>> = None;
        for k in 0..=100 {
            let r = rates(&w, &threshold_decision(&w, Basis::Fair, k as f64 / 100.0, None), Basis::Fair).unwrap();
            if let Some(p) = prev {
                assert!(r.tpr <= p.tpr && r.tnr >= p.tnr);
            }
            prev = Some(r);
        }
    }

    #[test]
    fn single_precision_world() {
        let w = running_example_world::<f32>(DEFAULT_GRID).unwrap();
        let r = rates(&w, &threshold_decision(&w, Basis::Unfair, 0.5, None), Basis::Unfair).unwrap();
        assert!(r.tpr > 0.5 && r.tnr > 0.5);
    }

    #[test]
    fn unfair_rates_match_monte_carlo() {
        let w = running_example_world::<f64>(DEFAULT_GRID).unwrap();
        let dec = threshold_decision(&w, Basis::Unfair, 0.5, None);
        let exact = rates(&w, &dec, Basis::Unfair).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (mut pos, mut hit, mut neg, mut rej) = (0u64, 0u64, 0u64, 0u64);
        for _ in 0..1_000_000 {
            // equal weights, so a uniform index is a draw from the world
            let i = rng.gen_range(0..w.len());
            let y = rng.gen::<f64>() < w.points()[i].score;
            if y {
                pos += 1;
                hit += u64::from(dec.labels[i]);
            } else {
                neg += 1;
                rej += u64::from(1 - dec.labels[i]);
            }
        }
        let (tpr, tnr) = (hit as f64 / pos as f64, rej as f64 / neg as f64);
        let se_tpr = (exact.tpr * (1.0 - exact.tpr) / pos as f64).sqrt();
        let se_tnr = (exact.tnr * (1.0 - exact.tnr) / neg as f64).sqrt();
        assert!((tpr - exact.tpr).abs() <= 3.0 * se_tpr, "{tpr} vs {}", exact.tpr);
        assert!((tnr - exact.tnr).abs() <= 3.0 * se_tnr, "{tnr} vs {}", exact.tnr);
    }
}
