//! Rank statistics: AUC from mid-ranks and Kendall tau by merge-sort inversion counting.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauVariant {
    TauA,
    #[default]
    TauB,
}

impl TauVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            TauVariant::TauA => "tau-a",
            TauVariant::TauB => "tau-b",
        }
    }
}

impl std::str::FromStr for TauVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau-a" | "a" => Ok(TauVariant::TauA),
            "tau-b" | "b" => Ok(TauVariant::TauB),
            other => Err(Error::InvalidParameter(format!("unknown tau variant `{other}`"))),
        }
    }
}

fn cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("NaN was rejected up front")
}

fn reject_nan<T: Scalar>(values: &[T], what: &'static str) -> Result<()> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NotANumber(what));
    }
    Ok(())
}

/// Integer numerator and denominator of the AUC: `(2 R_pos - n_pos (n_pos + 1)) / (2 n_pos n_neg)`.
pub fn auc_fraction<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    reject_nan(scores, "auc scores")?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 {
        return Err(Error::SingleClass(0));
    }
    if n_neg == 0 {
        return Err(Error::SingleClass(1));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| cmp(&scores[a], &scores[b]));

    // twice the rank sum of positives; the mid-rank of a tie block [i, j) is (i + 1 + j) / 2
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let positives = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u64;
        twice_rank_sum += positives * (i as u64 + 1 + j as u64);
        i = j;
    }
    Ok((twice_rank_sum - n_pos * (n_pos + 1), 2 * n_pos * n_neg))
}

/// Probability that a random positive outscores a random negative, ties counting 1/2.
pub fn auc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<T> {
    let (num, den) = auc_fraction(scores, labels)?;
    Ok(T::count(num) / T::count(den))
}

/// Pair counts over all `n (n - 1) / 2` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TauCounts {
    pub n: u64,
    pub concordant: u64,
    pub discordant: u64,
    /// Tied in x but not in y.
    pub ties_x: u64,
    /// Tied in y but not in x.
    pub ties_y: u64,
    pub ties_both: u64,
}

impl TauCounts {
    pub fn pairs(&self) -> u64 {
        self.n * self.n.saturating_sub(1) / 2
    }

    /// Tau from the counts; NaN for tau-b when one input is constant.
    pub fn tau<T: Scalar>(&self, variant: TauVariant) -> T {
        let diff = T::count(self.concordant) - T::count(self.discordant);
        match variant {
            TauVariant::TauA => diff / T::count(self.pairs()),
            TauVariant::TauB => {
                let untied_y = T::count(self.concordant + self.discordant + self.ties_x);
                let untied_x = T::count(self.concordant + self.discordant + self.ties_y);
                let den = (untied_x * untied_y).sqrt();
                if den == T::zero() {
                    T::nan()
                } else {
                    diff / den
                }
            }
        }
    }
}

fn tied_pairs<T: Scalar>(sorted: &[T]) -> u64 {
    let mut total = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        total += t * (t - 1) / 2;
        i = j;
    }
    total
}

/// Sort `v` ascending and return the number of strict inversions.
fn merge_sort_inversions<T: Scalar>(v: &mut [T], buf: &mut Vec<T>) -> u64 {
    let n = v.len();
    let mut swaps = 0;
    let mut width = 1;
    buf.clear();
    buf.extend_from_slice(v);
    let mut src_is_v = true;
    while width < n {
        {
            let (src, dst): (&[T], &mut [T]) = if src_is_v { (v, buf) } else { (buf, v) };
            let mut start = 0;
            while start < n {
                let mid = (start + width).min(n);
                let end = (start + 2 * width).min(n);
                let (mut i, mut j, mut k) = (start, mid, start);
                while i < mid && j < end {
                    if src[j] < src[i] {
                        dst[k] = src[j];
                        swaps += (mid - i) as u64;
                        j += 1;
                    } else {
                        dst[k] = src[i];
                        i += 1;
                    }
                    k += 1;
                }
                dst[k..k + (mid - i)].copy_from_slice(&src[i..mid]);
                k += mid - i;
                dst[k..k + (end - j)].copy_from_slice(&src[j..end]);
                start = end;
            }
        }
        src_is_v = !src_is_v;
        width *= 2;
    }
    if !src_is_v {
        v.copy_from_slice(buf);
    }
    swaps
}

/// Concordance counts in O(n log n).
pub fn tau_counts<T: Scalar>(x: &[T], y: &[T]) -> Result<TauCounts> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooShort(x.len()));
    }
    reject_nan(x, "kendall tau x")?;
    reject_nan(y, "kendall tau y")?;
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| cmp(&x[a], &x[b]).then_with(|| cmp(&y[a], &y[b])));

    let xs: Vec<T> = order.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<T> = order.iter().map(|&i| y[i]).collect();
    let tied_x = tied_pairs(&xs);
    let mut tied_both = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && xs[j] == xs[i] && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        tied_both += t * (t - 1) / 2;
        i = j;
    }
    let mut buf = Vec::with_capacity(n);
    let discordant = merge_sort_inversions(&mut ys, &mut buf);
    let tied_y = tied_pairs(&ys);

    let pairs = n as u64 * (n as u64 - 1) / 2;
    let concordant = pairs + tied_both - tied_x - tied_y - discordant;
    Ok(TauCounts {
        n: n as u64,
        concordant,
        discordant,
        ties_x: tied_x - tied_both,
        ties_y: tied_y - tied_both,
        ties_both: tied_both,
    })
}

pub fn kendall_tau<T: Scalar>(x: &[T], y: &[T], variant: TauVariant) -> Result<T> {
    Ok(tau_counts(x, y)?.tau(variant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_counts(x: &[f64], y: &[f64]) -> TauCounts {
        let mut c = TauCounts {
            n: x.len() as u64,
            ..TauCounts::default()
        };
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let dx = x[i].partial_cmp(&x[j]).unwrap();
                let dy = y[i].partial_cmp(&y[j]).unwrap();
                match (dx, dy) {
                    (Ordering::Equal, Ordering::Equal) => c.ties_both += 1,
                    (Ordering::Equal, _) => c.ties_x += 1,
                    (_, Ordering::Equal) => c.ties_y += 1,
                    (a, b) if a == b => c.concordant += 1,
                    _ => c.discordant += 1,
                }
            }
        }
        c
    }

    fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut twice_wins, mut pairs) = (0u64, 0u64);
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1 && yj == 0 {
                    pairs += 2;
                    twice_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        Ordering::Greater => 2,
                        Ordering::Equal => 1,
                        Ordering::Less => 0,
                    };
                }
            }
        }
        twice_wins as f64 / pairs as f64
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.4, 0.3], &[1, 0, 1, 0]).unwrap(), 0.75);
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4; 5], &[1, 0, 1, 0, 0]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass(1))));
        assert!(matches!(auc(&[0.1, 0.2], &[0, 0]), Err(Error::SingleClass(0))));
    }

    #[test]
    fn tau_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(kendall_tau(&x, &[1.0, 3.0, 2.0], TauVariant::TauA).unwrap(), 1.0 / 3.0);
        assert_eq!(kendall_tau(&x, &x, TauVariant::TauB).unwrap(), 1.0);
        assert_eq!(kendall_tau(&x, &[3.0, 2.0, 1.0], TauVariant::TauA).unwrap(), -1.0);
        assert!(matches!(kendall_tau(&x, &[1.0], TauVariant::TauA), Err(Error::LengthMismatch { .. })));
        assert!(matches!(kendall_tau(&[1.0], &[1.0], TauVariant::TauA), Err(Error::TooShort(1))));
        assert!(kendall_tau(&[1.0f64, 1.0], &[1.0, 2.0], TauVariant::TauB).unwrap().is_nan());
    }

    #[test]
    fn tau_in_single_precision() {
        let x: [f32; 4] = [0.1, 0.4, 0.2, 0.9];
        assert_eq!(kendall_tau(&x, &x, TauVariant::TauB).unwrap(), 1.0f32);
    }

    fn vector(n: usize, tied: bool) -> BoxedStrategy<Vec<f64>> {
        if tied {
            prop::collection::vec((0u8..6).prop_map(|v| v as f64 / 5.0), n).boxed()
        } else {
            prop::collection::vec(0.0f64..1.0, n).boxed()
        }
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..=300, any::<bool>(), any::<bool>())
            .prop_flat_map(|(n, tx, ty)| (vector(n, tx), vector(n, ty)))
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..=300, any::<bool>()).prop_flat_map(|(n, tied)| {
            (vector(n, tied), prop::collection::vec(0u8..=1, n))
                .prop_filter("both classes", |(_, l)| l.contains(&0) && l.contains(&1))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn tau_matches_pair_enumeration((x, y) in pair()) {
            let fast = tau_counts(&x, &y).unwrap();
            let slow = brute_counts(&x, &y);
            prop_assert_eq!(fast, slow);
            for v in [TauVariant::TauA, TauVariant::TauB] {
                let a: f64 = fast.tau(v);
                let b: f64 = slow.tau(v);
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }

        #[test]
        fn auc_matches_pair_enumeration((s, l) in scored()) {
            prop_assert_eq!(auc(&s, &l).unwrap().to_bits(), brute_auc(&s, &l).to_bits());
        }

        #[test]
        fn auc_rank_invariant((s, l) in scored()) {
            let t: Vec<f64> = s.iter().map(|v| v.powi(3) * 0.5 + 0.1).collect();
            prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
        }

        #[test]
        fn tau_symmetry((x, y) in pair()) {
            for v in [TauVariant::TauA, TauVariant::TauB] {
                let a: f64 = kendall_tau(&x, &y, v).unwrap();
                let b: f64 = kendall_tau(&y, &x, v).unwrap();
                prop_assert!(a == b || (a.is_nan() && b.is_nan()));
            }
        }

        #[test]
        fn tau_self_and_reversal(x in prop::collection::hash_set(0u32..1_000_000, 2..200)) {
            let x: Vec<f64> = x.into_iter().map(|v| v as f64).collect();
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert_eq!(kendall_tau(&x, &x, TauVariant::TauB).unwrap(), 1.0);
            prop_assert_eq!(kendall_tau(&x, &neg, TauVariant::TauA).unwrap(), -1.0);
            prop_assert_eq!(kendall_tau(&x, &neg, TauVariant::TauB).unwrap(), -1.0);
        }
    }
}
