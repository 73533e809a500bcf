//! Exact solver for small box-constrained linear programs
//!
//! minimize `c . x` subject to `A x = b`, `0 <= x_i <= 1`,
//!
//! by enumerating every basic solution: each variable is either pinned to a
//! bound or free, and the free variables must be uniquely determined by the
//! equalities. Fine for a handful of variables (3^n patterns).

use std::cmp::Ordering;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

pub trait LpNumber: Clone + PartialOrd + Num + Signed + Debug {
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Magnitude below which a value counts as zero.
    fn tolerance() -> Self;
}

impl LpNumber for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn tolerance() -> Self {
        Self::zero()
    }
}

impl LpNumber for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn tolerance() -> Self {
        1e-12
    }
}

fn is_zero<N: LpNumber>(v: &N) -> bool {
    v.abs() <= N::tolerance()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<N> {
    pub objective: Vec<N>,
    pub equalities: Vec<(Vec<N>, N)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<N> {
    pub x: Vec<N>,
    pub objective: N,
    pub vertices_checked: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Free,
    Lower,
    Upper,
}

/// Unique solution of `m x = rhs` (rows of `m` are equations), if any.
fn solve_unique<N: LpNumber>(mut m: Vec<Vec<N>>, mut rhs: Vec<N>, unknowns: usize) -> Option<Vec<N>> {
    let rows = m.len();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..unknowns {
        if r == rows {
            break;
        }
        let best = (r..rows)
            .filter(|&i| !is_zero(&m[i][c]))
            .max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap_or(Ordering::Equal));
        let Some(p) = best else { continue };
        m.swap(r, p);
        rhs.swap(r, p);
        let pivot = m[r][c].clone();
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone() / pivot.clone();
                for k in c..unknowns {
                    let delta = f.clone() * m[r][k].clone();
                    m[i][k] = m[i][k].clone() - delta;
                }
                rhs[i] = rhs[i].clone() - f * rhs[r].clone();
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    if pivot_cols.len() != unknowns {
        return None;
    }
    if rhs[r..].iter().any(|v| !is_zero(v)) {
        return None;
    }
    let mut x = vec![N::zero(); unknowns];
    for (row, &c) in pivot_cols.iter().enumerate() {
        x[c] = rhs[row].clone() / m[row][c].clone();
    }
    Some(x)
}

fn lexicographic<N: LpNumber>(a: &[N], b: &[N]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

impl<N: LpNumber> LinearProgram<N> {
    pub fn dimension(&self) -> usize {
        self.objective.len()
    }

    /// Optimal vertex; ties go to the lexicographically smallest `x`.
    /// `None` when the feasible set is empty.
    pub fn solve(&self) -> Option<LpSolution<N>> {
        let n = self.dimension();
        let mut best: Option<LpSolution<N>> = None;
        let mut checked = 0;
        let mut pattern = vec![Slot::Free; n];
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            for slot in pattern.iter_mut() {
                *slot = [Slot::Free, Slot::Lower, Slot::Upper][c % 3];
                c /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == Slot::Free).collect();
            let fixed_value = |i: usize| if pattern[i] == Slot::Upper { N::one() } else { N::zero() };
            let rows: Vec<Vec<N>> = self
                .equalities
                .iter()
                .map(|(a, _)| free.iter().map(|&j| a[j].clone()).collect())
                .collect();
            let rhs: Vec<N> = self
                .equalities
                .iter()
                .map(|(a, b)| {
                    (0..n)
                        .filter(|&j| pattern[j] != Slot::Free)
                        .fold(b.clone(), |acc, j| acc - a[j].clone() * fixed_value(j))
                })
                .collect();
            let Some(sol) = solve_unique(rows, rhs, free.len()) else { continue };
            checked += 1;
            let mut x: Vec<N> = (0..n).map(fixed_value).collect();
            for (&j, v) in free.iter().zip(sol) {
                x[j] = v;
            }
            let tol = N::tolerance();
            if x.iter().any(|v| *v < -tol.clone() || *v > N::one() + tol.clone()) {
                continue;
            }
            for v in x.iter_mut() {
                if *v < N::zero() {
                    *v = N::zero();
                } else if *v > N::one() {
                    *v = N::one();
                }
            }
            let value = self
                .objective
                .iter()
                .zip(&x)
                .fold(N::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
            let better = match &best {
                None => true,
                Some(b) => match value.partial_cmp(&b.objective) {
                    Some(Ordering::Less) => !is_zero(&(b.objective.clone() - value.clone())),
                    _ if is_zero(&(b.objective.clone() - value.clone())) => lexicographic(&x, &b.x) == Ordering::Less,
                    _ => false,
                },
            };
            if better {
                best = Some(LpSolution {
                    x,
                    objective: value,
                    vertices_checked: 0,
                });
            }
        }
        best.map(|mut b| {
            b.vertices_checked = checked;
            b
        })
    }
}

/// Convenience for exact programs built from integer coefficients.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn unconstrained_box_picks_the_right_corner() {
        let lp = LinearProgram::<f64> {
            objective: vec![1.0, -2.0],
            equalities: vec![],
        };
        let s = lp.solve().unwrap();
        assert_eq!(s.x, vec![0.0, 1.0]);
        assert_eq!(s.objective, -2.0);
    }

    #[test]
    fn equality_constrained_in_exact_arithmetic() {
        // x0 + x1 = 3/2, minimize x0 - x1 -> x0 = 1/2, x1 = 1
        let lp = LinearProgram {
            objective: vec![BigRational::one(), -BigRational::one()],
            equalities: vec![(vec![BigRational::one(), BigRational::one()], rational(3, 2))],
        };
        let s = lp.solve().unwrap();
        assert_eq!(s.x, vec![rational(1, 2), BigRational::one()]);
    }

    #[test]
    fn ties_go_to_the_lexicographically_smallest_vertex() {
        // x0 = x1, zero objective: vertices (0,0) and (1,1)
        let lp = LinearProgram::<f64> {
            objective: vec![0.0, 0.0],
            equalities: vec![(vec![1.0, -1.0], 0.0)],
        };
        assert_eq!(lp.solve().unwrap().x, vec![0.0, 0.0]);
    }

    #[test]
    fn infeasible_program() {
        let lp = LinearProgram::<f64> {
            objective: vec![1.0],
            equalities: vec![(vec![1.0], 2.0)],
        };
        assert!(lp.solve().is_none());
    }
}
