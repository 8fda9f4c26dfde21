//! Dense two-phase simplex with Bland's rule, for the tiny programs of
//! Stackelberg verification.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `max cᵀx` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `x ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<T> {
    pub c: Vec<T>,
    pub a_ub: Vec<Vec<T>>,
    pub b_ub: Vec<T>,
    pub a_eq: Vec<Vec<T>>,
    pub b_eq: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<T> {
    Optimal { x: Vec<T>, value: T },
    Infeasible,
    Unbounded,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    eps: T,
}

const MAX_PIVOTS: usize = 10_000;

impl<T: Scalar> Tableau<T> {
    fn rhs(&self) -> usize {
        self.rows[0].len() - 1
    }

    fn reduced_cost(&self, obj: &[T], j: usize) -> T {
        let mut r = obj[j];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            r -= obj[b] * row[j];
        }
        r
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != T::zero() {
                for (v, &q) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * q;
                }
            }
        }
        self.basis[r] = j;
    }

    /// Maximizes `obj` over columns `allowed`; `false` when unbounded.
    fn optimize(&mut self, obj: &[T], allowed: impl Fn(usize) -> bool) -> Result<bool> {
        let rhs = self.rhs();
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index improving column, lowest-index leaving variable
            let Some(j) = (0..rhs)
                .filter(|&j| allowed(j))
                .find(|&j| self.reduced_cost(obj, j) > self.eps)
            else {
                return Ok(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[j] > self.eps {
                    let ratio = row[rhs] / row[j];
                    let better = match leave {
                        None => true,
                        Some((k, best)) => {
                            ratio < best - self.eps
                                || (ratio <= best + self.eps && self.basis[i] < self.basis[k])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, j);
        }
        Err(Error::Numerical("simplex did not terminate".into()))
    }
}

/// Solves `lp` exactly up to rounding; pivoting uses Bland's rule so the
/// result is deterministic.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpOutcome<T>> {
    let n = lp.c.len();
    let m_ub = lp.a_ub.len();
    let m = m_ub + lp.a_eq.len();
    if lp.b_ub.len() != m_ub || lp.b_eq.len() != lp.a_eq.len() {
        return Err(Error::Config(
            "constraint rows and right-hand sides differ in count".into(),
        ));
    }
    if lp.a_ub.iter().chain(&lp.a_eq).any(|r| r.len() != n) {
        return Err(Error::Config(
            "constraint row length differs from the objective".into(),
        ));
    }
    // columns: x (n), slacks (m_ub), artificials (m), rhs
    let width = n + m_ub + m + 1;
    let mut rows = Vec::with_capacity(m);
    let rhs_of = |i: usize| {
        if i < m_ub {
            lp.b_ub[i]
        } else {
            lp.b_eq[i - m_ub]
        }
    };
    for i in 0..m {
        let a = if i < m_ub {
            &lp.a_ub[i]
        } else {
            &lp.a_eq[i - m_ub]
        };
        let mut row = vec![T::zero(); width];
        row[..n].copy_from_slice(a);
        if i < m_ub {
            row[n + i] = T::one();
        }
        row[width - 1] = rhs_of(i);
        if row[width - 1] < T::zero() {
            row.iter_mut().for_each(|v| *v = -*v);
        }
        row[n + m_ub + i] = T::one();
        rows.push(row);
    }
    let eps = T::epsilon() * T::lit(1e3);
    let mut tab = Tableau {
        rows,
        basis: (0..m).map(|i| n + m_ub + i).collect(),
        eps,
    };
    let artificial = |j: usize| j >= n + m_ub && j < n + m_ub + m;

    if m > 0 {
        let mut phase1 = vec![T::zero(); width - 1];
        for v in &mut phase1[n + m_ub..n + m_ub + m] {
            *v = -T::one();
        }
        tab.optimize(&phase1, |_| true)?;
        let infeasibility: T = tab
            .rows
            .iter()
            .zip(&tab.basis)
            .filter(|(_, &b)| artificial(b))
            .map(|(r, _)| r[width - 1])
            .sum();
        if infeasibility > eps * T::lit((m + 1) as f64) {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining artificials out of the basis; drop redundant rows
        let mut i = 0;
        while i < tab.rows.len() {
            if artificial(tab.basis[i]) {
                match (0..n + m_ub).find(|&j| tab.rows[i][j].abs() > eps) {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
    let mut obj = vec![T::zero(); width - 1];
    obj[..n].copy_from_slice(&lp.c);
    if !tab.optimize(&obj, |j| !artificial(j))? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![T::zero(); n];
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        if b < n {
            x[b] = row[width - 1].max(T::zero());
        }
    }
    let value = lp.c.iter().zip(&x).map(|(&c, &v)| c * v).sum();
    Ok(LpOutcome::Optimal { x, value })
}

/// Optimal commitment of the row player.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Commitment<T> {
    pub leader_mix: Vec<T>,
    pub value: T,
    /// Column the follower answers with.
    pub follower_response: usize,
}

/// Best mixed commitment of a leader whose payoff is `q[a][b]` against a
/// follower who answers with a payoff-minimizing column.
///
/// One LP per candidate answer `b*`: maximize `Σ_a q[a][b*] p(a)` subject to
/// `Σ_a (q[a][b] − q[a][b*]) p(a) ≥ 0` for every `b` and `p` in the simplex.
/// The best value over `b*` is returned (first `b*` on ties).
pub fn stackelberg_verify_lp<T: Scalar>(q: &[Vec<T>]) -> Result<Commitment<T>> {
    let rows = q.len();
    let cols = q.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || q.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(
            "payoff matrix must be non-empty and rectangular".into(),
        ));
    }
    let mut best: Option<Commitment<T>> = None;
    for star in 0..cols {
        let lp = LinearProgram {
            c: (0..rows).map(|a| q[a][star]).collect(),
            a_ub: (0..cols)
                .filter(|&b| b != star)
                .map(|b| (0..rows).map(|a| q[a][star] - q[a][b]).collect())
                .collect(),
            b_ub: vec![T::zero(); cols - 1],
            a_eq: vec![vec![T::one(); rows]],
            b_eq: vec![T::one()],
        };
        if let LpOutcome::Optimal { x, value } = solve_lp(&lp)? {
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(Commitment {
                    leader_mix: x,
                    value,
                    follower_response: star,
                });
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("every commitment program was infeasible".into()))
}
