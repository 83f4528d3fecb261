//! Exact dense-tableau simplex for small linear programs.
//!
//! Maximizes `c . x` over free variables subject to `A x <= b` with
//! `b >= 0`, by splitting each free variable into a difference of
//! nonnegative parts and pivoting from the feasible slack basis. Bland's
//! rule guarantees termination; every pivot is an exact rational row
//! operation, so the reported optimum is exact.

use num_traits::{Signed, Zero};

use crate::{Error, Q};

/// `maximize c . x  subject to  A x <= b`, `x` free, `b >= 0`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<Q>,
    /// Constraint rows paired with their right-hand sides.
    pub rows: Vec<(Vec<Q>, Q)>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: Q,
    pub x: Vec<Q>,
}

pub fn maximize(p: &LpProblem) -> Result<LpSolution, Error> {
    let n = p.objective.len();
    let m = p.rows.len();
    for (row, b) in &p.rows {
        if row.len() != n {
            return Err(Error::Internal("LP row width mismatch".into()));
        }
        if b.is_negative() {
            return Err(Error::Internal("LP right-hand side must be nonnegative".into()));
        }
    }

    // columns: x+ (n), x- (n), slacks (m), rhs
    let width = 2 * n + m + 1;
    let mut tab = vec![vec![Q::zero(); width]; m + 1];
    for (i, (row, b)) in p.rows.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            tab[i][j] = c.clone();
            tab[i][n + j] = -c.clone();
        }
        tab[i][2 * n + i] = Q::from_integer(1.into());
        tab[i][width - 1] = b.clone();
    }
    // objective row keeps z - c . x = 0, i.e. coefficients -c
    for (j, c) in p.objective.iter().enumerate() {
        tab[m][j] = -c.clone();
        tab[m][n + j] = c.clone();
    }
    let mut basis: Vec<usize> = (2 * n..2 * n + m).collect();

    loop {
        // Bland: entering column is the lowest index with a negative
        // objective coefficient
        let Some(enter) = (0..width - 1).find(|&j| tab[m][j].is_negative()) else {
            break;
        };
        // leaving row: minimal ratio, ties by lowest basis index
        let mut leave: Option<(Q, usize)> = None;
        for i in 0..m {
            if tab[i][enter].is_positive() {
                let ratio = &tab[i][width - 1] / &tab[i][enter];
                let better = match &leave {
                    None => true,
                    Some((best, at)) => {
                        ratio < *best || (ratio == *best && basis[i] < basis[*at])
                    }
                };
                if better {
                    leave = Some((ratio, i));
                }
            }
        }
        let Some((_, pivot_row)) = leave else {
            return Err(Error::Internal("LP is unbounded".into()));
        };

        let pivot = tab[pivot_row][enter].clone();
        for v in tab[pivot_row].iter_mut() {
            *v /= &pivot;
        }
        for i in 0..=m {
            if i == pivot_row || tab[i][enter].is_zero() {
                continue;
            }
            let factor = tab[i][enter].clone();
            let pivot_row_copy = tab[pivot_row].clone();
            for (v, pv) in tab[i].iter_mut().zip(pivot_row_copy.iter()) {
                *v -= &factor * pv;
            }
        }
        basis[pivot_row] = enter;
    }

    let mut x = vec![Q::zero(); n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] += &tab[i][width - 1];
        } else if b < 2 * n {
            x[b - n] -= &tab[i][width - 1];
        }
    }
    Ok(LpSolution { value: tab[m][width - 1].clone(), x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{q_int, q_ratio};

    #[test]
    fn one_dimensional_box() {
        // max 2x subject to x <= 3, -x <= 1
        let p = LpProblem {
            objective: vec![q_int(2)],
            rows: vec![(vec![q_int(1)], q_int(3)), (vec![q_int(-1)], q_int(1))],
        };
        let s = maximize(&p).unwrap();
        assert_eq!(s.value, q_int(6));
        assert_eq!(s.x, vec![q_int(3)]);
    }

    #[test]
    fn negative_direction_is_reachable() {
        // max -x subject to x <= 3, -x <= 2: optimum at x = -2
        let p = LpProblem {
            objective: vec![q_int(-1)],
            rows: vec![(vec![q_int(1)], q_int(3)), (vec![q_int(-1)], q_int(2))],
        };
        let s = maximize(&p).unwrap();
        assert_eq!(s.value, q_int(2));
        assert_eq!(s.x, vec![q_int(-2)]);
    }

    #[test]
    fn two_variables_with_coupling() {
        // max x + y subject to x <= 1, y <= 1, x + y <= 3/2
        let p = LpProblem {
            objective: vec![q_int(1), q_int(1)],
            rows: vec![
                (vec![q_int(1), q_int(0)], q_int(1)),
                (vec![q_int(0), q_int(1)], q_int(1)),
                (vec![q_int(1), q_int(1)], q_ratio(3, 2)),
            ],
        };
        let s = maximize(&p).unwrap();
        assert_eq!(s.value, q_ratio(3, 2));
    }

    #[test]
    fn unbounded_detected() {
        let p = LpProblem { objective: vec![q_int(1)], rows: vec![(vec![q_int(-1)], q_int(0))] };
        assert!(maximize(&p).is_err());
    }
}
