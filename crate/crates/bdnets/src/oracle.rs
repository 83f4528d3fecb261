//! Independent brute-force reference routes used by the verification suites.
//!
//! Everything here recomputes a quantity by a different path than the
//! construction proper: recursive ball enumeration against the odometer
//! enumeration, closed-form shell counts, and exhaustive vertex enumeration
//! of small dual polytopes against the simplex and the transport solver.

use num_traits::Zero;

use crate::free::simplex::LpProblem;
use crate::{Error, QVec, Q, Z};

/// Integer vectors of sup-norm at most `radius` over `0..dim`, by recursive
/// descent (deliberately a different code path than the odometer walk).
pub fn enumerate_ball(dim: u32, radius: i64) -> Vec<QVec> {
    fn go(dim: u32, radius: i64, prefix: &mut Vec<(u32, i64)>, out: &mut Vec<QVec>) {
        if prefix.len() == dim as usize {
            out.push(QVec::from_pairs(
                prefix.iter().map(|&(i, v)| (i, crate::q_int(v))),
            ));
            return;
        }
        let next = prefix.len() as u32;
        for v in -radius..=radius {
            prefix.push((next, v));
            go(dim, radius, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    go(dim, radius, &mut Vec::new(), &mut out);
    out
}

/// Like [`enumerate_ball`] but stops after `cap` points (the cap keeps
/// sample sweeps over large stages bounded).
pub fn enumerate_ball_capped(dim: u32, radius: i64, cap: usize) -> Vec<QVec> {
    fn go(dim: u32, radius: i64, cap: usize, prefix: &mut Vec<(u32, i64)>, out: &mut Vec<QVec>) {
        if out.len() >= cap {
            return;
        }
        if prefix.len() == dim as usize {
            out.push(QVec::from_pairs(
                prefix.iter().map(|&(i, v)| (i, crate::q_int(v))),
            ));
            return;
        }
        let next = prefix.len() as u32;
        for v in -radius..=radius {
            prefix.push((next, v));
            go(dim, radius, cap, prefix, out);
            prefix.pop();
            if out.len() >= cap {
                return;
            }
        }
    }
    let mut out = Vec::new();
    if dim == 0 || cap == 0 {
        return out;
    }
    go(dim, radius, cap, &mut Vec::new(), &mut out);
    out
}

/// `(2r + 1)^dim`, the ball cardinality.
pub fn ball_count(dim: u32, radius: u64) -> Z {
    num_traits::pow(Z::from(2 * radius + 1), dim as usize)
}

/// Number of integer vectors of sup-norm exactly `m` over `dim` indices.
pub fn shell_count(dim: u32, m: u64) -> Z {
    if m == 0 {
        return Z::from(1);
    }
    ball_count(dim, m) - ball_count(dim, m - 1)
}

fn solve_square(rows: &[(&[Q], &Q)]) -> Option<Vec<Q>> {
    let n = rows.len();
    let mut a: Vec<Vec<Q>> = rows.iter().map(|(r, _)| r.to_vec()).collect();
    let mut b: Vec<Q> = rows.iter().map(|(_, v)| (*v).clone()).collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v /= &p;
        }
        b[col] /= &p;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            let head = a[col].clone();
            for (v, h) in a[r].iter_mut().zip(head.iter()) {
                *v -= &f * h;
            }
            let bc = b[col].clone();
            b[r] -= &f * &bc;
        }
    }
    Some(b)
}

/// Exhaustive vertex-enumeration optimum of a small bounded program
/// `maximize c . x  subject to  A x <= b` (free variables): evaluate the
/// objective at every nondegenerate vertex and take the maximum. Intended
/// for at most 3 variables.
pub fn lp_vertex_max(p: &LpProblem) -> Result<Q, Error> {
    let n = p.objective.len();
    let m = p.rows.len();
    if n == 0 {
        return Ok(Q::zero());
    }
    if n > 3 {
        return Err(Error::Internal("vertex oracle is limited to 3 variables".into()));
    }
    let feasible = |x: &[Q]| {
        p.rows.iter().all(|(row, b)| {
            let lhs: Q = row.iter().zip(x).map(|(c, v)| c * v).sum();
            lhs <= *b
        })
    };
    let mut best: Option<Q> = None;
    let mut consider = |x: &[Q]| {
        if feasible(x) {
            let value: Q = p.objective.iter().zip(x).map(|(c, v)| c * v).sum();
            if best.as_ref().map_or(true, |b| value > *b) {
                best = Some(value);
            }
        }
    };
    let mut choose = vec![0usize; n];
    fn subsets(m: usize, k: usize, start: usize, choose: &mut Vec<usize>, pos: usize, f: &mut dyn FnMut(&[usize])) {
        if pos == k {
            f(choose);
            return;
        }
        for i in start..m {
            choose[pos] = i;
            subsets(m, k, i + 1, choose, pos + 1, f);
        }
    }
    let mut visit = |subset: &[usize]| {
        let rows: Vec<(&[Q], &Q)> = subset
            .iter()
            .map(|&i| (p.rows[i].0.as_slice(), &p.rows[i].1))
            .collect();
        if let Some(x) = solve_square(&rows) {
            consider(&x);
        }
    };
    subsets(m, n, 0, &mut choose, 0, &mut visit);
    best.ok_or_else(|| Error::Internal("vertex oracle found no feasible vertex".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::free::simplex::maximize;
    use crate::{q_int, q_ratio};

    #[test]
    fn ball_enumeration_matches_the_count() {
        let pts = enumerate_ball(2, 2);
        assert_eq!(Z::from(pts.len()), ball_count(2, 2));
        let mut sorted = pts.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), pts.len());
        assert_eq!(shell_count(2, 1), Z::from(8));
        assert_eq!(shell_count(1, 4), Z::from(2));
    }

    #[test]
    fn vertex_oracle_agrees_with_the_simplex() {
        // max 2u1 - 3u2 over |u1| <= 1, |u2| <= 2, |u1 - u2| <= 1
        let one = q_int(1);
        let p = LpProblem {
            objective: vec![q_int(2), q_int(-3)],
            rows: vec![
                (vec![one.clone(), q_int(0)], q_int(1)),
                (vec![-one.clone(), q_int(0)], q_int(1)),
                (vec![q_int(0), one.clone()], q_int(2)),
                (vec![q_int(0), -one.clone()], q_int(2)),
                (vec![one.clone(), -one.clone()], q_int(1)),
                (vec![-one.clone(), one.clone()], q_int(1)),
            ],
        };
        let by_vertices = lp_vertex_max(&p).unwrap();
        let by_simplex = maximize(&p).unwrap().value;
        assert_eq!(by_vertices, q_int(4));
        assert_eq!(by_simplex, by_vertices);
    }

    #[test]
    fn vertex_oracle_handles_rational_data() {
        let p = LpProblem {
            objective: vec![q_ratio(1, 3)],
            rows: vec![(vec![q_int(1)], q_ratio(3, 2)), (vec![q_int(-1)], q_int(0))],
        };
        assert_eq!(lp_vertex_max(&p).unwrap(), q_ratio(1, 2));
        assert_eq!(maximize(&p).unwrap().value, q_ratio(1, 2));
    }
}
