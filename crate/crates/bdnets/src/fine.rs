//! One-point-at-a-time refinement: shell orders, the index sets `E(n)` and
//! `G(n)`, local truncation chains, and the closed-form truncation levels.
//!
//! Over the increment of a stage, the integer vectors are enumerated shell
//! by shell (sup-norm ascending, lexicographic inside each shell). The local
//! retraction at position `j` clamps only the `j`-th vector one norm level
//! down; composing a run of locals collapses a vector to a truncation of
//! itself, and the reached radius has a closed form that is re-derived here
//! both ways, with any mismatch a hard error.

use std::collections::BTreeMap;
use std::ops::Range;

use num_traits::One;

use crate::blocks::{integer_shell, predicted_ball_size, Blocks};
use crate::system::BdSystem;
use crate::{q_int, q_to_u64, Error, QVec, Q, Z};

/// Norm-monotone enumeration of the integer vectors over one increment:
/// position 0 is the origin, shell `m` holds exactly the vectors of sup-norm
/// `m`, ascending lexicographically within the shell.
#[derive(Debug, Clone)]
pub struct ShellOrder {
    pub stage: usize,
    pub delta: Range<u32>,
    pub points: Vec<QVec>,
    pub norms: Vec<u64>,
    index_of: BTreeMap<QVec, usize>,
}

impl ShellOrder {
    pub fn build(
        stage: usize,
        delta: Range<u32>,
        max_shell: u64,
        cap: u64,
    ) -> Result<Self, Error> {
        let dim = delta.end - delta.start;
        let mut points = vec![QVec::zero()];
        let mut norms = vec![0u64];
        for m in 1..=max_shell {
            let hi = Z::from(m);
            let predicted = predicted_ball_size(dim, &hi);
            if predicted > Z::from(cap) {
                return Err(Error::CapExceeded {
                    what: format!("shell {m} over the increment of stage {stage}"),
                    predicted: predicted.to_string(),
                    cap,
                });
            }
            for v in integer_shell(dim, &(&hi - Z::one()), &hi) {
                points.push(QVec::from_pairs(
                    v.iter().map(|(i, q)| (i + delta.start, q.clone())),
                ));
                norms.push(m);
            }
        }
        let index_of = points
            .iter()
            .enumerate()
            .map(|(j, p)| (p.clone(), j))
            .collect();
        Ok(ShellOrder { stage, delta, points, norms, index_of })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, v: &QVec) -> Option<usize> {
        self.index_of.get(v).copied()
    }

    /// Largest enumerated shell.
    pub fn max_shell(&self) -> u64 {
        self.norms.last().copied().unwrap_or(0)
    }

    /// Local retraction at position `j >= 1`, extended by the identity: only
    /// the `j`-th vector moves, clamped one norm level down.
    pub fn local_t(&self, j: usize, x: &QVec) -> QVec {
        debug_assert!(j >= 1 && j < self.len());
        if *x == self.points[j] {
            self.points[j]
                .truncate(&q_int(self.norms[j] as i64 - 1))
                .expect("norm of a nonzero shell vector is positive")
        } else {
            x.clone()
        }
    }

    /// The unique radius `m` with `T_{j1+1} . ... . T_{j2}` collapsing the
    /// `j2`-th vector to its truncation at `m`. Computed by explicit
    /// composition and checked against the truncation characterization; a
    /// mismatch is a hard error.
    pub fn m_value(&self, j1: usize, j2: usize) -> Result<u64, Error> {
        if j1 >= j2 || j2 >= self.len() {
            return Err(Error::IndexOutOfRange {
                what: format!("m-value pair (j1, j2) = ({j1}, {j2})"),
                index: j2,
            });
        }
        let y = &self.points[j2];
        let mut v = y.clone();
        for j in (j1 + 1..=j2).rev() {
            v = self.local_t(j, &v);
        }
        let m = q_to_u64(&v.sup_norm())
            .ok_or_else(|| Error::Internal("collapsed shell vector has non-integer norm".into()))?;
        if v == *y || v != y.truncate(&q_int(m as i64))? {
            return Err(Error::Internal(format!(
                "collapsed value of shell position {j2} down to {j1} is not a truncation"
            )));
        }
        Ok(m)
    }
}

/// The ordered index set `E(n)` (stage `n >= 2`): pairs `(j, k)` in
/// lexicographic order, one per point of `M_n \ D_{n-1}`, together with the
/// realized points they name.
#[derive(Debug, Clone)]
pub struct EIndex {
    pub stage: usize,
    /// `e_i = (j, k0)` for `i = position + 1`; `k0` is the 0-based position
    /// in the lexicographic listing of `D_{n-1}`.
    pub pairs: Vec<(usize, usize)>,
    /// `x^n_i`, parallel to `pairs`.
    pub x_points: Vec<QVec>,
    /// `K(j, n)` for every `j` in `J(n)`, 0-based `k` values.
    pub k_of_j: BTreeMap<usize, Vec<usize>>,
    /// `#D_{n-1}`.
    pub k_count: usize,
}

impl EIndex {
    pub fn build(
        sys: &BdSystem,
        blocks: &Blocks,
        shell: &ShellOrder,
        n: usize,
    ) -> Result<Self, Error> {
        if n < 2 {
            return Err(Error::StageOutOfRange { stage: n, n_max: blocks.n_cap() });
        }
        let m_n = blocks.m(n)?;
        let d_prev = blocks.d(n - 1)?;
        let delta = sys.chain().delta(n)?;
        let s_n = sys.s_q(n);
        let two_s_n = &s_n + &s_n;
        if Z::from(shell.max_shell()) < Z::from(2) * sys.s(n) {
            return Err(Error::Internal(format!(
                "shell order of stage {n} stops below twice the stage radius"
            )));
        }

        let deltas: Vec<QVec> = d_prev
            .points
            .iter()
            .map(|d| d.restrict_range(delta.clone()))
            .collect();

        let mut pairs = Vec::new();
        let mut x_points = Vec::new();
        let mut k_of_j = BTreeMap::new();
        for j in 1..shell.len() {
            // beyond twice the radius every K(j, n) is empty
            if Q::from_integer(Z::from(shell.norms[j])) > two_s_n {
                break;
            }
            let mut ks = Vec::new();
            for (k0, dk) in deltas.iter().enumerate() {
                if dk.add(&shell.points[j]).sup_norm() <= s_n {
                    ks.push(k0);
                }
            }
            if ks.is_empty() {
                continue;
            }
            for &k0 in &ks {
                let w = sys
                    .restrict(&d_prev.points[k0], n - 1)?
                    .join(&deltas[k0].add(&shell.points[j]))?;
                let x = m_n.inverse_restriction(&w)?.clone();
                pairs.push((j, k0));
                x_points.push(x);
            }
            k_of_j.insert(j, ks);
        }

        // Lemma-level consistency: the pairs biject onto M_n \ D_{n-1}.
        let mut seen: BTreeMap<&QVec, usize> = BTreeMap::new();
        for (i, x) in x_points.iter().enumerate() {
            if seen.insert(x, i).is_some() {
                return Err(Error::Internal(format!(
                    "E({n}) names the same point twice"
                )));
            }
        }
        let expected = m_n.len() - d_prev.len();
        if x_points.len() != expected {
            return Err(Error::Internal(format!(
                "E({n}) has {} entries, expected {expected}",
                x_points.len()
            )));
        }
        for x in &x_points {
            let r = sys.restrict(x, n - 1)?;
            if d_prev.contains(&r) && d_prev.inverse_restriction(&r)? == x {
                return Err(Error::Internal(format!(
                    "E({n}) names a point of D_{}",
                    n - 1
                )));
            }
        }

        Ok(EIndex { stage: n, pairs, x_points, k_of_j, k_count: d_prev.len() })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `K(0, n)`: the `k` values pairing with the origin. Equals the whole
    /// `D_{n-1}` listing; asserted by the verification suites.
    pub fn k_zero(&self, sys: &BdSystem, blocks: &Blocks) -> Result<Vec<usize>, Error> {
        let d_prev = blocks.d(self.stage - 1)?;
        let delta = sys.chain().delta(self.stage)?;
        let s_n = sys.s_q(self.stage);
        Ok((0..d_prev.len())
            .filter(|&k0| {
                d_prev.points[k0].restrict_range(delta.clone()).sup_norm() <= s_n
            })
            .collect())
    }
}

/// Truncation level reached by the intermediate retraction run from `i2`
/// down past `i1`: the case split on the `k` components (closed form).
pub fn big_m(e: &EIndex, shell: &ShellOrder, i1: usize, i2: usize) -> Result<u64, Error> {
    if i1 < 1 || i1 >= i2 || i2 > e.len() {
        return Err(Error::IndexOutOfRange {
            what: format!("E-pair (i1, i2) = ({i1}, {i2})"),
            index: i2,
        });
    }
    let (j1, k1) = e.pairs[i1 - 1];
    let (j2, k2) = e.pairs[i2 - 1];
    if k2 <= k1 {
        if j1 >= j2 {
            return Err(Error::Internal(format!(
                "E({}) order broken: k2 <= k1 requires j1 < j2 at ({i1}, {i2})",
                e.stage
            )));
        }
        shell.m_value(j1, j2)
    } else {
        if j1 < 1 || j1 - 1 >= j2 {
            return Err(Error::Internal(format!(
                "E({}) order broken: k2 > k1 requires j1 - 1 < j2 at ({i1}, {i2})",
                e.stage
            )));
        }
        shell.m_value(j1 - 1, j2)
    }
}

/// Image of `x^n_i` under the local intermediate retraction: the shell part
/// is clamped one norm level down, everything else is reproduced.
pub fn psi_local_target(
    sys: &BdSystem,
    blocks: &Blocks,
    shell: &ShellOrder,
    e: &EIndex,
    i: usize,
) -> Result<QVec, Error> {
    if i < 1 || i > e.len() {
        return Err(Error::IndexOutOfRange { what: format!("E({})", e.stage), index: i });
    }
    let n = e.stage;
    let (j, k0) = e.pairs[i - 1];
    let d = &blocks.d(n - 1)?.points[k0];
    let delta = sys.chain().delta(n)?;
    let clamped = shell.local_t(j, &shell.points[j]);
    let w = sys
        .restrict(d, n - 1)?
        .join(&d.restrict_range(delta).add(&clamped))?;
    Ok(blocks.m(n)?.inverse_restriction(&w)?.clone())
}

/// Closed-form image `Psi_{n,i1}(x^n_{i2})` via the case-split truncation
/// level; cross-checked against the explicit composition by the suites.
pub fn psi_closed_form(
    sys: &BdSystem,
    blocks: &Blocks,
    shell: &ShellOrder,
    e: &EIndex,
    i1: usize,
    i2: usize,
) -> Result<QVec, Error> {
    let n = e.stage;
    let (j2, k2) = e.pairs[i2 - 1];
    let m = big_m(e, shell, i1, i2)?;
    let d = &blocks.d(n - 1)?.points[k2];
    let delta = sys.chain().delta(n)?;
    let clamped = shell.points[j2].truncate(&q_int(m as i64))?;
    let w = sys
        .restrict(d, n - 1)?
        .join(&d.restrict_range(delta).add(&clamped))?;
    Ok(blocks.m(n)?.inverse_restriction(&w)?.clone())
}

/// The ordered index set `G(n)`: the realized shell `C_n` listed with
/// sup-norm of the stage-`n` restriction ascending, lexicographic within a
/// shell.
#[derive(Debug, Clone)]
pub struct GIndex {
    pub stage: usize,
    /// `(shell radius, z_i)` with `z_i` the stage-`n` restriction.
    pub entries: Vec<(u64, QVec)>,
    /// `c^n_i`, parallel to `entries`.
    pub c_points: Vec<QVec>,
}

impl GIndex {
    pub fn build(sys: &BdSystem, blocks: &Blocks, n: usize) -> Result<Self, Error> {
        let c_n = blocks.c(n)?;
        let mut order: Vec<(u64, QVec, QVec)> = c_n
            .points
            .iter()
            .map(|c| {
                let z = sys.restrict(c, n)?;
                let shell = q_to_u64(&z.sup_norm()).ok_or_else(|| {
                    Error::Internal(format!("C_{n} point with non-integer norm"))
                })?;
                Ok((shell, z, c.clone()))
            })
            .collect::<Result<_, Error>>()?;
        order.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        Ok(GIndex {
            stage: n,
            entries: order.iter().map(|(s, z, _)| (*s, z.clone())).collect(),
            c_points: order.into_iter().map(|(_, _, c)| c).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Image of `c^n_i` under the local retraction of the shell chain: the
/// stage-`n` restriction is clamped one norm level down and inverted over
/// `D_n`.
pub fn t_local_target(
    blocks: &Blocks,
    g: &GIndex,
    i: usize,
) -> Result<QVec, Error> {
    if i < 1 || i > g.len() {
        return Err(Error::IndexOutOfRange { what: format!("G({})", g.stage), index: i });
    }
    let (shell, z) = &g.entries[i - 1];
    let clamped = z.truncate(&q_int(*shell as i64 - 1))?;
    Ok(blocks.d(g.stage)?.inverse_restriction(&clamped)?.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{BdSystem, ExtensionSpec, SystemSpec};

    fn p0() -> (BdSystem, Blocks) {
        let sys = BdSystem::build(&SystemSpec {
            stage_sizes: vec![1, 2, 3],
            lambda_bar: 2,
            extension: ExtensionSpec::Zero,
            n_max: None,
        })
        .unwrap();
        let blocks = Blocks::build(&sys, 2, false, 1_000_000).unwrap();
        (sys, blocks)
    }

    fn line_shell() -> ShellOrder {
        ShellOrder::build(2, 1..2, 8, 1_000_000).unwrap()
    }

    #[test]
    fn one_dimensional_shell_sequence() {
        let shell = line_shell();
        let expected: Vec<i64> = vec![0, -1, 1, -2, 2, -3, 3, -4, 4];
        for (j, &v) in expected.iter().enumerate() {
            assert_eq!(shell.points[j], QVec::from_pairs([(1, q_int(v))]));
        }
        assert_eq!(shell.norms[..5], [0, 1, 1, 2, 2]);
        assert_eq!(shell.len(), 17);
        assert_eq!(shell.index_of(&QVec::zero()), Some(0));
    }

    #[test]
    fn shell_counts_match_the_box_difference() {
        let shell = ShellOrder::build(2, 1..3, 2, 1_000_000).unwrap();
        let size_of = |m: u64| shell.norms.iter().filter(|&&x| x == m).count();
        assert_eq!(size_of(0), 1);
        assert_eq!(size_of(1), 8); // 3^2 - 1
        assert_eq!(size_of(2), 16); // 5^2 - 3^2
    }

    #[test]
    fn m_value_on_the_line() {
        let shell = line_shell();
        // order (0, -1, +1, -2, +2, ...): collapsing +2 down to prefix 1
        // passes through +1 and lands at 0; down to prefix 2 stops at +1.
        assert_eq!(shell.m_value(1, 4).unwrap(), 0);
        assert_eq!(shell.m_value(2, 4).unwrap(), 1);
        assert!(shell.m_value(4, 4).is_err());
        assert!(shell.m_value(5, 3).is_err());
    }

    #[test]
    fn m_value_respects_the_sandwich_bound() {
        let shell = line_shell();
        for j1 in 1..shell.len() {
            for j2 in (j1 + 1)..shell.len() {
                let m = shell.m_value(j1, j2).unwrap();
                let norm = shell.norms[j1];
                assert!(norm.saturating_sub(1) <= m && m <= norm, "pair ({j1}, {j2})");
            }
        }
    }

    #[test]
    fn e_index_of_p0_stage_two() {
        let (sys, blocks) = p0();
        let shell = line_shell();
        let e = EIndex::build(&sys, &blocks, &shell, 2).unwrap();
        assert_eq!(e.len(), 72);
        assert_eq!(e.k_count, 9);
        // K(j, 2) is the full listing for every shell position up to s_2
        for (j, ks) in &e.k_of_j {
            assert!(*j >= 1 && *j <= 8);
            assert_eq!(ks.len(), 9);
        }
        assert_eq!(e.k_zero(&sys, &blocks).unwrap(), (0..9).collect::<Vec<_>>());
        // first pair: smallest shell position with the first listed point
        assert_eq!(e.pairs[0], (1, 0));
        assert_eq!(e.x_points[0], QVec::from_ints(&[-4, -1, 0]));
    }

    #[test]
    fn big_m_matches_both_cases() {
        let (sys, blocks) = p0();
        let shell = line_shell();
        let e = EIndex::build(&sys, &blocks, &shell, 2).unwrap();
        // i1 = 2 -> (1, 1), i2 = 10 -> (2, 0): k2 < k1, closed form m(j1, j2)
        assert_eq!(e.pairs[1], (1, 1));
        assert_eq!(e.pairs[9], (2, 0));
        assert_eq!(big_m(&e, &shell, 2, 10).unwrap(), shell.m_value(1, 2).unwrap());
        // i1 = 1 -> (1, 0), i2 = 11 -> (2, 1): k2 > k1, closed form m(j1 - 1, j2)
        assert_eq!(big_m(&e, &shell, 1, 11).unwrap(), shell.m_value(0, 2).unwrap());
        assert!(big_m(&e, &shell, 5, 5).is_err());
    }

    #[test]
    fn g_index_of_p0_stage_one() {
        let (sys, blocks) = p0();
        let g = GIndex::build(&sys, &blocks, 1).unwrap();
        assert_eq!(g.len(), 4);
        let shells: Vec<u64> = g.entries.iter().map(|(s, _)| *s).collect();
        assert_eq!(shells, vec![3, 3, 4, 4]);
        assert_eq!(g.c_points[0], QVec::from_ints(&[-3, 0, 0]));
        assert_eq!(g.c_points[1], QVec::from_ints(&[3, 0, 0]));
        assert_eq!(g.c_points[2], QVec::from_ints(&[-4, 0, 0]));
        assert_eq!(g.c_points[3], QVec::from_ints(&[4, 0, 0]));
        // norm-monotone in the index
        for w in g.entries.windows(2) {
            assert!(w[0].0 <= w[1].0);
        }
    }

    #[test]
    fn local_targets() {
        let (sys, blocks) = p0();
        let g = GIndex::build(&sys, &blocks, 1).unwrap();
        assert_eq!(
            t_local_target(&blocks, &g, 4).unwrap(),
            QVec::from_ints(&[3, 0, 0])
        );
        let shell = line_shell();
        let e = EIndex::build(&sys, &blocks, &shell, 2).unwrap();
        // x^2_1 = (-4, -1, 0) moves back onto d^2_1 = (-4, 0, 0)
        assert_eq!(
            psi_local_target(&sys, &blocks, &shell, &e, 1).unwrap(),
            QVec::from_ints(&[-4, 0, 0])
        );
    }
}
