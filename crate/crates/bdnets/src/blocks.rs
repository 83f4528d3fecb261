//! Quantized point blocks and the coarse retractions.
//!
//! Stage by stage, `M_n` collects the quantized extensions of the integer
//! vectors of radius `s_n` over stage `n`; `C_n` is the extra shell reached
//! by truncating the next radius, and `D_n = M_n u C_n` sits between `M_n`
//! and `M_{n+1}`. Restriction to stage `n` identifies `M_n` (resp. `D_n`)
//! with the integer ball of radius `s_n` (resp. `s_{n+1}`), and the coarse
//! retraction onto `M_n` is `invert . clamp . restrict` along that table.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use crate::system::BdSystem;
use crate::{Error, QVec, Q, Z};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    M,
    C,
    D,
}

impl BlockKind {
    pub fn label(self) -> &'static str {
        match self {
            BlockKind::M => "M",
            BlockKind::C => "C",
            BlockKind::D => "D",
        }
    }
}

/// One realized block: ambient integer points in canonical (lexicographic)
/// order, plus the bijective identification table keyed by the stage-`n`
/// restriction of each point.
#[derive(Debug, Clone)]
pub struct Block {
    pub stage: usize,
    pub kind: BlockKind,
    pub points: Vec<QVec>,
    by_restriction: BTreeMap<QVec, usize>,
}

impl Block {
    fn new(stage: usize, kind: BlockKind, mut points: Vec<QVec>, sys: &BdSystem) -> Result<Self, Error> {
        points.sort();
        let mut by_restriction = BTreeMap::new();
        for (pos, p) in points.iter().enumerate() {
            let key = sys.restrict(p, stage)?;
            if by_restriction.insert(key, pos).is_some() {
                return Err(Error::Internal(format!(
                    "restriction to stage {stage} is not injective on {}_{stage}",
                    kind.label()
                )));
            }
        }
        Ok(Block { stage, kind, points, by_restriction })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, restricted: &QVec) -> bool {
        self.by_restriction.contains_key(restricted)
    }

    /// The unique block point restricting to `w`; errors when `w` is outside
    /// the identified integer ball.
    pub fn inverse_restriction(&self, w: &QVec) -> Result<&QVec, Error> {
        self.by_restriction
            .get(w)
            .map(|&pos| &self.points[pos])
            .ok_or_else(|| Error::OutsideIdentifiedRange(w.to_string()))
    }

    /// Restrictions of all block points, in table order.
    pub fn restriction_keys(&self) -> impl Iterator<Item = &QVec> {
        self.by_restriction.keys()
    }
}

/// Realized blocks per stage, in dependency order.
#[derive(Debug, Clone)]
pub struct StageBlocks {
    pub m: Block,
    pub c: Option<Block>,
    pub d: Option<Block>,
}

#[derive(Debug, Clone)]
pub struct Blocks {
    per_stage: Vec<StageBlocks>,
    /// Stage at which each realized point first enters the `M`-chain
    /// (points of the realized top shell `C_{n_cap}` enter at `n_cap + 1`).
    stage_of: BTreeMap<QVec, usize>,
}

/// Enumerates the integer vectors over indices `0..dim` with sup-norm in
/// `(lo, hi]` (use `lo = -1` for the full ball), ascending lexicographically.
pub fn integer_shell(dim: u32, lo: &Z, hi: &Z) -> Vec<QVec> {
    let mut out = Vec::new();
    let mut current: Vec<Z> = vec![-hi.clone(); dim as usize];
    if dim == 0 {
        return out;
    }
    'outer: loop {
        let norm = current.iter().map(|c| c.abs()).max().unwrap_or_else(Z::zero);
        if norm <= *hi && norm > *lo {
            out.push(QVec::from_pairs(
                current
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (i as u32, Q::from_integer(c.clone()))),
            ));
        }
        // odometer with the last coordinate fastest keeps the output sorted
        for pos in (0..dim as usize).rev() {
            if current[pos] < *hi {
                current[pos] += Z::one();
                for later in current.iter_mut().skip(pos + 1) {
                    *later = -hi.clone();
                }
                continue 'outer;
            }
        }
        break;
    }
    out
}

/// `(2 hi + 1) ^ dim`, the box size the enumeration would visit.
pub fn predicted_ball_size(dim: u32, hi: &Z) -> Z {
    num_traits::pow(Z::from(2) * hi + Z::one(), dim as usize)
}

fn guard_cap(what: &str, dim: u32, hi: &Z, cap: u64) -> Result<(), Error> {
    let predicted = predicted_ball_size(dim, hi);
    if predicted > Z::from(cap) {
        return Err(Error::CapExceeded {
            what: what.to_string(),
            predicted: predicted.to_string(),
            cap,
        });
    }
    Ok(())
}

impl Blocks {
    /// Materializes `M_1 .. M_{n_cap}` plus `C_n`/`D_n` for every stage whose
    /// shell is realized (`n < n_cap`, and `n = n_cap` too when `top_shell`).
    pub fn build(sys: &BdSystem, n_cap: usize, top_shell: bool, max_block: u64) -> Result<Self, Error> {
        if n_cap == 0 || n_cap > sys.n_max() {
            return Err(Error::StageOutOfRange { stage: n_cap, n_max: sys.n_max() });
        }
        let mut per_stage: Vec<StageBlocks> = Vec::with_capacity(n_cap);
        let mut stage_of = BTreeMap::new();

        for n in 1..=n_cap {
            let dim = sys.chain().size(n)?;
            let s_n = sys.s(n);
            guard_cap(&format!("M_{n}"), dim, &s_n, max_block)?;

            let prev_restrictions: BTreeSet<QVec> = match per_stage.last() {
                Some(prev) => prev
                    .m
                    .points
                    .iter()
                    .map(|p| sys.restrict(p, n))
                    .collect::<Result<_, _>>()?,
                None => BTreeSet::new(),
            };

            let mut points: Vec<QVec> =
                per_stage.last().map(|p| p.m.points.clone()).unwrap_or_default();
            for w in integer_shell(dim, &(-Z::one()), &s_n) {
                if prev_restrictions.contains(&w) {
                    continue;
                }
                let x = sys.extend(n, &w)?.quantize();
                if sys.restrict(&x, n)? != w {
                    return Err(Error::Internal(format!(
                        "extension of stage {n} does not reproduce the ball point {w}"
                    )));
                }
                stage_of.entry(x.clone()).or_insert(n);
                points.push(x);
            }
            let m = Block::new(n, BlockKind::M, points, sys)?;
            per_stage.push(StageBlocks { m, c: None, d: None });
        }

        for n in 1..=n_cap {
            if n < n_cap || top_shell {
                let dim = sys.chain().size(n)?;
                let s_n = sys.s(n);
                let s_next = sys.s(n + 1);
                guard_cap(&format!("C_{n}"), dim, &s_next, max_block)?;
                let mut c_points = Vec::new();
                for w in integer_shell(dim, &s_n, &s_next) {
                    // f . i_{n+1} . f . T_{s_{n+1}} . r_{n+1} . i_n applied to w
                    let u = sys.extend(n, &w)?;
                    let u = sys.restrict(&u, n + 1)?;
                    let u = u.truncate(&sys.s_q(n + 1))?.quantize();
                    let x = sys.extend(n + 1, &u)?.quantize();
                    if sys.restrict(&x, n)? != w {
                        return Err(Error::Internal(format!(
                            "shell construction of stage {n} does not restrict back to {w}"
                        )));
                    }
                    stage_of.entry(x.clone()).or_insert(n + 1);
                    c_points.push(x);
                }
                let c = Block::new(n, BlockKind::C, c_points, sys)?;
                let mut d_points = per_stage[n - 1].m.points.clone();
                d_points.extend(c.points.iter().cloned());
                let d = Block::new(n, BlockKind::D, d_points, sys)?;
                per_stage[n - 1].c = Some(c);
                per_stage[n - 1].d = Some(d);
            }
        }

        Ok(Blocks { per_stage, stage_of })
    }

    pub fn n_cap(&self) -> usize {
        self.per_stage.len()
    }

    pub fn m(&self, n: usize) -> Result<&Block, Error> {
        self.per_stage
            .get(n.wrapping_sub(1))
            .map(|s| &s.m)
            .ok_or(Error::StageOutOfRange { stage: n, n_max: self.n_cap() })
    }

    pub fn c(&self, n: usize) -> Result<&Block, Error> {
        self.per_stage
            .get(n.wrapping_sub(1))
            .and_then(|s| s.c.as_ref())
            .ok_or(Error::StageOutOfRange { stage: n, n_max: self.n_cap() })
    }

    pub fn d(&self, n: usize) -> Result<&Block, Error> {
        self.per_stage
            .get(n.wrapping_sub(1))
            .and_then(|s| s.d.as_ref())
            .ok_or(Error::StageOutOfRange { stage: n, n_max: self.n_cap() })
    }

    pub fn has_shell(&self, n: usize) -> bool {
        self.per_stage.get(n.wrapping_sub(1)).is_some_and(|s| s.c.is_some())
    }

    /// Stage at which a realized point first appears in the chain.
    pub fn stage_of(&self, point: &QVec) -> Result<usize, Error> {
        self.stage_of
            .get(point)
            .copied()
            .ok_or_else(|| Error::UnrealizedPoint(point.to_string()))
    }

    /// All realized points (the top `D` block when the shell is realized,
    /// otherwise the top `M` block).
    pub fn realized(&self) -> &Block {
        let top = self.per_stage.last().unwrap();
        top.d.as_ref().unwrap_or(&top.m)
    }
}

/// Coarse retraction onto `M_n`: invert the identification table after
/// clamping the stage-`n` restriction to radius `s_n`. Defined on every
/// realized point.
pub fn phi(sys: &BdSystem, blocks: &Blocks, n: usize, x: &QVec) -> Result<QVec, Error> {
    let m_n = blocks.m(n)?;
    blocks.stage_of(x)?;
    let w = sys.restrict(x, n)?.truncate(&sys.s_q(n))?;
    Ok(m_n.inverse_restriction(&w)?.clone())
}

/// Intermediate retraction onto `D_{n-1}`: invert the `D_{n-1}` table after
/// restricting to stage `n - 1`. Defined on `M_n`, `n >= 2`.
pub fn psi(sys: &BdSystem, blocks: &Blocks, n: usize, x: &QVec) -> Result<QVec, Error> {
    if n < 2 {
        return Err(Error::StageOutOfRange { stage: n, n_max: blocks.n_cap() });
    }
    let m_n = blocks.m(n)?;
    if m_n.inverse_restriction(&sys.restrict(x, n)?).ok() != Some(x) {
        return Err(Error::NotInBlock { point: x.to_string(), block: "M", stage: n });
    }
    let d_prev = blocks.d(n - 1)?;
    let w = sys.restrict(x, n - 1)?;
    Ok(d_prev.inverse_restriction(&w)?.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{BdSystem, ExtensionSpec, SystemSpec};
    use crate::{q_int, QVec};

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

    #[test]
    fn p0_block_cardinalities() {
        let (_, blocks) = p0();
        assert_eq!(blocks.m(1).unwrap().len(), 5);
        assert_eq!(blocks.c(1).unwrap().len(), 4);
        assert_eq!(blocks.d(1).unwrap().len(), 9);
        assert_eq!(blocks.m(2).unwrap().len(), 81);
    }

    #[test]
    fn shell_enumeration_is_sorted_and_complete() {
        let pts = integer_shell(2, &Z::from(-1), &Z::from(1));
        assert_eq!(pts.len(), 9);
        let mut sorted = pts.clone();
        sorted.sort();
        assert_eq!(pts, sorted);
        let shell = integer_shell(2, &Z::from(0), &Z::from(1));
        assert_eq!(shell.len(), 8);
        assert_eq!(predicted_ball_size(2, &Z::from(1)), Z::from(9));
    }

    #[test]
    fn inverse_restriction_examples() {
        let (_, blocks) = p0();
        let m2 = blocks.m(2).unwrap();
        let w = QVec::from_ints(&[3, -1]);
        assert_eq!(*m2.inverse_restriction(&w).unwrap(), QVec::from_ints(&[3, -1, 0]));
        let d1 = blocks.d(1).unwrap();
        assert_eq!(
            *d1.inverse_restriction(&QVec::from_ints(&[4])).unwrap(),
            QVec::from_ints(&[4, 0, 0])
        );
        assert!(d1.inverse_restriction(&QVec::from_ints(&[5])).is_err());
    }

    #[test]
    fn phi_retracts_onto_m1() {
        let (sys, blocks) = p0();
        let x = QVec::from_ints(&[4, 3, 0]);
        assert_eq!(phi(&sys, &blocks, 1, &x).unwrap(), QVec::from_ints(&[2, 0, 0]));
        for p in &blocks.m(1).unwrap().points {
            assert_eq!(phi(&sys, &blocks, 1, p).unwrap(), p.clone());
        }
        assert!(phi(&sys, &blocks, 1, &QVec::from_ints(&[9, 9, 9])).is_err());
    }

    #[test]
    fn psi_retracts_onto_d1() {
        let (sys, blocks) = p0();
        let x = QVec::from_ints(&[4, 2, 0]);
        assert_eq!(psi(&sys, &blocks, 2, &x).unwrap(), QVec::from_ints(&[4, 0, 0]));
        for p in &blocks.d(1).unwrap().points {
            assert_eq!(psi(&sys, &blocks, 2, p).unwrap(), p.clone());
        }
    }

    #[test]
    fn c1_is_disjoint_from_m1_and_inside_m2() {
        let (sys, blocks) = p0();
        let m1 = blocks.m(1).unwrap();
        let m2 = blocks.m(2).unwrap();
        for c in &blocks.c(1).unwrap().points {
            let r1 = sys.restrict(c, 1).unwrap();
            assert!(!m1.contains(&r1));
            assert!(m2.contains(&sys.restrict(c, 2).unwrap()));
            assert!(c.sup_norm() >= q_int(3));
        }
    }

    #[test]
    fn cap_guard_trips() {
        let sys = BdSystem::build(&SystemSpec {
            stage_sizes: vec![1, 2, 3],
            lambda_bar: 2,
            extension: ExtensionSpec::Zero,
            n_max: None,
        })
        .unwrap();
        match Blocks::build(&sys, 2, false, 10) {
            Err(Error::CapExceeded { what, predicted, cap: 10 }) => {
                assert_eq!(what, "M_2");
                assert_eq!(predicted, "81");
            }
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }
}
