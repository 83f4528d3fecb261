//! Global one-point order and the commuting family of global retractions.
//!
//! The realized points are listed segment by segment: the first block with
//! the origin first, then alternately each realized shell and each fresh
//! increment, in their own orders. The listing has the prefix property that
//! the first `#M_n` points are exactly `M_n` and the first `#D_n` points are
//! exactly `D_n`, so membership tests are index comparisons and every
//! retraction is realized as an index table over a prefix.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use crate::blocks::Blocks;
use crate::fine::{psi_local_target, t_local_target, EIndex, GIndex, ShellOrder};
use crate::metric::DistMatrix;
use crate::system::{BdSystem, SystemSpec};
use crate::{Error, QVec, Z};

/// Which segment of the global order an index belongs to; `i` is 1-based
/// within the segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentRef {
    /// Point of the first block.
    First { i: usize },
    /// Point of the realized shell `C_n`.
    Shell { n: usize, i: usize },
    /// Point of `M_n \ D_{n-1}`, `n >= 2`.
    Fresh { n: usize, i: usize },
}

impl SegmentRef {
    pub fn label(&self) -> String {
        match self {
            SegmentRef::First { .. } => "M1".to_string(),
            SegmentRef::Shell { n, .. } => format!("C{n}"),
            SegmentRef::Fresh { n, .. } => format!("M{n}\\D{}", n - 1),
        }
    }
}

/// The bijective listing of the realized points.
#[derive(Debug, Clone)]
pub struct GlobalOrder {
    pub points: Vec<QVec>,
    index_of: BTreeMap<QVec, usize>,
    pub segments: Vec<SegmentRef>,
    /// `m_end[n-1]` = number of points of `M_n`, as a prefix length.
    pub m_end: Vec<usize>,
    /// `d_end[n-1]` = number of points of `D_n`, for realized shells.
    pub d_end: Vec<Option<usize>>,
}

impl GlobalOrder {
    /// 0-based position of a realized point.
    pub fn index_of(&self, p: &QVec) -> Result<usize, Error> {
        self.index_of
            .get(p)
            .copied()
            .ok_or_else(|| Error::UnrealizedPoint(p.to_string()))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Index tables realizing every retraction of the construction. Entries are
/// 0-based positions in the global order; a table of length `L` is a map
/// defined on the prefix of the first `L` points.
#[derive(Debug, Clone)]
pub struct Tables {
    /// Coarse retractions onto `M_n` (`n = 1..=n_cap`), defined everywhere.
    pub phi_n: Vec<Vec<u32>>,
    /// Intermediate retractions onto `D_{n-1}` (`n >= 2`), defined on `M_n`.
    pub psi_n: BTreeMap<usize, Vec<u32>>,
    /// Local one-point retractions of stage `n`, `i = 1..=i(n)`.
    pub psi_local: BTreeMap<usize, Vec<Vec<u32>>>,
    /// Intermediate runs of stage `n`, `l = 0..=i(n)` (`l = i(n)` is the
    /// identity).
    pub psi_int: BTreeMap<usize, Vec<Vec<u32>>>,
    /// Local shell retractions of stage `n`, `i = 1..=c(n)`, on `D_n`.
    pub t_local: BTreeMap<usize, Vec<Vec<u32>>>,
    /// Shell runs of stage `n`, `l = 0..=c(n)`, on `D_n`.
    pub phi_int: BTreeMap<usize, Vec<Vec<u32>>>,
    /// Global retractions onto the first `i` points, `i = 1..=len`.
    pub varphi: Vec<Vec<u32>>,
}

/// Realization depth and caps.
#[derive(Debug, Clone)]
pub struct BuildParams {
    /// Blocks are materialized through stage `n_cap <= N_max`.
    pub n_cap: usize,
    /// Also realize the top shell `C_{n_cap}` (the chain is frozen above the
    /// final stage, so the maps referencing stage `n_cap + 1` restrict to
    /// the identity on every realized point).
    pub top_shell: bool,
    pub max_block: u64,
}

/// Everything the verification suites consume: system, blocks, fine orders,
/// the global listing, all retraction tables and the exact distance matrix.
pub struct Construction {
    pub sys: BdSystem,
    pub blocks: Blocks,
    pub shells: BTreeMap<usize, ShellOrder>,
    pub e: BTreeMap<usize, EIndex>,
    pub g: BTreeMap<usize, GIndex>,
    pub order: GlobalOrder,
    pub tables: Tables,
    pub dist: DistMatrix,
    pub params: BuildParams,
}

impl Construction {
    pub fn build(spec: &SystemSpec, params: BuildParams) -> Result<Self, Error> {
        let sys = BdSystem::build(spec)?;
        let blocks = Blocks::build(&sys, params.n_cap, params.top_shell, params.max_block)?;

        let mut shells = BTreeMap::new();
        let mut e = BTreeMap::new();
        for n in 2..=params.n_cap {
            let bound = (Z::from(2) * sys.s(n)).to_u64().ok_or_else(|| Error::CapExceeded {
                what: format!("shell order of stage {n}"),
                predicted: (Z::from(2) * sys.s(n)).to_string(),
                cap: params.max_block,
            })?;
            let shell = ShellOrder::build(n, sys.chain().delta(n)?, bound, params.max_block)?;
            e.insert(n, EIndex::build(&sys, &blocks, &shell, n)?);
            shells.insert(n, shell);
        }
        let mut g = BTreeMap::new();
        for n in 1..=params.n_cap {
            if blocks.has_shell(n) {
                g.insert(n, GIndex::build(&sys, &blocks, n)?);
            }
        }

        let order = build_order(&blocks, &e, &g, &params)?;
        let tables = build_tables(&sys, &blocks, &shells, &e, &g, &order, &params)?;
        let dist = DistMatrix::build(&order.points);
        Ok(Construction { sys, blocks, shells, e, g, order, tables, dist, params })
    }

    /// The projection of a realized point into the ambient space: extend its
    /// restriction at the stage where it first appears. Within sup-distance
    /// one of the point.
    pub fn rho(&self, p: &QVec) -> Result<QVec, Error> {
        let n = self.blocks.stage_of(p)?;
        self.sys.extend(n, &self.sys.restrict(p, n)?)
    }

    /// Exhaustively computed constant bound of the whole family:
    /// `max((2L^2+4L+4)(L^2+2L+2)(3L+2), (3L+2)^2 (3L^2+6L+11), L^2)`.
    pub fn k_global(&self) -> Z {
        k_global(self.sys.lambda_bar())
    }
}

/// The uniform global Lipschitz bound in terms of the integer norm bound.
pub fn k_global(lambda_bar: u32) -> Z {
    let l = Z::from(lambda_bar);
    let a = (Z::from(2) * &l * &l + Z::from(4) * &l + Z::from(4))
        * (&l * &l + Z::from(2) * &l + Z::from(2))
        * (Z::from(3) * &l + Z::from(2));
    let b = num_traits::pow(Z::from(3) * &l + Z::from(2), 2)
        * (Z::from(3) * &l * &l + Z::from(6) * &l + Z::from(11));
    let c = &l * &l;
    a.max(b).max(c)
}

fn build_order(
    blocks: &Blocks,
    e: &BTreeMap<usize, EIndex>,
    g: &BTreeMap<usize, GIndex>,
    params: &BuildParams,
) -> Result<GlobalOrder, Error> {
    let mut points: Vec<QVec> = Vec::new();
    let mut segments = Vec::new();
    let mut m_end = Vec::new();
    let mut d_end = Vec::new();

    // first block: origin first, the rest in canonical order
    let m1 = blocks.m(1)?;
    let origin = QVec::zero();
    if !m1.points.contains(&origin) {
        return Err(Error::Internal("the origin is not a realized point of the first block".into()));
    }
    points.push(origin.clone());
    segments.push(SegmentRef::First { i: 1 });
    for p in &m1.points {
        if *p != origin {
            segments.push(SegmentRef::First { i: points.len() + 1 });
            points.push(p.clone());
        }
    }
    m_end.push(points.len());

    for n in 1..=params.n_cap {
        if let Some(gn) = g.get(&n) {
            for (i, c) in gn.c_points.iter().enumerate() {
                segments.push(SegmentRef::Shell { n, i: i + 1 });
                points.push(c.clone());
            }
            d_end.push(Some(points.len()));
        } else {
            d_end.push(None);
        }
        if let Some(en) = e.get(&(n + 1)) {
            for (i, x) in en.x_points.iter().enumerate() {
                segments.push(SegmentRef::Fresh { n: n + 1, i: i + 1 });
                points.push(x.clone());
            }
            m_end.push(points.len());
        }
    }

    let realized = blocks.realized();
    if points.len() != realized.len() {
        return Err(Error::Internal(format!(
            "global order lists {} points, the realized set has {}",
            points.len(),
            realized.len()
        )));
    }
    let mut index_of = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        if index_of.insert(p.clone(), i).is_some() {
            return Err(Error::Internal("global order repeats a point".into()));
        }
    }
    // prefix property: the first #M_n points are exactly M_n, likewise D_n
    for n in 1..=params.n_cap {
        let end = m_end[n - 1];
        for p in &blocks.m(n)?.points {
            if index_of[p] >= end {
                return Err(Error::Internal(format!(
                    "prefix property fails: a point of M_{n} sits past position {end}"
                )));
            }
        }
        if let Some(Some(end)) = d_end.get(n - 1) {
            for p in &blocks.d(n)?.points {
                if index_of[p] >= *end {
                    return Err(Error::Internal(format!(
                        "prefix property fails: a point of D_{n} sits past position {end}"
                    )));
                }
            }
        }
    }

    Ok(GlobalOrder { points, index_of, segments, m_end, d_end })
}

fn build_tables(
    sys: &BdSystem,
    blocks: &Blocks,
    shells: &BTreeMap<usize, ShellOrder>,
    e: &BTreeMap<usize, EIndex>,
    g: &BTreeMap<usize, GIndex>,
    order: &GlobalOrder,
    params: &BuildParams,
) -> Result<Tables, Error> {
    let len = order.len();
    let n_cap = params.n_cap;

    // coarse retractions, defined on every realized point
    let mut phi_n = Vec::with_capacity(n_cap);
    for n in 1..=n_cap {
        let m_n = blocks.m(n)?;
        let s_n = sys.s_q(n);
        let mut table = Vec::with_capacity(len);
        for p in &order.points {
            let w = sys.restrict(p, n)?.truncate(&s_n)?;
            table.push(order.index_of(m_n.inverse_restriction(&w)?)? as u32);
        }
        phi_n.push(table);
    }

    // intermediate retractions onto D_{n-1}, defined on the M_n prefix
    let mut psi_n = BTreeMap::new();
    for n in 2..=n_cap {
        let d_prev = blocks.d(n - 1)?;
        let mut table = Vec::with_capacity(order.m_end[n - 1]);
        for p in &order.points[..order.m_end[n - 1]] {
            let w = sys.restrict(p, n - 1)?;
            table.push(order.index_of(d_prev.inverse_restriction(&w)?)? as u32);
        }
        psi_n.insert(n, table);
    }

    // local and intermediate one-point runs per fresh stage
    let mut psi_local = BTreeMap::new();
    let mut psi_int = BTreeMap::new();
    for (&n, en) in e {
        let prefix = order.m_end[n - 1];
        let shell = &shells[&n];
        let mut locals = Vec::with_capacity(en.len());
        for i in 1..=en.len() {
            let mut t: Vec<u32> = (0..prefix as u32).collect();
            let from = order.index_of(&en.x_points[i - 1])?;
            t[from] = order.index_of(&psi_local_target(sys, blocks, shell, en, i)?)? as u32;
            locals.push(t);
        }
        let mut runs = vec![Vec::new(); en.len() + 1];
        runs[en.len()] = (0..prefix as u32).collect();
        for l in (0..en.len()).rev() {
            let next = &runs[l + 1];
            runs[l] = next.iter().map(|&v| locals[l][v as usize]).collect();
        }
        psi_local.insert(n, locals);
        psi_int.insert(n, runs);
    }

    // local and intermediate shell runs per realized shell
    let mut t_local = BTreeMap::new();
    let mut phi_int = BTreeMap::new();
    for (&n, gn) in g {
        let prefix = order.d_end[n - 1].ok_or_else(|| {
            Error::Internal(format!("shell of stage {n} realized without a D prefix"))
        })?;
        let mut locals = Vec::with_capacity(gn.len());
        for i in 1..=gn.len() {
            let mut t: Vec<u32> = (0..prefix as u32).collect();
            let from = order.index_of(&gn.c_points[i - 1])?;
            t[from] = order.index_of(&t_local_target(blocks, gn, i)?)? as u32;
            locals.push(t);
        }
        let mut runs = vec![Vec::new(); gn.len() + 1];
        runs[gn.len()] = (0..prefix as u32).collect();
        for l in (0..gn.len()).rev() {
            let next = &runs[l + 1];
            runs[l] = next.iter().map(|&v| locals[l][v as usize]).collect();
        }
        t_local.insert(n, locals);
        phi_int.insert(n, runs);
    }

    // global retractions, one per prefix length
    let mut varphi = Vec::with_capacity(len);
    for i in 1..=len {
        let table: Vec<u32> = match order.segments[i - 1] {
            SegmentRef::First { .. } => {
                (0..len).map(|x| if x < i { x as u32 } else { 0 }).collect()
            }
            SegmentRef::Shell { n, i: l } => {
                // run the shell chain after retracting through stage n + 1;
                // above the realized cap both steps restrict to the identity
                let run = &phi_int[&n][l];
                (0..len)
                    .map(|x| {
                        let v = if n + 1 <= n_cap { phi_n[n][x] } else { x as u32 };
                        let v = if n + 1 <= n_cap { psi_n[&(n + 1)][v as usize] } else { v };
                        run[v as usize]
                    })
                    .collect()
            }
            SegmentRef::Fresh { n, i: l } => {
                let run = &psi_int[&n][l];
                (0..len).map(|x| run[phi_n[n - 1][x] as usize]).collect()
            }
        };
        varphi.push(table);
    }

    Ok(Tables { phi_n, psi_n, psi_local, psi_int, t_local, phi_int, varphi })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::system::ExtensionSpec;
    use crate::QVec;

    pub(crate) fn p0_construction() -> Construction {
        let spec = SystemSpec {
            stage_sizes: vec![1, 2, 3],
            lambda_bar: 2,
            extension: ExtensionSpec::Zero,
            n_max: Some(3),
        };
        Construction::build(
            &spec,
            BuildParams { n_cap: 2, top_shell: false, max_block: 1_000_000 },
        )
        .unwrap()
    }

    #[test]
    fn p0_segment_boundaries() {
        let c = p0_construction();
        assert_eq!(c.order.len(), 81);
        assert_eq!(c.order.m_end, vec![5, 81]);
        assert_eq!(c.order.d_end, vec![Some(9), None]);
        assert_eq!(c.order.points[0], QVec::zero());
        // shell points occupy positions 6..9 (1-based), fresh points 10..81
        for i in 5..9 {
            assert!(matches!(c.order.segments[i], SegmentRef::Shell { n: 1, .. }));
        }
        for i in 9..81 {
            assert!(matches!(c.order.segments[i], SegmentRef::Fresh { n: 2, .. }));
        }
    }

    #[test]
    fn varphi_is_a_retraction_onto_each_prefix() {
        let c = p0_construction();
        for (i_pos, table) in c.tables.varphi.iter().enumerate() {
            for (x, &v) in table.iter().enumerate() {
                assert!((v as usize) <= i_pos, "image outside the prefix at {i_pos}");
                if x <= i_pos {
                    assert_eq!(v as usize, x, "prefix point moved at {i_pos}");
                }
            }
        }
    }

    #[test]
    fn varphi_first_block_collapses_to_origin() {
        let c = p0_construction();
        // an index inside the first block sends everything outside its
        // prefix to the origin
        let i = 3;
        let table = &c.tables.varphi[i - 1];
        for x in i..c.order.len() {
            assert_eq!(table[x], 0);
        }
    }

    #[test]
    fn top_retraction_is_the_identity() {
        let c = p0_construction();
        let top = c.tables.varphi.last().unwrap();
        for (x, &v) in top.iter().enumerate() {
            assert_eq!(v as usize, x);
        }
    }

    #[test]
    fn rho_fixes_integer_points_of_the_zero_preset() {
        let c = p0_construction();
        for p in &c.order.points {
            assert_eq!(c.rho(p).unwrap(), p.clone());
        }
    }

    #[test]
    fn k_global_for_lambda_two() {
        assert_eq!(k_global(2), Z::from(2240));
        assert_eq!(k_global(1), Z::from(500));
    }
}
