//! Exact free-space computations over the realized finite pointed metric
//! space.
//!
//! A molecule is a finitely supported rational coefficient vector over the
//! points, with the base-point coefficient normalized away. Its norm is the
//! optimal value of the balanced transport problem in which the base point
//! absorbs the imbalance; every solve is certified by an independently
//! solved dual program (the best 1-Lipschitz test function vanishing at the
//! base point), and the two exact optima must coincide.

pub mod simplex;
pub mod transport;

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand_core::{RngCore, SeedableRng};

use crate::metric::DistMatrix;
use crate::{Error, Q, QVec};

use simplex::{maximize, LpProblem};
use transport::min_cost_transport;

/// A finite pointed metric space: exact distances plus the base point.
pub struct FiniteMetric {
    pub dist: DistMatrix,
    pub base: usize,
}

impl FiniteMetric {
    /// Validates the metric axioms exactly before accepting the space.
    pub fn new(points: &[QVec], base: usize) -> Result<Self, Error> {
        if base >= points.len() {
            return Err(Error::UnsupportedPoint(base));
        }
        let dist = DistMatrix::build(points);
        dist.validate_metric()?;
        Ok(FiniteMetric { dist, base })
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }
}

/// Finitely supported rational coefficients over the points; the base-point
/// coefficient is dropped at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    coeffs: BTreeMap<usize, Q>,
}

impl Molecule {
    pub fn normalized<I: IntoIterator<Item = (usize, Q)>>(base: usize, pairs: I) -> Self {
        let mut coeffs = BTreeMap::new();
        for (x, a) in pairs {
            if x == base {
                continue;
            }
            let entry = coeffs.entry(x).or_insert_with(Q::zero);
            *entry += a;
        }
        coeffs.retain(|_, a| !a.is_zero());
        Molecule { coeffs }
    }

    pub fn delta(base: usize, x: usize) -> Self {
        Molecule::normalized(base, [(x, Q::from_integer(1.into()))])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Q)> {
        self.coeffs.iter().map(|(&x, a)| (x, a))
    }

    pub fn sub(&self, other: &Molecule) -> Molecule {
        let mut coeffs = self.coeffs.clone();
        for (&x, a) in &other.coeffs {
            let entry = coeffs.entry(x).or_insert_with(Q::zero);
            *entry -= a;
        }
        coeffs.retain(|_, a| !a.is_zero());
        Molecule { coeffs }
    }

    pub fn add(&self, other: &Molecule) -> Molecule {
        let mut coeffs = self.coeffs.clone();
        for (&x, a) in &other.coeffs {
            let entry = coeffs.entry(x).or_insert_with(Q::zero);
            *entry += a;
        }
        coeffs.retain(|_, a| !a.is_zero());
        Molecule { coeffs }
    }

    pub fn scale(&self, q: &Q) -> Molecule {
        if q.is_zero() {
            return Molecule { coeffs: BTreeMap::new() };
        }
        Molecule { coeffs: self.coeffs.iter().map(|(&x, a)| (x, a * q)).collect() }
    }
}

/// Exact norm value with both optimality certificates: the routed transport
/// plan and the optimal 1-Lipschitz potential.
#[derive(Debug, Clone)]
pub struct NormCertificate {
    pub value: Q,
    /// `(from point, to point, amount)` of the optimal plan.
    pub plan: Vec<(usize, usize, Q)>,
    /// Optimal test-function values on the support (zero at the base).
    pub potential: Vec<(usize, Q)>,
}

/// Exact free-space norm of a molecule: the balanced min-cost transport
/// value, certified against the independently solved dual program. The two
/// optima disagreeing is an implementation bug and reported as a hard error.
pub fn free_norm(metric: &FiniteMetric, m: &Molecule) -> Result<NormCertificate, Error> {
    for x in m.support() {
        if x >= metric.len() {
            return Err(Error::UnsupportedPoint(x));
        }
    }
    if m.is_zero() {
        return Ok(NormCertificate { value: Q::zero(), plan: Vec::new(), potential: Vec::new() });
    }

    // balanced signed measure: the base point absorbs the total mass
    let mut balance: BTreeMap<usize, Q> = m.coeffs.clone();
    let total: Q = m.coeffs.values().cloned().sum();
    if !total.is_zero() {
        balance.insert(metric.base, -total);
    }
    let supplies: Vec<(usize, Q)> = balance
        .iter()
        .filter(|(_, a)| a.is_positive())
        .map(|(&x, a)| (x, a.clone()))
        .collect();
    let demands: Vec<(usize, Q)> = balance
        .iter()
        .filter(|(_, a)| a.is_negative())
        .map(|(&x, a)| (x, -a.clone()))
        .collect();
    let (primal, arcs) = min_cost_transport(&supplies, &demands, |x, y| {
        metric.dist.get(x, y).clone()
    })?;
    let plan: Vec<(usize, usize, Q)> = arcs
        .into_iter()
        .map(|arc| (supplies[arc.from].0, demands[arc.to].0, arc.amount))
        .collect();

    // dual route: maximize sum a_x u(x) over 1-Lipschitz u with u(base) = 0
    let vars: Vec<usize> = m.support().collect();
    let var_pos: BTreeMap<usize, usize> = vars.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut rows = Vec::new();
    let nodes: Vec<usize> = vars.iter().copied().chain([metric.base]).collect();
    for &x in &nodes {
        for &y in &nodes {
            if x == y {
                continue;
            }
            let mut row = vec![Q::zero(); vars.len()];
            if x != metric.base {
                row[var_pos[&x]] += Q::from_integer(1.into());
            }
            if y != metric.base {
                row[var_pos[&y]] -= Q::from_integer(1.into());
            }
            rows.push((row, metric.dist.get(x, y).clone()));
        }
    }
    let objective: Vec<Q> = vars.iter().map(|x| m.coeffs[x].clone()).collect();
    let dual = maximize(&LpProblem { objective, rows })?;

    // strong duality is the correctness certificate for both routes
    if dual.value != primal {
        return Err(Error::Internal(format!(
            "transport value {} and dual value {} disagree",
            crate::fmt_q(&primal),
            crate::fmt_q(&dual.value)
        )));
    }
    for &x in &nodes {
        for &y in &nodes {
            if x == y {
                continue;
            }
            let ux = var_pos.get(&x).map_or_else(Q::zero, |&i| dual.x[i].clone());
            let uy = var_pos.get(&y).map_or_else(Q::zero, |&i| dual.x[i].clone());
            if ux - uy > *metric.dist.get(x, y) {
                return Err(Error::Internal("dual optimum is not 1-Lipschitz".into()));
            }
        }
    }

    Ok(NormCertificate {
        value: primal,
        plan,
        potential: vars.iter().enumerate().map(|(i, &x)| (x, dual.x[i].clone())).collect(),
    })
}

/// Linearized map: send each point mass through the table and merge
/// coefficients. The map must fix the base point.
pub fn pushforward(table: &[u32], base: usize, m: &Molecule) -> Result<Molecule, Error> {
    if table[base] as usize != base {
        return Err(Error::BaseMoved);
    }
    let mut pairs = Vec::new();
    for (x, a) in m.iter() {
        if x >= table.len() {
            return Err(Error::UnsupportedPoint(x));
        }
        pairs.push((table[x] as usize, a.clone()));
    }
    Ok(Molecule::normalized(base, pairs))
}

/// Deterministic sample plan: elementary molecules on a prefix, point-mass
/// differences on seeded pairs, and seeded rational combinations.
#[derive(Debug, Clone)]
pub struct SamplePlan {
    pub deltas: usize,
    pub pairs: usize,
    pub randoms: usize,
    pub max_support: usize,
    pub seed: u64,
}

pub fn sample_molecules(metric: &FiniteMetric, plan: &SamplePlan) -> Vec<Molecule> {
    let len = metric.len();
    let base = metric.base;
    let mut out = Vec::new();
    let mut non_base = (0..len).filter(|&x| x != base);
    for x in non_base.by_ref().take(plan.deltas) {
        out.push(Molecule::delta(base, x));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(plan.seed);
    let pick = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| (rng.next_u64() % n as u64) as usize;
    for _ in 0..plan.pairs {
        let x = pick(&mut rng, len);
        let y = pick(&mut rng, len);
        if x == y {
            continue;
        }
        out.push(Molecule::delta(base, x).sub(&Molecule::delta(base, y)));
    }
    for _ in 0..plan.randoms {
        let support = 2 + pick(&mut rng, plan.max_support.max(2) - 1);
        let mut pairs = Vec::new();
        for _ in 0..support {
            let x = pick(&mut rng, len);
            let num = pick(&mut rng, 19) as i64 - 9;
            let den = 1 + pick(&mut rng, 4) as i64;
            if num != 0 {
                pairs.push((x, crate::q_ratio(num, den)));
            }
        }
        let m = Molecule::normalized(base, pairs);
        if !m.is_zero() {
            out.push(m);
        }
    }
    out
}

/// One row of the projection report.
#[derive(Debug, Clone)]
pub struct FreeRow {
    pub molecule: usize,
    /// 1-based prefix index of the projection.
    pub index: usize,
    pub norm_m: Q,
    pub norm_pm: Q,
    pub residual: Q,
}

/// Result of the projection suite over sampled molecules.
#[derive(Debug, Clone)]
pub struct FreeReport {
    pub rows: Vec<FreeRow>,
    pub molecule_norms: Vec<Q>,
    /// Largest observed `|P_i m| / |m|` over nonzero samples.
    pub max_ratio: Q,
    /// Number of exact norm solves performed (each one duality-certified).
    pub solves: usize,
    /// Projection pairs checked for `P_i P_j = P_min` as molecules.
    pub commutation_pairs: usize,
    /// Largest residual at the top index (must be zero).
    pub top_residual: Q,
}

/// Runs the projection checks for the sampled molecules over the given
/// 1-based prefix indices: norms of projections, residuals, commutation on
/// molecule level, and the final-index residual.
pub fn basis_check(
    metric: &FiniteMetric,
    varphi: &[Vec<u32>],
    molecules: &[Molecule],
    prefix_indices: &[usize],
) -> Result<FreeReport, Error> {
    let base = metric.base;
    let mut rows = Vec::new();
    let mut molecule_norms = Vec::new();
    let mut solves = 0usize;
    let mut max_ratio = Q::zero();
    let mut top_residual = Q::zero();
    let top = varphi.len();

    for (mi, m) in molecules.iter().enumerate() {
        let norm_m = free_norm(metric, m)?;
        solves += 1;
        molecule_norms.push(norm_m.value.clone());
        for &i in prefix_indices {
            if i < 1 || i > top {
                return Err(Error::IndexOutOfRange { what: "prefix index".into(), index: i });
            }
            let pm = pushforward(&varphi[i - 1], base, m)?;
            let norm_pm = free_norm(metric, &pm)?;
            solves += 1;
            let residual = free_norm(metric, &pm.sub(m))?;
            solves += 1;
            if !norm_m.value.is_zero() {
                let ratio = &norm_pm.value / &norm_m.value;
                if ratio > max_ratio {
                    max_ratio = ratio;
                }
            }
            if i == top && residual.value > top_residual {
                top_residual = residual.value.clone();
            }
            rows.push(FreeRow {
                molecule: mi,
                index: i,
                norm_m: norm_m.value.clone(),
                norm_pm: norm_pm.value,
                residual: residual.value,
            });
        }
    }

    // commutation transported by linearity, on molecule level
    let mut commutation_pairs = 0usize;
    for (mi, m) in molecules.iter().enumerate().take(8) {
        let _ = mi;
        for (a, &i1) in prefix_indices.iter().enumerate() {
            for &i2 in &prefix_indices[a..] {
                let lhs = pushforward(
                    &varphi[i1 - 1],
                    base,
                    &pushforward(&varphi[i2 - 1], base, m)?,
                )?;
                let rhs = pushforward(&varphi[i1.min(i2) - 1], base, m)?;
                if lhs != rhs {
                    return Err(Error::Internal(format!(
                        "projections at {i1} and {i2} do not commute on sample molecule"
                    )));
                }
                commutation_pairs += 1;
            }
        }
    }

    Ok(FreeReport { rows, molecule_norms, max_ratio, solves, commutation_pairs, top_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{q_int, q_ratio, QVec};

    fn three_point_metric() -> FiniteMetric {
        // base, a point at distance 1, a point at distance 2 (collinear)
        let pts = vec![QVec::zero(), QVec::from_ints(&[1]), QVec::from_ints(&[2])];
        FiniteMetric::new(&pts, 0).unwrap()
    }

    #[test]
    fn elementary_molecule_norms() {
        let metric = three_point_metric();
        let d1 = free_norm(&metric, &Molecule::delta(0, 1)).unwrap();
        assert_eq!(d1.value, q_int(1));
        let d2 = free_norm(&metric, &Molecule::delta(0, 2)).unwrap();
        assert_eq!(d2.value, q_int(2));
        let diff = Molecule::delta(0, 1).sub(&Molecule::delta(0, 2));
        assert_eq!(free_norm(&metric, &diff).unwrap().value, q_int(1));
    }

    #[test]
    fn mixed_sign_three_point_value() {
        // d(0,a) = 1, d(0,b) = 2, d(a,b) = 1; molecule 2 delta_a - 3 delta_b:
        // route 2 units a -> b (cost 2) and 1 unit base -> b (cost 2).
        let metric = three_point_metric();
        let m = Molecule::normalized(0, [(1, q_int(2)), (2, q_int(-3))]);
        let cert = free_norm(&metric, &m).unwrap();
        assert_eq!(cert.value, q_int(4));
        let routed: Q = cert.plan.iter().map(|(_, _, q)| q.clone()).sum();
        assert_eq!(routed, q_int(3));
    }

    #[test]
    fn norm_axioms_on_a_sample() {
        let metric = three_point_metric();
        let m = Molecule::normalized(0, [(1, q_ratio(3, 2)), (2, q_int(-1))]);
        let norm = free_norm(&metric, &m).unwrap().value;
        let scaled = free_norm(&metric, &m.scale(&q_ratio(-7, 3))).unwrap().value;
        assert_eq!(scaled, norm.clone() * q_ratio(7, 3));
        let w = Molecule::delta(0, 2);
        let sum_norm = free_norm(&metric, &m.add(&w)).unwrap().value;
        assert!(sum_norm <= norm + free_norm(&metric, &w).unwrap().value);
    }

    #[test]
    fn pushforward_merges_and_guards_base() {
        let m = Molecule::normalized(0, [(1, q_int(1)), (2, q_int(1))]);
        let table = vec![0u32, 2, 2];
        let pm = pushforward(&table, 0, &m).unwrap();
        assert_eq!(pm, Molecule::normalized(0, [(2, q_int(2))]));
        // collapsing onto the base point vanishes
        let collapse = vec![0u32, 0, 0];
        assert!(pushforward(&collapse, 0, &m).unwrap().is_zero());
        let moved = vec![1u32, 1, 2];
        assert!(matches!(pushforward(&moved, 0, &m), Err(Error::BaseMoved)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let metric = three_point_metric();
        let plan = SamplePlan { deltas: 2, pairs: 3, randoms: 4, max_support: 3, seed: 11 };
        let a = sample_molecules(&metric, &plan);
        let b = sample_molecules(&metric, &plan);
        assert_eq!(a, b);
        assert!(a.len() >= 4);
    }
}
