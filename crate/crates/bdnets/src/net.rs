//! Greedy net extraction and the perturbation making the quantized set a
//! separated net.
//!
//! The realized points are projected into the ambient space, the projection
//! set is decomposed greedily into clusters of radius `a` around
//! representatives that are pairwise more than `a` apart, and each cluster
//! preimage is spread out by scaled points of a separated grid family. The
//! resulting bijection moves no point farther than `a + 1 + 3a/8`, and its
//! image is `(a/4)`-separated.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::assembly::Construction;
use crate::lipschitz::LipschitzReport;
use crate::metric::DistMatrix;
use crate::{fmt_q, q_ratio, Error, QVec, Q, Z};

/// Greedy cluster decomposition of the projected realized points.
#[derive(Debug, Clone)]
pub struct ClusterDecomposition {
    pub a: Q,
    /// Projection of each realized point, parallel to the global order.
    pub rho_points: Vec<QVec>,
    /// The projection set, canonical order, deduplicated.
    pub rho_set: Vec<QVec>,
    /// Cluster representatives, in extraction order.
    pub reps: Vec<QVec>,
    /// Members of each cluster as positions into `rho_set`.
    pub clusters: Vec<Vec<usize>>,
    /// For each position of `rho_set`, its cluster.
    pub cluster_of: Vec<usize>,
}

/// Greedy extraction: walk the projection set in canonical order; each not
/// yet covered point becomes a representative and absorbs everything still
/// uncovered within distance `a`.
pub fn extract_net(cons: &Construction, a: &Q) -> Result<ClusterDecomposition, Error> {
    if *a <= Q::one() {
        return Err(Error::NetParameter(fmt_q(a)));
    }
    let rho_points: Vec<QVec> = cons
        .order
        .points
        .iter()
        .map(|p| cons.rho(p))
        .collect::<Result<_, _>>()?;
    let mut rho_set: Vec<QVec> = rho_points.clone();
    rho_set.sort();
    rho_set.dedup();

    let mut cluster_of = vec![usize::MAX; rho_set.len()];
    let mut reps = Vec::new();
    let mut clusters = Vec::new();
    for first in 0..rho_set.len() {
        if cluster_of[first] != usize::MAX {
            continue;
        }
        let k = reps.len();
        let rep = rho_set[first].clone();
        let mut members = Vec::new();
        for (j, q) in rho_set.iter().enumerate() {
            if cluster_of[j] == usize::MAX && rep.dist(q) <= *a {
                cluster_of[j] = k;
                members.push(j);
            }
        }
        reps.push(rep);
        clusters.push(members);
    }
    Ok(ClusterDecomposition { a: a.clone(), rho_points, rho_set, reps, clusters, cluster_of })
}

/// The perturbed net: the bijective image of the realized points together
/// with its exact distance matrix and the bi-Lipschitz constants of the
/// bijection.
#[derive(Debug, Clone)]
pub struct NetEquivalence {
    pub decomposition: ClusterDecomposition,
    /// Grid family actually used: points of `{-3/4, 0, 3/4}^Gamma` in
    /// canonical order, norms at most 3/4, pairwise at least 3/4 apart.
    pub grid: Vec<QVec>,
    /// Net point per realized point, parallel to the global order.
    pub mu: Vec<QVec>,
    pub n_dist: DistMatrix,
    pub lip_mu: LipschitzReport,
    pub lip_mu_inv: LipschitzReport,
    pub distortion: Q,
    /// Largest observed displacement of the bijection.
    pub max_displacement: Q,
}

/// First `count` points of the grid `{-3/4, 0, 3/4}^dim`, canonical order.
fn grid_family(dim: u32, count: usize) -> Result<Vec<QVec>, Error> {
    let values = [q_ratio(-3, 4), Q::zero(), q_ratio(3, 4)];
    let total = num_traits::pow(Z::from(3), dim as usize);
    if Z::from(count as u64) > total {
        return Err(Error::GridExhausted { needed: count, available: total.to_string() });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0usize; dim as usize];
    loop {
        out.push(QVec::from_pairs(
            digits.iter().enumerate().map(|(i, &d)| (i as u32, values[d].clone())),
        ));
        if out.len() == count {
            return Ok(out);
        }
        let mut pos = dim as usize;
        loop {
            if pos == 0 {
                return Err(Error::GridExhausted { needed: count, available: total.to_string() });
            }
            pos -= 1;
            if digits[pos] < 2 {
                digits[pos] += 1;
                for d in digits.iter_mut().skip(pos + 1) {
                    *d = 0;
                }
                break;
            }
        }
    }
}

/// Completes the net: within each cluster preimage (canonical order) the
/// `t`-th point is sent to `rep + (a/2) * grid[t]`.
pub fn perturb(cons: &Construction, decomposition: ClusterDecomposition) -> Result<NetEquivalence, Error> {
    let a = decomposition.a.clone();
    let half_a = &a / Q::from_integer(Z::from(2));
    let len = cons.order.len();

    // preimages per cluster, in canonical order of the realized points
    let rho_pos: BTreeMap<QVec, usize> = decomposition
        .rho_set
        .iter()
        .enumerate()
        .map(|(i, q)| (q.clone(), i))
        .collect();
    let mut preimages: Vec<Vec<usize>> = vec![Vec::new(); decomposition.reps.len()];
    let mut by_point: Vec<(usize, usize)> = (0..len)
        .map(|p| {
            let k = decomposition.cluster_of[rho_pos[&decomposition.rho_points[p]]];
            (k, p)
        })
        .collect();
    by_point.sort_by(|x, y| (x.0, &cons.order.points[x.1]).cmp(&(y.0, &cons.order.points[y.1])));
    for (k, p) in by_point {
        preimages[k].push(p);
    }

    let largest = preimages.iter().map(Vec::len).max().unwrap_or(0);
    let grid = grid_family(cons.sys.chain().full_size(), largest)?;

    let mut mu = vec![QVec::zero(); len];
    for (k, members) in preimages.iter().enumerate() {
        for (t, &p) in members.iter().enumerate() {
            mu[p] = decomposition.reps[k].add(&grid[t].scale(&half_a));
        }
    }
    let mut seen = BTreeMap::new();
    for (p, image) in mu.iter().enumerate() {
        if let Some(other) = seen.insert(image.clone(), p) {
            return Err(Error::Internal(format!(
                "perturbation is not injective: points {other} and {p} collide"
            )));
        }
    }

    let n_dist = DistMatrix::build(&mu);
    let (lip_mu, lip_mu_inv) = bijection_constants(&cons.dist, &n_dist);
    let distortion = &lip_mu.constant * &lip_mu_inv.constant;
    let max_displacement = (0..len)
        .map(|p| cons.order.points[p].dist(&mu[p]))
        .max()
        .unwrap_or_else(Q::zero);

    Ok(NetEquivalence {
        decomposition,
        grid,
        mu,
        n_dist,
        lip_mu,
        lip_mu_inv,
        distortion,
        max_displacement,
    })
}

/// Exact forward and backward Lipschitz constants of the bijection sending
/// the points behind `from` to the points behind `to`, position by position.
fn bijection_constants(from: &DistMatrix, to: &DistMatrix) -> (LipschitzReport, LipschitzReport) {
    let len = from.len();
    let mut fwd: (Q, Option<(usize, usize)>) = (Q::zero(), None);
    let mut bwd: (Q, Option<(usize, usize)>) = (Q::zero(), None);
    for i in 0..len {
        for j in (i + 1)..len {
            let ratio = to.get(i, j) / from.get(i, j);
            if ratio > fwd.0 {
                fwd = (ratio, Some((i, j)));
            }
            let ratio = from.get(i, j) / to.get(i, j);
            if ratio > bwd.0 {
                bwd = (ratio, Some((i, j)));
            }
        }
    }
    (
        LipschitzReport { constant: fwd.0, witness: fwd.1 },
        LipschitzReport { constant: bwd.0, witness: bwd.1 },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::tests::p0_construction;
    use crate::{q_int, q_ratio};

    #[test]
    fn rejects_small_a() {
        let cons = p0_construction();
        assert!(matches!(extract_net(&cons, &q_int(1)), Err(Error::NetParameter(_))));
    }

    #[test]
    fn clusters_cover_and_are_separated() {
        let cons = p0_construction();
        let a = q_int(2);
        let d = extract_net(&cons, &a).unwrap();
        assert_eq!(d.rho_set.len(), 81); // zero preset: projection is the identity
        assert!(d.cluster_of.iter().all(|&k| k != usize::MAX));
        for (k, members) in d.clusters.iter().enumerate() {
            assert!(!members.is_empty());
            for &j in members {
                assert!(d.reps[k].dist(&d.rho_set[j]) <= a);
            }
        }
        for k1 in 0..d.reps.len() {
            for k2 in (k1 + 1)..d.reps.len() {
                assert!(d.reps[k1].dist(&d.reps[k2]) > a);
            }
        }
    }

    #[test]
    fn grid_family_is_separated_and_small() {
        let grid = grid_family(3, 27).unwrap();
        assert_eq!(grid.len(), 27);
        for p in &grid {
            assert!(p.sup_norm() <= q_ratio(3, 4));
        }
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                assert!(grid[i].dist(&grid[j]) >= q_ratio(1, 2));
            }
        }
        assert!(matches!(grid_family(1, 4), Err(Error::GridExhausted { needed: 4, .. })));
    }

    #[test]
    fn perturbed_net_certificate() {
        let cons = p0_construction();
        let a = q_int(2);
        let net = perturb(&cons, extract_net(&cons, &a).unwrap()).unwrap();
        let separation = q_ratio(1, 2); // a / 4
        for i in 0..net.mu.len() {
            for j in (i + 1)..net.mu.len() {
                assert!(*net.n_dist.get(i, j) >= separation);
            }
        }
        // displacement bound a + 1 + 3a/8
        assert!(net.max_displacement <= q_ratio(15, 4));
        assert!(net.distortion > Q::zero());
    }
}
