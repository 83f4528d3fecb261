//! Brute-force Lipschitz-constant evaluation over finite map tables.
//!
//! The constant of a map given by a finite table is the exact maximum of
//! `d(Tx, Ty) / d(x, y)` over all unordered pairs. Pair loops may be
//! partitioned across workers; the reduction is a maximum with a
//! deterministic tie-break on the witness, so the result does not depend on
//! the partitioning.

use num_traits::Zero;
use rayon::prelude::*;

use crate::metric::DistMatrix;
use crate::{Error, QVec, Q};

/// Exact Lipschitz constant plus the pair attaining it.
#[derive(Debug, Clone)]
pub struct LipschitzReport {
    pub constant: Q,
    /// Indices into the table of the maximizing pair; `None` when fewer than
    /// two points exist or the map is constant.
    pub witness: Option<(usize, usize)>,
}

fn better(current: &(Q, Option<(usize, usize)>), value: &Q, pair: (usize, usize)) -> bool {
    match value.cmp(&current.0) {
        std::cmp::Ordering::Greater => true,
        // a zero maximum (constant map) keeps no witness
        std::cmp::Ordering::Equal => matches!(current.1, Some(w) if pair < w),
        std::cmp::Ordering::Less => false,
    }
}

fn merge(
    a: (Q, Option<(usize, usize)>),
    b: (Q, Option<(usize, usize)>),
) -> (Q, Option<(usize, usize)>) {
    match b.1 {
        Some(p) if better(&a, &b.0, p) => b,
        _ => a,
    }
}

/// Exact Lipschitz constant of the map given by `(point, image)` pairs,
/// under arbitrary exact metrics. Coincident domain points are rejected.
pub fn lipschitz_constant<D, R>(
    table: &[(QVec, QVec)],
    d_domain: D,
    d_range: R,
) -> Result<LipschitzReport, Error>
where
    D: Fn(&QVec, &QVec) -> Q,
    R: Fn(&QVec, &QVec) -> Q,
{
    let mut best: (Q, Option<(usize, usize)>) = (Q::zero(), None);
    for i in 0..table.len() {
        for j in (i + 1)..table.len() {
            let dd = d_domain(&table[i].0, &table[j].0);
            if dd.is_zero() {
                return Err(Error::CoincidentPoints(i, j));
            }
            let dr = d_range(&table[i].1, &table[j].1);
            let ratio = dr / dd;
            if better(&best, &ratio, (i, j)) {
                best = (ratio, Some((i, j)));
            }
        }
    }
    Ok(LipschitzReport { constant: best.0, witness: best.1 })
}

/// Sup-norm specialization of [`lipschitz_constant`].
pub fn sup_lipschitz_constant(table: &[(QVec, QVec)]) -> Result<LipschitzReport, Error> {
    lipschitz_constant(table, QVec::dist, QVec::dist)
}

/// Exact Lipschitz constant of a map given as an index table over a prefix
/// of the realized points: `table[x]` is the image of point `x`, and both
/// sides are measured in the same precomputed distance matrix.
pub fn table_lipschitz(table: &[u32], dist: &DistMatrix) -> LipschitzReport {
    let n = table.len();
    let best = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut local: (Q, Option<(usize, usize)>) = (Q::zero(), None);
            for j in (i + 1)..n {
                let dd = dist.get(i, j);
                let dr = dist.get(table[i] as usize, table[j] as usize);
                if dr.is_zero() {
                    continue;
                }
                let ratio = dr / dd;
                if better(&local, &ratio, (i, j)) {
                    local = (ratio, Some((i, j)));
                }
            }
            local
        })
        .reduce(|| (Q::zero(), None), merge);
    LipschitzReport { constant: best.0, witness: best.1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{q_int, QVec};

    #[test]
    fn identity_has_constant_one() {
        let pts = [
            QVec::from_ints(&[0]),
            QVec::from_ints(&[2]),
            QVec::from_ints(&[5]),
        ];
        let table: Vec<_> = pts.iter().map(|p| (p.clone(), p.clone())).collect();
        let rep = sup_lipschitz_constant(&table).unwrap();
        assert_eq!(rep.constant, q_int(1));
    }

    #[test]
    fn constant_map_has_constant_zero() {
        let table = vec![
            (QVec::from_ints(&[0]), QVec::from_ints(&[7])),
            (QVec::from_ints(&[1]), QVec::from_ints(&[7])),
            (QVec::from_ints(&[4]), QVec::from_ints(&[7])),
        ];
        let rep = sup_lipschitz_constant(&table).unwrap();
        assert_eq!(rep.constant, q_int(0));
        assert!(rep.witness.is_none());
    }

    #[test]
    fn three_point_line_map() {
        // {0 -> 0, 1 -> 2, 3 -> 2} on the line: pair ratios are 2, 2/3, 0.
        let table = vec![
            (QVec::from_ints(&[0]), QVec::from_ints(&[0])),
            (QVec::from_ints(&[1]), QVec::from_ints(&[2])),
            (QVec::from_ints(&[3]), QVec::from_ints(&[2])),
        ];
        let rep = sup_lipschitz_constant(&table).unwrap();
        assert_eq!(rep.constant, q_int(2));
        assert_eq!(rep.witness, Some((0, 1)));
    }

    #[test]
    fn coincident_points_rejected() {
        let table = vec![
            (QVec::from_ints(&[1]), QVec::zero()),
            (QVec::from_ints(&[1]), QVec::from_ints(&[5])),
        ];
        assert!(matches!(
            sup_lipschitz_constant(&table),
            Err(Error::CoincidentPoints(0, 1))
        ));
    }

    #[test]
    fn table_variant_matches_pairwise_variant() {
        let pts = vec![
            QVec::zero(),
            QVec::from_ints(&[1]),
            QVec::from_ints(&[3]),
            QVec::from_ints(&[-2]),
        ];
        let idx_table = vec![0u32, 2, 2, 0];
        let dist = DistMatrix::build(&pts);
        let by_table = table_lipschitz(&idx_table, &dist);
        let pairs: Vec<_> = idx_table
            .iter()
            .enumerate()
            .map(|(i, &t)| (pts[i].clone(), pts[t as usize].clone()))
            .collect();
        let by_pairs = sup_lipschitz_constant(&pairs).unwrap();
        assert_eq!(by_table.constant, by_pairs.constant);
        assert_eq!(by_table.witness, by_pairs.witness);
    }
}
