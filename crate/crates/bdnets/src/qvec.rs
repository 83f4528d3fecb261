//! Sup-norm vectors with exact rational coordinates over a chain of finite
//! index stages.
//!
//! A [`QVec`] is a finitely supported map from indices to rationals; indices
//! not carried by the map read as zero, and zero coordinates are never
//! stored, so equality of maps is equality of functions. The three pointwise
//! operators of the construction live here: coordinatewise entire part
//! ([`QVec::quantize`]), radius clamp ([`QVec::truncate`]) and restriction /
//! disjoint join.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use num_traits::{Signed, Zero};

use crate::{fmt_q, Error, Q};

/// Nested finite index sets. Stage `n` (1-based) covers indices
/// `0..size(n)`; increments are the half-open ranges between consecutive
/// sizes, so every index belongs to exactly one increment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageChain {
    sizes: Vec<u32>,
}

impl StageChain {
    pub fn new(sizes: Vec<u32>) -> Result<Self, Error> {
        if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NonIncreasingStages);
        }
        Ok(StageChain { sizes })
    }

    /// Number of stages.
    pub fn n_max(&self) -> usize {
        self.sizes.len()
    }

    /// `|Gamma_n|`. Stages above `n_max` are frozen at the final size.
    pub fn size(&self, n: usize) -> Result<u32, Error> {
        if n == 0 {
            return Err(Error::StageOutOfRange { stage: n, n_max: self.n_max() });
        }
        Ok(self.sizes[(n - 1).min(self.sizes.len() - 1)])
    }

    /// `|Gamma_{N_max}|`.
    pub fn full_size(&self) -> u32 {
        *self.sizes.last().unwrap()
    }

    /// The increment `Delta_n` as an index range (`Delta_1 = Gamma_1`).
    pub fn delta(&self, n: usize) -> Result<Range<u32>, Error> {
        if n == 0 || n > self.n_max() {
            return Err(Error::StageOutOfRange { stage: n, n_max: self.n_max() });
        }
        let lo = if n == 1 { 0 } else { self.sizes[n - 2] };
        Ok(lo..self.sizes[n - 1])
    }

    /// The unique stage whose increment contains `index`.
    pub fn stage_of_index(&self, index: u32) -> Result<usize, Error> {
        self.sizes
            .iter()
            .position(|&s| index < s)
            .map(|p| p + 1)
            .ok_or(Error::SupportMismatch { stage: self.n_max(), index })
    }

    /// Restriction `r_n` onto `Gamma_n`. Stages above `n_max` act as the
    /// identity (the chain is frozen at its final stage).
    pub fn restrict(&self, v: &QVec, n: usize) -> Result<QVec, Error> {
        if n == 0 {
            return Err(Error::StageOutOfRange { stage: n, n_max: self.n_max() });
        }
        Ok(v.restrict_below(self.size(n)?))
    }
}

/// A finitely supported vector of exact rationals, an element of the ambient
/// sup-norm space over the index chain.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QVec {
    coords: BTreeMap<u32, Q>,
}

impl QVec {
    pub fn zero() -> Self {
        QVec::default()
    }

    /// Builds from index/value pairs, dropping zero values. Later duplicates
    /// overwrite earlier ones.
    pub fn from_pairs<I: IntoIterator<Item = (u32, Q)>>(pairs: I) -> Self {
        let mut coords = BTreeMap::new();
        for (i, v) in pairs {
            if v.is_zero() {
                coords.remove(&i);
            } else {
                coords.insert(i, v);
            }
        }
        QVec { coords }
    }

    /// Dense integer vector on indices `0..values.len()`.
    pub fn from_ints(values: &[i64]) -> Self {
        QVec::from_pairs(values.iter().enumerate().map(|(i, &v)| (i as u32, crate::q_int(v))))
    }

    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinate at `index` (zero off the support).
    pub fn get(&self, index: u32) -> Q {
        self.coords.get(&index).cloned().unwrap_or_else(Q::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.coords.keys().copied()
    }

    pub fn support_len(&self) -> usize {
        self.coords.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Q)> {
        self.coords.iter().map(|(&i, v)| (i, v))
    }

    pub fn max_support_index(&self) -> Option<u32> {
        self.coords.keys().next_back().copied()
    }

    /// `max_gamma |v(gamma)|`, zero for the empty support.
    pub fn sup_norm(&self) -> Q {
        self.coords.values().map(|v| v.abs()).max().unwrap_or_else(Q::zero)
    }

    pub fn is_integral(&self) -> bool {
        self.coords.values().all(|v| v.is_integer())
    }

    /// Coordinatewise entire part: `[r] = sign(r) * floor(|r|)`, i.e.
    /// truncation toward zero. Idempotent; not nonexpansive.
    pub fn quantize(&self) -> QVec {
        QVec::from_pairs(self.coords.iter().map(|(&i, v)| (i, v.trunc())))
    }

    /// Coordinatewise clamp to `[-s, s]`. Rejects negative radii.
    pub fn truncate(&self, s: &Q) -> Result<QVec, Error> {
        if s.is_negative() {
            return Err(Error::NegativeRadius(fmt_q(s)));
        }
        Ok(QVec::from_pairs(self.coords.iter().map(|(&i, v)| {
            let clamped = if v.abs() <= *s {
                v.clone()
            } else if v.is_negative() {
                -s.clone()
            } else {
                s.clone()
            };
            (i, clamped)
        })))
    }

    /// Keeps indices `< upto` (coordinate projection).
    pub fn restrict_below(&self, upto: u32) -> QVec {
        QVec {
            coords: self.coords.range(..upto).map(|(&i, v)| (i, v.clone())).collect(),
        }
    }

    /// Keeps indices inside `range`.
    pub fn restrict_range(&self, range: Range<u32>) -> QVec {
        QVec {
            coords: self
                .coords
                .range(range)
                .map(|(&i, v)| (i, v.clone()))
                .collect(),
        }
    }

    /// Disjoint join: agrees with `self` on its support and with `other` on
    /// the other support. Overlapping supports are rejected.
    pub fn join(&self, other: &QVec) -> Result<QVec, Error> {
        let mut coords = self.coords.clone();
        for (&i, v) in &other.coords {
            if coords.insert(i, v.clone()).is_some() {
                return Err(Error::OverlappingSupports(i));
            }
        }
        Ok(QVec { coords })
    }

    pub fn add(&self, other: &QVec) -> QVec {
        let mut coords = self.coords.clone();
        for (&i, v) in &other.coords {
            let entry = coords.entry(i).or_insert_with(Q::zero);
            *entry += v;
            if entry.is_zero() {
                coords.remove(&i);
            }
        }
        QVec { coords }
    }

    pub fn sub(&self, other: &QVec) -> QVec {
        let mut coords = self.coords.clone();
        for (&i, v) in &other.coords {
            let entry = coords.entry(i).or_insert_with(Q::zero);
            *entry -= v;
            if entry.is_zero() {
                coords.remove(&i);
            }
        }
        QVec { coords }
    }

    pub fn scale(&self, q: &Q) -> QVec {
        if q.is_zero() {
            return QVec::zero();
        }
        QVec {
            coords: self.coords.iter().map(|(&i, v)| (i, v * q)).collect(),
        }
    }

    /// Sup-norm distance.
    pub fn dist(&self, other: &QVec) -> Q {
        let mut best = Q::zero();
        for &i in self.coords.keys().chain(other.coords.keys()) {
            let d = (self.get(i) - other.get(i)).abs();
            if d > best {
                best = d;
            }
        }
        best
    }

    /// Renders the first `dim` coordinates densely, space separated.
    pub fn dense_row(&self, dim: u32) -> String {
        (0..dim)
            .map(|i| fmt_q(&self.get(i)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Canonical order: lexicographic by coordinate tuple under the fixed index
/// enumeration, with missing coordinates reading as zero.
impl Ord for QVec {
    fn cmp(&self, other: &Self) -> Ordering {
        let zero = Q::zero();
        let mut a = self.coords.iter().peekable();
        let mut b = other.coords.iter().peekable();
        loop {
            // index of the first coordinate not yet compared
            let (va, vb) = match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some((_, va)), None) => (*va, &zero),
                (None, Some((_, vb))) => (&zero, *vb),
                (Some((&ia, va)), Some((&ib, vb))) => match ia.cmp(&ib) {
                    Ordering::Less => (*va, &zero),
                    Ordering::Greater => (&zero, *vb),
                    Ordering::Equal => (*va, *vb),
                },
            };
            match va.cmp(vb) {
                Ordering::Equal => {
                    // only reachable when both iterators sit on the same index
                    a.next();
                    b.next();
                }
                o => return o,
            }
        }
    }
}

impl PartialOrd for QVec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (pos, (i, v)) in self.coords.iter().enumerate() {
            if pos > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", i, fmt_q(v))?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{q_int, q_ratio};
    use proptest::prelude::*;

    fn qv(vals: &[(u32, Q)]) -> QVec {
        QVec::from_pairs(vals.iter().cloned())
    }

    #[test]
    fn stage_chain_validation() {
        assert!(StageChain::new(vec![]).is_err());
        assert!(StageChain::new(vec![0, 1]).is_err());
        assert!(StageChain::new(vec![2, 2]).is_err());
        assert!(StageChain::new(vec![3, 2]).is_err());
        let chain = StageChain::new(vec![1, 2, 3]).unwrap();
        assert_eq!(chain.n_max(), 3);
        assert_eq!(chain.delta(1).unwrap(), 0..1);
        assert_eq!(chain.delta(2).unwrap(), 1..2);
        assert_eq!(chain.stage_of_index(2).unwrap(), 3);
        assert!(chain.stage_of_index(3).is_err());
        // frozen above the final stage
        assert_eq!(chain.size(9).unwrap(), 3);
    }

    #[test]
    fn quantize_is_entire_part() {
        let v = qv(&[(0, q_ratio(7, 4)), (1, q_ratio(-9, 4)), (2, q_ratio(1, 2))]);
        assert_eq!(v.quantize(), QVec::from_ints(&[1, -2, 0]));
        assert_eq!(QVec::from_ints(&[0, 0]).quantize(), QVec::zero());
        let w = QVec::from_ints(&[-5, 3]);
        assert_eq!(w.quantize(), w);
    }

    #[test]
    fn truncate_clamps_and_rejects_negative_radius() {
        let v = QVec::from_ints(&[3, -5]);
        assert_eq!(v.truncate(&q_int(4)).unwrap(), QVec::from_ints(&[3, -4]));
        let w = QVec::from_ints(&[1, -2]);
        assert_eq!(w.truncate(&q_int(4)).unwrap(), w);
        let u = qv(&[(0, q_ratio(-7, 2))]);
        assert_eq!(u.truncate(&q_int(2)).unwrap(), QVec::from_ints(&[-2]));
        assert!(v.truncate(&q_int(-1)).is_err());
    }

    #[test]
    fn restrict_and_join() {
        let chain = StageChain::new(vec![1, 2, 3]).unwrap();
        let v = QVec::from_ints(&[2, 5, -1]);
        assert_eq!(chain.restrict(&v, 1).unwrap(), QVec::from_ints(&[2]));
        assert_eq!(chain.restrict(&v, 3).unwrap(), v);
        assert_eq!(chain.restrict(&QVec::zero(), 2).unwrap(), QVec::zero());
        assert!(chain.restrict(&v, 0).is_err());

        let x = QVec::from_ints(&[2]);
        let y = qv(&[(1, q_int(-3))]);
        assert_eq!(x.join(&y).unwrap(), QVec::from_ints(&[2, -3]));
        assert_eq!(x.join(&QVec::zero()).unwrap(), x);
        assert_eq!(QVec::zero().join(&QVec::zero()).unwrap(), QVec::zero());
        assert!(matches!(x.join(&x), Err(Error::OverlappingSupports(0))));
    }

    #[test]
    fn sup_norm_and_dist() {
        assert_eq!(QVec::zero().sup_norm(), q_int(0));
        let v = QVec::from_ints(&[3, -5]);
        assert_eq!(v.sup_norm(), q_int(5));
        let w = QVec::from_ints(&[1, -2, 7]);
        assert_eq!(v.dist(&w), q_int(7));
        assert_eq!(v.dist(&v), q_int(0));
    }

    #[test]
    fn canonical_order_is_coordinate_lexicographic() {
        let a = QVec::from_ints(&[2]);
        let b = qv(&[(1, q_int(5))]); // reads as (0, 5)
        assert!(a > b);
        assert!(QVec::from_ints(&[-1, 9]) < QVec::zero());
        let mut pts = vec![
            QVec::from_ints(&[1, 0]),
            QVec::from_ints(&[-1, 2]),
            QVec::zero(),
            QVec::from_ints(&[-1, -2]),
        ];
        pts.sort();
        assert_eq!(
            pts,
            vec![
                QVec::from_ints(&[-1, -2]),
                QVec::from_ints(&[-1, 2]),
                QVec::zero(),
                QVec::from_ints(&[1, 0]),
            ]
        );
    }

    fn arb_qvec() -> impl Strategy<Value = QVec> {
        proptest::collection::vec((0u32..6, -40i64..40, 1i64..8), 0..6).prop_map(|entries| {
            QVec::from_pairs(entries.into_iter().map(|(i, p, q)| (i, q_ratio(p, q))))
        })
    }

    proptest! {
        #[test]
        fn quantize_idempotent(v in arb_qvec()) {
            let q = v.quantize();
            prop_assert_eq!(q.quantize(), q.clone());
            prop_assert!(q.is_integral());
            // entire part never increases magnitude and preserves sign
            for (i, val) in q.iter() {
                prop_assert!(val.abs() <= v.get(i).abs());
                prop_assert!(val.signum() == v.get(i).signum());
            }
        }

        #[test]
        fn truncate_norm_bound(v in arb_qvec(), s in 0i64..20) {
            let s = q_int(s);
            let t = v.truncate(&s).unwrap();
            prop_assert!(t.sup_norm() <= s);
            prop_assert!(t.sup_norm() <= v.sup_norm());
            // unchanged coordinates stay put
            for (i, val) in v.iter() {
                if val.abs() <= s {
                    prop_assert_eq!(t.get(i), val.clone());
                }
            }
        }

        #[test]
        fn truncate_and_restrict_nonexpansive(v in arb_qvec(), w in arb_qvec(), s in 0i64..20, upto in 0u32..7) {
            let s = q_int(s);
            let d = v.dist(&w);
            prop_assert!(v.truncate(&s).unwrap().dist(&w.truncate(&s).unwrap()) <= d);
            prop_assert!(v.restrict_below(upto).dist(&w.restrict_below(upto)) <= d);
        }

        #[test]
        fn join_agrees_with_both_sides(v in arb_qvec(), w in arb_qvec()) {
            let w_shifted = QVec::from_pairs(w.iter().map(|(i, q)| (i + 10, q.clone())));
            let j = v.join(&w_shifted).unwrap();
            prop_assert_eq!(j.sup_norm(), v.sup_norm().max(w_shifted.sup_norm()));
            for (i, q) in v.iter() { prop_assert_eq!(j.get(i), q.clone()); }
            for (i, q) in w_shifted.iter() { prop_assert_eq!(j.get(i), q.clone()); }
        }
    }
}
