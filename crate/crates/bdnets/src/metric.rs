//! Exact pairwise distance tables over finite point sets.

use num_traits::Zero;

use crate::{fmt_q, Error, QVec, Q};

/// Dense symmetric table of exact sup-norm distances.
#[derive(Debug, Clone)]
pub struct DistMatrix {
    len: usize,
    d: Vec<Q>,
}

impl DistMatrix {
    pub fn build(points: &[QVec]) -> Self {
        let len = points.len();
        let mut d = vec![Q::zero(); len * len];
        for i in 0..len {
            for j in (i + 1)..len {
                let dij = points[i].dist(&points[j]);
                d[i * len + j] = dij.clone();
                d[j * len + i] = dij;
            }
        }
        DistMatrix { len, d }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.d[i * self.len + j]
    }

    /// Checks the metric axioms exactly: zero diagonal and symmetry hold by
    /// construction; positivity off the diagonal and the triangle inequality
    /// are verified pair by pair.
    pub fn validate_metric(&self) -> Result<(), Error> {
        for i in 0..self.len {
            for j in (i + 1)..self.len {
                if self.get(i, j).is_zero() {
                    return Err(Error::CoincidentPoints(i, j));
                }
            }
        }
        for i in 0..self.len {
            for j in 0..self.len {
                for k in 0..self.len {
                    let lhs = self.get(i, k);
                    let rhs = self.get(i, j) + self.get(j, k);
                    if *lhs > rhs {
                        return Err(Error::Internal(format!(
                            "triangle inequality fails: d({i},{k}) = {} > {} = d({i},{j}) + d({j},{k})",
                            fmt_q(lhs),
                            fmt_q(&rhs)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::QVec;

    #[test]
    fn sup_metric_axioms_hold() {
        let pts: Vec<QVec> = vec![
            QVec::zero(),
            QVec::from_ints(&[1, 0]),
            QVec::from_ints(&[0, 2]),
            QVec::from_ints(&[-3, 1]),
        ];
        let d = DistMatrix::build(&pts);
        d.validate_metric().unwrap();
        assert_eq!(*d.get(0, 3), crate::q_int(3));
        assert_eq!(d.get(1, 2), d.get(2, 1));
    }

    #[test]
    fn coincident_points_rejected() {
        let pts = vec![QVec::zero(), QVec::zero()];
        assert!(matches!(
            DistMatrix::build(&pts).validate_metric(),
            Err(Error::CoincidentPoints(0, 1))
        ));
    }
}
