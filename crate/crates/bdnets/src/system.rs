//! Finite-stage systems of compatible extension operators.
//!
//! Each step from stage `n` to `n+1` is a linear extension: old coordinates
//! are reproduced, and every new coordinate is a rational linear functional
//! of the previous stage. The composed operators `i_n` map stage `n` into
//! the final (frozen) stage, their sup-norm operator norms are exact max
//! absolute row sums, and compatibility `i_n = i_m . r_m . i_n` is asserted
//! on the composed matrices at build time.

use num_traits::{Signed, Zero};

use crate::qvec::{QVec, StageChain};
use crate::{fmt_q, q_ratio, z_pow, Error, Q, Z};

/// Extension rules for one system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtensionSpec {
    /// All new coordinates are zero functionals.
    Zero,
    /// Every new coordinate reads half of the last previous coordinate.
    Affine,
    /// Explicit coefficient rows, one entry per step.
    Explicit(Vec<StepRows>),
}

/// Supplied rows for the step extending stage `stage` to `stage + 1`.
/// Each row targets an absolute new index and lists its coefficients over
/// the previous stage; omitted new indices get the zero row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRows {
    pub stage: usize,
    pub rows: Vec<(u32, Vec<Q>)>,
}

/// Parsed system description.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub stage_sizes: Vec<u32>,
    pub lambda_bar: u32,
    pub extension: ExtensionSpec,
    /// Optional; must equal `stage_sizes.len()` when given.
    pub n_max: Option<usize>,
}

/// One-step extension: rows indexed by the increment of stage `stage + 1`.
#[derive(Debug, Clone)]
pub struct OneStepExtension {
    pub stage: usize,
    /// `rows[t]` are the coefficients over stage `stage` defining new
    /// coordinate `size(stage) + t`.
    pub rows: Vec<Vec<Q>>,
}

impl OneStepExtension {
    /// Exact sup-norm operator norm of the one-step map: the max absolute
    /// row sum (old coordinates contribute row sum 1).
    pub fn operator_norm(&self) -> Q {
        let mut norm = Q::from_integer(Z::from(1));
        for row in &self.rows {
            let sum: Q = row.iter().map(|c| c.abs()).sum();
            if sum > norm {
                norm = sum;
            }
        }
        norm
    }
}

/// A finite-stage system: the index chain, the one-step extensions, the
/// composed operators into the final stage, and the integer norm bound.
#[derive(Debug, Clone)]
pub struct BdSystem {
    chain: StageChain,
    steps: Vec<OneStepExtension>,
    /// `matrices[n-1]` is the composed operator of stage `n`:
    /// `full_size x size(n)` rows over the previous coordinates.
    matrices: Vec<Vec<Vec<Q>>>,
    op_norms: Vec<Q>,
    lambda_bar: u32,
}

impl BdSystem {
    /// Builds and validates a system: strictly increasing stages, extension
    /// rows shaped by the increments, compatibility of the composed
    /// operators, and `lambda_bar` at least the computed norm bound.
    pub fn build(spec: &SystemSpec) -> Result<Self, Error> {
        let chain = StageChain::new(spec.stage_sizes.clone())?;
        let n_max = chain.n_max();
        if let Some(n) = spec.n_max {
            if n != n_max {
                return Err(Error::Config(format!(
                    "n_max = {n} does not match the {n_max} listed stage sizes"
                )));
            }
        }
        if spec.lambda_bar < 1 {
            return Err(Error::Config("lambda_bar must be a positive integer".into()));
        }

        let mut steps = Vec::with_capacity(n_max.saturating_sub(1));
        for stage in 1..n_max {
            let prev = chain.size(stage)? as usize;
            let delta = chain.delta(stage + 1)?;
            let width = (delta.end - delta.start) as usize;
            let mut rows = vec![vec![Q::zero(); prev]; width];
            match &spec.extension {
                ExtensionSpec::Zero => {}
                ExtensionSpec::Affine => {
                    for row in &mut rows {
                        row[prev - 1] = q_ratio(1, 2);
                    }
                }
                ExtensionSpec::Explicit(all) => {
                    for step in all.iter().filter(|s| s.stage == stage) {
                        for (gamma, coeffs) in &step.rows {
                            if *gamma < delta.start {
                                return Err(Error::RowRedefinesOldCoordinate { gamma: *gamma, stage });
                            }
                            if *gamma >= delta.end {
                                return Err(Error::RowOutsideIncrement { gamma: *gamma, stage });
                            }
                            if coeffs.len() != prev {
                                return Err(Error::RowLength {
                                    gamma: *gamma,
                                    stage,
                                    got: coeffs.len(),
                                    expected: prev,
                                });
                            }
                            rows[(*gamma - delta.start) as usize] = coeffs.clone();
                        }
                    }
                }
            }
            steps.push(OneStepExtension { stage, rows });
        }
        if let ExtensionSpec::Explicit(all) = &spec.extension {
            if let Some(bad) = all.iter().find(|s| s.stage == 0 || s.stage >= n_max) {
                return Err(Error::StageOutOfRange { stage: bad.stage, n_max });
            }
        }

        // Compose i_n top-down: i_{n_max} is the identity into the frozen
        // final stage, and i_n = i_{n+1} . j_n.
        let full = chain.full_size() as usize;
        let mut matrices: Vec<Vec<Vec<Q>>> = vec![Vec::new(); n_max];
        let mut identity = vec![vec![Q::zero(); full]; full];
        for (g, row) in identity.iter_mut().enumerate() {
            row[g] = Q::from_integer(Z::from(1));
        }
        matrices[n_max - 1] = identity;
        for stage in (1..n_max).rev() {
            let next = &matrices[stage]; // full x size(stage + 1)
            let step = &steps[stage - 1];
            let prev = chain.size(stage)? as usize;
            let next_size = chain.size(stage + 1)? as usize;
            let mut composed = vec![vec![Q::zero(); prev]; full];
            for g in 0..full {
                for (t, row) in composed[g].iter_mut().enumerate() {
                    // column t of j_n: identity on old coordinates plus the
                    // coefficient rows on the increment
                    let mut acc = next[g][t].clone();
                    for s in prev..next_size {
                        let c = &step.rows[s - prev][t];
                        if !c.is_zero() {
                            acc += &next[g][s] * c;
                        }
                    }
                    *row = acc;
                }
            }
            matrices[stage - 1] = composed;
        }

        let mut op_norms = Vec::with_capacity(n_max);
        let mut worst: Option<(Q, usize, u32)> = None;
        for (idx, m) in matrices.iter().enumerate() {
            let mut norm = Q::zero();
            let mut norm_row = 0u32;
            for (g, row) in m.iter().enumerate() {
                let sum: Q = row.iter().map(|c| c.abs()).sum();
                if sum > norm {
                    norm = sum;
                    norm_row = g as u32;
                }
            }
            if worst.as_ref().map_or(true, |(w, _, _)| norm > *w) {
                worst = Some((norm.clone(), idx + 1, norm_row));
            }
            op_norms.push(norm);
        }
        let (max_norm, norm_stage, norm_gamma) = worst.unwrap();
        if Q::from_integer(Z::from(spec.lambda_bar)) < max_norm {
            return Err(Error::LambdaBelowNorm {
                lambda_bar: spec.lambda_bar,
                norm: fmt_q(&max_norm),
                stage: norm_stage,
                gamma: norm_gamma,
            });
        }

        let sys = BdSystem { chain, steps, matrices, op_norms, lambda_bar: spec.lambda_bar };
        sys.assert_extension_property()?;
        sys.assert_compatibility()?;
        Ok(sys)
    }

    fn assert_extension_property(&self) -> Result<(), Error> {
        for (n, m) in self.matrices.iter().enumerate() {
            let size = self.chain.size(n + 1)? as usize;
            for g in 0..size {
                for (t, c) in m[g].iter().enumerate() {
                    let expected = if t == g { Q::from_integer(Z::from(1)) } else { Q::zero() };
                    if *c != expected {
                        return Err(Error::Internal(format!(
                            "composed operator of stage {} does not reproduce coordinate {g}",
                            n + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn assert_compatibility(&self) -> Result<(), Error> {
        // i_n = i_m . r_m . i_n as matrices, for all n < m.
        let full = self.chain.full_size() as usize;
        for n in 1..=self.n_max() {
            for m in (n + 1)..=self.n_max() {
                let size_n = self.chain.size(n)? as usize;
                let size_m = self.chain.size(m)? as usize;
                let in_mat = &self.matrices[n - 1];
                let im_mat = &self.matrices[m - 1];
                for g in 0..full {
                    for t in 0..size_n {
                        let mut acc = Q::zero();
                        for s in 0..size_m {
                            if !im_mat[g][s].is_zero() && !in_mat[s][t].is_zero() {
                                acc += &im_mat[g][s] * &in_mat[s][t];
                            }
                        }
                        if acc != in_mat[g][t] {
                            return Err(Error::Internal(format!(
                                "compatibility fails for stages {n} < {m} at row {g}, column {t}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn chain(&self) -> &StageChain {
        &self.chain
    }

    pub fn n_max(&self) -> usize {
        self.chain.n_max()
    }

    pub fn lambda_bar(&self) -> u32 {
        self.lambda_bar
    }

    pub fn steps(&self) -> &[OneStepExtension] {
        &self.steps
    }

    /// Truncation radius of stage `n`: `lambda_bar ^ n` (an integer).
    pub fn s(&self, n: usize) -> Z {
        z_pow(self.lambda_bar, n)
    }

    pub fn s_q(&self, n: usize) -> Q {
        Q::from_integer(self.s(n))
    }

    /// The composed extension `i_n` applied to a vector supported on stage
    /// `n`. Stages above `n_max` act as the identity (frozen chain).
    pub fn extend(&self, n: usize, v: &QVec) -> Result<QVec, Error> {
        if n == 0 {
            return Err(Error::StageOutOfRange { stage: n, n_max: self.n_max() });
        }
        let size = self.chain.size(n)?;
        if let Some(top) = v.max_support_index() {
            if top >= size {
                return Err(Error::SupportMismatch { stage: n, index: top });
            }
        }
        if n >= self.n_max() {
            return Ok(v.clone());
        }
        let m = &self.matrices[n - 1];
        let full = self.chain.full_size();
        let mut out = Vec::new();
        for g in 0..full as usize {
            let mut acc = Q::zero();
            for (t, c) in v.iter() {
                let coeff = &m[g][t as usize];
                if !coeff.is_zero() {
                    acc += coeff * c;
                }
            }
            if !acc.is_zero() {
                out.push((g as u32, acc));
            }
        }
        Ok(QVec::from_pairs(out))
    }

    /// Restriction `r_n` (identity above `n_max`).
    pub fn restrict(&self, v: &QVec, n: usize) -> Result<QVec, Error> {
        if n > self.n_max() {
            return Ok(v.clone());
        }
        self.chain.restrict(v, n)
    }

    /// `max_n ||i_n||`, computed exactly as the largest absolute row sum of
    /// the composed matrices.
    pub fn lambda_of(&self) -> Q {
        self.op_norms.iter().max().cloned().unwrap_or_else(Q::zero)
    }

    pub fn operator_norm(&self, n: usize) -> Result<&Q, Error> {
        self.op_norms
            .get(n - 1)
            .ok_or(Error::StageOutOfRange { stage: n, n_max: self.n_max() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{q_int, parse_q};

    pub(crate) fn p0_spec() -> SystemSpec {
        SystemSpec {
            stage_sizes: vec![1, 2, 3],
            lambda_bar: 2,
            extension: ExtensionSpec::Zero,
            n_max: Some(3),
        }
    }

    #[test]
    fn zero_preset_has_unit_norms() {
        let sys = BdSystem::build(&p0_spec()).unwrap();
        assert_eq!(sys.lambda_of(), q_int(1));
        for n in 1..=3 {
            assert_eq!(*sys.operator_norm(n).unwrap(), q_int(1));
        }
        assert_eq!(sys.s(1), crate::Z::from(2));
        assert_eq!(sys.s(3), crate::Z::from(8));
    }

    #[test]
    fn zero_preset_extends_by_zero() {
        let sys = BdSystem::build(&p0_spec()).unwrap();
        let v = QVec::from_ints(&[2]);
        assert_eq!(sys.extend(1, &v).unwrap(), QVec::from_ints(&[2, 0, 0]));
        let w = QVec::from_ints(&[1, -3, 4]);
        assert_eq!(sys.extend(3, &w).unwrap(), w);
        // frozen chain: stages above n_max are the identity
        assert_eq!(sys.extend(7, &w).unwrap(), w);
    }

    #[test]
    fn affine_preset_applies_half_rows() {
        let spec = SystemSpec {
            stage_sizes: vec![1, 2, 3],
            lambda_bar: 2,
            extension: ExtensionSpec::Affine,
            n_max: None,
        };
        let sys = BdSystem::build(&spec).unwrap();
        let v = QVec::from_ints(&[3]);
        let e = sys.extend(1, &v).unwrap();
        assert_eq!(e.get(0), q_int(3));
        assert_eq!(e.get(1), parse_q("3/2").unwrap());
        assert_eq!(e.get(2), parse_q("3/4").unwrap());
        assert_eq!(sys.lambda_of(), q_int(1));
    }

    #[test]
    fn explicit_row_norm_two() {
        let spec = SystemSpec {
            stage_sizes: vec![2, 3],
            lambda_bar: 2,
            extension: ExtensionSpec::Explicit(vec![StepRows {
                stage: 1,
                rows: vec![(2, vec![q_int(1), q_int(1)])],
            }]),
            n_max: None,
        };
        let sys = BdSystem::build(&spec).unwrap();
        assert_eq!(sys.lambda_of(), q_int(2));
        assert_eq!(
            sys.extend(1, &QVec::from_ints(&[1, -1])).unwrap(),
            QVec::from_ints(&[1, -1, 0])
        );
        assert_eq!(
            sys.extend(1, &QVec::from_ints(&[2, 1])).unwrap(),
            QVec::from_ints(&[2, 1, 3])
        );
    }

    #[test]
    fn lambda_below_norm_is_rejected_with_row() {
        let spec = SystemSpec {
            stage_sizes: vec![2, 3],
            lambda_bar: 1,
            extension: ExtensionSpec::Explicit(vec![StepRows {
                stage: 1,
                rows: vec![(2, vec![q_int(1), q_int(1)])],
            }]),
            n_max: None,
        };
        match BdSystem::build(&spec) {
            Err(Error::LambdaBelowNorm { lambda_bar: 1, stage: 1, gamma: 2, norm }) => {
                assert_eq!(norm, "2");
            }
            other => panic!("expected LambdaBelowNorm, got {other:?}"),
        }
    }

    #[test]
    fn redefining_an_old_coordinate_is_rejected() {
        let spec = SystemSpec {
            stage_sizes: vec![2, 3],
            lambda_bar: 2,
            extension: ExtensionSpec::Explicit(vec![StepRows {
                stage: 1,
                rows: vec![(0, vec![q_int(1), q_int(0)])],
            }]),
            n_max: None,
        };
        assert!(matches!(
            BdSystem::build(&spec),
            Err(Error::RowRedefinesOldCoordinate { gamma: 0, stage: 1 })
        ));
    }

    #[test]
    fn non_increasing_stages_rejected() {
        let spec = SystemSpec {
            stage_sizes: vec![2, 2],
            lambda_bar: 2,
            extension: ExtensionSpec::Zero,
            n_max: None,
        };
        assert!(matches!(BdSystem::build(&spec), Err(Error::NonIncreasingStages)));
    }

    #[test]
    fn support_mismatch_rejected() {
        let sys = BdSystem::build(&p0_spec()).unwrap();
        let v = QVec::from_ints(&[1, 1]);
        assert!(matches!(
            sys.extend(1, &v),
            Err(Error::SupportMismatch { stage: 1, index: 1 })
        ));
    }
}
