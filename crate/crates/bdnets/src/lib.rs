//! Finite-stage construction of retractional bases for quantized nets in
//! Bourgain-Delbaen-type sup-norm spaces.
//!
//! The crate builds, entirely in exact rational arithmetic:
//!
//! * nested index stages with compatible linear extension operators and their
//!   exact sup-norm operator norms ([`system`]),
//! * the quantized point blocks `M_n`, `C_n`, `D_n` with their restriction
//!   identification tables and the coarse retractions ([`blocks`]),
//! * the one-point-at-a-time refinement: shell orders, the index sets `E(n)`
//!   and `G(n)`, local truncation chains and the intermediate retractions
//!   ([`fine`]),
//! * the global one-point order, the commuting family of global retractions,
//!   greedy net extraction and the perturbation that turns the quantized set
//!   into a separated net ([`assembly`]),
//! * exact Lipschitz-free-space norms over the realized finite metric space,
//!   via a min-cost transport primal and an independent simplex dual, and the
//!   Schauder-projection checks for the linearized retractions ([`free`]).
//!
//! Every claimed inequality and identity is checked exhaustively by the
//! [`verify`] suites with zero numerical tolerance; there is no floating
//! point anywhere in the computation path.

pub mod assembly;
pub mod blocks;
pub mod config;
pub mod error;
pub mod export;
pub mod fine;
pub mod free;
pub mod lipschitz;
pub mod metric;
pub mod net;
pub mod oracle;
pub mod pipeline;
pub mod qvec;
pub mod system;
pub mod verify;

pub use error::Error;
pub use qvec::{QVec, StageChain};

/// Exact scalar used everywhere: an arbitrary-precision rational.
pub type Q = num_rational::BigRational;
/// Arbitrary-precision integer.
pub type Z = num_bigint::BigInt;

use num_traits::{One, Signed, Zero};

/// Rational from a machine integer.
pub fn q_int(n: i64) -> Q {
    Q::from_integer(Z::from(n))
}

/// Rational `p/q` from machine integers. Panics if `den == 0`.
pub fn q_ratio(num: i64, den: i64) -> Q {
    Q::new(Z::from(num), Z::from(den))
}

/// `base^exp` over arbitrary-precision integers.
pub fn z_pow(base: u32, exp: usize) -> Z {
    num_traits::pow(Z::from(base), exp)
}

/// Parses an exact rational written as `p` or `p/q` (no floating point
/// notation is accepted; `q` must be positive).
pub fn parse_q(text: &str) -> Result<Q, Error> {
    let s = text.trim();
    let bad = || Error::Rational(text.to_string());
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let n: Z = num.parse().map_err(|_| bad())?;
    let d: Z = match den {
        Some(d) => d.parse().map_err(|_| bad())?,
        None => Z::one(),
    };
    if d <= Z::zero() {
        return Err(bad());
    }
    Ok(Q::new(n, d))
}

/// Renders a rational as `p` (integral) or `p/q` (reduced).
pub fn fmt_q(q: &Q) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Sup-norm of a rational as a nonnegative machine integer, when integral.
pub fn q_to_u64(q: &Q) -> Option<u64> {
    if q.is_integer() && !q.is_negative() {
        use num_traits::ToPrimitive;
        q.numer().to_u64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_rationals() {
        assert_eq!(parse_q("3/4").unwrap(), q_ratio(3, 4));
        assert_eq!(parse_q("-7/2").unwrap(), q_ratio(-7, 2));
        assert_eq!(parse_q(" 5 ").unwrap(), q_int(5));
        assert_eq!(fmt_q(&q_ratio(6, 4)), "3/2");
        assert_eq!(fmt_q(&q_int(-3)), "-3");
        assert!(parse_q("1.5").is_err());
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("1/-2").is_err());
        assert!(parse_q("").is_err());
    }

    #[test]
    fn integer_powers() {
        assert_eq!(z_pow(2, 0), Z::from(1));
        assert_eq!(z_pow(2, 3), Z::from(8));
        assert_eq!(z_pow(1, 9), Z::from(1));
    }
}
