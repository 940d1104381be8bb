//! Threshold arithmetic for the majority index.
//!
//! Every quantity that is later fed through a ceiling is computed on exact
//! integer pairs. The only floating-point step is the logarithm in
//! [`top_levels`], whose argument never lands on an integer boundary for the
//! constants involved.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Exact non-negative rational.
pub type Rational = Ratio<u64>;
/// Exact signed rational, used where a bound may go negative.
pub type SignedRational = Ratio<i64>;

/// The 10.24 scale of the candidate bound, as `num / den`.
pub const CANDIDATE_SCALE: (u64, u64) = (1024, 100);
/// The 2.56 factor bounding the mass of non-candidate colours.
pub const NON_CANDIDATE_MASS: (u64, u64) = (256, 100);
/// Additive term in the number of top canonical levels.
pub const TOP_LEVEL_OFFSET: f64 = 2.05;
/// Per-level mass factor of the canonical decomposition.
pub const LEVEL_MASS_FACTOR: u64 = 31;
/// Branching parameter of the weight-balanced tree.
pub const BRANCHING: u64 = 8;
/// Upper bound on the degree of an internal node.
pub const MAX_DEGREE: usize = 32;
/// Lower bound on the degree of an internal node.
pub const MIN_DEGREE: usize = 2;

fn check_alpha(alpha: Rational) -> Result<()> {
    if *alpha.numer() == 0 || alpha.numer() >= alpha.denom() {
        return Err(Error::AlphaOutOfRange(alpha.to_string()));
    }
    Ok(())
}

fn check_beta(beta: Rational) -> Result<()> {
    if *beta.numer() == 0 || 2 * beta.numer() > *beta.denom() {
        return Err(Error::BetaOutOfRange(beta.to_string()));
    }
    Ok(())
}

fn ceil_div(num: u128, den: u128) -> u128 {
    num.div_ceil(den)
}

fn ceil_sqrt(x: u128) -> u128 {
    let s = x.isqrt();
    if s * s < x {
        s + 1
    } else {
        s
    }
}

/// `⌈10.24 / alpha⌉`, the reciprocal of beta.
fn candidate_denominator(alpha: Rational) -> Result<u64> {
    check_alpha(alpha)?;
    let (p, q) = (*alpha.numer() as u128, *alpha.denom() as u128);
    let (s_num, s_den) = (CANDIDATE_SCALE.0 as u128, CANDIDATE_SCALE.1 as u128);
    Ok(ceil_div(s_num * q, s_den * p) as u64)
}

/// Relaxed per-node threshold: `1 / ⌈10.24 / alpha⌉`.
pub fn beta_of(alpha: Rational) -> Result<Rational> {
    Ok(Rational::new(1, candidate_denominator(alpha)?))
}

/// Number of candidates per node the query analysis assumes:
/// `⌈10.24 / alpha⌉ − 1`.
pub fn query_candidate_bound(alpha: Rational) -> Result<u64> {
    Ok(candidate_denominator(alpha)? - 1)
}

/// Length of a stored candidate list: `⌈(1 − β + √(1 − β)) / β⌉`.
///
/// With `β = p/q` this is `⌈(q − p + √(q(q − p))) / p⌉`; since the numerator
/// is compared against an integer multiple of `p`, replacing the square root
/// by its integer ceiling leaves the result unchanged.
pub fn stored_list_size(beta: Rational) -> Result<u64> {
    check_beta(beta)?;
    let (p, q) = (*beta.numer() as u128, *beta.denom() as u128);
    let root = ceil_sqrt(q * (q - p));
    Ok(ceil_div(q - p + root, p) as u64)
}

/// Number of distinct canonical heights inspected per query:
/// `⌈lg(1/alpha)/3 + 2.05⌉`.
pub fn top_levels(alpha: Rational) -> Result<u32> {
    check_alpha(alpha)?;
    let inv = *alpha.denom() as f64 / *alpha.numer() as f64;
    Ok((inv.log2() / 3.0 + TOP_LEVEL_OFFSET).ceil() as u32)
}

/// Updates a candidate list built over `ell` points tolerates before it must
/// be rebuilt: `⌈β·ell / 2⌉`.
pub fn rebuild_threshold(ell: u64, beta: Rational) -> Result<u64> {
    check_beta(beta)?;
    if ell == 0 {
        return Err(Error::Precondition("ell must be positive".into()));
    }
    let (p, q) = (*beta.numer() as u128, *beta.denom() as u128);
    Ok(ceil_div(p * ell as u128, 2 * q) as u64)
}

/// Lower bound on the updates needed to turn a colour with `m` of `ell`
/// points into a β-majority: `(β·ell − m) / (1 − β)`. Requires `ell ≥ 2m + 1`.
pub fn gamma_lower_bound(ell: u64, m: u64, beta: Rational) -> Result<SignedRational> {
    check_beta(beta)?;
    if ell < 2 * m + 1 {
        return Err(Error::Precondition(format!(
            "ell = {ell} must be at least 2m + 1 = {}",
            2 * m + 1
        )));
    }
    let (p, q) = (*beta.numer() as i128, *beta.denom() as i128);
    let num = p * ell as i128 - q * m as i128;
    let den = q - p;
    Ok(SignedRational::new(num as i64, den as i64))
}

/// Scratch-array filter cut-off `alpha·m/4`.
pub fn verify_threshold(m: u64, alpha: Rational) -> Rational {
    alpha * Rational::from_integer(m) / Rational::from_integer(4)
}

/// `count > alpha · m`, evaluated exactly.
pub fn exceeds(count: u64, alpha: Rational, m: u64) -> bool {
    count as u128 * *alpha.denom() as u128 > *alpha.numer() as u128 * m as u128
}

/// `total > alpha · m / 4`, evaluated exactly.
pub fn passes_filter(total: u64, alpha: Rational, m: u64) -> bool {
    4 * total as u128 * *alpha.denom() as u128 > *alpha.numer() as u128 * m as u128
}

/// Parses `"a/b"`, a decimal such as `"0.125"`, or an integer.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::BadRational(s.to_string());
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(a, b));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if (int.is_empty() && frac.is_empty())
        || !int.bytes().all(|b| b.is_ascii_digit())
        || !frac.bytes().all(|b| b.is_ascii_digit())
        || frac.len() > 18
    {
        return Err(bad());
    }
    let den = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let num = int
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Rational::new(num, den))
}

/// Every derived constant for one fixed alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlphaConfig {
    pub alpha: Rational,
    pub beta: Rational,
    /// Candidate count `k` the query analysis is instantiated with.
    pub query_bound: u64,
    /// Entries kept per candidate list.
    pub list_size: u64,
    /// Distinct canonical heights inspected per query.
    pub top_levels: u32,
    /// Nodes at or below this weight keep no candidate list.
    pub prune_cutoff: u64,
}

impl AlphaConfig {
    pub fn new(alpha: Rational) -> Result<Self> {
        let beta = beta_of(alpha)?;
        let query_bound = query_candidate_bound(alpha)?;
        let list_size = stored_list_size(beta)?;
        // The non-candidate mass argument needs every list to hold at least the top-k colours.
        assert!(list_size >= query_bound);
        Ok(Self {
            alpha,
            beta,
            query_bound,
            list_size,
            top_levels: top_levels(alpha)?,
            prune_cutoff: 2 * list_size,
        })
    }

    pub fn parse(alpha: &str) -> Result<Self> {
        Self::new(parse_rational(alpha)?)
    }

    pub fn rebuild_threshold(&self, ell: u64) -> u64 {
        rebuild_threshold(ell.max(1), self.beta).expect("beta validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(p: u64, q: u64) -> Rational {
        Rational::new(p, q)
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_of(r(1, 2)).unwrap(), r(1, 21));
        assert_eq!(beta_of(r(999, 1000)).unwrap(), r(1, 11));
        assert_eq!(beta_of(r(1, 10)).unwrap(), r(1, 103));
    }

    #[test]
    fn alpha_domain() {
        for bad in [r(0, 1), r(1, 1), r(3, 2)] {
            assert!(matches!(beta_of(bad), Err(Error::AlphaOutOfRange(_))));
            assert!(query_candidate_bound(bad).is_err());
            assert!(top_levels(bad).is_err());
        }
    }

    #[test]
    fn candidate_bound_examples() {
        assert_eq!(query_candidate_bound(r(1, 2)).unwrap(), 20);
        assert_eq!(query_candidate_bound(r(1, 10)).unwrap(), 102);
        assert_eq!(query_candidate_bound(r(999, 1000)).unwrap(), 10);
    }

    #[test]
    fn list_size_examples() {
        assert_eq!(stored_list_size(r(1, 2)).unwrap(), 3);
        assert_eq!(stored_list_size(r(1, 21)).unwrap(), 41);
        assert!(stored_list_size(r(2, 3)).is_err());
        assert!(stored_list_size(r(0, 3)).is_err());
    }

    #[test]
    fn list_size_matches_float_evaluation() {
        // Away from integer boundaries the float formula and the exact one agree.
        for b in 2..2000u64 {
            let beta = 1.0 / b as f64;
            let v = (1.0 - beta + (1.0 - beta).sqrt()) / beta;
            if (v - v.round()).abs() > 1e-6 {
                assert_eq!(stored_list_size(r(1, b)).unwrap(), v.ceil() as u64, "b = {b}");
            }
        }
    }

    #[test]
    fn top_level_examples() {
        assert_eq!(top_levels(r(1, 2)).unwrap(), 3);
        assert_eq!(top_levels(r(1, 8)).unwrap(), 4);
        assert_eq!(top_levels(r(1, 64)).unwrap(), 5);
    }

    #[test]
    fn rebuild_threshold_examples() {
        assert_eq!(rebuild_threshold(42, r(1, 21)).unwrap(), 1);
        assert_eq!(rebuild_threshold(420, r(1, 21)).unwrap(), 10);
        assert_eq!(rebuild_threshold(1, r(1, 2)).unwrap(), 1);
        assert!(rebuild_threshold(0, r(1, 2)).is_err());
    }

    #[test]
    fn gamma_bound_examples() {
        assert_eq!(gamma_lower_bound(21, 0, r(1, 2)).unwrap(), SignedRational::from_integer(21));
        assert_eq!(gamma_lower_bound(100, 10, r(1, 4)).unwrap(), SignedRational::from_integer(20));
        assert!(matches!(gamma_lower_bound(4, 2, r(1, 2)), Err(Error::Precondition(_))));
        // Boundary of the hypothesis.
        let g = gamma_lower_bound(7, 3, r(1, 2)).unwrap();
        assert_eq!(g, SignedRational::new(1, 1));
    }

    #[test]
    fn verify_threshold_examples() {
        assert_eq!(verify_threshold(0, r(1, 3)), r(0, 1));
        assert_eq!(verify_threshold(400, r(1, 2)), r(50, 1));
        assert_eq!(verify_threshold(7, r(1, 10)), r(7, 40));
    }

    #[test]
    fn exact_comparisons() {
        assert!(!exceeds(1, r(1, 2), 2));
        assert!(exceeds(2, r(1, 2), 3));
        assert!(!passes_filter(50, r(1, 2), 400));
        assert!(passes_filter(51, r(1, 2), 400));
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_rational("1/10").unwrap(), r(1, 10));
        assert_eq!(parse_rational("0.125").unwrap(), r(1, 8));
        assert_eq!(parse_rational(".5").unwrap(), r(1, 2));
        assert_eq!(parse_rational("0.999").unwrap(), r(999, 1000));
        for bad in ["", "x", "1/0", "-0.5", "1e-3", "."] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn random_alpha_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let q = rng.random_range(2..1_000_000u64);
            let p = rng.random_range(1..q);
            let alpha = r(p, q);
            let beta = beta_of(alpha).unwrap();
            assert!(*beta.numer() > 0 && beta <= r(1, 2));
            let size = stored_list_size(beta).unwrap();
            let cap = (Rational::from_integer(2) / beta).ceil().to_integer();
            assert!(size <= cap);
            let cfg = AlphaConfig::new(alpha).unwrap();
            assert_eq!(cfg.query_bound + 1, *beta.denom());
            assert!(cfg.list_size >= cfg.query_bound);
        }
    }

    #[test]
    fn monotone_in_alpha() {
        let mut prev: Option<(u64, u64)> = None;
        for p in 1..1000u64 {
            let alpha = r(p, 1000);
            let k = query_candidate_bound(alpha).unwrap();
            let s = stored_list_size(beta_of(alpha).unwrap()).unwrap();
            if let Some((pk, ps)) = prev {
                assert!(k <= pk && s <= ps);
            }
            prev = Some((k, s));
        }
    }
}
