//! Distribution pairs that separate distance guarantees from query
//! guarantees. Built in exact rational arithmetic so the advertised
//! equalities can be checked exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::assignment::Assignment;
use crate::distribution::{ExactDistribution, Mass};
use crate::divergence::{tvd_exact, Divergence};
use crate::error::{Error, Result};

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Parses a decimal such as `0.001` or `10` into an exact rational.
pub fn parse_decimal(text: &str) -> Result<BigRational> {
    let bad = || Error::InvalidArgument(format!("not a decimal number: `{text}`"));
    let t = text.trim();
    let (neg, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, den);
    Ok(if neg { -r } else { r })
}

/// `Q = P/K` on an event `A` with `P(A) = δ`, `Q = λP` elsewhere,
/// `λ = (1 − δ/K)/(1 − δ)`.
#[derive(Debug, Clone)]
pub struct ScaledFamily {
    pub p: ExactDistribution,
    pub q: ExactDistribution,
    pub event: Vec<u64>,
    pub k: BigRational,
    pub delta: BigRational,
    pub lambda: BigRational,
}

impl ScaledFamily {
    /// Closed form of `D_f(P‖Q)` for this family.
    pub fn closed_form(&self, d: &Divergence) -> f64 {
        scaled_family_closed_form(d, self.k.to_f64(), self.delta.to_f64())
    }

    /// Largest `P(x)/Q(x)`, computed exactly.
    pub fn max_ratio(&self) -> BigRational {
        self.p
            .mass()
            .iter()
            .zip(self.q.mass())
            .filter(|(a, b)| !a.is_zero() && !b.is_zero())
            .map(|(a, b)| a / b)
            .fold(BigRational::zero(), |m, r| if r > m { r } else { m })
    }
}

/// `δ f(K)/K + (1 − δ/K) f((1 − δ)/(1 − δ/K))`.
pub fn scaled_family_closed_form(d: &Divergence, k: f64, delta: f64) -> f64 {
    delta * d.generator(k) / k + (1.0 - delta / k) * d.generator((1.0 - delta) / (1.0 - delta / k))
}

/// Shortest prefix of assignments (in index order) whose mass is exactly `δ`.
pub fn prefix_event(p: &ExactDistribution, delta: &BigRational) -> Result<Vec<u64>> {
    let mut acc = BigRational::zero();
    for (i, m) in p.mass().iter().enumerate() {
        acc += m;
        if acc == *delta {
            return Ok((0..=i as u64).collect());
        }
        if acc > *delta {
            break;
        }
    }
    Err(Error::InvalidArgument(format!("no prefix of assignments has mass exactly {delta}")))
}

/// A base distribution for the scaled family: mass `δ` on the first
/// assignment, the rest spread evenly.
pub fn scaled_base(num_vars: usize, delta: &BigRational) -> Result<ExactDistribution> {
    if !(delta.is_positive() && *delta < BigRational::one()) {
        return Err(Error::InvalidArgument(format!("δ = {delta} must lie in (0, 1)")));
    }
    let size = 1usize << num_vars;
    let rest = (BigRational::one() - delta) / BigRational::from_integer(BigInt::from(size - 1));
    let mut mass = vec![rest; size];
    mass[0] = delta.clone();
    ExactDistribution::new(num_vars, mass)
}

pub fn build_scaled_family(
    p: &ExactDistribution,
    event: &[u64],
    k: &BigRational,
) -> Result<ScaledFamily> {
    if !k.is_positive() {
        return Err(Error::InvalidArgument(format!("K = {k} must be positive")));
    }
    if !p.is_normalized() {
        return Err(Error::InvalidArgument("P must be normalized".into()));
    }
    let delta = event.iter().fold(BigRational::zero(), |acc, &i| acc + p.get(i));
    if delta.is_zero() || delta >= BigRational::one() {
        return Err(Error::InvalidArgument(format!("P(A) = {delta} must lie strictly in (0, 1)")));
    }
    let one = BigRational::one();
    let lambda = (&one - &delta / k) / (&one - &delta);
    let mut in_event = vec![false; p.mass().len()];
    event.iter().for_each(|&i| in_event[i as usize] = true);
    let mass = p
        .mass()
        .iter()
        .zip(&in_event)
        .map(|(m, &a)| if a { m / k } else { m * &lambda })
        .collect();
    let q = ExactDistribution::new(p.num_vars(), mass)?;
    debug_assert!(q.is_normalized());
    Ok(ScaledFamily {
        p: p.clone(),
        q,
        event: event.to_vec(),
        k: k.clone(),
        delta,
        lambda,
    })
}

/// `Q` moves `kεP(e)` of mass from `(y₁, e)` to `(y*, e)`, where `y*`
/// maximizes `P(y | e)`.
#[derive(Debug, Clone)]
pub struct ConditionalFamily {
    pub p: ExactDistribution,
    pub q: ExactDistribution,
    pub evidence: Assignment,
    pub y_star: u64,
    pub y_one: u64,
    pub k: BigRational,
    pub eps: BigRational,
    pub p_e: BigRational,
}

impl ConditionalFamily {
    pub fn tvd(&self) -> BigRational {
        tvd_exact(&self.p, &self.q).expect("same dimensions")
    }

    /// `|P(y* | e) − Q(y* | e)|`.
    pub fn conditional_gap(&self) -> BigRational {
        let q_e = self.q.marginal(&self.evidence);
        let p_cond = self.p.get(self.y_star) / &self.p_e;
        let q_cond = self.q.get(self.y_star) / q_e;
        (p_cond - q_cond).abs()
    }

    /// `kε`: the MAP conditional gap the construction promises.
    pub fn promised_gap(&self) -> BigRational {
        &self.k * &self.eps
    }

    /// `kε·P(e)`: the promised total variation distance.
    pub fn promised_tvd(&self) -> BigRational {
        &self.k * &self.eps * &self.p_e
    }
}

pub fn build_conditional_counterexample(
    p: &ExactDistribution,
    evidence: &Assignment,
    k: &BigRational,
    eps: &BigRational,
) -> Result<ConditionalFamily> {
    if evidence.num_vars() != p.num_vars() {
        return Err(Error::DimensionMismatch(evidence.num_vars(), p.num_vars()));
    }
    if !k.is_positive() || !eps.is_positive() {
        return Err(Error::InvalidArgument("k and ε must be positive".into()));
    }
    let p_e = p.marginal(evidence);
    if p_e.is_zero() || p_e >= k.recip() {
        return Err(Error::InvalidArgument(format!("P(e) = {p_e} must lie in (0, 1/k)")));
    }
    let shift = k * eps * &p_e;
    // completions of e, ordered by decreasing mass, then lexicographically
    let n = p.num_vars();
    let lex_key = |i: u64| i.reverse_bits() >> (64 - n);
    let mut completions: Vec<u64> =
        (0..1u64 << n).filter(|&i| evidence.consistent_with_index(i)).collect();
    completions.sort_by(|&a, &b| p.get(b).cmp(p.get(a)).then(lex_key(a).cmp(&lex_key(b))));
    let y_star = completions[0];
    let y_one = completions[1..]
        .iter()
        .copied()
        .find(|&i| *p.get(i) >= shift)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("no second completion of e carries kεP(e) = {shift}"))
        })?;
    let mut mass = p.mass().to_vec();
    mass[y_star as usize] += &shift;
    mass[y_one as usize] -= &shift;
    let q = ExactDistribution::new(n, mass)?;
    Ok(ConditionalFamily {
        p: p.clone(),
        q,
        evidence: evidence.clone(),
        y_star,
        y_one,
        k: k.clone(),
        eps: eps.clone(),
        p_e,
    })
}

/// A base distribution for the conditional family over `num_vars ≥ 2`
/// variables with evidence `x1 = 1` of mass `p_e`, split evenly between two
/// completions; the remaining mass is spread over `x1 = 0`.
pub fn conditional_base(num_vars: usize, p_e: &BigRational) -> Result<(ExactDistribution, Assignment)> {
    if num_vars < 2 {
        return Err(Error::InvalidArgument("need at least two variables".into()));
    }
    if !(p_e.is_positive() && *p_e < BigRational::one()) {
        return Err(Error::InvalidArgument(format!("P(e) = {p_e} must lie in (0, 1)")));
    }
    let size = 1usize << num_vars;
    let half = size / 2;
    let rest = (BigRational::one() - p_e) / BigRational::from_integer(BigInt::from(half));
    let mut mass = vec![BigRational::zero(); size];
    for (i, m) in mass.iter_mut().enumerate() {
        if i & 1 == 0 {
            *m = rest.clone();
        }
    }
    let two = BigRational::from_integer(BigInt::from(2));
    mass[0b01] = p_e / &two;
    mass[0b11] = p_e / &two;
    let e = Assignment::empty(num_vars).with(1, true);
    Ok((ExactDistribution::new(num_vars, mass)?, e))
}

/// `Q` is `P` moved onto assignments outside `P`'s support, keeping the
/// multiset of masses: equal maximum probability, total variation 1.
#[derive(Debug, Clone)]
pub struct DisjointFamily<T> {
    pub p: crate::distribution::Distribution<T>,
    pub q: crate::distribution::Distribution<T>,
}

pub fn build_disjoint_map_counterexample<T: Mass>(
    p: &crate::distribution::Distribution<T>,
) -> Result<DisjointFamily<T>> {
    let support: Vec<u64> = p.support().collect();
    let free: Vec<u64> =
        (0..p.mass().len() as u64).filter(|&i| p.get(i).is_zero()).collect();
    if support.len() > free.len() {
        return Err(Error::InvalidArgument(format!(
            "support of {} assignments cannot be relocated into {} free ones",
            support.len(),
            free.len()
        )));
    }
    let mut mass = vec![T::zero(); p.mass().len()];
    for (&from, &to) in support.iter().zip(&free) {
        mass[to as usize] = p.get(from).clone();
    }
    Ok(DisjointFamily { p: p.clone(), q: crate::distribution::Distribution::new(p.num_vars(), mass)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::DenseDistribution;
    use crate::divergence::{f_divergence, is_relative_approximator, tvd, WorstRatio};

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal("0.01").unwrap(), rational(1, 100));
        assert_eq!(parse_decimal("10").unwrap(), rational(10, 1));
        assert_eq!(parse_decimal("-2.5").unwrap(), rational(-5, 2));
        assert!(parse_decimal("1e-3").is_err());
        assert!(parse_decimal(".").is_err());
    }

    #[test]
    fn scaled_family_k2_half() {
        let delta = rational(1, 2);
        let p = scaled_base(3, &delta).unwrap();
        let event = prefix_event(&p, &delta).unwrap();
        assert_eq!(event, vec![0]);
        let fam = build_scaled_family(&p, &event, &rational(2, 1)).unwrap();
        assert!(fam.q.is_normalized());
        assert_eq!(fam.max_ratio(), rational(2, 1));
        let direct = f_divergence(&fam.p.to_f64(), &fam.q.to_f64(), &Divergence::Kl).unwrap();
        assert!((direct - fam.closed_form(&Divergence::Kl)).abs() < 1e-9);
        let rel = is_relative_approximator(&fam.p, &fam.q, &rational(1, 1)).unwrap();
        assert_eq!(rel.worst, WorstRatio::Finite(rational(2, 1)));
    }

    #[test]
    fn closed_form_vanishes_as_delta_shrinks() {
        let d = Divergence::Kl;
        let v: Vec<f64> =
            [1e-1, 1e-2, 1e-3, 1e-6].iter().map(|&dl| scaled_family_closed_form(&d, 10.0, dl)).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(v[3] < 1e-5);
    }

    #[test]
    fn scaled_family_rejects_bad_parameters() {
        let p = scaled_base(2, &rational(1, 4)).unwrap();
        assert!(build_scaled_family(&p, &[], &rational(2, 1)).is_err());
        assert!(build_scaled_family(&p, &[0], &rational(0, 1)).is_err());
        assert!(build_scaled_family(&p, &[0, 1, 2, 3], &rational(2, 1)).is_err());
    }

    #[test]
    fn conditional_family_equalities() {
        let (p, e) = conditional_base(4, &rational(1, 20)).unwrap();
        let fam = build_conditional_counterexample(&p, &e, &rational(10, 1), &rational(1, 20)).unwrap();
        assert_eq!(fam.tvd(), rational(1, 40));
        assert_eq!(fam.conditional_gap(), rational(1, 2));
        assert_eq!(fam.tvd(), fam.promised_tvd());
        assert_eq!(fam.conditional_gap(), fam.promised_gap());
    }

    #[test]
    fn conditional_family_k1_gap_is_eps() {
        let (p, e) = conditional_base(3, &rational(1, 20)).unwrap();
        let fam = build_conditional_counterexample(&p, &e, &rational(1, 1), &rational(1, 10)).unwrap();
        assert_eq!(fam.conditional_gap(), rational(1, 10));
    }

    #[test]
    fn conditional_family_preconditions() {
        let (p, e) = conditional_base(3, &rational(1, 5)).unwrap();
        // P(e) = 1/5 is not below 1/k = 1/10
        assert!(build_conditional_counterexample(&p, &e, &rational(10, 1), &rational(1, 20)).is_err());
        let (p, e) = conditional_base(3, &rational(1, 20)).unwrap();
        // kε = 0.8 exceeds the mass available on the second completion
        assert!(build_conditional_counterexample(&p, &e, &rational(16, 1), &rational(1, 20)).is_err());
    }

    #[test]
    fn disjoint_pair() {
        // uniform on {00, 01}: indices 0 and 2
        let p = DenseDistribution::new(2, vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        let fam = build_disjoint_map_counterexample(&p).unwrap();
        assert_eq!(fam.q.mass(), &[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(tvd(&fam.p, &fam.q).unwrap(), 1.0);
        let dense = DenseDistribution::new(1, vec![0.5, 0.5]).unwrap();
        assert!(build_disjoint_map_counterexample(&dense).is_err());
    }
}
