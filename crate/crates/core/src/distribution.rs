//! Dense probability tables over all `2^n` assignments.
//!
//! Tables are generic over the mass type so the same code serves floating
//! point work and exact rational checks.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

use crate::assignment::{index_to_bits, Assignment};
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

/// Tolerance on `Σ mass = 1` for floating-point tables.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Probability mass: `f64` or an exact rational.
pub trait Mass: Clone + PartialOrd + Num + Signed + Debug {
    fn total(xs: &[Self]) -> Self;
    fn to_f64(&self) -> f64;
    fn is_one_approx(&self) -> bool;
}

impl Mass for f64 {
    fn total(xs: &[f64]) -> f64 {
        pairwise_sum(xs)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_one_approx(&self) -> bool {
        (self - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }
}

impl Mass for BigRational {
    fn total(xs: &[BigRational]) -> BigRational {
        xs.iter().fold(BigRational::zero(), |acc, x| acc + x)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_one_approx(&self) -> bool {
        *self == BigRational::from_integer(BigInt::from(1))
    }
}

/// Mass table indexed by assignment: bit `v-1` of the index is `xv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    num_vars: usize,
    mass: Vec<T>,
}

pub type DenseDistribution = Distribution<f64>;
pub type ExactDistribution = Distribution<BigRational>;

impl<T: Mass> Distribution<T> {
    pub fn new(num_vars: usize, mass: Vec<T>) -> Result<Self> {
        if num_vars >= usize::BITS as usize || mass.len() != 1usize << num_vars {
            return Err(Error::InvalidArgument(format!(
                "table of length {} does not cover {num_vars} variables",
                mass.len()
            )));
        }
        if let Some(i) = mass.iter().position(|m| m.is_negative()) {
            return Err(Error::InvalidArgument(format!(
                "negative mass at {}",
                index_to_bits(num_vars, i as u64)
            )));
        }
        Ok(Distribution { num_vars, mass })
    }

    pub fn point(num_vars: usize, index: u64) -> Self {
        let mut mass = vec![T::zero(); 1 << num_vars];
        mass[index as usize] = T::one();
        Distribution { num_vars, mass }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn get(&self, index: u64) -> &T {
        &self.mass[index as usize]
    }

    pub fn total(&self) -> T {
        T::total(&self.mass)
    }

    pub fn is_normalized(&self) -> bool {
        self.total().is_one_approx()
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_zero())
            .map(|(i, _)| i as u64)
    }

    pub fn support_size(&self) -> usize {
        self.support().count()
    }

    /// Probability of a partial assignment (sum over its completions).
    pub fn marginal(&self, y: &Assignment) -> T {
        let terms: Vec<T> = self
            .mass
            .iter()
            .enumerate()
            .filter(|(i, _)| y.consistent_with_index(*i as u64))
            .map(|(_, m)| m.clone())
            .collect();
        T::total(&terms)
    }

    /// Largest mass among completions of a partial assignment.
    pub fn max_completion(&self, y: &Assignment) -> T {
        self.mass
            .iter()
            .enumerate()
            .filter(|(i, _)| y.consistent_with_index(*i as u64))
            .map(|(_, m)| m.clone())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Marginals of all `3^n` partial assignments, indexed by
    /// [`partial_code`].
    pub fn partial_marginals(&self) -> Vec<T> {
        self.ternary_table(|a, b| a + b)
    }

    /// `max` over completions for every partial assignment, indexed like
    /// [`Self::partial_marginals`].
    pub fn partial_max(&self) -> Vec<T> {
        self.ternary_table(|a, b| if b > a { b } else { a })
    }

    fn ternary_table(&self, combine: impl Fn(T, T) -> T) -> Vec<T> {
        let n = self.num_vars;
        let size = 3usize.pow(n as u32);
        let mut table = vec![T::zero(); size];
        for (index, m) in self.mass.iter().enumerate() {
            table[full_code(index as u64, n)] = m.clone();
        }
        let mut stride = 1usize;
        for _ in 0..n {
            for code in 0..size {
                if code / stride % 3 == 2 {
                    let zero = table[code - 2 * stride].clone();
                    let one = table[code - stride].clone();
                    table[code] = combine(zero, one);
                }
            }
            stride *= 3;
        }
        table
    }

    pub fn map<U: Mass>(&self, f: impl Fn(&T) -> U) -> Distribution<U> {
        Distribution { num_vars: self.num_vars, mass: self.mass.iter().map(f).collect() }
    }

    pub fn to_f64(&self) -> DenseDistribution {
        self.map(Mass::to_f64)
    }
}

impl DenseDistribution {
    /// Uniform mass over the given assignments.
    pub fn uniform_over(num_vars: usize, models: &[u64]) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument("uniform distribution over no models".into()));
        }
        let w = 1.0 / models.len() as f64;
        let mut mass = vec![0.0; 1 << num_vars];
        for &m in models {
            mass[m as usize] = w;
        }
        Ok(Distribution { num_vars, mass })
    }

    /// Exact rational copy; every finite `f64` is a dyadic rational.
    pub fn to_exact(&self) -> ExactDistribution {
        self.map(|&m| BigRational::from_float(m).expect("finite mass"))
    }

    /// Divides by the total mass.
    pub fn normalized(&self) -> Result<Self> {
        let z = self.total();
        if z <= 0.0 {
            return Err(Error::InvalidArgument("cannot normalize a zero table".into()));
        }
        Ok(self.map(|m| m / z))
    }
}

/// Base-3 code of a full assignment: digit `v-1` is the value of `xv`.
pub fn full_code(index: u64, num_vars: usize) -> usize {
    (0..num_vars).rev().fold(0usize, |acc, i| acc * 3 + (index >> i & 1) as usize)
}

/// Base-3 code of a partial assignment; digit 2 marks an unassigned variable.
pub fn partial_code(y: &Assignment) -> usize {
    y.values().iter().rev().fold(0usize, |acc, v| {
        acc * 3
            + match v {
                Some(false) => 0,
                Some(true) => 1,
                None => 2,
            }
    })
}

pub fn decode_partial(code: usize, num_vars: usize) -> Assignment {
    let mut y = Assignment::empty(num_vars);
    let mut c = code;
    for var in 1..=num_vars {
        match c % 3 {
            0 => y.set(var, Some(false)),
            1 => y.set(var, Some(true)),
            _ => {}
        }
        c /= 3;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> DenseDistribution {
        DenseDistribution::new(3, vec![0.1, 0.2, 0.05, 0.15, 0.0, 0.3, 0.1, 0.1]).unwrap()
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(DenseDistribution::new(2, vec![0.5, 0.5]).is_err());
        assert!(DenseDistribution::new(1, vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn partial_marginals_match_direct_sums() {
        let p = table();
        let all = p.partial_marginals();
        let max = p.partial_max();
        assert_eq!(all.len(), 27);
        for code in 0..27 {
            let y = decode_partial(code, 3);
            assert_eq!(partial_code(&y), code);
            assert!((all[code] - p.marginal(&y)).abs() < 1e-15, "code {code}");
            assert_eq!(max[code], p.max_completion(&y));
        }
        assert!((all[partial_code(&Assignment::empty(3))] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_copy_is_normalized_when_dyadic() {
        let p = DenseDistribution::new(2, vec![0.25, 0.25, 0.5, 0.0]).unwrap();
        assert!(p.to_exact().is_normalized());
        assert_eq!(p.support().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(p.to_exact().to_f64(), p);
    }
}
