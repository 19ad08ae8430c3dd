//! CNF formulas over `x1..xn`, evaluated by enumeration.

use num_bigint::BigUint;
use rand::Rng;

use crate::error::{Error, Result};
use crate::oracle::{rng, OracleBudget};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    num_vars: usize,
    clauses: Vec<Vec<i64>>,
}

impl Cnf {
    pub fn new(num_vars: usize, clauses: Vec<Vec<i64>>) -> Result<Cnf> {
        for cl in &clauses {
            if let Some(&l) = cl.iter().find(|&&l| l == 0 || l.unsigned_abs() as usize > num_vars) {
                return Err(Error::InvalidArgument(format!(
                    "literal {l} outside 1..={num_vars}"
                )));
            }
        }
        Ok(Cnf { num_vars, clauses })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i64>] {
        &self.clauses
    }

    /// Truth value at dense index `index` (bit `v-1` holds `xv`).
    pub fn eval(&self, index: u64) -> bool {
        self.clauses.iter().all(|cl| {
            cl.iter().any(|&l| (index >> (l.unsigned_abs() - 1) & 1 == 1) == (l > 0))
        })
    }

    pub fn models(&self) -> Result<Vec<u64>> {
        OracleBudget::from_env().check_vars(self.num_vars, "CNF model enumeration")?;
        Ok((0..1u64 << self.num_vars).filter(|&i| self.eval(i)).collect())
    }

    pub fn model_count(&self) -> Result<BigUint> {
        Ok(BigUint::from(self.models()?.len()))
    }
}

/// Seeded random `width`-CNF with distinct variables per clause.
pub fn random_cnf(num_vars: usize, num_clauses: usize, width: usize, seed: u64) -> Cnf {
    let mut r = rng(seed);
    let width = width.min(num_vars);
    let clauses = (0..num_clauses)
        .map(|_| {
            let mut vars: Vec<i64> = Vec::with_capacity(width);
            while vars.len() < width {
                let v = r.gen_range(1..=num_vars as i64);
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            vars.into_iter().map(|v| if r.gen_bool(0.5) { v } else { -v }).collect()
        })
        .collect();
    Cnf { num_vars, clauses }
}
