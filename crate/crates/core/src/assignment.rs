//! Total and partial assignments to variables `x1..xn`.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Values for variables `1..=num_vars`; `None` marks an unassigned variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    /// An assignment with every variable unassigned.
    pub fn empty(num_vars: usize) -> Self {
        Assignment { values: vec![None; num_vars] }
    }

    /// Full assignment whose bit `v-1` of `index` is the value of `xv`.
    pub fn from_index(num_vars: usize, index: u64) -> Self {
        Assignment {
            values: (0..num_vars).map(|i| Some(index >> i & 1 == 1)).collect(),
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Assignment { values: bits.iter().map(|&b| Some(b)).collect() }
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    /// Value of variable `var` (1-based).
    pub fn get(&self, var: usize) -> Option<bool> {
        self.values.get(var - 1).copied().flatten()
    }

    pub fn set(&mut self, var: usize, value: Option<bool>) {
        self.values[var - 1] = value;
    }

    pub fn with(mut self, var: usize, value: bool) -> Self {
        self.set(var, Some(value));
        self
    }

    pub fn values(&self) -> &[Option<bool>] {
        &self.values
    }

    pub fn is_full(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn assigned(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (i + 1, b)))
    }

    /// Dense table index of a full assignment; unassigned variables read as 0.
    pub fn to_index(&self) -> u64 {
        self.values
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, v)| if *v == Some(true) { acc | 1 << i } else { acc })
    }

    /// Union of two assignments, or `None` when they disagree on a variable.
    pub fn merge(&self, other: &Assignment) -> Option<Assignment> {
        let n = self.num_vars().max(other.num_vars());
        let mut out = Assignment::empty(n);
        for var in 1..=n {
            let a = if var <= self.num_vars() { self.get(var) } else { None };
            let b = if var <= other.num_vars() { other.get(var) } else { None };
            out.set(
                var,
                match (a, b) {
                    (Some(x), Some(y)) if x != y => return None,
                    (Some(x), _) | (_, Some(x)) => Some(x),
                    (None, None) => None,
                },
            );
        }
        Some(out)
    }

    /// True when every assigned value of `self` agrees with the full assignment `index`.
    pub fn consistent_with_index(&self, index: u64) -> bool {
        self.assigned().all(|(v, b)| (index >> (v - 1) & 1 == 1) == b)
    }

    /// Parses `x1=1,x3=0`; unlisted variables stay unassigned. The empty
    /// string is the empty assignment.
    pub fn parse(text: &str, num_vars: usize) -> Result<Self> {
        let mut out = Assignment::empty(num_vars);
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let bad = || Error::InvalidArgument(format!("bad assignment item `{item}`"));
            let (lhs, rhs) = item.split_once('=').ok_or_else(bad)?;
            let var: usize = lhs
                .trim()
                .strip_prefix('x')
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?;
            if var == 0 || var > num_vars {
                return Err(Error::InvalidArgument(format!(
                    "variable x{var} out of range 1..={num_vars}"
                )));
            }
            let value = match rhs.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            if out.get(var).is_some_and(|old| old != value) {
                return Err(Error::InvalidArgument(format!("x{var} assigned twice")));
            }
            out.set(var, Some(value));
        }
        Ok(out)
    }
}

/// Serialized in the same `x1=1,x3=0` form as `Display`.
impl Serialize for Assignment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Assignment {
    /// Writes `x1=1,x3=0` form, skipping unassigned variables.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, b) in self.assigned() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "x{v}={}", b as u8)?;
        }
        Ok(())
    }
}

/// Bit string `x1 x2 … xn` for a dense index.
pub fn index_to_bits(num_vars: usize, index: u64) -> String {
    (0..num_vars)
        .map(|i| if index >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn bits_to_index(bits: &str) -> Option<u64> {
    if bits.len() > 64 {
        return None;
    }
    bits.chars().enumerate().try_fold(0u64, |acc, (i, c)| match c {
        '0' => Some(acc),
        '1' => Some(acc | 1 << i),
        _ => None,
    })
}
