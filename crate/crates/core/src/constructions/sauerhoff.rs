//! The Sauerhoff function `S_n = R_n ∨ C_n` over an `n × n` Boolean matrix.
//!
//! `g_n` tests whether a row's sum is divisible by 3, `R_n` is the parity of
//! the `g_n` values of all rows and `C_n` is `R_n` of the transpose. Matrix
//! entry `(i, j)` (1-based) is variable `(i−1)·n + j`.

use serde::Serialize;

use crate::circuit::{Circuit, CircuitBuilder, Flavor, NodeId};
use crate::error::{Error, Result};

/// `g`: 1 iff the number of ones is divisible by 3.
pub fn g(bits: &[bool]) -> bool {
    bits.iter().filter(|&&b| b).count() % 3 == 0
}

pub fn var_of(n: usize, row: usize, col: usize) -> usize {
    (row - 1) * n + col
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SauerhoffEval {
    /// `g_n` of each row.
    pub rows: Vec<bool>,
    /// `g_n` of each column.
    pub cols: Vec<bool>,
    pub r: bool,
    pub c: bool,
    pub s: bool,
}

/// Direct evaluation of `g_n`, `R_n`, `C_n` and `S_n` on a row-major matrix.
pub fn sauerhoff_eval(n: usize, matrix: &[bool]) -> Result<SauerhoffEval> {
    if matrix.len() != n * n {
        return Err(Error::InvalidArgument(format!(
            "S_{n} takes {} bits, got {}",
            n * n,
            matrix.len()
        )));
    }
    let rows: Vec<bool> = matrix.chunks(n).map(g).collect();
    let cols: Vec<bool> = (0..n)
        .map(|j| g(&(0..n).map(|i| matrix[i * n + j]).collect::<Vec<_>>()))
        .collect();
    let r = rows.iter().fold(false, |acc, &b| acc ^ b);
    let c = cols.iter().fold(false, |acc, &b| acc ^ b);
    Ok(SauerhoffEval { rows, cols, r, c, s: r || c })
}

/// `S_n` at a dense index (bit `v−1` holds variable `v`).
pub fn s_n_index(n: usize, index: u64) -> bool {
    let bits: Vec<bool> = (0..n * n).map(|i| index >> i & 1 == 1).collect();
    sauerhoff_eval(n, &bits).expect("index covers the matrix").s
}

/// Complete, layered OBDD for "parity of the per-group mod-3 tests", reading
/// `order` in groups of `n` variables. Each layer has at most six states
/// (running count mod 3, parity so far). Returns `None` for the constant 0.
fn mod3_parity_obdd(b: &mut CircuitBuilder, n: usize, order: &[usize]) -> Option<NodeId> {
    const STATES: usize = 6;
    let state = |count: usize, parity: bool| count * 2 + parity as usize;
    let layers = order.len();
    // next[s]: node for the remaining layers in state s; None is false
    let mut next: Vec<Option<NodeId>> = Vec::new();
    for layer in (0..layers).rev() {
        let var = order[layer];
        let closes_group = layer % n == n - 1;
        let mut cur = vec![None; STATES];
        for (s, slot) in cur.iter_mut().enumerate() {
            let (count, parity) = (s / 2, s % 2 == 1);
            let mut branches = Vec::with_capacity(2);
            for value in [true, false] {
                let mut count2 = (count + value as usize) % 3;
                let mut parity2 = parity;
                if closes_group {
                    parity2 ^= count2 == 0;
                    count2 = 0;
                }
                let lit = b.lit(var, value);
                let branch = if layer + 1 == layers {
                    parity2.then_some(lit)
                } else {
                    next[state(count2, parity2)].map(|rest| b.product(vec![lit, rest]))
                };
                branches.extend(branch);
            }
            *slot = match branches.len() {
                0 => None,
                1 => Some(branches[0]),
                _ => Some(b.or(branches)),
            };
        }
        next = cur;
    }
    next[state(0, false)]
}

/// DNNF for `S_n`: the disjunction of two OBDDs, one for `R_n` reading the
/// matrix row by row and one for `C_n` reading it column by column. Each
/// OBDD layer holds at most six decision nodes, so the size is `O(n²)`.
pub fn build_sauerhoff_dnnf(n: usize) -> Result<Circuit> {
    if n < 2 {
        return Err(Error::InvalidArgument("the Sauerhoff construction needs n >= 2".into()));
    }
    let rows: Vec<usize> = (1..=n).flat_map(|i| (1..=n).map(move |j| var_of(n, i, j))).collect();
    let cols: Vec<usize> = (1..=n).flat_map(|j| (1..=n).map(move |i| var_of(n, i, j))).collect();
    let mut b = CircuitBuilder::new(n * n);
    let r_root = mod3_parity_obdd(&mut b, n, &rows).expect("R_n is satisfiable");
    let c_root = mod3_parity_obdd(&mut b, n, &cols).expect("C_n is satisfiable");
    let root = b.or(vec![r_root, c_root]);
    b.build(root, Flavor::Logical, true)
}

/// The OBDD for `R_n` alone (row-major order).
pub fn build_row_obdd(n: usize) -> Result<Circuit> {
    let order: Vec<usize> = (1..=n * n).collect();
    let mut b = CircuitBuilder::new(n * n);
    let root = mod3_parity_obdd(&mut b, n, &order)
        .ok_or_else(|| Error::InvalidArgument("empty OBDD".into()))?;
    b.build(root, Flavor::Logical, true)
}

/// The OBDD for `C_n` alone (column-major order).
pub fn build_col_obdd(n: usize) -> Result<Circuit> {
    let order: Vec<usize> = (1..=n).flat_map(|j| (1..=n).map(move |i| var_of(n, i, j))).collect();
    let mut b = CircuitBuilder::new(n * n);
    let root = mod3_parity_obdd(&mut b, n, &order)
        .ok_or_else(|| Error::InvalidArgument("empty OBDD".into()))?;
    b.build(root, Flavor::Logical, true)
}

/// `P_n`: the Sauerhoff DNNF with literals as indicators, `∨`/`∧` as sum and
/// product nodes with equal weights, then smoothed. Its support is
/// `S_n⁻¹(1)`; it is not uniform over that set.
pub fn build_p_n(n: usize) -> Result<Circuit> {
    build_sauerhoff_dnnf(n)?.from_logical()
}

/// Both circuits for one `n`.
#[derive(Debug, Clone)]
pub struct SauerhoffInstance {
    pub n: usize,
    pub dnnf: Circuit,
    pub pc: Circuit,
}

impl SauerhoffInstance {
    pub fn new(n: usize) -> Result<Self> {
        let dnnf = build_sauerhoff_dnnf(n)?;
        let pc = dnnf.from_logical()?;
        Ok(SauerhoffInstance { n, dnnf, pc })
    }

    pub fn eval(&self, matrix: &[bool]) -> Result<SauerhoffEval> {
        sauerhoff_eval(self.n, matrix)
    }
}
