//! Reference computations written directly from the definitions, sharing no
//! code with the library beyond the circuit data types.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use pcircuits::{Circuit, Node};

pub fn bit(x: u64, var: usize) -> bool {
    x >> (var - 1) & 1 == 1
}

/// Circuit output at a full assignment, node by node.
pub fn eval(c: &Circuit, x: u64) -> f64 {
    let mut v = vec![0.0; c.nodes().len()];
    for (i, node) in c.nodes().iter().enumerate() {
        v[i] = match node {
            Node::Leaf(l) => {
                if bit(x, l.var) == l.positive {
                    1.0
                } else {
                    0.0
                }
            }
            Node::Product(cs) => {
                let mut p = 1.0;
                for &ch in cs {
                    p *= v[ch];
                }
                p
            }
            Node::Sum(es) => {
                let mut s = 0.0;
                for &(ch, w) in es {
                    s += w * v[ch];
                }
                s
            }
        };
    }
    v[c.root()]
}

pub fn node_values(c: &Circuit, x: u64) -> Vec<f64> {
    let mut v = vec![0.0; c.nodes().len()];
    for (i, node) in c.nodes().iter().enumerate() {
        v[i] = match node {
            Node::Leaf(l) => (bit(x, l.var) == l.positive) as u8 as f64,
            Node::Product(cs) => cs.iter().fold(1.0, |p, &ch| p * v[ch]),
            Node::Sum(es) => es.iter().fold(0.0, |s, &(ch, w)| s + w * v[ch]),
        };
    }
    v
}

pub fn table(c: &Circuit) -> Vec<f64> {
    (0..1u64 << c.num_vars()).map(|x| eval(c, x)).collect()
}

/// Variables each node mentions.
pub fn scopes(c: &Circuit) -> Vec<Vec<bool>> {
    let mut out: Vec<Vec<bool>> = Vec::new();
    for node in c.nodes() {
        let mut s = vec![false; c.num_vars() + 1];
        match node {
            Node::Leaf(l) => s[l.var] = true,
            _ => {
                for ch in node.children() {
                    for (a, b) in s.iter_mut().zip(&out[ch]) {
                        *a |= *b;
                    }
                }
            }
        }
        out.push(s);
    }
    out
}

pub fn decomposable(c: &Circuit) -> bool {
    let sc = scopes(c);
    c.nodes().iter().all(|n| match n {
        Node::Product(cs) => (1..=c.num_vars()).all(|v| cs.iter().filter(|&&ch| sc[ch][v]).count() <= 1),
        _ => true,
    })
}

pub fn smooth(c: &Circuit) -> bool {
    let sc = scopes(c);
    c.nodes().iter().all(|n| match n {
        Node::Sum(es) => es.iter().all(|&(ch, _)| sc[ch] == sc[es[0].0]),
        _ => true,
    })
}

/// At most one child of every sum node is nonzero, at every assignment.
pub fn deterministic(c: &Circuit) -> bool {
    (0..1u64 << c.num_vars()).all(|x| {
        let v = node_values(c, x);
        c.nodes().iter().all(|n| match n {
            Node::Sum(es) => es.iter().filter(|&&(ch, _)| v[ch] != 0.0).count() <= 1,
            _ => true,
        })
    })
}

pub fn half_l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// Partial assignments as base-3 codes: digit `v-1` is 0, 1 or 2 (free).
/// Entry `code` is the sum (or max) of `p` over the completions, filled by
/// splitting on the highest free digit.
pub fn partial_table(p: &[f64], n: usize, combine: fn(f64, f64) -> f64) -> Vec<f64> {
    let size = 3usize.pow(n as u32);
    let mut t = vec![0.0; size];
    for code in 0..size {
        let mut digits = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            digits.push(c % 3);
            c /= 3;
        }
        match (0..n).rev().find(|&v| digits[v] == 2) {
            None => {
                let x: usize = digits.iter().enumerate().map(|(v, &d)| d << v).sum();
                t[code] = p[x];
            }
            Some(v) => {
                let step = 3usize.pow(v as u32);
                t[code] = combine(t[code - 2 * step], t[code - step]);
            }
        }
    }
    t
}

pub fn partial_marginals(p: &[f64], n: usize) -> Vec<f64> {
    partial_table(p, n, |a, b| a + b)
}

pub fn partial_maxima(p: &[f64], n: usize) -> Vec<f64> {
    partial_table(p, n, f64::max)
}

pub fn exact_partial_marginals(p: &[BigRational], n: usize) -> Vec<BigRational> {
    let size = 3usize.pow(n as u32);
    let mut t = vec![BigRational::zero(); size];
    for code in 0..size {
        let mut digits = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            digits.push(c % 3);
            c /= 3;
        }
        match (0..n).rev().find(|&v| digits[v] == 2) {
            None => {
                let x: usize = digits.iter().enumerate().map(|(v, &d)| d << v).sum();
                t[code] = p[x].clone();
            }
            Some(v) => {
                let step = 3usize.pow(v as u32);
                t[code] = &t[code - 2 * step] + &t[code - step];
            }
        }
    }
    t
}

pub fn exact_half_l1(p: &[BigRational], q: &[BigRational]) -> BigRational {
    let s = p.iter().zip(q).fold(BigRational::zero(), |acc, (a, b)| acc + (a - b).abs());
    s / BigRational::from_integer(BigInt::from(2))
}

pub fn ratio(a: i64, b: i64) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

pub fn one() -> BigRational {
    BigRational::one()
}

/// `Σ p ln(p/q)`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

pub fn clause_holds(clause: &[i64], x: u64) -> bool {
    clause.iter().any(|&l| bit(x, l.unsigned_abs() as usize) == (l > 0))
}

pub fn cnf_holds(clauses: &[Vec<i64>], x: u64) -> bool {
    clauses.iter().all(|c| clause_holds(c, x))
}

/// `S_n` from row and column sums of the matrix held in `x` (row-major).
pub fn sauerhoff(n: usize, x: u64) -> bool {
    let entry = |i: usize, j: usize| (x >> (i * n + j) & 1) as usize;
    let mut r = 0;
    let mut c = 0;
    for i in 0..n {
        r ^= ((0..n).map(|j| entry(i, j)).sum::<usize>() % 3 == 0) as u8;
        c ^= ((0..n).map(|j| entry(j, i)).sum::<usize>() % 3 == 0) as u8;
    }
    r == 1 || c == 1
}
