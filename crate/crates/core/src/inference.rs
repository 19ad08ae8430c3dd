//! Tractable queries: feedforward evaluation, marginals, MAP, model counting
//! and conditionals.

use fixedbitset::FixedBitSet;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::assignment::Assignment;
use crate::circuit::{Circuit, Determinism, Literal, Node, DEFAULT_ENUMERATION_LIMIT};
use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, KahanSum};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryResult {
    pub value: f64,
    /// Present for MAP queries only.
    pub argmax: Option<Assignment>,
}

/// One bottom-up pass with the given leaf values; sums use compensated
/// accumulation. Returns the value of every node.
fn feedforward(c: &Circuit, leaf: impl Fn(Literal) -> f64) -> Vec<f64> {
    let mut vals: Vec<f64> = Vec::with_capacity(c.nodes().len());
    for node in c.nodes() {
        let v = match node {
            Node::Leaf(l) => leaf(*l),
            Node::Product(cs) => cs.iter().fold(1.0, |acc, &ch| acc * vals[ch]),
            Node::Sum(es) => {
                let mut acc = KahanSum::new();
                for &(ch, w) in es {
                    acc.add(w * vals[ch]);
                }
                acc.value()
            }
        };
        vals.push(v);
    }
    vals
}

fn indicator(x: &Assignment) -> impl Fn(Literal) -> f64 + '_ {
    move |l| match x.get(l.var) {
        None => 1.0,
        Some(b) if l.holds(b) => 1.0,
        Some(_) => 0.0,
    }
}

fn require_assigned(c: &Circuit, x: &Assignment) -> Result<()> {
    if x.num_vars() != c.num_vars() {
        return Err(Error::DimensionMismatch(x.num_vars(), c.num_vars()));
    }
    match c.scope(c.root()).ones().find(|&i| x.get(i + 1).is_none()) {
        Some(i) => Err(Error::Unassigned(i + 1)),
        None => Ok(()),
    }
}

/// Circuit output at a full assignment. Logical circuits evaluate to 1 on
/// models and 0 elsewhere.
pub fn evaluate(c: &Circuit, x: &Assignment) -> Result<f64> {
    require_assigned(c, x)?;
    if c.is_logical() {
        return Ok(if logical_value(c, x) { 1.0 } else { 0.0 });
    }
    Ok(*feedforward(c, indicator(x)).last().unwrap())
}

/// [`evaluate`] at the dense index `index` (bit `v-1` holds `xv`).
pub fn evaluate_index(c: &Circuit, index: u64) -> f64 {
    let x = Assignment::from_index(c.num_vars(), index);
    evaluate(c, &x).expect("index assignments are full")
}

fn logical_value(c: &Circuit, x: &Assignment) -> bool {
    let words: Vec<u64> = (1..=c.num_vars())
        .map(|v| if x.get(v) == Some(true) { !0 } else { 0 })
        .collect();
    c.support_words(&words).last().unwrap() & 1 == 1
}

/// `evaluate(c, x) > 0`.
pub fn support_contains(c: &Circuit, x: &Assignment) -> Result<bool> {
    require_assigned(c, x)?;
    if c.is_logical() {
        return Ok(logical_value(c, x));
    }
    Ok(evaluate(c, x)? > 0.0)
}

/// Smooths (with a warning) when needed; rejects non-decomposable circuits.
fn marginal_ready(c: &Circuit) -> Result<std::borrow::Cow<'_, Circuit>> {
    if let Some(node) = c.decomposability_witness() {
        return Err(Error::NotDecomposable(node));
    }
    if c.is_smooth() && c.has_full_scope() {
        Ok(std::borrow::Cow::Borrowed(c))
    } else {
        log::warn!("marginal query on a non-smooth circuit: smoothing first");
        Ok(std::borrow::Cow::Owned(c.smooth()))
    }
}

/// Probability of a partial assignment: one feedforward pass with both
/// indicators of every unassigned variable set to 1.
pub fn marginal(c: &Circuit, y: &Assignment) -> Result<f64> {
    if y.num_vars() != c.num_vars() {
        return Err(Error::DimensionMismatch(y.num_vars(), c.num_vars()));
    }
    let c = marginal_ready(c)?;
    Ok(*feedforward(&c, indicator(y)).last().unwrap())
}

/// Natural log of [`marginal`], computed in log space so that tiny
/// probabilities do not underflow.
pub fn log_marginal(c: &Circuit, y: &Assignment) -> Result<f64> {
    if y.num_vars() != c.num_vars() {
        return Err(Error::DimensionMismatch(y.num_vars(), c.num_vars()));
    }
    let c = marginal_ready(c)?;
    let leaf = indicator(y);
    let mut vals: Vec<f64> = Vec::with_capacity(c.nodes().len());
    for node in c.nodes() {
        let v = match node {
            Node::Leaf(l) => leaf(*l).ln(),
            Node::Product(cs) => cs.iter().map(|&ch| vals[ch]).sum(),
            Node::Sum(es) => es
                .iter()
                .fold(f64::NEG_INFINITY, |acc, &(ch, w)| log_add_exp(acc, w.ln() + vals[ch])),
        };
        vals.push(v);
    }
    Ok(*vals.last().unwrap())
}

/// `marginal(q ∪ e) / marginal(e)`; zero when `q` contradicts `e`.
pub fn conditional(c: &Circuit, query: &Assignment, evidence: &Assignment) -> Result<f64> {
    let pe = marginal(c, evidence)?;
    if pe <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    match query.merge(evidence) {
        Some(joint) => Ok(marginal(c, &joint)? / pe),
        None => Ok(0.0),
    }
}

fn require_deterministic(c: &Circuit) -> Result<()> {
    let check = c.check_deterministic(DEFAULT_ENUMERATION_LIMIT);
    match check.verdict {
        Determinism::True => Ok(()),
        Determinism::False => {
            Err(Error::NotDeterministic { node: check.witness.map_or(0, |w| w.node) })
        }
        Determinism::Unverified => Err(Error::DeterminismUnverified {
            num_vars: c.num_vars(),
            limit: DEFAULT_ENUMERATION_LIMIT,
        }),
    }
}

/// Most probable completion of `evidence` for a decomposable, deterministic
/// circuit. Ties go to the lexicographically smallest assignment (x1 first,
/// 0 before 1). Non-deterministic circuits are refused.
pub fn map_query(c: &Circuit, evidence: &Assignment) -> Result<QueryResult> {
    if let Some(node) = c.decomposability_witness() {
        return Err(Error::NotDecomposable(node));
    }
    require_deterministic(c)?;
    map_query_unchecked(c, evidence)
}

/// [`map_query`] without the determinism check, for circuits that are
/// deterministic by construction.
pub fn map_query_unchecked(c: &Circuit, evidence: &Assignment) -> Result<QueryResult> {
    if evidence.num_vars() != c.num_vars() {
        return Err(Error::DimensionMismatch(evidence.num_vars(), c.num_vars()));
    }
    let n = c.num_vars();
    let leaf = indicator(evidence);
    let mut best: Vec<f64> = Vec::with_capacity(c.nodes().len());
    // variables set to 1 in each node's chosen completion
    let mut ones: Vec<FixedBitSet> = Vec::with_capacity(c.nodes().len());
    for node in c.nodes() {
        let (v, set) = match node {
            Node::Leaf(l) => {
                let mut s = FixedBitSet::with_capacity(n);
                if l.positive {
                    s.insert(l.var - 1);
                }
                (leaf(*l), s)
            }
            Node::Product(cs) => {
                let mut s = FixedBitSet::with_capacity(n);
                let mut v = 1.0;
                for &ch in cs {
                    v *= best[ch];
                    s.union_with(&ones[ch]);
                }
                (v, s)
            }
            Node::Sum(es) => {
                let mut pick = 0;
                let mut v = es[0].1 * best[es[0].0];
                for (i, &(ch, w)) in es.iter().enumerate().skip(1) {
                    let cand = w * best[ch];
                    if cand > v || (cand == v && lex_less(&ones[ch], &ones[es[pick].0])) {
                        pick = i;
                        v = cand;
                    }
                }
                (v, ones[es[pick].0].clone())
            }
        };
        best.push(v);
        ones.push(set);
    }
    let value = *best.last().unwrap();
    let root_ones = ones.last().unwrap();
    let mut argmax = Assignment::empty(n);
    for var in 1..=n {
        let b = match evidence.get(var) {
            Some(b) => b,
            None => value > 0.0 && root_ones.contains(var - 1),
        };
        argmax.set(var, Some(b));
    }
    Ok(QueryResult { value, argmax: Some(argmax) })
}

/// Lexicographic order on assignments given by their sets of true variables.
fn lex_less(a: &FixedBitSet, b: &FixedBitSet) -> bool {
    match a.symmetric_difference(b).next() {
        Some(first) => b.contains(first),
        None => false,
    }
}

/// Exact number of models of a decomposable, deterministic circuit (its
/// support, for probabilistic input). Smooths first. With `strict`, a circuit
/// too large for the exhaustive determinism check is refused; otherwise the
/// count is returned unchecked.
pub fn model_count(c: &Circuit, strict: bool) -> Result<BigUint> {
    if let Some(node) = c.decomposability_witness() {
        return Err(Error::NotDecomposable(node));
    }
    match require_deterministic(c) {
        Ok(()) => {}
        Err(Error::DeterminismUnverified { .. }) if !strict => {
            log::warn!("model count on a circuit whose determinism is unverified");
        }
        Err(e) => return Err(e),
    }
    let l = if c.is_logical() { c.smooth() } else { c.to_logical()?.smooth() };
    let mut counts: Vec<BigUint> = Vec::with_capacity(l.nodes().len());
    for node in l.nodes() {
        let v = match node {
            Node::Leaf(_) => BigUint::one(),
            Node::Product(cs) => cs.iter().fold(BigUint::one(), |acc, &ch| acc * &counts[ch]),
            Node::Sum(es) => es.iter().fold(BigUint::zero(), |acc, &(ch, _)| acc + &counts[ch]),
        };
        counts.push(v);
    }
    Ok(counts.pop().unwrap())
}
