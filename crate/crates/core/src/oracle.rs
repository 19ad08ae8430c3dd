//! Brute-force ground truth by exhaustive enumeration, plus seeded random
//! instance generators for the property suites.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::Assignment;
use crate::circuit::{block_count, block_mask, block_var_words, Circuit, CircuitBuilder, Flavor, Node, NodeId};
use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};
use crate::inference::evaluate_index;
use crate::numeric::{kahan_sum, pairwise_sum};

/// Environment variable overriding [`OracleBudget::max_vars`].
pub const BUDGET_ENV: &str = "PC_ORACLE_BUDGET";

/// Size limits for exhaustive computations. Inputs beyond the budget are
/// refused, never approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_vars: usize,
    pub max_partial_assignments: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_vars: 20, max_partial_assignments: 3usize.pow(12) }
    }
}

impl OracleBudget {
    /// Default budget with `max_vars` taken from `PC_ORACLE_BUDGET` when set.
    pub fn from_env() -> Self {
        let mut b = OracleBudget::default();
        if let Some(v) = std::env::var(BUDGET_ENV).ok().and_then(|s| s.trim().parse().ok()) {
            b.max_vars = v;
        }
        b
    }

    pub fn check_vars(&self, num_vars: usize, what: &'static str) -> Result<()> {
        if num_vars > self.max_vars || num_vars > 40 {
            return Err(Error::Budget { what, needed: num_vars, limit: self.max_vars.min(40) });
        }
        Ok(())
    }

    pub fn check_partial(&self, num_vars: usize, what: &'static str) -> Result<()> {
        let fits = u32::try_from(num_vars)
            .ok()
            .and_then(|n| 3usize.checked_pow(n))
            .is_some_and(|s| s <= self.max_partial_assignments);
        if !fits {
            let limit = (self.max_partial_assignments as f64).log(3.0).floor() as usize;
            return Err(Error::Budget { what, needed: num_vars, limit });
        }
        Ok(())
    }
}

/// `mass[x] = evaluate(c, x)` for every full assignment. Pruned circuits give
/// unnormalized tables.
pub fn enumerate_distribution(c: &Circuit) -> Result<DenseDistribution> {
    OracleBudget::from_env().check_vars(c.num_vars(), "distribution enumeration")?;
    let mass = (0..1u64 << c.num_vars()).map(|i| evaluate_index(c, i)).collect();
    DenseDistribution::new(c.num_vars(), mass)
}

/// Dense indices of the models (support) of `c`, in increasing order.
pub fn support_indices(c: &Circuit) -> Result<Vec<u64>> {
    OracleBudget::from_env().check_vars(c.num_vars(), "support enumeration")?;
    let n = c.num_vars();
    let valid = block_mask(n);
    let mut out = Vec::new();
    for block in 0..block_count(n) {
        let mut w = *c.support_words(&block_var_words(n, block)).last().unwrap() & valid;
        while w != 0 {
            out.push(block << 6 | w.trailing_zeros() as u64);
            w &= w - 1;
        }
    }
    Ok(out)
}

/// Sum of `evaluate` over all completions of `y`.
pub fn brute_marginal(c: &Circuit, y: &Assignment) -> Result<f64> {
    OracleBudget::from_env().check_vars(c.num_vars(), "brute-force marginal")?;
    let terms: Vec<f64> = (0..1u64 << c.num_vars())
        .filter(|&i| y.consistent_with_index(i))
        .map(|i| evaluate_index(c, i))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Largest `evaluate` over completions of `e`, with the lexicographically
/// smallest maximizer (x1 compared first).
pub fn brute_map(c: &Circuit, e: &Assignment) -> Result<(f64, Assignment)> {
    OracleBudget::from_env().check_vars(c.num_vars(), "brute-force MAP")?;
    let n = c.num_vars();
    let key = |i: u64| i.reverse_bits() >> (64 - n);
    let mut best: Option<(f64, u64)> = None;
    for i in (0..1u64 << n).filter(|&i| e.consistent_with_index(i)) {
        let v = evaluate_index(c, i);
        best = match best {
            Some((bv, bi)) if bv > v || (bv == v && key(bi) <= key(i)) => Some((bv, bi)),
            _ => Some((v, i)),
        };
    }
    let (v, i) = best.ok_or(Error::ZeroEvidence)?;
    Ok((v, Assignment::from_index(n, i)))
}

/// Exact number of models of `c` (its support).
pub fn brute_count(c: &Circuit) -> Result<BigUint> {
    Ok(BigUint::from(support_indices(c)?.len()))
}

/// Number of assignments satisfying a predicate over dense indices.
pub fn brute_count_predicate(num_vars: usize, f: impl Fn(u64) -> bool) -> Result<BigUint> {
    OracleBudget::from_env().check_vars(num_vars, "brute-force count")?;
    Ok(BigUint::from((0..1u64 << num_vars).filter(|&i| f(i)).count()))
}

/// Definitional total variation distance, `½ Σ |P − Q|`.
pub fn brute_tvd(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    if p.num_vars() != q.num_vars() {
        return Err(Error::DimensionMismatch(p.num_vars(), q.num_vars()));
    }
    Ok(0.5 * kahan_sum(p.mass().iter().zip(q.mass()).map(|(a, b)| (a - b).abs())))
}

/// Shapes produced by [`random_detdec_pc`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthProfile {
    /// Shannon expansion down to the last variable, so every assignment has
    /// its own final sum edge. Size grows with the support.
    DecisionTree,
    /// Decisions for `decision_depth` levels, then independent blocks
    /// (product nodes) of smaller decision structures.
    Factorized { decision_depth: usize },
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random weight vector on the simplex; no entry is vanishingly small.
fn random_weights(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0f64)).collect();
    let z: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / z).collect();
    // put the rounding residue on the last entry so the weights sum to 1
    let head: f64 = w[..len - 1].iter().sum();
    w[len - 1] = 1.0 - head;
    w
}

/// Seeded smooth, decomposable, deterministic PC over `num_vars` variables,
/// built by recursive variable splits. Decision nodes drop one branch with
/// probability `1/5`, so supports are usually partial.
pub fn random_detdec_pc(num_vars: usize, seed: u64, profile: DepthProfile) -> Circuit {
    let mut rng = rng(seed);
    let mut b = CircuitBuilder::new(num_vars);
    let mut vars: Vec<usize> = (1..=num_vars).collect();
    vars.shuffle(&mut rng);
    let root = detdec_rec(&mut b, &mut rng, &vars, profile, 0);
    let c = b.build(root, Flavor::Probabilistic, true).expect("generator emits valid circuits");
    debug_assert!(c.is_smooth() && c.is_decomposable());
    c
}

fn detdec_rec(
    b: &mut CircuitBuilder,
    rng: &mut ChaCha8Rng,
    vars: &[usize],
    profile: DepthProfile,
    depth: usize,
) -> NodeId {
    if let DepthProfile::Factorized { decision_depth } = profile {
        if depth >= decision_depth && vars.len() > 1 && rng.gen_bool(0.6) {
            let cut = rng.gen_range(1..vars.len());
            let left = detdec_rec(b, rng, &vars[..cut], profile, depth + 1);
            let right = detdec_rec(b, rng, &vars[cut..], profile, depth + 1);
            return b.product(vec![left, right]);
        }
    }
    let var = vars[0];
    let rest = &vars[1..];
    let pos = b.lit(var, true);
    let neg = b.lit(var, false);
    let (hi, lo) = if rest.is_empty() {
        (pos, neg)
    } else {
        let h = detdec_rec(b, rng, rest, profile, depth + 1);
        let l = detdec_rec(b, rng, rest, profile, depth + 1);
        (b.product(vec![pos, h]), b.product(vec![neg, l]))
    };
    if rng.gen_bool(0.2) {
        let keep = if rng.gen_bool(0.5) { hi } else { lo };
        return b.sum(vec![(keep, 1.0)]);
    }
    let w = random_weights(rng, 2);
    b.sum(vec![(hi, w[0]), (lo, w[1])])
}

/// Seeded smooth, decomposable, generally non-deterministic PC: mixtures of
/// products over random variable partitions, `depth` levels deep.
pub fn random_smooth_dec_pc(num_vars: usize, seed: u64, depth: usize) -> Circuit {
    let mut rng = rng(seed);
    let mut b = CircuitBuilder::new(num_vars);
    let vars: Vec<usize> = (1..=num_vars).collect();
    let root = mixture_rec(&mut b, &mut rng, &vars, depth);
    b.build(root, Flavor::Probabilistic, true).expect("generator emits valid circuits")
}

fn mixture_rec(b: &mut CircuitBuilder, rng: &mut ChaCha8Rng, vars: &[usize], depth: usize) -> NodeId {
    if vars.len() == 1 {
        let w = random_weights(rng, 2);
        let pos = b.lit(vars[0], true);
        let neg = b.lit(vars[0], false);
        return b.sum(vec![(pos, w[0]), (neg, w[1])]);
    }
    if depth == 0 {
        let factors = vars.iter().map(|&v| mixture_rec(b, rng, &[v], 0)).collect();
        return b.product(factors);
    }
    let k = rng.gen_range(2..=3);
    let w = random_weights(rng, k);
    let mut edges = Vec::with_capacity(k);
    for wi in w {
        let mut shuffled = vars.to_vec();
        shuffled.shuffle(rng);
        let cut = rng.gen_range(1..shuffled.len());
        let left = mixture_rec(b, rng, &shuffled[..cut], depth - 1);
        let right = mixture_rec(b, rng, &shuffled[cut..], depth - 1);
        edges.push((b.product(vec![left, right]), wi));
    }
    b.sum(edges)
}

/// Same structure, every sum node's weights multiplied by factors in
/// `[1 − strength, 1 + strength]` and renormalized.
pub fn perturb_weights(c: &Circuit, seed: u64, strength: f64) -> Circuit {
    let mut rng = rng(seed);
    let mut raw = c.clone().into_raw();
    for node in &mut raw.nodes {
        if let Node::Sum(es) = node {
            if es.len() < 2 {
                continue;
            }
            for e in es.iter_mut() {
                e.1 *= 1.0 + rng.gen_range(-strength..=strength);
            }
            let z: f64 = es.iter().map(|e| e.1).sum();
            es.iter_mut().for_each(|e| e.1 /= z);
            let head: f64 = es[..es.len() - 1].iter().map(|e| e.1).sum();
            es.last_mut().unwrap().1 = 1.0 - head;
        }
    }
    Circuit::validate(raw).expect("perturbation keeps weights valid")
}

/// Random table with roughly `density` of the assignments in its support
/// (at least one).
pub fn random_distribution(num_vars: usize, seed: u64, density: f64) -> DenseDistribution {
    let mut rng = rng(seed);
    let size = 1usize << num_vars;
    let mut mass: Vec<f64> = (0..size)
        .map(|_| if rng.gen_bool(density) { rng.gen_range(0.01..1.0) } else { 0.0 })
        .collect();
    if mass.iter().all(|&m| m == 0.0) {
        mass[rng.gen_range(0..size)] = 1.0;
    }
    let z: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= z);
    DenseDistribution::new(num_vars, mass).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Determinism;
    use crate::format::write_circuit;

    #[test]
    fn bernoulli_table() {
        let mut b = CircuitBuilder::new(1);
        let x = b.lit(1, true);
        let nx = b.lit(1, false);
        let s = b.sum(vec![(x, 0.3), (nx, 0.7)]);
        let c = b.build(s, Flavor::Probabilistic, true).unwrap();
        let d = enumerate_distribution(&c).unwrap();
        assert_eq!(d.mass(), &[0.7, 0.3]);
        assert!(d.is_normalized());
        let (v, _) = brute_map(&c, &Assignment::empty(1)).unwrap();
        assert_eq!(v, 0.7);
        assert_eq!(brute_tvd(&d, &d).unwrap(), 0.0);
    }

    #[test]
    fn generator_is_reproducible() {
        let a = random_detdec_pc(4, 1, DepthProfile::DecisionTree);
        let b = random_detdec_pc(4, 1, DepthProfile::DecisionTree);
        assert_eq!(write_circuit(&a), write_circuit(&b));
        let c = random_detdec_pc(4, 2, DepthProfile::DecisionTree);
        assert_ne!(write_circuit(&a), write_circuit(&c));
    }

    #[test]
    fn generated_circuits_are_deterministic() {
        for seed in 0..100 {
            for profile in [DepthProfile::DecisionTree, DepthProfile::Factorized { decision_depth: 2 }] {
                let c = random_detdec_pc(8, seed, profile);
                let r = c.properties(20);
                assert!(r.smooth && r.decomposable, "seed {seed}");
                assert_eq!(r.deterministic, Determinism::True, "seed {seed}");
                assert!(enumerate_distribution(&c).unwrap().is_normalized());
            }
        }
    }

    #[test]
    fn perturbation_moves_the_distribution() {
        let c = random_detdec_pc(6, 3, DepthProfile::DecisionTree);
        let p = perturb_weights(&c, 9, 0.3);
        assert_eq!(c.size(), p.size());
        let d0 = enumerate_distribution(&c).unwrap();
        let d1 = enumerate_distribution(&p).unwrap();
        assert!(d1.is_normalized());
        assert!(brute_tvd(&d0, &d1).unwrap() > 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let budget = OracleBudget { max_vars: 4, max_partial_assignments: 81 };
        assert!(budget.check_vars(4, "x").is_ok());
        assert!(matches!(budget.check_vars(5, "x"), Err(Error::Budget { .. })));
        assert!(budget.check_partial(4, "x").is_ok());
        assert!(budget.check_partial(5, "x").is_err());
    }
}
