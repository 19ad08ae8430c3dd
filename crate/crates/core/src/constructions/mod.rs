//! Explicit objects: the Sauerhoff family, the SAT gadget, counterexample
//! distribution pairs, plus compilation helpers shared by them.

pub mod cnf;
pub mod counterexample;
pub mod gadget;
pub mod sauerhoff;

use crate::circuit::{Circuit, CircuitBuilder, Flavor, NodeId};
use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};
use crate::oracle::{support_indices, OracleBudget};

/// Shannon expansion of a table in the order `x1, …, xn`: a smooth,
/// decomposable, deterministic PC for `p / Σp`. Zero-mass branches are left
/// out, so the circuit's support is exactly the table's.
pub fn compile_decision_tree(p: &DenseDistribution) -> Result<Circuit> {
    let n = p.num_vars();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot compile a table over no variables".into()));
    }
    let mut b = CircuitBuilder::new(n);
    match expand(&mut b, p.mass(), n, 0, 0) {
        (Some(root), _) => b.build(root, Flavor::Probabilistic, true),
        (None, _) => Err(Error::EmptySupport),
    }
}

/// Subtree deciding `x_{depth+1}` below the fixed low bits `low`. Returns the
/// node (None when the subtree has no mass) and its mass.
fn expand(b: &mut CircuitBuilder, mass: &[f64], n: usize, depth: usize, low: usize) -> (Option<NodeId>, f64) {
    if depth == n {
        let m = mass[low];
        return (None, m);
    }
    let var = depth + 1;
    let mut branches = Vec::with_capacity(2);
    let mut total = 0.0;
    for value in [true, false] {
        let index = low | (value as usize) << depth;
        let (sub, m) = expand(b, mass, n, depth + 1, index);
        if m <= 0.0 {
            continue;
        }
        let lit = b.lit(var, value);
        let node = match sub {
            Some(s) => b.product(vec![lit, s]),
            None => lit,
        };
        branches.push((node, m));
        total += m;
    }
    if branches.is_empty() {
        return (None, 0.0);
    }
    let mut edges: Vec<(NodeId, f64)> = branches.iter().map(|&(c, m)| (c, m / total)).collect();
    if edges.len() == 2 {
        edges[1].1 = 1.0 - edges[0].1;
    }
    (Some(b.sum(edges)), total)
}

/// Uniform distribution over the models of a circuit.
pub fn uniform_over_circuit(c: &Circuit) -> Result<DenseDistribution> {
    let models = support_indices(c)?;
    if models.is_empty() {
        return Err(Error::EmptySupport);
    }
    DenseDistribution::uniform_over(c.num_vars(), &models)
}

/// Uniform distribution over the assignments (dense indices) where `f` holds.
pub fn uniform_over_predicate(num_vars: usize, f: impl Fn(u64) -> bool) -> Result<DenseDistribution> {
    OracleBudget::from_env().check_vars(num_vars, "uniform distribution")?;
    let models: Vec<u64> = (0..1u64 << num_vars).filter(|&i| f(i)).collect();
    if models.is_empty() {
        return Err(Error::EmptySupport);
    }
    DenseDistribution::uniform_over(num_vars, &models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Determinism;
    use crate::oracle::{enumerate_distribution, random_distribution};

    #[test]
    fn decision_tree_reproduces_the_table() {
        for seed in 0..20 {
            let p = random_distribution(6, seed, 0.4);
            let c = compile_decision_tree(&p).unwrap();
            let r = c.properties(20);
            assert!(r.smooth && r.decomposable);
            assert_eq!(r.deterministic, Determinism::True);
            let q = enumerate_distribution(&c).unwrap();
            for (a, b) in p.mass().iter().zip(q.mass()) {
                assert!((a - b).abs() < 1e-12);
                assert_eq!(*a == 0.0, *b == 0.0);
            }
        }
    }

    #[test]
    fn uniform_tautology() {
        let u = uniform_over_predicate(2, |_| true).unwrap();
        assert_eq!(u.mass(), &[0.25; 4]);
        assert!(matches!(uniform_over_predicate(2, |_| false), Err(Error::EmptySupport)));
    }

    #[test]
    fn uniform_over_sauerhoff_support() {
        let c = sauerhoff::build_sauerhoff_dnnf(3).unwrap();
        let u = uniform_over_circuit(&c).unwrap();
        let count = (0..512).filter(|&i| sauerhoff::s_n_index(3, i)).count();
        assert_eq!(u.support_size(), count);
        assert!(u.is_normalized());
    }
}
