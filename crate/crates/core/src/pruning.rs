//! Edge-bound pruning of deterministic, decomposable PCs and the pipeline
//! that turns a close approximation of a uniform distribution into a weak
//! approximation of its support.

use serde::Serialize;

use crate::circuit::{
    block_count, block_mask, block_var_words, Circuit, Determinism, Flavor, Node, NodeId, RawCircuit,
    DEFAULT_ENUMERATION_LIMIT,
};
use crate::constructions::uniform_over_circuit;
use crate::divergence::tvd;
use crate::error::{Error, Result};
use crate::inference::marginal;
use crate::oracle::{enumerate_distribution, OracleBudget};

/// Per-edge bounds `EB(n, c)`: the largest circuit output over assignments
/// whose accepting path uses the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBoundTable {
    /// `bounds[n][i]` belongs to the `i`-th child edge of node `n`.
    pub bounds: Vec<Vec<f64>>,
    /// Largest value of each node over assignments to its scope.
    pub submax: Vec<f64>,
    /// Largest product of weights and sibling maxima from the root down to
    /// each node; 0 for nodes the root cannot reach.
    pub context: Vec<f64>,
}

impl EdgeBoundTable {
    pub fn get(&self, parent: NodeId, child: NodeId, c: &Circuit) -> Option<f64> {
        let i = c.node(parent).children().position(|x| x == child)?;
        Some(self.bounds[parent][i])
    }

    /// `(parent, child, bound)` for every edge.
    pub fn edges<'a>(&'a self, c: &'a Circuit) -> impl Iterator<Item = (NodeId, NodeId, f64)> + 'a {
        c.nodes()
            .iter()
            .enumerate()
            .flat_map(move |(n, node)| node.children().zip(&self.bounds[n]).map(move |(ch, &b)| (n, ch, b)))
    }
}

fn require_detdec(c: &Circuit) -> Result<()> {
    if c.is_logical() {
        return Err(Error::InvalidArgument("edge bounds need a probabilistic circuit".into()));
    }
    if let Some(node) = c.decomposability_witness() {
        return Err(Error::NotDecomposable(node));
    }
    if let Some(node) = c.smoothness_witness() {
        return Err(Error::InvalidArgument(format!("sum node {node} is not smooth")));
    }
    let det = c.check_deterministic(DEFAULT_ENUMERATION_LIMIT);
    match det.verdict {
        Determinism::True => Ok(()),
        Determinism::False => Err(Error::NotDeterministic { node: det.witness.map_or(0, |w| w.node) }),
        Determinism::Unverified => Err(Error::DeterminismUnverified {
            num_vars: c.num_vars(),
            limit: DEFAULT_ENUMERATION_LIMIT,
        }),
    }
}

/// Two passes: maxima bottom-up, contexts top-down.
pub fn edge_bounds(c: &Circuit) -> Result<EdgeBoundTable> {
    require_detdec(c)?;
    let alive: Vec<Vec<bool>> = c.nodes().iter().map(|n| n.children().map(|_| true).collect()).collect();
    Ok(bounds_with(c.nodes(), c.root(), &alive))
}

fn bounds_with(nodes: &[Node], root: NodeId, alive: &[Vec<bool>]) -> EdgeBoundTable {
    let mut submax = vec![0.0; nodes.len()];
    for (id, node) in nodes.iter().enumerate() {
        submax[id] = match node {
            Node::Leaf(_) => 1.0,
            Node::Product(cs) => cs.iter().map(|&ch| submax[ch]).product(),
            Node::Sum(es) => es
                .iter()
                .zip(&alive[id])
                .filter(|(_, &a)| a)
                .map(|(&(ch, w), _)| w * submax[ch])
                .fold(0.0, f64::max),
        };
    }
    let mut context = vec![0.0; nodes.len()];
    let mut bounds: Vec<Vec<f64>> = alive.iter().map(|a| vec![0.0; a.len()]).collect();
    context[root] = 1.0;
    for id in (0..=root).rev() {
        let ctx = context[id];
        if ctx == 0.0 {
            continue;
        }
        match &nodes[id] {
            Node::Leaf(_) => {}
            Node::Sum(es) => {
                for (i, &(ch, w)) in es.iter().enumerate() {
                    if !alive[id][i] {
                        continue;
                    }
                    let cand = ctx * w;
                    bounds[id][i] = cand * submax[ch];
                    context[ch] = context[ch].max(cand);
                }
            }
            Node::Product(cs) => {
                // sibling products without division: prefix and suffix
                let k = cs.len();
                let mut suffix = vec![1.0; k + 1];
                for i in (0..k).rev() {
                    suffix[i] = suffix[i + 1] * submax[cs[i]];
                }
                let mut prefix = 1.0;
                for (i, &ch) in cs.iter().enumerate() {
                    let cand = ctx * prefix * suffix[i + 1];
                    bounds[id][i] = cand * submax[ch];
                    context[ch] = context[ch].max(cand);
                    prefix *= submax[ch];
                }
            }
        }
    }
    EdgeBoundTable { bounds, submax, context }
}

/// Result of [`prune`]. The circuit is unnormalized: surviving values are
/// the original ones, unchanged.
#[derive(Debug, Clone)]
pub struct PrunedCircuit {
    pub circuit: Circuit,
    pub tau: f64,
    /// `(parent, child)` sum edges removed, in the input circuit's ids.
    pub removed_edges: Vec<(NodeId, NodeId)>,
    /// Edge-bound passes run, including the final one that removed nothing.
    pub rounds: usize,
}

impl PrunedCircuit {
    /// Total mass left after pruning.
    pub fn surviving_mass(&self) -> Result<f64> {
        marginal(&self.circuit, &crate::assignment::Assignment::empty(self.circuit.num_vars()))
    }

    /// Same support, weights rescaled so the circuit represents the pruned
    /// distribution divided by its mass.
    pub fn renormalize(&self) -> Result<Circuit> {
        let c = &self.circuit;
        let mut z = vec![0.0; c.nodes().len()];
        let mut nodes = Vec::with_capacity(c.nodes().len());
        for (id, node) in c.nodes().iter().enumerate() {
            let (v, n) = match node {
                Node::Leaf(_) => (1.0, node.clone()),
                Node::Product(cs) => (cs.iter().map(|&ch| z[ch]).product(), node.clone()),
                Node::Sum(es) => {
                    let total: f64 = es.iter().map(|&(ch, w)| w * z[ch]).sum();
                    let mut scaled: Vec<(NodeId, f64)> =
                        es.iter().map(|&(ch, w)| (ch, w * z[ch] / total)).collect();
                    let head: f64 = scaled[..scaled.len() - 1].iter().map(|e| e.1).sum();
                    scaled.last_mut().unwrap().1 = 1.0 - head;
                    (total, Node::Sum(scaled))
                }
            };
            z[id] = v;
            nodes.push(n);
        }
        Circuit::validate(RawCircuit {
            num_vars: c.num_vars(),
            flavor: Flavor::Probabilistic,
            normalized: true,
            nodes,
            root: c.root(),
        })
    }
}

/// `1 / 2^(n+1)`.
pub fn default_tau(num_vars: usize) -> f64 {
    0.5f64.powi(num_vars as i32 + 1)
}

/// Removes every sum edge whose bound is below `tau`, recomputing bounds
/// until nothing changes. Sum nodes reduced to one child are folded into
/// their sum parents.
pub fn prune(c: &Circuit, tau: f64) -> Result<PrunedCircuit> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("threshold {tau} must be positive and finite")));
    }
    require_detdec(c)?;
    let nodes = c.nodes();
    let root = c.root();
    let mut alive: Vec<Vec<bool>> = nodes.iter().map(|n| n.children().map(|_| true).collect()).collect();
    let mut removed = Vec::new();
    let cap = c.size().1 + 1;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let table = bounds_with(nodes, root, &alive);
        if table.submax[root] < tau {
            return Err(Error::EmptySupport);
        }
        let mut changed = false;
        for (id, node) in nodes.iter().enumerate() {
            if table.context[id] == 0.0 {
                continue;
            }
            if let Node::Sum(es) = node {
                for (i, &(ch, _)) in es.iter().enumerate() {
                    if alive[id][i] && table.bounds[id][i] < tau {
                        alive[id][i] = false;
                        removed.push((id, ch));
                        changed = true;
                    }
                }
            }
        }
        if !changed || rounds >= cap {
            break;
        }
    }
    log::debug!("pruning at {tau:e}: {} edges removed in {rounds} rounds", removed.len());
    let circuit = rebuild(c, &alive)?;
    Ok(PrunedCircuit { circuit, tau, removed_edges: removed, rounds })
}

/// Keeps live edges, folds sums that lost all but one child into sum
/// parents, and drops what the root no longer reaches.
fn rebuild(c: &Circuit, alive: &[Vec<bool>]) -> Result<Circuit> {
    let nodes = c.nodes();
    let collapsed = |id: NodeId| -> Option<(NodeId, f64)> {
        match &nodes[id] {
            Node::Sum(es) if es.len() > 1 => {
                let live: Vec<_> = es.iter().zip(&alive[id]).filter(|(_, &a)| a).collect();
                (live.len() == 1).then(|| *live[0].0)
            }
            _ => None,
        }
    };
    // follow chains of collapsed sums, multiplying their weights
    let resolve = |mut id: NodeId, mut w: f64| {
        while let Some((ch, cw)) = collapsed(id) {
            id = ch;
            w *= cw;
        }
        (id, w)
    };
    let mut out: Vec<Option<Node>> = vec![None; nodes.len()];
    let mut needed = vec![false; nodes.len()];
    needed[c.root()] = true;
    for id in (0..nodes.len()).rev() {
        if !needed[id] {
            continue;
        }
        let node = match &nodes[id] {
            Node::Leaf(l) => Node::Leaf(*l),
            Node::Product(cs) => Node::Product(cs.clone()),
            Node::Sum(es) => Node::Sum(
                es.iter()
                    .zip(&alive[id])
                    .filter(|(_, &a)| a)
                    .map(|(&(ch, w), _)| resolve(ch, w))
                    .collect(),
            ),
        };
        for ch in node.children() {
            needed[ch] = true;
        }
        out[id] = Some(node);
    }
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut kept = Vec::new();
    for (id, node) in out.into_iter().enumerate() {
        if let Some(node) = node {
            remap[id] = kept.len();
            kept.push(node);
        }
    }
    let kept = kept
        .into_iter()
        .map(|n| match n {
            Node::Leaf(l) => Node::Leaf(l),
            Node::Product(cs) => Node::Product(cs.iter().map(|&ch| remap[ch]).collect()),
            Node::Sum(es) => Node::Sum(es.iter().map(|&(ch, w)| (remap[ch], w)).collect()),
        })
        .collect::<Vec<_>>();
    let root = kept.len() - 1;
    Circuit::validate(RawCircuit {
        num_vars: c.num_vars(),
        flavor: Flavor::Probabilistic,
        normalized: false,
        nodes: kept,
        root,
    })
}

/// `MC(f ∧ ¬g) + MC(¬f ∧ g)` by bit-parallel enumeration.
pub fn weak_approx_error(f: &Circuit, g: &Circuit) -> Result<u64> {
    if f.num_vars() != g.num_vars() {
        return Err(Error::DimensionMismatch(f.num_vars(), g.num_vars()));
    }
    let n = f.num_vars();
    OracleBudget::from_env().check_vars(n, "weak approximation error")?;
    let mask = block_mask(n);
    let mut count = 0u64;
    for block in 0..block_count(n) {
        let words = block_var_words(n, block);
        let a = *f.support_words(&words).last().unwrap();
        let b = *g.support_words(&words).last().unwrap();
        count += ((a ^ b) & mask).count_ones() as u64;
    }
    Ok(count)
}

/// Same count for predicates over dense indices.
pub fn weak_approx_error_predicates(
    num_vars: usize,
    f: impl Fn(u64) -> bool,
    g: impl Fn(u64) -> bool,
) -> Result<u64> {
    OracleBudget::from_env().check_vars(num_vars, "weak approximation error")?;
    Ok((0..1u64 << num_vars).filter(|&i| f(i) != g(i)).count() as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakApproxReport {
    pub num_vars: usize,
    pub epsilon: f64,
    pub tau: f64,
    pub error: u64,
    /// `4ε·2^n`.
    pub bound: f64,
    pub holds: bool,
    pub removed_edges: usize,
}

#[derive(Debug, Clone)]
pub struct WeakApproximation {
    pub g: Circuit,
    pub pruned: PrunedCircuit,
    pub report: WeakApproxReport,
}

/// Prunes `q` at `1/2^(n+1)` and reads off its support `g`. With `ε` the
/// distance from `q` to the uniform distribution over `f`'s models, `g`
/// should disagree with `f` on fewer than `4ε·2^n` assignments. Requires
/// `ε < 1/8`.
pub fn approx_to_weak(f: &Circuit, q: &Circuit) -> Result<WeakApproximation> {
    if f.num_vars() != q.num_vars() {
        return Err(Error::DimensionMismatch(f.num_vars(), q.num_vars()));
    }
    let n = f.num_vars();
    let p = uniform_over_circuit(f)?;
    let epsilon = tvd(&p, &enumerate_distribution(q)?)?;
    if epsilon >= 0.125 {
        return Err(Error::Premise(format!("tvd(P, Q) = {epsilon} is not below 1/8")));
    }
    let tau = default_tau(n);
    let pruned = prune(q, tau)?;
    let g = pruned.circuit.to_logical()?;
    let error = weak_approx_error(f, &g)?;
    let bound = 4.0 * epsilon * (1u64 << n) as f64;
    let holds = (error as f64) < bound || (epsilon == 0.0 && error == 0);
    let report = WeakApproxReport {
        num_vars: n,
        epsilon,
        tau,
        error,
        bound,
        holds,
        removed_edges: pruned.removed_edges.len(),
    };
    Ok(WeakApproximation { g, pruned, report })
}
