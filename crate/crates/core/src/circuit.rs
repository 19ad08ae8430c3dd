//! Probabilistic and logical circuits over Boolean variables.
//!
//! A circuit is a DAG of literal leaves, (weighted) sum nodes and product
//! nodes. Nodes are stored in topological order: every child id is smaller
//! than its parent id, and the root is the last node. Probabilistic circuits
//! carry a weight on every sum edge; logical circuits (NNF) read sum nodes as
//! disjunctions and product nodes as conjunctions, with all weights fixed to 1.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::assignment::Assignment;
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Tolerance on sum-node weight normalization.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Default variable limit for exhaustive determinism checks.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    /// 1-based variable index.
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: usize, positive: bool) -> Self {
        Literal { var, positive }
    }

    /// Signed DIMACS-style form: `var` or `-var`.
    pub fn signed(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn holds(self, value: bool) -> bool {
        value == self.positive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(Literal),
    /// `(child, weight)` pairs; weights are 1 in logical circuits.
    Sum(Vec<(NodeId, f64)>),
    Product(Vec<NodeId>),
}

impl Node {
    pub fn children(&self) -> Box<dyn Iterator<Item = NodeId> + '_> {
        match self {
            Node::Leaf(_) => Box::new(std::iter::empty()),
            Node::Sum(es) => Box::new(es.iter().map(|&(c, _)| c)),
            Node::Product(cs) => Box::new(cs.iter().copied()),
        }
    }

    fn map_children(&self, f: impl Fn(NodeId) -> NodeId) -> Node {
        match self {
            Node::Leaf(l) => Node::Leaf(*l),
            Node::Sum(es) => Node::Sum(es.iter().map(|&(c, w)| (f(c), w)).collect()),
            Node::Product(cs) => Node::Product(cs.iter().map(|&c| f(c)).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Probabilistic,
    Logical,
}

/// An unvalidated node list, in any order, with a declared root.
#[derive(Debug, Clone)]
pub struct RawCircuit {
    pub num_vars: usize,
    pub flavor: Flavor,
    /// Whether sum weights must add up to one. Pruned circuits are not.
    pub normalized: bool,
    pub nodes: Vec<Node>,
    pub root: NodeId,
}

/// A validated circuit. Immutable once built.
#[derive(Debug, Clone)]
pub struct Circuit {
    num_vars: usize,
    flavor: Flavor,
    normalized: bool,
    nodes: Vec<Node>,
    scopes: Vec<FixedBitSet>,
}

impl Circuit {
    /// Checks a raw description and returns a circuit in topological order.
    pub fn validate(raw: RawCircuit) -> Result<Circuit> {
        let RawCircuit { num_vars, flavor, normalized, mut nodes, root } = raw;
        if nodes.is_empty() {
            return Err(Error::Empty);
        }
        if num_vars == 0 {
            return Err(Error::InvalidArgument("num_vars must be at least 1".into()));
        }
        if root >= nodes.len() {
            return Err(Error::BadRoot(root));
        }
        for (id, node) in nodes.iter().enumerate() {
            match node {
                Node::Leaf(l) => {
                    if l.var == 0 || l.var > num_vars {
                        return Err(Error::VarOutOfRange { node: id, var: l.var as i64, num_vars });
                    }
                }
                _ => {
                    if node.children().next().is_none() {
                        return Err(Error::NoChildren(id));
                    }
                    if let Some(child) = node.children().find(|&c| c >= nodes.len()) {
                        return Err(Error::DanglingChild { node: id, child });
                    }
                }
            }
        }

        let order = topological_order(&nodes, root)?;
        if let Some(unreached) = (0..nodes.len()).find(|&i| order.position[i].is_none()) {
            return Err(Error::Unreachable(unreached));
        }
        let already_sorted = nodes
            .iter()
            .enumerate()
            .all(|(id, n)| n.children().all(|c| c < id))
            && root == nodes.len() - 1;
        if !already_sorted {
            let pos = &order.position;
            nodes = order
                .post_order
                .iter()
                .map(|&old| nodes[old].map_children(|c| pos[c].unwrap()))
                .collect();
        }

        for (id, node) in nodes.iter_mut().enumerate() {
            if let Node::Sum(es) = node {
                match flavor {
                    Flavor::Logical => es.iter_mut().for_each(|e| e.1 = 1.0),
                    Flavor::Probabilistic => check_weights(id, es, normalized)?,
                }
            }
        }

        let scopes = compute_scopes(&nodes, num_vars);
        Ok(Circuit { num_vars, flavor, normalized, nodes, scopes })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn is_logical(&self) -> bool {
        self.flavor == Flavor::Logical
    }

    /// False for probabilistic circuits whose sum weights may add to less than one.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn scope(&self, id: NodeId) -> &FixedBitSet {
        &self.scopes[id]
    }

    /// Scope as a sorted list of 1-based variable indices.
    pub fn scope_vars(&self, id: NodeId) -> Vec<usize> {
        self.scopes[id].ones().map(|i| i + 1).collect()
    }

    /// `(node_count, edge_count)`.
    pub fn size(&self) -> (usize, usize) {
        let edges = self.nodes.iter().map(|n| n.children().count()).sum();
        (self.nodes.len(), edges)
    }

    pub fn into_raw(self) -> RawCircuit {
        RawCircuit {
            num_vars: self.num_vars,
            flavor: self.flavor,
            normalized: self.normalized,
            root: self.nodes.len() - 1,
            nodes: self.nodes,
        }
    }

    /// First sum node whose children do not share one scope.
    pub fn smoothness_witness(&self) -> Option<NodeId> {
        self.nodes.iter().enumerate().find_map(|(id, node)| match node {
            Node::Sum(es) => {
                let first = &self.scopes[es[0].0];
                es.iter().any(|&(c, _)| &self.scopes[c] != first).then_some(id)
            }
            _ => None,
        })
    }

    /// First product node with two children sharing a variable.
    pub fn decomposability_witness(&self) -> Option<NodeId> {
        self.nodes.iter().enumerate().find_map(|(id, node)| match node {
            Node::Product(cs) => {
                let mut seen = FixedBitSet::with_capacity(self.num_vars);
                for &c in cs {
                    if !seen.is_disjoint(&self.scopes[c]) {
                        return Some(id);
                    }
                    seen.union_with(&self.scopes[c]);
                }
                None
            }
            _ => None,
        })
    }

    pub fn is_smooth(&self) -> bool {
        self.smoothness_witness().is_none()
    }

    pub fn is_decomposable(&self) -> bool {
        self.decomposability_witness().is_none()
    }

    /// True when the root mentions every variable `1..=num_vars`.
    pub fn has_full_scope(&self) -> bool {
        self.scopes[self.root()].count_ones(..) == self.num_vars
    }

    /// Exhaustive determinism check: every sum node has at most one nonzero
    /// child under every full assignment. Gives up above `limit` variables.
    pub fn check_deterministic(&self, limit: usize) -> DeterminismCheck {
        if self.num_vars > limit || self.num_vars > 63 {
            return DeterminismCheck { verdict: Determinism::Unverified, witness: None };
        }
        let valid = block_mask(self.num_vars);
        for block in 0..block_count(self.num_vars) {
            let words = self.support_words(&block_var_words(self.num_vars, block));
            for (id, node) in self.nodes.iter().enumerate() {
                let Node::Sum(es) = node else { continue };
                let mut acc = 0u64;
                for &(c, _) in es {
                    let overlap = acc & words[c] & valid;
                    if overlap != 0 {
                        let index = block << 6 | overlap.trailing_zeros() as u64;
                        return DeterminismCheck {
                            verdict: Determinism::False,
                            witness: Some(DeterminismWitness {
                                node: id,
                                assignment: Assignment::from_index(self.num_vars, index),
                            }),
                        };
                    }
                    acc |= words[c];
                }
            }
        }
        DeterminismCheck { verdict: Determinism::True, witness: None }
    }

    /// Full property report, with determinism enumerated up to `limit` variables.
    pub fn properties(&self, limit: usize) -> PropertyReport {
        let det = self.check_deterministic(limit);
        let smooth_witness = self.smoothness_witness();
        let decomposable_witness = self.decomposability_witness();
        PropertyReport {
            smooth: smooth_witness.is_none(),
            decomposable: decomposable_witness.is_none(),
            deterministic: det.verdict,
            smooth_witness,
            decomposable_witness,
            determinism_witness: det.witness,
        }
    }

    /// Bit-parallel support evaluation: `var_words[v-1]` holds the value of
    /// `xv` in 64 assignments at once. Returns one word per node whose bits
    /// mark the assignments where that node is nonzero.
    pub fn support_words(&self, var_words: &[u64]) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let w = match node {
                Node::Leaf(l) => {
                    let x = var_words[l.var - 1];
                    if l.positive {
                        x
                    } else {
                        !x
                    }
                }
                Node::Sum(es) => es.iter().fold(0, |acc, &(c, _)| acc | out[c]),
                Node::Product(cs) => cs.iter().fold(!0, |acc, &c| acc & out[c]),
            };
            out.push(w);
        }
        out
    }

    /// Smooths a decomposable circuit. Every sum child missing variables of
    /// its parent's scope is multiplied by one two-literal gadget per missing
    /// variable (weights ½/½, or a plain disjunction in logical circuits), and
    /// the root is padded the same way up to all `num_vars` variables.
    /// Already smooth, full-scope circuits are returned unchanged.
    pub fn smooth(&self) -> Circuit {
        if self.is_smooth() && self.has_full_scope() {
            return self.clone();
        }
        let mut b = CircuitBuilder::new(self.num_vars);
        let mut gadgets: HashMap<usize, NodeId> = HashMap::new();
        let flavor = self.flavor;
        let mut gadget = |b: &mut CircuitBuilder, var: usize| {
            *gadgets.entry(var).or_insert_with(|| {
                let pos = b.leaf(Literal::new(var, true));
                let neg = b.leaf(Literal::new(var, false));
                let w = if flavor == Flavor::Logical { 1.0 } else { 0.5 };
                b.sum(vec![(pos, w), (neg, w)])
            })
        };
        let mut map = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let new = match node {
                Node::Leaf(l) => b.leaf(*l),
                Node::Product(cs) => b.product(cs.iter().map(|&c| map[c]).collect()),
                Node::Sum(es) => {
                    let parent_scope = &self.scopes[id];
                    let mut edges = Vec::with_capacity(es.len());
                    for &(c, w) in es {
                        let mut missing = parent_scope.clone();
                        missing.difference_with(&self.scopes[c]);
                        let child = if missing.is_clear() {
                            map[c]
                        } else {
                            let mut factors = vec![map[c]];
                            factors.extend(missing.ones().map(|v| gadget(&mut b, v + 1)));
                            b.product(factors)
                        };
                        edges.push((child, w));
                    }
                    b.sum(edges)
                }
            };
            map.push(new);
        }
        let root = self.root();
        let mut root_new = map[root];
        let missing: Vec<usize> =
            (1..=self.num_vars).filter(|&v| !self.scopes[root].contains(v - 1)).collect();
        if !missing.is_empty() {
            let mut factors = vec![root_new];
            factors.extend(missing.into_iter().map(|v| gadget(&mut b, v)));
            root_new = b.product(factors);
        }
        b.build(root_new, self.flavor, self.normalized)
            .expect("smoothing preserves validity")
    }

    /// Reads sum nodes as disjunctions and product nodes as conjunctions.
    /// The result's models are exactly the support of the circuit.
    pub fn to_logical(&self) -> Result<Circuit> {
        for (id, node) in self.nodes.iter().enumerate() {
            if let Node::Sum(es) = node {
                if let Some(&(c, _)) = es.iter().find(|e| e.1 <= 0.0) {
                    return Err(Error::ZeroWeight { parent: id, child: c });
                }
            }
        }
        let mut nodes = self.nodes.clone();
        for node in &mut nodes {
            if let Node::Sum(es) = node {
                es.iter_mut().for_each(|e| e.1 = 1.0);
            }
        }
        Ok(Circuit {
            num_vars: self.num_vars,
            flavor: Flavor::Logical,
            normalized: true,
            nodes,
            scopes: self.scopes.clone(),
        })
    }

    /// Probabilistic circuit with equal weights on every sum node, smoothed.
    /// Its support equals the model set of the (decomposable) input.
    pub fn from_logical(&self) -> Result<Circuit> {
        if let Some(node) = self.decomposability_witness() {
            return Err(Error::NotDecomposable(node));
        }
        let mut nodes = self.nodes.clone();
        for node in &mut nodes {
            if let Node::Sum(es) = node {
                let w = 1.0 / es.len() as f64;
                es.iter_mut().for_each(|e| e.1 = w);
            }
        }
        let pc = Circuit {
            num_vars: self.num_vars,
            flavor: Flavor::Probabilistic,
            normalized: true,
            nodes,
            scopes: self.scopes.clone(),
        };
        Ok(pc.smooth())
    }
}

fn check_weights(id: NodeId, es: &[(NodeId, f64)], normalized: bool) -> Result<()> {
    for &(c, w) in es {
        if w == 0.0 {
            return Err(Error::ZeroWeight { parent: id, child: c });
        }
        if !(w > 0.0 && w <= 1.0 + WEIGHT_TOLERANCE) {
            return Err(Error::WeightRange { node: id, weight: w });
        }
    }
    let sum = crate::numeric::kahan_sum(es.iter().map(|e| e.1));
    let bad = if normalized {
        (sum - 1.0).abs() > WEIGHT_TOLERANCE
    } else {
        sum > 1.0 + WEIGHT_TOLERANCE
    };
    if bad {
        return Err(Error::WeightSum { node: id, sum });
    }
    Ok(())
}

struct TopoOrder {
    post_order: Vec<NodeId>,
    /// New id of each old node, `None` when unreachable from the root.
    position: Vec<Option<NodeId>>,
}

fn topological_order(nodes: &[Node], root: NodeId) -> Result<TopoOrder> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark = vec![Mark::New; nodes.len()];
    let mut position = vec![None; nodes.len()];
    let mut post_order = Vec::new();
    let mut stack: Vec<(NodeId, usize)> = vec![(root, 0)];
    mark[root] = Mark::Open;
    while let Some(&mut (id, ref mut next)) = stack.last_mut() {
        if let Some(child) = nodes[id].children().nth(*next) {
            *next += 1;
            match mark[child] {
                Mark::Open => return Err(Error::Cycle(child)),
                Mark::Done => {}
                Mark::New => {
                    mark[child] = Mark::Open;
                    stack.push((child, 0));
                }
            }
        } else {
            mark[id] = Mark::Done;
            position[id] = Some(post_order.len());
            post_order.push(id);
            stack.pop();
        }
    }
    Ok(TopoOrder { post_order, position })
}

fn compute_scopes(nodes: &[Node], num_vars: usize) -> Vec<FixedBitSet> {
    let mut scopes: Vec<FixedBitSet> = Vec::with_capacity(nodes.len());
    for node in nodes {
        let mut s = FixedBitSet::with_capacity(num_vars);
        match node {
            Node::Leaf(l) => s.insert(l.var - 1),
            _ => node.children().for_each(|c| s.union_with(&scopes[c])),
        }
        scopes.push(s);
    }
    scopes
}

const LOW_VAR_MASKS: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

/// Number of 64-assignment blocks covering all `2^num_vars` assignments.
pub fn block_count(num_vars: usize) -> u64 {
    if num_vars <= 6 {
        1
    } else {
        1u64 << (num_vars - 6)
    }
}

/// Mask of the meaningful bits in a block (all of them once `num_vars >= 6`).
pub fn block_mask(num_vars: usize) -> u64 {
    if num_vars >= 6 {
        !0
    } else {
        (1u64 << (1 << num_vars)) - 1
    }
}

/// Variable words for block `block`: bit `j` of the result's word `v-1` is the
/// value of `xv` in assignment `64*block + j`.
pub fn block_var_words(num_vars: usize, block: u64) -> Vec<u64> {
    (0..num_vars)
        .map(|i| {
            if i < 6 {
                LOW_VAR_MASKS[i]
            } else if block >> (i - 6) & 1 == 1 {
                !0
            } else {
                0
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Determinism {
    True,
    False,
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterminismWitness {
    /// Sum node with two nonzero children.
    pub node: NodeId,
    pub assignment: Assignment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterminismCheck {
    pub verdict: Determinism,
    pub witness: Option<DeterminismWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub smooth: bool,
    pub decomposable: bool,
    pub deterministic: Determinism,
    pub smooth_witness: Option<NodeId>,
    pub decomposable_witness: Option<NodeId>,
    pub determinism_witness: Option<DeterminismWitness>,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.smooth && self.decomposable && self.deterministic == Determinism::True
    }
}

/// Incremental construction in topological order. Leaves are shared.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    num_vars: usize,
    nodes: Vec<Node>,
    leaves: HashMap<Literal, NodeId>,
}

impl CircuitBuilder {
    pub fn new(num_vars: usize) -> Self {
        CircuitBuilder { num_vars, nodes: Vec::new(), leaves: HashMap::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, lit: Literal) -> NodeId {
        if let Some(&id) = self.leaves.get(&lit) {
            return id;
        }
        let id = self.push(Node::Leaf(lit));
        self.leaves.insert(lit, id);
        id
    }

    pub fn lit(&mut self, var: usize, positive: bool) -> NodeId {
        self.leaf(Literal::new(var, positive))
    }

    pub fn sum(&mut self, edges: Vec<(NodeId, f64)>) -> NodeId {
        self.push(Node::Sum(edges))
    }

    /// Unweighted disjunction (weights 1).
    pub fn or(&mut self, children: Vec<NodeId>) -> NodeId {
        self.push(Node::Sum(children.into_iter().map(|c| (c, 1.0)).collect()))
    }

    pub fn product(&mut self, children: Vec<NodeId>) -> NodeId {
        self.push(Node::Product(children))
    }

    fn push(&mut self, node: Node) -> NodeId {
        debug_assert!(node.children().all(|c| c < self.nodes.len()));
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Drops nodes not reachable from `root` and validates the rest.
    pub fn build(self, root: NodeId, flavor: Flavor, normalized: bool) -> Result<Circuit> {
        let mut live = vec![false; root + 1];
        live[root] = true;
        for id in (0..=root).rev() {
            if live[id] {
                for c in self.nodes[id].children() {
                    live[c] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; root + 1];
        let mut nodes = Vec::new();
        for (id, node) in self.nodes.into_iter().enumerate().take(root + 1) {
            if live[id] {
                remap[id] = nodes.len();
                nodes.push(node.map_children(|c| remap[c]));
            }
        }
        let root = nodes.len() - 1;
        Circuit::validate(RawCircuit { num_vars: self.num_vars, flavor, normalized, nodes, root })
    }
}
