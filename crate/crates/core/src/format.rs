//! Text formats: circuits, dense distributions and DIMACS CNF.
//!
//! Circuit files list one node per line in topological order with dense ids
//! from 0:
//!
//! ```text
//! pc 2                 # or `nnf 2`; `pc 2 unnormalized` for pruned circuits
//! L 0 1                # leaf: signed literal
//! L 1 -1
//! S 2 2 0 0.3 1 0.7    # sum: k children with weights (no weights in nnf)
//! P 3 2 2 4            # product: k children
//! R 3                  # root
//! ```
//!
//! Weights are written with 17 significant digits so parsing restores the
//! exact `f64`. Lines starting with `c` or `#` are comments.

use std::fmt::Write as _;

use crate::assignment::{bits_to_index, index_to_bits};
use crate::circuit::{Circuit, Flavor, Literal, Node, RawCircuit};
use crate::constructions::cnf::Cnf;
use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};

pub fn write_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    match (c.flavor(), c.is_normalized()) {
        (Flavor::Logical, _) => writeln!(out, "nnf {}", c.num_vars()),
        (Flavor::Probabilistic, true) => writeln!(out, "pc {}", c.num_vars()),
        (Flavor::Probabilistic, false) => writeln!(out, "pc {} unnormalized", c.num_vars()),
    }
    .unwrap();
    for (id, node) in c.nodes().iter().enumerate() {
        match node {
            Node::Leaf(l) => writeln!(out, "L {id} {}", l.signed()).unwrap(),
            Node::Product(cs) => {
                write!(out, "P {id} {}", cs.len()).unwrap();
                cs.iter().for_each(|ch| write!(out, " {ch}").unwrap());
                out.push('\n');
            }
            Node::Sum(es) => {
                write!(out, "S {id} {}", es.len()).unwrap();
                for (ch, w) in es {
                    write!(out, " {ch}").unwrap();
                    if !c.is_logical() {
                        write!(out, " {}", format_real(*w)).unwrap();
                    }
                }
                out.push('\n');
            }
        }
    }
    writeln!(out, "R {}", c.root()).unwrap();
    out
}

/// Scientific notation with 17 significant digits.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn is_comment(line: &str) -> bool {
    line.is_empty() || line.starts_with('#') || line == "c" || line.starts_with("c ")
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !is_comment(l));

    let (hline, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let htoks: Vec<&str> = header.split_whitespace().collect();
    let (flavor, normalized) = match htoks.as_slice() {
        ["pc", _] => (Flavor::Probabilistic, true),
        ["pc", _, "unnormalized"] => (Flavor::Probabilistic, false),
        ["nnf", _] => (Flavor::Logical, true),
        _ => return Err(err(hline, format!("bad header `{header}`"))),
    };
    let num_vars: usize =
        htoks[1].parse().map_err(|_| err(hline, format!("bad variable count `{}`", htoks[1])))?;

    let mut nodes: Vec<Option<Node>> = Vec::new();
    let mut root = None;
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let num = |i: usize| -> Result<i64> {
            toks.get(i)
                .ok_or_else(|| err(ln, "truncated line".into()))?
                .parse::<i64>()
                .map_err(|_| err(ln, format!("expected an integer, got `{}`", toks[i])))
        };
        let idx = |i: usize| -> Result<usize> {
            let v = num(i)?;
            usize::try_from(v).map_err(|_| err(ln, format!("negative id {v}")))
        };
        if root.is_some() {
            return Err(err(ln, "content after root line".into()));
        }
        let (id, node) = match toks[0] {
            "R" => {
                root = Some(idx(1)?);
                continue;
            }
            "L" => {
                let lit = num(2)?;
                if lit == 0 {
                    return Err(err(ln, "literal 0".into()));
                }
                if toks.len() != 3 {
                    return Err(err(ln, "leaf takes exactly one literal".into()));
                }
                let var = usize::try_from(lit.unsigned_abs()).unwrap();
                (idx(1)?, Node::Leaf(Literal::new(var, lit > 0)))
            }
            "P" => {
                let k = idx(2)?;
                if toks.len() != 3 + k {
                    return Err(err(ln, format!("product declares {k} children")));
                }
                (idx(1)?, Node::Product((0..k).map(|i| idx(3 + i)).collect::<Result<_>>()?))
            }
            "S" => {
                let k = idx(2)?;
                let per = if flavor == Flavor::Logical { 1 } else { 2 };
                if toks.len() != 3 + per * k {
                    return Err(err(ln, format!("sum declares {k} children")));
                }
                let mut edges = Vec::with_capacity(k);
                for i in 0..k {
                    let ch = idx(3 + per * i)?;
                    let w = if per == 2 {
                        let t = toks[4 + per * i];
                        t.parse::<f64>().map_err(|_| err(ln, format!("bad weight `{t}`")))?
                    } else {
                        1.0
                    };
                    edges.push((ch, w));
                }
                (idx(1)?, Node::Sum(edges))
            }
            other => return Err(err(ln, format!("unknown node kind `{other}`"))),
        };
        if id != nodes.len() {
            return Err(err(ln, format!("node id {id} out of sequence (expected {})", nodes.len())));
        }
        nodes.push(Some(node));
    }
    let root = root.ok_or_else(|| err(0, "missing root line".into()))?;
    let nodes = nodes.into_iter().map(Option::unwrap).collect();
    Circuit::validate(RawCircuit { num_vars, flavor, normalized, nodes, root })
}

/// `dist <n>` header and one `<bits> <mass>` line per nonzero entry; bits
/// list `x1 … xn` left to right.
pub fn write_distribution(d: &DenseDistribution) -> String {
    let mut out = format!("dist {}\n", d.num_vars());
    for i in d.support() {
        writeln!(out, "{} {}", index_to_bits(d.num_vars(), i), format_real(*d.get(i))).unwrap();
    }
    out
}

pub fn parse_distribution(text: &str) -> Result<DenseDistribution> {
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !is_comment(l));
    let (hl, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let n: usize = header
        .strip_prefix("dist ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(hl, format!("bad header `{header}`")))?;
    if n > 30 {
        return Err(err(hl, format!("{n} variables is too many for a dense table")));
    }
    let mut mass = vec![0.0; 1 << n];
    for (ln, line) in lines {
        let (bits, m) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| err(ln, "expected `<bits> <mass>`".into()))?;
        if bits.len() != n {
            return Err(err(ln, format!("assignment `{bits}` is not {n} bits")));
        }
        let i = bits_to_index(bits).ok_or_else(|| err(ln, format!("bad bits `{bits}`")))?;
        mass[i as usize] =
            m.trim().parse().map_err(|_| err(ln, format!("bad mass `{}`", m.trim())))?;
    }
    DenseDistribution::new(n, mass)
}

/// DIMACS CNF: `p cnf <vars> <clauses>` then zero-terminated clauses, which
/// may span lines. A `%` line ends the formula.
pub fn parse_dimacs(text: &str) -> Result<Cnf> {
    let err = |line: usize, msg: String| Error::Parse { line, msg };
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["p", "cnf", v, c] => {
                    let v = v.parse().map_err(|_| err(ln, "bad variable count".into()))?;
                    let c = c.parse().map_err(|_| err(ln, "bad clause count".into()))?;
                    header = Some((v, c));
                }
                _ => return Err(err(ln, format!("bad problem line `{line}`"))),
            }
            continue;
        }
        let (nv, _) = header.ok_or_else(|| err(ln, "clause before problem line".into()))?;
        for tok in line.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| err(ln, format!("bad literal `{tok}`")))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                if lit.unsigned_abs() as usize > nv {
                    return Err(err(ln, format!("literal {lit} exceeds {nv} variables")));
                }
                current.push(lit);
            }
        }
    }
    let (nv, nc) = header.ok_or_else(|| err(0, "missing problem line".into()))?;
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != nc {
        log::warn!("DIMACS header declares {nc} clauses, found {}", clauses.len());
    }
    Cnf::new(nv, clauses)
}

pub fn write_dimacs(cnf: &Cnf) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.num_vars(), cnf.clauses().len());
    for cl in cnf.clauses() {
        for l in cl {
            write!(out, "{l} ").unwrap();
        }
        out.push_str("0\n");
    }
    out
}
