//! Named experiments: each runs a seeded sweep, records both sides of every
//! asserted bound, and produces a JSON report plus CSV plot data. Reports
//! depend only on the parameters, so repeated runs are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::circuit::{Circuit, Determinism, Node, DEFAULT_ENUMERATION_LIMIT};
use crate::constructions::cnf::{random_cnf, Cnf};
use crate::constructions::counterexample::{
    build_conditional_counterexample, build_disjoint_map_counterexample, build_scaled_family,
    conditional_base, parse_decimal, prefix_event, rational, scaled_base,
};
use crate::constructions::gadget::{build_sat_gadget, sat_decision, SatVerdict};
use crate::constructions::sauerhoff::{build_p_n, build_sauerhoff_dnnf, s_n_index};
use crate::constructions::{compile_decision_tree, uniform_over_predicate};
use crate::distribution::{DenseDistribution, ExactDistribution};
use crate::divergence::{
    check_kconvex_bound, f_divergence, is_absolute_map_approximator, is_absolute_marginal_approximator,
    is_relative_approximator, pinsker_bound, tvd, tvd_exact, Divergence, WorstRatio,
};
use crate::error::{Error, Result};
use crate::inference::evaluate_index;
use crate::oracle::{
    enumerate_distribution, perturb_weights, random_detdec_pc, random_distribution, rng, support_indices,
    DepthProfile, OracleBudget,
};
use crate::pruning::{approx_to_weak, default_tau, edge_bounds, prune};

pub const EXPERIMENTS: [&str; 11] = [
    "rel-to-tvd",
    "scaled-family",
    "sat-gadget",
    "marginal-abs",
    "map-abs",
    "conditional-gap",
    "sauerhoff-support",
    "sauerhoff-size",
    "prune-exact",
    "weak-approx-pipeline",
    "kconvex-bounds",
];

/// Relative tolerance for comparing floating-point values that are equal in
/// exact arithmetic but computed in a different order.
pub const REASSOCIATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentParams {
    pub seed: u64,
    pub trials: Option<usize>,
    pub vars: Option<usize>,
    /// Matrix sizes for the Sauerhoff experiments.
    pub n: Vec<usize>,
    /// Label of a user-supplied formula.
    pub cnf_name: Option<String>,
    #[serde(skip)]
    pub cnf: Option<Cnf>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams { seed: 1, trials: None, vars: None, n: Vec::new(), cnf_name: None, cnf: None }
    }
}

/// One asserted relation with both sides recorded.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: Value,
    pub relation: &'static str,
    pub rhs: Value,
    pub holds: bool,
}

impl Check {
    fn le(name: &str, lhs: f64, rhs: f64) -> Check {
        Check { name: name.into(), lhs: json!(lhs), relation: "<=", rhs: json!(rhs), holds: lhs <= rhs }
    }

    fn lt(name: &str, lhs: f64, rhs: f64) -> Check {
        Check { name: name.into(), lhs: json!(lhs), relation: "<", rhs: json!(rhs), holds: lhs < rhs }
    }

    fn close(name: &str, lhs: f64, rhs: f64, tol: f64) -> Check {
        Check {
            name: name.into(),
            lhs: json!(lhs),
            relation: "~=",
            rhs: json!(rhs),
            holds: (lhs - rhs).abs() <= tol,
        }
    }

    fn exact<T: PartialEq + Display>(name: &str, lhs: &T, rhs: &T) -> Check {
        Check {
            name: name.into(),
            lhs: json!(lhs.to_string()),
            relation: "==",
            rhs: json!(rhs.to_string()),
            holds: lhs == rhs,
        }
    }

    fn count(name: &str, lhs: u64, rhs: u64) -> Check {
        Check { name: name.into(), lhs: json!(lhs), relation: "==", rhs: json!(rhs), holds: lhs == rhs }
    }

    fn flag(name: &str, holds: bool) -> Check {
        Check { name: name.into(), lhs: json!(holds), relation: "==", rhs: json!(true), holds }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub instance: usize,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, Value>,
    pub measured: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Record {
    fn new(instance: usize, seed: Option<u64>) -> Record {
        Record { instance, seed, inputs: BTreeMap::new(), measured: BTreeMap::new(), checks: Vec::new(), pass: true }
    }

    fn input(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.inputs.insert(key.into(), json!(v));
        self
    }

    fn measure(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.measured.insert(key.into(), json!(v));
        self
    }

    fn check(&mut self, c: Check) -> &mut Self {
        self.pass &= c.holds;
        self.checks.push(c);
        self
    }
}

/// CSV table: header plus rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotData {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl PlotData {
    fn new(header: &[&str]) -> PlotData {
        PlotData { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub parameters: ExperimentParams,
    pub seeds: Vec<u64>,
    pub summary: BTreeMap<String, Value>,
    pub pass: bool,
    pub records: Vec<Record>,
    /// Kept out of the JSON so reports stay byte-identical across runs.
    #[serde(skip)]
    pub elapsed: Duration,
    #[serde(skip)]
    pub plot: PlotData,
}

impl ExperimentReport {
    fn new(name: &str, params: &ExperimentParams, plot: PlotData) -> Self {
        ExperimentReport {
            experiment: name.into(),
            parameters: params.clone(),
            seeds: Vec::new(),
            summary: BTreeMap::new(),
            pass: true,
            records: Vec::new(),
            elapsed: Duration::ZERO,
            plot,
        }
    }

    fn push(&mut self, r: Record) {
        self.pass &= r.pass;
        if let Some(s) = r.seed {
            self.seeds.push(s);
        }
        self.records.push(r);
    }

    fn summarize(&mut self, key: &str, v: impl Serialize) {
        self.summary.insert(key.into(), json!(v));
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = (usize, &Check)> {
        self.records.iter().flat_map(|r| r.checks.iter().filter(|c| !c.holds).map(move |c| (r.instance, c)))
    }
}

fn instance_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

fn fmt(x: f64) -> String {
    format!("{x:e}")
}

pub fn run_experiment(name: &str, params: &ExperimentParams) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = match name {
        "rel-to-tvd" => rel_to_tvd(params),
        "scaled-family" => scaled_family(params),
        "sat-gadget" => sat_gadget(params),
        "marginal-abs" => absolute_gaps(params, false),
        "map-abs" => absolute_gaps(params, true),
        "conditional-gap" => conditional_gap(params),
        "sauerhoff-support" => sauerhoff_support(params),
        "sauerhoff-size" => sauerhoff_size(params),
        "prune-exact" => prune_exact(params),
        "weak-approx-pipeline" => weak_approx_pipeline(params),
        "kconvex-bounds" => kconvex_bounds(params),
        other => Err(Error::InvalidArgument(format!(
            "unknown experiment `{other}`; expected one of {}",
            EXPERIMENTS.join(", ")
        ))),
    }?;
    let failures = report.records.iter().filter(|r| !r.pass).count();
    report.summarize("instances", report.records.len());
    report.summarize("failed_instances", failures);
    report.elapsed = start.elapsed();
    log::info!("{name}: {} instances, {failures} failed, {:?}", report.records.len(), report.elapsed);
    Ok(report)
}

fn vars_param(params: &ExperimentParams, default: usize, max: usize) -> Result<usize> {
    let n = params.vars.unwrap_or(default);
    if n == 0 || n > max {
        return Err(Error::InvalidArgument(format!("--vars must lie in 1..={max}, got {n}")));
    }
    Ok(n)
}

/// `Q = P·r / Z` with every `r(x)` within `(1+ε)^{±0.499}`, which keeps every
/// marginal ratio inside `[1/(1+ε), 1+ε]`.
fn relative_perturbation(p: &DenseDistribution, eps: f64, seed: u64, extreme: bool) -> DenseDistribution {
    let mut rng = rng(seed);
    let span = 0.499 * (1.0 + eps).ln();
    let q: Vec<f64> = p
        .mass()
        .iter()
        .map(|&m| {
            let e = if extreme {
                if rng.gen_bool(0.5) {
                    span
                } else {
                    -span
                }
            } else {
                rng.gen_range(-span..=span)
            };
            m * e.exp()
        })
        .collect();
    DenseDistribution::new(p.num_vars(), q).and_then(|d| d.normalized()).expect("positive mass")
}

fn rel_to_tvd(params: &ExperimentParams) -> Result<ExperimentReport> {
    let trials = params.trials.unwrap_or(500);
    let n = vars_param(params, 8, 12)?;
    let mut report = ExperimentReport::new("rel-to-tvd", params, PlotData::new(&["eps", "instance", "tvd", "bound"]));
    let grid = [0.02, 0.1, 0.3];
    let mut worst_fraction = 0.0f64;
    for i in 0..trials {
        let seed = instance_seed(params.seed, i);
        let eps = grid[i % grid.len()];
        let p = random_distribution(n, seed, 0.75);
        let q = relative_perturbation(&p, eps, seed ^ 0x5eed, i % 2 == 0);
        let rel = is_relative_approximator(&p, &q, &eps)?;
        let t = tvd(&p, &q)?;
        let mut r = Record::new(i, Some(seed));
        r.input("eps", eps).input("vars", n);
        if let WorstRatio::Finite(w) = rel.worst {
            r.measure("worst_ratio", w);
        }
        r.measure("tvd", t);
        r.check(Check::flag("pair is an eps-relative approximator", rel.holds));
        r.check(Check::le("tvd <= eps/2 + 1e-12", t, eps / 2.0 + 1e-12));
        worst_fraction = worst_fraction.max(t / (eps / 2.0));
        report.plot.row(vec![eps.to_string(), i.to_string(), fmt(t), fmt(eps / 2.0)]);
        report.push(r);
    }
    report.summarize("max_tvd_over_half_eps", worst_fraction);
    Ok(report)
}

fn scaled_family(params: &ExperimentParams) -> Result<ExperimentReport> {
    let n = vars_param(params, 4, 12)?;
    let mut report =
        ExperimentReport::new("scaled-family", params, PlotData::new(&["K", "delta", "kl_direct", "kl_closed"]));
    let kl = Divergence::Kl;
    let run = |report: &mut ExperimentReport, k: i64, delta: &str| -> Result<(f64, f64)> {
        let delta_q = parse_decimal(delta)?;
        let p = scaled_base(n, &delta_q)?;
        let event = prefix_event(&p, &delta_q)?;
        let k_q = rational(k, 1);
        let fam = build_scaled_family(&p, &event, &k_q)?;
        let direct = f_divergence(&fam.p.to_f64(), &fam.q.to_f64(), &kl)?;
        let closed = fam.closed_form(&kl);
        let rel = is_relative_approximator(&fam.p, &fam.q, &k_q)?;
        let worst = match rel.worst {
            WorstRatio::Finite(w) => w,
            WorstRatio::Infinite => return Err(Error::InvalidArgument("one-sided zero in scaled family".into())),
        };
        let mut r = Record::new(report.records.len(), None);
        r.input("K", k).input("delta", delta).input("vars", n);
        r.measure("lambda", fam.lambda.to_string()).measure("kl_direct", direct).measure("kl_closed", closed);
        r.check(Check::exact("sum of Q", &fam.q.total(), &BigRational::one()));
        r.check(Check::exact("max ratio P/Q", &fam.max_ratio(), &k_q));
        r.check(Check::close("direct KL vs closed form", direct, closed, 1e-9));
        r.check(Check::exact("worst relative marginal error", &worst, &k_q));
        report.plot.row(vec![k.to_string(), delta.into(), fmt(direct), fmt(closed)]);
        report.push(r);
        Ok((direct, closed))
    };
    for (k, delta) in [(10, "0.01"), (100, "0.001"), (2, "0.5")] {
        run(&mut report, k, delta)?;
    }
    // KL shrinks as δ does
    for k in [10, 100, 2] {
        let values: Vec<(f64, f64)> =
            ["0.1", "0.01", "0.001"].iter().map(|d| run(&mut report, k, d)).collect::<Result<_>>()?;
        let mut r = Record::new(report.records.len(), None);
        r.input("K", k).input("deltas", ["0.1", "0.01", "0.001"]);
        r.measure("kl_direct", values.iter().map(|v| v.0).collect::<Vec<_>>());
        for w in values.windows(2) {
            r.check(Check::lt("KL decreases with delta", w[1].0, w[0].0));
        }
        report.push(r);
    }
    Ok(report)
}

/// Moves `amount` of mass from one side of `Y` to the other, toward the
/// wrong verdict: satisfiable instances lose mass on `Y = 1`, unsatisfiable
/// ones gain it.
fn adversarial_shift(p: &DenseDistribution, y_var: usize, satisfiable: bool, amount: f64) -> DenseDistribution {
    let n = p.num_vars();
    let ybit = 1usize << (y_var - 1);
    let mut mass = p.mass().to_vec();
    if satisfiable {
        let on: f64 = mass.iter().enumerate().filter(|(i, _)| i & ybit != 0).map(|(_, m)| m).sum();
        for (i, m) in mass.iter_mut().enumerate() {
            if i & ybit != 0 {
                *m *= 1.0 - amount / on;
            }
        }
        mass[ybit - 1] += amount;
    } else {
        let targets = 1usize << (n - 1);
        for (i, m) in mass.iter_mut().enumerate() {
            if i & ybit != 0 {
                *m += amount / targets as f64;
            }
        }
        mass[ybit - 1] -= amount;
    }
    DenseDistribution::new(n, mass.iter().map(|m| m.max(0.0)).collect()).expect("valid table")
}

fn mixture(p: &DenseDistribution, r: &DenseDistribution, alpha: f64) -> DenseDistribution {
    let mass = p.mass().iter().zip(r.mass()).map(|(a, b)| (1.0 - alpha) * a + alpha * b).collect();
    DenseDistribution::new(p.num_vars(), mass).expect("valid table")
}

fn sat_gadget(params: &ExperimentParams) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "sat-gadget",
        params,
        PlotData::new(&["instance", "vars", "clauses", "satisfiable", "perturbation", "tvd", "q_y1"]),
    );
    let max_vars = vars_param(params, 12, 20)?;
    let instances: Vec<(Option<u64>, Cnf)> = match &params.cnf {
        Some(f) => vec![(None, f.clone())],
        None => (0..params.trials.unwrap_or(50))
            .map(|i| {
                let seed = instance_seed(params.seed, i);
                let n = 3 + i % (max_vars - 2).max(1);
                // alternate under- and over-constrained densities
                let ratio = if i % 2 == 0 { 2 } else { 8 };
                (Some(seed), random_cnf(n, ratio * n, 3.min(n), seed))
            })
            .collect(),
    };
    let (mut sat, mut unsat) = (0, 0);
    for (i, (seed, f)) in instances.into_iter().enumerate() {
        let n = f.num_vars();
        let truth = (0..1u64 << n).any(|x| f.eval(x));
        if truth {
            sat += 1;
        } else {
            unsat += 1;
        }
        let g = build_sat_gadget(&f)?;
        let expected = if truth { SatVerdict::Satisfiable } else { SatVerdict::Unsatisfiable };
        let noise = random_distribution(n + 1, seed.unwrap_or(7) ^ 0xabc, 0.5);
        let candidates = [
            ("exact", g.p.clone()),
            ("mixture-0.23", mixture(&g.p, &noise, 0.23)),
            ("adversarial-0.235", adversarial_shift(&g.p, g.y_var(), truth, 0.235)),
        ];
        let mut r = Record::new(i, seed);
        r.input("vars", n).input("clauses", f.clauses().len());
        r.measure("satisfiable", truth).measure("model_count", g.mc_f.to_string());
        r.measure("p_y1", g.p_y1.to_string());
        for (label, q) in candidates {
            let d = sat_decision(&g, &q)?;
            r.check(Check::lt(&format!("{label}: tvd < 0.24"), d.tvd, 0.24));
            r.check(Check::exact(&format!("{label}: verdict"), &format!("{:?}", d.verdict), &format!("{expected:?}")));
            report.plot.row(vec![
                i.to_string(),
                n.to_string(),
                f.clauses().len().to_string(),
                truth.to_string(),
                label.into(),
                fmt(d.tvd),
                fmt(d.q_y1),
            ]);
        }
        report.push(r);
    }
    report.summarize("satisfiable", sat);
    report.summarize("unsatisfiable", unsat);
    Ok(report)
}

/// A pair at a random distance: mixtures at random rates, or independent.
fn random_pair(n: usize, seed: u64) -> (DenseDistribution, DenseDistribution) {
    let mut rng = rng(seed);
    let density = rng.gen_range(0.2..1.0);
    let p = random_distribution(n, seed, density);
    let r = random_distribution(n, seed ^ 0xdead_beef, rng.gen_range(0.2..1.0));
    let q = if rng.gen_bool(0.8) { mixture(&p, &r, rng.gen_range(0.0..1.0)) } else { r };
    (p, q)
}

fn absolute_gaps(params: &ExperimentParams, map: bool) -> Result<ExperimentReport> {
    let name = if map { "map-abs" } else { "marginal-abs" };
    let trials = params.trials.unwrap_or(200);
    let max_n = vars_param(params, 10, 12)?;
    let mut report = ExperimentReport::new(name, params, PlotData::new(&["instance", "vars", "tvd", "worst_gap"]));
    let mut tightest = 0.0f64;
    for i in 0..trials {
        let seed = instance_seed(params.seed, i);
        let n = 2 + i % (max_n - 1).max(1);
        let (p, q) = random_pair(n, seed);
        let t = tvd(&p, &q)?;
        let limit = t + 1e-12;
        let gap = if map {
            is_absolute_map_approximator(&p, &q, &limit)?
        } else {
            is_absolute_marginal_approximator(&p, &q, &limit)?
        };
        let mut r = Record::new(i, Some(seed));
        r.input("vars", n);
        r.measure("tvd", t).measure("worst_gap", gap.worst_gap).measure("witness", &gap.witness);
        let label = if map { "every evidence MAP gap <= tvd" } else { "every marginal gap <= tvd" };
        r.check(Check::le(label, gap.worst_gap, limit));
        if t > 0.0 {
            tightest = tightest.max(gap.worst_gap / t);
        }
        report.plot.row(vec![i.to_string(), n.to_string(), fmt(t), fmt(gap.worst_gap)]);
        report.push(r);
    }
    report.summarize("max_gap_over_tvd", tightest);
    if map {
        // the converse fails: equal MAP values on disjoint supports
        let seeds = [instance_seed(params.seed, trials)];
        let cases = vec![
            (None, DenseDistribution::new(2, vec![0.5, 0.0, 0.5, 0.0])?.to_exact()),
            (Some(seeds[0]), sparse_exact(6, seeds[0])?),
        ];
        for (j, (seed, p)) in cases.into_iter().enumerate() {
            let fam = build_disjoint_map_counterexample(&p)?;
            let max_p = fam.p.mass().iter().cloned().fold(BigRational::zero(), |a, b| if b > a { b } else { a });
            let max_q = fam.q.mass().iter().cloned().fold(BigRational::zero(), |a, b| if b > a { b } else { a });
            let mut r = Record::new(trials + j, seed);
            r.input("construction", "disjoint support").input("vars", p.num_vars());
            r.check(Check::exact("MAP gap", &(max_p - max_q), &BigRational::zero()));
            r.check(Check::exact("tvd", &tvd_exact(&fam.p, &fam.q)?, &BigRational::one()));
            report.push(r);
        }
    }
    Ok(report)
}

/// Random exact distribution on at most a quarter of the assignments.
fn sparse_exact(n: usize, seed: u64) -> Result<ExactDistribution> {
    let mut rng = rng(seed);
    let size = 1usize << n;
    let mut weights: Vec<i64> = (0..size).map(|_| if rng.gen_bool(0.25) { rng.gen_range(1..=100) } else { 0 }).collect();
    if weights.iter().all(|&w| w == 0) {
        weights[0] = 1;
    }
    let total: i64 = weights.iter().sum();
    ExactDistribution::new(n, weights.iter().map(|&w| rational(w, total)).collect())
}

fn conditional_gap(params: &ExperimentParams) -> Result<ExperimentReport> {
    let n = vars_param(params, 4, 12)?;
    if n < 2 {
        return Err(Error::InvalidArgument("conditional-gap needs at least 2 variables".into()));
    }
    let mut report = ExperimentReport::new(
        "conditional-gap",
        params,
        PlotData::new(&["k", "eps", "p_e", "tvd", "conditional_gap"]),
    );
    let cases = [(10, "0.05", "0.05"), (10, "0.05", "0.005"), (10, "0.05", "0.0005"), (1, "0.1", "0.05")];
    let mut tvds = Vec::new();
    for (i, (k, eps, p_e)) in cases.iter().enumerate() {
        let (k_q, eps_q, p_e_q) = (rational(*k, 1), parse_decimal(eps)?, parse_decimal(p_e)?);
        let (p, e) = conditional_base(n, &p_e_q)?;
        let fam = build_conditional_counterexample(&p, &e, &k_q, &eps_q)?;
        let (t, gap) = (fam.tvd(), fam.conditional_gap());
        let mut r = Record::new(i, None);
        r.input("k", k).input("eps", eps).input("p_e", p_e).input("vars", n).input("evidence", &e);
        r.measure("y_star", fam.y_star).measure("y_one", fam.y_one);
        r.check(Check::exact("tvd == k*eps*P(e)", &t, &(&k_q * &eps_q * &p_e_q)));
        r.check(Check::exact("conditional gap == k*eps", &gap, &(&k_q * &eps_q)));
        r.check(Check::flag("tvd < eps", t < eps_q));
        report.plot.row(vec![k.to_string(), eps.to_string(), p_e.to_string(), t.to_string(), gap.to_string()]);
        tvds.push(t);
        report.push(r);
    }
    let mut r = Record::new(cases.len(), None);
    r.input("sweep", "P(e) divided by 10 twice at k = 10, eps = 0.05");
    let ten = rational(10, 1);
    r.check(Check::exact("tvd shrinks tenfold", &(&tvds[0] / &tvds[1]), &ten));
    r.check(Check::exact("tvd shrinks tenfold again", &(&tvds[1] / &tvds[2]), &ten));
    report.push(r);
    Ok(report)
}

fn sauerhoff_support(params: &ExperimentParams) -> Result<ExperimentReport> {
    let ns = if params.n.is_empty() { vec![3, 4] } else { params.n.clone() };
    let mut report = ExperimentReport::new(
        "sauerhoff-support",
        params,
        PlotData::new(&["n", "assignments", "agree", "models", "density", "tvd_uniform"]),
    );
    let beta = 1.0 - 1.0 / 2f64.sqrt();
    for (i, &n) in ns.iter().enumerate() {
        if n < 2 {
            return Err(Error::InvalidArgument("Sauerhoff sizes start at n = 2".into()));
        }
        OracleBudget::from_env().check_vars(n * n, "Sauerhoff support sweep")?;
        let pc = build_p_n(n)?;
        let dnnf = build_sauerhoff_dnnf(n)?;
        let total = 1u64 << (n * n);
        let mut agree = 0u64;
        let mut models = 0u64;
        let mut mass = Vec::with_capacity(total as usize);
        for x in 0..total {
            let v = evaluate_index(&pc, x);
            let s = s_n_index(n, x);
            agree += ((v > 0.0) == s) as u64;
            models += s as u64;
            mass.push(v);
        }
        let dnnf_models = support_indices(&dnnf)?;
        let p_n = DenseDistribution::new(n * n, mass)?;
        let u = uniform_over_predicate(n * n, |x| s_n_index(n, x))?;
        let t = tvd(&u, &p_n)?;
        let density = models as f64 / total as f64;
        let eta = 1.0 / (beta * total as f64);
        let mut r = Record::new(i, None);
        r.input("n", n);
        r.measure("models", models).measure("density", density).measure("density_threshold", beta);
        r.measure("density_above_threshold", density > beta);
        r.measure("tvd_uniform_vs_p_n", t).measure("eta", eta);
        r.measure("normalization", p_n.total());
        r.check(Check::count("P_n support agrees with S_n", agree, total));
        r.check(Check::count("DNNF model count", dnnf_models.len() as u64, models));
        r.check(Check::flag("P_n smooth and decomposable", pc.is_smooth() && pc.is_decomposable()));
        r.check(Check::close("P_n total mass", p_n.total(), 1.0, 1e-9));
        report.plot.row(vec![
            n.to_string(),
            total.to_string(),
            agree.to_string(),
            models.to_string(),
            fmt(density),
            fmt(t),
        ]);
        report.push(r);
    }
    Ok(report)
}

/// Nodes of the Sauerhoff DNNF never exceed this many per matrix entry:
/// two OBDDs with six states per layer, each state a sum over two
/// literal-times-rest products, plus the shared literals and the root.
pub const SAUERHOFF_NODES_PER_ENTRY: usize = 39;

fn sauerhoff_size(params: &ExperimentParams) -> Result<ExperimentReport> {
    let ns = if params.n.is_empty() { (3..=8).collect() } else { params.n.clone() };
    let mut report = ExperimentReport::new(
        "sauerhoff-size",
        params,
        PlotData::new(&["n", "nodes", "edges", "n_squared", "nodes_over_n_squared", "p_n_nodes"]),
    );
    let mut pts = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let dnnf = build_sauerhoff_dnnf(n)?;
        let (nodes, edges) = dnnf.size();
        let p_nodes = dnnf.from_logical()?.size().0;
        let n2 = n * n;
        let mut r = Record::new(i, None);
        r.input("n", n);
        r.measure("nodes", nodes).measure("edges", edges).measure("p_n_nodes", p_nodes);
        r.check(Check::le(
            "nodes <= 39 n^2",
            nodes as f64,
            (SAUERHOFF_NODES_PER_ENTRY * n2) as f64,
        ));
        report.plot.row(vec![
            n.to_string(),
            nodes.to_string(),
            edges.to_string(),
            n2.to_string(),
            fmt(nodes as f64 / n2 as f64),
            p_nodes.to_string(),
        ]);
        pts.push((n as f64, nodes as f64));
        report.push(r);
    }
    // least-squares c in nodes ≈ c·n², and the log-log slope
    let c = pts.iter().map(|(n, v)| v * n * n).sum::<f64>() / pts.iter().map(|(n, _)| n.powi(4)).sum::<f64>();
    let max_ratio = pts.iter().map(|(n, v)| v / (n * n)).fold(0.0, f64::max);
    report.summarize("fitted_c", c);
    report.summarize("max_nodes_over_n_squared", max_ratio);
    if pts.len() >= 2 {
        let k = pts.len() as f64;
        let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|(n, v)| (n.ln(), v.ln())).unzip();
        let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
        let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        report.summarize("log_log_slope", slope);
        let mut r = Record::new(ns.len(), None);
        r.input("fit", "log nodes against log n");
        r.measure("fitted_c", c).measure("max_nodes_over_n_squared", max_ratio);
        r.check(Check::lt("growth exponent below 3", slope, 3.0));
        report.push(r);
    }
    Ok(report)
}

/// Node values at a full assignment.
fn node_values(c: &Circuit, index: u64) -> Vec<f64> {
    let mut vals: Vec<f64> = Vec::with_capacity(c.nodes().len());
    for node in c.nodes() {
        let v = match node {
            Node::Leaf(l) => l.holds(index >> (l.var - 1) & 1 == 1) as u8 as f64,
            Node::Product(cs) => cs.iter().map(|&ch| vals[ch]).product(),
            Node::Sum(es) => es.iter().map(|&(ch, w)| w * vals[ch]).sum(),
        };
        vals.push(v);
    }
    vals
}

/// Per-edge maximum of the circuit output over the assignments whose
/// accepting path crosses the edge (deterministic circuits only).
pub fn traced_edge_maxima(c: &Circuit) -> Result<Vec<Vec<f64>>> {
    OracleBudget::from_env().check_vars(c.num_vars(), "edge tracing")?;
    let mut best: Vec<Vec<f64>> = c.nodes().iter().map(|n| vec![0.0; n.children().count()]).collect();
    for x in 0..1u64 << c.num_vars() {
        let vals = node_values(c, x);
        let out = vals[c.root()];
        if out <= 0.0 {
            continue;
        }
        let mut stack = vec![c.root()];
        while let Some(id) = stack.pop() {
            for (i, ch) in c.node(id).children().enumerate() {
                if vals[ch] > 0.0 {
                    best[id][i] = best[id][i].max(out);
                    stack.push(ch);
                }
            }
        }
    }
    Ok(best)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn prune_exact(params: &ExperimentParams) -> Result<ExperimentReport> {
    let trials = params.trials.unwrap_or(200);
    let max_n = vars_param(params, 10, 16)?;
    let mut report = ExperimentReport::new(
        "prune-exact",
        params,
        PlotData::new(&["instance", "vars", "support_before", "support_after", "removed_edges", "rounds"]),
    );
    for i in 0..trials {
        let seed = instance_seed(params.seed, i);
        let n = 1 + i % max_n;
        let c = random_detdec_pc(n, seed, DepthProfile::DecisionTree);
        let tau = default_tau(n);
        let table = edge_bounds(&c)?;
        let traced = traced_edge_maxima(&c)?;
        let eb_gap = table
            .bounds
            .iter()
            .flatten()
            .zip(traced.iter().flatten())
            .map(|(&a, &b)| relative_gap(a, b))
            .fold(0.0, f64::max);
        let pruned = prune(&c, tau)?;
        let (mut agree, mut heavy, mut value_gap) = (0u64, 0u64, 0.0f64);
        let before = support_indices(&c)?.len();
        for x in 0..1u64 << n {
            let q = evaluate_index(&c, x);
            let v = evaluate_index(&pruned.circuit, x);
            heavy += (q >= tau) as u64;
            agree += ((q >= tau) == (v > 0.0)) as u64;
            if v > 0.0 {
                value_gap = value_gap.max(relative_gap(q, v));
            }
        }
        let props = pruned.circuit.properties(DEFAULT_ENUMERATION_LIMIT);
        let mut r = Record::new(i, Some(seed));
        r.input("vars", n).input("tau", tau);
        r.measure("support_before", before).measure("support_after", heavy);
        r.measure("removed_edges", pruned.removed_edges.len()).measure("rounds", pruned.rounds);
        r.check(Check::count("pruned support == {Q >= tau}", agree, 1 << n));
        r.check(Check::le("surviving values unchanged (relative)", value_gap, REASSOCIATION_TOLERANCE));
        r.check(Check::le("edge bounds vs traced maxima (relative)", eb_gap, REASSOCIATION_TOLERANCE));
        r.check(Check::flag("output decomposable", props.decomposable));
        r.check(Check::flag("output deterministic", props.deterministic == Determinism::True));
        report.plot.row(vec![
            i.to_string(),
            n.to_string(),
            before.to_string(),
            heavy.to_string(),
            pruned.removed_edges.len().to_string(),
            pruned.rounds.to_string(),
        ]);
        report.push(r);
    }
    Ok(report)
}

/// A satisfiable random 3-CNF over `n` variables.
fn satisfiable_cnf(n: usize, seed: u64) -> Cnf {
    (0..)
        .map(|k| random_cnf(n, 2 * n, 3.min(n), seed.wrapping_add(k * 7919)))
        .find(|f| (0..1u64 << n).any(|x| f.eval(x)))
        .expect("some formula is satisfiable")
}

fn weak_approx_pipeline(params: &ExperimentParams) -> Result<ExperimentReport> {
    let trials = params.trials.unwrap_or(100);
    let max_n = vars_param(params, 10, 16)?;
    let min_n = 6.min(max_n);
    let mut report = ExperimentReport::new(
        "weak-approx-pipeline",
        params,
        PlotData::new(&["instance", "vars", "perturbation", "eps", "error", "bound"]),
    );
    let mut worst = 0.0f64;
    for i in 0..trials {
        let seed = instance_seed(params.seed, i);
        let n = min_n + i % (max_n - min_n + 1);
        let f_cnf = satisfiable_cnf(n, seed);
        let p = uniform_over_predicate(n, |x| f_cnf.eval(x))?;
        let f = compile_decision_tree(&p)?.to_logical()?;
        let exact = compile_decision_tree(&p)?;
        let mut rng = rng(seed);
        let reweight = i % 2 == 0;
        let mut strength = if reweight { rng.gen_range(0.05..0.6) } else { rng.gen_range(0.02..0.2) };
        let noise = random_distribution(n, seed ^ 0xf00d, rng.gen_range(0.1..0.5));
        let q = loop {
            let q = if reweight {
                perturb_weights(&exact, seed, strength)
            } else {
                compile_decision_tree(&mixture(&p, &noise, strength))?
            };
            if tvd(&p, &enumerate_distribution(&q)?)? < 0.125 {
                break q;
            }
            strength /= 2.0;
        };
        let w = approx_to_weak(&f, &q)?;
        let label = if reweight { "reweight" } else { "mixture" };
        let mut r = Record::new(i, Some(seed));
        r.input("vars", n).input("perturbation", label).input("strength", strength);
        r.measure("models", p.support_size()).measure("epsilon", w.report.epsilon);
        r.measure("removed_edges", w.report.removed_edges);
        r.check(Check::lt("epsilon < 1/8", w.report.epsilon, 0.125));
        r.check(Check {
            name: "symmetric difference < 4 eps 2^n".into(),
            lhs: json!(w.report.error),
            relation: "<",
            rhs: json!(w.report.bound),
            holds: w.report.holds,
        });
        if w.report.bound > 0.0 {
            worst = worst.max(w.report.error as f64 / w.report.bound);
        }
        report.plot.row(vec![
            i.to_string(),
            n.to_string(),
            label.into(),
            fmt(w.report.epsilon),
            w.report.error.to_string(),
            fmt(w.report.bound),
        ]);
        report.push(r);
    }
    report.summarize("max_error_over_bound", worst);
    Ok(report)
}

pub const KCONVEX_DIVERGENCES: [Divergence; 5] = [
    Divergence::Kl,
    Divergence::PearsonChi2,
    Divergence::SquaredHellinger,
    Divergence::ReverseKl,
    Divergence::NeymanChi2,
];

fn kconvex_bounds(params: &ExperimentParams) -> Result<ExperimentReport> {
    let trials = params.trials.unwrap_or(1000);
    let max_n = vars_param(params, 6, 12)?;
    let mut report = ExperimentReport::new(
        "kconvex-bounds",
        params,
        PlotData::new(&["instance", "divergence", "M", "k", "df", "tvd", "bound"]),
    );
    for i in 0..trials {
        let seed = instance_seed(params.seed, i);
        let n = 1 + i % max_n;
        let mut rng = rng(seed);
        let p = random_distribution(n, seed, 1.0);
        let r_dist = random_distribution(n, seed ^ 0x1234, 1.0);
        // full-support pairs, from nearby to unrelated
        let q = mixture(&p, &r_dist, rng.gen_range(0.0..=1.0));
        let mut r = Record::new(i, Some(seed));
        r.input("vars", n);
        for d in KCONVEX_DIVERGENCES {
            let k = check_kconvex_bound(&p, &q, &d)?;
            r.check(Check::le(&format!("{}: tvd^2 <= D/k + 1e-9", d.name()), k.tvd * k.tvd, k.df / k.k + 1e-9));
            report.plot.row(vec![
                i.to_string(),
                d.name().into(),
                fmt(k.m),
                fmt(k.k),
                fmt(k.df),
                fmt(k.tvd),
                fmt(k.bound),
            ]);
        }
        let kl = f_divergence(&p, &q, &Divergence::Kl)?;
        let t = tvd(&p, &q)?;
        r.check(Check::le("pinsker: tvd <= sqrt(KL/2)", t, pinsker_bound(kl) + 1e-12));
        report.push(r);
    }
    Ok(report)
}
