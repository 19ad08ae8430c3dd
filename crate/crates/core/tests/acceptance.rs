//! End-to-end acceptance checks. Every reference value is recomputed here
//! by direct enumeration; the library's own oracle module is not used as
//! ground truth. Prints one PASS/FAIL line per check.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;

use common::*;
use pcircuits::constructions::cnf::{random_cnf, Cnf};
use pcircuits::constructions::counterexample::{
    build_conditional_counterexample, build_disjoint_map_counterexample, build_scaled_family,
    conditional_base, prefix_event, scaled_base,
};
use pcircuits::constructions::gadget::{build_sat_gadget, sat_decision, SatVerdict};
use pcircuits::constructions::sauerhoff::{build_p_n, build_sauerhoff_dnnf};
use pcircuits::constructions::compile_decision_tree;
use pcircuits::divergence::{
    f_divergence, is_absolute_map_approximator, is_absolute_marginal_approximator,
    is_relative_approximator, WorstRatio,
};
use pcircuits::experiment::{run_experiment, ExperimentParams, EXPERIMENTS};
use pcircuits::format::{parse_circuit, parse_distribution, write_circuit, write_distribution};
use pcircuits::inference::{map_query, marginal, model_count};
use pcircuits::oracle::{perturb_weights, random_detdec_pc, random_distribution, random_smooth_dec_pc, rng, DepthProfile};
use pcircuits::pruning::{approx_to_weak, default_tau, edge_bounds, prune};
use pcircuits::{Assignment, Circuit, DenseDistribution, Divergence, ExactDistribution};

/// Collects failures; a check passes when none were recorded.
#[derive(Default)]
struct Tally {
    checked: usize,
    failures: Vec<String>,
}

impl Tally {
    fn ensure(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.failures.len() < 5 {
            self.failures.push(msg());
        } else if !ok {
            self.failures.push(String::new());
        }
    }

    fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn seed_of(group: u64, i: usize) -> u64 {
    group * 1_000_000 + i as u64
}

fn random_partial(n: usize, rng: &mut impl Rng) -> Assignment {
    let mut a = Assignment::empty(n);
    for v in 1..=n {
        match rng.gen_range(0..3) {
            0 => a.set(v, Some(false)),
            1 => a.set(v, Some(true)),
            _ => {}
        }
    }
    a
}

fn consistent(a: &Assignment, x: u64) -> bool {
    a.assigned().all(|(v, b)| bit(x, v) == b)
}

/// Lexicographic key: x1 is the most significant position, 0 before 1.
fn lex_key(n: usize, x: u64) -> u64 {
    (1..=n).fold(0, |k, v| k << 1 | bit(x, v) as u64)
}

fn inference_matches_enumeration(t: &mut Tally) -> String {
    let mut r = rng(11);
    for i in 0..500 {
        let n = 1 + i % 12;
        let c = random_smooth_dec_pc(n, seed_of(1, i), 1 + i % 3);
        let tab = table(&c);
        for _ in 0..6 {
            let y = random_partial(n, &mut r);
            let want: f64 = (0..1u64 << n).filter(|&x| consistent(&y, x)).map(|x| tab[x as usize]).sum();
            let got = marginal(&c, &y).unwrap();
            t.ensure((got - want).abs() <= 1e-9, || format!("marginal seed {i} {y}: {got} vs {want}"));
        }
    }
    for i in 0..500 {
        let n = 1 + i % 12;
        let c = random_detdec_pc(n, seed_of(2, i), DepthProfile::Factorized { decision_depth: 3 });
        let tab = table(&c);
        for _ in 0..4 {
            let e = random_partial(n, &mut r);
            let best = (0..1u64 << n)
                .filter(|&x| consistent(&e, x))
                .max_by(|&a, &b| {
                    tab[a as usize]
                        .partial_cmp(&tab[b as usize])
                        .unwrap()
                        .then(lex_key(n, b).cmp(&lex_key(n, a)))
                })
                .unwrap();
            let got = map_query(&c, &e).unwrap();
            let arg = got.argmax.unwrap();
            t.ensure(got.value == tab[best as usize], || {
                format!("map seed {i} {e}: {} vs {}", got.value, tab[best as usize])
            });
            t.ensure(eval(&c, arg.to_index()) == got.value, || format!("argmax re-evaluation, seed {i}"));
            t.ensure(arg.to_index() == best || tab[best as usize] == 0.0, || {
                format!("tie-breaking seed {i}: {arg} vs {}", Assignment::from_index(n, best))
            });
        }
        let count = model_count(&c.to_logical().unwrap(), true).unwrap();
        let want = tab.iter().filter(|&&v| v > 0.0).count();
        t.ensure(count == BigUint::from(want), || format!("count seed {i}: {count} vs {want}"));
    }
    "3000 marginals, 2000 MAP queries, 500 model counts".into()
}

fn relative_perturbation(p: &[f64], eps: f64, extreme: bool, r: &mut impl Rng) -> Vec<f64> {
    let span = 0.499 * (1.0 + eps).ln();
    let q: Vec<f64> = p
        .iter()
        .map(|&m| {
            let u = if extreme { if r.gen_bool(0.5) { span } else { -span } } else { r.gen_range(-span..=span) };
            m * u.exp()
        })
        .collect();
    let z: f64 = q.iter().sum();
    q.iter().map(|v| v / z).collect()
}

fn relative_approximation_bounds_tvd(t: &mut Tally) -> String {
    let mut r = rng(21);
    let mut worst = 0.0f64;
    for i in 0..500 {
        let eps = [0.02, 0.1, 0.3][i % 3];
        let n = 2 + i % 7;
        let p = random_distribution(n, seed_of(3, i), 0.8);
        let q = relative_perturbation(p.mass(), eps, i % 2 == 0, &mut r);
        let (pm, qm) = (partial_marginals(p.mass(), n), partial_marginals(&q, n));
        let rel = pm.iter().zip(&qm).all(|(a, b)| {
            (*a == 0.0 && *b == 0.0) || (*a > 0.0 && *b > 0.0 && a / b <= 1.0 + eps && b / a <= 1.0 + eps)
        });
        t.ensure(rel, || format!("pair {i} is not an eps-relative approximator"));
        let qd = DenseDistribution::new(n, q.clone()).unwrap();
        t.ensure(is_relative_approximator(&p, &qd, &eps).unwrap().holds, || format!("library predicate, pair {i}"));
        let d = half_l1(p.mass(), &q);
        t.ensure(d <= eps / 2.0 + 1e-12, || format!("pair {i}: tvd {d} > {}", eps / 2.0));
        worst = worst.max(d / (eps / 2.0));
    }
    format!("500 pairs, max tvd/(eps/2) = {worst:.4}")
}

fn kl_closed_form(k: f64, delta: f64) -> f64 {
    let f = |x: f64| x * x.ln();
    delta * f(k) / k + (1.0 - delta / k) * f((1.0 - delta) / (1.0 - delta / k))
}

fn scaled_family_pair(k: i64, delta: &BigRational) -> (ExactDistribution, ExactDistribution) {
    let p = scaled_base(4, delta).unwrap();
    let event = prefix_event(&p, delta).unwrap();
    let fam = build_scaled_family(&p, &event, &ratio(k, 1)).unwrap();
    (fam.p, fam.q)
}

fn scaled_family_separates_kl_from_relative_error(t: &mut Tally) -> String {
    let mut lines = Vec::new();
    for (k, num, den) in [(10, 1, 100), (100, 1, 1000), (2, 1, 2)] {
        let delta = ratio(num, den);
        let (p, q) = scaled_family_pair(k, &delta);
        let total = q.mass().iter().fold(BigRational::zero(), |a, b| a + b);
        t.ensure(total == one(), || format!("K={k}: Q sums to {total}"));
        let direct = kl(&p.to_f64().mass().to_vec(), q.to_f64().mass());
        let closed = kl_closed_form(k as f64, num as f64 / den as f64);
        t.ensure((direct - closed).abs() <= 1e-9, || format!("K={k}: KL {direct} vs closed form {closed}"));
        let (pm, qm) = (exact_partial_marginals(p.mass(), 4), exact_partial_marginals(q.mass(), 4));
        let worst = pm
            .iter()
            .zip(&qm)
            .filter(|(a, b)| !a.is_zero() && !b.is_zero())
            .map(|(a, b)| if a > b { a / b } else { b / a })
            .fold(BigRational::zero(), |m, x| if x > m { x } else { m });
        t.ensure(worst == ratio(k, 1), || format!("K={k}: worst relative error {worst}"));
        let lib = is_relative_approximator(&p, &q, &ratio(k, 1)).unwrap();
        t.ensure(lib.worst == WorstRatio::Finite(ratio(k, 1)), || format!("K={k}: library worst {:?}", lib.worst));
        lines.push(format!("K={k}: KL={direct:.3e}"));
    }
    for k in [10, 100, 2] {
        let kls: Vec<f64> = [(1, 10), (1, 100), (1, 1000)]
            .iter()
            .map(|&(a, b)| {
                let (p, q) = scaled_family_pair(k, &ratio(a, b));
                kl(p.to_f64().mass(), q.to_f64().mass())
            })
            .collect();
        t.ensure(kls.windows(2).all(|w| w[1] < w[0]), || format!("K={k}: KL not decreasing in delta: {kls:?}"));
    }
    lines.join(", ")
}

fn adversarial(p: &[f64], n: usize, sat: bool, amount: f64) -> Vec<f64> {
    // Y is the top variable; index (1 << n) - 1 is the Y = 0, all-ones model
    let y = 1usize << n;
    let mut q = p.to_vec();
    if sat {
        let on: f64 = p[y..].iter().sum();
        for v in &mut q[y..] {
            *v *= 1.0 - amount / on;
        }
        q[y - 1] += amount;
    } else {
        for v in &mut q[y..] {
            *v += amount / y as f64;
        }
        q[y - 1] -= amount;
    }
    q
}

fn sat_decision_is_always_right(t: &mut Tally) -> String {
    let (mut sat_count, mut unsat_count) = (0, 0);
    for i in 0..50 {
        let n = 3 + i % 10;
        let f = random_cnf(n, if i % 2 == 0 { 2 * n } else { 8 * n }, 3, seed_of(4, i));
        let models: Vec<u64> = (0..1u64 << n).filter(|&x| cnf_holds(f.clauses(), x)).collect();
        let sat = !models.is_empty();
        if sat {
            sat_count += 1;
        } else {
            unsat_count += 1;
        }
        // uniform over models of (Y ∧ f) ∨ (¬Y ∧ all ones)
        let mut p = vec![0.0; 1 << (n + 1)];
        let lifted: Vec<u64> = std::iter::once((1u64 << n) - 1).chain(models.iter().map(|&x| x | 1 << n)).collect();
        for &x in &lifted {
            p[x as usize] = 1.0 / lifted.len() as f64;
        }
        let g = build_sat_gadget(&f).unwrap();
        t.ensure(g.p.mass() == p.as_slice(), || format!("formula {i}: gadget distribution differs"));
        let noise = random_distribution(n + 1, seed_of(5, i), 0.5);
        let mix: Vec<f64> = p.iter().zip(noise.mass()).map(|(a, b)| 0.77 * a + 0.23 * b).collect();
        for q in [p.clone(), mix, adversarial(&p, n, sat, 0.235)] {
            let d = half_l1(&p, &q);
            t.ensure(d < 0.24, || format!("formula {i}: perturbation at tvd {d}"));
            let q = DenseDistribution::new(n + 1, q).unwrap();
            let verdict = sat_decision(&g, &q).unwrap().verdict;
            let want = if sat { SatVerdict::Satisfiable } else { SatVerdict::Unsatisfiable };
            t.ensure(verdict == want, || format!("formula {i} (sat={sat}) decided {verdict:?}"));
        }
    }
    format!("{sat_count} satisfiable, {unsat_count} unsatisfiable, 3 approximations each")
}

fn exact_sparse(n: usize, seed: u64) -> ExactDistribution {
    let mut r = rng(seed);
    let mut w: Vec<i64> = (0..1 << n).map(|_| if r.gen_bool(0.3) { r.gen_range(1..50) } else { 0 }).collect();
    w[0] += 1;
    let total: i64 = w.iter().sum();
    ExactDistribution::new(n, w.iter().map(|&x| ratio(x, total)).collect()).unwrap()
}

fn tvd_bounds_marginal_and_map_gaps(t: &mut Tally) -> String {
    let mut r = rng(51);
    let (mut worst_m, mut worst_map) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let n = 2 + i % 9;
        let p = random_distribution(n, seed_of(6, i), r.gen_range(0.2..1.0));
        let other = random_distribution(n, seed_of(7, i), r.gen_range(0.2..1.0));
        let q: Vec<f64> = if i % 5 == 4 {
            other.mass().to_vec()
        } else {
            let a = r.gen_range(0.0..1.0);
            p.mass().iter().zip(other.mass()).map(|(x, y)| (1.0 - a) * x + a * y).collect()
        };
        let d = half_l1(p.mass(), &q);
        let gm = partial_marginals(p.mass(), n)
            .iter()
            .zip(partial_marginals(&q, n))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let gx = partial_maxima(p.mass(), n)
            .iter()
            .zip(partial_maxima(&q, n))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        t.ensure(gm <= d + 1e-12, || format!("pair {i}: marginal gap {gm} > tvd {d}"));
        t.ensure(gx <= d + 1e-12, || format!("pair {i}: MAP gap {gx} > tvd {d}"));
        let qd = DenseDistribution::new(n, q).unwrap();
        let lm = is_absolute_marginal_approximator(&p, &qd, &(d + 1e-12)).unwrap();
        let lx = is_absolute_map_approximator(&p, &qd, &(d + 1e-12)).unwrap();
        t.ensure(lm.holds && lx.holds, || format!("pair {i}: library predicates disagree"));
        if d > 0.0 {
            worst_m = worst_m.max(gm / d);
            worst_map = worst_map.max(gx / d);
        }
    }
    let two = DenseDistribution::new(2, vec![0.5, 0.0, 0.5, 0.0]).unwrap().to_exact();
    for p in [two, exact_sparse(6, 77)] {
        let fam = build_disjoint_map_counterexample(&p).unwrap();
        let max = |d: &ExactDistribution| d.mass().iter().cloned().fold(BigRational::zero(), |a, b| if b > a { b } else { a });
        t.ensure(max(&fam.p) == max(&fam.q), || "disjoint pair: MAP values differ".into());
        let d = exact_half_l1(fam.p.mass(), fam.q.mass());
        t.ensure(d == one(), || format!("disjoint pair: tvd {d}"));
    }
    format!("200 pairs, max gap/tvd: marginals {worst_m:.6}, MAP {worst_map:.6}; disjoint pairs at tvd 1 with MAP gap 0")
}

fn conditional_counterexample_is_exact(t: &mut Tally) -> String {
    let (p, e) = conditional_base(4, &ratio(1, 20)).unwrap();
    let fam = build_conditional_counterexample(&p, &e, &ratio(10, 1), &ratio(1, 20)).unwrap();
    let d = exact_half_l1(fam.p.mass(), fam.q.mass());
    t.ensure(d == ratio(1, 40), || format!("tvd {d}"));
    t.ensure(d < ratio(1, 20), || "tvd not below eps".into());
    let on_e = |x: usize| x & 1 == 1;
    let mass_e = |m: &[BigRational]| m.iter().enumerate().filter(|(x, _)| on_e(*x)).fold(BigRational::zero(), |a, (_, b)| a + b);
    let (pe, qe) = (mass_e(fam.p.mass()), mass_e(fam.q.mass()));
    let y = fam.y_star as usize;
    t.ensure(on_e(y), || "y* violates the evidence".into());
    let top = (0..16).filter(|&x| on_e(x)).map(|x| fam.p.mass()[x].clone()).max().unwrap();
    t.ensure(fam.p.mass()[y] == top, || "y* is not a most probable completion".into());
    let gap = (&fam.p.mass()[y] / &pe - &fam.q.mass()[y] / &qe).abs();
    t.ensure(gap == ratio(1, 2), || format!("conditional gap {gap}"));
    format!("tvd = {d}, conditional MAP gap = {gap}")
}

fn sauerhoff_support_and_size(t: &mut Tally) -> String {
    for n in [3, 4] {
        let pc = build_p_n(n).unwrap();
        t.ensure(smooth(&pc) && decomposable(&pc), || format!("P_{n} not smooth and decomposable"));
        let mut agree = 0u64;
        for x in 0..1u64 << (n * n) {
            agree += ((eval(&pc, x) > 0.0) == sauerhoff(n, x)) as u64;
        }
        t.ensure(agree == 1 << (n * n), || format!("n={n}: {agree} of {} agree", 1u64 << (n * n)));
    }
    let sizes: Vec<(f64, f64)> =
        (3..=8).map(|n| (n as f64, build_sauerhoff_dnnf(n).unwrap().nodes().len() as f64)).collect();
    for &(n, v) in &sizes {
        t.ensure(v <= 39.0 * n * n, || format!("n={n}: {v} nodes exceed 39 n^2"));
    }
    let c = sizes.iter().map(|(n, v)| v * n * n).sum::<f64>() / sizes.iter().map(|(n, _)| n.powi(4)).sum::<f64>();
    let k = sizes.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = sizes.iter().map(|(n, v)| (n.ln(), v.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    t.ensure(slope < 3.0, || format!("growth exponent {slope}"));
    let counts: Vec<String> = sizes.iter().map(|(n, v)| format!("{n}:{v}")).collect();
    format!("512 + 65536 assignments agree; nodes {}; fitted c = {c:.2}, exponent {slope:.2}", counts.join(" "))
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) }
}

fn traced_maxima(c: &Circuit) -> Vec<Vec<f64>> {
    let mut best: Vec<Vec<f64>> = c.nodes().iter().map(|n| vec![0.0; n.children().count()]).collect();
    for x in 0..1u64 << c.num_vars() {
        let v = node_values(c, x);
        let out = v[c.root()];
        if out == 0.0 {
            continue;
        }
        let mut stack = vec![c.root()];
        while let Some(id) = stack.pop() {
            for (i, ch) in c.node(id).children().enumerate() {
                if v[ch] != 0.0 {
                    best[id][i] = best[id][i].max(out);
                    stack.push(ch);
                }
            }
        }
    }
    best
}

fn pruning_keeps_exactly_heavy_assignments(t: &mut Tally) -> String {
    let (mut edges, mut bitwise, mut removed, mut worst) = (0usize, 0usize, 0usize, 0.0f64);
    for i in 0..200 {
        let n = 1 + i % 10;
        let c = random_detdec_pc(n, seed_of(8, i), DepthProfile::DecisionTree);
        let tau = default_tau(n);
        let eb = edge_bounds(&c).unwrap();
        for (a, b) in eb.bounds.iter().flatten().zip(traced_maxima(&c).iter().flatten()) {
            edges += 1;
            bitwise += (a == b) as usize;
            worst = worst.max(relative_gap(*a, *b));
            t.ensure(relative_gap(*a, *b) <= 1e-12, || format!("circuit {i}: edge bound {a} vs traced {b}"));
        }
        let pruned = prune(&c, tau).unwrap();
        removed += pruned.removed_edges.len();
        let g = &pruned.circuit;
        for x in 0..1u64 << n {
            let (q, v) = (eval(&c, x), eval(g, x));
            t.ensure((q >= tau) == (v > 0.0), || format!("circuit {i} at {x}: Q = {q}, pruned {v}, tau {tau}"));
            if v > 0.0 {
                t.ensure(relative_gap(q, v) <= 1e-12, || format!("circuit {i} at {x}: value {v} vs {q}"));
            }
        }
        t.ensure(decomposable(g) && deterministic(g), || format!("circuit {i}: output lost structure"));
    }
    format!("200 circuits, {removed} edges removed; {bitwise}/{edges} edge bounds bitwise equal, max relative gap {worst:.1e}")
}

fn satisfiable_formula(n: usize, seed: u64) -> Cnf {
    (0..)
        .map(|k| random_cnf(n, 2 * n, 3, seed + 7919 * k))
        .find(|f| (0..1u64 << n).any(|x| cnf_holds(f.clauses(), x)))
        .unwrap()
}

fn pruned_approximation_is_weak_approximation(t: &mut Tally) -> String {
    let mut r = rng(91);
    let (mut nonzero, mut worst) = (0, 0.0f64);
    for i in 0..100 {
        let n = 6 + i % 5;
        let f = satisfiable_formula(n, seed_of(9, i));
        let models: Vec<u64> = (0..1u64 << n).filter(|&x| cnf_holds(f.clauses(), x)).collect();
        let mut p = vec![0.0; 1 << n];
        models.iter().for_each(|&x| p[x as usize] = 1.0 / models.len() as f64);
        let pd = DenseDistribution::new(n, p.clone()).unwrap();
        let exact = compile_decision_tree(&pd).unwrap();
        let f_circuit = exact.to_logical().unwrap();
        let noise = random_distribution(n, seed_of(10, i), r.gen_range(0.1..0.5));
        let mut s = r.gen_range(0.05..0.5);
        let (q, eps) = loop {
            let q = if i % 2 == 0 {
                perturb_weights(&exact, seed_of(11, i), s)
            } else {
                let m: Vec<f64> = p.iter().zip(noise.mass()).map(|(a, b)| (1.0 - s) * a + s * b).collect();
                compile_decision_tree(&DenseDistribution::new(n, m).unwrap()).unwrap()
            };
            let eps = half_l1(&p, &table(&q));
            if eps < 0.125 {
                break (q, eps);
            }
            s /= 2.0;
        };
        let w = approx_to_weak(&f_circuit, &q).unwrap();
        let err = (0..1u64 << n).filter(|&x| cnf_holds(f.clauses(), x) != (eval(&w.g, x) > 0.0)).count() as u64;
        t.ensure(err == w.report.error, || format!("instance {i}: library count {} vs {err}", w.report.error));
        let bound = 4.0 * eps * (1u64 << n) as f64;
        t.ensure((err as f64) < bound || (eps == 0.0 && err == 0), || {
            format!("instance {i}: {err} disagreements, bound {bound}")
        });
        nonzero += (err > 0) as usize;
        if bound > 0.0 {
            worst = worst.max(err as f64 / bound);
        }
    }
    format!("100 instances, {nonzero} with nonzero error, max error/bound = {worst:.3}")
}

fn strong_convexity_bounds_hold(t: &mut Tally) -> String {
    let mut r = rng(101);
    for i in 0..1000 {
        let n = 1 + i % 6;
        let p = random_distribution(n, seed_of(12, i), 1.0);
        let other = random_distribution(n, seed_of(13, i), 1.0);
        let a = r.gen_range(0.0..=1.0);
        let q: Vec<f64> = p.mass().iter().zip(other.mass()).map(|(x, y)| (1.0 - a) * x + a * y).collect();
        let pm = p.mass();
        let m = pm.iter().zip(&q).map(|(x, y)| x / y).fold(0.0, f64::max);
        let d = half_l1(pm, &q);
        let sum = |g: &dyn Fn(f64, f64) -> f64| pm.iter().zip(&q).map(|(x, y)| g(*x, *y)).sum::<f64>();
        let rows: [(Divergence, f64, f64); 5] = [
            (Divergence::Kl, sum(&|x, y| x * (x / y).ln()), 1.0 / m),
            (Divergence::PearsonChi2, sum(&|x, y| (x - y).powi(2) / y), 2.0),
            (Divergence::SquaredHellinger, sum(&|x, y| (x.sqrt() - y.sqrt()).powi(2)), m.powf(-1.5) / 2.0),
            (Divergence::ReverseKl, sum(&|x, y| y * (y / x).ln()), 1.0 / (m * m)),
            (Divergence::NeymanChi2, sum(&|x, y| (x - y).powi(2) / x), 2.0 / m.powi(3)),
        ];
        let qd = DenseDistribution::new(n, q.clone()).unwrap();
        for (div, value, k) in rows {
            t.ensure(d * d <= value / k + 1e-9, || format!("pair {i} {}: tvd {d}, D {value}, k {k}", div.name()));
            let lib = f_divergence(&p, &qd, &div).unwrap();
            t.ensure((lib - value).abs() <= 1e-9 * value.abs().max(1e-3), || {
                format!("pair {i} {}: library {lib} vs {value}", div.name())
            });
        }
        let klv = kl(pm, &q);
        t.ensure(d <= (klv / 2.0).sqrt() + 1e-12, || format!("pair {i}: Pinsker fails, tvd {d}, KL {klv}"));
    }
    "1000 pairs x 5 divergences, plus Pinsker".into()
}

fn reports_and_files_round_trip(t: &mut Tally) -> String {
    for name in EXPERIMENTS {
        let params = match name {
            "sauerhoff-support" => ExperimentParams { n: vec![3], ..ExperimentParams::default() },
            "sauerhoff-size" => ExperimentParams::default(),
            _ => ExperimentParams { trials: Some(20), vars: Some(6), ..ExperimentParams::default() },
        };
        let a = run_experiment(name, &params).unwrap();
        let b = run_experiment(name, &params).unwrap();
        t.ensure(a.to_json() == b.to_json(), || format!("{name}: reports differ"));
        t.ensure(a.plot.to_csv() == b.plot.to_csv(), || format!("{name}: plot data differs"));
        t.ensure(a.pass, || format!("{name}: experiment failed"));
    }
    let mut circuits: Vec<Circuit> = Vec::new();
    for i in 0..40 {
        let n = 1 + i % 12;
        circuits.push(random_detdec_pc(n, seed_of(14, i), DepthProfile::Factorized { decision_depth: 2 }));
        circuits.push(random_smooth_dec_pc(n, seed_of(15, i), 2));
    }
    circuits.push(build_p_n(3).unwrap());
    circuits.push(build_sauerhoff_dnnf(3).unwrap());
    let c = random_detdec_pc(8, 3, DepthProfile::DecisionTree);
    circuits.push(prune(&c, default_tau(8)).unwrap().circuit);
    for (i, c) in circuits.iter().enumerate() {
        let text = write_circuit(c);
        let back = parse_circuit(&text).unwrap();
        t.ensure(write_circuit(&back) == text, || format!("circuit {i}: text changes on re-serialization"));
        t.ensure(back.flavor() == c.flavor() && back.is_normalized() == c.is_normalized(), || {
            format!("circuit {i}: header lost")
        });
        let same = (0..1u64 << c.num_vars()).all(|x| eval(c, x).to_bits() == eval(&back, x).to_bits());
        t.ensure(same, || format!("circuit {i}: evaluation changed"));
    }
    for i in 0..20 {
        let d = random_distribution(1 + i % 10, seed_of(16, i), 0.5);
        let back = parse_distribution(&write_distribution(&d)).unwrap();
        t.ensure(back.mass() == d.mass(), || format!("distribution {i} changed"));
    }
    format!("11 experiments run twice, {} circuits and 20 tables round-tripped", circuits.len())
}

type Check = fn(&mut Tally) -> String;

fn main() {
    let checks: [(&str, Check); 11] = [
        ("inference agrees with enumeration", inference_matches_enumeration),
        ("relative approximation bounds total variation", relative_approximation_bounds_tvd),
        ("scaled family: small KL, constant relative error", scaled_family_separates_kl_from_relative_error),
        ("SAT gadget decision is correct under close approximations", sat_decision_is_always_right),
        ("total variation bounds marginal and MAP gaps", tvd_bounds_marginal_and_map_gaps),
        ("conditional counterexample equalities", conditional_counterexample_is_exact),
        ("Sauerhoff circuit: support and quadratic size", sauerhoff_support_and_size),
        ("pruning keeps exactly the heavy assignments", pruning_keeps_exactly_heavy_assignments),
        ("pruned approximation is a weak approximation", pruned_approximation_is_weak_approximation),
        ("strong convexity and Pinsker bounds", strong_convexity_bounds_hold),
        ("deterministic reports and lossless files", reports_and_files_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let mut tally = Tally::default();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut tally)));
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(detail) if tally.ok() => (true, detail),
            Ok(detail) => (false, format!("{detail}; {} of {} checks failed", tally.failures.len(), tally.checked)),
            Err(_) => (false, "panicked".into()),
        };
        println!("[{:>2}/11] {} {name}: {detail} ({secs:.1}s)", i + 1, if ok { "PASS" } else { "FAIL" });
        for f in tally.failures.iter().filter(|f| !f.is_empty()) {
            println!("        {f}");
        }
        failed += !ok as usize;
    }
    if failed > 0 {
        println!("{failed} of 11 acceptance checks failed");
        std::process::exit(1);
    }
    println!("all 11 acceptance checks passed");
}
