use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn pctk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pctk")).args(args).output().expect("spawn pctk")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

// x1 ? (0.9 x2 + 0.1 ¬x2) : (0.2 x2 + 0.8 ¬x2), root weights 0.6 / 0.4
const TWO_VARS: &str = "pc 2
L 0 1
L 1 -1
L 2 2
L 3 -2
S 4 2 2 0.9 3 0.1
S 5 2 2 0.2 3 0.8
P 6 2 0 4
P 7 2 1 5
S 8 2 6 0.6 7 0.4
R 8
";

fn write_two_vars(dir: &TempDir) -> String {
    let p = path(dir, "two.pc");
    fs::write(&p, TWO_VARS).unwrap();
    p
}

#[test]
fn inference_commands_report_values() {
    let dir = TempDir::new().unwrap();
    let c = write_two_vars(&dir);

    let v = pctk(&["validate", &c]);
    assert!(v.status.success());
    assert_eq!(json(&v)["nodes"], 9);

    let m = json(&pctk(&["marginal", &c, "x1=1"]));
    assert!((m["value"].as_f64().unwrap() - 0.6).abs() < 1e-12);

    let map = json(&pctk(&["map", &c]));
    assert!((map["value"].as_f64().unwrap() - 0.54).abs() < 1e-12);
    assert_eq!(map["argmax"], "x1=1,x2=1");

    let ev = json(&pctk(&["map", &c, "x1=0"]));
    assert_eq!(ev["argmax"], "x1=0,x2=0");

    let n = json(&pctk(&["count", &c]));
    assert_eq!(n["count"], "4");

    let chk = pctk(&["check", &c, "--require-all"]);
    assert!(chk.status.success(), "{}", String::from_utf8_lossy(&chk.stderr));
}

#[test]
fn exit_codes_separate_usage_input_and_assertion_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(pctk(&["no-such-command"]).status.code(), Some(2));

    let bad = path(&dir, "bad.pc");
    fs::write(&bad, "pc 1\nL 0 1\nS 1 1 0 0.5\nR 1\n").unwrap();
    let out = pctk(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    assert_eq!(pctk(&["validate", &path(&dir, "missing.pc")]).status.code(), Some(2));

    // x1 ∧ x1 breaks decomposability
    let nd = path(&dir, "nd.nnf");
    fs::write(&nd, "nnf 1\nL 0 1\nP 1 2 0 0\nR 1\n").unwrap();
    assert_eq!(pctk(&["check", &nd, "--require-all"]).status.code(), Some(1));
}

#[test]
fn experiment_reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let run = |tag: &str| {
        let (j, c) = (path(&dir, &format!("{tag}.json")), path(&dir, &format!("{tag}.csv")));
        let out = pctk(&["experiment", "rel-to-tvd", "--trials", "30", "--vars", "5", "--seed", "7", "--out", &j, "--csv", &c]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (fs::read(j).unwrap(), fs::read(c).unwrap())
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let report: Value = serde_json::from_slice(&a.0).unwrap();
    assert_eq!(report["experiment"], "rel-to-tvd");
    assert_eq!(report["pass"], true);

    let other = pctk(&["experiment", "rel-to-tvd", "--trials", "30", "--vars", "5", "--seed", "8"]);
    assert_ne!(other.stdout, a.0);
}

#[test]
fn sauerhoff_build_writes_parseable_circuits() {
    let dir = TempDir::new().unwrap();
    let (pc, dnnf) = (path(&dir, "p3.pc"), path(&dir, "d3.nnf"));
    let out = pctk(&["build", "sauerhoff", "--n", "3", "--out", &pc, "--dnnf-out", &dnnf]);
    assert!(out.status.success());
    assert_eq!(json(&out)["dnnf_nodes"], 157);
    assert!(pctk(&["validate", &dnnf]).status.success());
    assert!(pctk(&["validate", &pc]).status.success());
    // the support is not a deterministic circuit, so counting is refused
    assert_eq!(pctk(&["count", &pc]).status.code(), Some(2));
}

#[test]
fn gadget_and_counterexamples_build() {
    let dir = TempDir::new().unwrap();
    let cnf = path(&dir, "f.cnf");
    fs::write(&cnf, "p cnf 3 2\n1 2 0\n-1 3 0\n").unwrap();
    let (dist, circ) = (path(&dir, "g.dist"), path(&dir, "g.pc"));
    let g = pctk(&["build", "gadget", "--cnf", &cnf, "--out", &dist, "--circuit-out", &circ]);
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stderr));
    assert_eq!(json(&g)["model_count_f"], "4");
    // 4 models with y = 1 plus the all-ones fallback
    assert_eq!(json(&pctk(&["count", &circ]))["count"], "5");

    let (p, q) = (path(&dir, "p.dist"), path(&dir, "q.dist"));
    let s = pctk(&["build", "counterexample", "--family", "scaled", "--K", "10", "--delta", "0.01", "--out-p", &p, "--out-q", &q]);
    assert!(s.status.success());
    let s = json(&s);
    assert_eq!(s["max_ratio"], "10");
    let (kl, closed) = (s["kl"].as_f64().unwrap(), s["kl_closed_form"].as_f64().unwrap());
    assert!((kl - closed).abs() < 1e-9);
    let d = json(&pctk(&["divergence", "--measure", "kl", "--p", &p, "--q", &q]));
    assert!((d["value"].as_f64().unwrap() - kl).abs() < 1e-12);

    let c = json(&pctk(&["build", "counterexample", "--family", "conditional"]));
    assert_eq!(c["tvd"], "1/40");
    assert_eq!(c["conditional_gap"], "1/2");

    let dj = json(&pctk(&["build", "counterexample", "--family", "disjoint", "--out-p", &p, "--out-q", &q]));
    assert_eq!(dj["tvd"], 1.0);
    assert_eq!(dj["map_gap"], 0.0);
    let t = json(&pctk(&["divergence", "--p", &p, "--q", &q]));
    assert_eq!(t["value"], 1.0);
    assert_eq!(json(&pctk(&["divergence", "--measure", "kl", "--p", &p, "--q", &q]))["value"], "inf");
}

#[test]
fn prune_then_weak_approx() {
    let dir = TempDir::new().unwrap();
    let c = write_two_vars(&dir);
    let (out, report) = (path(&dir, "pruned.pc"), path(&dir, "report.json"));
    let p = pctk(&["prune", "--in", &c, "--tau", "0.1", "--out", &out, "--report", &report]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("pc 2 unnormalized"));
    // assignment masses are 0.54, 0.06, 0.08, 0.32
    assert_eq!(json(&pctk(&["count", &out]))["count"], "2");
    let r: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!((r["surviving_mass"].as_f64().unwrap() - 0.86).abs() < 1e-12);

    // f = x1; q puts 0.95 on x1 = 1, spread evenly, so tvd to uniform over f is 0.05
    let f = path(&dir, "f.nnf");
    fs::write(&f, "nnf 2\nL 0 1\nL 1 2\nL 2 -2\nS 3 2 1 2\nP 4 2 0 3\nR 4\n").unwrap();
    let q = path(&dir, "q.pc");
    fs::write(&q, TWO_VARS.replace("0.9 3 0.1", "0.5 3 0.5").replace("0.2 3 0.8", "0.5 3 0.5").replace("0.6 7 0.4", "0.95 7 0.05")).unwrap();
    let w = pctk(&["weak-approx", "--f", &f, "--q", &q, "--out", &path(&dir, "g.nnf")]);
    assert!(w.status.success(), "{}", String::from_utf8_lossy(&w.stderr));
    assert!(Path::new(&path(&dir, "g.nnf")).exists());
    let w = json(&w);
    assert_eq!(w["holds"], true);
    assert_eq!(w["num_vars"], 2);

    let strict = pctk(&["weak-approx", "--f", &f, "--g", &f, "--epsilon", "0"]);
    assert_eq!(json(&strict)["error"], 0);
}
