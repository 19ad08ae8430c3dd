use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pcircuits::constructions::counterexample::{
    build_conditional_counterexample, build_disjoint_map_counterexample, build_scaled_family,
    conditional_base, parse_decimal, prefix_event, scaled_base,
};
use pcircuits::constructions::gadget::build_sat_gadget;
use pcircuits::constructions::sauerhoff::SauerhoffInstance;
use pcircuits::divergence::{f_divergence, tvd_report, Divergence};
use pcircuits::experiment::{run_experiment, ExperimentParams, EXPERIMENTS};
use pcircuits::format::{parse_circuit, parse_dimacs, parse_distribution, write_circuit, write_distribution};
use pcircuits::inference::{map_query, marginal, model_count};
use pcircuits::oracle::BUDGET_ENV;
use pcircuits::pruning::{approx_to_weak, default_tau, prune, weak_approx_error};
use pcircuits::{Assignment, Circuit, DenseDistribution};

/// Probabilistic-circuit toolkit: inference, divergences, constructions,
/// pruning and oracle-checked experiments.
#[derive(Parser)]
#[command(name = "pctk", version)]
struct Cli {
    /// Largest variable count the brute-force oracle will enumerate
    /// (overrides PC_ORACLE_BUDGET).
    #[arg(long, global = true)]
    budget_vars: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a circuit file.
    Validate { file: PathBuf },
    /// Report smoothness, decomposability and determinism.
    Check {
        file: PathBuf,
        /// Variable limit for the exhaustive determinism check.
        #[arg(long, default_value_t = pcircuits::circuit::DEFAULT_ENUMERATION_LIMIT)]
        limit: usize,
        /// Exit with status 1 unless all three properties hold.
        #[arg(long)]
        require_all: bool,
    },
    /// Marginal probability of a partial assignment such as `x1=1,x3=0`.
    Marginal {
        file: PathBuf,
        #[arg(default_value = "")]
        assignment: String,
    },
    /// Most probable completion of the evidence.
    Map {
        file: PathBuf,
        #[arg(default_value = "")]
        evidence: String,
    },
    /// Model count of a circuit's support.
    Count {
        file: PathBuf,
        /// Refuse circuits whose determinism cannot be verified.
        #[arg(long)]
        strict: bool,
    },
    /// Distance between two distribution files.
    Divergence {
        /// tvd, kl, chi2, hellinger2, reverse-kl, vincze-le-cam, js,
        /// neyman-chi2, sason:<s> or alpha:<a>
        #[arg(long, default_value = "tvd")]
        measure: String,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
    },
    /// Build one of the explicit constructions.
    #[command(subcommand)]
    Build(BuildCommand),
    /// Remove circuit edges whose bound falls below a threshold.
    Prune {
        #[arg(long = "in")]
        input: PathBuf,
        /// `auto` means 1/2^(n+1).
        #[arg(long, default_value = "auto")]
        tau: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Rescale the output to total mass 1.
        #[arg(long)]
        renormalize: bool,
    },
    /// Weak approximation error between two supports, or the full pipeline
    /// from an approximating PC.
    WeakApprox(WeakApproxArgs),
    /// Run a named experiment and write its report.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum BuildCommand {
    /// The Sauerhoff DNNF and P_n.
    Sauerhoff {
        #[arg(long)]
        n: usize,
        /// Where to write P_n.
        #[arg(long)]
        out: PathBuf,
        /// Where to write the logical DNNF.
        #[arg(long)]
        dnnf_out: Option<PathBuf>,
    },
    /// Uniform distribution over the models of the SAT gadget of a CNF.
    Gadget {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write a decision-tree PC for the distribution.
        #[arg(long)]
        circuit_out: Option<PathBuf>,
    },
    /// A pair of distributions from one of the counterexample families.
    Counterexample(CounterexampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Scaled,
    Conditional,
    Disjoint,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 4)]
    vars: usize,
    /// Scale factor of the scaled family.
    #[arg(long = "K", default_value = "10")]
    big_k: String,
    #[arg(long, default_value = "0.01")]
    delta: String,
    /// Gap multiplier of the conditional family.
    #[arg(long, default_value = "10")]
    k: String,
    #[arg(long, default_value = "0.05")]
    eps: String,
    /// Probability of the evidence `x1 = 1` in the conditional family.
    #[arg(long, default_value = "0.05")]
    p_e: String,
    /// Base distribution for the disjoint family.
    #[arg(long)]
    p: Option<PathBuf>,
    #[arg(long)]
    out_p: Option<PathBuf>,
    #[arg(long)]
    out_q: Option<PathBuf>,
}

#[derive(Args)]
struct WeakApproxArgs {
    /// Target function (logical circuit).
    #[arg(long)]
    f: PathBuf,
    /// Candidate approximation (logical circuit).
    #[arg(long, conflicts_with = "q", requires = "epsilon")]
    g: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Deterministic PC approximating the uniform distribution over `f`.
    #[arg(long)]
    q: Option<PathBuf>,
    /// Where to write the derived `g` in pipeline mode.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(EXPERIMENTS))]
    name: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    vars: Option<usize>,
    /// Matrix size(s) for the Sauerhoff experiments; repeatable.
    #[arg(long)]
    n: Vec<usize>,
    /// DIMACS formula for the SAT gadget experiment.
    #[arg(long)]
    cnf: Option<PathBuf>,
    /// Report destination; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// A run that completed but whose assertions failed.
#[derive(Debug)]
struct AssertionFailed(String);

impl std::fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for AssertionFailed {}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    parse_circuit(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_distribution(path: &Path) -> Result<DenseDistribution> {
    parse_distribution(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn print(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("json"));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { file } => {
            let c = load_circuit(&file)?;
            let (nodes, edges) = c.size();
            print(json!({
                "valid": true,
                "flavor": c.flavor(),
                "num_vars": c.num_vars(),
                "nodes": nodes,
                "edges": edges,
                "normalized": c.is_normalized(),
            }));
        }
        Command::Check { file, limit, require_all } => {
            let c = load_circuit(&file)?;
            let r = c.properties(limit);
            print(json!(r));
            if require_all && !r.all_hold() {
                bail!(AssertionFailed("not all structural properties hold".into()));
            }
        }
        Command::Marginal { file, assignment } => {
            let c = load_circuit(&file)?;
            let y = Assignment::parse(&assignment, c.num_vars())?;
            print(json!({ "assignment": y, "value": marginal(&c, &y)? }));
        }
        Command::Map { file, evidence } => {
            let c = load_circuit(&file)?;
            let e = Assignment::parse(&evidence, c.num_vars())?;
            let r = map_query(&c, &e)?;
            print(json!({ "evidence": e, "value": r.value, "argmax": r.argmax }));
        }
        Command::Count { file, strict } => {
            let c = load_circuit(&file)?;
            print(json!({ "count": model_count(&c, strict)?.to_string() }));
        }
        Command::Divergence { measure, p, q } => {
            let (p, q) = (load_distribution(&p)?, load_distribution(&q)?);
            if measure == "tvd" {
                let r = tvd_report(&p, &q)?;
                print(json!({ "measure": "tvd", "value": r.half_sum, "max_event": r.max_event }));
            } else {
                let d = Divergence::from_name(&measure)?;
                let v = f_divergence(&p, &q, &d)?;
                // JSON has no infinity
                let shown = if v.is_finite() { json!(v) } else { json!("inf") };
                print(json!({ "measure": d.name(), "value": shown }));
            }
        }
        Command::Build(b) => build(b)?,
        Command::Prune { input, tau, out, report, renormalize } => {
            let c = load_circuit(&input)?;
            let tau = if tau == "auto" {
                default_tau(c.num_vars())
            } else {
                tau.parse().with_context(|| format!("bad threshold `{tau}`"))?
            };
            let p = prune(&c, tau)?;
            let mass = p.surviving_mass()?;
            let summary = json!({
                "tau": tau,
                "rounds": p.rounds,
                "removed_edges": p.removed_edges,
                "surviving_mass": mass,
                "nodes": p.circuit.size().0,
                "edges": p.circuit.size().1,
            });
            let out_circuit = if renormalize { p.renormalize()? } else { p.circuit.clone() };
            match out {
                Some(path) => write(&path, &write_circuit(&out_circuit))?,
                None => print!("{}", write_circuit(&out_circuit)),
            }
            match report {
                Some(path) => write(&path, &(serde_json::to_string_pretty(&summary)? + "\n"))?,
                None => eprintln!("{}", serde_json::to_string_pretty(&summary)?),
            }
        }
        Command::WeakApprox(a) => weak_approx(a)?,
        Command::Experiment(a) => experiment(a)?,
    }
    Ok(())
}

fn build(cmd: BuildCommand) -> Result<()> {
    match cmd {
        BuildCommand::Sauerhoff { n, out, dnnf_out } => {
            let inst = SauerhoffInstance::new(n)?;
            write(&out, &write_circuit(&inst.pc))?;
            if let Some(path) = dnnf_out {
                write(&path, &write_circuit(&inst.dnnf))?;
            }
            print(json!({
                "n": n,
                "dnnf_nodes": inst.dnnf.size().0,
                "dnnf_edges": inst.dnnf.size().1,
                "pc_nodes": inst.pc.size().0,
                "pc_edges": inst.pc.size().1,
            }));
        }
        BuildCommand::Gadget { cnf, out, circuit_out } => {
            let f = parse_dimacs(&read(&cnf)?)?;
            let g = build_sat_gadget(&f)?;
            write(&out, &write_distribution(&g.p))?;
            if let Some(path) = circuit_out {
                write(&path, &write_circuit(&g.compile()?))?;
            }
            print(json!({
                "vars": g.base.num_vars(),
                "y_var": g.y_var(),
                "model_count_f": g.mc_f.to_string(),
                "p_y1": g.p_y1.to_string(),
            }));
        }
        BuildCommand::Counterexample(a) => counterexample(a)?,
    }
    Ok(())
}

fn emit_pair(a: &CounterexampleArgs, p: &DenseDistribution, q: &DenseDistribution) -> Result<()> {
    if let Some(path) = &a.out_p {
        write(path, &write_distribution(p))?;
    }
    if let Some(path) = &a.out_q {
        write(path, &write_distribution(q))?;
    }
    Ok(())
}

fn counterexample(a: CounterexampleArgs) -> Result<()> {
    match a.family {
        Family::Scaled => {
            let (k, delta) = (parse_decimal(&a.big_k)?, parse_decimal(&a.delta)?);
            let p = scaled_base(a.vars, &delta)?;
            let fam = build_scaled_family(&p, &prefix_event(&p, &delta)?, &k)?;
            let (pf, qf) = (fam.p.to_f64(), fam.q.to_f64());
            let kl = Divergence::Kl;
            print(json!({
                "family": "scaled",
                "K": fam.k.to_string(),
                "delta": fam.delta.to_string(),
                "lambda": fam.lambda.to_string(),
                "event": fam.event,
                "max_ratio": fam.max_ratio().to_string(),
                "kl": f_divergence(&pf, &qf, &kl)?,
                "kl_closed_form": fam.closed_form(&kl),
            }));
            emit_pair(&a, &pf, &qf)?;
        }
        Family::Conditional => {
            let (k, eps, p_e) = (parse_decimal(&a.k)?, parse_decimal(&a.eps)?, parse_decimal(&a.p_e)?);
            let (p, e) = conditional_base(a.vars, &p_e)?;
            let fam = build_conditional_counterexample(&p, &e, &k, &eps)?;
            print(json!({
                "family": "conditional",
                "evidence": e,
                "y_star": fam.y_star,
                "y_one": fam.y_one,
                "tvd": fam.tvd().to_string(),
                "conditional_gap": fam.conditional_gap().to_string(),
            }));
            emit_pair(&a, &fam.p.to_f64(), &fam.q.to_f64())?;
        }
        Family::Disjoint => {
            let p = match &a.p {
                Some(path) => load_distribution(path)?,
                None => DenseDistribution::new(2, vec![0.5, 0.0, 0.5, 0.0])?,
            };
            let fam = build_disjoint_map_counterexample(&p)?;
            let r = tvd_report(&fam.p, &fam.q)?;
            let max = |d: &DenseDistribution| d.mass().iter().cloned().fold(0.0, f64::max);
            print(json!({
                "family": "disjoint",
                "tvd": r.half_sum,
                "map_gap": (max(&fam.p) - max(&fam.q)).abs(),
            }));
            emit_pair(&a, &fam.p, &fam.q)?;
        }
    }
    Ok(())
}

fn weak_approx(a: WeakApproxArgs) -> Result<()> {
    let f = load_circuit(&a.f)?;
    if let Some(q) = &a.q {
        let q = load_circuit(q)?;
        let w = approx_to_weak(&f, &q)?;
        if let Some(path) = &a.out {
            write(path, &write_circuit(&w.g))?;
        }
        print(json!(w.report));
        if !w.report.holds {
            bail!(AssertionFailed(format!(
                "error {} is not below 4 eps 2^n = {}",
                w.report.error, w.report.bound
            )));
        }
        return Ok(());
    }
    let (Some(g), Some(eps)) = (&a.g, a.epsilon) else {
        bail!("pass either --q, or --g with --epsilon");
    };
    let g = load_circuit(g)?;
    let error = weak_approx_error(&f, &g)?;
    let bound = eps * 2f64.powi(f.num_vars() as i32);
    let holds = error as f64 <= bound;
    print(json!({ "error": error, "bound": bound, "epsilon": eps, "holds": holds }));
    if !holds {
        bail!(AssertionFailed(format!("error {error} exceeds eps 2^n = {bound}")));
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cnf = a.cnf.as_deref().map(|p| parse_dimacs(&read(p)?).map_err(anyhow::Error::from)).transpose()?;
    let params = ExperimentParams {
        seed: a.seed,
        trials: a.trials,
        vars: a.vars,
        n: a.n,
        cnf_name: a.cnf.as_ref().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()),
        cnf,
    };
    let report = run_experiment(&a.name, &params)?;
    match &a.out {
        Some(path) => write(path, &report.to_json())?,
        None => print!("{}", report.to_json()),
    }
    if let Some(path) = &a.csv {
        write(path, &report.plot.to_csv())?;
    }
    let failed: Vec<_> = report.failed_checks().collect();
    for (instance, c) in failed.iter().take(10) {
        eprintln!("instance {instance}: {} failed ({} {} {})", c.name, c.lhs, c.relation, c.rhs);
    }
    eprintln!(
        "{}: {} ({} instances, {:.2?})",
        a.name,
        if report.pass { "pass" } else { "FAIL" },
        report.records.len(),
        report.elapsed
    );
    if !report.pass {
        bail!(AssertionFailed(format!("{} checks failed", failed.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(v) = cli.budget_vars {
        // single-threaded at this point
        std::env::set_var(BUDGET_ENV, v.to_string());
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<AssertionFailed>() => {
            eprintln!("assertion failed: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
