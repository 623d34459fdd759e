//! `qgt`: batch frontend for the qgt-core experiments.

mod config;
mod function;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use qgt_core::acceptance::{run_criterion, CriterionResult, CRITERIA};
use qgt_core::adversary::build_ggt_solution;
use qgt_core::boolfn::BooleanFunction;
use qgt_core::classical_gt::{binom_tv_kolmogorov, hypergeom_tv, lower_bound_sample_size, monte_carlo, Tester};
use qgt_core::instances::{make_block_oracle, IrrelevantMode, OverridePolicy, RelaxedOracle, Side};
use qgt_core::junta::{junta_test, JuntaConfig, JuntaMode};
use qgt_core::qcore::reflectionize;
use qgt_core::qggt::{QggtConfig, QggtPlan};
use qgt_core::{subset, symqft, Rational};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Parser, Debug)]
#[command(name = "qgt", version, about = "Exact experiments for gapped group testing and quantum junta testing", args_override_self = true)]
struct Cli {
    /// TOML file whose keys mirror the long flags (`command` selects the subcommand).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fourier spectrum, influences and junta distance of a Boolean function.
    Fourier(FourierArgs),
    /// Monte-Carlo run of a classical group tester.
    GgtClassical(ClassicalArgs),
    /// Exact hypergeometric (and optionally binomial) distances.
    Distances(DistanceArgs),
    /// Symmetric-group Fourier transform checks.
    Qft(QftArgs),
    /// Dual-adversary solution of the group-testing problem.
    Adversary(AdversaryArgs),
    /// Exact run of the quantum gapped group tester.
    Qggt(QggtArgs),
    /// Quantum junta tester verdict.
    Junta(JuntaArgs),
    /// The acceptance battery.
    AcceptanceSuite(SuiteArgs),
}

#[derive(Args, Debug, Serialize)]
struct FunctionSource {
    /// Truth-table file (`n=<n>` line, then the bit string).
    #[arg(long, conflicts_with = "instance")]
    truth_table: Option<PathBuf>,
    /// Function descriptor, e.g. `parity:4:1,2` or `junta:8:3` (see README).
    #[arg(long)]
    instance: Option<String>,
}

impl FunctionSource {
    fn load(&self, seed: u64) -> anyhow::Result<BooleanFunction> {
        match (&self.truth_table, &self.instance) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(BooleanFunction::parse_table(&text)?)
            }
            (None, Some(desc)) => function::parse(desc, seed),
            (None, None) => bail!("give --truth-table or --instance"),
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct FourierArgs {
    #[command(flatten)]
    source: FunctionSource,
    /// Also report the exact distance to the nearest k-junta.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct ClassicalArgs {
    #[arg(long, value_parser = parse_enum::<Tester>, default_value = "sampling")]
    tester: Tester,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, value_parser = parse_enum::<Side>, default_value = "large")]
    side: Side,
    #[arg(long, value_parser = parse_enum::<OverridePolicy>, default_value = "seeded-random")]
    policy: OverridePolicy,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct DistanceArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    d: u64,
    /// Sample size; defaults to ⌊min(n/4, n(k+d)/d²)⌋.
    #[arg(long)]
    m: Option<u64>,
    /// Also compare Bin(k, p) with Bin(k+d, p).
    #[arg(long)]
    p: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct QftArgs {
    #[arg(long)]
    n: usize,
    /// Fail (exit 1) unless every residual is below 1e-9.
    #[arg(long)]
    check: bool,
    /// Emit the transform matrix (CSV layout with --format csv).
    #[arg(long)]
    matrix: bool,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct AdversaryArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct QggtArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, value_parser = parse_enum::<Side>, default_value = "small")]
    side: Side,
    /// Hidden set as comma-separated elements; defaults to the first |A| elements.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long, value_parser = parse_enum::<IrrelevantMode>, default_value = "random-reflection")]
    mode: IrrelevantMode,
    #[arg(long, value_parser = parse_enum::<OverridePolicy>, default_value = "seeded-random")]
    policy: OverridePolicy,
    /// Workspace dimension for random-unitary blocks.
    #[arg(long, default_value_t = 2)]
    wdim: usize,
    #[arg(long, default_value_t = 8.0)]
    c1: f64,
    #[arg(long, default_value_t = 64.0)]
    c: f64,
    /// Phase-estimation ancilla bits; derived from C and W if unset.
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct JuntaArgs {
    #[command(flatten)]
    source: FunctionSource,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, value_parser = parse_enum::<JuntaMode>, default_value = "ideal")]
    mode: JuntaMode,
    /// Majority copies in compressed-circuit mode; ⌈10 ln(k/ε)⌉ if unset.
    #[arg(long)]
    majority_copies: Option<usize>,
    /// Second-kind sampling trials when exact enumeration is too large.
    #[arg(long, default_value_t = qgt_core::junta::DEFAULT_SECOND_KIND_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
struct SuiteArgs {
    /// Comma-separated criterion ids; all twelve if unset.
    #[arg(long)]
    only: Option<String>,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_elements(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.trim().parse::<usize>().map_err(|e| anyhow!("bad element `{p}`: {e}"))).collect()
}

/// A command's output and whether its checks passed.
struct Outcome {
    seed: Option<u64>,
    params: Value,
    result: Value,
    csv: Option<String>,
    ok: bool,
}

impl Outcome {
    fn new(params: &impl Serialize, seed: Option<u64>, result: Value) -> anyhow::Result<Self> {
        Ok(Self { seed, params: serde_json::to_value(params)?, result, csv: None, ok: true })
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Fourier(_) => "fourier",
        Command::GgtClassical(_) => "ggt-classical",
        Command::Distances(_) => "distances",
        Command::Qft(_) => "qft",
        Command::Adversary(_) => "adversary",
        Command::Qggt(_) => "qggt",
        Command::Junta(_) => "junta",
        Command::AcceptanceSuite(_) => "acceptance-suite",
    }
}

fn fraction(r: &Rational) -> String {
    r.to_string()
}

fn to_f64(r: &Rational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
}

fn fourier(a: &FourierArgs) -> anyhow::Result<Outcome> {
    let f = a.source.load(a.seed)?;
    let spec = f.fourier::<f64>();
    let coeffs: Vec<Value> = spec
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(s, c)| json!({ "set": subset::elements(s as u64), "coeff": c }))
        .collect();
    let mut result = json!({
        "n": f.n(),
        "coefficients": coeffs,
        "variable_influences": spec.variable_influences(),
        "total_influence": spec.variable_influences().iter().sum::<f64>(),
        "relevant_variables": subset::elements(f.relevant_variables()),
    });
    if let Some(k) = a.k {
        let dist = f.distance_to_k_junta(k)?;
        result["k"] = json!(k);
        result["distance_to_k_junta"] = json!(fraction(&dist));
        result["distance_to_k_junta_float"] = json!(to_f64(&dist));
    }
    Outcome::new(a, Some(a.seed), result)
}

fn classical(a: &ClassicalArgs) -> anyhow::Result<Outcome> {
    let s = monte_carlo(a.tester, a.n, a.k, a.d, a.side, a.policy, a.trials, a.seed)?;
    let result = json!({
        "tester": a.tester,
        "n": a.n, "k": a.k, "d": a.d,
        "side": a.side,
        "policy": a.policy,
        "seeds": { "base": a.seed, "trials": a.trials },
        "errors": s.errors,
        "error_rate": s.error_rate,
        "queries": { "mean": s.mean_queries, "max": s.max_queries },
    });
    Outcome::new(a, Some(a.seed), result)
}

fn distances(a: &DistanceArgs) -> anyhow::Result<Outcome> {
    let m = a.m.unwrap_or_else(|| lower_bound_sample_size(a.n, a.k, a.d));
    let tv = hypergeom_tv(a.n, a.k, a.d, m)?;
    let mut result = json!({ "n": a.n, "k": a.k, "d": a.d, "m": m, "tv": fraction(&tv), "tv_float": to_f64(&tv) });
    if let Some(p) = a.p {
        let (btv, kol) = binom_tv_kolmogorov(a.k as usize, a.d as usize, p)?;
        result["binomial"] = json!({ "p": p, "tv": btv, "kolmogorov": kol });
    }
    Outcome::new(a, None, result)
}

fn qft(a: &QftArgs, format: Format) -> anyhow::Result<Outcome> {
    let n = a.n;
    let tallies: Vec<Value> = (0..=n / 2)
        .map(|t| {
            let count = symqft::valid_strings(n, t).len() as u128;
            let expected = qgt_core::scalar::binom_u128(n as u64, t as u64) - if t > 0 { qgt_core::scalar::binom_u128(n as u64, t as u64 - 1) } else { 0 };
            json!({ "t": t, "strings": count, "expected": expected, "multiplicity": n - 2 * t + 1 })
        })
        .collect();
    let unit = symqft::unitarity_residual(n)?;
    let branching = if n >= 2 { Some(symqft::branching_residual(n)?) } else { None };
    let specht = if a.check && n <= 8 { Some(symqft::specht_residual(n)?) } else { None };
    let ok = !a.check || (unit < 1e-9 && branching.is_none_or(|b| b < 1e-9) && specht.is_none_or(|s| s < 1e-9));
    let mut result = json!({
        "n": n,
        "dimension_tallies": tallies,
        "unitarity_residual": unit,
        "branching_residual": branching,
        "specht_residual": specht,
        "check_passed": if a.check { Some(ok) } else { None },
    });
    let mut csv = None;
    if a.matrix {
        let f = symqft::qft_matrix::<f64>(n)?;
        let order = symqft::SymQft::<f64>::new(n)?.order().to_vec();
        match format {
            Format::Csv => {
                let mut s = String::from("subset,t,l,x,value\n");
                for (c, g) in order.iter().enumerate() {
                    for r in 0..f.nrows() {
                        let v = f[(r, c)];
                        if v != 0.0 {
                            s.push_str(&format!("{r},{},{},{},{v:e}\n", g.t, g.l, g.x));
                        }
                    }
                }
                csv = Some(s);
            }
            Format::Json => {
                let cols: Vec<Value> = order
                    .iter()
                    .enumerate()
                    .map(|(c, g)| json!({ "t": g.t, "l": g.l, "x": g.x, "column": f.column(c).iter().copied().collect::<Vec<f64>>() }))
                    .collect();
                result["matrix"] = json!(cols);
            }
        }
    }
    Ok(Outcome { csv, ok, ..Outcome::new(a, None, result)? })
}

fn adversary(a: &AdversaryArgs) -> anyhow::Result<Outcome> {
    let sol = build_ggt_solution::<f64>(a.n, a.k, a.d)?;
    let min_eig = if a.n <= 8 { Some(sol.to_generic()?.min_eigenvalue()) } else { None };
    let result = json!({
        "n": a.n, "k": a.k, "d": a.d,
        "W": sol.objective,
        "feasibility_residual": sol.feasibility_residual(),
        "min_eigenvalue": min_eig,
        "alpha": sol.alpha,
        "beta": sol.beta,
    });
    Outcome::new(a, None, result)
}

fn qggt(a: &QggtArgs) -> anyhow::Result<Outcome> {
    let size = match a.side {
        Side::Small => a.k,
        Side::Large => a.k + a.d,
    };
    let hidden = match &a.hidden {
        Some(h) => {
            let elems = parse_elements(h)?;
            if elems.iter().any(|&j| j == 0 || j > a.n) {
                bail!("hidden elements must lie in 1..={}", a.n);
            }
            subset::from_elements(&elems)
        }
        None => subset::full(size.min(a.n)),
    };
    let relaxed = RelaxedOracle::new(a.n, a.k, a.d, a.side, hidden, a.policy, a.seed)?;
    let oracle = make_block_oracle::<f64>(&relaxed, a.mode, a.seed, a.wdim)?;
    let oracle = if oracle.is_reflection() { oracle } else { reflectionize(&oracle) };
    let cfg = QggtConfig { c1: a.c1, c: a.c, bits: a.bits, ..QggtConfig::default() };
    let out = QggtPlan::<f64>::new(a.n, a.k, a.d, &cfg)?.run(&oracle)?;
    let result = json!({
        "n": a.n, "k": a.k, "d": a.d,
        "side": a.side,
        "hidden": subset::elements(hidden),
        "mode": a.mode,
        "C1": a.c1, "C": a.c,
        "a": out.bits,
        "delta": out.delta,
        "W": out.objective,
        "acceptance_probability": out.acceptance_probability,
        "decision": if out.accept { "small" } else { "large" },
        "queries": out.queries,
    });
    Outcome::new(a, Some(a.seed), result)
}

fn junta(a: &JuntaArgs) -> anyhow::Result<Outcome> {
    let f = a.source.load(a.seed)?;
    let cfg = JuntaConfig { seed: a.seed, majority_copies: a.majority_copies, second_kind_trials: a.trials, ..JuntaConfig::default() };
    let v = junta_test(&f, a.k, a.eps, a.mode, &cfg)?;
    let mut result = serde_json::to_value(&v)?;
    result["n"] = json!(f.n());
    Outcome::new(a, Some(a.seed), result)
}

fn suite(a: &SuiteArgs, format: Format) -> anyhow::Result<Outcome> {
    let ids: Vec<u32> = match &a.only {
        Some(s) => parse_elements(s)?.into_iter().map(|x| x as u32).collect(),
        None => CRITERIA.iter().map(|c| c.0).collect(),
    };
    let mut results: Vec<CriterionResult> = Vec::new();
    for id in ids {
        let r = run_criterion(id)?;
        eprintln!("{}", r.line());
        results.push(r);
    }
    let ok = results.iter().all(|r| r.pass);
    let csv = (format == Format::Csv).then(|| {
        let mut s = String::from("id,name,pass,seconds,detail\n");
        for r in &results {
            s.push_str(&format!("{},{},{},{:.3},\"{}\"\n", r.id, r.name, r.pass, r.seconds, r.detail.replace('"', "'")));
        }
        s
    });
    // Timings vary between runs; they stay out of the JSON so output is reproducible.
    let table: Vec<Value> = results.iter().map(|r| json!({ "id": r.id, "name": r.name, "pass": r.pass, "detail": r.detail })).collect();
    let result = json!({ "passed": results.iter().filter(|r| r.pass).count(), "total": results.len(), "criteria": table });
    Ok(Outcome { csv, ok, ..Outcome::new(a, None, result)? })
}

fn run(cli: &Cli) -> anyhow::Result<(String, bool)> {
    let format = cli.format;
    let out = match &cli.command {
        Command::Fourier(a) => fourier(a)?,
        Command::GgtClassical(a) => classical(a)?,
        Command::Distances(a) => distances(a)?,
        Command::Qft(a) => qft(a, format)?,
        Command::Adversary(a) => adversary(a)?,
        Command::Qggt(a) => qggt(a)?,
        Command::Junta(a) => junta(a)?,
        Command::AcceptanceSuite(a) => suite(a, format)?,
    };
    let text = match (format, out.csv) {
        (Format::Csv, Some(csv)) => csv,
        (Format::Csv, None) => bail!("csv output is only available for `qft --matrix` and `acceptance-suite`"),
        (Format::Json, _) => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": command_name(&cli.command),
                "seed": out.seed,
                "params": out.params,
                "result": out.result,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    Ok((text, out.ok))
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok((text, ok)) => {
            let written = match &cli.output {
                Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display())),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(Into::into),
            };
            if let Err(e) = written {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
