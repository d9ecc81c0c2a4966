//! Command handlers behind the `stardmp` binary.
//!
//! Every handler returns an [`Outcome`]: the JSON document printed on
//! standard output and the process exit code. Exit codes are a function of
//! the document alone.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use stardmp_core::gen::{
    check_instance, derive_seed, gen_ep, gen_instance, gen_near_miss, gen_star_dmp, gen_unrestricted,
    splitmix64, GenSpec, Instance, NEAR_MISS_KINDS,
};
use stardmp_core::geninv::{
    core_inverse, drazin, group_inverse, is_ep, is_projection, is_star_dmp, moore_penrose, pseudo_core,
    InverseCertificate,
};
use stardmp_core::{CMatrix, Error, TheoremId, TheoremVerdict, Tolerance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_NO_INVERSE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Metadata keys `gen` adds next to the instance fields.
const META_KEYS: [&str; 3] = ["seed", "theorem", "hypotheses_verified"];

/// Perturbation size for near-miss instances.
pub const NEAR_MISS_EPS: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "stardmp", version, about = "Generalized inverses and *-DMP theorem checks")]
pub struct Cli {
    /// Relative tolerance of entrywise comparisons.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub eq_tol: f64,
    /// Relative singular value cutoff for rank decisions.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rank_rel: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a generalized inverse of the matrix in FILE.
    Compute { kind: InverseArg, file: PathBuf },
    /// Evaluate a predicate on the matrix in FILE.
    Check { predicate: PredicateArg, file: PathBuf },
    /// Check a theorem on an instance file or on a generated batch.
    Verify(VerifyArgs),
    /// Look for disagreements among the *-DMP characterizations.
    Fuzz(FuzzArgs),
    /// Emit one generated instance for a theorem.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InverseArg {
    Mp,
    Group,
    Drazin,
    Core,
    Pcore,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PredicateArg {
    Projection,
    Ep,
    Stardmp,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Theorem id such as T3.2.
    pub theorem: String,
    #[arg(long, conflicts_with = "random")]
    pub file: Option<PathBuf>,
    /// Number of generated instances.
    #[arg(long, required_unless_present = "file")]
    pub random: Option<usize>,
    /// Matrix dimension; block size for block theorems.
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FuzzArgs {
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Near-miss instances per supported (theorem, hypothesis) kind.
    #[arg(long, default_value_t = 100)]
    pub near_miss: usize,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    pub theorem: String,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    /// Rank of the invertible core; defaults to about half the dimension.
    #[arg(long)]
    pub core_rank: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Printed JSON plus exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub code: i32,
}

impl Outcome {
    fn new(report: Value, code: i32) -> Self {
        Self { report, code }
    }

    fn error(code: i32, message: impl Into<String>) -> Self {
        Self::new(json!({ "error": message.into(), "exit_code": code }), code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    /// Instance seed or input file.
    pub source: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub inconsistent: usize,
    pub failures: Vec<Failure>,
}

impl RunReport {
    fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            instances: 0,
            passed: 0,
            failed: 0,
            inconsistent: 0,
            failures: Vec::new(),
        }
    }

    fn pass(&mut self) {
        self.instances += 1;
        self.passed += 1;
    }

    fn fail(&mut self, failure: Failure, inconsistent: bool) {
        self.instances += 1;
        self.failed += 1;
        if inconsistent {
            self.inconsistent += 1;
        }
        self.failures.push(failure);
    }

    pub fn exit_code(&self) -> i32 {
        if self.inconsistent > 0 {
            EXIT_NUMERICAL
        } else if self.failed > 0 {
            EXIT_FALSE
        } else {
            EXIT_OK
        }
    }
}

/// Near-miss tallies: how many instances were reported with exactly the
/// labeled hypothesis broken, with extra ones broken too, or without it.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NearMissSummary {
    pub instances: usize,
    pub exact: usize,
    pub extra: usize,
    pub missed: usize,
    pub exact_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzReport {
    #[serde(flatten)]
    pub run: RunReport,
    pub near_miss: NearMissSummary,
}

impl FuzzReport {
    /// Nonzero only for characterization inconsistencies and near misses
    /// whose labeled hypothesis went unreported.
    pub fn exit_code(&self) -> i32 {
        if self.run.inconsistent > 0 {
            EXIT_NUMERICAL
        } else {
            EXIT_OK
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            use clap::error::ErrorKind;
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Outcome::new(json!({ "help": e.to_string() }), EXIT_OK)
                }
                _ => Outcome::error(EXIT_USAGE, e.to_string()),
            }
        }
    }
}

pub fn dispatch(cli: &Cli) -> Outcome {
    let tol = match Tolerance::new(cli.eq_tol, cli.rank_rel) {
        Ok(t) => t,
        Err(e) => return Outcome::error(EXIT_USAGE, e.to_string()),
    };
    match &cli.command {
        Command::Compute { kind, file } => cmd_compute(*kind, file, &tol),
        Command::Check { predicate, file } => cmd_check(*predicate, file, &tol),
        Command::Verify(args) => cmd_verify(args, &tol),
        Command::Fuzz(args) => {
            let r = fuzz(args.count, args.dim, args.seed, args.near_miss, &tol);
            Outcome::new(to_value(&r), r.exit_code())
        }
        Command::Gen(args) => cmd_gen(args, &tol),
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn read_json(path: &Path) -> std::result::Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_matrix(path: &Path) -> std::result::Result<CMatrix, String> {
    serde_json::from_value(read_json(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::NoGroupInverse { .. } | Error::NoCoreInverse { .. } => EXIT_NO_INVERSE,
        Error::NumericalFailure(_) | Error::Generation { .. } | Error::Singular => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

pub fn cmd_compute(kind: InverseArg, file: &Path, tol: &Tolerance) -> Outcome {
    let a = match read_matrix(file) {
        Ok(a) => a,
        Err(e) => return Outcome::error(EXIT_USAGE, e),
    };
    let computed: stardmp_core::Result<(CMatrix, InverseCertificate, Option<usize>)> = match kind {
        InverseArg::Mp => {
            let (x, c) = moore_penrose(&a, tol);
            Ok((x, c, None))
        }
        InverseArg::Group => group_inverse(&a, tol).map(|(x, c)| (x, c, None)),
        InverseArg::Drazin => drazin(&a, tol).map(|(r, c)| (r.drazin, c, Some(r.index))),
        InverseArg::Core => core_inverse(&a, tol).map(|(x, c)| (x, c, None)),
        InverseArg::Pcore => pseudo_core(&a, tol).map(|(x, c)| (x, c, None)),
    };
    match computed {
        Ok((x, cert, index)) => {
            let code = if cert.pass { EXIT_OK } else { EXIT_NUMERICAL };
            let mut report = json!({ "result": x, "certificate": cert });
            if let Some(k) = index {
                report["index"] = json!(k);
            }
            Outcome::new(report, code)
        }
        Err(e) => Outcome::error(error_code(&e), e.to_string()),
    }
}

pub fn cmd_check(predicate: PredicateArg, file: &Path, tol: &Tolerance) -> Outcome {
    let a = match read_matrix(file) {
        Ok(a) => a,
        Err(e) => return Outcome::error(EXIT_USAGE, e),
    };
    let verdict_code = |v: bool| if v { EXIT_OK } else { EXIT_FALSE };
    let result = match predicate {
        PredicateArg::Projection => is_projection(&a, tol).map(|v| (json!({ "projection": v }), verdict_code(v))),
        PredicateArg::Ep => is_ep(&a, tol).map(|v| (json!({ "ep": v }), verdict_code(v))),
        PredicateArg::Stardmp => is_star_dmp(&a, tol).map(|r| {
            let code = if !r.consistent { EXIT_NUMERICAL } else { verdict_code(r.verdict) };
            (to_value(&r), code)
        }),
    };
    match result {
        Ok((report, code)) => Outcome::new(report, code),
        Err(e) => Outcome::error(error_code(&e), e.to_string()),
    }
}

fn parse_theorem(s: &str) -> std::result::Result<TheoremId, Outcome> {
    s.parse().map_err(|e: Error| Outcome::error(EXIT_USAGE, e.to_string()))
}

/// Parses an instance file, ignoring the metadata keys written by `gen`.
pub fn parse_instance(value: Value) -> std::result::Result<Instance, String> {
    let value = match value {
        Value::Object(map) => Value::Object(
            map.into_iter()
                .filter(|(k, _)| !META_KEYS.contains(&k.as_str()))
                .collect::<Map<_, _>>(),
        ),
        v => v,
    };
    serde_json::from_value(value).map_err(|e| format!("not an instance: {e}"))
}

fn record_verdict(report: &mut RunReport, source: Value, verdict: stardmp_core::Result<TheoremVerdict>) {
    match verdict {
        Ok(v) if v.equivalence_ok => report.pass(),
        Ok(v) => report.fail(
            Failure {
                source,
                verdict: Some(to_value(&v)),
                error: None,
            },
            false,
        ),
        Err(e) => report.fail(
            Failure {
                source,
                verdict: None,
                error: Some(e.to_string()),
            },
            true,
        ),
    }
}

/// Per-instance spec for generated batches: seed `derive_seed(seed, i)` and a
/// core rank cycling through `0..=dim`.
pub fn batch_spec(dim: usize, seed: u64, i: usize) -> stardmp_core::Result<GenSpec> {
    let s = derive_seed(seed, i as u64);
    GenSpec::new(dim, (splitmix64(s) % (dim as u64 + 1)) as usize, s)
}

/// Generates and checks `count` instances of `theorem`.
pub fn verify_random(theorem: TheoremId, count: usize, dim: usize, seed: u64, tol: &Tolerance) -> RunReport {
    let verdicts: Vec<(u64, stardmp_core::Result<TheoremVerdict>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let spec = batch_spec(dim, seed, i);
            let s = derive_seed(seed, i as u64);
            let v = spec
                .and_then(|spec| gen_instance(theorem, &spec))
                .and_then(|inst| check_instance(theorem, &inst, tol));
            (s, v)
        })
        .collect();
    let mut report = RunReport::new(format!("verify {theorem}"));
    for (s, v) in verdicts {
        record_verdict(&mut report, json!(s), v);
    }
    report
}

pub fn cmd_verify(args: &VerifyArgs, tol: &Tolerance) -> Outcome {
    let theorem = match parse_theorem(&args.theorem) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let report = match (&args.file, args.random) {
        (Some(path), _) => {
            let inst = match read_json(path).and_then(parse_instance) {
                Ok(i) => i,
                Err(e) => return Outcome::error(EXIT_USAGE, e),
            };
            let verdict = check_instance(theorem, &inst, tol);
            if let Err(e @ Error::InvalidArgument(_)) = &verdict {
                return Outcome::error(EXIT_USAGE, e.to_string());
            }
            let mut report = RunReport::new(format!("verify {theorem}"));
            record_verdict(&mut report, json!(path.display().to_string()), verdict);
            report
        }
        (None, Some(n)) => {
            // constructions that cannot exist at this size are a usage error
            if let Err(e @ Error::InvalidArgument(_)) =
                batch_spec(args.dim, args.seed, 0).and_then(|s| gen_instance(theorem, &s))
            {
                return Outcome::error(EXIT_USAGE, e.to_string());
            }
            verify_random(theorem, n, args.dim, args.seed, tol)
        }
        (None, None) => return Outcome::error(EXIT_USAGE, "one of --file or --random is required"),
    };
    Outcome::new(to_value(&report), report.exit_code())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FuzzKind {
    StarDmp,
    Ep,
    Unrestricted,
}

/// `Err((inconsistent, detail))` for an instance that did not pass.
type FuzzResult = std::result::Result<(), (bool, Value)>;

fn fuzz_one(kind: FuzzKind, spec: &GenSpec, tol: &Tolerance) -> FuzzResult {
    let a = match kind {
        FuzzKind::StarDmp => gen_star_dmp(spec),
        FuzzKind::Ep => gen_ep(spec),
        FuzzKind::Unrestricted => gen_unrestricted(spec),
    }
    .map_err(|e| (true, json!(e.to_string())))?;
    let r = is_star_dmp(&a, tol).map_err(|e| (true, json!(e.to_string())))?;
    if !r.consistent {
        return Err((true, to_value(&r)));
    }
    if kind != FuzzKind::Unrestricted && !r.verdict {
        return Err((false, to_value(&r)));
    }
    Ok(())
}

enum NearMissOutcome {
    Exact,
    Extra,
    Missed(Value),
    Error(String),
}

fn near_miss_one(theorem: TheoremId, label: &str, spec: &GenSpec, tol: &Tolerance) -> NearMissOutcome {
    let verdict = gen_near_miss(theorem, label, spec, NEAR_MISS_EPS)
        .and_then(|nm| check_instance(theorem, &nm.instance, tol));
    match verdict {
        Ok(v) => {
            let broken = v.broken_hypotheses();
            if broken == [label] {
                NearMissOutcome::Exact
            } else if broken.iter().any(|b| b == label) {
                NearMissOutcome::Extra
            } else {
                NearMissOutcome::Missed(to_value(&v))
            }
        }
        Err(e) => NearMissOutcome::Error(e.to_string()),
    }
}

/// Fuzzes the *-DMP characterizations on `count` matrices cycling through
/// *-DMP, EP and unrestricted constructions, then runs `near_miss` instances
/// of every near-miss kind the dimension supports.
pub fn fuzz(count: usize, dim: usize, seed: u64, near_miss: usize, tol: &Tolerance) -> FuzzReport {
    const KINDS: [FuzzKind; 3] = [FuzzKind::StarDmp, FuzzKind::Ep, FuzzKind::Unrestricted];
    let mut run = RunReport::new("fuzz");
    if dim == 0 {
        run.fail(
            Failure {
                source: json!(seed),
                verdict: None,
                error: Some("--dim must be positive".into()),
            },
            true,
        );
        return FuzzReport {
            run,
            near_miss: NearMissSummary::default(),
        };
    }
    let results: Vec<(u64, FuzzResult)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            let r = batch_spec(dim, seed, i)
                .map_err(|e| (true, json!(e.to_string())))
                .and_then(|spec| fuzz_one(KINDS[i % 3], &spec, tol));
            (s, r)
        })
        .collect();
    for (s, r) in results {
        match r {
            Ok(()) => run.pass(),
            Err((inconsistent, detail)) => run.fail(
                Failure {
                    source: json!(s),
                    verdict: Some(detail),
                    error: None,
                },
                inconsistent,
            ),
        }
    }

    let nm_seed = splitmix64(seed ^ 0x6e65_6172_6d69_7373);
    let jobs: Vec<(TheoremId, &str, usize)> = NEAR_MISS_KINDS
        .iter()
        .filter(|(t, _)| dim >= if *t == TheoremId::L21 { 3 } else { 2 })
        .flat_map(|&(t, l)| (0..near_miss).map(move |j| (t, l, j)))
        .collect();
    let outcomes: Vec<(u64, NearMissOutcome)> = jobs
        .par_iter()
        .enumerate()
        .map(|(k, &(t, l, _))| {
            let s = derive_seed(nm_seed, k as u64);
            let o = match batch_spec(dim, nm_seed, k) {
                Ok(spec) => near_miss_one(t, l, &spec, tol),
                Err(e) => NearMissOutcome::Error(e.to_string()),
            };
            (s, o)
        })
        .collect();
    let mut summary = NearMissSummary::default();
    for ((s, o), (t, l, _)) in outcomes.into_iter().zip(&jobs) {
        summary.instances += 1;
        let source = json!({ "seed": s, "theorem": t.label(), "label": l });
        match o {
            NearMissOutcome::Exact => {
                summary.exact += 1;
                run.pass();
            }
            NearMissOutcome::Extra => {
                summary.extra += 1;
                run.pass();
            }
            NearMissOutcome::Missed(v) => {
                summary.missed += 1;
                run.fail(
                    Failure {
                        source,
                        verdict: Some(v),
                        error: None,
                    },
                    true,
                );
            }
            NearMissOutcome::Error(e) => {
                summary.missed += 1;
                run.fail(
                    Failure {
                        source,
                        verdict: None,
                        error: Some(e),
                    },
                    true,
                );
            }
        }
    }
    if summary.instances > 0 {
        summary.exact_rate = summary.exact as f64 / summary.instances as f64;
    }
    FuzzReport {
        run,
        near_miss: summary,
    }
}

pub fn cmd_gen(args: &GenArgs, tol: &Tolerance) -> Outcome {
    let theorem = match parse_theorem(&args.theorem) {
        Ok(t) => t,
        Err(o) => return o,
    };
    let spec = match GenSpec::new(args.dim, args.core_rank.unwrap_or(args.dim / 2), args.seed) {
        Ok(s) => s,
        Err(e) => return Outcome::error(EXIT_USAGE, e.to_string()),
    };
    let generated = gen_instance(theorem, &spec).and_then(|inst| {
        let v = check_instance(theorem, &inst, tol)?;
        Ok((inst, v))
    });
    match generated {
        Ok((inst, v)) => {
            let mut report = to_value(&inst);
            let map = report.as_object_mut().expect("instances serialize as objects");
            map.insert("seed".into(), json!(args.seed));
            map.insert("hypotheses_verified".into(), json!(v.hypotheses_hold));
            map.insert("theorem".into(), json!(theorem.label()));
            let code = if v.hypotheses_hold { EXIT_OK } else { EXIT_NUMERICAL };
            Outcome::new(report, code)
        }
        Err(e) => Outcome::error(error_code(&e), e.to_string()),
    }
}
