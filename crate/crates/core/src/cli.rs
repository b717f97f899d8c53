//! Command-line front end.
//!
//! Every command returns a [`CmdOutput`] holding the exit code, a text report
//! and a JSON report, so the binary and the tests share one code path.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use crate::index_algebra::{is_member_u, is_permuted, preset, to_upsilon, BinaryOp, Partition, PresetParams};
use crate::instance::{load_instance, InstanceError, LoadedInstance};
use crate::oracle::{certify_theorem, lemma_suite, LemmaConfig, OracleError, Theorem};
use crate::scalar::Scalar;
use crate::solver::{solve, HypothesisReport, ProblemInstance, SolveConfig, SolveError, Status};
use crate::spaces::OrderedMetricSpace;

pub const EXIT_OK: i32 = 0;
/// A checked claim has a counterexample (theorem conclusion or lemma identity).
pub const EXIT_COUNTEREXAMPLE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_GATE: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;
pub const EXIT_ORACLE_REFUSAL: i32 = 5;
pub const EXIT_IO: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "ntupled", version, about = "Tupled fixed and coincidence points on ordered metric spaces")]
pub struct Cli {
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    /// Also write the JSON report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Membership in U, permutedness and row maps of an operation.
    Classify(ClassifyArgs),
    /// Check the gates and run the iteration on an instance file.
    Solve(SolveArgs),
    /// Certify a theorem on a finite instance by exhaustive search.
    Verify(VerifyArgs),
    /// Run the seeded suite of lemma-level identities.
    Lemmas(LemmasArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    /// Named operation, e.g. `forward-cyclic` or `karapinar-luong`.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    pub preset: Option<String>,
    /// Row-major 1-based matrix, rows separated by `;`, e.g. "1 2;2 1".
    #[arg(long)]
    pub matrix: Option<String>,
    #[arg(short = 'n', long = "n")]
    pub n: Option<usize>,
    /// `odd-even` or `A|B` with comma-separated indices, e.g. "1,3|2".
    #[arg(long)]
    pub partition: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// Write one JSON record per iteration to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Seed for sampled checks on infinite carriers.
    #[arg(long, default_value_t = 0x5EED)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    #[arg(long, default_value = "T1")]
    pub theorem: String,
}

#[derive(Debug, Clone, Args)]
pub struct LemmasArgs {
    /// Largest tuple length (2 is exhaustive, larger is sampled).
    #[arg(long = "n", default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_size: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    /// Random cases for each sampled tuple length.
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmdOutput {
    pub code: i32,
    pub text: String,
    pub json: Value,
}

impl CmdOutput {
    fn new(code: i32, text: String, json: Value) -> Self {
        Self { code, text, json }
    }

    fn error(code: i32, command: &str, kind: &str, message: String) -> Self {
        let text = format!("error: {message}\n");
        Self::new(
            code,
            text,
            json!({"command": command, "exit_code": code, "error": {"kind": kind, "message": message}}),
        )
    }

    pub fn json_string(&self) -> String {
        serde_json::to_string_pretty(&self.json).expect("reports serialize")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("parse error at row {row}, position {position}: {message}")]
pub struct ParseError {
    pub row: usize,
    pub position: usize,
    pub message: String,
}

/// Parses "1 2 3; 2 3 1; 3 1 2" (commas also separate entries, newlines also separate rows).
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<usize>>, ParseError> {
    let mut rows = Vec::new();
    for (r, line) in text.split([';', '\n']).enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (c, tok) in line.split(|ch: char| ch.is_whitespace() || ch == ',').filter(|t| !t.is_empty()).enumerate() {
            row.push(tok.parse::<usize>().map_err(|_| ParseError {
                row: r + 1,
                position: c + 1,
                message: format!("`{tok}` is not a positive integer"),
            })?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ParseError {
            row: 1,
            position: 1,
            message: "empty matrix".into(),
        });
    }
    let n = rows.len();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(ParseError {
                row: r + 1,
                position: row.len().min(n) + 1,
                message: format!("row has {} entries, expected {n}", row.len()),
            });
        }
        if let Some(c) = row.iter().position(|&v| v == 0 || v > n) {
            return Err(ParseError {
                row: r + 1,
                position: c + 1,
                message: format!("entry {} outside 1..={n}", row[c]),
            });
        }
    }
    Ok(rows)
}

fn parse_partition(n: usize, text: &str) -> Result<Partition, String> {
    if text == "odd-even" {
        return Partition::odd_even(n).map_err(|e| e.to_string());
    }
    let (a, b) = text.split_once('|').ok_or_else(|| format!("partition `{text}` must be `odd-even` or `A|B`"))?;
    let list = |s: &str| -> Result<Vec<usize>, String> {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("`{t}` is not an index")))
            .collect()
    };
    Partition::new(n, &list(a)?, &list(b)?).map_err(|e| e.to_string())
}

fn matrix_text(op: &BinaryOp) -> String {
    let mut s = String::new();
    for row in op.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>2}")).collect();
        let _ = writeln!(s, "  {}", cells.join(" "));
    }
    s
}

pub fn cmd_classify(args: &ClassifyArgs) -> CmdOutput {
    let parse_err = |m: String| CmdOutput::error(EXIT_PARSE, "classify", "parse", m);
    let (op, part) = match (&args.preset, &args.matrix) {
        (Some(name), _) => {
            let n = args.n.unwrap_or_else(|| match name.parse::<crate::index_algebra::PresetName>() {
                Ok(p) => p.fixed_arity().unwrap_or(0),
                Err(_) => 0,
            });
            let part = match args.partition.as_deref().map(|p| parse_partition(n, p)).transpose() {
                Ok(p) => p,
                Err(m) => return parse_err(m),
            };
            let params = PresetParams {
                partition: part,
                ..PresetParams::default()
            };
            match preset(name, n, &params) {
                Ok(x) => x,
                Err(e) => return parse_err(e.to_string()),
            }
        }
        (None, Some(text)) => {
            let rows = match parse_matrix(text) {
                Ok(r) => r,
                Err(e) => return parse_err(e.to_string()),
            };
            let n = rows.len();
            if args.n.is_some_and(|m| m != n) {
                return parse_err(format!("matrix is {n}x{n} but -n is {}", args.n.unwrap()));
            }
            let op = match BinaryOp::from_rows(n, &rows) {
                Ok(op) => op,
                Err(e) => return parse_err(e.to_string()),
            };
            let part = match parse_partition(n, args.partition.as_deref().unwrap_or("odd-even")) {
                Ok(p) => p,
                Err(m) => return parse_err(m),
            };
            (op, part)
        }
        (None, None) => return parse_err("classify needs --preset or --matrix".into()),
    };
    let n = op.n();
    let membership = is_member_u(&op, &part).expect("dimensions agree");
    let permuted = is_permuted(&op);
    let upsilon = to_upsilon(&op);

    let mut text = format!("operation (n = {n}):\n{}partition: {part}\n", matrix_text(&op));
    let _ = writeln!(
        text,
        "{} U_ι{n}; {}",
        if membership.member { "in" } else { "NOT in" },
        if permuted.permuted { "permuted" } else { "not permuted" }
    );
    for v in &membership.violations {
        let _ = writeln!(text, "  witness: {v}");
    }
    if let Some(r) = permuted.first_bad_row {
        let _ = writeln!(text, "  row {r} is not a permutation");
    }
    for (i, s) in upsilon.sigmas().iter().enumerate() {
        let cells: Vec<String> = s.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(text, "  σ{} = ({})", i + 1, cells.join(" "));
    }
    let json = json!({
        "command": "classify",
        "exit_code": EXIT_OK,
        "n": n,
        "matrix": op,
        "partition": part,
        "member_u": membership.member,
        "violations": membership.violations,
        "permuted": permuted.permuted,
        "first_non_permutation_row": permuted.first_bad_row,
        "upsilon": upsilon.sigmas(),
    });
    CmdOutput::new(EXIT_OK, text, json)
}

fn instance_error(command: &str, e: InstanceError) -> CmdOutput {
    match e {
        InstanceError::Io { .. } => CmdOutput::error(EXIT_IO, command, "io", e.to_string()),
        _ => CmdOutput::error(EXIT_PARSE, command, "parse", e.to_string()),
    }
}

fn report_text(report: &HypothesisReport) -> String {
    let mut s = String::from("hypotheses:\n");
    for e in &report.entries {
        let mark = match (e.holds, e.name.starts_with("assumption:")) {
            (true, _) => "ok  ",
            (false, true) => "no  ",
            (false, false) => "FAIL",
        };
        let detail = if e.detail.is_empty() { String::new() } else { format!(": {}", e.detail) };
        let _ = writeln!(s, "  [{mark}] {} ({}){detail}", e.name, e.provenance);
    }
    s
}

fn scalars_json<T: Scalar>(v: &[T]) -> Value {
    Value::Array(v.iter().map(|t| t.to_json()).collect())
}

fn write_trace<S: OrderedMetricSpace>(
    path: &Path,
    space: &S,
    trace: &crate::solver::IterationTrace<S::Point, S::Scalar>,
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (m, u) in trace.tuples.iter().enumerate() {
        let rec = json!({
            "m": m,
            "tuple": space.tuple_json(u),
            "delta_residual": trace.delta_residuals.get(m).map(|t| t.to_json()),
            "nabla_residual": trace.nabla_residuals.get(m).map(|t| t.to_json()),
        });
        writeln!(out, "{rec}")?;
    }
    out.flush()
}

fn solve_generic<S: OrderedMetricSpace>(inst: &ProblemInstance<S>, args: &SolveArgs) -> CmdOutput {
    let cfg = SolveConfig {
        tol: args.tol,
        max_iters: args.max_iters,
        seed: args.seed,
        ..SolveConfig::default()
    };
    let space = &inst.space;
    match solve(inst, &cfg) {
        Ok(out) => {
            if let Some(path) = &args.trace {
                if let Err(e) = write_trace(path, space, &out.trace) {
                    return CmdOutput::error(EXIT_IO, "solve", "io", format!("cannot write trace {}: {e}", path.display()));
                }
            }
            let code = if out.trace.status == Status::Converged { EXIT_OK } else { EXIT_NON_CONVERGENCE };
            let tuple = space.tuple_json(&out.tuple);
            let mut text = report_text(&out.report);
            let _ = writeln!(text, "initial tuple: {} ({:?})", space.tuple_json(&out.initial.tuple), out.initial.orientation);
            let _ = writeln!(text, "status: {:?} after {} iterations", out.trace.status, out.trace.steps());
            if let Some(r) = out.trace.nabla_residuals.last() {
                let _ = writeln!(text, "final residual: {r}");
            }
            let _ = writeln!(text, "tuple: {tuple}");
            if !out.trace.phi_violations.is_empty() {
                let _ = writeln!(text, "warning: φ(t) < t failed at {} residuals", out.trace.phi_violations.len());
            }
            let json = json!({
                "command": "solve",
                "exit_code": code,
                "status": out.trace.status,
                "tuple": tuple,
                "initial": {"tuple": space.tuple_json(&out.initial.tuple), "orientation": out.initial.orientation},
                "iterations": out.trace.steps(),
                "delta_residuals": scalars_json(&out.trace.delta_residuals),
                "nabla_residuals": scalars_json(&out.trace.nabla_residuals),
                "phi_violations": scalars_json(&out.trace.phi_violations),
                "hypotheses": out.report,
            });
            CmdOutput::new(code, text, json)
        }
        Err(SolveError::GateFailed { gate, detail, report }) => {
            let mut text = report_text(&report);
            let _ = writeln!(text, "gate {gate} failed: {detail}");
            let json = json!({
                "command": "solve",
                "exit_code": EXIT_GATE,
                "error": {"kind": "gate", "gate": gate, "message": detail},
                "hypotheses": report,
            });
            CmdOutput::new(EXIT_GATE, text, json)
        }
        Err(e @ SolveError::SectionFailure { .. }) => CmdOutput::error(EXIT_NON_CONVERGENCE, "solve", "section", e.to_string()),
        Err(e @ SolveError::SizeLimit { .. }) => CmdOutput::error(EXIT_ORACLE_REFUSAL, "solve", "size-limit", e.to_string()),
        Err(e @ SolveError::NotFound) => CmdOutput::error(EXIT_GATE, "solve", "gate", e.to_string()),
        Err(e) => CmdOutput::error(EXIT_PARSE, "solve", "invalid-instance", e.to_string()),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> CmdOutput {
    match load_instance(&args.instance) {
        Ok(LoadedInstance::Finite(inst)) => solve_generic(&inst, args),
        Ok(LoadedInstance::Real(inst)) => solve_generic(&inst, args),
        Err(e) => instance_error("solve", e),
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> CmdOutput {
    let theorem: Theorem = match args.theorem.parse() {
        Ok(t) => t,
        Err(m) => return CmdOutput::error(EXIT_PARSE, "verify", "parse", m),
    };
    let inst = match load_instance(&args.instance) {
        Ok(LoadedInstance::Finite(inst)) => inst,
        Ok(LoadedInstance::Real(_)) => {
            return CmdOutput::error(EXIT_ORACLE_REFUSAL, "verify", "refusal", OracleError::NotFinite.to_string())
        }
        Err(e) => return instance_error("verify", e),
    };
    match certify_theorem(&inst, theorem, &SolveConfig::default()) {
        Ok(cert) => {
            let code = if cert.verified { EXIT_OK } else { EXIT_COUNTEREXAMPLE };
            let mut text = report_text(&cert.hypotheses);
            let _ = writeln!(text, "{theorem}: {}", cert.conclusion);
            let _ = writeln!(
                text,
                "coincidence points: {}, points of coincidence: {}, common fixed: {}",
                cert.sets.coincidence_points, cert.sets.points_of_coincidence, cert.sets.common_fixed
            );
            let _ = writeln!(text, "{}", if cert.verified { "VERIFIED" } else { "COUNTEREXAMPLE" });
            if let Some(w) = &cert.witness {
                let _ = writeln!(text, "witness: {w}");
            }
            if let Some(c) = &cert.counterexample {
                let _ = writeln!(text, "found: {c}");
            }
            let mut json = serde_json::to_value(&cert).expect("certificate serializes");
            json["command"] = json!("verify");
            json["exit_code"] = json!(code);
            CmdOutput::new(code, text, json)
        }
        Err(OracleError::HypothesesNotMachineVerified { theorem, failed, report }) => {
            let mut text = report_text(&report);
            let _ = writeln!(text, "{theorem}: hypotheses not machine-verified: {}", failed.join(", "));
            let json = json!({
                "command": "verify",
                "exit_code": EXIT_ORACLE_REFUSAL,
                "theorem": theorem,
                "error": {"kind": "hypotheses-not-machine-verified", "failed": failed},
                "hypotheses": report,
            });
            CmdOutput::new(EXIT_ORACLE_REFUSAL, text, json)
        }
        Err(e @ (OracleError::NotFinite | OracleError::SizeLimit { .. })) => {
            CmdOutput::error(EXIT_ORACLE_REFUSAL, "verify", "refusal", e.to_string())
        }
        Err(OracleError::Solve(e @ SolveError::SizeLimit { .. })) => {
            CmdOutput::error(EXIT_ORACLE_REFUSAL, "verify", "refusal", e.to_string())
        }
        Err(e) => CmdOutput::error(EXIT_PARSE, "verify", "invalid-instance", e.to_string()),
    }
}

pub fn cmd_lemmas(args: &LemmasArgs) -> CmdOutput {
    let cfg = LemmaConfig {
        max_n: args.n as usize,
        max_size: args.max_size as usize,
        trials: args.trials as usize,
        sampled_cases: args.samples as usize,
        seed: args.seed,
    };
    let report = lemma_suite(&cfg);
    let code = if report.passed() { EXIT_OK } else { EXIT_COUNTEREXAMPLE };
    let mut text = format!(
        "lemma suite: seed {}, n <= {}, |X| <= {}, {} trials, {} sampled cases\n",
        report.seed, report.max_n, report.max_size, report.trials, report.sampled_cases
    );
    for w in &report.warnings {
        let _ = writeln!(text, "warning: {w}");
    }
    for c in &report.checks {
        let _ = writeln!(text, "  {:<32} cases {:>10}  violations {}", c.name, c.cases, c.violations);
        if let Some(v) = &c.first_violation {
            let _ = writeln!(text, "    first: {v}");
        }
    }
    for f in &report.findings {
        let _ = writeln!(text, "finding: {f}");
    }
    let _ = writeln!(text, "{}", if report.passed() { "PASS" } else { "FAIL" });
    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["command"] = json!("lemmas");
    json["exit_code"] = json!(code);
    CmdOutput::new(code, text, json)
}

pub fn run(cli: &Cli) -> CmdOutput {
    match &cli.command {
        Command::Classify(a) => cmd_classify(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Lemmas(a) => cmd_lemmas(a),
    }
}

/// Prints `out` in the requested format and writes the report file; returns the exit code.
pub fn emit(cli: &Cli, out: &CmdOutput) -> i32 {
    match cli.format {
        Format::Text => print!("{}", out.text),
        Format::Json => println!("{}", out.json_string()),
        Format::Both => {
            print!("{}", out.text);
            println!("{}", out.json_string());
        }
    }
    if let Some(path) = &cli.report {
        if let Err(e) = std::fs::write(path, out.json_string() + "\n") {
            eprintln!("error: cannot write report {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    out.code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(preset: Option<&str>, matrix: Option<&str>, n: Option<usize>, partition: Option<&str>) -> CmdOutput {
        cmd_classify(&ClassifyArgs {
            preset: preset.map(String::from),
            matrix: matrix.map(String::from),
            n,
            partition: partition.map(String::from),
        })
    }

    #[test]
    fn forward_cyclic_three_is_rejected() {
        let out = classify(Some("forward-cyclic"), None, Some(3), Some("odd-even"));
        assert_eq!(out.code, EXIT_OK);
        assert!(out.text.contains("NOT in U_ι3"), "{}", out.text);
        assert_eq!(out.json["violations"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn karapinar_luong_is_valid() {
        let out = classify(Some("karapinar-luong"), None, Some(4), None);
        assert!(out.text.contains("in U_ι4; permuted"), "{}", out.text);
        assert_eq!(out.json["member_u"], json!(true));
    }

    #[test]
    fn malformed_matrix_row() {
        let err = parse_matrix("1 2; 2 x").unwrap_err();
        assert_eq!((err.row, err.position), (2, 2));
        let err = parse_matrix("1 2; 2").unwrap_err();
        assert_eq!(err.row, 2);
        let out = classify(None, Some("1 2;2"), None, None);
        assert_eq!(out.code, EXIT_PARSE);
    }

    #[test]
    fn explicit_partition() {
        let out = classify(None, Some("1 2;2 1"), None, Some("1|2"));
        assert_eq!(out.json["member_u"], json!(true));
        assert_eq!(out.json["permuted"], json!(true));
    }

    #[test]
    fn missing_instance_is_io() {
        let out = cmd_solve(&SolveArgs {
            instance: PathBuf::from("/nonexistent/instance.json"),
            tol: 1e-10,
            max_iters: 10,
            trace: None,
            seed: 1,
        });
        assert_eq!(out.code, EXIT_IO);
    }
}
