use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qpartial_cli::config::{Config, OutputFormat};
use qpartial_cli::tables::{regenerate, TableKind};
use qpartial_core::error::Error as CoreError;
use qpartial_core::optimizer::{optimize_one_stage, optimize_two_stage, OptimizationReport};
use qpartial_core::reduced::{success_full, success_partial, trajectory};
use qpartial_core::statevector::{crosscheck, run_sequence};
use qpartial_core::twostage::{simulate_end_to_end, TwoStagePlan};
use qpartial_core::{OperatorSequence, SearchParams};

#[derive(Parser)]
#[command(
    name = "qpartial",
    version,
    about = "Quantum search with global and partial diffusion operators: \
             exact simulation, exhaustive sequence optimization, two-stage \
             protocols and reference-table regeneration"
)]
struct Cli {
    /// Flat key=value config file (n_cap, margin, tolerance, format,
    /// threads, seed). Flags beat the file; the file beats defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Write output to a file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one operator sequence on the chosen backend(s).
    Eval(EvalArgs),
    /// Regenerate a bundled reference table and diff it against the stored
    /// values. Exits 1 when the diff fails.
    Tables(TablesArgs),
    /// Export the reduced-basis trajectory of a sequence, one row per step.
    Trajectory(TrajectoryArgs),
    /// Exhaustively search all operator sequences under an oracle budget.
    Optimize(OptimizeArgs),
    /// Sample end-to-end two-stage runs from a plan document.
    Shots(ShotsArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Tuple form like "S(4,2;1,1,2)", or a step string like "LLGL"
    /// (step strings need --n and --m).
    sequence: String,
    /// Database exponent for step-string input.
    #[arg(long)]
    n: Option<u32>,
    /// Local diffusion scope for step-string input.
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, value_enum, default_value_t = Backend::Both)]
    backend: Backend,
    /// Target item as an n-bit string (e.g. 0110) or a decimal index.
    #[arg(long, default_value = "0")]
    target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Reduced,
    Statevector,
    Both,
}

#[derive(Args)]
struct TablesArgs {
    /// Which table: 1 (one-stage) or 2 (two-stage).
    which: u8,
    /// Improvement margin in probability units.
    #[arg(long)]
    margin: Option<f64>,
    /// Absolute probability tolerance for the diff.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct TrajectoryArgs {
    sequence: String,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    n: u32,
    /// Total oracle budget (two-stage budgets include the second stage).
    #[arg(long)]
    budget: u32,
    #[command(flatten)]
    objective: ObjectiveFlags,
    /// Scope set for one-stage ("3", "1..5" or "1,2,4"; default 1..n-1).
    /// For two-stage: the second-stage scope, 2 or 4 (default 2).
    #[arg(long)]
    m: Option<String>,
    /// Improvement margin in probability units.
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ObjectiveFlags {
    /// Maximize the full-target success probability.
    #[arg(long)]
    one_stage: bool,
    /// Maximize the block-finding probability of a first stage whose
    /// deterministic second stage finishes the search.
    #[arg(long)]
    two_stage: bool,
}

#[derive(Args)]
struct ShotsArgs {
    /// Plan document (JSON), or "-" for stdin.
    #[arg(long, value_name = "PATH")]
    plan: String,
    #[arg(long)]
    shots: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Target item as an n-bit string or a decimal index.
    #[arg(long, default_value = "0")]
    target: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }

    fn runtime(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

/// Bad user input exits 2, everything else 1.
fn classify(error: anyhow::Error) -> Failure {
    match error.downcast_ref::<CoreError>() {
        Some(
            CoreError::InvalidParameter(_) | CoreError::Parse { .. } | CoreError::ResourceLimit(_),
        ) => Failure::usage(error),
        _ => Failure::runtime(error),
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(Failure::usage)?,
        None => Config::default(),
    };
    if let Some(threads) = config.threads {
        qpartial_core::configure_thread_pool(threads);
    }
    let format = cli.format.or(config.format).unwrap_or(OutputFormat::Text);

    let (output, code) = match &cli.command {
        Command::Eval(args) => cmd_eval(args, &config, format).map_err(classify)?,
        Command::Tables(args) => cmd_tables(args, &config, format).map_err(classify)?,
        Command::Trajectory(args) => cmd_trajectory(args, format).map_err(classify)?,
        Command::Optimize(args) => cmd_optimize(args, &config, format).map_err(classify)?,
        Command::Shots(args) => cmd_shots(args, &config, format).map_err(classify)?,
    };
    emit(cli.out.as_deref(), &output).map_err(Failure::runtime)?;
    Ok(code)
}

fn emit(out: Option<&Path>, content: &str) -> anyhow::Result<()> {
    let text = if content.ends_with('\n') {
        content.to_string()
    } else {
        format!("{content}\n")
    };
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing output to {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn usage(message: String) -> anyhow::Error {
    CoreError::InvalidParameter(message).into()
}

/// Accept tuple form directly; step strings need the scopes from flags.
fn parse_sequence(text: &str, n: Option<u32>, m: Option<u32>) -> anyhow::Result<OperatorSequence> {
    let trimmed = text.trim();
    if trimmed.starts_with('S') {
        let seq = OperatorSequence::parse_tuple(trimmed)?;
        if let Some(n) = n {
            if n != seq.n() {
                return Err(usage(format!(
                    "--n {n} disagrees with the sequence's n = {}",
                    seq.n()
                )));
            }
        }
        if let Some(m) = m {
            if m != seq.m() {
                return Err(usage(format!(
                    "--m {m} disagrees with the sequence's m = {}",
                    seq.m()
                )));
            }
        }
        Ok(seq)
    } else {
        let n = n.ok_or_else(|| usage("step-string sequences need --n".to_string()))?;
        let m = m.ok_or_else(|| usage("step-string sequences need --m".to_string()))?;
        Ok(OperatorSequence::parse_steps(trimmed, n, m)?)
    }
}

/// Target as an n-bit string when it looks like one, else a decimal index.
fn parse_target(text: &str, n: u32) -> anyhow::Result<u64> {
    let trimmed = text.trim();
    if trimmed.len() == n as usize && trimmed.chars().all(|c| c == '0' || c == '1') {
        return Ok(u64::from_str_radix(trimmed, 2).expect("binary digits"));
    }
    let index: u64 = trimmed.parse().map_err(|_| {
        usage(format!(
            "target {trimmed:?} is neither an {n}-bit string nor an index"
        ))
    })?;
    if index >> n != 0 {
        return Err(usage(format!("target index {index} does not fit in {n} bits")));
    }
    Ok(index)
}

#[derive(Serialize)]
struct BackendResult {
    success: f64,
    partial_success: Option<f64>,
}

#[derive(Serialize)]
struct EvalOutput {
    sequence: String,
    step_string: String,
    n: u32,
    m: u32,
    oracles: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduced: Option<BackendResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    statevector: Option<BackendResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deviation: Option<f64>,
}

fn cmd_eval(args: &EvalArgs, config: &Config, format: OutputFormat) -> anyhow::Result<(String, u8)> {
    let seq = parse_sequence(&args.sequence, args.n, args.m)?;
    let (n, m) = (seq.n(), seq.m());

    let reduced = match args.backend {
        Backend::Reduced | Backend::Both => Some(BackendResult {
            success: success_full(&seq)?,
            partial_success: Some(success_partial(&seq)?),
        }),
        Backend::Statevector => None,
    };

    let mut target_bits = None;
    let statevector = match args.backend {
        Backend::Statevector | Backend::Both => {
            let target = parse_target(&args.target, n)?;
            let params = SearchParams::with_cap(n, m, target, config.n_cap)?;
            target_bits = Some(params.target_bits());
            let state = run_sequence(&params, &seq)?;
            let partial = if m < n {
                Some(
                    state
                        .measure_prefix(n - m)?
                        .probability(params.target_prefix()),
                )
            } else {
                None
            };
            Some(BackendResult {
                success: state.probability(target),
                partial_success: partial,
            })
        }
        Backend::Reduced => None,
    };

    let deviation = if args.backend == Backend::Both {
        let target = parse_target(&args.target, n)?;
        let params = SearchParams::with_cap(n, m, target, config.n_cap)?;
        Some(crosscheck(&params, &seq)?)
    } else {
        None
    };

    let output = EvalOutput {
        sequence: seq.tuple_form(),
        step_string: seq.step_string(),
        n,
        m,
        oracles: seq.oracle_count(),
        target: target_bits,
        reduced,
        statevector,
        deviation,
    };

    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&output)?,
        OutputFormat::Csv => {
            let mut lines = vec!["backend,success,partial_success".to_string()];
            if let Some(r) = &output.reduced {
                lines.push(format!("reduced,{},{}", r.success, opt(r.partial_success)));
            }
            if let Some(s) = &output.statevector {
                lines.push(format!("statevector,{},{}", s.success, opt(s.partial_success)));
            }
            lines.join("\n")
        }
        OutputFormat::Text => {
            let mut lines = vec![format!(
                "sequence: {}  [steps {}, {} oracles, n={n}, m={m}]",
                output.sequence,
                if output.step_string.is_empty() {
                    "(none)"
                } else {
                    &output.step_string
                },
                output.oracles,
            )];
            if let Some(r) = &output.reduced {
                lines.push(format!(
                    "reduced:      Pr = {:.8} ({:.5}%)   Pr1 = {}",
                    r.success,
                    100.0 * r.success,
                    pr1(r.partial_success),
                ));
            }
            if let Some(s) = &output.statevector {
                lines.push(format!(
                    "statevector:  Pr = {:.8} ({:.5}%)   Pr1 = {}   [target {}]",
                    s.success,
                    100.0 * s.success,
                    pr1(s.partial_success),
                    output.target.as_deref().unwrap_or("-"),
                ));
            }
            if let Some(d) = output.deviation {
                lines.push(format!("backend deviation: {d:.3e}"));
            }
            lines.join("\n")
        }
    };
    Ok((text, 0))
}

fn opt(value: Option<f64>) -> String {
    value.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn pr1(value: Option<f64>) -> String {
    value.map_or_else(|| "NA".to_string(), |v| format!("{v:.8} ({:.5}%)", 100.0 * v))
}

fn cmd_tables(
    args: &TablesArgs,
    config: &Config,
    format: OutputFormat,
) -> anyhow::Result<(String, u8)> {
    let kind = TableKind::from_number(args.which)
        .map_err(|e| anyhow::Error::from(CoreError::InvalidParameter(e.to_string())))?;
    let margin = args.margin.unwrap_or(config.margin);
    let tolerance = args.tolerance.unwrap_or(config.tolerance);
    let report = regenerate(kind, margin, tolerance)?;
    let text = match format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Text => report.to_text(),
    };
    Ok((text, if report.pass { 0 } else { 1 }))
}

#[derive(Serialize)]
struct TrajectoryRow {
    step: usize,
    operator: &'static str,
    a_t: f64,
    a_ntt: f64,
    a_u: f64,
}

fn cmd_trajectory(args: &TrajectoryArgs, format: OutputFormat) -> anyhow::Result<(String, u8)> {
    let seq = parse_sequence(&args.sequence, args.n, args.m)?;
    let states = trajectory(&seq)?;
    let rows: Vec<TrajectoryRow> = states
        .iter()
        .enumerate()
        .map(|(i, s)| TrajectoryRow {
            step: i,
            operator: if i == 0 {
                "init"
            } else {
                match seq.steps()[i - 1] {
                    qpartial_core::Step::Global => "G",
                    qpartial_core::Step::Local => "L",
                }
            },
            a_t: s.a_t,
            a_ntt: s.a_ntt,
            a_u: s.a_u,
        })
        .collect();

    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&serde_json::json!({
            "sequence": seq.tuple_form(),
            "rows": rows,
        }))?,
        // The trajectory is tabular by nature; text and csv coincide.
        OutputFormat::Csv | OutputFormat::Text => {
            let mut lines = vec!["step,operator,a_t,a_ntt,a_u".to_string()];
            for row in &rows {
                lines.push(format!(
                    "{},{},{},{},{}",
                    row.step, row.operator, row.a_t, row.a_ntt, row.a_u
                ));
            }
            lines.join("\n")
        }
    };
    Ok((text, 0))
}

fn parse_scope_spec(spec: &str) -> anyhow::Result<Vec<u32>> {
    let spec = spec.trim();
    let number = |part: &str| -> anyhow::Result<u32> {
        part.trim()
            .parse()
            .map_err(|_| usage(format!("bad scope {part:?} (expected e.g. 3, 1..5 or 1,2,4)")))
    };
    if let Some((lo, hi)) = spec.split_once("..") {
        let (lo, hi) = (number(lo)?, number(hi)?);
        if lo > hi {
            return Err(usage(format!("empty scope range {spec:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    if spec.contains(',') {
        return spec.split(',').map(number).collect();
    }
    Ok(vec![number(spec)?])
}

fn cmd_optimize(
    args: &OptimizeArgs,
    config: &Config,
    format: OutputFormat,
) -> anyhow::Result<(String, u8)> {
    let margin = args.margin.unwrap_or(config.margin);
    let report: OptimizationReport = if args.objective.one_stage {
        let m_set = match &args.m {
            Some(spec) => parse_scope_spec(spec)?,
            None => {
                if args.n < 2 {
                    return Err(CoreError::InvalidParameter(
                        "one-stage optimization needs n >= 2".to_string(),
                    )
                    .into());
                }
                (1..args.n).collect()
            }
        };
        optimize_one_stage(args.n, args.budget, &m_set, margin)?
    } else {
        let m = match &args.m {
            Some(spec) => {
                let scopes = parse_scope_spec(spec)?;
                if scopes.len() != 1 {
                    return Err(CoreError::InvalidParameter(
                        "two-stage optimization takes a single second-stage scope (2 or 4)"
                            .to_string(),
                    )
                    .into());
                }
                scopes[0]
            }
            None => 2,
        };
        optimize_two_stage(args.n, args.budget, m, margin)?
    };

    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&report)?,
        OutputFormat::Csv => {
            let mut lines = vec![
                "n,k_tot,objective,best_operator,best_step_string,best_m,probability,count_total,evaluated"
                    .to_string(),
            ];
            lines.push(format!(
                "{},{},{:?},{},{},{},{},{},{}",
                report.n,
                report.k_tot,
                report.objective,
                report.best.tuple_form,
                report.best.step_string,
                report.best.m,
                report.best.probability,
                report.counts.total,
                report.evaluated,
            ));
            lines.join("\n")
        }
        OutputFormat::Text => {
            let mut lines = vec![format!(
                "n={} budget={} objective={:?} scopes={:?} margin={:.1e}",
                report.n, report.k_tot, report.objective, report.m_set, report.margin
            )];
            lines.push(format!(
                "baseline: {:.8} ({:.5}%)",
                report.baseline,
                100.0 * report.baseline
            ));
            if report.improvement_found() {
                lines.push(format!(
                    "best: {}  [steps {}]  Pr = {:.8} ({:.5}%)",
                    report.best.tuple_form,
                    report.best.step_string,
                    report.best.probability,
                    100.0 * report.best.probability,
                ));
                lines.push(format!(
                    "improvements: {} total, per scope {:?}",
                    report.counts.total, report.counts.per_m
                ));
            } else {
                lines.push("no improvement found (NA)".to_string());
                lines.push(format!(
                    "best scanned: {}  Pr = {:.8}",
                    report.best.tuple_form, report.best.probability
                ));
            }
            lines.push(format!(
                "evaluated {} sequences in {} ms",
                report.evaluated, report.wall_time_ms
            ));
            lines.join("\n")
        }
    };
    Ok((text, 0))
}

#[derive(Serialize)]
struct ShotsOutput {
    #[serde(flatten)]
    report: qpartial_core::twostage::ShotReport,
    within_4_sigma: bool,
}

fn cmd_shots(args: &ShotsArgs, config: &Config, format: OutputFormat) -> anyhow::Result<(String, u8)> {
    let raw = if args.plan == "-" {
        let mut buffer = String::new();
        std::io::stdin().read_to_string(&mut buffer).context("reading plan from stdin")?;
        buffer
    } else {
        std::fs::read_to_string(&args.plan)
            .with_context(|| format!("reading plan {}", args.plan))?
    };
    let plan: TwoStagePlan = serde_json::from_str(&raw)
        .map_err(|e| CoreError::InvalidParameter(format!("malformed plan document: {e}")))?;
    let target = parse_target(&args.target, plan.n())?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let report = simulate_end_to_end(&plan, target, args.shots, seed)?;
    let within = report.within_sigmas(4.0);
    let output = ShotsOutput {
        report,
        within_4_sigma: within,
    };

    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&output)?,
        OutputFormat::Csv => format!(
            "shots,seed,verified,verified_fraction,expected,sigma,within_4_sigma\n{},{},{},{},{},{},{}",
            report.shots,
            report.seed,
            report.verified,
            report.verified_fraction,
            report.expected,
            report.sigma,
            within,
        ),
        OutputFormat::Text => format!(
            "plan: {} + second stage, {} oracles total\n\
             shots: {} (seed {}, chunks of {})\n\
             verified: {} ({:.8})\n\
             expected: {:.8}  sigma: {:.3e}\n\
             4-sigma check: {}",
            plan.first_stage().tuple_form(),
            plan.total_oracles(),
            report.shots,
            report.seed,
            report.chunk_size,
            report.verified,
            report.verified_fraction,
            report.expected,
            report.sigma,
            if within { "PASS" } else { "FAIL" },
        ),
    };
    Ok((text, if within { 0 } else { 1 }))
}
