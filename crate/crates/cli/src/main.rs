use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use tempfile::NamedTempFile;
use wmmtree::estimate::{
    parse_alternate_sources, two_stage_estimate, wmm_estimate, EstimateConfig, EstimateError,
    EstimateReport, IntervalType, DEFAULT_COMBINATION_CAP,
};
use wmmtree::jags::{generate_model, Prior};
use wmmtree::render::{render_tree, RenderFormat, RenderMode, RenderSpec};
use wmmtree::sampling::DEFAULT_MAX_ATTEMPTS;
use wmmtree::tree::{build_tree, parse_edge_table, PopTree, TableError};

/// Population size estimation on tree-structured surveillance data.
#[derive(Debug, Parser)]
#[command(name = "wmmtree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an edge table and summarize the tree.
    Validate(InputArgs),
    /// Estimate the root population size.
    Estimate(EstimateArgs),
    /// Write a JAGS model for the tree.
    Jags(JagsArgs),
    /// Draw the tree as Graphviz DOT or ASCII.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Edge table (CSV).
    #[arg(short, long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Seed for the random number generator.
    #[arg(long, env = "WMMTREE_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of joint realizations M.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Interval construction around the root estimate.
    #[arg(long, value_enum, default_value_t = IntervalArg::Percentile)]
    interval: IntervalArg,
    /// Two-sided level for percentile intervals.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Attempts per sibling group before rejection sampling gives up.
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    max_attempts: u64,
    /// Alternate surveys (CSV with from,to,Estimate,Total) for two-stage estimation.
    #[arg(long)]
    alternates: Option<PathBuf>,
    /// Largest number of source combinations allowed in two-stage estimation.
    #[arg(long, default_value_t = DEFAULT_COMBINATION_CAP)]
    max_combinations: usize,
    /// Report destination; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Report encoding.
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
    /// Also write the raw samples as CSV.
    #[arg(long)]
    dump_samples: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct JagsArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Prior on the root population size.
    #[arg(long, value_enum, default_value_t = PriorArg::Lognormal)]
    prior: PriorArg,
    /// Model destination; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Which node annotations to show.
    #[arg(long, value_enum, default_value_t = ModeArg::Draw)]
    mode: ModeArg,
    /// Output notation.
    #[arg(long, value_enum, default_value_t = FormatArg::Dot)]
    format: FormatArg,
    /// Label edges with their survey ratios (draw mode).
    #[arg(long)]
    probs: bool,
    /// Label nodes with their descriptions.
    #[arg(long)]
    desc: bool,
    /// Report written by `estimate`, required for count and est modes.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Drawing destination; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IntervalArg {
    Percentile,
    Var,
    Cox,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PriorArg {
    Lognormal,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Draw,
    Count,
    Est,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Dot,
    Ascii,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Usage,
    Validation,
    Estimation,
    Io,
}

impl Kind {
    fn exit_code(self) -> u8 {
        match self {
            Kind::Usage | Kind::Validation => 2,
            Kind::Estimation => 3,
            Kind::Io => 4,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Usage => "usage",
            Kind::Validation => "validation",
            Kind::Estimation => "estimation",
            Kind::Io => "io",
        })
    }
}

struct Failure {
    kind: Kind,
    error: anyhow::Error,
}

type Outcome<T = ()> = Result<T, Failure>;

trait Classify<T> {
    fn kind(self, kind: Kind) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn kind(self, kind: Kind) -> Outcome<T> {
        self.map_err(|e| Failure {
            kind,
            error: e.into(),
        })
    }
}

fn estimate_kind(err: &EstimateError) -> Kind {
    match err.root_cause() {
        EstimateError::NoInformativePaths
        | EstimateError::UnknownEdge { .. }
        | EstimateError::InvalidSource { .. }
        | EstimateError::TooManyCombinations { .. } => Kind::Validation,
        EstimateError::TooFewSamples { .. } | EstimateError::InvalidAlpha { .. } => Kind::Usage,
        _ => Kind::Estimation,
    }
}

fn table_kind(err: &TableError) -> Kind {
    match err {
        TableError::Io(_) => Kind::Io,
        _ => Kind::Validation,
    }
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .kind(Kind::Io)
}

fn load_tree(path: &Path) -> Outcome<PopTree> {
    let records = parse_edge_table(open(path)?).map_err(|e| Failure {
        kind: table_kind(&e),
        error: anyhow::Error::new(e).context(path.display().to_string()),
    })?;
    build_tree(&records)
        .with_context(|| path.display().to_string())
        .kind(Kind::Validation)
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, or to standard output when no path is given.
fn write_output(path: Option<&Path>, contents: &[u8]) -> Outcome {
    let Some(path) = path else {
        let mut stdout = io::stdout().lock();
        return stdout
            .write_all(contents)
            .and_then(|_| stdout.flush())
            .context("cannot write to standard output")
            .kind(Kind::Io);
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let result = (|| -> anyhow::Result<()> {
        let mut file = NamedTempFile::new_in(dir)?;
        file.write_all(contents)?;
        file.as_file().sync_all()?;
        file.persist(path)?;
        Ok(())
    })();
    result
        .with_context(|| format!("cannot write {}", path.display()))
        .kind(Kind::Io)
}

fn cmd_validate(args: &InputArgs) -> Outcome {
    let tree = load_tree(&args.input)?;
    let informative = tree.informative_labels();
    let leaves: Vec<&str> = tree.leaves().map(|n| tree.label(n)).collect();
    let mut text = format!(
        "{} edges, {} nodes, informative leaves: {}\n",
        tree.edge_count(),
        tree.len(),
        if informative.is_empty() {
            "none".to_owned()
        } else {
            informative.join(", ")
        }
    );
    text.push_str(&format!("root: {}; leaves: {}\n", tree.root_label(), leaves.join(", ")));
    write_output(None, text.as_bytes())
}

fn text_report(report: &EstimateReport) -> String {
    let mut out = format!(
        "root {}: {} (estimate {:.2})\n{} interval [{:.2}, {:.2}]\n",
        report.root,
        report.rounded_estimate,
        report.root_estimate,
        report.interval_type,
        report.uncertainty[0],
        report.uncertainty[1],
    );
    let weights: Vec<String> = report.weights.iter().map(|(l, w)| format!("{l}={w:.4}")).collect();
    out.push_str(&format!("weights: {}", weights.join(", ")));
    if report.weight_fallback {
        out.push_str(" (uniform fallback)");
    }
    out.push('\n');
    for (leaf, s) in &report.per_leaf {
        out.push_str(&format!(
            "leaf {leaf}: count {}, mean root estimate {:.2} [{:.2}, {:.2}]\n",
            s.count, s.mean_estimate, s.interval[0], s.interval[1]
        ));
    }
    out.push_str(&format!("samples: {}, seed: {}\n", report.samples, report.seed));
    out
}

fn cmd_estimate(args: &EstimateArgs) -> Outcome {
    let tree = load_tree(&args.input.input)?;
    let config = EstimateConfig {
        samples: args.samples,
        seed: args.seed,
        interval: match args.interval {
            IntervalArg::Percentile => IntervalType::Percentile,
            IntervalArg::Var => IntervalType::Var,
            IntervalArg::Cox => IntervalType::Cox,
        },
        alpha: args.alpha,
        max_attempts: args.max_attempts,
    };
    let classify = |e: EstimateError| Failure {
        kind: estimate_kind(&e),
        error: e.into(),
    };
    config.validate().map_err(classify)?;
    let report = match &args.alternates {
        None => wmm_estimate(&tree, &config).map_err(classify)?,
        Some(path) => {
            let sources = parse_alternate_sources(open(path)?).map_err(|e| Failure {
                kind: table_kind(&e),
                error: anyhow::Error::new(e).context(path.display().to_string()),
            })?;
            two_stage_estimate(&tree, &sources, &config, args.max_combinations).map_err(classify)?
        }
    };

    if let Some(path) = &args.dump_samples {
        let mut buffer = Vec::new();
        report
            .write_samples_csv(&mut buffer)
            .context("cannot format samples")
            .kind(Kind::Io)?;
        write_output(Some(path), &buffer)?;
    }
    let text = match args.format {
        ReportFormat::Json => {
            let mut json = serde_json::to_string_pretty(&report)
                .context("cannot serialize report")
                .kind(Kind::Estimation)?;
            json.push('\n');
            json
        }
        ReportFormat::Text => text_report(&report),
    };
    write_output(args.output.as_deref(), text.as_bytes())
}

fn cmd_jags(args: &JagsArgs) -> Outcome {
    let tree = load_tree(&args.input.input)?;
    let prior = match args.prior {
        PriorArg::Lognormal => Prior::Lognormal,
        PriorArg::Uniform => Prior::Uniform,
    };
    let model = generate_model(&tree, prior).kind(Kind::Validation)?;
    write_output(args.output.as_deref(), model.full_text.as_bytes())
}

fn cmd_render(args: &RenderArgs) -> Outcome {
    let mode = match args.mode {
        ModeArg::Draw => RenderMode::Draw,
        ModeArg::Count => RenderMode::Count,
        ModeArg::Est => RenderMode::Est,
    };
    if mode != RenderMode::Draw && args.report.is_none() {
        return Err(Failure {
            kind: Kind::Usage,
            error: anyhow::anyhow!("--mode {mode} requires --report"),
        });
    }
    let tree = load_tree(&args.input.input)?;
    let report: Option<EstimateReport> = match &args.report {
        None => None,
        Some(path) => Some(
            serde_json::from_reader(open(path)?)
                .with_context(|| format!("{} is not an estimation report", path.display()))
                .kind(Kind::Validation)?,
        ),
    };
    let spec = RenderSpec {
        mode,
        format: match args.format {
            FormatArg::Dot => RenderFormat::Dot,
            FormatArg::Ascii => RenderFormat::Ascii,
        },
        show_probs: args.probs,
        show_desc: args.desc,
    };
    let text = render_tree(&tree, &spec, report.as_ref()).kind(Kind::Validation)?;
    write_output(args.output.as_deref(), text.as_bytes())
}

fn single_line(error: &anyhow::Error) -> String {
    let parts: Vec<String> = error.chain().map(|e| e.to_string()).collect();
    parts.join(": ").replace('\n', " ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let message = err.to_string();
            let first = message.lines().next().unwrap_or_default();
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(Kind::Usage.exit_code());
        }
    };
    let outcome = match &cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Jags(args) => cmd_jags(args),
        Command::Render(args) => cmd_render(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error[{}]: {}", failure.kind, single_line(&failure.error));
            ExitCode::from(failure.kind.exit_code())
        }
    }
}
