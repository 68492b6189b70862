use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sdid::condense;
use sdid::diagram::{format, validate};
use sdid::generate::{self, Limits};
use sdid::mdp::{self, LabelledStagePolicy};
use sdid::vpi::{self, Cache, VpiQuery, VpiReport};
use sdid::{graph, oracle, transform, Error, InfluenceDiagram};

#[derive(Parser)]
#[command(name = "sdid", version, about = "Evaluate stepwise-decomposable influence diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a diagram and report decomposability and smoothness.
    Check { diagram: PathBuf },
    /// Write the smoothed diagram.
    Smooth {
        diagram: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the condensation of the (smoothed) diagram.
    Condense {
        diagram: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal value and policy of a diagram or condensation file.
    Eval { input: PathBuf },
    /// Value of observing `--c` before `--ds` and every later decision.
    Vpi {
        diagram: PathBuf,
        #[arg(long)]
        c: String,
        #[arg(long)]
        ds: String,
        /// Condensation file: read when present, written otherwise.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Many queries against one diagram, from a JSON list of {c, d_s}.
    VpiBatch {
        diagram: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Brute-force optimal value and policy.
    Oracle {
        diagram: PathBuf,
        #[arg(long, default_value_t = oracle::DEFAULT_CAP)]
        cap: u128,
    },
    /// Print a random smooth regular SDID.
    Generate {
        #[arg(long)]
        seed: u64,
        /// Generate a non-smooth SDID instead.
        #[arg(long)]
        non_smooth: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Tsv,
}

/// Failures split by exit code: 1 for the diagram or query, 2 for the
/// invocation or the filesystem.
enum Failure {
    Domain(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output types serialize");
    s.push('\n');
    s
}

/// Parses and validates a diagram file.
fn load(path: &Path) -> CliResult<InfluenceDiagram> {
    let d = format::parse(&read(path)?)?;
    let report = validate(&d);
    if !report.is_valid() {
        let lines: Vec<String> = report.violations.iter().map(ToString::to_string).collect();
        return Err(Failure::Domain(lines.join("\n")));
    }
    Ok(d)
}

fn check(path: &Path) -> CliResult<()> {
    let d = format::parse(&read(path)?)?;
    let report = validate(&d);
    if !report.is_valid() {
        for v in &report.violations {
            println!("invalid: {v}");
        }
        return Err(Failure::Domain(format!("{} violations", report.violations.len())));
    }
    println!("valid: {} nodes, {} arcs", d.len(), d.arcs().len());
    println!("{}", graph::verdict(&d)?);
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    value: f64,
    policy: Vec<LabelledStagePolicy>,
}

fn eval(path: &Path) -> CliResult<()> {
    let text = read(path)?;
    let is_condensation = serde_json::from_str::<serde_json::Value>(&text)
        .map(|v| v.get("stages").is_some())
        .unwrap_or(false);
    let c = if is_condensation {
        condense::from_json(&text)?
    } else {
        load(path)?;
        condense::condense(&transform::smooth(&format::parse(&text)?)?)?
    };
    let s = mdp::backward_induction(&c)?;
    print!(
        "{}",
        json(&Evaluation {
            value: s.value,
            policy: mdp::labelled(&c, &s.policy),
        })
    );
    Ok(())
}

fn oracle_cmd(path: &Path, cap: u128) -> CliResult<()> {
    let d = load(path)?;
    let (value, policy) = oracle::brute_force_optimal(&d, cap)?;
    print!(
        "{}",
        json(&Evaluation {
            value,
            policy: mdp::labelled_policy(&d, &policy),
        })
    );
    Ok(())
}

/// Cache seeded from `--cache` when the file exists; the file must hold the
/// condensation of this diagram.
fn open_cache(path: Option<&Path>, diagram: &InfluenceDiagram) -> CliResult<Cache> {
    let mut cache = Cache::new();
    if let Some(p) = path.filter(|p| p.exists()) {
        let c = condense::from_json(&read(p)?)?;
        if c.digest != condense::digest(&transform::smooth(diagram)?) {
            return Err(
                Error::ProvenanceMismatch(format!("{} was condensed from another diagram", p.display())).into(),
            );
        }
        cache.insert(c);
    }
    Ok(cache)
}

/// Writes the base condensation to `--cache` when the file does not exist.
fn store_cache(path: Option<&Path>, diagram: &InfluenceDiagram, cache: &Cache) -> CliResult<()> {
    let Some(p) = path.filter(|p| !p.exists()) else {
        return Ok(());
    };
    let digest = condense::digest(&transform::smooth(diagram)?);
    if let Some(c) = cache.get(&digest) {
        write(p, &condense::to_json(c))?;
    }
    Ok(())
}

fn print_reports(reports: &[VpiReport], format: OutputFormat, single: bool) {
    match format {
        OutputFormat::Json if single => print!("{}", json(&reports[0])),
        OutputFormat::Json => print!("{}", json(&reports)),
        OutputFormat::Tsv => {
            println!("{}", vpi::TSV_HEADER);
            for r in reports {
                println!("{}", vpi::tsv_row(r));
            }
        }
    }
}

fn vpi_cmd(
    path: &Path,
    queries: &[VpiQuery],
    cache_path: Option<&Path>,
    format: OutputFormat,
    single: bool,
) -> CliResult<()> {
    let d = load(path)?;
    let mut cache = open_cache(cache_path, &d)?;
    let reports = vpi::vpi_batch(&d, queries, &mut cache)
        .into_iter()
        .zip(queries)
        .map(|(r, q)| r.map_err(|e| Failure::Domain(format!("{}@{}: {e}", q.c, q.d_s))))
        .collect::<CliResult<Vec<_>>>()?;
    store_cache(cache_path, &d, &cache)?;
    print_reports(&reports, format, single);
    Ok(())
}

fn generate_cmd(seed: u64, non_smooth: bool) -> CliResult<()> {
    let limits = Limits::default();
    let diagram = if non_smooth {
        generate::non_smooth_sdid(seed, &limits)
    } else {
        generate::smooth_sdid(seed, &limits)
    };
    print!("{}", format::serialize(&diagram));
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Check { diagram } => check(&diagram),
        Command::Smooth { diagram, out } => {
            let s = transform::smooth(&load(&diagram)?)?;
            emit(out.as_deref(), &format::serialize(&s))
        }
        Command::Condense { diagram, out } => {
            let c = condense::condense(&transform::smooth(&load(&diagram)?)?)?;
            emit(out.as_deref(), &condense::to_json(&c))
        }
        Command::Eval { input } => eval(&input),
        Command::Vpi {
            diagram,
            c,
            ds,
            cache,
            format,
        } => vpi_cmd(&diagram, &[VpiQuery { c, d_s: ds }], cache.as_deref(), format, true),
        Command::VpiBatch {
            diagram,
            queries,
            cache,
            format,
        } => {
            let list: Vec<VpiQuery> = serde_json::from_str(&read(&queries)?)
                .map_err(|e| Failure::Usage(format!("{}: {e}", queries.display())))?;
            vpi_cmd(&diagram, &list, cache.as_deref(), format, false)
        }
        Command::Oracle { diagram, cap } => oracle_cmd(&diagram, cap),
        Command::Generate { seed, non_smooth } => generate_cmd(seed, non_smooth),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
