//! Command-line driver.
//!
//! [`run`] takes the argument list and a reader standing in for stdin and
//! returns the exit code with everything that would be written to stdout
//! and stderr, so the whole CLI is testable in-process. Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | usage error                               |
//! | 2    | data or parse error                       |
//! | 3    | fit failure (insufficient/degenerate data) |
//!
//! Every failure writes a single `error: ...` line to stderr.

use std::fmt::Write as _;
use std::io::Read;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analytics::{self, AnalyticsError};
use crate::corpus::{self, CorpusError, Format, RankKey, RatingSnapshot};
use crate::plotio::{self, PlotSpec};
use crate::powerfit::{self, FitError, PowerLawFit, Relation};
use crate::relation::{self, RelationError};
use crate::synth::{self, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FIT: i32 = 3;

/// Fits with fewer points than this get a warning on stderr.
pub const LOW_CONFIDENCE_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ols,
    Mle,
}

#[derive(Debug, Parser)]
#[command(
    name = "ratelaw",
    version,
    about = "Power-law analysis of website rating snapshots"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Snapshot file (CSV, TSV or JSON); `-` reads stdin
    #[arg(long, global = true, value_name = "PATH")]
    pub input: Option<String>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,

    /// Column the input rating is sorted by (delimited input only)
    #[arg(long, global = true, value_enum, default_value_t = RankKey::Hosts)]
    pub rank_key: RankKey,

    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Ols)]
    pub method: MethodArg,

    /// |z-score| above which a site is flagged
    #[arg(long, global = true, default_value_t = analytics::DEFAULT_THRESHOLD)]
    pub threshold: f64,

    /// Maximum |gamma - 1| still reported as a linear hits-vs-hosts regime
    #[arg(long, global = true, default_value_t = relation::DEFAULT_LINEARITY_TOL)]
    pub linearity_tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one power law
    Fit {
        #[arg(long, value_enum, default_value_t = Relation::HostsVsRank)]
        relation: Relation,
        /// Lower cutoff for `--method mle` (defaults to the smallest positive value)
        #[arg(long)]
        x_min: Option<f64>,
    },
    /// Fit both rank laws, derive hits-vs-hosts and compare with the direct fit
    Relation,
    /// Flag sites deviating from a fitted law
    Anomalies {
        #[arg(long, value_enum, default_value_t = Relation::HitsVsHosts)]
        relation: Relation,
    },
    /// Predict from a law fitted to the input
    Predict(PredictArgs),
    /// Generate a synthetic snapshot (from flags, or a JSON spec via --input)
    Synth(SynthArgs),
    /// Log-log plot of one relation as SVG (or TSV with --table)
    Plot {
        #[arg(long, value_enum, default_value_t = Relation::HostsVsRank)]
        relation: Relation,
        #[arg(long)]
        table: bool,
        #[arg(long)]
        no_fit: bool,
    },
    /// Re-sort the rating by another column and reassign ranks
    Rerank {
        #[arg(long, value_enum)]
        by: RankKey,
    },
    /// Pages per host (hits / hosts) per site and in aggregate
    Pages,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["hosts", "rank", "value"])))]
pub struct PredictArgs {
    /// Expected hits for this many hosts
    #[arg(long)]
    pub hosts: Option<f64>,
    /// Value of a rank law at this rank
    #[arg(long)]
    pub rank: Option<f64>,
    /// Rank at which a rank law reaches this value
    #[arg(long)]
    pub value: Option<f64>,
    /// Rank law for --rank/--value
    #[arg(long, value_enum, default_value_t = Relation::HostsVsRank)]
    pub relation: Relation,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    pub n: u32,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100.0)]
    pub ch: f64,
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub cs: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub integerize: bool,
}

impl SynthArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            n_sites: self.n,
            alpha: self.alpha,
            c_h: self.ch,
            beta: self.beta,
            c_s: self.cs,
            noise_sigma: self.sigma,
            integerize: self.integerize,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::data(e.to_string())
    }
}

fn fit_error(relation: Relation, e: FitError) -> CliError {
    let code = match e {
        FitError::InvalidXMin(_) => EXIT_USAGE,
        _ => EXIT_FIT,
    };
    CliError {
        code,
        message: format!("{relation} fit failed: {e}"),
    }
}

impl From<RelationError> for CliError {
    fn from(e: RelationError) -> Self {
        match e {
            RelationError::Fit { relation, source } => fit_error(relation, source),
            RelationError::ZeroAlpha => CliError {
                code: EXIT_FIT,
                message: e.to_string(),
            },
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::UndefinedAggregate => CliError::data(e.to_string()),
            AnalyticsError::NonInvertible => CliError {
                code: EXIT_FIT,
                message: e.to_string(),
            },
            _ => CliError::usage(e.to_string()),
        }
    }
}

/// Parses `args` (program name first) and executes the command.
pub fn run<I, T>(args: I, stdin: &mut dyn Read) -> RunOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => RunOutput {
                    code: EXIT_OK,
                    stdout: rendered,
                    stderr: String::new(),
                },
                _ => {
                    let first = rendered.lines().next().unwrap_or("invalid arguments");
                    let reason = first.strip_prefix("error: ").unwrap_or(first);
                    RunOutput {
                        code: EXIT_USAGE,
                        stdout: String::new(),
                        stderr: format!("error: {reason}\n"),
                    }
                }
            };
        }
    };
    let mut warnings = Vec::new();
    let result = read_input(&config, stdin)
        .and_then(|input| execute(&config, input.as_deref(), &mut warnings));
    let mut stderr = String::new();
    for w in &warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    match result {
        Ok(stdout) => RunOutput {
            code: EXIT_OK,
            stdout,
            stderr,
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message.replace('\n', " "));
            RunOutput {
                code: e.code,
                stdout: String::new(),
                stderr,
            }
        }
    }
}

fn read_input(config: &RunConfig, stdin: &mut dyn Read) -> Result<Option<String>, CliError> {
    let Some(path) = config.input.as_deref() else {
        return Ok(None);
    };
    if path.is_empty() {
        return Err(CliError::usage("--input must not be empty"));
    }
    let mut text = String::new();
    if path == "-" {
        stdin
            .read_to_string(&mut text)
            .map_err(|e| CliError::data(format!("cannot read stdin: {e}")))?;
    } else {
        text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read {path}: {e}")))?;
    }
    Ok(Some(text))
}

/// Reads a snapshot from JSON (first non-blank character `{`), TSV (header
/// contains a tab) or CSV.
pub fn load_snapshot(text: &str, rank_key: RankKey) -> Result<RatingSnapshot, CorpusError> {
    let trimmed = text.trim_start_matches('\u{feff}').trim_start();
    if trimmed.starts_with('{') {
        return RatingSnapshot::from_json(trimmed);
    }
    let header = trimmed.lines().next().unwrap_or("");
    let format = if header.contains('\t') {
        Format::Tsv
    } else {
        Format::Csv
    };
    corpus::parse_snapshot(trimmed, format, rank_key)
}

fn require_snapshot(config: &RunConfig, input: Option<&str>) -> Result<RatingSnapshot, CliError> {
    let text = input.ok_or_else(|| {
        CliError::usage("this command needs --input PATH (or --input - for stdin)")
    })?;
    Ok(load_snapshot(text, config.rank_key)?)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn ols_fit(
    snapshot: &RatingSnapshot,
    relation: Relation,
    warnings: &mut Vec<String>,
) -> Result<PowerLawFit, CliError> {
    let fit = powerfit::fit_relation(snapshot, relation).map_err(|e| fit_error(relation, e))?;
    note_low_confidence(&fit, warnings);
    Ok(fit)
}

fn note_low_confidence(fit: &PowerLawFit, warnings: &mut Vec<String>) {
    if fit.n_used < LOW_CONFIDENCE_N {
        warnings.push(format!(
            "{} fit uses only {} points; low confidence",
            fit.relation, fit.n_used
        ));
    }
}

fn check_positive(name: &str, value: f64) -> Result<(), CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "--{name} must be positive, got {value}"
        )))
    }
}

/// Executes a parsed command against already-read input text.
pub fn execute(
    config: &RunConfig,
    input: Option<&str>,
    warnings: &mut Vec<String>,
) -> Result<String, CliError> {
    check_positive("threshold", config.threshold)?;
    check_positive("linearity-tol", config.linearity_tol)?;
    let json = config.format == OutputFormat::Json;

    match &config.command {
        Command::Fit { relation, x_min } => {
            let snapshot = require_snapshot(config, input)?;
            let fit = match config.method {
                MethodArg::Ols => ols_fit(&snapshot, *relation, warnings)?,
                MethodArg::Mle => {
                    if !relation.is_rank_relation() {
                        return Err(CliError::usage(
                            "--method mle fits the hosts or hits value distribution; use a rank relation",
                        ));
                    }
                    let values: Vec<f64> = powerfit::relation_pairs(&snapshot, *relation)
                        .into_iter()
                        .map(|p| p.1)
                        .collect();
                    let x_min = match x_min {
                        Some(v) => *v,
                        None => values
                            .iter()
                            .copied()
                            .filter(|&v| v > 0.0)
                            .fold(f64::INFINITY, f64::min),
                    };
                    if !x_min.is_finite() {
                        return Err(fit_error(
                            *relation,
                            FitError::InsufficientData { usable: 0 },
                        ));
                    }
                    let fit = powerfit::fit_mle_tail(&values, x_min, *relation)
                        .map_err(|e| fit_error(*relation, e))?;
                    note_low_confidence(&fit, warnings);
                    fit
                }
            };
            Ok(if json { to_json(&fit) } else { fit_text(&fit) })
        }
        Command::Relation => {
            let snapshot = require_snapshot(config, input)?;
            let host = ols_fit(&snapshot, Relation::HostsVsRank, warnings)?;
            let hit = ols_fit(&snapshot, Relation::HitsVsRank, warnings)?;
            let direct = ols_fit(&snapshot, Relation::HitsVsHosts, warnings)?;
            let derived = relation::derive_relation(&host, &hit, &direct, config.linearity_tol)?;
            if json {
                return Ok(to_json(&derived));
            }
            let mut s = String::new();
            let _ = writeln!(s, "alpha              {}", derived.alpha);
            let _ = writeln!(s, "beta               {}", derived.beta);
            let _ = writeln!(s, "gamma_derived      {}", derived.gamma_derived);
            let _ = writeln!(s, "prefactor_derived  {}", derived.prefactor_derived);
            let _ = writeln!(s, "gamma_direct       {}", derived.gamma_direct);
            let _ = writeln!(s, "prefactor_direct   {}", derived.prefactor_direct);
            let _ = writeln!(s, "gamma_discrepancy  {}", derived.gamma_discrepancy);
            let _ = writeln!(s, "linear_regime      {}", derived.linear_regime);
            let _ = writeln!(
                s,
                "r_squared          hosts_vs_rank={} hits_vs_rank={} hits_vs_hosts={}",
                host.r_squared, hit.r_squared, direct.r_squared
            );
            Ok(s)
        }
        Command::Anomalies { relation } => {
            let snapshot = require_snapshot(config, input)?;
            let fit = ols_fit(&snapshot, *relation, warnings)?;
            let report = analytics::score_anomalies(&snapshot, &fit, config.threshold)?;
            if json {
                return Ok(to_json(&report));
            }
            let mut s = String::new();
            let _ = writeln!(
                s,
                "relation {}  residual_std {}  threshold {}",
                report.relation, report.residual_std, report.threshold
            );
            let _ = writeln!(
                s,
                "rank\tobserved\tpredicted\tlog_residual\tzscore\tflag\tlabel"
            );
            for p in &report.per_site {
                let flag = if report.flagged.contains(&p.rank) {
                    "*"
                } else {
                    ""
                };
                let _ = writeln!(
                    s,
                    "{}\t{}\t{:.6}\t{:.6}\t{:.4}\t{}\t{}",
                    p.rank, p.observed, p.predicted, p.log_residual, p.zscore, flag, p.label
                );
            }
            let flagged: Vec<String> = report.flagged.iter().map(u32::to_string).collect();
            let _ = writeln!(
                s,
                "flagged: {}",
                if flagged.is_empty() {
                    "none".into()
                } else {
                    flagged.join(",")
                }
            );
            Ok(s)
        }
        Command::Predict(args) => {
            let snapshot = require_snapshot(config, input)?;
            #[derive(Serialize)]
            struct Prediction<'a> {
                relation: Relation,
                query: &'a str,
                input: f64,
                predicted: f64,
            }
            let (relation, query, input, predicted) = if let Some(hosts) = args.hosts {
                let fit = ols_fit(&snapshot, Relation::HitsVsHosts, warnings)?;
                (
                    fit.relation,
                    "hits_at_hosts",
                    hosts,
                    analytics::predict_hits(hosts, &fit)?,
                )
            } else {
                if !args.relation.is_rank_relation() {
                    return Err(CliError::usage("--rank/--value need a rank relation"));
                }
                let fit = ols_fit(&snapshot, args.relation, warnings)?;
                match (args.rank, args.value) {
                    (Some(rank), _) => (
                        fit.relation,
                        "value_at_rank",
                        rank,
                        analytics::predict_by_rank(rank, &fit)?,
                    ),
                    (_, Some(value)) => (
                        fit.relation,
                        "rank_at_value",
                        value,
                        analytics::invert_rank(value, &fit)?,
                    ),
                    _ => unreachable!("clap requires one target"),
                }
            };
            let p = Prediction {
                relation,
                query,
                input,
                predicted,
            };
            Ok(if json {
                to_json(&p)
            } else {
                format!(
                    "{} {} {} -> {}\n",
                    p.relation, p.query, p.input, p.predicted
                )
            })
        }
        Command::Synth(args) => {
            let spec = match input {
                Some(text) => serde_json::from_str::<SynthSpec>(text)
                    .map_err(|e| CliError::data(format!("invalid synth spec JSON: {e}")))?,
                None => args.spec(),
            };
            let snapshot = synth::generate(&spec).map_err(|e| CliError::usage(e.to_string()))?;
            Ok(if json {
                with_newline(snapshot.to_json())
            } else {
                snapshot.to_delimited(Format::Csv)
            })
        }
        Command::Plot {
            relation,
            table,
            no_fit,
        } => {
            let snapshot = require_snapshot(config, input)?;
            let fit = if *no_fit {
                None
            } else {
                Some(ols_fit(&snapshot, *relation, warnings)?)
            };
            let spec = PlotSpec::for_relation(&snapshot, *relation, fit.as_ref());
            let out = if *table {
                plotio::emit_table(&spec)
            } else {
                plotio::render_svg(&spec)
            };
            out.map_err(|e| CliError::data(e.to_string()))
        }
        Command::Rerank { by } => {
            let snapshot = require_snapshot(config, input)?.rerank(*by);
            Ok(if json {
                with_newline(snapshot.to_json())
            } else {
                snapshot.to_delimited(Format::Csv)
            })
        }
        Command::Pages => {
            let snapshot = require_snapshot(config, input)?;
            let pages = analytics::pages_per_host(&snapshot)?;
            if json {
                return Ok(to_json(&pages));
            }
            let mut s = String::from("rank\ts_over_h\n");
            for (rank, ratio) in &pages.per_site {
                let ratio = ratio
                    .map(|r| r.to_string())
                    .unwrap_or_else(|| "undefined".into());
                let _ = writeln!(s, "{rank}\t{ratio}");
            }
            let _ = writeln!(
                s,
                "aggregate\t{}\t({} hits / {} hosts)",
                pages.aggregate, pages.total_hits, pages.total_hosts
            );
            Ok(s)
        }
    }
}

fn with_newline(mut s: String) -> String {
    s.push('\n');
    s
}

fn fit_text(fit: &PowerLawFit) -> String {
    let method = match fit.method {
        powerfit::FitMethod::LoglogOls => "loglog_ols",
        powerfit::FitMethod::MleTail => "mle_tail",
    };
    let mut s = String::new();
    let _ = writeln!(s, "relation         {}", fit.relation);
    let _ = writeln!(s, "method           {method}");
    let _ = writeln!(s, "exponent         {}", fit.exponent);
    let _ = writeln!(s, "prefactor        {}", fit.prefactor);
    let _ = writeln!(s, "exponent_stderr  {}", fit.exponent_stderr);
    let _ = writeln!(s, "r_squared        {}", fit.r_squared);
    let _ = writeln!(s, "n_used           {}", fit.n_used);
    let _ = writeln!(s, "n_excluded       {}", fit.n_excluded);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::FIG1;

    fn run_with(args: &[&str], stdin: &str) -> RunOutput {
        let mut argv = vec!["ratelaw"];
        argv.extend_from_slice(args);
        run(argv, &mut stdin.as_bytes())
    }

    #[test]
    fn fit_json_from_stdin() {
        let out = run_with(
            &[
                "fit",
                "--relation",
                "hosts-vs-rank",
                "--format",
                "json",
                "--input",
                "-",
            ],
            FIG1,
        );
        assert_eq!(out.code, 0, "{}", out.stderr);
        let fit: PowerLawFit = serde_json::from_str(&out.stdout).unwrap();
        assert!((fit.exponent + 1.1606301133555266).abs() < 1e-9);
        assert!(out.stderr.is_empty());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_with(&["fit"], "").code, EXIT_USAGE);
        assert_eq!(run_with(&["bogus"], "").code, EXIT_USAGE);
        assert_eq!(
            run_with(&["fit", "--input", "-", "--threshold", "-1"], FIG1).code,
            EXIT_USAGE
        );
        assert_eq!(
            run_with(&["fit", "--input", "-"], "rank,label,hosts,hits\n1,a,x,1\n").code,
            EXIT_DATA
        );
        assert_eq!(
            run_with(&["fit", "--input", "/nonexistent/file.csv"], "").code,
            EXIT_DATA
        );
        let zero = "rank,label,hosts,hits\n1,a,0,5\n2,b,0,3\n";
        let out = run_with(&["fit", "--input", "-"], zero);
        assert_eq!(out.code, EXIT_FIT);
        assert!(out.stderr.starts_with("error: hosts_vs_rank fit failed"));
        assert_eq!(out.stderr.lines().count(), 1);
    }

    #[test]
    fn help_is_success() {
        let out = run_with(&["--help"], "");
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("relation"));
    }

    #[test]
    fn low_confidence_warning_keeps_exit_zero() {
        let small = "rank,label,hosts,hits\n1,a,9,50\n2,b,5,20\n3,c,2,9\n";
        let out = run_with(&["fit", "--input", "-"], small);
        assert_eq!(out.code, 0);
        assert!(out
            .stderr
            .starts_with("warning: hosts_vs_rank fit uses only 3 points"));
    }

    #[test]
    fn load_snapshot_detects_format() {
        let csv = load_snapshot(FIG1, RankKey::Hosts).unwrap();
        let tsv = load_snapshot(&csv.to_delimited(Format::Tsv), RankKey::Hosts).unwrap();
        let json = load_snapshot(&csv.to_json(), RankKey::Hits).unwrap();
        assert_eq!(csv, tsv);
        assert_eq!(csv, json);
    }

    #[test]
    fn mle_method() {
        let out = run_with(
            &[
                "fit",
                "--method",
                "mle",
                "--relation",
                "hits-vs-rank",
                "--format",
                "json",
                "--input",
                "-",
            ],
            FIG1,
        );
        assert_eq!(out.code, 0, "{}", out.stderr);
        let fit: PowerLawFit = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(fit.method, powerfit::FitMethod::MleTail);
        let values: Vec<f64> = [
            9045.0, 1371.0, 174.0, 198.0, 402.0, 202.0, 82.0, 57.0, 51.0, 45.0,
        ]
        .to_vec();
        let expected = 1.0 + 10.0 / values.iter().map(|v| (v / 45.0f64).ln()).sum::<f64>();
        assert!((fit.exponent - expected).abs() < 1e-12);
        assert_eq!(
            run_with(
                &[
                    "fit",
                    "--method",
                    "mle",
                    "--relation",
                    "hits-vs-hosts",
                    "--input",
                    "-"
                ],
                FIG1
            )
            .code,
            EXIT_USAGE
        );
    }

    #[test]
    fn predict_paths() {
        let out = run_with(&["predict", "--hosts", "290", "--input", "-"], FIG1);
        assert_eq!(out.code, 0, "{}", out.stderr);
        assert!(out
            .stdout
            .starts_with("hits_vs_hosts hits_at_hosts 290 -> 2696.07"));
        let out = run_with(&["predict", "--hosts", "0", "--input", "-"], FIG1);
        assert_eq!(out.code, EXIT_USAGE);
        let out = run_with(&["predict", "--input", "-"], FIG1);
        assert_eq!(out.code, EXIT_USAGE);
    }
}
