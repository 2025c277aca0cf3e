//! The `fairrisk` command-line front end.
//!
//! `train` writes one JSON [`RunArtifact`], `sweep` writes a CSV with one row
//! per CVaR level, and `axioms` runs a falsification suite and compares the
//! outcome against the measure's expectation table.
//!
//! Exit codes: 0 success, 2 bad flags or parameters, 3 ingestion failure,
//! 4 numerical failure, 5 an axiom outcome that differs from the table.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{self, CsvSchema, FeatureColumns, Scaler, SensitiveKind, SynthSpec};
use crate::error::{Error, Result};
use crate::inequality::{
    check_inequality_axiom, Deviation, InequalityAxiom, InequalityMeasure, InequalityReport,
};
use crate::metrics::{self, EvaluationReport};
use crate::optim::{self, TrainConfig, TrainReport};
use crate::riskvar::{
    check_axiom, expectation, sd_deviation, AggregatorSpec, FairnessAxiom, FalsificationReport,
};
use crate::subgroup::{
    partition, subgroup_risks, Dataset, LossSpec, PartitionMode, SensitiveValues,
};

/// Header of the CSV written by `sweep`.
pub const SWEEP_HEADER: &str =
    "alpha,risk,subgroup_gap,dp_violation,mean_difference,pairwise_disagreement";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INGESTION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_UNEXPECTED_AXIOM: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "fairrisk",
    version,
    about = "Fairness-aware training by subgroup risk aggregation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one linear classifier and write a JSON run artifact.
    Train(TrainArgs),
    /// Train one CVaR model per alpha and write a CSV of test metrics.
    Sweep(SweepArgs),
    /// Run the fairness or inequality axiom suite for a measure.
    Axioms(AxiomArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregatorFlag {
    Erm,
    Cvar,
    Sd,
    Topk,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum LossFlag {
    Hinge,
    SquaredHinge,
    Logistic,
    Linear,
}

impl From<LossFlag> for LossSpec {
    fn from(flag: LossFlag) -> Self {
        match flag {
            LossFlag::Hinge => LossSpec::Hinge,
            LossFlag::SquaredHinge => LossSpec::SquaredHinge,
            LossFlag::Logistic => LossSpec::Logistic,
            LossFlag::Linear => LossSpec::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensitiveKindFlag {
    Categorical,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Fairness,
    Inequality,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// `synth` for the built-in benchmark, otherwise a CSV path.
    #[arg(long, default_value = "synth")]
    pub data: String,
    #[arg(long, default_value = "label")]
    pub label_col: String,
    #[arg(long, default_value = "group")]
    pub sensitive_col: String,
    #[arg(long, default_value = "1")]
    pub positive_token: String,
    #[arg(long, value_enum, default_value_t = SensitiveKindFlag::Categorical)]
    pub sensitive_kind: SensitiveKindFlag,
    /// Leave the sensitive column out of the features.
    #[arg(long)]
    pub drop_sensitive: bool,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    #[arg(long, value_enum, default_value_t = LossFlag::SquaredHinge)]
    pub loss: LossFlag,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, value_enum, default_value_t = AggregatorFlag::Erm)]
    pub aggregator: AggregatorFlag,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AxiomArgs {
    /// `cvar:<alpha>`, `sd:<lambda>` or `expectation`.
    #[arg(long)]
    pub measure: String,
    #[arg(long, value_enum, default_value_t = Suite::Fairness)]
    pub suite: Suite,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DataSummary {
    pub source: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub stratified: bool,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub load_seconds: f64,
    pub train_seconds: f64,
    pub evaluate_seconds: f64,
}

/// Everything `train` reports. Only `timings` varies between identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunArtifact {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub train_fraction: f64,
    pub config: TrainConfig,
    pub data: DataSummary,
    pub scaler: Scaler,
    pub report: TrainReport,
    pub train_evaluation: EvaluationReport,
    pub test_evaluation: EvaluationReport,
    pub timings: Timings,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomOutcome<R> {
    pub expected_pass: bool,
    #[serde(flatten)]
    pub report: R,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomSuiteReport<R> {
    pub measure: String,
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    pub results: Vec<AxiomOutcome<R>>,
    pub unexpected: Vec<String>,
}

/// A measure accepted by `--measure`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureTag {
    Cvar(f64),
    Sd(f64),
    Expectation,
}

impl MeasureTag {
    pub fn parse(tag: &str) -> Result<Self> {
        let tag = tag.trim().to_ascii_lowercase();
        let number = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::param(format!("cannot parse '{s}' in measure tag")))
        };
        let parsed = match tag.split_once(':') {
            None if tag == "expectation" => MeasureTag::Expectation,
            Some(("cvar", a)) => MeasureTag::Cvar(number(a)?),
            Some(("sd", l)) => MeasureTag::Sd(number(l)?),
            _ => return Err(Error::param(format!("unknown measure '{tag}'"))),
        };
        parsed.aggregator().validate()?;
        Ok(parsed)
    }

    pub fn aggregator(self) -> AggregatorSpec {
        match self {
            MeasureTag::Cvar(alpha) => AggregatorSpec::Cvar { alpha },
            MeasureTag::Sd(lambda) => AggregatorSpec::SdPenalty { lambda },
            MeasureTag::Expectation => AggregatorSpec::Expectation,
        }
    }

    /// The inequality measure whose induced risk is this measure: the
    /// CVaR-induced measure, `lambda` times the coefficient of variation, or
    /// the zero measure.
    pub fn inequality_measure(self) -> InequalityMeasure {
        match self {
            MeasureTag::Cvar(alpha) => InequalityMeasure::CvarInduced { alpha },
            MeasureTag::Sd(lambda) if lambda > 0.0 => {
                InequalityMeasure::Induced(Deviation::custom(format!("{lambda}*sd"), move |z| {
                    lambda * sd_deviation(z)
                }))
            }
            _ => InequalityMeasure::Induced(Deviation::custom("zero", |_| 0.0)),
        }
    }

    /// Expected inequality-suite outcome. The CVaR-induced measure is
    /// Schur-convex without being strictly so, which also breaks Lorenz
    /// compatibility; the zero measure is not strictly Schur-convex and
    /// vanishes on unequal vectors.
    pub fn inequality_expected_to_hold(self, axiom: InequalityAxiom) -> bool {
        use InequalityAxiom::*;
        match self {
            MeasureTag::Cvar(_) => !matches!(axiom, I3 | I7),
            MeasureTag::Sd(lambda) if lambda > 0.0 => true,
            _ => !matches!(axiom, I3 | I5 | I7),
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Ingestion { .. } => EXIT_INGESTION,
        Error::Numerical { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing results to `--output` or `stdout`. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(&args, stdout).map(|_| EXIT_OK),
        Command::Sweep(args) => cmd_sweep(&args, stdout).map(|_| EXIT_OK),
        Command::Axioms(args) => cmd_axioms(&args, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fairrisk: {e}");
            exit_code(&e)
        }
    }
}

fn open_output<'a>(
    path: &Option<PathBuf>,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => {
            Box::new(io::BufWriter::new(File::create(p).map_err(|e| {
                Error::param(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(stdout),
    })
}

fn write_json<T: Serialize>(
    value: &T,
    path: &Option<PathBuf>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let mut out = open_output(path, stdout)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::param(format!("cannot write JSON: {e}")))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

struct Prepared {
    source: String,
    train: Dataset,
    test: Dataset,
    stratified: bool,
    scaler: Scaler,
    mode: PartitionMode,
}

fn prepare(args: &DataArgs) -> Result<Prepared> {
    let dataset = if args.data == "synth" {
        data::generate_synth(&SynthSpec {
            seed: args.seed,
            ..SynthSpec::default()
        })?
    } else {
        let schema = CsvSchema {
            label_column: args.label_col.clone(),
            sensitive_columns: args
                .sensitive_col
                .split(',')
                .map(|s| s.trim().to_string())
                .collect(),
            positive_label_token: args.positive_token.clone(),
            sensitive_kind: match args.sensitive_kind {
                SensitiveKindFlag::Categorical => SensitiveKind::Categorical,
                SensitiveKindFlag::Real => SensitiveKind::Real,
            },
            feature_columns: FeatureColumns::AllRemaining,
            include_sensitive_as_feature: !args.drop_sensitive,
        };
        data::load_csv(&args.data, &schema)?
    };
    let mode = match dataset.sensitive() {
        SensitiveValues::Categorical(_) => PartitionMode::Categorical,
        SensitiveValues::Real(_) => PartitionMode::PerInstance,
    };
    let split = data::split(&dataset, args.train_frac, args.seed)?;
    if !split.stratified {
        eprintln!("fairrisk: warning: a stratum has fewer than two rows; split is unstratified");
    }
    let (train, test, scaler) = data::standardize(&split.train, &split.test)?;
    Ok(Prepared {
        source: args.data.clone(),
        train,
        test,
        stratified: split.stratified,
        scaler,
        mode,
    })
}

fn base_config(
    optim: &OptimArgs,
    aggregator: AggregatorSpec,
    seed: u64,
    mode: PartitionMode,
) -> TrainConfig {
    TrainConfig {
        aggregator,
        loss: optim.loss.into(),
        l2_reg: optim.l2,
        epochs: optim.epochs,
        step_size: optim.lr,
        seed,
        partition_mode: mode,
        ..TrainConfig::default()
    }
}

fn eval_mode(config: &TrainConfig) -> PartitionMode {
    match config.aggregator {
        AggregatorSpec::TopK { .. } => PartitionMode::PerInstance,
        _ => config.partition_mode,
    }
}

pub fn cmd_train(args: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let aggregator = match args.aggregator {
        AggregatorFlag::Erm => AggregatorSpec::Expectation,
        AggregatorFlag::Cvar => AggregatorSpec::Cvar { alpha: args.alpha },
        AggregatorFlag::Sd => AggregatorSpec::SdPenalty {
            lambda: args.lambda,
        },
        AggregatorFlag::Topk => AggregatorSpec::TopK { k: args.k },
        AggregatorFlag::Max => AggregatorSpec::Max,
    };
    aggregator.validate()?;

    let start = Instant::now();
    let prepared = prepare(&args.data)?;
    let load_seconds = start.elapsed().as_secs_f64();

    let config = base_config(&args.optim, aggregator, args.data.seed, prepared.mode);
    let start = Instant::now();
    let report = optim::train(&config, &prepared.train)?;
    let train_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mode = eval_mode(&config);
    let loss = config.loss;
    let train_part = partition(&prepared.train, mode)?;
    let test_part = partition(&prepared.test, mode)?;
    let train_evaluation = metrics::evaluate(&report.model, &prepared.train, &train_part, loss)?;
    let test_evaluation = metrics::evaluate(&report.model, &prepared.test, &test_part, loss)?;
    let evaluate_seconds = start.elapsed().as_secs_f64();

    let artifact = RunArtifact {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: args.data.seed,
        train_fraction: args.data.train_frac,
        config,
        data: DataSummary {
            source: prepared.source,
            train_rows: prepared.train.n_rows(),
            test_rows: prepared.test.n_rows(),
            stratified: prepared.stratified,
            feature_names: prepared.train.feature_names().to_vec(),
        },
        scaler: prepared.scaler,
        report,
        train_evaluation,
        test_evaluation,
        timings: Timings {
            load_seconds,
            train_seconds,
            evaluate_seconds,
        },
    };
    write_json(&artifact, &args.output, stdout)
}

/// One sweep row, evaluated on the test split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub risk: f64,
    pub subgroup_gap: f64,
    pub dp_violation: f64,
    pub mean_difference: Option<f64>,
    pub pairwise_disagreement: Option<f64>,
}

fn sweep_row(alpha: f64, config: &TrainConfig, prepared: &Prepared) -> Result<SweepRow> {
    let report = optim::train(config, &prepared.train)?;
    let part = partition(&prepared.test, eval_mode(config))?;
    let risks = subgroup_risks(&report.model, &prepared.test, &part, config.loss)?;
    let eval = metrics::evaluate(&report.model, &prepared.test, &part, config.loss)?;
    Ok(SweepRow {
        alpha,
        risk: expectation(&risks),
        subgroup_gap: eval.subgroup_loss_gap,
        dp_violation: eval.dp_violation,
        mean_difference: eval.mean_difference,
        pairwise_disagreement: eval.pairwise_disagreement,
    })
}

/// Runs are concurrent, seeded `seed + index` in ascending alpha order, and
/// written in that order. A failed run stops the output after the rows that
/// precede it.
pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut alphas = args.alphas.clone();
    for &alpha in &alphas {
        AggregatorSpec::Cvar { alpha }.validate()?;
    }
    alphas.sort_by(f64::total_cmp);
    let prepared = prepare(&args.data)?;
    let results: Vec<Result<SweepRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = alphas
            .iter()
            .enumerate()
            .map(|(i, &alpha)| {
                let config = base_config(
                    &args.optim,
                    AggregatorSpec::Cvar { alpha },
                    args.data.seed + i as u64,
                    prepared.mode,
                );
                let prepared = &prepared;
                scope.spawn(move || sweep_row(alpha, &config, prepared))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut out = open_output(&args.output, stdout)?;
    writeln!(out, "{SWEEP_HEADER}")?;
    let optional = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for result in results {
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                out.flush()?;
                return Err(e);
            }
        };
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.alpha,
            row.risk,
            row.subgroup_gap,
            row.dp_violation,
            optional(row.mean_difference),
            optional(row.pairwise_disagreement)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Returns [`EXIT_UNEXPECTED_AXIOM`] when any outcome differs from the table.
pub fn cmd_axioms(args: &AxiomArgs, stdout: &mut dyn Write) -> Result<i32> {
    let tag = MeasureTag::parse(&args.measure)?;
    let unexpected;
    match args.suite {
        Suite::Fairness => {
            let aggregator = tag.aggregator();
            let results = FairnessAxiom::ALL
                .into_iter()
                .map(|axiom| {
                    Ok(AxiomOutcome {
                        expected_pass: axiom.expected_to_hold(&aggregator),
                        report: check_axiom(&aggregator, axiom, args.trials, args.seed)?,
                    })
                })
                .collect::<Result<Vec<AxiomOutcome<FalsificationReport>>>>()?;
            unexpected = mismatches(&results, |r| (&r.report.axiom, r.report.passed));
            write_json(
                &suite_report(args, results, unexpected.clone()),
                &args.output,
                stdout,
            )?;
        }
        Suite::Inequality => {
            let measure = tag.inequality_measure();
            let results = InequalityAxiom::CHECKABLE
                .into_iter()
                .map(|axiom| {
                    Ok(AxiomOutcome {
                        expected_pass: tag.inequality_expected_to_hold(axiom),
                        report: check_inequality_axiom(&measure, axiom, args.trials, args.seed)?,
                    })
                })
                .collect::<Result<Vec<AxiomOutcome<InequalityReport>>>>()?;
            unexpected = mismatches(&results, |r| (&r.report.axiom, r.report.passed));
            write_json(
                &suite_report(args, results, unexpected.clone()),
                &args.output,
                stdout,
            )?;
        }
    }
    if unexpected.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "fairrisk: unexpected axiom outcomes: {}",
            unexpected.join(", ")
        );
        Ok(EXIT_UNEXPECTED_AXIOM)
    }
}

fn mismatches<R>(
    results: &[AxiomOutcome<R>],
    key: impl Fn(&AxiomOutcome<R>) -> (&String, bool),
) -> Vec<String> {
    results
        .iter()
        .filter_map(|r| {
            let (name, passed) = key(r);
            (passed != r.expected_pass).then(|| name.clone())
        })
        .collect()
}

fn suite_report<R>(
    args: &AxiomArgs,
    results: Vec<AxiomOutcome<R>>,
    unexpected: Vec<String>,
) -> AxiomSuiteReport<R> {
    AxiomSuiteReport {
        measure: args.measure.clone(),
        suite: match args.suite {
            Suite::Fairness => "fairness".into(),
            Suite::Inequality => "inequality".into(),
        },
        trials: args.trials,
        seed: args.seed,
        results,
        unexpected,
    }
}
