//! Command-line surface: classify episodes, decompose accuracy grids, run
//! the numerical verification suite, and run the prediction-consistency
//! experiment.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/validation error,
//! 3 numerical failure. Every run is reproducible from its printed config
//! echo; all output is deterministic given the flags.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use shotmetric::frn::{self, PropertyCheck};
use shotmetric::sensitivity::{decompose, gain_table, AccuracyGrid};
use shotmetric::synth::{consistency_rate, ClusterSpec};
use shotmetric::{classify, predict, Episode, FrnRegularizer, Head, HeadConfig};

#[derive(Parser)]
#[command(
    name = "shotmetric",
    version,
    about = "Metric few-shot classifier heads and shot-sensitivity analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify an episode JSON file with a chosen head.
    Classify(ClassifyArgs),
    /// Decompose accuracy-grid CSVs into sensitivity reports and scores.
    Sensitivity(SensitivityArgs),
    /// Run the reconstruction verification suite (branch agreement,
    /// expansion identity, invariances).
    Verify(VerifyArgs),
    /// Measure prediction consistency under support resampling for the
    /// Euclidean and cosine prototype heads.
    Consistency(ConsistencyArgs),
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("value must be positive, got {s}"))
    }
}

fn parse_count(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("'{s}' is not a count"))?;
    if v >= 1 {
        Ok(v)
    } else {
        Err("count must be at least 1".into())
    }
}

fn parse_head(s: &str) -> Result<Head, String> {
    s.parse().map_err(|e: shotmetric::Error| e.to_string())
}

fn parse_regularizer(s: &str) -> Result<FrnRegularizer, String> {
    s.parse().map_err(|e: shotmetric::Error| e.to_string())
}

#[derive(Args)]
struct ClassifyArgs {
    /// Episode JSON file.
    episode: PathBuf,
    /// Head: proto_euclidean, proto_cosine, frn_full, frn_simplified, frn_cosine.
    #[arg(long, default_value = "proto_euclidean", value_parser = parse_head)]
    head: Head,
    /// Temperature sigma.
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    sigma: f64,
    /// Ridge weight lambda for reconstruction heads.
    #[arg(long, default_value_t = 0.5, value_parser = parse_positive)]
    lambda: f64,
    /// Ridge parameterization: frobenius or legacy.
    #[arg(long, default_value = "frobenius", value_parser = parse_regularizer)]
    regularizer: FrnRegularizer,
    /// Write the predictions JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the predictions JSON to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Accuracy-grid CSV files.
    grids: Vec<PathBuf>,
    /// A Euclidean grid and its cosine counterpart; adds the per-test-shot
    /// gain table.
    #[arg(long, num_args = 2, value_names = ["EUCLIDEAN", "COSINE"])]
    pair: Option<Vec<PathBuf>>,
    /// Directory for report CSVs (default: next to each input).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a machine-readable summary to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Random instances per property.
    #[arg(long, default_value_t = 1000, value_parser = parse_count)]
    trials: usize,
    /// Base seed for instance generation.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Additionally report this regularizer's invariances (informational;
    /// the exit code reflects only the frobenius suite).
    #[arg(long, value_parser = parse_regularizer)]
    regularizer: Option<FrnRegularizer>,
    /// Print a machine-readable report to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ConsistencyArgs {
    /// Cluster spec JSON file.
    spec: PathBuf,
    /// Support examples per class.
    #[arg(long, default_value_t = 1, value_parser = parse_count)]
    shot: usize,
    /// Query examples per class.
    #[arg(long, default_value_t = 15, value_parser = parse_count)]
    queries: usize,
    /// Number of resampling trials.
    #[arg(long, default_value_t = 1000, value_parser = parse_count)]
    trials: usize,
    /// Seed for all trial streams.
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Print a machine-readable report to stdout.
    #[arg(long)]
    json: bool,
}

enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<shotmetric::Error> for CliError {
    fn from(e: shotmetric::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn configure_threads() -> Result<(), CliError> {
    match std::env::var("SHOTMETRIC_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                CliError::Usage(format!("SHOTMETRIC_THREADS must be a number, got '{raw}'"))
            })?;
            if n > 0 {
                // 0 means auto; leave the default pool alone.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Classify(args) => run_classify(args),
        Command::Sensitivity(args) => run_sensitivity(args),
        Command::Verify(args) => run_verify(args),
        Command::Consistency(args) => run_consistency(args),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

#[derive(Serialize)]
struct ClassifyConfigDoc {
    episode: String,
    head: String,
    sigma: f64,
    lambda: f64,
    regularizer: String,
    zero_norm_eps: f64,
}

#[derive(Serialize)]
struct PredictionDoc {
    query: usize,
    class_index: usize,
    class_id: String,
    probabilities: Vec<f64>,
    logits: Vec<f64>,
}

#[derive(Serialize)]
struct ClassifyDoc {
    config: ClassifyConfigDoc,
    predictions: Vec<PredictionDoc>,
}

fn run_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let episode = Episode::from_json(&read_file(&args.episode)?)?;
    let config = HeadConfig::new(args.head)
        .with_temperature(args.sigma)
        .with_lambda(args.lambda)
        .with_regularizer(args.regularizer);
    let logits = classify(&episode, &config)?;
    let predictions = predict(&logits);

    let doc = ClassifyDoc {
        config: ClassifyConfigDoc {
            episode: args.episode.display().to_string(),
            head: config.head.name().to_string(),
            sigma: config.temperature,
            lambda: config.frn_lambda,
            regularizer: config.frn_regularizer.name().to_string(),
            zero_norm_eps: config.zero_norm_eps,
        },
        predictions: predictions
            .iter()
            .enumerate()
            .map(|(q, p)| PredictionDoc {
                query: q,
                class_index: p.class_index,
                class_id: p.class_id.clone(),
                probabilities: p.probabilities.clone(),
                logits: logits.scores().row(q).iter().copied().collect(),
            })
            .collect(),
    };
    let rendered = serde_json::to_string_pretty(&doc).expect("serialization cannot fail");

    if let Some(out) = &args.out {
        write_file(out, &rendered)?;
    }
    if args.json {
        println!("{rendered}");
        return Ok(());
    }
    println!(
        "classify: episode={} head={} sigma={} lambda={} regularizer={} zero_norm_eps={:e}",
        args.episode.display(),
        config.head,
        config.temperature,
        config.frn_lambda,
        config.frn_regularizer,
        config.zero_norm_eps,
    );
    for p in &doc.predictions {
        let probs: Vec<String> = p.probabilities.iter().map(|v| format!("{v:.4}")).collect();
        println!(
            "query {}: class={} index={} probs=[{}]",
            p.query,
            p.class_id,
            p.class_index,
            probs.join(", ")
        );
    }
    if let Some(out) = &args.out {
        println!("wrote {}", out.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportDoc {
    label: String,
    input: String,
    output: String,
    score: f64,
}

#[derive(Serialize)]
struct GainsDoc {
    test_shots: Vec<u32>,
    gains: Vec<f64>,
}

#[derive(Serialize)]
struct SensitivityDoc {
    reports: Vec<ReportDoc>,
    gains: Option<GainsDoc>,
}

fn grid_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn report_path(input: &Path, out_dir: &Option<PathBuf>) -> PathBuf {
    let name = format!("{}.report.csv", grid_label(input));
    match out_dir {
        Some(dir) => dir.join(name),
        None => input.with_file_name(name),
    }
}

fn run_sensitivity(args: SensitivityArgs) -> Result<(), CliError> {
    let mut inputs: Vec<PathBuf> = args.grids.clone();
    if let Some(pair) = &args.pair {
        inputs.extend(pair.iter().cloned());
    }
    if inputs.is_empty() {
        return Err(CliError::Usage(
            "no input grids; pass CSV paths or --pair".into(),
        ));
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }

    let mut doc = SensitivityDoc {
        reports: Vec::new(),
        gains: None,
    };
    for input in &inputs {
        let grid = AccuracyGrid::from_csv(&read_file(input)?, grid_label(input))?;
        let report = decompose(&grid);
        let output = report_path(input, &args.out);
        write_file(&output, &report.to_csv())?;
        doc.reports.push(ReportDoc {
            label: grid.label().to_string(),
            input: input.display().to_string(),
            output: output.display().to_string(),
            score: report.score,
        });
    }
    if let Some(pair) = &args.pair {
        let euclidean = AccuracyGrid::from_csv(&read_file(&pair[0])?, grid_label(&pair[0]))?;
        let cosine = AccuracyGrid::from_csv(&read_file(&pair[1])?, grid_label(&pair[1]))?;
        let gains = gain_table(&euclidean, &cosine)?;
        doc.gains = Some(GainsDoc {
            test_shots: euclidean.test_shots().to_vec(),
            gains,
        });
    }

    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("serialization cannot fail")
        );
        return Ok(());
    }
    for report in &doc.reports {
        println!("score = {:.2} ({})", report.score, report.label);
        println!("wrote {}", report.output);
    }
    if let Some(gains) = &doc.gains {
        println!("gains (cosine - euclidean) by test shot:");
        for (shot, gain) in gains.test_shots.iter().zip(&gains.gains) {
            println!("  test_shot {shot}: {gain:+.2}");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckDoc {
    name: String,
    passed: bool,
    worst_deviation: f64,
    tolerance: f64,
    informational: bool,
}

#[derive(Serialize)]
struct VerifyDoc {
    trials: usize,
    seed: u64,
    checks: Vec<CheckDoc>,
    passed: bool,
}

fn check_doc(name: &str, check: PropertyCheck, informational: bool) -> CheckDoc {
    CheckDoc {
        name: name.to_string(),
        passed: check.passed,
        worst_deviation: check.worst_deviation,
        tolerance: check.tolerance,
        informational,
    }
}

fn run_verify(args: VerifyArgs) -> Result<(), CliError> {
    let mut checks = vec![
        check_doc(
            "branch agreement",
            frn::check_branch_agreement(args.trials, args.seed),
            false,
        ),
        check_doc(
            "expansion identity",
            frn::check_expansion_identity(args.trials, args.seed),
            false,
        ),
    ];
    let invariances = frn::check_invariances(args.trials, args.seed);
    checks.push(check_doc(
        "shot invariance",
        invariances.shot_invariance,
        false,
    ));
    checks.push(check_doc(
        "scale equivariance",
        invariances.scale_equivariance,
        false,
    ));
    checks.push(check_doc(
        "dimension equivariance",
        invariances.dimension_equivariance,
        false,
    ));
    if let Some(regularizer) = args.regularizer {
        let extra = frn::check_invariances_with(regularizer, args.trials, args.seed);
        let prefix = regularizer.name();
        checks.push(check_doc(
            &format!("{prefix} shot invariance"),
            extra.shot_invariance,
            true,
        ));
        checks.push(check_doc(
            &format!("{prefix} scale equivariance"),
            extra.scale_equivariance,
            true,
        ));
        checks.push(check_doc(
            &format!("{prefix} dimension equivariance"),
            extra.dimension_equivariance,
            true,
        ));
    }
    let passed = checks.iter().filter(|c| !c.informational).all(|c| c.passed);
    let doc = VerifyDoc {
        trials: args.trials,
        seed: args.seed,
        checks,
        passed,
    };

    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("serialization cannot fail")
        );
    } else {
        println!("verify: trials={} seed={}", doc.trials, doc.seed);
        for c in &doc.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let note = if c.informational {
                "  (informational)"
            } else {
                ""
            };
            println!(
                "{:<28} {}  worst {:.2e}  tol {:.0e}{}",
                c.name, status, c.worst_deviation, c.tolerance, note
            );
        }
        println!("result: {}", if doc.passed { "PASS" } else { "FAIL" });
    }
    if doc.passed {
        Ok(())
    } else {
        Err(CliError::Numerical("verification suite failed".into()))
    }
}

#[derive(Serialize)]
struct ConsistencyConfigDoc {
    spec: String,
    shot: usize,
    queries: usize,
    trials: usize,
    seed: u64,
}

#[derive(Serialize)]
struct ConsistencyDoc {
    config: ConsistencyConfigDoc,
    euclidean: f64,
    cosine: f64,
    difference: f64,
}

fn run_consistency(args: ConsistencyArgs) -> Result<(), CliError> {
    let spec = ClusterSpec::from_json(&read_file(&args.spec)?)?;
    let euclidean = consistency_rate(
        &spec,
        &HeadConfig::new(Head::ProtoEuclidean),
        args.shot,
        args.queries,
        args.trials,
        args.seed,
    )?;
    let cosine = consistency_rate(
        &spec,
        &HeadConfig::new(Head::ProtoCosine),
        args.shot,
        args.queries,
        args.trials,
        args.seed,
    )?;
    let doc = ConsistencyDoc {
        config: ConsistencyConfigDoc {
            spec: args.spec.display().to_string(),
            shot: args.shot,
            queries: args.queries,
            trials: args.trials,
            seed: args.seed,
        },
        euclidean,
        cosine,
        difference: cosine - euclidean,
    };
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("serialization cannot fail")
        );
    } else {
        println!(
            "consistency: spec={} shot={} queries={} trials={} seed={}",
            doc.config.spec,
            doc.config.shot,
            doc.config.queries,
            doc.config.trials,
            doc.config.seed
        );
        println!("euclidean agreement: {:.3}", doc.euclidean);
        println!("cosine agreement:    {:.3}", doc.cosine);
        println!("difference:          {:+.3}", doc.difference);
    }
    Ok(())
}
