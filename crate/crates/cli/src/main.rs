use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use supercluster::corpus::{load_corpus, load_labels, load_taxonomy, CorpusFormat, Taxonomy};
use supercluster::pipeline::{
    load_problem, load_report, read_assignment_csv, run_method, run_on_problem, verify_report, write_assignment_csv,
    InputSpec, KMeansSettings, MethodSpec, RunConfig,
};
use supercluster::scoring::{score, LogBase, ScoreConfig};
use supercluster::simgraph::{apply_thresholds, build_similarity_matrix, write_matrix_csv, ThresholdConfig};
use supercluster::synth::planted_matrix;
use supercluster::{spectral, Error};

/// Exit status for malformed invocations, matching clap's own usage errors.
const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 1;

/// Cluster labeled document embeddings with Louvain, spectral clustering and
/// spherical K-means, and score the clusters against the label taxonomy.
#[derive(Parser, Debug)]
#[command(name = "supercluster", version, about)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every method for N seeded trials and write the report files.
    Run(RunArgs),
    /// Compute the cosine similarity matrix of a corpus and write it as CSV.
    Similarity(SimilarityArgs),
    /// Run one method once and write the node assignment.
    Cluster(ClusterArgs),
    /// Score an assignment against node labels.
    Score(ScoreArgs),
    /// Verify a results directory and rewrite its report files.
    Report(ReportArgs),
    /// Write a planted-partition similarity matrix and its labels.
    Synth(SynthArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum InputKind {
    /// CSV (`id,label,v0,..`) or JSONL embedding corpus.
    Corpus,
    /// Dense similarity-matrix CSV; needs `--labels`.
    Matrix,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Corpus or similarity-matrix file.
    #[arg(long)]
    input: PathBuf,

    #[arg(long, value_enum, default_value_t = InputKind::Corpus)]
    input_kind: InputKind,

    /// Node labels for matrix input: a corpus file or an `id,label` CSV.
    #[arg(long)]
    labels: Option<PathBuf>,

    /// Taxonomy CSV (`label,name`); defaults to labels 1..max.
    #[arg(long)]
    taxonomy: Option<PathBuf>,

    /// Keep negative cosine similarities instead of clamping them to 0.
    #[arg(long)]
    no_clamp: bool,
}

impl InputArgs {
    fn spec(&self) -> anyhow::Result<InputSpec> {
        Ok(match self.input_kind {
            InputKind::Corpus => InputSpec::Corpus {
                path: self.input.clone(),
                taxonomy: self.taxonomy.clone(),
            },
            InputKind::Matrix => InputSpec::Matrix {
                path: self.input.clone(),
                labels: self
                    .labels
                    .clone()
                    .ok_or_else(|| Error::Config("--input-kind matrix needs --labels".into()))?,
                taxonomy: self.taxonomy.clone(),
            },
        })
    }
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Similarities strictly below this become `--lo-value`.
    #[arg(long, default_value_t = 0.25)]
    lo_thresh: f64,

    #[arg(long, default_value_t = 0.0)]
    lo_value: f64,

    /// Similarities strictly above this become `--hi-value`.
    #[arg(long, default_value_t = 0.85)]
    hi_thresh: f64,

    #[arg(long, default_value_t = 0.5)]
    hi_value: f64,

    /// Use the similarity matrix as is.
    #[arg(long, conflicts_with_all = ["lo_thresh", "lo_value", "hi_thresh", "hi_value"])]
    no_threshold: bool,
}

impl ThresholdArgs {
    fn config(&self) -> Option<ThresholdConfig> {
        (!self.no_threshold).then_some(ThresholdConfig {
            lo: self.lo_thresh,
            lo_value: self.lo_value,
            hi: self.hi_thresh,
            hi_value: self.hi_value,
        })
    }
}

#[derive(Args, Debug)]
struct MethodArgs {
    /// Clustering method: `louvain`, `kmeans[:k=K]` or `spectral[:n=N,egn=E]`.
    /// Repeatable for `run`.
    #[arg(long = "method", required = true)]
    methods: Vec<String>,

    /// Cluster count for kmeans methods without an inline `k`.
    #[arg(long)]
    k: Option<usize>,

    /// Cluster count for spectral methods without an inline `n`.
    #[arg(long)]
    n: Option<usize>,

    /// Retained eigenvectors for spectral methods without an inline `egn`.
    #[arg(long)]
    egn: Option<usize>,

    /// K-means restarts per trial (best objective kept).
    #[arg(long, default_value_t = 10)]
    restarts: usize,

    #[arg(long, default_value_t = 300)]
    max_iter: usize,

    /// Relative objective change that stops K-means.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

impl MethodArgs {
    fn specs(&self) -> anyhow::Result<Vec<MethodSpec>> {
        Ok(self
            .methods
            .iter()
            .map(|m| MethodSpec::parse_with(m, self.k, self.n, self.egn))
            .collect::<Result<_, _>>()?)
    }

    fn kmeans(&self) -> KMeansSettings {
        KMeansSettings {
            max_iter: self.max_iter,
            tol: self.tol,
            restarts: self.restarts,
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    threshold: ThresholdArgs,

    #[command(flatten)]
    methods: MethodArgs,

    /// Trials per method.
    #[arg(long, default_value_t = 1)]
    trials: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Method kind or label whose best trial drives the majority vote
    /// (default: louvain if configured, else the first method).
    #[arg(long)]
    baseline: Option<String>,

    /// Output directory.
    #[arg(long)]
    out: PathBuf,

    /// Also write the Laplacian spectrum and embedding into this directory.
    #[arg(long)]
    dump_spectrum: Option<PathBuf>,

    #[arg(long, value_parser = parse_log_base, default_value = "e")]
    log_base: LogBase,
}

#[derive(Args, Debug)]
struct SimilarityArgs {
    /// Corpus file (CSV or JSONL).
    #[arg(long)]
    input: PathBuf,

    #[arg(long)]
    taxonomy: Option<PathBuf>,

    #[arg(long)]
    no_clamp: bool,

    /// Apply the threshold transform before writing.
    #[arg(long)]
    apply_threshold: bool,

    #[command(flatten)]
    threshold: ThresholdArgs,

    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    threshold: ThresholdArgs,

    #[command(flatten)]
    method: MethodArgs,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Assignment CSV (`node_index,cluster`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    dump_spectrum: Option<PathBuf>,

    #[arg(long, value_parser = parse_log_base, default_value = "e")]
    log_base: LogBase,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Assignment CSV (`node_index,cluster`).
    #[arg(long)]
    assignment: PathBuf,

    /// Node labels: a corpus file or an `id,label` CSV.
    #[arg(long)]
    labels: PathBuf,

    #[arg(long)]
    taxonomy: Option<PathBuf>,

    #[arg(long, value_parser = parse_log_base, default_value = "e")]
    log_base: LogBase,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory containing `report.json`.
    #[arg(long)]
    results: PathBuf,

    /// Where to rewrite the report files (default: the results directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    blocks: usize,

    #[arg(long, default_value_t = 25)]
    block_size: usize,

    #[arg(long, default_value_t = 0.8)]
    within: f64,

    #[arg(long, default_value_t = 0.1)]
    between: f64,

    #[arg(long, default_value_t = 0.05)]
    noise: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory for `matrix.csv` and `labels.csv`.
    #[arg(long)]
    out: PathBuf,
}

fn parse_log_base(s: &str) -> Result<LogBase, String> {
    s.parse::<LogBase>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            let usage = matches!(e.downcast_ref::<Error>(), Some(Error::Config(_)));
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_DATA })
        }
    }
}

/// Error chain joined by `: `, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run(a) => run(a),
        Command::Similarity(a) => similarity(a),
        Command::Cluster(a) => cluster(a),
        Command::Score(a) => score_cmd(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
    }
}

fn run(a: RunArgs) -> anyhow::Result<ExitCode> {
    let cfg = RunConfig {
        input: Some(a.input.spec()?),
        threshold: a.threshold.config(),
        clamp_negative: !a.input.no_clamp,
        methods: a.methods.specs()?,
        trials: a.trials,
        seed: a.seed,
        workers: a.workers,
        baseline: a.baseline,
        kmeans: a.methods.kmeans(),
        scoring: ScoreConfig {
            log_base: a.log_base,
            ..ScoreConfig::default()
        },
    };
    cfg.validate()?;
    let problem = load_problem(&cfg).context("loading input")?;
    let (report, outcome) = run_on_problem(&problem, &cfg, &a.out, a.dump_spectrum.as_deref())?;

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "method,trials,entropy_sum_min,entropy_sum_mean,balanced_score_min,balanced_score_mean"
    )?;
    for s in &report.summaries {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.label, s.trials, s.entropy_sum.min, s.entropy_sum.mean, s.balanced_score.min, s.balanced_score.mean
        )?;
    }
    writeln!(
        out,
        "baseline: {} trial {}",
        report.baseline.method, report.baseline.trial
    )?;
    for (cluster, names) in &report.groups {
        writeln!(out, "super-cluster {cluster}: {}", names.join(", "))?;
    }
    if outcome.any_failed() {
        for f in &outcome.failures {
            eprintln!("trial failed: {} trial {}: {}", f.method.label(), f.trial, f.error);
        }
        return Ok(ExitCode::from(EXIT_DATA));
    }
    Ok(ExitCode::SUCCESS)
}

fn similarity(a: SimilarityArgs) -> anyhow::Result<ExitCode> {
    let tax = a.taxonomy.as_deref().map(load_taxonomy).transpose()?;
    let corpus = load_corpus(&a.input, CorpusFormat::from_path(&a.input), tax)?;
    let mut s = build_similarity_matrix(&corpus, !a.no_clamp)?;
    if a.apply_threshold {
        if let Some(t) = a.threshold.config() {
            s = apply_thresholds(&s, &t)?;
        }
    }
    write_matrix_csv(&s, &a.out)?;
    Ok(ExitCode::SUCCESS)
}

fn cluster(a: ClusterArgs) -> anyhow::Result<ExitCode> {
    let methods = a.method.specs()?;
    let [method] = methods.as_slice() else {
        bail!(Error::Config("cluster takes exactly one --method".into()));
    };
    let cfg = RunConfig {
        input: Some(a.input.spec()?),
        threshold: a.threshold.config(),
        clamp_negative: !a.input.no_clamp,
        methods: methods.clone(),
        trials: 1,
        seed: a.seed,
        workers: None,
        baseline: None,
        kmeans: a.method.kmeans(),
        scoring: ScoreConfig {
            log_base: a.log_base,
            ..ScoreConfig::default()
        },
    };
    cfg.validate()?;
    let problem = load_problem(&cfg).context("loading input")?;
    let result = run_method(&problem, method, 0, 0, a.seed, None, &cfg)?;
    if let Some(dir) = &a.dump_spectrum {
        let egn = match method {
            MethodSpec::Spectral { egn, .. } => *egn,
            _ => 1,
        };
        spectral::write_spectrum(problem.eigen()?, egn, dir)?;
    }
    match &a.out {
        Some(path) => {
            write_assignment_csv(&result.assignment, path)?;
            println!(
                "clusters {}\nentropy_sum {}\nbalanced_score {}",
                result.assignment.k, result.scores.entropy_sum, result.scores.balanced_score
            );
        }
        None => {
            let mut out = io::stdout().lock();
            writeln!(out, "node_index,cluster")?;
            for (i, c) in result.assignment.labels.iter().enumerate() {
                writeln!(out, "{i},{c}")?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn score_cmd(a: ScoreArgs) -> anyhow::Result<ExitCode> {
    let assignment = read_assignment_csv(&a.assignment)?;
    let labels = load_labels(&a.labels)?;
    let taxonomy = match &a.taxonomy {
        Some(t) => load_taxonomy(t)?,
        None => Taxonomy::numbered(labels.iter().copied().max().unwrap_or(1)),
    };
    let cfg = ScoreConfig {
        log_base: a.log_base,
        ..ScoreConfig::default()
    };
    let s = score(&labels, taxonomy.len(), &assignment, &cfg)?;
    println!("entropy_sum {}\nbalanced_score {}", s.entropy_sum, s.balanced_score);
    Ok(ExitCode::SUCCESS)
}

fn report(a: ReportArgs) -> anyhow::Result<ExitCode> {
    let path = a.results.join("report.json");
    let report = load_report(&path).with_context(|| format!("reading {}", path.display()))?;
    verify_report(&report)?;
    let out = a.out.as_deref().unwrap_or(&a.results);
    report.write(out)?;
    println!(
        "verified {} trials; report written to {}",
        report.trials.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> anyhow::Result<ExitCode> {
    if a.blocks < 1 || a.block_size < 1 {
        bail!(Error::Config("blocks and block-size must be at least 1".into()));
    }
    let (s, truth) = planted_matrix(&vec![a.block_size; a.blocks], a.within, a.between, a.noise, a.seed);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_matrix_csv(&s, &a.out.join("matrix.csv"))?;
    write_labels(&truth, &a.out.join("labels.csv"))?;
    Ok(ExitCode::SUCCESS)
}

fn write_labels(truth: &[usize], path: &Path) -> anyhow::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "id,label")?;
    for (i, b) in truth.iter().enumerate() {
        writeln!(out, "n{i},{}", b + 1)?;
    }
    out.flush()?;
    Ok(())
}
