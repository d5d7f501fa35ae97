//! The `facetproto` command line.
//!
//! Exit codes: `0` success, `1` output could not be written, `2` bad flags or
//! hyper-parameters, `3` unreadable or inconsistent input files, `4` the
//! feature bank cannot supply the requested episodes.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use facetproto_core::eval::{
    compare_runs, generate_synthetic, planted_partition, round_robin_facets, EpisodeClassifier,
    EvalReport, FacetClassifier, ProtoNet, SyntheticSpec, Weighting,
};
use facetproto_core::facets::agglomerate_with_trace;
use facetproto_core::gate::{train_gate, GateConfig};
use facetproto_core::rng::mix;
use facetproto_core::{ClassEmbeddings, Error as CoreError, RunConfig};

use crate::formats::{self, FormatError};
use crate::parallel;

#[derive(Debug, Parser)]
#[command(
    name = "facetproto",
    version,
    about = "Facet-weighted prototype few-shot classification"
)]
pub struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, env = "FSL_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the episode x coordinate importance matrix from a base bank.
    Importance(ImportanceArgs),
    /// Cluster coordinates into facets from an importance matrix.
    Facets(FacetsArgs),
    /// Train the facet-importance gate on a base bank.
    TrainGate(TrainGateArgs),
    /// Evaluate episodic accuracy on a novel bank.
    Eval(EvalArgs),
    /// Write a planted-facet synthetic dataset.
    Synth(SynthArgs),
    /// Paired comparison of two eval result files.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct EpisodeArgs {
    /// Classes per episode.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Support examples per class.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Query examples per class.
    #[arg(long, default_value_t = 15)]
    pub q: usize,
    /// Base seed of the episode stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    /// Feature bank (`#dim=` header, class_id, image_id, features).
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub episodes: EpisodeArgs,
    /// Number of importance episodes (rows).
    #[arg(long, default_value_t = 5000)]
    pub m: usize,
    /// Output importance matrix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FacetsArgs {
    /// Importance matrix written by `importance`.
    #[arg(long)]
    pub importance: PathBuf,
    /// Number of facets.
    #[arg(long)]
    pub f: usize,
    /// Output facet partition.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional merge trace (step, left, right, dissimilarity, size).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainGateArgs {
    /// Feature bank (`#dim=` header, class_id, image_id, features).
    #[arg(long)]
    pub features: PathBuf,
    /// Class embeddings (class_id, d_w, vector).
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Facet partition.
    #[arg(long)]
    pub facets: PathBuf,
    #[command(flatten)]
    pub episodes: EpisodeArgs,
    /// Number of training episodes.
    #[arg(long = "episodes", default_value_t = 10_000)]
    pub train_episodes: usize,
    /// Weight of the facet-weighted term.
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    /// SGD learning rate.
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// Initial gate parameters are uniform in [-init_scale, init_scale].
    #[arg(long, default_value_t = 0.01)]
    pub init_scale: f64,
    /// Output gate parameters.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-episode training loss log.
    #[arg(long)]
    pub loss_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Feature bank (`#dim=` header, class_id, image_id, features).
    #[arg(long)]
    pub features: PathBuf,
    /// Gate parameters; without a gate, queries are scored by plain Euclidean distance.
    #[arg(long, requires_all = ["embeddings", "facets"])]
    pub gate: Option<PathBuf>,
    /// Class embeddings; required with --gate.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Facet partition; required with --gate.
    #[arg(long)]
    pub facets: Option<PathBuf>,
    #[command(flatten)]
    pub episodes: EpisodeArgs,
    #[arg(long = "episodes", default_value_t = 600)]
    pub eval_episodes: usize,
    /// Weight of the facet-weighted term.
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    /// Score each prototype with its own class weights instead of the episode average.
    #[arg(long)]
    pub per_class_weights: bool,
    /// Per-episode results file.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional plain-text report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub base_classes: usize,
    #[arg(long, default_value_t = 10)]
    pub novel_classes: usize,
    #[arg(long, default_value_t = 40)]
    pub per_class: usize,
    #[arg(long, default_value_t = 32)]
    pub nv: usize,
    #[arg(long, default_value_t = 4)]
    pub f: usize,
    /// Per-coordinate class-mean offset on the class's facet.
    #[arg(long, default_value_t = 2.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub embedding_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Results of the candidate run.
    #[arg(long)]
    pub a: PathBuf,
    /// Results of the reference run.
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let code = match err {
            CoreError::Capacity { .. } => 4,
            CoreError::Config(_) => 2,
            _ => 3,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

fn input_error(path: &Path, err: FormatError) -> CliError {
    let message = match &err {
        FormatError::Io { .. } => err.to_string(),
        _ => format!("{}: {err}", path.display()),
    };
    CliError { code: 3, message }
}

fn output_error(err: FormatError) -> CliError {
    CliError {
        code: 1,
        message: err.to_string(),
    }
}

fn load<T>(path: &Path, read: fn(&Path) -> formats::Result<T>) -> Result<T, CliError> {
    read(path).map_err(|e| input_error(path, e))
}

fn save(path: &Path, contents: &str) -> Result<(), CliError> {
    formats::write_text(path, contents).map_err(output_error)
}

/// Formats an accuracy and its interval as percentages with two decimals.
pub fn percent_pm(mean: f64, ci: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * ci)
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return err.exit_code();
        }
    };
    match parallel::with_threads(cli.threads, || dispatch(cli.command)) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message);
            err.code
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Importance(args) => cmd_importance(args),
        Command::Facets(args) => cmd_facets(args),
        Command::TrainGate(args) => cmd_train_gate(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn run_config(ep: &EpisodeArgs, episodes: usize, lambda: f64, m: usize) -> RunConfig {
    RunConfig {
        n_way: ep.n,
        k_shot: ep.k,
        q_query: ep.q,
        episodes,
        lambda,
        f_facets: 1,
        seed: ep.seed,
        m_importance: m,
    }
}

pub fn cmd_importance(args: ImportanceArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let bank = load(&args.features, formats::read_feature_bank)?;
    let config = run_config(&args.episodes, 0, 0.0, args.m);
    let matrix = parallel::build_importance_matrix(&bank, &config)?;
    save(&args.out, &formats::serialize_importance_matrix(&matrix))?;
    println!(
        "m={} n_v={} wall={:.3}s",
        matrix.rows(),
        matrix.cols(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn cmd_facets(args: FacetsArgs) -> Result<(), CliError> {
    let matrix = load(&args.importance, formats::read_importance_matrix)?;
    if matrix.rows() < 2 {
        return Err(CoreError::Config(
            "facets need an importance matrix with at least 2 rows".into(),
        )
        .into());
    }
    let sim = parallel::build_similarity(&matrix)?;
    let (partition, trace) = agglomerate_with_trace(&sim, args.f)?;
    save(&args.out, &formats::serialize_facet_partition(&partition))?;
    if let Some(path) = &args.trace {
        let mut out = String::from("#step\tleft\tright\tdissimilarity\tsize\n");
        for (step, m) in trace.iter().enumerate() {
            writeln!(
                out,
                "{step}\t{}\t{}\t{:?}\t{}",
                m.left, m.right, m.dissimilarity, m.size
            )
            .unwrap();
        }
        save(path, &out)?;
    }
    let sizes: Vec<usize> = partition.facets().iter().map(Vec::len).collect();
    println!(
        "n_v={} f={} sizes={sizes:?}",
        partition.dim(),
        partition.num_facets()
    );
    Ok(())
}

pub fn cmd_train_gate(args: TrainGateArgs) -> Result<(), CliError> {
    let bank = load(&args.features, formats::read_feature_bank)?;
    let embeddings = load(&args.embeddings, formats::read_class_embeddings)?;
    let partition = load(&args.facets, formats::read_facet_partition)?;
    let config = run_config(&args.episodes, 0, args.lambda, 0);
    let gate_config = GateConfig {
        learning_rate: args.lr,
        train_episodes: args.train_episodes,
        init_scale: args.init_scale,
    };
    let trained = train_gate(&bank, &embeddings, &partition, &config, &gate_config)?;
    save(&args.out, &formats::serialize_gate_params(&trained.params))?;
    if let Some(path) = &args.loss_log {
        let mut out = String::from("#episode\tloss\n");
        for (j, loss) in trained.losses.iter().enumerate() {
            writeln!(out, "{j}\t{loss:?}").unwrap();
        }
        save(path, &out)?;
    }
    let window = trained.losses.len().min(100);
    if window > 0 {
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        println!(
            "episodes={} loss(first {window})={:.4} loss(last {window})={:.4}",
            trained.losses.len(),
            mean(&trained.losses[..window]),
            mean(&trained.losses[trained.losses.len() - window..])
        );
    }
    Ok(())
}

/// Plain-text evaluation report.
pub fn render_report(report: &EvalReport, config: &RunConfig, method: &str) -> String {
    let mut out = String::new();
    writeln!(out, "method\t{method}").unwrap();
    writeln!(out, "episodes\t{}", report.episodes).unwrap();
    writeln!(out, "n_way\t{}", config.n_way).unwrap();
    writeln!(out, "k_shot\t{}", config.k_shot).unwrap();
    writeln!(out, "q_query\t{}", config.q_query).unwrap();
    writeln!(out, "lambda\t{:?}", config.lambda).unwrap();
    writeln!(out, "seed\t{}", report.seed).unwrap();
    writeln!(
        out,
        "accuracy\t{}",
        percent_pm(report.mean_accuracy, report.ci95)
    )
    .unwrap();
    out
}

pub fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let bank = load(&args.features, formats::read_feature_bank)?;
    let config = run_config(&args.episodes, args.eval_episodes, args.lambda, 0);
    config.validate()?;
    let (report, method) = match &args.gate {
        Some(gate_path) => {
            let gate = load(gate_path, formats::read_gate_params)?;
            let embeddings: ClassEmbeddings = load(
                args.embeddings
                    .as_deref()
                    .expect("clap enforces --embeddings"),
                formats::read_class_embeddings,
            )?;
            let partition = load(
                args.facets.as_deref().expect("clap enforces --facets"),
                formats::read_facet_partition,
            )?;
            let weighting = if args.per_class_weights {
                Weighting::PerClass
            } else {
                Weighting::EpisodeAverage
            };
            let classifier = FacetClassifier {
                gate: &gate,
                embeddings: &embeddings,
                partition: &partition,
                lambda: args.lambda,
                weighting,
            };
            let method = match weighting {
                Weighting::EpisodeAverage => "facet-weighted (episode-average weights)",
                Weighting::PerClass => "facet-weighted (per-class weights)",
            };
            (evaluate(&bank, &config, &classifier)?, method)
        }
        None if args.lambda == 0.0 => (evaluate(&bank, &config, &ProtoNet)?, "protonet"),
        None => {
            return Err(CoreError::Config(
                "--lambda > 0 requires --gate, --embeddings and --facets".into(),
            )
            .into())
        }
    };
    save(&args.out, &formats::serialize_eval_results(&report))?;
    if let Some(path) = &args.report {
        save(path, &render_report(&report, &config, method))?;
    }
    println!(
        "{method}: {}-way {}-shot over {} episodes: {}",
        config.n_way,
        config.k_shot,
        report.episodes,
        percent_pm(report.mean_accuracy, report.ci95)
    );
    Ok(())
}

fn evaluate<C: EpisodeClassifier + Sync>(
    bank: &facetproto_core::FeatureBank,
    config: &RunConfig,
    classifier: &C,
) -> Result<EvalReport, CliError> {
    Ok(parallel::evaluate_with(bank, config, classifier)?)
}

/// File names written by `synth` inside `--out-dir`.
pub const SYNTH_BASE: &str = "base_features.tsv";
pub const SYNTH_NOVEL: &str = "novel_features.tsv";
pub const SYNTH_EMBEDDINGS: &str = "embeddings.tsv";
pub const SYNTH_PLANTED: &str = "planted_facets.tsv";

pub fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let planted = planted_partition(args.nv, args.f, args.seed)?;
    let spec = |prefix: &str, classes: usize, seed: u64| SyntheticSpec {
        class_prefix: prefix.to_string(),
        per_class: args.per_class,
        planted: planted.clone(),
        class_facets: round_robin_facets(classes, args.f),
        separation: args.separation,
        noise_sigma: args.sigma,
        embedding_noise: args.embedding_noise,
        seed,
    };
    let base = generate_synthetic(&spec("base", args.base_classes, mix(args.seed, 1)))?;
    let novel = generate_synthetic(&spec("novel", args.novel_classes, mix(args.seed, 2)))?;
    let mut embeddings = base.embeddings.clone();
    for (class_id, vector) in novel.embeddings.iter() {
        embeddings.insert(class_id, vector.to_vec())?;
    }
    fs::create_dir_all(&args.out_dir).map_err(|source| {
        output_error(FormatError::Io {
            path: args.out_dir.clone(),
            source,
        })
    })?;
    save(
        &args.out_dir.join(SYNTH_BASE),
        &formats::serialize_feature_bank(&base.bank),
    )?;
    save(
        &args.out_dir.join(SYNTH_NOVEL),
        &formats::serialize_feature_bank(&novel.bank),
    )?;
    save(
        &args.out_dir.join(SYNTH_EMBEDDINGS),
        &formats::serialize_class_embeddings(&embeddings),
    )?;
    save(
        &args.out_dir.join(SYNTH_PLANTED),
        &formats::serialize_facet_partition(&planted),
    )?;
    println!(
        "base={} novel={} classes, {} images each, n_v={} f={} -> {}",
        args.base_classes,
        args.novel_classes,
        args.per_class,
        args.nv,
        args.f,
        args.out_dir.display()
    );
    Ok(())
}

pub fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let a = load(&args.a, formats::read_eval_results)?;
    let b = load(&args.b, formats::read_eval_results)?;
    let diff = compare_runs(&a, &b)?;
    println!(
        "a: {}  b: {}  paired difference (a - b): {} over {} episodes{}",
        percent_pm(a.mean_accuracy, a.ci95),
        percent_pm(b.mean_accuracy, b.ci95),
        percent_pm(diff.mean_difference, diff.ci95),
        diff.episodes,
        if diff.significantly_positive() {
            " (a better beyond the 95% interval)"
        } else {
            ""
        }
    );
    Ok(())
}
