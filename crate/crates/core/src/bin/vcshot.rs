//! `vcshot`: command-line driver for the visual-concept few-shot pipeline.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vcshot::encoding::{
    compute_distances, encode, search_threshold, write_bitset, DEFAULT_COVERAGE_TARGET,
    DEFAULT_THRESHOLD_STEP,
};
use vcshot::episode::{run_benchmark, ClassifierKind, DictionaryScope, EpisodeError, EpisodeSpec};
use vcshot::store::{collect_vectors, read_store, write_store, FeatureStore, MIN_FEATURE_NORM};
use vcshot::synthetic::{cluster_store, duplicate_pairs_store, planted_clusters, structureless_store, PlantedParts};
use vcshot::vmf::{assign_hard, fit_vmfm, read_dictionary, write_dictionary, FitConfig, FitError};
use vcshot::{classify, EncodingError};

const EXIT_INVALID: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "vcshot", version, about = "Few-shot classification with visual concepts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a VCFS feature store and summarize its contents.
    Validate { store: PathBuf },
    /// Learn a VC dictionary from every feature vector in a store.
    LearnVcs(LearnArgs),
    /// Encode every grid of a store as a VCBE bitset.
    Encode(EncodeArgs),
    /// Run a few-shot benchmark and report mean accuracy.
    Eval(EvalArgs),
    /// List the receptive-field patches closest to one VC.
    InspectVc(InspectArgs),
    /// Write a synthetic feature store.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct LearnArgs {
    store: PathBuf,
    #[arg(long, default_value_t = 200)]
    num_vcs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = FitConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    store: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Fixed threshold; searched from the coverage target when absent.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_COVERAGE_TARGET)]
    coverage: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_STEP)]
    step: f64,
    /// Directory receiving one `<index>.vcbe` per grid plus `manifest.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClassifierArg {
    Nn,
    Likelihood,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScopeArg {
    PerTrial,
    WholeStore,
}

#[derive(Args, Debug)]
struct EvalArgs {
    store: PathBuf,
    #[arg(long, default_value_t = 5)]
    ways: usize,
    #[arg(long, default_value_t = 1)]
    shots: usize,
    #[arg(long, default_value_t = 15)]
    queries: usize,
    #[arg(long, default_value_t = 600)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = ClassifierArg::Likelihood)]
    classifier: ClassifierArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    num_vcs: usize,
    #[arg(long, default_value_t = DEFAULT_COVERAGE_TARGET)]
    coverage: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_STEP)]
    step: f64,
    #[arg(long, default_value_t = classify::DEFAULT_SIGMA)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    radius: usize,
    #[arg(long, value_enum, default_value_t = ScopeArg::PerTrial)]
    dictionary_scope: ScopeArg,
    /// Permute support labels before training (chance-level control).
    #[arg(long)]
    shuffle_labels: bool,
    #[arg(long, default_value_t = FitConfig::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = FitConfig::default().rel_tol)]
    rel_tol: f64,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    store: PathBuf,
    dict: PathBuf,
    #[arg(long)]
    vc_index: usize,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    Parts,
    Duplicates,
    Noise,
    Clusters,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    categories: usize,
    #[arg(long, default_value_t = 20)]
    images_per_category: usize,
    #[arg(long, default_value_t = PlantedParts::default().channels)]
    channels: u32,
    #[arg(long, default_value_t = PlantedParts::default().parts_per_category)]
    parts: usize,
    #[arg(long, default_value_t = PlantedParts::default().kappa)]
    kappa: f64,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl ToString) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }

    fn numerical(message: impl ToString) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.to_string(),
        }
    }
}

fn fit_failure(e: FitError) -> Failure {
    match e {
        FitError::NonFiniteLogLikelihood { .. } => Failure::numerical(e),
        _ => Failure::invalid(e),
    }
}

fn encoding_failure(e: EncodingError) -> Failure {
    match e {
        EncodingError::NoThresholdSatisfies { .. } => Failure::numerical(e),
        _ => Failure::invalid(e),
    }
}

fn episode_failure(e: EpisodeError) -> Failure {
    if e.is_numerical() {
        Failure::numerical(e)
    } else {
        Failure::invalid(e)
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::invalid(format!("{}: {e}", path.display()))
}

fn load_store(path: &Path) -> Result<FeatureStore, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    read_store(BufReader::new(file)).map_err(|e| io_failure(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let store = load_store(path)?;
    println!("layer: {}", store.layer_name());
    println!("grids: {}", store.grids().len());
    let counts = store.indices_by_category();
    println!("categories: {}", store.categories().len());
    for (id, name) in store.categories() {
        let n = counts.get(id).map_or(0, Vec::len);
        println!("  {id}\t{name}\t{n} grids");
    }
    let mut shapes: BTreeMap<(u32, u32, u32), usize> = BTreeMap::new();
    for g in store.grids() {
        *shapes.entry((g.height, g.width, g.channels)).or_default() += 1;
    }
    println!("shapes (H x W x C):");
    for ((h, w, c), n) in shapes {
        println!("  {h} x {w} x {c}\t{n} grids");
    }
    Ok(())
}

fn cmd_learn_vcs(args: &LearnArgs) -> Result<(), Failure> {
    let store = load_store(&args.store)?;
    let pooled = collect_vectors(&store, |_| true).map_err(Failure::invalid)?;
    let config = FitConfig {
        num_vcs: args.num_vcs,
        seed: args.seed,
        max_iters: args.max_iters,
        ..FitConfig::default()
    };
    let dict = fit_vmfm(&pooled.vectors, &config).map_err(fit_failure)?;
    let mut out = create(&args.out)?;
    write_dictionary(&dict, &mut out).map_err(|e| io_failure(&args.out, e))?;
    out.flush().map_err(|e| io_failure(&args.out, e))?;

    let labels = assign_hard(&pooled.vectors, &dict).map_err(fit_failure)?;
    let mut table: BTreeMap<(usize, u32), usize> = BTreeMap::new();
    for (src, &v) in pooled.sources.iter().zip(&labels) {
        *table.entry((v, store.grids()[src.grid].category_id)).or_default() += 1;
    }
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for ((v, _), n) in table {
        let b = best.entry(v).or_default();
        *b = (*b).max(n);
    }
    let purity = best.values().sum::<usize>() as f64 / labels.len().max(1) as f64;

    println!("vectors: {} ({} near-zero excluded)", pooled.vectors.len(), pooled.excluded);
    println!("log-likelihood: {:.6}", dict.fitted_log_likelihood());
    println!("iterations: {}", dict.iterations_run());
    println!("purity: {purity:.4}");
    Ok(())
}

fn cmd_encode(args: &EncodeArgs) -> Result<(), Failure> {
    let store = load_store(&args.store)?;
    let dict_file = File::open(&args.dict).map_err(|e| io_failure(&args.dict, e))?;
    let dict = read_dictionary(BufReader::new(dict_file)).map_err(|e| io_failure(&args.dict, e))?;
    let distances = store
        .grids()
        .iter()
        .map(|g| compute_distances(g, &dict))
        .collect::<Result<Vec<_>, _>>()
        .map_err(encoding_failure)?;
    let threshold = match args.threshold {
        Some(t) => t,
        None => search_threshold(&distances, args.coverage, args.step).map_err(encoding_failure)?,
    };
    fs::create_dir_all(&args.out_dir).map_err(|e| io_failure(&args.out_dir, e))?;
    let manifest_path = args.out_dir.join("manifest.csv");
    let mut manifest = csv::Writer::from_writer(create(&manifest_path)?);
    manifest
        .write_record(["file", "image_id", "category_id", "coverage", "firerate"])
        .map_err(|e| io_failure(&manifest_path, e))?;
    for (i, (grid, d)) in store.grids().iter().zip(&distances).enumerate() {
        let enc = encode(d, threshold).map_err(encoding_failure)?;
        let name = format!("{i:06}.vcbe");
        let path = args.out_dir.join(&name);
        let mut out = create(&path)?;
        write_bitset(&enc, &mut out).map_err(|e| io_failure(&path, e))?;
        out.flush().map_err(|e| io_failure(&path, e))?;
        manifest
            .write_record([
                name,
                grid.image_id.clone(),
                grid.category_id.to_string(),
                enc.coverage().to_string(),
                enc.firerate().to_string(),
            ])
            .map_err(|e| io_failure(&manifest_path, e))?;
    }
    manifest.flush().map_err(|e| io_failure(&manifest_path, e))?;
    println!("threshold: {threshold}");
    println!("encoded: {}", store.grids().len());
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let spec = EpisodeSpec {
        ways: args.ways,
        shots: args.shots,
        queries: args.queries,
        trials: args.trials,
        seed: args.seed,
        num_vcs: args.num_vcs,
        coverage_target: args.coverage,
        threshold_step: args.step,
        sigma: args.sigma,
        radius: args.radius,
        classifier: match args.classifier {
            ClassifierArg::Nn => ClassifierKind::Nn,
            ClassifierArg::Likelihood => ClassifierKind::Likelihood,
        },
        dictionary_scope: match args.dictionary_scope {
            ScopeArg::PerTrial => DictionaryScope::PerTrial,
            ScopeArg::WholeStore => DictionaryScope::WholeStore,
        },
        shuffle_support_labels: args.shuffle_labels,
        max_iters: args.max_iters,
        rel_tol: args.rel_tol,
    };
    spec.validate().map_err(Failure::invalid)?;
    let store = load_store(&args.store)?;
    let report = run_benchmark(&store, &spec).map_err(episode_failure)?;
    if let Some(path) = &args.out {
        fs::write(path, report.to_json() + "\n").map_err(|e| io_failure(path, e))?;
    }
    if let Some(path) = &args.csv {
        report.write_csv(create(path)?).map_err(|e| io_failure(path, e))?;
    }
    println!(
        "{:.4} ± {:.4} ({} trials)",
        report.mean_accuracy,
        report.ci95_halfwidth,
        report.per_trial.len()
    );
    Ok(())
}

fn cmd_inspect_vc(args: &InspectArgs) -> Result<(), Failure> {
    let store = load_store(&args.store)?;
    let dict_file = File::open(&args.dict).map_err(|e| io_failure(&args.dict, e))?;
    let dict = read_dictionary(BufReader::new(dict_file)).map_err(|e| io_failure(&args.dict, e))?;
    if args.vc_index >= dict.num_vcs() {
        return Err(Failure::invalid(format!(
            "vc index {} out of range for a dictionary of {} VCs",
            args.vc_index,
            dict.num_vcs()
        )));
    }
    let mu = dict.mean(args.vc_index);
    let mut hits: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, grid) in store.grids().iter().enumerate() {
        if grid.channels as usize != dict.dim() {
            return Err(encoding_failure(EncodingError::DimensionMismatch {
                grid: grid.channels as usize,
                dictionary: dict.dim(),
            }));
        }
        for p in 0..grid.positions() {
            let f = grid.feature_at(p);
            let n = f.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
            if n < MIN_FEATURE_NORM {
                continue;
            }
            let cos = f.iter().zip(mu).map(|(&x, m)| f64::from(x) * m).sum::<f64>() / n;
            hits.push((1.0 - cos, gi, p));
        }
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    hits.truncate(args.top_k);

    let mut out = csv::Writer::from_writer(io::stdout().lock());
    let stdout = |e: csv::Error| Failure::invalid(format!("stdout: {e}"));
    out.write_record(["image_id", "x", "y", "rf_size", "distance"]).map_err(stdout)?;
    for (d, gi, p) in hits {
        let grid = &store.grids()[gi];
        let (row, col) = (p / grid.width as usize, p % grid.width as usize);
        let (cx, cy) = grid.to_input_coords(row, col);
        let half = i64::from(grid.rf_size / 2);
        out.write_record([
            grid.image_id.clone(),
            (cx - half).max(0).to_string(),
            (cy - half).max(0).to_string(),
            grid.rf_size.to_string(),
            d.to_string(),
        ])
        .map_err(stdout)?;
    }
    out.flush().map_err(|e| Failure::invalid(format!("stdout: {e}")))?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let store = match args.kind {
        SynthKind::Parts => PlantedParts {
            categories: args.categories,
            images_per_category: args.images_per_category,
            channels: args.channels,
            parts_per_category: args.parts,
            kappa: args.kappa,
            seed: args.seed,
            ..PlantedParts::default()
        }
        .generate(),
        SynthKind::Duplicates => duplicate_pairs_store(args.categories, 3, 3, 16, args.seed),
        SynthKind::Noise => structureless_store(args.categories, args.images_per_category, 5, 5, 32, args.seed),
        SynthKind::Clusters => {
            let clusters = planted_clusters(16, args.categories, 300, 50.0, args.seed);
            cluster_store(&clusters, args.images_per_category)
        }
    };
    let mut out = create(&args.out)?;
    write_store(&store, &mut out).map_err(|e| io_failure(&args.out, e))?;
    out.flush().map_err(|e| io_failure(&args.out, e))?;
    println!("wrote {} grids", store.grids().len());
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("VC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::invalid(format!("VC_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(Failure::invalid)
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Validate { store } => cmd_validate(store),
        Command::LearnVcs(a) => cmd_learn_vcs(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::InspectVc(a) => cmd_inspect_vc(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
