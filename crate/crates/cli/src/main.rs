//! `cskit`: generate data, sketch it, decode sketches and run sweeps.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
//! runtime failures (I/O, malformed files, numerical failures).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cskit::baselines::{lloyd_report, mse, Centroids, LloydReport, DEFAULT_LLOYD_ITERS, DEFAULT_N_INIT};
use cskit::datagen::{gen_gmm, make_separated_spec, GmmSpec};
use cskit::decoders::{AscentParams, BoxDomain, DecoderConfig, Model, SearchStrategy, DEFAULT_GRID_CAP};
use cskit::experiment::{decode, run_sweep, save_rows, threads_from_env, DecodeReport, DecoderKind, ExperimentConfig};
use cskit::io::{load_dataset, read_json, save_dataset, save_labels, write_json};
use cskit::sketch::{merge_sketches, sample_frequencies, sketch_dataset, SketchFile};
use cskit::Error;

#[derive(Parser)]
#[command(name = "cskit", version, about = "Compressive clustering from random Fourier feature sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from a Gaussian mixture.
    Gen(GenArgs),
    /// Sketch a dataset with freshly sampled frequencies.
    Sketch(SketchArgs),
    /// Merge sketches built with the same frequencies.
    Merge(MergeArgs),
    /// Decode cluster centers from a sketch.
    Decode(DecodeArgs),
    /// Score decoded centers against a dataset.
    Eval(EvalArgs),
    /// Run a parameter sweep described by a JSON config.
    Sweep(SweepArgs),
    /// Run Lloyd's k-means on a dataset.
    Lloyd(LloydArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Mixture spec (JSON). Without it a separated mixture is generated.
    #[arg(long, conflicts_with_all = ["k", "d"])]
    spec: Option<PathBuf>,
    /// Number of clusters of the separated mixture.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Dimension of the separated mixture.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Seed for placing the separated means.
    #[arg(long, default_value_t = 0)]
    spec_seed: u64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset (`.csv` for text, anything else for binary).
    #[arg(long)]
    out: PathBuf,
    /// Label sidecar; defaults to `<out>.labels`.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct SketchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchArg {
    MeanShift,
    Grid,
    GradientAscent,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderArg {
    Clompr,
    ProposedGrid,
    ProposedMeanshift,
}

impl From<DecoderArg> for DecoderKind {
    fn from(d: DecoderArg) -> Self {
        match d {
            DecoderArg::Clompr => DecoderKind::Clompr,
            DecoderArg::ProposedGrid => DecoderKind::ProposedGrid,
            DecoderArg::ProposedMeanshift => DecoderKind::ProposedMeanshift,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Dirac,
    Gaussian,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    sketch: PathBuf,
    #[arg(long, value_enum)]
    decoder: DecoderArg,
    #[arg(long)]
    k: usize,
    /// Greedy iterations; defaults to 2k.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, value_enum, default_value = "dirac")]
    model: ModelArg,
    /// Overrides the decoder's default search.
    #[arg(long, value_enum)]
    search: Option<SearchArg>,
    /// Random starts per iteration (mean shift and gradient ascent).
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_CAP)]
    grid_cap: usize,
    /// Disable CL-OMPR's joint fine-tuning.
    #[arg(long)]
    no_finetune: bool,
    /// Search box `[lo, hi]^d`.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output of `decode`.
    #[arg(long)]
    result: PathBuf,
    /// Output of `lloyd`; computed on the fly when absent.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_N_INIT)]
    n_init: usize,
    #[arg(long, default_value_t = 0)]
    lloyd_seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LloydArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_N_INIT)]
    n_init: usize,
    #[arg(long, default_value_t = DEFAULT_LLOYD_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// A failure and the exit code it maps to.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::GridTooLarge { .. }
            | Error::SeparationInfeasible(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match threads_from_env() {
        Ok(threads) => run(cli.command, threads),
        Err(e) => Err(e.into()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, threads: Option<usize>) -> CliResult<()> {
    match command {
        Command::Gen(a) => cmd_gen(a),
        Command::Sketch(a) => cmd_sketch(a),
        Command::Merge(a) => cmd_merge(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a, threads),
        Command::Lloyd(a) => cmd_lloyd(a),
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_gen(a: GenArgs) -> CliResult<()> {
    let spec = match &a.spec {
        Some(path) => GmmSpec::load(path)?,
        None => make_separated_spec(a.k, a.d, a.spec_seed)?,
    };
    let (data, labels) = gen_gmm(&spec, a.n, a.seed)?;
    save_dataset(&data, &a.out)?;
    save_labels(&labels, &a.labels.unwrap_or_else(|| sidecar(&a.out, ".labels")))?;
    spec.save(&sidecar(&a.out, ".spec.json"))?;
    Ok(())
}

fn cmd_sketch(a: SketchArgs) -> CliResult<()> {
    let data = load_dataset(&a.data)?;
    let freqs = sample_frequencies(data.dim(), a.m, a.sigma, a.seed)?;
    let z = sketch_dataset(&data, &freqs)?;
    SketchFile::new(&z, &freqs)?.save(&a.out)?;
    Ok(())
}

fn cmd_merge(a: MergeArgs) -> CliResult<()> {
    let (mut acc, freqs) = SketchFile::load(&a.inputs[0])?.into_parts()?;
    for path in &a.inputs[1..] {
        let (next, _) = SketchFile::load(path)?.into_parts()?;
        acc = merge_sketches(&acc, &next)?;
    }
    SketchFile::new(&acc, &freqs)?.save(&a.out)?;
    Ok(())
}

fn decoder_config(a: &DecodeArgs) -> DecoderConfig {
    let kind = DecoderKind::from(a.decoder);
    let model = match a.model {
        ModelArg::Dirac => Model::Dirac,
        ModelArg::Gaussian => Model::Gaussian,
    };
    let default_search = match kind {
        DecoderKind::Clompr => SearchArg::GradientAscent,
        DecoderKind::ProposedGrid => SearchArg::Grid,
        DecoderKind::ProposedMeanshift => SearchArg::MeanShift,
    };
    let ascent = |default_restarts: usize| AscentParams {
        eta: a.eta,
        restarts: a.restarts.unwrap_or(default_restarts),
        max_iters: a.max_iters.unwrap_or(AscentParams::with_restarts(1).max_iters),
        tol: a.tol,
    };
    let search = match a.search.unwrap_or(default_search) {
        SearchArg::Grid => SearchStrategy::Grid {
            points_per_axis: a.grid_points,
            max_nodes: a.grid_cap,
        },
        SearchArg::MeanShift => SearchStrategy::MeanShift(ascent(100)),
        SearchArg::GradientAscent => SearchStrategy::GradientAscent(ascent(1)),
    };
    DecoderConfig {
        k: a.k,
        t: a.t.unwrap_or(2 * a.k),
        model,
        search,
        seed: a.seed,
        finetune: kind == DecoderKind::Clompr && !a.no_finetune,
    }
}

fn cmd_decode(a: DecodeArgs) -> CliResult<()> {
    let cfg = decoder_config(&a);
    cfg.validate()?;
    let (z, freqs) = SketchFile::load(&a.sketch)?.into_parts()?;
    let domain = BoxDomain::cube(freqs.dim(), a.lo, a.hi)?;
    let kind = DecoderKind::from(a.decoder);
    let result = decode(kind, &z, &freqs, &cfg, &domain)?;
    write_json(&a.out, &DecodeReport::new(kind, &cfg, &freqs, &domain, result))?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    let data = load_dataset(&a.data)?;
    let report: DecodeReport = read_json(&a.result)?;
    let centroids = Centroids::new(report.result.centers())?;
    let reference = match &a.reference {
        Some(path) => read_json::<LloydReport>(path)?.centroids,
        None => lloyd_report(&data, centroids.k(), a.n_init, a.lloyd_seed, DEFAULT_LLOYD_ITERS)?.centroids,
    };
    let value = mse(&centroids, &data)?;
    let reference_mse = mse(&reference, &data)?;
    if reference_mse <= 0.0 {
        return Err(Error::DegenerateReference.into());
    }
    let out = serde_json::json!({
        "mse": value,
        "rse": value / reference_mse,
        "reference_mse": reference_mse,
        "residual_norm": report.result.residual_norm,
    });
    match &a.out {
        Some(path) => write_json(path, &out)?,
        None => println!("{}", serde_json::to_string_pretty(&out).expect("plain JSON value")),
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, threads: Option<usize>) -> CliResult<()> {
    // an unreadable file is a runtime failure, a malformed one a config error
    let cfg = ExperimentConfig::load(&a.config).map_err(|e| match e {
        Error::Io { .. } => Failure::from(e),
        e => Failure::Usage(e.to_string()),
    })?;
    let out = a
        .out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Failure::Usage("no output path: pass --out or set `output` in the config".into()))?;
    let data = cfg.dataset.load()?;
    let sweep = run_sweep(&cfg, &data, threads)?;
    save_rows(&sweep.rows, &out)?;
    write_json(&sidecar(&out, ".lloyd.json"), &sweep.lloyd)?;
    let failed = sweep.rows.iter().filter(|r| !r.error.is_empty()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} rows failed; see the error column", sweep.rows.len());
    }
    Ok(())
}

fn cmd_lloyd(a: LloydArgs) -> CliResult<()> {
    let data = load_dataset(&a.data)?;
    let report = lloyd_report(&data, a.k, a.n_init, a.seed, a.max_iters)?;
    write_json(&a.out, &report)?;
    Ok(())
}
