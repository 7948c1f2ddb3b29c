use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use openstream::detect::{run_sweep, DetectionLog, DetectorKind};
use openstream::generator::{fits_on_hypercube, total_clusters};
use openstream::io::{self, Sidecar};
use openstream::osr::{run_osr_seeds, MlpConfig, OsrRun, ScoreRecord};
use openstream::plot::{detection_svg, scores_svg, DetectionRow};
use openstream::preset::{Family, Preset};
use openstream::stream::generate_stream;
use openstream::{Error, GeneratorConfig, StreamDataset};

const OUT_ENV: &str = "OPENSTREAM_OUT_DIR";

/// Synthetic open-world data streams, drift detector sweeps and open-set
/// recognition runs.
#[derive(Parser)]
#[command(name = "openstream", version)]
struct Cli {
    /// Default output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stream and write it as CSV plus a JSON sidecar.
    Generate(GenerateArgs),
    /// Sweep drift detectors over their sensitivity grids.
    Detect(DetectArgs),
    /// Run the incremental open-set recognition baseline.
    Osr(OsrArgs),
    /// List built-in experiment presets, or print one.
    Presets {
        /// Preset to print.
        name: Option<String>,
    },
}

/// Generator hyperparameters. Values in `--config` override these flags.
#[derive(Args, Default)]
struct StreamFlags {
    #[arg(long)]
    n_chunks: Option<usize>,
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long)]
    n_drifts: Option<usize>,
    #[arg(long)]
    n_novel: Option<usize>,
    #[arg(long)]
    percentage_novel: Option<f64>,
    #[arg(long)]
    even_gt: Option<bool>,
    #[arg(long)]
    hide_label: Option<bool>,
    #[arg(long)]
    n_classes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    n_clusters_per_class: Option<usize>,
    #[arg(long)]
    class_sep: Option<f64>,
    #[arg(long)]
    n_features: Option<usize>,
    #[arg(long)]
    n_informative: Option<usize>,
    #[arg(long)]
    allow_projection: Option<bool>,
    #[arg(long)]
    random_state: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML file with generator hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the first stream family of a preset instead of the defaults.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[command(flatten)]
    flags: StreamFlags,
    /// Data file; the sidecar gets the same name with a .json extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Source {
    /// Stream CSV written by `generate` (sidecar alongside).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    stream: Option<PathBuf>,
    /// Built-in preset; each seed generates its own stream.
    #[arg(long)]
    preset: Option<String>,
    /// Seeds, as a list (0,3,5) or an inclusive range (0-9).
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<Seeds>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    source: Source,
    /// Detectors to sweep.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorKind>>,
    /// Hyperparameter values per detector.
    #[arg(long)]
    grid_size: Option<usize>,
}

#[derive(Args)]
struct OsrArgs {
    #[command(flatten)]
    source: Source,
    /// Threshold multipliers, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    epsilons: Option<Vec<f64>>,
    /// Also write per-chunk confusion matrices.
    #[arg(long)]
    confusion: bool,
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_seeds(text: &str) -> Result<Seeds, String> {
    let bad = || format!("invalid seeds '{text}': expected a list like 0,1,2 or a range like 0-9");
    if let Some((a, b)) = text.split_once('-') {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok(Seeds((a..=b).collect()));
    }
    text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>().map(Seeds)
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_)
            | Error::TooManyEvents { .. }
            | Error::DimensionalityTooLow { .. }
            | Error::Unsupported(_)
            | Error::Parse(_)
            | Error::SingleClass
            | Error::EmptyChunk => 1,
            Error::Io { .. } | Error::Csv(_) => 2,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn validation(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 2, message: format!("{}: {e}", path.display()) }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(&cli.out_dir, args),
        Command::Detect(args) => detect(&cli.out_dir, args),
        Command::Osr(args) => osr(&cli.out_dir, args),
        Command::Presets { name } => presets(name.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Flags first, then the config file on top.
fn build_config(base: GeneratorConfig, flags: &StreamFlags, file: Option<&Path>) -> CliResult<GeneratorConfig> {
    let mut c = base;
    macro_rules! apply {
        ($($field:ident),*) => { $( if let Some(v) = flags.$field { c.$field = v; } )* };
    }
    apply!(
        n_chunks, chunk_size, n_drifts, n_novel, percentage_novel, even_gt, hide_label, n_classes,
        n_clusters_per_class, class_sep, n_features, n_informative, allow_projection
    );
    if let Some(w) = &flags.weights {
        c.weights = Some(w.clone());
    }
    if flags.random_state.is_some() {
        c.random_state = flags.random_state;
    }
    let Some(path) = file else { return Ok(c) };
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let overrides: toml::Table = text.parse().map_err(|e| validation(format!("{}: {e}", path.display())))?;
    let mut merged = toml::Table::try_from(&c).map_err(|e| Failure { code: 3, message: e.to_string() })?;
    merged.extend(overrides);
    merged.try_into().map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn warn_projection(c: &GeneratorConfig) {
    let clusters = total_clusters(c);
    if c.allow_projection && !fits_on_hypercube(c.n_informative, clusters) {
        eprintln!(
            "warning: {clusters} clusters do not fit on a {}-dimensional hypercube; data is generated in more \
             dimensions and projected, so raising --class-sep is recommended",
            c.n_informative
        );
    }
}

fn generate(out_dir: &Path, args: GenerateArgs) -> CliResult {
    let base = match &args.preset {
        Some(name) => Preset::builtin(name)?.families().remove(0).config,
        None => GeneratorConfig::default(),
    };
    let config = build_config(base, &args.flags, args.config.as_deref())?;
    config.validate()?;
    warn_projection(&config);
    let stream = generate_stream(&config)?;
    let out = args.out.unwrap_or_else(|| out_dir.join("stream.csv"));
    io::save_stream(&stream, &out)?;
    eprintln!(
        "wrote {} rows to {} (seed {})",
        stream.chunks.iter().map(|c| c.len()).sum::<usize>(),
        out.display(),
        stream.master_seed
    );
    Ok(())
}

/// A stream family with one stream per seed.
struct Batch {
    family: Family,
    streams: Vec<(u64, StreamDataset)>,
}

fn slug(label: &str) -> String {
    label.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '.' || *c == '_').collect()
}

/// Streams to evaluate. A stream file is reused for every seed; a preset
/// generates one stream per seed.
fn load_batches(source: &Source, default_seeds: Vec<u64>) -> CliResult<(Option<Preset>, Vec<Batch>)> {
    if let Some(path) = &source.stream {
        let stream = io::load_stream(path)?;
        let seeds = source.seeds.clone().map(|s| s.0).unwrap_or(default_seeds);
        let family = Family { label: "stream".into(), config: stream.config.clone() };
        let streams = seeds.into_iter().map(|s| (s, stream.clone())).collect();
        return Ok((None, vec![Batch { family, streams }]));
    }
    let name = source.preset.as_deref().expect("clap requires a source");
    let preset = Preset::builtin(name)?;
    let seeds = source.seeds.clone().map(|s| s.0).unwrap_or_else(|| preset.seeds.clone());
    let mut batches = Vec::new();
    for family in preset.families() {
        warn_projection(&family.config);
        let streams = seeds
            .iter()
            .map(|&s| generate_stream(&family.seeded(s)).map(|st| (s, st)))
            .collect::<openstream::Result<Vec<_>>>()?;
        batches.push(Batch { family, streams });
    }
    Ok((Some(preset), batches))
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn detect(out_dir: &Path, args: DetectArgs) -> CliResult {
    let (preset, batches) = load_batches(&args.source, vec![0])?;
    let settings = preset.as_ref().and_then(|p| p.detect.clone());
    let detectors = args
        .detectors
        .or_else(|| settings.as_ref().map(|s| s.detectors.clone()))
        .unwrap_or_else(|| DetectorKind::ALL.to_vec());
    let grid_size = args.grid_size.or(settings.map(|s| s.grid_size)).unwrap_or(10);
    if grid_size == 0 {
        return Err(validation("grid size must be at least 1"));
    }
    create_dir(out_dir)?;
    let columns: Vec<(DetectorKind, Vec<f64>)> = detectors.iter().map(|&k| (k, k.grid(grid_size))).collect();

    let mut logs = Vec::new();
    for batch in &batches {
        let mut log = DetectionLog::default();
        for (seed, stream) in &batch.streams {
            for (kind, grid) in &columns {
                log.extend(run_sweep(stream, *kind, grid, &[*seed])?);
            }
        }
        let path = out_dir.join(format!("detections_{}.csv", slug(&batch.family.label)));
        io::write_file(&path, |w| io::write_detections(&log.records, w))?;
        eprintln!("wrote {} detections to {}", log.records.len(), path.display());
        logs.push(log);
    }
    let truths: Vec<Sidecar> = batches.iter().map(|b| Sidecar::of(&b.streams[0].1)).collect();
    let gts: Vec<openstream::GroundTruth> = truths
        .iter()
        .map(|s| openstream::GroundTruth {
            n_chunks: s.config.n_chunks,
            drift_chunks: s.drift_chunks.clone(),
            novelty_chunks: s.novelty_chunks.clone(),
        })
        .collect();
    let rows: Vec<DetectionRow> = batches
        .iter()
        .zip(&gts)
        .zip(&logs)
        .map(|((b, gt), log)| DetectionRow { label: b.family.label.clone(), truth: gt, records: &log.records })
        .collect();
    let svg_path = out_dir.join("detections.svg");
    write_text(&svg_path, &detection_svg(&rows, &columns))?;
    eprintln!("wrote {}", svg_path.display());
    Ok(())
}

fn osr(out_dir: &Path, args: OsrArgs) -> CliResult {
    let (preset, batches) = load_batches(&args.source, vec![0])?;
    let settings = preset.as_ref().and_then(|p| p.osr.clone());
    let mlp = settings.as_ref().map(|s| s.mlp.clone()).unwrap_or_else(MlpConfig::default);
    let epsilons = args
        .epsilons
        .or_else(|| settings.as_ref().map(|s| s.epsilons()))
        .unwrap_or_else(|| openstream::detect::linspace(-0.5, 3.0, 6));
    if epsilons.is_empty() {
        return Err(validation("at least one epsilon is required"));
    }
    create_dir(out_dir)?;
    for batch in &batches {
        if batch.streams.iter().any(|(_, s)| s.config.hide_label) {
            return Err(validation(
                "stream was generated with hide_label = true; open-set evaluation needs the true identity of each \
                 unknown class to reveal labels, so regenerate it with --hide-label false",
            ));
        }
        let runs: Vec<OsrRun> = if args.source.stream.is_some() {
            let seeds: Vec<u64> = batch.streams.iter().map(|(s, _)| *s).collect();
            run_osr_seeds(&batch.streams[0].1, &epsilons, &seeds, &mlp, args.confusion)?
        } else {
            batch
                .streams
                .iter()
                .map(|(s, st)| openstream::osr::run_osr(st, &epsilons, *s, &mlp, args.confusion))
                .collect::<openstream::Result<_>>()?
        };
        let records: Vec<ScoreRecord> = runs.iter().flat_map(|r| r.records.iter().copied()).collect();
        let tag = slug(&batch.family.label);
        let path = out_dir.join(format!("scores_{tag}.csv"));
        io::write_file(&path, |w| io::write_scores(&records, w))?;
        let svg_path = out_dir.join(format!("scores_{tag}.svg"));
        write_text(&svg_path, &scores_svg(&records, &batch.streams[0].1.ground_truth))?;
        eprintln!("wrote {} and {}", path.display(), svg_path.display());

        if args.confusion {
            let dir = out_dir.join(format!("confusion_{tag}"));
            create_dir(&dir)?;
            for run in &runs {
                let Some(conf) = &run.confusion else { continue };
                for (e, per_chunk) in run.epsilons.iter().zip(conf) {
                    for (i, m) in per_chunk.iter().enumerate() {
                        let p = dir.join(format!("seed{}_eps{e}_chunk{}.csv", run.seed, i + 1));
                        io::write_file(&p, |w| io::write_confusion(m.view(), w))?;
                    }
                }
            }
            eprintln!("wrote confusion matrices to {}", dir.display());
        }
    }
    Ok(())
}

fn presets(name: Option<&str>) -> CliResult {
    match name {
        Some(n) => {
            let text = Preset::source(n).ok_or_else(|| {
                validation(format!("unknown preset '{n}'; available: {}", Preset::names().join(", ")))
            })?;
            print!("{text}");
        }
        None => {
            for n in Preset::names() {
                let p = Preset::builtin(n)?;
                println!("{n}\t{}", p.description);
            }
        }
    }
    Ok(())
}
