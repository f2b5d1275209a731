mod dataset;

use std::fs;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use otalc::baselines::{parse_softmax_csv, ModalSmoother, RecursiveAverage};
use otalc::cleaner::{CleanEvent, Cleaner, CleanerConfig, FinalizePolicy};
use otalc::cutoffs::{fit_class_stats, ClassLengthStats, CutoffPolicy};
use otalc::io::{format_labels, format_mapping, parse_label};
use otalc::metrics::{Accumulator, MetricsReport};
use otalc::sampling::{clip_indices, inference_clip_indices_with, BoundaryPolicy, ClipSpec, InferenceAnchor, SamplingStrategy};
use otalc::simulate::{corrupt, gen_ground_truth, softmax_frames, GenModel, NoiseConfig};
use otalc::stream::{ClassMap, Segment};
use otalc::tune::{grid_search, GridSpec};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dataset::{matching_gt, read_dir_streams, read_labels, read_mapping, sequence_files, sequence_name};

/// Bad flags or flag combinations. Everything else is a data error.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "otalc", version, about = "Online label cleaning for temporal action segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a stream of label names read from stdin, writing events to stdout.
    Clean(CleanArgs),
    /// Score prediction files against ground truth.
    Eval(EvalArgs),
    /// Fit per-class log-normal segment length statistics.
    FitStats(FitStatsArgs),
    /// Grid search cleaner parameters on validation predictions.
    Tune(TuneArgs),
    /// Write synthetic ground truth and corrupted predictions.
    Simulate(SimulateArgs),
    /// Print clip frame indices.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Measure cleaner throughput on a synthetic stream.
    Bench(BenchArgs),
    /// Run a baseline smoother over stdin.
    Smooth(SmoothArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FinalizeArg {
    Discard,
    Confirm,
}

impl From<FinalizeArg> for FinalizePolicy {
    fn from(arg: FinalizeArg) -> Self {
        match arg {
            FinalizeArg::Discard => FinalizePolicy::DiscardUnconfirmed,
            FinalizeArg::Confirm => FinalizePolicy::ConfirmTrailing,
        }
    }
}

#[derive(Args)]
struct CleanArgs {
    #[arg(long)]
    mapping: PathBuf,
    /// `static:<n>` or `class:<kappa>,<c_abs_min>:<stats.json>`
    #[arg(long)]
    cutoff: String,
    #[arg(long)]
    b: usize,
    #[arg(long, value_enum, default_value = "discard")]
    finalize: FinalizeArg,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt_dir: PathBuf,
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.25, 0.5])]
    thresholds: Vec<f64>,
    /// Class names excluded from scoring, e.g. background.
    #[arg(long, value_delimiter = ',')]
    ignore: Vec<String>,
}

#[derive(Args)]
struct FitStatsArgs {
    #[arg(long)]
    gt_dir: PathBuf,
    #[arg(long)]
    mapping: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridPreset {
    Cbaa,
    FiftySalads,
    Assembly101,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    gt_dir: PathBuf,
    /// Raw (uncleaned) predictions, named like the ground-truth files.
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    mapping: PathBuf,
    /// Grid as JSON.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    grid: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<GridPreset>,
    /// Class statistics JSON, needed for class-based grid points.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Result table CSV; defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 6)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    sequences: usize,
    #[arg(long, default_value_t = 5000)]
    frames: usize,
    /// Mean of log segment length.
    #[arg(long, default_value_t = 100f64.ln())]
    mu_log: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma_log: f64,
    #[arg(long, default_value_t = 0.5)]
    blip_rate: f64,
    #[arg(long, default_value_t = 4)]
    blip_len_max: usize,
    #[arg(long, default_value_t = 0)]
    boundary_jitter_max: usize,
    #[arg(long, default_value_t = 0.0)]
    sub_rate: f64,
    /// Also write softmax CSVs for the predictions with this much mass off the label.
    #[arg(long)]
    softmax_eps: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Dense,
    Surround,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Clamp,
    Wrap,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorArg {
    Exclusive,
    Inclusive,
}

#[derive(Subcommand)]
enum SampleCommand {
    /// Training clips drawn for one segment, one clip per line.
    Train {
        #[arg(long)]
        start: usize,
        #[arg(long)]
        end: usize,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        stride: usize,
        #[arg(long, value_enum, default_value = "surround")]
        strategy: StrategyArg,
        #[arg(long, value_enum, default_value = "clamp")]
        policy: PolicyArg,
        #[arg(long)]
        video_len: usize,
        #[arg(long, default_value_t = 1)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The causal clip ending at frame `t`.
    Infer {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        stride: usize,
        #[arg(long, value_enum, default_value = "exclusive")]
        anchor: AnchorArg,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 1_000_000)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SmoothArgs {
    /// `modal:<window>` over label names, or `recursive:<alpha>` over softmax CSV rows.
    #[arg(long)]
    method: String,
    #[arg(long)]
    mapping: PathBuf,
}

fn parse_cutoff(spec: &str) -> Result<CutoffPolicy> {
    let (mode, rest) = spec
        .split_once(':')
        .ok_or_else(|| usage(format!("--cutoff {spec:?}: expected static:<n> or class:<kappa>,<abs>:<stats.json>")))?;
    match mode {
        "static" => {
            let c_min = rest.parse().map_err(|_| usage(format!("--cutoff: bad C_min {rest:?}")))?;
            CutoffPolicy::fixed(c_min).map_err(|e| usage(e.to_string()))
        }
        "class" => {
            let (params, path) = rest
                .split_once(':')
                .ok_or_else(|| usage("--cutoff class: expected <kappa>,<abs>:<stats.json>"))?;
            let (kappa, abs) = params
                .split_once(',')
                .ok_or_else(|| usage("--cutoff class: expected <kappa>,<abs>"))?;
            let kappa: f64 = kappa.parse().map_err(|_| usage(format!("--cutoff: bad kappa {kappa:?}")))?;
            let abs: usize = abs.parse().map_err(|_| usage(format!("--cutoff: bad C_abs {abs:?}")))?;
            let stats = read_stats(Path::new(path))?;
            CutoffPolicy::class_based(kappa, abs, stats).map_err(|e| usage(e.to_string()))
        }
        other => Err(usage(format!("--cutoff: unknown mode {other:?}"))),
    }
}

fn read_stats(path: &Path) -> Result<Arc<ClassLengthStats>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading stats {}", path.display()))?;
    let stats = ClassLengthStats::from_json(&text).with_context(|| format!("in stats {}", path.display()))?;
    Ok(Arc::new(stats))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_events(out: &mut impl Write, events: &[CleanEvent], map: &ClassMap) -> io::Result<()> {
    for e in events {
        writeln!(out, "{}", e.wire(map))?;
    }
    Ok(())
}

fn run_clean(args: CleanArgs) -> Result<()> {
    let map = read_mapping(&args.mapping)?;
    let policy = parse_cutoff(&args.cutoff)?;
    let config = CleanerConfig::new(policy, args.b, map.clone()).map_err(|e| usage(e.to_string()))?;
    let mut cleaner = Cleaner::streaming(Arc::new(config));

    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut out = BufWriter::new(io::stdout().lock());
    let mut line = String::new();
    let mut events = Vec::with_capacity(2);
    let mut line_no = 0;
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let label = parse_label(token, &map, line_no).context("reading stdin")?;
        events.clear();
        cleaner.push_into(label, &mut events)?;
        write_events(&mut out, &events, &map)?;
        out.flush()?;
    }
    let tail = cleaner.finalize(args.finalize.into());
    write_events(&mut out, &tail, &map)?;
    out.flush()?;
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let map = read_mapping(&args.mapping)?;
    let ignored = args
        .ignore
        .iter()
        .map(|name| map.id(name).ok_or_else(|| usage(format!("--ignore: unknown class {name:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = Accumulator::new(&args.thresholds)
        .map_err(|e| usage(e.to_string()))?
        .with_ignored(&ignored);

    let preds = sequence_files(&args.pred_dir)?;
    let pairs = preds
        .iter()
        .map(|p| Ok((p, matching_gt(p, &args.gt_dir)?)))
        .collect::<Result<Vec<_>>>()?;
    let loaded = pairs
        .par_iter()
        .map(|(pred, gt)| Ok((sequence_name(pred), read_labels(pred, &map)?, read_labels(gt, &map)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<(String, MetricsReport)> = Vec::with_capacity(loaded.len());
    let mut skipped = Vec::new();
    for (name, pred, gt) in &loaded {
        let mut single = Accumulator::new(&args.thresholds)?.with_ignored(&ignored);
        match single.add(pred, gt) {
            Ok(()) => {
                pooled.add(pred, gt)?;
                rows.push((name.clone(), single.report()));
            }
            Err(e) => {
                eprintln!("skipping {name}: {e}");
                skipped.push(name.clone());
            }
        }
    }

    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "sequence,{}", pooled.report().csv_header())?;
    for (name, r) in &rows {
        writeln!(out, "{name},{}", r.csv_row())?;
    }
    writeln!(out, "POOLED,{}", pooled.report().csv_row())?;
    out.flush()?;
    if !skipped.is_empty() {
        bail!("{} sequence(s) skipped: {}", skipped.len(), skipped.join(", "));
    }
    Ok(())
}

fn run_fit_stats(args: FitStatsArgs) -> Result<()> {
    let map = read_mapping(&args.mapping)?;
    let streams = read_dir_streams(&args.gt_dir, &map)?;
    let stats = if streams.is_empty() {
        ClassLengthStats::from_lengths(&vec![Vec::new(); map.len()])
    } else {
        fit_class_stats(&streams)?
    };
    write_output(args.output.as_deref(), &(stats.to_json() + "\n"))
}

fn run_tune(args: TuneArgs) -> Result<()> {
    let map = read_mapping(&args.mapping)?;
    let grid = match (args.preset, &args.grid) {
        (Some(GridPreset::Cbaa), _) => GridSpec::cbaa(),
        (Some(GridPreset::FiftySalads), _) => GridSpec::fifty_salads(),
        (Some(GridPreset::Assembly101), _) => GridSpec::assembly101(),
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading grid {}", path.display()))?;
            GridSpec::from_json(&text).map_err(|e| usage(format!("grid {}: {e}", path.display())))?
        }
        (None, None) => unreachable!("clap requires --grid or --preset"),
    };
    let stats = args.stats.as_deref().map(read_stats).transpose()?;
    let preds = sequence_files(&args.pred_dir)?;
    let pairs = preds
        .par_iter()
        .map(|p| {
            let gt = matching_gt(p, &args.gt_dir)?;
            Ok((read_labels(p, &map)?, read_labels(&gt, &map)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let result = grid_search(&pairs, &grid, stats.as_ref())?;
    let best = result.best();
    eprintln!("best: {:?} objective={:.4}", best.point, best.objective);
    write_output(args.output.as_deref(), &result.to_csv())
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    if args.classes == 0 {
        return Err(usage("--classes must be at least 1"));
    }
    let noise = NoiseConfig {
        blip_rate: args.blip_rate,
        blip_len_max: args.blip_len_max,
        boundary_jitter_max: args.boundary_jitter_max,
        sub_rate: args.sub_rate,
    };
    noise.validate().map_err(|e| usage(e.to_string()))?;
    let map = Arc::new(ClassMap::anonymous(args.classes));
    let model = GenModel::uniform(map.clone(), args.mu_log, args.sigma_log).map_err(|e| usage(e.to_string()))?;

    let gt_dir = args.out_dir.join("gt");
    let pred_dir = args.out_dir.join("pred");
    fs::create_dir_all(&gt_dir)?;
    fs::create_dir_all(&pred_dir)?;
    let softmax_dir = args.out_dir.join("softmax");
    if args.softmax_eps.is_some() {
        fs::create_dir_all(&softmax_dir)?;
    }
    fs::write(args.out_dir.join("mapping.txt"), format_mapping(&map))?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for i in 0..args.sequences {
        let name = format!("seq_{i:04}.txt");
        let gt = gen_ground_truth(&model, args.frames, &mut rng);
        let pred = corrupt(&gt, &noise, &mut rng)?;
        fs::write(gt_dir.join(&name), format_labels(&gt))?;
        fs::write(pred_dir.join(&name), format_labels(&pred))?;
        if let Some(eps) = args.softmax_eps {
            let mut csv = String::new();
            for frame in softmax_frames(&pred, eps).map_err(|e| usage(e.to_string()))? {
                let row: Vec<String> = frame.probs().iter().map(f64::to_string).collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            fs::write(softmax_dir.join(format!("seq_{i:04}.csv")), csv)?;
        }
    }

    let manifest = serde_json::json!({
        "seed": args.seed,
        "sequences": args.sequences,
        "frames": args.frames,
        "classes": args.classes,
        "mu_log": args.mu_log,
        "sigma_log": args.sigma_log,
        "noise": noise,
        "softmax_eps": args.softmax_eps,
    });
    fs::write(args.out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

fn join_indices(indices: &[usize]) -> String {
    indices.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn run_sample(cmd: SampleCommand) -> Result<()> {
    let mut out = BufWriter::new(io::stdout().lock());
    match cmd {
        SampleCommand::Train {
            start,
            end,
            frames,
            stride,
            strategy,
            policy,
            video_len,
            draws,
            seed,
        } => {
            if end < start || end >= video_len {
                return Err(usage("segment must satisfy start <= end < video_len"));
            }
            let spec = ClipSpec::new(frames, stride).map_err(|e| usage(e.to_string()))?;
            let strategy = match strategy {
                StrategyArg::Dense => SamplingStrategy::Dense,
                StrategyArg::Surround => SamplingStrategy::Surround,
            };
            let policy = match policy {
                PolicyArg::Clamp => BoundaryPolicy::ClampRepeat,
                PolicyArg::Wrap => BoundaryPolicy::Wrap,
            };
            let seg = Segment::new(0, start, end);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..draws {
                let clip_start = strategy.draw_start(&seg, &spec, &mut rng);
                let indices = clip_indices(clip_start, &spec, policy, video_len)?;
                writeln!(out, "{}", join_indices(&indices))?;
            }
        }
        SampleCommand::Infer { t, frames, stride, anchor } => {
            let spec = ClipSpec::new(frames, stride).map_err(|e| usage(e.to_string()))?;
            let anchor = match anchor {
                AnchorArg::Exclusive => InferenceAnchor::Exclusive,
                AnchorArg::Inclusive => InferenceAnchor::Inclusive,
            };
            writeln!(out, "{}", join_indices(&inference_clip_indices_with(t, &spec, anchor)))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let r = otalc::bench::cleaner_throughput(args.frames, args.seed)?;
    println!(
        "frames={} seconds={:.6} frames_per_second={:.0} backdates={}",
        r.frames, r.seconds, r.frames_per_second, r.backdates
    );
    Ok(())
}

fn run_smooth(args: SmoothArgs) -> Result<()> {
    let map = read_mapping(&args.mapping)?;
    let (kind, param) = args
        .method
        .split_once(':')
        .ok_or_else(|| usage("--method: expected modal:<window> or recursive:<alpha>"))?;
    let mut text = String::new();
    io::stdin().lock().read_to_string(&mut text)?;
    let mut out = BufWriter::new(io::stdout().lock());
    let name = |l: usize| map.name(l).ok_or_else(|| anyhow!("label {l} outside the mapping"));
    match kind {
        "modal" => {
            let window = param.parse().map_err(|_| usage(format!("--method: bad window {param:?}")))?;
            let mut smoother = ModalSmoother::new(window).map_err(|e| usage(e.to_string()))?;
            let stream = otalc::io::parse_labels(&text, map.clone())?;
            for &l in stream.labels() {
                writeln!(out, "{}", name(smoother.push(l))?)?;
            }
        }
        "recursive" => {
            let alpha = param.parse().map_err(|_| usage(format!("--method: bad alpha {param:?}")))?;
            let mut smoother = RecursiveAverage::new(alpha).map_err(|e| usage(e.to_string()))?;
            for frame in parse_softmax_csv(&text)? {
                writeln!(out, "{}", name(smoother.push(&frame)?)?)?;
            }
        }
        other => return Err(usage(format!("--method: unknown smoother {other:?}"))),
    }
    out.flush()?;
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("OTALC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| usage(format!("OTALC_THREADS must be a non-negative integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| anyhow!("configuring thread pool: {e}"))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Clean(a) => run_clean(a),
        Command::Eval(a) => run_eval(a),
        Command::FitStats(a) => run_fit_stats(a),
        Command::Tune(a) => run_tune(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Sample(c) => run_sample(c),
        Command::Bench(a) => run_bench(a),
        Command::Smooth(a) => run_smooth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
