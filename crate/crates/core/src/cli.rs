//! Command-line front end. Exit codes: 0 success, 2 I/O, 3 validation,
//! 4 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    compare_strategies, export_scene, generate_scene, Background, BenchError, BenchOptions, MaskFlows, Pattern,
    SceneSpec, TrainOptions,
};
use crate::flow::{build_flow_set, flow_file_name, write_flo, FlowConfig, FlowError, FlowSet, FlowSource};
use crate::mae::{train, write_checkpoint, write_loss_csv, MaeConfig, MaeError, ToyMae, TrainSample};
use crate::mask::{
    generate_with_volume, render_overlays, resolve_base_frame, BaseFrame, HoleFill, MaskConfig, MaskError,
    MaskInit, SampleLevel, Strategy, WarpMode,
};
use crate::ppm::{read_ppm, write_ppm};
use crate::rng::Rng;
use crate::tensor::{read_vten, write_vten, Tensor, TensorError, VideoClip};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<TensorError> for CliError {
    fn from(e: TensorError) -> Self {
        match e {
            TensorError::Io(_) => Self::io(e.to_string()),
            _ => Self::invalid(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::Io(_) => Self::io(e.to_string()),
            FlowError::Tensor(t) => t.into(),
            _ => Self::invalid(e.to_string()),
        }
    }
}

impl From<MaskError> for CliError {
    fn from(e: MaskError) -> Self {
        match e {
            MaskError::Io(_) => Self::io(e.to_string()),
            MaskError::Tensor(t) => t.into(),
            _ => Self::invalid(e.to_string()),
        }
    }
}

impl From<MaeError> for CliError {
    fn from(e: MaeError) -> Self {
        match e {
            MaeError::Diverged { .. } => Self {
                code: EXIT_NUMERIC,
                message: e.to_string(),
            },
            MaeError::Io(_) => Self::io(e.to_string()),
            MaeError::Tensor(t) => t.into(),
            MaeError::Mask(m) => m.into(),
            _ => Self::invalid(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io(_) => Self::io(e.to_string()),
            BenchError::Tensor(t) => t.into(),
            BenchError::Flow(f) => f.into(),
            BenchError::Mask(m) => m.into(),
            BenchError::Mae(m) => m.into(),
            _ => Self::invalid(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mgmask", version, about = "Motion-guided masking for video masked autoencoders")]
pub struct Cli {
    /// Worker threads (default: all cores). Output never depends on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate or load the flow set around the base frame.
    Flow(FlowArgs),
    /// Generate a token mask, optionally with volume and overlays.
    Mask(MaskArgs),
    /// Train the toy autoencoder on a directory of VTEN clips.
    Pretrain(PretrainArgs),
    /// Compare masking strategies on synthetic scenes.
    Bench(BenchArgs),
    /// Export a synthetic scene with its ground-truth flows.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SeedArg {
    /// Seed; falls back to MGMASK_SEED, then 0.
    #[arg(long, env = "MGMASK_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct FlowParams {
    #[arg(long, default_value_t = FlowConfig::default().levels)]
    pub levels: usize,
    #[arg(long, default_value_t = FlowConfig::default().iterations)]
    pub iterations: usize,
    #[arg(long, default_value_t = FlowConfig::default().alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = FlowConfig::default().warps)]
    pub warps: usize,
}

impl FlowParams {
    fn config(&self) -> FlowConfig {
        FlowConfig {
            levels: self.levels,
            iterations: self.iterations,
            alpha: self.alpha,
            warps: self.warps,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct MaskParams {
    #[arg(long, value_enum, default_value_t = Strategy::MotionGuided)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 0.9)]
    pub ratio: f64,
    #[arg(long, value_enum, default_value_t = BaseFrame::Middle)]
    pub base_frame: BaseFrame,
    #[arg(long, value_enum, default_value_t = MaskInit::Gmm)]
    pub init: MaskInit,
    #[arg(long, default_value_t = 16.0)]
    pub sigma_x: f64,
    #[arg(long, default_value_t = 16.0)]
    pub sigma_y: f64,
    #[arg(long, value_enum, default_value_t = WarpMode::Backward)]
    pub warp: WarpMode,
    #[arg(long, value_enum, default_value_t = HoleFill::Tube)]
    pub fill: HoleFill,
    #[arg(long, value_enum, default_value_t = SampleLevel::FrameLevel)]
    pub sample: SampleLevel,
    /// Std of the Gaussian noise added to one frame of the volume.
    #[arg(long)]
    pub exposure_noise: Option<f64>,
}

impl MaskParams {
    fn config(&self) -> MaskConfig {
        MaskConfig {
            ratio: self.ratio,
            base_frame: self.base_frame,
            init: self.init,
            sigma: (self.sigma_x, self.sigma_y),
            warp: self.warp,
            fill: self.fill,
            sample: self.sample,
            strategy: self.strategy,
            exposure_noise: self.exposure_noise,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FlowMethod {
    Estimate,
    Load,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    /// VTEN clip `[T, 3, H, W]` or a directory of P6 PPM frames.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for `flow_{i}_{j}.flo`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FlowMethod::Estimate)]
    pub method: FlowMethod,
    /// Flow directory for `--method load`.
    #[arg(long)]
    pub flow_dir: Option<PathBuf>,
    /// Base frame (1-based); overrides `--base-frame`.
    #[arg(long)]
    pub base: Option<usize>,
    #[arg(long, value_enum, default_value_t = BaseFrame::Middle)]
    pub base_frame: BaseFrame,
    #[command(flatten)]
    pub flow: FlowParams,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct MaskArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mask: MaskParams,
    /// Load flows from this directory.
    #[arg(long)]
    pub flow_dir: Option<PathBuf>,
    /// Estimate flows from the clip.
    #[arg(long)]
    pub estimate: bool,
    #[command(flatten)]
    pub flow: FlowParams,
    /// Also write the masking volume (motion-guided only).
    #[arg(long)]
    pub volume: bool,
    /// Write one PPM overlay per frame.
    #[arg(long)]
    pub render: bool,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    /// Directory of VTEN clips (`*.vten`, sorted by name).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mask: MaskParams,
    /// Per-clip flow directories at `<flow-root>/<clip stem>/`.
    #[arg(long)]
    pub flow_root: Option<PathBuf>,
    #[arg(long)]
    pub estimate: bool,
    #[command(flatten)]
    pub flow: FlowParams,
    #[command(flatten)]
    pub model: ModelParams,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug, Clone)]
pub struct ModelParams {
    #[arg(long, default_value_t = MaeConfig::default().embed_dim)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = MaeConfig::default().depth)]
    pub depth: usize,
    #[arg(long, default_value_t = MaeConfig::default().heads)]
    pub heads: usize,
    #[arg(long, default_value_t = MaeConfig::default().decoder_dim)]
    pub decoder_dim: usize,
    #[arg(long, default_value_t = MaeConfig::default().decoder_depth)]
    pub decoder_depth: usize,
    #[arg(long, default_value_t = MaeConfig::default().norm_eps)]
    pub norm_eps: f64,
    #[arg(long, default_value_t = MaeConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = MaeConfig::default().steps)]
    pub steps: usize,
    #[arg(long, default_value_t = MaeConfig::default().batch_size)]
    pub batch_size: usize,
}

impl ModelParams {
    fn config(&self, seed: u64) -> MaeConfig {
        MaeConfig {
            embed_dim: self.embed_dim,
            depth: self.depth,
            heads: self.heads,
            decoder_dim: self.decoder_dim,
            decoder_depth: self.decoder_depth,
            norm_eps: self.norm_eps,
            lr: self.lr,
            steps: self.steps,
            batch_size: self.batch_size,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SceneParams {
    #[arg(long, value_enum, default_value_t = Pattern::TranslatingTexture)]
    pub pattern: Pattern,
    /// Horizontal speed in px/frame.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub speed: f64,
    /// Vertical speed in px/frame.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub speed_y: f64,
    #[arg(long, default_value_t = 16)]
    pub frames: usize,
    #[arg(long, default_value_t = 224)]
    pub height: usize,
    #[arg(long, default_value_t = 224)]
    pub width: usize,
    #[arg(long, value_enum, default_value_t = Background::Constant)]
    pub background: Background,
    #[arg(long, default_value_t = 0)]
    pub texture_seed: u64,
    #[arg(long, default_value_t = SceneSpec::default().object_size)]
    pub object_size: usize,
    #[arg(long, default_value_t = SceneSpec::default().texture_scale)]
    pub texture_scale: f64,
}

impl SceneParams {
    fn spec(&self) -> SceneSpec {
        SceneSpec {
            pattern: self.pattern,
            velocity: (self.speed, self.speed_y),
            second_velocity: None,
            texture_seed: self.texture_seed,
            frames: self.frames,
            height: self.height,
            width: self.width,
            background: self.background,
            object_size: self.object_size,
            texture_scale: self.texture_scale,
        }
    }
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scene: SceneParams,
    /// Strategies to compare, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Strategy::MotionGuided, Strategy::Tube, Strategy::Random])]
    pub strategies: Vec<Strategy>,
    #[arg(long, default_value_t = 0.9)]
    pub ratio: f64,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 50)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub horizon: usize,
    /// Estimate mask flows instead of using ground truth.
    #[arg(long)]
    pub estimate: bool,
    #[command(flatten)]
    pub flow: FlowParams,
    /// Also train the toy model per strategy and seed.
    #[arg(long)]
    pub train: bool,
    /// Training clips per seed.
    #[arg(long, default_value_t = 4)]
    pub train_clips: usize,
    #[command(flatten)]
    pub model: ModelParams,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scene: SceneParams,
    #[arg(long)]
    pub out: PathBuf,
    /// Base frame (1-based) of the exported flows; defaults to `floor(T/2)`.
    #[arg(long)]
    pub base: Option<usize>,
    #[command(flatten)]
    pub seed: SeedArg,
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code. Diagnostics go to stderr, reports to stdout.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(CliError::invalid("--jobs must be positive")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(CliError::invalid(e.to_string())),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Writes one stdout line. A reader that closed the pipe early (`| head`)
/// is not an error.
fn emit(line: std::fmt::Arguments) -> Result<(), CliError> {
    use std::io::Write as _;
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Flow(a) => cmd_flow(a),
        Command::Mask(a) => cmd_mask(a),
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

/// Reads a VTEN clip or a directory of PPM frames (sorted by file name).
pub fn load_clip(path: &Path) -> Result<VideoClip, CliError> {
    if path.is_dir() {
        let mut frames: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")))
            .collect();
        frames.sort();
        if frames.is_empty() {
            return Err(CliError::invalid(format!("{}: no .ppm frames", path.display())));
        }
        let frames = frames.iter().map(read_ppm).collect::<Result<Vec<_>, _>>()?;
        Ok(VideoClip::new(Tensor::stack(&frames)?)?)
    } else if path.exists() {
        Ok(VideoClip::new(read_vten(path)?)?)
    } else {
        Err(CliError::io(format!("{}: no such file or directory", path.display())))
    }
}

fn base_for(t: usize, explicit: Option<usize>, mode: BaseFrame, seed: u64) -> Result<usize, CliError> {
    match explicit {
        Some(b) if b == 0 || b > t => Err(CliError::invalid(format!("base frame {b} outside 1..={t}"))),
        Some(b) => Ok(b),
        None => Ok(resolve_base_frame(
            t,
            &MaskConfig {
                base_frame: mode,
                ..MaskConfig::default()
            },
            &Rng::new(seed),
        )),
    }
}

fn cmd_flow(a: FlowArgs) -> Result<(), CliError> {
    let clip = load_clip(&a.input)?;
    let base = base_for(clip.dims().t, a.base, a.base_frame, a.seed.seed)?;
    let source = match a.method {
        FlowMethod::Estimate => FlowSource::Estimate(a.flow.config()),
        FlowMethod::Load => FlowSource::Directory(
            a.flow_dir
                .clone()
                .ok_or_else(|| CliError::invalid("--method load needs --flow-dir"))?,
        ),
    };
    let set = build_flow_set(&clip, base, &source)?;
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        for (i, j, f) in set.pairs() {
            write_flo(f, out.join(flow_file_name(i, j)))?;
        }
    }
    for (i, j, f) in set.pairs() {
        emit(format_args!("{i}->{j} mean |flow| {:.6}", f.mean_magnitude()))?;
    }
    Ok(())
}

fn mask_flows(
    clip: &VideoClip,
    cfg: &MaskConfig,
    rng: &Rng,
    flow_dir: Option<&Path>,
    estimate: bool,
    params: &FlowParams,
) -> Result<Option<FlowSet>, CliError> {
    if cfg.strategy != Strategy::MotionGuided {
        return Ok(None);
    }
    let base = resolve_base_frame(clip.dims().t, cfg, rng);
    let source = match (flow_dir, estimate) {
        (Some(_), true) => return Err(CliError::invalid("use either --flow-dir or --estimate")),
        (Some(d), false) => FlowSource::Directory(d.to_path_buf()),
        (None, true) => FlowSource::Estimate(params.config()),
        (None, false) => {
            return Err(CliError::invalid(
                "motion_guided needs flows: pass --flow-dir or --estimate",
            ))
        }
    };
    Ok(Some(build_flow_set(clip, base, &source)?))
}

fn cmd_mask(a: MaskArgs) -> Result<(), CliError> {
    let cfg = a.mask.config();
    cfg.validate()?;
    let clip = load_clip(&a.input)?;
    let rng = Rng::new(a.seed.seed);
    let flows = mask_flows(&clip, &cfg, &rng, a.flow_dir.as_deref(), a.estimate, &a.flow)?;
    let (mask, volume) = generate_with_volume(clip.dims(), flows.as_ref(), &cfg, &rng)?;
    fs::create_dir_all(&a.out)?;
    write_vten(&mask.to_tensor(), a.out.join("mask.vten"))?;
    if a.volume {
        match &volume {
            Some(v) => write_vten(v.tensor(), a.out.join("volume.vten"))?,
            None => return Err(CliError::invalid("--volume needs --strategy motion_guided")),
        }
    }
    if a.render {
        for (t, frame) in render_overlays(&clip, &mask)?.iter().enumerate() {
            write_ppm(frame, a.out.join(format!("overlay_{:03}.ppm", t + 1)))?;
        }
    }
    for s in 0..mask.slices() {
        emit(format_args!("slice {s}: {} visible", mask.slice_visible(s).len()))?;
    }
    Ok(())
}

fn cmd_pretrain(a: PretrainArgs) -> Result<(), CliError> {
    let cfg = a.mask.config();
    cfg.validate()?;
    let mae = a.model.config(a.seed.seed);
    mae.validate()?;
    if cfg.strategy == Strategy::MotionGuided && a.flow_root.is_none() && !a.estimate {
        return Err(CliError::invalid(
            "motion_guided needs flows: pass --flow-root or --estimate",
        ));
    }
    if !a.data.is_dir() {
        return Err(CliError::io(format!("{}: not a directory", a.data.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&a.data)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "vten"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::invalid(format!("{}: no .vten clips", a.data.display())));
    }
    // a fixed base frame is required, so any generator resolves it the same way
    let probe = Rng::new(a.seed.seed);
    let samples = paths
        .iter()
        .map(|p| -> Result<TrainSample, CliError> {
            let clip = VideoClip::new(read_vten(p)?)?;
            let flow_dir = a
                .flow_root
                .as_ref()
                .map(|r| r.join(p.file_stem().unwrap_or_default()));
            let flows = mask_flows(&clip, &cfg, &probe, flow_dir.as_deref(), a.estimate && a.flow_root.is_none(), &a.flow)?;
            Ok(TrainSample { clip, flows })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut model = ToyMae::new(&mae)?;
    let mut curve = Vec::new();
    let result = train(&mut model, &samples, &cfg, &mae, |step, loss| {
        curve.push(loss);
        eprintln!("step {step} loss {loss}");
    });
    fs::create_dir_all(&a.out)?;
    write_loss_csv(&curve, a.out.join("loss.csv"))?;
    result?;
    write_checkpoint(&model, &mae, a.out.join("checkpoint"))?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let spec = a.scene.spec();
    let cfgs: Vec<MaskConfig> = a
        .strategies
        .iter()
        .map(|&s| MaskConfig {
            ratio: a.ratio,
            ..MaskConfig::with_strategy(s)
        })
        .collect();
    let seeds: Vec<u64> = (0..a.seeds).map(|k| a.seed.seed + k).collect();
    let opts = BenchOptions {
        horizon: a.horizon,
        flows: if a.estimate {
            MaskFlows::Estimate(a.flow.config())
        } else {
            MaskFlows::GroundTruth
        },
        train: a.train.then(|| TrainOptions {
            mae: a.model.config(a.seed.seed),
            clips: a.train_clips,
        }),
    };
    if a.horizon == 0 {
        return Err(CliError::invalid("--horizon must be at least 1"));
    }
    let report = compare_strategies(&spec, &cfgs, &seeds, &opts)?;
    let json = report.to_json();
    match &a.out_json {
        Some(p) => fs::write(p, &json)?,
        None => emit(format_args!("{json}"))?,
    }
    if let Some(p) = &a.out_csv {
        fs::write(p, report.loss_table_csv())?;
    }
    for s in &report.summaries {
        eprintln!("{}: median leakage {:.4} (iqr {:.4})", s.strategy, s.median_rate, s.iqr);
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let spec = a.scene.spec();
    let scene = generate_scene(&spec, &mut Rng::new(a.seed.seed))?;
    let t = spec.frames;
    let base = base_for(t, a.base, BaseFrame::Middle, a.seed.seed)?;
    export_scene(&scene, base, &a.out)?;
    emit(format_args!("wrote {} frames and {} flows to {}", t, t - 1, a.out.display()))?;
    Ok(())
}
