use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use psforge::synth::SynthConfig;
use psforge_cli::config::Overrides;
use psforge_cli::error::{read_text, write_file};
use psforge_cli::synth::load_synth_config;
use psforge_cli::{cmd_build, cmd_eval, cmd_gen_synth, cmd_stats, CliError, EvalArgs, EvalTask, RunConfig};

#[derive(Parser)]
#[command(name = "psforge", version, about = "Build and evaluate patch-correspondence datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample positive pairs and export normalized patches from a scene.
    Build(BuildArgs),
    /// Score descriptors on a dataset or a scene.
    Eval(EvalCmd),
    /// Counts and histograms of a built dataset.
    Stats(StatsArgs),
    /// Generate a synthetic scene with rendered images.
    GenSynth(SynthArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sc_th: Option<f64>,
    #[arg(long)]
    min_v_th: Option<f64>,
    #[arg(long)]
    max_v_th: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to PSFORGE_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Match,
    Verify,
    Retrieve,
    Strecha,
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Directory with the built dataset (match, verify, retrieve).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Descriptor file aligned with the dataset patches.
    #[arg(long)]
    descriptors: Option<PathBuf>,
    /// Verification pairs `row_a row_b label`.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    reference_image: Option<u32>,
    #[arg(long)]
    target_image: Option<u32>,
    /// Distractor budgets for retrieval, comma separated.
    #[arg(long, value_delimiter = ',')]
    distractors: Vec<usize>,
    /// COLMAP text model (strecha).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Directory with one `<image_id>.psde` per image (strecha).
    #[arg(long)]
    descriptor_dir: Option<PathBuf>,
    /// Keypoints `x y` per line in the keypoint image (strecha).
    #[arg(long)]
    keypoints: Option<PathBuf>,
    #[arg(long)]
    keypoint_image: Option<u32>,
    #[arg(long)]
    anchor_image: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    targets: Vec<u32>,
    #[arg(long, default_value_t = psforge::evaluation::strecha::DEFAULT_POINTS_PER_PAIR)]
    n_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Row label in the text table.
    #[arg(long, default_value = "descriptor")]
    method: String,
    /// Directory for `report.json` and `report.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory with `patches.psds` and `pairs.tsv`.
    dataset: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML generator settings; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    cameras: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jitter_px: Option<f64>,
    /// Write the scene only.
    #[arg(long)]
    no_images: bool,
}

fn run_build(a: BuildArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        scene: a.scene,
        images: a.images,
        out: a.out,
        sc_th: a.sc_th,
        min_v_th: a.min_v_th,
        max_v_th: a.max_v_th,
        margin: a.margin,
        seed: a.seed,
        threads: a.threads,
    });
    let out = cmd_build(&cfg)?;
    let c = &out.manifest.counts;
    println!(
        "{}: {} patches, {} pairs from {} tracks in {} views",
        out.out_dir.display(),
        c.patches,
        c.pairs,
        c.tracks,
        c.views
    );
    Ok(())
}

fn run_eval(a: EvalCmd) -> Result<(), CliError> {
    let task = match a.task {
        TaskArg::Match => EvalTask::Match,
        TaskArg::Verify => EvalTask::Verify,
        TaskArg::Retrieve => EvalTask::Retrieve,
        TaskArg::Strecha => EvalTask::Strecha,
    };
    let args = EvalArgs {
        dataset: a.dataset,
        descriptors: a.descriptors,
        labels: a.labels,
        reference_image: a.reference_image,
        target_image: a.target_image,
        distractors: a.distractors,
        scene: a.scene,
        descriptor_dir: a.descriptor_dir,
        keypoints: a.keypoints,
        keypoint_image: a.keypoint_image,
        anchor_image: a.anchor_image,
        targets: a.targets,
        n_points: a.n_points,
        seed: a.seed,
        ..EvalArgs::new(task)
    };
    let pool = psforge_cli::config::thread_pool(a.threads)?;
    let report = pool.install(|| cmd_eval(&args))?;
    let table = report.to_table(&a.method);
    print!("{table}");
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        write_file(&dir.join("report.json"), report.to_json())?;
        write_file(&dir.join("report.txt"), table)?;
    }
    Ok(())
}

fn run_stats(a: StatsArgs) -> Result<(), CliError> {
    let s = cmd_stats(&a.dataset)?;
    if a.json {
        print!("{}", s.to_json());
    } else {
        print!("{}", s.to_text());
    }
    Ok(())
}

fn run_synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => load_synth_config(&read_text(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.points {
        cfg.n_points = v;
    }
    if let Some(v) = a.cameras {
        cfg.n_cameras = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.jitter_px {
        cfg.jitter_px = v;
    }
    let out = cmd_gen_synth(&cfg, &a.out, !a.no_images)?;
    println!(
        "{}: {} views, {} tracks, {} observations",
        display(&out.scene_dir),
        out.scene.views.len(),
        out.scene.tracks.len(),
        out.scene.observation_count()
    );
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => run_build(a),
        Command::Eval(a) => run_eval(a),
        Command::Stats(a) => run_stats(a),
        Command::GenSynth(a) => run_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("psforge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
