use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use emomask::emotion::{classify, preprocess_face, EmotionLabel};
use emomask::facedetect::{
    detect_faces, negative_descriptors, positive_descriptors, train_linear_svm_report,
    DetectorParams, FaceBox, HogParams, LinearSvm, SvmTrainParams,
};
use emomask::geometry::{
    estimate_homography, proportional_landmarks, warp_composite, LandmarkRatios, Sampling,
};
use emomask::imagecore::Image;
use emomask::nn::{load_weights, save_weights, Model};
use emomask::pipeline::{
    bench, list_frames, load_frames, model_config, run_stream, EmojiSet, FrameSource, Pipeline,
    PipelineConfig, RunOutputs,
};
use emomask::synth;

#[derive(Parser)]
#[command(
    name = "emomask",
    version,
    about = "Mask faces in video frames with an emoji of their expression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a frame directory or a PPM stream on stdin.
    Run(RunArgs),
    /// Time the pipeline on a frame directory, excluding model loading.
    Bench(BenchArgs),
    /// Print detected face boxes as JSON lines.
    Detect(DetectArgs),
    /// Print the expression label and class probabilities for a face.
    Classify(ClassifyArgs),
    /// Composite one emoji onto a face box.
    Mask(MaskArgs),
    /// Train the face detector SVM from crops.
    TrainSvm(TrainSvmArgs),
    /// Write synthetic emoji, random weights, a detector, sample frames and a config.
    GenAssets(GenAssetsArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Frame directory, or `-` for concatenated PPM/PGM on stdin.
    #[arg(long = "in", default_value = "-")]
    input: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    boxes: Option<PathBuf>,
    /// Enable majority-vote smoothing regardless of the config.
    #[arg(long)]
    smooth: bool,
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    frames: PathBuf,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    image: PathBuf,
    #[arg(long)]
    svm: PathBuf,
    #[arg(long, default_value_t = 80)]
    min_size: u32,
    #[arg(long, default_value_t = 8)]
    stride: u32,
    #[arg(long, default_value_t = 1.2)]
    scale_step: f32,
    #[arg(long, default_value_t = 0.3)]
    nms_iou: f32,
}

#[derive(Args)]
struct ClassifyArgs {
    image: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value = "vgg_ba_small")]
    model: String,
    /// Face box `x,y,w,h`; defaults to the whole image.
    #[arg(long = "box", value_parser = parse_box)]
    face: Option<FaceBox>,
}

#[derive(Args)]
struct MaskArgs {
    image: PathBuf,
    #[arg(long)]
    emoji_dir: PathBuf,
    #[arg(long)]
    label: EmotionLabel,
    #[arg(long = "box", value_parser = parse_box)]
    face: FaceBox,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    nearest: bool,
}

#[derive(Args)]
struct TrainSvmArgs {
    #[arg(long)]
    pos: PathBuf,
    #[arg(long)]
    neg: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f32,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Random windows cut from each negative image larger than the window.
    #[arg(long, default_value_t = 10)]
    neg_windows: usize,
}

#[derive(Args)]
struct GenAssetsArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 1280)]
    width: u32,
    #[arg(long, default_value_t = 720)]
    height: u32,
    #[arg(long, default_value_t = 256)]
    emoji_size: u32,
    /// Skip training the synthetic face detector.
    #[arg(long)]
    no_detector: bool,
}

fn parse_box(s: &str) -> std::result::Result<FaceBox, String> {
    let v: Vec<f32> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("bad box `{s}`: {e}"))?;
    match v[..] {
        [x, y, w, h] => Ok(FaceBox::new(x, y, w, h, 0.0)),
        _ => Err(format!("box must be x,y,w,h, got `{s}`")),
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Bench(a) => run_bench(a),
        Command::Detect(a) => detect(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Mask(a) => mask(a),
        Command::TrainSvm(a) => train_svm(a),
        Command::GenAssets(a) => gen_assets(a),
    }
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    PipelineConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if a.boxes.is_some() {
        cfg.boxes = a.boxes;
    }
    cfg.smooth |= a.smooth;
    let outputs = RunOutputs {
        frames_dir: a.out.or(cfg.output_dir.clone()),
        metrics: a.metrics.or(cfg.metrics.clone()),
    };
    let mut pipeline = Pipeline::from_config(&cfg)?;
    let source = if a.input == "-" {
        FrameSource::Stream(Box::new(BufReader::new(std::io::stdin().lock())))
    } else {
        FrameSource::Dir(a.input.into())
    };
    let summary = run_stream(&mut pipeline, source, &outputs)?;
    println!("{summary}");
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let mut pipeline = Pipeline::from_config(&cfg)?;
    let frames = load_frames(&a.frames)?;
    let report = bench(&mut pipeline, &frames, a.repeats)?;
    println!("{report}");
    if let Some(p) = a.json {
        std::fs::write(&p, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn detect(a: DetectArgs) -> Result<()> {
    let img = Image::load(&a.image)?;
    let svm = LinearSvm::load(&a.svm)?;
    let params = DetectorParams {
        stride: a.stride,
        scale_step: a.scale_step,
        min_size: a.min_size,
        nms_iou: a.nms_iou,
    };
    for b in detect_faces(&img, &svm, &HogParams::default(), &params)? {
        println!("{}", serde_json::to_string(&b)?);
    }
    Ok(())
}

fn classify_cmd(a: ClassifyArgs) -> Result<()> {
    let img = Image::load(&a.image)?;
    let model = load_weights(&a.weights, &model_config(&a.model)?)?;
    let face = a
        .face
        .unwrap_or_else(|| FaceBox::new(0.0, 0.0, img.width() as f32, img.height() as f32, 0.0));
    let (scores, label) = classify(&model, &preprocess_face(&img, &face)?)?;
    let probs: serde_json::Map<_, _> = EmotionLabel::ALL
        .iter()
        .zip(scores.probs)
        .map(|(l, p)| (l.name().to_string(), serde_json::json!(p)))
        .collect();
    println!("{}", serde_json::json!({ "label": label, "probs": probs }));
    Ok(())
}

fn mask(a: MaskArgs) -> Result<()> {
    let img = Image::load(&a.image)?;
    let emoji = EmojiSet::load(&a.emoji_dir)?;
    let dst = proportional_landmarks(&a.face, &LandmarkRatios::default());
    let h = estimate_homography(&emoji.pixel_keypoints(a.label), &dst)?;
    let sampling = if a.nearest {
        Sampling::Nearest
    } else {
        Sampling::Bilinear
    };
    warp_composite(&img.to_rgb(), emoji.image(a.label), &h, sampling)?.save(&a.out)?;
    Ok(())
}

fn load_dir(dir: &Path) -> Result<Vec<Image>> {
    let images = load_frames(dir).with_context(|| format!("reading {}", dir.display()))?;
    if images.is_empty() {
        bail!("no images in {}", dir.display());
    }
    Ok(images)
}

fn train_svm(a: TrainSvmArgs) -> Result<()> {
    let hog = HogParams::default();
    let pos = positive_descriptors(&load_dir(&a.pos)?, &hog)?;
    let neg = negative_descriptors(&load_dir(&a.neg)?, &hog, a.neg_windows, a.seed)?;
    let params = SvmTrainParams {
        lambda: a.lambda,
        epochs: a.epochs,
        seed: a.seed,
    };
    let report = train_linear_svm_report(&pos, &neg, &params)?;
    report.svm.save(&a.out)?;
    let correct = pos.iter().filter(|x| report.svm.predict(x)).count()
        + neg.iter().filter(|x| !report.svm.predict(x)).count();
    println!(
        "trained on {} positives, {} negatives; objective {:.5}; training accuracy {:.2}%",
        pos.len(),
        neg.len(),
        report.objective.last().copied().unwrap_or(f64::NAN),
        100.0 * correct as f64 / (pos.len() + neg.len()) as f64
    );
    Ok(())
}

fn gen_assets(a: GenAssetsArgs) -> Result<()> {
    let out = &a.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    EmojiSet::synthetic(a.emoji_size).save(out.join("emoji"))?;
    let model = Model::random(&model_config("vgg_ba_small")?, a.seed)?;
    save_weights(&model, out.join("model.vggw"))?;

    let mut cfg = PipelineConfig::new("model.vggw", "emoji");
    if !a.no_detector {
        synth::train_synthetic_detector(&HogParams::default(), a.seed)?
            .save(out.join("detector.hsvm"))?;
        cfg.svm = Some("detector.hsvm".into());
    }
    let frames = out.join("frames");
    std::fs::create_dir_all(&frames)?;
    let mut boxes = String::new();
    for i in 0..a.frames {
        let (img, truth) = synth::video_frame(a.width, a.height, a.seed.wrapping_add(i as u64));
        img.save(frames.join(format!("frame_{i:06}.png")))?;
        boxes += &format!("{i} {} {} {} {}\n", truth.x, truth.y, truth.w, truth.h);
    }
    std::fs::write(out.join("boxes.txt"), boxes)?;
    cfg.output_dir = Some("masked".into());
    cfg.metrics = Some("metrics.jsonl".into());
    cfg.save(out.join("config.json"))?;
    println!(
        "wrote {} ({} frames, detector: {})",
        out.display(),
        list_frames(&frames)?.len(),
        !a.no_detector
    );
    Ok(())
}
