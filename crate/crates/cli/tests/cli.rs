use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use emomask::facedetect::FaceBox;
use emomask::imagecore::{encode_image, Image, ImageFormat};
use emomask::synth;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn emomask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emomask"))
        .args(args)
        .output()
        .expect("spawn emomask")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small asset bundle: 3 frames of 160x120, no detector.
fn assets(dir: &Path) {
    ok(emomask(&[
        "gen-assets",
        "--out",
        p(dir),
        "--frames",
        "3",
        "--width",
        "160",
        "--height",
        "120",
        "--emoji-size",
        "64",
        "--no-detector",
        "--seed",
        "3",
    ]));
}

#[test]
fn run_over_directory_with_external_boxes() {
    let dir = tempfile::tempdir().unwrap();
    assets(dir.path());
    let cfg = dir.path().join("config.json");
    let out_dir = dir.path().join("out");
    let metrics = dir.path().join("m.jsonl");
    let stdout = ok(emomask(&[
        "run",
        "--config",
        p(&cfg),
        "--in",
        p(&dir.path().join("frames")),
        "--out",
        p(&out_dir),
        "--boxes",
        p(&dir.path().join("boxes.txt")),
        "--smooth",
        "--metrics",
        p(&metrics),
    ]));
    assert!(stdout.contains("frames"), "{stdout}");

    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&metrics)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    for (i, m) in lines.iter().enumerate() {
        assert_eq!(m["frame"], i as u64);
        assert!(m["label"].is_string(), "{m}");
        assert!(m["box"].is_object(), "{m}");
        assert!(m["total_ms"].as_f64().unwrap() >= 0.0);
    }
    for i in 0..3 {
        let name = format!("frame_{i:06}.png");
        let (src, dst) = (
            Image::load(dir.path().join("frames").join(&name)).unwrap(),
            Image::load(out_dir.join(&name)).unwrap(),
        );
        assert_eq!((src.width(), src.height()), (dst.width(), dst.height()));
        assert_ne!(src, dst, "frame {i} should be masked");
    }
}

#[test]
fn run_reads_ppm_stream_from_stdin() {
    let dir = tempfile::tempdir().unwrap();
    assets(dir.path());
    let mut stream = Vec::new();
    for i in 0..2 {
        let img = Image::load(dir.path().join(format!("frames/frame_{i:06}.png"))).unwrap();
        stream.extend(encode_image(&img, ImageFormat::Ppm).unwrap());
    }
    let metrics = dir.path().join("stream.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_emomask"))
        .args([
            "run",
            "--config",
            p(&dir.path().join("config.json")),
            "--in",
            "-",
            "--out",
            p(&dir.path().join("streamed")),
            "--boxes",
            p(&dir.path().join("boxes.txt")),
            "--metrics",
            p(&metrics),
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&stream).unwrap();
    ok(child.wait_with_output().unwrap());
    let n = std::fs::read_to_string(&metrics).unwrap().lines().count();
    assert_eq!(n, 2);
    assert_eq!(
        std::fs::read_dir(dir.path().join("streamed"))
            .unwrap()
            .count(),
        2
    );
}

#[test]
fn run_on_empty_directory_succeeds_with_zero_frames() {
    let dir = tempfile::tempdir().unwrap();
    assets(dir.path());
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let metrics = dir.path().join("none.jsonl");
    let out = ok(emomask(&[
        "run",
        "--config",
        p(&dir.path().join("config.json")),
        "--in",
        p(&empty),
        "--metrics",
        p(&metrics),
    ]));
    assert!(out.contains('0'), "{out}");
    assert_eq!(
        std::fs::read_to_string(&metrics)
            .unwrap_or_default()
            .lines()
            .count(),
        0
    );

    // bench, by contrast, needs frames to time
    let bench = emomask(&[
        "bench",
        "--config",
        p(&dir.path().join("config.json")),
        "--frames",
        p(&empty),
    ]);
    assert!(!bench.status.success());
}

#[test]
fn missing_config_is_an_error() {
    let out = emomask(&[
        "run",
        "--config",
        "/nonexistent/config.json",
        "--in",
        "/tmp",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn bench_reports_stages() {
    let dir = tempfile::tempdir().unwrap();
    assets(dir.path());
    // bench has no --boxes flag, so point the config at the boxes file
    let cfg_path = dir.path().join("config.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    cfg["boxes"] = "boxes.txt".into();
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let json = dir.path().join("bench.json");
    let stdout = ok(emomask(&[
        "bench",
        "--config",
        p(&cfg_path),
        "--frames",
        p(&dir.path().join("frames")),
        "--repeats",
        "2",
        "--json",
        p(&json),
    ]));
    for stage in ["detect", "classify", "mask", "total"] {
        assert!(stdout.contains(stage), "{stdout}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["frames"], 6);
    assert!(report["fps"].as_f64().unwrap() > 0.0);
}

#[test]
fn classify_and_mask_single_image() {
    let dir = tempfile::tempdir().unwrap();
    assets(dir.path());
    let frame = dir.path().join("frames/frame_000000.png");
    let first_box = std::fs::read_to_string(dir.path().join("boxes.txt")).unwrap();
    let b: Vec<&str> = first_box
        .lines()
        .next()
        .unwrap()
        .split_whitespace()
        .skip(1)
        .collect();
    let bx = b.join(",");

    let out = ok(emomask(&[
        "classify",
        p(&frame),
        "--weights",
        p(&dir.path().join("model.vggw")),
        "--box",
        &bx,
    ]));
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    let total: f64 = v["probs"]
        .as_object()
        .unwrap()
        .values()
        .map(|p| p.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-4);
    let label = v["label"].as_str().unwrap().to_string();

    let masked = dir.path().join("masked.png");
    ok(emomask(&[
        "mask",
        p(&frame),
        "--emoji-dir",
        p(&dir.path().join("emoji")),
        "--label",
        &label,
        "--box",
        &bx,
        "--out",
        p(&masked),
    ]));
    let (a, m) = (Image::load(&frame).unwrap(), Image::load(&masked).unwrap());
    assert_ne!(a, m);
    assert_eq!(a.pixel(0, 0), m.pixel(0, 0));

    let bad = emomask(&[
        "mask",
        p(&frame),
        "--emoji-dir",
        "x",
        "--label",
        "smug",
        "--box",
        &bx,
        "--out",
        "y.png",
    ]);
    assert!(!bad.status.success());
}

#[test]
fn train_svm_then_detect() {
    let dir = tempfile::tempdir().unwrap();
    let (pos, neg) = (dir.path().join("pos"), dir.path().join("neg"));
    std::fs::create_dir_all(&pos).unwrap();
    std::fs::create_dir_all(&neg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..120 {
        let truth = FaceBox::new(0.0, 0.0, 64.0, 64.0, 0.0);
        synth::face_frame(64, 64, truth, &mut rng)
            .save(pos.join(format!("p{i}.png")))
            .unwrap();
    }
    for i in 0..30 {
        synth::background(160, 120, &mut rng)
            .to_gray()
            .save(neg.join(format!("n{i}.png")))
            .unwrap();
    }
    let svm = dir.path().join("det.hsvm");
    let stdout = ok(emomask(&[
        "train-svm",
        "--pos",
        p(&pos),
        "--neg",
        p(&neg),
        "--out",
        p(&svm),
        "--seed",
        "5",
    ]));
    assert!(stdout.contains("training accuracy"), "{stdout}");
    assert!(svm.is_file());

    let truth = FaceBox::new(48.0, 40.0, 96.0, 96.0, 0.0);
    let frame_path = dir.path().join("scene.png");
    synth::face_frame(200, 180, truth, &mut rng)
        .save(&frame_path)
        .unwrap();
    let out = ok(emomask(&[
        "detect",
        p(&frame_path),
        "--svm",
        p(&svm),
        "--min-size",
        "64",
    ]));
    let boxes: Vec<FaceBox> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(boxes.iter().any(|b| b.iou(&truth) >= 0.5), "{boxes:?}");
}

#[test]
fn train_svm_same_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (pos, neg) = (dir.path().join("pos"), dir.path().join("neg"));
    std::fs::create_dir_all(&pos).unwrap();
    std::fs::create_dir_all(&neg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..20 {
        let truth = FaceBox::new(0.0, 0.0, 64.0, 64.0, 0.0);
        synth::face_frame(64, 64, truth, &mut rng)
            .save(pos.join(format!("p{i}.png")))
            .unwrap();
        synth::background(96, 96, &mut rng)
            .to_gray()
            .save(neg.join(format!("n{i}.png")))
            .unwrap();
    }
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(emomask(&[
            "train-svm",
            "--pos",
            p(&pos),
            "--neg",
            p(&neg),
            "--out",
            p(&out),
            "--seed",
            "9",
        ]));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.hsvm"), run("b.hsvm"));
}
