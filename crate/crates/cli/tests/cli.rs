use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cropmix_core::dataset::{decode, read_manifest, read_raw_file, scan_dataset, IMAGE_EXTENSIONS};
use cropmix_core::{PipelineConfig, SeededPipeline};
use serde_json::Value;

fn cropmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cropmix"))
        .args(args)
        .output()
        .unwrap()
}

fn images(root: &Path) -> PathBuf {
    let dir = root.join("in");
    fs::create_dir_all(&dir).unwrap();
    for (k, (w, h)) in [(120u32, 90u32), (64, 100)].into_iter().enumerate() {
        image::RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([
                (x * 2) as u8,
                (y * 2) as u8,
                ((x + y) as u8).wrapping_mul(k as u8 + 3),
            ])
        })
        .save(dir.join(format!("img{k}.png")))
        .unwrap();
    }
    image::GrayImage::from_fn(80, 80, |x, y| image::Luma([((x * y) % 256) as u8]))
        .save(dir.join("gray.png"))
        .unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn count_zero_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty");
    fs::create_dir_all(&input).unwrap();
    let out = tmp.path().join("out");
    let report = json(&cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--count",
        "0",
    ]));
    assert_eq!(report["samples"], 0);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn empty_input_with_count_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("empty");
    fs::create_dir_all(&input).unwrap();
    let out = cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&tmp.path().join("o")),
        "--count",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_config_and_zero_workers_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let input = images(tmp.path());
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "crop_scale = [0.5, 0.2]\n").unwrap();
    let out = tmp.path().join("out");
    let bad = cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--count",
        "1",
        "--config",
        s(&cfg),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let bad = cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--count",
        "1",
        "--config",
        s(&cfg),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    let zero = cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--count",
        "1",
        "--workers",
        "0",
    ]);
    assert_eq!(zero.status.code(), Some(1));
}

#[test]
fn sample_writes_both_formats_and_grayscale_stays_single_channel() {
    let tmp = tempfile::tempdir().unwrap();
    let input = images(tmp.path());
    let out = tmp.path().join("out");
    json(&cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--count",
        "3",
        "--formats",
        "png,raw",
    ]));
    let sources = scan_dataset(&input, IMAGE_EXTENSIONS).unwrap();
    for i in 0..3u64 {
        let m = read_manifest(out.join(format!("sample_{i}.json"))).unwrap();
        assert_eq!(
            m.outputs,
            vec![format!("sample_{i}.cmtx"), format!("sample_{i}.png")]
        );
        let raw = read_raw_file(out.join(&m.outputs[0])).unwrap();
        let channels = decode(&sources[m.source_index]).unwrap().channels();
        assert_eq!(raw.shape(), (channels, 224, 224));
        let png = image::open(out.join(&m.outputs[1])).unwrap();
        assert_eq!((png.width(), png.height()), (224, 224));
    }
    assert!(fs::read_dir(&out).unwrap().all(|e| !e
        .unwrap()
        .file_name()
        .to_string_lossy()
        .ends_with(".tmp")));
}

#[test]
fn replay_detects_a_corrupted_output() {
    let tmp = tempfile::tempdir().unwrap();
    let input = images(tmp.path());
    let out = tmp.path().join("out");
    json(&cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--count",
        "5",
        "--seed",
        "9",
    ]));

    let ok = json(&cropmix(&[
        "replay",
        "--input",
        s(&input),
        "--output",
        s(&out),
    ]));
    assert_eq!(ok["checked"], 5);
    assert_eq!(ok["matched"], 5);

    let victim = out.join("sample_3.cmtx");
    let mut bytes = fs::read(&victim).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x01;
    fs::write(&victim, bytes).unwrap();
    let bad = cropmix(&["replay", "--input", s(&input), "--output", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(report["mismatched"], serde_json::json!([3]));
}

#[test]
fn replay_rejects_a_different_config() {
    let tmp = tempfile::tempdir().unwrap();
    let input = images(tmp.path());
    let out = tmp.path().join("out");
    json(&cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--count",
        "2",
    ]));
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "resolution = 64\n").unwrap();
    let r = cropmix(&[
        "replay",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--config",
        s(&cfg),
    ]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn stats_reports_partitions_and_weights() {
    let report = json(&cropmix(&["stats", "--count", "3000", "--seed", "1"]));
    assert_eq!(report["trials"], 3000);
    let hist = report["n_histogram"].as_object().unwrap();
    assert_eq!(hist.keys().collect::<Vec<_>>(), ["2", "3", "4"]);
    assert_eq!(
        hist.values().map(|v| v.as_u64().unwrap()).sum::<u64>(),
        3000
    );
    for p in report["partitions"].as_array().unwrap() {
        let (lo, hi) = (p["lo"].as_f64().unwrap(), p["hi"].as_f64().unwrap());
        assert!(p["area_min"].as_f64().unwrap() >= lo * 0.98);
        assert!(p["area_max"].as_f64().unwrap() <= hi * 1.02);
    }
    for l in report["lambda"].as_array().unwrap() {
        let n = l["n"].as_f64().unwrap();
        assert!((l["alpha"].as_f64().unwrap() - 0.4 / n).abs() < 1e-12);
        assert!((l["mean"].as_f64().unwrap() - 0.5).abs() < 0.05);
    }
    assert_eq!(
        report["permutation_histogram"].as_object().unwrap().len(),
        6
    );
    assert!(report["cutmix_effective_fraction_mean"].is_null());
}

#[test]
fn bench_reports_both_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let input = images(tmp.path());
    let report = json(&cropmix(&[
        "bench",
        "--input",
        s(&input),
        "--count",
        "40",
        "--workers",
        "2",
    ]));
    assert_eq!(report["samples"], 40);
    assert_eq!(report["workers"], 2);
    assert_eq!(report["baseline"]["label"], "rrc");
    assert_eq!(report["candidate"]["label"], "cropmix");
    for key in ["baseline", "candidate"] {
        let shares = report[key]["stage_shares"].as_object().unwrap();
        let total: f64 = shares.values().map(|v| v.as_f64().unwrap()).sum();
        assert!((total - 100.0).abs() < 1e-6, "{total}");
    }
    assert!(report["overhead_ratio"].as_f64().unwrap() > 0.0);
}

/// The flat-buffer interface used by host-language bindings reproduces CLI
/// outputs and manifests exactly.
#[test]
fn seeded_pipeline_matches_cli_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let input = images(tmp.path());
    let out = tmp.path().join("out");
    json(&cropmix(&[
        "sample",
        "--input",
        s(&input),
        "--output",
        s(&out),
        "--count",
        "12",
        "--seed",
        "31",
    ]));

    let pipeline = SeededPipeline::new(PipelineConfig::default(), 31).unwrap();
    let sources = scan_dataset(&input, IMAGE_EXTENSIONS).unwrap();
    for i in 0..12u64 {
        let m = read_manifest(out.join(format!("sample_{i}.json"))).unwrap();
        let src = decode(&sources[m.source_index]).unwrap();
        let (c, h, w) = src.shape();
        let shape = [c, h, w];
        let data = pipeline.apply_buffer(src.data(), &shape, i).unwrap();
        let stored = read_raw_file(out.join(format!("sample_{i}.cmtx"))).unwrap();
        assert_eq!(
            data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            stored
                .data()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        );
        let plan = pipeline.plan_buffer(src.data(), &shape, i).unwrap();
        assert_eq!(plan, serde_json::to_value(&m.plan).unwrap());
    }
}
