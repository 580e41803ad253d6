use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use berrysize::imaging::{save_png, RasterImage};
use serde_json::Value;

fn berrysize(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_berrysize"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn small_scene(dir: &Path, seed: u64) -> String {
    let d = dir.join(format!("scene{seed}"));
    let out = berrysize(&[
        "synth", "--out", d.to_str().unwrap(), "--seed", &seed.to_string(),
        "--width", "480", "--height", "360", "--disks", "8,12", "--radius", "12,20",
        "--clusters", "1", "--distractors", "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    d.to_str().unwrap().to_string()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.cfg");
    fs::write(&p, "# working size equals input\nresize = none\n").unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn blank_image_succeeds_with_empty_report() {
    let tmp = tempfile::tempdir().unwrap();
    let img = tmp.path().join("blank.png");
    save_png(&RasterImage::filled(160, 120, 3, 0.4), &img).unwrap();
    let out_dir = tmp.path().join("out");
    let cfg = small_config(tmp.path());
    let out = berrysize(&[
        "analyze", img.to_str().unwrap(), "--scale-px", "40", "--config", &cfg,
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert_eq!(report["candidates"], 0);
    assert_eq!(report["histogram"].as_array().unwrap().len(), 0);
    for f in ["report.json", "diameters.csv", "histogram.csv", "overlay.png"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn missing_scale_is_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let img = tmp.path().join("blank.png");
    save_png(&RasterImage::filled(64, 64, 3, 0.4), &img).unwrap();
    let out_dir = tmp.path().join("out");
    let out = berrysize(&["analyze", img.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["exit_code"], 2);
    let saved: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("error.json")).unwrap()).unwrap();
    assert_eq!(saved["error"], "config");
}

#[test]
fn unreadable_image_is_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = berrysize(&["analyze", "does/not/exist.png", "--scale-px", "78", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["error"], "unreadable");
}

#[test]
fn single_disk_has_no_references() {
    let tmp = tempfile::tempdir().unwrap();
    let mut img = RasterImage::filled(200, 200, 3, 0.15);
    for r in 0..200 {
        for c in 0..200 {
            if ((r as f64 - 100.0).powi(2) + (c as f64 - 100.0).powi(2)).sqrt() <= 25.0 {
                for k in 0..3 {
                    img.set(r, c, k, 0.8);
                }
            }
        }
    }
    let path = tmp.path().join("one.png");
    save_png(&img, &path).unwrap();
    let cfg = small_config(tmp.path());
    let out = berrysize(&[
        "analyze", path.to_str().unwrap(), "--radius-px", "15,35", "--config", &cfg,
        "--out", tmp.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(stdout_json(&out)["error"], "classification_unavailable");
}

#[test]
fn unknown_config_key_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.cfg");
    fs::write(&p, "resize = none\nberry_colour = red\n").unwrap();
    let out = berrysize(&["dump-config", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dumped_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let first = berrysize(&["dump-config", "--scale-px", "90", "--pairwise", "literal", "--seed", "7"]);
    assert!(first.status.success());
    let p = tmp.path().join("dump.cfg");
    fs::write(&p, &first.stdout).unwrap();
    let second = berrysize(&["dump-config", "--config", p.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("pairwise = literal") && text.contains("scale_px = 90"));
}

#[test]
fn synth_analyze_eval_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = small_scene(tmp.path(), 5);
    let cfg = small_config(tmp.path());
    let img = format!("{scene}/scene.png");
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out_dir = tmp.path().join(format!("run{run}"));
        let out = berrysize(&[
            "analyze", &img, "--scale-px", "78", "--config", &cfg, "--out", out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        outputs.push(
            ["report.json", "diameters.csv", "histogram.csv"]
                .map(|f| fs::read(out_dir.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);

    let det = tmp.path().join("run0/diameters.csv");
    let out = berrysize(&["eval", det.to_str().unwrap(), &format!("{scene}/truth.json")]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let p = v["score"]["precision"].as_f64().unwrap();
    let r = v["score"]["recall"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r));
    assert!(v["truth_mean_diameter_mm"].as_f64().unwrap() > 0.0);
}

#[test]
fn batch_writes_per_image_reports_and_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("images");
    fs::create_dir(&images).unwrap();
    let mut manual = String::from("image,mean_diameter_mm\n");
    for seed in 1..=3 {
        let scene = small_scene(tmp.path(), seed);
        fs::copy(format!("{scene}/scene.png"), images.join(format!("img{seed}.png"))).unwrap();
        let truth: Value = serde_json::from_str(&fs::read_to_string(format!("{scene}/truth.json")).unwrap()).unwrap();
        let disks = truth["disks"].as_array().unwrap();
        let mm = truth["mm_per_px"].as_f64().unwrap();
        let mean = disks.iter().map(|d| 2.0 * d["circle"]["radius"].as_f64().unwrap()).sum::<f64>() / disks.len() as f64 * mm;
        manual.push_str(&format!("img{seed}.png,{mean}\n"));
    }
    let manual_path = tmp.path().join("manual.csv");
    fs::write(&manual_path, manual).unwrap();
    let cfg = small_config(tmp.path());
    let out_dir = tmp.path().join("batch");
    let out = berrysize(&[
        "batch", images.to_str().unwrap(), "--scale-px", "78", "--config", &cfg,
        "--manual", manual_path.to_str().unwrap(), "--workers", "2", "--out", out_dir.to_str().unwrap(),
    ]);
    let report = stdout_json(&out);
    let entries = report["images"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for (seed, e) in (1..=3).zip(entries) {
        let sub = out_dir.join(format!("img{seed}"));
        if e["status"] == "ok" {
            assert!(sub.join("report.json").is_file());
        } else {
            assert!(sub.join("error.json").is_file());
        }
    }
    assert!(out_dir.join("batch.json").is_file());
    assert_eq!(out.status.code(), Some(entries.iter().map(|e| e["exit_code"].as_i64().unwrap()).max().unwrap() as i32));
    let sized = entries.iter().filter(|e| e["md_mm"].is_number()).count();
    if sized >= 2 {
        assert!(report["agreement"]["correlation"].is_number());
    }
}
