use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blurforge::baselines::naive_average;
use blurforge::flow::{write_flo, FlowField};
use blurforge::imgcore::{read_image, write_image};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blurforge"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).env_remove("BLURFORGE_THREADS").output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Parse `name,psnr,ssim` rows into `(name, psnr)`.
fn psnr_rows(csv: &str) -> Vec<(String, f64)> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("name,psnr,ssim"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap())
        })
        .collect()
}

fn small_scene(dir: &Path, name: &str) -> PathBuf {
    ok(dir, &[
        "gen-scene", "-o", name, "--width", "40", "--height", "32", "--size", "12",
        "--start", "6,8", "--velocity", "12,4",
    ]);
    dir.join(name)
}

#[test]
fn average_evaluated_against_itself_is_infinite() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = small_scene(tmp.path(), "scene");
    assert_eq!(fs::read_dir(&scene).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pfm")
    }).count(), 33);
    ok(tmp.path(), &["average", "scene", "-o", "gt.pfm"]);
    let csv = ok(tmp.path(), &["eval", "--reference", "gt.pfm", "self=gt.pfm"]);
    assert_eq!(csv, "name,psnr,ssim\nself,inf,1.000000\n");
    assert!(scene.join("manifest.json").is_file());
    assert!(tmp.path().join("gt.pfm.manifest.json").is_file());
    assert!(tmp.path().join("blurforge-eval.manifest.json").is_file());
}

#[test]
fn zero_flow_blur_is_the_naive_average() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = small_scene(tmp.path(), "scene");
    let i1 = read_image(scene.join("000000.pfm")).unwrap();
    let i2 = read_image(scene.join("000032.pfm")).unwrap();
    write_image(tmp.path().join("mean.pfm"), &naive_average(&i1, &i2).unwrap()).unwrap();
    let z = FlowField::zeros(40, 32).unwrap();
    write_flo(tmp.path().join("zero.flo"), &z).unwrap();
    ok(tmp.path(), &[
        "blur-flow", "scene/000000.pfm", "scene/000032.pfm", "--flow-fwd", "zero.flo",
        "--flow-bwd", "zero.flo", "-o", "blur.pfm",
    ]);
    let csv = ok(tmp.path(), &["eval", "--reference", "mean.pfm", "blur.pfm"]);
    assert_eq!(psnr_rows(&csv), vec![("blur".to_string(), f64::INFINITY)]);
}

#[test]
fn full_pipeline_fit_beats_naive() {
    let tmp = tempfile::tempdir().unwrap();
    small_scene(tmp.path(), "scene");
    ok(tmp.path(), &["average", "scene", "-o", "gt.pfm"]);
    let summary = ok(tmp.path(), &[
        "fit", "scene/000000.pfm", "scene/000032.pfm", "gt.pfm", "-o", "fit.lpf",
        "--iterations", "120", "--trace", "trace.csv", "--render", "fit.pfm",
    ]);
    assert!(summary.starts_with("final_loss="));
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,loss,psnr\n"));
    assert_eq!(trace.lines().count(), 122);

    let i1 = read_image(tmp.path().join("scene/000000.pfm")).unwrap();
    let i2 = read_image(tmp.path().join("scene/000032.pfm")).unwrap();
    write_image(tmp.path().join("naive.pfm"), &naive_average(&i1, &i2).unwrap()).unwrap();
    let rows = psnr_rows(&ok(tmp.path(), &[
        "eval", "--reference", "gt.pfm", "naive=naive.pfm", "fit=fit.pfm",
    ]));
    assert_eq!(rows[0].0, "fit");
    assert!(rows[0].1 > rows[1].1, "{rows:?}");

    let report = ok(tmp.path(), &["check-sampling", "fit.lpf"]);
    assert!(report.contains("undersampled=0"), "{report}");
}

#[test]
fn replay_reproduces_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    small_scene(tmp.path(), "scene");
    ok(tmp.path(), &[
        "blur-flow", "scene/000000.pfm", "scene/000032.pfm", "--estimate", "--mode", "negback",
        "-o", "est.pfm",
    ]);
    ok(tmp.path(), &[
        "fit", "scene/000000.pfm", "scene/000032.pfm", "est.pfm", "-o", "fit.lpf",
        "--iterations", "10", "--render", "fit.pfm", "--manifest", "fit.json",
    ]);
    let before_est = fs::read(tmp.path().join("est.pfm")).unwrap();
    let before_fit = fs::read(tmp.path().join("fit.pfm")).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["params"]["iterations"], 10);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(manifest["wall_ms"].is_u64());

    fs::remove_file(tmp.path().join("est.pfm")).unwrap();
    fs::remove_file(tmp.path().join("fit.pfm")).unwrap();
    ok(tmp.path(), &["replay", "est.pfm.manifest.json"]);
    ok(tmp.path(), &["replay", "fit.json"]);
    assert_eq!(fs::read(tmp.path().join("est.pfm")).unwrap(), before_est);
    assert_eq!(fs::read(tmp.path().join("fit.pfm")).unwrap(), before_fit);
}

#[test]
fn filter_records_are_sorted() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &[
        "gen-scene", "-o", "src", "--width", "80", "--height", "64", "--size", "26",
        "--start", "2,12", "--velocity", "10,0", "--frames", "3", "--substeps", "1",
    ]);
    for name in ["t_b", "t_a"] {
        let d = tmp.path().join("triplets").join(name);
        fs::create_dir_all(&d).unwrap();
        for k in 0..3 {
            let f = format!("{k:06}.pfm");
            fs::copy(tmp.path().join("src").join(&f), d.join(&f)).unwrap();
        }
    }
    let out = ok(tmp.path(), &["filter", "triplets"]);
    let ids: Vec<&str> = out.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(ids, ["t_a", "t_b"]);
    assert!(out.lines().all(|l| l.contains(" c5=") && l.contains(" accept=")));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0].split_once(' ').unwrap().1, lines[1].split_once(' ').unwrap().1);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let unknown = run_in(dir, &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    assert_eq!(run_in(dir, &["render", "a.pfm", "b.pfm", "c.lpf", "-o", "x.pfm"]).status.code(), Some(1));
    assert_eq!(run_in(dir, &["--help"]).status.code(), Some(0));

    fs::write(dir.join("bad.pfm"), b"PF\n2 2\n-1.0\n\x00\x00").unwrap();
    let bad = run_in(dir, &["eval", "--reference", "bad.pfm", "bad.pfm"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bad.pfm"));

    small_scene(dir, "scene");
    let blow_up = run_in(dir, &[
        "fit", "scene/000000.pfm", "scene/000032.pfm", "scene/000016.pfm", "-o", "f.lpf",
        "--iterations", "3", "--step", "1e300",
    ]);
    assert_eq!(blow_up.status.code(), Some(3), "{}", String::from_utf8_lossy(&blow_up.stderr));

    let threads = bin()
        .current_dir(dir)
        .args(["check-sampling", "f.lpf"])
        .env("BLURFORGE_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(1));
}
