//! End-to-end runs of the `patchregen` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use patchregen::image::{load_mask_png, load_png, save_png, Image};
use patchregen::patch::smooth_gradient;
use patchregen_cli::bench::BenchReport;
use patchregen_cli::defend::RunManifest;
use patchregen_cli::evaluate::EvalOutput;
use patchregen_cli::fixture::PlacementManifest;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_patchregen"));
    c.env_remove("PATCHREGEN_INPAINT_URL");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_image(path: &Path, w: usize, h: usize) {
    save_png(&smooth_gradient(w, h), path).unwrap();
}

fn small() -> [&'static str; 4] {
    ["--canonical-size", "64", "--n-grids", "8"]
}

fn dead_url() -> String {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    format!("http://127.0.0.1:{port}")
}

#[test]
fn defend_identity_single_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("scene.png");
    write_image(&input, 40, 30);
    let out_dir = dir.path().join("out");
    let out = run(bin()
        .args(["defend", input.to_str().unwrap(), "-o", out_dir.to_str().unwrap(), "--backend", "identity-stub"])
        .args(small()));
    assert!(out.status.success());
    assert_eq!(load_png(out_dir.join("scene_output.png")).unwrap(), load_png(&input).unwrap());
    assert_eq!(load_mask_png(out_dir.join("scene_mask.png")).unwrap().count_ones(), 0);
    assert!(out_dir.join("scene_regen.png").exists());

    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.images.len(), 1);
    assert!(m.failures.is_empty());
    assert_eq!(m.config.canonical_size, 64);
    assert_eq!(m.config_sha256.len(), 64);
    assert_eq!(m.images[0].input_sha256.len(), 64);
    assert_eq!(m.backend.name, "identity-stub");
}

#[test]
fn defend_directory_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    std::fs::create_dir(&input).unwrap();
    for (i, name) in ["a", "b", "c"].iter().enumerate() {
        let mut img = smooth_gradient(48, 48);
        img.set(10 + i, 10, [1.0, 0.0, 0.0]);
        save_png(&img, input.join(format!("{name}.png"))).unwrap();
    }
    let runs: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("out{k}"))).collect();
    for (k, out_dir) in runs.iter().enumerate() {
        let jobs = if k == 0 { "1" } else { "3" };
        let out = run(bin()
            .args(["defend", input.to_str().unwrap(), "-o", out_dir.to_str().unwrap(), "-j", jobs, "--backend", "native"])
            .args(small()));
        assert!(out.status.success());
    }
    let files = |d: &Path| {
        let mut v: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(files(&runs[0]).len(), 10);
    for name in files(&runs[0]) {
        if name != "manifest.json" {
            assert_eq!(
                std::fs::read(runs[0].join(&name)).unwrap(),
                std::fs::read(runs[1].join(&name)).unwrap(),
                "{name:?} differs between runs"
            );
        }
    }
}

#[test]
fn config_file_and_flag_precedence_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.png");
    write_image(&input, 16, 16);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "canonical_size = 32\nn_grids = 4\nsteps = 10\nseed = 3\n[backend]\nkind = \"constant-stub\"\nvalue = 0.2\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = run(bin().args([
        "defend",
        input.to_str().unwrap(),
        "-o",
        out_dir.to_str().unwrap(),
        "-c",
        cfg.to_str().unwrap(),
        "--steps",
        "50",
    ]));
    assert!(out.status.success());
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.config.steps, 50);
    assert_eq!(m.config.n_grids, 4);
    assert_eq!((m.seeds.first, m.seeds.second), (Some(3), Some(4)));
}

#[test]
fn exit_codes_partition_failures() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.png");
    write_image(&input, 16, 16);
    let out_dir = dir.path().join("o");

    // missing input
    let out = run(bin().args(["defend", "/nonexistent/dir", "-o", out_dir.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(3));

    // unreachable backend, URL from the environment
    let url = dead_url();
    let out = run(bin()
        .env("PATCHREGEN_INPAINT_URL", &url)
        .args(["defend", input.to_str().unwrap(), "-o", out_dir.to_str().unwrap(), "--backend", "remote", "--timeout-ms", "2000"])
        .args(small()));
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&url));
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.failures.len(), 1);

    // invalid configuration
    let out = run(bin().args(["defend", input.to_str().unwrap(), "-o", out_dir.to_str().unwrap(), "--blur-kernel", "4"]));
    assert_eq!(out.status.code(), Some(2));

    // schema violation
    let gt = dir.path().join("gt.json");
    std::fs::write(&gt, r#"{"annotations":[{"image_id":1,"bbox":[10,20,-5,5],"category_id":1}]}"#).unwrap();
    let dets = dir.path().join("dets.json");
    std::fs::write(&dets, "[]").unwrap();
    let out = run(bin().args(["eval", "--gt", gt.to_str().unwrap(), "--dets", dets.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("record 0"));
}

fn eval(dir: &Path, gt: &str, dets: &str, extra: &[&str]) -> EvalOutput {
    let g = dir.join("gt.json");
    let d = dir.join("dets.json");
    std::fs::write(&g, gt).unwrap();
    std::fs::write(&d, dets).unwrap();
    let report = dir.join("report.json");
    let out = run(bin()
        .args(["eval", "--gt", g.to_str().unwrap(), "--dets", d.to_str().unwrap(), "-o", report.to_str().unwrap()])
        .args(extra));
    assert!(out.status.success());
    let from_stdout: EvalOutput = serde_json::from_slice(&out.stdout).unwrap();
    let from_file: EvalOutput = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(from_stdout, from_file);
    from_stdout
}

#[test]
fn eval_modes() {
    let dir = tempfile::tempdir().unwrap();
    let gt = r#"{"images":[{"id":1}],"annotations":[{"image_id":1,"bbox":[0,0,100,100],"category_id":1}]}"#;

    let perfect = r#"[{"image_id":1,"bbox":[0,0,100,100],"score":0.99,"category_id":1}]"#;
    assert_eq!(eval(dir.path(), gt, perfect, &["--mode", "map"]).value, 1.0);

    let partial = r#"[{"image_id":1,"bbox":[0,0,100,65],"score":0.99,"category_id":1}]"#;
    let ar = eval(dir.path(), gt, partial, &["--mode", "ar"]).value;
    assert!((ar - 0.4).abs() < 1e-12);

    let patch_gt = r#"{"annotations":[{"image_id":1,"bbox":[0,0,100,100],"category_id":1,"is_patch":true}]}"#;
    let weak = r#"[{"image_id":1,"bbox":[0,0,100,15],"score":0.35,"category_id":3}]"#;
    let out = eval(dir.path(), patch_gt, weak, &["--mode", "asr-creating"]);
    assert_eq!(out.value, 1.0);
    assert_eq!(out.report.asr, Some(1.0));
    let targeted = eval(dir.path(), patch_gt, weak, &["--mode", "asr-creating", "--target-class", "1"]);
    assert_eq!(targeted.value, 0.0);

    let hidden = r#"[{"image_id":1,"bbox":[0,0,100,100],"score":0.85,"category_id":1}]"#;
    assert_eq!(eval(dir.path(), gt, hidden, &["--mode", "asr-hiding"]).value, 1.0);
    assert_eq!(
        eval(dir.path(), gt, hidden, &["--mode", "asr-hiding", "--score-threshold", "0.8"]).value,
        0.0
    );
}

#[test]
fn attack_fixture_single_sweep_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("imgs");
    std::fs::create_dir(&images).unwrap();
    write_image(&images.join("walker.png"), 60, 60);
    let gt = dir.path().join("gt.json");
    std::fs::write(
        &gt,
        r#"{"images":[{"id":1,"file_name":"walker.png"}],
            "annotations":[{"image_id":1,"bbox":[0,0,30,40],"category_id":1}]}"#,
    )
    .unwrap();
    let fixture = |out: &Path, extra: &[&str]| {
        run(bin()
            .args(["attack-fixture", images.to_str().unwrap(), "--targets", gt.to_str().unwrap(), "-o", out.to_str().unwrap()])
            .args(extra))
    };

    let a = dir.path().join("a");
    assert!(fixture(&a, &["--seed", "5", "--ratio", "0.2"]).status.success());
    let m: PlacementManifest = serde_json::from_str(&std::fs::read_to_string(a.join("placements.json")).unwrap()).unwrap();
    assert_eq!(m.placements.len(), 1);
    assert_eq!(m.placements[0].height, 10);
    assert_eq!(m.placements[0].target_height, 10.0);
    let original = load_png(images.join("walker.png")).unwrap();
    let patched: Image = load_png(a.join("walker.png")).unwrap();
    assert_ne!(patched, original);

    let b = dir.path().join("b");
    assert!(fixture(&b, &["--seed", "5", "--ratio", "0.2"]).status.success());
    assert_eq!(std::fs::read(a.join("walker.png")).unwrap(), std::fs::read(b.join("walker.png")).unwrap());

    let s = dir.path().join("sweep");
    assert!(fixture(&s, &["--seed", "5", "--ratio", "0.3", "--sweep"]).status.success());
    for r in ["0.20", "0.25", "0.30"] {
        assert!(s.join(format!("ratio_{r}/walker.png")).exists());
        assert!(s.join(format!("ratio_{r}/patch_annotations.json")).exists());
    }

    let empty_gt = dir.path().join("empty.json");
    std::fs::write(&empty_gt, r#"{"images":[],"annotations":[]}"#).unwrap();
    let out = run(bin().args([
        "attack-fixture",
        images.to_str().unwrap(),
        "--targets",
        empty_gt.to_str().unwrap(),
        "-o",
        dir.path().join("z").to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_json_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    for i in 0..10 {
        write_image(&corpus.join(format!("{i:02}.png")), 24 + i, 24);
    }
    let report_path = dir.path().join("bench.json");
    let out = run(bin()
        .args(["bench", corpus.to_str().unwrap(), "--backend", "identity-stub", "-o", report_path.to_str().unwrap(), "--json"])
        .args(small()));
    assert!(out.status.success());
    let r: BenchReport = serde_json::from_slice(&out.stdout).unwrap();
    r.validate().unwrap();
    for (_, s) in r.stage_list() {
        assert_eq!(s.samples.len(), 10);
    }
    let from_file: BenchReport = serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(from_file, r);

    let out = run(bin().args(["bench", corpus.to_str().unwrap(), "--backend", "identity-stub"]).args(small()));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("regeneration") && table.contains("rectification"));
}
