use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdass::ply::{load_ply, save_ply, PlyData, PlyFormat};
use sdass::{synthetic, RigidTransform};

fn sdass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdass"))
        .args(args)
        .env("SDASS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sdass(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary(dir: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(dir.join("summary.csv")).unwrap();
    let mut lines = text.lines();
    let keys = lines.next().unwrap().split(',').map(String::from);
    let values = lines.next().unwrap().split(',').map(String::from);
    keys.zip(values).collect()
}

fn field(dir: &Path, key: &str) -> String {
    summary(dir).into_iter().find(|(k, _)| k == key).unwrap().1
}

fn model_ply(dir: &Path) -> PathBuf {
    let p = dir.join("model.ply");
    save_ply(
        &PlyData::Cloud(synthetic::bumpy_sphere(3000, 10.0, 2)),
        &p,
        PlyFormat::Ascii,
    )
    .unwrap();
    p
}

const SMALL: [&str; 4] = ["--radius-mr", "8", "--lma-mr", "4"];

#[test]
fn perturb_identity_reproduces_input() {
    let tmp = tempfile::tempdir().unwrap();
    let model = model_ply(tmp.path());
    let out = tmp.path().join("p");
    ok(&[
        "perturb",
        path(&model),
        "--noise-mr",
        "0",
        "--decimate",
        "1",
        "--out",
        path(&out),
    ]);
    let a = load_ply(&model).unwrap();
    let b = load_ply(out.join("perturbed.ply")).unwrap();
    assert_eq!(a.cloud(), b.cloud());
    let gt = RigidTransform::parse_text(&fs::read_to_string(out.join("gt.transform")).unwrap()).unwrap();
    assert_eq!(gt, RigidTransform::identity());
    assert!(out.join("manifest.txt").exists());
}

#[test]
fn perturb_transform_round_trips_through_gt() {
    let tmp = tempfile::tempdir().unwrap();
    let model = model_ply(tmp.path());
    let out = tmp.path().join("p");
    ok(&[
        "perturb",
        path(&model),
        "--transform-seed",
        "4",
        "--format",
        "ascii",
        "--out",
        path(&out),
    ]);
    let a = load_ply(&model).unwrap();
    let b = load_ply(out.join("perturbed.ply")).unwrap();
    let gt = RigidTransform::parse_text(&fs::read_to_string(out.join("gt.transform")).unwrap()).unwrap();
    for (p, q) in a.cloud().points().iter().zip(b.cloud().points()) {
        assert!((gt.apply(q) - p).norm() < 1e-9);
    }
}

#[test]
fn self_match_has_unit_auc_and_replays_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let model = model_ply(tmp.path());
    let feat = tmp.path().join("f");
    let mut args = vec![
        "describe",
        path(&model),
        "--sample",
        "120",
        "--seed",
        "3",
        "--csv",
        "--out",
        path(&feat),
    ];
    args.extend(SMALL);
    ok(&args);
    assert_eq!(field(&feat, "failed"), "0");
    let gt = tmp.path().join("identity.transform");
    fs::write(&gt, RigidTransform::identity().to_text()).unwrap();
    let features = feat.join("features.feat");
    let m = tmp.path().join("m");
    let stdout = ok(&["match", path(&features), path(&features), path(&gt), "--out", path(&m)]);
    assert!(stdout.contains("auc_pr=1.0"));
    assert_eq!(field(&m, "auc_pr"), "1.0");
    assert_eq!(field(&m, "pcc"), "100.0");

    for (dir, files) in [
        (&feat, vec!["summary.csv", "features.csv"]),
        (&m, vec!["summary.csv", "rpc.csv"]),
    ] {
        let replayed = tmp
            .path()
            .join(format!("replay-{}", dir.file_name().unwrap().to_str().unwrap()));
        ok(&[
            "--manifest",
            path(&dir.join("manifest.txt")),
            "--replay-out",
            path(&replayed),
        ]);
        for f in files {
            assert_eq!(
                fs::read(dir.join(f)).unwrap(),
                fs::read(replayed.join(f)).unwrap(),
                "{f}"
            );
        }
    }
}

#[test]
fn replay_detects_changed_input() {
    let tmp = tempfile::tempdir().unwrap();
    let model = model_ply(tmp.path());
    let out = tmp.path().join("mr");
    ok(&["mr", path(&model), "--out", path(&out)]);
    save_ply(
        &PlyData::Cloud(synthetic::bumpy_sphere(3000, 10.0, 9)),
        &model,
        PlyFormat::Ascii,
    )
    .unwrap();
    let r = sdass(&[
        "--manifest",
        path(&out.join("manifest.txt")),
        "--replay-out",
        path(&tmp.path().join("r")),
    ]);
    assert_eq!(r.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error kind=replay_mismatch"));
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let model = model_ply(tmp.path());
    let out = path(tmp.path()).to_string();
    let junk = tmp.path().join("junk.ply");
    fs::write(&junk, "not a ply\n").unwrap();
    let single = tmp.path().join("single.ply");
    save_ply(
        &PlyData::Cloud(sdass::PointCloud::from_xyz(&[[0.0, 0.0, 0.0]]).unwrap()),
        &single,
        PlyFormat::Ascii,
    )
    .unwrap();

    let cases: [(&[&str], i32, &str); 5] = [
        (
            &["perturb", path(&model), "--decimate", "2", "--out", &out],
            2,
            "invalid_parameter",
        ),
        (&["mr", path(&junk), "--out", &out], 3, "ply"),
        (&["mr", path(&single), "--out", &out], 4, "degenerate_input"),
        (&["mr", "/nonexistent/cloud.ply", "--out", &out], 5, "io"),
        (&["frobnicate"], 2, "usage"),
    ];
    for (args, code, kind) in cases {
        let r = sdass(args);
        assert_eq!(r.status.code(), Some(code), "{args:?}");
        let stderr = String::from_utf8_lossy(&r.stderr);
        assert!(stderr.starts_with(&format!("error kind={kind} message=")), "{stderr}");
    }
}

#[test]
fn axes_and_register_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let model = model_ply(tmp.path());
    let p = tmp.path().join("p");
    ok(&[
        "perturb",
        path(&model),
        "--transform-seed",
        "1",
        "--noise-mr",
        "0.1",
        "--noise-seed",
        "2",
        "--out",
        path(&p),
    ]);
    let scene = p.join("perturbed.ply");
    let gt = p.join("gt.transform");

    let ax = tmp.path().join("ax");
    ok(&[
        "axes",
        path(&scene),
        path(&model),
        path(&gt),
        "--axis",
        "lma",
        "--keypoints",
        "100",
        "--out",
        path(&ax),
    ]);
    let rep: f64 = field(&ax, "repeatability").parse().unwrap();
    assert!((0.0..=1.0).contains(&rep));

    let reg = tmp.path().join("reg");
    let mut args = vec![
        "register",
        path(&scene),
        path(&model),
        "--keypoints",
        "600",
        "--seed",
        "5",
        "--gt",
        path(&gt),
        "--out",
        path(&reg),
    ];
    args.extend(SMALL);
    ok(&args);
    let rot: f64 = field(&reg, "rotation_error_deg").parse().unwrap();
    assert!(rot < 5.0, "rotation error {rot}");
    assert!(reg.join("registration.transform").exists());
}
