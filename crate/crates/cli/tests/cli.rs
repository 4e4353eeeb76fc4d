use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phaselab::io::read_field;
use serde_json::Value;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn phaselab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phaselab")).args(args).output().expect("binary runs")
}

fn run_ok(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = phaselab(&args);
    assert!(o.status.success(), "{sub} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn csv_numbers(path: &Path) -> Vec<f64> {
    fs::read_to_string(path).unwrap().lines().skip(1).flat_map(|l| l.split(',').map(str::to_owned).collect::<Vec<_>>()).filter_map(|c| c.parse().ok()).collect()
}

#[test]
fn portrait_m2_decays_off_the_graph() {
    let tmp = TempDir::new().unwrap();
    run_ok("fresnel-portrait", &configs().join("portrait_m2.json"), tmp.path(), &[]);
    let r = json(&tmp.path().join("report.json"));
    assert!(r["decay_slope"].as_f64().unwrap() <= -6.0, "{r}");
    assert!(r["modulation_drift"].as_f64().unwrap() < 0.05);
    for f in ["portrait.csv", "slices.csv", "manifest.json"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
}

#[test]
fn portrait_m3_modulation_norm_is_stable() {
    let tmp = TempDir::new().unwrap();
    run_ok("fresnel-portrait", &configs().join("portrait_m3.json"), tmp.path(), &[]);
    let r = json(&tmp.path().join("report.json"));
    assert!(r["modulation_drift"].as_f64().unwrap() < 0.05, "{r}");
}

#[test]
fn portrait_m3_slice_growth() {
    let tmp = TempDir::new().unwrap();
    run_ok("fresnel-portrait", &configs().join("portrait_m3.json"), tmp.path(), &[]);
    let e = json(&tmp.path().join("report.json"))["w_slice_exponent"].as_f64().unwrap();
    assert!((e - 1.0).abs() <= 0.15, "slice growth exponent {e}");
}

#[test]
fn decay_scan_slopes() {
    for (name, want) in [("decay_m2_d1.json", -1.0), ("decay_m4_d1_large.json", -0.25)] {
        let tmp = TempDir::new().unwrap();
        run_ok("decay-scan", &configs().join(name), tmp.path(), &[]);
        let slope = json(&tmp.path().join("slope.json"))["slope"].as_f64().unwrap();
        assert!((slope - want).abs() <= 0.1 * want.abs(), "{name}: {slope}");
        assert_eq!(fs::read_to_string(tmp.path().join("decay.csv")).unwrap().lines().count(), 6);
    }
}

#[test]
fn decay_scan_edge_cases() {
    let tmp = TempDir::new().unwrap();
    let empty = write_config(&tmp, "empty.json", r#"{"symbol": {"kind": "radial_power", "dim": 1, "m": 2.0}, "t_list": []}"#);
    let out = tmp.path().join("empty_out");
    let o = phaselab(&["decay-scan", empty.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parameter error"));
    assert!(!out.exists());

    let single = write_config(&tmp, "single.json", r#"{"symbol": {"kind": "radial_power", "dim": 1, "m": 2.0}, "t_list": [0.5]}"#);
    let out = tmp.path().join("single_out");
    let o = run_ok("decay-scan", &single, &out, &[]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert!(json(&out.join("slope.json"))["slope"].is_null());
    assert_eq!(fs::read_to_string(out.join("decay.csv")).unwrap().lines().count(), 2);
}

#[test]
fn malformed_config_leaves_no_outputs() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(&tmp, "bad.json", "{\n  \"symbol\": {\"kind\": \"radial_power\", \"dim\": 1, \"m\": 2.0},\n  \"t_list\": [0.1,\n}\n");
    let out = tmp.path().join("out");
    let o = phaselab(&["decay-scan", bad.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());

    let unknown = write_config(&tmp, "unknown.json", r#"{"symbol": {"kind": "radial_power", "dim": 1, "m": 2.0}, "t_list": [0.1], "tlist": 1}"#);
    let o = phaselab(&["decay-scan", unknown.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let missing = tmp.path().join("missing.json");
    let o = phaselab(&["solve", missing.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn refused_runs_use_documented_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = phaselab(&["solve", configs().join("solve_nonlinear_global.json").to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mode error"));

    let alias = write_config(
        &tmp,
        "alias.json",
        r#"{"grid": {"dim": 1, "points": 256, "extent": 32.0}, "symbol": {"kind": "radial_power", "dim": 1, "m": 4.0},
            "f": {"kind": "gaussian"}, "times": [100.0]}"#,
    );
    let o = phaselab(&["propagate", alias.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let diverging = write_config(
        &tmp,
        "diverging.json",
        r#"{"grid": {"dim": 1, "points": 256, "extent": 32.0}, "symbol": {"kind": "radial_power", "dim": 1, "m": 4.0},
            "potential": {"variant": "dirac_comb", "dim": 1, "points": [[0.0]], "weights": [[20.0, 0.0]]},
            "f": {"kind": "gaussian"}, "t_max": 0.5, "step": 0.5, "radius": 2.0,
            "tolerances": {"quadrature": 1.0, "nodes": 64}}"#,
    );
    let o = phaselab(&["solve", diverging.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!out.exists());
}

#[test]
fn runs_are_deterministic_and_manifests_replay() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let cfg = configs().join("solve_dirac_m4.json");
    run_ok("solve", &cfg, &a, &["--seed", "3"]);
    run_ok("solve", &cfg, &b, &["--seed", "3"]);
    run_ok("solve", &a.join("manifest.json"), &c, &[]);
    let ma = json(&a.join("manifest.json"));
    let mc = json(&c.join("manifest.json"));
    assert_eq!(ma["outputs"], mc["outputs"]);
    assert_eq!(ma["seed"], 3);
    assert_eq!(mc["seed"], 3);
    for f in ["diagnostics.csv", "samples.csv", "final_slice.csv", "u_window0002.bin"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let o = phaselab(&["decay-scan", a.join("manifest.json").to_str().unwrap(), "--out-dir", tmp.path().join("d").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn random_data_follow_the_seed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        &tmp,
        "random.json",
        r#"{"grid": {"dim": 1, "points": 256, "extent": 32.0}, "symbol": {"kind": "radial_power", "dim": 1, "m": 2.0},
            "f": {"kind": "random_phase", "band": 2.0}, "times": [0.5]}"#,
    );
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        run_ok("propagate", &cfg, &out, &["--seed", seed]);
        fs::read(out.join("u_t000.bin")).unwrap()
    };
    let (a, b, c) = (run("1", "a"), run("1", "b"), run("2", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn thread_counts_agree() {
    let tmp = TempDir::new().unwrap();
    for (sub, cfg, file) in [
        ("solve", "solve_dirac_m4.json", "samples.csv"),
        ("fresnel-portrait", "portrait_m2.json", "slices.csv"),
        ("norms", "norms_gaussian.json", "norms.csv"),
    ] {
        let one = tmp.path().join(format!("{sub}_1"));
        let eight = tmp.path().join(format!("{sub}_8"));
        run_ok(sub, &configs().join(cfg), &one, &["--threads", "1"]);
        run_ok(sub, &configs().join(cfg), &eight, &["--threads", "8"]);
        let (x, y) = (csv_numbers(&one.join(file)), csv_numbers(&eight.join(file)));
        assert_eq!(x.len(), y.len());
        for (a, b) in x.iter().zip(&y) {
            assert!(a == b || (a - b).abs() <= 1e-12 * a.abs().max(1.0), "{sub}: {a} vs {b}");
        }
    }
}

#[test]
fn free_solve_matches_propagate() {
    let tmp = TempDir::new().unwrap();
    let (s, p) = (tmp.path().join("s"), tmp.path().join("p"));
    run_ok("solve", &configs().join("solve_free_m4.json"), &s, &[]);
    run_ok("propagate", &configs().join("propagate_free_m4.json"), &p, &[]);
    let traj = json(&s.join("trajectory.json"));
    assert!((traj["final_time"].as_f64().unwrap() - 0.05).abs() < 1e-15);
    let last = traj["windows"].as_array().unwrap().len() - 1;
    let u = read_field(fs::File::open(s.join(format!("u_window{last:04}.bin"))).unwrap()).unwrap();
    let v = read_field(fs::File::open(p.join("u_t001.bin")).unwrap()).unwrap();
    assert_eq!(u.grid(), v.grid());
    let err = u.values().iter().zip(v.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn potential_reports() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sphere");
    run_ok("potential-ft", &configs().join("potential_sphere.json"), &out, &[]);
    let nums = csv_numbers(&out.join("potential_ft.csv"));
    // First row is ξ = 0, where the transform is the mass.
    assert!((nums[1] - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    let t = json(&out.join("thresholds.json"));
    assert_eq!(t["membership_threshold"], 3.0);
    assert!(t["asymptotics"]["spread"].as_f64().unwrap() <= 2.0);

    let out = tmp.path().join("coulomb");
    run_ok("potential-ft", &configs().join("potential_coulomb.json"), &out, &[]);
    let t = json(&out.join("thresholds.json"));
    assert_eq!(t["membership_threshold"], 2.0);
    let est = t["membership_estimates"].as_array().unwrap();
    assert_eq!(est.len(), 2);
    assert_eq!(est[1]["verdict"], "stable");
}

#[test]
fn cone_check_reports_a_stable_ratio() {
    let tmp = TempDir::new().unwrap();
    run_ok("cone-check", &configs().join("cone_m3_d2.json"), tmp.path(), &[]);
    let c = json(&tmp.path().join("cone.json"));
    assert_eq!(c["stable"], true);
    assert!(c["ratio"].as_f64().unwrap() > 0.0);
}
