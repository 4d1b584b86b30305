//! End-to-end runs of the `bandforge` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use bandforge::io::read_band;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bandforge"));
    c.env_remove("BANDFORGE_THREADS");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn three_rows_with_a_wide_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "tiny.csv", "x,y\n0,1\n1,3\n2,2\n");
    let out = dir.path().join("band.csv");
    let o = run(&[
        "band",
        &input,
        "--bandwidth",
        "5",
        "--grid",
        "5",
        "--boot",
        "49",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_band(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[4][0], 2.0);
    for r in &rows {
        assert!(r[2] <= r[1] && r[1] <= r[3]);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("band.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], "bandforge.run-manifest");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["seed_source"], "flag");
    assert_eq!(manifest["config"]["boot"], 49);
}

#[test]
fn every_band_method_runs() {
    let input = data("g3_sample.csv");
    let input = input.to_str().unwrap();
    for extra in [
        &["--method", "naive"][..],
        &["--method", "percentile", "--inner", "19"],
        &["--hetero"],
        &["--variance", "residual", "--bandwidth", "cv"],
    ] {
        let mut args = vec!["band", input, "--boot", "39", "--seed", "3", "--grid", "11", "--region", "-0.8", "0.8"];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert!(o.status.success(), "{extra:?}: {}", stderr(&o));
        let rows = read_band(&o.stdout[..]).unwrap();
        assert_eq!(rows.len(), 11, "{extra:?}");
    }
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("dup.csv", "x,x\n0,1\n1,2\n2,3\n"),
        ("word.csv", "x,y\n0,1\n1,abc\n2,3\n"),
        ("short.csv", "x,y\n0,1\n1\n2,3\n"),
        ("few.csv", "x,y\n0,1\n1,2\n"),
        ("nan.csv", "x,y\n0,1\n1,NaN\n2,3\n"),
    ] {
        let input = write(dir.path(), name, text);
        let o = run(&["band", &input, "--seed", "1", "--bandwidth", "2"]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        let err = stderr(&o);
        assert!(err.contains("code=2") && err.contains("reason="), "{name}: {err}");
    }
    let o = run(&["band", "/nonexistent/input.csv", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn degenerate_fit_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "gap.csv", "x,y\n0,1\n0.1,2\n0.2,1\n5,3\n5.1,2\n5.2,4\n");
    let o = run(&["band", &input, "--seed", "1", "--bandwidth", "0.3", "--grid", "11"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("kind=degenerate_fit"), "{}", stderr(&o));
}

#[test]
fn invalid_settings_exit_4() {
    let input = data("g3_sample.csv");
    let input = input.to_str().unwrap();
    for bad in [
        &["--alpha0", "1.5"][..],
        &["--xi", "0.9"],
        &["--bandwidth", "-1"],
        &["--kernel", "triangle"],
        &["--grid", "1"],
        &["--unknown-flag"],
    ] {
        let mut args = vec!["band", input, "--seed", "1"];
        args.extend_from_slice(bad);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(4), "{bad:?}: {}", stderr(&o));
    }
}

#[test]
fn bad_simulate_configs_exit_4_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    for (text, field) in [
        (r#"{"g_index": 1, "n": 50, "sigma": 1, "methods": []}"#, "methods"),
        (r#"{"g_index": 1, "n": 50, "sigma": 1}"#, "methods"),
        (r#"{"g_index": 4, "n": 50, "sigma": 1, "methods": [{"method": "ours"}]}"#, "g_index"),
        (r#"{"g_index": 1, "n": 50, "sigma": 1, "methods": [{"method": "ours"}], "bogus": 2}"#, "bogus"),
        (r#"{"g_index": 1, "n": 50, "sigma": 1, "methods": [{"method": "ours"}], "xi_list": [0.9]}"#, "xi_list"),
        (r#"{"g_index": 1, "n": 50, "sigma": 1, "methods": [{"method": "magic"}]}"#, "methods"),
    ] {
        let cfg = write(dir.path(), "cfg.json", text);
        let o = run(&["simulate", &cfg, "--seed", "1"]);
        assert_eq!(o.status.code(), Some(4), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{text}: {}", stderr(&o));
    }
}

#[test]
fn golden_band_is_byte_identical_across_thread_counts() {
    let golden = fs::read(data("g3_band_golden.csv")).unwrap();
    let input = data("g3_sample.csv");
    for threads in ["1", "2", "3"] {
        let o = run(&[
            "band",
            input.to_str().unwrap(),
            "--seed",
            "11",
            "--boot",
            "199",
            "--grid",
            "41",
            "--region",
            "-0.9",
            "0.9",
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(o.stdout == golden, "threads = {threads}: output differs from the golden band");
    }
    let o = bin()
        .args([
            "band",
            input.to_str().unwrap(),
            "--seed",
            "11",
            "--boot",
            "199",
            "--grid",
            "41",
            "--region",
            "-0.9",
            "0.9",
        ])
        .env("BANDFORGE_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.stdout == golden);
}

#[test]
fn missing_seed_is_drawn_and_printed() {
    let input = data("g3_sample.csv");
    let o = run(&["band", input.to_str().unwrap(), "--boot", "19", "--grid", "5"]);
    assert!(o.status.success());
    let err = stderr(&o);
    let seed: u64 = err.lines().find_map(|l| l.strip_prefix("seed: ")).expect("seed line").trim().parse().unwrap();
    let again = run(&["band", input.to_str().unwrap(), "--boot", "19", "--grid", "5", "--seed", &seed.to_string()]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn density_band_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("x\n");
    for i in 0..150 {
        let u = (i as f64 + 0.5) / 150.0;
        text.push_str(&format!("{}\n", (u - 0.5) * 4.0 * u * (1.0 - u)));
    }
    let input = write(dir.path(), "sample.csv", &text);
    for method in ["calibrated", "naive"] {
        let o = run(&[
            "density-band",
            &input,
            "--method",
            method,
            "--boot",
            "99",
            "--seed",
            "4",
            "--grid",
            "21",
            "--clamp-lower",
        ]);
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        let body = String::from_utf8(o.stdout).unwrap();
        assert!(body.starts_with("x,fhat,lower,upper\n"));
        let rows = read_band(body.as_bytes()).unwrap();
        assert_eq!(rows.len(), 21);
        for r in &rows {
            assert!(r[2] >= 0.0 && r[2] <= r[1] && r[1] <= r[3], "{method}: {r:?}");
        }
    }
    let one = write(dir.path(), "one.csv", "x\n1\n");
    assert_eq!(run(&["density-band", &one, "--seed", "1"]).status.code(), Some(2));
}

#[test]
fn tiny_simulation_finishes_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "study.json",
        r#"{
            "schema_version": 1,
            "g_index": [1, 3],
            "n": 40,
            "sigma": 1.0,
            "n_sims": 5,
            "boot": 99,
            "xi_list": [0.1, 0.2],
            "seed": 9,
            "methods": [
                {"method": "ours"},
                {"method": "naive"},
                {"method": "undersmooth", "gammas": [0.7, 1.0]},
                {"method": "bias_correct", "lambdas": [0.5]},
                {"method": "double_bootstrap", "outer": 19, "inner": 9}
            ]
        }"#,
    );
    let out = dir.path().join("rows.csv");
    let json = dir.path().join("rows.json");
    let start = Instant::now();
    let o = run(&["simulate", &cfg, "--out", out.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(start.elapsed().as_secs_f64() < 10.0, "took {:?}", start.elapsed());
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sigma,g_index,method,factor_or_xi,covered_proportion,avg_abs_cov_error,avg_width"
    );
    // per curve: 2 ξ for ours, naive, 2 γ, 1 λ, 2 ξ for the double bootstrap
    assert_eq!(lines.count(), 2 * 8);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["schema"], "bandforge.study-results");
    assert_eq!(doc["studies"].as_array().unwrap().len(), 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("rows.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);

    let again = dir.path().join("again.csv");
    let o = run(&["simulate", &cfg, "--out", again.to_str().unwrap(), "--threads", "3"]);
    assert!(o.status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}
