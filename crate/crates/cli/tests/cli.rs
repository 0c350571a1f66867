use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const FAST: &str = "[integration]\nn_r = 8\nn_z = 8\nn_delta = 8\nt_end_s = 20.0\nt_step_s = 2.0\n";

fn holeburn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holeburn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_names_the_path() {
    let o = holeburn(&["simulate", "--config", "/no/such/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/run.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[beam]\npower = 1e-5\n");
    let o = holeburn(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("power"), "{}", stderr(&o));
}

#[test]
fn malformed_scan_header_exits_2() {
    let dir = TempDir::new().unwrap();
    let scan = write(
        dir.path(),
        "scan.csv",
        "freq_hz,fluor,power_counts\n1,2,3\n",
    );
    let o = holeburn(&["fit", "hole", &scan, "--aom-off", "0:1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("malformed header"), "{}", stderr(&o));
}

#[test]
fn empty_zeeman_list_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "z.toml",
        "[zeeman]\nlaser_separations_hz = []\n",
    );
    let out = dir.path().join("z.csv");
    let o = holeburn(&["zeeman", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("delta_f_hz,b_ground_t,b_sum_t,b_diff_t"));
}

#[test]
fn zeeman_reference_fields() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("z.csv");
    let o = holeburn(&[
        "zeeman",
        "--delta-f",
        "44.5e6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = data_rows(&out);
    let vals: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((vals[2] - 1e-3).abs() < 1e-12);
    assert!((vals[5] - 0.8e-3).abs() < 1e-12);
}

#[test]
fn zero_end_time_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[integration]\nn_r = 8\nn_z = 8\nn_delta = 8\nt_end_s = 0.0\n",
    );
    let out = dir.path().join("s.csv");
    let o = holeburn(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&out).len(), 2);
}

#[test]
fn unreachable_tolerance_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{FAST}max_refinements = 1\n"),
    );
    let o = holeburn(&["simulate", "--config", &cfg, "--tol", "1e-14"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn same_seed_same_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.toml", FAST);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let o = holeburn(&[
            "gen",
            "decay",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(data_rows(&a), data_rows(&c));

    let h1 = dir.path().join("h1.csv");
    let h2 = dir.path().join("h2.csv");
    for out in [&h1, &h2] {
        let o = holeburn(&["gen", "hole", "--seed", "9", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(fs::read(&h1).unwrap(), fs::read(&h2).unwrap());
}

#[test]
fn noiseless_gen_matches_simulate() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{FAST}[synth]\nnoise = \"none\"\n"),
    );
    let sim = dir.path().join("sim.csv");
    let gen = dir.path().join("gen.csv");
    assert!(
        holeburn(&["simulate", "--config", &cfg, "--out", sim.to_str().unwrap()])
            .status
            .success()
    );
    assert!(holeburn(&[
        "gen",
        "decay",
        "--config",
        &cfg,
        "--out",
        gen.to_str().unwrap()
    ])
    .status
    .success());
    assert_eq!(data_rows(&sim), data_rows(&gen));
}

#[test]
fn series_writes_seven_named_files_and_fits() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[integration]\nn_r = 12\nn_z = 12\nn_delta = 16\nt_end_s = 300.0\nt_step_s = 5.0\n[synth]\nseed = 3\nbin_width_s = 5.0\n",
    );
    let out = dir.path().join("series");
    let o = holeburn(&[
        "gen",
        "decay",
        "--series",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut want: Vec<String> = [2, 4, 8, 13, 21, 29, 44]
        .iter()
        .map(|p| format!("decay_{p}uW.csv"))
        .collect();
    want.sort();
    assert_eq!(names, want);

    let mut args = vec![
        "fit".to_string(),
        "trap".into(),
        "--config".into(),
        cfg.clone(),
    ];
    args.extend(
        want.iter()
            .map(|n| out.join(n).to_str().unwrap().to_string()),
    );
    let report = dir.path().join("fit.json");
    args.extend(["--out".into(), report.to_str().unwrap().into()]);
    let o = holeburn(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let gamma = v["result"]["gamma_trap"]["value"].as_f64().unwrap();
    assert!((gamma / 7e4 - 1.0).abs() < 0.1, "gamma {gamma}");
    assert_eq!(v["config"]["integration"]["n_r"], 12);
}

#[test]
fn hole_pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let scan = dir.path().join("scan.csv");
    let treated = dir.path().join("treated.csv");
    let report = dir.path().join("hole.json");
    assert!(holeburn(&[
        "gen",
        "hole",
        "--seed",
        "1",
        "--out",
        scan.to_str().unwrap()
    ])
    .status
    .success());
    let o = holeburn(&[
        "fit",
        "hole",
        scan.to_str().unwrap(),
        "--treated",
        treated.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let fwhm = v["result"]["fwhm"]["value"].as_f64().unwrap();
    assert!((fwhm / 6e6 - 1.0).abs() < 0.2, "fwhm {fwhm}");
    assert_eq!(v["excluded_points"], 100);
    assert!(data_rows(&treated)[0].ends_with("signal,excluded"));
}

#[test]
fn expdecay_and_linear_reports() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("hd.csv");
    let cfg = write(dir.path(), "c.toml", "[synth]\nnoise = \"none\"\n");
    assert!(holeburn(&[
        "gen",
        "holedecay",
        "--config",
        &cfg,
        "--out",
        series.to_str().unwrap()
    ])
    .status
    .success());
    let o = holeburn(&["fit", "expdecay", series.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["result"]["tau"]["value"].as_f64().unwrap() / 0.072 - 1.0).abs() < 1e-6);

    let lin = write(dir.path(), "l.csv", "x,y\n0,1\n1,3\n2,5.1\n3,6.9\n");
    let o = holeburn(&["fit", "linear", &lin]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["result"]["slope"].as_f64().unwrap() - 1.98).abs() < 1e-9);
    assert_eq!(v["result"]["confidence"], 0.8);
}

#[test]
fn degenerate_linear_data_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let lin = write(dir.path(), "l.csv", "x,y\n1,1\n1,3\n1,5\n");
    let o = holeburn(&["fit", "linear", &lin]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unconverged_trap_fit_exits_4() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        &format!("{FAST}[fit]\nmax_iterations = 1\nrestarts = 0\n"),
    );
    let curve = dir.path().join("d.csv");
    assert!(holeburn(&[
        "gen",
        "decay",
        "--config",
        &cfg,
        "--out",
        curve.to_str().unwrap()
    ])
    .status
    .success());
    let o = holeburn(&["fit", "trap", "--config", &cfg, curve.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
