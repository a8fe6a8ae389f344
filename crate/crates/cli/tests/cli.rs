use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn capprop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capprop"))
        .args(args)
        .env_remove("CAPPROP_SEED")
        .output()
        .expect("binary runs")
}

fn run_into(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    capprop(&args)
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn table(out: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(out.join("table.csv")).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

fn value(rows: &[Vec<String>], run: &str, name: &str) -> f64 {
    rows.iter()
        .find(|r| r[0] == run && r[3] == name)
        .unwrap_or_else(|| panic!("no row {run}/{name}"))[4]
        .parse()
        .unwrap()
}

#[test]
fn run_writes_report_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "schema_version = 1\nstudy = \"convergence\"\ngrid = { extents = [128] }\n[sweep]\ndepths = [5, 9, 17]\n",
    );
    let out = dir.path().join("out");
    let o = run_into("run", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["report.json", "table.csv", "manifest.json", "plot_error.svg"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    for entry in manifest["files"].as_array().unwrap() {
        let bytes = fs::read(out.join(entry["path"].as_str().unwrap())).unwrap();
        assert_eq!(entry["bytes"].as_u64().unwrap() as usize, bytes.len());
        let digest = Command::new("sha256sum").arg(out.join(entry["path"].as_str().unwrap())).output();
        if let Ok(d) = digest {
            let text = String::from_utf8_lossy(&d.stdout);
            assert!(text.starts_with(entry["sha256"].as_str().unwrap()));
        }
    }
    let report: capprop::experiments::ExperimentReport =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.study, "convergence");
    let rows = table(&out);
    assert!(rows.iter().any(|r| r[2] == "metric" && r[3] == "l1_error"));
}

#[test]
fn format_and_plot_flags_select_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "schema_version = 1\nstudy = \"convergence\"\ngrid = { extents = [64] }\n[sweep]\ndepths = [5, 9]\n",
    );
    let out = dir.path().join("t");
    assert_eq!(run_into("run", &cfg, &out, &["--format", "table", "--no-plots"]).status.code(), Some(0));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["manifest.json", "table.csv"]);
}

#[test]
fn invalid_dilation_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.toml",
        "schema_version = 1\nstudy = \"dilated_erf\"\ngrid = { extents = [512] }\n\
         [architecture]\ndilation_ratio = 0.5\n[sweep]\ndepths = [4, 5]\n",
    );
    let out = dir.path().join("out");
    let o = run_into("run", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dilation_ratio"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn missing_or_malformed_config_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_into("run", &dir.path().join("absent.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let cfg = write_config(dir.path(), "bad.toml", "schema_version = 1\nstudy = \"no_such_study\"\n");
    let o = run_into("run", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("study"), "{}", stderr(&o));
    let cfg = write_config(
        dir.path(),
        "v.toml",
        "schema_version = 7\nstudy = \"convergence\"\ngrid = { extents = [64] }\n[sweep]\ndepths = [5]\n",
    );
    let o = run_into("run", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("schema_version"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn grid_too_small_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "g.toml",
        "schema_version = 1\nstudy = \"dilated_erf\"\ngrid = { extents = [64] }\n\
         [architecture]\ndilation_ratio = 2.0\n[sweep]\ndepths = [4, 12]\n",
    );
    let o = run_into("run", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("grid.extents"));
}

#[test]
fn empty_sweep_list_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.toml",
        "schema_version = 1\nstudy = \"scaling_sweep\"\ngrid = { extents = [256] }\n\
         [sweep]\ndepths = [17, 33]\nexponents = []\n",
    );
    let o = run_into("sweep", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweep.exponents"), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_byte_identical_bundles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.toml",
        "schema_version = 1\nstudy = \"scaling_sweep\"\ngrid = { extents = [256] }\n\
         [architecture]\ngenerator = { kind = \"random\", radius = 2 }\n\
         [sweep]\ndepths = [9, 17, 33]\nexponents = [0.5, 1.0]\n",
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(run_into("run", &cfg, &a, &["--seed", "5"]).status.code(), Some(0));
    assert_eq!(run_into("run", &cfg, &b, &["--seed", "5"]).status.code(), Some(0));
    assert_eq!(run_into("run", &cfg, &c, &["--seed", "6"]).status.code(), Some(0));
    let manifest = |d: &Path| fs::read(d.join("manifest.json")).unwrap();
    assert_eq!(manifest(&a), manifest(&b));
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert_ne!(manifest(&a), manifest(&c));
}

#[test]
fn seed_env_var_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.toml",
        "schema_version = 1\nstudy = \"scaling_sweep\"\nseed = 1\ngrid = { extents = [128] }\n\
         [architecture]\ngenerator = { kind = \"random\", radius = 1 }\n\
         [sweep]\ndepths = [9, 17]\nexponents = [1.0]\n",
    );
    let run_env = |out: &Path, env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_capprop"));
        cmd.args(["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .args(extra)
            .env_remove("CAPPROP_SEED");
        if let Some(v) = env {
            cmd.env("CAPPROP_SEED", v);
        }
        assert_eq!(cmd.output().unwrap().status.code(), Some(0));
        let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
        report["seed"].as_u64().unwrap()
    };
    assert_eq!(run_env(&dir.path().join("a"), None, &[]), 1);
    assert_eq!(run_env(&dir.path().join("b"), Some("9"), &[]), 9);
    assert_eq!(run_env(&dir.path().join("c"), Some("9"), &["--seed", "4"]), 4);
}

#[test]
fn jobs_do_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = repo_config("leak_split.toml");
    assert_eq!(run_into("sweep", &cfg, &a, &["--jobs", "1"]).status.code(), Some(0));
    assert_eq!(run_into("sweep", &cfg, &b, &["--jobs", "8"]).status.code(), Some(0));
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn zero_jobs_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into("run", &repo_config("convergence.toml"), &dir.path().join("o"), &["--jobs", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scaling_sweep_emits_three_classification_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_into("sweep", &repo_config("scaling_sweep.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = table(&out);
    let verdicts: Vec<(&str, &str)> = rows
        .iter()
        .filter(|r| r[2] == "classification")
        .map(|r| (r[0].as_str(), r[4].as_str()))
        .collect();
    assert_eq!(
        verdicts,
        [
            ("classification[p=0.5]", "shattering-divergent"),
            ("classification[p=1]", "non-degenerate"),
            ("classification[p=2]", "trivial-contraction"),
        ]
    );
    assert!(rows.iter().any(|r| r[2] == "fit" && r[3] == "exponent"));
    let plain = dir.path().join("plain");
    assert_eq!(run_into("run", &repo_config("scaling_sweep.toml"), &plain, &["--no-plots"]).status.code(), Some(0));
    assert!(table(&plain).iter().all(|r| r[2] != "classification"));
}

#[test]
fn table_numbers_round_trip_from_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run_into("run", &repo_config("multichannel_xavier.toml"), &out, &[]).status.code(), Some(0));
    let report: capprop::experiments::ExperimentReport =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    let rows = table(&out);
    for rec in &report.records {
        for (name, v) in &rec.metrics {
            assert_eq!(value(&rows, &rec.key, name), *v);
        }
    }
}

#[test]
fn compare_residual_reports_small_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_into("compare", &repo_config("compare_residual.toml"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = table(&out);
    let run = rows[0][0].clone();
    assert!(value(&rows, &run, "l1_error") < 0.05);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["profiles"].as_array().unwrap().len(), 2);
}

#[test]
fn compare_routes_skip_source_to_duhamel() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run_into("compare", &repo_config("compare_skip.toml"), &out, &[]).status.code(), Some(0));
    let rows = table(&out);
    let run = rows[0][0].clone();
    assert!((value(&rows, &run, "continuum_mass") - 1.0).abs() < 1e-12);
    assert!(value(&rows, &run, "l1_error") < 5e-3);
}

#[test]
fn compare_routes_leak_to_mass_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run_into("compare", &repo_config("compare_leak.toml"), &out, &[]).status.code(), Some(0));
    let rows = table(&out);
    let run = rows[0][0].clone();
    let analytic = value(&rows, &run, "analytic_mass_x");
    assert!((analytic - (-1f64).exp()).abs() < 1e-15);
    assert!(value(&rows, &run, "mass_x_relative_error") < 0.01);
}

#[test]
fn failed_run_leaves_existing_bundle_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = write_config(
        dir.path(),
        "g.toml",
        "schema_version = 1\nstudy = \"convergence\"\ngrid = { extents = [64] }\n[sweep]\ndepths = [5, 9]\n",
    );
    assert_eq!(run_into("run", &good, &out, &[]).status.code(), Some(0));
    let before = fs::read(out.join("manifest.json")).unwrap();
    let bad = write_config(
        dir.path(),
        "b.toml",
        "schema_version = 1\nstudy = \"leak_split\"\ngrid = { extents = [64] }\n\
         [architecture]\nvariant = \"leak\"\n[sweep]\ndepths = [2]\nleak_rates = [3.0]\n",
    );
    let o = run_into("run", &bad, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read(out.join("manifest.json")).unwrap(), before);
    let stray = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".capprop"))
        .count();
    assert_eq!(stray, 0);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let o = run_into("run", &repo_config("convergence.toml"), &blocker, &["--no-plots"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn every_example_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(repo_config("")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let sub = if name.starts_with("compare") { "compare" } else { "sweep" };
        let o = run_into(sub, &path, &dir.path().join(&name), &["--jobs", "4"]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
    }
}
