use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(kind: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(kind).join("config.toml")
}

fn jmlab(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jmlab"));
    c.args(args).env_remove("OUTPUT_DIR");
    c
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn list_names_every_kind() {
    let o = jmlab(&["list"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for k in jmlab_cli::config::Kind::ALL {
        assert!(text.contains(k.as_str()), "{}", k.as_str());
    }
    assert!(text.contains("params.oracle_resolution"));
    assert!(text.contains("potential.masses"));
}

#[test]
fn validate_reports_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "name = \"bad\"\nkind = \"minimize\"\n[params]\nq0 = [0.0, 0.0, 1.0, 0.0]\nq1 = [0.0, 0.0, 0.0, 1.0]\n\
         t_total = -1.0\n[potential]\nkind = \"power_law\"\nalpha = 2.5\nmasses = [1.0, -1.0]\n",
    );
    let o = jmlab(&["validate", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("params.t_total"), "{err}");
    assert!(err.contains("potential.alpha") && err.contains("0 < alpha < 2"), "{err}");
    assert!(err.contains("potential.masses") && err.contains("-1"), "{err}");
}

#[test]
fn validate_accepts_the_fixtures() {
    for k in jmlab_cli::config::Kind::ALL {
        let o = jmlab(&["validate", fixture(k.as_str()).to_str().unwrap()]).output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn unparsable_file_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "name = \n");
    let o = jmlab(&["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn failed_check_exits_with_numerical_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "name = \"coarse\"\nkind = \"brake_check\"\n[params]\nsteps = 10\n",
    );
    let out = tmp.path().join("out");
    let o = jmlab(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap(), "--tolerance", "1e-14"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"failed\""));
}

#[test]
fn unconverged_minimizer_exits_with_numerical_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "name = \"short\"\nkind = \"minimize\"\n[params]\nq0 = [1.0, 0.0]\nq1 = [0.0, 1.0]\n\
         t_total = 1.0\nmax_iter = 1\nstarts = 1\n",
    );
    let out = tmp.path().join("out");
    let o = jmlab(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 3);
    assert!(out.join("path.csv").exists());
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, jobs) in ["1", "4", "1"].iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let o = jmlab(&[
            "run",
            fixture("counterexample_sweep").to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ])
        .output()
        .unwrap();
        assert_eq!(code(&o), 0);
        outputs.push(fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn seed_flag_changes_random_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, name: &str| {
        let out = tmp.path().join(name);
        let o = jmlab(&[
            "run",
            fixture("bridge_check").to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ])
        .output()
        .unwrap();
        assert_eq!(code(&o), 0);
        fs::read(out.join("bridge.csv")).unwrap()
    };
    assert_eq!(run("5", "a"), run("5", "b"));
    assert_ne!(run("5", "c"), run("6", "d"));
}

#[test]
fn output_dir_env_is_honored_below_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let env_dir = tmp.path().join("from-env");
    let o = jmlab(&["run", fixture("brake_check").to_str().unwrap()])
        .env("OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(env_dir.join("summary.json").exists());
    let flag_dir = tmp.path().join("from-flag");
    let o = jmlab(&["run", fixture("brake_check").to_str().unwrap(), "--output-dir", flag_dir.to_str().unwrap()])
        .env("OUTPUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(flag_dir.join("report.txt").exists());
}

#[test]
fn outputs_leave_no_temporary_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = jmlab(&["run", fixture("kepler_cone").to_str().unwrap(), "--output-dir", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    for e in fs::read_dir(&out).unwrap() {
        let name = e.unwrap().file_name();
        assert!(!name.to_string_lossy().ends_with(".tmp"), "{name:?}");
    }
}

#[test]
fn sweep_flip_brackets_the_critical_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "name = \"flip\"\nkind = \"counterexample_sweep\"\n[params]\nm_big_min = 1.25\nm_big_max = 6.0\npoints = 41\n",
    );
    let out = tmp.path().join("out");
    let o = jmlab(&["run", cfg.to_str().unwrap(), "--output-dir", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let r = &summary["results"];
    let bracket = r["flip_bracket"].as_array().unwrap();
    let (lo, hi) = (bracket[0].as_f64().unwrap(), bracket[1].as_f64().unwrap());
    let mc = r["critical_m_big"].as_f64().unwrap();
    assert!(lo < mc && mc <= hi, "{lo} {mc} {hi}");
    assert!((mc - 3.346065214951232).abs() < 1e-9);
}
