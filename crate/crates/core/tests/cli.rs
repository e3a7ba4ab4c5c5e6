use std::path::Path;
use std::process::{Command, Output};

fn jointcon(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointcon"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

const SCENARIO2: &str = r#"
name = "colinear"
T = 2
K = 2
channels = [
    [[[0.7071067811865476, 0.0]], [[0.7071067811865476, 0.0]]],
    [[[0.7071067811865476, 0.0]], [[0.7071067811865476, 0.0]]],
]
snr = [6.0, 8.0]
n_eval = 5000
"#;

#[test]
fn zf_on_colinear_channels_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s2.toml");
    std::fs::write(&cfg, SCENARIO2).unwrap();
    let out = jointcon(dir.path(), &["baseline", "--encoder", "zf", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[RankDeficient]"));

    let out = jointcon(dir.path(), &["baseline", "--encoder", "zf", "--scenario", "scenario2", "--n-eval", "2000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SCENARIO2.replace("T = 2", "T = 3")).unwrap();
    let out = jointcon(dir.path(), &["optimize", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error[ValidationError]") && err.contains("channels"), "{err}");

    std::fs::write(&bad, "T = ").unwrap();
    let out = jointcon(dir.path(), &["optimize", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[ParseError]"));

    let out = jointcon(dir.path(), &["scenario", "scenario7"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[UnknownScenario]"));

    let out = jointcon(dir.path(), &["sweep", "--snr", "oops"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn scenario_writes_consistent_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s2.toml");
    std::fs::write(&cfg, SCENARIO2.replace("n_eval = 5000", "n_eval = 5000\niterations = 10\nn_samples = 500")).unwrap();
    let out = jointcon(dir.path(), &["scenario", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for row in ["MMSE", "ZF", "Matched", "MAX-MIN"] {
        assert!(stdout.contains(row));
    }

    let mi = read_csv(&dir.path().join("mi.csv"));
    let summary = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(mi[0], ["experiment", "snr_db", "encoder", "user", "mi", "stderr"]);
    assert_eq!(summary[0], ["snr_db", "encoder", "min_mi", "mean_mi"]);
    assert!(mi.iter().all(|r| r.len() == 6));
    for row in &summary[1..] {
        let values: Vec<&str> = mi[1..].iter().filter(|r| r[2] == row[1]).map(|r| r[4].as_str()).collect();
        if row[1] == "zf" {
            assert!(values.iter().all(|v| *v == "NA"));
            assert_eq!(row[2], "NA");
            continue;
        }
        let min = values.iter().map(|v| v.parse::<f64>().unwrap()).fold(f64::INFINITY, f64::min);
        assert_eq!(row[2].parse::<f64>().unwrap(), min);
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    for entry in manifest["outputs"].as_array().unwrap() {
        assert!(dir.path().join(entry["file"].as_str().unwrap()).exists());
    }
    assert_eq!(manifest["config"]["n_eval"], 5000);
    assert_eq!(manifest["convention"], "paper");
}

#[test]
fn optimize_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let out = jointcon(
        dir.path(),
        &["optimize", "--scenario", "scenario1", "--seed", "3", "--iterations", "5", "--n-eval", "2000"],
    );
    assert_eq!(out.status.code(), Some(0));
    let constellation = dir.path().join("constellation.csv");
    assert_eq!(read_csv(&constellation).len(), 1 + 4 * 2);
    assert_eq!(read_csv(&dir.path().join("loss_history.csv")).len(), 1 + 5);

    let svg = dir.path().join("c.svg");
    let out = jointcon(
        dir.path(),
        &["export", "--constellation", constellation.to_str().unwrap(), "--format", "svg", "--scenario", "scenario1", "--output", svg.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"point\"").count(), 4);
    assert_eq!(text.matches("class=\"channel\"").count(), 2);

    let wide = dir.path().join("wide.csv");
    let out = jointcon(
        dir.path(),
        &["export", "--constellation", constellation.to_str().unwrap(), "--format", "csv", "--output", wide.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(&wide);
    assert_eq!(rows.len(), 1 + 4);
    assert_eq!(rows[0], ["w", "re0", "im0", "re1", "im1"]);
}

#[test]
fn export_rejects_four_antennas() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t4.csv");
    let mut text = String::from("w,antenna,re,im\n");
    for w in ["0", "1"] {
        for t in 0..4 {
            text.push_str(&format!("{w},{t},0.5,0\n"));
        }
    }
    std::fs::write(&path, text).unwrap();
    let out = jointcon(dir.path(), &["export", "--constellation", path.to_str().unwrap(), "--format", "svg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[Unplottable]"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_jointcon"))
        .env("JOINTCON_OUT_DIR", dir.path())
        .args(["baseline", "--encoder", "matched", "--n-eval", "2000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("mi.csv").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn tiny_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = jointcon(
        dir.path(),
        &[
            "sweep", "--snr", "0:4:4", "--experiments", "2", "--restarts", "1", "--users", "2",
            "--antennas", "2", "--n-samples", "200", "--iterations", "3", "--n-eval", "1000",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mi = read_csv(&dir.path().join("mi.csv"));
    // 2 experiments x 2 snr x 4 encoders x 2 users
    assert_eq!(mi.len(), 1 + 32);
    let summary = read_csv(&dir.path().join("summary.csv"));
    assert_eq!(summary.len(), 1 + 8);
}
