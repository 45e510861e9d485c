use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use superrep_core::choi::{ProcessMatrix, ProcessMatrixRecord};
use superrep_core::tomo::TomographyDataset;

fn superrep() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_superrep"));
    cmd.env_remove("SUPERREP_OUT_DIR");
    cmd
}

fn run(args: &[&str], out: &Path) -> Output {
    superrep()
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Data rows of a CSV written by the tool: comment line and header skipped.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn replicate_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["replicate"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let path = dir.path().join("replicate.csv");
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# superrep "));
    assert!(text.lines().next().unwrap().contains("config_sha256="));
    let (header, rows) = csv_rows(&path);
    assert_eq!(rows.len(), 8);
    let ideal = column(&header, "f_uu_ideal");
    let f0: f64 = rows[0][ideal].parse().unwrap();
    assert!((f0 - 1.0).abs() < 1e-12);
    for row in &rows {
        for cell in row {
            let x: f64 = cell.parse().unwrap();
            assert!(x.is_finite());
        }
    }
}

#[test]
fn replicate_at_pi() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["replicate", "--phases", "pi", "--svg"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("replicate.csv"));
    assert_eq!(rows.len(), 1);
    let f: f64 = rows[0][column(&header, "f_uu_ideal")].parse().unwrap();
    assert!((f - 0.25).abs() < 1e-12);
    let svg = fs::read_to_string(dir.path().join("replicate.svg")).unwrap();
    assert!(svg.starts_with("<!-- superrep ") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn floats_survive_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["replicate", "--phases", "0.3,2pi/3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("replicate.csv"));
    let col = column(&header, "f_uu_ideal");
    for (row, phi) in rows.iter().zip([0.3f64, 2.0 * std::f64::consts::PI / 3.0]) {
        let expected = superrep_core::gates::fidelity_replicas(superrep_core::gates::PhaseAngle::new(phi));
        let got: f64 = row[col].parse().unwrap();
        assert!((got - expected).abs() <= 2.0 * f64::EPSILON);
    }
}

#[test]
fn missing_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = run(&["replicate", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("nope.toml"));
    assert!(err.contains("configuration schema"));
    assert!(!dir.path().join("replicate.csv").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n[tomo]\nrte = 5.0\n").unwrap();
    let o = run(&["tomo", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rte"));
}

#[test]
fn nonpositive_alpha_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["superrep", "--alpha", "0"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha"));
    let o = run(&["superrep", "--alpha=-1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn superrep_explicit_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[superrep]\npairs = [[1, 2], [3, 3], [4, 2]]\n").unwrap();
    let o = run(&["superrep", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("superrep.csv"));
    let f = column(&header, "worst_fidelity");
    let values: Vec<f64> = rows.iter().map(|r| r[f].parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    assert!((values[0] - 0.25).abs() < 1e-9);
    assert!((values[1] - 1.0).abs() < 1e-12);
    assert!((values[2] - 1.0).abs() < 1e-12);
    let checks = fs::read_to_string(dir.path().join("superrep_checks.json")).unwrap();
    assert!(checks.contains("permutation_checks"));
}

#[test]
fn superrep_default_sweep_approaches_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["superrep", "--copies", "4,9,16,25"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("superrep.csv"));
    let f = column(&header, "worst_fidelity");
    let values: Vec<f64> = rows.iter().map(|r| r[f].parse().unwrap()).collect();
    assert_eq!(values.len(), 4);
    assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert!(values.iter().all(|v| *v > 0.0 && *v <= 1.0 + 1e-12));
}

#[test]
fn tomo_ideal_is_faithful() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["tomo", "--preset", "ideal", "--rate", "1e6", "--seed", "4"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("tomo_fidelities.csv"));
    assert_eq!(rows.len(), 8);
    let f = column(&header, "f_cu");
    for row in &rows {
        let x: f64 = row[f].parse().unwrap();
        assert!(x >= 0.999, "F_CU {x}");
    }
}

#[test]
fn tomo_outputs_round_trip_and_repeat() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["tomo", "--phases", "2", "--seed", "11"];
    for dir in [&a, &b] {
        let o = run(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in [
        "tomo_fidelities.csv",
        "tomo_dataset.csv",
        "tomo_report.json",
        "tomo_chi/phase_0.json",
        "tomo_chi/phase_1_ideal.json",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }

    let data = fs::read(a.path().join("tomo_dataset.csv")).unwrap();
    let dataset = TomographyDataset::read_csv(&data[..]).unwrap();
    assert_eq!(dataset.phase_ids(), vec![0, 1]);

    let text = fs::read_to_string(a.path().join("tomo_chi/phase_0.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(doc["metadata"]["config_sha256"].is_string());
    let rec: ProcessMatrixRecord = serde_json::from_value(doc["process_matrix"].clone()).unwrap();
    let chi = ProcessMatrix::from_record(&rec).unwrap();
    let back = chi.to_record();
    assert_eq!((back.real, back.imag), (rec.real, rec.imag));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("tomo_report.json")).unwrap()).unwrap();
    assert!(report["mean_f_cu"].as_f64().unwrap() > 0.5);
    assert!(report["mean_f_uu"].as_f64().unwrap() > 0.0);

    let c = tempfile::tempdir().unwrap();
    let o = run(&["tomo", "--phases", "2", "--seed", "12"], c.path());
    assert!(o.status.success());
    assert_ne!(
        fs::read(a.path().join("tomo_dataset.csv")).unwrap(),
        fs::read(c.path().join("tomo_dataset.csv")).unwrap()
    );
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("occupied");
    fs::write(&blocker, "not a directory").unwrap();
    let target = blocker.join("out");
    let o = run(&["replicate", "--phases", "2"], &target);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("occupied"));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = superrep()
        .args(["replicate", "--phases", "3"])
        .env("SUPERREP_OUT_DIR", dir.path())
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("replicate.csv").exists());
}

#[test]
fn optics_scan_single_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["optics-scan", "--parameter", "visibility", "--phases", "4"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("optics_scan.csv"));
    assert_eq!(rows.len(), 21);
    let v = column(&header, "value");
    let ft = column(&header, "toffoli_fidelity");
    let last: Vec<f64> = [v, ft].iter().map(|&c| rows[20][c].parse().unwrap()).collect();
    let first: f64 = rows[0][ft].parse().unwrap();
    assert!((last[0] - 1.0).abs() < 1e-12);
    assert!(last[1] > first);

    let o = run(&["optics-scan", "--parameter", "wobble"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
