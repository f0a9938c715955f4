mod common;

use std::fs;

use common::{column, csv_files, guard_matrix, run_mode};
use holorenorm_cli::manifest::{verify, MANIFEST_NAME};
use holorenorm_cli::Mode;

const SCAN: &str = "[map]\nalpha = 2.0\nbeta = 3.0\nh = [0, 0, 1]\n\
                    [renorm]\ntruncation = \"auto\"\n[scan]\nradius = 2.0\ngrid = 11\nn_list = [5, 10, 20]\n";

#[test]
fn identical_configs_give_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    for (mode, cfg) in [
        (Mode::Scan, SCAN.to_string()),
        (Mode::Iterate, "seed = 3\n[map]\nalpha = 2.0\nbeta = 3.0\nh = [0, 0, 1]\n".to_string()),
        (Mode::Basin, fs::read_to_string("../../configs/basin.toml").unwrap()),
    ] {
        let (a, b) = (dir.path().join(format!("{mode}-a")), dir.path().join(format!("{mode}-b")));
        assert_eq!(run_mode(mode, &cfg, &a), 0);
        assert_eq!(run_mode(mode, &cfg, &b), 0);
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        assert!(!fa.is_empty());
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
    }
}

#[test]
fn manifest_lists_every_table_with_its_checksum() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_mode(Mode::Scan, SCAN, dir.path()), 0);
    let manifest = verify(dir.path()).unwrap();
    let listed: Vec<_> = manifest.files.iter().map(|f| f.name.clone()).collect();
    let on_disk: Vec<_> = csv_files(dir.path())
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest.status, "ok");
    assert_eq!(manifest.hypotheses["truncation"], 2);
    let echo = manifest.config.unwrap();
    assert_eq!(
        echo.renorm.unwrap().truncation,
        holorenorm_cli::config::Truncation::Fixed(2)
    );
    // no leftover temporaries
    assert!(fs::read_dir(dir.path())
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn scan_errors_decrease() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_mode(Mode::Scan, SCAN, dir.path()), 0);
    let errors = column(&dir.path().join("scan.csv"), "sup_error");
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn guard_matrix_exits_with_code_3_and_no_tables() {
    for (label, mode, cfg) in guard_matrix() {
        let dir = tempfile::tempdir().unwrap();
        // a stale table from an earlier run must not survive a failed run
        fs::write(dir.path().join("stale.csv"), "x\n1\n").unwrap();
        assert_eq!(run_mode(mode, &cfg, dir.path()), 3, "{label}");
        assert!(csv_files(dir.path()).is_empty(), "{label}");
        let text = fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap();
        assert!(text.contains("\"precondition\""), "{label}");
    }
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        "[map]\nalpha = 2.0\n",
        "[map]\nalpha = 2.0\nbeta = 3.0\nh = [0, 0, 1]\n[scan]\ngrid = 1\n",
        "[map]\nalpha = 2.0\nbeta = 3.0\nh = [0, 0, 1]\n[renorm]\ntruncation = \"sometimes\"\n",
        "mode = \"limit\"\n[map]\nalpha = 2.0\nbeta = 3.0\nh = [0, 0, 1]\n",
        "not toml at all [",
    ] {
        assert_eq!(run_mode(Mode::Scan, cfg, dir.path()), 2, "{cfg}");
        assert!(csv_files(dir.path()).is_empty());
    }
}

#[test]
fn numerical_diagnostics_exit_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    // a tolerance the scan cannot meet
    let strict = format!("tolerance = 1e-30\n{SCAN}");
    assert_eq!(run_mode(Mode::Scan, &strict, dir.path()), 4);
    assert!(csv_files(dir.path()).is_empty());
    // a probe region reaching outside the repelling basin of a Hénon map
    let henon = "[basin]\npreset = \"custom\"\nguess = [0.01, 0.01]\ndepths = [5]\nprobe_radius = 3.0\nprobe_grid = 5\n\
                 [basin.forward]\nfirst = [{coeff = 3.3333333333333335, i = 0, j = 1}, {coeff = -3.3333333333333335, i = 2, j = 0}]\n\
                 second = [{coeff = 1.0, i = 1, j = 0}]\n\
                 [basin.inverse]\nfirst = [{coeff = 1.0, i = 0, j = 1}]\n\
                 second = [{coeff = 0.3, i = 1, j = 0}, {coeff = 1.0, i = 0, j = 2}]\n";
    assert_eq!(run_mode(Mode::Basin, henon, dir.path()), 4);
}

#[test]
fn binary_reports_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[map]\nalpha = 0.5\nbeta = 3.0\nh = [0, 0, 1]\n").unwrap();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_holorenorm"))
        .args(["renorm", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    let ok = std::process::Command::new(env!("CARGO_BIN_EXE_holorenorm"))
        .args(["counterexample", "--config", "../../configs/counterexample.toml"])
        .arg("--out")
        .arg(dir.path().join("ok"))
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
}

#[test]
fn every_shipped_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir("../../configs").unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let mode: Mode = text
            .lines()
            .find_map(|l| l.strip_prefix("mode = "))
            .map(|m| m.trim_matches('"').parse().unwrap())
            .unwrap();
        let out = dir.path().join(path.file_stem().unwrap());
        assert_eq!(run_mode(mode, &text, &out), 0, "{}", path.display());
        verify(&out).unwrap();
    }
}
