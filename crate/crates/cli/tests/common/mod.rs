#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use holorenorm_cli::Mode;

/// Runs `mode` in-process on `config` with output in `out`; returns the exit code.
pub fn run_mode(mode: Mode, config: &str, out: &Path) -> i32 {
    fs::create_dir_all(out).unwrap();
    let path = out.join("config.toml");
    fs::write(&path, config).unwrap();
    holorenorm_cli::execute([
        "holorenorm",
        mode.name(),
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

pub fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    out.sort();
    out
}

/// Column `name` of a CSV file as floats.
pub fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let idx = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name} in {}", path.display()));
    reader
        .records()
        .map(|r| r.unwrap()[idx].parse::<f64>().unwrap())
        .collect()
}

/// One config per hypothesis the theorems need, each reachable from config space.
pub fn guard_matrix() -> Vec<(&'static str, Mode, String)> {
    let map = |alpha: &str, beta: &str| format!("[map]\nalpha = {alpha}\nbeta = {beta}\nh = [0, 0, 1]\n");
    vec![
        ("|alpha| <= 1", Mode::Scan, format!("{}[renorm]\ntruncation = 2\n", map("1.0", "3.0"))),
        ("|beta| <= 1", Mode::Scan, format!("{}[renorm]\ntruncation = 2\n", map("2.0", "1.0"))),
        ("|beta| >= |alpha|^N", Mode::Scan, format!("{}[renorm]\ntruncation = 2\n", map("2.0", "4.0"))),
        ("beta = 0", Mode::Counterexample, map("2.0", "0.0")),
        (
            "zeta = 0",
            Mode::Correspondence,
            "[correspondence]\nc1 = 2.0\nc2 = 3.0\nentire = [0, 0, 0, 1]\n\
             [[correspondence.terms]]\ncoeff = 1.0\nbranch_point = 0.0\nexponent = \"1/2\"\n"
                .to_string(),
        ),
        (
            "resonant multipliers",
            Mode::Basin,
            format!("{}[basin]\npreset = \"elementary\"\n", map("2.0", "4.0")),
        ),
        (
            "h(0) != 0",
            Mode::Correspondence,
            "[correspondence]\nc1 = 2.0\nc2 = 3.0\nentire = [0, 0, 0, 1]\nnormalize = false\n\
             [[correspondence.terms]]\ncoeff = 1.0\nbranch_point = 1.0\nexponent = \"1/2\"\n"
                .to_string(),
        ),
    ]
}
