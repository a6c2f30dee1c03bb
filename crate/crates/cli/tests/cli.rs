use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn bkcalc(args: &[&str], dir: &Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bkcalc")).args(args).current_dir(dir).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p
}

fn read_csv(file: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(file).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn ramp_csv(dir: &Path, n: usize) -> PathBuf {
    let mut s = String::from("t,x1\n");
    for k in 0..=n {
        let t = k as f64 / n as f64;
        s.push_str(&format!("{t},{t}\n"));
    }
    let p = dir.join("ramp.csv");
    fs::write(&p, s).unwrap();
    p
}

fn files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_reruns_are_bit_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed = 9\n[generator]\ndim = 2\nlevel = 8\nensemble = 5\n");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(bkcalc(&["simulate", "--config", cfg, "--out", "a", "--threads", "1"], dir.path()).0, 0);
    assert_eq!(bkcalc(&["simulate", "--config", cfg, "--out", "b", "--threads", "3"], dir.path()).0, 0);
    let (a, b) = (files(&dir.path().join("a")), files(&dir.path().join("b")));
    assert_eq!(a.len(), 5 * 2 + 2);
    assert_eq!(a, b);
    let (header, rows) = read_csv(&dir.path().join("a/paths/path_0003.csv"));
    assert_eq!(header, ["t", "x1", "x2"]);
    assert_eq!(rows.len(), 257);
}

#[test]
fn unit_drift_without_noise_simulates_the_clock() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 1\n[generator]\nkind = \"ito_euler\"\nmu = 1.0\nsigma = 0.0\nlevel = 6\nensemble = 1\n",
    );
    assert_eq!(bkcalc(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).0, 0);
    let (_, rows) = read_csv(&dir.path().join("o/paths/path_0000.csv"));
    for r in rows {
        assert_eq!(r[0], r[1]);
    }
}

#[test]
fn constant_integrand_scales_the_input() {
    let dir = TempDir::new().unwrap();
    let input = ramp_csv(dir.path(), 64);
    let cfg = write_config(
        dir.path(),
        &format!(
            "[run]\ninput = \"{}\"\nintegrand = \"constant\"\n[functional]\nvalue = 2.5\n",
            input.file_name().unwrap().to_str().unwrap()
        ),
    );
    assert_eq!(bkcalc(&["integrate", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).0, 0);
    let (_, rows) = read_csv(&dir.path().join("o/results/integral.csv"));
    for r in rows {
        assert_eq!(r[1], 2.5 * r[0]);
    }
}

#[test]
fn time_against_time_integrates_to_half_square() {
    let dir = TempDir::new().unwrap();
    ramp_csv(dir.path(), 4096);
    let cfg = write_config(dir.path(), "[run]\ninput = \"ramp.csv\"\nintegrand = \"time\"\n[bk]\nmax_level = 10\n");
    assert_eq!(bkcalc(&["integrate", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).0, 0);
    let (_, rows) = read_csv(&dir.path().join("o/results/integral.csv"));
    let tol = 2.0 * 0.5f64.powi(10);
    for r in rows {
        assert!((r[1] - r[0] * r[0] / 2.0).abs() <= tol, "{r:?}");
    }
    let meta = fs::read_to_string(dir.path().join("o/results/integral.json")).unwrap();
    assert!(meta.contains("\"converged\": true"));
}

#[test]
fn forced_non_convergence_is_reported_and_strict_exits_four() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed = 4\n[bk]\nmax_level = 1\ncauchy_tol = 1e-9\n");
    let cfg = cfg.to_str().unwrap();
    assert_eq!(bkcalc(&["integrate", "--config", cfg, "--out", "lax"], dir.path()).0, 0);
    let meta = fs::read_to_string(dir.path().join("lax/results/integral.json")).unwrap();
    assert!(meta.contains("\"converged\": false"));
    let (code, err) = bkcalc(&["integrate", "--config", cfg, "--out", "strict", "--strict-bk"], dir.path());
    assert_eq!(code, 4, "{err}");
    let (_, rows) = read_csv(&dir.path().join("strict/results/integral.csv"));
    assert!(rows.iter().all(|r| r[1] == 0.0));
}

#[test]
fn exit_codes_separate_config_and_io_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(bkcalc(&["simulate", "--out", "o"], dir.path()).0, 2);
    let bad = write_config(dir.path(), "seed = 1\n[generator]\nkind = \"levy\"\n");
    assert_eq!(bkcalc(&["simulate", "--config", bad.to_str().unwrap()], dir.path()).0, 2);
    let typo = write_config(dir.path(), "sede = 1\n");
    assert_eq!(bkcalc(&["simulate", "--config", typo.to_str().unwrap()], dir.path()).0, 2);
    assert_eq!(bkcalc(&["simulate", "--config", "missing.toml"], dir.path()).0, 3);
    let missing_input = write_config(dir.path(), "[run]\ninput = \"nope.csv\"\n");
    assert_eq!(bkcalc(&["qv", "--config", missing_input.to_str().unwrap()], dir.path()).0, 3);
    let no_bundle = write_config(dir.path(), "seed = 1\n[functional]\nname = \"jump_indicator\"\n");
    assert_eq!(bkcalc(&["ito-check", "--config", no_bundle.to_str().unwrap()], dir.path()).0, 2);
    let anticipating = write_config(dir.path(), "seed = 1\n[functional]\nname = \"terminal_value\"\n");
    assert_eq!(bkcalc(&["regularity", "--config", anticipating.to_str().unwrap()], dir.path()).0, 2);
    assert_eq!(bkcalc(&["simulate", "--seed", "1", "--levels", "4,x"], dir.path()).0, 2);
}

#[test]
fn qv_of_the_ramp_vanishes() {
    let dir = TempDir::new().unwrap();
    ramp_csv(dir.path(), 1024);
    let cfg = write_config(dir.path(), "[run]\ninput = \"ramp.csv\"\n[bk]\nmax_level = 12\n");
    assert_eq!(bkcalc(&["qv", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).0, 0);
    let (_, rows) = read_csv(&dir.path().join("o/results/qv_x1_x1.csv"));
    assert!(rows.iter().all(|r| r[1].abs() <= 10.0 * 0.5f64.powi(12)));
}

#[test]
fn ito_check_reports_decreasing_residuals_for_doleans_dade() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "seed = 2024\n[generator]\nlevel = 14\nensemble = 16\n[functional]\nname = \"doleans_dade\"\n[run]\nlevels = [8, 10, 12]\n",
    );
    assert_eq!(bkcalc(&["ito-check", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).0, 0);
    let (header, rows) = read_csv(&dir.path().join("o/results/ito_refinement.csv"));
    assert_eq!(header, ["level", "median_sup", "q90_sup"]);
    assert!(rows[0][1] > rows[1][1] && rows[1][1] > rows[2][1], "{rows:?}");
    let (header, _) = read_csv(&dir.path().join("o/results/ito_trace.csv"));
    assert_eq!(header, ["t", "lhs", "rhs", "residual"]);
}

#[test]
fn ito_check_square_tracks_the_classical_formula() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed = 5\n[generator]\nlevel = 14\nensemble = 2\n[run]\nlevels = [12]\n");
    assert_eq!(bkcalc(&["ito-check", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).0, 0);
    let (_, rows) = read_csv(&dir.path().join("o/results/classical_oracle.csv"));
    let last = rows.last().unwrap();
    assert!((last[1] - last[2]).abs() < 0.1, "{last:?}");
    assert!((last[1] - last[3]).abs() < 0.2, "{last:?}");
}

#[test]
fn derive_dumps_bundle_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "seed = 3\n[generator]\nlevel = 8\n[functional]\nname = \"qv\"\n[bk]\nmax_level = 8\n");
    assert_eq!(bkcalc(&["derive", "--config", cfg.to_str().unwrap(), "--out", "o"], dir.path()).0, 0);
    let (header, rows) = read_csv(&dir.path().join("o/results/derivatives.csv"));
    let hess = header.iter().position(|h| h == "hess11").unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r[hess] == 2.0));

    let cfg = write_config(dir.path(), "seed = 3\n[generator]\nlevel = 8\n[functional]\nname = \"bk_self\"\n[bk]\nmax_level = 8\n");
    assert_eq!(bkcalc(&["derive", "--config", cfg.to_str().unwrap(), "--out", "j"], dir.path()).0, 0);
    let (header, rows) = read_csv(&dir.path().join("j/results/derivatives.csv"));
    let (_, input) = read_csv(&dir.path().join("j/paths/input.csv"));
    let grad = header.iter().position(|h| h == "grad1").unwrap();
    for r in rows {
        let left = input.iter().rev().find(|k| k[0] < r[0]).unwrap()[1];
        assert_eq!(r[grad], left);
    }
}

#[test]
fn regularity_report_is_written() {
    let dir = TempDir::new().unwrap();
    let (code, err) = bkcalc(
        &["regularity", "--seed", "8", "--levels", "4,6,8", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code, 0, "{err}");
    let json = fs::read_to_string(dir.path().join("o/results/regularity.json")).unwrap();
    assert!(json.contains("\"decreasing\": true"));
    assert!(fs::read_to_string(dir.path().join("o/meta.txt")).unwrap().contains("levels = [4, 6, 8]"));
}
