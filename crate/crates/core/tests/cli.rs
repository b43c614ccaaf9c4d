use std::path::Path;
use std::process::{Command, Output};

use pwave::dataset::read_dataset;
use pwave::io::read_field_file;

fn pwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwave")).args(args).env_remove("PWAVE_THREADS").output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = pwave(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn read_csv(p: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn waveguide_medium_has_minimum_speed_0_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "wg.pwf");
    ok(&["medium", "--kind", "waveguide", "--out", &out]);
    let f = read_field_file(&out).unwrap();
    let min = f.data.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((min - 0.4).abs() < 1e-12, "min {min}");
}

#[test]
fn inclusion_medium_value_inside_box() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "inc.pwf");
    ok(&["medium", "--kind", "inclusion", "--out", &out]);
    let c = read_field_file(&out).unwrap().to_scalar().unwrap();
    // x = 0.40625, y = 0.5 is the grid point next to (0.4, 0.5); the speed does not vary in x there
    assert!((c.at(90, 96) - 0.825).abs() < 1e-12, "{}", c.at(90, 96));
}

#[test]
fn invalid_medium_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pwave(&["medium", "--kind", "granite", "--out", &path(dir.path(), "x.pwf")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x.pwf").exists());
}

#[test]
fn dataset_record_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.pwds"), path(dir.path(), "b.pwds"));
    for out in [&a, &b] {
        ok(&["dataset", "--n-media", "2", "--n-steps", "3", "--seed", "5", "--out", out]);
    }
    assert_eq!(read_dataset(&a).unwrap().records.len(), 6);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(Path::new(&format!("{a}.manifest.json")).exists());
    assert!(!Path::new(&format!("{a}.partial")).exists());

    let tp = path(dir.path(), "tp.pwds");
    ok(&["dataset", "--n-media", "1", "--n-steps", "2", "--variant", "tp", "--k-max", "4", "--out", &tp]);
    assert_eq!(read_dataset(&tp).unwrap().records.len(), (4 + 1) * (2 + 1));
}

#[test]
fn dataset_rejects_zero_media_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "z.pwds");
    let res = pwave(&["dataset", "--n-media", "0", "--out", &out]);
    assert!(!res.status.success());
    assert_ne!(res.status.code(), Some(2));
    assert!(!Path::new(&out).exists());
    assert!(!Path::new(&format!("{out}.partial")).exists());
}

#[test]
fn parareal_reaches_fine_solution_at_k_equal_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "pr.csv");
    ok(&["parareal", "--variant", "procrustes", "--windows", "3", "--iterations", "3", "--out", &out]);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["k", "n", "rel_energy_error"]);
    let last: Vec<_> = rows.iter().filter(|r| r[0] == 3.0).collect();
    assert_eq!(last.len(), 4);
    assert!(last.iter().all(|r| r[2] <= 1e-10), "{last:?}");
}

#[test]
fn dispersion_csv_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "disp.csv");
    ok(&["dispersion", "--c", "1", "--dx", "0.03125", "--out", &out]);
    let (header, rows) = read_csv(&out);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (k, eps) = (col("k"), col("epsilon"));
    assert!(!rows.is_empty());
    for r in &rows {
        let expected = r[k] - 2.0 / 0.03125 * (r[k] * 0.03125 / 2.0).sin();
        assert!((r[eps] - expected).abs() <= 1e-12 * r[k].abs().max(1.0), "k {} eps {}", r[k], r[eps]);
    }
}

#[test]
fn replay_reproduces_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "disp.csv");
    ok(&["dispersion", "--c", "0.7", "--samples", "16", "--out", &out]);
    let first = std::fs::read(&out).unwrap();
    std::fs::remove_file(&out).unwrap();
    ok(&["replay", &format!("{out}.manifest.json")]);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn propagate_writes_energy_history() {
    let dir = tempfile::tempdir().unwrap();
    let (out, csv) = (path(dir.path(), "w.pwf"), path(dir.path(), "e.csv"));
    ok(&["propagate", "--solver", "coarse", "--steps", "2", "--inv-sigma-sq", "25", "--out", &out, "--csv", &csv]);
    let (_, rows) = read_csv(&csv);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| (r[1] / rows[0][1] - 1.0).abs() < 0.05));
    assert_eq!(read_field_file(&out).unwrap().channels, 2);
}

#[test]
fn enhanced_solver_without_net_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = pwave(&["propagate", "--solver", "enhanced", "--out", &path(dir.path(), "w.pwf")]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn missing_input_is_an_io_error() {
    let res = pwave(&["dump", "/nonexistent/file.pwf"]);
    assert_eq!(res.status.code(), Some(5));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "d.csv");
    let bad = Command::new(env!("CARGO_BIN_EXE_pwave"))
        .args(["dispersion", "--samples", "4", "--out", &out])
        .env("PWAVE_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!bad.status.success());
    let good = Command::new(env!("CARGO_BIN_EXE_pwave"))
        .args(["dispersion", "--samples", "4", "--out", &out])
        .env("PWAVE_THREADS", "2")
        .output()
        .unwrap();
    assert!(good.status.success());
}

#[test]
fn eval_baseline_error_grows_with_speed() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "eval.csv");
    ok(&[
        "eval",
        "--baseline",
        "--c-min",
        "0.5",
        "--c-max",
        "2.0",
        "--c-count",
        "3",
        "--inv-sigma-min",
        "5",
        "--inv-sigma-max",
        "15",
        "--inv-sigma-count",
        "2",
        "--out",
        &out,
    ]);
    let (_, rows) = read_csv(&out);
    assert_eq!(rows.len(), 6);
    for s in [5.0, 15.0] {
        let e: Vec<f64> = rows.iter().filter(|r| r[1] == s).map(|r| r[2]).collect();
        assert!(e.windows(2).all(|w| w[0] < w[1]), "{e:?}");
    }
}
