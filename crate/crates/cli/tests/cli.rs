use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use staticext::field::standard;
use staticext::geometry::{static_residual, MetricState};
use staticext::solver::{conformal_schwarzschild_state, residual_norms, SolverConfig};
use staticext_cli::bdfile::BoundaryFile;
use staticext_cli::manifest::strip_timings;
use staticext_cli::{exit, solfile};

fn staticext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_staticext")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", p.display()))
}

/// Boundary data of the isotropic Schwarzschild slice at `r = 1`, written
/// from the closed forms `σ = (1 + m/2)⁴ g` and `h = (2 − m)/(1 + m/2)³`.
fn schwarzschild_bd(m: f64, lmax: usize) -> String {
    let psi = 1.0 + 0.5 * m;
    format!(
        "staticext-bd v1\nlmax {lmax}\nsigma 0 1 even d {:e}\nh 0 1 {:e}\n",
        psi.powi(4) - 1.0,
        (2.0 - m) / psi.powi(3) - 2.0
    )
}

fn log_value(log: &str, key: &str) -> Vec<String> {
    log.lines()
        .rev()
        .find(|l| l.starts_with(&format!("{key} ")))
        .unwrap_or_else(|| panic!("no `{key}` line in\n{log}"))
        .split_whitespace()
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn round_data_is_solved_without_a_newton_step() {
    let dir = tempfile::tempdir().unwrap();
    let bd = write(dir.path(), "round.bd", "staticext-bd v1\nlmax 4\n");
    let out = dir.path().join("round.sol");
    let o = staticext(&["solve", "--boundary", path_str(&bd), "--out", path_str(&out), "--nr", "24", "--lmax", "4"]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    let log = std::fs::read_to_string(with_suffix(&out, ".log")).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("iter ")).count(), 1);
    assert_eq!(log_value(&log, "status"), ["converged"]);
    assert_eq!(log_value(&log, "mass"), ["0.0000000000e0", "0.0000000000e0"]);
    let verify = std::fs::read_to_string(with_suffix(&out, ".verify")).unwrap();
    assert!(verify.contains("status static"));
}

#[test]
fn schwarzschild_solve_end_to_end() {
    let m = 0.1;
    let dir = tempfile::tempdir().unwrap();
    let bd_path = write(dir.path(), "s.bd", &schwarzschild_bd(m, 8));
    let out = dir.path().join("s.sol");
    let o = staticext(&["solve", "--boundary", path_str(&bd_path), "--out", path_str(&out)]);
    assert_eq!(code(&o), exit::OK, "{}{}", stdout(&o), stderr(&o));

    let log = std::fs::read_to_string(with_suffix(&out, ".log")).unwrap();
    assert_eq!(log_value(&log, "status"), ["converged"]);
    let masses: Vec<f64> = log_value(&log, "mass").iter().map(|v| v.parse().unwrap()).collect();
    for v in &masses {
        assert!((v - m).abs() < 1e-4, "{masses:?}");
    }
    let iters = log.lines().filter(|l| l.starts_with("iter ")).count();
    assert!(iters - 1 <= 8, "{log}");

    // Reloading the solution reproduces the logged final residual.
    let text = std::fs::read_to_string(&out).unwrap();
    let state = solfile::parse(&text).unwrap();
    let cfg = SolverConfig::default();
    let bd = BoundaryFile::parse(&std::fs::read_to_string(&bd_path).unwrap())
        .unwrap()
        .to_boundary_data(state.disc())
        .unwrap();
    let res = residual_norms(&static_residual(&state, &bd).unwrap(), cfg.delta)
        .into_iter()
        .fold(0.0, f64::max);
    let logged: f64 = log
        .lines()
        .filter(|l| l.starts_with("iter "))
        .last()
        .unwrap()
        .split_whitespace()
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!((res - logged).abs() < 1e-12, "reloaded {res:e}, logged {logged:e}");

    let o = staticext(&["mass", path_str(&out)]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    let got: f64 = log_value(&stdout(&o), "mass")[0].parse().unwrap();
    // The log keeps ten significant digits.
    assert!((got - masses[0]).abs() < 1e-10);
}

#[test]
fn asymmetric_data_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let bd = write(dir.path(), "odd.bd", "staticext-bd v1\nlmax 4\nsigma 2 1 odd c 1e-3\n");
    let out = dir.path().join("odd.sol");
    let o = staticext(&["solve", "--boundary", path_str(&bd), "--out", path_str(&out), "--nr", "24", "--lmax", "4"]);
    assert_eq!(code(&o), exit::NOT_SYMMETRIC);
    assert!(stderr(&o).contains("reflection"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bd = write(dir.path(), "bad.bd", "staticext-bd v1\nlmax 4\n# comment\nsigma 2 1 even q 1e-3\n");
    let o = staticext(&["solve", "--boundary", path_str(&bd), "--out", path_str(&dir.path().join("x"))]);
    assert_eq!(code(&o), exit::INPUT);
    assert!(stderr(&o).contains("bad.bd:4:"), "{}", stderr(&o));

    let o = staticext(&["solve", "--boundary", path_str(&dir.path().join("missing.bd")), "--out", "x"]);
    assert_eq!(code(&o), exit::INPUT);
}

#[test]
fn data_above_the_grid_degree_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let bd = write(dir.path(), "hi.bd", "staticext-bd v1\nlmax 6\nh 6 1 1e-3\n");
    let o = staticext(&["solve", "--boundary", path_str(&bd), "--out", path_str(&dir.path().join("x")), "--lmax", "4"]);
    assert_eq!(code(&o), exit::INPUT);
    assert!(stderr(&o).contains("degree 6"), "{}", stderr(&o));
}

#[test]
fn iteration_cap_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let bd = write(dir.path(), "s.bd", &schwarzschild_bd(0.1, 4));
    let out = dir.path().join("s.sol");
    let o = staticext(&["solve", "--boundary", path_str(&bd), "--out", path_str(&out), "--nr", "24", "--lmax", "4", "--max-iter", "1"]);
    assert_eq!(code(&o), exit::DIVERGED, "{}", stderr(&o));
    let log = std::fs::read_to_string(with_suffix(&out, ".log")).unwrap();
    assert_eq!(log_value(&log, "status"), ["diverged"]);
    assert!(!out.exists());
}

#[test]
fn invalid_options_exit_with_input_error() {
    assert_eq!(code(&staticext(&["solve", "--boundary", "x"])), exit::INPUT);
    assert_eq!(code(&staticext(&["frobnicate"])), exit::INPUT);
    assert_eq!(code(&staticext(&["--help"])), exit::OK);
    let o = Command::new(env!("CARGO_BIN_EXE_staticext"))
        .args(["cokernel", "--nr", "16", "--lmax", "2"])
        .env("STATICEXT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), exit::INPUT);
}

#[test]
fn mass_of_solution_files() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write(dir.path(), "flat.sol", &solfile::render(&MetricState::flat(&standard(24, 2).unwrap())));
    let o = staticext(&["mass", path_str(&flat)]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    assert_eq!(log_value(&stdout(&o), "mass"), ["0.0000000000e0", "0.0000000000e0"]);

    let m = 0.2;
    let conformal = write(dir.path(), "u4.sol", &solfile::render(&conformal_schwarzschild_state(&standard(32, 2).unwrap(), m)));
    let o = staticext(&["mass", path_str(&conformal)]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    for v in log_value(&stdout(&o), "mass") {
        let v: f64 = v.parse().unwrap();
        assert!((v - m).abs() < 1e-6, "{v}");
    }

    let coarse = write(dir.path(), "coarse.sol", &solfile::render(&conformal_schwarzschild_state(&standard(8, 2).unwrap(), m)));
    let o = staticext(&["mass", path_str(&coarse)]);
    assert_eq!(code(&o), exit::MASS_SPREAD);
    assert!(stderr(&o).contains("too coarse"), "{}", stderr(&o));

    let broken = write(dir.path(), "broken.sol", "staticext-sol v1\nnr 4\n");
    assert_eq!(code(&staticext(&["mass", path_str(&broken)])), exit::INPUT);
}

#[test]
fn outputs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    // Products of L = 2 data reach L = 6 and beyond, so the solve needs
    // angular room above the data's degree to converge.
    let bd = write(dir.path(), "p.bd", "staticext-bd v1\nlmax 4\nsigma 2 1 even d 1e-3\nsigma 2 1 even c -5e-4\nh 2 1 2e-3\n");
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_staticext"))
            .args(["solve", "--boundary", path_str(&bd), "--out", path_str(&out), "--nr", "24", "--lmax", "8"])
            .env("STATICEXT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
        ["", ".log", ".verify"].map(|s| strip_timings(&std::fs::read_to_string(with_suffix(&out, s)).unwrap()))
    };
    let a = run("1", "a.sol");
    let b = run("4", "b.sol");
    let c = run("4", "c.sol");
    assert_eq!(a, b);
    assert_eq!(b, c);
}

#[test]
fn cokernel_pattern_and_linearization_orders() {
    let o = staticext(&["cokernel", "--nr", "24", "--lmax", "4"]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("pattern match"));
    let dims: Vec<(String, String)> = table
        .lines()
        .skip(1)
        .take_while(|l| !l.starts_with("pattern"))
        .map(|l| {
            let t: Vec<&str> = l.split_whitespace().collect();
            (format!("{} {}", t[0], t[1]), t[2].to_string())
        })
        .collect();
    assert_eq!(dims.len(), 9);
    for (key, dim) in dims {
        let want = if key.starts_with("1 ") { "1" } else { "0" };
        assert_eq!(dim, want, "{key}");
    }

    let o = staticext(&["cokernel", "--L", "1", "--parity", "odd", "--nr", "24"]);
    assert_eq!(code(&o), exit::OK);
    assert_eq!(code(&staticext(&["cokernel", "--parity", "sideways"])), exit::INPUT);

    let o = staticext(&["verify-linearization", "--seed", "7", "--nr", "16", "--lmax", "4"]);
    assert_eq!(code(&o), exit::OK, "{}", stdout(&o));
    assert!(stdout(&o).contains("orders pass"));
    let o = staticext(&["verify-linearization", "--eps", "1e-3", "--nr", "16", "--lmax", "4"]);
    assert_eq!(code(&o), exit::OK);
    assert!(!stdout(&o).contains("order"));
}
