use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const HEAT: &str = "\
problem = heat1d
heat.dof = 17
grid.points = 129
solver.m = 8
solver.k = 4
solver.tol = 1e-8
";

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path, workers: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_atmgrit"));
    cmd.args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("ATMGRIT_WORKERS");
    if let Some(w) = workers {
        cmd.env("ATMGRIT_WORKERS", w.to_string());
    }
    cmd.output().unwrap()
}

fn residual_column(csv: &str) -> Vec<String> {
    csv.lines()
        .skip(1)
        .take_while(|l| !l.is_empty())
        .map(|l| l.split(',').nth(1).unwrap().to_string())
        .collect()
}

#[test]
fn solve_writes_history_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "heat.cfg", HEAT);
    let out = dir.path().join("out.csv");
    let o = run(&["solve"], &cfg, &out, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(&out).unwrap();
    let (history, summary) = csv.split_once("\n\n").unwrap();
    assert!(history.starts_with("iter,residual_norm,seconds\n"));
    let norms: Vec<f64> = residual_column(&csv).iter().map(|s| s.parse().unwrap()).collect();
    assert!(*norms.last().unwrap() < 1e-8);

    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("converged,iterations,total_seconds"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "true");
    assert_eq!(row[1].parse::<usize>().unwrap(), norms.len());
}

#[test]
fn residual_history_does_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "heat.cfg", HEAT);
    let one = dir.path().join("one.csv");
    let eight = dir.path().join("eight.csv");
    assert_eq!(run(&["solve"], &cfg, &one, Some(1)).status.code(), Some(0));
    assert_eq!(run(&["solve"], &cfg, &eight, Some(8)).status.code(), Some(0));
    let a = residual_column(&std::fs::read_to_string(one).unwrap());
    let b = residual_column(&std::fs::read_to_string(eight).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn not_converged_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "heat.cfg", &format!("{HEAT}solver.max_iters = 2\n"));
    let out = dir.path().join("out.csv");
    let o = run(&["solve"], &cfg, &out, None);
    assert_eq!(o.status.code(), Some(1));
    assert!(std::fs::read_to_string(out).unwrap().contains("\nfalse,2,"));
}

#[test]
fn config_errors_exit_with_two_and_write_nothing() {
    let dir = TempDir::new().unwrap();
    let cases = [
        "solver.unknown = 3\n",
        "problem = heat1d\nsolver.m = 8\nsolver.k = two\n",
        "problem = heat1d\nsolver.m = 8\nsolver.mode = w-cycle\n",
        "problem = heat1d\ngrid.points = 129\nsolver.m = 8\nsolver.levels = 3\n",
        "problem = heat1d\ngrid.points = 129\nsolver.m = 8, 4\nsolver.mode = two-level\n",
        "problem = heat1d\nsolver.m\n",
        "problem = heat1d\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write(&dir, &format!("bad{i}.cfg"), text);
        let out = dir.path().join(format!("bad{i}.csv"));
        let o = run(&["solve"], &cfg, &out, None);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "case {i} wrote output");
    }
    let o = run(&["solve"], &dir.path().join("missing.cfg"), &dir.path().join("m.csv"), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn too_many_workers_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "heat.cfg", HEAT);
    let out = dir.path().join("out.csv");
    let o = run(&["solve"], &cfg, &out, Some(64));
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn theory_rows_respect_the_bound_and_skip_unstable_pairs() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "t.cfg",
        "theory.lambda = 0.2, 0.9\ntheory.mu = 0.5, 1.5\ntheory.m = 4\ntheory.k = 2, 3\ntheory.p = 16\n",
    );
    let out = dir.path().join("t.csv");
    let o = run(&["theory"], &cfg, &out, None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped 4"));
    let csv = std::fs::read_to_string(out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("lambda,mu,m,k,norm_Ecc,bound,truncation_term"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r[4] <= r[5] + 1e-12);
        assert!(r[6] <= r[5]);
    }
}

#[test]
fn theory_heat_spectrum() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "t.cfg",
        "theory.spectrum = heat\nheat.dof = 9\ngrid.points = 257\ntheory.m = 8\ntheory.k = 2, 8\ntheory.p = 8\n",
    );
    let out = dir.path().join("t.csv");
    assert_eq!(run(&["theory"], &cfg, &out, None).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out).unwrap().lines().count(), 1 + 2 * 7);
}

#[test]
fn sweep_marks_parareal_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "s.cfg",
        "problem = heat1d\nheat.dof = 17\ngrid.points = 129\nsweep.m = 8\nsweep.k = 1, 4, 17\n",
    );
    let out = dir.path().join("s.csv");
    assert_eq!(run(&["sweep-k"], &cfg, &out, None).status.code(), Some(0));
    let csv = std::fs::read_to_string(out).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(csv.lines().next(), Some("m,k,k_over_ncpoints,iterations,variant"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][4], "at-mgrit");
    assert_eq!(rows[2][4], "parareal");
    assert_eq!(rows[2][2], "1.000000");
}

#[test]
fn propagator_matrices() {
    let dir = TempDir::new().unwrap();
    let exact = write(
        &dir,
        "e.cfg",
        "propagator.kind = exact\npropagator.phi = 0.5\npropagator.m = 2\npropagator.k = 3\npropagator.n_t = 3\n",
    );
    let out = dir.path().join("e.csv");
    assert_eq!(run(&["propagator"], &exact, &out, None).status.code(), Some(0));
    // k = N_T: the local grids cover everything and one iteration is exact.
    let csv = std::fs::read_to_string(&out).unwrap();
    for line in csv.lines() {
        assert!(line.split(',').all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
    }

    let ecc = write(
        &dir,
        "c.cfg",
        "propagator.kind = ecc\npropagator.phi = 0.9\npropagator.psi = 0.5\npropagator.m = 2\npropagator.k = 2\npropagator.p = 5\n",
    );
    assert_eq!(run(&["propagator"], &ecc, &out, None).status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    let m: Vec<Vec<f64>> = csv
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(m.len(), 5);
    // Toeplitz: λ^m - μ below the diagonal, μ^(k-1) λ^m on diagonal k, zero beyond.
    let d1 = 0.81 - 0.5;
    for i in 0..5 {
        assert_eq!(m[i][i], 0.0);
        if i >= 1 {
            assert!((m[i][i - 1] - d1).abs() < 1e-15);
        }
        if i >= 2 {
            assert!((m[i][i - 2] - 0.5 * 0.81).abs() < 1e-15);
        }
        if i >= 3 {
            assert_eq!(m[i][i - 3], 0.0);
        }
    }
}
