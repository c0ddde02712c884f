use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use optbal::report::{read_table, BvpRow, FitRow, OracleRow, SweepRow};

fn optbal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optbal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_on_linear_system() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.conf", "potential = zero\nepsilon = 0.1\nout_dir = out\n");
    let out = optbal(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert!(s.contains("final_residual=0e0"), "{s}");
    assert!(s.contains("iterations=1"), "{s}");
    assert!(s.contains("converged=true"), "{s}");
}

#[test]
fn run_quartic_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "q.conf",
        "potential = quad+quart:1\nepsilon = 0.1\nT = 1\nramp = poly:2\nout_dir = out\n",
    );
    let out = optbal(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("m,update_norm,balance_residual"));
    let rows = lines.count();
    assert!((1..=30).contains(&rows), "{rows}");
}

#[test]
fn missing_epsilon_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", "potential = quad\nT = 1\n");
    let out = optbal(&["run", &cfg], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("`epsilon`"), "{}", stderr(&out));
}

#[test]
fn syntax_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", "# header\nepsilon = 0.1\nnonsense\n");
    let out = optbal(&["run", &cfg], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn unknown_key_only_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "w.conf", "potential = zero\nepsilon = 0.1\ncolour = blue\nout_dir = out\n");
    let out = optbal(&["run", &cfg], dir.path());
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning: line 3"), "{}", stderr(&out));
}

#[test]
fn sweep_on_linear_system_skips_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "z.conf",
        "potential = zero\nepsilon_list = 0.1, 0.05, 0.025\nout_dir = out\n",
    );
    let out = optbal(&["sweep", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let fits: Vec<FitRow> = read_table(fs::File::open(dir.path().join("out/fit.csv")).unwrap()).unwrap();
    assert_eq!(fits.len(), 1);
    assert_eq!(fits[0].model, "skipped");
    let cells: Vec<SweepRow> = read_table(fs::File::open(dir.path().join("out/sweep.csv")).unwrap()).unwrap();
    assert!(cells.iter().all(|c| c.balance_residual == 0.0));
}

#[test]
fn sweep_poly_acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.conf",
        "potential = quad+quart:1\nepsilon_list = 0.1, 0.05, 0.025, 0.0125\nramp = poly:2\norder_n = 2\nout_dir = out\n",
    );
    let out = optbal(&["sweep", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let fits: Vec<FitRow> = read_table(fs::File::open(dir.path().join("out/fit.csv")).unwrap()).unwrap();
    assert_eq!(fits[0].model, "algebraic");
    assert!(fits[0].slope.unwrap() >= 1.7);
    let cells: Vec<SweepRow> = read_table(fs::File::open(dir.path().join("out/sweep.csv")).unwrap()).unwrap();
    assert_eq!(cells.len(), 4);
    let svg = fs::read_to_string(dir.path().join("out/sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray"));
}

#[test]
fn sweep_exp_has_exponential_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.conf",
        "potential = quad+quart:1\nepsilon_list = 0.1, 0.05, 0.025, 0.0125\nramp = exp\nout_dir = out\n",
    );
    let out = optbal(&["sweep", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let fits: Vec<FitRow> = read_table(fs::File::open(dir.path().join("out/fit.csv")).unwrap()).unwrap();
    assert_eq!(fits[0].model, "exponential");
    assert!(fits[0].slope.unwrap() < 0.0);
    assert!(fits[0].r2.unwrap() >= 0.9);
}

#[test]
fn oracle_check_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "o.conf",
        "system = oscillator\nmodes = 1:1\nepsilon_list = 0.1, 0.05, 0.025, 0.0125\nramp = poly:1, exp\nout_dir = out\n",
    );
    let out = optbal(&["oracle-check", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Vec<OracleRow> = read_table(fs::File::open(dir.path().join("out/oracle.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0].predicted_order, Some(2));
    assert_eq!(rows[4].predicted_order, None);
    assert!(rows.iter().all(|r| r.abs_error.is_finite() && r.abs_error > 0.0));
}

#[test]
fn malformed_modes_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.conf", "system = oscillator\nmodes = 1:one\nepsilon = 0.1\n");
    let out = optbal(&["oracle-check", &cfg], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("modes"), "{}", stderr(&out));
}

#[test]
fn bvp_compare_on_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "b.conf",
        "potential = quad\nepsilon_list = 0.1, 0.05\nramp = poly:2\nout_dir = out\n",
    );
    let out = optbal(&["bvp-compare", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let rows: Vec<BvpRow> = read_table(fs::File::open(dir.path().join("out/bvp.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r.shoot_nudge_diff <= 1e-8, "{r:?}");
    }
}

#[test]
fn oscillator_run_converges_in_one_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "r.conf",
        "system = oscillator\nmodes = 1:1, 2:0.25, 3:0.111\nepsilon = 0.05\nramp = poly:2\nout_dir = out\n",
    );
    let out = optbal(&["run", &cfg], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("converged=true"), "{}", stdout(&out));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    let run = root.join("run_quartic.conf");
    let out = optbal(&["run", run.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("out/run/trace.csv").exists());
}
