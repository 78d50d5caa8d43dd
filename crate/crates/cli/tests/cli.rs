use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nsl(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nsl"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("NSL_WORKERS", w),
        None => cmd.env_remove("NSL_WORKERS"),
    };
    cmd.output().expect("spawn nsl")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn domain_mesh_solve_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let dom = dir.path().join("box.txt");
    let mesh = dir.path().join("m.txt");
    let out = dir.path().join("run");
    assert!(nsl(&["domain", "--n", "8", "--out", p(&dom)], None).status.success());
    assert!(fs::read_to_string(&dom).unwrap().starts_with("pixeldomain 8 "));
    assert!(nsl(&["mesh", "--domain", p(&dom), "--out", p(&mesh)], None).status.success());
    fs::write(dir.path().join("prob.toml"), "p = 1.5\nb = 1\nf = 8\n").unwrap();
    let r = nsl(
        &["solve", "--problem", p(&dir.path().join("prob.toml")), "--mesh", p(&mesh), "--out", p(&out)],
        None,
    );
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let u = fs::read_to_string(out.join("u.csv")).unwrap();
    assert!(u.starts_with("# mesh: m.txt\nvertex_id,value\n"));
    for line in u.lines().skip(2) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v / 64.0 - 1.0).abs() < 1e-6);
    }
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().contains("el_residual"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    let r = nsl(&["solve", "--problem", p(&missing), "--mesh", p(&missing), "--out", p(dir.path())], None);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("absent.toml"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(nsl(&["solve", "--bogus"], None).status.code(), Some(64));
    assert_eq!(nsl(&["frobnicate"], None).status.code(), Some(64));
    assert_eq!(nsl(&["check"], Some("0")).status.code(), Some(64));
}

#[test]
fn invalid_problem_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let dom = dir.path().join("box.txt");
    let mesh = dir.path().join("m.txt");
    nsl(&["domain", "--n", "4", "--out", p(&dom)], None);
    nsl(&["mesh", "--domain", p(&dom), "--out", p(&mesh)], None);
    fs::write(dir.path().join("prob.toml"), "p = 3\n").unwrap();
    let r = nsl(
        &["solve", "--problem", p(&dir.path().join("prob.toml")), "--mesh", p(&mesh), "--out", p(dir.path())],
        None,
    );
    assert_eq!(r.status.code(), Some(1));
    let r = nsl(
        &["cut", "optimize", "--domain", p(&dom), "--terminals", "2", "2", "0.5", "0.5", "--budget", "5"],
        None,
    );
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn shrinking_hole_stability_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let r = nsl(&["stability", "--seq", "shrinking_hole", "--stages", "6", "--p", "1.5", "--out", p(dir.path())], None);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(fs::read_to_string(dir.path().join("verdict.txt")).unwrap(), "stable\n");
    let csv = fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    assert!(csv.starts_with("index,dH_complement,meas,meas_bpos,grad_gap,field_gap\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn outputs_are_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let dom = dir.path().join("box.txt");
    nsl(&["domain", "--n", "4", "--out", p(&dom)], None);
    let mut traces = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(format!("cut{w}"));
        let r = nsl(
            &[
                "cut", "optimize", "--domain", p(&dom), "--terminals", "0.25", "0.5", "0.5", "0.5", "--p", "1.5",
                "--budget", "30", "--seed", "11", "--out", p(&out),
            ],
            Some(w),
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let trace = fs::read(out.join("cut_trace.csv")).unwrap();
        assert!(trace.starts_with(b"step,energy,accepted,temperature\n"));
        traces.push((trace, fs::read(out.join("cut.txt")).unwrap()));
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn sequence_config_and_probes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("seq.cfg");
    fs::write(&cfg, "kind = fattening_obstacle\nstages = 2\nresolution = 32\nw0 = 0.25\n").unwrap();
    let r = nsl(&["mosco", "--config", p(&cfg), "--out", p(dir.path())], None);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let m1 = fs::read_to_string(dir.path().join("mosco_m1.csv")).unwrap();
    assert!(m1.starts_with("index,m1\n"));
    assert_eq!(m1.lines().count(), 3);
    let m2 = fs::read_to_string(dir.path().join("mosco_m2.csv")).unwrap();
    assert!(m2.starts_with("index,phi_outside,flux_outside,interior_defect\n"));
    let d = dir.path().join("member.txt");
    assert!(nsl(&["domain", "--config", p(&cfg), "--index", "1", "--out", p(&d)], None).status.success());
    let r = nsl(&["domain", "--config", p(&cfg), "--seq", "moving_hole", "--out", p(&d)], None);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn maly_and_density_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let r = nsl(&["maly", "--stages", "3", "--resolution", "32", "--out", p(dir.path())], None);
    assert!(r.status.success());
    let cov = fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert!(cov.starts_with("stage,coverage,increment_norm\n"));
    assert!(dir.path().join("stage_3.csv").exists());
    let dom = dir.path().join("domain.txt");
    let r = nsl(&["density", "--domain", p(&dom), "--count", "2", "--out", p(dir.path())], None);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = fs::read_to_string(dir.path().join("orthogonality.csv")).unwrap();
    for line in table.lines().skip(1) {
        let r: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(r < 1e-10, "{line}");
    }
    assert!(fs::read_to_string(dir.path().join("hperp_0_components.csv")).unwrap().starts_with("component,value\n"));
}
