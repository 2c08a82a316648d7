use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn hjhom(task: &str, config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{task}.cfg"));
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_hjhom"))
        .arg(task)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\n{}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn manifest(dir: &Path) -> Vec<(String, String)> {
    let text = fs::read_to_string(dir.join("out/manifest.txt")).unwrap();
    let (_, rest) = text.split_once("[artifacts]\n").unwrap();
    rest.lines()
        .map(|l| {
            let (sum, name) = l.split_once("  ").unwrap();
            (name.to_string(), sum.to_string())
        })
        .collect()
}

fn checksums_match(dir: &Path) {
    for (name, sum) in manifest(dir) {
        let bytes = fs::read(dir.join("out").join(&name)).unwrap();
        let got: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(got, sum, "{name}");
    }
}

/// `p,hbar` rows.
fn oracle(dir: &Path, potential: &str, ps: &str) -> Vec<(f64, f64)> {
    let o = hjhom("oracle-1d", &format!("task.potential = {potential}\ntask.p = {ps}\n"), dir, &[]);
    ok(&o);
    fs::read_to_string(dir.join("out/oracle.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn sample_env_writes_cloud_field_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "environment.side = 4.0\nenvironment.n = 16\nenvironment.seeds = 3, 4\n";
    ok(&hjhom("sample-env", cfg, dir.path(), &["--seed-offset", "10"]));
    let names: Vec<String> = manifest(dir.path()).into_iter().map(|e| e.0).collect();
    for s in [13, 14] {
        for f in [format!("cloud_seed{s}.txt"), format!("potential_seed{s}.hjf"), format!("potential_seed{s}.dat")] {
            assert!(names.contains(&f), "{f} missing from {names:?}");
        }
    }
    checksums_match(dir.path());
    let text = fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(text.contains("environment.nu = 1.0\n"), "defaults are echoed");
    assert!(text.contains("seed_offset = 10\n"));
    let field = hjhom::numerics::read_field(dir.path().join("out/potential_seed13.hjf")).unwrap();
    assert_eq!(field.grid().n(), 16);
}

#[test]
fn estimate_hbar_on_empty_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "environment.nu = 0.0\nenvironment.side = 2.0\nenvironment.n = 8\n\
               hamiltonian.gamma = 3.0\nhamiltonian.c0 = 0.5\ntask.p = 0,0; 1,0; 1,1\n";
    ok(&hjhom("estimate-hbar", cfg, dir.path(), &[]));
    let csv = fs::read_to_string(dir.path().join("out/hbar.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "p_1,p_2,estimate,spread,route,n_seeds");
    for l in lines {
        let c: Vec<&str> = l.split(',').collect();
        let (p1, p2, est): (f64, f64, f64) = (c[0].parse().unwrap(), c[1].parse().unwrap(), c[2].parse().unwrap());
        let want = 0.5 * (p1 * p1 + p2 * p2).powf(1.5);
        assert!((est - want).abs() <= 0.05 * want.max(1e-3), "{l}: want {want}");
    }
    checksums_match(dir.path());
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let cfg = "environment.side = 4.0\nenvironment.n = 16\nenvironment.seeds = 1, 2\n\
               task.p = 0.5,0; 1,0.5\ntask.deltas = 0.1, 0.05\ntask.tol = 1e-6\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&hjhom("estimate-hbar", cfg, a.path(), &["--threads", "2"]));
    ok(&hjhom("estimate-hbar", cfg, b.path(), &[]));
    let (ma, mb) = (manifest(a.path()), manifest(b.path()));
    assert_eq!(ma, mb);
    for (name, _) in ma {
        assert_eq!(
            fs::read(a.path().join("out").join(&name)).unwrap(),
            fs::read(b.path().join("out").join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_errors_exit_3_and_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = hjhom("sample-env", "environment.nu = 1.0\nenvironment.colour = red\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("environment.colour"));

    let o = hjhom("solve-delta", "task.delta = 0.1\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("task.p"));

    let o = hjhom("sample-env", "task.kind = closure\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("task.kind"));

    let o = hjhom("oracle-1d", "task.p = 1\nhamiltonian.form = fpp\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));

    let o = hjhom("oracle-1d", "task.p = 1\ntask.potential = log(y\n", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("task.potential"));
}

#[test]
fn divergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "environment.side = 4.0\nenvironment.n = 16\ntask.p = 1,0\ntask.delta = 0.01\n\
               task.tol = 1e-12\ntask.max_iters = 2\n";
    let o = hjhom("solve-delta", cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solve_delta"));
}

#[test]
fn oracle_1d_examples() {
    let dir = tempfile::tempdir().unwrap();
    let v0 = oracle(dir.path(), "0", "2");
    assert!((v0[0].1 - 4.0).abs() < 1e-6, "{v0:?}");
    let v1 = oracle(dir.path(), "1", "0");
    assert!((v1[0].1 + 1.0).abs() < 1e-6, "{v1:?}");
    let s = oracle(dir.path(), "sin(pi*y)^2", "0, 0.3");
    assert!(s[0].1.abs() < 1e-6, "{s:?}");
    // the flat region of sin² ends at ∫ sin(πy) dy = 2/π
    assert!(s[1].1.abs() < 1e-6, "{s:?}");
    checksums_match(dir.path());
}

#[test]
fn small_pipeline_tasks_run() {
    let env = "environment.side = 4.0\nenvironment.n = 16\n";
    let dir = tempfile::tempdir().unwrap();
    ok(&hjhom("solve-delta", &format!("{env}task.p = 1,0\ntask.delta = 0.1\ntask.tol = 1e-6\n"), dir.path(), &[]));
    checksums_match(dir.path());

    let dir = tempfile::tempdir().unwrap();
    ok(&hjhom("solve-metric", &format!("{env}task.p = 0,0\ntask.mu = 1.0\ntask.half = 8\n"), dir.path(), &[]));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().contains(",true,"), "{summary}");
    checksums_match(dir.path());

    let dir = tempfile::tempdir().unwrap();
    ok(&hjhom("profile-mbar", &format!("{env}task.mu = 1.0\ntask.half = 16\n"), dir.path(), &[]));
    let profile = fs::read_to_string(dir.path().join("out/profile.csv")).unwrap();
    assert_eq!(profile.lines().next(), Some("direction,t,slope"));
    assert_eq!(profile.lines().count(), 1 + 3 * 8);

    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{env}task.p = 0,0; 0.5,0; 1,0; 0,1\ntask.deltas = 0.1, 0.05\ntask.tol = 1e-6\n");
    ok(&hjhom("property-suite", &cfg, dir.path(), &[]));
    let props = fs::read_to_string(dir.path().join("out/properties.txt")).unwrap();
    assert!(props.contains("convexity_violation = "), "{props}");
}

#[test]
fn metric_routes_agree_on_empty_environment() {
    // V ≡ 0, γ = 2: H̄(p) = |p|²
    let env = "environment.nu = 0.0\nenvironment.side = 4.0\nenvironment.n = 16\ntask.p = 1,0\n";
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{env}task.route = solvability\ntask.bracket = 0.5, 1.5\ntask.half = 16\ntask.bisection_tol = 0.01\n");
    ok(&hjhom("estimate-hbar", &cfg, dir.path(), &[]));
    let csv = fs::read_to_string(dir.path().join("out/hbar.csv")).unwrap();
    let est: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((est - 1.0).abs() < 0.05, "{csv}");

    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{env}task.route = metric_inversion\ntask.mu_grid = 0.5, 0.75, 1.0, 1.25, 1.5\ntask.half = 32\n");
    ok(&hjhom("estimate-hbar", &cfg, dir.path(), &[]));
    let csv = fs::read_to_string(dir.path().join("out/hbar.csv")).unwrap();
    let est: f64 = csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((est - 1.0).abs() < 0.05, "{csv}");
}
