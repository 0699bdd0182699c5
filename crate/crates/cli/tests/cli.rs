use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ising(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ising"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("running ising")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn generate_regular_graph() {
    let dir = TempDir::new().unwrap();
    let o = ising(&["generate", "--sizes", "100"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&dir.path().join("graph_n100.json"));
    assert_eq!(meta["edges"], 150);
    assert_eq!(meta["degree_sum"], 300);
    let edges = fs::read_to_string(dir.path().join("graph_n100.edges")).unwrap();
    let body: Vec<&str> = edges.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "100 150");
    assert_eq!(body.len(), 151);
}

#[test]
fn generate_power_law_has_even_degree_sum() {
    let dir = TempDir::new().unwrap();
    let law = r#"{"family":"power_law","params":{"tau":2.5,"k_min":1},"k_max":10000}"#;
    let o = ising(&["generate", "--sizes", "10000", "--law", law], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&dir.path().join("graph_n10000.json"));
    assert_eq!(meta["degree_sum_even"], true);
    assert_eq!(meta["degree_sum"].as_u64().unwrap(), 2 * meta["edges"].as_u64().unwrap());
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["fixed-point", "--betas", "0.6", "--fields", "0.2", "--pool-size", "2000", "--seed", "9"];
    assert_eq!(code(&ising(&args, a.path())), 0);
    assert_eq!(code(&ising(&args, b.path())), 0);
    for name in ["fixed_point_beta0.6_B0.2.pool", "fixed_point_beta0.6_B0.2.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let g = ["generate", "--sizes", "500", "--seed", "9"];
    assert_eq!(code(&ising(&g, a.path())), 0);
    assert_eq!(code(&ising(&g, b.path())), 0);
    assert_eq!(
        fs::read(a.path().join("graph_n500.edges")).unwrap(),
        fs::read(b.path().join("graph_n500.edges")).unwrap()
    );
}

#[test]
fn zero_beta_fixed_point_is_the_field() {
    let dir = TempDir::new().unwrap();
    let o = ising(&["fixed-point", "--betas", "0", "--fields", "0.3", "--pool-size", "1000"], dir.path());
    assert_eq!(code(&o), 0);
    let diag = json(&dir.path().join("fixed_point_beta0_B0.3.json"));
    assert_eq!(diag["iterations"], 1);
    assert_eq!(diag["converged"], true);
    let pool = fs::read_to_string(dir.path().join("fixed_point_beta0_B0.3.pool")).unwrap();
    for line in pool.lines().skip(1) {
        assert_eq!(line.parse::<f64>().unwrap(), 0.3);
    }
}

#[test]
fn iteration_cap_reports_not_converged() {
    let dir = TempDir::new().unwrap();
    let o = ising(
        &["fixed-point", "--betas", "0.8", "--fields", "0.2", "--pool-size", "1000", "--max-iterations", "1"],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("NOT converged"));
    let diag = json(&dir.path().join("fixed_point_beta0.8_B0.2.json"));
    assert_eq!(diag["converged"], false);
    assert!(diag["bracket_gap"].as_f64().unwrap() > 1e-3);
}

#[test]
fn thermo_rows_at_zero_beta() {
    let dir = TempDir::new().unwrap();
    let o = ising(
        &["thermo-sweep", "--betas", "0,0.4", "--fields", "0.1,0.7", "--pool-size", "2000", "--mc-samples", "20000"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("thermo.csv"));
    assert_eq!(
        rows[0],
        ["beta", "B", "phi", "phi_se", "M", "M_se", "U", "U_se", "chi", "chi_se", "C", "C_se"]
    );
    assert_eq!(rows.len(), 5);
    for row in &rows[1..] {
        let v = |i: usize| row[i].parse::<f64>().unwrap();
        if v(0) == 0.0 {
            let b = v(1);
            assert!((v(2) - (2.0 * b.cosh()).ln()).abs() < 1e-12);
            assert!((v(4) - b.tanh()).abs() < 1e-12);
        }
        assert!(v(3) >= 0.0 && v(5) >= 0.0 && v(7) >= 0.0);
    }
}

#[test]
fn chain_row_at_tiny_field() {
    let dir = TempDir::new().unwrap();
    let law = r#"{"family":"regular","params":{"k":2}}"#;
    let o = ising(
        &[
            "thermo-sweep", "--law", law, "--betas", "0.5", "--fields", "1e-6", "--pool-size", "1000",
            "--tol", "1e-12", "--max-iterations", "100000", "--mc-samples", "1000",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("thermo.csv"));
    let phi: f64 = rows[1][2].parse().unwrap();
    assert!((phi - (2.0 * 0.5f64.cosh()).ln()).abs() < 1e-4);
}

#[test]
fn verify_passes_and_detects_faults() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("verify.json");
    fs::write(
        &cfg,
        r#"{"verify":{"instances":10,"max_n":6,"boundary_gap":{"max_depth":5,"trees":10},"bracket":{"solver":{"pool_size":2000,"tol":1e-2}}}}"#,
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = ising(&["verify", "--config", cfg], &dir.path().join("ok"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&dir.path().join("ok/verify.json"))["passed"], true);
    for fault in ["gks", "ghs", "boundary-gap", "bracket"] {
        let o = ising(&["verify", "--config", cfg, "--inject-fault", fault], &dir.path().join(fault));
        assert_eq!(code(&o), 2, "fault {fault}");
    }
}

#[test]
fn outputs_carry_hash_and_seed() {
    let dir = TempDir::new().unwrap();
    let args = ["--seed", "42", "--sizes", "50", "--pool-size", "1000", "--mc-samples", "1000", "--no-derivatives"];
    assert_eq!(code(&ising(&[&["generate"][..], &args].concat(), dir.path())), 0);
    let hash = json(&dir.path().join("config.json"))["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    assert_eq!(code(&ising(&[&["fixed-point"][..], &args].concat(), dir.path())), 0);
    assert_eq!(code(&ising(&[&["thermo-sweep"][..], &args].concat(), dir.path())), 0);
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains(&hash), "{}", path.display());
        if path.extension().is_some_and(|e| e == "json") {
            assert_eq!(json(&path)["seed"], 42, "{}", path.display());
        } else if path.extension().is_some_and(|e| e != "pool") {
            assert!(text.starts_with(&format!("# config_hash={hash} seed=42")), "{}", path.display());
        }
    }
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = ising(&["generate", "--sizes", "10"], &blocker.join("sub"));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"pool_sise": 10}"#).unwrap();
    let o = ising(&["generate", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
}
