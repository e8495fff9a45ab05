use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn baxter(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_baxter"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn baxter")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("fn.json"), r#"{"kind": "arfima", "d": 0.25}"#).unwrap();
    fs::write(dir.path().join("arma.json"), r#"{"kind": "arma", "ar": [0.5], "ma": [0.3]}"#).unwrap();
    fs::write(dir.path().join("shift.json"), r#"{"family": "shift", "m": 1}"#).unwrap();
    fs::write(
        dir.path().join("band.json"),
        r#"{"family": "bandpass", "mu1": 0.0, "mu2": 1.5708, "window": 512}"#,
    )
    .unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    assert!(o.status.code().is_some_and(|c| c < 2), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_is_byte_identical() {
    let dir = setup();
    let args = |out: &'static str| {
        vec![
            "run", "--process", "arma.json", "--filter", "band.json", "--n-grid", "8:256:x2", "--m-grid", "1,2,4",
            "--out", out,
        ]
    };
    let a = baxter(dir.path(), &args("a"));
    let b = baxter(dir.path(), &args("b"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success());
    for f in ["report.csv", "baxter.csv", "summary.json"] {
        let x = fs::read(dir.path().join("a").join(f)).unwrap();
        let y = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn predict_methods_agree() {
    let dir = setup();
    let lev = stdout(&baxter(dir.path(), &["predict", "--process", "fn.json", "--m", "3", "--n", "32"]));
    let ser = stdout(&baxter(
        dir.path(),
        &["predict", "--process", "fn.json", "--m", "3", "--n", "32", "--method", "series"],
    ));
    let col = |s: &str| -> Vec<f64> {
        s.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect()
    };
    let (a, b) = (col(&lev), col(&ser));
    assert_eq!(a.len(), 32);
    for (x, y) in a.iter().zip(&b) {
        assert!(((x - y) / x).abs() < 1e-6, "{x} {y}");
    }
    assert!(lev.starts_with("k,phi_inf,phi_fin,abs_diff\n"));
}

#[test]
fn mspe_csv_columns_and_bounds() {
    let dir = setup();
    let out = stdout(&baxter(
        dir.path(),
        &["mspe", "--process", "fn.json", "--filter", "shift.json", "--n-grid", "16:256:x2"],
    ));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("n,l1_diff,sigma_tilde,sigma,bound1,bound2,rho_n"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!(r[2] <= r[4] && r[3] <= r[5] && r[3] >= r[6]);
    }
}

#[test]
fn constants_and_coeffs() {
    let dir = setup();
    let json = stdout(&baxter(dir.path(), &["constants", "--process", "fn.json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!((v["k3"].as_f64().unwrap() - 1.1033).abs() < 1e-3);
    assert!(v["c2"].as_f64().unwrap() > 0.0);
    let csv = stdout(&baxter(dir.path(), &["coeffs", "--process", "fn.json", "--len", "3"]));
    assert_eq!(csv.lines().nth(2).unwrap().split(',').take(3).collect::<Vec<_>>(), ["1", "0.25", "0.25"]);
}

#[test]
fn rejects_bad_input() {
    let dir = setup();
    let o = baxter(dir.path(), &["mspe", "--process", "fn.json", "--filter", "band.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = baxter(
        dir.path(),
        &["baxter", "--process", "arma.json", "--n-grid", "4:64:x2", "--tol", "nonsense=1"],
    );
    assert_eq!(o.status.code(), Some(2));
}
