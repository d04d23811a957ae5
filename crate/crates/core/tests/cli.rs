use std::process::{Command, Output};

fn dfderiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfderiv"))
        .args(args)
        .env_remove("DFDERIV_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(
        dfderiv(&["estimate", "--basis", "cb", "--h", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(dfderiv(&["solve", "--basis", "hex"]).status.code(), Some(1));
    assert_eq!(dfderiv(&["sweep", "--h-range", ""]).status.code(), Some(1));
    assert_eq!(dfderiv(&["bench"]).status.code(), Some(1));
    assert_eq!(dfderiv(&["--version"]).status.code(), Some(0));
    // Overflows to infinity.
    let o = dfderiv(&["estimate", "--x", "1e200,1e200", "--h", "1e-3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("evaluation"));
}

#[test]
fn estimate_csv_row() {
    let o = dfderiv(&[
        "estimate",
        "--problem",
        "rosenbrock",
        "--x",
        "0.9,0.81",
        "--basis",
        "cmpb",
        "--h",
        "1e-6",
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>().join(","),
        "problem,basis,model,h,eta,nf,eps_g,eps_d,fmin,gnorm,itns,qmfs"
    );
    let row = rdr.records().next().unwrap().unwrap();
    let eps_d: f64 = row[7].parse().unwrap();
    assert!((eps_d / 3.39e2 - 1.0).abs() < 0.02);
    assert_eq!(&row[5], "7");
}

#[test]
fn sweep_footer_has_slopes() {
    let o = dfderiv(&[
        "sweep",
        "--problem",
        "rosenbrock",
        "--x",
        "1.1,1.21001",
        "--h-range",
        "1e-5:1e-2:7",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4 * 7 + 4);
    for footer in rows.iter().filter(|r| &r[3] == "slope") {
        let slope: f64 = footer[6].parse().unwrap();
        assert!((slope - 2.0).abs() < 0.15, "{footer:?}");
    }

    let o = dfderiv(&["sweep", "--model", "linear", "--basis", "rmpb", "--x", "1.1,1.21001"]);
    let text = stdout(&o);
    let footer = text.lines().last().unwrap();
    let slope: f64 = footer.split(',').nth(6).unwrap().parse().unwrap();
    assert!((slope - 1.0).abs() < 0.15, "{footer}");
}

#[test]
fn solve_json_row() {
    let o = dfderiv(&["solve", "--problem", "rosenbrock", "--basis", "cb", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let row = &v[0];
    assert!(row["fmin"].as_f64().unwrap() <= 1e-8);
    assert!(row["nf"].as_u64().unwrap() <= 1300);
    assert!(row["eps_g"].is_null());
}

#[test]
fn bench_writes_to_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dfderiv"))
        .args(["bench", "--suite", "table4"])
        .env("DFDERIV_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let written = std::fs::read_to_string(dir.path().join("table4.csv")).unwrap();
    assert_eq!(written.lines().count(), 5);
}

#[test]
fn mgh_bench_is_deterministic() {
    let a = dfderiv(&["bench", "--suite", "mgh"]);
    let b = dfderiv(&["bench", "--suite", "mgh"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 1 + 9 * 4);
}
