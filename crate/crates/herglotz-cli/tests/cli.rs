use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use herglotz_cli::io::read_field_csv;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herglotz"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn tensor(json: &Value) -> Vec<Vec<(f64, f64)>> {
    json["tensor"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| {
            row.as_array()
                .unwrap()
                .iter()
                .map(|z| (z[0].as_f64().unwrap(), z[1].as_f64().unwrap()))
                .collect()
        })
        .collect()
}

fn kernel_json(extra: &[&str]) -> Value {
    let o = run(&[&["kernel"], extra].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["no-such-verb"])), 2);
    assert_eq!(code(&run(&["--dim", "4", "norms"])), 2);
    let o = run(&["--kp", "1", "norms"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--help"));
    assert_eq!(code(&run(&["--kp", "1", "--ks", "1", "kernel", "--x", "1,0,0", "--y", "1,0,0"])), 2);
    assert_eq!(code(&run(&["--tol", "-1", "kernel", "--x", "1,0,0", "--y", "1,0,0"])), 2);
    assert_eq!(code(&run(&["kernel", "--x", "1,0", "--y", "1,0,0"])), 2);
    assert_eq!(code(&run(&["asymptotics"])), 2);
}

#[test]
fn missing_input_is_an_io_error() {
    let o = run(&["reproduce", "--field", "/nonexistent/field.json"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("/nonexistent/field.json"));
}

#[test]
fn schema_violations_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(dir.path(), "broken.json", "{\"modes\": [");
    let o = run(&["reproduce", "--field", p(&broken)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let degree0 = write(dir.path(), "deg0.json", r#"{"modes":[{"l":0,"m":0,"a":[1,0],"b":[1,0]}]}"#);
    let o = run(&["reproduce", "--field", p(&degree0)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("degree 0"), "{}", stderr(&o));

    let bad_grid = write(dir.path(), "grid.csv", "x,y,z\n0.1,0.2,0.3\n0.1,abc,0.3\n");
    let o = run(&["synth", "--farfield", p(&data("farfield_compressional.json")), "--grid", p(&bad_grid)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("column y"), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let field = data("field_basis.json");
    let args = ["--seed", "7", "reproduce", "--field", p(&field), "--samples", "5"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["--seed", "8", "reproduce", "--field", p(&field), "--samples", "5"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn swapped_points_give_the_conjugate_transpose() {
    for (dim, x, y) in [("3", "0.3,-0.2,0.5", "1,0.4,-0.7"), ("2", "0.3,-0.2", "1,0.4")] {
        let a = tensor(&kernel_json(&["--dim", dim, "--x", x, "--y", y]));
        let b = tensor(&kernel_json(&["--dim", dim, "--x", y, "--y", x]));
        let scale = a.iter().flatten().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max);
        for i in 0..a.len() {
            for j in 0..a.len() {
                let (re, im) = a[j][i];
                let (re2, im2) = b[i][j];
                assert!((re - re2).abs() <= 1e-12 * scale && (im + im2).abs() <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn raising_lmax_shrinks_the_tail() {
    let tail = |l: &str| kernel_json(&["--lmax", l, "--x", "1,0.5,0.2", "--y", "0.4,-1,0.3"])["tail_estimate"]
        .as_f64()
        .unwrap();
    let (t8, t10) = (tail("8"), tail("10"));
    assert!(t10 <= 0.5 * t8, "{t8} then {t10}");
}

#[test]
fn equal_points_report_the_hermitian_check() {
    let k = kernel_json(&["--x", "0.4,0.1,-0.3", "--y", "0.4,0.1,-0.3"]);
    assert!(k["hermitian"]["min_eigenvalue"].as_f64().unwrap() > 0.0);
    assert_eq!(k["pass"], Value::Bool(true));
}

#[test]
fn verify_gram_at_degree_zero_passes() {
    let o = run(&["--lmax", "0", "verify-gram"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], Value::Bool(true));
}

#[test]
fn perturbed_convention_names_the_first_violated_identity() {
    let o = run(&["--lmax", "2", "verify-gram", "--perturb-convention"]);
    assert_eq!(code(&o), 1);
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["first_failure"], Value::String("value L·N".into()));
    assert!(stderr(&o).contains("first violated identity: value L·N"));
}

#[test]
fn support_beyond_truncation_is_not_judged() {
    let o = run(&["--lmax", "0", "reproduce", "--field", p(&data("field_basis.json")), "--samples", "3"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn empty_field_has_zero_residuals() {
    for dim in ["3", "2"] {
        let o = run(&["--dim", dim, "reproduce", "--field", p(&data("field_empty.json")), "--samples", "4"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let mut r = csv::Reader::from_reader(o.stdout.as_slice());
        let col = r.headers().unwrap().iter().position(|h| h == "residual").unwrap();
        let rows: Vec<f64> = r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect();
        assert_eq!(rows, vec![0.0; 4]);
    }
}

#[test]
fn synth_writes_a_readable_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("field.csv");
    let o = run(&[
        "--out",
        p(&out),
        "synth",
        "--farfield",
        p(&data("farfield_compressional.json")),
        "--grid",
        p(&data("grid.csv")),
        "--residual",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (field, residual) = read_field_csv(&out).unwrap();
    assert_eq!(field.len(), 5);
    assert_eq!(field.points()[3], [1.5, -1.5, 0.7]);
    assert!(field.values().iter().flatten().any(|z| z.norm() > 1e-3));
    assert!(residual.unwrap().iter().all(|r| *r <= 1e-5));
}

#[test]
fn zero_far_field_synthesizes_zero() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "zero.json", r#"{"representation":"harmonic","gp":[]}"#);
    let out = dir.path().join("field.csv");
    let o = run(&["--out", p(&out), "synth", "--farfield", p(&g), "--grid", p(&data("grid.csv"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (field, residual) = read_field_csv(&out).unwrap();
    assert!(residual.is_none());
    assert!(field.values().iter().flatten().all(|z| *z == herglotz::C64::new(0.0, 0.0)));
}

#[test]
fn asymptotics_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let o = run(&["--lmax", "40", "--out", p(&out), "asymptotics"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["diag.csv", "cross.csv", "overlap.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let s: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["pass"], Value::Bool(true));
}
