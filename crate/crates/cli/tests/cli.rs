use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ttiga(args: &[&str], cache: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ttiga"));
    cmd.args(args);
    match cache {
        Some(c) => cmd.env("TTIGA_CACHE_DIR", c),
        None => cmd.env_remove("TTIGA_CACHE_DIR"),
    };
    cmd.output().expect("run ttiga")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn header(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path).unwrap().headers().unwrap().iter().map(str::to_string).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_smoke_writes_report_csv_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cube.json", r#"{"geometry": {"name": "unit_cube"}, "degree": 2, "elements": 4}"#);
    let out = dir.path().join("out");
    let o = ttiga(&["solve", "--config", s(&cfg), "--out", s(&out), "--field-samples", "3", "--seed", "7"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("000_unit_cube_p2_e4.json")).unwrap()).unwrap();
    assert!(report["l2_error"].as_f64().unwrap() < 1e-2);
    assert_eq!(report["seed"], 7);
    let r = rows(&out.join("results.csv"));
    assert_eq!(r.len(), 1);
    assert_eq!(&r[0][0], "unit_cube");
    assert_eq!(&r[0][11], "ok");
    assert_eq!(
        header(&out.join("results.csv")),
        ["geometry", "p", "elems", "dofs", "l2_error", "cr_K", "cr_f", "cr_u", "t_assemble_s", "t_solve_s", "residual", "status"]
    );
    let field = fs::read_to_string(out.join("000_unit_cube_p2_e4.field.txt")).unwrap();
    let lines: Vec<&str> = field.lines().collect();
    assert_eq!(lines[0], "# ttiga-field 3 3 3");
    assert_eq!(lines.len(), 28);
    // centre sample of the cube sine problem
    let mid: Vec<f64> = lines[1 + 13].split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(&mid[..3], &[0.5, 0.5, 0.5]);
    assert!((mid[3] - 1.0).abs() < 2e-2, "{}", mid[3]);
    let o = ttiga(&["check", s(&out)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"geometry": {"name": "unit_cube"}, "eps_solve": 0.0}"#);
    let o = ttiga(&["solve", "--config", s(&cfg), "--out", s(&dir.path().join("o"))], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("eps_solve"));
    let cfg = write(dir.path(), "typo.json", r#"{"geometry": {"name": "unit_cube"}, "elemnts": 4}"#);
    let o = ttiga(&["solve", "--config", s(&cfg)], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("elemnts"));
    let o = ttiga(&["solve", "--config", s(&dir.path().join("missing.json"))], None);
    assert_eq!(code(&o), 1);
    let o = ttiga(&["dump", "nothing"], None);
    assert_eq!(code(&o), 1);
}

#[test]
fn unconverged_solve_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tight.json",
        r#"{"geometry": {"name": "quarter_torus"}, "elements": 4, "eps_solve": 1e-15, "solver": {"max_sweeps": 1}}"#,
    );
    let out = dir.path().join("o");
    let o = ttiga(&["solve", "--config", s(&cfg), "--out", s(&out)], None);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(&rows(&out.join("results.csv"))[0][11], "not_converged");
}

#[test]
fn ring_ladder_gives_third_order() {
    let dir = tempfile::tempdir().unwrap();
    let ladder = write(
        dir.path(),
        "ladder.json",
        r#"{"runs": [
            {"geometry": {"name": "ring"}, "elements": 4},
            {"geometry": {"name": "ring"}, "elements": 8},
            {"geometry": {"name": "ring"}, "elements": 12},
            {"geometry": {"name": "ring"}, "elements": 16}
        ]}"#,
    );
    let out = dir.path().join("o");
    let o = ttiga(&["solve", "--config", s(&ladder), "--out", s(&out), "--jobs", "2"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.join("results.csv"));
    assert_eq!(r.len(), 4);
    let e: Vec<f64> = r.iter().map(|x| x[2].parse().unwrap()).collect();
    let err: Vec<f64> = r.iter().map(|x| x[4].parse().unwrap()).collect();
    let order = -ttiga_core::driver::loglog_slope(&e, &err);
    assert!((2.7..=3.3).contains(&order), "{order}");
}

/// Everything except the two timing columns.
fn without_timings(path: &Path, timing: &[usize]) -> Vec<Vec<String>> {
    rows(path)
        .iter()
        .map(|r| r.iter().enumerate().filter(|(i, _)| !timing.contains(i)).map(|(_, v)| v.to_string()).collect())
        .collect()
}

#[test]
fn bench_six_geometries_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<String> = ["closed_hemisphere", "opened_hemisphere", "ring", "lshape", "hyperboloid", "quarter_torus"]
        .iter()
        .map(|g| format!(r#"{{"geometry": {{"name": "{g}"}}, "elements": 8}}"#))
        .collect();
    let exp = write(dir.path(), "six.json", &format!(r#"{{"runs": [{}], "seed": 5}}"#, runs.join(",")));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = ttiga(&["bench", "--config", s(&exp), "--out", s(out)], None);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("crossover"));
    }
    let r = rows(&a.join("results.csv"));
    assert_eq!(r.len(), 6);
    assert!(r.iter().all(|x| &x[11] == "ok"));
    let c = rows(&a.join("crossover.csv"));
    assert_eq!(c.len(), 6);
    assert!(c.iter().all(|x| &x[9] == "ok" && x[7].parse::<f64>().unwrap() < 1e-6));
    assert_eq!(without_timings(&a.join("results.csv"), &[8, 9]), without_timings(&b.join("results.csv"), &[8, 9]));
    let report = |d: &Path| {
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("002_ring_p2_e8.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        v
    };
    assert_eq!(report(&a), report(&b));
    assert_eq!(report(&a)["seed"], 5);
    let o = ttiga(&["check", s(&a)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn bench_marks_oversized_reference_as_refused() {
    let dir = tempfile::tempdir().unwrap();
    let exp = write(
        dir.path(),
        "big.json",
        r#"{"runs": [
            {"geometry": {"name": "unit_cube"}, "degree": 1, "elements": 4},
            {"geometry": {"name": "unit_cube"}, "degree": 1, "elements": 100}
        ]}"#,
    );
    let out = dir.path().join("o");
    let o = ttiga(&["bench", "--config", s(&exp), "--out", s(&out)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out.join("results.csv"));
    assert_eq!(r.len(), 2);
    assert_eq!(&r[1][3], "1030301");
    assert_eq!(&r[1][11], "ok");
    let c = rows(&out.join("crossover.csv"));
    assert_eq!((&c[0][9], &c[1][9]), ("ok", "refused"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("crossover.json")).unwrap()).unwrap();
    assert_eq!(summary["largest_reference_dofs"], 125);
    assert_eq!(summary["refused"], 1);
}

#[test]
fn basis_dump_reproduces_circle_basis() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("basis.csv");
    let o = ttiga(&["dump", "basis", "--samples", "9", "--out", s(&out)], None);
    assert_eq!(code(&o), 0);
    let r = rows(&out);
    assert_eq!(r.len(), 9);
    assert_eq!(r[0].len(), 10);
    // xi = 1/8: quadratic Bernstein values weighted by (1, 1/sqrt 2, 1)
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let w = 0.5 + 0.5 * h;
    let v: Vec<f64> = r[1].iter().map(|x| x.parse().unwrap()).collect();
    assert_eq!(v[0], 0.125);
    for (got, want) in v[1..4].iter().zip([0.25 / w, 0.5 * h / w, 0.25 / w]) {
        assert!((got - want).abs() < 1e-15);
    }
    assert!(v[4..].iter().all(|x| *x == 0.0));
    let o = ttiga(&["dump", "basis", "--knots", "0,0,0.5,1,1", "--degree", "1", "--samples", "3", "--derivatives"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "xi,N0,N1,N2,dN0,dN1,dN2");
    assert_eq!(code(&ttiga(&["check", s(&out)], None)), 0);
}

#[test]
fn geometry_dump_has_positive_weights() {
    let o = ttiga(&["dump", "geometry", "ring", "--param", "r_in=0.25"], None);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let shape: Vec<usize> = v["shape"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect();
    let n: usize = shape.iter().product();
    assert_eq!(v["control_points"].as_array().unwrap().len(), n);
    let w = v["weights"].as_array().unwrap();
    assert_eq!(w.len(), n);
    assert!(w.iter().all(|x| x.as_f64().unwrap() > 0.0));
    assert_eq!(v["params"]["r_in"], 0.25);
    assert_eq!(code(&ttiga(&["dump", "geometry", "teapot"], None)), 1);
    assert_eq!(code(&ttiga(&["dump", "geometry", "ring", "--param", "r_in=2"], None)), 1);
}

#[test]
fn cached_operator_matches_report() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cfg = write(dir.path(), "torus.json", r#"{"geometry": {"name": "quarter_torus"}, "elements": 4}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&ttiga(&["solve", "--config", s(&cfg), "--out", s(&a)], Some(&cache))), 0);
    assert_eq!(code(&ttiga(&["solve", "--config", s(&cfg), "--out", s(&b)], Some(&cache))), 0);
    let report = |d: &Path| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(d.join("000_quarter_torus_p2_e4.json")).unwrap()).unwrap()
    };
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(ra["cache_hit"], false);
    assert_eq!(rb["cache_hit"], true);
    assert_eq!(ra["ranks_u"], rb["ranks_u"]);
    assert_eq!(ra["l2_error"], rb["l2_error"]);
    let k: Vec<PathBuf> = fs::read_dir(&cache)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_str().unwrap().ends_with(".K.tt"))
        .collect();
    assert_eq!(k.len(), 1);
    let o = ttiga(&["dump", "tt-info", s(&k[0])], None);
    assert_eq!(code(&o), 0);
    let info: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(info["kind"], "operator");
    assert_eq!(info["ranks"], ra["ranks_k"]);
    assert_eq!(code(&ttiga(&["check", s(&cache)], None)), 0);
    // a truncated container fails both the dump and the check
    let bytes = fs::read(&k[0]).unwrap();
    let broken = write(dir.path(), "broken.tt", "");
    fs::write(&broken, &bytes[..bytes.len() / 2]).unwrap();
    assert_eq!(code(&ttiga(&["dump", "tt-info", s(&broken)], None)), 1);
    assert_eq!(code(&ttiga(&["check", s(&broken)], None)), 1);
}

#[test]
fn check_rejects_malformed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let bad_csv = write(dir.path(), "results.csv", "geometry,p\nring,2\n");
    let bad_field = write(dir.path(), "f.field.txt", "# ttiga-field 2 2 2\n0 0 0 1\n");
    let bad_json = write(dir.path(), "r.json", r#"{"ranks_u": [1, 1, 1, 1]}"#);
    for p in [bad_csv, bad_field, bad_json] {
        assert_eq!(code(&ttiga(&["check", s(&p)], None)), 1, "{}", p.display());
    }
}
