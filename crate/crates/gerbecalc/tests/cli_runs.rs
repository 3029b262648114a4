//! Binary-level runs of the bundled scenarios: reports, exit codes, the
//! cohomology subcommand, and report-file output.

use std::path::PathBuf;
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(args: &[&str]) -> (String, String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_gerbecalc"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

#[test]
fn bundled_t2_scenario_passes() {
    let (stdout, stderr, code) = run(&["run", scenario("t2_basic.txt").to_str().unwrap()]);
    assert_eq!(code, 0, "stdout:\n{stdout}\nstderr:\n{stderr}");
    assert!(stdout.contains("SUMMARY pass=26 fail=0"), "{stdout}");
}

#[test]
fn bundled_ktheory_scenario_passes() {
    let (stdout, _, code) = run(&["run", scenario("ktheory.txt").to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("fail=0"), "{stdout}");
}

#[test]
fn defect_scenario_fails_by_design() {
    let (stdout, _, code) = run(&["run", scenario("defects.txt").to_str().unwrap()]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("SUMMARY pass=0 fail=4"), "{stdout}");
    for line in stdout.lines().filter(|l| l.starts_with("CHECK")) {
        assert!(line.contains(" FAIL "), "unexpected pass: {line}");
    }
}

#[test]
fn report_flag_writes_the_same_body() {
    let dir = std::env::temp_dir().join("gerbecalc-report-test");
    std::fs::create_dir_all(&dir).unwrap();
    let report_path = dir.join("report.txt");
    let (stdout, _, code) = run(&[
        "run",
        scenario("t2_basic.txt").to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let body = std::fs::read_to_string(&report_path).unwrap();
    assert_eq!(body, stdout);
}

#[test]
fn cohomology_subcommand_reads_complex_files() {
    let dir = std::env::temp_dir().join("gerbecalc-cohomology-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("circle.cplx");
    std::fs::write(&path, "# circle nerve\n0 1\n1 2\n0 2\n").unwrap();
    let (stdout, _, code) = run(&["cohomology", path.to_str().unwrap(), "--dim", "1"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "H^1 betti=1 torsion=");

    // the RP2 triangulation through the text loader
    let faces = "0 1 2\n0 1 3\n0 2 4\n0 3 5\n0 4 5\n1 2 5\n1 3 4\n1 4 5\n2 3 4\n2 3 5\n";
    let path = dir.join("rp2.cplx");
    std::fs::write(&path, faces).unwrap();
    let (stdout, _, code) = run(&["cohomology", path.to_str().unwrap(), "--dim", "2"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "H^2 betti=0 torsion=2");
}

#[test]
fn usage_error_exits_nonzero() {
    let (_, stderr, code) = run(&["frobnicate"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("usage"));
}

#[test]
fn grid_override_rebuilds_the_cover() {
    let dir = std::env::temp_dir().join("gerbecalc-grid-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("mini.txt");
    std::fs::write(
        &path,
        "scenario \"mini\"\nmanifold torus dim=2 grid=3 margin=0.05\nsamples count=10 seed=3\n\
         gerbe g1 = coboundary seed=5 beta=\"(sin(2*pi*x1)) dx1^dx2\"\n\
         bundle e1 on g1 = trivial rank=1\n\
         check validate_gerbe g1\ncheck cohomology builtin=nerve dim=1 betti=2\n",
    )
    .unwrap();
    let (stdout, stderr, code) = run(&[
        "run",
        path.to_str().unwrap(),
        "--grid-override",
        "4",
        "--quad-nodes",
        "8",
    ]);
    assert_eq!(code, 0, "stdout:\n{stdout}\nstderr:\n{stderr}");
    assert!(stdout.contains("SUMMARY pass=2 fail=0"), "{stdout}");
}
