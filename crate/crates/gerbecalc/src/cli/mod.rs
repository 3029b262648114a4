//! Command-line front end:
//!
//! ```text
//! gerbecalc run <manifest> [--quad-nodes N] [--grid-override N] [--report <path>]
//! gerbecalc cohomology <complex-file> --dim q
//! ```
//!
//! `run` executes the checks of a scenario manifest in order and prints one
//! `CHECK <name> <PASS|FAIL> max_residual=<float> points=<int>` line per
//! check plus a `SUMMARY pass=<n> fail=<m>` line; the exit status is 0 iff
//! every check passed.

pub mod engine;
pub mod manifest;

use engine::{CheckResult, Engine};
use manifest::parse_manifest;

/// Render report lines; residuals use 17 significant digits so reports are
/// grep- and diff-stable.
pub fn render_report(results: &[CheckResult]) -> String {
    let mut out = String::new();
    let mut pass = 0usize;
    let mut fail = 0usize;
    for r in results {
        if r.pass {
            pass += 1;
        } else {
            fail += 1;
        }
        out.push_str(&format!(
            "CHECK {} {} max_residual={:.16e} points={}\n",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.residual,
            r.points
        ));
    }
    out.push_str(&format!("SUMMARY pass={pass} fail={fail}\n"));
    out
}

/// Parse and run a manifest; returns the report body and whether everything
/// passed.
pub fn run_manifest(
    text: &str,
    quad_nodes: usize,
    grid_override: Option<usize>,
) -> Result<(String, bool), String> {
    let m = parse_manifest(text).map_err(|e| e.to_string())?;
    let engine = Engine::build(&m, quad_nodes, grid_override).map_err(|e| e.to_string())?;
    let results: Vec<CheckResult> = m.checks.iter().map(|c| engine.run_check(c)).collect();
    let all_pass = results.iter().all(|r| r.pass);
    Ok((render_report(&results), all_pass))
}

fn usage() -> i32 {
    eprintln!(
        "usage: gerbecalc run <manifest> [--quad-nodes N] [--grid-override N] [--report <path>]"
    );
    eprintln!("       gerbecalc cohomology <complex-file> --dim <q>");
    2
}

pub fn main() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("cohomology") => cmd_cohomology(&args[1..]),
        _ => usage(),
    }
}

fn flag_value(args: &[String], name: &str) -> Option<String> {
    args.iter()
        .position(|a| a == name)
        .and_then(|p| args.get(p + 1))
        .cloned()
}

fn cmd_run(args: &[String]) -> i32 {
    let path = match args.first() {
        Some(p) if !p.starts_with("--") => p.clone(),
        _ => return usage(),
    };
    let quad_nodes: usize = flag_value(args, "--quad-nodes")
        .and_then(|v| v.parse().ok())
        .unwrap_or(16);
    let grid_override: Option<usize> =
        flag_value(args, "--grid-override").and_then(|v| v.parse().ok());
    let report_path = flag_value(args, "--report");

    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read `{path}`: {e}");
            return 2;
        }
    };
    let started = std::time::Instant::now();
    match run_manifest(&text, quad_nodes, grid_override) {
        Ok((report, all_pass)) => {
            print!("{report}");
            // wall time stays out of the report body so reports diff cleanly
            eprintln!("wall_time={:.3}s", started.elapsed().as_secs_f64());
            if let Some(rp) = report_path {
                if let Err(e) = std::fs::write(&rp, &report) {
                    eprintln!("cannot write report `{rp}`: {e}");
                    return 2;
                }
            }
            if all_pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}

fn cmd_cohomology(args: &[String]) -> i32 {
    let path = match args.first() {
        Some(p) if !p.starts_with("--") => p.clone(),
        _ => return usage(),
    };
    let q: usize = match flag_value(args, "--dim").and_then(|v| v.parse().ok()) {
        Some(q) => q,
        None => return usage(),
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read `{path}`: {e}");
            return 2;
        }
    };
    let complex = match crate::nerve::AbstractComplex::from_text(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    match crate::nerve::cohomology(&complex, q) {
        Ok((betti, torsion)) => {
            let t = torsion
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            println!("H^{q} betti={betti} torsion={t}");
            0
        }
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scenario "minimal"
manifold torus dim=2 grid=3 margin=0.05
samples count=20 seed=5
gerbe g0 = trivial
check validate_gerbe g0
"#;

    #[test]
    fn minimal_manifest_runs_and_passes() {
        let (report, ok) = run_manifest(MINIMAL, 8, None).unwrap();
        assert!(ok, "{report}");
        assert!(report.contains("CHECK validate_gerbe PASS"));
        assert!(report.contains("SUMMARY pass=1 fail=0"));
    }

    #[test]
    fn empty_check_list_gives_empty_pass_report() {
        let text = "scenario \"empty\"\nmanifold torus dim=2 grid=3 margin=0.05\n";
        let (report, ok) = run_manifest(text, 8, None).unwrap();
        assert!(ok);
        assert_eq!(report, "SUMMARY pass=0 fail=0\n");
    }

    #[test]
    fn unknown_check_is_rejected_at_parse_time() {
        let text = format!("{MINIMAL}check not_a_check g0\n");
        let err = run_manifest(&text, 8, None).unwrap_err();
        assert!(err.contains("not_a_check"), "{err}");
    }

    #[test]
    fn reports_are_deterministic() {
        let full = r#"
scenario "determinism"
manifold torus dim=2 grid=3 margin=0.05
samples count=25 seed=11
gerbe g0 = trivial
gerbe g1 = coboundary seed=4 beta="(sin(2*pi*x1)) dx1^dx2"
bundle e1 on g0 = line k=1
connection c1 on e1 = standard
connection c2 on e1 = perturb c1 seed=6 amp=0.4
path p1 = affine c1 c2
check validate_gerbe g1
check validate_connection c2
check transgression p1
check chern_number c1 expect=1
"#;
        let (r1, ok1) = run_manifest(full, 12, None).unwrap();
        let (r2, ok2) = run_manifest(full, 12, None).unwrap();
        assert!(ok1 && ok2, "{r1}");
        assert_eq!(r1, r2, "report body must be byte-identical");
    }

    #[test]
    fn defect_scenarios_fail_as_designed() {
        let text = format!("{MINIMAL}check validate_gerbe g0 defect=b_perturb\n");
        let (report, ok) = run_manifest(&text, 8, None).unwrap();
        assert!(!ok);
        assert!(report.contains("SUMMARY pass=1 fail=1"), "{report}");
    }
}
