//! Scenario construction and check execution.
//!
//! Declarations are resolved in order into shared objects; checks then run
//! in manifest order and produce one report line each:
//!
//!   CHECK <name> <PASS|FAIL> max_residual=<float> points=<int>
//!
//! followed by a summary. All randomness flows from the declared seeds
//! through tagged sub-seeds, so a report body is reproducible byte for byte.

use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::Arc;
use thiserror::Error;

use crate::bundle::{
    pull_back_connection, transport_bundle, transport_twist, BundleError, BundleMorphism,
    PathConnection, TwistedBundle, TwistedConnection,
};
use crate::calculus::expr::Expr;
use crate::chern;
use crate::cover::{build_torus_cover, Cover, CoverError};
use crate::deligne::{
    make_coboundary_gerbe, validate_gerbe, DeligneError, DeligneOne, GerbeConn, ScalarCoeffs,
};
use crate::ktheory::{self, EquivalenceCertificate, Generator, HexagonScenario};
use crate::nerve;
use crate::residual::ResidualReport;

use super::manifest::{
    BundleSpec, CheckDecl, ConnSpec, Decl, GerbeSpec, Manifest, PathSpec, Tolerances, TwistSpec,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Deligne(#[from] DeligneError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("object `{0}` not found")]
    NotFound(String),
    #[error("`{0}`: {1}")]
    Invalid(String, String),
}

struct BundleEntry {
    bundle: Arc<TwistedBundle>,
    standard: Option<TwistedConnection>,
}

pub struct Engine {
    pub cover: Arc<Cover>,
    pub samples: usize,
    pub seed: u64,
    pub tol: Tolerances,
    pub quad_nodes: usize,
    pub cycle_grid: usize,
    gerbes: HashMap<String, Arc<GerbeConn>>,
    twists: HashMap<String, DeligneOne>,
    bundles: HashMap<String, BundleEntry>,
    conns: HashMap<String, TwistedConnection>,
    paths: HashMap<String, PathConnection>,
    forms: HashMap<String, ScalarCoeffs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    pub points: usize,
}

impl Engine {
    pub fn build(
        m: &Manifest,
        quad_nodes: usize,
        grid_override: Option<usize>,
    ) -> Result<Engine, EngineError> {
        let grid = grid_override.unwrap_or(m.grid);
        let cover = Arc::new(build_torus_cover(m.dim, grid, m.margin)?);
        let mut engine = Engine {
            cover: cover.clone(),
            samples: m.samples,
            seed: m.seed,
            tol: m.tol,
            quad_nodes,
            cycle_grid: 24,
            gerbes: HashMap::new(),
            twists: HashMap::new(),
            bundles: HashMap::new(),
            conns: HashMap::new(),
            paths: HashMap::new(),
            forms: HashMap::new(),
        };
        for d in &m.decls {
            engine.declare(d)?;
        }
        Ok(engine)
    }

    fn gerbe(&self, id: &str) -> Result<&Arc<GerbeConn>, EngineError> {
        self.gerbes
            .get(id)
            .ok_or_else(|| EngineError::NotFound(id.into()))
    }

    fn twist(&self, id: &str) -> Result<&DeligneOne, EngineError> {
        self.twists
            .get(id)
            .ok_or_else(|| EngineError::NotFound(id.into()))
    }

    fn bundle(&self, id: &str) -> Result<&BundleEntry, EngineError> {
        self.bundles
            .get(id)
            .ok_or_else(|| EngineError::NotFound(id.into()))
    }

    fn conn(&self, id: &str) -> Result<&TwistedConnection, EngineError> {
        self.conns
            .get(id)
            .ok_or_else(|| EngineError::NotFound(id.into()))
    }

    fn path(&self, id: &str) -> Result<&PathConnection, EngineError> {
        self.paths
            .get(id)
            .ok_or_else(|| EngineError::NotFound(id.into()))
    }

    fn form(&self, id: &str) -> Result<&ScalarCoeffs, EngineError> {
        self.forms
            .get(id)
            .ok_or_else(|| EngineError::NotFound(id.into()))
    }

    fn declare(&mut self, d: &Decl) -> Result<(), EngineError> {
        match d {
            Decl::Gerbe { id, spec } => {
                let g = match spec {
                    GerbeSpec::Trivial => GerbeConn::trivial(self.cover.clone()),
                    GerbeSpec::Coboundary { seed, beta } => {
                        make_coboundary_gerbe(self.cover.clone(), *seed, &beta.coeffs).0
                    }
                };
                self.gerbes.insert(id.clone(), Arc::new(g));
            }
            Decl::Twist { id, spec } => {
                let t = match spec {
                    TwistSpec::Random { seed } => DeligneOne::random(self.cover.clone(), *seed),
                    TwistSpec::Identity => DeligneOne::identity(self.cover.clone()),
                };
                self.twists.insert(id.clone(), t);
            }
            Decl::Bundle { id, gerbe, spec } => {
                let host = self.gerbe(gerbe)?.clone();
                let entry = match spec {
                    BundleSpec::Trivial { rank } => {
                        let bundle = Arc::new(TwistedBundle::trivial(host.clone(), *rank));
                        // the zero connection; compatible when the gerbe's A
                        // vanishes, and validation reports it otherwise
                        let standard = TwistedConnection::zero(bundle.clone());
                        BundleEntry {
                            bundle,
                            standard: Some(standard),
                        }
                    }
                    BundleSpec::Line { k } => {
                        let (b, c) = TwistedBundle::line(host.clone(), *k)?;
                        let bundle = Arc::new(b);
                        let standard = TwistedConnection {
                            bundle: bundle.clone(),
                            gamma: c.gamma,
                        };
                        BundleEntry {
                            bundle,
                            standard: Some(standard),
                        }
                    }
                    BundleSpec::Sum(a, b) => {
                        let ea = self.bundle(a)?;
                        let eb = self.bundle(b)?;
                        let bundle = Arc::new(ea.bundle.direct_sum(&eb.bundle)?);
                        let standard = match (&ea.standard, &eb.standard) {
                            (Some(ca), Some(cb)) => Some(ca.direct_sum(cb, bundle.clone())?),
                            _ => None,
                        };
                        BundleEntry { bundle, standard }
                    }
                    BundleSpec::Gauge { base, seed } => {
                        let eb = self.bundle(base)?;
                        let phi = BundleMorphism::random_gauge(eb.bundle.clone(), *seed, 0.4);
                        let standard = match &eb.standard {
                            Some(c) => Some(crate::bundle::push_forward_connection(&phi, c)?),
                            None => None,
                        };
                        BundleEntry {
                            bundle: phi.to.clone(),
                            standard,
                        }
                    }
                    BundleSpec::Transport { base, twist } => {
                        let eb = self.bundle(base)?;
                        let alpha = self.twist(twist)?;
                        let bundle = Arc::new(transport_bundle(&eb.bundle, alpha, host.clone())?);
                        let standard = match &eb.standard {
                            Some(c) => {
                                let moved = transport_twist(c, alpha, host.clone())?;
                                Some(TwistedConnection {
                                    bundle: bundle.clone(),
                                    gamma: moved.gamma,
                                })
                            }
                            None => None,
                        };
                        BundleEntry { bundle, standard }
                    }
                };
                self.bundles.insert(id.clone(), entry);
            }
            Decl::Connection { id, bundle, spec } => {
                let host = self.bundle(bundle)?;
                let conn = match spec {
                    ConnSpec::Standard => host.standard.clone().ok_or_else(|| {
                        EngineError::Invalid(
                            id.clone(),
                            format!("bundle `{bundle}` has no standard connection"),
                        )
                    })?,
                    ConnSpec::Perturb { base, seed, amp } => {
                        let c = self.conn(base)?;
                        c.perturb(*seed, *amp)
                    }
                    ConnSpec::Transport { base, twist } => {
                        let c = self.conn(base)?;
                        let alpha = self.twist(twist)?;
                        let moved = transport_twist(c, alpha, host.bundle.gerbe.clone())?;
                        if !moved.bundle.same_data(&host.bundle) {
                            return Err(EngineError::Invalid(
                                id.clone(),
                                "transported connection does not live on the declared bundle"
                                    .into(),
                            ));
                        }
                        TwistedConnection {
                            bundle: host.bundle.clone(),
                            gamma: moved.gamma,
                        }
                    }
                    ConnSpec::ShiftXi { base, xi: _ } => {
                        // the curving shift changes only the gerbe's B, which
                        // the declared host bundle already carries
                        let c = self.conn(base)?;
                        if !c.bundle.same_data(&host.bundle) {
                            return Err(EngineError::Invalid(
                                id.clone(),
                                "shiftxi host bundle has different transitions".into(),
                            ));
                        }
                        TwistedConnection {
                            bundle: host.bundle.clone(),
                            gamma: c.gamma.clone(),
                        }
                    }
                };
                // rebind onto the declared bundle object
                let conn = if conn.bundle.same_data(&host.bundle) {
                    TwistedConnection {
                        bundle: host.bundle.clone(),
                        gamma: conn.gamma,
                    }
                } else {
                    conn
                };
                self.conns.insert(id.clone(), conn);
            }
            Decl::Path { id, spec } => {
                let path = match spec {
                    PathSpec::Affine(a, b) => {
                        PathConnection::affine(self.conn(a)?, self.conn(b)?, None)?
                    }
                    PathSpec::GaugePath { conn, phi_seed } => {
                        let c = self.conn(conn)?;
                        let phi =
                            BundleMorphism::random_automorphism(c.bundle.clone(), *phi_seed, 0.5);
                        let pulled = pull_back_connection(&phi, c)?;
                        PathConnection::affine(c, &pulled, None)?
                    }
                };
                self.paths.insert(id.clone(), path);
            }
            Decl::Form { id, literal, .. } => {
                self.forms.insert(id.clone(), literal.coeffs.clone());
            }
        }
        Ok(())
    }

    fn odd_family(&self, coeffs: &ScalarCoeffs) -> crate::calculus::form::MatrixForm {
        let fam: Vec<ScalarCoeffs> = vec![coeffs.clone(); self.cover.n_charts()];
        crate::deligne::family_form(self.cover.dim, 0, &fam)
    }

    /// Run one check; evaluation errors surface as FAIL with infinite
    /// residual (the message goes to stderr).
    pub fn run_check(&self, decl: &CheckDecl) -> CheckResult {
        match self.dispatch(decl) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("check `{}` (line {}): {e}", decl.name, decl.line);
                CheckResult {
                    name: decl.name.clone(),
                    pass: false,
                    residual: f64::INFINITY,
                    points: 0,
                }
            }
        }
    }

    fn result(&self, decl: &CheckDecl, report: &ResidualReport, tol: f64) -> CheckResult {
        CheckResult {
            name: decl.name.clone(),
            pass: report.max() <= tol,
            residual: report.max(),
            points: report.points(),
        }
    }

    fn arg<'a>(&self, decl: &'a CheckDecl, k: usize) -> Result<&'a str, EngineError> {
        decl.args
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| EngineError::Invalid(decl.name.clone(), format!("missing argument {k}")))
    }

    fn kv_arg(&self, decl: &CheckDecl, key: &str) -> Option<String> {
        decl.args
            .iter()
            .find_map(|t| t.strip_prefix(&format!("{key}=")).map(str::to_string))
    }

    fn dispatch(&self, decl: &CheckDecl) -> Result<CheckResult, EngineError> {
        let samples = self.samples;
        let seed = self.seed;
        let tol = &self.tol;
        match decl.name.as_str() {
            "validate_gerbe" => {
                let mut g = (**self.gerbe(self.arg(decl, 0)?)?).clone();
                match self.kv_arg(decl, "defect").as_deref() {
                    Some("b_perturb") => g = g.with_b_perturbed(0, 0.1),
                    Some("conj_lambda") => g = g.with_lambda_conjugated(),
                    _ => {}
                }
                let r = validate_gerbe(&g, samples, seed);
                Ok(self.result(decl, &r, tol.pointwise))
            }
            "validate_bundle" => {
                let e = self.bundle(self.arg(decl, 0)?)?;
                let mut bundle = (*e.bundle).clone();
                if self.kv_arg(decl, "defect").as_deref() == Some("conj_lambda") {
                    let bad = Arc::new(bundle.gerbe.with_lambda_conjugated());
                    bundle.gerbe = bad;
                }
                let r = crate::bundle::validate_bundle(&bundle, samples, seed);
                Ok(self.result(decl, &r, tol.pointwise))
            }
            "validate_connection" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let mut r = crate::bundle::validate_connection(c, samples, seed);
                r.merge(&crate::bundle::curvature_glue_report(c, samples, seed));
                Ok(self.result(decl, &r, tol.pointwise * 10.0))
            }
            "ch_closed" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let r = chern::ch_closed_check(c, samples, seed);
                Ok(self.result(decl, &r, tol.pointwise * 10.0))
            }
            "ch_glue" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let r = chern::ch_glue_check(c, samples, seed);
                Ok(self.result(decl, &r, tol.pointwise))
            }
            "ch_additive" => {
                let a = self.conn(self.arg(decl, 0)?)?;
                let b = self.conn(self.arg(decl, 1)?)?;
                let sum_bundle = Arc::new(a.bundle.direct_sum(&b.bundle)?);
                let sum = a.direct_sum(b, sum_bundle)?;
                let r = chern::ch_additive_check(a, b, &sum, samples, seed);
                Ok(self.result(decl, &r, tol.pointwise))
            }
            "ch_rescale" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let xi = self.form(self.arg(decl, 1)?)?;
                let r = chern::ch_rescale_check(c, xi, samples, seed);
                Ok(self.result(decl, &r, tol.pointwise * 10.0))
            }
            "transgression" => {
                let p = self.path(self.arg(decl, 0)?)?;
                let r = chern::transgression_check(p, self.quad_nodes, samples, seed);
                Ok(self.result(decl, &r, tol.quadrature))
            }
            "bigon" => {
                let a = self.path(self.arg(decl, 0)?)?;
                let b = self.path(self.arg(decl, 1)?)?;
                let r = chern::bigon_check(a, b, self.quad_nodes, samples, seed)
                    .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                Ok(self.result(decl, &r, tol.double_quadrature))
            }
            "cs_gauge" => {
                let p = self.path(self.arg(decl, 0)?)?;
                let phi_seed: u64 = self
                    .kv_arg(decl, "phi_seed")
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(seed ^ 0xc5);
                let phi = BundleMorphism::random_automorphism(p.bundle.clone(), phi_seed, 0.5);
                let r = chern::cs_gauge_check(p, &phi, self.quad_nodes, samples, seed)
                    .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                Ok(self.result(decl, &r, tol.pointwise * 10.0))
            }
            "odd_chern_winding" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let w: i64 = self
                    .kv_arg(decl, "w")
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(1);
                if c.bundle.rank != 1 {
                    return Err(EngineError::Invalid(
                        decl.name.clone(),
                        "winding check needs a rank-1 bundle".into(),
                    ));
                }
                let u = crate::calculus::form::ExprMat::scalar(Expr::exp(&Expr::mul(
                    &Expr::mul(
                        &Expr::mul(&Expr::real(2.0 * w as f64), &Arc::new(Expr::Pi)),
                        &Arc::new(Expr::ImUnit),
                    ),
                    &Expr::coord(0),
                )));
                let phi = BundleMorphism::global_automorphism(c.bundle.clone(), u);
                let ch_odd = chern::odd_chern(c, &phi, self.quad_nodes)
                    .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                let base = vec![0.3; self.cover.dim];
                let integral =
                    chern::integrate_cycle(&self.cover, &ch_odd, &[0], &base, self.cycle_grid)
                        .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                let winding = -(integral / Complex64::new(0.0, 2.0 * std::f64::consts::PI));
                let mut r = ResidualReport::new();
                r.record(
                    "winding",
                    (winding - Complex64::new(w as f64, 0.0)).norm(),
                    self.cycle_grid,
                );
                Ok(self.result(decl, &r, tol.quadrature))
            }
            "stokes_fiber" => {
                let deg: usize = self
                    .kv_arg(decl, "deg")
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(2);
                let s: u64 = self
                    .kv_arg(decl, "seed")
                    .and_then(|s| s.parse().ok())
                    .unwrap_or(seed);
                let r = chern::stokes_fiber_check(self.cover.dim, deg, s, self.quad_nodes, samples);
                Ok(self.result(decl, &r, tol.quadrature))
            }
            "hexagon" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let theta1 = self.odd_family(self.form(self.arg(decl, 1)?)?);
                let theta2 = self.odd_family(self.form(self.arg(decl, 2)?)?);
                let scenario = HexagonScenario {
                    conn: c.clone(),
                    theta1,
                    theta2,
                    perturb_seed: seed ^ 0x4e,
                    quad_nodes: self.quad_nodes,
                    inject_defect: decl.args.iter().any(|a| a == "defect"),
                };
                let r = ktheory::hexagon_suite(&scenario, samples, seed)
                    .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                Ok(self.result(decl, &r, tol.quadrature))
            }
            "certificate" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let gerbe = c.bundle.gerbe.clone();
                let cover = gerbe.cover.clone();
                let defect = decl.args.iter().any(|a| a == "defect");
                // gauge-certificate scenario: omega' = omega - cs(affine)
                let omega =
                    crate::calculus::form::MatrixForm::zero(cover.dim, 0, 1, cover.n_charts());
                let g1 = Generator::new(c.clone(), omega.clone());
                let c2 = c.perturb(seed ^ 0x77, 0.4);
                let cs = chern::cs_form(&PathConnection::affine(c, &c2, None)?, self.quad_nodes);
                let mut omega2 = omega.sub(&cs).unwrap();
                if defect {
                    let mut d = ScalarCoeffs::new();
                    d.insert(vec![0], Expr::real(0.05));
                    omega2 = omega2.add(&self.odd_family(&d)).unwrap();
                }
                let g2 = Generator::new(c2, omega2);
                let cert = EquivalenceCertificate {
                    stab: TwistedConnection::zero(Arc::new(TwistedBundle::zero(gerbe))),
                    iso: BundleMorphism::identity(Arc::new((**g1.bundle()).clone())),
                    reparam: None,
                    mu: crate::calculus::form::MatrixForm::zero(cover.dim, 0, 1, cover.n_charts()),
                };
                let r =
                    ktheory::verify_certificate(&g1, &g2, &cert, self.quad_nodes, samples, seed)
                        .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                Ok(self.result(decl, &r, tol.double_quadrature))
            }
            "dd_class" => {
                let g = self.gerbe(self.arg(decl, 0)?)?;
                let expect = self.kv_arg(decl, "expect").unwrap_or_else(|| "1".into());
                let order = nerve::dd_torsion_order(g)
                    .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                let got = match order {
                    None => "inf".to_string(),
                    Some(n) => n.to_string(),
                };
                let mut r = ResidualReport::new();
                r.record("dd_class", if got == expect { 0.0 } else { 1.0 }, 1);
                Ok(self.result(decl, &r, tol.pointwise))
            }
            "cohomology" => {
                let builtin = self
                    .kv_arg(decl, "builtin")
                    .unwrap_or_else(|| "nerve".into());
                let q: usize = self
                    .kv_arg(decl, "dim")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| {
                        EngineError::Invalid(decl.name.clone(), "missing dim=".into())
                    })?;
                let betti: usize = self
                    .kv_arg(decl, "betti")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| {
                        EngineError::Invalid(decl.name.clone(), "missing betti=".into())
                    })?;
                let torsion_expect = self.kv_arg(decl, "torsion").unwrap_or_default();
                let complex = match builtin.as_str() {
                    "circle" => nerve::AbstractComplex::circle(),
                    "rp2" => nerve::AbstractComplex::rp2(),
                    "nerve" => nerve::AbstractComplex::from_cover(&self.cover),
                    other => {
                        return Err(EngineError::Invalid(
                            decl.name.clone(),
                            format!("unknown builtin `{other}`"),
                        ))
                    }
                };
                let (b, t) = nerve::cohomology(&complex, q)
                    .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                let t_str = t
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                let ok = b == betti && t_str == torsion_expect;
                let mut r = ResidualReport::new();
                r.record("cohomology", if ok { 0.0 } else { 1.0 }, 1);
                Ok(self.result(decl, &r, tol.pointwise))
            }
            "chern_number" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let expect: f64 = self
                    .kv_arg(decl, "expect")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| {
                        EngineError::Invalid(decl.name.clone(), "missing expect=".into())
                    })?;
                let c1 = chern::chern_number(c, self.cycle_grid)
                    .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                let mut r = ResidualReport::new();
                r.record(
                    "chern_number",
                    (c1 - Complex64::new(expect, 0.0)).norm(),
                    self.cycle_grid * self.cycle_grid,
                );
                Ok(self.result(decl, &r, tol.pointwise))
            }
            "twist_compat" => {
                let c = self.conn(self.arg(decl, 0)?)?;
                let theta = self.odd_family(self.form(self.arg(decl, 1)?)?);
                let alpha = self.twist(self.arg(decl, 2)?)?;
                let xi = self.form(self.arg(decl, 3)?)?;
                let r = ktheory::twist_compat_suite(c, &theta, alpha, xi, samples, seed)
                    .map_err(|e| EngineError::Invalid(decl.name.clone(), e.to_string()))?;
                Ok(self.result(decl, &r, tol.pointwise * 10.0))
            }
            other => Err(EngineError::Invalid(
                other.to_string(),
                "unknown check name".into(),
            )),
        }
    }
}
