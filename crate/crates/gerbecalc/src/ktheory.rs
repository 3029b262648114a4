//! Generators (E, Gamma, omega) of the even twisted differential K-group at
//! the cocycle level, formal differences, the maps I, R, a, twist-change
//! isomorphisms, refinement restriction, certificate-based equivalence
//! checking, and the hexagon identity suites.
//!
//! Group elements are never quotiented: equivalence of generators is only
//! ever certified by an explicit witness (stabilizer, isomorphism, path of
//! connections, and a primitive mu realizing the "mod exact" part), matching
//! how the underlying proofs produce their equalities.

use std::sync::Arc;
use thiserror::Error;

use crate::bundle::{
    pull_back_connection, transport_twist, BundleError, BundleMorphism, PathConnection,
    TwistedBundle, TwistedConnection,
};
use crate::calculus::expr::{Expr, ExprRef};
use crate::calculus::form::MatrixForm;
use crate::chern::{bigon_primitive_form, ch_total, cs_form, twisted_d, ChernError};
use crate::cover::Refinement;
use crate::deligne::{
    apply_twist_morphism, family_form, scalar_neg, DeligneError, DeligneOne, GerbeConn,
    ScalarCoeffs,
};
use crate::residual::ResidualReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KError {
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Chern(#[from] ChernError),
    #[error(transparent)]
    Deligne(#[from] DeligneError),
    #[error("generators live over different gerbes")]
    GerbeMismatch,
    #[error("certificate shape mismatch: {0}")]
    Shape(String),
}

/// A K-group generator: twisted bundle, compatible connection, and an odd
/// form (the representative of the Omega^odd / Im(d+H) datum).
#[derive(Debug, Clone)]
pub struct Generator {
    pub conn: TwistedConnection,
    pub omega: MatrixForm,
}

impl Generator {
    pub fn new(conn: TwistedConnection, omega: MatrixForm) -> Generator {
        Generator { conn, omega }
    }

    pub fn bundle(&self) -> &Arc<TwistedBundle> {
        &self.conn.bundle
    }

    pub fn gerbe(&self) -> &Arc<GerbeConn> {
        &self.conn.bundle.gerbe
    }

    /// The zero generator (O, 0, 0) over a gerbe.
    pub fn zero(gerbe: Arc<GerbeConn>) -> Generator {
        let cover = gerbe.cover.clone();
        let bundle = Arc::new(TwistedBundle::zero(gerbe));
        let conn = TwistedConnection::zero(bundle);
        let omega = MatrixForm::zero(cover.dim, 0, 1, cover.n_charts());
        Generator { conn, omega }
    }

    /// Direct sum of generators: bundles and connections block-sum, omegas add.
    pub fn direct_sum(&self, other: &Generator) -> Result<Generator, KError> {
        let sum_bundle = Arc::new(self.bundle().direct_sum(other.bundle())?);
        let conn = self.conn.direct_sum(&other.conn, sum_bundle)?;
        let omega = self
            .omega
            .add(&other.omega)
            .map_err(|e| KError::Chern(ChernError::Form(e)))?;
        Ok(Generator { conn, omega })
    }
}

/// A formal difference of generators over one differential twist.
#[derive(Debug, Clone)]
pub struct FormalDifference {
    pub plus: Generator,
    pub minus: Generator,
}

impl FormalDifference {
    pub fn new(plus: Generator, minus: Generator) -> Result<FormalDifference, KError> {
        if !Arc::ptr_eq(plus.gerbe(), minus.gerbe()) {
            return Err(KError::GerbeMismatch);
        }
        Ok(FormalDifference { plus, minus })
    }

    pub fn gerbe(&self) -> &Arc<GerbeConn> {
        self.plus.gerbe()
    }
}

// ---------------------------------------------------------------------------
// the structure maps
// ---------------------------------------------------------------------------

/// I: forget connections and odd forms, keeping the underlying bundles.
pub fn map_i(x: &FormalDifference) -> (Arc<TwistedBundle>, Arc<TwistedBundle>) {
    (x.plus.bundle().clone(), x.minus.bundle().clone())
}

/// R: the curvature-type map
/// ch(Gamma^E) + (d+H) omega - ch(Gamma^F) - (d+H) eta.
pub fn map_r(x: &FormalDifference) -> MatrixForm {
    let gerbe = x.gerbe();
    let plus = ch_total(&x.plus.conn, 0)
        .add(&twisted_d(&x.plus.omega, gerbe))
        .unwrap();
    let minus = ch_total(&x.minus.conn, 0)
        .add(&twisted_d(&x.minus.omega, gerbe))
        .unwrap();
    plus.sub(&minus).unwrap()
}

/// a: theta -> (O, 0, theta), as the formal difference against the zero
/// generator.
pub fn map_a(gerbe: Arc<GerbeConn>, theta: MatrixForm) -> FormalDifference {
    let mut plus = Generator::zero(gerbe.clone());
    plus.omega = theta;
    FormalDifference {
        plus,
        minus: Generator::zero(gerbe),
    }
}

// ---------------------------------------------------------------------------
// certificates
// ---------------------------------------------------------------------------

/// Witness for the CS-equivalence of two generators g1 = (E, Gamma, omega),
/// g2 = (E', Gamma', omega'):
///
///   cs(path from Gamma + Gamma^F to phi^*(Gamma' + Gamma^F))
///     = (omega - omega') + (d + H) mu
///
/// with stabilizer (F, Gamma^F), isomorphism phi: E + F -> E' + F, a path
/// reparametrization choice, and the explicit even primitive mu.
#[derive(Debug, Clone)]
pub struct EquivalenceCertificate {
    pub stab: TwistedConnection,
    pub iso: BundleMorphism,
    /// None = affine path in t; Some(tau) rescales time by tau(t).
    pub reparam: Option<ExprRef>,
    pub mu: MatrixForm,
}

impl EquivalenceCertificate {
    /// Reflexivity certificate: zero stabilizer, identity isomorphism, mu = 0.
    pub fn reflexive(g: &Generator) -> EquivalenceCertificate {
        let gerbe = g.gerbe().clone();
        let cover = gerbe.cover.clone();
        let stab = TwistedConnection::zero(Arc::new(TwistedBundle::zero(gerbe)));
        EquivalenceCertificate {
            stab,
            iso: BundleMorphism::identity(Arc::new((**g.bundle()).clone())),
            reparam: None,
            mu: MatrixForm::zero(cover.dim, 0, 1, cover.n_charts()),
        }
    }
}

/// Evaluate the certificate: the reported residual is the max over sample
/// points of |cs(path) - (omega1 - omega2) - (d+H) mu|.
pub fn verify_certificate(
    g1: &Generator,
    g2: &Generator,
    cert: &EquivalenceCertificate,
    quad_nodes: usize,
    samples: usize,
    seed: u64,
) -> Result<ResidualReport, KError> {
    if !Arc::ptr_eq(g1.gerbe(), g2.gerbe()) {
        return Err(KError::GerbeMismatch);
    }
    let gerbe = g1.gerbe().clone();
    let cover = gerbe.cover.clone();

    // stabilized connections
    let e1f = Arc::new(g1.bundle().direct_sum(&cert.stab.bundle)?);
    let start = g1.conn.direct_sum(&cert.stab, e1f.clone())?;
    let e2f = Arc::new(g2.bundle().direct_sum(&cert.stab.bundle)?);
    let target = g2.conn.direct_sum(&cert.stab, e2f.clone())?;

    if !cert.iso.from.same_data(&e1f) || !cert.iso.to.same_data(&e2f) {
        return Err(KError::Shape(
            "certificate isomorphism does not connect the stabilized bundles".into(),
        ));
    }
    // phi^* (Gamma2 + GammaF), transplanted onto E1 + F
    let mut pulled = pull_back_connection(
        &cert.iso,
        &TwistedConnection {
            bundle: cert.iso.to.clone(),
            gamma: target.gamma.clone(),
        },
    )?;
    pulled.bundle = e1f.clone();
    let start = TwistedConnection {
        bundle: e1f,
        gamma: start.gamma,
    };
    let path = PathConnection::affine(&start, &pulled, cert.reparam.clone())?;

    let cs = cs_form(&path, quad_nodes);
    let omega_diff = g1.omega.sub(&g2.omega).unwrap();
    let resid = cs
        .sub(&omega_diff)
        .unwrap()
        .sub(&twisted_d(&cert.mu, &gerbe))
        .unwrap();

    let mut report = ResidualReport::new();
    let stride = (cover.n_charts() / 9).max(1);
    let mut max = 0.0f64;
    let mut count = 0usize;
    for (chart, s) in cover.simplices(0).iter().enumerate().step_by(stride) {
        for pt in cover.sample_points(s, samples, seed) {
            max = max.max(
                resid
                    .eval(chart, pt.coords_of(s.anchor()), 0)
                    .map_err(ChernError::Form)?
                    .max_abs(),
            );
            count += 1;
        }
    }
    report.record("certificate", max, count);
    Ok(report)
}

// ---------------------------------------------------------------------------
// twist-change isomorphisms and refinement
// ---------------------------------------------------------------------------

/// phi_alpha: transport both generators along a twist morphism; omega is
/// unchanged.
pub fn twist_iso_phi(x: &FormalDifference, alpha: &DeligneOne) -> Result<FormalDifference, KError> {
    let target = Arc::new(apply_twist_morphism(x.gerbe(), alpha)?);
    let plus = Generator {
        conn: transport_twist(&x.plus.conn, alpha, target.clone())?,
        omega: x.plus.omega.clone(),
    };
    let minus = Generator {
        conn: transport_twist(&x.minus.conn, alpha, target)?,
        omega: x.minus.omega.clone(),
    };
    Ok(FormalDifference { plus, minus })
}

/// Xi: retag to the xi-shifted gerbe and rescale omega by exp(-xi).
pub fn twist_iso_xi(x: &FormalDifference, xi: &ScalarCoeffs) -> Result<FormalDifference, KError> {
    let cover = x.gerbe().cover.clone();
    let xi_family: Vec<ScalarCoeffs> = vec![scalar_neg(xi); cover.n_charts()];
    let exp_neg_xi = family_form(cover.dim, 0, &xi_family)
        .exp_even(cover.dim)
        .map_err(ChernError::Form)?;
    let conn_plus = crate::bundle::retag_shift_xi(&x.plus.conn, xi);
    // both generators must reference one gerbe object
    let shared = conn_plus.bundle.gerbe.clone();
    let mut conn_minus = crate::bundle::retag_shift_xi(&x.minus.conn, xi);
    {
        let b = Arc::make_mut(&mut conn_minus.bundle);
        b.gerbe = shared;
    }
    let plus = Generator {
        omega: x.plus.omega.wedge(&exp_neg_xi).map_err(ChernError::Form)?,
        conn: conn_plus,
    };
    let minus = Generator {
        omega: x.minus.omega.wedge(&exp_neg_xi).map_err(ChernError::Form)?,
        conn: conn_minus,
    };
    Ok(FormalDifference { plus, minus })
}

/// Restriction of a formal difference along a refinement.
pub fn refine_difference(
    x: &FormalDifference,
    fine_gerbe: Arc<GerbeConn>,
    refinement: &Refinement,
) -> Result<FormalDifference, KError> {
    let restrict_gen = |g: &Generator| -> Result<Generator, KError> {
        let fine_bundle = Arc::new(crate::bundle::restrict_bundle(
            g.bundle(),
            fine_gerbe.clone(),
            refinement,
        )?);
        let conn = crate::bundle::restrict_connection(&g.conn, fine_bundle, refinement);
        let map: Vec<usize> = refinement.tau.iter().map(|&t| t as usize).collect();
        let omega = g.omega.reindex_charts(map);
        Ok(Generator { conn, omega })
    };
    Ok(FormalDifference {
        plus: restrict_gen(&x.plus)?,
        minus: restrict_gen(&x.minus)?,
    })
}

// ---------------------------------------------------------------------------
// identity suites
// ---------------------------------------------------------------------------

/// Max over sampled charts; covers at most ~nine charts (every chart on the
/// 2-torus, a strided subset on the 3-torus) to keep quadrature-heavy checks
/// at desk scale.
fn family_max(
    cover: &crate::cover::Cover,
    form: &MatrixForm,
    samples: usize,
    seed: u64,
) -> (f64, usize) {
    let stride = (cover.n_charts() / 9).max(1);
    let mut max = 0.0f64;
    let mut count = 0usize;
    for (chart, s) in cover.simplices(0).iter().enumerate().step_by(stride) {
        for pt in cover.sample_points(s, samples, seed) {
            max = max.max(
                form.eval(chart, pt.coords_of(s.anchor()), 0)
                    .unwrap()
                    .max_abs(),
            );
            count += 1;
        }
    }
    (max, count)
}

/// (d + H) R(x) = 0: R lands in twisted-closed even forms.
pub fn r_closed_check(x: &FormalDifference, samples: usize, seed: u64) -> ResidualReport {
    let gerbe = x.gerbe();
    let closed = twisted_d(&map_r(x), gerbe);
    let (max, count) = family_max(&gerbe.cover, &closed, samples, seed);
    let mut report = ResidualReport::new();
    report.record("dH_R", max, count);
    report
}

/// The five compatibility identities between I, R, a and the twist-change
/// maps phi_alpha and Xi.
pub fn twist_compat_suite(
    conn: &TwistedConnection,
    theta: &MatrixForm,
    alpha: &DeligneOne,
    xi: &ScalarCoeffs,
    samples: usize,
    seed: u64,
) -> Result<ResidualReport, KError> {
    let gerbe = conn.bundle.gerbe.clone();
    let cover = gerbe.cover.clone();
    let mut report = ResidualReport::new();

    let gen = Generator::new(conn.clone(), theta.clone());
    let x = FormalDifference::new(gen, Generator::zero(gerbe.clone()))?;

    // (1) I . Xi = I: the underlying bundles are untouched by Xi.
    let xd = twist_iso_xi(&x, xi)?;
    let same = map_i(&xd).0.same_data(&map_i(&x).0) && map_i(&xd).1.same_data(&map_i(&x).1);
    report.record("I_after_Xi", if same { 0.0 } else { 1.0 }, 1);

    // (2) R . Xi = exp(-xi) ^ R.
    let xi_family: Vec<ScalarCoeffs> = vec![scalar_neg(xi); cover.n_charts()];
    let exp_neg_xi = family_form(cover.dim, 0, &xi_family)
        .exp_even(cover.dim)
        .map_err(ChernError::Form)?;
    let lhs = map_r(&xd);
    let rhs = exp_neg_xi.wedge(&map_r(&x)).map_err(ChernError::Form)?;
    let resid = lhs.sub(&rhs).unwrap();
    let (max, count) = family_max(&cover, &resid, samples, seed);
    report.record("R_after_Xi", max, count);

    // (3) Xi . a = a . (wedge exp(-xi)).
    let a_theta = map_a(gerbe.clone(), theta.clone());
    let lhs = twist_iso_xi(&a_theta, xi)?;
    let rhs_omega = theta.wedge(&exp_neg_xi).map_err(ChernError::Form)?;
    let resid = lhs.plus.omega.sub(&rhs_omega).unwrap();
    let (max, count) = family_max(&cover, &resid, samples, seed);
    let ranks_ok = lhs.plus.bundle().rank == 0 && lhs.minus.bundle().rank == 0;
    report.record("Xi_after_a", if ranks_ok { max } else { 1.0 }, count);

    // (4) I . phi_alpha = Phi_alpha . I: transported bundles agree exactly.
    let pd = twist_iso_phi(&x, alpha)?;
    let target = pd.plus.gerbe().clone();
    let direct = transport_twist(conn, alpha, target)?;
    let same = map_i(&pd).0.same_data(&direct.bundle);
    report.record("I_after_phi", if same { 0.0 } else { 1.0 }, 1);

    // (5) R . phi_alpha = R.
    let resid = map_r(&pd).sub(&map_r(&x)).unwrap();
    let (max, count) = family_max(&cover, &resid, samples, seed);
    report.record("R_after_phi", max, count);

    Ok(report)
}

/// Scenario data for the hexagon identity suite.
pub struct HexagonScenario {
    pub conn: TwistedConnection,
    /// odd form omega of the plus generator
    pub theta1: MatrixForm,
    /// odd form eta of the minus generator
    pub theta2: MatrixForm,
    pub perturb_seed: u64,
    pub quad_nodes: usize,
    /// when set, omega is perturbed without updating the certificate: the
    /// kernel replay must then FAIL
    pub inject_defect: bool,
}

/// The hexagon checks at representative level:
///   (i)  ch(Gamma^E) - ch(Gamma^F) - R(x) = -(d+H)(omega - eta)
///   (ii) R(a(theta)) = (d+H) theta
///   (iii) a kernel element of I rewrites as a(omega - mu), replayed as a
///         certificate with the bigon primitive as its mu.
pub fn hexagon_suite(
    scenario: &HexagonScenario,
    samples: usize,
    seed: u64,
) -> Result<ResidualReport, KError> {
    let conn = &scenario.conn;
    let gerbe = conn.bundle.gerbe.clone();
    let cover = gerbe.cover.clone();
    let mut report = ResidualReport::new();

    let conn2 = conn.perturb(scenario.perturb_seed, 0.5);
    let g_plus = Generator::new(conn.clone(), scenario.theta1.clone());
    let g_minus = Generator::new(conn2.clone(), scenario.theta2.clone());
    let x = FormalDifference::new(g_plus.clone(), g_minus.clone())?;

    // (i) triangle ch . I = Pr . R at form level
    let lhs = ch_total(conn, 0).sub(&ch_total(&conn2, 0)).unwrap();
    let omega_diff = scenario.theta1.sub(&scenario.theta2).unwrap();
    let rhs = map_r(&x).sub(&twisted_d(&omega_diff, &gerbe)).unwrap();
    let resid = lhs.sub(&rhs).unwrap();
    let (max, count) = family_max(&cover, &resid, samples, seed);
    report.record("triangle_chI_PrR", max, count);

    // (ii) R . a = d + H
    let a_theta = map_a(gerbe.clone(), scenario.theta1.clone());
    let resid = map_r(&a_theta)
        .sub(&twisted_d(&scenario.theta1, &gerbe))
        .unwrap();
    let (max, count) = family_max(&cover, &resid, samples, seed);
    report.record("R_after_a", max, count);

    // Im a is in ker I structurally
    let (ip, im) = map_i(&a_theta);
    report.record(
        "a_lands_in_ker_I",
        if ip.rank == 0 && im.rank == 0 {
            0.0
        } else {
            1.0
        },
        1,
    );

    // (iii) kernel replay: x has I(x) = 0 via the identity isomorphism;
    // mu = eta + CS(Gamma, Gamma') rewrites x as a(omega - mu). The replayed
    // certificate equates (E, Gamma, omega) with (E, Gamma', omega - mu + eta)
    // along a cosine-reparametrized path whose cs differs from the affine one
    // by (d+H) of the bigon primitive.
    let affine = PathConnection::affine(conn, &conn2, None)?;
    let cs_affine = cs_form(&affine, scenario.quad_nodes);
    let mut omega1 = scenario.theta1.clone();
    if scenario.inject_defect {
        let mut defect = ScalarCoeffs::new();
        defect.insert(vec![0], Expr::real(0.05));
        let fam: Vec<ScalarCoeffs> = vec![defect; cover.n_charts()];
        omega1 = omega1.add(&family_form(cover.dim, 0, &fam)).unwrap();
    }
    // omega_right = omega - mu + eta = omega - cs(affine)
    let omega_right = omega1.sub(&cs_affine).unwrap();
    let g_left = Generator::new(conn.clone(), scenario.theta1.clone());
    let g_right = Generator::new(conn2.clone(), omega_right);

    let tau = Expr::mul(
        &Expr::real(0.5),
        &Expr::sub(
            &Expr::one(),
            &Expr::cos(&Expr::mul(&Arc::new(Expr::Pi), &Expr::param(0))),
        ),
    );
    let reparam_path = PathConnection::affine(conn, &conn2, Some(tau.clone()))?;
    // the bigon integrand is analytic: half the nodes already overshoot the
    // certificate tolerance
    let mu_nodes = (scenario.quad_nodes / 2).max(6);
    let mu = bigon_primitive_form(&affine, &reparam_path, mu_nodes)?;
    let cert = EquivalenceCertificate {
        stab: TwistedConnection::zero(Arc::new(TwistedBundle::zero(gerbe.clone()))),
        iso: BundleMorphism::identity(Arc::new((**g_left.bundle()).clone())),
        reparam: Some(tau),
        mu,
    };
    let replay = verify_certificate(&g_left, &g_right, &cert, scenario.quad_nodes, samples, seed)?;
    report.record("kernel_replay", replay.max(), replay.points());

    Ok(report)
}

/// Chained certificates compose: given g1 ~ g2 and g2 ~ g3 along affine
/// paths with primitives mu1, mu2, the composite needs the extra
/// cross-primitive from concatenating paths versus the direct affine path.
pub fn certificate_chain_check(
    conn: &TwistedConnection,
    quad_nodes: usize,
    samples: usize,
    seed: u64,
) -> Result<ResidualReport, KError> {
    let gerbe = conn.bundle.gerbe.clone();
    let cover = gerbe.cover.clone();
    let zero_omega = MatrixForm::zero(cover.dim, 0, 1, cover.n_charts());

    let c1 = conn.clone();
    let c2 = conn.perturb(seed ^ 0x51, 0.4);
    let c3 = conn.perturb(seed ^ 0x52, 0.4);

    // omega_k chosen so each consecutive pair is certificate-equivalent with
    // mu = 0 along affine paths
    let g1 = Generator::new(c1.clone(), zero_omega.clone());
    let cs12 = cs_form(&PathConnection::affine(&c1, &c2, None)?, quad_nodes);
    let g2 = Generator::new(c2.clone(), zero_omega.sub(&cs12).unwrap());
    let cs23 = cs_form(&PathConnection::affine(&c2, &c3, None)?, quad_nodes);
    let g3 = Generator::new(c3.clone(), g2.omega.sub(&cs23).unwrap());

    // direct certificate g1 ~ g3: the affine path c1 -> c3 differs from the
    // concatenation; its cs equals cs12 + cs23 only up to (d+H) of a
    // primitive. Realize the concatenation as a path and take the bigon.
    let direct = PathConnection::affine(&c1, &c3, None)?;
    // concatenated path via a smooth time split: first half c1 -> c2, second
    // half c2 -> c3, using a smoothstep to keep t-derivatives clean at the
    // joint. Build it from expressions directly.
    let concat = concatenate_paths(&c1, &c2, &c3)?;
    let mu = bigon_primitive_form(&concat, &direct, quad_nodes)?;

    // residual of: cs(direct) - (omega1 - omega3) - (d+H) mu
    let cert = EquivalenceCertificate {
        stab: TwistedConnection::zero(Arc::new(TwistedBundle::zero(gerbe.clone()))),
        iso: BundleMorphism::identity(Arc::new((**g1.bundle()).clone())),
        reparam: None,
        mu,
    };
    let mut report = verify_certificate(&g1, &g3, &cert, quad_nodes, samples, seed)?;
    // and the two-step certificates hold with mu = 0
    let cert12 = EquivalenceCertificate {
        stab: TwistedConnection::zero(Arc::new(TwistedBundle::zero(gerbe.clone()))),
        iso: BundleMorphism::identity(Arc::new((**g1.bundle()).clone())),
        reparam: None,
        mu: MatrixForm::zero(cover.dim, 0, 1, cover.n_charts()),
    };
    let r12 = verify_certificate(&g1, &g2, &cert12, quad_nodes, samples, seed)?;
    report.record("chain_step_12", r12.max(), r12.points());
    Ok(report)
}

/// A smooth concatenation of the two affine legs c1 -> c2 -> c3 as a single
/// path: time is cosine-rescaled within each half so the joint is C^1.
fn concatenate_paths(
    c1: &TwistedConnection,
    c2: &TwistedConnection,
    c3: &TwistedConnection,
) -> Result<PathConnection, KError> {
    // sigma(t) in [0,2]: 1 - cos(pi t) maps [0,1] to [0,2] smoothly with
    // sigma(1/2) = 1; leg weights clip via min/max built from polynomials is
    // outside the grammar, so instead reparametrize each leg by
    //   u1(t) = min(sigma, 1) ~ (1 - cos(pi t))/...
    // Simpler: weights w2(t) = sin^2(pi t / 2)^2-style smooth bumps:
    // Gamma(t) = c1 + u(t) (c2 - c1) + v(t) (c3 - c2) with
    //   u = clamp-free smooth step hitting 1 at t = 1/2, constant after, and
    //   v = 0 until 1/2 then rising to 1. Use
    //   u(t) = sin^2(pi min(t,1/2))  -> expressed as sin^2(pi t) folded:
    // take u(t) = sin(pi t)^2 for t in [0, 1/2] and 1 afterwards; the
    // grammar has no piecewise functions, so use the smooth surrogate
    //   u(t) = t^2 (3 - 2 t) adjusted...
    // A fully smooth polynomial surrogate with u(0)=0, u(1)=1, v(0)=0,
    // v(1)=1 and u', v' vanishing at the ends keeps both legs active
    // simultaneously; the bigon primitive absorbs the path choice, so any
    // smooth path from c1 to c3 through the affine plane spanned works.
    let t = Expr::param(0);
    let smooth = |e: &ExprRef| {
        // s(x) = x^2 (3 - 2x)
        Expr::mul(
            &Expr::powi(e, 2),
            &Expr::sub(&Expr::real(3.0), &Expr::mul(&Expr::real(2.0), e)),
        )
    };
    let u = smooth(&smooth(&t));
    let v = smooth(&Expr::powi(&smooth(&t), 2));
    // Gamma(t) = c1 + u (c2 - c1) + v (c3 - c2)
    let n = c1.bundle.rank;
    let mut gamma = Vec::with_capacity(c1.gamma.len());
    for ((m1, m2), m3) in c1.gamma.iter().zip(&c2.gamma).zip(&c3.gamma) {
        let mut out = crate::bundle::MatCoeffs::new();
        let mut tuples: Vec<Vec<u8>> = m1
            .keys()
            .chain(m2.keys())
            .chain(m3.keys())
            .cloned()
            .collect();
        tuples.sort();
        tuples.dedup();
        let zero = crate::calculus::form::ExprMat::zeros(n);
        for tup in tuples {
            let a = m1.get(&tup).unwrap_or(&zero);
            let b = m2.get(&tup).unwrap_or(&zero);
            let c = m3.get(&tup).unwrap_or(&zero);
            let mut acc = crate::calculus::form::ExprMat::zeros(n);
            for r in 0..n {
                for cc in 0..n {
                    let d12 = Expr::sub(b.at(r, cc), a.at(r, cc));
                    let d23 = Expr::sub(c.at(r, cc), b.at(r, cc));
                    let val = Expr::add(
                        a.at(r, cc),
                        &Expr::add(&Expr::mul(&u, &d12), &Expr::mul(&v, &d23)),
                    );
                    acc.set(r, cc, val);
                }
            }
            out.insert(tup, acc);
        }
        gamma.push(out);
    }
    Ok(PathConnection {
        bundle: c1.bundle.clone(),
        gamma,
        start: c1.clone(),
        end: c3.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::TwistedBundle;
    use crate::cover::build_torus_cover;
    use crate::deligne::{random_imaginary_one_form, random_imaginary_two_form};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (Arc<GerbeConn>, TwistedConnection) {
        let cover = Arc::new(build_torus_cover(2, 3, 0.05).unwrap());
        let gerbe = Arc::new(GerbeConn::trivial(cover));
        let (_, conn) = TwistedBundle::line(gerbe.clone(), 1).unwrap();
        (gerbe, conn)
    }

    fn random_odd_form(gerbe: &GerbeConn, seed: u64) -> MatrixForm {
        let cover = &gerbe.cover;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = random_imaginary_one_form(&mut rng, cover.dim, 0.8);
        let fam: Vec<ScalarCoeffs> = vec![theta; cover.n_charts()];
        family_form(cover.dim, 0, &fam)
    }

    #[test]
    fn r_of_self_difference_vanishes() {
        let (gerbe, conn) = setup();
        let theta = random_odd_form(&gerbe, 1);
        let g = Generator::new(conn, theta);
        let x = FormalDifference::new(g.clone(), g).unwrap();
        let r = map_r(&x);
        let (max, _) = super::family_max(&gerbe.cover, &r, 6, 2);
        assert!(max <= 1e-12, "R of x - x: {max}");
    }

    #[test]
    fn r_after_a_is_twisted_differential() {
        let (gerbe, _) = setup();
        let theta = random_odd_form(&gerbe, 3);
        let x = map_a(gerbe.clone(), theta.clone());
        let resid = map_r(&x).sub(&twisted_d(&theta, &gerbe)).unwrap();
        let (max, _) = super::family_max(&gerbe.cover, &resid, 8, 4);
        assert!(max <= 1e-10, "R after a: {max}");
        let (p, m) = map_i(&x);
        assert_eq!((p.rank, m.rank), (0, 0));
    }

    #[test]
    fn r_lands_in_twisted_closed_forms() {
        let (gerbe, conn) = setup();
        let theta1 = random_odd_form(&gerbe, 5);
        let theta2 = random_odd_form(&gerbe, 6);
        let g1 = Generator::new(conn.clone(), theta1);
        let g2 = Generator::new(conn.perturb(7, 0.4), theta2);
        let x = FormalDifference::new(g1, g2).unwrap();
        let r = r_closed_check(&x, 6, 8);
        assert!(r.max() <= 1e-7, "(d+H)R: {}", r.max());
    }

    #[test]
    fn r_is_additive_over_direct_sums() {
        let (gerbe, conn) = setup();
        let g1 = Generator::new(conn.clone(), random_odd_form(&gerbe, 11));
        let g2 = Generator::new(conn.perturb(12, 0.3), random_odd_form(&gerbe, 13));
        let zero = Generator::zero(gerbe.clone());
        let x1 = FormalDifference::new(g1.clone(), zero.clone()).unwrap();
        let x2 = FormalDifference::new(g2.clone(), zero.clone()).unwrap();
        let sum = FormalDifference::new(g1.direct_sum(&g2).unwrap(), zero).unwrap();
        let resid = map_r(&sum)
            .sub(&map_r(&x1).add(&map_r(&x2)).unwrap())
            .unwrap();
        let (max, _) = super::family_max(&gerbe.cover, &resid, 6, 14);
        assert!(max <= 1e-9, "R additivity: {max}");
    }

    #[test]
    fn reflexive_certificate_passes() {
        let (gerbe, conn) = setup();
        let g = Generator::new(conn, random_odd_form(&gerbe, 21));
        let cert = EquivalenceCertificate::reflexive(&g);
        let r = verify_certificate(&g, &g, &cert, 8, 6, 22).unwrap();
        assert!(r.max() <= 1e-10, "reflexive: {}", r.max());
    }

    #[test]
    fn gauge_certificate_with_cs_updated_omega() {
        let (gerbe, conn) = setup();
        let conn = conn.perturb(31, 0.4);
        let omega = random_odd_form(&gerbe, 32);
        let g1 = Generator::new(conn.clone(), omega.clone());
        // g2: same bundle, perturbed connection; omega' = omega - cs(affine)
        let conn2 = conn.perturb(33, 0.5);
        let cs = cs_form(&PathConnection::affine(&conn, &conn2, None).unwrap(), 12);
        let g2 = Generator::new(conn2, omega.sub(&cs).unwrap());
        let cert = EquivalenceCertificate {
            stab: TwistedConnection::zero(Arc::new(TwistedBundle::zero(gerbe.clone()))),
            iso: BundleMorphism::identity(Arc::new((**g1.bundle()).clone())),
            reparam: None,
            mu: MatrixForm::zero(gerbe.cover.dim, 0, 1, gerbe.cover.n_charts()),
        };
        let r = verify_certificate(&g1, &g2, &cert, 12, 6, 34).unwrap();
        assert!(r.max() <= 1e-9, "gauge certificate: {}", r.max());
    }

    #[test]
    fn certificate_with_nontrivial_stabilizer_and_iso() {
        let (gerbe, conn) = setup();
        let conn = conn.perturb(41, 0.4);
        let omega = random_odd_form(&gerbe, 42);
        let g1 = Generator::new(conn.clone(), omega.clone());
        // stabilizer: another line bundle with its standard connection
        let (_, stab) = TwistedBundle::line(gerbe.clone(), -1).unwrap();
        // E + F and a random automorphism of it as the isomorphism to itself
        let e_plus_f = Arc::new(g1.bundle().direct_sum(&stab.bundle).unwrap());
        let phi = BundleMorphism::random_automorphism(e_plus_f.clone(), 43, 0.4);
        // target generator: same E, connection pulled from phi on the sum...
        // build g2 with the same underlying bundle data as g1 and connection
        // read off from the pulled-back sum (its E-block is not a pure block,
        // so instead certify g1 ~ g1 with the isomorphism phi and the omega
        // correction cs(path)).
        let sum_conn = conn.direct_sum(&stab, e_plus_f.clone()).unwrap();
        let pulled = pull_back_connection(&phi, &sum_conn).unwrap();
        let path = PathConnection::affine(&sum_conn, &pulled, None).unwrap();
        let cs = cs_form(&path, 12);
        let g2 = Generator::new(conn, omega.sub(&cs).unwrap());
        let cert = EquivalenceCertificate {
            stab,
            iso: phi,
            reparam: None,
            mu: MatrixForm::zero(gerbe.cover.dim, 0, 1, gerbe.cover.n_charts()),
        };
        let r = verify_certificate(&g1, &g2, &cert, 12, 5, 44).unwrap();
        assert!(r.max() <= 1e-9, "stabilized certificate: {}", r.max());
    }

    /// Well-definedness of the a map: adding an odd Chern character form to
    /// theta yields a certificate-equivalent generator, with the stabilizer
    /// (E, Gamma), the automorphism phi itself, and mu = 0.
    #[test]
    fn a_map_absorbs_odd_chern_characters() {
        let (gerbe, conn) = setup();
        let conn = conn.perturb(45, 0.4);
        let theta = random_odd_form(&gerbe, 46);
        let phi = BundleMorphism::random_automorphism(conn.bundle.clone(), 47, 0.5);
        let ch_odd = crate::chern::odd_chern(&conn, &phi, 12).unwrap();

        let g1_omega = theta.add(&ch_odd).unwrap();
        let mut g1 = Generator::zero(gerbe.clone());
        g1.omega = g1_omega;
        let mut g2 = Generator::zero(gerbe.clone());
        g2.omega = theta;

        // stabilize both zero generators by (E, Gamma); the isomorphism of
        // O + E is phi acting on the E block
        let cert = EquivalenceCertificate {
            stab: conn.clone(),
            iso: BundleMorphism {
                from: Arc::new((**g1.bundle()).direct_sum(&conn.bundle).unwrap()),
                to: Arc::new((**g2.bundle()).direct_sum(&conn.bundle).unwrap()),
                phi: phi.phi.clone(),
                phi_dag: phi.phi_dag.clone(),
            },
            reparam: None,
            mu: MatrixForm::zero(gerbe.cover.dim, 0, 1, gerbe.cover.n_charts()),
        };
        let r = verify_certificate(&g1, &g2, &cert, 12, 5, 48).unwrap();
        assert!(r.max() <= 1e-9, "a-map well-definedness: {}", r.max());
    }

    #[test]
    fn twist_isomorphisms_round_trip() {
        let (gerbe, conn) = setup();
        let cover = gerbe.cover.clone();
        let theta = random_odd_form(&gerbe, 51);
        let g = Generator::new(conn, theta);
        let x = FormalDifference::new(g, Generator::zero(gerbe.clone())).unwrap();

        let alpha = DeligneOne::random(cover.clone(), 52);
        let moved = twist_iso_phi(&x, &alpha).unwrap();
        let back = twist_iso_phi(&moved, &alpha.inverse()).unwrap();
        // data-level recovery of the plus connection
        let diff = back
            .plus
            .conn
            .gamma_form(0)
            .sub(&x.plus.conn.gamma_form(0))
            .unwrap();
        let (max, _) = super::family_max(&cover, &diff, 5, 53);
        assert!(max <= 1e-10, "phi round trip: {max}");

        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let xi = random_imaginary_two_form(&mut rng, 2, 0.6);
        let xd = twist_iso_xi(&x, &xi).unwrap();
        let back = twist_iso_xi(&xd, &scalar_neg(&xi)).unwrap();
        let diff = back.plus.omega.sub(&x.plus.omega).unwrap();
        let (max, _) = super::family_max(&cover, &diff, 5, 55);
        assert!(max <= 1e-10, "xi round trip on omega: {max}");
    }

    #[test]
    fn twist_compat_identities() {
        let (gerbe, conn) = setup();
        let cover = gerbe.cover.clone();
        let theta = random_odd_form(&gerbe, 61);
        let alpha = DeligneOne::random(cover.clone(), 62);
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let xi = random_imaginary_two_form(&mut rng, 2, 0.6);
        let r = twist_compat_suite(&conn, &theta, &alpha, &xi, 6, 64).unwrap();
        assert!(r.max() <= 1e-8, "twist compat: {:?}", r.entries);
    }

    #[test]
    fn refinement_of_difference_preserves_chern_number() {
        let (gerbe, conn) = setup();
        let cover = gerbe.cover.clone();
        let theta = random_odd_form(&gerbe, 71);
        let g = Generator::new(conn, theta);
        let x = FormalDifference::new(g, Generator::zero(gerbe.clone())).unwrap();
        let (fine, refinement) = cover.refine(2).unwrap();
        let fine = Arc::new(fine);
        let fine_gerbe =
            Arc::new(crate::bundle::restrict_gerbe(&gerbe, fine.clone(), &refinement).unwrap());
        let xr = refine_difference(&x, fine_gerbe, &refinement).unwrap();
        // I commutes with refinement structurally (restriction of data)
        assert_eq!(map_i(&xr).0.rank, 1);
        let c1 = crate::chern::chern_number(&xr.plus.conn, 16).unwrap();
        assert!(
            (c1 - Complex64::new(1.0, 0.0)).norm() < 1e-8,
            "refined c1: {c1}"
        );
        // R commutes with refinement: compare at matching points
        let r_coarse = map_r(&x);
        let r_fine = map_r(&xr);
        let mut max = 0.0f64;
        for (chart, s) in fine.simplices(0).iter().enumerate().step_by(7) {
            for pt in fine.sample_points(s, 4, 72) {
                let p = pt.coords_of(s.anchor());
                let vf = r_fine.eval(chart, p, 0).unwrap();
                let vc = r_coarse.eval(refinement.tau[chart] as usize, p, 0).unwrap();
                max = max.max(vf.sub(&vc).unwrap().max_abs());
            }
        }
        assert!(max <= 1e-9, "R refinement: {max}");
    }

    #[test]
    fn hexagon_suite_passes_and_defect_fails() {
        let (gerbe, conn) = setup();
        let scenario = HexagonScenario {
            conn: conn.clone(),
            theta1: random_odd_form(&gerbe, 81),
            theta2: random_odd_form(&gerbe, 82),
            perturb_seed: 83,
            quad_nodes: 12,
            inject_defect: false,
        };
        let r = hexagon_suite(&scenario, 5, 84).unwrap();
        assert!(r.max() <= 1e-6, "hexagon: {:?}", r.entries);

        let bad = HexagonScenario {
            inject_defect: true,
            ..scenario
        };
        let r = hexagon_suite(&bad, 5, 84).unwrap();
        assert!(
            r.max_of("kernel_replay") >= 0.01,
            "defect not detected: {}",
            r.max_of("kernel_replay")
        );
    }

    #[test]
    fn certificate_chains_compose_with_bigon_cross_term() {
        let (_, conn) = setup();
        let r = certificate_chain_check(&conn, 12, 4, 91).unwrap();
        assert!(r.max() <= 1e-6, "chain: {:?}", r.entries);
    }

    use crate::deligne::ScalarCoeffs;
}
