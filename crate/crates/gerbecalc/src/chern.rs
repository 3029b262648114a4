//! Twisted Chern character and Chern-Simons forms, and the identity checks
//! of twisted Chern-Weil theory.
//!
//! The m-th twisted Chern character form of a compatible connection is
//! tr (R_i - B_i . 1)^m on each chart; the pieces glue to a global form and
//! the total ch = sum ch_(m) / m! is closed for the twisted differential
//! d + H. The graded form of closedness with these conventions is
//!
//!   d ch_(m) + m ch_(m-1) ^ H = 0,
//!
//! equivalently (d + H) ch = 0 after summing (the commutator term in
//! d tr(R - B)^m dies by cyclicity, and d(R - B) contributes -H per factor).
//!
//! The Chern-Simons form of a path of connections is the fiber integral over
//! t in [0,1] of ch of the associated connection on X x I, with the
//! trailing-dt convention (w = w0 + w1 ^ dt integrates to the t-integral of
//! w1). With these orientations the transgression identity reads
//!
//!   ch(Gamma_0) - ch(Gamma_1) = (d + H) cs(gamma).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

use crate::bundle::{
    pull_back_connection, Bigon, BundleError, BundleMorphism, MatCoeffs, PathConnection,
    TwistedConnection,
};
use crate::calculus::expr::Expr;
use crate::calculus::form::{FormError, MatrixForm};
use crate::cover::Cover;
use crate::deligne::{scalar_neg, GerbeConn, ScalarCoeffs};
use crate::residual::ResidualReport;
use crate::seeding::mix_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChernError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("gluing residual {0} exceeds tolerance {1}")]
    GluingFailure(f64, f64),
    #[error("form degree does not match the cycle dimension")]
    DegreeMismatch,
    #[error("cycle axes out of range or not strictly increasing")]
    BadCycle,
}

/// A chart family of scalar forms together with its gluing evidence.
#[derive(Debug, Clone)]
pub struct GlobalForm {
    pub cover: Arc<Cover>,
    pub form: MatrixForm,
    pub glue: ResidualReport,
}

/// Check that a chart-family form agrees on overlaps (components of forms are
/// invariant under the translation transitions, so values compare directly).
pub fn glue_residual(
    cover: &Cover,
    form: &MatrixForm,
    samples: usize,
    seed: u64,
) -> ResidualReport {
    let mut report = ResidualReport::new();
    for s in cover.simplices(1) {
        let (i, j) = (s.verts[0], s.verts[1]);
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let vi = form.eval(i as usize, pt.coords_of(i), 0).unwrap();
            let vj = form.eval(j as usize, pt.coords_of(j), 0).unwrap();
            max = max.max(vi.sub(&vj).unwrap().max_abs());
        }
        report.record("gluing", max, pts.len());
    }
    report
}

/// Gate a family form into a `GlobalForm`, failing above tolerance.
pub fn into_global(
    cover: Arc<Cover>,
    form: MatrixForm,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<GlobalForm, ChernError> {
    let glue = glue_residual(&cover, &form, samples, seed);
    if glue.max() > tol {
        return Err(ChernError::GluingFailure(glue.max(), tol));
    }
    Ok(GlobalForm { cover, form, glue })
}

// ---------------------------------------------------------------------------
// Chern character forms
// ---------------------------------------------------------------------------

/// tr (R - B . 1)^m as a chart family (no 1/m! factor). m = 0 gives the
/// constant rank.
pub fn ch_graded(conn: &TwistedConnection, m: usize, n_params: usize) -> MatrixForm {
    let rank = conn.bundle.rank;
    let r = conn.curvature_form(n_params);
    let b = conn
        .bundle
        .gerbe
        .b_form(n_params)
        .broadcast(rank)
        .expect("B broadcast");
    let base = r.sub(&b).expect("R - B.1");
    base.wedge_pow(m).expect("wedge power").trace_form()
}

fn ch_of_curvature(
    curv: &MatrixForm,
    b_broadcast: &MatrixForm,
    rank: usize,
    ambient: usize,
) -> MatrixForm {
    let base = curv.sub(b_broadcast).expect("R - B.1");
    let m_max = ambient / 2;
    let mut acc = MatrixForm::constant(
        base.x_dim(),
        base.n_params(),
        1,
        base.charts(),
        Complex64::new(rank as f64, 0.0),
    );
    let mut fact = 1.0f64;
    for m in 1..=m_max {
        fact *= m as f64;
        let term = base
            .wedge_pow(m)
            .expect("wedge power")
            .trace_form()
            .scale(Complex64::new(1.0 / fact, 0.0));
        acc = acc.add(&term).expect("ch sum");
    }
    acc
}

/// Total twisted Chern character form rank + sum ch_(m)/m!, truncated at the
/// ambient dimension.
pub fn ch_total(conn: &TwistedConnection, n_params: usize) -> MatrixForm {
    let rank = conn.bundle.rank;
    let curv = conn.curvature_form(n_params);
    let b = conn
        .bundle
        .gerbe
        .b_form(n_params)
        .broadcast(rank)
        .expect("B broadcast");
    let ambient = conn.bundle.cover.dim + n_params;
    ch_of_curvature(&curv, &b, rank, ambient)
}

/// ch of the path connection on X x I.
pub fn path_ch(path: &PathConnection) -> MatrixForm {
    let rank = path.bundle.rank;
    let curv = path.curvature_form();
    let b = path
        .bundle
        .gerbe
        .b_form(1)
        .broadcast(rank)
        .expect("B broadcast");
    let ambient = path.bundle.cover.dim + 1;
    ch_of_curvature(&curv, &b, rank, ambient)
}

/// ch of the bigon connection on X x I x I.
pub fn bigon_ch(bigon: &Bigon) -> MatrixForm {
    let rank = bigon.bundle.rank;
    let curv = bigon.curvature_form();
    let b = bigon
        .bundle
        .gerbe
        .b_form(2)
        .broadcast(rank)
        .expect("B broadcast");
    let ambient = bigon.bundle.cover.dim + 2;
    ch_of_curvature(&curv, &b, rank, ambient)
}

/// Twisted differential (d + H) of a scalar chart family over the gerbe.
pub fn twisted_d(form: &MatrixForm, gerbe: &GerbeConn) -> MatrixForm {
    let h = gerbe.h_form(form.n_params());
    form.exterior_d().add(&h.wedge(form).unwrap()).unwrap()
}

/// Chern-Simons transgression form of a path: fiber integral of ch over t.
pub fn cs_form(path: &PathConnection, quad_nodes: usize) -> MatrixForm {
    path_ch(path)
        .fiber_integrate(quad_nodes)
        .expect("path has a t parameter")
}

/// Double fiber integral of ch of the bigon (the explicit primitive for the
/// difference of the two cs forms).
pub fn bigon_primitive_form(
    alpha: &PathConnection,
    gamma: &PathConnection,
    quad_nodes: usize,
) -> Result<MatrixForm, ChernError> {
    let bigon = Bigon::new(alpha, gamma)?;
    Ok(bigon_ch(&bigon)
        .fiber_integrate(quad_nodes)
        .expect("s parameter")
        .fiber_integrate(quad_nodes)
        .expect("t parameter"))
}

/// Total twisted odd Chern character of (E, phi, Gamma):
/// cs of the straight path from Gamma to phi^* Gamma.
pub fn odd_chern(
    conn: &TwistedConnection,
    phi: &BundleMorphism,
    quad_nodes: usize,
) -> Result<MatrixForm, ChernError> {
    let pulled = pull_back_connection(phi, conn)?;
    let path = PathConnection::affine(conn, &pulled, None)?;
    Ok(cs_form(&path, quad_nodes))
}

// ---------------------------------------------------------------------------
// identity checks
// ---------------------------------------------------------------------------

fn chart_residual(
    cover: &Cover,
    samples: usize,
    seed: u64,
    mut f: impl FnMut(usize, &[f64]) -> f64,
) -> (f64, usize) {
    let mut max = 0.0f64;
    let mut count = 0usize;
    for (chart, s) in cover.simplices(0).iter().enumerate() {
        for pt in cover.sample_points(s, samples, seed) {
            max = max.max(f(chart, pt.coords_of(s.anchor())));
            count += 1;
        }
    }
    (max, count)
}

/// (d + H) ch = 0 and the graded identity d ch_(m) = -m ch_(m-1) ^ H.
pub fn ch_closed_check(conn: &TwistedConnection, samples: usize, seed: u64) -> ResidualReport {
    let cover = conn.bundle.cover.clone();
    let gerbe = &conn.bundle.gerbe;
    let mut report = ResidualReport::new();

    let ch = ch_total(conn, 0);
    let closed = twisted_d(&ch, gerbe);
    let (max, count) = chart_residual(&cover, samples, seed, |chart, p| {
        closed.eval(chart, p, 0).unwrap().max_abs()
    });
    report.record("dH_ch_total", max, count);

    let h = gerbe.h_form(0);
    let m_max = cover.dim / 2;
    for m in 1..=m_max.max(1) {
        let lhs = ch_graded(conn, m, 0).exterior_d();
        let rhs = h
            .wedge(&ch_graded(conn, m - 1, 0))
            .unwrap()
            .scale(Complex64::new(m as f64, 0.0));
        let resid = lhs.add(&rhs).unwrap();
        let (max, count) = chart_residual(&cover, samples, seed, |chart, p| {
            resid.eval(chart, p, 0).unwrap().max_abs()
        });
        report.record(&format!("graded_closed_m{m}"), max, count);
    }
    report
}

/// Gluing of every ch_(m) and of the total form.
pub fn ch_glue_check(conn: &TwistedConnection, samples: usize, seed: u64) -> ResidualReport {
    let cover = &conn.bundle.cover;
    let mut report = ResidualReport::new();
    for m in 0..=(cover.dim / 2) {
        let g = glue_residual(cover, &ch_graded(conn, m, 0), samples, seed);
        report.record(&format!("ch{m}_glue"), g.max(), g.points());
    }
    let g = glue_residual(cover, &ch_total(conn, 0), samples, seed);
    report.record("ch_total_glue", g.max(), g.points());
    report
}

/// ch(Gamma_E + Gamma_F block sum) = ch(Gamma_E) + ch(Gamma_F).
pub fn ch_additive_check(
    a: &TwistedConnection,
    b: &TwistedConnection,
    sum: &TwistedConnection,
    samples: usize,
    seed: u64,
) -> ResidualReport {
    let cover = a.bundle.cover.clone();
    let lhs = ch_total(sum, 0);
    let rhs = ch_total(a, 0).add(&ch_total(b, 0)).unwrap();
    let resid = lhs.sub(&rhs).unwrap();
    let (max, count) = chart_residual(&cover, samples, seed, |chart, p| {
        resid.eval(chart, p, 0).unwrap().max_abs()
    });
    let mut report = ResidualReport::new();
    report.record("ch_additive", max, count);
    report
}

/// ch(Gamma_{-xi}) = ch(Gamma) ^ exp(xi) for a global iR-valued 2-form xi.
pub fn ch_rescale_check(
    conn: &TwistedConnection,
    xi: &ScalarCoeffs,
    samples: usize,
    seed: u64,
) -> ResidualReport {
    let cover = conn.bundle.cover.clone();
    let shifted = crate::bundle::retag_shift_xi(conn, &scalar_neg(xi));
    let lhs = ch_total(&shifted, 0);
    let xi_family: Vec<ScalarCoeffs> = vec![xi.clone(); cover.n_charts()];
    let xi_form = crate::deligne::family_form(cover.dim, 0, &xi_family);
    let exp_xi = xi_form.exp_even(cover.dim).unwrap();
    let rhs = ch_total(conn, 0).wedge(&exp_xi).unwrap();
    let resid = lhs.sub(&rhs).unwrap();
    let (max, count) = chart_residual(&cover, samples, seed, |chart, p| {
        resid.eval(chart, p, 0).unwrap().max_abs()
    });
    let mut report = ResidualReport::new();
    report.record("ch_rescale", max, count);
    report
}

/// ch(Gamma_0) - ch(Gamma_1) - (d + H) cs(path) at sample points.
pub fn transgression_check(
    path: &PathConnection,
    quad_nodes: usize,
    samples: usize,
    seed: u64,
) -> ResidualReport {
    let cover = path.bundle.cover.clone();
    let gerbe = &path.bundle.gerbe;
    let cs = cs_form(path, quad_nodes);
    let lhs = ch_total(&path.start, 0)
        .sub(&ch_total(&path.end, 0))
        .unwrap();
    let resid = lhs.sub(&twisted_d(&cs, gerbe)).unwrap();
    let (max, count) = chart_residual(&cover, samples, seed, |chart, p| {
        resid.eval(chart, p, 0).unwrap().max_abs()
    });
    let mut report = ResidualReport::new();
    report.record("transgression", max, count);
    report
}

/// cs(gamma) - cs(alpha) - (d + H) P with P the bigon primitive.
pub fn bigon_check(
    alpha: &PathConnection,
    gamma: &PathConnection,
    quad_nodes: usize,
    samples: usize,
    seed: u64,
) -> Result<ResidualReport, ChernError> {
    let cover = alpha.bundle.cover.clone();
    let gerbe = &alpha.bundle.gerbe;
    let p_form = bigon_primitive_form(alpha, gamma, quad_nodes)?;
    let lhs = cs_form(gamma, quad_nodes)
        .sub(&cs_form(alpha, quad_nodes))
        .unwrap();
    let resid = lhs.sub(&twisted_d(&p_form, gerbe)).unwrap();
    let (max, count) = chart_residual(&cover, samples, seed, |chart, p| {
        resid.eval(chart, p, 0).unwrap().max_abs()
    });
    let mut report = ResidualReport::new();
    report.record("bigon_exactness", max, count);
    Ok(report)
}

/// Pull a path of connections back along a bundle morphism chartwise.
pub fn pull_back_path(
    phi: &BundleMorphism,
    path: &PathConnection,
) -> Result<PathConnection, ChernError> {
    let start = pull_back_connection(phi, &path.start)?;
    let end = pull_back_connection(phi, &path.end)?;
    let cover = &phi.from.cover;
    let dim = cover.dim;
    let n = phi.from.rank;
    let mut gamma = Vec::with_capacity(path.gamma.len());
    for chart in 0..cover.n_charts() {
        let p = &phi.phi[chart];
        let pd = &phi.phi_dag[chart];
        let mut out = MatCoeffs::new();
        for a in 0..dim {
            let t: Vec<u8> = vec![a as u8];
            let base = path.gamma[chart]
                .get(&t)
                .cloned()
                .unwrap_or_else(|| crate::calculus::form::ExprMat::zeros(n));
            let conj_part = pd.matmul(&base).matmul(p);
            let dp = p.map(|e| e.diff_coord(a));
            let maurer = pd.matmul(&dp);
            let mut acc = crate::calculus::form::ExprMat::zeros(n);
            for r in 0..n {
                for c in 0..n {
                    acc.set(r, c, Expr::add(conj_part.at(r, c), maurer.at(r, c)));
                }
            }
            out.insert(t, acc);
        }
        gamma.push(out);
    }
    Ok(PathConnection {
        bundle: phi.from.clone(),
        gamma,
        start,
        end,
    })
}

/// cs(phi^* gamma) = cs(gamma).
pub fn cs_gauge_check(
    path: &PathConnection,
    phi: &BundleMorphism,
    quad_nodes: usize,
    samples: usize,
    seed: u64,
) -> Result<ResidualReport, ChernError> {
    let pulled = pull_back_path(phi, path)?;
    let cover = path.bundle.cover.clone();
    let resid = cs_form(&pulled, quad_nodes)
        .sub(&cs_form(path, quad_nodes))
        .unwrap();
    let (max, count) = chart_residual(&cover, samples, seed, |chart, p| {
        resid.eval(chart, p, 0).unwrap().max_abs()
    });
    let mut report = ResidualReport::new();
    report.record("cs_gauge", max, count);
    Ok(report)
}

/// ch(phi^* Gamma) = ch(Gamma) for an isomorphism phi.
pub fn ch_gauge_check(
    conn_on_target: &TwistedConnection,
    phi: &BundleMorphism,
    samples: usize,
    seed: u64,
) -> Result<ResidualReport, ChernError> {
    let pulled = pull_back_connection(phi, conn_on_target)?;
    let cover = phi.from.cover.clone();
    let resid = ch_total(&pulled, 0)
        .sub(&ch_total(conn_on_target, 0))
        .unwrap();
    let (max, count) = chart_residual(&cover, samples, seed, |chart, p| {
        resid.eval(chart, p, 0).unwrap().max_abs()
    });
    let mut report = ResidualReport::new();
    report.record("ch_gauge", max, count);
    Ok(report)
}

/// Fiber Stokes: d int_I w = int_I dw + (-1)^(n-1) (w|_{t=1} - w|_{t=0})
/// for a pure degree-n form on X x I.
pub fn stokes_fiber_check(
    x_dim: usize,
    degree: usize,
    seed: u64,
    quad_nodes: usize,
    samples: usize,
) -> ResidualReport {
    use crate::calculus::form::{ChartCoeffs, ExprMat};
    // random pure-degree form on a single chart domain of X x I
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, "stokes"));
    let mut coeffs = ChartCoeffs::new();
    let tuples = all_tuples(x_dim + 1, degree);
    for t in tuples {
        let theta = crate::deligne::random_trig_poly(&mut rng, x_dim, 1.0);
        // multiply in some t-dependence
        let t_factor = Expr::add(
            &Expr::one(),
            &Expr::mul(
                &Expr::real(0.7),
                &Expr::cos(&Expr::mul(
                    &Expr::mul(&Expr::real(2.0), &Arc::new(Expr::Pi)),
                    &Expr::param(0),
                )),
            ),
        );
        coeffs.insert(t, ExprMat::scalar(Expr::mul(&theta, &t_factor)));
    }
    let omega = MatrixForm::literal(x_dim, 1, 1, vec![coeffs]).unwrap();

    let lhs = omega.fiber_integrate(quad_nodes).unwrap().exterior_d();
    let int_d = omega.exterior_d().fiber_integrate(quad_nodes).unwrap();
    let boundary = omega
        .restrict_param(1.0)
        .unwrap()
        .sub(&omega.restrict_param(0.0).unwrap())
        .unwrap();
    let sign = if (degree as i32 - 1).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    let rhs = int_d
        .add(&boundary.scale(Complex64::new(sign, 0.0)))
        .unwrap();
    let resid = lhs.sub(&rhs).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, "stokes-points"));
    let mut max = 0.0f64;
    use rand::Rng;
    for _ in 0..samples {
        let p: Vec<f64> = (0..x_dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        max = max.max(resid.eval(0, &p, 0).unwrap().max_abs());
    }
    let mut report = ResidualReport::new();
    report.record("stokes_fiber", max, samples);
    report
}

fn all_tuples(dim: usize, p: usize) -> Vec<Vec<u8>> {
    fn rec(start: u8, dim: u8, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for k in start..dim {
            cur.push(k);
            rec(k + 1, dim, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::new();
    rec(0, dim as u8, p, &mut cur, &mut out);
    out
}

// ---------------------------------------------------------------------------
// integration over cycles
// ---------------------------------------------------------------------------

/// Periodic trapezoidal integration of the degree-|axes| part of a glued
/// chart family over a coordinate subtorus (other coordinates fixed at
/// `base`). Spectrally accurate for the trigonometric integrands used here.
pub fn integrate_cycle(
    cover: &Cover,
    form: &MatrixForm,
    axes: &[usize],
    base: &[f64],
    grid: usize,
) -> Result<Complex64, ChernError> {
    if axes.is_empty() || axes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ChernError::BadCycle);
    }
    if axes.iter().any(|&a| a >= cover.dim) || base.len() != cover.dim {
        return Err(ChernError::BadCycle);
    }
    let tuple: Vec<u8> = axes.iter().map(|&a| a as u8).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut idx = vec![0usize; axes.len()];
    let cells = grid.pow(axes.len() as u32);
    for _ in 0..cells {
        let mut p = base.to_vec();
        for (k, &a) in axes.iter().enumerate() {
            p[a] = idx[k] as f64 / grid as f64;
        }
        let (chart, lifted) = cover.locate(&p);
        let v = form.eval(chart, &lifted, 0)?;
        acc += v.coeff_value(&tuple);
        // odometer
        for k in 0..idx.len() {
            idx[k] += 1;
            if idx[k] < grid {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(acc / Complex64::new(cells as f64, 0.0))
}

/// First Chern number (1 / 2 pi i) int_{T^2} tr R, reported with the
/// normalization fixed by this crate (forms take values in iR).
pub fn chern_number(conn: &TwistedConnection, grid: usize) -> Result<Complex64, ChernError> {
    let cover = &conn.bundle.cover;
    let tr_r = conn.curvature_form(0).trace_form();
    let integral = integrate_cycle(cover, &tr_r, &[0, 1], &vec![0.0; cover.dim], grid)?;
    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    Ok(integral / two_pi_i)
}
