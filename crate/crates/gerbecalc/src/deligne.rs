//! U(1)-gerbes with connection as Deligne 2-cocycles on a cover's nerve:
//! lambda on 2-simplices, 1-forms A on 1-simplices, 2-forms B on charts,
//! subject to
//!
//!   C1:  lambda_kji lambda_lji^{-1} lambda_lki lambda_lkj^{-1} = 1
//!   C2:  lambda^{-1} d lambda = A_ji + A_ik + A_kj
//!   C3:  B_j - B_i = dA_ji
//!
//! Data is completely normalized by construction: only the sorted
//! orientation of a simplex is stored and permuted or repeated-index values
//! are derived. C2 is always evaluated in the branch-free form
//! lambda^{-1} d lambda.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use thiserror::Error;

use crate::calculus::expr::{Expr, ExprRef};
use crate::calculus::form::{ChartCoeffs, ExprMat, FormError, IdxTuple, MatrixForm};
use crate::cover::{Cover, CoverError};
use crate::residual::ResidualReport;
use crate::seeding::mix_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeligneError {
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("gerbes live on different covers")]
    CoverMismatch,
    #[error("missing cocycle data on simplex {0:?}")]
    MissingData(Vec<u32>),
    #[error("curvature gluing failed: residual {0}")]
    GluingFailure(f64),
}

/// Scalar form coefficients on one chart: increasing tuple -> expression.
pub type ScalarCoeffs = BTreeMap<IdxTuple, ExprRef>;

pub fn scalar_to_chart(c: &ScalarCoeffs) -> ChartCoeffs {
    c.iter()
        .map(|(k, e)| (k.clone(), ExprMat::scalar(e.clone())))
        .collect()
}

/// Single-chart scalar form as a MatrixForm.
pub fn scalar_form(x_dim: usize, n_params: usize, c: &ScalarCoeffs) -> MatrixForm {
    MatrixForm::literal_single(x_dim, n_params, 1, scalar_to_chart(c)).expect("valid scalar form")
}

/// Chart-family scalar form.
pub fn family_form(x_dim: usize, n_params: usize, charts: &[ScalarCoeffs]) -> MatrixForm {
    MatrixForm::literal(
        x_dim,
        n_params,
        1,
        charts.iter().map(scalar_to_chart).collect(),
    )
    .expect("valid scalar family")
}

/// Negate every coefficient of a scalar form.
pub fn scalar_neg(c: &ScalarCoeffs) -> ScalarCoeffs {
    c.iter().map(|(k, e)| (k.clone(), Expr::neg(e))).collect()
}

/// Add scalar forms coefficientwise.
pub fn scalar_add(a: &ScalarCoeffs, b: &ScalarCoeffs) -> ScalarCoeffs {
    let mut out = a.clone();
    for (k, e) in b {
        let cur = out.get(k).cloned().unwrap_or_else(Expr::zero);
        out.insert(k.clone(), Expr::add(&cur, e));
    }
    out
}

/// Shift every coefficient's coordinates (chart re-anchoring).
pub fn scalar_shift(c: &ScalarCoeffs, offset: &[f64]) -> ScalarCoeffs {
    c.iter()
        .map(|(k, e)| (k.clone(), e.shift_coords(offset)))
        .collect()
}

/// Symbolic exterior derivative of literal scalar coefficients. Used at
/// construction time only (B' = B + d Pi); runtime derivatives use jets.
pub fn scalar_d_symbolic(c: &ScalarCoeffs, dim: usize) -> ScalarCoeffs {
    let mut out = ScalarCoeffs::new();
    for (tuple, f) in c {
        for k in 0..dim as u8 {
            if tuple.contains(&k) {
                continue;
            }
            let pos = tuple.iter().take_while(|&&x| x < k).count();
            let mut target = tuple.clone();
            target.insert(pos, k);
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            let term = Expr::mul(&Expr::real(sign), &f.diff_coord(k as usize));
            let cur = out.get(&target).cloned().unwrap_or_else(Expr::zero);
            out.insert(target, Expr::add(&cur, &term));
        }
    }
    out
}

/// Re-anchor an expression from chart `from` to chart `to` of the cover.
pub fn reanchor(cover: &Cover, e: &ExprRef, from: u32, to: u32) -> Result<ExprRef, CoverError> {
    let s = cover.shift(from, to)?;
    let offset: Vec<f64> = s.iter().map(|&k| k as f64).collect();
    Ok(e.shift_coords(&offset))
}

pub fn reanchor_scalar(
    cover: &Cover,
    c: &ScalarCoeffs,
    from: u32,
    to: u32,
) -> Result<ScalarCoeffs, CoverError> {
    let s = cover.shift(from, to)?;
    let offset: Vec<f64> = s.iter().map(|&k| k as f64).collect();
    Ok(scalar_shift(c, &offset))
}

/// A U(1)-gerbe with connection on the nerve of a cover.
///
/// `lambda[(i,j,k)]` (sorted) holds lambda_{kji} anchored in chart i's
/// coordinates; `a[(i,j)]` holds the 1-form A_{ji} anchored at i; `b[i]` is
/// the 2-form B_i on chart i.
#[derive(Debug, Clone)]
pub struct GerbeConn {
    pub cover: Arc<Cover>,
    lambda: HashMap<Vec<u32>, ExprRef>,
    a: HashMap<Vec<u32>, ScalarCoeffs>,
    b: Vec<ScalarCoeffs>,
}

impl GerbeConn {
    /// Assemble a gerbe from raw cocycle data (restriction and pullback use
    /// this; validity is checked by `validate_gerbe`, not assumed).
    pub fn from_parts(
        cover: Arc<Cover>,
        lambda: HashMap<Vec<u32>, ExprRef>,
        a: HashMap<Vec<u32>, ScalarCoeffs>,
        b: Vec<ScalarCoeffs>,
    ) -> GerbeConn {
        GerbeConn {
            cover,
            lambda,
            a,
            b,
        }
    }

    /// The trivial gerbe: lambda = 1, A = 0, B = 0.
    pub fn trivial(cover: Arc<Cover>) -> GerbeConn {
        let mut lambda = HashMap::new();
        for s in cover.simplices(2) {
            lambda.insert(s.verts.clone(), Expr::one());
        }
        let mut a = HashMap::new();
        for s in cover.simplices(1) {
            a.insert(s.verts.clone(), ScalarCoeffs::new());
        }
        let b = vec![ScalarCoeffs::new(); cover.n_charts()];
        GerbeConn {
            cover,
            lambda,
            a,
            b,
        }
    }

    pub fn lambda_at(&self, sorted_tri: &[u32]) -> Result<&ExprRef, DeligneError> {
        self.lambda
            .get(sorted_tri)
            .ok_or_else(|| DeligneError::MissingData(sorted_tri.to_vec()))
    }

    /// A_{ji} for the sorted pair (i, j).
    pub fn a_at(&self, sorted_pair: &[u32]) -> Result<&ScalarCoeffs, DeligneError> {
        self.a
            .get(sorted_pair)
            .ok_or_else(|| DeligneError::MissingData(sorted_pair.to_vec()))
    }

    pub fn b_at(&self, chart: usize) -> &ScalarCoeffs {
        &self.b[chart]
    }

    /// Per-chart B family as a form with the requested parameter count.
    pub fn b_form(&self, n_params: usize) -> MatrixForm {
        family_form(self.cover.dim, n_params, &self.b)
    }

    /// Gerbe curvature recipe {dB_i}.
    pub fn h_form(&self, n_params: usize) -> MatrixForm {
        self.b_form(n_params).exterior_d()
    }

    /// Structural sameness at sample points (used by round-trip tests).
    pub fn data_residual(&self, other: &GerbeConn, samples: usize, seed: u64) -> f64 {
        let mut max = 0.0f64;
        let dim = self.cover.dim;
        for s in self.cover.simplices(2) {
            let la = self.lambda.get(&s.verts).unwrap();
            let lb = other.lambda.get(&s.verts).unwrap();
            for pt in self.cover.sample_points(s, samples, seed) {
                let p = pt.coords_of(s.anchor());
                let ctx = crate::calculus::jet::EvalCtx::space(dim);
                let va = crate::calculus::jet::eval_value(la, p, &ctx).unwrap();
                let vb = crate::calculus::jet::eval_value(lb, p, &ctx).unwrap();
                max = max.max((va - vb).norm());
            }
        }
        for s in self.cover.simplices(1) {
            let fa = scalar_form(dim, 0, self.a.get(&s.verts).unwrap());
            let fb = scalar_form(dim, 0, other.a.get(&s.verts).unwrap());
            for pt in self.cover.sample_points(s, samples, seed) {
                let p = pt.coords_of(s.anchor());
                let va = fa.eval(0, p, 0).unwrap();
                let vb = fb.eval(0, p, 0).unwrap();
                max = max.max(va.sub(&vb).unwrap().max_abs());
            }
        }
        for (chart, (ba, bb)) in self.b.iter().zip(&other.b).enumerate() {
            let fa = scalar_form(dim, 0, ba);
            let fb = scalar_form(dim, 0, bb);
            let s = &self.cover.simplices(0)[chart];
            for pt in self.cover.sample_points(s, samples, seed) {
                let p = pt.coords_of(s.anchor());
                let va = fa.eval(0, p, 0).unwrap();
                let vb = fb.eval(0, p, 0).unwrap();
                max = max.max(va.sub(&vb).unwrap().max_abs());
            }
        }
        max
    }

    // -- defect injection (test scaffolding) ---------------------------

    /// Perturb B on a single chart by `amp * dx1 ^ dx2`.
    pub fn with_b_perturbed(&self, chart: usize, amp: f64) -> GerbeConn {
        let mut out = self.clone();
        let mut extra = ScalarCoeffs::new();
        extra.insert(vec![0, 1], Expr::real(amp));
        out.b[chart] = scalar_add(&out.b[chart], &extra);
        out
    }

    /// Replace lambda by its complex conjugate everywhere.
    pub fn with_lambda_conjugated(&self) -> GerbeConn {
        let mut out = self.clone();
        for v in out.lambda.values_mut() {
            *v = v.conj();
        }
        out
    }
}

/// A Deligne 1-cochain (chi on 1-simplices, Pi on charts): the morphism data
/// of the differential-twist groupoid.
#[derive(Debug, Clone)]
pub struct DeligneOne {
    pub cover: Arc<Cover>,
    /// chi_{ji} per sorted pair (i, j), anchored at chart i.
    pub chi: HashMap<Vec<u32>, ExprRef>,
    /// Pi_i per chart.
    pub pi: Vec<ScalarCoeffs>,
}

impl DeligneOne {
    pub fn identity(cover: Arc<Cover>) -> DeligneOne {
        let mut chi = HashMap::new();
        for s in cover.simplices(1) {
            chi.insert(s.verts.clone(), Expr::one());
        }
        let pi = vec![ScalarCoeffs::new(); cover.n_charts()];
        DeligneOne { cover, chi, pi }
    }

    /// Random smooth twist: chi = exp(i theta) with theta a small real
    /// trigonometric polynomial, Pi a random iR-valued 1-form. Amplitudes
    /// are capped so that products of a few lambdas stay away from the
    /// negative real axis (principal logs remain branch-safe).
    pub fn random(cover: Arc<Cover>, seed: u64) -> DeligneOne {
        let dim = cover.dim;
        let mut chi = HashMap::new();
        for s in cover.simplices(1) {
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix_seed(seed, &format!("twist-chi:{:?}", s.verts)));
            let theta = random_trig_poly(&mut rng, dim, 0.25);
            chi.insert(
                s.verts.clone(),
                Expr::exp(&Expr::mul(&Arc::new(Expr::ImUnit), &theta)),
            );
        }
        let mut pi = Vec::with_capacity(cover.n_charts());
        for chart in 0..cover.n_charts() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &format!("twist-pi:{chart}")));
            pi.push(random_imaginary_one_form(&mut rng, dim, 0.4));
        }
        DeligneOne { cover, chi, pi }
    }

    /// chi_{ji} for the sorted pair.
    pub fn chi_at(&self, sorted_pair: &[u32]) -> Result<&ExprRef, DeligneError> {
        self.chi
            .get(sorted_pair)
            .ok_or_else(|| DeligneError::MissingData(sorted_pair.to_vec()))
    }

    /// The inverse morphism: conjugate chi (unit modulus), negate Pi.
    pub fn inverse(&self) -> DeligneOne {
        DeligneOne {
            cover: self.cover.clone(),
            chi: self
                .chi
                .iter()
                .map(|(k, e)| (k.clone(), e.conj()))
                .collect(),
            pi: self.pi.iter().map(scalar_neg).collect(),
        }
    }

    /// d log chi as a literal 1-form, computed branch-free as chi^{-1} d chi.
    pub fn dlog_chi(&self, sorted_pair: &[u32]) -> Result<ScalarCoeffs, DeligneError> {
        let chi = self.chi_at(sorted_pair)?;
        let dim = self.cover.dim;
        let inv = chi.conj(); // |chi| = 1
        let mut out = ScalarCoeffs::new();
        for k in 0..dim {
            let dk = chi.diff_coord(k);
            let coeff = Expr::mul(&inv, &dk);
            out.insert(vec![k as u8], coeff);
        }
        Ok(out)
    }
}

/// Random real trigonometric polynomial of degree <= 2, total amplitude
/// bounded by `amp`.
pub fn random_trig_poly(rng: &mut ChaCha8Rng, dim: usize, amp: f64) -> ExprRef {
    let mut waves: Vec<Vec<f64>> = Vec::new();
    for a in 0..dim {
        let mut k1 = vec![0.0; dim];
        k1[a] = 1.0;
        waves.push(k1);
        let mut k2 = vec![0.0; dim];
        k2[a] = 2.0;
        waves.push(k2);
    }
    if dim >= 2 {
        let mut kx = vec![0.0; dim];
        kx[0] = 1.0;
        kx[1] = 1.0;
        waves.push(kx);
    }
    let per_term = amp / (2.0 * waves.len() as f64);
    let mut acc = Expr::zero();
    let two_pi = Expr::mul(&Expr::real(2.0), &Arc::new(Expr::Pi));
    for k in &waves {
        let mut phase = Expr::zero();
        for (a, &ka) in k.iter().enumerate() {
            if ka != 0.0 {
                phase = Expr::add(&phase, &Expr::mul(&Expr::real(ka), &Expr::coord(a)));
            }
        }
        let arg = Expr::mul(&two_pi, &phase);
        let c: f64 = rng.gen_range(-per_term..per_term);
        let s: f64 = rng.gen_range(-per_term..per_term);
        acc = Expr::add(&acc, &Expr::mul(&Expr::real(c), &Expr::cos(&arg)));
        acc = Expr::add(&acc, &Expr::mul(&Expr::real(s), &Expr::sin(&arg)));
    }
    acc
}

/// Random iR-valued 1-form with trigonometric coefficients.
pub fn random_imaginary_one_form(rng: &mut ChaCha8Rng, dim: usize, amp: f64) -> ScalarCoeffs {
    let mut out = ScalarCoeffs::new();
    for a in 0..dim {
        let theta = random_trig_poly(rng, dim, amp);
        out.insert(vec![a as u8], Expr::mul(&Arc::new(Expr::ImUnit), &theta));
    }
    out
}

/// Random iR-valued 2-form.
pub fn random_imaginary_two_form(rng: &mut ChaCha8Rng, dim: usize, amp: f64) -> ScalarCoeffs {
    let mut out = ScalarCoeffs::new();
    for a in 0..dim {
        for b in (a + 1)..dim {
            let theta = random_trig_poly(rng, dim, amp);
            out.insert(
                vec![a as u8, b as u8],
                Expr::mul(&Arc::new(Expr::ImUnit), &theta),
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

/// Check C1, C2, C3, unit modulus at sample points; failures are reported,
/// not thrown.
pub fn validate_gerbe(g: &GerbeConn, samples: usize, seed: u64) -> ResidualReport {
    let mut report = ResidualReport::new();
    let cover = &g.cover;
    let dim = cover.dim;
    let ctx = crate::calculus::jet::EvalCtx::space(dim);
    let one = Complex64::new(1.0, 0.0);

    // unit modulus over all 2-simplices
    for s in cover.simplices(2) {
        let lam = g.lambda.get(&s.verts).unwrap();
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let v = crate::calculus::jet::eval_value(lam, pt.coords_of(s.anchor()), &ctx).unwrap();
            max = max.max((v.norm() - 1.0).abs());
        }
        report.record("unit_modulus", max, pts.len());
    }

    // C1 on 3-simplices
    for s in cover.simplices(3) {
        let (i, j, k, l) = (s.verts[0], s.verts[1], s.verts[2], s.verts[3]);
        let faces = [
            (vec![i, j, k], 1.0),
            (vec![i, j, l], -1.0),
            (vec![i, k, l], 1.0),
            (vec![j, k, l], -1.0),
        ];
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let mut prod = one;
            for (face, e) in &faces {
                let lam = g.lambda.get(face).unwrap();
                let v = crate::calculus::jet::eval_value(lam, pt.coords_of(face[0]), &ctx).unwrap();
                prod *= if *e > 0.0 { v } else { one / v };
            }
            max = max.max((prod - one).norm());
        }
        report.record("c1_cocycle", max, pts.len());
    }

    // C2 on 2-simplices: lambda^{-1} d lambda = A_ji + A_ik + A_kj
    for s in cover.simplices(2) {
        let (i, j, k) = (s.verts[0], s.verts[1], s.verts[2]);
        let lam = g.lambda.get(&s.verts).unwrap();
        let a_ji = scalar_form(dim, 0, g.a.get(&vec![i, j]).unwrap());
        let a_ki = scalar_form(dim, 0, g.a.get(&vec![i, k]).unwrap());
        let a_kj = scalar_form(dim, 0, g.a.get(&vec![j, k]).unwrap());
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let p_i = pt.coords_of(i);
            let jet = crate::calculus::jet::eval_jet(lam, p_i, &ctx, 1).unwrap();
            let v_ji = a_ji.eval(0, p_i, 0).unwrap();
            let v_ki = a_ki.eval(0, p_i, 0).unwrap();
            let v_kj = a_kj.eval(0, pt.coords_of(j), 0).unwrap();
            for axis in 0..dim {
                let lhs = jet.grad_at(axis) / jet.value;
                let tuple = vec![axis as u8];
                // A_ik = -A_ki
                let rhs =
                    v_ji.coeff_value(&tuple) - v_ki.coeff_value(&tuple) + v_kj.coeff_value(&tuple);
                max = max.max((lhs - rhs).norm());
            }
        }
        report.record("c2_dlog", max, pts.len());
    }

    // C3 on 1-simplices: B_j - B_i = dA_ji
    for s in cover.simplices(1) {
        let (i, j) = (s.verts[0], s.verts[1]);
        let da = scalar_form(dim, 0, g.a.get(&s.verts).unwrap()).exterior_d();
        let b_i = scalar_form(dim, 0, &g.b[i as usize]);
        let b_j = scalar_form(dim, 0, &g.b[j as usize]);
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let lhs = b_j
                .eval(0, pt.coords_of(j), 0)
                .unwrap()
                .sub(&b_i.eval(0, pt.coords_of(i), 0).unwrap())
                .unwrap();
            let rhs = da.eval(0, pt.coords_of(i), 0).unwrap();
            max = max.max(lhs.sub(&rhs).unwrap().max_abs());
        }
        report.record("c3_curving", max, pts.len());
    }

    report
}

/// The global 3-curvature {dB_i}: checks gluing on overlaps and dH = 0, then
/// returns the chart-family recipe.
pub fn curvature_h(
    g: &GerbeConn,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<(MatrixForm, ResidualReport), DeligneError> {
    let cover = &g.cover;
    let h = g.h_form(0);
    let mut report = ResidualReport::new();
    for s in cover.simplices(1) {
        let (i, j) = (s.verts[0], s.verts[1]);
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let vi = h.eval(i as usize, pt.coords_of(i), 0)?;
            let vj = h.eval(j as usize, pt.coords_of(j), 0)?;
            max = max.max(vi.sub(&vj)?.max_abs());
        }
        report.record("h_gluing", max, pts.len());
    }
    if report.max_of("h_gluing") > tol {
        return Err(DeligneError::GluingFailure(report.max_of("h_gluing")));
    }
    // dH = 0: needs second derivatives of B, so evaluate d(H) directly.
    let dh = h.exterior_d();
    for (chart, s) in cover.simplices(0).iter().enumerate() {
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            max = max.max(dh.eval(chart, pt.coords_of(s.anchor()), 0)?.max_abs());
        }
        report.record("dh_zero", max, pts.len());
    }
    Ok((h, report))
}

// ---------------------------------------------------------------------------
// twist morphisms
// ---------------------------------------------------------------------------

/// lambda' = lambda * (delta chi), A' = A + dlog chi + Pi_j - Pi_i,
/// B' = B + d Pi. The curvature H is unchanged.
pub fn apply_twist_morphism(g: &GerbeConn, alpha: &DeligneOne) -> Result<GerbeConn, DeligneError> {
    if !Arc::ptr_eq(&g.cover, &alpha.cover) {
        return Err(DeligneError::CoverMismatch);
    }
    let cover = &g.cover;
    let dim = cover.dim;

    let mut lambda = HashMap::new();
    for s in cover.simplices(2) {
        let (i, j, k) = (s.verts[0], s.verts[1], s.verts[2]);
        let lam = g.lambda_at(&s.verts)?;
        let chi_ji = alpha.chi_at(&[i, j])?.clone();
        let chi_ki = alpha.chi_at(&[i, k])?.clone();
        let chi_kj = reanchor(cover, alpha.chi_at(&[j, k])?, j, i)?;
        // (delta chi)_{kji} = chi_kj chi_ji chi_ki^{-1}; |chi| = 1
        let delta = Expr::mul(&Expr::mul(&chi_kj, &chi_ji), &chi_ki.conj());
        lambda.insert(s.verts.clone(), Expr::mul(lam, &delta));
    }

    let mut a = HashMap::new();
    for s in cover.simplices(1) {
        let (i, j) = (s.verts[0], s.verts[1]);
        let base = g.a_at(&s.verts)?;
        let dlog = alpha.dlog_chi(&s.verts)?;
        let pi_j = reanchor_scalar(cover, &alpha.pi[j as usize], j, i)?;
        let pi_i = &alpha.pi[i as usize];
        let mut out = scalar_add(base, &dlog);
        out = scalar_add(&out, &pi_j);
        out = scalar_add(&out, &scalar_neg(pi_i));
        a.insert(s.verts.clone(), out);
    }

    let mut b = Vec::with_capacity(cover.n_charts());
    for chart in 0..cover.n_charts() {
        let dpi = scalar_d_symbolic(&alpha.pi[chart], dim);
        b.push(scalar_add(&g.b[chart], &dpi));
    }

    Ok(GerbeConn {
        cover: g.cover.clone(),
        lambda,
        a,
        b,
    })
}

/// B_i <- B_i + xi|U_i for a global 2-form xi (periodic coefficients, so one
/// expression restricts to every chart). Curvature changes by d xi.
pub fn shift_by_xi(g: &GerbeConn, xi: &ScalarCoeffs) -> GerbeConn {
    let mut out = g.clone();
    for chart in 0..g.cover.n_charts() {
        out.b[chart] = scalar_add(&out.b[chart], xi);
    }
    out
}

/// Coboundary gerbe: push the trivial gerbe through a random twist, then
/// shift the curving by a global 2-form beta. lambda = delta chi,
/// A = dlog chi + Pi_j - Pi_i, B = d Pi + beta.
pub fn make_coboundary_gerbe(
    cover: Arc<Cover>,
    seed: u64,
    beta: &ScalarCoeffs,
) -> (GerbeConn, DeligneOne) {
    let alpha = DeligneOne::random(cover.clone(), seed);
    let g0 = GerbeConn::trivial(cover);
    let g = apply_twist_morphism(&g0, &alpha).expect("twist of trivial gerbe");
    (shift_by_xi(&g, beta), alpha)
}

// ---------------------------------------------------------------------------
// Cech cochains of forms and the total differential
// ---------------------------------------------------------------------------

/// A Cech q-cochain of p-forms on the nerve, anchored at each simplex's
/// smallest vertex.
#[derive(Debug, Clone)]
pub struct FormCochain {
    pub cech_q: usize,
    pub form_p: usize,
    pub data: HashMap<Vec<u32>, ScalarCoeffs>,
}

impl FormCochain {
    pub fn random(cover: &Cover, cech_q: usize, form_p: usize, seed: u64) -> FormCochain {
        let dim = cover.dim;
        let mut data = HashMap::new();
        for s in cover.simplices(cech_q) {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                seed,
                &format!("cochain:{}:{:?}", form_p, s.verts),
            ));
            let mut coeffs = ScalarCoeffs::new();
            let tuples = increasing_tuples(dim, form_p);
            for t in tuples {
                coeffs.insert(t, random_trig_poly(&mut rng, dim, 1.0));
            }
            data.insert(s.verts.clone(), coeffs);
        }
        FormCochain {
            cech_q,
            form_p,
            data,
        }
    }
}

fn increasing_tuples(dim: usize, p: usize) -> Vec<IdxTuple> {
    fn rec(start: u8, dim: u8, left: usize, cur: &mut IdxTuple, out: &mut Vec<IdxTuple>) {
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

/// Simplicial coboundary with chart re-anchoring:
/// (delta c)_sigma = sum_k (-1)^k c_{sigma minus k}.
pub fn delta_cochain(cover: &Cover, c: &FormCochain) -> Result<FormCochain, DeligneError> {
    let q1 = c.cech_q + 1;
    let mut data = HashMap::new();
    for s in cover.simplices(q1) {
        let anchor = s.anchor();
        let mut acc = ScalarCoeffs::new();
        for drop in 0..s.verts.len() {
            let mut face = s.verts.clone();
            face.remove(drop);
            let val = c
                .data
                .get(&face)
                .ok_or_else(|| DeligneError::MissingData(face.clone()))?;
            let rean = reanchor_scalar(cover, val, face[0], anchor)?;
            let signed = if drop % 2 == 0 {
                rean
            } else {
                scalar_neg(&rean)
            };
            acc = scalar_add(&acc, &signed);
        }
        data.insert(s.verts.clone(), acc);
    }
    Ok(FormCochain {
        cech_q: q1,
        form_p: c.form_p,
        data,
    })
}

/// d of every simplex value (symbolic, for cochain experiments).
pub fn d_cochain(cover: &Cover, c: &FormCochain) -> FormCochain {
    FormCochain {
        cech_q: c.cech_q,
        form_p: c.form_p + 1,
        data: c
            .data
            .iter()
            .map(|(k, v)| (k.clone(), scalar_d_symbolic(v, cover.dim)))
            .collect(),
    }
}

/// Total differential D = d + (-1)^p delta on a q-cochain of p-forms,
/// returned as its two homogeneous components.
pub fn total_d(cover: &Cover, c: &FormCochain) -> Result<(FormCochain, FormCochain), DeligneError> {
    let dc = d_cochain(cover, c);
    let mut del = delta_cochain(cover, c)?;
    if c.form_p % 2 == 1 {
        for v in del.data.values_mut() {
            *v = scalar_neg(v);
        }
    }
    Ok((dc, del))
}

/// Max residual of a cochain at sample points (for delta^2 = 0 style tests).
pub fn cochain_max(cover: &Cover, c: &FormCochain, samples: usize, seed: u64) -> f64 {
    let dim = cover.dim;
    let mut max = 0.0f64;
    for s in cover.simplices(c.cech_q) {
        if let Some(coeffs) = c.data.get(&s.verts) {
            let f = scalar_form(dim, 0, coeffs);
            for pt in cover.sample_points(s, samples, seed) {
                max = max.max(f.eval(0, pt.coords_of(s.anchor()), 0).unwrap().max_abs());
            }
        }
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::build_torus_cover;

    fn t2() -> Arc<Cover> {
        Arc::new(build_torus_cover(2, 3, 0.05).unwrap())
    }

    #[test]
    fn trivial_gerbe_validates_exactly() {
        let g = GerbeConn::trivial(t2());
        let r = validate_gerbe(&g, 10, 1);
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn coboundary_gerbe_validates_to_roundoff() {
        let (g, _) = make_coboundary_gerbe(t2(), 7, &ScalarCoeffs::new());
        let r = validate_gerbe(&g, 20, 2);
        assert!(r.max() <= 1e-10, "coboundary gerbe residual {}", r.max());
    }

    #[test]
    fn coboundary_gerbe_is_deterministic() {
        let cover = t2();
        let (g1, _) = make_coboundary_gerbe(cover.clone(), 5, &ScalarCoeffs::new());
        let (g2, _) = make_coboundary_gerbe(cover, 5, &ScalarCoeffs::new());
        assert_eq!(g1.data_residual(&g2, 5, 3), 0.0);
    }

    #[test]
    fn injected_b_defect_is_reported_on_c3() {
        let g = GerbeConn::trivial(t2()).with_b_perturbed(0, 0.1);
        let r = validate_gerbe(&g, 30, 4);
        assert!(
            r.max_of("c3_curving") >= 0.09,
            "defect missed: {}",
            r.max_of("c3_curving")
        );
    }

    #[test]
    fn curvature_of_trivial_gerbe_vanishes() {
        let g = GerbeConn::trivial(t2());
        let (h, report) = curvature_h(&g, 10, 5, 1e-8).unwrap();
        assert!(report.max() <= 1e-12);
        let s = &g.cover.simplices(0)[0];
        let pt = &g.cover.sample_points(s, 1, 1)[0];
        assert!(h.eval(0, pt.coords_of(s.anchor()), 0).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn curvature_on_two_torus_is_degree_three_hence_zero() {
        let (g, _) = make_coboundary_gerbe(t2(), 9, &ScalarCoeffs::new());
        let (h, _) = curvature_h(&g, 10, 5, 1e-8).unwrap();
        let s = &g.cover.simplices(0)[4];
        let pt = &g.cover.sample_points(s, 1, 1)[0];
        assert!(h.eval(4, pt.coords_of(s.anchor()), 0).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn coboundary_curvature_matches_symbolic_d_of_beta_on_t3() {
        let cover = Arc::new(build_torus_cover(3, 3, 0.04).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let beta = random_imaginary_two_form(&mut rng, 3, 0.8);
        let (g, _) = make_coboundary_gerbe(cover.clone(), 11, &beta);
        let (h, report) = curvature_h(&g, 8, 6, 1e-8).unwrap();
        assert!(report.max_of("h_gluing") <= 1e-9);
        // oracle: H = d(dPi + beta) = d beta, symbolically
        let dbeta = scalar_d_symbolic(&beta, 3);
        let oracle = scalar_form(3, 0, &dbeta);
        let mut max = 0.0f64;
        for (chart, s) in cover.simplices(0).iter().enumerate().take(5) {
            for pt in cover.sample_points(s, 5, 7) {
                let p = pt.coords_of(s.anchor());
                let got = h.eval(chart, p, 0).unwrap();
                let want = oracle.eval(0, p, 0).unwrap();
                max = max.max(got.sub(&want).unwrap().max_abs());
            }
        }
        assert!(max <= 1e-9, "H vs d beta: {max}");
    }

    #[test]
    fn twist_morphism_preserves_validity_and_curvature() {
        let cover = t2();
        let g = GerbeConn::trivial(cover.clone());
        let alpha = DeligneOne::random(cover.clone(), 13);
        let g2 = apply_twist_morphism(&g, &alpha).unwrap();
        let r = validate_gerbe(&g2, 15, 8);
        assert!(r.max() <= 1e-10, "twisted gerbe residual {}", r.max());

        // identity twist does nothing
        let id = DeligneOne::identity(cover.clone());
        let g3 = apply_twist_morphism(&g, &id).unwrap();
        assert!(g.data_residual(&g3, 5, 1) <= 1e-15);

        // H(apply(g, a)) = H(g) pointwise
        let h1 = g.h_form(0);
        let h2 = g2.h_form(0);
        let mut max = 0.0f64;
        for (chart, s) in cover.simplices(0).iter().enumerate() {
            for pt in cover.sample_points(s, 10, 9) {
                let p = pt.coords_of(s.anchor());
                let a = h1.eval(chart, p, 0).unwrap();
                let b = h2.eval(chart, p, 0).unwrap();
                max = max.max(a.sub(&b).unwrap().max_abs());
            }
        }
        assert!(max <= 1e-9, "curvature moved under twist: {max}");

        // round trip through the inverse
        let g4 = apply_twist_morphism(&g2, &alpha.inverse()).unwrap();
        assert!(g.data_residual(&g4, 10, 2) <= 1e-10);
    }

    #[test]
    fn shift_by_xi_changes_curvature_by_dxi() {
        let cover = Arc::new(build_torus_cover(3, 3, 0.04).unwrap());
        let g = GerbeConn::trivial(cover.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let xi = random_imaginary_two_form(&mut rng, 3, 0.7);
        let g2 = shift_by_xi(&g, &xi);
        let dxi = scalar_form(3, 0, &scalar_d_symbolic(&xi, 3));
        let h1 = g.h_form(0);
        let h2 = g2.h_form(0);
        let mut max = 0.0f64;
        for (chart, s) in cover.simplices(0).iter().enumerate().take(4) {
            for pt in cover.sample_points(s, 5, 3) {
                let p = pt.coords_of(s.anchor());
                let diff = h2
                    .eval(chart, p, 0)
                    .unwrap()
                    .sub(&h1.eval(chart, p, 0).unwrap())
                    .unwrap();
                let want = dxi.eval(0, p, 0).unwrap();
                max = max.max(diff.sub(&want).unwrap().max_abs());
            }
        }
        assert!(max <= 1e-9);

        // xi then -xi is the identity
        let g3 = shift_by_xi(&g2, &scalar_neg(&xi));
        assert!(g.data_residual(&g3, 5, 5) <= 1e-12);
    }

    #[test]
    fn delta_of_zero_cochain_is_difference() {
        let cover = t2();
        let c = FormCochain::random(&cover, 0, 0, 21);
        let dc = delta_cochain(&cover, &c).unwrap();
        // (delta f)_{ji} = f_j - f_i at a sample point
        let s = &cover.simplices(1)[0];
        let (i, j) = (s.verts[0], s.verts[1]);
        let pt = &cover.sample_points(s, 1, 1)[0];
        let fi = scalar_form(2, 0, c.data.get(&vec![i]).unwrap());
        let fj = scalar_form(2, 0, c.data.get(&vec![j]).unwrap());
        let fd = scalar_form(2, 0, dc.data.get(&s.verts).unwrap());
        let want = fj
            .eval(0, pt.coords_of(j), 0)
            .unwrap()
            .sub(&fi.eval(0, pt.coords_of(i), 0).unwrap())
            .unwrap();
        let got = fd.eval(0, pt.coords_of(i), 0).unwrap();
        assert!(got.sub(&want).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn delta_squared_vanishes() {
        let cover = t2();
        for (q, p) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
            let c = FormCochain::random(&cover, q, p, 33 + q as u64);
            let dd = delta_cochain(&cover, &delta_cochain(&cover, &c).unwrap()).unwrap();
            let max = cochain_max(&cover, &dd, 5, 2);
            assert!(max <= 1e-10, "delta^2 residual {max} at q={q} p={p}");
        }
    }

    #[test]
    fn total_differential_squares_to_zero() {
        let cover = t2();
        let c = FormCochain::random(&cover, 0, 1, 55);
        let (dc, del_c) = total_d(&cover, &c).unwrap();
        // D^2 mixed component: d(delta part) + delta(d part) with the sign
        // rule applied at the new form degrees.
        let (dd_c, del_dc) = total_d(&cover, &dc).unwrap();
        let (d_delc, del_delc) = total_d(&cover, &del_c).unwrap();
        assert!(cochain_max(&cover, &dd_c, 4, 3) <= 1e-9, "d^2 part");
        assert!(
            cochain_max(&cover, &del_delc, 4, 3) <= 1e-10,
            "delta^2 part"
        );
        let mut mixed = HashMap::new();
        for (k, v) in &del_dc.data {
            let other = d_delc.data.get(k).unwrap();
            mixed.insert(k.clone(), scalar_add(v, other));
        }
        let mixed = FormCochain {
            cech_q: del_dc.cech_q,
            form_p: del_dc.form_p,
            data: mixed,
        };
        assert!(cochain_max(&cover, &mixed, 4, 3) <= 1e-9, "mixed part");
    }
}
