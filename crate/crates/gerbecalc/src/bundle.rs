//! Lambda-twisted vector bundles and compatible connections.
//!
//! A twisted bundle is a family of U(n)-valued transition expressions g_{ji}
//! on 1-simplices with the twisted cocycle rule g_kj g_ji = g_ki lambda_kji.
//! A compatible connection is a family of u(n)-valued 1-forms Gamma_i with
//!
//!   Gamma_i - g_ji^{-1} Gamma_j g_ji - g_ji^{-1} d g_ji = -A_ji . 1   (*)
//!
//! Only the sorted orientation of a pair is stored; the reversed transition
//! is the conjugate transpose. Rank 0 is the zero bundle and every operation
//! accepts it.
//!
//! Random compatible perturbations exploit the affine structure of the space
//! of connections: a difference of compatible connections glues by
//! conjugation, so the generators track a "frame" describing which global
//! End(E)-valued forms glue for the given transition family (full u(n) when
//! the transitions are scalar multiples of the identity, blockwise scalars
//! for sums of distinct line bundles, conjugated variants after gauge moves).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use thiserror::Error;

use crate::calculus::expr::{Expr, ExprRef};
use crate::calculus::form::{ExprMat, FormError, IdxTuple, MatrixForm};
use crate::calculus::jet::{eval_jet, EvalCtx, EvalError};
use crate::cover::{Cover, CoverError, Refinement};
use crate::deligne::{
    apply_twist_morphism, reanchor, reanchor_scalar, DeligneError, DeligneOne, GerbeConn,
    ScalarCoeffs,
};
use crate::residual::ResidualReport;
use crate::seeding::mix_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Deligne(#[from] DeligneError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("bundles live over different gerbes or covers")]
    GerbeMismatch,
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("line bundles require a 2-torus cover")]
    NotTwoTorus,
    #[error("missing transition data on {0:?}")]
    MissingData(Vec<u32>),
    #[error("connection endpoints belong to different bundles")]
    EndpointMismatch,
    #[error("paths must share their endpoints")]
    PathEndpointMismatch,
}

/// Matrix coefficients of a matrix-valued form on one chart.
pub type MatCoeffs = BTreeMap<IdxTuple, ExprMat>;

// ---------------------------------------------------------------------------
// numeric matrices
// ---------------------------------------------------------------------------

/// Plain complex matrix used by the pointwise validators.
#[derive(Debug, Clone)]
pub struct CMat {
    pub n: usize,
    pub e: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            e: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            m.e[k * n + k] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.e[r * self.n + c]
    }

    pub fn mul(&self, o: &CMat) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.e[r * n + k];
                for c in 0..n {
                    out.e[r * n + c] += a * o.e[k * n + c];
                }
            }
        }
        out
    }

    pub fn add(&self, o: &CMat) -> CMat {
        CMat {
            n: self.n,
            e: self.e.iter().zip(&o.e).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, o: &CMat) -> CMat {
        CMat {
            n: self.n,
            e: self.e.iter().zip(&o.e).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> CMat {
        CMat {
            n: self.n,
            e: self.e.iter().map(|a| a * c).collect(),
        }
    }

    pub fn dagger(&self) -> CMat {
        let n = self.n;
        let mut out = CMat::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.e[r * n + c] = self.e[c * n + r].conj();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.e.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// Evaluate a matrix of expressions: values and, at order 1, per-axis
/// derivative matrices.
pub fn eval_mat(
    m: &ExprMat,
    point: &[f64],
    ctx: &EvalCtx,
    order: u8,
) -> Result<(CMat, Vec<CMat>), EvalError> {
    let n = m.n;
    let dim = ctx.ambient();
    let mut value = CMat::zeros(n);
    let mut grads = if order >= 1 {
        vec![CMat::zeros(n); dim]
    } else {
        vec![]
    };
    for r in 0..n {
        for c in 0..n {
            let j = eval_jet(m.at(r, c), point, ctx, order)?;
            value.e[r * n + c] = j.value;
            if order >= 1 {
                for (axis, g) in grads.iter_mut().enumerate() {
                    g.e[r * n + c] = j.grad_at(axis);
                }
            }
        }
    }
    Ok((value, grads))
}

// ---------------------------------------------------------------------------
// frames for compatible random data
// ---------------------------------------------------------------------------

/// How global End(E)-valued forms glue for this transition family.
#[derive(Debug, Clone)]
pub enum Frame {
    /// Transitions are scalar multiples of the identity: all of u(n) glues.
    Scalar,
    /// Block-diagonal transitions with the given block frames.
    Blocks(Vec<(usize, Frame)>),
    /// Conjugated by known per-chart unitaries (w, w^dagger per chart).
    Conjugated {
        inner: Box<Frame>,
        w: Arc<Vec<ExprMat>>,
        w_dag: Arc<Vec<ExprMat>>,
    },
}

// ---------------------------------------------------------------------------
// twisted bundles
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TwistedBundle {
    pub cover: Arc<Cover>,
    pub gerbe: Arc<GerbeConn>,
    pub rank: usize,
    /// g_{ji} per sorted pair (i, j), anchored at chart i.
    g: HashMap<Vec<u32>, ExprMat>,
    pub frame: Frame,
}

impl TwistedBundle {
    /// Trivial rank-n bundle (all transitions the identity).
    pub fn trivial(gerbe: Arc<GerbeConn>, rank: usize) -> TwistedBundle {
        let cover = gerbe.cover.clone();
        let mut g = HashMap::new();
        for s in cover.simplices(1) {
            g.insert(s.verts.clone(), ExprMat::identity(rank));
        }
        TwistedBundle {
            cover,
            gerbe,
            rank,
            g,
            frame: Frame::Scalar,
        }
    }

    /// The zero bundle.
    pub fn zero(gerbe: Arc<GerbeConn>) -> TwistedBundle {
        Self::trivial(gerbe, 0)
    }

    /// Factor-of-automorphy line bundle of Chern number k on a 2-torus.
    /// Branch 0-cochains are the chart-coordinate lifts themselves:
    /// a_i = x1, b_i = x2 in chart i's coordinates, with integer jumps read
    /// off the cover's translation cocycle. Then
    ///   g_ji = exp(2 pi i k a_j n2_ji),  Gamma_i = -2 pi i k b_i dx1.
    pub fn line(
        gerbe: Arc<GerbeConn>,
        k: i64,
    ) -> Result<(TwistedBundle, TwistedConnection), BundleError> {
        let cover = gerbe.cover.clone();
        if cover.dim != 2 {
            return Err(BundleError::NotTwoTorus);
        }
        let two_pi_ik = Expr::mul(
            &Expr::mul(&Expr::real(2.0 * k as f64), &Arc::new(Expr::Pi)),
            &Arc::new(Expr::ImUnit),
        );
        let mut g = HashMap::new();
        for s in cover.simplices(1) {
            let (i, j) = (s.verts[0], s.verts[1]);
            let shift = cover.shift(i, j)?;
            // jumps of the branch cochains: n_ji = a_j - a_i = -shift(i,j)
            let n2 = -shift[1];
            // a_j in chart-i coordinates: x1 - shift(i,j)[0]
            let a_j = Expr::add(&Expr::coord(0), &Expr::real(-(shift[0] as f64)));
            let exponent = Expr::mul(&two_pi_ik, &Expr::mul(&a_j, &Expr::real(n2 as f64)));
            g.insert(s.verts.clone(), ExprMat::scalar(Expr::exp(&exponent)));
        }
        let bundle = Arc::new(TwistedBundle {
            cover: cover.clone(),
            gerbe,
            rank: 1,
            g,
            frame: Frame::Scalar,
        });
        // Gamma_i = -2 pi i k x2 dx1
        let coeff = Expr::mul(&Expr::neg(&two_pi_ik), &Expr::coord(1));
        let mut gamma = Vec::with_capacity(cover.n_charts());
        for _ in 0..cover.n_charts() {
            let mut c = MatCoeffs::new();
            c.insert(vec![0], ExprMat::scalar(coeff.clone()));
            gamma.push(c);
        }
        let conn = TwistedConnection {
            bundle: bundle.clone(),
            gamma,
        };
        Ok(((*bundle).clone(), conn))
    }

    /// g_{ji} for the sorted pair.
    pub fn g_at(&self, sorted_pair: &[u32]) -> Result<&ExprMat, BundleError> {
        self.g
            .get(sorted_pair)
            .ok_or_else(|| BundleError::MissingData(sorted_pair.to_vec()))
    }

    /// Block sum.
    pub fn direct_sum(&self, other: &TwistedBundle) -> Result<TwistedBundle, BundleError> {
        if !Arc::ptr_eq(&self.gerbe, &other.gerbe) {
            return Err(BundleError::GerbeMismatch);
        }
        let mut g = HashMap::new();
        for (key, ga) in &self.g {
            let gb = other.g_at(key)?;
            g.insert(key.clone(), ga.block_sum(gb));
        }
        // equal scalar transitions stay scalar (e.g. L_k + L_k)
        let same: bool = self
            .g
            .iter()
            .all(|(k, ga)| other.g.get(k).map(|gb| mats_equal(ga, gb)).unwrap_or(false));
        let frame = if same
            && matches!(self.frame, Frame::Scalar)
            && matches!(other.frame, Frame::Scalar)
        {
            Frame::Scalar
        } else {
            Frame::Blocks(vec![
                (self.rank, self.frame.clone()),
                (other.rank, other.frame.clone()),
            ])
        };
        Ok(TwistedBundle {
            cover: self.cover.clone(),
            gerbe: self.gerbe.clone(),
            rank: self.rank + other.rank,
            g,
            frame,
        })
    }

    /// Structural data equality (used for the exact I-map identities).
    pub fn same_data(&self, other: &TwistedBundle) -> bool {
        self.rank == other.rank
            && self.g.len() == other.g.len()
            && self
                .g
                .iter()
                .all(|(k, ga)| other.g.get(k).map(|gb| mats_equal(ga, gb)).unwrap_or(false))
    }
}

fn mats_equal(a: &ExprMat, b: &ExprMat) -> bool {
    a.n == b.n
        && a.entries
            .iter()
            .zip(&b.entries)
            .all(|(x, y)| x.as_ref() == y.as_ref())
}

// ---------------------------------------------------------------------------
// connections
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TwistedConnection {
    pub bundle: Arc<TwistedBundle>,
    /// Gamma_i per chart: increasing tuple (single dx index) -> u(n) matrix.
    pub gamma: Vec<MatCoeffs>,
}

impl TwistedConnection {
    /// The zero connection (compatible over gerbes with A = 0).
    pub fn zero(bundle: Arc<TwistedBundle>) -> TwistedConnection {
        let charts = bundle.cover.n_charts();
        TwistedConnection {
            bundle,
            gamma: vec![MatCoeffs::new(); charts],
        }
    }

    /// Chart family of Gamma as a form with the requested parameter count.
    pub fn gamma_form(&self, n_params: usize) -> MatrixForm {
        mat_family_form(
            self.bundle.cover.dim,
            n_params,
            self.bundle.rank,
            &self.gamma,
        )
    }

    /// Curvature recipe R = d Gamma + Gamma ^ Gamma.
    pub fn curvature_form(&self, n_params: usize) -> MatrixForm {
        let g = self.gamma_form(n_params);
        g.exterior_d().add(&g.wedge(&g).unwrap()).unwrap()
    }

    /// Direct sum of connections.
    pub fn direct_sum(
        &self,
        other: &TwistedConnection,
        sum_bundle: Arc<TwistedBundle>,
    ) -> Result<TwistedConnection, BundleError> {
        if sum_bundle.rank != self.bundle.rank + other.bundle.rank {
            return Err(BundleError::RankMismatch(
                sum_bundle.rank,
                self.bundle.rank + other.bundle.rank,
            ));
        }
        let zero_a = ExprMat::zeros(self.bundle.rank);
        let zero_b = ExprMat::zeros(other.bundle.rank);
        let mut gamma = Vec::with_capacity(self.gamma.len());
        for (ca, cb) in self.gamma.iter().zip(&other.gamma) {
            let mut out = MatCoeffs::new();
            let mut tuples: Vec<IdxTuple> = ca.keys().chain(cb.keys()).cloned().collect();
            tuples.sort();
            tuples.dedup();
            for t in tuples {
                let ma = ca.get(&t).unwrap_or(&zero_a);
                let mb = cb.get(&t).unwrap_or(&zero_b);
                out.insert(t, ma.block_sum(mb));
            }
            gamma.push(out);
        }
        Ok(TwistedConnection {
            bundle: sum_bundle,
            gamma,
        })
    }

    /// Add a frame-compatible global End(E)-valued 1-form perturbation.
    pub fn perturb(&self, seed: u64, amp: f64) -> TwistedConnection {
        let dim = self.bundle.cover.dim;
        let charts = self.bundle.cover.n_charts();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, "perturb"));
        let delta = random_glued_one_form(
            &self.bundle.frame,
            self.bundle.rank,
            dim,
            charts,
            amp,
            &mut rng,
        );
        let mut gamma = self.gamma.clone();
        for (chart, d) in delta.into_iter().enumerate() {
            for (t, m) in d {
                let cur = gamma[chart]
                    .get(&t)
                    .cloned()
                    .unwrap_or_else(|| ExprMat::zeros(self.bundle.rank));
                gamma[chart].insert(t, mat_add(&cur, &m));
            }
        }
        TwistedConnection {
            bundle: self.bundle.clone(),
            gamma,
        }
    }
}

pub fn mat_family_form(
    x_dim: usize,
    n_params: usize,
    size: usize,
    charts: &[MatCoeffs],
) -> MatrixForm {
    MatrixForm::literal(
        x_dim,
        n_params,
        size,
        charts
            .iter()
            .map(|c| c.clone().into_iter().collect())
            .collect(),
    )
    .expect("valid matrix family")
}

fn mat_add(a: &ExprMat, b: &ExprMat) -> ExprMat {
    assert_eq!(a.n, b.n);
    ExprMat {
        n: a.n,
        entries: a
            .entries
            .iter()
            .zip(&b.entries)
            .map(|(x, y)| Expr::add(x, y))
            .collect(),
    }
}

fn mat_scale(a: &ExprMat, c: &ExprRef) -> ExprMat {
    a.map(|e| Expr::mul(c, e))
}

// ---------------------------------------------------------------------------
// random glued data
// ---------------------------------------------------------------------------

/// Random anti-hermitian matrix of trigonometric polynomials.
fn random_antihermitian(rng: &mut ChaCha8Rng, n: usize, dim: usize, amp: f64) -> ExprMat {
    let i_unit: ExprRef = Arc::new(Expr::ImUnit);
    let mut m = ExprMat::zeros(n);
    for r in 0..n {
        let theta = crate::deligne::random_trig_poly(rng, dim, amp);
        m.set(r, r, Expr::mul(&i_unit, &theta));
        for c in (r + 1)..n {
            let re = crate::deligne::random_trig_poly(rng, dim, amp);
            let im = crate::deligne::random_trig_poly(rng, dim, amp);
            let entry = Expr::add(&re, &Expr::mul(&i_unit, &im));
            // anti-hermitian: m[c][r] = -conj(m[r][c])
            m.set(r, c, entry.clone());
            m.set(c, r, Expr::neg(&entry.conj()));
        }
    }
    m
}

/// Random global u(n)-valued 1-form that glues for the given frame,
/// materialized per chart.
fn random_glued_one_form(
    frame: &Frame,
    rank: usize,
    dim: usize,
    charts: usize,
    amp: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<MatCoeffs> {
    match frame {
        Frame::Scalar => {
            // one global periodic form, identical in every chart
            let mut coeffs = MatCoeffs::new();
            for a in 0..dim {
                coeffs.insert(vec![a as u8], random_antihermitian(rng, rank, dim, amp));
            }
            vec![coeffs; charts]
        }
        Frame::Blocks(blocks) => {
            let per_block: Vec<Vec<MatCoeffs>> = blocks
                .iter()
                .map(|(size, f)| random_glued_one_form(f, *size, dim, charts, amp, rng))
                .collect();
            (0..charts)
                .map(|chart| {
                    let mut out = MatCoeffs::new();
                    for a in 0..dim {
                        let t: IdxTuple = vec![a as u8];
                        let mut big = ExprMat::zeros(0);
                        for (bi, (size, _)) in blocks.iter().enumerate() {
                            let part = per_block[bi][chart]
                                .get(&t)
                                .cloned()
                                .unwrap_or_else(|| ExprMat::zeros(*size));
                            big = big.block_sum(&part);
                        }
                        out.insert(t, big);
                    }
                    out
                })
                .collect()
        }
        Frame::Conjugated { inner, w, w_dag } => {
            let base = random_glued_one_form(inner, rank, dim, charts, amp, rng);
            base.into_iter()
                .enumerate()
                .map(|(chart, coeffs)| {
                    coeffs
                        .into_iter()
                        .map(|(t, m)| (t, w[chart].matmul(&m).matmul(&w_dag[chart])))
                        .collect()
                })
                .collect()
        }
    }
}

/// Random unitary of trigonometric entries: a product of embedded rotation
/// blocks and diagonal phases, closed under the expression grammar.
fn random_unitary(rng: &mut ChaCha8Rng, n: usize, dim: usize, amp: f64) -> ExprMat {
    let i_unit: ExprRef = Arc::new(Expr::ImUnit);
    let mut m = ExprMat::identity(n);
    // diagonal phases
    for r in 0..n {
        let theta = crate::deligne::random_trig_poly(rng, dim, amp);
        let phase = Expr::exp(&Expr::mul(&i_unit, &theta));
        let mut d = ExprMat::identity(n);
        d.set(r, r, phase);
        m = m.matmul(&d);
    }
    // rotations in consecutive planes
    for r in 0..n.saturating_sub(1) {
        let theta = crate::deligne::random_trig_poly(rng, dim, amp);
        let (c, s) = (Expr::cos(&theta), Expr::sin(&theta));
        let mut rot = ExprMat::identity(n);
        rot.set(r, r, c.clone());
        rot.set(r, r + 1, Expr::neg(&s));
        rot.set(r + 1, r, s);
        rot.set(r + 1, r + 1, c);
        m = m.matmul(&rot);
    }
    m
}

/// Random global unitary automorphism respecting the frame.
fn random_glued_unitary(
    frame: &Frame,
    rank: usize,
    dim: usize,
    charts: usize,
    amp: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<ExprMat> {
    match frame {
        Frame::Scalar => {
            let u = random_unitary(rng, rank, dim, amp);
            vec![u; charts]
        }
        Frame::Blocks(blocks) => {
            let per_block: Vec<Vec<ExprMat>> = blocks
                .iter()
                .map(|(size, f)| random_glued_unitary(f, *size, dim, charts, amp, rng))
                .collect();
            (0..charts)
                .map(|chart| {
                    let mut big = ExprMat::zeros(0);
                    for part in per_block.iter() {
                        big = big.block_sum(&part[chart]);
                    }
                    big
                })
                .collect()
        }
        Frame::Conjugated { inner, w, w_dag } => {
            let base = random_glued_unitary(inner, rank, dim, charts, amp, rng);
            base.into_iter()
                .enumerate()
                .map(|(chart, u)| w[chart].matmul(&u).matmul(&w_dag[chart]))
                .collect()
        }
    }
}

// ---------------------------------------------------------------------------
// morphisms and gauge transformations
// ---------------------------------------------------------------------------

/// A chartwise unitary intertwiner phi: E -> F, f_j g_ji = h_ji f_i.
#[derive(Debug, Clone)]
pub struct BundleMorphism {
    pub from: Arc<TwistedBundle>,
    pub to: Arc<TwistedBundle>,
    pub phi: Arc<Vec<ExprMat>>,
    pub phi_dag: Arc<Vec<ExprMat>>,
}

impl BundleMorphism {
    pub fn identity(bundle: Arc<TwistedBundle>) -> BundleMorphism {
        let id = vec![ExprMat::identity(bundle.rank); bundle.cover.n_charts()];
        BundleMorphism {
            from: bundle.clone(),
            to: bundle,
            phi: Arc::new(id.clone()),
            phi_dag: Arc::new(id),
        }
    }

    /// Random automorphism of E (global unitary gluing with the frame).
    pub fn random_automorphism(bundle: Arc<TwistedBundle>, seed: u64, amp: f64) -> BundleMorphism {
        let dim = bundle.cover.dim;
        let charts = bundle.cover.n_charts();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, "automorphism"));
        let phi = random_glued_unitary(&bundle.frame, bundle.rank, dim, charts, amp, &mut rng);
        let phi_dag = phi.iter().map(|m| m.dagger()).collect();
        BundleMorphism {
            from: bundle.clone(),
            to: bundle,
            phi: Arc::new(phi),
            phi_dag: Arc::new(phi_dag),
        }
    }

    /// A global automorphism given by one unitary expression matrix.
    pub fn global_automorphism(bundle: Arc<TwistedBundle>, u: ExprMat) -> BundleMorphism {
        let charts = bundle.cover.n_charts();
        let phi = vec![u.clone(); charts];
        let phi_dag = vec![u.dagger(); charts];
        BundleMorphism {
            from: bundle.clone(),
            to: bundle,
            phi: Arc::new(phi),
            phi_dag: Arc::new(phi_dag),
        }
    }

    /// Random chartwise unitaries phi_i; the target bundle is defined by
    /// h_ji := phi_j g_ji phi_i^{-1}.
    pub fn random_gauge(bundle: Arc<TwistedBundle>, seed: u64, amp: f64) -> BundleMorphism {
        let cover = &bundle.cover;
        let dim = cover.dim;
        let n = bundle.rank;
        let mut phi = Vec::with_capacity(cover.n_charts());
        for chart in 0..cover.n_charts() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &format!("gauge:{chart}")));
            phi.push(random_unitary(&mut rng, n, dim, amp));
        }
        let phi_dag: Vec<ExprMat> = phi.iter().map(|m| m.dagger()).collect();
        let mut g = HashMap::new();
        for s in cover.simplices(1) {
            let (i, j) = (s.verts[0], s.verts[1]);
            let base = bundle.g.get(&s.verts).unwrap();
            let phi_j = reanchor_mat(cover, &phi[j as usize], j, i);
            let h = phi_j.matmul(base).matmul(&phi_dag[i as usize]);
            g.insert(s.verts.clone(), h);
        }
        let phi = Arc::new(phi);
        let phi_dag = Arc::new(phi_dag);
        let to = Arc::new(TwistedBundle {
            cover: bundle.cover.clone(),
            gerbe: bundle.gerbe.clone(),
            rank: n,
            g,
            frame: Frame::Conjugated {
                inner: Box::new(bundle.frame.clone()),
                w: phi.clone(),
                w_dag: phi_dag.clone(),
            },
        });
        BundleMorphism {
            from: bundle,
            to,
            phi,
            phi_dag,
        }
    }

    pub fn inverse(&self) -> BundleMorphism {
        BundleMorphism {
            from: self.to.clone(),
            to: self.from.clone(),
            phi: self.phi_dag.clone(),
            phi_dag: self.phi.clone(),
        }
    }

    /// Intertwining residual f_j g_ji = h_ji f_i at sample points.
    pub fn validate(&self, samples: usize, seed: u64) -> ResidualReport {
        let cover = &self.from.cover;
        let ctx = EvalCtx::space(cover.dim);
        let mut report = ResidualReport::new();
        for s in cover.simplices(1) {
            let (i, j) = (s.verts[0], s.verts[1]);
            let g = self.from.g.get(&s.verts).unwrap();
            let h = self.to.g.get(&s.verts).unwrap();
            let pts = cover.sample_points(s, samples, seed);
            let mut max = 0.0f64;
            for pt in &pts {
                let (gv, _) = eval_mat(g, pt.coords_of(i), &ctx, 0).unwrap();
                let (hv, _) = eval_mat(h, pt.coords_of(i), &ctx, 0).unwrap();
                let (fi, _) = eval_mat(&self.phi[i as usize], pt.coords_of(i), &ctx, 0).unwrap();
                let (fj, _) = eval_mat(&self.phi[j as usize], pt.coords_of(j), &ctx, 0).unwrap();
                max = max.max(fj.mul(&gv).sub(&hv.mul(&fi)).max_abs());
            }
            report.record("intertwining", max, pts.len());
        }
        report
    }
}

fn reanchor_mat(cover: &Cover, m: &ExprMat, from: u32, to: u32) -> ExprMat {
    m.map(|e| reanchor(cover, e, from, to).expect("pair overlap"))
}

/// Pull back a connection on `phi.to` to `phi.from`:
/// (phi^* Gamma)_i = phi_i^{-1} Gamma_i phi_i + phi_i^{-1} d phi_i.
/// The derivative is materialized symbolically so downstream jets stay
/// second-order.
pub fn pull_back_connection(
    phi: &BundleMorphism,
    conn: &TwistedConnection,
) -> Result<TwistedConnection, BundleError> {
    if !Arc::ptr_eq(&conn.bundle.gerbe, &phi.to.gerbe) || !conn.bundle.same_data(&phi.to) {
        return Err(BundleError::EndpointMismatch);
    }
    let cover = &phi.from.cover;
    let dim = cover.dim;
    let n = phi.from.rank;
    let mut gamma = Vec::with_capacity(cover.n_charts());
    for chart in 0..cover.n_charts() {
        let p = &phi.phi[chart];
        let pd = &phi.phi_dag[chart];
        let mut out = MatCoeffs::new();
        for a in 0..dim {
            let t: IdxTuple = vec![a as u8];
            let base = conn.gamma[chart]
                .get(&t)
                .cloned()
                .unwrap_or_else(|| ExprMat::zeros(n));
            let conj_part = pd.matmul(&base).matmul(p);
            let dp = p.map(|e| e.diff_coord(a));
            let maurer = pd.matmul(&dp);
            out.insert(t, mat_add(&conj_part, &maurer));
        }
        gamma.push(out);
    }
    Ok(TwistedConnection {
        bundle: phi.from.clone(),
        gamma,
    })
}

/// Push a connection on `phi.from` forward to `phi.to`.
pub fn push_forward_connection(
    phi: &BundleMorphism,
    conn: &TwistedConnection,
) -> Result<TwistedConnection, BundleError> {
    pull_back_connection(&phi.inverse(), conn)
}

// ---------------------------------------------------------------------------
// validation
// ---------------------------------------------------------------------------

/// Twisted cocycle and unitarity residuals.
pub fn validate_bundle(bundle: &TwistedBundle, samples: usize, seed: u64) -> ResidualReport {
    let cover = &bundle.cover;
    let ctx = EvalCtx::space(cover.dim);
    let mut report = ResidualReport::new();

    for s in cover.simplices(1) {
        let g = bundle.g.get(&s.verts).unwrap();
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let (gv, _) = eval_mat(g, pt.coords_of(s.verts[0]), &ctx, 0).unwrap();
            let gram = gv.mul(&gv.dagger()).sub(&CMat::identity(bundle.rank));
            max = max.max(gram.max_abs());
        }
        report.record("unitarity", max, pts.len());
    }

    for s in cover.simplices(2) {
        let (i, j, k) = (s.verts[0], s.verts[1], s.verts[2]);
        let g_ji = bundle.g.get(&vec![i, j]).unwrap();
        let g_ki = bundle.g.get(&vec![i, k]).unwrap();
        let g_kj = bundle.g.get(&vec![j, k]).unwrap();
        let lam = bundle.gerbe.lambda_at(&s.verts).unwrap();
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let (v_ji, _) = eval_mat(g_ji, pt.coords_of(i), &ctx, 0).unwrap();
            let (v_ki, _) = eval_mat(g_ki, pt.coords_of(i), &ctx, 0).unwrap();
            let (v_kj, _) = eval_mat(g_kj, pt.coords_of(j), &ctx, 0).unwrap();
            let lam_v = crate::calculus::jet::eval_value(lam, pt.coords_of(i), &ctx).unwrap();
            let lhs = v_kj.mul(&v_ji);
            let rhs = v_ki.scale(lam_v);
            max = max.max(lhs.sub(&rhs).max_abs());
        }
        report.record("twisted_cocycle", max, pts.len());
    }
    report
}

/// Anti-hermitian and compatibility (*) residuals.
pub fn validate_connection(conn: &TwistedConnection, samples: usize, seed: u64) -> ResidualReport {
    let bundle = &conn.bundle;
    let cover = &bundle.cover;
    let ctx = EvalCtx::space(cover.dim);
    let dim = cover.dim;
    let mut report = ResidualReport::new();

    for (chart, s) in cover.simplices(0).iter().enumerate() {
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let p = pt.coords_of(s.anchor());
            for a in 0..dim {
                if let Some(m) = conn.gamma[chart].get(&vec![a as u8]) {
                    let (v, _) = eval_mat(m, p, &ctx, 0).unwrap();
                    max = max.max(v.add(&v.dagger()).max_abs());
                }
            }
        }
        report.record("antihermitian", max, pts.len());
    }

    let zero = ExprMat::zeros(bundle.rank);
    for s in cover.simplices(1) {
        let (i, j) = (s.verts[0], s.verts[1]);
        let g = bundle.g.get(&s.verts).unwrap();
        let a_form = crate::deligne::scalar_form(dim, 0, bundle.gerbe.a_at(&s.verts).unwrap());
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let p_i = pt.coords_of(i);
            let p_j = pt.coords_of(j);
            let (gv, dg) = eval_mat(g, p_i, &ctx, 1).unwrap();
            let g_dag = gv.dagger();
            let a_val = a_form.eval(0, p_i, 0).unwrap();
            for a in 0..dim {
                let gi = conn.gamma[i as usize].get(&vec![a as u8]).unwrap_or(&zero);
                let gj = conn.gamma[j as usize].get(&vec![a as u8]).unwrap_or(&zero);
                let (vi, _) = eval_mat(gi, p_i, &ctx, 0).unwrap();
                let (vj, _) = eval_mat(gj, p_j, &ctx, 0).unwrap();
                let a_ji = a_val.coeff_value(&[a as u8]);
                // Gamma_i - g^{-1} Gamma_j g - g^{-1} dg + A_ji = 0
                let resid = vi
                    .sub(&g_dag.mul(&vj).mul(&gv))
                    .sub(&g_dag.mul(&dg[a]))
                    .add(&CMat::identity(bundle.rank).scale(a_ji));
                max = max.max(resid.max_abs());
            }
        }
        report.record("compatibility", max, pts.len());
    }
    report
}

/// Curvature gluing: R_i = g_ji^{-1} R_j g_ji - dA_ji at sample points.
pub fn curvature_glue_report(
    conn: &TwistedConnection,
    samples: usize,
    seed: u64,
) -> ResidualReport {
    let bundle = &conn.bundle;
    let cover = &bundle.cover;
    let ctx = EvalCtx::space(cover.dim);
    let r_form = conn.curvature_form(0);
    let mut report = ResidualReport::new();
    for s in cover.simplices(1) {
        let (i, j) = (s.verts[0], s.verts[1]);
        let g = bundle.g.get(&s.verts).unwrap();
        let da = crate::deligne::scalar_form(cover.dim, 0, bundle.gerbe.a_at(&s.verts).unwrap())
            .exterior_d();
        let pts = cover.sample_points(s, samples, seed);
        let mut max = 0.0f64;
        for pt in &pts {
            let p_i = pt.coords_of(i);
            let p_j = pt.coords_of(j);
            let (gv, _) = eval_mat(g, p_i, &ctx, 0).unwrap();
            let g_dag = gv.dagger();
            let ri = r_form.eval(i as usize, p_i, 0).unwrap();
            let rj = r_form.eval(j as usize, p_j, 0).unwrap();
            let da_v = da.eval(0, p_i, 0).unwrap();
            for (tuple, mat) in &ri.coeffs {
                let vi = CMat {
                    n: bundle.rank,
                    e: mat.entries.iter().map(|j| j.value).collect(),
                };
                let vj = CMat {
                    n: bundle.rank,
                    e: rj
                        .coeffs
                        .get(tuple)
                        .map(|m| m.entries.iter().map(|j| j.value).collect())
                        .unwrap_or_else(|| {
                            vec![Complex64::new(0.0, 0.0); bundle.rank * bundle.rank]
                        }),
                };
                let da_c = da_v.coeff_value(tuple);
                let rhs = g_dag
                    .mul(&vj)
                    .mul(&gv)
                    .sub(&CMat::identity(bundle.rank).scale(da_c));
                max = max.max(vi.sub(&rhs).max_abs());
            }
        }
        report.record("curvature_glue", max, pts.len());
    }
    report
}

// ---------------------------------------------------------------------------
// twist transport
// ---------------------------------------------------------------------------

/// Transport a bundle along a twist morphism: E' = (chi g, lambda') over the
/// supplied target gerbe (the twist of the source gerbe by alpha).
pub fn transport_bundle(
    bundle: &TwistedBundle,
    alpha: &DeligneOne,
    target: Arc<GerbeConn>,
) -> Result<TwistedBundle, BundleError> {
    let cover = &bundle.cover;
    let mut g = HashMap::new();
    for s in cover.simplices(1) {
        let chi = alpha.chi_at(&s.verts)?;
        let base = bundle.g.get(&s.verts).unwrap();
        g.insert(s.verts.clone(), mat_scale(base, chi));
    }
    Ok(TwistedBundle {
        cover: cover.clone(),
        gerbe: target,
        rank: bundle.rank,
        g,
        frame: bundle.frame.clone(),
    })
}

/// Transport a bundle and connection along a twist morphism:
/// E' = (chi g, lambda'), Gamma' = Gamma + Pi . 1.
pub fn transport_twist(
    conn: &TwistedConnection,
    alpha: &DeligneOne,
    target: Arc<GerbeConn>,
) -> Result<TwistedConnection, BundleError> {
    let bundle = &conn.bundle;
    let cover = &bundle.cover;
    let new_bundle = Arc::new(transport_bundle(bundle, alpha, target)?);
    let mut gamma = Vec::with_capacity(cover.n_charts());
    for chart in 0..cover.n_charts() {
        let mut out = conn.gamma[chart].clone();
        for (t, e) in &alpha.pi[chart] {
            let diag = ExprMat::identity(bundle.rank).map(|x| Expr::mul(e, x));
            let cur = out
                .get(t)
                .cloned()
                .unwrap_or_else(|| ExprMat::zeros(bundle.rank));
            out.insert(t.clone(), mat_add(&cur, &diag));
        }
        gamma.push(out);
    }
    Ok(TwistedConnection {
        bundle: new_bundle,
        gamma,
    })
}

/// Convenience: transport and compute the target gerbe in one step.
pub fn transport_twist_auto(
    conn: &TwistedConnection,
    alpha: &DeligneOne,
) -> Result<TwistedConnection, BundleError> {
    let target = Arc::new(apply_twist_morphism(&conn.bundle.gerbe, alpha)?);
    transport_twist(conn, alpha, target)
}

/// Retag a connection to the gerbe with curving shifted by xi; the literal
/// data is unchanged (compatibility does not involve B).
pub fn retag_shift_xi(conn: &TwistedConnection, xi: &ScalarCoeffs) -> TwistedConnection {
    let gerbe = Arc::new(crate::deligne::shift_by_xi(&conn.bundle.gerbe, xi));
    let bundle = Arc::new(TwistedBundle {
        cover: conn.bundle.cover.clone(),
        gerbe,
        rank: conn.bundle.rank,
        g: conn.bundle.g.clone(),
        frame: conn.bundle.frame.clone(),
    });
    TwistedConnection {
        bundle,
        gamma: conn.gamma.clone(),
    }
}

// ---------------------------------------------------------------------------
// refinement restriction and translation pullback
// ---------------------------------------------------------------------------

/// Restrict a gerbe to a refined cover along tau.
pub fn restrict_gerbe(
    g: &GerbeConn,
    fine: Arc<Cover>,
    refinement: &Refinement,
) -> Result<GerbeConn, BundleError> {
    let coarse = &g.cover;
    let tau = &refinement.tau;
    let mut lambda = HashMap::new();
    for s in fine.simplices(2) {
        let imgs: Vec<u32> = s.verts.iter().map(|&v| tau[v as usize]).collect();
        lambda.insert(s.verts.clone(), normalized_lambda(g, coarse, &imgs)?);
    }
    let mut a = HashMap::new();
    for s in fine.simplices(1) {
        let (r, sv) = (s.verts[0], s.verts[1]);
        let (ti, tj) = (tau[r as usize], tau[sv as usize]);
        a.insert(s.verts.clone(), normalized_a(g, coarse, ti, tj)?);
    }
    let mut b = Vec::with_capacity(fine.n_charts());
    for r in 0..fine.n_charts() {
        b.push(g.b_at(tau[r] as usize).clone());
    }
    Ok(GerbeConn::from_parts(fine, lambda, a, b))
}

/// Completely normalized lambda_{c b a} for an ordered image triple (a,b,c),
/// re-anchored to chart a's coordinates.
fn normalized_lambda(g: &GerbeConn, coarse: &Cover, imgs: &[u32]) -> Result<ExprRef, BundleError> {
    let (a, b, c) = (imgs[0], imgs[1], imgs[2]);
    if a == b || b == c || a == c {
        return Ok(Expr::one());
    }
    let mut sorted = vec![a, b, c];
    sorted.sort_unstable();
    let stored = g.lambda_at(&sorted)?;
    let rean = reanchor(coarse, stored, sorted[0], a)?;
    // parity of the permutation taking sorted -> (a, b, c)
    let perm: Vec<usize> = [a, b, c]
        .iter()
        .map(|x| sorted.iter().position(|y| y == x).unwrap())
        .collect();
    let even = permutation_even(&perm);
    Ok(if even { rean } else { rean.conj() })
}

/// A_{tj, ti} for ordered images, anchored at chart ti.
fn normalized_a(
    g: &GerbeConn,
    coarse: &Cover,
    ti: u32,
    tj: u32,
) -> Result<ScalarCoeffs, BundleError> {
    if ti == tj {
        return Ok(ScalarCoeffs::new());
    }
    if ti < tj {
        Ok(g.a_at(&[ti, tj])?.clone())
    } else {
        let stored = g.a_at(&[tj, ti])?; // A_{ti,tj} anchored at tj
        let rean = reanchor_scalar(coarse, stored, tj, ti)?;
        Ok(crate::deligne::scalar_neg(&rean))
    }
}

fn permutation_even(perm: &[usize]) -> bool {
    let mut inv = 0;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                inv += 1;
            }
        }
    }
    inv % 2 == 0
}

/// Restrict a bundle (and its frame) along a refinement.
pub fn restrict_bundle(
    bundle: &TwistedBundle,
    fine_gerbe: Arc<GerbeConn>,
    refinement: &Refinement,
) -> Result<TwistedBundle, BundleError> {
    let coarse = &bundle.cover;
    let fine = fine_gerbe.cover.clone();
    let tau = &refinement.tau;
    let mut g = HashMap::new();
    for s in fine.simplices(1) {
        let (r, sv) = (s.verts[0], s.verts[1]);
        let (ti, tj) = (tau[r as usize], tau[sv as usize]);
        let mat = if ti == tj {
            ExprMat::identity(bundle.rank)
        } else if ti < tj {
            bundle.g_at(&[ti, tj])?.clone()
        } else {
            // g_{ti,tj} is stored anchored at tj; invert (unitary dagger)
            // after moving it into ti coordinates
            reanchor_mat(coarse, bundle.g_at(&[tj, ti])?, tj, ti).dagger()
        };
        g.insert(s.verts.clone(), mat);
    }
    let frame = restrict_frame(&bundle.frame, tau);
    Ok(TwistedBundle {
        cover: fine,
        gerbe: fine_gerbe,
        rank: bundle.rank,
        g,
        frame,
    })
}

fn restrict_frame(frame: &Frame, tau: &[u32]) -> Frame {
    match frame {
        Frame::Scalar => Frame::Scalar,
        Frame::Blocks(blocks) => Frame::Blocks(
            blocks
                .iter()
                .map(|(size, f)| (*size, restrict_frame(f, tau)))
                .collect(),
        ),
        Frame::Conjugated { inner, w, w_dag } => Frame::Conjugated {
            inner: Box::new(restrict_frame(inner, tau)),
            w: Arc::new(tau.iter().map(|&t| w[t as usize].clone()).collect()),
            w_dag: Arc::new(tau.iter().map(|&t| w_dag[t as usize].clone()).collect()),
        },
    }
}

/// Restrict a connection along a refinement.
pub fn restrict_connection(
    conn: &TwistedConnection,
    fine_bundle: Arc<TwistedBundle>,
    refinement: &Refinement,
) -> TwistedConnection {
    let tau = &refinement.tau;
    let gamma = tau
        .iter()
        .map(|&t| conn.gamma[t as usize].clone())
        .collect();
    TwistedConnection {
        bundle: fine_bundle,
        gamma,
    }
}

/// Pull back gerbe, bundle, and connection along the torus translation
/// x -> x + k/N (grid units k).
pub fn pullback_translation(
    conn: &TwistedConnection,
    k: &[i64],
) -> Result<TwistedConnection, BundleError> {
    let bundle = &conn.bundle;
    let cover = &bundle.cover;
    let gerbe = &bundle.gerbe;

    // pulled gerbe
    let mut lambda = HashMap::new();
    for s in cover.simplices(2) {
        let (sig, offsets) = translate_verts(cover, &s.verts, k)?;
        let lam = normalized_lambda(gerbe, cover, &sig)?;
        lambda.insert(s.verts.clone(), lam.shift_coords(&offsets[0]));
    }
    let mut a = HashMap::new();
    for s in cover.simplices(1) {
        let (sig, offsets) = translate_verts(cover, &s.verts, k)?;
        let base = normalized_a(gerbe, cover, sig[0], sig[1])?;
        a.insert(
            s.verts.clone(),
            crate::deligne::scalar_shift(&base, &offsets[0]),
        );
    }
    let mut b = Vec::with_capacity(cover.n_charts());
    for chart in 0..cover.n_charts() {
        let (src, off) = cover.translate_chart(chart, k)?;
        b.push(crate::deligne::scalar_shift(gerbe.b_at(src), &off));
    }
    let new_gerbe = Arc::new(GerbeConn::from_parts(cover.clone(), lambda, a, b));

    // pulled bundle
    let mut g = HashMap::new();
    for s in cover.simplices(1) {
        let (sig, offsets) = translate_verts(cover, &s.verts, k)?;
        let (si, sj) = (sig[0], sig[1]);
        let mat = if si == sj {
            ExprMat::identity(bundle.rank)
        } else if si < sj {
            bundle.g_at(&[si, sj])?.clone()
        } else {
            reanchor_mat(cover, bundle.g_at(&[sj, si])?, sj, si).dagger()
        };
        g.insert(s.verts.clone(), mat.map(|e| e.shift_coords(&offsets[0])));
    }
    // per-chart conjugating frames move with the relabeling
    let sigma: Vec<u32> = (0..cover.n_charts())
        .map(|c| cover.translate_chart(c, k).unwrap().0 as u32)
        .collect();
    let frame = restrict_frame(&bundle.frame, &sigma);
    let new_bundle = Arc::new(TwistedBundle {
        cover: cover.clone(),
        gerbe: new_gerbe,
        rank: bundle.rank,
        g,
        frame,
    });

    let mut gamma = Vec::with_capacity(cover.n_charts());
    for chart in 0..cover.n_charts() {
        let (src, off) = cover.translate_chart(chart, k)?;
        let shifted = conn.gamma[src]
            .iter()
            .map(|(t, m)| (t.clone(), m.map(|e| e.shift_coords(&off))))
            .collect();
        gamma.push(shifted);
    }
    Ok(TwistedConnection {
        bundle: new_bundle,
        gamma,
    })
}

/// Map the verts of a simplex through the translation; returns source chart
/// indices and per-vert offsets (the offset of the anchor is what matters for
/// anchored data).
fn translate_verts(
    cover: &Cover,
    verts: &[u32],
    k: &[i64],
) -> Result<(Vec<u32>, Vec<Vec<f64>>), BundleError> {
    let mut sig = Vec::with_capacity(verts.len());
    let mut offsets = Vec::with_capacity(verts.len());
    for &v in verts {
        let (src, off) = cover.translate_chart(v as usize, k)?;
        sig.push(src as u32);
        offsets.push(off);
    }
    Ok((sig, offsets))
}

// ---------------------------------------------------------------------------
// paths of connections
// ---------------------------------------------------------------------------

/// A t-dependent family of connections on one bundle, compatible for each t.
#[derive(Debug, Clone)]
pub struct PathConnection {
    pub bundle: Arc<TwistedBundle>,
    /// Gamma_i(x, t) per chart; coefficients live on dx tuples only.
    pub gamma: Vec<MatCoeffs>,
    pub start: TwistedConnection,
    pub end: TwistedConnection,
}

impl PathConnection {
    /// Straight-line path (1 - tau(t)) Gamma0 + tau(t) Gamma1; `reparam`
    /// rescales time (None = affine).
    pub fn affine(
        start: &TwistedConnection,
        end: &TwistedConnection,
        reparam: Option<ExprRef>,
    ) -> Result<PathConnection, BundleError> {
        if !Arc::ptr_eq(&start.bundle.gerbe, &end.bundle.gerbe)
            || !start.bundle.same_data(&end.bundle)
        {
            return Err(BundleError::EndpointMismatch);
        }
        let tau = reparam.unwrap_or_else(|| Expr::param(0));
        let one_minus = Expr::sub(&Expr::one(), &tau);
        let n = start.bundle.rank;
        let mut gamma = Vec::with_capacity(start.gamma.len());
        for (c0, c1) in start.gamma.iter().zip(&end.gamma) {
            let mut out = MatCoeffs::new();
            let mut tuples: Vec<IdxTuple> = c0.keys().chain(c1.keys()).cloned().collect();
            tuples.sort();
            tuples.dedup();
            for t in tuples {
                let zero = ExprMat::zeros(n);
                let m0 = c0.get(&t).unwrap_or(&zero);
                let m1 = c1.get(&t).unwrap_or(&zero);
                out.insert(t, mat_add(&mat_scale(m0, &one_minus), &mat_scale(m1, &tau)));
            }
            gamma.push(out);
        }
        Ok(PathConnection {
            bundle: start.bundle.clone(),
            gamma,
            start: start.clone(),
            end: end.clone(),
        })
    }

    /// Loop Gamma + tau(t) Delta with tau(0) = tau(1) = 0 (a back-and-forth
    /// traversal of the segment toward `other`).
    pub fn loop_path(
        base: &TwistedConnection,
        other: &TwistedConnection,
    ) -> Result<PathConnection, BundleError> {
        let tau = Expr::powi(
            &Expr::sin(&Expr::mul(&Arc::new(Expr::Pi), &Expr::param(0))),
            2,
        );
        let mut path = Self::affine(base, other, Some(tau))?;
        path.end = base.clone();
        Ok(path)
    }

    pub fn gamma_form(&self) -> MatrixForm {
        mat_family_form(self.bundle.cover.dim, 1, self.bundle.rank, &self.gamma)
    }

    /// Curvature on X x I: R = d Gamma + Gamma ^ Gamma with d including dt.
    pub fn curvature_form(&self) -> MatrixForm {
        let g = self.gamma_form();
        g.exterior_d().add(&g.wedge(&g).unwrap()).unwrap()
    }

    /// Compatibility residual at sampled (point, t) pairs.
    pub fn validate(&self, samples: usize, t_samples: usize, seed: u64) -> ResidualReport {
        let bundle = &self.bundle;
        let cover = &bundle.cover;
        let dim = cover.dim;
        let ctx_x = EvalCtx::space(dim);
        let ctx_xt = EvalCtx::with_params(dim, 1);
        let zero = ExprMat::zeros(bundle.rank);
        let mut report = ResidualReport::new();
        for s in cover.simplices(1) {
            let (i, j) = (s.verts[0], s.verts[1]);
            let g = bundle.g.get(&s.verts).unwrap();
            let a_form = crate::deligne::scalar_form(dim, 0, bundle.gerbe.a_at(&s.verts).unwrap());
            let pts = cover.sample_points(s, samples, seed);
            let mut max = 0.0f64;
            for pt in &pts {
                let p_i = pt.coords_of(i);
                let p_j = pt.coords_of(j);
                let (gv, dg) = eval_mat(g, p_i, &ctx_x, 1).unwrap();
                let g_dag = gv.dagger();
                let a_val = a_form.eval(0, p_i, 0).unwrap();
                for ts in 0..t_samples {
                    let t = (ts as f64 + 0.5) / t_samples as f64;
                    let mut pt_i = p_i.to_vec();
                    pt_i.push(t);
                    let mut pt_j = p_j.to_vec();
                    pt_j.push(t);
                    for a in 0..dim {
                        let gi = self.gamma[i as usize].get(&vec![a as u8]).unwrap_or(&zero);
                        let gj = self.gamma[j as usize].get(&vec![a as u8]).unwrap_or(&zero);
                        let (vi, _) = eval_mat(gi, &pt_i, &ctx_xt, 0).unwrap();
                        let (vj, _) = eval_mat(gj, &pt_j, &ctx_xt, 0).unwrap();
                        let a_ji = a_val.coeff_value(&[a as u8]);
                        let resid = vi
                            .sub(&g_dag.mul(&vj).mul(&gv))
                            .sub(&g_dag.mul(&dg[a]))
                            .add(&CMat::identity(bundle.rank).scale(a_ji));
                        max = max.max(resid.max_abs());
                    }
                }
            }
            report.record("path_compatibility", max, pts.len() * t_samples);
        }
        report
    }
}

/// Two-parameter bigon family between paths sharing endpoints:
/// (s, t) -> (1 - s) alpha_t + s gamma_t, as coefficients on (x, t, s).
pub struct Bigon {
    pub bundle: Arc<TwistedBundle>,
    pub gamma: Vec<MatCoeffs>,
}

impl Bigon {
    pub fn new(alpha: &PathConnection, gamma: &PathConnection) -> Result<Bigon, BundleError> {
        if !alpha.bundle.same_data(&gamma.bundle) {
            return Err(BundleError::EndpointMismatch);
        }
        let n = alpha.bundle.rank;
        let s_param = Expr::param(1);
        let one_minus = Expr::sub(&Expr::one(), &s_param);
        let mut out = Vec::with_capacity(alpha.gamma.len());
        for (ca, cg) in alpha.gamma.iter().zip(&gamma.gamma) {
            let mut coeffs = MatCoeffs::new();
            let zero = ExprMat::zeros(n);
            let mut tuples: Vec<IdxTuple> = ca.keys().chain(cg.keys()).cloned().collect();
            tuples.sort();
            tuples.dedup();
            for t in tuples {
                let ma = ca.get(&t).unwrap_or(&zero);
                let mg = cg.get(&t).unwrap_or(&zero);
                coeffs.insert(
                    t,
                    mat_add(&mat_scale(ma, &one_minus), &mat_scale(mg, &s_param)),
                );
            }
            out.push(coeffs);
        }
        Ok(Bigon {
            bundle: alpha.bundle.clone(),
            gamma: out,
        })
    }

    pub fn gamma_form(&self) -> MatrixForm {
        mat_family_form(self.bundle.cover.dim, 2, self.bundle.rank, &self.gamma)
    }

    pub fn curvature_form(&self) -> MatrixForm {
        let g = self.gamma_form();
        g.exterior_d().add(&g.wedge(&g).unwrap()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::build_torus_cover;
    use crate::deligne::make_coboundary_gerbe;

    fn t2_gerbe() -> Arc<GerbeConn> {
        let cover = Arc::new(build_torus_cover(2, 3, 0.05).unwrap());
        Arc::new(GerbeConn::trivial(cover))
    }

    #[test]
    fn trivial_bundle_and_zero_connection_validate() {
        let gerbe = t2_gerbe();
        let e = Arc::new(TwistedBundle::trivial(gerbe.clone(), 2));
        assert_eq!(validate_bundle(&e, 10, 1).max(), 0.0);
        let c = TwistedConnection::zero(e);
        assert_eq!(validate_connection(&c, 10, 1).max(), 0.0);
    }

    #[test]
    fn line_bundle_constructions_validate() {
        let gerbe = t2_gerbe();
        for k in [-2i64, -1, 0, 1, 2] {
            let (e, conn) = TwistedBundle::line(gerbe.clone(), k).unwrap();
            let rb = validate_bundle(&e, 15, 2);
            assert!(rb.max() <= 1e-9, "bundle k={k}: {}", rb.max());
            let rc = validate_connection(&conn, 15, 2);
            assert!(rc.max() <= 1e-9, "connection k={k}: {}", rc.max());
            let rg = curvature_glue_report(&conn, 10, 3);
            assert!(rg.max() <= 1e-7, "curvature glue k={k}: {}", rg.max());
        }
    }

    #[test]
    fn line_bundle_requires_two_torus() {
        let cover = Arc::new(build_torus_cover(1, 3, 0.05).unwrap());
        let gerbe = Arc::new(GerbeConn::trivial(cover));
        assert!(matches!(
            TwistedBundle::line(gerbe, 1),
            Err(BundleError::NotTwoTorus)
        ));
    }

    #[test]
    fn conjugated_lambda_defect_is_flagged() {
        let cover = Arc::new(build_torus_cover(2, 3, 0.05).unwrap());
        let (g, alpha) = make_coboundary_gerbe(cover.clone(), 3, &ScalarCoeffs::new());
        let g = Arc::new(g);
        let trivial = Arc::new(GerbeConn::trivial(cover));
        let base = TwistedConnection::zero(Arc::new(TwistedBundle::trivial(trivial, 1)));
        let conn = transport_twist(&base, &alpha, g.clone()).unwrap();
        assert!(validate_bundle(&conn.bundle, 10, 4).max() <= 1e-10);
        // flip lambda -> conj(lambda): cocycle breaks visibly
        let bad = Arc::new(GerbeConn::clone(&g).with_lambda_conjugated());
        let bad_bundle = TwistedBundle {
            gerbe: bad,
            ..TwistedBundle::clone(&conn.bundle)
        };
        let r = validate_bundle(&bad_bundle, 30, 4);
        assert!(
            r.max_of("twisted_cocycle") >= 0.1,
            "defect missed: {}",
            r.max_of("twisted_cocycle")
        );
    }

    #[test]
    fn direct_sum_ranks_and_zero_bundle() {
        let gerbe = t2_gerbe();
        let (e, ce) = TwistedBundle::line(gerbe.clone(), 1).unwrap();
        let o = TwistedBundle::zero(gerbe.clone());
        let sum = e.direct_sum(&o).unwrap();
        assert_eq!(sum.rank, 1);
        assert!(e.same_data(&sum), "E + O should equal E up to empty blocks");

        let (f, cf) = TwistedBundle::line(gerbe.clone(), -1).unwrap();
        let ef = Arc::new(e.direct_sum(&f).unwrap());
        assert_eq!(ef.rank, 2);
        let cc = ce.direct_sum(&cf, ef.clone()).unwrap();
        let r = validate_connection(&cc, 10, 5);
        assert!(r.max() <= 1e-9);
        // distinct line bundles only admit blockwise perturbations
        assert!(matches!(ef.frame, Frame::Blocks(_)));
        let (g2, cg2) = TwistedBundle::line(gerbe.clone(), 1).unwrap();
        let sum_eq = Arc::new(e.direct_sum(&g2).unwrap());
        assert!(matches!(sum_eq.frame, Frame::Scalar));
        let _ = cg2;
    }

    #[test]
    fn perturbed_connections_stay_compatible() {
        let gerbe = t2_gerbe();
        // scalar frame: full u(2) perturbation of a rank-2 equal-k sum
        let (e, ce) = TwistedBundle::line(gerbe.clone(), 1).unwrap();
        let (f, cf) = TwistedBundle::line(gerbe.clone(), 1).unwrap();
        let sum = Arc::new(e.direct_sum(&f).unwrap());
        let conn = ce.direct_sum(&cf, sum).unwrap();
        let p = conn.perturb(6, 0.5);
        let r = validate_connection(&p, 12, 6);
        assert!(r.max() <= 1e-9, "perturbed residual {}", r.max());
        // the perturbation must actually be non-abelian: Gamma ^ Gamma != 0
        let gw = p.gamma_form(0);
        let sq = gw.wedge(&gw).unwrap();
        let s = &p.bundle.cover.simplices(0)[0];
        let pt = &p.bundle.cover.sample_points(s, 1, 9)[0];
        assert!(sq.eval(0, pt.coords_of(s.anchor()), 0).unwrap().max_abs() > 1e-6);

        // blocks frame
        let (g2, cg2) = TwistedBundle::line(gerbe.clone(), -1).unwrap();
        let sum2 = Arc::new(e.direct_sum(&g2).unwrap());
        let conn2 = ce.direct_sum(&cg2, sum2).unwrap();
        let p2 = conn2.perturb(7, 0.5);
        assert!(validate_connection(&p2, 12, 7).max() <= 1e-9);
    }

    #[test]
    fn gauge_transform_round_trip_and_compatibility() {
        let gerbe = t2_gerbe();
        let (_, conn) = TwistedBundle::line(gerbe.clone(), 1).unwrap();
        let conn = conn.perturb(11, 0.4);
        let phi = BundleMorphism::random_gauge(conn.bundle.clone(), 12, 0.4);
        assert!(phi.validate(10, 8).max() <= 1e-10);
        let pushed = push_forward_connection(&phi, &conn).unwrap();
        let r = validate_connection(&pushed, 10, 8);
        assert!(r.max() <= 1e-9, "pushed residual {}", r.max());
        let back = pull_back_connection(&phi, &pushed).unwrap();
        // (phi^{-1})^* phi^* Gamma = Gamma
        let diff = back.gamma_form(0).sub(&conn.gamma_form(0)).unwrap();
        let s = &conn.bundle.cover.simplices(0)[2];
        for pt in conn.bundle.cover.sample_points(s, 10, 13) {
            let v = diff.eval(2, pt.coords_of(s.anchor()), 0).unwrap();
            assert!(v.max_abs() <= 1e-8, "round trip residual {}", v.max_abs());
        }
    }

    #[test]
    fn composed_gauge_acts_contravariantly() {
        let gerbe = t2_gerbe();
        let e = Arc::new(TwistedBundle::trivial(gerbe, 2));
        let conn = TwistedConnection::zero(e.clone()).perturb(21, 0.4);
        let phi = BundleMorphism::random_gauge(e.clone(), 22, 0.3);
        let psi = BundleMorphism::random_gauge(phi.to.clone(), 23, 0.3);
        // (psi . phi)^* Gamma = phi^* (psi^* Gamma) for Gamma on psi.to
        let conn_top =
            push_forward_connection(&psi, &push_forward_connection(&phi, &conn).unwrap()).unwrap();
        let via_steps =
            pull_back_connection(&phi, &pull_back_connection(&psi, &conn_top).unwrap()).unwrap();
        let diff = via_steps.gamma_form(0).sub(&conn.gamma_form(0)).unwrap();
        let cvr = &conn.bundle.cover;
        let s = &cvr.simplices(0)[5];
        for pt in cvr.sample_points(s, 8, 24) {
            assert!(diff.eval(5, pt.coords_of(s.anchor()), 0).unwrap().max_abs() <= 1e-8);
        }
    }

    #[test]
    fn transport_twist_curvature_shift_and_round_trip() {
        let cover = Arc::new(build_torus_cover(2, 3, 0.05).unwrap());
        let trivial = Arc::new(GerbeConn::trivial(cover.clone()));
        let (_, conn) = TwistedBundle::line(trivial.clone(), 1).unwrap();
        let alpha = DeligneOne::random(cover.clone(), 31);
        let moved = transport_twist_auto(&conn, &alpha).unwrap();
        assert!(validate_bundle(&moved.bundle, 10, 32).max() <= 1e-9);
        assert!(validate_connection(&moved, 10, 32).max() <= 1e-9);

        // R' = R + d Pi . 1 pointwise
        let r0 = conn.curvature_form(0);
        let r1 = moved.curvature_form(0);
        let dpi_data: Vec<ScalarCoeffs> = alpha
            .pi
            .iter()
            .map(|p| crate::deligne::scalar_d_symbolic(p, 2))
            .collect();
        let dpi = crate::deligne::family_form(2, 0, &dpi_data);
        let mut max = 0.0f64;
        for (chart, s) in cover.simplices(0).iter().enumerate() {
            for pt in cover.sample_points(s, 8, 33) {
                let p = pt.coords_of(s.anchor());
                let want = r0
                    .eval(chart, p, 0)
                    .unwrap()
                    .add(
                        &dpi.eval(chart, p, 0)
                            .unwrap()
                            .scale(Complex64::new(1.0, 0.0)),
                    )
                    .unwrap();
                let got = r1.eval(chart, p, 0).unwrap();
                max = max.max(got.sub(&want).unwrap().max_abs());
            }
        }
        assert!(max <= 1e-8, "R shift residual {max}");

        // transport then inverse-transport returns the original data
        let back = transport_twist(&moved, &alpha.inverse(), trivial.clone()).unwrap();
        let diff = back.gamma_form(0).sub(&conn.gamma_form(0)).unwrap();
        let s = &cover.simplices(0)[1];
        for pt in cover.sample_points(s, 6, 34) {
            assert!(diff.eval(1, pt.coords_of(s.anchor()), 0).unwrap().max_abs() <= 1e-10);
        }

        // identity twist leaves the data alone
        let id = DeligneOne::identity(cover.clone());
        let same = transport_twist(&conn, &id, trivial).unwrap();
        assert!(same.bundle.same_data(&conn.bundle));
        let diff = same.gamma_form(0).sub(&conn.gamma_form(0)).unwrap();
        for pt in cover.sample_points(s, 4, 35) {
            assert!(diff.eval(1, pt.coords_of(s.anchor()), 0).unwrap().max_abs() <= 1e-14);
        }
    }

    #[test]
    fn refinement_restriction_preserves_validity() {
        let cover = Arc::new(build_torus_cover(2, 3, 0.05).unwrap());
        let (g, _) = make_coboundary_gerbe(cover.clone(), 41, &ScalarCoeffs::new());
        let g = Arc::new(g);
        let trivial = Arc::new(GerbeConn::trivial(cover.clone()));
        let (_, conn) = TwistedBundle::line(trivial, 1).unwrap();
        let alpha = DeligneOne::random(cover.clone(), 41);
        let conn = transport_twist(&conn, &alpha, g.clone()).unwrap();

        let (fine, refinement) = cover.refine(2).unwrap();
        let fine = Arc::new(fine);
        let fine_gerbe = Arc::new(restrict_gerbe(&g, fine.clone(), &refinement).unwrap());
        let rg = crate::deligne::validate_gerbe(&fine_gerbe, 6, 42);
        assert!(rg.max() <= 1e-9, "restricted gerbe residual {}", rg.max());
        let fine_bundle =
            Arc::new(restrict_bundle(&conn.bundle, fine_gerbe.clone(), &refinement).unwrap());
        assert!(validate_bundle(&fine_bundle, 6, 43).max() <= 1e-9);
        let fine_conn = restrict_connection(&conn, fine_bundle, &refinement);
        assert!(validate_connection(&fine_conn, 6, 44).max() <= 1e-9);
    }

    /// The off-diagonal-terms relation, derived from connection data alone:
    /// reading -A_ji off the compatibility defect of each pair and combining
    /// the three pairs of a 2-simplex reproduces lambda^{-1} d lambda.
    #[test]
    fn off_diagonal_terms_from_connection_data() {
        let cover = Arc::new(build_torus_cover(2, 3, 0.05).unwrap());
        let (g, alpha) = make_coboundary_gerbe(cover.clone(), 71, &ScalarCoeffs::new());
        let g = Arc::new(g);
        let trivial = Arc::new(GerbeConn::trivial(cover.clone()));
        let (_, base) = TwistedBundle::line(trivial, 1).unwrap();
        let conn = transport_twist(&base, &alpha, g.clone()).unwrap();
        let bundle = &conn.bundle;
        let ctx = EvalCtx::space(2);

        // -A_{ba} . 1 = Gamma_a - g_{ba}^{-1} Gamma_b g_{ba} - g_{ba}^{-1} dg_{ba}
        let defect = |a: u32, b: u32, p_a: &[f64], p_b: &[f64], axis: usize| -> Complex64 {
            let (lo, hi, flip) = if a < b { (a, b, false) } else { (b, a, true) };
            let stored = bundle.g_at(&[lo, hi]).unwrap();
            let anchor_pt = if a < b { p_a } else { p_b };
            let (gv, dg) = eval_mat(stored, anchor_pt, &ctx, 1).unwrap();
            let (gv, dg_a) = if flip {
                // g_{ba} with b < a: invert the stored matrix; for the
                // rank-1 unitary case g^{-1} = conj(g), d(g^{-1}) = conj(dg)
                (
                    gv.dagger(),
                    CMat {
                        n: 1,
                        e: vec![dg[axis].e[0].conj()],
                    },
                )
            } else {
                (gv, dg[axis].clone())
            };
            let zero = ExprMat::zeros(1);
            let ga = conn.gamma[a as usize]
                .get(&vec![axis as u8])
                .unwrap_or(&zero);
            let gb = conn.gamma[b as usize]
                .get(&vec![axis as u8])
                .unwrap_or(&zero);
            let (va, _) = eval_mat(ga, p_a, &ctx, 0).unwrap();
            let (vb, _) = eval_mat(gb, p_b, &ctx, 0).unwrap();
            let g_dag = gv.dagger();
            va.sub(&g_dag.mul(&vb).mul(&gv)).sub(&g_dag.mul(&dg_a)).e[0]
        };

        let mut max = 0.0f64;
        for s in cover.simplices(2).iter().step_by(5) {
            let (i, j, k) = (s.verts[0], s.verts[1], s.verts[2]);
            let lam = g.lambda_at(&s.verts).unwrap();
            for pt in cover.sample_points(s, 6, 72) {
                let (pi, pj, pk) = (pt.coords_of(i), pt.coords_of(j), pt.coords_of(k));
                let jet = crate::calculus::jet::eval_jet(lam, pi, &ctx, 1).unwrap();
                for axis in 0..2 {
                    // A_ji - A_ki + A_kj from the three compatibility defects
                    let a_ji = -defect(i, j, pi, pj, axis);
                    let a_ki = -defect(i, k, pi, pk, axis);
                    let a_kj = -defect(j, k, pj, pk, axis);
                    let lhs = a_ji - a_ki + a_kj;
                    let rhs = jet.grad_at(axis) / jet.value;
                    max = max.max((lhs - rhs).norm());
                }
            }
        }
        assert!(max <= 1e-8, "off-diagonal terms relation: {max}");
    }

    /// tau-pullback of a 0-cochain then delta equals delta then pullback.
    #[test]
    fn refinement_pullback_commutes_with_delta() {
        use crate::deligne::{delta_cochain, FormCochain};
        let cover = Arc::new(build_torus_cover(2, 3, 0.05).unwrap());
        let (fine, refinement) = cover.refine(2).unwrap();
        for seed in 0..10u64 {
            let c = FormCochain::random(&cover, 0, 0, 600 + seed);
            let dc = delta_cochain(&cover, &c).unwrap();
            // pull back to the fine cover: fine chart r carries the data of
            // tau(r) in the same lifted coordinates
            let fine_c = FormCochain {
                cech_q: 0,
                form_p: 0,
                data: fine
                    .simplices(0)
                    .iter()
                    .map(|s| {
                        let t = refinement.tau[s.verts[0] as usize];
                        (s.verts.clone(), c.data.get(&vec![t]).unwrap().clone())
                    })
                    .collect(),
            };
            let d_fine = delta_cochain(&fine, &fine_c).unwrap();
            // compare on fine 1-simplices against the pulled-back coarse delta
            let ctx = crate::calculus::jet::EvalCtx::space(2);
            for s in fine.simplices(1).iter().step_by(11) {
                let (r, sv) = (s.verts[0], s.verts[1]);
                let (ti, tj) = (refinement.tau[r as usize], refinement.tau[sv as usize]);
                let got = d_fine.data.get(&s.verts).unwrap();
                let want = if ti == tj {
                    crate::deligne::ScalarCoeffs::new()
                } else if ti < tj {
                    dc.data.get(&vec![ti, tj]).unwrap().clone()
                } else {
                    crate::deligne::scalar_neg(
                        &crate::deligne::reanchor_scalar(
                            &cover,
                            dc.data.get(&vec![tj, ti]).unwrap(),
                            tj,
                            ti,
                        )
                        .unwrap(),
                    )
                };
                for pt in fine.sample_points(s, 3, seed) {
                    let p = pt.coords_of(s.anchor());
                    let g = got
                        .get(&vec![])
                        .map(|e| crate::calculus::jet::eval_value(e, p, &ctx).unwrap())
                        .unwrap_or_default();
                    let w = want
                        .get(&vec![])
                        .map(|e| crate::calculus::jet::eval_value(e, p, &ctx).unwrap())
                        .unwrap_or_default();
                    assert!((g - w).norm() <= 1e-12, "delta/pullback mismatch");
                }
            }
        }
    }

    #[test]
    fn translation_pullback_preserves_validity() {
        let cover = Arc::new(build_torus_cover(2, 3, 0.05).unwrap());
        let trivial = Arc::new(GerbeConn::trivial(cover.clone()));
        let (_, conn) = TwistedBundle::line(trivial, 2).unwrap();
        let pulled = pullback_translation(&conn, &[1, 0]).unwrap();
        assert!(validate_bundle(&pulled.bundle, 10, 51).max() <= 1e-9);
        assert!(validate_connection(&pulled, 10, 51).max() <= 1e-9);
        // identity translation
        let same = pullback_translation(&conn, &[0, 0]).unwrap();
        let diff = same.gamma_form(0).sub(&conn.gamma_form(0)).unwrap();
        let s = &cover.simplices(0)[7];
        for pt in cover.sample_points(s, 5, 52) {
            assert!(diff.eval(7, pt.coords_of(s.anchor()), 0).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn affine_paths_stay_compatible() {
        let gerbe = t2_gerbe();
        let (_, c0) = TwistedBundle::line(gerbe.clone(), 1).unwrap();
        let c1 = c0.perturb(61, 0.6);
        let path = PathConnection::affine(&c0, &c1, None).unwrap();
        let r = path.validate(8, 5, 62);
        assert!(r.max() <= 1e-9, "path residual {}", r.max());

        // constant path
        let constant = PathConnection::affine(&c0, &c0, None).unwrap();
        assert!(constant.validate(4, 3, 63).max() <= 1e-10);

        // bigon point compatibility: evaluate the bigon connection at a few
        // (s, t) pairs through a restriction of parameters
        let c2 = c0.perturb(64, 0.5);
        let alpha = PathConnection::affine(&c0, &c1, None).unwrap();
        let gamma_via = PathConnection::affine(&c0, &c2, None).unwrap();
        let _ = gamma_via;
        let tau = Expr::powi(
            &Expr::sin(&Expr::mul(&Arc::new(Expr::Pi), &Expr::param(0))),
            2,
        );
        let detour = PathConnection::affine(&c0, &c1, Some(tau)).unwrap();
        let bigon = Bigon::new(&alpha, &detour).unwrap();
        let form = bigon.gamma_form();
        let cvr = &bigon.bundle.cover;
        let s = &cvr.simplices(0)[3];
        let pt = &cvr.sample_points(s, 1, 65)[0];
        let mut p = pt.coords_of(s.anchor()).to_vec();
        p.push(0.3);
        p.push(0.7);
        assert!(form.eval(3, &p, 0).unwrap().max_abs() > 0.0);
    }

    #[test]
    fn gerbe_mismatch_is_rejected() {
        let g1 = t2_gerbe();
        let g2 = t2_gerbe();
        let e1 = TwistedBundle::trivial(g1, 1);
        let e2 = TwistedBundle::trivial(g2, 1);
        assert!(matches!(
            e1.direct_sum(&e2),
            Err(BundleError::GerbeMismatch)
        ));
    }

    use crate::deligne::ScalarCoeffs;
}
