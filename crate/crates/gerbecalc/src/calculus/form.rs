//! Matrix-valued differential forms on chart domains.
//!
//! A form is a recipe: literal coefficient data (strictly increasing index
//! tuples mapping to matrices of expressions, one table per chart) composed
//! with wedge, exterior derivative, trace, fiber integration, and parameter
//! restriction. Recipes are evaluated pointwise; the exterior derivative is
//! realized by consuming one jet order of the operand rather than by
//! rewriting expressions, so `d` costs exactly one derivative level and two
//! nested `d`s exhaust the second-order jets.
//!
//! Index tuples list `dx` factors in increasing order with path parameters
//! (`t`, then the bigon parameter) occupying the highest slots. Fiber
//! integration uses the trailing-parameter convention: a form decomposes as
//! `w0 + w1 ^ dt` and the fiber integral is the t-integral of `w1`, which
//! for increasing tuples means dropping the trailing `t` index with no sign.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use super::expr::ExprRef;
use super::jet::{eval_jet, EvalCtx, EvalError, Jet};
use super::quad::gauss_legendre_unit;

pub type IdxTuple = Vec<u8>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("matrix size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("ambient dimension mismatch")]
    AmbientMismatch,
    #[error("chart family size mismatch")]
    ChartsMismatch,
    #[error("second-order jets exhausted (three nested derivatives requested)")]
    JetOrderExceeded,
    #[error("operation requires a scalar (size-1) form")]
    NotScalar,
    #[error("exp requires an even-degree form of degree >= 2")]
    OddDegree,
    #[error("form has no path parameter to integrate or restrict")]
    NoParam,
    #[error("chart index {0} out of range")]
    ChartOutOfRange(usize),
    #[error("index tuple not strictly increasing or out of range")]
    BadTuple,
}

/// An n-by-n matrix of expressions, row-major.
#[derive(Debug, Clone)]
pub struct ExprMat {
    pub n: usize,
    pub entries: Vec<ExprRef>,
}

impl ExprMat {
    pub fn new(n: usize, entries: Vec<ExprRef>) -> Self {
        assert_eq!(entries.len(), n * n);
        ExprMat { n, entries }
    }

    pub fn scalar(e: ExprRef) -> Self {
        ExprMat {
            n: 1,
            entries: vec![e],
        }
    }

    pub fn zeros(n: usize) -> Self {
        ExprMat {
            n,
            entries: vec![crate::calculus::expr::Expr::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for k in 0..n {
            m.entries[k * n + k] = crate::calculus::expr::Expr::one();
        }
        m
    }

    pub fn at(&self, r: usize, c: usize) -> &ExprRef {
        &self.entries[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, e: ExprRef) {
        let n = self.n;
        self.entries[r * n + c] = e;
    }

    /// Conjugate transpose, entrywise symbolic conjugation.
    pub fn dagger(&self) -> ExprMat {
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.set(r, c, self.at(c, r).conj());
            }
        }
        out
    }

    pub fn matmul(&self, other: &ExprMat) -> ExprMat {
        use crate::calculus::expr::Expr;
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = Expr::zero();
                for k in 0..n {
                    acc = Expr::add(&acc, &Expr::mul(self.at(r, k), other.at(k, c)));
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(&ExprRef) -> ExprRef) -> ExprMat {
        ExprMat {
            n: self.n,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn block_sum(&self, other: &ExprMat) -> ExprMat {
        let n = self.n + other.n;
        let mut out = Self::zeros(n);
        for r in 0..self.n {
            for c in 0..self.n {
                out.set(r, c, self.at(r, c).clone());
            }
        }
        for r in 0..other.n {
            for c in 0..other.n {
                out.set(self.n + r, self.n + c, other.at(r, c).clone());
            }
        }
        out
    }
}

/// Coefficient table of one chart: strictly increasing tuples to matrices.
pub type ChartCoeffs = BTreeMap<IdxTuple, ExprMat>;

/// Numeric matrix of jets.
#[derive(Debug, Clone)]
pub struct JetMat {
    pub n: usize,
    pub entries: Vec<Jet>,
}

impl JetMat {
    pub fn zeros(n: usize, dim: usize, order: u8) -> Self {
        JetMat {
            n,
            entries: vec![Jet::zero(dim, order); n * n],
        }
    }

    pub fn at(&self, r: usize, c: usize) -> &Jet {
        &self.entries[r * self.n + c]
    }

    fn add_assign(&mut self, other: &JetMat) {
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a = a.add(b);
        }
    }

    fn scale(&self, c: Complex64) -> JetMat {
        JetMat {
            n: self.n,
            entries: self.entries.iter().map(|j| j.scale(c)).collect(),
        }
    }

    fn matmul(&self, other: &JetMat, dim: usize, order: u8) -> JetMat {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = JetMat::zeros(n, dim, order);
        for r in 0..n {
            for c in 0..n {
                let mut acc = Jet::zero(dim, order);
                for k in 0..n {
                    acc = acc.add(&self.at(r, k).mul(other.at(k, c)));
                }
                out.entries[r * n + c] = acc;
            }
        }
        out
    }
}

/// A mixed-degree matrix form evaluated at a point.
#[derive(Debug, Clone)]
pub struct FormValue {
    pub n: usize,
    pub dim: usize,
    pub order: u8,
    pub coeffs: BTreeMap<IdxTuple, JetMat>,
}

impl FormValue {
    pub fn empty(n: usize, dim: usize, order: u8) -> Self {
        FormValue {
            n,
            dim,
            order,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn add(&self, other: &FormValue) -> Result<FormValue, FormError> {
        if self.n != other.n {
            return Err(FormError::SizeMismatch {
                left: self.n,
                right: other.n,
            });
        }
        let order = self.order.min(other.order);
        let mut out = self.clone();
        out.order = order;
        for (k, m) in &other.coeffs {
            match out.coeffs.get_mut(k) {
                Some(existing) => existing.add_assign(m),
                None => {
                    out.coeffs.insert(k.clone(), m.clone());
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> FormValue {
        FormValue {
            n: self.n,
            dim: self.dim,
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, m)| (k.clone(), m.scale(c)))
                .collect(),
        }
    }

    pub fn sub(&self, other: &FormValue) -> Result<FormValue, FormError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Largest coefficient magnitude (values only).
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .values()
            .flat_map(|m| m.entries.iter())
            .map(|j| j.value.norm())
            .fold(0.0, f64::max)
    }

    /// Value of the single scalar coefficient at the given tuple (zero if absent).
    pub fn coeff_value(&self, tuple: &[u8]) -> Complex64 {
        self.coeffs
            .get(tuple)
            .map(|m| m.entries[0].value)
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Restrict to the pure-degree-p part.
    pub fn degree_part(&self, p: usize) -> FormValue {
        FormValue {
            n: self.n,
            dim: self.dim,
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(k, _)| k.len() == p)
                .map(|(k, m)| (k.clone(), m.clone()))
                .collect(),
        }
    }
}

/// Parity sign of merging two disjoint increasing tuples.
fn merge_sign(a: &[u8], b: &[u8]) -> Option<(IdxTuple, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut inversions = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] jumps over the remaining entries of a
            inversions += a.len() - i;
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    let sign = if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    Some((out, sign))
}

/// Insert one index into an increasing tuple; sign counts transpositions.
fn insert_sign(idx: u8, tuple: &[u8]) -> Option<(IdxTuple, f64)> {
    if tuple.contains(&idx) {
        return None;
    }
    let pos = tuple.iter().take_while(|&&x| x < idx).count();
    let mut out = Vec::with_capacity(tuple.len() + 1);
    out.extend_from_slice(&tuple[..pos]);
    out.push(idx);
    out.extend_from_slice(&tuple[pos..]);
    let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
    Some((out, sign))
}

/// Per-evaluation memo table: recipes share subtrees aggressively (wedge
/// powers, curvature inside every ch piece), so one pointwise evaluation of
/// a composite recipe visits the same node repeatedly. Keyed by node
/// identity, chart, point bits, and jet order.
type EvalCache = std::collections::HashMap<(usize, usize, u64, u8), FormValue>;

fn point_key(point: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for x in point {
        h ^= x.to_bits();
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug)]
enum Kernel {
    Lit {
        charts: Vec<ChartCoeffs>,
        size: usize,
    },
    Const {
        size: usize,
        value: Complex64,
    },
    Add(Arc<Kernel>, Arc<Kernel>),
    Scale(Complex64, Arc<Kernel>),
    Wedge(Arc<Kernel>, Arc<Kernel>),
    ExtD(Arc<Kernel>),
    Trace(Arc<Kernel>),
    Broadcast(Arc<Kernel>, usize),
    FiberInt {
        inner: Arc<Kernel>,
        nodes: usize,
    },
    Restrict {
        inner: Arc<Kernel>,
        value: f64,
    },
    Reindex {
        inner: Arc<Kernel>,
        map: Vec<usize>,
    },
}

/// A matrix-valued differential form (possibly of mixed degree) on the chart
/// domains of a cover, or on a single chart domain when `charts() == 1`.
#[derive(Debug, Clone)]
pub struct MatrixForm {
    x_dim: usize,
    n_params: usize,
    size: usize,
    charts: usize,
    degrees: Option<BTreeSet<usize>>,
    kernel: Arc<Kernel>,
}

impl MatrixForm {
    // -- constructors --------------------------------------------------

    pub fn literal(
        x_dim: usize,
        n_params: usize,
        size: usize,
        charts: Vec<ChartCoeffs>,
    ) -> Result<MatrixForm, FormError> {
        let ambient = x_dim + n_params;
        let mut degrees = BTreeSet::new();
        for table in &charts {
            for (tuple, mat) in table {
                if mat.n != size {
                    return Err(FormError::SizeMismatch {
                        left: mat.n,
                        right: size,
                    });
                }
                if !tuple.windows(2).all(|w| w[0] < w[1])
                    || tuple.iter().any(|&k| k as usize >= ambient)
                {
                    return Err(FormError::BadTuple);
                }
                degrees.insert(tuple.len());
            }
        }
        let n_charts = charts.len();
        Ok(MatrixForm {
            x_dim,
            n_params,
            size,
            charts: n_charts,
            degrees: Some(degrees),
            kernel: Arc::new(Kernel::Lit { charts, size }),
        })
    }

    /// Single-chart literal form.
    pub fn literal_single(
        x_dim: usize,
        n_params: usize,
        size: usize,
        coeffs: ChartCoeffs,
    ) -> Result<MatrixForm, FormError> {
        Self::literal(x_dim, n_params, size, vec![coeffs])
    }

    /// Constant multiple of the identity as a 0-form.
    pub fn constant(
        x_dim: usize,
        n_params: usize,
        size: usize,
        charts: usize,
        value: Complex64,
    ) -> MatrixForm {
        MatrixForm {
            x_dim,
            n_params,
            size,
            charts,
            degrees: Some([0usize].into_iter().collect()),
            kernel: Arc::new(Kernel::Const { size, value }),
        }
    }

    pub fn zero(x_dim: usize, n_params: usize, size: usize, charts: usize) -> MatrixForm {
        Self::constant(x_dim, n_params, size, charts, Complex64::new(0.0, 0.0))
    }

    // -- metadata ------------------------------------------------------

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ambient(&self) -> usize {
        self.x_dim + self.n_params
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn charts(&self) -> usize {
        self.charts
    }

    pub fn degrees(&self) -> Option<&BTreeSet<usize>> {
        self.degrees.as_ref()
    }

    fn check_aligned(&self, other: &MatrixForm) -> Result<(), FormError> {
        if self.x_dim != other.x_dim || self.n_params != other.n_params {
            return Err(FormError::AmbientMismatch);
        }
        if self.charts != other.charts {
            return Err(FormError::ChartsMismatch);
        }
        Ok(())
    }

    // -- algebra -------------------------------------------------------

    pub fn add(&self, other: &MatrixForm) -> Result<MatrixForm, FormError> {
        self.check_aligned(other)?;
        if self.size != other.size {
            return Err(FormError::SizeMismatch {
                left: self.size,
                right: other.size,
            });
        }
        let degrees = match (&self.degrees, &other.degrees) {
            (Some(a), Some(b)) => Some(a.union(b).copied().collect()),
            _ => None,
        };
        Ok(MatrixForm {
            x_dim: self.x_dim,
            n_params: self.n_params,
            size: self.size,
            charts: self.charts,
            degrees,
            kernel: Arc::new(Kernel::Add(self.kernel.clone(), other.kernel.clone())),
        })
    }

    pub fn scale(&self, c: Complex64) -> MatrixForm {
        MatrixForm {
            degrees: self.degrees.clone(),
            kernel: Arc::new(Kernel::Scale(c, self.kernel.clone())),
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &MatrixForm) -> Result<MatrixForm, FormError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Wedge product with matrix multiplication on coefficients.
    pub fn wedge(&self, other: &MatrixForm) -> Result<MatrixForm, FormError> {
        self.check_aligned(other)?;
        if self.size != other.size {
            return Err(FormError::SizeMismatch {
                left: self.size,
                right: other.size,
            });
        }
        let ambient = self.ambient();
        let degrees = match (&self.degrees, &other.degrees) {
            (Some(a), Some(b)) => Some(
                a.iter()
                    .flat_map(|x| b.iter().map(move |y| x + y))
                    .filter(|d| *d <= ambient)
                    .collect(),
            ),
            _ => None,
        };
        Ok(MatrixForm {
            x_dim: self.x_dim,
            n_params: self.n_params,
            size: self.size,
            charts: self.charts,
            degrees,
            kernel: Arc::new(Kernel::Wedge(self.kernel.clone(), other.kernel.clone())),
        })
    }

    pub fn wedge_pow(&self, r: usize) -> Result<MatrixForm, FormError> {
        if r == 0 {
            return Ok(MatrixForm::constant(
                self.x_dim,
                self.n_params,
                self.size,
                self.charts,
                Complex64::new(1.0, 0.0),
            ));
        }
        let mut acc = self.clone();
        for _ in 1..r {
            acc = acc.wedge(self)?;
        }
        Ok(acc)
    }

    /// Exterior derivative; coefficients come out of the operand's jets.
    pub fn exterior_d(&self) -> MatrixForm {
        let ambient = self.ambient();
        MatrixForm {
            degrees: self
                .degrees
                .as_ref()
                .map(|s| s.iter().map(|d| d + 1).filter(|d| *d <= ambient).collect()),
            kernel: Arc::new(Kernel::ExtD(self.kernel.clone())),
            ..self.clone()
        }
    }

    pub fn trace_form(&self) -> MatrixForm {
        MatrixForm {
            size: 1,
            degrees: self.degrees.clone(),
            kernel: Arc::new(Kernel::Trace(self.kernel.clone())),
            ..self.clone()
        }
    }

    /// Scalar form times identity of size `n`.
    pub fn broadcast(&self, n: usize) -> Result<MatrixForm, FormError> {
        if self.size != 1 {
            return Err(FormError::NotScalar);
        }
        Ok(MatrixForm {
            size: n,
            degrees: self.degrees.clone(),
            kernel: Arc::new(Kernel::Broadcast(self.kernel.clone(), n)),
            ..self.clone()
        })
    }

    /// Truncated exponential sum(xi^r / r!) of a scalar even form.
    pub fn exp_even(&self, top_dim: usize) -> Result<MatrixForm, FormError> {
        if self.size != 1 {
            return Err(FormError::NotScalar);
        }
        let min_deg = match &self.degrees {
            Some(set) => {
                if set.iter().any(|d| d % 2 != 0 || *d == 0) {
                    return Err(FormError::OddDegree);
                }
                set.iter().copied().next().unwrap_or(2).max(2)
            }
            None => 2,
        };
        let r_max = top_dim / min_deg;
        let mut acc = MatrixForm::constant(
            self.x_dim,
            self.n_params,
            1,
            self.charts,
            Complex64::new(1.0, 0.0),
        );
        let mut fact = 1.0f64;
        for r in 1..=r_max {
            fact *= r as f64;
            let term = self.wedge_pow(r)?.scale(Complex64::new(1.0 / fact, 0.0));
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// Integrate along the last path parameter with an n-node Gauss-Legendre
    /// rule; the trailing `dt` factor is consumed.
    pub fn fiber_integrate(&self, nodes: usize) -> Result<MatrixForm, FormError> {
        if self.n_params == 0 {
            return Err(FormError::NoParam);
        }
        Ok(MatrixForm {
            n_params: self.n_params - 1,
            degrees: self
                .degrees
                .as_ref()
                .map(|s| s.iter().filter(|d| **d > 0).map(|d| d - 1).collect()),
            kernel: Arc::new(Kernel::FiberInt {
                inner: self.kernel.clone(),
                nodes,
            }),
            ..self.clone()
        })
    }

    /// Re-route chart indices: chart c of the result evaluates chart
    /// `map[c]` of the operand (used when restricting a chart family to a
    /// refined cover whose boxes share the coarse lifted coordinates).
    pub fn reindex_charts(&self, map: Vec<usize>) -> MatrixForm {
        let charts = map.len();
        MatrixForm {
            charts,
            degrees: self.degrees.clone(),
            kernel: Arc::new(Kernel::Reindex {
                inner: self.kernel.clone(),
                map,
            }),
            ..self.clone()
        }
    }

    /// Restrict the last path parameter to a constant; `dt`-terms drop.
    pub fn restrict_param(&self, value: f64) -> Result<MatrixForm, FormError> {
        if self.n_params == 0 {
            return Err(FormError::NoParam);
        }
        Ok(MatrixForm {
            n_params: self.n_params - 1,
            degrees: self.degrees.clone(),
            kernel: Arc::new(Kernel::Restrict {
                inner: self.kernel.clone(),
                value,
            }),
            ..self.clone()
        })
    }

    // -- evaluation ----------------------------------------------------

    pub fn eval(&self, chart: usize, point: &[f64], order: u8) -> Result<FormValue, FormError> {
        if chart >= self.charts {
            return Err(FormError::ChartOutOfRange(chart));
        }
        let ctx = EvalCtx::with_params(self.x_dim, self.n_params);
        debug_assert_eq!(point.len(), ctx.ambient());
        let mut cache = EvalCache::new();
        eval_kernel(&self.kernel, chart, point, &ctx, order, &mut cache)
    }
}

fn eval_kernel(
    kernel: &Kernel,
    chart: usize,
    point: &[f64],
    ctx: &EvalCtx,
    order: u8,
    cache: &mut EvalCache,
) -> Result<FormValue, FormError> {
    if order > 2 {
        return Err(FormError::JetOrderExceeded);
    }
    let cacheable = !matches!(kernel, Kernel::Const { .. });
    let key = (
        kernel as *const Kernel as usize,
        chart,
        point_key(point),
        order,
    );
    if cacheable {
        if let Some(hit) = cache.get(&key) {
            return Ok(hit.clone());
        }
    }
    let out = eval_kernel_inner(kernel, chart, point, ctx, order, cache)?;
    if cacheable {
        cache.insert(key, out.clone());
    }
    Ok(out)
}

fn eval_kernel_inner(
    kernel: &Kernel,
    chart: usize,
    point: &[f64],
    ctx: &EvalCtx,
    order: u8,
    cache: &mut EvalCache,
) -> Result<FormValue, FormError> {
    let dim = ctx.ambient();
    match kernel {
        Kernel::Lit { charts, size } => {
            let table = charts.get(chart).ok_or(FormError::ChartOutOfRange(chart))?;
            let mut out = FormValue::empty(*size, dim, order);
            for (tuple, mat) in table {
                let mut jm = JetMat::zeros(*size, dim, order);
                for (k, e) in mat.entries.iter().enumerate() {
                    jm.entries[k] = eval_jet(e, point, ctx, order)?;
                }
                out.coeffs.insert(tuple.clone(), jm);
            }
            Ok(out)
        }
        Kernel::Const { size, value, .. } => {
            let mut out = FormValue::empty(*size, dim, order);
            if *size > 0 && *value != Complex64::new(0.0, 0.0) {
                let mut jm = JetMat::zeros(*size, dim, order);
                for k in 0..*size {
                    jm.entries[k * size + k] = Jet::constant(*value, dim, order);
                }
                out.coeffs.insert(Vec::new(), jm);
            }
            Ok(out)
        }
        Kernel::Add(a, b) => {
            let va = eval_kernel(a, chart, point, ctx, order, cache)?;
            let vb = eval_kernel(b, chart, point, ctx, order, cache)?;
            va.add(&vb)
        }
        Kernel::Scale(c, a) => Ok(eval_kernel(a, chart, point, ctx, order, cache)?.scale(*c)),
        Kernel::Wedge(a, b) => {
            let va = eval_kernel(a, chart, point, ctx, order, cache)?;
            let vb = eval_kernel(b, chart, point, ctx, order, cache)?;
            let n = va.n;
            let mut out = FormValue::empty(n, dim, order);
            for (ta, ma) in &va.coeffs {
                for (tb, mb) in &vb.coeffs {
                    if let Some((tuple, sign)) = merge_sign(ta, tb) {
                        if tuple.len() > dim {
                            continue;
                        }
                        let prod = ma.matmul(mb, dim, order).scale(Complex64::new(sign, 0.0));
                        match out.coeffs.get_mut(&tuple) {
                            Some(existing) => existing.add_assign(&prod),
                            None => {
                                out.coeffs.insert(tuple, prod);
                            }
                        }
                    }
                }
            }
            Ok(out)
        }
        Kernel::ExtD(a) => {
            if order >= 2 {
                return Err(FormError::JetOrderExceeded);
            }
            let va = eval_kernel(a, chart, point, ctx, order + 1, cache)?;
            let n = va.n;
            let mut out = FormValue::empty(n, dim, order);
            for (tuple, mat) in &va.coeffs {
                for k in 0..dim as u8 {
                    if let Some((target, sign)) = insert_sign(k, tuple) {
                        let mut jm = JetMat::zeros(n, dim, order);
                        for (idx, jet) in mat.entries.iter().enumerate() {
                            jm.entries[idx] = differentiate_jet(jet, k as usize, order)
                                .scale(Complex64::new(sign, 0.0));
                        }
                        match out.coeffs.get_mut(&target) {
                            Some(existing) => existing.add_assign(&jm),
                            None => {
                                out.coeffs.insert(target, jm);
                            }
                        }
                    }
                }
            }
            Ok(out)
        }
        Kernel::Trace(a) => {
            let va = eval_kernel(a, chart, point, ctx, order, cache)?;
            let mut out = FormValue::empty(1, dim, order);
            for (tuple, mat) in &va.coeffs {
                let mut acc = Jet::zero(dim, order);
                for k in 0..mat.n {
                    acc = acc.add(mat.at(k, k));
                }
                out.coeffs.insert(
                    tuple.clone(),
                    JetMat {
                        n: 1,
                        entries: vec![acc],
                    },
                );
            }
            Ok(out)
        }
        Kernel::Broadcast(a, n) => {
            let va = eval_kernel(a, chart, point, ctx, order, cache)?;
            let mut out = FormValue::empty(*n, dim, order);
            for (tuple, mat) in &va.coeffs {
                let scalar = &mat.entries[0];
                let mut jm = JetMat::zeros(*n, dim, order);
                for k in 0..*n {
                    jm.entries[k * n + k] = scalar.clone();
                }
                out.coeffs.insert(tuple.clone(), jm);
            }
            Ok(out)
        }
        Kernel::FiberInt { inner, nodes } => {
            let inner_ctx = EvalCtx::with_params(ctx.x_dim, ctx.n_params + 1);
            let t_slot = inner_ctx.ambient() - 1;
            let rule = gauss_legendre_unit(*nodes);
            let mut out: Option<FormValue> = None;
            let mut extended = Vec::with_capacity(point.len() + 1);
            for (tq, wq) in rule {
                extended.clear();
                extended.extend_from_slice(point);
                extended.push(tq);
                let v = eval_kernel(inner, chart, &extended, &inner_ctx, order, cache)?;
                let restricted =
                    strip_last_param(&v, t_slot, dim, order, true).scale(Complex64::new(wq, 0.0));
                out = Some(match out {
                    None => restricted,
                    Some(acc) => acc.add(&restricted)?,
                });
            }
            Ok(out.unwrap())
        }
        Kernel::Restrict { inner, value } => {
            let inner_ctx = EvalCtx::with_params(ctx.x_dim, ctx.n_params + 1);
            let t_slot = inner_ctx.ambient() - 1;
            let mut extended = Vec::with_capacity(point.len() + 1);
            extended.extend_from_slice(point);
            extended.push(*value);
            let v = eval_kernel(inner, chart, &extended, &inner_ctx, order, cache)?;
            Ok(strip_last_param(&v, t_slot, dim, order, false))
        }
        Kernel::Reindex { inner, map } => {
            let target = *map.get(chart).ok_or(FormError::ChartOutOfRange(chart))?;
            eval_kernel(inner, target, point, ctx, order, cache)
        }
    }
}

/// Drop the highest parameter slot from a value: either keep only tuples
/// containing it (fiber integration, trailing factor) or only tuples without
/// it (restriction). Jets are truncated to the remaining variables.
fn strip_last_param(
    v: &FormValue,
    t_slot: usize,
    out_dim: usize,
    order: u8,
    keep_t_tuples: bool,
) -> FormValue {
    let mut out = FormValue::empty(v.n, out_dim, order);
    for (tuple, mat) in &v.coeffs {
        let has_t = tuple.last() == Some(&(t_slot as u8));
        if has_t != keep_t_tuples {
            continue;
        }
        let new_tuple: IdxTuple = if keep_t_tuples {
            tuple[..tuple.len() - 1].to_vec()
        } else {
            tuple.clone()
        };
        let entries = mat
            .entries
            .iter()
            .map(|j| truncate_jet(j, out_dim))
            .collect();
        out.coeffs.insert(new_tuple, JetMat { n: mat.n, entries });
    }
    out
}

fn truncate_jet(j: &Jet, out_dim: usize) -> Jet {
    Jet {
        dim: out_dim,
        value: j.value,
        grad: j.grad.as_ref().map(|g| g[..out_dim].to_vec()),
        hess: j.hess.as_ref().map(|h| {
            let mut out = Vec::with_capacity(out_dim * out_dim);
            for r in 0..out_dim {
                for c in 0..out_dim {
                    out.push(h[r * j.dim + c]);
                }
            }
            out
        }),
    }
}

/// Partial derivative of a jet: value from grad, grad from hess.
fn differentiate_jet(j: &Jet, k: usize, order: u8) -> Jet {
    let dim = j.dim;
    Jet {
        dim,
        value: j.grad_at(k),
        grad: (order >= 1).then(|| (0..dim).map(|l| j.hess_at(k, l)).collect()),
        hess: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::expr::{parse_expr, Expr};

    fn scalar_form(x_dim: usize, n_params: usize, terms: &[(&[u8], &str)]) -> MatrixForm {
        let mut coeffs = ChartCoeffs::new();
        for (tuple, text) in terms {
            coeffs.insert(tuple.to_vec(), ExprMat::scalar(parse_expr(text).unwrap()));
        }
        MatrixForm::literal_single(x_dim, n_params, 1, coeffs).unwrap()
    }

    #[test]
    fn wedge_antisymmetry_of_coordinate_forms() {
        // dx1 ^ dx2 = -(dx2 ^ dx1)
        let dx1 = scalar_form(2, 0, &[(&[0], "1")]);
        let dx2 = scalar_form(2, 0, &[(&[1], "1")]);
        let ab = dx1.wedge(&dx2).unwrap();
        let ba = dx2.wedge(&dx1).unwrap();
        let p = [0.3, 0.4];
        let va = ab.eval(0, &p, 0).unwrap();
        let vb = ba.eval(0, &p, 0).unwrap();
        let sum = va.add(&vb).unwrap();
        assert!(sum.max_abs() < 1e-15);
        assert!((va.coeff_value(&[0, 1]).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matrix_wedge_places_product_at_merged_tuple() {
        // (M dx1) ^ (N dx2) has coefficient M*N at (1,2)
        let m = ExprMat::new(
            2,
            vec![
                Expr::real(1.0),
                Expr::real(2.0),
                Expr::real(3.0),
                Expr::real(4.0),
            ],
        );
        let n = ExprMat::new(
            2,
            vec![
                Expr::real(0.0),
                Expr::real(1.0),
                Expr::real(1.0),
                Expr::real(0.0),
            ],
        );
        let mut ca = ChartCoeffs::new();
        ca.insert(vec![0], m);
        let a = MatrixForm::literal_single(2, 0, 2, ca).unwrap();
        let mut cb = ChartCoeffs::new();
        cb.insert(vec![1], n);
        let b = MatrixForm::literal_single(2, 0, 2, cb).unwrap();
        let v = a.wedge(&b).unwrap().eval(0, &[0.1, 0.9], 0).unwrap();
        let jm = v.coeffs.get(&vec![0, 1]).unwrap();
        // M*N = [[2,1],[4,3]]
        assert!((jm.at(0, 0).value.re - 2.0).abs() < 1e-15);
        assert!((jm.at(0, 1).value.re - 1.0).abs() < 1e-15);
        assert!((jm.at(1, 0).value.re - 4.0).abs() < 1e-15);
        assert!((jm.at(1, 1).value.re - 3.0).abs() < 1e-15);
    }

    #[test]
    fn exterior_d_of_x1_dx2() {
        let a = scalar_form(2, 0, &[(&[1], "x1")]);
        let d = a.exterior_d();
        let v = d.eval(0, &[0.7, 0.2], 0).unwrap();
        assert!((v.coeff_value(&[0, 1]).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn d_squared_vanishes_pointwise() {
        let f = scalar_form(2, 0, &[(&[], "sin(2*pi*x1)*cos(2*pi*x2)")]);
        let dd = f.exterior_d().exterior_d();
        let mut max = 0.0f64;
        for k in 0..100 {
            let p = [0.01 * k as f64, (0.37 * k as f64).fract()];
            max = max.max(dd.eval(0, &p, 0).unwrap().max_abs());
        }
        assert!(max <= 1e-10, "d^2 residual {max}");
    }

    /// Central-difference oracle for the exterior derivative.
    #[test]
    fn exterior_d_matches_finite_differences() {
        let a = scalar_form(
            2,
            0,
            &[(&[0], "sin(2*pi*x1)*cos(2*pi*x2)"), (&[1], "cos(2*pi*x1)")],
        );
        let d = a.exterior_d();
        let h = 1e-5;
        let p = [0.21, 0.43];
        let eval_coeff = |pt: &[f64], tuple: &[u8]| a.eval(0, pt, 0).unwrap().coeff_value(tuple);
        // d(a)_{12} = d1 a_2 - d2 a_1
        let d1a2 =
            (eval_coeff(&[p[0] + h, p[1]], &[1]) - eval_coeff(&[p[0] - h, p[1]], &[1])) / (2.0 * h);
        let d2a1 =
            (eval_coeff(&[p[0], p[1] + h], &[0]) - eval_coeff(&[p[0], p[1] - h], &[0])) / (2.0 * h);
        let expected = d1a2 - d2a1;
        let got = d.eval(0, &p, 0).unwrap().coeff_value(&[0, 1]);
        assert!((got - expected).norm() < 1e-6, "{got} vs {expected}");
    }

    /// Naive double-loop oracle: expand the wedge over all index pairs with
    /// explicit permutation signs and compare.
    #[test]
    fn matrix_wedge_matches_double_loop_expansion() {
        use num_complex::Complex64 as C;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let dim = 3usize;
        let n = 2usize;
        let mut rand_one_form = || {
            let mut c = ChartCoeffs::new();
            for a in 0..dim {
                let entries = (0..n * n)
                    .map(|_| {
                        Expr::constant(C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    })
                    .collect();
                c.insert(vec![a as u8], ExprMat::new(n, entries));
            }
            c
        };
        let ca = rand_one_form();
        let cb = rand_one_form();
        let a = MatrixForm::literal_single(dim, 0, n, ca.clone()).unwrap();
        let b = MatrixForm::literal_single(dim, 0, n, cb.clone()).unwrap();
        let got = a.wedge(&b).unwrap().eval(0, &[0.1, 0.2, 0.3], 0).unwrap();

        // oracle: (a ^ b)_{uv} = sum over p < q of (A_p B_q - A_q B_p) at (p,q)
        let ctx = crate::calculus::jet::EvalCtx::space(dim);
        let value_of = |m: &ExprMat, r: usize, c: usize| {
            crate::calculus::jet::eval_value(m.at(r, c), &[0.1, 0.2, 0.3], &ctx).unwrap()
        };
        let matmul = |x: &ExprMat, y: &ExprMat, r: usize, c: usize| -> C {
            (0..n).map(|k| value_of(x, r, k) * value_of(y, k, c)).sum()
        };
        for p in 0..dim as u8 {
            for q in (p + 1)..dim as u8 {
                let ma = ca.get(&vec![p]).unwrap();
                let mb = cb.get(&vec![q]).unwrap();
                let ma2 = ca.get(&vec![q]).unwrap();
                let mb2 = cb.get(&vec![p]).unwrap();
                let jm = got.coeffs.get(&vec![p, q]).unwrap();
                for r in 0..n {
                    for c in 0..n {
                        let want = matmul(ma, mb, r, c) - matmul(ma2, mb2, r, c);
                        assert!(
                            (jm.at(r, c).value - want).norm() <= 1e-12,
                            "entry ({r},{c}) at ({p},{q})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn trace_of_identity_and_rank_zero() {
        let id3 = MatrixForm::constant(2, 0, 3, 1, Complex64::new(1.0, 0.0));
        let tr = id3.trace_form();
        let v = tr.eval(0, &[0.5, 0.5], 0).unwrap();
        assert!((v.coeff_value(&[]).re - 3.0).abs() < 1e-15);

        let zero_rank = MatrixForm::literal_single(2, 0, 0, ChartCoeffs::new()).unwrap();
        let v = zero_rank.trace_form().eval(0, &[0.5, 0.5], 0).unwrap();
        assert!(v.max_abs() < 1e-15);
    }

    #[test]
    fn trace_cyclicity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut rand_mat = || {
                ExprMat::new(
                    3,
                    (0..9)
                        .map(|_| {
                            Expr::constant(Complex64::new(
                                rng.gen_range(-1.0..1.0),
                                rng.gen_range(-1.0..1.0),
                            ))
                        })
                        .collect(),
                )
            };
            let (ma, mb) = (rand_mat(), rand_mat());
            let mk = |m: ExprMat| {
                let mut c = ChartCoeffs::new();
                c.insert(vec![], m);
                MatrixForm::literal_single(1, 0, 3, c).unwrap()
            };
            let (a, b) = (mk(ma), mk(mb));
            let ab = a.wedge(&b).unwrap().trace_form();
            let ba = b.wedge(&a).unwrap().trace_form();
            let p = [0.4];
            let r = ab
                .eval(0, &p, 0)
                .unwrap()
                .sub(&ba.eval(0, &p, 0).unwrap())
                .unwrap()
                .max_abs();
            assert!(r <= 1e-12);
        }
    }

    #[test]
    fn exp_even_truncates_by_dimension() {
        // On a 2-torus exp(xi) = 1 + xi exactly.
        let xi = scalar_form(2, 0, &[(&[0, 1], "sin(2*pi*x1)")]);
        let e = xi.exp_even(2).unwrap();
        let p = [0.13, 0.77];
        let v = e.eval(0, &p, 0).unwrap();
        let xi_v = xi.eval(0, &p, 0).unwrap();
        assert!((v.coeff_value(&[]).re - 1.0).abs() < 1e-15);
        assert!((v.coeff_value(&[0, 1]) - xi_v.coeff_value(&[0, 1])).norm() < 1e-15);

        let zero2 = MatrixForm::literal_single(2, 0, 1, {
            let mut c = ChartCoeffs::new();
            c.insert(vec![0, 1], ExprMat::scalar(Expr::zero()));
            c
        })
        .unwrap();
        let e = zero2.exp_even(2).unwrap();
        let v = e.eval(0, &p, 0).unwrap();
        assert!((v.coeff_value(&[]).re - 1.0).abs() < 1e-15);
        assert!(v.coeff_value(&[0, 1]).norm() < 1e-15);
    }

    #[test]
    fn exp_even_rejects_odd_degree() {
        let odd = scalar_form(2, 0, &[(&[0], "1")]);
        assert!(matches!(odd.exp_even(2), Err(FormError::OddDegree)));
    }

    #[test]
    fn fiber_integration_basics() {
        // t dt -> 1/2
        let a = scalar_form(1, 1, &[(&[1], "t")]);
        let v = a.fiber_integrate(16).unwrap().eval(0, &[0.3], 0).unwrap();
        assert!((v.coeff_value(&[]).re - 0.5).abs() < 1e-14);

        // sin(2 pi t) dt -> 0
        let a = scalar_form(1, 1, &[(&[1], "sin(2*pi*t)")]);
        let v = a.fiber_integrate(16).unwrap().eval(0, &[0.3], 0).unwrap();
        assert!(v.max_abs() < 1e-12);
    }

    /// Closed-form oracle: the trailing-dt convention makes
    /// int(t^2 dx1 ^ dt) = (int_0^1 t^2 dt) dx1 = (1/3) dx1.
    #[test]
    fn fiber_integration_with_spatial_factor() {
        let a = scalar_form(1, 1, &[(&[0, 1], "t^2")]);
        let v = a.fiber_integrate(16).unwrap().eval(0, &[0.3], 0).unwrap();
        assert!((v.coeff_value(&[0]).re - (1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn degree_zero_input_integrates_to_zero() {
        let a = scalar_form(1, 1, &[(&[], "t")]);
        let v = a.fiber_integrate(8).unwrap().eval(0, &[0.1], 0).unwrap();
        assert!(v.max_abs() < 1e-15);
    }

    #[test]
    fn quadrature_node_doubling_is_stable() {
        let a = scalar_form(1, 1, &[(&[1], "exp(cos(2*pi*t))*sin(2*pi*x1)")]);
        let p = [0.37];
        let v16 = a.fiber_integrate(16).unwrap().eval(0, &p, 0).unwrap();
        let v32 = a.fiber_integrate(32).unwrap().eval(0, &p, 0).unwrap();
        assert!(v16.sub(&v32).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn leibniz_rule() {
        let a = scalar_form(2, 0, &[(&[0], "sin(2*pi*x1)")]);
        let b = scalar_form(2, 0, &[(&[1], "cos(2*pi*x2)"), (&[], "x1")]);
        let lhs = a.wedge(&b).unwrap().exterior_d();
        // da ^ b + (-1)^1 a ^ db   (a is pure degree 1)
        let rhs = a
            .exterior_d()
            .wedge(&b)
            .unwrap()
            .sub(&a.wedge(&b.exterior_d()).unwrap())
            .unwrap();
        let p = [0.21, 0.83];
        let r = lhs
            .eval(0, &p, 0)
            .unwrap()
            .sub(&rhs.eval(0, &p, 0).unwrap())
            .unwrap()
            .max_abs();
        assert!(r <= 1e-9, "Leibniz residual {r}");
    }

    #[test]
    fn wedge_size_mismatch_is_an_error() {
        let a = MatrixForm::constant(1, 0, 2, 1, Complex64::new(1.0, 0.0));
        let b = MatrixForm::constant(1, 0, 3, 1, Complex64::new(1.0, 0.0));
        assert!(matches!(a.wedge(&b), Err(FormError::SizeMismatch { .. })));
    }
}
