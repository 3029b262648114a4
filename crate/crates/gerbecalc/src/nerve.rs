//! Integer cochain complexes of abstract simplicial complexes, Smith normal
//! form, cohomology with torsion, and integer-cochain solvers used for
//! Dixmier-Douady bookkeeping.
//!
//! Coboundary matrices are exact integer matrices; Smith normal form runs in
//! arbitrary precision so intermediate pivots cannot overflow.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::collections::HashMap;
use thiserror::Error;

use crate::cover::Cover;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NerveError {
    #[error("simplex {0:?} has a face missing from the complex")]
    NotFaceClosed(Vec<u32>),
    #[error("duplicate simplex {0:?}")]
    Duplicate(Vec<u32>),
    #[error("cochain dimension {0} out of range")]
    BadDimension(usize),
    #[error("input is not a cocycle")]
    NotACocycle,
    #[error("complex file line {line}: {message}")]
    BadFile { line: usize, message: String },
    #[error("Dixmier-Douady residual {0} is not within tolerance of an integer")]
    NonIntegral(f64),
    #[error("Dixmier-Douady value not constant over the simplex (branch problem)")]
    BranchInconsistent,
}

/// An abstract simplicial complex with simplices of dimension 0..=3,
/// stored as sorted vertex tuples.
#[derive(Debug, Clone)]
pub struct AbstractComplex {
    pub n_verts: usize,
    pub simplices: [Vec<Vec<u32>>; 4],
    index: [HashMap<Vec<u32>, usize>; 4],
}

impl AbstractComplex {
    pub fn new(n_verts: usize, mut simplices: [Vec<Vec<u32>>; 4]) -> Result<Self, NerveError> {
        for dim in 0..4 {
            for s in simplices[dim].iter_mut() {
                s.sort_unstable();
            }
            simplices[dim].sort();
        }
        let mut index: [HashMap<Vec<u32>, usize>; 4] = Default::default();
        for dim in 0..4 {
            for (k, s) in simplices[dim].iter().enumerate() {
                if index[dim].insert(s.clone(), k).is_some() {
                    return Err(NerveError::Duplicate(s.clone()));
                }
            }
        }
        for dim in 1..4 {
            for s in &simplices[dim] {
                for drop in 0..s.len() {
                    let mut face = s.clone();
                    face.remove(drop);
                    if !index[dim - 1].contains_key(&face) {
                        return Err(NerveError::NotFaceClosed(s.clone()));
                    }
                }
            }
        }
        Ok(AbstractComplex {
            n_verts,
            simplices,
            index,
        })
    }

    /// Closure under faces of a set of top simplices.
    pub fn from_top_simplices(n_verts: usize, top: &[Vec<u32>]) -> Result<Self, NerveError> {
        let mut sets: [std::collections::BTreeSet<Vec<u32>>; 4] = Default::default();
        fn add(sets: &mut [std::collections::BTreeSet<Vec<u32>>; 4], s: &[u32]) {
            if s.is_empty() || s.len() > 4 {
                return;
            }
            let mut v = s.to_vec();
            v.sort_unstable();
            if !sets[v.len() - 1].insert(v.clone()) {
                return;
            }
            for drop in 0..v.len() {
                let mut face = v.clone();
                face.remove(drop);
                add(sets, &face);
            }
        }
        for s in top {
            add(&mut sets, s);
        }
        let simplices = [
            sets[0].iter().cloned().collect(),
            sets[1].iter().cloned().collect(),
            sets[2].iter().cloned().collect(),
            sets[3].iter().cloned().collect(),
        ];
        Self::new(n_verts, simplices)
    }

    /// The nerve of a cover as an abstract complex.
    pub fn from_cover(cover: &Cover) -> Self {
        let simplices = [
            cover.simplices(0).iter().map(|s| s.verts.clone()).collect(),
            cover.simplices(1).iter().map(|s| s.verts.clone()).collect(),
            cover.simplices(2).iter().map(|s| s.verts.clone()).collect(),
            cover.simplices(3).iter().map(|s| s.verts.clone()).collect(),
        ];
        Self::new(cover.n_charts(), simplices).expect("cover nerve is face-closed")
    }

    /// Nerve of the circle covered by three arcs.
    pub fn circle() -> Self {
        Self::from_top_simplices(3, &[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap()
    }

    /// The 6-vertex triangulation of the real projective plane.
    pub fn rp2() -> Self {
        let faces: Vec<Vec<u32>> = [
            [0u32, 1, 2],
            [0, 1, 3],
            [0, 2, 4],
            [0, 3, 5],
            [0, 4, 5],
            [1, 2, 5],
            [1, 3, 4],
            [1, 4, 5],
            [2, 3, 4],
            [2, 3, 5],
        ]
        .iter()
        .map(|f| f.to_vec())
        .collect();
        Self::from_top_simplices(6, &faces).unwrap()
    }

    /// Plain-text loader: one simplex per line as space-separated vertex
    /// indices; lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self, NerveError> {
        let mut top = Vec::new();
        let mut max_v = 0u32;
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut verts = Vec::new();
            for tok in line.split_whitespace() {
                let v: u32 = tok.parse().map_err(|_| NerveError::BadFile {
                    line: k + 1,
                    message: format!("bad vertex index `{tok}`"),
                })?;
                max_v = max_v.max(v);
                verts.push(v);
            }
            if verts.len() > 4 {
                return Err(NerveError::BadFile {
                    line: k + 1,
                    message: "simplices of dimension > 3 are not supported".into(),
                });
            }
            top.push(verts);
        }
        Self::from_top_simplices(max_v as usize + 1, &top)
    }

    pub fn count(&self, q: usize) -> usize {
        self.simplices.get(q).map(|v| v.len()).unwrap_or(0)
    }

    pub fn simplex_index(&self, q: usize, verts: &[u32]) -> Option<usize> {
        self.index.get(q)?.get(verts).copied()
    }
}

/// Integer cochain: one value per q-simplex, in the complex's sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct IntCochain {
    pub q: usize,
    pub values: Vec<BigInt>,
}

impl IntCochain {
    pub fn zero(complex: &AbstractComplex, q: usize) -> Self {
        IntCochain {
            q,
            values: vec![BigInt::zero(); complex.count(q)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }
}

/// Dense integer matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<BigInt>,
}

impl IMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IMat {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.data[k * n + k] = BigInt::one();
        }
        m
    }

    pub fn at(&self, r: usize, c: usize) -> &BigInt {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigInt) {
        let cols = self.cols;
        self.data[r * cols + c] = v;
    }

    pub fn from_i64(rows: usize, cols: usize, entries: &[i64]) -> Self {
        assert_eq!(entries.len(), rows * cols);
        IMat {
            rows,
            cols,
            data: entries.iter().map(|&x| BigInt::from(x)).collect(),
        }
    }

    pub fn mul(&self, other: &IMat) -> IMat {
        assert_eq!(self.cols, other.rows);
        let mut out = IMat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let add = a * other.at(k, c);
                    let cur = out.at(r, c) + add;
                    out.set(r, c, cur);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                let mut acc = BigInt::zero();
                for c in 0..self.cols {
                    acc += self.at(r, c) * &v[c];
                }
                acc
            })
            .collect()
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut m = self.data.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m[k * n + k].is_zero() {
                let swap = (k + 1..n).find(|&r| !m[r * n + k].is_zero());
                match swap {
                    Some(r) => {
                        for c in 0..n {
                            m.swap(k * n + c, r * n + c);
                        }
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j]) / &prev;
                    m[i * n + j] = v;
                }
            }
            prev = m[k * n + k].clone();
        }
        sign * m[(n - 1) * n + (n - 1)].clone()
    }
}

/// Simplicial coboundary from q-cochains to (q+1)-cochains:
/// (delta c)(s) = sum_k (-1)^k c(s with vertex k dropped).
pub fn coboundary_matrix(complex: &AbstractComplex, q: usize) -> IMat {
    let rows = complex.count(q + 1);
    let cols = complex.count(q);
    let mut m = IMat::zeros(rows, cols);
    for (r, s) in complex.simplices[q + 1].iter().enumerate() {
        for drop in 0..s.len() {
            let mut face = s.clone();
            face.remove(drop);
            let c = complex
                .simplex_index(q, &face)
                .expect("face-closed complex");
            let sign = if drop % 2 == 0 { 1 } else { -1 };
            let cur = m.at(r, c) + BigInt::from(sign);
            m.set(r, c, cur);
        }
    }
    m
}

/// Smith normal form data: M = U * D * V with U, V unimodular and D diagonal
/// with a divisibility chain. `u_inv` is maintained alongside so integer
/// systems M x = b reduce to the diagonal.
pub struct Snf {
    pub u: IMat,
    pub d: IMat,
    pub v: IMat,
    pub u_inv: IMat,
}

impl Snf {
    pub fn rank(&self) -> usize {
        (0..self.d.rows.min(self.d.cols))
            .take_while(|&k| !self.d.at(k, k).is_zero())
            .count()
    }

    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.rank()).map(|k| self.d.at(k, k).clone()).collect()
    }
}

struct SnfWork {
    d: IMat,
    p: IMat,
    u: IMat,
    v: IMat,
    v_inv: IMat,
}

impl SnfWork {
    // row op r_i += c * r_j on d, p; inverse column op on u keeps u = p^{-1}
    fn row_addmul(&mut self, i: usize, j: usize, c: &BigInt) {
        for k in 0..self.d.cols {
            let val = self.d.at(i, k) + c * self.d.at(j, k);
            self.d.set(i, k, val);
        }
        for k in 0..self.p.cols {
            let val = self.p.at(i, k) + c * self.p.at(j, k);
            self.p.set(i, k, val);
        }
        for k in 0..self.u.rows {
            let val = self.u.at(k, j) - c * self.u.at(k, i);
            self.u.set(k, j, val);
        }
    }

    fn row_swap(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for k in 0..self.d.cols {
            let (a, b) = (self.d.at(i, k).clone(), self.d.at(j, k).clone());
            self.d.set(i, k, b);
            self.d.set(j, k, a);
        }
        for k in 0..self.p.cols {
            let (a, b) = (self.p.at(i, k).clone(), self.p.at(j, k).clone());
            self.p.set(i, k, b);
            self.p.set(j, k, a);
        }
        for k in 0..self.u.rows {
            let (a, b) = (self.u.at(k, i).clone(), self.u.at(k, j).clone());
            self.u.set(k, i, b);
            self.u.set(k, j, a);
        }
    }

    fn row_negate(&mut self, i: usize) {
        for k in 0..self.d.cols {
            let val = -self.d.at(i, k).clone();
            self.d.set(i, k, val);
        }
        for k in 0..self.p.cols {
            let val = -self.p.at(i, k).clone();
            self.p.set(i, k, val);
        }
        for k in 0..self.u.rows {
            let val = -self.u.at(k, i).clone();
            self.u.set(k, i, val);
        }
    }

    // col op c_j += c * c_i on d; v tracks the inverse row op, v_inv the op
    fn col_addmul(&mut self, j: usize, i: usize, c: &BigInt) {
        for k in 0..self.d.rows {
            let val = self.d.at(k, j) + c * self.d.at(k, i);
            self.d.set(k, j, val);
        }
        for k in 0..self.v.cols {
            let val = self.v.at(i, k) - c * self.v.at(j, k);
            self.v.set(i, k, val);
        }
        for k in 0..self.v_inv.rows {
            let val = self.v_inv.at(k, j) + c * self.v_inv.at(k, i).clone();
            self.v_inv.set(k, j, val);
        }
    }

    fn col_swap(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for k in 0..self.d.rows {
            let (a, b) = (self.d.at(k, i).clone(), self.d.at(k, j).clone());
            self.d.set(k, i, b);
            self.d.set(k, j, a);
        }
        for k in 0..self.v.cols {
            let (a, b) = (self.v.at(i, k).clone(), self.v.at(j, k).clone());
            self.v.set(i, k, b);
            self.v.set(j, k, a);
        }
        for k in 0..self.v_inv.rows {
            let (a, b) = (self.v_inv.at(k, i).clone(), self.v_inv.at(k, j).clone());
            self.v_inv.set(k, i, b);
            self.v_inv.set(k, j, a);
        }
    }
}

/// Smith normal form with exact integer arithmetic.
pub fn smith_normal_form(m: &IMat) -> Snf {
    smith_with_vinv(m).0
}

/// SNF plus V^{-1}, needed to produce explicit solutions of delta x = b.
pub fn smith_with_vinv(m: &IMat) -> (Snf, IMat) {
    let rows = m.rows;
    let cols = m.cols;
    let mut w = SnfWork {
        d: m.clone(),
        p: IMat::identity(rows),
        u: IMat::identity(rows),
        v: IMat::identity(cols),
        v_inv: IMat::identity(cols),
    };

    let nmin = rows.min(cols);
    let mut t = 0usize;
    while t < nmin {
        let mut pivot: Option<(usize, usize)> = None;
        for r in t..rows {
            for c in t..cols {
                if !w.d.at(r, c).is_zero() {
                    let better = match pivot {
                        None => true,
                        Some((pr, pc)) => w.d.at(r, c).abs() < w.d.at(pr, pc).abs(),
                    };
                    if better {
                        pivot = Some((r, c));
                    }
                }
            }
        }
        let (pr, pc) = match pivot {
            None => break,
            Some(x) => x,
        };
        w.row_swap(t, pr);
        w.col_swap(t, pc);
        if w.d.at(t, t).is_negative() {
            w.row_negate(t);
        }

        let mut dirty = false;
        for r in t + 1..rows {
            if !w.d.at(r, t).is_zero() {
                let q = -(w.d.at(r, t) / w.d.at(t, t));
                w.row_addmul(r, t, &q);
                if !w.d.at(r, t).is_zero() {
                    dirty = true;
                }
            }
        }
        for c in t + 1..cols {
            if !w.d.at(t, c).is_zero() {
                let q = -(w.d.at(t, c) / w.d.at(t, t));
                w.col_addmul(c, t, &q);
                if !w.d.at(t, c).is_zero() {
                    dirty = true;
                }
            }
        }
        if dirty {
            continue;
        }
        let mut fixed = true;
        'scan: for r in t + 1..rows {
            for c in t + 1..cols {
                if !(w.d.at(r, c) % w.d.at(t, t)).is_zero() {
                    let one = BigInt::one();
                    w.row_addmul(t, r, &one);
                    fixed = false;
                    break 'scan;
                }
            }
        }
        if fixed {
            t += 1;
        }
    }

    (
        Snf {
            u: w.u,
            d: w.d,
            v: w.v,
            u_inv: w.p,
        },
        w.v_inv,
    )
}

/// Integer cohomology in degree q: free rank and torsion invariant factors.
pub fn cohomology(complex: &AbstractComplex, q: usize) -> Result<(usize, Vec<BigInt>), NerveError> {
    if q > 3 {
        return Err(NerveError::BadDimension(q));
    }
    let n_q = complex.count(q);
    let rank_dq = if q < 3 {
        smith_normal_form(&coboundary_matrix(complex, q)).rank()
    } else {
        0
    };
    let (rank_dprev, torsion) = if q > 0 {
        let snf = smith_normal_form(&coboundary_matrix(complex, q - 1));
        let torsion: Vec<BigInt> = snf
            .invariant_factors()
            .into_iter()
            .filter(|f| f > &BigInt::one())
            .collect();
        (snf.rank(), torsion)
    } else {
        (0, vec![])
    };
    Ok((n_q - rank_dq - rank_dprev, torsion))
}

/// Smallest n >= 1 with n*z a coboundary, or None for infinite order.
pub fn torsion_order(
    complex: &AbstractComplex,
    z: &IntCochain,
) -> Result<Option<BigInt>, NerveError> {
    let q = z.q;
    if q == 0 || q > 3 {
        return Err(NerveError::BadDimension(q));
    }
    if q < 3 {
        let dq = coboundary_matrix(complex, q);
        if !dq.mul_vec(&z.values).iter().all(|x| x.is_zero()) {
            return Err(NerveError::NotACocycle);
        }
    }
    if z.is_zero() {
        return Ok(Some(BigInt::one()));
    }
    let delta = coboundary_matrix(complex, q - 1);
    let snf = smith_normal_form(&delta);
    // n z = delta x  <=>  n * (U^{-1} z) = D (V x)
    let y = snf.u_inv.mul_vec(&z.values);
    let r = snf.rank();
    let mut n = BigInt::one();
    for (k, yk) in y.iter().enumerate() {
        if k < r {
            let dk = snf.d.at(k, k);
            let g = gcd(dk.clone(), yk.abs());
            n = lcm(n, dk / &g);
        } else if !yk.is_zero() {
            return Ok(None);
        }
    }
    Ok(Some(n))
}

/// Solve `delta x = target` over the integers, returning an explicit witness
/// cochain when one exists.
pub fn solve_coboundary(
    complex: &AbstractComplex,
    target: &IntCochain,
) -> Result<Option<IntCochain>, NerveError> {
    let q = target.q;
    if q == 0 || q > 3 {
        return Err(NerveError::BadDimension(q));
    }
    let delta = coboundary_matrix(complex, q - 1);
    let (snf, v_inv) = smith_with_vinv(&delta);
    let y = snf.u_inv.mul_vec(&target.values);
    let r = snf.rank();
    let mut w = vec![BigInt::zero(); delta.cols];
    for (k, yk) in y.iter().enumerate() {
        if k < r {
            let dk = snf.d.at(k, k);
            if !(yk % dk).is_zero() {
                return Ok(None);
            }
            w[k] = yk / dk;
        } else if !yk.is_zero() {
            return Ok(None);
        }
    }
    let x = v_inv.mul_vec(&w);
    debug_assert!(
        delta
            .mul_vec(&x)
            .iter()
            .zip(&target.values)
            .all(|(a, b)| a == b),
        "coboundary solve verification failed"
    );
    Ok(Some(IntCochain {
        q: q - 1,
        values: x,
    }))
}

// ---------------------------------------------------------------------------
// Dixmier-Douady cocycle of a gerbe
// ---------------------------------------------------------------------------

/// Result of the connecting-map extraction: the integer cocycle plus the
/// largest deviation from integrality observed before rounding.
#[derive(Debug, Clone)]
pub struct DdCocycle {
    pub cocycle: IntCochain,
    pub max_deviation: f64,
}

/// The connecting-map image of the gerbe's lambda as an integer 3-cocycle:
/// c = (1 / 2 pi i) (delta log lambda) with a principal-branch log pinned at
/// each simplex's centroid. Since delta lambda = 1 exactly and |lambda| = 1,
/// the sum of the four logs is 2 pi i times an integer; the value must be
/// within 1e-6 of that integer and constant across extra sample points
/// (gerbe generators keep lambda away from the negative real axis so the
/// principal branch is continuous over each intersection).
pub fn dd_cocycle(g: &crate::deligne::GerbeConn) -> Result<IntCochain, NerveError> {
    dd_cocycle_full(g).map(|r| r.cocycle)
}

pub fn dd_cocycle_full(g: &crate::deligne::GerbeConn) -> Result<DdCocycle, NerveError> {
    let cover = &g.cover;
    let complex = AbstractComplex::from_cover(cover);
    let ctx = crate::calculus::jet::EvalCtx::space(cover.dim);
    let mut values = vec![BigInt::zero(); complex.count(3)];
    let mut max_deviation = 0.0f64;
    for s in cover.simplices(3) {
        let idx = complex
            .simplex_index(3, &s.verts)
            .expect("cover simplex in nerve");
        let (i, j, k, l) = (s.verts[0], s.verts[1], s.verts[2], s.verts[3]);
        // faces with alternating exponents, each anchored at its own chart
        let faces: [(Vec<u32>, f64); 4] = [
            (vec![j, k, l], -1.0), // lambda_lkj
            (vec![i, k, l], 1.0),  // lambda_lki
            (vec![i, j, l], -1.0), // lambda_lji
            (vec![i, j, k], 1.0),  // lambda_kji
        ];
        let eval_at = |pt: &crate::cover::SamplePoint| -> Result<f64, NerveError> {
            let mut total = 0.0f64;
            for (face, sign) in &faces {
                let lam = g.lambda_at(face).map_err(|_| NerveError::NotACocycle)?;
                let v = crate::calculus::jet::eval_value(lam, pt.coords_of(face[0]), &ctx)
                    .map_err(|_| NerveError::BranchInconsistent)?;
                total += sign * v.arg();
            }
            Ok(total / (2.0 * std::f64::consts::PI))
        };
        // centroid first, then extra samples
        let centroid_pt = {
            let centroid = s.inter.center();
            let coords = s
                .shifts
                .iter()
                .map(|sh| {
                    centroid
                        .iter()
                        .zip(sh)
                        .map(|(x, k)| x - *k as f64)
                        .collect()
                })
                .collect();
            crate::cover::SamplePoint {
                verts: s.verts.clone(),
                coords,
            }
        };
        let c0 = eval_at(&centroid_pt)?;
        let rounded = c0.round();
        max_deviation = max_deviation.max((c0 - rounded).abs());
        if (c0 - rounded).abs() > 1e-6 {
            return Err(NerveError::NonIntegral((c0 - rounded).abs()));
        }
        for pt in cover.sample_points(s, 5, 0xdd) {
            let c = eval_at(&pt)?;
            max_deviation = max_deviation.max((c - rounded).abs());
            if (c - rounded).abs() > 1e-6 {
                return Err(NerveError::BranchInconsistent);
            }
        }
        values[idx] = BigInt::from(rounded as i64);
    }
    Ok(DdCocycle {
        cocycle: IntCochain { q: 3, values },
        max_deviation,
    })
}

/// Torsion order of the gerbe's Dixmier-Douady class.
pub fn dd_torsion_order(g: &crate::deligne::GerbeConn) -> Result<Option<BigInt>, NerveError> {
    let complex = AbstractComplex::from_cover(&g.cover);
    let z = dd_cocycle(g)?;
    torsion_order(&complex, &z)
}

/// Certify that the DD cocycles of two gerbes on the same cover are
/// cohomologous by solving for an explicit integer 2-cochain.
pub fn dd_cohomologous(
    g1: &crate::deligne::GerbeConn,
    g2: &crate::deligne::GerbeConn,
) -> Result<Option<IntCochain>, NerveError> {
    let complex = AbstractComplex::from_cover(&g1.cover);
    let c1 = dd_cocycle(g1)?;
    let c2 = dd_cocycle(g2)?;
    let diff = IntCochain {
        q: 3,
        values: c1
            .values
            .iter()
            .zip(&c2.values)
            .map(|(a, b)| a - b)
            .collect(),
    };
    if diff.is_zero() {
        return Ok(Some(IntCochain::zero(&complex, 2)));
    }
    solve_coboundary(&complex, &diff)
}

fn gcd(mut a: BigInt, mut b: BigInt) -> BigInt {
    a = a.abs();
    b = b.abs();
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a
}

fn lcm(a: BigInt, b: BigInt) -> BigInt {
    if a.is_zero() || b.is_zero() {
        return BigInt::zero();
    }
    let g = gcd(a.clone(), b.clone());
    (a / g) * b
}
