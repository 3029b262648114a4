//! Good grid covers of flat tori T^d and their nerves.
//!
//! The torus is R^d / Z^d. A cover of grid size N places one open box per
//! grid cell, with side 1/N + 2*margin centered at (m + 1/2)/N. The margin
//! bound m < (1/2 - 1/N)/2 keeps the sum of two box sides below one period,
//! so every nonempty intersection is a single box: the cover is good.
//!
//! Chart-to-chart transitions are lattice translations. For charts a, b
//! meeting on the torus there is a unique integer vector s(a,b) with
//! x_a = x_b + s(a,b) on the overlap, where x_a denotes the lift of a point
//! into chart a's box. Cochain data on a simplex is stored in the
//! coordinates of its anchor chart (the smallest vertex index).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

use crate::seeding::mix_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error("dimension must be 1..=3, got {0}")]
    BadDim(usize),
    #[error("grid must be at least 3, got {0}")]
    BadGrid(usize),
    #[error("margin {margin} outside (0, {bound})")]
    MarginOutOfRange { margin: f64, bound: f64 },
    #[error("simplex is not in the nerve")]
    NoSuchSimplex,
    #[error("charts {0} and {1} do not overlap")]
    NoOverlap(u32, u32),
    #[error("translation is not grid-compatible")]
    BadTranslation,
}

/// Open axis-aligned box in lifted coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxNd {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxNd {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| *h - *l <= 1e-12)
    }

    pub fn intersect(&self, other: &BoxNd) -> BoxNd {
        BoxNd {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.max(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.min(*b))
                .collect(),
        }
    }

    pub fn translate(&self, v: &[f64]) -> BoxNd {
        BoxNd {
            lo: self.lo.iter().zip(v).map(|(a, b)| a + b).collect(),
            hi: self.hi.iter().zip(v).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn translate_int(&self, v: &[i64]) -> BoxNd {
        self.translate(&v.iter().map(|&k| k as f64).collect::<Vec<_>>())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(p)
            .all(|((l, h), x)| *l < *x && *x < *h)
    }

    pub fn contains_box(&self, other: &BoxNd) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| *a <= *b + 1e-12)
            && self.hi.iter().zip(&other.hi).all(|(a, b)| *a + 1e-12 >= *b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    fn shrink(&self, frac: f64) -> BoxNd {
        BoxNd {
            lo: self
                .lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| l + frac * (h - l))
                .collect(),
            hi: self
                .lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| h - frac * (h - l))
                .collect(),
        }
    }
}

/// A nerve simplex: sorted chart indices, the intersection box in anchor
/// coordinates, and the translation identifying each member chart's
/// coordinates with the anchor's: x_{verts[k]} = x_anchor - shifts[k].
#[derive(Debug, Clone)]
pub struct Simplex {
    pub verts: Vec<u32>,
    pub inter: BoxNd,
    pub shifts: Vec<Vec<i64>>,
}

impl Simplex {
    pub fn anchor(&self) -> u32 {
        self.verts[0]
    }

    pub fn dim(&self) -> usize {
        self.verts.len() - 1
    }
}

/// A point of an intersection, expressed in every member chart's coordinates.
#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub verts: Vec<u32>,
    pub coords: Vec<Vec<f64>>,
}

impl SamplePoint {
    pub fn coords_of(&self, chart: u32) -> &[f64] {
        let k = self
            .verts
            .iter()
            .position(|&v| v == chart)
            .expect("chart not a member of this sample's simplex");
        &self.coords[k]
    }
}

/// Refinement map: fine chart r sits inside coarse chart tau[r], in the same
/// lifted coordinates (no translation needed for grid refinements).
#[derive(Debug, Clone)]
pub struct Refinement {
    pub factor: usize,
    pub tau: Vec<u32>,
}

#[derive(Debug)]
pub struct Cover {
    pub dim: usize,
    pub grid: usize,
    pub margin: f64,
    pub boxes: Vec<BoxNd>,
    simplices: [Vec<Simplex>; 4],
    pair_shift: HashMap<(u32, u32), Vec<i64>>,
}

pub fn margin_bound(grid: usize) -> f64 {
    (0.5 - 1.0 / grid as f64) / 2.0
}

/// Build the good cover of T^dim with grid^dim boxes.
pub fn build_torus_cover(dim: usize, grid: usize, margin: f64) -> Result<Cover, CoverError> {
    if !(1..=3).contains(&dim) {
        return Err(CoverError::BadDim(dim));
    }
    if grid < 3 {
        return Err(CoverError::BadGrid(grid));
    }
    let bound = margin_bound(grid);
    if !(margin > 0.0 && margin < bound) {
        return Err(CoverError::MarginOutOfRange { margin, bound });
    }

    let n_charts = grid.pow(dim as u32);
    let half = 0.5 / grid as f64 + margin;
    let mut boxes = Vec::with_capacity(n_charts);
    for idx in 0..n_charts {
        let m = unindex(idx, grid, dim);
        let lo = m
            .iter()
            .map(|&k| (k as f64 + 0.5) / grid as f64 - half)
            .collect();
        let hi = m
            .iter()
            .map(|&k| (k as f64 + 0.5) / grid as f64 + half)
            .collect();
        boxes.push(BoxNd { lo, hi });
    }

    // 0-simplices
    let mut simplices: [Vec<Simplex>; 4] = [vec![], vec![], vec![], vec![]];
    for (i, b) in boxes.iter().enumerate() {
        simplices[0].push(Simplex {
            verts: vec![i as u32],
            inter: b.clone(),
            shifts: vec![vec![0; dim]],
        });
    }

    // 1-simplices: search the unique wrap vector per pair.
    let mut pair_shift: HashMap<(u32, u32), Vec<i64>> = HashMap::new();
    let wraps = wrap_candidates(dim);
    for i in 0..n_charts {
        for j in (i + 1)..n_charts {
            for u in &wraps {
                let cand = boxes[i].intersect(&boxes[j].translate_int(u));
                if !cand.is_empty() {
                    pair_shift.insert((i as u32, j as u32), u.clone());
                    simplices[1].push(Simplex {
                        verts: vec![i as u32, j as u32],
                        inter: cand,
                        shifts: vec![vec![0; dim], u.clone()],
                    });
                    break;
                }
            }
        }
    }

    // Higher simplices: all pairs must meet, then the anchored boxes must
    // share a common region.
    let shift_of = |a: u32, b: u32| -> Option<Vec<i64>> {
        if a == b {
            return Some(vec![0; dim]);
        }
        if a < b {
            pair_shift.get(&(a, b)).cloned()
        } else {
            pair_shift
                .get(&(b, a))
                .map(|s| s.iter().map(|x| -x).collect())
        }
    };

    for q in 2..=3usize {
        let lower: Vec<Vec<u32>> = simplices[q - 1].iter().map(|s| s.verts.clone()).collect();
        for base in &lower {
            let last = *base.last().unwrap();
            'next: for extra in (last + 1)..n_charts as u32 {
                let mut shifts = Vec::with_capacity(base.len() + 1);
                shifts.push(vec![0i64; dim]);
                let anchor = base[0];
                let mut inter = boxes[anchor as usize].clone();
                for &v in base[1..].iter().chain(std::iter::once(&extra)) {
                    let s = match shift_of(anchor, v) {
                        Some(s) => s,
                        None => continue 'next,
                    };
                    inter = inter.intersect(&boxes[v as usize].translate_int(&s));
                    if inter.is_empty() {
                        continue 'next;
                    }
                    shifts.push(s);
                }
                // every face pair must also meet (anchored consistency)
                let verts: Vec<u32> = base.iter().copied().chain([extra]).collect();
                for a in 0..verts.len() {
                    for b in (a + 1)..verts.len() {
                        if shift_of(verts[a], verts[b]).is_none() {
                            continue 'next;
                        }
                    }
                }
                simplices[q].push(Simplex {
                    verts,
                    inter,
                    shifts,
                });
            }
        }
    }

    let cover = Cover {
        dim,
        grid,
        margin,
        boxes,
        simplices,
        pair_shift,
    };
    cover.assert_shift_cocycle();
    Ok(cover)
}

fn unindex(idx: usize, grid: usize, dim: usize) -> Vec<usize> {
    let mut m = Vec::with_capacity(dim);
    let mut r = idx;
    for _ in 0..dim {
        m.push(r % grid);
        r /= grid;
    }
    m
}

fn index_of(m: &[usize], grid: usize) -> usize {
    let mut idx = 0;
    for (a, &k) in m.iter().enumerate().rev() {
        idx = idx * grid + k;
        let _ = a;
    }
    idx
}

fn wrap_candidates(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for v in &out {
            for w in [0i64, 1, -1] {
                let mut v2 = v.clone();
                v2.push(w);
                next.push(v2);
            }
        }
        out = next;
    }
    out
}

impl Cover {
    pub fn n_charts(&self) -> usize {
        self.boxes.len()
    }

    pub fn simplices(&self, q: usize) -> &[Simplex] {
        &self.simplices[q]
    }

    /// The integer translation with x_a = x_b + shift(a, b) on the overlap.
    pub fn shift(&self, a: u32, b: u32) -> Result<Vec<i64>, CoverError> {
        if a == b {
            return Ok(vec![0; self.dim]);
        }
        let (key, flip) = if a < b {
            ((a, b), false)
        } else {
            ((b, a), true)
        };
        let s = self
            .pair_shift
            .get(&key)
            .ok_or(CoverError::NoOverlap(a, b))?;
        Ok(if flip {
            s.iter().map(|x| -x).collect()
        } else {
            s.clone()
        })
    }

    pub fn find_simplex(&self, verts: &[u32]) -> Result<&Simplex, CoverError> {
        let q = verts.len() - 1;
        self.simplices
            .get(q)
            .and_then(|list| list.iter().find(|s| s.verts == verts))
            .ok_or(CoverError::NoSuchSimplex)
    }

    /// Deterministic sample points strictly inside the intersection,
    /// expressed in every member chart's coordinates.
    pub fn sample_points(&self, simplex: &Simplex, count: usize, seed: u64) -> Vec<SamplePoint> {
        let tag = format!("sample:{:?}", simplex.verts);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &tag));
        let inner = simplex.inter.shrink(0.01);
        (0..count)
            .map(|_| {
                let p_anchor: Vec<f64> = inner
                    .lo
                    .iter()
                    .zip(&inner.hi)
                    .map(|(l, h)| rng.gen_range(*l..*h))
                    .collect();
                let coords = simplex
                    .shifts
                    .iter()
                    .map(|s| p_anchor.iter().zip(s).map(|(x, k)| x - *k as f64).collect())
                    .collect();
                SamplePoint {
                    verts: simplex.verts.clone(),
                    coords,
                }
            })
            .collect()
    }

    /// Locate a torus point (coordinates in [0,1)^d) in some chart; returns
    /// the chart index and the lifted coordinates.
    pub fn locate(&self, p: &[f64]) -> (usize, Vec<f64>) {
        let n = self.grid as f64;
        let m: Vec<usize> = p
            .iter()
            .map(|&x| {
                let k = (x * n - 0.5).round();
                (((k as i64) % self.grid as i64 + self.grid as i64) % self.grid as i64) as usize
            })
            .collect();
        let idx = index_of(&m, self.grid);
        let c = self.boxes[idx].center();
        let lifted = p
            .iter()
            .zip(&c)
            .map(|(x, cc)| {
                let mut d = x - cc;
                d -= d.round();
                cc + d
            })
            .collect();
        (idx, lifted)
    }

    /// Refine the grid by an integer factor; the margin scales down with it.
    pub fn refine(&self, factor: usize) -> Result<(Cover, Refinement), CoverError> {
        if factor < 2 {
            return Err(CoverError::BadGrid(factor));
        }
        let fine = build_torus_cover(self.dim, self.grid * factor, self.margin / factor as f64)?;
        let mut tau = Vec::with_capacity(fine.n_charts());
        for r in 0..fine.n_charts() {
            let m_fine = unindex(r, fine.grid, self.dim);
            let m_coarse: Vec<usize> = m_fine.iter().map(|&k| k / factor).collect();
            let t = index_of(&m_coarse, self.grid);
            debug_assert!(
                self.boxes[t].contains_box(&fine.boxes[r]),
                "fine box escapes its tau-image"
            );
            tau.push(t as u32);
        }
        Ok((fine, Refinement { factor, tau }))
    }

    /// Chart bookkeeping for the pullback along x -> x + k/N. Returns, for a
    /// target chart index a', the source chart a with f(U_{a'}) = U_a and the
    /// real offset with x_a(f(p)) = x_{a'}(p) + offset.
    pub fn translate_chart(
        &self,
        target: usize,
        k: &[i64],
    ) -> Result<(usize, Vec<f64>), CoverError> {
        if k.len() != self.dim {
            return Err(CoverError::BadTranslation);
        }
        let n = self.grid as i64;
        let m = unindex(target, self.grid, self.dim);
        let mut source = Vec::with_capacity(self.dim);
        let mut offset = Vec::with_capacity(self.dim);
        for (a, &ma) in m.iter().enumerate() {
            let raw = ma as i64 + k[a];
            let wrapped = ((raw % n) + n) % n;
            source.push(wrapped as usize);
            // u = number of periods wrapped
            let u = (raw - wrapped) / n;
            offset.push(k[a] as f64 / n as f64 - u as f64);
        }
        Ok((index_of(&source, self.grid), offset))
    }

    fn assert_shift_cocycle(&self) {
        for s in &self.simplices[2] {
            let (i, j, k) = (s.verts[0], s.verts[1], s.verts[2]);
            let sij = self.shift(i, j).unwrap();
            let sjk = self.shift(j, k).unwrap();
            let sik = self.shift(i, k).unwrap();
            for a in 0..self.dim {
                assert_eq!(
                    sik[a],
                    sij[a] + sjk[a],
                    "translation cocycle violated on {:?}",
                    s.verts
                );
            }
        }
    }
}
