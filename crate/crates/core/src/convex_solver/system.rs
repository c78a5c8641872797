//! Symmetric positive-definite Newton systems.
//!
//! Only the lower triangle (`i >= j` in global variable order) is ever
//! accumulated. [`ArrowSystem`] exploits programs whose variables split into
//! independent local blocks coupled only through a trailing set of global
//! variables; the local blocks are eliminated by Schur complement.

use std::ops::Range;

use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::{Mat, Par, Side};

/// Partition of the variables into local blocks and trailing globals.
///
/// Blocks must be contiguous, in order, and start at 0; every index at or
/// after the end of the last block is global.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    pub blocks: Vec<Range<usize>>,
}

impl BlockStructure {
    pub fn new(blocks: Vec<Range<usize>>) -> Self {
        Self { blocks }
    }

    pub(crate) fn first_global(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.end)
    }

    pub(crate) fn is_well_formed(&self, n: usize) -> bool {
        let mut next = 0;
        for b in &self.blocks {
            if b.start != next || b.end < b.start {
                return false;
            }
            next = b.end;
        }
        next <= n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarLoc {
    Local { block: u32, idx: u32 },
    Global(u32),
}

pub(crate) trait NewtonSystem {
    fn clear(&mut self);
    /// Add `v` to entry `(i, j)`; callers only pass `i >= j`.
    fn add_lower(&mut self, i: usize, j: usize, v: f64);
    /// Add `d * g g^T`, with `g` given on `support`.
    fn add_rank_one(&mut self, support: &[usize], g: &[f64], d: f64) {
        for (p, &ip) in support.iter().enumerate() {
            let gp = g[p] * d;
            if gp == 0.0 {
                continue;
            }
            for (q, &iq) in support.iter().enumerate() {
                if iq <= ip {
                    self.add_lower(ip, iq, gp * g[q]);
                }
            }
        }
    }
    /// Solve `(H + reg I) dx = rhs`. Returns `false` if the factorization fails.
    fn solve(&mut self, rhs: &[f64], reg: f64, dx: &mut [f64]) -> bool;
}

pub(crate) struct DenseSystem {
    h: Mat<f64>,
}

impl DenseSystem {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            h: Mat::zeros(n, n),
        }
    }
}

impl NewtonSystem for DenseSystem {
    fn clear(&mut self) {
        self.h.fill(0.0);
    }

    #[inline]
    fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        self.h[(i, j)] += v;
    }

    fn solve(&mut self, rhs: &[f64], reg: f64, dx: &mut [f64]) -> bool {
        let mut m = self.h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += reg;
        }
        let Ok(llt) = m.llt(Side::Lower) else {
            return false;
        };
        let mut sol = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        llt.solve_in_place(sol.as_mut());
        for (i, d) in dx.iter_mut().enumerate() {
            *d = sol[(i, 0)];
        }
        dx.iter().all(|v| v.is_finite())
    }
}

pub(crate) struct ArrowSystem {
    locs: Vec<VarLoc>,
    blocks: Vec<Range<usize>>,
    first_global: usize,
    local: Vec<Mat<f64>>,
    /// Pending rank-one terms inside one block, as columns of `sqrt(d) g`.
    pending: Vec<Vec<f64>>,
    coupling: Vec<Mat<f64>>,
    global: Mat<f64>,
}

impl ArrowSystem {
    pub(crate) fn new(n: usize, structure: &BlockStructure) -> Self {
        let first_global = structure.first_global();
        let ng = n - first_global;
        let mut locs = vec![VarLoc::Global(0); n];
        for (b, r) in structure.blocks.iter().enumerate() {
            for (idx, i) in r.clone().enumerate() {
                locs[i] = VarLoc::Local {
                    block: b as u32,
                    idx: idx as u32,
                };
            }
        }
        for (g, loc) in locs.iter_mut().enumerate().skip(first_global) {
            *loc = VarLoc::Global((g - first_global) as u32);
        }
        Self {
            locs,
            blocks: structure.blocks.clone(),
            first_global,
            local: structure
                .blocks
                .iter()
                .map(|r| Mat::zeros(r.len(), r.len()))
                .collect(),
            pending: vec![Vec::new(); structure.blocks.len()],
            coupling: structure
                .blocks
                .iter()
                .map(|r| Mat::zeros(r.len(), ng))
                .collect(),
            global: Mat::zeros(ng, ng),
        }
    }

    fn add_rank_one_scattered(&mut self, support: &[usize], g: &[f64], d: f64) {
        for (p, &ip) in support.iter().enumerate() {
            let gp = g[p] * d;
            for (q, &iq) in support.iter().enumerate() {
                if iq <= ip && gp != 0.0 {
                    self.add_lower(ip, iq, gp * g[q]);
                }
            }
        }
    }

    fn flush_pending(&mut self) {
        for (b, buf) in self.pending.iter_mut().enumerate() {
            if buf.is_empty() {
                continue;
            }
            let nb = self.blocks[b].len();
            let u = faer::MatRef::from_column_major_slice(buf, nb, buf.len() / nb);
            let mut lower = self.local[b].as_mut();
            // Only the lower triangle is read later; a full product is simplest.
            lower += u * u.transpose();
            buf.clear();
        }
    }

    /// True if no term of `support` couples two different local blocks.
    pub(crate) fn admits(structure: &BlockStructure, support: &[usize]) -> bool {
        let first_global = structure.first_global();
        let mut seen: Option<usize> = None;
        for &i in support {
            if i >= first_global {
                continue;
            }
            let b = structure.blocks.partition_point(|r| r.end <= i);
            match seen {
                None => seen = Some(b),
                Some(s) if s != b => return false,
                _ => {}
            }
        }
        true
    }
}

impl NewtonSystem for ArrowSystem {
    fn clear(&mut self) {
        self.local.iter_mut().for_each(|m| m.fill(0.0));
        self.pending.iter_mut().for_each(Vec::clear);
        self.coupling.iter_mut().for_each(|m| m.fill(0.0));
        self.global.fill(0.0);
    }

    #[inline]
    fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        match (self.locs[i], self.locs[j]) {
            (VarLoc::Local { block: bi, idx: li }, VarLoc::Local { block: bj, idx: lj }) => {
                debug_assert_eq!(bi, bj);
                self.local[bi as usize][(li as usize, lj as usize)] += v;
            }
            (VarLoc::Global(gi), VarLoc::Local { block, idx }) => {
                self.coupling[block as usize][(idx as usize, gi as usize)] += v;
            }
            (VarLoc::Local { block, idx }, VarLoc::Global(gj)) => {
                self.coupling[block as usize][(idx as usize, gj as usize)] += v;
            }
            (VarLoc::Global(gi), VarLoc::Global(gj)) => {
                self.global[(gi as usize, gj as usize)] += v;
            }
        }
    }

    fn add_rank_one(&mut self, support: &[usize], g: &[f64], d: f64) {
        let block = match support.first().map(|&i| self.locs[i]) {
            Some(VarLoc::Local { block, .. }) => block as usize,
            _ => return self.add_rank_one_scattered(support, g, d),
        };
        let nb = self.blocks[block].len();
        let buf = &mut self.pending[block];
        let at = buf.len();
        buf.resize(at + nb, 0.0);
        let s = d.sqrt();
        for (&i, &v) in support.iter().zip(g) {
            match self.locs[i] {
                VarLoc::Local { block: b, idx } if b as usize == block => {
                    buf[at + idx as usize] += s * v
                }
                _ => {
                    buf.truncate(at);
                    return self.add_rank_one_scattered(support, g, d);
                }
            }
        }
    }

    fn solve(&mut self, rhs: &[f64], reg: f64, dx: &mut [f64]) -> bool {
        self.flush_pending();
        let ng = self.global.nrows();
        // Everything below works on the symmetrically scaled system
        // D (H + reg I) D with unit diagonal, D = diag(H + reg I)^(-1/2).
        let Some(sg) = inv_sqrt_diag(&self.global, reg) else {
            return false;
        };
        let mut schur = Mat::from_fn(ng, ng, |i, j| {
            if i >= j {
                self.global[(i, j)] * sg[i] * sg[j]
            } else {
                0.0
            }
        });
        for i in 0..ng {
            schur[(i, i)] += reg * sg[i] * sg[i];
        }
        let mut rhs_g: Vec<f64> = rhs[self.first_global..]
            .iter()
            .zip(&sg)
            .map(|(r, s)| r * s)
            .collect();
        let mut factors = Vec::with_capacity(self.blocks.len());
        for (b, r) in self.blocks.iter().enumerate() {
            let nb = r.len();
            let Some(sl) = inv_sqrt_diag(&self.local[b], reg) else {
                return false;
            };
            let a = &self.local[b];
            let mut scaled = Mat::from_fn(nb, nb, |i, j| {
                if i >= j {
                    a[(i, j)] * sl[i] * sl[j]
                } else {
                    0.0
                }
            });
            for i in 0..nb {
                scaled[(i, i)] += reg * sl[i] * sl[i];
            }
            let Ok(llt) = scaled.llt(Side::Lower) else {
                return false;
            };
            // Only globals the block actually touches enter its Schur update.
            let c = &self.coupling[b];
            let cols: Vec<usize> = (0..ng)
                .filter(|&j| (0..nb).any(|i| c[(i, j)] != 0.0))
                .collect();
            let mut w = Mat::from_fn(nb, cols.len(), |i, q| c[(i, cols[q])] * sl[i] * sg[cols[q]]);
            solve_lower_triangular_in_place(llt.L(), w.as_mut(), Par::Seq);
            let m = w.transpose() * &w;
            for (q, &gj) in cols.iter().enumerate() {
                for (p, &gi) in cols.iter().enumerate().skip(q) {
                    schur[(gi.max(gj), gi.min(gj))] -= m[(p, q)];
                }
            }
            let mut y = Mat::from_fn(nb, 1, |i, _| rhs[r.start + i] * sl[i]);
            solve_lower_triangular_in_place(llt.L(), y.as_mut(), Par::Seq);
            let wy = w.transpose() * &y;
            for (q, &gj) in cols.iter().enumerate() {
                rhs_g[gj] -= wy[(q, 0)];
            }
            factors.push((llt, w, cols, y, sl));
        }
        let mut dg = Mat::from_fn(ng, 1, |i, _| rhs_g[i]);
        if ng > 0 {
            let Ok(llt) = schur.llt(Side::Lower) else {
                return false;
            };
            llt.solve_in_place(dg.as_mut());
        }
        for ((llt, w, cols, mut y, sl), r) in factors.into_iter().zip(&self.blocks) {
            let d = Mat::from_fn(cols.len(), 1, |q, _| dg[(cols[q], 0)]);
            y -= &w * &d;
            solve_upper_triangular_in_place(llt.L().transpose(), y.as_mut(), Par::Seq);
            for (i, o) in dx[r.clone()].iter_mut().enumerate() {
                *o = y[(i, 0)] * sl[i];
            }
        }
        for (i, o) in dx[self.first_global..].iter_mut().enumerate() {
            *o = dg[(i, 0)] * sg[i];
        }
        dx.iter().all(|v| v.is_finite())
    }
}

/// `1 / sqrt(h_ii + reg)` for every diagonal entry, or `None` if one is not positive.
fn inv_sqrt_diag(h: &Mat<f64>, reg: f64) -> Option<Vec<f64>> {
    (0..h.nrows())
        .map(|i| {
            let d = h[(i, i)] + reg;
            (d > 0.0 && d.is_finite()).then(|| 1.0 / d.sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> Mat<f64> {
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = Mat::from_fn(n, n, |_, _| next());
        let mut m = &a * a.transpose();
        for i in 0..n {
            m[(i, i)] += n as f64;
        }
        m
    }

    #[test]
    fn arrow_matches_dense() {
        // Two local blocks of sizes 3 and 2, three globals; zero out cross-block entries.
        let n = 8;
        let structure = BlockStructure::new(vec![0..3, 3..5]);
        let mut h = spd(n, 7);
        for i in 0..3 {
            for j in 3..5 {
                h[(i, j)] = 0.0;
                h[(j, i)] = 0.0;
            }
        }
        // Keep it positive definite after zeroing.
        for i in 0..n {
            h[(i, i)] += 10.0;
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut dense = DenseSystem::new(n);
        let mut arrow = ArrowSystem::new(n, &structure);
        for i in 0..n {
            for j in 0..=i {
                if h[(i, j)] != 0.0 {
                    dense.add_lower(i, j, h[(i, j)]);
                    arrow.add_lower(i, j, h[(i, j)]);
                }
            }
        }
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        assert!(dense.solve(&rhs, 0.0, &mut a));
        assert!(arrow.solve(&rhs, 0.0, &mut b));
        for i in 0..n {
            assert!((a[i] - b[i]).abs() < 1e-12, "{i}: {} vs {}", a[i], b[i]);
        }
        let x = Mat::from_fn(n, 1, |i, _| a[i]);
        let r = &h * x - Mat::from_fn(n, 1, |i, _| rhs[i]);
        assert!(r.norm_l2() < 1e-10);
    }

    #[test]
    fn admits_rejects_cross_block_support() {
        let s = BlockStructure::new(vec![0..2, 2..4]);
        assert!(ArrowSystem::admits(&s, &[0, 1, 4, 5]));
        assert!(ArrowSystem::admits(&s, &[4]));
        assert!(!ArrowSystem::admits(&s, &[1, 2]));
        assert!(s.is_well_formed(6));
        assert!(!BlockStructure::new(vec![1..2]).is_well_formed(3));
    }

    #[test]
    fn indefinite_system_reports_failure() {
        let mut d = DenseSystem::new(2);
        d.add_lower(0, 0, 1.0);
        d.add_lower(1, 1, -1.0);
        let mut dx = [0.0; 2];
        assert!(!d.solve(&[1.0, 1.0], 0.0, &mut dx));
    }
}
