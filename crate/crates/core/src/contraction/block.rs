//! Finite-rank preconditioners `L = I + M₁ + … + M_N`.

use std::collections::{HashMap, HashSet};

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::norms::{weight_dn, weight_up};
use crate::ball::{add_up, div_up, mul_up, sub_up, Ball};
use crate::error::{Error, Result};
use crate::field::{FieldEnclosure, SpaceParams};

/// A coefficient coordinate `θ_{n,j,k}` with signed `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub n: i64,
    pub j: usize,
    pub k: usize,
}

impl Coord {
    pub fn new(n: i64, j: usize, k: usize) -> Coord {
        Coord { n, j, k }
    }

    /// Symmetry sector `(|n| + k) mod 2`.
    pub fn sector(&self) -> usize {
        (self.n.unsigned_abs() as usize + self.k) % 2
    }
}

/// One dense block `M` acting on the span of `coords`.
#[derive(Clone, Debug)]
pub struct Block {
    pub freqs: Vec<u32>,
    pub m: usize,
    pub sector: usize,
    pub coords: Vec<Coord>,
    /// Entries are exact binary64 numbers.
    pub matrix: Mat<f64>,
}

impl Block {
    /// Coordinates of `𝔼_F ℙ_m` in one sector, cell-major with `(+n, −n)` adjacent.
    pub fn coords_for(freqs: &[u32], m: usize, sector: usize) -> Vec<Coord> {
        let mut v = Vec::new();
        for j in 1..=m {
            for k in 1..=m {
                for &f in freqs {
                    if (f as usize + k) % 2 != sector {
                        continue;
                    }
                    v.push(Coord::new(f as i64, j, k));
                    if f > 0 {
                        v.push(Coord::new(-(f as i64), j, k));
                    }
                }
            }
        }
        v
    }

    pub fn zero(freqs: &[u32], m: usize, sector: usize) -> Block {
        let coords = Block::coords_for(freqs, m, sector);
        let d = coords.len();
        Block { freqs: freqs.to_vec(), m, sector, coords, matrix: Mat::zeros(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Index of the partner coordinate `−n` for `n ≠ 0`.
    pub fn partner(&self, i: usize) -> Option<usize> {
        let c = self.coords[i];
        if c.n == 0 {
            None
        } else if c.n > 0 {
            Some(i + 1)
        } else {
            Some(i - 1)
        }
    }

    /// Weighted operator norm bound of `M` on its modes.
    pub fn m_norm(&self, rho: f64, varrho: f64) -> f64 {
        let d = self.dim();
        let w: Vec<f64> = self.coords.iter().map(|c| weight_up(rho, varrho, c.n, c.j, c.k)).collect();
        let cols: Vec<f64> = (0..d)
            .map(|c| {
                let mut s = 0.0;
                for r in 0..d {
                    s = add_up(s, mul_up(w[r], self.matrix[(r, c)].abs()));
                }
                s
            })
            .collect();
        let mut best: f64 = 0.0;
        for i in 0..d {
            let c = self.coords[i];
            let col = match self.partner(i) {
                None => cols[i],
                Some(p) if c.n > 0 => crate::ball::sqrt_up(add_up(mul_up(cols[i], cols[i]), mul_up(cols[p], cols[p]))),
                Some(_) => continue,
            };
            best = best.max(div_up(col, weight_dn(rho, varrho, c.n, c.j, c.k)));
        }
        best
    }
}

/// `L = I + Σ M_b`, identity outside the blocks.
#[derive(Clone, Debug, Default)]
pub struct BlockOperator {
    pub blocks: Vec<Block>,
}

impl BlockOperator {
    pub fn identity() -> BlockOperator {
        BlockOperator { blocks: Vec::new() }
    }

    /// Blocks must act on pairwise disjoint coordinates.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for b in &self.blocks {
            if b.matrix.nrows() != b.dim() || b.matrix.ncols() != b.dim() {
                return Err(Error::Shape("block matrix does not match its coordinates".into()));
            }
            for c in &b.coords {
                if !seen.insert(*c) {
                    return Err(Error::Shape(format!("coordinate {c:?} belongs to two blocks")));
                }
            }
        }
        Ok(())
    }

    /// `M h` as an enclosure on the shape of `h`.
    pub fn apply_m(&self, h: &FieldEnclosure) -> Result<FieldEnclosure> {
        let mut out = FieldEnclosure::zero(h.params());
        for b in &self.blocks {
            let x: Vec<Ball> = b.coords.iter().map(|c| coord_get(h, c)).collect();
            if x.iter().all(|v| v.is_zero()) {
                continue;
            }
            for (r, c) in b.coords.iter().enumerate() {
                let mut acc = Ball::ZERO;
                for (i, xi) in x.iter().enumerate() {
                    let m = b.matrix[(r, i)];
                    if m != 0.0 && !xi.is_zero() {
                        acc += *xi * Ball::exact(m);
                    }
                }
                if !acc.is_zero() {
                    if !h.in_grid(c.j, c.k) || h.map().pos_of(c.n).is_none() {
                        return Err(Error::Shape(format!("block coordinate {c:?} outside the field shape")));
                    }
                    out.add_coeff(c.n, c.j, c.k, acc)?;
                }
            }
        }
        Ok(out)
    }

    /// `L h = h + M h`.
    pub fn apply_l(&self, h: &FieldEnclosure) -> Result<FieldEnclosure> {
        h.add(&self.apply_m(h)?)
    }

    /// Upper bound of `‖L‖ ≤ 1 + max_b ‖M_b‖`.
    pub fn norm_bound(&self, rho: f64, varrho: f64) -> f64 {
        let m = self.blocks.iter().map(|b| b.m_norm(rho, varrho)).fold(0.0, f64::max);
        add_up(1.0, m)
    }

    pub fn coord_set(&self) -> HashMap<Coord, (usize, usize)> {
        let mut h = HashMap::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (i, c) in b.coords.iter().enumerate() {
                h.insert(*c, (bi, i));
            }
        }
        h
    }
}

fn coord_get(h: &FieldEnclosure, c: &Coord) -> Ball {
    if h.in_grid(c.j, c.k) && h.map().pos_of(c.n).is_some() {
        h.get(c.n, c.j, c.k)
    } else {
        Ball::ZERO
    }
}

/// Dense square matrix of enclosures, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BallMatrix {
    pub n: usize,
    pub data: Vec<Ball>,
}

impl BallMatrix {
    pub fn zeros(n: usize) -> BallMatrix {
        BallMatrix { n, data: vec![Ball::ZERO; n * n] }
    }

    pub fn from_f64(m: &Mat<f64>) -> BallMatrix {
        let n = m.nrows();
        let mut b = BallMatrix::zeros(n);
        for c in 0..n {
            for r in 0..n {
                b.data[c * n + r] = Ball::exact(m[(r, c)]);
            }
        }
        b
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Ball {
        self.data[c * self.n + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Ball) {
        self.data[c * self.n + r] = v;
    }
}

/// Outcome of the invertibility check of `I + M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Invertibility {
    pub pass: bool,
    /// Upper bound of `‖I − V(I+M)‖`.
    pub residual: f64,
    /// Upper bound of `‖(I+M)⁻¹‖` when `pass`.
    pub inverse_norm: Option<f64>,
}

/// Weighted `ℓ¹` operator norm bound `max_c Σ_r w_r |A_rc| / w_c` of a Ball matrix.
pub fn weighted_op_norm(a: &BallMatrix, w_up: &[f64], w_dn: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for c in 0..a.n {
        let mut s = 0.0;
        for r in 0..a.n {
            s = add_up(s, mul_up(w_up[r], a.get(r, c).mag()));
        }
        best = best.max(div_up(s, w_dn[c]));
    }
    best
}

/// Check that `I + M` is invertible by an approximate inverse `V` with
/// `‖I − V(I+M)‖ < 1` in the coordinate-weighted norm.
pub fn verify_block_invertible(m: &BallMatrix, w_up: &[f64], w_dn: &[f64]) -> Invertibility {
    let n = m.n;
    let a = Mat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 } + m.get(r, c).center());
    let v = a.partial_piv_lu().solve(Mat::<f64>::identity(n, n));
    if (0..n).any(|c| (0..n).any(|r| !v[(r, c)].is_finite())) {
        return Invertibility { pass: false, residual: f64::INFINITY, inverse_norm: None };
    }
    let mut res = BallMatrix::zeros(n);
    for c in 0..n {
        for r in 0..n {
            let mut acc = if r == c { Ball::ONE } else { Ball::ZERO };
            for i in 0..n {
                let vi = v[(r, i)];
                if vi == 0.0 {
                    continue;
                }
                let aic = if i == c { Ball::ONE + m.get(i, c) } else { m.get(i, c) };
                acc -= Ball::exact(vi) * aic;
            }
            res.set(r, c, acc);
        }
    }
    let residual = weighted_op_norm(&res, w_up, w_dn);
    if !(residual < 1.0) {
        return Invertibility { pass: false, residual, inverse_norm: None };
    }
    let vb = BallMatrix { n, data: (0..n * n).map(|i| Ball::exact(v[(i % n, i / n)])).collect() };
    let vn = weighted_op_norm(&vb, w_up, w_dn);
    Invertibility { pass: true, residual, inverse_norm: Some(div_up(vn, sub_up(1.0, residual))) }
}

/// Coordinate weights of a block on given weights.
pub fn block_weights(b: &Block, p: &SpaceParams) -> (Vec<f64>, Vec<f64>) {
    let up = b.coords.iter().map(|c| weight_up(p.rho, p.varrho, c.n, c.j, c.k)).collect();
    let dn = b.coords.iter().map(|c| weight_dn(p.rho, p.varrho, c.n, c.j, c.k)).collect();
    (up, dn)
}
