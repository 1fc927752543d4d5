//! Bounds on `‖D𝒩‖` restricted to one frequency set: preconditioned blocks,
//! a frontier of explicitly evaluated modes and an analytic wavenumber tail.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::block::{Block, BlockOperator, Coord};
use super::kernel::{ColumnKernel, FatBase, LTable};
use super::norms::{gamma_d, sample_factor, underflow_slack, weight_dn, weight_up, Group, ModeImage};
use crate::ball::{add_up, div_up, mul_up, sqrt_up, sub_dn, Ball, U};
use crate::error::{Error, Result};
use crate::field::FieldEnclosure;
use crate::operators::n_bound;
use crate::timepoly::pair_up;

/// Outcome of one preconditioned block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub freqs: Vec<u32>,
    pub m: usize,
    pub sector: usize,
    pub dim: usize,
    /// Largest `‖D𝒩 u‖` over the block's modes.
    pub mode_max: f64,
    /// Bound of `‖I − V(I+M)‖` with `V = I − Dℱ` restricted to the block.
    pub residual: f64,
    pub invertible: bool,
    pub inverse_norm: Option<f64>,
}

/// `‖D𝒩‖` on one frequency set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqSetReport {
    pub freqs: Vec<u32>,
    pub blocks: Vec<BlockReport>,
    pub frontier_wave: usize,
    pub frontier_modes: usize,
    pub frontier: f64,
    pub tail: f64,
    pub k: f64,
}

impl FreqSetReport {
    pub fn invertible(&self) -> bool {
        self.blocks.iter().all(|b| b.invertible)
    }
}

/// Kernel window and resolvent table for inputs up to wavenumber `wave` and
/// frequencies `freqs`.
pub struct Workspace {
    pub wave: usize,
    pub rmax: usize,
    pub table: LTable,
}

impl Workspace {
    pub fn new(fb: &FatBase, freqs: &[u32], wave: usize) -> Workspace {
        let rmax = freqs.iter().copied().max().unwrap_or(0) as usize + fb.max_freq() as usize;
        let (jm, km) = ColumnKernel::window(fb, wave, wave);
        Workspace { wave, rmax, table: LTable::new(jm, km, rmax, fb.base.ga.alpha, fb.rho(), fb.varrho()) }
    }

    pub fn kernel<'a>(&'a self, fb: &'a FatBase) -> Result<ColumnKernel<'a>> {
        ColumnKernel::new(fb, &self.table, self.wave, self.wave, self.rmax)
    }
}

/// Row groups of a block: `(row of +f or f = 0, row of −f, weight)`.
fn row_groups(b: &Block, rho: f64, varrho: f64) -> Vec<(usize, Option<usize>, f64)> {
    let mut v = Vec::new();
    let mut i = 0;
    while i < b.dim() {
        let c = b.coords[i];
        let w = weight_up(rho, varrho, c.n, c.j, c.k);
        if c.n == 0 {
            v.push((i, None, w));
            i += 1;
        } else {
            v.push((i, Some(i + 1), w));
            i += 2;
        }
    }
    v
}

/// Lookup from `(n, j, k)` to the block row.
struct RowIndex {
    m: usize,
    rmax: i64,
    width: usize,
    idx: Vec<u32>,
}

impl RowIndex {
    fn new(b: &Block, rmax: usize) -> RowIndex {
        let width = 2 * rmax + 1;
        let mut idx = vec![u32::MAX; b.m * b.m * width];
        for (i, c) in b.coords.iter().enumerate() {
            if c.n.unsigned_abs() as usize <= rmax {
                idx[((c.j - 1) * b.m + c.k - 1) * width + (c.n + rmax as i64) as usize] = i as u32;
            }
        }
        RowIndex { m: b.m, rmax: rmax as i64, width, idx }
    }

    #[inline]
    fn get(&self, n: i64, j: usize, k: usize) -> Option<usize> {
        if j > self.m || k > self.m || n.abs() > self.rmax {
            return None;
        }
        let v = self.idx[((j - 1) * self.m + k - 1) * self.width + (n + self.rmax) as usize];
        (v != u32::MAX).then_some(v as usize)
    }
}

/// Split a field into its entries on the block rows and the norm of the rest.
fn split_field(f: &FieldEnclosure, b: &Block, rows: &RowIndex) -> (Vec<Ball>, f64) {
    let p = f.params();
    let map = &p.map;
    let ic = map.capacity();
    let mut main = vec![Ball::ZERO; b.dim()];
    let mut side = f.tail_total();
    for j in 1..=p.jc {
        for k in 1..=p.kc {
            let c = f.cell_coeffs(j, k);
            for i in 0..=ic {
                let fr = map.freq(i) as i64;
                let (xp, xm) = if i == 0 { (c[ic], Ball::ZERO) } else { (c[ic + i], c[ic - i]) };
                if xp.is_zero() && xm.is_zero() {
                    continue;
                }
                match rows.get(fr, j, k) {
                    Some(r) => {
                        main[r] = xp;
                        if fr > 0 {
                            main[rows.get(-fr, j, k).unwrap()] = xm;
                        }
                    }
                    None => side = add_up(side, mul_up(weight_up(p.rho, p.varrho, fr, j, k), pair_up(&xp, &xm))),
                }
            }
        }
    }
    (main, side)
}

/// Bound `‖D𝒩 u‖` over the modes of one block, where
/// `D𝒩 u = Dℱ(I+M)u − Mu`, and check that `I + M` is invertible.
pub fn block_bound(fb: &FatBase, ws: &Workspace, b: &Block, q: usize) -> Result<BlockReport> {
    let d = b.dim();
    let (rho, varrho) = (fb.rho(), fb.varrho());
    if b.m > ws.wave {
        return Err(Error::Shape("block exceeds the workspace window".into()));
    }
    sample_factor(q)?;
    let rows = RowIndex::new(b, ws.rmax);
    let w_up: Vec<f64> = b.coords.iter().map(|c| weight_up(rho, varrho, c.n, c.j, c.k)).collect();
    let (l_main, l_side) = split_field(&fb.base.l_hat, b, &rows);
    let (ll_main, ll_side) = split_field(&fb.base.ll_hat, b, &rows);
    let rm = ws.rmax;

    // W = Dℱ restricted to the block rows, by columns
    let mut wbuf = vec![0.0f64; d * d];
    let colstats: Vec<(f64, f64)> = wbuf
        .par_chunks_mut(d)
        .enumerate()
        .map_init(
            || ws.kernel(fb),
            |ker, (u, col)| -> Result<(f64, f64)> {
                let ker = ker.as_mut().map_err(|e| Error::Construction(e.to_string()))?;
                let cu: Coord = b.coords[u];
                ker.clear();
                ker.run(0, cu.n, cu.j, cu.k)?;
                let mut colb = vec![Ball::ZERO; d];
                let mut side = 0.0;
                for (cj, ck, c) in ker.cells() {
                    let cell = ker.cell(0, c);
                    for f in 0..=rm {
                        let (xp, xm) = if f == 0 { (cell[rm], Ball::ZERO) } else { (cell[rm + f], cell[rm - f]) };
                        if xp.is_zero() && xm.is_zero() {
                            continue;
                        }
                        match rows.get(f as i64, cj, ck) {
                            Some(r) => {
                                colb[r] = xp;
                                if f > 0 {
                                    colb[rows.get(-(f as i64), cj, ck).unwrap()] = xm;
                                }
                            }
                            None => side = add_up(side, mul_up(ws.table.weight(f, cj, ck), pair_up(&xp, &xm))),
                        }
                    }
                }
                let (beta, eta) = (ker.beta[0], ker.eta[0]);
                if !beta.is_zero() || !eta.is_zero() {
                    for r in 0..d {
                        if !l_main[r].is_zero() || !ll_main[r].is_zero() {
                            colb[r] += beta * l_main[r] + eta * ll_main[r];
                        }
                    }
                }
                side = add_up(side, ker.tail[0]);
                side = add_up(side, add_up(mul_up(beta.mag(), l_side), mul_up(eta.mag(), ll_side)));
                let mut rad = 0.0;
                for r in 0..d {
                    col[r] = colb[r].center();
                    if colb[r].radius() != 0.0 {
                        rad = add_up(rad, mul_up(w_up[r], colb[r].radius()));
                    }
                }
                Ok((rad, side))
            },
        )
        .collect::<Result<_>>()?;

    let wmat = MatRef::from_column_major_slice(&wbuf, d, d);
    let mmat = b.matrix.as_ref();
    let mut x = Mat::<f64>::zeros(d, d);
    matmul(x.as_mut(), Accum::Replace, wmat, mmat, 1.0, Par::Seq);

    // X = W + WM − M in place, with elementwise rounding errors per column
    let gd = gamma_d(d);
    let wmax = w_up.iter().copied().fold(0.0, f64::max);
    let uflow = underflow_slack(d, mul_up(wmax, d as f64));
    let v: Vec<f64> = (0..d).map(|i| (0..d).fold(0.0, |a, r| add_up(a, mul_up(w_up[r], wbuf[i * d + r].abs())))).collect();
    let s: Vec<f64> = colstats.iter().map(|&(r, sd)| add_up(r, sd)).collect();
    let col_err: Vec<(f64, f64)> = x
        .par_col_chunks_mut(1)
        .enumerate()
        .map(|(u, mut xc)| {
            let mut elem = 0.0;
            let mut hig = 0.0;
            let mut sm = 0.0;
            for r in 0..d {
                let wv = wbuf[u * d + r];
                let mv = mmat[(r, u)];
                let pv = xc[(r, 0)];
                let xv = wv + pv - mv;
                xc[(r, 0)] = xv;
                let mag = add_up(add_up(wv.abs(), pv.abs()), add_up(mv.abs(), xv.abs()));
                if mag != 0.0 {
                    elem = add_up(elem, mul_up(w_up[r], mag));
                }
                if mv != 0.0 {
                    hig = add_up(hig, mul_up(v[r], mv.abs()));
                    sm = add_up(sm, mul_up(s[r], mv.abs()));
                }
            }
            let float_err = add_up(add_up(mul_up(2.0 * U, elem), mul_up(gd, hig)), uflow);
            (float_err, add_up(float_err, add_up(s[u], sm)))
        })
        .collect();

    let groups = row_groups(b, rho, varrho);
    let mut mode_max: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut vnorm: f64 = 0.0;
    let mut u = 0;
    let mut mode_cols = Vec::new();
    while u < d {
        let two = b.coords[u].n != 0;
        mode_cols.push((u, two));
        u += if two { 2 } else { 1 };
    }
    let per_mode: Vec<(f64, f64, f64)> = mode_cols
        .par_iter()
        .map(|&(u, two)| {
            let cols = if two { [u, u + 1] } else { [u, u] };
            let gs: Vec<Group> = groups
                .iter()
                .filter_map(|&(rp, rmn, w)| {
                    let mut g = Group { w, x: [[0.0; 2]; 2] };
                    for (s, &c) in cols.iter().enumerate().take(if two { 2 } else { 1 }) {
                        g.x[0][s] = x[(rp, c)];
                        g.x[1][s] = rmn.map_or(0.0, |r| x[(r, c)]);
                    }
                    g.x.iter().flatten().any(|&v| v != 0.0).then_some(g)
                })
                .collect();
            let cu = b.coords[u];
            let wd = weight_dn(rho, varrho, cu.n, cu.j, cu.k);
            let mut img = ModeImage { two, groups: gs, radius: [col_err[cols[0]].1, col_err[cols[1]].1] };
            let full = img.bound(q).unwrap_or(f64::INFINITY);
            img.radius = [col_err[cols[0]].0, col_err[cols[1]].0];
            let res = img.bound(q).unwrap_or(f64::INFINITY);
            let vn = |c: usize| add_up(w_up[c], v[c]);
            let vcol = if two { sqrt_up(add_up(mul_up(vn(u), vn(u)), mul_up(vn(u + 1), vn(u + 1)))) } else { vn(u) };
            (div_up(full, wd), div_up(res, wd), div_up(vcol, wd))
        })
        .collect();
    for (f, r, vc) in per_mode {
        mode_max = mode_max.max(f);
        residual = residual.max(r);
        vnorm = vnorm.max(vc);
    }
    let invertible = residual < 1.0;
    let inverse_norm = invertible.then(|| div_up(vnorm, sub_dn(1.0, residual)));
    Ok(BlockReport { freqs: b.freqs.clone(), m: b.m, sector: b.sector, dim: d, mode_max, residual, invertible, inverse_norm })
}

/// Largest `‖Dℱ u‖/‖u‖` over the modes `n ∈ freqs`, `max(j, k) ≤ wave` that no
/// block of `l` covers. Returns `(bound, number of modes)`.
pub fn frontier_bound(fb: &FatBase, ws: &Workspace, l: &BlockOperator, freqs: &[u32], q: usize) -> Result<(f64, usize)> {
    let covered = l.coord_set();
    let (rho, varrho) = (fb.rho(), fb.varrho());
    let mut modes = Vec::new();
    for &f in freqs {
        for j in 1..=ws.wave {
            for k in 1..=ws.wave {
                let c = Coord::new(f as i64, j, k);
                let inb = covered.contains_key(&c);
                if f > 0 && inb != covered.contains_key(&Coord::new(-(f as i64), j, k)) {
                    return Err(Error::Coverage(format!("block covers only one sign of mode ({f},{j},{k})")));
                }
                if !inb {
                    modes.push((f, j, k));
                }
            }
        }
    }
    let bounds: Vec<f64> = modes
        .par_iter()
        .map_init(
            || ws.kernel(fb),
            |ker, &(f, j, k)| -> Result<f64> {
                let ker = ker.as_mut().map_err(|e| Error::Construction(e.to_string()))?;
                let img = ker.mode_image(f, j, k)?;
                Ok(div_up(img.bound(q)?, weight_dn(rho, varrho, f as i64, j, k)))
            },
        )
        .collect::<Result<_>>()?;
    Ok((bounds.into_iter().fold(0.0, f64::max), modes.len()))
}

/// Bound of `‖Dℱ u‖/‖u‖` for every mode with `max(j, k) > wave`.
///
/// An output of `φ_{J,K}` and `ψ` at `max(j,k) = M > wave` carries
/// `Σ_{σ,τ} |N|·‖ℒ‖ ≤ mx·M/(min(λ_φ, M²)(M − mx)²)` with `mx = max(J, K)`,
/// decreasing in `M`. Products with the tails of `φ` use the tail bounds.
pub fn analytic_tail(fb: &FatBase, wave: usize) -> Result<f64> {
    let mw = fb.max_wavenumber();
    if wave < mw {
        return Err(Error::Coverage(format!("frontier {wave} must reach the largest wavenumber {mw} of the base point")));
    }
    let (rho, varrho) = (fb.rho(), fb.varrho());
    let m1 = (wave + 1) as f64;
    let ws = fb.parity_weight_bound();
    let gamma = fb.base.ga.gamma.mag();
    let mut sum = 0.0;
    for (jj, kk, coeffs) in fb.coefficient_cells() {
        let mx = (*jj).max(*kk) as f64;
        let lam = (jj * jj + kk * kk) as f64;
        let mut a = 0.0;
        for &(p, c) in coeffs {
            if p < 0 {
                continue;
            }
            let partner = if p == 0 { Ball::ZERO } else { coeffs.iter().find(|e| e.0 == -p).map_or(Ball::ZERO, |e| e.1) };
            a = add_up(a, mul_up(pair_up(&c, &partner), weight_up(rho, varrho, p, *jj, *kk)));
        }
        for &(p, c) in coeffs {
            if p < 0 && !coeffs.iter().any(|e| e.0 == -p) {
                a = add_up(a, mul_up(c.mag(), weight_up(rho, varrho, p, *jj, *kk)));
            }
        }
        let gap = sub_dn(m1, mx);
        let den = mul_dn_pos(lam.min(m1 * m1), mul_dn_pos(gap, gap));
        sum = add_up(sum, div_up(mul_up(a, mul_up(mx, m1)), den));
    }
    let mut bound = mul_up(mul_up(gamma, ws), sum);
    let (ln, lln) = fb.hat_norms();
    let hg = fb.neg_half_gamma().mag();
    let (beta_per, eta_per) = {
        let (b, e) = fb.rank_two(Ball::from_bounds(-1.0, 1.0).unwrap(), Ball::from_bounds(-1.0, 1.0).unwrap());
        (b.mag(), e.mag())
    };
    let read_den = crate::ball::mul_dn(crate::ball::mul_dn(rho, varrho), varrho);
    for &(j0, k0, _, e) in fb.tails() {
        let nb = n_bound(1, 1, j0, k0);
        let v = mul_up(mul_up(mul_up(2.0, ws), e), nb);
        // four corners, factors summing to at most 1, resolvent at most 1/√2
        bound = add_up(bound, mul_up(mul_up(4.0, v), mul_up(hg, std::f64::consts::FRAC_1_SQRT_2.next_up())));
        let ab = div_up(v, read_den);
        bound = add_up(bound, add_up(mul_up(mul_up(beta_per, ab), ln), mul_up(mul_up(eta_per, ab), lln)));
    }
    Ok(bound)
}

#[inline]
fn mul_dn_pos(a: f64, b: f64) -> f64 {
    crate::ball::mul_dn(a, b).max(0.0)
}

/// `‖D𝒩‖` restricted to `𝔼_freqs`.
pub fn freq_set_bound(fb: &FatBase, l: &BlockOperator, freqs: &[u32], wave: usize, q: usize) -> Result<FreqSetReport> {
    let mut freqs = freqs.to_vec();
    freqs.sort_unstable();
    freqs.dedup();
    let blocks: Vec<&Block> = l
        .blocks
        .iter()
        .filter(|b| {
            let mut f = b.freqs.clone();
            f.sort_unstable();
            f == freqs
        })
        .collect();
    let ws = Workspace::new(fb, &freqs, wave);
    let mut reports = Vec::new();
    for b in &blocks {
        reports.push(block_bound(fb, &ws, b, q)?);
    }
    let (frontier, nmodes) = frontier_bound(fb, &ws, l, &freqs, q)?;
    let tail = analytic_tail(fb, wave)?;
    let k = reports.iter().map(|r| r.mode_max).fold(frontier.max(tail), f64::max);
    Ok(FreqSetReport { freqs, blocks: reports, frontier_wave: wave, frontier_modes: nmodes, frontier, tail, k })
}
