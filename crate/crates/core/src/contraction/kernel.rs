//! Sparse evaluation of `Dℱ(φ)θ_{n,j,k}` for unit coordinates at a fattened
//! base point.
//!
//! The result matches [`BasePoint::df`] term by term: the coefficient products
//! are accumulated in a window buffer, products with the tails of `φ` become
//! weighted tail norms, the resolvent is applied per output pair and the
//! rank-two part is returned as the scalars `β`, `η` of `β ℒφ̂ + η ℒℒ'φ̂`.

use rayon::prelude::*;

use super::norms::{weight_up, Group, ModeImage};
use crate::ball::{add_up, div_up, mul_dn, mul_up, pow_up, Ball};
use crate::error::{Error, Result};
use crate::field::FieldEnclosure;
use crate::maps::{BasePoint, MapConfig, MapKind};
use crate::operators::{bilinear_terms_fast, c_bound, n_bound, pair_factors, tail_corners};
use crate::timepoly::tail_product_factors;

/// A base point `φ̄` widened by a ball of radius `fat` in every frequency slot
/// of its map, with the derived data the kernel needs.
#[derive(Clone, Debug)]
pub struct FatBase {
    pub base: BasePoint,
    pub fat: f64,
    cells: Vec<(usize, usize, Vec<(i64, Ball)>)>,
    tails: Vec<(usize, usize, u32, f64)>,
    stationary: bool,
    s: Ball,
    gdot_b: Ball,
    adot_b: Ball,
    adot_a: Ball,
    neg_half_gamma: Ball,
    amin: f64,
    l_norm: f64,
    ll_norm: f64,
}

impl FatBase {
    pub fn new(phi: &FieldEnclosure, cfg: &MapConfig, fat: f64) -> Result<FatBase> {
        if !(fat >= 0.0) || !fat.is_finite() {
            return Err(Error::Parameter(format!("fattening radius must be finite and nonnegative, got {fat}")));
        }
        let mut f = phi.clone();
        if fat > 0.0 {
            for i in 0..f.params().slots() {
                f.add_tail(1, 1, i, fat);
            }
        }
        let base = BasePoint::new(&f, cfg)?;
        FatBase::from_base(base, fat)
    }

    pub fn from_base(base: BasePoint, fat: f64) -> Result<FatBase> {
        let phi = &base.phi;
        let p = phi.params();
        let map = p.map.clone();
        let ic = map.capacity();
        let mut cells = Vec::new();
        for (j, k) in phi.nonzero_cells() {
            let c = phi.cell_coeffs(j, k);
            let v: Vec<(i64, Ball)> = (0..c.len()).filter(|&pos| !c[pos].is_zero()).map(|pos| (map.freq_at_pos(pos), c[pos])).collect();
            debug_assert!(v.iter().all(|&(n, _)| n.unsigned_abs() as usize <= map.max_freq() as usize) && ic == map.capacity());
            cells.push((j, k, v));
        }
        let tails = phi.tail_entries().into_iter().map(|(j, k, i, e)| (j, k, map.freq(i), e)).collect();
        let (gdot_b, adot_b, adot_a) = if base.cfg.kind == MapKind::Stationary { (Ball::ZERO, Ball::ZERO, Ball::ZERO) } else { base.rank_two_scalars()? };
        Ok(FatBase {
            stationary: base.cfg.kind == MapKind::Stationary,
            s: base.cfg.s,
            neg_half_gamma: base.ga.gamma * Ball::exact(-0.5),
            amin: base.ga.alpha.mig(),
            l_norm: base.l_hat.norm_up(),
            ll_norm: base.ll_hat.norm_up(),
            gdot_b,
            adot_b,
            adot_a,
            cells,
            tails,
            fat,
            base,
        })
    }

    pub fn rho(&self) -> f64 {
        self.base.phi.params().rho
    }

    pub fn varrho(&self) -> f64 {
        self.base.phi.params().varrho
    }

    pub fn max_freq(&self) -> u32 {
        self.base.phi.params().map.max_freq()
    }

    /// Largest wavenumber carrying a coefficient of `φ`.
    pub fn max_wavenumber(&self) -> usize {
        self.cells.iter().map(|c| c.0.max(c.1)).max().unwrap_or(0)
    }

    pub fn coefficient_cells(&self) -> &[(usize, usize, Vec<(i64, Ball)>)] {
        &self.cells
    }

    pub fn tails(&self) -> &[(usize, usize, u32, f64)] {
        &self.tails
    }

    /// Weight of `𝕃(φ_p)ψ_n` in `𝕃_s`.
    fn parity_weight(&self, p: i64, n: i64) -> Ball {
        if !self.stationary && p % 2 != 0 && n % 2 != 0 {
            self.s
        } else {
            Ball::ONE
        }
    }

    /// `max(1, |s|)`.
    pub fn parity_weight_bound(&self) -> f64 {
        if self.stationary {
            1.0
        } else {
            self.s.mag().max(1.0)
        }
    }

    pub fn neg_half_gamma(&self) -> Ball {
        self.neg_half_gamma
    }

    pub fn alpha_min(&self) -> f64 {
        self.amin
    }

    pub fn stationary(&self) -> bool {
        self.stationary
    }

    /// Norms of `ℒφ̂` and `ℒℒ'φ̂`.
    pub fn hat_norms(&self) -> (f64, f64) {
        (self.l_norm, self.ll_norm)
    }

    /// Rank-two scalars `(β, η)` for the functionals `A`, `B` of `ψ̂`.
    pub fn rank_two(&self, a: Ball, b: Ball) -> (Ball, Ball) {
        let beta = self.gdot_b * b * Ball::exact(-0.5);
        let eta = self.neg_half_gamma * (self.adot_b * b + self.adot_a * a) * Ball::exact(-1.0);
        (beta, eta)
    }
}

/// Resolvent pair factors on a grid of cells and frequencies.
#[derive(Clone, Debug)]
pub struct LTable {
    kmax: usize,
    fmax: usize,
    data: Vec<(Ball, Ball)>,
    rho_pow: Vec<f64>,
    varrho_pow: Vec<f64>,
}

impl LTable {
    pub fn new(jmax: usize, kmax: usize, fmax: usize, alpha: Ball, rho: f64, varrho: f64) -> LTable {
        let data: Vec<(Ball, Ball)> = (0..jmax * kmax)
            .into_par_iter()
            .flat_map_iter(|c| {
                let (j, k) = (c / kmax + 1, c % kmax + 1);
                let lam = (j * j + k * k) as f64;
                (0..=fmax).map(move |f| pair_factors(lam, f as u32, alpha, false))
            })
            .collect();
        let rho_pow = (0..=fmax).map(|f| pow_up(rho, f as u32)).collect();
        let varrho_pow = (0..=jmax + kmax).map(|s| pow_up(varrho, s as u32)).collect();
        LTable { kmax, fmax, data, rho_pow, varrho_pow }
    }

    /// Upper bound of the weight of `θ_{±f,j,k}`, equal to `weight_up`.
    #[inline]
    pub fn weight(&self, f: usize, j: usize, k: usize) -> f64 {
        mul_up(self.rho_pow[f], self.varrho_pow[j + k])
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize, f: usize) -> (Ball, Ball) {
        self.data[((j - 1) * self.kmax + k - 1) * (self.fmax + 1) + f]
    }
}

/// Reusable buffers for two columns at a time.
pub struct ColumnKernel<'a> {
    fb: &'a FatBase,
    lt: &'a LTable,
    rmax: usize,
    width: usize,
    jmax: usize,
    kmax: usize,
    buf: [Vec<Ball>; 2],
    mark: Vec<bool>,
    touched: Vec<u32>,
    /// Weighted norm bound of the tail part of each column.
    pub tail: [f64; 2],
    /// Rank-two scalars of each column.
    pub beta: [Ball; 2],
    pub eta: [Ball; 2],
}

impl<'a> ColumnKernel<'a> {
    /// Buffers for inputs with wavenumbers up to `(jin, kin)` and output
    /// frequencies up to `rmax`.
    pub fn new(fb: &'a FatBase, lt: &'a LTable, jin: usize, kin: usize, rmax: usize) -> Result<ColumnKernel<'a>> {
        let p = fb.base.phi.params();
        let jmax = p.jc + jin;
        let kmax = p.kc + kin;
        if lt.fmax < rmax || lt.kmax != kmax || lt.data.len() < jmax * kmax * (lt.fmax + 1) {
            return Err(Error::Shape("resolvent table does not cover the kernel window".into()));
        }
        let width = 2 * rmax + 1;
        Ok(ColumnKernel {
            fb,
            lt,
            rmax,
            width,
            jmax,
            kmax,
            buf: [vec![Ball::ZERO; jmax * kmax * width], vec![Ball::ZERO; jmax * kmax * width]],
            mark: vec![false; jmax * kmax],
            touched: Vec::new(),
            tail: [0.0; 2],
            beta: [Ball::ZERO; 2],
            eta: [Ball::ZERO; 2],
        })
    }

    /// Window extents `(jmax, kmax)` for the given input extents.
    pub fn window(fb: &FatBase, jin: usize, kin: usize) -> (usize, usize) {
        let p = fb.base.phi.params();
        (p.jc + jin, p.kc + kin)
    }

    pub fn rmax(&self) -> usize {
        self.rmax
    }

    pub fn clear(&mut self) {
        let w = self.width;
        for &c in &self.touched {
            let c = c as usize;
            self.mark[c] = false;
            for b in self.buf.iter_mut() {
                b[c * w..(c + 1) * w].fill(Ball::ZERO);
            }
        }
        self.touched.clear();
        self.tail = [0.0; 2];
        self.beta = [Ball::ZERO; 2];
        self.eta = [Ball::ZERO; 2];
    }

    /// Evaluate `Dℱ θ_{n,j,k}` into column `slot`, without the rank-two part.
    pub fn run(&mut self, slot: usize, n: i64, j: usize, k: usize) -> Result<()> {
        let fb = self.fb;
        let (rmax, w, kmax) = (self.rmax as i64, self.width, self.kmax);
        if n.unsigned_abs() + fb.max_freq() as u64 > rmax as u64 {
            return Err(Error::Shape(format!("output frequencies of mode {n} exceed the kernel window")));
        }
        if j + fb.base.phi.params().jc > self.jmax || k + fb.base.phi.params().kc > self.kmax {
            return Err(Error::Shape(format!("wavenumbers ({j},{k}) exceed the kernel window")));
        }
        let mut fv: [(i64, Ball); 8] = [(0, Ball::ZERO); 8];
        for (jj, kk, coeffs) in &fb.cells {
            let (terms, len) = bilinear_terms_fast(*jj, *kk, j, k);
            if len == 0 {
                continue;
            }
            let mut nf = 0;
            for &(p, a) in coeffs {
                let wt = fb.parity_weight(p, n);
                if wt.is_zero() {
                    continue;
                }
                for (r, c) in crate::timepoly::cosi_mul(p, n) {
                    if c == 0.0 {
                        continue;
                    }
                    let mut v = a.scale(2.0 * c);
                    if wt != Ball::ONE {
                        v = v * wt;
                    }
                    match fv[..nf].iter_mut().find(|e| e.0 == r) {
                        Some(e) => e.1 += v,
                        None => {
                            fv[nf] = (r, v);
                            nf += 1;
                        }
                    }
                }
            }
            if nf == 0 {
                continue;
            }
            let buf = &mut self.buf[slot];
            for t in &terms[..len] {
                let c = (t.j - 1) * kmax + t.k - 1;
                if !self.mark[c] {
                    self.mark[c] = true;
                    self.touched.push(c as u32);
                }
                let base = c * w;
                for &(r, v) in &fv[..nf] {
                    buf[base + (r + rmax) as usize] += v * t.coeff;
                }
            }
        }

        // products with the tails of φ
        let (rho, varrho) = (fb.rho(), fb.varrho());
        let wpsi = weight_up(rho, varrho, n, j, k);
        let hg = fb.neg_half_gamma.mag();
        let mut tail = 0.0;
        let mut ab_rad = 0.0;
        let read_den = mul_dn(mul_dn(rho, varrho), varrho);
        for &(j0, k0, fm, e) in &fb.tails {
            let wt = fb.parity_weight(fm as i64, n);
            if wt.is_zero() {
                continue;
            }
            let nb = n_bound(j, k, j0, k0);
            let base = mul_up(mul_up(mul_up(wpsi, e), nb), mul_up(2.0, wt.mag()));
            for (f, fac) in tail_product_factors(n.unsigned_abs() as u32, fm, rho) {
                let v = mul_up(base, fac);
                for (cj, ck) in tail_corners(j0, k0, j, k) {
                    let lam = (cj * cj + ck * ck) as f64;
                    tail = add_up(tail, mul_up(mul_up(v, c_bound(f, lam, fb.amin)), hg));
                    if (cj, ck) == (1, 1) && f == 1 {
                        ab_rad = add_up(ab_rad, div_up(v, read_den));
                    }
                }
            }
        }
        self.tail[slot] = tail;

        let buf = &mut self.buf[slot];
        if !fb.stationary {
            let (a, b) = if self.mark[0] { (buf[(rmax + 1) as usize], buf[(rmax - 1) as usize]) } else { (Ball::ZERO, Ball::ZERO) };
            let (a, b) = (a.inflate(ab_rad), b.inflate(ab_rad));
            let (beta, eta) = fb.rank_two(a, b);
            self.beta[slot] = beta;
            self.eta[slot] = eta;
        }

        let hgb = fb.neg_half_gamma;
        let rm = rmax as usize;
        for &c in &self.touched {
            let c = c as usize;
            let (cj, ck) = (c / kmax + 1, c % kmax + 1);
            let cell = &mut buf[c * w..(c + 1) * w];
            if !cell[rm].is_zero() {
                cell[rm] = cell[rm] * self.lt.get(cj, ck, 0).0 * hgb;
            }
            for f in 1..=rm {
                let (xp, xm) = (cell[rm + f], cell[rm - f]);
                if xp.is_zero() && xm.is_zero() {
                    continue;
                }
                let (a, b) = self.lt.get(cj, ck, f);
                cell[rm + f] = (a * xp - b * xm) * hgb;
                cell[rm - f] = (a * xm + b * xp) * hgb;
            }
        }
        Ok(())
    }

    /// Touched output cells as `(j, k)`, in a fixed order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.touched.iter().map(move |&c| {
            let c = c as usize;
            (c / self.kmax + 1, c % self.kmax + 1, c)
        })
    }

    /// Signed-frequency values of a touched cell, index `r + rmax`.
    #[inline]
    pub fn cell(&self, slot: usize, c: usize) -> &[Ball] {
        &self.buf[slot][c * self.width..(c + 1) * self.width]
    }

    /// Add `β l̂ + η l̂l̂` to column `slot`; returns the norm bound of the part
    /// outside the window.
    fn add_rank_two(&mut self, slot: usize) -> f64 {
        let (beta, eta) = (self.beta[slot], self.eta[slot]);
        if beta.is_zero() && eta.is_zero() {
            return 0.0;
        }
        if beta.center() == 0.0 && eta.center() == 0.0 {
            let (ln, lln) = self.fb.hat_norms();
            return add_up(mul_up(beta.mag(), ln), mul_up(eta.mag(), lln));
        }
        let (rm, w, kmax) = (self.rmax, self.width, self.kmax);
        let mut out = 0.0;
        for (f, s) in [(&self.fb.base.l_hat, beta), (&self.fb.base.ll_hat, eta)] {
            if s.is_zero() {
                continue;
            }
            let p = f.params();
            let ic = p.map.capacity();
            out = add_up(out, mul_up(s.mag(), f.tail_total()));
            for j in 1..=p.jc {
                for k in 1..=p.kc {
                    let cc = f.cell_coeffs(j, k);
                    for (pos, x) in cc.iter().enumerate() {
                        if x.is_zero() {
                            continue;
                        }
                        let fr = if pos >= ic { p.map.freq(pos - ic) as i64 } else { -(p.map.freq(ic - pos) as i64) };
                        if j > self.jmax || k > kmax || fr.unsigned_abs() as usize > rm {
                            let pw = weight_up(p.rho, p.varrho, fr, j, k);
                            out = add_up(out, mul_up(pw, (s * *x).mag()));
                            continue;
                        }
                        let c = (j - 1) * kmax + k - 1;
                        if !self.mark[c] {
                            self.mark[c] = true;
                            self.touched.push(c as u32);
                        }
                        self.buf[slot][c * w + (fr + rm as i64) as usize] += s * *x;
                    }
                }
            }
        }
        out
    }

    /// Mode image of `θ_{±n,j,k}` (one column for `n = 0`).
    pub fn mode_image(&mut self, n: u32, j: usize, k: usize) -> Result<ModeImage> {
        self.clear();
        let two = n > 0;
        self.run(0, n as i64, j, k)?;
        if two {
            self.run(1, -(n as i64), j, k)?;
        }
        let rank = [self.add_rank_two(0), if two { self.add_rank_two(1) } else { 0.0 }];
        let rm = self.rmax;
        let ncols = if two { 2 } else { 1 };
        let mut img = ModeImage { two, ..Default::default() };
        for (cj, ck, c) in self.cells() {
            for f in 0..=rm {
                let nz = (0..ncols).any(|s| {
                    let cell = self.cell(s, c);
                    !cell[rm + f].is_zero() || !cell[rm - f].is_zero()
                });
                if !nz {
                    continue;
                }
                let wgt = self.lt.weight(f, cj, ck);
                let mut g = Group { w: wgt, x: [[0.0; 2]; 2] };
                for s in 0..ncols {
                    let cell = self.cell(s, c);
                    let (xp, xm) = if f == 0 { (cell[rm], Ball::ZERO) } else { (cell[rm + f], cell[rm - f]) };
                    g.x[0][s] = xp.center();
                    g.x[1][s] = xm.center();
                    let r = crate::ball::sqrt_up(add_up(mul_up(xp.radius(), xp.radius()), mul_up(xm.radius(), xm.radius())));
                    if r != 0.0 {
                        img.radius[s] = add_up(img.radius[s], mul_up(wgt, r));
                    }
                }
                if g.x.iter().flatten().any(|&v| v != 0.0) {
                    img.groups.push(g);
                }
            }
        }
        for s in 0..ncols {
            img.radius[s] = add_up(add_up(img.radius[s], self.tail[s]), rank[s]);
        }
        Ok(img)
    }
}
