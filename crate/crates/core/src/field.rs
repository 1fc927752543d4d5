//! Enclosures of space-time fields: a grid of time polynomials plus tail sets.
//!
//! A field is `Σ_{j,k} Φ_{j,k}(t) sin(jx) sin(ky)`. Coefficients for `(j,k)` in
//! `[1,J_c]×[1,K_c]` are stored explicitly; `tails[(J,K,i)]` bounds the norm of an
//! unspecified function supported on `j >= J`, `k >= K` and time frequency `ν(i)`.

use std::sync::Arc;

use crate::ball::{add_dn, add_up, div_up, mul_dn, mul_up, pow_dn, pow_up, Ball};
use crate::error::{shape, Error, Result};
use crate::timepoly::{slot_weights_dn, slot_weights_up, weighted_norm_up, FreqIndexMap, TimePoly};

pub const DEFAULT_RHO: f64 = 32.0;
pub const DEFAULT_VARRHO: f64 = 1.0 + 1.0 / 256.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceParams {
    pub rho: f64,
    pub varrho: f64,
    pub jc: usize,
    pub kc: usize,
    pub je: usize,
    pub ke: usize,
    pub map: Arc<FreqIndexMap>,
}

impl SpaceParams {
    pub fn new(rho: f64, varrho: f64, jc: usize, kc: usize, je: usize, ke: usize, map: FreqIndexMap) -> Result<SpaceParams> {
        if !(rho > 1.0) || !(varrho > 1.0) || !rho.is_finite() || !varrho.is_finite() {
            return Err(Error::Parameter(format!("weights must exceed 1: rho={rho}, varrho={varrho}")));
        }
        if jc == 0 || kc == 0 || je == 0 || ke == 0 {
            return Err(Error::Parameter("grid extents must be positive".into()));
        }
        Ok(SpaceParams { rho, varrho, jc, kc, je, ke, map: Arc::new(map) })
    }

    /// Default weights with tails one past the coefficient grid.
    pub fn standard(jc: usize, kc: usize, map: FreqIndexMap) -> SpaceParams {
        SpaceParams::new(DEFAULT_RHO, DEFAULT_VARRHO, jc, kc, jc + 1, kc + 1, map).unwrap()
    }

    pub fn with_grid(&self, jc: usize, kc: usize) -> SpaceParams {
        SpaceParams { jc, kc, je: self.je.max(jc + 1), ke: self.ke.max(kc + 1), ..self.clone() }
    }

    pub fn with_tails(&self, je: usize, ke: usize) -> SpaceParams {
        SpaceParams { je, ke, ..self.clone() }
    }

    pub fn with_map(&self, map: FreqIndexMap) -> SpaceParams {
        SpaceParams { map: Arc::new(map), ..self.clone() }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.map.width()
    }

    #[inline]
    pub fn slots(&self) -> usize {
        self.map.capacity() + 1
    }

    /// Upper bounds of `ϱ^s` for `s = 0..=smax`.
    pub fn varrho_pows_up(&self, smax: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(smax + 1);
        let mut x = 1.0;
        for _ in 0..=smax {
            v.push(x);
            x = mul_up(x, self.varrho);
        }
        v
    }

    pub fn varrho_pows_dn(&self, smax: usize) -> Vec<f64> {
        (0..=smax).map(|s| pow_dn(self.varrho, s as u32)).collect()
    }

    /// Upper bound of the weight `ρ^{|n|} ϱ^{j+k}` of `θ_{n,j,k}`.
    pub fn weight_up(&self, n: i64, j: usize, k: usize) -> f64 {
        mul_up(pow_up(self.rho, n.unsigned_abs() as u32), pow_up(self.varrho, (j + k) as u32))
    }

    pub fn weight_dn(&self, n: i64, j: usize, k: usize) -> f64 {
        mul_dn_pos(pow_dn(self.rho, n.unsigned_abs() as u32), pow_dn(self.varrho, (j + k) as u32))
    }

    /// Same shape apart from weights.
    pub fn same_shape(&self, o: &SpaceParams) -> bool {
        self == o
    }
}

fn mul_dn_pos(a: f64, b: f64) -> f64 {
    mul_dn(a, b).max(0.0)
}

/// A frequency-wavenumber triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub n: u32,
    pub j: usize,
    pub k: usize,
}

/// The span of `θ_{±n,j,k}` with coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub index: ModeIndex,
    pub c_plus: Ball,
    pub c_minus: Ball,
}

impl Mode {
    pub fn new(index: ModeIndex, c_plus: Ball, c_minus: Ball) -> Result<Mode> {
        if index.j == 0 || index.k == 0 {
            return Err(shape("mode wavenumbers must be >= 1"));
        }
        if index.n == 0 && !c_minus.is_zero() {
            return Err(shape("frequency-0 mode has no sine partner"));
        }
        Ok(Mode { index, c_plus, c_minus })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldEnclosure {
    params: SpaceParams,
    coeffs: Vec<Ball>,
    tails: Vec<f64>,
}

impl FieldEnclosure {
    pub fn zero(params: &SpaceParams) -> FieldEnclosure {
        FieldEnclosure {
            coeffs: vec![Ball::ZERO; params.jc * params.kc * params.width()],
            tails: vec![0.0; params.je * params.ke * params.slots()],
            params: params.clone(),
        }
    }

    /// `Σ c θ_{n,j,k}` over the given triples.
    pub fn from_terms(params: &SpaceParams, terms: &[(i64, usize, usize, Ball)]) -> Result<FieldEnclosure> {
        let mut f = FieldEnclosure::zero(params);
        for &(n, j, k, c) in terms {
            f.add_coeff(n, j, k, c)?;
        }
        Ok(f)
    }

    pub fn from_mode(params: &SpaceParams, m: &Mode) -> Result<FieldEnclosure> {
        let i = m.index;
        let mut f = FieldEnclosure::zero(params);
        f.set(i.n as i64, i.j, i.k, m.c_plus)?;
        if i.n > 0 {
            f.set(-(i.n as i64), i.j, i.k, m.c_minus)?;
        }
        Ok(f)
    }

    #[inline]
    pub fn params(&self) -> &SpaceParams {
        &self.params
    }

    #[inline]
    pub fn map(&self) -> &FreqIndexMap {
        &self.params.map
    }

    #[inline]
    fn cell(&self, j: usize, k: usize) -> usize {
        ((j - 1) * self.params.kc + (k - 1)) * self.params.width()
    }

    #[inline]
    fn tail_idx(&self, j: usize, k: usize, i: usize) -> usize {
        ((j - 1) * self.params.ke + (k - 1)) * self.params.slots() + i
    }

    pub fn in_grid(&self, j: usize, k: usize) -> bool {
        j >= 1 && k >= 1 && j <= self.params.jc && k <= self.params.kc
    }

    /// Coefficient of `θ_{n,j,k}`; zero outside the grid or index map.
    pub fn get(&self, n: i64, j: usize, k: usize) -> Ball {
        if !self.in_grid(j, k) {
            return Ball::ZERO;
        }
        match self.params.map.pos_of(n) {
            Some(p) => self.coeffs[self.cell(j, k) + p],
            None => Ball::ZERO,
        }
    }

    pub fn set(&mut self, n: i64, j: usize, k: usize, c: Ball) -> Result<()> {
        let p = self.pos(n, j, k)?;
        self.coeffs[p] = c;
        Ok(())
    }

    pub fn add_coeff(&mut self, n: i64, j: usize, k: usize, c: Ball) -> Result<()> {
        let p = self.pos(n, j, k)?;
        self.coeffs[p] += c;
        Ok(())
    }

    fn pos(&self, n: i64, j: usize, k: usize) -> Result<usize> {
        if !self.in_grid(j, k) {
            return Err(shape(format!("wavenumbers ({j},{k}) outside the {}x{} grid", self.params.jc, self.params.kc)));
        }
        let p = self.params.map.pos_of(n).ok_or_else(|| shape(format!("frequency {n} not representable")))?;
        Ok(self.cell(j, k) + p)
    }

    /// Signed-slot coefficients of cell `(j,k)`.
    #[inline]
    pub fn cell_coeffs(&self, j: usize, k: usize) -> &[Ball] {
        let c = self.cell(j, k);
        &self.coeffs[c..c + self.params.width()]
    }

    #[inline]
    pub fn cell_coeffs_mut(&mut self, j: usize, k: usize) -> &mut [Ball] {
        let c = self.cell(j, k);
        let w = self.params.width();
        &mut self.coeffs[c..c + w]
    }

    pub fn poly(&self, j: usize, k: usize) -> TimePoly {
        TimePoly::from_coeffs(self.params.map.clone(), self.cell_coeffs(j, k).to_vec()).unwrap()
    }

    pub fn set_poly(&mut self, j: usize, k: usize, p: &TimePoly) -> Result<()> {
        if **p.map() != *self.params.map || !self.in_grid(j, k) {
            return Err(shape("polynomial does not match the field's index map or grid"));
        }
        self.cell_coeffs_mut(j, k).copy_from_slice(p.coeffs());
        Ok(())
    }

    pub fn tail(&self, j: usize, k: usize, i: usize) -> f64 {
        if j == 0 || k == 0 || j > self.params.je || k > self.params.ke {
            return 0.0;
        }
        self.tails[self.tail_idx(j, k, i)]
    }

    /// Add `r` to the tail set of functions supported on `j' >= j`, `k' >= k`, slot `i`.
    /// Corners past the tail grid are clamped, which only enlarges the set.
    pub fn add_tail(&mut self, j: usize, k: usize, i: usize, r: f64) {
        debug_assert!(r >= 0.0 && j >= 1 && k >= 1);
        if r == 0.0 {
            return;
        }
        let (j, k) = (j.min(self.params.je), k.min(self.params.ke));
        let t = self.tail_idx(j, k, i);
        self.tails[t] = add_up(self.tails[t], r);
    }

    /// As [`add_tail`](Self::add_tail), addressed by frequency magnitude.
    pub fn add_tail_freq(&mut self, j: usize, k: usize, f: u32, r: f64) -> Result<()> {
        if r == 0.0 {
            return Ok(());
        }
        let i = self.params.map.slot_of(f).ok_or_else(|| shape(format!("frequency {f} not representable")))?;
        self.add_tail(j, k, i, r);
        Ok(())
    }

    pub fn tails_raw(&self) -> &[f64] {
        &self.tails
    }

    pub fn coeffs_raw(&self) -> &[Ball] {
        &self.coeffs
    }

    pub fn has_tails(&self) -> bool {
        self.tails.iter().any(|&t| t != 0.0)
    }

    pub fn tail_total(&self) -> f64 {
        self.tails.iter().fold(0.0, |a, &b| add_up(a, b))
    }

    /// Nonzero tail entries as `(J, K, slot, radius)`.
    pub fn tail_entries(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut v = Vec::new();
        let s = self.params.slots();
        for j in 1..=self.params.je {
            for k in 1..=self.params.ke {
                for i in 0..s {
                    let r = self.tails[self.tail_idx(j, k, i)];
                    if r != 0.0 {
                        v.push((j, k, i, r));
                    }
                }
            }
        }
        v
    }

    /// Cells with at least one nonzero coefficient.
    pub fn nonzero_cells(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for j in 1..=self.params.jc {
            for k in 1..=self.params.kc {
                if self.cell_coeffs(j, k).iter().any(|c| !c.is_zero()) {
                    v.push((j, k));
                }
            }
        }
        v
    }

    /// Largest coefficient radius.
    pub fn max_radius(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.radius()))
    }

    /// Upper bound of the 𝔅-norm.
    pub fn norm_up(&self) -> f64 {
        let p = &self.params;
        let wt = slot_weights_up(&p.map, p.rho);
        let vr = p.varrho_pows_up(p.jc + p.kc);
        let mut acc = 0.0;
        for j in 1..=p.jc {
            for k in 1..=p.kc {
                let c = self.cell_coeffs(j, k);
                if c.iter().all(|b| b.is_zero()) {
                    continue;
                }
                acc = add_up(acc, mul_up(weighted_norm_up(&p.map, c, &wt), vr[j + k]));
            }
        }
        add_up(acc, self.tail_total())
    }

    /// Lower bound of the 𝔅-norm over all enclosed functions.
    pub fn norm_dn(&self) -> f64 {
        let p = &self.params;
        let wt = slot_weights_dn(&p.map, p.rho);
        let vr = p.varrho_pows_dn(p.jc + p.kc);
        let ic = p.map.capacity();
        let mut acc = 0.0f64;
        for j in 1..=p.jc {
            for k in 1..=p.kc {
                let c = self.cell_coeffs(j, k);
                let mut s = c[ic].mig();
                for i in 1..=ic {
                    s = add_dn(s, mul_dn(crate::timepoly::pair_dn(&c[ic + i], &c[ic - i]), wt[i]));
                }
                acc = add_dn(acc, mul_dn(s.max(0.0), vr[j + k]));
            }
        }
        add_dn(acc, -self.tail_total()).max(0.0)
    }

    /// Enclosure of the 𝔅-norm.
    pub fn field_norm(&self) -> Result<Ball> {
        let hi = self.norm_up();
        if !hi.is_finite() {
            return Err(Error::Overflow("field_norm"));
        }
        Ball::from_bounds(self.norm_dn().min(hi), hi)
    }

    /// `𝔼_N`: keep frequency magnitudes with `keep(|n|)`.
    pub fn project_freq(&self, keep: impl Fn(u32) -> bool) -> FieldEnclosure {
        let mut f = self.clone();
        let map = self.params.map.clone();
        let w = map.width();
        for (p, c) in f.coeffs.iter_mut().enumerate() {
            if !keep(map.freq_at_pos(p % w).unsigned_abs() as u32) {
                *c = Ball::ZERO;
            }
        }
        let s = self.params.slots();
        for (t, r) in f.tails.iter_mut().enumerate() {
            if !keep(map.freq(t % s)) {
                *r = 0.0;
            }
        }
        f
    }

    pub fn even_part(&self) -> FieldEnclosure {
        self.project_freq(|n| n % 2 == 0)
    }

    pub fn odd_part(&self) -> FieldEnclosure {
        self.project_freq(|n| n % 2 == 1)
    }

    /// `ℙ_m`: drop coefficients with `j > m` or `k > m`; tails with a corner inside stay.
    pub fn project_wavenumber(&self, m: usize) -> FieldEnclosure {
        let mut f = self.clone();
        for j in 1..=self.params.jc {
            for k in 1..=self.params.kc {
                if j > m || k > m {
                    f.cell_coeffs_mut(j, k).fill(Ball::ZERO);
                }
            }
        }
        for j in 1..=self.params.je {
            for k in 1..=self.params.ke {
                if j > m || k > m {
                    for i in 0..self.params.slots() {
                        let t = f.tail_idx(j, k, i);
                        f.tails[t] = 0.0;
                    }
                }
            }
        }
        f
    }

    /// Read the `cosi_{±1}` coefficient at `(1,1)`, widened by overlapping tails.
    fn read_11(&self, n: i64) -> Result<Ball> {
        let p = &self.params;
        let i = p.map.slot_of(1).ok_or_else(|| shape("index map cannot represent frequency 1"))?;
        let c = self.get(n, 1, 1);
        let e = self.tail(1, 1, i);
        if e == 0.0 {
            return Ok(c);
        }
        Ok(c.inflate(div_up(e, mul_dn(mul_dn(p.rho, p.varrho), p.varrho))))
    }

    /// `Aφ = φ_{1,1,1}`.
    pub fn functional_a(&self) -> Result<Ball> {
        self.read_11(1)
    }

    /// `Bφ = φ_{-1,1,1}`.
    pub fn functional_b(&self) -> Result<Ball> {
        self.read_11(-1)
    }

    fn check_shape(&self, o: &FieldEnclosure) -> Result<()> {
        if self.params.same_shape(&o.params) {
            Ok(())
        } else {
            Err(shape("operands have different space parameters"))
        }
    }

    pub fn add(&self, o: &FieldEnclosure) -> Result<FieldEnclosure> {
        self.check_shape(o)?;
        let mut f = self.clone();
        f.add_assign(o);
        Ok(f)
    }

    pub fn sub(&self, o: &FieldEnclosure) -> Result<FieldEnclosure> {
        self.check_shape(o)?;
        let mut f = self.clone();
        for (a, b) in f.coeffs.iter_mut().zip(&o.coeffs) {
            if !b.is_zero() {
                *a -= *b;
            }
        }
        for (a, b) in f.tails.iter_mut().zip(&o.tails) {
            if *b != 0.0 {
                *a = add_up(*a, *b);
            }
        }
        Ok(f)
    }

    /// In-place sum; shapes must agree.
    pub fn add_assign(&mut self, o: &FieldEnclosure) {
        assert!(self.params.same_shape(&o.params), "shape mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&o.coeffs) {
            if !b.is_zero() {
                *a += *b;
            }
        }
        for (a, b) in self.tails.iter_mut().zip(&o.tails) {
            if *b != 0.0 {
                *a = add_up(*a, *b);
            }
        }
    }

    pub fn scale(&self, s: Ball) -> FieldEnclosure {
        let mut f = self.clone();
        for c in f.coeffs.iter_mut() {
            if !c.is_zero() {
                *c = *c * s;
            }
        }
        let m = s.mag();
        for t in f.tails.iter_mut() {
            if *t != 0.0 {
                *t = mul_up(*t, m);
            }
        }
        f
    }

    /// Re-express on another shape. Coefficients outside the new grid move to
    /// tails by norm; frequencies the new map lacks are a shape error.
    pub fn embed(&self, params: &SpaceParams) -> Result<FieldEnclosure> {
        if params.rho != self.params.rho || params.varrho != self.params.varrho {
            return Err(shape("embedding requires equal weights"));
        }
        let mut f = FieldEnclosure::zero(params);
        let src = &self.params.map;
        let wt = slot_weights_up(src, self.params.rho);
        let vr = self.params.varrho_pows_up(self.params.jc + self.params.kc);
        for j in 1..=self.params.jc {
            for k in 1..=self.params.kc {
                let c = self.cell_coeffs(j, k);
                for (p, b) in c.iter().enumerate() {
                    if b.is_zero() {
                        continue;
                    }
                    let n = src.freq_at_pos(p);
                    if f.in_grid(j, k) {
                        f.set(n, j, k, *b)?;
                    } else {
                        let i = src.slot_at_pos(p);
                        let r = mul_up(mul_up(b.mag(), wt[i]), vr[j + k]);
                        f.add_tail_freq(j, k, n.unsigned_abs() as u32, r)?;
                    }
                }
            }
        }
        for (j, k, i, r) in self.tail_entries() {
            f.add_tail_freq(j, k, src.freq(i), r)?;
        }
        Ok(f)
    }

    /// Replace coefficients by exact midpoints, dropping radii and tails.
    pub fn midpoint(&self) -> FieldEnclosure {
        let mut f = self.clone();
        for c in f.coeffs.iter_mut() {
            *c = Ball::exact(c.center());
        }
        f.tails.fill(0.0);
        f
    }

    /// Move every coefficient radius into an exact center plus a norm tail per
    /// slot at the coefficient's own corner.
    pub fn split_radii(&self) -> FieldEnclosure {
        let p = self.params.clone();
        let mut f = self.clone();
        let wt = slot_weights_up(&p.map, p.rho);
        let vr = p.varrho_pows_up(p.jc + p.kc);
        for j in 1..=p.jc {
            for k in 1..=p.kc {
                for q in 0..p.width() {
                    let b = f.cell_coeffs(j, k)[q];
                    if b.radius() == 0.0 {
                        continue;
                    }
                    let i = p.map.slot_at_pos(q);
                    f.cell_coeffs_mut(j, k)[q] = Ball::exact(b.center());
                    f.add_tail(j, k, i, mul_up(mul_up(b.radius(), wt[i]), vr[j + k]));
                }
            }
        }
        f
    }
}
