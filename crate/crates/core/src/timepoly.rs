//! Time-Fourier polynomials over the cosi basis.
//!
//! `cosi_n(t) = cos(nt)` for `n >= 0` and `sin(-nt)` for `n < 0`. A polynomial is
//! stored by slot `i` in `-Ic..=Ic`, where slot `i` holds the coefficient of
//! `cosi_{ν(i)}` and `ν` is an odd increasing index function.

use std::sync::Arc;

use crate::ball::{add_dn, add_up, div_up, mul_dn, mul_up, pow_dn, pow_up, sqrt_dn, sqrt_up, Ball};
use crate::error::{shape, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FreqIndexMap {
    freqs: Vec<u32>,
}

impl FreqIndexMap {
    /// `ν(i) = i` on `-ic..=ic`.
    pub fn identity(ic: usize) -> FreqIndexMap {
        FreqIndexMap { freqs: (0..=ic as u32).collect() }
    }

    /// Slots `{0, ±n}`.
    pub fn single(n: u32) -> FreqIndexMap {
        if n == 0 {
            FreqIndexMap::identity(0)
        } else {
            FreqIndexMap { freqs: vec![0, n] }
        }
    }

    /// Slots `{0, ±(n-1), ±n, ±(n+1)}` for `n >= 2`.
    pub fn band(n: u32) -> FreqIndexMap {
        assert!(n >= 2, "band index map needs n >= 2");
        FreqIndexMap { freqs: vec![0, n - 1, n, n + 1] }
    }

    pub fn from_freqs(freqs: Vec<u32>) -> Result<FreqIndexMap> {
        if freqs.first() != Some(&0) || freqs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(shape(format!("index map must start at 0 and increase: {freqs:?}")));
        }
        Ok(FreqIndexMap { freqs })
    }

    /// `I_c`.
    #[inline]
    pub fn capacity(&self) -> usize {
        self.freqs.len() - 1
    }

    /// Number of signed slots, `2 I_c + 1`.
    #[inline]
    pub fn width(&self) -> usize {
        2 * self.freqs.len() - 1
    }

    /// `ν(i)` for `i >= 0`.
    #[inline]
    pub fn freq(&self, i: usize) -> u32 {
        self.freqs[i]
    }

    pub fn freqs(&self) -> &[u32] {
        &self.freqs
    }

    pub fn max_freq(&self) -> u32 {
        *self.freqs.last().unwrap()
    }

    /// Slot `i >= 0` with `ν(i) = f`.
    pub fn slot_of(&self, f: u32) -> Option<usize> {
        self.freqs.binary_search(&f).ok()
    }

    /// Storage position of signed frequency `n`.
    #[inline]
    pub fn pos_of(&self, n: i64) -> Option<usize> {
        let i = self.slot_of(n.unsigned_abs() as u32)?;
        Some(self.pos(i as i64 * n.signum()))
    }

    /// Storage position of signed slot `s`.
    #[inline]
    pub fn pos(&self, s: i64) -> usize {
        (s + self.capacity() as i64) as usize
    }

    /// Signed frequency at storage position `p`.
    #[inline]
    pub fn freq_at_pos(&self, p: usize) -> i64 {
        let s = p as i64 - self.capacity() as i64;
        s.signum() * self.freqs[s.unsigned_abs() as usize] as i64
    }

    /// Slot magnitude `i >= 0` of storage position `p`.
    #[inline]
    pub fn slot_at_pos(&self, p: usize) -> usize {
        (p as i64 - self.capacity() as i64).unsigned_abs() as usize
    }

    /// Whether this map contains every frequency of `other`.
    pub fn covers(&self, other: &FreqIndexMap) -> bool {
        other.freqs.iter().all(|&f| self.slot_of(f).is_some())
    }

    /// Map holding every frequency of both maps.
    pub fn union(&self, other: &FreqIndexMap) -> FreqIndexMap {
        let mut f: Vec<u32> = self.freqs.iter().chain(other.freqs.iter()).copied().collect();
        f.sort_unstable();
        f.dedup();
        FreqIndexMap { freqs: f }
    }
}

/// The two terms of `cosi_p * cosi_q` as `(signed frequency, coefficient)`.
pub fn cosi_mul(p: i64, q: i64) -> [(i64, f64); 2] {
    let (a, b) = (p.abs(), q.abs());
    match (p >= 0, q >= 0) {
        (true, true) => [((a - b).abs(), 0.5), (a + b, 0.5)],
        (false, false) => [((a - b).abs(), 0.5), (a + b, -0.5)],
        (false, true) => [sin_term(a - b, 0.5), (-(a + b), 0.5)],
        (true, false) => [sin_term(b - a, 0.5), (-(a + b), 0.5)],
    }
}

/// `c * sin(x t)` expressed on the cosi basis.
fn sin_term(x: i64, c: f64) -> (i64, f64) {
    match x {
        0 => (0, 0.0),
        x if x > 0 => (-x, c),
        x => (x, -c),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimePoly {
    map: Arc<FreqIndexMap>,
    coeffs: Vec<Ball>,
}

impl TimePoly {
    pub fn zero(map: Arc<FreqIndexMap>) -> TimePoly {
        let w = map.width();
        TimePoly { map, coeffs: vec![Ball::ZERO; w] }
    }

    pub fn from_coeffs(map: Arc<FreqIndexMap>, coeffs: Vec<Ball>) -> Result<TimePoly> {
        if coeffs.len() != map.width() {
            return Err(shape(format!("expected {} coefficients, got {}", map.width(), coeffs.len())));
        }
        Ok(TimePoly { map, coeffs })
    }

    /// `c * cosi_n`.
    pub fn monomial(map: Arc<FreqIndexMap>, n: i64, c: Ball) -> Result<TimePoly> {
        let mut p = TimePoly::zero(map);
        p.set(n, c)?;
        Ok(p)
    }

    pub fn map(&self) -> &Arc<FreqIndexMap> {
        &self.map
    }

    pub fn coeffs(&self) -> &[Ball] {
        &self.coeffs
    }

    /// Coefficient of `cosi_n`; zero when `n` is not representable.
    pub fn get(&self, n: i64) -> Ball {
        self.map.pos_of(n).map_or(Ball::ZERO, |p| self.coeffs[p])
    }

    pub fn set(&mut self, n: i64, c: Ball) -> Result<()> {
        let p = self.map.pos_of(n).ok_or_else(|| shape(format!("frequency {n} not representable")))?;
        self.coeffs[p] = c;
        Ok(())
    }

    /// Enclosure of `h(t)`, using libm `cos`/`sin` with a small widening.
    pub fn eval(&self, t: f64) -> Ball {
        let mut acc = Ball::ZERO;
        for (p, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let n = self.map.freq_at_pos(p);
            let v = if n >= 0 { (n as f64 * t).cos() } else { (-(n as f64) * t).sin() };
            acc += *c * Ball::raw(v, 4.0 * f64::EPSILON * (1.0 + (n as f64 * t).abs()));
        }
        acc
    }
}

/// Per-slot nonnegative norm bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct TailRadii {
    radii: Vec<f64>,
}

impl TailRadii {
    pub fn zero(ic: usize) -> TailRadii {
        TailRadii { radii: vec![0.0; ic + 1] }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn get(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn add(&mut self, i: usize, r: f64) {
        debug_assert!(r >= 0.0);
        self.radii[i] = add_up(self.radii[i], r);
    }

    pub fn total(&self) -> f64 {
        self.radii.iter().fold(0.0, |a, &b| add_up(a, b))
    }

    pub fn is_zero(&self) -> bool {
        self.radii.iter().all(|&r| r == 0.0)
    }
}

/// Upper bounds on `ρ^{ν(i)}` per slot.
pub fn slot_weights_up(map: &FreqIndexMap, rho: f64) -> Vec<f64> {
    map.freqs().iter().map(|&f| pow_up(rho, f)).collect()
}

pub fn slot_weights_dn(map: &FreqIndexMap, rho: f64) -> Vec<f64> {
    map.freqs().iter().map(|&f| pow_dn(rho, f)).collect()
}

/// Upper bound of the unweighted pair norm `sqrt(a^2 + b^2)`.
#[inline]
pub fn pair_up(a: &Ball, b: &Ball) -> f64 {
    let (x, y) = (a.mag(), b.mag());
    if y == 0.0 {
        return x;
    }
    if x == 0.0 {
        return y;
    }
    sqrt_up(add_up(mul_up(x, x), mul_up(y, y)))
}

#[inline]
pub fn pair_dn(a: &Ball, b: &Ball) -> f64 {
    let (x, y) = (a.mig(), b.mig());
    if y == 0.0 {
        return x;
    }
    if x == 0.0 {
        return y;
    }
    sqrt_dn(add_dn(mul_dn(x, x), mul_dn(y, y))).max(0.0)
}

/// Upper bound of `Σ_i w_i · pair_i` over signed slot storage.
pub fn weighted_norm_up(map: &FreqIndexMap, coeffs: &[Ball], w_up: &[f64]) -> f64 {
    let ic = map.capacity();
    let mut acc = coeffs[ic].mag();
    for i in 1..=ic {
        let r = pair_up(&coeffs[ic + i], &coeffs[ic - i]);
        if r != 0.0 {
            acc = add_up(acc, mul_up(r, w_up[i]));
        }
    }
    acc
}

fn weighted_norm_dn(map: &FreqIndexMap, coeffs: &[Ball], w_dn: &[f64]) -> f64 {
    let ic = map.capacity();
    let mut acc = coeffs[ic].mig();
    for i in 1..=ic {
        acc = add_dn(acc, mul_dn(pair_dn(&coeffs[ic + i], &coeffs[ic - i]), w_dn[i]));
    }
    acc.max(0.0)
}

/// Enclosure of the 𝒜-norm over all enclosed polynomials.
pub fn poly_norm(a: &TimePoly, rho: f64) -> Result<Ball> {
    if !(rho > 1.0) {
        return Err(crate::error::Error::Parameter(format!("rho must exceed 1, got {rho}")));
    }
    let hi = weighted_norm_up(&a.map, &a.coeffs, &slot_weights_up(&a.map, rho));
    let lo = weighted_norm_dn(&a.map, &a.coeffs, &slot_weights_dn(&a.map, rho)).min(hi);
    Ball::from_bounds(lo, hi)
}

/// Precomputed cosi product terms between two index maps.
#[derive(Clone, Debug)]
pub struct ProductTable {
    /// `(pos_a, pos_b, pos_out, coefficient)` for representable outputs.
    pub terms: Vec<(u16, u16, u16, f64)>,
    /// `(pos_a, pos_b, |f|, coefficient)` for outputs outside the target map.
    pub spills: Vec<(u16, u16, u32, f64)>,
}

impl ProductTable {
    pub fn new(a: &FreqIndexMap, b: &FreqIndexMap, out: &FreqIndexMap) -> ProductTable {
        let mut terms = Vec::new();
        let mut spills = Vec::new();
        for pa in 0..a.width() {
            let p = a.freq_at_pos(pa);
            for pb in 0..b.width() {
                let q = b.freq_at_pos(pb);
                for (f, c) in cosi_mul(p, q) {
                    if c == 0.0 {
                        continue;
                    }
                    match out.pos_of(f) {
                        Some(po) => terms.push((pa as u16, pb as u16, po as u16, c)),
                        None => spills.push((pa as u16, pb as u16, f.unsigned_abs() as u32, c)),
                    }
                }
            }
        }
        ProductTable { terms, spills }
    }

    pub fn closed(&self) -> bool {
        self.spills.is_empty()
    }
}

/// Index of the representable slot closest to frequency `f`.
pub fn nearest_slot(map: &FreqIndexMap, f: u32) -> usize {
    let fr = map.freqs();
    (0..fr.len()).min_by_key(|&i| (fr[i] as i64 - f as i64).abs()).unwrap()
}

/// Pointwise product `a·b`; frequencies absent from `target` go to `spill` by weighted norm.
pub fn poly_product(a: &TimePoly, b: &TimePoly, target: &Arc<FreqIndexMap>, rho: f64) -> (TimePoly, TailRadii) {
    let table = ProductTable::new(&a.map, &b.map, target);
    let mut out = TimePoly::zero(target.clone());
    let mut spill = TailRadii::zero(target.capacity());
    for &(pa, pb, po, c) in &table.terms {
        let (x, y) = (a.coeffs[pa as usize], b.coeffs[pb as usize]);
        if x.is_zero() || y.is_zero() {
            continue;
        }
        out.coeffs[po as usize] += (x * y).scale(c);
    }
    for &(pa, pb, f, c) in &table.spills {
        let (x, y) = (a.coeffs[pa as usize], b.coeffs[pb as usize]);
        if x.is_zero() || y.is_zero() {
            continue;
        }
        let v = mul_up(mul_up(mul_up(x.mag(), y.mag()), c.abs()), pow_up(rho, f));
        spill.add(nearest_slot(target, f), v);
    }
    (out, spill)
}

/// Output frequencies of a product of functions with single frequency magnitudes
/// `n` and `m`, with factors `c_f` such that the weighted norm at `f` is at most
/// `c_f · ‖a‖ · ‖b‖`.
pub fn tail_product_factors(n: u32, m: u32, rho: f64) -> Vec<(u32, f64)> {
    if n == 0 || m == 0 {
        return vec![(n + m, 1.0)];
    }
    let d = n.abs_diff(m);
    // ρ^{f - n - m} with f = |n - m| is ρ^{-2 min(n, m)}.
    let shrink = div_up(1.0, pow_dn(rho, 2 * n.min(m)));
    vec![(n + m, 0.5), (d, (0.5 * shrink).next_up().min(0.5))]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id1() -> Arc<FreqIndexMap> {
        Arc::new(FreqIndexMap::identity(2))
    }

    #[test]
    fn cos_squared() {
        let m = id1();
        let a = TimePoly::monomial(m.clone(), 1, Ball::ONE).unwrap();
        let (p, s) = poly_product(&a, &a, &m, 32.0);
        assert_eq!(p.get(0), Ball::exact(0.5));
        assert_eq!(p.get(2), Ball::exact(0.5));
        assert!(s.is_zero());
    }

    #[test]
    fn cos_sin() {
        let m = id1();
        let a = TimePoly::monomial(m.clone(), 1, Ball::ONE).unwrap();
        let b = TimePoly::monomial(m.clone(), -1, Ball::ONE).unwrap();
        let (p, _) = poly_product(&a, &b, &m, 32.0);
        assert_eq!(p.get(-2), Ball::exact(0.5));
        for n in [-2, -1, 0, 1, 2] {
            if n != -2 {
                assert!(p.get(n).is_zero());
            }
        }
    }

    #[test]
    fn norms() {
        let m = id1();
        assert_eq!(poly_norm(&TimePoly::monomial(m.clone(), 0, Ball::ONE).unwrap(), 32.0).unwrap().hi(), 1.0);
        let mut h = TimePoly::zero(m.clone());
        h.set(2, Ball::exact(3.0)).unwrap();
        h.set(-2, Ball::exact(4.0)).unwrap();
        let nb = poly_norm(&h, 32.0).unwrap();
        assert!(nb.contains(5120.0) && nb.hi() <= 5120.0 * (1.0 + 1e-15));
        let c1 = poly_norm(&TimePoly::monomial(m, 1, Ball::ONE).unwrap(), 32.0).unwrap();
        assert_eq!(c1.hi(), 32.0);
    }

    #[test]
    fn sparse_maps() {
        let b = FreqIndexMap::band(4);
        assert_eq!(b.capacity(), 3);
        assert_eq!(b.freq_at_pos(0), -5);
        assert_eq!(b.pos_of(-4), Some(1));
        assert_eq!(b.pos_of(2), None);
        let s = FreqIndexMap::single(3);
        assert_eq!(s.freqs(), &[0, 3]);
        assert!(FreqIndexMap::from_freqs(vec![1, 2]).is_err());
    }

    #[test]
    fn spill_keeps_weight() {
        let m = Arc::new(FreqIndexMap::identity(1));
        let a = TimePoly::monomial(m.clone(), 1, Ball::ONE).unwrap();
        let (p, s) = poly_product(&a, &a, &m, 32.0);
        assert_eq!(p.get(0), Ball::exact(0.5));
        assert!(s.get(1) >= 0.5 * 1024.0);
    }
}
