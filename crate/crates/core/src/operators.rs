//! Rigorous bounds on the scaled advection form and the resolvents.
//!
//! For monomials `Φ = sin_J sin_K` and `φ = sin_j sin_k`,
//! `|Δ|^{-1/2} 𝕃(Φ)φ = Σ_{σ,τ=±1} N_{σ,τ} sin_{σJ+j} sin_{τK+k}` with
//! `N_{σ,τ} = Θ (τJk − σKj) / sqrt((σJ+j)² + (τK+k)²)` and
//! `Θ = ¼ (1/(J²+K²) − 1/(j²+k²))`.

use crate::ball::{add_dn, add_up, div_up, mul_dn, mul_up, sqrt_dn, sqrt_up, Ball, TINY, U};
use crate::error::{shape, Result};
use crate::field::{FieldEnclosure, SpaceParams};
use crate::timepoly::{pair_up, slot_weights_up, tail_product_factors, FreqIndexMap, ProductTable};

pub const SIGNS: [i64; 2] = [1, -1];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilinearCoeff {
    pub theta: Ball,
    /// `n[s][t]` for `σ = SIGNS[s]`, `τ = SIGNS[t]`.
    pub n: [[Ball; 2]; 2],
}

/// An output term `coeff · sin_j sin_k` after folding negative indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutTerm {
    pub j: usize,
    pub k: usize,
    pub coeff: Ball,
}

pub fn bilinear_coeffs(jj: usize, kk: usize, j: usize, k: usize) -> BilinearCoeff {
    let (jj_, kk_, j_, k_) = (jj as f64, kk as f64, j as f64, k as f64);
    let l1 = jj_ * jj_ + kk_ * kk_;
    let l2 = j_ * j_ + k_ * k_;
    let four_l = Ball::exact(4.0 * l1 * l2);
    let dl = Ball::exact(l2 - l1);
    let theta = if l1 == l2 { Ball::ZERO } else { dl.div(&four_l).unwrap() };
    let mut n = [[Ball::ZERO; 2]; 2];
    if l1 != l2 {
        for (s, &sigma) in SIGNS.iter().enumerate() {
            for (t, &tau) in SIGNS.iter().enumerate() {
                let a = sigma * jj as i64 + j as i64;
                let b = tau * kk as i64 + k as i64;
                let num = tau * (jj * k) as i64 - sigma * (kk * j) as i64;
                if (a == 0 && b == 0) || num == 0 {
                    continue;
                }
                let lo = (a * a + b * b) as f64;
                let den = four_l * Ball::exact(lo).sqrt().unwrap();
                n[s][t] = (dl * Ball::exact(num as f64)).div(&den).unwrap();
            }
        }
    }
    BilinearCoeff { theta, n }
}

/// The up to four output terms of `|Δ|^{-1/2} 𝕃(sin_J sin_K) sin_j sin_k`.
pub fn bilinear_terms(jj: usize, kk: usize, j: usize, k: usize) -> Vec<OutTerm> {
    let c = bilinear_coeffs(jj, kk, j, k);
    let mut v = Vec::with_capacity(4);
    for (s, &sigma) in SIGNS.iter().enumerate() {
        for (t, &tau) in SIGNS.iter().enumerate() {
            let nc = c.n[s][t];
            if nc.is_zero() {
                continue;
            }
            let a = sigma * jj as i64 + j as i64;
            let b = tau * kk as i64 + k as i64;
            if a == 0 || b == 0 {
                continue;
            }
            let coeff = if (a < 0) != (b < 0) { -nc } else { nc };
            v.push(OutTerm { j: a.unsigned_abs() as usize, k: b.unsigned_abs() as usize, coeff });
        }
    }
    v
}

/// Output terms of `|Δ|^{-1/2} 𝕃(sin_J sin_K) sin_j sin_k` without allocation.
///
/// `N = (λ₂ − λ₁)(τJk − σKj) / (4λ₁λ₂ √λ_o)`: the integer parts are exact in
/// binary64 for wavenumbers below 2¹², leaving three roundings.
pub fn bilinear_terms_fast(jj: usize, kk: usize, j: usize, k: usize) -> ([OutTerm; 4], usize) {
    let mut v = [OutTerm { j: 0, k: 0, coeff: Ball::ZERO }; 4];
    let mut len = 0;
    let l1 = (jj * jj + kk * kk) as i64;
    let l2 = (j * j + k * k) as i64;
    if l1 == l2 {
        return (v, 0);
    }
    debug_assert!(jj.max(kk).max(j).max(k) < 4096);
    let dl = (l2 - l1) as f64;
    let four_l = (4 * l1 * l2) as f64;
    for &sigma in &SIGNS {
        for &tau in &SIGNS {
            let a = sigma * jj as i64 + j as i64;
            let b = tau * kk as i64 + k as i64;
            let num = tau * (jj * k) as i64 - sigma * (kk * j) as i64;
            if a == 0 || b == 0 || num == 0 {
                continue;
            }
            let c = dl * num as f64 / (four_l * ((a * a + b * b) as f64).sqrt());
            let c = if (a < 0) != (b < 0) { -c } else { c };
            v[len] = OutTerm { j: a.unsigned_abs() as usize, k: b.unsigned_abs() as usize, coeff: Ball::raw(c, (4.0 * U * c.abs()).max(TINY)) };
            len += 1;
        }
    }
    (v, len)
}

/// Upper bound of `|N_{σ,τ}|` over all index quadruples with `(J,K) >= (j1,k1)`
/// and `(j,k) >= (j2,k2)`.
pub fn n_bound(j1: usize, k1: usize, j2: usize, k2: usize) -> f64 {
    let l1 = (j1 * j1 + k1 * k1) as f64;
    let l2 = (j2 * j2 + k2 * k2) as f64;
    let l = l1.min(l2);
    div_up(0.25, sqrt_dn(l))
}

/// Smallest `|x ± y|` over `x >= x0` (range) and `y` fixed, excluding zero.
#[inline]
fn corner_minus(x0: usize, y: usize) -> usize {
    if x0 > y {
        x0 - y
    } else {
        1
    }
}

/// Tail corners of the four `(σ,τ)` outputs when one factor ranges over a tail
/// starting at `(j0,k0)` and the other is the cell `(j,k)`.
pub(crate) fn tail_corners(j0: usize, k0: usize, j: usize, k: usize) -> [(usize, usize); 4] {
    let ja = [j0 + j, corner_minus(j0, j)];
    let ka = [k0 + k, corner_minus(k0, k)];
    [(ja[0], ka[0]), (ja[0], ka[1]), (ja[1], ka[0]), (ja[1], ka[1])]
}

/// The even/odd term selector of `𝕃_s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum STerm {
    Ee,
    Eo,
    Oe,
    Oo,
}

/// `|Δ|^{-1/2}𝕃(Φ)φ` on the output shape `out`.
pub fn prod_bilinear(big: &FieldEnclosure, small: &FieldEnclosure, out: &SpaceParams) -> Result<FieldEnclosure> {
    let mut f = FieldEnclosure::zero(out);
    prod_bilinear_into(&mut f, big, small, Ball::ONE)?;
    Ok(f)
}

/// One `𝕃_s` term with the even/odd projections applied to the operands.
pub fn prod_bilinear_term(phi: &FieldEnclosure, psi: &FieldEnclosure, term: STerm, out: &SpaceParams) -> Result<FieldEnclosure> {
    let (a, b) = match term {
        STerm::Ee => (phi.even_part(), psi.even_part()),
        STerm::Eo => (phi.even_part(), psi.odd_part()),
        STerm::Oe => (phi.odd_part(), psi.even_part()),
        STerm::Oo => (phi.odd_part(), psi.odd_part()),
    };
    prod_bilinear(&a, &b, out)
}

/// `out += scale · |Δ|^{-1/2}𝕃(Φ)φ`.
pub fn prod_bilinear_into(out: &mut FieldEnclosure, big: &FieldEnclosure, small: &FieldEnclosure, scale: Ball) -> Result<()> {
    let op = out.params().clone();
    let (pa, pb) = (big.params(), small.params());
    if pa.rho != op.rho || pb.rho != op.rho || pa.varrho != op.varrho || pb.varrho != op.varrho {
        return Err(shape("operands and output must share weights"));
    }
    if scale.is_zero() {
        return Ok(());
    }
    let table = ProductTable::new(&pa.map, &pb.map, &op.map);
    let wa = slot_weights_up(&pa.map, pa.rho);
    let wb = slot_weights_up(&pb.map, pb.rho);
    let wo = slot_weights_up(&op.map, op.rho);
    let smax = (pa.jc.max(pa.je) + pb.jc.max(pb.je)) + (pa.kc.max(pa.ke) + pb.kc.max(pb.ke)) + 2;
    let vr = op.varrho_pows_up(smax);
    let smag = scale.mag();
    let wout = op.width();
    let ic_out = op.map.capacity();

    let cells_a = big.nonzero_cells();
    let cells_b = small.nonzero_cells();
    let mut prod = vec![Ball::ZERO; wout];

    // coefficient × coefficient
    for &(jj, kk) in &cells_a {
        let ca = big.cell_coeffs(jj, kk);
        for &(j, k) in &cells_b {
            let terms = bilinear_terms(jj, kk, j, k);
            if terms.is_empty() {
                continue;
            }
            let cb = small.cell_coeffs(j, k);
            prod.fill(Ball::ZERO);
            let mut any = false;
            for &(x, y, o, c) in &table.terms {
                let (u, v) = (ca[x as usize], cb[y as usize]);
                if u.is_zero() || v.is_zero() {
                    continue;
                }
                prod[o as usize] += (u * v).scale(c);
                any = true;
            }
            for &(x, y, f, _) in &table.spills {
                if !ca[x as usize].is_zero() && !cb[y as usize].is_zero() {
                    return Err(shape(format!("product frequency {f} not representable in the output map")));
                }
            }
            if !any {
                continue;
            }
            if !scale.is_zero() && scale != Ball::ONE {
                for p in prod.iter_mut() {
                    if !p.is_zero() {
                        *p = *p * scale;
                    }
                }
            }
            for t in &terms {
                if out.in_grid(t.j, t.k) {
                    let dst = out.cell_coeffs_mut(t.j, t.k);
                    for (d, p) in dst.iter_mut().zip(prod.iter()) {
                        if !p.is_zero() {
                            *d += *p * t.coeff;
                        }
                    }
                } else {
                    let cm = t.coeff.mag();
                    for i in 0..=ic_out {
                        let r = pair_up(&prod[ic_out + i], &prod[ic_out - i]);
                        if r != 0.0 {
                            out.add_tail(t.j, t.k, i, mul_up(mul_up(mul_up(r, wo[i]), cm), vr[t.j + t.k]));
                        }
                    }
                }
            }
        }
    }

    // coefficient × tail, in both orders
    let tails_a = big.tail_entries();
    let tails_b = small.tail_entries();
    for (cells, coef_src, wc, tails, tail_map) in [
        (&cells_a, big, &wa, &tails_b, &*pb.map),
        (&cells_b, small, &wb, &tails_a, &*pa.map),
    ] {
        if tails.is_empty() {
            continue;
        }
        let cmap = &coef_src.params().map;
        let cic = cmap.capacity();
        for &(j, k) in cells.iter() {
            let c = coef_src.cell_coeffs(j, k);
            for &(j0, k0, ti, e) in tails.iter() {
                let nb = n_bound(j, k, j0, k0);
                let m = tail_map.freq(ti);
                let corners = tail_corners(j0, k0, j, k);
                for p in 0..=cic {
                    let r = pair_up(&c[cic + p], &c[cic - p]);
                    if r == 0.0 {
                        continue;
                    }
                    let a = mul_up(mul_up(r, wc[p]), vr[j + k]);
                    let base = mul_up(mul_up(mul_up(a, e), nb), smag);
                    for (f, fac) in tail_product_factors(cmap.freq(p), m, op.rho) {
                        let v = mul_up(base, fac);
                        for &(cj, ck) in &corners {
                            out.add_tail_freq(cj, ck, f, v)?;
                        }
                    }
                }
            }
        }
    }

    // tail × tail
    for &(j1, k1, i1, e1) in &tails_a {
        for &(j2, k2, i2, e2) in &tails_b {
            let nb = n_bound(j1, k1, j2, k2);
            let base = mul_up(mul_up(mul_up(e1, e2), nb), smag);
            let corners = [(j1 + j2, k1 + k2), (j1 + j2, 1), (1, k1 + k2), (1, 1)];
            for (f, fac) in tail_product_factors(pa.map.freq(i1), pb.map.freq(i2), op.rho) {
                let v = mul_up(base, fac);
                for &(cj, ck) in &corners {
                    out.add_tail_freq(cj, ck, f, v)?;
                }
            }
        }
    }
    Ok(())
}

/// Bound check helper: `‖|Δ|^{-1/2}Φ‖·‖φ‖ + ‖Φ‖·‖|Δ|^{-1/2}φ‖`.
pub fn bilinear_norm_bound(big: &FieldEnclosure, small: &FieldEnclosure) -> f64 {
    let hb = inv_linear(big, Ball::ZERO).norm_up();
    let hs = inv_linear(small, Ball::ZERO).norm_up();
    add_up(mul_up(hb, small.norm_up()), mul_up(big.norm_up(), hs))
}

/// Upper bound of `sup_{λ >= λmin} sqrt(λ / (λ² + α²n²))` for `|α| >= amin`.
pub fn c_bound(n: u32, lmin: f64, amin: f64) -> f64 {
    let inv_sqrt = div_up(1.0, sqrt_dn(lmin));
    if n == 0 || amin == 0.0 {
        return inv_sqrt;
    }
    let c = mul_dn(amin, n as f64);
    if c <= 0.0 {
        return inv_sqrt;
    }
    if lmin >= c {
        let den = add_dn(mul_dn(lmin, lmin), mul_dn(c, c));
        sqrt_up(div_up(lmin, den)).min(inv_sqrt)
    } else {
        div_up(1.0, sqrt_dn(2.0 * c)).min(inv_sqrt)
    }
}

/// Upper bound of `sup_{λ >= λmin} |n| / sqrt(λ² + α²n²)` for `|α| >= amin`.
pub fn c_prime_bound(n: u32, lmin: f64, amin: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nn = n as f64;
    let c = mul_dn(amin, nn);
    let den = add_dn(mul_dn(lmin, lmin), mul_dn(c, c));
    div_up(nn, sqrt_dn(den))
}

/// `ℒ_α φ`, with `ψ_n = √λ(λφ_n − αnφ_{−n})/(λ² + α²n²)` and `λ = j² + k²`.
pub fn inv_linear(phi: &FieldEnclosure, alpha: Ball) -> FieldEnclosure {
    resolvent(phi, alpha, false)
}

/// `ℒ'_α φ`, with `ψ_n = n(λφ_{−n} + αnφ_n)/(λ² + α²n²)`.
pub fn dt_inv_linear(phi: &FieldEnclosure, alpha: Ball) -> FieldEnclosure {
    resolvent(phi, alpha, true)
}

/// Factors `(a, b)` of the pair map `(x₊, x₋) ↦ (a x₊ − b x₋, a x₋ + b x₊)` at
/// `λ` and frequency `f`.
pub fn pair_factors(lam: f64, f: u32, alpha: Ball, prime: bool) -> (Ball, Ball) {
    let l = Ball::exact(lam);
    let sl = l.sqrt().unwrap();
    if f == 0 {
        return if prime { (Ball::ZERO, Ball::ZERO) } else { (Ball::ONE.div(&sl).unwrap(), Ball::ZERO) };
    }
    let nf = Ball::exact(f as f64);
    let den = Ball::exact(lam * lam) + alpha.sqr() * Ball::exact((f as f64) * (f as f64));
    if prime {
        // ψ₊ = n(λφ₋ + αnφ₊)/den, ψ₋ = −n(λφ₊ − αnφ₋)/den
        let a = (alpha * nf * nf).div(&den).unwrap();
        let b = (nf * l).div(&den).unwrap();
        (a, -b)
    } else {
        let a = (sl * l).div(&den).unwrap();
        let b = (sl * alpha * nf).div(&den).unwrap();
        (a, b)
    }
}

fn resolvent_factors(map: &FreqIndexMap, lam: f64, alpha: Ball, prime: bool) -> Vec<(Ball, Ball)> {
    map.freqs().iter().map(|&f| pair_factors(lam, f, alpha, prime)).collect()
}

fn resolvent(phi: &FieldEnclosure, alpha: Ball, prime: bool) -> FieldEnclosure {
    let p = phi.params().clone();
    let map = p.map.clone();
    let ic = map.capacity();
    let mut out = FieldEnclosure::zero(&p);
    let mut cache: std::collections::HashMap<usize, Vec<(Ball, Ball)>> = std::collections::HashMap::new();
    for (j, k) in phi.nonzero_cells() {
        let lam = j * j + k * k;
        let fac = cache.entry(lam).or_insert_with(|| resolvent_factors(&map, lam as f64, alpha, prime));
        let src = phi.cell_coeffs(j, k);
        let dst = out.cell_coeffs_mut(j, k);
        dst[ic] = src[ic] * fac[0].0;
        for i in 1..=ic {
            let (xp, xm) = (src[ic + i], src[ic - i]);
            if xp.is_zero() && xm.is_zero() {
                continue;
            }
            let (a, b) = fac[i];
            dst[ic + i] = a * xp - b * xm;
            dst[ic - i] = a * xm + b * xp;
        }
    }
    let amin = alpha.mig();
    for (j, k, i, e) in phi.tail_entries() {
        let lmin = (j * j + k * k) as f64;
        let f = map.freq(i);
        let c = if prime { c_prime_bound(f, lmin, amin) } else { c_bound(f, lmin, amin) };
        out.add_tail(j, k, i, mul_up(e, c));
    }
    out
}

/// `g = θ_{0,1,2} − θ_{0,3,2}`.
pub fn forcing_g(params: &SpaceParams) -> Result<FieldEnclosure> {
    if params.jc < 3 || params.kc < 2 {
        return Err(shape("grid must cover wavenumbers (1,2) and (3,2)"));
    }
    let mut g = FieldEnclosure::zero(params);
    // curl f = 5 sin x sin 2y − 13 sin 3x sin 2y, divided by j² + k².
    g.set(0, 1, 2, Ball::exact(5.0).div(&Ball::exact(5.0))?)?;
    g.set(0, 3, 2, Ball::exact(-13.0).div(&Ball::exact(13.0))?)?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SpaceParams;

    #[test]
    fn equal_wavenumbers_vanish() {
        let c = bilinear_coeffs(2, 3, 2, 3);
        assert!(c.theta.is_zero());
        assert!(c.n.iter().flatten().all(|b| b.is_zero()));
    }

    #[test]
    fn worked_example() {
        let c = bilinear_coeffs(1, 2, 3, 2);
        assert!(c.theta.contains(2.0 / 65.0));
        let want = (2.0 / 65.0) * (-4.0) / (4.0 * 2f64.sqrt());
        assert!(c.n[0][0].contains(want));
        assert!((c.n[0][0].center() + 0.021756).abs() < 1e-5);
    }

    #[test]
    fn resolvent_examples() {
        let p = SpaceParams::standard(2, 2, FreqIndexMap::identity(1));
        let phi = FieldEnclosure::from_terms(&p, &[(1, 1, 1, Ball::exact(3.0)), (-1, 1, 1, Ball::exact(5.0))]).unwrap();
        let psi = inv_linear(&phi, Ball::exact(2.0));
        let s2 = 2f64.sqrt();
        assert!(psi.get(1, 1, 1).contains(s2 * (2.0 * 3.0 - 2.0 * 5.0) / 8.0));
        let psi0 = inv_linear(&phi, Ball::ZERO);
        assert!(psi0.get(1, 1, 1).contains(3.0 / s2));
        let d = dt_inv_linear(&phi, Ball::ZERO);
        assert!(d.get(1, 1, 1).contains(5.0 / 2.0));
        assert!(d.get(-1, 1, 1).contains(-3.0 / 2.0));
        let z = FieldEnclosure::from_terms(&p, &[(0, 1, 2, Ball::ONE)]).unwrap();
        assert!(dt_inv_linear(&z, Ball::exact(2.0)).get(0, 1, 2).is_zero());
    }

    #[test]
    fn forcing() {
        let p = SpaceParams::standard(4, 4, FreqIndexMap::identity(1));
        let g = forcing_g(&p).unwrap();
        assert_eq!(g.get(0, 1, 2), Ball::ONE);
        assert_eq!(g.get(0, 3, 2), Ball::exact(-1.0));
        assert!(!g.has_tails());
        assert!(forcing_g(&SpaceParams::standard(2, 4, FreqIndexMap::identity(1))).is_err());
    }

    #[test]
    fn fast_terms_enclose_reference() {
        for (jj, kk, j, k) in [(1, 2, 3, 2), (5, 1, 2, 7), (40, 3, 61, 59), (2, 2, 1, 3)] {
            let slow = bilinear_terms(jj, kk, j, k);
            let (fast, n) = bilinear_terms_fast(jj, kk, j, k);
            assert_eq!(slow.len(), n);
            for (a, b) in slow.iter().zip(&fast[..n]) {
                assert_eq!((a.j, a.k), (b.j, b.k));
                assert!(b.coeff.contains(a.coeff.center()));
            }
        }
    }

    #[test]
    fn c_bound_shape() {
        // Below the knee the sup is 1/sqrt(2c).
        let c = c_bound(1, 2.0, 4.0);
        assert!((c - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        assert!(c_bound(1, 100.0, 4.0) <= 0.1 + 1e-12);
        assert_eq!(c_bound(0, 4.0, 1.0), 0.5);
    }
}
