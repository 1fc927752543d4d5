//! Operator-norm bounds on the weighted coefficient space.
//!
//! The norm of an operator is the supremum over modes `(n, j, k)` of the norm of
//! the image of the unit sphere of `span{θ_{n,j,k}, θ_{−n,j,k}}`, divided by the
//! mode weight. For `n > 0` the unit sphere is a circle, bounded either through
//! `q` samples with the factor `q/(q−π)` or through the largest singular value of
//! each 2×2 output block.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::ball::{add_up, div_up, mul_dn, mul_up, pow_dn, pow_up, sqrt_up, sub_dn, Ball, TINY, U};
use crate::error::{Error, Result};
use crate::field::{FieldEnclosure, ModeIndex};

pub const DEFAULT_Q: usize = 16;

/// Absolute error of `cos`, `sin` from the platform library, generously.
const TRIG_ERR: f64 = 1e-15;

#[inline]
pub fn weight_up(rho: f64, varrho: f64, n: i64, j: usize, k: usize) -> f64 {
    mul_up(pow_up(rho, n.unsigned_abs() as u32), pow_up(varrho, (j + k) as u32))
}

#[inline]
pub fn weight_dn(rho: f64, varrho: f64, n: i64, j: usize, k: usize) -> f64 {
    mul_dn(pow_dn(rho, n.unsigned_abs() as u32), pow_dn(varrho, (j + k) as u32)).max(0.0)
}

/// Upper bound of `q/(q−π)`.
pub fn sample_factor(q: usize) -> Result<f64> {
    if q < 4 {
        return Err(Error::Parameter(format!("sampling count q must be at least 4, got {q}")));
    }
    let qf = q as f64;
    Ok(div_up(qf, sub_dn(qf, PI.next_up())))
}

/// `d·u/(1 − d·u)`, the a priori relative error of a length-`d` dot product.
pub fn gamma_d(d: usize) -> f64 {
    let du = mul_up(d.max(1) as f64, U);
    div_up(du, sub_dn(1.0, du))
}

/// One output pair of a mode image: `x[row][col]` with rows `(+f, −f)` and
/// columns the images of `θ_{+n}`, `θ_{−n}`. Frequency-0 outputs use row 0 only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Group {
    pub w: f64,
    pub x: [[f64; 2]; 2],
}

/// The image of one mode: center groups plus a radius per column that bounds
/// everything else (coefficient radii, tails, neglected terms).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModeImage {
    pub two: bool,
    pub groups: Vec<Group>,
    pub radius: [f64; 2],
}

#[inline]
fn hypot_up(a: f64, b: f64) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    if a == 0.0 {
        return b;
    }
    if b == 0.0 {
        return a;
    }
    sqrt_up(add_up(mul_up(a, a), mul_up(b, b)))
}

/// Upper bound of the largest singular value of `[[a, b], [c, d]]`.
pub fn sigma_max_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    if c == 0.0 && d == 0.0 {
        return hypot_up(a, b);
    }
    if b == 0.0 && d == 0.0 {
        return hypot_up(a, c);
    }
    let (a, b, c, d) = (Ball::exact(a), Ball::exact(b), Ball::exact(c), Ball::exact(d));
    let t = a.sqr() + b.sqr() + c.sqr() + d.sqr();
    let p = a.sqr() + b.sqr() - c.sqr() - d.sqr();
    let q = a * c + b * d;
    let disc = p.sqr() + q.sqr() * Ball::exact(4.0);
    let s2 = (t.hi() + sqrt_up(disc.hi())) * 0.5;
    sqrt_up(s2.next_up())
}

impl ModeImage {
    /// Image of a mode from the fields `T θ_{+n}` and, for `n > 0`, `T θ_{−n}`.
    pub fn from_fields(plus: &FieldEnclosure, minus: Option<&FieldEnclosure>) -> Result<ModeImage> {
        if let Some(m) = minus {
            if !plus.params().same_shape(m.params()) {
                return Err(Error::Shape("mode images must share their shape".into()));
            }
        }
        let p = plus.params();
        let map = &p.map;
        let ic = map.capacity();
        let mut img = ModeImage { two: minus.is_some(), ..Default::default() };
        let cols: Vec<&FieldEnclosure> = std::iter::once(plus).chain(minus).collect();
        for j in 1..=p.jc {
            for k in 1..=p.kc {
                let cs: Vec<&[Ball]> = cols.iter().map(|f| f.cell_coeffs(j, k)).collect();
                if cs.iter().all(|c| c.iter().all(|b| b.is_zero())) {
                    continue;
                }
                for i in 0..=ic {
                    let f = map.freq(i) as i64;
                    let w = weight_up(p.rho, p.varrho, f, j, k);
                    let mut g = Group { w, x: [[0.0; 2]; 2] };
                    for (c, cell) in cs.iter().enumerate() {
                        let (xp, xm) = if i == 0 { (cell[ic], Ball::ZERO) } else { (cell[ic + i], cell[ic - i]) };
                        g.x[0][c] = xp.center();
                        g.x[1][c] = xm.center();
                        let r = hypot_up(xp.radius(), xm.radius());
                        if r != 0.0 {
                            img.radius[c] = add_up(img.radius[c], mul_up(w, r));
                        }
                    }
                    if g.x.iter().flatten().any(|&v| v != 0.0) {
                        img.groups.push(g);
                    }
                }
            }
        }
        for (c, f) in cols.iter().enumerate() {
            img.radius[c] = add_up(img.radius[c], f.tail_total());
        }
        Ok(img)
    }

    /// Weighted norm of one column's centers.
    pub fn column_norm(&self, c: usize) -> f64 {
        self.groups.iter().fold(0.0, |acc, g| add_up(acc, mul_up(g.w, hypot_up(g.x[0][c], g.x[1][c]))))
    }

    /// `Σ w σ_max` over the output groups.
    pub fn spectral(&self) -> f64 {
        self.groups.iter().fold(0.0, |acc, g| add_up(acc, mul_up(g.w, sigma_max_2x2(g.x[0][0], g.x[0][1], g.x[1][0], g.x[1][1]))))
    }

    /// `max_i ‖T(cos θ_i, sin θ_i)‖` over `θ_i = 2πi/q`, without the factor.
    ///
    /// Sums run in plain floating point; the result is inflated by the a priori
    /// bound `γ₄ Σ w|x|` per group and the factor `1 + γ_{n+8}` for the sum.
    pub fn sampled(&self, q: usize) -> f64 {
        let slack = mul_up(TRIG_ERR, add_up(self.column_norm(0), self.column_norm(1)));
        let abs = self.groups.iter().fold(0.0, |acc, g| {
            let s = add_up(add_up(g.x[0][0].abs(), g.x[0][1].abs()), add_up(g.x[1][0].abs(), g.x[1][1].abs()));
            add_up(acc, mul_up(g.w, s))
        });
        let mut best: f64 = 0.0;
        for i in 0..q {
            let th = 2.0 * PI * i as f64 / q as f64;
            let (s, c) = th.sin_cos();
            let mut acc = 0.0;
            for g in &self.groups {
                let u = g.x[0][0] * c + g.x[0][1] * s;
                let v = g.x[1][0] * c + g.x[1][1] * s;
                acc += g.w * (u * u + v * v).sqrt();
            }
            best = best.max(acc);
        }
        let inflated = mul_up(add_up(best, mul_up(gamma_d(4), abs)), add_up(1.0, gamma_d(self.groups.len() + 8)));
        add_up(inflated, slack)
    }

    /// Upper bound of `sup_{|u|=1} ‖T u‖` over the span of the mode, before
    /// dividing by the mode weight.
    pub fn bound(&self, q: usize) -> Result<f64> {
        let factor = sample_factor(q)?;
        if !self.two {
            return Ok(add_up(self.column_norm(0), self.radius[0]));
        }
        let spectral = self.spectral();
        // the samples at 0 and π/2 are the column norms
        let floor = self.column_norm(0).max(self.column_norm(1));
        let centers = if spectral <= mul_dn(factor, floor) { spectral } else { mul_up(factor, self.sampled(q)).min(spectral) };
        Ok(add_up(centers, hypot_up(self.radius[0], self.radius[1])))
    }
}

/// Modes beyond the frontier: every `(n, j, k)` with `n ∈ freqs` and
/// `max(j, k) > wave`, all bounded by `bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailSpec {
    pub freqs: Vec<u32>,
    pub wave: usize,
    pub bound: f64,
}

/// Operator-norm bound from the images of the frontier modes and a tail bound.
///
/// `apply(n, j, k)` returns the image of the unit coordinate `θ_{n,j,k}` with
/// signed `n`; images of `±n` must share their shape.
pub fn op_norm_bound<F>(apply: F, modes: &[ModeIndex], q: usize, rho: f64, varrho: f64, tail: &TailSpec) -> Result<f64>
where
    F: Fn(i64, usize, usize) -> Result<FieldEnclosure> + Sync,
{
    sample_factor(q)?;
    check_coverage(modes, tail)?;
    let bounds: Vec<f64> = modes
        .par_iter()
        .map(|m| {
            let n = m.n as i64;
            let plus = apply(n, m.j, m.k)?;
            let minus = if n > 0 { Some(apply(-n, m.j, m.k)?) } else { None };
            let img = ModeImage::from_fields(&plus, minus.as_ref())?;
            Ok(div_up(img.bound(q)?, weight_dn(rho, varrho, n, m.j, m.k)))
        })
        .collect::<Result<_>>()?;
    Ok(bounds.into_iter().fold(tail.bound, f64::max))
}

/// Every mode inside the frontier box must be listed.
pub fn check_coverage(modes: &[ModeIndex], tail: &TailSpec) -> Result<()> {
    let have: std::collections::HashSet<ModeIndex> = modes.iter().copied().collect();
    for &n in &tail.freqs {
        for j in 1..=tail.wave {
            for k in 1..=tail.wave {
                if !have.contains(&ModeIndex { n, j, k }) {
                    return Err(Error::Coverage(format!("mode (n={n}, j={j}, k={k}) is neither in the frontier nor in the tail")));
                }
            }
        }
    }
    Ok(())
}

/// Modes `n ∈ freqs`, `max(j, k) ≤ wave`.
pub fn box_modes(freqs: &[u32], wave: usize) -> Vec<ModeIndex> {
    let mut v = Vec::new();
    for &n in freqs {
        for j in 1..=wave {
            for k in 1..=wave {
                v.push(ModeIndex { n, j, k });
            }
        }
    }
    v
}

/// Underflow allowance for `d` products with weights up to `w`.
pub fn underflow_slack(d: usize, w: f64) -> f64 {
    mul_up(mul_up(d as f64, TINY), w.max(1.0))
}
