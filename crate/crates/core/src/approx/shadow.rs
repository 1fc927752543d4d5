//! Floating-point shadow of the maps and their derivative.

use faer::Mat;
use rayon::prelude::*;

use super::Truncation;
use crate::error::{Error, Result};
use crate::maps::MapKind;
use crate::timepoly::cosi_mul;

/// Cells of `x` carrying a nonzero coefficient.
pub fn nonzero_cells(t: &Truncation, x: &[f64]) -> Vec<(usize, usize)> {
    t.cells()
        .into_iter()
        .filter(|&(j, k)| {
            let c = t.cell_start(j, k);
            x[c..c + t.width()].iter().any(|&v| v != 0.0)
        })
        .collect()
}

/// `out += scale · |Δ|^{-1/2}𝕃(a)b` projected onto `t`, with the products of two
/// odd frequencies weighted by `w_oo`.
#[allow(clippy::too_many_arguments)]
pub fn bil_into(
    t: &Truncation,
    out: &mut [f64],
    a: &[f64],
    a_cells: &[(usize, usize)],
    b: &[f64],
    b_cells: &[(usize, usize)],
    w_oo: f64,
    scale: f64,
) {
    let w = t.width();
    let ic = t.ic as i64;
    let odd = |n: i64| n % 2 != 0;
    for &(jj, kk) in a_cells {
        let ca = t.cell_start(jj, kk);
        let av = &a[ca..ca + w];
        let la = (jj * jj + kk * kk) as f64;
        for &(j, k) in b_cells {
            if (jj, kk) == (j, k) {
                continue;
            }
            let cb = t.cell_start(j, k);
            let bv = &b[cb..cb + w];
            let lb = (j * j + k * k) as f64;
            let theta = 0.25 * (1.0 / la - 1.0 / lb);
            for sigma in [1i64, -1] {
                for tau in [1i64, -1] {
                    let x = sigma * jj as i64 + j as i64;
                    let y = tau * kk as i64 + k as i64;
                    if x == 0 || y == 0 {
                        continue;
                    }
                    let (xo, yo) = (x.unsigned_abs() as usize, y.unsigned_abs() as usize);
                    if !t.holds(xo, yo) {
                        continue;
                    }
                    let num = (tau * jj as i64 * k as i64 - sigma * kk as i64 * j as i64) as f64;
                    let mut coef = theta * num / ((x * x + y * y) as f64).sqrt();
                    if (x < 0) != (y < 0) {
                        coef = -coef;
                    }
                    coef *= scale;
                    let co = t.cell_start(xo, yo);
                    for p in -ic..=ic {
                        let ap = av[(p + ic) as usize];
                        if ap == 0.0 {
                            continue;
                        }
                        for q in -ic..=ic {
                            let bq = bv[(q + ic) as usize];
                            if bq == 0.0 {
                                continue;
                            }
                            let wt = if odd(p) && odd(q) { w_oo } else { 1.0 };
                            if wt == 0.0 {
                                continue;
                            }
                            let f = coef * wt * ap * bq;
                            for (r, c) in cosi_mul(p, q) {
                                if c != 0.0 && r.abs() <= ic {
                                    out[co + (r + ic) as usize] += f * c;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `ℒ_α x`, or `ℒ'_α x` when `prime`.
pub fn resolvent(t: &Truncation, x: &[f64], alpha: f64, prime: bool) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let ic = t.ic;
    for (j, k) in t.cells() {
        let c = t.cell_start(j, k);
        let lam = (j * j + k * k) as f64;
        let sl = lam.sqrt();
        if !prime {
            out[c + ic] = x[c + ic] / sl;
        }
        for n in 1..=ic {
            let nf = n as f64;
            let den = lam * lam + alpha * alpha * nf * nf;
            let (a, b) = if prime { (alpha * nf * nf / den, -nf * lam / den) } else { (sl * lam / den, sl * alpha * nf / den) };
            let (xp, xm) = (x[c + ic + n], x[c + ic - n]);
            out[c + ic + n] = a * xp - b * xm;
            out[c + ic - n] = a * xm + b * xp;
        }
    }
    out
}

/// Floating-point shadow of `ℱ` for one map kind on one truncation.
#[derive(Clone, Debug)]
pub struct Shadow {
    pub trunc: Truncation,
    pub kind: MapKind,
    pub s: f64,
    pub theta: f64,
    /// `γ` of the stationary kind.
    pub gamma_fixed: f64,
}

/// `ℱ(φ)` together with the intermediate data reused by `Dℱ(φ)`.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub image: Vec<f64>,
    pub hat: Vec<f64>,
    pub gamma: f64,
    pub alpha: f64,
    pub l_hat: Vec<f64>,
    pub ll_hat: Vec<f64>,
    cells: Vec<(usize, usize)>,
}

impl Shadow {
    fn w_oo(&self) -> f64 {
        if self.kind == MapKind::Stationary {
            1.0
        } else {
            self.s
        }
    }

    fn read_ab(&self, x: &[f64]) -> (f64, f64) {
        if self.trunc.ic == 0 || !self.trunc.holds(1, 1) {
            return (0.0, 0.0);
        }
        (x[self.trunc.idx(1, 1, 1)], x[self.trunc.idx(-1, 1, 1)])
    }

    pub fn hat(&self, phi: &[f64]) -> Vec<f64> {
        let cells = nonzero_cells(&self.trunc, phi);
        let mut out = vec![0.0; phi.len()];
        bil_into(&self.trunc, &mut out, phi, &cells, phi, &cells, self.w_oo(), 1.0);
        out
    }

    pub fn eval(&self, phi: &[f64]) -> Result<Evaluation> {
        let t = &self.trunc;
        if phi.len() != t.len() {
            return Err(Error::Shape(format!("state has {} coefficients, truncation needs {}", phi.len(), t.len())));
        }
        let hat = self.hat(phi);
        let (gamma, alpha) = if self.kind == MapKind::Stationary {
            (self.gamma_fixed, 0.0)
        } else {
            let (a, b) = self.read_ab(&hat);
            if b == 0.0 || !b.is_finite() {
                return Err(Error::Degenerate(format!("{b}")));
            }
            (-(8f64.sqrt()) * self.theta / b, 2.0 * a / b)
        };
        let l_hat = resolvent(t, &hat, alpha, false);
        let ll_hat = if self.kind == MapKind::Stationary {
            vec![0.0; phi.len()]
        } else {
            resolvent(t, &resolvent(t, &hat, alpha, true), alpha, false)
        };
        let mut image: Vec<f64> = l_hat.iter().map(|v| -0.5 * gamma * v).collect();
        if t.holds(1, 2) {
            image[t.idx(0, 1, 2)] += 1.0;
        }
        if t.holds(3, 2) {
            image[t.idx(0, 3, 2)] -= 1.0;
        }
        Ok(Evaluation { image, hat, gamma, alpha, l_hat, ll_hat, cells: nonzero_cells(t, phi) })
    }

    /// `Dℱ(φ)ψ` at the evaluated point.
    pub fn df_apply(&self, phi: &[f64], ev: &Evaluation, psi: &[f64]) -> Vec<f64> {
        let t = &self.trunc;
        let mut hat = vec![0.0; psi.len()];
        let pc = nonzero_cells(t, psi);
        bil_into(t, &mut hat, phi, &ev.cells, psi, &pc, self.w_oo(), 2.0);
        let mut out = resolvent(t, &hat, ev.alpha, false);
        out.iter_mut().for_each(|v| *v *= -0.5 * ev.gamma);
        if self.kind != MapKind::Stationary {
            let (a, b) = self.read_ab(&hat);
            let (g, al, th) = (ev.gamma, ev.alpha, self.theta);
            let c32 = 1.0 / 8f64.sqrt();
            let gdot = c32 * g * g / th * b;
            let adot = c32 * al * g / th * b - g / (2f64.sqrt() * th) * a;
            for i in 0..out.len() {
                out[i] += -0.5 * gdot * ev.l_hat[i] + 0.5 * g * adot * ev.ll_hat[i];
            }
        }
        out
    }

    /// Matrix of `Dℱ(φ)` from the coordinates `cols` to the coordinates `rows`.
    pub fn jacobian(&self, phi: &[f64], ev: &Evaluation, rows: &[usize], cols: &[usize]) -> Mat<f64> {
        let columns: Vec<Vec<f64>> = cols
            .par_iter()
            .map(|&c| {
                let mut e = vec![0.0; phi.len()];
                e[c] = 1.0;
                let d = self.df_apply(phi, ev, &e);
                rows.iter().map(|&r| d[r]).collect()
            })
            .collect();
        Mat::from_fn(rows.len(), cols.len(), |i, j| columns[j][i])
    }
}
