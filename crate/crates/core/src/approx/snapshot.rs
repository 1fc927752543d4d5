//! Velocity fields from vorticity coefficients, in plain floating point.

use super::GalerkinState;

/// `Φ_{j,k}(t) = Σ_n φ_{n,j,k} cosi_n(t)`, with the odd part scaled by `beta`.
fn amplitude(st: &GalerkinState, j: usize, k: usize, t: f64, beta: f64) -> f64 {
    let ic = st.trunc.ic as i64;
    let mut a = 0.0;
    for n in -ic..=ic {
        let v = st.get(n, j, k);
        if v == 0.0 {
            continue;
        }
        let b = if n.rem_euclid(2) == 1 { beta } else { 1.0 };
        let c = if n >= 0 { (n as f64 * t).cos() } else { (n.unsigned_abs() as f64 * t).sin() };
        a += b * v * c;
    }
    a
}

/// `(u₁, u₂)` at `(t, x, y)`.
pub fn velocity(st: &GalerkinState, t: f64, x: f64, y: f64, beta: f64) -> (f64, f64) {
    let (mut u1, mut u2) = (0.0, 0.0);
    for (j, k) in st.trunc.cells() {
        let a = amplitude(st, j, k, t, beta);
        if a == 0.0 {
            continue;
        }
        let (jf, kf) = (j as f64, k as f64);
        let d = jf * jf + kf * kf;
        u1 += -kf / d * a * (jf * x).sin() * (kf * y).cos();
        u2 += jf / d * a * (jf * x).cos() * (kf * y).sin();
    }
    (u1, u2)
}

/// Rows `t, x, y, u1, u2` on an `nx × ny` grid of `[0, π]²`, endpoints included.
pub fn snapshot_csv(st: &GalerkinState, times: &[f64], nx: usize, ny: usize, beta: f64) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("t,x,y,u1,u2\n");
    let step = |i: usize, n: usize| if n <= 1 { 0.0 } else { std::f64::consts::PI * i as f64 / (n - 1) as f64 };
    for &t in times {
        for ix in 0..nx {
            for iy in 0..ny {
                let (x, y) = (step(ix, nx), step(iy, ny));
                let (u1, u2) = velocity(st, t, x, y, beta);
                writeln!(out, "{t},{x},{y},{u1:e},{u2:e}").unwrap();
            }
        }
    }
    out
}
