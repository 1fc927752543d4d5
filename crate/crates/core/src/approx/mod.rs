//! Floating-point Galerkin numerics producing the inputs of the rigorous stage:
//! the shadow of `ℱ`, Newton's method, stationary continuation, Hopf location
//! and the preconditioner blocks.

mod hopf;
pub mod io;
mod newton;
mod precond;
mod shadow;
mod snapshot;

pub use hopf::{hopf_locate, leading_odd_eigen, stationary_branch, HopfPoint, OddEigen};
pub use newton::{newton_solve, NewtonReport};
pub use precond::{build_preconditioner, BlockPlan};
pub use shadow::{bil_into, nonzero_cells, resolvent, Evaluation, Shadow};
pub use snapshot::{snapshot_csv, velocity};

use serde::{Deserialize, Serialize};

use crate::ball::Ball;
use crate::error::{Error, Result};
use crate::field::{FieldEnclosure, SpaceParams};
use crate::maps::{MapConfig, MapKind, THETA};
use crate::timepoly::FreqIndexMap;

/// Galerkin truncation: frequencies `|n| ≤ ic`, wavenumbers `j ≤ jc`, `k ≤ kc`,
/// optionally cut to the triangle `j + k ≤ tri`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub ic: usize,
    pub jc: usize,
    pub kc: usize,
    pub tri: Option<usize>,
}

impl Truncation {
    pub fn new(ic: usize, jc: usize, kc: usize) -> Truncation {
        Truncation { ic, jc, kc, tri: None }
    }

    pub fn triangular(mut self, tri: usize) -> Truncation {
        self.tri = Some(tri);
        self
    }

    pub fn with_ic(mut self, ic: usize) -> Truncation {
        self.ic = ic;
        self
    }

    pub fn width(&self) -> usize {
        2 * self.ic + 1
    }

    pub fn len(&self) -> usize {
        self.jc * self.kc * self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, n: i64, j: usize, k: usize) -> usize {
        ((j - 1) * self.kc + k - 1) * self.width() + (n + self.ic as i64) as usize
    }

    #[inline]
    pub fn cell_start(&self, j: usize, k: usize) -> usize {
        ((j - 1) * self.kc + k - 1) * self.width()
    }

    pub fn decode(&self, i: usize) -> (i64, usize, usize) {
        let w = self.width();
        let cell = i / w;
        (((i % w) as i64) - self.ic as i64, cell / self.kc + 1, cell % self.kc + 1)
    }

    #[inline]
    pub fn holds(&self, j: usize, k: usize) -> bool {
        j >= 1 && k >= 1 && j <= self.jc && k <= self.kc && self.tri.is_none_or(|t| j + k <= t)
    }

    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for j in 1..=self.jc {
            for k in 1..=self.kc {
                if self.holds(j, k) {
                    v.push((j, k));
                }
            }
        }
        v
    }

    /// Flat indices of the symmetry sector `|n| + k` even, where solutions live.
    pub fn unknowns(&self) -> Vec<usize> {
        let ic = self.ic as i64;
        let mut v = Vec::new();
        for (j, k) in self.cells() {
            for n in -ic..=ic {
                if (n.unsigned_abs() as usize + k) % 2 == 0 {
                    v.push(self.idx(n, j, k));
                }
            }
        }
        v
    }

    /// Space parameters of the same shape with default tails.
    pub fn space(&self, rho: f64, varrho: f64) -> Result<SpaceParams> {
        SpaceParams::new(rho, varrho, self.jc, self.kc, self.jc + 1, self.kc + 1, FreqIndexMap::identity(self.ic))
    }
}

/// An approximate solution in the Galerkin truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalerkinState {
    pub trunc: Truncation,
    pub kind: MapKind,
    pub s: f64,
    pub theta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub coeffs: Vec<f64>,
}

impl GalerkinState {
    pub fn zero(trunc: Truncation, kind: MapKind) -> GalerkinState {
        GalerkinState { trunc, kind, s: 0.0, theta: THETA, gamma: 0.0, alpha: 0.0, coeffs: vec![0.0; trunc.len()] }
    }

    /// The forcing `g` as a stationary state at `γ`.
    pub fn forcing(trunc: Truncation, gamma: f64) -> Result<GalerkinState> {
        if !trunc.holds(3, 2) || !trunc.holds(1, 2) {
            return Err(Error::Shape("truncation must hold wavenumbers (1,2) and (3,2)".into()));
        }
        let mut st = GalerkinState::zero(trunc, MapKind::Stationary);
        st.gamma = gamma;
        st.set(0, 1, 2, 1.0);
        st.set(0, 3, 2, -1.0);
        Ok(st)
    }

    pub fn get(&self, n: i64, j: usize, k: usize) -> f64 {
        if n.unsigned_abs() as usize > self.trunc.ic || !self.trunc.holds(j, k) {
            return 0.0;
        }
        self.coeffs[self.trunc.idx(n, j, k)]
    }

    pub fn set(&mut self, n: i64, j: usize, k: usize, v: f64) {
        let i = self.trunc.idx(n, j, k);
        self.coeffs[i] = v;
    }

    pub fn config(&self) -> MapConfig {
        let base = match self.kind {
            MapKind::Stationary => MapConfig::stationary(Ball::exact(self.gamma)),
            MapKind::Bifurcation => MapConfig::bifurcation(),
            MapKind::Periodic => MapConfig::periodic(Ball::exact(self.s)),
        };
        base.with_theta(Ball::exact(self.theta))
    }

    pub fn shadow(&self) -> Shadow {
        Shadow { trunc: self.trunc, kind: self.kind, s: self.s, theta: self.theta, gamma_fixed: self.gamma }
    }

    /// Copy into another truncation, dropping what does not fit.
    pub fn resized(&self, trunc: Truncation) -> GalerkinState {
        let mut out = GalerkinState { trunc, coeffs: vec![0.0; trunc.len()], ..self.clone() };
        let ic = trunc.ic.min(self.trunc.ic) as i64;
        for (j, k) in trunc.cells() {
            for n in -ic..=ic {
                out.set(n, j, k, self.get(n, j, k));
            }
        }
        out
    }

    pub fn with_kind(mut self, kind: MapKind) -> GalerkinState {
        self.kind = kind;
        self
    }

    /// Exact-ball embedding on tail-free space parameters.
    pub fn to_field(&self, rho: f64, varrho: f64) -> Result<FieldEnclosure> {
        let p = self.trunc.space(rho, varrho)?;
        let mut f = FieldEnclosure::zero(&p);
        let ic = self.trunc.ic as i64;
        for (j, k) in self.trunc.cells() {
            for n in -ic..=ic {
                let v = self.get(n, j, k);
                if v != 0.0 {
                    f.set(n, j, k, Ball::exact(v))?;
                }
            }
        }
        Ok(f)
    }

    /// Centers of a field, restricted to `trunc`.
    pub fn from_field(f: &FieldEnclosure, trunc: Truncation, kind: MapKind) -> GalerkinState {
        let mut st = GalerkinState::zero(trunc, kind);
        let ic = trunc.ic.min(f.map().max_freq() as usize) as i64;
        for (j, k) in trunc.cells() {
            if !f.in_grid(j, k) {
                continue;
            }
            for n in -ic..=ic {
                if f.map().pos_of(n).is_some() {
                    st.set(n, j, k, f.get(n, j, k).center());
                }
            }
        }
        st
    }

    pub fn norm(&self, rho: f64, varrho: f64) -> f64 {
        weighted_norm(&self.trunc, &self.coeffs, rho, varrho)
    }
}

/// `Σ ϱ^{j+k}(|x_0| + Σ_n ρ^n (x_n² + x_{−n}²)^{1/2})` in floating point.
pub fn weighted_norm(t: &Truncation, x: &[f64], rho: f64, varrho: f64) -> f64 {
    let mut total = 0.0;
    for (j, k) in t.cells() {
        let c = t.cell_start(j, k);
        let v = &x[c..c + t.width()];
        let ic = t.ic;
        let mut s = v[ic].abs();
        let mut w = 1.0;
        for n in 1..=ic {
            w *= rho;
            s += w * v[ic + n].hypot(v[ic - n]);
        }
        total += s * varrho.powi((j + k) as i32);
    }
    total
}
