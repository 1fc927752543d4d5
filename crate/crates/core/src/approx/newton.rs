use faer::prelude::*;
use faer::Mat;

use super::{weighted_norm, GalerkinState};
use crate::error::{Error, Result};
use crate::field::{DEFAULT_RHO, DEFAULT_VARRHO};

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

const MAX_ITER: usize = 40;

/// Newton's method for `φ = ℱ(φ)` on the symmetry sector of the truncation.
///
/// The residual is measured in the weighted norm with default weights.
pub fn newton_solve(initial: &GalerkinState, tol: f64) -> Result<(GalerkinState, NewtonReport)> {
    let shadow = initial.shadow();
    let t = initial.trunc;
    let unk = t.unknowns();
    let mut phi = vec![0.0; t.len()];
    for &i in &unk {
        phi[i] = initial.coeffs[i];
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("initial state is not finite".into()));
    }
    let mut history = Vec::new();
    for it in 0..=MAX_ITER {
        let ev = shadow.eval(&phi)?;
        let r: Vec<f64> = phi.iter().zip(&ev.image).map(|(a, b)| a - b).collect();
        let res = weighted_norm(&t, &r, DEFAULT_RHO, DEFAULT_VARRHO);
        history.push(res);
        if !res.is_finite() {
            break;
        }
        if res <= tol {
            let st = GalerkinState { coeffs: phi, gamma: ev.gamma, alpha: ev.alpha, ..initial.clone() };
            return Ok((st, NewtonReport { iterations: it, residual: res, history }));
        }
        if it == MAX_ITER {
            break;
        }
        let df = shadow.jacobian(&phi, &ev, &unk, &unk);
        let n = unk.len();
        let jm = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - df[(i, j)]);
        let rhs = Mat::from_fn(n, 1, |i, _| r[unk[i]]);
        let step = jm.partial_piv_lu().solve(&rhs);
        for (i, &u) in unk.iter().enumerate() {
            phi[u] -= step[(i, 0)];
        }
    }
    Err(Error::Convergence { iterations: history.len(), history })
}
