use faer::{c64, Mat};

use super::{newton_solve, GalerkinState, Truncation};
use crate::error::{Error, Result};
use crate::maps::MapKind;

/// Stationary solutions along increasing `γ`, each seeded by the previous one.
pub fn stationary_branch(trunc: Truncation, gammas: &[f64], tol: f64) -> Result<Vec<GalerkinState>> {
    let trunc = trunc.with_ic(0);
    let mut st = GalerkinState::forcing(trunc, gammas.first().copied().unwrap_or(1.0))?;
    let mut out = Vec::with_capacity(gammas.len());
    for &g in gammas {
        st.gamma = g;
        st = newton_solve(&st, tol)?.0;
        out.push(st.clone());
    }
    Ok(out)
}

/// Leading complex eigenpair of the stationary linearization restricted to odd `k`.
#[derive(Clone, Debug)]
pub struct OddEigen {
    pub value: c64,
    /// `(j, k, component)` over the odd-`k` cells.
    pub vector: Vec<(usize, usize, c64)>,
}

/// Linearization `−λψ − γ|Δ|^{1/2}𝕃(φ)ψ` on odd `k`, in the map's coordinates
/// `diag(λ)(Dℱ − I)`. Returns the eigenvalue with negative imaginary part of the
/// complex pair with largest real part.
pub fn leading_odd_eigen(st: &GalerkinState) -> Result<OddEigen> {
    if st.kind != MapKind::Stationary || st.trunc.ic != 0 {
        return Err(Error::Parameter("eigen crossing needs a stationary state without time modes".into()));
    }
    let t = st.trunc;
    let shadow = st.shadow();
    let ev = shadow.eval(&st.coeffs)?;
    let cells: Vec<(usize, usize)> = t.cells().into_iter().filter(|&(_, k)| k % 2 == 1).collect();
    let idx: Vec<usize> = cells.iter().map(|&(j, k)| t.idx(0, j, k)).collect();
    let df = shadow.jacobian(&st.coeffs, &ev, &idx, &idx);
    let n = idx.len();
    let lop = Mat::from_fn(n, n, |i, j| {
        let (a, b) = cells[i];
        let lam = (a * a + b * b) as f64;
        lam * (df[(i, j)] - if i == j { 1.0 } else { 0.0 })
    });
    let eig = lop.eigen().map_err(|e| Error::Construction(format!("eigen decomposition failed: {e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let mut best: Option<usize> = None;
    for i in 0..n {
        let z = s[i];
        if z.im < -1e-9 && best.is_none_or(|b| z.re > s[b].re) {
            best = Some(i);
        }
    }
    let b = best.ok_or_else(|| Error::Bracket("no complex eigenvalue pair".into()))?;
    let vector = cells.iter().enumerate().map(|(i, &(j, k))| (j, k, u[(i, b)])).collect();
    Ok(OddEigen { value: s[b], vector })
}

/// The bifurcation point as the fixed point of the `s = 0` map.
#[derive(Clone, Debug)]
pub struct HopfPoint {
    pub state: GalerkinState,
    pub gamma: f64,
    pub alpha: f64,
    /// `γ` where the eigen crossing was interpolated.
    pub crossing_gamma: f64,
    pub residual: f64,
}

/// Locate the Hopf point from a stationary sweep bracketing the crossing.
pub fn hopf_locate(branch: &[GalerkinState], tol: f64) -> Result<HopfPoint> {
    let mut prev: Option<(GalerkinState, f64)> = None;
    let mut bracket = None;
    for st in branch {
        let re = leading_odd_eigen(st)?.value.re;
        if let Some((p, pre)) = &prev {
            if *pre < 0.0 && re >= 0.0 {
                bracket = Some((p.clone(), *pre, st.clone(), re));
                break;
            }
        }
        prev = Some((st.clone(), re));
    }
    let (mut lo, mut flo, mut hi, mut fhi) = bracket.ok_or_else(|| Error::Bracket("stationary sweep does not bracket an eigen crossing".into()))?;
    let mut best = lo.clone();
    for _ in 0..30 {
        let g = lo.gamma - flo * (hi.gamma - lo.gamma) / (fhi - flo);
        let mut seed = if g - lo.gamma < hi.gamma - g { lo.clone() } else { hi.clone() };
        seed.gamma = g;
        let st = newton_solve(&seed, tol)?.0;
        let f = leading_odd_eigen(&st)?.value.re;
        best = st.clone();
        if f.abs() < 1e-10 || (hi.gamma - lo.gamma) < 1e-10 * g {
            break;
        }
        if f < 0.0 {
            (lo, flo) = (st, f);
        } else {
            (hi, fhi) = (st, f);
        }
    }
    let eig = leading_odd_eigen(&best)?;
    let v11 = eig.vector.iter().find(|e| (e.0, e.1) == (1, 1)).map(|e| e.2).ok_or_else(|| Error::Shape("truncation lacks (1,1)".into()))?;
    if v11.norm() == 0.0 {
        return Err(Error::Degenerate("eigenmode vanishes at (1,1)".into()));
    }
    let c = c64::new(0.0, best.theta) / v11;
    let mut guess = best.resized(best.trunc.with_ic(1)).with_kind(MapKind::Bifurcation);
    for &(j, k, v) in &eig.vector {
        let w = c * v;
        guess.set(1, j, k, w.re);
        guess.set(-1, j, k, w.im);
    }
    let crossing_gamma = best.gamma;
    let (state, rep) = newton_solve(&guess, tol)?;
    Ok(HopfPoint { gamma: state.gamma, alpha: state.alpha, state, crossing_gamma, residual: rep.residual })
}
