use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{GalerkinState, Truncation};
use crate::contraction::block::{Block, BlockOperator};
use crate::error::{Error, Result};
use crate::maps::MapConfig;

/// Frequency sets with their wavenumber cutoffs `m`; each entry yields one
/// block per symmetry sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub entries: Vec<(Vec<u32>, usize)>,
}

impl BlockPlan {
    pub fn new(entries: Vec<(Vec<u32>, usize)>) -> BlockPlan {
        BlockPlan { entries }
    }

    /// `{0,1}` up to `m`.
    pub fn bifurcation(m: usize) -> BlockPlan {
        BlockPlan::new(vec![(vec![0, 1], m)])
    }

    pub fn stationary(m: usize) -> BlockPlan {
        BlockPlan::new(vec![(vec![0], m)])
    }

    /// `{n}` up to `m_n` for each `(n, m_n)`.
    pub fn periodic(ms: &[(u32, usize)]) -> BlockPlan {
        BlockPlan::new(ms.iter().map(|&(n, m)| (vec![n], m)).collect())
    }
}

/// `M = (I − A)⁻¹ − I` for the floating-point Jacobian `A` of `ℱ` restricted to
/// each planned block.
pub fn build_preconditioner(state: &GalerkinState, cfg: &MapConfig, plan: &BlockPlan) -> Result<BlockOperator> {
    let mut st = state.clone();
    st.s = cfg.s.center();
    st.theta = cfg.theta.center();
    st.kind = cfg.kind;
    let fmax = plan.entries.iter().flat_map(|e| e.0.iter().copied()).max().unwrap_or(0) as usize;
    let mmax = plan.entries.iter().map(|e| e.1).max().unwrap_or(0);
    let t = st.trunc;
    let trunc = Truncation::new(t.ic.max(fmax), t.jc.max(mmax), t.kc.max(mmax));
    let st = st.resized(trunc);
    let shadow = st.shadow();
    let ev = shadow.eval(&st.coeffs)?;
    let mut blocks = Vec::new();
    for (freqs, m) in &plan.entries {
        for sector in 0..2 {
            let mut b = Block::zero(freqs, *m, sector);
            let idx: Vec<usize> = b.coords.iter().map(|c| trunc.idx(c.n, c.j, c.k)).collect();
            if idx.is_empty() {
                continue;
            }
            let a = shadow.jacobian(&st.coeffs, &ev, &idx, &idx);
            let d = idx.len();
            let ia = Mat::from_fn(d, d, |r, c| if r == c { 1.0 } else { 0.0 } - a[(r, c)]);
            let inv = ia.partial_piv_lu().inverse();
            if (0..d).any(|c| (0..d).any(|r| !inv[(r, c)].is_finite())) {
                return Err(Error::Construction(format!("I − Dℱ is singular on block {freqs:?}, m = {m}; try a larger m")));
            }
            b.matrix = Mat::from_fn(d, d, |r, c| inv[(r, c)] - if r == c { 1.0 } else { 0.0 });
            blocks.push(b);
        }
    }
    let op = BlockOperator { blocks };
    op.validate()?;
    Ok(op)
}
