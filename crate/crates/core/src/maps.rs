//! The fixed-point maps `ℱ`, `ℱ_s`, `ℱ_γ` and their derivative.
//!
//! With `φ̂ = |Δ|^{-1/2}𝕃_s(φ)φ`, the maps read `φ̃ = g − ½γ ℒ_α φ̂`, where `γ`
//! and `α` are either fixed (stationary kind) or solved from the normalization
//! `Aφ̃ = 0`, `Bφ̃ = Θ`.

use crate::ball::Ball;
use crate::error::{shape, Error, Result};
use crate::field::{FieldEnclosure, SpaceParams};
use crate::operators::{dt_inv_linear, forcing_g, inv_linear, prod_bilinear_into};
use crate::timepoly::FreqIndexMap;

/// `Θ = 2^{-12}`.
pub const THETA: f64 = 1.0 / 4096.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Bifurcation,
    Periodic,
    Stationary,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapConfig {
    pub kind: MapKind,
    pub theta: Ball,
    pub s: Ball,
    pub gamma_fixed: Ball,
}

impl MapConfig {
    pub fn bifurcation() -> MapConfig {
        MapConfig { kind: MapKind::Bifurcation, theta: Ball::exact(THETA), s: Ball::ZERO, gamma_fixed: Ball::ZERO }
    }

    pub fn periodic(s: Ball) -> MapConfig {
        MapConfig { kind: MapKind::Periodic, theta: Ball::exact(THETA), s, gamma_fixed: Ball::ZERO }
    }

    pub fn stationary(gamma: Ball) -> MapConfig {
        MapConfig { kind: MapKind::Stationary, theta: Ball::exact(THETA), s: Ball::ZERO, gamma_fixed: gamma }
    }

    pub fn with_theta(mut self, theta: Ball) -> MapConfig {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.lo() > 0.0) {
            return Err(Error::Parameter(format!("Θ must be positive, got {}", self.theta)));
        }
        Ok(())
    }

    /// Frequencies the map's output can carry for an input map.
    pub fn output_map(&self, m: &FreqIndexMap) -> FreqIndexMap {
        match self.kind {
            MapKind::Periodic => FreqIndexMap::identity(2 * m.max_freq() as usize),
            _ => m.clone(),
        }
    }

    /// Default output shape: all coefficient products fit in the grid.
    pub fn output_params(&self, p: &SpaceParams) -> SpaceParams {
        let jc = 2 * p.jc.max(p.je);
        let kc = 2 * p.kc.max(p.ke);
        SpaceParams { jc, kc, je: jc + 1, ke: kc + 1, map: std::sync::Arc::new(self.output_map(&p.map)), ..p.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaAlpha {
    pub gamma: Ball,
    pub alpha: Ball,
    pub a_hat: Ball,
    pub b_hat: Ball,
}

/// `2^{3/2}`.
fn two_three_halves() -> Ball {
    Ball::exact(8.0).sqrt().unwrap()
}

/// `|Δ|^{-1/2}𝕃_s(φ)ψ` on `out`, scaled by `scale`, accumulated into `acc`.
pub fn lop_s_into(acc: &mut FieldEnclosure, phi: &FieldEnclosure, psi: &FieldEnclosure, cfg: &MapConfig, scale: Ball) -> Result<()> {
    if cfg.kind == MapKind::Stationary {
        return prod_bilinear_into(acc, phi, psi, scale);
    }
    let (pe, po) = (phi.even_part(), phi.odd_part());
    let (qe, qo) = (psi.even_part(), psi.odd_part());
    prod_bilinear_into(acc, &pe, &qe, scale)?;
    prod_bilinear_into(acc, &pe, &qo, scale)?;
    prod_bilinear_into(acc, &po, &qe, scale)?;
    if !cfg.s.is_zero() {
        prod_bilinear_into(acc, &po, &qo, scale * cfg.s)?;
    }
    Ok(())
}

/// `φ̂ = |Δ|^{-1/2}[𝕃(φ_e)φ_e + 2𝕃(φ_e)φ_o + s𝕃(φ_o)φ_o]`.
pub fn hat_phi(phi: &FieldEnclosure, cfg: &MapConfig) -> Result<FieldEnclosure> {
    hat_phi_on(phi, cfg, &cfg.output_params(phi.params()))
}

pub fn hat_phi_on(phi: &FieldEnclosure, cfg: &MapConfig, out: &SpaceParams) -> Result<FieldEnclosure> {
    let mut acc = FieldEnclosure::zero(out);
    if cfg.kind == MapKind::Stationary {
        prod_bilinear_into(&mut acc, phi, phi, Ball::ONE)?;
        return Ok(acc);
    }
    let (pe, po) = (phi.even_part(), phi.odd_part());
    prod_bilinear_into(&mut acc, &pe, &pe, Ball::ONE)?;
    prod_bilinear_into(&mut acc, &pe, &po, Ball::exact(2.0))?;
    if !cfg.s.is_zero() {
        prod_bilinear_into(&mut acc, &po, &po, cfg.s)?;
    }
    Ok(acc)
}

/// Read `A`, `B` of a field whose map may lack frequency 1 (then both vanish).
fn read_ab(f: &FieldEnclosure) -> Result<(Ball, Ball)> {
    if f.map().slot_of(1).is_none() {
        return Ok((Ball::ZERO, Ball::ZERO));
    }
    Ok((f.functional_a()?, f.functional_b()?))
}

/// `γ = −2^{3/2}Θ/Bφ̂`, `α = 2Aφ̂/Bφ̂`.
pub fn solve_gamma_alpha(phi_hat: &FieldEnclosure, cfg: &MapConfig) -> Result<GammaAlpha> {
    let (a, b) = read_ab(phi_hat)?;
    if cfg.kind == MapKind::Stationary {
        return Ok(GammaAlpha { gamma: cfg.gamma_fixed, alpha: Ball::ZERO, a_hat: a, b_hat: b });
    }
    if b.contains_zero() {
        return Err(Error::Degenerate(b.to_string()));
    }
    let gamma = (-(two_three_halves() * cfg.theta)).div(&b)?;
    let alpha = (a * Ball::exact(2.0)).div(&b)?;
    Ok(GammaAlpha { gamma, alpha, a_hat: a, b_hat: b })
}

/// `φ̃ = g − ½γℒ_α φ̂` and the `(γ, α)` used.
pub fn map_f(phi: &FieldEnclosure, cfg: &MapConfig) -> Result<(FieldEnclosure, GammaAlpha)> {
    let base = BasePoint::new(phi, cfg)?;
    Ok((base.image()?, base.ga))
}

/// Data shared by every evaluation of `ℱ` and `Dℱ` at one base point.
#[derive(Clone, Debug)]
pub struct BasePoint {
    pub cfg: MapConfig,
    pub phi: FieldEnclosure,
    pub phi_hat: FieldEnclosure,
    pub ga: GammaAlpha,
    /// `ℒ_α φ̂`.
    pub l_hat: FieldEnclosure,
    /// `ℒ_α ℒ'_α φ̂`.
    pub ll_hat: FieldEnclosure,
}

impl BasePoint {
    pub fn new(phi: &FieldEnclosure, cfg: &MapConfig) -> Result<BasePoint> {
        BasePoint::with_output(phi, cfg, &cfg.output_params(phi.params()))
    }

    pub fn with_output(phi: &FieldEnclosure, cfg: &MapConfig, out: &SpaceParams) -> Result<BasePoint> {
        cfg.validate()?;
        let phi_hat = hat_phi_on(phi, cfg, out)?;
        let ga = solve_gamma_alpha(&phi_hat, cfg)?;
        let l_hat = inv_linear(&phi_hat, ga.alpha);
        let ll_hat = if cfg.kind == MapKind::Stationary {
            FieldEnclosure::zero(out)
        } else {
            inv_linear(&dt_inv_linear(&phi_hat, ga.alpha), ga.alpha)
        };
        Ok(BasePoint { cfg: *cfg, phi: phi.clone(), phi_hat, ga, l_hat, ll_hat })
    }

    pub fn out_params(&self) -> &SpaceParams {
        self.phi_hat.params()
    }

    /// `ℱ(φ)`.
    pub fn image(&self) -> Result<FieldEnclosure> {
        let g = forcing_g(self.out_params())?;
        let half_gamma = self.ga.gamma * Ball::exact(0.5);
        g.sub(&self.l_hat.scale(half_gamma))
    }

    /// Context for derivative evaluations on the output shape `out`.
    pub fn df_context(&self, out: &SpaceParams) -> Result<DfContext> {
        let carry_hat = out.map.slot_of(1).is_some() && out.map.covers(self.out_params().map.as_ref());
        let (l_hat, ll_hat) = if carry_hat {
            (Some(self.l_hat.embed(out)?), Some(self.ll_hat.embed(out)?))
        } else {
            (None, None)
        };
        let (gdot_b, adot_b, adot_a) = self.rank_two_scalars()?;
        Ok(DfContext { out: out.clone(), l_hat, ll_hat, gdot_b, adot_b, adot_a })
    }

    /// `(2^{-3/2}γ²/Θ, 2^{-3/2}αγ/Θ, −2^{-1/2}γ/Θ)`: `γ̇ = c₀ Bψ̂`, `α̇ = c₁ Bψ̂ + c₂ Aψ̂`.
    pub fn rank_two_scalars(&self) -> Result<(Ball, Ball, Ball)> {
        let theta = self.cfg.theta;
        let g = self.ga.gamma;
        let c32 = Ball::ONE.div(&two_three_halves())?;
        let c12 = Ball::ONE.div(&Ball::exact(2.0).sqrt()?)?;
        Ok(((c32 * g * g).div(&theta)?, (c32 * self.ga.alpha * g).div(&theta)?, -(c12 * g).div(&theta)?))
    }

    /// `Dℱ(φ)ψ` on `ctx.out`.
    pub fn df(&self, ctx: &DfContext, psi: &FieldEnclosure) -> Result<FieldEnclosure> {
        let mut hat = FieldEnclosure::zero(&ctx.out);
        lop_s_into(&mut hat, &self.phi, psi, &self.cfg, Ball::exact(2.0))?;
        let gamma = self.ga.gamma;
        let mut out = inv_linear(&hat, self.ga.alpha).scale(gamma * Ball::exact(-0.5));
        if self.cfg.kind == MapKind::Stationary {
            return Ok(out);
        }
        let (a, b) = read_ab(&hat)?;
        if a.is_zero() && b.is_zero() {
            return Ok(out);
        }
        let (Some(l_hat), Some(ll_hat)) = (&ctx.l_hat, &ctx.ll_hat) else {
            return Err(shape("derivative output map cannot carry the base point's frequencies"));
        };
        let gdot = ctx.gdot_b * b;
        let adot = ctx.adot_b * b + ctx.adot_a * a;
        out.add_assign(&l_hat.scale(gdot * Ball::exact(-0.5)));
        out.add_assign(&ll_hat.scale(gamma * adot * Ball::exact(0.5)));
        Ok(out)
    }
}

/// Per-shape constants for derivative evaluations.
#[derive(Clone, Debug)]
pub struct DfContext {
    pub out: SpaceParams,
    l_hat: Option<FieldEnclosure>,
    ll_hat: Option<FieldEnclosure>,
    /// `2^{-3/2} γ²/Θ`.
    gdot_b: Ball,
    /// `2^{-3/2} αγ/Θ`.
    adot_b: Ball,
    /// `−2^{-1/2} γ/Θ`.
    adot_a: Ball,
}

/// Output shape of `Dℱ(φ)ψ` holding every coefficient product.
pub fn df_output_params(base: &BasePoint, psi: &SpaceParams) -> SpaceParams {
    let p = base.phi.params();
    let jc = (p.jc.max(p.je) + psi.jc.max(psi.je)).max(base.out_params().jc);
    let kc = (p.kc.max(p.ke) + psi.kc.max(psi.ke)).max(base.out_params().kc);
    let mut fr: Vec<u32> = Vec::new();
    for &a in p.map.freqs() {
        for &b in psi.map.freqs() {
            fr.push(a + b);
            fr.push(a.abs_diff(b));
        }
    }
    if base.cfg.kind != MapKind::Stationary {
        fr.extend_from_slice(base.out_params().map.freqs());
    }
    fr.push(0);
    fr.sort_unstable();
    fr.dedup();
    SpaceParams { jc, kc, je: jc + 1, ke: kc + 1, map: std::sync::Arc::new(FreqIndexMap::from_freqs(fr).unwrap()), ..p.clone() }
}

/// `Dℱ_s(φ)ψ` with default output shape.
pub fn dmap_df(base: &BasePoint, psi: &FieldEnclosure) -> Result<FieldEnclosure> {
    let out = df_output_params(base, psi.params());
    let ctx = base.df_context(&out)?;
    base.df(&ctx, psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(map: FreqIndexMap) -> SpaceParams {
        SpaceParams::standard(4, 4, map)
    }

    #[test]
    fn stationary_zero_gives_forcing() {
        let pp = p(FreqIndexMap::identity(0));
        let (f, ga) = map_f(&FieldEnclosure::zero(&pp), &MapConfig::stationary(Ball::ONE)).unwrap();
        assert_eq!(ga.alpha, Ball::ZERO);
        assert_eq!(f.get(0, 1, 2), Ball::ONE);
        assert_eq!(f.get(0, 3, 2), Ball::exact(-1.0));
        assert_eq!(f.norm_up(), forcing_g(f.params()).unwrap().norm_up());
    }

    #[test]
    fn hat_of_single_mode_vanishes() {
        let pp = p(FreqIndexMap::identity(1));
        let phi = FieldEnclosure::from_terms(&pp, &[(0, 1, 1, Ball::ONE)]).unwrap();
        assert_eq!(hat_phi(&phi, &MapConfig::bifurcation()).unwrap().norm_up(), 0.0);
    }

    #[test]
    fn gamma_alpha_algebra() {
        let pp = p(FreqIndexMap::identity(1));
        let b = -(two_three_halves() * Ball::exact(THETA));
        let mut h = FieldEnclosure::zero(&pp);
        h.set(-1, 1, 1, b).unwrap();
        let ga = solve_gamma_alpha(&h, &MapConfig::bifurcation()).unwrap();
        assert!(ga.gamma.contains(1.0));
        assert!(ga.alpha.contains(0.0) && ga.alpha.radius() == 0.0);
        let z = FieldEnclosure::zero(&pp);
        assert!(matches!(solve_gamma_alpha(&z, &MapConfig::bifurcation()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn df_of_zero_is_zero() {
        let pp = p(FreqIndexMap::identity(1));
        let phi = FieldEnclosure::from_terms(
            &pp,
            &[(0, 1, 2, Ball::ONE), (0, 3, 2, Ball::exact(-1.0)), (-1, 1, 1, Ball::exact(THETA)), (1, 2, 1, Ball::exact(0.01)), (-1, 2, 1, Ball::exact(0.5)), (0, 2, 1, Ball::exact(0.25))],
        )
        .unwrap();
        let base = BasePoint::new(&phi, &MapConfig::bifurcation()).unwrap();
        let d = dmap_df(&base, &FieldEnclosure::zero(&pp)).unwrap();
        assert_eq!(d.norm_up(), 0.0);
    }
}
