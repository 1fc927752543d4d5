//! The quasi-Newton map and the contraction driver.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::block::BlockOperator;
use super::engine::{freq_set_bound, FreqSetReport};
use super::kernel::FatBase;
use crate::ball::{add_up, div_up, mul_up, sub_dn, Ball};
use crate::error::{Error, Result};
use crate::field::{FieldEnclosure, Mode, SpaceParams};
use crate::maps::{dmap_df, map_f, BasePoint, GammaAlpha, MapConfig, MapKind};
use crate::operators::{c_bound, inv_linear};
use crate::timepoly::FreqIndexMap;

/// `𝒩(h) = ℱ(φ̄ + Lh) − φ̄ + (I − L)h`.
pub fn quasi_newton(h: &FieldEnclosure, phi_bar: &FieldEnclosure, l: &BlockOperator, cfg: &MapConfig) -> Result<FieldEnclosure> {
    let mh = l.apply_m(h)?;
    let x = common(&[phi_bar, h, &mh])?;
    let arg = x[0].add(&x[1])?.add(&x[2])?;
    let (img, _) = map_f(&arg, cfg)?;
    let y = common(&[&img, &x[0], &x[2]])?;
    y[0].sub(&y[1])?.sub(&y[2])
}

/// `D𝒩 u = Dℱ(base)Lu + u − Lu` for one mode `u`.
pub fn dquasi_newton_mode(u: &Mode, l: &BlockOperator, base: &BasePoint) -> Result<FieldEnclosure> {
    let mut jc = u.index.j;
    let mut kc = u.index.k;
    let mut freqs = vec![u.index.n];
    for b in &l.blocks {
        if b.freqs.contains(&u.index.n) {
            jc = jc.max(b.m);
            kc = kc.max(b.m);
            freqs.extend_from_slice(&b.freqs);
        }
    }
    freqs.sort_unstable();
    freqs.dedup();
    let bp = base.phi.params();
    let p = SpaceParams::new(bp.rho, bp.varrho, jc, kc, jc + 1, kc + 1, FreqIndexMap::from_freqs(freqs)?)?;
    let uf = FieldEnclosure::from_mode(&p, u)?;
    let mu = l.apply_m(&uf)?;
    let lu = uf.add(&mu)?;
    let d = dmap_df(base, &lu)?;
    let mu = mu.embed(d.params())?;
    d.sub(&mu)
}

/// Bring enclosures to one shape holding all of them.
fn common(fs: &[&FieldEnclosure]) -> Result<Vec<FieldEnclosure>> {
    let p0 = fs[0].params();
    let mut map = p0.map.as_ref().clone();
    let (mut jc, mut kc, mut je, mut ke) = (p0.jc, p0.kc, p0.je, p0.ke);
    for f in &fs[1..] {
        let p = f.params();
        map = map.union(&p.map);
        jc = jc.max(p.jc);
        kc = kc.max(p.kc);
        je = je.max(p.je);
        ke = ke.max(p.ke);
    }
    let p = SpaceParams { jc, kc, je, ke, map: std::sync::Arc::new(map), ..p0.clone() };
    fs.iter().map(|f| f.embed(&p)).collect()
}

/// `‖ℱ(φ̄) − φ̄‖` with the `(γ, α)` of `φ̄`.
pub fn residual_norm(phi_bar: &FieldEnclosure, cfg: &MapConfig) -> Result<(f64, GammaAlpha)> {
    let (img, ga) = map_f(phi_bar, cfg)?;
    let x = common(&[&img, phi_bar])?;
    Ok((x[0].sub(&x[1])?.norm_up(), ga))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lemma {
    Stationary,
    Bifurcation,
    Periodic,
}

impl From<MapKind> for Lemma {
    fn from(k: MapKind) -> Lemma {
        match k {
            MapKind::Stationary => Lemma::Stationary,
            MapKind::Bifurcation => Lemma::Bifurcation,
            MapKind::Periodic => Lemma::Periodic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Analytic bound of `‖Dℱ 𝔼_n‖` for all `n` beyond the computed frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailClosure {
    pub n: u32,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationMeta {
    pub ic: u32,
    pub jc: usize,
    pub kc: usize,
    pub frontier: usize,
    pub blocks: Vec<(Vec<u32>, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub rho: f64,
    pub varrho: f64,
    pub theta: f64,
}

/// Verified numbers of one contraction argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lemma: Lemma,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma: [f64; 2],
    pub alpha: [f64; 2],
    pub l_norm: f64,
    pub q: usize,
    pub truncation: TruncationMeta,
    pub weights: Weights,
    pub frequency_table: Vec<FreqSetReport>,
    pub tail: Option<TailClosure>,
    pub monotone: Option<bool>,
    pub invertible: bool,
    pub config_hash: String,
    pub verdict: Verdict,
    pub reason: Option<String>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Knobs of the contraction driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrOptions {
    /// Modes with `max(j, k)` up to this are evaluated one by one.
    pub frontier: usize,
    pub q: usize,
    /// Coefficients of `φ̄` with weighted magnitude below this move into the
    /// fattening radius for the `K` bound.
    pub sparsify: f64,
}

impl Default for ContrOptions {
    fn default() -> Self {
        ContrOptions { frontier: 100, q: super::norms::DEFAULT_Q, sparsify: 1e-12 }
    }
}

/// Drop the coefficients of weighted magnitude below `thr`; returns the rest
/// and an upper bound of the norm of what was dropped.
pub fn sparsify(phi: &FieldEnclosure, thr: f64) -> (FieldEnclosure, f64) {
    let p = phi.params();
    let ic = p.map.capacity();
    let mut kept = phi.clone();
    let mut dropped = FieldEnclosure::zero(p);
    for j in 1..=p.jc {
        for k in 1..=p.kc {
            for i in 0..=ic {
                let fr = p.map.freq(i) as i64;
                let w = p.weight_up(fr, j, k);
                let signs: &[i64] = if i == 0 { &[1] } else { &[1, -1] };
                for &sg in signs {
                    let n = sg * fr;
                    let c = phi.get(n, j, k);
                    if !c.is_zero() && mul_up(w, c.mag()) < thr {
                        dropped.set(n, j, k, c).expect("same shape");
                        kept.set(n, j, k, Ball::ZERO).expect("same shape");
                    }
                }
            }
        }
    }
    (kept, dropped.norm_up())
}

/// SHA-256 over the bit patterns of every input of a certificate.
struct ConfigHasher(Sha256);

impl ConfigHasher {
    fn new() -> ConfigHasher {
        ConfigHasher(Sha256::new())
    }

    fn scalars(&mut self, v: &[f64]) {
        for x in v {
            self.0.update(x.to_bits().to_le_bytes());
        }
    }

    fn field(&mut self, phi: &FieldEnclosure) {
        let p = phi.params();
        self.scalars(&[p.rho, p.varrho, p.jc as f64, p.kc as f64, p.je as f64, p.ke as f64]);
        for &f in p.map.freqs() {
            self.0.update(f.to_le_bytes());
        }
        for b in phi.coeffs_raw() {
            self.scalars(&[b.center(), b.radius()]);
        }
        self.scalars(phi.tails_raw());
    }

    fn blocks(&mut self, l: &BlockOperator) {
        for b in &l.blocks {
            for &f in &b.freqs {
                self.0.update(f.to_le_bytes());
            }
            self.0.update((b.m as u64).to_le_bytes());
            self.0.update((b.sector as u64).to_le_bytes());
            for c in 0..b.dim() {
                for v in b.matrix.col(c).iter() {
                    self.0.update(v.to_bits().to_le_bytes());
                }
            }
        }
    }

    fn config(&mut self, cfg: &MapConfig, delta: f64, opts: &ContrOptions) {
        self.0.update([cfg.kind as u8]);
        for x in [cfg.theta, cfg.s, cfg.gamma_fixed] {
            self.scalars(&[x.center(), x.radius()]);
        }
        self.scalars(&[delta, opts.frontier as f64, opts.q as f64, opts.sparsify]);
    }

    fn finish(self) -> String {
        self.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn hash_inputs(phi: &FieldEnclosure, l: &BlockOperator, cfg: &MapConfig, delta: f64, opts: &ContrOptions) -> String {
    let mut h = ConfigHasher::new();
    h.field(phi);
    h.blocks(l);
    h.config(cfg, delta, opts);
    h.finish()
}

fn distinct_freq_sets(l: &BlockOperator) -> Vec<Vec<u32>> {
    let mut sets: Vec<Vec<u32>> = l
        .blocks
        .iter()
        .map(|b| {
            let mut f = b.freqs.clone();
            f.sort_unstable();
            f
        })
        .collect();
    sets.sort();
    sets.dedup();
    sets
}

fn plan_of(l: &BlockOperator) -> Vec<(Vec<u32>, usize)> {
    let mut v: Vec<(Vec<u32>, usize)> = l.blocks.iter().map(|b| (b.freqs.clone(), b.m)).collect();
    v.dedup();
    v
}

fn ball_pair(b: Ball) -> [f64; 2] {
    [b.lo(), b.hi()]
}

/// Prove `ε + Kδ < δ` for `𝒩` at `φ̄` with the ball `φ̄ + L B_δ`.
///
/// `K` is computed over the base point fattened by `δ‖L‖`. When `K < 1` the
/// reported radius is shrunk to `min(δ, 2ε/(1−K))`, which inherits `K`, and
/// `γ`, `α` are enclosed over the smaller ball.
pub fn contr_fix(phi_bar: &FieldEnclosure, l: &BlockOperator, cfg: &MapConfig, delta: f64, opts: &ContrOptions) -> Result<Certificate> {
    l.validate()?;
    let p = phi_bar.params();
    let (rho, varrho) = (p.rho, p.varrho);
    let l_norm = l.norm_bound(rho, varrho);
    let truncation = TruncationMeta { ic: p.map.max_freq(), jc: p.jc, kc: p.kc, frontier: opts.frontier, blocks: plan_of(l) };
    let weights = Weights { rho, varrho, theta: cfg.theta.center() };
    let mut cert = Certificate {
        lemma: cfg.kind.into(),
        epsilon: f64::INFINITY,
        delta,
        k: f64::INFINITY,
        gamma: [f64::NEG_INFINITY, f64::INFINITY],
        alpha: [f64::NEG_INFINITY, f64::INFINITY],
        l_norm,
        q: opts.q,
        truncation,
        weights,
        frequency_table: Vec::new(),
        tail: None,
        monotone: None,
        invertible: false,
        config_hash: hash_inputs(phi_bar, l, cfg, delta, opts),
        verdict: Verdict::Fail,
        reason: None,
    };
    if !(delta > 0.0) {
        cert.reason = Some("the ball radius must be positive".into());
        return Ok(cert);
    }
    let expected: Vec<Vec<u32>> = match cfg.kind {
        MapKind::Stationary => vec![vec![0]],
        MapKind::Bifurcation => vec![vec![0, 1]],
        MapKind::Periodic => return Err(Error::Parameter("the periodic lemma is checked by periodic_sweep".into())),
    };
    let sets = distinct_freq_sets(l);
    if sets.iter().any(|s| !expected.contains(s)) {
        return Err(Error::Coverage(format!("preconditioner frequency sets {sets:?} do not match the map's domain {expected:?}")));
    }
    let (eps, _) = match residual_norm(phi_bar, cfg) {
        Ok(v) => v,
        Err(e) => {
            cert.reason = Some(e.to_string());
            return Ok(cert);
        }
    };
    cert.epsilon = eps;
    let (sparse, dropped) = sparsify(phi_bar, opts.sparsify);
    let fat = add_up(mul_up(delta, l_norm), dropped);
    let fb = match FatBase::new(&sparse, cfg, fat) {
        Ok(f) => f,
        Err(e) => {
            cert.reason = Some(format!("fattened base point: {e}"));
            return Ok(cert);
        }
    };
    let mut k: f64 = 0.0;
    for s in &expected {
        let rep = freq_set_bound(&fb, l, s, opts.frontier, opts.q)?;
        k = k.max(rep.k);
        cert.frequency_table.push(rep);
    }
    cert.k = k;
    cert.invertible = cert.frequency_table.iter().all(|r| r.invertible());
    if k < 1.0 {
        let tight = div_up(mul_up(2.0, eps), sub_dn(1.0, k));
        if tight < delta {
            cert.delta = tight;
        }
    }
    let (gamma, alpha) = if cfg.kind == MapKind::Stationary {
        (cfg.gamma_fixed, Ball::ZERO)
    } else {
        match BasePoint::new(&fatten(phi_bar, mul_up(cert.delta, l_norm))?, cfg) {
            Ok(b) => (b.ga.gamma, b.ga.alpha),
            Err(e) => {
                cert.reason = Some(format!("γ, α over the ball: {e}"));
                return Ok(cert);
            }
        }
    };
    cert.gamma = ball_pair(gamma);
    cert.alpha = ball_pair(alpha);
    let lhs = add_up(eps, mul_up(k, cert.delta));
    let ok = lhs < cert.delta && k < 1.0 && cert.invertible;
    cert.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    if !ok {
        cert.reason = Some(if !cert.invertible {
            "a preconditioner block is not verified invertible".into()
        } else if k >= 1.0 {
            format!("K = {k:.6} is not below 1")
        } else {
            format!("ε + Kδ = {lhs:.6e} is not below δ = {:.6e}", cert.delta)
        });
    }
    Ok(cert)
}

/// `φ` plus a tail of norm `r` at `(1,1)` in every frequency slot.
pub fn fatten(phi: &FieldEnclosure, r: f64) -> Result<FieldEnclosure> {
    let mut f = phi.clone();
    for &fr in phi.map().freqs() {
        f.add_tail_freq(1, 1, fr, r)?;
    }
    Ok(f)
}

/// `|γ|·C(n−1)·(‖|Δ|^{-1/2}φ‖ + ‖φ‖/√2)`, bounding `‖Dℱ 𝔼_m‖` for every
/// `m ≥ n ≥ 3` at the `s = 0` base point.
pub fn tail_closure(fb: &FatBase, n: u32) -> f64 {
    let phi = &fb.base.phi;
    let hb = inv_linear(phi, Ball::ZERO).norm_up();
    let b = add_up(hb, mul_up(phi.norm_up(), std::f64::consts::FRAC_1_SQRT_2.next_up()));
    let c = c_bound(n.saturating_sub(1), 2.0, fb.alpha_min());
    mul_up(mul_up(fb.base.ga.gamma.mag(), c), b)
}

/// Per-frequency norms of `D𝒩` for the `s = 0` periodic map at the
/// bifurcation ball: `φ̄` fattened by `δ‖L‖` of the bifurcation certificate,
/// blocks `{n}` for `n = 2..=N` from `make_l(n)`, and the analytic closure at
/// `N + 1`. The `{0,1}` row is taken from the bifurcation certificate.
pub fn periodic_sweep<F>(phi_bar: &FieldEnclosure, mut make_l: F, bif: &Certificate, n_max: u32, opts: &ContrOptions) -> Result<Certificate>
where
    F: FnMut(u32) -> Result<BlockOperator>,
{
    if bif.lemma != Lemma::Bifurcation {
        return Err(Error::Parameter("the periodic sweep needs a bifurcation certificate".into()));
    }
    let cfg = MapConfig::periodic(Ball::ZERO).with_theta(Ball::exact(bif.weights.theta));
    let p = phi_bar.params();
    let (rho, varrho) = (p.rho, p.varrho);
    let (sparse, dropped) = sparsify(phi_bar, opts.sparsify);
    let fat = add_up(mul_up(bif.delta, bif.l_norm), dropped);
    let mut hasher = ConfigHasher::new();
    hasher.field(phi_bar);
    hasher.config(&cfg, bif.delta, opts);
    hasher.scalars(&[n_max as f64, bif.l_norm, bif.k, bif.epsilon]);
    hasher.0.update(bif.config_hash.as_bytes());
    let mut cert = Certificate {
        lemma: Lemma::Periodic,
        epsilon: f64::INFINITY,
        delta: bif.delta,
        k: f64::INFINITY,
        gamma: bif.gamma,
        alpha: bif.alpha,
        l_norm: bif.l_norm,
        q: opts.q,
        truncation: TruncationMeta { ic: n_max, jc: p.jc, kc: p.kc, frontier: opts.frontier, blocks: bif.truncation.blocks.clone() },
        weights: bif.weights.clone(),
        frequency_table: bif.frequency_table.clone(),
        tail: None,
        monotone: None,
        invertible: bif.invertible,
        config_hash: String::new(),
        verdict: Verdict::Fail,
        reason: None,
    };
    let (eps, _) = residual_norm(phi_bar, &cfg)?;
    cert.epsilon = eps;
    let fb = FatBase::new(&sparse, &cfg, fat)?;
    for n in 2..=n_max {
        let l = make_l(n)?;
        l.validate()?;
        if distinct_freq_sets(&l) != vec![vec![n]] {
            return Err(Error::Coverage(format!("preconditioner for frequency {n} must act on {{{n}}} only")));
        }
        hasher.blocks(&l);
        cert.l_norm = cert.l_norm.max(l.norm_bound(rho, varrho));
        cert.truncation.blocks.extend(plan_of(&l));
        let rep = freq_set_bound(&fb, &l, &[n], opts.frontier, opts.q)?;
        cert.frequency_table.push(rep);
    }
    cert.config_hash = hasher.finish();
    let ks: Vec<f64> = cert.frequency_table.iter().map(|r| r.k).collect();
    let tail = tail_closure(&fb, n_max + 1);
    let per: Vec<(u32, f64)> = cert.frequency_table.iter().filter(|r| r.freqs.len() == 1).map(|r| (r.freqs[0], r.k)).collect();
    let monotone = per.windows(2).filter(|w| w[0].0 >= 3).all(|w| w[1].1 <= w[0].1);
    cert.monotone = Some(monotone);
    cert.tail = Some(TailClosure { n: n_max + 1, bound: tail, pass: tail < 1.0 });
    let k = ks.iter().copied().fold(tail, f64::max);
    cert.k = k;
    cert.invertible = cert.frequency_table.iter().all(|r| r.invertible());
    let lhs = add_up(eps, mul_up(k, cert.delta));
    let ok = lhs < cert.delta && k < 1.0 && cert.invertible && monotone;
    cert.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    if !ok {
        let kmax = ks.iter().copied().fold(0.0, f64::max);
        let mut why = Vec::new();
        if !cert.invertible {
            why.push("a preconditioner block is not verified invertible".to_string());
        }
        if kmax >= 1.0 {
            why.push(format!("a per-frequency bound is not below 1 (max {kmax:.6})"));
        }
        if !monotone {
            why.push("per-frequency bounds are not decreasing for n ≥ 3".to_string());
        }
        if tail >= 1.0 {
            why.push(format!("tail closure at n = {} is {tail:.4}, not below 1", n_max + 1));
        }
        if why.is_empty() {
            why.push(format!("ε + Kδ = {lhs:.6e} is not below δ = {:.6e}", cert.delta));
        }
        cert.reason = Some(why.join("; "));
    }
    Ok(cert)
}
