//! Operator-norm bounds, block invertibility and the contraction driver on
//! configurations with known answers.

use std::f64::consts::PI;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use nshopf::approx::{build_preconditioner, hopf_locate, newton_solve, stationary_branch, BlockPlan, GalerkinState, Truncation};
use nshopf::contraction::engine::Workspace;
use nshopf::contraction::norms::{box_modes, op_norm_bound, sample_factor, TailSpec};
use nshopf::contraction::{contr_fix, dquasi_newton_mode, quasi_newton, verify_block_invertible, BallMatrix, BlockOperator, ContrOptions, FatBase, ModeImage, Verdict};
use nshopf::field::{FieldEnclosure, Mode, ModeIndex, SpaceParams, DEFAULT_RHO, DEFAULT_VARRHO};
use nshopf::maps::{dmap_df, BasePoint, MapConfig};
use nshopf::operators::forcing_g;
use nshopf::{Ball, FreqIndexMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(p: &SpaceParams, n: i64, j: usize, k: usize) -> FieldEnclosure {
    FieldEnclosure::from_terms(p, &[(n, j, k, Ball::ONE)]).unwrap()
}

fn no_tail(freqs: &[u32], wave: usize) -> TailSpec {
    TailSpec { freqs: freqs.to_vec(), wave, bound: 0.0 }
}

#[test]
fn identity_on_one_mode() {
    let p = SpaceParams::standard(1, 1, FreqIndexMap::identity(1));
    let b = op_norm_bound(|n, j, k| Ok(unit(&p, n, j, k)), &box_modes(&[1], 1), 8, DEFAULT_RHO, DEFAULT_VARRHO, &no_tail(&[1], 1)).unwrap();
    assert!((1.0..=8.0 / (8.0 - PI)).contains(&b), "bound {b}");
}

#[test]
fn zero_operator() {
    let p = SpaceParams::standard(3, 3, FreqIndexMap::identity(2));
    let b = op_norm_bound(|_, _, _| Ok(FieldEnclosure::zero(&p)), &box_modes(&[0, 1, 2], 3), 16, DEFAULT_RHO, DEFAULT_VARRHO, &no_tail(&[0, 1, 2], 3)).unwrap();
    assert_eq!(b, 0.0);
}

#[test]
fn small_q_is_rejected() {
    let p = SpaceParams::standard(1, 1, FreqIndexMap::identity(0));
    assert!(op_norm_bound(|n, j, k| Ok(unit(&p, n, j, k)), &box_modes(&[0], 1), 3, DEFAULT_RHO, DEFAULT_VARRHO, &no_tail(&[0], 1)).is_err());
    assert!(op_norm_bound(|n, j, k| Ok(unit(&p, n, j, k)), &[], 16, DEFAULT_RHO, DEFAULT_VARRHO, &no_tail(&[0], 1)).is_err());
}

/// Random operator mixing each mode into a few cells with 2×2 blocks.
struct PairOp {
    p: SpaceParams,
    // per mode (n, j, k): list of (target n magnitude, j, k, 2×2 matrix)
    maps: std::collections::HashMap<(u32, usize, usize), Vec<(u32, usize, usize, [[f64; 2]; 2])>>,
}

impl PairOp {
    fn new(rng: &mut ChaCha8Rng, fmax: u32, wave: usize) -> PairOp {
        let p = SpaceParams::standard(wave, wave, FreqIndexMap::identity(fmax as usize));
        let mut maps = std::collections::HashMap::new();
        for m in box_modes(&(0..=fmax).collect::<Vec<_>>(), wave) {
            let v = (0..rng.gen_range(1..4))
                .map(|_| {
                    let f = if m.n == 0 { 0 } else { m.n };
                    let x = [[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]];
                    (f, rng.gen_range(1..=wave), rng.gen_range(1..=wave), x)
                })
                .collect();
            maps.insert((m.n, m.j, m.k), v);
        }
        PairOp { p, maps }
    }

    fn apply(&self, n: i64, j: usize, k: usize) -> FieldEnclosure {
        let mut f = FieldEnclosure::zero(&self.p);
        let col = usize::from(n < 0);
        for &(t, tj, tk, x) in &self.maps[&(n.unsigned_abs() as u32, j, k)] {
            f.add_coeff(t as i64, tj, tk, Ball::exact(x[0][col])).unwrap();
            if t > 0 {
                f.add_coeff(-(t as i64), tj, tk, Ball::exact(x[1][col])).unwrap();
            }
        }
        f
    }

    /// Dense norm by fine sampling of each mode's unit circle.
    fn dense_norm(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (&(n, j, k), _) in &self.maps {
            let plus = self.apply(n as i64, j, k);
            let minus = if n > 0 { Some(self.apply(-(n as i64), j, k)) } else { None };
            let steps = if n > 0 { 20_000 } else { 1 };
            for s in 0..steps {
                let th = 2.0 * PI * s as f64 / steps as f64;
                let (c, si) = (th.cos(), th.sin());
                let mut tot = 0.0;
                for tj in 1..=self.p.jc {
                    for tk in 1..=self.p.kc {
                        for f in 0..=self.p.map.max_freq() as i64 {
                            let v = |m: i64| plus.get(m, tj, tk).center() * c + minus.as_ref().map_or(0.0, |g| g.get(m, tj, tk).center()) * si;
                            let e = if f == 0 { v(0).abs() } else { v(f).hypot(v(-f)) };
                            tot += e * self.p.weight_up(f, tj, tk);
                        }
                    }
                }
                best = best.max(tot / self.p.weight_up(n as i64, j, k));
            }
        }
        best
    }
}

#[test]
fn bound_dominates_dense_norm_within_the_sampling_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for q in [4, 8, 16] {
        for _ in 0..4 {
            let op = PairOp::new(&mut rng, 2, 3);
            let freqs: Vec<u32> = (0..=2).collect();
            let b = op_norm_bound(|n, j, k| Ok(op.apply(n, j, k)), &box_modes(&freqs, 3), q, DEFAULT_RHO, DEFAULT_VARRHO, &no_tail(&freqs, 3)).unwrap();
            let d = op.dense_norm();
            assert!(b >= d * (1.0 - 1e-9), "q={q}: bound {b} below dense norm {d}");
            assert!(b <= sample_factor(q).unwrap() * d * (1.0 + 1e-6), "q={q}: bound {b} above factor × {d}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn diagonal_operators(ds in proptest::collection::vec(-4.0f64..4.0, 18), q in 4usize..40) {
        let p = SpaceParams::standard(3, 3, FreqIndexMap::identity(1));
        let idx = |n: i64, j: usize, k: usize| (n.unsigned_abs() as usize) * 9 + (j - 1) * 3 + (k - 1);
        let apply = |n: i64, j: usize, k: usize| Ok(FieldEnclosure::from_terms(&p, &[(n, j, k, Ball::exact(ds[idx(n, j, k)]))]).unwrap());
        let b = op_norm_bound(apply, &box_modes(&[0, 1], 3), q, DEFAULT_RHO, DEFAULT_VARRHO, &no_tail(&[0, 1], 3)).unwrap();
        let dmax = ds.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        prop_assert!(b >= dmax * (1.0 - 1e-12));
        prop_assert!(b <= sample_factor(q).unwrap() * dmax * (1.0 + 1e-12) + 1e-300);
    }
}

#[test]
fn invertibility_examples() {
    let w = vec![1.0; 3];
    let ok = verify_block_invertible(&BallMatrix::zeros(3), &w, &w);
    assert!(ok.pass);
    assert!((ok.inverse_norm.unwrap() - 1.0).abs() < 1e-12);
    let mut neg = BallMatrix::zeros(3);
    for i in 0..3 {
        neg.set(i, i, Ball::exact(-1.0));
    }
    assert!(!verify_block_invertible(&neg, &w, &w).pass);

    let mut rng = ChaCha8Rng::seed_from_u64(52);
    for _ in 0..200 {
        let n = rng.gen_range(1..12);
        let m = Mat::from_fn(n, n, |_, _| rng.gen_range(-0.4..0.4) / n as f64);
        let wu: Vec<f64> = (0..n).map(|i| 1.5f64.powi(i as i32)).collect();
        let r = verify_block_invertible(&BallMatrix::from_f64(&m), &wu, &wu);
        assert!(r.pass);
        let a = Mat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 } + m[(r, c)]);
        let inv = a.partial_piv_lu().inverse();
        let dense = (0..n).map(|c| (0..n).map(|r| wu[r] * inv[(r, c)].abs()).sum::<f64>() / wu[c]).fold(0.0, f64::max);
        assert!(r.inverse_norm.unwrap() >= dense * (1.0 - 1e-12));
    }
}

fn g_params() -> SpaceParams {
    SpaceParams::standard(4, 4, FreqIndexMap::identity(0))
}

#[test]
fn quasi_newton_at_a_true_fixed_point() {
    // γ = 0 makes ℱ the constant map g
    let cfg = MapConfig::stationary(Ball::ZERO);
    let g = forcing_g(&g_params()).unwrap();
    let l = BlockOperator::identity();
    let zero = FieldEnclosure::zero(&g_params());
    let n0 = quasi_newton(&zero, &g, &l, &cfg).unwrap();
    assert!(n0.norm_up() == 0.0);
    let h = FieldEnclosure::from_terms(&g_params(), &[(0, 2, 2, Ball::exact(0.125))]).unwrap();
    let nh = quasi_newton(&h, &g, &l, &cfg).unwrap();
    assert!(nh.norm_up() == 0.0, "𝒩(h) = ℱ(φ̄+h) − φ̄ = 0 for constant ℱ");
}

#[test]
fn constant_map_contracts_with_zero_k() {
    let cfg = MapConfig::stationary(Ball::ZERO);
    let g = forcing_g(&g_params()).unwrap();
    let mut bar = g.clone();
    bar.set(0, 2, 2, Ball::exact(1e-3)).unwrap();
    let eps = g_params().weight_up(0, 2, 2) * 1e-3;
    let opts = ContrOptions { frontier: 8, ..Default::default() };
    let l = BlockOperator::identity();
    let pass = contr_fix(&bar, &l, &cfg, 2.0 * eps, &opts).unwrap();
    assert_eq!(pass.verdict, Verdict::Pass, "{:?}", pass.reason);
    assert!(pass.k == 0.0);
    assert!((pass.epsilon - eps).abs() <= 1e-12 * eps);
    let fail = contr_fix(&bar, &l, &cfg, 0.5 * eps, &opts).unwrap();
    assert_eq!(fail.verdict, Verdict::Fail);
    let empty = contr_fix(&bar, &l, &cfg, 0.0, &opts).unwrap();
    assert_eq!(empty.verdict, Verdict::Fail);
}

fn small_stationary(gamma: f64, m: usize) -> GalerkinState {
    let gs: Vec<f64> = (1..=((gamma / 5.0).ceil() as usize)).map(|i| (5.0 * i as f64).min(gamma)).collect();
    let st = stationary_branch(Truncation::new(0, m, m), &gs, 1e-14).unwrap().pop().unwrap();
    newton_solve(&st, 1e-14).unwrap().0
}

#[test]
fn exact_inverse_block_nearly_cancels() {
    let st = small_stationary(10.0, 6);
    let cfg = st.config();
    let l = build_preconditioner(&st, &cfg, &BlockPlan::stationary(6)).unwrap();
    let phi = st.to_field(DEFAULT_RHO, DEFAULT_VARRHO).unwrap();
    let base = BasePoint::new(&phi, &cfg).unwrap();
    for (j, k) in [(1, 2), (3, 2), (2, 5), (6, 6)] {
        let u = Mode::new(ModeIndex { n: 0, j, k }, Ball::ONE, Ball::ZERO).unwrap();
        let d = dquasi_newton_mode(&u, &l, &base).unwrap();
        // the block covers j, k ≤ 6 in u's symmetry sector
        let mut on_block = 0.0;
        for jj in 1..=6 {
            for kk in 1..=6 {
                if (jj + kk) % 2 == (j + k) % 2 {
                    on_block += d.get(0, jj, kk).mag();
                }
            }
        }
        assert!(on_block < 1e-9, "({j},{k}): block part {on_block:e}");
    }
    let far = Mode::new(ModeIndex { n: 0, j: 9, k: 1 }, Ball::ONE, Ball::ZERO).unwrap();
    let d = dquasi_newton_mode(&far, &l, &base).unwrap();
    let p = SpaceParams::standard(9, 1, FreqIndexMap::identity(0));
    let want = dmap_df(&base, &unit(&p, 0, 9, 1)).unwrap();
    for jj in 1..=12 {
        for kk in 1..=12 {
            let (a, b) = (d.get(0, jj, kk), want.get(0, jj, kk));
            assert!((a.center() - b.center()).abs() <= a.radius() + b.radius() + 1e-300);
        }
    }
}

fn kernel_vs_generic(phi: &FieldEnclosure, cfg: &MapConfig, freqs: &[u32], modes: &[(u32, usize, usize)]) {
    let fb = FatBase::new(phi, cfg, 0.0).unwrap();
    let ws = Workspace::new(&fb, freqs, 20);
    let mut ker = ws.kernel(&fb).unwrap();
    for &(n, j, k) in modes {
        let img = ker.mode_image(n, j, k).unwrap();
        let p = SpaceParams::standard(j, k, FreqIndexMap::identity(n as usize));
        let plus = dmap_df(&fb.base, &unit(&p, n as i64, j, k)).unwrap();
        let minus = if n > 0 { Some(dmap_df(&fb.base, &unit(&p, -(n as i64), j, k)).unwrap()) } else { None };
        let gen = ModeImage::from_fields(&plus, minus.as_ref()).unwrap();
        let (a, b) = (img.bound(16).unwrap(), gen.bound(16).unwrap());
        assert!((a - b).abs() <= 1e-6 * a.max(b) + 1e-12, "({n},{j},{k}): kernel {a} generic {b}");
    }
}

#[test]
fn kernel_images_match_the_generic_derivative() {
    let st = small_stationary(20.0, 8);
    let phi = st.to_field(DEFAULT_RHO, DEFAULT_VARRHO).unwrap();
    kernel_vs_generic(&phi, &st.config(), &[0], &[(0, 1, 1), (0, 1, 2), (0, 3, 3), (0, 7, 2), (0, 20, 5), (0, 5, 20), (0, 20, 20)]);

    let gs: Vec<f64> = (1..=18).map(|i| 5.0 * i as f64).collect();
    let br = stationary_branch(Truncation::new(0, 10, 10), &gs, 1e-13).unwrap();
    let h = hopf_locate(&br, 1e-13).unwrap();
    let phi = h.state.to_field(DEFAULT_RHO, DEFAULT_VARRHO).unwrap();
    kernel_vs_generic(&phi, &MapConfig::bifurcation(), &[0, 1], &[(0, 1, 1), (1, 1, 1), (1, 1, 2), (0, 2, 4), (1, 7, 2), (1, 20, 5), (0, 20, 5), (1, 5, 20), (1, 20, 1)]);
}
