//! Normalization, derivative and frequency bookkeeping of the fixed-point maps.

use nshopf::field::{FieldEnclosure, SpaceParams};
use nshopf::maps::{dmap_df, hat_phi, map_f, BasePoint, MapConfig, MapKind, THETA};
use nshopf::{Ball, Error, FreqIndexMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_phi(rng: &mut ChaCha8Rng, n: usize, fmax: usize) -> FieldEnclosure {
    let p = SpaceParams::standard(n, n, FreqIndexMap::identity(fmax));
    let mut f = FieldEnclosure::zero(&p);
    f.set(0, 1, 2, Ball::exact(1.0)).unwrap();
    f.set(0, 3, 2, Ball::exact(-1.0)).unwrap();
    for j in 1..=n {
        for k in 1..=n {
            for t in -(fmax as i64)..=fmax as i64 {
                if rng.gen_bool(0.6) {
                    f.add_coeff(t, j, k, Ball::exact(rng.gen_range(-0.3..0.3) / (j + k) as f64)).unwrap();
                }
            }
        }
    }
    if fmax > 0 {
        f.set(-1, 1, 1, Ball::exact(THETA * rng.gen_range(0.5..2.0))).unwrap();
    }
    f
}

/// `Σ w |a − b|` over centers, on the union of both shapes.
fn center_dist(a: &FieldEnclosure, b: &FieldEnclosure) -> f64 {
    let (pa, pb) = (a.params(), b.params());
    let jc = pa.jc.max(pb.jc);
    let kc = pa.kc.max(pb.kc);
    let fmax = pa.map.max_freq().max(pb.map.max_freq()) as i64;
    let mut s = 0.0;
    for j in 1..=jc {
        for k in 1..=kc {
            for n in -fmax..=fmax {
                let d = a.get(n, j, k).center() - b.get(n, j, k).center();
                s += d.abs() * pa.weight_up(n, j, k);
            }
        }
    }
    s
}

fn axpy(phi: &FieldEnclosure, psi: &FieldEnclosure, h: f64) -> FieldEnclosure {
    phi.add(&psi.scale(Ball::exact(h))).unwrap().midpoint()
}

#[test]
fn normalization_holds_for_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut done = 0;
    for case in 0..200 {
        let cfg = if case % 2 == 0 { MapConfig::bifurcation() } else { MapConfig::periodic(Ball::exact(rng.gen_range(0.0..1.0))) };
        let mut phi = random_phi(&mut rng, 4, 1);
        if case % 3 == 0 {
            phi = phi.scale(Ball::new(1.0, 1e-9).unwrap());
        }
        let (tilde, _) = match map_f(&phi, &cfg) {
            Ok(r) => r,
            Err(Error::Degenerate(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        assert!(tilde.functional_a().unwrap().contains(0.0), "A φ̃ = {}", tilde.functional_a().unwrap());
        assert!(tilde.functional_b().unwrap().contains(THETA), "B φ̃ = {}", tilde.functional_b().unwrap());
        done += 1;
    }
    assert!(done > 150);
}

fn fd_errors(cfg: &MapConfig, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fmax = if cfg.kind == MapKind::Stationary { 0 } else { 1 };
    let phi = random_phi(&mut rng, 4, fmax);
    let mut psi = FieldEnclosure::zero(phi.params());
    for _ in 0..6 {
        let (j, k) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        psi.set(rng.gen_range(-(fmax as i64)..=fmax as i64), j, k, Ball::exact(rng.gen_range(-1.0..1.0))).unwrap();
    }
    let base = BasePoint::new(&phi, cfg).unwrap();
    let d = dmap_df(&base, &psi).unwrap();
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&h| {
            let (fp, _) = map_f(&axpy(&phi, &psi, h), cfg).unwrap();
            let (fm, _) = map_f(&axpy(&phi, &psi, -h), cfg).unwrap();
            let fd = fp.sub(&fm).unwrap().scale(Ball::exact(0.5 / h));
            center_dist(&fd, &d)
        })
        .collect();
    errs
}

#[test]
fn derivative_matches_central_differences() {
    for (i, cfg) in [MapConfig::bifurcation(), MapConfig::periodic(Ball::exact(0.5)), MapConfig::stationary(Ball::exact(3.0))].iter().enumerate() {
        for seed in 0..3 {
            let errs = fd_errors(cfg, 100 * i as u64 + seed);
            if cfg.kind == MapKind::Stationary {
                // quadratic map: central differences are exact up to rounding
                assert!(errs.iter().all(|&e| e < 1e-9), "{:?}: errors {errs:?}", cfg.kind);
            } else {
                let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log10()).collect();
                assert!(orders[0] >= 1.9, "{:?}: observed orders {orders:?}", cfg.kind);
            }
        }
    }
}

#[test]
fn high_frequency_modes_do_not_move_gamma_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let phi = random_phi(&mut rng, 4, 1);
    let cfg = MapConfig::periodic(Ball::ZERO);
    let wide = phi.embed(&SpaceParams::standard(4, 4, FreqIndexMap::identity(4))).unwrap();
    let base = BasePoint::new(&wide, &cfg).unwrap();
    for n in [3i64, -3, 4] {
        let psi = FieldEnclosure::from_terms(wide.params(), &[(n, 2, 3, Ball::ONE), (n, 1, 1, Ball::exact(0.5))]).unwrap();
        let d = dmap_df(&base, &psi).unwrap();
        // only frequencies n−1, n, n+1 can appear
        let p = d.params();
        for j in 1..=p.jc {
            for k in 1..=p.kc {
                for m in -(p.map.max_freq() as i64)..=p.map.max_freq() as i64 {
                    if (m.unsigned_abs() as i64 - n.abs()).abs() > 1 {
                        assert!(d.get(m, j, k).is_zero(), "frequency {m} appears for input frequency {n}");
                    }
                }
            }
        }
        assert!(d.functional_a().unwrap().mag() < 1e-300 + d.tail_total());
    }
}

#[test]
fn zero_s_drops_odd_odd_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut phi = random_phi(&mut rng, 4, 1).even_part();
    phi.set(1, 2, 1, Ball::exact(0.25)).unwrap();
    phi.set(-1, 1, 3, Ball::exact(-0.5)).unwrap();
    let h0 = hat_phi(&phi, &MapConfig::periodic(Ball::ZERO)).unwrap();
    let h1 = hat_phi(&phi, &MapConfig::periodic(Ball::ONE)).unwrap();
    let odd_only = phi.odd_part();
    let oo = hat_phi(&odd_only, &MapConfig::periodic(Ball::ONE)).unwrap();
    let diff = center_dist(&h1, &h0);
    assert!((diff - center_dist(&oo, &FieldEnclosure::zero(oo.params()))).abs() <= 1e-9 * (1.0 + diff));
    assert!(diff > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn derivative_is_linear(seed in 0u64..10_000, c in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_phi(&mut rng, 3, 1);
        let base = match BasePoint::new(&phi, &MapConfig::bifurcation()) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        let a = FieldEnclosure::from_terms(phi.params(), &[(1, 2, 1, Ball::ONE), (0, 1, 3, Ball::exact(-0.5))]).unwrap();
        let b = FieldEnclosure::from_terms(phi.params(), &[(-1, 3, 3, Ball::exact(0.75))]).unwrap();
        let da = dmap_df(&base, &a).unwrap();
        let db = dmap_df(&base, &b).unwrap();
        let dsum = dmap_df(&base, &a.scale(Ball::exact(c)).add(&b).unwrap()).unwrap();
        let lin = da.scale(Ball::exact(c)).add(&db).unwrap();
        let p = dsum.params();
        for j in 1..=p.jc {
            for k in 1..=p.kc {
                for n in -1..=1 {
                    let (x, y) = (dsum.get(n, j, k), lin.get(n, j, k));
                    prop_assert!((x.center() - y.center()).abs() <= x.radius() + y.radius() + 1e-300);
                }
            }
        }
    }
}

#[test]
fn stationary_kind_fixes_gamma() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let phi = random_phi(&mut rng, 4, 0);
    let (_, ga) = map_f(&phi, &MapConfig::stationary(Ball::exact(7.0))).unwrap();
    assert_eq!(ga.gamma, Ball::exact(7.0));
    assert!(ga.alpha.is_zero());
    assert_eq!(MapConfig::stationary(Ball::ONE).kind, MapKind::Stationary);
}
