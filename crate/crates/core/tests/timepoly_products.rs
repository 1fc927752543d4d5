//! Pointwise containment and submultiplicativity of time-polynomial products.

use std::sync::Arc;

use nshopf::timepoly::{poly_norm, poly_product, FreqIndexMap, TimePoly};
use nshopf::Ball;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RHO: f64 = 32.0;

fn cosi(n: i64, t: f64) -> f64 {
    if n >= 0 {
        (n as f64 * t).cos()
    } else {
        (-n as f64 * t).sin()
    }
}

fn random_map(rng: &mut ChaCha8Rng) -> FreqIndexMap {
    match rng.gen_range(0..4) {
        0 => FreqIndexMap::identity(rng.gen_range(0..4)),
        1 => FreqIndexMap::single(rng.gen_range(1..6)),
        2 => FreqIndexMap::band(rng.gen_range(2..6)),
        _ => FreqIndexMap::identity(1),
    }
}

fn random_poly(rng: &mut ChaCha8Rng) -> TimePoly {
    let map = Arc::new(random_map(rng));
    let w = map.width();
    let coeffs = (0..w)
        .map(|_| if rng.gen_bool(0.2) { Ball::ZERO } else { Ball::exact(rng.gen_range(-1.0..1.0) * 2f64.powi(rng.gen_range(-8..3))) })
        .collect();
    TimePoly::from_coeffs(map, coeffs).unwrap()
}

/// Exact center function value, with its floating-point error bound.
fn value(p: &TimePoly, t: f64) -> (f64, f64) {
    let m = p.map();
    let mut v = 0.0;
    let mut mag = 0.0;
    for pos in 0..m.width() {
        let n = m.freq_at_pos(pos);
        let c = p.coeffs()[pos].center();
        v += c * cosi(n, t);
        mag += c.abs();
    }
    (v, mag * 1e-14)
}

#[test]
fn products_contain_pointwise_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let a = random_poly(&mut rng);
        let b = random_poly(&mut rng);
        let target = Arc::new(random_map(&mut rng));
        let (p, spill) = poly_product(&a, &b, &target, RHO);
        // |h(t)| ≤ ‖h‖ for the spilled part, and the spill holds weighted norms
        let env = spill.total();
        for _ in 0..4 {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            let (va, ea) = value(&a, t);
            let (vb, eb) = value(&b, t);
            let (vp, ep) = value(&p, t);
            let slack = env + ep + p.coeffs().iter().map(|c| c.radius()).sum::<f64>() + ea * vb.abs() + eb * va.abs() + ea * eb + 1e-300;
            assert!((va * vb - vp).abs() <= slack * (1.0 + 1e-12) + 1e-15 * (va * vb).abs(), "t={t} a·b={} p={} slack={slack}", va * vb, vp);
        }
    }
}

#[test]
fn norms_are_submultiplicative() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10_000 {
        let a = random_poly(&mut rng);
        let b = random_poly(&mut rng);
        let fmax = a.map().max_freq() + b.map().max_freq();
        let full = Arc::new(FreqIndexMap::identity(fmax as usize));
        let (p, spill) = poly_product(&a, &b, &full, RHO);
        assert!(spill.is_zero(), "a target holding every product frequency spills nothing");
        let (na, nb, np) = (poly_norm(&a, RHO).unwrap(), poly_norm(&b, RHO).unwrap(), poly_norm(&p, RHO).unwrap());
        let bound = (na * nb).hi();
        assert!(np.lo() <= bound, "‖ab‖ ≥ {} exceeds ‖a‖‖b‖ ≤ {bound}", np.lo());
        let target = Arc::new(random_map(&mut rng));
        let (q, _) = poly_product(&a, &b, &target, RHO);
        assert!(poly_norm(&q, RHO).unwrap().lo() <= bound);
    }
}

#[test]
fn paired_norm_example() {
    let m = Arc::new(FreqIndexMap::identity(2));
    let mut h = TimePoly::zero(m);
    h.set(2, Ball::exact(3.0)).unwrap();
    h.set(-2, Ball::exact(4.0)).unwrap();
    assert!(poly_norm(&h, RHO).unwrap().contains(5120.0));
}
