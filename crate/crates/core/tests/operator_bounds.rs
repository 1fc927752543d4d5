//! Norm inequalities of the advection form and the resolvents on random enclosures.

use nshopf::field::{FieldEnclosure, SpaceParams};
use nshopf::operators::{bilinear_coeffs, bilinear_norm_bound, c_bound, c_prime_bound, dt_inv_linear, forcing_g, inv_linear, prod_bilinear};
use nshopf::{Ball, FreqIndexMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(rng: &mut ChaCha8Rng, p: &SpaceParams, tails: bool) -> FieldEnclosure {
    let mut f = FieldEnclosure::zero(p);
    let ic = p.map.max_freq() as i64;
    for _ in 0..rng.gen_range(1..10) {
        let (j, k) = (rng.gen_range(1..=p.jc), rng.gen_range(1..=p.kc));
        let n = rng.gen_range(-ic..=ic);
        let r = if rng.gen_bool(0.3) { rng.gen_range(0.0..1e-3) } else { 0.0 };
        f.set(n, j, k, Ball::new(rng.gen_range(-1.0..1.0), r).unwrap()).unwrap();
    }
    if tails {
        for _ in 0..rng.gen_range(0..3) {
            let f_ = rng.gen_range(0..=ic as u32);
            f.add_tail_freq(p.jc + rng.gen_range(1..3), p.kc + rng.gen_range(1..3), f_, rng.gen_range(0.0..1e-2)).unwrap();
        }
    }
    f
}

#[test]
fn product_norm_respects_the_bilinear_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..400 {
        let n = 2 + case % 5;
        let tails = case % 2 == 1;
        let p = SpaceParams::standard(n, n, FreqIndexMap::identity(1));
        let p = if tails { p.with_tails(n + 3, n + 3) } else { p };
        let out = SpaceParams::standard(2 * n, 2 * n, FreqIndexMap::identity(2)).with_tails(2 * n + 1, 2 * n + 1);
        let a = random_field(&mut rng, &p, tails);
        let b = random_field(&mut rng, &p, tails);
        let prod = prod_bilinear(&a, &b, &out).unwrap();
        let bound = bilinear_norm_bound(&a, &b);
        assert!(prod.norm_dn() <= bound, "case {case}: ‖L(a)b‖ ≥ {} > {bound}", prod.norm_dn());
    }
}

#[test]
fn coefficient_bound_on_random_quadruples() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10_000 {
        let (jj, kk, j, k) = (rng.gen_range(1..60), rng.gen_range(1..60), rng.gen_range(1..60), rng.gen_range(1..60));
        let c = bilinear_coeffs(jj, kk, j, k);
        let cap = (0.25 / ((j * j + k * k) as f64).sqrt()).max(0.25 / ((jj * jj + kk * kk) as f64).sqrt());
        for row in c.n {
            for x in row {
                assert!(x.mag() <= cap * (1.0 + 1e-14), "N({jj},{kk},{j},{k}) = {x} above {cap}");
            }
        }
    }
}

#[test]
fn worked_coefficient() {
    let c = bilinear_coeffs(1, 2, 3, 2);
    assert!(c.theta.contains(2.0 / 65.0));
    let want = -(2.0 / 65.0) * 4.0 / (4.0 * 2f64.sqrt());
    assert!((c.n[0][0].center() - want).abs() <= 1e-15);
}

#[test]
fn forcing_is_exact() {
    let g = forcing_g(&SpaceParams::standard(4, 4, FreqIndexMap::identity(0))).unwrap();
    assert_eq!(g.get(0, 1, 2), Ball::exact(1.0));
    assert_eq!(g.get(0, 3, 2), Ball::exact(-1.0));
    assert!(!g.has_tails());
}

proptest! {
    #[test]
    fn resolvent_pairs_contract(j in 1usize..40, k in 1usize..40, f in 0u32..8, alpha in -8.0f64..8.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let p = SpaceParams::standard(j, k, FreqIndexMap::identity(f as usize));
        let n = f as i64;
        let mut phi = FieldEnclosure::zero(&p);
        phi.set(n, j, k, Ball::exact(x)).unwrap();
        if n > 0 {
            phi.set(-n, j, k, Ball::exact(y)).unwrap();
        }
        let pair = |g: &FieldEnclosure| if n > 0 { g.get(n, j, k).mag().hypot(g.get(-n, j, k).mag()) } else { g.get(0, j, k).mag() };
        let lam = (j * j + k * k) as f64;
        let a = Ball::exact(alpha);
        let psi = inv_linear(&phi, a);
        prop_assert!(pair(&psi) <= c_bound(f, lam, alpha.abs()) * pair(&phi) * (1.0 + 1e-12) + 1e-300);
        let dpsi = dt_inv_linear(&phi, a);
        prop_assert!(pair(&dpsi) <= c_prime_bound(f, lam, alpha.abs()) * pair(&phi) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn resolvent_at_zero_alpha(j in 1usize..30, k in 1usize..30, x in -1.0f64..1.0) {
        let p = SpaceParams::standard(j, k, FreqIndexMap::identity(1));
        let phi = FieldEnclosure::from_terms(&p, &[(1, j, k, Ball::exact(x))]).unwrap();
        let psi = inv_linear(&phi, Ball::ZERO);
        prop_assert!(psi.get(1, j, k).contains(x / ((j * j + k * k) as f64).sqrt()) || (psi.get(1, j, k).center() - x / ((j * j + k * k) as f64).sqrt()).abs() < 1e-16);
    }
}

#[test]
fn resolvent_worked_examples() {
    let p = SpaceParams::standard(1, 1, FreqIndexMap::identity(1));
    let (x, y) = (0.75, -0.5);
    let phi = FieldEnclosure::from_terms(&p, &[(1, 1, 1, Ball::exact(x)), (-1, 1, 1, Ball::exact(y))]).unwrap();
    let psi = inv_linear(&phi, Ball::exact(2.0));
    assert!(psi.get(1, 1, 1).contains(2f64.sqrt() * (2.0 * x - 2.0 * y) / 8.0) || (psi.get(1, 1, 1).center() - 2f64.sqrt() * (2.0 * x - 2.0 * y) / 8.0).abs() < 1e-15);
    let d = dt_inv_linear(&phi, Ball::ZERO);
    // λ = 2: ψ₁ = 2φ₋₁/4, ψ₋₁ = −2φ₁/4
    assert!(d.get(1, 1, 1).contains(y / 2.0));
    assert!(d.get(-1, 1, 1).contains(-x / 2.0));
}
