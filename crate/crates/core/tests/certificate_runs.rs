//! End-to-end certificates on a small stationary configuration.

use nshopf::approx::{build_preconditioner, newton_solve, stationary_branch, BlockPlan, GalerkinState, Truncation};
use nshopf::contraction::certify::residual_norm;
use nshopf::contraction::{contr_fix, Certificate, ContrOptions, Verdict};
use nshopf::field::{DEFAULT_RHO, DEFAULT_VARRHO};

fn state(gamma: f64, m: usize) -> GalerkinState {
    let gs: Vec<f64> = (1..=((gamma / 5.0).ceil() as usize)).map(|i| (5.0 * i as f64).min(gamma)).collect();
    let st = stationary_branch(Truncation::new(0, m, m), &gs, 1e-14).unwrap().pop().unwrap();
    newton_solve(&st, 1e-14).unwrap().0
}

fn certify(st: &GalerkinState, m: usize) -> Certificate {
    let cfg = st.config();
    let l = build_preconditioner(st, &cfg, &BlockPlan::stationary(m)).unwrap();
    let phi = st.to_field(DEFAULT_RHO, DEFAULT_VARRHO).unwrap();
    let (eps, _) = residual_norm(&phi, &cfg).unwrap();
    let opts = ContrOptions { frontier: 30, ..Default::default() };
    contr_fix(&phi, &l, &cfg, 100.0 * eps, &opts).unwrap()
}

#[test]
fn small_stationary_run_passes() {
    let c = certify(&state(10.0, 12), 12);
    assert_eq!(c.verdict, Verdict::Pass, "{:?}", c.reason);
    assert!(c.k < 1.0 && c.epsilon + c.k * c.delta < c.delta);
    assert!(c.invertible);
}

#[test]
fn certificates_do_not_depend_on_the_worker_count() {
    let st = state(10.0, 12);
    let max = std::thread::available_parallelism().map_or(1, |n| n.get());
    let runs: Vec<String> = [1, 4, max]
        .iter()
        .map(|&w| rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap().install(|| certify(&st, 12).to_json()))
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn one_perturbed_coefficient_is_detected() {
    let st = state(10.0, 12);
    let base = certify(&st, 12);
    assert_eq!(base.verdict, Verdict::Pass);
    let t = st.trunc;
    let (mut best, mut at) = (0.0, (0, 1, 1));
    for (j, k) in t.cells() {
        let v = st.get(0, j, k).abs() * DEFAULT_VARRHO.powi((j + k) as i32);
        if v > best {
            (best, at) = (v, (0, j, k));
        }
    }
    let mut bad = st.clone();
    bad.set(at.0, at.1, at.2, 1.1 * st.get(at.0, at.1, at.2));
    let mutated = certify(&bad, 12);
    assert!(mutated.epsilon >= 10.0 * base.epsilon || mutated.verdict == Verdict::Fail, "ε {} → {}", base.epsilon, mutated.epsilon);
}
