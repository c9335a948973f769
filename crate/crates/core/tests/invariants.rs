use proptest::prelude::*;
use satlab_core::feedback::{self, FeedbackMap};
use satlab_core::lyapunov;
use satlab_core::oracles;
use satlab_core::sampling;
use satlab_core::systems::{semigroup_apply, solve_mild};
use satlab_core::{
    Alignment, Disturbance, GeneratorSpec, GridFunction, Scheme, SolverOptions, State, Substep, SystemSpec,
};

fn profile(seed: u64, cells: usize, amp: f64) -> GridFunction {
    sampling::random_profile(&mut sampling::seeded_rng(seed), cells, amp)
}

fn exact_opts() -> SolverOptions {
    SolverOptions {
        scheme: Scheme::Lie,
        substep: Substep::Exact,
        alignment: Alignment::Strict,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sat_ode_flow_is_a_semigroup(f in -6.0f64..6.0, s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let direct = oracles::sat_ode_scalar(f, s + t);
        let composed = oracles::sat_ode_scalar(oracles::sat_ode_scalar(f, s), t);
        prop_assert!((direct - composed).abs() <= 1e-12 * (1.0 + f.abs()));
    }

    #[test]
    fn sat_ode_flow_is_odd_and_contracting(f in -6.0f64..6.0, g in -6.0f64..6.0, t in 0.0f64..4.0) {
        prop_assert!((oracles::sat_ode_scalar(-f, t) + oracles::sat_ode_scalar(f, t)).abs() <= 1e-12);
        let d = (oracles::sat_ode_scalar(f, t) - oracles::sat_ode_scalar(g, t)).abs();
        prop_assert!(d <= (f - g).abs() + 1e-12);
    }

    #[test]
    fn transport_and_ode_norms_agree(seed in any::<u64>(), k in 0usize..400) {
        let f = profile(seed, 200, 5.0);
        let t = k as f64 / 200.0;
        let x = oracles::exact_sat_ode_solution(&f, t).unwrap();
        let y = oracles::exact_sat_transport_solution(&f, t, Alignment::Strict).unwrap();
        prop_assert!((x.norm_l2() - y.norm_l2()).abs() <= 1e-13 * (1.0 + x.norm_l2()));
    }

    #[test]
    fn exact_splitting_reproduces_closed_form(seed in any::<u64>()) {
        let f = profile(seed, 64, 4.0);
        let x0 = State::Grid(f.clone());
        let d = Disturbance::zero_like(&x0);
        let traj = solve_mild(&SystemSpec::saturated_ode(), &x0, &d, 1.0, 0.05, &exact_opts()).unwrap();
        let exact = oracles::exact_sat_ode_solution(&f, 1.0).unwrap();
        let diff = traj.final_state().sub(&State::Grid(exact)).unwrap().norm();
        prop_assert!(diff <= 1e-12, "diff {diff}");
    }

    #[test]
    fn undisturbed_saturated_norm_never_grows(seed in any::<u64>()) {
        let x0 = State::Grid(profile(seed, 64, 8.0));
        let d = Disturbance::zero_like(&x0);
        let traj = solve_mild(&SystemSpec::saturated_transport(), &x0, &d, 2.0, 1.0 / 64.0, &SolverOptions::default())
            .unwrap();
        let norms = traj.norms();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn shift_semigroup_is_isometric(seed in any::<u64>(), k in 0usize..128) {
        let x = State::Grid(profile(seed, 64, 3.0));
        let y = semigroup_apply(&GeneratorSpec::PeriodicShift, k as f64 / 64.0, &x, Alignment::Strict).unwrap();
        prop_assert!((x.norm() - y.norm()).abs() <= 1e-13);
    }

    #[test]
    fn sat_satisfies_dual_norm_and_monotone(seed in any::<u64>(), amp in 0.1f64..20.0) {
        let mut rng = sampling::seeded_rng(seed);
        let u = sampling::random_profile(&mut rng, 64, amp);
        let v = sampling::random_profile(&mut rng, 64, amp);
        let sat = FeedbackMap::SatPointwise;
        prop_assert!(feedback::check_property_iv(&sat, &u, 1e-12).pass);
        prop_assert!(feedback::check_monotone(&sat, &[(u, v)], 1e-12).unwrap().pass);
    }

    #[test]
    fn deadzone_is_monotone_and_one_lipschitz(seed in any::<u64>(), delta in 0.05f64..2.0) {
        let mut rng = sampling::seeded_rng(seed);
        let u = sampling::random_profile(&mut rng, 32, 5.0);
        let v = sampling::random_profile(&mut rng, 32, 5.0);
        let dz = FeedbackMap::deadzone_linear(delta).unwrap();
        prop_assert!(feedback::check_monotone(&dz, &[(u.clone(), v.clone())], 1e-12).unwrap().pass);
        let num = dz.apply(&u).zip_map(&dz.apply(&v), |a, b| a - b).unwrap().norm_l2();
        let den = u.zip_map(&v, |a, b| a - b).unwrap().norm_l2();
        prop_assert!(num <= den * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn lyapunov_solution_has_small_residual(seed in any::<u64>(), m in 1usize..7, margin in 0.1f64..2.0) {
        let a = sampling::random_hurwitz(&mut sampling::seeded_rng(seed), m, margin);
        let p = lyapunov::solve_lyapunov_finite(&a).unwrap();
        prop_assert!(lyapunov::is_positive_definite(&p));
        prop_assert!(lyapunov::lyapunov_residual(&a, &p) <= 1e-8 * (1.0 + p.norm()));
    }

    #[test]
    fn counterexample_bound_below_quadrature(k in 1u32..12, t in 0.1f64..10.0) {
        let n = 1u64 << k;
        let bound = oracles::norm_lower_bound(n, t).unwrap();
        let q = oracles::counterexample_norm_sq(n, t).unwrap();
        prop_assert!(bound <= q.total() * (1.0 + 1e-9));
        prop_assert!((bound - q.head).abs() <= 1e-8 * bound.max(1e-300));
    }

    #[test]
    fn iss_gain_is_linear_and_increasing(alpha in 0.1f64..3.0, frac in 0.05f64..0.95, s in 0.0f64..10.0) {
        let eps = 2.0 * alpha * frac;
        let g1 = lyapunov::iss_gain(alpha, eps, 1.0, 1.0, s);
        let g2 = lyapunov::iss_gain(alpha, eps, 1.0, 1.0, 2.0 * s);
        prop_assert!(g1 >= 0.0);
        prop_assert!((g2 - 2.0 * g1).abs() <= 1e-12 * (1.0 + g2));
    }
}

#[test]
fn counterexample_norms_decay_but_not_uniformly() {
    let ladder = oracles::default_ladder();
    for t in [0.5, 1.0, 5.0, 10.0] {
        let n = oracles::find_witness_n(t, 0.5, &ladder).unwrap().expect("witness");
        assert!(oracles::counterexample_norm_sq(n, t).unwrap().norm() > 0.5);
        let later = oracles::counterexample_norm_sq(n, 20.0 * t + 100.0).unwrap().norm();
        assert!(later < oracles::counterexample_norm_sq(n, t).unwrap().norm());
    }
}

#[test]
fn seeded_sampling_is_reproducible() {
    let a = profile(42, 50, 2.0);
    let b = profile(42, 50, 2.0);
    assert_eq!(a, b);
    let like = State::Grid(GridFunction::zeros(16));
    let mut r1 = sampling::seeded_rng(3);
    let mut r2 = sampling::seeded_rng(3);
    let d1 = sampling::random_piecewise_disturbance(&mut r1, &like, 4, 1.0, 5.0, 0.1);
    let d2 = sampling::random_piecewise_disturbance(&mut r2, &like, 4, 1.0, 5.0, 0.1);
    assert_eq!(d1, d2);
    assert!(d1.sup_norm() <= 1.0 + 1e-12);
    for b in d1.breakpoints() {
        let k = b / 0.1;
        assert!((k - k.round()).abs() < 1e-9);
    }
}
