mod common;

use approx::assert_relative_eq;
use common::*;
use nonlocal_ch::diagnostics::{energy_epsilon, h_norm_sq};
use nonlocal_ch::dynamics::{
    chemical_potential_explicit, lift, run_difference, step_limit, step_relaxation, Params, State,
};
use nonlocal_ch::harness::InitialField;
use nonlocal_ch::{Domain, Execution, Field, KernelData, KernelShape, PotentialSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(n: usize, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn domains() -> Vec<Domain> {
    vec![
        Domain::interval(1.0, 32).unwrap(),
        Domain::interval(2.5, 17).unwrap(),
        Domain::rectangle([1.0, 1.5], [12, 9]).unwrap(),
        Domain::rectangle([2.0, 1.0], [16, 16]).unwrap(),
    ]
}

fn gaussian(d: &Domain) -> KernelData {
    KernelData::build_scaled(d, KernelShape::Gaussian { amplitude: 1.0, width: 0.4 }, 1.0).unwrap()
}

fn default_params(p: &PotentialSpec) -> Params {
    Params {
        alpha: 0.1,
        epsilon: 0.1,
        delta: 0.5,
        delta0: 1.0,
        m: 1.0,
        dt: 1e-3,
        t_final: 0.01,
        stabilizer: p.default_stabilizer(),
    }
}

#[test]
fn laplacian_apply_matches_dense_matrix() {
    for d in domains() {
        let f = random_field(d.n_cells(), 1);
        let dense = to_field(&(dense_laplacian(&d) * to_vec(&f)));
        let fast = d.apply_laplacian(&f);
        let scale = dense.max_abs();
        assert!(sup_diff(&dense, &fast) <= 1e-10 * scale, "{:?}", d.n());
    }
}

#[test]
fn helmholtz_solve_matches_dense_lu() {
    for d in domains() {
        let f = random_field(d.n_cells(), 2);
        for (c0, c1) in [(1.0, 0.3), (0.1, 1e-3), (2.0, 0.0)] {
            let fast = d.solve_helmholtz(c0, c1, &f).unwrap();
            let dense = dense_helmholtz(&d, c0, c1, &f);
            assert!(sup_diff(&fast, &dense) <= 1e-10, "{:?} {c0} {c1}", d.n());
        }
    }
}

#[test]
fn inverse_laplacian_matches_dense_on_mean_free_data() {
    for d in domains() {
        let f = d.mean_free(&random_field(d.n_cells(), 3));
        let u = d.inverse_laplacian(&f);
        let back = to_field(&(dense_laplacian(&d) * to_vec(&u)));
        assert!(sup_diff(&back, &f) <= 1e-9);
        assert!(d.mean(&u).abs() < 1e-13);
    }
}

#[test]
fn vprime_norm_matches_dense_oracle() {
    for d in domains() {
        let f = random_field(d.n_cells(), 4).map(|v| v + 0.3);
        let fast = d.vprime_norm_sq(&f);
        let dense = dense_vprime_sq(&d, &f);
        assert_relative_eq!(fast, dense, max_relative = 1e-10);
        // h_norm reduces to the V' part when alpha = eps = 0
        assert_relative_eq!(h_norm_sq(&d, &f, None, 0.0, 0.0), dense, max_relative = 1e-10);
    }
}

#[test]
fn padded_convolution_matches_direct_sum() {
    for d in domains() {
        for shape in [
            KernelShape::Gaussian { amplitude: 1.3, width: 0.3 },
            KernelShape::TopHat { amplitude: 0.7, radius: 0.45 },
        ] {
            let k = KernelData::build(&d, shape).unwrap();
            let f = random_field(d.n_cells(), 5);
            let fast = k.convolve(&f).unwrap();
            let direct = direct_convolution(&k, &f);
            assert!(sup_diff(&fast, &direct) <= 1e-11, "{:?} {shape:?}", d.n());
            let ones = Field::new(vec![1.0; d.n_cells()]);
            assert!(sup_diff(k.a_field(), &direct_convolution(&k, &ones)) <= 1e-11);
        }
    }
}

#[test]
fn nonlocal_energy_identity_matches_double_sum() {
    let mut ds = domains();
    ds.push(Domain::interval(1.0, 64).unwrap());
    for d in ds {
        let k = gaussian(&d);
        let f = random_field(d.n_cells(), 6);
        let fast = k.interaction_energy(&f).unwrap();
        let direct = double_sum_energy(&k, &f);
        assert!((fast - direct).abs() <= 1e-10 * direct.max(1.0), "{fast} vs {direct}");
        let p = PotentialSpec::default();
        // eps = 0 drops the temperature term
        let e = energy_epsilon(&f, Some(&f), &k, &p, 0.0).unwrap();
        let f_int: f64 = f.values().iter().map(|&s| p.f(s)).sum::<f64>() * d.quad_weight();
        assert!((e - direct - f_int).abs() <= 1e-10);
    }
}

#[test]
fn explicit_potential_matches_term_by_term_oracle() {
    let d = Domain::interval(1.0, 16).unwrap();
    let k = gaussian(&d);
    let p = PotentialSpec::default();
    let params = default_params(&p);
    let phi = random_field(16, 7);
    let theta = random_field(16, 8);
    let fast = chemical_potential_explicit(&phi, Some(&theta), &k, &p, &params).unwrap();
    let dense = dense_potential(&k, &p, &phi) - to_vec(&theta) * params.delta;
    assert!(sup_diff(&fast, &to_field(&dense)) <= 1e-11);
    let lim = State::limit(phi.clone(), &k, &p).unwrap();
    let lifted = lift(&lim, &k, &p, &params).unwrap();
    let no_delta = chemical_potential_explicit(&phi, None, &k, &p, &params).unwrap();
    let ratio = lifted.theta.unwrap().scale(1.0 / params.delta);
    assert!(sup_diff(&ratio, &no_delta) <= 1e-12);
}

#[test]
fn limit_step_reduces_to_relaxation_step_without_coupling() {
    let d = Domain::interval(1.0, 32).unwrap();
    let k = gaussian(&d);
    let p = PotentialSpec::default();
    let phi = InitialField::SeededRandom { seed: 4, amplitude: 0.4, mean: 0.1, cutoff: 4 }
        .generate(&d)
        .unwrap();
    let params = Params { delta: 0.0, ..default_params(&p) };
    let r = step_relaxation(
        &State::relaxation(phi.clone(), d.constant(0.0), &k, &p, &Params { alpha: 0.0, ..params }).unwrap(),
        &k,
        &p,
        &Params { alpha: 0.0, ..params },
    )
    .unwrap();
    let l = step_limit(&State::limit(phi, &k, &p).unwrap(), &k, &p, &params).unwrap();
    assert!(sup_diff(&r.phi, &l.phi) <= 1e-12);
}

/// Global error at a fixed time against RK4 at a much smaller step.
fn relaxation_error(dt: f64, t: f64, reference: &(Field, Field), setup: &(KernelData, PotentialSpec, Field, Field)) -> f64 {
    let (k, p, phi0, theta0) = setup;
    let params = Params { dt, t_final: t, ..default_params(p) };
    let mut s = State::relaxation(phi0.clone(), theta0.clone(), k, p, &params).unwrap();
    for _ in 0..params.n_steps() {
        s = step_relaxation(&s, k, p, &params).unwrap();
    }
    sup_diff(&s.phi, &reference.0).max(sup_diff(s.theta.as_ref().unwrap(), &reference.1))
}

#[test]
fn relaxation_step_is_first_order_against_rk4() {
    let d = Domain::interval(1.0, 16).unwrap();
    let k = gaussian(&d);
    let p = PotentialSpec::default();
    let phi0 = InitialField::SeededRandom { seed: 21, amplitude: 0.4, mean: 0.2, cutoff: 3 }
        .generate(&d)
        .unwrap();
    let theta0 = InitialField::SeededRandom { seed: 22, amplitude: 0.2, mean: 0.1, cutoff: 3 }
        .generate(&d)
        .unwrap();
    let t = 0.01;
    let params = default_params(&p);
    let dt_ref = 1e-3 / 400.0;
    let oracle = Rk4Oracle::new(&k, &p, params.alpha, params.epsilon, params.delta);
    let reference = oracle.integrate(&phi0, &theta0, dt_ref, (t / dt_ref).round() as usize);
    let setup = (k.clone(), p, phi0, theta0);
    let errs: Vec<f64> = [1e-3, 5e-4, 2.5e-4, 1.25e-4]
        .iter()
        .map(|&dt| relaxation_error(dt, t, &reference, &setup))
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..=2.3).contains(&ratio), "errors {errs:?}");
    }
    let slope = (errs[0] / errs[3]).log2() / 3.0;
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn difference_of_identical_problems_vanishes() {
    let d = Domain::interval(1.0, 32).unwrap();
    let k = gaussian(&d);
    let p = PotentialSpec::default();
    let params = Params { t_final: 0.05, ..default_params(&p) };
    let phi0 = InitialField::SeededRandom { seed: 9, amplitude: 0.4, mean: 0.2, cutoff: 3 }
        .generate(&d)
        .unwrap();
    let theta0 = nonlocal_ch::dynamics::lift_theta(&phi0, &k, &p, params.delta).unwrap();
    let seq = run_difference(&phi0, &theta0, &k, &p, &params, &[(0.0, 0.0), (1e-2, 1e-2)], Execution::Sequential).unwrap();
    let par = run_difference(&phi0, &theta0, &k, &p, &params, &[(0.0, 0.0), (1e-2, 1e-2)], Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert!(seq[0].d.iter().all(|&v| v.abs() <= 1e-12));
    assert!(seq[1].d[0].abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steps_conserve_both_means(seed in 0u64..1000, mean_phi in -0.5f64..0.5, mean_theta in -1.0f64..1.0) {
        let d = Domain::interval(1.0, 24).unwrap();
        let k = gaussian(&d);
        let p = PotentialSpec::default();
        let params = default_params(&p);
        let phi = InitialField::SeededRandom { seed, amplitude: 0.5, mean: mean_phi, cutoff: 6 }.generate(&d).unwrap();
        let theta = InitialField::SeededRandom { seed: seed + 1, amplitude: 0.5, mean: mean_theta, cutoff: 6 }.generate(&d).unwrap();
        let mut s = State::relaxation(phi, theta, &k, &p, &params).unwrap();
        for _ in 0..20 {
            s = step_relaxation(&s, &k, &p, &params).unwrap();
        }
        prop_assert!((d.mean(&s.phi) - mean_phi).abs() <= 1e-12);
        prop_assert!((d.mean(s.theta.as_ref().unwrap()) - mean_theta).abs() <= 1e-12);
    }

    #[test]
    fn homogeneous_states_are_bitwise_stationary(m in -1.0f64..1.0, n in -2.0f64..2.0) {
        let d = Domain::rectangle([1.0, 0.8], [8, 6]).unwrap();
        let k = gaussian(&d);
        let p = PotentialSpec::default();
        let params = default_params(&p);
        let s0 = State::relaxation(d.constant(m), d.constant(n), &k, &p, &params).unwrap();
        let s1 = step_relaxation(&s0, &k, &p, &params).unwrap();
        prop_assert_eq!(&s0.phi, &s1.phi);
        prop_assert_eq!(&s0.theta, &s1.theta);
        let l0 = State::limit(d.constant(m), &k, &p).unwrap();
        prop_assert_eq!(&l0.phi, &step_limit(&l0, &k, &p, &params).unwrap().phi);
    }

    #[test]
    fn helmholtz_round_trip(seed in 0u64..1000, c0 in 0.01f64..5.0, c1 in 0.0f64..2.0) {
        let d = Domain::rectangle([1.0, 2.0], [10, 7]).unwrap();
        let f = random_field(d.n_cells(), seed);
        let u = d.solve_helmholtz(c0, c1, &f).unwrap();
        let back = u.scale(c0).add(&d.apply_laplacian(&u).scale(c1));
        prop_assert!(sup_diff(&back, &f) <= 1e-10);
    }

    #[test]
    fn vprime_norm_is_bounded_by_poincare(seed in 0u64..1000) {
        let d = Domain::interval(1.3, 20).unwrap();
        let f = d.mean_free(&random_field(20, seed));
        let lhs = d.vprime_norm_sq(&f);
        let rhs = d.inner(&f, &f) / d.lambda_min_positive();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }
}
