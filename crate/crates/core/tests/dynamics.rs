mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spin_collapse::dynamics::*;
use spin_collapse::measurement::{DipolarSetup, GammaMode};
use spin_collapse::spin::*;
use spin_collapse::state::{product_state, purity, BipartiteShape, PureState};
use spin_collapse::{Complex64, Error};

fn zeros(d: usize) -> DMatrix<Complex64> {
    DMatrix::zeros(d, d)
}

fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let x: Complex64 = a.iter().zip(b).map(|(p, q)| p.conj() * q).sum();
    x.norm_sqr()
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let m = coeffs(&PureState::random(BipartiteShape::new(n, n).unwrap(), rng)) * c(n as f64, 0.0);
    (&m + m.adjoint()) * c(0.5, 0.0)
}

#[test]
fn gamma_zero_matches_propagator() {
    let (n1, u) = dipolar_cases()[3];
    let setup = dipolar(u, 1.0);
    let psi0 = setup.initial_state(&n1).unwrap();
    let h = setup.hamiltonian().clone();
    for t in [0.7, 5.0] {
        let sim = SimConfig { t_max: t, ..SimConfig::default() };
        let tr = integrate(&psi0, &h, &GammaPolicy::constant(0.0).unwrap(), &sim).unwrap();
        let exact = propagator(&h, t) * DVector::from_column_slice(psi0.amplitudes());
        assert!(fidelity(exact.as_slice(), tr.final_state.amplitudes()) > 1.0 - 1e-8);
        // purity oscillates under plain unitary evolution and the norm stays put
        assert!(tr.samples.iter().all(|s| s.norm_error < 1e-8));
        let p_exact = purity_oracle(&PureState::normalized(psi0.shape(), exact.as_slice().to_vec()).unwrap());
        assert!((tr.last().purity - p_exact).abs() < 1e-8);
    }
}

#[test]
fn gamma_zero_random_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = random_hermitian(12, &mut rng);
    let psi0 = PureState::random(BipartiteShape::new(3, 4).unwrap(), &mut rng);
    let sim = SimConfig { t_max: 3.0, ..SimConfig::default() };
    let tr = integrate(&psi0, &h, &GammaPolicy::constant(0.0).unwrap(), &sim).unwrap();
    let exact = propagator(&h, 3.0) * DVector::from_column_slice(psi0.amplitudes());
    assert!(fidelity(exact.as_slice(), tr.final_state.amplitudes()) > 1.0 - 1e-8);
}

#[test]
fn entangling_oscillations_without_disentanglement() {
    let (n1, u) = dipolar_cases()[3];
    let setup = dipolar(u, 1.0);
    let sim = SimConfig { t_max: 10.0, sample_stride: 1, ..SimConfig::default() };
    let psi0 = setup.initial_state(&n1).unwrap();
    let tr = integrate(&psi0, setup.hamiltonian(), &GammaPolicy::constant(0.0).unwrap(), &sim).unwrap();
    let min_p = tr.samples.iter().map(|s| s.purity).fold(1.0, f64::min);
    assert!(min_p < 0.9, "purity should drop under V_d alone, min {min_p}");
}

#[test]
fn precession_rate_matches_finite_difference() {
    let (n1, u) = dipolar_cases()[3];
    let setup = dipolar(u, 1.0);
    let psi0 = setup.initial_state(&n1).unwrap();
    let (w1, w2) = short_time_precession_rates(&psi0, &u, 1.0).unwrap();
    // ⟨S₂·û_d⟩ = S₂ n̂₂·û_d, ⟨S₁·û_d⟩ = ½ n̂₁·û_d
    assert!((w1 - 10.5 * UnitVector3::z_axis().neg().dot(&u)).abs() < 1e-12);
    assert!((w2 - 0.5 * n1.dot(&u)).abs() < 1e-12);

    let dt = 1e-3;
    let sim = SimConfig { t_max: dt, dt_initial: 1e-5, rel_tol: 1e-12, abs_tol: 1e-14, ..SimConfig::default() };
    let tr = integrate(&psi0, setup.hamiltonian(), &GammaPolicy::constant(0.0).unwrap(), &sim).unwrap();
    let k0 = tr.samples[0].k;
    let k1 = tr.last().k;
    let fd: Vec<f64> = (0..3).map(|i| 0.5 * (k1[i] - k0[i]) / dt).collect();
    let s1 = [0.5 * k0[0], 0.5 * k0[1], 0.5 * k0[2]];
    let pred = [
        w1 * (u.y * s1[2] - u.z * s1[1]),
        w1 * (u.z * s1[0] - u.x * s1[2]),
        w1 * (u.x * s1[1] - u.y * s1[0]),
    ];
    let err = (0..3).map(|i| (fd[i] - pred[i]).powi(2)).sum::<f64>().sqrt();
    let scale = pred.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(err < 0.01 * scale, "fd {fd:?} pred {pred:?}");
}

#[test]
fn precession_rate_edge_cases() {
    let s2 = SpinQuantumNumber::from_twice(21).unwrap();
    let u = UnitVector3::x_axis();
    let a = coherent_state(SpinQuantumNumber::half(), &UnitVector3::z_axis());
    let perp = product_state(&a, &coherent_state(s2, &UnitVector3::z_axis())).unwrap();
    assert!(short_time_precession_rates(&perp, &u, 2.0).unwrap().0.abs() < 1e-12);
    let par = product_state(&a, &coherent_state(s2, &u)).unwrap();
    assert!((short_time_precession_rates(&par, &u, 2.0).unwrap().0 - 21.0).abs() < 1e-12);
}

#[test]
fn norm_conserved_without_renormalization() {
    let sim = SimConfig { t_max: 20.0, rel_tol: 1e-10, abs_tol: 1e-12, renorm_each_step: false, ..SimConfig::default() };
    for (n1, u) in dipolar_cases() {
        let tr = dipolar(u, 1.0).run(&n1, &sim).unwrap();
        let worst = tr.samples.iter().map(|s| s.norm_error).fold(0.0, f64::max);
        assert!(worst < 1e-7, "norm drift {worst}");
    }
}

#[test]
fn renormalization_keeps_unit_norm() {
    let (n1, u) = dipolar_cases()[0];
    let tr = dipolar(u, 1.0).run(&n1, &SimConfig { t_max: 5.0, ..SimConfig::default() }).unwrap();
    assert!(tr.samples.iter().all(|s| s.norm_error < 1e-14));
}

#[test]
fn dipolar_cases_collapse_onto_measurement_axis() {
    let sim = SimConfig::default();
    for (n1, u) in dipolar_cases() {
        let tr = dipolar(u, 1.0).run(&n1, &sim).unwrap();
        let last = tr.last();
        let proj = dot(&last.k, &u);
        assert!(last.purity > 0.99);
        assert!(proj.abs() > 0.99);
        assert_eq!(proj.signum(), n1.dot(&u).signum());
        assert!(tr.samples.len() <= 2000);
    }
}

#[test]
fn product_state_unaffected_by_disentanglement() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (n1, n2) = (2, 5);
    let h1 = random_hermitian(n1, &mut rng);
    let h2 = random_hermitian(n2, &mut rng);
    let h = h1.kronecker(&DMatrix::identity(n2, n2)) + DMatrix::identity(n1, n1).kronecker(&h2);
    let a = PureState::random(BipartiteShape::new(1, n1).unwrap(), &mut rng);
    let b = PureState::random(BipartiteShape::new(1, n2).unwrap(), &mut rng);
    let psi0 = product_state(a.amplitudes(), b.amplitudes()).unwrap();
    let sim = SimConfig { t_max: 4.0, sample_stride: 1, rel_tol: 1e-12, abs_tol: 1e-14, ..SimConfig::default() };
    let with = integrate(&psi0, &h, &GammaPolicy::constant(5.0).unwrap(), &sim).unwrap();
    let without = integrate(&psi0, &h, &GammaPolicy::constant(0.0).unwrap(), &sim).unwrap();
    assert!(with.samples.iter().all(|s| s.purity >= 1.0 - 1e-8));
    assert!(fidelity(with.final_state.amplitudes(), without.final_state.amplitudes()) > 1.0 - 1e-10);
}

#[test]
fn bell_state_is_stationary_without_hamiltonian() {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let bell = state_from(2, 2, &[(r, 0.0), (0.0, 0.0), (0.0, 0.0), (r, 0.0)]);
    assert!(nlse_rhs(&bell, &zeros(4), 1.0).unwrap().iter().all(|z| z.norm() < 1e-15));
    let tr = integrate(&bell, &zeros(4), &GammaPolicy::constant(1.0).unwrap(), &SimConfig::default()).unwrap();
    assert!((tr.last().purity - 0.5).abs() < 1e-12);
}

#[test]
fn rhs_in_schmidt_basis_is_the_coefficient_flow() {
    let q = [0.8f64, 0.5, 0.2];
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let q: Vec<f64> = q.iter().map(|x| x / n).collect();
    let l4: f64 = q.iter().map(|x| x.powi(4)).sum();
    let mut raw = vec![(0.0, 0.0); 9];
    for (l, &x) in q.iter().enumerate() {
        raw[l * 3 + l] = (x, 0.0);
    }
    let psi = state_from(3, 3, &raw);
    let gamma = 1.3;
    let d = nlse_rhs(&psi, &zeros(9), gamma).unwrap();
    for (l, &x) in q.iter().enumerate() {
        assert!((d[(l, l)] - c(gamma * x * (x * x - l4), 0.0)).norm() < 1e-15);
    }
}

#[test]
fn gamma_from_coupling_is_norm_of_v_psi() {
    let (n1, u) = dipolar_cases()[3];
    let setup = dipolar(u, 1.0);
    let psi = setup.initial_state(&n1).unwrap();
    let v = setup.hamiltonian();
    let vx = v * DVector::from_column_slice(psi.amplitudes());
    let g = gamma_from_coupling(&psi, v).unwrap();
    assert!((g - vx.norm()).abs() < 1e-12);
    assert!(gamma_from_coupling(&psi, &zeros(3)).is_err());
}

#[test]
fn coupling_driven_policy_collapses() {
    let (n1, u) = dipolar_cases()[1];
    let s2 = SpinQuantumNumber::from_twice(21).unwrap();
    let setup =
        DipolarSetup::new(s2, 1.0, GammaMode::CouplingDriven, 0.0, u, UnitVector3::z_axis().neg()).unwrap();
    let tr = setup.run(&n1, &SimConfig::default()).unwrap();
    let last = tr.last();
    assert!(last.purity > 0.99);
    assert!(dot(&last.k, &u) < -0.99);
}

#[test]
fn zero_horizon_returns_initial_sample() {
    let (n1, u) = dipolar_cases()[3];
    let setup = dipolar(u, 1.0);
    let sim = SimConfig { t_max: 0.0, ..SimConfig::default() };
    let tr = setup.run(&n1, &sim).unwrap();
    assert_eq!(tr.samples.len(), 1);
    assert_eq!(tr.samples[0].t, 0.0);
    assert_eq!(tr.final_state, setup.initial_state(&n1).unwrap());
}

#[test]
fn invalid_configurations() {
    let psi = state_from(2, 2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
    let ok = GammaPolicy::constant(1.0).unwrap();
    let bad = |sim: SimConfig| matches!(integrate(&psi, &zeros(4), &ok, &sim), Err(Error::InvalidArgument(_)));
    assert!(bad(SimConfig { rel_tol: 0.0, ..SimConfig::default() }));
    assert!(bad(SimConfig { rel_tol: 0.1, ..SimConfig::default() }));
    assert!(bad(SimConfig { t_max: -1.0, ..SimConfig::default() }));
    assert!(bad(SimConfig { sample_stride: 0, ..SimConfig::default() }));
    assert!(bad(SimConfig { dt_initial: 50.0, ..SimConfig::default() }));
    assert!(GammaPolicy::constant(-1.0).is_err());
    assert!(integrate(&psi, &zeros(3), &ok, &SimConfig::default()).is_err());
    let unnorm = PureState::unnormalized(psi.shape(), vec![c(2.0, 0.0); 4]).unwrap();
    assert!(integrate(&unnorm, &zeros(4), &ok, &SimConfig::default()).is_err());
}

#[test]
fn repeated_runs_are_identical() {
    let (n1, u) = dipolar_cases()[2];
    let setup = dipolar(u, 1.0);
    let sim = SimConfig { t_max: 5.0, ..SimConfig::default() };
    let a = setup.run(&n1, &sim).unwrap();
    let b = setup.run(&n1, &sim).unwrap();
    assert_eq!(a.samples, b.samples);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn purity_non_decreasing_without_hamiltonian(psi in arb_state()) {
        let d = psi.shape().dim();
        let sim = SimConfig { t_max: 5.0, sample_stride: 1, ..SimConfig::default() };
        let tr = integrate(&psi, &zeros(d), &GammaPolicy::constant(1.0).unwrap(), &sim).unwrap();
        for w in tr.samples.windows(2) {
            prop_assert!(w[1].purity >= w[0].purity - 1e-9);
        }
        prop_assert!((tr.samples[0].purity - purity(&psi).unwrap()).abs() < 1e-12);
    }
}
