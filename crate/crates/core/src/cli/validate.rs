//! The property suite behind `sim validate`.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, OutputFormat};
use super::output::{Cell, Table};
use crate::dynamics::{integrate, GammaPolicy, SimConfig};
use crate::flow::{flow_rhs, integrate_flow, moment_rhs, moments_of, potential_at, potential_gradient, FlowOptions, FlowState};
use crate::measurement::{
    basin_map, p_plus, p_plus_hemisphere, p_plus_monte_carlo, theta_grid, DipolarSetup, GammaMode, SphereGrid,
    WrappedCauchy,
};
use crate::measurement::noise::sphere_normalization;
use crate::spin::{bloch_vector, coherent_state, dipolar_hamiltonian, spin_matrices, SpinQuantumNumber, UnitVector3};
use crate::state::{apply_q, dense_q_operator, product_state, purity, BipartiteShape, PureState};
use crate::{Complex64, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyResult {
    pub module: &'static str,
    pub name: &'static str,
    /// Worst observed violation, in the units of `threshold`.
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub results: Vec<PropertyResult>,
}

impl ValidationReport {
    pub fn failed(&self) -> Vec<&PropertyResult> {
        self.results.iter().filter(|r| !r.passed).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn to_value(&self) -> Value {
        let props: Vec<Value> = self
            .results
            .iter()
            .map(|r| {
                json!({
                    "module": r.module,
                    "name": r.name,
                    "passed": r.passed,
                    "residual": r.residual,
                    "threshold": r.threshold,
                    "seconds": r.seconds,
                })
            })
            .collect();
        json!({ "passed": self.all_passed(), "properties": props })
    }
}

struct Suite {
    results: Vec<PropertyResult>,
}

impl Suite {
    /// Runs `check`, which returns the worst residual; NaN and errors fail.
    fn check<F: FnOnce() -> Result<f64>>(&mut self, module: &'static str, name: &'static str, threshold: f64, check: F) {
        let start = Instant::now();
        let residual = check().unwrap_or(f64::INFINITY);
        let passed = residual <= threshold;
        self.results.push(PropertyResult {
            module,
            name,
            residual: if residual.is_nan() { f64::INFINITY } else { residual },
            threshold,
            passed,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    a.qr().q()
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let a = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    (&a + a.adjoint()) * Complex64::from(0.5)
}

fn random_direction(rng: &mut ChaCha8Rng) -> UnitVector3 {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        if let Ok(u) = UnitVector3::normalize(v) {
            return u;
        }
    }
}

fn random_spectrum(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut q: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.05).collect();
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= n);
    q
}

fn row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.transpose().as_slice().to_vec()
}

fn q_expectation_via_apply(psi: &PureState) -> Complex64 {
    let q = row_major(&apply_q(psi));
    psi.amplitudes().iter().zip(&q).map(|(a, b)| a.conj() * b).sum()
}

/// `(n̂₁, û_d)` for the four dipolar cases with `n̂₂ = −ẑ`.
fn dipolar_cases() -> [(UnitVector3, UnitVector3); 4] {
    let x = UnitVector3::x_axis();
    [
        (UnitVector3::from_angles(0.55 * PI, 0.45 * PI), x),
        (UnitVector3::from_angles(0.55 * PI, 0.55 * PI), x),
        (UnitVector3::from_angles(0.55 * PI, 0.75 * PI), x),
        (UnitVector3::from_angles(0.5 * PI, 0.5 * PI), UnitVector3::from_angles(3.0 * PI / 8.0, 3.0 * PI / 4.0)),
    ]
}

fn dipolar(u_d: UnitVector3, gamma: f64) -> Result<DipolarSetup> {
    let mode = GammaMode::Constant;
    DipolarSetup::new(SpinQuantumNumber::from_twice(21)?, 1.0, mode, gamma, u_d, UnitVector3::z_axis().neg())
}

const SHAPES: [(usize, usize); 3] = [(2, 2), (3, 4), (6, 8)];
const RESOLVED_COEFFICIENT: f64 = 1e-8;

pub fn run_suite(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    let seed = cfg.noise.seed;
    let rng = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    };
    let mut s = Suite { results: Vec::new() };

    // state
    s.check("state", "one_minus_purity_equals_q_expectation", 1e-10, || {
        let mut r = rng(1);
        let mut worst: f64 = 0.0;
        for (n1, n2) in SHAPES {
            for _ in 0..200 {
                let psi = PureState::random(BipartiteShape::new(n1, n2)?, &mut r);
                worst = worst.max((1.0 - purity(&psi)? - q_expectation_via_apply(&psi).re).abs());
            }
        }
        Ok(worst)
    });
    s.check("state", "q_expectation_is_real", 1e-12, || {
        let mut r = rng(2);
        let mut worst: f64 = 0.0;
        for (n1, n2) in SHAPES {
            for _ in 0..200 {
                let psi = PureState::random(BipartiteShape::new(n1, n2)?, &mut r);
                worst = worst.max(q_expectation_via_apply(&psi).im.abs());
            }
        }
        Ok(worst)
    });
    s.check("state", "purity_invariant_under_local_unitaries", 1e-10, || {
        let mut r = rng(3);
        let mut worst: f64 = 0.0;
        for (n1, n2) in SHAPES {
            for _ in 0..50 {
                let psi = PureState::random(BipartiteShape::new(n1, n2)?, &mut r);
                let (u1, u2) = (random_unitary(n1, &mut r), random_unitary(n2, &mut r));
                let rotated = PureState::from_matrix(&(u1.transpose() * psi.matrix() * u2))?;
                worst = worst.max((purity(&rotated)? - purity(&psi)?).abs());
            }
        }
        Ok(worst)
    });
    s.check("state", "reduced_purities_agree", 1e-10, || {
        let mut r = rng(4);
        let mut worst: f64 = 0.0;
        for (n1, n2) in SHAPES {
            for _ in 0..50 {
                let c = PureState::random(BipartiteShape::new(n1, n2)?, &mut r).matrix();
                let rho1 = &c * c.adjoint();
                let rho2 = c.adjoint() * &c;
                worst = worst.max(((&rho1 * &rho1).trace() - (&rho2 * &rho2).trace()).norm());
            }
        }
        Ok(worst)
    });
    s.check("state", "two_qubit_q_expectation_bound", 1e-12, || {
        let mut r = rng(5);
        let shape = BipartiteShape::new(2, 2)?;
        let mut max_q: f64 = 0.0;
        for _ in 0..10_000 {
            max_q = max_q.max(q_expectation_via_apply(&PureState::random(shape, &mut r)).re);
        }
        Ok((max_q - 0.5).max(0.0))
    });
    s.check("state", "dense_q_hermitian_and_matches_apply_q", 1e-12, || {
        let mut r = rng(6);
        let mut worst: f64 = 0.0;
        for (n1, n2) in SHAPES {
            for _ in 0..10 {
                let psi = PureState::random(BipartiteShape::new(n1, n2)?, &mut r);
                let dense = dense_q_operator(&psi);
                let herm = (&dense - dense.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                let x = nalgebra::DVector::from_column_slice(psi.amplitudes());
                let via_dense = &dense * x;
                let via_apply = row_major(&apply_q(&psi));
                let diff = via_dense.iter().zip(&via_apply).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                worst = worst.max(herm).max(diff);
            }
        }
        Ok(worst)
    });

    // spin
    s.check("spin", "commutators_and_casimir", 1e-10, || {
        let mut worst: f64 = 0.0;
        let i = Complex64::i();
        for two_s in 1..=21 {
            let sp = SpinQuantumNumber::from_twice(two_s)?;
            let ops = spin_matrices(sp);
            let (x, y, z) = (&ops.sx, &ops.sy, &ops.sz);
            let comm = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| a * b - b * a;
            let casimir = x * x + y * y + z * z;
            let id = DMatrix::<Complex64>::identity(sp.dim(), sp.dim());
            let s = sp.value();
            for m in [
                comm(x, y) - z * i,
                comm(y, z) - x * i,
                comm(z, x) - y * i,
                casimir - id * Complex64::from(s * (s + 1.0)),
            ] {
                worst = worst.max(m.iter().map(|e| e.norm()).fold(0.0, f64::max));
            }
        }
        Ok(worst)
    });
    s.check("spin", "coherent_state_eigen_residual", 1e-10, || {
        let mut r = rng(7);
        let mut worst: f64 = 0.0;
        for two_s in 1..=21 {
            let sp = SpinQuantumNumber::from_twice(two_s)?;
            let ops = spin_matrices(sp);
            for _ in 0..5 {
                let n = random_direction(&mut r);
                let chi = nalgebra::DVector::from_vec(coherent_state(sp, &n));
                let res = ops.along(&n) * &chi - &chi * Complex64::from(sp.value());
                worst = worst.max(res.norm());
            }
        }
        Ok(worst)
    });
    s.check("spin", "bloch_vector_unit_on_product_states", 1e-8, || {
        let mut r = rng(8);
        let mut worst: f64 = 0.0;
        for two_s2 in [1, 2, 5, 21] {
            let s2 = SpinQuantumNumber::from_twice(two_s2)?;
            for _ in 0..10 {
                let a = coherent_state(SpinQuantumNumber::half(), &random_direction(&mut r));
                let b = coherent_state(s2, &random_direction(&mut r));
                let psi = product_state(&a, &b)?;
                let k = bloch_vector(&psi, SpinQuantumNumber::half())?;
                let len = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                worst = worst.max((len - 1.0).abs()).max((purity(&psi)? - 1.0).abs());
            }
        }
        Ok(worst)
    });
    s.check("spin", "dipolar_spectrum_independent_of_axis", 1e-9, || {
        let mut r = rng(9);
        let (s1, s2) = (SpinQuantumNumber::half(), SpinQuantumNumber::from_twice(21)?);
        let spectrum = |u: &UnitVector3| -> Result<Vec<f64>> {
            let h = dipolar_hamiltonian(s1, s2, 1.0, u)?.matrix;
            let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            Ok(ev)
        };
        let reference = spectrum(&UnitVector3::z_axis())?;
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let ev = spectrum(&random_direction(&mut r))?;
            worst = worst.max(ev.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        Ok(worst)
    });

    // dynamics
    s.check("dynamics", "norm_conservation_without_renormalization", 1e-7, || {
        let sim = SimConfig { t_max: 20.0, rel_tol: 1e-10, abs_tol: 1e-12, renorm_each_step: false, ..SimConfig::default() };
        let worst = dipolar_cases()
            .par_iter()
            .map(|(n1, u)| {
                let tr = dipolar(*u, 1.0)?.run(n1, &sim)?;
                Ok(tr.samples.iter().map(|s| s.norm_error).fold(0.0, f64::max))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(worst.into_iter().fold(0.0, f64::max))
    });
    s.check("dynamics", "purity_non_decreasing_without_hamiltonian", 1e-9, || {
        let mut r = rng(10);
        let sim = SimConfig { t_max: 10.0, sample_stride: 1, ..SimConfig::default() };
        let mut worst: f64 = 0.0;
        for (n1, n2) in SHAPES {
            for _ in 0..3 {
                let psi = PureState::random(BipartiteShape::new(n1, n2)?, &mut r);
                let h = DMatrix::zeros(n1 * n2, n1 * n2);
                let tr = integrate(&psi, &h, &GammaPolicy::constant(1.0)?, &sim)?;
                let drop = tr.samples.windows(2).map(|w| w[0].purity - w[1].purity).fold(0.0, f64::max);
                worst = worst.max(drop);
            }
        }
        Ok(worst)
    });
    s.check("dynamics", "unitary_evolution_when_gamma_is_zero", 1e-8, || {
        let t = 5.0;
        let (n1, u) = dipolar_cases()[3];
        let setup = dipolar(u, 1.0)?;
        let psi0 = setup.initial_state(&n1)?;
        let h = setup.hamiltonian().clone();
        let sim = SimConfig { t_max: t, ..SimConfig::default() };
        let tr = integrate(&psi0, &h, &GammaPolicy::constant(0.0)?, &sim)?;
        let eig = SymmetricEigen::new(h);
        let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t)));
        let u_t = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
        let exact = u_t * nalgebra::DVector::from_column_slice(psi0.amplitudes());
        let got = nalgebra::DVector::from_column_slice(tr.final_state.amplitudes());
        Ok(1.0 - exact.dotc(&got).norm_sqr())
    });
    s.check("dynamics", "product_states_stay_product", 1e-8, || {
        let mut r = rng(11);
        let mut worst: f64 = 0.0;
        for (n1, n2) in [(2, 3), (3, 4)] {
            let h1 = random_hermitian(n1, &mut r);
            let h2 = random_hermitian(n2, &mut r);
            let h = h1.kronecker(&DMatrix::identity(n2, n2)) + DMatrix::identity(n1, n1).kronecker(&h2);
            let a = PureState::random(BipartiteShape::new(n1, 1)?, &mut r);
            let b = PureState::random(BipartiteShape::new(1, n2)?, &mut r);
            let psi = product_state(a.amplitudes(), b.amplitudes())?;
            let sim = SimConfig { t_max: 5.0, sample_stride: 1, ..SimConfig::default() };
            let tr = integrate(&psi, &h, &GammaPolicy::constant(2.0)?, &sim)?;
            worst = worst.max(tr.samples.iter().map(|s| 1.0 - s.purity).fold(0.0, f64::max));
        }
        Ok(worst)
    });
    s.check("dynamics", "long_time_collapse", 0.0, || {
        let sim = SimConfig { sample_stride: usize::MAX, ..SimConfig::default() };
        let misses = dipolar_cases()[..3]
            .par_iter()
            .map(|(n1, u)| {
                let tr = dipolar(*u, 1.0)?.run(n1, &sim)?;
                let last = tr.last();
                let proj = last.k[0] * u.x + last.k[1] * u.y + last.k[2] * u.z;
                let ok = last.purity > 0.99 && proj.abs() > 0.99 && proj.signum() == n1.dot(u).signum();
                Ok(if ok { 0.0 } else { 1.0 })
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(misses.into_iter().sum())
    });

    // schmidt flow
    let flow_runs = || -> Result<Vec<crate::flow::FlowTrajectory>> {
        let mut r = rng(12);
        let mut starts = vec![FlowState::perturbed_uniform(10, 0, 1e-3, 1.0)?];
        for m in [2, 4, 10] {
            for _ in 0..3 {
                starts.push(FlowState::new(random_spectrum(m, &mut r), 1.0)?);
            }
        }
        starts.iter().map(|st| integrate_flow(st, 40.0, &FlowOptions::default())).collect()
    };
    let flows = flow_runs();
    let with_flows = |f: &dyn Fn(&[crate::flow::FlowTrajectory]) -> f64| -> Result<f64> {
        match &flows {
            Ok(v) => Ok(f(v)),
            Err(e) => Err(crate::Error::Computation(e.to_string())),
        }
    };
    s.check("flow", "coefficient_ratios_non_decreasing", 1e-12, || {
        with_flows(&|trs| {
            let mut worst: f64 = 0.0;
            for tr in trs {
                let q0 = &tr.samples[0].q;
                for a in 0..q0.len() {
                    for b in 0..q0.len() {
                        if q0[a] > q0[b] && q0[b] > 0.0 {
                            // below ~1e6 × abs_tol a coefficient is integrator noise
                            for w in tr.samples.windows(2).filter(|w| w[1].q[b] > RESOLVED_COEFFICIENT) {
                                let (r0, r1) = (w[0].q[a] / w[0].q[b], w[1].q[a] / w[1].q[b]);
                                worst = worst.max((r0 - r1) / r0);
                            }
                        }
                    }
                }
            }
            worst
        })
    });
    s.check("flow", "purity_non_decreasing", 1e-12, || {
        with_flows(&|trs| {
            trs.iter()
                .flat_map(|tr| tr.samples.windows(2).map(|w| w[0].l4 - w[1].l4))
                .fold(0.0, f64::max)
        })
    });
    s.check("flow", "norm_invariant", 1e-8, || {
        with_flows(&|trs| {
            trs.iter()
                .flat_map(|tr| tr.samples.iter().map(|s| (s.q.iter().map(|x| x * x).sum::<f64>() - 1.0).abs()))
                .fold(0.0, f64::max)
        })
    });
    s.check("flow", "entropy_non_increasing", 1e-12, || {
        with_flows(&|trs| {
            trs.iter()
                .filter(|tr| tr.attractor.is_some())
                .flat_map(|tr| tr.samples.windows(2).map(|w| w[1].entropy - w[0].entropy))
                .fold(0.0, f64::max)
        })
    });
    s.check("flow", "moment_hierarchy", 1e-10, || {
        with_flows(&|trs| {
            let mut worst: f64 = 0.0;
            for tr in trs {
                for smp in &tr.samples {
                    let Ok(m) = moments_of(&smp.q, 6) else { return f64::INFINITY };
                    let d2 = moment_rhs(&m, 1.0, 2).unwrap_or(f64::INFINITY);
                    let d4 = moment_rhs(&m, 1.0, 4).unwrap_or(f64::NEG_INFINITY);
                    worst = worst.max(d2.abs()).max((-d4 - 1e-12).max(0.0));
                }
            }
            worst
        })
    });
    s.check("flow", "potential_gradient_matches_finite_differences", 1e-8, || {
        let mut r = rng(13);
        let mut worst: f64 = 0.0;
        for m in [2, 4, 10] {
            for _ in 0..5 {
                let q = random_spectrum(m, &mut r);
                let g = potential_gradient(&q, 1.0);
                for l in 0..m {
                    let h = 1e-5;
                    let (mut qp, mut qm) = (q.clone(), q.clone());
                    qp[l] += h;
                    qm[l] -= h;
                    let fd = (potential_at(&qp, 1.0) - potential_at(&qm, 1.0)) / (2.0 * h);
                    worst = worst.max((fd - g[l]).abs());
                }
            }
        }
        Ok(worst)
    });
    s.check("flow", "equilibria_are_flat_on_support", 1e-12, || {
        let mut worst: f64 = 0.0;
        for m in [2, 4, 10] {
            for support in 1..=m {
                let mut q = vec![0.0; m];
                for x in q.iter_mut().step_by(m / support).take(support) {
                    *x = 1.0;
                }
                let k = q.iter().filter(|&&x| x > 0.0).count() as f64;
                q.iter_mut().for_each(|x| *x /= k.sqrt());
                let st = FlowState::new(q, 1.0)?;
                worst = worst.max(flow_rhs(&st).iter().map(|x| x.abs()).fold(0.0, f64::max));
            }
            // an unequal spectrum is not an equilibrium
            let st = FlowState::new(random_spectrum(m, &mut rng(14)), 1.0)?;
            if flow_rhs(&st).iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-6 {
                worst = f64::INFINITY;
            }
        }
        Ok(worst)
    });

    // measurement
    let dist = WrappedCauchy::new(cfg.noise.phi0)?;
    let curve: Result<Vec<f64>> = theta_grid(181).par_iter().map(|&t| p_plus(t, &dist)).collect();
    s.check("measurement", "p_plus_non_increasing", 1e-6, || {
        Ok(curve.as_ref().map_err(|e| crate::Error::Computation(e.to_string()))?.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max))
    });
    s.check("measurement", "p_plus_complementarity", 1e-6, || {
        let p = curve.as_ref().map_err(|e| crate::Error::Computation(e.to_string()))?;
        let n = p.len();
        Ok((0..n).map(|i| (p[i] + p[n - 1 - i] - 1.0).abs()).fold(0.0, f64::max))
    });
    s.check("measurement", "p_plus_three_methods_agree", 1e-3, || {
        let mut worst: f64 = 0.0;
        for t in [0.1, 0.6, 1.2, PI / 2.0, 2.0, 2.7] {
            let a = p_plus(t, &dist)?;
            let b = p_plus_hemisphere(t, &dist)?;
            let c = p_plus_monte_carlo(t, &dist, 10_000_000, seed)?.p;
            worst = worst.max((a - b).abs()).max((a - c).abs()).max((b - c).abs());
        }
        Ok(worst)
    });
    s.check("measurement", "noise_density_normalized", 1e-8, || Ok((sphere_normalization(&dist) - 1.0).abs()));
    s.check("measurement", "basin_labels_stable_under_refinement", 0.0, || {
        let setup = dipolar(dipolar_cases()[3].1, 1.0)?;
        let sim = SimConfig::default();
        let coarse = SphereGrid::new(4, 8)?;
        let fine = SphereGrid::new(8, 16)?;
        let a = basin_map(&coarse, &setup, &sim, 0.01)?;
        let b = basin_map(&fine, &setup, &sim, 0.01)?;
        let off_boundary = |n: &UnitVector3| n.dot(&setup.u_d).abs() > 0.05;
        let mut changes = 0usize;
        for (p, la) in coarse.points.iter().zip(&a.labels) {
            for (q, lb) in fine.points.iter().zip(&b.labels) {
                // cell-centred lattices do not nest, so compare against the
                // refined points of the same cell on the same side of the circle
                let inside = q.i_theta / 2 == p.i_theta && q.i_phi / 2 == p.i_phi;
                let same_side = p.n.dot(&setup.u_d).signum() == q.n.dot(&setup.u_d).signum();
                if inside && same_side && off_boundary(&p.n) && off_boundary(&q.n) && la != lb {
                    changes += 1;
                }
            }
        }
        Ok(changes as f64)
    });

    // cli
    s.check("cli", "config_echo_round_trips", 0.0, || {
        let back = ExperimentConfig::from_value(cfg.to_value())?;
        Ok(if back == *cfg { 0.0 } else { 1.0 })
    });
    s.check("cli", "csv_reals_round_trip", 0.0, || {
        let mut r = rng(15);
        let dir = std::env::temp_dir().join(format!("sim-validate-{}-{seed}", std::process::id()));
        std::fs::create_dir_all(&dir).map_err(|e| crate::Error::Computation(e.to_string()))?;
        let values: Vec<f64> = (0..1000)
            .map(|_| {
                let m: f64 = r.sample(StandardNormal);
                m * 10f64.powi(r.random_range(-300..300))
            })
            .chain([PI, 0.1, -0.0, f64::MIN_POSITIVE, f64::MAX])
            .collect();
        let mut t = Table::new(["x"]);
        values.iter().for_each(|&x| t.push(vec![Cell::Real(x)]));
        let path = t.write(&dir, "roundtrip", OutputFormat::Csv)?;
        let first = std::fs::read(&path).map_err(|e| crate::Error::Computation(e.to_string()))?;
        t.write(&dir, "roundtrip", OutputFormat::Csv)?;
        let second = std::fs::read(&path).map_err(|e| crate::Error::Computation(e.to_string()))?;
        let _ = std::fs::remove_dir_all(&dir);
        let mut rd = csv::Reader::from_reader(first.as_slice());
        let mut bad = usize::from(first != second);
        for (rec, &x) in rd.records().zip(&values) {
            let parsed: f64 = rec.ok().and_then(|r| r[0].parse().ok()).unwrap_or(f64::NAN);
            if parsed.to_bits() != x.to_bits() {
                bad += 1;
            }
        }
        Ok(bad as f64)
    });

    Ok(ValidationReport { results: s.results })
}
