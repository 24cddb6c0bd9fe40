//! Time evolution under `dψ/dt = [−iH − γ(Q − ⟨Q⟩)] ψ`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ode::{DormandPrince, StepStats, Tolerances};
use crate::spin::{reduced_spin_expectation, spin_matrices, SpinOperators, SpinQuantumNumber, UnitVector3};
use crate::state::{apply_q_into, purity_of, PureState};
use crate::{Error, Result};

/// How the disentanglement rate γ is chosen.
#[derive(Clone, Debug)]
pub enum GammaPolicy {
    Constant(f64),
    /// `γ(t) = ⟨ψ|V†V|ψ⟩^{1/2}`, re-evaluated at every right-hand-side call.
    CouplingDriven(Arc<DMatrix<Complex64>>),
}

impl GammaPolicy {
    pub fn constant(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be non-negative, got {gamma}")));
        }
        Ok(Self::Constant(gamma))
    }

    pub fn coupling_driven(v: DMatrix<Complex64>) -> Self {
        Self::CouplingDriven(Arc::new(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub dt_initial: f64,
    pub t_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub renorm_each_step: bool,
    pub sample_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_initial: 1e-3,
            t_max: 30.0,
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            renorm_each_step: true,
            sample_stride: 4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let tol_ok = |x: f64| x > 0.0 && x <= 1e-2;
        if !tol_ok(self.rel_tol) || !tol_ok(self.abs_tol) {
            return Err(Error::invalid("tolerances must lie in (0, 1e-2]"));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::invalid(format!("t_max must be non-negative, got {}", self.t_max)));
        }
        if !(self.dt_initial > 0.0) {
            return Err(Error::invalid("dt_initial must be positive"));
        }
        if self.t_max > 0.0 && self.dt_initial >= self.t_max {
            return Err(Error::invalid("dt_initial must be smaller than t_max"));
        }
        if self.sample_stride == 0 {
            return Err(Error::invalid("sample_stride must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    /// Bloch vector of subsystem 1 (zero when subsystem 1 is one-dimensional).
    pub k: [f64; 3],
    pub purity: f64,
    pub q_expectation: f64,
    /// `|‖ψ‖ − 1|`.
    pub norm_error: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub final_state: PureState,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }
}

fn check_square(h: &DMatrix<Complex64>, dim: usize, what: &str) -> Result<()> {
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::invalid(format!(
            "{what} is {}x{} but the state has dimension {dim}",
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

/// Dense operator in row-major layout for fast matrix-vector products.
#[derive(Clone)]
struct RowMajor {
    dim: usize,
    data: Vec<Complex64>,
}

impl RowMajor {
    fn new(m: &DMatrix<Complex64>) -> Option<Self> {
        if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return None;
        }
        let dim = m.nrows();
        let data = (0..dim).flat_map(|i| (0..dim).map(move |j| m[(i, j)])).collect();
        Some(Self { dim, data })
    }

    #[inline]
    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o = acc;
        }
    }
}

enum Gamma {
    Constant(f64),
    Coupling(Option<RowMajor>),
}

/// Right-hand side of the modified equation with scratch buffers.
struct NlseSystem {
    n1: usize,
    n2: usize,
    h: Option<RowMajor>,
    gamma: Gamma,
    qbuf: Vec<Complex64>,
    vbuf: Vec<Complex64>,
}

impl NlseSystem {
    fn new(n1: usize, n2: usize, h: &DMatrix<Complex64>, policy: &GammaPolicy) -> Result<Self> {
        let dim = n1 * n2;
        check_square(h, dim, "Hamiltonian")?;
        let gamma = match policy {
            GammaPolicy::Constant(g) => {
                if !(*g >= 0.0) {
                    return Err(Error::invalid("gamma must be non-negative"));
                }
                Gamma::Constant(*g)
            }
            GammaPolicy::CouplingDriven(v) => {
                check_square(v, dim, "coupling operator")?;
                Gamma::Coupling(RowMajor::new(v))
            }
        };
        Ok(Self {
            n1,
            n2,
            h: RowMajor::new(h),
            gamma,
            qbuf: vec![Complex64::new(0.0, 0.0); dim],
            vbuf: vec![Complex64::new(0.0, 0.0); dim],
        })
    }

    fn gamma(&mut self, y: &[Complex64], norm_sqr: f64) -> f64 {
        match &self.gamma {
            Gamma::Constant(g) => *g,
            Gamma::Coupling(None) => 0.0,
            Gamma::Coupling(Some(v)) => {
                v.apply(y, &mut self.vbuf);
                let vv: f64 = self.vbuf.iter().map(|z| z.norm_sqr()).sum();
                (vv / norm_sqr).sqrt()
            }
        }
    }

    fn eval(&mut self, y: &[Complex64], dy: &mut [Complex64]) {
        let norm_sqr: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        match &self.h {
            Some(h) => {
                h.apply(y, dy);
                dy.iter_mut().for_each(|z| *z = Complex64::new(z.im, -z.re));
            }
            None => dy.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0)),
        }
        let gamma = self.gamma(y, norm_sqr);
        if gamma == 0.0 {
            return;
        }
        apply_q_into(y, self.n1, self.n2, &mut self.qbuf);
        // ⟨Q⟩ taken on the normalized state
        let q_exp: f64 = y
            .iter()
            .zip(&self.qbuf)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            / norm_sqr;
        for ((d, q), a) in dy.iter_mut().zip(&self.qbuf).zip(y) {
            *d -= (q - a * q_exp) * gamma;
        }
    }
}

/// `dψ/dt = −iHψ − γ(Qψ − ⟨Q⟩ψ)` as an `N₁ × N₂` matrix.
pub fn nlse_rhs(psi: &PureState, h: &DMatrix<Complex64>, gamma: f64) -> Result<DMatrix<Complex64>> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid("gamma must be non-negative"));
    }
    let s = psi.shape();
    let mut sys = NlseSystem::new(s.n1(), s.n2(), h, &GammaPolicy::Constant(gamma))?;
    let mut out = vec![Complex64::new(0.0, 0.0); s.dim()];
    sys.eval(psi.amplitudes(), &mut out);
    Ok(DMatrix::from_row_slice(s.n1(), s.n2(), &out))
}

/// `⟨ψ|V†V|ψ⟩^{1/2}`.
pub fn gamma_from_coupling(psi: &PureState, v: &DMatrix<Complex64>) -> Result<f64> {
    check_square(v, psi.shape().dim(), "coupling operator")?;
    let x = nalgebra::DVector::from_column_slice(psi.amplitudes());
    Ok((v * x).norm())
}

/// Incremental integrator; [`integrate`] is a thin wrapper around it.
pub struct NlseIntegrator {
    shape: crate::state::BipartiteShape,
    system: NlseSystem,
    stepper: DormandPrince<Complex64>,
    renorm: bool,
    spin1: Option<SpinOperators>,
}

impl NlseIntegrator {
    pub fn new(
        psi0: &PureState,
        h: &DMatrix<Complex64>,
        policy: &GammaPolicy,
        config: &SimConfig,
    ) -> Result<Self> {
        config.validate()?;
        let shape = psi0.shape();
        if psi0.norm_error() > crate::state::NORM_TOLERANCE {
            return Err(Error::invalid("initial state is not normalized"));
        }
        let system = NlseSystem::new(shape.n1(), shape.n2(), h, policy)?;
        let tol = Tolerances { rel: config.rel_tol, abs: config.abs_tol };
        let h_min = 1e-12 * config.t_max.max(config.dt_initial);
        let stepper = DormandPrince::new(psi0.amplitudes().to_vec(), 0.0, config.dt_initial, h_min, tol);
        let spin1 = SpinQuantumNumber::for_dim(shape.n1()).ok().map(spin_matrices);
        Ok(Self { shape, system, stepper, renorm: config.renorm_each_step, spin1 })
    }

    pub fn t(&self) -> f64 {
        self.stepper.t()
    }

    pub fn stats(&self) -> StepStats {
        self.stepper.stats()
    }

    pub fn state(&self) -> PureState {
        PureState::unnormalized(self.shape, self.stepper.state().to_vec())
            .expect("integrator keeps the state shape")
    }

    /// Observables of the current state.
    pub fn sample(&self) -> TrajectorySample {
        self.sample_of(self.stepper.t(), self.stepper.state())
    }

    fn sample_of(&self, t: f64, y: &[Complex64]) -> TrajectorySample {
        observe(t, y, self.shape.n1(), self.shape.n2(), self.spin1.as_ref())
    }

    /// Advances to `t_end`, calling `on_step` after every accepted step.
    pub fn advance_to<O>(&mut self, t_end: f64, mut on_step: O) -> Result<()>
    where
        O: FnMut(&TrajectorySample),
    {
        let renorm = self.renorm;
        let (n1, n2) = (self.shape.n1(), self.shape.n2());
        let spin1 = self.spin1.as_ref();
        let system = &mut self.system;
        self.stepper
            .advance_to(
                t_end,
                |_, y, dy| system.eval(y, dy),
                |y| {
                    if renorm {
                        let n = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        y.iter_mut().for_each(|z| *z /= n);
                    }
                    renorm
                },
                |t, y| on_step(&observe(t, y, n1, n2, spin1)),
            )
            .map_err(|e| Error::Stiffness { t: e.t, step: e.step, partial: None })
    }
}

fn observe(t: f64, y: &[Complex64], n1: usize, n2: usize, spin1: Option<&SpinOperators>) -> TrajectorySample {
    let norm_sqr: f64 = y.iter().map(|z| z.norm_sqr()).sum();
    let purity = purity_of(y, n1, n2);
    let k = spin1.map_or([0.0; 3], |ops| reduced_spin_expectation(y, n1, n2, ops));
    TrajectorySample {
        t,
        k,
        purity,
        q_expectation: 1.0 - purity,
        norm_error: (norm_sqr.sqrt() - 1.0).abs(),
    }
}

/// Integrates from `t = 0` to `config.t_max`, recording the initial state,
/// every `sample_stride`-th accepted step and the final state.
pub fn integrate(
    psi0: &PureState,
    h: &DMatrix<Complex64>,
    policy: &GammaPolicy,
    config: &SimConfig,
) -> Result<Trajectory> {
    let mut integ = NlseIntegrator::new(psi0, h, policy, config)?;
    let mut samples = vec![integ.sample()];
    let mut step = 0usize;
    let mut pending: Option<TrajectorySample> = None;
    let stride = config.sample_stride;
    let res = integ.advance_to(config.t_max, |s| {
        step += 1;
        if step % stride == 0 {
            samples.push(*s);
            pending = None;
        } else {
            pending = Some(*s);
        }
    });
    if let Some(s) = pending {
        samples.push(s);
    }
    let traj = Trajectory { samples, final_state: integ.state(), stats: integ.stats() };
    match res {
        Ok(()) => Ok(traj),
        Err(Error::Stiffness { t, step, .. }) => {
            Err(Error::Stiffness { t, step, partial: Some(Box::new(traj)) })
        }
        Err(e) => Err(e),
    }
}

/// Short-time estimate `P ≈ 1 − (2^{−3/2} S₂ |n̂₁×û_d| (n̂₂·û_d) ω_d t)²`.
///
/// Only meaningful when `n̂₂·û_d ≠ 0`; for a perpendicular apparatus spin the
/// expression is identically 1.
pub fn short_time_purity(
    n1: &UnitVector3,
    n2: &UnitVector3,
    u_d: &UnitVector3,
    s2: SpinQuantumNumber,
    omega_d: f64,
    t: f64,
) -> f64 {
    let c = n1.cross(u_d);
    let cross = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let x = 2f64.powf(-1.5) * s2.value() * cross * n2.dot(u_d) * omega_d * t;
    1.0 - x * x
}

/// Precession rates `(ω₁, ω₂) = (ω_d⟨S₂·û_d⟩, ω_d⟨S₁·û_d⟩)` of the two spins
/// about `û_d`, neglecting the disentanglement term. The spins are inferred
/// from the subsystem dimensions.
pub fn short_time_precession_rates(psi: &PureState, u_d: &UnitVector3, omega_d: f64) -> Result<(f64, f64)> {
    let shape = psi.shape();
    let s1 = SpinQuantumNumber::for_dim(shape.n1())?;
    let s2 = SpinQuantumNumber::for_dim(shape.n2())?;
    let a = spin_matrices(s1).along(u_d);
    let b = spin_matrices(s2).along(u_d);
    let id1 = DMatrix::<Complex64>::identity(s1.dim(), s1.dim());
    let id2 = DMatrix::<Complex64>::identity(s2.dim(), s2.dim());
    let x = nalgebra::DVector::from_column_slice(psi.amplitudes());
    let expect = |op: DMatrix<Complex64>| x.dotc(&(op * &x)).re;
    let s1_u = expect(a.kronecker(&id2));
    let s2_u = expect(id1.kronecker(&b));
    Ok((omega_d * s2_u, omega_d * s1_u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{product_state, BipartiteShape};

    fn zero(dim: usize) -> DMatrix<Complex64> {
        DMatrix::zeros(dim, dim)
    }

    #[test]
    fn rhs_vanishes_on_product_state_without_hamiltonian() {
        let a = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let b = [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        let psi = product_state(&a, &b).unwrap();
        let d = nlse_rhs(&psi, &zero(6), 3.0).unwrap();
        assert!(d.norm() < 1e-15);
    }

    #[test]
    fn bell_state_is_stationary() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let z = Complex64::from(0.0);
        let psi = PureState::from_amplitudes(
            BipartiteShape::new(2, 2).unwrap(),
            vec![Complex64::from(h), z, z, Complex64::from(h)],
        )
        .unwrap();
        let d = nlse_rhs(&psi, &zero(4), 1.0).unwrap();
        assert!(d.norm() < 1e-15);
    }

    #[test]
    fn rhs_rejects_dimension_mismatch() {
        let psi = product_state(&[Complex64::from(1.0)], &[Complex64::from(1.0), Complex64::from(0.0)]).unwrap();
        assert!(matches!(nlse_rhs(&psi, &zero(3), 1.0), Err(Error::InvalidArgument(_))));
        assert!(gamma_from_coupling(&psi, &zero(5)).is_err());
    }

    #[test]
    fn gamma_from_trivial_couplings() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        let psi = PureState::random(BipartiteShape::new(2, 3).unwrap(), &mut rng);
        assert_eq!(gamma_from_coupling(&psi, &zero(6)).unwrap(), 0.0);
        let v = DMatrix::<Complex64>::identity(6, 6) * Complex64::new(0.0, -2.5);
        assert!((gamma_from_coupling(&psi, &v).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SimConfig { rel_tol: 0.1, ..ok }.validate().is_err());
        assert!(SimConfig { sample_stride: 0, ..ok }.validate().is_err());
        assert!(SimConfig { dt_initial: 50.0, ..ok }.validate().is_err());
        assert!(SimConfig { t_max: 0.0, ..ok }.validate().is_ok());
    }

    #[test]
    fn zero_horizon_yields_initial_sample() {
        let psi = product_state(&[Complex64::from(1.0), Complex64::from(0.0)], &[Complex64::from(1.0)]).unwrap();
        let cfg = SimConfig { t_max: 0.0, ..SimConfig::default() };
        let traj = integrate(&psi, &zero(2), &GammaPolicy::Constant(1.0), &cfg).unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert_eq!(traj.samples[0].t, 0.0);
        assert_eq!(traj.samples[0].k, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn short_time_purity_edge_cases() {
        let s2 = SpinQuantumNumber::from_twice(21).unwrap();
        let u = UnitVector3::from_angles(0.3, 1.0);
        let n2 = UnitVector3::z_axis().neg();
        assert_eq!(short_time_purity(&UnitVector3::x_axis(), &n2, &u, s2, 1.0, 0.0), 1.0);
        for t in [0.1, 1.0, 10.0] {
            assert!((short_time_purity(&u, &n2, &u, s2, 1.0, t) - 1.0).abs() < 1e-12);
        }
    }
}
