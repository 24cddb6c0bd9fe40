//! Schmidt-coefficient dynamics for a vanishing Hamiltonian.
//!
//! With `H = 0` the modified equation keeps the Schmidt bases fixed and moves
//! only the coefficients: `dq_l/dt = γ q_l (q_l² − L₄)`, where
//! `L_n = Σ q_l^n`. This flow is the gradient of `(γ/4)(3 − 2L₂)L₄`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::{GammaPolicy, NlseIntegrator, SimConfig};
use crate::ode::{DormandPrince, Tolerances};
use crate::state::{entropy_of, schmidt, sort_descending, BipartiteShape, PureState};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    q: Vec<f64>,
    gamma: f64,
}

impl FlowState {
    pub fn new(q: Vec<f64>, gamma: f64) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::invalid("flow state needs at least one coefficient"));
        }
        if q.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("Schmidt coefficients must be finite and non-negative"));
        }
        let l2: f64 = q.iter().map(|x| x * x).sum();
        if (l2 - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("sum of q^2 is {l2}, expected 1")));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { q, gamma })
    }

    /// Near-uniform spectrum of length `m`: every coefficient equal except
    /// `l0`, which is scaled by `1 + perturbation`, then renormalized.
    pub fn perturbed_uniform(m: usize, l0: usize, perturbation: f64, gamma: f64) -> Result<Self> {
        if l0 >= m {
            return Err(Error::invalid(format!("index {l0} out of range for {m} coefficients")));
        }
        let mut q = vec![1.0; m];
        q[l0] *= 1.0 + perturbation;
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.iter_mut().for_each(|x| *x /= n);
        Self::new(q, gamma)
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Index of the unique largest coefficient, or `None` on a tie.
    pub fn attractor(&self) -> Option<usize> {
        unique_argmax(&self.q)
    }
}

fn unique_argmax(q: &[f64]) -> Option<usize> {
    let (imax, &max) = q.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let ties = q.iter().filter(|&&x| x == max).count();
    (ties == 1).then_some(imax)
}

fn power_sum(q: &[f64], n: i32) -> f64 {
    q.iter().map(|x| x.powi(n)).sum()
}

fn rhs_into(q: &[f64], gamma: f64, out: &mut [f64]) {
    let l4 = power_sum(q, 4);
    for (o, x) in out.iter_mut().zip(q) {
        *o = gamma * x * (x * x - l4);
    }
}

/// `dq_l/dt = γ q_l (q_l² − L₄)`.
pub fn flow_rhs(state: &FlowState) -> Vec<f64> {
    let mut out = vec![0.0; state.q.len()];
    rhs_into(&state.q, state.gamma, &mut out);
    out
}

/// Even moments `L_n = Σ q_l^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSet {
    pub values: BTreeMap<u32, f64>,
}

impl MomentSet {
    pub fn get(&self, n: u32) -> Option<f64> {
        self.values.get(&n).copied()
    }
}

pub fn moments(state: &FlowState, n_max: u32) -> Result<MomentSet> {
    moments_of(&state.q, n_max)
}

/// Moments of arbitrary coefficients (no normalization requirement).
pub fn moments_of(q: &[f64], n_max: u32) -> Result<MomentSet> {
    if n_max < 2 || n_max % 2 != 0 {
        return Err(Error::invalid(format!("n_max must be an even integer >= 2, got {n_max}")));
    }
    let values = (1..=n_max / 2)
        .map(|j| (2 * j, power_sum(q, (2 * j) as i32)))
        .collect();
    Ok(MomentSet { values })
}

/// `dL_n/dt = nγ(L_{n+2} − L_n L₄)`.
pub fn moment_rhs(moments: &MomentSet, gamma: f64, n: u32) -> Result<f64> {
    let need = |k: u32| {
        moments
            .get(k)
            .ok_or_else(|| Error::invalid(format!("moment L_{k} is required but missing")))
    };
    let ln = need(n)?;
    let ln2 = need(n + 2)?;
    let l4 = need(4)?;
    Ok(f64::from(n) * gamma * (ln2 - ln * l4))
}

/// `H = (γ/4)(3 − 2L₂)L₄` for arbitrary non-negative `q`.
pub fn potential_at(q: &[f64], gamma: f64) -> f64 {
    let l2 = power_sum(q, 2);
    let l4 = power_sum(q, 4);
    0.25 * gamma * (3.0 - 2.0 * l2) * l4
}

/// `∂H/∂q_l = γ[(3 − 2L₂) q_l³ − L₄ q_l]`; equals [`flow_rhs`] when `L₂ = 1`.
pub fn potential_gradient(q: &[f64], gamma: f64) -> Vec<f64> {
    let l2 = power_sum(q, 2);
    let l4 = power_sum(q, 4);
    q.iter()
        .map(|x| gamma * ((3.0 - 2.0 * l2) * x.powi(3) - l4 * x))
        .collect()
}

pub fn flow_potential(state: &FlowState) -> f64 {
    potential_at(&state.q, state.gamma)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    pub dt_initial: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub sample_stride: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { dt_initial: 1e-3, rel_tol: 1e-12, abs_tol: 1e-14, sample_stride: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSample {
    pub t: f64,
    pub q: Vec<f64>,
    pub l4: f64,
    pub entropy: f64,
}

impl FlowSample {
    fn new(t: f64, q: &[f64]) -> Self {
        Self { t, q: q.to_vec(), l4: power_sum(q, 4), entropy: entropy_of(q) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub samples: Vec<FlowSample>,
    /// Index of the coefficient that grows to 1; `None` when the initial
    /// maximum is shared and the flow cannot select one.
    pub attractor: Option<usize>,
}

impl FlowTrajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("flow trajectory holds the initial sample")
    }
}

/// Reduced-flow stepper shared by [`integrate_flow`] and [`cross_check_full`].
struct FlowIntegrator {
    gamma: f64,
    stepper: DormandPrince<f64>,
}

impl FlowIntegrator {
    fn new(state: &FlowState, t_max: f64, opts: &FlowOptions) -> Self {
        let tol = Tolerances { rel: opts.rel_tol, abs: opts.abs_tol };
        let h_min = 1e-12 * t_max.max(opts.dt_initial);
        Self {
            gamma: state.gamma,
            stepper: DormandPrince::new(state.q.clone(), 0.0, opts.dt_initial, h_min, tol),
        }
    }

    fn advance_to<O: FnMut(f64, &[f64])>(&mut self, t_end: f64, on_step: O) -> Result<()> {
        let gamma = self.gamma;
        self.stepper
            .advance_to(t_end, |_, q, dq| rhs_into(q, gamma, dq), |_| false, on_step)
            .map_err(|e| Error::Stiffness { t: e.t, step: e.step, partial: None })
    }
}

pub fn integrate_flow(state0: &FlowState, t_max: f64, opts: &FlowOptions) -> Result<FlowTrajectory> {
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(Error::invalid(format!("t_max must be non-negative, got {t_max}")));
    }
    if opts.sample_stride == 0 {
        return Err(Error::invalid("sample_stride must be positive"));
    }
    let mut integ = FlowIntegrator::new(state0, t_max, opts);
    let mut samples = vec![FlowSample::new(0.0, state0.q())];
    let mut step = 0usize;
    let mut pending = None;
    integ.advance_to(t_max, |t, q| {
        step += 1;
        if step % opts.sample_stride == 0 {
            samples.push(FlowSample::new(t, q));
            pending = None;
        } else {
            pending = Some(FlowSample::new(t, q));
        }
    })?;
    samples.extend(pending);
    Ok(FlowTrajectory { samples, attractor: state0.attractor() })
}

/// Runs the reduced flow and the full modified equation (with `H = 0`, from
/// the state whose coefficient matrix is `diag(q(0))`) side by side and
/// returns the largest elementwise deviation between the sorted Schmidt
/// spectra at the requested times.
pub fn cross_check_full(
    state0: &FlowState,
    shape: BipartiteShape,
    t_grid: &[f64],
    flow_opts: &FlowOptions,
    sim: &SimConfig,
) -> Result<f64> {
    let m = shape.schmidt_rank_bound();
    if m != state0.q.len() {
        return Err(Error::invalid(format!(
            "shape {}x{} has {m} Schmidt coefficients but the flow state has {}",
            shape.n1(),
            shape.n2(),
            state0.q.len()
        )));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::invalid("checkpoint times must be non-negative and increasing"));
    }
    let t_end = t_grid.last().copied().unwrap_or(0.0);

    let mut amps = vec![Complex64::new(0.0, 0.0); shape.dim()];
    for (l, &x) in state0.q.iter().enumerate() {
        amps[shape.index(l, l)] = Complex64::from(x);
    }
    let psi0 = PureState::from_amplitudes(shape, amps)?;
    let h = DMatrix::zeros(shape.dim(), shape.dim());
    let sim = SimConfig { t_max: t_end.max(sim.dt_initial * 2.0), ..*sim };
    let mut full = NlseIntegrator::new(&psi0, &h, &GammaPolicy::Constant(state0.gamma), &sim)?;
    let mut reduced = FlowIntegrator::new(state0, t_end, flow_opts);

    let mut worst: f64 = 0.0;
    for &t in t_grid {
        full.advance_to(t, |_| {})?;
        reduced.advance_to(t, |_, _| {})?;
        let spectrum = schmidt(&full.state().renormalized()?)?;
        let mut q = reduced.stepper.state().to_vec();
        sort_descending(&mut q);
        for (a, b) in spectrum.coefficients().iter().zip(&q) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}
