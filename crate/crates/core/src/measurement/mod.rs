//! Measurement outcomes of the dipolar two-spin setup: classification of
//! trajectories, basins of attraction over initial spin-½ directions, and the
//! noise model for outcome statistics.

mod basins;
pub mod noise;

pub use basins::{basin_map, BasinMap, GridPoint, SphereGrid};
pub use noise::{
    born_rule, noise_curve, noiseless_step, p_plus, p_plus_hemisphere, p_plus_monte_carlo,
    theta_grid, wrapped_cauchy_pdf, MonteCarloEstimate, NoiseCurvePoint, WrappedCauchy,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, GammaPolicy, SimConfig, Trajectory};
use crate::spin::{coherent_state, dipolar_hamiltonian, SpinQuantumNumber, UnitVector3};
use crate::state::{product_state, PureState};
use crate::Result;

/// Default convergence threshold for [`classify_outcome`].
pub const DEFAULT_EPS: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OutcomeLabel {
    Plus,
    Minus,
    Unresolved,
}

impl OutcomeLabel {
    /// `+1`, `−1`, or `0` for unresolved.
    pub fn as_i8(self) -> i8 {
        match self {
            OutcomeLabel::Plus => 1,
            OutcomeLabel::Minus => -1,
            OutcomeLabel::Unresolved => 0,
        }
    }

    /// The label the noise-free dynamics should select for `n̂₁·û_d`.
    pub fn expected_for(projection: f64) -> Self {
        if projection > 0.0 {
            OutcomeLabel::Plus
        } else if projection < 0.0 {
            OutcomeLabel::Minus
        } else {
            OutcomeLabel::Unresolved
        }
    }
}

/// `+1` (`−1`) when the final state is pure to within `eps` and its Bloch
/// vector lies within `eps` of `+û_d` (`−û_d`) in projection; unresolved
/// otherwise. `eps` is expected in `(0, 0.5)`.
pub fn classify_outcome(traj: &Trajectory, u_d: &UnitVector3, eps: f64) -> OutcomeLabel {
    debug_assert!(eps > 0.0 && eps < 0.5);
    let last = traj.last();
    if !(last.purity > 1.0 - eps) {
        return OutcomeLabel::Unresolved;
    }
    let proj = last.k[0] * u_d.x + last.k[1] * u_d.y + last.k[2] * u_d.z;
    if proj > 1.0 - eps {
        OutcomeLabel::Plus
    } else if proj < -(1.0 - eps) {
        OutcomeLabel::Minus
    } else {
        OutcomeLabel::Unresolved
    }
}

/// How γ is set for a dipolar run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Constant,
    CouplingDriven,
}

/// A spin ½ coupled to a spin `S₂` through `V_d`, with the second spin
/// starting as a coherent state along `n̂₂`. The Hamiltonian is `V_d` alone.
#[derive(Clone, Debug)]
pub struct DipolarSetup {
    pub s2: SpinQuantumNumber,
    pub omega_d: f64,
    pub gamma_mode: GammaMode,
    pub gamma: f64,
    pub u_d: UnitVector3,
    pub n2: UnitVector3,
    hamiltonian: DMatrix<Complex64>,
    policy: GammaPolicy,
}

impl DipolarSetup {
    pub fn new(
        s2: SpinQuantumNumber,
        omega_d: f64,
        gamma_mode: GammaMode,
        gamma: f64,
        u_d: UnitVector3,
        n2: UnitVector3,
    ) -> Result<Self> {
        let hamiltonian = dipolar_hamiltonian(SpinQuantumNumber::half(), s2, omega_d, &u_d)?.matrix;
        let policy = match gamma_mode {
            GammaMode::Constant => GammaPolicy::constant(gamma)?,
            GammaMode::CouplingDriven => GammaPolicy::coupling_driven(hamiltonian.clone()),
        };
        Ok(Self { s2, omega_d, gamma_mode, gamma, u_d, n2, hamiltonian, policy })
    }

    pub fn hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.hamiltonian
    }

    pub fn policy(&self) -> &GammaPolicy {
        &self.policy
    }

    /// `|n̂₁⟩ ⊗ |S₂, n̂₂⟩` with both factors spin coherent states.
    pub fn initial_state(&self, n1: &UnitVector3) -> Result<PureState> {
        product_state(
            &coherent_state(SpinQuantumNumber::half(), n1),
            &coherent_state(self.s2, &self.n2),
        )
    }

    pub fn run(&self, n1: &UnitVector3, sim: &SimConfig) -> Result<Trajectory> {
        let psi0 = self.initial_state(n1)?;
        integrate(&psi0, &self.hamiltonian, &self.policy, sim)
    }
}
