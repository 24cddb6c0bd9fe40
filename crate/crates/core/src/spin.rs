//! Spin operators, coherent states and the dipolar coupling.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::state::{BipartiteShape, PureState, DEFAULT_DIMENSION_CAP};
use crate::{Error, Result};

/// Spin quantum number stored as `2S` so half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpinQuantumNumber {
    two_s: u32,
}

impl SpinQuantumNumber {
    pub fn from_twice(two_s: u32) -> Result<Self> {
        if two_s == 0 {
            return Err(Error::invalid("spin quantum number must be positive"));
        }
        if two_s as usize + 1 > DEFAULT_DIMENSION_CAP {
            return Err(Error::invalid(format!(
                "spin 2S = {two_s} exceeds the dimension cap of {DEFAULT_DIMENSION_CAP}"
            )));
        }
        Ok(Self { two_s })
    }

    pub fn half() -> Self {
        Self { two_s: 1 }
    }

    pub fn twice(&self) -> u32 {
        self.two_s
    }

    pub fn value(&self) -> f64 {
        f64::from(self.two_s) / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    /// The spin carried by a subsystem of dimension `dim` (`2S + 1`).
    pub fn for_dim(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("dimension {dim} does not carry a spin")));
        }
        Self::from_twice((dim - 1) as u32)
    }
}

/// A direction on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVector3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = x * x + y * y + z * z;
        if !n2.is_finite() || (n2 - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "({x}, {y}, {z}) is not a unit vector"
            )));
        }
        Ok(Self { x, y, z })
    }

    /// Scales a nonzero vector onto the sphere.
    pub fn normalize(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::invalid("cannot normalize a zero vector"));
        }
        Ok(Self { x: v[0] / n, y: v[1] / n, z: v[2] / n })
    }

    /// `(sinθ cosφ, sinθ sinφ, cosθ)`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self { x: st * cp, y: st * sp, z: ct }
    }

    pub fn x_axis() -> Self {
        Self { x: 1.0, y: 0.0, z: 0.0 }
    }

    pub fn z_axis() -> Self {
        Self { x: 0.0, y: 0.0, z: 1.0 }
    }

    pub fn neg(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> [f64; 3] {
        [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ]
    }

    /// Polar and azimuthal angles `(θ, φ)`.
    pub fn angles(&self) -> (f64, f64) {
        (self.z.clamp(-1.0, 1.0).acos(), self.y.atan2(self.x))
    }

    /// Angle between two directions, robust near 0 and π.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let c = self.cross(other);
        let s = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        s.atan2(self.dot(other))
    }
}

/// `(Sx, Sy, Sz)` in the basis `|S, m⟩`, `m = S, S−1, …, −S`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinOperators {
    pub spin: SpinQuantumNumber,
    pub sx: DMatrix<Complex64>,
    pub sy: DMatrix<Complex64>,
    pub sz: DMatrix<Complex64>,
}

impl SpinOperators {
    /// `S·n̂`.
    pub fn along(&self, n: &UnitVector3) -> DMatrix<Complex64> {
        &self.sx * Complex64::from(n.x) + &self.sy * Complex64::from(n.y) + &self.sz * Complex64::from(n.z)
    }

    pub fn components(&self) -> [&DMatrix<Complex64>; 3] {
        [&self.sx, &self.sy, &self.sz]
    }
}

pub fn spin_matrices(s: SpinQuantumNumber) -> SpinOperators {
    let dim = s.dim();
    let sv = s.value();
    let m_of = |i: usize| sv - i as f64;
    let mut sz = DMatrix::zeros(dim, dim);
    // raising operator: S+|m⟩ = √(S(S+1) − m(m+1)) |m+1⟩, and |m+1⟩ sits at i−1
    let mut sp = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        let m = m_of(i);
        sz[(i, i)] = Complex64::from(m);
        if i > 0 {
            sp[(i - 1, i)] = Complex64::from((sv * (sv + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * Complex64::from(0.5);
    let sy = (&sp - &sm) * Complex64::new(0.0, -0.5);
    SpinOperators { spin: s, sx, sy, sz }
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    let ln_fact = |m: u32| (1..=m).map(|i| f64::from(i).ln()).sum::<f64>();
    ln_fact(n) - ln_fact(k) - ln_fact(n - k)
}

/// Spin coherent state along `n`: the `+S` eigenvector of `S·n̂`.
///
/// Built as `e^{−iφSz} e^{−iθSy} |S, S⟩`, then rephased so the first component
/// with modulus above 1e−12 is real and positive.
pub fn coherent_state(s: SpinQuantumNumber, n: &UnitVector3) -> Vec<Complex64> {
    let (theta, phi) = n.angles();
    let two_s = s.twice();
    let sv = s.value();
    let (half_s, half_c) = (theta / 2.0).sin_cos();
    let mut v: Vec<Complex64> = (0..=two_s)
        .map(|i| {
            // m = S − i; amplitude √C(2S, i) cos^{2S−i}(θ/2) sin^{i}(θ/2) e^{−imφ}
            let m = sv - f64::from(i);
            let mag = (0.5 * ln_binomial(two_s, i)).exp()
                * half_c.powi((two_s - i) as i32)
                * half_s.powi(i as i32);
            Complex64::from_polar(mag, -m * phi)
        })
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    if let Some(lead) = v.iter().find(|a| a.norm() > 1e-12).copied() {
        let phase = lead.conj() / lead.norm();
        v.iter_mut().for_each(|a| *a *= phase);
    }
    v
}

/// `V_d = ω_d (S₁·û_d) ⊗ (S₂·û_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DipolarHamiltonian {
    pub matrix: DMatrix<Complex64>,
    pub omega_d: f64,
    pub u_d: UnitVector3,
}

pub fn dipolar_hamiltonian(
    s1: SpinQuantumNumber,
    s2: SpinQuantumNumber,
    omega_d: f64,
    u_d: &UnitVector3,
) -> Result<DipolarHamiltonian> {
    if !(omega_d > 0.0) || !omega_d.is_finite() {
        return Err(Error::invalid(format!("omega_d must be positive, got {omega_d}")));
    }
    BipartiteShape::new(s1.dim(), s2.dim())?;
    let a = spin_matrices(s1).along(u_d);
    let b = spin_matrices(s2).along(u_d);
    let matrix = a.kronecker(&b) * Complex64::from(omega_d);
    Ok(DipolarHamiltonian { matrix, omega_d, u_d: *u_d })
}

/// `⟨S₁⟩ / S₁`, computed from the reduced state `ρ₁ = C C†`.
pub(crate) fn reduced_spin_expectation(
    amps: &[Complex64],
    n1: usize,
    n2: usize,
    ops: &SpinOperators,
) -> [f64; 3] {
    // ρ₁[i][j] = Σ_k C[i,k] conj(C[j,k])
    let mut rho = vec![Complex64::new(0.0, 0.0); n1 * n1];
    for i in 0..n1 {
        for j in i..n1 {
            let v: Complex64 = (0..n2).map(|k| amps[i * n2 + k] * amps[j * n2 + k].conj()).sum();
            rho[i * n1 + j] = v;
            rho[j * n1 + i] = v.conj();
        }
    }
    let norm: f64 = (0..n1).map(|i| rho[i * n1 + i].re).sum();
    let sv = ops.spin.value();
    let mut k = [0.0; 3];
    for (out, op) in k.iter_mut().zip(ops.components()) {
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..n1 {
            for j in 0..n1 {
                tr += rho[i * n1 + j] * op[(j, i)];
            }
        }
        *out = tr.re / (norm * sv);
    }
    k
}

/// Bloch vector of subsystem 1. For a spin ½ this is `k = 2⟨S₁⟩`; for larger
/// spins it is scaled by `1/S₁`, giving `|k| = 1` on coherent states.
pub fn bloch_vector(psi: &PureState, s1: SpinQuantumNumber) -> Result<[f64; 3]> {
    let shape = psi.shape();
    if shape.n1() != s1.dim() {
        return Err(Error::invalid(format!(
            "subsystem 1 has dimension {} but spin 2S = {} needs {}",
            shape.n1(),
            s1.twice(),
            s1.dim()
        )));
    }
    let ops = spin_matrices(s1);
    Ok(reduced_spin_expectation(psi.amplitudes(), shape.n1(), shape.n2(), &ops))
}
