#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use spin_collapse::measurement::{DipolarSetup, GammaMode};
use spin_collapse::spin::{SpinQuantumNumber, UnitVector3};
use spin_collapse::state::{BipartiteShape, PureState};
use spin_collapse::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn state_from(n1: usize, n2: usize, raw: &[(f64, f64)]) -> PureState {
    let amps = raw.iter().map(|&(a, b)| c(a, b)).collect();
    PureState::normalized(BipartiteShape::new(n1, n2).unwrap(), amps).unwrap()
}

/// Normalized random states of shapes up to 6×8.
pub fn arb_state() -> impl Strategy<Value = PureState> {
    (1usize..=6, 1usize..=8).prop_flat_map(|(n1, n2)| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n1 * n2)
            .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3)
            .prop_map(move |v| state_from(n1, n2, &v))
    })
}

pub fn arb_direction() -> impl Strategy<Value = UnitVector3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| UnitVector3::normalize([x, y, z]).unwrap())
}

/// Row-major coefficient matrix.
pub fn coeffs(psi: &PureState) -> DMatrix<Complex64> {
    let s = psi.shape();
    DMatrix::from_row_slice(s.n1(), s.n2(), psi.amplitudes())
}

pub fn row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    m.transpose().as_slice().to_vec()
}

/// `Q = ½ Σ |Ψ⟩⟨Ψ|` assembled explicitly from the 2×2 minors, one rank-one
/// term per pair of rows and pair of columns.
pub fn dense_q_oracle(psi: &PureState) -> DMatrix<Complex64> {
    let (n1, n2) = (psi.shape().n1(), psi.shape().n2());
    let dim = n1 * n2;
    let a = psi.amplitudes();
    let mut q = DMatrix::zeros(dim, dim);
    for r1 in 0..n1 {
        for r2 in r1 + 1..n1 {
            for c1 in 0..n2 {
                for c2 in c1 + 1..n2 {
                    let (ia, ib, ic, id) = (r1 * n2 + c1, r1 * n2 + c2, r2 * n2 + c1, r2 * n2 + c2);
                    // bra ⟨Ψ| = C_d⟨a| + C_a⟨d| − C_c⟨b| − C_b⟨c|, so the ket has conjugates
                    let mut ket = DVector::zeros(dim);
                    ket[ia] = a[id].conj();
                    ket[id] = a[ia].conj();
                    ket[ib] = -a[ic].conj();
                    ket[ic] = -a[ib].conj();
                    q += &ket * ket.adjoint() * c(0.5, 0.0);
                }
            }
        }
    }
    q
}

/// `Q|ψ⟩ = ‖C‖² C − C C† C`.
pub fn closed_form_q(psi: &PureState) -> DMatrix<Complex64> {
    let m = coeffs(psi);
    let norm = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    &m * c(norm, 0.0) - &m * m.adjoint() * &m
}

/// Eigenvalues of `ρ₁ = CC†`, descending.
pub fn reduced_eigenvalues(psi: &PureState) -> Vec<f64> {
    let m = coeffs(psi);
    let rho = &m * m.adjoint();
    let mut ev: Vec<f64> = SymmetricEigen::new(rho).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn purity_oracle(psi: &PureState) -> f64 {
    reduced_eigenvalues(psi).iter().map(|l| l * l).sum()
}

/// `e^{−iHt}` through the eigendecomposition of a Hermitian `H`.
pub fn propagator(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let eig = SymmetricEigen::new(h.clone());
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// `(n̂₁, û_d)` for the four dipolar cases; all share `n̂₂ = −ẑ`, `S₂ = 21/2`,
/// `γ = ω_d = 1`.
pub fn dipolar_cases() -> [(UnitVector3, UnitVector3); 4] {
    let x = UnitVector3::x_axis();
    [
        (UnitVector3::from_angles(0.55 * PI, 0.45 * PI), x),
        (UnitVector3::from_angles(0.55 * PI, 0.55 * PI), x),
        (UnitVector3::from_angles(0.55 * PI, 0.75 * PI), x),
        (UnitVector3::from_angles(0.5 * PI, 0.5 * PI), tilted_axis()),
    ]
}

pub fn tilted_axis() -> UnitVector3 {
    UnitVector3::from_angles(3.0 * PI / 8.0, 3.0 * PI / 4.0)
}

pub fn dipolar(u_d: UnitVector3, gamma: f64) -> DipolarSetup {
    DipolarSetup::new(
        SpinQuantumNumber::from_twice(21).unwrap(),
        1.0,
        GammaMode::Constant,
        gamma,
        u_d,
        UnitVector3::z_axis().neg(),
    )
    .unwrap()
}

pub fn dot(k: &[f64; 3], u: &UnitVector3) -> f64 {
    k[0] * u.x + k[1] * u.y + k[2] * u.z
}

/// Independent estimate of `p₊`: draw the wrapped-Cauchy angle by inverting
/// its closed-form CDF, tilt `n̂₁` by it towards a uniformly random direction
/// normal to `n̂₁`, and count kicked directions with positive `z`.
pub fn monte_carlo_oracle(theta1: f64, phi0: f64, samples: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t = (0.5 * phi0).tanh();
    let (s1, c1) = theta1.sin_cos();
    let mut hits = 0u64;
    for _ in 0..samples {
        let u: f64 = rng.random();
        let angle = 2.0 * (t * (PI * (u - 0.5)).tan()).atan();
        let beta = 2.0 * PI * rng.random::<f64>();
        // n̂₁ = (sin θ₁, 0, cos θ₁); normals e₁ = (cos θ₁, 0, −sin θ₁), e₂ = ŷ
        let z = angle.cos() * c1 + angle.sin() * beta.cos() * (-s1);
        if z > 0.0 {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    (p, (p * (1.0 - p) / samples as f64).sqrt())
}
