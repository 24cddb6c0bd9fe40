//! Bipartite pure states and the entanglement functionals built on them.
//!
//! A state of a system with subsystem dimensions `N₁` and `N₂` is stored as its
//! coefficient matrix `C` (`N₁ × N₂`), flattened row-major: the composite
//! basis index of `|k₁⟩ ⊗ |k₂⟩` is `k₁·N₂ + k₂`. Every operator on the
//! composite space in this crate uses the same convention, which coincides
//! with the ordering produced by a Kronecker product `A ⊗ B`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Default bound on `N₁·N₂`.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Tolerance on `⟨ψ|ψ⟩ = 1` accepted by the checked constructors.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BipartiteShape {
    n1: usize,
    n2: usize,
}

impl BipartiteShape {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        Self::with_cap(n1, n2, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_cap(n1: usize, n2: usize, cap: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::invalid(format!(
                "subsystem dimensions must be positive, got {n1}x{n2}"
            )));
        }
        match n1.checked_mul(n2) {
            Some(d) if d <= cap => Ok(Self { n1, n2 }),
            _ => Err(Error::invalid(format!(
                "total dimension {n1}x{n2} exceeds the cap of {cap}"
            ))),
        }
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Composite dimension `N₁·N₂`.
    pub fn dim(&self) -> usize {
        self.n1 * self.n2
    }

    /// Number of Schmidt coefficients, `min(N₁, N₂)`.
    pub fn schmidt_rank_bound(&self) -> usize {
        self.n1.min(self.n2)
    }

    #[inline]
    pub fn index(&self, k1: usize, k2: usize) -> usize {
        k1 * self.n2 + k2
    }
}

/// A bipartite pure state `|ψ⟩ = Σ C_{k₁,k₂} |k₁⟩|k₂⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    shape: BipartiteShape,
    amps: Vec<Complex64>,
}

impl PureState {
    /// Builds a state from row-major amplitudes, rejecting anything whose norm
    /// is off by more than [`NORM_TOLERANCE`].
    pub fn from_amplitudes(shape: BipartiteShape, amps: Vec<Complex64>) -> Result<Self> {
        let psi = Self::unnormalized(shape, amps)?;
        let err = psi.norm_error();
        if err > NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "state is not normalized (|<psi|psi> - 1| = {err:e})"
            )));
        }
        Ok(psi)
    }

    /// Builds a state without checking its norm. Functionals that require a
    /// normalized state will reject the result until [`Self::renormalized`] is
    /// applied.
    pub fn unnormalized(shape: BipartiteShape, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != shape.dim() {
            return Err(Error::invalid(format!(
                "expected {} amplitudes for a {}x{} state, got {}",
                shape.dim(),
                shape.n1,
                shape.n2,
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::invalid("state has non-finite amplitudes"));
        }
        Ok(Self { shape, amps })
    }

    /// Scales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(shape: BipartiteShape, amps: Vec<Complex64>) -> Result<Self> {
        Self::unnormalized(shape, amps)?.renormalized()
    }

    pub fn from_matrix(c: &DMatrix<Complex64>) -> Result<Self> {
        let shape = BipartiteShape::new(c.nrows(), c.ncols())?;
        let amps = (0..c.nrows())
            .flat_map(|i| (0..c.ncols()).map(move |j| c[(i, j)]))
            .collect();
        Self::from_amplitudes(shape, amps)
    }

    /// Haar-random state: i.i.d. complex Gaussian amplitudes, normalized.
    pub fn random<R: Rng + ?Sized>(shape: BipartiteShape, rng: &mut R) -> Self {
        loop {
            let amps: Vec<Complex64> = (0..shape.dim())
                .map(|_| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                })
                .collect();
            if let Ok(psi) = Self::normalized(shape, amps) {
                return psi;
            }
        }
    }

    pub fn renormalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite state"));
        }
        self.amps.iter_mut().for_each(|a| *a /= n);
        Ok(self)
    }

    pub fn shape(&self) -> BipartiteShape {
        self.shape
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn coefficient(&self, k1: usize, k2: usize) -> Complex64 {
        self.amps[self.shape.index(k1, k2)]
    }

    /// The coefficient matrix `C`.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.shape.n1, self.shape.n2, &self.amps)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|⟨ψ|ψ⟩ − 1|`.
    pub fn norm_error(&self) -> f64 {
        (self.norm_sqr() - 1.0).abs()
    }

    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.shape != other.shape {
            return Err(Error::invalid("inner product of states with different shapes"));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn ensure_normalized(&self) -> Result<()> {
        let err = self.norm_error();
        if err > NORM_TOLERANCE {
            Err(Error::invalid(format!(
                "state is not normalized (|<psi|psi> - 1| = {err:e})"
            )))
        } else {
            Ok(())
        }
    }
}

/// Schmidt coefficients `q_l`, sorted descending. The local bases are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    q: Vec<f64>,
}

impl SchmidtSpectrum {
    /// Accepts any non-negative coefficients with `Σ q² = 1` (within 1e−9) and
    /// sorts them.
    pub fn new(mut q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::invalid("empty Schmidt spectrum"));
        }
        if q.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid("Schmidt coefficients must be finite and non-negative"));
        }
        let l2: f64 = q.iter().map(|x| x * x).sum();
        if (l2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "Schmidt coefficients are not normalized (sum q^2 = {l2})"
            )));
        }
        sort_descending(&mut q);
        Ok(Self { q })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.q
    }

    pub fn purity(&self) -> f64 {
        self.q.iter().map(|x| x.powi(4)).sum()
    }
}

/// Purity, `⟨Q⟩` and entanglement entropy of one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntanglementReport {
    pub purity: f64,
    pub q_expectation: f64,
    /// Von Neumann entropy of either reduced state, natural log.
    pub entropy: f64,
}

pub(crate) fn sort_descending(v: &mut [f64]) {
    // stable: equal values keep their input order
    v.sort_by(|a, b| b.total_cmp(a));
}

fn unit_norm(v: &[Complex64]) -> Result<Vec<Complex64>> {
    let n: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::invalid("product_state factor has zero norm"));
    }
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::invalid(format!(
            "product_state factor is not normalized (norm = {n})"
        )));
    }
    Ok(v.to_vec())
}

/// `|v₁⟩ ⊗ |v₂⟩`, i.e. `C = v₁ v₂ᵀ`.
pub fn product_state(v1: &[Complex64], v2: &[Complex64]) -> Result<PureState> {
    let v1 = unit_norm(v1)?;
    let v2 = unit_norm(v2)?;
    let shape = BipartiteShape::new(v1.len(), v2.len())?;
    let amps = v1
        .iter()
        .flat_map(|a| v2.iter().map(move |b| a * b))
        .collect();
    PureState::unnormalized(shape, amps)
}

/// Singular values of `C`, sorted descending.
pub fn schmidt(psi: &PureState) -> Result<SchmidtSpectrum> {
    psi.ensure_normalized()?;
    let c = psi.matrix();
    let svd = nalgebra::linalg::SVD::try_new(c, false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Computation("SVD of the coefficient matrix did not converge".into()))?;
    let mut q: Vec<f64> = svd.singular_values.iter().copied().collect();
    sort_descending(&mut q);
    Ok(SchmidtSpectrum { q })
}

/// `Σ_{k₁'<k₁''} Σ_{k₂'<k₂''} |φ|²` with `φ` the 2×2 minor of `C` on those rows
/// and columns.
fn minor_sum(amps: &[Complex64], n1: usize, n2: usize) -> f64 {
    let mut acc = 0.0;
    for r1 in 0..n1 {
        let row1 = &amps[r1 * n2..(r1 + 1) * n2];
        for r2 in r1 + 1..n1 {
            let row2 = &amps[r2 * n2..(r2 + 1) * n2];
            for c1 in 0..n2 {
                for c2 in c1 + 1..n2 {
                    let phi = row1[c1] * row2[c2] - row1[c2] * row2[c1];
                    acc += phi.norm_sqr();
                }
            }
        }
    }
    acc
}

/// Purity of the normalized version of `amps`, without a norm check.
pub(crate) fn purity_of(amps: &[Complex64], n1: usize, n2: usize) -> f64 {
    let l2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    1.0 - 2.0 * minor_sum(amps, n1, n2) / (l2 * l2)
}

/// `P = Tr ρ₁² = 1 − 2 Σ |φ|²`.
pub fn purity(psi: &PureState) -> Result<f64> {
    psi.ensure_normalized()?;
    let s = psi.shape;
    Ok(1.0 - 2.0 * minor_sum(&psi.amps, s.n1, s.n2))
}

/// `⟨ψ|Q|ψ⟩ = 1 − P`.
pub fn q_expectation(psi: &PureState) -> Result<f64> {
    purity(psi).map(|p| 1.0 - p)
}

/// Writes the coefficients of `Q|ψ⟩` into `out`, without normalization.
///
/// Each 2×2 block `a = (k₁',k₂')`, `b = (k₁',k₂'')`, `c = (k₁'',k₂')`,
/// `d = (k₁'',k₂'')` contributes `φ·(C̄_d|a⟩ + C̄_a|d⟩ − C̄_c|b⟩ − C̄_b|c⟩)`,
/// using `⟨Ψ|ψ⟩ = 2φ` and the prefactor ½ of `Q`.
pub(crate) fn apply_q_into(amps: &[Complex64], n1: usize, n2: usize, out: &mut [Complex64]) {
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for r1 in 0..n1 {
        for r2 in r1 + 1..n1 {
            for c1 in 0..n2 {
                for c2 in c1 + 1..n2 {
                    let a = r1 * n2 + c1;
                    let b = r1 * n2 + c2;
                    let c = r2 * n2 + c1;
                    let d = r2 * n2 + c2;
                    let (ca, cb, cc, cd) = (amps[a], amps[b], amps[c], amps[d]);
                    let phi = ca * cd - cb * cc;
                    out[a] += phi * cd.conj();
                    out[d] += phi * ca.conj();
                    out[b] -= phi * cc.conj();
                    out[c] -= phi * cb.conj();
                }
            }
        }
    }
    if cfg!(feature = "inject-apply-q-sign-flip") {
        out.iter_mut().for_each(|o| *o = -*o);
    }
}

/// `Q|ψ⟩` as an `N₁ × N₂` coefficient matrix (not normalized).
pub fn apply_q(psi: &PureState) -> DMatrix<Complex64> {
    let s = psi.shape;
    let mut out = vec![Complex64::new(0.0, 0.0); s.dim()];
    apply_q_into(&psi.amps, s.n1, s.n2, &mut out);
    DMatrix::from_row_slice(s.n1, s.n2, &out)
}

/// The state-dependent operator `Q = ½ Σ |Ψ⟩⟨Ψ|` as an explicit Hermitian
/// matrix on the composite space. Quadratic memory in `N₁·N₂`; intended for
/// cross-checking [`apply_q`].
pub fn dense_q_operator(psi: &PureState) -> DMatrix<Complex64> {
    let s = psi.shape;
    let (n1, n2) = (s.n1, s.n2);
    let dim = s.dim();
    let amps = &psi.amps;
    let mut q = DMatrix::zeros(dim, dim);
    for r1 in 0..n1 {
        for r2 in r1 + 1..n1 {
            for c1 in 0..n2 {
                for c2 in c1 + 1..n2 {
                    let idx = [r1 * n2 + c1, r1 * n2 + c2, r2 * n2 + c1, r2 * n2 + c2];
                    let [a, b, c, d] = idx;
                    // ket |Ψ⟩: components at a, b, c, d
                    let ket = [
                        amps[d].conj(),
                        -amps[c].conj(),
                        -amps[b].conj(),
                        amps[a].conj(),
                    ];
                    for (i, &ki) in idx.iter().enumerate() {
                        for (j, &kj) in idx.iter().enumerate() {
                            q[(ki, kj)] += 0.5 * ket[i] * ket[j].conj();
                        }
                    }
                }
            }
        }
    }
    q
}

/// `σ = −Σ q_l² ln q_l²`, with `0·ln 0 = 0`.
pub fn entanglement_entropy(spectrum: &SchmidtSpectrum) -> f64 {
    entropy_of(spectrum.coefficients())
}

pub(crate) fn entropy_of(q: &[f64]) -> f64 {
    q.iter()
        .map(|x| x * x)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

pub fn entanglement_report(psi: &PureState) -> Result<EntanglementReport> {
    let purity = purity(psi)?;
    let spectrum = schmidt(psi)?;
    Ok(EntanglementReport {
        purity,
        q_expectation: 1.0 - purity,
        entropy: entanglement_entropy(&spectrum),
    })
}
