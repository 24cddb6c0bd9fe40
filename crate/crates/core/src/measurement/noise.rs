//! Outcome probabilities when the initial spin-½ direction is kicked by a
//! random rotation whose angle follows a wrapped Cauchy law.
//!
//! In a frame where `û_d = ẑ` the kicked direction `n̂'` has polar angle
//! `θ_R` about the noise-free direction, distributed with density `2f(θ_R)` on
//! `[0, π]`, and a uniform azimuth about it. The outcome is `+1` when
//! `n̂'·ẑ ≥ 0`. Three independent evaluations are provided: a 1D integral in
//! noise-centred coordinates ([`p_plus`]), the raw hemisphere integral
//! ([`p_plus_hemisphere`]) and Monte-Carlo sampling of explicit rotations
//! ([`p_plus_monte_carlo`]).

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::quadrature;
use crate::{Error, Result};

/// Largest acceptable quadrature error estimate.
pub const QUADRATURE_ERROR_LIMIT: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WrappedCauchy {
    phi0: f64,
}

impl WrappedCauchy {
    pub fn new(phi0: f64) -> Result<Self> {
        if !(phi0 > 0.0) || !phi0.is_finite() {
            return Err(Error::invalid(format!("phi0 must be positive, got {phi0}")));
        }
        Ok(Self { phi0 })
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    /// Probability that the rotation angle lies in `[0, θ]`, for `θ ∈ [0, π]`.
    /// Half the mass lies on each side of zero, so this runs from 0 to ½.
    pub fn half_cdf(&self, theta: f64) -> f64 {
        if theta >= PI {
            return 0.5;
        }
        let tanh_half = (0.5 * self.phi0).tanh();
        ((0.5 * theta).tan() / tanh_half).atan() / PI
    }

    /// Inverse of [`Self::half_cdf`] scaled to `u = 2·half_cdf(θ) ∈ [0, 1]`.
    fn angle_at(&self, u: f64) -> f64 {
        let tanh_half = (0.5 * self.phi0).tanh();
        2.0 * (tanh_half * (FRAC_PI_2 * u).tan()).atan()
    }
}

/// `f(φ) = (1/2π) sinh φ₀ / (cosh φ₀ − cos φ)`.
pub fn wrapped_cauchy_pdf(phi_r: f64, dist: &WrappedCauchy) -> f64 {
    // same expression divided through by cosh φ₀ and rearranged, which stays
    // finite for large φ₀ and accurate for small φ₀
    let r = (-dist.phi0).exp();
    let num = -(-2.0 * dist.phi0).exp_m1();
    let s = (0.5 * phi_r).sin();
    let den = (-dist.phi0).exp_m1().powi(2) + 4.0 * r * s * s;
    num / (den * 2.0 * PI)
}

/// Fraction of the azimuth (about the noise-free direction at polar angle
/// `theta1`) for which a direction tilted by `theta_r` has `z ≥ 0`.
fn hemisphere_fraction(theta_r: f64, theta1: f64) -> f64 {
    let c = theta1.cos() * theta_r.cos();
    let s = theta1.sin() * theta_r.sin();
    if s <= 0.0 {
        return if c >= 0.0 { 1.0 } else { 0.0 };
    }
    let x = -c / s;
    if x <= -1.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        x.acos() / PI
    }
}

fn check_theta(theta1: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta1) {
        return Err(Error::invalid(format!("theta1 must lie in [0, pi], got {theta1}")));
    }
    Ok(())
}

/// Probability of outcome `+1` for a spin whose noise-free direction makes
/// the angle `theta1` with `û_d`.
///
/// Evaluates `p₊ = (1/π)∫₀^π f(θ_R) α(θ_R) dθ_R`, where `α` is the azimuthal
/// arc landing in the upper hemisphere. The `1/sin θ_R` of the hemisphere
/// integrand cancels against the area element in these coordinates. The
/// integral is taken in the probability variable `u = 2F(θ_R)`, which
/// flattens the peak of `f` for small `φ₀`.
pub fn p_plus(theta1: f64, dist: &WrappedCauchy) -> Result<f64> {
    check_theta(theta1)?;
    let delta = (FRAC_PI_2 - theta1).abs();
    let mut breaks = vec![0.0, 2.0 * dist.half_cdf(delta), 2.0 * dist.half_cdf(PI - delta), 1.0];
    breaks.dedup();
    let r = quadrature::integrate(
        |u| hemisphere_fraction(dist.angle_at(u), theta1),
        &breaks,
        1e-13,
        0.0,
        2000,
    );
    if !(r.error <= QUADRATURE_ERROR_LIMIT) {
        return Err(Error::Computation(format!(
            "p_plus quadrature did not converge at theta1 = {theta1} (error estimate {:e})",
            r.error
        )));
    }
    Ok(r.value.clamp(0.0, 1.0))
}

/// Radius of the caps around `±n̂_{1R}` excluded from [`p_plus_hemisphere`].
pub const SINGULAR_CAP_RADIUS: f64 = 1e-4;

/// The raw hemisphere integral
/// `p₊ = (1/4π)∫₀^{π/2} dθ' sinθ' ∫₀^{2π} dφ' 4f(θ_R)/sin θ_R`.
///
/// The integrable singularities at `θ_R = 0` and `θ_R = π` are cut out with
/// caps of radius [`SINGULAR_CAP_RADIUS`]; each cap's probability mass is
/// known in closed form and is added back, weighted by the hemisphere share
/// at the cap's mid radius.
pub fn p_plus_hemisphere(theta1: f64, dist: &WrappedCauchy) -> Result<f64> {
    check_theta(theta1)?;
    let eps = SINGULAR_CAP_RADIUS;
    let (s1, c1) = theta1.sin_cos();

    let tilt = |theta_p: f64, phi_p: f64| {
        let (st, ct) = theta_p.sin_cos();
        let (sp, cp) = phi_p.sin_cos();
        let n = [st * cp, st * sp, ct];
        let dot = n[0] * s1 + n[2] * c1;
        let cross = [n[1] * c1, n[2] * s1 - n[0] * c1, -n[1] * s1];
        let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        cn.atan2(dot)
    };
    let integrand = |theta_p: f64, phi_p: f64| {
        let tr = tilt(theta_p, phi_p);
        if tr < eps || tr > PI - eps {
            0.0
        } else {
            wrapped_cauchy_pdf(tr, dist) / tr.sin()
        }
    };
    // azimuth at which the cap boundary around the polar angle `centre` is crossed
    let cap_edge = |theta_p: f64, centre: f64| -> Option<f64> {
        let denom = theta_p.sin() * centre.sin();
        if denom <= 0.0 {
            return None;
        }
        let x = (eps.cos() - theta_p.cos() * centre.cos()) / denom;
        (x.abs() < 1.0).then(|| x.acos())
    };

    let mut worst_inner: f64 = 0.0;
    let mut inner = |theta_p: f64| {
        let mut breaks = vec![-PI, 0.0, PI];
        if let Some(a) = cap_edge(theta_p, theta1) {
            breaks.extend([-a, a]);
        }
        // the antipodal cap sits at azimuth π
        if let Some(a) = cap_edge(theta_p, PI - theta1) {
            breaks.extend([PI - a, a - PI]);
        }
        breaks.sort_by(f64::total_cmp);
        let r = quadrature::integrate(|p| integrand(theta_p, p), &breaks, 1e-11, 1e-10, 4000);
        worst_inner = worst_inner.max(r.error);
        theta_p.sin() * r.value
    };

    let mut breaks = vec![0.0, FRAC_PI_2];
    for centre in [theta1, PI - theta1] {
        for b in [centre - eps, centre, centre + eps] {
            if b > 0.0 && b < FRAC_PI_2 {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let outer = quadrature::integrate(&mut inner, &breaks, 1e-9, 1e-9, 4000);
    let error = outer.error + worst_inner;
    if !(error <= QUADRATURE_ERROR_LIMIT) {
        return Err(Error::Computation(format!(
            "hemisphere quadrature did not converge at theta1 = {theta1} (error estimate {error:e})"
        )));
    }

    let near_mass = 2.0 * dist.half_cdf(eps);
    let far_mass = 1.0 - 2.0 * dist.half_cdf(PI - eps);
    let caps = near_mass * hemisphere_fraction(0.5 * eps, theta1)
        + far_mass * hemisphere_fraction(PI - 0.5 * eps, theta1);
    Ok((outer.value / PI + caps).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub p: f64,
    pub std_error: f64,
    pub samples: u64,
}

const MC_CHUNK: u64 = 1 << 16;

/// Samples explicit rotations of `n̂_{1R}`: a rotation angle drawn by wrapping
/// a Cauchy(0, φ₀) variate (inverse-CDF sampled) onto `(−π, π]`, about an axis
/// drawn uniformly from the circle normal to `n̂_{1R}`. Deterministic in
/// `seed` regardless of thread count.
pub fn p_plus_monte_carlo(theta1: f64, dist: &WrappedCauchy, samples: u64, seed: u64) -> Result<MonteCarloEstimate> {
    check_theta(theta1)?;
    if samples == 0 {
        return Err(Error::invalid("Monte-Carlo sample count must be positive"));
    }
    let v = [theta1.sin(), 0.0, theta1.cos()];
    let e1 = [theta1.cos(), 0.0, -theta1.sin()];
    let e2 = [0.0, 1.0, 0.0];
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let n = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let mut hits = 0u64;
            for _ in 0..n {
                let u: f64 = rng.random();
                let x = dist.phi0 * (PI * (u - 0.5)).tan();
                let angle = (x + PI).rem_euclid(2.0 * PI) - PI;
                let beta = 2.0 * PI * rng.random::<f64>();
                let (sb, cb) = beta.sin_cos();
                let axis = [cb * e1[0] + sb * e2[0], cb * e1[1] + sb * e2[1], cb * e1[2] + sb * e2[2]];
                let (sa, ca) = angle.sin_cos();
                // Rodrigues: v cosα + (a×v) sinα + a(a·v)(1 − cosα)
                let axv = [
                    axis[1] * v[2] - axis[2] * v[1],
                    axis[2] * v[0] - axis[0] * v[2],
                    axis[0] * v[1] - axis[1] * v[0],
                ];
                let adv = axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2];
                let z = v[2] * ca + axv[2] * sa + axis[2] * adv * (1.0 - ca);
                if z >= 0.0 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(MonteCarloEstimate { p, std_error: (p * (1.0 - p) / samples as f64).sqrt(), samples })
}

/// `cos²(θ₁/2)`.
pub fn born_rule(theta1: f64) -> f64 {
    (0.5 * theta1).cos().powi(2)
}

/// Noise-free outcome probability: 1 below the equator, 0 above, ½ on it.
pub fn noiseless_step(theta1: f64) -> f64 {
    if theta1 < FRAC_PI_2 {
        1.0
    } else if theta1 > FRAC_PI_2 {
        0.0
    } else {
        0.5
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseCurvePoint {
    pub theta1: f64,
    pub p_plus: f64,
    pub born: f64,
    pub step: f64,
}

pub fn noise_curve(dist: &WrappedCauchy, thetas: &[f64]) -> Result<Vec<NoiseCurvePoint>> {
    thetas
        .par_iter()
        .map(|&theta1| {
            Ok(NoiseCurvePoint {
                theta1,
                p_plus: p_plus(theta1, dist)?,
                born: born_rule(theta1),
                step: noiseless_step(theta1),
            })
        })
        .collect()
}

/// `n` equally spaced angles covering `[0, π]`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Total probability of the kicked direction over the whole sphere,
/// `(1/π)∮ f(θ_R)/sin θ_R dΩ = 2∫₀^π f`, by direct quadrature of the density.
pub fn sphere_normalization(dist: &WrappedCauchy) -> f64 {
    let w = dist.phi0.min(1.0);
    let breaks = [0.0, 0.1 * w, w, PI];
    let r = quadrature::integrate(|t| wrapped_cauchy_pdf(t, dist), &breaks, 1e-14, 1e-14, 2000);
    2.0 * r.value
}
