//! Embedded Dormand–Prince 5(4) integrator with adaptive step control.
//!
//! Works on any state that is a flat slice of [`OdeScalar`]s, which covers
//! both real Schmidt-coefficient vectors and complex amplitude vectors.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub trait OdeScalar:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn modulus(self) -> f64;
}

impl OdeScalar for f64 {
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

/// The step size dropped below the configured minimum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepUnderflow {
    pub t: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand & Prince (1980) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

pub struct DormandPrince<T: OdeScalar> {
    t: f64,
    h: f64,
    h_min: f64,
    tol: Tolerances,
    y: Vec<T>,
    k: [Vec<T>; 7],
    stage: Vec<T>,
    y_new: Vec<T>,
    fsal_valid: bool,
    stats: StepStats,
}

impl<T: OdeScalar> DormandPrince<T> {
    pub fn new(y0: Vec<T>, t0: f64, h0: f64, h_min: f64, tol: Tolerances) -> Self {
        let n = y0.len();
        let zeros = || vec![T::default(); n];
        Self {
            t: t0,
            h: h0,
            h_min,
            tol,
            y: y0,
            k: std::array::from_fn(|_| zeros()),
            stage: zeros(),
            y_new: zeros(),
            fsal_valid: false,
            stats: StepStats::default(),
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[T] {
        &self.y
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Replaces the current state (e.g. after an external projection).
    pub fn set_state(&mut self, y: &[T]) {
        self.y.copy_from_slice(y);
        self.fsal_valid = false;
    }

    fn combine(&mut self, y_coeffs: &[(usize, f64)], h: f64) {
        let n = self.y.len();
        for i in 0..n {
            let mut acc = T::default();
            for &(s, a) in y_coeffs {
                acc = acc + self.k[s][i] * a;
            }
            self.stage[i] = self.y[i] + acc * h;
        }
    }

    /// Integrates up to exactly `t_end`.
    ///
    /// After every accepted step `project` may modify the new state in place
    /// (returning `true` if it did), then `on_step` observes `(t, y)`.
    pub fn advance_to<F, P, O>(
        &mut self,
        t_end: f64,
        mut rhs: F,
        mut project: P,
        mut on_step: O,
    ) -> Result<(), StepUnderflow>
    where
        F: FnMut(f64, &[T], &mut [T]),
        P: FnMut(&mut [T]) -> bool,
        O: FnMut(f64, &[T]),
    {
        let n = self.y.len();
        let eps = 1e-14 * t_end.abs().max(1.0);
        while t_end - self.t > eps {
            if !self.fsal_valid {
                rhs(self.t, &self.y, &mut self.k[0]);
                self.stats.evaluations += 1;
                self.fsal_valid = true;
            }
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            if !last && self.h < self.h_min {
                return Err(StepUnderflow { t: self.t, step: self.h });
            }
            let h = if last { remaining } else { self.h };

            self.combine(&[(0, A21)], h);
            rhs(self.t + C2 * h, &self.stage, &mut self.k[1]);
            self.combine(&[(0, A31), (1, A32)], h);
            rhs(self.t + C3 * h, &self.stage, &mut self.k[2]);
            self.combine(&[(0, A41), (1, A42), (2, A43)], h);
            rhs(self.t + C4 * h, &self.stage, &mut self.k[3]);
            self.combine(&[(0, A51), (1, A52), (2, A53), (3, A54)], h);
            rhs(self.t + C5 * h, &self.stage, &mut self.k[4]);
            self.combine(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], h);
            rhs(self.t + h, &self.stage, &mut self.k[5]);
            self.combine(&[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], h);
            self.y_new.copy_from_slice(&self.stage);
            rhs(self.t + h, &self.y_new, &mut self.k[6]);
            self.stats.evaluations += 6;

            let mut err_sq = 0.0;
            for i in 0..n {
                let e = (self.k[0][i] * E1
                    + self.k[2][i] * E3
                    + self.k[3][i] * E4
                    + self.k[4][i] * E5
                    + self.k[5][i] * E6
                    + self.k[6][i] * E7)
                    * h;
                let scale = self.tol.abs
                    + self.tol.rel * self.y[i].modulus().max(self.y_new[i].modulus());
                let r = e.modulus() / scale;
                err_sq += r * r;
            }
            let err = (err_sq / n.max(1) as f64).sqrt();

            if err.is_finite() && err <= 1.0 {
                self.stats.accepted += 1;
                self.t = if last { t_end } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                if project(&mut self.y) {
                    self.fsal_valid = false;
                }
                on_step(self.t, &self.y);
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a clamped final step says nothing about the natural step size
                if !last || h * factor > self.h {
                    self.h = h * factor;
                }
            } else {
                self.stats.rejected += 1;
                let factor = if err.is_finite() {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    MIN_FACTOR
                };
                self.h = h * factor;
                if self.h < self.h_min {
                    return Err(StepUnderflow { t: self.t, step: self.h });
                }
            }
        }
        self.t = t_end;
        Ok(())
    }
}
