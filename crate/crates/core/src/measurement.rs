//! Local beamsplitter observables and the unrestricted two-level baseline.
//!
//! A party's two input modes `a`, `b` feed a beamsplitter with outputs
//!
//! ```text
//! c = cos(θ) a + sin(θ) e^{-iφ} b
//! d = sin(θ) a - cos(θ) e^{-iφ} b
//! ```
//!
//! and number-resolving detectors on `c`, `d`. A count `(ñ, m̃)` is binned to
//! `ε(ñ, m̃) = (-1)^{m̃ + T(T+1)/2}` with `T = ñ + m̃`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::fock::{LocalOperator, LocalSpace};

/// Beamsplitter mixing angle `theta` and phase `phi`, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    pub theta: f64,
    pub phi: f64,
}

impl MeasurementSetting {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Same observable with `theta` in `[0, π)` and `phi` in `[0, 2π)`.
    ///
    /// `theta -> theta + π` flips the sign of both output creation operators,
    /// which leaves every projector unchanged.
    pub fn canonical(&self) -> Self {
        Self { theta: self.theta.rem_euclid(PI), phi: self.phi.rem_euclid(2.0 * PI) }
    }
}

/// Polar angle and azimuth of a ±1 observable on `{|0>, |1>}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSetting {
    pub polar: f64,
    pub azimuth: f64,
}

impl QubitSetting {
    pub fn new(polar: f64, azimuth: f64) -> Self {
        Self { polar, azimuth }
    }
}

/// Binning of a detector count pair to ±1.
pub fn binning(n_out: usize, m_out: usize) -> i32 {
    let t = n_out + m_out;
    if (m_out + t * (t + 1) / 2).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Output Fock state `|ñ, m̃>` expanded over the inputs `|p, T-p>`,
/// `T = ñ + m̃`. Entry `q` of the result is the coefficient on
/// `|T-q, q>`, matching the block order of [`LocalSpace`].
pub fn output_state(setting: MeasurementSetting, n_out: usize, m_out: usize) -> Vec<C64> {
    let total = n_out + m_out;
    let (s, c) = setting.theta.sin_cos();
    let e = C64::from_polar(1.0, setting.phi);
    let mut by_a = vec![C64::new(0.0, 0.0); total + 1];
    // (c†)^ñ = Σ_i C(ñ,i) (cos a†)^i (sin e b†)^{ñ-i}
    // (d†)^m̃ = Σ_j C(m̃,j) (sin a†)^j (-cos e b†)^{m̃-j}
    for i in 0..=n_out {
        let ci = binomial(n_out, i) * c.powi(i as i32) * s.powi((n_out - i) as i32);
        for j in 0..=m_out {
            let cj = binomial(m_out, j) * s.powi(j as i32) * (-c).powi((m_out - j) as i32);
            let b_count = total - i - j;
            by_a[i + j] += e.powi(b_count as i32) * (ci * cj);
        }
    }
    let norm = (factorial(n_out) * factorial(m_out)).sqrt();
    let mut out = vec![C64::new(0.0, 0.0); total + 1];
    for (p, coeff) in by_a.into_iter().enumerate() {
        let q = total - p;
        out[q] = coeff * ((factorial(p) * factorial(q)).sqrt() / norm);
    }
    out
}

/// `O(φ, θ) = Σ_{ñ+m̃ ≤ N} ε(ñ, m̃) |ñ, m̃><ñ, m̃|` on a two-mode local space
/// truncated at `cap` particles.
pub fn local_observable(setting: MeasurementSetting, cap: usize) -> LocalOperator {
    let space = LocalSpace::new(2, cap);
    let matrix = local_observable_matrix(setting, cap);
    LocalOperator { space, matrix }
}

pub(crate) fn local_observable_matrix(setting: MeasurementSetting, cap: usize) -> DMatrix<C64> {
    let d = (cap + 1) * (cap + 2) / 2;
    let mut m = DMatrix::zeros(d, d);
    for total in 0..=cap {
        let start = total * (total + 1) / 2;
        for n_out in 0..=total {
            let m_out = total - n_out;
            let eps = binning(n_out, m_out) as f64;
            let v = output_state(setting, n_out, m_out);
            for (r, vr) in v.iter().enumerate() {
                for (c, vc) in v.iter().enumerate() {
                    m[(start + r, start + c)] += vr * vc.conj() * eps;
                }
            }
        }
    }
    m
}

/// `cos α σ_z + sin α (cos β σ_x + sin β σ_y)` in the occupation basis
/// `{|0>, |1>}` of a single mode.
pub fn qubit_observable(setting: QubitSetting) -> LocalOperator {
    LocalOperator { space: LocalSpace::new(1, 1), matrix: qubit_observable_matrix(setting) }
}

pub(crate) fn qubit_observable_matrix(setting: QubitSetting) -> DMatrix<C64> {
    let (s, c) = setting.polar.sin_cos();
    let off = C64::from_polar(s, setting.azimuth);
    DMatrix::from_row_slice(2, 2, &[C64::new(c, 0.0), off.conj(), off, C64::new(-c, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn binning_values() {
        assert_eq!(binning(0, 0), 1);
        assert_eq!(binning(1, 0), -1);
        assert_eq!(binning(0, 1), 1);
        assert_eq!(binning(2, 0), -1);
        assert_eq!(binning(1, 1), 1);
        assert_eq!(binning(0, 2), -1);
    }

    #[test]
    fn output_at_zero_angle_is_input() {
        let v = output_state(MeasurementSetting::new(0.0, 0.0), 1, 0);
        assert!(close(v[0], C64::new(1.0, 0.0)));
        assert!(close(v[1], C64::new(0.0, 0.0)));
    }

    #[test]
    fn single_particle_rows() {
        let (t, p) = (0.37, 1.21);
        let (s, c) = f64::sin_cos(t);
        let e = C64::from_polar(1.0, p);
        let v = output_state(MeasurementSetting::new(t, p), 1, 0);
        assert!(close(v[0], C64::new(c, 0.0)) && close(v[1], e * s));
        let v = output_state(MeasurementSetting::new(t, p), 0, 1);
        assert!(close(v[0], C64::new(s, 0.0)) && close(v[1], -e * c));
    }

    #[test]
    fn coincidence_row_at_real_phase() {
        let t = 0.61;
        let (s, c) = f64::sin_cos(t);
        let v = output_state(MeasurementSetting::new(t, 0.0), 1, 1);
        assert!(close(v[0], C64::new(SQRT_2 * c * s, 0.0)));
        assert!(close(v[1], C64::new(-(2.0 * t).cos(), 0.0)));
        assert!(close(v[2], C64::new(-SQRT_2 * c * s, 0.0)));
    }

    #[test]
    fn observable_is_diagonal_at_zero_angle() {
        let o = local_observable(MeasurementSetting::new(0.0, 0.7), 3);
        for i in 0..o.space.dimension() {
            for j in 0..o.space.dimension() {
                let occ = o.space.state(i);
                let expected = if i == j { binning(occ[0], occ[1]) as f64 } else { 0.0 };
                assert!(close(o.matrix[(i, j)], C64::new(expected, 0.0)));
            }
        }
    }

    #[test]
    fn coincidences_vanish_for_single_mode_pairs() {
        // |1,1> has no overlap with the (1,1) output at θ = π/4
        let v = output_state(MeasurementSetting::new(FRAC_PI_4, 0.0), 1, 1);
        assert!(v[1].norm() < 1e-15);
    }

    #[test]
    fn observable_squares_to_identity() {
        let o = local_observable(MeasurementSetting::new(1.1, 4.0), 4);
        let sq = &o.matrix * &o.matrix;
        let d = o.space.dimension();
        assert!((sq - DMatrix::<C64>::identity(d, d)).norm() < 1e-10);
    }

    #[test]
    fn qubit_observable_basics() {
        let z = qubit_observable_matrix(QubitSetting::new(0.0, 0.3));
        assert!(close(z[(0, 0)], C64::new(1.0, 0.0)) && close(z[(1, 1)], C64::new(-1.0, 0.0)));
        assert!(close(z[(0, 1)], C64::new(0.0, 0.0)));
        let q = qubit_observable_matrix(QubitSetting::new(0.9, 2.2));
        assert!((&q * &q - DMatrix::<C64>::identity(2, 2)).norm() < 1e-12);
        let x = qubit_observable_matrix(QubitSetting::new(FRAC_PI_2, 0.0));
        let plus = nalgebra::DVector::from_element(2, C64::new(1.0 / SQRT_2, 0.0));
        assert!((&x * &plus - &plus).norm() < 1e-12);
    }
}
