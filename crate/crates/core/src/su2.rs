//! 2×2 unitaries on a single nuclear spin.
//!
//! Rotation convention: `R_n(α) = exp(−i α n·σ/2) = cos(α/2) I − i sin(α/2) n·σ`.

use std::ops::Mul;

use nalgebra::Matrix2;
use num_complex::Complex64;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2(pub Matrix2<C64>);

impl Unitary2 {
    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    pub fn from_rows(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self(Matrix2::new(a, b, c, d))
    }

    /// `cos(α/2) I − i sin(α/2) n·σ` for a unit axis `n`.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_quaternion(c, [s * axis[0], s * axis[1], s * axis[2]])
    }

    /// `q0 I − i (q·σ)`.
    pub fn from_quaternion(q0: f64, q: [f64; 3]) -> Self {
        let [x, y, z] = q;
        Self(Matrix2::new(C64::new(q0, -z), C64::new(-y, -x), C64::new(y, -x), C64::new(q0, z)))
    }

    pub fn rx(angle: f64) -> Self {
        Self::rotation([1.0, 0.0, 0.0], angle)
    }

    pub fn rz(angle: f64) -> Self {
        let h = 0.5 * angle;
        Self(Matrix2::new(C64::from_polar(1.0, -h), ZERO, ZERO, C64::from_polar(1.0, h)))
    }

    pub fn pauli_x() -> Self {
        Self(Matrix2::new(ZERO, ONE, ONE, ZERO))
    }

    pub fn pauli_y() -> Self {
        Self(Matrix2::new(ZERO, -I, I, ZERO))
    }

    pub fn pauli_z() -> Self {
        Self(Matrix2::new(ONE, ZERO, ZERO, -ONE))
    }

    pub fn scale(self, c: C64) -> Self {
        Self(self.0 * c)
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0[(0, 0)] + self.0[(1, 1)]
    }

    pub fn det(&self) -> C64 {
        self.0[(0, 0)] * self.0[(1, 1)] - self.0[(0, 1)] * self.0[(1, 0)]
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.0[(r, c)]
    }

    /// `max |(U†U − I)_ij|`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.0.adjoint() * self.0 - Matrix2::identity();
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entry-wise distance after removing the best global phase.
    pub fn phase_distance(&self, other: &Self) -> f64 {
        let overlap = (self.0.adjoint() * other.0).trace();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        self.scale(phase).max_abs_diff(other)
    }

    /// Split into a global phase `e^{iα}` and SU(2) quaternion `(q0, q)`
    /// with `U = e^{iα} (q0 I − i q·σ)`.
    ///
    /// The phase is taken from the principal square root of the determinant, so
    /// an exact SU(2) input comes back with `α = 0`.
    pub fn su2_parts(&self) -> (C64, f64, [f64; 3]) {
        let phase = self.det().sqrt();
        let phase = if phase.norm() > 0.0 { phase / phase.norm() } else { ONE };
        let w = self.0 / phase;
        let a = 0.5 * (w[(0, 0)] + w[(1, 1)].conj());
        let b = 0.5 * (w[(0, 1)] - w[(1, 0)].conj());
        // a = q0 − i z, b = −y − i x
        (phase, a.re, [-b.im, -b.re, -a.im])
    }

    /// Integer power via axis–angle, exact to rounding for any exponent.
    pub fn pow(&self, k: u32) -> Self {
        match k {
            0 => return Self::identity(),
            1 => return *self,
            _ => {}
        }
        let (phase, q0, q) = self.su2_parts();
        let s = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        let half = s.atan2(q0);
        let kh = half * k as f64;
        let global = phase.powu(k);
        if s < 1e-300 {
            // ±I
            return Self::identity().scale(global * C64::new(kh.cos(), 0.0));
        }
        let (sk, ck) = kh.sin_cos();
        let f = sk / s;
        Self::from_quaternion(ck, [f * q[0], f * q[1], f * q[2]]).scale(global)
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl Mul for &Unitary2 {
    type Output = Unitary2;
    fn mul(self, rhs: Self) -> Unitary2 {
        Unitary2(self.0 * rhs.0)
    }
}
