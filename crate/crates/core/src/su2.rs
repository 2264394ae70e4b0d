//! Closed-form SU(2) algebra for single spin-1/2 propagators.
//!
//! Elements are stored as the first row `(a, b)` of
//! `[[a, b], [-conj(b), conj(a)]]`, which keeps products and powers cheap
//! enough for the inner loops of the memory census.

use num_complex::Complex64;

/// A special-unitary 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Su2 {
    pub a: Complex64,
    pub b: Complex64,
}

impl Su2 {
    pub const IDENTITY: Su2 = Su2 {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
    };

    /// Propagator `exp(-i t (h · I))` for a spin-1/2 with `I = σ/2` in a
    /// field `h` given in rad/s.
    pub fn evolve(h: [f64; 3], t: f64) -> Su2 {
        let norm = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        if norm == 0.0 {
            return Su2::IDENTITY;
        }
        let half = 0.5 * norm * t;
        let (s, c) = half.sin_cos();
        let k = s / norm;
        Su2 {
            a: Complex64::new(c, -k * h[2]),
            b: Complex64::new(-k * h[1], -k * h[0]),
        }
    }

    /// Rotation by `angle` about the unit vector `axis`.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Su2 {
        let (s, c) = (0.5 * angle).sin_cos();
        Su2 {
            a: Complex64::new(c, -s * axis[2]),
            b: Complex64::new(-s * axis[1], -s * axis[0]),
        }
    }

    #[inline]
    pub fn mul(self, rhs: Su2) -> Su2 {
        Su2 {
            a: self.a * rhs.a - self.b * rhs.b.conj(),
            b: self.a * rhs.b + self.b * rhs.a.conj(),
        }
    }

    #[inline]
    pub fn adjoint(self) -> Su2 {
        Su2 {
            a: self.a.conj(),
            b: -self.b,
        }
    }

    /// `self^m` by repeated squaring.
    pub fn pow(self, mut m: u32) -> Su2 {
        let mut acc = Su2::IDENTITY;
        let mut base = self;
        while m > 0 {
            if m & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            m >>= 1;
        }
        acc
    }

    /// `Tr(self)`, which is always real for SU(2).
    #[inline]
    pub fn trace(self) -> f64 {
        2.0 * self.a.re
    }

    /// `Tr(self† · other)` (real for SU(2)).
    #[inline]
    pub fn overlap(self, other: Su2) -> f64 {
        self.adjoint().mul(other).trace()
    }

    /// Decomposes `self = cos φ · 1 − i sin φ (n · σ)` with `φ ∈ [0, π]`.
    ///
    /// When `sin φ` vanishes the axis is undefined and `ẑ` is returned.
    pub fn axis_angle(self) -> ([f64; 3], f64) {
        let nx = -self.b.im;
        let ny = -self.b.re;
        let nz = -self.a.im;
        let s = (nx * nx + ny * ny + nz * nz).sqrt();
        let phi = s.atan2(self.a.re);
        if s < 1e-300 {
            return ([0.0, 0.0, 1.0], phi);
        }
        ([nx / s, ny / s, nz / s], phi)
    }

    /// Dense matrix form, row-major.
    pub fn to_matrix(self) -> [[Complex64; 2]; 2] {
        [[self.a, self.b], [-self.b.conj(), self.a.conj()]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Su2, b: Su2, tol: f64) -> bool {
        (a.a - b.a).norm() < tol && (a.b - b.b).norm() < tol
    }

    #[test]
    fn evolve_matches_rotation_about_field() {
        let h = [3.0, -1.0, 2.0];
        let n = (14.0f64).sqrt();
        let u = Su2::evolve(h, 0.7);
        let r = Su2::rotation([h[0] / n, h[1] / n, h[2] / n], n * 0.7);
        assert!(close(u, r, 1e-14));
    }

    #[test]
    fn axis_angle_roundtrip() {
        let axis = [0.6, 0.0, 0.8];
        let u = Su2::rotation(axis, 2.0);
        let (n, phi) = u.axis_angle();
        assert!((phi - 1.0).abs() < 1e-14);
        for i in 0..3 {
            assert!((n[i] - axis[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn pow_matches_angle_multiplication() {
        let u = Su2::rotation([0.0, 1.0, 0.0], 0.3);
        let p = u.pow(7);
        assert!(close(p, Su2::rotation([0.0, 1.0, 0.0], 2.1), 1e-13));
        assert!(close(u.pow(0), Su2::IDENTITY, 1e-15));
    }

    #[test]
    fn full_turn_is_minus_identity() {
        let u = Su2::rotation([1.0, 0.0, 0.0], 2.0 * PI);
        assert!((u.a.re + 1.0).abs() < 1e-14);
        let (_, phi) = u.axis_angle();
        assert!((phi - PI).abs() < 1e-7);
    }

    #[test]
    fn product_with_adjoint_is_identity() {
        let u = Su2::evolve([1.0, 2.0, 3.0], 0.4);
        assert!(close(u.mul(u.adjoint()), Su2::IDENTITY, 1e-14));
        assert!((u.overlap(u) - 2.0).abs() < 1e-14);
    }
}
