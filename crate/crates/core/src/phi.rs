//! The entire functions φ_k and the closed-form rotation operators.
//!
//! φ₀(z) = eᶻ and φ_{k+1}(z) = (φ_k(z) − 1/k!)/z, with φ_k(0) = 1/k!.
//! The two rotation families are the matrix functions of the planar
//! generator J = [[0, 1], [−1, 0]] and of the skew operator v ↦ v × n.

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{CpdError, Result};

/// Largest order accepted by [`phi`].
pub const MAX_PHI_ORDER: usize = 8;

/// Below this modulus φ_k is summed from its Taylor series.
///
/// The downward recurrence loses roughly log10(k!/|z|^k) digits, so the
/// switchover has to sit well above |z| = 1 to keep φ₈ accurate.
pub const SERIES_RADIUS: f64 = 4.0;

const FACTORIALS: [f64; 10] = [
    1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0, 40320.0, 362880.0,
];

pub fn factorial(k: usize) -> f64 {
    FACTORIALS
        .get(k)
        .copied()
        .unwrap_or_else(|| (1..=k).map(|i| i as f64).product())
}

/// A sampled value φ_k(z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub order: usize,
    pub argument: Complex64,
    pub value: Complex64,
}

impl PhiValue {
    pub fn new(order: usize, argument: Complex64) -> Self {
        PhiValue {
            order,
            argument,
            value: phi(order, argument),
        }
    }
}

/// Evaluates φ_k(z) for `k <= MAX_PHI_ORDER`.
///
/// Uses the Taylor series φ_k(z) = Σ_m z^m/(m+k)! for |z| < [`SERIES_RADIUS`]
/// and the recurrence from eᶻ otherwise.
pub fn phi(k: usize, z: Complex64) -> Complex64 {
    assert!(k <= MAX_PHI_ORDER, "phi order {k} exceeds {MAX_PHI_ORDER}");
    if k == 0 {
        return z.exp();
    }
    if z.norm() < SERIES_RADIUS {
        phi_series(k, z)
    } else {
        phi_recurrence(k, z)
    }
}

/// Taylor branch, valid for any z but only well conditioned for moderate |z|.
pub fn phi_series(k: usize, z: Complex64) -> Complex64 {
    let r = z.norm();
    let mut term = Complex64::new(1.0 / factorial(k), 0.0);
    let mut sum = term;
    for m in 1..200 {
        term *= z / (m + k) as f64;
        sum += term;
        if (m as f64) > r && term.norm() <= 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

/// Recurrence branch φ_{j+1} = (φ_j − 1/j!)/z starting from eᶻ.
pub fn phi_recurrence(k: usize, z: Complex64) -> Complex64 {
    let mut value = z.exp();
    for j in 0..k {
        value = (value - 1.0 / factorial(j)) / z;
    }
    value
}

/// The planar operators φ₀(sJ) and sφ₁(sJ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot2 {
    pub angle: f64,
    pub phi0: Matrix2<f64>,
    pub sphi1: Matrix2<f64>,
}

/// Closed forms of φ₀(sJ) and sφ₁(sJ); both are 2π-periodic in `s`.
pub fn rot2(s: f64) -> Rot2 {
    let (sn, cs) = s.sin_cos();
    Rot2 {
        angle: s,
        phi0: Matrix2::new(cs, sn, -sn, cs),
        sphi1: Matrix2::new(sn, 1.0 - cs, cs - 1.0, sn),
    }
}

/// The planar generator J.
pub fn j_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// exp(s·N̂) for the skew operator N̂v = v × n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3 {
    pub axis: Vector3<f64>,
    pub angle: f64,
    pub matrix: Matrix3<f64>,
}

/// Matrix of v ↦ v × n.
pub fn cross_operator(n: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, n.z, -n.y, -n.z, 0.0, n.x, n.y, -n.x, 0.0)
}

/// Rotation exp(s·N̂) with N̂v = v × n, via the axis–angle formula.
///
/// For n = e_z this acts as `rot2(s).phi0` on the x–y plane.
pub fn rot3(n: &Vector3<f64>, s: f64) -> Result<Rot3> {
    let norm = n.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(CpdError::NonUnitAxis { norm });
    }
    Ok(rot3_unchecked(n, s))
}

pub(crate) fn rot3_unchecked(n: &Vector3<f64>, s: f64) -> Rot3 {
    let k = cross_operator(n);
    let (sn, cs) = s.sin_cos();
    let matrix = Matrix3::identity() + k * sn + k * k * (1.0 - cs);
    Rot3 {
        axis: *n,
        angle: s,
        matrix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{E, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phi_closed_forms() {
        assert_eq!(phi(0, c(0.0, 0.0)), c(1.0, 0.0));
        let v = phi(1, c(0.0, PI));
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(phi(2, c(0.0, 0.0)).re, 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(phi(3, c(1.0, 0.0)).re, E - 2.5, epsilon = 1e-15);
        for k in 0..=MAX_PHI_ORDER {
            assert_abs_diff_eq!(phi(k, c(0.0, 0.0)).re, 1.0 / factorial(k), epsilon = 1e-18);
        }
    }

    // Frozen from 40-digit quadrature of ∫₀¹ θ^{k−1} e^{(1−θ)z}/(k−1)! dθ.
    #[test]
    fn phi_matches_quadrature_values() {
        let cases: [(usize, Complex64, f64, f64); 9] = [
            (4, c(0.0, 0.05), 0.041663194599450059329, 0.00041664186594051175659),
            (6, c(0.0, 3.0), 0.0011865466345685122871, 0.0005265843510838584059),
            (8, c(0.0, 4.5), 0.000019989589342837992126, 0.00001038768693453577062),
            (2, c(-0.7, 0.2), 0.40008985790517128781, 0.023736511556332140479),
            (5, c(0.0, 20.0), 0.00041070196205751905031, 0.0020210183076890166483),
            (4, c(0.0, 1000.0), 4.999995623790762907e-7, 0.0001666656674935462072),
            (3, c(0.0, 1e-6), 0.16666666666665833333, 4.1666666666665275892e-8),
            (8, c(0.5, 0.0), 0.000026251613757974206983, 0.0),
            (3, c(1.0, 0.0), 0.21828182845904523536, 0.0),
        ];
        for (k, z, re, im) in cases {
            let v = phi(k, z);
            let scale = re.abs().max(im.abs());
            assert!(
                (v.re - re).abs() <= 1e-13 * scale && (v.im - im).abs() <= 1e-13 * scale,
                "phi_{k}({z}) = {v}, expected {re} + {im}i"
            );
        }
    }

    #[test]
    fn recurrence_residual_on_imaginary_axis() {
        let mut x = 1e-8;
        while x <= 1e3 {
            let z = c(0.0, x);
            for k in 0..=6 {
                let lhs = z * phi(k + 1, z) + 1.0 / factorial(k);
                let rhs = phi(k, z);
                let tol = 1e-13 * rhs.norm().max(1.0);
                assert!((lhs - rhs).norm() <= tol, "k={k} x={x}");
            }
            x *= 1.37;
        }
    }

    #[test]
    fn branches_agree_near_switchover() {
        for k in 1..=MAX_PHI_ORDER {
            for &r in &[0.8 * SERIES_RADIUS, SERIES_RADIUS, 1.25 * SERIES_RADIUS] {
                for &theta in &[0.0, 0.7, PI / 2.0, 2.0, PI] {
                    let z = Complex64::from_polar(r, theta);
                    let a = phi_series(k, z);
                    let b = phi_recurrence(k, z);
                    assert!(
                        (a - b).norm() <= 1e-12 * a.norm().max(1e-300),
                        "k={k} z={z}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn phi0_unimodular_on_imaginary_axis() {
        for x in [-50.0, -1.0, 0.3, 7.0, 1e4] {
            assert_abs_diff_eq!(phi(0, c(0.0, x)).norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn rot2_reference_angles() {
        let r = rot2(0.0);
        assert_eq!(r.phi0, Matrix2::identity());
        assert_eq!(r.sphi1, Matrix2::zeros());

        let r = rot2(PI);
        assert_abs_diff_eq!(r.phi0, -Matrix2::identity(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.sphi1, Matrix2::new(0.0, 2.0, -2.0, 0.0), epsilon = 1e-15);

        let r = rot2(PI / 2.0);
        assert_abs_diff_eq!(r.phi0, Matrix2::new(0.0, 1.0, -1.0, 0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(r.sphi1, Matrix2::new(1.0, 1.0, -1.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn rot2_is_the_matrix_function_of_j() {
        // sφ₁(sJ) = (e^{sJ} − I)J⁻¹ and J⁻¹ = −J.
        let j = j_matrix();
        for s in [-3.0, 0.4, 2.5, 11.0] {
            let r = rot2(s);
            let expected = (r.phi0 - Matrix2::identity()) * (-j);
            assert_abs_diff_eq!(r.sphi1, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn rot3_about_ez_is_planar_block() {
        let ez = Vector3::z();
        for s in [0.0, 0.3, -2.0, 5.5] {
            let r = rot3(&ez, s).unwrap().matrix;
            let p = rot2(s).phi0;
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(r[(i, j)], p[(i, j)], epsilon = 1e-15);
                }
            }
            assert_abs_diff_eq!(r[(2, 2)], 1.0, epsilon = 1e-15);
        }
        let full = rot3(&ez, 2.0 * PI).unwrap().matrix;
        assert_abs_diff_eq!(full, Matrix3::identity(), epsilon = 1e-13);
        assert_eq!(rot3(&ez, 0.0).unwrap().matrix, Matrix3::identity());
    }

    #[test]
    fn rot3_rejects_non_unit_axis() {
        let err = rot3(&Vector3::new(1.0, 1.0, 0.0), 1.0).unwrap_err();
        assert!(matches!(err, CpdError::NonUnitAxis { .. }));
    }
}
