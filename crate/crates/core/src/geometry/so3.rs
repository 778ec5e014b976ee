//! Rotation group: polar projection, orthogonality defect and geodesic distance.
//!
//! Projection uses the SVD of the ambient matrix, obtained from a cyclic
//! Jacobi eigendecomposition of `AᵀA`. Only the two dominant left singular
//! vectors are formed from `A`; the third column is their cross product, which
//! yields the determinant-corrected nearest rotation directly.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Smallest singular value accepted by [`project_so3`].
pub const MIN_SINGULAR_VALUE: f64 = 1e-12;

/// Defect below which a matrix is treated as a rotation by the distance
/// functions.
pub const ON_MANIFOLD_TOL: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 64;

/// A matrix known to lie on SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps `m` after checking its orthogonality defect.
    pub fn try_new(m: Matrix3<f64>) -> Result<Self> {
        let d = defect_so3(&m)?;
        if d > ON_MANIFOLD_TOL {
            return Err(Error::OffManifold { defect: d });
        }
        Ok(Rotation(m))
    }

    /// Rodrigues formula. `axis` need not be normalized; a zero axis gives the
    /// identity.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Rotation::identity();
        }
        let k = skew(&(axis / n));
        let m = Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos());
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }
}

/// Cross-product matrix of `w`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn all_finite(m: &Matrix3<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Eigendecomposition of a symmetric 3×3 matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in descending order with matching columns.
pub(crate) fn symmetric_eigen(m: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let mut a = *m;
    let mut v = Matrix3::<f64>::identity();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        let diag = a[(0, 0)].powi(2) + a[(1, 1)].powi(2) + a[(2, 2)].powi(2);
        if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            // a <- Jᵀ a J
            for k in 0..3 {
                let akp = a[(k, p)];
                let akq = a[(k, q)];
                a[(k, p)] = c * akp - s * akq;
                a[(k, q)] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[(p, k)];
                let aqk = a[(q, k)];
                a[(p, k)] = c * apk - s * aqk;
                a[(q, k)] = s * apk + c * aqk;
            }
            for k in 0..3 {
                let vkp = v[(k, p)];
                let vkq = v[(k, q)];
                v[(k, p)] = c * vkp - s * vkq;
                v[(k, q)] = s * vkp + c * vkq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let vals = Vector3::new(a[(order[0], order[0])], a[(order[1], order[1])], a[(order[2], order[2])]);
    let vecs = Matrix3::from_columns(&[v.column(order[0]), v.column(order[1]), v.column(order[2])]);
    (vals, vecs)
}

/// Singular values of `a` in descending order. The smallest one is recovered
/// from the determinant so it keeps relative accuracy for ill-conditioned input.
pub fn singular_values(a: &Matrix3<f64>) -> Vector3<f64> {
    let (vals, _) = symmetric_eigen(&(a.transpose() * a));
    let s1 = vals[0].max(0.0).sqrt();
    let s2 = vals[1].max(0.0).sqrt();
    let s3 = if s1 > 0.0 && s2 > 0.0 {
        a.determinant().abs() / (s1 * s2)
    } else {
        0.0
    };
    Vector3::new(s1, s2, s3)
}

/// Nearest rotation to `a` in Frobenius norm (polar factor with determinant
/// correction on the smallest singular direction).
pub fn project_so3(a: &Matrix3<f64>) -> Result<Rotation> {
    if !all_finite(a) {
        return Err(Error::non_finite("project_so3 input"));
    }
    let (vals, v) = symmetric_eigen(&(a.transpose() * a));
    let s1 = vals[0].max(0.0).sqrt();
    let s2 = vals[1].max(0.0).sqrt();
    let s3 = if s1 > 0.0 && s2 > 0.0 {
        a.determinant().abs() / (s1 * s2)
    } else {
        0.0
    };
    if !(s3 > MIN_SINGULAR_VALUE) {
        return Err(Error::Degenerate(format!(
            "rank-deficient matrix in SO(3) projection (sigma_min = {s3:.3e})"
        )));
    }

    let v1: Vector3<f64> = v.column(0).normalize();
    let v2 = {
        let raw: Vector3<f64> = v.column(1).into();
        (raw - v1 * v1.dot(&raw)).normalize()
    };
    let v3 = v1.cross(&v2);

    let u1 = (a * v1).normalize();
    let u2 = {
        let raw = a * v2;
        (raw - u1 * u1.dot(&raw)).normalize()
    };
    let u3 = u1.cross(&u2);

    let u = Matrix3::from_columns(&[u1, u2, u3]);
    let vm = Matrix3::from_columns(&[v1, v2, v3]);
    let r = u * vm.transpose();
    if !all_finite(&r) {
        return Err(Error::Degenerate("SO(3) projection produced non-finite output".into()));
    }
    Ok(Rotation(r))
}

/// `‖aᵀa − I‖_F + |det a − 1|`.
pub fn defect_so3(a: &Matrix3<f64>) -> Result<f64> {
    if !all_finite(a) {
        return Err(Error::non_finite("defect_so3 input"));
    }
    let gram = a.transpose() * a - Matrix3::identity();
    Ok(gram.norm() + (a.determinant() - 1.0).abs())
}

/// Rotation angle of `m`, assumed orthogonal. The cosine term is clamped to
/// `[-1, 1]`; the sine term comes from the skew part so small angles keep full
/// precision.
pub fn rotation_angle(m: &Matrix3<f64>) -> f64 {
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let w = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = 0.5 * w.norm();
    sin.atan2(cos)
}

/// Geodesic distance `‖log(r1ᵀ r2)‖_F / √2`, i.e. the relative rotation angle.
pub fn dist_so3(r1: &Matrix3<f64>, r2: &Matrix3<f64>) -> Result<f64> {
    for r in [r1, r2] {
        let d = defect_so3(r)?;
        if d > ON_MANIFOLD_TOL {
            return Err(Error::OffManifold { defect: d });
        }
    }
    Ok(rotation_angle(&(r1.transpose() * r2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_and_scaling() {
        let r = project_so3(&Matrix3::identity()).unwrap();
        assert_abs_diff_eq!(*r.matrix(), Matrix3::identity(), epsilon = 1e-15);
        let r = project_so3(&(Matrix3::identity() * 2.0)).unwrap();
        assert_abs_diff_eq!(*r.matrix(), Matrix3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn defect_of_scaled_identity() {
        let d = defect_so3(&(Matrix3::identity() * 2.0)).unwrap();
        assert_abs_diff_eq!(d, 3.0 * 3f64.sqrt() + 7.0, epsilon = 1e-12);
        assert_eq!(defect_so3(&Matrix3::identity()).unwrap(), 0.0);
    }

    #[test]
    fn reflection_is_corrected() {
        let a = Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, -0.5));
        let r = project_so3(&a).unwrap();
        // smallest singular direction (z) gets flipped back to +1
        assert_abs_diff_eq!(*r.matrix(), Matrix3::identity(), epsilon = 1e-14);
        assert!(defect_so3(r.matrix()).unwrap() < 1e-12);
    }

    #[test]
    fn singular_and_non_finite_inputs_fail() {
        let a = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(project_so3(&a), Err(Error::Degenerate(_))));
        let mut b = Matrix3::identity();
        b[(1, 1)] = f64::NAN;
        assert!(matches!(project_so3(&b), Err(Error::NonFinite { .. })));
        assert!(defect_so3(&b).is_err());
    }

    #[test]
    fn distances() {
        let z = Vector3::z();
        let rz = Rotation::from_axis_angle(&z, std::f64::consts::PI);
        let d = dist_so3(&Matrix3::identity(), rz.matrix()).unwrap();
        assert_abs_diff_eq!(d, std::f64::consts::PI, epsilon = 1e-12);

        let axis = Vector3::new(0.3, -1.2, 0.7);
        let r = Rotation::from_axis_angle(&axis, 0.3);
        assert_abs_diff_eq!(dist_so3(&Matrix3::identity(), r.matrix()).unwrap(), 0.3, epsilon = 1e-12);
        assert_eq!(dist_so3(r.matrix(), r.matrix()).unwrap(), 0.0);
    }

    #[test]
    fn distance_rejects_off_manifold() {
        let a = Matrix3::identity() * 1.1;
        assert!(matches!(
            dist_so3(&a, &Matrix3::identity()),
            Err(Error::OffManifold { .. })
        ));
    }

    #[test]
    fn jacobi_recovers_spectrum() {
        let m = Matrix3::new(4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0);
        let (vals, vecs) = symmetric_eigen(&m);
        let recon = vecs * Matrix3::from_diagonal(&vals) * vecs.transpose();
        assert_abs_diff_eq!(recon, m, epsilon = 1e-12);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
    }
}
