//! Graph-of-a-function constraint `z = f(u, v)` over a smooth height field.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainPoint {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl TerrainPoint {
    pub fn new(u: f64, v: f64, z: f64) -> Self {
        TerrainPoint { u, v, z }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.z.is_finite()
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.z)
    }
}

/// `f(u,v) = A sin(ωu) cos(ωv) + A_r exp(-κ (u - c(v))²)` with ridge center
/// line `c(v) = c₀ + c₁ sin(k v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightField {
    pub amplitude: f64,
    pub frequency: f64,
    pub ridge_amplitude: f64,
    pub ridge_sharpness: f64,
    pub ridge_offset: f64,
    pub ridge_sway: f64,
    pub ridge_wavenumber: f64,
}

impl HeightField {
    pub fn flat() -> Self {
        HeightField {
            amplitude: 0.0,
            frequency: 0.0,
            ridge_amplitude: 0.0,
            ridge_sharpness: 0.0,
            ridge_offset: 0.0,
            ridge_sway: 0.0,
            ridge_wavenumber: 0.0,
        }
    }

    fn ridge_center(&self, v: f64) -> f64 {
        self.ridge_offset + self.ridge_sway * (self.ridge_wavenumber * v).sin()
    }

    pub fn height(&self, u: f64, v: f64) -> f64 {
        let base = self.amplitude * (self.frequency * u).sin() * (self.frequency * v).cos();
        if self.ridge_amplitude == 0.0 {
            return base;
        }
        let du = u - self.ridge_center(v);
        base + self.ridge_amplitude * (-self.ridge_sharpness * du * du).exp()
    }

    pub fn gradient(&self, u: f64, v: f64) -> Vector2<f64> {
        let (w, a) = (self.frequency, self.amplitude);
        let mut gu = a * w * (w * u).cos() * (w * v).cos();
        let mut gv = -a * w * (w * u).sin() * (w * v).sin();
        if self.ridge_amplitude != 0.0 {
            let du = u - self.ridge_center(v);
            let bump = self.ridge_amplitude * (-self.ridge_sharpness * du * du).exp();
            let dc = self.ridge_sway * self.ridge_wavenumber * (self.ridge_wavenumber * v).cos();
            gu += -2.0 * self.ridge_sharpness * du * bump;
            gv += 2.0 * self.ridge_sharpness * du * dc * bump;
        }
        Vector2::new(gu, gv)
    }
}

pub fn project_terrain(pt: &TerrainPoint, field: &HeightField) -> Result<TerrainPoint> {
    if !pt.is_finite() {
        return Err(Error::non_finite("project_terrain input"));
    }
    Ok(TerrainPoint {
        u: pt.u,
        v: pt.v,
        z: field.height(pt.u, pt.v),
    })
}

/// Vertical deviation `|z − f(u,v)|`.
pub fn defect_terrain(pt: &TerrainPoint, field: &HeightField) -> Result<f64> {
    if !pt.is_finite() {
        return Err(Error::non_finite("defect_terrain input"));
    }
    Ok((pt.z - field.height(pt.u, pt.v)).abs())
}

/// Ambient Euclidean distance.
pub fn dist_terrain(a: &TerrainPoint, b: &TerrainPoint) -> f64 {
    (a.as_vector() - b.as_vector()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ridged() -> HeightField {
        HeightField {
            amplitude: 0.5,
            frequency: 0.8,
            ridge_amplitude: 1.5,
            ridge_sharpness: 4.0,
            ridge_offset: 0.5,
            ridge_sway: 0.3,
            ridge_wavenumber: 0.7,
        }
    }

    #[test]
    fn flat_field_projects_to_zero() {
        let p = project_terrain(&TerrainPoint::new(1.5, -2.0, 7.0), &HeightField::flat()).unwrap();
        assert_eq!(p, TerrainPoint::new(1.5, -2.0, 0.0));
    }

    #[test]
    fn height_matches_hand_evaluation() {
        let f = ridged();
        let p = project_terrain(&TerrainPoint::new(1.0, 2.0, 99.0), &f).unwrap();
        // c(2) = 0.5 + 0.3 sin(1.4); u - c = 0.5 - 0.3 sin(1.4)
        let c = 0.5 + 0.3 * (1.4f64).sin();
        let expected = 0.5 * (0.8f64).sin() * (1.6f64).cos() + 1.5 * (-4.0 * (1.0 - c) * (1.0 - c)).exp();
        assert_eq!((p.u, p.v), (1.0, 2.0));
        assert_abs_diff_eq!(p.z, expected, epsilon = 1e-14);
    }

    #[test]
    fn defect_is_vertical_offset() {
        let f = ridged();
        let z = f.height(0.3, -1.1);
        assert_eq!(defect_terrain(&TerrainPoint::new(0.3, -1.1, z), &f).unwrap(), 0.0);
        assert_abs_diff_eq!(
            defect_terrain(&TerrainPoint::new(0.3, -1.1, z + 0.7), &f).unwrap(),
            0.7,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = ridged();
        let eps = 1e-6;
        for &(u, v) in &[(0.2, 0.4), (0.9, -1.3), (2.5, 3.1)] {
            let g = f.gradient(u, v);
            let gu = (f.height(u + eps, v) - f.height(u - eps, v)) / (2.0 * eps);
            let gv = (f.height(u, v + eps) - f.height(u, v - eps)) / (2.0 * eps);
            assert_abs_diff_eq!(g.x, gu, epsilon = 1e-7);
            assert_abs_diff_eq!(g.y, gv, epsilon = 1e-7);
        }
    }

    #[test]
    fn non_finite_rejected() {
        let f = ridged();
        assert!(project_terrain(&TerrainPoint::new(f64::NAN, 0.0, 0.0), &f).is_err());
        assert!(defect_terrain(&TerrainPoint::new(0.0, f64::INFINITY, 0.0), &f).is_err());
    }
}
