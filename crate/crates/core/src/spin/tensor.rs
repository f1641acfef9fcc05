use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a direction is a unit vector.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Rotation matrix for intrinsic z-y-z Euler angles given in degrees,
/// `R = Rz(alpha) · Ry(beta) · Rz(gamma)`.
pub fn euler_rotation(euler_deg: [f64; 3]) -> Matrix3<f64> {
    let [a, b, c] = euler_deg.map(f64::to_radians);
    rot_z(a) * rot_y(b) * rot_z(c)
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// A 3×3 coupling tensor (g, A or Q) together with the Euler angles that
/// rotate its principal frame into the crystal frame.
///
/// `g` is dimensionless; `A` and `Q` are stored in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTensor {
    pub matrix: Matrix3<f64>,
    pub frame_euler: [f64; 3],
}

impl InteractionTensor {
    pub fn new(matrix: Matrix3<f64>, frame_euler: [f64; 3]) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("tensor entries must be finite"));
        }
        if frame_euler.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("tensor frame angles must be finite"));
        }
        Ok(Self {
            matrix,
            frame_euler,
        })
    }

    pub fn isotropic(value: f64) -> Self {
        Self {
            matrix: Matrix3::identity() * value,
            frame_euler: [0.0; 3],
        }
    }

    pub fn from_principal(values: [f64; 3], frame_euler: [f64; 3]) -> Result<Self> {
        Self::new(Matrix3::from_diagonal(&Vector3::from(values)), frame_euler)
    }

    /// The tensor expressed in the crystal frame, `R·M·Rᵀ`.
    pub fn crystal_matrix(&self) -> Matrix3<f64> {
        if self.frame_euler == [0.0; 3] {
            return self.matrix;
        }
        let r = euler_rotation(self.frame_euler);
        r * self.matrix * r.transpose()
    }
}

/// Rotates a tensor by the given z-y-z Euler angles (degrees).
///
/// The result is expressed directly in the crystal frame, so its own
/// `frame_euler` is zero.
pub fn rotate_tensor(t: &InteractionTensor, euler_deg: [f64; 3]) -> InteractionTensor {
    rotate_tensor_by(t, &euler_rotation(euler_deg))
}

pub fn rotate_tensor_by(t: &InteractionTensor, r: &Matrix3<f64>) -> InteractionTensor {
    InteractionTensor {
        matrix: r * t.crystal_matrix() * r.transpose(),
        frame_euler: [0.0; 3],
    }
}

/// Magnetic field at the spins: magnitude in tesla and a unit direction in
/// the crystal frame (D1, D2, b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    magnitude: f64,
    direction: Vector3<f64>,
}

impl FieldPoint {
    pub fn new(magnitude: f64, direction: Vector3<f64>) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0) {
            return Err(Error::input(format!(
                "field magnitude must be finite and >= 0, got {magnitude}"
            )));
        }
        check_unit(&direction, "field direction")?;
        Ok(Self {
            magnitude,
            direction,
        })
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.direction
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.direction * self.magnitude
    }

    pub fn with_magnitude(&self, magnitude: f64) -> Result<Self> {
        Self::new(magnitude, self.direction)
    }

    pub fn reversed(&self) -> Self {
        Self {
            magnitude: self.magnitude,
            direction: -self.direction,
        }
    }
}

pub(crate) fn check_unit(v: &Vector3<f64>, what: &str) -> Result<()> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::input(format!(
            "{what} must be a unit vector (|d| = {norm})"
        )));
    }
    Ok(())
}

/// Normalizes an arbitrary non-zero vector.
pub fn unit(v: [f64; 3]) -> Result<Vector3<f64>> {
    let v = Vector3::from(v);
    let n = v.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::input("direction must be a finite non-zero vector"));
    }
    Ok(v / n)
}

/// Effective g-factor along `direction`: `sqrt(d · g gᵀ · d)`.
pub fn effective_g(g: &InteractionTensor, direction: &Vector3<f64>) -> Result<f64> {
    check_unit(direction, "direction")?;
    let m = g.crystal_matrix();
    Ok((direction.transpose() * m * m.transpose() * direction)[(0, 0)].sqrt())
}

/// Small corrective rotation of a site's tensors, found when matching
/// measured and tabulated g-factors.
///
/// Crystal frame axes are x = D1, y = D2, z = b. `euler_b_d2` rotates within
/// the b-D2 plane (about D1), `euler_d1_b` within the D1-b plane (about D2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationCorrection {
    pub euler_b_d2: f64,
    pub euler_d1_b: f64,
    pub applies_to: String,
}

impl OrientationCorrection {
    pub fn new(euler_b_d2: f64, euler_d1_b: f64, applies_to: impl Into<String>) -> Result<Self> {
        for (name, a) in [("euler_b_D2", euler_b_d2), ("euler_D1_b", euler_d1_b)] {
            if !(a.is_finite() && a > -90.0 && a < 90.0) {
                return Err(Error::input(format!(
                    "{name} must lie in (-90, 90) degrees, got {a}"
                )));
            }
        }
        Ok(Self {
            euler_b_d2,
            euler_d1_b,
            applies_to: applies_to.into(),
        })
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rot_y(self.euler_d1_b.to_radians()) * rot_x(self.euler_b_d2.to_radians())
    }
}
