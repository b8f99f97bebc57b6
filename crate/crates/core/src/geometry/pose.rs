use std::ops::Mul;

use nalgebra::{Point3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid transform in SE(3): rotate, then translate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Builds a pose, renormalizing the rotation.
    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation: UnitQuaternion::new_normalize(rotation.into_inner()),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            translation,
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), rotation)
    }

    /// Pose with zero roll and pitch.
    pub fn from_yaw(translation: Vector3<f64>, yaw: f64) -> Self {
        let half = 0.5 * yaw;
        let q = Quaternion::new(half.cos(), 0.0, 0.0, half.sin());
        Self {
            translation,
            rotation: UnitQuaternion::new_unchecked(q),
        }
    }

    pub fn from_rpy(translation: Vector3<f64>, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(translation, UnitQuaternion::from_euler_angles(roll, pitch, yaw))
    }

    /// Builds a pose from an orthonormal rotation matrix given by its columns.
    pub fn from_axes(
        translation: Vector3<f64>,
        x: Vector3<f64>,
        y: Vector3<f64>,
        z: Vector3<f64>,
    ) -> Self {
        let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
        let rot = Rotation3::from_matrix_unchecked(m);
        Self::new(translation, UnitQuaternion::from_rotation_matrix(&rot))
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.translation + self.rotation * other.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(p - self.translation))
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn rotation_matrix(&self) -> nalgebra::Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    pub fn yaw(&self) -> f64 {
        self.rotation.euler_angles().2
    }

    /// Roll and pitch of the rotation, in radians.
    pub fn roll_pitch(&self) -> (f64, f64) {
        let (r, p, _) = self.rotation.euler_angles();
        (r, p)
    }

    /// Linear translation, spherical-linear rotation. `s = 0` and `s = 1`
    /// return the endpoints exactly.
    pub fn interpolate(&self, other: &Pose, s: f64) -> Pose {
        if s <= 0.0 {
            return *self;
        }
        if s >= 1.0 {
            return *other;
        }
        let translation = self.translation + (other.translation - self.translation) * s;
        let rotation = self
            .rotation
            .try_slerp(&other.rotation, s, 1e-12)
            .unwrap_or_else(|| self.rotation.nlerp(&other.rotation, s));
        Pose {
            translation,
            rotation,
        }
    }

    pub fn as_point(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = a % two_pi;
    if x <= -std::f64::consts::PI {
        x += two_pi;
    } else if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}
