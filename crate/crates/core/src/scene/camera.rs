//! Pinhole intrinsics, camera-to-world poses and the pixel/world mappings.
//!
//! Camera frame: x right, y down, z forward (depth). World frame: z up,
//! meters, floor plan on the (x, y) plane.

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Intrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    /// Principal point at the raster center.
    pub fn centered(focal: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGeometry(format!(
                "invalid intrinsics {self:?}"
            )))
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

/// Rigid camera-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

const ORTHO_TOL: f64 = 1e-6;

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let pose = Pose {
            rotation,
            translation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Camera at `position` looking along heading `yaw` (radians from +x,
    /// counter-clockwise) tilted by `pitch` (negative looks down).
    pub fn from_yaw_pitch(position: Point3, yaw: f64, pitch: f64) -> Self {
        let forward = Vector3::new(
            pitch.cos() * yaw.cos(),
            pitch.cos() * yaw.sin(),
            pitch.sin(),
        );
        let right = Vector3::new(yaw.sin(), -yaw.cos(), 0.0);
        let down = forward.cross(&right);
        Pose {
            rotation: Matrix3::from_columns(&[right, down, forward]),
            translation: Vector3::new(position[0], position[1], position[2]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rtr = self.rotation.transpose() * self.rotation;
        let ortho_err = (rtr - Matrix3::identity()).abs().max();
        let det = self.rotation.determinant();
        let finite = self
            .rotation
            .iter()
            .chain(self.translation.iter())
            .all(|v| v.is_finite());
        if finite && ortho_err <= ORTHO_TOL && (det - 1.0).abs() <= ORTHO_TOL {
            Ok(())
        } else {
            Err(Error::InvalidGeometry(format!(
                "pose rotation is not a proper rotation (orthonormality error {ortho_err:.3e}, det {det})"
            )))
        }
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::InvalidGeometry(format!(
                "pose matrix has bottom row {bottom:?}"
            )));
        }
        Pose::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn position(&self) -> Point3 {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn transform(&self, p_cam: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p_cam + self.translation
    }

    pub fn inverse_transform(&self, p_world: Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p_world - self.translation)
    }
}

/// Lift pixel `(u, v)` with metric `depth` into world coordinates.
pub fn back_project(u: f64, v: f64, depth: f64, intr: &Intrinsics, pose: &Pose) -> Result<Point3> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::InvalidDepth(depth));
    }
    if !intr.contains(u, v) {
        return Err(Error::OutOfBounds(format!(
            "pixel ({u}, {v}) outside {}x{} raster",
            intr.width, intr.height
        )));
    }
    let cam = Vector3::new(
        (u - intr.cx) * depth / intr.fx,
        (v - intr.cy) * depth / intr.fy,
        depth,
    );
    let w = pose.transform(cam);
    Ok([w.x, w.y, w.z])
}

/// Inverse of [`back_project`]: returns `(u, v, depth)`. Points behind the
/// camera yield a non-positive depth.
pub fn project(point: Point3, intr: &Intrinsics, pose: &Pose) -> (f64, f64, f64) {
    let c = pose.inverse_transform(Vector3::new(point[0], point[1], point[2]));
    let u = intr.fx * c.x / c.z + intr.cx;
    let v = intr.fy * c.y / c.z + intr.cy;
    (u, v, c.z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intr() -> Intrinsics {
        Intrinsics::new(60.0, 55.0, 39.5, 29.5, 80, 60).unwrap()
    }

    #[test]
    fn principal_ray_maps_to_optical_axis() {
        let p = back_project(39.5, 29.5, 2.0, &intr(), &Pose::identity()).unwrap();
        assert_eq!(p, [0.0, 0.0, 2.0]);
    }

    #[test]
    fn quarter_focal_offset_is_quarter_slope() {
        let i = intr();
        let p = back_project(i.cx + i.fx / 4.0, i.cy, 4.0, &i, &Pose::identity()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12 && (p[2] - 4.0).abs() < 1e-12);
        let p = back_project(i.cx, i.cy + i.fy / 4.0, 1.0, &i, &Pose::identity()).unwrap();
        assert!(p[0].abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12 && (p[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_pose_matches_homogeneous_multiply() {
        // 90 degrees about world z, translated by (1, 0, 0).
        let rot = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let pose = Pose::new(rot, Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let i = intr();
        let got = back_project(i.cx, i.cy, 1.0, &i, &pose).unwrap();

        // Oracle: explicit 4x4 homogeneous product written out by hand.
        let m = [
            [0.0, -1.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let cam = [0.0, 0.0, 1.0, 1.0];
        let mut want = [0.0; 4];
        for r in 0..4 {
            for c in 0..4 {
                want[r] += m[r][c] * cam[c];
            }
        }
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-12, "{got:?} vs {want:?}");
        }
        assert_eq!(want, [1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_depth_and_pixels() {
        let i = intr();
        let pose = Pose::identity();
        assert!(matches!(
            back_project(1.0, 1.0, 0.0, &i, &pose),
            Err(Error::InvalidDepth(_))
        ));
        assert!(matches!(
            back_project(1.0, 1.0, -1.0, &i, &pose),
            Err(Error::InvalidDepth(_))
        ));
        assert!(matches!(
            back_project(80.0, 1.0, 1.0, &i, &pose),
            Err(Error::OutOfBounds(_))
        ));
        assert!(matches!(
            back_project(-0.5, 1.0, 1.0, &i, &pose),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn intrinsics_invariants() {
        assert!(Intrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(Intrinsics::new(1.0, 1.0, 3.9, 0.0, 4, 4).is_ok());
    }

    #[test]
    fn yaw_pitch_pose_is_proper_rotation() {
        for k in 0..16 {
            let pose = Pose::from_yaw_pitch([1.0, 2.0, 1.4], k as f64 * 0.41, -0.35);
            pose.validate().unwrap();
        }
        let fwd = Pose::from_yaw_pitch([0.0; 3], 0.0, 0.0)
            .rotation
            .column(2)
            .into_owned();
        assert!((fwd - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn matrix_round_trip() {
        let pose = Pose::from_yaw_pitch([1.0, -2.0, 1.4], 0.7, -0.2);
        let back = Pose::from_matrix(&pose.to_matrix()).unwrap();
        assert_eq!(pose, back);
    }

    proptest! {
        #[test]
        fn project_inverts_back_project(
            u in 0.0f64..79.99, v in 0.0f64..59.99, d in 0.05f64..20.0,
            yaw in -3.2f64..3.2, pitch in -1.2f64..1.2,
            tx in -10.0f64..10.0, ty in -10.0f64..10.0, tz in 0.0f64..3.0,
        ) {
            let i = intr();
            let pose = Pose::from_yaw_pitch([tx, ty, tz], yaw, pitch);
            let p = back_project(u, v, d, &i, &pose).unwrap();
            let (u2, v2, d2) = project(p, &i, &pose);
            prop_assert!((u - u2).abs() < 1e-4);
            prop_assert!((v - v2).abs() < 1e-4);
            prop_assert!((d - d2).abs() < 1e-6);
        }
    }
}
