//! Depth-camera geometry: pinhole back-projection, point clouds, upright
//! oriented boxes, triangle meshes, z-buffer depth rendering and exact 3D IoU.
//!
//! Conventions used throughout the crate: the camera frame is x-right,
//! y-down, z-forward (pinhole `u = fx*x/z + cx`); gravity is +z in every
//! gravity-aligned frame; yaw rotates counterclockwise about +z when viewed
//! from above and is stored normalized to `[0, 2π)`.

mod depth_png;
mod iou;
mod obj;
mod raster;

pub use depth_png::{load_depth_png, save_depth_png};
pub use iou::{box_iou_3d, clip_convex_polygon, polygon_area};
pub use obj::{load_obj, save_obj};
pub use raster::render_mesh_depth;

use crate::error::{Error, Result};
use glam::{DMat3, DVec3};
use serde::{Deserialize, Serialize};

pub const TAU: f64 = std::f64::consts::TAU;

/// Pinhole camera parameters in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    /// Returns `None` for points at or behind the camera plane.
    pub fn project(&self, p: DVec3) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// The camera-frame point on the ray through pixel (u, v) at depth z.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> DVec3 {
        DVec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }
}

/// Per-pixel depth in meters; 0 marks missing measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    values: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                got: (values.len(), 1),
                expected: (width, height),
            });
        }
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::Parse {
                what: "depth image".into(),
                detail: "depth values must be finite and non-negative".into(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.values[v * self.width + u]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, depth: f32) {
        self.values[v * self.width + u] = depth;
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn matches(&self, cam: &CameraIntrinsics) -> bool {
        self.width == cam.width && self.height == cam.height
    }
}

/// Which frame a point cloud currently lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Raw camera frame (y down, z forward).
    Camera,
    /// Gravity-aligned frame (z up), origin at the camera center.
    Gravity,
    /// Template frame: gravity-aligned, major object at origin with yaw 0.
    Template,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<DVec3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<DVec3>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<DVec3> {
        if self.points.is_empty() {
            return None;
        }
        Some(self.points.iter().copied().sum::<DVec3>() / self.points.len() as f64)
    }

    /// Per-axis min/max bounds, or None for an empty cloud.
    pub fn bounds(&self) -> Option<(DVec3, DVec3)> {
        let first = *self.points.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.points[1..] {
            lo = lo.min(*p);
            hi = hi.max(*p);
        }
        Some((lo, hi))
    }
}

/// Rigid transform `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: DMat3,
    pub translation: DVec3,
}

impl RigidTransform {
    pub const IDENTITY: Self = Self {
        rotation: DMat3::IDENTITY,
        translation: DVec3::ZERO,
    };

    pub fn new(rotation: DMat3, translation: DVec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Pure rotation about the gravity (+z) axis.
    pub fn from_yaw(yaw: f64) -> Self {
        Self::new(DMat3::from_rotation_z(yaw), DVec3::ZERO)
    }

    pub fn from_yaw_translation(yaw: f64, translation: DVec3) -> Self {
        Self::new(DMat3::from_rotation_z(yaw), translation)
    }

    #[inline]
    pub fn apply(&self, p: DVec3) -> DVec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rot_inv = self.rotation.transpose();
        Self {
            rotation: rot_inv,
            translation: -(rot_inv * self.translation),
        }
    }

    /// Row-major 4x4 matrix, the serialization format for camera poses.
    pub fn to_matrix_rows(&self) -> [f64; 16] {
        let r = self.rotation;
        let t = self.translation;
        [
            r.x_axis.x, r.y_axis.x, r.z_axis.x, t.x, //
            r.x_axis.y, r.y_axis.y, r.z_axis.y, t.y, //
            r.x_axis.z, r.y_axis.z, r.z_axis.z, t.z, //
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    pub fn from_matrix_rows(m: &[f64; 16]) -> Self {
        let rotation = DMat3::from_cols(
            DVec3::new(m[0], m[4], m[8]),
            DVec3::new(m[1], m[5], m[9]),
            DVec3::new(m[2], m[6], m[10]),
        );
        Self {
            rotation,
            translation: DVec3::new(m[3], m[7], m[11]),
        }
    }
}

/// Normalizes an angle into `[0, 2π)`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let mut y = yaw % TAU;
    if y < 0.0 {
        y += TAU;
    }
    // -1e-18 % τ can still round to τ itself.
    if y >= TAU {
        y -= TAU;
    }
    y
}

/// Smallest absolute difference between two yaws, in `[0, π]`.
pub fn yaw_difference(a: f64, b: f64) -> f64 {
    let d = normalize_yaw(a - b);
    d.min(TAU - d)
}

/// Gravity-upright oriented box: center, positive extents, yaw about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3 {
    pub center: DVec3,
    pub size: DVec3,
    pub yaw: f64,
}

impl OrientedBox3 {
    pub fn new(center: DVec3, size: DVec3, yaw: f64) -> Result<Self> {
        if !(size.x > 0.0 && size.y > 0.0 && size.z > 0.0) {
            return Err(Error::InvalidBox(format!("size must be positive, got {size:?}")));
        }
        Ok(Self {
            center,
            size,
            yaw: normalize_yaw(yaw),
        })
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }

    /// Horizontal footprint corners, counterclockwise.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hx = self.size.x / 2.0;
        let hy = self.size.y / 2.0;
        let local = [[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]];
        local.map(|[x, y]| {
            [
                self.center.x + c * x - s * y,
                self.center.y + s * x + c * y,
            ]
        })
    }

    pub fn z_interval(&self) -> (f64, f64) {
        (
            self.center.z - self.size.z / 2.0,
            self.center.z + self.size.z / 2.0,
        )
    }

    pub fn contains(&self, p: DVec3) -> bool {
        let d = p - self.center;
        let (s, c) = self.yaw.sin_cos();
        // rotate by -yaw into the box frame
        let lx = c * d.x + s * d.y;
        let ly = -s * d.x + c * d.y;
        lx.abs() <= self.size.x / 2.0 && ly.abs() <= self.size.y / 2.0 && d.z.abs() <= self.size.z / 2.0
    }

    /// Same box with every extent scaled by `factor` about the center.
    pub fn inflated(&self, factor: f64) -> Self {
        Self {
            center: self.center,
            size: self.size * factor,
            yaw: self.yaw,
        }
    }

    /// Applies a z-upright rigid transform; only valid when the rotation is a
    /// yaw about +z, which is the only rotation the pipeline ever uses.
    pub fn transformed(&self, yaw: f64, translation: DVec3) -> Self {
        let rot = DMat3::from_rotation_z(yaw);
        Self {
            center: rot * self.center + translation,
            size: self.size,
            yaw: normalize_yaw(self.yaw + yaw),
        }
    }
}

/// Triangle mesh with indexed vertices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<DVec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<DVec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for t in &triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Parse {
                    what: "mesh".into(),
                    detail: format!("triangle {t:?} references vertex beyond {n}"),
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn bounds(&self) -> Option<(DVec3, DVec3)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices[1..] {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        Some((lo, hi))
    }

    pub fn transform(&mut self, t: &RigidTransform) {
        for v in &mut self.vertices {
            *v = t.apply(*v);
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        let mut out = self.clone();
        out.transform(t);
        out
    }

    /// Appends another mesh, offsetting its indices.
    pub fn merge(&mut self, other: &TriMesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
    }

    /// Distance from a point to the nearest triangle surface.
    pub fn distance_to_point(&self, p: DVec3) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                point_triangle_distance(
                    p,
                    self.vertices[t[0]],
                    self.vertices[t[1]],
                    self.vertices[t[2]],
                )
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Distance from point `p` to triangle `abc`.
pub fn point_triangle_distance(p: DVec3, a: DVec3, b: DVec3, c: DVec3) -> f64 {
    // Ericson, "Real-Time Collision Detection": closest point on triangle.
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (p - a).length();
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (p - b).length();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).length();
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (p - c).length();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).length();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).length();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).length()
}

/// Back-projects every pixel with positive depth through the pinhole model.
pub fn backproject_depth(depth: &DepthImage, cam: &CameraIntrinsics) -> Result<PointCloud> {
    if !depth.matches(cam) {
        return Err(Error::DimensionMismatch {
            got: (depth.width, depth.height),
            expected: (cam.width, cam.height),
        });
    }
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let z = depth.get(u, v) as f64;
            if z > 0.0 {
                points.push(cam.unproject(u as f64, v as f64, z));
            }
        }
    }
    Ok(PointCloud::new(points, Frame::Camera))
}

/// Rotates a cloud about the gravity axis, then translates it.
pub fn transform_cloud(cloud: &PointCloud, yaw: f64, translation: DVec3) -> PointCloud {
    let rot = DMat3::from_rotation_z(yaw);
    PointCloud {
        points: cloud.points.iter().map(|p| rot * *p + translation).collect(),
        frame: cloud.frame,
    }
}

/// Scales and places a mesh so its bounds exactly fill the target box.
///
/// Scaling is anisotropic in the box frame: the mesh's own axis-aligned
/// bounds are mapped onto the box extents, then the result is rotated by the
/// box yaw and centered on the box center.
pub fn fit_mesh_to_box(mesh: &TriMesh, target: &OrientedBox3) -> Result<TriMesh> {
    let (lo, hi) = mesh.bounds().ok_or(Error::Parse {
        what: "mesh".into(),
        detail: "cannot fit an empty mesh".into(),
    })?;
    let extent = hi - lo;
    for axis in 0..3 {
        if extent[axis] <= 0.0 {
            return Err(Error::DegenerateMesh { axis });
        }
    }
    let scale = target.size / extent;
    let mid = (lo + hi) / 2.0;
    let rot = DMat3::from_rotation_z(target.yaw);
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| rot * ((*v - mid) * scale) + target.center)
        .collect();
    Ok(TriMesh {
        vertices,
        triangles: mesh.triangles.clone(),
    })
}
