//! Software z-buffer rasterizer producing depth images from triangle meshes.

use super::{CameraIntrinsics, DepthImage, TriMesh};
use glam::DVec3;

/// Geometry closer than this is clipped; keeps projection finite.
const NEAR_PLANE: f64 = 1e-4;

/// Renders per-pixel nearest-surface depth for a mesh in the camera frame.
///
/// Pixels covered by no triangle stay 0 (missing). Coverage is binary at
/// integer pixel coordinates and depth is interpolated perspective-correctly
/// (linear in 1/z across the projected triangle). Triangles crossing the
/// near plane are clipped; zero-area triangles are skipped.
pub fn render_mesh_depth(mesh: &TriMesh, cam: &CameraIntrinsics) -> DepthImage {
    let mut out = DepthImage::new(cam.width, cam.height);
    let mut zbuf = vec![f64::INFINITY; cam.width * cam.height];

    for tri in &mesh.triangles {
        let verts = [
            mesh.vertices[tri[0]],
            mesh.vertices[tri[1]],
            mesh.vertices[tri[2]],
        ];
        if verts.iter().all(|v| v.z < NEAR_PLANE) {
            continue;
        }
        // near-plane clip can yield a quad; fan-triangulate it
        let clipped = clip_near(&verts);
        if clipped.len() < 3 {
            continue;
        }
        for i in 1..clipped.len() - 1 {
            raster_triangle(
                [clipped[0], clipped[i], clipped[i + 1]],
                cam,
                &mut zbuf,
                &mut out,
            );
        }
    }
    out
}

/// Sutherland–Hodgman against the z = NEAR_PLANE half-space.
fn clip_near(verts: &[DVec3; 3]) -> Vec<DVec3> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = verts[i];
        let b = verts[(i + 1) % 3];
        let a_in = a.z >= NEAR_PLANE;
        let b_in = b.z >= NEAR_PLANE;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (NEAR_PLANE - a.z) / (b.z - a.z);
            out.push(a + (b - a) * t);
        }
    }
    out
}

fn raster_triangle(v: [DVec3; 3], cam: &CameraIntrinsics, zbuf: &mut [f64], out: &mut DepthImage) {
    // project to pixel coordinates; all z >= NEAR_PLANE by construction
    let p: Vec<[f64; 2]> = v
        .iter()
        .map(|w| {
            [
                cam.fx * w.x / w.z + cam.cx,
                cam.fy * w.y / w.z + cam.cy,
            ]
        })
        .collect();
    let inv_z = [1.0 / v[0].z, 1.0 / v[1].z, 1.0 / v[2].z];

    let area = edge(&p[0], &p[1], &p[2]);
    if area == 0.0 {
        return;
    }

    let min_x = p.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min);
    let max_x = p.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_y = p.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min);
    let max_y = p.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max);

    let x0 = min_x.ceil().max(0.0) as usize;
    let x1 = (max_x.floor().min(cam.width as f64 - 1.0)) as isize;
    let y0 = min_y.ceil().max(0.0) as usize;
    let y1 = (max_y.floor().min(cam.height as f64 - 1.0)) as isize;
    if x1 < x0 as isize || y1 < y0 as isize || min_x > cam.width as f64 || min_y > cam.height as f64
    {
        return;
    }

    let inv_area = 1.0 / area;
    for y in y0..=(y1 as usize) {
        for x in x0..=(x1 as usize) {
            let q = [x as f64, y as f64];
            let w0 = edge(&p[1], &p[2], &q) * inv_area;
            let w1 = edge(&p[2], &p[0], &q) * inv_area;
            let w2 = edge(&p[0], &p[1], &q) * inv_area;
            if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                continue;
            }
            let z = 1.0 / (w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2]);
            let idx = y * cam.width + x;
            if z < zbuf[idx] {
                zbuf[idx] = z;
                out.set(x, y, z as f32);
            }
        }
    }
}

/// Signed doubled area of triangle (a, b, c); sign gives orientation.
#[inline]
fn edge(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}
