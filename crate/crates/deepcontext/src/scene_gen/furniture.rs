//! Primitive-composed furniture meshes, one canonical mesh per category with
//! a few proportion variants each. Canonical meshes face +y and get scaled
//! onto annotation boxes with `fit_mesh_to_box`, so only proportions matter.

use crate::geometry::TriMesh;
use glam::DVec3;

pub const FURNITURE_CATEGORIES: [&str; 10] = [
    "bed",
    "nightstand",
    "lamp",
    "desk",
    "chair",
    "monitor",
    "sofa",
    "coffee_table",
    "ottoman",
    "table",
];

/// Axis-aligned box from min/max corners, 12 triangles with outward winding
/// (winding is irrelevant to the depth rasterizer but kept consistent).
pub fn add_box(mesh: &mut TriMesh, lo: DVec3, hi: DVec3) {
    let base = mesh.vertices.len();
    for i in 0..8 {
        mesh.vertices.push(DVec3::new(
            if i & 1 != 0 { hi.x } else { lo.x },
            if i & 2 != 0 { hi.y } else { lo.y },
            if i & 4 != 0 { hi.z } else { lo.z },
        ));
    }
    const FACES: [[usize; 3]; 12] = [
        [0, 2, 1],
        [1, 2, 3], // bottom
        [4, 5, 6],
        [5, 7, 6], // top
        [0, 1, 4],
        [1, 5, 4], // -y
        [2, 6, 3],
        [3, 6, 7], // +y
        [0, 4, 2],
        [2, 4, 6], // -x
        [1, 3, 5],
        [3, 7, 5], // +x
    ];
    for f in FACES {
        mesh.triangles.push(f.map(|i| i + base));
    }
}

pub fn mesh_box(size: DVec3) -> TriMesh {
    let mut m = TriMesh::default();
    add_box(&mut m, -size / 2.0, size / 2.0);
    m
}

/// Closed n-gon prism along +z.
pub fn add_cylinder(mesh: &mut TriMesh, center: DVec3, radius: f64, height: f64, sides: usize) {
    let base = mesh.vertices.len();
    let z0 = center.z - height / 2.0;
    let z1 = center.z + height / 2.0;
    for &z in &[z0, z1] {
        for i in 0..sides {
            let a = i as f64 / sides as f64 * std::f64::consts::TAU;
            mesh.vertices
                .push(DVec3::new(center.x + radius * a.cos(), center.y + radius * a.sin(), z));
        }
    }
    mesh.vertices.push(DVec3::new(center.x, center.y, z0));
    mesh.vertices.push(DVec3::new(center.x, center.y, z1));
    let bot_c = base + 2 * sides;
    let top_c = base + 2 * sides + 1;
    for i in 0..sides {
        let j = (i + 1) % sides;
        let (b0, b1) = (base + i, base + j);
        let (t0, t1) = (base + sides + i, base + sides + j);
        mesh.triangles.push([b0, b1, t0]);
        mesh.triangles.push([b1, t1, t0]);
        mesh.triangles.push([bot_c, b1, b0]);
        mesh.triangles.push([top_c, t0, t1]);
    }
}

pub fn mesh_cylinder(radius: f64, height: f64) -> TriMesh {
    let mut m = TriMesh::default();
    add_cylinder(&mut m, DVec3::new(0.0, 0.0, height / 2.0), radius, height, 12);
    m
}

fn recenter(mut mesh: TriMesh) -> TriMesh {
    if let Some((lo, hi)) = mesh.bounds() {
        let mid = (lo + hi) / 2.0;
        for v in &mut mesh.vertices {
            *v -= mid;
        }
    }
    mesh
}

fn four_legs(mesh: &mut TriMesh, x0: f64, x1: f64, y0: f64, y1: f64, z_top: f64, thickness: f64) {
    for (lx, ly) in [(x0, y0), (x1 - thickness, y0), (x0, y1 - thickness), (x1 - thickness, y1 - thickness)] {
        add_box(
            mesh,
            DVec3::new(lx, ly, 0.0),
            DVec3::new(lx + thickness, ly + thickness, z_top),
        );
    }
}

pub fn variant_count(category: &str) -> u32 {
    match category {
        "bed" | "sofa" | "chair" | "table" | "desk" => 5,
        "nightstand" | "coffee_table" | "lamp" => 4,
        "monitor" | "ottoman" => 3,
        _ => 1,
    }
}

/// Canonical mesh of a category variant; units arbitrary (fit rescales),
/// front is +y, up is +z.
pub fn canonical_mesh(category: &str, variant: u32) -> TriMesh {
    let v = variant as f64;
    let mut m = TriMesh::default();
    match category {
        "bed" => {
            let head_h = 0.8 + 0.06 * (variant % 3) as f64;
            let base_h = 0.45 + 0.04 * (variant % 2) as f64;
            // headboard at the back (-y), sleeping surface toward +y
            add_box(&mut m, DVec3::new(0.0, 0.06, 0.0), DVec3::new(1.0, 1.0, base_h));
            add_box(&mut m, DVec3::new(0.0, 0.0, 0.0), DVec3::new(1.0, 0.06, head_h));
            if variant >= 3 {
                // pillow block near the headboard
                add_box(
                    &mut m,
                    DVec3::new(0.12, 0.08, base_h),
                    DVec3::new(0.88, 0.3, base_h + 0.1),
                );
            }
        }
        "nightstand" => match variant % 4 {
            0 => add_box(&mut m, DVec3::ZERO, DVec3::new(1.0, 1.0, 1.0)),
            1 => {
                four_legs(&mut m, 0.0, 1.0, 0.0, 1.0, 0.25, 0.12);
                add_box(&mut m, DVec3::new(0.0, 0.0, 0.25), DVec3::new(1.0, 1.0, 1.0));
            }
            2 => {
                // open shelf: top, bottom, two sides
                add_box(&mut m, DVec3::new(0.0, 0.0, 0.85), DVec3::new(1.0, 1.0, 1.0));
                add_box(&mut m, DVec3::new(0.0, 0.0, 0.0), DVec3::new(1.0, 1.0, 0.15));
                add_box(&mut m, DVec3::new(0.0, 0.0, 0.0), DVec3::new(0.12, 1.0, 1.0));
                add_box(&mut m, DVec3::new(0.88, 0.0, 0.0), DVec3::new(1.0, 1.0, 1.0));
            }
            _ => {
                add_box(&mut m, DVec3::ZERO, DVec3::new(1.0, 1.0, 0.9));
                add_box(&mut m, DVec3::new(0.05, 0.05, 0.9), DVec3::new(0.95, 0.95, 1.0));
            }
        },
        "lamp" => {
            let shade_r = 0.3 + 0.05 * (variant % 2) as f64;
            let shade_h = 0.35 + 0.08 * ((variant / 2) % 2) as f64;
            add_cylinder(&mut m, DVec3::new(0.0, 0.0, 0.05), 0.22, 0.1, 10);
            add_cylinder(&mut m, DVec3::new(0.0, 0.0, 0.5), 0.05, 0.8, 8);
            add_cylinder(&mut m, DVec3::new(0.0, 0.0, 1.0 - shade_h / 2.0), shade_r, shade_h, 12);
        }
        "desk" => {
            add_box(&mut m, DVec3::new(0.0, 0.0, 0.88), DVec3::new(1.0, 1.0, 1.0));
            if variant % 2 == 0 {
                four_legs(&mut m, 0.02, 0.98, 0.05, 0.95, 0.88, 0.07);
            } else {
                // side panels
                add_box(&mut m, DVec3::new(0.0, 0.02, 0.0), DVec3::new(0.08, 0.98, 0.88));
                add_box(&mut m, DVec3::new(0.92, 0.02, 0.0), DVec3::new(1.0, 0.98, 0.88));
            }
            if variant >= 2 {
                // drawer pedestal on one side
                add_box(&mut m, DVec3::new(0.65, 0.05, 0.3), DVec3::new(0.98, 0.95, 0.88));
            }
        }
        "chair" => {
            let back_t = 0.1;
            let seat_h = 0.45 + 0.03 * (variant % 2) as f64;
            add_box(&mut m, DVec3::new(0.0, 0.0, seat_h), DVec3::new(1.0, 1.0, seat_h + 0.1));
            // backrest at -y
            add_box(&mut m, DVec3::new(0.0, 0.0, seat_h + 0.1), DVec3::new(1.0, back_t, 1.0));
            if variant % 3 == 0 {
                four_legs(&mut m, 0.05, 0.95, 0.08, 0.95, seat_h, 0.08);
            } else {
                add_cylinder(&mut m, DVec3::new(0.5, 0.5, seat_h / 2.0), 0.07, seat_h, 8);
                add_cylinder(&mut m, DVec3::new(0.5, 0.5, 0.03), 0.35, 0.06, 10);
            }
        }
        "monitor" => {
            let screen_t = 0.25 + 0.1 * (variant % 2) as f64;
            // stand base and pole, screen leaning at -y side, facing +y
            add_box(&mut m, DVec3::new(0.3, 0.2, 0.0), DVec3::new(0.7, 0.8, 0.06));
            add_box(&mut m, DVec3::new(0.45, 0.35, 0.0), DVec3::new(0.55, 0.55, 0.35));
            add_box(&mut m, DVec3::new(0.0, 0.3, 0.3), DVec3::new(1.0, 0.3 + screen_t, 1.0));
        }
        "sofa" => {
            let arm_w = 0.1 + 0.04 * (variant % 2) as f64;
            let back_t = 0.18;
            add_box(&mut m, DVec3::new(0.0, back_t, 0.0), DVec3::new(1.0, 1.0, 0.5));
            add_box(&mut m, DVec3::new(0.0, 0.0, 0.0), DVec3::new(1.0, back_t, 1.0));
            if variant % 3 != 2 {
                add_box(&mut m, DVec3::new(0.0, back_t, 0.0), DVec3::new(arm_w, 1.0, 0.72));
                add_box(&mut m, DVec3::new(1.0 - arm_w, back_t, 0.0), DVec3::new(1.0, 1.0, 0.72));
            }
        }
        "coffee_table" => {
            add_box(&mut m, DVec3::new(0.0, 0.0, 0.8), DVec3::new(1.0, 1.0, 1.0));
            match variant % 3 {
                0 => four_legs(&mut m, 0.03, 0.97, 0.03, 0.97, 0.8, 0.08),
                1 => add_box(&mut m, DVec3::new(0.1, 0.1, 0.0), DVec3::new(0.9, 0.9, 0.8)),
                _ => {
                    add_box(&mut m, DVec3::new(0.05, 0.05, 0.0), DVec3::new(0.95, 0.95, 0.12));
                    add_cylinder(&mut m, DVec3::new(0.5, 0.5, 0.46), 0.12, 0.68, 8);
                }
            }
        }
        "ottoman" => {
            add_box(&mut m, DVec3::new(0.0, 0.0, 0.12 * (variant % 2) as f64), DVec3::new(1.0, 1.0, 1.0));
            if variant % 2 == 1 {
                four_legs(&mut m, 0.08, 0.92, 0.08, 0.92, 0.12, 0.08);
            }
        }
        "table" => {
            add_box(&mut m, DVec3::new(0.0, 0.0, 0.9), DVec3::new(1.0, 1.0, 1.0));
            if variant % 2 == 0 {
                four_legs(&mut m, 0.04, 0.96, 0.04, 0.96, 0.9, 0.08);
            } else {
                add_cylinder(&mut m, DVec3::new(0.5, 0.5, 0.45), 0.1, 0.9, 8);
                add_cylinder(&mut m, DVec3::new(0.5, 0.5, 0.04), 0.4, 0.08, 12);
            }
            let _ = v;
        }
        // clutter primitives
        "box" => add_box(&mut m, DVec3::ZERO, DVec3::ONE),
        "cylinder" => add_cylinder(&mut m, DVec3::new(0.5, 0.5, 0.5), 0.5, 1.0, 10),
        other => panic!("unknown furniture category `{other}`"),
    }
    recenter(m)
}
