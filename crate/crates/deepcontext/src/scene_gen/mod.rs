//! Procedural generator of annotated synthetic depth scenes for the four
//! template types. Rooms are primitive-composed; realism is not the point,
//! canonical-but-jittered furniture arrangements are.

pub mod furniture;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::geometry::{
    fit_mesh_to_box, load_depth_png, render_mesh_depth, save_depth_png, CameraIntrinsics,
    DepthImage, OrientedBox3, RigidTransform, TriMesh,
};
use crate::templates::{
    load_annotation, save_annotation, AnnotatedObject, SceneAnnotation, TemplateName,
};
use furniture::canonical_mesh;
use glam::{DMat3, DVec3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Knobs for the scene sampler. Ranges are inclusive (lo, hi) pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Relative draw weights for the four templates, in `TemplateName::ALL` order.
    pub template_weights: [f64; 4],
    pub camera: CameraIntrinsics,
    pub room_side: (f64, f64),
    pub room_height: (f64, f64),
    pub camera_height: (f64, f64),
    pub camera_distance: (f64, f64),
    /// Camera pitch bounds in degrees (negative looks down).
    pub camera_pitch_deg: (f64, f64),
    /// Positional jitter of side objects around their canonical offsets (m).
    pub side_jitter: f64,
    /// Yaw jitter of placed objects (degrees).
    pub yaw_jitter_deg: f64,
    pub clutter_count: (usize, usize),
    /// Objects need at least this many visible pixels to be annotated.
    pub min_visible_pixels: usize,
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            template_weights: [1.0, 1.0, 1.0, 1.0],
            camera: CameraIntrinsics::new(138.0, 138.0, 80.0, 60.0, 160, 120)
                .expect("valid default intrinsics"),
            room_side: (3.6, 5.4),
            room_height: (2.4, 2.9),
            camera_height: (0.8, 2.1),
            camera_distance: (1.9, 3.8),
            camera_pitch_deg: (-38.0, 2.0),
            side_jitter: 0.15,
            yaw_jitter_deg: 8.0,
            clutter_count: (2, 5),
            min_visible_pixels: 40,
            max_retries: 40,
            seed: 0,
        }
    }
}

/// One placed object before rendering, in the room frame.
struct Placed {
    category: String,
    bbox: Option<OrientedBox3>,
    mesh: TriMesh,
    annotate: bool,
}

/// Generator output: depth image, annotation, and the scene geometry in the
/// gravity-aligned camera frame (handy for surface checks and debugging).
pub struct GeneratedScene {
    pub depth: DepthImage,
    pub annotation: SceneAnnotation,
    pub mesh_gravity: TriMesh,
}

fn sample(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

fn jitter(rng: &mut ChaCha8Rng, amount: f64) -> f64 {
    if amount == 0.0 {
        0.0
    } else {
        rng.random_range(-amount..amount)
    }
}

fn pick_template(rng: &mut ChaCha8Rng, weights: &[f64; 4]) -> TemplateName {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return TemplateName::ALL[i];
        }
        target -= w;
    }
    TemplateName::TableChairSet
}

/// Places a furniture piece: box in the room frame + mesh fitted to it.
fn place(
    rng: &mut ChaCha8Rng,
    category: &str,
    center: DVec3,
    size: DVec3,
    yaw: f64,
) -> Result<Placed> {
    let bbox = OrientedBox3::new(center, size, yaw)?;
    let variant = rng.random_range(0..furniture::variant_count(category));
    let mesh = fit_mesh_to_box(&canonical_mesh(category, variant), &bbox)?;
    Ok(Placed {
        category: category.to_string(),
        bbox: Some(bbox),
        mesh,
        annotate: true,
    })
}

struct Room {
    half_x: f64,
    half_y: f64,
    height: f64,
}

/// Floor, four walls and ceiling, as thin annotated slabs.
fn room_shell(room: &Room) -> Vec<Placed> {
    let t = 0.1;
    let (hx, hy, hz) = (room.half_x, room.half_y, room.height);
    let slab = |cat: &str, center: DVec3, size: DVec3| -> Placed {
        let bbox = OrientedBox3::new(center, size, 0.0).expect("positive slab");
        let mesh = fit_mesh_to_box(&furniture::mesh_box(DVec3::ONE), &bbox).expect("fits");
        Placed {
            category: cat.to_string(),
            bbox: Some(bbox),
            mesh,
            annotate: false, // decided by visibility later
        }
    };
    vec![
        slab(
            "floor",
            DVec3::new(0.0, 0.0, -t / 2.0),
            DVec3::new(2.0 * hx, 2.0 * hy, t),
        ),
        slab(
            "wall",
            DVec3::new(0.0, -hy - t / 2.0, hz / 2.0),
            DVec3::new(2.0 * hx + 2.0 * t, t, hz),
        ),
        slab(
            "wall",
            DVec3::new(hx + t / 2.0, 0.0, hz / 2.0),
            DVec3::new(t, 2.0 * hy + 2.0 * t, hz),
        ),
        slab(
            "wall",
            DVec3::new(0.0, hy + t / 2.0, hz / 2.0),
            DVec3::new(2.0 * hx + 2.0 * t, t, hz),
        ),
        slab(
            "wall",
            DVec3::new(-hx - t / 2.0, 0.0, hz / 2.0),
            DVec3::new(t, 2.0 * hy + 2.0 * t, hz),
        ),
        slab(
            "ceiling",
            DVec3::new(0.0, 0.0, hz + t / 2.0),
            DVec3::new(2.0 * hx, 2.0 * hy, t),
        ),
    ]
}

/// Samples the furniture of one template in the room frame. The major object
/// sits against the -y wall (mid-room for the table set) facing +y; the first
/// returned item is always the major object.
fn sample_furniture(
    rng: &mut ChaCha8Rng,
    cfg: &GeneratorConfig,
    template: TemplateName,
    room: &Room,
) -> Result<Vec<Placed>> {
    let j = cfg.side_jitter;
    let yj = cfg.yaw_jitter_deg.to_radians();
    let mut out = Vec::new();
    match template {
        TemplateName::SleepingArea => {
            let size = DVec3::new(
                sample(rng, (1.4, 1.8)),
                sample(rng, (1.9, 2.1)),
                sample(rng, (0.5, 0.65)),
            );
            let yaw = jitter(rng, yj);
            let center = DVec3::new(
                jitter(rng, 0.5),
                -room.half_y + size.y / 2.0 + 0.06,
                size.z / 2.0,
            );
            let bed = place(rng, "bed", center, size, yaw)?;
            let bed_box = bed.bbox.expect("furniture is annotated");
            out.push(bed);
            let n_stands = rng.random_range(1..=2usize);
            let mut sides = [-1.0, 1.0];
            if n_stands == 1 && rng.random_range(0..2) == 1 {
                sides.swap(0, 1);
            }
            for &side in sides.iter().take(n_stands) {
                let ns_size = DVec3::new(
                    sample(rng, (0.42, 0.55)),
                    sample(rng, (0.38, 0.5)),
                    sample(rng, (0.5, 0.62)),
                );
                let dx = side * (size.x / 2.0 + ns_size.x / 2.0 + 0.06);
                let dy = -size.y / 2.0 + ns_size.y / 2.0 + 0.05;
                let offset = DMat3::from_rotation_z(yaw)
                    * DVec3::new(dx + jitter(rng, j), dy + jitter(rng, j), 0.0);
                let ns_center = DVec3::new(
                    bed_box.center.x + offset.x,
                    bed_box.center.y + offset.y,
                    ns_size.z / 2.0,
                );
                let ns_yaw = yaw + jitter(rng, yj);
                let ns = place(rng, "nightstand", ns_center, ns_size, ns_yaw)?;
                let ns_box = ns.bbox.expect("annotated");
                out.push(ns);
                if rng.random_range(0.0..1.0) < 0.6 {
                    let lamp_size = DVec3::new(
                        sample(rng, (0.24, 0.34)),
                        sample(rng, (0.24, 0.34)),
                        sample(rng, (0.42, 0.58)),
                    );
                    let lc = DVec3::new(
                        ns_box.center.x + jitter(rng, 0.04),
                        ns_box.center.y + jitter(rng, 0.04),
                        ns_size.z + lamp_size.z / 2.0,
                    );
                    let lamp_yaw = jitter(rng, yj);
                    out.push(place(rng, "lamp", lc, lamp_size, lamp_yaw)?);
                }
            }
        }
        TemplateName::OfficeArea => {
            let size = DVec3::new(
                sample(rng, (1.2, 1.6)),
                sample(rng, (0.6, 0.8)),
                sample(rng, (0.72, 0.78)),
            );
            // desk faces the wall it stands at
            let yaw = std::f64::consts::PI + jitter(rng, yj);
            let center = DVec3::new(
                jitter(rng, 0.6),
                -room.half_y + size.y / 2.0 + 0.05,
                size.z / 2.0,
            );
            let desk = place(rng, "desk", center, size, yaw)?;
            let desk_box = desk.bbox.expect("annotated");
            out.push(desk);
            let ch_size = DVec3::new(
                sample(rng, (0.45, 0.55)),
                sample(rng, (0.5, 0.6)),
                sample(rng, (0.85, 1.0)),
            );
            let cc = DVec3::new(
                desk_box.center.x + jitter(rng, j),
                desk_box.center.y + size.y / 2.0 + ch_size.y / 2.0 + 0.15 + jitter(rng, j),
                ch_size.z / 2.0,
            );
            let chair_yaw = std::f64::consts::PI + jitter(rng, 0.4);
            out.push(place(rng, "chair", cc, ch_size, chair_yaw)?);
            if rng.random_range(0.0..1.0) < 0.75 {
                let mon_size = DVec3::new(
                    sample(rng, (0.45, 0.6)),
                    sample(rng, (0.18, 0.24)),
                    sample(rng, (0.35, 0.45)),
                );
                let offset = DMat3::from_rotation_z(yaw)
                    * DVec3::new(jitter(rng, 0.25), 0.05 + jitter(rng, 0.05), 0.0);
                let mc = DVec3::new(
                    desk_box.center.x + offset.x,
                    desk_box.center.y + offset.y,
                    size.z + mon_size.z / 2.0,
                );
                let mon_yaw = yaw + jitter(rng, yj);
                out.push(place(rng, "monitor", mc, mon_size, mon_yaw)?);
            }
        }
        TemplateName::LoungingArea => {
            let size = DVec3::new(
                sample(rng, (1.7, 2.2)),
                sample(rng, (0.85, 1.0)),
                sample(rng, (0.72, 0.88)),
            );
            let yaw = jitter(rng, yj);
            let center = DVec3::new(
                jitter(rng, 0.5),
                -room.half_y + size.y / 2.0 + 0.05,
                size.z / 2.0,
            );
            let sofa = place(rng, "sofa", center, size, yaw)?;
            let sofa_box = sofa.bbox.expect("annotated");
            out.push(sofa);
            if rng.random_range(0.0..1.0) < 0.85 {
                let ct_size = DVec3::new(
                    sample(rng, (0.9, 1.2)),
                    sample(rng, (0.55, 0.7)),
                    sample(rng, (0.38, 0.48)),
                );
                let offset = DMat3::from_rotation_z(yaw)
                    * DVec3::new(
                        jitter(rng, j * 1.5),
                        size.y / 2.0 + ct_size.y / 2.0 + 0.4 + jitter(rng, j),
                        0.0,
                    );
                let cc = DVec3::new(
                    sofa_box.center.x + offset.x,
                    sofa_box.center.y + offset.y,
                    ct_size.z / 2.0,
                );
                let ct_yaw = yaw + jitter(rng, yj);
                out.push(place(rng, "coffee_table", cc, ct_size, ct_yaw)?);
            }
            if rng.random_range(0.0..1.0) < 0.5 {
                let ot_size = DVec3::new(
                    sample(rng, (0.5, 0.7)),
                    sample(rng, (0.5, 0.7)),
                    sample(rng, (0.35, 0.45)),
                );
                let side = if rng.random_range(0..2) == 0 { -1.0 } else { 1.0 };
                let offset = DMat3::from_rotation_z(yaw)
                    * DVec3::new(
                        side * (size.x / 2.0 + ot_size.x / 2.0 + 0.2) + jitter(rng, j),
                        0.3 + jitter(rng, j),
                        0.0,
                    );
                let oc = DVec3::new(
                    sofa_box.center.x + offset.x,
                    sofa_box.center.y + offset.y,
                    ot_size.z / 2.0,
                );
                let ot_yaw = yaw + jitter(rng, yj);
                out.push(place(rng, "ottoman", oc, ot_size, ot_yaw)?);
            }
        }
        TemplateName::TableChairSet => {
            let size = DVec3::new(
                sample(rng, (1.3, 1.6)),
                sample(rng, (0.75, 0.9)),
                sample(rng, (0.72, 0.78)),
            );
            let yaw = jitter(rng, yj);
            let center = DVec3::new(
                jitter(rng, 0.5),
                -room.half_y * 0.2 + jitter(rng, 0.3),
                size.z / 2.0,
            );
            let table = place(rng, "table", center, size, yaw)?;
            let table_box = table.bbox.expect("annotated");
            out.push(table);
            let n_chairs = rng.random_range(2..=4usize);
            // chair slots on the two long sides, spread along x
            let slots = [(-0.28, -1.0), (0.28, 1.0), (0.28, -1.0), (-0.28, 1.0)];
            for (dx_frac, side) in slots.iter().take(n_chairs) {
                let ch_size = DVec3::new(
                    sample(rng, (0.45, 0.55)),
                    sample(rng, (0.5, 0.6)),
                    sample(rng, (0.85, 1.0)),
                );
                let dy = side * (size.y / 2.0 + ch_size.y / 2.0 + 0.08);
                let chair_yaw = if *side < 0.0 { 0.0 } else { std::f64::consts::PI };
                let offset = DMat3::from_rotation_z(yaw)
                    * DVec3::new(dx_frac * size.x + jitter(rng, j), dy + jitter(rng, j), 0.0);
                let cc = DVec3::new(
                    table_box.center.x + offset.x,
                    table_box.center.y + offset.y,
                    ch_size.z / 2.0,
                );
                let this_yaw = yaw + chair_yaw + jitter(rng, yj);
                out.push(place(rng, "chair", cc, ch_size, this_yaw)?);
            }
        }
    }
    Ok(out)
}

fn sample_clutter(
    rng: &mut ChaCha8Rng,
    cfg: &GeneratorConfig,
    room: &Room,
    keep_out: &[OrientedBox3],
) -> Vec<Placed> {
    let n = rng.random_range(cfg.clutter_count.0..=cfg.clutter_count.1);
    let mut out = Vec::new();
    for _ in 0..n {
        for _attempt in 0..10 {
            let size = DVec3::new(
                sample(rng, (0.15, 0.5)),
                sample(rng, (0.15, 0.5)),
                sample(rng, (0.15, 0.6)),
            );
            let center = DVec3::new(
                rng.random_range(-room.half_x + 0.4..room.half_x - 0.4),
                rng.random_range(-room.half_y + 0.4..room.half_y - 0.4),
                size.z / 2.0,
            );
            if keep_out.iter().any(|b| {
                b.inflated(1.25)
                    .contains(DVec3::new(center.x, center.y, b.center.z))
            }) {
                continue;
            }
            let shape = if rng.random_range(0..2) == 0 { "box" } else { "cylinder" };
            let bbox =
                OrientedBox3::new(center, size, rng.random_range(0.0..std::f64::consts::TAU))
                    .expect("positive size");
            let mesh = fit_mesh_to_box(&canonical_mesh(shape, 0), &bbox).expect("fits");
            out.push(Placed {
                category: "clutter".to_string(),
                bbox: None,
                mesh,
                annotate: false,
            });
            break;
        }
    }
    out
}

/// Camera pose looking at the major object from inside the room.
/// Returns `world_from_camera` (camera axes: x right, y down, z forward).
fn sample_camera(
    rng: &mut ChaCha8Rng,
    cfg: &GeneratorConfig,
    room: &Room,
    look_at: DVec3,
) -> Option<RigidTransform> {
    // azimuth within +-115 degrees of the major object's facing direction
    // (+y); room clamping keeps the pose inside regardless
    let azim = std::f64::consts::FRAC_PI_2 + rng.random_range(-2.0..2.0);
    let dist = sample(rng, cfg.camera_distance);
    let height = sample(rng, cfg.camera_height);
    let pos = DVec3::new(
        (look_at.x + dist * azim.cos()).clamp(-room.half_x + 0.25, room.half_x - 0.25),
        (look_at.y + dist * azim.sin()).clamp(-room.half_y + 0.25, room.half_y - 0.25),
        height.min(room.height - 0.2),
    );
    let target = look_at
        + DVec3::new(jitter(rng, 0.8), jitter(rng, 0.8), rng.random_range(0.1..0.8));
    let forward = (target - pos).normalize();
    let pitch_deg = forward.z.asin().to_degrees();
    if pitch_deg < cfg.camera_pitch_deg.0 || pitch_deg > cfg.camera_pitch_deg.1 {
        return None;
    }
    let right = forward.cross(DVec3::Z);
    if right.length() < 1e-6 {
        return None;
    }
    let right = right.normalize();
    let down = forward.cross(right);
    Some(RigidTransform::new(DMat3::from_cols(right, down, forward), pos))
}

/// Generates one scene. Deterministic in `(cfg, seed)`.
pub fn generate_scene(cfg: &GeneratorConfig, seed: u64) -> Result<GeneratedScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..cfg.max_retries {
        let template = pick_template(&mut rng, &cfg.template_weights);
        let room = Room {
            half_x: sample(&mut rng, cfg.room_side) / 2.0,
            half_y: sample(&mut rng, cfg.room_side) / 2.0,
            height: sample(&mut rng, cfg.room_height),
        };
        let mut pieces = sample_furniture(&mut rng, cfg, template, &room)?;
        let keep_out: Vec<OrientedBox3> = pieces.iter().filter_map(|p| p.bbox).collect();
        pieces.extend(sample_clutter(&mut rng, cfg, &room, &keep_out));
        pieces.extend(room_shell(&room));

        let major_center = pieces[0].bbox.expect("major annotated").center;
        let Some(world_from_camera_room) = sample_camera(&mut rng, cfg, &room, major_center)
        else {
            continue;
        };

        // random global yaw + offset: world orientation must not be learnable
        let global_yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let global = RigidTransform::from_yaw_translation(
            global_yaw,
            DVec3::new(jitter(&mut rng, 1.0), jitter(&mut rng, 1.0), 0.0),
        );
        let world_from_camera = global.compose(&world_from_camera_room);
        let cam_from_world = world_from_camera.inverse();
        let cam_pos = world_from_camera.translation;

        // move everything into the world frame
        for p in &mut pieces {
            p.mesh.transform(&global);
            p.bbox = p
                .bbox
                .map(|b| b.transformed(global_yaw, global.translation));
        }

        // render each piece separately to know per-object visibility
        let cam = cfg.camera;
        let mut depth = DepthImage::new(cam.width, cam.height);
        let mut winner = vec![usize::MAX; cam.width * cam.height];
        for (idx, p) in pieces.iter().enumerate() {
            let mesh_cam = p.mesh.transformed(&cam_from_world);
            let img = render_mesh_depth(&mesh_cam, &cam);
            for (pi, v) in img.values().iter().enumerate() {
                if *v > 0.0 && (depth.values()[pi] == 0.0 || *v < depth.values()[pi]) {
                    depth.values_mut()[pi] = *v;
                    winner[pi] = idx;
                }
            }
        }
        let mut visible = vec![0usize; pieces.len()];
        for w in &winner {
            if *w != usize::MAX {
                visible[*w] += 1;
            }
        }

        // the major object must actually be in view
        if visible[0] < cfg.min_visible_pixels.max(150) {
            continue;
        }

        // annotated wall: the visible one farthest along the view direction
        let forward_w = world_from_camera.rotation.col(2);
        let horiz = DVec3::new(forward_w.x, forward_w.y, 0.0).normalize_or_zero();
        let mut far_wall: Option<(usize, f64)> = None;
        for (idx, p) in pieces.iter().enumerate() {
            if p.category == "wall" && visible[idx] >= cfg.min_visible_pixels {
                let along = (p.bbox.expect("shell has boxes").center - cam_pos).dot(horiz);
                if far_wall.map(|(_, best)| along > best).unwrap_or(true) {
                    far_wall = Some((idx, along));
                }
            }
        }

        let mut objects = Vec::new();
        for (idx, p) in pieces.iter().enumerate() {
            let include = if p.annotate {
                visible[idx] >= cfg.min_visible_pixels || idx == 0
            } else {
                match p.category.as_str() {
                    "floor" | "ceiling" => visible[idx] >= cfg.min_visible_pixels,
                    "wall" => far_wall.map(|(w, _)| w == idx).unwrap_or(false),
                    _ => false,
                }
            };
            if include {
                let b = p.bbox.expect("annotated pieces carry boxes");
                // gravity-aligned camera frame: world axes, origin at camera
                objects.push(AnnotatedObject {
                    category: p.category.clone(),
                    bbox: OrientedBox3::new(b.center - cam_pos, b.size, b.yaw)?,
                });
            }
        }

        let annotation = SceneAnnotation {
            scene_type: template.as_str().to_string(),
            objects,
            camera: cam,
            world_from_camera,
        };

        let mut mesh_gravity = TriMesh::default();
        let to_gravity = RigidTransform::new(DMat3::IDENTITY, -cam_pos);
        for p in &pieces {
            mesh_gravity.merge(&p.mesh.transformed(&to_gravity));
        }

        return Ok(GeneratedScene {
            depth,
            annotation,
            mesh_gravity,
        });
    }
    Err(Error::SceneGen(format!(
        "no valid camera/placement found in {} retries (seed {seed})",
        cfg.max_retries
    )))
}

// ---------------------------------------------------------------------------
// Dataset generation

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneEntry {
    pub id: String,
    pub template: String,
    pub split: String,
    pub depth: String,
    pub annotation: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub scenes: Vec<SceneEntry>,
    pub skipped: Vec<String>,
}

impl DatasetManifest {
    pub fn split<'a>(&'a self, split: &'a str) -> impl Iterator<Item = &'a SceneEntry> + 'a {
        self.scenes.iter().filter(move |e| e.split == split)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&json).map_err(|e| Error::json(path, e))
    }
}

/// 70/10/20 split by hashing scene indices against the dataset seed: scenes
/// are ranked by hash and quantile boundaries rounded, so proportions hold
/// within one scene.
pub fn assign_splits(seed: u64, n: usize) -> Vec<&'static str> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|i| derive_seed(seed, "split", *i as u64));
    let n_train = ((n as f64) * 0.7).round() as usize;
    let n_val = ((n as f64) * 0.1).round() as usize;
    let mut out = vec!["test"; n];
    for (rank, idx) in order.into_iter().enumerate() {
        out[idx] = if rank < n_train {
            "train"
        } else if rank < n_train + n_val {
            "val"
        } else {
            "test"
        };
    }
    out
}

/// Writes `scenes/<id>_depth.png` + `scenes/<id>_ann.json` per scene and a
/// `manifest.json` with split assignments. Per-scene seeds derive from the
/// config seed and index, so any subset can be regenerated independently.
pub fn generate_dataset(
    cfg: &GeneratorConfig,
    n_scenes: usize,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    let scene_dir = out_dir.join("scenes");
    std::fs::create_dir_all(&scene_dir).map_err(|e| Error::io(&scene_dir, e))?;
    let splits = assign_splits(cfg.seed, n_scenes);
    let mut scenes = Vec::new();
    let mut skipped = Vec::new();
    for idx in 0..n_scenes {
        let id = format!("scene{idx:05}");
        let scene_seed = derive_seed(cfg.seed, "scene", idx as u64);
        match generate_scene(cfg, scene_seed) {
            Ok(scene) => {
                let depth_rel = format!("scenes/{id}_depth.png");
                let ann_rel = format!("scenes/{id}_ann.json");
                save_depth_png(&scene.depth, out_dir.join(&depth_rel))?;
                save_annotation(&scene.annotation, out_dir.join(&ann_rel))?;
                scenes.push(SceneEntry {
                    id,
                    template: scene.annotation.scene_type.clone(),
                    split: splits[idx].to_string(),
                    depth: depth_rel,
                    annotation: ann_rel,
                    seed: scene_seed,
                });
            }
            Err(e) => skipped.push(format!("{id}: {e}")),
        }
    }
    let manifest = DatasetManifest {
        seed: cfg.seed,
        scenes,
        skipped,
    };
    manifest.save(out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Loads one dataset scene (depth + annotation) given its manifest entry.
pub fn load_scene(
    dataset_dir: impl AsRef<Path>,
    entry: &SceneEntry,
) -> Result<(DepthImage, SceneAnnotation)> {
    let dir = dataset_dir.as_ref();
    let depth = load_depth_png(dir.join(&entry.depth))?;
    let ann = load_annotation(dir.join(&entry.annotation))?;
    Ok((depth, ann))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::backproject_depth;
    use crate::templates::{annotation_to_json, match_annotation_to_template};

    fn cfg(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            seed,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let c = cfg(0);
        let a = generate_scene(&c, 77).unwrap();
        let b = generate_scene(&c, 77).unwrap();
        assert_eq!(a.depth.values(), b.depth.values());
        assert_eq!(
            annotation_to_json(&a.annotation),
            annotation_to_json(&b.annotation)
        );
    }

    #[test]
    fn sleeping_scene_has_exactly_one_bed() {
        let c = GeneratorConfig {
            template_weights: [1.0, 0.0, 0.0, 0.0],
            ..cfg(1)
        };
        for seed in 0..5 {
            let scene = generate_scene(&c, seed).unwrap();
            assert_eq!(scene.annotation.scene_type, "sleeping_area");
            let beds = scene
                .annotation
                .objects
                .iter()
                .filter(|o| o.category == "bed")
                .count();
            assert_eq!(beds, 1);
        }
    }

    #[test]
    fn box_points_lie_on_scene_meshes() {
        let c = cfg(2);
        let scene = generate_scene(&c, 5).unwrap();
        let cloud = backproject_depth(&scene.depth, &scene.annotation.camera).unwrap();
        let rot_wc = scene.annotation.world_from_camera.rotation;
        let mut checked = 0;
        for (i, p_cam) in cloud.points.iter().enumerate() {
            if i % 37 != 0 {
                continue; // sampled; exact point-to-mesh distance is slow
            }
            let p_g = rot_wc * *p_cam;
            if scene.annotation.objects.iter().any(|o| o.bbox.contains(p_g)) {
                let d = scene.mesh_gravity.distance_to_point(p_g);
                assert!(d < 1e-3, "point {p_g:?} is {d} m off the scene surface");
                checked += 1;
            }
        }
        assert!(checked > 20, "only {checked} annotated-box points sampled");
    }

    #[test]
    fn annotations_match_their_own_template_without_dropping_major() {
        use std::collections::BTreeMap;
        let c = cfg(3);
        let mut by_type: BTreeMap<String, Vec<SceneAnnotation>> = BTreeMap::new();
        for seed in 0..24 {
            let scene = generate_scene(&c, seed).unwrap();
            by_type
                .entry(scene.annotation.scene_type.clone())
                .or_default()
                .push(scene.annotation);
        }
        for (name, anns) in &by_type {
            let template_name = TemplateName::from_str_opt(name).unwrap();
            let tpl = crate::templates::learn_template(anns, &BTreeMap::new(), template_name, 0)
                .unwrap();
            for ann in anns {
                let gt = match_annotation_to_template(ann, &tpl).unwrap();
                assert!(!gt.dropped.iter().any(|c| c == tpl.major_category.as_str()));
                let major_anchor = tpl.anchors_of(&tpl.major_category).next().unwrap();
                assert!(
                    gt.anchors
                        .iter()
                        .find(|a| a.anchor_id == major_anchor.id)
                        .unwrap()
                        .exists
                );
            }
        }
    }

    #[test]
    fn dataset_writes_files_and_exact_splits() {
        let dir = std::env::temp_dir().join("deepcontext_gen_test");
        let _ = std::fs::remove_dir_all(&dir);
        let manifest = generate_dataset(&cfg(4), 10, &dir).unwrap();
        assert_eq!(manifest.scenes.len(), 10);
        assert!(manifest.skipped.is_empty());
        assert_eq!(manifest.split("train").count(), 7);
        assert_eq!(manifest.split("val").count(), 1);
        assert_eq!(manifest.split("test").count(), 2);
        for entry in &manifest.scenes {
            assert!(dir.join(&entry.depth).exists());
            assert!(dir.join(&entry.annotation).exists());
        }
        let (depth, ann) = load_scene(&dir, &manifest.scenes[0]).unwrap();
        assert_eq!(depth.width, ann.camera.width);

        // same cfg + seed reproduces the manifest byte-for-byte
        let dir2 = std::env::temp_dir().join("deepcontext_gen_test2");
        let _ = std::fs::remove_dir_all(&dir2);
        let manifest2 = generate_dataset(&cfg(4), 10, &dir2).unwrap();
        assert_eq!(manifest, manifest2);
    }
}
