//! Interactive browser demo built on the core crate: generate synthetic
//! depth scenes, scrub through their TSDF volumes, and explore exact IoU of
//! yawed boxes. Compiled to WebAssembly with wasm-bindgen; the page under
//! `www/` drives these exports from plain JavaScript.

use deepcontext::geometry::{OrientedBox3, RigidTransform};
use deepcontext::scene_gen::{generate_scene, GeneratorConfig};
use deepcontext::templates::annotation_to_json;
use deepcontext::tsdf::{compute_tsdf, desk_grid, TsdfVolume};
use glam::DVec3;
use wasm_bindgen::prelude::*;

/// A generated scene held on the wasm side; JS pulls pixel buffers and JSON
/// out of it.
#[wasm_bindgen]
pub struct DemoScene {
    depth: deepcontext::geometry::DepthImage,
    annotation: deepcontext::templates::SceneAnnotation,
    tsdf: TsdfVolume,
}

#[wasm_bindgen]
impl DemoScene {
    /// Generates a scene. `template` selects one of the four layouts
    /// (0 sleeping, 1 office, 2 lounging, 3 table&chair), -1 for a random
    /// mix.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, template: i32) -> Result<DemoScene, JsValue> {
        let mut weights = [1.0; 4];
        if (0..4).contains(&template) {
            weights = [0.0; 4];
            weights[template as usize] = 1.0;
        }
        let cfg = GeneratorConfig {
            template_weights: weights,
            seed,
            ..GeneratorConfig::default()
        };
        let scene = generate_scene(&cfg, seed).map_err(to_js)?;

        // recentered gravity-aligned volume, same framing the networks see
        let rot = scene.annotation.world_from_camera.rotation;
        let cloud = deepcontext::geometry::backproject_depth(&scene.depth, &scene.annotation.camera)
            .map_err(to_js)?;
        let mu: DVec3 =
            cloud.points.iter().map(|p| rot * *p).sum::<DVec3>() / cloud.points.len().max(1) as f64;
        let frame = RigidTransform::new(rot, -mu);
        let tsdf = compute_tsdf(&scene.depth, &scene.annotation.camera, &frame, &desk_grid())
            .map_err(to_js)?;

        Ok(DemoScene {
            depth: scene.depth,
            annotation: scene.annotation,
            tsdf,
        })
    }

    pub fn width(&self) -> usize {
        self.depth.width
    }

    pub fn height(&self) -> usize {
        self.depth.height
    }

    /// Depth image as RGBA bytes, near = bright, missing = dark blue.
    pub fn depth_rgba(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.depth.width * self.depth.height * 4);
        for v in self.depth.values() {
            if *v <= 0.0 {
                out.extend_from_slice(&[20, 24, 60, 255]);
            } else {
                let t = (1.0 - (v / 6.5).min(1.0)) as f64;
                let g = (40.0 + 215.0 * t) as u8;
                out.extend_from_slice(&[g, g, (60.0 + 150.0 * t) as u8, 255]);
            }
        }
        out
    }

    pub fn scene_type(&self) -> String {
        self.annotation.scene_type.clone()
    }

    pub fn annotation_json(&self) -> String {
        annotation_to_json(&self.annotation)
    }

    /// Annotated boxes as a flat JSON list for the top-view canvas:
    /// `[{category, corners: [[x,y];4], z0, z1}]` in the gravity frame.
    pub fn boxes_json(&self) -> String {
        let items: Vec<serde_json::Value> = self
            .annotation
            .objects
            .iter()
            .map(|o| {
                let (z0, z1) = o.bbox.z_interval();
                serde_json::json!({
                    "category": o.category,
                    "corners": o.bbox.footprint(),
                    "z0": z0,
                    "z1": z1,
                })
            })
            .collect();
        serde_json::Value::Array(items).to_string()
    }

    /// TSDF grid dimensions `[nx, ny, nz]`.
    pub fn tsdf_dims(&self) -> Vec<u32> {
        self.tsdf.config.dims.iter().map(|d| *d as u32).collect()
    }

    /// One horizontal TSDF slice as RGBA: orange outside surfaces, blue
    /// behind them, white at the zero crossing.
    pub fn tsdf_slice_rgba(&self, iz: usize) -> Vec<u8> {
        let [nx, ny, nz] = self.tsdf.config.dims;
        let iz = iz.min(nz - 1);
        let mut out = Vec::with_capacity(nx * ny * 4);
        for iy in 0..ny {
            for ix in 0..nx {
                let v = self.tsdf.get(ix, ny - 1 - iy, iz) as f64;
                let (r, g, b) = if v >= 0.0 {
                    // free space: white -> orange
                    let t = v;
                    (255.0, 255.0 - 130.0 * t, 255.0 - 215.0 * t)
                } else {
                    // occluded: white -> blue
                    let t = -v;
                    (255.0 - 215.0 * t, 255.0 - 130.0 * t, 255.0)
                };
                out.extend_from_slice(&[r as u8, g as u8, b as u8, 255]);
            }
        }
        out
    }
}

fn to_js(e: deepcontext::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Exact IoU of two upright boxes plus everything the canvas needs to draw
/// them: `{iou, a: corners, b: corners, inter: polygon, dz}`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn box_iou_explore(
    ax: f64,
    ay: f64,
    az: f64,
    asx: f64,
    asy: f64,
    asz: f64,
    ayaw_deg: f64,
    bx: f64,
    by: f64,
    bz: f64,
    bsx: f64,
    bsy: f64,
    bsz: f64,
    byaw_deg: f64,
) -> Result<String, JsValue> {
    let a = OrientedBox3::new(
        DVec3::new(ax, ay, az),
        DVec3::new(asx, asy, asz),
        ayaw_deg.to_radians(),
    )
    .map_err(to_js)?;
    let b = OrientedBox3::new(
        DVec3::new(bx, by, bz),
        DVec3::new(bsx, bsy, bsz),
        byaw_deg.to_radians(),
    )
    .map_err(to_js)?;
    let iou = deepcontext::geometry::box_iou_3d(&a, &b);
    let inter = deepcontext::geometry::clip_convex_polygon(&a.footprint(), &b.footprint());
    let (za0, za1) = a.z_interval();
    let (zb0, zb1) = b.z_interval();
    let dz = (za1.min(zb1) - za0.max(zb0)).max(0.0);
    Ok(serde_json::json!({
        "iou": iou,
        "a": a.footprint(),
        "b": b.footprint(),
        "inter": inter,
        "dz": dz,
    })
    .to_string())
}
