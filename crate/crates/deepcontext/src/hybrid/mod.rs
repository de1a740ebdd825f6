//! Hybrid depth synthesis: swap annotated objects for shape-matched CAD
//! primitives rendered in place, keeping every pixel outside the annotated
//! boxes untouched.

use crate::error::{Error, Result};
use crate::geometry::{
    backproject_depth, fit_mesh_to_box, load_obj, render_mesh_depth, CameraIntrinsics, DepthImage,
    Frame, OrientedBox3, PointCloud, TriMesh,
};
use crate::scene_gen::furniture;
use crate::templates::SceneAnnotation;
use glam::{DMat3, DVec3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// CAD model library keyed by category.
#[derive(Debug, Clone, Default)]
pub struct ModelRepository {
    entries: Vec<ModelEntry>,
}

#[derive(Debug, Clone)]
pub struct ModelEntry {
    pub category: String,
    pub id: String,
    pub mesh: TriMesh,
}

impl ModelRepository {
    /// Bundled primitive library: every canonical furniture variant.
    pub fn builtin() -> Self {
        let mut entries = Vec::new();
        for cat in furniture::FURNITURE_CATEGORIES {
            for variant in 0..furniture::variant_count(cat) {
                entries.push(ModelEntry {
                    category: cat.to_string(),
                    id: format!("{cat}_{variant:02}"),
                    mesh: furniture::canonical_mesh(cat, variant),
                });
            }
        }
        Self { entries }
    }

    /// Loads `<category>/<id>.obj` files from a directory tree.
    pub fn from_obj_dir(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let mut entries = Vec::new();
        let mut categories: Vec<_> = std::fs::read_dir(root)
            .map_err(|e| Error::io(root, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .collect();
        categories.sort_by_key(|e| e.file_name());
        for cat_dir in categories {
            let category = cat_dir.file_name().to_string_lossy().into_owned();
            let mut files: Vec<_> = std::fs::read_dir(cat_dir.path())
                .map_err(|e| Error::io(cat_dir.path(), e))?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().extension().is_some_and(|x| x == "obj"))
                .collect();
            files.sort_by_key(|e| e.file_name());
            for file in files {
                let id = file
                    .path()
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                entries.push(ModelEntry {
                    category: category.clone(),
                    id,
                    mesh: load_obj(file.path())?,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn of_category<'a>(
        &'a self,
        category: &'a str,
    ) -> impl Iterator<Item = &'a ModelEntry> + 'a {
        self.entries.iter().filter(move |e| e.category == category)
    }

    pub fn get(&self, id: &str) -> Option<&ModelEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// How many top-ranked models each object draws its replacement from.
    pub shortlist_size: usize,
    /// Hybrid scenes generated per real scene.
    pub multiplier: usize,
    pub seed: u64,
    /// Inflation applied to annotation boxes when clearing object pixels.
    pub box_inflation: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            shortlist_size: 3,
            multiplier: 20,
            seed: 0,
            box_inflation: 1.05,
        }
    }
}

/// Renders the partial (self-occluded) view of a model fitted into a box:
/// fit, render from the scene camera, back-project.
///
/// The box lives in the gravity-aligned camera frame; `gravity_from_camera`
/// is the rotation between that frame and raw camera axes (identity when the
/// camera happens to be gravity-aligned). The returned cloud is in the
/// gravity-aligned frame, comparable to object clouds cut from the scene.
pub fn partial_view(
    mesh: &TriMesh,
    bbox: &OrientedBox3,
    cam: &CameraIntrinsics,
    gravity_from_camera: &DMat3,
) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Ok(PointCloud::new(Vec::new(), Frame::Gravity));
    }
    let fitted = fit_mesh_to_box(mesh, bbox)?;
    let camera_from_gravity = gravity_from_camera.transpose();
    let mesh_cam = TriMesh {
        vertices: fitted.vertices.iter().map(|p| camera_from_gravity * *p).collect(),
        triangles: fitted.triangles,
    };
    let depth = render_mesh_depth(&mesh_cam, cam);
    let cloud = backproject_depth(&depth, cam)?;
    Ok(PointCloud::new(
        cloud.points.iter().map(|p| *gravity_from_camera * *p).collect(),
        Frame::Gravity,
    ))
}

/// Symmetric mean-of-nearest-neighbor distance between two clouds:
/// the average over P of the distance to the closest point of V, plus the
/// same with the roles swapped.
pub fn shape_distance(p: &PointCloud, v: &PointCloud) -> Result<f64> {
    if p.is_empty() || v.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(mean_min_dist(&p.points, &v.points) + mean_min_dist(&v.points, &p.points))
}

fn mean_min_dist(from: &[DVec3], to: &[DVec3]) -> f64 {
    let mut acc = 0.0;
    for a in from {
        let mut best = f64::INFINITY;
        for b in to {
            let d2 = (*a - *b).length_squared();
            if d2 < best {
                best = d2;
            }
        }
        acc += best.sqrt();
    }
    acc / from.len() as f64
}

/// Ranks a category's models by how well their partial views match the
/// observed object cloud; returns the `n` best ids, ascending distance.
pub fn retrieve_models(
    object_cloud: &PointCloud,
    bbox: &OrientedBox3,
    cam: &CameraIntrinsics,
    gravity_from_camera: &DMat3,
    repo: &ModelRepository,
    category: &str,
    n: usize,
) -> Result<Vec<String>> {
    let mut scored: Vec<(f64, &str)> = Vec::new();
    for entry in repo.of_category(category) {
        let view = partial_view(&entry.mesh, bbox, cam, gravity_from_camera)?;
        if view.is_empty() || object_cloud.is_empty() {
            continue;
        }
        let d = shape_distance(object_cloud, &view)?;
        scored.push((d, &entry.id));
    }
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite distances")
            .then(a.1.cmp(b.1))
    });
    Ok(scored
        .into_iter()
        .take(n)
        .map(|(_, id)| id.to_string())
        .collect())
}

/// The cloud of scene points inside a box, in the gravity-aligned frame.
fn object_cloud(
    depth: &DepthImage,
    ann: &SceneAnnotation,
    bbox: &OrientedBox3,
) -> Result<PointCloud> {
    let cloud = backproject_depth(depth, &ann.camera)?;
    let rot = ann.world_from_camera.rotation;
    let points = cloud
        .points
        .iter()
        .map(|p| rot * *p)
        .filter(|p| bbox.contains(*p))
        .collect();
    Ok(PointCloud::new(points, Frame::Gravity))
}

/// Minimum scene points inside a box for retrieval to be attempted.
const MIN_OBJECT_POINTS: usize = 12;

/// Per-object model shortlists for one scene. Objects that cannot be
/// replaced (layout surfaces, no models of the category, too few observed
/// points) get an empty shortlist.
pub fn object_shortlists(
    depth: &DepthImage,
    ann: &SceneAnnotation,
    repo: &ModelRepository,
    cfg: &SynthesisConfig,
) -> Result<Vec<Vec<String>>> {
    let rot_wc = ann.world_from_camera.rotation;
    let mut out = Vec::with_capacity(ann.objects.len());
    for obj in &ann.objects {
        if crate::templates::is_layout_category(&obj.category) {
            out.push(Vec::new());
            continue;
        }
        let cloud = object_cloud(depth, ann, &obj.bbox)?;
        if cloud.len() < MIN_OBJECT_POINTS {
            out.push(Vec::new());
            continue;
        }
        out.push(retrieve_models(
            &cloud,
            &obj.bbox,
            &ann.camera,
            &rot_wc,
            repo,
            &obj.category,
            cfg.shortlist_size,
        )?);
    }
    Ok(out)
}

/// Generates one hybrid depth image: object pixels are cleared (points inside
/// the inflated boxes), a model from each object's shortlist is rendered in
/// place, and everything composites under z-buffer priority. Pixels outside
/// all boxes are preserved bit-exactly.
pub fn synthesize_with_shortlists(
    depth: &DepthImage,
    ann: &SceneAnnotation,
    repo: &ModelRepository,
    shortlists: &[Vec<String>],
    cfg: &SynthesisConfig,
    rng_seed: u64,
) -> Result<DepthImage> {
    if shortlists.len() != ann.objects.len() {
        return Err(Error::EvalInput(format!(
            "{} shortlists for {} objects",
            shortlists.len(),
            ann.objects.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let rot_wc = ann.world_from_camera.rotation;
    let rot_cw = rot_wc.transpose();

    // choose a model per replaceable object (rng draws happen in object
    // order regardless of later failures, keeping outputs seed-stable)
    let chosen: Vec<Option<&ModelEntry>> = shortlists
        .iter()
        .map(|list| {
            if list.is_empty() {
                None
            } else {
                let pick = rng.random_range(0..list.len());
                repo.get(&list[pick])
            }
        })
        .collect();

    let mut out = depth.clone();

    // clear pixels whose back-projected point falls in any inflated box of a
    // replaced object
    let inflated: Vec<OrientedBox3> = ann
        .objects
        .iter()
        .zip(&chosen)
        .filter_map(|(o, c)| c.map(|_| o.bbox.inflated(cfg.box_inflation)))
        .collect();
    if inflated.is_empty() {
        return Ok(out);
    }
    for v in 0..depth.height {
        for u in 0..depth.width {
            let z = depth.get(u, v) as f64;
            if z <= 0.0 {
                continue;
            }
            let p_cam = ann.camera.unproject(u as f64, v as f64, z);
            let p_g = rot_wc * p_cam;
            if inflated.iter().any(|b| b.contains(p_g)) {
                out.set(u, v, 0.0);
            }
        }
    }

    // render each chosen model fitted to its (uninflated) box and composite
    for (obj, model) in ann.objects.iter().zip(&chosen) {
        let Some(entry) = model else { continue };
        // fit in the gravity frame (upright box), then rotate into camera axes
        let fitted_g = fit_mesh_to_box(&entry.mesh, &obj.bbox)?;
        let fitted_cam = TriMesh {
            vertices: fitted_g.vertices.iter().map(|p| rot_cw * *p).collect(),
            triangles: fitted_g.triangles.clone(),
        };
        let rendered = render_mesh_depth(&fitted_cam, &ann.camera);
        for (pi, v) in rendered.values().iter().enumerate() {
            if *v > 0.0 {
                let cur = out.values()[pi];
                if cur == 0.0 || *v < cur {
                    out.values_mut()[pi] = *v;
                }
            }
        }
    }
    Ok(out)
}

/// One-call synthesis: shortlist retrieval plus replacement rendering.
pub fn synthesize_scene(
    depth: &DepthImage,
    ann: &SceneAnnotation,
    repo: &ModelRepository,
    cfg: &SynthesisConfig,
    rng_seed: u64,
) -> Result<DepthImage> {
    let shortlists = object_shortlists(depth, ann, repo, cfg)?;
    synthesize_with_shortlists(depth, ann, repo, &shortlists, cfg, rng_seed)
}
