//! Scene templates: canonical anchor layouts learned from annotated scenes,
//! and conversion of raw annotations into template-indexed ground truth.

mod hungarian;
mod kmeans;

pub use hungarian::{assign_min_cost, assignment_cost};
pub use kmeans::kmeans;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::geometry::{normalize_yaw, CameraIntrinsics, OrientedBox3, RigidTransform};
use glam::{DMat3, DVec3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Room-surface categories modeled as thin regular objects.
pub const LAYOUT_CATEGORIES: [&str; 3] = ["floor", "wall", "ceiling"];
/// Thickness assigned to learned layout anchors.
pub const LAYOUT_THICKNESS: f64 = 0.1;

pub fn is_layout_category(category: &str) -> bool {
    LAYOUT_CATEGORIES.contains(&category)
}

/// The four functional-area templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    SleepingArea,
    OfficeArea,
    LoungingArea,
    TableChairSet,
}

impl TemplateName {
    pub const ALL: [TemplateName; 4] = [
        TemplateName::SleepingArea,
        TemplateName::OfficeArea,
        TemplateName::LoungingArea,
        TemplateName::TableChairSet,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateName::SleepingArea => "sleeping_area",
            TemplateName::OfficeArea => "office_area",
            TemplateName::LoungingArea => "lounging_area",
            TemplateName::TableChairSet => "table_chair_set",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Index used for classifier labels; stable across the crate.
    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|t| t == self).expect("member of ALL")
    }

    /// The object category whose instance defines the template frame.
    pub fn major_category(&self) -> &'static str {
        match self {
            TemplateName::SleepingArea => "bed",
            TemplateName::OfficeArea => "desk",
            TemplateName::LoungingArea => "sofa",
            TemplateName::TableChairSet => "table",
        }
    }
}

/// A canonical object slot in a template.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectAnchor {
    pub id: usize,
    pub category: String,
    /// Template-frame box, yaw 0 by construction.
    pub bbox: OrientedBox3,
}

/// Learned canonical layout of one functional area.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTemplate {
    pub name: TemplateName,
    pub major_category: String,
    pub anchors: Vec<ObjectAnchor>,
}

impl SceneTemplate {
    pub fn anchors_of<'a>(
        &'a self,
        category: &'a str,
    ) -> impl Iterator<Item = &'a ObjectAnchor> + 'a {
        self.anchors.iter().filter(move |a| a.category == category)
    }
}

/// One annotated object instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedObject {
    pub category: String,
    pub bbox: OrientedBox3,
}

/// Ground-truth annotation of one depth image. Boxes live in the
/// gravity-aligned camera frame (world axes, origin at the camera center).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAnnotation {
    /// Template name, or "other" for scenes outside the template set.
    pub scene_type: String,
    pub objects: Vec<AnnotatedObject>,
    pub camera: CameraIntrinsics,
    pub world_from_camera: RigidTransform,
}

impl SceneAnnotation {
    pub fn template(&self) -> Option<TemplateName> {
        TemplateName::from_str_opt(&self.scene_type)
    }

    /// Non-layout objects (the detection ground truth).
    pub fn furniture(&self) -> impl Iterator<Item = &AnnotatedObject> {
        self.objects.iter().filter(|o| !is_layout_category(&o.category))
    }
}

/// Per-anchor ground truth after matching an annotation onto a template.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorTruth {
    pub anchor_id: usize,
    pub exists: bool,
    /// Template-frame target box, present iff `exists`.
    pub target: Option<OrientedBox3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateGroundTruth {
    pub template: TemplateName,
    pub align_yaw: f64,
    pub align_translation: DVec3,
    pub anchors: Vec<AnchorTruth>,
    /// Categories of annotated objects that could not be matched (clutter or
    /// anchor overflow); informational.
    pub dropped: Vec<String>,
}

/// Transform mapping the annotation frame onto the template frame: rotate by
/// `yaw`, then translate. Defined so the chosen major object lands at the
/// origin with yaw 0.
pub fn align_to_major(annotation: &SceneAnnotation, major_category: &str) -> Result<(f64, DVec3)> {
    let major = annotation
        .objects
        .iter()
        .filter(|o| o.category == major_category)
        .max_by(|a, b| {
            a.bbox
                .volume()
                .partial_cmp(&b.bbox.volume())
                .expect("finite volumes")
        })
        .ok_or_else(|| Error::NoMajorObject(major_category.to_string()))?;
    let yaw = normalize_yaw(-major.bbox.yaw);
    let rot = DMat3::from_rotation_z(yaw);
    let translation = -(rot * major.bbox.center);
    Ok((yaw, translation))
}

/// Applies an alignment `(yaw, translation)` to a box.
pub fn align_box(bbox: &OrientedBox3, yaw: f64, translation: DVec3) -> OrientedBox3 {
    bbox.transformed(yaw, translation)
}

/// Learns a template from annotated scenes of one type: align every scene on
/// its major object, cluster each category's (center, size) 6-vectors with
/// k-means, and keep centroids as anchors. Layout categories get their thin
/// axis pinned to [`LAYOUT_THICKNESS`].
pub fn learn_template(
    scenes: &[SceneAnnotation],
    k_per_category: &BTreeMap<String, usize>,
    name: TemplateName,
    seed: u64,
) -> Result<SceneTemplate> {
    if scenes.is_empty() {
        return Err(Error::SceneGen("no scenes to learn a template from".into()));
    }
    let major_category = name.major_category();
    let mut per_category: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for scene in scenes {
        let (yaw, t) = align_to_major(scene, major_category)?;
        for obj in &scene.objects {
            let b = align_box(&obj.bbox, yaw, t);
            per_category.entry(obj.category.clone()).or_default().push(vec![
                b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z,
            ]);
        }
    }

    let mut anchors = Vec::new();
    let mut next_id = 0;
    for (category, points) in &per_category {
        let k = k_per_category.get(category).copied().unwrap_or_else(|| {
            if category == major_category || is_layout_category(category) {
                1
            } else {
                2
            }
        });
        let centroids = kmeans(points, k, derive_seed(seed, category, 0));
        for c in centroids {
            let mut size = DVec3::new(c[3], c[4], c[5]);
            let center = DVec3::new(c[0], c[1], c[2]);
            if is_layout_category(category) {
                match category.as_str() {
                    "floor" | "ceiling" => size.z = LAYOUT_THICKNESS,
                    _ => {
                        // wall: pin the thin horizontal axis
                        if size.x <= size.y {
                            size.x = LAYOUT_THICKNESS;
                        } else {
                            size.y = LAYOUT_THICKNESS;
                        }
                    }
                }
            }
            anchors.push(ObjectAnchor {
                id: next_id,
                category: category.clone(),
                bbox: OrientedBox3::new(center, size, 0.0)?,
            });
            next_id += 1;
        }
    }

    Ok(SceneTemplate {
        name,
        major_category: major_category.to_string(),
        anchors,
    })
}

/// Matches an annotation's objects onto template anchors with per-category
/// minimum-cost assignment; cost is `||Δcenter|| + ||Δsize||` in the aligned
/// frame. Unmatched anchors are marked non-existent, unmatched objects are
/// dropped.
pub fn match_annotation_to_template(
    annotation: &SceneAnnotation,
    template: &SceneTemplate,
) -> Result<TemplateGroundTruth> {
    let (yaw, t) = align_to_major(annotation, &template.major_category)?;

    let mut by_category: BTreeMap<&str, Vec<OrientedBox3>> = BTreeMap::new();
    for obj in &annotation.objects {
        by_category
            .entry(obj.category.as_str())
            .or_default()
            .push(align_box(&obj.bbox, yaw, t));
    }

    let mut truth: BTreeMap<usize, AnchorTruth> = template
        .anchors
        .iter()
        .map(|a| {
            (
                a.id,
                AnchorTruth {
                    anchor_id: a.id,
                    exists: false,
                    target: None,
                },
            )
        })
        .collect();
    let mut dropped = Vec::new();

    for (category, boxes) in &by_category {
        let anchor_list: Vec<&ObjectAnchor> = template.anchors_of(category).collect();
        if anchor_list.is_empty() {
            dropped.extend(boxes.iter().map(|_| category.to_string()));
            continue;
        }
        let cost: Vec<Vec<f64>> = boxes
            .iter()
            .map(|b| {
                anchor_list
                    .iter()
                    .map(|a| {
                        (b.center - a.bbox.center).length() + (b.size - a.bbox.size).length()
                    })
                    .collect()
            })
            .collect();
        let assign = assign_min_cost(&cost);
        for (obj_idx, anchor_idx) in assign.iter().enumerate() {
            match anchor_idx {
                Some(j) => {
                    let entry = truth
                        .get_mut(&anchor_list[*j].id)
                        .expect("anchor ids indexed");
                    entry.exists = true;
                    entry.target = Some(boxes[obj_idx]);
                }
                None => dropped.push(category.to_string()),
            }
        }
    }

    // keep template anchor order
    let anchors = template
        .anchors
        .iter()
        .map(|a| truth.remove(&a.id).expect("all ids present"))
        .collect();

    Ok(TemplateGroundTruth {
        template: template.name,
        align_yaw: yaw,
        align_translation: t,
        anchors,
        dropped,
    })
}

// ---------------------------------------------------------------------------
// JSON schemas

#[derive(Serialize, Deserialize)]
struct AnchorDto {
    id: usize,
    category: String,
    center: [f64; 3],
    size: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct TemplateDto {
    name: TemplateName,
    major_category: String,
    anchors: Vec<AnchorDto>,
}

#[derive(Serialize, Deserialize)]
struct ObjectDto {
    category: String,
    center: [f64; 3],
    size: [f64; 3],
    yaw: f64,
}

#[derive(Serialize, Deserialize)]
struct AnnotationDto {
    scene_type: String,
    objects: Vec<ObjectDto>,
    intrinsics: CameraIntrinsics,
    /// Row-major 4x4 camera-to-world matrix.
    world_from_camera: Vec<f64>,
}

pub fn template_to_json(template: &SceneTemplate) -> String {
    let dto = TemplateDto {
        name: template.name,
        major_category: template.major_category.clone(),
        anchors: template
            .anchors
            .iter()
            .map(|a| AnchorDto {
                id: a.id,
                category: a.category.clone(),
                center: a.bbox.center.to_array(),
                size: a.bbox.size.to_array(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&dto).expect("template serializes")
}

pub fn template_from_json(json: &str) -> Result<SceneTemplate> {
    let dto: TemplateDto = serde_json::from_str(json).map_err(|e| Error::Parse {
        what: "template json".into(),
        detail: e.to_string(),
    })?;
    let anchors = dto
        .anchors
        .into_iter()
        .map(|a| {
            Ok(ObjectAnchor {
                id: a.id,
                category: a.category,
                bbox: OrientedBox3::new(DVec3::from_array(a.center), DVec3::from_array(a.size), 0.0)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SceneTemplate {
        name: dto.name,
        major_category: dto.major_category,
        anchors,
    })
}

pub fn save_templates(templates: &[SceneTemplate], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let docs: Vec<serde_json::Value> = templates
        .iter()
        .map(|t| serde_json::from_str(&template_to_json(t)).expect("roundtrips"))
        .collect();
    let json = serde_json::to_string_pretty(&docs).expect("serializes");
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_templates(path: impl AsRef<Path>) -> Result<Vec<SceneTemplate>> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let docs: Vec<serde_json::Value> = serde_json::from_str(&json).map_err(|e| Error::json(path, e))?;
    docs.into_iter()
        .map(|d| template_from_json(&d.to_string()))
        .collect()
}

pub fn annotation_to_json(ann: &SceneAnnotation) -> String {
    let dto = AnnotationDto {
        scene_type: ann.scene_type.clone(),
        objects: ann
            .objects
            .iter()
            .map(|o| ObjectDto {
                category: o.category.clone(),
                center: o.bbox.center.to_array(),
                size: o.bbox.size.to_array(),
                yaw: o.bbox.yaw,
            })
            .collect(),
        intrinsics: ann.camera,
        world_from_camera: ann.world_from_camera.to_matrix_rows().to_vec(),
    };
    serde_json::to_string_pretty(&dto).expect("annotation serializes")
}

pub fn annotation_from_json(json: &str) -> Result<SceneAnnotation> {
    let dto: AnnotationDto = serde_json::from_str(json).map_err(|e| Error::Parse {
        what: "annotation json".into(),
        detail: e.to_string(),
    })?;
    if dto.world_from_camera.len() != 16 {
        return Err(Error::Parse {
            what: "annotation json".into(),
            detail: format!(
                "world_from_camera must be 16 row-major values, got {}",
                dto.world_from_camera.len()
            ),
        });
    }
    let mut m = [0.0; 16];
    m.copy_from_slice(&dto.world_from_camera);
    let objects = dto
        .objects
        .into_iter()
        .map(|o| {
            Ok(AnnotatedObject {
                category: o.category,
                bbox: OrientedBox3::new(
                    DVec3::from_array(o.center),
                    DVec3::from_array(o.size),
                    o.yaw,
                )?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SceneAnnotation {
        scene_type: dto.scene_type,
        objects,
        camera: dto.intrinsics,
        world_from_camera: RigidTransform::from_matrix_rows(&m),
    })
}

pub fn save_annotation(ann: &SceneAnnotation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, annotation_to_json(ann)).map_err(|e| Error::io(path, e))
}

pub fn load_annotation(path: impl AsRef<Path>) -> Result<SceneAnnotation> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    annotation_from_json(&json)
}
