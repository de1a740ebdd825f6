//! The parsing pipeline: template classification, rotation/translation
//! estimation, and the two-pathway context network, plus the staged training
//! schema.
//!
//! Frame conventions, used consistently across training and inference:
//!
//! - `G` — gravity-aligned camera frame: world axes, origin at the camera
//!   (`p_G = R_wc * p_cam`). Annotations live here.
//! - scene frame — `G` recentered on the cloud centroid `mu`; the
//!   classification and rotation volumes are voxelized here.
//! - rotated frame — scene frame rotated by the (predicted or ground-truth)
//!   alignment yaw; the translation volume is voxelized here.
//! - template frame — rotated frame shifted by the major-object offset
//!   `o = R(yaw) * (c_major - mu)`, so the major object sits at the origin
//!   with yaw 0. The context volume is voxelized here and anchors decode
//!   here.

mod infer;
mod nets;
mod train;

pub use infer::{parse_depth_image, scene_centroid};
pub use nets::{
    accept_template, build_classifier, build_rotation_net, build_translation_net, build_trunk,
    classify_template, estimate_rotation, estimate_translation, parse_scene, volume_to_tensor,
    ContextNet, ModelSet, TrunkSpec, ACCEPT_CONFIDENCE,
};
pub use train::{
    train_staged, DepthSource, Stage, StageSchedule, TrainConfig, TrainData, TrainScene,
};

use crate::geometry::{normalize_yaw, OrientedBox3, RigidTransform};
use crate::templates::TemplateName;
use glam::{DMat3, DVec3};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Rotation grid: 36 bins of 10 degrees.

pub const ROTATION_BINS: usize = 36;

/// Nearest 10-degree bin, wrapping at 360.
pub fn yaw_to_bin(yaw: f64) -> usize {
    let deg = normalize_yaw(yaw).to_degrees();
    ((deg / 10.0).round() as usize) % ROTATION_BINS
}

/// Center of a rotation bin, radians.
pub fn bin_to_yaw(bin: usize) -> f64 {
    normalize_yaw((bin % ROTATION_BINS) as f64 * 10.0f64.to_radians())
}

// ---------------------------------------------------------------------------
// Translation grid: 0.5 m lattice, x,y in [-2.5, 2.5], z in [-1.5, 1.0],
// linear index ix*66 + iy*6 + iz, 726 cells total.

pub const TRANSLATION_CELLS: usize = 726;
const GRID_XY: usize = 11;
const GRID_Z: usize = 6;
const SPACING: f64 = 0.5;
const XY_MIN: f64 = -2.5;
const Z_MIN: f64 = -1.5;

fn axis_index(value: f64, min: f64, count: usize) -> usize {
    let i = ((value - min) / SPACING).round();
    i.clamp(0.0, (count - 1) as f64) as usize
}

/// Nearest lattice cell; out-of-range offsets clamp to the boundary.
pub fn offset_to_cell(offset: DVec3) -> usize {
    let ix = axis_index(offset.x, XY_MIN, GRID_XY);
    let iy = axis_index(offset.y, XY_MIN, GRID_XY);
    let iz = axis_index(offset.z, Z_MIN, GRID_Z);
    ix * (GRID_XY * GRID_Z) + iy * GRID_Z + iz
}

/// Exact lattice point of a cell index.
pub fn cell_to_offset(cell: usize) -> DVec3 {
    let cell = cell % TRANSLATION_CELLS;
    let ix = cell / (GRID_XY * GRID_Z);
    let iy = (cell / GRID_Z) % GRID_XY;
    let iz = cell % GRID_Z;
    DVec3::new(
        XY_MIN + ix as f64 * SPACING,
        XY_MIN + iy as f64 * SPACING,
        Z_MIN + iz as f64 * SPACING,
    )
}

// ---------------------------------------------------------------------------
// Box offset encoding: center deltas normalized by anchor size, log size
// ratios. Decoded boxes always have positive size.

pub fn encode_box_offset(anchor: &OrientedBox3, target: &OrientedBox3) -> [f64; 6] {
    let dc = (target.center - anchor.center) / anchor.size;
    let ds = (target.size / anchor.size).to_array().map(f64::ln);
    [dc.x, dc.y, dc.z, ds[0], ds[1], ds[2]]
}

pub fn decode_box_offset(anchor: &OrientedBox3, off: &[f64; 6]) -> OrientedBox3 {
    let center = anchor.center + DVec3::new(off[0], off[1], off[2]) * anchor.size;
    let size = anchor.size * DVec3::new(off[3].exp(), off[4].exp(), off[5].exp());
    OrientedBox3 {
        center,
        size,
        yaw: 0.0,
    }
}

// ---------------------------------------------------------------------------
// Alignment bookkeeping.

/// Scene-to-template alignment as the pipeline parameterizes it: a yaw, the
/// major-object offset in the rotated recentered frame, and the cloud
/// centroid the recentering used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub yaw: f64,
    /// `R(yaw) * (c_major - mu)`: where the major object sits relative to
    /// the cloud centroid, in the rotated frame.
    pub offset: [f64; 3],
    pub centroid: [f64; 3],
}

impl Alignment {
    pub fn new(yaw: f64, offset: DVec3, centroid: DVec3) -> Self {
        Self {
            yaw: normalize_yaw(yaw),
            offset: offset.to_array(),
            centroid: centroid.to_array(),
        }
    }

    pub fn offset_vec(&self) -> DVec3 {
        DVec3::from_array(self.offset)
    }

    pub fn centroid_vec(&self) -> DVec3 {
        DVec3::from_array(self.centroid)
    }

    /// `p_T = R(yaw) * (p_G - mu) - offset`
    pub fn template_from_gravity(&self) -> RigidTransform {
        let rot = DMat3::from_rotation_z(self.yaw);
        RigidTransform::new(rot, -(rot * self.centroid_vec()) - self.offset_vec())
    }

    /// Maps a gravity-frame box into the template frame.
    pub fn apply_to_box(&self, bbox: &OrientedBox3) -> OrientedBox3 {
        let t = self.template_from_gravity();
        OrientedBox3 {
            center: t.apply(bbox.center),
            size: bbox.size,
            yaw: normalize_yaw(bbox.yaw + self.yaw),
        }
    }

    /// Maps a template-frame box back into the gravity frame.
    pub fn invert_box(&self, bbox: &OrientedBox3) -> OrientedBox3 {
        let t = self.template_from_gravity().inverse();
        OrientedBox3 {
            center: t.apply(bbox.center),
            size: bbox.size,
            yaw: normalize_yaw(bbox.yaw - self.yaw),
        }
    }
}

/// Ground-truth alignment of an annotated scene given the cloud centroid:
/// yaw from the major object, offset from its center.
pub fn ground_truth_alignment(
    annotation: &crate::templates::SceneAnnotation,
    major_category: &str,
    centroid: DVec3,
) -> crate::error::Result<Alignment> {
    let (yaw, _t) = crate::templates::align_to_major(annotation, major_category)?;
    let major = annotation
        .objects
        .iter()
        .filter(|o| o.category == major_category)
        .max_by(|a, b| {
            a.bbox
                .volume()
                .partial_cmp(&b.bbox.volume())
                .expect("finite")
        })
        .expect("align_to_major succeeded");
    let rot = DMat3::from_rotation_z(yaw);
    let offset = rot * (major.bbox.center - centroid);
    Ok(Alignment::new(yaw, offset, centroid))
}

// ---------------------------------------------------------------------------
// Parse output.

/// Per-anchor prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorParse {
    pub anchor_id: usize,
    pub category: String,
    /// Existence probability in [0, 1].
    pub existence: f64,
    /// Decoded box in the template frame.
    pub bbox_template: OrientedBox3,
    /// Decoded box in the gravity-aligned camera frame.
    pub bbox_camera: OrientedBox3,
    /// Set when the anchor's ROI fell entirely outside the feature grid
    /// (existence is forced to 0).
    pub roi_outside: bool,
}

/// Full parse of one depth image, or a rejection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneParse {
    pub rejected: bool,
    /// Classifier probabilities in `TemplateName::ALL` order.
    pub probabilities: [f64; 4],
    pub template: Option<TemplateName>,
    pub alignment: Option<Alignment>,
    pub anchors: Vec<AnchorParse>,
}

impl SceneParse {
    pub fn rejection(probabilities: [f64; 4]) -> Self {
        Self {
            rejected: true,
            probabilities,
            template: None,
            alignment: None,
            anchors: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parse serializes")
    }

    pub fn from_json(json: &str) -> crate::error::Result<Self> {
        serde_json::from_str(json).map_err(|e| crate::error::Error::Parse {
            what: "scene parse json".into(),
            detail: e.to_string(),
        })
    }
}
