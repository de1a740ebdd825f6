//! End-to-end inference: depth image in, template-indexed scene parse out.

use super::nets::{classify_template, estimate_rotation, estimate_translation, parse_scene, ModelSet};
use super::{Alignment, SceneParse};
use crate::error::{Error, Result};
use crate::geometry::{backproject_depth, CameraIntrinsics, DepthImage, RigidTransform};
use crate::templates::SceneTemplate;
use crate::tsdf::compute_tsdf;
use glam::{DMat3, DVec3};

/// Centroid of the gravity-aligned cloud of a depth image.
pub fn scene_centroid(
    depth: &DepthImage,
    cam: &CameraIntrinsics,
    world_from_camera: &RigidTransform,
) -> Result<DVec3> {
    let cloud = backproject_depth(depth, cam)?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let rot = world_from_camera.rotation;
    let sum: DVec3 = cloud.points.iter().map(|p| rot * *p).sum();
    Ok(sum / cloud.points.len() as f64)
}

/// Full pipeline on one depth image. The camera's gravity alignment comes
/// from `world_from_camera` (only its rotation matters here); rejection is a
/// valid outcome when no template clears the confidence threshold.
///
/// Stages, each re-voxelizing the cloud in its own frame: classify on the
/// recentered volume, estimate the yaw, rotate and re-voxelize, estimate the
/// translation offset, shift into the template frame, then run the context
/// network over the template's anchors and decode boxes back into the
/// gravity-aligned camera frame.
pub fn parse_depth_image(
    depth: &DepthImage,
    cam: &CameraIntrinsics,
    world_from_camera: &RigidTransform,
    models: &ModelSet,
    templates: &[SceneTemplate],
) -> Result<SceneParse> {
    let classifier = models.classifier.as_ref().ok_or_else(|| Error::StageOrder {
        stage: "inference".into(),
        missing: "classifier".into(),
    })?;
    let mu = scene_centroid(depth, cam, world_from_camera)?;
    let gravity_rot = world_from_camera.rotation;

    // scene frame: recentered, unrotated
    let scene_frame = RigidTransform::new(gravity_rot, -mu);
    let vol_scene = compute_tsdf(depth, cam, &scene_frame, &models.scene_grid)?;
    let (probabilities, accepted) = classify_template(&vol_scene, classifier, &models.scene_grid)?;
    let Some(name) = accepted else {
        return Ok(SceneParse::rejection(probabilities));
    };

    let template = templates
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::EvalInput(format!("no template `{}` provided", name.as_str())))?;
    let rotation_net = models.rotation.get(&name).ok_or_else(|| Error::StageOrder {
        stage: "inference".into(),
        missing: format!("rotation net for {}", name.as_str()),
    })?;
    let translation_net = models.translation.get(&name).ok_or_else(|| Error::StageOrder {
        stage: "inference".into(),
        missing: format!("translation net for {}", name.as_str()),
    })?;
    let context_net = models.context.get(&name).ok_or_else(|| Error::StageOrder {
        stage: "inference".into(),
        missing: format!("context net for {}", name.as_str()),
    })?;

    let (_bin, yaw) = estimate_rotation(&vol_scene, rotation_net, &models.scene_grid)?;

    // rotated frame: re-voxelize before the translation estimate
    let rot = DMat3::from_rotation_z(yaw);
    let rotated_frame = RigidTransform::new(rot * gravity_rot, -(rot * mu));
    let vol_rot = compute_tsdf(depth, cam, &rotated_frame, &models.scene_grid)?;
    let (_cell, offset) = estimate_translation(&vol_rot, translation_net, &models.scene_grid)?;

    let alignment = Alignment::new(yaw, offset, mu);

    // template frame: the context network's input
    let template_frame = RigidTransform::new(rot * gravity_rot, -(rot * mu) - offset);
    let vol_template = compute_tsdf(depth, cam, &template_frame, &models.template_grid)?;
    let mut anchors = parse_scene(&vol_template, template, context_net, &models.template_grid)?;
    for parse in &mut anchors {
        parse.bbox_camera = alignment.invert_box(&parse.bbox_template);
    }

    Ok(SceneParse {
        rejected: false,
        probabilities,
        template: Some(name),
        alignment: Some(alignment),
        anchors,
    })
}
