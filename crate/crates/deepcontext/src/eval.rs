//! Quantitative metrics: per-category detection AP with PR curves, room
//! layout error, total scene understanding (Pg/Rg/Rr), alignment accuracy,
//! and the exhaustive point-cloud alignment baseline.

use crate::error::{Error, Result};
use crate::geometry::{box_iou_3d, normalize_yaw, yaw_difference, OrientedBox3, PointCloud};
use crate::hybrid::shape_distance;
use crate::pipeline::{bin_to_yaw, cell_to_offset, ROTATION_BINS, TRANSLATION_CELLS};
use crate::templates::{is_layout_category, AnnotatedObject};
use glam::{DMat3, DVec3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Default IoU threshold for detection matching.
pub const IOU_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    pub category: String,
    pub bbox: OrientedBox3,
    pub score: f64,
}

/// Detections and ground truth of one scene, paired by id.
#[derive(Debug, Clone)]
pub struct EvalScene {
    pub id: String,
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<AnnotatedObject>,
}

/// Pairs detection lists with ground-truth lists by scene id; unknown or
/// missing ids are rejected.
pub fn pair_scenes(
    detections: &[(String, Vec<Detection>)],
    ground_truth: &[(String, Vec<AnnotatedObject>)],
) -> Result<Vec<EvalScene>> {
    let gt_by_id: BTreeMap<&str, &Vec<AnnotatedObject>> = ground_truth
        .iter()
        .map(|(id, objs)| (id.as_str(), objs))
        .collect();
    detections
        .iter()
        .map(|(id, dets)| {
            let gt = gt_by_id
                .get(id.as_str())
                .ok_or_else(|| Error::EvalInput(format!("unknown scene id `{id}`")))?;
            Ok(EvalScene {
                id: id.clone(),
                detections: dets.clone(),
                ground_truth: (*gt).clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryEval {
    pub ap: f64,
    /// (recall, precision) after each ranked detection.
    pub pr_curve: Vec<(f64, f64)>,
    pub ground_truth: usize,
    pub detections: usize,
}

/// Ranked-list average precision per category: detections sorted by score,
/// greedily matched to unmatched same-category ground truth at the IoU
/// threshold; AP is the area under the all-points-interpolated PR curve.
pub fn evaluate_detection(
    scenes: &[EvalScene],
    iou_threshold: f64,
) -> BTreeMap<String, CategoryEval> {
    let mut categories: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for scene in scenes {
        for d in &scene.detections {
            categories.insert(d.category.clone());
        }
        for g in &scene.ground_truth {
            if !is_layout_category(&g.category) {
                categories.insert(g.category.clone());
            }
        }
    }

    let mut out = BTreeMap::new();
    for category in categories {
        // all detections of this category across scenes, sorted by score
        // descending with a deterministic tie-break
        let mut dets: Vec<(f64, usize, usize)> = Vec::new();
        for (si, scene) in scenes.iter().enumerate() {
            for (di, d) in scene.detections.iter().enumerate() {
                if d.category == category {
                    dets.push((d.score, si, di));
                }
            }
        }
        dets.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("finite scores")
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let n_gt: usize = scenes
            .iter()
            .map(|s| {
                s.ground_truth
                    .iter()
                    .filter(|g| g.category == category)
                    .count()
            })
            .sum();

        let mut matched: Vec<Vec<bool>> = scenes
            .iter()
            .map(|s| vec![false; s.ground_truth.len()])
            .collect();
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut pr_curve = Vec::with_capacity(dets.len());
        let mut raw: Vec<(f64, f64)> = Vec::with_capacity(dets.len());
        for (_, si, di) in &dets {
            let scene = &scenes[*si];
            let det = &scene.detections[*di];
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in scene.ground_truth.iter().enumerate() {
                if gt.category != category || matched[*si][gi] {
                    continue;
                }
                let iou = box_iou_3d(&det.bbox, &gt.bbox);
                if iou >= iou_threshold && best.map(|(_, b)| iou > b).unwrap_or(true) {
                    best = Some((gi, iou));
                }
            }
            match best {
                Some((gi, _)) => {
                    matched[*si][gi] = true;
                    tp += 1;
                }
                None => fp += 1,
            }
            let precision = tp as f64 / (tp + fp) as f64;
            let recall = if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 };
            raw.push((recall, precision));
        }

        // all-points interpolation: precision at each recall level is the
        // max precision at any greater-or-equal recall
        let mut ap = 0.0;
        if n_gt > 0 {
            let mut interp = raw.clone();
            let mut best = 0.0f64;
            for point in interp.iter_mut().rev() {
                best = best.max(point.1);
                point.1 = best;
            }
            let mut prev_recall = 0.0;
            for (recall, precision) in &interp {
                ap += (recall - prev_recall).max(0.0) * precision;
                prev_recall = *recall;
            }
            pr_curve = interp;
        }

        out.insert(
            category,
            CategoryEval {
                ap,
                pr_curve,
                ground_truth: n_gt,
                detections: dets.len(),
            },
        );
    }
    out
}

pub fn mean_ap(per_category: &BTreeMap<String, CategoryEval>) -> f64 {
    let scored: Vec<f64> = per_category
        .values()
        .filter(|c| c.ground_truth > 0)
        .map(|c| c.ap)
        .collect();
    if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Room layout.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutStats {
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

/// One scene's layout comparison: predicted layout boxes against ground
/// truth, both in the same frame.
pub struct LayoutScene {
    /// (category, predicted box) for each layout anchor of the parse.
    pub predicted: Vec<(String, OrientedBox3)>,
    /// The annotated layout objects.
    pub ground_truth: Vec<AnnotatedObject>,
}

/// Per-element plane-offset error: |Δcenter . normal| where the normal is
/// vertical for floor/ceiling and the ground-truth box's thin horizontal
/// axis for walls. Elements absent from the ground truth are skipped.
pub fn evaluate_layout(scenes: &[LayoutScene]) -> BTreeMap<String, LayoutStats> {
    let mut errors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for scene in scenes {
        for gt in &scene.ground_truth {
            if !is_layout_category(&gt.category) {
                continue;
            }
            let Some((_, pred)) = scene
                .predicted
                .iter()
                .find(|(cat, _)| *cat == gt.category)
            else {
                continue;
            };
            let normal = match gt.category.as_str() {
                "floor" | "ceiling" => DVec3::Z,
                _ => {
                    let local = if gt.bbox.size.x <= gt.bbox.size.y {
                        DVec3::X
                    } else {
                        DVec3::Y
                    };
                    DMat3::from_rotation_z(gt.bbox.yaw) * local
                }
            };
            let err = ((pred.center - gt.bbox.center).dot(normal)).abs();
            errors.entry(gt.category.clone()).or_default().push(err);
        }
    }
    errors
        .into_iter()
        .map(|(cat, mut errs)| {
            errs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let median = if errs.len() % 2 == 1 {
                errs[errs.len() / 2]
            } else {
                (errs[errs.len() / 2 - 1] + errs[errs.len() / 2]) / 2.0
            };
            (
                cat,
                LayoutStats {
                    mean,
                    median,
                    count: errs.len(),
                },
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Total scene understanding.

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SceneUnderstanding {
    /// Geometric precision: matched detections / all detections.
    pub pg: f64,
    /// Geometric recall: matched ground truth / all ground truth.
    pub rg: f64,
    /// Semantic recall: label-correct matched ground truth / all ground truth.
    pub rr: f64,
}

/// Category-blind greedy matching at the IoU threshold, scored over all
/// scenes pooled. With zero detections Pg reports 0 rather than undefined.
pub fn evaluate_scene_understanding(scenes: &[EvalScene], iou_threshold: f64) -> SceneUnderstanding {
    let mut n_det = 0usize;
    let mut n_gt = 0usize;
    let mut matched_det = 0usize;
    let mut matched_gt = 0usize;
    let mut matched_gt_correct = 0usize;
    for scene in scenes {
        let gts: Vec<&AnnotatedObject> = scene
            .ground_truth
            .iter()
            .filter(|g| !is_layout_category(&g.category))
            .collect();
        n_gt += gts.len();
        n_det += scene.detections.len();
        let mut order: Vec<usize> = (0..scene.detections.len()).collect();
        order.sort_by(|a, b| {
            scene.detections[*b]
                .score
                .partial_cmp(&scene.detections[*a].score)
                .expect("finite")
                .then(a.cmp(b))
        });
        let mut used = vec![false; gts.len()];
        for di in order {
            let det = &scene.detections[di];
            let mut best: Option<(usize, f64)> = None;
            for (gi, gt) in gts.iter().enumerate() {
                if used[gi] {
                    continue;
                }
                let iou = box_iou_3d(&det.bbox, &gt.bbox);
                if iou >= iou_threshold && best.map(|(_, b)| iou > b).unwrap_or(true) {
                    best = Some((gi, iou));
                }
            }
            if let Some((gi, _)) = best {
                used[gi] = true;
                matched_det += 1;
                matched_gt += 1;
                if gts[gi].category == det.category {
                    matched_gt_correct += 1;
                }
            }
        }
    }
    SceneUnderstanding {
        pg: if n_det == 0 {
            0.0
        } else {
            matched_det as f64 / n_det as f64
        },
        rg: if n_gt == 0 {
            0.0
        } else {
            matched_gt as f64 / n_gt as f64
        },
        rr: if n_gt == 0 {
            0.0
        } else {
            matched_gt_correct as f64 / n_gt as f64
        },
    }
}

// ---------------------------------------------------------------------------
// Alignment accuracy.

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AlignmentEval {
    /// Fraction with yaw error <= 10 degrees.
    pub rotation_accuracy: f64,
    /// Same, also accepting 180-degree flips for items flagged symmetric.
    pub rotation_accuracy_symmetric: f64,
    /// Mean Euclidean distance between predicted and true translations.
    pub translation_mean_error: f64,
    pub count: usize,
}

/// One alignment comparison: predicted vs ground-truth (yaw, translation).
pub struct AlignmentPair {
    pub predicted_yaw: f64,
    pub predicted_translation: DVec3,
    pub gt_yaw: f64,
    pub gt_translation: DVec3,
    /// Whether the scene's template is 180-degree symmetric.
    pub symmetric: bool,
}

const ROTATION_TOLERANCE_DEG: f64 = 10.0;

pub fn evaluate_alignment(pairs: &[AlignmentPair]) -> AlignmentEval {
    if pairs.is_empty() {
        return AlignmentEval {
            rotation_accuracy: 0.0,
            rotation_accuracy_symmetric: 0.0,
            translation_mean_error: 0.0,
            count: 0,
        };
    }
    let tol = ROTATION_TOLERANCE_DEG.to_radians() + 1e-12;
    let mut plain = 0usize;
    let mut sym = 0usize;
    let mut terr = 0.0;
    for p in pairs {
        let diff = yaw_difference(p.predicted_yaw, p.gt_yaw);
        if diff <= tol {
            plain += 1;
            sym += 1;
        } else if p.symmetric && (diff - std::f64::consts::PI).abs() <= tol {
            sym += 1;
        }
        terr += (p.predicted_translation - p.gt_translation).length();
    }
    AlignmentEval {
        rotation_accuracy: plain as f64 / pairs.len() as f64,
        rotation_accuracy_symmetric: sym as f64 / pairs.len() as f64,
        translation_mean_error: terr / pairs.len() as f64,
        count: pairs.len(),
    }
}

// ---------------------------------------------------------------------------
// Exhaustive alignment baseline.

/// A training exemplar for the baseline: its cloud (gravity frame) and its
/// known template alignment `p_tpl = R(yaw) * p + t`.
pub struct AlignedExemplar {
    pub cloud: PointCloud,
    pub yaw: f64,
    pub translation: DVec3,
}

/// Point-cloud alignment baseline: exhaustively searches rotation bins x
/// translation lattice cells for the transform minimizing the symmetric
/// cloud distance to each training exemplar, then composes the best match's
/// known alignment with the found transform. O(|train| x 36 x 726 x n x m):
/// subsample clouds before calling.
pub fn icp_baseline_align(
    query: &PointCloud,
    train: &[AlignedExemplar],
) -> Result<(f64, DVec3)> {
    if train.is_empty() {
        return Err(Error::EvalInput("empty training set".into()));
    }
    if query.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut best: Option<(f64, f64, DVec3, &AlignedExemplar)> = None;
    for exemplar in train {
        for bin in 0..ROTATION_BINS {
            let yaw = bin_to_yaw(bin);
            let rot = DMat3::from_rotation_z(yaw);
            let rotated: Vec<DVec3> = query.points.iter().map(|p| rot * *p).collect();
            for cell in 0..TRANSLATION_CELLS {
                let tau = cell_to_offset(cell);
                let moved = PointCloud::new(
                    rotated.iter().map(|p| *p + tau).collect(),
                    query.frame,
                );
                let d = shape_distance(&moved, &exemplar.cloud)?;
                if best.as_ref().map(|(b, ..)| d < *b).unwrap_or(true) {
                    best = Some((d, yaw, tau, exemplar));
                }
            }
        }
    }
    let (_, yaw, tau, exemplar) = best.expect("nonempty training set");
    // compose: query -> exemplar frame -> template frame
    let total_yaw = normalize_yaw(exemplar.yaw + yaw);
    let total_t = DMat3::from_rotation_z(exemplar.yaw) * tau + exemplar.translation;
    Ok((total_yaw, total_t))
}

// ---------------------------------------------------------------------------
// Report assembly and output formats.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_category: BTreeMap<String, CategoryEval>,
    pub mean_ap: f64,
    pub layout: BTreeMap<String, LayoutStats>,
    pub scene_understanding: SceneUnderstanding,
    pub alignment: AlignmentEval,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Parse {
            what: "eval report".into(),
            detail: e.to_string(),
        })
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>8} {:>6} {:>6}", "category", "AP", "#gt", "#det");
        for (cat, ev) in &self.per_category {
            let _ = writeln!(
                out,
                "{:<16} {:>8.4} {:>6} {:>6}",
                cat, ev.ap, ev.ground_truth, ev.detections
            );
        }
        let _ = writeln!(out, "{:<16} {:>8.4}", "mAP", self.mean_ap);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<16} {:>8} {:>8} {:>6}", "layout", "mean", "median", "n");
        for (cat, st) in &self.layout {
            let _ = writeln!(
                out,
                "{:<16} {:>8.3} {:>8.3} {:>6}",
                cat, st.mean, st.median, st.count
            );
        }
        let _ = writeln!(out);
        let su = &self.scene_understanding;
        let _ = writeln!(
            out,
            "scene understanding: Pg {:.4}  Rg {:.4}  Rr {:.4}",
            su.pg, su.rg, su.rr
        );
        let al = &self.alignment;
        let _ = writeln!(
            out,
            "alignment: rotation {:.4} (sym {:.4}), translation error {:.3} m over {}",
            al.rotation_accuracy,
            al.rotation_accuracy_symmetric,
            al.translation_mean_error,
            al.count
        );
        out
    }

    /// CSV with one recall row and one precision row per category.
    pub fn pr_curves_csv(&self) -> String {
        let mut out = String::new();
        for (cat, ev) in &self.per_category {
            let recalls: Vec<String> =
                ev.pr_curve.iter().map(|(r, _)| format!("{r}")).collect();
            let precisions: Vec<String> =
                ev.pr_curve.iter().map(|(_, p)| format!("{p}")).collect();
            let _ = writeln!(out, "{cat},recall,{}", recalls.join(","));
            let _ = writeln!(out, "{cat},precision,{}", precisions.join(","));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;

    fn bx(c: [f64; 3], s: [f64; 3], yaw: f64) -> OrientedBox3 {
        OrientedBox3::new(DVec3::from_array(c), DVec3::from_array(s), yaw).unwrap()
    }

    fn gt_obj(cat: &str, bbox: OrientedBox3) -> AnnotatedObject {
        AnnotatedObject {
            category: cat.into(),
            bbox,
        }
    }

    fn det(cat: &str, bbox: OrientedBox3, score: f64) -> Detection {
        Detection {
            category: cat.into(),
            bbox,
            score,
        }
    }

    #[test]
    fn perfect_single_detection_ap_one() {
        let b = bx([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.2);
        let scenes = vec![EvalScene {
            id: "s0".into(),
            detections: vec![det("chair", b, 0.9)],
            ground_truth: vec![gt_obj("chair", b)],
        }];
        let ev = evaluate_detection(&scenes, IOU_THRESHOLD);
        assert_eq!(ev["chair"].ap, 1.0);
    }

    #[test]
    fn no_detections_ap_zero() {
        let scenes = vec![EvalScene {
            id: "s0".into(),
            detections: vec![],
            ground_truth: vec![gt_obj("chair", bx([0.0; 3], [1.0; 3], 0.0))],
        }];
        let ev = evaluate_detection(&scenes, IOU_THRESHOLD);
        assert_eq!(ev["chair"].ap, 0.0);
    }

    #[test]
    fn ranked_list_matches_hand_unrolled_oracle() {
        // 2 GT; detections scored 0.9 (TP), 0.8 (FP), 0.7 (TP)
        let g1 = bx([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0);
        let g2 = bx([5.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0);
        let far = bx([20.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0);
        let scenes = vec![EvalScene {
            id: "s0".into(),
            detections: vec![
                det("chair", g1, 0.9),
                det("chair", far, 0.8),
                det("chair", g2, 0.7),
            ],
            ground_truth: vec![gt_obj("chair", g1), gt_obj("chair", g2)],
        }];
        let ev = evaluate_detection(&scenes, IOU_THRESHOLD);
        // hand-unrolled: ranked TP, FP, TP ->
        //   after 1: p=1,   r=0.5
        //   after 2: p=1/2, r=0.5
        //   after 3: p=2/3, r=1.0
        // all-points interpolation: p(0.5)=1, p(1.0)=2/3
        // AP = 0.5*1 + 0.5*(2/3) = 5/6
        assert!((ev["chair"].ap - 5.0 / 6.0).abs() < 1e-12, "{}", ev["chair"].ap);
    }

    #[test]
    fn ap_invariant_to_monotone_score_transform() {
        let g1 = bx([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.3);
        let g2 = bx([3.0, 1.0, 0.0], [1.0, 0.8, 1.0], 1.0);
        let off = bx([-4.0, 2.0, 0.0], [1.0, 1.0, 1.0], 0.0);
        let mk = |scores: [f64; 3]| {
            vec![EvalScene {
                id: "s".into(),
                detections: vec![
                    det("chair", g1, scores[0]),
                    det("chair", off, scores[1]),
                    det("chair", g2, scores[2]),
                ],
                ground_truth: vec![gt_obj("chair", g1), gt_obj("chair", g2)],
            }]
        };
        let a = evaluate_detection(&mk([0.9, 0.5, 0.2]), IOU_THRESHOLD);
        // monotone transform x -> x^3 + 1 keeps the order
        let b = evaluate_detection(
            &mk([0.9f64.powi(3) + 1.0, 0.5f64.powi(3) + 1.0, 0.2f64.powi(3) + 1.0]),
            IOU_THRESHOLD,
        );
        assert_eq!(a["chair"].ap, b["chair"].ap);
    }

    #[test]
    fn lowest_score_false_positive_never_raises_ap() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n_gt = rng.random_range(1..4);
            let mut gts = Vec::new();
            let mut dets = Vec::new();
            for i in 0..n_gt {
                let b = bx([i as f64 * 4.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0);
                gts.push(gt_obj("x", b));
                if rng.random_range(0.0..1.0) < 0.7 {
                    dets.push(det("x", b, rng.random_range(0.3..1.0)));
                }
            }
            let base = vec![EvalScene {
                id: "s".into(),
                detections: dets.clone(),
                ground_truth: gts.clone(),
            }];
            let ap0 = evaluate_detection(&base, IOU_THRESHOLD)["x"].ap;
            let mut with_fp = dets.clone();
            with_fp.push(det("x", bx([100.0, 0.0, 0.0], [1.0; 3], 0.0), 0.01));
            let worse = vec![EvalScene {
                id: "s".into(),
                detections: with_fp,
                ground_truth: gts,
            }];
            let ap1 = evaluate_detection(&worse, IOU_THRESHOLD)["x"].ap;
            assert!(ap1 <= ap0 + 1e-12, "{ap1} > {ap0}");
        }
    }

    #[test]
    fn pair_scenes_rejects_unknown_ids() {
        let dets = vec![("a".to_string(), vec![])];
        let gts = vec![("b".to_string(), vec![])];
        assert!(pair_scenes(&dets, &gts).is_err());
    }

    #[test]
    fn layout_errors_and_missing_elements() {
        let floor_gt = gt_obj("floor", bx([0.0, 0.0, -0.35], [4.0, 4.0, 0.1], 0.0));
        let wall_gt = gt_obj("wall", bx([0.0, 2.0, 1.2], [4.0, 0.1, 2.4], 0.0));
        let scenes = vec![
            LayoutScene {
                predicted: vec![
                    ("floor".into(), bx([0.3, 0.1, -0.25], [4.0, 4.0, 0.1], 0.0)),
                    ("wall".into(), bx([0.5, 2.3, 1.0], [4.0, 0.1, 2.4], 0.0)),
                    ("ceiling".into(), bx([0.0, 0.0, 2.5], [4.0, 4.0, 0.1], 0.0)),
                ],
                // no ceiling in the ground truth: must be skipped
                ground_truth: vec![floor_gt.clone(), wall_gt.clone()],
            },
            LayoutScene {
                predicted: vec![("floor".into(), bx([0.0, 0.0, -0.05], [4.0, 4.0, 0.1], 0.0))],
                ground_truth: vec![floor_gt.clone()],
            },
            LayoutScene {
                predicted: vec![("floor".into(), bx([0.0, 0.0, -0.15], [4.0, 4.0, 0.1], 0.0))],
                ground_truth: vec![floor_gt],
            },
        ];
        let stats = evaluate_layout(&scenes);
        // floor errors along z: 0.1, 0.3, 0.2 -> mean 0.2, median 0.2
        let floor = &stats["floor"];
        assert!((floor.mean - 0.2).abs() < 1e-12);
        assert!((floor.median - 0.2).abs() < 1e-12);
        assert_eq!(floor.count, 3);
        // wall error along its normal (y): |2.3 - 2.0| = 0.3, x offset ignored
        let wall = &stats["wall"];
        assert!((wall.mean - 0.3).abs() < 1e-12);
        assert!(!stats.contains_key("ceiling"));
    }

    #[test]
    fn scene_understanding_definitional_cases() {
        let b1 = bx([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0);
        let b2 = bx([3.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0);
        let perfect = vec![EvalScene {
            id: "s".into(),
            detections: vec![det("chair", b1, 0.9), det("table", b2, 0.8)],
            ground_truth: vec![gt_obj("chair", b1), gt_obj("table", b2)],
        }];
        assert_eq!(
            evaluate_scene_understanding(&perfect, IOU_THRESHOLD),
            SceneUnderstanding {
                pg: 1.0,
                rg: 1.0,
                rr: 1.0
            }
        );

        let none = vec![EvalScene {
            id: "s".into(),
            detections: vec![],
            ground_truth: vec![gt_obj("chair", b1)],
        }];
        let su = evaluate_scene_understanding(&none, IOU_THRESHOLD);
        assert_eq!((su.pg, su.rg, su.rr), (0.0, 0.0, 0.0));

        // geometry perfect, labels wrong: Rg = 1, Rr = 0
        let wrong_labels = vec![EvalScene {
            id: "s".into(),
            detections: vec![det("table", b1, 0.9), det("chair", b2, 0.8)],
            ground_truth: vec![gt_obj("chair", b1), gt_obj("table", b2)],
        }];
        let su = evaluate_scene_understanding(&wrong_labels, IOU_THRESHOLD);
        assert_eq!(su.rg, 1.0);
        assert_eq!(su.rr, 0.0);
        assert!(su.rr <= su.rg);
    }

    #[test]
    fn alignment_threshold_and_symmetry() {
        let mk = |dyaw_deg: f64, sym: bool| AlignmentPair {
            predicted_yaw: 1.0 + (dyaw_deg as f64).to_radians(),
            predicted_translation: DVec3::ZERO,
            gt_yaw: 1.0,
            gt_translation: DVec3::ZERO,
            symmetric: sym,
        };
        let exact = evaluate_alignment(&[mk(0.0, false)]);
        assert_eq!(exact.rotation_accuracy, 1.0);
        assert_eq!(exact.translation_mean_error, 0.0);

        let flipped_sym = evaluate_alignment(&[mk(180.0, true)]);
        assert_eq!(flipped_sym.rotation_accuracy, 0.0);
        assert_eq!(flipped_sym.rotation_accuracy_symmetric, 1.0);

        let flipped_plain = evaluate_alignment(&[mk(180.0, false)]);
        assert_eq!(flipped_plain.rotation_accuracy_symmetric, 0.0);

        let off12 = evaluate_alignment(&[mk(12.0, true)]);
        assert_eq!(off12.rotation_accuracy, 0.0);
        assert_eq!(off12.rotation_accuracy_symmetric, 0.0);

        // symmetric-aware accuracy can never be below plain accuracy
        let mixed: Vec<AlignmentPair> = (0..20)
            .map(|i| mk((i * 23 % 360) as f64, i % 2 == 0))
            .collect();
        let ev = evaluate_alignment(&mixed);
        assert!(ev.rotation_accuracy_symmetric >= ev.rotation_accuracy);
    }

    fn ring_cloud(n: usize) -> PointCloud {
        // an asymmetric L of points so rotation is unambiguous
        let mut points = Vec::new();
        for i in 0..n {
            let t = i as f64 / n as f64;
            points.push(DVec3::new(t * 1.5, 0.0, 0.1 * (i % 3) as f64));
            points.push(DVec3::new(0.0, t * 0.7, 0.05));
        }
        PointCloud::new(points, Frame::Gravity)
    }

    #[test]
    fn icp_recovers_identity_for_identical_cloud() {
        let cloud = ring_cloud(10);
        let train = vec![AlignedExemplar {
            cloud: cloud.clone(),
            yaw: 0.7,
            translation: DVec3::new(0.5, -1.0, 0.0),
        }];
        let (yaw, t) = icp_baseline_align(&cloud, &train).unwrap();
        assert!(yaw_difference(yaw, 0.7) < 1e-9);
        assert!((t - DVec3::new(0.5, -1.0, 0.0)).length() < 1e-9);
    }

    #[test]
    fn icp_recovers_planted_rotation_within_one_bin() {
        let base = ring_cloud(10);
        let train = vec![AlignedExemplar {
            cloud: base.clone(),
            yaw: 0.0,
            translation: DVec3::ZERO,
        }];
        // query = training cloud rotated by +90 degrees: aligning it back
        // needs -90, so the composed yaw should be ~270 degrees
        let rot = DMat3::from_rotation_z(std::f64::consts::FRAC_PI_2);
        let query = PointCloud::new(base.points.iter().map(|p| rot * *p).collect(), Frame::Gravity);
        let (yaw, _t) = icp_baseline_align(&query, &train).unwrap();
        let expected = normalize_yaw(-std::f64::consts::FRAC_PI_2);
        assert!(
            yaw_difference(yaw, expected).to_degrees() <= 10.0 + 1e-9,
            "recovered {yaw}, expected about {expected}"
        );
    }

    #[test]
    fn icp_rejects_empty_training_set() {
        assert!(icp_baseline_align(&ring_cloud(5), &[]).is_err());
    }

    #[test]
    fn report_roundtrip_and_formats() {
        let b = bx([0.0; 3], [1.0; 3], 0.0);
        let scenes = vec![EvalScene {
            id: "s".into(),
            detections: vec![det("chair", b, 0.9)],
            ground_truth: vec![gt_obj("chair", b)],
        }];
        let per_category = evaluate_detection(&scenes, IOU_THRESHOLD);
        let report = EvalReport {
            mean_ap: mean_ap(&per_category),
            per_category,
            layout: BTreeMap::new(),
            scene_understanding: evaluate_scene_understanding(&scenes, IOU_THRESHOLD),
            alignment: evaluate_alignment(&[]),
        };
        let json = report.to_json();
        let back = EvalReport::from_json(&json).unwrap();
        assert_eq!(back.mean_ap, report.mean_ap);
        assert!(report.to_table().contains("mAP"));
        let csv = report.pr_curves_csv();
        assert!(csv.starts_with("chair,recall,"));
    }
}
