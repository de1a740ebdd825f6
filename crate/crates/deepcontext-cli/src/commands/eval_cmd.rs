use crate::jobs::parallel_map;
use anyhow::{Context, Result};
use deepcontext::eval::{
    evaluate_alignment, evaluate_detection, evaluate_layout, evaluate_scene_understanding,
    mean_ap, AlignmentPair, Detection, EvalReport, EvalScene, LayoutScene,
};
use deepcontext::geometry::load_depth_png;
use deepcontext::pipeline::{ground_truth_alignment, scene_centroid, SceneParse};
use deepcontext::scene_gen::DatasetManifest;
use deepcontext::templates::{is_layout_category, load_annotation};
use std::path::PathBuf;

#[allow(clippy::too_many_arguments)]
pub fn run(
    dataset: PathBuf,
    split: &str,
    parses: PathBuf,
    out: PathBuf,
    table: Option<PathBuf>,
    pr_csv: Option<PathBuf>,
    iou: f64,
    jobs: usize,
) -> Result<()> {
    let manifest = DatasetManifest::load(dataset.join("manifest.json"))
        .context("evaluation: loading dataset manifest")?;
    let entries: Vec<_> = manifest.split(split).collect();
    anyhow::ensure!(!entries.is_empty(), "evaluation: split `{split}` is empty");

    struct PerScene {
        eval: EvalScene,
        layout: Option<LayoutScene>,
        alignment: Option<AlignmentPair>,
    }

    let loaded = parallel_map(&entries, jobs, |_, entry| -> anyhow::Result<PerScene> {
        let parse_path = parses.join(format!("{}.json", entry.id));
        let parse = SceneParse::from_json(
            &std::fs::read_to_string(&parse_path)
                .with_context(|| format!("evaluation: missing parse {}", parse_path.display()))?,
        )?;
        let ann = load_annotation(dataset.join(&entry.annotation))?;

        let detections: Vec<Detection> = if parse.rejected {
            Vec::new()
        } else {
            parse
                .anchors
                .iter()
                .filter(|a| !is_layout_category(&a.category))
                .map(|a| Detection {
                    category: a.category.clone(),
                    bbox: a.bbox_camera,
                    score: a.existence,
                })
                .collect()
        };
        let eval = EvalScene {
            id: entry.id.clone(),
            detections,
            ground_truth: ann.objects.clone(),
        };

        let layout = (!parse.rejected).then(|| LayoutScene {
            predicted: parse
                .anchors
                .iter()
                .filter(|a| is_layout_category(&a.category))
                .map(|a| (a.category.clone(), a.bbox_camera))
                .collect(),
            ground_truth: ann.objects.clone(),
        });

        // alignment compares only scenes parsed with the correct template
        let alignment = match (&parse.alignment, parse.template, ann.template()) {
            (Some(al), Some(pred_name), Some(gt_name)) if pred_name == gt_name => {
                let depth = load_depth_png(dataset.join(&entry.depth))?;
                let mu = scene_centroid(&depth, &ann.camera, &ann.world_from_camera)?;
                let gt = ground_truth_alignment(&ann, gt_name.major_category(), mu)?;
                Some(AlignmentPair {
                    predicted_yaw: al.yaw,
                    predicted_translation: al.offset_vec(),
                    gt_yaw: gt.yaw,
                    gt_translation: gt.offset_vec(),
                    symmetric: true,
                })
            }
            _ => None,
        };
        Ok(PerScene {
            eval,
            layout,
            alignment,
        })
    });

    let mut eval_scenes = Vec::new();
    let mut layout_scenes = Vec::new();
    let mut pairs = Vec::new();
    for r in loaded {
        let per = r?;
        eval_scenes.push(per.eval);
        if let Some(l) = per.layout {
            layout_scenes.push(l);
        }
        if let Some(a) = per.alignment {
            pairs.push(a);
        }
    }

    let per_category = evaluate_detection(&eval_scenes, iou);
    let report = EvalReport {
        mean_ap: mean_ap(&per_category),
        per_category,
        layout: evaluate_layout(&layout_scenes),
        scene_understanding: evaluate_scene_understanding(&eval_scenes, iou),
        alignment: evaluate_alignment(&pairs),
    };

    std::fs::write(&out, report.to_json())
        .with_context(|| format!("evaluation: writing {}", out.display()))?;
    println!("{}", report.to_table());
    println!("report written to {}", out.display());
    if let Some(path) = table {
        std::fs::write(&path, report.to_table())
            .with_context(|| format!("evaluation: writing {}", path.display()))?;
    }
    if let Some(path) = pr_csv {
        std::fs::write(&path, report.pr_curves_csv())
            .with_context(|| format!("evaluation: writing {}", path.display()))?;
    }
    Ok(())
}
