use crate::jobs::parallel_map;
use anyhow::{Context, Result};
use deepcontext::derive_seed;
use deepcontext::geometry::save_depth_png;
use deepcontext::scene_gen::{
    assign_splits, generate_scene, DatasetManifest, GeneratorConfig, SceneEntry,
};
use deepcontext::templates::save_annotation;
use std::path::PathBuf;

pub fn run(
    out: PathBuf,
    count: usize,
    seed: u64,
    config: Option<PathBuf>,
    jobs: usize,
) -> Result<()> {
    let mut cfg: GeneratorConfig = match config {
        Some(path) => serde_json::from_str(
            &std::fs::read_to_string(&path)
                .with_context(|| format!("generation: reading config {}", path.display()))?,
        )
        .context("generation: parsing generator config")?,
        None => GeneratorConfig::default(),
    };
    cfg.seed = seed;

    let scene_dir = out.join("scenes");
    std::fs::create_dir_all(&scene_dir)
        .with_context(|| format!("generation: creating {}", scene_dir.display()))?;

    // parallel generation is deterministic: per-scene seeds derive from the
    // master seed and index, and results land by index
    let indices: Vec<usize> = (0..count).collect();
    let results = parallel_map(&indices, jobs, |_, idx| {
        let scene_seed = derive_seed(cfg.seed, "scene", *idx as u64);
        (*idx, scene_seed, generate_scene(&cfg, scene_seed))
    });

    let splits = assign_splits(cfg.seed, count);
    let mut scenes = Vec::new();
    let mut skipped = Vec::new();
    for (idx, scene_seed, result) in results {
        let id = format!("scene{idx:05}");
        match result {
            Ok(scene) => {
                let depth_rel = format!("scenes/{id}_depth.png");
                let ann_rel = format!("scenes/{id}_ann.json");
                save_depth_png(&scene.depth, out.join(&depth_rel))
                    .with_context(|| format!("generation: writing {depth_rel}"))?;
                save_annotation(&scene.annotation, out.join(&ann_rel))
                    .with_context(|| format!("generation: writing {ann_rel}"))?;
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
    for s in &skipped {
        eprintln!("warning: skipped {s}");
    }
    let manifest = DatasetManifest {
        seed: cfg.seed,
        scenes,
        skipped,
    };
    manifest
        .save(out.join("manifest.json"))
        .context("generation: writing manifest")?;
    println!(
        "wrote {} scenes ({} skipped) to {}",
        manifest.scenes.len(),
        manifest.skipped.len(),
        out.display()
    );
    Ok(())
}
