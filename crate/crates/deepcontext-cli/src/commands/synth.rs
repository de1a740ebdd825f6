use crate::jobs::parallel_map;
use anyhow::{Context, Result};
use deepcontext::derive_seed;
use deepcontext::geometry::save_depth_png;
use deepcontext::hybrid::{
    object_shortlists, synthesize_with_shortlists, ModelRepository, SynthesisConfig,
};
use deepcontext::scene_gen::{load_scene, DatasetManifest, SceneEntry};
use deepcontext::templates::save_annotation;
use std::path::PathBuf;

#[allow(clippy::too_many_arguments)]
pub fn run(
    dataset: PathBuf,
    split: &str,
    out: PathBuf,
    repo: Option<PathBuf>,
    multiplier: usize,
    shortlist: usize,
    seed: u64,
    jobs: usize,
) -> Result<()> {
    let manifest = DatasetManifest::load(dataset.join("manifest.json"))
        .context("synthesis: loading dataset manifest")?;
    let repo = match repo {
        Some(dir) => ModelRepository::from_obj_dir(&dir)
            .with_context(|| format!("synthesis: loading OBJ repository {}", dir.display()))?,
        None => ModelRepository::builtin(),
    };
    anyhow::ensure!(!repo.is_empty(), "synthesis: model repository is empty");
    let cfg = SynthesisConfig {
        shortlist_size: shortlist,
        multiplier,
        seed,
        ..SynthesisConfig::default()
    };

    let scene_dir = out.join("scenes");
    std::fs::create_dir_all(&scene_dir)
        .with_context(|| format!("synthesis: creating {}", scene_dir.display()))?;

    let sources: Vec<&SceneEntry> = manifest.split(split).collect();
    anyhow::ensure!(
        !sources.is_empty(),
        "synthesis: split `{split}` has no scenes"
    );

    // one job = one source scene: retrieval shortlists are computed once and
    // reused by every replica of that scene
    let results = parallel_map(&sources, jobs, |_, entry| -> anyhow::Result<Vec<SceneEntry>> {
        let (depth, ann) = load_scene(&dataset, entry)
            .with_context(|| format!("synthesis: loading scene {}", entry.id))?;
        let shortlists = object_shortlists(&depth, &ann, &repo, &cfg)
            .with_context(|| format!("synthesis: retrieval for {}", entry.id))?;
        if shortlists.iter().all(|s| s.is_empty()) {
            eprintln!("warning: {} has no replaceable objects", entry.id);
        }
        let mut out_entries = Vec::with_capacity(multiplier);
        for m in 0..multiplier {
            let id = format!("{}_h{m:02}", entry.id);
            let rng_seed = derive_seed(seed, &entry.id, m as u64);
            let hybrid = synthesize_with_shortlists(&depth, &ann, &repo, &shortlists, &cfg, rng_seed)
                .with_context(|| format!("synthesis: rendering {id}"))?;
            let depth_rel = format!("scenes/{id}_depth.png");
            let ann_rel = format!("scenes/{id}_ann.json");
            save_depth_png(&hybrid, out.join(&depth_rel))?;
            save_annotation(&ann, out.join(&ann_rel))?;
            out_entries.push(SceneEntry {
                id,
                template: entry.template.clone(),
                split: entry.split.clone(),
                depth: depth_rel,
                annotation: ann_rel,
                seed: rng_seed,
            });
        }
        Ok(out_entries)
    });

    let mut scenes = Vec::new();
    for r in results {
        scenes.extend(r?);
    }
    let manifest_out = DatasetManifest {
        seed,
        scenes,
        skipped: Vec::new(),
    };
    manifest_out
        .save(out.join("manifest.json"))
        .context("synthesis: writing manifest")?;
    println!(
        "wrote {} hybrid scenes to {}",
        manifest_out.scenes.len(),
        out.display()
    );
    Ok(())
}
