use anyhow::{Context, Result};
use deepcontext::pipeline::{train_staged, ModelSet, Stage, TrainConfig, TrainData};
use deepcontext::scene_gen::DatasetManifest;
use deepcontext::templates::load_templates;
use std::path::PathBuf;

#[allow(clippy::too_many_arguments)]
pub fn run(
    dataset: PathBuf,
    hybrid: Option<PathBuf>,
    templates: PathBuf,
    out: PathBuf,
    stage: &str,
    config: Option<PathBuf>,
    seed: Option<u64>,
    grid: &str,
) -> Result<()> {
    let mut cfg: TrainConfig = match config {
        Some(path) => serde_json::from_str(
            &std::fs::read_to_string(&path)
                .with_context(|| format!("training: reading config {}", path.display()))?,
        )
        .context("training: parsing config")?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    match grid {
        "desk" => {}
        "paper" => cfg = cfg.paper_grid(),
        other => anyhow::bail!("training: unknown grid preset `{other}` (desk|paper)"),
    }

    let stages: Vec<Stage> = match stage {
        "all" => vec![Stage::Scene, Stage::Transform, Stage::Context],
        "scene" => vec![Stage::Scene],
        "transform" => vec![Stage::Transform],
        "context" => vec![Stage::Context],
        other => anyhow::bail!("training: unknown stage `{other}` (all|scene|transform|context)"),
    };

    let templates = load_templates(&templates).context("training: loading templates")?;

    let manifest = DatasetManifest::load(dataset.join("manifest.json"))
        .context("training: loading dataset manifest")?;
    let real = TrainData::scenes_from_manifest(&dataset, &manifest, "train")
        .context("training: loading base scenes")?;
    let hybrid_scenes = match &hybrid {
        Some(dir) => {
            let hm = DatasetManifest::load(dir.join("manifest.json"))
                .context("training: loading hybrid manifest")?;
            TrainData::scenes_from_manifest(dir, &hm, "train")
                .context("training: loading hybrid scenes")?
        }
        None => Vec::new(),
    };
    let data = TrainData {
        hybrid: hybrid_scenes,
        real,
    };
    anyhow::ensure!(
        !data.real.is_empty(),
        "training: train split of {} is empty",
        dataset.display()
    );

    // resume from whatever stages already live in the output directory
    let mut models = if out.join("meta.json").exists() {
        ModelSet::load(&out).context("training: loading existing models")?
    } else {
        ModelSet::empty(cfg.trunk, cfg.scene_grid, cfg.template_grid)
    };

    train_staged(&data, &templates, &cfg, &mut models, &stages).context("training")?;
    models.save(&out).context("training: saving models")?;
    println!("models saved to {} (digest {})", out.display(), models.digest());
    Ok(())
}
