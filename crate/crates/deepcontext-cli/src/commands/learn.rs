use anyhow::{Context, Result};
use deepcontext::scene_gen::DatasetManifest;
use deepcontext::templates::{
    learn_template, load_annotation, save_templates, SceneAnnotation, TemplateName,
};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn run(
    dataset: PathBuf,
    split: &str,
    out: PathBuf,
    k: Vec<(String, usize)>,
    seed: u64,
) -> Result<()> {
    let manifest = DatasetManifest::load(dataset.join("manifest.json"))
        .context("template learning: loading dataset manifest")?;
    let k_map: BTreeMap<String, usize> = k.into_iter().collect();

    let mut by_type: BTreeMap<TemplateName, Vec<SceneAnnotation>> = BTreeMap::new();
    for entry in manifest.split(split) {
        let ann = load_annotation(dataset.join(&entry.annotation))
            .with_context(|| format!("template learning: reading {}", entry.annotation))?;
        if let Some(name) = ann.template() {
            by_type.entry(name).or_default().push(ann);
        }
    }
    anyhow::ensure!(
        !by_type.is_empty(),
        "template learning: split `{split}` has no template-labeled scenes"
    );

    let mut templates = Vec::new();
    for (name, anns) in &by_type {
        let tpl = learn_template(anns, &k_map, *name, seed)
            .with_context(|| format!("template learning: {}", name.as_str()))?;
        println!(
            "{}: {} anchors from {} scenes",
            name.as_str(),
            tpl.anchors.len(),
            anns.len()
        );
        templates.push(tpl);
    }
    save_templates(&templates, &out).context("template learning: writing templates")?;
    println!("wrote {}", out.display());
    Ok(())
}
