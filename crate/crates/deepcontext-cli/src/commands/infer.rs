use crate::jobs::parallel_map;
use anyhow::{Context, Result};
use deepcontext::geometry::load_depth_png;
use deepcontext::pipeline::{parse_depth_image, ModelSet};
use deepcontext::scene_gen::DatasetManifest;
use deepcontext::templates::{load_annotation, load_templates};
use std::path::PathBuf;

pub fn run(
    depth: PathBuf,
    split: &str,
    models: PathBuf,
    templates: PathBuf,
    out: Option<PathBuf>,
    jobs: usize,
) -> Result<()> {
    let models = ModelSet::load(&models).context("inference: loading models")?;
    anyhow::ensure!(
        models.is_complete(),
        "inference: model directory is missing stages; run train first"
    );
    let templates = load_templates(&templates).context("inference: loading templates")?;

    if depth.is_dir() {
        let manifest = DatasetManifest::load(depth.join("manifest.json"))
            .context("inference: loading dataset manifest")?;
        let out_dir = out.unwrap_or_else(|| depth.join("parses"));
        std::fs::create_dir_all(&out_dir)
            .with_context(|| format!("inference: creating {}", out_dir.display()))?;
        let entries: Vec<_> = manifest.split(split).collect();
        anyhow::ensure!(!entries.is_empty(), "inference: split `{split}` is empty");
        let results = parallel_map(&entries, jobs, |_, entry| -> anyhow::Result<bool> {
            let d = load_depth_png(depth.join(&entry.depth))?;
            let ann = load_annotation(depth.join(&entry.annotation))?;
            let parse =
                parse_depth_image(&d, &ann.camera, &ann.world_from_camera, &models, &templates)
                    .with_context(|| format!("inference: parsing {}", entry.id))?;
            std::fs::write(out_dir.join(format!("{}.json", entry.id)), parse.to_json())?;
            Ok(parse.rejected)
        });
        let mut rejected = 0;
        let total = results.len();
        for r in results {
            if r? {
                rejected += 1;
            }
        }
        println!(
            "parsed {total} scenes ({rejected} rejected) into {}",
            out_dir.display()
        );
    } else {
        // single image: the camera pose comes from the sibling annotation
        let ann_path = sibling_annotation(&depth);
        let ann = load_annotation(&ann_path).with_context(|| {
            format!(
                "inference: reading camera pose from {} (place the *_ann.json next to the depth image)",
                ann_path.display()
            )
        })?;
        let d = load_depth_png(&depth).context("inference: loading depth image")?;
        let parse = parse_depth_image(&d, &ann.camera, &ann.world_from_camera, &models, &templates)
            .context("inference: parsing depth image")?;
        let json = parse.to_json();
        match out {
            Some(path) => {
                std::fs::write(&path, &json)
                    .with_context(|| format!("inference: writing {}", path.display()))?;
                println!("wrote {}", path.display());
            }
            None => println!("{json}"),
        }
    }
    Ok(())
}

fn sibling_annotation(depth: &std::path::Path) -> PathBuf {
    let name = depth
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ann_name = if let Some(stem) = name.strip_suffix("_depth.png") {
        format!("{stem}_ann.json")
    } else {
        format!("{}_ann.json", name.trim_end_matches(".png"))
    };
    depth.with_file_name(ann_name)
}
