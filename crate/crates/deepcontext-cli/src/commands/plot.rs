use anyhow::{Context, Result};
use deepcontext::eval::EvalReport;
use deepcontext::geometry::OrientedBox3;
use deepcontext::pipeline::SceneParse;
use deepcontext::templates::load_annotation;
use std::fmt::Write as _;
use std::path::PathBuf;

pub fn run(
    parse: Option<PathBuf>,
    ann: Option<PathBuf>,
    report: Option<PathBuf>,
    out: PathBuf,
) -> Result<()> {
    match (parse, report) {
        (Some(parse_path), None) => {
            let parse = SceneParse::from_json(
                &std::fs::read_to_string(&parse_path)
                    .with_context(|| format!("plot: reading {}", parse_path.display()))?,
            )?;
            let gt = match ann {
                Some(p) => Some(load_annotation(&p).context("plot: reading annotation")?),
                None => None,
            };
            let svg = top_view_svg(&parse, gt.as_ref());
            std::fs::write(&out, svg).with_context(|| format!("plot: writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        (None, Some(report_path)) => {
            let report = EvalReport::from_json(
                &std::fs::read_to_string(&report_path)
                    .with_context(|| format!("plot: reading {}", report_path.display()))?,
            )?;
            std::fs::write(&out, report.pr_curves_csv())
                .with_context(|| format!("plot: writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(())
        }
        _ => anyhow::bail!("plot: pass exactly one of --parse (SVG) or --report (PR CSV)"),
    }
}

const PALETTE: [&str; 10] = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999",
    "#66c2a5", "#fc8d62",
];

fn color_for(category: &str) -> &'static str {
    let h = category
        .bytes()
        .fold(5u64, |a, b| a.wrapping_mul(31).wrapping_add(b as u64));
    PALETTE[(h % PALETTE.len() as u64) as usize]
}

/// Top-view (x right, y up) SVG of a parse: predictions solid with opacity by
/// existence, ground truth dashed.
fn top_view_svg(parse: &SceneParse, gt: Option<&deepcontext::templates::SceneAnnotation>) -> String {
    let scale = 60.0; // px per meter
    let half = 5.0; // meters shown each way
    let size = (2.0 * half * scale) as i64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    let _ = writeln!(
        svg,
        "  <rect width=\"{size}\" height=\"{size}\" fill=\"#fafafa\"/>"
    );
    let to_px = |x: f64, y: f64| ((x + half) * scale, (half - y) * scale);
    // meter grid
    for i in -(half as i64)..=(half as i64) {
        let (gx, _) = to_px(i as f64, 0.0);
        let _ = writeln!(
            svg,
            "  <line x1=\"{gx:.1}\" y1=\"0\" x2=\"{gx:.1}\" y2=\"{size}\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>"
        );
        let (_, gy) = to_px(0.0, i as f64);
        let _ = writeln!(
            svg,
            "  <line x1=\"0\" y1=\"{gy:.1}\" x2=\"{size}\" y2=\"{gy:.1}\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>"
        );
    }

    let mut rect = |bbox: &OrientedBox3, color: &str, dashed: bool, opacity: f64, label: &str| {
        let corners = bbox.footprint();
        let pts: Vec<String> = corners
            .iter()
            .map(|[x, y]| {
                let (px, py) = to_px(*x, *y);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
        let fill = if dashed { "none" } else { color };
        let _ = writeln!(
            svg,
            "  <polygon points=\"{}\" fill=\"{fill}\" fill-opacity=\"{:.2}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>",
            pts.join(" "),
            if dashed { 0.0 } else { 0.25 * opacity }
        );
        if !label.is_empty() {
            let (cx, cy) = to_px(bbox.center.x, bbox.center.y);
            let _ = writeln!(
                svg,
                "  <text x=\"{cx:.1}\" y=\"{cy:.1}\" font-size=\"11\" fill=\"{color}\" text-anchor=\"middle\">{label}</text>"
            );
        }
    };

    if let Some(ann) = gt {
        for obj in &ann.objects {
            rect(&obj.bbox, color_for(&obj.category), true, 1.0, "");
        }
    }
    if parse.rejected {
        let _ = writeln!(
            svg,
            "  <text x=\"12\" y=\"24\" font-size=\"16\" fill=\"#c00\">rejected (max confidence {:.3})</text>",
            parse
                .probabilities
                .iter()
                .fold(0.0f64, |a, b| a.max(*b))
        );
    } else {
        for anchor in &parse.anchors {
            if anchor.existence < 0.5 {
                continue;
            }
            rect(
                &anchor.bbox_camera,
                color_for(&anchor.category),
                false,
                anchor.existence,
                &format!("{} {:.2}", anchor.category, anchor.existence),
            );
        }
        if let Some(t) = parse.template {
            let _ = writeln!(
                svg,
                "  <text x=\"12\" y=\"24\" font-size=\"16\" fill=\"#333\">{}</text>",
                t.as_str()
            );
        }
    }
    let _ = writeln!(svg, "</svg>");
    svg
}
