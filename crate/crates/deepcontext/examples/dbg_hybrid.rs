use deepcontext::hybrid::{object_shortlists, synthesize_with_shortlists, ModelRepository, SynthesisConfig};
use deepcontext::scene_gen::{generate_scene, GeneratorConfig};
use deepcontext::geometry::save_depth_png;

fn main() {
    let gen_cfg = GeneratorConfig { seed: 1, ..Default::default() };
    let repo = ModelRepository::builtin();
    let cfg = SynthesisConfig::default();
    for seed in 0..6 {
        let s = generate_scene(&gen_cfg, seed).unwrap();
        let sl = object_shortlists(&s.depth, &s.annotation, &repo, &cfg).unwrap();
        let h = synthesize_with_shortlists(&s.depth, &s.annotation, &repo, &sl, &cfg, 99).unwrap();
        let n = s.depth.values().len();
        let mut holes = 0;
        let mut changed = 0;
        let mut new_missing = 0;
        let mut orig_missing = 0;
        for i in 0..n {
            let o = s.depth.values()[i];
            let v = h.values()[i];
            if o > 0.0 && v == 0.0 { holes += 1; }
            if o == 0.0 { orig_missing += 1; }
            if v == 0.0 { new_missing += 1; }
            if (o - v).abs() > 1e-4 { changed += 1; }
        }
        println!(
            "scene {seed} ({}): {} objects, shortlists {:?}, changed {changed}/{n}, holes {holes}, missing {orig_missing}->{new_missing}",
            s.annotation.scene_type,
            s.annotation.objects.len(),
            sl.iter().map(|x| x.len()).collect::<Vec<_>>()
        );
        if seed == 0 {
            save_depth_png(&s.depth, "/tmp/orig.png").unwrap();
            save_depth_png(&h, "/tmp/hybrid.png").unwrap();
        }
    }
}
