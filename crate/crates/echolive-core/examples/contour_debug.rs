use echolive_core::config::RunConfig;
use echolive_core::pipeline::*;
use echolive_core::sim::*;

fn features_of(scene: &SceneSpec, cfg: &RunConfig) -> UtteranceFeatures {
    let (audio, alignment, _) = render_scene(scene, cfg.sample_rate).unwrap();
    extract_features(&audio, &alignment, cfg).unwrap()
}

fn main() {
    let cfg = RunConfig::default();
    let base = base_live_scene(7, 3);
    let trials: Vec<UtteranceFeatures> = (0..3)
        .map(|i| {
            let mut s = perturb_scene(&base, 0.01, 200 + i).unwrap();
            s.noise_seed = 900 + i;
            features_of(&s, &cfg)
        })
        .collect();
    let template = enroll_text_dependent(&trials).unwrap();
    let mut s = perturb_scene(&base, 0.01, 301).unwrap();
    s.noise_seed = 71;
    let f = features_of(&s, &cfg);
    let pc = text_dependent_contour_scores(&f, &template).unwrap();
    for (c, r) in pc.iter().enumerate() {
        println!("contour {c}: r={:?}", r.map(|v| (v * 1000.0).round() / 1000.0));
    }
    // Dump the worst contour pair.
    let worst = pc
        .iter()
        .enumerate()
        .filter_map(|(c, r)| r.map(|v| (c, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    let aligned = f.contours.resample_blocks(&template.contours.frames_per_phoneme).unwrap();
    println!("worst contour {worst}; frames_per_phoneme {:?}", template.contours.frames_per_phoneme);
    let a = aligned.contour(worst);
    let b = template.contours.contour(worst);
    for i in 0..a.len() {
        println!("{i:3} test={:+9.3} template={:+9.3}", a[i], b[i]);
    }
}
