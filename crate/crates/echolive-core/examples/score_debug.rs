use echolive_core::config::{FeatureMode, RunConfig};
use echolive_core::pipeline::*;
use echolive_core::sim::*;

fn features_of(scene: &SceneSpec, cfg: &RunConfig) -> UtteranceFeatures {
    let (audio, alignment, _) = render_scene(scene, cfg.sample_rate).unwrap();
    extract_features(&audio, &alignment, cfg).unwrap()
}

fn fmt_pc(pc: &[Option<f64>]) -> String {
    pc.iter()
        .map(|v| match v {
            Some(x) => format!("{x:+.2}"),
            None => " ---".into(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() {
    let cfg = RunConfig::default();
    for user in 0..2u64 {
        let base = base_live_scene(100, user as usize);
        let trials: Vec<UtteranceFeatures> = (0..5)
            .map(|i| {
                let mut s = perturb_scene(&base, 0.01, 200 + i + 10 * user).unwrap();
                s.noise_seed = 900 + i + 10 * user;
                features_of(&s, &cfg)
            })
            .collect();
        let template = enroll_text_dependent(&trials).unwrap();
        println!("user{user}  [eb1..eb6 | fb1..fb5]");
        for (name, scene, jitter, seed) in [
            ("genuine ", base.clone(), 0.01, 300 + user),
            ("genuine2", base.clone(), 0.01, 310 + user),
            ("mimicry ", base.clone(), 0.04, 320 + user),
            ("playback", playback_of(&base), 0.01, 340 + user),
        ] {
            let mut s = perturb_scene(&scene, jitter, seed).unwrap();
            s.noise_seed = seed * 7;
            let f = features_of(&s, &cfg);
            let pc = text_dependent_contour_scores(&f, &template).unwrap();
            let c = echolive_core::matching::mode_mean(&pc, FeatureMode::Combined).unwrap();
            println!("  {name} {:+.3}  {}", c, fmt_pc(&pc));
        }
    }
}
