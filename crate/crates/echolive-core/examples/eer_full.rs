use echolive_core::config::{FeatureMode, RunConfig};
use echolive_core::matching::calibrate_threshold;
use echolive_core::pipeline::*;
use echolive_core::sim::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fs: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(48_000.0);
    let dir = tempfile::tempdir().unwrap();
    let params = CorpusParams {
        n_users: 10, n_trials: 10, n_attacks: 10, seed: 20260811, sample_rate: fs,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    generate_corpus(dir.path(), &params).unwrap();
    let gen_t = t0.elapsed().as_secs_f64();
    let mut cfg = RunConfig::default();
    cfg.sample_rate = fs;
    let t0 = std::time::Instant::now();
    let trials = score_corpus(dir.path(), &cfg).unwrap();
    let score_t = t0.elapsed().as_secs_f64();
    println!("fs={fs}: gen {gen_t:.0}s score {score_t:.0}s ({} trials)", trials.len());
    for mode in [FeatureMode::Combined, FeatureMode::EnergyOnly, FeatureMode::FrequencyOnly] {
        let (genuine, attack) = split_scores(&trials, mode).unwrap();
        let (t, eer) = calibrate_threshold(&genuine, &attack).unwrap();
        println!("  {mode:?}: EER={eer:.4} t={t:.3}");
    }
    let mut viol = 0;
    for u in 0..params.n_users {
        let user = format!("user{u:02}");
        let g_min = trials.iter().filter(|t| t.user == user && t.kind == CorpusKind::Genuine)
            .map(|t| t.score(FeatureMode::Combined).unwrap()).fold(f64::INFINITY, f64::min);
        let p_max = trials.iter().filter(|t| t.user == user && t.kind == CorpusKind::Playback)
            .map(|t| t.score(FeatureMode::Combined).unwrap()).fold(f64::NEG_INFINITY, f64::max);
        if p_max >= g_min { viol += 1; println!("  {user}: playback {p_max:.3} >= genuine {g_min:.3}"); }
    }
    println!("  playback separation: {} violations", viol);
}
