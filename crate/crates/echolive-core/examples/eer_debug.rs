use echolive_core::config::{FeatureMode, RunConfig};
use echolive_core::matching::calibrate_threshold;
use echolive_core::pipeline::*;
use echolive_core::sim::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fs: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(48_000.0);
    let n_users = 6;
    let n_trials = 6;
    let dir = tempfile::tempdir().unwrap();
    let params = CorpusParams {
        n_users, n_trials, n_attacks: n_trials, seed: 7, sample_rate: fs,
        ..Default::default()
    };
    generate_corpus(dir.path(), &params).unwrap();
    let mut cfg = RunConfig::default();
    cfg.sample_rate = fs;
    let trials = score_corpus(dir.path(), &cfg).unwrap();
    for mode in [FeatureMode::Combined, FeatureMode::EnergyOnly, FeatureMode::FrequencyOnly] {
        let (genuine, attack) = split_scores(&trials, mode).unwrap();
        let (t, eer) = calibrate_threshold(&genuine, &attack).unwrap();
        println!("{mode:?}: EER={eer:.3} t={t:.3}");
    }
    // Per-contour stats: mean/min for genuine, mean/max for mimicry & playback.
    println!("contour | genuine mean min | mimicry mean max | playback mean max");
    for c in 0..11 {
        let stats = |kind: CorpusKind| -> (f64, f64, f64) {
            let vals: Vec<f64> = trials.iter().filter(|t| t.kind == kind)
                .filter_map(|t| t.per_contour[c]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (mean, min, max)
        };
        let g = stats(CorpusKind::Genuine);
        let m = stats(CorpusKind::Mimicry);
        let p = stats(CorpusKind::Playback);
        println!("  c{c:02}   | {:+.3} {:+.3} | {:+.3} {:+.3} | {:+.3} {:+.3}", g.0, g.1, m.0, m.2, p.0, p.2);
    }
}
