//! Template building, similarity scoring, and the liveness decision.
//!
//! Text-dependent matching correlates each of the 11 utterance contours
//! against a passphrase template (Pearson). Text-independent matching
//! correlates per-phoneme contour blocks against weighted phoneme templates,
//! where a template's weight reflects how consistent that phoneme's contours
//! were across enrollment trials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::FeatureMode;
use crate::error::{Error, Result};
use crate::features::{ContourBlock, ContourSet, CONTOUR_COUNT, ENERGY_BAND_COUNT};

/// Guard against a zero trial-disagreement area in the weight formula.
pub const WEIGHT_EPSILON: f64 = 1e-6;
/// Cap applied to phoneme-template weights.
pub const WEIGHT_MAX: f64 = 1e6;

/// Pearson correlation coefficient with sample statistics.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Matching(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Matching(format!("need at least 2 points, got {n}")));
    }
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "constant sequence has no correlation".into(),
        ));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Averaged passphrase contours from repeated enrollment trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassphraseTemplate {
    pub contours: ContourSet,
    pub trial_count: usize,
    pub phoneme_labels: Vec<String>,
}

/// Pointwise mean of enrollment trials; trials after the first are
/// per-phoneme resampled to the first trial's frame counts.
pub fn build_passphrase_template(trials: &[ContourSet], labels: &[String]) -> Result<PassphraseTemplate> {
    if trials.len() < 2 {
        return Err(Error::Enrollment(format!(
            "need at least 2 trials, got {}",
            trials.len()
        )));
    }
    let reference = &trials[0];
    if labels.len() != reference.phoneme_count() {
        return Err(Error::Enrollment(format!(
            "{} labels for {} phonemes",
            labels.len(),
            reference.phoneme_count()
        )));
    }
    for (i, t) in trials.iter().enumerate() {
        if t.phoneme_count() != reference.phoneme_count() {
            return Err(Error::Enrollment(format!(
                "trial {i} has {} phonemes, expected {}",
                t.phoneme_count(),
                reference.phoneme_count()
            )));
        }
    }
    let mut mean = reference.clone();
    for t in &trials[1..] {
        let aligned = t.resample_blocks(&reference.frames_per_phoneme)?;
        for c in 0..ENERGY_BAND_COUNT {
            for (dst, src) in mean.energy_band_freq[c].iter_mut().zip(&aligned.energy_band_freq[c]) {
                *dst += src;
            }
        }
        for c in 0..CONTOUR_COUNT - ENERGY_BAND_COUNT {
            for (dst, src) in mean.freq_band_energy[c].iter_mut().zip(&aligned.freq_band_energy[c]) {
                *dst += src;
            }
        }
    }
    let k = trials.len() as f64;
    for c in mean.energy_band_freq.iter_mut().chain(mean.freq_band_energy.iter_mut()) {
        for v in c.iter_mut() {
            *v /= k;
        }
    }
    Ok(PassphraseTemplate {
        contours: mean,
        trial_count: trials.len(),
        phoneme_labels: labels.to_vec(),
    })
}

/// Consistency weight for a phoneme across trials: total trial length over
/// the aggregate area between every trial pair's contours (start-aligned,
/// summed over all 11 contours), with an epsilon guard and a cap.
pub fn phoneme_weight(trials: &[ContourBlock], lengths: &[usize]) -> Result<f64> {
    if trials.len() < 2 {
        return Err(Error::Enrollment(format!(
            "phoneme weight needs >= 2 trials, got {}",
            trials.len()
        )));
    }
    if lengths.len() != trials.len() {
        return Err(Error::Enrollment("one length per trial required".into()));
    }
    let mut area = 0.0;
    for i in 0..trials.len() {
        for j in i + 1..trials.len() {
            let common = trials[i].len().min(trials[j].len());
            for c in 0..CONTOUR_COUNT {
                let (a, b) = (&trials[i].contours[c], &trials[j].contours[c]);
                for t in 0..common {
                    area += (a[t] - b[t]).abs();
                }
            }
        }
    }
    let total_len: usize = lengths.iter().sum();
    Ok((total_len as f64 / (WEIGHT_EPSILON + area)).min(WEIGHT_MAX))
}

/// One phoneme's enrolled template: mean contour block plus its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeTemplate {
    pub label: String,
    pub block: ContourBlock,
    pub weight: f64,
    pub trial_count: usize,
}

/// Build weighted phoneme templates from a labeled corpus of contour sets.
///
/// Returns the template map and the labels excluded for having fewer than
/// two usable occurrences.
pub fn build_phoneme_templates(
    corpus: &[(Vec<String>, ContourSet)],
) -> Result<(BTreeMap<String, PhonemeTemplate>, Vec<String>)> {
    let mut occurrences: BTreeMap<String, Vec<ContourBlock>> = BTreeMap::new();
    for (labels, set) in corpus {
        if labels.len() != set.phoneme_count() {
            return Err(Error::Enrollment(format!(
                "{} labels for {} contour blocks",
                labels.len(),
                set.phoneme_count()
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            let block = set.block(i);
            if block.len() >= 2 {
                occurrences.entry(label.clone()).or_default().push(block);
            }
        }
    }

    let mut templates = BTreeMap::new();
    let mut excluded = Vec::new();
    for (label, blocks) in occurrences {
        if blocks.len() < 2 {
            excluded.push(label);
            continue;
        }
        let original_lengths: Vec<usize> = blocks.iter().map(ContourBlock::len).collect();
        let mut sorted = original_lengths.clone();
        sorted.sort_unstable();
        let median_len = sorted[(sorted.len() - 1) / 2];

        let aligned: Vec<ContourBlock> = blocks.iter().map(|b| b.resample(median_len)).collect();
        let weight = phoneme_weight(&aligned, &original_lengths)?;

        let mut mean = aligned[0].clone();
        for b in &aligned[1..] {
            for c in 0..CONTOUR_COUNT {
                for (dst, src) in mean.contours[c].iter_mut().zip(&b.contours[c]) {
                    *dst += src;
                }
            }
        }
        let k = aligned.len() as f64;
        for c in mean.contours.iter_mut() {
            for v in c.iter_mut() {
                *v /= k;
            }
        }
        templates.insert(
            label.clone(),
            PhonemeTemplate {
                label,
                block: mean,
                weight,
                trial_count: blocks.len(),
            },
        );
    }
    Ok((templates, excluded))
}

/// Per-contour weighted correlation of a test utterance's phoneme blocks
/// against phoneme templates.
///
/// For each contour, both sequences are centered per phoneme, scaled by the
/// phoneme weight, and correlated as pooled vectors, so identical inputs
/// score exactly 1. Test phonemes without a template are skipped; the
/// returned coverage is the matched fraction. Contours whose pooled
/// variance vanishes on either side are `None`.
pub fn weighted_similarity(
    test: &[(String, ContourBlock)],
    templates: &BTreeMap<String, PhonemeTemplate>,
) -> Result<(Vec<Option<f64>>, f64)> {
    let matched: Vec<(&ContourBlock, &PhonemeTemplate)> = test
        .iter()
        .filter_map(|(label, block)| templates.get(label).map(|t| (block, t)))
        .collect();
    if matched.is_empty() {
        return Err(Error::Matching("no test phoneme has a template".into()));
    }
    let coverage = matched.len() as f64 / test.len() as f64;

    let mut per_contour = Vec::with_capacity(CONTOUR_COUNT);
    for c in 0..CONTOUR_COUNT {
        let (mut num, mut den_a, mut den_b) = (0.0, 0.0, 0.0);
        for (block, template) in &matched {
            let target_len = template.block.len();
            let a = crate::features::resample_linear(&block.contours[c], target_len);
            let b = &template.block.contours[c];
            let mean_a = a.iter().sum::<f64>() / a.len() as f64;
            let mean_b = b.iter().sum::<f64>() / b.len() as f64;
            let w = template.weight;
            for (&x, &y) in a.iter().zip(b) {
                let (da, db) = (w * (x - mean_a), w * (y - mean_b));
                num += da * db;
                den_a += da * da;
                den_b += db * db;
            }
        }
        per_contour.push(if den_a > 0.0 && den_b > 0.0 {
            Some(num / (den_a.sqrt() * den_b.sqrt()))
        } else {
            None
        });
    }
    Ok((per_contour, coverage))
}

/// Per-contour Pearson of a test contour set against a passphrase template.
/// Constant contour pairs are excluded (`None`).
pub fn score_text_dependent(
    test: &ContourSet,
    template: &PassphraseTemplate,
) -> Result<Vec<Option<f64>>> {
    let reference = &template.contours;
    if test.len() != reference.len() {
        return Err(Error::Matching(format!(
            "test length {} does not match template length {} (normalize first)",
            test.len(),
            reference.len()
        )));
    }
    let mut per_contour = Vec::with_capacity(CONTOUR_COUNT);
    for c in 0..CONTOUR_COUNT {
        match pearson(test.contour(c), reference.contour(c)) {
            Ok(r) => per_contour.push(Some(r)),
            Err(Error::UndefinedCorrelation(_)) => per_contour.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(per_contour)
}

/// Mean of the per-contour scores selected by the feature mode. Excluded
/// contours drop out of the mean; an empty selection is an error.
pub fn mode_mean(per_contour: &[Option<f64>], mode: FeatureMode) -> Result<f64> {
    let range = match mode {
        FeatureMode::EnergyOnly => 0..ENERGY_BAND_COUNT,
        FeatureMode::FrequencyOnly => ENERGY_BAND_COUNT..CONTOUR_COUNT,
        FeatureMode::Combined => 0..CONTOUR_COUNT,
    };
    let values: Vec<f64> = range.filter_map(|c| per_contour[c]).collect();
    if values.is_empty() {
        return Err(Error::Matching(
            "every selected contour was excluded as constant".into(),
        ));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Live,
    Attack,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Live => write!(f, "Live"),
            Verdict::Attack => write!(f, "Attack"),
        }
    }
}

/// Outcome of a verification, including the per-contour evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LivenessDecision {
    pub score: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// 11 entries; `None` marks contours excluded as constant.
    pub per_contour_scores: Vec<Option<f64>>,
    pub feature_mode: FeatureMode,
}

/// Live iff `score > threshold`; ties fail closed.
pub fn decide(score: f64, threshold: f64) -> Verdict {
    if score > threshold {
        Verdict::Live
    } else {
        Verdict::Attack
    }
}

/// Assemble the full decision record from per-contour scores.
pub fn decide_with_scores(
    per_contour: Vec<Option<f64>>,
    threshold: f64,
    mode: FeatureMode,
) -> Result<LivenessDecision> {
    let score = mode_mean(&per_contour, mode)?;
    Ok(LivenessDecision {
        score,
        threshold,
        verdict: decide(score, threshold),
        per_contour_scores: per_contour,
        feature_mode: mode,
    })
}

/// False accept rate (attacks scoring above `t`) and false reject rate
/// (genuine scoring at or below `t`).
pub fn far_frr(genuine: &[f64], attack: &[f64], t: f64) -> (f64, f64) {
    let far = attack.iter().filter(|&&s| s > t).count() as f64 / attack.len() as f64;
    let frr = genuine.iter().filter(|&&s| s <= t).count() as f64 / genuine.len() as f64;
    (far, frr)
}

/// Threshold at the equal-error point, linearly interpolated between
/// adjacent score candidates. Returns `(threshold, eer)`.
///
/// When FAR and FRR are exactly equal over an interval (e.g. perfectly
/// separable scores), the interval midpoint is returned.
pub fn calibrate_threshold(genuine: &[f64], attack: &[f64]) -> Result<(f64, f64)> {
    if genuine.is_empty() || attack.is_empty() {
        return Err(Error::Matching("calibration needs both score lists non-empty".into()));
    }
    let mut candidates: Vec<f64> = genuine.iter().chain(attack).cloned().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // diff(t) = FAR - FRR is non-increasing and right-continuous; walk the
    // candidates until it crosses or touches zero.
    let mut prev: Option<(f64, f64, f64)> = None; // (t, far, frr)
    for (i, &t) in candidates.iter().enumerate() {
        let (far, frr) = far_frr(genuine, attack, t);
        let diff = far - frr;
        if diff == 0.0 {
            // Zero plateau: find where it ends and return the midpoint.
            let mut end = t;
            for &t2 in &candidates[i + 1..] {
                let (f2, r2) = far_frr(genuine, attack, t2);
                if f2 - r2 == 0.0 {
                    continue;
                }
                end = t2;
                break;
            }
            return Ok(((t + end) / 2.0, far));
        }
        if diff < 0.0 {
            let (t0, far0, frr0) = prev.unwrap_or((t - 1.0, 1.0, 0.0));
            let d0 = far0 - frr0;
            let frac = d0 / (d0 - diff);
            let t_star = t0 + frac * (t - t0);
            let far_star = far0 + frac * (far - far0);
            let frr_star = frr0 + frac * (frr - frr0);
            return Ok((t_star, (far_star + frr_star) / 2.0));
        }
        prev = Some((t, far, frr));
    }
    // diff stayed positive through every candidate; cannot happen because
    // FAR is 0 and FRR is 1 at the largest score.
    unreachable!("FAR-FRR must reach a non-positive value at the top candidate");
}
