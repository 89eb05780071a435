//! End-to-end wiring: recording + alignment in, contour features, templates
//! and liveness decisions out.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::audio::{read_wav, AudioBuffer};
use crate::config::{FeatureMode, RunConfig};
use crate::error::{Error, Result};
use crate::features::{
    build_contour_set, extract_doppler, normalize_energy, ContourBlock, ContourSet,
};
use crate::matching::{
    build_passphrase_template, build_phoneme_templates, decide_with_scores, mode_mean,
    score_text_dependent, weighted_similarity, LivenessDecision, PassphraseTemplate,
    PhonemeTemplate,
};
use crate::segment::{default_pause_labels, load_alignment, remove_pauses, SegmentedUtterance};
use crate::sim::{read_manifest, CorpusEntry, CorpusKind};
use crate::spectrum::{cancel_carrier, probe_band_spectrogram};
use crate::wavelet::denoise_contour_set;

/// Denoised contour features of one utterance plus the labels that survived
/// extraction.
#[derive(Debug, Clone)]
pub struct UtteranceFeatures {
    pub contours: ContourSet,
    pub labels: Vec<String>,
    /// Phonemes dropped for owning no frame or carrying no energy.
    pub dropped: Vec<String>,
}

impl UtteranceFeatures {
    /// Labeled per-phoneme blocks for text-independent matching.
    pub fn labeled_blocks(&self) -> Vec<(String, ContourBlock)> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), self.contours.block(i)))
            .collect()
    }
}

/// Run the feature front end on one mono recording: static-carrier
/// cancellation, probe-band spectrogram, per-phoneme Doppler slices,
/// energy normalization, contour splicing, and wavelet denoising.
pub fn extract_features(
    audio: &AudioBuffer,
    utterance: &SegmentedUtterance,
    cfg: &RunConfig,
) -> Result<UtteranceFeatures> {
    let params = cfg.feature_params();
    let (cleaned, _carrier_amp) = cancel_carrier(audio, params.f0_hz)?;
    let spectrogram = probe_band_spectrogram(
        &cleaned,
        params.f0_hz,
        cfg.stft_window_s,
        cfg.stft_hop_s,
        cfg.stft_bin_width_hz,
        params.half_band_hz,
    )?;
    let cleaned = remove_pauses(utterance, &default_pause_labels());
    let extracted = extract_doppler(&spectrogram, &cleaned, &params)?;
    let mut dropped = extracted.dropped;

    let mut slices = Vec::with_capacity(extracted.slices.len());
    let mut labels = Vec::with_capacity(extracted.slices.len());
    for slice in extracted.slices {
        match normalize_energy(&slice) {
            Ok(n) => {
                labels.push(n.phoneme_label.clone());
                slices.push(n);
            }
            Err(Error::Degenerate(_)) => dropped.push(slice.phoneme_label.clone()),
            Err(e) => return Err(e),
        }
    }
    let contours = build_contour_set(&slices, &params)?;
    let denoised = denoise_contour_set(
        &contours,
        cfg.wavelet_multiplier,
        3,
        cfg.wavelet_kind()?,
    )?;
    Ok(UtteranceFeatures {
        contours: denoised,
        labels,
        dropped,
    })
}

/// Read a WAV + alignment pair and extract features. Multichannel input
/// falls back to channel 0. Returns accumulated warnings.
pub fn features_from_files(
    wav: &Path,
    alignment: &Path,
    tab_separated: bool,
    cfg: &RunConfig,
) -> Result<(UtteranceFeatures, Vec<String>)> {
    let mut warnings = Vec::new();
    let (audio, rate_warning) = read_wav(wav)?;
    if let Some(w) = rate_warning {
        warnings.push(format!("{}: {w}", wav.display()));
    }
    let mono = if audio.channel_count() == 1 {
        audio
    } else {
        warnings.push(format!(
            "{}: using channel 0 of {} channels",
            wav.display(),
            audio.channel_count()
        ));
        audio.take_channel(0)?
    };
    let utterance = load_alignment(
        alignment,
        mono.duration_seconds(),
        &default_pause_labels(),
        tab_separated,
    )?;
    let features = extract_features(&mono, &utterance, cfg)?;
    for label in &features.dropped {
        warnings.push(format!("phoneme '{label}' dropped (no usable frames)"));
    }
    Ok((features, warnings))
}

/// Build a passphrase template from repeated enrollment trials. All trials
/// must agree on the phoneme label sequence.
pub fn enroll_text_dependent(trials: &[UtteranceFeatures]) -> Result<PassphraseTemplate> {
    if trials.is_empty() {
        return Err(Error::Enrollment("no enrollment trials".into()));
    }
    let labels = &trials[0].labels;
    for (i, t) in trials.iter().enumerate() {
        if &t.labels != labels {
            return Err(Error::Enrollment(format!(
                "trial {i} phonemes {:?} differ from {:?}",
                t.labels, labels
            )));
        }
    }
    let sets: Vec<ContourSet> = trials.iter().map(|t| t.contours.clone()).collect();
    build_passphrase_template(&sets, labels)
}

/// Build weighted phoneme templates from a text-independent corpus.
/// Returns the map and the once-occurring labels that were excluded.
pub fn enroll_text_independent(
    utterances: &[UtteranceFeatures],
) -> Result<(BTreeMap<String, PhonemeTemplate>, Vec<String>)> {
    let corpus: Vec<(Vec<String>, ContourSet)> = utterances
        .iter()
        .map(|u| (u.labels.clone(), u.contours.clone()))
        .collect();
    build_phoneme_templates(&corpus)
}

/// Score a test utterance against a passphrase template (text-dependent):
/// per-phoneme length normalization to the template, per-contour Pearson,
/// feature-mode mean, threshold decision.
pub fn verify_text_dependent(
    test: &UtteranceFeatures,
    template: &PassphraseTemplate,
    mode: FeatureMode,
    threshold: f64,
) -> Result<LivenessDecision> {
    let per_contour = text_dependent_contour_scores(test, template)?;
    decide_with_scores(per_contour, threshold, mode)
}

/// The per-contour Pearson scores of a test utterance against a template,
/// after alignment; shared by all three feature modes.
pub fn text_dependent_contour_scores(
    test: &UtteranceFeatures,
    template: &PassphraseTemplate,
) -> Result<Vec<Option<f64>>> {
    if test.labels != template.phoneme_labels {
        return Err(Error::Matching(format!(
            "test phonemes {:?} do not match template {:?}",
            test.labels, template.phoneme_labels
        )));
    }
    let aligned = test
        .contours
        .resample_blocks(&template.contours.frames_per_phoneme)?;
    score_text_dependent(&aligned, template)
}

/// Text-independent verification against weighted phoneme templates.
/// Returns the decision and the matched-phoneme coverage.
pub fn verify_text_independent(
    test: &UtteranceFeatures,
    templates: &BTreeMap<String, PhonemeTemplate>,
    mode: FeatureMode,
    threshold: f64,
) -> Result<(LivenessDecision, f64)> {
    let blocks = test.labeled_blocks();
    let (per_contour, coverage) = weighted_similarity(&blocks, templates)?;
    let decision = decide_with_scores(per_contour, threshold, mode)?;
    Ok((decision, coverage))
}

/// One verification trial of a scored corpus.
#[derive(Debug, Clone)]
pub struct ScoredTrial {
    pub user: String,
    pub kind: CorpusKind,
    pub per_contour: Vec<Option<f64>>,
}

impl ScoredTrial {
    pub fn score(&self, mode: FeatureMode) -> Result<f64> {
        mode_mean(&self.per_contour, mode)
    }
}

fn alignment_path(root: &Path, entry: &CorpusEntry) -> std::path::PathBuf {
    root.join(entry.path.replace(".wav", ".align.csv"))
}

/// Enroll every user of a generated corpus from its enrollment files and
/// score every verification file against the owner's template.
pub fn score_corpus(root: &Path, cfg: &RunConfig) -> Result<Vec<ScoredTrial>> {
    let entries = read_manifest(root)?;
    let mut users: BTreeMap<String, Vec<&CorpusEntry>> = BTreeMap::new();
    for e in &entries {
        users.entry(e.user.clone()).or_default().push(e);
    }

    let mut scored = Vec::new();
    for (user, files) in users {
        let enroll: Vec<&&CorpusEntry> =
            files.iter().filter(|e| e.kind == CorpusKind::Enroll).collect();
        if enroll.len() < 2 {
            return Err(Error::Enrollment(format!("user {user} has {} enrollment files", enroll.len())));
        }
        let trials: Vec<UtteranceFeatures> = enroll
            .par_iter()
            .map(|e| {
                features_from_files(&root.join(&e.path), &alignment_path(root, e), false, cfg)
                    .map(|(f, _)| f)
            })
            .collect::<Result<Vec<_>>>()?;
        let template = enroll_text_dependent(&trials)?;

        let tests: Vec<&&CorpusEntry> =
            files.iter().filter(|e| e.kind != CorpusKind::Enroll).collect();
        let mut user_scores: Vec<ScoredTrial> = tests
            .par_iter()
            .map(|e| {
                let (features, _) =
                    features_from_files(&root.join(&e.path), &alignment_path(root, e), false, cfg)?;
                let per_contour = text_dependent_contour_scores(&features, &template)?;
                Ok(ScoredTrial {
                    user: user.clone(),
                    kind: e.kind,
                    per_contour,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        scored.append(&mut user_scores);
    }
    Ok(scored)
}

/// Split scored trials into genuine and attack score lists for one mode.
pub fn split_scores(trials: &[ScoredTrial], mode: FeatureMode) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut genuine = Vec::new();
    let mut attack = Vec::new();
    for t in trials {
        let s = t.score(mode)?;
        match t.kind {
            CorpusKind::Genuine => genuine.push(s),
            CorpusKind::Playback | CorpusKind::Mimicry => attack.push(s),
            CorpusKind::Enroll => {}
        }
    }
    Ok((genuine, attack))
}
