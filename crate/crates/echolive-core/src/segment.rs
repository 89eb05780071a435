//! Phoneme intervals: alignment-file ingestion, an energy-gated fallback
//! segmenter, and pause removal.
//!
//! The primary path reads forced-alignment output (CSV `label,start,end` in
//! seconds). When no alignment exists, [`segment_by_energy`] produces
//! unlabeled `seg_k` intervals from the voice band.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Labels treated as silence/pause by default (common forced-aligner
/// conventions).
pub const DEFAULT_PAUSE_LABELS: [&str; 4] = ["sil", "sp", "pau", ""];

/// A labeled time interval within an utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeSegment {
    pub label: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl PhonemeSegment {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s
    }
}

/// Where a segmentation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentationSource {
    ExternalAlignment,
    EnergyFallback,
}

/// An ordered, non-overlapping set of phoneme segments for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedUtterance {
    pub segments: Vec<PhonemeSegment>,
    pub source: SegmentationSource,
    pub total_duration_s: f64,
}

impl SegmentedUtterance {
    pub fn labels(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.label.clone()).collect()
    }
}

fn validate_segments(segments: &[PhonemeSegment], duration_s: f64) -> Result<()> {
    for s in segments {
        if !(s.start_s >= 0.0 && s.start_s < s.end_s) {
            return Err(Error::AlignmentParse(format!(
                "segment '{}' has invalid interval [{}, {})",
                s.label, s.start_s, s.end_s
            )));
        }
        if s.end_s > duration_s + 1e-9 {
            return Err(Error::SegmentRange(format!(
                "segment '{}' ends at {} s beyond utterance duration {} s",
                s.label, s.end_s, duration_s
            )));
        }
    }
    for w in segments.windows(2) {
        if w[1].start_s < w[0].end_s - 1e-12 {
            return Err(Error::AlignmentParse(format!(
                "segments '{}' and '{}' overlap ({} < {})",
                w[0].label, w[1].label, w[1].start_s, w[0].end_s
            )));
        }
    }
    Ok(())
}

/// Parse an alignment file.
///
/// Default format: UTF-8 CSV, one `label,start_seconds,end_seconds` row per
/// interval, no header, '.' decimal point, sorted by start. With
/// `tab_separated_with_header` a TSV variant with one header row is accepted.
/// Pause rows (labels in `pause_labels`) are dropped.
pub fn load_alignment(
    path: &Path,
    utterance_duration_s: f64,
    pause_labels: &[String],
    tab_separated_with_header: bool,
) -> Result<SegmentedUtterance> {
    let text = std::fs::read_to_string(path)?;
    parse_alignment(&text, utterance_duration_s, pause_labels, tab_separated_with_header)
}

/// [`load_alignment`] for already-read text; useful for tests.
pub fn parse_alignment(
    text: &str,
    utterance_duration_s: f64,
    pause_labels: &[String],
    tab_separated_with_header: bool,
) -> Result<SegmentedUtterance> {
    let sep = if tab_separated_with_header { '\t' } else { ',' };
    let mut segments = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if tab_separated_with_header && i == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(sep).collect();
        if fields.len() != 3 {
            return Err(Error::AlignmentParse(format!(
                "line {}: expected 3 fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        let label = fields[0].trim().to_string();
        let start_s: f64 = fields[1].trim().parse().map_err(|e| {
            Error::AlignmentParse(format!("line {}: bad start '{}': {e}", i + 1, fields[1]))
        })?;
        let end_s: f64 = fields[2].trim().parse().map_err(|e| {
            Error::AlignmentParse(format!("line {}: bad end '{}': {e}", i + 1, fields[2]))
        })?;
        segments.push(PhonemeSegment { label, start_s, end_s });
    }
    segments.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    validate_segments(&segments, utterance_duration_s)?;
    segments.retain(|s| !pause_labels.iter().any(|p| p == &s.label));
    Ok(SegmentedUtterance {
        segments,
        source: SegmentationSource::ExternalAlignment,
        total_duration_s: utterance_duration_s,
    })
}

/// Serialize segments in the alignment CSV format; inverse of
/// [`load_alignment`] on valid segment lists.
pub fn save_alignment(path: &Path, utterance: &SegmentedUtterance) -> Result<()> {
    let mut out = String::new();
    for s in &utterance.segments {
        writeln!(out, "{},{},{}", s.label, s.start_s, s.end_s)
            .expect("string write cannot fail");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Energy-gated fallback segmentation of the voice band.
///
/// Frames of `frame_ms` are marked voiced when their energy exceeds
/// `energy_threshold_ratio` times the median energy of the non-silent
/// frames; contiguous voiced runs become segments labeled `seg_k`.
pub fn segment_by_energy(
    voice: &AudioBuffer,
    frame_ms: f64,
    energy_threshold_ratio: f64,
) -> Result<SegmentedUtterance> {
    let samples = voice.mono_samples()?;
    let fs = voice.sample_rate();
    let frame_len = ((frame_ms / 1000.0 * fs).round() as usize).max(1);
    let n_frames = samples.len() / frame_len;
    let duration = voice.duration_seconds();

    let energies: Vec<f64> = (0..n_frames)
        .map(|k| {
            samples[k * frame_len..(k + 1) * frame_len]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                / frame_len as f64
        })
        .collect();

    let peak = energies.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Ok(SegmentedUtterance {
            segments: Vec::new(),
            source: SegmentationSource::EnergyFallback,
            total_duration_s: duration,
        });
    }
    // Median over frames carrying signal (digital-silence frames excluded).
    let mut voiced: Vec<f64> = energies.iter().cloned().filter(|&e| e > peak * 1e-6).collect();
    voiced.sort_by(f64::total_cmp);
    let median = voiced[voiced.len() / 2];
    let threshold = energy_threshold_ratio * median;

    let mut segments = Vec::new();
    let mut run_start: Option<usize> = None;
    for k in 0..=n_frames {
        let active = k < n_frames && energies[k] > threshold;
        match (active, run_start) {
            (true, None) => run_start = Some(k),
            (false, Some(s)) => {
                segments.push(PhonemeSegment {
                    label: format!("seg_{}", segments.len()),
                    start_s: s as f64 * frame_len as f64 / fs,
                    end_s: k as f64 * frame_len as f64 / fs,
                });
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(SegmentedUtterance {
        segments,
        source: SegmentationSource::EnergyFallback,
        total_duration_s: duration,
    })
}

/// Drop pause-labeled segments; everything else passes through unchanged.
/// Gaps between the remaining segments carry no information downstream
/// (spectrogram frames centered in gaps are discarded at extraction).
pub fn remove_pauses(utterance: &SegmentedUtterance, pause_labels: &[String]) -> SegmentedUtterance {
    SegmentedUtterance {
        segments: utterance
            .segments
            .iter()
            .filter(|s| !pause_labels.iter().any(|p| p == &s.label))
            .cloned()
            .collect(),
        source: utterance.source,
        total_duration_s: utterance.total_duration_s,
    }
}

pub fn default_pause_labels() -> Vec<String> {
    DEFAULT_PAUSE_LABELS.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn parses_sorted_csv_rows() {
        let u = parse_alignment("lai,0.10,0.35\nk,0.35,0.42\n", 1.0, &default_pause_labels(), false)
            .unwrap();
        assert_eq!(u.segments.len(), 2);
        assert_eq!(u.segments[0].label, "lai");
        assert_eq!(u.segments[1].label, "k");
        assert_eq!(u.source, SegmentationSource::ExternalAlignment);
    }

    #[test]
    fn drops_pause_rows() {
        let u = parse_alignment(
            "sil,0.0,0.10\na,0.10,0.30\nsp,0.30,0.35\nb,0.35,0.50\n",
            1.0,
            &default_pause_labels(),
            false,
        )
        .unwrap();
        assert_eq!(u.labels(), vec!["a", "b"]);
    }

    #[test]
    fn overlap_is_a_parse_error() {
        let err =
            parse_alignment("a,0.1,0.3\nb,0.2,0.4\n", 1.0, &default_pause_labels(), false).unwrap_err();
        assert!(matches!(err, Error::AlignmentParse(_)), "{err}");
    }

    #[test]
    fn interval_beyond_duration_is_a_range_error() {
        let err =
            parse_alignment("a,0.1,1.3\n", 1.0, &default_pause_labels(), false).unwrap_err();
        assert!(matches!(err, Error::SegmentRange(_)), "{err}");
    }

    #[test]
    fn tsv_with_header_when_flagged() {
        let u = parse_alignment(
            "label\tstart\tend\naa\t0.0\t0.2\nb\t0.2\t0.4\n",
            0.5,
            &default_pause_labels(),
            true,
        )
        .unwrap();
        assert_eq!(u.labels(), vec!["aa", "b"]);
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.align.csv");
        let u = SegmentedUtterance {
            segments: vec![
                PhonemeSegment { label: "aa".into(), start_s: 0.05, end_s: 0.3 },
                PhonemeSegment { label: "k".into(), start_s: 0.35, end_s: 0.5 },
            ],
            source: SegmentationSource::ExternalAlignment,
            total_duration_s: 1.0,
        };
        save_alignment(&path, &u).unwrap();
        let back = load_alignment(&path, 1.0, &default_pause_labels(), false).unwrap();
        assert_eq!(back.segments, u.segments);
    }

    fn tone_silence_tone(fs: f64) -> AudioBuffer {
        // 200 ms tone, 100 ms silence, 200 ms tone.
        let seg = |dur: f64, amp: f64, off: usize| -> Vec<f64> {
            (0..(dur * fs) as usize)
                .map(|k| amp * (2.0 * PI * 500.0 * (k + off) as f64 / fs).sin())
                .collect()
        };
        let mut x = seg(0.2, 0.5, 0);
        x.extend(seg(0.1, 0.0, 0));
        x.extend(seg(0.2, 0.5, 0));
        AudioBuffer::mono(x, fs).unwrap()
    }

    #[test]
    fn energy_fallback_recovers_constructed_boundaries() {
        let fs = 48_000.0;
        let buf = tone_silence_tone(fs);
        let u = segment_by_energy(&buf, 20.0, 0.25).unwrap();
        assert_eq!(u.segments.len(), 2);
        let frame = 0.02;
        let expected = [(0.0, 0.2), (0.3, 0.5)];
        for (seg, (s, e)) in u.segments.iter().zip(expected) {
            assert!((seg.start_s - s).abs() <= frame + 1e-9, "start {}", seg.start_s);
            assert!((seg.end_s - e).abs() <= frame + 1e-9, "end {}", seg.end_s);
        }
        assert_eq!(u.segments[0].label, "seg_0");
    }

    #[test]
    fn energy_fallback_empty_on_silence() {
        let buf = AudioBuffer::mono(vec![0.0; 48_000], 48_000.0).unwrap();
        let u = segment_by_energy(&buf, 20.0, 0.25).unwrap();
        assert!(u.segments.is_empty());
    }

    #[test]
    fn energy_fallback_single_tone_covers_span() {
        let fs = 48_000.0;
        let x: Vec<f64> = (0..(0.5 * fs) as usize)
            .map(|k| 0.5 * (2.0 * PI * 500.0 * k as f64 / fs).sin())
            .collect();
        let buf = AudioBuffer::mono(x, fs).unwrap();
        let u = segment_by_energy(&buf, 20.0, 0.25).unwrap();
        assert_eq!(u.segments.len(), 1);
        let covered = u.segments[0].duration_s();
        assert!(covered >= 0.95 * 0.5, "covered {covered}");
    }

    #[test]
    fn determinism_identical_inputs_identical_segments() {
        let fs = 48_000.0;
        let buf = tone_silence_tone(fs);
        let a = segment_by_energy(&buf, 20.0, 0.25).unwrap();
        let b = segment_by_energy(&buf, 20.0, 0.25).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn remove_pauses_passes_through_and_drops_labeled_pauses() {
        let u = SegmentedUtterance {
            segments: vec![
                PhonemeSegment { label: "a".into(), start_s: 0.0, end_s: 0.2 },
                PhonemeSegment { label: "sil".into(), start_s: 0.2, end_s: 0.25 },
                PhonemeSegment { label: "b".into(), start_s: 0.25, end_s: 0.5 },
            ],
            source: SegmentationSource::ExternalAlignment,
            total_duration_s: 1.0,
        };
        let out = remove_pauses(&u, &default_pause_labels());
        assert_eq!(out.labels(), vec!["a", "b"]);
        // Gapped (already pause-free) lists are unchanged.
        let again = remove_pauses(&out, &default_pause_labels());
        assert_eq!(again.segments, out.segments);
        // Touching segments stay untouched.
        let touching = SegmentedUtterance {
            segments: vec![
                PhonemeSegment { label: "a".into(), start_s: 0.0, end_s: 0.2 },
                PhonemeSegment { label: "b".into(), start_s: 0.2, end_s: 0.4 },
            ],
            source: SegmentationSource::ExternalAlignment,
            total_duration_s: 1.0,
        };
        assert_eq!(remove_pauses(&touching, &default_pause_labels()).segments, touching.segments);
        // Empty in, empty out.
        let empty = SegmentedUtterance {
            segments: vec![],
            source: SegmentationSource::ExternalAlignment,
            total_duration_s: 1.0,
        };
        assert!(remove_pauses(&empty, &default_pause_labels()).segments.is_empty());
    }
}
