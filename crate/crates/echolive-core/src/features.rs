//! Doppler slices around the probe tone and the 11 per-utterance contour
//! features: 6 energy-band centroid-frequency contours and 5 frequency-band
//! mean-energy contours.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::SegmentedUtterance;
use crate::spectrum::Spectrogram;

/// Number of contour features per utterance.
pub const CONTOUR_COUNT: usize = 11;
/// Contours 0..6 are energy-band frequency contours.
pub const ENERGY_BAND_COUNT: usize = 6;
/// Contours 6..11 are frequency-band energy contours.
pub const FREQ_BAND_COUNT: usize = 5;

/// Tunable feature-extraction parameters with paper-derived defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Probe frequency in Hz.
    pub f0_hz: f64,
    /// Doppler band half width in Hz; slices cover `f0 +/- half_band_hz`.
    pub half_band_hz: f64,
    /// Bins within this offset of the carrier are ignored by the energy-band
    /// centroids (the static direct-path tone would otherwise dominate).
    pub carrier_exclusion_hz: f64,
    /// Normalized-energy level ranges, lowest first; each range is
    /// lower-inclusive, upper-exclusive. Values outside every range belong
    /// to no band.
    pub energy_levels: [(f64, f64); 3],
    /// Frequency-offset band edges in Hz for fb1..fb5, lower-inclusive,
    /// upper-exclusive.
    pub freq_bands_hz: [(f64, f64); 5],
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            f0_hz: 20_000.0,
            half_band_hz: 200.0,
            carrier_exclusion_hz: 2.0,
            energy_levels: [(0.4, 0.7), (0.7, 0.9), (0.95, 0.99)],
            freq_bands_hz: [
                (100.0, 200.0),
                (50.0, 100.0),
                (-50.0, 50.0),
                (-100.0, -50.0),
                (-200.0, -100.0),
            ],
        }
    }
}

/// One phoneme's magnitudes restricted to the Doppler band around the probe.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerSlice {
    /// Magnitudes indexed `[frame][bin]`.
    pub magnitudes: Vec<Vec<f64>>,
    /// Probe frequency the slice is centered on.
    pub f0_hz: f64,
    pub bin_width_hz: f64,
    /// Frequency of bin 0.
    pub freq_origin_hz: f64,
    pub phoneme_label: String,
    pub normalized_energy: bool,
    pub normalized_length: bool,
}

impl DopplerSlice {
    pub fn frame_count(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bin_count(&self) -> usize {
        self.magnitudes.first().map_or(0, Vec::len)
    }

    /// Offset of bin `i` from the probe frequency, in Hz.
    pub fn offset_hz(&self, i: usize) -> f64 {
        self.freq_origin_hz + i as f64 * self.bin_width_hz - self.f0_hz
    }
}

/// Result of slicing an utterance: one slice per phoneme that owned at least
/// one frame, plus the labels of phonemes too short to own any.
#[derive(Debug, Clone)]
pub struct ExtractedSlices {
    pub slices: Vec<DopplerSlice>,
    pub dropped: Vec<String>,
}

/// Cut one Doppler slice per phoneme out of a spectrogram.
///
/// A frame belongs to a phoneme iff its window center lies inside the
/// phoneme interval; frames centered in pauses/gaps are discarded. Phonemes
/// owning no frame are dropped and reported.
pub fn extract_doppler(
    spectrogram: &Spectrogram,
    utterance: &SegmentedUtterance,
    params: &FeatureParams,
) -> Result<ExtractedSlices> {
    let f0 = params.f0_hz;
    let half = params.half_band_hz;
    if !spectrogram.covers(f0 - half, f0 + half) {
        return Err(Error::InvalidAudio(format!(
            "spectrogram does not cover [{} Hz, {} Hz]",
            f0 - half,
            f0 + half
        )));
    }
    if utterance.segments.is_empty() {
        return Err(Error::Degenerate("utterance has no segments".into()));
    }

    let eps = spectrogram.bin_width_hz * 1e-9;
    let bin_range: Vec<usize> = (0..spectrogram.bin_count())
        .filter(|&i| (spectrogram.bin_freq_hz(i) - f0).abs() <= half + eps)
        .collect();
    let first_bin = *bin_range.first().expect("coverage checked above");
    let n_band_bins = bin_range.len();

    let mut slices = Vec::new();
    let mut dropped = Vec::new();
    for seg in &utterance.segments {
        let mut frames = Vec::new();
        for k in 0..spectrogram.frame_count() {
            let center = spectrogram.frame_center_s(k);
            if seg.contains(center) {
                frames.push(spectrogram.magnitudes[k][first_bin..first_bin + n_band_bins].to_vec());
            }
        }
        if frames.is_empty() {
            dropped.push(seg.label.clone());
            continue;
        }
        slices.push(DopplerSlice {
            magnitudes: frames,
            f0_hz: f0,
            bin_width_hz: spectrogram.bin_width_hz,
            freq_origin_hz: spectrogram.bin_freq_hz(first_bin),
            phoneme_label: seg.label.clone(),
            normalized_energy: false,
            normalized_length: false,
        });
    }
    Ok(ExtractedSlices { slices, dropped })
}

/// Affinely map the slice magnitudes so the minimum becomes 0 and the
/// maximum 1. Idempotent; constant slices are rejected.
pub fn normalize_energy(slice: &DopplerSlice) -> Result<DopplerSlice> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for row in &slice.magnitudes {
        for &v in row {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if !(max > min) {
        return Err(Error::Degenerate(format!(
            "slice '{}' is constant (min == max == {max}); energy scale undefined",
            slice.phoneme_label
        )));
    }
    let span = max - min;
    let magnitudes = slice
        .magnitudes
        .iter()
        .map(|row| row.iter().map(|&v| (v - min) / span).collect())
        .collect();
    Ok(DopplerSlice {
        magnitudes,
        normalized_energy: true,
        ..slice.clone()
    })
}

/// Linearly interpolate `xs` onto `target` evenly spaced points, endpoints
/// preserved. `xs.len() == target` returns a copy.
pub fn resample_linear(xs: &[f64], target: usize) -> Vec<f64> {
    if xs.len() == target {
        return xs.to_vec();
    }
    if xs.len() == 1 {
        return vec![xs[0]; target];
    }
    if target == 1 {
        return vec![xs[0]];
    }
    let scale = (xs.len() - 1) as f64 / (target - 1) as f64;
    (0..target)
        .map(|j| {
            let pos = j as f64 * scale;
            let i0 = (pos.floor() as usize).min(xs.len() - 2);
            let frac = pos - i0 as f64;
            xs[i0] * (1.0 - frac) + xs[i0 + 1] * frac
        })
        .collect()
}

/// Resample the slice along the frame axis to exactly `target_frames`
/// frames via per-bin linear interpolation.
pub fn normalize_length(slice: &DopplerSlice, target_frames: usize) -> Result<DopplerSlice> {
    let frames = slice.frame_count();
    if frames < 2 {
        return Err(Error::Degenerate(format!(
            "slice '{}' has {frames} frame(s); need >= 2 to resample",
            slice.phoneme_label
        )));
    }
    if target_frames < 2 {
        return Err(Error::Degenerate(format!(
            "target of {target_frames} frame(s) is below the 2-frame minimum"
        )));
    }
    if target_frames == frames {
        return Ok(DopplerSlice { normalized_length: true, ..slice.clone() });
    }
    let bins = slice.bin_count();
    let mut magnitudes = vec![vec![0.0; bins]; target_frames];
    let scale = (frames - 1) as f64 / (target_frames - 1) as f64;
    for (j, row) in magnitudes.iter_mut().enumerate() {
        let pos = j as f64 * scale;
        let i0 = (pos.floor() as usize).min(frames - 2);
        let frac = pos - i0 as f64;
        for b in 0..bins {
            row[b] = slice.magnitudes[i0][b] * (1.0 - frac) + slice.magnitudes[i0 + 1][b] * frac;
        }
    }
    Ok(DopplerSlice {
        magnitudes,
        normalized_length: true,
        ..slice.clone()
    })
}

fn require_normalized(slice: &DopplerSlice) -> Result<()> {
    if !slice.normalized_energy {
        return Err(Error::Degenerate(format!(
            "slice '{}' must be energy-normalized first",
            slice.phoneme_label
        )));
    }
    Ok(())
}

/// Six energy-band frequency contours for one slice: for each of the three
/// normalized-energy levels and each shift sign, the magnitude-weighted
/// centroid offset per frame. Frames with no qualifying bin emit 0 Hz.
/// Bins within the carrier exclusion never qualify.
pub fn energy_band_contours(slice: &DopplerSlice, params: &FeatureParams) -> Result<Vec<Vec<f64>>> {
    require_normalized(slice)?;
    let excl = params.carrier_exclusion_hz;
    let mut contours = vec![Vec::with_capacity(slice.frame_count()); ENERGY_BAND_COUNT];
    for row in &slice.magnitudes {
        for (level_idx, &(lo, hi)) in params.energy_levels.iter().enumerate() {
            for (sign_idx, positive) in [(0usize, true), (1usize, false)] {
                let mut num = 0.0;
                let mut den = 0.0;
                for (i, &m) in row.iter().enumerate() {
                    let off = slice.offset_hz(i);
                    if off.abs() <= excl {
                        continue;
                    }
                    if positive != (off > 0.0) {
                        continue;
                    }
                    if m >= lo && m < hi {
                        num += m * off;
                        den += m;
                    }
                }
                let centroid = if den > 0.0 { num / den } else { 0.0 };
                contours[2 * level_idx + sign_idx].push(centroid);
            }
        }
    }
    Ok(contours)
}

/// Five frequency-band energy contours for one slice: per frame and band,
/// the arithmetic mean of normalized magnitudes over the band's bins.
pub fn freq_band_energy_contours(slice: &DopplerSlice, params: &FeatureParams) -> Result<Vec<Vec<f64>>> {
    require_normalized(slice)?;
    let mut contours = vec![Vec::with_capacity(slice.frame_count()); FREQ_BAND_COUNT];
    for row in &slice.magnitudes {
        for (band_idx, &(lo, hi)) in params.freq_bands_hz.iter().enumerate() {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (i, &m) in row.iter().enumerate() {
                let off = slice.offset_hz(i);
                if off >= lo && off < hi {
                    sum += m;
                    count += 1;
                }
            }
            contours[band_idx].push(if count > 0 { sum / count as f64 } else { 0.0 });
        }
    }
    Ok(contours)
}

/// The 11 contour features of one utterance, spliced across phonemes in
/// utterance order. All 11 contours share the same length.
///
/// Serializes as the versioned document with named arrays eb1..eb6,
/// fb1..fb5 (see [`ContourSet::to_json`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContourSetDocument", into = "ContourSetDocument")]
pub struct ContourSet {
    /// eb1..eb6: centroid frequency offsets in Hz.
    pub energy_band_freq: Vec<Vec<f64>>,
    /// fb1..fb5: mean normalized energies in [0, 1].
    pub freq_band_energy: Vec<Vec<f64>>,
    /// Frame count contributed by each phoneme, in order.
    pub frames_per_phoneme: Vec<usize>,
    pub f0_hz: f64,
    pub bin_width_hz: f64,
}

impl ContourSet {
    /// Total frame count (length of every contour).
    pub fn len(&self) -> usize {
        self.energy_band_freq[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phoneme_count(&self) -> usize {
        self.frames_per_phoneme.len()
    }

    /// Contour by flat index: 0..6 energy-band, 6..11 frequency-band.
    pub fn contour(&self, idx: usize) -> &[f64] {
        if idx < ENERGY_BAND_COUNT {
            &self.energy_band_freq[idx]
        } else {
            &self.freq_band_energy[idx - ENERGY_BAND_COUNT]
        }
    }

    /// Frame range of phoneme `i` within the spliced contours.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.frames_per_phoneme[..i].iter().sum();
        start..start + self.frames_per_phoneme[i]
    }

    /// The 11 contour segments of phoneme `i`.
    pub fn block(&self, i: usize) -> ContourBlock {
        let r = self.block_range(i);
        ContourBlock {
            contours: (0..CONTOUR_COUNT).map(|c| self.contour(c)[r.clone()].to_vec()).collect(),
        }
    }

    /// Rebuild the set with each phoneme block linearly resampled to the
    /// target frame counts.
    pub fn resample_blocks(&self, targets: &[usize]) -> Result<ContourSet> {
        if targets.len() != self.phoneme_count() {
            return Err(Error::Matching(format!(
                "{} phonemes cannot resample to {} targets",
                self.phoneme_count(),
                targets.len()
            )));
        }
        let mut eb = vec![Vec::new(); ENERGY_BAND_COUNT];
        let mut fb = vec![Vec::new(); FREQ_BAND_COUNT];
        for (i, &t) in targets.iter().enumerate() {
            let r = self.block_range(i);
            for c in 0..ENERGY_BAND_COUNT {
                eb[c].extend(resample_linear(&self.energy_band_freq[c][r.clone()], t));
            }
            for c in 0..FREQ_BAND_COUNT {
                fb[c].extend(resample_linear(&self.freq_band_energy[c][r.clone()], t));
            }
        }
        Ok(ContourSet {
            energy_band_freq: eb,
            freq_band_energy: fb,
            frames_per_phoneme: targets.to_vec(),
            f0_hz: self.f0_hz,
            bin_width_hz: self.bin_width_hz,
        })
    }
}

/// One phoneme's 11 contour segments, used by template building and
/// text-independent matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourBlock {
    /// 11 equally long segments: eb1..eb6 then fb1..fb5.
    pub contours: Vec<Vec<f64>>,
}

impl ContourBlock {
    pub fn len(&self) -> usize {
        self.contours[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resample(&self, target: usize) -> ContourBlock {
        ContourBlock {
            contours: self.contours.iter().map(|c| resample_linear(c, target)).collect(),
        }
    }
}

/// Splice per-phoneme slices into the utterance's [`ContourSet`].
pub fn build_contour_set(slices: &[DopplerSlice], params: &FeatureParams) -> Result<ContourSet> {
    if slices.is_empty() {
        return Err(Error::Degenerate("no slices to build contours from".into()));
    }
    let mut eb = vec![Vec::new(); ENERGY_BAND_COUNT];
    let mut fb = vec![Vec::new(); FREQ_BAND_COUNT];
    let mut frames_per_phoneme = Vec::with_capacity(slices.len());
    for slice in slices {
        let e = energy_band_contours(slice, params)?;
        let f = freq_band_energy_contours(slice, params)?;
        for (dst, src) in eb.iter_mut().zip(e) {
            dst.extend(src);
        }
        for (dst, src) in fb.iter_mut().zip(f) {
            dst.extend(src);
        }
        frames_per_phoneme.push(slice.frame_count());
    }
    Ok(ContourSet {
        energy_band_freq: eb,
        freq_band_energy: fb,
        frames_per_phoneme,
        f0_hz: params.f0_hz,
        bin_width_hz: slices[0].bin_width_hz,
    })
}

/// Named contour arrays as serialized; field order is the wire order.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ContourArrays {
    eb1: Vec<f64>,
    eb2: Vec<f64>,
    eb3: Vec<f64>,
    eb4: Vec<f64>,
    eb5: Vec<f64>,
    eb6: Vec<f64>,
    fb1: Vec<f64>,
    fb2: Vec<f64>,
    fb3: Vec<f64>,
    fb4: Vec<f64>,
    fb5: Vec<f64>,
}

/// Versioned on-disk form of a [`ContourSet`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ContourSetDocument {
    version: u32,
    f0_hz: f64,
    bin_width_hz: f64,
    frames_per_phoneme: Vec<usize>,
    contours: ContourArrays,
}

pub const CONTOUR_SET_VERSION: u32 = 1;

impl From<ContourSet> for ContourSetDocument {
    fn from(set: ContourSet) -> Self {
        let mut eb = set.energy_band_freq.into_iter();
        let mut fb = set.freq_band_energy.into_iter();
        let next = |it: &mut std::vec::IntoIter<Vec<f64>>| it.next().unwrap_or_default();
        ContourSetDocument {
            version: CONTOUR_SET_VERSION,
            f0_hz: set.f0_hz,
            bin_width_hz: set.bin_width_hz,
            frames_per_phoneme: set.frames_per_phoneme,
            contours: ContourArrays {
                eb1: next(&mut eb),
                eb2: next(&mut eb),
                eb3: next(&mut eb),
                eb4: next(&mut eb),
                eb5: next(&mut eb),
                eb6: next(&mut eb),
                fb1: next(&mut fb),
                fb2: next(&mut fb),
                fb3: next(&mut fb),
                fb4: next(&mut fb),
                fb5: next(&mut fb),
            },
        }
    }
}

impl TryFrom<ContourSetDocument> for ContourSet {
    type Error = Error;

    fn try_from(doc: ContourSetDocument) -> Result<Self> {
        if doc.version != CONTOUR_SET_VERSION {
            return Err(Error::Profile(format!(
                "unsupported contour document version {}",
                doc.version
            )));
        }
        let c = doc.contours;
        let set = ContourSet {
            energy_band_freq: vec![c.eb1, c.eb2, c.eb3, c.eb4, c.eb5, c.eb6],
            freq_band_energy: vec![c.fb1, c.fb2, c.fb3, c.fb4, c.fb5],
            frames_per_phoneme: doc.frames_per_phoneme,
            f0_hz: doc.f0_hz,
            bin_width_hz: doc.bin_width_hz,
        };
        let len = set.energy_band_freq[0].len();
        let all_equal = (0..CONTOUR_COUNT).all(|i| set.contour(i).len() == len);
        let total: usize = set.frames_per_phoneme.iter().sum();
        if !all_equal || total != len {
            return Err(Error::Profile(
                "contour document arrays disagree on length".into(),
            ));
        }
        Ok(set)
    }
}

impl ContourSet {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<ContourSet> {
        Ok(serde_json::from_str(text)?)
    }
}
