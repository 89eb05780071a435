//! Discrete wavelet transform denoising of contour features.
//!
//! Three-level orthogonal DWT with symmetric boundary extension, per-level
//! soft thresholding of detail coefficients (threshold
//! `multiplier * sigma_k * sqrt(2 ln n_k)` with the robust sigma estimate
//! `median(|d|)/0.6745`), and inverse reconstruction trimmed to the input
//! length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ContourSet, CONTOUR_COUNT};

/// Supported orthogonal wavelet families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveletKind {
    /// 2-tap Haar.
    Haar,
    /// 4-tap Daubechies (2 vanishing moments).
    Db2,
    /// 8-tap Daubechies (4 vanishing moments).
    Db4,
}

impl Default for WaveletKind {
    fn default() -> Self {
        WaveletKind::Db4
    }
}

impl WaveletKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "haar" | "db1" => Ok(WaveletKind::Haar),
            "db2" => Ok(WaveletKind::Db2),
            "db4" => Ok(WaveletKind::Db4),
            other => Err(Error::Config(format!(
                "unknown wavelet '{other}' (expected haar, db2 or db4)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WaveletKind::Haar => "haar",
            WaveletKind::Db2 => "db2",
            WaveletKind::Db4 => "db4",
        }
    }

    /// Analysis low-pass filter.
    fn dec_lo(&self) -> Vec<f64> {
        match self {
            WaveletKind::Haar => {
                let c = std::f64::consts::FRAC_1_SQRT_2;
                vec![c, c]
            }
            WaveletKind::Db2 => {
                let s3 = 3.0f64.sqrt();
                let d = 4.0 * std::f64::consts::SQRT_2;
                vec![(1.0 - s3) / d, (3.0 - s3) / d, (3.0 + s3) / d, (1.0 + s3) / d]
            }
            WaveletKind::Db4 => vec![
                -0.010597401784997278,
                0.032883011666982945,
                0.030841381835986965,
                -0.187034811718881060,
                -0.027983769416983849,
                0.630880767929590380,
                0.714846570552541600,
                0.230377813308855140,
            ],
        }
    }

    /// Analysis high-pass via the quadrature-mirror relation.
    fn dec_hi(&self) -> Vec<f64> {
        let h = self.dec_lo();
        let f = h.len();
        (0..f)
            .map(|j| if j % 2 == 0 { h[f - 1 - j] } else { -h[f - 1 - j] })
            .collect()
    }
}

/// Multi-level DWT coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    /// Approximation coefficients at the deepest level.
    pub approx: Vec<f64>,
    /// Detail coefficients, `details[0]` finest (level 1).
    pub details: Vec<Vec<f64>>,
    pub wavelet: WaveletKind,
    pub original_length: usize,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }
}

/// Coefficient count for one analysis step of an `n`-sample input with an
/// `f`-tap filter.
pub fn level_length(n: usize, f: usize) -> usize {
    (n + f - 1) / 2
}

/// Symmetric (half-sample) extension lookup: index into a virtual signal
/// extended by reflection with edge repetition.
fn sym(x: &[f64], idx: isize) -> f64 {
    let n = x.len() as isize;
    let m = if idx < 0 {
        -idx - 1
    } else if idx >= n {
        2 * n - 1 - idx
    } else {
        idx
    };
    x[m as usize]
}

/// One analysis step: filter against the symmetric extension, downsample
/// by 2.
fn analysis_step(x: &[f64], filter: &[f64]) -> Vec<f64> {
    let f = filter.len();
    let out_len = level_length(x.len(), f);
    (0..out_len)
        .map(|o| {
            let base = 2 * o as isize + 1;
            filter.iter().enumerate().map(|(j, &c)| c * sym(x, base - j as isize)).sum()
        })
        .collect()
}

/// One synthesis step: upsample both coefficient arrays, convolve with the
/// time-reversed analysis filters, sum, and keep the valid region.
fn synthesis_step(approx: &[f64], detail: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let f = lo.len();
    let l = approx.len();
    debug_assert_eq!(detail.len(), l);
    let rec_len = 2 * l + 2 - f;
    let mut out = vec![0.0; rec_len];
    for (i, (&a, &d)) in approx.iter().zip(detail).enumerate() {
        // Upsampled coefficient i sits at position 2i of the full
        // convolution; output index t maps to full index t + f - 2.
        for j in 0..f {
            let full = 2 * i + (f - 1 - j);
            let t = full as isize - (f as isize - 2);
            if t >= 0 && (t as usize) < rec_len {
                out[t as usize] += a * lo[j] + d * hi[j];
            }
        }
    }
    out
}

/// Cascade `levels` analysis steps.
pub fn dwt_decompose(contour: &[f64], levels: usize, wavelet: WaveletKind) -> Result<WaveletDecomposition> {
    let min = 1usize << levels;
    if contour.len() < min {
        return Err(Error::ContourTooShort {
            len: contour.len(),
            min,
            levels,
        });
    }
    let lo = wavelet.dec_lo();
    let hi = wavelet.dec_hi();
    let mut approx = contour.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let d = analysis_step(&approx, &hi);
        let a = analysis_step(&approx, &lo);
        details.push(d);
        approx = a;
    }
    Ok(WaveletDecomposition {
        approx,
        details,
        wavelet,
        original_length: contour.len(),
    })
}

/// Robust noise scale: `median(|d|) / 0.6745`.
fn robust_sigma(d: &[f64]) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    let mut abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let median = if n % 2 == 1 { abs[n / 2] } else { 0.5 * (abs[n / 2 - 1] + abs[n / 2]) };
    median / 0.6745
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Soft-threshold each detail level with
/// `t_k = multiplier * sigma_k * sqrt(2 ln n_k)`.
pub fn threshold_details(decomp: &WaveletDecomposition, multiplier: f64) -> WaveletDecomposition {
    let details = decomp
        .details
        .iter()
        .map(|d| {
            let n = d.len().max(1) as f64;
            let t = multiplier * robust_sigma(d) * (2.0 * n.ln()).sqrt();
            d.iter().map(|&v| soft(v, t)).collect()
        })
        .collect();
    WaveletDecomposition {
        approx: decomp.approx.clone(),
        details,
        wavelet: decomp.wavelet,
        original_length: decomp.original_length,
    }
}

/// Inverse cascade, trimmed to the original length.
pub fn dwt_reconstruct(decomp: &WaveletDecomposition) -> Vec<f64> {
    let lo = decomp.wavelet.dec_lo();
    let hi = decomp.wavelet.dec_hi();
    let f = lo.len();

    // Lengths at each level, from the original downward.
    let mut lengths = vec![decomp.original_length];
    for _ in 0..decomp.levels() {
        lengths.push(level_length(*lengths.last().unwrap(), f));
    }

    let mut x = decomp.approx.clone();
    for (k, detail) in decomp.details.iter().enumerate().rev() {
        let mut rec = synthesis_step(&x, detail, &lo, &hi);
        rec.truncate(lengths[k]);
        x = rec;
    }
    x
}

/// Denoise all 11 contours of a set independently; lengths are preserved.
pub fn denoise_contour_set(
    contours: &ContourSet,
    multiplier: f64,
    levels: usize,
    wavelet: WaveletKind,
) -> Result<ContourSet> {
    let denoise = |c: &[f64]| -> Result<Vec<f64>> {
        let decomp = dwt_decompose(c, levels, wavelet)?;
        let thresholded = threshold_details(&decomp, multiplier);
        Ok(dwt_reconstruct(&thresholded))
    };
    let mut out = contours.clone();
    for c in 0..CONTOUR_COUNT {
        let denoised = denoise(contours.contour(c))?;
        debug_assert_eq!(denoised.len(), contours.contour(c).len());
        if c < crate::features::ENERGY_BAND_COUNT {
            out.energy_band_freq[c] = denoised;
        } else {
            out.freq_band_energy[c - crate::features::ENERGY_BAND_COUNT] = denoised;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = a.iter().fold(1e-30, |m: f64, v| m.max(v.abs()));
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn constants_have_no_detail() {
        let x = vec![5.0; 64];
        for w in [WaveletKind::Haar, WaveletKind::Db2, WaveletKind::Db4] {
            let d = dwt_decompose(&x, 3, w).unwrap();
            for level in &d.details {
                for &v in level {
                    assert!(v.abs() < 1e-9 * 5.0, "{w:?}: detail {v}");
                }
            }
            // The approximation carries the signal energy.
            let approx_energy: f64 = d.approx.iter().map(|v| v * v).sum();
            assert!(approx_energy > 0.0);
        }
    }

    #[test]
    fn impulse_roundtrips() {
        for w in [WaveletKind::Haar, WaveletKind::Db2, WaveletKind::Db4] {
            for pos in [0usize, 7, 31, 63] {
                let mut x = vec![0.0; 64];
                x[pos] = 1.0;
                let d = dwt_decompose(&x, 3, w).unwrap();
                let back = dwt_reconstruct(&d);
                assert!(max_rel_err(&x, &back) < 1e-9, "{w:?} pos {pos}");
            }
        }
    }

    #[test]
    fn roundtrip_all_lengths_8_to_512() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for w in [WaveletKind::Haar, WaveletKind::Db2, WaveletKind::Db4] {
            for n in 8..=512usize {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let d = dwt_decompose(&x, 3, w).unwrap();
                let back = dwt_reconstruct(&d);
                assert_eq!(back.len(), n);
                let err = max_rel_err(&x, &back);
                assert!(err < 1e-9, "{w:?} n={n}: err {err}");
            }
        }
    }

    #[test]
    fn level_lengths_follow_the_cascade_formula() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = dwt_decompose(&x, 3, WaveletKind::Db4).unwrap();
        // Hand enumeration with f = 8: (100+7)/2 = 53, (53+7)/2 = 30,
        // (30+7)/2 = 18.
        assert_eq!(d.details[0].len(), 53);
        assert_eq!(d.details[1].len(), 30);
        assert_eq!(d.details[2].len(), 18);
        assert_eq!(d.approx.len(), 18);
    }

    #[test]
    fn too_short_contour_names_the_minimum() {
        let err = dwt_decompose(&[1.0; 7], 3, WaveletKind::Db4).unwrap_err();
        match err {
            Error::ContourTooShort { len, min, levels } => {
                assert_eq!((len, min, levels), (7, 8, 3));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn zero_multiplier_changes_nothing() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
        let d = dwt_decompose(&x, 3, WaveletKind::Db4).unwrap();
        let t = threshold_details(&d, 0.0);
        assert_eq!(t, d);
        let back = dwt_reconstruct(&t);
        assert!(max_rel_err(&x, &back) < 1e-9);
    }

    #[test]
    fn huge_multiplier_leaves_only_the_approximation_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = dwt_decompose(&x, 3, WaveletKind::Db4).unwrap();
        let t = threshold_details(&d, 1e9);
        for level in &t.details {
            assert!(level.iter().all(|&v| v == 0.0));
        }
        let zeroed = WaveletDecomposition {
            details: d.details.iter().map(|l| vec![0.0; l.len()]).collect(),
            ..d.clone()
        };
        assert_eq!(dwt_reconstruct(&t), dwt_reconstruct(&zeroed));
    }

    #[test]
    fn zeroed_everything_reconstructs_to_zero() {
        let x = vec![1.0; 32];
        let d = dwt_decompose(&x, 3, WaveletKind::Db4).unwrap();
        let zeroed = WaveletDecomposition {
            approx: vec![0.0; d.approx.len()],
            details: d.details.iter().map(|l| vec![0.0; l.len()]).collect(),
            ..d
        };
        let back = dwt_reconstruct(&zeroed);
        assert!(back.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn larger_multiplier_zeroes_a_superset() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = dwt_decompose(&x, 3, WaveletKind::Db4).unwrap();
        let small = threshold_details(&d, 0.5);
        let large = threshold_details(&d, 1.5);
        for (ls, ll) in small.details.iter().zip(&large.details) {
            for (&a, &b) in ls.iter().zip(ll) {
                if a == 0.0 {
                    assert_eq!(b, 0.0, "zero set must grow with the multiplier");
                }
            }
        }
    }

    #[test]
    fn soft_thresholding_never_raises_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in [16usize, 33, 100, 257] {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = dwt_decompose(&x, 3, WaveletKind::Db4).unwrap();
            let back = dwt_reconstruct(&threshold_details(&d, 1.0));
            let e_in: f64 = x.iter().map(|v| v * v).sum();
            let e_out: f64 = back.iter().map(|v| v * v).sum();
            assert!(e_out <= e_in * (1.0 + 1e-12), "n={n}: {e_out} > {e_in}");
        }
    }

    #[test]
    fn denoising_improves_a_noisy_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 128;
        let clean: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let mut wins = 0;
        for _ in 0..20 {
            let noisy: Vec<f64> = clean.iter().map(|&v| v + rng.gen_range(-0.15..0.15)).collect();
            let d = dwt_decompose(&noisy, 3, WaveletKind::Db4).unwrap();
            let den = dwt_reconstruct(&threshold_details(&d, 1.0));
            let err = |a: &[f64]| -> f64 {
                a.iter().zip(&clean).map(|(x, y)| (x - y).powi(2)).sum()
            };
            if err(&den) < err(&noisy) {
                wins += 1;
            }
        }
        assert!(wins >= 18, "denoising won only {wins}/20 trials");
    }

    #[test]
    fn contour_set_multiplier_zero_is_identity() {
        let set = synthetic_set(40);
        let out = denoise_contour_set(&set, 0.0, 3, WaveletKind::Db4).unwrap();
        for c in 0..CONTOUR_COUNT {
            let err = max_rel_err(set.contour(c), out.contour(c));
            assert!(err < 1e-9, "contour {c}: {err}");
        }
    }

    #[test]
    fn identical_contours_stay_identical() {
        let mut set = synthetic_set(40);
        let template = set.contour(0).to_vec();
        for c in set.energy_band_freq.iter_mut() {
            *c = template.clone();
        }
        for c in set.freq_band_energy.iter_mut() {
            *c = template.clone();
        }
        let out = denoise_contour_set(&set, 1.0, 3, WaveletKind::Db4).unwrap();
        for c in 1..CONTOUR_COUNT {
            assert_eq!(out.contour(c), out.contour(0));
        }
        assert_eq!(out.len(), set.len());
    }

    fn synthetic_set(len: usize) -> ContourSet {
        let mk = |phase: f64| -> Vec<f64> {
            (0..len).map(|i| ((i as f64 * 0.3) + phase).sin()).collect()
        };
        ContourSet {
            energy_band_freq: (0..6).map(|c| mk(c as f64)).collect(),
            freq_band_energy: (0..5).map(|c| mk(c as f64 + 6.0)).collect(),
            frames_per_phoneme: vec![len],
            f0_hz: 20_000.0,
            bin_width_hz: 1.0,
        }
    }

    #[test]
    fn noisy_contour_correlates_better_after_denoising() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let len = 120;
        let clean: Vec<f64> = (0..len).map(|i| (i as f64 * 0.1).sin() * 20.0).collect();
        let noisy: Vec<f64> = clean.iter().map(|&v| v + rng.gen_range(-4.0..4.0)).collect();
        let mut set = synthetic_set(len);
        set.energy_band_freq[0] = noisy.clone();
        let out = denoise_contour_set(&set, 1.0, 3, WaveletKind::Db4).unwrap();
        let before = crate::matching::pearson(&noisy, &clean).unwrap();
        let after = crate::matching::pearson(out.contour(0), &clean).unwrap();
        assert!(after >= before, "{after} < {before}");
    }
}
