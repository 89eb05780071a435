//! Run configuration with layered precedence: built-in defaults, then a
//! TOML config file, then command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::wavelet::WaveletKind;

/// Which contours contribute to the similarity score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    /// The 6 energy-band frequency contours.
    #[serde(rename = "energy")]
    EnergyOnly,
    /// The 5 frequency-band energy contours.
    #[serde(rename = "frequency")]
    FrequencyOnly,
    /// All 11 contours.
    #[serde(rename = "combined")]
    Combined,
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(FeatureMode::EnergyOnly),
            "frequency" => Ok(FeatureMode::FrequencyOnly),
            "combined" => Ok(FeatureMode::Combined),
            other => Err(Error::Config(format!(
                "unknown feature mode '{other}' (energy|frequency|combined)"
            ))),
        }
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FeatureMode::EnergyOnly => "energy",
            FeatureMode::FrequencyOnly => "frequency",
            FeatureMode::Combined => "combined",
        };
        write!(f, "{s}")
    }
}

/// Every tunable of the pipeline. Defaults defer to the values the feature
/// definitions are calibrated for.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub sample_rate: f64,
    pub probe_f0: f64,
    pub stft_window_s: f64,
    pub stft_hop_s: f64,
    pub stft_bin_width_hz: f64,
    /// Normalized-energy level ranges (lowest first).
    pub energy_levels: [(f64, f64); 3],
    /// Doppler-offset band edges in Hz, fb1..fb5.
    pub freq_bands_hz: [(f64, f64); 5],
    pub carrier_exclusion_hz: f64,
    pub wavelet: String,
    pub wavelet_multiplier: f64,
    pub doppler_factor_k: f64,
    pub feature_mode: FeatureMode,
    pub threshold: f64,
    pub profile_store: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fp = FeatureParams::default();
        Self {
            sample_rate: 48_000.0,
            probe_f0: fp.f0_hz,
            stft_window_s: 0.25,
            stft_hop_s: 0.01,
            stft_bin_width_hz: 1.0,
            energy_levels: fp.energy_levels,
            freq_bands_hz: fp.freq_bands_hz,
            carrier_exclusion_hz: fp.carrier_exclusion_hz,
            wavelet: "db4".to_string(),
            wavelet_multiplier: 1.0,
            doppler_factor_k: 1.0,
            feature_mode: FeatureMode::Combined,
            threshold: 0.95,
            profile_store: PathBuf::from("profiles"),
            seed: 0,
        }
    }
}

/// File layer: every key optional, unknown keys rejected.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    pub sample_rate: Option<f64>,
    pub probe_f0: Option<f64>,
    pub stft_window_s: Option<f64>,
    pub stft_hop_s: Option<f64>,
    pub stft_bin_width_hz: Option<f64>,
    pub energy_levels: Option<[(f64, f64); 3]>,
    pub freq_bands_hz: Option<[(f64, f64); 5]>,
    pub carrier_exclusion_hz: Option<f64>,
    pub wavelet: Option<String>,
    pub wavelet_multiplier: Option<f64>,
    pub doppler_factor_k: Option<f64>,
    pub feature_mode: Option<FeatureMode>,
    pub threshold: Option<f64>,
    pub profile_store: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ConfigOverlay {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

impl RunConfig {
    /// Apply an overlay in place; set fields win.
    pub fn apply(&mut self, overlay: &ConfigOverlay) {
        macro_rules! take {
            ($($field:ident),+) => {
                $(if let Some(v) = &overlay.$field { self.$field = v.clone(); })+
            };
        }
        take!(
            sample_rate,
            probe_f0,
            stft_window_s,
            stft_hop_s,
            stft_bin_width_hz,
            energy_levels,
            freq_bands_hz,
            carrier_exclusion_hz,
            wavelet,
            wavelet_multiplier,
            doppler_factor_k,
            feature_mode,
            threshold,
            profile_store,
            seed
        );
    }

    /// Resolve precedence: defaults, then the optional file, then flags.
    pub fn resolve(file: Option<&ConfigOverlay>, flags: &ConfigOverlay) -> RunConfig {
        let mut cfg = RunConfig::default();
        if let Some(f) = file {
            cfg.apply(f);
        }
        cfg.apply(flags);
        cfg
    }

    pub fn feature_params(&self) -> FeatureParams {
        let half_band = self
            .freq_bands_hz
            .iter()
            .flat_map(|&(lo, hi)| [lo.abs(), hi.abs()])
            .fold(0.0, f64::max);
        FeatureParams {
            f0_hz: self.probe_f0,
            half_band_hz: half_band,
            carrier_exclusion_hz: self.carrier_exclusion_hz,
            energy_levels: self.energy_levels,
            freq_bands_hz: self.freq_bands_hz,
        }
    }

    pub fn wavelet_kind(&self) -> Result<WaveletKind> {
        WaveletKind::from_name(&self.wavelet)
    }
}
