//! Run configuration read from TOML. Every section is optional and falls back
//! to the defaults of its model; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::airtime::{PhyTiming, SoundingConfig, MAX_MCS};
use crate::capacity::{IdealizedMode, LinkBudget};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::scenarios::{DistanceSweep, GuidelineSettings, Precoder, SeparationSweep, Simulation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    /// Fading cycles per scenario point.
    pub n_cycles: usize,
    pub out: PathBuf,
    pub precoder: Precoder,
    pub sounding: SoundingConfig,
    pub phy: PhyTiming,
    pub link: LinkBudget,
    pub channel: ChannelModel,
    pub idealized: IdealizedMode,
    pub separation: SeparationSweep,
    pub distance: DistanceSweep,
    pub guideline: GuidelineSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 0,
            n_cycles: 200,
            out: PathBuf::from("out"),
            precoder: Precoder::default(),
            sounding: SoundingConfig::default(),
            phy: PhyTiming::default(),
            link: LinkBudget::default(),
            channel: ChannelModel::default(),
            idealized: IdealizedMode::default(),
            separation: SeparationSweep::default(),
            distance: DistanceSweep::default(),
            guideline: GuidelineSettings::default(),
        }
    }
}

/// Every accepted key with its default, shown by `--help`.
pub const CONFIG_KEYS: &str = "\
CONFIG KEYS (TOML; every key optional)
  seed = 1                              master seed
  workers = 0                           worker threads, 0 = one per core
  n_cycles = 200                        fading cycles per scenario point
  out = \"out\"                           output directory
  precoder = \"stacked_feedback\"         or \"zero_forcing\" (full-CSI reference)
[sounding]
  n_tx = 8                              AP antennas
  n_rx = 1                              antennas per station
  n_sta = 1                             stations sounded
  n_ss_per_sta = 1                      streams per station
  n_subcarriers = 242                   tones covered by the report
  grouping = 1                          subcarrier grouping Ng
  codebook_info = 0                     0 or 1, selects the angle bit widths
  feedback_type = \"su\"                  \"su\" or \"mu\"
  ul_feedback_mcs = 0                   HE MCS of the feedback PPDU, 0..=11
  txop_us = 5400                        data TXOP following each sounding
[sounding.frame]
  ndpa_base_bytes = 21, ndpa_per_sta_bytes = 4
  bfrp_base_bytes = 28, bfrp_per_sta_bytes = 5
  feedback_header_bytes = 34            MAC header, HE MIMO control, FCS
  snr_bits = 8                          average SNR per stream
  delta_snr_bits = 4                    MU delta SNR per grouped tone and stream
[phy]
  sifs_us = 16, legacy_preamble_us = 20, he_preamble_base_us = 16
  he_ltf_symbol_us = 8, ofdm_symbol_us = 13.6
  control_rate_mbps = 24                non-HT rate of NDPA and BFRP
[link]
  tx_power_dbm = 20, noise_psd_dbm_hz = -174, bandwidth_hz = 20e6
[channel]
  n_tx = 8                              AP antennas
  k_factor_db = 3                       Rician K of the first LoS tap
  rx_angular_spread_deg = 30            station-side rms spread
[channel.clusters]
  tap_delays_ns, tap_powers_db, cluster_of_tap   per-tap lists of equal length
  clusters = [{ anchor_sta, aod_offset_deg, angular_spread_deg }, ...]
                                        anchor_sta omitted = station being drawn
[channel.pathloss]
  intercept_db = 92, breakpoint_m = 10, far_slope_db = 35
[channel.tones]
  spacing_hz = 78125, decimation = 8    evaluate every 8th data tone
[idealized]
  reference_snr_db = 25                 SNR of one full-power stream
  n_cycles = 200, fading = true
[separation]
  distance_m = 8, step_deg = 2, max_separation_deg = 180
  reference_aod_deg = 0, sta_dims = 1, codebook = 0
[distance]
  distances_m = [10, 20, 30, 40, 50, 60], n_separations = 60
  reference_aod_deg = 0, sta_dims = 1, codebook = 0
[guideline]
  los_distance_m = 8
  near_aods_deg = [0, 4, 8, 12]         L-near station AoDs
  far_aods_deg = [0, 19.47, 41.81, 90]  L-far station AoDs
  nlos_aods_deg = [0, 40, 80, 120]      AoDs of every NLoS row
  small_distance_m = 10, large_distance_m = 30
  ul_feedback_mcs = 11                  omit to use sounding.ul_feedback_mcs
  user_selection = true                 MU serves the best subset of >= 2 stations
";

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(describe(text, &e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cycles == 0 {
            return Err(Error::Config("n_cycles must be at least 1".into()));
        }
        let within = |section: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Config(m) if !m.starts_with(section) => Error::Config(format!("{section}: {m}")),
                other => other,
            })
        };
        within("sounding", self.sounding.validate())?;
        self.phy.validate()?;
        self.link.validate()?;
        within("channel.clusters", self.channel.clusters.validate())?;
        if self.channel.n_tx != self.sounding.n_tx {
            return Err(Error::Config(format!(
                "channel.n_tx = {} differs from sounding.n_tx = {}",
                self.channel.n_tx, self.sounding.n_tx
            )));
        }
        if let Some(mcs) = self.guideline.ul_feedback_mcs.filter(|&m| m > MAX_MCS) {
            return Err(Error::Config(format!(
                "guideline.ul_feedback_mcs must be in 0..={MAX_MCS}, got {mcs}"
            )));
        }
        within("guideline", self.guideline.validate())
    }

    pub fn simulation(&self) -> Simulation {
        Simulation {
            channel: self.channel.clone(),
            link: self.link.clone(),
            sounding: self.sounding.clone(),
            phy: self.phy.clone(),
            precoder: self.precoder,
        }
    }
}

/// One-line diagnostic naming the offending key.
fn describe(text: &str, err: &toml::de::Error) -> String {
    let msg = err.message().trim().replace('\n', " ");
    let Some(span) = err.span() else {
        return msg;
    };
    let before = &text[..span.start.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[line_start..].find('\n').map_or(text.len(), |i| line_start + i);
    let line = &text[line_start..line_end];
    let line_no = before.matches('\n').count() + 1;
    let section = before[..line_start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').trim());
    let key = match line.split_once('=') {
        Some((k, _)) => k.trim(),
        None => line.trim().trim_matches(|c| c == '[' || c == ']').trim(),
    };
    let path = match section {
        Some(s) if !line.trim_start().starts_with('[') => format!("{s}.{key}"),
        _ => key.to_string(),
    };
    format!("key `{path}` (line {line_no}): {msg}")
}
