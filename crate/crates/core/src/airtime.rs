//! Frame sizes and airtime of the HE sounding exchange.
//!
//! The SU exchange is `NDPA, SIFS, NDP, SIFS, feedback`. The MU exchange adds a
//! beamforming report poll trigger before the feedback, and the feedback is sent
//! by all stations at once on equal OFDMA resource units, so it lasts as long as
//! the slowest station's report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the total number of sounded streams in one exchange.
pub const MAX_STREAMS: usize = 8;

/// Upper bound on a TXOP data burst, in microseconds.
pub const MAX_TXOP_US: f64 = 5400.0;

/// Highest HE MCS index.
pub const MAX_MCS: u8 = (HE_MCS.len() - 1) as u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackType {
    Su,
    Mu,
}

impl std::fmt::Display for FeedbackType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            FeedbackType::Su => "SU",
            FeedbackType::Mu => "MU",
        })
    }
}

/// The one-bit codebook information subfield of the HE MIMO control field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Codebook {
    Zero,
    One,
}

impl TryFrom<u8> for Codebook {
    type Error = String;

    fn try_from(bit: u8) -> std::result::Result<Self, String> {
        match bit {
            0 => Ok(Codebook::Zero),
            1 => Ok(Codebook::One),
            other => Err(format!("codebook_info must be 0 or 1, got {other}")),
        }
    }
}

impl From<Codebook> for u8 {
    fn from(cb: Codebook) -> u8 {
        match cb {
            Codebook::Zero => 0,
            Codebook::One => 1,
        }
    }
}

impl std::fmt::Display for Codebook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyTiming {
    pub sifs_us: f64,
    pub legacy_preamble_us: f64,
    pub he_preamble_base_us: f64,
    pub he_ltf_symbol_us: f64,
    pub ofdm_symbol_us: f64,
    /// Non-HT rate used for NDPA and trigger frames.
    pub control_rate_mbps: f64,
}

impl Default for PhyTiming {
    fn default() -> Self {
        Self {
            sifs_us: 16.0,
            legacy_preamble_us: 20.0,
            he_preamble_base_us: 16.0,
            he_ltf_symbol_us: 8.0,
            ofdm_symbol_us: 13.6,
            control_rate_mbps: 24.0,
        }
    }
}

impl PhyTiming {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sifs_us", self.sifs_us),
            ("legacy_preamble_us", self.legacy_preamble_us),
            ("he_preamble_base_us", self.he_preamble_base_us),
            ("he_ltf_symbol_us", self.he_ltf_symbol_us),
            ("ofdm_symbol_us", self.ofdm_symbol_us),
            ("control_rate_mbps", self.control_rate_mbps),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("phy.{name} must be positive, got {value}")));
            }
        }
        if self.he_ltf_symbol_us > self.ofdm_symbol_us {
            return Err(Error::Config(
                "phy.he_ltf_symbol_us must not exceed phy.ofdm_symbol_us".into(),
            ));
        }
        Ok(())
    }
}

/// Byte and bit widths of the frames that make up a sounding exchange.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameFormat {
    pub ndpa_base_bytes: u32,
    pub ndpa_per_sta_bytes: u32,
    pub bfrp_base_bytes: u32,
    pub bfrp_per_sta_bytes: u32,
    /// MAC header, HE MIMO control and FCS around the compressed report.
    pub feedback_header_bytes: u32,
    /// Average SNR field, per stream.
    pub snr_bits: u32,
    /// Delta SNR of the MU exclusive report, per tone and stream.
    pub delta_snr_bits: u32,
}

impl Default for FrameFormat {
    fn default() -> Self {
        Self {
            ndpa_base_bytes: 21,
            ndpa_per_sta_bytes: 4,
            bfrp_base_bytes: 28,
            bfrp_per_sta_bytes: 5,
            feedback_header_bytes: 34,
            snr_bits: 8,
            delta_snr_bits: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoundingConfig {
    /// AP antennas.
    pub n_tx: usize,
    /// Antennas per station.
    pub n_rx: usize,
    pub n_sta: usize,
    pub n_ss_per_sta: usize,
    /// Subcarriers covered by the report.
    pub n_subcarriers: usize,
    /// Subcarrier grouping of the report.
    pub grouping: usize,
    #[serde(rename = "codebook_info")]
    pub codebook: Codebook,
    pub feedback_type: FeedbackType,
    pub ul_feedback_mcs: u8,
    pub txop_us: f64,
    pub frame: FrameFormat,
}

impl Default for SoundingConfig {
    fn default() -> Self {
        Self {
            n_tx: 8,
            n_rx: 1,
            n_sta: 1,
            n_ss_per_sta: 1,
            n_subcarriers: 242,
            grouping: 1,
            codebook: Codebook::Zero,
            feedback_type: FeedbackType::Su,
            ul_feedback_mcs: 0,
            txop_us: MAX_TXOP_US,
            frame: FrameFormat::default(),
        }
    }
}

impl SoundingConfig {
    /// Same configuration, sounding `n_sta` stations: SU feedback for one
    /// station, MU feedback otherwise.
    pub fn with_users(&self, n_sta: usize) -> Self {
        Self {
            n_sta,
            feedback_type: if n_sta == 1 { FeedbackType::Su } else { FeedbackType::Mu },
            ..self.clone()
        }
    }

    pub fn with_codebook(&self, codebook: Codebook) -> Self {
        Self { codebook, ..self.clone() }
    }

    /// Station dimensions `n_rx x n_rx` with one stream per receive antenna.
    pub fn with_sta_dims(&self, n_rx: usize) -> Self {
        Self { n_rx, n_ss_per_sta: n_rx, ..self.clone() }
    }

    pub fn total_streams(&self) -> usize {
        self.n_sta * self.n_ss_per_sta
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 || self.n_rx == 0 || self.n_sta == 0 || self.n_ss_per_sta == 0 {
            return Err(Error::Config(
                "n_tx, n_rx, n_sta and n_ss_per_sta must all be at least 1".into(),
            ));
        }
        if self.total_streams() > MAX_STREAMS {
            return Err(Error::TooManyStreams { total: self.total_streams(), max: MAX_STREAMS });
        }
        if self.total_streams() > self.n_tx {
            return Err(Error::Config(format!(
                "n_sta * n_ss_per_sta = {} exceeds n_tx = {}",
                self.total_streams(),
                self.n_tx
            )));
        }
        if self.n_ss_per_sta > self.n_rx {
            return Err(Error::Config(format!(
                "n_ss_per_sta = {} exceeds n_rx = {}",
                self.n_ss_per_sta, self.n_rx
            )));
        }
        if self.feedback_type == FeedbackType::Su && self.n_sta != 1 {
            return Err(Error::Config("SU feedback requires n_sta = 1".into()));
        }
        if self.grouping == 0 {
            return Err(Error::Config("grouping must be at least 1".into()));
        }
        if usize::from(self.ul_feedback_mcs) >= HE_MCS.len() {
            return Err(Error::Config(format!(
                "ul_feedback_mcs must be in 0..={}, got {}",
                HE_MCS.len() - 1,
                self.ul_feedback_mcs
            )));
        }
        if !(self.txop_us > 0.0 && self.txop_us <= MAX_TXOP_US) {
            return Err(Error::Config(format!(
                "txop_us must be in (0, {MAX_TXOP_US}], got {}",
                self.txop_us
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadBreakdown {
    pub ndpa_us: f64,
    pub ndp_us: f64,
    pub bfrp_us: f64,
    pub feedback_us: f64,
    pub sifs_total_us: f64,
    pub total_overhead_us: f64,
    pub overhead_ratio: f64,
}

/// Coded bits per subcarrier and code rate `(bpscs, num, den)` for HE MCS 0..=11.
const HE_MCS: [(u64, u64, u64); 12] = [
    (1, 1, 2),
    (2, 1, 2),
    (2, 3, 4),
    (4, 1, 2),
    (4, 3, 4),
    (6, 2, 3),
    (6, 3, 4),
    (6, 5, 6),
    (8, 3, 4),
    (8, 5, 6),
    (10, 3, 4),
    (10, 5, 6),
];

/// Number of `phi` and `psi` Givens angles describing an `n_rows x n_cols`
/// matrix with orthonormal columns.
pub fn givens_angle_count(n_rows: usize, n_cols: usize) -> Result<(usize, usize)> {
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::Dimension(format!("{n_rows}x{n_cols} has a zero dimension")));
    }
    if n_cols > n_rows {
        return Err(Error::Dimension(format!("{n_cols} columns exceed {n_rows} rows")));
    }
    let cols = n_cols.min(n_rows - 1);
    let n = cols * (2 * n_rows - cols - 1) / 2;
    Ok((n, n))
}

/// Quantization widths `(b_phi, b_psi)` of one angle.
pub fn angle_bit_widths(feedback_type: FeedbackType, codebook: Codebook) -> (u32, u32) {
    match (feedback_type, codebook) {
        (FeedbackType::Su, Codebook::Zero) => (4, 2),
        (FeedbackType::Su, Codebook::One) => (6, 4),
        (FeedbackType::Mu, Codebook::Zero) => (7, 5),
        (FeedbackType::Mu, Codebook::One) => (9, 7),
    }
}

/// Size in bits of one station's compressed beamforming report, including the
/// MU exclusive report for MU feedback but excluding MAC framing.
pub fn feedback_report_bits(cfg: &SoundingConfig) -> Result<u64> {
    let (n_phi, n_psi) = givens_angle_count(cfg.n_tx, cfg.n_ss_per_sta)?;
    let (b_phi, b_psi) = angle_bit_widths(cfg.feedback_type, cfg.codebook);
    let tones = cfg.n_subcarriers.div_ceil(cfg.grouping.max(1)) as u64;
    let n_ss = cfg.n_ss_per_sta as u64;
    let angles = tones * (n_phi as u64 * u64::from(b_phi) + n_psi as u64 * u64::from(b_psi));
    let snr = n_ss * u64::from(cfg.frame.snr_bits);
    let exclusive = match cfg.feedback_type {
        FeedbackType::Su => 0,
        FeedbackType::Mu => tones * n_ss * u64::from(cfg.frame.delta_snr_bits),
    };
    Ok(angles + snr + exclusive)
}

/// Data subcarriers of the resource unit each station gets for its report.
pub fn feedback_ru_tones(n_sta: usize) -> usize {
    match n_sta {
        0 | 1 => 234,
        2 => 102,
        3 | 4 => 48,
        _ => 24,
    }
}

fn data_bits_per_symbol(tones: usize, mcs: u8) -> (u64, u64) {
    let (bpscs, num, den) = HE_MCS[usize::from(mcs)];
    (tones as u64 * bpscs * num, den)
}

fn control_frame_us(bytes: u32, phy: &PhyTiming) -> f64 {
    phy.legacy_preamble_us + 8.0 * f64::from(bytes) / phy.control_rate_mbps
}

/// Airtime of one station's beamforming feedback PPDU.
pub fn feedback_ppdu_us(cfg: &SoundingConfig, phy: &PhyTiming) -> Result<f64> {
    let header_bits = 8 * u64::from(cfg.frame.feedback_header_bytes);
    let bits = feedback_report_bits(cfg)? + header_bits;
    let (num, den) = data_bits_per_symbol(feedback_ru_tones(cfg.n_sta), cfg.ul_feedback_mcs);
    let symbols = (bits * den).div_ceil(num);
    Ok(phy.legacy_preamble_us
        + phy.he_preamble_base_us
        + phy.he_ltf_symbol_us
        + symbols as f64 * phy.ofdm_symbol_us)
}

pub fn sounding_overhead(cfg: &SoundingConfig, phy: &PhyTiming) -> Result<OverheadBreakdown> {
    cfg.validate()?;
    phy.validate()?;
    let n_sta = cfg.n_sta as u32;
    let frame = &cfg.frame;

    let ndpa_us = control_frame_us(frame.ndpa_base_bytes + frame.ndpa_per_sta_bytes * n_sta, phy);
    let ndp_us = phy.legacy_preamble_us
        + phy.he_preamble_base_us
        + cfg.total_streams() as f64 * phy.he_ltf_symbol_us;
    let (bfrp_us, n_sifs) = match cfg.feedback_type {
        FeedbackType::Su => (0.0, 2.0),
        FeedbackType::Mu => (
            control_frame_us(frame.bfrp_base_bytes + frame.bfrp_per_sta_bytes * n_sta, phy),
            3.0,
        ),
    };
    // Every station reports the same dimensions on an equal RU, so one report
    // duration is the duration of the slowest.
    let feedback_us = feedback_ppdu_us(cfg, phy)?;
    let sifs_total_us = n_sifs * phy.sifs_us;

    let total_overhead_us = ndpa_us + ndp_us + bfrp_us + feedback_us + sifs_total_us;
    Ok(OverheadBreakdown {
        ndpa_us,
        ndp_us,
        bfrp_us,
        feedback_us,
        sifs_total_us,
        total_overhead_us,
        overhead_ratio: total_overhead_us / (total_overhead_us + cfg.txop_us),
    })
}

/// One row of the overhead table: a sounding exchange for `n_sta` stations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub n_sta: usize,
    pub feedback_type: FeedbackType,
    pub codebook: Codebook,
    pub report_bits: u64,
    pub ndpa_us: f64,
    pub ndp_us: f64,
    pub bfrp_us: f64,
    pub feedback_us: f64,
    pub sifs_total_us: f64,
    pub total_overhead_us: f64,
    pub overhead_ratio: f64,
}

/// Overhead of `cfg` sounding 1, 2, 4 and 8 stations, skipping user counts
/// whose streams do not fit the AP.
pub fn overhead_table(cfg: &SoundingConfig, phy: &PhyTiming) -> Result<Vec<OverheadRow>> {
    [1, 2, 4, 8]
        .into_iter()
        .map(|n| cfg.with_users(n))
        .filter(|c| c.total_streams() <= c.n_tx.min(MAX_STREAMS))
        .map(|c| {
            let b = sounding_overhead(&c, phy)?;
            Ok(OverheadRow {
                n_sta: c.n_sta,
                feedback_type: c.feedback_type,
                codebook: c.codebook,
                report_bits: feedback_report_bits(&c)?,
                ndpa_us: b.ndpa_us,
                ndp_us: b.ndp_us,
                bfrp_us: b.bfrp_us,
                feedback_us: b.feedback_us,
                sifs_total_us: b.sifs_total_us,
                total_overhead_us: b.total_overhead_us,
                overhead_ratio: b.overhead_ratio,
            })
        })
        .collect()
}

pub fn write_overhead_csv<W: std::io::Write>(rows: &[OverheadRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn su_8x1() -> SoundingConfig {
        SoundingConfig::default()
    }

    #[test]
    fn angle_counts() {
        assert_eq!(givens_angle_count(2, 1).unwrap(), (1, 1));
        assert_eq!(givens_angle_count(4, 2).unwrap(), (5, 5));
        assert_eq!(givens_angle_count(8, 1).unwrap(), (7, 7));
        assert_eq!(givens_angle_count(8, 4).unwrap(), (22, 22));
        // square: last column is implied by the others
        assert_eq!(givens_angle_count(4, 4).unwrap(), givens_angle_count(4, 3).unwrap());
        assert!(givens_angle_count(2, 3).is_err());
        assert!(givens_angle_count(0, 0).is_err());
        assert!(givens_angle_count(4, 0).is_err());
    }

    #[test]
    fn bit_widths() {
        assert_eq!(angle_bit_widths(FeedbackType::Su, Codebook::Zero), (4, 2));
        assert_eq!(angle_bit_widths(FeedbackType::Su, Codebook::One), (6, 4));
        assert_eq!(angle_bit_widths(FeedbackType::Mu, Codebook::Zero), (7, 5));
        assert_eq!(angle_bit_widths(FeedbackType::Mu, Codebook::One), (9, 7));
    }

    #[test]
    fn report_bits_su_and_mu() {
        // 242 * (7*4 + 7*2) + 8
        assert_eq!(feedback_report_bits(&su_8x1()).unwrap(), 10_172);
        let mu = SoundingConfig { feedback_type: FeedbackType::Mu, ..su_8x1() };
        // 242 * (7*7 + 7*5) + 8 + 242 * 1 * 4
        assert_eq!(feedback_report_bits(&mu).unwrap(), 21_304);
        let empty = SoundingConfig { n_subcarriers: 0, ..su_8x1() };
        assert_eq!(feedback_report_bits(&empty).unwrap(), 8);
        let empty_mu = SoundingConfig { n_subcarriers: 0, ..mu };
        assert_eq!(feedback_report_bits(&empty_mu).unwrap(), 8);
    }

    #[test]
    fn grouping_shrinks_report() {
        let g4 = SoundingConfig { grouping: 4, ..su_8x1() };
        assert_eq!(feedback_report_bits(&g4).unwrap(), 61 * 42 + 8);
    }

    #[test]
    fn breakdown_is_additive() {
        let cfg = SoundingConfig::default().with_users(4).with_codebook(Codebook::One);
        let b = sounding_overhead(&cfg, &PhyTiming::default()).unwrap();
        let sum = b.ndpa_us + b.ndp_us + b.bfrp_us + b.feedback_us + b.sifs_total_us;
        assert_eq!(b.total_overhead_us, sum);
        assert_eq!(b.overhead_ratio, b.total_overhead_us / (b.total_overhead_us + cfg.txop_us));
    }

    #[test]
    fn su_has_no_poll() {
        let b = sounding_overhead(&su_8x1(), &PhyTiming::default()).unwrap();
        assert_eq!(b.bfrp_us, 0.0);
        assert_eq!(b.sifs_total_us, 32.0);
    }

    #[test]
    fn su_default_breakdown_by_hand() {
        // NDPA 20 + 25*8/24; NDP 20 + 16 + 8; report 10172 + 272 header bits
        // at MCS0 on 234 tones = 117 bits/symbol -> 90 symbols.
        let b = sounding_overhead(&su_8x1(), &PhyTiming::default()).unwrap();
        assert!((b.ndpa_us - (20.0 + 200.0 / 24.0)).abs() < 1e-12);
        assert_eq!(b.ndp_us, 44.0);
        assert!((b.feedback_us - (20.0 + 16.0 + 8.0 + 90.0 * 13.6)).abs() < 1e-9);
    }

    #[test]
    fn mu_costs_more_than_su_for_one_station() {
        let phy = PhyTiming::default();
        let su = sounding_overhead(&su_8x1(), &phy).unwrap();
        let mu_cfg = SoundingConfig { feedback_type: FeedbackType::Mu, ..su_8x1() };
        let mu = sounding_overhead(&mu_cfg, &phy).unwrap();
        assert!(mu.total_overhead_us > su.total_overhead_us);
    }

    #[test]
    fn long_txop_drives_ratio_to_zero() {
        let phy = PhyTiming::default();
        let mut last = 1.0;
        for txop in [10.0, 100.0, 1000.0, 5400.0] {
            let cfg = SoundingConfig { txop_us: txop, ..su_8x1() };
            let ratio = sounding_overhead(&cfg, &phy).unwrap().overhead_ratio;
            assert!(ratio < last);
            last = ratio;
        }
        let b = sounding_overhead(&su_8x1(), &phy).unwrap();
        let limit = b.total_overhead_us / (b.total_overhead_us + 1e12);
        assert!(limit < 1e-8);
    }

    #[test]
    fn overhead_grows_faster_than_linearly_in_users() {
        // 8x8 AP, 1x1 stations, codebook 1, at the default UL MCS.
        let base = SoundingConfig::default().with_codebook(Codebook::One);
        let phy = PhyTiming::default();
        let ratios: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&n| sounding_overhead(&base.with_users(n), &phy).unwrap().overhead_ratio)
            .collect();
        for w in ratios.windows(2) {
            assert!(w[1] > w[0], "{ratios:?}");
        }
        let totals: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&n| sounding_overhead(&base.with_users(n), &phy).unwrap().total_overhead_us)
            .collect();
        for w in totals.windows(3) {
            assert!(w[2] - w[1] > w[1] - w[0], "{totals:?}");
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let phy = PhyTiming::default();
        let too_many = SoundingConfig::default().with_sta_dims(2).with_users(5);
        assert!(matches!(
            sounding_overhead(&too_many, &phy),
            Err(Error::TooManyStreams { total: 10, max: 8 })
        ));
        let su_multi = SoundingConfig { n_sta: 2, ..su_8x1() };
        assert!(sounding_overhead(&su_multi, &phy).is_err());
        let long_txop = SoundingConfig { txop_us: 6000.0, ..su_8x1() };
        assert!(sounding_overhead(&long_txop, &phy).is_err());
        let bad_mcs = SoundingConfig { ul_feedback_mcs: 12, ..su_8x1() };
        assert!(sounding_overhead(&bad_mcs, &phy).is_err());
        let bad_phy = PhyTiming { he_ltf_symbol_us: 20.0, ..PhyTiming::default() };
        assert!(sounding_overhead(&su_8x1(), &bad_phy).is_err());
        assert!(Codebook::try_from(2).is_err());
    }
}
