//! Shannon capacity of SU and MU beamformed links and the effective capacity
//! once sounding airtime is discounted.
//!
//! Powers are split equally: the whole budget over one station's streams for
//! SU, `1/K` per station then equally over its streams for MU. Inter-user
//! interference is treated as noise and receive processing is implicit in the
//! log-det form.

use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::airtime::{sounding_overhead, Codebook, PhyTiming, SoundingConfig, MAX_STREAMS};
use crate::error::{Error, Result};
use crate::linalg::{log2_det_hpd, CMatrix};
use crate::precoding::SteeringMatrix;
use crate::seed::child_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self { tx_power_dbm: 20.0, noise_psd_dbm_hz: -174.0, bandwidth_hz: 20e6 }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config(format!(
                "link.bandwidth_hz must be positive, got {}",
                self.bandwidth_hz
            )));
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::Config("link power and noise density must be finite".into()));
        }
        Ok(())
    }

    pub fn noise_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    /// Full-power receive SNR per unit channel gain after `pathloss_db`.
    pub fn snr(&self, pathloss_db: f64) -> f64 {
        10f64.powf((self.tx_power_dbm - pathloss_db - self.noise_dbm()) / 10.0)
    }
}

/// One station's view of an MU transmission.
#[derive(Clone, Copy, Debug)]
pub struct MuUser<'a> {
    /// `n_rx x n_tx` channel per evaluated tone.
    pub channel: &'a [CMatrix],
    pub steering: &'a SteeringMatrix,
    pub pathloss_db: f64,
}

fn check_dims(channel: &[CMatrix], steering: &SteeringMatrix) -> Result<()> {
    if channel.is_empty() || channel.len() != steering.tones.len() {
        return Err(Error::Dimension(format!(
            "{} channel tones vs {} steering tones",
            channel.len(),
            steering.tones.len()
        )));
    }
    let n_tx = channel[0].ncols();
    if channel.iter().any(|h| h.ncols() != n_tx)
        || steering.tones.iter().any(|v| v.nrows() != n_tx || v.ncols() == 0)
    {
        return Err(Error::Dimension(format!(
            "steering rows must match the {n_tx} transmit antennas"
        )));
    }
    Ok(())
}

fn hermitian_gram(m: &CMatrix) -> CMatrix {
    m * m.adjoint()
}

fn log2_det(a: &CMatrix) -> f64 {
    log2_det_hpd(a).expect("identity plus a Gram matrix is positive definite")
}

/// SU capacity in bit/s of `channel` steered by `steering` at full power.
pub fn su_capacity(
    channel: &[CMatrix],
    steering: &SteeringMatrix,
    budget: &LinkBudget,
    pathloss_db: f64,
) -> Result<f64> {
    check_dims(channel, steering)?;
    let n_ss = steering.n_cols() as f64;
    let rho = Complex64::new(budget.snr(pathloss_db) / n_ss, 0.0);
    let per_tone: Vec<f64> = channel
        .iter()
        .zip(&steering.tones)
        .map(|(h, v)| {
            let g = h * v;
            let n_rx = h.nrows();
            log2_det(&(CMatrix::identity(n_rx, n_rx) + hermitian_gram(&g) * rho))
        })
        .collect();
    Ok(budget.bandwidth_hz * pairwise_sum(&per_tone) / per_tone.len() as f64)
}

/// Per-station MU capacities in bit/s.
pub fn mu_capacity(users: &[MuUser<'_>], budget: &LinkBudget) -> Result<Vec<f64>> {
    if users.is_empty() {
        return Err(Error::Dimension("MU transmission needs at least one user".into()));
    }
    for u in users {
        check_dims(u.channel, u.steering)?;
    }
    let n_tones = users[0].channel.len();
    let n_tx = users[0].channel[0].ncols();
    if users.iter().any(|u| u.channel.len() != n_tones || u.channel[0].ncols() != n_tx) {
        return Err(Error::Dimension("users disagree on tones or transmit antennas".into()));
    }
    let total_streams: usize = users.iter().map(|u| u.steering.n_cols()).sum();
    if total_streams > n_tx {
        return Err(Error::TooManyStreams { total: total_streams, max: n_tx });
    }

    let k_users = users.len() as f64;
    // Power fraction of each of user j's streams.
    let stream_share: Vec<f64> =
        users.iter().map(|u| 1.0 / (k_users * u.steering.n_cols() as f64)).collect();

    users
        .iter()
        .map(|me| {
            let rho = budget.snr(me.pathloss_db);
            let per_tone: Vec<f64> = (0..n_tones)
                .map(|f| {
                    let h = &me.channel[f];
                    let n_rx = h.nrows();
                    let mut interference = CMatrix::identity(n_rx, n_rx);
                    let mut wanted = CMatrix::zeros(n_rx, n_rx);
                    for (j, other) in users.iter().enumerate() {
                        let g = h * &other.steering.tones[f];
                        let cov = hermitian_gram(&g) * Complex64::new(rho * stream_share[j], 0.0);
                        if std::ptr::eq(other, me) {
                            wanted = cov;
                        } else {
                            interference += cov;
                        }
                    }
                    log2_det(&(&interference + wanted)) - log2_det(&interference)
                })
                .collect();
            Ok(budget.bandwidth_hz * pairwise_sum(&per_tone) / n_tones as f64)
        })
        .collect()
}

/// Zero-forcing precoders computed from full channel knowledge: each user's
/// `n_ss` strongest receive directions are nulled at every other user. Used
/// only as an interference-free reference, never by the decision engine.
pub fn zero_forcing_steering(channels: &[&[CMatrix]], n_ss: &[usize]) -> Result<Vec<SteeringMatrix>> {
    if channels.is_empty() || channels.len() != n_ss.len() {
        return Err(Error::Dimension("one stream count per user is required".into()));
    }
    let n_tones = channels[0].len();
    let n_tx = channels[0].first().map_or(0, |h| h.ncols());
    let total: usize = n_ss.iter().sum();
    if total > n_tx {
        return Err(Error::TooManyStreams { total, max: n_tx });
    }
    let mut out: Vec<Vec<CMatrix>> = vec![Vec::with_capacity(n_tones); channels.len()];
    for f in 0..n_tones {
        let mut rows = CMatrix::zeros(total, n_tx);
        let mut at = 0;
        for (h, &s) in channels.iter().zip(n_ss) {
            let svd = h[f].clone().svd(true, false);
            let u = svd.u.expect("left singular vectors were requested");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            for (i, &idx) in order.iter().take(s).enumerate() {
                let eff = u.column(idx).adjoint() * &h[f];
                rows.row_mut(at + i).copy_from(&eff);
            }
            at += s;
        }
        let gram = &rows * rows.adjoint();
        let inv = gram
            .try_inverse()
            .ok_or(Error::RankDeficient { rank: 0, requested: total })?;
        let mut w = rows.adjoint() * inv;
        for c in 0..w.ncols() {
            let norm = w.column(c).norm();
            w.column_mut(c).unscale_mut(norm);
        }
        let mut at = 0;
        for (k, &s) in n_ss.iter().enumerate() {
            out[k].push(w.columns(at, s).into_owned());
            at += s;
        }
    }
    Ok(out.into_iter().map(SteeringMatrix::new).collect())
}

/// Sum of `values` by recursive halving, fixed association order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// `(1/N) * sum_n sum_k (1 - O) * C[n][k]` over `N` cycles.
pub fn effective_capacity(per_cycle: &[Vec<f64>], overhead_ratio: f64) -> Result<f64> {
    if per_cycle.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(0.0..1.0).contains(&overhead_ratio) {
        return Err(Error::Config(format!("overhead ratio must be in [0, 1), got {overhead_ratio}")));
    }
    let sums: Vec<f64> = per_cycle.iter().map(|c| pairwise_sum(c)).collect();
    Ok((1.0 - overhead_ratio) * pairwise_sum(&sums) / per_cycle.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityTrace {
    pub n_cycles: usize,
    /// `capacities[cycle][sta]`, bit/s.
    pub capacities: Vec<Vec<f64>>,
    pub overhead_ratio: f64,
    pub effective_capacity: f64,
}

#[derive(Debug, Serialize)]
struct TraceRow<'a> {
    scenario_id: &'a str,
    cycle: usize,
    sta: usize,
    capacity_bps: f64,
    overhead_ratio: f64,
    effective_capacity_bps: f64,
}

impl CapacityTrace {
    pub fn new(capacities: Vec<Vec<f64>>, overhead_ratio: f64) -> Result<Self> {
        let effective_capacity = effective_capacity(&capacities, overhead_ratio)?;
        Ok(Self { n_cycles: capacities.len(), capacities, overhead_ratio, effective_capacity })
    }

    /// Mean over cycles of the per-cycle capacity summed over stations.
    pub fn mean_aggregate(&self) -> f64 {
        let sums: Vec<f64> = self.capacities.iter().map(|c| pairwise_sum(c)).collect();
        pairwise_sum(&sums) / self.n_cycles as f64
    }

    /// Appends one CSV row per (cycle, station) to `w`.
    pub fn write_rows<W: Write>(&self, scenario_id: &str, w: &mut csv::Writer<W>) -> Result<()> {
        for (cycle, row) in self.capacities.iter().enumerate() {
            for (sta, &capacity_bps) in row.iter().enumerate() {
                w.serialize(TraceRow {
                    scenario_id,
                    cycle,
                    sta,
                    capacity_bps,
                    overhead_ratio: self.overhead_ratio,
                    effective_capacity_bps: self.effective_capacity,
                })?;
            }
        }
        Ok(())
    }
}

/// Settings of the interference-free overhead study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdealizedMode {
    /// SNR of a single full-power stream.
    pub reference_snr_db: f64,
    pub n_cycles: usize,
    /// Draw unit-mean exponential power fading per cycle, station and stream.
    pub fading: bool,
}

impl Default for IdealizedMode {
    fn default() -> Self {
        Self { reference_snr_db: 25.0, n_cycles: 200, fading: true }
    }
}

/// Effective capacity when inter-user interference is ignored: each of the
/// `n_sta` stations gets `1/n_sta` of the power, split over its streams, and
/// the sounding overhead of `cfg` sized for `n_sta` stations is charged.
pub fn idealized_overhead_mode(
    cfg: &SoundingConfig,
    phy: &PhyTiming,
    budget: &LinkBudget,
    n_sta: usize,
    mode: &IdealizedMode,
    seed: u64,
) -> Result<CapacityTrace> {
    if ![1, 2, 4, 8].contains(&n_sta) {
        return Err(Error::Config(format!("n_sta must be one of 1, 2, 4, 8; got {n_sta}")));
    }
    if mode.n_cycles == 0 {
        return Err(Error::EmptyTrace);
    }
    budget.validate()?;
    let sounding = cfg.with_users(n_sta);
    let overhead = sounding_overhead(&sounding, phy)?;
    let n_ss = sounding.n_ss_per_sta;
    let snr = 10f64.powf(mode.reference_snr_db / 10.0) / (n_sta * n_ss) as f64;

    let capacities = (0..mode.n_cycles)
        .map(|cycle| {
            (0..n_sta)
                .map(|sta| {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(child_seed(seed, &[cycle as u64, sta as u64]));
                    let per_stream: Vec<f64> = (0..n_ss)
                        .map(|_| {
                            let gain: f64 = if mode.fading { Exp1.sample(&mut rng) } else { 1.0 };
                            (1.0 + snr * gain).log2()
                        })
                        .collect();
                    budget.bandwidth_hz * pairwise_sum(&per_stream)
                })
                .collect()
        })
        .collect();
    CapacityTrace::new(capacities, overhead.overhead_ratio)
}

/// Summary of one idealized configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealizedPoint {
    pub scenario_id: String,
    pub n_sta: usize,
    pub sta_dims: usize,
    pub codebook: Codebook,
    pub overhead_ratio: f64,
    pub mean_capacity_bps: f64,
    pub effective_capacity_bps: f64,
}

/// Idealized mode for every user count in 1, 2, 4, 8 whose streams fit the AP,
/// under each codebook. All points share the fading draws of `seed`.
pub fn idealized_study(
    cfg: &SoundingConfig,
    phy: &PhyTiming,
    budget: &LinkBudget,
    mode: &IdealizedMode,
    codebooks: &[Codebook],
    seed: u64,
) -> Result<Vec<(IdealizedPoint, CapacityTrace)>> {
    let mut out = Vec::new();
    for &codebook in codebooks {
        let cb = cfg.with_codebook(codebook);
        for n_sta in [1, 2, 4, 8] {
            if n_sta * cb.n_ss_per_sta > cb.n_tx.min(MAX_STREAMS) {
                continue;
            }
            let trace = idealized_overhead_mode(&cb, phy, budget, n_sta, mode, seed)?;
            let point = IdealizedPoint {
                scenario_id: format!("{0}x{0}/cb{codebook}/n{n_sta}", cb.n_rx),
                n_sta,
                sta_dims: cb.n_rx,
                codebook,
                overhead_ratio: trace.overhead_ratio,
                mean_capacity_bps: trace.mean_aggregate(),
                effective_capacity_bps: trace.effective_capacity,
            };
            out.push((point, trace));
        }
    }
    Ok(out)
}

/// Per-cycle rows of every trace under a single header.
pub fn write_capacity_csv<W: Write>(study: &[(IdealizedPoint, CapacityTrace)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (p, t) in study {
        t.write_rows(&p.scenario_id, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_idealized_summary_csv<W: Write>(
    study: &[(IdealizedPoint, CapacityTrace)],
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (p, _) in study {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
