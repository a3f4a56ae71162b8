//! Clustered indoor MIMO channel: tapped delay line with Kronecker spatial
//! correlation per tap, Rician first tap in line of sight, and a dual-slope
//! path loss with a breakpoint separating LoS from NLoS.
//!
//! Small-scale fading is normalized to unit mean power per antenna pair; path
//! loss is carried alongside each station's channel and applied by the
//! capacity code.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_sqrt, CMatrix, CVector};
use crate::seed::child_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Los,
    Nlos,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Los => "los",
            Regime::Nlos => "nlos",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaGeometry {
    pub distance_m: f64,
    pub los_aod_deg: f64,
    pub n_rx: usize,
}

impl StaGeometry {
    pub fn new(distance_m: f64, los_aod_deg: f64, n_rx: usize) -> Self {
        Self { distance_m, los_aod_deg, n_rx }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m.is_finite() && self.distance_m > 0.0) {
            return Err(Error::Config(format!("distance must be positive, got {}", self.distance_m)));
        }
        if !(0.0..=180.0).contains(&self.los_aod_deg) {
            return Err(Error::Config(format!(
                "LoS AoD must be in [0, 180] degrees, got {}",
                self.los_aod_deg
            )));
        }
        if self.n_rx == 0 {
            return Err(Error::Config("station needs at least one antenna".into()));
        }
        Ok(())
    }
}

/// Angular placement of one scattering cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterAngles {
    /// Station whose LoS AoD anchors the cluster's mean AoD; `None` anchors it
    /// to the station being drawn.
    #[serde(default)]
    pub anchor_sta: Option<usize>,
    #[serde(default)]
    pub aod_offset_deg: f64,
    pub angular_spread_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParam {
    pub tap_delays_ns: Vec<f64>,
    pub tap_powers_db: Vec<f64>,
    pub cluster_of_tap: Vec<usize>,
    pub clusters: Vec<ClusterAngles>,
}

impl ClusterParam {
    /// `n_clusters` clusters of `taps_per_cluster` taps, spaced `spacing_ns`
    /// apart and decaying `decay_db` per tap; cluster `c` is shifted by `2c`
    /// tap slots in both delay and power. Every cluster is centred on the LoS
    /// AoD of the station being drawn.
    pub fn exponential(
        n_clusters: usize,
        taps_per_cluster: usize,
        spacing_ns: f64,
        decay_db: f64,
        angular_spread_deg: f64,
    ) -> Self {
        let mut tap_delays_ns = Vec::new();
        let mut tap_powers_db = Vec::new();
        let mut cluster_of_tap = Vec::new();
        for c in 0..n_clusters {
            for t in 0..taps_per_cluster {
                let slot = (c * 2 + t) as f64;
                tap_delays_ns.push(slot * spacing_ns);
                tap_powers_db.push(-(slot * decay_db));
                cluster_of_tap.push(c);
            }
        }
        let clusters = (0..n_clusters)
            .map(|_| ClusterAngles { anchor_sta: None, aod_offset_deg: 0.0, angular_spread_deg })
            .collect();
        Self { tap_delays_ns, tap_powers_db, cluster_of_tap, clusters }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.tap_delays_ns.len();
        if n == 0 || self.tap_powers_db.len() != n || self.cluster_of_tap.len() != n {
            return Err(Error::Config(
                "tap_delays_ns, tap_powers_db and cluster_of_tap must be non-empty and equally long"
                    .into(),
            ));
        }
        if let Some(&c) = self.cluster_of_tap.iter().find(|&&c| c >= self.clusters.len()) {
            return Err(Error::Config(format!("tap assigned to undefined cluster {c}")));
        }
        if let Some(c) = self.clusters.iter().find(|c| !(c.angular_spread_deg > 0.0)) {
            return Err(Error::Config(format!(
                "angular spread must be positive, got {}",
                c.angular_spread_deg
            )));
        }
        Ok(())
    }

    /// Linear tap powers normalized to unit sum.
    pub fn linear_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.tap_powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.iter().map(|p| p / total).collect()
    }
}

impl Default for ClusterParam {
    fn default() -> Self {
        Self::exponential(2, 9, 10.0, 3.0, 30.0)
    }
}

/// Dual-slope path loss: `intercept + 20 log10(d)` up to the breakpoint, plus
/// `far_slope_db * log10(d / d_bp)` beyond it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLoss {
    /// Loss at 1 m.
    pub intercept_db: f64,
    pub breakpoint_m: f64,
    pub far_slope_db: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self { intercept_db: 92.0, breakpoint_m: 10.0, far_slope_db: 35.0 }
    }
}

impl PathLoss {
    pub fn loss_db(&self, distance_m: f64) -> Result<f64> {
        pathloss_db(distance_m, self.breakpoint_m, self.intercept_db, self.far_slope_db)
    }
}

pub fn pathloss_db(distance_m: f64, breakpoint_m: f64, intercept_db: f64, far_slope_db: f64) -> Result<f64> {
    if !(distance_m > 0.0 && breakpoint_m > 0.0) {
        return Err(Error::Config(format!(
            "distance ({distance_m}) and breakpoint ({breakpoint_m}) must be positive"
        )));
    }
    let near = intercept_db + 20.0 * distance_m.min(breakpoint_m).log10();
    let far = if distance_m > breakpoint_m {
        far_slope_db * (distance_m / breakpoint_m).log10()
    } else {
        0.0
    };
    Ok(near + far)
}

/// Half-wavelength ULA response, element `m` = `exp(i pi m sin(angle))`.
pub fn ula_steering(n_ant: usize, angle_deg: f64) -> CVector {
    let s = angle_deg.to_radians().sin();
    CVector::from_fn(n_ant, |m, _| Complex64::from_polar(1.0, PI * m as f64 * s))
}

fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, intervals: usize) -> Complex64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * w;
    }
    acc * (h / 3.0)
}

/// Spatial correlation of a half-wavelength ULA under a Laplacian power
/// angular spectrum centered on `mean_angle_deg` with rms spread
/// `angular_spread_deg`, truncated to +-180 degrees.
pub fn correlation_matrix(n_ant: usize, mean_angle_deg: f64, angular_spread_deg: f64) -> Result<CMatrix> {
    if !(angular_spread_deg > 0.0 && angular_spread_deg.is_finite()) {
        return Err(Error::Config(format!(
            "angular spread must be positive and finite, got {angular_spread_deg}"
        )));
    }
    let mean = mean_angle_deg.to_radians();
    let sigma = angular_spread_deg.to_radians();
    let reach = (30.0 * sigma).min(PI);
    let pas = |phi: f64| (-SQRT_2 * phi.abs() / sigma).exp();
    const INTERVALS: usize = 2048;

    let integrate = |f: &dyn Fn(f64) -> Complex64| {
        simpson(f, -reach, 0.0, INTERVALS) + simpson(f, 0.0, reach, INTERVALS)
    };
    let norm = integrate(&|phi| Complex64::new(pas(phi), 0.0)).re;
    let lags: Vec<Complex64> = (0..n_ant)
        .map(|d| {
            if d == 0 {
                return Complex64::new(1.0, 0.0);
            }
            integrate(&|phi| Complex64::from_polar(pas(phi), PI * d as f64 * (mean + phi).sin()))
                / norm
        })
        .collect();
    Ok(CMatrix::from_fn(n_ant, n_ant, |p, q| {
        if p >= q {
            lags[p - q]
        } else {
            lags[q - p].conj()
        }
    }))
}

/// Evaluated subcarriers, as offsets from the channel center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToneGrid {
    pub spacing_hz: f64,
    /// Keep every `decimation`-th data tone of the 242-tone RU.
    pub decimation: usize,
}

impl Default for ToneGrid {
    fn default() -> Self {
        Self { spacing_hz: 78_125.0, decimation: 8 }
    }
}

impl ToneGrid {
    pub fn tone_indices(&self) -> Vec<i32> {
        (-122..=-2).chain(2..=122).step_by(self.decimation.max(1)).collect()
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.tone_indices().iter().map(|&k| f64::from(k) * self.spacing_hz).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModel {
    pub n_tx: usize,
    pub clusters: ClusterParam,
    /// Rician K-factor of the first tap in LoS.
    pub k_factor_db: f64,
    /// Receive-side rms angular spread around a uniformly drawn mean AoA.
    pub rx_angular_spread_deg: f64,
    pub pathloss: PathLoss,
    pub tones: ToneGrid,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            n_tx: 8,
            clusters: ClusterParam::default(),
            k_factor_db: 3.0,
            rx_angular_spread_deg: 30.0,
            pathloss: PathLoss::default(),
            tones: ToneGrid::default(),
        }
    }
}

/// One station's channel for one fading block.
#[derive(Clone, Debug, PartialEq)]
pub struct StaChannel {
    /// `n_rx x n_tx` response per evaluated subcarrier.
    pub tones: Vec<CMatrix>,
    pub pathloss_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub regime: Regime,
    pub stas: Vec<StaChannel>,
    pub rng_seed: u64,
}

impl ChannelRealization {
    /// Dumps `sta,subcarrier,rx,tx,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sta", "subcarrier", "rx", "tx", "re", "im"])?;
        for (k, sta) in self.stas.iter().enumerate() {
            for (f, h) in sta.tones.iter().enumerate() {
                for r in 0..h.nrows() {
                    for t in 0..h.ncols() {
                        let z = h[(r, t)];
                        w.write_record([
                            k.to_string(),
                            f.to_string(),
                            r.to_string(),
                            t.to_string(),
                            z.re.to_string(),
                            z.im.to_string(),
                        ])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / SQRT_2
}

/// Per-station quantities that do not change between fading blocks.
#[derive(Clone, Debug)]
struct StaPlan {
    geometry: StaGeometry,
    pathloss_db: f64,
    /// Transmit correlation square root per cluster.
    tx_sqrt: Vec<CMatrix>,
}

/// A channel model bound to a fixed set of station geometries, ready to draw
/// independent fading blocks.
#[derive(Clone, Debug)]
pub struct PreparedChannel {
    model: ChannelModel,
    regime: Regime,
    powers: Vec<f64>,
    delays_s: Vec<f64>,
    freqs_hz: Vec<f64>,
    stas: Vec<StaPlan>,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::Config("channel.n_tx must be at least 1".into()));
        }
        if !(self.rx_angular_spread_deg > 0.0) {
            return Err(Error::Config("channel.rx_angular_spread_deg must be positive".into()));
        }
        if !(self.pathloss.breakpoint_m > 0.0) {
            return Err(Error::Config("channel.pathloss.breakpoint_m must be positive".into()));
        }
        if self.tones.decimation == 0 || !(self.tones.spacing_hz > 0.0) {
            return Err(Error::Config("channel.tones needs positive spacing and decimation".into()));
        }
        self.clusters.validate()
    }

    pub fn prepare(&self, geometries: &[StaGeometry], regime: Regime) -> Result<PreparedChannel> {
        self.validate()?;
        if geometries.is_empty() {
            return Err(Error::Config("at least one station geometry is required".into()));
        }
        let mut stas = Vec::with_capacity(geometries.len());
        for (k, g) in geometries.iter().enumerate() {
            g.validate()?;
            if regime == Regime::Los && g.distance_m > self.pathloss.breakpoint_m {
                return Err(Error::RegimeViolation {
                    distance_m: g.distance_m,
                    breakpoint_m: self.pathloss.breakpoint_m,
                });
            }
            let tx_sqrt = self
                .clusters
                .clusters
                .iter()
                .map(|c| {
                    let anchor = c.anchor_sta.and_then(|j| geometries.get(j)).unwrap_or(&geometries[k]);
                    let r = correlation_matrix(
                        self.n_tx,
                        anchor.los_aod_deg + c.aod_offset_deg,
                        c.angular_spread_deg,
                    )?;
                    Ok(hermitian_sqrt(&r))
                })
                .collect::<Result<Vec<_>>>()?;
            stas.push(StaPlan {
                geometry: g.clone(),
                pathloss_db: self.pathloss.loss_db(g.distance_m)?,
                tx_sqrt,
            });
        }
        Ok(PreparedChannel {
            model: self.clone(),
            regime,
            powers: self.clusters.linear_powers(),
            delays_s: self.clusters.tap_delays_ns.iter().map(|d| d * 1e-9).collect(),
            freqs_hz: self.tones.frequencies_hz(),
            stas,
        })
    }

    pub fn draw_realization(
        &self,
        geometries: &[StaGeometry],
        regime: Regime,
        seed: u64,
    ) -> Result<ChannelRealization> {
        Ok(self.prepare(geometries, regime)?.draw(seed))
    }
}

impl PreparedChannel {
    pub fn n_stas(&self) -> usize {
        self.stas.len()
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn pathloss_db(&self, sta: usize) -> f64 {
        self.stas[sta].pathloss_db
    }

    /// One fading block for every station; station `k` uses substream `k`.
    pub fn draw(&self, seed: u64) -> ChannelRealization {
        let stas = (0..self.stas.len()).map(|k| self.draw_sta(k, seed, k as u64)).collect();
        ChannelRealization { regime: self.regime, stas, rng_seed: seed }
    }

    /// Station `sta`'s channel from random substream `stream` of `seed`.
    pub fn draw_sta(&self, sta: usize, seed: u64, stream: u64) -> StaChannel {
        let plan = &self.stas[sta];
        let model = &self.model;
        let n_rx = plan.geometry.n_rx;
        let n_tx = model.n_tx;
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, &[stream]));

        let rx_aoa_deg = rng.random_range(0.0..360.0);
        let rx_sqrt = if n_rx == 1 {
            CMatrix::identity(1, 1)
        } else {
            hermitian_sqrt(
                &correlation_matrix(n_rx, rx_aoa_deg, model.rx_angular_spread_deg)
                    .expect("validated spread"),
            )
        };

        let taps: Vec<CMatrix> = self
            .powers
            .iter()
            .zip(&model.clusters.cluster_of_tap)
            .enumerate()
            .map(|(tap, (&power, &cluster))| {
                let g = CMatrix::from_fn(n_rx, n_tx, |_, _| complex_gaussian(&mut rng));
                let mut h = &rx_sqrt * g * &plan.tx_sqrt[cluster];
                if tap == 0 && self.regime == Regime::Los {
                    let k = 10f64.powf(model.k_factor_db / 10.0);
                    let los = ula_steering(n_rx, rx_aoa_deg)
                        * ula_steering(n_tx, plan.geometry.los_aod_deg).adjoint();
                    h = los * Complex64::new((k / (k + 1.0)).sqrt(), 0.0)
                        + h * Complex64::new((1.0 / (k + 1.0)).sqrt(), 0.0);
                }
                h * Complex64::new(power.sqrt(), 0.0)
            })
            .collect();

        let tones = self
            .freqs_hz
            .iter()
            .map(|&f| {
                let mut acc = CMatrix::zeros(n_rx, n_tx);
                for (h, &tau) in taps.iter().zip(&self.delays_s) {
                    acc += h * Complex64::from_polar(1.0, -2.0 * PI * f * tau);
                }
                acc
            })
            .collect();
        StaChannel { tones, pathloss_db: plan.pathloss_db }
    }
}
