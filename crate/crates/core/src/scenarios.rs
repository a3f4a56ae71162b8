//! Monte Carlo scenario engine: separation and distance sweeps comparing SU
//! and MU capacity, and the on/off guideline table that also charges the
//! sounding overhead.
//!
//! Every cycle draws an independent block-fading realization from a seed
//! derived from `(master_seed, stream_key, cycle)`. Points that share a
//! `stream_key` see common random numbers, which keeps sweep curves smooth.
//! Cycles run on the rayon pool and are merged in cycle order, so results do
//! not depend on the worker count.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airtime::{angle_bit_widths, sounding_overhead, Codebook, FeedbackType, PhyTiming, SoundingConfig};
use crate::capacity::{mu_capacity, pairwise_sum, su_capacity, zero_forcing_steering, LinkBudget, MuUser};
use crate::channel::{ChannelModel, PreparedChannel, Regime, StaChannel, StaGeometry};
use crate::error::{Error, Result};
use crate::precoding::{fed_back_steering, SteeringMatrix};
use crate::seed::{child_seed, label_id};

/// MU precoder. `ZeroForcing` needs full CSI and serves only as a reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precoder {
    #[default]
    StackedFeedback,
    ZeroForcing,
}

/// Models shared by every scenario of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Simulation {
    pub channel: ChannelModel,
    pub link: LinkBudget,
    pub sounding: SoundingConfig,
    pub phy: PhyTiming,
    pub precoder: Precoder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub label: String,
    pub regime: Regime,
    pub geometries: Vec<StaGeometry>,
    pub codebook: Codebook,
    /// Stations the SU baseline may serve; empty allows all of them.
    pub su_candidates: Vec<usize>,
    pub n_cycles: usize,
    pub master_seed: u64,
    /// Random-stream key; scenarios with equal keys share channel draws.
    pub stream_key: u64,
    /// Station subsets served together in MU mode; empty serves all of them.
    pub mu_groups: Vec<Vec<usize>>,
}

impl ScenarioSpec {
    pub fn new(label: impl Into<String>, regime: Regime, geometries: Vec<StaGeometry>) -> Self {
        let label = label.into();
        Self {
            stream_key: label_id(&label),
            label,
            regime,
            geometries,
            codebook: Codebook::Zero,
            su_candidates: Vec::new(),
            n_cycles: 200,
            master_seed: 0,
            mu_groups: Vec::new(),
        }
    }

    pub fn n_sta_selected(&self) -> usize {
        self.geometries.len()
    }

    /// Receive antennas per station, which is also the stream count.
    pub fn sta_dims(&self) -> usize {
        self.geometries.first().map_or(0, |g| g.n_rx)
    }

    pub fn validate(&self) -> Result<()> {
        if self.geometries.is_empty() {
            return Err(Error::Config(format!("scenario {} has no stations", self.label)));
        }
        if self.geometries.iter().any(|g| g.n_rx != self.sta_dims()) {
            return Err(Error::Config(format!(
                "scenario {} mixes station dimensions",
                self.label
            )));
        }
        if let Some(&k) = self.su_candidates.iter().find(|&&k| k >= self.geometries.len()) {
            return Err(Error::Config(format!("SU candidate {k} is not a station")));
        }
        for g in &self.mu_groups {
            if g.is_empty() || g.iter().any(|&k| k >= self.geometries.len()) {
                return Err(Error::Config(format!("invalid MU group {g:?}")));
            }
        }
        if self.n_cycles == 0 {
            return Err(Error::EmptyTrace);
        }
        Ok(())
    }

    /// MU groups with the empty default expanded to all stations.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        if self.mu_groups.is_empty() {
            vec![(0..self.geometries.len()).collect()]
        } else {
            self.mu_groups.clone()
        }
    }
}

/// Every subset of `0..n` with at least `min_size` members, smallest first.
pub fn station_subsets(n: usize, min_size: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u32..1 << n)
        .map(|mask| (0..n).filter(|&k| mask & (1 << k) != 0).collect::<Vec<_>>())
        .filter(|s| s.len() >= min_size.max(1))
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Per-cycle capacities of one scenario in bit/s.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTrace {
    /// `su[cycle][sta]`: each station served alone at full power.
    pub su: Vec<Vec<f64>>,
    pub groups: Vec<Vec<usize>>,
    /// `mu[group][cycle][member]`: members of `groups[group]` served together.
    pub mu: Vec<Vec<Vec<f64>>>,
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    (mean, (pairwise_sum(&sq) / (n - 1.0) / n).sqrt())
}

impl PointTrace {
    pub fn n_cycles(&self) -> usize {
        self.su.len()
    }

    pub fn su_series(&self, sta: usize) -> Vec<f64> {
        self.su.iter().map(|c| c[sta]).collect()
    }

    /// MU capacity of `group` summed over its members, per cycle.
    pub fn mu_sum_series(&self, group: usize) -> Vec<f64> {
        self.mu[group].iter().map(|c| pairwise_sum(c)).collect()
    }

    /// Candidate with the highest mean SU capacity; ties go to the lower index.
    pub fn best_su_station(&self, candidates: &[usize]) -> usize {
        let all: Vec<usize>;
        let pool = if candidates.is_empty() {
            all = (0..self.su.first().map_or(0, Vec::len)).collect();
            &all
        } else {
            candidates
        };
        let mut best = pool[0];
        let mut best_mean = f64::NEG_INFINITY;
        for &k in pool {
            let m = mean_and_stderr(&self.su_series(k)).0;
            if m > best_mean {
                best = k;
                best_mean = m;
            }
        }
        best
    }
}

impl Simulation {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.link.validate()?;
        self.phy.validate()?;
        self.sounding.validate()
    }

    fn cycle(
        &self,
        prepared: &PreparedChannel,
        spec: &ScenarioSpec,
        groups: &[Vec<usize>],
        cycle: usize,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let seed = child_seed(spec.master_seed, &[spec.stream_key, cycle as u64]);
        let n = prepared.n_stas();
        let n_ss = spec.sta_dims();
        let chans: Vec<StaChannel> = (0..n).map(|k| prepared.draw_sta(k, seed, k as u64)).collect();

        let su_bits = angle_bit_widths(FeedbackType::Su, spec.codebook);
        let su = chans
            .iter()
            .map(|ch| {
                let v = fed_back_steering(&ch.tones, n_ss, Some(su_bits))?;
                su_capacity(&ch.tones, &v, &self.link, ch.pathloss_db)
            })
            .collect::<Result<Vec<_>>>()?;

        let fed_back: Vec<SteeringMatrix> = match self.precoder {
            Precoder::StackedFeedback => {
                let mu_bits = angle_bit_widths(FeedbackType::Mu, spec.codebook);
                chans
                    .iter()
                    .map(|ch| fed_back_steering(&ch.tones, n_ss, Some(mu_bits)))
                    .collect::<Result<_>>()?
            }
            Precoder::ZeroForcing => Vec::new(),
        };
        let mu = groups
            .iter()
            .map(|group| {
                let steering: Vec<SteeringMatrix> = match self.precoder {
                    Precoder::StackedFeedback => group.iter().map(|&k| fed_back[k].clone()).collect(),
                    Precoder::ZeroForcing => {
                        let views: Vec<&[_]> = group.iter().map(|&k| chans[k].tones.as_slice()).collect();
                        zero_forcing_steering(&views, &vec![n_ss; group.len()])?
                    }
                };
                let users: Vec<MuUser<'_>> = group
                    .iter()
                    .zip(&steering)
                    .map(|(&k, v)| MuUser {
                        channel: &chans[k].tones,
                        steering: v,
                        pathloss_db: chans[k].pathloss_db,
                    })
                    .collect();
                mu_capacity(&users, &self.link)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((su, mu))
    }

    /// Runs every cycle of `spec`.
    pub fn evaluate(&self, spec: &ScenarioSpec) -> Result<PointTrace> {
        spec.validate()?;
        let groups = spec.groups();
        let largest = groups.iter().map(Vec::len).max().unwrap_or(0);
        let total = largest * spec.sta_dims();
        if total > self.channel.n_tx {
            return Err(Error::TooManyStreams { total, max: self.channel.n_tx });
        }
        let prepared = self.channel.prepare(&spec.geometries, spec.regime)?;
        let rows = (0..spec.n_cycles)
            .into_par_iter()
            .map(|c| self.cycle(&prepared, spec, &groups, c))
            .collect::<Result<Vec<_>>>()?;
        let mut su = Vec::with_capacity(rows.len());
        let mut mu: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(rows.len()); groups.len()];
        for (s, per_group) in rows {
            su.push(s);
            for (g, caps) in per_group.into_iter().enumerate() {
                mu[g].push(caps);
            }
        }
        Ok(PointTrace { su, groups, mu })
    }
}

/// Runs `f` on a pool of `workers` threads; 0 uses the rayon default.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} worker threads: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeparationSweep {
    pub distance_m: f64,
    pub step_deg: f64,
    pub max_separation_deg: f64,
    /// Station 1's LoS AoD; station 2 sits at this plus the separation.
    pub reference_aod_deg: f64,
    pub sta_dims: usize,
    pub codebook: Codebook,
}

impl Default for SeparationSweep {
    fn default() -> Self {
        Self {
            distance_m: 8.0,
            step_deg: 2.0,
            max_separation_deg: 180.0,
            reference_aod_deg: 0.0,
            sta_dims: 1,
            codebook: Codebook::Zero,
        }
    }
}

impl SeparationSweep {
    pub fn separations_deg(&self) -> Vec<f64> {
        let n = (self.max_separation_deg / self.step_deg + 1e-9).floor() as usize;
        (0..=n).map(|i| i as f64 * self.step_deg).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationPoint {
    pub separation_deg: f64,
    pub su_capacity_bps: f64,
    pub su_stderr_bps: f64,
    pub mu_capacity_bps: f64,
    pub mu_stderr_bps: f64,
    pub mu_su_ratio: f64,
    /// SU at least as good as MU; ties keep MU off.
    pub su_dominant: bool,
}

/// LoS sweep of station 2's angle against station 1 at a fixed distance.
/// Every point shares the same channel draws.
pub fn sweep_separation(
    sim: &Simulation,
    sweep: &SeparationSweep,
    n_cycles: usize,
    master_seed: u64,
) -> Result<Vec<SeparationPoint>> {
    if !(sweep.step_deg > 0.0) {
        return Err(Error::Config("separation step must be positive".into()));
    }
    let key = label_id("separation-sweep");
    sweep
        .separations_deg()
        .into_par_iter()
        .map(|sep| {
            let geometries = vec![
                StaGeometry::new(sweep.distance_m, sweep.reference_aod_deg, sweep.sta_dims),
                StaGeometry::new(sweep.distance_m, sweep.reference_aod_deg + sep, sweep.sta_dims),
            ];
            let spec = ScenarioSpec {
                codebook: sweep.codebook,
                n_cycles,
                master_seed,
                stream_key: key,
                ..ScenarioSpec::new(format!("separation {sep}"), Regime::Los, geometries)
            };
            let trace = sim.evaluate(&spec)?;
            let (su, su_se) = mean_and_stderr(&trace.su_series(0));
            let (mu, mu_se) = mean_and_stderr(&trace.mu_sum_series(0));
            Ok(SeparationPoint {
                separation_deg: sep,
                su_capacity_bps: su,
                su_stderr_bps: su_se,
                mu_capacity_bps: mu,
                mu_stderr_bps: mu_se,
                mu_su_ratio: mu / su,
                su_dominant: !(mu > su),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceSweep {
    pub distances_m: Vec<f64>,
    pub n_separations: usize,
    pub reference_aod_deg: f64,
    pub sta_dims: usize,
    pub codebook: Codebook,
}

impl Default for DistanceSweep {
    fn default() -> Self {
        Self {
            distances_m: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
            n_separations: 60,
            reference_aod_deg: 0.0,
            sta_dims: 1,
            codebook: Codebook::Zero,
        }
    }
}

impl DistanceSweep {
    /// `n_separations` equally spaced separations covering `[0, 180)`.
    pub fn separations_deg(&self) -> Vec<f64> {
        let step = 180.0 / self.n_separations as f64;
        (0..self.n_separations).map(|j| j as f64 * step).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistancePoint {
    pub distance_m: f64,
    pub n_separations: usize,
    pub mu_dominant: usize,
    pub proportion: f64,
    pub mean_su_capacity_bps: f64,
    pub mean_mu_capacity_bps: f64,
}

/// NLoS sweep over distance; at each distance, the share of separations where
/// MU beats SU. Separation `j` uses the same draws at every distance.
pub fn sweep_distance(
    sim: &Simulation,
    sweep: &DistanceSweep,
    n_cycles: usize,
    master_seed: u64,
) -> Result<Vec<DistancePoint>> {
    if sweep.n_separations == 0 || sweep.distances_m.is_empty() {
        return Err(Error::Config("distance sweep needs distances and separations".into()));
    }
    let seps = sweep.separations_deg();
    let jobs: Vec<(usize, usize)> = (0..sweep.distances_m.len())
        .flat_map(|d| (0..seps.len()).map(move |j| (d, j)))
        .collect();
    let results = jobs
        .into_par_iter()
        .map(|(d, j)| {
            let dist = sweep.distances_m[d];
            let geometries = vec![
                StaGeometry::new(dist, sweep.reference_aod_deg, sweep.sta_dims),
                StaGeometry::new(dist, sweep.reference_aod_deg + seps[j], sweep.sta_dims),
            ];
            let spec = ScenarioSpec {
                codebook: sweep.codebook,
                n_cycles,
                master_seed,
                stream_key: child_seed(label_id("distance-sweep"), &[j as u64]),
                ..ScenarioSpec::new(format!("distance {dist} separation {}", seps[j]), Regime::Nlos, geometries)
            };
            let trace = sim.evaluate(&spec)?;
            let su = mean_and_stderr(&trace.su_series(0)).0;
            let mu = mean_and_stderr(&trace.mu_sum_series(0)).0;
            Ok((su, mu))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(results
        .chunks(seps.len())
        .zip(&sweep.distances_m)
        .map(|(chunk, &distance_m)| {
            let mu_dominant = chunk.iter().filter(|(su, mu)| mu > su).count();
            let sus: Vec<f64> = chunk.iter().map(|p| p.0).collect();
            let mus: Vec<f64> = chunk.iter().map(|p| p.1).collect();
            DistancePoint {
                distance_m,
                n_separations: chunk.len(),
                mu_dominant,
                proportion: mu_dominant as f64 / chunk.len() as f64,
                mean_su_capacity_bps: pairwise_sum(&sus) / chunk.len() as f64,
                mean_mu_capacity_bps: pairwise_sum(&mus) / chunk.len() as f64,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceStats {
    pub n_points: usize,
    pub su_dominant: usize,
    pub su_dominant_percent: f64,
    /// SU-dominant points in the run starting at the first separation.
    pub leading_run: usize,
    /// SU-dominant points in the run ending at the last separation.
    pub trailing_run: usize,
    pub leading_end_deg: Option<f64>,
    pub trailing_start_deg: Option<f64>,
    pub min_ratio: f64,
    pub min_ratio_separation_deg: f64,
}

pub fn dominance_stats(curve: &[SeparationPoint]) -> Result<DominanceStats> {
    if curve.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = curve.len();
    let su_dominant = curve.iter().filter(|p| p.su_dominant).count();
    let leading_run = curve.iter().take_while(|p| p.su_dominant).count();
    let trailing_run = if leading_run == n {
        n
    } else {
        curve.iter().rev().take_while(|p| p.su_dominant).count()
    };
    let argmin = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mu_su_ratio.total_cmp(&b.1.mu_su_ratio))
        .map(|(i, _)| i)
        .expect("curve is not empty");
    Ok(DominanceStats {
        n_points: n,
        su_dominant,
        su_dominant_percent: 100.0 * su_dominant as f64 / n as f64,
        leading_run,
        trailing_run,
        leading_end_deg: leading_run.checked_sub(1).map(|i| curve[i].separation_deg),
        trailing_start_deg: (trailing_run > 0).then(|| curve[n - trailing_run].separation_deg),
        min_ratio: curve[argmin].mu_su_ratio,
        min_ratio_separation_deg: curve[argmin].separation_deg,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GuidelineRow {
    #[serde(rename = "L-near")]
    LosNear,
    #[serde(rename = "L-far")]
    LosFar,
    #[serde(rename = "N-small")]
    NlosSmall,
    #[serde(rename = "N-large")]
    NlosLarge,
    #[serde(rename = "N-mixed")]
    NlosMixed,
}

impl GuidelineRow {
    pub const ALL: [GuidelineRow; 5] = [
        GuidelineRow::LosNear,
        GuidelineRow::LosFar,
        GuidelineRow::NlosSmall,
        GuidelineRow::NlosLarge,
        GuidelineRow::NlosMixed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            GuidelineRow::LosNear => "L-near",
            GuidelineRow::LosFar => "L-far",
            GuidelineRow::NlosSmall => "N-small",
            GuidelineRow::NlosLarge => "N-large",
            GuidelineRow::NlosMixed => "N-mixed",
        }
    }

    pub fn regime(self) -> Regime {
        match self {
            GuidelineRow::LosNear | GuidelineRow::LosFar => Regime::Los,
            _ => Regime::Nlos,
        }
    }
}

impl fmt::Display for GuidelineRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Station dimensions and codebook of one guideline column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CsiConfig {
    pub sta_dims: usize,
    pub codebook: Codebook,
}

impl CsiConfig {
    pub const ALL: [CsiConfig; 4] = [
        CsiConfig { sta_dims: 1, codebook: Codebook::Zero },
        CsiConfig { sta_dims: 1, codebook: Codebook::One },
        CsiConfig { sta_dims: 2, codebook: Codebook::Zero },
        CsiConfig { sta_dims: 2, codebook: Codebook::One },
    ];

    pub fn label(self) -> String {
        format!("{0}x{0}/cb{1}", self.sta_dims, self.codebook)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    On,
    Off,
}

impl Verdict {
    /// MU goes on only for a strict improvement.
    pub fn decide(mu_eff: f64, su_eff: f64) -> Self {
        if mu_eff > su_eff {
            Verdict::On
        } else {
            Verdict::Off
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::On => "ON",
            Verdict::Off => "OFF",
        })
    }
}

/// Operating points of the guideline rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidelineSettings {
    pub los_distance_m: f64,
    /// LoS AoDs of the four stations in the L-near row.
    pub near_aods_deg: Vec<f64>,
    /// LoS AoDs of the four stations in the L-far row.
    pub far_aods_deg: Vec<f64>,
    /// AoDs used in all NLoS rows.
    pub nlos_aods_deg: Vec<f64>,
    pub small_distance_m: f64,
    pub large_distance_m: f64,
    /// UL MCS of the feedback frames in the table; `None` keeps the sounding
    /// configuration's value.
    pub ul_feedback_mcs: Option<u8>,
    /// MU serves the best subset of at least two stations instead of all.
    pub user_selection: bool,
}

impl Default for GuidelineSettings {
    fn default() -> Self {
        Self {
            los_distance_m: 8.0,
            near_aods_deg: vec![0.0, 4.0, 8.0, 12.0],
            far_aods_deg: vec![0.0, 19.47, 41.81, 90.0],
            nlos_aods_deg: vec![0.0, 40.0, 80.0, 120.0],
            small_distance_m: 10.0,
            large_distance_m: 30.0,
            ul_feedback_mcs: Some(11),
            user_selection: true,
        }
    }
}

impl GuidelineSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, list) in [
            ("near_aods_deg", &self.near_aods_deg),
            ("far_aods_deg", &self.far_aods_deg),
            ("nlos_aods_deg", &self.nlos_aods_deg),
        ] {
            if list.is_empty() || list.len() > 4 {
                return Err(Error::Config(format!(
                    "guideline.{name} must list 1 to 4 stations, got {}",
                    list.len()
                )));
            }
        }
        let n = self.near_aods_deg.len();
        if self.far_aods_deg.len() != n || self.nlos_aods_deg.len() != n {
            return Err(Error::Config("guideline AoD lists must have equal length".into()));
        }
        if n < 2 {
            return Err(Error::Config("guideline needs at least two stations".into()));
        }
        Ok(())
    }

    /// Station geometries of `row` with `dims`-antenna stations, and the
    /// stations the SU baseline may serve.
    pub fn geometries(&self, row: GuidelineRow, dims: usize) -> (Vec<StaGeometry>, Vec<usize>) {
        let at = |aods: &[f64], dist: &dyn Fn(usize) -> f64| {
            aods.iter().enumerate().map(|(k, &a)| StaGeometry::new(dist(k), a, dims)).collect()
        };
        let n = self.nlos_aods_deg.len();
        match row {
            GuidelineRow::LosNear => (at(&self.near_aods_deg, &|_| self.los_distance_m), vec![]),
            GuidelineRow::LosFar => (at(&self.far_aods_deg, &|_| self.los_distance_m), vec![]),
            GuidelineRow::NlosSmall => (at(&self.nlos_aods_deg, &|_| self.small_distance_m), vec![]),
            GuidelineRow::NlosLarge => (at(&self.nlos_aods_deg, &|_| self.large_distance_m), vec![]),
            GuidelineRow::NlosMixed => {
                let near = n / 2;
                let geo = at(&self.nlos_aods_deg, &|k| {
                    if k < near {
                        self.small_distance_m
                    } else {
                        self.large_distance_m
                    }
                });
                (geo, (0..near).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidelineCell {
    pub scenario: GuidelineRow,
    pub sta_dims: usize,
    pub codebook: Codebook,
    pub verdict: Verdict,
    pub mu_eff_capacity_bps: f64,
    pub su_eff_capacity_bps: f64,
    /// `mu_eff / su_eff - 1`.
    pub margin: f64,
    pub mu_capacity_bps: f64,
    pub su_capacity_bps: f64,
    pub mu_overhead_ratio: f64,
    pub su_overhead_ratio: f64,
    pub su_station: usize,
    /// Stations served in MU mode.
    pub mu_stations: Vec<usize>,
    pub n_cycles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidelineTable {
    pub master_seed: u64,
    pub cells: Vec<GuidelineCell>,
}

#[derive(Serialize)]
struct GuidelineCsvRow<'a> {
    scenario: &'a str,
    config: String,
    sta_dims: usize,
    codebook: u8,
    verdict: String,
    mu_eff_capacity_bps: f64,
    su_eff_capacity_bps: f64,
    margin: f64,
    mu_overhead_ratio: f64,
    su_overhead_ratio: f64,
    mu_stations: String,
}

impl GuidelineTable {
    pub fn cell(&self, row: GuidelineRow, cfg: CsiConfig) -> Option<&GuidelineCell> {
        self.cells
            .iter()
            .find(|c| c.scenario == row && c.sta_dims == cfg.sta_dims && c.codebook == cfg.codebook)
    }

    pub fn on_count(&self) -> usize {
        self.cells.iter().filter(|c| c.verdict == Verdict::On).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in &self.cells {
            w.serialize(GuidelineCsvRow {
                scenario: c.scenario.label(),
                config: CsiConfig { sta_dims: c.sta_dims, codebook: c.codebook }.label(),
                sta_dims: c.sta_dims,
                codebook: c.codebook.into(),
                verdict: c.verdict.to_string(),
                mu_eff_capacity_bps: c.mu_eff_capacity_bps,
                su_eff_capacity_bps: c.su_eff_capacity_bps,
                margin: c.margin,
                mu_overhead_ratio: c.mu_overhead_ratio,
                su_overhead_ratio: c.su_overhead_ratio,
                mu_stations: c.mu_stations.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Plain-text grid, one line per scenario.
    pub fn render(&self) -> String {
        let mut s = format!("{:<8}", "");
        for cfg in CsiConfig::ALL {
            s += &format!("{:>10}", cfg.label());
        }
        s.push('\n');
        for row in GuidelineRow::ALL {
            s += &format!("{:<8}", row.label());
            for cfg in CsiConfig::ALL {
                let v = self.cell(row, cfg).map_or("-".to_string(), |c| c.verdict.to_string());
                s += &format!("{v:>10}");
            }
            s.push('\n');
        }
        s
    }
}

/// Evaluates every scenario row against every CSI configuration. Both
/// codebooks of a row and dimension see the same channel draws.
pub fn guideline_table(
    sim: &Simulation,
    settings: &GuidelineSettings,
    n_cycles: usize,
    master_seed: u64,
) -> Result<GuidelineTable> {
    settings.validate()?;
    let mut sounding = sim.sounding.clone();
    if let Some(mcs) = settings.ul_feedback_mcs {
        sounding.ul_feedback_mcs = mcs;
    }
    let jobs: Vec<(GuidelineRow, CsiConfig)> = GuidelineRow::ALL
        .iter()
        .flat_map(|&r| CsiConfig::ALL.iter().map(move |&c| (r, c)))
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(row, cfg)| {
            let (geometries, su_candidates) = settings.geometries(row, cfg.sta_dims);
            let n_users = geometries.len();
            let spec = ScenarioSpec {
                codebook: cfg.codebook,
                su_candidates,
                mu_groups: if settings.user_selection {
                    station_subsets(n_users, 2)
                } else {
                    Vec::new()
                },
                n_cycles,
                master_seed,
                stream_key: label_id(&format!("guideline/{row}/{}", cfg.sta_dims)),
                ..ScenarioSpec::new(format!("{row} {}", cfg.label()), row.regime(), geometries)
            };
            let trace = sim.evaluate(&spec)?;
            let su_station = trace.best_su_station(&spec.su_candidates);
            let su_cap = mean_and_stderr(&trace.su_series(su_station)).0;

            let base = sounding.with_sta_dims(cfg.sta_dims).with_codebook(cfg.codebook);
            let su_o = sounding_overhead(&base.with_users(1), &sim.phy)?.overhead_ratio;
            let su_eff = (1.0 - su_o) * su_cap;
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for (g, group) in trace.groups.iter().enumerate() {
                let cap = mean_and_stderr(&trace.mu_sum_series(g)).0;
                let o = sounding_overhead(&base.with_users(group.len()), &sim.phy)?.overhead_ratio;
                let eff = (1.0 - o) * cap;
                if best.is_none_or(|b| eff > b.3) {
                    best = Some((g, cap, o, eff));
                }
            }
            let (g, mu_cap, mu_o, mu_eff) = best.expect("at least one MU group");
            Ok(GuidelineCell {
                scenario: row,
                sta_dims: cfg.sta_dims,
                codebook: cfg.codebook,
                verdict: Verdict::decide(mu_eff, su_eff),
                mu_eff_capacity_bps: mu_eff,
                su_eff_capacity_bps: su_eff,
                margin: mu_eff / su_eff - 1.0,
                mu_capacity_bps: mu_cap,
                su_capacity_bps: su_cap,
                mu_overhead_ratio: mu_o,
                su_overhead_ratio: su_o,
                su_station,
                mu_stations: trace.groups[g].clone(),
                n_cycles,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GuidelineTable { master_seed, cells })
}

/// Writes the separation sweep as CSV.
pub fn write_separation_csv<W: Write>(curve: &[SeparationPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the distance sweep as CSV.
pub fn write_distance_csv<W: Write>(curve: &[DistancePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in curve {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
