//! Beamforming feedback: SVD steering vectors, Givens-angle compression,
//! codebook quantization and reconstruction.
//!
//! Angles follow the compressed beamforming layout: for each column `i` the
//! report carries `phi(i..n_rows-1, i)` followed by `psi(i+1..n_rows, i)`,
//! columns in order. `phi` lives in `[0, 2pi)`, `psi` in `[0, pi/2]`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::airtime::givens_angle_count;
use crate::error::{Error, Result};
use crate::linalg::{orthonormality_error, CMatrix};

const ORTHONORMAL_TOL: f64 = 1e-6;
const RANK_TOL: f64 = 1e-10;
const MAX_ANGLE_BITS: u32 = 30;

/// Per-subcarrier steering matrices, each `n_tx x n_ss`.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringMatrix {
    pub tones: Vec<CMatrix>,
}

impl SteeringMatrix {
    pub fn new(tones: Vec<CMatrix>) -> Self {
        Self { tones }
    }

    pub fn n_rows(&self) -> usize {
        self.tones.first().map_or(0, |m| m.nrows())
    }

    pub fn n_cols(&self) -> usize {
        self.tones.first().map_or(0, |m| m.ncols())
    }

    pub fn orthonormality_error(&self) -> f64 {
        self.tones.iter().map(orthonormality_error).fold(0.0, f64::max)
    }
}

/// Givens angles of one subcarrier, in report order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleCodes {
    pub phi: Vec<u32>,
    pub psi: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantization {
    pub b_phi: u32,
    pub b_psi: u32,
    pub codes: Vec<AngleCodes>,
}

/// Compressed beamforming report. For a quantized report `angles` holds the
/// codebook angles the beamformer recovers from `quantization.codes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressedBeamformingReport {
    pub n_rows: usize,
    pub n_cols: usize,
    pub angles: Vec<AngleSet>,
    pub quantization: Option<Quantization>,
}

impl CompressedBeamformingReport {
    /// Writes `tone,kind,index,code` rows for every quantized angle.
    pub fn write_codes_csv<W: Write>(&self, out: W) -> Result<()> {
        let q = self
            .quantization
            .as_ref()
            .ok_or_else(|| Error::MalformedReport("report is not quantized".into()))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tone", "kind", "index", "code"])?;
        for (tone, codes) in q.codes.iter().enumerate() {
            for (kind, list) in [("phi", &codes.phi), ("psi", &codes.psi)] {
                for (index, code) in list.iter().enumerate() {
                    w.write_record([
                        tone.to_string(),
                        kind.to_string(),
                        index.to_string(),
                        code.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Rotates each column so its last entry of non-negligible magnitude is real
/// and non-negative.
fn normalize_column_phases(v: &mut CMatrix) {
    for c in 0..v.ncols() {
        let anchor = (0..v.nrows()).rev().map(|r| v[(r, c)]).find(|z| z.norm() > 1e-300);
        if let Some(z) = anchor {
            let rot = z.conj() / z.norm();
            for r in 0..v.nrows() {
                v[(r, c)] *= rot;
            }
        }
    }
}

/// First `n_ss` right singular vectors of `h`, by descending singular value.
pub fn svd_v(h: &CMatrix, n_ss: usize) -> Result<CMatrix> {
    let (n_rx, n_tx) = h.shape();
    if n_ss == 0 || n_ss > n_rx.min(n_tx) {
        return Err(Error::Dimension(format!(
            "{n_ss} streams from a {n_rx}x{n_tx} channel"
        )));
    }
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let top = svd.singular_values[order[0]];
    let rank = order
        .iter()
        .filter(|&&i| top > 0.0 && svd.singular_values[i] > RANK_TOL * top)
        .count();
    if rank < n_ss {
        return Err(Error::RankDeficient { rank, requested: n_ss });
    }

    let mut v = CMatrix::zeros(n_tx, n_ss);
    for (col, &idx) in order.iter().take(n_ss).enumerate() {
        for r in 0..n_tx {
            v[(r, col)] = v_t[(idx, r)].conj();
        }
    }
    normalize_column_phases(&mut v);
    Ok(v)
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Givens angles of one orthonormal `n_rows x n_cols` matrix.
pub fn decompose_tone(v: &CMatrix) -> Result<AngleSet> {
    let (n_rows, n_cols) = v.shape();
    let (n_phi, n_psi) = givens_angle_count(n_rows, n_cols)?;
    let err = orthonormality_error(v);
    if err > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal(err));
    }

    let mut omega = v.clone();
    // Per-column phases are not fed back; strip them so the last row is real.
    for c in 0..n_cols {
        let z = omega[(n_rows - 1, c)];
        if z.norm() > 0.0 {
            let rot = z.conj() / z.norm();
            for r in 0..n_rows {
                omega[(r, c)] *= rot;
            }
        }
    }

    let mut angles = AngleSet { phi: Vec::with_capacity(n_phi), psi: Vec::with_capacity(n_psi) };
    for i in 0..n_cols.min(n_rows - 1) {
        for k in i..n_rows - 1 {
            let phi = wrap_angle(omega[(k, i)].arg());
            angles.phi.push(phi);
            let rot = Complex64::from_polar(1.0, -phi);
            for c in 0..n_cols {
                omega[(k, c)] *= rot;
            }
        }
        for l in i + 1..n_rows {
            let psi = omega[(l, i)].re.atan2(omega[(i, i)].re).clamp(0.0, FRAC_PI_2);
            angles.psi.push(psi);
            let (s, co) = psi.sin_cos();
            for c in 0..n_cols {
                let top = omega[(i, c)];
                let bottom = omega[(l, c)];
                omega[(i, c)] = top * co + bottom * s;
                omega[(l, c)] = bottom * co - top * s;
            }
        }
    }
    Ok(angles)
}

/// Rebuilds the `n_rows x n_cols` steering matrix from its angles: the
/// product of per-column phase and Givens matrices applied to the identity slab.
pub fn reconstruct_tone(n_rows: usize, n_cols: usize, angles: &AngleSet) -> Result<CMatrix> {
    let (n_phi, n_psi) = givens_angle_count(n_rows, n_cols)?;
    if angles.phi.len() != n_phi || angles.psi.len() != n_psi {
        return Err(Error::MalformedReport(format!(
            "{n_rows}x{n_cols} needs {n_phi} phi and {n_psi} psi angles, got {} and {}",
            angles.phi.len(),
            angles.psi.len()
        )));
    }

    let mut acc = CMatrix::identity(n_rows, n_rows);
    let mut phi = angles.phi.iter();
    let mut psi = angles.psi.iter();
    for i in 0..n_cols.min(n_rows - 1) {
        for k in i..n_rows - 1 {
            let scale = Complex64::from_polar(1.0, *phi.next().expect("count checked"));
            for r in 0..n_rows {
                acc[(r, k)] *= scale;
            }
        }
        for l in i + 1..n_rows {
            let (s, co) = psi.next().expect("count checked").sin_cos();
            // right-multiply by the transposed rotation on columns (i, l)
            for r in 0..n_rows {
                let a = acc[(r, i)];
                let b = acc[(r, l)];
                acc[(r, i)] = a * co + b * s;
                acc[(r, l)] = b * co - a * s;
            }
        }
    }
    Ok(acc.columns(0, n_cols).into_owned())
}

pub fn givens_decompose(v: &SteeringMatrix) -> Result<CompressedBeamformingReport> {
    let angles = v.tones.iter().map(decompose_tone).collect::<Result<Vec<_>>>()?;
    Ok(CompressedBeamformingReport {
        n_rows: v.n_rows(),
        n_cols: v.n_cols(),
        angles,
        quantization: None,
    })
}

fn phi_step(bits: u32) -> f64 {
    PI / f64::from(1u32 << (bits - 1))
}

fn psi_step(bits: u32) -> f64 {
    PI / f64::from(1u32 << (bits + 1))
}

/// Codebook index of `phi` on the `b`-bit grid `k*pi/2^(b-1) + pi/2^b`.
pub fn phi_code(phi: f64, bits: u32) -> u32 {
    let levels = 1u32 << bits;
    ((wrap_angle(phi) / phi_step(bits)).floor() as u32).min(levels - 1)
}

/// Codebook index of `psi` on the `b`-bit grid `k*pi/2^(b+1) + pi/2^(b+2)`.
pub fn psi_code(psi: f64, bits: u32) -> u32 {
    let levels = 1u32 << bits;
    ((psi.max(0.0) / psi_step(bits)).floor() as u32).min(levels - 1)
}

pub fn phi_from_code(code: u32, bits: u32) -> f64 {
    f64::from(code) * phi_step(bits) + phi_step(bits) / 2.0
}

pub fn psi_from_code(code: u32, bits: u32) -> f64 {
    f64::from(code) * psi_step(bits) + psi_step(bits) / 2.0
}

/// Snaps every angle to the nearest point of the midpoint codebooks.
pub fn quantize(
    report: &CompressedBeamformingReport,
    b_phi: u32,
    b_psi: u32,
) -> Result<CompressedBeamformingReport> {
    for b in [b_phi, b_psi] {
        if !(1..=MAX_ANGLE_BITS).contains(&b) {
            return Err(Error::Config(format!(
                "angle bit width must be in 1..={MAX_ANGLE_BITS}, got {b}"
            )));
        }
    }
    let codes: Vec<AngleCodes> = report
        .angles
        .iter()
        .map(|a| AngleCodes {
            phi: a.phi.iter().map(|&x| phi_code(x, b_phi)).collect(),
            psi: a.psi.iter().map(|&x| psi_code(x, b_psi)).collect(),
        })
        .collect();
    let angles = codes
        .iter()
        .map(|c| AngleSet {
            phi: c.phi.iter().map(|&k| phi_from_code(k, b_phi)).collect(),
            psi: c.psi.iter().map(|&k| psi_from_code(k, b_psi)).collect(),
        })
        .collect();
    Ok(CompressedBeamformingReport {
        n_rows: report.n_rows,
        n_cols: report.n_cols,
        angles,
        quantization: Some(Quantization { b_phi, b_psi, codes }),
    })
}

pub fn reconstruct(report: &CompressedBeamformingReport) -> Result<SteeringMatrix> {
    if let Some(q) = &report.quantization {
        if q.codes.len() != report.angles.len() {
            return Err(Error::MalformedReport("code and angle tone counts differ".into()));
        }
    }
    let tones = report
        .angles
        .iter()
        .map(|a| reconstruct_tone(report.n_rows, report.n_cols, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(SteeringMatrix { tones })
}

/// Steering matrices the beamformer ends up using: SVD per tone, Givens
/// compression and quantization with `bits`, reconstruction.
pub fn fed_back_steering(
    channel: &[CMatrix],
    n_ss: usize,
    bits: Option<(u32, u32)>,
) -> Result<SteeringMatrix> {
    let v = SteeringMatrix {
        tones: channel.iter().map(|h| svd_v(h, n_ss)).collect::<Result<Vec<_>>>()?,
    };
    let report = givens_decompose(&v)?;
    match bits {
        Some((b_phi, b_psi)) => reconstruct(&quantize(&report, b_phi, b_psi)?),
        None => reconstruct(&report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{chordal_distance, column_phase_aligned_error, ONE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        })
    }

    fn random_semi_unitary(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let qr = random_matrix(rows, cols, rng).qr();
        qr.q().columns(0, cols).into_owned()
    }

    #[test]
    fn identity_channel_picks_a_basis_vector() {
        let h = CMatrix::identity(2, 2);
        let v = svd_v(&h, 1).unwrap();
        let mag: Vec<f64> = v.iter().map(|z| z.norm()).collect();
        assert!((mag[0] - 1.0).abs() < 1e-12 || (mag[1] - 1.0).abs() < 1e-12);
        assert!((mag[0] * mag[1]).abs() < 1e-12);
    }

    #[test]
    fn rank_one_channel_steers_along_transmit_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(2, 1, &mut rng);
        let b = random_matrix(8, 1, &mut rng);
        let h = &a * b.adjoint();
        let v = svd_v(&h, 1).unwrap();
        let b_unit = &b / Complex64::new(b.norm(), 0.0);
        assert!(chordal_distance(&v, &b_unit) < 1e-10);
        assert!(matches!(svd_v(&h, 2), Err(Error::RankDeficient { rank: 1, requested: 2 })));
    }

    #[test]
    fn svd_columns_have_nonnegative_real_last_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = random_matrix(2, 8, &mut rng);
        let v = svd_v(&h, 2).unwrap();
        for c in 0..2 {
            let last = v[(7, c)];
            assert!(last.im.abs() < 1e-12 && last.re >= 0.0);
        }
    }

    #[test]
    fn first_basis_vector_has_zero_angles() {
        let mut v = CMatrix::zeros(4, 1);
        v[(0, 0)] = ONE;
        let a = decompose_tone(&v).unwrap();
        assert!(a.phi.iter().chain(&a.psi).all(|&x| x == 0.0), "{a:?}");
        let zero = AngleSet { phi: vec![0.0; 3], psi: vec![0.0; 3] };
        assert_eq!(reconstruct_tone(4, 1, &zero).unwrap(), v);
    }

    #[test]
    fn angle_ranges_and_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = random_semi_unitary(8, 4, &mut rng);
        let a = decompose_tone(&v).unwrap();
        assert_eq!((a.phi.len(), a.psi.len()), (22, 22));
        assert!(a.phi.iter().all(|&x| (0.0..TAU).contains(&x)));
        assert!(a.psi.iter().all(|&x| (0.0..=FRAC_PI_2).contains(&x)));
    }

    #[test]
    fn round_trip_4x2() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let v = random_semi_unitary(4, 2, &mut rng);
            let back = reconstruct_tone(4, 2, &decompose_tone(&v).unwrap()).unwrap();
            assert!(column_phase_aligned_error(&v, &back) < 1e-10);
        }
    }

    #[test]
    fn rejects_non_orthonormal_and_malformed() {
        let v = CMatrix::from_element(3, 1, ONE);
        assert!(matches!(decompose_tone(&v), Err(Error::NotOrthonormal(_))));
        let short = AngleSet { phi: vec![0.0], psi: vec![] };
        assert!(reconstruct_tone(3, 1, &short).is_err());
    }

    #[test]
    fn one_bit_phi_error_bounded_by_half_pi() {
        let mut worst = 0.0f64;
        for i in 0..10_000 {
            let phi = TAU * f64::from(i) / 10_000.0;
            let q = phi_from_code(phi_code(phi, 1), 1);
            let d = (q - phi).abs();
            worst = worst.max(d.min(TAU - d));
        }
        assert!(worst <= FRAC_PI_2 + 1e-12, "{worst}");
        assert!(worst > FRAC_PI_2 - 1e-3);
    }

    #[test]
    fn codes_stay_in_range() {
        for bits in 1..=9 {
            assert_eq!(phi_code(TAU - 1e-15, bits), (1 << bits) - 1);
            assert_eq!(psi_code(FRAC_PI_2, bits), (1 << bits) - 1);
            assert_eq!(phi_code(0.0, bits), 0);
        }
    }

    #[test]
    fn fine_quantization_approaches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = SteeringMatrix::new(vec![random_semi_unitary(8, 2, &mut rng)]);
        let report = givens_decompose(&v).unwrap();
        let mut last = f64::INFINITY;
        for bits in [4, 8, 12, 16, 20] {
            let vq = reconstruct(&quantize(&report, bits, bits).unwrap()).unwrap();
            let err = column_phase_aligned_error(&vq.tones[0], &v.tones[0]);
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn quantized_reconstruction_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = SteeringMatrix::new(vec![random_semi_unitary(8, 4, &mut rng)]);
        let q = quantize(&givens_decompose(&v).unwrap(), 4, 2).unwrap();
        assert!(reconstruct(&q).unwrap().orthonormality_error() < 1e-12);
    }

    #[test]
    fn codes_csv_has_one_row_per_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = SteeringMatrix::new(vec![random_semi_unitary(4, 2, &mut rng); 3]);
        let q = quantize(&givens_decompose(&v).unwrap(), 7, 5).unwrap();
        let mut buf = Vec::new();
        q.write_codes_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 10);
        let unquantized = givens_decompose(&v).unwrap();
        assert!(unquantized.write_codes_csv(Vec::new()).is_err());
    }
}
