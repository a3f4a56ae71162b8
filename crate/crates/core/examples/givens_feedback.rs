//! Compress a beamforming matrix into Givens angles, quantize it with the SU
//! and MU bit widths and measure what the beamformer gets back.

use mumimo::airtime::{angle_bit_widths, Codebook, FeedbackType};
use mumimo::channel::{ChannelModel, Regime, StaGeometry};
use mumimo::linalg::chordal_distance;
use mumimo::precoding::{givens_decompose, quantize, reconstruct, svd_v, SteeringMatrix};

fn main() -> mumimo::Result<()> {
    let model = ChannelModel::default();
    let prepared = model.prepare(&[StaGeometry::new(20.0, 30.0, 2)], Regime::Nlos)?;
    let h = prepared.draw_sta(0, 11, 0);
    let v = SteeringMatrix::new(h.tones.iter().map(|t| svd_v(t, 2)).collect::<mumimo::Result<_>>()?);
    let report = givens_decompose(&v)?;
    println!("{} tones, {} phi + {} psi angles each", v.tones.len(), report.angles[0].phi.len(), report.angles[0].psi.len());

    for fb in [FeedbackType::Su, FeedbackType::Mu] {
        for cb in [Codebook::Zero, Codebook::One] {
            let (bp, bs) = angle_bit_widths(fb, cb);
            let back = reconstruct(&quantize(&report, bp, bs)?)?;
            let err: f64 = back.tones.iter().zip(&v.tones).map(|(a, b)| chordal_distance(a, b)).sum::<f64>()
                / v.tones.len() as f64;
            println!("{fb} codebook {cb}: ({bp}, {bs}) bits, mean chordal distance {err:.4}");
        }
    }
    Ok(())
}
