//! Sounding airtime for an 8-antenna AP, 1x1 stations, both codebooks.

use mumimo::airtime::{overhead_table, Codebook, PhyTiming, SoundingConfig};

fn main() -> mumimo::Result<()> {
    let phy = PhyTiming::default();
    for cb in [Codebook::Zero, Codebook::One] {
        let cfg = SoundingConfig::default().with_codebook(cb);
        println!("codebook {cb}");
        for r in overhead_table(&cfg, &phy)? {
            println!(
                "  {} STA(s) {:>3}: {:>6} report bits, {:>7.1} us total, O = {:.3}",
                r.n_sta, r.feedback_type, r.report_bits, r.total_overhead_us, r.overhead_ratio
            );
        }
    }
    Ok(())
}
