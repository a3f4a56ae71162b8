//! Interference-free effective capacity against the number of stations.

use mumimo::airtime::{Codebook, PhyTiming, SoundingConfig};
use mumimo::capacity::{idealized_study, IdealizedMode, LinkBudget};

fn main() -> mumimo::Result<()> {
    let study = idealized_study(
        &SoundingConfig::default(),
        &PhyTiming::default(),
        &LinkBudget::default(),
        &IdealizedMode::default(),
        &[Codebook::Zero, Codebook::One],
        1,
    )?;
    for (p, _) in &study {
        println!(
            "{:<12} O = {:.3}  C = {:>7.2} Mb/s  C_eff = {:>7.2} Mb/s",
            p.scenario_id,
            p.overhead_ratio,
            p.mean_capacity_bps / 1e6,
            p.effective_capacity_bps / 1e6
        );
    }
    Ok(())
}
