//! LoS angular separation sweep on a coarse grid.

use mumimo::scenarios::{dominance_stats, sweep_separation, SeparationSweep, Simulation};

fn main() -> mumimo::Result<()> {
    let sim = Simulation::default();
    let sweep = SeparationSweep { step_deg: 10.0, ..SeparationSweep::default() };
    let curve = sweep_separation(&sim, &sweep, 50, 1)?;
    for p in &curve {
        let winner = if p.su_dominant { "SU" } else { "MU" };
        println!("{:>5.0} deg  MU/SU {:.3}  {winner}", p.separation_deg, p.mu_su_ratio);
    }
    let stats = dominance_stats(&curve)?;
    println!("SU dominates {:.1}% of separations", stats.su_dominant_percent);
    Ok(())
}
