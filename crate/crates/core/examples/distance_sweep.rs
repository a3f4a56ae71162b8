//! NLoS share of MU-dominant separations against distance.

use mumimo::scenarios::{sweep_distance, DistanceSweep, Simulation};

fn main() -> mumimo::Result<()> {
    let sim = Simulation::default();
    let sweep = DistanceSweep { n_separations: 12, ..DistanceSweep::default() };
    for p in sweep_distance(&sim, &sweep, 50, 1)? {
        println!(
            "{:>4} m  MU wins {:>2}/{}  SU {:>6.1} Mb/s  MU {:>6.1} Mb/s",
            p.distance_m,
            p.mu_dominant,
            p.n_separations,
            p.mean_su_capacity_bps / 1e6,
            p.mean_mu_capacity_bps / 1e6
        );
    }
    Ok(())
}
