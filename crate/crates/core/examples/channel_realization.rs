//! Draw one LoS realization for two stations and dump it as CSV.

use std::io::stdout;

use mumimo::channel::{ChannelModel, Regime, StaGeometry};

fn main() -> mumimo::Result<()> {
    let model = ChannelModel::default();
    let geometries = [StaGeometry::new(8.0, 0.0, 1), StaGeometry::new(8.0, 40.0, 1)];
    let prepared = model.prepare(&geometries, Regime::Los)?;
    for sta in 0..prepared.n_stas() {
        eprintln!("station {sta}: path loss {:.1} dB", prepared.pathloss_db(sta));
    }
    prepared.draw(7).write_csv(stdout().lock())
}
