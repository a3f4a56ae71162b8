//! SU/MU decision grid over scenarios and CSI configurations.

use mumimo::scenarios::{guideline_table, GuidelineSettings, Simulation};

fn main() -> mumimo::Result<()> {
    let table = guideline_table(&Simulation::default(), &GuidelineSettings::default(), 50, 1)?;
    print!("{}", table.render());
    println!("MU-MIMO on in {} of {} cells", table.on_count(), table.cells.len());
    Ok(())
}
