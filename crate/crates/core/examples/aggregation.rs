//! Aggregate survival, observable and mechanism-average hazards, and the
//! selection gap of a two-exponential mixture.
use hazardlab::{
    aggregate_survival, mechanism_average_hazard, observable_hazard, selection_gap, HazardShape, Mechanism,
    MechanismDistribution, Result, TimeGrid,
};

fn main() -> Result<()> {
    let d = MechanismDistribution::finite_mixture(vec![
        (Mechanism::new("slow", HazardShape::exponential(1.0))?, 0.5),
        (Mechanism::new("fast", HazardShape::exponential(2.0))?, 0.5),
    ])?;
    let grid = TimeGrid::uniform(4.0, 0.5)?;
    let s = aggregate_survival(&d, &grid)?;
    let h = observable_hazard(&d, &grid)?;
    let avg = mechanism_average_hazard(&d, &grid)?;
    let gap = selection_gap(&d, &grid)?;
    println!("{:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "t", "S", "h_obs", "h_avg", "gap", "w_slow");
    for (i, &t) in grid.points().iter().enumerate() {
        let w = d.posterior_weights(t)?[0];
        println!(
            "{t:>5.1} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {w:>9.5}",
            s.values()[i],
            h.values()[i],
            avg.values()[i],
            gap.values()[i]
        );
    }
    Ok(())
}
