//! Gamma frailty by quadrature against the Laplace-transform closed form.
use hazardlab::classical_bridge::{frailty_distribution, frailty_marginal_survival, FrailtySpec};
use hazardlab::{observable_hazard, CovariateValue, HazardShape, QuadratureSpec, Result, TimeGrid};

fn main() -> Result<()> {
    let grid = TimeGrid::uniform(10.0, 0.01)?;
    let x = CovariateValue::scalar(1.0)?;
    for v in [0.25, 1.0, 4.0] {
        let spec = FrailtySpec { baseline: HazardShape::exponential(1.0), beta: vec![0.5], frailty_variance: v };
        let r = frailty_marginal_survival(&spec, &x, &grid)?;
        let h = observable_hazard(&frailty_distribution(&spec, &x, &QuadratureSpec::default())?, &grid)?;
        println!(
            "v = {v:<4} sup error {:.2e} at t = {:<5} h_obs(0) = {:.4}, h_obs(10) = {:.4}",
            r.max_discrepancy,
            r.argmax_t,
            h.values()[0],
            h.values()[grid.len() - 1]
        );
    }
    Ok(())
}
