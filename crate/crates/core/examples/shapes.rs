//! Hazard, cumulative hazard, survival and inverse for each shape.
use hazardlab::{HazardShape, Result};

fn main() -> Result<()> {
    let shapes = [
        ("exponential(0.5)", HazardShape::exponential(0.5)),
        ("weibull(2, 1.5)", HazardShape::weibull(2.0, 1.5)),
        ("log_logistic(3, 1)", HazardShape::log_logistic(3.0, 1.0)),
        ("piecewise", HazardShape::piecewise_constant(vec![1.0, 2.0], vec![0.2, 1.0, 0.5])),
        ("scaled(weibull, 3)", HazardShape::scaled(HazardShape::weibull(2.0, 1.5), 3.0)),
        ("time_scaled(weibull, 2)", HazardShape::time_scaled(HazardShape::weibull(2.0, 1.5), 2.0)),
        ("tabulated", HazardShape::tabulated(vec![0.0, 1.0, 5.0], vec![0.0, 1.0, 0.2])),
    ];
    println!("{:<24} {:>8} {:>8} {:>8} {:>10}", "shape", "h(1)", "H(1)", "S(1)", "H^-1(1)");
    for (name, s) in &shapes {
        println!(
            "{name:<24} {:>8.4} {:>8.4} {:>8.4} {:>10.4}",
            s.hazard_at(1.0)?,
            s.cumulative_hazard(1.0)?,
            s.survival_at(1.0)?,
            s.inverse_cumulative_hazard(1.0)?
        );
    }
    println!("\njson: {}", serde_json::to_string(&shapes[4].1).unwrap());
    Ok(())
}
