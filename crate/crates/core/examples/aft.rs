//! Accelerated failure time draws and their error law.
use hazardlab::classical_bridge::{aft_error_cdf, aft_sample, AFTSpec};
use hazardlab::simulate::{dkw_bound, ks_distance, DKW_ALPHA};
use hazardlab::{CovariateValue, HazardShape, PositiveLaw, Result};

fn main() -> Result<()> {
    let x = CovariateValue::scalar(1.0)?;
    let n = 50_000;
    for u_law in [None, Some(PositiveLaw::Lognormal { mu_log: 0.0, sigma_log: 0.5 })] {
        let spec = AFTSpec { baseline: HazardShape::weibull(2.0, 1.0), beta: vec![0.7], u_law };
        let s = aft_sample(&spec, &x, n, 1)?;
        let mean = s.t.iter().sum::<f64>() / n as f64;
        let mut e = s.errors();
        let ks = ks_distance(&mut e, |z| aft_error_cdf(&spec, z))?;
        println!(
            "U = {:<40} a(x) = {:.4}  mean T = {mean:.4}  KS = {ks:.4} (band {:.4})",
            format!("{:?}", spec.u_law),
            s.acceleration,
            dkw_bound(n, DKW_ALPHA)
        );
    }
    Ok(())
}
