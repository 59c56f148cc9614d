//! Covariate-dependent softmax weights over fixed mechanisms.
use hazardlab::classical_bridge::{clustering_distribution, ClusteringSpec};
use hazardlab::{aggregate_survival, selection_gap, CovariateValue, HazardShape, Mechanism, Result, TimeGrid};

fn main() -> Result<()> {
    let spec = ClusteringSpec {
        components: vec![
            Mechanism::new("low", HazardShape::exponential(0.3))?,
            Mechanism::new("mid", HazardShape::weibull(2.0, 2.0))?,
            Mechanism::new("high", HazardShape::exponential(2.0))?,
        ],
        weight_params: vec![vec![1.0, -1.0], vec![0.0, 0.0], vec![-1.0, 1.0]],
    };
    let grid = TimeGrid::uniform(5.0, 0.1)?;
    for x in [[0.0, 0.0], [1.0, -1.0], [-1.0, 2.0]] {
        let d = clustering_distribution(&spec, &CovariateValue::new(x.to_vec())?)?;
        let w: Vec<String> = d.atoms().iter().map(|a| format!("{:.3}", a.weight)).collect();
        println!(
            "x = {x:?}: weights [{}], S(2) = {:.4}, sup gap = {:.4}",
            w.join(", "),
            aggregate_survival(&d, &grid)?.at_nearest(2.0),
            selection_gap(&d, &grid)?.sup_norm()
        );
    }
    Ok(())
}
