//! The observation operator: mixture survival, the survivor-weighted
//! observable hazard (ratio and log-derivative routes), the prior-weighted
//! mechanism-average hazard and the selection gap between them.
//!
//! Every grid point is evaluated independently with a fixed summation order,
//! so results do not depend on how many threads rayon uses.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::MechanismDistribution;
use crate::error::{HazardError, Result};

/// Strictly increasing sampling times starting at 0, at least 3 points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid(Vec<f64>);

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = HazardError;
    fn try_from(points: Vec<f64>) -> Result<Self> {
        TimeGrid::new(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.0
    }
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(HazardError::InvalidGrid(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        if points[0] != 0.0 {
            return Err(HazardError::InvalidGrid("first point must be 0".into()));
        }
        if points.iter().any(|t| !t.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HazardError::InvalidGrid(
                "points must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self(points))
    }

    /// `0, step, 2·step, …` up to `t_max` (included when it is a multiple of
    /// `step` up to rounding).
    pub fn uniform(t_max: f64, step: f64) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0 && step.is_finite() && step > 0.0) {
            return Err(HazardError::InvalidGrid(format!(
                "t_max and step must be positive, got t_max={t_max}, step={step}"
            )));
        }
        let n = (t_max / step + 1e-9).floor() as usize;
        Self::new((0..=n).map(|i| i as f64 * step).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = self.0.partition_point(|&x| x < t);
        if i == 0 {
            0
        } else if i >= self.0.len() {
            self.0.len() - 1
        } else if (self.0[i] - t).abs() < (t - self.0[i - 1]).abs() {
            i
        } else {
            i - 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Survival,
    Hazard,
    Gap,
    Ratio,
}

/// A function sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    grid: TimeGrid,
    values: Vec<f64>,
    kind: CurveKind,
}

/// Slack allowed on survival-curve invariants for floating-point round-off.
const CURVE_SLACK: f64 = 1e-12;

impl Curve {
    pub fn new(grid: TimeGrid, values: Vec<f64>, kind: CurveKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(HazardError::InvalidCurve(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        match kind {
            CurveKind::Survival => {
                if (values[0] - 1.0).abs() > CURVE_SLACK {
                    return Err(HazardError::InvalidCurve(format!(
                        "survival must be 1 at t = 0, got {}",
                        values[0]
                    )));
                }
                if let Some(i) = values
                    .iter()
                    .position(|v| !(*v >= -CURVE_SLACK && *v <= 1.0 + CURVE_SLACK))
                {
                    return Err(HazardError::InvalidCurve(format!(
                        "survival value {} at index {i} outside [0, 1]",
                        values[i]
                    )));
                }
                if let Some(i) = values.windows(2).position(|w| w[1] > w[0] + CURVE_SLACK) {
                    return Err(HazardError::InvalidCurve(format!(
                        "survival increases after index {i}"
                    )));
                }
            }
            CurveKind::Hazard => {
                if let Some(i) = values.iter().position(|v| !(*v >= 0.0)) {
                    return Err(HazardError::InvalidCurve(format!(
                        "hazard value {} at index {i} is negative",
                        values[i]
                    )));
                }
            }
            CurveKind::Gap | CurveKind::Ratio => {}
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn at_index(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Value at the grid point nearest to `t`.
    pub fn at_nearest(&self, t: f64) -> f64 {
        self.values[self.grid.nearest_index(t)]
    }

    /// Largest absolute difference and the time where it occurs.
    pub fn sup_distance(&self, other: &Curve) -> Result<(f64, f64)> {
        if self.grid != other.grid {
            return Err(HazardError::InvalidCurve("curves live on different grids".into()));
        }
        let mut best = (0.0, self.grid.points()[0]);
        for ((a, b), t) in self.values.iter().zip(&other.values).zip(self.grid.points()) {
            let d = (a - b).abs();
            if d > best.0 || d.is_nan() {
                best = (d, *t);
            }
        }
        Ok(best)
    }

    /// Largest absolute value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `t,value`, one row per grid point, shortest
    /// round-trip decimal representation.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (t, v) in self.grid.points().iter().zip(&self.values) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv_string())
    }
}

fn per_point<F>(grid: &TimeGrid, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync + Send,
{
    grid.points().par_iter().map(|&t| f(t)).collect()
}

fn survival_at(dist: &MechanismDistribution, t: f64) -> Result<f64> {
    dist.atoms()
        .iter()
        .map(|a| Ok(a.weight * a.mechanism.survival_at(t)?))
        .sum()
}

/// Posterior-weighted mean of the atom hazards at `t`.
fn observable_hazard_at(dist: &MechanismDistribution, t: f64) -> Result<f64> {
    if survival_at(dist, t)? <= 0.0 {
        return Err(HazardError::RiskSetExhausted(t));
    }
    let weights = dist.posterior_weights(t).map_err(|e| match e {
        HazardError::RiskSetEmpty(_) => HazardError::RiskSetExhausted(t),
        other => other,
    })?;
    let mut acc = 0.0;
    for (a, w) in dist.atoms().iter().zip(weights) {
        if w > 0.0 {
            acc += w * a.mechanism.hazard_at(t)?;
        }
    }
    Ok(acc)
}

fn mechanism_average_at(dist: &MechanismDistribution, t: f64) -> Result<f64> {
    dist.atoms()
        .iter()
        .map(|a| Ok(a.weight * a.mechanism.hazard_at(t)?))
        .sum()
}

/// `S(t|x) = Σ w_k S_k(t)`.
pub fn aggregate_survival(dist: &MechanismDistribution, grid: &TimeGrid) -> Result<Curve> {
    let values = per_point(grid, |t| survival_at(dist, t))?;
    Curve::new(grid.clone(), values, CurveKind::Survival)
}

/// `h_obs(t|x) = Σ w_k h_k(t) S_k(t) / Σ w_k S_k(t)`, evaluated as the
/// posterior-weighted mean hazard.
pub fn observable_hazard(dist: &MechanismDistribution, grid: &TimeGrid) -> Result<Curve> {
    let values = per_point(grid, |t| observable_hazard_at(dist, t))?;
    Curve::new(grid.clone(), values, CurveKind::Hazard)
}

/// `−d/dt log S(t|x)` by second-order finite differences of the aggregate
/// survival: three-point central on the interior, three-point one-sided at
/// both ends, with non-uniform spacing handled exactly.
pub fn observable_hazard_logderiv(dist: &MechanismDistribution, grid: &TimeGrid) -> Result<Curve> {
    let surv = aggregate_survival(dist, grid)?;
    let t = grid.points();
    if let Some(i) = surv.values().iter().position(|s| *s <= 0.0) {
        return Err(HazardError::RiskSetExhausted(t[i]));
    }
    let f: Vec<f64> = surv.values().iter().map(|s| -s.ln()).collect();
    let n = t.len();
    let derivative = |i: usize, j: usize, k: usize, at: usize| -> f64 {
        // Derivative at t[at] of the quadratic through (i, j, k).
        let (x0, x1, x2) = (t[i], t[j], t[k]);
        let x = t[at];
        let l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
        let l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
        let l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
        f[i] * l0 + f[j] * l1 + f[k] * l2
    };
    let values: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                derivative(0, 1, 2, 0)
            } else if i == n - 1 {
                derivative(n - 3, n - 2, n - 1, n - 1)
            } else {
                derivative(i - 1, i, i + 1, i)
            }
        })
        .collect();
    // Not validated as a hazard: finite differences may dip a hair below zero
    // on flat stretches.
    Ok(Curve {
        grid: grid.clone(),
        values,
        kind: CurveKind::Hazard,
    })
}

/// `h̄(t|x) = Σ w_k h_k(t)` with prior weights.
pub fn mechanism_average_hazard(dist: &MechanismDistribution, grid: &TimeGrid) -> Result<Curve> {
    let values = per_point(grid, |t| mechanism_average_at(dist, t))?;
    Curve::new(grid.clone(), values, CurveKind::Hazard)
}

/// `h̄ − h_obs` pointwise. Only computable when the mechanism distribution is
/// known, i.e. in simulation.
pub fn selection_gap(dist: &MechanismDistribution, grid: &TimeGrid) -> Result<Curve> {
    let values = per_point(grid, |t| {
        Ok(mechanism_average_at(dist, t)? - observable_hazard_at(dist, t)?)
    })?;
    Curve::new(grid.clone(), values, CurveKind::Gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hazard::{HazardShape, Mechanism};
    use approx::assert_abs_diff_eq;

    fn mech(label: &str, shape: HazardShape) -> Mechanism {
        Mechanism::new(label, shape).unwrap()
    }

    fn two_exp() -> MechanismDistribution {
        MechanismDistribution::finite_mixture(vec![
            (mech("a", HazardShape::exponential(1.0)), 0.5),
            (mech("b", HazardShape::exponential(2.0)), 0.5),
        ])
        .unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0, 2.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        let g = TimeGrid::uniform(5.0, 0.001).unwrap();
        assert_eq!(g.len(), 5001);
        assert_abs_diff_eq!(g.t_max(), 5.0, epsilon = 1e-12);
        assert_eq!(g.nearest_index(1.0004), 1000);
    }

    #[test]
    fn aggregate_examples() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 1.5]).unwrap();
        let pm = MechanismDistribution::point_mass(mech("e", HazardShape::exponential(2.0)));
        let s = aggregate_survival(&pm, &grid).unwrap();
        assert_abs_diff_eq!(s.at_index(2), (-3.0f64).exp(), epsilon = 1e-16);
        let s = aggregate_survival(&two_exp(), &grid).unwrap();
        assert_eq!(s.at_index(0), 1.0);
        let want = 0.5 * (-1.0f64).exp() + 0.5 * (-2.0f64).exp();
        assert_abs_diff_eq!(s.at_index(1), want, epsilon = 1e-16);
        assert_abs_diff_eq!(s.at_index(1), 0.2516073622, epsilon = 1e-10);
    }

    #[test]
    fn observable_hazard_examples() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 20.0]).unwrap();
        let h = observable_hazard(&two_exp(), &grid).unwrap();
        assert_abs_diff_eq!(h.at_index(0), 1.5, epsilon = 1e-15);
        // (e^-1 + 2 e^-2) / (e^-1 + e^-2)
        let e1 = (-1.0f64).exp();
        let e2 = (-2.0f64).exp();
        assert_abs_diff_eq!(h.at_index(1), (e1 + 2.0 * e2) / (e1 + e2), epsilon = 1e-15);
        assert!((h.at_index(2) - 1.0).abs() < 1e-3);
        let pm = MechanismDistribution::point_mass(mech("e", HazardShape::exponential(0.7)));
        let h = observable_hazard(&pm, &grid).unwrap();
        assert!(h.values().iter().all(|v| *v == 0.7));
    }

    #[test]
    fn logderiv_examples() {
        let grid = TimeGrid::uniform(3.0, 0.01).unwrap();
        let pm = MechanismDistribution::point_mass(mech("e", HazardShape::exponential(2.0)));
        let h = observable_hazard_logderiv(&pm, &grid).unwrap();
        for v in &h.values()[1..h.values().len() - 1] {
            assert_abs_diff_eq!(*v, 2.0, epsilon = 1e-6);
        }
        let w = MechanismDistribution::point_mass(mech("w", HazardShape::weibull(2.0, 1.0)));
        let h = observable_hazard_logderiv(&w, &grid).unwrap();
        assert_abs_diff_eq!(h.at_nearest(1.0), 2.0, epsilon = 1e-4);

        let fine = TimeGrid::uniform(5.0, 0.001).unwrap();
        let a = observable_hazard(&two_exp(), &fine).unwrap();
        let b = observable_hazard_logderiv(&two_exp(), &fine).unwrap();
        assert!(a.sup_distance(&b).unwrap().0 < 1e-5);
    }

    #[test]
    fn mechanism_average_examples() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 3.0]).unwrap();
        let h = mechanism_average_hazard(&two_exp(), &grid).unwrap();
        assert!(h.values().iter().all(|v| (*v - 1.5).abs() < 1e-15));
        let w = MechanismDistribution::point_mass(mech("w", HazardShape::weibull(2.0, 1.0)));
        let h = mechanism_average_hazard(&w, &grid).unwrap();
        assert_abs_diff_eq!(h.at_index(2), 6.0, epsilon = 1e-14);
        assert_eq!(h, observable_hazard(&w, &grid).unwrap());
    }

    #[test]
    fn selection_gap_examples() {
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        let gap = selection_gap(&two_exp(), &grid).unwrap();
        assert!(gap.at_index(0).abs() <= 1e-15);
        // 1.5 - 1.268941421 (hand evaluation of both formulas)
        assert_abs_diff_eq!(gap.at_index(1), 0.2310585786, epsilon = 1e-9);
        let pm = MechanismDistribution::point_mass(mech("w", HazardShape::weibull(1.5, 2.0)));
        let gap = selection_gap(&pm, &grid).unwrap();
        assert!(gap.sup_norm() == 0.0);
    }

    #[test]
    fn exhausted_risk_set_is_reported() {
        let dead = mech("d", HazardShape::exponential(1e300));
        let pm = MechanismDistribution::point_mass(dead);
        let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            observable_hazard(&pm, &grid),
            Err(HazardError::RiskSetExhausted(1.0))
        );
        assert!(matches!(
            observable_hazard_logderiv(&pm, &grid),
            Err(HazardError::RiskSetExhausted(_))
        ));
    }

    #[test]
    fn csv_export() {
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let pm = MechanismDistribution::point_mass(mech("e", HazardShape::exponential(1.0)));
        let csv = aggregate_survival(&pm, &grid).unwrap().to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,value"));
        assert_eq!(lines.next(), Some("0,1"));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row[1], (-0.5f64).exp());
    }
}
