//! Classical survival models read as restrictions on the mechanism
//! distribution: proportional hazards, gamma frailty, accelerated failure
//! time, and covariate-dependent finite mixtures.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregate_survival, mechanism_average_hazard, observable_hazard, Curve, CurveKind, TimeGrid,
};
use crate::distribution::{
    discretize_positive_law, CovariateValue, MechanismDistribution, PositiveLaw, Provenance,
    QuadratureSpec,
};
use crate::error::{HazardError, Result};
use crate::hazard::{HazardShape, Mechanism};
use crate::simulate::{sample_event_time, subject_rng};

/// Condition numbers above this make shape recovery refuse to solve.
pub const MAX_CONDITION: f64 = 1e8;
/// Largest tolerated gap between frailty quadrature and its closed form.
pub const FRAILTY_CONSISTENCY_TOL: f64 = 1e-5;

/// Components `c_k h*(t)` mixed with weights `W[j][k]` at covariate point `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PHScenario {
    pub shared_shape: HazardShape,
    pub scale_factors: Vec<f64>,
    pub covariate_points: Vec<CovariateValue>,
    pub weight_matrix: Vec<Vec<f64>>,
}

impl PHScenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HazardError::InvalidScenario(m));
        self.shared_shape.validate()?;
        let k = self.scale_factors.len();
        if k == 0 {
            return bad("no scale factors".into());
        }
        if let Some(c) = self.scale_factors.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return bad(format!("scale factors must be positive, got {c}"));
        }
        if self.covariate_points.len() != k || self.weight_matrix.len() != k {
            return bad(format!(
                "{k} scale factors need {k} covariate points and {k} weight rows, got {} and {}",
                self.covariate_points.len(),
                self.weight_matrix.len()
            ));
        }
        for (j, row) in self.weight_matrix.iter().enumerate() {
            if row.len() != k {
                return bad(format!("weight row {j} has {} entries, expected {k}", row.len()));
            }
            if row.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return bad(format!("weight row {j} must be positive"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(HazardError::WeightSum(s));
            }
        }
        Ok(())
    }

    pub fn components(&self) -> Result<Vec<Mechanism>> {
        self.scale_factors
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                Mechanism::new(format!("component{}", k + 1), HazardShape::scaled(self.shared_shape.clone(), c))
            })
            .collect()
    }

    /// Row `j` of `W` as the prior mechanism distribution at covariate point `j`.
    pub fn distributions(&self) -> Result<Vec<(CovariateValue, MechanismDistribution)>> {
        self.validate()?;
        let comps = self.components()?;
        self.covariate_points
            .iter()
            .zip(&self.weight_matrix)
            .map(|(x, row)| {
                let pairs = comps.iter().cloned().zip(row.iter().copied()).collect();
                Ok((x.clone(), MechanismDistribution::finite_mixture(pairs)?))
            })
            .collect()
    }

    fn w(&self) -> DMatrix<f64> {
        let k = self.scale_factors.len();
        DMatrix::from_fn(k, k, |i, j| self.weight_matrix[i][j])
    }

    /// 2-norm condition number of `W`; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        let sv = self.w().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

/// Observable hazard ratio between two covariate points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRatio {
    pub i: usize,
    pub j: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// `max/min` of the ratio curve; 1 means exactly proportional.
    pub max_over_min: f64,
    /// Grid times skipped because a hazard was zero or not finite there.
    pub excluded_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PHAuditReport {
    pub covariates: Vec<CovariateValue>,
    pub pairs: Vec<PairRatio>,
    pub worst_max_over_min: f64,
}

/// Ratio audit of observable (survivor-weighted) hazards.
pub fn ph_audit(dists: &[(CovariateValue, MechanismDistribution)], grid: &TimeGrid) -> Result<PHAuditReport> {
    let curves = dists
        .par_iter()
        .map(|(x, d)| Ok((x.clone(), observable_hazard(d, grid)?)))
        .collect::<Result<Vec<_>>>()?;
    audit_hazard_ratios(&curves)
}

/// The same audit with prior weights held fixed over time, which is how the
/// proportional-hazards characterization treats `W`.
pub fn ph_audit_stylized(scenario: &PHScenario, grid: &TimeGrid) -> Result<PHAuditReport> {
    let curves = scenario
        .distributions()?
        .iter()
        .map(|(x, d)| Ok((x.clone(), mechanism_average_hazard(d, grid)?)))
        .collect::<Result<Vec<_>>>()?;
    audit_hazard_ratios(&curves)
}

/// Pairwise `max/min` of hazard ratio curves.
pub fn audit_hazard_ratios(curves: &[(CovariateValue, Curve)]) -> Result<PHAuditReport> {
    if curves.len() < 2 {
        return Err(HazardError::EmptyInput("audit needs at least two covariate points".into()));
    }
    let mut pairs = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let (a, b) = (&curves[i].1, &curves[j].1);
            if a.grid() != b.grid() {
                return Err(HazardError::InvalidGrid("hazard curves on different grids".into()));
            }
            let mut max_ratio = f64::NEG_INFINITY;
            let mut min_ratio = f64::INFINITY;
            let mut excluded_times = Vec::new();
            for ((&t, &ha), &hb) in a.times().iter().zip(a.values()).zip(b.values()) {
                let usable = |h: f64| h.is_finite() && h > 0.0;
                if usable(ha) && usable(hb) {
                    let r = ha / hb;
                    max_ratio = max_ratio.max(r);
                    min_ratio = min_ratio.min(r);
                } else {
                    excluded_times.push(t);
                }
            }
            let max_over_min = if min_ratio.is_finite() {
                max_ratio / min_ratio
            } else {
                f64::NAN
            };
            pairs.push(PairRatio {
                i,
                j,
                max_ratio,
                min_ratio,
                max_over_min,
                excluded_times,
            });
        }
    }
    let worst_max_over_min = pairs.iter().map(|p| p.max_over_min).fold(1.0, f64::max);
    Ok(PHAuditReport {
        covariates: curves.iter().map(|(x, _)| x.clone()).collect(),
        pairs,
        worst_max_over_min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PHRecovery {
    /// Component scales relative to the first.
    pub scales: Vec<f64>,
    /// Common shape, equal to 1 at `t_ref`.
    pub shape: Curve,
    pub condition_number: f64,
}

/// Inverts `g(t) = W h(t)` at every grid time, with `g` built from the
/// scenario's component hazards, and normalizes the solution.
pub fn ph_shape_recovery(scenario: &PHScenario, grid: &TimeGrid, t_ref: f64) -> Result<PHRecovery> {
    scenario.validate()?;
    let cond = scenario.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(HazardError::IllConditioned(cond));
    }
    let i_ref = grid.nearest_index(t_ref);
    if (grid.points()[i_ref] - t_ref).abs() > 1e-12 * t_ref.abs().max(1.0) {
        return Err(HazardError::InvalidGrid(format!("t_ref = {t_ref} is not a grid point")));
    }
    let h_ref = scenario.shared_shape.hazard_at(t_ref)?;
    if !(h_ref.is_finite() && h_ref > 0.0) {
        return Err(HazardError::InvalidScenario(format!(
            "shared hazard at t_ref = {t_ref} is {h_ref}; need a positive finite value"
        )));
    }
    let w = scenario.w();
    let lu = w.clone().lu();
    let c = DVector::from_column_slice(&scenario.scale_factors);
    let solved = grid
        .points()
        .iter()
        .map(|&t| {
            let h = &c * scenario.shared_shape.hazard_at(t)?;
            let g = &w * h;
            lu.solve(&g)
                .ok_or(HazardError::IllConditioned(f64::INFINITY))
        })
        .collect::<Result<Vec<DVector<f64>>>>()?;
    let at_ref = &solved[i_ref];
    let scales = at_ref.iter().map(|h| h / at_ref[0]).collect();
    let ref_sum = at_ref.sum();
    let shape = solved.iter().map(|h| h.sum() / ref_sum).collect();
    Ok(PHRecovery {
        scales,
        shape: Curve::new(grid.clone(), shape, CurveKind::Hazard)?,
        condition_number: cond,
    })
}

/// `h(t | x, z) = z h₀(t) exp(βᵀx)` with `Z ~ Gamma(mean 1, variance v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrailtySpec {
    pub baseline: HazardShape,
    pub beta: Vec<f64>,
    pub frailty_variance: f64,
}

impl FrailtySpec {
    pub fn validate(&self) -> Result<()> {
        self.baseline.validate()?;
        if !(self.frailty_variance.is_finite() && self.frailty_variance > 0.0) {
            return Err(HazardError::InvalidScenario(format!(
                "frailty variance must be positive, got {}",
                self.frailty_variance
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(HazardError::InvalidScenario("beta must be finite".into()));
        }
        Ok(())
    }

    fn link(&self, x: &CovariateValue) -> Result<f64> {
        Ok(x.dot(&self.beta)?.exp())
    }

    /// Closed-form marginal `(1 + v H₀(t) e^{βᵀx})^{−1/v}`.
    pub fn oracle_survival(&self, x: &CovariateValue, t: f64) -> Result<f64> {
        let v = self.frailty_variance;
        let h = self.baseline.cumulative_hazard(t)? * self.link(x)?;
        Ok((-(v * h).ln_1p() / v).exp())
    }
}

/// Gamma frailty discretized into mechanisms `Scaled(h₀, z e^{βᵀx})`.
pub fn frailty_distribution(spec: &FrailtySpec, x: &CovariateValue, quad: &QuadratureSpec) -> Result<MechanismDistribution> {
    spec.validate()?;
    let link = spec.link(x)?;
    let law = PositiveLaw::unit_mean_gamma(spec.frailty_variance);
    let d = discretize_positive_law(&law, quad, |z| {
        Mechanism::new(format!("frailty[z={z}]"), HazardShape::scaled(spec.baseline.clone(), z * link))
    })?;
    Ok(d.distribution)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrailtyCheck {
    pub curve: Curve,
    pub oracle: Curve,
    pub max_discrepancy: f64,
    pub argmax_t: f64,
}

/// Marginal survival with the default quadrature.
pub fn frailty_marginal_survival(spec: &FrailtySpec, x: &CovariateValue, grid: &TimeGrid) -> Result<FrailtyCheck> {
    frailty_marginal_survival_with(spec, x, grid, &QuadratureSpec::default())
}

/// Quadrature aggregate, cross-checked against the closed form.
pub fn frailty_marginal_survival_with(
    spec: &FrailtySpec,
    x: &CovariateValue,
    grid: &TimeGrid,
    quad: &QuadratureSpec,
) -> Result<FrailtyCheck> {
    let curve = aggregate_survival(&frailty_distribution(spec, x, quad)?, grid)?;
    let oracle = grid
        .points()
        .iter()
        .map(|&t| spec.oracle_survival(x, t))
        .collect::<Result<Vec<_>>>()?;
    let oracle = Curve::new(grid.clone(), oracle, CurveKind::Survival)?;
    let (max_discrepancy, argmax_t) = curve.sup_distance(&oracle)?;
    if max_discrepancy > FRAILTY_CONSISTENCY_TOL {
        return Err(HazardError::ConsistencyFailure(format!(
            "frailty quadrature differs from the closed form by {max_discrepancy:e} at t = {argmax_t}"
        )));
    }
    Ok(FrailtyCheck {
        curve,
        oracle,
        max_discrepancy,
        argmax_t,
    })
}

/// `T = a(x) U T₀` with `a(x) = exp(βᵀx)` and `T₀ ~ S₀`. No `u_law` means
/// `U ≡ 1`, the classical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AFTSpec {
    pub baseline: HazardShape,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub u_law: Option<PositiveLaw>,
}

impl AFTSpec {
    pub fn validate(&self) -> Result<()> {
        self.baseline.validate()?;
        if !self.baseline.has_unbounded_cumulative_hazard() {
            return Err(HazardError::DefectiveMechanism("AFT baseline".into()));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(HazardError::InvalidScenario("beta must be finite".into()));
        }
        if let Some(law) = &self.u_law {
            law.validate()?;
        }
        Ok(())
    }

    pub fn acceleration(&self, x: &CovariateValue) -> Result<f64> {
        Ok(x.dot(&self.beta)?.exp())
    }

    fn mechanism(&self, scale: f64) -> Result<Mechanism> {
        Mechanism::new(format!("aft[scale={scale}]"), HazardShape::time_scaled(self.baseline.clone(), scale))
    }
}

/// Mechanisms `TimeScaled(h₀, u a(x))` over quadrature nodes `u` of the `U` law.
pub fn aft_build_distribution(spec: &AFTSpec, x: &CovariateValue, quad: &QuadratureSpec) -> Result<MechanismDistribution> {
    spec.validate()?;
    let a = spec.acceleration(x)?;
    match &spec.u_law {
        None => Ok(MechanismDistribution::point_mass(spec.mechanism(a)?)),
        Some(law) => Ok(discretize_positive_law(law, quad, |u| spec.mechanism(u * a))?.distribution),
    }
}

/// Draws aligned by index. `t[i] = a(x) u[i] t0[i]` up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct AftSample {
    pub acceleration: f64,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub t0: Vec<f64>,
}

impl AftSample {
    /// `log T − log a(x) − log U`, which should follow the error law.
    pub fn errors(&self) -> Vec<f64> {
        let la = self.acceleration.ln();
        self.t.iter().zip(&self.u).map(|(t, u)| t.ln() - la - u.ln()).collect()
    }
}

/// Draw `i` uses its own stream. `T` comes from the mechanism
/// `TimeScaled(h₀, a(x) U)` alone; `T₀` reuses the same exponential draw.
pub fn aft_sample(spec: &AFTSpec, x: &CovariateValue, n: usize, seed: u64) -> Result<AftSample> {
    spec.validate()?;
    if n == 0 {
        return Err(HazardError::EmptyInput("aft_sample needs n >= 1".into()));
    }
    let a = spec.acceleration(x)?;
    let reference = Mechanism::new("reference", spec.baseline.clone())?;
    let draws = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(seed, 0, i as u32);
            let u = match &spec.u_law {
                Some(law) => law.sample(&mut rng),
                None => 1.0,
            };
            let m = Mechanism {
                label: "aft".to_string(),
                shape: HazardShape::time_scaled(spec.baseline.clone(), a * u),
            };
            // Both draws consume the same exponential; clone the stream.
            let mut rng0 = rng.clone();
            let t = sample_event_time(&m, &mut rng)?;
            let t0 = sample_event_time(&reference, &mut rng0)?;
            Ok((t, u, t0))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = AftSample {
        acceleration: a,
        t: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        t0: Vec::with_capacity(n),
    };
    for (t, u, t0) in draws {
        out.t.push(t);
        out.u.push(u);
        out.t0.push(t0);
    }
    Ok(out)
}

/// `P(ε_aft ≤ z) = 1 − S₀(e^z)`.
pub fn aft_error_cdf(spec: &AFTSpec, z: f64) -> Result<f64> {
    let t = z.exp();
    if t.is_infinite() {
        return Ok(1.0);
    }
    Ok(-(-spec.baseline.cumulative_hazard(t)?).exp_m1())
}

/// `π_k(x) = softmax(weight_params · x)_k` over fixed components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringSpec {
    pub components: Vec<Mechanism>,
    /// One row of coefficients per component.
    pub weight_params: Vec<Vec<f64>>,
}

impl ClusteringSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HazardError::InvalidScenario(m));
        if self.components.len() < 2 {
            return bad("clustering needs at least two components".into());
        }
        if self.weight_params.len() != self.components.len() {
            return bad(format!(
                "{} components but {} weight rows",
                self.components.len(),
                self.weight_params.len()
            ));
        }
        let d = self.weight_params[0].len();
        if self.weight_params.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
            return bad("weight rows must be finite and of equal length".into());
        }
        Ok(())
    }

    pub fn scores(&self, x: &CovariateValue) -> Result<Vec<f64>> {
        self.weight_params.iter().map(|row| x.dot(row)).collect()
    }
}

/// Finite mixture with softmax weights; components whose weight underflows
/// to zero are dropped.
pub fn clustering_distribution(spec: &ClusteringSpec, x: &CovariateValue) -> Result<MechanismDistribution> {
    spec.validate()?;
    let scores = spec.scores(x)?;
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = e.iter().sum();
    let pairs = spec
        .components
        .iter()
        .zip(&e)
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, w)| (m.clone(), w / total))
        .collect();
    Ok(MechanismDistribution::finite_mixture_normalized(pairs)?.with_provenance(Provenance::Clustering {
        x: x.values().to_vec(),
    }))
}
