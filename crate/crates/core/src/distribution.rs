//! Conditional mechanism distributions `P(Θ | X = x)` as finite weighted
//! collections of mechanisms, plus quadrature discretization of continuous
//! positive laws and the survivor-conditioned posterior update.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaSampler, LogNormal as LogNormalSampler};
use serde::{Deserialize, Deserializer, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{HazardError, Result};
use crate::hazard::{HazardShape, Mechanism};
use crate::quadrature::gauss_legendre;

/// Tolerance on the raw weight sum accepted by [`MechanismDistribution::finite_mixture`].
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Observed covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CovariateValue(Vec<f64>);

impl TryFrom<Vec<f64>> for CovariateValue {
    type Error = HazardError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        CovariateValue::new(values)
    }
}

impl From<CovariateValue> for Vec<f64> {
    fn from(x: CovariateValue) -> Self {
        x.0
    }
}

impl CovariateValue {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Self(values))
        } else {
            Err(HazardError::NonFiniteCovariate)
        }
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(vec![v])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `βᵀx`.
    pub fn dot(&self, beta: &[f64]) -> Result<f64> {
        if beta.len() != self.0.len() {
            return Err(HazardError::DimensionMismatch {
                expected: beta.len(),
                got: self.0.len(),
            });
        }
        Ok(beta.iter().zip(&self.0).map(|(b, x)| b * x).sum())
    }
}

impl fmt::Display for CovariateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::to_string(&self.0).unwrap_or_default())
    }
}

/// How a distribution was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Explicit,
    Quadrature {
        family: String,
    },
    Clustering {
        x: Vec<f64>,
    },
}

/// One Dirac atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub mechanism: Mechanism,
    pub weight: f64,
}

#[derive(Serialize)]
struct AtomView<'a> {
    label: &'a str,
    shape: &'a HazardShape,
    weight: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    label: String,
    shape: HazardShape,
    #[serde(deserialize_with = "positive_weight")]
    weight: f64,
}

fn positive_weight<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let w = f64::deserialize(d)?;
    if w.is_finite() && w > 0.0 {
        Ok(w)
    } else {
        Err(serde::de::Error::custom(format!(
            "weight must be positive and finite, got {w}"
        )))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    atoms: Vec<RawAtom>,
    #[serde(default)]
    provenance: Provenance,
}

impl TryFrom<RawDistribution> for MechanismDistribution {
    type Error = HazardError;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        let pairs = raw
            .atoms
            .into_iter()
            .map(|a| Ok((Mechanism::new(a.label, a.shape)?, a.weight)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MechanismDistribution::finite_mixture(pairs)?.with_provenance(raw.provenance))
    }
}

/// Finite atomic law over mechanisms. Weights are strictly positive and sum
/// to one; labels are pairwise distinct.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct MechanismDistribution {
    atoms: Vec<Atom>,
    provenance: Provenance,
}

impl Serialize for MechanismDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            atoms: Vec<AtomView<'a>>,
            provenance: &'a Provenance,
        }
        View {
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomView {
                    label: &a.mechanism.label,
                    shape: &a.mechanism.shape,
                    weight: a.weight,
                })
                .collect(),
            provenance: &self.provenance,
        }
        .serialize(s)
    }
}

impl MechanismDistribution {
    /// Builds a mixture whose weights already sum to one within
    /// [`WEIGHT_SUM_TOL`]; they are renormalized exactly.
    pub fn finite_mixture(pairs: Vec<(Mechanism, f64)>) -> Result<Self> {
        Self::build(pairs, false)
    }

    /// Builds a mixture from arbitrary positive weights, renormalizing them.
    pub fn finite_mixture_normalized(pairs: Vec<(Mechanism, f64)>) -> Result<Self> {
        Self::build(pairs, true)
    }

    pub fn point_mass(mechanism: Mechanism) -> Self {
        Self {
            atoms: vec![Atom {
                mechanism,
                weight: 1.0,
            }],
            provenance: Provenance::Explicit,
        }
    }

    fn build(pairs: Vec<(Mechanism, f64)>, renormalize: bool) -> Result<Self> {
        if pairs.is_empty() {
            return Err(HazardError::EmptyDistribution);
        }
        let mut seen = HashSet::new();
        for (m, w) in &pairs {
            if !(w.is_finite() && *w > 0.0) {
                return Err(HazardError::NonPositiveWeight {
                    label: m.label.clone(),
                    weight: *w,
                });
            }
            if !seen.insert(m.label.as_str()) {
                return Err(HazardError::DuplicateLabel(m.label.clone()));
            }
        }
        let total: f64 = pairs.iter().map(|(_, w)| w).sum();
        if !renormalize && (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(HazardError::WeightSum(total));
        }
        Ok(Self {
            atoms: pairs
                .into_iter()
                .map(|(mechanism, w)| Atom {
                    mechanism,
                    weight: w / total,
                })
                .collect(),
            provenance: Provenance::Explicit,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_point_mass(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn weight_of(&self, label: &str) -> Option<f64> {
        self.atoms
            .iter()
            .find(|a| a.mechanism.label == label)
            .map(|a| a.weight)
    }

    pub fn atom(&self, label: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.mechanism.label == label)
    }

    /// `λ·self + (1−λ)·other`, merging atoms that share a label.
    pub fn blend(&self, lambda: f64, other: &MechanismDistribution) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(HazardError::InvalidLaw(format!(
                "blend weight must lie in (0, 1), got {lambda}"
            )));
        }
        let mut pairs: Vec<(Mechanism, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.mechanism.clone(), lambda * a.weight))
            .collect();
        for a in &other.atoms {
            match pairs.iter_mut().find(|(m, _)| m.label == a.mechanism.label) {
                Some((m, w)) => {
                    if m.shape != a.mechanism.shape {
                        return Err(HazardError::DuplicateLabel(m.label.clone()));
                    }
                    *w += (1.0 - lambda) * a.weight;
                }
                None => pairs.push((a.mechanism.clone(), (1.0 - lambda) * a.weight)),
            }
        }
        Self::finite_mixture_normalized(pairs)
    }

    /// Survivor-conditioned update `w_k(t) ∝ w_k S_k(t)`; atoms with zero
    /// survival are dropped. Computed in log space so that deep tails do not
    /// underflow.
    pub fn posterior_given_survival(&self, t: f64) -> Result<Self> {
        let weights = self.posterior_weights(t)?;
        let atoms = self
            .atoms
            .iter()
            .zip(weights)
            .filter(|(_, w)| *w > 0.0)
            .map(|(a, weight)| Atom {
                mechanism: a.mechanism.clone(),
                weight,
            })
            .collect();
        Ok(Self {
            atoms,
            provenance: self.provenance.clone(),
        })
    }

    /// Posterior weights aligned with [`atoms`](Self::atoms); zero for atoms
    /// that cannot survive to `t`.
    pub fn posterior_weights(&self, t: f64) -> Result<Vec<f64>> {
        let logs = self
            .atoms
            .iter()
            .map(|a| Ok(a.weight.ln() - a.mechanism.cumulative_hazard(t)?))
            .collect::<Result<Vec<f64>>>()?;
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(HazardError::RiskSetEmpty(t));
        }
        let unnorm: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        Ok(unnorm.into_iter().map(|u| u / total).collect())
    }
}

/// Continuous positive laws used for frailties and time-scale factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PositiveLaw {
    Gamma { shape: f64, scale: f64 },
    Lognormal { mu_log: f64, sigma_log: f64 },
}

impl fmt::Display for PositiveLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositiveLaw::Gamma { shape, scale } => write!(f, "gamma(shape={shape}, scale={scale})"),
            PositiveLaw::Lognormal { mu_log, sigma_log } => {
                write!(f, "lognormal(mu_log={mu_log}, sigma_log={sigma_log})")
            }
        }
    }
}

impl PositiveLaw {
    /// Gamma law with mean 1 and variance `v`.
    pub fn unit_mean_gamma(variance: f64) -> Self {
        PositiveLaw::Gamma {
            shape: 1.0 / variance,
            scale: variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PositiveLaw::Gamma { shape, scale } => {
                shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0
            }
            PositiveLaw::Lognormal { mu_log, sigma_log } => {
                mu_log.is_finite() && sigma_log.is_finite() && sigma_log > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(HazardError::InvalidLaw(self.to_string()))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            PositiveLaw::Gamma { shape, scale } => shape * scale,
            PositiveLaw::Lognormal { mu_log, sigma_log } => (mu_log + 0.5 * sigma_log * sigma_log).exp(),
        }
    }

    pub fn ln_pdf(&self, u: f64) -> f64 {
        match *self {
            PositiveLaw::Gamma { shape, scale } => gamma_law(shape, scale).ln_pdf(u),
            PositiveLaw::Lognormal { mu_log, sigma_log } => {
                let z = (u.ln() - mu_log) / sigma_log;
                -0.5 * z * z - u.ln() - sigma_log.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
        }
    }

    /// `x` with `P(U ≤ x) = p`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.tail_quantile(p, false)
    }

    /// `x` with `P(U > x) = q`; accurate for tiny `q`.
    pub fn upper_quantile(&self, q: f64) -> f64 {
        self.tail_quantile(q, true)
    }

    fn tail_quantile(&self, p: f64, upper: bool) -> f64 {
        match *self {
            PositiveLaw::Lognormal { mu_log, sigma_log } => {
                let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p);
                let z = if upper { -z } else { z };
                (mu_log + sigma_log * z).exp()
            }
            PositiveLaw::Gamma { shape, scale } => {
                // Increasing in y = ln x.
                let f = |y: f64| {
                    let x = y.exp();
                    if upper {
                        p - gamma_sf(shape, scale, x)
                    } else {
                        gamma_cdf(shape, scale, x) - p
                    }
                };
                let centre = (shape * scale).ln();
                let (mut lo, mut hi) = (centre - 1.0, centre + 1.0);
                while f(lo) > 0.0 && lo > -745.0 {
                    lo -= 2.0 * (hi - lo);
                }
                while f(hi) < 0.0 && hi < 709.0 {
                    hi += 2.0 * (hi - lo);
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if f(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (0.5 * (lo + hi)).exp()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PositiveLaw::Gamma { shape, scale } => GammaSampler::new(shape, scale)
                .expect("validated gamma parameters")
                .sample(rng),
            PositiveLaw::Lognormal { mu_log, sigma_log } => LogNormalSampler::new(mu_log, sigma_log)
                .expect("validated lognormal parameters")
                .sample(rng),
        }
    }
}

fn gamma_law(shape: f64, scale: f64) -> Gamma {
    Gamma::new(shape, 1.0 / scale).expect("validated gamma parameters")
}

// statrs flushes the regularized incomplete gamma to zero for arguments below
// machine epsilon, which is where the low quantiles of small-shape laws live.
const SMALL_GAMMA_ARG: f64 = 1e-8;

/// `P(a, z)` by its power series, for `z` well below `a + 1`.
fn lower_gamma_series(a: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 1.0;
    while term > 1e-17 * sum {
        term *= z / (a + n);
        sum += term;
        n += 1.0;
    }
    (a * z.ln() - z - ln_gamma(a + 1.0)).exp() * sum
}

fn gamma_cdf(shape: f64, scale: f64, x: f64) -> f64 {
    let z = x / scale;
    if z < SMALL_GAMMA_ARG {
        lower_gamma_series(shape, z)
    } else {
        gamma_law(shape, scale).cdf(x)
    }
}

fn gamma_sf(shape: f64, scale: f64, x: f64) -> f64 {
    let z = x / scale;
    if z < SMALL_GAMMA_ARG {
        1.0 - lower_gamma_series(shape, z)
    } else {
        gamma_law(shape, scale).sf(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    GaussLegendre,
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuadratureDomain {
    /// Identity transform on `[a, b]`.
    Interval { a: f64, b: f64 },
    /// Log transform on `(0, ∞)` truncated to the quantile range `[q_lo, q_hi]`.
    LogQuantile { q_lo: f64, q_hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    pub nodes: usize,
    pub domain: QuadratureDomain,
}

impl Default for QuadratureSpec {
    /// 64 Gauss–Legendre nodes in log space over the `[1e-6, 1 − 1e-6]`
    /// quantile range.
    fn default() -> Self {
        Self::log_gauss_legendre(64, 1e-6, 1.0 - 1e-6)
    }
}

impl QuadratureSpec {
    pub fn log_gauss_legendre(nodes: usize, q_lo: f64, q_hi: f64) -> Self {
        Self {
            rule: QuadratureRule::GaussLegendre,
            nodes,
            domain: QuadratureDomain::LogQuantile { q_lo, q_hi },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 {
            return Err(HazardError::InvalidQuadrature(format!(
                "at least 8 nodes required, got {}",
                self.nodes
            )));
        }
        match self.domain {
            QuadratureDomain::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && a < b) {
                    return Err(HazardError::InvalidQuadrature(format!(
                        "interval [{a}, {b}] must satisfy 0 <= a < b"
                    )));
                }
            }
            QuadratureDomain::LogQuantile { q_lo, q_hi } => {
                if !(0.0 < q_lo && q_lo < q_hi && q_hi < 1.0) {
                    return Err(HazardError::InvalidQuadrature(format!(
                        "quantile range must satisfy 0 < q_lo < q_hi < 1, got [{q_lo}, {q_hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reference nodes and weights on `[-1, 1]`.
    fn reference_rule(&self) -> (Vec<f64>, Vec<f64>) {
        match self.rule {
            QuadratureRule::GaussLegendre => gauss_legendre(self.nodes),
            QuadratureRule::Midpoint => {
                let h = 2.0 / self.nodes as f64;
                (
                    (0..self.nodes).map(|i| -1.0 + h * (i as f64 + 0.5)).collect(),
                    vec![h; self.nodes],
                )
            }
        }
    }
}

/// Result of discretizing a continuous law.
#[derive(Debug, Clone)]
pub struct Discretized {
    pub distribution: MechanismDistribution,
    /// Support points, aligned with the distribution's atoms.
    pub support: Vec<f64>,
    /// `|1 − Σ raw weights|` before renormalization: truncation plus
    /// quadrature error.
    pub defect: f64,
}

/// Discretizes `law` with `spec`, lifting each support point through `lift`.
pub fn discretize_positive_law<F>(law: &PositiveLaw, spec: &QuadratureSpec, lift: F) -> Result<Discretized>
where
    F: Fn(f64) -> Result<Mechanism>,
{
    law.validate()?;
    spec.validate()?;
    let (xs, ws) = spec.reference_rule();
    let mut points = Vec::with_capacity(xs.len());
    match spec.domain {
        QuadratureDomain::Interval { a, b } => {
            let (half, mid) = (0.5 * (b - a), 0.5 * (a + b));
            for (x, w) in xs.iter().zip(&ws) {
                let u = mid + half * x;
                points.push((u, half * w * law.ln_pdf(u).exp()));
            }
        }
        QuadratureDomain::LogQuantile { q_lo, q_hi } => {
            let lo = law.quantile(q_lo).ln();
            let hi = law.upper_quantile(1.0 - q_hi).ln();
            let (half, mid) = (0.5 * (hi - lo), 0.5 * (hi + lo));
            for (x, w) in xs.iter().zip(&ws) {
                let y = mid + half * x;
                let u = y.exp();
                points.push((u, half * w * (law.ln_pdf(u) + y).exp()));
            }
        }
    }
    let total: f64 = points.iter().map(|(_, w)| w).sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(HazardError::InvalidLaw(format!(
            "quadrature of {law} produced total mass {total}"
        )));
    }
    let mut pairs = Vec::with_capacity(points.len());
    let mut support = Vec::with_capacity(points.len());
    for (u, w) in points {
        if w > 0.0 && u > 0.0 {
            pairs.push((lift(u)?, w));
            support.push(u);
        }
    }
    let distribution = MechanismDistribution::finite_mixture_normalized(pairs)?.with_provenance(
        Provenance::Quadrature {
            family: format!("{law}; {:?} x{}", spec.rule, spec.nodes),
        },
    );
    Ok(Discretized {
        distribution,
        support,
        defect: (1.0 - total).abs(),
    })
}
