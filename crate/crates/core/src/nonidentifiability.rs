//! Families of distinct mechanism distributions with identical aggregate
//! survival.
//!
//! A [`PerturbationFamily`] perturbs a reference mechanism θ₀ to θ(ε) with
//! `S_θ(ε)(t) = S_θ₀(t)(1 + ε g(t))`. Moving mass η off θ₀ onto the two-point
//! mixture `α δ_θ(ε) + (1−α) δ_θ(ε′)` with `ε′ = −α ε / (1−α)` leaves the
//! aggregate survival unchanged because `α ε + (1−α) ε′ = 0`.

use serde::Serialize;

use crate::aggregation::{aggregate_survival, observable_hazard, Curve, TimeGrid};
use crate::distribution::MechanismDistribution;
use crate::error::{HazardError, Result};
use crate::hazard::{HazardShape, Mechanism};

/// Admissible perturbation direction `g` around a reference mechanism,
/// validated on a working grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFamily {
    theta0: Mechanism,
    grid: TimeGrid,
    g: Vec<f64>,
    delta: f64,
}

impl PerturbationFamily {
    /// Checks that `t ↦ S_θ₀(t)(1 + ε g(t))` is a valid survival curve at
    /// `ε = ±delta`; both the values and their grid differences are linear
    /// in ε, so the endpoints cover every `|ε| ≤ delta`.
    pub fn new(theta0: Mechanism, g: Vec<f64>, delta: f64, grid: TimeGrid) -> Result<Self> {
        if g.len() != grid.len() {
            return Err(HazardError::InvalidPerturbation(format!(
                "g has {} values for {} grid points",
                g.len(),
                grid.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(HazardError::InvalidPerturbation("g must be bounded (finite)".into()));
        }
        if g[0] != 0.0 {
            return Err(HazardError::InvalidPerturbation(format!(
                "g(0) must be 0 so that S(0) = 1 for every epsilon, got {}",
                g[0]
            )));
        }
        if g.iter().all(|v| *v == 0.0) {
            return Err(HazardError::InvalidPerturbation(
                "g must not be identically zero".into(),
            ));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(HazardError::InvalidPerturbation(format!(
                "delta must be positive, got {delta}"
            )));
        }
        let family = Self {
            theta0,
            grid,
            g,
            delta,
        };
        family.check_validity(-delta)?;
        family.check_validity(delta)?;
        Ok(family)
    }

    fn check_validity(&self, eps: f64) -> Result<()> {
        let t = self.grid.points();
        let fail = |index: usize, condition: &str| HazardError::PerturbationValidity {
            epsilon: eps,
            index,
            t: t[index],
            condition: condition.to_string(),
        };
        let base = self.theta0.survival_at_grid(&self.grid)?;
        let mut prev = f64::INFINITY;
        for i in 0..t.len() {
            let factor = 1.0 + eps * self.g[i];
            if factor <= 0.0 {
                return Err(fail(i, "positivity: 1 + eps*g(t) must stay above 0"));
            }
            let s = base[i] * factor;
            if !(0.0..=1.0).contains(&s) {
                return Err(fail(i, "[0,1] bound"));
            }
            if s > prev {
                return Err(fail(i, "monotonicity: survival increases"));
            }
            prev = s;
        }
        // Hazard h₀ − ε g′/(1 + ε g) at both ends of each panel.
        for i in 0..t.len() - 1 {
            let slope = (self.g[i + 1] - self.g[i]) / (t[i + 1] - t[i]);
            for j in [i, i + 1] {
                let h = self.theta0.hazard_at(t[j])? - eps * slope / (1.0 + eps * self.g[j]);
                if h < -1e-12 {
                    return Err(fail(j, "nonnegative hazard between grid points"));
                }
            }
        }
        Ok(())
    }

    pub fn theta0(&self) -> &Mechanism {
        &self.theta0
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Last grid time; validity is checked up to here, and `g` is held at its
    /// final value beyond it.
    pub fn verified_horizon(&self) -> f64 {
        self.grid.t_max()
    }

    /// Materializes θ(ε). `ε = 0` returns θ₀ itself.
    pub fn theta(&self, epsilon_perturb: f64) -> Result<Mechanism> {
        if !(epsilon_perturb.abs() <= self.delta) {
            return Err(HazardError::InvalidPerturbation(format!(
                "|epsilon| = {} exceeds delta = {}",
                epsilon_perturb.abs(),
                self.delta
            )));
        }
        if epsilon_perturb == 0.0 {
            return Ok(self.theta0.clone());
        }
        Mechanism::new(
            format!("{}[eps={}]", self.theta0.label, epsilon_perturb),
            HazardShape::Perturbed {
                base: Box::new(self.theta0.shape.clone()),
                grid: self.grid.points().to_vec(),
                g: self.g.clone(),
                epsilon_perturb,
            },
        )
    }
}

/// Same as [`PerturbationFamily::new`].
pub fn make_perturbation(
    theta0: Mechanism,
    g_values: Vec<f64>,
    delta: f64,
    grid: TimeGrid,
) -> Result<PerturbationFamily> {
    PerturbationFamily::new(theta0, g_values, delta, grid)
}

impl Mechanism {
    fn survival_at_grid(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        grid.points().iter().map(|&t| self.survival_at(t)).collect()
    }
}

/// Inputs of the mass-replacement construction.
#[derive(Debug, Clone)]
pub struct CounterexampleSpec {
    mu0: MechanismDistribution,
    family: PerturbationFamily,
    alpha: f64,
    eta: f64,
    epsilons: Vec<f64>,
}

impl CounterexampleSpec {
    pub fn new(
        mu0: MechanismDistribution,
        family: PerturbationFamily,
        alpha: f64,
        eta: f64,
        epsilons: Vec<f64>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(HazardError::InvalidCounterexample(msg));
        if !(alpha > 0.0 && alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        let theta0 = family.theta0();
        let Some(atom) = mu0.atom(&theta0.label) else {
            return bad(format!("mu0 has no atom labelled `{}`", theta0.label));
        };
        if atom.mechanism.shape != theta0.shape {
            return bad(format!(
                "mu0 atom `{}` does not match the family's reference mechanism",
                theta0.label
            ));
        }
        if !(eta > 0.0) {
            return bad(format!("eta must be positive, got {eta}"));
        }
        if eta > atom.weight {
            return Err(HazardError::EtaExceedsAtom {
                eta,
                weight: atom.weight,
            });
        }
        if epsilons.is_empty() {
            return bad("at least one epsilon is required".into());
        }
        let spec = Self {
            mu0,
            family,
            alpha,
            eta,
            epsilons,
        };
        let dp = spec.delta_prime();
        for (i, &e) in spec.epsilons.iter().enumerate() {
            if e == 0.0 || !(e.abs() < dp) {
                return bad(format!(
                    "epsilon {e} must be nonzero and inside (-{dp}, {dp})"
                ));
            }
            for &f in &spec.epsilons[..i] {
                if f == e {
                    return bad(format!("epsilon {e} is repeated"));
                }
                if f == spec.epsilon_prime(e) && e == spec.epsilon_prime(f) {
                    return bad(format!(
                        "epsilons {f} and {e} produce the same two-point mixture"
                    ));
                }
            }
        }
        Ok(spec)
    }

    /// `δ′ = min(δ, (1−α)/α · δ)`.
    pub fn delta_prime(&self) -> f64 {
        let d = self.family.delta();
        d.min((1.0 - self.alpha) / self.alpha * d)
    }

    /// `ε′ = −α ε / (1−α)`.
    pub fn epsilon_prime(&self, epsilon_perturb: f64) -> f64 {
        -self.alpha / (1.0 - self.alpha) * epsilon_perturb
    }

    pub fn mu0(&self) -> &MechanismDistribution {
        &self.mu0
    }

    pub fn family(&self) -> &PerturbationFamily {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    /// `μ₀ − η δ_θ₀ + η (α δ_θ(ε) + (1−α) δ_θ(partner))`. The construction
    /// uses `partner = ε′`; other partners serve as negative controls.
    pub fn mass_replacement(&self, epsilon_perturb: f64, partner: f64) -> Result<MechanismDistribution> {
        let theta0 = &self.family.theta0().label;
        let mut pairs: Vec<(Mechanism, f64)> = Vec::with_capacity(self.mu0.len() + 2);
        for a in self.mu0.atoms() {
            let w = if &a.mechanism.label == theta0 {
                a.weight - self.eta
            } else {
                a.weight
            };
            if w > 0.0 {
                pairs.push((a.mechanism.clone(), w));
            }
        }
        pairs.push((self.family.theta(epsilon_perturb)?, self.eta * self.alpha));
        pairs.push((self.family.theta(partner)?, self.eta * (1.0 - self.alpha)));
        MechanismDistribution::finite_mixture(pairs)
    }
}

/// `μ_ε` for every ε in the spec, in order.
pub fn construct_counterexamples(spec: &CounterexampleSpec) -> Result<Vec<MechanismDistribution>> {
    spec.epsilons
        .iter()
        .map(|&e| spec.mass_replacement(e, spec.epsilon_prime(e)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub max_abs_deviation: f64,
    pub argmax_t: f64,
    /// Indices of the pair attaining the maximum.
    pub pair: (usize, usize),
}

/// Largest pairwise deviation between aggregate survival curves.
pub fn verify_equivalence(dists: &[MechanismDistribution], grid: &TimeGrid) -> Result<EquivalenceReport> {
    if dists.len() < 2 {
        return Err(HazardError::EmptyInput(
            "equivalence needs at least two distributions".into(),
        ));
    }
    let curves = dists
        .iter()
        .map(|d| aggregate_survival(d, grid))
        .collect::<Result<Vec<Curve>>>()?;
    max_pairwise(&curves)
}

fn max_pairwise(curves: &[Curve]) -> Result<EquivalenceReport> {
    let mut report = EquivalenceReport {
        max_abs_deviation: 0.0,
        argmax_t: 0.0,
        pair: (0, 1),
    };
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let (d, t) = curves[i].sup_distance(&curves[j])?;
            if d > report.max_abs_deviation {
                report = EquivalenceReport {
                    max_abs_deviation: d,
                    argmax_t: t,
                    pair: (i, j),
                };
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistinctnessReport {
    /// Hausdorff distance between the two supports, measuring paths by the
    /// sup-norm of their survival curves over the grid.
    pub sup_path_gap: f64,
    /// Total variation between the atomic measures, atoms matched by label.
    pub tv_distance: f64,
}

pub fn path_distinctness(
    a: &MechanismDistribution,
    b: &MechanismDistribution,
    grid: &TimeGrid,
) -> Result<DistinctnessReport> {
    let mut tv = 0.0;
    for atom in a.atoms() {
        tv += (atom.weight - b.weight_of(&atom.mechanism.label).unwrap_or(0.0)).abs();
    }
    for atom in b.atoms() {
        if a.weight_of(&atom.mechanism.label).is_none() {
            tv += atom.weight;
        }
    }

    let paths = |d: &MechanismDistribution| -> Result<Vec<(String, Vec<f64>)>> {
        d.atoms()
            .iter()
            .map(|x| Ok((x.mechanism.label.clone(), x.mechanism.survival_at_grid(grid)?)))
            .collect()
    };
    let (pa, pb) = (paths(a)?, paths(b)?);
    let sup = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let directed = |from: &[(String, Vec<f64>)], to: &[(String, Vec<f64>)]| {
        from.iter()
            .filter(|(label, _)| !to.iter().any(|(l, _)| l == label))
            .map(|(_, s)| to.iter().map(|(_, r)| sup(s, r)).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    Ok(DistinctnessReport {
        sup_path_gap: directed(&pa, &pb).max(directed(&pb, &pa)),
        tv_distance: 0.5 * tv,
    })
}

/// Pairwise statistic between distributions `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairValue {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Everything the demonstration checks, for one spec on one grid. Index 0 is
/// μ₀; index `k ≥ 1` is μ_ε for the `k`-th epsilon.
#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub epsilons: Vec<f64>,
    pub epsilon_primes: Vec<f64>,
    pub alpha: f64,
    pub eta: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub max_deviation: f64,
    pub argmax_t: f64,
    pub observable_hazard_max_deviation: f64,
    pub tv_distances: Vec<PairValue>,
    pub sup_path_gaps: Vec<PairValue>,
    pub min_tv_distance: f64,
    pub tv_lower_bound: f64,
    /// Deviation from μ₀ when the first ε is paired with `ε′/2` instead of
    /// `ε′`, leaving a residual `η α ε g S₀ / 2`.
    pub negative_control_deviation: f64,
    pub verified_horizon: f64,
}

pub struct Demonstration {
    pub report: CounterexampleReport,
    pub distributions: Vec<MechanismDistribution>,
    pub survival_curves: Vec<Curve>,
}

/// Builds the family, runs equivalence and distinctness checks and the
/// corrupted-partner negative control.
pub fn demonstrate(spec: &CounterexampleSpec, grid: &TimeGrid) -> Result<Demonstration> {
    let mut dists = vec![spec.mu0().clone()];
    dists.extend(construct_counterexamples(spec)?);
    let curves = dists
        .iter()
        .map(|d| aggregate_survival(d, grid))
        .collect::<Result<Vec<_>>>()?;
    let eq = max_pairwise(&curves)?;

    let hazards = dists
        .iter()
        .map(|d| observable_hazard(d, grid))
        .collect::<Result<Vec<_>>>()?;
    let hz = max_pairwise(&hazards)?;

    let mut tv_distances = Vec::new();
    let mut sup_path_gaps = Vec::new();
    for i in 0..dists.len() {
        for j in i + 1..dists.len() {
            let r = path_distinctness(&dists[i], &dists[j], grid)?;
            tv_distances.push(PairValue { i, j, value: r.tv_distance });
            sup_path_gaps.push(PairValue { i, j, value: r.sup_path_gap });
        }
    }
    let min_tv_distance = tv_distances
        .iter()
        .filter(|p| p.i > 0)
        .map(|p| p.value)
        .fold(f64::INFINITY, f64::min);

    let e = spec.epsilons()[0];
    let corrupted = spec.mass_replacement(e, 0.5 * spec.epsilon_prime(e))?;
    let negative_control_deviation =
        verify_equivalence(&[spec.mu0().clone(), corrupted], grid)?.max_abs_deviation;

    let report = CounterexampleReport {
        epsilons: spec.epsilons().to_vec(),
        epsilon_primes: spec.epsilons().iter().map(|&e| spec.epsilon_prime(e)).collect(),
        alpha: spec.alpha(),
        eta: spec.eta(),
        delta: spec.family().delta(),
        delta_prime: spec.delta_prime(),
        max_deviation: eq.max_abs_deviation,
        argmax_t: eq.argmax_t,
        observable_hazard_max_deviation: hz.max_abs_deviation,
        tv_distances,
        sup_path_gaps,
        min_tv_distance,
        tv_lower_bound: spec.alpha().min(1.0 - spec.alpha()) * spec.eta(),
        negative_control_deviation,
        verified_horizon: spec.family().verified_horizon(),
    };
    Ok(Demonstration {
        report,
        distributions: dists,
        survival_curves: curves,
    })
}

/// `g(t) = amplitude · t · e^{−rate·t}` sampled on the grid.
pub fn t_exp_direction(grid: &TimeGrid, amplitude: f64, rate: f64) -> Vec<f64> {
    grid.points()
        .iter()
        .map(|&t| amplitude * t * (-rate * t).exp())
        .collect()
}

/// The stock example: θ₀ = Exp(1), `g(t) = 0.5 t e^{−t}`, δ = 0.5,
/// μ₀ = {θ₀: 0.6, Exp(2): 0.4}, η = 0.2, ε ∈ {0.4, 0.3, 0.2, 0.1, 0.05}.
pub fn default_demonstration(grid: &TimeGrid, alpha: f64) -> Result<CounterexampleSpec> {
    let theta0 = Mechanism::new("theta0", HazardShape::exponential(1.0))?;
    let fast = Mechanism::new("fast", HazardShape::exponential(2.0))?;
    let mu0 = MechanismDistribution::finite_mixture(vec![(theta0.clone(), 0.6), (fast, 0.4)])?;
    let family = PerturbationFamily::new(theta0, t_exp_direction(grid, 0.5, 1.0), 0.5, grid.clone())?;
    CounterexampleSpec::new(mu0, family, alpha, 0.2, vec![0.4, 0.3, 0.2, 0.1, 0.05])
}
