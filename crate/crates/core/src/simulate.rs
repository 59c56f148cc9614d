//! Event-time simulation from mechanism distributions and a Kaplan–Meier
//! oracle.
//!
//! Every subject gets its own ChaCha8 stream keyed by `(seed, cohort index,
//! index within cohort)`, so output is independent of thread scheduling and
//! growing one cohort never reshuffles another.

use std::io::Write;

use rand::distributions::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate_survival, Curve, CurveKind, TimeGrid};
use crate::distribution::{CovariateValue, MechanismDistribution};
use crate::error::{HazardError, Result};
use crate::hazard::{invert_by_bisection, Mechanism};

/// Significance level of the DKW band used by the verifiers.
pub const DKW_ALPHA: f64 = 0.001;

/// One simulated subject. `mechanism_label` is ground truth that real data
/// would never carry.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub subject_id: u64,
    pub covariate: CovariateValue,
    pub time: f64,
    pub event: bool,
    pub mechanism_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Censoring {
    #[default]
    None,
    Exponential { rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cohort {
    pub covariate: CovariateValue,
    pub distribution: MechanismDistribution,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub cohorts: Vec<Cohort>,
    #[serde(default)]
    pub censoring: Censoring,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.cohorts.is_empty() {
            return Err(HazardError::InvalidScenario("no cohorts".into()));
        }
        for (i, c) in self.cohorts.iter().enumerate() {
            if c.count == 0 {
                return Err(HazardError::InvalidScenario(format!(
                    "cohort {i} has count 0"
                )));
            }
            if let Some(a) = c
                .distribution
                .atoms()
                .iter()
                .find(|a| !a.mechanism.shape.has_unbounded_cumulative_hazard())
            {
                return Err(HazardError::DefectiveMechanism(a.mechanism.label.clone()));
            }
        }
        if let Censoring::Exponential { rate } = self.censoring {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(HazardError::InvalidScenario(format!(
                    "censoring rate must be positive, got {rate}"
                )));
            }
        }
        Ok(())
    }

    pub fn total_count(&self) -> usize {
        self.cohorts.iter().map(|c| c.count).sum()
    }
}

/// Generator for subject `index` of cohort `cohort`.
pub fn subject_rng(seed: u64, cohort: u32, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cohort as u64) << 32) | index as u64);
    rng
}

/// Inverse-transform draw `H⁻¹(E)` with `E` unit exponential. Takes no
/// covariate: given the mechanism, the event time does not depend on `x`.
pub fn sample_event_time<R: Rng + ?Sized>(m: &Mechanism, rng: &mut R) -> Result<f64> {
    if !m.shape.has_unbounded_cumulative_hazard() {
        return Err(HazardError::DefectiveMechanism(m.label.clone()));
    }
    loop {
        let e: f64 = Exp1.sample(rng);
        let t = m.inverse_cumulative_hazard(e)?;
        if t > 0.0 {
            return Ok(t);
        }
    }
}

/// Draw straight from the aggregate law `S(t) = Σ w_k S_k(t)`, skipping the
/// mechanism stage.
pub fn sample_from_aggregate<R: Rng + ?Sized>(dist: &MechanismDistribution, rng: &mut R) -> Result<f64> {
    let e: f64 = Exp1.sample(rng);
    let cumulative = |t: f64| -> Result<f64> {
        let mut s = 0.0;
        for a in dist.atoms() {
            s += a.weight * a.mechanism.survival_at(t)?;
        }
        Ok(-s.ln())
    };
    invert_by_bisection(cumulative, e)
}

fn generate_cohort(
    cohort: &Cohort,
    cohort_index: u32,
    first_id: u64,
    censoring: Censoring,
    seed: u64,
) -> Result<Vec<EventRecord>> {
    let atoms = cohort.distribution.atoms();
    let picker = WeightedIndex::new(atoms.iter().map(|a| a.weight))
        .map_err(|e| HazardError::InvalidScenario(e.to_string()))?;
    let censor = match censoring {
        Censoring::None => None,
        Censoring::Exponential { rate } => {
            Some(Exp::new(rate).map_err(|e| HazardError::InvalidScenario(e.to_string()))?)
        }
    };
    (0..cohort.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(seed, cohort_index, i as u32);
            let atom = &atoms[picker.sample(&mut rng)];
            let t = sample_event_time(&atom.mechanism, &mut rng)?;
            let (time, event) = match &censor {
                Some(c) => {
                    let c = c.sample(&mut rng);
                    if t <= c {
                        (t, true)
                    } else {
                        (c, false)
                    }
                }
                None => (t, true),
            };
            Ok(EventRecord {
                subject_id: first_id + i as u64,
                covariate: cohort.covariate.clone(),
                time,
                event,
                mechanism_label: atom.mechanism.label.clone(),
            })
        })
        .collect()
}

/// All subjects, cohort by cohort, with ids `0..n`.
pub fn generate_dataset(s: &Scenario) -> Result<Vec<EventRecord>> {
    Ok(generate_by_cohort(s)?.into_iter().flatten().collect())
}

fn generate_by_cohort(s: &Scenario) -> Result<Vec<Vec<EventRecord>>> {
    s.validate()?;
    let mut next_id = 0u64;
    let mut out = Vec::with_capacity(s.cohorts.len());
    for (k, c) in s.cohorts.iter().enumerate() {
        out.push(generate_cohort(c, k as u32, next_id, s.censoring, s.seed)?);
        next_id += c.count as u64;
    }
    Ok(out)
}

pub fn write_dataset_csv<W: Write>(records: &[EventRecord], out: W) -> Result<()> {
    let io = |e: csv::Error| HazardError::InvalidScenario(format!("writing dataset: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "covariate_json", "time", "event", "mechanism_label"])
        .map_err(io)?;
    for r in records {
        w.write_record([
            r.subject_id.to_string(),
            r.covariate.to_string(),
            r.time.to_string(),
            if r.event { "1" } else { "0" }.to_string(),
            r.mechanism_label.clone(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| HazardError::InvalidScenario(format!("writing dataset: {e}")))?;
    Ok(())
}

/// Right-continuous product-limit step function.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeier {
    /// Distinct event times, increasing.
    pub event_times: Vec<f64>,
    /// Survival just after each event time.
    pub survival: Vec<f64>,
    pub n: usize,
    pub last_time: f64,
}

impl KaplanMeier {
    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    pub fn on_grid(&self, grid: &TimeGrid) -> Result<Curve> {
        let values = grid.points().iter().map(|&t| self.survival_at(t)).collect();
        Curve::new(grid.clone(), values, CurveKind::Survival)
    }
}

/// Product-limit estimator; at tied times events leave the risk set before
/// censorings do.
pub fn kaplan_meier(records: &[EventRecord]) -> Result<KaplanMeier> {
    if records.is_empty() {
        return Err(HazardError::EmptyInput("Kaplan-Meier needs at least one record".into()));
    }
    let mut obs: Vec<(f64, bool)> = records.iter().map(|r| (r.time, r.event)).collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut at_risk = obs.len();
    let mut s = 1.0;
    let mut event_times = Vec::new();
    let mut survival = Vec::new();
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut deaths = 0;
        let mut j = i;
        while j < obs.len() && obs[j].0 == t {
            if obs[j].1 {
                deaths += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            event_times.push(t);
            survival.push(s);
        }
        at_risk -= j - i;
        i = j;
    }
    Ok(KaplanMeier {
        event_times,
        survival,
        n: obs.len(),
        last_time: obs[obs.len() - 1].0,
    })
}

/// Two-sided DKW half-width `sqrt(ln(2/α) / (2n))`.
pub fn dkw_bound(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and
/// `cdf`. Sorts `samples` in place.
pub fn ks_distance<F: Fn(f64) -> Result<f64>>(samples: &mut [f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(HazardError::EmptyInput("no samples".into()));
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x)?;
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// `P̂(T > t)` on the grid from uncensored draws.
pub fn empirical_survival(samples: &[f64], grid: &TimeGrid) -> Result<Curve> {
    if samples.is_empty() {
        return Err(HazardError::EmptyInput("no samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let values = grid
        .points()
        .iter()
        .map(|&t| 1.0 - sorted.partition_point(|&s| s <= t) as f64 / n)
        .collect();
    Curve::new(grid.clone(), values, CurveKind::Survival)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortCheck {
    pub covariate: CovariateValue,
    pub n: usize,
    pub max_abs_gap: f64,
    pub argmax_t: f64,
    pub dkw_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentationReport {
    pub cohorts: Vec<CohortCheck>,
    pub max_abs_gap: f64,
    /// Bound of the smallest cohort.
    pub dkw_bound: f64,
    pub alpha: f64,
    /// False under censoring: the DKW band then no longer applies and the
    /// comparison is only indicative.
    pub strict: bool,
    pub pass: bool,
}

/// Compares each cohort's Kaplan–Meier curve with the analytic aggregate
/// survival of its generating distribution.
pub fn verify_representation(s: &Scenario, grid: &TimeGrid) -> Result<RepresentationReport> {
    let data = generate_by_cohort(s)?;
    let mut cohorts = Vec::with_capacity(data.len());
    for (c, records) in s.cohorts.iter().zip(&data) {
        let analytic = aggregate_survival(&c.distribution, grid)?;
        cohorts.push(compare_km(records, &analytic, c.covariate.clone())?);
    }
    let max_abs_gap = cohorts.iter().map(|c| c.max_abs_gap).fold(0.0, f64::max);
    let dkw = cohorts.iter().map(|c| c.dkw_bound).fold(0.0, f64::max);
    let pass = cohorts.iter().all(|c| c.pass);
    Ok(RepresentationReport {
        cohorts,
        max_abs_gap,
        dkw_bound: dkw,
        alpha: DKW_ALPHA,
        strict: s.censoring == Censoring::None,
        pass,
    })
}

/// Kaplan–Meier of `records` against an analytic survival curve.
pub fn compare_km(records: &[EventRecord], analytic: &Curve, covariate: CovariateValue) -> Result<CohortCheck> {
    let km = kaplan_meier(records)?.on_grid(analytic.grid())?;
    let (gap, at) = km.sup_distance(analytic)?;
    let bound = dkw_bound(records.len(), DKW_ALPHA);
    Ok(CohortCheck {
        covariate,
        n: records.len(),
        max_abs_gap: gap,
        argmax_t: at,
        dkw_bound: bound,
        pass: gap <= bound,
    })
}
