//! Acceptance run: one line per criterion, nonzero exit on any unexpected
//! failure. Criteria listed in `KNOWN_UNATTAINABLE` still run and still print
//! FAIL when they fail, but do not fail the process.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hazardlab::aggregation::{
    aggregate_survival, observable_hazard, observable_hazard_logderiv, selection_gap, TimeGrid,
};
use hazardlab::classical_bridge::{
    aft_error_cdf, aft_sample, frailty_distribution, frailty_marginal_survival, ph_audit,
    ph_shape_recovery, AFTSpec, FrailtySpec, PHScenario,
};
use hazardlab::distribution::{CovariateValue, MechanismDistribution, PositiveLaw, QuadratureSpec};
use hazardlab::hazard::{HazardShape, Mechanism};
use hazardlab::nonidentifiability::{construct_counterexamples, default_demonstration, demonstrate};
use hazardlab::simulate::{
    dkw_bound, ks_distance, verify_representation, Censoring, Cohort, Scenario, DKW_ALPHA,
};
use hazardlab::HazardError;

/// Criterion 3 asks the sup selection gap of the (1−p, p) Exp(1)/Exp(2)
/// mixture to fall below 1e-3 at p = 0.01; the gap tends to p(λ₂ − λ₁) ≈ 0.01.
const KNOWN_UNATTAINABLE: &[u32] = &[3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, HazardError> {
    Ok(Outcome { pass, detail })
}

fn x(v: f64) -> CovariateValue {
    CovariateValue::scalar(v).unwrap()
}

fn exp_mech(label: &str, rate: f64) -> Mechanism {
    Mechanism::new(label, HazardShape::exponential(rate)).unwrap()
}

fn two_exp(p: f64) -> MechanismDistribution {
    MechanismDistribution::finite_mixture(vec![(exp_mech("exp1", 1.0), 1.0 - p), (exp_mech("exp2", 2.0), p)]).unwrap()
}

fn representation() -> Result<Outcome, HazardError> {
    let grid = TimeGrid::uniform(5.0, 0.01)?;
    let s = Scenario {
        cohorts: vec![Cohort { covariate: x(0.0), distribution: two_exp(0.5), count: 100_000 }],
        censoring: Censoring::None,
        seed: 2023,
    };
    let r = verify_representation(&s, &grid)?;
    outcome(
        r.pass,
        format!("KM gap {:.5} vs DKW(0.001) {:.5} at n=1e5", r.max_abs_gap, r.dkw_bound),
    )
}

fn hazard_routes() -> Result<Outcome, HazardError> {
    let grid = TimeGrid::uniform(5.0, 0.001)?;
    let frailty = FrailtySpec { baseline: HazardShape::exponential(1.0), beta: vec![0.0], frailty_variance: 1.0 };
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, d) in [
        ("two-exp", two_exp(0.5)),
        ("frailty v=1", frailty_distribution(&frailty, &x(0.0), &QuadratureSpec::default())?),
    ] {
        let (gap, _) = observable_hazard(&d, &grid)?.sup_distance(&observable_hazard_logderiv(&d, &grid)?)?;
        worst = worst.max(gap);
        parts.push(format!("{name} {gap:.2e}"));
    }
    outcome(worst <= 1e-4, format!("ratio vs log-derivative sup: {} (tol 1e-4)", parts.join(", ")))
}

fn selection_gap_checks() -> Result<Outcome, HazardError> {
    let grid = TimeGrid::uniform(10.0, 0.01)?;
    let half = selection_gap(&two_exp(0.5), &grid)?;
    let at0 = half.values()[0].abs();
    let at1 = half.at_nearest(1.0);
    let mut point_sup = 0.0f64;
    for shape in [
        HazardShape::exponential(0.7),
        HazardShape::weibull(2.0, 1.5),
        HazardShape::log_logistic(1.5, 2.0),
        HazardShape::piecewise_constant(vec![1.0, 3.0], vec![0.5, 2.0, 1.0]),
    ] {
        let pm = MechanismDistribution::point_mass(Mechanism::new("pm", shape)?);
        point_sup = point_sup.max(selection_gap(&pm, &grid)?.sup_norm());
    }
    let sups = [0.4, 0.2, 0.1, 0.05, 0.01]
        .iter()
        .map(|&p| Ok(selection_gap(&two_exp(p), &grid)?.sup_norm()))
        .collect::<Result<Vec<f64>, HazardError>>()?;
    let monotone = sups.windows(2).all(|w| w[1] < w[0]);
    let last = sups[sups.len() - 1];
    let pass = at0 <= 1e-12 && at1 >= 0.2 && point_sup <= 1e-12 && monotone && last < 1e-3;
    outcome(
        pass,
        format!(
            "gap(0)={at0:.1e} gap(1)={at1:.6} point-mass sup={point_sup:.1e} sup along p: [{}] monotone={monotone}, final < 1e-3: {}",
            sups.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "),
            last < 1e-3
        ),
    )
}

fn nonidentifiability() -> Result<Outcome, HazardError> {
    let grid = TimeGrid::uniform(10.0, 0.01)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.25, 0.5] {
        let spec = default_demonstration(&grid, alpha)?;
        let d = demonstrate(&spec, &grid)?;
        let r = &d.report;
        let distinct = d.distributions.len() - 1;
        // every pair among the family, μ₀ included
        let min_tv = r.tv_distances.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        let ok = distinct >= 5
            && min_tv >= r.tv_lower_bound
            && r.max_deviation <= 1e-10
            && r.negative_control_deviation > 1e-4
            && r.observable_hazard_max_deviation <= 1e-8;
        pass &= ok;
        parts.push(format!(
            "alpha={alpha}: {distinct} members, min TV {min_tv:.3} >= {:.3}, S dev {:.1e}, h dev {:.1e}, control {:.1e}",
            r.tv_lower_bound, r.max_deviation, r.observable_hazard_max_deviation, r.negative_control_deviation
        ));
    }
    outcome(pass, parts.join("; "))
}

fn indistinguishability() -> Result<Outcome, HazardError> {
    let grid = TimeGrid::uniform(10.0, 0.01)?;
    let spec = default_demonstration(&grid, 0.25)?;
    let family = construct_counterexamples(&spec)?;
    let mu_eps = family[1].clone(); // ε = 0.3
    let analytic = aggregate_survival(spec.mu0(), &grid)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, d) in [("mu0", spec.mu0().clone()), ("mu_0.3", mu_eps)] {
        let s = Scenario {
            cohorts: vec![Cohort { covariate: x(0.0), distribution: d, count: 100_000 }],
            censoring: Censoring::None,
            seed: 77,
        };
        // Compare each sample against μ₀'s curve, not its own.
        let data = hazardlab::simulate::generate_dataset(&s)?;
        let c = hazardlab::simulate::compare_km(&data, &analytic, x(0.0))?;
        let own = verify_representation(&s, &grid)?;
        pass &= c.pass && own.pass;
        parts.push(format!("{name} gap {:.5}", c.max_abs_gap));
    }
    outcome(
        pass,
        format!("{} vs DKW {:.5} against the same analytic curve", parts.join(", "), dkw_bound(100_000, DKW_ALPHA)),
    )
}

fn random_weights(k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let mut row: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            row[j] += k as f64;
            let s: f64 = row.iter().sum();
            row.iter().map(|v| v / s).collect()
        })
        .collect()
}

fn ph_recovery() -> Result<Outcome, HazardError> {
    let grid = TimeGrid::uniform(3.0, 0.01)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for k in [2usize, 3, 5] {
        for shape in [HazardShape::weibull(2.0, 1.0), HazardShape::log_logistic(1.5, 1.0), HazardShape::exponential(1.0)] {
            let c: Vec<f64> = (0..k).map(|i| if i == 0 { 1.0 } else { rng.gen_range(0.2..6.0) }).collect();
            let s = PHScenario {
                shared_shape: shape.clone(),
                scale_factors: c.clone(),
                covariate_points: (0..k).map(|i| x(i as f64)).collect(),
                weight_matrix: random_weights(k, &mut rng),
            };
            let r = ph_shape_recovery(&s, &grid, 1.0)?;
            for (got, want) in r.scales.iter().zip(&c) {
                worst = worst.max(((got - want) / want).abs());
            }
            let h_ref = shape.hazard_at(1.0)?;
            for (&t, &v) in grid.points().iter().zip(r.shape.values()) {
                let want = shape.hazard_at(t)? / h_ref;
                let err = if want > 0.0 { ((v - want) / want).abs() } else { v.abs() };
                worst = worst.max(err);
            }
        }
    }
    let singular = PHScenario {
        shared_shape: HazardShape::exponential(1.0),
        scale_factors: vec![1.0, 3.0],
        covariate_points: vec![x(0.0), x(1.0)],
        weight_matrix: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
    };
    let rejected = matches!(ph_shape_recovery(&singular, &grid, 1.0), Err(HazardError::IllConditioned(_)));
    let updated = PHScenario {
        shared_shape: HazardShape::exponential(1.0),
        scale_factors: vec![1.0, 3.0],
        covariate_points: vec![x(0.0), x(1.0)],
        weight_matrix: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
    };
    let audit = ph_audit(&updated.distributions()?, &TimeGrid::uniform(5.0, 0.01)?)?;
    outcome(
        worst <= 1e-8 && rejected && audit.worst_max_over_min > 1.01,
        format!(
            "max rel error {worst:.1e} (K=2,3,5), singular rejected={rejected}, survivor-updated max/min {:.4}",
            audit.worst_max_over_min
        ),
    )
}

fn frailty() -> Result<Outcome, HazardError> {
    let grid = TimeGrid::uniform(10.0, 0.01)?;
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for v in [0.25, 1.0, 4.0] {
        let spec = FrailtySpec { baseline: HazardShape::exponential(1.0), beta: vec![0.5], frailty_variance: v };
        let r = frailty_marginal_survival(&spec, &x(1.0), &grid)?;
        worst = worst.max(r.max_discrepancy);
        parts.push(format!("v={v}: {:.1e}", r.max_discrepancy));
    }
    let spec = FrailtySpec { baseline: HazardShape::exponential(1.0), beta: vec![0.0], frailty_variance: 1.0 };
    let h = observable_hazard(&frailty_distribution(&spec, &x(0.0), &QuadratureSpec::default())?, &grid)?;
    let decreasing = h.values().windows(2).all(|w| w[1] < w[0]);
    outcome(
        worst <= 1e-6 && decreasing,
        format!("sup |quadrature - closed form| {} (tol 1e-6); v=1 hazard strictly decreasing={decreasing}", parts.join(", ")),
    )
}

fn aft() -> Result<Outcome, HazardError> {
    let n = 100_000;
    let bound = dkw_bound(n, DKW_ALPHA);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (hname, h0) in [("Exp(1)", HazardShape::exponential(1.0)), ("Weibull(2,1)", HazardShape::weibull(2.0, 1.0))] {
        for (uname, u) in [("U=1", None), ("U~LN(0,0.5)", Some(PositiveLaw::Lognormal { mu_log: 0.0, sigma_log: 0.5 }))] {
            let spec = AFTSpec { baseline: h0.clone(), beta: vec![0.7], u_law: u };
            let s = aft_sample(&spec, &x(1.0), n, 8)?;
            let mut e = s.errors();
            let d = ks_distance(&mut e, |z| aft_error_cdf(&spec, z))?;
            worst = worst.max(d);
            parts.push(format!("{hname}/{uname} {d:.5}"));
        }
    }
    outcome(worst <= bound, format!("KS of log-errors: {} vs DKW {bound:.5}", parts.join(", ")))
}

fn shape_algebra() -> Result<Outcome, HazardError> {
    let mut shapes = Vec::new();
    for r in [0.1, 1.0, 3.0] {
        shapes.push(HazardShape::exponential(r));
    }
    for k in [0.5, 1.0, 2.0, 3.5] {
        for l in [0.5, 2.0] {
            shapes.push(HazardShape::weibull(k, l));
            shapes.push(HazardShape::log_logistic(k, l));
        }
    }
    shapes.push(HazardShape::piecewise_constant(vec![1.0, 2.5], vec![0.3, 1.2, 0.6]));
    let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.025).collect();
    let targets = [1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0];
    let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * b.abs().max(1.0);
    let mut failures = Vec::new();
    let mut worst_inverse = 0.0f64;
    for s in &shapes {
        if s.survival_at(0.0)? != 1.0 {
            failures.push(format!("{s:?}: S(0) != 1"));
        }
        let hs: Vec<f64> = times.iter().map(|&t| s.cumulative_hazard(t)).collect::<Result<_, _>>()?;
        if hs.windows(2).any(|w| w[1] < w[0]) {
            failures.push(format!("{s:?}: H not monotone"));
        }
        for &u in &targets {
            let t = s.inverse_cumulative_hazard(u)?;
            let back = s.cumulative_hazard(t)?;
            let err = (back - u).abs() / u.max(1.0);
            worst_inverse = worst_inverse.max(err);
            if err > 1e-8 {
                failures.push(format!("{s:?}: H(H^-1({u})) = {back}"));
            }
        }
        for c in [0.3, 2.0] {
            let sc = HazardShape::scaled(s.clone(), c);
            let ts = HazardShape::time_scaled(s.clone(), c);
            for &t in times.iter().skip(1) {
                let ok = close(sc.hazard_at(t)?, c * s.hazard_at(t)?, 1e-12)
                    && close(sc.cumulative_hazard(t)?, c * s.cumulative_hazard(t)?, 1e-12)
                    && close(ts.cumulative_hazard(t)?, s.cumulative_hazard(t / c)?, 1e-12)
                    && close(ts.hazard_at(t)?, s.hazard_at(t / c)? / c, 1e-12)
                    && close(ts.survival_at(t)?, s.survival_at(t / c)?, 1e-12);
                if !ok {
                    failures.push(format!("{s:?}: scaling identity at t={t}, c={c}"));
                    break;
                }
            }
        }
    }
    let n = shapes.len();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{n} shapes: S(0)=1, H monotone, worst inverse error {worst_inverse:.1e}, scaling identities within 1e-12")
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
    )
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

/// Every command, twice, from identical configs (thread counts differ
/// between runs); all CSV outputs must match byte for byte.
fn determinism() -> Result<Outcome, HazardError> {
    let root = tempfile::tempdir().unwrap();
    let inputs = root.path().join("inputs");
    std::fs::create_dir(&inputs).unwrap();
    let two = r#"{"atoms":[{"label":"a","shape":{"kind":"exponential","rate":1.0},"weight":0.5},{"label":"b","shape":{"kind":"exponential","rate":2.0},"weight":0.5}]}"#;
    write(&inputs, "aggregate.json", &format!(r#"{{"distribution":{two},"grid":{{"t_max":5,"step":0.01}}}}"#));
    let ph = r#"{"shared_shape":{"kind":"weibull","shape":2.0,"scale":1.0},"scale_factors":[1.0,3.0],"covariate_points":[[0.0],[1.0]],"weight_matrix":[[0.7,0.3],[0.4,0.6]]}"#;
    write(&inputs, "ph-audit.json", &format!(r#"{{"ph_scenario":{ph}}}"#));
    write(&inputs, "ph-recover.json", &format!(r#"{{"ph_scenario":{ph},"t_ref":1.0}}"#));
    write(&inputs, "frailty.json", r#"{"frailty":{"baseline":{"kind":"exponential","rate":1.0},"beta":[0.5],"frailty_variance":1.0},"covariate":[1.0]}"#);
    write(&inputs, "aft.json", r#"{"aft":{"baseline":{"kind":"weibull","shape":2.0,"scale":1.0},"beta":[0.7],"u_law":{"kind":"lognormal","mu_log":0.0,"sigma_log":0.5}},"covariate":[1.0],"n":20000,"seed":3}"#);
    write(&inputs, "clustering.json", r#"{"clustering":{"components":[{"label":"slow","shape":{"kind":"exponential","rate":0.5}},{"label":"fast","shape":{"kind":"exponential","rate":2.0}}],"weight_params":[[1.0],[0.0]]},"covariates":[[0.0],[1.0]]}"#);
    let sim = format!(
        r#"{{"cohorts":[{{"covariate":[0.0],"distribution":{two},"count":20000}},{{"covariate":[1.0],"distribution":{two},"count":5000}}],"censoring":{{"kind":"exponential","rate":0.2}},"seed":11}}"#
    );
    write(&inputs, "simulate.json", &sim);
    write(&inputs, "verify.json", &sim.replace(r#""censoring":{"kind":"exponential","rate":0.2},"#, ""));

    let runs: &[(&str, Option<&str>)] = &[
        ("aggregate", Some("aggregate.json")),
        ("gap", Some("aggregate.json")),
        ("counterexample", None),
        ("ph-audit", Some("ph-audit.json")),
        ("ph-recover", Some("ph-recover.json")),
        ("frailty-check", Some("frailty.json")),
        ("aft-check", Some("aft.json")),
        ("clustering", Some("clustering.json")),
        ("simulate", Some("simulate.json")),
        ("verify", Some("verify.json")),
    ];
    let exe = env!("CARGO_BIN_EXE_hazardlab");
    let mut compared = 0;
    let mut problems = Vec::new();
    for (cmd, scenario) in runs {
        let mut outputs = Vec::new();
        for (rep, threads) in [(0, "1"), (1, "4")] {
            let out = root.path().join(format!("{cmd}-{rep}"));
            let mut c = Command::new(exe);
            c.arg(cmd).arg("--out").arg(&out).env("HAZARDLAB_THREADS", threads);
            if let Some(s) = scenario {
                c.arg("--scenario").arg(inputs.join(s));
            }
            let status = c.output().unwrap();
            if !status.status.success() {
                problems.push(format!("{cmd} exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
            }
            let mut files = BTreeMap::new();
            for e in std::fs::read_dir(&out).unwrap() {
                let p = e.unwrap().path();
                if p.extension().is_some_and(|x| x == "csv") {
                    files.insert(p.file_name().unwrap().to_owned(), std::fs::read(&p).unwrap());
                }
            }
            outputs.push(files);
        }
        if outputs[0].is_empty() {
            problems.push(format!("{cmd} wrote no CSV"));
        }
        if outputs[0] != outputs[1] {
            problems.push(format!("{cmd} CSVs differ between runs"));
        }
        compared += outputs[0].len();
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{} commands, {compared} CSV files byte-identical across runs (1 vs 4 threads)", runs.len())
        } else {
            problems.join("; ")
        },
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome, HazardError>);

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: Vec<Criterion> = vec![
        (1, "representation: KM vs aggregate survival", secs(10), representation),
        (2, "observable hazard: ratio vs log-derivative", secs(5), hazard_routes),
        (3, "selection gap", secs(2), selection_gap_checks),
        (4, "non-identifiability construction", secs(2), nonidentifiability),
        (5, "empirical indistinguishability", secs(20), indistinguishability),
        (6, "proportional-hazards shape recovery", secs(2), ph_recovery),
        (7, "gamma frailty oracle", secs(2), frailty),
        (8, "AFT error law", secs(10), aft),
        (9, "shape algebra invariants", secs(5), shape_algebra),
        (10, "determinism of CLI outputs", secs(120), determinism),
    ];
    let mut unexpected = 0;
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= limit;
        let ok = pass && in_time;
        let tag = if ok { "PASS" } else { "FAIL" };
        let known = !ok && KNOWN_UNATTAINABLE.contains(&id);
        println!(
            "[{tag}] {id:>2}. {name}: {detail} [{:.2}s, limit {}s{}]{}",
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", OVER TIME" },
            if known { " (known unattainable)" } else { "" }
        );
        if !ok && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
