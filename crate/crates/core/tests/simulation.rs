use std::collections::BTreeMap;

use hazardlab::classical_bridge::{aft_build_distribution, aft_sample, AFTSpec};
use hazardlab::simulate::{
    dkw_bound, generate_dataset, ks_distance, sample_from_aggregate, subject_rng, write_dataset_csv, Censoring,
    Cohort, Scenario, DKW_ALPHA,
};
use hazardlab::{
    aggregate_survival, CovariateValue, HazardShape, Mechanism, MechanismDistribution, PositiveLaw,
    QuadratureSpec, TimeGrid,
};

fn mixture() -> MechanismDistribution {
    MechanismDistribution::finite_mixture(vec![
        (Mechanism::new("exp", HazardShape::exponential(1.0)).unwrap(), 0.3),
        (Mechanism::new("weib", HazardShape::weibull(2.0, 1.5)).unwrap(), 0.5),
        (Mechanism::new("ll", HazardShape::log_logistic(3.0, 0.8)).unwrap(), 0.2),
    ])
    .unwrap()
}

fn cohorts(n: usize) -> Vec<Cohort> {
    [0.0, 1.0]
        .iter()
        .map(|&x| Cohort { covariate: CovariateValue::scalar(x).unwrap(), distribution: mixture(), count: n })
        .collect()
}

/// KS distance between two samples.
fn two_sample_ks(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn two_stage_and_collapsed_sampling_agree() {
    let n = 100_000;
    let d = mixture();
    let records = generate_dataset(&Scenario { cohorts: cohorts(n)[..1].to_vec(), censoring: Censoring::None, seed: 5 })
        .unwrap();
    let mut two_stage: Vec<f64> = records.iter().map(|r| r.time).collect();
    let mut collapsed: Vec<f64> =
        (0..n as u32).map(|i| sample_from_aggregate(&d, &mut subject_rng(99, 0, i)).unwrap()).collect();
    let bound = 2.0 * dkw_bound(n, DKW_ALPHA);
    let gap = two_sample_ks(&mut two_stage, &mut collapsed);
    assert!(gap <= bound, "{gap} > {bound}");
    // and the collapsed draws against the analytic CDF
    let ks = ks_distance(&mut collapsed, |t| {
        let g = TimeGrid::new(vec![0.0, t.max(1e-12), t.max(1e-12) + 1.0]).unwrap();
        Ok(1.0 - aggregate_survival(&d, &g)?.values()[1])
    })
    .unwrap();
    assert!(ks <= dkw_bound(n, DKW_ALPHA), "{ks}");
}

#[test]
fn mechanism_label_is_sufficient() {
    let records =
        generate_dataset(&Scenario { cohorts: cohorts(40_000), censoring: Censoring::None, seed: 21 }).unwrap();
    let d = mixture();
    let mut groups: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in &records {
        let key = (r.mechanism_label.clone(), r.covariate.values()[0].to_bits());
        groups.entry(key).or_default().push(r.time);
    }
    assert_eq!(groups.len(), 6);
    for ((label, _), mut times) in groups {
        let m = &d.atom(&label).unwrap().mechanism;
        let ks = ks_distance(&mut times, |t| Ok(1.0 - m.survival_at(t)?)).unwrap();
        assert!(ks <= dkw_bound(times.len(), DKW_ALPHA), "{label}: {ks}");
    }
}

#[test]
fn dataset_csv_is_deterministic() {
    let s = Scenario { cohorts: cohorts(3_000), censoring: Censoring::Exponential { rate: 0.3 }, seed: 17 };
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_dataset_csv(&generate_dataset(&s).unwrap(), &mut a).unwrap();
    write_dataset_csv(&generate_dataset(&s.clone()).unwrap(), &mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "subject_id,covariate_json,time,event,mechanism_label");
    assert_eq!(text.lines().count(), 6_001);
    let other = Scenario { seed: 18, ..s };
    let mut c = Vec::new();
    write_dataset_csv(&generate_dataset(&other).unwrap(), &mut c).unwrap();
    assert_ne!(text.as_bytes(), &c[..]);
}

#[test]
fn aft_triangle_quadrature_monte_carlo_reference() {
    let x = CovariateValue::scalar(1.0).unwrap();
    let grid = TimeGrid::uniform(4.0, 0.05).unwrap();
    let n = 100_000;
    let dkw = dkw_bound(n, DKW_ALPHA);
    for u_law in [None, Some(PositiveLaw::Lognormal { mu_log: 0.0, sigma_log: 0.5 })] {
        let spec = AFTSpec { baseline: HazardShape::weibull(2.0, 1.0), beta: vec![0.4], u_law };
        let d = aft_build_distribution(&spec, &x, &QuadratureSpec::default()).unwrap();
        let quad = aggregate_survival(&d, &grid).unwrap();
        let mut times = aft_sample(&spec, &x, n, 4).unwrap().t;
        let ks = ks_distance(&mut times, |t| {
            let g = TimeGrid::new(vec![0.0, t.max(1e-12), t.max(1e-12) + 1.0]).unwrap();
            Ok(1.0 - aggregate_survival(&d, &g)?.values()[1])
        })
        .unwrap();
        assert!(ks <= dkw + 1e-5, "{ks}");
        if u_law.is_none() {
            // degenerate U: S(t) = S₀(t / a)
            let a = spec.acceleration(&x).unwrap();
            for (&t, &s) in grid.points().iter().zip(quad.values()) {
                assert!((s - HazardShape::weibull(2.0, 1.0).survival_at(t / a).unwrap()).abs() <= 1e-12);
            }
        }
    }
}
