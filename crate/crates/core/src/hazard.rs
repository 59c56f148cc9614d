//! Individual hazard mechanisms.
//!
//! A [`Mechanism`] is a labelled [`HazardShape`]; the shape deterministically
//! fixes the hazard trajectory `h(t)`, the cumulative hazard `H(t)` and the
//! survival curve `S(t) = exp(-H(t))`.

use serde::{Deserialize, Serialize};

use crate::error::{HazardError, Result};
use crate::quadrature::{integrate_adaptive, ABS_TOL};

/// Constructible hazard shapes.
///
/// JSON encoding is internally tagged by `kind` (snake case), e.g.
/// `{"kind": "weibull", "shape": 2.0, "scale": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawShape")]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HazardShape {
    Exponential {
        rate: f64,
    },
    /// `h(t) = (k/λ)(t/λ)^(k-1)`.
    Weibull {
        shape: f64,
        scale: f64,
    },
    /// `rates[i]` applies on `[breakpoints[i-1], breakpoints[i])`, right-continuous.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
    LogLogistic {
        shape: f64,
        scale: f64,
    },
    /// `c · h_base(t)`.
    Scaled {
        base: Box<HazardShape>,
        factor: f64,
    },
    /// `(1/a) · h_base(t/a)`, so `S(t) = S_base(t/a)`.
    TimeScaled {
        base: Box<HazardShape>,
        factor: f64,
    },
    /// Piecewise-linear hazard on `grid`; undefined past the last grid point.
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
    /// Survival `S_base(t) · (1 + ε g(t))` with `g` piecewise linear on `grid`
    /// and held at its last value past the grid end.
    Perturbed {
        base: Box<HazardShape>,
        grid: Vec<f64>,
        g: Vec<f64>,
        epsilon_perturb: f64,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawShape {
    Exponential {
        rate: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
    LogLogistic {
        shape: f64,
        scale: f64,
    },
    Scaled {
        base: Box<HazardShape>,
        factor: f64,
    },
    TimeScaled {
        base: Box<HazardShape>,
        factor: f64,
    },
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
    },
    Perturbed {
        base: Box<HazardShape>,
        grid: Vec<f64>,
        g: Vec<f64>,
        epsilon_perturb: f64,
    },
}

impl TryFrom<RawShape> for HazardShape {
    type Error = HazardError;

    fn try_from(raw: RawShape) -> Result<Self> {
        let shape = match raw {
            RawShape::Exponential { rate } => HazardShape::Exponential { rate },
            RawShape::Weibull { shape, scale } => HazardShape::Weibull { shape, scale },
            RawShape::PiecewiseConstant { breakpoints, rates } => {
                HazardShape::PiecewiseConstant { breakpoints, rates }
            }
            RawShape::LogLogistic { shape, scale } => HazardShape::LogLogistic { shape, scale },
            RawShape::Scaled { base, factor } => HazardShape::Scaled { base, factor },
            RawShape::TimeScaled { base, factor } => HazardShape::TimeScaled { base, factor },
            RawShape::Tabulated { grid, values } => HazardShape::Tabulated { grid, values },
            RawShape::Perturbed {
                base,
                grid,
                g,
                epsilon_perturb,
            } => HazardShape::Perturbed {
                base,
                grid,
                g,
                epsilon_perturb,
            },
        };
        shape.validate()?;
        Ok(shape)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(HazardError::InvalidShape(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn time_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(HazardError::InvalidShape(format!(
            "{name} needs at least 2 points"
        )));
    }
    if grid[0] != 0.0 {
        return Err(HazardError::InvalidShape(format!("{name} must start at 0")));
    }
    if !grid.iter().all(|x| x.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HazardError::InvalidShape(format!(
            "{name} must be finite and strictly increasing"
        )));
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(HazardError::NegativeTime(t))
    }
}

/// Value and right-slope of the piecewise-linear interpolant of `values`
/// over `grid`, held constant past the last point.
fn interpolate_with_slope(grid: &[f64], values: &[f64], t: f64) -> (f64, f64) {
    let idx = grid.partition_point(|&x| x <= t);
    let n = grid.len();
    if idx >= n {
        return (values[n - 1], 0.0);
    }
    let i = idx.saturating_sub(1);
    let slope = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]);
    (values[i] + slope * (t - grid[i]), slope)
}

impl HazardShape {
    pub fn exponential(rate: f64) -> Self {
        HazardShape::Exponential { rate }
    }

    pub fn weibull(shape: f64, scale: f64) -> Self {
        HazardShape::Weibull { shape, scale }
    }

    pub fn log_logistic(shape: f64, scale: f64) -> Self {
        HazardShape::LogLogistic { shape, scale }
    }

    pub fn piecewise_constant(breakpoints: Vec<f64>, rates: Vec<f64>) -> Self {
        HazardShape::PiecewiseConstant { breakpoints, rates }
    }

    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>) -> Self {
        HazardShape::Tabulated { grid, values }
    }

    pub fn scaled(base: HazardShape, factor: f64) -> Self {
        HazardShape::Scaled {
            base: Box::new(base),
            factor,
        }
    }

    /// Time-scaled version of `base`; a factor of exactly 1 returns `base`
    /// unchanged.
    pub fn time_scaled(base: HazardShape, factor: f64) -> Self {
        if factor == 1.0 {
            base
        } else {
            HazardShape::TimeScaled {
                base: Box::new(base),
                factor,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HazardShape::Exponential { rate } => positive("rate", *rate),
            HazardShape::Weibull { shape, scale } | HazardShape::LogLogistic { shape, scale } => {
                positive("shape", *shape)?;
                positive("scale", *scale)
            }
            HazardShape::PiecewiseConstant { breakpoints, rates } => {
                if rates.len() != breakpoints.len() + 1 {
                    return Err(HazardError::InvalidShape(format!(
                        "piecewise-constant hazard needs one more rate than breakpoints ({} rates, {} breakpoints)",
                        rates.len(),
                        breakpoints.len()
                    )));
                }
                if breakpoints.iter().any(|b| !b.is_finite() || *b <= 0.0)
                    || breakpoints.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(HazardError::InvalidShape(
                        "breakpoints must be positive, finite and strictly increasing".into(),
                    ));
                }
                rates.iter().try_for_each(|r| positive("rate", *r))
            }
            HazardShape::Scaled { base, factor } | HazardShape::TimeScaled { base, factor } => {
                positive("factor", *factor)?;
                base.validate()
            }
            HazardShape::Tabulated { grid, values } => {
                time_grid("tabulated grid", grid)?;
                if values.len() != grid.len() {
                    return Err(HazardError::InvalidShape(
                        "tabulated values must match the grid length".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(HazardError::InvalidShape(
                        "tabulated hazard values must be finite and nonnegative".into(),
                    ));
                }
                Ok(())
            }
            HazardShape::Perturbed {
                base,
                grid,
                g,
                epsilon_perturb,
            } => {
                base.validate()?;
                time_grid("perturbation grid", grid)?;
                if g.len() != grid.len() {
                    return Err(HazardError::InvalidShape(
                        "perturbation g must match the grid length".into(),
                    ));
                }
                if !epsilon_perturb.is_finite() || g.iter().any(|v| !v.is_finite()) {
                    return Err(HazardError::InvalidShape(
                        "perturbation values must be finite".into(),
                    ));
                }
                if g[0] != 0.0 {
                    return Err(HazardError::InvalidShape(
                        "perturbation g must vanish at t = 0".into(),
                    ));
                }
                if g.iter().any(|v| 1.0 + epsilon_perturb * v <= 0.0) {
                    return Err(HazardError::InvalidShape(
                        "perturbed survival must stay positive".into(),
                    ));
                }
                // The hazard is monotone in t on each panel for a constant
                // base; panel endpoints are checked from both sides.
                for i in 0..grid.len() - 1 {
                    let slope = (g[i + 1] - g[i]) / (grid[i + 1] - grid[i]);
                    for (t, gv) in [(grid[i], g[i]), (grid[i + 1], g[i + 1])] {
                        let h = base.hazard_at(t)? - epsilon_perturb * slope / (1.0 + epsilon_perturb * gv);
                        if h < -1e-12 {
                            return Err(HazardError::InvalidShape(format!(
                                "perturbed hazard is negative ({h}) near t = {t}"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    /// `h(t)`. Weibull and log-logistic shapes with `k < 1` are infinite at 0.
    pub fn hazard_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self {
            HazardShape::Exponential { rate } => *rate,
            HazardShape::Weibull { shape, scale } => {
                shape / scale * (t / scale).powf(shape - 1.0)
            }
            HazardShape::PiecewiseConstant { breakpoints, rates } => {
                rates[breakpoints.partition_point(|&b| b <= t)]
            }
            HazardShape::LogLogistic { shape, scale } => {
                let z = t / scale;
                shape / scale * z.powf(shape - 1.0) / (1.0 + z.powf(*shape))
            }
            HazardShape::Scaled { base, factor } => factor * base.hazard_at(t)?,
            HazardShape::TimeScaled { base, factor } => base.hazard_at(t / factor)? / factor,
            HazardShape::Tabulated { grid, values } => {
                let end = grid[grid.len() - 1];
                if t > end {
                    return Err(HazardError::BeyondGrid { t, end });
                }
                interpolate_with_slope(grid, values, t).0
            }
            HazardShape::Perturbed {
                base,
                grid,
                g,
                epsilon_perturb,
            } => {
                let (gv, slope) = interpolate_with_slope(grid, g, t);
                base.hazard_at(t)? - epsilon_perturb * slope / (1.0 + epsilon_perturb * gv)
            }
        })
    }

    /// `H(t) = ∫₀ᵗ h(u) du`, in closed form for every shape.
    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self {
            HazardShape::Exponential { rate } => rate * t,
            HazardShape::Weibull { shape, scale } => (t / scale).powf(*shape),
            HazardShape::PiecewiseConstant { breakpoints, rates } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (i, &b) in breakpoints.iter().enumerate() {
                    if t <= b {
                        return Ok(acc + rates[i] * (t - start));
                    }
                    acc += rates[i] * (b - start);
                    start = b;
                }
                acc + rates[rates.len() - 1] * (t - start)
            }
            HazardShape::LogLogistic { shape, scale } => (t / scale).powf(*shape).ln_1p(),
            HazardShape::Scaled { base, factor } => factor * base.cumulative_hazard(t)?,
            HazardShape::TimeScaled { base, factor } => base.cumulative_hazard(t / factor)?,
            HazardShape::Tabulated { grid, values } => {
                let end = grid[grid.len() - 1];
                if t > end {
                    return Err(HazardError::BeyondGrid { t, end });
                }
                let mut acc = 0.0;
                for i in 0..grid.len() - 1 {
                    let (a, b) = (grid[i], grid[i + 1]);
                    if t <= b {
                        let (vt, _) = interpolate_with_slope(grid, values, t);
                        return Ok(acc + 0.5 * (values[i] + vt) * (t - a));
                    }
                    acc += 0.5 * (values[i] + values[i + 1]) * (b - a);
                }
                acc
            }
            HazardShape::Perturbed {
                base,
                grid,
                g,
                epsilon_perturb,
            } => {
                let (gv, _) = interpolate_with_slope(grid, g, t);
                base.cumulative_hazard(t)? - (epsilon_perturb * gv).ln_1p()
            }
        })
    }

    pub fn survival_at(&self, t: f64) -> Result<f64> {
        Ok((-self.cumulative_hazard(t)?).exp())
    }

    /// Whether `H(t) → ∞`; only tabulated hazards (or transforms of them) are
    /// bounded.
    pub fn has_unbounded_cumulative_hazard(&self) -> bool {
        match self {
            HazardShape::Tabulated { .. } => false,
            HazardShape::Scaled { base, .. }
            | HazardShape::TimeScaled { base, .. }
            | HazardShape::Perturbed { base, .. } => base.has_unbounded_cumulative_hazard(),
            _ => true,
        }
    }

    /// Smallest `t` with `H(t) = u`.
    pub fn inverse_cumulative_hazard(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) || u.is_infinite() {
            return Err(HazardError::UnreachableCumulativeHazard {
                requested: u,
                supremum: f64::INFINITY,
            });
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        match self {
            HazardShape::Exponential { rate } => Ok(u / rate),
            HazardShape::Weibull { shape, scale } => Ok(scale * u.powf(1.0 / shape)),
            HazardShape::PiecewiseConstant { breakpoints, rates } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (i, &b) in breakpoints.iter().enumerate() {
                    let seg = rates[i] * (b - start);
                    if acc + seg >= u {
                        return Ok(start + (u - acc) / rates[i]);
                    }
                    acc += seg;
                    start = b;
                }
                Ok(start + (u - acc) / rates[rates.len() - 1])
            }
            HazardShape::LogLogistic { shape, scale } => {
                Ok(scale * u.exp_m1().powf(1.0 / shape))
            }
            HazardShape::Scaled { base, factor } => base.inverse_cumulative_hazard(u / factor),
            HazardShape::TimeScaled { base, factor } => {
                Ok(factor * base.inverse_cumulative_hazard(u)?)
            }
            HazardShape::Tabulated { grid, values } => tabulated_inverse(grid, values, u),
            HazardShape::Perturbed { .. } => {
                invert_by_bisection(|t| self.cumulative_hazard(t), u)
            }
        }
    }

    /// Points where the hazard may be non-smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            HazardShape::PiecewiseConstant { breakpoints, .. } => breakpoints.clone(),
            HazardShape::Tabulated { grid, .. } => grid.clone(),
            HazardShape::Scaled { base, .. } => base.kinks(),
            HazardShape::TimeScaled { base, factor } => {
                base.kinks().into_iter().map(|k| k * factor).collect()
            }
            HazardShape::Perturbed { base, grid, .. } => {
                let mut k = base.kinks();
                k.extend_from_slice(grid);
                k.sort_by(f64::total_cmp);
                k.dedup();
                k
            }
            _ => Vec::new(),
        }
    }

    /// `H(t)` by adaptive Gauss–Legendre integration of [`hazard_at`](Self::hazard_at);
    /// an independent route to the closed forms.
    pub fn cumulative_hazard_by_quadrature(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let failure = std::cell::RefCell::new(None);
        let value = integrate_adaptive(
            |s| match self.hazard_at(s) {
                Ok(h) => h,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            0.0,
            t,
            &self.kinks(),
            ABS_TOL,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        value
    }
}

fn tabulated_inverse(grid: &[f64], values: &[f64], u: f64) -> Result<f64> {
    let mut acc = 0.0;
    for i in 0..grid.len() - 1 {
        let dt = grid[i + 1] - grid[i];
        let seg = 0.5 * (values[i] + values[i + 1]) * dt;
        if acc + seg >= u {
            // H(a + s) = acc + v0 s + (v1 - v0) s² / (2 dt) = u, solved in the
            // cancellation-free form s = 2r / (v0 + sqrt(v0² + 2 q r)).
            let v0 = values[i];
            let q = (values[i + 1] - v0) / dt;
            let r = u - acc;
            let disc = (v0 * v0 + 2.0 * q * r).max(0.0);
            let s = 2.0 * r / (v0 + disc.sqrt());
            return Ok((grid[i] + s).min(grid[i + 1]));
        }
        acc += seg;
    }
    Err(HazardError::UnreachableCumulativeHazard {
        requested: u,
        supremum: acc,
    })
}

/// Inverts a nondecreasing cumulative hazard by exponential bracket growth
/// followed by bisection; returns the smallest representable `t` with
/// `H(t) >= u`.
pub fn invert_by_bisection<F>(cumulative: F, u: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if u <= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while cumulative(hi)? < u {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(HazardError::UnreachableCumulativeHazard {
                requested: u,
                supremum: cumulative(lo)?,
            });
        }
    }
    for _ in 0..2_000 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if cumulative(mid)? < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// A labelled hazard shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMechanism")]
pub struct Mechanism {
    pub label: String,
    pub shape: HazardShape,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMechanism {
    label: String,
    shape: HazardShape,
}

impl TryFrom<RawMechanism> for Mechanism {
    type Error = HazardError;

    fn try_from(raw: RawMechanism) -> Result<Self> {
        Mechanism::new(raw.label, raw.shape)
    }
}

impl Mechanism {
    pub fn new(label: impl Into<String>, shape: HazardShape) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(HazardError::InvalidShape(
                "mechanism label must be nonempty".into(),
            ));
        }
        shape.validate()?;
        Ok(Self { label, shape })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn shape(&self) -> &HazardShape {
        &self.shape
    }

    pub fn hazard_at(&self, t: f64) -> Result<f64> {
        self.shape.hazard_at(t)
    }

    pub fn cumulative_hazard(&self, t: f64) -> Result<f64> {
        self.shape.cumulative_hazard(t)
    }

    pub fn survival_at(&self, t: f64) -> Result<f64> {
        self.shape.survival_at(t)
    }

    pub fn inverse_cumulative_hazard(&self, u: f64) -> Result<f64> {
        self.shape.inverse_cumulative_hazard(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pwc() -> HazardShape {
        HazardShape::piecewise_constant(vec![1.0], vec![1.0, 3.0])
    }

    #[test]
    fn hazard_examples() {
        assert_eq!(HazardShape::exponential(2.0).hazard_at(1.5).unwrap(), 2.0);
        assert_abs_diff_eq!(
            HazardShape::weibull(2.0, 1.0).hazard_at(0.5).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let s = HazardShape::scaled(HazardShape::exponential(1.0), 3.0);
        assert_eq!(s.hazard_at(7.0).unwrap(), 3.0);
    }

    #[test]
    fn cumulative_examples() {
        assert_abs_diff_eq!(
            HazardShape::exponential(2.0).cumulative_hazard(1.5).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(pwc().cumulative_hazard(2.0).unwrap(), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            HazardShape::weibull(2.0, 1.0).cumulative_hazard(2.0).unwrap(),
            4.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn survival_examples() {
        assert_abs_diff_eq!(
            HazardShape::exponential(2.0).survival_at(1.5).unwrap(),
            (-3.0f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(pwc().survival_at(2.0).unwrap(), 0.018315638888734, epsilon = 1e-12);
        for s in [
            pwc(),
            HazardShape::log_logistic(1.5, 2.0),
            HazardShape::tabulated(vec![0.0, 1.0], vec![1.0, 2.0]),
        ] {
            assert_eq!(s.survival_at(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn inverse_examples() {
        assert_abs_diff_eq!(
            HazardShape::exponential(2.0).inverse_cumulative_hazard(3.0).unwrap(),
            1.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            HazardShape::weibull(2.0, 1.0).inverse_cumulative_hazard(4.0).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(pwc().inverse_cumulative_hazard(4.0).unwrap(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn negative_time_and_extrapolation_rejected() {
        let e = HazardShape::exponential(1.0);
        assert_eq!(e.hazard_at(-1.0), Err(HazardError::NegativeTime(-1.0)));
        assert!(e.cumulative_hazard(-0.5).is_err());
        let tab = HazardShape::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0]);
        assert!(matches!(tab.hazard_at(2.5), Err(HazardError::BeyondGrid { .. })));
        assert!(matches!(
            tab.cumulative_hazard(2.5),
            Err(HazardError::BeyondGrid { .. })
        ));
    }

    #[test]
    fn tabulated_inverse_and_flat_segments() {
        // H: 0.5 at t=1, flat until 2, 1.5 at t=3
        let tab = HazardShape::tabulated(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.0, 0.0, 2.0]);
        assert_abs_diff_eq!(tab.cumulative_hazard(3.0).unwrap(), 1.5, epsilon = 1e-15);
        // infimum on the flat stretch
        assert_abs_diff_eq!(tab.inverse_cumulative_hazard(0.5).unwrap(), 1.0, epsilon = 1e-12);
        for u in [0.1, 0.3, 0.7, 1.2, 1.5] {
            let t = tab.inverse_cumulative_hazard(u).unwrap();
            assert_abs_diff_eq!(tab.cumulative_hazard(t).unwrap(), u, epsilon = 1e-12);
        }
        assert!(matches!(
            tab.inverse_cumulative_hazard(1.6),
            Err(HazardError::UnreachableCumulativeHazard { .. })
        ));
        assert!(!tab.has_unbounded_cumulative_hazard());
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(HazardShape::exponential(0.0).validate().is_err());
        assert!(HazardShape::weibull(-1.0, 1.0).validate().is_err());
        assert!(HazardShape::piecewise_constant(vec![1.0], vec![1.0]).validate().is_err());
        assert!(HazardShape::tabulated(vec![0.0], vec![1.0]).validate().is_err());
        assert!(HazardShape::tabulated(vec![0.0, 1.0, 1.0], vec![1.0; 3])
            .validate()
            .is_err());
        assert!(HazardShape::scaled(HazardShape::exponential(1.0), 0.0)
            .validate()
            .is_err());
        assert!(Mechanism::new("", HazardShape::exponential(1.0)).is_err());
    }

    #[test]
    fn perturbed_shape_matches_definition() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let g: Vec<f64> = grid.iter().map(|t| 0.5 * t * (-t).exp()).collect();
        let base = HazardShape::exponential(1.0);
        let p = HazardShape::Perturbed {
            base: Box::new(base.clone()),
            grid: grid.clone(),
            g: g.clone(),
            epsilon_perturb: 0.3,
        };
        p.validate().unwrap();
        for (t, gv) in grid.iter().zip(&g) {
            let want = base.survival_at(*t).unwrap() * (1.0 + 0.3 * gv);
            assert_abs_diff_eq!(p.survival_at(*t).unwrap(), want, epsilon = 1e-15);
        }
        // held past the grid
        let want = base.survival_at(12.0).unwrap() * (1.0 + 0.3 * g[100]);
        assert_abs_diff_eq!(p.survival_at(12.0).unwrap(), want, epsilon = 1e-18);
        for u in [1e-3, 0.5, 2.0, 11.0, 30.0] {
            let t = p.inverse_cumulative_hazard(u).unwrap();
            assert_abs_diff_eq!(p.cumulative_hazard(t).unwrap(), u, epsilon = 1e-10);
        }
        let q = p.cumulative_hazard_by_quadrature(7.3).unwrap();
        assert_abs_diff_eq!(q, p.cumulative_hazard(7.3).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn json_encoding_is_kind_tagged() {
        let s = HazardShape::scaled(HazardShape::weibull(2.0, 1.0), 3.0);
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["kind"], "scaled");
        assert_eq!(j["base"]["kind"], "weibull");
        let back: HazardShape = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        let bad = serde_json::from_str::<HazardShape>(r#"{"kind":"exponential","rate":-1}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn time_scaled_identity_factor_is_reference() {
        let base = HazardShape::weibull(2.0, 1.0);
        assert_eq!(HazardShape::time_scaled(base.clone(), 1.0), base);
    }
}
