//! Feedback nonlinearities and sampling-based checks of their structural
//! properties (vanishing at zero, local Lipschitz bound, monotonicity, the
//! dual-norm inequality and the bounded cross-term property).
//!
//! Every map here is a pointwise lift of a scalar function. The checks are
//! falsifiers: a pass means no sample violated the property, not a proof.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, State};
use crate::sampling;

/// Cells used for the random grid functions in [`estimate_local_lipschitz`].
pub const LIPSCHITZ_SAMPLE_GRID: usize = 64;

/// Scalar saturation: `z/|z|` for `|z| >= 1`, `z` otherwise.
#[inline]
pub fn sat_scalar(z: f64) -> f64 {
    z.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeedbackMap {
    Identity,
    SatPointwise,
    /// Linear on `|z| <= delta`, saturating at `±delta` outside.
    DeadzoneLinear {
        delta: f64,
    },
    /// Piecewise-linear interpolation of `(x, y)` samples, extended linearly
    /// past the end points. Monotonicity is not enforced on construction so
    /// that the monotonicity check can be exercised on bad tables.
    TabulatedScalar {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
}

impl FeedbackMap {
    pub fn deadzone_linear(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "delta",
                reason: format!("must be positive and finite, got {delta}"),
            });
        }
        Ok(FeedbackMap::DeadzoneLinear { delta })
    }

    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidArgument {
                arg: "table",
                reason: "need at least two (x, y) samples of equal length".into(),
            });
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "table",
                reason: "non-finite sample".into(),
            });
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument {
                arg: "table",
                reason: "abscissae must be strictly increasing".into(),
            });
        }
        let map = FeedbackMap::TabulatedScalar { xs, ys };
        let at_zero = map.eval(0.0);
        if at_zero != 0.0 {
            return Err(Error::InvalidArgument {
                arg: "table",
                reason: format!("map must vanish at 0, got {at_zero}"),
            });
        }
        Ok(map)
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            FeedbackMap::Identity => z,
            FeedbackMap::SatPointwise => sat_scalar(z),
            FeedbackMap::DeadzoneLinear { delta } => z.clamp(-delta, *delta),
            FeedbackMap::TabulatedScalar { xs, ys } => interpolate(xs, ys, z),
        }
    }

    /// True when the scalar map is nondecreasing, which makes the pointwise
    /// lift monotone.
    pub fn is_nondecreasing(&self) -> bool {
        match self {
            FeedbackMap::TabulatedScalar { ys, .. } => ys.windows(2).all(|w| w[1] >= w[0]),
            _ => true,
        }
    }

    /// Global Lipschitz constant of the scalar map.
    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            FeedbackMap::Identity | FeedbackMap::SatPointwise | FeedbackMap::DeadzoneLinear { .. } => 1.0,
            FeedbackMap::TabulatedScalar { xs, ys } => xs
                .windows(2)
                .zip(ys.windows(2))
                .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn apply(&self, u: &GridFunction) -> GridFunction {
        u.map(|z| self.eval(z))
    }

    pub fn apply_state(&self, u: &State) -> State {
        u.map(|z| self.eval(z))
    }
}

fn interpolate(xs: &[f64], ys: &[f64], z: f64) -> f64 {
    let n = xs.len();
    let k = match xs.partition_point(|&x| x <= z) {
        0 => 0,
        i if i >= n => n - 2,
        i => i - 1,
    };
    let slope = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
    ys[k] + slope * (z - xs[k])
}

pub fn apply(sigma: &FeedbackMap, u: &GridFunction) -> GridFunction {
    sigma.apply(u)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneReport {
    /// Smallest sampled `⟨σ(u) − σ(v), u − v⟩`.
    pub min_value: f64,
    pub worst_index: Option<usize>,
    pub sample_count: usize,
    pub pass: bool,
}

pub fn check_monotone(
    sigma: &FeedbackMap,
    samples: &[(GridFunction, GridFunction)],
    tolerance: f64,
) -> Result<MonotoneReport> {
    let mut min_value = f64::INFINITY;
    let mut worst_index = None;
    for (i, (u, v)) in samples.iter().enumerate() {
        let du = sigma.apply(u).zip_map(&sigma.apply(v), |a, b| a - b)?;
        let dx = u.zip_map(v, |a, b| a - b)?;
        let value = du.inner(&dx)?;
        if value < min_value {
            min_value = value;
            worst_index = Some(i);
        }
    }
    if samples.is_empty() {
        min_value = 0.0;
    }
    Ok(MonotoneReport {
        min_value,
        worst_index,
        sample_count: samples.len(),
        pass: min_value >= -tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub radius: f64,
    /// Largest sampled difference quotient; a lower bound on `k_r`.
    pub estimate: f64,
    pub sample_count: usize,
    pub seed: u64,
}

/// Samples pairs in the `L²` ball of radius `r` and returns the largest
/// difference quotient `‖σ(u) − σ(v)‖ / ‖u − v‖`.
pub fn estimate_local_lipschitz(
    sigma: &FeedbackMap,
    r: f64,
    sample_count: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument {
            arg: "r",
            reason: format!("radius must be positive, got {r}"),
        });
    }
    let mut rng = sampling::seeded_rng(seed);
    let n = LIPSCHITZ_SAMPLE_GRID;
    let mut estimate: f64 = 0.0;
    for k in 0..sample_count {
        let u = sampling::random_in_ball(&mut rng, n, r);
        // Alternate far pairs and near pairs; near pairs probe the local slope.
        let v = if k % 2 == 0 {
            sampling::random_in_ball(&mut rng, n, r)
        } else {
            let eps = 10f64.powf(rng.random_range(-6.0..-1.0)) * r;
            let dir = sampling::random_in_ball(&mut rng, n, 1.0);
            let v = u.zip_map(&dir, |a, b| a + eps * b)?;
            let nv = v.norm_l2();
            if nv > r {
                v.map(|z| z * r / nv)
            } else {
                v
            }
        };
        let denom = u.zip_map(&v, |a, b| a - b)?.norm_l2();
        if denom == 0.0 {
            continue;
        }
        let num = sigma.apply(&u).zip_map(&sigma.apply(&v), |a, b| a - b)?.norm_l2();
        estimate = estimate.max(num / denom);
    }
    Ok(LipschitzReport {
        radius: r,
        estimate,
        sample_count,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyIvReport {
    /// `‖σ(u) − u‖_{L¹}`
    pub lhs: f64,
    /// `⟨σ(u), u⟩`
    pub rhs: f64,
    pub pass: bool,
}

/// Dual-norm inequality with `S' = L¹(0,1)`: `‖σ(u) − u‖_{L¹} ≤ ⟨σ(u), u⟩`.
pub fn check_property_iv(sigma: &FeedbackMap, u: &GridFunction, tolerance: f64) -> PropertyIvReport {
    let su = sigma.apply(u);
    let lhs = su
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / u.len() as f64;
    let rhs = su.values().iter().zip(u.values()).map(|(a, b)| a * b).sum::<f64>() / u.len() as f64;
    PropertyIvReport {
        lhs,
        rhs,
        pass: lhs <= rhs + tolerance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyVSample {
    /// `⟨u, σ(u + v) − σ(u)⟩`
    pub value: f64,
    /// `value / ‖v‖`; `None` when `v = 0`.
    pub ratio: Option<f64>,
}

pub fn check_property_v(sigma: &FeedbackMap, u: &GridFunction, v: &GridFunction) -> Result<PropertyVSample> {
    let shifted = sigma.apply(&u.zip_map(v, |a, b| a + b)?);
    let diff = shifted.zip_map(&sigma.apply(u), |a, b| a - b)?;
    let value = u.inner(&diff)?;
    let nv = v.norm_l2();
    Ok(PropertyVSample {
        value,
        ratio: (nv > 0.0).then(|| value / nv),
    })
}

/// Empirical `C₀`: supremum of the property-(v) ratio over the given pairs.
pub fn estimate_property_v_constant(sigma: &FeedbackMap, samples: &[(GridFunction, GridFunction)]) -> Result<f64> {
    let mut c0: f64 = 0.0;
    for (u, v) in samples {
        if let Some(r) = check_property_v(sigma, u, v)?.ratio {
            c0 = c0.max(r);
        }
    }
    Ok(c0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(n: usize, v: f64) -> GridFunction {
        GridFunction::constant(n, v).unwrap()
    }

    #[test]
    fn sat_scalar_branches() {
        assert_eq!(sat_scalar(0.5), 0.5);
        assert_eq!(sat_scalar(2.0), 1.0);
        assert_eq!(sat_scalar(-3.0), -1.0);
        assert_eq!(sat_scalar(1.0), 1.0);
        assert_eq!(sat_scalar(-1.0), -1.0);
    }

    #[test]
    fn apply_examples() {
        let u = GridFunction::from_fn(11, |x| 3.0 * x - 1.0).unwrap();
        assert_eq!(FeedbackMap::Identity.apply(&u), u);
        assert_eq!(FeedbackMap::SatPointwise.apply(&c(4, 2.0)), c(4, 1.0));
        let dz = FeedbackMap::deadzone_linear(1.0).unwrap();
        assert_eq!(dz.apply(&c(4, 0.3)), c(4, 0.3));
        for z in [-1.0, -0.4, 0.0, 0.7, 1.0] {
            assert_eq!(dz.eval(z), sat_scalar(z));
        }
    }

    #[test]
    fn maps_vanish_at_zero() {
        let table = FeedbackMap::tabulated(vec![-2.0, 0.0, 3.0], vec![-1.0, 0.0, 0.5]).unwrap();
        for m in [
            FeedbackMap::Identity,
            FeedbackMap::SatPointwise,
            FeedbackMap::deadzone_linear(0.2).unwrap(),
            table,
        ] {
            assert_eq!(m.eval(0.0), 0.0);
        }
        assert!(FeedbackMap::tabulated(vec![-1.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(FeedbackMap::tabulated(vec![1.0, -1.0], vec![0.0, 0.0]).is_err());
        assert!(FeedbackMap::deadzone_linear(0.0).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_extrapolates() {
        let m = FeedbackMap::tabulated(vec![-1.0, 0.0, 2.0], vec![-2.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(m.eval(1.0), 0.5);
        assert_abs_diff_eq!(m.eval(-0.5), -1.0);
        assert_abs_diff_eq!(m.eval(4.0), 2.0);
        assert_abs_diff_eq!(m.eval(-2.0), -4.0);
        assert_abs_diff_eq!(m.lipschitz_bound(), 2.0);
    }

    #[test]
    fn monotone_checks() {
        let mut rng = sampling::seeded_rng(3);
        let pairs: Vec<_> = (0..1000)
            .map(|_| {
                (
                    sampling::random_profile(&mut rng, 32, 5.0),
                    sampling::random_profile(&mut rng, 32, 5.0),
                )
            })
            .collect();
        let id = check_monotone(&FeedbackMap::Identity, &pairs[..10], 0.0).unwrap();
        assert!(id.pass && id.min_value >= 0.0);
        let sat = check_monotone(&FeedbackMap::SatPointwise, &pairs, 0.0).unwrap();
        assert!(sat.pass);
        assert_eq!(sat.sample_count, 1000);

        let decreasing = FeedbackMap::tabulated(vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, -1.0]).unwrap();
        assert!(!decreasing.is_nondecreasing());
        let bad = check_monotone(&decreasing, &[(c(4, 1.0), c(4, 0.0))], 1e-12).unwrap();
        assert!(bad.min_value < 0.0);
        assert!(!bad.pass);
        assert_eq!(bad.worst_index, Some(0));

        assert!(check_monotone(&FeedbackMap::Identity, &[(c(3, 1.0), c(4, 0.0))], 0.0).is_err());
    }

    #[test]
    fn lipschitz_estimates() {
        let id = estimate_local_lipschitz(&FeedbackMap::Identity, 3.0, 50, 1).unwrap();
        assert_abs_diff_eq!(id.estimate, 1.0, epsilon = 1e-12);

        let small = estimate_local_lipschitz(&FeedbackMap::SatPointwise, 0.5, 400, 2).unwrap();
        assert!(small.estimate <= 1.0 + 1e-12);
        assert!(small.estimate > 0.99, "{}", small.estimate);

        let large = estimate_local_lipschitz(&FeedbackMap::SatPointwise, 10.0, 400, 2).unwrap();
        assert!(large.estimate <= 1.0 + 1e-12);

        let again = estimate_local_lipschitz(&FeedbackMap::SatPointwise, 10.0, 400, 2).unwrap();
        assert_eq!(large, again);
        assert!(estimate_local_lipschitz(&FeedbackMap::SatPointwise, 0.0, 1, 0).is_err());
    }

    #[test]
    fn property_iv_examples() {
        let sat = FeedbackMap::SatPointwise;
        let r = check_property_iv(&sat, &c(8, 2.0), 0.0);
        assert_abs_diff_eq!(r.lhs, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.rhs, 2.0, epsilon = 1e-14);
        assert!(r.pass);

        let r = check_property_iv(&sat, &c(8, 0.5), 0.0);
        assert_eq!(r.lhs, 0.0);
        assert_abs_diff_eq!(r.rhs, 0.25, epsilon = 1e-14);
        assert!(r.pass);

        // u = 4ξ − 2 sweeps [−2, 2] with dξ = du/4:
        // lhs = 2·∫₁²(u − 1)du/4 = 1/4, rhs = ∫₋₁¹u²du/4 + 2·∫₁²u du/4 = 1/6 + 3/4.
        let u = GridFunction::from_fn(1_000_000, |x| 4.0 * x - 2.0).unwrap();
        let r = check_property_iv(&sat, &u, 0.0);
        assert_abs_diff_eq!(r.lhs, 0.25, epsilon = 1e-3);
        assert_abs_diff_eq!(r.rhs, 11.0 / 12.0, epsilon = 1e-3);
        assert!(r.pass);
    }

    #[test]
    fn property_v_examples() {
        let zero = check_property_v(&FeedbackMap::SatPointwise, &c(5, 0.7), &c(5, 0.0)).unwrap();
        assert_eq!(zero.value, 0.0);
        assert_eq!(zero.ratio, None);

        let id = check_property_v(&FeedbackMap::Identity, &c(5, 1.0), &c(5, 0.5)).unwrap();
        assert_abs_diff_eq!(id.value, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(id.ratio.unwrap(), 1.0, epsilon = 1e-14);

        let sat = check_property_v(&FeedbackMap::SatPointwise, &c(5, 2.0), &c(5, 1.0)).unwrap();
        assert_eq!(sat.value, 0.0);
        assert_eq!(sat.ratio, Some(0.0));
    }

    #[test]
    fn property_v_constant_is_finite_for_sat() {
        let mut rng = sampling::seeded_rng(11);
        let pairs: Vec<_> = (0..300)
            .map(|_| {
                (
                    sampling::random_profile(&mut rng, 32, 10.0),
                    sampling::random_profile(&mut rng, 32, 10.0),
                )
            })
            .collect();
        let c0 = estimate_property_v_constant(&FeedbackMap::SatPointwise, &pairs).unwrap();
        // |σ(u+v) − σ(u)| ≤ min(|v|, 2) and |u·(σ(u+v) − σ(u))| ≤ |v| · (1 + |v|) pointwise
        // keeps the ratio finite on bounded samples.
        assert!(c0.is_finite() && c0 >= 0.0);
    }

    proptest! {
        #[test]
        fn sat_idempotent(z in -1e6f64..1e6) {
            prop_assert_eq!(sat_scalar(sat_scalar(z)), sat_scalar(z));
            prop_assert!(sat_scalar(z).abs() <= 1.0);
        }

        #[test]
        fn sat_never_increases_norms(values in prop::collection::vec(-50.0f64..50.0, 1..64)) {
            let u = GridFunction::new(values).unwrap();
            let s = FeedbackMap::SatPointwise.apply(&u);
            prop_assert!(s.norm_l1() <= u.norm_l1() + 1e-12);
            prop_assert!(s.norm_l2() <= u.norm_l2() + 1e-12);
            prop_assert!(s.norm_linf() <= u.norm_linf());
        }

        #[test]
        fn sat_property_iv(values in prop::collection::vec(-20.0f64..20.0, 1..64)) {
            let u = GridFunction::new(values).unwrap();
            prop_assert!(check_property_iv(&FeedbackMap::SatPointwise, &u, 1e-12).pass);
        }

        #[test]
        fn deadzone_is_identity_inside(
            delta in 0.01f64..5.0,
            values in prop::collection::vec(-1.0f64..1.0, 1..64),
        ) {
            let u = GridFunction::new(values.iter().map(|v| v * delta).collect()).unwrap();
            let dz = FeedbackMap::deadzone_linear(delta).unwrap();
            prop_assert!(u.norm_linf() <= delta);
            prop_assert_eq!(dz.apply(&u), u);
        }
    }
}
