//! Closed-form solutions of the pointwise saturated system `ẋ = −sat(x)` and
//! its periodic transport variant, plus the singular profile family
//! `f_n(ξ) = n^{-1/2} ξ^{-α_n}`, `α_n = (1 − 1/n)/2`, that defeats uniform
//! decay.
//!
//! Every `f_n` has unit `L²(0,1)` norm, yet on `[0, ξ_{t,n}]` (where
//! `f_n ≥ 1 + t`) the saturated flow only subtracts `t`, and the mass kept
//! there tends to one as `n → ∞`. Quantities involving the singular profile
//! are evaluated in closed form or with graded quadrature on the continuum;
//! a uniform midpoint grid misses most of the mass near `ξ = 0` for large `n`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::quadrature::{self, QuadOptions};
use crate::systems::{aligned_cells, Alignment};

/// Solution at time `t` of `ẋ = −sat(x)`, `x(0) = f`.
pub fn sat_ode_scalar(f: f64, t: f64) -> f64 {
    if f >= 1.0 + t {
        f - t
    } else if f >= 1.0 {
        (f - 1.0 - t).exp()
    } else if f > -1.0 {
        (-t).exp() * f
    } else if f > -1.0 - t {
        -(-1.0 - t - f).exp()
    } else {
        f + t
    }
}

pub fn exact_sat_ode_solution(f: &GridFunction, t: f64) -> Result<GridFunction> {
    check_time(t)?;
    Ok(f.map(|v| sat_ode_scalar(v, t)))
}

/// Periodic transport with saturation: `y(t, ξ) = x(t, ξ + t)` where `x` is
/// the pointwise solution for the periodically extended `f`.
pub fn exact_sat_transport_solution(f: &GridFunction, t: f64, alignment: Alignment) -> Result<GridFunction> {
    check_time(t)?;
    let x = exact_sat_ode_solution(f, t)?;
    let n = f.len();
    match aligned_cells(t, n) {
        Some(k) => Ok(x.rotate_cells(k % n)),
        None => match alignment {
            Alignment::Strict => Err(Error::Misaligned {
                t,
                n,
                cells: t * n as f64,
            }),
            Alignment::Interpolate => {
                let cells = t * n as f64;
                let k = cells.floor() as usize;
                let theta = cells - cells.floor();
                let v = x.values();
                GridFunction::new(
                    (0..n)
                        .map(|i| (1.0 - theta) * v[(i + k) % n] + theta * v[(i + k + 1) % n])
                        .collect(),
                )
            }
        },
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument {
            arg: "t",
            reason: format!("time must be finite and nonnegative, got {t}"),
        });
    }
    Ok(())
}

/// Member `f_n` of the unit-norm singular family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleProfile {
    pub n: u64,
    pub alpha: f64,
}

impl CounterexampleProfile {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument {
                arg: "n",
                reason: "family index starts at 1".into(),
            });
        }
        Ok(Self {
            n,
            alpha: 0.5 * (1.0 - 1.0 / n as f64),
        })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        (self.n as f64).powf(-0.5) * xi.powf(-self.alpha)
    }

    /// `ln f_n(ξ)` from `ln ξ`; stays finite where `ξ` itself underflows.
    pub fn ln_eval(&self, ln_xi: f64) -> f64 {
        -0.5 * (self.n as f64).ln() - self.alpha * ln_xi
    }

    /// Analytic `‖f_n‖²_{L²(0,1)}`.
    pub fn norm_sq(&self) -> f64 {
        1.0
    }

    pub fn sample(&self, cells: usize) -> Result<GridFunction> {
        GridFunction::from_fn(cells, |xi| self.eval(xi))
    }
}

/// Midpoint samples of `f_n` on `cells` cells.
pub fn counterexample_profile(n: u64, cells: usize) -> Result<GridFunction> {
    CounterexampleProfile::new(n)?.sample(cells)
}

fn check_family_index(n: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument {
            arg: "n",
            reason: "f_1 is constant; the threshold needs n >= 2".into(),
        });
    }
    Ok(())
}

fn ln_xi_threshold(n: u64, t: f64) -> f64 {
    let alpha = 0.5 * (1.0 - 1.0 / n as f64);
    -(0.5 * (n as f64).ln() + t.ln_1p()) / alpha
}

/// The unique `ξ` with `f_n(ξ) = 1 + t`, i.e. `(√n (1 + t))^{-1/α_n}`.
pub fn xi_threshold(n: u64, t: f64) -> Result<f64> {
    check_family_index(n)?;
    check_time(t)?;
    Ok(ln_xi_threshold(n, t).exp())
}

/// Closed form of `∫₀^{ξ_{t,n}} (f_n − t)² dξ`, a lower bound for
/// `‖x_n(t)‖²`, evaluated term by term in log space:
///
/// `n^{1/(1−n)}(1+t)^{2/(1−n)} − 4t/(n+1)·n^{1/(1−n)}(1+t)^{(1+n)/(1−n)}
///  + t²n^{n/(1−n)}(1+t)^{2n/(1−n)}`
pub fn norm_lower_bound(n: u64, t: f64) -> Result<f64> {
    check_family_index(n)?;
    check_time(t)?;
    let nf = n as f64;
    let ln_n = nf.ln();
    let ln_1t = t.ln_1p();
    let denom = 1.0 - nf;
    let first = ((ln_n + 2.0 * ln_1t) / denom).exp();
    let second = 4.0 * t / (nf + 1.0) * ((ln_n + (nf + 1.0) * ln_1t) / denom).exp();
    let third = t * t * ((nf * ln_n + 2.0 * nf * ln_1t) / denom).exp();
    Ok((first - second + third).max(0.0))
}

/// `{2, 4, 8, …, 2²⁰}`
pub fn default_ladder() -> Vec<u64> {
    (1..=20).map(|k| 1u64 << k).collect()
}

/// Smallest candidate `n` whose lower bound certifies `‖x_n(t)‖ > threshold`.
/// Candidates below 2 are ignored.
pub fn find_witness_n(t: f64, threshold: f64, candidates: &[u64]) -> Result<Option<u64>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument {
            arg: "candidates",
            reason: "empty candidate list".into(),
        });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument {
            arg: "threshold",
            reason: format!("must lie in (0, 1), got {threshold}"),
        });
    }
    let mut best = None;
    for &n in candidates.iter().filter(|&&n| n >= 2) {
        if norm_lower_bound(n, t)? > threshold * threshold && best.is_none_or(|b| n < b) {
            best = Some(n);
        }
    }
    Ok(best)
}

/// `‖x_n(t)‖²` on the continuum, split at `ξ_{t,n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuumNorm {
    /// `∫₀^{ξ_{t,n}} x_n(t)²`, where `x_n = f_n − t`.
    pub head: f64,
    /// `∫_{ξ_{t,n}}^1 x_n(t)²`
    pub tail: f64,
}

impl ContinuumNorm {
    pub fn total(&self) -> f64 {
        self.head + self.tail
    }

    pub fn norm(&self) -> f64 {
        self.total().sqrt()
    }
}

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-10,
        max_intervals: 50_000,
    }
}

/// Squared norm of the exact saturated solution started from `f_n`,
/// by adaptive quadrature of the pointwise closed form.
///
/// The head is integrated after the grading `ξ = ξ_{t,n} u^n`, which makes
/// the integrand bounded; the tail is integrated in `ln ξ` with a split at
/// the point where `f_n = 1`.
pub fn counterexample_norm_sq(n: u64, t: f64) -> Result<ContinuumNorm> {
    scaled_counterexample_norm_sq(n, 1.0, t)
}

/// As [`counterexample_norm_sq`] for the initial state `c·f_n`, `c > 0`.
/// The split point is where `c·f_n = 1 + t`, clamped to `[0, 1]`.
pub fn scaled_counterexample_norm_sq(n: u64, amplitude: f64, t: f64) -> Result<ContinuumNorm> {
    check_time(t)?;
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidArgument {
            arg: "amplitude",
            reason: format!("must be positive, got {amplitude}"),
        });
    }
    let profile = CounterexampleProfile::new(n)?;
    let ln_c = amplitude.ln();
    if n == 1 {
        let x = sat_ode_scalar(amplitude, t);
        return Ok(if amplitude >= 1.0 + t {
            ContinuumNorm { head: x * x, tail: 0.0 }
        } else {
            ContinuumNorm { head: 0.0, tail: x * x }
        });
    }
    let nf = n as f64;
    let ln_xi_t = ((ln_c - 0.5 * nf.ln() - t.ln_1p()) / profile.alpha).min(0.0);

    // dξ = n ξ_t u^{n-1} du; evaluate (f − t)² u^{n−1} as (f u^{(n−1)/2} − t u^{(n−1)/2})².
    let head_integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let ln_u = u.ln();
        let ln_xi = ln_xi_t + nf * ln_u;
        let half = 0.5 * (nf - 1.0) * ln_u;
        let a = (ln_c + profile.ln_eval(ln_xi) + half).exp();
        let b = t * half.exp();
        nf * ln_xi_t.exp() * (a - b) * (a - b)
    };
    let head = quadrature::integrate(head_integrand, 0.0, 1.0, quad_opts())?.value;

    let tail_integrand = |s: f64| {
        let f = (ln_c + profile.ln_eval(s)).exp();
        let x = sat_ode_scalar(f, t);
        s.exp() * x * x
    };
    // c·f_n(ξ) = 1 at ln ξ = (ln c − ½ln n)/α
    let ln_xi_one = (ln_c - 0.5 * nf.ln()) / profile.alpha;
    let mut tail = 0.0;
    if ln_xi_one > ln_xi_t && ln_xi_one < 0.0 {
        tail += quadrature::integrate(tail_integrand, ln_xi_t, ln_xi_one, quad_opts())?.value;
        tail += quadrature::integrate(tail_integrand, ln_xi_one, 0.0, quad_opts())?.value;
    } else {
        tail += quadrature::integrate(tail_integrand, ln_xi_t, 0.0, quad_opts())?.value;
    }
    Ok(ContinuumNorm { head, tail })
}
