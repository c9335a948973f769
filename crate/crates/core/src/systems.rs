//! Linear generators, their semigroups, and mild-solution integrators for
//! `ẋ = Ax − Bσ(B*x + d)`.
//!
//! [`solve_mild`] uses operator splitting: the linear part is advanced with its
//! exact semigroup and the nonlinear part `ż = −Bσ(B*z + d)` either in closed
//! form (scalar `B`, piecewise-linear saturating maps) or with classical RK4.
//! The periodic shift is an exact circular rotation of the grid, so steps
//! must be whole multiples of the cell width unless interpolation is allowed.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feedback::FeedbackMap;
use crate::grid::{FiniteVector, State};
use crate::linalg;
use crate::oracles::sat_ode_scalar;

/// States whose norm exceeds this abort the integration.
pub const BLOW_UP_NORM: f64 = 1e12;

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Zero,
    /// `d/dξ` on `(0, 1)` with periodic boundary; grid states only.
    PeriodicShift,
    /// `A = −αI`.
    ScalarDiagonal {
        alpha: f64,
    },
    /// Dense generator on `ℝᵐ`; vector states only.
    Matrix(DMatrix<f64>),
}

impl GeneratorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::Zero => "zero",
            GeneratorSpec::PeriodicShift => "periodic-shift",
            GeneratorSpec::ScalarDiagonal { .. } => "scalar-diagonal",
            GeneratorSpec::Matrix(_) => "matrix",
        }
    }

    fn check_state(&self, x: &State) -> Result<()> {
        match (self, x) {
            (GeneratorSpec::PeriodicShift, State::Vector(_)) => {
                Err(Error::StateKind("periodic shift acts on grid functions only".into()))
            }
            (GeneratorSpec::Matrix(_), State::Grid(_)) => {
                Err(Error::StateKind("matrix generator acts on vectors only".into()))
            }
            (GeneratorSpec::Matrix(a), State::Vector(v)) if a.nrows() != v.len() => Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: v.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// How the periodic shift treats times that are not whole cell multiples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    #[default]
    Strict,
    /// Linear interpolation between neighbouring cells (diffusive).
    Interpolate,
}

/// Number of cells corresponding to time `t` on an `n`-cell grid, when whole.
pub fn aligned_cells(t: f64, n: usize) -> Option<usize> {
    let cells = t * n as f64;
    let rounded = cells.round();
    ((cells - rounded).abs() <= ALIGN_TOL * rounded.max(1.0)).then_some(rounded as usize)
}

/// Precomputed linear flow `T(h)` for a fixed step.
#[derive(Debug, Clone)]
enum LinearFlow {
    Identity,
    Rotate(usize),
    Interpolated { cells: usize, theta: f64 },
    Scale(f64),
    Dense(DMatrix<f64>),
}

impl LinearFlow {
    fn new(generator: &GeneratorSpec, t: f64, like: &State, alignment: Alignment) -> Result<(Self, bool)> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "t",
                reason: format!("time must be finite and nonnegative, got {t}"),
            });
        }
        generator.check_state(like)?;
        Ok(match generator {
            GeneratorSpec::Zero => (LinearFlow::Identity, false),
            GeneratorSpec::ScalarDiagonal { alpha } => (LinearFlow::Scale((-alpha * t).exp()), false),
            GeneratorSpec::Matrix(a) => (LinearFlow::Dense(linalg::expm(&(a * t))), false),
            GeneratorSpec::PeriodicShift => {
                let n = like.dim();
                match aligned_cells(t, n) {
                    Some(k) => (LinearFlow::Rotate(k % n), false),
                    None => match alignment {
                        Alignment::Strict => {
                            return Err(Error::Misaligned {
                                t,
                                n,
                                cells: t * n as f64,
                            })
                        }
                        Alignment::Interpolate => {
                            let cells = t * n as f64;
                            let whole = cells.floor();
                            (
                                LinearFlow::Interpolated {
                                    cells: (whole as usize) % n,
                                    theta: cells - whole,
                                },
                                true,
                            )
                        }
                    },
                }
            }
        })
    }

    fn apply(&self, x: &State) -> State {
        match (self, x) {
            (LinearFlow::Identity, _) => x.clone(),
            (LinearFlow::Scale(c), _) => x.scale(*c),
            (LinearFlow::Rotate(k), State::Grid(g)) => State::Grid(g.rotate_cells(*k)),
            (LinearFlow::Interpolated { cells, theta }, State::Grid(g)) => {
                let v = g.values();
                let n = v.len();
                let out = (0..n)
                    .map(|i| (1.0 - theta) * v[(i + cells) % n] + theta * v[(i + cells + 1) % n])
                    .collect();
                x.with_raw(out)
            }
            (LinearFlow::Dense(e), State::Vector(v)) => {
                State::Vector(FiniteVector::from_dvector(&(e * v.as_dvector())))
            }
            _ => unreachable!("flow built for a different state kind"),
        }
    }
}

/// Applies the linear semigroup `T(t)` generated by `generator` to `x`.
pub fn semigroup_apply(generator: &GeneratorSpec, t: f64, x: &State, alignment: Alignment) -> Result<State> {
    let (flow, _) = LinearFlow::new(generator, t, x, alignment)?;
    Ok(flow.apply(x))
}

/// Bounded input operator `B`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputOperator {
    /// `b · I` on the state space (so `U = X`).
    Scalar(f64),
    /// `m × k` matrix from `ℝᵏ` into `ℝᵐ`; vector states only.
    Matrix(DMatrix<f64>),
}

impl InputOperator {
    pub fn identity() -> Self {
        InputOperator::Scalar(1.0)
    }

    pub fn norm(&self) -> f64 {
        match self {
            InputOperator::Scalar(b) => b.abs(),
            InputOperator::Matrix(m) => linalg::norm2(m),
        }
    }

    /// `B u`
    pub fn apply(&self, u: &State) -> Result<State> {
        match (self, u) {
            (InputOperator::Scalar(b), _) => Ok(u.scale(*b)),
            (InputOperator::Matrix(m), State::Vector(v)) => {
                if m.ncols() != v.len() {
                    return Err(Error::DimensionMismatch {
                        expected: m.ncols(),
                        got: v.len(),
                    });
                }
                Ok(State::Vector(FiniteVector::from_dvector(&(m * v.as_dvector()))))
            }
            _ => Err(Error::StateKind("matrix input operator needs vector inputs".into())),
        }
    }

    /// `B* x`
    pub fn apply_adjoint(&self, x: &State) -> Result<State> {
        match (self, x) {
            (InputOperator::Scalar(b), _) => Ok(x.scale(*b)),
            (InputOperator::Matrix(m), State::Vector(v)) => {
                if m.nrows() != v.len() {
                    return Err(Error::DimensionMismatch {
                        expected: m.nrows(),
                        got: v.len(),
                    });
                }
                Ok(State::Vector(FiniteVector::from_dvector(
                    &(m.transpose() * v.as_dvector()),
                )))
            }
            _ => Err(Error::StateKind("matrix input operator needs vector states".into())),
        }
    }

    /// `B B*` as a dense matrix on `ℝᵐ`, or the scalar `b²`.
    fn gram(&self, m: usize) -> DMatrix<f64> {
        match self {
            InputOperator::Scalar(b) => DMatrix::identity(m, m) * (b * b),
            InputOperator::Matrix(bm) => bm * bm.transpose(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub generator: GeneratorSpec,
    pub input: InputOperator,
    pub feedback: FeedbackMap,
}

impl SystemSpec {
    pub fn new(generator: GeneratorSpec, input: InputOperator, feedback: FeedbackMap) -> Self {
        Self {
            generator,
            input,
            feedback,
        }
    }

    /// `A = 0`, `B = I`, pointwise saturation on `L²(0,1)`.
    pub fn saturated_ode() -> Self {
        Self::new(
            GeneratorSpec::Zero,
            InputOperator::identity(),
            FeedbackMap::SatPointwise,
        )
    }

    /// `A = d/dξ` (periodic), `B = I`, pointwise saturation.
    pub fn saturated_transport() -> Self {
        Self::new(
            GeneratorSpec::PeriodicShift,
            InputOperator::identity(),
            FeedbackMap::SatPointwise,
        )
    }

    /// Generator of the unsaturated closed loop `Ã = A − BB*`, when it is one
    /// of the representable kinds.
    pub fn closed_loop_generator(&self, like: &State) -> Result<GeneratorSpec> {
        match (&self.generator, &self.input) {
            (GeneratorSpec::Zero, InputOperator::Scalar(b)) => Ok(GeneratorSpec::ScalarDiagonal { alpha: b * b }),
            (GeneratorSpec::ScalarDiagonal { alpha }, InputOperator::Scalar(b)) => {
                Ok(GeneratorSpec::ScalarDiagonal { alpha: alpha + b * b })
            }
            (GeneratorSpec::Matrix(a), input) => Ok(GeneratorSpec::Matrix(a - input.gram(a.nrows()))),
            (GeneratorSpec::Zero | GeneratorSpec::ScalarDiagonal { .. }, InputOperator::Matrix(_)) => {
                let m = like.dim();
                let a = match &self.generator {
                    GeneratorSpec::ScalarDiagonal { alpha } => DMatrix::identity(m, m) * -alpha,
                    _ => DMatrix::zeros(m, m),
                };
                Ok(GeneratorSpec::Matrix(a - self.input.gram(m)))
            }
            (GeneratorSpec::PeriodicShift, _) => Err(Error::Unsupported(
                "closed loop of the periodic shift is not a representable generator".into(),
            )),
        }
    }

    /// Checks that `x` (state) and `d` (input) fit the generator and `B`.
    pub fn validate(&self, x: &State, d: &Disturbance) -> Result<()> {
        self.generator.check_state(x)?;
        let bx = self.input.apply_adjoint(x)?;
        for v in d.values() {
            bx.check_compatible(v)?;
        }
        Ok(())
    }

    /// Right-hand side `−Bσ(B*z + d)` of the nonlinear substep.
    fn nonlinear_rhs(&self, z: &State, d: &State) -> Result<State> {
        let arg = self.input.apply_adjoint(z)?.add(d)?;
        Ok(self.input.apply(&self.feedback.apply_state(&arg))?.scale(-1.0))
    }

    /// Closed-form nonlinear substep when `B = bI` and `σ` is identity, the
    /// saturation, or a scaled saturation. Writing `w = bz + d` gives
    /// `ẇ = −b²σ(w)`, a pointwise scalar ODE.
    fn exact_substep(&self, z: &State, d: &State, h: f64) -> Option<Result<State>> {
        let b = match self.input {
            InputOperator::Scalar(b) => b,
            InputOperator::Matrix(_) => return None,
        };
        let scalar: Box<dyn Fn(f64) -> f64> = match self.feedback {
            FeedbackMap::Identity => {
                let decay = (-b * b * h).exp();
                Box::new(move |w| decay * w)
            }
            FeedbackMap::SatPointwise => Box::new(move |w| sat_ode_scalar(w, b * b * h)),
            FeedbackMap::DeadzoneLinear { delta } => Box::new(move |w| delta * sat_ode_scalar(w / delta, b * b * h)),
            FeedbackMap::TabulatedScalar { .. } => return None,
        };
        if b == 0.0 {
            return Some(Ok(z.clone()));
        }
        Some(z.zip_map(d, |zi, di| (scalar(b * zi + di) - di) / b))
    }

    fn rk4_substep(&self, z: &State, d: &State, h: f64) -> Result<State> {
        let k1 = self.nonlinear_rhs(z, d)?;
        let k2 = self.nonlinear_rhs(&z.axpy(0.5 * h, &k1)?, d)?;
        let k3 = self.nonlinear_rhs(&z.axpy(0.5 * h, &k2)?, d)?;
        let k4 = self.nonlinear_rhs(&z.axpy(h, &k3)?, d)?;
        let sum = k1.axpy(2.0, &k2)?.axpy(2.0, &k3)?.add(&k4)?;
        z.axpy(h / 6.0, &sum)
    }
}

/// Piecewise-constant disturbance `d(t) = values[i]` on `[t_i, t_{i+1})`,
/// the last value extending to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturbance {
    breakpoints: Vec<f64>,
    values: Vec<State>,
    sup_norm: f64,
}

impl Disturbance {
    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<State>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::InvalidArgument {
                arg: "disturbance",
                reason: "need one value per breakpoint and at least one".into(),
            });
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidArgument {
                arg: "disturbance",
                reason: "first breakpoint must be 0".into(),
            });
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) || breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "disturbance",
                reason: "breakpoints must be finite and strictly increasing".into(),
            });
        }
        for v in &values[1..] {
            values[0].check_compatible(v)?;
        }
        if !values.iter().all(State::is_finite) {
            return Err(Error::InvalidArgument {
                arg: "disturbance",
                reason: "non-finite value".into(),
            });
        }
        let sup_norm = values.iter().map(State::norm).fold(0.0, f64::max);
        Ok(Self {
            breakpoints,
            values,
            sup_norm,
        })
    }

    pub fn constant(value: State) -> Self {
        Self::piecewise(vec![0.0], vec![value]).expect("single breakpoint at 0")
    }

    /// The zero signal in the input space of `x` under `B*`.
    pub fn zero_like(input_value: &State) -> Self {
        Self::constant(input_value.zeros_like())
    }

    pub fn at(&self, t: f64) -> &State {
        let i = self.breakpoints.partition_point(|&b| b <= t).saturating_sub(1);
        &self.values[i]
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[State] {
        &self.values
    }

    /// `‖d‖_{L^∞(0,∞)}`
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// `‖d‖_{L^∞(0,t)}`
    pub fn sup_norm_until(&self, t: f64) -> f64 {
        self.breakpoints
            .iter()
            .zip(&self.values)
            .filter(|(&b, _)| b <= t)
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Exact `∫₀ᵗ ‖d(s) − other(s)‖ ds` for two piecewise-constant signals.
    pub fn integrate_diff_norm(&self, other: &Disturbance, t: f64) -> Result<f64> {
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .copied()
            .filter(|&b| b < t)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.push(t);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += self.at(w[0]).sub(other.at(w[0]))?.norm() * (w[1] - w[0]);
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Strang splitting, except Lie for the periodic shift so that every
    /// linear substep stays a whole-cell rotation.
    #[default]
    Auto,
    Lie,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Substep {
    /// Closed form where available, RK4 otherwise.
    #[default]
    Auto,
    Rk4,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverOptions {
    pub scheme: Scheme,
    pub substep: Substep,
    pub alignment: Alignment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub scheme: Scheme,
    pub substep: Substep,
    pub dt: f64,
    /// True when any periodic shift had to interpolate between cells.
    pub interpolated: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(State::norm).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn resolve_scheme(scheme: Scheme, generator: &GeneratorSpec) -> Scheme {
    match (scheme, generator) {
        (Scheme::Auto, GeneratorSpec::PeriodicShift) => Scheme::Lie,
        (Scheme::Auto, _) => Scheme::Strang,
        (s, _) => s,
    }
}

struct Stepper<'a> {
    system: &'a SystemSpec,
    scheme: Scheme,
    substep: Substep,
    flow: LinearFlow,
    half_flow: Option<LinearFlow>,
    interpolated: bool,
}

impl<'a> Stepper<'a> {
    fn new(system: &'a SystemSpec, like: &State, h: f64, opts: &SolverOptions) -> Result<Self> {
        let scheme = resolve_scheme(opts.scheme, &system.generator);
        let (flow, mut interpolated) = LinearFlow::new(&system.generator, h, like, opts.alignment)?;
        let half_flow = if scheme == Scheme::Strang {
            let (f, interp) = LinearFlow::new(&system.generator, 0.5 * h, like, opts.alignment)?;
            interpolated |= interp;
            Some(f)
        } else {
            None
        };
        let substep = match opts.substep {
            Substep::Auto => {
                let probe = like.zeros_like();
                let d = system.input.apply_adjoint(&probe)?;
                if system.exact_substep(&probe, &d, h).is_some() {
                    Substep::Exact
                } else {
                    Substep::Rk4
                }
            }
            Substep::Exact => {
                let probe = like.zeros_like();
                let d = system.input.apply_adjoint(&probe)?;
                if system.exact_substep(&probe, &d, h).is_none() {
                    return Err(Error::Unsupported(
                        "closed-form substep needs scalar B and identity/saturating feedback".into(),
                    ));
                }
                Substep::Exact
            }
            Substep::Rk4 => Substep::Rk4,
        };
        Ok(Self {
            system,
            scheme,
            substep,
            flow,
            half_flow,
            interpolated,
        })
    }

    fn nonlinear(&self, z: &State, d: &State, h: f64) -> Result<State> {
        match self.substep {
            Substep::Exact => self
                .system
                .exact_substep(z, d, h)
                .expect("checked when the stepper was built"),
            _ => self.system.rk4_substep(z, d, h),
        }
    }

    fn step(&self, x: &State, d: &State, h: f64) -> Result<State> {
        match (&self.half_flow, self.scheme) {
            (Some(half), Scheme::Strang) => {
                let y = half.apply(x);
                let y = self.nonlinear(&y, d, h)?;
                Ok(half.apply(&y))
            }
            _ => {
                let y = self.nonlinear(x, d, h)?;
                Ok(self.flow.apply(&y))
            }
        }
    }
}

fn guard(x: &State, t: f64) -> Result<()> {
    let norm = x.norm();
    if !x.is_finite() || !norm.is_finite() || norm > BLOW_UP_NORM {
        return Err(Error::BlowUp { t, norm });
    }
    Ok(())
}

/// Integrates the closed loop from `x0` to `t_end` with step `dt`, recording
/// every step. A shorter final step is taken when `t_end` is not a multiple
/// of `dt`. Disturbance breakpoints before `t_end` must fall on the step grid.
pub fn solve_mild(
    system: &SystemSpec,
    x0: &State,
    d: &Disturbance,
    t_end: f64,
    dt: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument {
            arg: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument {
            arg: "t_end",
            reason: format!("must be nonnegative, got {t_end}"),
        });
    }
    system.validate(x0, d)?;
    for &b in d.breakpoints() {
        let k = b / dt;
        if b < t_end && (k - k.round()).abs() > ALIGN_TOL * k.max(1.0) {
            return Err(Error::InvalidArgument {
                arg: "disturbance",
                reason: format!("breakpoint {b} is not on the time grid of step {dt}"),
            });
        }
    }

    let full_steps = ((t_end / dt) * (1.0 + 1e-12)).floor() as usize;
    let remainder = t_end - full_steps as f64 * dt;
    let partial = remainder > 1e-12 * dt.max(t_end);

    let stepper = Stepper::new(system, x0, dt, opts)?;
    let mut interpolated = stepper.interpolated;
    let tail = if partial {
        let s = Stepper::new(system, x0, remainder, opts)?;
        interpolated |= s.interpolated;
        Some(s)
    } else {
        None
    };

    let capacity = full_steps + 1 + usize::from(partial);
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    times.push(0.0);
    states.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..full_steps {
        let t = k as f64 * dt;
        x = stepper.step(&x, d.at(t), dt)?;
        let t_next = (k + 1) as f64 * dt;
        guard(&x, t_next)?;
        times.push(t_next);
        states.push(x.clone());
    }
    if let Some(s) = tail {
        let t = full_steps as f64 * dt;
        x = s.step(&x, d.at(t), remainder)?;
        guard(&x, t_end)?;
        times.push(t_end);
        states.push(x);
    }

    Ok(Trajectory {
        times,
        states,
        scheme: stepper.scheme,
        substep: stepper.substep,
        dt,
        interpolated,
    })
}

/// Fixed-point iteration of the variation-of-constants map
/// `x ↦ T(·)x₀ − ∫₀^· T(· − s)Bσ(B*x(s) + d(s)) ds` on `[0, t1]`, with the
/// integral discretized by the trapezoidal rule at step `dt`. Iterate zero is
/// `s ↦ T(s)x₀`; the value at `t1` of the final iterate is returned.
pub fn picard_iterate(
    system: &SystemSpec,
    x0: &State,
    d: &Disturbance,
    t1: f64,
    iterations: usize,
    dt: f64,
    alignment: Alignment,
) -> Result<State> {
    if !(dt > 0.0 && t1 >= 0.0) {
        return Err(Error::InvalidArgument {
            arg: "dt",
            reason: "need dt > 0 and t1 >= 0".into(),
        });
    }
    system.validate(x0, d)?;
    let steps = (t1 / dt).round();
    if (steps * dt - t1).abs() > ALIGN_TOL * t1.max(dt) {
        return Err(Error::InvalidArgument {
            arg: "t1",
            reason: format!("{t1} is not a multiple of dt = {dt}"),
        });
    }
    let m = steps as usize;

    let flows: Vec<LinearFlow> = (0..=m)
        .map(|j| LinearFlow::new(&system.generator, j as f64 * dt, x0, alignment).map(|(f, _)| f))
        .collect::<Result<_>>()?;
    let free: Vec<State> = flows.iter().map(|f| f.apply(x0)).collect();
    if iterations == 0 {
        return Ok(free[m].clone());
    }

    let mut current = free.clone();
    let mut last_increment = f64::INFINITY;
    for it in 0..iterations {
        let forcing: Vec<State> = (0..=m)
            .map(|k| {
                let arg = system.input.apply_adjoint(&current[k])?.add(d.at(k as f64 * dt))?;
                system.input.apply(&system.feedback.apply_state(&arg))
            })
            .collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(m + 1);
        let mut increment: f64 = 0.0;
        for j in 0..=m {
            let mut x = free[j].clone();
            for k in 0..=j {
                if j == 0 {
                    break;
                }
                let w = if k == 0 || k == j { 0.5 * dt } else { dt };
                x = x.axpy(-w, &flows[j - k].apply(&forcing[k]))?;
            }
            increment = increment.max(x.sub(&current[j])?.norm());
            next.push(x);
        }
        if !increment.is_finite() || (it >= 2 && increment > last_increment && increment > 1e-12 * (1.0 + x0.norm())) {
            return Err(Error::PicardDivergence {
                iteration: it,
                increment,
            });
        }
        last_increment = increment;
        current = next;
    }
    Ok(current.swap_remove(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallRow {
    pub t: f64,
    /// `‖x(t) − y(t)‖`
    pub lhs: f64,
    /// `(‖x₀ − y₀‖ + ∫₀ᵗ ‖B‖k_r‖d − d̃‖) · e^{t‖B‖²k_r}`
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallReport {
    pub rows: Vec<GronwallRow>,
    pub worst_margin: f64,
    /// Upper bound on every argument of `σ` along both trajectories, from
    /// `‖B*x + d‖ ≤ ‖B‖‖x‖ + ‖d‖`; `k_r` must be valid on this radius.
    pub radius_bound: f64,
    pub pass: bool,
}

/// Compares two trajectories against the continuous-dependence estimate.
#[allow(clippy::too_many_arguments)]
pub fn gronwall_check(
    traj_x: &Trajectory,
    traj_y: &Trajectory,
    d: &Disturbance,
    d_tilde: &Disturbance,
    k_r: f64,
    norm_b: f64,
    tolerance: f64,
) -> Result<GronwallReport> {
    if traj_x.len() != traj_y.len()
        || traj_x
            .times
            .iter()
            .zip(&traj_y.times)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
    {
        return Err(Error::InvalidArgument {
            arg: "trajectories",
            reason: "time grids differ".into(),
        });
    }
    let initial_gap = traj_x.states[0].sub(&traj_y.states[0])?.norm();
    let growth = norm_b * norm_b * k_r;
    let mut rows = Vec::with_capacity(traj_x.len());
    let mut worst_margin = f64::INFINITY;
    let mut radius_bound: f64 = 0.0;
    for ((&t, x), y) in traj_x.times.iter().zip(&traj_x.states).zip(&traj_y.states) {
        let lhs = x.sub(y)?.norm();
        let forcing = norm_b * k_r * d.integrate_diff_norm(d_tilde, t)?;
        let rhs = (initial_gap + forcing) * (t * growth).exp();
        worst_margin = worst_margin.min(rhs - lhs);
        radius_bound = radius_bound
            .max(norm_b * x.norm() + d.at(t).norm())
            .max(norm_b * y.norm() + d_tilde.at(t).norm());
        rows.push(GronwallRow { t, lhs, rhs });
    }
    Ok(GronwallReport {
        rows,
        worst_margin,
        radius_bound,
        pass: worst_margin >= -tolerance,
    })
}
