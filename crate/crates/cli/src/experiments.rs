//! Experiment runners: config in, evidence plus verdicts out.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use satlab_core::feedback;
use satlab_core::lyapunov::{self, DiniOptions};
use satlab_core::oracles;
use satlab_core::sampling::{self, FourierProfile, SampleRng};
use satlab_core::stability::{self, BallSampler, FitOptions, SimulationOptions};
use satlab_core::systems::{gronwall_check, solve_mild};
use satlab_core::{
    Alignment, Disturbance, Error, FeedbackMap, FiniteVector, GeneratorSpec, GridFunction, InputOperator, LyapunovSpec,
    Scheme, SolverOptions, State, Substep, SystemSpec, Verdict,
};

use crate::config::{
    AlignmentKind, Config, Diagnostic, DisturbanceKind, Experiment, FeedbackKind, GeneratorKind, InitialKind,
    SamplerKind, SchemeKind, Source, SubstepKind, SystemConfig,
};
use crate::record::{Evidence, VerdictRow};

#[derive(Debug)]
pub enum RunError {
    Config(Diagnostic),
    Numeric(String),
}

/// Experiment context: parsed config, its source for diagnostics and the
/// effective CLI overrides.
pub struct Context<'a> {
    pub config: &'a Config,
    pub source: &'a Source,
    pub seed: u64,
    pub strict_alignment: bool,
}

type Outcome = Result<(Evidence, Vec<VerdictRow>), RunError>;

impl Context<'_> {
    /// Numeric failures become exit-3 errors; everything else is a config
    /// problem anchored at `table.key`.
    fn core(&self, table: &'static str, key: &'static str) -> impl Fn(Error) -> RunError + '_ {
        move |e| match e {
            Error::BlowUp { .. } | Error::PicardDivergence { .. } | Error::Quadrature { .. } | Error::Singular(_) => {
                RunError::Numeric(e.to_string())
            }
            other => RunError::Config(self.source.at_key(table, key, other.to_string())),
        }
    }

    fn config_error(&self, table: &str, key: &str, msg: impl Into<String>) -> RunError {
        RunError::Config(self.source.at_key(table, key, msg))
    }

    fn rng(&self) -> SampleRng {
        sampling::seeded_rng(self.seed)
    }

    fn solver(&self) -> SolverOptions {
        let n = &self.config.numerics;
        SolverOptions {
            scheme: match n.scheme {
                SchemeKind::Auto => Scheme::Auto,
                SchemeKind::Lie => Scheme::Lie,
                SchemeKind::Strang => Scheme::Strang,
            },
            substep: match n.substep {
                SubstepKind::Auto => Substep::Auto,
                SubstepKind::Exact => Substep::Exact,
                SubstepKind::Rk4 => Substep::Rk4,
            },
            alignment: self.alignment(),
        }
    }

    fn alignment(&self) -> Alignment {
        if self.strict_alignment {
            return Alignment::Strict;
        }
        match self.config.numerics.alignment {
            AlignmentKind::Strict => Alignment::Strict,
            AlignmentKind::Interpolate => Alignment::Interpolate,
        }
    }

    fn tolerance(&self, default: f64) -> f64 {
        self.config.numerics.tolerance.unwrap_or(default)
    }

    fn system_config(&self) -> Result<&SystemConfig, RunError> {
        self.config.system.as_ref().ok_or_else(|| {
            self.config_error(
                "",
                "experiment",
                format!("experiment `{}` needs a [system] table", self.config.experiment.name()),
            )
        })
    }

    fn system(&self) -> Result<SystemSpec, RunError> {
        build_system(self.system_config()?).map_err(self.core("system", "feedback"))
    }

    /// Zero state of the right kind and size for the configured system.
    fn template(&self, system: &SystemSpec) -> State {
        match &system.generator {
            GeneratorSpec::Matrix(a) => State::Vector(FiniteVector::zeros(a.nrows())),
            _ => State::Grid(GridFunction::zeros(self.config.numerics.cells)),
        }
    }

    fn initial_state(&self, template: &State, rng: &mut SampleRng) -> Result<State, RunError> {
        let init = &self.config.initial;
        let amp = init.amplitude.unwrap_or(1.0);
        let cells = self.config.numerics.cells;
        let grid_only =
            |what: &str| self.config_error("initial", "kind", format!("{what} initial state needs a grid system"));
        let state = match (init.kind, template) {
            (InitialKind::Random, State::Grid(_)) => State::Grid(sampling::random_profile(rng, cells, amp)),
            (InitialKind::Random, v) => sampling::random_state_in_ball(rng, v, amp),
            (InitialKind::Constant, t) => t.map(|_| init.value.unwrap_or(0.0)),
            (InitialKind::Fourier, State::Grid(_)) => {
                let modes = init.modes.unwrap_or(3);
                State::Grid(FourierProfile::random(rng, modes).scaled(amp).sample(cells))
            }
            (InitialKind::Fourier, _) => return Err(grid_only("fourier")),
            (InitialKind::Counterexample, State::Grid(_)) => {
                let n = init.n.unwrap_or(1);
                let f = oracles::counterexample_profile(n, cells).map_err(self.core("initial", "n"))?;
                State::Grid(f.map(|v| v * amp))
            }
            (InitialKind::Counterexample, _) => return Err(grid_only("counterexample")),
            (InitialKind::Vector, t) => {
                let values = init.values.clone().unwrap_or_default();
                if values.len() != t.dim() {
                    return Err(self.config_error(
                        "initial",
                        "values",
                        format!(
                            "`values` has {} entries, the state space needs {}",
                            values.len(),
                            t.dim()
                        ),
                    ));
                }
                match t {
                    State::Grid(_) => State::Grid(GridFunction::new(values).map_err(self.core("initial", "values"))?),
                    State::Vector(_) => {
                        State::Vector(FiniteVector::new(values).map_err(self.core("initial", "values"))?)
                    }
                }
            }
        };
        Ok(state)
    }

    fn disturbance(&self, input_like: &State, horizon: f64, rng: &mut SampleRng) -> Disturbance {
        let d = &self.config.disturbance;
        match d.kind {
            DisturbanceKind::Zero => Disturbance::zero_like(input_like),
            DisturbanceKind::Constant => Disturbance::constant(input_like.map(|_| d.value.unwrap_or(0.0))),
            DisturbanceKind::RandomPiecewise => sampling::random_piecewise_disturbance(
                rng,
                input_like,
                d.pieces.unwrap_or(4),
                d.amplitude.unwrap_or(1.0),
                horizon,
                d.step.unwrap_or(0.1),
            ),
        }
    }

    fn input_like(&self, system: &SystemSpec, x: &State) -> Result<State, RunError> {
        system
            .input
            .apply_adjoint(x)
            .map_err(self.core("system", "input_matrix"))
    }
}

pub fn build_system(c: &SystemConfig) -> satlab_core::Result<SystemSpec> {
    let generator = match c.generator {
        GeneratorKind::Zero => GeneratorSpec::Zero,
        GeneratorKind::PeriodicShift => GeneratorSpec::PeriodicShift,
        GeneratorKind::ScalarDiagonal => GeneratorSpec::ScalarDiagonal {
            alpha: c.alpha.unwrap_or(0.0),
        },
        GeneratorKind::Matrix => GeneratorSpec::Matrix(rows_to_matrix(c.matrix.as_deref().unwrap_or(&[]))),
    };
    let input = match &c.input_matrix {
        Some(b) => InputOperator::Matrix(rows_to_matrix(b)),
        None => InputOperator::Scalar(c.input),
    };
    let feedback = match c.feedback {
        FeedbackKind::Identity => FeedbackMap::Identity,
        FeedbackKind::Sat => FeedbackMap::SatPointwise,
        FeedbackKind::DeadzoneLinear => FeedbackMap::deadzone_linear(c.delta.unwrap_or(0.0))?,
        FeedbackKind::Tabulated => FeedbackMap::tabulated(
            c.table_x.clone().unwrap_or_default(),
            c.table_y.clone().unwrap_or_default(),
        )?,
    };
    Ok(SystemSpec::new(generator, input, feedback))
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

fn fmt_t(t: f64) -> String {
    format!("{t}")
}

pub fn run(ctx: &Context) -> Outcome {
    match ctx.config.experiment {
        Experiment::Simulate => simulate(ctx),
        Experiment::Counterexample => counterexample(ctx),
        Experiment::TransportEquality => transport_equality(ctx),
        Experiment::LyapunovCheck => lyapunov_check(ctx),
        Experiment::IssCheck => iss_check(ctx),
        Experiment::GronwallCheck => gronwall(ctx),
        Experiment::UgasFalsify => ugas_falsify(ctx),
        Experiment::SemiglobalFit => semiglobal_fit(ctx),
        Experiment::PropertySuite => property_suite(ctx),
    }
}

/// Closed-form reference for the unit-input saturated ODE and transport
/// systems at rest input.
fn exact_reference<'a>(
    system: &SystemSpec,
    x0: &'a State,
    d: &Disturbance,
    alignment: Alignment,
) -> Option<Box<dyn Fn(f64) -> satlab_core::Result<f64> + 'a>> {
    let f = x0.as_grid()?;
    let unit_sat = system.input == InputOperator::Scalar(1.0) && system.feedback == FeedbackMap::SatPointwise;
    if !unit_sat || d.sup_norm() != 0.0 {
        return None;
    }
    match system.generator {
        GeneratorSpec::Zero => Some(Box::new(move |t| Ok(oracles::exact_sat_ode_solution(f, t)?.norm_l2()))),
        GeneratorSpec::PeriodicShift => Some(Box::new(move |t| {
            Ok(oracles::exact_sat_transport_solution(f, t, alignment)?.norm_l2())
        })),
        _ => None,
    }
}

fn simulate(ctx: &Context) -> Outcome {
    let n = &ctx.config.numerics;
    let system = ctx.system()?;
    let mut rng = ctx.rng();
    let x0 = ctx.initial_state(&ctx.template(&system), &mut rng)?;
    let like = ctx.input_like(&system, &x0)?;
    let d = ctx.disturbance(&like, n.t_end, &mut rng);
    let traj = solve_mild(&system, &x0, &d, n.t_end, n.dt, &ctx.solver()).map_err(ctx.core("numerics", "dt"))?;
    let reference = exact_reference(&system, &x0, &d, ctx.alignment());

    let mut ev = if reference.is_some() {
        Evidence::new(&[
            ("t", "s"),
            ("norm_x", "1"),
            ("norm_d", "1"),
            ("exact_norm", "1"),
            ("abs_error", "1"),
        ])
    } else {
        Evidence::new(&[("t", "s"), ("norm_x", "1"), ("norm_d", "1")])
    };
    let mut max_err: f64 = 0.0;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![*t, x.norm(), d.at(*t).norm()];
        if let Some(exact) = &reference {
            let e = exact(*t).map_err(ctx.core("numerics", "dt"))?;
            let err = (x.norm() - e).abs();
            max_err = max_err.max(err);
            row.extend([e, err]);
        }
        ev.push(row);
    }
    ev.note("generator", system.generator.name());
    ev.note("scheme", traj.scheme);
    ev.note("substep", traj.substep);
    ev.note("interpolated", traj.interpolated);
    ev.note("final_norm", traj.final_state().norm());

    let mut verdicts = Vec::new();
    if reference.is_some() {
        let tol = ctx.tolerance(1e-9);
        verdicts.push(VerdictRow::from_margin(
            "exact-agreement",
            tol - max_err,
            format!("max |norm - exact norm| = {max_err:.3e}, tolerance {tol:e}"),
        ));
    }
    Ok((ev, verdicts))
}

fn family_defaults(ctx: &Context) -> (Vec<f64>, Vec<u64>, f64) {
    let f = &ctx.config.family;
    (
        f.t_grid.clone().unwrap_or_else(|| vec![0.5, 1.0, 5.0, 10.0]),
        f.ladder.clone().unwrap_or_else(oracles::default_ladder),
        f.threshold.unwrap_or(0.5),
    )
}

fn counterexample(ctx: &Context) -> Outcome {
    let (t_grid, ladder, threshold) = family_defaults(ctx);
    let limit = ctx.config.family.limit_level.unwrap_or(0.99);
    let usable: Vec<u64> = ladder.iter().copied().filter(|&n| n >= 2).collect();
    if usable.is_empty() {
        return Err(ctx.config_error("family", "ladder", "`ladder` needs at least one n >= 2"));
    }
    let top = *usable.iter().max().expect("nonempty");
    let mut ev = Evidence::new(&[
        ("t", "s"),
        ("n", "1"),
        ("xi_threshold", "1"),
        ("lower_bound", "1"),
        ("lower_bound_sq", "1"),
        ("norm", "1"),
        ("head_sq", "1"),
        ("tail_sq", "1"),
        ("top_bound", "1"),
    ]);
    let mut verdicts = Vec::new();
    let mut witnesses = Vec::new();
    for &t in &t_grid {
        let top_bound = oracles::norm_lower_bound(top, t)
            .map_err(ctx.core("family", "t_grid"))?
            .sqrt();
        let witness = oracles::find_witness_n(t, threshold, &usable).map_err(ctx.core("family", "ladder"))?;
        match witness {
            Some(n) => {
                let xi = oracles::xi_threshold(n, t).map_err(ctx.core("family", "ladder"))?;
                let lb_sq = oracles::norm_lower_bound(n, t).map_err(ctx.core("family", "ladder"))?;
                let lb = lb_sq.sqrt();
                let q = oracles::counterexample_norm_sq(n, t).map_err(ctx.core("family", "ladder"))?;
                ev.push(vec![t, n as f64, xi, lb, lb_sq, q.norm(), q.head, q.tail, top_bound]);
                verdicts.push(VerdictRow::from_margin(
                    format!("bound-witness t={}", fmt_t(t)),
                    lb - threshold,
                    format!("n = {n}, ‖x(t)‖ ≥ {lb:.6}"),
                ));
                verdicts.push(VerdictRow::from_margin(
                    format!("quadrature-witness t={}", fmt_t(t)),
                    q.norm() - threshold,
                    format!("n = {n}, quadrature norm {:.6}", q.norm()),
                ));
                witnesses.push(serde_json::json!({"t": t, "n": n, "lower_bound": lb, "norm": q.norm()}));
            }
            None => {
                ev.push(vec![
                    t,
                    f64::NAN,
                    f64::NAN,
                    f64::NAN,
                    f64::NAN,
                    f64::NAN,
                    f64::NAN,
                    f64::NAN,
                    top_bound,
                ]);
                verdicts.push(VerdictRow::from_margin(
                    format!("bound-witness t={}", fmt_t(t)),
                    top_bound - threshold,
                    format!("no ladder entry clears {threshold}"),
                ));
            }
        }
        verdicts.push(VerdictRow::from_margin(
            format!("bound-limit t={}", fmt_t(t)),
            top_bound - limit,
            format!("lower bound at n = {top} is {top_bound:.6}, level {limit}"),
        ));
    }
    ev.note("threshold", threshold);
    ev.note("witnesses", witnesses);
    ev.note("ladder_max", top);
    Ok((ev, verdicts))
}

fn transport_equality(ctx: &Context) -> Outcome {
    let n = &ctx.config.numerics;
    let mut rng = ctx.rng();
    let template = State::Grid(GridFunction::zeros(n.cells));
    let x0 = ctx.initial_state(&template, &mut rng)?;
    let f = x0
        .as_grid()
        .ok_or_else(|| ctx.config_error("initial", "kind", "transport-equality needs a grid profile"))?;
    let times = ctx
        .config
        .transport
        .times
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.25, 0.5, 1.0, 2.0, 5.0]);
    let alignment = ctx.alignment();
    let mut ev = Evidence::new(&[("t", "s"), ("norm_x", "1"), ("norm_y", "1"), ("abs_diff", "1")]);
    let mut worst: f64 = 0.0;
    for &t in &times {
        let x = oracles::exact_sat_ode_solution(f, t).map_err(ctx.core("transport", "times"))?;
        let y = oracles::exact_sat_transport_solution(f, t, alignment).map_err(ctx.core("transport", "times"))?;
        let (nx, ny) = (x.norm_l2(), y.norm_l2());
        let diff = (nx - ny).abs();
        worst = worst.max(diff);
        ev.push(vec![t, nx, ny, diff]);
    }
    let tol = ctx.tolerance(1e-12);
    ev.note("initial_norm", f.norm_l2());
    ev.note("cells", n.cells);
    Ok((
        ev,
        vec![VerdictRow::from_margin(
            "norm-identity",
            tol - worst,
            format!("max |‖x‖ − ‖y‖| = {worst:.3e}, tolerance {tol:e}"),
        )],
    ))
}

fn lyapunov_check(ctx: &Context) -> Outcome {
    let system = ctx.system()?;
    let GeneratorSpec::Matrix(a) = &system.generator else {
        return Err(ctx.config_error("system", "generator", "lyapunov-check needs a matrix generator"));
    };
    let dim = a.nrows();
    let template = State::Vector(FiniteVector::zeros(dim));
    let a_tilde_spec = system
        .closed_loop_generator(&template)
        .map_err(ctx.core("system", "generator"))?;
    let GeneratorSpec::Matrix(a_tilde) = &a_tilde_spec else {
        return Err(ctx.config_error("system", "generator", "closed loop is not a matrix"));
    };
    let n = &ctx.config.numerics;
    let lc = &ctx.config.lyapunov;
    let tol = ctx.tolerance(1e-8);
    let mut rng = ctx.rng();
    let mut verdicts = Vec::new();
    let mut ev = Evidence::new(&[
        ("index", "1"),
        ("norm_x", "1"),
        ("v_quadratic", "1"),
        ("form_value", "1"),
        ("v_sup", "1"),
    ]);

    let abscissa = satlab_core::linalg::spectral_abscissa(a_tilde);
    ev.note("closed_loop_abscissa", abscissa);
    verdicts.push(VerdictRow::from_margin(
        "closed-loop-hurwitz",
        -abscissa,
        format!("spectral abscissa {abscissa:.6e}"),
    ));
    let amplitude = lc.amplitude.unwrap_or(1.0);
    let xs: Vec<DVector<f64>> = (0..n.samples)
        .map(|_| sampling::random_gaussian_vector(&mut rng, dim).as_dvector() * amplitude)
        .collect();

    let p = match lyapunov::solve_lyapunov_finite(a_tilde) {
        Ok(p) => Some(p),
        Err(Error::NotHurwitz { .. }) => None,
        Err(e) => return Err(ctx.core("system", "matrix")(e)),
    };
    let mut form_values = vec![f64::NAN; xs.len()];
    let mut quad_values = vec![f64::NAN; xs.len()];
    if let Some(p) = &p {
        let residual = lyapunov::lyapunov_residual(a_tilde, p);
        let scale = 1.0 + p.norm();
        verdicts.push(VerdictRow::from_margin(
            "lyapunov-residual",
            tol * scale - residual,
            format!("‖ÃᵀP + PÃ + I‖_F = {residual:.3e}"),
        ));
        let min_eig = p.clone().symmetric_eigen().eigenvalues.min();
        let pd = lyapunov::is_positive_definite(p);
        verdicts.push(VerdictRow::with_verdict(
            "positive-definite",
            if pd { Verdict::Pass } else { Verdict::Fail },
            min_eig,
            format!("smallest eigenvalue {min_eig:.6e}"),
        ));
        let form = lyapunov::check_quadratic_form(p, a_tilde, &xs, tol).map_err(ctx.core("numerics", "samples"))?;
        verdicts.push(VerdictRow::from_margin(
            "quadratic-decay",
            tol - form.max_value,
            format!(
                "max 2⟨Ãx,Px⟩ + ‖x‖² = {:.3e} over {} samples",
                form.max_value, form.sample_count
            ),
        ));
        for (i, x) in xs.iter().enumerate() {
            quad_values[i] = x.dot(&(p * x));
            form_values[i] = 2.0 * (a_tilde * x).dot(&(p * x)) + x.norm_squared();
        }
        ev.note(
            "p",
            p.row_iter()
                .map(|r| r.iter().copied().collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        );
    }

    let mut sup_values = vec![f64::NAN; xs.len()];
    if let Some(omega) = lc.omega {
        let eq = lyapunov::check_dissipativity_equivalence(&system.generator, omega, n.samples, ctx.seed, tol)
            .map_err(ctx.core("lyapunov", "omega"))?;
        ev.note("equivalence", &eq);
        let spread = eq
            .dissipative_margin
            .abs()
            .min(eq.contraction_margin.abs())
            .min(eq.lyapunov_margin.abs());
        verdicts.push(VerdictRow::with_verdict(
            "equivalence-consistent",
            if eq.consistent { Verdict::Pass } else { Verdict::Fail },
            if eq.consistent { spread } else { -spread },
            format!(
                "dissipative {}, contraction {}, lyapunov {}",
                eq.dissipative, eq.contraction, eq.lyapunov
            ),
        ));

        let horizon = lc.horizon.unwrap_or(10.0);
        let cert = lyapunov::certify_semigroup_bound(&a_tilde_spec, omega, horizon, 1000)
            .map_err(ctx.core("lyapunov", "omega"))?;
        ev.note("certified_m", cert.m_bound);
        if cert.m_bound.is_finite() {
            let spec = LyapunovSpec::sup_weighted(omega, cert.m_bound, horizon, lc.s_steps.unwrap_or(200))
                .map_err(ctx.core("lyapunov", "s_steps"))?;
            let pairs = lyapunov::random_vector_pairs(&mut rng, dim, n.samples, amplitude);
            let rep = lyapunov::check_sup_weighted_properties(&spec, &a_tilde_spec, &pairs, &[0.1, 1.0], 1e-12)
                .map_err(ctx.core("lyapunov", "omega"))?;
            let worst = rep
                .lower_margin
                .min(rep.upper_margin)
                .min(rep.lipschitz_margin)
                .min(rep.decay_margin);
            verdicts.push(VerdictRow::with_verdict(
                "sup-weighted-properties",
                if rep.pass { Verdict::Pass } else { Verdict::Fail },
                worst,
                format!(
                    "M = {:.6}, lower {:.2e}, upper {:.2e}, lipschitz {:.2e}, decay {:.2e}",
                    cert.m_bound, rep.lower_margin, rep.upper_margin, rep.lipschitz_margin, rep.decay_margin
                ),
            ));
            for (i, x) in xs.iter().enumerate() {
                let s = State::Vector(FiniteVector::new(x.iter().copied().collect()).expect("finite"));
                sup_values[i] =
                    lyapunov::v_eval(&spec, Some(&a_tilde_spec), &s).map_err(ctx.core("lyapunov", "omega"))?;
            }
        } else {
            verdicts.push(VerdictRow::with_verdict(
                "sup-weighted-properties",
                Verdict::Inconclusive,
                f64::NAN,
                format!("no finite M certifies decay rate ω = {omega} for the closed loop"),
            ));
        }
    }
    for (i, x) in xs.iter().enumerate() {
        ev.push(vec![i as f64, x.norm(), quad_values[i], form_values[i], sup_values[i]]);
    }
    Ok((ev, verdicts))
}

fn iss_check(ctx: &Context) -> Outcome {
    let system = ctx.system()?;
    let n = &ctx.config.numerics;
    let ic = &ctx.config.iss;
    let rate = lyapunov::dissipativity_rate(&system.generator);
    let alpha = ic.alpha.unwrap_or(rate);
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(ctx.config_error(
            "system",
            "generator",
            format!("generator is not strictly dissipative (rate {rate}); set [iss] alpha"),
        ));
    }
    let epsilon = ic.epsilon.unwrap_or(alpha);
    if epsilon >= 2.0 * alpha {
        return Err(ctx.config_error(
            "iss",
            "epsilon",
            format!("`epsilon` must be below 2 alpha = {}", 2.0 * alpha),
        ));
    }
    let k_r = ic.k_r.unwrap_or_else(|| system.feedback.lipschitz_bound());
    let norm_b = system.input.norm();
    let template = ctx.template(&system);
    let like = ctx.input_like(&system, &template)?;
    let mut rng = ctx.rng();
    let samples: Vec<(State, Disturbance)> = (0..n.samples)
        .map(|_| {
            let x0 = sampling::random_state_in_ball(&mut rng, &template, ic.x0_radius.unwrap_or(5.0));
            let d = sampling::random_piecewise_disturbance(
                &mut rng,
                &like,
                ic.pieces.unwrap_or(4),
                ic.d_max.unwrap_or(1.0),
                n.t_end,
                ic.step.unwrap_or(0.1),
            );
            (x0, d)
        })
        .collect();
    let opts = DiniOptions {
        solver: ctx.solver(),
        ..DiniOptions::default()
    };
    let chain = lyapunov::check_dissipation_chain(&system, alpha, k_r, epsilon, &samples, &opts, ctx.tolerance(1e-2))
        .map_err(ctx.core("iss", "alpha"))?;

    let mut ev = Evidence::new(&[
        ("index", "1"),
        ("norm_x0", "1"),
        ("sup_d", "1"),
        ("dini", "1/s"),
        ("dissipation_bound", "1/s"),
        ("iss_worst_ratio", "1"),
    ]);
    let mut iss_margin = f64::INFINITY;
    let mut iss_ratio: f64 = 0.0;
    for (i, (x0, d)) in samples.iter().enumerate() {
        let traj = solve_mild(&system, x0, d, n.t_end, n.dt, &ctx.solver()).map_err(ctx.core("numerics", "dt"))?;
        let rep = lyapunov::check_iss_estimate(&traj, d, alpha, epsilon, k_r, norm_b, 0.0)
            .map_err(ctx.core("iss", "epsilon"))?;
        iss_margin = iss_margin.min(rep.worst_margin);
        iss_ratio = iss_ratio.max(rep.worst_ratio);
        let row = &chain.rows[i];
        ev.push(vec![
            i as f64,
            x0.norm(),
            d.sup_norm(),
            row.dini,
            row.bound,
            rep.worst_ratio,
        ]);
    }
    ev.note("alpha", alpha);
    ev.note("epsilon", epsilon);
    ev.note("k_r", k_r);
    ev.note("norm_b", norm_b);
    let mut verdicts = vec![
        VerdictRow::with_verdict(
            "dissipation-chain",
            if chain.pass { Verdict::Pass } else { Verdict::Fail },
            chain.worst_margin,
            format!("{} samples", chain.rows.len()),
        ),
        VerdictRow::from_margin(
            "iss-envelope",
            iss_margin,
            format!("worst ‖x(t)‖/(β + ρ) = {iss_ratio:.6}"),
        ),
    ];
    if let Some(amps) = &ic.gain_amplitudes {
        let direction = like.map(|_| 1.0);
        let gain = stability::fit_iss_gain(&system, &template, &direction, amps, n.t_end, n.dt, &ctx.solver())
            .map_err(ctx.core("iss", "gain_amplitudes"))?;
        let margin = gain
            .rows
            .iter()
            .map(|r| lyapunov::iss_gain(alpha, epsilon, k_r, norm_b, r.amplitude) - r.response)
            .fold(f64::INFINITY, f64::min);
        verdicts.push(VerdictRow::from_margin(
            "gain-below-rho",
            margin,
            format!("max response/amplitude {:.6}", gain.max_ratio),
        ));
        let mut sorted = gain.rows.clone();
        sorted.sort_by(|a, b| a.amplitude.total_cmp(&b.amplitude));
        let step = sorted
            .windows(2)
            .map(|w| w[1].response - w[0].response)
            .fold(f64::INFINITY, f64::min);
        verdicts.push(VerdictRow::with_verdict(
            "gain-monotone",
            if gain.monotone { Verdict::Pass } else { Verdict::Fail },
            step,
            "smallest response increment between consecutive amplitudes",
        ));
        ev.note("gain", gain);
    }
    Ok((ev, verdicts))
}

fn gronwall(ctx: &Context) -> Outcome {
    let system = ctx.system()?;
    let n = &ctx.config.numerics;
    let gc = &ctx.config.gronwall;
    let k_r = gc.k_r.unwrap_or_else(|| system.feedback.lipschitz_bound());
    let norm_b = system.input.norm();
    let template = ctx.template(&system);
    let like = ctx.input_like(&system, &template)?;
    let mut rng = ctx.rng();
    let step = gc.step.unwrap_or(0.1);
    let d_max = gc.d_max.unwrap_or(1.0);
    let mut ev = Evidence::new(&[("pair", "1"), ("t", "s"), ("lhs", "1"), ("rhs", "1")]);
    let mut worst = f64::INFINITY;
    for k in 0..n.samples {
        let x0 = match &template {
            State::Grid(_) => State::Grid(sampling::random_profile(
                &mut rng,
                n.cells,
                gc.x0_amplitude.unwrap_or(3.0),
            )),
            v => sampling::random_state_in_ball(&mut rng, v, gc.x0_amplitude.unwrap_or(3.0)),
        };
        let bump = sampling::random_state_in_ball(&mut rng, &template, gc.perturbation.unwrap_or(0.5));
        let y0 = x0.add(&bump).map_err(ctx.core("system", "generator"))?;
        let d = sampling::random_piecewise_disturbance(&mut rng, &like, 4, d_max, n.t_end, step);
        let d_tilde = sampling::random_piecewise_disturbance(&mut rng, &like, 4, d_max, n.t_end, step);
        let solver = ctx.solver();
        let tx = solve_mild(&system, &x0, &d, n.t_end, n.dt, &solver).map_err(ctx.core("numerics", "dt"))?;
        let ty = solve_mild(&system, &y0, &d_tilde, n.t_end, n.dt, &solver).map_err(ctx.core("numerics", "dt"))?;
        let rep = gronwall_check(&tx, &ty, &d, &d_tilde, k_r, norm_b, 0.0).map_err(ctx.core("gronwall", "k_r"))?;
        worst = worst.min(rep.worst_margin);
        for r in &rep.rows {
            ev.push(vec![k as f64, r.t, r.lhs, r.rhs]);
        }
    }
    ev.note("k_r", k_r);
    ev.note("norm_b", norm_b);
    Ok((
        ev,
        vec![VerdictRow::from_margin(
            "gronwall-bound",
            worst,
            format!("{} trajectory pairs, min (rhs − lhs)", n.samples),
        )],
    ))
}

fn ugas_falsify(ctx: &Context) -> Outcome {
    let system = ctx.system()?;
    let n = &ctx.config.numerics;
    let (t_grid, ladder, threshold) = family_defaults(ctx);
    let sim = SimulationOptions {
        cells: n.cells,
        dt: n.dt,
        solver: ctx.solver(),
    };
    let report =
        stability::falsify_ugas(&system, &t_grid, threshold, &ladder, &sim).map_err(ctx.core("family", "ladder"))?;
    let mut ev = Evidence::new(&[
        ("t", "s"),
        ("n", "1"),
        ("bound_norm", "1"),
        ("norm", "1"),
        ("envelope", "1"),
    ]);
    let mut verdicts = Vec::new();
    for &t in &t_grid {
        let env = report
            .envelope
            .iter()
            .find(|e| e.t == t)
            .map_or(f64::NAN, |e| e.sup_norm);
        match report.witnesses.iter().find(|w| w.t == t) {
            Some(w) => {
                ev.push(vec![t, w.n as f64, w.bound_norm.unwrap_or(f64::NAN), w.norm, env]);
                verdicts.push(VerdictRow::from_margin(
                    format!("witness t={}", fmt_t(t)),
                    w.margin,
                    format!("n = {}, ‖x(t)‖ = {:.6} > {threshold}", w.n, w.norm),
                ));
            }
            None => {
                ev.push(vec![t, f64::NAN, f64::NAN, f64::NAN, env]);
                verdicts.push(VerdictRow::from_margin(
                    format!("witness t={}", fmt_t(t)),
                    env - threshold,
                    format!("no candidate clears {threshold}"),
                ));
            }
        }
    }
    ev.note("method", report.method);
    ev.note("ugas", report.ugas);
    ev.note("iss", report.iss);
    ev.note("missing", &report.missing);

    if let Some(ns) = &ctx.config.family.gas_ns {
        let states = stability::counterexample_states(ns, n.cells).map_err(ctx.core("family", "gas_ns"))?;
        let tol = ctx.tolerance(1e-9);
        let gas = stability::classify_gas(
            &system,
            &states,
            ctx.config.family.gas_t_end.unwrap_or(n.t_end),
            tol,
            n.dt,
            &ctx.solver(),
        )
        .map_err(ctx.core("family", "gas_ns"))?;
        let worst = gas
            .rows
            .iter()
            .map(|r| r.max_increase)
            .fold(f64::NEG_INFINITY, f64::max);
        let final_max = gas.rows.iter().map(|r| r.final_norm).fold(0.0, f64::max);
        verdicts.push(VerdictRow::with_verdict(
            "gas-per-trajectory",
            gas.verdict,
            tol - worst,
            format!("{} trajectories, largest final norm {final_max:.6}", gas.rows.len()),
        ));
        ev.note("gas", gas);
    }
    Ok((ev, verdicts))
}

fn semiglobal_fit(ctx: &Context) -> Outcome {
    let system = ctx.system()?;
    let n = &ctx.config.numerics;
    let fc = &ctx.config.fit;
    let sampler = match (fc.sampler, &system.generator) {
        (SamplerKind::RandomVector, GeneratorSpec::Matrix(a)) => BallSampler::RandomVector { dim: a.nrows() },
        (SamplerKind::RandomVector, _) => {
            return Err(ctx.config_error("fit", "sampler", "random-vector sampler needs a matrix generator"))
        }
        (_, GeneratorSpec::Matrix(_)) => {
            return Err(ctx.config_error("fit", "sampler", "grid samplers need a grid system"))
        }
        (SamplerKind::Fourier, _) => BallSampler::Fourier {
            cells: n.cells,
            modes: fc.modes.unwrap_or(3),
        },
        (SamplerKind::Counterexample, _) => BallSampler::Counterexample {
            ladder: fc.ladder.clone().unwrap_or_else(|| vec![2, 4, 8, 16, 32]),
        },
    };
    let defaults = FitOptions::default();
    let opts = FitOptions {
        samples_per_radius: n.samples,
        fit_points: fc.fit_points.unwrap_or(defaults.fit_points),
        mu_floor: fc.mu_floor.unwrap_or(defaults.mu_floor),
        log_floor: defaults.log_floor,
        seed: ctx.seed,
        sim: SimulationOptions {
            cells: n.cells,
            dt: n.dt,
            solver: ctx.solver(),
        },
    };
    let radii = fc.radii.clone().unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0]);
    let report =
        stability::fit_semiglobal(&system, &radii, &sampler, n.t_end, &opts).map_err(ctx.core("fit", "radii"))?;
    let mut ev = Evidence::new(&[("r", "1"), ("k", "1"), ("mu", "1/s"), ("samples", "1")]);
    let mut verdicts = Vec::new();
    for row in &report.rows {
        ev.push(vec![row.r, row.k, row.mu, row.samples as f64]);
        verdicts.push(VerdictRow::with_verdict(
            format!("exponential r={}", row.r),
            row.verdict,
            row.margin,
            format!(
                "‖x(t)‖ ≤ {:.4}·e^(−{:.4}t)‖x₀‖, μ floor {}",
                row.k, row.mu, report.mu_floor
            ),
        ));
    }
    ev.note("mu_floor", report.mu_floor);
    ev.note("overall", report.verdict);
    Ok((ev, verdicts))
}

fn property_suite(ctx: &Context) -> Outcome {
    let system = ctx.system()?;
    let sigma = &system.feedback;
    let n = &ctx.config.numerics;
    let pc = &ctx.config.properties;
    let amp = pc.amplitude.unwrap_or(10.0);
    let tol = ctx.tolerance(1e-12);
    let mut rng = ctx.rng();
    let profiles: Vec<GridFunction> = (0..n.samples)
        .map(|_| sampling::random_profile(&mut rng, n.cells, amp))
        .collect();
    let partners: Vec<GridFunction> = (0..n.samples)
        .map(|_| sampling::random_profile(&mut rng, n.cells, amp))
        .collect();
    let pairs: Vec<(GridFunction, GridFunction)> = profiles.iter().cloned().zip(partners.iter().cloned()).collect();

    let mut ev = Evidence::new(&[
        ("index", "1"),
        ("norm_u", "1"),
        ("iv_lhs", "1"),
        ("iv_rhs", "1"),
        ("monotone", "1"),
    ]);
    let mut iv_margin = f64::INFINITY;
    for (i, (u, v)) in pairs.iter().enumerate() {
        let iv = feedback::check_property_iv(sigma, u, tol);
        iv_margin = iv_margin.min(iv.rhs - iv.lhs + tol);
        let du = sigma
            .apply(u)
            .zip_map(&sigma.apply(v), |a, b| a - b)
            .map_err(ctx.core("numerics", "cells"))?;
        let dx = u.zip_map(v, |a, b| a - b).map_err(ctx.core("numerics", "cells"))?;
        let mono = du.inner(&dx).map_err(ctx.core("numerics", "cells"))?;
        ev.push(vec![i as f64, u.norm_l2(), iv.lhs, iv.rhs, mono]);
    }
    let mono = feedback::check_monotone(sigma, &pairs, tol).map_err(ctx.core("numerics", "cells"))?;
    let radius = pc.lipschitz_radius.unwrap_or(1.0);
    let lip = feedback::estimate_local_lipschitz(sigma, radius, n.samples, ctx.seed)
        .map_err(ctx.core("properties", "lipschitz_radius"))?;
    let bound = sigma.lipschitz_bound();
    let c0 = feedback::estimate_property_v_constant(sigma, &pairs).map_err(ctx.core("numerics", "cells"))?;

    let fourier: Vec<(GridFunction, GridFunction)> = (0..n.samples)
        .map(|_| {
            let modes = rng.random_range(1..6usize);
            let p = FourierProfile::random(&mut rng, modes);
            (p.sample(n.cells), p.sample_derivative(n.cells))
        })
        .collect();
    let embedding = lyapunov::estimate_embedding_constant(&fourier).map_err(ctx.core("numerics", "cells"))?;

    ev.note("lipschitz_estimate", lip.estimate);
    ev.note("lipschitz_bound", bound);
    ev.note("property_v_constant", c0);
    ev.note("embedding_constant", embedding.constant);
    ev.note("nondecreasing", sigma.is_nondecreasing());
    let verdicts = vec![
        VerdictRow::from_margin(
            "property-iv",
            iv_margin,
            format!("min (⟨σ(u),u⟩ − ‖σ(u) − u‖_L1) over {} profiles", pairs.len()),
        ),
        VerdictRow::with_verdict(
            "monotone",
            if mono.pass { Verdict::Pass } else { Verdict::Fail },
            mono.min_value + tol,
            format!("min ⟨σ(u) − σ(v), u − v⟩ = {:.3e}", mono.min_value),
        ),
        VerdictRow::from_margin(
            "lipschitz-bound",
            bound - lip.estimate,
            format!("sampled quotient {:.6} in the ball of radius {radius}", lip.estimate),
        ),
    ];
    Ok((ev, verdicts))
}
