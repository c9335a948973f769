//! Lyapunov functionals and the checks built on them: quadratic and
//! sup-weighted `V`, Dini derivatives along mild solutions, the dissipation
//! bound for `V = ‖x‖²`, explicit ISS envelopes, and finite-dimensional
//! Lyapunov equations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, State};
use crate::linalg;
use crate::sampling;
use crate::systems::{solve_mild, Disturbance, GeneratorSpec, SolverOptions, SystemSpec, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub enum LyapunovSpec {
    /// `⟨Px, x⟩`; `None` means `P = I`, i.e. `‖x‖²`.
    Quadratic(Option<DMatrix<f64>>),
    /// `max_{0 ≤ s ≤ s_max} e^{ωs/2}‖T̃(s)x‖` sampled at `s_steps + 1` points.
    SupWeighted {
        omega: f64,
        m_bound: f64,
        s_max: f64,
        s_steps: usize,
    },
}

impl LyapunovSpec {
    pub fn squared_norm() -> Self {
        LyapunovSpec::Quadratic(None)
    }

    pub fn quadratic(p: DMatrix<f64>) -> Result<Self> {
        check_psd(&p)?;
        Ok(LyapunovSpec::Quadratic(Some(p)))
    }

    /// Sup-weighted functional truncated at the smallest sound horizon
    /// `(2/ω) ln M`, or at `s_max` if that is larger.
    pub fn sup_weighted(omega: f64, m_bound: f64, s_max: f64, s_steps: usize) -> Result<Self> {
        let spec = LyapunovSpec::SupWeighted {
            omega,
            m_bound,
            s_max: s_max.max(min_horizon(omega, m_bound)),
            s_steps,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LyapunovSpec::Quadratic(None) => Ok(()),
            LyapunovSpec::Quadratic(Some(p)) => check_psd(p),
            LyapunovSpec::SupWeighted {
                omega,
                m_bound,
                s_max,
                s_steps,
            } => {
                if !(*omega > 0.0 && omega.is_finite()) {
                    return Err(invalid("omega", format!("must be positive, got {omega}")));
                }
                if !(*m_bound >= 1.0 && m_bound.is_finite()) {
                    return Err(invalid("m_bound", format!("must be at least 1, got {m_bound}")));
                }
                if *s_steps == 0 {
                    return Err(invalid("s_steps", "must be positive".into()));
                }
                let need = min_horizon(*omega, *m_bound);
                if !(s_max.is_finite() && *s_max >= need * (1.0 - 1e-12)) {
                    return Err(invalid(
                        "s_max",
                        format!("{s_max} is below the truncation horizon (2/ω)·ln M = {need}"),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn min_horizon(omega: f64, m_bound: f64) -> f64 {
    2.0 / omega * m_bound.ln()
}

fn invalid(arg: &'static str, reason: String) -> Error {
    Error::InvalidArgument { arg, reason }
}

fn check_psd(p: &DMatrix<f64>) -> Result<()> {
    if !p.is_square() {
        return Err(invalid("P", "must be square".into()));
    }
    let scale = p.amax().max(1.0);
    if (p - p.transpose()).amax() > 1e-12 * scale {
        return Err(invalid("P", "must be symmetric".into()));
    }
    let min = p.clone().symmetric_eigen().eigenvalues.min();
    if min < -1e-12 * scale {
        return Err(invalid(
            "P",
            format!("must be positive semidefinite, smallest eigenvalue {min}"),
        ));
    }
    Ok(())
}

/// Evaluates `V(x)`. `a_tilde` is the generator of the semigroup weighted by
/// the sup-functional and is ignored for quadratic `V`.
pub fn v_eval(spec: &LyapunovSpec, a_tilde: Option<&GeneratorSpec>, x: &State) -> Result<f64> {
    match spec {
        LyapunovSpec::Quadratic(None) => Ok(x.norm().powi(2)),
        LyapunovSpec::Quadratic(Some(p)) => {
            check_psd(p)?;
            match x {
                State::Grid(g) if p.nrows() == 1 => Ok(p[(0, 0)] * g.norm_l2().powi(2)),
                State::Grid(_) => Err(Error::StateKind(
                    "a matrix-weighted quadratic form needs vector states".into(),
                )),
                State::Vector(v) => {
                    if p.nrows() != v.len() {
                        return Err(Error::DimensionMismatch {
                            expected: p.nrows(),
                            got: v.len(),
                        });
                    }
                    let dv = v.as_dvector();
                    Ok(dv.dot(&(p * &dv)))
                }
            }
        }
        LyapunovSpec::SupWeighted {
            omega, s_max, s_steps, ..
        } => {
            spec.validate()?;
            let a =
                a_tilde.ok_or_else(|| invalid("a_tilde", "sup-weighted V needs the closed-loop generator".into()))?;
            sup_weighted_norm(a, *omega, *s_max, *s_steps, x)
        }
    }
}

fn sup_weighted_norm(a: &GeneratorSpec, omega: f64, s_max: f64, s_steps: usize, x: &State) -> Result<f64> {
    let ds = s_max / s_steps as f64;
    let norm0 = x.norm();
    let weights = (0..=s_steps).map(|k| (0.5 * omega * k as f64 * ds).exp());
    match a {
        // Both are isometries on the grid.
        GeneratorSpec::Zero | GeneratorSpec::PeriodicShift => {
            if matches!(x, State::Vector(_)) && matches!(a, GeneratorSpec::PeriodicShift) {
                return Err(Error::StateKind("periodic shift acts on grid functions only".into()));
            }
            Ok(weights.fold(0.0, |m: f64, w| m.max(w * norm0)))
        }
        GeneratorSpec::ScalarDiagonal { alpha } => Ok((0..=s_steps)
            .map(|k| {
                let s = k as f64 * ds;
                (0.5 * omega * s - alpha * s).exp() * norm0
            })
            .fold(0.0, f64::max)),
        GeneratorSpec::Matrix(m) => {
            let v = x
                .as_vector()
                .ok_or_else(|| Error::StateKind("matrix generator acts on vectors only".into()))?;
            if m.nrows() != v.len() {
                return Err(Error::DimensionMismatch {
                    expected: m.nrows(),
                    got: v.len(),
                });
            }
            let step = linalg::expm(&(m * ds));
            let mut cur = v.as_dvector();
            let mut best: f64 = 0.0;
            for w in weights {
                best = best.max(w * cur.norm());
                cur = &step * cur;
            }
            Ok(best)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniEstimate {
    /// Richardson-extrapolated rate when at least two steps were used,
    /// otherwise the last forward quotient.
    pub value: f64,
    pub step_sizes: Vec<f64>,
    pub quotients: Vec<f64>,
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiniOptions {
    /// Strictly decreasing forward-difference steps.
    pub h_list: Vec<f64>,
    /// Integrator step; every `h` is split into `⌈h/dt⌉` equal steps.
    pub dt: f64,
    pub solver: SolverOptions,
}

impl Default for DiniOptions {
    fn default() -> Self {
        Self {
            h_list: vec![1e-2, 1e-3, 1e-4],
            dt: 1e-4,
            solver: SolverOptions::default(),
        }
    }
}

impl DiniOptions {
    fn validate(&self) -> Result<()> {
        if self.h_list.is_empty() {
            return Err(invalid("h_list", "needs at least one step".into()));
        }
        if self.h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) || self.h_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid(
                "h_list",
                "steps must be positive and strictly decreasing".into(),
            ));
        }
        let smallest = *self.h_list.last().expect("non-empty");
        if !(self.dt > 0.0 && self.dt <= smallest * (1.0 + 1e-12)) {
            return Err(invalid(
                "dt",
                format!("integrator step {} must lie in (0, {smallest}]", self.dt),
            ));
        }
        Ok(())
    }
}

/// Upper right Dini derivative of `V` along the mild solution from `x0`.
pub fn dini_derivative(
    spec: &LyapunovSpec,
    system: &SystemSpec,
    x0: &State,
    d: &Disturbance,
    opts: &DiniOptions,
) -> Result<DiniEstimate> {
    opts.validate()?;
    let a_tilde = match spec {
        LyapunovSpec::SupWeighted { .. } => Some(system.closed_loop_generator(x0)?),
        LyapunovSpec::Quadratic(_) => None,
    };
    let v0 = v_eval(spec, a_tilde.as_ref(), x0)?;
    let mut quotients = Vec::with_capacity(opts.h_list.len());
    for &h in &opts.h_list {
        let steps = (h / opts.dt * (1.0 - 1e-12)).ceil().max(1.0);
        let traj = solve_mild(system, x0, d, h, h / steps, &opts.solver)?;
        let vh = v_eval(spec, a_tilde.as_ref(), traj.final_state())?;
        quotients.push((vh - v0) / h);
    }
    let k = quotients.len();
    let (value, extrapolated) = if k >= 2 {
        let r = opts.h_list[k - 2] / opts.h_list[k - 1];
        ((r * quotients[k - 1] - quotients[k - 2]) / (r - 1.0), true)
    } else {
        (quotients[0], false)
    };
    Ok(DiniEstimate {
        value,
        step_sizes: opts.h_list.clone(),
        quotients,
        extrapolated,
    })
}

/// Largest `α` with `⟨Ax, x⟩ ≤ −α‖x‖²` for the supported generators.
pub fn dissipativity_rate(generator: &GeneratorSpec) -> f64 {
    match generator {
        GeneratorSpec::Zero | GeneratorSpec::PeriodicShift => 0.0,
        GeneratorSpec::ScalarDiagonal { alpha } => *alpha,
        GeneratorSpec::Matrix(a) => -linalg::max_symmetric_part(a).0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationRow {
    pub index: usize,
    pub dini: f64,
    /// `(ε − 2α)‖x₀‖² + (k_r‖B‖‖d(0)‖)²/ε`
    pub bound: f64,
    /// `bound − dini`
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    pub rows: Vec<DissipationRow>,
    pub worst_margin: f64,
    pub pass: bool,
}

fn check_epsilon(alpha: f64, epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 2.0 * alpha) {
        return Err(invalid(
            "epsilon",
            format!("need 0 < ε < 2α, got ε = {epsilon}, α = {alpha}"),
        ));
    }
    Ok(())
}

/// Checks the Dini derivative of `‖x‖²` against the dissipation bound at
/// every sample. Row tolerance is `rel_tol · (1 + ‖x₀‖² + ‖d(0)‖²)`.
#[allow(clippy::too_many_arguments)]
pub fn check_dissipation_chain(
    system: &SystemSpec,
    alpha: f64,
    k_r: f64,
    epsilon: f64,
    samples: &[(State, Disturbance)],
    opts: &DiniOptions,
    rel_tol: f64,
) -> Result<DissipationReport> {
    check_epsilon(alpha, epsilon)?;
    let rate = dissipativity_rate(&system.generator);
    if rate < alpha - 1e-12 * alpha.abs().max(1.0) {
        return Err(invalid(
            "alpha",
            format!("generator only satisfies ⟨Ax,x⟩ ≤ −{rate}‖x‖², not −{alpha}‖x‖²"),
        ));
    }
    let norm_b = system.input.norm();
    let spec = LyapunovSpec::squared_norm();
    let rows: Vec<DissipationRow> = samples
        .par_iter()
        .enumerate()
        .map(|(index, (x0, d))| {
            let dini = dini_derivative(&spec, system, x0, d, opts)?.value;
            let x2 = x0.norm().powi(2);
            let d0 = d.at(0.0).norm();
            let bound = (epsilon - 2.0 * alpha) * x2 + (k_r * norm_b * d0).powi(2) / epsilon;
            let tolerance = rel_tol * (1.0 + x2 + d0 * d0);
            let margin = bound - dini;
            Ok(DissipationRow {
                index,
                dini,
                bound,
                margin,
                tolerance,
                pass: margin >= -tolerance,
            })
        })
        .collect::<Result<_>>()?;
    let worst_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let pass = rows.iter().all(|r| r.pass);
    Ok(DissipationReport {
        rows,
        worst_margin,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IssRow {
    pub t: f64,
    /// `‖x(t)‖`
    pub lhs: f64,
    /// `e^{−(α−ε/2)t}‖x₀‖`
    pub beta: f64,
    /// `k_r‖B‖‖d‖_{L∞(0,t)} / √(ε(2α−ε))`
    pub rho: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IssReport {
    pub rows: Vec<IssRow>,
    pub worst_ratio: f64,
    /// `min_t (β + ρ − ‖x(t)‖)`
    pub worst_margin: f64,
    pub pass: bool,
}

/// Explicit gain the dissipation bound yields by comparison.
pub fn iss_gain(alpha: f64, epsilon: f64, k_r: f64, norm_b: f64, s: f64) -> f64 {
    k_r * norm_b * s / (epsilon * (2.0 * alpha - epsilon)).sqrt()
}

/// Checks `‖x(t)‖ ≤ e^{−(α−ε/2)t}‖x₀‖ + ρ(‖d‖_{L∞(0,t)})` at every sampled `t`.
pub fn check_iss_estimate(
    traj: &Trajectory,
    d: &Disturbance,
    alpha: f64,
    epsilon: f64,
    k_r: f64,
    norm_b: f64,
    tolerance: f64,
) -> Result<IssReport> {
    check_epsilon(alpha, epsilon)?;
    let x0 = traj.states[0].norm();
    let mut rows = Vec::with_capacity(traj.len());
    for (&t, x) in traj.times.iter().zip(&traj.states) {
        let lhs = x.norm();
        let beta = (-(alpha - 0.5 * epsilon) * t).exp() * x0;
        let rho = iss_gain(alpha, epsilon, k_r, norm_b, d.sup_norm_until(t));
        let rhs = beta + rho;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        rows.push(IssRow {
            t,
            lhs,
            beta,
            rho,
            ratio,
        });
    }
    let worst_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let worst_margin = rows
        .iter()
        .map(|r| r.beta + r.rho - r.lhs)
        .fold(f64::INFINITY, f64::min);
    Ok(IssReport {
        rows,
        worst_ratio,
        worst_margin,
        pass: worst_margin >= -tolerance,
    })
}

/// Solves `ÃᵀP + PÃ = −I` for Hurwitz `Ã` through the Kronecker form, with
/// one step of iterative refinement.
pub fn solve_lyapunov_finite(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(invalid("A", "must be square and non-empty".into()));
    }
    let abscissa = linalg::spectral_abscissa(a);
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { abscissa });
    }
    let m = a.nrows();
    let ident = DMatrix::<f64>::identity(m, m);
    let at = a.transpose();
    // vec(ÃᵀP) = (I ⊗ Ãᵀ) vec P,  vec(PÃ) = (Ãᵀ ⊗ I) vec P
    let k = ident.kronecker(&at) + at.kronecker(&ident);
    let rhs = DVector::from_iterator(m * m, (-&ident).iter().copied());
    let lu = k.clone().lu();
    let mut p = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
    let residual = &rhs - &k * &p;
    if let Some(delta) = lu.solve(&residual) {
        p += delta;
    }
    let p = DMatrix::from_column_slice(m, m, p.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

/// Frobenius norm of `ÃᵀP + PÃ + I`.
pub fn lyapunov_residual(a: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let m = a.nrows();
    (a.transpose() * p + p * a + DMatrix::<f64>::identity(m, m)).norm()
}

pub fn is_positive_definite(p: &DMatrix<f64>) -> bool {
    let sym = (p + p.transpose()) * 0.5;
    sym.cholesky().is_some()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticFormReport {
    /// `max (2⟨Ãx, Px⟩ + ‖x‖²)` over the samples
    pub max_value: f64,
    pub worst_index: usize,
    pub sample_count: usize,
    pub pass: bool,
}

/// Evaluates `2⟨Ãx, Px⟩ + ‖x‖²`, which is `≤ 0` exactly when `P` satisfies
/// the Lyapunov inequality at `x`.
pub fn check_quadratic_form(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    samples: &[DVector<f64>],
    tolerance: f64,
) -> Result<QuadraticFormReport> {
    if samples.is_empty() {
        return Err(invalid("samples", "empty sample list".into()));
    }
    if p.shape() != a.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: p.nrows(),
        });
    }
    let mut max_value = f64::NEG_INFINITY;
    let mut worst_index = 0;
    for (i, x) in samples.iter().enumerate() {
        if x.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: x.len(),
            });
        }
        let value = 2.0 * (a * x).dot(&(p * x)) + x.norm_squared();
        if value > max_value {
            max_value = value;
            worst_index = i;
        }
    }
    Ok(QuadraticFormReport {
        max_value,
        worst_index,
        sample_count: samples.len(),
        pass: max_value <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingReport {
    /// `max ‖x‖_{L∞} / (‖x‖_{L²} + ‖x′‖_{L²})`
    pub constant: f64,
    pub worst_index: usize,
    pub ratios: Vec<f64>,
}

/// Empirical constant of `‖B*x‖_{L∞} ≤ c‖x‖_{D(A)}` for `B = I` and the
/// periodic derivative, from (values, derivative) grid pairs.
pub fn estimate_embedding_constant(samples: &[(GridFunction, GridFunction)]) -> Result<EmbeddingReport> {
    if samples.is_empty() {
        return Err(invalid("samples", "empty sample list".into()));
    }
    let mut ratios = Vec::with_capacity(samples.len());
    for (x, dx) in samples {
        if x.len() != dx.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: dx.len(),
            });
        }
        let denom = x.norm_l2() + dx.norm_l2();
        if denom == 0.0 {
            return Err(invalid("samples", "zero graph norm".into()));
        }
        ratios.push(x.norm_linf() / denom);
    }
    let (worst_index, constant) =
        ratios.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, r)| if r > acc.1 { (i, r) } else { acc },
        );
    Ok(EmbeddingReport {
        constant,
        worst_index,
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub omega: f64,
    /// `max ⟨Ax,x⟩/‖x‖² + ω` over random vectors and the top eigenvector of
    /// the symmetric part
    pub dissipative_margin: f64,
    pub dissipative: bool,
    /// `max_t ‖e^{ωt}T(t)‖ − 1` on the time grid
    pub contraction_margin: f64,
    pub contraction: bool,
    /// `max (⟨Ax, x/ω⟩ + ‖x‖²)/‖x‖²`
    pub lyapunov_margin: f64,
    pub lyapunov: bool,
    pub consistent: bool,
}

fn generator_matrix(a: &GeneratorSpec) -> Result<DMatrix<f64>> {
    match a {
        GeneratorSpec::Zero => Ok(DMatrix::zeros(1, 1)),
        GeneratorSpec::ScalarDiagonal { alpha } => Ok(DMatrix::from_element(1, 1, -alpha)),
        GeneratorSpec::Matrix(m) => Ok(m.clone()),
        GeneratorSpec::PeriodicShift => Err(Error::Unsupported(
            "equivalence check needs a scalar or matrix generator".into(),
        )),
    }
}

/// Tests three equivalent statements for `A` and `ω > 0`: strict
/// dissipativity `⟨Ax,x⟩ ≤ −ω‖x‖²`, the contraction bound
/// `sup_t ‖e^{ωt}T(t)‖ ≤ 1`, and `P = I/ω` solving `⟨Ax, Px⟩ ≤ −‖x‖²`.
pub fn check_dissipativity_equivalence(
    a: &GeneratorSpec,
    omega: f64,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<EquivalenceReport> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(invalid("omega", format!("must be positive, got {omega}")));
    }
    let m = generator_matrix(a)?;
    let dim = m.nrows();
    let mut rng = sampling::seeded_rng(seed);
    let mut vectors: Vec<DVector<f64>> = (0..samples)
        .map(|_| sampling::random_unit_vector(&mut rng, dim).as_dvector())
        .collect();
    vectors.push(linalg::max_symmetric_part(&m).1);

    let dissipative_margin = vectors
        .iter()
        .map(|x| (&m * x).dot(x) / x.norm_squared() + omega)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut times: Vec<f64> = (0..=60).map(|k| 10f64.powf(-6.0 + k as f64 / 10.0)).collect();
    times.extend((1..=200).map(|k| k as f64 * 0.05));
    let contraction_margin = times
        .iter()
        .map(|&t| (omega * t).exp() * linalg::norm2(&linalg::expm(&(&m * t))) - 1.0)
        .fold(f64::NEG_INFINITY, f64::max);

    // ⟨Ax, Px⟩ = 2⟨Ax, (P/2)x⟩, so the two-term form with P/2 = I/(2ω).
    let half_p = DMatrix::<f64>::identity(dim, dim) / (2.0 * omega);
    let normalized: Vec<DVector<f64>> = vectors.iter().map(|x| x / x.norm()).collect();
    let lyapunov_margin = check_quadratic_form(&half_p, &m, &normalized, tolerance)?.max_value;

    let dissipative = dissipative_margin <= tolerance;
    let contraction = contraction_margin <= tolerance;
    let lyapunov = lyapunov_margin <= tolerance;
    Ok(EquivalenceReport {
        omega,
        dissipative_margin,
        dissipative,
        contraction_margin,
        contraction,
        lyapunov_margin,
        lyapunov,
        consistent: dissipative == contraction && contraction == lyapunov,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemigroupCertificate {
    pub omega: f64,
    /// `max_t e^{ωt}‖T(t)‖` on the sampled horizon; infinite when `ω`
    /// exceeds the decay rate.
    pub m_bound: f64,
    pub horizon: f64,
}

/// Empirical `M` in `‖T(t)‖ ≤ Me^{−ωt}`, exact for scalar generators.
pub fn certify_semigroup_bound(
    a: &GeneratorSpec,
    omega: f64,
    horizon: f64,
    steps: usize,
) -> Result<SemigroupCertificate> {
    if !(omega > 0.0 && horizon > 0.0 && steps > 0) {
        return Err(invalid("omega", "need ω > 0, horizon > 0 and steps > 0".into()));
    }
    let m_bound = match a {
        GeneratorSpec::Zero | GeneratorSpec::PeriodicShift => f64::INFINITY,
        GeneratorSpec::ScalarDiagonal { alpha } => {
            if omega <= *alpha {
                1.0
            } else {
                f64::INFINITY
            }
        }
        GeneratorSpec::Matrix(m) => {
            if omega >= -linalg::spectral_abscissa(m) {
                f64::INFINITY
            } else {
                let dt = horizon / steps as f64;
                let step = linalg::expm(&(m * dt));
                let mut power = DMatrix::<f64>::identity(m.nrows(), m.nrows());
                let mut best: f64 = 1.0;
                for k in 1..=steps {
                    power = &step * power;
                    best = best.max((omega * k as f64 * dt).exp() * linalg::norm2(&power));
                }
                best
            }
        }
    };
    Ok(SemigroupCertificate {
        omega,
        m_bound,
        horizon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupWeightedReport {
    /// `min (V(x) − ‖x‖)` and `min (M‖x‖ − V(x))`
    pub lower_margin: f64,
    pub upper_margin: f64,
    /// `min (M‖x − y‖ − |V(x) − V(y)|)`
    pub lipschitz_margin: f64,
    /// `min (e^{−ωt/2}V(x) − V(T̃(t)x))`
    pub decay_margin: f64,
    pub sample_count: usize,
    pub pass: bool,
}

/// Sandwich, Lipschitz and semigroup-decay checks for a sup-weighted `V`.
/// Each margin is compared against `rel_tol` times the scale of its terms.
pub fn check_sup_weighted_properties(
    spec: &LyapunovSpec,
    a_tilde: &GeneratorSpec,
    pairs: &[(State, State)],
    t_list: &[f64],
    rel_tol: f64,
) -> Result<SupWeightedReport> {
    let (omega, m_bound) = match spec {
        LyapunovSpec::SupWeighted { omega, m_bound, .. } => (*omega, *m_bound),
        LyapunovSpec::Quadratic(_) => {
            return Err(invalid("spec", "needs a sup-weighted functional".into()));
        }
    };
    if pairs.is_empty() {
        return Err(invalid("pairs", "empty sample list".into()));
    }
    struct Margins {
        lower: f64,
        upper: f64,
        lipschitz: f64,
        decay: f64,
        ok: bool,
    }
    let per_pair: Vec<Margins> = pairs
        .par_iter()
        .map(|(x, y)| {
            let vx = v_eval(spec, Some(a_tilde), x)?;
            let vy = v_eval(spec, Some(a_tilde), y)?;
            let nx = x.norm();
            let diff = x.sub(y)?.norm();
            let lower = vx - nx;
            let upper = m_bound * nx - vx;
            let lipschitz = m_bound * diff - (vx - vy).abs();
            let mut ok = lower >= -rel_tol * nx
                && upper >= -rel_tol * m_bound * nx
                && lipschitz >= -rel_tol * (m_bound * diff + vx.max(vy));
            let mut decay = f64::INFINITY;
            for &t in t_list {
                let moved = crate::systems::semigroup_apply(a_tilde, t, x, Default::default())?;
                let bound = (-0.5 * omega * t).exp() * vx;
                let margin = bound - v_eval(spec, Some(a_tilde), &moved)?;
                ok &= margin >= -rel_tol * vx;
                decay = decay.min(margin);
            }
            Ok(Margins {
                lower,
                upper,
                lipschitz,
                decay,
                ok,
            })
        })
        .collect::<Result<_>>()?;
    let min = |f: fn(&Margins) -> f64| per_pair.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(SupWeightedReport {
        lower_margin: min(|m| m.lower),
        upper_margin: min(|m| m.upper),
        lipschitz_margin: min(|m| m.lipschitz),
        decay_margin: min(|m| m.decay),
        sample_count: pairs.len(),
        pass: per_pair.iter().all(|m| m.ok),
    })
}

/// Random `(x, y)` vector pairs with entries of scale `amplitude`.
pub fn random_vector_pairs<R: Rng>(rng: &mut R, dim: usize, count: usize, amplitude: f64) -> Vec<(State, State)> {
    (0..count)
        .map(|_| {
            let mut draw = || {
                let s: f64 = rng.random_range(0.0..=amplitude);
                State::Vector(
                    crate::grid::FiniteVector::new(
                        sampling::random_gaussian_vector(rng, dim)
                            .entries()
                            .iter()
                            .map(|v| v * s)
                            .collect(),
                    )
                    .expect("finite by construction"),
                )
            };
            (draw(), draw())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::FeedbackMap;
    use crate::grid::FiniteVector;
    use crate::systems::InputOperator;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn grid(n: usize, c: f64) -> State {
        GridFunction::constant(n, c).unwrap().into()
    }

    fn vector(v: &[f64]) -> State {
        FiniteVector::new(v.to_vec()).unwrap().into()
    }

    #[test]
    fn v_eval_examples() {
        assert_relative_eq!(v_eval(&LyapunovSpec::squared_norm(), None, &grid(8, 2.0)).unwrap(), 4.0);
        let a = GeneratorSpec::ScalarDiagonal { alpha: 1.0 };
        for omega in [2.0, 1.0] {
            let spec = LyapunovSpec::sup_weighted(omega, 1.0, 5.0, 500).unwrap();
            let v = v_eval(&spec, Some(&a), &vector(&[-3.0])).unwrap();
            assert_relative_eq!(v, 3.0, max_relative = 1e-14);
        }
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let v = v_eval(&LyapunovSpec::quadratic(p).unwrap(), None, &vector(&[1.0, 2.0])).unwrap();
        assert_relative_eq!(v, 4.0);
    }

    #[test]
    fn sup_weighted_matrix_generator() {
        // Ã = [[-1, 10], [0, -1]]: the sup is attained away from s = 0.
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 10.0, 0.0, -1.0]);
        let cert = certify_semigroup_bound(&GeneratorSpec::Matrix(m.clone()), 0.5, 40.0, 4000).unwrap();
        assert!(cert.m_bound > 1.0 && cert.m_bound.is_finite());
        let spec = LyapunovSpec::sup_weighted(0.5, cert.m_bound, 0.0, 2000).unwrap();
        let x = vector(&[0.0, 1.0]);
        let v = v_eval(&spec, Some(&GeneratorSpec::Matrix(m)), &x).unwrap();
        assert!(v > 1.0 && v <= cert.m_bound * (1.0 + 1e-12));
    }

    #[test]
    fn sup_weighted_validation() {
        assert!(LyapunovSpec::sup_weighted(0.0, 1.0, 1.0, 10).is_err());
        assert!(LyapunovSpec::sup_weighted(1.0, 0.5, 1.0, 10).is_err());
        let bad = LyapunovSpec::SupWeighted {
            omega: 1.0,
            m_bound: 10.0,
            s_max: 1.0,
            s_steps: 10,
        };
        assert!(v_eval(&bad, Some(&GeneratorSpec::Zero), &grid(4, 1.0)).is_err());
        let spec = LyapunovSpec::sup_weighted(1.0, 1.0, 1.0, 10).unwrap();
        assert!(v_eval(&spec, None, &grid(4, 1.0)).is_err());
        assert!(LyapunovSpec::quadratic(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).is_err());
        assert!(LyapunovSpec::quadratic(DMatrix::from_row_slice(1, 1, &[-1.0])).is_err());
    }

    #[test]
    fn dini_examples() {
        let opts = DiniOptions::default();
        let lin = SystemSpec::new(
            GeneratorSpec::ScalarDiagonal { alpha: 1.0 },
            InputOperator::identity(),
            FeedbackMap::Identity,
        );
        let x0 = grid(16, 1.0);
        let zero = Disturbance::zero_like(&x0);
        let est = dini_derivative(&LyapunovSpec::squared_norm(), &lin, &x0, &zero, &opts).unwrap();
        assert!(est.extrapolated);
        assert_eq!(est.quotients.len(), 3);
        assert_abs_diff_eq!(est.value, -4.0, epsilon = 1e-2);

        let origin = grid(16, 0.0);
        let est = dini_derivative(&LyapunovSpec::squared_norm(), &lin, &origin, &zero, &opts).unwrap();
        assert_eq!(est.value, 0.0);

        let sat = SystemSpec::saturated_ode();
        let est = dini_derivative(&LyapunovSpec::squared_norm(), &sat, &grid(16, 2.0), &zero, &opts).unwrap();
        assert_abs_diff_eq!(est.value, -4.0, epsilon = 1e-2);
    }

    #[test]
    fn dini_matches_linear_closed_form() {
        // ẋ = Ãx with Ã = A − I: d/dt ‖x‖² = 2⟨Ãx, x⟩
        let mut rng = sampling::seeded_rng(3);
        let a = sampling::random_hurwitz(&mut rng, 4, 0.2);
        let sys = SystemSpec::new(
            GeneratorSpec::Matrix(a.clone()),
            InputOperator::identity(),
            FeedbackMap::Identity,
        );
        for _ in 0..5 {
            let x = sampling::random_gaussian_vector(&mut rng, 4);
            let exact = 2.0 * ((&a - DMatrix::identity(4, 4)) * x.as_dvector()).dot(&x.as_dvector());
            let x0: State = x.into();
            let zero = Disturbance::zero_like(&x0);
            let est =
                dini_derivative(&LyapunovSpec::squared_norm(), &sys, &x0, &zero, &DiniOptions::default()).unwrap();
            assert_relative_eq!(est.value, exact, max_relative = 1e-2);
        }
    }

    #[test]
    fn dini_option_errors() {
        let sys = SystemSpec::saturated_ode();
        let x0 = grid(4, 1.0);
        let zero = Disturbance::zero_like(&x0);
        let spec = LyapunovSpec::squared_norm();
        for opts in [
            DiniOptions {
                h_list: vec![],
                ..Default::default()
            },
            DiniOptions {
                h_list: vec![1e-3, 1e-2],
                ..Default::default()
            },
            DiniOptions {
                h_list: vec![1e-2],
                dt: 0.1,
                ..Default::default()
            },
        ] {
            assert!(dini_derivative(&spec, &sys, &x0, &zero, &opts).is_err());
        }
    }

    #[test]
    fn dissipation_examples() {
        let sys = SystemSpec::new(
            GeneratorSpec::ScalarDiagonal { alpha: 1.0 },
            InputOperator::identity(),
            FeedbackMap::SatPointwise,
        );
        let x0 = grid(16, 1.0);
        let samples = vec![
            (x0.clone(), Disturbance::zero_like(&x0)),
            (x0.clone(), Disturbance::constant(grid(16, 0.1))),
            (grid(16, 0.0), Disturbance::constant(grid(16, 0.3))),
            (grid(16, -3.0), Disturbance::zero_like(&x0)),
        ];
        let report = check_dissipation_chain(&sys, 1.0, 1.0, 1.0, &samples, &DiniOptions::default(), 1e-2).unwrap();
        assert!(report.pass, "{report:?}");
        assert_relative_eq!(report.rows[1].bound, -1.0 + 0.01, max_relative = 1e-12);
        assert!(report.rows[0].bound < 0.0);
        assert!(check_dissipation_chain(&sys, 1.0, 1.0, 2.0, &samples, &DiniOptions::default(), 1e-2).is_err());
        assert!(check_dissipation_chain(&sys, 2.0, 1.0, 1.0, &samples, &DiniOptions::default(), 1e-2).is_err());
    }

    #[test]
    fn iss_examples() {
        let sys = SystemSpec::new(
            GeneratorSpec::ScalarDiagonal { alpha: 1.0 },
            InputOperator::identity(),
            FeedbackMap::SatPointwise,
        );
        let opts = SolverOptions::default();
        let x0 = grid(16, 3.0);
        let zero = Disturbance::zero_like(&x0);
        let tr = solve_mild(&sys, &x0, &zero, 5.0, 0.01, &opts).unwrap();
        let r = check_iss_estimate(&tr, &zero, 1.0, 1.0, 1.0, 1.0, 1e-12).unwrap();
        assert!(r.pass && r.worst_ratio <= 1.0);

        let origin = grid(16, 0.0);
        let d = Disturbance::constant(grid(16, 0.4));
        let tr = solve_mild(&sys, &origin, &d, 5.0, 0.01, &opts).unwrap();
        let r = check_iss_estimate(&tr, &d, 1.0, 1.0, 1.0, 1.0, 1e-12).unwrap();
        assert!(r.pass);
        assert!(r.rows.iter().all(|row| row.lhs <= iss_gain(1.0, 1.0, 1.0, 1.0, 0.4)));

        let tr = solve_mild(&sys, &origin, &zero, 1.0, 0.1, &opts).unwrap();
        assert!(tr.norms().iter().all(|&n| n == 0.0));
        assert_eq!(
            check_iss_estimate(&tr, &zero, 1.0, 1.0, 1.0, 1.0, 0.0)
                .unwrap()
                .worst_ratio,
            0.0
        );
        assert!(check_iss_estimate(&tr, &zero, 1.0, 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn lyapunov_equation_examples() {
        let p = solve_lyapunov_finite(&DMatrix::from_element(1, 1, -1.0)).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.5, max_relative = 1e-14);
        let p = solve_lyapunov_finite(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0])).unwrap();
        assert_relative_eq!(
            p,
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]),
            epsilon = 1e-14
        );
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]);
        let p = solve_lyapunov_finite(&a).unwrap();
        assert!(lyapunov_residual(&a, &p) <= 1e-10);
        assert!(is_positive_definite(&p));
        assert!(matches!(
            solve_lyapunov_finite(&DMatrix::from_element(1, 1, 0.5)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn quadratic_form_examples() {
        let mut rng = sampling::seeded_rng(8);
        let xs: Vec<DVector<f64>> = (0..50)
            .map(|_| sampling::random_gaussian_vector(&mut rng, 3).as_dvector())
            .collect();
        let i3 = DMatrix::<f64>::identity(3, 3);
        let half = &i3 * 0.5;
        let r = check_quadratic_form(&half, &(-&i3), &xs, 1e-12).unwrap();
        assert!(r.pass && r.max_value.abs() < 1e-12);
        let r = check_quadratic_form(&half, &(&i3 * -2.0), &xs, 0.0).unwrap();
        assert!(r.pass);
        let x = &xs[r.worst_index];
        assert_relative_eq!(r.max_value, -x.norm_squared(), max_relative = 1e-12);
        let r = check_quadratic_form(&half, &i3, &xs, 0.0).unwrap();
        assert!(!r.pass);
        assert_relative_eq!(
            r.max_value,
            2.0 * xs[r.worst_index].norm_squared(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn embedding_examples() {
        let one = GridFunction::constant(64, 1.0).unwrap();
        let r = estimate_embedding_constant(&[(one.clone(), GridFunction::zeros(64))]).unwrap();
        assert_relative_eq!(r.constant, 1.0);
        let tau = 2.0 * std::f64::consts::PI;
        let samples: Vec<_> = (1..=20)
            .map(|k| {
                let w = tau * k as f64;
                (
                    GridFunction::from_fn(4096, |x| (w * x).sin()).unwrap(),
                    GridFunction::from_fn(4096, |x| w * (w * x).cos()).unwrap(),
                )
            })
            .collect();
        let r = estimate_embedding_constant(&samples).unwrap();
        assert!(r.ratios[0] < 1.0);
        assert_eq!(r.worst_index, 0);
        assert!(r.constant < 1.0);
        assert!(estimate_embedding_constant(&[(GridFunction::zeros(4), GridFunction::zeros(4))]).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let minus_i = GeneratorSpec::Matrix(-DMatrix::<f64>::identity(3, 3));
        let r = check_dissipativity_equivalence(&minus_i, 1.0, 200, 1, 1e-9).unwrap();
        assert!(r.dissipative && r.contraction && r.lyapunov && r.consistent);
        let r = check_dissipativity_equivalence(&minus_i, 2.0, 200, 1, 1e-9).unwrap();
        assert!(!r.dissipative && !r.contraction && !r.lyapunov && r.consistent);
        let diag = GeneratorSpec::Matrix(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]));
        let r = check_dissipativity_equivalence(&diag, 1.0, 200, 1, 1e-9).unwrap();
        assert!(r.dissipative && r.contraction && r.lyapunov && r.consistent);
        let jordan = GeneratorSpec::Matrix(DMatrix::from_row_slice(2, 2, &[-1.0, 10.0, 0.0, -1.0]));
        let r = check_dissipativity_equivalence(&jordan, 1.0, 200, 1, 1e-9).unwrap();
        assert!(!r.dissipative && r.consistent);
        let scalar = GeneratorSpec::ScalarDiagonal { alpha: 1.5 };
        assert!(
            check_dissipativity_equivalence(&scalar, 1.5, 10, 1, 1e-9)
                .unwrap()
                .contraction
        );
        assert!(check_dissipativity_equivalence(&GeneratorSpec::PeriodicShift, 1.0, 10, 1, 1e-9).is_err());
    }

    #[test]
    fn sup_weighted_properties_on_matrix() {
        let mut rng = sampling::seeded_rng(12);
        let a = sampling::random_hurwitz(&mut rng, 3, 1.0);
        let gen = GeneratorSpec::Matrix(a);
        let cert = certify_semigroup_bound(&gen, 0.8, 30.0, 3000).unwrap();
        let spec = LyapunovSpec::sup_weighted(0.8, cert.m_bound, 0.0, 400).unwrap();
        let pairs = random_vector_pairs(&mut rng, 3, 100, 5.0);
        let r = check_sup_weighted_properties(&spec, &gen, &pairs, &[0.1, 1.0], 1e-6).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
