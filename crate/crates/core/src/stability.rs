//! Empirical stability classification: asymptotic decay of individual
//! trajectories, falsification of uniform decay with the singular profile
//! family, exponential-rate fits on balls, and disturbance-gain sweeps.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{FiniteVector, GridFunction, State};
use crate::oracles::{self, CounterexampleProfile};
use crate::sampling::{self, FourierProfile};
use crate::systems::{solve_mild, Disturbance, GeneratorSpec, SolverOptions, SystemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Grid resolution and time stepping for simulated trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub cells: usize,
    pub dt: f64,
    pub solver: SolverOptions,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            cells: 1000,
            dt: 0.01,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasRow {
    pub index: usize,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Largest step-to-step norm increase; positive values break contraction.
    pub max_increase: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasReport {
    pub t_end: f64,
    pub tolerance: f64,
    pub rows: Vec<GasRow>,
    pub verdict: Verdict,
}

/// Each undisturbed trajectory must end below `tolerance` at `t_end` with a
/// nonincreasing norm along the way.
pub fn classify_gas(
    system: &SystemSpec,
    x0_list: &[State],
    t_end: f64,
    tolerance: f64,
    dt: f64,
    solver: &SolverOptions,
) -> Result<GasReport> {
    let rows: Vec<GasRow> = x0_list
        .par_iter()
        .enumerate()
        .map(|(index, x0)| {
            let zero = Disturbance::zero_like(&system.input.apply_adjoint(x0)?);
            let traj = solve_mild(system, x0, &zero, t_end, dt, solver)?;
            let norms = traj.norms();
            let max_increase = norms.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            let initial_norm = norms[0];
            let final_norm = *norms.last().expect("non-empty");
            let slack = 1e-12 * initial_norm.max(f64::MIN_POSITIVE);
            Ok(GasRow {
                index,
                initial_norm,
                final_norm,
                max_increase,
                pass: final_norm <= tolerance && max_increase <= slack,
            })
        })
        .collect::<Result<_>>()?;
    let verdict = if rows.iter().all(|r| r.pass) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(GasReport {
        t_end,
        tolerance,
        rows,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub n: u64,
    /// `√(norm_lower_bound)` when the closed form applies
    pub bound_norm: Option<f64>,
    /// `‖x_n(t)‖` from quadrature or simulation
    pub norm: f64,
    /// `norm − threshold`
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub t: f64,
    /// `max_n ‖x_n(t)‖` over the candidates
    pub sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub threshold: f64,
    /// Uniform decay from the unit sphere; `Fail` when every tested time has
    /// a witness.
    pub ugas: Verdict,
    /// Follows `ugas`: uniform decay is necessary for a finite gain.
    pub iss: Verdict,
    pub witnesses: Vec<Witness>,
    /// Tested times without a witness.
    pub missing: Vec<f64>,
    pub envelope: Vec<EnvelopePoint>,
    /// `continuum` for the closed-form systems, `grid` otherwise
    pub method: &'static str,
}

fn is_closed_form(system: &SystemSpec) -> bool {
    *system == SystemSpec::saturated_ode() || *system == SystemSpec::saturated_transport()
}

/// Searches the unit-norm family `f_n` for `‖x_n(t)‖ > threshold` at each
/// `t`. For the saturated ODE and transport systems (whose solution norms
/// coincide) the screen is `norm_lower_bound` and the confirmation is
/// continuum quadrature; any other system is simulated from grid samples.
pub fn falsify_ugas(
    system: &SystemSpec,
    t_grid: &[f64],
    threshold: f64,
    candidates: &[u64],
    sim: &SimulationOptions,
) -> Result<StabilityReport> {
    if candidates.is_empty() || t_grid.is_empty() {
        return Err(Error::InvalidArgument {
            arg: "candidates",
            reason: "need at least one candidate and one time".into(),
        });
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument {
            arg: "threshold",
            reason: format!("must lie in (0, 1), got {threshold}"),
        });
    }
    let closed_form = is_closed_form(system);
    let per_t: Vec<(Option<Witness>, EnvelopePoint)> = if closed_form {
        t_grid
            .par_iter()
            .map(|&t| continuum_search(t, threshold, candidates))
            .collect::<Result<_>>()?
    } else {
        grid_search(system, t_grid, threshold, candidates, sim)?
    };
    let mut witnesses = Vec::new();
    let mut missing = Vec::new();
    let mut envelope = Vec::new();
    for (&t, (w, e)) in t_grid.iter().zip(per_t) {
        match w {
            Some(w) => witnesses.push(w),
            None => missing.push(t),
        }
        envelope.push(e);
    }
    let ugas = if missing.is_empty() {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityReport {
        threshold,
        ugas,
        iss: ugas,
        witnesses,
        missing,
        envelope,
        method: if closed_form { "continuum" } else { "grid" },
    })
}

fn continuum_search(t: f64, threshold: f64, candidates: &[u64]) -> Result<(Option<Witness>, EnvelopePoint)> {
    let mut sup_norm: f64 = 0.0;
    for &n in candidates {
        sup_norm = sup_norm.max(oracles::counterexample_norm_sq(n, t)?.norm());
    }
    let mut witness = None;
    if let Some(n) = oracles::find_witness_n(t, threshold, candidates)? {
        let norm = oracles::counterexample_norm_sq(n, t)?.norm();
        if norm > threshold {
            witness = Some(Witness {
                t,
                n,
                bound_norm: Some(oracles::norm_lower_bound(n, t)?.sqrt()),
                norm,
                margin: norm - threshold,
            });
        }
    }
    Ok((witness, EnvelopePoint { t, sup_norm }))
}

fn grid_search(
    system: &SystemSpec,
    t_grid: &[f64],
    threshold: f64,
    candidates: &[u64],
    sim: &SimulationOptions,
) -> Result<Vec<(Option<Witness>, EnvelopePoint)>> {
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let trajectories: Vec<(u64, Vec<f64>)> = candidates
        .par_iter()
        .map(|&n| {
            let f = oracles::counterexample_profile(n, sim.cells)?;
            // unit norm on the grid, as on the continuum
            let f = f.map(|v| v / f.norm_l2());
            let x0 = State::Grid(f);
            let zero = Disturbance::zero_like(&system.input.apply_adjoint(&x0)?);
            let traj = solve_mild(system, &x0, &zero, t_max, sim.dt, &sim.solver)?;
            let norms = t_grid.iter().map(|&t| norm_at(&traj.times, &traj.norms(), t)).collect();
            Ok((n, norms))
        })
        .collect::<Result<_>>()?;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let sup_norm = trajectories.iter().map(|(_, v)| v[k]).fold(0.0, f64::max);
            let witness = trajectories
                .iter()
                .filter(|(_, v)| v[k] > threshold)
                .min_by_key(|(n, _)| *n)
                .map(|(n, v)| Witness {
                    t,
                    n: *n,
                    bound_norm: None,
                    norm: v[k],
                    margin: v[k] - threshold,
                });
            (witness, EnvelopePoint { t, sup_norm })
        })
        .collect())
}

/// Norm at the last sample time not after `t`.
fn norm_at(times: &[f64], norms: &[f64], t: f64) -> f64 {
    let idx = times.partition_point(|&s| s <= t + 1e-9 * t.max(1.0));
    norms[idx.saturating_sub(1)]
}

/// Initial states for `fit_semiglobal`, each with its `D(A)` norm.
#[derive(Debug, Clone, PartialEq)]
pub enum BallSampler {
    /// Truncated Fourier profiles on `cells` cells.
    Fourier { cells: usize, modes: usize },
    /// Gaussian vectors in `ℝ^dim`.
    RandomVector { dim: usize },
    /// `r·f_n` for each `n` of the ladder; `D(A)` norm `r` when `A = 0`.
    Counterexample { ladder: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusFit {
    pub r: f64,
    /// `K(r) ≥ 1`
    pub k: f64,
    /// `μ(r)` in 1/s
    pub mu: f64,
    pub samples: usize,
    /// `μ − mu_floor`
    pub margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiglobalReport {
    pub rows: Vec<RadiusFit>,
    pub mu_floor: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub samples_per_radius: usize,
    pub fit_points: usize,
    /// Smallest rate accepted as exponential decay.
    pub mu_floor: f64,
    /// Relative norm below which samples are dropped from the log fit.
    pub log_floor: f64,
    pub seed: u64,
    pub sim: SimulationOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            samples_per_radius: 20,
            fit_points: 50,
            mu_floor: 1e-2,
            log_floor: 1e-12,
            seed: 0,
            sim: SimulationOptions::default(),
        }
    }
}

fn graph_norm_factor(generator: &GeneratorSpec) -> Option<f64> {
    match generator {
        GeneratorSpec::Zero => Some(1.0),
        GeneratorSpec::ScalarDiagonal { alpha } => Some(1.0 + alpha.abs()),
        _ => None,
    }
}

fn draw_ball_state<R: Rng>(rng: &mut R, generator: &GeneratorSpec, sampler: &BallSampler, r: f64) -> Result<State> {
    let target = r * rng.random_range(0.0..=1.0);
    match sampler {
        BallSampler::Fourier { cells, modes } => {
            let p = FourierProfile::random(rng, *modes);
            let graph = match generator {
                GeneratorSpec::PeriodicShift => p.graph_norm(),
                GeneratorSpec::Matrix(_) => {
                    return Err(Error::StateKind("Fourier samples are grid functions".into()));
                }
                g => graph_norm_factor(g).expect("scalar generator") * p.norm_l2(),
            };
            let scale = if graph > 0.0 { target / graph } else { 0.0 };
            Ok(State::Grid(p.scaled(scale).sample(*cells)))
        }
        BallSampler::RandomVector { dim } => {
            let v = sampling::random_gaussian_vector(rng, *dim);
            let graph = match generator {
                GeneratorSpec::Matrix(a) => v.norm() + (a * v.as_dvector()).norm(),
                GeneratorSpec::PeriodicShift => {
                    return Err(Error::StateKind("the periodic shift acts on grid functions".into()));
                }
                g => graph_norm_factor(g).expect("scalar generator") * v.norm(),
            };
            let scale = if graph > 0.0 { target / graph } else { 0.0 };
            Ok(State::Vector(FiniteVector::new(
                v.entries().iter().map(|x| x * scale).collect(),
            )?))
        }
        BallSampler::Counterexample { .. } => unreachable!("handled by the caller"),
    }
}

/// Normalized norm curves `‖x(t_k)‖/‖x₀‖` on the fit grid.
fn simulated_curve(
    system: &SystemSpec,
    x0: &State,
    t_end: f64,
    fit: &[f64],
    sim: &SimulationOptions,
) -> Result<Option<Vec<f64>>> {
    let n0 = x0.norm();
    if n0 == 0.0 {
        return Ok(None);
    }
    let zero = Disturbance::zero_like(&system.input.apply_adjoint(x0)?);
    let traj = solve_mild(system, x0, &zero, t_end, sim.dt, &sim.solver)?;
    let norms = traj.norms();
    Ok(Some(
        fit.iter().map(|&t| norm_at(&traj.times, &norms, t) / n0).collect(),
    ))
}

/// Fits `‖x(t)‖ ≤ K e^{−μt}‖x₀‖` to the worst normalized decay over samples
/// from the `D(A)` ball of each radius.
pub fn fit_semiglobal(
    system: &SystemSpec,
    r_list: &[f64],
    sampler: &BallSampler,
    t_end: f64,
    opts: &FitOptions,
) -> Result<SemiglobalReport> {
    if r_list.is_empty() || r_list.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument {
            arg: "r_list",
            reason: "radii must be positive".into(),
        });
    }
    if t_end.is_nan() || t_end <= 0.0 || opts.fit_points < 2 {
        return Err(Error::InvalidArgument {
            arg: "t_end",
            reason: "need t_end > 0 and at least two fit points".into(),
        });
    }
    let fit: Vec<f64> = (0..=opts.fit_points)
        .map(|k| t_end * k as f64 / opts.fit_points as f64)
        .collect();
    let rows: Vec<RadiusFit> = r_list
        .par_iter()
        .enumerate()
        .map(|(ri, &r)| {
            let curves: Vec<Vec<f64>> = match sampler {
                BallSampler::Counterexample { ladder } => ladder
                    .par_iter()
                    .map(|&n| counterexample_curve(system, n, r, t_end, &fit, &opts.sim))
                    .collect::<Result<Vec<_>>>()?,
                _ => {
                    let mut rng = sampling::seeded_rng(opts.seed.wrapping_add(ri as u64));
                    let states: Vec<State> = (0..opts.samples_per_radius)
                        .map(|_| draw_ball_state(&mut rng, &system.generator, sampler, r))
                        .collect::<Result<_>>()?;
                    states
                        .par_iter()
                        .map(|x0| simulated_curve(system, x0, t_end, &fit, &opts.sim))
                        .collect::<Result<Vec<_>>>()?
                        .into_iter()
                        .flatten()
                        .collect()
                }
            };
            Ok(fit_envelope(r, &fit, &curves, opts))
        })
        .collect::<Result<_>>()?;
    let verdict = if rows.iter().all(|r| r.verdict == Verdict::Pass) {
        Verdict::Pass
    } else if rows.iter().any(|r| r.verdict == Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(SemiglobalReport {
        rows,
        mu_floor: opts.mu_floor,
        verdict,
    })
}

fn counterexample_curve(
    system: &SystemSpec,
    n: u64,
    r: f64,
    t_end: f64,
    fit: &[f64],
    sim: &SimulationOptions,
) -> Result<Vec<f64>> {
    if is_closed_form(system) {
        fit.iter()
            .map(|&t| Ok(oracles::scaled_counterexample_norm_sq(n, r, t)?.norm() / r))
            .collect()
    } else {
        let f = CounterexampleProfile::new(n)?.sample(sim.cells)?;
        let x0 = State::Grid(f.map(|v| v * r / f.norm_l2()));
        Ok(simulated_curve(system, &x0, t_end, fit, sim)?.expect("nonzero profile"))
    }
}

fn fit_envelope(r: f64, fit: &[f64], curves: &[Vec<f64>], opts: &FitOptions) -> RadiusFit {
    let envelope: Vec<f64> = (0..fit.len())
        .map(|k| curves.iter().map(|c| c[k]).fold(0.0, f64::max))
        .collect();
    let points: Vec<(f64, f64)> = fit
        .iter()
        .zip(&envelope)
        .take_while(|(_, &e)| e > opts.log_floor)
        .map(|(&t, &e)| (t, e.ln()))
        .collect();
    if curves.is_empty() || points.len() < 2 {
        return RadiusFit {
            r,
            k: 1.0,
            mu: f64::NAN,
            samples: curves.len(),
            margin: f64::NAN,
            verdict: Verdict::Inconclusive,
        };
    }
    let m = points.len() as f64;
    let tm = points.iter().map(|p| p.0).sum::<f64>() / m;
    let ym = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let mu = -sxy / sxx;
    // smallest K making the fitted envelope dominate every sample
    let k = fit
        .iter()
        .zip(&envelope)
        .map(|(&t, &e)| e * (mu * t).exp())
        .fold(1.0, f64::max);
    let margin = mu - opts.mu_floor;
    RadiusFit {
        r,
        k,
        mu,
        samples: curves.len(),
        margin,
        verdict: if margin > 0.0 { Verdict::Pass } else { Verdict::Fail },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainRow {
    pub amplitude: f64,
    /// `sup_t ‖x(t)‖` from `x₀ = 0`
    pub response: f64,
    pub final_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainReport {
    pub rows: Vec<GainRow>,
    pub monotone: bool,
    /// `max response/amplitude` over nonzero amplitudes
    pub max_ratio: f64,
}

/// Response of the system at rest to constant disturbances
/// `d ≡ amplitude · direction/‖direction‖`.
pub fn fit_iss_gain(
    system: &SystemSpec,
    state_template: &State,
    direction: &State,
    amplitudes: &[f64],
    t_end: f64,
    dt: f64,
    solver: &SolverOptions,
) -> Result<GainReport> {
    let dn = direction.norm();
    if dn == 0.0 {
        return Err(Error::InvalidArgument {
            arg: "direction",
            reason: "zero disturbance direction".into(),
        });
    }
    let x0 = state_template.zeros_like();
    let rows: Vec<GainRow> = amplitudes
        .par_iter()
        .map(|&a| {
            let d = Disturbance::constant(direction.scale(a / dn));
            let traj = solve_mild(system, &x0, &d, t_end, dt, solver)?;
            let norms = traj.norms();
            Ok(GainRow {
                amplitude: a,
                response: norms.iter().copied().fold(0.0, f64::max),
                final_norm: *norms.last().expect("non-empty"),
            })
        })
        .collect::<Result<_>>()?;
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.amplitude.total_cmp(&b.amplitude));
    let monotone = sorted
        .windows(2)
        .all(|w| w[1].response >= w[0].response - 1e-12 * w[0].response.max(1.0));
    let max_ratio = rows
        .iter()
        .filter(|r| r.amplitude > 0.0)
        .map(|r| r.response / r.amplitude)
        .fold(0.0, f64::max);
    Ok(GainReport {
        rows,
        monotone,
        max_ratio,
    })
}

/// Grid samples of `f_n` for each `n`, unnormalized.
pub fn counterexample_states(ns: &[u64], cells: usize) -> Result<Vec<State>> {
    ns.iter()
        .map(|&n| Ok(State::Grid(oracles::counterexample_profile(n, cells)?)))
        .collect()
}

/// Convenience for the constant grid direction `1` on `cells` cells.
pub fn unit_grid_direction(cells: usize) -> State {
    State::Grid(GridFunction::constant(cells, 1.0).expect("finite"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::FeedbackMap;
    use crate::lyapunov;
    use crate::systems::InputOperator;
    use approx::assert_relative_eq;

    #[test]
    fn gas_examples() {
        let sys = SystemSpec::saturated_ode();
        let x0 = counterexample_states(&[10], 1000).unwrap();
        let r = classify_gas(&sys, &x0, 1000.0, 1e-3, 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let zero = vec![State::Grid(GridFunction::zeros(8))];
        assert_eq!(
            classify_gas(&sys, &zero, 1.0, 1e-3, 0.1, &SolverOptions::default())
                .unwrap()
                .verdict,
            Verdict::Pass
        );
        let open = SystemSpec::new(
            GeneratorSpec::Zero,
            InputOperator::Scalar(0.0),
            FeedbackMap::SatPointwise,
        );
        let one = vec![State::Grid(GridFunction::constant(8, 1.0).unwrap())];
        let r = classify_gas(&open, &one, 10.0, 1e-3, 0.1, &SolverOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_relative_eq!(r.rows[0].final_norm, 1.0);
    }

    #[test]
    fn ugas_falsified_for_saturated_systems() {
        let ladder = oracles::default_ladder();
        let ts = [0.5, 1.0, 5.0, 10.0];
        let ode = falsify_ugas(
            &SystemSpec::saturated_ode(),
            &ts,
            0.5,
            &ladder,
            &SimulationOptions::default(),
        )
        .unwrap();
        assert_eq!(ode.ugas, Verdict::Fail);
        assert_eq!(ode.witnesses.len(), 4);
        for w in &ode.witnesses {
            assert!(w.bound_norm.unwrap() > 0.5 && w.norm > 0.5);
            assert!(w.norm >= w.bound_norm.unwrap() - 1e-12);
        }
        assert!(ode.envelope.windows(2).all(|p| p[1].sup_norm <= p[0].sup_norm));
        let tr = falsify_ugas(
            &SystemSpec::saturated_transport(),
            &ts,
            0.5,
            &ladder,
            &SimulationOptions::default(),
        )
        .unwrap();
        assert_eq!(tr.witnesses, ode.witnesses);
    }

    #[test]
    fn linear_feedback_has_no_witness() {
        let lin = SystemSpec::new(GeneratorSpec::Zero, InputOperator::identity(), FeedbackMap::Identity);
        let sim = SimulationOptions {
            cells: 256,
            dt: 0.05,
            ..Default::default()
        };
        let r = falsify_ugas(&lin, &[0.7, 1.0, 2.0], 0.5, &[2, 8, 64, 1024], &sim).unwrap();
        assert!(r.witnesses.is_empty());
        assert_eq!(r.ugas, Verdict::Inconclusive);
        for e in &r.envelope {
            assert_relative_eq!(e.sup_norm, (-e.t).exp(), max_relative = 1e-9);
        }
    }

    #[test]
    fn linear_rate_recovered() {
        let alpha = 0.7;
        let sys = SystemSpec::new(
            GeneratorSpec::ScalarDiagonal { alpha },
            InputOperator::Scalar(0.0),
            FeedbackMap::Identity,
        );
        let opts = FitOptions {
            sim: SimulationOptions {
                dt: 0.05,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = fit_semiglobal(
            &sys,
            &[0.5, 2.0],
            &BallSampler::Fourier { cells: 64, modes: 3 },
            5.0,
            &opts,
        )
        .unwrap();
        for row in &r.rows {
            assert_relative_eq!(row.mu, alpha, max_relative = 2e-2);
            assert_relative_eq!(row.k, 1.0, max_relative = 2e-2);
        }
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn transport_decays_exponentially_on_small_balls() {
        let opts = FitOptions {
            samples_per_radius: 10,
            sim: SimulationOptions {
                cells: 200,
                dt: 0.01,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = fit_semiglobal(
            &SystemSpec::saturated_transport(),
            &[0.5],
            &BallSampler::Fourier { cells: 200, modes: 4 },
            4.0,
            &opts,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.rows[0].mu > 0.5 && r.rows[0].k >= 1.0);
    }

    #[test]
    fn no_uniform_rate_on_the_unit_sphere() {
        let ladder = oracles::default_ladder();
        let opts = FitOptions {
            fit_points: 20,
            ..Default::default()
        };
        let r = fit_semiglobal(
            &SystemSpec::saturated_ode(),
            &[1.0],
            &BallSampler::Counterexample { ladder },
            10.0,
            &opts,
        )
        .unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.rows[0].mu < 1e-2);
    }

    #[test]
    fn gain_sweep() {
        let sys = SystemSpec::new(
            GeneratorSpec::ScalarDiagonal { alpha: 1.0 },
            InputOperator::identity(),
            FeedbackMap::SatPointwise,
        );
        let like = unit_grid_direction(16);
        let r = fit_iss_gain(
            &sys,
            &like,
            &like,
            &[0.0, 0.1, 0.5, 1.0, 2.0],
            8.0,
            0.01,
            &SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(r.rows[0].response, 0.0);
        assert!(r.monotone);
        assert!(r.rows[1].response <= lyapunov::iss_gain(1.0, 1.0, 1.0, 1.0, 0.1));
    }

    #[test]
    fn vector_ball_sampler() {
        let mut rng = sampling::seeded_rng(1);
        let a = sampling::random_hurwitz(&mut rng, 3, 0.5);
        let sys = SystemSpec::new(
            GeneratorSpec::Matrix(a),
            InputOperator::identity(),
            FeedbackMap::SatPointwise,
        );
        let opts = FitOptions {
            samples_per_radius: 8,
            sim: SimulationOptions {
                dt: 0.02,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = fit_semiglobal(&sys, &[1.0, 10.0], &BallSampler::RandomVector { dim: 3 }, 6.0, &opts).unwrap();
        assert!(r.rows.iter().all(|row| row.k >= 1.0 && row.mu > 0.0));
    }
}
