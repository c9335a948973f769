//! Seeded generators for test states, disturbances and matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{FiniteVector, GridFunction, State};
use crate::linalg;
use crate::systems::Disturbance;

pub type SampleRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random grid function with sup-norm at most `amplitude`, drawn from a mix of
/// smooth (few Fourier modes), rough (i.i.d. cell values) and step profiles.
pub fn random_profile<R: Rng>(rng: &mut R, n: usize, amplitude: f64) -> GridFunction {
    let values: Vec<f64> = match rng.random_range(0..3u8) {
        0 => {
            let modes = rng.random_range(1..6usize);
            let coeffs: Vec<(f64, f64)> = (0..modes)
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI)))
                .collect();
            let offset: f64 = rng.random_range(-1.0..1.0);
            (0..n)
                .map(|i| {
                    let x = (i as f64 + 0.5) / n as f64;
                    offset
                        + coeffs
                            .iter()
                            .enumerate()
                            .map(|(k, (a, phase))| a * (2.0 * PI * (k + 1) as f64 * x + phase).sin())
                            .sum::<f64>()
                })
                .collect()
        }
        1 => (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        _ => {
            let jumps = rng.random_range(1..5usize);
            let mut cuts: Vec<usize> = (0..jumps).map(|_| rng.random_range(0..n)).collect();
            cuts.sort_unstable();
            let levels: Vec<f64> = (0..=jumps).map(|_| rng.random_range(-1.0..1.0)).collect();
            (0..n)
                .map(|i| levels[cuts.iter().filter(|&&c| c <= i).count()])
                .collect()
        }
    };
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 {
        amplitude * rng.random_range(0.0..=1.0) / peak
    } else {
        0.0
    };
    GridFunction::new(values.into_iter().map(|v| v * scale).collect()).expect("finite by construction")
}

/// Random grid function with `L²` norm uniformly distributed in `[0, r]`.
pub fn random_in_ball<R: Rng>(rng: &mut R, n: usize, r: f64) -> GridFunction {
    let raw = random_profile(rng, n, 1.0);
    let norm = raw.norm_l2();
    if norm == 0.0 {
        return raw;
    }
    let target = r * rng.random_range(0.0..=1.0);
    raw.map(|v| v * target / norm)
}

pub fn random_gaussian_vector<R: Rng>(rng: &mut R, m: usize) -> FiniteVector {
    FiniteVector::new((0..m).map(|_| StandardNormal.sample(rng)).collect()).expect("finite by construction")
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, m: usize) -> FiniteVector {
    loop {
        let v = random_gaussian_vector(rng, m);
        let n = v.norm();
        if n > 1e-12 {
            return FiniteVector::new(v.entries().iter().map(|x| x / n).collect()).expect("finite by construction");
        }
    }
}

/// Random state shaped like `like` with norm uniformly distributed in `[0, r]`.
pub fn random_state_in_ball<R: Rng>(rng: &mut R, like: &State, r: f64) -> State {
    match like {
        State::Grid(g) => State::Grid(random_in_ball(rng, g.len(), r)),
        State::Vector(v) => {
            let dir = random_unit_vector(rng, v.len());
            let target = r * rng.random_range(0.0..=1.0);
            State::Vector(FiniteVector::new(dir.entries().iter().map(|x| x * target).collect()).expect("finite"))
        }
    }
}

/// Piecewise-constant disturbance on `[0, horizon]` with at most `max_pieces`
/// pieces, breakpoints on multiples of `grid_step` and sup-norm at most `sup`.
pub fn random_piecewise_disturbance<R: Rng>(
    rng: &mut R,
    like: &State,
    max_pieces: usize,
    sup: f64,
    horizon: f64,
    grid_step: f64,
) -> Disturbance {
    let pieces = rng.random_range(1..=max_pieces.max(1));
    let slots = ((horizon / grid_step).round() as usize).max(2);
    let mut cuts: Vec<usize> = (0..pieces - 1).map(|_| rng.random_range(1..slots)).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut breakpoints = vec![0.0];
    breakpoints.extend(cuts.iter().map(|&c| c as f64 * grid_step));
    let values = breakpoints
        .iter()
        .map(|_| random_state_in_ball(rng, like, sup))
        .collect();
    Disturbance::piecewise(breakpoints, values).expect("valid by construction")
}

/// Random `m × m` Hurwitz matrix whose spectral abscissa is `-margin`.
pub fn random_hurwitz<R: Rng>(rng: &mut R, m: usize, margin: f64) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(rng));
    let shift = linalg::spectral_abscissa(&raw) + margin;
    raw - DMatrix::identity(m, m) * shift
}

/// Truncated Fourier profile `c₀ + Σ aₖ cos 2πkξ + bₖ sin 2πkξ` with its exact
/// derivative and exact `L²` norms of both.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierProfile {
    pub offset: f64,
    /// `(a_k, b_k)` for `k = 1, 2, …`
    pub modes: Vec<(f64, f64)>,
}

impl FourierProfile {
    pub fn random<R: Rng>(rng: &mut R, modes: usize) -> Self {
        Self {
            offset: rng.random_range(-1.0..1.0),
            modes: (0..modes)
                .map(|k| {
                    let decay = 1.0 / (k + 1) as f64;
                    (rng.random_range(-decay..decay), rng.random_range(-decay..decay))
                })
                .collect(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.offset
            + self
                .modes
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let w = 2.0 * PI * (k + 1) as f64;
                    a * (w * x).cos() + b * (w * x).sin()
                })
                .sum::<f64>()
    }

    pub fn eval_derivative(&self, x: f64) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = 2.0 * PI * (k + 1) as f64;
                w * (b * (w * x).cos() - a * (w * x).sin())
            })
            .sum()
    }

    pub fn norm_l2(&self) -> f64 {
        (self.offset * self.offset + self.modes.iter().map(|(a, b)| 0.5 * (a * a + b * b)).sum::<f64>()).sqrt()
    }

    pub fn derivative_norm_l2(&self) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let w = 2.0 * PI * (k + 1) as f64;
                0.5 * w * w * (a * a + b * b)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Graph norm `‖f‖ + ‖f′‖` for the periodic derivative.
    pub fn graph_norm(&self) -> f64 {
        self.norm_l2() + self.derivative_norm_l2()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            offset: self.offset * c,
            modes: self.modes.iter().map(|(a, b)| (a * c, b * c)).collect(),
        }
    }

    pub fn sample(&self, n: usize) -> GridFunction {
        GridFunction::from_fn(n, |x| self.eval(x)).expect("finite by construction")
    }

    pub fn sample_derivative(&self, n: usize) -> GridFunction {
        GridFunction::from_fn(n, |x| self.eval_derivative(x)).expect("finite by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_respect_amplitude_and_seed() {
        let mut a = seeded_rng(5);
        let mut b = seeded_rng(5);
        for _ in 0..50 {
            let f = random_profile(&mut a, 40, 3.0);
            assert!(f.norm_linf() <= 3.0 + 1e-12);
            assert_eq!(f, random_profile(&mut b, 40, 3.0));
        }
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = seeded_rng(9);
        for _ in 0..100 {
            assert!(random_in_ball(&mut rng, 16, 0.7).norm_l2() <= 0.7 + 1e-12);
        }
    }

    #[test]
    fn hurwitz_margin() {
        let mut rng = seeded_rng(2);
        for m in 1..6 {
            let a = random_hurwitz(&mut rng, m, 0.5);
            assert!((linalg::spectral_abscissa(&a) + 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn fourier_norms_match_quadrature() {
        let mut rng = seeded_rng(4);
        let p = FourierProfile::random(&mut rng, 4);
        let n = 4096;
        assert!((p.sample(n).norm_l2() - p.norm_l2()).abs() < 1e-10);
        assert!((p.sample_derivative(n).norm_l2() - p.derivative_norm_l2()).abs() < 1e-9);
    }
}
