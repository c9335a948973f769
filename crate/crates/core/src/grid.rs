//! Sampled states: grid functions on `[0, 1]` and finite-dimensional vectors.
//!
//! A [`GridFunction`] stores one value per cell of a uniform partition of
//! `[0, 1]` into `N` cells, sampled at the cell midpoints `(i + 1/2) / N`.
//! All integrals are midpoint-rule sums, so the norms are the `L²`, `L¹` and
//! `L^∞` norms of the piecewise-constant interpolant. Midpoints never touch
//! `ξ = 0`, where the counterexample profiles are singular.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GridFunction {
    values: Vec<f64>,
}

impl TryFrom<Vec<f64>> for GridFunction {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        GridFunction::new(values)
    }
}

impl From<GridFunction> for Vec<f64> {
    fn from(f: GridFunction) -> Self {
        f.values
    }
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("N must be at least 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at cell {i}")));
        }
        Ok(Self { values })
    }

    /// Samples `f` at the `n` cell midpoints.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| f(midpoint(i, n))).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n.max(1)],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: a grid function has at least one cell.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.len();
        (0..n).map(move |i| midpoint(i, n))
    }

    pub fn norm_l2(&self) -> f64 {
        let h = 1.0 / self.len() as f64;
        (self.values.iter().map(|v| v * v).sum::<f64>() * h).sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        let h = 1.0 / self.len() as f64;
        self.values.iter().map(|v| v.abs()).sum::<f64>() * h
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_len(other)?;
        let h = 1.0 / self.len() as f64;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * h)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_len(other)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Left circular shift by `cells` grid cells: `out[i] = self[(i + cells) mod N]`.
    pub fn rotate_cells(&self, cells: usize) -> Self {
        let mut values = self.values.clone();
        values.rotate_left(cells % self.len());
        Self { values }
    }

    fn check_len(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }
}

#[inline]
pub fn midpoint(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// Plain Euclidean vector for finite-dimensional truncations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FiniteVector {
    entries: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FiniteVector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        FiniteVector::new(entries)
    }
}

impl From<FiniteVector> for Vec<f64> {
    fn from(v: FiniteVector) -> Self {
        v.entries
    }
}

impl FiniteVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidGrid("vector dimension must be at least 1".into()));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite entry at index {i}")));
        }
        Ok(Self { entries })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            entries: vec![0.0; m.max(1)],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum())
    }

    pub fn as_dvector(&self) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_column_slice(&self.entries)
    }

    pub(crate) fn from_dvector(v: &nalgebra::DVector<f64>) -> Self {
        Self {
            entries: v.iter().copied().collect(),
        }
    }
}

/// Element of the state (or input) space: either a grid function on `(0,1)`
/// or a finite-dimensional vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum State {
    Grid(GridFunction),
    Vector(FiniteVector),
}

impl From<GridFunction> for State {
    fn from(g: GridFunction) -> Self {
        State::Grid(g)
    }
}

impl From<FiniteVector> for State {
    fn from(v: FiniteVector) -> Self {
        State::Vector(v)
    }
}

impl State {
    pub fn dim(&self) -> usize {
        match self {
            State::Grid(g) => g.len(),
            State::Vector(v) => v.len(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            State::Grid(g) => State::Grid(GridFunction::zeros(g.len())),
            State::Vector(v) => State::Vector(FiniteVector::zeros(v.len())),
        }
    }

    /// Hilbert-space norm: `L²(0,1)` for grids, Euclidean for vectors.
    pub fn norm(&self) -> f64 {
        match self {
            State::Grid(g) => g.norm_l2(),
            State::Vector(v) => v.norm(),
        }
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        match (self, other) {
            (State::Grid(a), State::Grid(b)) => a.inner(b),
            (State::Vector(a), State::Vector(b)) => a.dot(b),
            _ => Err(Error::StateKind("inner product of grid and vector".into())),
        }
    }

    pub fn raw(&self) -> &[f64] {
        match self {
            State::Grid(g) => g.values(),
            State::Vector(v) => v.entries(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.raw().iter().all(|v| v.is_finite())
    }

    /// Rebuilds a state of the same kind from raw values without validation.
    pub(crate) fn with_raw(&self, raw: Vec<f64>) -> Self {
        match self {
            State::Grid(_) => State::Grid(GridFunction { values: raw }),
            State::Vector(_) => State::Vector(FiniteVector { entries: raw }),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_raw(self.raw().iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_raw(self.raw().iter().zip(other.raw()).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn as_grid(&self) -> Option<&GridFunction> {
        match self {
            State::Grid(g) => Some(g),
            State::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&FiniteVector> {
        match self {
            State::Vector(v) => Some(v),
            State::Grid(_) => None,
        }
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        match (self, other) {
            (State::Grid(_), State::Grid(_)) | (State::Vector(_), State::Vector(_)) => {
                if self.dim() != other.dim() {
                    Err(Error::DimensionMismatch {
                        expected: self.dim(),
                        got: other.dim(),
                    })
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::StateKind("cannot combine grid and vector states".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_norms() {
        let one = GridFunction::constant(17, 1.0).unwrap();
        assert_abs_diff_eq!(one.norm_l2(), 1.0, epsilon = 1e-15);
        let minus_two = GridFunction::constant(5, -2.0).unwrap();
        assert_abs_diff_eq!(minus_two.norm_l1(), 2.0, epsilon = 1e-15);
        let three = GridFunction::constant(3, 3.0).unwrap();
        assert_eq!(three.norm_linf(), 3.0);
        let zero = GridFunction::zeros(8);
        assert_eq!(zero.norm_l1(), 0.0);
        assert_eq!(zero.norm_linf(), 0.0);
    }

    #[test]
    fn linear_profile_norms() {
        // ∫ξ² = 1/3, ∫|ξ - 1/2| = 1/4, ∫ξ = 1/2
        let n = 1_000_000;
        let f = GridFunction::from_fn(n, |x| x).unwrap();
        assert_abs_diff_eq!(f.norm_l2(), (1.0f64 / 3.0).sqrt(), epsilon = 1e-4);
        let g = GridFunction::from_fn(n, |x| x - 0.5).unwrap();
        assert_abs_diff_eq!(g.norm_l1(), 0.25, epsilon = 1e-4);
        let one = GridFunction::constant(n, 1.0).unwrap();
        assert_abs_diff_eq!(f.inner(&one).unwrap(), 0.5, epsilon = 1e-4);

        let coarse = GridFunction::from_fn(100, |x| x).unwrap();
        assert_abs_diff_eq!(coarse.norm_linf(), 0.995, epsilon = 1e-14);
    }

    #[test]
    fn inner_constants() {
        let two = GridFunction::constant(9, 2.0).unwrap();
        let three = GridFunction::constant(9, 3.0).unwrap();
        assert_abs_diff_eq!(two.inner(&three).unwrap(), 6.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(GridFunction::new(vec![]).is_err());
        assert!(GridFunction::new(vec![1.0, f64::NAN]).is_err());
        assert!(FiniteVector::new(vec![f64::INFINITY]).is_err());
        let a = GridFunction::zeros(3);
        let b = GridFunction::zeros(4);
        assert!(matches!(
            a.inner(&b),
            Err(Error::DimensionMismatch { expected: 3, got: 4 })
        ));
        let g: State = a.into();
        let v: State = FiniteVector::zeros(3).into();
        assert!(g.add(&v).is_err());
    }

    #[test]
    fn refinement_is_second_order() {
        let f = |x: f64| (3.0 * x).sin() + x * x;
        let diffs: Vec<f64> = [50usize, 100, 200, 400]
            .windows(2)
            .map(|w| {
                let a = GridFunction::from_fn(w[0], f).unwrap().norm_l2();
                let b = GridFunction::from_fn(w[1], f).unwrap().norm_l2();
                (a - b).abs()
            })
            .collect();
        for pair in diffs.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
        }
    }

    #[test]
    fn rotation_is_permutation() {
        let f = GridFunction::from_fn(10, |x| x).unwrap();
        let r = f.rotate_cells(3);
        assert_eq!(r.values()[0], f.values()[3]);
        assert_eq!(r.values()[9], f.values()[2]);
        assert_eq!(f.rotate_cells(10), f);
        assert_eq!(r.norm_l2(), {
            let mut v = f.values().to_vec();
            v.rotate_left(3);
            GridFunction::new(v).unwrap().norm_l2()
        });
    }

    fn grid_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..64).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cauchy_schwarz((a, b) in grid_pair()) {
            let f = GridFunction::new(a).unwrap();
            let g = GridFunction::new(b).unwrap();
            let lhs = f.inner(&g).unwrap().abs();
            let rhs = f.norm_l2() * g.norm_l2();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn norm_ordering(values in prop::collection::vec(-1e3f64..1e3, 1..128)) {
            let f = GridFunction::new(values).unwrap();
            let (l1, l2, linf) = (f.norm_l1(), f.norm_l2(), f.norm_linf());
            prop_assert!(l1 <= l2 * (1.0 + 1e-12) + 1e-300);
            prop_assert!(l2 <= linf * (1.0 + 1e-12) + 1e-300);
        }
    }
}
