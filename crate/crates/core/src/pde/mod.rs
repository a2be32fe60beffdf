//! Finite-difference solvers for the two-phase equation `∂t c(u) − Δu = 0`
//! and for the linear flat-interface transmission problem, plus Pucci
//! extremal operators and exact piecewise-quadratic solutions.

pub mod linalg;
mod linear;
mod nonlinear;
mod pucci;

pub use linear::{solve_linear_transmission, TransmissionSpec};
pub use nonlinear::{solve_nonlinear, NonlinearGeometry, NonlinearOptions};
pub use pucci::{pucci_minus, pucci_plus, pucci_sandwich_check};

use crate::error::{ensure, Error, Result};
use crate::geometry::GridField;
use nalgebra::DMatrix;
use serde::Serialize;

/// Scalar data `(x, t) ↦ value`.
pub type DataFn<'a> = &'a (dyn Fn(&[f64], f64) -> f64 + Sync);

/// `∏ [lower_i, upper_i] × [t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
}

impl SpaceTimeBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, t_start: f64, t_end: f64) -> Result<Self> {
        ensure(!lower.is_empty() && lower.len() == upper.len(), || "box bounds must have equal length".into())?;
        ensure(lower.iter().zip(&upper).all(|(a, b)| a < b), || {
            format!("box lower bounds {lower:?} must be below upper bounds {upper:?}")
        })?;
        ensure(t_start < t_end, || format!("need t_start < t_end, got {t_start}, {t_end}"))?;
        Ok(Self { lower, upper, t_start, t_end })
    }

    /// `[−1, 1]ⁿ × [−1, 0]`.
    pub fn unit_cylinder_box(n: usize) -> Self {
        Self { lower: vec![-1.0; n], upper: vec![1.0; n], t_start: -1.0, t_end: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// Cell counts per spatial axis and number of time steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub cells: Vec<usize>,
    pub time_steps: usize,
}

impl Resolution {
    pub fn uniform(dim: usize, cells: usize, time_steps: usize) -> Self {
        Self { cells: vec![cells; dim], time_steps }
    }
}

/// Grid layout shared by the solvers.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub origin: Vec<f64>,
    pub steps: Vec<f64>,
    pub shape: Vec<usize>,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
}

impl Layout {
    pub fn new(domain: &SpaceTimeBox, res: &Resolution) -> Result<Self> {
        ensure(res.cells.len() == domain.dim(), || {
            format!("resolution has {} axes, domain has {}", res.cells.len(), domain.dim())
        })?;
        ensure(res.cells.iter().all(|&c| c >= 2) && res.time_steps >= 1, || {
            format!("need at least 2 cells per axis and 1 time step, got {res:?}")
        })?;
        let steps = (0..domain.dim()).map(|d| (domain.upper[d] - domain.lower[d]) / res.cells[d] as f64).collect();
        Ok(Self {
            origin: domain.lower.clone(),
            steps,
            shape: res.cells.iter().map(|c| c + 1).collect(),
            t0: domain.t_start,
            dt: (domain.t_end - domain.t_start) / res.time_steps as f64,
            nt: res.time_steps + 1,
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn spatial_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for d in (0..self.shape.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * self.shape[d + 1];
        }
        s
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        let mut f = flat;
        for d in (0..self.shape.len()).rev() {
            idx[d] = f % self.shape[d];
            f /= self.shape[d];
        }
        idx
    }

    pub fn coords(&self, flat: usize, x: &mut [f64]) {
        crate::geometry::node_coords(&self.origin, &self.steps, &self.shape, flat, x);
    }

    pub fn is_boundary(&self, idx: &[usize]) -> bool {
        idx.iter().zip(&self.shape).any(|(&i, &m)| i == 0 || i + 1 == m)
    }

    pub fn into_field(self, values: Vec<f64>) -> Result<GridField> {
        GridField::new(self.origin, self.steps, self.shape, self.t0, self.dt, self.nt, values)
    }
}

/// One entry of a solver run log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepLog {
    pub step: usize,
    pub time: f64,
    /// Final residual of the step's (non)linear solve.
    pub residual: f64,
    /// Linear-solver or Newton iterations spent on the step.
    pub iterations: usize,
    pub wall_seconds: f64,
}

/// A solved field with its per-step log.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: GridField,
    pub log: Vec<StepLog>,
}

/// Quintic smoothstep `6τ⁵ − 15τ⁴ + 10τ³` clamped to `[0, 1]`; `C²` with
/// vanishing first and second derivatives at both ends.
pub fn smoothstep(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// `∫₀^τ smoothstep`, clamped on the left and extended linearly on the right.
fn smoothstep_integral(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        0.5 + (tau - 1.0)
    } else {
        let t2 = tau * tau;
        t2 * t2 * (tau * (tau - 3.0) + 2.5)
    }
}

/// Smooth coefficient equal to `a_minus` below `−width` and `a_plus` above
/// `width`, interpolated by the quintic smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedCoefficient {
    pub a_plus: f64,
    pub a_minus: f64,
    pub width: f64,
}

impl RegularizedCoefficient {
    pub fn new(a_plus: f64, a_minus: f64, width: f64) -> Result<Self> {
        ensure(a_plus > 0.0 && a_minus > 0.0, || format!("coefficients must be positive, got {a_plus}, {a_minus}"))?;
        ensure(width > 0.0 && width.is_finite(), || format!("width must be positive, got {width}"))?;
        Ok(Self { a_plus, a_minus, width })
    }

    fn tau(&self, s: f64) -> f64 {
        (s + self.width) / (2.0 * self.width)
    }

    /// Blend weight of the positive phase at `s`.
    pub fn weight(&self, s: f64) -> f64 {
        smoothstep(self.tau(s))
    }

    pub fn value(&self, s: f64) -> f64 {
        self.blend(self.a_plus, self.a_minus, s)
    }

    /// `plus` above the band, `minus` below, smoothly in between.
    pub fn blend(&self, plus: f64, minus: f64, s: f64) -> f64 {
        minus + (plus - minus) * self.weight(s)
    }

    /// Regularized enthalpy `c(u) = ∫₀ᵘ a(s) ds`.
    pub fn enthalpy(&self, u: f64) -> f64 {
        let g = |s: f64| 2.0 * self.width * smoothstep_integral(self.tau(s));
        self.a_minus * u + (self.a_plus - self.a_minus) * (g(u) - g(0.0))
    }
}

/// Exact solution `½ xᵀA(x_n)x + b·x + ct + d` of a constant-coefficient
/// transmission problem, with `A(x_n) = A⁺` for `x_n ≥ 0` and `A⁻` below.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuadratic {
    a_plus: DMatrix<f64>,
    a_minus: DMatrix<f64>,
    b: Vec<f64>,
    c: f64,
    d: f64,
}

impl PiecewiseQuadratic {
    /// `A⁺` and `A⁻` must be symmetric and agree except in the `(n, n)` entry.
    pub fn new(a_plus: DMatrix<f64>, a_minus: DMatrix<f64>, b: Vec<f64>, c: f64, d: f64) -> Result<Self> {
        let n = b.len();
        ensure(n >= 1, || "empty linear part".into())?;
        for m in [&a_plus, &a_minus] {
            ensure(m.nrows() == n && m.ncols() == n, || format!("matrices must be {n}x{n}"))?;
            ensure(is_symmetric(m), || "quadratic part must be symmetric".into())?;
        }
        for i in 0..n {
            for j in 0..n {
                if (i, j) != (n - 1, n - 1) && a_plus[(i, j)] != a_minus[(i, j)] {
                    return Err(Error::Argument(format!("A+ and A- differ at ({i}, {j})")));
                }
            }
        }
        Ok(Self { a_plus, a_minus, b, c, d })
    }

    /// Choose `c` from the positive phase and return the matching `f₋`:
    /// `a₊c = tr(aA⁺) + f₊` and `f₋ = a₋c − tr(aA⁻)`.
    pub fn balanced(
        a_plus: DMatrix<f64>,
        a_minus: DMatrix<f64>,
        b: Vec<f64>,
        d: f64,
        coeffs: (f64, f64),
        diffusion: &DMatrix<f64>,
        f_plus: f64,
    ) -> Result<(Self, f64)> {
        let c = ((diffusion * &a_plus).trace() + f_plus) / coeffs.0;
        let f_minus = coeffs.1 * c - (diffusion * &a_minus).trace();
        Ok((Self::new(a_plus, a_minus, b, c, d)?, f_minus))
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn time_coefficient(&self) -> f64 {
        self.c
    }

    pub fn matrix(&self, x_n: f64) -> &DMatrix<f64> {
        if x_n >= 0.0 {
            &self.a_plus
        } else {
            &self.a_minus
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.eval_side(x, t, x.last().copied().unwrap_or(0.0) >= 0.0)
    }

    /// Evaluate one branch regardless of the sign of `x_n`.
    pub fn eval_side(&self, x: &[f64], t: f64, positive: bool) -> f64 {
        let a = if positive { &self.a_plus } else { &self.a_minus };
        let n = self.dim();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += x[i] * a[(i, j)] * x[j];
            }
        }
        0.5 * q + self.b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>() + self.c * t + self.d
    }

    /// Spatial gradient `A x + b` of one branch.
    pub fn gradient_side(&self, x: &[f64], positive: bool) -> Vec<f64> {
        let a = if positive { &self.a_plus } else { &self.a_minus };
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| a[(i, j)] * x[j]).sum::<f64>() + self.b[i]).collect()
    }
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    m.is_square() && (m - m.transpose()).amax() <= 1e-12 * scale
}

/// Extremes of a field over its parabolic boundary (initial level plus the
/// spatial boundary at every time).
pub fn parabolic_boundary_range(field: &GridField) -> (f64, f64) {
    let m = field.spatial_len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for it in 0..field.nt() {
        for flat in 0..m {
            let idx = field.multi_index(flat);
            let on_boundary = it == 0 || idx.iter().zip(field.shape()).any(|(&i, &s)| i == 0 || i + 1 == s);
            if on_boundary {
                let v = field.values()[it * m + flat];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (lo, hi)
}

/// Largest amount by which the field leaves the range of its parabolic
/// boundary values (zero when the maximum principle holds).
pub fn maximum_principle_violation(field: &GridField) -> f64 {
    let (lo, hi) = parabolic_boundary_range(field);
    field.values().iter().map(|&v| (lo - v).max(v - hi).max(0.0)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn regularized_coefficient_examples() {
        let r = RegularizedCoefficient::new(1.0, 0.25, 0.1).unwrap();
        assert_eq!(r.value(-0.2), 0.25);
        assert_eq!(r.value(0.2), 1.0);
        assert_relative_eq!(r.value(0.0), 0.625, epsilon = 1e-15);
        assert!(RegularizedCoefficient::new(1.0, 0.5, 0.0).is_err());
        let mirrored = RegularizedCoefficient::new(0.25, 1.0, 0.1).unwrap();
        assert!(mirrored.value(0.05) < mirrored.value(-0.05));
    }

    #[test]
    fn smoothstep_is_c2() {
        let h = 1e-4;
        for tau in [0.0, 1.0] {
            let d1 = (smoothstep(tau + h) - smoothstep(tau - h)) / (2.0 * h);
            let d2 = (smoothstep(tau + h) - 2.0 * smoothstep(tau) + smoothstep(tau - h)) / (h * h);
            assert!(d1.abs() < 1e-6 && d2.abs() < 1e-3, "tau={tau}: {d1} {d2}");
        }
    }

    #[test]
    fn enthalpy_is_an_antiderivative() {
        let r = RegularizedCoefficient::new(1.0, 0.3, 0.2).unwrap();
        assert_eq!(r.enthalpy(0.0), 0.0);
        assert_relative_eq!(r.enthalpy(-1.0), r.enthalpy(-0.2) - 0.3 * 0.8, epsilon = 1e-14);
        assert_relative_eq!(r.enthalpy(1.0), r.enthalpy(0.2) + 0.8, epsilon = 1e-14);
        for s in [-0.3, -0.15, -0.01, 0.0, 0.07, 0.19, 0.5] {
            let h = 1e-6;
            let fd = (r.enthalpy(s + h) - r.enthalpy(s - h)) / (2.0 * h);
            assert_relative_eq!(fd, r.value(s), max_relative = 1e-8);
        }
    }

    fn quadratic_2d() -> PiecewiseQuadratic {
        let ap = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let am = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -3.0]);
        PiecewiseQuadratic::new(ap, am, vec![0.2, 1.0], 0.7, 0.1).unwrap()
    }

    #[test]
    fn piecewise_quadratic_examples() {
        let z = DMatrix::zeros(2, 2);
        let p = PiecewiseQuadratic::new(z.clone(), z, vec![0.0, 1.0], 0.0, 0.0).unwrap();
        assert_eq!(p.eval(&[0.3, -0.7], 1.0), -0.7);

        let q = quadratic_2d();
        for x1 in [-0.8, 0.0, 0.4] {
            assert_relative_eq!(q.eval_side(&[x1, 0.0], 0.3, true), q.eval_side(&[x1, 0.0], 0.3, false));
            let gp = q.gradient_side(&[x1, 0.0], true);
            let gm = q.gradient_side(&[x1, 0.0], false);
            assert_relative_eq!(gp[1], gm[1]);
            assert_relative_eq!(gp[1], 1.0 + 0.5 * x1);
        }
        let bad = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, -3.0]);
        assert!(PiecewiseQuadratic::new(DMatrix::identity(2, 2), bad, vec![0.0, 1.0], 0.0, 0.0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(PiecewiseQuadratic::new(asym.clone(), asym, vec![0.0, 1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn balanced_quadratic_satisfies_both_phases() {
        let ap = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let am = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -3.0]);
        let a = DMatrix::identity(2, 2);
        let (p, f_minus) = PiecewiseQuadratic::balanced(ap, am, vec![0.0, 1.0], 0.0, (1.0, 0.5), &a, 0.25).unwrap();
        assert_relative_eq!(p.time_coefficient(), 3.25);
        assert_relative_eq!(0.5 * p.time_coefficient(), -2.0 + f_minus);
    }

    proptest! {
        #[test]
        fn regularized_coefficient_stays_in_bounds(
            ap in 0.1..5.0f64, am in 0.1..5.0f64, w in 1e-3..1.0f64, s in -3.0..3.0f64
        ) {
            let r = RegularizedCoefficient::new(ap, am, w).unwrap();
            let v = r.value(s);
            prop_assert!(v >= ap.min(am) - 1e-15 && v <= ap.max(am) + 1e-15);
        }
    }
}
