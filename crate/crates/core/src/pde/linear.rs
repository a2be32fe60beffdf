use super::linalg::{bicgstab, CsrBuilder};
use super::{is_symmetric, DataFn, Layout, RegularizedCoefficient, Resolution, Solution, SpaceTimeBox, StepLog};
use crate::error::{ensure, Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use std::sync::Arc;
use std::time::Instant;

type MatrixField = Arc<dyn Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync>;
type ScalarField = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

const LINEAR_TOL: f64 = 1e-10;
const LINEAR_MAX_ITER: usize = 20_000;

/// Data of the linear problem
///
/// ```text
/// a₊ v_t − a_ij D_ij v = f₊   in {x_n > 0}
/// a₋ v_t − a_ij D_ij v = f₋   in {x_n < 0}
/// ```
///
/// with continuous normal derivative across `{x_n = 0}`.
#[derive(Clone)]
pub struct TransmissionSpec {
    pub a_plus: f64,
    pub a_minus: f64,
    dim: usize,
    diffusion: MatrixField,
    rhs_plus: ScalarField,
    rhs_minus: ScalarField,
    ellipticity: (f64, f64),
}

impl std::fmt::Debug for TransmissionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransmissionSpec")
            .field("a_plus", &self.a_plus)
            .field("a_minus", &self.a_minus)
            .field("dim", &self.dim)
            .field("ellipticity", &self.ellipticity)
            .finish_non_exhaustive()
    }
}

impl TransmissionSpec {
    /// General data; `ellipticity = (lower, upper)` bounds the eigenvalues of
    /// the diffusion matrix and is checked at every assembled node.
    pub fn new(
        a_plus: f64,
        a_minus: f64,
        dim: usize,
        diffusion: impl Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync + 'static,
        ellipticity: (f64, f64),
        rhs_plus: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        rhs_minus: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure(a_plus > 0.0 && a_minus > 0.0, || {
            format!("time coefficients must be positive, got {a_plus}, {a_minus}")
        })?;
        ensure(dim >= 1, || "dimension must be positive".into())?;
        ensure(0.0 < ellipticity.0 && ellipticity.0 <= ellipticity.1, || {
            format!("ellipticity bounds must satisfy 0 < lower <= upper, got {ellipticity:?}")
        })?;
        Ok(Self {
            a_plus,
            a_minus,
            dim,
            diffusion: Arc::new(diffusion),
            rhs_plus: Arc::new(rhs_plus),
            rhs_minus: Arc::new(rhs_minus),
            ellipticity,
        })
    }

    /// Constant diffusion matrix and right-hand sides.
    pub fn constant(a_plus: f64, a_minus: f64, diffusion: DMatrix<f64>, f_plus: f64, f_minus: f64) -> Result<Self> {
        if !is_symmetric(&diffusion) {
            return Err(Error::Spec("diffusion matrix is not symmetric".into()));
        }
        let eig = diffusion.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if lo <= 0.0 {
            return Err(Error::Spec(format!("diffusion matrix is not elliptic (smallest eigenvalue {lo})")));
        }
        let dim = diffusion.nrows();
        Self::new(a_plus, a_minus, dim, move |_, _| diffusion.clone(), (lo, hi), move |_, _| f_plus, move |_, _| f_minus)
    }

    /// Single-phase heat equation `a v_t − Δv = 0`.
    pub fn heat(a: f64, dim: usize) -> Result<Self> {
        Self::constant(a, a, DMatrix::identity(dim, dim), 0.0, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ellipticity(&self) -> (f64, f64) {
        self.ellipticity
    }

    pub fn diffusion(&self, x: &[f64], t: f64) -> DMatrix<f64> {
        (self.diffusion)(x, t)
    }

    pub fn rhs(&self, x: &[f64], t: f64, positive: bool) -> f64 {
        if positive {
            (self.rhs_plus)(x, t)
        } else {
            (self.rhs_minus)(x, t)
        }
    }

    /// Diffusion at `(x, t)`, rejected unless symmetric and within the
    /// stored ellipticity bounds.
    pub(crate) fn checked_diffusion(&self, x: &[f64], t: f64) -> Result<DMatrix<f64>> {
        let a = self.diffusion(x, t);
        if a.nrows() != self.dim || !is_symmetric(&a) {
            return Err(Error::Spec(format!("diffusion at {x:?}, t={t} is not a symmetric {0}x{0} matrix", self.dim)));
        }
        let eig = a.clone().symmetric_eigen().eigenvalues;
        let slack = 1e-12 * self.ellipticity.1;
        if eig.min() < self.ellipticity.0 - slack || eig.max() > self.ellipticity.1 + slack {
            return Err(Error::Spec(format!(
                "diffusion eigenvalues [{}, {}] at {x:?}, t={t} leave the ellipticity bounds {:?}",
                eig.min(),
                eig.max(),
                self.ellipticity
            )));
        }
        Ok(a)
    }
}

/// Backward Euler for `a(x_n) w_t − a_ij D_ij w = f(x_n; x, t)` with the
/// coefficient jump smoothed over `|x_n| < reg_width`, Dirichlet data from
/// `boundary` on the parabolic boundary, and centered second differences.
pub fn solve_linear_transmission(
    spec: &TransmissionSpec,
    domain: &SpaceTimeBox,
    boundary: DataFn,
    res: &Resolution,
    reg_width: f64,
) -> Result<Solution> {
    ensure(domain.dim() == spec.dim(), || {
        format!("domain has dimension {}, spec has {}", domain.dim(), spec.dim())
    })?;
    let layout = Layout::new(domain, res)?;
    let reg = RegularizedCoefficient::new(spec.a_plus, spec.a_minus, reg_width)?;
    let n = layout.dim();
    let m = layout.spatial_len();
    let strides = layout.strides();

    // interior nodes are the unknowns
    let mut unknown = vec![usize::MAX; m];
    let mut interior = Vec::new();
    for flat in 0..m {
        if !layout.is_boundary(&layout.index(flat)) {
            unknown[flat] = interior.len();
            interior.push(flat);
        }
    }

    let mut values = vec![0.0; m * layout.nt];
    fill_level(&layout, &mut values[..m], layout.t0, boundary);
    let mut log = Vec::with_capacity(res.time_steps);

    for step in 1..layout.nt {
        let clock = Instant::now();
        let t = layout.t0 + step as f64 * layout.dt;
        let (prev, rest) = values.split_at_mut(step * m);
        let prev = &prev[(step - 1) * m..];
        let next = &mut rest[..m];
        fill_boundary(&layout, next, t, boundary);
        let known: &[f64] = next;

        let rows: Vec<(Vec<(usize, f64)>, f64)> = interior
            .par_iter()
            .map(|&flat| -> Result<(Vec<(usize, f64)>, f64)> {
                let mut x = vec![0.0; n];
                layout.coords(flat, &mut x);
                let a = spec.checked_diffusion(&x, t)?;
                let xn = x[n - 1];
                let a_reg = reg.value(xn);
                let f_reg = reg.blend(spec.rhs(&x, t, true), spec.rhs(&x, t, false), xn);
                let mut entries = Vec::with_capacity(1 + 2 * n + 2 * n * n);
                let mut rhs = a_reg / layout.dt * prev[flat] + f_reg;
                let mut diag = a_reg / layout.dt;
                let mut couple = |nb: usize, coef: f64, entries: &mut Vec<(usize, f64)>| {
                    if unknown[nb] == usize::MAX {
                        rhs -= coef * known[nb];
                    } else {
                        entries.push((unknown[nb], coef));
                    }
                };
                for i in 0..n {
                    let hi2 = layout.steps[i] * layout.steps[i];
                    diag += 2.0 * a[(i, i)] / hi2;
                    couple(flat + strides[i], -a[(i, i)] / hi2, &mut entries);
                    couple(flat - strides[i], -a[(i, i)] / hi2, &mut entries);
                    for j in i + 1..n {
                        let aij = a[(i, j)];
                        if aij == 0.0 {
                            continue;
                        }
                        let coef = aij / (2.0 * layout.steps[i] * layout.steps[j]);
                        couple(flat + strides[i] + strides[j], -coef, &mut entries);
                        couple(flat - strides[i] - strides[j], -coef, &mut entries);
                        couple(flat + strides[i] - strides[j], coef, &mut entries);
                        couple(flat - strides[i] + strides[j], coef, &mut entries);
                    }
                }
                entries.push((unknown[flat], diag));
                Ok((entries, rhs))
            })
            .collect::<Result<_>>()?;

        let mut builder = CsrBuilder::with_capacity(rows.len(), rows.len() * (1 + 2 * n + 2 * n * n));
        let mut rhs = Vec::with_capacity(rows.len());
        for (entries, r) in &rows {
            for &(c, v) in entries {
                builder.push(c, v);
            }
            builder.end_row();
            rhs.push(*r);
        }
        let matrix = builder.build();
        let mut sol: Vec<f64> = interior.iter().map(|&f| prev[f]).collect();
        let stats = bicgstab(&matrix, &rhs, &mut sol, LINEAR_TOL, LINEAR_MAX_ITER)?;
        for (k, &flat) in interior.iter().enumerate() {
            next[flat] = sol[k];
        }
        log.push(StepLog {
            step,
            time: t,
            residual: stats.residual,
            iterations: stats.iterations,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
    }
    Ok(Solution { field: layout.into_field(values)?, log })
}

pub(crate) fn fill_level(layout: &Layout, level: &mut [f64], t: f64, data: DataFn) {
    let n = layout.dim();
    level.par_iter_mut().enumerate().for_each(|(flat, v)| {
        let mut x = vec![0.0; n];
        layout.coords(flat, &mut x);
        *v = data(&x, t);
    });
}

pub(crate) fn fill_boundary(layout: &Layout, level: &mut [f64], t: f64, data: DataFn) {
    let mut x = vec![0.0; layout.dim()];
    for (flat, v) in level.iter_mut().enumerate() {
        if layout.is_boundary(&layout.index(flat)) {
            layout.coords(flat, &mut x);
            *v = data(&x, t);
        }
    }
}
