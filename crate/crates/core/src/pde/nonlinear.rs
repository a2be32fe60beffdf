use super::linalg::{bicgstab, solve_tridiagonal, CsrBuilder};
use super::linear::{fill_boundary, fill_level};
use super::{DataFn, Layout, RegularizedCoefficient, Resolution, Solution, SpaceTimeBox, StepLog};
use crate::error::{ensure, Error, Result};
use std::time::Instant;

/// Spatial setting of the nonlinear solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearGeometry {
    /// One Cartesian axis, Dirichlet data at both ends.
    Cartesian1,
    /// Radially symmetric solutions in `ℝⁿ` on `r ∈ [0, R]`: even symmetry
    /// at `r = 0`, Dirichlet data at `r = R`.
    Radial { n: usize },
    /// Two Cartesian axes, Dirichlet data on the whole boundary.
    Cartesian2,
}

impl NonlinearGeometry {
    fn dim(self) -> usize {
        match self {
            NonlinearGeometry::Cartesian2 => 2,
            _ => 1,
        }
    }
}

/// Newton controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearOptions {
    /// Stop when `max |F| ≤ tol · max(1, max |c(u)|)`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Take a single linearized step with the coefficient frozen at the old
    /// level instead of iterating to convergence.
    pub lagged_only: bool,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        Self { newton_tol: 1e-10, max_newton: 50, lagged_only: false }
    }
}

/// Backward Euler for `∂t c(u) − Δu = 0` in enthalpy form,
/// `c(uᵏ⁺¹) − c(uᵏ) = Δt Δ_h uᵏ⁺¹`, with `c' = a` smoothed over
/// `|u| < reg_width`. Each step is solved by Newton's method started from
/// `uᵏ`; the first iterate is the lagged-coefficient scheme.
/// `data` supplies the initial level and the Dirichlet values.
pub fn solve_nonlinear(
    a_plus: f64,
    a_minus: f64,
    geometry: NonlinearGeometry,
    domain: &SpaceTimeBox,
    data: DataFn,
    res: &Resolution,
    reg_width: f64,
    options: NonlinearOptions,
) -> Result<Solution> {
    ensure(domain.dim() == geometry.dim(), || {
        format!("{geometry:?} needs a {}-dimensional box, got {}", geometry.dim(), domain.dim())
    })?;
    if let NonlinearGeometry::Radial { n } = geometry {
        ensure(n >= 1, || "radial dimension must be positive".into())?;
        ensure(domain.lower[0] == 0.0, || format!("radial domain must start at r = 0, got {}", domain.lower[0]))?;
    }
    ensure(options.max_newton >= 1 && options.newton_tol > 0.0, || "invalid Newton options".into())?;
    let reg = RegularizedCoefficient::new(a_plus, a_minus, reg_width)?;
    let layout = Layout::new(domain, res)?;
    let m = layout.spatial_len();
    let op = Laplacian::new(&layout, geometry);

    let mut values = vec![0.0; m * layout.nt];
    fill_level(&layout, &mut values[..m], layout.t0, data);
    let mut log = Vec::with_capacity(res.time_steps);

    for step in 1..layout.nt {
        let clock = Instant::now();
        let t = layout.t0 + step as f64 * layout.dt;
        let (head, rest) = values.split_at_mut(step * m);
        let prev = &head[(step - 1) * m..];
        let next = &mut rest[..m];
        next.copy_from_slice(prev);
        fill_boundary(&layout, next, t, data);
        if let NonlinearGeometry::Radial { .. } = geometry {
            // r = 0 is an unknown, not a boundary node
            next[0] = prev[0];
        }
        let old_enthalpy: Vec<f64> = prev.iter().map(|&u| reg.enthalpy(u)).collect();
        let scale = old_enthalpy.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let (iterations, residual) =
            newton_step(&op, &reg, &old_enthalpy, next, layout.dt, options, scale).map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("step {step} (t = {t}): {msg}")),
                other => other,
            })?;
        log.push(StepLog { step, time: t, residual, iterations, wall_seconds: clock.elapsed().as_secs_f64() });
    }
    Ok(Solution { field: layout.into_field(values)?, log })
}

/// Discrete Laplacian over the unknown nodes.
struct Laplacian {
    geometry: NonlinearGeometry,
    /// flat index of each unknown
    unknowns: Vec<usize>,
    /// unknown index of each node, `usize::MAX` for Dirichlet nodes
    position: Vec<usize>,
    /// per unknown: (neighbour flat index, weight), plus the diagonal weight
    stencil: Vec<(Vec<(usize, f64)>, f64)>,
}

impl Laplacian {
    fn new(layout: &Layout, geometry: NonlinearGeometry) -> Self {
        let m = layout.spatial_len();
        let mut position = vec![usize::MAX; m];
        let mut unknowns = Vec::new();
        let mut stencil = Vec::new();
        match geometry {
            NonlinearGeometry::Cartesian1 | NonlinearGeometry::Radial { .. } => {
                let h2 = layout.steps[0] * layout.steps[0];
                let start = if matches!(geometry, NonlinearGeometry::Radial { .. }) { 0 } else { 1 };
                for i in start..m - 1 {
                    position[i] = unknowns.len();
                    unknowns.push(i);
                    let row = match geometry {
                        NonlinearGeometry::Radial { n } if i == 0 => {
                            // Δu → n u_rr at the origin; even extension u_{−1} = u_1
                            let w = 2.0 * n as f64 / h2;
                            (vec![(1, w)], -w)
                        }
                        NonlinearGeometry::Radial { n } => {
                            let c = (n as f64 - 1.0) / (2.0 * i as f64);
                            (vec![(i + 1, (1.0 + c) / h2), (i - 1, (1.0 - c) / h2)], -2.0 / h2)
                        }
                        _ => (vec![(i + 1, 1.0 / h2), (i - 1, 1.0 / h2)], -2.0 / h2),
                    };
                    stencil.push(row);
                }
            }
            NonlinearGeometry::Cartesian2 => {
                let strides = layout.strides();
                for flat in 0..m {
                    if layout.is_boundary(&layout.index(flat)) {
                        continue;
                    }
                    position[flat] = unknowns.len();
                    unknowns.push(flat);
                    let mut nbrs = Vec::with_capacity(4);
                    let mut diag = 0.0;
                    for d in 0..2 {
                        let w = 1.0 / (layout.steps[d] * layout.steps[d]);
                        nbrs.push((flat + strides[d], w));
                        nbrs.push((flat - strides[d], w));
                        diag -= 2.0 * w;
                    }
                    stencil.push((nbrs, diag));
                }
            }
        }
        Self { geometry, unknowns, position, stencil }
    }

    fn apply(&self, u: &[f64], k: usize) -> f64 {
        let (nbrs, diag) = &self.stencil[k];
        diag * u[self.unknowns[k]] + nbrs.iter().map(|&(f, w)| w * u[f]).sum::<f64>()
    }
}

/// Newton iteration for `c(u) − c_old − Δt Δ_h u = 0` on the unknowns of
/// `u` (Dirichlet entries already set). Returns (iterations, residual).
fn newton_step(
    op: &Laplacian,
    reg: &RegularizedCoefficient,
    old_enthalpy: &[f64],
    u: &mut [f64],
    dt: f64,
    options: NonlinearOptions,
    scale: f64,
) -> Result<(usize, f64)> {
    let k_count = op.unknowns.len();
    let residual_vec = |u: &[f64]| -> Vec<f64> {
        (0..k_count)
            .map(|k| {
                let f = op.unknowns[k];
                reg.enthalpy(u[f]) - old_enthalpy[f] - dt * op.apply(u, k)
            })
            .collect()
    };
    let sup = |r: &[f64]| r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut r = residual_vec(u);
    let mut history = vec![sup(&r)];
    let tol = options.newton_tol * scale;
    if history[0] <= tol {
        return Ok((0, history[0]));
    }
    for iter in 1..=options.max_newton {
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_jacobian(op, reg, u, dt, &rhs)?;
        if options.lagged_only {
            apply_update(op, u, &delta, 1.0);
            let res = sup(&residual_vec(u));
            return Ok((1, res));
        }
        // backtrack on the sup norm to stay robust across the kink of c
        let base = sup(&r);
        let mut step = 1.0;
        let trial_u = u.to_vec();
        loop {
            u.copy_from_slice(&trial_u);
            apply_update(op, u, &delta, step);
            let trial = residual_vec(u);
            if sup(&trial) < base || step < 1e-3 {
                r = trial;
                break;
            }
            step *= 0.5;
        }
        let res = sup(&r);
        history.push(res);
        if res <= tol {
            return Ok((iter, res));
        }
    }
    Err(Error::Numeric(format!(
        "Newton did not converge in {} iterations; residual history {history:?}",
        options.max_newton
    )))
}

fn apply_update(op: &Laplacian, u: &mut [f64], delta: &[f64], step: f64) {
    for (k, &f) in op.unknowns.iter().enumerate() {
        u[f] += step * delta[k];
    }
}

/// Solve `(diag c'(u) − Δt Δ_h) δ = rhs`.
fn solve_jacobian(op: &Laplacian, reg: &RegularizedCoefficient, u: &[f64], dt: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let k_count = op.unknowns.len();
    match op.geometry {
        NonlinearGeometry::Cartesian1 | NonlinearGeometry::Radial { .. } => {
            let mut lower = vec![0.0; k_count];
            let mut diag = vec![0.0; k_count];
            let mut upper = vec![0.0; k_count];
            for k in 0..k_count {
                let f = op.unknowns[k];
                let (nbrs, d) = &op.stencil[k];
                diag[k] = reg.value(u[f]) - dt * d;
                for &(nf, w) in nbrs {
                    let p = op.position[nf];
                    if p == usize::MAX {
                        continue;
                    }
                    if nf > f {
                        upper[k] = -dt * w;
                    } else {
                        lower[k] = -dt * w;
                    }
                }
            }
            solve_tridiagonal(&lower, &diag, &upper, rhs)
        }
        NonlinearGeometry::Cartesian2 => {
            let mut b = CsrBuilder::with_capacity(k_count, 5 * k_count);
            for k in 0..k_count {
                let f = op.unknowns[k];
                let (nbrs, d) = &op.stencil[k];
                b.push(k, reg.value(u[f]) - dt * d);
                for &(nf, w) in nbrs {
                    let p = op.position[nf];
                    if p != usize::MAX {
                        b.push(p, -dt * w);
                    }
                }
                b.end_row();
            }
            let a = b.build();
            let mut x = vec![0.0; k_count];
            bicgstab(&a, rhs, &mut x, 1e-12, 20_000)?;
            Ok(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GridField;
    use std::f64::consts::PI;

    fn sup_error(field: &GridField, exact: impl Fn(&[f64], f64) -> f64, it: usize) -> f64 {
        let m = field.spatial_len();
        (0..m)
            .map(|flat| (field.level(it)[flat] - exact(&field.coords(flat), field.time(it))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn single_phase_gaussian_1d() {
        // heat kernel started at s = t + 1.5
        let exact = |x: &[f64], t: f64| {
            let s = t + 1.5;
            (4.0 * PI * s).powf(-0.5) * (-x[0] * x[0] / (4.0 * s)).exp()
        };
        let domain = SpaceTimeBox::new(vec![-3.0], vec![3.0], -1.0, 0.0).unwrap();
        let errs: Vec<f64> = [64usize, 128]
            .iter()
            .map(|&c| {
                let sol = solve_nonlinear(
                    1.0,
                    1.0,
                    NonlinearGeometry::Cartesian1,
                    &domain,
                    &exact,
                    &Resolution::uniform(1, c, c * c / 16),
                    0.1,
                    NonlinearOptions::default(),
                )
                .unwrap();
                sup_error(&sol.field, exact, sol.field.nt() - 1)
            })
            .collect();
        assert!(errs[0] < 2e-3 && errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn radial_gaussian_matches_heat_kernel() {
        let n = 3;
        let exact = |x: &[f64], t: f64| {
            let s = t + 1.5;
            (4.0 * PI * s).powf(-1.5) * (-x[0] * x[0] / (4.0 * s)).exp()
        };
        let domain = SpaceTimeBox::new(vec![0.0], vec![5.0], -1.0, 0.0).unwrap();
        let sol = solve_nonlinear(
            1.0,
            1.0,
            NonlinearGeometry::Radial { n },
            &domain,
            &exact,
            &Resolution::uniform(1, 200, 400),
            0.1,
            NonlinearOptions::default(),
        )
        .unwrap();
        let err = sup_error(&sol.field, exact, sol.field.nt() - 1);
        assert!(err < 5e-4, "{err}");
    }

    #[test]
    fn flat_data_is_stationary() {
        let data = |x: &[f64], _t: f64| x[1];
        let sol = solve_nonlinear(
            1.0,
            0.3,
            NonlinearGeometry::Cartesian2,
            &SpaceTimeBox::unit_cylinder_box(2),
            &data,
            &Resolution::uniform(2, 16, 8),
            0.1,
            NonlinearOptions::default(),
        )
        .unwrap();
        for it in 0..sol.field.nt() {
            assert!(sup_error(&sol.field, data, it) < 1e-9);
        }
        assert!(sol.log.iter().all(|l| l.residual <= 1e-9));
    }

    #[test]
    fn two_phase_newton_converges_and_lagged_matches() {
        let data = |x: &[f64], t: f64| x[0] + 0.3 * (PI * x[0]).sin() * (1.0 + t);
        let domain = SpaceTimeBox::new(vec![-1.0], vec![1.0], -1.0, 0.0).unwrap();
        let res = Resolution::uniform(1, 100, 200);
        let full = solve_nonlinear(1.0, 0.2, NonlinearGeometry::Cartesian1, &domain, &data, &res, 0.04, NonlinearOptions::default())
            .unwrap();
        assert!(full.log.iter().all(|l| l.iterations <= 50));
        let lagged = solve_nonlinear(
            1.0,
            0.2,
            NonlinearGeometry::Cartesian1,
            &domain,
            &data,
            &res,
            0.04,
            NonlinearOptions { lagged_only: true, ..Default::default() },
        )
        .unwrap();
        let it = full.field.nt() - 1;
        let diff = full
            .field
            .level(it)
            .iter()
            .zip(lagged.field.level(it))
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(diff < 0.02, "{diff}");
        assert!(crate::pde::maximum_principle_violation(&full.field) < 1e-9);
    }

    #[test]
    fn rejects_bad_geometry() {
        let domain = SpaceTimeBox::new(vec![-1.0], vec![1.0], -1.0, 0.0).unwrap();
        let err = solve_nonlinear(
            1.0,
            0.5,
            NonlinearGeometry::Radial { n: 3 },
            &domain,
            &|_, _| 0.0,
            &Resolution::uniform(1, 8, 2),
            0.1,
            NonlinearOptions::default(),
        );
        assert!(matches!(err, Err(Error::Argument(_))));
        let err = solve_nonlinear(
            1.0,
            0.5,
            NonlinearGeometry::Cartesian2,
            &domain,
            &|_, _| 0.0,
            &Resolution::uniform(1, 8, 2),
            0.1,
            NonlinearOptions::default(),
        );
        assert!(err.is_err());
    }
}
