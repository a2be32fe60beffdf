//! Reproducible numerical studies shared by the experiment recipes and the
//! acceptance checks: each builds a fixture, runs a solver or probe and
//! returns the measured quantities.

use crate::error::{ensure, Error, Result};
use crate::fbdiag::{
    extract_free_boundary, harnack_decay_probe, improvement_of_flatness_probe, normal_holder_probe, FlatnessReport,
    HarnackReport, NormalHolder,
};
use crate::geometry::{GridField, ParabolicCylinder};
use crate::hodograph::{
    derivative_identity_check, forward_transform_with, round_trip_error, transmission_residual, HodographPatch,
    IdentityResiduals, TransmissionResiduals,
};
use crate::pde::{
    solve_linear_transmission, solve_nonlinear, NonlinearGeometry, NonlinearOptions, PiecewiseQuadratic, Resolution,
    SpaceTimeBox, TransmissionSpec,
};
use crate::selfsim::{eps0, solve_alpha, RadialProfile, SelfSimilarProfile};
use nalgebra::DMatrix;
use serde::Serialize;
use std::f64::consts::PI;

/// One row of a refinement table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementRow {
    pub cells: usize,
    pub h: f64,
    pub reg_width: f64,
    pub error: f64,
}

/// `log2(coarse / fine)` for consecutive rows of a halving sequence.
pub fn observed_orders(rows: &[RefinementRow]) -> Vec<f64> {
    rows.windows(2).map(|w| (w[0].error / w[1].error).log2()).collect()
}

/// Exponent sweep `ε = factor · eps0(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub alpha: f64,
    pub s_eps: f64,
    pub residual: f64,
}

pub fn counterexample_sweep(n: usize, factors: &[f64], tol: f64) -> Result<(f64, Vec<SweepRow>)> {
    let e0 = eps0(n)?;
    let rows = factors
        .iter()
        .map(|&f| {
            let eps = f * e0;
            let m = solve_alpha(n, eps, tol)?;
            Ok(SweepRow { eps, alpha: m.alpha, s_eps: m.s_eps, residual: m.residual })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((e0, rows))
}

/// Balanced two-phase quadratic used by the linear exactness study, with the
/// transmission data that it solves exactly.
pub fn quadratic_fixture() -> Result<(PiecewiseQuadratic, TransmissionSpec)> {
    let ap = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
    let am = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -1.5]);
    let diffusion = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.5]);
    let (a_plus, a_minus, f_plus) = (1.0, 0.5, 0.4);
    let (p, f_minus) = PiecewiseQuadratic::balanced(ap, am, vec![0.1, 1.0], 0.2, (a_plus, a_minus), &diffusion, f_plus)?;
    let spec = TransmissionSpec::constant(a_plus, a_minus, diffusion, f_plus, f_minus)?;
    Ok((p, spec))
}

/// Solve the quadratic fixture on `[−1,1]² × [−1,0]` with `cells` cells per
/// axis and time step, and `reg_width = reg_factor · h`.
pub fn linear_quadratic_study(cells: &[usize], reg_factor: f64) -> Result<Vec<RefinementRow>> {
    let (p, spec) = quadratic_fixture()?;
    let domain = SpaceTimeBox::unit_cylinder_box(2);
    let exact = |x: &[f64], t: f64| p.eval(x, t);
    cells
        .iter()
        .map(|&c| {
            let h = 2.0 / c as f64;
            let reg_width = reg_factor * h;
            let sol = solve_linear_transmission(&spec, &domain, &exact, &Resolution::uniform(2, c, c), reg_width)?;
            Ok(RefinementRow { cells: c, h, reg_width, error: sup_error(&sol.field, exact) })
        })
        .collect()
}

fn sup_error(field: &GridField, exact: impl Fn(&[f64], f64) -> f64) -> f64 {
    let m = field.spatial_len();
    (0..field.nt())
        .flat_map(|it| (0..m).map(move |flat| (it, flat)))
        .map(|(it, flat)| (field.level(it)[flat] - exact(&field.coords(flat), field.time(it))).abs())
        .fold(0.0, f64::max)
}

/// Radial evolution of the self-similar solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvolutionSetup {
    pub n: usize,
    pub eps: f64,
    /// Outer radius of the computational domain.
    pub radius: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Window `[r_min, r_max]` where the error is measured at `t_end`.
    pub window: (f64, f64),
    pub cells: usize,
    pub time_steps: usize,
    /// `reg_width = reg_factor · h`.
    pub reg_factor: f64,
}

impl Default for EvolutionSetup {
    fn default() -> Self {
        Self {
            n: 3,
            eps: 0.1,
            radius: 4.0,
            t_start: -1.0,
            t_end: -0.5,
            window: (0.05, 2.0),
            cells: 2048,
            time_steps: 512,
            reg_factor: 2.0,
        }
    }
}

impl EvolutionSetup {
    /// Same setup with `h`, `Δt` and `reg_width` halved.
    pub fn refined(&self) -> Self {
        Self { cells: 2 * self.cells, time_steps: 2 * self.time_steps, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionRun {
    pub setup: EvolutionSetup,
    pub alpha: f64,
    pub s_eps: f64,
    pub h: f64,
    pub reg_width: f64,
    /// `sup |u_h − u|` over the window at `t_end`.
    pub error: f64,
    pub newton_iterations: usize,
    /// Radial profile at `t_end`: `(r, computed, exact)`.
    pub final_profile: Vec<(f64, f64, f64)>,
}

/// Seed the radial two-phase solver with the matched profile at `t_start`,
/// feed the exact values at the outer radius, and compare at `t_end`.
pub fn selfsim_evolution(setup: &EvolutionSetup) -> Result<EvolutionRun> {
    ensure(setup.t_start < setup.t_end && setup.t_end < 0.0, || "need t_start < t_end < 0".into())?;
    let profile = SelfSimilarProfile::solve(setup.n, setup.eps, 1e-12)?;
    let data = |x: &[f64], t: f64| profile.evaluate_u(&[x[0]], t).unwrap_or(f64::NAN);
    let domain = SpaceTimeBox::new(vec![0.0], vec![setup.radius], setup.t_start, setup.t_end)?;
    let h = setup.radius / setup.cells as f64;
    let reg_width = setup.reg_factor * h;
    let sol = solve_nonlinear(
        1.0,
        setup.eps,
        NonlinearGeometry::Radial { n: setup.n },
        &domain,
        &data,
        &Resolution { cells: vec![setup.cells], time_steps: setup.time_steps },
        reg_width,
        NonlinearOptions::default(),
    )?;
    let field = &sol.field;
    let last = field.nt() - 1;
    let mut error: f64 = 0.0;
    let mut final_profile = Vec::with_capacity(field.spatial_len());
    for flat in 0..field.spatial_len() {
        let r = field.coords(flat)[0];
        let exact = data(&[r], setup.t_end);
        let computed = field.level(last)[flat];
        if r >= setup.window.0 && r <= setup.window.1 {
            error = error.max((computed - exact).abs());
        }
        final_profile.push((r, computed, exact));
    }
    if !error.is_finite() {
        return Err(Error::Numeric("non-finite error in the self-similar evolution".into()));
    }
    Ok(EvolutionRun {
        setup: *setup,
        alpha: profile.alpha(),
        s_eps: profile.s_eps(),
        h,
        reg_width,
        error,
        newton_iterations: sol.log.iter().map(|l| l.iterations).sum(),
        final_profile,
    })
}

/// Two-phase solution from data trapped between `x₂ ± delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatFixture {
    pub a_plus: f64,
    pub a_minus: f64,
    pub delta: f64,
    pub cells: usize,
    pub time_steps: usize,
    pub reg_width: f64,
}

impl Default for FlatFixture {
    fn default() -> Self {
        Self { a_plus: 1.0, a_minus: 0.5, delta: 0.01, cells: 64, time_steps: 32, reg_width: 0.04 }
    }
}

/// Perturbation of the flat data, bounded by 1 on the box.
pub fn flat_perturbation(x: &[f64], t: f64) -> f64 {
    let bump = (0.5 * PI * x[0]).sin() * (0.5 * PI * x[1]).cos();
    let tilt = 0.5 * (0.5 * PI * (x[0] + 0.3 * x[1])).cos();
    (bump + tilt) * (1.0 + 0.5 * t) / 1.5
}

/// Solve the nonlinear problem on `[−1,1]² × [−1,0]` with initial and
/// boundary data `x₂ + delta · flat_perturbation`.
pub fn solve_flat_fixture(fixture: &FlatFixture) -> Result<GridField> {
    let delta = fixture.delta;
    let data = move |x: &[f64], t: f64| x[1] + delta * flat_perturbation(x, t);
    let sol = solve_nonlinear(
        fixture.a_plus,
        fixture.a_minus,
        NonlinearGeometry::Cartesian2,
        &SpaceTimeBox::unit_cylinder_box(2),
        &data,
        &Resolution::uniform(2, fixture.cells, fixture.time_steps),
        fixture.reg_width,
        NonlinearOptions::default(),
    )?;
    Ok(sol.field)
}

/// Flatness probes around the free-boundary point of `field` nearest the
/// axis at the final time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessStudy {
    pub center: Vec<f64>,
    pub center_t: f64,
    pub graph_points: usize,
    pub report: FlatnessReport,
    pub normals: NormalHolder,
}

/// Extract the free boundary over `Q_window(0, t_end)`, pick the sample with
/// the smallest `|x'|` at the last time level and run the improvement probe
/// over `radii` there, plus the normal Hölder fit over the whole window.
pub fn flatness_decay_study(field: &GridField, window: f64, radii: &[f64]) -> Result<FlatnessStudy> {
    let n = field.dim();
    let t_end = field.t_end();
    let q = ParabolicCylinder::new(vec![0.0; n], t_end, window)?;
    let graph = extract_free_boundary(field, &q)?.with_normals(field.steps())?;
    let tol = 1e-9 * field.dt().max(1.0);
    let sample = graph
        .samples
        .iter()
        .filter(|s| (s.t - t_end).abs() <= tol)
        .min_by(|a, b| norm(&a.xprime).total_cmp(&norm(&b.xprime)))
        .ok_or_else(|| Error::Empty("no free-boundary point at the final time".into()))?;
    let mut center = sample.xprime.clone();
    center.push(sample.g);
    let report = improvement_of_flatness_probe(field, &center, t_end, radii)?;
    let normals = normal_holder_probe(&graph)?;
    Ok(FlatnessStudy { center, center_t: t_end, graph_points: graph.len(), report, normals })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Harnack probe on `Q_1(0, t_end)` of `field`.
pub fn harnack_study(field: &GridField, levels: usize, delta: f64) -> Result<HarnackReport> {
    let q = ParabolicCylinder::new(vec![0.0; field.dim()], field.t_end(), 1.0)?;
    harnack_decay_probe(field, &q, levels, delta)
}

/// Hodograph patch of the self-similar solution around the lowest point of
/// its free-boundary sphere at `t = −1/4`, where `u` increases with `x₃`.
/// The image grid has `image_cells` cells per axis; the source is sampled
/// along `x₃` with spacing `k^source_exponent / 2` (`k` the image spacing)
/// so that inverse interpolation does not dominate second differences.
pub fn selfsim_hodograph_patch(image_cells: usize, source_exponent: f64) -> Result<(HodographPatch, f64)> {
    ensure(image_cells >= 4, || format!("need at least 4 image cells, got {image_cells}"))?;
    let profile = SelfSimilarProfile::solve(3, 0.1, 1e-12)?;
    let tc = -0.25f64;
    let bottom = -profile.s_eps() * (-tc).sqrt();
    let rho = 0.1;
    let k = 2.0 * rho / image_cells as f64;
    let fine = (0.5 * k.powf(source_exponent)).min(k);
    let cells_n = (2.0 * rho / fine).ceil() as usize;
    let steps = image_cells;
    let dt = rho * rho / steps as f64;
    let field = GridField::from_fn(
        vec![-rho, -rho, bottom - rho],
        vec![k, k, 2.0 * rho / cells_n as f64],
        vec![image_cells + 1, image_cells + 1, cells_n + 1],
        tc - steps as f64 * dt,
        dt,
        steps + 1,
        |x, t| profile.evaluate_u(x, t).unwrap_or(f64::NAN),
    )?;
    let window = ParabolicCylinder::new(vec![0.0, 0.0, bottom], tc, rho)?;
    Ok((forward_transform_with(&field, &window, 0.25, image_cells + 1)?, profile.eps()))
}

/// Hodograph checks of the self-similar patch at one image resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HodographLevel {
    pub image_cells: usize,
    /// Image grid spacing along `y_n`.
    pub k: f64,
    pub round_trip: f64,
    pub identities: IdentityResiduals,
    pub residuals: TransmissionResiduals,
}

pub fn hodograph_refinement(cells: &[usize], source_exponent: f64) -> Result<Vec<HodographLevel>> {
    cells
        .iter()
        .map(|&c| {
            let (patch, eps) = selfsim_hodograph_patch(c, source_exponent)?;
            let n = patch.h.dim();
            Ok(HodographLevel {
                image_cells: c,
                k: patch.h.steps()[n - 1],
                round_trip: round_trip_error(&patch),
                identities: derivative_identity_check(&patch)?,
                residuals: transmission_residual(&patch.h, 1.0, eps)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perturbation_is_bounded() {
        for i in 0..=20 {
            for j in 0..=20 {
                for t in [-1.0, -0.5, 0.0] {
                    let x = [-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64];
                    assert!(flat_perturbation(&x, t).abs() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn sweep_brackets_the_threshold() {
        let (e0, rows) = counterexample_sweep(3, &[0.5, 0.9, 1.1], 1e-12).unwrap();
        assert!((e0 - 0.22163811157831863).abs() < 1e-9);
        assert!(rows[0].alpha < rows[1].alpha && rows[1].alpha < 1.0 && rows[2].alpha >= 1.0);
    }

    #[test]
    fn orders_from_halving() {
        let rows = [
            RefinementRow { cells: 8, h: 0.25, reg_width: 0.5, error: 0.4 },
            RefinementRow { cells: 16, h: 0.125, reg_width: 0.25, error: 0.1 },
        ];
        assert!((observed_orders(&rows)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_evolution_tracks_the_profile() {
        let setup = EvolutionSetup { cells: 256, time_steps: 64, ..Default::default() };
        let run = selfsim_evolution(&setup).unwrap();
        assert!(run.error < 0.1, "{}", run.error);
    }
}
