//! Explicit barrier for the Harnack step: an eigenfunction times a cubic
//! bell, sliding along the oblique cylinder `D`, damped by `e^{−K(t+4/5)}`.

use crate::error::{ensure, Error, Result};
use crate::specfun::{bessel_j0, bessel_j0_first_zero};
use rayon::prelude::*;
use serde::Serialize;

/// Half-width of the oblique cylinder.
pub const BARRIER_RADIUS: f64 = 5.0 / 12.0;
/// Drift speed of the cylinder axis: `x_n = −(5/8) t`.
pub const DRIFT: f64 = 5.0 / 8.0;
/// Initial time of the cylinder.
pub const START_TIME: f64 = -4.0 / 5.0;
/// Largest damping rate tried by [`subsolution_check`].
pub const MAX_RATE: f64 = (1u64 << 20) as f64;
/// Width of the band around the bell's seam that the grid sweep skips.
pub const SEAM_BAND: f64 = 1e-6;

fn check_dim(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::NotApplicable(format!("barrier is implemented for n = 2 or 3, got {n}")))
    }
}

/// Dirichlet eigenvalue of `−Δ` on the `(n−1)`-ball of radius `r`.
pub fn lambda1(n: usize, r: f64) -> Result<f64> {
    check_dim(n)?;
    ensure(r > 0.0, || format!("radius must be positive, got {r}"))?;
    Ok(match n {
        2 => std::f64::consts::PI.powi(2) / (4.0 * r * r),
        _ => (bessel_j0_first_zero() / r).powi(2),
    })
}

/// First Dirichlet eigenfunction on the `(n−1)`-ball of radius `r`,
/// normalized so its maximum (at the center) is 1.
pub fn phi1(xprime: &[f64], n: usize, r: f64) -> Result<f64> {
    check_dim(n)?;
    ensure(xprime.len() == n - 1, || format!("expected {} tangential coordinates, got {}", n - 1, xprime.len()))?;
    let rho = norm(xprime);
    if rho > r * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("|x'| = {rho} exceeds r = {r}")));
    }
    Ok(phi1_radial(n, rho.min(r), r))
}

fn phi1_radial(n: usize, rho: f64, r: f64) -> f64 {
    match n {
        2 => (std::f64::consts::PI * rho / (2.0 * r)).cos().max(0.0),
        _ => bessel_j0(bessel_j0_first_zero() * rho / r).max(0.0),
    }
}

/// Cubic bell `(2/r³)|y|³ − (3/r²)y² + 1` on `[−r, r]`.
pub fn phi2(y: f64, r: f64) -> Result<f64> {
    if y.abs() > r * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("|y| = {} exceeds r = {r}", y.abs())));
    }
    Ok(bell(y.clamp(-r, r), r).0)
}

/// Bell value with its first and second derivatives.
fn bell(y: f64, r: f64) -> (f64, f64, f64) {
    let a = y.abs();
    let value = 2.0 * a.powi(3) / r.powi(3) - 3.0 * y * y / (r * r) + 1.0;
    let slope = 6.0 * y * a / r.powi(3) - 6.0 * y / (r * r);
    let curvature = 12.0 * a / r.powi(3) - 6.0 / (r * r);
    (value, slope, curvature)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Oblique cylinder `|x'| < r`, `|x_n + (5/8)t| ≤ r`, `t ∈ (−4/5, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObliqueCylinder {
    pub r: f64,
    pub time_range: (f64, f64),
}

impl Default for ObliqueCylinder {
    fn default() -> Self {
        Self { r: BARRIER_RADIUS, time_range: (START_TIME, 0.0) }
    }
}

impl ObliqueCylinder {
    /// Bell coordinate `x_n + (5/8)t`.
    pub fn axial(x: &[f64], t: f64) -> f64 {
        x[x.len() - 1] + DRIFT * t
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        let n = x.len();
        norm(&x[..n - 1]) < self.r
            && Self::axial(x, t).abs() <= self.r
            && t > self.time_range.0
            && t <= self.time_range.1
    }

    /// Membership in the closure, with slack `tol`.
    pub fn contains_closed(&self, x: &[f64], t: f64, tol: f64) -> bool {
        let n = x.len();
        norm(&x[..n - 1]) <= self.r + tol
            && Self::axial(x, t).abs() <= self.r + tol
            && t >= self.time_range.0 - tol
            && t <= self.time_range.1 + tol
    }

    /// True on the lateral boundary of the closure.
    pub fn on_lateral_boundary(&self, x: &[f64], t: f64, tol: f64) -> bool {
        let n = x.len();
        self.contains_closed(x, t, tol)
            && ((norm(&x[..n - 1]) - self.r).abs() <= tol || (Self::axial(x, t).abs() - self.r).abs() <= tol)
    }
}

/// Barrier parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierSpec {
    pub n: usize,
    pub r: f64,
    pub delta: f64,
    pub c0: f64,
    /// Damping rate `K` of `s(t) = e^{−K(t + 4/5)}`.
    pub k: f64,
    pub a_plus: f64,
    pub a_minus: f64,
}

impl BarrierSpec {
    pub fn new(n: usize, delta: f64, c0: f64, k: f64, a_plus: f64, a_minus: f64) -> Result<Self> {
        check_dim(n)?;
        ensure(delta > 0.0 && delta <= 0.05, || format!("delta must lie in (0, 1/20], got {delta}"))?;
        ensure(c0 > 0.0 && c0 < 1.0, || format!("c0 must lie in (0, 1), got {c0}"))?;
        for (name, a) in [("a_plus", a_plus), ("a_minus", a_minus)] {
            ensure(a > 0.0 && a <= 1.0, || format!("{name} must lie in (0, 1], got {a}"))?;
        }
        let threshold = rate_threshold(n, a_plus, a_minus)?;
        ensure(k > threshold, || format!("K = {k} must exceed lambda1 / min(a) = {threshold}"))?;
        Ok(Self { n, r: BARRIER_RADIUS, delta, c0, k, a_plus, a_minus })
    }

    /// Spec with the damping rate just above its lower bound.
    pub fn minimal(n: usize, delta: f64, c0: f64, a_plus: f64, a_minus: f64) -> Result<Self> {
        check_dim(n)?;
        let k = rate_threshold(n, a_plus, a_minus)? * (1.0 + 1e-9);
        Self::new(n, delta, c0, k, a_plus, a_minus)
    }

    pub fn cylinder(&self) -> ObliqueCylinder {
        ObliqueCylinder { r: self.r, ..Default::default() }
    }

    /// Time damping `e^{−K(t + 4/5)}`.
    pub fn damping(&self, t: f64) -> f64 {
        (-self.k * (t - START_TIME)).exp()
    }

    /// Bump `φ₁(x') φ₂(x_n + (5/8)t)`; zero on the lateral boundary.
    pub fn bump(&self, x: &[f64], t: f64) -> f64 {
        let n = x.len();
        let rho = norm(&x[..n - 1]).min(self.r);
        let y = ObliqueCylinder::axial(x, t).clamp(-self.r, self.r);
        phi1_radial(self.n, rho, self.r) * bell(y, self.r).0
    }

    /// `a ∂_t w − Δw` at `|x'| = rho`, bell coordinate `y`, time `t`.
    fn operator(&self, a: f64, rho: f64, y: f64, t: f64) -> f64 {
        let lambda = lambda1(self.n, self.r).unwrap_or(f64::NAN);
        let (b, db, d2b) = bell(y, self.r);
        let p = phi1_radial(self.n, rho, self.r);
        let s = self.damping(t);
        self.c0 * self.delta * s * p * (-a * self.k * b + a * DRIFT * db + lambda * b - d2b)
    }
}

/// Lower bound `λ₁ / min(a₊, a₋)` on the damping rate.
pub fn rate_threshold(n: usize, a_plus: f64, a_minus: f64) -> Result<f64> {
    ensure(a_plus > 0.0 && a_minus > 0.0, || "coefficients must be positive".into())?;
    Ok(lambda1(n, BARRIER_RADIUS)? / a_plus.min(a_minus))
}

/// `w(x,t) = x_n − δ + c₀δ s(t) φ(x', x_n + (5/8)t) − c₀δ` on the closure of `D`.
pub fn barrier_eval(spec: &BarrierSpec, x: &[f64], t: f64) -> Result<f64> {
    ensure(x.len() == spec.n, || format!("expected a point in R^{}, got {} coordinates", spec.n, x.len()))?;
    if !spec.cylinder().contains_closed(x, t, 1e-12) {
        return Err(Error::Domain(format!("({x:?}, {t}) lies outside the oblique cylinder")));
    }
    let cd = spec.c0 * spec.delta;
    Ok(x[spec.n - 1] - spec.delta + cd * spec.damping(t) * spec.bump(x, t) - cd)
}

/// Portion of `D` by bell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BellRegion {
    /// `y ∈ (−r, −3r/4) ∪ (r/2, r)`, where the bell's curvature dominates.
    Edge,
    /// `y ∈ [−3r/4, r/2]`, where the damping must dominate.
    Plateau,
    All,
}

impl BellRegion {
    fn contains(self, y: f64, r: f64) -> bool {
        let plateau = (-0.75 * r..=0.5 * r).contains(&y);
        match self {
            BellRegion::Edge => !plateau,
            BellRegion::Plateau => plateau,
            BellRegion::All => true,
        }
    }
}

/// Maximum of `a_± ∂_t w − Δw` over a grid sweep of `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorScan {
    pub max_value: f64,
    /// `(x', y, t)` collapsed to `(|x'|, y, t)` at the maximum.
    pub argmax: (f64, f64, f64),
    pub edge_max: f64,
    pub plateau_max: f64,
    /// One-sided values at the seam `y = 0⁻` and `y = 0⁺` (center, `t = 0`).
    pub seam_values: (f64, f64),
    pub points: usize,
}

/// Sweep `grid` cell centers per coordinate of `D` (skipping `|y| < SEAM_BAND`)
/// and evaluate both phase operators.
pub fn operator_scan(spec: &BarrierSpec, grid: usize, region: BellRegion) -> Result<OperatorScan> {
    check_dim(spec.n)?;
    ensure(grid >= 2, || format!("grid must have at least 2 points per axis, got {grid}"))?;
    let r = spec.r;
    let centers = |lo: f64, hi: f64| -> Vec<f64> {
        (0..grid).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / grid as f64).collect()
    };
    let tang = centers(-r, r);
    let axial = centers(-r, r);
    let times = centers(START_TIME, 0.0);
    let radii: Vec<f64> = match spec.n {
        2 => tang.iter().map(|v| v.abs()).collect(),
        _ => tang.iter().flat_map(|a| tang.iter().map(move |b| a.hypot(*b))).filter(|&q| q < r).collect(),
    };
    let coeffs = [spec.a_plus, spec.a_minus];
    let empty = (f64::NEG_INFINITY, (0.0, 0.0, 0.0), f64::NEG_INFINITY, f64::NEG_INFINITY, 0usize);
    let (max_value, argmax, edge_max, plateau_max, points) = times
        .par_iter()
        .map(|&t| {
            let mut acc = empty;
            for &y in &axial {
                if y.abs() < SEAM_BAND || !region.contains(y, r) {
                    continue;
                }
                let edge = BellRegion::Edge.contains(y, r);
                for &rho in &radii {
                    for &a in &coeffs {
                        let v = spec.operator(a, rho, y, t);
                        acc.4 += 1;
                        if v > acc.0 {
                            acc.0 = v;
                            acc.1 = (rho, y, t);
                        }
                        if edge {
                            acc.2 = acc.2.max(v);
                        } else {
                            acc.3 = acc.3.max(v);
                        }
                    }
                }
            }
            acc
        })
        .reduce(
            || empty,
            |p, q| {
                let (m, arg) = if q.0 > p.0 { (q.0, q.1) } else { (p.0, p.1) };
                (m, arg, p.2.max(q.2), p.3.max(q.3), p.4 + q.4)
            },
        );
    if points == 0 {
        return Err(Error::Empty(format!("grid of {grid} misses the {region:?} region")));
    }
    let seam = |side: f64| {
        coeffs.iter().map(|&a| spec.operator(a, 0.0, side * f64::MIN_POSITIVE, 0.0)).fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(OperatorScan { max_value, argmax, edge_max, plateau_max, seam_values: (seam(-1.0), seam(1.0)), points })
}

/// Outcome of [`subsolution_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsolutionReport {
    pub k_used: f64,
    pub max_operator_value: f64,
    pub doublings: u32,
    pub scan: OperatorScan,
    /// `c₀ e^{−4K/5} inf φ` over `Q̄_{1/3}`.
    pub c: f64,
    /// `min (w + c₀δ − x_n + (1 − c)δ)` over `Q̄_{1/3}`; nonnegative on success.
    pub lower_bound_margin: f64,
    /// Every extreme point of `Q̄_{1/3}` lies in the closure of `D`.
    pub inner_cylinder_contained: bool,
}

impl SubsolutionReport {
    pub fn passed(&self) -> bool {
        self.max_operator_value < 0.0
            && self.seam_values_negative()
            && self.c > 0.0
            && self.lower_bound_margin >= -1e-15
            && self.inner_cylinder_contained
    }

    fn seam_values_negative(&self) -> bool {
        self.scan.seam_values.0 < 0.0 && self.scan.seam_values.1 < 0.0
    }
}

/// Radius of the inner parabolic cylinder where the barrier bound is certified.
pub const INNER_RADIUS: f64 = 1.0 / 3.0;

/// Check that `w` is a strict subsolution of both phase operators on `D`,
/// doubling `K` until it is or `K` exceeds [`MAX_RATE`]. On success, also
/// certify `w + c₀δ ≥ x_n − (1 − c)δ` on `Q̄_{1/3}`.
pub fn subsolution_check(spec: &BarrierSpec, grid: usize) -> Result<SubsolutionReport> {
    let threshold = rate_threshold(spec.n, spec.a_plus, spec.a_minus)?;
    ensure(spec.k > threshold, || format!("K = {} must exceed lambda1 / min(a) = {threshold}", spec.k))?;
    let mut trial = *spec;
    let mut doublings = 0;
    loop {
        let scan = operator_scan(&trial, grid, BellRegion::All)?;
        if scan.max_value < 0.0 && scan.seam_values.0 < 0.0 && scan.seam_values.1 < 0.0 {
            let (c, margin) = inner_bound(&trial);
            return Ok(SubsolutionReport {
                k_used: trial.k,
                max_operator_value: scan.max_value,
                doublings,
                scan,
                c,
                lower_bound_margin: margin,
                inner_cylinder_contained: inner_cylinder_contained(&trial),
            });
        }
        if trial.k * 2.0 > MAX_RATE {
            return Err(Error::Numeric(format!(
                "no damping rate up to {MAX_RATE} gives a subsolution; at K = {}: edge max {}, plateau max {}, worst point (|x'|, y, t) = {:?}",
                trial.k, scan.edge_max, scan.plateau_max, scan.argmax
            )));
        }
        trial.k *= 2.0;
        doublings += 1;
    }
}

/// Boundary samples `(|x'|, x_n, t)` of `Q̄_{1/3}`: the sphere `|x| = 1/3` at
/// both end times. The bump is radially decreasing in `|x'|` and `|y|`, and
/// `D` is convex, so these points control both the infimum and containment.
fn inner_extreme_points() -> Vec<(f64, f64, f64)> {
    let samples = 20_000;
    let times = [-INNER_RADIUS * INNER_RADIUS, 0.0];
    (0..=samples)
        .flat_map(|i| {
            let theta = std::f64::consts::PI * i as f64 / samples as f64;
            times.map(|t| (INNER_RADIUS * theta.sin(), INNER_RADIUS * theta.cos(), t))
        })
        .collect()
}

fn inner_bound(spec: &BarrierSpec) -> (f64, f64) {
    let pts = inner_extreme_points();
    let inf_bump = pts
        .iter()
        .map(|&(rho, xn, t)| phi1_radial(spec.n, rho, spec.r) * bell(xn + DRIFT * t, spec.r).0)
        .fold(f64::INFINITY, f64::min);
    let c = spec.c0 * (-0.8 * spec.k).exp() * inf_bump;
    let cd = spec.c0 * spec.delta;
    let margin = pts
        .iter()
        .map(|&(rho, xn, t)| {
            let bump = phi1_radial(spec.n, rho, spec.r) * bell(xn + DRIFT * t, spec.r).0;
            let lifted = xn - spec.delta + cd * spec.damping(t) * bump;
            lifted - (xn - (1.0 - c) * spec.delta)
        })
        .fold(f64::INFINITY, f64::min);
    (c, margin)
}

fn inner_cylinder_contained(spec: &BarrierSpec) -> bool {
    let cyl = spec.cylinder();
    inner_extreme_points().iter().all(|&(rho, xn, t)| {
        let mut x = vec![0.0; spec.n];
        x[0] = rho;
        x[spec.n - 1] = xn;
        cyl.contains_closed(&x, t, 0.0)
    })
}
