//! Self-similar solutions with a non-Lipschitz gradient.
//!
//! With `a₊ = 1` and `a₋ = ε`, the ansatz `u(x, t) = (−t)^{α/2} f(|x|/√(−t))`
//! on `t < 0` reduces the problem to the radial ODEs
//!
//! ```text
//! f'' + ((n−1)/s − s/2) f' + (α/2) f = 0      where f > 0
//! f'' + ((n−1)/s − εs/2) f' + (εα/2) f = 0    where f < 0
//! ```
//!
//! solved by `M(−α/2, n/2, s²/4)` inside and `−U(−α/2, n/2, εs²/4)` outside.
//! The exponent `α` is fixed by requiring both to vanish at the same `s_ε`.
//! The outer branch is scaled by `k > 0` so that `f'` is continuous at `s_ε`
//! (equal normal derivatives on the free boundary).

use crate::error::{ensure, Error, Result};
use crate::geometry::fmt17;
use crate::specfun::{
    kummer_m, kummer_m_derivative, scaled_zero_m, scaled_zero_u, tricomi_u, tricomi_u_with_derivative,
    HypergeomParams,
};
use serde::Serialize;
use std::fmt::Write as _;

/// Relative agreement required between the two zeros at the returned `α`.
pub const MATCH_REL_TOL: f64 = 1e-9;
/// Largest value either branch may take at the matching point.
const BRANCH_MISMATCH_TOL: f64 = 1e-8;
/// Finite-difference step for ODE residuals.
pub const RESIDUAL_STEP: f64 = 1e-4;
/// Half-width of the band around `s_ε` excluded from residual checks.
pub const RESIDUAL_BAND: f64 = 1e-3;
const ALPHA_GRID_DEPTH: i32 = 40;

/// Outcome of the zero-matching bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingResult {
    pub alpha: f64,
    pub s_eps: f64,
    /// `|s_M − s_U|` at `alpha`.
    pub residual: f64,
    /// Final bisection bracket `(alpha_lo, alpha_hi)`.
    pub bracket: (f64, f64),
}

fn check_n_eps(n: usize, eps: f64) -> Result<()> {
    ensure(n >= 3, || format!("dimension n must be >= 3, got {n}"))?;
    ensure(eps > 0.0 && eps < 1.0, || format!("eps must lie in (0, 1), got {eps}"))
}

/// `D(α) = s_M(α, n) − s_U(α, n, ε)`: negative at `α = 2`, `+∞` as `α ↘ 0`.
pub fn matching_defect(alpha: f64, n: usize, eps: f64) -> Result<f64> {
    Ok(scaled_zero_m(alpha, n)? - scaled_zero_u(alpha, n, eps)?)
}

/// Solve `D(α) = 0` by bisection after bracketing on `α = 2, 1, 1/2, …`.
pub fn solve_alpha(n: usize, eps: f64, tol: f64) -> Result<MatchingResult> {
    check_n_eps(n, eps)?;
    ensure(tol > 0.0, || format!("tolerance must be positive, got {tol}"))?;
    let mut samples = Vec::new();
    let mut hi = 2.0;
    let d_hi = matching_defect(hi, n, eps)?;
    samples.push((hi, d_hi));
    if d_hi >= 0.0 {
        return Err(Error::Matching { message: format!("D(2) = {d_hi} is not negative"), samples });
    }
    let mut lo = None;
    for k in 1..=ALPHA_GRID_DEPTH {
        let alpha = 2f64.powi(1 - k);
        let d = matching_defect(alpha, n, eps)?;
        samples.push((alpha, d));
        if d > 0.0 {
            lo = Some(alpha);
            break;
        }
        hi = alpha;
    }
    let Some(mut lo) = lo else {
        return Err(Error::Matching { message: "no sign change on the dyadic alpha grid".into(), samples });
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if matching_defect(mid, n, eps)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let sm = scaled_zero_m(alpha, n)?;
    let su = scaled_zero_u(alpha, n, eps)?;
    Ok(MatchingResult { alpha, s_eps: 0.5 * (sm + su), residual: (sm - su).abs(), bracket: (lo, hi) })
}

/// Threshold `ε₀(n) = (z̄_U(1, n)/z̄_M(1, n))²` below which `α < 1`.
pub fn eps0(n: usize) -> Result<f64> {
    ensure(n >= 3, || format!("dimension n must be >= 3, got {n}"))?;
    let ratio = scaled_zero_u(1.0, n, 1.0)? / scaled_zero_m(1.0, n)?;
    Ok(ratio * ratio)
}

/// Which ODE a point of the profile belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Positive,
    Negative,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Positive => "positive",
            Branch::Negative => "negative",
        }
    }
}

/// A radial profile `f` split at `s_ε` into a positive and a negative phase.
pub trait RadialProfile {
    fn dim(&self) -> usize;
    fn eps(&self) -> f64;
    fn alpha(&self) -> f64;
    fn s_eps(&self) -> f64;
    /// `(f(s), f'(s))` for `s ≥ 0`.
    fn value_and_slope(&self, s: f64) -> Result<(f64, f64)>;

    fn branch(&self, s: f64) -> Branch {
        if s <= self.s_eps() {
            Branch::Positive
        } else {
            Branch::Negative
        }
    }
}

/// How the outer branch `−k U(−α/2, n/2, εs²/4)` is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterScaling {
    /// `k` chosen so that `f'` is continuous at `s_ε`.
    FluxMatched,
    /// `k = 1`: continuous but with a kink at `s_ε`.
    Unit,
}

/// The matched self-similar profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarProfile {
    n: usize,
    eps: f64,
    alpha: f64,
    s_eps: f64,
    outer_scale: f64,
}

/// Build the flux-matched profile from a matching result.
pub fn build_profile(m: &MatchingResult, n: usize, eps: f64) -> Result<SelfSimilarProfile> {
    build_profile_with_scaling(m, n, eps, OuterScaling::FluxMatched)
}

pub fn build_profile_with_scaling(
    m: &MatchingResult,
    n: usize,
    eps: f64,
    scaling: OuterScaling,
) -> Result<SelfSimilarProfile> {
    check_n_eps(n, eps)?;
    ensure(m.residual <= MATCH_REL_TOL * m.s_eps, || {
        format!("matching residual {} exceeds {MATCH_REL_TOL}·s_eps", m.residual)
    })?;
    let p = HypergeomParams::for_profile(m.alpha, n);
    let z_in = 0.25 * m.s_eps * m.s_eps;
    let z_out = eps * z_in;
    let m_at = kummer_m(p, z_in)?;
    let (u_at, du_at) = tricomi_u_with_derivative(p, z_out)?;
    if m_at.abs() > BRANCH_MISMATCH_TOL || u_at.abs() > BRANCH_MISMATCH_TOL {
        return Err(Error::Numeric(format!(
            "branches do not vanish at s_eps = {}: M = {m_at:e}, U = {u_at:e}",
            m.s_eps
        )));
    }
    let outer_scale = match scaling {
        // M'(z_in)·s/2 = −k U'(z_out)·εs/2
        OuterScaling::FluxMatched => -kummer_m_derivative(p, z_in)? / (eps * du_at),
        OuterScaling::Unit => 1.0,
    };
    if !(outer_scale.is_finite() && outer_scale > 0.0) {
        return Err(Error::Numeric(format!("outer amplitude {outer_scale} is not a positive number")));
    }
    Ok(SelfSimilarProfile { n, eps, alpha: m.alpha, s_eps: m.s_eps, outer_scale })
}

impl SelfSimilarProfile {
    /// Solve for `α` and build the flux-matched profile in one step.
    pub fn solve(n: usize, eps: f64, tol: f64) -> Result<Self> {
        let m = solve_alpha(n, eps, tol)?;
        build_profile(&m, n, eps)
    }

    fn params(&self) -> HypergeomParams {
        HypergeomParams::for_profile(self.alpha, self.n)
    }

    /// Amplitude `k` of the outer branch.
    pub fn outer_scale(&self) -> f64 {
        self.outer_scale
    }

    /// `M(−α/2, n/2, s²/4)`, the inner branch continued to all `s`.
    pub fn inner_branch(&self, s: f64) -> Result<f64> {
        kummer_m(self.params(), 0.25 * s * s)
    }

    /// `−U(−α/2, n/2, εs²/4)` with unit amplitude, for `s > 0`.
    pub fn outer_branch_unit(&self, s: f64) -> Result<f64> {
        Ok(-tricomi_u(self.params(), 0.25 * self.eps * s * s)?)
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        Ok(self.value_and_slope(s)?.0)
    }

    /// `u(x, t) = (−t)^{α/2} f(|x|/√(−t))`.
    pub fn evaluate_u(&self, x: &[f64], t: f64) -> Result<f64> {
        ensure(t < 0.0, || format!("the self-similar solution lives on t < 0, got t = {t}"))?;
        let tau = -t;
        Ok(tau.powf(0.5 * self.alpha) * self.value(norm(x) / tau.sqrt())?)
    }

    /// `|∇u(x, t)| = (−t)^{(α−1)/2} |f'(|x|/√(−t))|`.
    pub fn gradient_norm(&self, x: &[f64], t: f64) -> Result<f64> {
        ensure(t < 0.0, || format!("the self-similar solution lives on t < 0, got t = {t}"))?;
        let tau = -t;
        let (_, slope) = self.value_and_slope(norm(x) / tau.sqrt())?;
        Ok(tau.powf(0.5 * (self.alpha - 1.0)) * slope.abs())
    }
}

impl RadialProfile for SelfSimilarProfile {
    fn dim(&self) -> usize {
        self.n
    }

    fn eps(&self) -> f64 {
        self.eps
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn s_eps(&self) -> f64 {
        self.s_eps
    }

    fn value_and_slope(&self, s: f64) -> Result<(f64, f64)> {
        ensure(s >= 0.0 && s.is_finite(), || format!("profile argument must be >= 0, got {s}"))?;
        let p = self.params();
        let z = 0.25 * s * s;
        if s <= self.s_eps {
            return Ok((kummer_m(p, z)?, kummer_m_derivative(p, z)? * 0.5 * s));
        }
        let (u, du) = tricomi_u_with_derivative(p, self.eps * z)?;
        Ok((-self.outer_scale * u, -self.outer_scale * du * 0.5 * self.eps * s))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest absolute ODE residual of `profile` over `samples`.
///
/// `f'` is taken from the profile; `f''` is the centered difference of `f'`
/// with step `h = 1e-4`, Richardson-extrapolated against `h/2`.
pub fn ode_residual(profile: &dyn RadialProfile, samples: &[f64]) -> Result<f64> {
    let h = RESIDUAL_STEP;
    let n = profile.dim() as f64;
    let alpha = profile.alpha();
    let mut worst = 0.0f64;
    for &s in samples {
        ensure(s > 2.0 * h && s.is_finite(), || format!("sample s = {s} too close to the origin"))?;
        ensure((s - profile.s_eps()).abs() >= RESIDUAL_BAND, || {
            format!("sample s = {s} lies in the excluded band around s_eps = {}", profile.s_eps())
        })?;
        let c = match profile.branch(s) {
            Branch::Positive => 1.0,
            Branch::Negative => profile.eps(),
        };
        let slope = |x: f64| -> Result<f64> { Ok(profile.value_and_slope(x)?.1) };
        let diff = |step: f64| -> Result<f64> { Ok((slope(s + step)? - slope(s - step)?) / (2.0 * step)) };
        let f2 = (4.0 * diff(0.5 * h)? - diff(h)?) / 3.0;
        let (f, f1) = profile.value_and_slope(s)?;
        let r = f2 + ((n - 1.0) / s - 0.5 * c * s) * f1 + 0.5 * c * alpha * f;
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Checks every structural property of a matched profile; returns the first
/// violation as an error.
pub fn check_profile(profile: &SelfSimilarProfile) -> Result<()> {
    let (n, eps, s_eps) = (profile.n, profile.eps, profile.s_eps);
    let sm = scaled_zero_m(profile.alpha, n)?;
    let su = scaled_zero_u(profile.alpha, n, eps)?;
    let fail = |msg: String| Err(Error::Numeric(msg));
    if (sm - su).abs() > MATCH_REL_TOL * s_eps {
        return fail(format!("zeros disagree: {sm} vs {su}"));
    }
    let (lo, hi) = ((2.0 * n as f64).sqrt(), (2.0 * n as f64 / eps).sqrt());
    if !(s_eps > lo && s_eps < hi) {
        return fail(format!("s_eps = {s_eps} outside ({lo}, {hi})"));
    }
    let (f0, df0) = profile.value_and_slope(0.0)?;
    if f0 != 1.0 || df0 != 0.0 {
        return fail(format!("f(0) = {f0}, f'(0) = {df0}"));
    }
    let changes = sign_changes(profile, 4.0 * s_eps, 4000)?;
    if changes != 1 {
        return fail(format!("profile changes sign {changes} times"));
    }
    // s^{−α} f(s) stays bounded: compare two far-field samples
    let far: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&m| {
            let s = m * s_eps;
            Ok(profile.value(s)?.abs() * s.powf(-profile.alpha))
        })
        .collect::<Result<_>>()?;
    if far.windows(2).any(|w| w[1] > 2.0 * w[0]) {
        return fail(format!("s^-alpha f(s) grows: {far:?}"));
    }
    Ok(())
}

/// Number of sign changes of `f` on a uniform grid over `(0, s_max]`.
pub fn sign_changes(profile: &SelfSimilarProfile, s_max: f64, samples: usize) -> Result<usize> {
    let mut prev = 1.0;
    let mut changes = 0;
    for i in 1..=samples {
        let v = profile.value(s_max * i as f64 / samples as f64)?;
        if v != 0.0 {
            if v * prev < 0.0 {
                changes += 1;
            }
            prev = v;
        }
    }
    Ok(changes)
}

/// `|∇u|` on the spheres `|x| = radius` at a fixed time.
pub fn gradient_on_spheres(profile: &SelfSimilarProfile, t: f64, radii: &[f64]) -> Result<Vec<f64>> {
    radii.iter().map(|&r| profile.gradient_norm(&[r], t)).collect()
}

/// Evidence that `u` is neither Lipschitz in space nor in time near the
/// origin as `t ↗ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupCertificate {
    pub radius: f64,
    pub times: Vec<f64>,
    /// Lower bounds for `sup_{|x| ≤ radius} |∇u(·, t)|`.
    pub gradient_sups: Vec<f64>,
    /// `|u(0, t_k) − u(0, t_{k+1})| / |t_k − t_{k+1}|`.
    pub time_quotients: Vec<f64>,
    /// Predicted growth exponent `(α − 1)/2` of the gradient in `−t`.
    pub exponent: f64,
}

impl BlowupCertificate {
    /// True when both sequences increase strictly.
    pub fn diverges(&self) -> bool {
        let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        inc(&self.gradient_sups) && inc(&self.time_quotients)
    }
}

/// Sample `sup_{|x| ≤ radius} |∇u(·, t)|` along `t = −2^{−k}` for `k` in
/// `levels`. Sampled maxima are lower bounds of the true suprema, so their
/// divergence certifies the blow-up.
pub fn gradient_blowup_certificate(
    profile: &SelfSimilarProfile,
    radius: f64,
    levels: std::ops::Range<i32>,
) -> Result<BlowupCertificate> {
    if profile.alpha >= 1.0 {
        return Err(Error::NotApplicable(format!(
            "gradient blow-up needs alpha < 1, got {}",
            profile.alpha
        )));
    }
    ensure(radius > 0.0, || format!("radius must be positive, got {radius}"))?;
    ensure(levels.len() >= 2, || "need at least two time levels".into())?;
    let times: Vec<f64> = levels.map(|k| -(2f64.powi(-k))).collect();
    let mut gradient_sups = Vec::with_capacity(times.len());
    for &t in &times {
        let tau = -t;
        let s_max = radius / tau.sqrt();
        let sup_slope = sampled_slope_sup(profile, s_max)?;
        gradient_sups.push(tau.powf(0.5 * (profile.alpha - 1.0)) * sup_slope);
    }
    let u0: Vec<f64> = times.iter().map(|&t| profile.evaluate_u(&[0.0], t)).collect::<Result<_>>()?;
    let time_quotients = u0
        .windows(2)
        .zip(times.windows(2))
        .map(|(u, t)| (u[0] - u[1]).abs() / (t[0] - t[1]).abs())
        .collect();
    Ok(BlowupCertificate { radius, times, gradient_sups, time_quotients, exponent: 0.5 * (profile.alpha - 1.0) })
}

/// Max of `|f'|` over a uniform grid near the free boundary plus a
/// logarithmic grid out to `s_max`.
fn sampled_slope_sup(profile: &SelfSimilarProfile, s_max: f64) -> Result<f64> {
    let near = s_max.min(8.0 * profile.s_eps);
    let mut best = 0.0f64;
    for i in 1..=2000 {
        let s = near * i as f64 / 2000.0;
        best = best.max(profile.value_and_slope(s)?.1.abs());
    }
    if s_max > near {
        let ratio = (s_max / near).ln();
        for i in 1..=200 {
            let s = near * (ratio * i as f64 / 200.0).exp();
            best = best.max(profile.value_and_slope(s)?.1.abs());
        }
    }
    Ok(best)
}

/// One row of a profile table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub s: f64,
    pub f: f64,
    pub fprime: f64,
    pub branch: Branch,
}

/// Sample the profile on `0, ds, 2ds, …, s_max`.
pub fn profile_table(profile: &SelfSimilarProfile, s_max: f64, ds: f64) -> Result<Vec<ProfileRow>> {
    ensure(ds > 0.0 && s_max > 0.0, || format!("need s_max > 0 and ds > 0, got {s_max}, {ds}"))?;
    let count = (s_max / ds).floor() as usize;
    (0..=count)
        .map(|i| {
            let s = i as f64 * ds;
            let (f, fprime) = profile.value_and_slope(s)?;
            Ok(ProfileRow { s, f, fprime, branch: profile.branch(s) })
        })
        .collect()
}

pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("s,f,fprime,branch\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", fmt17(r.s), fmt17(r.f), fmt17(r.fprime), r.branch.label());
    }
    out
}

/// Both unit-amplitude branches and the matched profile over
/// `[0, 1.5 s_ε]`, as CSV `s,inner,outer,profile`.
pub fn figure2_csv(profile: &SelfSimilarProfile, samples: usize) -> Result<String> {
    ensure(samples >= 2, || "need at least two samples".into())?;
    let s_max = 1.5 * profile.s_eps;
    let mut out = String::from("s,inner,outer,profile\n");
    for i in 0..samples {
        let s = s_max * i as f64 / (samples - 1) as f64;
        let outer = if s > 0.0 { profile.outer_branch_unit(s)? } else { f64::NAN };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt17(s),
            fmt17(profile.inner_branch(s)?),
            fmt17(outer),
            fmt17(profile.value(s)?)
        );
    }
    Ok(out)
}

/// Gnuplot script plotting the branches in `csv_path` with the common zero
/// marked.
pub fn figure2_gnuplot(profile: &SelfSimilarProfile, csv_path: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key top right\n\
         set xlabel 's'\n\
         set ylabel 'f(s)'\n\
         set title 'n = {n}, eps = {eps}, alpha = {alpha:.6}'\n\
         set xzeroaxis\n\
         set arrow from {s:.10},graph 0 to {s:.10},graph 1 nohead dashtype 2\n\
         plot '{csv}' using 1:2 with lines lw 2 title 'M(-alpha/2, n/2, s^2/4)', \\\n\
         \x20    '{csv}' using 1:3 with lines lw 2 title '-U(-alpha/2, n/2, eps s^2/4)'\n",
        n = profile.n,
        eps = profile.eps,
        alpha = profile.alpha,
        s = profile.s_eps,
        csv = csv_path,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TOL: f64 = 1e-13;

    struct Zero;

    impl RadialProfile for Zero {
        fn dim(&self) -> usize {
            3
        }
        fn eps(&self) -> f64 {
            0.5
        }
        fn alpha(&self) -> f64 {
            1.0
        }
        fn s_eps(&self) -> f64 {
            1.0
        }
        fn value_and_slope(&self, _s: f64) -> Result<(f64, f64)> {
            Ok((0.0, 0.0))
        }
    }

    /// `α = 2` polynomial solutions `1 − s²/(2n)` and `εs²/4 − n/2`, glued
    /// at the inner zero (they do not match, which the residual ignores).
    struct Quadratic {
        n: usize,
        eps: f64,
    }

    impl RadialProfile for Quadratic {
        fn dim(&self) -> usize {
            self.n
        }
        fn eps(&self) -> f64 {
            self.eps
        }
        fn alpha(&self) -> f64 {
            2.0
        }
        fn s_eps(&self) -> f64 {
            (2.0 * self.n as f64).sqrt()
        }
        fn value_and_slope(&self, s: f64) -> Result<(f64, f64)> {
            let n = self.n as f64;
            Ok(if s <= self.s_eps() {
                (1.0 - s * s / (2.0 * n), -s / n)
            } else {
                (0.25 * self.eps * s * s - 0.5 * n, 0.5 * self.eps * s)
            })
        }
    }

    fn grid(lo: f64, hi: f64, count: usize, skip: f64) -> Vec<f64> {
        (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .filter(|s| (s - skip).abs() >= RESIDUAL_BAND)
            .collect()
    }

    #[test]
    fn eps0_fixtures() {
        // 30-digit reference value 0.22163811157831863...
        assert_relative_eq!(eps0(3).unwrap(), 0.221_638_111_578_318_63, max_relative = 1e-11);
        assert_relative_eq!(eps0(10).unwrap(), 0.487_143_160_580_156_47, max_relative = 1e-11);
        for n in [3, 5, 7] {
            let e = eps0(n).unwrap();
            assert!(e > 0.0 && e < 1.0, "n={n}: {e}");
        }
        assert!(eps0(2).is_err());
    }

    #[test]
    fn alpha_crosses_one_at_eps0() {
        let e0 = eps0(3).unwrap();
        let below = solve_alpha(3, 0.99 * e0, TOL).unwrap();
        let above = solve_alpha(3, 1.01 * e0, TOL).unwrap();
        assert!(below.alpha < 1.0 && above.alpha >= 1.0, "{below:?} {above:?}");
        let at = solve_alpha(3, e0, TOL).unwrap();
        assert_relative_eq!(at.alpha, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn matching_fixtures_n3() {
        let e0 = eps0(3).unwrap();
        for (eps, alpha, s_eps) in [
            (0.9 * e0, 0.952_951_26, 3.042_25),
            (1.1 * e0, 1.044_590_31, 2.969_20),
            (0.1, 0.695_440_26, 3.289_776_78),
        ] {
            let m = solve_alpha(3, eps, TOL).unwrap();
            assert_relative_eq!(m.alpha, alpha, max_relative = 1e-7);
            assert_relative_eq!(m.s_eps, s_eps, max_relative = 1e-5);
            assert!(m.residual <= MATCH_REL_TOL * m.s_eps);
            assert!(m.bracket.1 - m.bracket.0 <= TOL);
            assert!(matching_defect(m.bracket.0, 3, eps).unwrap() > 0.0);
            assert!(matching_defect(m.bracket.1, 3, eps).unwrap() <= 0.0);
        }
    }

    #[test]
    fn alpha_tends_to_two_as_eps_tends_to_one() {
        let m = solve_alpha(3, 0.999, TOL).unwrap();
        assert!(m.alpha > 1.99, "{m:?}");
        assert!(matching_defect(1.99, 3, 0.999).unwrap() > 0.0);
    }

    #[test]
    fn alpha_decreases_along_dyadic_eps() {
        let e0 = eps0(3).unwrap();
        let alphas: Vec<f64> =
            (1..=4).map(|k| solve_alpha(3, e0 * 2f64.powi(-k), TOL).unwrap().alpha).collect();
        for (got, want) in alphas.iter().zip([0.728_746_16, 0.531_754_18, 0.388_380_61, 0.283_818_21]) {
            assert_relative_eq!(*got, want, max_relative = 1e-7);
        }
        assert!(alphas.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn matched_profile_properties() {
        let p = SelfSimilarProfile::solve(3, 0.1, TOL).unwrap();
        check_profile(&p).unwrap();
        assert_eq!(p.value(0.0).unwrap(), 1.0);
        assert!(p.inner_branch(p.s_eps()).unwrap().abs() < 1e-10);
        assert!(p.outer_branch_unit(p.s_eps()).unwrap().abs() < 1e-10);
        assert!(p.value(2.0 * p.s_eps()).unwrap() < 0.0);
        assert_relative_eq!(p.outer_scale(), 2.6749, max_relative = 1e-4);
        // slope continuity at the free boundary
        let (_, left) = p.value_and_slope(p.s_eps() * (1.0 - 1e-9)).unwrap();
        let (_, right) = p.value_and_slope(p.s_eps() * (1.0 + 1e-9)).unwrap();
        assert_relative_eq!(left, right, max_relative = 1e-7);
        assert_relative_eq!(left, -0.978_35, max_relative = 1e-4);
    }

    #[test]
    fn unit_scaling_keeps_the_kink() {
        let m = solve_alpha(3, 0.1, TOL).unwrap();
        let p = build_profile_with_scaling(&m, 3, 0.1, OuterScaling::Unit).unwrap();
        let (_, right) = p.value_and_slope(p.s_eps() * (1.0 + 1e-9)).unwrap();
        assert_relative_eq!(right, -0.365_75, max_relative = 1e-4);
    }

    #[test]
    fn build_rejects_unmatched_input() {
        let mut m = solve_alpha(3, 0.1, TOL).unwrap();
        m.residual = 1e-3;
        assert!(build_profile(&m, 3, 0.1).is_err());
        let mut m = solve_alpha(3, 0.1, TOL).unwrap();
        m.alpha += 1e-3;
        assert!(matches!(build_profile(&m, 3, 0.1), Err(Error::Numeric(_))));
    }

    #[test]
    fn ode_residual_examples() {
        assert_eq!(ode_residual(&Zero, &[0.5, 2.0, 5.0]).unwrap(), 0.0);
        let q = Quadratic { n: 3, eps: 0.3 };
        let samples = grid(0.1, 10.0, 500, q.s_eps());
        assert!(ode_residual(&q, &samples).unwrap() <= 1e-8);
        let p = SelfSimilarProfile::solve(3, 0.1, TOL).unwrap();
        let samples = grid(0.05, 3.0 * p.s_eps(), 400, p.s_eps());
        assert!(ode_residual(&p, &samples).unwrap() <= 1e-6);
        assert!(matches!(ode_residual(&p, &[p.s_eps()]), Err(Error::Argument(_))));
        assert!(ode_residual(&p, &[0.0]).is_err());
    }

    #[test]
    fn integer_b_profile() {
        let e0 = eps0(10).unwrap();
        let p = SelfSimilarProfile::solve(10, 0.25 * e0, TOL).unwrap();
        check_profile(&p).unwrap();
        assert!(p.alpha() < 1.0);
        let samples = grid(0.05, 2.5 * p.s_eps(), 300, p.s_eps());
        assert!(ode_residual(&p, &samples).unwrap() <= 1e-6);
    }

    #[test]
    fn evaluate_u_examples() {
        let p = SelfSimilarProfile::solve(3, 0.1, TOL).unwrap();
        for t in [-0.25f64, -1.0, -4.0] {
            assert_relative_eq!(p.evaluate_u(&[0.0, 0.0, 0.0], t).unwrap(), (-t).powf(0.5 * p.alpha()));
            let r = p.s_eps() * (-t).sqrt();
            assert!(p.evaluate_u(&[r, 0.0, 0.0], t).unwrap().abs() < 1e-10);
        }
        assert!(matches!(p.evaluate_u(&[0.0], 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn certificate_examples() {
        let p = SelfSimilarProfile::solve(3, 0.1, TOL).unwrap();
        let cert = gradient_blowup_certificate(&p, 0.5, 0..12).unwrap();
        assert!(cert.diverges(), "{cert:?}");
        let ratio = cert.gradient_sups[11] / cert.gradient_sups[10];
        assert_relative_eq!(ratio, 2f64.powf(0.5 * (1.0 - p.alpha())), max_relative = 1e-3);

        let q = SelfSimilarProfile::solve(3, 0.9, TOL).unwrap();
        assert!(q.alpha() >= 1.0);
        assert!(matches!(gradient_blowup_certificate(&q, 0.5, 0..4), Err(Error::NotApplicable(_))));

        let radii: Vec<f64> = (0..8).map(|k| 2f64.powi(-k)).collect();
        let g = gradient_on_spheres(&p, -1.0, &radii).unwrap();
        assert!(g.windows(2).all(|w| w[1] < w[0]), "near the origin f' ~ c s: {g:?}");
    }

    #[test]
    fn figure2_outputs() {
        let p = SelfSimilarProfile::solve(3, 0.1, TOL).unwrap();
        let csv = figure2_csv(&p, 101).unwrap();
        assert!(csv.starts_with("s,inner,outer,profile\n"));
        assert_eq!(csv.lines().count(), 102);
        let script = figure2_gnuplot(&p, "fig.csv");
        assert!(script.contains("plot 'fig.csv'"));
        let rows = profile_table(&p, 6.0, 0.5).unwrap();
        assert_eq!(rows.len(), 13);
        assert_eq!(rows[0].branch, Branch::Positive);
        assert_eq!(rows[12].branch, Branch::Negative);
        assert!(profile_csv(&rows).starts_with("s,f,fprime,branch\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn parabolic_scaling(r in 0.2..5.0f64, x in -3.0..3.0f64, t in -4.0..-0.1f64) {
            let p = SelfSimilarProfile::solve(3, 0.1, 1e-12).unwrap();
            let lhs = p.evaluate_u(&[r * x], r * r * t).unwrap();
            let rhs = r.powf(p.alpha()) * p.evaluate_u(&[x], t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn matching_is_consistent(eps in 0.02..0.95f64) {
            let m = solve_alpha(3, eps, TOL).unwrap();
            let sm = scaled_zero_m(m.alpha, 3).unwrap();
            let su = scaled_zero_u(m.alpha, 3, eps).unwrap();
            prop_assert!((sm - su).abs() <= MATCH_REL_TOL * m.s_eps);
            prop_assert!(m.s_eps > 6f64.sqrt() && m.s_eps < (6.0 / eps).sqrt());
        }
    }
}
