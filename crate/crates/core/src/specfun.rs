//! Confluent hypergeometric functions and their positive zeros.
//!
//! `M(a, b, z)` (Kummer) and `U(a, b, z)` (Tricomi) both solve
//!
//! ```text
//! z g'' + (b − z) g' − a g = 0
//! ```
//!
//! `M` is the power series `Σ (a)_k / ((b)_k k!) zᵏ`; `U` is the solution with
//! `z^a U(a, b, z) → 1` as `z → ∞`.
//!
//! Evaluation strategy for `U` on `z > 0`:
//!
//! * terminating cases (`a` or `a − b + 1` a non-positive integer) are
//!   evaluated as polynomials;
//! * `z ≥ 40`: the large-`z` asymptotic series;
//! * small `z` with non-integer `b`: the two-`M` connection formula;
//! * everything else: Taylor continuation of the ODE from an asymptotic
//!   anchor, stepping toward the origin. `M` is exponentially recessive in
//!   that direction, so continuation errors are damped. This path also
//!   covers integer `b` without the logarithmic series.
//!
//! Also: `J₀` and its first zero, needed by the barrier eigenfunction.

use crate::error::{ensure, Error, Result};

/// Above this argument both functions use their large-`z` expansions when
/// those are accurate to working precision.
pub const ASYMPTOTIC_Z: f64 = 40.0;
/// Largest `z` at which the connection formula is used for `U`.
const CONNECTION_Z: f64 = 4.0;
const SERIES_CAP: usize = 100_000;
const SERIES_REL_TOL: f64 = 1e-17;
const SERIES_QUIET_TERMS: usize = 10;

/// Default relative bracket width for zero finding.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;
const ZERO_SCALED_TOL: f64 = 1e-13;

/// Parameters `(a, b)` of `M(a, b, ·)` and `U(a, b, ·)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeomParams {
    pub a: f64,
    pub b: f64,
}

impl HypergeomParams {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    /// Parameters for the self-similar profile: `a = −α/2`, `b = n/2`.
    pub fn for_profile(alpha: f64, n: usize) -> Self {
        Self { a: -0.5 * alpha, b: 0.5 * n as f64 }
    }

    fn check_zero_regime(&self) -> Result<()> {
        ensure((-1.0..0.0).contains(&self.a) && self.b >= 1.0, || {
            format!("zero finding needs a in [-1, 0) and b >= 1, got a={}, b={}", self.a, self.b)
        })
    }
}

/// Which confluent function a zero belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HypergeomFn {
    KummerM,
    TricomiU,
}

impl HypergeomFn {
    pub fn eval(self, p: HypergeomParams, z: f64) -> Result<f64> {
        match self {
            HypergeomFn::KummerM => kummer_m(p, z),
            HypergeomFn::TricomiU => tricomi_u(p, z),
        }
    }

    /// Sign of the function just to the right of `z = 0` in the zero regime.
    fn inner_sign(self) -> f64 {
        match self {
            HypergeomFn::KummerM => 1.0,
            HypergeomFn::TricomiU => -1.0,
        }
    }
}

impl std::str::FromStr for HypergeomFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" | "kummer" => Ok(HypergeomFn::KummerM),
            "U" | "u" | "tricomi" => Ok(HypergeomFn::TricomiU),
            other => Err(Error::Argument(format!("unknown function {other:?}, expected M or U"))),
        }
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `1/Γ(x)`, exactly zero at the poles.
pub fn recip_gamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / libm::tgamma(x)
    }
}

/// Pochhammer symbol `(x)_k = x (x+1) ⋯ (x+k−1)`.
pub fn pochhammer(x: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (x + i as f64))
}

/// Kummer's function `M(a, b, z)`.
pub fn kummer_m(p: HypergeomParams, z: f64) -> Result<f64> {
    ensure(!is_nonpositive_integer(p.b), || {
        format!("M(a, b, z) is undefined for b = {} (non-positive integer)", p.b)
    })?;
    ensure(p.a.is_finite() && p.b.is_finite() && z.is_finite(), || "non-finite argument".into())?;
    if z > ASYMPTOTIC_Z && !is_nonpositive_integer(p.a) {
        if let Some(v) = kummer_m_asymptotic(p, z) {
            return Ok(v);
        }
    }
    kummer_m_series(p, z)
}

/// The defining power series, summed with compensation until ten consecutive
/// terms fall below `1e-17 |partial sum|`.
pub fn kummer_m_series(p: HypergeomParams, z: f64) -> Result<f64> {
    let mut sum = CompensatedSum::default();
    let mut term = 1.0;
    let mut quiet = 0;
    for k in 0..SERIES_CAP {
        sum.add(term);
        if term.abs() <= SERIES_REL_TOL * sum.value().abs() || term == 0.0 {
            quiet += 1;
            if quiet >= SERIES_QUIET_TERMS {
                let v = sum.value();
                return finite(v, || format!("M({}, {}, {z}) overflowed", p.a, p.b));
            }
        } else {
            quiet = 0;
        }
        let kf = k as f64;
        term *= (p.a + kf) / ((p.b + kf) * (kf + 1.0)) * z;
    }
    Err(Error::Numeric(format!(
        "M({}, {}, {z}) series did not converge in {SERIES_CAP} terms (partial sum {})",
        p.a,
        p.b,
        sum.value()
    )))
}

/// Large-`z` expansion `Γ(b)/Γ(a) eᶻ z^{a−b} Σ (b−a)_k (1−a)_k / (k! zᵏ)`.
/// Returns `None` when the neglected recessive part or the truncation error
/// would exceed working precision.
fn kummer_m_asymptotic(p: HypergeomParams, z: f64) -> Option<f64> {
    let (a, b) = (p.a, p.b);
    // Recessive part relative to the dominant one: Γ(a)/Γ(b−a) z^{b−2a} e^{−z}.
    let log_ratio = libm::lgamma(a) - libm::lgamma(b - a) + (b - 2.0 * a) * z.ln() - z;
    if log_ratio > (1e-14f64).ln() {
        return None;
    }
    let series = asymptotic_sum(b - a, 1.0 - a, z)?;
    let (lg_b, sign_b) = libm::lgamma_r(b);
    let (lg_a, sign_a) = libm::lgamma_r(a);
    let log_mag = lg_b - lg_a + z + (a - b) * z.ln();
    let v = (sign_b * sign_a) as f64 * log_mag.exp() * series;
    v.is_finite().then_some(v)
}

/// `Σ (p)_k (q)_k / k! · xᵏ` with `x = 1/z` (or `−1/z` via the sign of `z`),
/// truncated at the smallest term. `None` if the smallest term is not
/// negligible.
fn asymptotic_sum(p: f64, q: f64, z: f64) -> Option<f64> {
    let x = 1.0 / z;
    let mut sum = CompensatedSum::default();
    let mut term = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 0..400 {
        if term.abs() > prev {
            break;
        }
        sum.add(term);
        if term == 0.0 || term.abs() <= SERIES_REL_TOL * sum.value().abs() {
            return Some(sum.value());
        }
        prev = term.abs();
        let kf = k as f64;
        term *= (p + kf) * (q + kf) / (kf + 1.0) * x;
    }
    (prev <= 1e-15 * sum.value().abs()).then(|| sum.value())
}

/// `d/dz M(a, b, z) = (a/b) M(a+1, b+1, z)`.
pub fn kummer_m_derivative(p: HypergeomParams, z: f64) -> Result<f64> {
    if p.a == 0.0 {
        return Ok(0.0);
    }
    Ok(p.a / p.b * kummer_m(HypergeomParams::new(p.a + 1.0, p.b + 1.0), z)?)
}

/// Tricomi's function `U(a, b, z)` for `z > 0`.
pub fn tricomi_u(p: HypergeomParams, z: f64) -> Result<f64> {
    Ok(tricomi_u_with_derivative(p, z)?.0)
}

/// `(U(a, b, z), ∂_z U(a, b, z))` for `z > 0`.
pub fn tricomi_u_with_derivative(p: HypergeomParams, z: f64) -> Result<(f64, f64)> {
    ensure(z > 0.0 && z.is_finite(), || format!("U(a, b, z) needs z > 0, got {z}"))?;
    ensure(p.a.is_finite() && p.b.is_finite(), || "non-finite parameters".into())?;
    let (a, b) = (p.a, p.b);

    if is_nonpositive_integer(a) {
        return u_polynomial(a, b, z);
    }
    if is_nonpositive_integer(a - b + 1.0) {
        // Kummer's transformation U(a, b, z) = z^{1−b} U(a−b+1, 2−b, z).
        let (v, dv) = u_polynomial(a - b + 1.0, 2.0 - b, z)?;
        let w = z.powf(1.0 - b);
        return Ok((w * v, (1.0 - b) * w / z * v + w * dv));
    }
    if z >= ASYMPTOTIC_Z {
        if let Some(pair) = u_asymptotic_pair(a, b, z) {
            return Ok(pair);
        }
    }
    let near_integer_b = (b - b.round()).abs() < 1e-3;
    if z <= CONNECTION_Z && !near_integer_b {
        return u_connection(a, b, z);
    }
    u_continuation(a, b, z)
}

/// `U(−m, b, z) = (−1)^m (b)_m M(−m, b, z)` and its derivative.
fn u_polynomial(a: f64, b: f64, z: f64) -> Result<(f64, f64)> {
    let m = (-a).round() as usize;
    let scale = if m % 2 == 0 { 1.0 } else { -1.0 } * pochhammer(b, m);
    let value = scale * m_polynomial(a, b, z);
    let deriv = if m == 0 { 0.0 } else { scale * a / b * m_polynomial(a + 1.0, b + 1.0, z) };
    Ok((value, deriv))
}

/// Terminating Kummer series for `a = −m`; valid for any `b`, including the
/// non-positive integers where `M` itself is undefined but `(b)_m M` is not.
fn m_polynomial(a: f64, b: f64, z: f64) -> f64 {
    let m = (-a).round() as usize;
    let mut sum = CompensatedSum::default();
    let mut term = 1.0;
    for k in 0..=m {
        sum.add(term);
        let kf = k as f64;
        term *= (a + kf) / ((b + kf) * (kf + 1.0)) * z;
    }
    sum.value()
}

/// `U ~ z^{−a} Σ (a)_k (a−b+1)_k / k! (−z)^{−k}`, with the derivative from
/// `U' = −a U(a+1, b+1, z)`.
fn u_asymptotic_pair(a: f64, b: f64, z: f64) -> Option<(f64, f64)> {
    let v = z.powf(-a) * asymptotic_sum(a, a - b + 1.0, -z)?;
    let dv = if a == 0.0 {
        0.0
    } else {
        -a * z.powf(-a - 1.0) * asymptotic_sum(a + 1.0, a - b + 1.0, -z)?
    };
    Some((v, dv))
}

/// `U = Γ(1−b)/Γ(a−b+1) M(a,b,z) + Γ(b−1)/Γ(a) z^{1−b} M(a−b+1, 2−b, z)`.
fn u_connection(a: f64, b: f64, z: f64) -> Result<(f64, f64)> {
    let c1 = libm::tgamma(1.0 - b) * recip_gamma(a - b + 1.0);
    let c2 = libm::tgamma(b - 1.0) * recip_gamma(a);
    let p1 = HypergeomParams::new(a, b);
    let p2 = HypergeomParams::new(a - b + 1.0, 2.0 - b);
    let w = z.powf(1.0 - b);
    let m2 = kummer_m(p2, z)?;
    let value = c1 * kummer_m(p1, z)? + c2 * w * m2;
    let deriv = c1 * kummer_m_derivative(p1, z)?
        + c2 * ((1.0 - b) * w / z * m2 + w * kummer_m_derivative(p2, z)?);
    finite(value, || format!("U({a}, {b}, {z}) connection formula overflowed"))?;
    Ok((value, deriv))
}

/// Continue `(U, U')` from an asymptotic anchor down to `z` with local
/// Taylor expansions of the confluent ODE.
fn u_continuation(a: f64, b: f64, z: f64) -> Result<(f64, f64)> {
    let mut anchor = ASYMPTOTIC_Z.max(z);
    let (mut g, mut dg) = loop {
        if let Some(pair) = u_asymptotic_pair(a, b, anchor) {
            break pair;
        }
        anchor *= 2.0;
        if anchor > 1e6 {
            return Err(Error::Numeric(format!(
                "U({a}, {b}, ·): asymptotic series never reached working precision"
            )));
        }
    };
    let mut zc = anchor;
    while zc > z {
        let next = z.max(0.5 * zc);
        (g, dg) = taylor_step(a, b, zc, g, dg, next - zc)?;
        zc = next;
    }
    finite(g, || format!("U({a}, {b}, {z}) continuation overflowed"))?;
    Ok((g, dg))
}

/// One Taylor step of `z g'' + (b − z) g' − a g = 0` from `z0` by `w`
/// (requires `|w| < z0`). The coefficients obey
/// `c_{k+2} = [(k+a) c_k − (k+1)(k+b−z0) c_{k+1}] / (z0 (k+2)(k+1))`.
fn taylor_step(a: f64, b: f64, z0: f64, g: f64, dg: f64, w: f64) -> Result<(f64, f64)> {
    debug_assert!(w.abs() < z0);
    if w == 0.0 {
        return Ok((g, dg));
    }
    // d_k = c_k w^k
    let (mut d0, mut d1) = (g, dg * w);
    let mut value = CompensatedSum::default();
    let mut deriv = CompensatedSum::default();
    value.add(d0);
    value.add(d1);
    deriv.add(d1);
    let mut quiet = 0;
    for k in 0..2000 {
        let kf = k as f64;
        let d2 = ((kf + a) * d0 * w * w - (kf + 1.0) * (kf + b - z0) * d1 * w) / (z0 * (kf + 2.0) * (kf + 1.0));
        value.add(d2);
        deriv.add((kf + 2.0) * d2);
        let scale = value.value().abs().max(deriv.value().abs()).max(f64::MIN_POSITIVE);
        if d2.abs() <= SERIES_REL_TOL * scale {
            quiet += 1;
            if quiet >= 4 {
                return Ok((value.value(), deriv.value() / w));
            }
        } else {
            quiet = 0;
        }
        d0 = d1;
        d1 = d2;
    }
    Err(Error::Numeric(format!("Taylor continuation of U({a}, {b}, ·) did not converge at z0={z0}")))
}

fn finite(v: f64, msg: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(msg()))
    }
}

/// An interval on which a confluent function changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroBracket {
    pub lo: f64,
    pub hi: f64,
    pub function: HypergeomFn,
}

/// Expand geometrically (factor 2) from `z = b` until the function takes the
/// inner sign at `lo` and the outer sign at `hi`.
pub fn bracket_zero(function: HypergeomFn, p: HypergeomParams) -> Result<ZeroBracket> {
    p.check_zero_regime()?;
    let inner = function.inner_sign();
    let is_inner = |z: f64| -> Result<bool> { Ok(function.eval(p, z)? * inner > 0.0) };
    const CAP: i32 = 60;
    let mut z = p.b;
    if is_inner(z)? {
        for _ in 0..CAP {
            let next = 2.0 * z;
            if !is_inner(next)? {
                return Ok(ZeroBracket { lo: z, hi: next, function });
            }
            z = next;
        }
    } else {
        for _ in 0..CAP {
            let next = 0.5 * z;
            if is_inner(next)? {
                return Ok(ZeroBracket { lo: next, hi: z, function });
            }
            z = next;
        }
    }
    Err(Error::Bracket(format!(
        "{function:?}({}, {}, ·): no sign change within 2^±{CAP}·b",
        p.a, p.b
    )))
}

/// The unique positive zero of `M(a, b, ·)` or `U(a, b, ·)` for
/// `a ∈ [−1, 0)`, `b ≥ 1`, bisected to relative width `tol`.
pub fn unique_positive_zero(function: HypergeomFn, p: HypergeomParams, tol: f64) -> Result<f64> {
    ensure(tol > 0.0, || format!("tolerance must be positive, got {tol}"))?;
    let ZeroBracket { mut lo, mut hi, .. } = bracket_zero(function, p)?;
    let inner = function.inner_sign();
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = function.eval(p, mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v * inner > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Number of sign changes of `function` over `samples` equispaced points in
/// `(0, z_max]`; a spot check of zero uniqueness.
pub fn count_sign_changes(function: HypergeomFn, p: HypergeomParams, z_max: f64, samples: usize) -> Result<usize> {
    let mut changes = 0;
    let mut prev: Option<f64> = None;
    for i in 1..=samples {
        let v = function.eval(p, z_max * i as f64 / samples as f64)?;
        if v == 0.0 {
            continue;
        }
        if let Some(pv) = prev {
            if pv * v < 0.0 {
                changes += 1;
            }
        }
        prev = Some(v);
    }
    Ok(changes)
}

fn check_profile_args(alpha: f64, n: usize) -> Result<()> {
    ensure(alpha > 0.0 && alpha <= 2.0, || format!("alpha must lie in (0, 2], got {alpha}"))?;
    ensure(n >= 3, || format!("dimension n must be >= 3, got {n}"))
}

/// Zero of `s ↦ M(−α/2, n/2, s²/4)`.
pub fn scaled_zero_m(alpha: f64, n: usize) -> Result<f64> {
    check_profile_args(alpha, n)?;
    let z = unique_positive_zero(HypergeomFn::KummerM, HypergeomParams::for_profile(alpha, n), ZERO_SCALED_TOL)?;
    Ok(2.0 * z.sqrt())
}

/// Zero of `s ↦ U(−α/2, n/2, ε s²/4)`; equals `z̄_U(α, n)/√ε`.
pub fn scaled_zero_u(alpha: f64, n: usize, eps: f64) -> Result<f64> {
    check_profile_args(alpha, n)?;
    ensure(eps > 0.0 && eps <= 1.0, || format!("eps must lie in (0, 1], got {eps}"))?;
    let z = unique_positive_zero(HypergeomFn::TricomiU, HypergeomParams::for_profile(alpha, n), ZERO_SCALED_TOL)?;
    Ok(2.0 * (z / eps).sqrt())
}

/// Bessel `J₀` by its power series (accurate for `|x| ≲ 10`).
pub fn bessel_j0(x: f64) -> f64 {
    bessel_series(x, 0)
}

/// Bessel `J₁` by its power series.
pub fn bessel_j1(x: f64) -> f64 {
    bessel_series(x, 1)
}

fn bessel_series(x: f64, order: u32) -> f64 {
    let q = -0.25 * x * x;
    let mut term = (0.5 * x).powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = CompensatedSum::default();
    for k in 0..200u32 {
        sum.add(term);
        if term.abs() < 1e-18 * sum.value().abs() && k > 2 {
            break;
        }
        term *= q / (f64::from(k + 1) * f64::from(k + 1 + order));
    }
    sum.value()
}

/// First positive zero `j₀,₁` of `J₀`, by Newton from 2.4.
pub fn bessel_j0_first_zero() -> f64 {
    let mut x = 2.4;
    for _ in 0..50 {
        let step = bessel_j0(x) / -bessel_j1(x);
        x -= step;
        if step.abs() < 1e-16 * x {
            break;
        }
    }
    x
}
