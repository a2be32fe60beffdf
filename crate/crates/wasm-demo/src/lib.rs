//! Browser bindings for the free transmission toolkit.
//!
//! Each export returns a flat `Float64Array`; the plain functions underneath
//! carry the logic and are usable natively.

use freetrans::barriers::{barrier_eval, rate_threshold, BarrierSpec, BARRIER_RADIUS, DRIFT};
use freetrans::selfsim::{eps0, solve_alpha, RadialProfile, SelfSimilarProfile};
use freetrans::specfun::{HypergeomFn, HypergeomParams};
use freetrans::Result;
use wasm_bindgen::prelude::*;

const TOL: f64 = 1e-12;

/// `[alpha, s_eps, residual, eps0]` for dimension `n` and ratio `eps`.
pub fn matching(n: usize, eps: f64) -> Result<Vec<f64>> {
    let m = solve_alpha(n, eps, TOL)?;
    Ok(vec![m.alpha, m.s_eps, m.residual, eps0(n)?])
}

/// Interleaved `(s, f(s))` pairs on `[0, s_max]`.
pub fn profile_curve(n: usize, eps: f64, s_max: f64, samples: usize) -> Result<Vec<f64>> {
    let profile = SelfSimilarProfile::solve(n, eps, TOL)?;
    let samples = samples.max(2);
    let mut out = Vec::with_capacity(2 * samples);
    for i in 0..samples {
        let s = s_max * i as f64 / (samples - 1) as f64;
        out.push(s);
        out.push(profile.value(s)?);
    }
    Ok(out)
}

/// `[alpha, s_eps]` of the profile for marking the interface on a plot.
pub fn profile_interface(n: usize, eps: f64) -> Result<Vec<f64>> {
    let profile = SelfSimilarProfile::solve(n, eps, TOL)?;
    Ok(vec![profile.alpha(), profile.s_eps()])
}

/// `M(a, b, z)` or `U(a, b, z)` by name.
pub fn confluent(name: &str, a: f64, b: f64, z: f64) -> Result<f64> {
    name.parse::<HypergeomFn>()?.eval(HypergeomParams::new(a, b), z)
}

/// Interleaved `(x_n, w)` pairs along the cylinder axis at time `t`, with the
/// damping rate set to `rate_factor` times its lower bound.
#[allow(clippy::too_many_arguments)]
pub fn barrier_axis(
    n: usize,
    a_plus: f64,
    a_minus: f64,
    delta: f64,
    c0: f64,
    rate_factor: f64,
    t: f64,
    samples: usize,
) -> Result<Vec<f64>> {
    let k = rate_threshold(n, a_plus, a_minus)? * rate_factor;
    let spec = BarrierSpec::new(n, delta, c0, k, a_plus, a_minus)?;
    let samples = samples.max(2);
    let mut x = vec![0.0; n];
    let mut out = Vec::with_capacity(2 * samples);
    for i in 0..samples {
        let y = BARRIER_RADIUS * (2.0 * i as f64 / (samples - 1) as f64 - 1.0);
        x[n - 1] = y - DRIFT * t;
        out.push(x[n - 1]);
        out.push(barrier_eval(&spec, &x, t)?);
    }
    Ok(out)
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = matching)]
pub fn matching_js(n: usize, eps: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(matching(n, eps))
}

#[wasm_bindgen(js_name = profileCurve)]
pub fn profile_curve_js(n: usize, eps: f64, s_max: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    js(profile_curve(n, eps, s_max, samples))
}

#[wasm_bindgen(js_name = profileInterface)]
pub fn profile_interface_js(n: usize, eps: f64) -> std::result::Result<Vec<f64>, JsError> {
    js(profile_interface(n, eps))
}

#[wasm_bindgen(js_name = confluent)]
pub fn confluent_js(name: &str, a: f64, b: f64, z: f64) -> std::result::Result<f64, JsError> {
    js(confluent(name, a, b, z))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = barrierAxis)]
pub fn barrier_axis_js(
    n: usize,
    a_plus: f64,
    a_minus: f64,
    delta: f64,
    c0: f64,
    rate_factor: f64,
    t: f64,
    samples: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(barrier_axis(n, a_plus, a_minus, delta, c0, rate_factor, t, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_reproduces_reference_root() {
        let v = matching(3, 0.1).unwrap();
        assert!((v[0] - 0.69544026).abs() < 1e-7);
        assert!((v[1] - 3.28977714).abs() < 1e-7);
        assert!((v[3] - 0.22163811157831863).abs() < 1e-12);
    }

    #[test]
    fn profile_changes_sign_at_interface() {
        let iface = profile_interface(3, 0.1).unwrap();
        let curve = profile_curve(3, 0.1, 6.0, 121).unwrap();
        assert_eq!(curve.len(), 242);
        for pair in curve.chunks(2) {
            let (s, f) = (pair[0], pair[1]);
            if s < iface[1] - 1e-9 {
                assert!(f > 0.0, "f({s}) = {f}");
            } else if s > iface[1] + 1e-9 {
                assert!(f < 0.0, "f({s}) = {f}");
            }
        }
    }

    #[test]
    fn confluent_polynomial_case() {
        assert!((confluent("M", -1.0, 2.0, 3.0).unwrap() + 0.5).abs() < 1e-14);
        assert!(confluent("Z", 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn barrier_axis_stays_below_plane_shift() {
        let v = barrier_axis(3, 1.0, 0.5, 0.01, 0.5, 2.0, -0.4, 41).unwrap();
        assert_eq!(v.len(), 82);
        for pair in v.chunks(2) {
            assert!(pair[1] <= pair[0] - 0.01 + 1e-15);
        }
        assert!(barrier_axis(3, 1.0, 0.5, 0.01, 0.5, 0.5, -0.4, 41).is_err());
    }
}
