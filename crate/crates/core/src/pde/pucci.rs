use super::{is_symmetric, TransmissionSpec};
use crate::error::{ensure, Error, Result};
use crate::geometry::GridField;
use nalgebra::DMatrix;

fn eigenvalues(m: &DMatrix<f64>, lambda: f64, big_lambda: f64) -> Result<Vec<f64>> {
    ensure(0.0 < lambda && lambda <= big_lambda, || {
        format!("need 0 < lambda <= Lambda, got {lambda}, {big_lambda}")
    })?;
    ensure(is_symmetric(m), || "Pucci operators need a symmetric matrix".into())?;
    Ok(m.clone().symmetric_eigen().eigenvalues.iter().copied().collect())
}

/// `M⁻(M) = λ Σ_{eᵢ>0} eᵢ + Λ Σ_{eᵢ<0} eᵢ = inf tr(AM)` over `λI ≤ A ≤ ΛI`.
pub fn pucci_minus(m: &DMatrix<f64>, lambda: f64, big_lambda: f64) -> Result<f64> {
    let e = eigenvalues(m, lambda, big_lambda)?;
    Ok(e.iter().map(|&v| if v > 0.0 { lambda * v } else { big_lambda * v }).sum())
}

/// `M⁺(M) = Λ Σ_{eᵢ>0} eᵢ + λ Σ_{eᵢ<0} eᵢ = sup tr(AM)` over `λI ≤ A ≤ ΛI`.
pub fn pucci_plus(m: &DMatrix<f64>, lambda: f64, big_lambda: f64) -> Result<f64> {
    let e = eigenvalues(m, lambda, big_lambda)?;
    Ok(e.iter().map(|&v| if v > 0.0 { big_lambda * v } else { lambda * v }).sum())
}

/// Largest violation of `f̲ + M⁻(D²v) ≤ v_t ≤ M⁺(D²v) + f̄` over interior
/// nodes at distance `≥ 2h` from `{x_n = 0}`, with `λ = a̲/max(a±)`,
/// `Λ = ā/min(a±)`, `f̄ = max(f±/a±)`, `f̲ = min(f±/a±)`. Uses the backward
/// time difference and centered second differences.
pub fn pucci_sandwich_check(field: &GridField, spec: &TransmissionSpec) -> Result<f64> {
    let n = field.dim();
    ensure(n == spec.dim(), || format!("field has dimension {n}, spec has {}", spec.dim()))?;
    let (lo, hi) = spec.ellipticity();
    let (ap, am) = (spec.a_plus, spec.a_minus);
    let lambda = lo / ap.max(am);
    let big_lambda = hi / ap.min(am);
    let steps = field.steps().to_vec();
    let shape = field.shape().to_vec();
    let m = field.spatial_len();
    let mut strides = vec![1usize; n];
    for d in (0..n - 1).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }
    let band = 2.0 * steps[n - 1];
    let v = field.values();
    let mut worst = f64::NEG_INFINITY;
    let mut hessian = DMatrix::zeros(n, n);
    for it in 1..field.nt() {
        let t = field.time(it);
        let level = &v[it * m..(it + 1) * m];
        let prev = &v[(it - 1) * m..it * m];
        for flat in 0..m {
            let idx = field.multi_index(flat);
            if idx.iter().zip(&shape).any(|(&i, &s)| i == 0 || i + 1 == s) {
                continue;
            }
            let x = field.coords(flat);
            if x[n - 1].abs() < band {
                continue;
            }
            for i in 0..n {
                let (si, hi_) = (strides[i], steps[i]);
                hessian[(i, i)] = (level[flat + si] - 2.0 * level[flat] + level[flat - si]) / (hi_ * hi_);
                for j in i + 1..n {
                    let sj = strides[j];
                    let d = (level[flat + si + sj] - level[flat + si - sj] - level[flat - si + sj]
                        + level[flat - si - sj])
                        / (4.0 * hi_ * steps[j]);
                    hessian[(i, j)] = d;
                    hessian[(j, i)] = d;
                }
            }
            let vt = (level[flat] - prev[flat]) / field.dt();
            let (fp, fm) = (spec.rhs(&x, t, true) / ap, spec.rhs(&x, t, false) / am);
            let lower = fp.min(fm) + pucci_minus(&hessian, lambda, big_lambda)?;
            let upper = fp.max(fm) + pucci_plus(&hessian, lambda, big_lambda)?;
            worst = worst.max(lower - vt).max(vt - upper);
        }
    }
    if worst == f64::NEG_INFINITY {
        return Err(Error::Empty("no interior nodes outside the interface band".into()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{solve_linear_transmission, Resolution, SpaceTimeBox};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    /// `inf`/`sup` of `tr(AM)` over random `A = Q diag(μ) Qᵀ`, `μ ∈ [λ, Λ]`.
    fn sampled_extremes(m: &DMatrix<f64>, lambda: f64, big_lambda: f64) -> (f64, f64) {
        let n = m.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..4000 {
            let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let q = g.qr().q();
            let mu: Vec<f64> =
                (0..n).map(|_| if rng.gen_bool(0.5) { lambda } else { big_lambda }).collect();
            let a = &q * diag(&mu) * q.transpose();
            let v = (a * m).trace();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    #[test]
    fn pucci_examples() {
        let i3 = DMatrix::identity(3, 3);
        assert_eq!(pucci_minus(&i3, 1.0, 2.0).unwrap(), 3.0);
        assert_eq!(pucci_plus(&i3, 1.0, 2.0).unwrap(), 6.0);
        assert_eq!(pucci_minus(&DMatrix::zeros(2, 2), 1.0, 2.0).unwrap(), 0.0);
        let d = diag(&[1.0, -1.0]);
        assert_relative_eq!(pucci_minus(&d, 1.0, 2.0).unwrap(), -1.0, epsilon = 1e-14);
        assert_relative_eq!(pucci_plus(&d, 1.0, 2.0).unwrap(), 1.0, epsilon = 1e-14);
        let (lo, hi) = sampled_extremes(&d, 1.0, 2.0);
        assert!(lo >= -1.0 - 1e-12 && lo < -0.99, "{lo}");
        assert!(hi <= 1.0 + 1e-12 && hi > 0.99, "{hi}");
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(pucci_minus(&asym, 1.0, 2.0), Err(Error::Argument(_))));
        assert!(pucci_plus(&i3, 2.0, 1.0).is_err());
    }

    fn solved(cells: usize, corrupt: bool) -> (GridField, TransmissionSpec) {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.4]);
        let spec = TransmissionSpec::constant(1.0, 0.4, a, 0.5, -0.2).unwrap();
        let g = |x: &[f64], t: f64| (1.3 * x[0] + 0.4 * t).sin() + x[1] * (1.0 + 0.5 * x[0]);
        let sol = solve_linear_transmission(
            &spec,
            &SpaceTimeBox::unit_cylinder_box(2),
            &g,
            &Resolution::uniform(2, cells, cells),
            2.0 * 2.0 / cells as f64,
        )
        .unwrap();
        let mut field = sol.field;
        if corrupt {
            field = GridField::from_fn(
                field.origin().to_vec(),
                field.steps().to_vec(),
                field.shape().to_vec(),
                field.t0(),
                field.dt(),
                field.nt(),
                |x, t| {
                    let i: Vec<usize> =
                        (0..2).map(|d| ((x[d] - field.origin()[d]) / field.steps()[d]).round() as usize).collect();
                    let it = ((t - field.t0()) / field.dt()).round() as usize;
                    field.get(&i, it) + 5.0 * x[1] * x[1] * x[1].signum() * -1.0
                },
            )
            .unwrap();
        }
        (field, spec)
    }

    #[test]
    fn sandwich_holds_for_solved_field() {
        let (field, spec) = solved(32, false);
        assert!(pucci_sandwich_check(&field, &spec).unwrap() <= 1e-6);
    }

    #[test]
    fn sandwich_flags_corruption() {
        let (field, spec) = solved(32, true);
        assert!(pucci_sandwich_check(&field, &spec).unwrap() > 1.0);
    }

    proptest! {
        #[test]
        fn minus_below_plus(
            e in proptest::collection::vec(-10.0..10.0f64, 3),
            lambda in 0.1..2.0f64,
            ratio in 1.0..5.0f64,
        ) {
            let m = diag(&e);
            prop_assert!(pucci_minus(&m, lambda, lambda * ratio).unwrap() <= pucci_plus(&m, lambda, lambda * ratio).unwrap());
        }
    }
}
