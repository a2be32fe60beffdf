//! Hodograph change of variables `(x', x_n, t) ↦ (x', u, t)`, which flattens
//! the free boundary to `{y_n = 0}`, and checks of the transformed equations.

use crate::error::{ensure, Error, Result};
use crate::geometry::{GridField, ParabolicCylinder};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

/// A monotone patch of a solution together with its hodograph transform.
#[derive(Debug, Clone, PartialEq)]
pub struct HodographPatch {
    /// `u` restricted to the box around the window.
    pub source: GridField,
    /// Lower bound on `u_n` verified on the source.
    pub lambda: f64,
    /// `h(y', y_n, t)` on a uniform image grid with `y_n = 0` as a node
    /// whenever the attained range straddles zero.
    pub h: GridField,
}

fn box_indices(field: &GridField, window: &ParabolicCylinder) -> Result<(Vec<(usize, usize)>, (usize, usize))> {
    let n = field.dim();
    ensure(window.dim() == n, || format!("window is {}-dimensional, field is {n}-dimensional", window.dim()))?;
    let rho = window.radius();
    let mut ranges = Vec::with_capacity(n);
    for d in 0..n {
        let c = window.center_x()[d];
        let ks: Vec<usize> =
            (0..field.shape()[d]).filter(|&k| (field.axis_coord(d, k) - c).abs() <= rho * (1.0 + 1e-12)).collect();
        ensure(ks.len() >= 3, || format!("window covers {} nodes along axis {d}; need at least 3", ks.len()))?;
        ranges.push((ks[0], ks[ks.len() - 1]));
    }
    let tol = 1e-9 * field.dt().max(f64::MIN_POSITIVE);
    let its: Vec<usize> = (0..field.nt())
        .filter(|&it| {
            let t = field.time(it);
            t >= window.center_t() - rho * rho - tol && t <= window.center_t() + tol
        })
        .collect();
    ensure(!its.is_empty(), || "window contains no time level".into())?;
    Ok((ranges, (its[0], its[its.len() - 1])))
}

fn sub_field(field: &GridField, ranges: &[(usize, usize)], times: (usize, usize)) -> Result<GridField> {
    let n = field.dim();
    let origin: Vec<f64> = (0..n).map(|d| field.axis_coord(d, ranges[d].0)).collect();
    let shape: Vec<usize> = ranges.iter().map(|r| r.1 - r.0 + 1).collect();
    let m: usize = shape.iter().product();
    let nt = times.1 - times.0 + 1;
    let mut values = Vec::with_capacity(m * nt);
    let mut idx = vec![0; n];
    for it in times.0..=times.1 {
        for mut flat in 0..m {
            for d in (0..n).rev() {
                idx[d] = ranges[d].0 + flat % shape[d];
                flat /= shape[d];
            }
            values.push(field.get(&idx, it));
        }
    }
    GridField::new(origin, field.steps().to_vec(), shape, field.time(times.0), field.dt(), nt, values)
}

/// [`forward_transform_with`] with as many image nodes along `y_n` as the
/// source has along `x_n`.
pub fn forward_transform(field: &GridField, window: &ParabolicCylinder, lambda: f64) -> Result<HodographPatch> {
    let (ranges, _) = box_indices(field, window)?;
    let n = field.dim();
    forward_transform_with(field, window, lambda, ranges[n - 1].1 - ranges[n - 1].0 + 1)
}

/// Restrict `field` to the box of half-width `ρ` around the window center
/// (times in `(t₀ − ρ², t₀]`), check `u_n ≥ lambda` by forward differences,
/// and invert each `x_n` column piecewise linearly onto a uniform `y_n` grid
/// of about `image_points` nodes spanning the range attained by every column.
pub fn forward_transform_with(
    field: &GridField,
    window: &ParabolicCylinder,
    lambda: f64,
    image_points: usize,
) -> Result<HodographPatch> {
    ensure(lambda > 0.0, || format!("monotonicity floor must be positive, got {lambda}"))?;
    ensure(image_points >= 3, || format!("need at least 3 image nodes, got {image_points}"))?;
    let (ranges, times) = box_indices(field, window)?;
    let source = sub_field(field, &ranges, times)?;
    let n = source.dim();
    let shape = source.shape().to_vec();
    let len_n = shape[n - 1];
    let hx = source.steps()[n - 1];
    let columns: usize = shape[..n - 1].iter().product::<usize>() * source.nt();
    // column c: time-major, then tangential row-major; contiguous in x_n
    let column = |c: usize| -> &[f64] { &source.values()[c * len_n..(c + 1) * len_n] };

    let mut bad = Vec::new();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for c in 0..columns {
        let u = column(c);
        if u.windows(2).any(|w| (w[1] - w[0]) / hx < lambda) {
            bad.push(column_label(&shape, c));
            continue;
        }
        lo = lo.max(u[0]);
        hi = hi.min(u[len_n - 1]);
    }
    if !bad.is_empty() {
        return Err(Error::Transform { columns: bad });
    }
    ensure(lo < hi, || format!("columns attain no common value range ({lo} > {hi})"))?;
    let k = (hi - lo) / (image_points - 1) as f64;
    let (j_lo, j_hi) = ((lo / k - 1e-9).ceil() as i64, (hi / k + 1e-9).floor() as i64);
    let count = (j_hi - j_lo + 1) as usize;
    ensure(count >= 3, || "image range too small".into())?;
    let ys: Vec<f64> = (0..count).map(|j| ((j_lo + j as i64) as f64 * k).clamp(lo, hi)).collect();
    let x0 = source.origin()[n - 1];

    let mut values = vec![0.0; columns * count];
    values.par_chunks_mut(count).enumerate().for_each(|(c, out)| {
        let u = column(c);
        for (slot, &y) in out.iter_mut().zip(&ys) {
            let i = u.partition_point(|&v| v <= y).clamp(1, len_n - 1) - 1;
            *slot = x0 + hx * (i as f64 + (y - u[i]) / (u[i + 1] - u[i]));
        }
    });
    let mut origin = source.origin().to_vec();
    origin[n - 1] = ys[0];
    let mut steps = source.steps().to_vec();
    steps[n - 1] = k;
    let mut image_shape = shape.clone();
    image_shape[n - 1] = count;
    let h = GridField::new(origin, steps, image_shape, source.t0(), source.dt(), source.nt(), values)?;
    Ok(HodographPatch { source, lambda, h })
}

fn column_label(shape: &[usize], c: usize) -> Vec<usize> {
    let n = shape.len();
    let per_level: usize = shape[..n - 1].iter().product();
    let (it, mut rest) = (c / per_level, c % per_level);
    let mut idx = vec![0; n - 1];
    for d in (0..n - 1).rev() {
        idx[d] = rest % shape[d];
        rest /= shape[d];
    }
    idx.push(it);
    idx
}

/// Value of `field` at level `it` and point `y`, multilinear between nodes;
/// `None` outside the grid.
fn sample(field: &GridField, y: &[f64], it: usize) -> Option<f64> {
    let n = field.dim();
    let mut base = vec![0usize; n];
    let mut frac = vec![0.0; n];
    for d in 0..n {
        let s = (y[d] - field.origin()[d]) / field.steps()[d];
        let last = field.shape()[d] - 1;
        if s < -1e-9 || s > last as f64 + 1e-9 {
            return None;
        }
        let s = s.clamp(0.0, last as f64);
        let i = (s.floor() as usize).min(last.saturating_sub(1));
        base[d] = i;
        frac[d] = if last == 0 { 0.0 } else { s - i as f64 };
    }
    let mut total = 0.0;
    let mut idx = vec![0; n];
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        for d in 0..n {
            let up = corner >> d & 1 == 1;
            let f = frac[d];
            if up && f == 0.0 {
                w = 0.0;
                break;
            }
            idx[d] = base[d] + up as usize;
            w *= if up { f } else { 1.0 - f };
        }
        if w != 0.0 {
            total += w * field.get(&idx, it);
        }
    }
    Some(total)
}

/// Largest `|h(y', u(x), t) − x_n|` over source nodes whose value lies in the image range.
pub fn round_trip_error(patch: &HodographPatch) -> f64 {
    let src = &patch.source;
    let n = src.dim();
    let m = src.spatial_len();
    (0..src.nt())
        .into_par_iter()
        .map(|it| {
            (0..m)
                .filter_map(|flat| {
                    let mut y = src.coords(flat);
                    let xn = y[n - 1];
                    y[n - 1] = src.level(it)[flat];
                    sample(&patch.h, &y, it).map(|v| (v - xn).abs())
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Maximum mismatches in the derivative identities of the transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `|u_t + h_t / h_n|`.
    pub time: f64,
    /// `|∇u + (∇'h, −1) / h_n|`.
    pub gradient: f64,
    /// `|h_n u_n − 1|`.
    pub reciprocal: f64,
    /// Smallest `h_n` seen; positive for a valid transform.
    pub min_hn: f64,
    pub points: usize,
}

/// Compare centered differences of `u` at interior source nodes with centered
/// differences of `h` at the image point `(x', u(x,t), t)`.
pub fn derivative_identity_check(patch: &HodographPatch) -> Result<IdentityResiduals> {
    let src = &patch.source;
    let img = &patch.h;
    let n = src.dim();
    ensure(src.nt() >= 3, || "need at least 3 time levels".into())?;
    let m = src.spatial_len();
    let k = img.steps()[n - 1];
    let dt = src.dt();
    let rows: Vec<Option<(f64, f64, f64, f64)>> = (1..src.nt() - 1)
        .into_par_iter()
        .flat_map_iter(|it| {
            (0..m).map(move |flat| {
                let idx = src.multi_index(flat);
                if (0..n).any(|d| idx[d] == 0 || idx[d] + 1 == src.shape()[d]) {
                    return None;
                }
                let at = |d: usize, off: isize, lvl: usize| {
                    let mut j = idx.clone();
                    j[d] = j[d].wrapping_add_signed(off);
                    src.get(&j, lvl)
                };
                let u = src.get(&idx, it);
                let ut = (src.get(&idx, it + 1) - src.get(&idx, it - 1)) / (2.0 * dt);
                let grad_u: Vec<f64> =
                    (0..n).map(|d| (at(d, 1, it) - at(d, -1, it)) / (2.0 * src.steps()[d])).collect();
                let mut y = src.coords(flat);
                y[n - 1] = u;
                let shifted = |d: usize, delta: f64| {
                    let mut z = y.clone();
                    z[d] += delta;
                    z
                };
                let hn = (sample(img, &shifted(n - 1, k), it)? - sample(img, &shifted(n - 1, -k), it)?) / (2.0 * k);
                let ht = (sample(img, &y, it + 1)? - sample(img, &y, it - 1)?) / (2.0 * dt);
                let mut grad_mismatch: f64 = 0.0;
                for d in 0..n - 1 {
                    let s = img.steps()[d];
                    let hd = (sample(img, &shifted(d, s), it)? - sample(img, &shifted(d, -s), it)?) / (2.0 * s);
                    grad_mismatch = grad_mismatch.max((grad_u[d] + hd / hn).abs());
                }
                grad_mismatch = grad_mismatch.max((grad_u[n - 1] - 1.0 / hn).abs());
                Some(((ut + ht / hn).abs(), grad_mismatch, (hn * grad_u[n - 1] - 1.0).abs(), hn))
            })
        })
        .collect();
    let mut out = IdentityResiduals { time: 0.0, gradient: 0.0, reciprocal: 0.0, min_hn: f64::INFINITY, points: 0 };
    for (t, g, r, hn) in rows.into_iter().flatten() {
        out.time = out.time.max(t);
        out.gradient = out.gradient.max(g);
        out.reciprocal = out.reciprocal.max(r);
        out.min_hn = out.min_hn.min(hn);
        out.points += 1;
    }
    if out.points == 0 {
        return Err(Error::Empty("no interior source node maps inside the image grid".into()));
    }
    Ok(out)
}

/// Coefficients `B(p)` of the transformed equation `a h_t = b_ij(∇h) D_ij h`.
#[derive(Debug, Clone, PartialEq)]
pub struct HodographCoefficients {
    pub p: Vec<f64>,
    pub b: DMatrix<f64>,
}

impl HodographCoefficients {
    /// Smallest and largest eigenvalue of `B`.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = self.b.clone().symmetric_eigen().eigenvalues;
        (eig.min(), eig.max())
    }
}

/// Jacobian of `(x', x_n) ↦ (x', u)` written in terms of `p = ∇h`: identity
/// rows for `x'`, last row `(−p'/p_n, 1/p_n)`.
pub fn transform_jacobian(p: &[f64]) -> Result<DMatrix<f64>> {
    let n = p.len();
    ensure(n >= 1, || "empty gradient".into())?;
    let pn = p[n - 1];
    if pn == 0.0 || !pn.is_finite() {
        return Err(Error::Domain(format!("singular transform: p_n = {pn}")));
    }
    let mut a = DMatrix::identity(n, n);
    for j in 0..n - 1 {
        a[(n - 1, j)] = -p[j] / pn;
    }
    a[(n - 1, n - 1)] = 1.0 / pn;
    Ok(a)
}

/// `B(p)` in closed form: identity on `x'`, `b_in = −p_i/p_n`,
/// `b_nn = (1 + |p'|²)/p_n²`; checked against the Jacobian product to 1e-14.
pub fn coefficient_matrix(p: &[f64]) -> Result<HodographCoefficients> {
    let a = transform_jacobian(p)?;
    let n = p.len();
    let pn = p[n - 1];
    let mut b = DMatrix::identity(n, n);
    for i in 0..n - 1 {
        b[(i, n - 1)] = -p[i] / pn;
        b[(n - 1, i)] = -p[i] / pn;
    }
    b[(n - 1, n - 1)] = (1.0 + p[..n - 1].iter().map(|v| v * v).sum::<f64>()) / (pn * pn);
    let product = &a * a.transpose();
    let scale = b.amax().max(1.0);
    let gap = (&product - &b).amax();
    if gap > 1e-14 * scale {
        return Err(Error::Numeric(format!("closed-form coefficients differ from the Jacobian product by {gap}")));
    }
    Ok(HodographCoefficients { p: p.to_vec(), b })
}

/// Residuals of the transformed two-phase equation on the image grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionResiduals {
    /// `max |a₊ h_t − b_ij(∇h) D_ij h|` over `y_n > 0`.
    pub plus: f64,
    /// Same with `a₋` over `y_n < 0`.
    pub minus: f64,
    /// `max |h_n⁺ − h_n⁻|` on `y_n = 0` from one-sided differences.
    pub interface_jump: f64,
    /// Extreme eigenvalues of `B(∇h)` over the checked nodes.
    pub ellipticity: (f64, f64),
}

/// Evaluate the transformed equations by centered differences at nodes at
/// least two cells inside the patch, never differencing across `y_n = 0`.
pub fn transmission_residual(h: &GridField, a_plus: f64, a_minus: f64) -> Result<TransmissionResiduals> {
    ensure(a_plus > 0.0 && a_minus > 0.0, || "phase coefficients must be positive".into())?;
    let n = h.dim();
    let shape = h.shape();
    let k = h.steps()[n - 1];
    let j0f = -h.origin()[n - 1] / k;
    let j0 = j0f.round();
    if (j0f - j0).abs() > 1e-6 || j0 < 2.0 || j0 > (shape[n - 1] - 3) as f64 {
        return Err(Error::Argument("interface y_n = 0 is not an interior image node".into()));
    }
    let j0 = j0 as usize;
    ensure(h.nt() >= 3, || "need at least 3 time levels".into())?;
    ensure(shape[..n - 1].iter().all(|&s| s >= 5), || "need at least 5 nodes along each tangential axis".into())?;
    let m = h.spatial_len();
    let dt = h.dt();
    type Row = (f64, f64, f64, f64, f64);
    let rows: Vec<Row> = (1..h.nt() - 1)
        .into_par_iter()
        .flat_map_iter(|it| {
            (0..m).filter_map(move |flat| {
                let idx = h.multi_index(flat);
                if (0..n - 1).any(|d| idx[d] < 2 || idx[d] + 2 >= shape[d]) {
                    return None;
                }
                let j = idx[n - 1];
                let get = |offsets: &[(usize, isize)]| {
                    let mut q = idx.clone();
                    for &(d, o) in offsets {
                        q[d] = q[d].wrapping_add_signed(o);
                    }
                    h.get(&q, it)
                };
                if j == j0 {
                    let up = (-3.0 * get(&[]) + 4.0 * get(&[(n - 1, 1)]) - get(&[(n - 1, 2)])) / (2.0 * k);
                    let down = (3.0 * get(&[]) - 4.0 * get(&[(n - 1, -1)]) + get(&[(n - 1, -2)])) / (2.0 * k);
                    return Some((0.0, 0.0, (up - down).abs(), f64::INFINITY, 0.0));
                }
                if j == 0 || j + 1 == shape[n - 1] {
                    return None;
                }
                let step = |d: usize| h.steps()[d];
                let p: Vec<f64> =
                    (0..n).map(|d| (get(&[(d, 1)]) - get(&[(d, -1)])) / (2.0 * step(d))).collect();
                let coeffs = coefficient_matrix(&p).ok()?;
                let mut diffusion = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        let dab = if a == b {
                            (get(&[(a, 1)]) - 2.0 * get(&[]) + get(&[(a, -1)])) / (step(a) * step(a))
                        } else {
                            (get(&[(a, 1), (b, 1)]) - get(&[(a, 1), (b, -1)]) - get(&[(a, -1), (b, 1)])
                                + get(&[(a, -1), (b, -1)]))
                                / (4.0 * step(a) * step(b))
                        };
                        diffusion += coeffs.b[(a, b)] * dab;
                    }
                }
                let ht = (h.get(&idx, it + 1) - h.get(&idx, it - 1)) / (2.0 * dt);
                let (lo, hi) = coeffs.eigen_range();
                if j > j0 {
                    Some(((a_plus * ht - diffusion).abs(), 0.0, 0.0, lo, hi))
                } else {
                    Some((0.0, (a_minus * ht - diffusion).abs(), 0.0, lo, hi))
                }
            })
        })
        .collect();
    ensure(!rows.is_empty(), || "patch has no interior nodes".into())?;
    let fold = rows.iter().fold((0.0f64, 0.0f64, 0.0f64, f64::INFINITY, 0.0f64), |acc, r| {
        (acc.0.max(r.0), acc.1.max(r.1), acc.2.max(r.2), acc.3.min(r.3), acc.4.max(r.4))
    });
    Ok(TransmissionResiduals { plus: fold.0, minus: fold.1, interface_jump: fold.2, ellipticity: (fold.3, fold.4) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn field2(cells: usize, steps: usize, f: impl Fn(&[f64], f64) -> f64 + Sync) -> GridField {
        let h = 2.0 / cells as f64;
        GridField::from_fn(vec![-1.0, -1.0], vec![h, h], vec![cells + 1, cells + 1], -1.0, 1.0 / steps as f64, steps + 1, f)
            .unwrap()
    }

    fn window() -> ParabolicCylinder {
        ParabolicCylinder::new(vec![0.0, 0.0], 0.0, 0.5).unwrap()
    }

    #[test]
    fn identity_and_linear_transforms() {
        let patch = forward_transform(&field2(40, 40, |x, _| x[1]), &window(), 0.25).unwrap();
        let m = patch.h.spatial_len();
        for it in 0..patch.h.nt() {
            for flat in 0..m {
                let y = patch.h.coords(flat);
                assert_abs_diff_eq!(patch.h.level(it)[flat], y[1], epsilon = 1e-12);
            }
        }
        let res = derivative_identity_check(&patch).unwrap();
        assert!(res.time < 1e-12 && res.gradient < 1e-12 && res.reciprocal < 1e-12, "{res:?}");
        let tr = transmission_residual(&patch.h, 1.0, 0.3).unwrap();
        assert!(tr.plus < 1e-9 && tr.minus < 1e-9 && tr.interface_jump < 1e-12, "{tr:?}");

        let patch = forward_transform(&field2(40, 40, |x, _| 2.0 * x[1]), &window(), 0.25).unwrap();
        for flat in 0..patch.h.spatial_len() {
            let y = patch.h.coords(flat);
            assert_abs_diff_eq!(patch.h.level(0)[flat], y[1] / 2.0, epsilon = 1e-12);
        }
        assert!(round_trip_error(&patch) < 1e-12);
    }

    #[test]
    fn drifting_plane_has_exact_time_derivative() {
        let patch = forward_transform(&field2(40, 40, |x, t| x[1] + 0.01 * t), &window(), 0.25).unwrap();
        let res = derivative_identity_check(&patch).unwrap();
        assert!(res.time < 1e-10, "{res:?}");
        let some = patch.h.level(1)[patch.h.spatial_len() / 2];
        let y = patch.h.coords(patch.h.spatial_len() / 2);
        assert_abs_diff_eq!(some, y[1] - 0.01 * patch.h.time(1), epsilon = 1e-12);
    }

    #[test]
    fn nonlinear_column_round_trip() {
        for cells in [40, 80] {
            let field = field2(cells, 8, |x, _| x[1] + 0.1 * x[1].sin());
            let patch = forward_transform(&field, &window(), 0.25).unwrap();
            let h = 2.0 / cells as f64;
            assert!(round_trip_error(&patch) <= h * h, "{cells}");
        }
    }

    #[test]
    fn monotonicity_failure_is_reported() {
        let err = forward_transform(&field2(40, 4, |x, _| x[1] * x[1]), &window(), 0.25);
        match err {
            Err(Error::Transform { columns }) => assert!(!columns.is_empty()),
            other => panic!("expected transform error, got {other:?}"),
        }
    }

    #[test]
    fn coefficient_examples() {
        let id = coefficient_matrix(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(id.b, DMatrix::identity(3, 3));
        let b = coefficient_matrix(&[1.0, 1.0]).unwrap().b;
        assert_eq!((b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]), (1.0, -1.0, -1.0, 2.0));
        // the same matrix as Aᵀ A for A the transpose of the Jacobian
        let a = transform_jacobian(&[1.0, 1.0]).unwrap().transpose();
        assert!((a.transpose() * &a - &b).amax() < 1e-14);
        assert!(matches!(coefficient_matrix(&[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn ellipticity_sweep() {
        // |p| ≤ c0 and |p_n| ≥ 1/lam bound the singular values of the Jacobian
        let (c0, lam) = (2.0f64, 4.0f64);
        let big = (1.0 + lam * (1.0 + c0)).powi(2).max((1.0 + 2.0 * c0).powi(2));
        for i in -10..=10 {
            for j in 0..=10 {
                let p1 = c0 * i as f64 / 10.0 / 2f64.sqrt();
                let pn = 1.0 / lam + (c0 / 2f64.sqrt() - 1.0 / lam) * j as f64 / 10.0;
                for sign in [1.0, -1.0] {
                    let (lo, hi) = coefficient_matrix(&[p1, sign * pn]).unwrap().eigen_range();
                    assert!(lo >= 1.0 / big && hi <= big, "{p1} {pn}: {lo} {hi}");
                }
            }
        }
    }

    #[test]
    fn kinked_patch_flags_interface_jump() {
        let patch = forward_transform(&field2(40, 40, |x, _| x[1]), &window(), 0.25).unwrap();
        let h = &patch.h;
        let broken = GridField::from_fn(
            h.origin().to_vec(),
            h.steps().to_vec(),
            h.shape().to_vec(),
            h.t0(),
            h.dt(),
            h.nt(),
            |y, _| y[1] + 0.1 * y[1].abs(),
        )
        .unwrap();
        let tr = transmission_residual(&broken, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(tr.interface_jump, 0.2, epsilon = 1e-9);
    }

    /// Self-similar solution near the bottom of its free-boundary sphere,
    /// where `u` increases with `x_3`.
    fn self_similar_patch(image_cells: usize) -> (HodographPatch, f64) {
        crate::studies::selfsim_hodograph_patch(image_cells, 1.5).unwrap()
    }

    #[test]
    fn self_similar_patch_residuals_shrink() {
        let coarse = self_similar_patch(8);
        let fine = self_similar_patch(16);
        let r0 = transmission_residual(&coarse.0.h, 1.0, coarse.1).unwrap();
        let r1 = transmission_residual(&fine.0.h, 1.0, fine.1).unwrap();
        assert!(r1.plus < r0.plus && r1.minus < r0.minus, "{r0:?} {r1:?}");
        assert!(r1.interface_jump < r0.interface_jump, "{r0:?} {r1:?}");
        let d0 = derivative_identity_check(&coarse.0).unwrap();
        let d1 = derivative_identity_check(&fine.0).unwrap();
        assert!(d1.gradient < d0.gradient && d1.min_hn > 0.0, "{d0:?} {d1:?}");
    }

    proptest! {
        #[test]
        fn coefficient_matrix_is_symmetric_positive(p1 in -3.0f64..3.0, p2 in -3.0f64..3.0, pn in 0.05f64..3.0, flip in proptest::bool::ANY) {
            let pn = if flip { -pn } else { pn };
            let c = coefficient_matrix(&[p1, p2, pn]).unwrap();
            prop_assert!((&c.b - c.b.transpose()).amax() == 0.0);
            prop_assert!(c.eigen_range().0 > 0.0);
        }
    }
}
