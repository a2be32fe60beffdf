//! Free-boundary diagnostics on sampled fields: zero-set extraction,
//! flatness, oscillation decay and normal regularity.

use crate::error::{ensure, Error, Result};
use crate::geometry::{fmt17, holder_fit_pairs, least_squares_slope, parabolic_distance, GridField, ParabolicCylinder};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Deviations below this are treated as exact zeros by the exponent fits.
pub const ZERO_DEVIATION: f64 = 1e-12;
/// Smallest probe radius, in grid cells.
pub const MIN_RADIUS_CELLS: f64 = 4.0;
const SEARCH_TOL: f64 = 1e-10;
const SEARCH_MAX_ITER: usize = 200;

/// One point `x_n = g(x', t)` of the zero set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSample {
    pub xprime: Vec<f64>,
    pub t: f64,
    pub g: f64,
    /// Grid indices of the column: tangential indices, then the time index.
    pub column: Vec<usize>,
    /// `+1` when `u` increases across the zero along `x_n`, `−1` otherwise.
    pub orientation: f64,
}

/// Zero set of a field written as a graph over `(x', t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeBoundaryGraph {
    pub samples: Vec<GraphSample>,
    /// `(sample index, unit normal)` pointing into the positive phase.
    pub fitted_normals: Option<Vec<(usize, Vec<f64>)>>,
}

impl FreeBoundaryGraph {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sup_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.g.abs()))
    }

    /// Attach normals `±(−∇'g, 1)/|·|`, with `∇'g` from central differences
    /// between neighbouring columns at the same time (one-sided at the edges).
    pub fn with_normals(mut self, steps: &[f64]) -> Result<Self> {
        let Some(first) = self.samples.first() else {
            return Err(Error::Empty("graph has no samples".into()));
        };
        let tangential = first.xprime.len();
        ensure(steps.len() >= tangential, || "missing grid steps".into())?;
        let lookup: HashMap<&[usize], usize> =
            self.samples.iter().enumerate().map(|(i, s)| (s.column.as_slice(), i)).collect();
        let mut normals = Vec::with_capacity(self.samples.len());
        for (i, s) in self.samples.iter().enumerate() {
            let mut gradient = Vec::with_capacity(tangential);
            let mut complete = true;
            for d in 0..tangential {
                let neighbour = |delta: isize| -> Option<f64> {
                    let mut col = s.column.clone();
                    col[d] = col[d].checked_add_signed(delta)?;
                    lookup.get(col.as_slice()).map(|&j| self.samples[j].g)
                };
                let slope = match (neighbour(-1), neighbour(1)) {
                    (Some(lo), Some(hi)) => (hi - lo) / (2.0 * steps[d]),
                    (None, Some(hi)) => (hi - s.g) / steps[d],
                    (Some(lo), None) => (s.g - lo) / steps[d],
                    (None, None) => {
                        complete = false;
                        break;
                    }
                };
                gradient.push(slope);
            }
            if !complete {
                continue;
            }
            let mut nu: Vec<f64> = gradient.iter().map(|g| -g).collect();
            nu.push(1.0);
            let len = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
            normals.push((i, nu.iter().map(|v| s.orientation * v / len).collect()));
        }
        self.fitted_normals = Some(normals);
        Ok(self)
    }

    /// CSV with header `x1,...,x{n-1},t,g`.
    pub fn to_csv(&self) -> String {
        let tangential = self.samples.first().map_or(0, |s| s.xprime.len());
        let mut out: String = (1..=tangential).map(|i| format!("x{i},")).collect();
        out.push_str("t,g\n");
        for s in &self.samples {
            for v in &s.xprime {
                out.push_str(&fmt17(*v));
                out.push(',');
            }
            out.push_str(&format!("{},{}\n", fmt17(s.t), fmt17(s.g)));
        }
        out
    }
}

/// Extract `{u = 0}` inside `window` as a graph `x_n = g(x', t)` by linear
/// interpolation along each `x_n` column. Columns without a sign change are
/// skipped; columns with more than one, or with a flat crossing, are reported.
pub fn extract_free_boundary(field: &GridField, window: &ParabolicCylinder) -> Result<FreeBoundaryGraph> {
    let n = field.dim();
    ensure(window.dim() == n, || format!("window is {}-dimensional, field is {n}-dimensional", window.dim()))?;
    let shape = field.shape();
    let tangential_shape = &shape[..n - 1];
    let columns: usize = tangential_shape.iter().product();
    let tangential_index = |mut c: usize| -> Vec<usize> {
        let mut idx = vec![0; n - 1];
        for d in (0..n - 1).rev() {
            idx[d] = c % tangential_shape[d];
            c /= tangential_shape[d];
        }
        idx
    };
    let tasks: Vec<(usize, usize)> = (0..field.nt()).flat_map(|it| (0..columns).map(move |c| (it, c))).collect();
    let outcomes: Vec<std::result::Result<Option<GraphSample>, Vec<usize>>> = tasks
        .par_iter()
        .filter_map(|&(it, c)| {
            let t = field.time(it);
            let tidx = tangential_index(c);
            let mut idx = tidx.clone();
            idx.push(0);
            let mut column: Vec<(f64, f64)> = Vec::new();
            for k in 0..shape[n - 1] {
                idx[n - 1] = k;
                let x: Vec<f64> = (0..n).map(|d| field.axis_coord(d, idx[d])).collect();
                if window.contains(&x, t) {
                    column.push((x[n - 1], field.get(&idx, it)));
                }
            }
            if column.len() < 2 {
                return None;
            }
            let mut col_id = tidx;
            col_id.push(it);
            let crossings: Vec<usize> =
                (0..column.len() - 1).filter(|&k| (column[k].1 > 0.0) != (column[k + 1].1 > 0.0)).collect();
            match crossings.as_slice() {
                [] => Some(Ok(None)),
                [k] => {
                    let (x0, u0) = column[*k];
                    let (x1, u1) = column[k + 1];
                    if u1 == u0 {
                        return Some(Err(col_id));
                    }
                    let g = x0 - u0 * (x1 - x0) / (u1 - u0);
                    let xprime = (0..n - 1).map(|d| field.axis_coord(d, col_id[d])).collect();
                    Some(Ok(Some(GraphSample { xprime, t, g, column: col_id, orientation: (u1 - u0).signum() })))
                }
                _ => Some(Err(col_id)),
            }
        })
        .collect();
    let mut samples = Vec::new();
    let mut violations = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(Some(s)) => samples.push(s),
            Ok(None) => {}
            Err(col) => violations.push(col),
        }
    }
    if !violations.is_empty() {
        return Err(Error::GraphViolation { columns: violations });
    }
    Ok(FreeBoundaryGraph { samples, fitted_normals: None })
}

fn window_nodes(field: &GridField, q: &ParabolicCylinder) -> Result<Vec<(Vec<f64>, f64)>> {
    ensure(q.dim() == field.dim(), || format!("window is {}-dimensional, field is {}-dimensional", q.dim(), field.dim()))?;
    let nodes: Vec<(Vec<f64>, f64)> = field
        .nodes_in(q)
        .into_iter()
        .map(|(x, _, v)| (x.iter().zip(q.center_x()).map(|(a, b)| a - b).collect(), v))
        .collect();
    if nodes.is_empty() {
        return Err(Error::Argument(format!("window of radius {} contains no grid node", q.radius())));
    }
    Ok(nodes)
}

fn plane_deviation(nodes: &[(Vec<f64>, f64)], nu: &[f64]) -> f64 {
    nodes
        .iter()
        .map(|(y, v)| (v - y.iter().zip(nu).map(|(a, b)| a * b).sum::<f64>()).abs())
        .fold(0.0, f64::max)
}

/// `max |u − ν·(x − x₀)|` over grid nodes in `q`, with `x₀` the center of `q`.
pub fn flatness(field: &GridField, q: &ParabolicCylinder, nu: &[f64]) -> Result<f64> {
    ensure(nu.len() == field.dim(), || format!("direction has {} components, field is {}-dimensional", nu.len(), field.dim()))?;
    Ok(plane_deviation(&window_nodes(field, q)?, nu))
}

fn least_squares_direction(nodes: &[(Vec<f64>, f64)], n: usize) -> Option<Vec<f64>> {
    let a = DMatrix::from_fn(nodes.len(), n, |i, j| nodes[i].0[j]);
    let b = DVector::from_iterator(nodes.len(), nodes.iter().map(|p| p.1));
    let sol = a.svd(true, true).solve(&b, 1e-14).ok()?;
    Some(sol.iter().copied().collect())
}

/// Pattern search for the `ν` minimizing the plane deviation.
fn best_direction(nodes: &[(Vec<f64>, f64)], seed: Vec<f64>) -> (Vec<f64>, f64) {
    let n = seed.len();
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[i] = s;
            directions.push(d);
        }
        for j in i + 1..n {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut d = vec![0.0; n];
                d[i] = si;
                d[j] = sj;
                directions.push(d);
            }
        }
    }
    let mut nu = seed;
    let mut best = plane_deviation(nodes, &nu);
    let norm = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut step = (0.1 * norm).max(1e-3).max(best);
    for _ in 0..SEARCH_MAX_ITER {
        if step < SEARCH_TOL || best == 0.0 {
            break;
        }
        let trial = directions
            .iter()
            .map(|d| {
                let cand: Vec<f64> = nu.iter().zip(d).map(|(v, e)| v + step * e).collect();
                let dev = plane_deviation(nodes, &cand);
                (cand, dev)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match trial {
            Some((cand, dev)) if dev < best => {
                nu = cand;
                best = dev;
            }
            _ => step *= 0.5,
        }
    }
    (nu, best)
}

/// Radii `top·ratioᵏ` for `k < count`.
pub fn geometric_radii(top: f64, ratio: f64, count: usize) -> Result<Vec<f64>> {
    ensure(top > 0.0 && ratio > 0.0 && ratio < 1.0, || format!("need top > 0 and ratio in (0,1), got {top}, {ratio}"))?;
    Ok((0..count).map(|k| top * ratio.powi(k as i32)).collect())
}

/// Best-plane deviations at shrinking radii around a free-boundary point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub radii: Vec<f64>,
    pub deviations: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
    /// Log-log slope of deviation against radius; `+∞` when every deviation
    /// is numerically zero.
    pub fitted_exponent: f64,
    pub warnings: Vec<String>,
}

impl FlatnessReport {
    /// CSV with header `radius,deviation,nu1,...,nun`.
    pub fn to_csv(&self) -> String {
        let n = self.normals.first().map_or(0, Vec::len);
        let mut out = String::from("radius,deviation");
        for i in 1..=n {
            out.push_str(&format!(",nu{i}"));
        }
        out.push('\n');
        for ((r, d), nu) in self.radii.iter().zip(&self.deviations).zip(&self.normals) {
            out.push_str(&format!("{},{}", fmt17(*r), fmt17(*d)));
            for v in nu {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Fit of `log deviation` against `log radius`, ignoring numerically zero
/// deviations.
pub fn deviation_exponent(radii: &[f64], deviations: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(deviations)
        .filter(|&(_, &d)| d > ZERO_DEVIATION)
        .map(|(r, d)| (r.ln(), d.ln()))
        .collect();
    if pts.is_empty() {
        f64::INFINITY
    } else {
        least_squares_slope(&pts)
    }
}

/// For each radius, the plane through `(center, center_t)` best fitting `u`
/// on `Q_r(center, center_t)`, searched around the previous radius's normal.
/// Radii below four grid cells are dropped with a warning.
pub fn improvement_of_flatness_probe(
    field: &GridField,
    center: &[f64],
    center_t: f64,
    radii: &[f64],
) -> Result<FlatnessReport> {
    let n = field.dim();
    ensure(center.len() == n, || format!("center has {} coordinates, field is {n}-dimensional", center.len()))?;
    ensure(radii.windows(2).all(|w| w[1] < w[0]), || "radii must be strictly decreasing".into())?;
    let h = field.steps().iter().copied().fold(0.0, f64::max);
    let mut warnings = Vec::new();
    let usable: Vec<f64> = radii.iter().copied().filter(|&r| r >= MIN_RADIUS_CELLS * h).collect();
    if usable.len() < radii.len() {
        warnings.push(format!(
            "dropped {} radii below {MIN_RADIUS_CELLS} grid cells ({})",
            radii.len() - usable.len(),
            MIN_RADIUS_CELLS * h
        ));
    }
    let mut seed = vec![0.0; n];
    seed[n - 1] = 1.0;
    let (mut out_r, mut deviations, mut normals) = (Vec::new(), Vec::new(), Vec::new());
    for r in usable {
        let q = ParabolicCylinder::new(center.to_vec(), center_t, r)?;
        let nodes = match window_nodes(field, &q) {
            Ok(nodes) => nodes,
            Err(_) => {
                warnings.push(format!("radius {r} contains no grid node; report truncated"));
                break;
            }
        };
        let start = match least_squares_direction(&nodes, n) {
            Some(ls) if plane_deviation(&nodes, &ls) < plane_deviation(&nodes, &seed) => ls,
            _ => seed.clone(),
        };
        let (nu, dev) = best_direction(&nodes, start);
        seed = nu.clone();
        out_r.push(r);
        deviations.push(dev);
        normals.push(nu);
    }
    if out_r.is_empty() {
        return Err(Error::Empty("no probe radius is resolved by the grid".into()));
    }
    let fitted_exponent = deviation_exponent(&out_r, &deviations);
    Ok(FlatnessReport { radii: out_r, deviations, normals, fitted_exponent, warnings })
}

/// Trapping bounds `x_n + lower ≤ u ≤ x_n + upper` on nested cylinders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnackReport {
    pub radii: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub oscillations: Vec<f64>,
    /// `oscillation[i+1] / oscillation[i]`; zero when both are numerically zero.
    pub ratios: Vec<f64>,
}

impl HarnackReport {
    /// CSV with header `level,radius,lower,upper,oscillation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,radius,lower,upper,oscillation\n");
        for i in 0..self.radii.len() {
            out.push_str(&format!(
                "{i},{},{},{},{}\n",
                fmt17(self.radii[i]),
                fmt17(self.lower[i]),
                fmt17(self.upper[i]),
                fmt17(self.oscillations[i])
            ));
        }
        out
    }
}

/// Oscillation of `u − x_n` over `Q_{r/3ⁱ}` for `i = 0..=levels`. The field
/// must be `delta`-flat on the outer cylinder.
pub fn harnack_decay_probe(field: &GridField, q: &ParabolicCylinder, levels: usize, delta: f64) -> Result<HarnackReport> {
    let n = field.dim();
    ensure(q.dim() == n, || format!("window is {}-dimensional, field is {n}-dimensional", q.dim()))?;
    let bounds: Vec<(f64, f64, f64)> = (0..=levels)
        .into_par_iter()
        .map(|i| {
            let r = q.radius() / 3f64.powi(i as i32);
            let nodes = field.nodes_in(&q.with_radius(r)?);
            if nodes.is_empty() {
                return Err(Error::Empty(format!("level {i} (radius {r}) contains no grid node")));
            }
            let (lo, hi) = nodes
                .iter()
                .map(|(x, _, v)| v - x[n - 1])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
            Ok((r, lo, hi))
        })
        .collect::<Result<_>>()?;
    let top = bounds[0].1.abs().max(bounds[0].2.abs());
    if top > delta {
        return Err(Error::Argument(format!("field is not {delta}-flat on the outer cylinder: sup |u - x_n| = {top}")));
    }
    let oscillations: Vec<f64> = bounds.iter().map(|b| b.2 - b.1).collect();
    let ratios = oscillations
        .windows(2)
        .map(|w| if w[0] <= ZERO_DEVIATION && w[1] <= ZERO_DEVIATION { 0.0 } else { w[1] / w[0] })
        .collect();
    Ok(HarnackReport {
        radii: bounds.iter().map(|b| b.0).collect(),
        lower: bounds.iter().map(|b| b.1).collect(),
        upper: bounds.iter().map(|b| b.2).collect(),
        oscillations,
        ratios,
    })
}

/// Hölder estimate for the free-boundary normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalHolder {
    /// Log-log slope of `|Δν|` against the parabolic distance; `+∞` when the
    /// normal is constant.
    pub exponent: f64,
    /// `sup |Δν| / d_p^β` with `β = min(exponent, 1)`.
    pub constant: f64,
    pub pairs: usize,
}

/// Fit `|ν₁ − ν₂| ≤ C d_p^β` over all pairs of fitted normals.
pub fn normal_holder_probe(graph: &FreeBoundaryGraph) -> Result<NormalHolder> {
    let normals = graph.fitted_normals.as_ref().ok_or_else(|| Error::Argument("graph has no fitted normals".into()))?;
    ensure(normals.len() >= 8, || format!("need at least 8 fitted normals, got {}", normals.len()))?;
    let points: Vec<(Vec<f64>, f64, &[f64])> = normals
        .iter()
        .map(|(i, nu)| {
            let s = &graph.samples[*i];
            let mut x = s.xprime.clone();
            x.push(s.g);
            (x, s.t, nu.as_slice())
        })
        .collect();
    let pairs: Vec<(f64, f64)> = (0..points.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let points = &points;
            (i + 1..points.len()).filter_map(move |j| {
                let (a, b) = (&points[i], &points[j]);
                let d = parabolic_distance(&a.0, a.1, &b.0, b.1).ok()?;
                let dn = a.2.iter().zip(b.2).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                (d > 0.0).then_some((d, dn))
            })
        })
        .collect();
    if pairs.iter().all(|p| p.1 <= ZERO_DEVIATION) {
        return Ok(NormalHolder { exponent: f64::INFINITY, constant: 0.0, pairs: pairs.len() });
    }
    let slope = holder_fit_pairs(&pairs, &[1.0], f64::INFINITY)?.loglog_slope;
    let beta = slope.clamp(0.0, 1.0);
    let constant = pairs.iter().map(|&(d, dn)| dn / d.powf(beta)).fold(0.0, f64::max);
    Ok(NormalHolder { exponent: slope, constant, pairs: pairs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selfsim::{RadialProfile, SelfSimilarProfile};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn field2(cells: usize, steps: usize, f: impl Fn(&[f64], f64) -> f64 + Sync) -> GridField {
        let h = 2.0 / cells as f64;
        GridField::from_fn(vec![-1.0, -1.0], vec![h, h], vec![cells + 1, cells + 1], -1.0, 1.0 / steps as f64, steps + 1, f)
            .unwrap()
    }

    fn unit_window() -> ParabolicCylinder {
        ParabolicCylinder::unit(2)
    }

    #[test]
    fn extract_linear_fields() {
        let flat = extract_free_boundary(&field2(20, 4, |x, _| x[1]), &unit_window()).unwrap();
        assert!(!flat.is_empty());
        assert!(flat.samples.iter().all(|s| s.g.abs() < 1e-15));
        let shifted = extract_free_boundary(&field2(20, 4, |x, _| x[1] - 0.3), &unit_window()).unwrap();
        assert!(shifted.samples.iter().all(|s| (s.g - 0.3).abs() < 1e-14));
    }

    #[test]
    fn multivalued_zero_set_is_rejected() {
        let err = extract_free_boundary(&field2(20, 2, |x, _| x[1] * x[1] - 0.1), &unit_window());
        match err {
            Err(Error::GraphViolation { columns }) => assert!(!columns.is_empty()),
            other => panic!("expected graph violation, got {other:?}"),
        }
    }

    #[test]
    fn extracts_self_similar_cone() {
        let profile = SelfSimilarProfile::solve(3, 0.1, 1e-12).unwrap();
        let t: f64 = -0.01;
        let radius = profile.s_eps() * (-t).sqrt();
        let h = radius / 100.0;
        // slab around the top of the sphere |x| = radius, in the plane x2 = 0
        let field = GridField::from_fn(
            vec![-0.2 * radius, 0.0, 0.7 * radius],
            vec![h, h, h],
            vec![41, 1, 61],
            t,
            1.0,
            1,
            |x, t| profile.evaluate_u(x, t).unwrap(),
        )
        .unwrap();
        let window = ParabolicCylinder::new(vec![0.0, 0.0, radius], t, 0.5 * radius).unwrap();
        let graph = extract_free_boundary(&field, &window).unwrap();
        assert!(graph.len() > 10);
        for s in &graph.samples {
            let exact = (radius * radius - s.xprime[0] * s.xprime[0]).sqrt();
            assert!((s.g - exact).abs() < h, "{} vs {exact}", s.g);
        }
    }

    #[test]
    fn flatness_examples() {
        let q = unit_window();
        assert_eq!(flatness(&field2(40, 4, |x, _| x[1]), &q, &[0.0, 1.0]).unwrap(), 0.0);
        let wavy = flatness(&field2(40, 4, |x, _| x[1] + 0.05 * x[0].sin()), &q, &[0.0, 1.0]).unwrap();
        assert!((wavy - 0.05 * 0.95f64.sin()).abs() < 0.003, "{wavy}");
        let steep = flatness(&field2(40, 4, |x, _| 2.0 * x[1]), &q, &[0.0, 1.0]).unwrap();
        assert!((steep - 0.95).abs() < 1e-12, "{steep}");
        let far = ParabolicCylinder::new(vec![5.0, 5.0], 0.0, 0.1).unwrap();
        assert!(matches!(flatness(&field2(10, 2, |x, _| x[1]), &far, &[0.0, 1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn improvement_probe_examples() {
        let radii = geometric_radii(0.8, 0.5, 4).unwrap();
        let linear = field2(64, 64, |x, _| 0.6 * x[0] + 0.8 * x[1]);
        let report = improvement_of_flatness_probe(&linear, &[0.0, 0.0], 0.0, &radii).unwrap();
        assert!(report.deviations.iter().all(|&d| d <= ZERO_DEVIATION));
        assert_eq!(report.fitted_exponent, f64::INFINITY);
        assert_abs_diff_eq!(report.normals[0][0], 0.6, epsilon = 1e-9);

        let smooth = field2(64, 64, |x, _| x[1] + 0.5 * x[1] * x[1]);
        let report = improvement_of_flatness_probe(&smooth, &[0.0, 0.0], 0.0, &radii).unwrap();
        assert!((report.fitted_exponent - 2.0).abs() < 0.1, "{report:?}");

        let tiny = improvement_of_flatness_probe(&smooth, &[0.0, 0.0], 0.0, &[0.5, 0.01]).unwrap();
        assert_eq!(tiny.radii.len(), 1);
        assert_eq!(tiny.warnings.len(), 1);
    }

    #[test]
    fn harnack_examples() {
        let q = ParabolicCylinder::new(vec![0.0, 0.0], 0.0, 0.9).unwrap();
        for shift in [0.0, 0.01] {
            let report = harnack_decay_probe(&field2(60, 30, move |x, _| x[1] + shift), &q, 3, 0.05).unwrap();
            assert!(report.oscillations.iter().all(|&o| o.abs() < 1e-15));
            assert!(report.ratios.iter().all(|&r| r == 0.0));
        }
        let wavy = field2(60, 30, |x, _| x[1] + 0.01 * (x[0] + x[1]).sin());
        let report = harnack_decay_probe(&wavy, &q, 2, 0.05).unwrap();
        assert!(report.ratios.iter().all(|&r| r < 1.0), "{report:?}");
        assert!(matches!(harnack_decay_probe(&wavy, &q, 2, 1e-4), Err(Error::Argument(_))));
    }

    #[test]
    fn normal_holder_examples() {
        let window = unit_window();
        let planar = extract_free_boundary(&field2(40, 4, |x, _| x[1] - 0.1), &window)
            .unwrap()
            .with_normals(&[0.05, 0.05])
            .unwrap();
        let fit = normal_holder_probe(&planar).unwrap();
        assert_eq!(fit.constant, 0.0);

        let curved = extract_free_boundary(&field2(40, 4, |x, _| x[1] + 0.01 * x[0] * x[0]), &window)
            .unwrap()
            .with_normals(&[0.05, 0.05])
            .unwrap();
        let fit = normal_holder_probe(&curved).unwrap();
        assert!(fit.exponent >= 0.9, "{fit:?}");
        let (_, nu) = &curved.fitted_normals.as_ref().unwrap()[0];
        assert!((nu.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn extraction_recovers_graph(a in -0.25f64..0.25, b in -0.2f64..0.2, c in -0.1f64..0.1) {
            let gamma = move |x1: f64, t: f64| a * x1 + b * t + c;
            let field = field2(24, 4, move |x, t| x[1] - gamma(x[0], t));
            let graph = extract_free_boundary(&field, &unit_window()).unwrap();
            let h = 2.0 / 24.0;
            for s in &graph.samples {
                prop_assert!((s.g - gamma(s.xprime[0], s.t)).abs() <= h * h);
            }
        }

        #[test]
        fn flatness_is_lipschitz_in_direction(p in -1.0f64..1.0, q in -1.0f64..1.0, r in -1.0f64..1.0, s in -1.0f64..1.0) {
            let field = field2(16, 2, |x, _| x[1] + 0.1 * x[0] * x[1]);
            let window = ParabolicCylinder::new(vec![0.0, 0.0], 0.0, 0.8).unwrap();
            let f1 = flatness(&field, &window, &[p, q]).unwrap();
            let f2 = flatness(&field, &window, &[r, s]).unwrap();
            let dist = ((p - r).powi(2) + (q - s).powi(2)).sqrt();
            prop_assert!((f1 - f2).abs() <= 0.8 * dist + 1e-12);
        }
    }
}
