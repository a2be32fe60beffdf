//! Parabolic geometry: cylinders, the parabolic distance, space-time grids,
//! Hölder seminorm estimation and exact Hausdorff distances.
//!
//! Space-time points are written `(x, t)` with `x ∈ ℝⁿ`. The parabolic
//! cylinder of radius `r` centred at `(x₀, t₀)` is `B_r(x₀) × (t₀ − r², t₀]`.

use rayon::prelude::*;
use std::fmt::Write as _;

use crate::error::{ensure, Error, Result};

/// Largest spatial dimension a [`GridField`] can store.
pub const MAX_GRID_DIM: usize = 3;

/// `d_p((x,t),(y,s)) = (|x−y|² + |t−s|)^{1/2}`.
pub fn parabolic_distance(x: &[f64], t: f64, y: &[f64], s: f64) -> Result<f64> {
    ensure(x.len() == y.len(), || {
        format!("dimension mismatch: {} vs {}", x.len(), y.len())
    })?;
    Ok((squared_norm_diff(x, y) + (t - s).abs()).sqrt())
}

fn squared_norm_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `Q_r(x₀, t₀) = B_r(x₀) × (t₀ − r², t₀]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicCylinder {
    center_x: Vec<f64>,
    center_t: f64,
    radius: f64,
}

impl ParabolicCylinder {
    pub fn new(center_x: Vec<f64>, center_t: f64, radius: f64) -> Result<Self> {
        ensure(radius > 0.0 && radius.is_finite(), || {
            format!("cylinder radius must be positive, got {radius}")
        })?;
        ensure(!center_x.is_empty(), || "cylinder center needs n >= 1".into())?;
        ensure(
            center_x.iter().all(|v| v.is_finite()) && center_t.is_finite(),
            || "cylinder center must be finite".into(),
        )?;
        Ok(Self { center_x, center_t, radius })
    }

    /// The unit cylinder `Q_1` centred at the origin of `ℝⁿ × ℝ`.
    pub fn unit(n: usize) -> Self {
        Self { center_x: vec![0.0; n], center_t: 0.0, radius: 1.0 }
    }

    pub fn center_x(&self) -> &[f64] {
        &self.center_x
    }

    pub fn center_t(&self) -> f64 {
        self.center_t
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center_x.len()
    }

    /// Length of the time interval, always `radius²`.
    pub fn time_extent(&self) -> f64 {
        self.radius * self.radius
    }

    /// Same centre, new radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.center_x.clone(), self.center_t, radius)
    }

    /// `|x − x₀| < r` and `t₀ − r² < t ≤ t₀`.
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        x.len() == self.center_x.len()
            && squared_norm_diff(x, &self.center_x) < self.radius * self.radius
            && t > self.center_t - self.time_extent()
            && t <= self.center_t
    }

    /// Membership in the closure `B̄_r(x₀) × [t₀ − r², t₀]`, with slack `tol`.
    pub fn contains_closed(&self, x: &[f64], t: f64, tol: f64) -> bool {
        x.len() == self.center_x.len()
            && squared_norm_diff(x, &self.center_x).sqrt() <= self.radius + tol
            && t >= self.center_t - self.time_extent() - tol
            && t <= self.center_t + tol
    }
}

/// A finite set of points in `ℝᵐ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    pub points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Serialize as `x1,...,x(m-2),t,value` rows; the last two coordinates
    /// are read as time and value (graphs over space-time).
    pub fn to_csv(&self) -> Result<String> {
        let m = self.points.first().map_or(0, Vec::len);
        ensure(m >= 2, || "graph point sets need at least (t, value) coordinates".into())?;
        let mut out = csv_header(m - 2);
        for p in &self.points {
            ensure(p.len() == m, || "ragged point set".into())?;
            push_csv_row(&mut out, p);
        }
        Ok(out)
    }
}

/// Exact Hausdorff distance between finite point sets (brute force over all
/// pairs).
pub fn hausdorff_distance(x: &PointSet, y: &PointSet) -> Result<f64> {
    ensure(!x.is_empty() && !y.is_empty(), || {
        "Hausdorff distance needs nonempty sets".into()
    })?;
    let m = x.points[0].len();
    ensure(
        x.points.iter().chain(&y.points).all(|p| p.len() == m),
        || "points of different dimensions".into(),
    )?;
    Ok(directed_hausdorff(x, y).max(directed_hausdorff(y, x)))
}

fn directed_hausdorff(from: &PointSet, to: &PointSet) -> f64 {
    from.points
        .par_iter()
        .map(|p| {
            to.points
                .iter()
                .map(|q| squared_norm_diff(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// One scalar sample `value` at the space-time point `(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderSample {
    pub x: Vec<f64>,
    pub t: f64,
    pub value: f64,
}

/// Outcome of a Hölder exponent fit.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    /// Largest exponent in the grid whose sup-quotient stays below the cap.
    pub best_exponent: f64,
    /// `sup |Δvalue| / d_p^α` at `best_exponent`.
    pub constant: f64,
    /// Least-squares slope of `log |Δvalue|` against `log d_p`; `NaN` when no
    /// pair has a nonzero difference.
    pub loglog_slope: f64,
}

/// Default constant cap when no theoretical constant is known.
pub const DEFAULT_HOLDER_CAP: f64 = 1e3;

/// Estimate the Hölder exponent of scalar samples under the parabolic distance.
pub fn holder_seminorm_fit(
    samples: &[HolderSample],
    exponent_grid: &[f64],
    cap: f64,
) -> Result<HolderFit> {
    ensure(samples.len() >= 8, || {
        format!("Hölder fit needs at least 8 samples, got {}", samples.len())
    })?;
    let mut pairs = Vec::with_capacity(samples.len() * (samples.len() - 1) / 2);
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let d = parabolic_distance(&a.x, a.t, &b.x, b.t)?;
            ensure(d > 0.0, || format!("duplicate sample point {:?} at t={}", a.x, a.t))?;
            pairs.push((d, (a.value - b.value).abs()));
        }
    }
    holder_fit_pairs(&pairs, exponent_grid, cap)
}

/// Hölder fit on precomputed `(distance, |difference|)` pairs.
pub fn holder_fit_pairs(pairs: &[(f64, f64)], exponent_grid: &[f64], cap: f64) -> Result<HolderFit> {
    ensure(!pairs.is_empty(), || "no sample pairs".into())?;
    ensure(!exponent_grid.is_empty(), || "empty exponent grid".into())?;
    ensure(cap > 0.0, || "cap must be positive".into())?;
    ensure(pairs.iter().all(|&(d, _)| d > 0.0), || "pair at zero distance".into())?;

    let mut best: Option<(f64, f64)> = None;
    for &alpha in exponent_grid {
        let constant = pairs
            .iter()
            .map(|&(d, dv)| dv / d.powf(alpha))
            .fold(0.0, f64::max);
        if constant < cap && best.is_none_or(|(b, _)| alpha > b) {
            best = Some((alpha, constant));
        }
    }
    let (best_exponent, constant) = best.ok_or_else(|| {
        Error::NotApplicable(format!("no exponent in {exponent_grid:?} has a constant below {cap}"))
    })?;

    let logs: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|&&(_, dv)| dv > 0.0)
        .map(|&(d, dv)| (d.ln(), dv.ln()))
        .collect();
    Ok(HolderFit { best_exponent, constant, loglog_slope: least_squares_slope(&logs) })
}

/// Slope of the least-squares line through `(x, y)` points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// A scalar field sampled on a uniform space-time grid.
///
/// Nodes sit at `origin[i] + k·steps[i]` for `k < shape[i]` and times
/// `t0 + j·dt` for `j < nt`. Values are stored time-major, then row-major in
/// space with the last spatial axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    origin: Vec<f64>,
    steps: Vec<f64>,
    shape: Vec<usize>,
    t0: f64,
    dt: f64,
    nt: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(
        origin: Vec<f64>,
        steps: Vec<f64>,
        shape: Vec<usize>,
        t0: f64,
        dt: f64,
        nt: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let n = origin.len();
        ensure((1..=MAX_GRID_DIM).contains(&n), || {
            format!("grid dimension must be 1..={MAX_GRID_DIM}, got {n}")
        })?;
        ensure(steps.len() == n && shape.len() == n, || "origin/steps/shape length mismatch".into())?;
        ensure(steps.iter().all(|h| *h > 0.0 && h.is_finite()), || {
            format!("spatial steps must be positive, got {steps:?}")
        })?;
        ensure(dt > 0.0 && dt.is_finite(), || format!("time step must be positive, got {dt}"))?;
        ensure(shape.iter().all(|&k| k >= 1) && nt >= 1, || "empty grid".into())?;
        let expected = shape.iter().product::<usize>() * nt;
        ensure(values.len() == expected, || {
            format!("expected {expected} values, got {}", values.len())
        })?;
        check_finite(&values)?;
        Ok(Self { origin, steps, shape, t0, dt, nt, values })
    }

    /// Sample `f(x, t)` at every node.
    pub fn from_fn(
        origin: Vec<f64>,
        steps: Vec<f64>,
        shape: Vec<usize>,
        t0: f64,
        dt: f64,
        nt: usize,
        f: impl Fn(&[f64], f64) -> f64 + Sync,
    ) -> Result<Self> {
        let spatial: usize = shape.iter().product();
        let mut values = vec![0.0; spatial * nt];
        values.par_chunks_mut(spatial).enumerate().for_each(|(it, level)| {
            let t = t0 + it as f64 * dt;
            let mut x = vec![0.0; origin.len()];
            for (flat, v) in level.iter_mut().enumerate() {
                node_coords(&origin, &steps, &shape, flat, &mut x);
                *v = f(&x, t);
            }
        });
        Self::new(origin, steps, shape, t0, dt, nt, values)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.nt - 1)
    }

    pub fn time(&self, it: usize) -> f64 {
        self.t0 + it as f64 * self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spatial_len(&self) -> usize {
        self.shape.iter().product()
    }

    /// All spatial values at time level `it`.
    pub fn level(&self, it: usize) -> &[f64] {
        let m = self.spatial_len();
        &self.values[it * m..(it + 1) * m]
    }

    /// Flat spatial index of a multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &n)| {
            debug_assert!(i < n);
            acc * n + i
        })
    }

    /// Multi-index of a flat spatial index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.shape[d];
            flat /= self.shape[d];
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        node_coords(&self.origin, &self.steps, &self.shape, flat, &mut x);
        x
    }

    pub fn get(&self, idx: &[usize], it: usize) -> f64 {
        self.values[it * self.spatial_len() + self.flat_index(idx)]
    }

    /// Coordinate of node `k` along axis `axis`.
    pub fn axis_coord(&self, axis: usize, k: usize) -> f64 {
        self.origin[axis] + k as f64 * self.steps[axis]
    }

    /// Largest coordinate along `axis`.
    pub fn axis_end(&self, axis: usize) -> f64 {
        self.axis_coord(axis, self.shape[axis] - 1)
    }

    /// Iterate `(x, t, value)` over nodes inside `window` (half-open in time
    /// per the cylinder definition).
    pub fn nodes_in(&self, window: &ParabolicCylinder) -> Vec<(Vec<f64>, f64, f64)> {
        if window.dim() != self.dim() {
            return Vec::new();
        }
        let m = self.spatial_len();
        let mut out = Vec::new();
        for it in 0..self.nt {
            let t = self.time(it);
            if t <= window.center_t() - window.time_extent() || t > window.center_t() + 1e-12 * self.dt {
                continue;
            }
            for flat in 0..m {
                let x = self.coords(flat);
                if squared_norm_diff(&x, window.center_x()) < window.radius() * window.radius() {
                    out.push((x, t, self.values[it * m + flat]));
                }
            }
        }
        out
    }

    /// Write as CSV: header `x1,...,xn,t,value`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let m = self.spatial_len();
        let mut out = csv_header(self.dim());
        let mut row = vec![0.0; self.dim() + 2];
        for it in 0..self.nt {
            for flat in 0..m {
                node_coords(&self.origin, &self.steps, &self.shape, flat, &mut row[..self.dim()]);
                row[self.dim()] = self.time(it);
                row[self.dim() + 1] = self.values[it * m + flat];
                push_csv_row(&mut out, &row);
            }
        }
        out
    }

    /// Rebuild a grid from CSV produced by [`GridField::to_csv`]; the node
    /// set must be a complete uniform tensor grid.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let n = cols.len().checked_sub(2).filter(|&n| n >= 1).ok_or_else(|| {
            Error::Parse(format!("header needs x1..xn,t,value, got {header:?}"))
        })?;
        if cols[n] != "t" || cols[n + 1] != "value" {
            return Err(Error::Parse(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            if row.len() != n + 2 {
                return Err(Error::Parse(format!("line {}: expected {} columns", lineno + 2, n + 2)));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("CSV has no data rows".into()));
        }

        let axis_nodes = |col: usize| -> Result<(f64, f64, usize)> {
            let mut v: Vec<f64> = rows.iter().map(|r| r[col]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
            if v.len() == 1 {
                return Ok((v[0], 1.0, 1));
            }
            let step = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
            for (k, w) in v.iter().enumerate() {
                if (w - (v[0] + k as f64 * step)).abs() > 1e-7 * step {
                    return Err(Error::Parse(format!("column {col} is not uniformly spaced")));
                }
            }
            Ok((v[0], step, v.len()))
        };
        let mut origin = Vec::with_capacity(n);
        let mut steps = Vec::with_capacity(n);
        let mut shape = Vec::with_capacity(n);
        for d in 0..n {
            let (o, h, k) = axis_nodes(d)?;
            origin.push(o);
            steps.push(h);
            shape.push(k);
        }
        let (t0, dt, nt) = axis_nodes(n)?;
        let m: usize = shape.iter().product();
        if rows.len() != m * nt {
            return Err(Error::Parse(format!(
                "expected {} nodes for a complete grid, found {}",
                m * nt,
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; m * nt];
        for r in &rows {
            let mut flat = 0;
            for d in 0..n {
                let k = ((r[d] - origin[d]) / steps[d]).round() as usize;
                flat = flat * shape[d] + k;
            }
            let it = ((r[n] - t0) / dt).round() as usize;
            values[it * m + flat] = r[n + 1];
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Parse("duplicate or missing grid nodes".into()));
        }
        Self::new(origin, steps, shape, t0, dt, nt, values)
    }
}

pub(crate) fn node_coords(origin: &[f64], steps: &[f64], shape: &[usize], mut flat: usize, x: &mut [f64]) {
    for d in (0..origin.len()).rev() {
        let k = flat % shape[d];
        flat /= shape[d];
        x[d] = origin[d] + k as f64 * steps[d];
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("non-finite value {} at index {i}", values[i]))),
        None => Ok(()),
    }
}

fn csv_header(n: usize) -> String {
    let mut out = String::new();
    for d in 1..=n {
        let _ = write!(out, "x{d},");
    }
    out.push_str("t,value\n");
    out
}

fn push_csv_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{}", fmt17(*v));
    }
    out.push('\n');
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// `{(x, t, value)}` for every grid node inside `window`.
pub fn graph_to_pointset(field: &GridField, window: &ParabolicCylinder) -> Result<PointSet> {
    let points: Vec<Vec<f64>> = field
        .nodes_in(window)
        .into_iter()
        .map(|(mut x, t, v)| {
            x.push(t);
            x.push(v);
            x
        })
        .collect();
    if points.is_empty() {
        return Err(Error::Empty("window contains no grid nodes".into()));
    }
    Ok(PointSet::new(points))
}
