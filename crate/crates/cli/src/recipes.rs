//! Experiment recipes: each runs a study, writes its artifacts and returns
//! the pass/fail assertions recorded in the run record.

use crate::config::{Experiment, ExperimentConfig, Params};
use crate::error::{CliResult, StageExt};
use crate::output::{append_line_atomic, ArtifactSink, Assertion, RunRecord};
use freetrans::barriers::{operator_scan, rate_threshold, subsolution_check, BarrierSpec, BellRegion};
use freetrans::fbdiag::{geometric_radii, improvement_of_flatness_probe, ZERO_DEVIATION};
use freetrans::geometry::{fmt17, GridField, ParabolicCylinder};
use freetrans::hodograph::{coefficient_matrix, forward_transform, round_trip_error, transform_jacobian};
use freetrans::selfsim::{figure2_csv, figure2_gnuplot, RadialProfile, SelfSimilarProfile};
use freetrans::studies::{
    counterexample_sweep, flatness_decay_study, harnack_study, hodograph_refinement, linear_quadratic_study,
    observed_orders, selfsim_evolution, solve_flat_fixture, EvolutionSetup, FlatFixture,
};
use nalgebra::DMatrix;
use std::time::Instant;

/// Name of the JSON-lines file collecting run records in the output directory.
pub const RUN_LOG: &str = "runs.jsonl";

/// Run one experiment, write its artifacts, and append its record to
/// `output_dir/runs.jsonl`.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunRecord> {
    let clock = Instant::now();
    let mut sink = ArtifactSink::new(&cfg.output_dir);
    let p = &cfg.params;
    let assertions = match cfg.experiment {
        Experiment::Figure2 => figure2(p, &mut sink)?,
        Experiment::CounterexampleSweep => sweep(p, &mut sink)?,
        Experiment::LinearQuadratic => linear_quadratic(p, &mut sink)?,
        Experiment::SelfsimEvolution => evolution(p, &mut sink)?,
        Experiment::FlatnessDecay => flatness_decay(p, &mut sink)?,
        Experiment::HarnackDecay => harnack_decay(p, &mut sink)?,
        Experiment::BarrierCertificate => barrier_certificate(p, &mut sink)?,
        Experiment::HodographRoundtrip => hodograph_roundtrip(p, &mut sink)?,
    };
    let record = RunRecord {
        experiment: cfg.experiment.name().to_string(),
        parameters: p.snapshot().clone(),
        artifacts: sink.into_paths(),
        assertions,
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    append_line_atomic(&cfg.output_dir.join(RUN_LOG), &record.to_json_line())?;
    Ok(record)
}

/// A gnuplot script reading comma-separated `csv` and drawing `series`
/// as `(x column, y column, title)`.
fn gnuplot(csv: &str, title: &str, axes: (&str, &str), logscale: &str, series: &[(usize, usize, &str)]) -> String {
    let mut out = String::from("set datafile separator ','\nset key top left\n");
    out.push_str(&format!("set title '{title}'\nset xlabel '{}'\nset ylabel '{}'\n", axes.0, axes.1));
    if !logscale.is_empty() {
        out.push_str(&format!("set logscale {logscale}\n"));
    }
    let plots: Vec<String> = series
        .iter()
        .map(|(x, y, t)| format!("'{csv}' using {x}:{y} with linespoints lw 2 title '{t}'"))
        .collect();
    out.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    out
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt17).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn figure2(p: &Params, sink: &mut ArtifactSink) -> CliResult<Vec<Assertion>> {
    let profile = SelfSimilarProfile::solve(p.int("n"), p.real("eps"), p.real("tol")).stage("matching")?;
    let csv = figure2_csv(&profile, p.int("samples")).stage("figure2 table")?;
    sink.write("figure2.csv", &csv)?;
    sink.write("figure2.gp", &figure2_gnuplot(&profile, "figure2.csv"))?;
    let s = profile.s_eps();
    let inner = profile.inner_branch(s).stage("inner branch")?;
    let outer = profile.outer_branch_unit(s).stage("outer branch")?;
    let gap = inner.abs().max(outer.abs());
    Ok(vec![Assertion::new(
        "branches share the zero",
        gap <= 1e-8,
        format!("s_eps = {}, alpha = {}, max |branch(s_eps)| = {gap:.3e}", fmt17(s), fmt17(profile.alpha())),
    )])
}

fn sweep(p: &Params, sink: &mut ArtifactSink) -> CliResult<Vec<Assertion>> {
    let mut factors = p.reals("factors");
    factors.sort_by(f64::total_cmp);
    factors.dedup();
    let (e0, rows) = counterexample_sweep(p.int("n"), &factors, p.real("tol")).stage("exponent sweep")?;
    let csv = csv_table(
        "factor,eps,alpha,s_eps,residual",
        factors.iter().zip(&rows).map(|(f, r)| vec![*f, r.eps, r.alpha, r.s_eps, r.residual]),
    );
    sink.write("counterexample_sweep.csv", &csv)?;
    let mut gp = gnuplot("counterexample_sweep.csv", "alpha against eps", ("eps", "alpha"), "x", &[(2, 3, "alpha")]);
    gp.insert_str(0, &format!("set arrow from {e0},graph 0 to {e0},graph 1 nohead dashtype 2\nset yrange [0:*]\n"));
    gp.push_str("replot 1 with lines dashtype 3 title 'alpha = 1'\n");
    sink.write("counterexample_sweep.gp", &gp)?;

    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    let monotone = rows.windows(2).all(|w| w[0].alpha < w[1].alpha);
    let crossing = factors.iter().zip(&rows).all(|(f, r)| if *f < 1.0 { r.alpha < 1.0 } else { *f == 1.0 || r.alpha >= 1.0 });
    let small: Vec<f64> = factors.iter().zip(&rows).filter(|(f, _)| **f <= 0.5).map(|(_, r)| r.alpha).collect();
    let vanishing = match (small.first(), small.last()) {
        (Some(lo), Some(hi)) if small.len() >= 2 => {
            Assertion::new("alpha tends to zero", *lo < hi / 2.0, format!("alpha(smallest) = {lo:.6}, alpha(eps0/2 side) = {hi:.6}"))
        }
        _ => Assertion::new("alpha tends to zero", true, "skipped: fewer than two factors <= 1/2"),
    };
    Ok(vec![
        Assertion::new("matching residual", worst <= 1e-9, format!("max residual {worst:.3e}")),
        Assertion::new("alpha increases with eps", monotone, format!("{} points", rows.len())),
        Assertion::new("alpha crosses 1 at eps0", crossing, format!("eps0 = {}", fmt17(e0))),
        vanishing,
    ])
}

fn linear_quadratic(p: &Params, sink: &mut ArtifactSink) -> CliResult<Vec<Assertion>> {
    let cells = p.int("cells");
    let rows = linear_quadratic_study(&[cells / 2, cells], p.real("reg_factor")).stage("linear solve")?;
    let csv = csv_table("cells,h,reg_width,error", rows.iter().map(|r| vec![r.cells as f64, r.h, r.reg_width, r.error]));
    sink.write("linear_quadratic.csv", &csv)?;
    sink.write(
        "linear_quadratic.gp",
        &gnuplot("linear_quadratic.csv", "sup error against h", ("h", "sup error"), "xy", &[(2, 4, "error")]),
    )?;
    let fine = rows[1];
    let bound = 5.0 * (fine.h * fine.h + fine.reg_width);
    let order = observed_orders(&rows)[0];
    Ok(vec![
        Assertion::new("error bound", fine.error <= bound, format!("error {:.3e} <= {bound:.3e} at {cells} cells", fine.error)),
        Assertion::new("convergence order", order >= 1.5, format!("observed order {order:.3}")),
    ])
}

fn evolution(p: &Params, sink: &mut ArtifactSink) -> CliResult<Vec<Assertion>> {
    let setup = EvolutionSetup {
        n: p.int("n"),
        eps: p.real("eps"),
        radius: p.real("radius"),
        t_start: p.real("t_start"),
        t_end: p.real("t_end"),
        window: (p.real("r_min"), p.real("r_max")),
        cells: p.int("cells"),
        time_steps: p.int("time_steps"),
        reg_factor: p.real("reg_factor"),
    };
    let coarse = selfsim_evolution(&setup).stage("radial solve")?;
    let fine = selfsim_evolution(&setup.refined()).stage("refined radial solve")?;
    let csv = csv_table("r,computed,exact", coarse.final_profile.iter().map(|&(r, u, e)| vec![r, u, e]));
    sink.write("selfsim_evolution.csv", &csv)?;
    let table = csv_table(
        "cells,time_steps,h,reg_width,error",
        [&coarse, &fine].iter().map(|r| vec![r.setup.cells as f64, r.setup.time_steps as f64, r.h, r.reg_width, r.error]),
    );
    sink.write("selfsim_evolution_refinement.csv", &table)?;
    sink.write(
        "selfsim_evolution.gp",
        &gnuplot(
            "selfsim_evolution.csv",
            &format!("radial profile at t = {}", setup.t_end),
            ("r", "u"),
            "",
            &[(1, 2, "computed"), (1, 3, "self-similar")],
        ),
    )?;
    let ratio = coarse.error / fine.error;
    Ok(vec![
        Assertion::new(
            "sup error",
            coarse.error <= p.real("max_error"),
            format!("{:.3e} on r in [{}, {}] at {} cells", coarse.error, setup.window.0, setup.window.1, setup.cells),
        ),
        Assertion::new("refinement gain", ratio >= p.real("min_ratio"), format!("error ratio {ratio:.3}")),
    ])
}

fn flat_fixture(p: &Params) -> FlatFixture {
    FlatFixture {
        a_plus: p.real("a_plus"),
        a_minus: p.real("a_minus"),
        delta: p.real("delta"),
        cells: p.int("cells"),
        time_steps: p.int("time_steps"),
        reg_width: p.real("reg_width"),
    }
}

/// `u = x_n` sampled on the grid of `like`.
fn flat_plane(like: &GridField) -> CliResult<GridField> {
    let n = like.dim();
    GridField::from_fn(
        like.origin().to_vec(),
        like.steps().to_vec(),
        like.shape().to_vec(),
        like.t0(),
        like.dt(),
        like.nt(),
        |x, _| x[n - 1],
    )
    .stage("plane fixture")
}

fn flatness_decay(p: &Params, sink: &mut ArtifactSink) -> CliResult<Vec<Assertion>> {
    let field = solve_flat_fixture(&flat_fixture(p)).stage("flat fixture solve")?;
    let radii = geometric_radii(p.real("top_radius"), p.real("ratio"), p.int("count")).stage("radii")?;
    let study = flatness_decay_study(&field, p.real("window"), &radii).stage("flatness probe")?;
    sink.write("flatness_decay.csv", &study.report.to_csv())?;
    sink.write(
        "flatness_decay.gp",
        &gnuplot("flatness_decay.csv", "best-plane deviation", ("radius", "deviation"), "xy", &[(1, 2, "deviation")]),
    )?;
    let plane = flat_plane(&field)?;
    let mut center = vec![0.0; plane.dim()];
    center[0] = study.center[0];
    let sentinel = improvement_of_flatness_probe(&plane, &center, plane.t_end(), &radii).stage("plane probe")?;
    let exponent = study.report.fitted_exponent;
    Ok(vec![
        Assertion::new(
            "deviation exponent",
            exponent > p.real("min_exponent"),
            format!("exponent {exponent:.4} at ({:?}, t = {}) over {} radii", study.center, study.center_t, study.report.radii.len()),
        ),
        Assertion::new(
            "plane gives zero sentinel",
            sentinel.fitted_exponent == f64::INFINITY && sentinel.deviations.iter().all(|d| *d <= ZERO_DEVIATION),
            format!("exponent {}", sentinel.fitted_exponent),
        ),
        Assertion::new(
            "normal Hölder exponent positive",
            study.normals.exponent > 0.0,
            format!("exponent {:.4} from {} pairs", study.normals.exponent, study.normals.pairs),
        ),
    ])
}

fn harnack_decay(p: &Params, sink: &mut ArtifactSink) -> CliResult<Vec<Assertion>> {
    let delta = p.real("delta");
    let levels = p.int("levels");
    let field = solve_flat_fixture(&flat_fixture(p)).stage("flat fixture solve")?;
    let report = harnack_study(&field, levels, delta).stage("harnack probe")?;
    sink.write("harnack_decay.csv", &report.to_csv())?;
    sink.write(
        "harnack_decay.gp",
        &gnuplot("harnack_decay.csv", "oscillation of u - x_n", ("level", "oscillation"), "y", &[(1, 5, "oscillation")]),
    )?;
    let flat = harnack_study(&flat_plane(&field)?, levels, delta).stage("plane probe")?;
    Ok(vec![
        Assertion::new(
            "oscillation ratios below 1",
            report.ratios.iter().all(|r| *r < 1.0),
            format!("ratios {:?}", report.ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()),
        ),
        Assertion::new(
            "plane has zero oscillation",
            flat.oscillations.iter().all(|o| *o <= ZERO_DEVIATION),
            format!("max {:.3e}", flat.oscillations.iter().fold(0.0f64, |m, o| m.max(*o))),
        ),
    ])
}

fn barrier_certificate(p: &Params, sink: &mut ArtifactSink) -> CliResult<Vec<Assertion>> {
    let (delta, c0, a_plus, grid) = (p.real("delta"), p.real("c0"), p.real("a_plus"), p.int("grid"));
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for n in p.ints("dims") {
        for a_minus in p.reals("a_minus") {
            let spec = BarrierSpec::minimal(n, delta, c0, a_plus, a_minus).stage("barrier setup")?;
            let report = subsolution_check(&spec, grid).stage("subsolution check")?;
            let threshold = rate_threshold(n, a_plus, a_minus).stage("rate threshold")?;
            let below = BarrierSpec { k: p.real("below_factor") * threshold, ..spec };
            let failing = operator_scan(&below, grid, BellRegion::All).stage("below-threshold scan")?;
            out.push(Assertion::new(
                &format!("subsolution n={n} a_minus={a_minus}"),
                report.passed() && report.c > 0.0,
                format!("K = {:.6}, max operator {:.3e}, c = {:.3e}", report.k_used, report.max_operator_value, report.c),
            ));
            out.push(Assertion::new(
                &format!("below-threshold K fails n={n} a_minus={a_minus}"),
                failing.max_value > 0.0,
                format!("K = {:.6}, max operator {:.3e}", below.k, failing.max_value),
            ));
            rows.push(vec![
                n as f64,
                a_plus,
                a_minus,
                threshold,
                report.k_used,
                report.doublings as f64,
                report.max_operator_value,
                report.c,
                report.lower_bound_margin,
                below.k,
                failing.max_value,
            ]);
        }
    }
    sink.write(
        "barrier_certificate.csv",
        &csv_table("n,a_plus,a_minus,k_min,k_used,doublings,max_operator,c,margin,below_k,below_max_operator", rows),
    )?;
    Ok(out)
}

fn hodograph_roundtrip(p: &Params, sink: &mut ArtifactSink) -> CliResult<Vec<Assertion>> {
    let base = p.int("base_cells");
    let levels = hodograph_refinement(&[base, 2 * base], p.real("source_exponent")).stage("hodograph refinement")?;
    let csv = csv_table(
        "image_cells,k,round_trip,round_trip_bound,time,gradient,reciprocal,plus,minus,interface_jump",
        levels.iter().map(|l| {
            vec![
                l.image_cells as f64,
                l.k,
                l.round_trip,
                10.0 * l.k * l.k,
                l.identities.time,
                l.identities.gradient,
                l.identities.reciprocal,
                l.residuals.plus,
                l.residuals.minus,
                l.residuals.interface_jump,
            ]
        }),
    );
    sink.write("hodograph_roundtrip.csv", &csv)?;

    let mut out = Vec::new();
    let mut fixture_err: f64 = 0.0;
    for slope in [1.0, 2.0] {
        let field = GridField::from_fn(vec![-1.0, -1.0], vec![0.125, 0.125], vec![17, 17], -0.25, 0.125, 3, |x, _| slope * x[1])
            .stage("linear fixture")?;
        let window = ParabolicCylinder::new(vec![0.0, 0.0], 0.0, 0.5).stage("linear fixture")?;
        let patch = forward_transform(&field, &window, 0.5 * slope).stage("linear transform")?;
        fixture_err = fixture_err.max(round_trip_error(&patch));
        let h = &patch.h;
        for it in 0..h.nt() {
            for flat in 0..h.spatial_len() {
                let y = h.coords(flat);
                fixture_err = fixture_err.max((h.level(it)[flat] - y[1] / slope).abs());
            }
        }
    }
    out.push(Assertion::new("identity and linear fixtures exact", fixture_err <= 1e-12, format!("max error {fixture_err:.3e}")));
    for l in &levels {
        out.push(Assertion::new(
            &format!("round trip at {} cells", l.image_cells),
            l.round_trip <= 10.0 * l.k * l.k,
            format!("{:.3e} <= {:.3e}", l.round_trip, 10.0 * l.k * l.k),
        ));
    }
    let (a, b) = (&levels[0], &levels[1]);
    let order = |coarse: f64, fine: f64| (coarse / fine).ln() / (a.k / b.k).ln();
    let min_order = p.real("min_order");
    for (name, coarse, fine) in [
        ("time identity", a.identities.time, b.identities.time),
        ("gradient identity", a.identities.gradient, b.identities.gradient),
        ("positive-phase equation", a.residuals.plus, b.residuals.plus),
        ("negative-phase equation", a.residuals.minus, b.residuals.minus),
        ("interface jump", a.residuals.interface_jump, b.residuals.interface_jump),
    ] {
        let q = order(coarse, fine);
        out.push(Assertion::new(&format!("{name} order"), q >= min_order, format!("{coarse:.3e} -> {fine:.3e}, order {q:.3}")));
    }
    let mut coeff_err: f64 = 0.0;
    for p1 in [-2.0, -0.5, 0.0, 1.0, 3.0] {
        for pn in [-2.0, -0.3, 0.4, 1.0, 2.5] {
            let g = [p1, 0.5 * p1, pn];
            let b = coefficient_matrix(&g).stage("coefficient matrix")?.b;
            let a = transform_jacobian(&g).stage("transform jacobian")?.transpose();
            let scale = b.amax().max(1.0);
            coeff_err = coeff_err.max((&b - a.transpose() * &a).amax() / scale);
        }
    }
    let identity_err = (coefficient_matrix(&[0.0, 0.0, 1.0]).stage("coefficient matrix")?.b - DMatrix::identity(3, 3)).amax();
    out.push(Assertion::new(
        "coefficients equal AᵀA",
        coeff_err <= 1e-14 && identity_err <= 1e-14,
        format!("max relative entry error {coeff_err:.3e}, B(e_n) error {identity_err:.3e}"),
    ));
    Ok(out)
}
