//! Single-shot subcommands. Each returns the text printed on stdout; files are
//! written through [`crate::output::write_atomic`].

use crate::config::{parse_pairs, Kind, Param, Params, Range};
use crate::error::{CliError, CliResult, StageExt};
use crate::output::{write_atomic, Assertion};
use freetrans::barriers::{subsolution_check, BarrierSpec};
use freetrans::fbdiag::{
    extract_free_boundary, flatness, geometric_radii, harnack_decay_probe, improvement_of_flatness_probe,
    normal_holder_probe,
};
use freetrans::geometry::{fmt17, GridField, ParabolicCylinder};
use freetrans::hodograph::{forward_transform, transmission_residual};
use freetrans::pde::{
    solve_linear_transmission, solve_nonlinear, NonlinearGeometry, NonlinearOptions, PiecewiseQuadratic, Resolution,
    Solution, SpaceTimeBox, TransmissionSpec,
};
use freetrans::selfsim::{
    figure2_csv, figure2_gnuplot, profile_csv, profile_table, solve_alpha, RadialProfile, SelfSimilarProfile,
};
use freetrans::specfun::{scaled_zero_m, scaled_zero_u, HypergeomFn, HypergeomParams};
use freetrans::studies::flat_perturbation;
use nalgebra::DMatrix;
use std::fs;
use std::path::Path;

/// `M` or `U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Confluent {
    M,
    U,
}

impl Confluent {
    fn function(self) -> HypergeomFn {
        match self {
            Confluent::M => HypergeomFn::KummerM,
            Confluent::U => HypergeomFn::TricomiU,
        }
    }
}

pub fn specfun_eval(f: Confluent, a: f64, b: f64, z: f64) -> CliResult<String> {
    let v = f.function().eval(HypergeomParams::new(a, b), z).stage("evaluation")?;
    Ok(format!("{}\n", fmt17(v)))
}

/// Scaled zero of `M(−α/2, n/2, s²/4)` or `U(−α/2, n/2, ε s²/4)` in `s`.
pub fn specfun_zero(f: Confluent, alpha: f64, n: usize, eps: f64) -> CliResult<String> {
    let s = match f {
        Confluent::M => scaled_zero_m(alpha, n),
        Confluent::U => scaled_zero_u(alpha, n, eps),
    }
    .stage("zero search")?;
    Ok(format!("{}\n", fmt17(s)))
}

pub fn selfsim_match(n: usize, eps: f64, tol: f64) -> CliResult<String> {
    let m = solve_alpha(n, eps, tol).stage("matching")?;
    Ok(format!(
        "alpha = {}\ns_eps = {}\nresidual = {}\nbracket = [{}, {}]\n",
        fmt17(m.alpha),
        fmt17(m.s_eps),
        fmt17(m.residual),
        fmt17(m.bracket.0),
        fmt17(m.bracket.1)
    ))
}

pub fn selfsim_profile(n: usize, eps: f64, s_max: f64, ds: f64) -> CliResult<String> {
    let profile = SelfSimilarProfile::solve(n, eps, 1e-12).stage("matching")?;
    Ok(profile_csv(&profile_table(&profile, s_max, ds).stage("profile table")?))
}

/// Write `figure2.csv` and `figure2.gp` into `out_dir`.
pub fn selfsim_figure2(n: usize, eps: f64, samples: usize, out_dir: &Path) -> CliResult<String> {
    let profile = SelfSimilarProfile::solve(n, eps, 1e-12).stage("matching")?;
    let csv = out_dir.join("figure2.csv");
    let gp = out_dir.join("figure2.gp");
    write_atomic(&csv, &figure2_csv(&profile, samples).stage("figure2 table")?)?;
    write_atomic(&gp, &figure2_gnuplot(&profile, "figure2.csv"))?;
    Ok(format!(
        "alpha = {}\ns_eps = {}\nwrote {}\nwrote {}\n",
        fmt17(profile.alpha()),
        fmt17(profile.s_eps()),
        csv.display(),
        gp.display()
    ))
}

/// Which solver `pde solve` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeCase {
    Linear,
    Nonlinear,
}

fn pde_schema() -> Vec<Param> {
    let real = |key, range, default| Param { key, symbol: key, kind: Kind::Real(range), default };
    let int = |key, min, max, default| Param { key, symbol: key, kind: Kind::Int { min, max }, default };
    vec![
        int("dims", 1, 3, "2"),
        int("n", 3, 15, "3"),
        Param { key: "geometry", symbol: "geometry", kind: Kind::Word(&["cartesian", "radial"]), default: "cartesian" },
        real("a_plus", Range::POSITIVE, "1"),
        real("a_minus", Range::POSITIVE, "0.5"),
        real("reg_width", Range::POSITIVE, "0.05"),
        int("steps_x", 2, 1 << 20, "32"),
        int("steps_t", 1, 1 << 20, "32"),
        real("x_min", Range::ANY, "-1"),
        real("x_max", Range::ANY, "1"),
        real("t_start", Range::ANY, "-1"),
        real("t_end", Range::ANY, "0"),
        Param { key: "data", symbol: "data", kind: Kind::Word(&["plane", "quadratic", "selfsim", "flat"]), default: "plane" },
        real("delta", Range::left_open(0.0, 0.05), "0.01"),
    ]
}

/// Parse a `pde solve` configuration, collecting every error.
pub fn parse_pde_config(text: &str, case: PdeCase) -> CliResult<Params> {
    let (entries, mut errors) = parse_pairs(text);
    let p = Params::validate(&entries, &pde_schema(), &[], &mut errors);
    if !errors.is_empty() {
        return Err(CliError::Config(errors));
    }
    let (dims, data, radial) = (p.int("dims"), p.word("data"), p.word("geometry") == "radial");
    if p.real("x_min") >= p.real("x_max") {
        errors.push("need x_min < x_max".into());
    }
    if p.real("t_start") >= p.real("t_end") {
        errors.push("need t_start < t_end".into());
    }
    match case {
        PdeCase::Linear => {
            if radial {
                errors.push("the linear solver is Cartesian only".into());
            }
            if data == "selfsim" || data == "flat" {
                errors.push(format!("data = {data} needs --case nonlinear"));
            }
            if data == "quadratic" && dims != 2 {
                errors.push("data = quadratic needs dims = 2".into());
            }
        }
        PdeCase::Nonlinear => {
            if radial && (dims != 1 || p.real("x_min") != 0.0) {
                errors.push("geometry = radial needs dims = 1 and x_min = 0".into());
            }
            if !radial && dims == 3 {
                errors.push("the nonlinear solver supports dims 1 and 2".into());
            }
            if data == "quadratic" {
                errors.push("data = quadratic needs --case linear".into());
            }
            if data == "selfsim" && (!radial || p.real("a_plus") != 1.0 || p.real("a_minus") >= 1.0 || p.real("t_end") >= 0.0) {
                errors.push("data = selfsim needs geometry = radial, a_plus = 1, a_minus = ε ∈ (0,1) and t_end < 0".into());
            }
            if data == "flat" && dims != 2 {
                errors.push("data = flat needs dims = 2".into());
            }
            if p.real("a_plus") > 1.0 || p.real("a_minus") > 1.0 {
                errors.push("phase coefficients must lie in (0,1]".into());
            }
        }
    }
    if errors.is_empty() {
        Ok(p)
    } else {
        Err(CliError::Config(errors))
    }
}

fn quadratic_data(a_plus: f64, a_minus: f64) -> CliResult<(PiecewiseQuadratic, TransmissionSpec)> {
    let ap = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
    let am = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -1.5]);
    let identity = DMatrix::identity(2, 2);
    let (q, f_minus) =
        PiecewiseQuadratic::balanced(ap, am, vec![0.1, 1.0], 0.2, (a_plus, a_minus), &identity, 0.4).stage("quadratic data")?;
    let spec = TransmissionSpec::constant(a_plus, a_minus, identity, 0.4, f_minus).stage("quadratic data")?;
    Ok((q, spec))
}

/// Run `pde solve`; writes `solution.csv` and `runlog.jsonl` into `out_dir`.
pub fn pde_solve(case: PdeCase, config_text: &str, out_dir: &Path) -> CliResult<String> {
    let p = parse_pde_config(config_text, case)?;
    let dims = p.int("dims");
    let domain = SpaceTimeBox::new(vec![p.real("x_min"); dims], vec![p.real("x_max"); dims], p.real("t_start"), p.real("t_end"))
        .stage("domain")?;
    let res = Resolution::uniform(dims, p.int("steps_x"), p.int("steps_t"));
    let (a_plus, a_minus, reg) = (p.real("a_plus"), p.real("a_minus"), p.real("reg_width"));
    let delta = p.real("delta");
    let plane = move |x: &[f64], _t: f64| x[x.len() - 1];
    let profile = if p.word("data") == "selfsim" {
        Some(SelfSimilarProfile::solve(p.int("n"), a_minus, 1e-12).stage("matching")?)
    } else {
        None
    };
    let selfsim = |x: &[f64], t: f64| profile.as_ref().map_or(f64::NAN, |pr| pr.evaluate_u(&[x[0]], t).unwrap_or(f64::NAN));
    let flat = move |x: &[f64], t: f64| x[1] + delta * flat_perturbation(x, t);
    let quadratic = if p.word("data") == "quadratic" { Some(quadratic_data(a_plus, a_minus)?) } else { None };
    let quad_eval = |x: &[f64], t: f64| quadratic.as_ref().map_or(f64::NAN, |q| q.0.eval(x, t));

    let (sol, exact): (Solution, Option<&(dyn Fn(&[f64], f64) -> f64 + Sync)>) = match case {
        PdeCase::Linear => {
            let (spec, data): (TransmissionSpec, &(dyn Fn(&[f64], f64) -> f64 + Sync)) = match &quadratic {
                Some((_, spec)) => (spec.clone(), &quad_eval),
                None => (
                    TransmissionSpec::constant(a_plus, a_minus, DMatrix::identity(dims, dims), 0.0, 0.0).stage("transmission data")?,
                    &plane,
                ),
            };
            (solve_linear_transmission(&spec, &domain, data, &res, reg).stage("linear solve")?, Some(data))
        }
        PdeCase::Nonlinear => {
            let geometry = match (p.word("geometry"), dims) {
                ("radial", _) => NonlinearGeometry::Radial { n: p.int("n") },
                (_, 1) => NonlinearGeometry::Cartesian1,
                _ => NonlinearGeometry::Cartesian2,
            };
            let (data, exact): (&(dyn Fn(&[f64], f64) -> f64 + Sync), bool) = match p.word("data") {
                "selfsim" => (&selfsim, true),
                "flat" => (&flat, false),
                _ => (&plane, true),
            };
            let sol = solve_nonlinear(a_plus, a_minus, geometry, &domain, data, &res, reg, NonlinearOptions::default())
                .stage("nonlinear solve")?;
            (sol, exact.then_some(data))
        }
    };

    let csv_path = out_dir.join("solution.csv");
    let log_path = out_dir.join("runlog.jsonl");
    write_atomic(&csv_path, &sol.field.to_csv())?;
    let log: String = sol
        .log
        .iter()
        .map(|l| {
            serde_json::json!({"step": l.step, "time": l.time, "residual": l.residual, "iterations": l.iterations, "wall_seconds": l.wall_seconds})
                .to_string()
                + "\n"
        })
        .collect();
    write_atomic(&log_path, &log)?;
    let max_residual = sol.log.iter().map(|l| l.residual).fold(0.0, f64::max);
    let mut out = format!("steps = {}\nmax_residual = {}\n", sol.log.len(), fmt17(max_residual));
    if let Some(exact) = exact {
        let f = &sol.field;
        let err = (0..f.nt())
            .flat_map(|it| (0..f.spatial_len()).map(move |k| (it, k)))
            .map(|(it, k)| (f.level(it)[k] - exact(&f.coords(k), f.time(it))).abs())
            .fold(0.0, f64::max);
        out.push_str(&format!("sup_error = {}\n", fmt17(err)));
    }
    out.push_str(&format!("wrote {}\nwrote {}\n", csv_path.display(), log_path.display()));
    Ok(out)
}

/// Read a grid field written by [`GridField::to_csv`].
pub fn read_field(path: &Path) -> CliResult<GridField> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    GridField::from_csv(&text).stage(&format!("reading {}", path.display()))
}

/// Parse a comma-separated list of reals.
pub fn parse_list(raw: &str, what: &str) -> CliResult<Vec<f64>> {
    raw.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::config(format!("{what}: cannot parse {s:?} as a number"))))
        .collect()
}

/// Window `c1,...,cn,t,r` for an `n`-dimensional field.
pub fn parse_window(raw: &str, n: usize) -> CliResult<ParabolicCylinder> {
    let v = parse_list(raw, "--window")?;
    if v.len() != n + 2 {
        return Err(CliError::config(format!("--window needs {} values (center x1..x{n}, t, radius), got {}", n + 2, v.len())));
    }
    ParabolicCylinder::new(v[..n].to_vec(), v[n], v[n + 1]).stage("window")
}

/// Operations of the `fbdiag` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum FbdiagOp {
    Extract,
    Flatness { nu: Vec<f64> },
    Improve { ratio: f64, count: usize },
    Harnack { levels: usize, delta: f64 },
    Normals,
}

pub fn fbdiag(op: &FbdiagOp, field: &GridField, window: &ParabolicCylinder) -> CliResult<String> {
    match op {
        FbdiagOp::Extract => Ok(extract_free_boundary(field, window).stage("extraction")?.to_csv()),
        FbdiagOp::Flatness { nu } => {
            let d = flatness(field, window, nu).stage("flatness")?;
            Ok(format!("radius,deviation\n{},{}\n", fmt17(window.radius()), fmt17(d)))
        }
        FbdiagOp::Improve { ratio, count } => {
            let radii = geometric_radii(window.radius(), *ratio, *count).stage("radii")?;
            let report =
                improvement_of_flatness_probe(field, window.center_x(), window.center_t(), &radii).stage("improvement probe")?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("fitted exponent = {}", report.fitted_exponent);
            Ok(report.to_csv())
        }
        FbdiagOp::Harnack { levels, delta } => {
            Ok(harnack_decay_probe(field, window, *levels, *delta).stage("harnack probe")?.to_csv())
        }
        FbdiagOp::Normals => {
            let graph = extract_free_boundary(field, window).stage("extraction")?.with_normals(field.steps()).stage("normals")?;
            let fit = normal_holder_probe(&graph).stage("normal fit")?;
            Ok(format!("exponent,constant,pairs\n{},{},{}\n", fmt17(fit.exponent), fmt17(fit.constant), fit.pairs))
        }
    }
}

/// `barrier check`: the report text and whether the certificate holds.
pub fn barrier_check(n: usize, a_plus: f64, a_minus: f64, delta: f64, c0: f64, grid: usize) -> CliResult<(String, Assertion)> {
    let spec = BarrierSpec::minimal(n, delta, c0, a_plus, a_minus).stage("barrier setup")?;
    let report = subsolution_check(&spec, grid).stage("subsolution check")?;
    let passed = report.passed();
    let text = format!(
        "K_used = {}\nmax_operator_value = {}\npassed = {passed}\nc = {}\n",
        fmt17(report.k_used),
        fmt17(report.max_operator_value),
        fmt17(report.c)
    );
    Ok((text, Assertion::new("subsolution", passed, format!("max operator {:.3e}", report.max_operator_value))))
}

/// Default transform window: centered in the box at the final time, as
/// large as both the box and the time span allow.
pub fn default_window(field: &GridField) -> CliResult<ParabolicCylinder> {
    let n = field.dim();
    let center: Vec<f64> = (0..n).map(|d| 0.5 * (field.origin()[d] + field.axis_end(d))).collect();
    let half = (0..n).map(|d| 0.5 * (field.axis_end(d) - field.origin()[d])).fold(f64::INFINITY, f64::min);
    let radius = half.min((field.t_end() - field.t0()).sqrt());
    if radius <= 0.0 {
        return Err(CliError::config("field needs at least two nodes per axis and two time levels"));
    }
    ParabolicCylinder::new(center, field.t_end(), radius).stage("window")
}

pub fn hodograph_transform(field: &GridField, window: &ParabolicCylinder, lambda: f64) -> CliResult<String> {
    Ok(forward_transform(field, window, lambda).stage("hodograph transform")?.h.to_csv())
}

pub fn hodograph_verify(h: &GridField, a_plus: f64, a_minus: f64) -> CliResult<String> {
    let r = transmission_residual(h, a_plus, a_minus).stage("transmission residual")?;
    Ok(format!(
        "residual_plus = {}\nresidual_minus = {}\ninterface_jump = {}\nellipticity = [{}, {}]\n",
        fmt17(r.plus),
        fmt17(r.minus),
        fmt17(r.interface_jump),
        fmt17(r.ellipticity.0),
        fmt17(r.ellipticity.1)
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_zero() {
        assert_eq!(specfun_eval(Confluent::M, 0.0, 1.5, 3.0).unwrap().trim().parse::<f64>().unwrap(), 1.0);
        let s: f64 = specfun_zero(Confluent::M, 2.0, 3, 0.1).unwrap().trim().parse().unwrap();
        assert!((s - 6f64.sqrt()).abs() < 1e-10);
        let s: f64 = specfun_zero(Confluent::U, 2.0, 3, 0.1).unwrap().trim().parse().unwrap();
        assert!((s - 60f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn pde_config_collects_errors() {
        let err = parse_pde_config("dims = 2\ndims = 3\nsteps_x = many\n", PdeCase::Linear).unwrap_err();
        let CliError::Config(m) = err else { panic!() };
        assert_eq!(m.len(), 2, "{m:?}");
        let err = parse_pde_config("data = selfsim\n", PdeCase::Linear).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = parse_pde_config("data = flat\ndims = 1\n", PdeCase::Nonlinear).unwrap_err();
        assert!(err.to_string().contains("dims = 2"));
    }

    #[test]
    fn plane_is_reproduced_by_both_solvers() {
        let dir = tempfile::tempdir().unwrap();
        for case in [PdeCase::Linear, PdeCase::Nonlinear] {
            let out = pde_solve(case, "dims = 2\nsteps_x = 8\nsteps_t = 4\n", dir.path()).unwrap();
            let err: f64 = out.lines().find_map(|l| l.strip_prefix("sup_error = ")).unwrap().parse().unwrap();
            assert!(err < 1e-9, "{out}");
            let log = fs::read_to_string(dir.path().join("runlog.jsonl")).unwrap();
            assert_eq!(log.lines().count(), 4);
            let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
            assert!(first["residual"].is_number() && first["wall_seconds"].is_number());
        }
    }

    #[test]
    fn window_parsing() {
        let w = parse_window("0, 0.5, -0.25, 0.5", 2).unwrap();
        assert_eq!(w.center_x(), &[0.0, 0.5]);
        assert_eq!(w.radius(), 0.5);
        assert_eq!(parse_window("0,0,1", 2).unwrap_err().exit_code(), 2);
        assert_eq!(parse_window("0,x,0,1", 2).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn fbdiag_on_a_plane() {
        let field = GridField::from_fn(vec![-1.0, -1.0], vec![0.125, 0.125], vec![17, 17], -0.25, 0.125, 3, |x, _| x[1]).unwrap();
        let w = parse_window("0,0,0,0.9", 2).unwrap();
        let g = fbdiag(&FbdiagOp::Extract, &field, &w).unwrap();
        assert!(g.starts_with("x1,t,g\n"));
        let f = fbdiag(&FbdiagOp::Flatness { nu: vec![0.0, 1.0] }, &field, &w).unwrap();
        let dev: f64 = f.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert!(dev < 1e-15);
        let h = fbdiag(&FbdiagOp::Harnack { levels: 1, delta: 0.01 }, &field, &w).unwrap();
        assert!(h.starts_with("level,radius,lower,upper,oscillation"));
    }

    #[test]
    fn hodograph_identity_round_trip() {
        let field = GridField::from_fn(vec![-1.0, -1.0], vec![0.125, 0.125], vec![17, 17], -0.25, 0.125, 3, |x, _| x[1]).unwrap();
        let w = default_window(&field).unwrap();
        let h = GridField::from_csv(&hodograph_transform(&field, &w, 0.5).unwrap()).unwrap();
        for it in 0..h.nt() {
            for k in 0..h.spatial_len() {
                assert!((h.level(it)[k] - h.coords(k)[1]).abs() < 1e-12);
            }
        }
        let report = hodograph_verify(&h, 1.0, 0.5).unwrap();
        assert!(report.contains("interface_jump = 0"), "{report}");
    }

    #[test]
    fn barrier_report_lines() {
        let (text, a) = barrier_check(2, 1.0, 0.5, 0.01, 0.5, 12).unwrap();
        assert!(a.passed);
        for key in ["K_used", "max_operator_value", "passed = true", "c = "] {
            assert!(text.contains(key), "{text}");
        }
    }
}
