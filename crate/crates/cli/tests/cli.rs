use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn freetrans(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_freetrans"));
    cmd.args(args).current_dir(dir).env_remove("FREETRANS_THREADS");
    if let Some(t) = threads {
        cmd.env("FREETRANS_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn figure2_recipe_writes_artifacts_and_record() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "f2.conf", "experiment = figure2\nn = 3\neps = 0.1\noutput_dir = out\n");
    let o = freetrans(&["run", "f2.conf"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS figure2: branches share the zero"));
    let csv = fs::read_to_string(dir.path().join("out/figure2.csv")).unwrap();
    assert!(csv.starts_with("s,inner,outer,profile\n"));
    let gp = fs::read_to_string(dir.path().join("out/figure2.gp")).unwrap();
    assert!(gp.contains("plot 'figure2.csv'"));
    let log = fs::read_to_string(dir.path().join("out/runs.jsonl")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(rec["experiment"], "figure2");
    assert_eq!(rec["parameters"]["eps"], "0.1");
    assert_eq!(rec["artifacts"].as_array().unwrap().len(), 2);
    assert!(rec["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn configuration_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.conf", "experiment = figure2\neps = 1.5\neps = 0.2\nwhat = 3\n");
    let o = freetrans(&["run", "bad.conf"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("ε ∈ (0,1)"), "{err}");
    assert!(err.contains("duplicate key `eps`") && err.contains("line 3") && err.contains("line 2"), "{err}");
    assert!(err.contains("unknown key `what`"), "{err}");

    let o = freetrans(&["run", "missing.conf"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
    let o = freetrans(&["selfsim", "match", "--n", "3", "--eps", "1.5"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = freetrans(&["specfun", "eval", "--fn", "Q", "--a", "1", "--b", "1", "--z", "1"], dir.path(), None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "tight.conf",
        "experiment = selfsim_evolution\ncells = 128\ntime_steps = 16\nmax_error = 1e-12\noutput_dir = out\n",
    );
    let o = freetrans(&["run", "tight.conf"], dir.path(), None);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("FAIL selfsim_evolution: sup error"));
    let rec: serde_json::Value =
        serde_json::from_str(fs::read_to_string(dir.path().join("out/runs.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(rec["assertions"][0]["passed"], false);
}

#[test]
fn numeric_failure_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x1,x2,t,value\n");
    for t in [0.0, 0.5] {
        for i in 0..5 {
            for j in 0..5 {
                let (x1, x2) = (i as f64 * 0.25, j as f64 * 0.25);
                csv.push_str(&format!("{x1},{x2},{t},{}\n", -x2));
            }
        }
    }
    write(dir.path(), "dec.csv", &csv);
    let o = freetrans(&["hodograph", "transform", "--field", "dec.csv", "--lambda", "0.5"], dir.path(), None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("hodograph transform"));
}

#[test]
fn thread_override_is_validated_and_results_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "experiment = harnack_decay\ncells = 32\ntime_steps = 8\nreg_width = 0.1\n";
    write(dir.path(), "one.conf", &format!("{cfg}output_dir = one\n"));
    write(dir.path(), "four.conf", &format!("{cfg}output_dir = four\n"));
    let o = freetrans(&["run", "one.conf"], dir.path(), Some("1"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = freetrans(&["run", "four.conf"], dir.path(), Some("4"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let a = fs::read(dir.path().join("one/harnack_decay.csv")).unwrap();
    let b = fs::read(dir.path().join("four/harnack_decay.csv")).unwrap();
    assert_eq!(a, b);

    let o = freetrans(&["run", "one.conf"], dir.path(), Some("zero"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FREETRANS_THREADS"));
}

#[test]
fn specfun_and_selfsim_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = freetrans(&["specfun", "eval", "--fn", "M", "--a", "-1", "--b", "1.5", "--z", "1.5"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!(v.abs() < 1e-14, "M(-1, 3/2, 3/2) = 1 - z/b vanishes, got {v}");

    let o = freetrans(&["specfun", "zero", "--fn", "U", "--alpha", "2", "--n", "5", "--eps", "0.5"], dir.path(), None);
    let s: f64 = stdout(&o).trim().parse().unwrap();
    assert!((s - 20f64.sqrt()).abs() < 1e-9);

    let o = freetrans(&["selfsim", "match", "--n", "3", "--eps", "0.1"], dir.path(), None);
    let text = stdout(&o);
    let alpha: f64 = text.lines().find_map(|l| l.strip_prefix("alpha = ")).unwrap().parse().unwrap();
    assert!((alpha - 0.69544026).abs() < 1e-7, "{text}");

    let o = freetrans(&["selfsim", "profile", "--n", "3", "--eps", "0.1", "--smax", "5", "--ds", "0.5"], dir.path(), None);
    let text = stdout(&o);
    assert!(text.starts_with("s,f,fprime,branch\n"));
    assert_eq!(text.lines().count(), 12);

    let o = freetrans(&["selfsim", "figure2", "--n", "3", "--eps", "0.1", "--out-dir", "fig"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("fig/figure2.csv").exists() && dir.path().join("fig/figure2.gp").exists());
}

#[test]
fn pde_solve_then_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "flat.conf",
        "dims = 2\ndata = flat\na_minus = 0.5\nsteps_x = 16\nsteps_t = 8\nreg_width = 0.1\ndelta = 0.01\n",
    );
    let o = freetrans(&["pde", "solve", "--case", "nonlinear", "--config", "flat.conf", "--out-dir", "run"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let log = fs::read_to_string(dir.path().join("run/runlog.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 8);
    let field = dir.path().join("run/solution.csv");
    let field = field.to_str().unwrap();

    let o = freetrans(&["fbdiag", "extract", "--field", field, "--window", "0,0,0,0.8"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let graph = stdout(&o);
    assert!(graph.starts_with("x1,t,g\n") && graph.lines().count() > 10);

    let o = freetrans(&["fbdiag", "harnack", "--field", field, "--window", "0,0,0,1", "--levels", "1", "--delta", "0.02"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);

    let o = freetrans(&["fbdiag", "flatness", "--field", field, "--window", "0,0,0,0.5", "--nu", "0,1"], dir.path(), None);
    let dev: f64 = stdout(&o).lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(dev > 0.0 && dev <= 0.011, "{dev}");

    let o = freetrans(&["hodograph", "transform", "--field", field, "--lambda", "0.5", "--out", "h.csv"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = freetrans(&["hodograph", "verify", "--patch", "h.csv", "--a-plus", "1", "--a-minus", "0.5"], dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("interface_jump = "));
}

#[test]
fn barrier_check_prints_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["barrier", "check", "--n", "3", "--a-plus", "1", "--a-minus", "0.5", "--delta", "0.01", "--c0", "0.5", "--grid", "10"];
    let o = freetrans(&args, dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("K_used = ") && text.contains("passed = true"), "{text}");
    let c: f64 = text.lines().find_map(|l| l.strip_prefix("c = ")).unwrap().parse().unwrap();
    assert!(c > 0.0);
}
