//! Line-oriented `key = value` configuration files.
//!
//! Blank lines and text after `#` are ignored. Every problem in a file is
//! collected before reporting, so one run shows all of them.

use crate::error::{CliError, CliResult};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// A raw value and the 1-based line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// Split `text` into entries plus messages for malformed lines and
/// duplicate keys; the first occurrence of a duplicate is kept.
pub fn parse_pairs(text: &str) -> (BTreeMap<String, Entry>, Vec<String>) {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(format!("line {line}: expected `key = value`, got {content:?}"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            errors.push(format!("line {line}: missing key before `=`"));
            continue;
        }
        if let Some(first) = entries.get(key) {
            errors.push(format!("line {line}: duplicate key `{key}` (first set on line {})", first.line));
            continue;
        }
        entries.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    (entries, errors)
}

/// A real interval with open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Range {
    pub const UNIT_OPEN: Range = Range { lo: 0.0, hi: 1.0, lo_closed: false, hi_closed: false };
    pub const UNIT_HALF_OPEN: Range = Range { lo: 0.0, hi: 1.0, lo_closed: false, hi_closed: true };
    pub const POSITIVE: Range = Range { lo: 0.0, hi: f64::INFINITY, lo_closed: false, hi_closed: false };
    pub const ANY: Range = Range { lo: f64::NEG_INFINITY, hi: f64::INFINITY, lo_closed: false, hi_closed: false };

    pub const fn open(lo: f64, hi: f64) -> Self {
        Range { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub const fn closed(lo: f64, hi: f64) -> Self {
        Range { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub const fn left_open(lo: f64, hi: f64) -> Self {
        Range { lo, hi, lo_closed: false, hi_closed: true }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed { v >= self.lo } else { v > self.lo };
        let below = if self.hi_closed { v <= self.hi } else { v < self.hi };
        v.is_finite() && above && below
    }
}

fn fmt_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "∞".into()
    } else if v == f64::NEG_INFINITY {
        "−∞".into()
    } else {
        format!("{v}")
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_closed { '[' } else { '(' };
        let close = if self.hi_closed { ']' } else { ')' };
        write!(f, "{open}{},{}{close}", fmt_bound(self.lo), fmt_bound(self.hi))
    }
}

/// Value type of a parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Int { min: i64, max: i64 },
    Real(Range),
    /// Comma-separated reals.
    Reals(Range),
    /// Comma-separated integers.
    Ints { min: i64, max: i64 },
    /// One of a fixed set of words.
    Word(&'static [&'static str]),
}

/// A documented parameter with its default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Param {
    pub key: &'static str,
    /// Symbol used in range messages.
    pub symbol: &'static str,
    pub kind: Kind,
    pub default: &'static str,
}

const fn real(key: &'static str, symbol: &'static str, range: Range, default: &'static str) -> Param {
    Param { key, symbol, kind: Kind::Real(range), default }
}

const fn int(key: &'static str, min: i64, max: i64, default: &'static str) -> Param {
    Param { key, symbol: key, kind: Kind::Int { min, max }, default }
}

fn parse_int(key: &str, line: usize, raw: &str, min: i64, max: i64) -> Result<i64, String> {
    let v: i64 = raw.parse().map_err(|_| format!("line {line}: `{key}` expects an integer, got {raw:?}"))?;
    if v < min || v > max {
        let hi = if max == i64::MAX { "∞)".to_string() } else { format!("{max}]") };
        return Err(format!("line {line}: {key} = {v} is out of range: {key} ∈ [{min},{hi}"));
    }
    Ok(v)
}

fn parse_real(p: &Param, line: usize, raw: &str, range: Range) -> Result<f64, String> {
    let v: f64 = raw.parse().map_err(|_| format!("line {line}: `{}` expects a number, got {raw:?}", p.key))?;
    if !range.contains(v) {
        return Err(format!("line {line}: {} = {raw} is out of range: {} ∈ {range}", p.key, p.symbol));
    }
    Ok(v)
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Check one raw value against its parameter; `line` 0 marks a default.
fn check_value(p: &Param, line: usize, raw: &str) -> Vec<String> {
    match p.kind {
        Kind::Int { min, max } => parse_int(p.key, line, raw, min, max).err().into_iter().collect(),
        Kind::Real(range) => parse_real(p, line, raw, range).err().into_iter().collect(),
        Kind::Reals(range) => {
            let items: Vec<&str> = split_list(raw).collect();
            if items.is_empty() {
                return vec![format!("line {line}: `{}` expects a comma-separated list of numbers", p.key)];
            }
            items.iter().filter_map(|s| parse_real(p, line, s, range).err()).collect()
        }
        Kind::Ints { min, max } => {
            let items: Vec<&str> = split_list(raw).collect();
            if items.is_empty() {
                return vec![format!("line {line}: `{}` expects a comma-separated list of integers", p.key)];
            }
            items.iter().filter_map(|s| parse_int(p.key, line, s, min, max).err()).collect()
        }
        Kind::Word(options) => {
            if options.contains(&raw) {
                Vec::new()
            } else {
                vec![format!("line {line}: `{}` must be one of {}, got {raw:?}", p.key, options.join(", "))]
            }
        }
    }
}

/// Typed view of validated parameters, defaults filled in.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    /// Validate `entries` against `schema`; keys in `passthrough` are
    /// accepted without checks and kept out of the parameter map.
    pub fn validate(
        entries: &BTreeMap<String, Entry>,
        schema: &[Param],
        passthrough: &[&str],
        errors: &mut Vec<String>,
    ) -> Self {
        let mut values = BTreeMap::new();
        for (key, entry) in entries {
            if !passthrough.contains(&key.as_str()) && !schema.iter().any(|p| p.key == key) {
                let known: Vec<&str> = schema.iter().map(|p| p.key).collect();
                errors.push(format!("line {}: unknown key `{key}` (expected one of: {})", entry.line, known.join(", ")));
            }
        }
        for p in schema {
            let (raw, line) = match entries.get(p.key) {
                Some(e) => (e.value.as_str(), e.line),
                None => (p.default, 0),
            };
            errors.extend(check_value(p, line, raw));
            values.insert(p.key.to_string(), raw.to_string());
        }
        Self { values }
    }

    pub fn snapshot(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("parameter `{key}` is not in the schema"))
    }

    pub fn real(&self, key: &str) -> f64 {
        self.raw(key).parse().unwrap_or_else(|_| panic!("parameter `{key}` was validated as a number"))
    }

    pub fn int(&self, key: &str) -> usize {
        self.raw(key).parse().unwrap_or_else(|_| panic!("parameter `{key}` was validated as an integer"))
    }

    pub fn reals(&self, key: &str) -> Vec<f64> {
        split_list(self.raw(key)).map(|s| s.parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn ints(&self, key: &str) -> Vec<usize> {
        split_list(self.raw(key)).map(|s| s.parse().unwrap_or(0)).collect()
    }

    pub fn word(&self, key: &str) -> &str {
        self.raw(key)
    }
}

/// The named experiment recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    Figure2,
    CounterexampleSweep,
    LinearQuadratic,
    SelfsimEvolution,
    FlatnessDecay,
    HarnackDecay,
    BarrierCertificate,
    HodographRoundtrip,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Figure2,
        Experiment::CounterexampleSweep,
        Experiment::LinearQuadratic,
        Experiment::SelfsimEvolution,
        Experiment::FlatnessDecay,
        Experiment::HarnackDecay,
        Experiment::BarrierCertificate,
        Experiment::HodographRoundtrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Figure2 => "figure2",
            Experiment::CounterexampleSweep => "counterexample_sweep",
            Experiment::LinearQuadratic => "linear_quadratic",
            Experiment::SelfsimEvolution => "selfsim_evolution",
            Experiment::FlatnessDecay => "flatness_decay",
            Experiment::HarnackDecay => "harnack_decay",
            Experiment::BarrierCertificate => "barrier_certificate",
            Experiment::HodographRoundtrip => "hodograph_roundtrip",
        }
    }

    pub fn params(self) -> Vec<Param> {
        const DIM: Param = int("n", 3, 15, "3");
        const EPS: Param = real("eps", "ε", Range::UNIT_OPEN, "0.1");
        const TOL: Param = real("tol", "tol", Range::open(0.0, 1e-3), "1e-12");
        let flat_fixture = [
            real("a_plus", "a₊", Range::UNIT_HALF_OPEN, "1"),
            real("a_minus", "a₋", Range::UNIT_HALF_OPEN, "0.5"),
            real("delta", "δ", Range::left_open(0.0, 0.05), "0.01"),
            int("cells", 8, 1024, "64"),
            int("time_steps", 2, 4096, "32"),
            real("reg_width", "reg_width", Range::POSITIVE, "0.04"),
        ];
        match self {
            Experiment::Figure2 => vec![DIM, EPS, TOL, int("samples", 10, 1_000_000, "601")],
            Experiment::CounterexampleSweep => vec![
                DIM,
                TOL,
                Param {
                    key: "factors",
                    symbol: "ε/eps0",
                    kind: Kind::Reals(Range::POSITIVE),
                    default: "0.0625,0.125,0.25,0.5,0.9,1.1",
                },
            ],
            Experiment::LinearQuadratic => {
                vec![int("cells", 4, 512, "64"), real("reg_factor", "reg_width/h", Range::POSITIVE, "2")]
            }
            Experiment::SelfsimEvolution => vec![
                DIM,
                EPS,
                int("cells", 16, 1 << 20, "2048"),
                int("time_steps", 2, 1 << 20, "512"),
                real("reg_factor", "reg_width/h", Range::POSITIVE, "2"),
                real("radius", "R", Range::POSITIVE, "4"),
                real("t_start", "t_start", Range::open(f64::NEG_INFINITY, 0.0), "-1"),
                real("t_end", "t_end", Range::open(f64::NEG_INFINITY, 0.0), "-0.5"),
                real("r_min", "r_min", Range { lo: 0.0, hi: f64::INFINITY, lo_closed: true, hi_closed: false }, "0.05"),
                real("r_max", "r_max", Range::POSITIVE, "2"),
                real("max_error", "max_error", Range::POSITIVE, "0.02"),
                real("min_ratio", "min_ratio", Range::POSITIVE, "1.5"),
            ],
            Experiment::FlatnessDecay => {
                let mut p = flat_fixture.to_vec();
                p.extend([
                    real("window", "window", Range::left_open(0.0, 1.0), "0.5"),
                    real("top_radius", "r₀", Range::left_open(0.0, 1.0), "0.5"),
                    real("ratio", "ratio", Range::UNIT_OPEN, "0.5"),
                    int("count", 2, 64, "5"),
                    real("min_exponent", "min_exponent", Range::POSITIVE, "1.05"),
                ]);
                p
            }
            Experiment::HarnackDecay => {
                let mut p = flat_fixture.to_vec();
                p.push(int("levels", 1, 16, "3"));
                p
            }
            Experiment::BarrierCertificate => vec![
                Param { key: "dims", symbol: "n", kind: Kind::Ints { min: 2, max: 3 }, default: "2,3" },
                real("a_plus", "a₊", Range::UNIT_HALF_OPEN, "1"),
                Param { key: "a_minus", symbol: "a₋", kind: Kind::Reals(Range::UNIT_HALF_OPEN), default: "0.25,0.5,1" },
                real("delta", "δ", Range::left_open(0.0, 0.05), "0.01"),
                real("c0", "c₀", Range::UNIT_OPEN, "0.5"),
                int("grid", 2, 2000, "24"),
                real("below_factor", "K/K_min", Range::UNIT_OPEN, "0.1"),
            ],
            Experiment::HodographRoundtrip => vec![
                int("base_cells", 4, 64, "6"),
                real("source_exponent", "source_exponent", Range::closed(1.0, 3.0), "2"),
                real("min_order", "min_order", Range::POSITIVE, "0.9"),
            ],
        }
    }

    /// Whether the recipe writes a gnuplot script.
    pub fn plot_bearing(self) -> bool {
        !matches!(self, Experiment::BarrierCertificate | Experiment::HodographRoundtrip)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment {s:?} (expected one of: {})", names.join(", "))
        })
    }
}

/// A validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: Params,
    pub output_dir: PathBuf,
}

pub const DEFAULT_OUTPUT_DIR: &str = "freetrans-output";

/// Parse and validate an experiment file, collecting every error.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let (entries, mut errors) = parse_pairs(text);
    let experiment = match entries.get("experiment") {
        None => {
            errors.push("missing key `experiment`".to_string());
            None
        }
        Some(e) => match e.value.parse::<Experiment>() {
            Ok(x) => Some(x),
            Err(msg) => {
                errors.push(format!("line {}: {msg}", e.line));
                None
            }
        },
    };
    let output_dir = entries.get("output_dir").map_or(DEFAULT_OUTPUT_DIR, |e| e.value.as_str());
    if output_dir.is_empty() {
        errors.push(format!("line {}: `output_dir` is empty", entries["output_dir"].line));
    }
    let Some(experiment) = experiment else {
        return Err(CliError::Config(errors));
    };
    let params = Params::validate(&entries, &experiment.params(), &["experiment", "output_dir"], &mut errors);
    if errors.is_empty() {
        cross_checks(experiment, &params, &entries, &mut errors);
    }
    if errors.is_empty() {
        Ok(ExperimentConfig { experiment, params, output_dir: PathBuf::from(output_dir) })
    } else {
        Err(CliError::Config(errors))
    }
}

fn line_of(entries: &BTreeMap<String, Entry>, key: &str) -> String {
    entries.get(key).map_or_else(|| "default".to_string(), |e| format!("line {}", e.line))
}

fn cross_checks(experiment: Experiment, p: &Params, entries: &BTreeMap<String, Entry>, errors: &mut Vec<String>) {
    match experiment {
        Experiment::SelfsimEvolution => {
            if p.real("t_start") >= p.real("t_end") {
                errors.push(format!("{}: need t_start < t_end", line_of(entries, "t_start")));
            }
            if p.real("r_min") >= p.real("r_max") || p.real("r_max") > p.real("radius") {
                errors.push(format!("{}: need r_min < r_max <= radius", line_of(entries, "r_max")));
            }
        }
        Experiment::CounterexampleSweep => {
            let f = p.reals("factors");
            if !f.iter().any(|&v| v < 1.0) || !f.iter().any(|&v| v > 1.0) {
                errors.push(format!("{}: factors must include values below and above 1", line_of(entries, "factors")));
            }
        }
        Experiment::FlatnessDecay => {
            if p.real("top_radius") > p.real("window") + 0.5 {
                errors.push(format!("{}: top_radius must not exceed window + 0.5", line_of(entries, "top_radius")));
            }
        }
        _ => {}
    }
}
