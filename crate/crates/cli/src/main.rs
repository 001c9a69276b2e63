//! Scenario runner over the library crate: one subcommand per pipeline,
//! flag-parsed parameters, structured results emitted as JSON or CSV.
//!
//! Grammar: `mphys <scenario> [--key value]... [--format json|csv] [--out PATH]
//! [--seed N]`. Exit code 0 on success, 1 when the scenario reports
//! pass = false (and on output I/O failures), 2 on usage or parse errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

mod scenarios;

#[derive(Debug)]
pub enum CliError {
    /// Wrong invocation shape (no scenario, unknown scenario). Exit 2.
    Usage(String),
    /// A flag is malformed or carries an unusable value. Exit 2.
    Parse(String),
    /// The result could not be written or is unserializable. Exit 1.
    Io(String),
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Parse(m) | CliError::Io(m) => m,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Scalar(f64),
    Array(Vec<f64>),
}

/// One scenario's structured result. `csv_order` names the array outputs
/// that become CSV columns, in order; it is not serialized itself.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, Output>,
    pub pass: Option<bool>,
    pub runtime_ms: u64,
    pub csv_order: Vec<&'static str>,
}

impl ScenarioResult {
    pub fn new(name: &str) -> Self {
        ScenarioResult {
            name: name.to_string(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            pass: None,
            runtime_ms: 0,
            csv_order: Vec::new(),
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) {
        self.inputs.insert(key.to_string(), value.to_string());
    }

    pub fn scalar(&mut self, key: &str, value: f64) {
        self.outputs.insert(key.to_string(), Output::Scalar(value));
    }

    pub fn array(&mut self, key: &str, values: Vec<f64>) {
        self.outputs.insert(key.to_string(), Output::Array(values));
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() {
            return Err(CliError::Io("internal: result has an empty name".into()));
        }
        for (key, out) in &self.outputs {
            let bad = match out {
                Output::Scalar(v) => !v.is_finite(),
                Output::Array(vs) => vs.iter().any(|v| !v.is_finite()),
            };
            if bad {
                return Err(CliError::Io(format!(
                    "internal: output '{key}' contains a non-finite number"
                )));
            }
        }
        Ok(())
    }
}

/// Parsed scenario flags. Getters apply defaults and turn bad values into
/// parse errors that name the offending flag.
#[derive(Debug)]
pub struct Flags {
    values: BTreeMap<String, String>,
    seed: Option<u64>,
}

impl Flags {
    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => match raw.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(CliError::Parse(format!(
                    "flag --{key}: cannot read '{raw}' as a finite number"
                ))),
            },
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw.trim().parse::<usize>().map_err(|_| {
                CliError::Parse(format!(
                    "flag --{key}: cannot read '{raw}' as a nonnegative integer"
                ))
            }),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.values
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    /// Only called by randomized scenarios; presence is enforced up front.
    pub fn seed(&self) -> u64 {
        self.seed.expect("seed presence is checked before dispatch")
    }
}

struct Scenario {
    name: &'static str,
    keys: &'static [&'static str],
    randomized: bool,
    summary: &'static str,
    run: fn(&Flags) -> Result<ScenarioResult, CliError>,
}

const REGISTRY: &[Scenario] = &[
    Scenario {
        name: "heat",
        keys: &["dim", "N", "D", "t", "init"],
        randomized: false,
        summary: "periodic heat evolution against the exact decaying mode",
        run: scenarios::heat,
    },
    Scenario {
        name: "schroedinger",
        keys: &["N", "t"],
        randomized: true,
        summary: "free Schroedinger step on a random state; norm drift",
        run: scenarios::schroedinger,
    },
    Scenario {
        name: "wave",
        keys: &["L", "t", "samples", "panels"],
        randomized: false,
        summary: "vibrating string against the exact standing wave",
        run: scenarios::wave,
    },
    Scenario {
        name: "maxwell",
        keys: &["N", "t", "step"],
        randomized: true,
        summary: "source-free Maxwell evolution of a random solenoidal field",
        run: scenarios::maxwell,
    },
    Scenario {
        name: "lorenz",
        keys: &["sigma", "b", "r"],
        randomized: false,
        summary: "stability report for the Lorenz system at the origin",
        run: scenarios::lorenz,
    },
    Scenario {
        name: "liouville",
        keys: &["system", "t", "step", "q0", "p0"],
        randomized: false,
        summary: "phase-space volume along a Hamiltonian flow",
        run: scenarios::liouville,
    },
    Scenario {
        name: "bands",
        keys: &["q1", "q2", "nk"],
        randomized: false,
        summary: "two-band honeycomb Bloch energies over a k-grid",
        run: scenarios::bands,
    },
    Scenario {
        name: "birman-schwinger",
        keys: &["lambda", "depth", "width"],
        randomized: false,
        summary: "bound-state energy of a shallow square well, three routes",
        run: scenarios::birman_schwinger,
    },
    Scenario {
        name: "minmax",
        keys: &["dim", "trials"],
        randomized: true,
        summary: "Rayleigh, Temple, and Galerkin bounds on a random matrix",
        run: scenarios::minmax,
    },
    Scenario {
        name: "greens-interval",
        keys: &["quad", "samples"],
        randomized: false,
        summary: "Poisson solve on the unit interval via the exact kernel",
        run: scenarios::greens_interval,
    },
    Scenario {
        name: "greens-rectangle",
        keys: &["nx", "ny"],
        randomized: false,
        summary: "Dirichlet Poisson solve on the unit square, two paths",
        run: scenarios::greens_rectangle,
    },
    Scenario {
        name: "helmholtz",
        keys: &["N"],
        randomized: true,
        summary: "gradient/divergence-free splitting of a random 3D field",
        run: scenarios::helmholtz,
    },
    Scenario {
        name: "gl-descent",
        keys: &["m", "kappa", "step", "iters", "tol"],
        randomized: true,
        summary: "gradient descent on the Ginzburg-Landau energy",
        run: scenarios::gl_descent,
    },
    Scenario {
        name: "bifurcation",
        keys: &["preset", "lo", "hi", "points", "dim"],
        randomized: false,
        summary: "kernel scan of a parameterized linearization",
        run: scenarios::bifurcation,
    },
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug)]
struct Invocation {
    scenario: usize,
    flags: Flags,
    format: Format,
    out: Option<PathBuf>,
}

fn scenario_list() -> String {
    REGISTRY
        .iter()
        .map(|s| s.name)
        .collect::<Vec<_>>()
        .join(", ")
}

fn usage_text() -> String {
    let mut s = String::new();
    s.push_str("usage: mphys <scenario> [--key value]... [--format json|csv] [--out PATH] [--seed N]\n\n");
    s.push_str("scenarios:\n");
    for sc in REGISTRY {
        let seed = if sc.randomized { " (requires --seed)" } else { "" };
        let _ = writeln!(s, "  {:<17} {}{}", sc.name, sc.summary, seed);
        let _ = writeln!(s, "  {:<17}   flags: {}", "", sc.keys.join(", "));
    }
    s.push_str("\nexit codes: 0 success, 1 scenario reports pass=false, 2 usage or parse error\n");
    s
}

/// Returns None when help was requested.
fn parse_args(argv: &[String]) -> Result<Option<Invocation>, CliError> {
    let Some(name) = argv.first() else {
        return Err(CliError::Usage(format!(
            "missing scenario\n\n{}",
            usage_text()
        )));
    };
    if name == "--help" || name == "-h" || name == "help" {
        return Ok(None);
    }
    let Some(scenario) = REGISTRY.iter().position(|s| s.name == name) else {
        return Err(CliError::Usage(format!(
            "unknown scenario '{name}'; registered scenarios: {}",
            scenario_list()
        )));
    };
    let entry = &REGISTRY[scenario];

    let mut values = BTreeMap::new();
    let mut format = Format::Json;
    let mut seen_format = false;
    let mut out: Option<PathBuf> = None;
    let mut seed: Option<u64> = None;

    let mut it = argv[1..].iter();
    while let Some(token) = it.next() {
        let Some(key) = token.strip_prefix("--") else {
            return Err(CliError::Parse(format!(
                "unexpected argument '{token}'; flags look like --key value"
            )));
        };
        if key.is_empty() {
            return Err(CliError::Parse("empty flag '--'".into()));
        }
        let Some(value) = it.next() else {
            return Err(CliError::Parse(format!("flag --{key} is missing a value")));
        };
        match key {
            "format" => {
                if seen_format {
                    return Err(CliError::Parse("duplicate flag --format".into()));
                }
                seen_format = true;
                format = match value.as_str() {
                    "json" => Format::Json,
                    "csv" => Format::Csv,
                    other => {
                        return Err(CliError::Parse(format!(
                            "flag --format: expected 'json' or 'csv', got '{other}'"
                        )))
                    }
                };
            }
            "out" => {
                if out.is_some() {
                    return Err(CliError::Parse("duplicate flag --out".into()));
                }
                out = Some(PathBuf::from(value));
            }
            "seed" => {
                if seed.is_some() {
                    return Err(CliError::Parse("duplicate flag --seed".into()));
                }
                seed = Some(value.trim().parse::<u64>().map_err(|_| {
                    CliError::Parse(format!(
                        "flag --seed: cannot read '{value}' as a nonnegative integer"
                    ))
                })?);
            }
            key if entry.keys.contains(&key) => {
                if values.insert(key.to_string(), value.clone()).is_some() {
                    return Err(CliError::Parse(format!("duplicate flag --{key}")));
                }
            }
            other => {
                return Err(CliError::Parse(format!(
                    "flag --{other} is not accepted by scenario '{}'; accepted flags: {}",
                    entry.name,
                    entry.keys.join(", ")
                )));
            }
        }
    }

    if entry.randomized && seed.is_none() {
        return Err(CliError::Parse(format!(
            "scenario '{}' draws random data; --seed is required",
            entry.name
        )));
    }

    Ok(Some(Invocation {
        scenario,
        flags: Flags { values, seed },
        format,
        out,
    }))
}

/// 17 significant digits, enough for an exact f64 round trip, and a valid
/// JSON number.
fn fmt_number(v: f64) -> String {
    format!("{:.16e}", v)
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn render_json(r: &ScenarioResult) -> String {
    let mut s = String::new();
    s.push_str("{\"name\":\"");
    s.push_str(&json_escape(&r.name));
    s.push_str("\",\"inputs\":{");
    for (i, (k, v)) in r.inputs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "\"{}\":\"{}\"", json_escape(k), json_escape(v));
    }
    s.push_str("},\"outputs\":{");
    for (i, (k, out)) in r.outputs.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "\"{}\":", json_escape(k));
        match out {
            Output::Scalar(v) => s.push_str(&fmt_number(*v)),
            Output::Array(vs) => {
                s.push('[');
                for (j, v) in vs.iter().enumerate() {
                    if j > 0 {
                        s.push(',');
                    }
                    s.push_str(&fmt_number(*v));
                }
                s.push(']');
            }
        }
    }
    s.push_str("},\"pass\":");
    s.push_str(match r.pass {
        None => "null",
        Some(true) => "true",
        Some(false) => "false",
    });
    let _ = write!(s, ",\"runtime_ms\":{}}}", r.runtime_ms);
    s.push('\n');
    s
}

/// Array outputs become columns (declared order first, otherwise sorted);
/// with no arrays the scalars form a single-row table.
fn render_csv(r: &ScenarioResult) -> Result<String, CliError> {
    let columns: Vec<&str> = if !r.csv_order.is_empty() {
        r.csv_order.to_vec()
    } else {
        r.outputs
            .iter()
            .filter(|(_, v)| matches!(v, Output::Array(_)))
            .map(|(k, _)| k.as_str())
            .collect()
    };

    let mut s = String::new();
    if columns.is_empty() {
        let scalars: Vec<(&str, f64)> = r
            .outputs
            .iter()
            .filter_map(|(k, v)| match v {
                Output::Scalar(x) => Some((k.as_str(), *x)),
                Output::Array(_) => None,
            })
            .collect();
        if scalars.is_empty() {
            return Ok(s);
        }
        s.push_str(&scalars.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(","));
        s.push('\n');
        s.push_str(
            &scalars
                .iter()
                .map(|(_, v)| fmt_number(*v))
                .collect::<Vec<_>>()
                .join(","),
        );
        s.push('\n');
        return Ok(s);
    }

    let mut arrays = Vec::with_capacity(columns.len());
    for key in &columns {
        match r.outputs.get(*key) {
            Some(Output::Array(vs)) => arrays.push(vs),
            _ => {
                return Err(CliError::Io(format!(
                    "internal: CSV column '{key}' is not an array output"
                )))
            }
        }
    }
    let rows = arrays[0].len();
    if arrays.iter().any(|a| a.len() != rows) {
        return Err(CliError::Io(
            "internal: CSV columns have mismatched lengths".into(),
        ));
    }

    s.push_str(&columns.join(","));
    s.push('\n');
    for row in 0..rows {
        for (i, a) in arrays.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&fmt_number(a[row]));
        }
        s.push('\n');
    }
    Ok(s)
}

fn execute(argv: &[String]) -> Result<i32, CliError> {
    let Some(inv) = parse_args(argv)? else {
        print!("{}", usage_text());
        return Ok(0);
    };
    let entry = &REGISTRY[inv.scenario];

    let started = Instant::now();
    let mut result = (entry.run)(&inv.flags)?;
    result.runtime_ms = started.elapsed().as_millis() as u64;
    if let Some(seed) = inv.flags.seed {
        result.input("seed", seed);
    }
    result.validate()?;

    let text = match inv.format {
        Format::Json => render_json(&result),
        Format::Csv => render_csv(&result)?,
    };
    match &inv.out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            CliError::Io(format!("cannot write '{}': {e}", path.display()))
        })?,
        None => print!("{text}"),
    }

    Ok(if result.pass == Some(false) { 1 } else { 0 })
}

fn main() {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match execute(&argv) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
