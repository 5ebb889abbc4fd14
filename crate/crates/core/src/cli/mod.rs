//! Command-line front end: argument parsing, configuration files, report
//! output and exit codes. Each subcommand lives in [`commands`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod commands;

#[derive(Parser, Debug)]
#[command(name = "rieszcert", version, about = "Lower- and upper-bound checks for the L^p norm of (R1^2 - R2^2, tau I)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Print p*-1, k, c_B, alpha_p, membership in the admissible set and the norm target.
    Constants,
    /// Closed-form laminate ratio for each N, with |ratio - c_B| log N.
    LaminateRatio,
    /// Splitting-lemma inequality for f(x,y) = xy and f = x^2.
    BiconvexCheck,
    /// Discrete staircase prelaminates and their moment errors for each M.
    Staircase,
    /// Realize a prelaminate (example tree, or --tree JSON) as a grid function.
    Realize,
    /// Staircase, realization, pushforward ratio and spectral cross-check.
    Pipeline,
    /// Spectral identities and norm ratios of random zero-mean fields.
    RieszCheck,
    /// Monte Carlo heat martingales and the transformed L^p inequality.
    Martingale,
    /// Majorant, structural properties and zigzag concavity of U.
    BurkholderScan,
    /// Collect the JSON summaries found in --out into one table.
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::LaminateRatio => "laminate-ratio",
            Command::BiconvexCheck => "biconvex-check",
            Command::Staircase => "staircase",
            Command::Realize => "realize",
            Command::Pipeline => "pipeline",
            Command::RieszCheck => "riesz-check",
            Command::Martingale => "martingale",
            Command::BurkholderScan => "burkholder-scan",
            Command::Report => "report",
        }
    }
}

fn parse_n(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let v = if let Some(e) = t.strip_prefix("e^").or_else(|| t.strip_prefix('e')) {
        e.parse::<f64>().map(f64::exp)
    } else {
        t.parse::<f64>()
    };
    v.map_err(|e| format!("{s}: {e} (use a number or eK for e^K)"))
}

/// Flags override values from `--config`, which override the defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// TOML file of flat `key = value` settings (same names as the flags).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Exponent p > 1 [default: 2].
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Multiple of the identity [default: 0].
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    /// Comma-separated N values; `e20` means e^20 [default: e10,e20,e40 for
    /// laminate-ratio, 10,1000 for biconvex-check, e4 otherwise].
    #[arg(long = "N", global = true, value_delimiter = ',', value_parser = parse_n)]
    pub n: Option<Vec<f64>>,
    /// Comma-separated staircase step counts [default: 64,128,256 for
    /// staircase, 16 for pipeline].
    #[arg(long = "M", global = true, value_delimiter = ',')]
    pub m: Option<Vec<usize>>,
    /// Grid size [default: 1024 realize, 2048 pipeline at p != 2, 1024 at p = 2,
    /// 256 riesz-check, 512 burkholder-scan, 64 martingale].
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Random seed [default: 1].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Tolerance for the command's main comparison.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads for parallel stages [default: all cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for CSV, JSON and binary outputs; without it CSV goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte Carlo paths [default: 10000].
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Euler step [default: horizon/2000].
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Martingale horizon T [default: 1].
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Budget for max|u| + max|grad u| in realizations [default: none].
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Cutoff layer fraction for realizations [default: 0.03].
    #[arg(long, global = true)]
    pub layer_fraction: Option<f64>,
    /// Prelaminate tree (JSON) for `realize`.
    #[arg(long, global = true)]
    pub tree: Option<PathBuf>,
    /// Random fields for riesz-check [default: 100].
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Comma-separated tau values for a burkholder-scan sweep.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub taus: Option<Vec<f64>>,
}

/// Fully resolved settings; echoed into every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub p: f64,
    pub tau: f64,
    pub n: Option<Vec<f64>>,
    pub m: Option<Vec<usize>>,
    pub grid: Option<usize>,
    pub seed: u64,
    pub tol: Option<f64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub paths: usize,
    pub dt: Option<f64>,
    pub horizon: f64,
    pub start_grid: usize,
    pub half_width: f64,
    pub layer_fraction: f64,
    pub delta: Option<f64>,
    pub r: f64,
    pub samples: usize,
    pub tree: Option<PathBuf>,
    pub taus: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            tau: 0.0,
            n: None,
            m: None,
            grid: None,
            seed: 1,
            tol: None,
            threads: None,
            out: None,
            paths: 10_000,
            dt: None,
            horizon: 1.0,
            start_grid: 16,
            half_width: 1.0,
            layer_fraction: 0.03,
            delta: None,
            r: 0.2,
            samples: 100,
            tree: None,
            taus: None,
        }
    }
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let mut c = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &flags.$f { c.$f = v.clone(); } )* };
        }
        macro_rules! set_opt {
            ($($f:ident),*) => { $( if flags.$f.is_some() { c.$f = flags.$f.clone(); } )* };
        }
        set!(p, tau, seed, paths, horizon, layer_fraction, samples);
        set_opt!(n, m, grid, tol, threads, out, dt, delta, tree, taus);
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Output of one subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub assertions: Vec<Assertion>,
    /// Assertions are informational only.
    pub exploratory: bool,
}

impl Report {
    pub fn new(command: Command, config: &RunConfig, columns: &[&str]) -> Self {
        Self {
            command: command.name().to_string(),
            config: config.clone(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            summary: serde_json::Map::new(),
            assertions: Vec::new(),
            exploratory: false,
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion { name: name.to_string(), passed, detail });
    }

    pub fn passed(&self) -> bool {
        self.exploratory || self.assertions.iter().all(|a| a.passed)
    }

    /// CSV body; identical for identical configurations.
    pub fn csv_body(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(|e| Error::Format(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Error::Format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn csv_with_header(&self) -> Result<String> {
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let cfg = serde_json::to_string(&self.config)?;
        Ok(format!("# rieszcert {}\n# generated unix={stamp}\n# config {cfg}\n{}", self.command, self.csv_body()?))
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let tag = if self.exploratory { " (exploratory)" } else { "" };
        self.assertions
            .iter()
            .map(|a| format!("{} {}{tag}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail))
            .collect()
    }

    /// Writes `<command>.csv` and `<command>.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}.csv", self.command)), self.csv_with_header()?)?;
        let f = fs::File::create(dir.join(format!("{}.json", self.command)))?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::DegenerateAtTwo(_)
        | Error::UnsupportedRange(_)
        | Error::DegenerateRegion(_)
        | Error::NonDiagonal(_)
        | Error::NotRankOne(_)
        | Error::NotBiconvex { .. }
        | Error::WeightSum(_) => EXIT_DOMAIN,
        Error::ZeroDenominator(_)
        | Error::QuadratureNotConverged { .. }
        | Error::Underflow { .. }
        | Error::Realization(_)
        | Error::DeltaInfeasible { .. }
        | Error::Wraparound(_)
        | Error::InsufficientSamples(_) => EXIT_NUMERIC,
        Error::Format(_) | Error::Io(_) | Error::Json(_) => EXIT_IO,
    }
}

/// Runs one parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    let cfg = match RunConfig::resolve(&cli.flags) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return if matches!(e, Error::Format(_)) { EXIT_USAGE } else { exit_code(&e) };
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            let _ = writeln!(err, "warning: thread pool: {e}");
        }
    }
    let result = commands::dispatch(cli.command, &cfg).and_then(|report| {
        match &cfg.out {
            Some(dir) => report.write_to(dir)?,
            None => out.write_all(report.csv_with_header()?.as_bytes())?,
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            for line in report.summary_lines() {
                let _ = writeln!(err, "{line}");
            }
            if report.passed() {
                EXIT_PASS
            } else {
                EXIT_ASSERTION
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
