//! Report bundles: primary CSV, optional plot data and a replay manifest.

use std::io::Write;
use std::path::Path;

use toml::{Table, Value};

use crate::config::Settings;
use crate::error::CliError;

pub const PLOT_HEADER: [&str; 4] = ["cell_mid", "prior_mass", "posterior_mass", "rb"];

#[derive(Debug, Default)]
pub struct Bundle {
    pub report: Vec<u8>,
    pub plot: Option<Vec<u8>>,
    /// Headline numbers echoed into the manifest.
    pub results: Table,
    /// Failure to report after the bundle has been written.
    pub deferred: Option<CliError>,
}

impl Bundle {
    pub fn new(report: Vec<u8>) -> Self {
        Self { report, ..Self::default() }
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.to_string(), v.into());
    }
}

/// CSV text from a header and rows of preformatted cells.
pub fn csv_table<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.into_iter().collect::<Vec<_>>())?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

/// Plot data from parallel columns; `None` ratios print as empty cells.
pub fn plot_table(mid: &[f64], prior: &[f64], posterior: &[f64], rb: &[Option<f64>]) -> Result<Vec<u8>, CliError> {
    csv_table(
        &PLOT_HEADER,
        (0..mid.len()).map(|i| {
            vec![
                fmt(mid[i]),
                fmt(prior[i]),
                fmt(posterior[i]),
                rb[i].map(fmt).unwrap_or_default(),
            ]
        }),
    )
}

/// Shortest round-trip text, in exponent form for very small or large values.
pub fn fmt(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn manifest(command: &str, settings: &Settings, results: &Table) -> String {
    let mut root = Table::new();
    root.insert("command".into(), Value::String(command.into()));
    root.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    root.insert("config".into(), Value::Table(settings.resolved()));
    if !results.is_empty() {
        root.insert("results".into(), Value::Table(results.clone()));
    }
    toml::to_string(&root).expect("manifest serializes")
}

/// Writes `report.csv`, `plot.csv` and `manifest.toml` into `out`, or the
/// report alone to stdout.
pub fn emit(bundle: &Bundle, command: &str, settings: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("report.csv"), &bundle.report)?;
            if let Some(plot) = &bundle.plot {
                std::fs::write(dir.join("plot.csv"), plot)?;
            }
            std::fs::write(dir.join("manifest.toml"), manifest(command, settings, &bundle.results))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bundle.report)?;
            if bundle.plot.is_some() {
                eprintln!("note: plot data is only written with --out");
            }
        }
    }
    Ok(())
}
