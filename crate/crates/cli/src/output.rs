//! Output files. Every file starts with `#` lines naming the code version
//! and the experiment config, then plain CSV (or JSON).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use lpplab::stats::EmpiricalSample;
use serde::Serialize;

use crate::config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes `# lpplab <version>` and `# config <json>`.
pub fn write_header<W: Write>(out: &mut W, config: &ExperimentConfig) -> Result<()> {
    writeln!(out, "# lpplab {VERSION}")?;
    writeln!(out, "# config {}", serde_json::to_string(config)?)?;
    Ok(())
}

/// Runs `body` against the file at `path`, or stdout without one.
pub fn with_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = io::BufWriter::new(file);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

// Shortest representation that parses back to the same f64.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// CSV with the provenance header.
pub fn write_table<W: Write + ?Sized>(
    out: &mut W,
    config: &ExperimentConfig,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut buf = Vec::new();
    write_header(&mut buf, config)?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn write_samples<W: Write + ?Sized>(out: &mut W, config: &ExperimentConfig, values: &[f64]) -> Result<()> {
    let rows = values.iter().enumerate().map(|(i, &v)| vec![i.to_string(), num(v)]);
    write_table(out, config, &["replicate", "value"], rows)
}

/// Reads the `value` column of a sample file, skipping `#` lines.
pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = headers
        .iter()
        .position(|h| h == "value")
        .with_context(|| format!("{} has no `value` column", path.display()))?;
    let mut v = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(col).unwrap_or("");
        let x: f64 = field
            .parse()
            .with_context(|| format!("{}: row {} has value `{field}`", path.display(), line + 1))?;
        v.push(x);
    }
    if v.is_empty() {
        bail!("{} holds no samples", path.display());
    }
    Ok(v)
}

pub fn sample_from_file(path: &Path) -> Result<EmpiricalSample> {
    let v = read_samples(path)?;
    EmpiricalSample::new(v).with_context(|| format!("{} cannot be compared", path.display()))
}

pub fn write_json<W: Write + ?Sized, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}
