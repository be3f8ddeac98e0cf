use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use coordc::report::{write_csv, write_json};
use coordc::ProtocolReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Record wall-clock time; without it `wall_time_ms` is 0 so reports are
    /// byte-identical across runs.
    #[arg(long)]
    pub timing: bool,
    /// Also write the broadcast message as hex to this file.
    #[arg(long)]
    pub message_out: Option<PathBuf>,
}

pub fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn write_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    let mut out = sink(path)?;
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn emit_reports(args: &ReportArgs, mut reports: Vec<ProtocolReport>) -> anyhow::Result<()> {
    if !args.timing {
        for r in &mut reports {
            r.wall_time_ms = 0.0;
        }
    }
    let mut out = sink(args.output.as_deref())?;
    match args.format {
        Format::Csv => write_csv(&mut out, &reports)?,
        Format::Json => write_json(&mut out, &reports)?,
    }
    out.flush()?;
    Ok(())
}

pub fn emit_message(args: &ReportArgs, msg: &coordc::Message) -> anyhow::Result<()> {
    if let Some(path) = &args.message_out {
        write_text(Some(path), &msg.to_hex())?;
    }
    Ok(())
}
