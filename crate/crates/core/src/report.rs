//! Report serialization: CSV with a fixed column order, or a JSON array.

use std::io::Write;

use crate::error::Result;
use crate::protocol::ProtocolReport;

pub const CSV_COLUMNS: [&str; 9] = [
    "protocol",
    "n",
    "k_or_m",
    "seed",
    "message_bits",
    "objective",
    "opt",
    "ratio",
    "wall_time_ms",
];

pub fn write_csv<W: Write>(out: W, reports: &[ProtocolReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(mut out: W, reports: &[ProtocolReport]) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, reports)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ProtocolReport>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(rows)
}
