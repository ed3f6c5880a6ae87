//! CSV and JSON emission.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

/// Significant digits that round-trip any `f64`.
pub const ROUND_TRIP_DIGITS: usize = 17;

/// Formats `v` in scientific notation with `digits` significant digits.
pub fn format_number(v: f64, digits: usize) -> String {
    format!("{:.*e}", digits.max(1) - 1, v)
}

/// Writes a header line and one line per row.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I, digits: usize) -> io::Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, v) in row.as_ref().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_number(*v, digits));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Pretty-printed JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}
