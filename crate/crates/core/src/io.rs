//! File formats: JSON with 17 significant digits, batch files and spec
//! arguments that are either inline JSON or a path.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::domain::{SampleBatch, SeedRecord, StepPath};
use crate::error::{Error, Result};

/// `x` with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Wraps a formatter so that every float is written with 17 significant
/// digits; non-finite values become `null`.
struct Digits17<F>(F);

macro_rules! forward {
    ($($name:ident),*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.$name(w)
            }
        )*
    };
}

impl<F: Formatter> Formatter for Digits17<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(fmt_f64(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    forward!(
        begin_array,
        end_array,
        begin_object,
        end_object,
        end_array_value,
        end_object_value,
        begin_object_value
    );

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
}

fn to_writer_with<W: Write, F: Formatter, T: Serialize + ?Sized>(
    w: W,
    value: &T,
    formatter: F,
) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(w, Digits17(formatter));
    value.serialize(&mut ser)?;
    Ok(())
}

/// Indented JSON with 17-digit floats.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    to_writer_with(&mut buf, value, PrettyFormatter::new())?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Single-line JSON with 17-digit floats.
pub fn to_json_compact<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    to_writer_with(&mut buf, value, CompactFormatter)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Writes `value` as indented JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_json_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Parses `arg` as inline JSON when it starts with `{`, otherwise reads it
/// as a path to a JSON file.
pub fn parse_inline_or_file<T: DeserializeOwned>(arg: &str) -> Result<T> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        Ok(serde_json::from_str(trimmed)?)
    } else {
        read_json(Path::new(arg))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BatchHeader {
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "N")]
    n: usize,
    seed: SeedRecord,
}

/// Batch file: a header line `{"T", "N", "seed"}` followed by one JSON
/// array of jump times per path.
pub fn write_batch(path: &Path, batch: &SampleBatch) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header = BatchHeader {
        horizon: batch.horizon(),
        n: batch.len(),
        seed: batch.seed(),
    };
    writeln!(w, "{}", to_json_compact(&header)?)?;
    for p in batch.paths() {
        writeln!(w, "{}", to_json_compact(p.jumps())?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batch(path: &Path) -> Result<SampleBatch> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header: BatchHeader = match lines.next() {
        Some(line) => serde_json::from_str(&line?)?,
        None => {
            return Err(Error::Parse(format!(
                "{}: empty batch file",
                path.display()
            )))
        }
    };
    let mut paths = Vec::with_capacity(header.n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let jumps: Vec<f64> = serde_json::from_str(&line)?;
        paths.push(StepPath::new(header.horizon, jumps)?);
    }
    if paths.len() != header.n {
        return Err(Error::Parse(format!(
            "{}: header announces {} paths, found {}",
            path.display(),
            header.n,
            paths.len()
        )));
    }
    SampleBatch::new(paths, header.seed)
}
