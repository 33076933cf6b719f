//! File formats.
//!
//! Datasets are JSONL, one [`ScenarioRecord`] per line. Reports are single
//! pretty-printed JSON documents. Every float is written with 17
//! significant digits in `%.17g` style so that a read-back is bit-exact.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::evaluation::CurvePoint;
use crate::types::{validate_dataset, ScenarioRecord};

pub const FORMAT_VERSION: u32 = 1;

/// `%.17g`: shortest of fixed and exponent notation, trailing zeros removed.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Wraps a serde_json formatter so floats use [`format_f64`].
struct Precise<F>(F);

macro_rules! delegate {
    ($($name:ident),*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.$name(w)
            }
        )*
    };
}

impl<F: Formatter> Formatter for Precise<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(format_f64(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    delegate!(
        end_array,
        end_object,
        end_array_value,
        begin_object_value,
        end_object_value
    );

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

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

fn write_with<T: Serialize + ?Sized, F: Formatter, W: Write>(
    value: &T,
    writer: W,
    formatter: F,
) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, Precise(formatter));
    value.serialize(&mut ser)?;
    Ok(())
}

/// Single-line JSON.
pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_with(value, &mut buf, CompactFormatter)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Indented JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_with(value, &mut buf, PrettyFormatter::new())?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_records<W: Write>(records: &[ScenarioRecord], mut writer: W) -> Result<()> {
    for r in records {
        writeln!(writer, "{}", to_json_line(r)?)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses JSONL; blank lines are rejected so that line numbers stay honest.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ScenarioRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty line".into(),
            });
        }
        let record: ScenarioRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_dataset(path: &Path, records: &[ScenarioRecord]) -> Result<()> {
    write_records(records, BufWriter::new(File::create(path)?))
}

/// Reads and validates a dataset; it must be non-empty with unique ids.
pub fn read_dataset(path: &Path) -> Result<Vec<ScenarioRecord>> {
    let records = read_records(BufReader::new(File::open(path)?))?;
    if records.is_empty() {
        return Err(Error::invalid(format!(
            "{} holds no records",
            path.display()
        )));
    }
    validate_dataset(&records)?;
    Ok(records)
}

pub const CURVE_HEADER: &str = "method,target_success,achieved_success,help_rate,feasible";

/// Curve points as CSV; infeasible points leave the rates blank.
pub fn curves_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    let opt = |x: Option<f64>| x.map(format_f64).unwrap_or_default();
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.method,
            format_f64(p.target_success),
            opt(p.achieved_success),
            opt(p.help_rate),
            p.feasible
        ));
    }
    out
}
