//! Writers for `results.json`, `series.csv` and `plot.csv`. Every float is
//! written with 17 significant digits.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::CliError;
use crate::result::{RunResult, SeriesRow};

/// Pretty JSON with floats as `d.dddddddddddddddde±x`.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<S: Serialize>(value: &S) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::Numerical(format!("cannot serialize results: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.display().to_string(), source: io::Error::other(e) }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_json<S: Serialize>(value: &S, path: &Path) -> Result<(), CliError> {
    fs::write(path, to_json(value)?).map_err(io_err(path))
}

/// `t, ln_rho, w_1..w_N, ln_proj_norm`; the last field is empty when the
/// run did not track the dual direction.
pub fn write_series(rows: &[SeriesRow], path: &Path) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::Numerical("the run recorded no history".into()));
    }
    let n = rows[0].w.len();
    let mut out = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["t".to_string(), "ln_rho".to_string()];
    header.extend((1..=n).map(|i| format!("w_{i}")));
    header.push("ln_proj_norm".into());
    out.write_record(&header).map_err(csv_err(path))?;
    for r in rows {
        let mut rec = vec![num(r.t), num(r.ln_rho)];
        rec.extend(r.w.iter().map(|&x| num(x)));
        rec.push(r.ln_proj_norm.map(num).unwrap_or_default());
        out.write_record(&rec).map_err(csv_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Tidy `series, x, y` rows: the running `λ̂₁` against `t`, and the
/// distance of a probe direction to `w(θ_t ω)` against `t` (meant for a
/// log axis).
pub fn emit_plot_data(result: &RunResult, path: &Path) -> Result<(), CliError> {
    let rows = &result.series;
    if rows.is_empty() {
        return Err(CliError::Numerical("the run recorded no history".into()));
    }
    let mut out = csv::Writer::from_path(path).map_err(csv_err(path))?;
    out.write_record(["series", "x", "y"]).map_err(csv_err(path))?;
    let mut total = 0.0;
    for r in rows {
        total += r.ln_rho;
        out.write_record(["lambda1_running".to_string(), num(r.t), num(total / r.t)]).map_err(csv_err(path))?;
    }
    for r in rows {
        if let Some(g) = r.direction_gap {
            out.write_record(["direction_gap".to_string(), num(r.t), num(g)]).map_err(csv_err(path))?;
        }
    }
    out.flush().map_err(io_err(path))
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    seconds: f64,
}

/// Writes every artifact of `result` into `dir`.
pub fn write_all(result: &RunResult, dir: &Path, series: bool, plot: bool, seconds: f64) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(result, &dir.join("results.json"))?;
    write_json(&Timing { command: result.command, seconds }, &dir.join("timing.json"))?;
    if !result.series.is_empty() {
        if series {
            write_series(&result.series, &dir.join("series.csv"))?;
        }
        if plot {
            emit_plot_data(result, &dir.join("plot.csv"))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = serde_json::json!({"a": 0.1, "b": [1.0, -2.5e-300], "c": f64::NAN, "d": 3});
        let text = String::from_utf8(to_json(&v).unwrap()).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-2.5000000000000000e-300"));
        assert!(text.contains("\"c\": null"));
        assert!(text.contains("\"d\": 3"));
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }
}
