//! Report and table writers. Every float is written with 17 significant
//! digits so that values survive a round trip bit for bit.

use std::io::{self, Write};
use std::path::Path;

use halfline_core::certifier::SolvabilityCertificate;
use halfline_core::WeightedGridFunction;
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::CliError;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with scientific floats.
struct Scientific<'a>(serde_json::ser::PrettyFormatter<'a>);

impl Formatter for Scientific<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
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

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        Scientific(serde_json::ser::PrettyFormatter::new()),
    );
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    std::fs::write(path, to_json(value)?).map_err(|e| CliError::io(path, e))
}

/// Columns `t, u_1, …, u_n`.
pub fn write_solution(path: &Path, u: &WeightedGridFunction) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=u.dim()).map(|i| format!("u_{i}")));
    w.write_record(&header)?;
    for k in 0..u.len() {
        let mut row = vec![float(u.grid().node(k))];
        row.extend(u.samples().row(k).iter().map(|&x| float(x)));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Columns `kappa, gamma, c1..c4, q, verdict`; constants and `q` are left
/// empty past the critical weight.
pub fn write_sweep(path: &Path, rows: &[SolvabilityCertificate]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["kappa", "gamma", "c1", "c2", "c3", "c4", "q", "verdict"])?;
    for r in rows {
        let mut row = vec![float(r.kappa), float(r.gamma)];
        match r.constants {
            Some(c) => row.extend(c.iter().map(|&x| float(x))),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        row.push(r.q.map(float).unwrap_or_default());
        row.push(r.verdict.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
