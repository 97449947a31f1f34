use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::ValueEnum;
use kusuoka_core::{Mat3, Rational};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Pretty,
}

pub struct Sink {
    pub format: Format,
    out: Box<dyn Write>,
}

impl Sink {
    pub fn open(format: Format, path: Option<&PathBuf>) -> io::Result<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Sink { format, out })
    }

    /// Pretty-printed JSON with the schema tag inserted first.
    pub fn json(&mut self, body: Value) -> io::Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("schema".into(), json!(1));
        match body {
            Value::Object(map) => obj.extend(map.into_iter().filter(|(k, _)| k != "schema")),
            other => {
                obj.insert("data".into(), other);
            }
        }
        serde_json::to_writer_pretty(&mut self.out, &Value::Object(obj))?;
        writeln!(self.out)
    }

    pub fn csv<R: Serialize>(&mut self, header: &[&str], rows: impl IntoIterator<Item = R>) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut self.out);
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()
    }

    pub fn line(&mut self, s: impl AsRef<str>) -> io::Result<()> {
        writeln!(self.out, "{}", s.as_ref())
    }

    pub fn raw(&mut self) -> &mut dyn Write {
        &mut self.out
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub fn q(x: &Rational) -> Value {
    Value::String(x.to_string())
}

pub fn qs(xs: &[Rational]) -> Value {
    Value::Array(xs.iter().map(q).collect())
}

pub fn mat(m: &Mat3) -> Value {
    Value::Array(
        (0..3)
            .map(|i| Value::Array((0..3).map(|j| q(m.get(i, j))).collect()))
            .collect(),
    )
}
