use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use ledgerdp::tabledata::write_csv;
use ledgerdp::Table;
use serde_json::{json, Map, Value as Json};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Where results go: one file per query under a directory, or a single
/// stream.
pub struct Sink<'a> {
    format: Format,
    dir: Option<PathBuf>,
    stdout: &'a mut dyn Write,
}

fn io_failure(e: impl std::fmt::Display) -> Failure {
    Failure::runtime(format!("writing output: {e}"))
}

pub fn rows_json(table: &Table) -> Json {
    let names: Vec<&str> = table.schema().names().collect();
    let rows = table
        .rows()
        .iter()
        .map(|r| {
            let obj: Map<String, Json> = names
                .iter()
                .zip(r.values())
                .map(|(n, v)| (n.to_string(), serde_json::to_value(v).expect("values serialize")))
                .collect();
            Json::Object(obj)
        })
        .collect();
    Json::Array(rows)
}

impl<'a> Sink<'a> {
    pub fn new(format: Format, dir: Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Self, Failure> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Failure::config(format!("{}: {e}", d.display())))?;
        }
        Ok(Sink { format, dir, stdout })
    }

    fn render(&self, name: &str, table: &Table, remaining: &str) -> Result<Vec<u8>, Failure> {
        let mut buf = Vec::new();
        match self.format {
            Format::Csv => write_csv(table, &mut buf).map_err(io_failure)?,
            Format::Json => {
                let doc = json!({"query": name, "rows": rows_json(table), "remaining_budget": remaining});
                serde_json::to_writer(&mut buf, &doc).map_err(io_failure)?;
                buf.push(b'\n');
            }
        }
        Ok(buf)
    }

    pub fn result(&mut self, name: &str, table: &Table, remaining: &str) -> Result<(), Failure> {
        let body = self.render(name, table, remaining)?;
        match &self.dir {
            Some(dir) => {
                let ext = match self.format {
                    Format::Csv => "csv",
                    Format::Json => "json",
                };
                fs::write(dir.join(format!("{name}.{ext}")), body).map_err(io_failure)
            }
            None => {
                if self.format == Format::Csv {
                    writeln!(self.stdout, "# query={name}").map_err(io_failure)?;
                }
                self.stdout.write_all(&body).map_err(io_failure)
            }
        }
    }

    pub fn remaining(&mut self, remaining: &str) -> Result<(), Failure> {
        match self.format {
            Format::Csv => writeln!(self.stdout, "# remaining_budget={remaining}"),
            Format::Json => writeln!(self.stdout, "{}", json!({ "remaining_budget": remaining })),
        }
        .map_err(io_failure)
    }
}
