use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{ColumnType, Row, Schema, Table, TableDomain, Value};
use crate::error::{Error, Result};

/// Loads a whole CSV file under `schema`. Any error aborts the load.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Table> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    read_csv(file, schema)
}

/// Reads a table schema (`{"columns": [...], "id_column": ...}`) from JSON.
pub fn load_domain(path: impl AsRef<Path>) -> Result<TableDomain> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidSchema(e.to_string()))
}

/// Checks only the header line of a CSV file against `schema`; no rows are
/// read.
pub fn check_csv_header(path: impl AsRef<Path>, schema: &Schema) -> Result<()> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|_| Error::MissingFile(path.to_path_buf()))?;
    check_header(&mut reader(file), schema)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, schema: &Schema) -> Result<()> {
    let header = rdr.headers().map_err(csv_error)?;
    let expected: Vec<&str> = schema.names().collect();
    let found: Vec<&str> = header.iter().collect();
    if expected != found {
        return Err(Error::HeaderMismatch {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

pub fn read_csv(reader_in: impl Read, schema: &Schema) -> Result<Table> {
    let mut rdr = reader(reader_in);
    check_header(&mut rdr, schema)?;

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .zip(schema.columns())
            .map(|(field, col)| {
                parse_field(field, col.ty).map_err(|reason| Error::TypeParseError {
                    line,
                    column: col.name.clone(),
                    reason,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row(values));
    }
    Ok(Table::from_parts(Arc::new(schema.clone()), rows))
}

fn parse_field(field: &str, ty: ColumnType) -> std::result::Result<Value, String> {
    if field.is_empty() {
        return Err("empty value (nulls are not supported)".into());
    }
    match ty {
        ColumnType::Int64 => field
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("`{field}` is not an int64")),
        ColumnType::Float64 => {
            // Rust's parser accepts "inf" and "NaN"; only plain decimals are allowed.
            if !field
                .bytes()
                .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
            {
                return Err(format!("`{field}` is not a float64"));
            }
            field
                .parse::<f64>()
                .ok()
                .and_then(Value::float)
                .ok_or_else(|| format!("`{field}` is not a finite float64"))
        }
        ColumnType::Text => Ok(Value::Text(field.to_string())),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        csv::ErrorKind::Utf8 { .. } => Error::TypeParseError {
            line,
            column: String::new(),
            reason: "invalid UTF-8".into(),
        },
        _ => Error::TypeParseError {
            line,
            column: String::new(),
            reason: e.to_string(),
        },
    }
}

/// Writes the header and rows in stored order.
pub fn write_csv(table: &Table, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(table.schema().names()).map_err(csv_error)?;
    for row in table.rows() {
        w.write_record(row.values().iter().map(|v| v.to_string()))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
