//! Typed in-memory tables with multiset semantics.
//!
//! A [`Table`] is a schema plus a multiset of [`Row`]s. Row order is an
//! artifact of storage and never observable through the public operations:
//! equality is multiset equality and [`Table::canonicalize`] fixes a total
//! order when one is needed (truncation, output).

mod csv_io;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{check_csv_header, load_csv, load_domain, read_csv, write_csv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int64,
    Float64,
    Text,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Int64 => "int64",
            ColumnType::Float64 => "float64",
            ColumnType::Text => "text",
        })
    }
}

/// A single cell. Floats are always finite and `-0.0` is stored as `0.0`, so
/// the derived-by-hand `Eq`, `Ord` and `Hash` are consistent.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    /// Returns `None` for NaN and infinities.
    pub fn float(x: f64) -> Option<Value> {
        if x.is_finite() {
            Some(Value::Float(if x == 0.0 { 0.0 } else { x }))
        } else {
            None
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            Value::Int(_) => ColumnType::Int64,
            Value::Float(_) => ColumnType::Float64,
            Value::Text(_) => ColumnType::Text,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            Value::Text(_) => None,
        }
    }

    /// Restores the float invariants after deserialization.
    pub(crate) fn normalized(self) -> Option<Value> {
        match self {
            Value::Float(x) => Value::float(x),
            v => Some(v),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Float(_) => 1,
            Value::Text(_) => 2,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Text(a), Value::Text(b)) => a.as_bytes().cmp(b.as_bytes()),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Int(i) => i.hash(state),
            Value::Float(x) => x.to_bits().hash(state),
            Value::Text(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

/// Ordered, nonempty list of uniquely named columns.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidSchema("schema has no columns".into()));
        }
        for (i, c) in columns.iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::InvalidSchema("empty column name".into()));
            }
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(Schema { columns })
    }

    /// Convenience constructor from `(name, type)` pairs.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, ColumnType)>) -> Result<Self> {
        Schema::new(pairs.into_iter().map(|(n, t)| Column::new(n, t)).collect())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            columns: Vec<Column>,
        }
        let raw = Raw::deserialize(d)?;
        Schema::new(raw.columns).map_err(serde::de::Error::custom)
    }
}

/// Values aligned positionally with a schema. Ordered lexicographically by
/// column position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Row(pub Vec<Value>);

impl Row {
    pub fn new(values: Vec<Value>) -> Self {
        Row(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn get(&self, i: usize) -> &Value {
        &self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn conforms_to(&self, schema: &Schema) -> bool {
        self.0.len() == schema.len()
            && self
                .0
                .iter()
                .zip(schema.columns())
                .all(|(v, c)| v.column_type() == c.ty && !matches!(v, Value::Float(x) if !x.is_finite()))
    }
}

#[macro_export]
/// Builds a [`Row`](crate::tabledata::Row) from expressions convertible into `Value`.
macro_rules! row {
    ($($v:expr),* $(,)?) => {
        $crate::tabledata::Row::new(vec![$($crate::tabledata::Value::from($v)),*])
    };
}

impl From<f64> for Value {
    /// Panics on non-finite input; use [`Value::float`] for fallible conversion.
    fn from(x: f64) -> Self {
        Value::float(x).expect("non-finite float")
    }
}

/// Schema plus a multiset of rows. Immutable once built.
#[derive(Clone, Debug)]
pub struct Table {
    schema: Arc<Schema>,
    rows: Arc<Vec<Row>>,
}

impl Table {
    pub fn new(schema: Schema, rows: Vec<Row>) -> Result<Self> {
        Table::with_shared_schema(Arc::new(schema), rows)
    }

    pub fn with_shared_schema(schema: Arc<Schema>, rows: Vec<Row>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| !r.conforms_to(&schema)) {
            return Err(Error::SchemaMismatch(format!(
                "row {:?} does not conform to schema",
                bad.values()
            )));
        }
        Ok(Table::from_parts(schema, rows))
    }

    /// Rows must already conform to the schema.
    pub(crate) fn from_parts(schema: Arc<Schema>, rows: Vec<Row>) -> Self {
        debug_assert!(rows.iter().all(|r| r.conforms_to(&schema)));
        Table {
            schema,
            rows: Arc::new(rows),
        }
    }

    pub fn empty(schema: Schema) -> Self {
        Table::from_parts(Arc::new(schema), Vec::new())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn shared_schema(&self) -> Arc<Schema> {
        Arc::clone(&self.schema)
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Occurrence count of every distinct row.
    pub fn multiplicities(&self) -> BTreeMap<&Row, usize> {
        let mut counts = BTreeMap::new();
        for r in self.rows.iter() {
            *counts.entry(r).or_insert(0) += 1;
        }
        counts
    }

    /// Rows sorted by the total row order. Idempotent.
    pub fn canonicalize(&self) -> Table {
        let mut rows = self.rows.as_ref().clone();
        rows.sort();
        Table::from_parts(Arc::clone(&self.schema), rows)
    }

    /// Multiset equality: order-insensitive and multiplicity-sensitive.
    pub fn table_equal(&self, other: &Table) -> Result<bool> {
        if self.schema() != other.schema() {
            return Err(Error::SchemaMismatch(
                "cannot compare tables with different schemas".into(),
            ));
        }
        Ok(self.len() == other.len() && self.multiplicities() == other.multiplicities())
    }

    /// Sub-multiset of rows satisfying `keep`.
    pub fn filter_rows(&self, mut keep: impl FnMut(&Row) -> bool) -> Table {
        let rows = self.rows.iter().filter(|r| keep(r)).cloned().collect();
        Table::from_parts(Arc::clone(&self.schema), rows)
    }

    /// Numeric view of a column; errors for text or unknown columns.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = numeric_index(&self.schema, name)?;
        Ok(self
            .rows
            .iter()
            .map(|r| r.get(idx).as_f64().expect("numeric column"))
            .collect())
    }
}

pub(crate) fn numeric_index(schema: &Schema, name: &str) -> Result<usize> {
    let idx = schema
        .index_of(name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
    if schema.columns()[idx].ty == ColumnType::Text {
        return Err(Error::TypeError(format!("column `{name}` is not numeric")));
    }
    Ok(idx)
}

impl PartialEq for Table {
    /// Same as [`Table::table_equal`], with differing schemas comparing unequal.
    fn eq(&self, other: &Self) -> bool {
        self.table_equal(other).unwrap_or(false)
    }
}

/// The set of tables with a given schema, optionally marked with a
/// privacy-identifier column.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TableDomain {
    #[serde(flatten)]
    pub schema: Schema,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id_column: Option<String>,
}

impl TableDomain {
    pub fn new(schema: Schema) -> Self {
        TableDomain {
            schema,
            id_column: None,
        }
    }

    pub fn with_id(schema: Schema, id_column: impl Into<String>) -> Result<Self> {
        let id_column = id_column.into();
        let col = schema
            .column(&id_column)
            .map_err(|_| Error::MissingIdColumn(id_column.clone()))?;
        if col.ty == ColumnType::Float64 {
            return Err(Error::InvalidSchema(format!(
                "identifier column `{id_column}` must be int64 or text"
            )));
        }
        Ok(TableDomain {
            schema,
            id_column: Some(id_column),
        })
    }

    pub fn id_index(&self) -> Option<usize> {
        self.id_column.as_deref().and_then(|c| self.schema.index_of(c))
    }

    pub fn contains(&self, t: &Table) -> bool {
        t.schema() == &self.schema
    }
}

impl<'de> Deserialize<'de> for TableDomain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            columns: Vec<Column>,
            #[serde(default)]
            id_column: Option<String>,
        }
        let raw = Raw::deserialize(d)?;
        let schema = Schema::new(raw.columns).map_err(serde::de::Error::custom)?;
        match raw.id_column {
            Some(id) => TableDomain::with_id(schema, id).map_err(serde::de::Error::custom),
            None => Ok(TableDomain::new(schema)),
        }
    }
}
