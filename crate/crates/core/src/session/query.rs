use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::expr::Expr;
use crate::tabledata::{Column, ColumnType, Row, Schema, Table, Value};
use crate::transformations::Expansion;

/// Explicit, data-independent group-by keys: a duplicate-free table of key
/// tuples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKeySet", into = "RawKeySet")]
pub struct KeySet {
    table: Table,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKeySet {
    columns: Vec<Column>,
    tuples: Vec<Vec<Value>>,
}

impl TryFrom<RawKeySet> for KeySet {
    type Error = Error;

    fn try_from(raw: RawKeySet) -> Result<Self> {
        keyset_from_tuples(raw.columns, raw.tuples)
    }
}

impl From<KeySet> for RawKeySet {
    fn from(k: KeySet) -> Self {
        RawKeySet {
            columns: k.table.schema().columns().to_vec(),
            tuples: k.table.rows().iter().map(|r| r.values().to_vec()).collect(),
        }
    }
}

/// Builds a [`KeySet`], dropping repeated tuples. Integers are accepted for
/// float columns.
pub fn keyset_from_tuples(columns: Vec<Column>, tuples: Vec<Vec<Value>>) -> Result<KeySet> {
    let schema = Schema::new(columns)?;
    let mut rows = Vec::with_capacity(tuples.len());
    for tuple in tuples {
        if tuple.len() != schema.len() {
            return Err(Error::TypeMismatch(format!(
                "key tuple has {} values for {} columns",
                tuple.len(),
                schema.len()
            )));
        }
        let values = tuple
            .into_iter()
            .zip(schema.columns())
            .map(|(v, c)| match (v, c.ty) {
                (Value::Int(i), ColumnType::Float64) => Ok(Value::from(i as f64)),
                (v, ty) if v.column_type() == ty => v
                    .normalized()
                    .ok_or_else(|| Error::TypeMismatch(format!("key `{}` is not finite", c.name))),
                (v, ty) => Err(Error::TypeMismatch(format!(
                    "key `{}` expects {ty}, got {v:?}",
                    c.name
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row(values));
    }
    let mut table = Table::new(schema, rows)?.canonicalize();
    let mut unique: Vec<Row> = table.rows().to_vec();
    unique.dedup();
    table = Table::with_shared_schema(table.shared_schema(), unique)?;
    Ok(KeySet { table })
}

impl KeySet {
    pub fn columns(&self) -> Vec<String> {
        self.table.schema().names().map(str::to_string).collect()
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

fn default_granularity() -> ExtRational {
    ExtRational::ratio(1, 100)
}

/// Final aggregation of a query. Sums and averages discretize to multiples
/// of `granularity` (default 0.01).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Aggregation {
    Count,
    Sum {
        column: String,
        low: f64,
        high: f64,
        #[serde(default = "default_granularity")]
        granularity: ExtRational,
    },
    /// Noisy sum over noisy count, each given half the spend.
    Average {
        column: String,
        low: f64,
        high: f64,
        #[serde(default = "default_granularity")]
        granularity: ExtRational,
    },
    /// Pure DP only.
    Quantile {
        column: String,
        quantile: f64,
        low: f64,
        high: f64,
        bins: usize,
    },
}

impl Aggregation {
    /// Name of the released column.
    pub fn output_column(&self) -> &'static str {
        match self {
            Aggregation::Count => "count",
            Aggregation::Sum { .. } => "sum",
            Aggregation::Average { .. } => "average",
            Aggregation::Quantile { .. } => "quantile",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapColumn {
    pub name: String,
    pub expr: Expr,
}

/// Query tree. The root must be `Agg`; `GroupBy` may appear only as its
/// direct input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum QueryExpr {
    Source {
        table: String,
    },
    Filter {
        input: Box<QueryExpr>,
        predicate: Expr,
    },
    Map {
        input: Box<QueryExpr>,
        columns: Vec<MapColumn>,
    },
    FlatMap {
        input: Box<QueryExpr>,
        expansion: Expansion,
        max_rows: u64,
    },
    JoinPublic {
        input: Box<QueryExpr>,
        table: String,
        on: Vec<String>,
    },
    JoinPrivate {
        input: Box<QueryExpr>,
        other: Box<QueryExpr>,
        on: Vec<String>,
        left_bound: u64,
        right_bound: u64,
    },
    TruncateById {
        input: Box<QueryExpr>,
        bound: u64,
    },
    GroupBy {
        input: Box<QueryExpr>,
        keys: KeySet,
    },
    Agg {
        input: Box<QueryExpr>,
        aggregation: Aggregation,
    },
}

/// Fluent construction of [`QueryExpr`] trees.
///
/// ```
/// use ledgerdp::{col, lit, QueryBuilder};
/// let q = QueryBuilder::from("people").filter(col("age").gt(lit(40))).count();
/// assert!(matches!(q, ledgerdp::QueryExpr::Agg { .. }));
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct QueryBuilder {
    node: QueryExpr,
}

impl QueryBuilder {
    #[allow(clippy::should_implement_trait)]
    pub fn from(table: impl Into<String>) -> Self {
        QueryBuilder {
            node: QueryExpr::Source { table: table.into() },
        }
    }

    fn wrap(self, f: impl FnOnce(Box<QueryExpr>) -> QueryExpr) -> Self {
        QueryBuilder {
            node: f(Box::new(self.node)),
        }
    }

    pub fn filter(self, predicate: Expr) -> Self {
        self.wrap(|input| QueryExpr::Filter { input, predicate })
    }

    pub fn map<S: Into<String>>(self, columns: impl IntoIterator<Item = (S, Expr)>) -> Self {
        let columns = columns
            .into_iter()
            .map(|(name, expr)| MapColumn {
                name: name.into(),
                expr,
            })
            .collect();
        self.wrap(|input| QueryExpr::Map { input, columns })
    }

    pub fn flat_map(self, expansion: Expansion, max_rows: u64) -> Self {
        self.wrap(|input| QueryExpr::FlatMap {
            input,
            expansion,
            max_rows,
        })
    }

    pub fn join_public(self, table: impl Into<String>, on: &[&str]) -> Self {
        let table = table.into();
        let on = on.iter().map(|s| s.to_string()).collect();
        self.wrap(|input| QueryExpr::JoinPublic { input, table, on })
    }

    pub fn join_private(self, other: QueryBuilder, on: &[&str], left_bound: u64, right_bound: u64) -> Self {
        let on = on.iter().map(|s| s.to_string()).collect();
        self.wrap(|input| QueryExpr::JoinPrivate {
            input,
            other: Box::new(other.node),
            on,
            left_bound,
            right_bound,
        })
    }

    pub fn truncate_by_id(self, bound: u64) -> Self {
        self.wrap(|input| QueryExpr::TruncateById { input, bound })
    }

    pub fn group_by(self, keys: KeySet) -> GroupedQueryBuilder {
        GroupedQueryBuilder {
            node: QueryExpr::GroupBy {
                input: Box::new(self.node),
                keys,
            },
        }
    }

    pub fn agg(self, aggregation: Aggregation) -> QueryExpr {
        QueryExpr::Agg {
            input: Box::new(self.node),
            aggregation,
        }
    }

    pub fn count(self) -> QueryExpr {
        self.agg(Aggregation::Count)
    }

    pub fn sum(self, column: &str, low: f64, high: f64) -> QueryExpr {
        self.agg(sum(column, low, high))
    }

    pub fn average(self, column: &str, low: f64, high: f64) -> QueryExpr {
        self.agg(average(column, low, high))
    }

    pub fn quantile(self, column: &str, quantile: f64, low: f64, high: f64, bins: usize) -> QueryExpr {
        self.agg(Aggregation::Quantile {
            column: column.to_string(),
            quantile,
            low,
            high,
            bins,
        })
    }
}

fn sum(column: &str, low: f64, high: f64) -> Aggregation {
    Aggregation::Sum {
        column: column.to_string(),
        low,
        high,
        granularity: default_granularity(),
    }
}

fn average(column: &str, low: f64, high: f64) -> Aggregation {
    Aggregation::Average {
        column: column.to_string(),
        low,
        high,
        granularity: default_granularity(),
    }
}

/// A query after `group_by`: only aggregations may follow.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedQueryBuilder {
    node: QueryExpr,
}

impl GroupedQueryBuilder {
    pub fn agg(self, aggregation: Aggregation) -> QueryExpr {
        QueryExpr::Agg {
            input: Box::new(self.node),
            aggregation,
        }
    }

    pub fn count(self) -> QueryExpr {
        self.agg(Aggregation::Count)
    }

    pub fn sum(self, column: &str, low: f64, high: f64) -> QueryExpr {
        self.agg(sum(column, low, high))
    }

    pub fn average(self, column: &str, low: f64, high: f64) -> QueryExpr {
        self.agg(average(column, low, high))
    }

    pub fn quantile(self, column: &str, quantile: f64, low: f64, high: f64, bins: usize) -> QueryExpr {
        self.agg(Aggregation::Quantile {
            column: column.to_string(),
            quantile,
            low,
            high,
            bins,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{col, lit};

    fn zip() -> Vec<Column> {
        vec![Column::new("zip", ColumnType::Text)]
    }

    #[test]
    fn keyset_dedups() {
        let k = keyset_from_tuples(zip(), vec![vec!["10001".into()], vec!["10001".into()]]).unwrap();
        assert_eq!(k.len(), 1);
        let k = keyset_from_tuples(zip(), vec![vec!["10002".into()], vec!["10001".into()]]).unwrap();
        assert_eq!(k.len(), 2);
        assert!(keyset_from_tuples(zip(), vec![]).unwrap().is_empty());
    }

    #[test]
    fn keyset_type_checks() {
        assert!(matches!(
            keyset_from_tuples(zip(), vec![vec![Value::Int(10001)]]),
            Err(Error::TypeMismatch(_))
        ));
        assert!(matches!(
            keyset_from_tuples(zip(), vec![vec!["a".into(), "b".into()]]),
            Err(Error::TypeMismatch(_))
        ));
        let f = vec![Column::new("x", ColumnType::Float64)];
        let k = keyset_from_tuples(f, vec![vec![Value::Int(2)]]).unwrap();
        assert_eq!(k.table().rows()[0].get(0), &Value::from(2.0));
    }

    #[test]
    fn json_mirrors_the_builder() {
        let keys = keyset_from_tuples(zip(), vec![vec!["10001".into()]]).unwrap();
        let built = QueryBuilder::from("people")
            .filter(col("age").gt(lit(40)))
            .group_by(keys)
            .average("income", 0.0, 200000.0);
        let json = r#"{"agg":{
            "input":{"group_by":{
                "input":{"filter":{"input":{"source":{"table":"people"}},
                                   "predicate":{"gt":[{"col":"age"},{"lit":40}]}}},
                "keys":{"columns":[{"name":"zip","type":"text"}],"tuples":[["10001"]]}}},
            "aggregation":{"average":{"column":"income","low":0,"high":200000}}}}"#;
        let parsed: QueryExpr = serde_json::from_str(json).unwrap();
        assert_eq!(parsed, built);
        let round: QueryExpr = serde_json::from_str(&serde_json::to_string(&built).unwrap()).unwrap();
        assert_eq!(round, built);
    }

    #[test]
    fn unknown_nodes_are_rejected() {
        assert!(serde_json::from_str::<QueryExpr>(r#"{"window":{"input":{"source":{"table":"t"}}}}"#).is_err());
        assert!(serde_json::from_str::<QueryExpr>(r#"{"source":{"table":"t","extra":1}}"#).is_err());
        let count: QueryExpr =
            serde_json::from_str(r#"{"agg":{"input":{"source":{"table":"t"}},"aggregation":"count"}}"#).unwrap();
        assert_eq!(count, QueryBuilder::from("t").count());
    }
}
