//! Analyst-facing sessions.
//!
//! A [`Session`] takes ownership of the private tables, a privacy unit and a
//! total budget. Queries are built with [`QueryBuilder`] (or deserialized as
//! [`QueryExpr`] JSON), compiled onto core components, and answered through
//! an internal [`Queryable`](crate::measurements::Queryable) that enforces
//! the budget.

mod compile;
mod query;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::measurements::{make_queryable, Output, Queryable};
use crate::metrics::{Dataset, Measure};
use crate::tabledata::{Column, ColumnType, Row, Schema, Table, Value};

pub use compile::Catalog;
pub use query::{keyset_from_tuples, Aggregation, GroupedQueryBuilder, KeySet, MapColumn, QueryBuilder, QueryExpr};

/// An amount of privacy loss under a given measure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivacyBudget {
    measure: Measure,
    amount: ExtRational,
}

impl PrivacyBudget {
    pub fn new(measure: Measure, amount: ExtRational) -> Self {
        PrivacyBudget { measure, amount }
    }

    pub fn pure(amount: ExtRational) -> Self {
        PrivacyBudget::new(Measure::Pure, amount)
    }

    pub fn zcdp(amount: ExtRational) -> Self {
        PrivacyBudget::new(Measure::Zcdp, amount)
    }

    /// Parses an exact amount (`0.4`, `2/5`, `inf`).
    pub fn parse(measure: Measure, amount: &str) -> Result<Self> {
        Ok(PrivacyBudget::new(measure, amount.parse()?))
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn amount(&self) -> &ExtRational {
        &self.amount
    }

    pub fn checked_sub(&self, other: &PrivacyBudget) -> Result<PrivacyBudget> {
        if self.measure != other.measure {
            return Err(Error::MeasureMismatch(format!(
                "cannot subtract a {} budget from a {} budget",
                other.measure, self.measure
            )));
        }
        let amount = self.amount.checked_sub(&other.amount).ok_or(Error::NegativeBudget)?;
        Ok(PrivacyBudget::new(self.measure, amount))
    }
}

impl fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.amount)
    }
}

/// What the guarantee protects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PrivacyUnit {
    /// Any `k` rows, across all tables.
    AddMaxRows(u64),
    /// All rows sharing one value of the identifier column, across all
    /// tables.
    AddRemoveId(String),
}

impl PrivacyUnit {
    /// The input distance at which guarantees are quoted.
    pub fn distance(&self) -> ExtRational {
        match self {
            PrivacyUnit::AddMaxRows(k) => ExtRational::from_u64(*k),
            PrivacyUnit::AddRemoveId(_) => ExtRational::one(),
        }
    }
}

/// `add-max-rows:<k>` or `add-remove-id:<column>`.
impl FromStr for PrivacyUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSchema(format!("unrecognized privacy unit `{s}`"));
        match s.split_once(':') {
            Some(("add-max-rows", k)) => match k.parse::<u64>() {
                Ok(0) => Err(Error::NonPositiveBound(0)),
                Ok(k) => Ok(PrivacyUnit::AddMaxRows(k)),
                Err(_) => Err(bad()),
            },
            Some(("add-remove-id", col)) if !col.is_empty() => Ok(PrivacyUnit::AddRemoveId(col.to_string())),
            _ => Err(bad()),
        }
    }
}

/// Budget-mediated access to a set of private tables.
#[derive(Debug)]
pub struct Session {
    catalog: Catalog,
    queryable: Queryable,
    measure: Measure,
}

impl Session {
    /// Tables are keyed by name; with [`PrivacyUnit::AddRemoveId`] every
    /// table must carry the identifier column.
    pub fn new(
        tables: impl IntoIterator<Item = (String, Table)>,
        unit: PrivacyUnit,
        budget: PrivacyBudget,
        seed: u64,
    ) -> Result<Session> {
        let mut tables: Vec<(String, Table)> = tables.into_iter().collect();
        tables.sort_by(|a, b| a.0.cmp(&b.0));
        let catalog = Catalog::new(
            unit,
            tables.iter().map(|(n, t)| (n.clone(), t.schema().clone())),
        )?;
        let data = Dataset::Tuple(tables.into_iter().map(|(_, t)| t).collect());
        let queryable = make_queryable(
            data,
            catalog.input_domain(),
            catalog.input_metric(),
            budget.measure,
            budget.amount,
            seed,
        )?;
        Ok(Session {
            catalog,
            queryable,
            measure: budget.measure,
        })
    }

    /// Registers a non-private table usable in public joins.
    pub fn add_public_table(&mut self, name: impl Into<String>, table: Table) -> Result<()> {
        self.catalog.add_public_table(name, table)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn total_budget(&self) -> PrivacyBudget {
        PrivacyBudget::new(self.measure, self.queryable.total().clone())
    }

    pub fn remaining_budget(&self) -> PrivacyBudget {
        PrivacyBudget::new(self.measure, self.queryable.remaining())
    }

    /// Number of successfully answered queries.
    pub fn query_counter(&self) -> u64 {
        self.queryable.queries_answered()
    }

    /// Compiles and answers `q`, deducting exactly `spend`. Scalar results
    /// come back as a one-row table. On error the session is unchanged.
    pub fn evaluate(&mut self, q: &QueryExpr, spend: &PrivacyBudget) -> Result<Table> {
        if spend.measure != self.measure {
            return Err(Error::MeasureMismatch(format!(
                "session accounts in {}, spend is {}",
                self.measure, spend.measure
            )));
        }
        let name = match q {
            QueryExpr::Agg { aggregation, .. } => aggregation.output_column(),
            _ => "value",
        };
        let m = self.catalog.compile(q, spend)?;
        let out = self
            .queryable
            .ask(&m, &spend.amount, &self.catalog.unit().distance())?;
        output_table(out, name)
    }
}

fn output_table(out: Output, name: &str) -> Result<Table> {
    let (ty, value) = match out {
        Output::Table(t) => return Ok(t),
        Output::Int(i) => (ColumnType::Int64, Value::Int(i)),
        Output::Real(x) => (
            ColumnType::Float64,
            Value::float(x).ok_or_else(|| Error::TypeError("non-finite release".into()))?,
        ),
        Output::Tuple(_) => return Err(Error::TypeError("tuple outputs have no table form".into())),
    };
    let schema = Arc::new(Schema::new(vec![Column::new(name, ty)])?);
    Table::with_shared_schema(schema, vec![Row(vec![value])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{col, lit};
    use crate::row;

    fn ages() -> Table {
        let s = Schema::from_pairs([("id", ColumnType::Text), ("age", ColumnType::Int64)]).unwrap();
        Table::new(s, vec![row!["a", 30i64], row!["b", 45i64], row!["b", 50i64]]).unwrap()
    }

    fn session(budget: &str) -> Session {
        Session::new(
            [("people".to_string(), ages())],
            PrivacyUnit::AddMaxRows(1),
            PrivacyBudget::parse(Measure::Pure, budget).unwrap(),
            11,
        )
        .unwrap()
    }

    #[test]
    fn fresh_session_has_full_budget() {
        let s = session("1");
        assert_eq!(s.remaining_budget().amount(), &ExtRational::one());
        assert_eq!(s.remaining_budget(), s.remaining_budget());
    }

    #[test]
    fn ledger_is_exact() {
        let mut s = session("1");
        let q = QueryBuilder::from("people").count();
        s.evaluate(&q, &PrivacyBudget::parse(Measure::Pure, "0.4").unwrap()).unwrap();
        assert_eq!(s.remaining_budget().amount(), &ExtRational::ratio(3, 5));
        let err = s.evaluate(&q, &PrivacyBudget::parse(Measure::Pure, "0.7").unwrap());
        assert!(matches!(err, Err(Error::InsufficientBudget { .. })));
        assert_eq!(s.remaining_budget().amount(), &ExtRational::ratio(3, 5));
        assert_eq!(s.query_counter(), 1);
    }

    #[test]
    fn failed_query_does_not_shift_later_outputs() {
        let q = QueryBuilder::from("people").filter(col("age").gt(lit(40))).count();
        let spend = PrivacyBudget::parse(Measure::Pure, "0.1").unwrap();
        let mut a = session("1");
        let mut b = session("1");
        let bad = QueryBuilder::from("people").filter(col("nope").gt(lit(1))).count();
        assert!(b.evaluate(&bad, &spend).is_err());
        assert!(b.evaluate(&q, &PrivacyBudget::parse(Measure::Pure, "5").unwrap()).is_err());
        assert_eq!(a.evaluate(&q, &spend).unwrap(), b.evaluate(&q, &spend).unwrap());
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Session::new(Vec::new(), PrivacyUnit::AddMaxRows(1), PrivacyBudget::pure(ExtRational::one()), 0),
            Err(Error::EmptyTables)
        ));
        assert!(matches!(
            Session::new(
                [("people".to_string(), ages())],
                PrivacyUnit::AddRemoveId("user_id".into()),
                PrivacyBudget::pure(ExtRational::one()),
                0
            ),
            Err(Error::MissingIdColumn(_))
        ));
    }

    #[test]
    fn budget_arithmetic() {
        let one = PrivacyBudget::pure(ExtRational::one());
        let more = PrivacyBudget::pure(ExtRational::from_u64(2));
        assert_eq!(one.checked_sub(&more), Err(Error::NegativeBudget));
        assert_eq!(more.checked_sub(&one).unwrap(), one);
        assert!(one.checked_sub(&PrivacyBudget::zcdp(ExtRational::zero())).is_err());
    }

    #[test]
    fn unit_parsing() {
        assert_eq!("add-max-rows:3".parse::<PrivacyUnit>().unwrap(), PrivacyUnit::AddMaxRows(3));
        assert_eq!(
            "add-remove-id:user".parse::<PrivacyUnit>().unwrap(),
            PrivacyUnit::AddRemoveId("user".into())
        );
        for bad in ["add-max-rows:0", "add-max-rows:x", "rows:3", "add-remove-id:"] {
            assert!(bad.parse::<PrivacyUnit>().is_err(), "{bad}");
        }
    }
}
