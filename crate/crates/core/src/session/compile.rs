//! Lowering of [`QueryExpr`] trees onto transformation chains and a final
//! measurement, calibrated so the end-to-end privacy map at the unit
//! distance equals the requested spend.

use std::collections::BTreeMap;

use super::query::{Aggregation, QueryExpr};
use super::{PrivacyBudget, PrivacyUnit};
use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::measurements::{
    compose_per_group, make_average, make_chain_tm, make_count, make_quantile, make_sum, Measurement, NoiseBudget,
};
use crate::metrics::{Domain, Measure, Metric, Shape};
use crate::tabledata::{Schema, Table, TableDomain};
use crate::transformations::{
    chain, make_filter, make_flat_map, make_group_by_key, make_map, make_private_join, make_product,
    make_public_join, make_select, make_truncate_by_id, Transformation,
};

/// Everything compilation may look at: private table schemas (never rows),
/// public tables, and the privacy unit.
#[derive(Clone, Debug)]
pub struct Catalog {
    names: Vec<String>,
    domains: Vec<TableDomain>,
    public: BTreeMap<String, Table>,
    unit: PrivacyUnit,
}

fn type_error(e: Error) -> Error {
    match e {
        Error::UnknownColumn(_)
        | Error::DuplicateColumn(_)
        | Error::TypeError(_)
        | Error::KeyTypeMismatch { .. }
        | Error::MissingKeyColumn(_)
        | Error::TypeMismatch(_) => Error::TypeCheckError(e.to_string()),
        other => other,
    }
}

fn unbounded(what: &str, id: &str) -> Error {
    Error::UnboundedSensitivity(format!(
        "{what} under the add/remove-identifier unit on `{id}` needs a truncate_by_id step first"
    ))
}

impl Catalog {
    /// Private tables are ordered by name.
    pub fn new(unit: PrivacyUnit, schemas: impl IntoIterator<Item = (String, Schema)>) -> Result<Catalog> {
        let mut sorted: BTreeMap<String, Schema> = BTreeMap::new();
        for (name, schema) in schemas {
            if sorted.insert(name.clone(), schema).is_some() {
                return Err(Error::InvalidSchema(format!("table `{name}` given twice")));
            }
        }
        if sorted.is_empty() {
            return Err(Error::EmptyTables);
        }
        if let PrivacyUnit::AddMaxRows(0) = unit {
            return Err(Error::NonPositiveBound(0));
        }
        let mut names = Vec::with_capacity(sorted.len());
        let mut domains = Vec::with_capacity(sorted.len());
        for (name, schema) in sorted {
            let domain = match &unit {
                PrivacyUnit::AddMaxRows(_) => TableDomain::new(schema),
                PrivacyUnit::AddRemoveId(id) => TableDomain::with_id(schema, id.clone())?,
            };
            names.push(name);
            domains.push(domain);
        }
        Ok(Catalog {
            names,
            domains,
            public: BTreeMap::new(),
            unit,
        })
    }

    pub fn add_public_table(&mut self, name: impl Into<String>, table: Table) -> Result<()> {
        let name = name.into();
        if self.names.contains(&name) || self.public.contains_key(&name) {
            return Err(Error::InvalidSchema(format!("table `{name}` given twice")));
        }
        self.public.insert(name, table);
        Ok(())
    }

    pub fn table_names(&self) -> &[String] {
        &self.names
    }

    pub fn unit(&self) -> &PrivacyUnit {
        &self.unit
    }

    pub fn input_domain(&self) -> Domain {
        Domain::Tuple(self.domains.clone())
    }

    pub fn input_metric(&self) -> Metric {
        match &self.unit {
            PrivacyUnit::AddMaxRows(_) => Metric::TableTuple(vec![Metric::SymmetricDifference; self.domains.len()]),
            PrivacyUnit::AddRemoveId(id) => Metric::AddRemoveIds(id.clone()),
        }
    }

    /// Compiles `q` into a measurement on the catalog's input whose privacy
    /// map, at the unit distance, equals `spend` exactly.
    pub fn compile(&self, q: &QueryExpr, spend: &PrivacyBudget) -> Result<Measurement> {
        let QueryExpr::Agg { input, aggregation } = q else {
            return Err(Error::TypeCheckError("the query root must be an aggregation".into()));
        };
        if spend.amount().is_zero() {
            return Err(Error::InvalidSpend("aggregations need a positive spend".into()));
        }
        let (rows, keys) = match input.as_ref() {
            QueryExpr::GroupBy { input, keys } => (self.lower(input)?, Some(keys)),
            other => (self.lower(other)?, None),
        };
        if let Metric::AddRemoveIds(id) = rows.output_metric() {
            return Err(unbounded("an aggregation", id));
        }
        let slope = match rows.stability().shape() {
            Shape::Linear(s) => s.clone(),
            _ => return Err(Error::NonLinearPath("stability is not linear".into())),
        };
        let unit_distance = self.unit.distance();
        let reach = &slope * &unit_distance;
        let budget = match spend.measure() {
            Measure::Pure => NoiseBudget::Pure(per_unit(spend.amount(), &reach)?),
            Measure::Zcdp => NoiseBudget::Zcdp(per_unit(spend.amount(), &reach.square())?),
        };
        let domain = rows.output_domain().as_table()?.clone();
        let scalar = self.aggregate(domain.clone(), aggregation, budget).map_err(type_error)?;
        let measurement = match keys {
            None => make_chain_tm(&rows, &scalar)?,
            Some(keys) => {
                let group = make_group_by_key(domain, keys.columns()).map_err(type_error)?;
                let grouped = compose_per_group(keys.table(), &scalar, aggregation.output_column())
                    .map_err(type_error)?;
                make_chain_tm(&chain(&rows, &group)?, &grouped)?
            }
        };
        let realized = measurement.privacy_function().eval(&unit_distance);
        if &realized != spend.amount() {
            return Err(Error::NonLinearPath(format!(
                "calibrated loss {realized} differs from spend {}",
                spend.amount()
            )));
        }
        Ok(measurement)
    }

    fn aggregate(&self, domain: TableDomain, aggregation: &Aggregation, budget: NoiseBudget) -> Result<Measurement> {
        match aggregation {
            Aggregation::Count => make_count(domain, budget),
            Aggregation::Sum {
                column,
                low,
                high,
                granularity,
            } => make_sum(domain, column, *low, *high, granularity.clone(), budget),
            Aggregation::Average {
                column,
                low,
                high,
                granularity,
            } => make_average(domain, column, *low, *high, granularity.clone(), budget),
            Aggregation::Quantile {
                column,
                quantile,
                low,
                high,
                bins,
            } => match budget {
                NoiseBudget::Pure(epsilon) => make_quantile(domain, column, *quantile, *low, *high, *bins, epsilon),
                NoiseBudget::Zcdp(_) => Err(Error::UnsupportedMeasure(
                    "quantiles are only available under pure DP".into(),
                )),
            },
        }
    }

    /// Lowers a relational subtree to a transformation from the catalog input.
    fn lower(&self, q: &QueryExpr) -> Result<Transformation> {
        match q {
            QueryExpr::Source { table } => {
                let index = self
                    .names
                    .iter()
                    .position(|n| n == table)
                    .ok_or_else(|| Error::TypeCheckError(format!("unknown private table `{table}`")))?;
                make_select(self.domains.clone(), self.input_metric(), index)
            }
            QueryExpr::Filter { input, predicate } => self.extend(input, |d, m| make_filter(d, m, predicate.clone())),
            QueryExpr::Map { input, columns } => self.extend(input, |d, m| {
                make_map(d, m, columns.iter().map(|c| (c.name.clone(), c.expr.clone())).collect())
            }),
            QueryExpr::FlatMap {
                input,
                expansion,
                max_rows,
            } => self.extend(input, |d, m| make_flat_map(d, m, expansion.clone(), *max_rows)),
            QueryExpr::JoinPublic { input, table, on } => {
                let public = self
                    .public
                    .get(table)
                    .ok_or_else(|| Error::TypeCheckError(format!("unknown public table `{table}`")))?
                    .clone();
                self.extend(input, |d, m| match &m {
                    Metric::AddRemoveIds(id) => Err(unbounded("a public join", id)),
                    _ => make_public_join(d, m, public, on.clone()),
                })
            }
            QueryExpr::JoinPrivate {
                input,
                other,
                on,
                left_bound,
                right_bound,
            } => {
                let left = self.lower(input)?;
                let right = self.lower(other)?;
                for side in [&left, &right] {
                    if let Metric::AddRemoveIds(id) = side.output_metric() {
                        return Err(unbounded("a private join", id));
                    }
                }
                let pair = make_product(&left, &right)?;
                let join = make_private_join(
                    left.output_domain().as_table()?.clone(),
                    right.output_domain().as_table()?.clone(),
                    on.clone(),
                    *left_bound,
                    *right_bound,
                )
                .map_err(type_error)?;
                chain(&pair, &join)
            }
            QueryExpr::TruncateById { input, bound } => self.extend(input, |d, m| match &m {
                Metric::AddRemoveIds(id) => make_truncate_by_id(d, id, *bound),
                _ => Err(Error::MetricMismatch(
                    "truncate_by_id needs the add/remove-identifier privacy unit".into(),
                )),
            }),
            QueryExpr::GroupBy { .. } => Err(Error::TypeCheckError(
                "group_by must be the direct input of the aggregation".into(),
            )),
            QueryExpr::Agg { .. } => Err(Error::TypeCheckError("nested aggregations are not supported".into())),
        }
    }

    fn extend(
        &self,
        input: &QueryExpr,
        step: impl FnOnce(TableDomain, Metric) -> Result<Transformation>,
    ) -> Result<Transformation> {
        let upstream = self.lower(input)?;
        let domain = upstream.output_domain().as_table()?.clone();
        let next = step(domain, upstream.output_metric().clone()).map_err(type_error)?;
        chain(&upstream, &next)
    }
}

fn per_unit(spend: &ExtRational, reach: &ExtRational) -> Result<ExtRational> {
    spend
        .checked_div(reach)
        .ok_or_else(|| Error::InvalidSpend(format!("cannot divide {spend} by {reach}")))
}
