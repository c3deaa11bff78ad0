//! Dataset metrics, output measures and distance maps.
//!
//! A [`Metric`] measures how far apart two datasets are; a [`Measure`] names
//! the divergence used between output distributions. Distances are exact
//! [`ExtRational`]s. Stability and privacy functions are both
//! [`DistanceMap`]s.

mod distance_map;
mod divergence;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::tabledata::{Row, Table, TableDomain, Value};

pub use distance_map::{DistanceMap, Shape};
pub use divergence::{pure_dp_divergence, zcdp_divergence, DEFAULT_ALPHAS};

/// A dataset: one table, a fixed-length tuple of tables, or a list of tables.
#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Table(Table),
    Tuple(Vec<Table>),
    List(Vec<Table>),
}

impl Dataset {
    pub fn as_table(&self) -> Result<&Table> {
        match self {
            Dataset::Table(t) => Ok(t),
            _ => Err(Error::DomainMismatch("expected a single table".into())),
        }
    }

    pub fn as_tuple(&self) -> Result<&[Table]> {
        match self {
            Dataset::Tuple(ts) => Ok(ts),
            _ => Err(Error::DomainMismatch("expected a tuple of tables".into())),
        }
    }

    pub fn as_list(&self) -> Result<&[Table]> {
        match self {
            Dataset::List(ts) => Ok(ts),
            _ => Err(Error::DomainMismatch("expected a list of tables".into())),
        }
    }
}

impl From<Table> for Dataset {
    fn from(t: Table) -> Self {
        Dataset::Table(t)
    }
}

/// Sets of datasets that components accept and produce.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Table(TableDomain),
    Tuple(Vec<TableDomain>),
    List { element: TableDomain, len: usize },
}

impl Domain {
    pub fn contains(&self, data: &Dataset) -> bool {
        match (self, data) {
            (Domain::Table(d), Dataset::Table(t)) => d.contains(t),
            (Domain::Tuple(ds), Dataset::Tuple(ts)) => {
                ds.len() == ts.len() && ds.iter().zip(ts).all(|(d, t)| d.contains(t))
            }
            (Domain::List { element, len }, Dataset::List(ts)) => {
                ts.len() == *len && ts.iter().all(|t| element.contains(t))
            }
            _ => false,
        }
    }

    pub fn check(&self, data: &Dataset) -> Result<()> {
        if self.contains(data) {
            Ok(())
        } else {
            Err(Error::DomainMismatch(format!(
                "dataset does not belong to {self:?}"
            )))
        }
    }

    pub fn as_table(&self) -> Result<&TableDomain> {
        match self {
            Domain::Table(d) => Ok(d),
            other => Err(Error::DomainMismatch(format!(
                "expected a table domain, found {other:?}"
            ))),
        }
    }
}

/// Distance between datasets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Size of the multiset symmetric difference of two tables.
    SymmetricDifference,
    /// Add/remove-identifier distance on tables (or tuples of tables) sharing a
    /// privacy-identifier column: the symmetric difference between the sets of
    /// per-identifier row blocks. An identifier present on one side only
    /// counts 1; present on both sides with different rows counts 2 (removal
    /// plus re-addition).
    AddRemoveIds(String),
    /// Sum over key values of the inner distance between per-key sub-tables.
    GroupedBy { keys: Vec<String>, inner: Box<Metric> },
    /// Componentwise distances of fixed-length tuples, summed.
    TableTuple(Vec<Metric>),
    /// Positionwise distances of lists, summed; the shorter list is padded
    /// with empty tables.
    BoundedLists(Box<Metric>),
}

impl Metric {
    pub fn grouped_by(keys: Vec<String>) -> Metric {
        Metric::GroupedBy {
            keys,
            inner: Box::new(Metric::SymmetricDifference),
        }
    }

    pub fn bounded_lists() -> Metric {
        Metric::BoundedLists(Box::new(Metric::SymmetricDifference))
    }

    /// Whether the metric is defined on every dataset of `domain`.
    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        let fail = || {
            Err(Error::MetricMismatch(format!(
                "metric {self} is not defined on {domain:?}"
            )))
        };
        match (self, domain) {
            (Metric::SymmetricDifference, Domain::Table(_)) => Ok(()),
            (Metric::AddRemoveIds(id), Domain::Table(d)) => has_id(d, id),
            (Metric::AddRemoveIds(id), Domain::Tuple(ds)) => {
                ds.iter().try_for_each(|d| has_id(d, id))
            }
            (Metric::GroupedBy { keys, inner }, Domain::Table(d)) => {
                for k in keys {
                    d.schema
                        .column(k)
                        .map_err(|_| Error::MissingKeyColumn(k.clone()))?;
                }
                inner.check_domain(domain)
            }
            (Metric::TableTuple(ms), Domain::Tuple(ds)) if ms.len() == ds.len() => ms
                .iter()
                .zip(ds)
                .try_for_each(|(m, d)| m.check_domain(&Domain::Table(d.clone()))),
            (Metric::BoundedLists(inner), Domain::List { element, .. }) => {
                inner.check_domain(&Domain::Table(element.clone()))
            }
            _ => fail(),
        }
    }
}

fn has_id(d: &TableDomain, id: &str) -> Result<()> {
    if d.schema.index_of(id).is_some() {
        Ok(())
    } else {
        Err(Error::MissingIdColumn(id.to_string()))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::SymmetricDifference => write!(f, "SymmetricDifference"),
            Metric::AddRemoveIds(id) => write!(f, "AddRemoveIds({id})"),
            Metric::GroupedBy { keys, inner } => write!(f, "GroupedBy({}, {inner}, L1)", keys.join(",")),
            Metric::TableTuple(ms) => {
                write!(f, "TableTuple(")?;
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, ")")
            }
            Metric::BoundedLists(inner) => write!(f, "BoundedLists({inner})"),
        }
    }
}

/// Divergence between output distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Pure differential privacy, distances are epsilon.
    #[serde(alias = "puredp")]
    Pure,
    /// Zero-concentrated differential privacy, distances are rho.
    Zcdp,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Pure => "pure",
            Measure::Zcdp => "zcdp",
        })
    }
}

/// Distance between `x` and `y` under `metric`.
pub fn dataset_distance(metric: &Metric, x: &Dataset, y: &Dataset) -> Result<ExtRational> {
    Ok(ExtRational::from_u64(distance_u64(metric, x, y)?))
}

fn distance_u64(metric: &Metric, x: &Dataset, y: &Dataset) -> Result<u64> {
    match (metric, x, y) {
        (Metric::SymmetricDifference, Dataset::Table(a), Dataset::Table(b)) => {
            same_schema(a, b)?;
            Ok(symmetric_difference(a, b))
        }
        (Metric::AddRemoveIds(id), Dataset::Table(a), Dataset::Table(b)) => {
            same_schema(a, b)?;
            let xa = id_blocks(std::slice::from_ref(a), id)?;
            let xb = id_blocks(std::slice::from_ref(b), id)?;
            Ok(block_distance(&xa, &xb))
        }
        (Metric::AddRemoveIds(id), Dataset::Tuple(a), Dataset::Tuple(b)) => {
            same_tuple_shape(a, b)?;
            Ok(block_distance(&id_blocks(a, id)?, &id_blocks(b, id)?))
        }
        (Metric::GroupedBy { keys, inner }, Dataset::Table(a), Dataset::Table(b)) => {
            same_schema(a, b)?;
            let ga = partition_by(a, keys)?;
            let gb = partition_by(b, keys)?;
            let all: BTreeSet<&Vec<Value>> = ga.keys().chain(gb.keys()).collect();
            let mut total = 0;
            for k in all {
                let pa = group_table(a, ga.get(k));
                let pb = group_table(b, gb.get(k));
                total += distance_u64(inner, &Dataset::Table(pa), &Dataset::Table(pb))?;
            }
            Ok(total)
        }
        (Metric::TableTuple(ms), Dataset::Tuple(a), Dataset::Tuple(b)) => {
            if ms.len() != a.len() || ms.len() != b.len() {
                return Err(Error::DomainMismatch(format!(
                    "tuple metric of arity {} applied to tuples of arity {} and {}",
                    ms.len(),
                    a.len(),
                    b.len()
                )));
            }
            let mut total = 0;
            for ((m, ta), tb) in ms.iter().zip(a).zip(b) {
                total += distance_u64(m, &Dataset::Table(ta.clone()), &Dataset::Table(tb.clone()))?;
            }
            Ok(total)
        }
        (Metric::BoundedLists(inner), Dataset::List(a), Dataset::List(b)) => {
            let n = a.len().max(b.len());
            let mut total = 0;
            for i in 0..n {
                let (ta, tb) = match (a.get(i), b.get(i)) {
                    (Some(ta), Some(tb)) => (ta.clone(), tb.clone()),
                    (Some(ta), None) => (ta.clone(), Table::empty(ta.schema().clone())),
                    (None, Some(tb)) => (Table::empty(tb.schema().clone()), tb.clone()),
                    (None, None) => unreachable!(),
                };
                total += distance_u64(inner, &Dataset::Table(ta), &Dataset::Table(tb))?;
            }
            Ok(total)
        }
        _ => Err(Error::DomainMismatch(format!(
            "metric {metric} is not defined on these datasets"
        ))),
    }
}

fn same_schema(a: &Table, b: &Table) -> Result<()> {
    if a.schema() == b.schema() {
        Ok(())
    } else {
        Err(Error::DomainMismatch("tables have different schemas".into()))
    }
}

fn same_tuple_shape(a: &[Table], b: &[Table]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DomainMismatch("tuples have different arity".into()));
    }
    a.iter().zip(b).try_for_each(|(x, y)| same_schema(x, y))
}

pub(crate) fn symmetric_difference(a: &Table, b: &Table) -> u64 {
    let ma = a.multiplicities();
    let mb = b.multiplicities();
    let mut total = 0u64;
    for (row, &ca) in &ma {
        let cb = mb.get(row).copied().unwrap_or(0);
        total += ca.abs_diff(cb) as u64;
    }
    for (row, &cb) in &mb {
        if !ma.contains_key(row) {
            total += cb as u64;
        }
    }
    total
}

/// For each identifier, the sorted rows it owns in each component table.
type Blocks = BTreeMap<Value, Vec<Vec<Row>>>;

fn id_blocks(tables: &[Table], id: &str) -> Result<Blocks> {
    let mut blocks: Blocks = BTreeMap::new();
    for (component, t) in tables.iter().enumerate() {
        let idx = t
            .schema()
            .index_of(id)
            .ok_or_else(|| Error::MissingIdColumn(id.to_string()))?;
        for r in t.rows() {
            let entry = blocks
                .entry(r.get(idx).clone())
                .or_insert_with(|| vec![Vec::new(); tables.len()]);
            entry[component].push(r.clone());
        }
    }
    for parts in blocks.values_mut() {
        for p in parts.iter_mut() {
            p.sort();
        }
    }
    Ok(blocks)
}

fn block_distance(a: &Blocks, b: &Blocks) -> u64 {
    let mut d = 0;
    for (id, block) in a {
        match b.get(id) {
            None => d += 1,
            Some(other) if other != block => d += 2,
            Some(_) => {}
        }
    }
    d + b.keys().filter(|id| !a.contains_key(*id)).count() as u64
}

/// Row indices grouped by key tuple.
pub(crate) fn partition_by(t: &Table, keys: &[String]) -> Result<BTreeMap<Vec<Value>, Vec<usize>>> {
    let idx: Vec<usize> = keys
        .iter()
        .map(|k| {
            t.schema()
                .index_of(k)
                .ok_or_else(|| Error::MissingKeyColumn(k.clone()))
        })
        .collect::<Result<_>>()?;
    let mut groups: BTreeMap<Vec<Value>, Vec<usize>> = BTreeMap::new();
    for (i, r) in t.rows().iter().enumerate() {
        let key = idx.iter().map(|&j| r.get(j).clone()).collect();
        groups.entry(key).or_default().push(i);
    }
    Ok(groups)
}

fn group_table(t: &Table, rows: Option<&Vec<usize>>) -> Table {
    let rows = rows
        .map(|ix| ix.iter().map(|&i| t.rows()[i].clone()).collect())
        .unwrap_or_default();
    Table::from_parts(t.shared_schema(), rows)
}
