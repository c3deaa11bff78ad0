//! Deterministic dataset-to-dataset components with stability maps.
//!
//! Every constructor takes the input domain and input metric explicitly and
//! derives the output domain, output metric and stability map. The guarantee
//! is `d_out(T(x), T(y)) ≤ stability(d_in(x, y))` for all `x`, `y` in the
//! input domain.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::expr::{Expr, ExprType};
use crate::metrics::{partition_by, Dataset, DistanceMap, Domain, Metric};
use crate::tabledata::{Column, ColumnType, Row, Schema, Table, TableDomain, Value};

/// Description of one pipeline step, for inspection of compiled plans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransformKind {
    Identity,
    Select { index: usize },
    Filter,
    Map,
    FlatMap { max_rows: u64 },
    PublicJoin { max_multiplicity: u64 },
    PrivateJoin { left_bound: u64, right_bound: u64 },
    TruncateById { bound: u64 },
    OverlappingSubsets { num_subsets: usize, contribution_bound: usize },
    GroupByKey { keys: Vec<String> },
    Product,
}

type ApplyFn = dyn Fn(&Dataset) -> Result<Dataset> + Send + Sync;

#[derive(Clone)]
pub struct Transformation {
    input_domain: Domain,
    output_domain: Domain,
    input_metric: Metric,
    output_metric: Metric,
    stability: DistanceMap,
    steps: Vec<TransformKind>,
    function: Arc<ApplyFn>,
}

impl fmt::Debug for Transformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transformation")
            .field("steps", &self.steps)
            .field("input_metric", &self.input_metric)
            .field("output_metric", &self.output_metric)
            .field("stability", &self.stability)
            .finish()
    }
}

impl Transformation {
    fn new(
        input_domain: Domain,
        output_domain: Domain,
        input_metric: Metric,
        output_metric: Metric,
        stability: DistanceMap,
        kind: TransformKind,
        function: impl Fn(&Dataset) -> Result<Dataset> + Send + Sync + 'static,
    ) -> Result<Self> {
        input_metric.check_domain(&input_domain)?;
        output_metric.check_domain(&output_domain)?;
        Ok(Transformation {
            input_domain,
            output_domain,
            input_metric,
            output_metric,
            stability,
            steps: vec![kind],
            function: Arc::new(function),
        })
    }

    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.input_domain.check(data)?;
        (self.function)(data)
    }

    pub fn input_domain(&self) -> &Domain {
        &self.input_domain
    }

    pub fn output_domain(&self) -> &Domain {
        &self.output_domain
    }

    pub fn input_metric(&self) -> &Metric {
        &self.input_metric
    }

    pub fn output_metric(&self) -> &Metric {
        &self.output_metric
    }

    pub fn stability(&self) -> &DistanceMap {
        &self.stability
    }

    pub fn steps(&self) -> &[TransformKind] {
        &self.steps
    }
}

/// `second ∘ first`, with stability `second.stability ∘ first.stability`.
pub fn chain(first: &Transformation, second: &Transformation) -> Result<Transformation> {
    if first.output_domain != second.input_domain {
        return Err(Error::DomainMismatch(format!(
            "cannot chain: {:?} feeds {:?}",
            first.output_domain, second.input_domain
        )));
    }
    if first.output_metric != second.input_metric {
        return Err(Error::MetricMismatch(format!(
            "cannot chain: {} feeds {}",
            first.output_metric, second.input_metric
        )));
    }
    let (f, g) = (Arc::clone(&first.function), Arc::clone(&second.function));
    let mut steps = first.steps.clone();
    steps.extend(second.steps.iter().cloned());
    Ok(Transformation {
        input_domain: first.input_domain.clone(),
        output_domain: second.output_domain.clone(),
        input_metric: first.input_metric.clone(),
        output_metric: second.output_metric.clone(),
        stability: DistanceMap::compose(&second.stability, &first.stability),
        steps,
        function: Arc::new(move |x| g(&f(x)?)),
    })
}

fn one() -> DistanceMap {
    DistanceMap::identity()
}

fn linear(k: u64) -> DistanceMap {
    DistanceMap::linear(ExtRational::from_u64(k))
}

/// Metrics under which per-row operations are 1-stable.
fn check_row_metric(domain: &TableDomain, metric: &Metric) -> Result<()> {
    match metric {
        Metric::SymmetricDifference => Ok(()),
        Metric::AddRemoveIds(id) if domain.schema.index_of(id).is_some() => Ok(()),
        Metric::AddRemoveIds(id) => Err(Error::MissingIdColumn(id.clone())),
        other => Err(Error::MetricMismatch(format!(
            "row-level transformations need SymmetricDifference or AddRemoveIds, got {other}"
        ))),
    }
}

pub fn make_identity(domain: Domain, metric: Metric) -> Result<Transformation> {
    Transformation::new(
        domain.clone(),
        domain,
        metric.clone(),
        metric,
        one(),
        TransformKind::Identity,
        |x| Ok(x.clone()),
    )
}

/// Projects component `index` out of a tuple of tables. Under `TableTuple`
/// the output metric is the component's metric; under `AddRemoveIds` it stays
/// `AddRemoveIds`.
pub fn make_select(components: Vec<TableDomain>, metric: Metric, index: usize) -> Result<Transformation> {
    let out = components.get(index).cloned().ok_or(Error::BadIndex {
        index,
        num_subsets: components.len(),
    })?;
    let out_metric = match &metric {
        Metric::TableTuple(ms) => ms
            .get(index)
            .cloned()
            .ok_or_else(|| Error::MetricMismatch("tuple metric arity".into()))?,
        Metric::AddRemoveIds(id) => Metric::AddRemoveIds(id.clone()),
        other => {
            return Err(Error::MetricMismatch(format!(
                "cannot select a component under {other}"
            )))
        }
    };
    Transformation::new(
        Domain::Tuple(components),
        Domain::Table(out),
        metric,
        out_metric,
        one(),
        TransformKind::Select { index },
        move |x| Ok(Dataset::Table(x.as_tuple()?[index].clone())),
    )
}

/// Keeps rows satisfying `predicate`. 1-stable.
pub fn make_filter(domain: TableDomain, metric: Metric, predicate: Expr) -> Result<Transformation> {
    check_row_metric(&domain, &metric)?;
    match predicate.type_of(&domain.schema)? {
        ExprType::Bool => {}
        t => return Err(Error::TypeError(format!("filter predicate has type {t:?}"))),
    }
    let schema = domain.schema.clone();
    Transformation::new(
        Domain::Table(domain.clone()),
        Domain::Table(domain),
        metric.clone(),
        metric,
        one(),
        TransformKind::Filter,
        move |x| {
            let t = x.as_table()?;
            let mut err = None;
            let out = t.filter_rows(|r| match predicate.eval_bool(&schema, r) {
                Ok(b) => b,
                Err(e) => {
                    err.get_or_insert(e);
                    false
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(Dataset::Table(out)),
            }
        },
    )
}

/// Replaces each row by the named expressions evaluated on it. 1-stable.
/// When the domain carries an identifier column, one output column must be
/// that column copied unchanged under the same name.
pub fn make_map(domain: TableDomain, metric: Metric, columns: Vec<(String, Expr)>) -> Result<Transformation> {
    check_row_metric(&domain, &metric)?;
    let mut out_cols = Vec::with_capacity(columns.len());
    for (name, e) in &columns {
        match e.type_of(&domain.schema)? {
            ExprType::Column(ty) => out_cols.push(Column::new(name.clone(), ty)),
            ExprType::Bool => {
                return Err(Error::TypeError(format!("map column `{name}` is boolean")))
            }
        }
    }
    let out_schema = Schema::new(out_cols)?;
    let id = match &metric {
        Metric::AddRemoveIds(id) => Some(id.clone()),
        _ => domain.id_column.clone(),
    };
    let out_domain = match &id {
        Some(id) => {
            let carried = columns
                .iter()
                .any(|(n, e)| n == id && *e == Expr::Col(id.clone()));
            if !carried {
                return Err(Error::IdColumnDropped(id.clone()));
            }
            TableDomain::with_id(out_schema.clone(), id.clone())?
        }
        None => TableDomain::new(out_schema.clone()),
    };
    let in_schema = domain.schema.clone();
    let out_schema = Arc::new(out_schema);
    Transformation::new(
        Domain::Table(domain),
        Domain::Table(out_domain),
        metric.clone(),
        metric,
        one(),
        TransformKind::Map,
        move |x| {
            let t = x.as_table()?;
            let rows = t
                .rows()
                .iter()
                .map(|r| {
                    columns
                        .iter()
                        .map(|(_, e)| e.eval_value(&in_schema, r))
                        .collect::<Result<Vec<_>>>()
                        .map(Row)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Dataset::Table(Table::from_parts(Arc::clone(&out_schema), rows)))
        },
    )
}

/// How a flat map expands one row into several. Each output row is the input
/// row with one new column appended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Expansion {
    /// One output row per expression, in order.
    Values { column: String, exprs: Vec<Expr> },
    /// One output row per nonempty piece of a text column split on `delimiter`.
    Split {
        source: String,
        delimiter: String,
        column: String,
    },
}

impl Expansion {
    fn output_column(&self, schema: &Schema) -> Result<Column> {
        match self {
            Expansion::Values { column, exprs } => {
                let mut ty = None;
                for e in exprs {
                    let t = match e.type_of(schema)? {
                        ExprType::Column(t) => t,
                        ExprType::Bool => {
                            return Err(Error::TypeError("flat map value is boolean".into()))
                        }
                    };
                    if ty.is_some_and(|prev| prev != t) {
                        return Err(Error::TypeError(
                            "flat map expressions must share one type".into(),
                        ));
                    }
                    ty = Some(t);
                }
                let ty = ty.ok_or_else(|| Error::TypeError("flat map with no expressions".into()))?;
                Ok(Column::new(column.clone(), ty))
            }
            Expansion::Split {
                source,
                delimiter,
                column,
            } => {
                if schema.column(source)?.ty != ColumnType::Text {
                    return Err(Error::TypeError(format!("cannot split non-text column `{source}`")));
                }
                if delimiter.is_empty() {
                    return Err(Error::TypeError("empty split delimiter".into()));
                }
                Ok(Column::new(column.clone(), ColumnType::Text))
            }
        }
    }

    fn expand(&self, schema: &Schema, row: &Row, limit: usize) -> Result<Vec<Value>> {
        match self {
            Expansion::Values { exprs, .. } => exprs
                .iter()
                .take(limit)
                .map(|e| e.eval_value(schema, row))
                .collect(),
            Expansion::Split {
                source, delimiter, ..
            } => {
                let idx = schema
                    .index_of(source)
                    .ok_or_else(|| Error::UnknownColumn(source.clone()))?;
                let Value::Text(s) = row.get(idx) else {
                    return Err(Error::TypeError("split source is not text".into()));
                };
                Ok(s.split(delimiter.as_str())
                    .filter(|p| !p.is_empty())
                    .take(limit)
                    .map(Value::text)
                    .collect())
            }
        }
    }
}

/// Expands each row into at most `max_rows` rows (extra rows are dropped in
/// expansion order). `max_rows`-stable under symmetric difference, 1-stable
/// under add/remove-identifier.
pub fn make_flat_map(
    domain: TableDomain,
    metric: Metric,
    expansion: Expansion,
    max_rows: u64,
) -> Result<Transformation> {
    check_row_metric(&domain, &metric)?;
    if max_rows == 0 {
        return Err(Error::NonPositiveBound(0));
    }
    let new_col = expansion.output_column(&domain.schema)?;
    let mut cols = domain.schema.columns().to_vec();
    cols.push(new_col);
    let out_schema = Schema::new(cols)?;
    let out_domain = TableDomain {
        schema: out_schema.clone(),
        id_column: domain.id_column.clone(),
    };
    let stability = match metric {
        Metric::AddRemoveIds(_) => one(),
        _ => linear(max_rows),
    };
    let in_schema = domain.schema.clone();
    let out_schema = Arc::new(out_schema);
    let limit = usize::try_from(max_rows).unwrap_or(usize::MAX);
    Transformation::new(
        Domain::Table(domain),
        Domain::Table(out_domain),
        metric.clone(),
        metric,
        stability,
        TransformKind::FlatMap { max_rows },
        move |x| {
            let t = x.as_table()?;
            let mut rows = Vec::new();
            for r in t.rows() {
                for v in expansion.expand(&in_schema, r, limit)? {
                    let mut values = r.values().to_vec();
                    values.push(v);
                    rows.push(Row(values));
                }
            }
            Ok(Dataset::Table(Table::from_parts(Arc::clone(&out_schema), rows)))
        },
    )
}

fn key_indices(schema: &Schema, on: &[String]) -> Result<Vec<usize>> {
    on.iter()
        .map(|k| schema.index_of(k).ok_or_else(|| Error::UnknownColumn(k.clone())))
        .collect()
}

fn check_key_types(left: &Schema, right: &Schema, on: &[String]) -> Result<()> {
    if on.is_empty() {
        return Err(Error::TypeError("join needs at least one key column".into()));
    }
    for k in on {
        let (l, r) = (left.column(k)?.ty, right.column(k)?.ty);
        if l != r {
            return Err(Error::KeyTypeMismatch {
                column: k.clone(),
                left: l.to_string(),
                right: r.to_string(),
            });
        }
    }
    Ok(())
}

/// Left columns followed by the right side's non-key columns.
fn joined_schema(left: &Schema, right: &Schema, on: &[String]) -> Result<Schema> {
    let mut cols = left.columns().to_vec();
    for c in right.columns() {
        if on.contains(&c.name) {
            continue;
        }
        if left.index_of(&c.name).is_some() {
            return Err(Error::DuplicateColumn(c.name.clone()));
        }
        cols.push(c.clone());
    }
    Schema::new(cols)
}

fn inner_join(left: &Table, right: &Table, on: &[String], out: &Arc<Schema>) -> Result<Table> {
    let lk = key_indices(left.schema(), on)?;
    let rk = key_indices(right.schema(), on)?;
    let rest: Vec<usize> = (0..right.schema().len()).filter(|i| !rk.contains(i)).collect();
    let mut index: BTreeMap<Vec<Value>, Vec<&Row>> = BTreeMap::new();
    for r in right.rows() {
        index
            .entry(rk.iter().map(|&i| r.get(i).clone()).collect())
            .or_default()
            .push(r);
    }
    let mut rows = Vec::new();
    for l in left.rows() {
        let key: Vec<Value> = lk.iter().map(|&i| l.get(i).clone()).collect();
        for r in index.get(&key).into_iter().flatten() {
            let mut values = l.values().to_vec();
            values.extend(rest.iter().map(|&i| r.get(i).clone()));
            rows.push(Row(values));
        }
    }
    Ok(Table::from_parts(Arc::clone(out), rows))
}

/// Inner join against a fixed public table. Stability is the largest number
/// of public rows sharing one key value (at least 1). Not available under
/// add/remove-identifier; truncate first.
pub fn make_public_join(
    domain: TableDomain,
    metric: Metric,
    public: Table,
    on: Vec<String>,
) -> Result<Transformation> {
    if metric != Metric::SymmetricDifference {
        return Err(Error::MetricMismatch(format!(
            "public joins require SymmetricDifference (truncate by identifier first), got {metric}"
        )));
    }
    check_key_types(&domain.schema, public.schema(), &on)?;
    let out_schema = joined_schema(&domain.schema, public.schema(), &on)?;
    let mu = partition_by(&public, &on)?
        .values()
        .map(|rows| rows.len() as u64)
        .max()
        .unwrap_or(0)
        .max(1);
    let out_domain = TableDomain {
        schema: out_schema.clone(),
        id_column: domain.id_column.clone(),
    };
    let out_schema = Arc::new(out_schema);
    Transformation::new(
        Domain::Table(domain),
        Domain::Table(out_domain),
        metric.clone(),
        metric,
        linear(mu),
        TransformKind::PublicJoin { max_multiplicity: mu },
        move |x| Ok(Dataset::Table(inner_join(x.as_table()?, &public, &on, &out_schema)?)),
    )
}

/// Keeps, for every value of `keys`, the first `bound` rows in canonical row
/// order.
fn truncate_per_key(t: &Table, keys: &[String], bound: u64) -> Result<Table> {
    let canon = t.canonicalize();
    let limit = usize::try_from(bound).unwrap_or(usize::MAX);
    let groups = partition_by(&canon, keys)?;
    let mut keep = vec![false; canon.len()];
    for idx in groups.values() {
        for &i in idx.iter().take(limit) {
            keep[i] = true;
        }
    }
    let rows = canon
        .rows()
        .iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then(|| r.clone()))
        .collect();
    Ok(Table::from_parts(canon.shared_schema(), rows))
}

/// Exact output bound of [`make_private_join`] for per-side input distances.
///
/// Adding or removing one row changes a per-key truncated side by at most two
/// rows (the row itself and the one it displaces), and every truncated row
/// joins with at most the other side's bound.
pub fn private_join_bound(left_bound: u64, right_bound: u64, d_left: u64, d_right: u64) -> u64 {
    2 * (right_bound * d_left + left_bound * d_right)
}

/// Inner join of two private tables. Each side is first truncated to at most
/// `left_bound` / `right_bound` rows per join-key value. The input metric is
/// `TableTuple([SymmetricDifference, SymmetricDifference])`; the stability
/// map is the linear relaxation `2 · max(b_l, b_r)` of
/// [`private_join_bound`].
pub fn make_private_join(
    left: TableDomain,
    right: TableDomain,
    on: Vec<String>,
    left_bound: u64,
    right_bound: u64,
) -> Result<Transformation> {
    for b in [left_bound, right_bound] {
        if b == 0 {
            return Err(Error::NonPositiveBound(b));
        }
    }
    check_key_types(&left.schema, &right.schema, &on)?;
    let out_schema = joined_schema(&left.schema, &right.schema, &on)?;
    let out_domain = TableDomain {
        schema: out_schema.clone(),
        id_column: left.id_column.clone(),
    };
    let out_schema = Arc::new(out_schema);
    let metric = Metric::TableTuple(vec![Metric::SymmetricDifference; 2]);
    Transformation::new(
        Domain::Tuple(vec![left, right]),
        Domain::Table(out_domain),
        metric,
        Metric::SymmetricDifference,
        linear(2 * left_bound.max(right_bound)),
        TransformKind::PrivateJoin {
            left_bound,
            right_bound,
        },
        move |x| {
            let pair = x.as_tuple()?;
            let l = truncate_per_key(&pair[0], &on, left_bound)?;
            let r = truncate_per_key(&pair[1], &on, right_bound)?;
            Ok(Dataset::Table(inner_join(&l, &r, &on, &out_schema)?))
        },
    )
}

/// Keeps the first `bound` rows (canonical order) of every identifier,
/// converting `AddRemoveIds` into `SymmetricDifference`. `bound`-stable.
pub fn make_truncate_by_id(domain: TableDomain, id_column: &str, bound: u64) -> Result<Transformation> {
    if bound == 0 {
        return Err(Error::NonPositiveBound(0));
    }
    if domain.schema.index_of(id_column).is_none() {
        return Err(Error::MissingIdColumn(id_column.to_string()));
    }
    let keys = vec![id_column.to_string()];
    Transformation::new(
        Domain::Table(domain.clone()),
        Domain::Table(domain),
        Metric::AddRemoveIds(id_column.to_string()),
        Metric::SymmetricDifference,
        linear(bound),
        TransformKind::TruncateById { bound },
        move |x| Ok(Dataset::Table(truncate_per_key(x.as_table()?, &keys, bound)?)),
    )
}

/// Deterministic row-to-subsets assignment for [`make_overlapping_subsets`].
#[derive(Clone)]
pub struct Assignment(Arc<dyn Fn(&Row) -> Vec<usize> + Send + Sync>);

impl Assignment {
    pub fn new(f: impl Fn(&Row) -> Vec<usize> + Send + Sync + 'static) -> Self {
        Assignment(Arc::new(f))
    }

    /// Looks up the value of column `index` in `mapping`; unmapped values go
    /// nowhere.
    pub fn by_column(index: usize, mapping: BTreeMap<Value, Vec<usize>>) -> Self {
        Assignment::new(move |r| mapping.get(r.get(index)).cloned().unwrap_or_default())
    }

    fn indices(&self, row: &Row, bound: usize) -> Vec<usize> {
        let mut ix = (self.0)(row);
        ix.sort_unstable();
        ix.dedup();
        ix.truncate(bound);
        ix
    }
}

/// Copies each row into the subsets chosen by `assign`, keeping at most
/// `contribution_bound` indices per row (smallest first). Output is a list
/// of `num_subsets` tables under `BoundedLists(SymmetricDifference)`;
/// `contribution_bound`-stable.
pub fn make_overlapping_subsets(
    domain: TableDomain,
    assign: Assignment,
    num_subsets: usize,
    contribution_bound: usize,
) -> Result<Transformation> {
    if contribution_bound == 0 {
        return Err(Error::NonPositiveBound(0));
    }
    let out_domain = Domain::List {
        element: domain.clone(),
        len: num_subsets,
    };
    Transformation::new(
        Domain::Table(domain),
        out_domain,
        Metric::SymmetricDifference,
        Metric::bounded_lists(),
        linear(contribution_bound as u64),
        TransformKind::OverlappingSubsets {
            num_subsets,
            contribution_bound,
        },
        move |x| {
            let t = x.as_table()?;
            let mut parts: Vec<Vec<Row>> = vec![Vec::new(); num_subsets];
            for r in t.rows() {
                for i in assign.indices(r, contribution_bound) {
                    let slot = parts.get_mut(i).ok_or(Error::BadIndex {
                        index: i,
                        num_subsets,
                    })?;
                    slot.push(r.clone());
                }
            }
            Ok(Dataset::List(
                parts
                    .into_iter()
                    .map(|rows| Table::from_parts(t.shared_schema(), rows))
                    .collect(),
            ))
        },
    )
}

/// Re-reads a table as partitioned by `keys`: the identity function from
/// `SymmetricDifference` to `GroupedBy(keys, SymmetricDifference)`. 1-stable
/// because row-level symmetric difference decomposes over key groups.
pub fn make_group_by_key(domain: TableDomain, keys: Vec<String>) -> Result<Transformation> {
    for k in &keys {
        domain
            .schema
            .column(k)
            .map_err(|_| Error::MissingKeyColumn(k.clone()))?;
    }
    Transformation::new(
        Domain::Table(domain.clone()),
        Domain::Table(domain),
        Metric::SymmetricDifference,
        Metric::grouped_by(keys.clone()),
        one(),
        TransformKind::GroupByKey { keys },
        |x| Ok(x.clone()),
    )
}

/// Runs two table-valued transformations on the same input and pairs their
/// outputs under `TableTuple` (L1). Stability is the sum of both.
pub fn make_product(left: &Transformation, right: &Transformation) -> Result<Transformation> {
    if left.input_domain != right.input_domain || left.input_metric != right.input_metric {
        return Err(Error::DomainMismatch(
            "product components must share input domain and metric".into(),
        ));
    }
    let out = Domain::Tuple(vec![
        left.output_domain.as_table()?.clone(),
        right.output_domain.as_table()?.clone(),
    ]);
    let out_metric = Metric::TableTuple(vec![left.output_metric.clone(), right.output_metric.clone()]);
    let stability = DistanceMap::sum(&[left.stability.clone(), right.stability.clone()])?;
    let (f, g) = (Arc::clone(&left.function), Arc::clone(&right.function));
    let mut t = Transformation::new(
        left.input_domain.clone(),
        out,
        left.input_metric.clone(),
        out_metric,
        stability,
        TransformKind::Product,
        move |x| {
            let a = f(x)?.as_table()?.clone();
            let b = g(x)?.as_table()?.clone();
            Ok(Dataset::Tuple(vec![a, b]))
        },
    )?;
    t.steps = left
        .steps
        .iter()
        .chain(&right.steps)
        .cloned()
        .chain([TransformKind::Product])
        .collect();
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{col, lit};
    use crate::metrics::dataset_distance;
    use crate::row;

    fn age_schema() -> Schema {
        Schema::from_pairs([("age", ColumnType::Int64)]).unwrap()
    }

    fn sd() -> Metric {
        Metric::SymmetricDifference
    }

    fn table(schema: &Schema, rows: Vec<Row>) -> Dataset {
        Dataset::Table(Table::new(schema.clone(), rows).unwrap())
    }

    #[test]
    fn true_filter_is_identity() {
        let s = age_schema();
        let f = make_filter(TableDomain::new(s.clone()), sd(), lit(1i64).eq(lit(1i64))).unwrap();
        let x = table(&s, vec![row![1i64], row![5i64], row![5i64]]);
        assert_eq!(f.apply(&x).unwrap(), x);
    }

    #[test]
    fn older_than_forty() {
        let s = age_schema();
        let f = make_filter(TableDomain::new(s.clone()), sd(), col("age").gt(lit(40i64))).unwrap();
        let out = f.apply(&table(&s, vec![row![41i64], row![39i64]])).unwrap();
        assert_eq!(out, table(&s, vec![row![41i64]]));
        assert_eq!(f.stability().shape(), &crate::Shape::Linear(ExtRational::one()));
    }

    #[test]
    fn filter_rejects_non_boolean_predicate() {
        let d = TableDomain::new(age_schema());
        assert!(matches!(make_filter(d.clone(), sd(), col("age")), Err(Error::TypeError(_))));
        assert!(matches!(
            make_filter(d, sd(), col("nope").gt(lit(1i64))),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn map_derives_columns() {
        let s = Schema::from_pairs([("col1", ColumnType::Int64)]).unwrap();
        let m = make_map(
            TableDomain::new(s.clone()),
            sd(),
            vec![("col1".into(), col("col1")), ("col2".into(), col("col1").add(lit(1i64)))],
        )
        .unwrap();
        let out = m.apply(&table(&s, vec![row![1i64], row![2i64]])).unwrap();
        let s2 = Schema::from_pairs([("col1", ColumnType::Int64), ("col2", ColumnType::Int64)]).unwrap();
        assert_eq!(out, table(&s2, vec![row![1i64, 2i64], row![2i64, 3i64]]));
    }

    #[test]
    fn identity_projection() {
        let s = age_schema();
        let m = make_map(TableDomain::new(s.clone()), sd(), vec![("age".into(), col("age"))]).unwrap();
        let x = table(&s, vec![row![3i64], row![3i64]]);
        assert_eq!(m.apply(&x).unwrap(), x);
    }

    #[test]
    fn map_must_keep_identifier() {
        let s = Schema::from_pairs([("u", ColumnType::Text), ("x", ColumnType::Int64)]).unwrap();
        let d = TableDomain::with_id(s, "u").unwrap();
        let metric = Metric::AddRemoveIds("u".into());
        let dropped = make_map(d.clone(), metric.clone(), vec![("x".into(), col("x"))]);
        assert!(matches!(dropped, Err(Error::IdColumnDropped(_))));
        let renamed = make_map(d.clone(), metric.clone(), vec![("v".into(), col("u")), ("x".into(), col("x"))]);
        assert!(matches!(renamed, Err(Error::IdColumnDropped(_))));
        let kept = make_map(d, metric, vec![("u".into(), col("u")), ("y".into(), col("x").mul(lit(2i64)))]);
        assert!(kept.is_ok());
    }

    #[test]
    fn flat_map_truncates_expansion() {
        let s = age_schema();
        let exprs = (0..5).map(|i| col("age").add(lit(i as i64))).collect();
        let f = make_flat_map(
            TableDomain::new(s.clone()),
            sd(),
            Expansion::Values { column: "v".into(), exprs },
            3,
        )
        .unwrap();
        let out = f.apply(&table(&s, vec![row![10i64]])).unwrap();
        let t = out.as_table().unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows()[2], row![10i64, 12i64]);
        assert_eq!(f.stability().slope(), Some(&ExtRational::from_u64(3)));
    }

    #[test]
    fn flat_map_singleton_is_map() {
        let s = age_schema();
        let f = make_flat_map(
            TableDomain::new(s.clone()),
            sd(),
            Expansion::Values { column: "copy".into(), exprs: vec![col("age")] },
            1,
        )
        .unwrap();
        let out = f.apply(&table(&s, vec![row![1i64], row![2i64]])).unwrap();
        assert_eq!(out.as_table().unwrap().len(), 2);
        assert_eq!(f.stability().slope(), Some(&ExtRational::one()));
    }

    #[test]
    fn split_expansion() {
        let s = Schema::from_pairs([("tags", ColumnType::Text)]).unwrap();
        let f = make_flat_map(
            TableDomain::new(s.clone()),
            sd(),
            Expansion::Split { source: "tags".into(), delimiter: ";".into(), column: "tag".into() },
            2,
        )
        .unwrap();
        let out = f.apply(&table(&s, vec![row!["a;;b;c"]])).unwrap();
        let tags: Vec<String> = out.as_table().unwrap().rows().iter().map(|r| r.get(1).to_string()).collect();
        assert_eq!(tags, ["a", "b"]);
    }

    fn kv() -> Schema {
        Schema::from_pairs([("k", ColumnType::Text), ("v", ColumnType::Int64)]).unwrap()
    }

    fn public(rows: Vec<Row>) -> Table {
        let s = Schema::from_pairs([("k", ColumnType::Text), ("label", ColumnType::Text)]).unwrap();
        Table::new(s, rows).unwrap()
    }

    #[test]
    fn public_join_multiplicity() {
        let d = TableDomain::new(kv());
        let unique = public(vec![row!["a", "x"], row!["b", "y"]]);
        let j = make_public_join(d.clone(), sd(), unique, vec!["k".into()]).unwrap();
        assert_eq!(j.stability().slope(), Some(&ExtRational::one()));
        let triple = public(vec![row!["a", "x"], row!["a", "y"], row!["a", "z"], row!["b", "w"]]);
        let j = make_public_join(d, sd(), triple, vec!["k".into()]).unwrap();
        assert_eq!(j.stability().slope(), Some(&ExtRational::from_u64(3)));
        let out = j.apply(&table(&kv(), vec![row!["a", 1i64], row!["c", 2i64]])).unwrap();
        assert_eq!(out.as_table().unwrap().len(), 3);
        assert_eq!(out.as_table().unwrap().schema().len(), 3);
    }

    #[test]
    fn public_join_errors() {
        let d = TableDomain::new(kv());
        let s = Schema::from_pairs([("k", ColumnType::Int64)]).unwrap();
        let bad = Table::empty(s);
        assert!(matches!(
            make_public_join(d.clone(), sd(), bad, vec!["k".into()]),
            Err(Error::KeyTypeMismatch { .. })
        ));
        let id_dom = TableDomain::with_id(kv(), "k").unwrap();
        assert!(matches!(
            make_public_join(id_dom, Metric::AddRemoveIds("k".into()), public(vec![]), vec!["k".into()]),
            Err(Error::MetricMismatch(_))
        ));
    }

    #[test]
    fn private_join_unit_bounds() {
        let right_schema = Schema::from_pairs([("k", ColumnType::Text), ("w", ColumnType::Int64)]).unwrap();
        let j = make_private_join(
            TableDomain::new(kv()),
            TableDomain::new(right_schema.clone()),
            vec!["k".into()],
            1,
            1,
        )
        .unwrap();
        let l = Table::new(kv(), vec![row!["a", 1i64], row!["b", 2i64]]).unwrap();
        let r = Table::new(right_schema, vec![row!["a", 10i64], row!["c", 30i64]]).unwrap();
        let out = j.apply(&Dataset::Tuple(vec![l, r])).unwrap();
        assert_eq!(out.as_table().unwrap().rows(), &[row!["a", 1i64, 10i64]]);
        assert!(matches!(
            make_private_join(TableDomain::new(kv()), TableDomain::new(kv()), vec!["k".into()], 0, 1),
            Err(Error::NonPositiveBound(0))
        ));
        assert_eq!(private_join_bound(1, 2, 1, 0), 4);
    }

    #[test]
    fn private_join_displacement_is_covered() {
        // Adding `b` to a full key group displaces `c`; every displaced or
        // admitted row joins with both right rows.
        let right_schema = Schema::from_pairs([("k", ColumnType::Text), ("w", ColumnType::Int64)]).unwrap();
        let j = make_private_join(TableDomain::new(kv()), TableDomain::new(right_schema.clone()), vec!["k".into()], 2, 2).unwrap();
        let r = Table::new(right_schema, vec![row!["a", 1i64], row!["a", 2i64]]).unwrap();
        let x = Table::new(kv(), vec![row!["a", 1i64], row!["a", 3i64]]).unwrap();
        let y = Table::new(kv(), vec![row!["a", 1i64], row!["a", 2i64], row!["a", 3i64]]).unwrap();
        let ox = j.apply(&Dataset::Tuple(vec![x, r.clone()])).unwrap();
        let oy = j.apply(&Dataset::Tuple(vec![y, r])).unwrap();
        let d = dataset_distance(&sd(), &ox, &oy).unwrap();
        assert_eq!(d, ExtRational::from_u64(4));
        assert_eq!(private_join_bound(2, 2, 1, 0), 4);
    }

    #[test]
    fn truncate_by_id_keeps_bound_per_id() {
        let s = Schema::from_pairs([("u", ColumnType::Text), ("x", ColumnType::Int64)]).unwrap();
        let d = TableDomain::with_id(s.clone(), "u").unwrap();
        let t = make_truncate_by_id(d, "u", 2).unwrap();
        let mut rows: Vec<Row> = (0..5).map(|i| row!["u", i as i64]).collect();
        rows.push(row!["v", 0i64]);
        let x = table(&s, rows);
        let out = t.apply(&x).unwrap();
        let out_t = out.as_table().unwrap();
        assert_eq!(out_t.len(), 3);
        let counts = partition_by(out_t, &["u".to_string()]).unwrap();
        assert!(counts.values().all(|v| v.len() <= 2));
        let input_counts = x.as_table().unwrap().multiplicities();
        for (r, c) in out_t.multiplicities() {
            assert!(input_counts.get(r).copied().unwrap_or(0) >= c);
        }
        assert_eq!(t.apply(&out).unwrap(), out);
    }

    #[test]
    fn truncate_requires_id_column() {
        let d = TableDomain::new(age_schema());
        assert!(matches!(make_truncate_by_id(d, "u", 1), Err(Error::MissingIdColumn(_))));
    }

    #[test]
    fn overlapping_subsets_copy_rows() {
        let s = kv();
        let assign = Assignment::new(|r| if r.get(0) == &Value::text("a") { vec![2, 0, 0] } else { vec![1] });
        let t = make_overlapping_subsets(TableDomain::new(s.clone()), assign, 3, 2).unwrap();
        let x = table(&s, vec![row!["a", 1i64], row!["b", 1i64]]);
        let y = table(&s, vec![row!["b", 1i64]]);
        let (ox, oy) = (t.apply(&x).unwrap(), t.apply(&y).unwrap());
        let lens: Vec<usize> = ox.as_list().unwrap().iter().map(|t| t.len()).collect();
        assert_eq!(lens, [1, 1, 1]);
        assert_eq!(dataset_distance(&Metric::bounded_lists(), &ox, &oy).unwrap(), ExtRational::from_u64(2));
    }

    #[test]
    fn overlapping_subsets_bad_index() {
        let s = kv();
        let t = make_overlapping_subsets(TableDomain::new(s.clone()), Assignment::new(|_| vec![5]), 3, 1).unwrap();
        assert!(matches!(
            t.apply(&table(&s, vec![row!["a", 1i64]])),
            Err(Error::BadIndex { index: 5, num_subsets: 3 })
        ));
    }

    #[test]
    fn partition_assignment_is_parallel() {
        let s = kv();
        let mapping = [(Value::text("a"), vec![0]), (Value::text("b"), vec![1])].into_iter().collect();
        let t = make_overlapping_subsets(TableDomain::new(s.clone()), Assignment::by_column(0, mapping), 2, 1).unwrap();
        let x = table(&s, vec![row!["a", 1i64], row!["b", 1i64], row!["b", 2i64]]);
        let y = table(&s, vec![row!["a", 1i64]]);
        let d_in = dataset_distance(&sd(), &x, &y).unwrap();
        let d_out = dataset_distance(&Metric::bounded_lists(), &t.apply(&x).unwrap(), &t.apply(&y).unwrap()).unwrap();
        assert_eq!(d_in, d_out);
    }

    #[test]
    fn chain_checks_and_composes() {
        let s = age_schema();
        let d = TableDomain::new(s.clone());
        let f = make_filter(d.clone(), sd(), col("age").gt(lit(1i64))).unwrap();
        let m = make_map(d.clone(), sd(), vec![("age".into(), col("age"))]).unwrap();
        assert_eq!(chain(&f, &m).unwrap().stability().slope(), Some(&ExtRational::one()));
        let fm = make_flat_map(d.clone(), sd(), Expansion::Values { column: "c".into(), exprs: vec![col("age"); 3] }, 3).unwrap();
        let c = chain(&f, &fm).unwrap();
        assert_eq!(c.stability().slope(), Some(&ExtRational::from_u64(3)));
        assert_eq!(c.steps(), &[TransformKind::Filter, TransformKind::FlatMap { max_rows: 3 }]);
        assert!(matches!(chain(&fm, &f), Err(Error::DomainMismatch(_))));
        let g = make_group_by_key(d, vec!["age".into()]).unwrap();
        assert!(matches!(chain(&g, &f), Err(Error::MetricMismatch(_))));
    }
}
