//! Randomized components with privacy maps, and the operators that combine
//! them.
//!
//! A [`Measurement`] satisfies: for inputs at input-metric distance `≤ d`,
//! output distributions are within `privacy_function(d)` under the output
//! measure. Composite measurements derive their privacy map from their parts;
//! nothing here asserts a guarantee by fiat.

mod aggregates;
pub mod noise;
mod queryable;
mod rng;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::metrics::{partition_by, Dataset, DistanceMap, Domain, Measure, Metric};
use crate::tabledata::{Column, ColumnType, Row, Schema, Table, TableDomain, Value};
use crate::transformations::{TransformKind, Transformation};

pub use aggregates::{make_average, make_count, make_quantile, make_sum, NoiseBudget};
pub use noise::{make_discrete_gaussian, make_discrete_gaussian_for_rho, make_geometric, NoisePrimitive};
pub use queryable::{make_queryable, Queryable};
pub use rng::{Label, RngStream};

/// Value released by a measurement.
#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    Int(i64),
    Real(f64),
    Tuple(Vec<Output>),
    Table(Table),
}

/// Static description of an [`Output`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutputKind {
    Int,
    Real,
    Tuple(Vec<OutputKind>),
    Table(Schema),
}

/// Inspectable structure of a measurement.
#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Constant,
    Count {
        noise: NoisePrimitive,
    },
    Sum {
        column: String,
        low: f64,
        high: f64,
        granularity: ExtRational,
        noise: NoisePrimitive,
    },
    Average {
        sum: Box<Plan>,
        count: Box<Plan>,
    },
    Quantile {
        column: String,
        quantile: f64,
        low: f64,
        high: f64,
        bins: usize,
        epsilon: ExtRational,
    },
    Sequential(Vec<Plan>),
    PerGroup {
        keys: Vec<String>,
        num_groups: usize,
        inner: Box<Plan>,
    },
    OverSubsets(Vec<Plan>),
    Chained {
        steps: Vec<TransformKind>,
        inner: Box<Plan>,
    },
}

type EvalFn = dyn Fn(&Dataset, &RngStream) -> Result<Output> + Send + Sync;

#[derive(Clone)]
pub struct Measurement {
    input_domain: Domain,
    input_metric: Metric,
    output_measure: Measure,
    privacy_function: DistanceMap,
    output_kind: OutputKind,
    plan: Plan,
    function: Arc<EvalFn>,
}

impl fmt::Debug for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Measurement")
            .field("input_metric", &self.input_metric)
            .field("output_measure", &self.output_measure)
            .field("privacy_function", &self.privacy_function)
            .field("plan", &self.plan)
            .finish()
    }
}

impl Measurement {
    pub(crate) fn new(
        input_domain: Domain,
        input_metric: Metric,
        output_measure: Measure,
        privacy_function: DistanceMap,
        output_kind: OutputKind,
        plan: Plan,
        function: impl Fn(&Dataset, &RngStream) -> Result<Output> + Send + Sync + 'static,
    ) -> Result<Self> {
        input_metric.check_domain(&input_domain)?;
        Ok(Measurement {
            input_domain,
            input_metric,
            output_measure,
            privacy_function,
            output_kind,
            plan,
            function: Arc::new(function),
        })
    }

    /// Evaluates on `data`, drawing all randomness from `stream`.
    pub fn invoke(&self, data: &Dataset, stream: &RngStream) -> Result<Output> {
        self.input_domain.check(data)?;
        (self.function)(data, stream)
    }

    pub fn input_domain(&self) -> &Domain {
        &self.input_domain
    }

    pub fn input_metric(&self) -> &Metric {
        &self.input_metric
    }

    pub fn output_measure(&self) -> Measure {
        self.output_measure
    }

    pub fn privacy_function(&self) -> &DistanceMap {
        &self.privacy_function
    }

    pub fn output_kind(&self) -> &OutputKind {
        &self.output_kind
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }
}

/// A measurement that ignores its input and always releases `output`.
pub fn make_constant(domain: Domain, metric: Metric, measure: Measure, output: Output) -> Result<Measurement> {
    let kind = kind_of(&output);
    Measurement::new(
        domain,
        metric,
        measure,
        DistanceMap::zero(),
        kind,
        Plan::Constant,
        move |_, _| Ok(output.clone()),
    )
}

fn kind_of(o: &Output) -> OutputKind {
    match o {
        Output::Int(_) => OutputKind::Int,
        Output::Real(_) => OutputKind::Real,
        Output::Tuple(v) => OutputKind::Tuple(v.iter().map(kind_of).collect()),
        Output::Table(t) => OutputKind::Table(t.schema().clone()),
    }
}

/// `measurement ∘ transformation`, with privacy map
/// `measurement.privacy ∘ transformation.stability`.
pub fn make_chain_tm(transformation: &Transformation, measurement: &Measurement) -> Result<Measurement> {
    if transformation.output_domain() != measurement.input_domain() {
        return Err(Error::DomainMismatch(format!(
            "transformation output {:?} does not match measurement input {:?}",
            transformation.output_domain(),
            measurement.input_domain()
        )));
    }
    if transformation.output_metric() != measurement.input_metric() {
        return Err(Error::MetricMismatch(format!(
            "transformation output metric {} does not match measurement input metric {}",
            transformation.output_metric(),
            measurement.input_metric()
        )));
    }
    let t = transformation.clone();
    let m = Arc::clone(&measurement.function);
    let plan = match &measurement.plan {
        Plan::Chained { steps, inner } => Plan::Chained {
            steps: t.steps().iter().chain(steps).cloned().collect(),
            inner: inner.clone(),
        },
        other => Plan::Chained {
            steps: t.steps().to_vec(),
            inner: Box::new(other.clone()),
        },
    };
    Measurement::new(
        transformation.input_domain().clone(),
        transformation.input_metric().clone(),
        measurement.output_measure,
        DistanceMap::compose(&measurement.privacy_function, transformation.stability()),
        measurement.output_kind.clone(),
        plan,
        move |x, s| m(&t.apply(x)?, s),
    )
}

fn check_shared_interface(ms: &[Measurement]) -> Result<()> {
    let first = ms.first().ok_or(Error::EmptyList)?;
    for m in &ms[1..] {
        if m.input_domain != first.input_domain {
            return Err(Error::DomainMismatch("measurements have different input domains".into()));
        }
        if m.input_metric != first.input_metric {
            return Err(Error::MetricMismatch("measurements have different input metrics".into()));
        }
        if m.output_measure != first.output_measure {
            return Err(Error::MeasureMismatch("measurements have different output measures".into()));
        }
    }
    Ok(())
}

/// Runs every measurement on the same input with independent sub-streams.
/// The privacy map is the sum of the parts.
pub fn compose_sequential(ms: &[Measurement]) -> Result<Measurement> {
    check_shared_interface(ms)?;
    let first = &ms[0];
    let maps: Vec<DistanceMap> = ms.iter().map(|m| m.privacy_function.clone()).collect();
    let functions: Vec<Arc<EvalFn>> = ms.iter().map(|m| Arc::clone(&m.function)).collect();
    Measurement::new(
        first.input_domain.clone(),
        first.input_metric.clone(),
        first.output_measure,
        DistanceMap::sum(&maps)?,
        OutputKind::Tuple(ms.iter().map(|m| m.output_kind.clone()).collect()),
        Plan::Sequential(ms.iter().map(|m| m.plan.clone()).collect()),
        move |x, s| {
            functions
                .iter()
                .enumerate()
                .map(|(i, f)| f(x, &s.child(i)))
                .collect::<Result<Vec<_>>>()
                .map(Output::Tuple)
        },
    )
}

fn require_superadditive(map: &DistanceMap) -> Result<()> {
    if map.is_superadditive() {
        Ok(())
    } else {
        Err(Error::NonLinearPrivacyFunction(format!("{map:?}")))
    }
}

fn scalar_column_type(kind: &OutputKind) -> Result<ColumnType> {
    match kind {
        OutputKind::Int => Ok(ColumnType::Int64),
        OutputKind::Real => Ok(ColumnType::Float64),
        other => Err(Error::TypeError(format!(
            "per-group measurements must release a scalar, not {other:?}"
        ))),
    }
}

fn scalar_value(o: Output) -> Result<Value> {
    match o {
        Output::Int(i) => Ok(Value::Int(i)),
        Output::Real(x) => Value::float(x).ok_or_else(|| Error::TypeError("non-finite release".into())),
        other => Err(Error::TypeError(format!("expected a scalar, got {other:?}"))),
    }
}

/// Stream label of a group: its key tuple as JSON.
fn group_label(key: &[Value]) -> String {
    serde_json::to_string(key).expect("values serialize")
}

/// Parallel composition over an explicit key set.
///
/// The input metric is `GroupedBy(key columns, SymmetricDifference)`. For every
/// key tuple of `keyset` (and only those), `per_group` runs on the rows with
/// that key, or on an empty table when there are none. Because the grouped
/// distance is the sum of per-group distances and the per-group map is linear
/// or quadratic (superadditive), the total loss is bounded by
/// `per_group.privacy_function` itself, however many groups there are.
///
/// The release is a table with the key columns followed by `value_column`, in
/// canonical key order.
pub fn compose_per_group(keyset: &Table, per_group: &Measurement, value_column: &str) -> Result<Measurement> {
    require_superadditive(&per_group.privacy_function)?;
    if per_group.input_metric != Metric::SymmetricDifference {
        return Err(Error::MetricMismatch(format!(
            "per-group measurement must take SymmetricDifference, got {}",
            per_group.input_metric
        )));
    }
    let domain: TableDomain = per_group.input_domain.as_table()?.clone();
    let keys: Vec<String> = keyset.schema().names().map(str::to_string).collect();
    for c in keyset.schema().columns() {
        let found = domain
            .schema
            .column(&c.name)
            .map_err(|_| Error::MissingKeyColumn(c.name.clone()))?;
        if found.ty != c.ty {
            return Err(Error::TypeMismatch(format!(
                "key column `{}` is {} in the data but {} in the key set",
                c.name, found.ty, c.ty
            )));
        }
    }
    let value_ty = scalar_column_type(&per_group.output_kind)?;
    let mut out_cols = keyset.schema().columns().to_vec();
    out_cols.push(Column::new(value_column, value_ty));
    let out_schema = Arc::new(Schema::new(out_cols)?);

    let mut key_tuples: Vec<Vec<Value>> = keyset
        .canonicalize()
        .rows()
        .iter()
        .map(|r| r.values().to_vec())
        .collect();
    key_tuples.dedup();

    let f = Arc::clone(&per_group.function);
    let plan = Plan::PerGroup {
        keys: keys.clone(),
        num_groups: key_tuples.len(),
        inner: Box::new(per_group.plan.clone()),
    };
    let out_kind = OutputKind::Table(out_schema.as_ref().clone());
    Measurement::new(
        Domain::Table(domain),
        Metric::grouped_by(keys.clone()),
        per_group.output_measure,
        per_group.privacy_function.clone(),
        out_kind,
        plan,
        move |x, s| {
            let t = x.as_table()?;
            let groups = partition_by(t, &keys)?;
            let mut rows = Vec::with_capacity(key_tuples.len());
            for key in &key_tuples {
                let members = groups
                    .get(key)
                    .map(|ix| ix.iter().map(|&i| t.rows()[i].clone()).collect())
                    .unwrap_or_default();
                let part = Dataset::Table(Table::from_parts(t.shared_schema(), members));
                let value = scalar_value(f(&part, &s.child(group_label(key)))?)?;
                let mut values = key.clone();
                values.push(value);
                rows.push(Row(values));
            }
            Ok(Output::Table(Table::from_parts(Arc::clone(&out_schema), rows)))
        },
    )
}

/// Generalized parallel composition: element `i` of a list of tables goes to
/// `ms[i]`. Under `BoundedLists(SymmetricDifference)` the per-element
/// distances sum to the list distance, so the privacy map is the largest
/// per-element map (all linear, or all quadratic).
pub fn compose_over_subsets(ms: &[Measurement]) -> Result<Measurement> {
    let first = ms.first().ok_or(Error::EmptyList)?;
    check_shared_interface(ms)?;
    for m in ms {
        require_superadditive(&m.privacy_function)?;
    }
    if first.input_metric != Metric::SymmetricDifference {
        return Err(Error::MetricMismatch(
            "subset measurements must take SymmetricDifference".into(),
        ));
    }
    let element = first.input_domain.as_table()?.clone();
    let maps: Vec<DistanceMap> = ms.iter().map(|m| m.privacy_function.clone()).collect();
    let functions: Vec<Arc<EvalFn>> = ms.iter().map(|m| Arc::clone(&m.function)).collect();
    let expected = ms.len();
    Measurement::new(
        Domain::List {
            element,
            len: expected,
        },
        Metric::bounded_lists(),
        first.output_measure,
        DistanceMap::max_of_same_shape(&maps)?,
        OutputKind::Tuple(ms.iter().map(|m| m.output_kind.clone()).collect()),
        Plan::OverSubsets(ms.iter().map(|m| m.plan.clone()).collect()),
        move |x, s| {
            let parts = x.as_list()?;
            if parts.len() != expected {
                return Err(Error::LengthMismatch {
                    expected,
                    found: parts.len(),
                });
            }
            functions
                .iter()
                .zip(parts)
                .enumerate()
                .map(|(i, (f, t))| f(&Dataset::Table(t.clone()), &s.child(i)))
                .collect::<Result<Vec<_>>>()
                .map(Output::Tuple)
        },
    )
}

/// Like [`compose_over_subsets`] but checks the list length against an
/// upstream transformation's output domain first.
pub fn compose_over_subsets_for(upstream: &Transformation, ms: &[Measurement]) -> Result<Measurement> {
    if let Domain::List { len, .. } = upstream.output_domain() {
        if *len != ms.len() {
            return Err(Error::LengthMismatch {
                expected: *len,
                found: ms.len(),
            });
        }
    }
    make_chain_tm(upstream, &compose_over_subsets(ms)?)
}
