use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::RngCore;

use super::noise::{half, make_discrete_gaussian_for_rho, make_geometric, NoisePrimitive, NOISELESS_INVERSE_SCALE};
use super::{Measurement, Output, OutputKind, Plan};
use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::metrics::{Domain, Measure, Metric};
use crate::tabledata::{numeric_index, TableDomain};

/// Privacy loss per unit of symmetric-difference distance.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseBudget {
    /// Epsilon per unit distance, via geometric noise.
    Pure(ExtRational),
    /// Rho per unit distance, via discrete Gaussian noise.
    Zcdp(ExtRational),
}

impl NoiseBudget {
    pub fn measure(&self) -> Measure {
        match self {
            NoiseBudget::Pure(_) => Measure::Pure,
            NoiseBudget::Zcdp(_) => Measure::Zcdp,
        }
    }

    fn halved(&self) -> NoiseBudget {
        match self {
            NoiseBudget::Pure(e) => NoiseBudget::Pure(half(e)),
            NoiseBudget::Zcdp(r) => NoiseBudget::Zcdp(half(r)),
        }
    }

    fn primitive(&self, sensitivity: u64) -> Result<NoisePrimitive> {
        match self {
            NoiseBudget::Pure(e) => make_geometric(e.clone(), sensitivity),
            NoiseBudget::Zcdp(r) => make_discrete_gaussian_for_rho(r.clone(), sensitivity),
        }
    }
}

fn saturate(x: i128) -> i64 {
    x.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

/// Noisy row count (sensitivity 1).
pub fn make_count(domain: TableDomain, budget: NoiseBudget) -> Result<Measurement> {
    let noise = budget.primitive(1)?;
    let n = noise.clone();
    Measurement::new(
        Domain::Table(domain),
        Metric::SymmetricDifference,
        noise.measure(),
        noise.privacy_function(),
        OutputKind::Int,
        Plan::Count { noise },
        move |x, s| {
            let len = x.as_table()?.len() as i128;
            Ok(Output::Int(saturate(n.add_noise(len, &mut s.rng()))))
        },
    )
}

fn check_bounds(low: f64, high: f64) -> Result<()> {
    if low.is_finite() && high.is_finite() && low <= high {
        Ok(())
    } else {
        Err(Error::BadBounds { low, high })
    }
}

/// Clamp-and-discretize parameters shared by sum and average.
#[derive(Clone, Debug)]
struct FixedPoint {
    low: f64,
    high: f64,
    gamma: BigRational,
    gamma_f64: f64,
    sensitivity: u64,
}

impl FixedPoint {
    fn new(low: f64, high: f64, granularity: &ExtRational) -> Result<Self> {
        check_bounds(low, high)?;
        let gamma = match granularity.as_finite() {
            Some(g) if !g.is_zero() => g.clone(),
            _ => return Err(Error::NonPositiveGranularity),
        };
        let reach = BigRational::from_float(low.abs().max(high.abs())).expect("finite bounds");
        let sensitivity = (reach / &gamma).ceil().to_integer().to_u64().unwrap_or(u64::MAX).max(1);
        Ok(FixedPoint {
            low,
            high,
            gamma_f64: gamma.to_f64().unwrap_or(f64::MIN_POSITIVE),
            gamma,
            sensitivity,
        })
    }

    fn units(&self, v: f64) -> i128 {
        let s = self.sensitivity as f64;
        (v.clamp(self.low, self.high) / self.gamma_f64).round().clamp(-s, s) as i128
    }

    fn to_real(&self, units: i128) -> f64 {
        let exact = BigRational::from_integer(BigInt::from(units)) * &self.gamma;
        exact.to_f64().unwrap_or(0.0)
    }
}

fn noisy_sum(values: &[f64], fp: &FixedPoint, noise: &NoisePrimitive, rng: &mut dyn RngCore) -> f64 {
    let total: i128 = values.iter().map(|&v| fp.units(v)).sum();
    fp.to_real(noise.add_noise(total, rng))
}

/// Noisy sum of `column` after clamping to `[low, high]` and rounding to
/// multiples of `granularity`. Per-unit sensitivity is
/// `ceil(max(|low|, |high|) / granularity)` in granularity units.
pub fn make_sum(
    domain: TableDomain,
    column: &str,
    low: f64,
    high: f64,
    granularity: ExtRational,
    budget: NoiseBudget,
) -> Result<Measurement> {
    numeric_index(&domain.schema, column)?;
    let fp = FixedPoint::new(low, high, &granularity)?;
    let noise = budget.primitive(fp.sensitivity)?;
    let plan = Plan::Sum {
        column: column.to_string(),
        low,
        high,
        granularity,
        noise: noise.clone(),
    };
    let name = column.to_string();
    let n = noise.clone();
    Measurement::new(
        Domain::Table(domain),
        Metric::SymmetricDifference,
        noise.measure(),
        noise.privacy_function(),
        OutputKind::Real,
        plan,
        move |x, s| {
            let values = x.as_table()?.numeric_column(&name)?;
            Ok(Output::Real(noisy_sum(&values, &fp, &n, &mut s.rng())))
        },
    )
}

/// Noisy sum over noisy count, each with half of `budget`. The denominator
/// is clamped below at 1.
pub fn make_average(
    domain: TableDomain,
    column: &str,
    low: f64,
    high: f64,
    granularity: ExtRational,
    budget: NoiseBudget,
) -> Result<Measurement> {
    let halved = budget.halved();
    let sum = make_sum(domain.clone(), column, low, high, granularity.clone(), halved.clone())?;
    let count = make_count(domain.clone(), halved)?;
    let privacy = crate::metrics::DistanceMap::sum(&[sum.privacy_function.clone(), count.privacy_function.clone()])?;
    let plan = Plan::Average {
        sum: Box::new(sum.plan.clone()),
        count: Box::new(count.plan.clone()),
    };
    let (sum_f, count_f) = (sum.function.clone(), count.function.clone());
    Measurement::new(
        Domain::Table(domain),
        Metric::SymmetricDifference,
        budget.measure(),
        privacy,
        OutputKind::Real,
        plan,
        move |x, s| {
            let Output::Real(total) = sum_f(x, &s.child("sum"))? else {
                unreachable!("sum releases a real")
            };
            let Output::Int(n) = count_f(x, &s.child("count"))? else {
                unreachable!("count releases an integer")
            };
            Ok(Output::Real(total / n.max(1) as f64))
        },
    )
}

/// Utility scores of the binned exponential mechanism:
/// `-|#(values < midpoint) - q·n|` per bin.
pub(crate) fn quantile_scores(values: &[f64], q: f64, low: f64, high: f64, bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let target = q * sorted.len() as f64;
    (0..bins)
        .map(|i| {
            let mid = bin_midpoint(low, high, bins, i);
            let below = sorted.partition_point(|&v| v < mid) as f64;
            -(below - target).abs()
        })
        .collect()
}

fn bin_midpoint(low: f64, high: f64, bins: usize, i: usize) -> f64 {
    low + (i as f64 + 0.5) * (high - low) / bins as f64
}

/// Selection probabilities `∝ exp(epsilon · score / 2)`. A non-finite or
/// noiseless-scale epsilon puts uniform mass on the maximizers.
pub(crate) fn exponential_mechanism_pmf(scores: &[f64], epsilon: f64) -> Vec<f64> {
    let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !epsilon.is_finite() || epsilon >= NOISELESS_INVERSE_SCALE {
        let winners = scores.iter().filter(|&&s| s == top).count() as f64;
        return scores.iter().map(|&s| if s == top { 1.0 / winners } else { 0.0 }).collect();
    }
    let weights: Vec<f64> = scores.iter().map(|&s| (epsilon * (s - top) / 2.0).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

fn sample_index(pmf: &[f64], rng: &mut dyn RngCore) -> usize {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in pmf.iter().enumerate() {
        if p > 0.0 {
            last = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Binned exponential-mechanism quantile over `[low, high]`, returning the
/// chosen bin's midpoint. Pure DP only.
pub fn make_quantile(
    domain: TableDomain,
    column: &str,
    quantile: f64,
    low: f64,
    high: f64,
    bins: usize,
    epsilon: ExtRational,
) -> Result<Measurement> {
    numeric_index(&domain.schema, column)?;
    if !(low < high) || !low.is_finite() || !high.is_finite() {
        return Err(Error::BadBounds { low, high });
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::BadQuantile(quantile));
    }
    if bins == 0 {
        return Err(Error::NonPositiveBound(0));
    }
    if epsilon.is_zero() {
        return Err(Error::NonPositiveEpsilon);
    }
    let plan = Plan::Quantile {
        column: column.to_string(),
        quantile,
        low,
        high,
        bins,
        epsilon: epsilon.clone(),
    };
    let eps = epsilon.to_f64();
    let name = column.to_string();
    Measurement::new(
        Domain::Table(domain),
        Metric::SymmetricDifference,
        Measure::Pure,
        crate::metrics::DistanceMap::linear(epsilon),
        OutputKind::Real,
        plan,
        move |x, s| {
            let values = x.as_table()?.numeric_column(&name)?;
            let pmf = exponential_mechanism_pmf(&quantile_scores(&values, quantile, low, high, bins), eps);
            let i = sample_index(&pmf, &mut s.rng());
            Ok(Output::Real(bin_midpoint(low, high, bins, i)))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::RngStream;
    use crate::metrics::Dataset;
    use crate::row;
    use crate::tabledata::{ColumnType, Schema, Table};

    fn schema() -> Schema {
        Schema::from_pairs([("x", ColumnType::Float64)]).unwrap()
    }

    fn table(xs: &[f64]) -> Dataset {
        Dataset::Table(Table::new(schema(), xs.iter().map(|&x| row![x]).collect()).unwrap())
    }

    fn inf() -> NoiseBudget {
        NoiseBudget::Pure(ExtRational::Infinite)
    }

    fn gamma() -> ExtRational {
        ExtRational::ratio(1, 100)
    }

    fn real(o: Output) -> f64 {
        match o {
            Output::Real(x) => x,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noiseless_count_of_empty_table() {
        let m = make_count(TableDomain::new(schema()), inf()).unwrap();
        assert_eq!(m.invoke(&table(&[]), &RngStream::new(0)).unwrap(), Output::Int(0));
    }

    #[test]
    fn count_is_reproducible() {
        let m = make_count(TableDomain::new(schema()), NoiseBudget::Pure(ExtRational::ratio(1, 2))).unwrap();
        let s = RngStream::new(99).child("q");
        let data = table(&[1.0, 2.0, 3.0]);
        assert_eq!(m.invoke(&data, &s).unwrap(), m.invoke(&data, &s).unwrap());
    }

    #[test]
    fn sum_clamps_then_rounds() {
        let m = make_sum(TableDomain::new(schema()), "x", 0.0, 3.0, gamma(), inf()).unwrap();
        assert_eq!(real(m.invoke(&table(&[-10.0, 5.0]), &RngStream::new(0)).unwrap()), 3.0);
        let m = make_sum(TableDomain::new(schema()), "x", 0.0, 10.0, gamma(), inf()).unwrap();
        assert_eq!(real(m.invoke(&table(&[1.234, 2.5]), &RngStream::new(0)).unwrap()), 3.73);
    }

    #[test]
    fn sum_sensitivity_in_units() {
        let m = make_sum(TableDomain::new(schema()), "x", -2.0, 1.5, gamma(), NoiseBudget::Pure(ExtRational::one())).unwrap();
        let Plan::Sum { noise, .. } = m.plan() else { panic!() };
        assert_eq!(noise.sensitivity(), 200);
        let m = make_sum(TableDomain::new(schema()), "x", 0.0, 0.0, gamma(), inf()).unwrap();
        let Plan::Sum { noise, .. } = m.plan() else { panic!() };
        assert_eq!(noise.sensitivity(), 1);
    }

    #[test]
    fn sum_argument_errors() {
        let d = TableDomain::new(schema());
        assert!(matches!(make_sum(d.clone(), "x", 2.0, 1.0, gamma(), inf()), Err(Error::BadBounds { .. })));
        assert!(matches!(
            make_sum(d.clone(), "x", 0.0, 1.0, ExtRational::zero(), inf()),
            Err(Error::NonPositiveGranularity)
        ));
        assert!(matches!(make_sum(d, "y", 0.0, 1.0, gamma(), inf()), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn average_splits_budget() {
        let d = TableDomain::new(schema());
        let m = make_average(d.clone(), "x", 0.0, 100.0, gamma(), inf()).unwrap();
        assert_eq!(real(m.invoke(&table(&[10.0, 20.0]), &RngStream::new(0)).unwrap()), 15.0);
        assert_eq!(real(m.invoke(&table(&[]), &RngStream::new(0)).unwrap()), 0.0);
        let m = make_average(d, "x", 0.0, 1.0, gamma(), NoiseBudget::Pure(ExtRational::one())).unwrap();
        assert_eq!(m.privacy_function().eval(&ExtRational::one()), ExtRational::one());
    }

    #[test]
    fn single_bin_quantile() {
        let m = make_quantile(TableDomain::new(schema()), "x", 0.3, 2.0, 6.0, 1, ExtRational::one()).unwrap();
        for seed in 0..20 {
            assert_eq!(real(m.invoke(&table(&[1.0, 5.0]), &RngStream::new(seed)).unwrap()), 4.0);
        }
    }

    #[test]
    fn quantile_argument_errors() {
        let d = TableDomain::new(schema());
        let e = ExtRational::one();
        assert!(matches!(make_quantile(d.clone(), "x", 0.5, 1.0, 1.0, 4, e.clone()), Err(Error::BadBounds { .. })));
        assert!(matches!(make_quantile(d.clone(), "x", 1.5, 0.0, 1.0, 4, e.clone()), Err(Error::BadQuantile(_))));
        assert!(matches!(make_quantile(d, "x", f64::NAN, 0.0, 1.0, 4, e), Err(Error::BadQuantile(_))));
    }

    #[test]
    fn noiseless_quantile_picks_the_median_bin() {
        let m = make_quantile(TableDomain::new(schema()), "x", 0.5, 0.0, 4.0, 4, ExtRational::Infinite).unwrap();
        let out = real(m.invoke(&table(&[1.0, 2.0, 3.0]), &RngStream::new(5)).unwrap());
        assert!(out == 1.5 || out == 2.5, "{out}");
    }
}
