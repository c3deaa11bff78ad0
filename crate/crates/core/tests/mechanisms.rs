mod common;

use ledgerdp::measurements::{
    compose_sequential, make_count, make_quantile, make_sum, NoiseBudget, NoisePrimitive, Plan,
};
use ledgerdp::{pure_dp_divergence, ColumnType, Dataset, ExtRational, Output, RngStream, Row, Schema, Table, TableDomain, Value};

use common::*;

fn int_table(values: &[i64]) -> Table {
    let s = Schema::from_pairs([("x", ColumnType::Int64)]).unwrap();
    Table::new(s, values.iter().map(|&v| Row::new(vec![Value::Int(v)])).collect()).unwrap()
}

fn noise_of(plan: &Plan) -> &NoisePrimitive {
    match plan {
        Plan::Count { noise } | Plan::Sum { noise, .. } => noise,
        other => panic!("unexpected plan {other:?}"),
    }
}

/// Output pmf of a noisy integer statistic whose true value is `center`,
/// rebuilt from the geometric formula with inverse scale `lambda`.
fn release_pmf(lambda: f64, center: i64) -> Vec<f64> {
    geometric_pmf(lambda, center, -120, 120)
}

#[test]
fn count_neighbors_at_seven_tenths() {
    let t = int_table(&[1, 2, 3]);
    let m = make_count(TableDomain::new(t.schema().clone()), NoiseBudget::Pure(ExtRational::ratio(7, 10))).unwrap();
    let noise = noise_of(m.plan());
    for k in -20..=20 {
        let oracle = release_pmf(0.7, 0)[(k + 120) as usize];
        assert!((noise.pmf(k) - oracle).abs() < 1e-12);
    }
    let div = pure_dp_divergence(&release_pmf(0.7, 3), &release_pmf(0.7, 4)).unwrap();
    assert!(div <= 0.7 + 1e-9, "{div}");
    assert!(div >= 0.7 - 1e-9, "{div}");
}

#[test]
fn sum_neighbors_unit_bounds() {
    let t = int_table(&[0, 1, 1]);
    let m = make_sum(
        TableDomain::new(t.schema().clone()),
        "x",
        0.0,
        1.0,
        ExtRational::one(),
        NoiseBudget::Pure(ExtRational::one()),
    )
    .unwrap();
    assert_eq!(noise_of(m.plan()).sensitivity(), 1);
    // Neighbours differ by one row whose clamped value is 0 or 1.
    for (a, b) in [(2, 3), (2, 2)] {
        let div = pure_dp_divergence(&release_pmf(1.0, a), &release_pmf(1.0, b)).unwrap();
        assert!(div <= 1.0 + 1e-9, "{div}");
    }
}

#[test]
fn sum_clamps_before_noise() {
    let t = int_table(&[-10, 5]);
    let m = make_sum(
        TableDomain::new(t.schema().clone()),
        "x",
        0.0,
        3.0,
        ExtRational::one(),
        NoiseBudget::Pure(ExtRational::Infinite),
    )
    .unwrap();
    let out = m.invoke(&Dataset::Table(t), &RngStream::new(0)).unwrap();
    assert_eq!(out, Output::Real(3.0));
}

#[test]
fn sequential_pair_of_counts() {
    let d = TableDomain::new(int_table(&[]).schema().clone());
    let quarter = || make_count(d.clone(), NoiseBudget::Pure(ExtRational::ratio(1, 4))).unwrap();
    let m = compose_sequential(&[quarter(), quarter()]).unwrap();
    assert_eq!(m.privacy_function().eval(&ExtRational::one()), ExtRational::ratio(1, 2));
    let pairs = vec![
        (release_pmf(0.25, 2), release_pmf(0.25, 3)),
        (release_pmf(0.25, 2), release_pmf(0.25, 3)),
    ];
    let div = product_pure_divergence(&pairs);
    assert!(div <= 0.5 + 1e-9, "{div}");
    let small: Vec<_> = (0..2)
        .map(|_| (geometric_pmf(0.25, 2, -30, 30), geometric_pmf(0.25, 3, -30, 30)))
        .collect();
    assert!((product_pure_divergence(&small) - brute_product_divergence(&small)).abs() < 1e-9);
}

#[test]
fn quantile_neighbours_within_epsilon() {
    let base = [1.0, 2.0, 3.0];
    for extra in [0.5, 1.5, 2.5, 3.5] {
        let mut added = base.to_vec();
        added.push(extra);
        let p = quantile_pmf(&base, 0.5, 0.0, 4.0, 4, 20.0);
        let q = quantile_pmf(&added, 0.5, 0.0, 4.0, 4, 20.0);
        let div = pure_dp_divergence(&p, &q).unwrap();
        assert!(div <= 20.0 + 1e-9, "extra {extra}: {div}");
    }
}

#[test]
fn single_bin_quantile_is_midpoint() {
    let s = Schema::from_pairs([("x", ColumnType::Float64)]).unwrap();
    let m = make_quantile(TableDomain::new(s.clone()), "x", 0.3, -2.0, 6.0, 1, ExtRational::one()).unwrap();
    let t = Table::new(s, vec![Row::new(vec![Value::from(5.0)])]).unwrap();
    for i in 0..20 {
        let out = m.invoke(&Dataset::Table(t.clone()), &RngStream::new(i)).unwrap();
        assert_eq!(out, Output::Real(2.0));
    }
}

#[test]
fn seeded_counts_repeat() {
    let t = Dataset::Table(int_table(&[4, 5, 6, 7]));
    let m = make_count(TableDomain::new(int_table(&[]).schema().clone()), NoiseBudget::Pure(ExtRational::ratio(1, 10))).unwrap();
    let a: Vec<_> = (0..50).map(|i| m.invoke(&t, &RngStream::new(i)).unwrap()).collect();
    let b: Vec<_> = (0..50).map(|i| m.invoke(&t, &RngStream::new(i)).unwrap()).collect();
    assert_eq!(a, b);
    assert!(a.iter().any(|o| *o != Output::Int(4)));
}
