//! Oracles shared by the integration tests. Nothing here calls into the
//! library's sampling or pmf code; distributions are rebuilt from their
//! defining formulas.
#![allow(dead_code)]

use std::collections::HashMap;

use ledgerdp::{ColumnType, Row, Schema, Table, Value};
use rand::Rng;

/// `P(k) ∝ exp(-lambda·|k - center|)` on `lo..=hi`.
pub fn geometric_pmf(lambda: f64, center: i64, lo: i64, hi: i64) -> Vec<f64> {
    normalize((lo..=hi).map(|k| (-lambda * (k - center).abs() as f64).exp()).collect())
}

/// `P(k) ∝ exp(-(k - center)² / (2σ²))` on `lo..=hi`.
pub fn discrete_gaussian_pmf(sigma: f64, center: i64, lo: i64, hi: i64) -> Vec<f64> {
    normalize(
        (lo..=hi)
            .map(|k| {
                let x = (k - center) as f64;
                (-x * x / (2.0 * sigma * sigma)).exp()
            })
            .collect(),
    )
}

pub fn normalize(w: Vec<f64>) -> Vec<f64> {
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Drops outcomes where either mass underflowed to zero, then renormalizes.
pub fn common_support(p: &mut Vec<f64>, q: &mut Vec<f64>) {
    for (a, b) in p.iter_mut().zip(q.iter_mut()) {
        if *a == 0.0 || *b == 0.0 {
            *a = 0.0;
            *b = 0.0;
        }
    }
    *p = normalize(std::mem::take(p));
    *q = normalize(std::mem::take(q));
}

/// Max over every joint outcome of `|ln P(o)/Q(o)|` for independent
/// coordinates. The log ratio of a product is a sum of per-coordinate
/// terms, so the extremes are attained coordinatewise.
pub fn product_pure_divergence(pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut hi = 0.0;
    let mut lo = 0.0;
    for (p, q) in pairs {
        let mut top = f64::NEG_INFINITY;
        let mut bottom = f64::INFINITY;
        for (&a, &b) in p.iter().zip(q) {
            match (a > 0.0, b > 0.0) {
                (false, false) => {}
                (true, true) => {
                    let r = a.ln() - b.ln();
                    top = top.max(r);
                    bottom = bottom.min(r);
                }
                _ => return f64::INFINITY,
            }
        }
        hi += top;
        lo += bottom;
    }
    hi.max(-lo)
}

/// Explicit enumeration of the joint outcome space, for small cases.
pub fn brute_product_divergence(pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut p_joint = vec![1.0];
    let mut q_joint = vec![1.0];
    for (p, q) in pairs {
        p_joint = p_joint.iter().flat_map(|a| p.iter().map(move |b| a * b)).collect();
        q_joint = q_joint.iter().flat_map(|a| q.iter().map(move |b| a * b)).collect();
    }
    let p_joint = normalize(p_joint);
    let q_joint = normalize(q_joint);
    ledgerdp::pure_dp_divergence(&p_joint, &q_joint).unwrap()
}

/// Exponential-mechanism selection probabilities for the binned quantile,
/// computed by direct counting.
pub fn quantile_pmf(values: &[f64], q: f64, low: f64, high: f64, bins: usize, epsilon: f64) -> Vec<f64> {
    let width = (high - low) / bins as f64;
    let n = values.len() as f64;
    let scores: Vec<f64> = (0..bins)
        .map(|i| {
            let mid = low + (i as f64 + 0.5) * width;
            let below = values.iter().filter(|&&v| v < mid).count() as f64;
            -(below - q * n).abs()
        })
        .collect();
    normalize(scores.iter().map(|s| (epsilon * s / 2.0).exp()).collect())
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Multiset symmetric difference by occurrence counting.
pub fn symdiff(a: &Table, b: &Table) -> u64 {
    let mut counts: HashMap<&Row, i64> = HashMap::new();
    for r in a.rows() {
        *counts.entry(r).or_default() += 1;
    }
    for r in b.rows() {
        *counts.entry(r).or_default() -= 1;
    }
    counts.values().map(|c| c.unsigned_abs()).sum()
}

/// `(id: int64, k: text, v: int64)`.
pub fn id_kv_schema() -> Schema {
    Schema::from_pairs([
        ("id", ColumnType::Int64),
        ("k", ColumnType::Text),
        ("v", ColumnType::Int64),
    ])
    .unwrap()
}

pub fn random_row(rng: &mut impl Rng) -> Row {
    let keys = ["a", "b", "c"];
    Row::new(vec![
        Value::Int(rng.gen_range(0..3)),
        Value::text(keys[rng.gen_range(0..keys.len())]),
        Value::Int(rng.gen_range(-2..4)),
    ])
}

pub fn random_table(rng: &mut impl Rng, schema: &Schema, max_rows: usize) -> Table {
    let n = rng.gen_range(0..=max_rows);
    Table::new(schema.clone(), (0..n).map(|_| random_row(rng)).collect()).unwrap()
}

/// A table near `x`: a few random insertions and deletions, keeping at most
/// `max_rows` rows.
pub fn perturb(rng: &mut impl Rng, x: &Table, max_rows: usize) -> Table {
    let mut rows = x.rows().to_vec();
    for _ in 0..rng.gen_range(1..=2) {
        if !rows.is_empty() && (rows.len() >= max_rows || rng.gen_bool(0.5)) {
            let i = rng.gen_range(0..rows.len());
            rows.swap_remove(i);
        } else {
            rows.push(random_row(rng));
        }
    }
    Table::new(x.schema().clone(), rows).unwrap()
}

/// Either a nearby table or an unrelated one.
pub fn partner(rng: &mut impl Rng, x: &Table, max_rows: usize) -> Table {
    if rng.gen_bool(0.7) {
        perturb(rng, x, max_rows)
    } else {
        random_table(rng, x.schema(), max_rows)
    }
}
