//! Divergences between finite probability mass functions.
//!
//! These are test oracles: they evaluate the output-measure definitions
//! directly on enumerated pmfs, independently of how mechanisms sample.

use crate::error::{Error, Result};

/// Renyi orders used when no grid is supplied.
pub const DEFAULT_ALPHAS: [f64; 10] = [1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0];

const PMF_TOLERANCE: f64 = 1e-12;

fn check_pmfs(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::NotAPmf(format!(
            "supports differ in size ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    for (name, pmf) in [("p", p), ("q", q)] {
        if pmf.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::NotAPmf(format!("{name} has a negative or non-finite mass")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::NotAPmf(format!("{name} sums to {total}")));
        }
    }
    Ok(())
}

/// Max over the support of `|ln(p/q)|`; `0/0` contributes nothing and `x/0`
/// with `x > 0` gives infinity.
pub fn pure_dp_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pmfs(p, q)?;
    let mut worst: f64 = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        match (a > 0.0, b > 0.0) {
            (false, false) => {}
            (true, true) => worst = worst.max((a.ln() - b.ln()).abs()),
            _ => return Ok(f64::INFINITY),
        }
    }
    Ok(worst)
}

/// Max over `alphas` of `D_α(p‖q) / α`, a lower estimate of the smallest rho
/// for which the pair satisfies zCDP.
pub fn zcdp_divergence(p: &[f64], q: &[f64], alphas: &[f64]) -> Result<f64> {
    check_pmfs(p, q)?;
    if let Some(&bad) = alphas.iter().find(|a| !a.is_finite() || **a <= 1.0) {
        return Err(Error::BadAlpha(bad));
    }
    let mut worst: f64 = 0.0;
    for &alpha in alphas {
        let d = renyi(p, q, alpha);
        if d.is_infinite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(d / alpha);
    }
    Ok(worst)
}

/// `1/(α-1) · ln Σ p^α q^(1-α)`, summed in log space.
fn renyi(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    let mut terms = Vec::with_capacity(p.len());
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return f64::INFINITY;
        }
        terms.push(alpha * a.ln() + (1.0 - alpha) * b.ln());
    }
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    (log_sum / (alpha - 1.0)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn discrete_gaussian(sigma: f64, shift: i64, lo: i64, hi: i64) -> Vec<f64> {
        let w: Vec<f64> = (lo..=hi)
            .map(|k| (-((k - shift) as f64).powi(2) / (2.0 * sigma * sigma)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    #[test]
    fn identical_pmfs() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(pure_dp_divergence(&p, &p).unwrap(), 0.0);
        assert!(zcdp_divergence(&p, &p, &DEFAULT_ALPHAS).unwrap().abs() < 1e-15);
    }

    #[test]
    fn ln_two_example() {
        let d = pure_dp_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn unbounded_ratio() {
        assert_eq!(pure_dp_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert_eq!(pure_dp_divergence(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(
            zcdp_divergence(&[1.0, 0.0], &[0.0, 1.0], &DEFAULT_ALPHAS).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn symmetric_in_arguments() {
        let p = [0.1, 0.6, 0.3];
        let q = [0.3, 0.3, 0.4];
        assert_eq!(pure_dp_divergence(&p, &q).unwrap(), pure_dp_divergence(&q, &p).unwrap());
    }

    #[test]
    fn input_validation() {
        assert!(matches!(pure_dp_divergence(&[0.5], &[0.5, 0.5]), Err(Error::NotAPmf(_))));
        assert!(matches!(pure_dp_divergence(&[0.5, 0.6], &[0.5, 0.5]), Err(Error::NotAPmf(_))));
        assert!(matches!(zcdp_divergence(&[1.0], &[1.0], &[1.0]), Err(Error::BadAlpha(_))));
        assert!(matches!(zcdp_divergence(&[1.0], &[1.0], &[f64::INFINITY]), Err(Error::BadAlpha(_))));
    }

    /// Zeroes positions where either mass underflowed, then renormalizes.
    fn common_support(p: &mut [f64], q: &mut [f64]) {
        for (a, b) in p.iter_mut().zip(q.iter_mut()) {
            if *a == 0.0 || *b == 0.0 {
                *a = 0.0;
                *b = 0.0;
            }
        }
        for pmf in [p, q] {
            let z: f64 = pmf.iter().sum();
            pmf.iter_mut().for_each(|x| *x /= z);
        }
    }

    #[test]
    fn discrete_gaussian_rho() {
        let sigma = 2.0;
        let mut p = discrete_gaussian(sigma, 0, -80, 80);
        let mut q = discrete_gaussian(sigma, 1, -80, 80);
        common_support(&mut p, &mut q);
        let rho = zcdp_divergence(&p, &q, &DEFAULT_ALPHAS).unwrap();
        let bound = 1.0 / (2.0 * sigma * sigma);
        assert!(rho <= bound + 1e-9, "{rho}");
        assert!(rho >= 0.9 * bound, "{rho}");
    }
}
