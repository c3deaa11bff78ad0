//! Integer-valued noise: the two-sided geometric (discrete Laplace) and the
//! discrete Gaussian.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::exact::ExtRational;
use crate::metrics::{DistanceMap, Measure};

/// Inverse scales at or above this are treated as noiseless.
pub const NOISELESS_INVERSE_SCALE: f64 = 1e9;

/// Integer noise added to a query whose value moves by at most `sensitivity`
/// per unit of input distance.
#[derive(Clone, Debug, PartialEq)]
pub enum NoisePrimitive {
    /// `P(Z = k) ∝ exp(-|k| · epsilon / sensitivity)`; privacy map
    /// `d ↦ epsilon · d` under pure DP.
    Geometric { epsilon: ExtRational, sensitivity: u64 },
    /// `P(Z = k) ∝ exp(-k² / (2σ²))`; privacy map `d ↦ rho · d²` under zCDP
    /// with `rho = sensitivity² / (2σ²)`.
    DiscreteGaussian {
        rho: ExtRational,
        sigma: f64,
        sensitivity: u64,
    },
}

pub fn make_geometric(epsilon: ExtRational, sensitivity: u64) -> Result<NoisePrimitive> {
    if epsilon.is_zero() {
        return Err(Error::NonPositiveEpsilon);
    }
    if sensitivity == 0 {
        return Err(Error::NonPositiveBound(0));
    }
    Ok(NoisePrimitive::Geometric {
        epsilon,
        sensitivity,
    })
}

/// Discrete Gaussian with a given standard-deviation parameter; rho is
/// derived exactly from the binary value of `sigma`.
pub fn make_discrete_gaussian(sigma: f64, sensitivity: u64) -> Result<NoisePrimitive> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma);
    }
    if sensitivity == 0 {
        return Err(Error::NonPositiveBound(0));
    }
    let s = BigRational::from_integer(BigInt::from(sensitivity));
    let sig = BigRational::from_float(sigma).ok_or(Error::NonPositiveSigma)?;
    let rho = &s * &s / (BigRational::from_integer(2.into()) * &sig * &sig);
    Ok(NoisePrimitive::DiscreteGaussian {
        rho: ExtRational::Finite(rho),
        sigma,
        sensitivity,
    })
}

/// Discrete Gaussian calibrated to an exact rho per unit distance. Sigma is
/// rounded up by one ulp so the realized loss never exceeds `rho`.
pub fn make_discrete_gaussian_for_rho(rho: ExtRational, sensitivity: u64) -> Result<NoisePrimitive> {
    if rho.is_zero() {
        return Err(Error::NonPositiveSigma);
    }
    if sensitivity == 0 {
        return Err(Error::NonPositiveBound(0));
    }
    let sigma = match &rho {
        ExtRational::Infinite => 0.0,
        ExtRational::Finite(r) => {
            let r = r.to_f64().ok_or(Error::NonPositiveSigma)?;
            next_up(sensitivity as f64 / (2.0 * r).sqrt())
        }
    };
    Ok(NoisePrimitive::DiscreteGaussian {
        rho,
        sigma,
        sensitivity,
    })
}

fn next_up(x: f64) -> f64 {
    if x.is_finite() && x > 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        x
    }
}

impl NoisePrimitive {
    pub fn measure(&self) -> Measure {
        match self {
            NoisePrimitive::Geometric { .. } => Measure::Pure,
            NoisePrimitive::DiscreteGaussian { .. } => Measure::Zcdp,
        }
    }

    pub fn sensitivity(&self) -> u64 {
        match self {
            NoisePrimitive::Geometric { sensitivity, .. }
            | NoisePrimitive::DiscreteGaussian { sensitivity, .. } => *sensitivity,
        }
    }

    pub fn privacy_function(&self) -> DistanceMap {
        match self {
            NoisePrimitive::Geometric { epsilon, .. } => DistanceMap::linear(epsilon.clone()),
            NoisePrimitive::DiscreteGaussian { rho, .. } => DistanceMap::quadratic(rho.clone()),
        }
    }

    /// `epsilon / sensitivity` for the geometric mechanism.
    fn inverse_scale(&self) -> f64 {
        match self {
            NoisePrimitive::Geometric {
                epsilon,
                sensitivity,
            } => epsilon.to_f64() / *sensitivity as f64,
            NoisePrimitive::DiscreteGaussian { sigma, .. } => 1.0 / sigma,
        }
    }

    /// True when noise is short-circuited to zero (effective inverse scale at
    /// least [`NOISELESS_INVERSE_SCALE`]).
    pub fn is_noiseless(&self) -> bool {
        self.inverse_scale() >= NOISELESS_INVERSE_SCALE
    }

    /// Normalized probability of drawing `k`.
    pub fn pmf(&self, k: i64) -> f64 {
        if self.is_noiseless() {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        match self {
            NoisePrimitive::Geometric { .. } => {
                let lambda = self.inverse_scale();
                let alpha = (-lambda).exp();
                let one_minus_alpha = -(-lambda).exp_m1();
                one_minus_alpha / (1.0 + alpha) * (-lambda * k.unsigned_abs() as f64).exp()
            }
            NoisePrimitive::DiscreteGaussian { sigma, .. } => {
                gaussian_weight(k, *sigma) / gaussian_normalizer(*sigma)
            }
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> i64 {
        if self.is_noiseless() {
            return 0;
        }
        match self {
            NoisePrimitive::Geometric { .. } => sample_two_sided_geometric(self.inverse_scale(), rng),
            NoisePrimitive::DiscreteGaussian { sigma, .. } => sample_discrete_gaussian(*sigma, rng),
        }
    }

    pub fn add_noise(&self, value: i128, rng: &mut dyn RngCore) -> i128 {
        value + self.sample(rng) as i128
    }
}

fn gaussian_weight(k: i64, sigma: f64) -> f64 {
    let k = k as f64;
    (-(k * k) / (2.0 * sigma * sigma)).exp()
}

fn gaussian_normalizer(sigma: f64) -> f64 {
    let reach = (40.0 * sigma).ceil() as i64 + 2;
    // Sum smallest terms first.
    let tail: f64 = (1..=reach).rev().map(|k| gaussian_weight(k, sigma)).sum();
    1.0 + 2.0 * tail
}

/// Uniform draw in the open interval (0, 1) from 53 random bits.
fn open_unit(rng: &mut dyn RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Inversion sampling from the closed-form CDF of the two-sided geometric
/// distribution with `P(Z = k) ∝ exp(-lambda · |k|)`.
///
/// With `α = exp(-lambda)`: `F(k) = α^(-k) / (1 + α)` for `k < 0` and
/// `F(k) = 1 - α^(k+1) / (1 + α)` for `k ≥ 0`.
pub(crate) fn sample_two_sided_geometric(lambda: f64, rng: &mut dyn RngCore) -> i64 {
    let u = open_unit(rng);
    let alpha = (-lambda).exp();
    let log_one_plus_alpha = alpha.ln_1p();
    let cap = i64::MAX as f64;
    if u <= alpha / (1.0 + alpha) {
        let m = (-(u.ln() + log_one_plus_alpha) / lambda).floor().clamp(1.0, cap);
        -(m as i64)
    } else {
        let v = -((-u).ln_1p() + log_one_plus_alpha) / lambda;
        (v.ceil() - 1.0).clamp(0.0, cap) as i64
    }
}

/// Rejection sampling from a discrete Laplace envelope with scale
/// `floor(σ) + 1`.
pub(crate) fn sample_discrete_gaussian(sigma: f64, rng: &mut dyn RngCore) -> i64 {
    let t = sigma.floor() + 1.0;
    let sigma2 = sigma * sigma;
    loop {
        let y = sample_two_sided_geometric(1.0 / t, rng);
        let gap = y.unsigned_abs() as f64 - sigma2 / t;
        let accept = (-(gap * gap) / (2.0 * sigma2)).exp();
        if open_unit(rng) < accept {
            return y;
        }
    }
}

pub(crate) fn half(budget: &ExtRational) -> ExtRational {
    match budget {
        ExtRational::Finite(r) => ExtRational::Finite(r / BigRational::from_integer(2.into())),
        ExtRational::Infinite => ExtRational::Infinite,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::BTreeMap;

    fn ln2() -> ExtRational {
        ExtRational::from_f64(std::f64::consts::LN_2).unwrap()
    }

    #[test]
    fn constructor_errors() {
        assert_eq!(make_geometric(ExtRational::zero(), 1), Err(Error::NonPositiveEpsilon));
        assert_eq!(make_discrete_gaussian(0.0, 1), Err(Error::NonPositiveSigma));
        assert_eq!(make_discrete_gaussian(f64::NAN, 1), Err(Error::NonPositiveSigma));
        assert_eq!(make_discrete_gaussian(-1.0, 1), Err(Error::NonPositiveSigma));
    }

    #[test]
    fn geometric_pmf_is_symmetric_and_normalized() {
        let g = make_geometric(ln2(), 1).unwrap();
        for k in 1..=10 {
            assert_eq!(g.pmf(k), g.pmf(-k));
        }
        let total: f64 = (-80..=80).map(|k| g.pmf(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // α = 1/2: P(0) = (1 - α)/(1 + α) = 1/3
        assert!((g.pmf(0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_rho_formula() {
        let g = make_discrete_gaussian(2.0, 1).unwrap();
        let f = g.privacy_function();
        assert_eq!(f.eval(&ExtRational::zero()), ExtRational::zero());
        assert_eq!(f.eval(&ExtRational::one()), ExtRational::ratio(1, 8));
        let from_rho = make_discrete_gaussian_for_rho(ExtRational::ratio(1, 8), 1).unwrap();
        match from_rho {
            NoisePrimitive::DiscreteGaussian { sigma, .. } => {
                assert!(sigma >= 2.0 && sigma - 2.0 <= 4.0 * f64::EPSILON)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn huge_inverse_scale_is_noiseless() {
        let g = make_geometric(ExtRational::from_u64(1_000_000_000), 1).unwrap();
        assert!(g.is_noiseless());
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!((0..100).all(|_| g.sample(&mut rng) == 0));
        let inf = make_geometric(ExtRational::Infinite, 7).unwrap();
        assert!(inf.is_noiseless());
        let dg = make_discrete_gaussian_for_rho(ExtRational::Infinite, 1).unwrap();
        assert!(dg.is_noiseless());
        assert_eq!(dg.pmf(0), 1.0);
    }

    fn empirical_tv(noise: &NoisePrimitive, n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for _ in 0..n {
            *counts.entry(noise.sample(&mut rng)).or_default() += 1;
        }
        let lo = counts.keys().next().unwrap().min(&-60).to_owned();
        let hi = counts.keys().last().unwrap().max(&60).to_owned();
        let mut tv = 0.0;
        for k in lo..=hi {
            let emp = counts.get(&k).copied().unwrap_or(0) as f64 / n as f64;
            tv += (emp - noise.pmf(k)).abs();
        }
        tv / 2.0
    }

    #[test]
    fn geometric_sampler_matches_pmf() {
        for eps in [ln2(), ExtRational::ratio(1, 2), ExtRational::one()] {
            let g = make_geometric(eps, 1).unwrap();
            assert!(empirical_tv(&g, 200_000, 11) < 0.01);
        }
        let scaled = make_geometric(ExtRational::one(), 3).unwrap();
        assert!(empirical_tv(&scaled, 200_000, 12) < 0.01);
    }

    #[test]
    fn discrete_gaussian_sampler_matches_pmf() {
        for sigma in [0.5, 1.0, 2.0, 4.0] {
            let g = make_discrete_gaussian(sigma, 1).unwrap();
            assert!(empirical_tv(&g, 200_000, 13) < 0.01, "sigma {sigma}");
        }
    }
}
