//! Truncated degree distributions and their probability generating functions.
//!
//! A [`DegreeDistribution`] is a probability mass function over the degrees
//! `0..=kmax`. It is normalised on construction, so the truncated tail mass is
//! redistributed over the retained support. The excess-degree transform
//! `w_k = (k+1) p_{k+1} / K0` yields a distribution of the same `kmax` whose
//! last entry is zero, which keeps degree and excess arrays index-aligned.

use std::fmt;

use crate::error::{param, Error, Result};

pub const DEFAULT_KMAX: usize = 1000;

const BISECTION_VALUE_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistKind {
    Degree,
    Excess,
}

/// A PGF evaluation request: `order` 0, 1 or 2 selects g, g' or g''.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgfQuery {
    pub x: f64,
    pub order: u8,
}

impl PgfQuery {
    pub fn new(x: f64, order: u8) -> Self {
        Self { x, order }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    pmf: Vec<f64>,
    kind: DistKind,
    mean: f64,
    label: String,
}

impl DegreeDistribution {
    /// Builds a distribution from non-negative weights, normalising them.
    pub fn from_weights(weights: Vec<f64>, kind: DistKind, label: impl Into<String>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(param("kmax must be at least 1"));
        }
        if let Some((k, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(param(format!("weight {w} at degree {k} is not a finite non-negative number")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(param("weights sum to zero"));
        }
        let pmf: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        let mean = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        Ok(Self {
            pmf,
            kind,
            mean,
            label: label.into(),
        })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn kmax(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// First moment, equal to g'(1).
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Checked PGF evaluation on `[0, 1]`.
    pub fn pgf_eval(&self, q: PgfQuery) -> Result<f64> {
        if !(0.0..=1.0).contains(&q.x) {
            return Err(Error::Domain(format!("pgf argument {} outside [0, 1]", q.x)));
        }
        match q.order {
            0 => Ok(self.g(q.x)),
            1 => Ok(self.dg(q.x)),
            2 => Ok(self.d2g(q.x)),
            o => Err(param(format!("pgf derivative order {o} not in {{0, 1, 2}}"))),
        }
    }

    /// g(x) by Horner's rule. No domain check; callers inside the ODE
    /// right-hand sides may step marginally past 1.
    pub fn g(&self, x: f64) -> f64 {
        self.pmf.iter().rev().fold(0.0, |acc, &p| acc * x + p)
    }

    /// g'(x) by Horner's rule over the coefficients `(j+1) p_{j+1}`.
    pub fn dg(&self, x: f64) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &p)| acc * x + k as f64 * p)
    }

    /// g''(x) by Horner's rule over the coefficients `(j+2)(j+1) p_{j+2}`.
    pub fn d2g(&self, x: f64) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (k, &p)| acc * x + (k * (k - 1)) as f64 * p)
    }

    /// Inverts g on `[0, 1]` by bisection. g must be strictly increasing,
    /// i.e. the distribution must put mass on some positive degree.
    pub fn pgf_invert(&self, y: f64) -> Result<f64> {
        if self.pmf[0] >= 1.0 {
            return Err(Error::Domain("pgf is constant (all mass at degree 0)".into()));
        }
        let g0 = self.pmf[0];
        if !(y.is_finite()) || y > 1.0 {
            return Err(Error::Domain(format!("target {y} exceeds g(1) = 1")));
        }
        if y < g0 {
            return Err(Error::Domain(format!("target {y} below g(0) = {g0}")));
        }
        if y == 1.0 {
            return Ok(1.0);
        }
        if y == g0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut mid = 0.5;
        for _ in 0..BISECTION_MAX_ITER {
            mid = 0.5 * (lo + hi);
            let diff = self.g(mid) - y;
            if diff.abs() <= BISECTION_VALUE_TOL {
                return Ok(mid);
            }
            if diff < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        Ok(mid)
    }
}

impl fmt::Display for DegreeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Poisson(mean) truncated to `0..=kmax` and renormalised.
pub fn make_poisson(mean: f64, kmax: usize) -> Result<DegreeDistribution> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(param(format!("poisson mean must be positive, got {mean}")));
    }
    if kmax < 1 {
        return Err(param("kmax must be at least 1"));
    }
    // log-space recurrence: ln p_k = ln p_{k-1} + ln(mean) - ln(k)
    let ln_mean = mean.ln();
    let mut logs = Vec::with_capacity(kmax + 1);
    logs.push(-mean);
    for k in 1..=kmax {
        let prev = logs[k - 1];
        logs.push(prev + ln_mean - (k as f64).ln());
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights = logs.into_iter().map(|l| (l - peak).exp()).collect();
    DegreeDistribution::from_weights(weights, DistKind::Degree, format!("poisson(mean={mean},kmax={kmax})"))
}

/// Power law `p_k ∝ k^exponent` on `kmin..=kmax`, zero below `kmin`.
pub fn make_powerlaw(exponent: f64, kmin: usize, kmax: usize) -> Result<DegreeDistribution> {
    if !(exponent < 0.0) {
        return Err(param(format!("power-law exponent must be negative, got {exponent}")));
    }
    if kmin == 0 {
        return Err(param("kmin must be at least 1 for a negative exponent"));
    }
    if kmin > kmax {
        return Err(param(format!("kmin {kmin} exceeds kmax {kmax}")));
    }
    let weights = (0..=kmax)
        .map(|k| if k < kmin { 0.0 } else { (k as f64).powf(exponent) })
        .collect();
    DegreeDistribution::from_weights(
        weights,
        DistKind::Degree,
        format!("powerlaw(exponent={exponent},kmin={kmin},kmax={kmax})"),
    )
}

/// Excess-degree distribution `w_k = (k+1) p_{k+1} / K0`.
pub fn excess_of(d: &DegreeDistribution) -> Result<DegreeDistribution> {
    if d.kind() != DistKind::Degree {
        return Err(param("excess transform applies to degree distributions only"));
    }
    if d.mean() <= 0.0 {
        return Err(param("mean degree is zero"));
    }
    let k0 = d.mean();
    let pmf = d.pmf();
    let mut w: Vec<f64> = (0..d.kmax()).map(|k| (k + 1) as f64 * pmf[k + 1] / k0).collect();
    w.push(0.0);
    DegreeDistribution::from_weights(w, DistKind::Excess, format!("excess[{}]", d.label()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_mass(k: usize, kmax: usize) -> DegreeDistribution {
        let mut w = vec![0.0; kmax + 1];
        w[k] = 1.0;
        DegreeDistribution::from_weights(w, DistKind::Degree, "point").unwrap()
    }

    fn naive(d: &DegreeDistribution, x: f64, order: u8) -> f64 {
        d.pmf()
            .iter()
            .enumerate()
            .map(|(k, &p)| match order {
                0 => p * x.powi(k as i32),
                1 if k >= 1 => k as f64 * p * x.powi(k as i32 - 1),
                2 if k >= 2 => (k * (k - 1)) as f64 * p * x.powi(k as i32 - 2),
                _ => 0.0,
            })
            .sum()
    }

    #[test]
    fn poisson_mean_and_normalisation() {
        let d = make_poisson(25.0, 1000).unwrap();
        let direct: f64 = d.pmf().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert!((direct - 25.0).abs() < 1e-9);
        assert!((d.pgf_eval(PgfQuery::new(1.0, 1)).unwrap() - 25.0).abs() < 1e-9);
        assert!((d.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_degenerate_mean() {
        let d = make_poisson(1e-12, 10).unwrap();
        assert!((d.pmf()[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn poisson_is_excess_fixed_point() {
        let d = make_poisson(25.0, 1000).unwrap();
        let w = excess_of(&d).unwrap();
        assert_eq!(w.kind(), DistKind::Excess);
        for (a, b) in d.pmf().iter().zip(w.pmf()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn poisson_rejects_bad_parameters() {
        assert!(matches!(make_poisson(0.0, 10), Err(Error::Parameter(_))));
        assert!(matches!(make_poisson(-1.0, 10), Err(Error::Parameter(_))));
        assert!(matches!(make_poisson(2.0, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn powerlaw_shape() {
        let d = make_powerlaw(-2.5, 1, 1000).unwrap();
        assert_eq!(d.pmf()[0], 0.0);
        assert!((d.pmf()[1] / d.pmf()[2] - 2f64.powf(2.5)).abs() < 1e-12);
        let direct: f64 = d.pmf().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert!((d.mean() - direct).abs() < 1e-12);

        let single = make_powerlaw(-2.5, 1, 1).unwrap();
        assert_eq!(single.pmf()[1], 1.0);
    }

    #[test]
    fn powerlaw_rejects_zero_kmin() {
        assert!(matches!(make_powerlaw(-2.5, 0, 10), Err(Error::Parameter(_))));
        assert!(matches!(make_powerlaw(2.5, 1, 10), Err(Error::Parameter(_))));
        assert!(matches!(make_powerlaw(-2.5, 5, 4), Err(Error::Parameter(_))));
    }

    #[test]
    fn excess_of_point_masses() {
        let w1 = excess_of(&point_mass(1, 5)).unwrap();
        assert_eq!(w1.pmf()[0], 1.0);
        let w3 = excess_of(&point_mass(3, 5)).unwrap();
        assert_eq!(w3.pmf()[2], 1.0);
        assert!(matches!(excess_of(&point_mass(0, 5)), Err(Error::Parameter(_))));
        assert!(matches!(excess_of(&w3), Err(Error::Parameter(_))));
    }

    #[test]
    fn pgf_matches_naive_summation() {
        let d = make_powerlaw(-2.5, 1, 1000).unwrap();
        for order in 0..=2u8 {
            let got = d.pgf_eval(PgfQuery::new(0.5, order)).unwrap();
            assert!((got - naive(&d, 0.5, order)).abs() < 1e-12, "order {order}");
        }
        assert!((d.pgf_eval(PgfQuery::new(1.0, 0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pgf_query_validation() {
        let d = make_poisson(3.0, 30).unwrap();
        assert!(matches!(d.pgf_eval(PgfQuery::new(0.5, 3)), Err(Error::Parameter(_))));
        assert!(matches!(d.pgf_eval(PgfQuery::new(1.5, 0)), Err(Error::Domain(_))));
        assert!(matches!(d.pgf_eval(PgfQuery::new(-0.1, 0)), Err(Error::Domain(_))));
    }

    #[test]
    fn invert_simple_cases() {
        let id = point_mass(1, 3);
        assert!((id.pgf_invert(0.7).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(id.pgf_invert(1.0).unwrap(), 1.0);

        let w = excess_of(&make_poisson(25.0, 1000).unwrap()).unwrap();
        let y = 1.0 - 1e-3;
        let x = w.pgf_invert(y).unwrap();
        assert!((w.g(x) - y).abs() <= 1e-12);
    }

    #[test]
    fn invert_domain_errors() {
        let d = make_powerlaw(-2.5, 2, 50).unwrap();
        assert!(matches!(d.pgf_invert(1.2), Err(Error::Domain(_))));
        let p = make_poisson(1.0, 20).unwrap();
        assert!(matches!(p.pgf_invert(0.1), Err(Error::Domain(_))));
        assert!(matches!(point_mass(0, 3).pgf_invert(0.5), Err(Error::Domain(_))));
    }
}
