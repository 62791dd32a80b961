//! Probability-mass-weighted coverage of a parameter space by executed tests.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dist::{JointDistribution, UnivariateDistribution};
use super::ScevarError;

/// Anything with a bounded support and box probabilities.
pub trait ParameterSpace {
    fn dim_names(&self) -> Vec<String>;
    fn support(&self) -> Vec<(f64, f64)>;
    fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64;
}

impl ParameterSpace for UnivariateDistribution {
    fn dim_names(&self) -> Vec<String> {
        vec![self.name.clone()]
    }

    fn support(&self) -> Vec<(f64, f64)> {
        vec![self.support]
    }

    fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.mass(lo[0], hi[0])
    }
}

impl ParameterSpace for JointDistribution {
    fn dim_names(&self) -> Vec<String> {
        self.dims.clone()
    }

    fn support(&self) -> Vec<(f64, f64)> {
        self.support.clone()
    }

    fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.mass(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCoverage {
    pub index: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub mass: f64,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub dims: Vec<String>,
    pub bins_per_dim: usize,
    pub support: Vec<(f64, f64)>,
    pub points: usize,
    pub covered_mass: f64,
    pub bins: Vec<BinCoverage>,
}

fn bin_index(x: f64, (lo, hi): (f64, f64), bins: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let u = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((u * bins as f64).floor() as usize).min(bins - 1)
}

/// Partitions the support into `bins_per_dim` equal-width bins per dimension
/// and sums the mass of the bins holding at least one executed point. Points
/// outside the support are clamped onto it.
pub fn compute_coverage<S: ParameterSpace + ?Sized>(space: &S, executed: &[Vec<f64>], bins_per_dim: usize) -> Result<CoverageReport, ScevarError> {
    if bins_per_dim < 1 {
        return Err(ScevarError::BadSamples("bins per dimension must be >= 1".into()));
    }
    let support = space.support();
    let d = support.len();
    if let Some((i, p)) = executed.iter().enumerate().find(|(_, p)| p.len() != d) {
        return Err(ScevarError::DimensionMismatch { index: i, expected: d, got: p.len() });
    }
    let total = bins_per_dim.pow(d as u32);
    if total > 10_000_000 {
        return Err(ScevarError::BadSamples(format!("{total} coverage bins is too many")));
    }
    let mut hits = vec![0usize; total];
    for p in executed {
        let k = p
            .iter()
            .zip(&support)
            .fold(0, |acc, (&x, &s)| acc * bins_per_dim + bin_index(x, s, bins_per_dim));
        hits[k] += 1;
    }
    let width: Vec<f64> = support.iter().map(|(lo, hi)| (hi - lo) / bins_per_dim as f64).collect();
    let mut bins = Vec::with_capacity(total);
    let mut covered = 0.0;
    for (k, &h) in hits.iter().enumerate() {
        let mut index = vec![0; d];
        let mut r = k;
        for j in (0..d).rev() {
            index[j] = r % bins_per_dim;
            r /= bins_per_dim;
        }
        let lower: Vec<f64> = (0..d).map(|j| support[j].0 + width[j] * index[j] as f64).collect();
        let upper: Vec<f64> = (0..d)
            .map(|j| if index[j] + 1 == bins_per_dim { support[j].1 } else { support[j].0 + width[j] * (index[j] + 1) as f64 })
            .collect();
        let mass = space.box_mass(&lower, &upper);
        if h > 0 {
            covered += mass;
        }
        bins.push(BinCoverage { index, lower, upper, mass, hits: h });
    }
    Ok(CoverageReport {
        dims: space.dim_names(),
        bins_per_dim,
        support,
        points: executed.len(),
        covered_mass: covered.min(1.0),
        bins,
    })
}

pub fn coverage_csv(r: &CoverageReport) -> String {
    let mut out = String::new();
    let d = r.dims.len();
    for name in &r.dims {
        let _ = write!(out, "{name}_lower,{name}_upper,");
    }
    out.push_str("mass,hits\n");
    for b in &r.bins {
        for j in 0..d {
            let _ = write!(out, "{},{},", b.lower[j], b.upper[j]);
        }
        let _ = writeln!(out, "{},{}", b.mass, b.hits);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_bins_two_hit() {
        let u = UnivariateDistribution::uniform("x", 0.0, 4.0).unwrap();
        let r = compute_coverage(&u, &[vec![0.5], vec![2.5], vec![2.7]], 4).unwrap();
        assert_eq!(r.covered_mass, 0.5);
        assert_eq!(r.bins.iter().map(|b| b.hits).collect::<Vec<_>>(), vec![1, 0, 2, 0]);
        assert_eq!(compute_coverage(&u, &[], 4).unwrap().covered_mass, 0.0);
        assert!(compute_coverage(&u, &[], 0).is_err());
    }
}
