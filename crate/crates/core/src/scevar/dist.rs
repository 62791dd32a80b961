//! Univariate and joint parameter distributions: Freedman-Diaconis histograms
//! and Gaussian KDEs with Scott's-rule bandwidth.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::ScevarError;

/// KDE support is the sample range widened by this many bandwidths, which
/// leaves under 1e-15 of mass outside.
pub const KDE_TAIL: f64 = 8.0;
pub const MAX_BINS: usize = 1000;
pub const MAX_JOINT_DIMS: usize = 4;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1).
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Linear-interpolated quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

/// Bin edges by Freedman-Diaconis; Sturges when the IQR vanishes, a single
/// narrow bin when every sample is equal.
pub fn histogram_edges(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let (lo, hi) = (s[0], s[s.len() - 1]);
    if hi <= lo {
        let eps = lo.abs().max(1.0) * 1e-3;
        return vec![lo - eps, lo + eps];
    }
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let n = s.len() as f64;
    let bins = if iqr > 0.0 {
        let width = 2.0 * iqr / n.cbrt();
        ((hi - lo) / width).ceil() as usize
    } else {
        n.log2().ceil() as usize + 1
    }
    .clamp(1, MAX_BINS);
    (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect()
}

/// Index of the bin holding `x`; the last bin is closed on the right.
fn bin_of(edges: &[f64], x: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if x < edges[0] || x > edges[n] {
        return None;
    }
    Some(edges.partition_point(|&e| e <= x).saturating_sub(1).min(n - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Histogram,
    Kde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Univariate {
    Histogram { edges: Vec<f64>, masses: Vec<f64> },
    Kde { samples: Vec<f64>, bandwidth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateDistribution {
    pub name: String,
    #[serde(flatten)]
    pub kind: Univariate,
    pub support: (f64, f64),
}

impl UnivariateDistribution {
    pub fn histogram(name: &str, edges: Vec<f64>, masses: Vec<f64>) -> Result<Self, ScevarError> {
        if edges.len() < 2 || masses.len() != edges.len() - 1 {
            return Err(ScevarError::BadDistribution(format!("{} edges for {} masses", edges.len(), masses.len())));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ScevarError::BadDistribution("histogram edges must increase".into()));
        }
        let total: f64 = masses.iter().sum();
        if masses.iter().any(|m| *m < 0.0) || !(total > 0.0) {
            return Err(ScevarError::BadDistribution("histogram masses must be non-negative with positive sum".into()));
        }
        let support = (edges[0], edges[edges.len() - 1]);
        Ok(UnivariateDistribution {
            name: name.to_string(),
            kind: Univariate::Histogram {
                masses: masses.iter().map(|m| m / total).collect(),
                edges,
            },
            support,
        })
    }

    /// Uniform over `[lo, hi]`, a one-bin histogram.
    pub fn uniform(name: &str, lo: f64, hi: f64) -> Result<Self, ScevarError> {
        Self::histogram(name, vec![lo, hi], vec![1.0])
    }

    pub fn kde(name: &str, samples: Vec<f64>, bandwidth: f64) -> Result<Self, ScevarError> {
        if samples.is_empty() || !(bandwidth > 0.0) {
            return Err(ScevarError::BadDistribution("KDE needs samples and a positive bandwidth".into()));
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(UnivariateDistribution {
            name: name.to_string(),
            support: (lo - KDE_TAIL * bandwidth, hi + KDE_TAIL * bandwidth),
            kind: Univariate::Kde { samples, bandwidth },
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.kind {
            Univariate::Histogram { edges, masses } => match bin_of(edges, x) {
                Some(i) => masses[i] / (edges[i + 1] - edges[i]),
                None => 0.0,
            },
            Univariate::Kde { samples, bandwidth } => {
                samples.iter().map(|s| std_normal_pdf((x - s) / bandwidth)).sum::<f64>() / (samples.len() as f64 * bandwidth)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            Univariate::Histogram { edges, masses } => {
                if x <= edges[0] {
                    return 0.0;
                }
                let mut acc = 0.0;
                for i in 0..masses.len() {
                    if x >= edges[i + 1] {
                        acc += masses[i];
                    } else {
                        acc += masses[i] * (x - edges[i]) / (edges[i + 1] - edges[i]);
                        break;
                    }
                }
                acc.min(1.0)
            }
            Univariate::Kde { samples, bandwidth } => {
                samples.iter().map(|s| std_normal_cdf((x - s) / bandwidth)).sum::<f64>() / samples.len() as f64
            }
        }
    }

    /// Inverse CDF by bisection on the support.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if let Univariate::Histogram { edges, masses } = &self.kind {
            let mut acc = 0.0;
            for i in 0..masses.len() {
                if masses[i] > 0.0 && acc + masses[i] >= u {
                    return edges[i] + (edges[i + 1] - edges[i]) * ((u - acc) / masses[i]).clamp(0.0, 1.0);
                }
                acc += masses[i];
            }
            return edges[edges.len() - 1];
        }
        let (mut lo, mut hi) = self.support;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            Univariate::Histogram { .. } => self.quantile(rng.gen::<f64>()),
            Univariate::Kde { samples, bandwidth } => {
                let c = samples[rng.gen_range(0..samples.len())];
                let z: f64 = rng.sample(StandardNormal);
                c + bandwidth * z
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Univariate::Histogram { edges, masses } => {
                masses.iter().enumerate().map(|(i, m)| m * 0.5 * (edges[i] + edges[i + 1])).sum()
            }
            Univariate::Kde { samples, .. } => mean(samples),
        }
    }

    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// Equal-width discretization of the support into `bins` bins.
    pub fn discretize(&self, bins: usize) -> UnivariateDistribution {
        let bins = bins.max(1);
        let (lo, hi) = self.support;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + (hi - lo) * k as f64 / bins as f64).collect();
        let masses: Vec<f64> = edges.windows(2).map(|w| self.mass(w[0], w[1])).collect();
        UnivariateDistribution::histogram(&self.name, edges, masses).expect("discretized masses are positive")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub kind: FitKind,
    /// Overrides Freedman-Diaconis when set.
    pub bins: Option<usize>,
    /// Overrides Scott's rule when set.
    pub bandwidth: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            kind: FitKind::Kde,
            bins: None,
            bandwidth: None,
        }
    }
}

pub const MIN_KDE_SAMPLES: usize = 5;
pub const MIN_JOINT_SAMPLES: usize = 10;

/// Scott's rule: `sigma * n^(-1/(d+4))`.
pub fn scott_bandwidth(samples: &[f64], dims: usize) -> f64 {
    std_dev(samples) * (samples.len() as f64).powf(-1.0 / (dims as f64 + 4.0))
}

pub fn fit_univariate(name: &str, samples: &[f64], cfg: &FitConfig) -> Result<UnivariateDistribution, ScevarError> {
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(ScevarError::BadSamples("non-finite sample".into()));
    }
    let histogram = |samples: &[f64]| {
        if samples.is_empty() {
            return Err(ScevarError::TooFewSamples { need: 1, got: 0 });
        }
        let edges = match cfg.bins {
            Some(b) if b >= 1 && samples.iter().any(|x| *x != samples[0]) => {
                let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (0..=b).map(|k| lo + (hi - lo) * k as f64 / b as f64).collect()
            }
            _ => histogram_edges(samples),
        };
        let mut counts = vec![0.0; edges.len() - 1];
        for &x in samples {
            counts[bin_of(&edges, x).expect("edges span the samples")] += 1.0;
        }
        UnivariateDistribution::histogram(name, edges, counts)
    };
    match cfg.kind {
        FitKind::Histogram => histogram(samples),
        FitKind::Kde => {
            if samples.len() < MIN_KDE_SAMPLES {
                return Err(ScevarError::TooFewSamples { need: MIN_KDE_SAMPLES, got: samples.len() });
            }
            let h = cfg.bandwidth.unwrap_or_else(|| scott_bandwidth(samples, 1));
            if !(h > 0.0) {
                log::warn!("{name}: samples have zero variance; fitting a histogram instead of a KDE");
                return histogram(samples);
            }
            UnivariateDistribution::kde(name, samples.to_vec(), h)
        }
    }
}

// ---------------------------------------------------------------- joint

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Joint {
    /// Diagonal-bandwidth Gaussian KDE.
    Kde { samples: Vec<Vec<f64>>, bandwidth: Vec<f64> },
    /// Row-major masses over the product of per-dimension edges.
    Histogram { edges: Vec<Vec<f64>>, masses: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub dims: Vec<String>,
    #[serde(flatten)]
    pub kind: Joint,
    pub support: Vec<(f64, f64)>,
}

fn flat_index(idx: &[usize], shape: &[usize]) -> usize {
    idx.iter().zip(shape).fold(0, |acc, (i, n)| acc * n + i)
}

fn unflatten(mut k: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for d in (0..shape.len()).rev() {
        idx[d] = k % shape[d];
        k /= shape[d];
    }
    idx
}

impl JointDistribution {
    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    fn shape(edges: &[Vec<f64>]) -> Vec<usize> {
        edges.iter().map(|e| e.len() - 1).collect()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Joint::Kde { samples, bandwidth } => {
                let norm: f64 = bandwidth.iter().product();
                samples
                    .iter()
                    .map(|s| s.iter().zip(x).zip(bandwidth).map(|((si, xi), h)| std_normal_pdf((xi - si) / h)).product::<f64>())
                    .sum::<f64>()
                    / (samples.len() as f64 * norm)
            }
            Joint::Histogram { edges, masses } => {
                let mut idx = Vec::with_capacity(edges.len());
                let mut vol = 1.0;
                for (e, &xi) in edges.iter().zip(x) {
                    match bin_of(e, xi) {
                        Some(i) => {
                            vol *= e[i + 1] - e[i];
                            idx.push(i);
                        }
                        None => return 0.0,
                    }
                }
                masses[flat_index(&idx, &Self::shape(edges))] / vol
            }
        }
    }

    /// Probability of the box `[lo, hi]`.
    pub fn mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match &self.kind {
            Joint::Kde { samples, bandwidth } => {
                samples
                    .iter()
                    .map(|s| {
                        (0..s.len())
                            .map(|d| {
                                (std_normal_cdf((hi[d] - s[d]) / bandwidth[d]) - std_normal_cdf((lo[d] - s[d]) / bandwidth[d])).max(0.0)
                            })
                            .product::<f64>()
                    })
                    .sum::<f64>()
                    / samples.len() as f64
            }
            Joint::Histogram { edges, masses } => {
                let shape = Self::shape(edges);
                masses
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| **m > 0.0)
                    .map(|(k, m)| {
                        let idx = unflatten(k, &shape);
                        let frac: f64 = (0..shape.len())
                            .map(|d| {
                                let (a, b) = (edges[d][idx[d]], edges[d][idx[d] + 1]);
                                ((hi[d].min(b) - lo[d].max(a)) / (b - a)).max(0.0)
                            })
                            .product();
                        m * frac
                    })
                    .sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            Joint::Kde { samples, bandwidth } => {
                let c = &samples[rng.gen_range(0..samples.len())];
                c.iter()
                    .zip(bandwidth)
                    .map(|(ci, h)| {
                        let z: f64 = rng.sample(StandardNormal);
                        ci + h * z
                    })
                    .collect()
            }
            Joint::Histogram { edges, masses } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut k = masses.len() - 1;
                for (i, m) in masses.iter().enumerate() {
                    acc += m;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                let idx = unflatten(k, &Self::shape(edges));
                idx.iter()
                    .enumerate()
                    .map(|(d, &i)| edges[d][i] + rng.gen::<f64>() * (edges[d][i + 1] - edges[d][i]))
                    .collect()
            }
        }
    }

    /// Exact marginal along one dimension.
    pub fn marginal(&self, dim: usize) -> UnivariateDistribution {
        let name = &self.dims[dim];
        match &self.kind {
            Joint::Kde { samples, bandwidth } => {
                UnivariateDistribution::kde(name, samples.iter().map(|s| s[dim]).collect(), bandwidth[dim]).expect("fitted bandwidth is positive")
            }
            Joint::Histogram { edges, masses } => {
                let shape = Self::shape(edges);
                let mut m = vec![0.0; shape[dim]];
                for (k, mass) in masses.iter().enumerate() {
                    m[unflatten(k, &shape)[dim]] += mass;
                }
                UnivariateDistribution::histogram(name, edges[dim].clone(), m).expect("marginal of a valid histogram")
            }
        }
    }

    /// Mean vector and correlation matrix of the fitted density.
    pub fn moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let d = self.ndims();
        match &self.kind {
            Joint::Kde { samples, bandwidth } => {
                let n = samples.len() as f64;
                let mu: Vec<f64> = (0..d).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n).collect();
                let mut cov = vec![vec![0.0; d]; d];
                for s in samples {
                    for a in 0..d {
                        for b in 0..d {
                            cov[a][b] += (s[a] - mu[a]) * (s[b] - mu[b]) / n;
                        }
                    }
                }
                for a in 0..d {
                    cov[a][a] += bandwidth[a] * bandwidth[a];
                }
                (mu, corr_from_cov(&cov))
            }
            Joint::Histogram { edges, masses } => {
                let shape = Self::shape(edges);
                let mut mu = vec![0.0; d];
                let mut second = vec![vec![0.0; d]; d];
                for (k, m) in masses.iter().enumerate() {
                    let idx = unflatten(k, &shape);
                    let c: Vec<f64> = (0..d).map(|j| 0.5 * (edges[j][idx[j]] + edges[j][idx[j] + 1])).collect();
                    let w2: Vec<f64> = (0..d).map(|j| (edges[j][idx[j] + 1] - edges[j][idx[j]]).powi(2) / 12.0).collect();
                    for a in 0..d {
                        mu[a] += m * c[a];
                        for b in 0..d {
                            second[a][b] += m * (c[a] * c[b] + if a == b { w2[a] } else { 0.0 });
                        }
                    }
                }
                let cov: Vec<Vec<f64>> = (0..d).map(|a| (0..d).map(|b| second[a][b] - mu[a] * mu[b]).collect()).collect();
                (mu, corr_from_cov(&cov))
            }
        }
    }
}

fn corr_from_cov(cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = cov.len();
    (0..d)
        .map(|a| (0..d).map(|b| cov[a][b] / (cov[a][a] * cov[b][b]).sqrt()).collect())
        .collect()
}

pub fn fit_joint(dims: &[&str], samples: &[Vec<f64>], cfg: &FitConfig) -> Result<JointDistribution, ScevarError> {
    let d = dims.len();
    if !(2..=MAX_JOINT_DIMS).contains(&d) {
        return Err(ScevarError::BadSamples(format!("joint fits need 2 to {MAX_JOINT_DIMS} dimensions, got {d}")));
    }
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != d) {
        return Err(ScevarError::DimensionMismatch { index: i, expected: d, got: s.len() });
    }
    if samples.len() < MIN_JOINT_SAMPLES {
        return Err(ScevarError::TooFewSamples { need: MIN_JOINT_SAMPLES, got: samples.len() });
    }
    if samples.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ScevarError::BadSamples("non-finite sample".into()));
    }
    let column = |j: usize| samples.iter().map(|s| s[j]).collect::<Vec<f64>>();
    let names: Vec<String> = dims.iter().map(|s| s.to_string()).collect();
    let use_hist = |kind| {
        let edges: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let col = column(j);
                match cfg.bins {
                    Some(b) if b >= 1 && col.iter().any(|x| *x != col[0]) => {
                        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        (0..=b).map(|k| lo + (hi - lo) * k as f64 / b as f64).collect()
                    }
                    _ => histogram_edges(&col),
                }
            })
            .collect();
        let shape = JointDistribution::shape(&edges);
        let cells: usize = shape.iter().product();
        if cells > 1_000_000 {
            return Err(ScevarError::BadSamples(format!("joint histogram would have {cells} cells")));
        }
        let mut masses = vec![0.0; cells];
        for s in samples {
            let idx: Vec<usize> = (0..d).map(|j| bin_of(&edges[j], s[j]).expect("edges span samples")).collect();
            masses[flat_index(&idx, &shape)] += 1.0 / samples.len() as f64;
        }
        if kind == FitKind::Kde {
            log::warn!("{dims:?}: a dimension has zero variance; fitting a histogram instead of a KDE");
        }
        let support = edges.iter().map(|e| (e[0], e[e.len() - 1])).collect();
        Ok(JointDistribution {
            dims: names.clone(),
            kind: Joint::Histogram { edges, masses },
            support,
        })
    };
    match cfg.kind {
        FitKind::Histogram => use_hist(FitKind::Histogram),
        FitKind::Kde => {
            let bandwidth: Vec<f64> = (0..d).map(|j| scott_bandwidth(&column(j), d)).collect();
            if bandwidth.iter().any(|h| !(*h > 0.0)) {
                return use_hist(FitKind::Kde);
            }
            let support = (0..d)
                .map(|j| {
                    let col = column(j);
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo - KDE_TAIL * bandwidth[j], hi + KDE_TAIL * bandwidth[j])
                })
                .collect();
            Ok(JointDistribution {
                dims: names,
                kind: Joint::Kde { samples: samples.to_vec(), bandwidth },
                support,
            })
        }
    }
}
