//! Brute-force ground truth on tiny networks.
//!
//! Enumerates every graph on n nodes (n ≤ 5 undirected, n ≤ 4 directed),
//! collapses them into a census of distinct statistic vectors, and from it
//! computes exact normalizing constants, statistic expectations, grid
//! posteriors and model evidences. This is the only place z(θ) is evaluated.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::Trace;
use crate::graph::{AttributeSet, Graph};
use crate::mvn::Prior;
use crate::stats::{Model, ModelSpec};

pub const MAX_UNDIRECTED_NODES: usize = 5;
pub const MAX_DIRECTED_NODES: usize = 4;

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn dyads(n: usize, directed: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && (directed || i < j) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Distinct statistic vectors over the whole graph space with their multiplicities.
#[derive(Clone, Debug)]
pub struct StatCensus {
    pub dim: usize,
    pub stats: Vec<Vec<f64>>,
    pub counts: Vec<u64>,
}

impl StatCensus {
    pub fn enumerate(
        n: usize,
        directed: bool,
        attrs: &AttributeSet,
        spec: &ModelSpec,
    ) -> Result<Self> {
        let cap = if directed {
            MAX_DIRECTED_NODES
        } else {
            MAX_UNDIRECTED_NODES
        };
        if n > cap {
            return Err(Error::EnumerationCap(format!(
                "{} graphs on {n} nodes exceed the cap of {cap} nodes",
                if directed { "directed" } else { "undirected" }
            )));
        }
        let model = Model::bind(spec, n, directed, attrs)?;
        let dy = dyads(n, directed);
        let total: u64 = 1 << dy.len();
        let rows: Vec<Vec<f64>> = (0..total)
            .into_par_iter()
            .map(|mask| {
                let mut g = Graph::empty(n, directed);
                for (b, &(i, j)) in dy.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        g.flip(i, j);
                    }
                }
                let mut s = vec![0.0; model.dim()];
                model.stats_into(&g, &mut s);
                s
            })
            .collect();
        // exact bit patterns as keys; statistics of isomorphic graphs agree bitwise
        let mut groups: BTreeMap<Vec<u64>, (Vec<f64>, u64)> = BTreeMap::new();
        for s in rows {
            let key = s.iter().map(|v| v.to_bits()).collect();
            groups.entry(key).or_insert_with(|| (s, 0)).1 += 1;
        }
        let (stats, counts) = groups.into_values().unzip();
        Ok(StatCensus {
            dim: model.dim(),
            stats,
            counts,
        })
    }

    pub fn total_graphs(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn log_weights(&self, theta: &[f64]) -> Vec<f64> {
        self.stats
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| (c as f64).ln() + s.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// log z(θ) = log Σ_y exp{θᵗ s(y)}.
    pub fn log_z(&self, theta: &[f64]) -> f64 {
        log_sum_exp(self.log_weights(theta).into_iter())
    }

    /// E_θ[s(y)].
    pub fn expectation(&self, theta: &[f64]) -> Vec<f64> {
        let lw = self.log_weights(theta);
        let lz = log_sum_exp(lw.iter().copied());
        let mut out = vec![0.0; self.dim];
        for (s, l) in self.stats.iter().zip(&lw) {
            let p = (l - lz).exp();
            for k in 0..self.dim {
                out[k] += p * s[k];
            }
        }
        out
    }
}

fn check_theta(spec: &ModelSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// Exact log normalizing constant by enumeration.
pub fn exact_z(
    n: usize,
    directed: bool,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    theta: &[f64],
) -> Result<f64> {
    check_theta(spec, theta)?;
    Ok(StatCensus::enumerate(n, directed, attrs, spec)?.log_z(theta))
}

/// Exact statistic expectation by enumeration.
pub fn exact_expectation_stats(
    n: usize,
    directed: bool,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    theta: &[f64],
) -> Result<Vec<f64>> {
    check_theta(spec, theta)?;
    Ok(StatCensus::enumerate(n, directed, attrs, spec)?.expectation(theta))
}

/// Rectangular grid: `points[k]` equally spaced values on `[lower[k], upper[k]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points: Vec<usize>) -> Self {
        GridSpec {
            lower,
            upper,
            points,
        }
    }

    /// Same bounds with every axis resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        GridSpec {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            points: self.points.iter().map(|p| (p - 1) * factor + 1).collect(),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if d > 2 {
            return Err(Error::EnumerationCap(format!(
                "grid posteriors support at most 2 parameters, model has {d}"
            )));
        }
        if self.lower.len() != d || self.upper.len() != d || self.points.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: self.points.len(),
            });
        }
        for k in 0..d {
            if !(self.upper[k] > self.lower[k]) || self.points[k] < 3 {
                return Err(Error::Config(format!(
                    "grid axis {} needs upper > lower and at least 3 points",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridPosterior {
    pub axes: Vec<Vec<f64>>,
    pub steps: Vec<f64>,
    /// Grid points in row-major order over `axes`.
    pub points: Vec<Vec<f64>>,
    /// Normalized trapezoidal masses, summing to 1.
    pub masses: Vec<f64>,
    /// Posterior mass carried by points on the grid boundary.
    pub boundary_mass: f64,
    /// log ∫ p(y|θ) p(θ) dθ over the grid.
    pub log_evidence: f64,
}

impl GridPosterior {
    pub fn mean(&self) -> Vec<f64> {
        let d = self.axes.len();
        let mut m = vec![0.0; d];
        for (p, w) in self.points.iter().zip(&self.masses) {
            for k in 0..d {
                m[k] += w * p[k];
            }
        }
        m
    }

    pub fn sd(&self) -> Vec<f64> {
        let mean = self.mean();
        let d = self.axes.len();
        let mut v = vec![0.0; d];
        for (p, w) in self.points.iter().zip(&self.masses) {
            for k in 0..d {
                v[k] += w * (p[k] - mean[k]).powi(2);
            }
        }
        v.into_iter().map(f64::sqrt).collect()
    }

    /// Warning text when the boundary carries non-negligible mass.
    pub fn warning(&self) -> Option<String> {
        (self.boundary_mass > 1e-6).then(|| {
            format!(
                "grid boundary carries posterior mass {:.3e}; widen the grid",
                self.boundary_mass
            )
        })
    }
}

/// Exact posterior on a grid: exp{θᵗs(y) - log z(θ)} p(θ), trapezoid-normalized.
pub fn exact_posterior_grid(
    g: &Graph,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    prior: &Prior,
    grid: &GridSpec,
) -> Result<GridPosterior> {
    let d = spec.dim();
    grid.validate(d)?;
    if prior.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: prior.dim(),
        });
    }
    let census = StatCensus::enumerate(g.n(), g.is_directed(), attrs, spec)?;
    let s_obs = Model::for_graph(spec, g, attrs)?.stats(g)?;

    let axes: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let m = grid.points[k];
            let h = (grid.upper[k] - grid.lower[k]) / (m - 1) as f64;
            (0..m).map(|i| grid.lower[k] + h * i as f64).collect()
        })
        .collect();
    let steps: Vec<f64> = (0..d)
        .map(|k| (grid.upper[k] - grid.lower[k]) / (grid.points[k] - 1) as f64)
        .collect();

    let total: usize = grid.points.iter().product();
    let indices: Vec<Vec<usize>> = (0..total)
        .map(|mut flat| {
            let mut idx = vec![0; d];
            for k in (0..d).rev() {
                idx[k] = flat % grid.points[k];
                flat /= grid.points[k];
            }
            idx
        })
        .collect();

    let evaluated: Vec<(Vec<f64>, f64, bool)> = indices
        .par_iter()
        .map(|idx| {
            let theta: Vec<f64> = (0..d).map(|k| axes[k][idx[k]]).collect();
            let mut log_w = 0.0;
            let mut on_boundary = false;
            for k in 0..d {
                let end = idx[k] == 0 || idx[k] == grid.points[k] - 1;
                on_boundary |= end;
                log_w += (steps[k] * if end { 0.5 } else { 1.0 }).ln();
            }
            let loglik: f64 =
                theta.iter().zip(&s_obs).map(|(a, b)| a * b).sum::<f64>() - census.log_z(&theta);
            let log_post = log_w + loglik + prior.log_density(&theta);
            (theta, log_post, on_boundary)
        })
        .collect();

    let log_evidence = log_sum_exp(evaluated.iter().map(|e| e.1));
    let mut points = Vec::with_capacity(total);
    let mut masses = Vec::with_capacity(total);
    let mut boundary_mass = 0.0;
    for (theta, lw, edge) in evaluated {
        let m = (lw - log_evidence).exp();
        if edge {
            boundary_mass += m;
        }
        points.push(theta);
        masses.push(m);
    }
    Ok(GridPosterior {
        axes,
        steps,
        points,
        masses,
        boundary_mass,
        log_evidence,
    })
}

/// log p(y) by grid quadrature with exact normalizing constants.
pub fn exact_evidence(
    g: &Graph,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    prior: &Prior,
    grid: &GridSpec,
) -> Result<f64> {
    Ok(exact_posterior_grid(g, attrs, spec, prior, grid)?.log_evidence)
}

/// Monte-Carlo standard error of a series mean by non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(xs.len());
    let len = xs.len() / b;
    if len == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| xs[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Pooled posterior mean, sd, and their Monte-Carlo standard errors for one
/// coordinate. Chains are treated as independent; within each chain the error
/// is estimated by batch means.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: f64,
    pub mean_se: f64,
    pub sd: f64,
    pub sd_se: f64,
}

pub fn mc_estimate(trace: &Trace, coord: usize) -> McEstimate {
    let series: Vec<Vec<f64>> = (0..trace.nchains())
        .map(|h| trace.chain_draws(h).map(|x| x[coord]).collect())
        .collect();
    let all: Vec<f64> = series.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let h = series.len() as f64;
    let mean_se = (series
        .iter()
        .map(|s| batch_means_se(s, 25).powi(2))
        .sum::<f64>())
    .sqrt()
        / h;
    let var_se = (series
        .iter()
        .map(|s| {
            let sq: Vec<f64> = s.iter().map(|x| (x - mean).powi(2)).collect();
            batch_means_se(&sq, 25).powi(2)
        })
        .sum::<f64>())
    .sqrt()
        / h;
    McEstimate {
        mean,
        mean_se,
        sd,
        sd_se: var_se / (2.0 * sd),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ModelTerm;

    fn spec(terms: Vec<ModelTerm>) -> ModelSpec {
        ModelSpec::new(terms).unwrap()
    }

    #[test]
    fn log_z_small_cases() {
        let none = AttributeSet::new();
        let edges = spec(vec![ModelTerm::Edges]);
        assert!((exact_z(3, false, &none, &edges, &[0.0]).unwrap() - 8f64.ln()).abs() < 1e-12);
        for t in [-2.0, -0.3, 0.0, 1.7] {
            let closed = 3.0 * (1.0 + f64::exp(t)).ln();
            assert!((exact_z(3, false, &none, &edges, &[t]).unwrap() - closed).abs() < 1e-12);
        }
        let em = spec(vec![ModelTerm::Edges, ModelTerm::Mutual]);
        assert!((exact_z(2, true, &none, &em, &[0.0, 0.0]).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn expectation_small_cases() {
        let none = AttributeSet::new();
        let e = exact_expectation_stats(4, false, &none, &spec(vec![ModelTerm::Edges]), &[0.0])
            .unwrap();
        assert!((e[0] - 3.0).abs() < 1e-12);
        let m = exact_expectation_stats(3, true, &none, &spec(vec![ModelTerm::Mutual]), &[0.0])
            .unwrap();
        assert!((m[0] - 0.75).abs() < 1e-12);
        let e = exact_expectation_stats(4, false, &none, &spec(vec![ModelTerm::Edges]), &[-40.0])
            .unwrap();
        assert!(e[0] < 1e-15);
    }

    #[test]
    fn enumeration_cap() {
        let none = AttributeSet::new();
        let edges = spec(vec![ModelTerm::Edges]);
        assert!(matches!(
            exact_z(6, false, &none, &edges, &[0.0]),
            Err(Error::EnumerationCap(_))
        ));
        assert!(matches!(
            exact_z(5, true, &none, &edges, &[0.0]),
            Err(Error::EnumerationCap(_))
        ));
    }

    #[test]
    fn batch_means_on_iid() {
        let xs: Vec<f64> = (0..10_000).map(|i| ((i * 7919) % 101) as f64).collect();
        let se = batch_means_se(&xs, 20);
        assert!(se.is_finite() && se >= 0.0);
    }
}
