//! Posterior-predictive goodness of fit.
//!
//! Parameters are resampled with replacement from the retained posterior
//! draws, a network is simulated at each, and the degree, geodesic distance
//! and edgewise-shared-partner distributions of the simulated networks are
//! summarized by per-bin quantiles around the observed values.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::Trace;
use crate::graph::{AttributeSet, Graph};
use crate::rng::{stream, TAG_GOF};
use crate::sim::{run_in_place, Proposal, Scratch, SimConfig, SimInit};
use crate::stats::{gof_stats, GofStats, Model, ModelSpec};

/// Quantile levels reported for every bin.
pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Number of bins displayed per family. Counts are computed over the full
/// range; these only truncate the report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GofBins {
    pub n_ideg: usize,
    pub n_odeg: usize,
    pub n_deg: usize,
    pub n_dist: usize,
    pub n_esp: usize,
}

impl Default for GofBins {
    fn default() -> Self {
        GofBins {
            n_ideg: 20,
            n_odeg: 20,
            n_deg: 20,
            n_dist: 10,
            n_esp: 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofConfig {
    pub sample_size: usize,
    pub aux_iters: usize,
    pub bins: GofBins,
    pub seed: u64,
    pub proposal: Proposal,
}

impl Default for GofConfig {
    fn default() -> Self {
        GofConfig {
            sample_size: 100,
            aux_iters: 10_000,
            bins: GofBins::default(),
            seed: 0,
            proposal: Proposal::default(),
        }
    }
}

/// Linear-interpolation sample quantile (type 7): `x[h]` with `h = (n−1)p`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One statistic family (e.g. the degree distribution) over its displayed bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofFamily {
    pub name: String,
    pub bins: Vec<String>,
    pub observed: Vec<f64>,
    /// `simulated[s][b]`: count in bin b of simulated network s.
    pub simulated: Vec<Vec<f64>>,
    /// `quantiles[b]` at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<[f64; 5]>,
}

impl GofFamily {
    fn build(name: &str, bins: Vec<String>, observed: Vec<f64>, simulated: Vec<Vec<f64>>) -> Self {
        let quantiles = (0..bins.len())
            .map(|b| {
                let mut col: Vec<f64> = simulated.iter().map(|s| s[b]).collect();
                col.sort_by(f64::total_cmp);
                QUANTILE_LEVELS.map(|p| quantile(&col, p))
            })
            .collect();
        GofFamily {
            name: name.into(),
            bins,
            observed,
            simulated,
            quantiles,
        }
    }

    /// Bins whose observed value lies inside the simulated 5–95% band.
    pub fn covered_bins(&self) -> usize {
        self.observed
            .iter()
            .zip(&self.quantiles)
            .filter(|(o, q)| **o >= q[0] && **o <= q[4])
            .count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub directed: bool,
    pub sample_size: usize,
    pub bins: GofBins,
    pub observed: GofStats,
    pub simulated: Vec<GofStats>,
    pub families: Vec<GofFamily>,
}

impl GofReport {
    /// Fraction of all displayed bins, across families, covered by the 5–95% band.
    pub fn band_coverage(&self) -> f64 {
        let (covered, total) = self
            .families
            .iter()
            .fold((0, 0), |(c, t), f| (c + f.covered_bins(), t + f.bins.len()));
        if total == 0 {
            1.0
        } else {
            covered as f64 / total as f64
        }
    }

    pub fn family(&self, name: &str) -> Option<&GofFamily> {
        self.families.iter().find(|f| f.name == name)
    }
}

fn take(counts: &[u64], start: usize, len: usize) -> Vec<f64> {
    (start..start + len)
        .map(|k| counts.get(k).copied().unwrap_or(0) as f64)
        .collect()
}

/// Assembles the per-family tables from observed and simulated summaries.
pub fn build_report(
    observed: GofStats,
    simulated: Vec<GofStats>,
    bins: GofBins,
) -> Result<GofReport> {
    if simulated.is_empty() {
        return Err(Error::Empty("no simulated networks".into()));
    }
    let directed = observed.directed;
    let mut families = Vec::new();
    let mut degree_family = |name: &str, n_bins: usize, pick: &dyn Fn(&GofStats) -> &[u64]| {
        let labels = (0..n_bins).map(|k| k.to_string()).collect();
        families.push(GofFamily::build(
            name,
            labels,
            take(pick(&observed), 0, n_bins),
            simulated.iter().map(|s| take(pick(s), 0, n_bins)).collect(),
        ));
    };
    if directed {
        degree_family("idegree", bins.n_ideg, &|s| {
            s.in_degree.as_deref().unwrap_or(&[])
        });
        degree_family("odegree", bins.n_odeg, &|s| {
            s.out_degree.as_deref().unwrap_or(&[])
        });
    } else {
        degree_family("degree", bins.n_deg, &|s| {
            s.degree.as_deref().unwrap_or(&[])
        });
    }

    let dist_row = |s: &GofStats| {
        let mut row = take(&s.distance, 1, bins.n_dist);
        row.push(s.unreachable as f64);
        row
    };
    let mut labels: Vec<String> = (1..=bins.n_dist).map(|k| k.to_string()).collect();
    labels.push("inf".into());
    families.push(GofFamily::build(
        "distance",
        labels,
        dist_row(&observed),
        simulated.iter().map(dist_row).collect(),
    ));

    families.push(GofFamily::build(
        "esp",
        (0..bins.n_esp).map(|k| k.to_string()).collect(),
        take(&observed.esp, 0, bins.n_esp),
        simulated
            .iter()
            .map(|s| take(&s.esp, 0, bins.n_esp))
            .collect(),
    ));

    Ok(GofReport {
        directed,
        sample_size: simulated.len(),
        bins,
        observed,
        simulated,
        families,
    })
}

/// Simulates `cfg.sample_size` networks at parameters resampled from the
/// pooled draws of `posterior` and compares them with `g`.
pub fn run_gof(
    posterior: &Trace,
    g: &Graph,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    cfg: &GofConfig,
) -> Result<GofReport> {
    if posterior.is_empty() {
        return Err(Error::Empty("posterior trace has no draws".into()));
    }
    if posterior.dim != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: posterior.dim,
        });
    }
    if cfg.sample_size == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    let b = cfg.bins;
    if [b.n_ideg, b.n_odeg, b.n_deg, b.n_dist, b.n_esp].contains(&0) {
        return Err(Error::Config("every bin count must be positive".into()));
    }
    let sim = SimConfig {
        aux_iters: cfg.aux_iters,
        proposal: cfg.proposal,
        init: SimInit::Observed,
        verify: false,
    };
    sim.validate()?;
    let model = Model::for_graph(spec, g, attrs)?;
    let draws: Vec<&[f64]> = posterior.pooled().collect();

    let simulated: Vec<GofStats> = (0..cfg.sample_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, &[TAG_GOF, i as u64]);
            let theta = draws[rng.random_range(0..draws.len())];
            let mut y = g.clone();
            let mut scratch = Scratch::new(model.dim());
            run_in_place(&model, &mut y, theta, &sim, &mut rng, &mut scratch);
            gof_stats(&y)
        })
        .collect();
    build_report(gof_stats(g), simulated, cfg.bins)
}
