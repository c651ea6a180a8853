//! Auto-RJ exchange sampler for moving between competing models.
//!
//! An offline population run per model yields a normal approximation
//! N(μ̂_m, Σ̂_m) of each within-model posterior. The online chain then proposes
//! a model m' uniformly, draws θ' from that model's approximation, simulates an
//! auxiliary network under (θ', m'), and accepts the joint move with an
//! exchange-type ratio in which every normalizing constant cancels.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::{SamplerConfig, Trace};
use crate::graph::{AttributeSet, Graph};
use crate::mvn::{Matrix, MvNormal, Prior};
use crate::population::fit;
use crate::rng::{stream, TAG_RJ};
use crate::sim::{run_in_place, Proposal, Scratch, SimConfig, SimInit};
use crate::stats::{Model, ModelSpec};

/// Added to the diagonal of every estimated covariance before factorization.
pub const COVARIANCE_JITTER: f64 = 1e-8;

/// Normal approximation of one model's posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: usize,
    pub mu_hat: Vec<f64>,
    pub sigma_hat: Matrix,
}

impl ModelFit {
    pub fn dim(&self) -> usize {
        self.mu_hat.len()
    }

    pub fn proposal(&self) -> Result<MvNormal> {
        MvNormal::new(self.mu_hat.clone(), self.sigma_hat.clone())
    }
}

/// Pooled mean and covariance (n − 1 denominator, plus jitter) of each trace.
pub fn offline_fit(traces: &[Trace]) -> Result<Vec<ModelFit>> {
    traces
        .iter()
        .enumerate()
        .map(|(m, t)| {
            let d = t.dim;
            let n = t.total_draws();
            if n == 0 {
                return Err(Error::Empty(format!("offline trace of model {}", m + 1)));
            }
            if n < d + 1 {
                return Err(Error::Config(format!(
                    "model {} has {n} offline draws; at least {} are needed for a {d}x{d} covariance",
                    m + 1,
                    d + 1
                )));
            }
            let mut mu = vec![0.0; d];
            for x in t.pooled() {
                for k in 0..d {
                    mu[k] += x[k];
                }
            }
            mu.iter_mut().for_each(|v| *v /= n as f64);
            let mut cov = vec![vec![0.0; d]; d];
            for x in t.pooled() {
                for a in 0..d {
                    for b in 0..=a {
                        cov[a][b] += (x[a] - mu[a]) * (x[b] - mu[b]);
                    }
                }
            }
            for a in 0..d {
                for b in 0..=a {
                    let v = cov[a][b] / (n - 1) as f64;
                    cov[a][b] = v;
                    cov[b][a] = v;
                }
                cov[a][a] += COVARIANCE_JITTER;
            }
            let fit = ModelFit {
                model: m,
                mu_hat: mu,
                sigma_hat: cov,
            };
            fit.proposal()?;
            Ok(fit)
        })
        .collect()
}

/// Statistics entering one joint move: `s_m(y)`, `s_m(y')`, `s_m'(y)`, `s_m'(y')`.
#[derive(Clone, Copy, Debug)]
pub struct MoveStats<'a> {
    pub s_m_y: &'a [f64],
    pub s_m_yp: &'a [f64],
    pub s_mp_y: &'a [f64],
    pub s_mp_yp: &'a [f64],
}

/// Log acceptance ratio of the joint move (θ, m) → (θ', m'):
///
/// `θᵗ[s_m(y') − s_m(y)] + θ'ᵗ[s_m'(y) − s_m'(y')] + log p(θ'|m') − log p(θ|m)
///  + log w(θ|m) − log w(θ'|m')`
///
/// where w is the normal approximation of each model. Uniform model priors and
/// uniform model proposals cancel.
pub fn rj_log_accept(
    theta: &[f64],
    m: usize,
    theta_p: &[f64],
    m_p: usize,
    s: MoveStats<'_>,
    priors: &[Prior],
    fits: &[MvNormal],
) -> Result<f64> {
    for idx in [m, m_p] {
        if idx >= priors.len() || idx >= fits.len() {
            return Err(Error::InvalidModel(format!(
                "model index {} out of range",
                idx + 1
            )));
        }
    }
    let check = |v: &[f64], d: usize| {
        if v.len() == d {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: d,
                got: v.len(),
            })
        }
    };
    let (d, dp) = (priors[m].dim(), priors[m_p].dim());
    check(theta, d)?;
    check(s.s_m_y, d)?;
    check(s.s_m_yp, d)?;
    check(theta_p, dp)?;
    check(s.s_mp_y, dp)?;
    check(s.s_mp_yp, dp)?;
    check(fits[m].mean(), d)?;
    check(fits[m_p].mean(), dp)?;
    Ok(log_ratio_unchecked(theta, m, theta_p, m_p, s, priors, fits))
}

fn log_ratio_unchecked(
    theta: &[f64],
    m: usize,
    theta_p: &[f64],
    m_p: usize,
    s: MoveStats<'_>,
    priors: &[Prior],
    fits: &[MvNormal],
) -> f64 {
    let cur: f64 = theta
        .iter()
        .enumerate()
        .map(|(k, t)| t * (s.s_m_yp[k] - s.s_m_y[k]))
        .sum();
    let prop: f64 = theta_p
        .iter()
        .enumerate()
        .map(|(k, t)| t * (s.s_mp_y[k] - s.s_mp_yp[k]))
        .sum();
    cur + prop + priors[m_p].log_density(theta_p) - priors[m].log_density(theta)
        + fits[m].log_density(theta)
        - fits[m_p].log_density(theta_p)
}

/// Settings of the online chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub iters: usize,
    pub aux_iters: usize,
    pub seed: u64,
    pub proposal: Proposal,
    /// Starting model (0-based); the chain starts at that model's μ̂.
    pub start_model: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            iters: 10_000,
            aux_iters: 1000,
            seed: 0,
            proposal: Proposal::default(),
            start_model: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub models: Vec<ModelSpec>,
    pub fits: Vec<ModelFit>,
    /// Model index after each online iteration.
    pub model_trace: Vec<usize>,
    /// θ draws recorded while the chain sat in each model.
    pub theta_traces: Vec<Vec<Vec<f64>>>,
    pub visit_counts: Vec<usize>,
    pub within_proposed: Vec<usize>,
    pub within_accepted: Vec<usize>,
    pub between_proposed: usize,
    pub between_accepted: usize,
}

impl SelectionResult {
    pub fn iters(&self) -> usize {
        self.model_trace.len()
    }

    pub fn model_probabilities(&self) -> Vec<f64> {
        let n = self.iters() as f64;
        self.visit_counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Acceptance rate of proposals that stay in model `m`; `None` if none were made.
    pub fn within_accept(&self, m: usize) -> Option<f64> {
        let p = self.within_proposed[m];
        (p > 0).then(|| self.within_accepted[m] as f64 / p as f64)
    }

    pub fn between_accept(&self) -> Option<f64> {
        (self.between_proposed > 0)
            .then(|| self.between_accepted as f64 / self.between_proposed as f64)
    }

    /// Most visited model; ties go to the lower index.
    pub fn best_model(&self) -> usize {
        let mut best = 0;
        for (m, &c) in self.visit_counts.iter().enumerate() {
            if c > self.visit_counts[best] {
                best = m;
            }
        }
        best
    }

    /// Pooled conditional posterior mean of model `m`'s parameters.
    pub fn conditional_mean(&self, m: usize) -> Option<Vec<f64>> {
        let draws = &self.theta_traces[m];
        let first = draws.first()?;
        let mut mean = vec![0.0; first.len()];
        for x in draws {
            for (acc, v) in mean.iter_mut().zip(x) {
                *acc += v;
            }
        }
        let n = draws.len() as f64;
        mean.iter_mut().for_each(|v| *v /= n);
        Some(mean)
    }

    /// Conditional draws of model `m` as a single-chain trace.
    pub fn conditional_trace(&self, m: usize) -> Result<Trace> {
        let mut t = Trace::from_draws(self.models[m].labels(), vec![self.theta_traces[m].clone()])?;
        t.model = Some(self.models[m].clone());
        t.chains[0].proposed = self.within_proposed[m];
        t.chains[0].accepted = self.within_accepted[m];
        Ok(t)
    }
}

/// Posterior-odds estimate of a Bayes factor from visit counts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BayesFactor {
    Finite(f64),
    /// The denominator model was never visited.
    NotEstimable,
}

impl BayesFactor {
    pub fn value(self) -> Option<f64> {
        match self {
            BayesFactor::Finite(v) => Some(v),
            BayesFactor::NotEstimable => None,
        }
    }
}

impl fmt::Display for BayesFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BayesFactor::Finite(v) => write!(f, "{v}"),
            BayesFactor::NotEstimable => write!(f, "+Inf (not estimable)"),
        }
    }
}

/// `counts[i] / counts[j]`; under uniform model priors this is the Bayes factor.
pub fn bayes_factor(result: &SelectionResult, i: usize, j: usize) -> BayesFactor {
    bayes_factor_from_counts(&result.visit_counts, i, j)
}

pub fn bayes_factor_from_counts(counts: &[usize], i: usize, j: usize) -> BayesFactor {
    if counts[j] == 0 {
        BayesFactor::NotEstimable
    } else {
        BayesFactor::Finite(counts[i] as f64 / counts[j] as f64)
    }
}

/// Online auto-RJ chain given fixed normal approximations.
pub fn run_online(
    g: &Graph,
    attrs: &AttributeSet,
    specs: &[ModelSpec],
    priors: &[Prior],
    fits: &[ModelFit],
    cfg: &OnlineConfig,
) -> Result<SelectionResult> {
    let k = specs.len();
    if k == 0 {
        return Err(Error::InvalidModel("no candidate models".into()));
    }
    if priors.len() != k || fits.len() != k {
        return Err(Error::Config(format!(
            "{k} models but {} priors and {} fits",
            priors.len(),
            fits.len()
        )));
    }
    if cfg.iters == 0 || cfg.aux_iters == 0 {
        return Err(Error::Config(
            "iters and aux_iters must be at least 1".into(),
        ));
    }
    if cfg.start_model >= k {
        return Err(Error::Config(format!(
            "start model {} out of range",
            cfg.start_model + 1
        )));
    }
    let mut models = Vec::with_capacity(k);
    let mut s_obs = Vec::with_capacity(k);
    let mut proposals = Vec::with_capacity(k);
    for m in 0..k {
        let d = specs[m].dim();
        if priors[m].dim() != d || fits[m].dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: if priors[m].dim() != d {
                    priors[m].dim()
                } else {
                    fits[m].dim()
                },
            });
        }
        let model = Model::for_graph(&specs[m], g, attrs)?;
        s_obs.push(model.stats(g)?);
        models.push(model);
        proposals.push(fits[m].proposal()?);
    }
    let sim = SimConfig {
        aux_iters: cfg.aux_iters,
        proposal: cfg.proposal,
        init: SimInit::Observed,
        verify: false,
    };
    let max_d = specs.iter().map(ModelSpec::dim).max().unwrap_or(1);
    let mut scratch: Vec<Scratch> = specs.iter().map(|s| Scratch::new(s.dim())).collect();
    let mut aux = g.clone();
    let mut s_m_yp = vec![0.0; max_d];
    let mut s_mp_yp = vec![0.0; max_d];

    let mut m = cfg.start_model;
    let mut theta = fits[m].mu_hat.clone();
    let mut result = SelectionResult {
        models: specs.to_vec(),
        fits: fits.to_vec(),
        model_trace: Vec::with_capacity(cfg.iters),
        theta_traces: vec![Vec::new(); k],
        visit_counts: vec![0; k],
        within_proposed: vec![0; k],
        within_accepted: vec![0; k],
        between_proposed: 0,
        between_accepted: 0,
    };

    for it in 0..cfg.iters {
        let mut rng = stream(cfg.seed, &[TAG_RJ, it as u64]);
        let m_p = rng.random_range(0..k);
        let theta_p = proposals[m_p].sample(&mut rng);
        let (d, dp) = (specs[m].dim(), specs[m_p].dim());

        aux.clone_from(g);
        run_in_place(
            &models[m_p],
            &mut aux,
            &theta_p,
            &sim,
            &mut rng,
            &mut scratch[m_p],
        );
        models[m].stats_into(&aux, &mut s_m_yp[..d]);
        models[m_p].stats_into(&aux, &mut s_mp_yp[..dp]);

        let lr = log_ratio_unchecked(
            &theta,
            m,
            &theta_p,
            m_p,
            MoveStats {
                s_m_y: &s_obs[m],
                s_m_yp: &s_m_yp[..d],
                s_mp_y: &s_obs[m_p],
                s_mp_yp: &s_mp_yp[..dp],
            },
            priors,
            &proposals,
        );
        let accept = lr.is_finite() && (lr >= 0.0 || rng.random::<f64>().ln() < lr);
        if m_p == m {
            result.within_proposed[m] += 1;
            result.within_accepted[m] += accept as usize;
        } else {
            result.between_proposed += 1;
            result.between_accepted += accept as usize;
        }
        if accept {
            m = m_p;
            theta = theta_p;
        }
        result.model_trace.push(m);
        result.visit_counts[m] += 1;
        result.theta_traces[m].push(theta.clone());
    }
    Ok(result)
}

/// Offline population runs for every model (concurrently), then the online chain.
pub fn run_selection(
    g: &Graph,
    attrs: &AttributeSet,
    specs: &[ModelSpec],
    priors: &[Prior],
    offline: &[SamplerConfig],
    online: &OnlineConfig,
) -> Result<(SelectionResult, Vec<Trace>)> {
    if specs.len() < 2 {
        return Err(Error::InvalidModel(format!(
            "model selection needs at least 2 candidate models, got {}",
            specs.len()
        )));
    }
    run_selection_any(g, attrs, specs, priors, offline, online)
}

/// As [`run_selection`] but also accepts a single candidate, in which case the
/// online chain is an independence-sampler exchange chain for that model.
pub fn run_selection_any(
    g: &Graph,
    attrs: &AttributeSet,
    specs: &[ModelSpec],
    priors: &[Prior],
    offline: &[SamplerConfig],
    online: &OnlineConfig,
) -> Result<(SelectionResult, Vec<Trace>)> {
    if offline.len() != specs.len() || priors.len() != specs.len() {
        return Err(Error::Config(format!(
            "{} models but {} priors and {} offline configurations",
            specs.len(),
            priors.len(),
            offline.len()
        )));
    }
    let traces: Vec<Trace> = (0..specs.len())
        .into_par_iter()
        .map(|m| fit(g, attrs, &specs[m], &priors[m], &offline[m]))
        .collect::<Result<_>>()?;
    let fits = offline_fit(&traces)?;
    let result = run_online(g, attrs, specs, priors, &fits, online)?;
    Ok((result, traces))
}
