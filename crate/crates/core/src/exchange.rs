//! Exchange algorithm for the doubly-intractable ERGM posterior.
//!
//! Each iteration proposes θ' from a normal block proposal, draws an auxiliary
//! network y' from p(·|θ'), and accepts the swap with log probability
//! `min(0, (θ - θ')ᵗ (s(y') - s(y)) + log p(θ') - log p(θ))`. The normalizing
//! constants cancel, so nothing on this path evaluates z(θ).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeSet, Graph};
use crate::mvn::{diag, Matrix, MvNormal, Prior};
use crate::rng::{stream, StreamRng, TAG_CHAIN};
use crate::sim::{run_in_place, Proposal, Scratch, SimConfig, SimInit};
use crate::stats::{Model, ModelSpec};

/// Default proposal variance per coordinate (sd 0.05).
pub const DEFAULT_SIGMA_EPSILON: f64 = 0.0025;
pub const DEFAULT_GAMMA: f64 = 0.5;

/// How chains in a population see each other within one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Chains update in order, each seeing the latest states of the others.
    #[default]
    Sequential,
    /// All chains propose against the iteration-start population; auxiliary
    /// simulations run in parallel.
    Snapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub burn_in: usize,
    pub main_iters: usize,
    pub aux_iters: usize,
    /// Population size H. `None` selects 2d.
    pub nchains: Option<usize>,
    pub gamma: f64,
    /// Proposal covariance Σ_ε. `None` selects `DEFAULT_SIGMA_EPSILON · I`.
    pub sigma_epsilon: Option<Matrix>,
    pub seed: u64,
    pub proposal: Proposal,
    pub sim_init: SimInit,
    pub mode: UpdateMode,
    /// Starting parameter; zero vector when absent.
    pub init_theta: Option<Vec<f64>>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            burn_in: 100,
            main_iters: 1000,
            aux_iters: 1000,
            nchains: None,
            gamma: DEFAULT_GAMMA,
            sigma_epsilon: None,
            seed: 0,
            proposal: Proposal::default(),
            sim_init: SimInit::default(),
            mode: UpdateMode::default(),
            init_theta: None,
        }
    }
}

impl SamplerConfig {
    pub fn chains_for(&self, d: usize) -> usize {
        self.nchains.unwrap_or(2 * d)
    }

    pub fn sigma_for(&self, d: usize) -> Matrix {
        self.sigma_epsilon
            .clone()
            .unwrap_or_else(|| diag(d, DEFAULT_SIGMA_EPSILON))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            aux_iters: self.aux_iters,
            proposal: self.proposal,
            init: self.sim_init.clone(),
            verify: false,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.main_iters == 0 {
            return Err(Error::Config("main_iters must be at least 1".into()));
        }
        if self.aux_iters == 0 {
            return Err(Error::Config("aux_iters must be at least 1".into()));
        }
        if self.chains_for(d) == 0 {
            return Err(Error::Config("nchains must be at least 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!(
                "gamma must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        if let Some(t) = &self.init_theta {
            if t.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: t.len(),
                });
            }
        }
        MvNormal::new(vec![0.0; d], self.sigma_for(d))?;
        Ok(())
    }
}

/// Retained draws of one chain, stored row-major (`main_iters × d`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub draws: Vec<f64>,
    pub accepted: usize,
    pub proposed: usize,
}

impl ChainTrace {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Posterior sample of a population of chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub dim: usize,
    pub labels: Vec<String>,
    pub chains: Vec<ChainTrace>,
    pub model: Option<ModelSpec>,
    pub config: Option<SamplerConfig>,
}

impl Trace {
    /// Builds a trace from explicit draws (`chains[h][t]` is a d-vector).
    pub fn from_draws(labels: Vec<String>, chains: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let dim = labels.len();
        let mut out = Vec::with_capacity(chains.len());
        for chain in chains {
            let mut draws = Vec::with_capacity(chain.len() * dim);
            for row in chain {
                if row.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: row.len(),
                    });
                }
                draws.extend(row);
            }
            out.push(ChainTrace {
                draws,
                accepted: 0,
                proposed: 0,
            });
        }
        Ok(Trace {
            dim,
            labels,
            chains: out,
            model: None,
            config: None,
        })
    }

    pub fn nchains(&self) -> usize {
        self.chains.len()
    }

    pub fn chain_len(&self, h: usize) -> usize {
        self.chains[h].draws.len() / self.dim.max(1)
    }

    /// Draws of chain `h`, one d-slice per retained iteration.
    pub fn chain_draws(&self, h: usize) -> impl Iterator<Item = &[f64]> + '_ {
        self.chains[h].draws.chunks_exact(self.dim)
    }

    /// All retained draws across chains, chain-major.
    pub fn pooled(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.chains
            .iter()
            .flat_map(|c| c.draws.chunks_exact(self.dim))
    }

    pub fn total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum::<usize>() / self.dim.max(1)
    }

    pub fn overall_acceptance(&self) -> f64 {
        let (a, p) = self
            .chains
            .iter()
            .fold((0, 0), |(a, p), c| (a + c.accepted, p + c.proposed));
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total_draws() == 0
    }
}

/// Draw θ' ~ N(θ, Σ_ε).
pub fn propose_block<R: Rng + ?Sized>(
    theta: &[f64],
    sigma_epsilon: &Matrix,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = MvNormal::new(vec![0.0; theta.len()], sigma_epsilon.clone())?;
    Ok(n.sample_around(theta, rng))
}

/// `(θ - θ')ᵗ (s(y') - s(y)) + log p(θ') - log p(θ)`; the caller clamps at 0.
pub fn log_accept_ratio(
    theta: &[f64],
    theta_p: &[f64],
    s_y: &[f64],
    s_yp: &[f64],
    prior: &Prior,
) -> Result<f64> {
    let d = prior.dim();
    for v in [theta, theta_p, s_y, s_yp] {
        if v.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: v.len(),
            });
        }
    }
    Ok(log_ratio_unchecked(theta, theta_p, s_y, s_yp, prior))
}

#[inline]
fn log_ratio_unchecked(
    theta: &[f64],
    theta_p: &[f64],
    s_y: &[f64],
    s_yp: &[f64],
    prior: &Prior,
) -> f64 {
    let stat_term: f64 = (0..theta.len())
        .map(|k| (theta[k] - theta_p[k]) * (s_yp[k] - s_y[k]))
        .sum();
    stat_term + prior.log_density(theta_p) - prior.log_density(theta)
}

/// Everything an exchange update needs besides the current state.
pub(crate) struct ExchangeContext<'a> {
    pub model: Model,
    pub observed: &'a Graph,
    pub s_obs: Vec<f64>,
    pub prior: &'a Prior,
    pub sim: SimConfig,
    pub step: MvNormal,
}

/// Per-worker mutable buffers.
pub(crate) struct Workspace {
    pub graph: Graph,
    pub scratch: Scratch,
    pub s_aux: Vec<f64>,
}

impl<'a> ExchangeContext<'a> {
    pub fn new(
        g: &'a Graph,
        attrs: &AttributeSet,
        spec: &ModelSpec,
        prior: &'a Prior,
        cfg: &SamplerConfig,
    ) -> Result<Self> {
        let d = spec.dim();
        if prior.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                got: prior.dim(),
            });
        }
        cfg.validate(d)?;
        let model = Model::for_graph(spec, g, attrs)?;
        let s_obs = model.stats(g)?;
        if let SimInit::Given(start) = &cfg.sim_init {
            if start.n() != g.n() || start.is_directed() != g.is_directed() {
                return Err(Error::Config(
                    "auxiliary start graph does not match the observed network".into(),
                ));
            }
        }
        Ok(ExchangeContext {
            model,
            observed: g,
            s_obs,
            prior,
            sim: cfg.sim_config(),
            step: MvNormal::new(vec![0.0; d], cfg.sigma_for(d))?,
        })
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            graph: self.observed.clone(),
            scratch: Scratch::new(self.model.dim()),
            s_aux: vec![0.0; self.model.dim()],
        }
    }

    /// Simulates y' at `theta_p` and returns the exchange log acceptance ratio.
    pub fn log_ratio(
        &self,
        theta: &[f64],
        theta_p: &[f64],
        ws: &mut Workspace,
        rng: &mut StreamRng,
    ) -> f64 {
        self.sim.init.reset(&mut ws.graph, self.observed);
        run_in_place(
            &self.model,
            &mut ws.graph,
            theta_p,
            &self.sim,
            rng,
            &mut ws.scratch,
        );
        self.model.stats_into(&ws.graph, &mut ws.s_aux);
        log_ratio_unchecked(theta, theta_p, &self.s_obs, &ws.s_aux, self.prior)
    }

    /// Full exchange update of `theta` given an already-drawn proposal.
    pub fn update(
        &self,
        theta: &mut Vec<f64>,
        theta_p: Vec<f64>,
        ws: &mut Workspace,
        rng: &mut StreamRng,
    ) -> bool {
        let lr = self.log_ratio(theta, &theta_p, ws, rng);
        let accept = lr.is_finite() && (lr >= 0.0 || rng.random::<f64>().ln() < lr);
        if accept {
            *theta = theta_p;
        }
        accept
    }
}

pub(crate) fn initial_theta(cfg: &SamplerConfig, d: usize) -> Vec<f64> {
    cfg.init_theta.clone().unwrap_or_else(|| vec![0.0; d])
}

/// Single-chain exchange sampler with block-update normal proposals. Any
/// `nchains` setting in `cfg` is ignored.
pub fn run_single_chain(
    g: &Graph,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    prior: &Prior,
    cfg: &SamplerConfig,
) -> Result<Trace> {
    let ctx = ExchangeContext::new(g, attrs, spec, prior, cfg)?;
    let d = spec.dim();
    let mut ws = ctx.workspace();
    let mut theta = initial_theta(cfg, d);
    let mut chain = ChainTrace {
        draws: Vec::with_capacity(cfg.main_iters * d),
        accepted: 0,
        proposed: 0,
    };
    for it in 0..cfg.burn_in + cfg.main_iters {
        let mut rng = stream(cfg.seed, &[TAG_CHAIN, 0, it as u64]);
        let theta_p = ctx.step.sample_around(&theta, &mut rng);
        let accepted = ctx.update(&mut theta, theta_p, &mut ws, &mut rng);
        if it >= cfg.burn_in {
            chain.proposed += 1;
            chain.accepted += accepted as usize;
            chain.draws.extend_from_slice(&theta);
        }
    }
    let mut echo = cfg.clone();
    echo.nchains = Some(1);
    Ok(Trace {
        dim: d,
        labels: spec.labels(),
        chains: vec![chain],
        model: Some(spec.clone()),
        config: Some(echo),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ModelTerm;

    #[test]
    fn propose_block_degenerate_covariance() {
        let mut rng = stream(1, &[]);
        let theta = [0.3, -1.2];
        let p = propose_block(&theta, &diag(2, 1e-20), &mut rng).unwrap();
        for k in 0..2 {
            assert!((p[k] - theta[k]).abs() < 1e-8);
        }
        assert!(propose_block(&theta, &diag(2, -1.0), &mut rng).is_err());
    }

    #[test]
    fn propose_block_moments() {
        let mut rng = stream(2, &[]);
        let m = 100_000;
        let xs: Vec<f64> = (0..m)
            .map(|_| propose_block(&[0.0], &diag(1, 1.0), &mut rng).unwrap()[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");

        let xs: Vec<Vec<f64>> = (0..m)
            .map(|_| propose_block(&[1.0, 2.0], &diag(2, 0.0025), &mut rng).unwrap())
            .collect();
        for (k, c) in [1.0, 2.0].iter().enumerate() {
            let sd = (xs.iter().map(|x| (x[k] - c).powi(2)).sum::<f64>() / m as f64).sqrt();
            assert!((sd - 0.05).abs() < 0.001, "{sd}");
        }
    }

    #[test]
    fn log_ratio_examples() {
        let prior = Prior::independent(vec![0.0], &[1e6]).unwrap();
        assert_eq!(
            log_accept_ratio(&[1.0], &[1.0], &[4.0], &[9.0], &prior).unwrap(),
            0.0
        );
        let r = log_accept_ratio(&[1.0], &[2.0], &[10.0], &[12.0], &prior).unwrap();
        assert!((r + 2.0).abs() < 1e-9);
        let std = Prior::independent(vec![0.0], &[1.0]).unwrap();
        let r = log_accept_ratio(&[0.0], &[1.0], &[3.0], &[3.0], &std).unwrap();
        assert!((r + 0.5).abs() < 1e-14);
        assert!(log_accept_ratio(&[0.0, 1.0], &[1.0], &[3.0], &[3.0], &std).is_err());
    }

    #[test]
    fn tight_prior_dominates() {
        let g = Graph::from_edges(5, false, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let spec = ModelSpec::new(vec![ModelTerm::Edges]).unwrap();
        let prior = Prior::independent(vec![0.7], &[1e-4]).unwrap();
        let cfg = SamplerConfig {
            burn_in: 50,
            main_iters: 500,
            aux_iters: 50,
            sigma_epsilon: Some(diag(1, 1e-8)),
            init_theta: Some(vec![0.7]),
            seed: 4,
            ..Default::default()
        };
        let t = run_single_chain(&g, &AttributeSet::new(), &spec, &prior, &cfg).unwrap();
        let mean = t.pooled().map(|x| x[0]).sum::<f64>() / t.total_draws() as f64;
        assert!((mean - 0.7).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn acceptance_is_nondegenerate() {
        let g = Graph::from_edges(5, false, &[(0, 1), (1, 2), (0, 2), (3, 4)]).unwrap();
        let spec = ModelSpec::new(vec![ModelTerm::Edges]).unwrap();
        let cfg = SamplerConfig {
            burn_in: 100,
            main_iters: 2000,
            aux_iters: 100,
            sigma_epsilon: Some(diag(1, 0.5)),
            seed: 11,
            ..Default::default()
        };
        let t = run_single_chain(&g, &AttributeSet::new(), &spec, &Prior::vague(1), &cfg).unwrap();
        let rate = t.overall_acceptance();
        assert!(rate > 0.0 && rate < 1.0, "{rate}");
        assert_eq!(t.total_draws(), 2000);
        assert!(t.pooled().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn reproducible_under_seed() {
        let g = Graph::from_edges(4, true, &[(0, 1), (1, 0), (2, 3)]).unwrap();
        let spec = ModelSpec::new(vec![ModelTerm::Edges, ModelTerm::Mutual]).unwrap();
        let cfg = SamplerConfig {
            burn_in: 10,
            main_iters: 200,
            aux_iters: 50,
            seed: 99,
            ..Default::default()
        };
        let a = run_single_chain(&g, &AttributeSet::new(), &spec, &Prior::vague(2), &cfg).unwrap();
        let b = run_single_chain(&g, &AttributeSet::new(), &spec, &Prior::vague(2), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
