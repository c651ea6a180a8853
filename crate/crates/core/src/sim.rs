//! Network simulation from p(y | θ) ∝ exp{θᵗ s(y)} by Metropolis–Hastings
//! tie toggling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeSet, Graph};
use crate::stats::{Model, ModelSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposal {
    /// Toggle a uniformly chosen dyad.
    RandomDyad,
    /// With probability ½ toggle off a uniformly chosen existing tie, otherwise
    /// toggle a uniformly chosen dyad.
    #[default]
    TieNoTie,
}

/// Where auxiliary chains start.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimInit {
    #[default]
    Observed,
    Empty,
    #[serde(skip)]
    Given(Graph),
}

impl SimInit {
    /// Starting graph for an auxiliary chain given the observed network.
    pub fn start(&self, observed: &Graph) -> Graph {
        match self {
            SimInit::Observed => observed.clone(),
            SimInit::Empty => Graph::empty(observed.n(), observed.is_directed()),
            SimInit::Given(g) => g.clone(),
        }
    }

    pub(crate) fn reset(&self, work: &mut Graph, observed: &Graph) {
        match self {
            SimInit::Observed => work.clone_from(observed),
            SimInit::Empty => *work = Graph::empty(observed.n(), observed.is_directed()),
            SimInit::Given(g) => work.clone_from(g),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Total number of toggle proposals.
    pub aux_iters: usize,
    pub proposal: Proposal,
    pub init: SimInit,
    /// Compute change statistics by full recount instead of the local update.
    #[serde(default)]
    pub verify: bool,
}

impl SimConfig {
    pub fn new(aux_iters: usize) -> Self {
        SimConfig {
            aux_iters,
            proposal: Proposal::default(),
            init: SimInit::default(),
            verify: false,
        }
    }

    pub fn with_proposal(mut self, proposal: Proposal) -> Self {
        self.proposal = proposal;
        self
    }

    pub fn with_init(mut self, init: SimInit) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.aux_iters == 0 {
            return Err(Error::Config("aux_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scratch buffers reused across simulations.
#[derive(Clone, Debug, Default)]
pub(crate) struct Scratch {
    delta: Vec<f64>,
    before: Vec<f64>,
    after: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(d: usize) -> Self {
        Scratch {
            delta: vec![0.0; d],
            before: vec![0.0; d],
            after: vec![0.0; d],
        }
    }
}

#[inline]
fn random_dyad<R: Rng + ?Sized>(g: &Graph, rng: &mut R) -> (usize, usize) {
    let n = g.n();
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Runs `cfg.aux_iters` toggle proposals on `g` in place; returns the number accepted.
pub(crate) fn run_in_place<R: Rng + ?Sized>(
    model: &Model,
    g: &mut Graph,
    theta: &[f64],
    cfg: &SimConfig,
    rng: &mut R,
    scratch: &mut Scratch,
) -> usize {
    if g.n() < 2 {
        return 0;
    }
    let dyads = g.dyad_count() as f64;
    let mut accepted = 0;
    for _ in 0..cfg.aux_iters {
        let edges = g.edge_count();
        let (i, j, log_q) = match cfg.proposal {
            Proposal::RandomDyad => {
                let (i, j) = random_dyad(g, rng);
                (i, j, 0.0)
            }
            Proposal::TieNoTie => {
                let (i, j) = if edges > 0 && rng.random::<bool>() {
                    g.edge_at(rng.random_range(0..edges))
                } else {
                    random_dyad(g, rng)
                };
                // log q(y'→y) - log q(y→y')
                let e = edges as f64;
                let log_q = if g.has_edge(i, j) {
                    let fwd = 0.5 / e + 0.5 / dyads;
                    let rev = if edges > 1 { 0.5 / dyads } else { 1.0 / dyads };
                    (rev / fwd).ln()
                } else {
                    let fwd = if edges > 0 { 0.5 / dyads } else { 1.0 / dyads };
                    let rev = 0.5 / (e + 1.0) + 0.5 / dyads;
                    (rev / fwd).ln()
                };
                (i, j, log_q)
            }
        };
        if cfg.verify {
            // recount on a copy: flipping twice would reorder the edge list
            // and change later tie-no-tie picks
            let mut probe = g.clone();
            probe.flip(i, j);
            model.stats_into(g, &mut scratch.before);
            model.stats_into(&probe, &mut scratch.after);
            for k in 0..scratch.delta.len() {
                scratch.delta[k] = scratch.after[k] - scratch.before[k];
            }
        } else {
            model.change_into(g, i, j, &mut scratch.delta);
        }
        let log_ratio: f64 = theta
            .iter()
            .zip(&scratch.delta)
            .map(|(t, s)| t * s)
            .sum::<f64>()
            + log_q;
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            g.flip(i, j);
            accepted += 1;
        }
    }
    accepted
}

/// Draws a network from p(·|θ) by running `cfg.aux_iters` toggle proposals from `start`.
pub fn simulate<R: Rng + ?Sized>(
    start: &Graph,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    theta: &[f64],
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Graph> {
    let model = Model::for_graph(spec, start, attrs)?;
    simulate_bound(&model, start, theta, cfg, rng)
}

pub fn simulate_bound<R: Rng + ?Sized>(
    model: &Model,
    start: &Graph,
    theta: &[f64],
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<Graph> {
    cfg.validate()?;
    if theta.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: theta.len(),
        });
    }
    if start.n() != model.n() || start.is_directed() != model.is_directed() {
        return Err(Error::InvalidModel(
            "start graph does not match the bound model".into(),
        ));
    }
    let mut g = start.clone();
    let mut scratch = Scratch::new(model.dim());
    run_in_place(model, &mut g, theta, cfg, rng, &mut scratch);
    Ok(g)
}
