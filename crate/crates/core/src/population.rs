//! Population MCMC with parallel adaptive direction sampling (ADS) moves.
//!
//! H chains target the product of H copies of the posterior. Chain h proposes
//! `θ_h + γ (θ_{h1} - θ_{h2}) + ε`, ε ~ N(0, Σ_ε), with the donor pair drawn
//! uniformly from the other chains, and accepts with the exchange ratio.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exchange::{
    initial_theta, run_single_chain, ChainTrace, ExchangeContext, SamplerConfig, Trace, UpdateMode,
};
use crate::graph::{AttributeSet, Graph};
use crate::mvn::{Matrix, MvNormal, Prior};
use crate::rng::{stream, StreamRng, TAG_CHAIN};
use crate::stats::ModelSpec;

/// `θ_h + γ (θ_{h1} - θ_{h2}) + ε` with ε ~ N(0, Σ_ε).
pub fn ads_propose<R: Rng + ?Sized>(
    theta_h: &[f64],
    theta_h1: &[f64],
    theta_h2: &[f64],
    gamma: f64,
    sigma_epsilon: &Matrix,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = theta_h.len();
    for v in [theta_h1, theta_h2] {
        if v.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: v.len(),
            });
        }
    }
    let step = MvNormal::new(vec![0.0; d], sigma_epsilon.clone())?;
    Ok(ads_step(&step, theta_h, theta_h1, theta_h2, gamma, rng))
}

#[inline]
fn ads_step<R: Rng + ?Sized>(
    step: &MvNormal,
    theta_h: &[f64],
    theta_h1: &[f64],
    theta_h2: &[f64],
    gamma: f64,
    rng: &mut R,
) -> Vec<f64> {
    let center: Vec<f64> = (0..theta_h.len())
        .map(|k| theta_h[k] + gamma * (theta_h1[k] - theta_h2[k]))
        .collect();
    step.sample_around(&center, rng)
}

/// Two distinct donors drawn uniformly from `0..nchains` excluding `h`.
pub fn pick_donors<R: Rng + ?Sized>(h: usize, nchains: usize, rng: &mut R) -> (usize, usize) {
    assert!(nchains >= 3, "ADS needs at least three chains");
    let mut h1 = rng.random_range(0..nchains - 1);
    if h1 >= h {
        h1 += 1;
    }
    let (lo, hi) = if h < h1 { (h, h1) } else { (h1, h) };
    let mut h2 = rng.random_range(0..nchains - 2);
    if h2 >= lo {
        h2 += 1;
    }
    if h2 >= hi {
        h2 += 1;
    }
    debug_assert!(h1 != h && h2 != h && h1 != h2);
    (h1, h2)
}

fn chain_rng(seed: u64, h: usize, it: usize) -> StreamRng {
    stream(seed, &[TAG_CHAIN, h as u64, it as u64])
}

/// Population exchange sampler with parallel ADS moves. Requires H ≥ 3.
pub fn run_population(
    g: &Graph,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    prior: &Prior,
    cfg: &SamplerConfig,
) -> Result<Trace> {
    let d = spec.dim();
    let nchains = cfg.chains_for(d);
    if nchains < 3 {
        return Err(Error::Config(format!(
            "population ADS needs at least 3 chains, got {nchains}"
        )));
    }
    let ctx = ExchangeContext::new(g, attrs, spec, prior, cfg)?;
    let start = initial_theta(cfg, d);
    let mut thetas = vec![start; nchains];
    let mut chains: Vec<ChainTrace> = (0..nchains)
        .map(|_| ChainTrace {
            draws: Vec::with_capacity(cfg.main_iters * d),
            accepted: 0,
            proposed: 0,
        })
        .collect();
    let total = cfg.burn_in + cfg.main_iters;

    match cfg.mode {
        UpdateMode::Sequential => {
            let mut ws = ctx.workspace();
            for it in 0..total {
                for h in 0..nchains {
                    let mut rng = chain_rng(cfg.seed, h, it);
                    let (h1, h2) = pick_donors(h, nchains, &mut rng);
                    let theta_p = ads_step(
                        &ctx.step,
                        &thetas[h],
                        &thetas[h1],
                        &thetas[h2],
                        cfg.gamma,
                        &mut rng,
                    );
                    let accepted = ctx.update(&mut thetas[h], theta_p, &mut ws, &mut rng);
                    if it >= cfg.burn_in {
                        chains[h].proposed += 1;
                        chains[h].accepted += accepted as usize;
                    }
                }
                if it >= cfg.burn_in {
                    for h in 0..nchains {
                        chains[h].draws.extend_from_slice(&thetas[h]);
                    }
                }
            }
        }
        UpdateMode::Snapshot => {
            let mut workspaces: Vec<_> = (0..nchains).map(|_| ctx.workspace()).collect();
            for it in 0..total {
                let snapshot = thetas.clone();
                let results: Vec<(Vec<f64>, bool)> = workspaces
                    .par_iter_mut()
                    .enumerate()
                    .map(|(h, ws)| {
                        let mut rng = chain_rng(cfg.seed, h, it);
                        let (h1, h2) = pick_donors(h, nchains, &mut rng);
                        let theta_p = ads_step(
                            &ctx.step,
                            &snapshot[h],
                            &snapshot[h1],
                            &snapshot[h2],
                            cfg.gamma,
                            &mut rng,
                        );
                        let mut theta = snapshot[h].clone();
                        let accepted = ctx.update(&mut theta, theta_p, ws, &mut rng);
                        (theta, accepted)
                    })
                    .collect();
                for (h, (theta, accepted)) in results.into_iter().enumerate() {
                    thetas[h] = theta;
                    if it >= cfg.burn_in {
                        chains[h].proposed += 1;
                        chains[h].accepted += accepted as usize;
                        chains[h].draws.extend_from_slice(&thetas[h]);
                    }
                }
            }
        }
    }

    let mut echo = cfg.clone();
    echo.nchains = Some(nchains);
    Ok(Trace {
        dim: d,
        labels: spec.labels(),
        chains,
        model: Some(spec.clone()),
        config: Some(echo),
    })
}

/// Default estimation entry point: population ADS when H ≥ 3, otherwise the
/// single-chain block-update sampler (H = 1, or one-dimensional models whose
/// default population 2d is too small for ADS).
pub fn fit(
    g: &Graph,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    prior: &Prior,
    cfg: &SamplerConfig,
) -> Result<Trace> {
    if cfg.chains_for(spec.dim()) >= 3 {
        run_population(g, attrs, spec, prior, cfg)
    } else {
        run_single_chain(g, attrs, spec, prior, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvn::diag;
    use crate::stats::ModelTerm;

    #[test]
    fn gamma_zero_is_block_proposal() {
        let sigma = diag(2, 0.3);
        let a = ads_propose(
            &[1.0, 2.0],
            &[5.0, 5.0],
            &[-3.0, 0.0],
            0.0,
            &sigma,
            &mut stream(1, &[]),
        )
        .unwrap();
        let b = crate::exchange::propose_block(&[1.0, 2.0], &sigma, &mut stream(1, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equal_donors_is_block_proposal() {
        let sigma = diag(2, 0.3);
        let a = ads_propose(
            &[1.0, 2.0],
            &[4.0, 4.0],
            &[4.0, 4.0],
            0.9,
            &sigma,
            &mut stream(2, &[]),
        )
        .unwrap();
        let b = crate::exchange::propose_block(&[1.0, 2.0], &sigma, &mut stream(2, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_noise_follows_direction() {
        let p = ads_propose(
            &[0.0],
            &[2.0],
            &[1.0],
            0.7,
            &diag(1, 1e-20),
            &mut stream(3, &[]),
        )
        .unwrap();
        assert!((p[0] - 0.7).abs() < 1e-8);
        assert!(ads_propose(
            &[0.0],
            &[2.0, 1.0],
            &[1.0],
            0.7,
            &diag(1, 1.0),
            &mut stream(3, &[])
        )
        .is_err());
    }

    #[test]
    fn donors_are_distinct_and_uniform() {
        let mut rng = stream(4, &[]);
        for nchains in 3..8 {
            let mut counts = vec![vec![0usize; nchains]; nchains];
            for _ in 0..20_000 {
                let h = rng.random_range(0..nchains);
                let (h1, h2) = pick_donors(h, nchains, &mut rng);
                assert!(h1 != h && h2 != h && h1 != h2);
                assert!(h1 < nchains && h2 < nchains);
                counts[h1][h2] += 1;
            }
            // every ordered pair appears
            let nonzero = counts.iter().flatten().filter(|&&c| c > 0).count();
            assert_eq!(nonzero, nchains * (nchains - 1));
        }
    }

    fn small_problem() -> (Graph, ModelSpec) {
        let g = Graph::from_edges(5, false, &[(0, 1), (1, 2), (0, 2), (3, 4)]).unwrap();
        (g, ModelSpec::new(vec![ModelTerm::Edges]).unwrap())
    }

    #[test]
    fn sizes_and_rates() {
        let (g, spec) = small_problem();
        let cfg = SamplerConfig {
            burn_in: 20,
            main_iters: 300,
            aux_iters: 50,
            nchains: Some(4),
            gamma: 0.5,
            sigma_epsilon: Some(diag(1, 0.2)),
            seed: 1,
            ..Default::default()
        };
        let t = run_population(&g, &AttributeSet::new(), &spec, &Prior::vague(1), &cfg).unwrap();
        assert_eq!(t.nchains(), 4);
        assert_eq!(t.total_draws(), 4 * 300);
        let mean_rate =
            t.chains.iter().map(|c| c.acceptance_rate()).sum::<f64>() / t.nchains() as f64;
        assert!((mean_rate - t.overall_acceptance()).abs() < 1e-12);
        for c in &t.chains {
            assert!(c.acceptance_rate() > 0.0 && c.acceptance_rate() < 1.0);
        }
    }

    #[test]
    fn too_few_chains() {
        let (g, spec) = small_problem();
        let cfg = SamplerConfig {
            nchains: Some(2),
            main_iters: 10,
            aux_iters: 10,
            ..Default::default()
        };
        assert!(matches!(
            run_population(&g, &AttributeSet::new(), &spec, &Prior::vague(1), &cfg),
            Err(Error::Config(_))
        ));
        // default 2d = 2 for a one-term model falls back to one chain
        let cfg = SamplerConfig {
            main_iters: 10,
            aux_iters: 10,
            ..Default::default()
        };
        let t = fit(&g, &AttributeSet::new(), &spec, &Prior::vague(1), &cfg).unwrap();
        assert_eq!(t.nchains(), 1);
    }

    #[test]
    fn snapshot_mode_is_thread_count_independent() {
        let (g, spec) = small_problem();
        let cfg = SamplerConfig {
            burn_in: 5,
            main_iters: 100,
            aux_iters: 50,
            nchains: Some(5),
            mode: UpdateMode::Snapshot,
            seed: 17,
            ..Default::default()
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    run_population(&g, &AttributeSet::new(), &spec, &Prior::vague(1), &cfg).unwrap()
                })
        };
        assert_eq!(run(1), run(4));
    }
}
