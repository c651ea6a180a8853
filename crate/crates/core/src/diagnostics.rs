//! Posterior summaries, autocorrelation, and console reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::autorj::{bayes_factor, SelectionResult};
use crate::error::{Error, Result};
use crate::exchange::Trace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub acceptance_rate: f64,
    pub draws: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub labels: Vec<String>,
    pub chains: Vec<ChainSummary>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub acceptance_rate: f64,
    pub draws: usize,
}

/// Mean and sd (n − 1 denominator; 0 for a single draw) per coordinate.
pub fn moments(rows: &[&[f64]], d: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let mut mean = vec![0.0; d];
    let n = rows.len();
    for x in rows {
        for k in 0..d {
            mean[k] += x[k];
        }
    }
    if n == 0 {
        return (vec![f64::NAN; d], vec![f64::NAN; d], 0);
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut ss = vec![0.0; d];
    for x in rows {
        for k in 0..d {
            ss[k] += (x[k] - mean[k]).powi(2);
        }
    }
    let sd = ss
        .into_iter()
        .map(|s| {
            if n > 1 {
                (s / (n - 1) as f64).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    (mean, sd, n)
}

pub fn summarize(trace: &Trace) -> Result<PosteriorSummary> {
    if trace.is_empty() {
        return Err(Error::Empty("trace has no draws".into()));
    }
    let d = trace.dim;
    let chains = (0..trace.nchains())
        .map(|h| {
            let (mean, sd, draws) = moments(&trace.chain_draws(h).collect::<Vec<_>>(), d);
            ChainSummary {
                mean,
                sd,
                acceptance_rate: trace.chains[h].acceptance_rate(),
                draws,
            }
        })
        .collect();
    let (mean, sd, draws) = moments(&trace.pooled().collect::<Vec<_>>(), d);
    Ok(PosteriorSummary {
        labels: trace.labels.clone(),
        chains,
        mean,
        sd,
        acceptance_rate: trace.overall_acceptance(),
        draws,
    })
}

/// Sample autocorrelation of one series at lags `0..=lag_max`. A constant
/// series has ACF 1 at lag 0 and 0 elsewhere.
pub fn acf(xs: &[f64], lag_max: usize) -> Result<Vec<f64>> {
    if lag_max >= xs.len() {
        return Err(Error::Config(format!(
            "lag_max {lag_max} must be smaller than the series length {}",
            xs.len()
        )));
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    Ok((0..=lag_max)
        .map(|k| {
            if k == 0 {
                1.0
            } else if c0 == 0.0 {
                0.0
            } else {
                c[..n - k]
                    .iter()
                    .zip(&c[k..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / c0
            }
        })
        .collect())
}

/// Per-coordinate ACF at lags `0..=lag_max`, computed within each chain and
/// averaged across chains. `result[k][l]` is coordinate k at lag l.
pub fn autocorrelation(trace: &Trace, lag_max: usize) -> Result<Vec<Vec<f64>>> {
    if trace.is_empty() {
        return Err(Error::Empty("trace has no draws".into()));
    }
    let d = trace.dim;
    let used: Vec<usize> = (0..trace.nchains())
        .filter(|&h| trace.chain_len(h) > 0)
        .collect();
    let mut out = vec![vec![0.0; lag_max + 1]; d];
    for &h in &used {
        for k in 0..d {
            let series: Vec<f64> = trace.chain_draws(h).map(|x| x[k]).collect();
            for (acc, v) in out[k].iter_mut().zip(acf(&series, lag_max)?) {
                *acc += v;
            }
        }
    }
    let m = used.len() as f64;
    for row in &mut out {
        row.iter_mut().for_each(|v| *v /= m);
    }
    Ok(out)
}

fn coef_headers(labels: &[String]) -> Vec<String> {
    labels
        .iter()
        .enumerate()
        .map(|(k, l)| format!("theta{} ({l})", k + 1))
        .collect()
}

fn table(out: &mut String, row_names: &[String], headers: &[String], rows: &[Vec<String>]) {
    let name_w = row_names.iter().map(String::len).max().unwrap_or(0).max(9);
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(c, h)| {
            rows.iter()
                .map(|r| r[c].len())
                .max()
                .unwrap_or(0)
                .max(h.len())
        })
        .collect();
    let _ = write!(out, "{:name_w$}", "");
    for (h, w) in headers.iter().zip(&widths) {
        let _ = write!(out, " {h:>w$}");
    }
    out.push('\n');
    for (name, row) in row_names.iter().zip(rows) {
        let _ = write!(out, "{name:<name_w$}");
        for (v, w) in row.iter().zip(&widths) {
            let _ = write!(out, " {v:>w$}");
        }
        out.push('\n');
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:.7}")
}

/// Console report: per-chain means, sds and acceptance rates, then the pooled block.
pub fn render_summary(model: &str, s: &PosteriorSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, " MCMC results for Model: {model}\n");
    let headers = coef_headers(&s.labels);
    let chain_names: Vec<String> = (1..=s.chains.len()).map(|h| format!("Chain {h}")).collect();
    let _ = writeln!(out, " Posterior mean:");
    let rows: Vec<Vec<String>> = s
        .chains
        .iter()
        .map(|c| c.mean.iter().map(|v| fmt_num(*v)).collect())
        .collect();
    table(&mut out, &chain_names, &headers, &rows);
    let _ = writeln!(out, "\n Posterior sd:");
    let rows: Vec<Vec<String>> = s
        .chains
        .iter()
        .map(|c| c.sd.iter().map(|v| fmt_num(*v)).collect())
        .collect();
    table(&mut out, &chain_names, &headers, &rows);
    out.push('\n');
    let rows: Vec<Vec<String>> = s
        .chains
        .iter()
        .map(|c| vec![format!("{:.3}", c.acceptance_rate)])
        .collect();
    table(&mut out, &chain_names, &["Acceptance rate:".into()], &rows);
    let _ = writeln!(out, "\n\n Overall posterior density estimate:");
    let rows = vec![
        s.mean.iter().map(|v| fmt_num(*v)).collect(),
        s.sd.iter().map(|v| fmt_num(*v)).collect(),
    ];
    table(
        &mut out,
        &["Post. mean".into(), "Post. sd".into()],
        &headers,
        &rows,
    );
    let _ = writeln!(out, "\n Overall acceptance rate: {}", s.acceptance_rate);
    out
}

/// Console report of a model-selection run, best model first.
pub fn render_selection(r: &SelectionResult) -> String {
    let mut out = String::new();
    let best = r.best_model();
    let mut order: Vec<usize> = (0..r.models.len()).collect();
    order.sort_by_key(|&m| (m != best, m));
    let _ = writeln!(out, " BEST MODEL\n ----------");
    for &m in &order {
        let _ = writeln!(out, "Model {}: y ~ {}", m + 1, r.models[m]);
        if r.visit_counts[m] == 0 {
            let _ = writeln!(out, "\n Not visited by the chain.\n");
            continue;
        }
        let d = r.models[m].dim();
        let (mean, sd, _) = moments(
            &r.theta_traces[m]
                .iter()
                .map(Vec::as_slice)
                .collect::<Vec<_>>(),
            d,
        );
        let _ = writeln!(out, "\n Posterior parameter estimate:");
        let names = coef_headers(&r.models[m].labels());
        let rows: Vec<Vec<String>> = (0..d)
            .map(|k| vec![fmt_num(mean[k]), fmt_num(sd[k])])
            .collect();
        table(
            &mut out,
            &names,
            &["Post. mean:".into(), "Post. sd:".into()],
            &rows,
        );
        match r.within_accept(m) {
            Some(a) => {
                let _ = writeln!(out, "\n Within-model acceptance rate: {a:.2}\n");
            }
            None => {
                let _ = writeln!(out, "\n Within-model acceptance rate: none proposed\n");
            }
        }
    }
    for &m in &order {
        if m != best {
            let _ = writeln!(
                out,
                "BF_{}{} = {}",
                best + 1,
                m + 1,
                bayes_factor(r, best, m)
            );
        }
    }
    match r.between_accept() {
        Some(a) => {
            let _ = writeln!(out, "\nBetween-model acceptance rate: {a:.2}");
        }
        None => {
            let _ = writeln!(out, "\nBetween-model acceptance rate: none proposed");
        }
    }
    out
}
