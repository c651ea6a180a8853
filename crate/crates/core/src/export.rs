//! Output files: JSON summaries, CSV traces and tables, SVG figures.
//!
//! Layout under an output directory:
//! `summary.json`, `trace.csv`, `acf.csv`, `figures/*.svg`, `gof/*.csv`,
//! `selection.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autorj::{bayes_factor, ModelFit, SelectionResult};
use crate::error::{Error, Result};
use crate::exchange::Trace;
use crate::gof::{GofFamily, GofReport};

pub const DENSITY_BINS: usize = 50;

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path.as_ref(), e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    ensure_parent(path)?;
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// `chain,iteration,<label>...` with 1-based chain and iteration numbers.
/// Values use the shortest representation that parses back to the same f64.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &Trace) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(trace.labels.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for h in 0..trace.nchains() {
        for (t, x) in trace.chain_draws(h).enumerate() {
            let mut rec = vec![(h + 1).to_string(), (t + 1).to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() < 3 || &header[0] != "chain" || &header[1] != "iteration" {
        return Err(Error::parse(
            path,
            "expected header `chain,iteration,<coefficient>...`",
        ));
    }
    let labels: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let d = labels.len();
    let mut chains: Vec<Vec<Vec<f64>>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = line + 2;
        if rec.len() != d + 2 {
            return Err(Error::parse(
                path,
                format!("line {row}: expected {} fields, found {}", d + 2, rec.len()),
            ));
        }
        let chain: usize = rec[0].parse().ok().filter(|&c| c >= 1).ok_or_else(|| {
            Error::parse(path, format!("line {row}: bad chain number `{}`", &rec[0]))
        })?;
        let x = rec
            .iter()
            .skip(2)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, format!("line {row}: bad number `{v}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if chain > chains.len() {
            chains.resize(chain, Vec::new());
        }
        chains[chain - 1].push(x);
    }
    Trace::from_draws(labels, chains)
}

/// `lag,<label>...`
pub fn write_acf_csv(path: impl AsRef<Path>, labels: &[String], acf: &[Vec<f64>]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["lag".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let lags = acf.first().map_or(0, Vec::len);
    for l in 0..lags {
        let mut rec = vec![l.to_string()];
        rec.extend(acf.iter().map(|a| a[l].to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One `<family>.csv` per family with `bin,observed,q05,q25,q50,q75,q95`.
pub fn write_gof_csvs(dir: impl AsRef<Path>, report: &GofReport) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    for f in &report.families {
        let path = dir.join(format!("{}.csv", f.name));
        let mut w = csv_writer(&path)?;
        w.write_record(["bin", "observed", "q05", "q25", "q50", "q75", "q95"])
            .map_err(|e| csv_err(&path, e))?;
        for (b, label) in f.bins.iter().enumerate() {
            let mut rec = vec![label.clone(), f.observed[b].to_string()];
            rec.extend(f.quantiles[b].iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: usize,
    pub formula: String,
    pub visits: usize,
    pub probability: f64,
    pub within_accept: Option<f64>,
    pub conditional_mean: Option<Vec<f64>>,
    pub conditional_sd: Option<Vec<f64>>,
    pub fit: ModelFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesFactorReport {
    pub numerator: usize,
    pub denominator: usize,
    /// `None` when the denominator model was never visited.
    pub value: Option<f64>,
    pub display: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub iters: usize,
    pub best_model: usize,
    pub between_accept: Option<f64>,
    pub models: Vec<ModelReport>,
    pub bayes_factors: Vec<BayesFactorReport>,
}

/// Serializable digest of a selection run. Model numbers are 1-based.
pub fn selection_report(r: &SelectionResult) -> SelectionReport {
    let probs = r.model_probabilities();
    let models = (0..r.models.len())
        .map(|m| {
            let d = r.models[m].dim();
            let (mean, sd) = if r.theta_traces[m].is_empty() {
                (None, None)
            } else {
                let rows: Vec<&[f64]> = r.theta_traces[m].iter().map(Vec::as_slice).collect();
                let (mean, sd, _) = crate::diagnostics::moments(&rows, d);
                (Some(mean), Some(sd))
            };
            ModelReport {
                model: m + 1,
                formula: format!("y ~ {}", r.models[m]),
                visits: r.visit_counts[m],
                probability: probs[m],
                within_accept: r.within_accept(m),
                conditional_mean: mean,
                conditional_sd: sd,
                fit: r.fits[m].clone(),
            }
        })
        .collect();
    let best = r.best_model();
    let bayes_factors = (0..r.models.len())
        .filter(|&m| m != best)
        .map(|m| {
            let bf = bayes_factor(r, best, m);
            BayesFactorReport {
                numerator: best + 1,
                denominator: m + 1,
                value: bf.value(),
                display: bf.to_string(),
            }
        })
        .collect();
    SelectionReport {
        iters: r.iters(),
        best_model: best + 1,
        between_accept: r.between_accept(),
        models,
        bayes_factors,
    }
}

/// `(model number, posterior probability)` rows for the probability bar chart.
pub fn model_probability_rows(r: &SelectionResult) -> Vec<(usize, f64)> {
    r.model_probabilities()
        .into_iter()
        .enumerate()
        .map(|(m, p)| (m + 1, p))
        .collect()
}

pub mod svg {
    //! Minimal SVG figure builders.

    use std::fmt::Write as _;

    use super::{GofFamily, DENSITY_BINS};

    const PANEL_W: f64 = 260.0;
    const PANEL_H: f64 = 180.0;
    const MARGIN: f64 = 36.0;

    fn escape(s: &str) -> String {
        s.replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
    }

    /// Axis-aligned panel mapping data coordinates into a pixel box.
    struct Panel {
        x0: f64,
        y0: f64,
        w: f64,
        h: f64,
        xr: (f64, f64),
        yr: (f64, f64),
    }

    impl Panel {
        fn new(x0: f64, y0: f64, xr: (f64, f64), yr: (f64, f64)) -> Self {
            let pad = |r: (f64, f64)| {
                if r.1 > r.0 {
                    r
                } else {
                    (r.0 - 0.5, r.0 + 0.5)
                }
            };
            Panel {
                x0: x0 + MARGIN,
                y0: y0 + 20.0,
                w: PANEL_W - MARGIN - 10.0,
                h: PANEL_H - 50.0,
                xr: pad(xr),
                yr: pad(yr),
            }
        }

        fn px(&self, x: f64) -> f64 {
            self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
        }

        fn py(&self, y: f64) -> f64 {
            self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
        }

        fn frame(&self, out: &mut String, title: &str) {
            let _ = writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
                self.x0, self.y0, self.w, self.h
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                self.x0 + self.w / 2.0,
                self.y0 - 6.0,
                escape(title)
            );
            for (v, anchor_y) in [
                (self.yr.0, self.py(self.yr.0)),
                (self.yr.1, self.py(self.yr.1)),
            ] {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" font-size="9" text-anchor="end">{}</text>"#,
                    self.x0 - 3.0,
                    anchor_y + 3.0,
                    short(v)
                );
            }
            for (v, anchor_x) in [
                (self.xr.0, self.px(self.xr.0)),
                (self.xr.1, self.px(self.xr.1)),
            ] {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" font-size="9" text-anchor="middle">{}</text>"#,
                    anchor_x,
                    self.y0 + self.h + 12.0,
                    short(v)
                );
            }
        }
    }

    fn short(v: f64) -> String {
        if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
            format!("{v:.2e}")
        } else {
            format!("{v:.2}")
        }
    }

    fn document(width: f64, height: f64, body: &str) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
        )
    }

    fn range(xs: impl Iterator<Item = f64>) -> (f64, f64) {
        xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    }

    fn polyline(out: &mut String, p: &Panel, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
        let mut s = String::new();
        for (x, y) in pts {
            let _ = write!(s, "{:.2},{:.2} ", p.px(x), p.py(y));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            s.trim_end()
        );
    }

    /// Density estimate by a fixed 50-bin histogram, normalized to unit area.
    pub fn histogram_density(xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = range(xs.iter().copied());
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        let width = (hi - lo) / DENSITY_BINS as f64;
        let mut counts = vec![0.0; DENSITY_BINS];
        for &x in xs {
            let b = (((x - lo) / width) as usize).min(DENSITY_BINS - 1);
            counts[b] += 1.0;
        }
        let n = xs.len() as f64;
        let edges = (0..=DENSITY_BINS).map(|b| lo + width * b as f64).collect();
        let dens = counts.into_iter().map(|c| c / (n * width)).collect();
        (edges, dens)
    }

    /// One row per coordinate: density, trace, ACF bars.
    pub fn diagnostics(labels: &[String], series: &[Vec<f64>], acf: &[Vec<f64>]) -> String {
        let mut body = String::new();
        for (k, label) in labels.iter().enumerate() {
            let top = k as f64 * PANEL_H;
            let xs = &series[k];

            let (edges, dens) = histogram_density(xs);
            let p = Panel::new(
                0.0,
                top,
                (edges[0], edges[DENSITY_BINS]),
                (0.0, dens.iter().copied().fold(0.0, f64::max)),
            );
            p.frame(&mut body, &format!("{label}: density"));
            for (b, d) in dens.iter().enumerate() {
                let (xa, xb) = (p.px(edges[b]), p.px(edges[b + 1]));
                let _ = writeln!(
                    body,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ab" stroke="none"/>"##,
                    xa,
                    p.py(*d),
                    (xb - xa).max(0.0),
                    (p.py(0.0) - p.py(*d)).max(0.0)
                );
            }

            let p = Panel::new(
                PANEL_W,
                top,
                (1.0, xs.len().max(2) as f64),
                range(xs.iter().copied()),
            );
            p.frame(&mut body, &format!("{label}: trace"));
            polyline(
                &mut body,
                &p,
                xs.iter().enumerate().map(|(t, v)| ((t + 1) as f64, *v)),
                "#235",
            );

            let a = &acf[k];
            let p = Panel::new(
                2.0 * PANEL_W,
                top,
                (0.0, a.len().saturating_sub(1).max(1) as f64),
                (a.iter().copied().fold(0.0, f64::min).min(-0.1), 1.0),
            );
            p.frame(&mut body, &format!("{label}: autocorrelation"));
            for (l, v) in a.iter().enumerate() {
                let x = p.px(l as f64);
                let _ = writeln!(
                    body,
                    r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#235"/>"##,
                    p.py(0.0),
                    p.py(*v)
                );
            }
        }
        document(3.0 * PANEL_W, labels.len() as f64 * PANEL_H, &body)
    }

    /// Boxplots (5/25/50/75/95%) per bin with the observed values as a red line.
    pub fn gof_boxplots(families: &[GofFamily]) -> String {
        let mut body = String::new();
        for (i, f) in families.iter().enumerate() {
            let left = i as f64 * PANEL_W;
            let nb = f.bins.len();
            let hi = f
                .quantiles
                .iter()
                .map(|q| q[4])
                .chain(f.observed.iter().copied())
                .fold(0.0, f64::max);
            let p = Panel::new(left, 0.0, (0.0, nb as f64), (0.0, hi));
            p.frame(&mut body, &f.name);
            let bw = p.w / nb.max(1) as f64 * 0.6;
            for (b, q) in f.quantiles.iter().enumerate() {
                let cx = p.px(b as f64 + 0.5);
                let _ = writeln!(
                    body,
                    r##"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#555"/>"##,
                    p.py(q[0]),
                    p.py(q[4])
                );
                let _ = writeln!(
                    body,
                    r##"<rect x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="#dde" stroke="#555"/>"##,
                    cx - bw / 2.0,
                    p.py(q[3]),
                    (p.py(q[1]) - p.py(q[3])).max(0.0)
                );
                let _ = writeln!(
                    body,
                    r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#222"/>"##,
                    cx - bw / 2.0,
                    p.py(q[2]),
                    cx + bw / 2.0,
                    p.py(q[2])
                );
            }
            polyline(
                &mut body,
                &p,
                f.observed
                    .iter()
                    .enumerate()
                    .map(|(b, v)| (b as f64 + 0.5, *v)),
                "#c00",
            );
        }
        document(families.len().max(1) as f64 * PANEL_W, PANEL_H, &body)
    }

    /// Bar chart of posterior model probabilities.
    pub fn model_probabilities(rows: &[(usize, f64)]) -> String {
        let mut body = String::new();
        let p = Panel::new(0.0, 0.0, (0.0, rows.len().max(1) as f64), (0.0, 1.0));
        p.frame(&mut body, "posterior model probabilities");
        let bw = p.w / rows.len().max(1) as f64 * 0.6;
        for (i, (m, prob)) in rows.iter().enumerate() {
            let cx = p.px(i as f64 + 0.5);
            let _ = writeln!(
                body,
                r##"<rect x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="#579" stroke="none"/>"##,
                cx - bw / 2.0,
                p.py(*prob),
                p.py(0.0) - p.py(*prob)
            );
            let _ = writeln!(
                body,
                r#"<text x="{cx:.2}" y="{:.2}" font-size="9" text-anchor="middle">Model {m}</text>"#,
                p.py(0.0) + 22.0
            );
        }
        document(PANEL_W, PANEL_H, &body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let t = Trace::from_draws(
            vec!["edges".into(), "gwesp.fixed.0.2".into()],
            vec![
                vec![vec![0.1, -3.257_462_5], vec![1e-300, f64::MAX]],
                vec![vec![-0.0, 2.0 / 3.0], vec![std::f64::consts::PI, -1e17]],
            ],
        )
        .unwrap();
        write_trace_csv(&path, &t).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back.labels, t.labels);
        assert_eq!(back.chains.len(), 2);
        for h in 0..2 {
            for (a, b) in back.chain_draws(h).zip(t.chain_draws(h)) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn bad_trace_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "chain,iteration,a\n1,1,x\n").unwrap();
        let err = read_trace_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        fs::write(&path, "a,b,c\n").unwrap();
        assert!(read_trace_csv(&path).is_err());
        assert!(matches!(
            read_trace_csv(dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn histogram_density_has_unit_area() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let (edges, dens) = svg::histogram_density(&xs);
        assert_eq!(dens.len(), DENSITY_BINS);
        let area: f64 = dens
            .iter()
            .enumerate()
            .map(|(b, d)| d * (edges[b + 1] - edges[b]))
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
        let (_, dens) = svg::histogram_density(&[2.0; 10]);
        assert!(dens.iter().all(|d| d.is_finite()));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = svg::diagnostics(&["a".into()], &[vec![1.0, 2.0, 1.5]], &[vec![1.0, 0.2]]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        let s = svg::model_probabilities(&[(1, 0.93), (2, 0.0), (3, 0.07)]);
        assert_eq!(s.matches("Model ").count(), 3);
    }
}
