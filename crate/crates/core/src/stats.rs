//! Sufficient statistics, per-dyad change statistics, and the distributional
//! summaries used for goodness of fit.
//!
//! A [`ModelSpec`] is a plain ordered term list. It is resolved against a
//! concrete network size, direction and attribute set by [`Model::bind`],
//! which precomputes attribute masks and geometric weight tables so that the
//! change-statistic loop does no allocation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributeSet, Graph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelTerm {
    Edges,
    Mutual,
    /// Cyclic triples, optionally restricted to triples whose three nodes
    /// share a level of the named attribute.
    Ctriple {
        attribute: Option<String>,
    },
    /// Geometrically weighted edgewise shared partners with fixed decay.
    Gwesp {
        decay: f64,
    },
    /// Geometrically weighted degree with fixed decay.
    Gwdegree {
        decay: f64,
    },
}

impl ModelTerm {
    /// Coefficient label used in reports, e.g. `ctriple.job` or `gwesp.fixed.0.2`.
    pub fn label(&self) -> String {
        match self {
            ModelTerm::Edges => "edges".into(),
            ModelTerm::Mutual => "mutual".into(),
            ModelTerm::Ctriple { attribute: None } => "ctriple".into(),
            ModelTerm::Ctriple { attribute: Some(a) } => format!("ctriple.{a}"),
            ModelTerm::Gwesp { decay } => format!("gwesp.fixed.{decay}"),
            ModelTerm::Gwdegree { decay } => format!("gwdeg.fixed.{decay}"),
        }
    }

    fn requires_directed(&self) -> Option<bool> {
        match self {
            ModelTerm::Edges => None,
            ModelTerm::Mutual | ModelTerm::Ctriple { .. } => Some(true),
            ModelTerm::Gwesp { .. } | ModelTerm::Gwdegree { .. } => Some(false),
        }
    }
}

impl fmt::Display for ModelTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelTerm::Edges => write!(f, "edges"),
            ModelTerm::Mutual => write!(f, "mutual"),
            ModelTerm::Ctriple { attribute: None } => write!(f, "ctriple"),
            ModelTerm::Ctriple { attribute: Some(a) } => write!(f, "ctriple(\"{a}\")"),
            ModelTerm::Gwesp { decay } => write!(f, "gwesp({decay:?}, fixed=TRUE)"),
            ModelTerm::Gwdegree { decay } => write!(f, "gwdegree({decay:?}, fixed=TRUE)"),
        }
    }
}

/// Ordered list of model terms; the dimension is the number of terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    terms: Vec<ModelTerm>,
}

impl ModelSpec {
    pub fn new(terms: Vec<ModelTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidModel("model has no terms".into()));
        }
        for (k, t) in terms.iter().enumerate() {
            if terms[..k].contains(t) {
                return Err(Error::InvalidModel(format!("duplicate term `{t}`")));
            }
            if let ModelTerm::Gwesp { decay } | ModelTerm::Gwdegree { decay } = t {
                if !(decay.is_finite() && *decay >= 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "decay must be finite and non-negative, got {decay}"
                    )));
                }
            }
        }
        Ok(ModelSpec { terms })
    }

    pub fn terms(&self) -> &[ModelTerm] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(ModelTerm::label).collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum BoundTerm {
    Edges,
    Mutual,
    Ctriple {
        // per-node level and per-level node bitsets; None = unrestricted
        levels: Option<(Vec<u32>, Vec<Vec<u64>>)>,
    },
    Gwesp(Geometric),
    Gwdegree(Geometric),
}

/// Weight tables for the geometrically weighted terms:
/// `value[k] = e^φ (1 - (1 - e^-φ)^k)` and `step[k] = value[k+1] - value[k] = (1 - e^-φ)^k`.
#[derive(Clone, Debug)]
struct Geometric {
    value: Vec<f64>,
    step: Vec<f64>,
}

impl Geometric {
    fn new(decay: f64, n: usize) -> Self {
        let ratio = 1.0 - (-decay).exp();
        let scale = decay.exp();
        let value = (0..=n)
            .map(|k| scale * (1.0 - ratio.powi(k as i32)))
            .collect();
        let step = (0..=n).map(|k| ratio.powi(k as i32)).collect();
        Geometric { value, step }
    }
}

/// A [`ModelSpec`] resolved against a network size, direction and attributes.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    terms: Vec<BoundTerm>,
    n: usize,
    directed: bool,
}

impl Model {
    pub fn bind(spec: &ModelSpec, n: usize, directed: bool, attrs: &AttributeSet) -> Result<Self> {
        let words = n.div_ceil(64).max(1);
        let mut terms = Vec::with_capacity(spec.dim());
        for t in spec.terms() {
            if let Some(req) = t.requires_directed() {
                if req != directed {
                    return Err(Error::Direction {
                        term: t.to_string(),
                        required: if req { "directed" } else { "undirected" },
                    });
                }
            }
            terms.push(match t {
                ModelTerm::Edges => BoundTerm::Edges,
                ModelTerm::Mutual => BoundTerm::Mutual,
                ModelTerm::Ctriple { attribute } => {
                    let levels = match attribute {
                        None => None,
                        Some(name) => {
                            let a = attrs
                                .get(name)
                                .ok_or_else(|| Error::UnknownAttribute(name.clone()))?;
                            if a.len() != n {
                                return Err(Error::InvalidModel(format!(
                                    "attribute `{name}` has {} values for {n} nodes",
                                    a.len()
                                )));
                            }
                            let mut masks = vec![vec![0u64; words]; a.level_count()];
                            for (i, &v) in a.values.iter().enumerate() {
                                masks[v as usize][i >> 6] |= 1 << (i & 63);
                            }
                            Some((a.values.clone(), masks))
                        }
                    };
                    BoundTerm::Ctriple { levels }
                }
                ModelTerm::Gwesp { decay } => BoundTerm::Gwesp(Geometric::new(*decay, n)),
                ModelTerm::Gwdegree { decay } => BoundTerm::Gwdegree(Geometric::new(*decay, n)),
            });
        }
        Ok(Model {
            spec: spec.clone(),
            terms,
            n,
            directed,
        })
    }

    pub fn for_graph(spec: &ModelSpec, g: &Graph, attrs: &AttributeSet) -> Result<Self> {
        Self::bind(spec, g.n(), g.is_directed(), attrs)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.n() != self.n || g.is_directed() != self.directed {
            return Err(Error::InvalidModel(format!(
                "model bound to n={} directed={} but graph has n={} directed={}",
                self.n,
                self.directed,
                g.n(),
                g.is_directed()
            )));
        }
        Ok(())
    }

    /// Full statistic vector s(y).
    pub fn stats(&self, g: &Graph) -> Result<Vec<f64>> {
        self.check_graph(g)?;
        let mut out = vec![0.0; self.dim()];
        self.stats_into(g, &mut out);
        Ok(out)
    }

    pub(crate) fn stats_into(&self, g: &Graph, out: &mut [f64]) {
        for (slot, term) in out.iter_mut().zip(&self.terms) {
            *slot = match term {
                BoundTerm::Edges => g.edge_count() as f64,
                BoundTerm::Mutual => g
                    .edges()
                    .filter(|&(i, j)| i < j && g.has_edge(j, i))
                    .count() as f64,
                BoundTerm::Ctriple { levels } => {
                    let mut closed = 0u64;
                    for (i, j) in g.edges() {
                        closed += ctriple_closing(g, levels, i, j) as u64;
                    }
                    (closed / 3) as f64
                }
                BoundTerm::Gwesp(w) => g
                    .edges()
                    .map(|(i, j)| w.value[g.common_neighbors(i, j) as usize])
                    .sum(),
                BoundTerm::Gwdegree(w) => (0..g.n()).map(|i| w.value[g.degree(i)]).sum(),
            };
        }
    }

    /// Writes s(y with (i,j) toggled) - s(y) into `out`. The caller guarantees
    /// `i != j`, both in range, and that `g` matches this model.
    pub(crate) fn change_into(&self, g: &Graph, i: usize, j: usize, out: &mut [f64]) {
        let adding = !g.has_edge(i, j);
        let sign = if adding { 1.0 } else { -1.0 };
        for (slot, term) in out.iter_mut().zip(&self.terms) {
            *slot = match term {
                BoundTerm::Edges => sign,
                BoundTerm::Mutual => {
                    if g.has_edge(j, i) {
                        sign
                    } else {
                        0.0
                    }
                }
                BoundTerm::Ctriple { levels } => sign * ctriple_closing(g, levels, i, j) as f64,
                BoundTerm::Gwesp(w) => {
                    let sp_ij = g.common_neighbors(i, j) as usize;
                    let mut delta = 0.0;
                    let (ri, rj) = (g.out_row(i), g.out_row(j));
                    for (word, (a, b)) in ri.iter().zip(rj).enumerate() {
                        let mut bits = a & b;
                        while bits != 0 {
                            let k = word * 64 + bits.trailing_zeros() as usize;
                            bits &= bits - 1;
                            let sp_ik = g.common_neighbors(i, k) as usize;
                            let sp_jk = g.common_neighbors(j, k) as usize;
                            delta += if adding {
                                w.step[sp_ik] + w.step[sp_jk]
                            } else {
                                -(w.step[sp_ik - 1] + w.step[sp_jk - 1])
                            };
                        }
                    }
                    sign * w.value[sp_ij] + delta
                }
                BoundTerm::Gwdegree(w) => {
                    let (di, dj) = (g.degree(i), g.degree(j));
                    if adding {
                        w.step[di] + w.step[dj]
                    } else {
                        -(w.step[di - 1] + w.step[dj - 1])
                    }
                }
            };
        }
    }

    /// Change statistic for toggling dyad (i, j).
    pub fn change(&self, g: &Graph, i: usize, j: usize) -> Result<Vec<f64>> {
        self.check_graph(g)?;
        g.check_dyad(i, j)?;
        let mut out = vec![0.0; self.dim()];
        self.change_into(g, i, j, &mut out);
        Ok(out)
    }
}

/// Number of nodes k (same level as i and j when restricted) with j→k→i,
/// i.e. the cyclic triples closed by the edge i→j.
#[inline]
fn ctriple_closing(
    g: &Graph,
    levels: &Option<(Vec<u32>, Vec<Vec<u64>>)>,
    i: usize,
    j: usize,
) -> u32 {
    let (out_j, in_i) = (g.out_row(j), g.in_row(i));
    match levels {
        None => out_j
            .iter()
            .zip(in_i)
            .map(|(a, b)| (a & b).count_ones())
            .sum(),
        Some((values, masks)) => {
            if values[i] != values[j] {
                return 0;
            }
            let mask = &masks[values[i] as usize];
            out_j
                .iter()
                .zip(in_i)
                .zip(mask)
                .map(|((a, b), m)| (a & b & m).count_ones())
                .sum()
        }
    }
}

pub fn stat_vector(g: &Graph, attrs: &AttributeSet, spec: &ModelSpec) -> Result<Vec<f64>> {
    Model::for_graph(spec, g, attrs)?.stats(g)
}

pub fn change_stats(
    g: &Graph,
    attrs: &AttributeSet,
    spec: &ModelSpec,
    i: usize,
    j: usize,
) -> Result<Vec<f64>> {
    Model::for_graph(spec, g, attrs)?.change(g, i, j)
}

/// Distributional summaries of a network. All counts cover the full range;
/// display truncation happens at report time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofStats {
    pub directed: bool,
    /// Undirected only: `degree[k]` = nodes of degree k, k = 0..n-1.
    pub degree: Option<Vec<u64>>,
    /// Directed only.
    pub in_degree: Option<Vec<u64>>,
    pub out_degree: Option<Vec<u64>>,
    /// `distance[k]` = (ordered when directed) pairs at geodesic distance k;
    /// index 0 is always 0.
    pub distance: Vec<u64>,
    pub unreachable: u64,
    /// `esp[k]` = edges with exactly k shared partners.
    pub esp: Vec<u64>,
}

impl GofStats {
    pub fn total_pairs(&self) -> u64 {
        self.distance.iter().sum::<u64>() + self.unreachable
    }
}

/// Degree, geodesic-distance and edgewise-shared-partner distributions.
///
/// For directed graphs shared partners are outgoing two-paths: for an edge
/// i→j, the number of k with i→k→j.
pub fn gof_stats(g: &Graph) -> GofStats {
    let n = g.n();
    let hist = |vals: &mut dyn Iterator<Item = usize>, len: usize| {
        let mut h = vec![0u64; len.max(1)];
        for v in vals {
            h[v] += 1;
        }
        h
    };
    let (degree, in_degree, out_degree) = if g.is_directed() {
        (
            None,
            Some(hist(&mut (0..n).map(|i| g.in_degree(i)), n)),
            Some(hist(&mut (0..n).map(|i| g.out_degree(i)), n)),
        )
    } else {
        (None::<Vec<u64>>, None, None)
    };
    let degree = if g.is_directed() {
        degree
    } else {
        Some(hist(&mut (0..n).map(|i| g.degree(i)), n))
    };

    let mut distance = vec![0u64; n.max(1)];
    let mut unreachable = 0u64;
    let words = g.words_per_row();
    let mut visited = vec![0u64; words];
    let mut frontier = vec![0u64; words];
    let mut next = vec![0u64; words];
    for src in 0..n {
        visited.iter_mut().for_each(|w| *w = 0);
        frontier.iter_mut().for_each(|w| *w = 0);
        visited[src >> 6] |= 1 << (src & 63);
        frontier[src >> 6] |= 1 << (src & 63);
        let mut reached = 1usize;
        let mut d = 0usize;
        loop {
            next.iter_mut().for_each(|w| *w = 0);
            for (wi, &fw) in frontier.iter().enumerate() {
                let mut bits = fw;
                while bits != 0 {
                    let u = wi * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for (nw, rw) in next.iter_mut().zip(g.out_row(u)) {
                        *nw |= rw;
                    }
                }
            }
            let mut found = 0usize;
            for (nw, vw) in next.iter_mut().zip(visited.iter_mut()) {
                *nw &= !*vw;
                *vw |= *nw;
                found += nw.count_ones() as usize;
            }
            if found == 0 {
                break;
            }
            d += 1;
            reached += found;
            distance[d] += found as u64;
            std::mem::swap(&mut frontier, &mut next);
        }
        unreachable += (n - reached) as u64;
    }
    if !g.is_directed() {
        for v in distance.iter_mut() {
            *v /= 2;
        }
        unreachable /= 2;
    }

    let mut esp = vec![0u64; n.saturating_sub(1).max(1)];
    for (i, j) in g.edges() {
        let sp = if g.is_directed() {
            g.out_row(i)
                .iter()
                .zip(g.in_row(j))
                .map(|(a, b)| (a & b).count_ones())
                .sum::<u32>()
        } else {
            g.common_neighbors(i, j)
        };
        esp[sp as usize] += 1;
    }

    GofStats {
        directed: g.is_directed(),
        degree,
        in_degree,
        out_degree,
        distance,
        unreachable,
        esp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeAttribute;

    fn spec(terms: Vec<ModelTerm>) -> ModelSpec {
        ModelSpec::new(terms).unwrap()
    }

    fn job(vals: &[&str]) -> AttributeSet {
        AttributeSet::new().with(NodeAttribute::from_labels("job", vals))
    }

    #[test]
    fn empty_graph_zero_vector() {
        let g = Graph::empty(6, true);
        let s = spec(vec![
            ModelTerm::Edges,
            ModelTerm::Mutual,
            ModelTerm::Ctriple { attribute: None },
        ]);
        assert_eq!(
            stat_vector(&g, &AttributeSet::new(), &s).unwrap(),
            vec![0.0; 3]
        );
        let g = Graph::empty(6, false);
        let s = spec(vec![
            ModelTerm::Edges,
            ModelTerm::Gwesp { decay: 0.2 },
            ModelTerm::Gwdegree { decay: 0.8 },
        ]);
        assert_eq!(
            stat_vector(&g, &AttributeSet::new(), &s).unwrap(),
            vec![0.0; 3]
        );
    }

    #[test]
    fn edges_and_mutual() {
        let g = Graph::from_edges(3, true, &[(0, 1), (1, 0), (1, 2)]).unwrap();
        let s = spec(vec![ModelTerm::Edges, ModelTerm::Mutual]);
        assert_eq!(
            stat_vector(&g, &AttributeSet::new(), &s).unwrap(),
            vec![3.0, 1.0]
        );
    }

    #[test]
    fn cyclic_triple_by_attribute() {
        let g = Graph::from_edges(3, true, &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let s = spec(vec![ModelTerm::Ctriple {
            attribute: Some("job".into()),
        }]);
        assert_eq!(
            stat_vector(&g, &job(&["a", "a", "a"]), &s).unwrap(),
            vec![1.0]
        );
        assert_eq!(
            stat_vector(&g, &job(&["a", "b", "a"]), &s).unwrap(),
            vec![0.0]
        );
        // a transitive triple is not cyclic
        let t = Graph::from_edges(3, true, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(
            stat_vector(&t, &job(&["a", "a", "a"]), &s).unwrap(),
            vec![0.0]
        );
    }

    #[test]
    fn gwesp_triangle() {
        let g = Graph::from_edges(3, false, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let s = spec(vec![ModelTerm::Gwesp { decay: 0.2 }]);
        let v = stat_vector(&g, &AttributeSet::new(), &s).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gwdegree_star() {
        let g = Graph::from_edges(4, false, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let s = spec(vec![ModelTerm::Gwdegree { decay: 0.8 }]);
        let v = stat_vector(&g, &AttributeSet::new(), &s).unwrap();
        // D_1 = 3, D_3 = 1
        let phi: f64 = 0.8;
        let f = |k: i32| phi.exp() * (1.0 - (1.0 - (-phi).exp()).powi(k));
        assert!((v[0] - (3.0 * f(1) + f(3))).abs() < 1e-12);
        assert!((v[0] - 4.8540).abs() < 1e-4);
    }

    #[test]
    fn change_examples() {
        let none = AttributeSet::new();
        let g = Graph::empty(3, false);
        assert_eq!(
            change_stats(&g, &none, &spec(vec![ModelTerm::Edges]), 0, 1).unwrap(),
            vec![1.0]
        );
        let path = Graph::from_edges(3, false, &[(0, 1), (1, 2)]).unwrap();
        let d = change_stats(
            &path,
            &none,
            &spec(vec![ModelTerm::Gwesp { decay: 0.2 }]),
            0,
            2,
        )
        .unwrap();
        assert!((d[0] - 3.0).abs() < 1e-12);
        let g = Graph::from_edges(2, true, &[(1, 0)]).unwrap();
        assert_eq!(
            change_stats(&g, &none, &spec(vec![ModelTerm::Mutual]), 0, 1).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn direction_and_attribute_errors() {
        let none = AttributeSet::new();
        let u = Graph::empty(3, false);
        assert!(matches!(
            stat_vector(&u, &none, &spec(vec![ModelTerm::Mutual])),
            Err(Error::Direction { .. })
        ));
        let d = Graph::empty(3, true);
        assert!(matches!(
            stat_vector(&d, &none, &spec(vec![ModelTerm::Gwesp { decay: 0.2 }])),
            Err(Error::Direction { .. })
        ));
        assert!(matches!(
            stat_vector(
                &d,
                &none,
                &spec(vec![ModelTerm::Ctriple {
                    attribute: Some("job".into())
                }])
            ),
            Err(Error::UnknownAttribute(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(vec![]).is_err());
        assert!(ModelSpec::new(vec![ModelTerm::Edges, ModelTerm::Edges]).is_err());
        assert!(ModelSpec::new(vec![ModelTerm::Gwesp { decay: -1.0 }]).is_err());
        assert!(ModelSpec::new(vec![
            ModelTerm::Gwesp { decay: 0.2 },
            ModelTerm::Gwesp { decay: 0.3 }
        ])
        .is_ok());
    }

    #[test]
    fn gof_triangle_path_empty() {
        let tri = gof_stats(&Graph::from_edges(3, false, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        assert_eq!(tri.degree.as_deref(), Some(&[0, 0, 3][..]));
        assert_eq!(tri.distance, vec![0, 3, 0]);
        assert_eq!(tri.unreachable, 0);
        assert_eq!(tri.esp, vec![0, 3]);

        let path = gof_stats(&Graph::from_edges(3, false, &[(0, 1), (1, 2)]).unwrap());
        assert_eq!(path.distance, vec![0, 2, 1]);
        assert_eq!(path.esp, vec![2, 0]);

        let empty = gof_stats(&Graph::empty(4, false));
        assert_eq!(empty.degree.as_deref(), Some(&[4, 0, 0, 0][..]));
        assert_eq!(empty.unreachable, 6);
        assert_eq!(empty.distance.iter().sum::<u64>(), 0);
    }

    #[test]
    fn gof_directed_families() {
        let g = Graph::from_edges(3, true, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let s = gof_stats(&g);
        assert!(s.degree.is_none());
        assert_eq!(s.out_degree.as_deref(), Some(&[1, 1, 1][..]));
        assert_eq!(s.in_degree.as_deref(), Some(&[1, 1, 1][..]));
        // 0->1, 1->2, 0->2 at distance 1; nothing else reachable
        assert_eq!(s.distance, vec![0, 3, 0]);
        assert_eq!(s.unreachable, 3);
        // only 0->2 has a two-path partner (via 1)
        assert_eq!(s.esp, vec![2, 1]);
    }
}
