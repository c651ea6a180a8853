use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use ergm_bayes::export::{read_trace_csv, write_trace_csv};
use ergm_bayes::rng::stream;
use ergm_bayes::{
    change_stats, parse_formula, simulate, stat_vector, AttributeSet, Graph, ModelSpec, ModelTerm,
    NodeAttribute, SimConfig, Trace,
};

fn graph_strategy(max_n: usize, directed: bool) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(move |n| {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| i != j && (directed || i < j) && bits[i * n + j])
                .collect();
            Graph::from_edges(n, directed, &edges).unwrap()
        })
    })
}

fn dyad(n: usize) -> impl Strategy<Value = (usize, usize)> {
    (0..n, 0..n - 1).prop_map(|(i, j)| (i, if j >= i { j + 1 } else { j }))
}

fn none() -> AttributeSet {
    AttributeSet::new()
}

fn spec(t: ModelTerm) -> ModelSpec {
    ModelSpec::new(vec![t]).unwrap()
}

/// gwesp by direct census of edgewise shared partners.
fn brute_gwesp(g: &Graph, decay: f64) -> f64 {
    let n = g.n();
    let r = 1.0 - (-decay).exp();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if g.has_edge(i, j) {
                let k = (0..n)
                    .filter(|&k| g.has_edge(i, k) && g.has_edge(j, k))
                    .count();
                total += 1.0 - r.powi(k as i32);
            }
        }
    }
    decay.exp() * total
}

/// gwdegree by direct census of node degrees.
fn brute_gwdegree(g: &Graph, decay: f64) -> f64 {
    let n = g.n();
    let r = 1.0 - (-decay).exp();
    let total: f64 = (0..n)
        .map(|i| {
            let k = (0..n).filter(|&j| j != i && g.has_edge(i, j)).count();
            1.0 - r.powi(k as i32)
        })
        .sum();
    decay.exp() * total
}

fn undirected_terms() -> Vec<ModelTerm> {
    vec![
        ModelTerm::Edges,
        ModelTerm::Gwesp { decay: 0.2 },
        ModelTerm::Gwesp { decay: 1.7 },
        ModelTerm::Gwdegree { decay: 0.8 },
    ]
}

fn directed_terms() -> Vec<ModelTerm> {
    vec![
        ModelTerm::Edges,
        ModelTerm::Mutual,
        ModelTerm::Ctriple { attribute: None },
        ModelTerm::Ctriple {
            attribute: Some("grp".into()),
        },
    ]
}

fn groups(n: usize, seed: u64) -> AttributeSet {
    let labels: Vec<String> = (0..n)
        .map(|i| format!("g{}", (i as u64 * 7 + seed) % 3))
        .collect();
    none().with(NodeAttribute::from_labels("grp", &labels))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn toggle_is_an_involution(
        (g, (i, j)) in graph_strategy(12, true).prop_flat_map(|g| { let n = g.n(); (Just(g), dyad(n)) })
    ) {
        let mut h = g.clone();
        h.toggle(i, j).unwrap();
        prop_assert_ne!(h.has_edge(i, j), g.has_edge(i, j));
        h.toggle(i, j).unwrap();
        prop_assert_eq!(h, g);
    }

    #[test]
    fn undirected_graphs_stay_symmetric(
        (g, (i, j)) in graph_strategy(12, false).prop_flat_map(|g| { let n = g.n(); (Just(g), dyad(n)) })
    ) {
        let h = g.toggled(i, j).unwrap();
        prop_assert_eq!(h.has_edge(i, j), h.has_edge(j, i));
        prop_assert_eq!(h.edge_count() as isize - g.edge_count() as isize, if h.has_edge(i, j) { 1 } else { -1 });
        for a in 0..h.n() {
            for b in 0..h.n() {
                prop_assert_eq!(h.has_edge(a, b), h.has_edge(b, a));
            }
        }
    }

    #[test]
    fn undirected_change_matches_recount(
        (g, (i, j)) in graph_strategy(12, false).prop_flat_map(|g| { let n = g.n(); (Just(g), dyad(n)) })
    ) {
        for t in undirected_terms() {
            let sp = spec(t);
            let delta = change_stats(&g, &none(), &sp, i, j).unwrap()[0];
            let before = stat_vector(&g, &none(), &sp).unwrap()[0];
            let after = stat_vector(&g.toggled(i, j).unwrap(), &none(), &sp).unwrap()[0];
            assert_abs_diff_eq!(delta, after - before, epsilon = 1e-12);
        }
    }

    #[test]
    fn directed_change_matches_recount(
        (g, (i, j), seed) in graph_strategy(12, true)
            .prop_flat_map(|g| { let n = g.n(); (Just(g), dyad(n), 0u64..3) })
    ) {
        let attrs = groups(g.n(), seed);
        for t in directed_terms() {
            let sp = spec(t);
            let delta = change_stats(&g, &attrs, &sp, i, j).unwrap()[0];
            let before = stat_vector(&g, &attrs, &sp).unwrap()[0];
            let after = stat_vector(&g.toggled(i, j).unwrap(), &attrs, &sp).unwrap()[0];
            prop_assert_eq!(delta, after - before);
        }
    }

    #[test]
    fn geometric_terms_match_census(g in graph_strategy(12, false), decay in 0.0f64..3.0) {
        let s = stat_vector(&g, &none(), &ModelSpec::new(vec![
            ModelTerm::Gwesp { decay },
            ModelTerm::Gwdegree { decay },
        ]).unwrap()).unwrap();
        assert_abs_diff_eq!(s[0], brute_gwesp(&g, decay), epsilon = 1e-9);
        assert_abs_diff_eq!(s[1], brute_gwdegree(&g, decay), epsilon = 1e-9);
    }

    #[test]
    fn constant_attribute_ctriple_is_unrestricted(g in graph_strategy(10, true)) {
        let same = none().with(NodeAttribute::from_labels("grp", &vec!["x"; g.n()]));
        let restricted = stat_vector(&g, &same, &spec(ModelTerm::Ctriple { attribute: Some("grp".into()) })).unwrap();
        let plain = stat_vector(&g, &same, &spec(ModelTerm::Ctriple { attribute: None })).unwrap();
        prop_assert_eq!(restricted, plain);
    }

    #[test]
    fn statistics_are_permutation_invariant(
        (g, perm, seed) in graph_strategy(10, true).prop_flat_map(|g| {
            let n = g.n();
            (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle(), 0u64..3)
        })
    ) {
        let attrs = groups(g.n(), seed);
        let sp = ModelSpec::new(directed_terms()).unwrap();
        prop_assert_eq!(
            stat_vector(&g, &attrs, &sp).unwrap(),
            stat_vector(&g.permuted(&perm), &attrs.permuted(&perm), &sp).unwrap()
        );
    }

    #[test]
    fn undirected_permutation_invariance(
        (g, perm) in graph_strategy(10, false).prop_flat_map(|g| {
            let n = g.n();
            (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
        })
    ) {
        let sp = ModelSpec::new(undirected_terms()).unwrap();
        let a = stat_vector(&g, &none(), &sp).unwrap();
        let b = stat_vector(&g.permuted(&perm), &none(), &sp).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn verify_flag_gives_identical_trajectories(
        g in graph_strategy(9, false),
        seed in any::<u64>(),
        theta in proptest::collection::vec(-1.5f64..1.5, 3),
    ) {
        let sp = ModelSpec::new(vec![
            ModelTerm::Edges,
            ModelTerm::Gwesp { decay: 0.2 },
            ModelTerm::Gwdegree { decay: 0.8 },
        ]).unwrap();
        let fast = SimConfig::new(300);
        let slow = SimConfig { verify: true, ..fast.clone() };
        let a = simulate(&g, &none(), &sp, &theta, &fast, &mut stream(seed, &[])).unwrap();
        let b = simulate(&g, &none(), &sp, &theta, &slow, &mut stream(seed, &[])).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn trace_csv_round_trip(
        chains in proptest::collection::vec(
            proptest::collection::vec(proptest::collection::vec(-1e300f64..1e300, 2), 0..20),
            1..4,
        )
    ) {
        let t = Trace::from_draws(vec!["edges".into(), "gwesp.fixed.0.2".into()], chains).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trace.csv");
        write_trace_csv(&p, &t).unwrap();
        let back = read_trace_csv(&p).unwrap();
        prop_assert_eq!(&back.labels, &t.labels);
        // trailing chains without draws leave no rows behind
        prop_assert_eq!(back.total_draws(), t.total_draws());
        for h in 0..t.nchains() {
            if h < back.nchains() {
                prop_assert!(t.chain_draws(h).eq(back.chain_draws(h)));
            } else {
                prop_assert_eq!(t.chain_len(h), 0);
            }
        }
    }

    #[test]
    fn formula_display_round_trip(
        picks in proptest::collection::vec(any::<bool>(), 3),
        e in 0u32..400,
        d in 0u32..400,
    ) {
        let mut terms = vec![ModelTerm::Edges];
        if picks[0] { terms.push(ModelTerm::Gwesp { decay: e as f64 / 100.0 }); }
        if picks[1] { terms.push(ModelTerm::Gwdegree { decay: d as f64 / 100.0 }); }
        if picks[2] { terms.reverse(); }
        let text = format!("y ~ {}", ModelSpec::new(terms.clone()).unwrap());
        let f = parse_formula(&text).unwrap();
        prop_assert_eq!(f.spec.terms(), &terms[..]);
        prop_assert_eq!(f.to_string(), text);
    }
}
