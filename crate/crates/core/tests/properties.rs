use proptest::prelude::*;

use epinet::dist::{excess_of, make_poisson, make_powerlaw, DegreeDistribution, DistKind};
use epinet::kinetics::{basic_reproduction_number, full_rhs, EpidemicParams, FullState};
use epinet::netgraph::{classify_edges, configuration_model, graph_stats, neighborhood_overlap, ContactGraph, EdgeType};
use epinet::stability::growth_rate;

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 2..40).prop_filter("positive mass", |w| w.iter().skip(1).sum::<f64>() > 1e-3)
}

fn params() -> impl Strategy<Value = EpidemicParams> {
    (0.0f64..1.0, 0.0f64..0.5, 0.01f64..0.5, 0.0f64..0.5, 0.0f64..1.0).prop_map(|(alpha, beta, gamma, gamma1, eta)| {
        EpidemicParams {
            alpha,
            beta,
            gamma,
            gamma1,
            eta,
        }
    })
}

fn edges(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..n, 0..n), 0..3 * n)
}

proptest! {
    #[test]
    fn pmf_normalised_and_excess_mean(w in weights()) {
        let d = DegreeDistribution::from_weights(w, DistKind::Degree, "p").unwrap();
        prop_assert!((d.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let e = excess_of(&d).unwrap();
        prop_assert!((e.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (m1, m2) = d.pmf().iter().enumerate().fold((0.0, 0.0), |(a, b), (k, p)| {
            (a + k as f64 * p, b + (k * k) as f64 * p)
        });
        prop_assert!((e.mean() - (m2 - m1) / m1).abs() < 1e-9 * e.mean().max(1.0));
        prop_assert!((d.dg(1.0) - d.mean()).abs() < 1e-9 * d.mean().max(1.0));
    }

    #[test]
    fn pgf_monotone_and_inverse(w in weights(), x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let d = DegreeDistribution::from_weights(w, DistKind::Degree, "p").unwrap();
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        prop_assert!(d.g(lo) <= d.g(hi) + 1e-15);
        let target = d.g(x);
        let back = d.pgf_invert(target).unwrap();
        prop_assert!((d.g(back) - target).abs() <= 1e-10);
    }

    #[test]
    fn full_system_conserves_each_class(p in params(), s in 0.0f64..1.0, frac in 0.0f64..1.0) {
        let d = make_poisson(6.0, 40).unwrap();
        let w = excess_of(&d).unwrap();
        let mut st = FullState::initial(40, 0.0);
        for k in 0..=40 {
            let rest = 1.0 - s;
            st.s[k] = s;
            st.x[k] = rest * frac;
            st.q_s[k] = rest * (1.0 - frac) * 0.5;
            st.q_i[k] = rest * (1.0 - frac) * 0.25;
            st.r[k] = rest * (1.0 - frac) * 0.25;
        }
        let ds = full_rhs(&st, &p, &d, &w).unwrap();
        for k in 0..=40 {
            let sum = ds.s[k] + ds.q_s[k] + ds.x[k] + ds.q_i[k] + ds.r[k];
            prop_assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_sign_consistency(p in params(), mean in 1.0f64..30.0) {
        let d = make_poisson(mean, 200).unwrap();
        let w = excess_of(&d).unwrap();
        let a = growth_rate(1.0, &p, &w);
        let r0 = basic_reproduction_number(&p, &w).unwrap();
        prop_assume!((r0 - 1.0).abs() > 1e-9);
        prop_assert_eq!(a > 0.0, r0 > 1.0);
    }

    #[test]
    fn graph_is_simple_and_symmetric(e in edges(12)) {
        let (g, dropped) = ContactGraph::from_edges(12, e.clone()).unwrap();
        prop_assert_eq!(g.m() + dropped.duplicates + dropped.self_loops, e.len());
        for u in 0..g.n() {
            prop_assert!(g.neighbors(u).windows(2).all(|w| w[0] < w[1]));
            for &v in g.neighbors(u) {
                prop_assert!(v != u);
                prop_assert!(g.neighbors(v).contains(&u));
            }
        }
    }

    #[test]
    fn overlap_bounded_and_classification_partitions(e in edges(15), h in 0.0f64..=1.0) {
        let g = ContactGraph::from_edges(15, e).unwrap().0;
        for &(u, v) in g.edges() {
            let o = neighborhood_overlap(&g, u, v).unwrap();
            prop_assert!((0.0..=1.0).contains(&o));
        }
        let typed = classify_edges(&g, h).unwrap();
        let close = typed.edge_types().iter().filter(|&&t| t == EdgeType::Close).count();
        let normal = typed.edge_types().iter().filter(|&&t| t == EdgeType::Normal).count();
        prop_assert_eq!(close + normal, g.m());
    }

    #[test]
    fn stats_ranges(e in edges(20)) {
        let g = ContactGraph::from_edges(20, e).unwrap().0;
        let s = graph_stats(&g);
        prop_assert!((s.k0 - 2.0 * s.m as f64 / s.n as f64).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&s.c));
        prop_assert!((0.0..=1.0).contains(&s.c_local));
        prop_assert!(s.rho.is_nan() || (-1.0..=1.0).contains(&s.rho));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn configuration_model_deterministic(seed in any::<u64>(), n in 2usize..300) {
        let d = make_powerlaw(-2.5, 1, 30).unwrap();
        let a = configuration_model(&d, n, seed);
        let b = configuration_model(&d, n, seed);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "same seed produced different outcomes"),
        }
    }
}

#[test]
fn configuration_model_large_poisson() {
    let d = make_poisson(25.0, 1000).unwrap();
    let g = configuration_model(&d, 100_000, 5).unwrap();
    let s = graph_stats(&g);
    assert!((s.k0 - 25.0).abs() / 25.0 < 0.01, "K0 = {}", s.k0);
    assert!(s.c < 0.01, "C = {}", s.c);
}
