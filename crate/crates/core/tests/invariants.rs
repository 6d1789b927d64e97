use narrative_core::corpus::narrative_permutations;
use narrative_core::minpath::{mst, tsp_brute_force, tsp_exact, tsp_heuristic};
use narrative_core::pathspace::{
    action, action_of_order, distance_matrix, AveragePath, DistanceMatrix, Metric, Provenance,
};
use narrative_core::runstats::{kendall_tau, ordered_runs};
use narrative_core::semantic::{parse_external, tokenize, EmbeddingSet, MethodTag};
use narrative_core::takens::{delay_embed, DelaySeries};
use narrative_core::testkit::{brownian_bridge_group, SyntheticGroupSpec};
use narrative_core::GroupMeta;
use proptest::prelude::*;

fn plane_matrix(points: &[(f64, f64)]) -> DistanceMatrix {
    DistanceMatrix::from_fn(points.len(), Metric::SqEuclidean, |i, j| {
        (points[i].0 - points[j].0).powi(2) + (points[i].1 - points[j].1).powi(2)
    })
}

fn points(min: usize, max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), min..max)
}

fn permutation(min: usize, max: usize) -> impl Strategy<Value = Vec<usize>> {
    (min..max).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn solver_ordering(pts in points(3, 10), seed in any::<u64>()) {
        let d = plane_matrix(&pts);
        let n = d.size();
        let exact = tsp_exact(&d, 0, n - 1).unwrap().cost.value;
        let heur = tsp_heuristic(&d, 0, n - 1, 8, seed).unwrap().cost.value;
        let identity: Vec<usize> = (0..n).collect();
        let natural = action_of_order(&d, &identity).unwrap().value;
        let tol = 1e-12 * natural.max(1.0);
        prop_assert!(exact <= heur + tol);
        prop_assert!(heur <= natural + tol);
    }

    #[test]
    fn exact_agrees_with_brute_force(pts in points(2, 9), a in any::<usize>(), b in any::<usize>()) {
        let d = plane_matrix(&pts);
        let n = d.size();
        let start = a % n;
        let end = (start + 1 + b % (n - 1)) % n;
        let exact = tsp_exact(&d, start, end).unwrap();
        let brute = tsp_brute_force(&d, start, end).unwrap();
        prop_assert_eq!(exact.cost.value, brute.cost.value);
        prop_assert_eq!(exact.order, brute.order);
    }

    #[test]
    fn mst_is_no_heavier_than_any_path(pts in points(2, 14)) {
        // a Hamiltonian path is itself a spanning tree
        let d = plane_matrix(&pts);
        let n = d.size();
        let tree = mst(&d).unwrap();
        let path = tsp_exact(&d, 0, n - 1).unwrap().cost.value;
        prop_assert!(tree.total_weight <= path + 1e-12 * path.max(1.0));
    }

    #[test]
    fn tau_reversal_antisymmetry(order in permutation(2, 30)) {
        let mut rev = order.clone();
        rev.reverse();
        let (a, b) = (kendall_tau(&order), kendall_tau(&rev));
        prop_assert!((a + b).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn runs_partition_positions(order in permutation(1, 40)) {
        let r = ordered_runs(&order).unwrap();
        prop_assert_eq!(r.runs.iter().map(|x| x.len).sum::<usize>(), order.len());
        let mut next = 0;
        for run in &r.runs {
            prop_assert_eq!(run.start, next);
            for p in run.start + 1..run.start + run.len {
                prop_assert_eq!(order[p], order[p - 1] + 1);
            }
            let end = run.start + run.len;
            if end < order.len() {
                prop_assert!(order[end] != order[end - 1] + 1, "run is not maximal");
            }
            next = end;
        }
        prop_assert!(r.prefix_run >= 1 && r.suffix_run >= 1);
    }

    #[test]
    fn identity_order_cost_is_the_action(pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 2..12)) {
        let n = pts.len();
        let path = AveragePath { points: pts, provenance: Provenance::Ordered, anchor_a: 1, anchor_b: n };
        let d = distance_matrix(&path, Metric::SqEuclidean);
        let identity: Vec<usize> = (0..n).collect();
        let a = action(&path).unwrap().value;
        let b = action_of_order(&d, &identity).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
            }
        }
    }

    #[test]
    fn permutations_are_valid_and_pin_anchors(nn in 1usize..6, n in 2usize..12, seed in any::<u64>()) {
        let pinned = [0, n - 1];
        let perms = narrative_permutations(nn, n, seed, &pinned);
        prop_assert_eq!(&perms, &narrative_permutations(nn, n, seed, &pinned));
        for p in perms {
            prop_assert_eq!(p[0], 0);
            prop_assert_eq!(p[n - 1], n - 1);
            let mut s = p.clone();
            s.sort_unstable();
            prop_assert_eq!(s, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tokens_are_lowercase_alphanumeric(text in "\\PC{0,80}") {
        for t in tokenize(&text) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(char::is_alphanumeric));
            prop_assert_eq!(t.to_lowercase(), t.clone());
            prop_assert_eq!(tokenize(&t), vec![t.clone()]);
        }
    }

    #[test]
    fn embedding_file_round_trip(
        vectors in (1usize..4, 2usize..5, 1usize..4).prop_flat_map(|(nn, n, k)| {
            prop::collection::vec(prop::collection::vec(prop::collection::vec(-1e6f64..1e6, k), n), nn)
        })
    ) {
        let meta = GroupMeta::numbered(vectors.len(), vectors[0].len(), 1, vectors[0].len(), "").unwrap();
        let set = EmbeddingSet::new(meta.ids.clone(), vectors, MethodTag::External).unwrap();
        let back = parse_external(&set.to_file_string(), &meta).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn delay_embedding_shape(values in prop::collection::vec(-1e3f64..1e3, 1..60), m in 1usize..5, tau in 1usize..5) {
        let s = DelaySeries::new(values.clone(), "p").unwrap();
        let needed = (m - 1) * tau + 1;
        match delay_embed(&s, m, tau) {
            Ok(cloud) => {
                prop_assert_eq!(cloud.len(), values.len() + 1 - needed);
                for p in 0..cloud.len() {
                    for c in 0..m {
                        prop_assert_eq!(cloud.point(p)[c], values[p + c * tau]);
                    }
                }
            }
            Err(_) => prop_assert!(values.len() < needed),
        }
        let back = DelaySeries::from_csv(&s.to_csv(), "p").unwrap();
        prop_assert_eq!(back.values(), s.values());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bridge_endpoints_exact(nn in 2usize..8, n in 2usize..10, k in 1usize..4, sigma in 0.0f64..5.0, seed in any::<u64>()) {
        let mut spec = SyntheticGroupSpec::along_axis(nn, n, k, 1.5, sigma, seed);
        spec.anchor_a_vec = (0..k).map(|c| c as f64 - 0.5).collect();
        let (set, _) = brownian_bridge_group(&spec).unwrap();
        for i in 0..nn {
            prop_assert_eq!(set.vector(i, 0), spec.anchor_a_vec.as_slice());
            prop_assert_eq!(set.vector(i, n - 1), spec.anchor_b_vec.as_slice());
        }
    }

    #[test]
    fn heuristic_restart_prefix(pts in points(4, 25), seed in any::<u64>()) {
        let d = plane_matrix(&pts);
        let n = d.size();
        let few = tsp_heuristic(&d, 0, n - 1, 3, seed).unwrap().cost.value;
        let many = tsp_heuristic(&d, 0, n - 1, 6, seed).unwrap().cost.value;
        prop_assert!(many <= few);
    }
}
