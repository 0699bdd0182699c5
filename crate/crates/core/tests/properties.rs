use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use ising_core::canonical::canonical_code_from_parents;
use ising_core::exact::{solve_exact, IsingInstance};
use ising_core::graph::{configuration_model, sparsity_profile};
use ising_core::math::edge_message;
use ising_core::population::w1_distance;
use ising_core::tree::{self, BoundaryCondition, RootedTree};
use ising_core::{rng, MultiGraph};

fn recursive_parents(n: usize, seed: u64) -> Vec<Option<usize>> {
    let mut r = rng::from_seed(seed);
    (0..n).map(|v| if v == 0 { None } else { Some(r.gen_range(0..v)) }).collect()
}

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    if k == items.len() {
        return visit(items);
    }
    for i in k..items.len() {
        items.swap(k, i);
        if permutations(items, k + 1, visit) {
            return true;
        }
        items.swap(k, i);
    }
    false
}

/// Root-preserving isomorphism by exhaustive search.
fn isomorphic(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let (ra, rb) = (a.iter().position(Option::is_none).unwrap(), b.iter().position(Option::is_none).unwrap());
    let others_a: Vec<usize> = (0..a.len()).filter(|&v| v != ra).collect();
    let mut others_b: Vec<usize> = (0..b.len()).filter(|&v| v != rb).collect();
    permutations(&mut others_b, 0, &mut |img| {
        let mut map = vec![0; a.len()];
        map[ra] = rb;
        for (&v, &w) in others_a.iter().zip(img) {
            map[v] = w;
        }
        (0..a.len()).all(|v| a[v].map(|p| map[p]) == b[map[v]])
    })
}

fn relabel(parents: &[Option<usize>], seed: u64) -> Vec<Option<usize>> {
    let mut perm: Vec<usize> = (0..parents.len()).collect();
    perm.shuffle(&mut rng::from_seed(seed));
    let mut out = vec![None; parents.len()];
    for (v, p) in parents.iter().enumerate() {
        out[perm[v]] = p.map(|p| perm[p]);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_code_matches_brute_force(n in 1usize..=8, sa in any::<u64>(), sb in any::<u64>()) {
        let a = recursive_parents(n, sa);
        let b = recursive_parents(n, sb);
        let same = canonical_code_from_parents(&a) == canonical_code_from_parents(&b);
        prop_assert_eq!(same, isomorphic(&a, &b));
        let c = relabel(&a, sb);
        prop_assert_eq!(canonical_code_from_parents(&a), canonical_code_from_parents(&c));
    }

    #[test]
    fn configuration_model_preserves_degrees(degrees in prop::collection::vec(0usize..6, 1..60), seed in any::<u64>()) {
        let mut degrees = degrees;
        if degrees.iter().sum::<usize>() % 2 == 1 {
            degrees[0] += 1;
        }
        let g = configuration_model(&degrees, &mut rng::from_seed(seed));
        prop_assert_eq!(g.degrees(), &degrees[..]);
        prop_assert_eq!(2 * g.num_edges(), degrees.iter().sum::<usize>());
    }

    #[test]
    fn sparsity_profile_is_nonincreasing(degrees in prop::collection::vec(0usize..20, 2..80), seed in any::<u64>()) {
        let mut degrees = degrees;
        if degrees.iter().sum::<usize>() % 2 == 1 {
            degrees[0] += 1;
        }
        let g = configuration_model(&degrees, &mut rng::from_seed(seed));
        let profile: Vec<f64> = (0..25).map(|c| sparsity_profile(&g, c)).collect();
        prop_assert!(profile.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!((profile[0] - 2.0 * g.num_edges() as f64 / g.n() as f64).abs() < 1e-12);
    }

    #[test]
    fn w1_is_permutation_invariant(xs in prop::collection::vec(-5.0f64..5.0, 1..50), ys in prop::collection::vec(-5.0f64..5.0, 50), seed in any::<u64>()) {
        let ys = &ys[..xs.len()];
        let d = w1_distance(&xs, ys).unwrap();
        let mut shuffled = xs.clone();
        shuffled.shuffle(&mut rng::from_seed(seed));
        prop_assert_eq!(w1_distance(&shuffled, ys).unwrap(), d);
        prop_assert_eq!(w1_distance(ys, &xs).unwrap(), d);
        prop_assert_eq!(w1_distance(&xs, &shuffled).unwrap(), 0.0);
    }

    #[test]
    fn messages_are_odd_and_bounded(beta in 0.0f64..50.0, h in -100.0f64..100.0) {
        let m = edge_message(beta, h);
        prop_assert!(m.abs() <= beta.min(h.abs()) + 1e-12);
        prop_assert_eq!(edge_message(beta, -h), -m);
    }

    #[test]
    fn tree_recursion_matches_enumeration(n in 2usize..=10, seed in any::<u64>(), beta in 0.0f64..2.0) {
        let parents = recursive_parents(n, seed);
        let mut r = rng::from_seed(seed ^ 1);
        let fields: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.5)).collect();
        let (t, _) = RootedTree::from_parents(&parents, &fields).unwrap();
        let inst = IsingInstance::new(t.to_graph(), beta, t.fields().to_vec()).unwrap();
        let free = solve_exact(&inst).unwrap().vertex_magnetizations[0];
        let plus = solve_exact(&inst.clone().with_pinned(&t.boundary())).unwrap().vertex_magnetizations[0];
        prop_assert!((tree::root_magnetization(&t, beta, BoundaryCondition::Free) - free).abs() < 1e-12);
        prop_assert!((tree::root_magnetization(&t, beta, BoundaryCondition::Plus) - plus).abs() < 1e-12);
    }

    #[test]
    fn edge_list_roundtrip(degrees in prop::collection::vec(0usize..5, 1..40), seed in any::<u64>()) {
        let mut degrees = degrees;
        if degrees.iter().sum::<usize>() % 2 == 1 {
            degrees[0] += 1;
        }
        let g = configuration_model(&degrees, &mut rng::from_seed(seed));
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = MultiGraph::read_edge_list(&buf[..]).unwrap();
        prop_assert_eq!(back.edges(), g.edges());
    }
}
