mod common;

use coseg_core::spectral::{
    biased_ncut_mask_weights, biased_vector, biased_weights, build_affinity, ncut_mask, ncut_mask_guided,
    solve_generalized, AffinityGraph, CutMethod,
};
use coseg_core::tensor_io::PatchFeatureGrid;
use coseg_core::Error;
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::Rng;

fn blocks(a: usize, b: usize, eps: f64) -> AffinityGraph {
    let n = a + b;
    let e = Array2::from_shape_fn((n, n), |(i, j)| if (i < a) == (j < a) { 1.0 } else { eps });
    common::graph_from(e, eps)
}

#[test]
fn planted_lambda2_matches_closed_form() {
    // eps (a d_A + b d_B) / (d_A d_B), evaluated at 30 digits.
    for (a, b, expected) in [
        (3, 5, 2.266_635_289_373_444e-5),
        (2, 2, 1.999_980_000_199_998e-5),
        (4, 12, 3.333_242_224_925_845e-5),
    ] {
        let basis = solve_generalized(&blocks(a, b, 1e-5), 16, 1e-8).unwrap();
        let got = basis.eigenvalues()[0];
        assert!(
            (got - expected).abs() <= 1e-9 * expected,
            "{a}+{b}: {got} vs {expected}"
        );
        // The rest of the spectrum of two ideal blocks is exactly 1.
        for &v in &basis.eigenvalues()[1..] {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn eigenpairs_match_dense_oracle_on_small_graphs() {
    let mut rng = common::rng(11);
    for _ in 0..30 {
        let n = rng.random_range(3..=12);
        let e = common::random_two_valued(n, 0.5, 1e-5, &mut rng);
        let graph = common::graph_from(e.clone(), 1e-5);
        let basis = solve_generalized(&graph, n, 1e-8).unwrap();
        let (a, b) = common::laplacian_pair(&e);
        let (values, _) = common::generalized_eigen(&a, &b);
        assert_eq!(basis.zero_modes(), 1);
        for (k, v) in values[1..].iter().enumerate() {
            assert!((basis.eigenvalues()[k] - v).abs() < 1e-10);
        }
    }
}

#[test]
fn eigenvectors_are_d_orthonormal() {
    let mut rng = common::rng(12);
    let e = common::random_two_valued(16, 0.4, 1e-5, &mut rng);
    let graph = common::graph_from(e, 1e-5);
    let basis = solve_generalized(&graph, 8, 1e-8).unwrap();
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            let dot: f64 = (0..16)
                .map(|r| basis.eigenvector(i)[r] * graph.degree()[r] * basis.eigenvector(j)[r])
                .sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((dot - expected).abs() < 1e-10, "({i}, {j}) = {dot}");
        }
        // Every non-trivial vector is D-orthogonal to the constant mode.
        let mass: f64 = (0..16).map(|r| basis.eigenvector(i)[r] * graph.degree()[r]).sum();
        assert!(mass.abs() < 1e-10);
    }
}

#[test]
fn affinity_thresholds_cosine() {
    let features = array![[1.0f32, 0.0], [0.9, 0.1], [0.0, 1.0], [-1.0, 0.0]];
    let grid = PatchFeatureGrid::new("g", 2, 2, 8, features).unwrap();
    let g = build_affinity(&grid, 0.2, 1e-5).unwrap();
    let e = g.affinity();
    assert_eq!(e[[0, 1]], 1.0);
    assert_eq!(e[[0, 2]], 1e-5);
    assert_eq!(e[[0, 3]], 1e-5);
    assert_eq!(e[[1, 2]], 1e-5); // cos = 0.11
    for i in 0..4 {
        assert_eq!(e[[i, i]], 1.0);
    }
    assert!((g.degree()[0] - (2.0 + 2e-5)).abs() < 1e-15);
}

#[test]
fn affinity_rejects_zero_descriptors_and_bad_epsilon() {
    let grid = PatchFeatureGrid::new("z", 1, 2, 8, array![[1.0f32, 0.0], [0.0, 0.0]]).unwrap();
    assert!(matches!(
        build_affinity(&grid, 0.2, 1e-5),
        Err(Error::ZeroNorm { patch: 1, .. })
    ));
    let ok = PatchFeatureGrid::new("o", 1, 2, 8, array![[1.0f32, 0.0], [0.0, 1.0]]).unwrap();
    assert!(build_affinity(&ok, 0.2, 0.0).is_err());
    assert!(build_affinity(&ok, 0.2, 2.0).is_err());
}

#[test]
fn gamma_at_or_above_lambda2_is_rejected() {
    let g = blocks(3, 5, 1e-5);
    let basis = solve_generalized(&g, 4, 1e-8).unwrap();
    let seed = vec![0.125; 8];
    let lambda2 = basis.eigenvalues()[0];
    assert!(matches!(
        biased_weights(&basis, &g, &seed, lambda2),
        Err(Error::GammaNotBelowSpectrum { .. })
    ));
    assert!(biased_weights(&basis, &g, &seed, 1e-4).is_err());
    assert!(biased_weights(&basis, &g, &seed, lambda2 / 2.0).is_ok());
}

#[test]
fn biased_vector_sums_weighted_eigenvectors() {
    let g = blocks(2, 3, 1e-5);
    let basis = solve_generalized(&g, 4, 1e-8).unwrap();
    let w = [2.0, -1.0, 0.0, 0.5];
    let x = biased_vector(&basis, &w);
    for i in 0..5 {
        let expected: f64 = (0..4).map(|k| w[k] * basis.eigenvector(k)[i]).sum();
        assert_eq!(x[i], expected);
    }
}

#[test]
fn seeding_picks_either_block() {
    let g = blocks(4, 6, 1e-5);
    let basis = solve_generalized(&g, 16, 1e-8).unwrap();
    let gamma = basis.eigenvalues()[0] / 2.0;
    for (target, seed_cell) in [(true, 1), (false, 7)] {
        let mut seed = Array2::zeros((1, 10));
        seed[[0, seed_cell]] = 1.0;
        let cut = biased_ncut_mask_weights(&basis, &g, &seed, gamma).unwrap();
        assert_eq!(cut.method, CutMethod::Biased);
        let expected: Vec<bool> = (0..10).map(|i| (i < 4) == target).collect();
        assert_eq!(cut.mask.iter().copied().collect::<Vec<_>>(), expected);
        assert!(cut.biased_vector.is_some());
    }
}

#[test]
fn balanced_seed_is_degenerate() {
    // Equal D-mass on both sides leaves u_2 uncorrelated with the seed.
    let g = blocks(3, 3, 1e-5);
    let basis = solve_generalized(&g, 16, 1e-8).unwrap();
    let seed = Array2::from_elem((1, 6), 1.0);
    let cut = biased_ncut_mask_weights(&basis, &g, &seed, basis.eigenvalues()[0] / 2.0).unwrap();
    assert!(cut.degenerate);
    assert_eq!(cut.method, CutMethod::Plain);
}

#[test]
fn plain_cut_without_guide_takes_smaller_degree_side() {
    let g = blocks(3, 7, 1e-5);
    let basis = solve_generalized(&g, 4, 1e-8).unwrap();
    let m = ncut_mask(&basis, None).unwrap();
    assert_eq!(m.mask.iter().filter(|&&b| b).count(), 3);
    assert!(m.mask.iter().take(3).all(|&b| b));
}

#[test]
fn guided_plain_cut_follows_the_guide_maximum() {
    let g = blocks(3, 7, 1e-5);
    let basis = solve_generalized(&g, 4, 1e-8).unwrap();
    let mut guide = vec![0.0; 10];
    guide[8] = 1.0;
    let m = ncut_mask_guided(&basis, Some(&guide));
    assert_eq!(m.mask.iter().filter(|&&b| b).count(), 7);
    assert!(m.mask[[0, 8]]);
}

#[test]
fn biased_cut_rejects_bad_seeds() {
    let g = blocks(2, 2, 1e-5);
    let basis = solve_generalized(&g, 4, 1e-8).unwrap();
    assert!(biased_ncut_mask_weights(&basis, &g, &Array2::zeros((1, 4)), 1e-6).is_err());
    assert!(biased_ncut_mask_weights(&basis, &g, &array![[1.0, -1.0, 0.0, 0.0]], 1e-6).is_err());
    assert!(biased_ncut_mask_weights(&basis, &g, &Array2::ones((2, 2)), 1e-6).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rescaled_seeds_give_identical_masks(
        seed in 1u64..10_000,
        n in 4usize..16,
        scale in prop::sample::select(vec![0.1, 0.5, 1.0, 4.0, 10.0]),
    ) {
        let mut rng = common::rng(seed);
        let e = common::random_two_valued(n, 0.5, 1e-5, &mut rng);
        let graph = common::graph_from(e, 1e-5);
        let basis = solve_generalized(&graph, n, 1e-8).unwrap();
        let gamma = 1e-4f64.min(basis.eigenvalues()[0] / 2.0);
        let s = Array2::from_shape_fn((1, n), |_| rng.random_range(0.0..1.0));
        let a = biased_ncut_mask_weights(&basis, &graph, &s, gamma).unwrap();
        let b = biased_ncut_mask_weights(&basis, &graph, &s.mapv(|v| v * scale), gamma).unwrap();
        prop_assert_eq!(a.mask, b.mask);
        prop_assert_eq!(a.method, b.method);
    }

    #[test]
    fn eigenvalues_lie_in_unit_interval_band(seed in 1u64..10_000, n in 2usize..20) {
        let mut rng = common::rng(seed);
        let e = common::random_two_valued(n, 0.3, 1e-5, &mut rng);
        let graph = common::graph_from(e, 1e-5);
        let basis = solve_generalized(&graph, n, 1e-8).unwrap();
        // Generalized eigenvalues of (D - E, D) lie in [0, 2].
        for w in basis.eigenvalues().windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for &v in basis.eigenvalues() {
            prop_assert!(v > 0.0 && v <= 2.0 + 1e-12);
        }
    }
}
