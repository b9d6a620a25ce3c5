mod common;

use csem::codec::{decode, decode_commons, encode, storage_report};
use csem::cse::{eliminate_commons, extract, extract_traced, pair_gain, pairing_gain};
use csem::kernels::{mm_compressed, mm_csr, mm_dense};
use csem::matrix::{from_csr, generate_dense, nonzero_ratio, to_csr};
use csem::{CompressedMatrix, CseSet, DenseMatrix, ExtractConfig, GenSpec, LevelMode, Pairing};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix_strategy(max: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max, 1..=max).prop_flat_map(|(rows, cols)| {
        proptest::collection::vec(
            prop_oneof![3 => Just(0i32), 2 => 1..=2i32, 1 => -3..=3i32],
            rows * cols,
        )
        .prop_map(move |entries| DenseMatrix::new(rows, cols, entries).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn compression_is_lossless(m in matrix_strategy(12), seed in any::<u64>()) {
        let (commons, remainder) = extract(&m, &ExtractConfig::new(3, 20, seed)).unwrap();
        commons.validate().unwrap();
        prop_assert_eq!(eliminate_commons(&m, &commons).unwrap(), remainder.clone());
        let c = encode(&remainder, &commons, m.dims()).unwrap();
        prop_assert_eq!(decode(&c).unwrap(), m.clone());
        prop_assert_eq!(decode_commons(&c).unwrap(), commons.clone());
        prop_assert_eq!(
            CompressedMatrix::from_bytes(&c.to_bytes().unwrap()).unwrap(),
            c.clone()
        );
        prop_assert_eq!(c.nnz(), m.nnz());
        prop_assert_eq!(
            remainder.nnz(),
            m.nnz() - 2 * (commons.total_gain() + commons.len())
        );
    }

    #[test]
    fn kernels_agree(m in matrix_strategy(10), v in proptest::collection::vec(-50i64..=50, 10)) {
        let v = &v[..m.cols()];
        let (commons, remainder) = extract(&m, &ExtractConfig::new(2, 10, 1)).unwrap();
        let c = encode(&remainder, &commons, m.dims()).unwrap();
        let (yd, od) = mm_dense(&m, v).unwrap();
        let (yc, oc) = mm_csr(&to_csr(&m), v).unwrap();
        let (yx, ox) = mm_compressed(&c, v).unwrap();
        prop_assert_eq!(&yd, &common::naive_product(&m, v));
        prop_assert_eq!(&yd, &yc);
        prop_assert_eq!(&yd, &yx);
        prop_assert_eq!(od, oc);
        prop_assert_eq!(od.additions, m.nnz() as u64);
        prop_assert_eq!(ox.additions as usize, m.nnz() - commons.total_gain());
        prop_assert_eq!(ox.multiplications as usize, c.weights.len());
    }

    #[test]
    fn csr_roundtrip_and_ratio(m in matrix_strategy(16)) {
        prop_assert_eq!(from_csr(&to_csr(&m)).unwrap(), m.clone());
        let expected = m.entries().iter().filter(|&&v| v != 0).count() as f64
            / (m.rows() * m.cols()) as f64;
        prop_assert_eq!(nonzero_ratio(&m), expected);
    }

    #[test]
    fn pair_gain_matches_brute_force(m in matrix_strategy(9)) {
        prop_assume!(m.cols() >= 2);
        for i in 0..m.cols() {
            for j in 0..m.cols() {
                if i != j {
                    prop_assert_eq!(pair_gain(&m, i, j).0, common::brute_pair_gain(&m, i, j));
                }
            }
        }
    }

    #[test]
    fn generator_hits_exact_density(
        rows in 1usize..40,
        cols in 1usize..40,
        alpha in 0.01f64..=1.0,
        unique in 1usize..10,
        seed in any::<u64>(),
    ) {
        let spec = GenSpec::new(rows, cols, alpha, unique, seed);
        prop_assume!(alpha * ((rows * cols) as f64) >= 1.0);
        let m = generate_dense(&spec).unwrap();
        prop_assert_eq!(m.nnz(), spec.target_nnz());
        prop_assert!(m.unique_nonzero() <= unique);
        prop_assert_eq!(generate_dense(&spec).unwrap(), m);
    }
}

#[test]
fn two_column_extract_equals_the_only_pairing() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for seed in 0..50 {
        let m = common::random_matrix(&mut rng, 12, 2, 0.7, &[1, 2, 3]);
        let (set, _) = extract(&m, &ExtractConfig::new(1, 0, seed)).unwrap();
        assert_eq!(set.total_gain(), common::brute_pair_gain(&m, 0, 1));
    }
}

#[test]
fn pairing_gain_sums_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = common::random_matrix(&mut rng, 30, 8, 0.6, &[1, 2]);
    let p = Pairing::from_order(&[3, 0, 7, 5, 1, 2, 6, 4]);
    let expected: usize = p
        .pairs
        .iter()
        .map(|&(i, j)| common::brute_pair_gain(&m, i, j))
        .sum();
    let (gain, commons) = pairing_gain(&m, &p);
    assert_eq!(gain, expected);
    assert_eq!(commons.total_gain(), expected);
    commons.validate().unwrap();

    let z = DenseMatrix::zeros(4, 8).unwrap();
    assert_eq!(pairing_gain(&z, &p).0, 0);
}

#[test]
fn exhaustive_enumeration_counts() {
    for (n, count) in [(2, 1), (3, 3), (4, 3), (5, 15), (6, 15)] {
        let cols: Vec<usize> = (0..n).collect();
        assert_eq!(common::all_pairings(&cols).len(), count);
    }
}

#[test]
fn traced_gains_never_drop() {
    for seed in 0..10 {
        let m =
            generate_dense(&GenSpec::new(40, 30, 0.5, 2, seed).with_mode(LevelMode::ZeroCounted))
                .unwrap();
        let (set, _, trace) = extract_traced(&m, &ExtractConfig::new(5, 200, seed)).unwrap();
        for it in &trace.iterations {
            let mut prev = it.initial_gain;
            for &g in &it.attempt_gains {
                assert!(g >= prev);
                prev = g;
            }
        }
        let per_iteration: usize = trace.iterations.iter().map(|i| i.final_gain).sum();
        assert!(set.total_gain() >= per_iteration);
    }
}

#[test]
fn storage_bound_is_tight_with_full_alphabet() {
    // every column holds both values, so the weights pair hits N(U+1)
    let m = DenseMatrix::from_rows(&[[1, 2, 1], [2, 1, 2], [1, 1, 0], [0, 2, 2]]).unwrap();
    let c = encode(&m, &CseSet::new(), m.dims()).unwrap();
    let r = storage_report(&c, m.nnz());
    assert_eq!(r.s_weights, 3 * (2 + 1));
    assert_eq!(r.s_total, 3 * 3 + m.nnz() + 4);
}

#[test]
fn random_cse_free_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for _ in 0..50 {
        let m = common::random_matrix(&mut rng, 9, 7, 0.5, &[-4, -1, 2, 5, 9]);
        let c = encode(&m, &CseSet::new(), m.dims()).unwrap();
        assert!(c.cse.is_empty() && c.cp.is_empty());
        assert_eq!(decode(&c).unwrap(), m);
    }
}
