//! Property tests for the spec-level invariants.

use proptest::prelude::*;

use rdmc_core::compress::{apply_codebook, prune, weighted_kmeans};
use rdmc_core::importance::{ImportanceDiag, ImportanceKind};
use rdmc_core::metrics::kl_divergence;
use rdmc_core::net::{Activation, DenseLayer, FlatCoord, FlatIndexer, Head, Network};
use rdmc_core::rd::{waterfill, LinearSource};
use rdmc_core::relu::{dp_term, DpTerms};

fn weight_vec(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

fn importance_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..3.0f64, len..=len)
}

proptest! {
    #[test]
    fn prune_golden_rule_is_exact_for_every_mask(
        w in weight_vec(1..24),
        seed in any::<u64>(),
        r in 0.0..=1.0f64,
    ) {
        let m = w.len();
        let mut rng = rdmc_core::rng::substream(seed, 0);
        use rand::Rng;
        let iq: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..3.0)).collect();
        let imp = ImportanceDiag::from_parts(iq.clone(), None, ImportanceKind::SupGradient).unwrap();
        let (mask, what) = prune(&w, &imp, r).unwrap();
        prop_assert_eq!(mask.kept_count(), (r * m as f64).round() as usize);
        let dot: f64 = (0..m).map(|i| iq[i] * what[i] * (w[i] - what[i])).sum();
        prop_assert_eq!(dot, 0.0);
        // kept entries are untouched, pruned entries are exactly zero
        for i in 0..m {
            if mask.keep()[i] {
                prop_assert_eq!(what[i], w[i]);
            } else {
                prop_assert_eq!(what[i], 0.0);
            }
        }
    }

    #[test]
    fn waterfill_levels_are_within_bounds_and_constraint_met(
        sigma in prop::collection::vec(0.1..4.0f64, 1..8),
        lambda_seed in any::<u64>(),
        frac in 0.01..=1.0f64,
    ) {
        let m = sigma.len();
        let mut rng = rdmc_core::rng::substream(lambda_seed, 0);
        use rand::Rng;
        let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..4.0)).collect();
        let src = LinearSource::new(sigma.clone(), lambda.clone()).unwrap();
        let d = src.d_max() * frac;
        let sol = waterfill(&src, d).unwrap();
        for (i, &level) in sol.levels.iter().enumerate() {
            prop_assert!(level > 0.0);
            prop_assert!(level <= sigma[i]);
        }
        let achieved: f64 = lambda.iter().zip(&sol.levels).map(|(&l, &di)| l * di).sum();
        prop_assert!((achieved - d).abs() <= 1e-9 * d.max(1.0));
        prop_assert!(sol.rate_nats >= 0.0);
    }

    #[test]
    fn kl_divergence_nonnegative_zero_iff_equal(
        raw_p in prop::collection::vec(0.05..1.0f64, 2..6),
        raw_q_seed in any::<u64>(),
    ) {
        let c = raw_p.len();
        let sp: f64 = raw_p.iter().sum();
        let p: Vec<f64> = raw_p.iter().map(|v| v / sp).collect();
        let mut rng = rdmc_core::rng::substream(raw_q_seed, 0);
        use rand::Rng;
        let raw_q: Vec<f64> = (0..c).map(|_| rng.gen_range(0.05..1.0)).collect();
        let sq: f64 = raw_q.iter().sum();
        let q: Vec<f64> = raw_q.iter().map(|v| v / sq).collect();
        prop_assert!(kl_divergence(&q, &p) >= 0.0);
        prop_assert_eq!(kl_divergence(&p, &p), 0.0);
    }

    #[test]
    fn flat_indexer_bijection_roundtrips(
        dims in prop::collection::vec(1usize..5, 2..5),
        include_bias in any::<bool>(),
    ) {
        let mut layers = Vec::new();
        for pair in dims.windows(2) {
            let (ind, outd) = (pair[0], pair[1]);
            let weights: Vec<Vec<f64>> = (0..outd).map(|r| (0..ind).map(|c| (r * ind + c) as f64).collect()).collect();
            layers.push(DenseLayer::new(weights, vec![0.0; outd], Activation::Relu).unwrap());
        }
        let net = Network::new(layers, Head::Regression, 1.0).unwrap();
        let idx = FlatIndexer::new(&net, include_bias);
        for g in 0..idx.len() {
            let coord: FlatCoord = idx.from_global(g).unwrap();
            prop_assert_eq!(idx.to_global(coord), Some(g));
        }
        prop_assert_eq!(idx.from_global(idx.len()), None);
    }

    #[test]
    fn dp_term_is_zero_at_p0_and_c_at_p1(
        w in weight_vec(1..6),
        seed in any::<u64>(),
    ) {
        let m = w.len();
        let mut rng = rdmc_core::rng::substream(seed, 0);
        use rand::Rng;
        let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..3.0)).collect();
        let what: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let t = DpTerms::new(&w, &what, &lambda).unwrap();
        prop_assert_eq!(dp_term(&t, 0), 0.0);
        let c: f64 = (0..m).map(|i| lambda[i] * (w[i] - what[i]) * (w[i] - what[i])).sum();
        prop_assert!((dp_term(&t, 1) - c).abs() <= 1e-9 * c.max(1.0));
    }

    #[test]
    fn singleton_codebook_roundtrip_reproduces_weights(
        mut w in weight_vec(1..8),
    ) {
        w.sort_by(f64::total_cmp);
        w.dedup();
        let m = w.len();
        let imp = ImportanceDiag::baseline(m);
        let cb = weighted_kmeans(&w, &imp, m, 50, 0).unwrap();
        let what = apply_codebook(&w, &cb).unwrap();
        let mut sorted = what.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(&sorted, &w);
        prop_assert_eq!(what, w);
    }
}
