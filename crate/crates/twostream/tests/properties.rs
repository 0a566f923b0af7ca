use proptest::prelude::*;
use taxel_nn::{Network, Tensor};
use taxel_twostream::arch::{classifier, fusion_gate};
use taxel_twostream::{attention_fuse, classify, FEATURE_DIM};

fn feature() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, FEATURE_DIM)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fusion_is_componentwise_convex(g in feature(), f in feature(), seed in 0u64..50) {
        let gate = Network::new(fusion_gate(), seed).unwrap();
        let (joint, w) = attention_fuse(&gate, &Tensor::from_vec(g.clone()), &Tensor::from_vec(f.clone())).unwrap();
        for i in 0..FEATURE_DIM {
            prop_assert!(w.data()[i] > 0.0 && w.data()[i] < 1.0);
            let (lo, hi) = (g[i].min(f[i]), g[i].max(f[i]));
            prop_assert!(joint.data()[i] >= lo - 1e-12 && joint.data()[i] <= hi + 1e-12);
        }
    }

    #[test]
    fn head_probabilities_follow_class_order(joint in feature(), seed in 0u64..50, shift in 0usize..5) {
        let head = Network::new(classifier(5).unwrap(), seed).unwrap();
        let p = classify(&head, &Tensor::from_vec(joint.clone())).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // rotate the output rows of the last dense layer
        let mut params = head.params().to_vec();
        let (w, b) = (params[2].clone(), params[3].clone());
        for c in 0..5 {
            let src = (c + shift) % 5;
            params[2].data_mut()[c * 64..(c + 1) * 64].copy_from_slice(&w.data()[src * 64..(src + 1) * 64]);
            params[3].data_mut()[c] = b.data()[src];
        }
        let rotated = Network::from_params(head.spec().clone(), params).unwrap();
        let q = classify(&rotated, &Tensor::from_vec(joint)).unwrap();
        for c in 0..5 {
            prop_assert!((q[c] - p[(c + shift) % 5]).abs() < 1e-15);
        }
    }

    #[test]
    fn argmax_ignores_logit_offset(joint in feature(), offset in -20.0f64..20.0) {
        let head = Network::new(classifier(4).unwrap(), 3).unwrap();
        let mut params = head.params().to_vec();
        let base = classify(&head, &Tensor::from_vec(joint.clone())).unwrap();
        params[3].data_mut().iter_mut().for_each(|b| *b += offset);
        let shifted = Network::from_params(head.spec().clone(), params).unwrap();
        let moved = classify(&shifted, &Tensor::from_vec(joint)).unwrap();
        let argmax = |p: &[f64]| Tensor::from_vec(p.to_vec()).argmax();
        prop_assert_eq!(argmax(&base), argmax(&moved));
    }
}
