use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxel_core::mechanics::{
    infer_stiffness, object_stiffness, series_stiffness, synth_force_sequence, PressTrajectory, SpringModel,
};

fn press(k1: f64, k2: f64, v: f64) -> (SpringModel, PressTrajectory) {
    (SpringModel::new(k1, k2).unwrap(), PressTrajectory::to_depth(v, 0.05, 2.0).unwrap())
}

/// Relative error of `infer_stiffness` over seeded draws of `(k1, k2, v)`.
fn round_trip_errors(draws: usize, noise: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws)
        .map(|i| {
            let (k1, k2, v) = (rng.random_range(2.0..16.0), rng.random_range(6.0..24.0), rng.random_range(0.25..1.0));
            let (model, traj) = press(k1, k2, v);
            let seq = synth_force_sequence(&model, &traj).with_noise(noise, seed + i as u64).unwrap();
            (infer_stiffness(&seq, v, k2).unwrap() - k1).abs() / k1
        })
        .collect()
}

#[test]
fn noise_free_records_invert_exactly() {
    let worst = round_trip_errors(100, 0.0, 9).into_iter().fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn one_percent_force_noise_stays_within_ten_percent() {
    let worst = round_trip_errors(100, 0.01, 10).into_iter().fold(0.0, f64::max);
    assert!(worst < 0.1, "{worst}");
}

proptest! {
    #[test]
    fn series_then_object_is_identity(k1 in 0.1f64..100.0, k2 in 0.1f64..100.0) {
        let k = series_stiffness(&[k1, k2]).unwrap();
        let back = object_stiffness(k, k2).unwrap();
        prop_assert!((back - k1).abs() / k1 < 1e-9);
    }

    #[test]
    fn series_stiffness_is_bounded_by_the_softest(ks in prop::collection::vec(0.1f64..50.0, 1..6), extra in 0.1f64..50.0) {
        let k = series_stiffness(&ks).unwrap();
        let min = ks.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(k <= min * (1.0 + 1e-12));
        let mut rev = ks.clone();
        rev.reverse();
        prop_assert!((series_stiffness(&rev).unwrap() - k).abs() <= 1e-12 * k);
        let mut more = ks.clone();
        more.push(extra);
        prop_assert!(series_stiffness(&more).unwrap() <= k);
    }

    #[test]
    fn softer_objects_press_with_less_force(k1 in 0.5f64..20.0, soften in 0.05f64..0.95, k2 in 1.0f64..30.0, v in 0.1f64..2.0) {
        let (hard, traj) = press(k1, k2, v);
        let soft = SpringModel::new(k1 * soften, k2).unwrap();
        let f_hard = synth_force_sequence(&hard, &traj);
        let f_soft = synth_force_sequence(&soft, &traj);
        prop_assert!(f_hard.forces().windows(2).all(|w| w[1] >= w[0]));
        for (s, h) in f_soft.forces().iter().zip(f_hard.forces()).skip(1) {
            prop_assert!(s < h);
        }
    }
}
