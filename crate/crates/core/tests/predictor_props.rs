//! Property tests for patch extraction and the training losses.

use chansynth_core::predictor::{extract_patches, gan_loss, l1_loss};
use chansynth_core::AnalysisStack;
use proptest::prelude::*;

fn vec_pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0..1.0_f64, n),
            prop::collection::vec(-1.0..1.0_f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l1_is_nonnegative_and_zero_only_on_equal_inputs((a, b) in vec_pair(24)) {
        let loss = l1_loss(&a, &b).unwrap();
        prop_assert!(loss >= 0.0);
        if loss == 0.0 {
            prop_assert_eq!(&a, &b);
        }
        prop_assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn l1_is_symmetric((a, b) in vec_pair(24)) {
        prop_assert_eq!(
            l1_loss(&a, &b).unwrap().to_bits(),
            l1_loss(&b, &a).unwrap().to_bits()
        );
    }

    #[test]
    fn gan_scores_stay_inside_the_clamped_range(
        real in prop::collection::vec(0.0..=1.0_f64, 1..16),
        fake in prop::collection::vec(0.0..=1.0_f64, 1..16),
    ) {
        let v = gan_loss(&real, &fake).unwrap();
        prop_assert!(v < 0.0);
        prop_assert!(v >= 2.0 * 1e-7_f64.ln());
    }

    #[test]
    fn patch_rows_cover_exactly_the_strided_center_grid(
        h in 5..=12_usize,
        w in 5..=12_usize,
        r in 0..=2_usize,
        stride in 1..=3_usize,
    ) {
        let names = vec!["a".to_string(), "b".to_string()];
        let data: Vec<f64> = (0..2 * h * w).map(|i| (i as f64 * 0.037).fract()).collect();
        let stack = AnalysisStack::new(h, w, names, data).unwrap();
        let d = extract_patches(&stack, &[0], &[1], r, stride).unwrap();
        let side = 2 * r + 1;
        prop_assert_eq!(d.feature_dim(), side * side);
        let rows = (h - 2 * r).div_ceil(stride) * (w - 2 * r).div_ceil(stride);
        prop_assert_eq!(d.len(), rows);
    }
}
