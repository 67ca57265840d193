use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqrec::layers::layer_norm;
use seqrec::numkernel::softmax;

#[test]
fn layer_norm_output_has_zero_mean_unit_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 100;
    let (gain, bias) = (vec![1.0f64; n], vec![0.0f64; n]);
    for _ in 0..1000 {
        let scale = rng.random_range(0.5..20.0);
        let shift = rng.random_range(-10.0..10.0);
        let h: Vec<f64> = (0..n).map(|_| shift + scale * rng.random_range(-1.0..1.0)).collect();
        let y = layer_norm(&h, &gain, &bias, 1e-5).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-6, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-3, "variance {var}");
    }
}

proptest! {
    #[test]
    fn softmax_is_shift_invariant(xs in prop::collection::vec(-30.0f64..30.0, 1..50), c in -100.0f64..100.0) {
        let a = softmax(&xs);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let b = softmax(&shifted);
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_permutation_equivariant(xs in prop::collection::vec(-30.0f64..30.0, 2..30), rot in 0usize..30) {
        let r = rot % xs.len();
        let mut rotated = xs.clone();
        rotated.rotate_left(r);
        let mut a = softmax(&xs);
        a.rotate_left(r);
        for (p, q) in a.iter().zip(softmax(&rotated)) {
            prop_assert!((p - q).abs() <= 1e-13 * p.max(q));
        }
    }

    #[test]
    fn layer_norm_ignores_affine_input_changes(
        xs in prop::collection::vec(-5.0f64..5.0, 3..40),
        scale in 1.0f64..10.0,
        shift in -10.0f64..10.0,
    ) {
        let n = xs.len();
        let spread = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 0.5);
        let ones = vec![1.0; n];
        let zeros = vec![0.0; n];
        let a = layer_norm(&xs, &ones, &zeros, 0.0).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let b = layer_norm(&moved, &ones, &zeros, 0.0).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }
}
