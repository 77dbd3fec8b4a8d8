//! Property tests over randomized inputs.

use proptest::prelude::*;
use retro3d_tensor::{backward, scope, watch, Tensor};

proptest! {
    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..6,
        cols in 1usize..8,
        seedval in -20.0f64..20.0,
    ) {
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| (i as f64 * 0.731 + seedval).sin() * seedval)
            .collect();
        let x = Tensor::from_vec(vec![rows, cols], data).unwrap();
        let s = x.softmax_lastdim().unwrap();
        for r in 0..rows {
            let row = &s.data()[r * cols..(r + 1) * cols];
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn dropout_is_seed_deterministic(seed in any::<u64>(), rate in 0.0f64..0.9) {
        let x = Tensor::from_vec(vec![32], (0..32).map(|i| i as f64 + 1.0).collect()).unwrap();
        let a = x.dropout(rate, seed).unwrap();
        let b = x.dropout(rate, seed).unwrap();
        prop_assert_eq!(a.data(), b.data());
        if rate == 0.0 {
            prop_assert_eq!(a.data(), x.data());
        }
    }

    #[test]
    fn kl_is_symmetric_and_nonnegative(
        a in prop::collection::vec(-4.0f64..4.0, 6),
        b in prop::collection::vec(-4.0f64..4.0, 6),
    ) {
        let ta = Tensor::from_vec(vec![2, 3], a).unwrap();
        let tb = Tensor::from_vec(vec![2, 3], b).unwrap();
        let ab = ta.kl_divergence(&tb).unwrap().item().unwrap();
        let ba = tb.kl_divergence(&ta).unwrap().item().unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn backward_replay_identical(vals in prop::collection::vec(-2.0f64..2.0, 8)) {
        let x = Tensor::from_vec(vec![2, 4], vals).unwrap();
        scope(|| {
            let xw = watch(&x);
            let y = xw.gelu().unwrap().softmax_lastdim().unwrap();
            let loss = y.mul(&xw).unwrap().sum().unwrap();
            let g1 = backward(&loss).unwrap().get(&xw).unwrap().to_vec();
            let g2 = backward(&loss).unwrap().get(&xw).unwrap().to_vec();
            assert_eq!(g1, g2);
        });
    }
}
