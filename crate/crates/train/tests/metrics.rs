use proptest::prelude::*;
use sigt_tensor::{Tape, Tensor};
use sigt_train::{aacc, mse_loss, TrainError};

fn loss_of(x_hat: Vec<f64>, x: Vec<f64>, shape: Vec<usize>) -> f64 {
    let tape = Tape::new();
    let a = tape.constant(Tensor::new(shape.clone(), x_hat).unwrap());
    let b = tape.constant(Tensor::new(shape, x).unwrap());
    tape.value(mse_loss(&tape, a, b).unwrap()).item()
}

#[test]
fn mse_of_exact_prediction_is_zero() {
    let x = vec![0.0, 1.0, 1.0, 0.0];
    assert_eq!(loss_of(x.clone(), x, vec![1, 2, 1, 2]), 0.0);
}

#[test]
fn mse_of_constant_half_is_quarter() {
    let n = 2048;
    let x: Vec<f64> = (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let l = loss_of(vec![0.5; n], x, vec![2, 256, 2, 2]);
    assert!((l - 0.25).abs() < 1e-15);
}

#[test]
fn mse_averages_over_batch_and_bits() {
    // per-sample losses 1.0 and 0.0 -> 0.5
    let l = loss_of(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0, 1.0], vec![2, 1, 1, 2]);
    assert!((l - 0.5).abs() < 1e-15);
}

#[test]
fn mse_rejects_shape_mismatch() {
    let tape = Tape::new();
    let a = tape.constant(Tensor::zeros(vec![1, 2, 1, 2]));
    let b = tape.constant(Tensor::zeros(vec![1, 1, 2, 2]));
    assert!(mse_loss(&tape, a, b).is_err());
}

#[test]
fn aacc_examples() {
    assert_eq!(aacc(&[1.0, 0.0, 1.0, 1.0], &[1.0, 0.0, 1.0, 1.0]).unwrap(), 1.0);
    assert_eq!(aacc(&[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 1.0, 1.0]).unwrap(), 0.0);
    assert_eq!(aacc(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0, 1.0, 1.0]).unwrap(), 0.75);
}

#[test]
fn aacc_rejects_bad_input() {
    assert!(matches!(
        aacc(&[0.5, 1.0], &[1.0, 1.0]),
        Err(TrainError::NonBinary { index: 0, .. })
    ));
    assert!(aacc(&[1.0], &[1.0, 0.0]).is_err());
    assert!(aacc(&[], &[]).is_err());
}

proptest! {
    #[test]
    fn aacc_is_permutation_invariant(
        pairs in prop::collection::vec((0u8..2, 0u8..2), 1..200),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let mut perm: Vec<usize> = (0..pairs.len()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let pa: Vec<f64> = perm.iter().map(|&i| a[i]).collect();
        let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        prop_assert_eq!(aacc(&a, &b).unwrap(), aacc(&pa, &pb).unwrap());
        let errs = pairs.iter().filter(|p| p.0 != p.1).count();
        prop_assert!((aacc(&a, &b).unwrap() - (1.0 - errs as f64 / pairs.len() as f64)).abs() < 1e-15);
    }
}
