//! Dense tensors, a reverse-mode tape, Adam, and finite-difference checks.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::finite_diff_check;
pub use tape::{log_sum_exp, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("index {index} out of range for size {bound}")]
    Index { index: usize, bound: usize },
    #[error("every target position is ignored")]
    AllIgnored,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Row-wise softmax of a matrix.
pub fn softmax_rows(t: &Tensor) -> Result<Tensor, NumericsError> {
    if t.shape().len() != 2 {
        return Err(NumericsError::Dimension("softmax_rows needs a matrix".into()));
    }
    Tensor::matrix(t.rows(), t.cols(), tape::softmax_rows(t.values(), t.cols()))
}

/// Mean negative log-probability of `targets` (one per row of `logits`),
/// skipping positions equal to `ignore_index`.
pub fn cross_entropy(
    logits: &Tensor,
    targets: &[usize],
    ignore_index: usize,
) -> Result<Tensor, NumericsError> {
    let mut tape = Tape::new();
    let l = tape.constant(logits.clone())?;
    let loss = tape.cross_entropy(l, targets, ignore_index)?;
    Ok(tape.value(loss).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_softmax() {
        let t = Tensor::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert_eq!(softmax_rows(&t).unwrap().values(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_matches_definition() {
        let t = Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|x| x.exp()).sum();
        let out = softmax_rows(&t).unwrap();
        for (i, x) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((out.values()[i] - x.exp() / z).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let t = Tensor::from_rows(&[vec![1000.0, 1000.0, -1000.0]]).unwrap();
        let out = softmax_rows(&t).unwrap();
        assert!(out.is_finite());
        assert!((out.values()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_of_certain_prediction_is_zero() {
        let logits = Tensor::from_rows(&[vec![0.0, 800.0, 0.0], vec![900.0, 0.0, 0.0]]).unwrap();
        let l = cross_entropy(&logits, &[1, 0], 99).unwrap();
        assert_eq!(l.item(), 0.0);
    }

    #[test]
    fn cross_entropy_uniform_is_log_vocab() {
        let logits = Tensor::zeros(4, 7);
        let l = cross_entropy(&logits, &[0, 3, 6, 2], 99).unwrap();
        assert!((l.item() - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_matches_hand_log_softmax() {
        // Fixed 3x5 logits; expected value computed directly from the
        // definition -log(exp(l_t) / sum_j exp(l_j)), averaged.
        let rows: Vec<Vec<f64>> = vec![
            vec![0.2, -1.3, 0.7, 2.1, -0.4],
            vec![1.5, 0.0, -0.6, 0.3, 0.9],
            vec![-2.0, 0.4, 0.4, 1.1, -0.2],
        ];
        let targets = [3usize, 4, 0];
        let mut expect = 0.0;
        for (r, &t) in rows.iter().zip(&targets) {
            let z: f64 = r.iter().map(|x| x.exp()).sum();
            expect -= (r[t].exp() / z).ln();
        }
        expect /= 3.0;
        let got = cross_entropy(&Tensor::from_rows(&rows).unwrap(), &targets, 99).unwrap();
        assert!((got.item() - expect).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_errors() {
        let logits = Tensor::zeros(2, 3);
        assert!(matches!(
            cross_entropy(&logits, &[0, 5], 99),
            Err(NumericsError::Index { .. })
        ));
        assert_eq!(
            cross_entropy(&logits, &[0, 0], 0).unwrap_err(),
            NumericsError::AllIgnored
        );
        // ignored positions do not count toward the mean
        let l = cross_entropy(&logits, &[0, 7], 7).unwrap();
        assert!((l.item() - 3f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(
            vals in proptest::collection::vec(-50.0f64..50.0, 12),
            shift in -100.0f64..100.0,
        ) {
            let t = Tensor::matrix(3, 4, vals.clone()).unwrap();
            let s = softmax_rows(&t).unwrap();
            for r in 0..3 {
                let sum: f64 = s.row(r).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(s.row(r).iter().all(|&p| p >= 0.0));
            }
            let shifted = Tensor::matrix(3, 4, vals.iter().map(|v| v + shift).collect()).unwrap();
            let s2 = softmax_rows(&shifted).unwrap();
            for (a, b) in s.values().iter().zip(s2.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cross_entropy_nonnegative(
            vals in proptest::collection::vec(-20.0f64..20.0, 10),
            t0 in 0usize..5, t1 in 0usize..5,
        ) {
            let logits = Tensor::matrix(2, 5, vals).unwrap();
            let l = cross_entropy(&logits, &[t0, t1], 99).unwrap();
            prop_assert!(l.item() >= 0.0);
        }
    }
}
