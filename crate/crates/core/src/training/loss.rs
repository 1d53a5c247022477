use crate::error::Result;
use crate::numerics::{Scalar, Tensor};

/// Squared error summed over valid frames and all channels, divided by
/// `valid_frames × channels`. The mask has one entry per frame.
pub fn masked_mse<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, mask: &[bool]) -> Result<T> {
    crate::numerics::tape_masked_residual(pred, target, mask).map(|(loss, _, _)| loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn examples() {
        let t = Tensor::from_fn(&[2, 3, 12], |i| i as f64 * 0.1);
        let mask = [true, true, false, true, false, false];
        assert_eq!(masked_mse(&t, &t, &mask).unwrap(), 0.0);

        let mut p = Tensor::<f64>::zeros(&[1, 1, 12]);
        p.data_mut()[0] = 1.0;
        let z = Tensor::zeros(&[1, 1, 12]);
        assert!((masked_mse(&p, &z, &[true]).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(matches!(masked_mse(&p, &z, &[false]), Err(Error::DegenerateBatch)));
    }

    #[test]
    fn appended_padding_does_not_change_loss() {
        let p = Tensor::from_fn(&[1, 4, 12], |i| (i as f64).sin());
        let t = Tensor::from_fn(&[1, 4, 12], |i| (i as f64).cos());
        let base = masked_mse(&p, &t, &[true; 4]).unwrap();
        let mut pp = p.data().to_vec();
        pp.extend(std::iter::repeat_n(9.0, 24));
        let mut tt = t.data().to_vec();
        tt.extend(std::iter::repeat_n(-9.0, 24));
        let padded = masked_mse(
            &Tensor::new(vec![1, 6, 12], pp).unwrap(),
            &Tensor::new(vec![1, 6, 12], tt).unwrap(),
            &[true, true, true, true, false, false],
        )
        .unwrap();
        assert_eq!(base, padded);
    }
}
