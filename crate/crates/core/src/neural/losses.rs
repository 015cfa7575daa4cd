//! Scalar losses with their gradients.

use super::{NeuralError, Tensor};
use crate::scalar::{cast, Scalar};

fn check_pair<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(), NeuralError> {
    if pred.shape() != target.shape() {
        return Err(NeuralError::ShapeMismatch(format!(
            "loss shapes {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.is_empty() {
        return Err(NeuralError::ShapeMismatch("empty loss input".into()));
    }
    Ok(())
}

/// Mean absolute error and its gradient with respect to `pred`.
///
/// The subgradient at an exact tie is zero.
pub fn l1_loss<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<(T, Tensor<T>), NeuralError> {
    check_pair(pred, target)?;
    let n = cast::<T>(pred.len() as f64);
    let mut grad = Tensor::zeros(pred.shape());
    let mut total = T::zero();
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = *p - *t;
        total += d.abs();
        *g = if d > T::zero() {
            T::one() / n
        } else if d < T::zero() {
            -T::one() / n
        } else {
            T::zero()
        };
    }
    Ok((total / n, grad))
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn l2_loss<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<(T, Tensor<T>), NeuralError> {
    check_pair(pred, target)?;
    let n = cast::<T>(pred.len() as f64);
    let two = cast::<T>(2.0);
    let mut grad = Tensor::zeros(pred.shape());
    let mut total = T::zero();
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = *p - *t;
        total += d * d;
        *g = two * d / n;
    }
    Ok((total / n, grad))
}

/// KL divergence of diagonal Gaussians N(mu, sigma^2) from the standard
/// normal, averaged over the batch, with gradients for `mu` and `log_var`.
///
/// Per element: 0.5 * (exp(log_var) + mu^2 - 1 - log_var). Nonnegative by
/// construction and zero exactly at mu = 0, log_var = 0.
pub fn kl_std_normal<T: Scalar>(
    mu: &Tensor<T>,
    log_var: &Tensor<T>,
) -> Result<(T, Tensor<T>, Tensor<T>), NeuralError> {
    check_pair(mu, log_var)?;
    let batch = cast::<T>(mu.shape()[0] as f64);
    let half = cast::<T>(0.5);
    let mut grad_mu = Tensor::zeros(mu.shape());
    let mut grad_lv = Tensor::zeros(log_var.shape());
    let mut total = T::zero();
    for i in 0..mu.len() {
        let m = mu.data()[i];
        let lv = log_var.data()[i];
        let ev = lv.exp();
        total += half * (ev + m * m - T::one() - lv);
        grad_mu.data_mut()[i] = m / batch;
        grad_lv.data_mut()[i] = half * (ev - T::one()) / batch;
    }
    Ok((total / batch, grad_mu, grad_lv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], seed: u64, scale: f64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = shape.iter().product();
        Tensor::new(
            shape.to_vec(),
            (0..n).map(|_| rng.gen_range(-scale..=scale)).collect(),
        )
        .unwrap()
    }

    fn fd_check<F>(f: F, at: &Tensor<f64>, analytic: &Tensor<f64>)
    where
        F: Fn(&Tensor<f64>) -> f64,
    {
        let h = 1e-6;
        let mut x = at.clone();
        for i in 0..x.len() {
            let old = x.data()[i];
            x.data_mut()[i] = old + h;
            let plus = f(&x);
            x.data_mut()[i] = old - h;
            let minus = f(&x);
            x.data_mut()[i] = old;
            let fd = (plus - minus) / (2.0 * h);
            assert!(
                (fd - analytic.data()[i]).abs() < 1e-6,
                "grad[{i}]: fd {fd} vs {}",
                analytic.data()[i]
            );
        }
    }

    #[test]
    fn l1_value_and_gradient() {
        let p = Tensor::new(vec![2, 2], vec![1.0f64, -2.0, 0.5, 3.0]).unwrap();
        let t = Tensor::new(vec![2, 2], vec![0.0f64, -2.0, 1.5, 1.0]).unwrap();
        let (loss, grad) = l1_loss(&p, &t).unwrap();
        // |1| + |0| + |-1| + |2| over 4 values
        assert!((loss - 1.0).abs() < 1e-12);
        assert_eq!(grad.data(), &[0.25, 0.0, -0.25, 0.25]);
    }

    #[test]
    fn l2_value_and_gradient_match_fd() {
        let p = rand_tensor(&[3, 4], 1, 2.0);
        let t = rand_tensor(&[3, 4], 2, 2.0);
        let (loss, grad) = l2_loss(&p, &t).unwrap();
        let direct: f64 = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / 12.0;
        assert!((loss - direct).abs() < 1e-12);
        fd_check(|x| l2_loss(x, &t).unwrap().0, &p, &grad);
    }

    #[test]
    fn l1_gradient_matches_fd_off_ties() {
        let p = rand_tensor(&[2, 5], 3, 2.0);
        let t = rand_tensor(&[2, 5], 4, 2.0);
        // Random draws never tie exactly, so the subgradient is smooth here.
        let (_, grad) = l1_loss(&p, &t).unwrap();
        fd_check(|x| l1_loss(x, &t).unwrap().0, &p, &grad);
    }

    #[test]
    fn kl_is_nonnegative_and_zero_at_standard_normal() {
        let mu = Tensor::zeros(&[4, 8]);
        let lv = Tensor::zeros(&[4, 8]);
        let (kl, _, _) = kl_std_normal::<f64>(&mu, &lv).unwrap();
        assert_eq!(kl, 0.0);
        for seed in 0..20 {
            let mu = rand_tensor(&[4, 8], seed, 3.0);
            let lv = rand_tensor(&[4, 8], seed + 100, 3.0);
            let (kl, _, _) = kl_std_normal(&mu, &lv).unwrap();
            assert!(kl >= 0.0, "kl {kl} at seed {seed}");
        }
    }

    #[test]
    fn kl_gradients_match_fd() {
        let mu = rand_tensor(&[3, 5], 7, 1.5);
        let lv = rand_tensor(&[3, 5], 8, 1.5);
        let (_, gm, gl) = kl_std_normal(&mu, &lv).unwrap();
        fd_check(|x| kl_std_normal(x, &lv).unwrap().0, &mu, &gm);
        fd_check(|x| kl_std_normal(&mu, x).unwrap().0, &lv, &gl);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::<f64>::zeros(&[3, 2]);
        assert!(l1_loss(&a, &b).is_err());
        assert!(l2_loss(&a, &b).is_err());
        assert!(kl_std_normal(&a, &b).is_err());
    }
}
