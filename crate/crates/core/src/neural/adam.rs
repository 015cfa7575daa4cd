//! Adam optimizer over a fixed list of parameter tensors.

use super::{NeuralError, Tensor};
use crate::scalar::{cast, Scalar};

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

/// First and second moment accumulators, one pair per parameter tensor.
/// The tensor list order must stay fixed across steps.
pub struct AdamState<T> {
    config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, shapes: &[&[usize]]) -> Self {
        AdamState {
            config,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            t: 0,
        }
    }

    pub fn for_tensors(config: AdamConfig, tensors: &[&Tensor<T>]) -> Self {
        let shapes: Vec<&[usize]> = tensors.iter().map(|t| t.shape()).collect();
        Self::new(config, &shapes)
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update. `params` and `grads` must match the
    /// shapes the state was built with, in the same order.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[&Tensor<T>],
    ) -> Result<(), NeuralError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "adam state holds {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let b1 = cast::<T>(self.config.beta1);
        let b2 = cast::<T>(self.config.beta2);
        let one = T::one();
        let lr = cast::<T>(self.config.learning_rate);
        let eps = cast::<T>(self.config.epsilon);
        let corr1 = cast::<T>(1.0 - self.config.beta1.powi(self.t as i32));
        let corr2 = cast::<T>(1.0 - self.config.beta2.powi(self.t as i32));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(NeuralError::ShapeMismatch(format!(
                    "adam tensor shapes diverged: param {:?}, grad {:?}, state {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
            if !g.all_finite() {
                return Err(NeuralError::NonFinite("adam gradient"));
            }
            for ((pv, gv), (mv, vv)) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut()))
            {
                *mv = b1 * *mv + (one - b1) * *gv;
                *vv = b2 * *vv + (one - b2) * *gv * *gv;
                let m_hat = *mv / corr1;
                let v_hat = *vv / corr2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate_over_one_plus_eps() {
        // With m_hat = g and v_hat = g^2 after bias correction, the first
        // update is lr * g / (|g| + eps), i.e. almost exactly lr * sign(g).
        let lr = 1e-3;
        let mut p = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = Tensor::new(vec![3], vec![0.4, -0.2, 3.0]).unwrap();
        let mut state = AdamState::for_tensors(AdamConfig::with_learning_rate(lr), &[&p]);
        let before = p.data().to_vec();
        state.step(&mut [&mut p], &[&g]).unwrap();
        for ((new, old), gv) in p.data().iter().zip(&before).zip(g.data()) {
            let expected = old - lr * gv / (gv.abs() + 1e-8);
            assert!((new - expected).abs() < 1e-12);
        }
        assert_eq!(state.steps_taken(), 1);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // Minimize 0.5 * x^2; gradient is x itself.
        let mut p = Tensor::new(vec![2], vec![5.0f64, -3.0]).unwrap();
        let mut state = AdamState::for_tensors(AdamConfig::with_learning_rate(0.05), &[&p]);
        for _ in 0..2000 {
            let g = p.clone();
            state.step(&mut [&mut p], &[&g]).unwrap();
        }
        for v in p.data() {
            assert!(v.abs() < 1e-2, "did not converge: {v}");
        }
    }

    #[test]
    fn moments_depend_on_history() {
        // Two identical gradients applied to fresh versus warmed state must
        // produce different updates, proving moments persist.
        let g = Tensor::new(vec![1], vec![1.0f64]).unwrap();
        let mut p1 = Tensor::new(vec![1], vec![0.0f64]).unwrap();
        let mut fresh = AdamState::for_tensors(AdamConfig::default(), &[&p1]);
        fresh.step(&mut [&mut p1], &[&g]).unwrap();
        let first_move = p1.data()[0];

        let mut p2 = Tensor::new(vec![1], vec![0.0]).unwrap();
        let neg = Tensor::new(vec![1], vec![-1.0]).unwrap();
        let mut warmed = AdamState::for_tensors(AdamConfig::default(), &[&p2]);
        warmed.step(&mut [&mut p2], &[&neg]).unwrap();
        let at = p2.data()[0];
        warmed.step(&mut [&mut p2], &[&g]).unwrap();
        let second_move = p2.data()[0] - at;
        assert!((second_move - first_move).abs() > 1e-9);
    }

    #[test]
    fn mismatched_tensor_count_is_rejected() {
        let mut p = Tensor::<f64>::zeros(&[2]);
        let g = Tensor::<f64>::zeros(&[2]);
        let mut state = AdamState::for_tensors(AdamConfig::default(), &[&p]);
        assert!(state.step(&mut [&mut p], &[&g, &g]).is_err());
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = Tensor::<f64>::zeros(&[1]);
        let g = Tensor::new(vec![1], vec![f64::INFINITY]).unwrap();
        let mut state = AdamState::for_tensors(AdamConfig::default(), &[&p]);
        assert!(matches!(
            state.step(&mut [&mut p], &[&g]),
            Err(NeuralError::NonFinite(_))
        ));
    }
}
