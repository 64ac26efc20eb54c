use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update on `ids`, followed by clearing their
/// gradients. Every listed parameter must hold a gradient.
pub fn adam_step<T: Real>(
    store: &mut ParamStore<T>,
    ids: &[ParamId],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if let Some(&missing) = ids.iter().find(|&&id| store.get(id).grad.is_none()) {
        return Err(Error::MissingGradient(store.get(missing).name.clone()));
    }
    let (b1, b2) = (T::from_f64(beta1), T::from_f64(beta2));
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let eps_t = T::from_f64(eps);
    for &id in ids {
        let p = store.get_mut(id);
        p.step_count += 1;
        let correction1 = T::from_f64(1.0 - libm::pow(beta1, p.step_count as f64));
        let correction2 = T::from_f64(1.0 - libm::pow(beta2, p.step_count as f64));
        let step = T::from_f64(lr) / correction1;
        let sqrt_c2 = correction2.sqrt();
        let grad = p.grad.take().expect("checked above");
        for (((w, &g), m), v) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(&grad)
            .zip(p.first_moment.iter_mut())
            .zip(p.second_moment.iter_mut())
        {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            *w -= step * *m / (v.sqrt() / sqrt_c2 + eps_t);
        }
    }
    Ok(())
}

impl AdamConfig {
    pub fn step<T: Real>(&self, store: &mut ParamStore<T>, ids: &[ParamId], lr: f64) -> Result<()> {
        adam_step(store, ids, lr, self.beta1, self.beta2, self.eps)
    }
}

/// Learning-rate multiplier: constant for the first half of `epochs`, then
/// linear decay that would reach zero one epoch past the end.
pub fn lr_factor(epoch: usize, epochs: usize) -> f64 {
    let hold = epochs / 2;
    if epoch < hold {
        1.0
    } else {
        let span = (epochs - hold) as f64;
        ((epochs - epoch) as f64 / span).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn single(value: f64) -> (ParamStore<f64>, ParamId) {
        let mut store = ParamStore::new();
        let id = store.add("theta", Tensor::scalar(value)).unwrap();
        (store, id)
    }

    #[test]
    fn zero_gradient_leaves_value() {
        let (mut store, id) = single(3.0);
        store.zero_grad(&[id]);
        adam_step(&mut store, &[id], 0.1, 0.9, 0.999, 1e-8).unwrap();
        assert_eq!(store.get(id).value.data()[0], 3.0);
        assert_eq!(store.get(id).step_count, 1);
        assert!(store.get(id).grad.is_none());
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut store, id) = single(0.0);
        store.get_mut(id).accumulate_grad(&[1.0]);
        adam_step(&mut store, &[id], 0.1, 0.9, 0.999, 1e-8).unwrap();
        let delta = store.get(id).value.data()[0];
        assert!((delta + 0.1).abs() < 1e-6, "delta {delta}");
    }

    #[test]
    fn missing_gradient_names_parameter() {
        let (mut store, id) = single(0.0);
        let err = adam_step(&mut store, &[id], 0.1, 0.9, 0.999, 1e-8).unwrap_err();
        assert_eq!(err, Error::MissingGradient("theta".into()));
    }

    #[test]
    fn converges_on_quadratic() {
        // f(θ) = (θ - 2)^2, gradient 2(θ - 2)
        let (mut store, id) = single(-1.0);
        let mut steps = 0;
        while steps < 500 {
            let theta = store.get(id).value.data()[0];
            if (theta - 2.0).abs() < 1e-3 {
                break;
            }
            store.get_mut(id).accumulate_grad(&[2.0 * (theta - 2.0)]);
            adam_step(&mut store, &[id], 0.1, 0.9, 0.999, 1e-8).unwrap();
            steps += 1;
        }
        let theta = store.get(id).value.data()[0];
        assert!((theta - 2.0).abs() < 1e-3, "θ = {theta} after {steps} steps");
    }

    #[test]
    fn schedule_holds_then_decays() {
        assert_eq!(lr_factor(0, 200), 1.0);
        assert_eq!(lr_factor(99, 200), 1.0);
        assert_eq!(lr_factor(100, 200), 1.0);
        assert!((lr_factor(150, 200) - 0.5).abs() < 1e-12);
        assert!((lr_factor(199, 200) - 0.01).abs() < 1e-12);
        assert_eq!(lr_factor(0, 1), 1.0);
    }
}
