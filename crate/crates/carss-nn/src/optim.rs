//! Adam with bias correction, plus global-norm gradient clipping.

use crate::params::ParamSet;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::collections::BTreeMap;

/// Named gradients (and Adam moments), keyed like [`ParamSet`].
pub type GradMap<T> = BTreeMap<String, Tensor<T>>;

#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: BTreeMap<String, Tensor<T>>,
    v: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One bias-corrected update; gradients absent from `grads` are treated
    /// as zero. Moments are created lazily with the parameter's shape.
    pub fn apply(&mut self, params: &mut ParamSet<T>, grads: &BTreeMap<String, Tensor<T>>) {
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one_m_b1 = T::from_f64(1.0 - self.beta1);
        let one_m_b2 = T::from_f64(1.0 - self.beta2);
        let corr1 = T::from_f64(1.0 / (1.0 - self.beta1.powi(self.step as i32)));
        let corr2 = T::from_f64(1.0 / (1.0 - self.beta2.powi(self.step as i32)));
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(self.eps);

        for (name, p) in params.iter_mut() {
            let (rows, cols) = p.shape();
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(rows, cols));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(rows, cols));
            let zero;
            let g = match grads.get(name) {
                Some(g) => g,
                None => {
                    zero = Tensor::zeros(rows, cols);
                    &zero
                }
            };
            for i in 0..p.data().len() {
                let gi = g.data()[i];
                let mi = b1 * m.data()[i] + one_m_b1 * gi;
                let vi = b2 * v.data()[i] + one_m_b2 * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let mhat = mi * corr1;
                let vhat = vi * corr2;
                p.data_mut()[i] = p.data()[i] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }

    pub fn moments(&self) -> (&GradMap<T>, &GradMap<T>) {
        (&self.m, &self.v)
    }

    pub fn set_moments(
        &mut self,
        m: BTreeMap<String, Tensor<T>>,
        v: BTreeMap<String, Tensor<T>>,
    ) {
        self.m = m;
        self.v = v;
    }
}

/// Euclidean norm over a whole gradient map.
pub fn global_norm<T: Scalar>(grads: &BTreeMap<String, Tensor<T>>) -> f64 {
    grads
        .values()
        .map(|g| g.frobenius_sq())
        .sum::<f64>()
        .sqrt()
}

/// Scale gradients in place so their global norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<T: Scalar>(
    grads: &mut BTreeMap<String, Tensor<T>>,
    max_norm: f64,
) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let k = T::from_f64(max_norm / norm);
        for g in grads.values_mut() {
            for v in g.data_mut() {
                *v = *v * k;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = ParamSet::<f64>::new();
        params.insert("w", Tensor::from_vec(1, 3, vec![1.0, -2.0, 0.5]).unwrap());
        let before = params.get("w").unwrap().clone();
        let mut adam = AdamState::new(1e-2);
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), Tensor::zeros(1, 3));
        for _ in 0..5 {
            adam.apply(&mut params, &grads);
        }
        assert_eq!(params.get("w").unwrap(), &before);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // minimize (w - 3)^2 by feeding grad = 2(w-3)
        let mut params = ParamSet::<f64>::new();
        params.insert("w", Tensor::scalar(0.0));
        let mut adam = AdamState::new(0.1);
        for _ in 0..400 {
            let w = params.get("w").unwrap().item();
            let mut grads = BTreeMap::new();
            grads.insert("w".to_string(), Tensor::scalar(2.0 * (w - 3.0)));
            adam.apply(&mut params, &grads);
        }
        assert!((params.get("w").unwrap().item() - 3.0).abs() < 1e-3);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Tensor::<f64>::filled(2, 2, 3.0));
        let pre = clip_global_norm(&mut grads, 1.0);
        assert!((pre - 6.0).abs() < 1e-12);
        assert!((global_norm(&grads) - 1.0).abs() < 1e-12);
        // under the cap: untouched
        let pre2 = clip_global_norm(&mut grads, 5.0);
        assert!((pre2 - 1.0).abs() < 1e-12);
    }
}
