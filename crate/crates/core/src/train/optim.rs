use crate::diff::Tensor;
use crate::scalar::Scalar;

/// Adam hyperparameters with decoupled weight decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

/// Whether [`AdamW::step`] changed the parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    SkippedNonFinite,
}

/// First and second moments per tensor plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamW<S> {
    pub config: AdamWConfig,
    first: Vec<Tensor<S>>,
    second: Vec<Tensor<S>>,
    steps: u64,
    skipped: u64,
}

impl<S: Scalar> AdamW<S> {
    pub fn new(config: AdamWConfig, like: &[Tensor<S>]) -> Self {
        let zeros = || like.iter().map(|t| Tensor::zeros(t.shape())).collect();
        Self {
            config,
            first: zeros(),
            second: zeros(),
            steps: 0,
            skipped: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Steps rejected because a gradient contained NaN or infinity.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// One update of every tensor whose `trainable` flag is set.
    ///
    /// Weight decay `θ ← θ − lr·λ·θ` is applied separately from the
    /// bias-corrected moment update `θ ← θ − lr·m̂/(√v̂ + ε)`.
    pub fn step(
        &mut self,
        params: &mut [Tensor<S>],
        grads: &[Tensor<S>],
        trainable: &[bool],
        lr: f64,
    ) -> StepOutcome {
        assert_eq!(params.len(), grads.len(), "one gradient per tensor");
        if grads.iter().any(|g| !g.is_finite()) {
            self.skipped += 1;
            return StepOutcome::SkippedNonFinite;
        }
        self.steps += 1;
        let c = &self.config;
        let t = self.steps as i32;
        let (b1, b2) = (S::of(c.beta1), S::of(c.beta2));
        let correct1 = S::one() / (S::one() - b1.powi(t));
        let correct2 = S::one() / (S::one() - b2.powi(t));
        let (lr_s, decay, eps) = (S::of(lr), S::of(lr * c.weight_decay), S::of(c.eps));
        for (k, p) in params.iter_mut().enumerate() {
            if !trainable[k] {
                continue;
            }
            let (m, v) = (self.first[k].data_mut(), self.second[k].data_mut());
            for (e, theta) in p.data_mut().iter_mut().enumerate() {
                let g = grads[k].data()[e];
                m[e] = b1 * m[e] + (S::one() - b1) * g;
                v[e] = b2 * v[e] + (S::one() - b2) * g * g;
                let m_hat = m[e] * correct1;
                let v_hat = v[e] * correct2;
                *theta = *theta - decay * *theta;
                *theta = *theta - lr_s * m_hat / (v_hat.sqrt() + eps);
            }
        }
        StepOutcome::Applied
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<S: Scalar>(grads: &mut [Tensor<S>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.squared_norm().as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = S::of(max_norm / norm);
        for g in grads.iter_mut() {
            g.scale_in_place(k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Shape;

    fn no_decay() -> AdamWConfig {
        AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn zero_gradients_leave_params() {
        let mut p = vec![Tensor::<f64>::from_vec(vec![1.0, -2.0])];
        let g = vec![Tensor::zeros(Shape::vector(2))];
        let mut opt = AdamW::new(no_decay(), &p);
        opt.step(&mut p, &g, &[true], 0.1);
        assert_eq!(p[0].data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_is_normalised_gradient() {
        let mut p = vec![Tensor::<f64>::from_vec(vec![0.5, 0.5, 0.5])];
        let g = vec![Tensor::from_vec(vec![3.0, -0.2, 1e-3])];
        let mut opt = AdamW::new(no_decay(), &p);
        let lr = 0.01;
        opt.step(&mut p, &g, &[true], lr);
        for (e, &gv) in g[0].data().iter().enumerate() {
            let expected = 0.5 - lr * gv / (gv.abs() + 1e-8);
            assert!((p[0].data()[e] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_decay_shrinks_params() {
        let mut p = vec![Tensor::<f64>::from_vec(vec![2.0])];
        let g = vec![Tensor::zeros(Shape::vector(1))];
        let mut opt = AdamW::new(AdamWConfig::default(), &p);
        opt.step(&mut p, &g, &[true], 0.1);
        assert!((p[0].data()[0] - 2.0 * (1.0 - 0.1 * 1e-2)).abs() < 1e-15);
    }

    #[test]
    fn converges_on_convex_quadratic() {
        let a = [0.7, 1.5, 2.9, 0.6, 1.1];
        let target = [1.2, -0.4, 0.8, -1.9, 0.05];
        let mut p = vec![Tensor::<f64>::zeros(Shape::vector(5))];
        let mut opt = AdamW::new(no_decay(), &p);
        for _ in 0..200 {
            let g: Vec<f64> = (0..5).map(|i| a[i] * (p[0].data()[i] - target[i])).collect();
            opt.step(&mut p, &[Tensor::from_vec(g)], &[true], 0.05);
        }
        for (x, t) in p[0].data().iter().zip(&target) {
            assert!((x - t).abs() <= 1e-3);
        }
    }

    #[test]
    fn non_finite_gradients_skip() {
        let mut p = vec![Tensor::<f64>::from_vec(vec![1.0]), Tensor::from_vec(vec![4.0])];
        let g = vec![Tensor::from_vec(vec![f64::NAN]), Tensor::from_vec(vec![1.0])];
        let mut opt = AdamW::new(no_decay(), &p);
        assert_eq!(opt.step(&mut p, &g, &[true, true], 0.1), StepOutcome::SkippedNonFinite);
        assert_eq!((opt.steps(), opt.skipped()), (0, 1));
        assert_eq!(p[1].data(), &[4.0]);
    }

    #[test]
    fn frozen_tensors_untouched_and_clipping() {
        let mut p = vec![Tensor::<f64>::from_vec(vec![1.0]), Tensor::from_vec(vec![1.0])];
        let mut g = vec![Tensor::from_vec(vec![3.0]), Tensor::from_vec(vec![4.0])];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        let (a, b): (f64, f64) = (g[0].data()[0], g[1].data()[0]);
        assert!((a - 0.6).abs() < 1e-15 && (b - 0.8).abs() < 1e-15);
        let mut opt = AdamW::new(no_decay(), &p);
        opt.step(&mut p, &g, &[true, false], 0.1);
        assert_eq!(p[1].data(), &[1.0]);
        assert!(p[0].data()[0] < 1.0);
    }
}
