//! Adam with the step-decayed learning-rate schedule used for training.

/// Adam state over a fixed, ordered list of parameter tensors.
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update. `params` and `grads` must list the same tensors in the
    /// same order on every call.
    pub fn step(&mut self, lr: f64, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len());
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let corr1 = 1.0 - self.beta1.powi(t);
        let corr2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            debug_assert_eq!(p.len(), g.len());
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / corr1;
                let vhat = v[i] / corr2;
                p[i] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

impl Default for Adam {
    fn default() -> Self {
        Self::new()
    }
}

/// Learning rate at a given epoch: multiply by `rate` every `every` epochs.
pub fn scheduled_lr(base: f64, epoch: usize, every: usize, rate: f64) -> f64 {
    base * rate.powi((epoch / every.max(1)) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_steps_down() {
        let lr = 1e-4;
        assert_eq!(scheduled_lr(lr, 0, 100, 0.96), lr);
        assert_eq!(scheduled_lr(lr, 99, 100, 0.96), lr);
        assert!((scheduled_lr(lr, 100, 100, 0.96) - lr * 0.96).abs() < 1e-18);
        assert!((scheduled_lr(lr, 250, 100, 0.96) - lr * 0.96 * 0.96).abs() < 1e-18);
    }

    #[test]
    fn adam_descends_quadratic() {
        // Minimize f(x) = sum((x - 3)^2); Adam should close most of the gap.
        let mut x = vec![0.0f64; 4];
        let mut opt = Adam::new();
        for _ in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * (v - 3.0)).collect();
            opt.step(0.05, &mut [&mut x], &[&g]);
        }
        for v in &x {
            assert!((v - 3.0).abs() < 1e-3, "{v}");
        }
    }
}
