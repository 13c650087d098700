//! Adaptive-moment gradient descent.

/// Adam with the usual β = (0.9, 0.999), ε = 1e-8 and bias correction.
/// Moment buffers are allocated on the first step to match the parameter
/// layout; the same tensor order must be used on every call.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), grads.len(), "tensor count mismatch");
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(&mut self.v))
        {
            assert_eq!(param.len(), grad.len(), "tensor length mismatch");
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                param[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimize a separable quadratic; Adam should land near the optimum.
    #[test]
    fn converges_on_quadratic_bowl() {
        let mut x = vec![5.0, -3.0, 2.0];
        let target = [1.0, 2.0, -4.0];
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let grad: Vec<f64> = x.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            opt.step(&mut [&mut x], &[&grad]);
        }
        for (a, b) in x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        assert_eq!(opt.step_count(), 2000);
    }

    /// First step moves each coordinate by ~lr in the gradient's direction.
    #[test]
    fn first_step_is_learning_rate_sized() {
        let mut x = vec![0.0, 0.0];
        let grad = vec![3.0, -0.001];
        let mut opt = Adam::new(0.01);
        opt.step(&mut [&mut x], &[&grad]);
        assert!((x[0] + 0.01).abs() < 1e-6);
        assert!((x[1] - 0.01).abs() < 1e-6);
    }
}
