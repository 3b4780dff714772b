//! Adam optimizer over flat tensor lists.

use super::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates, one pair per parameter tensor. The
/// parameter order must stay fixed across steps.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        let zeros = |t: &&Tensor| Tensor::zeros(t.rows(), t.cols());
        Self { step: 0, m: params.iter().map(zeros).collect(), v: params.iter().map(zeros).collect() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self, i: usize) -> (&Tensor, &Tensor) {
        (&self.m[i], &self.v[i])
    }
}

/// One bias-corrected Adam update. `params` and `grads` must align with
/// the tensors the state was created from.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
) {
    assert_eq!(params.len(), grads.len(), "params/grads length mismatch");
    assert_eq!(params.len(), state.m.len(), "state initialised for a different parameter list");
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - ADAM_BETA1.powf(t);
    let bc2 = 1.0 - ADAM_BETA2.powf(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        assert_eq!(p.shape(), g.shape(), "param/grad shape mismatch at {i}");
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for ((pv, &gv), (mv, vv)) in
            p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut().zip(v.iter_mut()))
        {
            *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
            *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_everything_unchanged() {
        let mut p = Tensor::from_vec(1, 2, vec![0.5, -1.5]);
        let g = Tensor::zeros(1, 2);
        let mut state = AdamState::new(&[&p]);
        let before = p.clone();
        adam_step(&mut [&mut p], std::slice::from_ref(&g), &mut state, 0.01);
        assert_eq!(p, before);
        let (m, v) = state.moments(0);
        assert_eq!(m, &Tensor::zeros(1, 2));
        assert_eq!(v, &Tensor::zeros(1, 2));
    }

    #[test]
    fn single_step_with_unit_gradient_moves_by_lr() {
        // Hand evaluation: m_hat = 1, v_hat = 1, so the update is
        // lr / (1 + eps) ~ lr.
        let mut p = Tensor::scalar(0.0);
        let g = Tensor::scalar(1.0);
        let mut state = AdamState::new(&[&p]);
        adam_step(&mut [&mut p], std::slice::from_ref(&g), &mut state, 0.001);
        let expected = -0.001 / (1.0 + ADAM_EPS);
        assert!((p.scalar_value() - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_gradient_approaches_signed_step() {
        let mut p = Tensor::scalar(10.0);
        let g = Tensor::scalar(3.0);
        let mut state = AdamState::new(&[&p]);
        let mut last = p.scalar_value();
        let mut step = 0.0;
        for _ in 0..500 {
            adam_step(&mut [&mut p], std::slice::from_ref(&g), &mut state, 0.01);
            step = last - p.scalar_value();
            last = p.scalar_value();
        }
        // Fixed point of Adam under a constant gradient: step -> lr * sign(g).
        assert!((step - 0.01).abs() < 1e-6, "step {step}");
    }
}
