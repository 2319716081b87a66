use super::{NumericsError, Tensor};

/// Optimizer slots for bias-corrected Adam.
///
/// Weight decay is decoupled: after the Adam step each parameter is shrunk
/// by `learning_rate * weight_decay * param`, rather than folding an L2 term
/// into the gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl AdamState {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            learning_rate,
            weight_decay,
        }
    }

    fn validate(&self) -> Result<(), NumericsError> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.learning_rate.is_finite()
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(NumericsError::Config(format!(
                "invalid Adam hyperparameters b1={} b2={} eps={}",
                self.beta1, self.beta2, self.epsilon
            )))
        }
    }
}

/// One Adam update over `params`, reading each tensor's accumulated `grad`
/// (absent gradients count as zero). Moment buffers are allocated on the
/// first call and must keep matching shapes afterwards.
pub fn adam_step(params: &mut [Tensor], state: &mut AdamState) -> Result<(), NumericsError> {
    state.validate()?;
    if state.first_moment.is_empty() {
        state.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
        state.second_moment = state.first_moment.clone();
    }
    if state.first_moment.len() != params.len()
        || params
            .iter()
            .zip(&state.first_moment)
            .any(|(p, m)| p.len() != m.len())
    {
        return Err(NumericsError::Dimension(
            "Adam moment buffers do not match parameters".into(),
        ));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps, lr, wd) = (
        state.beta1,
        state.beta2,
        state.epsilon,
        state.learning_rate,
        state.weight_decay,
    );
    for ((p, m), v) in params
        .iter_mut()
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        let grad = p.grad().map(<[f64]>::to_vec);
        let values = p.values_mut();
        for i in 0..values.len() {
            let g = grad.as_ref().map_or(0.0, |g| g[i]);
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            values[i] -= lr * mhat / (vhat.sqrt() + eps) + lr * wd * values[i];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(v: Vec<f64>, g: Option<Vec<f64>>) -> Tensor {
        let mut t = Tensor::matrix(1, v.len(), v).unwrap().with_grad();
        if let Some(g) = g {
            t.accumulate_grad(&g);
        }
        t
    }

    #[test]
    fn zero_grad_without_decay_is_identity() {
        let mut ps = vec![param(vec![0.5, -1.0, 2.0], Some(vec![0.0; 3]))];
        let before = ps[0].values().to_vec();
        let mut st = AdamState::new(1e-2, 0.0);
        for _ in 0..5 {
            adam_step(&mut ps, &mut st).unwrap();
        }
        assert_eq!(ps[0].values(), before.as_slice());
        assert_eq!(st.step_count, 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = 1, v̂ = 1, so Δ = -lr / (1 + eps)
        let mut ps = vec![param(vec![0.0], Some(vec![1.0]))];
        let mut st = AdamState::new(1e-4, 1e-5);
        adam_step(&mut ps, &mut st).unwrap();
        let expect = -1e-4 / (1.0 + 1e-8);
        assert!((ps[0].values()[0] - expect).abs() < 1e-18);
    }

    #[test]
    fn identical_params_stay_identical() {
        let mut ps = vec![
            param(vec![0.3, 0.7], Some(vec![0.2, -0.1])),
            param(vec![0.3, 0.7], Some(vec![0.2, -0.1])),
        ];
        let mut st = AdamState::new(1e-3, 1e-5);
        for _ in 0..50 {
            adam_step(&mut ps, &mut st).unwrap();
        }
        assert_eq!(ps[0].values(), ps[1].values());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut ps = vec![param(vec![0.0, 1.0], None)];
        let mut st = AdamState::new(1e-3, 0.0);
        st.first_moment = vec![vec![0.0]];
        st.second_moment = vec![vec![0.0]];
        assert!(matches!(
            adam_step(&mut ps, &mut st),
            Err(NumericsError::Dimension(_))
        ));
    }
}
