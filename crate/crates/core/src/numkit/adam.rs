use super::{Matrix, NumError};

/// Moment estimates for Adam with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl AdamState {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Matrix] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Matrix] {
        &self.v
    }
}

/// One Adam update of `params` in place. Moment buffers are allocated on the
/// first call and must keep the same shapes afterwards.
pub fn adam_step(
    params: &mut [&mut Matrix],
    grads: &[Matrix],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), NumError> {
    if params.len() != grads.len() {
        return Err(NumError::Shape(format!(
            "adam: {} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(NumError::Shape(format!(
                "adam: parameter {i} is {:?}, gradient is {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    if state.m.is_empty() {
        state.m = grads
            .iter()
            .map(|g| Matrix::zeros(g.rows(), g.cols()))
            .collect();
        state.v = state.m.clone();
    } else if state.m.len() != grads.len()
        || state
            .m
            .iter()
            .zip(grads)
            .any(|(m, g)| m.shape() != g.shape())
    {
        return Err(NumError::Shape(
            "adam: parameter set changed between steps".into(),
        ));
    }

    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let pv = p.as_mut_slice();
        let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
        for (k, &gk) in g.as_slice().iter().enumerate() {
            ms[k] = b1 * ms[k] + (1.0 - b1) * gk;
            vs[k] = b2 * vs[k] + (1.0 - b2) * gk * gk;
            let mhat = ms[k] / c1;
            let vhat = vs[k] / c2;
            pv[k] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Matrix::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        let g = Matrix::from_rows(&[[3.0, -0.25, 7.0]]).unwrap();
        let mut st = AdamState::default();
        adam_step(&mut [&mut p], &[g], &mut st, 1e-3).unwrap();
        let expected = [1.0 - 1e-3, -2.0 + 1e-3, 0.5 - 1e-3];
        for (a, b) in p.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn zero_grad_is_a_no_op() {
        let mut p = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let before = p.clone();
        let mut st = AdamState::default();
        adam_step(&mut [&mut p], &[Matrix::zeros(1, 2)], &mut st, 1e-3).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn deterministic_state_evolution() {
        let run = || {
            let mut p = Matrix::from_rows(&[[0.3, -0.7]]).unwrap();
            let mut st = AdamState::default();
            for _ in 0..2 {
                let g = Matrix::from_rows(&[[0.1, 0.2]]).unwrap();
                adam_step(&mut [&mut p], &[g], &mut st, 1e-2).unwrap();
            }
            (
                p,
                st.first_moments().to_vec(),
                st.second_moments().to_vec(),
                st.step_count(),
            )
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert_eq!(a.3, 2);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = Matrix::zeros(1, 2);
        let mut st = AdamState::default();
        assert!(adam_step(&mut [&mut p], &[Matrix::zeros(2, 1)], &mut st, 1e-3).is_err());
    }
}
