use crate::autodiff::{Gradients, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates, one pair per parameter, plus the
/// number of steps taken.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: ParamStore,
    pub second: ParamStore,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros = || {
            let mut s = ParamStore::new();
            for (name, t) in params.iter() {
                s.insert(name, crate::autodiff::Tensor::zeros(t.shape())).expect("names unique in source");
            }
            s
        };
        AdamState { step: 0, first: zeros(), second: zeros() }
    }
}

/// One bias-corrected Adam update of every parameter for which `trainable`
/// holds. Other parameters and their moments are left untouched.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &AdamConfig,
    trainable: impl Fn(&str) -> bool,
) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (name, p) in params.iter_mut() {
        if !trainable(name) {
            continue;
        }
        let g = grads.get(name).expect("gradient for every parameter");
        let m = state.first.get_mut(name).expect("moment for every parameter");
        let v = state.second.get_mut(name).expect("moment for every parameter");
        for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Graph, Tensor};

    fn single(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("x", Tensor::scalar(v)).unwrap();
        s
    }

    fn grad_of(store: &ParamStore, g: f64) -> Gradients {
        // d(g * x)/dx = g
        let mut graph = Graph::new();
        let x = graph.param(store, "x").unwrap();
        let l = graph.scale(x, g).unwrap();
        graph.backward(l, store).unwrap()
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = single(0.7);
        let mut st = AdamState::new(&s);
        let zero = s.zeros_like();
        for _ in 0..5 {
            adam_step(&mut s, &zero, &mut st, &AdamConfig::default(), |_| true);
        }
        assert_eq!(s.get("x").unwrap().item(), 0.7);
    }

    #[test]
    fn first_step_by_hand() {
        let cfg = AdamConfig::default();
        let mut s = single(1.0);
        let mut st = AdamState::new(&s);
        let g = 0.25;
        let grads = grad_of(&s, g);
        adam_step(&mut s, &grads, &mut st, &cfg, |_| true);
        // m = 0.1 g, v = 0.001 g², m̂ = g, v̂ = g², update = lr g / (|g| + eps)
        let expected = 1.0 - 1e-3 * g / (g + 1e-8);
        assert!((s.get("x").unwrap().item() - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let cfg = AdamConfig::default();
        let mut s = single(0.0);
        let mut st = AdamState::new(&s);
        let mut prev = 0.0;
        let mut last = 0.0;
        for _ in 0..5000 {
            let grads = grad_of(&s, -3.0);
            adam_step(&mut s, &grads, &mut st, &cfg, |_| true);
            let x = s.get("x").unwrap().item();
            last = x - prev;
            prev = x;
        }
        assert!((last - cfg.lr).abs() < 1e-3 * cfg.lr, "{last}");
    }

    #[test]
    fn frozen_parameters_do_not_move() {
        let mut s = single(1.0);
        s.insert("y", Tensor::scalar(2.0)).unwrap();
        let mut st = AdamState::new(&s);
        let mut g = s.zeros_like();
        g.get_mut("x").unwrap().data_mut()[0] = 1.0;
        g.get_mut("y").unwrap().data_mut()[0] = 1.0;
        adam_step(&mut s, &g, &mut st, &AdamConfig::default(), |n| n == "x");
        assert_eq!(s.get("y").unwrap().item(), 2.0);
        assert_eq!(st.first.get("y").unwrap().item(), 0.0);
        assert!(s.get("x").unwrap().item() < 1.0);
    }
}
