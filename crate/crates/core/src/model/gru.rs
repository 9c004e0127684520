//! Stacked GRU on the autodiff tape.
//!
//! ```text
//! z  = σ(x W_z + h U_z + b_z)
//! r  = σ(x W_r + h U_r + b_r)
//! n  = tanh(x W_n + (r ⊙ h) U_n + b_n)
//! h' = n + z ⊙ (h − n)
//! ```

use rand::Rng;

use crate::autodiff::{Graph, ParamStore, Tensor, TensorError, Var};

pub(crate) const GATE_PARAMS: [&str; 9] = ["w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_n", "u_n", "b_n"];

/// Bias added to the update gate at init so early steps lean on carry-over.
pub const UPDATE_GATE_BIAS: f64 = 1.0;

pub(crate) fn layer_prefix(prefix: &str, layer: usize) -> String {
    format!("{prefix}.gru{layer}")
}

/// Glorot-uniform matrix of shape `[fan_in, fan_out]`.
pub(crate) fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-a..=a)).collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("positive dims")
}

pub(crate) fn init_stack<R: Rng + ?Sized>(
    store: &mut ParamStore,
    rng: &mut R,
    prefix: &str,
    layers: usize,
    input: usize,
    hidden: usize,
) -> Result<(), TensorError> {
    for l in 0..layers {
        let p = layer_prefix(prefix, l);
        let fan_in = if l == 0 { input } else { hidden };
        for gate in ["z", "r", "n"] {
            store.insert(format!("{p}.w_{gate}"), glorot(rng, fan_in, hidden))?;
            store.insert(format!("{p}.u_{gate}"), glorot(rng, hidden, hidden))?;
            let bias = if gate == "z" { UPDATE_GATE_BIAS } else { 0.0 };
            store.insert(format!("{p}.b_{gate}"), Tensor::full(&[1, hidden], bias))?;
        }
    }
    Ok(())
}

struct Cell {
    w: [Var; 3],
    u: [Var; 3],
    b: [Var; 3],
}

impl Cell {
    fn load(g: &mut Graph, store: &ParamStore, prefix: &str) -> Result<Self, TensorError> {
        let mut get = |name: &str| g.param(store, &format!("{prefix}.{name}"));
        Ok(Cell {
            w: [get("w_z")?, get("w_r")?, get("w_n")?],
            u: [get("u_z")?, get("u_r")?, get("u_n")?],
            b: [get("b_z")?, get("b_r")?, get("b_n")?],
        })
    }

    fn gate(&self, g: &mut Graph, k: usize, x: Var, h: Var) -> Result<Var, TensorError> {
        let xw = g.matmul(x, self.w[k])?;
        let hu = g.matmul(h, self.u[k])?;
        let s = g.add(xw, hu)?;
        g.add(s, self.b[k])
    }

    fn step(&self, g: &mut Graph, x: Var, h: Var) -> Result<Var, TensorError> {
        let z = self.gate(g, 0, x, h)?;
        let z = g.sigmoid(z)?;
        let r = self.gate(g, 1, x, h)?;
        let r = g.sigmoid(r)?;
        let rh = g.mul(r, h)?;
        let n = self.gate(g, 2, x, rh)?;
        let n = g.tanh(n)?;
        let carry = g.sub(h, n)?;
        let carry = g.mul(z, carry)?;
        g.add(n, carry)
    }
}

/// Runs `layers` stacked GRUs over `inputs` (each `[1, in]`) from zero
/// state and returns the top layer's hidden state at every step.
pub(crate) fn run_stack(
    g: &mut Graph,
    store: &ParamStore,
    prefix: &str,
    layers: usize,
    hidden: usize,
    inputs: &[Var],
) -> Result<Vec<Var>, TensorError> {
    let mut seq = inputs.to_vec();
    for l in 0..layers {
        let cell = Cell::load(g, store, &layer_prefix(prefix, l))?;
        let mut h = g.constant(Tensor::zeros(&[1, hidden]))?;
        for x in seq.iter_mut() {
            h = cell.step(g, *x, h)?;
            *x = h;
        }
    }
    Ok(seq)
}
