//! Affine layers and LSTM recurrences built on the tape.

use rand::Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::error::TensorError;
use crate::tensor::{Real, Tensor};

/// `x · W + b` with `W` stored as `in × out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Uniform ±1/√fan_in initialisation; bias initialised the same way.
    pub fn new<T: Real, R: Rng>(
        store: &mut ParamStore<T>,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weight = store.insert_uniform(format!("{name}.weight"), vec![fan_in, fan_out], bound, rng);
        let bias = bias.then(|| store.insert_uniform(format!("{name}.bias"), vec![1, fan_out], bound, rng));
        Linear {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var, TensorError> {
        let w = g.param(store, self.weight);
        let y = g.matmul(x, w)?;
        match self.bias {
            Some(b) => {
                let b = g.param(store, b);
                g.add_row(y, b)
            }
            None => Ok(y),
        }
    }
}

/// One direction of an LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lstm {
    /// `input × 4h`, gate order i, f, g, o.
    pub w_input: ParamId,
    /// `h × 4h`.
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl Lstm {
    pub fn new<T: Real, R: Rng>(store: &mut ParamStore<T>, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_input = store.insert_uniform(format!("{name}.w_input"), vec![input, 4 * hidden], bound, rng);
        let w_hidden = store.insert_uniform(format!("{name}.w_hidden"), vec![hidden, 4 * hidden], bound, rng);
        let bias = store.insert_uniform(format!("{name}.bias"), vec![1, 4 * hidden], bound, rng);
        Lstm {
            w_input,
            w_hidden,
            bias,
            input,
            hidden,
        }
    }

    /// Runs over the rows of `x` listed in `order`; returns the hidden state
    /// after each visited row, in visiting order.
    pub fn run<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: Var,
        order: &[usize],
    ) -> Result<Vec<Var>, TensorError> {
        let h = self.hidden;
        let wx = g.param(store, self.w_input);
        let wh = g.param(store, self.w_hidden);
        let b = g.param(store, self.bias);
        let projected = g.matmul(x, wx)?;
        let projected = g.add_row(projected, b)?;
        let mut hidden: Option<Var> = None;
        let mut cell: Option<Var> = None;
        let mut outputs = Vec::with_capacity(order.len());
        for &t in order {
            let xt = g.slice_rows(projected, t, 1)?;
            let gates = match hidden {
                Some(hp) => {
                    let hw = g.matmul(hp, wh)?;
                    g.add(xt, hw)?
                }
                None => xt,
            };
            let i = g.slice_cols(gates, 0, h)?;
            let f = g.slice_cols(gates, h, h)?;
            let gg = g.slice_cols(gates, 2 * h, h)?;
            let o = g.slice_cols(gates, 3 * h, h)?;
            let i = g.sigmoid(i)?;
            let o = g.sigmoid(o)?;
            let gg = g.tanh(gg)?;
            let ig = g.hadamard(i, gg)?;
            let c = match cell {
                Some(cp) => {
                    let f = g.sigmoid(f)?;
                    let fc = g.hadamard(f, cp)?;
                    g.add(fc, ig)?
                }
                None => ig,
            };
            let tc = g.tanh(c)?;
            let ht = g.hadamard(o, tc)?;
            hidden = Some(ht);
            cell = Some(c);
            outputs.push(ht);
        }
        Ok(outputs)
    }
}

/// Forward and backward LSTMs of equal width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

impl BiLstm {
    pub fn new<T: Real, R: Rng>(store: &mut ParamStore<T>, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstm {
            forward: Lstm::new(store, &format!("{name}.fwd"), input, hidden, rng),
            backward: Lstm::new(store, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    fn valid_positions(mask: &[bool]) -> Result<Vec<usize>, TensorError> {
        let valid: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        if valid.is_empty() {
            return Err(TensorError::DegenerateMask { op: "bilstm" });
        }
        Ok(valid)
    }

    /// Per-position outputs `[h_fwd; h_bwd]` (`n × 2h`); masked rows are zero
    /// and are skipped by both recurrences.
    pub fn sequence<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: Var,
        mask: &[bool],
    ) -> Result<Var, TensorError> {
        let valid = Self::valid_positions(mask)?;
        let fwd = self.forward.run(g, store, x, &valid)?;
        let rev: Vec<usize> = valid.iter().rev().copied().collect();
        let mut bwd = self.backward.run(g, store, x, &rev)?;
        bwd.reverse();
        let h = self.hidden();
        let zero = g.constant(Tensor::zeros(vec![1, 2 * h]))?;
        let mut rows = Vec::with_capacity(mask.len());
        let mut k = 0;
        for &m in mask {
            if m {
                rows.push(g.concat(&[fwd[k], bwd[k]], 1)?);
                k += 1;
            } else {
                rows.push(zero);
            }
        }
        g.concat(&rows, 0)
    }

    /// `[forward state at the last valid row; backward state at the first
    /// valid row]`, a `1 × 2h` summary.
    pub fn summary<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: Var,
        mask: &[bool],
    ) -> Result<Var, TensorError> {
        let valid = Self::valid_positions(mask)?;
        let fwd = self.forward.run(g, store, x, &valid)?;
        let rev: Vec<usize> = valid.iter().rev().copied().collect();
        let bwd = self.backward.run(g, store, x, &rev)?;
        let last_fwd = *fwd.last().expect("non-empty");
        let last_bwd = *bwd.last().expect("non-empty");
        g.concat(&[last_fwd, last_bwd], 1)
    }
}
