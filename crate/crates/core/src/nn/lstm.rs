//! LSTM cell and bidirectional sequence encoder with explicit backprop
//! through time.
//!
//! Gate layout in the stacked pre-activation vector is `[i, f, g, o]`:
//!
//! ```text
//! z  = W_ih x + W_hh h + b
//! i  = sigmoid(z_i)   f = sigmoid(z_f)   g = tanh(z_g)   o = sigmoid(z_o)
//! c' = f * c + i * g
//! h' = o * tanh(c')
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{matvec_acc, matvec_t_acc, outer_acc, Parameter, Parameterized, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell<T> {
    pub w_ih: Parameter<T>,
    pub w_hh: Parameter<T>,
    pub bias: Parameter<T>,
    input: usize,
    hidden: usize,
}

/// Values saved by one forward step for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    x: Vec<T>,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    gates: Vec<T>,
    tanh_c: Vec<T>,
}

impl<T: Scalar> LstmCell<T> {
    /// Uniform(+-1/sqrt(fan_in)) weights, zero bias except the forget gate at +1.
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut bias = Parameter::zeros(format!("{name}.bias"), &[4 * hidden]);
        for v in &mut bias.value.data_mut()[hidden..2 * hidden] {
            *v = T::one();
        }
        LstmCell {
            w_ih: Parameter::weight(format!("{name}.w_ih"), 4 * hidden, input, rng),
            w_hh: Parameter::weight(format!("{name}.w_hh"), 4 * hidden, hidden, rng),
            bias,
            input,
            hidden,
        }
    }

    pub fn from_parts(w_ih: Parameter<T>, w_hh: Parameter<T>, bias: Parameter<T>) -> Result<Self> {
        let s = w_ih.value.shape().to_vec();
        if s.len() != 2 || !s[0].is_multiple_of(4) {
            return Err(Error::shape("lstm", format!("w_ih shape {s:?}")));
        }
        let hidden = s[0] / 4;
        if w_hh.value.shape() != [4 * hidden, hidden] || bias.value.shape() != [4 * hidden] {
            return Err(Error::shape(
                "lstm",
                format!(
                    "w_hh {:?} / bias {:?} inconsistent with hidden {hidden}",
                    w_hh.value.shape(),
                    bias.value.shape()
                ),
            ));
        }
        Ok(LstmCell {
            input: s[1],
            w_ih,
            w_hh,
            bias,
            hidden,
        })
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn step(&self, x: &[T], h: &[T], c: &[T]) -> (Vec<T>, Vec<T>, StepCache<T>) {
        let hs = self.hidden;
        let mut z = self.bias.value.data().to_vec();
        matvec_acc(self.w_ih.value.data(), 4 * hs, self.input, x, &mut z);
        matvec_acc(self.w_hh.value.data(), 4 * hs, hs, h, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * hs..3 * hs).contains(&k) {
                v.tanh()
            } else {
                v.sigmoid()
            };
        }
        let mut c_new = vec![T::zero(); hs];
        let mut h_new = vec![T::zero(); hs];
        let mut tanh_c = vec![T::zero(); hs];
        for j in 0..hs {
            let (i, f, g, o) = (z[j], z[hs + j], z[2 * hs + j], z[3 * hs + j]);
            c_new[j] = f * c[j] + i * g;
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = o * tanh_c[j];
        }
        let cache = StepCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
            gates: z,
            tanh_c,
        };
        (h_new, c_new, cache)
    }

    /// Backward through one step given gradients w.r.t. `h'` and `c'`.
    /// Adds the input gradient into `dx` and returns `(dh_prev, dc_prev)`.
    pub fn step_backward(
        &mut self,
        cache: &StepCache<T>,
        dh: &[T],
        dc_next: &[T],
        dx: &mut [T],
    ) -> (Vec<T>, Vec<T>) {
        let hs = self.hidden;
        let one = T::one();
        let z = &cache.gates;
        let mut dz = vec![T::zero(); 4 * hs];
        let mut dc_prev = vec![T::zero(); hs];
        for j in 0..hs {
            let (i, f, g, o) = (z[j], z[hs + j], z[2 * hs + j], z[3 * hs + j]);
            let tc = cache.tanh_c[j];
            let dc = dc_next[j] + dh[j] * o * (one - tc * tc);
            dz[j] = dc * g * i * (one - i);
            dz[hs + j] = dc * cache.c_prev[j] * f * (one - f);
            dz[2 * hs + j] = dc * i * (one - g * g);
            dz[3 * hs + j] = dh[j] * tc * o * (one - o);
            dc_prev[j] = dc * f;
        }
        outer_acc(self.w_ih.grad.data_mut(), &dz, &cache.x);
        outer_acc(self.w_hh.grad.data_mut(), &dz, &cache.h_prev);
        for (g, d) in self.bias.grad.data_mut().iter_mut().zip(&dz) {
            *g += *d;
        }
        matvec_t_acc(self.w_ih.value.data(), 4 * hs, self.input, &dz, dx);
        let mut dh_prev = vec![T::zero(); hs];
        matvec_t_acc(self.w_hh.value.data(), 4 * hs, hs, &dz, &mut dh_prev);
        (dh_prev, dc_prev)
    }

    /// Runs the cell over `seq` (optionally right-to-left) from zero state.
    /// Outputs are indexed by input position regardless of direction.
    pub fn run(&self, seq: &[Vec<T>], reverse: bool) -> (Vec<Vec<T>>, Vec<StepCache<T>>) {
        let n = seq.len();
        let mut h = vec![T::zero(); self.hidden];
        let mut c = vec![T::zero(); self.hidden];
        let mut outputs = vec![Vec::new(); n];
        let mut caches = Vec::with_capacity(n);
        for k in 0..n {
            let t = if reverse { n - 1 - k } else { k };
            let (h2, c2, cache) = self.step(&seq[t], &h, &c);
            outputs[t] = h2.clone();
            caches.push(cache);
            h = h2;
            c = c2;
        }
        (outputs, caches)
    }

    /// Backprop through time. `d_out[t]` is the gradient w.r.t. the output at position t.
    pub fn run_backward(
        &mut self,
        caches: &[StepCache<T>],
        d_out: &[Vec<T>],
        reverse: bool,
        d_in: &mut [Vec<T>],
    ) {
        let n = caches.len();
        let mut dh_next = vec![T::zero(); self.hidden];
        let mut dc_next = vec![T::zero(); self.hidden];
        for k in (0..n).rev() {
            let t = if reverse { n - 1 - k } else { k };
            let mut dh = d_out[t].clone();
            for (a, b) in dh.iter_mut().zip(&dh_next) {
                *a += *b;
            }
            let (dhp, dcp) = self.step_backward(&caches[k], &dh, &dc_next, &mut d_in[t]);
            dh_next = dhp;
            dc_next = dcp;
        }
    }
}

impl<T: Scalar> Parameterized<T> for LstmCell<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![&self.w_ih, &self.w_hh, &self.bias]
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }
}

/// Checked single step on tensors.
pub fn lstm_step<T: Scalar>(
    x: &Tensor<T>,
    h: &Tensor<T>,
    c: &Tensor<T>,
    cell: &LstmCell<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    if x.len() != cell.input || h.len() != cell.hidden || c.len() != cell.hidden {
        return Err(Error::shape(
            "lstm_step",
            format!(
                "x {:?}, h {:?}, c {:?} vs cell input {} hidden {}",
                x.shape(),
                h.shape(),
                c.shape(),
                cell.input,
                cell.hidden
            ),
        ));
    }
    let (h2, c2, _) = cell.step(x.data(), h.data(), c.data());
    Ok((Tensor::vector(&h2), Tensor::vector(&c2)))
}

/// Two independent LSTMs reading in opposite directions; the output at
/// position t is `forward_h[t] ++ backward_h[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm<T> {
    pub forward: LstmCell<T>,
    pub backward: LstmCell<T>,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache<T> {
    fwd: Vec<StepCache<T>>,
    bwd: Vec<StepCache<T>>,
}

impl<T: Scalar> BiLstm<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstm {
            forward: LstmCell::new(&format!("{name}.fwd"), input, hidden, rng),
            backward: LstmCell::new(&format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn input_size(&self) -> usize {
        self.forward.input
    }

    pub fn output_size(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn forward(&self, seq: &[Vec<T>]) -> Result<(Vec<Vec<T>>, BiLstmCache<T>)> {
        if seq.is_empty() {
            return Err(Error::Empty("bilstm_encode"));
        }
        if let Some((t, v)) = seq.iter().enumerate().find(|(_, v)| v.len() != self.forward.input) {
            return Err(Error::shape(
                "bilstm_encode",
                format!("step {t} has dim {}, expected {}", v.len(), self.forward.input),
            ));
        }
        let (hf, cf) = self.forward.run(seq, false);
        let (hb, cb) = self.backward.run(seq, true);
        let out = hf
            .iter()
            .zip(&hb)
            .map(|(a, b)| {
                let mut v = a.clone();
                v.extend_from_slice(b);
                v
            })
            .collect();
        Ok((out, BiLstmCache { fwd: cf, bwd: cb }))
    }

    /// Returns the gradient w.r.t. every input step.
    pub fn backward(&mut self, cache: &BiLstmCache<T>, d_out: &[Vec<T>]) -> Vec<Vec<T>> {
        let hf = self.forward.hidden;
        let n = d_out.len();
        let mut d_in = vec![vec![T::zero(); self.forward.input]; n];
        let (df, db): (Vec<Vec<T>>, Vec<Vec<T>>) = d_out
            .iter()
            .map(|d| (d[..hf].to_vec(), d[hf..].to_vec()))
            .unzip();
        self.forward.run_backward(&cache.fwd, &df, false, &mut d_in);
        self.backward.run_backward(&cache.bwd, &db, true, &mut d_in);
        d_in
    }
}

impl<T: Scalar> Parameterized<T> for BiLstm<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        let mut v = self.forward.params();
        v.extend(self.backward.params());
        v
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut v = self.forward.params_mut();
        v.extend(self.backward.params_mut());
        v
    }
}

/// Encodes `seq` with separately supplied forward and backward cells.
pub fn bilstm_encode<T: Scalar>(
    seq: &[Tensor<T>],
    fwd: &LstmCell<T>,
    bwd: &LstmCell<T>,
) -> Result<Vec<Tensor<T>>> {
    let enc = BiLstm {
        forward: fwd.clone(),
        backward: bwd.clone(),
    };
    let raw: Vec<Vec<T>> = seq.iter().map(|t| t.data().to_vec()).collect();
    let (out, _) = enc.forward(&raw)?;
    Ok(out.iter().map(|v| Tensor::vector(v)).collect())
}
