use rand::Rng;

use crate::real::Real;
use crate::rng::{substream, tag};
use crate::{Error, Result};

/// Layer widths of the experiment network.
pub const STANDARD_DIMS: [usize; 4] = [crate::datagen::PIXELS, 256, 64, 10];

/// Fully connected network with ReLU hidden layers and a softmax output.
///
/// Layer `l` maps `dims[l]` inputs to `dims[l + 1]` outputs; its weight
/// matrix is stored row-major as `dims[l] x dims[l + 1]` so a row-major
/// batch `X` maps to `X W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T: Real> {
    dims: Vec<usize>,
    pub(crate) weights: Vec<Vec<T>>,
    pub(crate) biases: Vec<Vec<T>>,
}

/// Parameter gradients, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T: Real> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

/// One input row of a grouped minibatch: an input shared by `count`
/// members whose targets sum to `target_sum`.
pub struct Group<'a, T> {
    pub input: &'a [T],
    pub count: usize,
    pub target_sum: Vec<T>,
}

impl<T: Real> MlpModel<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {dims:?}")));
        }
        let mut rng = substream(seed, &[tag::INIT]);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            weights.push((0..w[0] * w[1]).map(|_| T::of(rng.random_range(-bound..bound))).collect());
            biases.push(vec![T::zero(); w[1]]);
        }
        Ok(Self { dims: dims.to_vec(), weights, biases })
    }

    /// The 2352-256-64-10 network.
    pub fn standard(seed: u64) -> Result<Self> {
        Self::new(&STANDARD_DIMS, seed)
    }

    pub(crate) fn from_parts(dims: Vec<usize>, weights: Vec<Vec<T>>, biases: Vec<Vec<T>>) -> Result<Self> {
        if dims.len() < 2 || weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(Error::Format("layer count mismatch".into()));
        }
        for (l, w) in dims.windows(2).enumerate() {
            if weights[l].len() != w[0] * w[1] {
                return Err(Error::Dimension { expected: w[0] * w[1], got: weights[l].len() });
            }
            if biases[l].len() != w[1] {
                return Err(Error::Dimension { expected: w[1], got: biases[l].len() });
            }
        }
        Ok(Self { dims, weights, biases })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two layers")
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.biases
    }

    /// Same parameters at another precision.
    pub fn cast<U: Real>(&self) -> MlpModel<U> {
        let conv = |v: &Vec<Vec<T>>| v.iter().map(|l| l.iter().map(|x| U::of(x.as_f64())).collect()).collect();
        MlpModel { dims: self.dims.clone(), weights: conv(&self.weights), biases: conv(&self.biases) }
    }

    /// Every parameter in layer order, weights before biases per layer.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    /// Forward pass over `n` row-major inputs; returns every layer's
    /// pre-activation and the final logits.
    fn forward_all(&self, x: &[T], n: usize) -> Result<Vec<Vec<T>>> {
        if x.len() != n * self.input_dim() {
            return Err(Error::Dimension { expected: n * self.input_dim(), got: x.len() });
        }
        let (din, dout) = (self.dims[0], self.dims[1]);
        let mut z = self.bias_rows(0, n);
        T::gemm(n, din, dout, T::one(), x, din as isize, 1, &self.weights[0], dout as isize, 1, T::one(), &mut z, dout as isize, 1);
        Ok(self.forward_above_first(z, n))
    }

    /// `n` copies of layer `l`'s bias.
    fn bias_rows(&self, l: usize, n: usize) -> Vec<T> {
        let mut z = Vec::with_capacity(n * self.dims[l + 1]);
        for _ in 0..n {
            z.extend_from_slice(&self.biases[l]);
        }
        z
    }

    /// Every layer's pre-activation given the first layer's.
    fn forward_above_first(&self, first: Vec<T>, n: usize) -> Vec<Vec<T>> {
        let layers = self.weights.len();
        let mut pre: Vec<Vec<T>> = Vec::with_capacity(layers);
        pre.push(first);
        for l in 1..layers {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            let mut z = self.bias_rows(l, n);
            let input: Vec<T> = pre[l - 1].iter().map(|&v| v.max(T::zero())).collect();
            T::gemm(n, din, dout, T::one(), &input, din as isize, 1, &self.weights[l], dout as isize, 1, T::one(), &mut z, dout as isize, 1);
            pre.push(z);
        }
        pre
    }

    /// Output logits for `n` inputs.
    pub fn logits(&self, x: &[T], n: usize) -> Result<Vec<T>> {
        Ok(self.forward_all(x, n)?.pop().expect("at least one layer"))
    }

    /// Class probabilities for `n` inputs, row-major `n x classes`.
    pub fn forward(&self, x: &[T], n: usize) -> Result<Vec<T>> {
        let mut z = self.logits(x, n)?;
        let k = self.output_dim();
        for row in z.chunks_mut(k) {
            softmax_in_place(row);
        }
        Ok(z)
    }

    /// Mean cross-entropy over `n` inputs with soft targets, and its
    /// gradient.
    pub fn loss_and_grad(&self, x: &[T], targets: &[T], n: usize) -> Result<(T, Gradients<T>)> {
        let d = self.input_dim();
        let k = self.output_dim();
        if targets.len() != n * k {
            return Err(Error::Dimension { expected: n * k, got: targets.len() });
        }
        if x.len() != n * d {
            return Err(Error::Dimension { expected: n * d, got: x.len() });
        }
        let groups: Vec<Group<T>> = (0..n)
            .map(|i| Group { input: &x[i * d..(i + 1) * d], count: 1, target_sum: targets[i * k..(i + 1) * k].to_vec() })
            .collect();
        self.grouped_loss_and_grad(&groups, n)
    }

    /// Forward pass over the distinct inputs of a grouped minibatch, then
    /// the output-layer error. Returns the stacked inputs, the
    /// pre-activations, the mean loss and the output delta.
    fn grouped_forward(&self, groups: &[Group<T>], batch: usize) -> Result<(Vec<T>, Vec<Vec<T>>, T, Vec<T>)> {
        let d = self.input_dim();
        let k = self.output_dim();
        let u = groups.len();
        let mut x = Vec::with_capacity(u * d);
        for g in groups {
            if g.input.len() != d {
                return Err(Error::Dimension { expected: d, got: g.input.len() });
            }
            if g.target_sum.len() != k {
                return Err(Error::Dimension { expected: k, got: g.target_sum.len() });
            }
            x.extend_from_slice(g.input);
        }
        let pre = self.forward_all(&x, u)?;
        let (loss, delta) = self.output_delta(pre.last().expect("at least one layer"), groups.iter().map(|g| (g.count, &g.target_sum[..])), batch);
        Ok((x, pre, loss, delta))
    }

    /// Mean loss and output-layer error for grouped logits, each row
    /// standing for `count` members with summed targets.
    fn output_delta<'a>(&self, logits: &[T], members: impl Iterator<Item = (usize, &'a [T])>, batch: usize) -> (T, Vec<T>) {
        let k = self.output_dim();
        let inv_b = T::one() / T::of(batch as f64);
        let mut delta = vec![T::zero(); logits.len()];
        let mut loss = T::zero();
        for (i, (count, target_sum)) in members.enumerate() {
            let row = &logits[i * k..(i + 1) * k];
            let lse = log_sum_exp(row);
            let cnt = T::of(count as f64);
            for j in 0..k {
                let logp = row[j] - lse;
                loss -= target_sum[j] * logp;
                delta[i * k + j] = (cnt * logp.exp() - target_sum[j]) * inv_b;
            }
        }
        (loss * inv_b, delta)
    }

    /// Activations feeding layer `l`.
    fn layer_input<'a>(x: &'a [T], pre: &[Vec<T>], l: usize, buf: &'a mut Vec<T>) -> &'a [T] {
        if l == 0 {
            return x;
        }
        buf.clear();
        buf.extend(pre[l - 1].iter().map(|&v| v.max(T::zero())));
        buf
    }

    /// Push `delta` from the output of layer `l` to the output of layer
    /// `l - 1`, through the ReLU.
    fn backprop_delta(&self, l: usize, delta: &[T], pre: &[Vec<T>], u: usize) -> Vec<T> {
        let (din, dout) = (self.dims[l], self.dims[l + 1]);
        let mut back = vec![T::zero(); u * din];
        T::gemm(u, dout, din, T::one(), delta, dout as isize, 1, &self.weights[l], 1, dout as isize, T::zero(), &mut back, din as isize, 1);
        for (b, &z) in back.iter_mut().zip(&pre[l - 1]) {
            if z <= T::zero() {
                *b = T::zero();
            }
        }
        back
    }

    /// `C = alpha * input^T delta + beta * C` for layer `l`, plus the bias
    /// analogue.
    #[allow(clippy::too_many_arguments)]
    fn accumulate(&self, l: usize, input: &[T], delta: &[T], u: usize, alpha: T, beta: T, gw: &mut [T], gb: &mut [T]) {
        let (din, dout) = (self.dims[l], self.dims[l + 1]);
        T::gemm(din, u, dout, alpha, input, 1, din as isize, delta, dout as isize, 1, beta, gw, dout as isize, 1);
        for b in gb.iter_mut() {
            *b *= beta;
        }
        for row in delta.chunks(dout) {
            for (b, &v) in gb.iter_mut().zip(row) {
                *b += alpha * v;
            }
        }
    }

    /// Mean cross-entropy over a minibatch of `batch` members given as
    /// groups of identical inputs. Equal to [`MlpModel::loss_and_grad`] on
    /// the expanded batch, with one forward and backward row per group.
    pub fn grouped_loss_and_grad(&self, groups: &[Group<T>], batch: usize) -> Result<(T, Gradients<T>)> {
        let (x, pre, loss, mut delta) = self.grouped_forward(groups, batch)?;
        let u = groups.len();
        let mut gw: Vec<Vec<T>> = self.weights.iter().map(|w| vec![T::zero(); w.len()]).collect();
        let mut gb: Vec<Vec<T>> = self.biases.iter().map(|b| vec![T::zero(); b.len()]).collect();
        let mut buf = Vec::new();
        for l in (0..self.weights.len()).rev() {
            let input = Self::layer_input(&x, &pre, l, &mut buf);
            self.accumulate(l, input, &delta, u, T::one(), T::zero(), &mut gw[l], &mut gb[l]);
            if l > 0 {
                delta = self.backprop_delta(l, &delta, &pre, u);
            }
        }
        Ok((loss, Gradients { weights: gw, biases: gb }))
    }

    /// One SGD step on a grouped minibatch, updating the parameters in
    /// place. Returns the loss before the update.
    pub fn sgd_step(&mut self, groups: &[Group<T>], batch: usize, lr: T) -> Result<T> {
        let (x, pre, loss, delta) = self.grouped_forward(groups, batch)?;
        if !loss.is_finite() {
            return Ok(loss);
        }
        let u = groups.len();
        let delta = self.step_above_first(&pre, delta, u, lr);
        self.update_layer(0, &x, &delta, u, lr);
        Ok(loss)
    }

    /// SGD step for a grouped minibatch whose first-layer products
    /// `x W0` (without bias) are already known, one row per member group.
    /// Updates every parameter except `W0` and returns the loss and the
    /// error at the first layer's output, from which the caller applies
    /// the `W0` update itself.
    pub(crate) fn sgd_step_from_first<'a>(
        &mut self,
        xw0: &[T],
        members: impl Iterator<Item = (usize, &'a [T])>,
        batch: usize,
        lr: T,
    ) -> (T, Vec<T>) {
        let h = self.dims[1];
        let u = xw0.len() / h;
        let mut z = self.bias_rows(0, u);
        for (a, &b) in z.iter_mut().zip(xw0) {
            *a += b;
        }
        let pre = self.forward_above_first(z, u);
        let (loss, delta) = self.output_delta(pre.last().expect("at least one layer"), members, batch);
        if !loss.is_finite() {
            return (loss, delta);
        }
        let delta = self.step_above_first(&pre, delta, u, lr);
        let mut b = std::mem::take(&mut self.biases[0]);
        for row in delta.chunks(h) {
            for (b, &v) in b.iter_mut().zip(row) {
                *b += -lr * v;
            }
        }
        self.biases[0] = b;
        (loss, delta)
    }

    /// Backpropagate the output error and update layers above the first.
    /// Returns the error at the first layer's output.
    fn step_above_first(&mut self, pre: &[Vec<T>], mut delta: Vec<T>, u: usize, lr: T) -> Vec<T> {
        for l in (1..self.weights.len()).rev() {
            let next = self.backprop_delta(l, &delta, pre, u);
            let input: Vec<T> = pre[l - 1].iter().map(|&v| v.max(T::zero())).collect();
            self.update_layer(l, &input, &delta, u, lr);
            delta = next;
        }
        delta
    }

    fn update_layer(&mut self, l: usize, input: &[T], delta: &[T], u: usize, lr: T) {
        let mut w = std::mem::take(&mut self.weights[l]);
        let mut b = std::mem::take(&mut self.biases[l]);
        self.accumulate(l, input, delta, u, -lr, T::one(), &mut w, &mut b);
        self.weights[l] = w;
        self.biases[l] = b;
    }

    /// `params -= lr * grads`.
    pub fn apply(&mut self, grads: &Gradients<T>, lr: T) {
        for (p, g) in self.weights.iter_mut().chain(self.biases.iter_mut()).zip(grads.weights.iter().chain(&grads.biases)) {
            for (a, &b) in p.iter_mut().zip(g) {
                *a -= lr * b;
            }
        }
    }
}

impl<T: Real> Gradients<T> {
    /// Flattened in the order of [`MlpModel::params_mut`].
    pub fn flatten(&self) -> Vec<T> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| w.iter().chain(b.iter()).copied()).collect()
    }
}

pub(crate) fn log_sum_exp<T: Real>(row: &[T]) -> T {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln()
}

pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let lse = log_sum_exp(row);
    for v in row.iter_mut() {
        *v = (*v - lse).exp();
    }
}
