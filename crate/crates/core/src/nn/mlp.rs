use crate::rng::RngStream;

/// Hidden layers are always ReLU; only the output nonlinearity varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Tanh,
}

/// Fully connected network. Parameters live in one flat buffer, layer by
/// layer, each layer as a row-major `out × in` weight matrix followed by its
/// bias vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputActivation,
    params: Vec<f64>,
}

/// Activations cached by a batched forward pass. `acts[0]` is the input and
/// `acts[l + 1]` the post-activation output of layer `l`.
#[derive(Clone, Debug)]
pub struct Tape {
    batch: usize,
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has at least the input")
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.acts.pop().expect("tape has at least the input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// `c ← a·b` (or `c ← a·b + c` with `accumulate`) on strided row/col layouts.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert!(c.len() >= m * n);
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the callers pass slices whose extents cover every strided
    // index touched for the given dimensions; `c` is row-major m × n.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Mlp {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`; the last layer is
    /// additionally multiplied by `final_scale`.
    pub fn new(sizes: &[usize], output: OutputActivation, final_scale: f64, rng: &mut RngStream) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "layer sizes must be positive");
        let mut params = Vec::with_capacity(param_count(sizes));
        let layers = sizes.len() - 1;
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let scale = if l + 1 == layers { final_scale } else { 1.0 };
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push(rng.uniform_range(-bound, bound) * scale);
            }
        }
        Self { sizes: sizes.to_vec(), output, params }
    }

    pub fn from_params(sizes: &[usize], output: OutputActivation, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && sizes.iter().all(|&s| s > 0) && params.len() == param_count(sizes)).then(|| Self {
            sizes: sizes.to_vec(),
            output,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// (weight offset, bias offset) of layer `l`.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let before: usize = self.sizes[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        (before, before + self.sizes[l] * self.sizes[l + 1])
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_batch(input, 1).into_output()
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Tape {
        assert_eq!(input.len(), batch * self.input_dim(), "input length does not match batch × input_dim");
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        for l in 0..layers {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.offsets(l);
            let w = &self.params[w_off..b_off];
            let b = &self.params[b_off..b_off + fan_out];
            let mut out = vec![0.0; batch * fan_out];
            for row in out.chunks_exact_mut(fan_out) {
                row.copy_from_slice(b);
            }
            let x = &acts[l];
            // out (B × out) += x (B × in) · wᵀ (in × out)
            gemm(batch, fan_in, fan_out, x, (fan_in as isize, 1), w, (1, fan_in as isize), &mut out, true);
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.output == OutputActivation::Tanh {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        Tape { batch, acts }
    }

    /// Reverse pass for the loss `Σ grad_out ⊙ output`. Returns parameter
    /// gradients (flat, same layout as [`Mlp::params`]) and input gradients.
    pub fn backward(&self, tape: &Tape, grad_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut grads = vec![0.0; self.params.len()];
        let dx = self.backprop(tape, grad_out, Some(&mut grads));
        (grads, dx)
    }

    /// Input gradients only; skips weight-gradient products.
    pub fn backward_input(&self, tape: &Tape, grad_out: &[f64]) -> Vec<f64> {
        self.backprop(tape, grad_out, None)
    }

    fn backprop(&self, tape: &Tape, grad_out: &[f64], mut grads: Option<&mut Vec<f64>>) -> Vec<f64> {
        let batch = tape.batch;
        assert_eq!(grad_out.len(), batch * self.output_dim(), "grad_out shape mismatch");
        let layers = self.sizes.len() - 1;
        let mut delta: Vec<f64> = match self.output {
            OutputActivation::Identity => grad_out.to_vec(),
            OutputActivation::Tanh => grad_out.iter().zip(tape.output()).map(|(g, y)| g * (1.0 - y * y)).collect(),
        };
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.offsets(l);
            let x = &tape.acts[l];
            if let Some(g) = grads.as_deref_mut() {
                // dW (out × in) = δᵀ (out × B) · x (B × in)
                gemm(
                    fan_out,
                    batch,
                    fan_in,
                    &delta,
                    (1, fan_out as isize),
                    x,
                    (fan_in as isize, 1),
                    &mut g[w_off..b_off],
                    false,
                );
                let gb = &mut g[b_off..b_off + fan_out];
                for row in delta.chunks_exact(fan_out) {
                    for (acc, d) in gb.iter_mut().zip(row) {
                        *acc += d;
                    }
                }
            }
            // dx (B × in) = δ (B × out) · W (out × in)
            let mut dx = vec![0.0; batch * fan_in];
            let w = &self.params[w_off..b_off];
            gemm(batch, fan_out, fan_in, &delta, (fan_out as isize, 1), w, (fan_in as isize, 1), &mut dx, false);
            if l > 0 {
                for (d, a) in dx.iter_mut().zip(x) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            delta = dx;
        }
        delta
    }
}
