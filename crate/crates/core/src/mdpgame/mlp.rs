use rand::Rng as _;

use crate::rng::Rng;

/// Fully connected network with `tanh` hidden units and a linear output.
///
/// Parameters are one flat vector: for each layer the row-major weight
/// matrix followed by the bias.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(
            sizes.len() >= 2,
            "network needs an input and an output layer"
        );
        Self { sizes }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&self, rng: &mut Rng) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for w in self.sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let a = (6.0 / (n_in + n_out) as f64).sqrt();
            for _ in 0..n_in * n_out {
                p.push(rng.gen_range(-a..=a));
            }
            p.extend(std::iter::repeat_n(0.0, n_out));
        }
        p
    }

    /// Activations of every layer, input first and output last.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(params.len(), self.num_params());
        let mut acts = vec![input.to_vec()];
        let mut off = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let prev = acts.last().expect("input layer");
            let weights = &params[off..off + n_in * n_out];
            let bias = &params[off + n_in * n_out..off + n_in * n_out + n_out];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = bias[o]
                        + weights[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(prev)
                            .map(|(w, x)| w * x)
                            .sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            off += n_out * (n_in + 1);
            acts.push(out);
        }
        acts
    }

    pub fn output(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        self.forward(params, input).pop().expect("output layer")
    }

    /// Adds `J(params)ᵀ d_out` to `grad`, where `acts` comes from [`forward`](Self::forward).
    pub fn backward(&self, params: &[f64], acts: &[Vec<f64>], d_out: &[f64], grad: &mut [f64]) {
        let mut offsets = Vec::with_capacity(self.sizes.len() - 1);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[1] * (w[0] + 1);
        }
        let mut delta = d_out.to_vec();
        for l in (0..self.sizes.len() - 1).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = off + o * n_in;
                for i in 0..n_in {
                    grad[row + i] += d * input[i];
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &params[off + o * n_in..off + (o + 1) * n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            // acts[l] are tanh outputs of layer l
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
}
