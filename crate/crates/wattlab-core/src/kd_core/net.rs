//! A small residual multilayer network with analytic gradients.
//!
//! Shape: a stem affine maps the input to the hidden width, each residual
//! block computes `x + tanh(W x + b)` at fixed width, and a head affine
//! maps to one logit per output bit. Parameters live in one flat vector so
//! the trainer and the finite-difference tests can treat the network as a
//! plain function of its parameter vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::KdError;
use crate::model_ir::{BlockSpec, LayerSpec, ModelSpec};
use crate::seed::rng_for;

/// Architecture of a residual network, sized by hidden width and depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub n_residual_blocks: usize,
    pub output_bits: usize,
}

impl NetSpec {
    pub fn n_params(&self) -> usize {
        let (i, h, n, o) = (
            self.input_dim,
            self.hidden_width,
            self.n_residual_blocks,
            self.output_bits,
        );
        h * i + h + n * (h * h + h) + o * h + o
    }

    /// The architecture as a model IR, for FLOP accounting. Each residual
    /// block is one dense layer plus elementwise activation and skip-add.
    pub fn to_model_spec(&self) -> ModelSpec {
        let h = self.hidden_width as u64;
        let mut blocks = vec![BlockSpec::new(
            "stem",
            vec![LayerSpec::dense("stem_affine", self.input_dim as u64, h)],
        )];
        for i in 0..self.n_residual_blocks {
            blocks.push(BlockSpec::new(
                format!("block{:02}", i + 1),
                vec![
                    LayerSpec::dense(format!("block{:02}_affine", i + 1), h, h),
                    LayerSpec::elementwise(format!("block{:02}_act", i + 1), h),
                    LayerSpec::elementwise(format!("block{:02}_add", i + 1), h),
                ],
            ));
        }
        blocks.push(BlockSpec::new(
            "head",
            vec![LayerSpec::dense("head_affine", h, self.output_bits as u64)],
        ));
        ModelSpec::new(
            format!(
                "resnet-w{}-b{}",
                self.hidden_width, self.n_residual_blocks
            ),
            blocks,
        )
        .expect("net dimensions are positive")
    }

    pub fn flops_per_inference(&self) -> u64 {
        self.to_model_spec().total_flops()
    }
}

/// A network: its architecture plus a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub spec: NetSpec,
    pub params: Vec<f64>,
}

// Offsets into the flat parameter vector.
struct Layout {
    input_dim: usize,
    hidden: usize,
    blocks: usize,
    output: usize,
}

impl Layout {
    fn of(spec: &NetSpec) -> Self {
        Layout {
            input_dim: spec.input_dim,
            hidden: spec.hidden_width,
            blocks: spec.n_residual_blocks,
            output: spec.output_bits,
        }
    }
    fn stem_w(&self) -> usize {
        0
    }
    fn stem_b(&self) -> usize {
        self.hidden * self.input_dim
    }
    fn block_w(&self, i: usize) -> usize {
        self.stem_b() + self.hidden + i * (self.hidden * self.hidden + self.hidden)
    }
    fn block_b(&self, i: usize) -> usize {
        self.block_w(i) + self.hidden * self.hidden
    }
    fn head_w(&self) -> usize {
        self.block_w(self.blocks)
    }
    fn head_b(&self) -> usize {
        self.head_w() + self.output * self.hidden
    }
}

/// Intermediate activations of one forward pass, kept for backprop.
pub struct ForwardCache {
    /// Hidden state after the stem and after each residual block.
    states: Vec<Vec<f64>>,
    /// tanh outputs of each block.
    activations: Vec<Vec<f64>>,
}

impl Net {
    /// All-zero parameters: the network outputs zero logits everywhere.
    pub fn zeros(spec: NetSpec) -> Self {
        Net {
            params: vec![0.0; spec.n_params()],
            spec,
        }
    }

    /// Seeded uniform initialisation, scaled by 1/sqrt(fan_in) per layer.
    pub fn init(spec: NetSpec, seed: u64) -> Self {
        let mut rng = rng_for(seed, "init", 0);
        let layout = Layout::of(&spec);
        let mut params = vec![0.0; spec.n_params()];
        let fill = |params: &mut [f64], start: usize, rows: usize, cols: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let bound = 1.0 / (cols as f64).sqrt();
            for p in params[start..start + rows * cols].iter_mut() {
                *p = rng.gen_range(-bound..bound);
            }
        };
        fill(&mut params, layout.stem_w(), layout.hidden, layout.input_dim, &mut rng);
        for i in 0..layout.blocks {
            fill(&mut params, layout.block_w(i), layout.hidden, layout.hidden, &mut rng);
        }
        fill(&mut params, layout.head_w(), layout.output, layout.hidden, &mut rng);
        // Biases stay zero.
        Net { spec, params }
    }

    fn affine(
        &self,
        w_start: usize,
        b_start: usize,
        rows: usize,
        cols: usize,
        x: &[f64],
    ) -> Vec<f64> {
        let w = &self.params[w_start..w_start + rows * cols];
        let b = &self.params[b_start..b_start + rows];
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let mut acc = b[r];
            let row = &w[r * cols..(r + 1) * cols];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
        out
    }

    /// Logits for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, KdError> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), KdError> {
        if input.len() != self.spec.input_dim {
            return Err(KdError::DimensionMismatch {
                expected: self.spec.input_dim,
                got: input.len(),
            });
        }
        let layout = Layout::of(&self.spec);
        let h = layout.hidden;
        let mut states = Vec::with_capacity(layout.blocks + 1);
        let mut activations = Vec::with_capacity(layout.blocks);

        let mut x = self.affine(layout.stem_w(), layout.stem_b(), h, layout.input_dim, input);
        states.push(x.clone());
        for i in 0..layout.blocks {
            let pre = self.affine(layout.block_w(i), layout.block_b(i), h, h, &x);
            let act: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
            for (xv, av) in x.iter_mut().zip(&act) {
                *xv += av;
            }
            activations.push(act);
            states.push(x.clone());
        }
        let logits = self.affine(layout.head_w(), layout.head_b(), layout.output, h, &x);
        Ok((logits, ForwardCache { states, activations }))
    }

    /// Accumulate into `grad` the parameter gradient of one sample, given
    /// the loss gradient with respect to its logits.
    pub fn backprop_into(
        &self,
        input: &[f64],
        cache: &ForwardCache,
        logit_grad: &[f64],
        grad: &mut [f64],
    ) {
        let layout = Layout::of(&self.spec);
        let h = layout.hidden;

        // Head affine.
        let x_final = cache.states.last().expect("cache has stem state");
        let head_w = layout.head_w();
        let head_b = layout.head_b();
        let mut dx = vec![0.0; h];
        for o in 0..layout.output {
            let g = logit_grad[o];
            grad[head_b + o] += g;
            let row = head_w + o * h;
            for j in 0..h {
                grad[row + j] += g * x_final[j];
                dx[j] += g * self.params[row + j];
            }
        }

        // Residual blocks, last to first. x_i = x_{i-1} + tanh(W x_{i-1} + b).
        for i in (0..layout.blocks).rev() {
            let x_in = &cache.states[i];
            let act = &cache.activations[i];
            let w_start = layout.block_w(i);
            let b_start = layout.block_b(i);
            let mut dx_in = dx.clone(); // skip connection passes dx straight through
            for r in 0..h {
                let du = dx[r] * (1.0 - act[r] * act[r]);
                grad[b_start + r] += du;
                let row = w_start + r * h;
                for c in 0..h {
                    grad[row + c] += du * x_in[c];
                    dx_in[c] += du * self.params[row + c];
                }
            }
            dx = dx_in;
        }

        // Stem affine.
        let stem_w = layout.stem_w();
        let stem_b = layout.stem_b();
        for r in 0..h {
            grad[stem_b + r] += dx[r];
            let row = stem_w + r * layout.input_dim;
            for c in 0..layout.input_dim {
                grad[row + c] += dx[r] * input[c];
            }
        }
    }
}

/// Loss components of the distillation objective for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub student: f64,
    pub kd: f64,
}

/// A differentiable loss over one sample's logits.
pub trait LogitLoss {
    /// Loss parts and the gradient of `parts.total` with respect to the
    /// logits, for the given sample index.
    fn eval(&self, sample: usize, logits: &[f64]) -> Result<(LossParts, Vec<f64>), KdError>;
}

/// Mean batch loss and its analytic parameter gradient.
pub fn backward(
    net: &Net,
    inputs: &[Vec<f64>],
    loss: &dyn LogitLoss,
) -> Result<(LossParts, Vec<f64>), KdError> {
    let mut grad = vec![0.0; net.params.len()];
    let mut parts = LossParts::default();
    let scale = 1.0 / inputs.len().max(1) as f64;
    for (s, input) in inputs.iter().enumerate() {
        let (logits, cache) = net.forward_cached(input)?;
        let (sample_parts, logit_grad) = loss.eval(s, &logits)?;
        parts.total += sample_parts.total * scale;
        parts.student += sample_parts.student * scale;
        parts.kd += sample_parts.kd * scale;
        let scaled: Vec<f64> = logit_grad.iter().map(|g| g * scale).collect();
        net.backprop_into(input, &cache, &scaled, &mut grad);
    }
    Ok((parts, grad))
}

/// Mean batch loss without the gradient.
pub fn batch_loss(
    net: &Net,
    inputs: &[Vec<f64>],
    loss: &dyn LogitLoss,
) -> Result<LossParts, KdError> {
    let mut parts = LossParts::default();
    let scale = 1.0 / inputs.len().max(1) as f64;
    for (s, input) in inputs.iter().enumerate() {
        let logits = net.forward(input)?;
        let (sample_parts, _) = loss.eval(s, &logits)?;
        parts.total += sample_parts.total * scale;
        parts.student += sample_parts.student * scale;
        parts.kd += sample_parts.kd * scale;
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_give_zero_logits() {
        let spec = NetSpec {
            input_dim: 3,
            hidden_width: 5,
            n_residual_blocks: 2,
            output_bits: 4,
        };
        let net = Net::zeros(spec);
        let out = net.forward(&[0.7, -1.3, 2.2]).unwrap();
        assert_eq!(out, vec![0.0; 4]);
        let out = net.forward(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn output_shape_matches_spec() {
        let spec = NetSpec {
            input_dim: 4,
            hidden_width: 4,
            n_residual_blocks: 1,
            output_bits: 2,
        };
        let net = Net::init(spec, 9);
        let out = net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = NetSpec {
            input_dim: 4,
            hidden_width: 4,
            n_residual_blocks: 1,
            output_bits: 2,
        };
        let net = Net::zeros(spec);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(KdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn param_count_matches_layout() {
        let spec = NetSpec {
            input_dim: 3,
            hidden_width: 1,
            n_residual_blocks: 1,
            output_bits: 1,
        };
        // stem 3+1, block 1+1, head 1+1 -> 8 parameters.
        assert_eq!(spec.n_params(), 8);
        assert_eq!(Net::init(spec, 0).params.len(), 8);
    }

    #[test]
    fn flops_come_from_model_ir() {
        let spec = NetSpec {
            input_dim: 12,
            hidden_width: 8,
            n_residual_blocks: 2,
            output_bits: 2,
        };
        // stem 2*12*8 + blocks 2*(2*64 + 8 + 8) + head 2*8*2
        let expected = 192 + 2 * (128 + 16) + 32;
        assert_eq!(spec.flops_per_inference(), expected);
        let model = spec.to_model_spec();
        assert_eq!(model.blocks.len(), 4);
    }

    #[test]
    fn init_is_deterministic() {
        let spec = NetSpec {
            input_dim: 4,
            hidden_width: 6,
            n_residual_blocks: 2,
            output_bits: 3,
        };
        assert_eq!(Net::init(spec, 5).params, Net::init(spec, 5).params);
        assert_ne!(Net::init(spec, 5).params, Net::init(spec, 6).params);
    }
}
