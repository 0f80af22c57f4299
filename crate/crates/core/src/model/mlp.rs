use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::Minibatch;
use crate::seed;

/// One affine layer `x ↦ x W + b` acting on row vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in × fan_out`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: DMatrix::zeros(fan_in, fan_out),
            bias: DVector::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }
}

/// ReLU on hidden layers, identity on the scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Dense>,
}

/// Gradients share the parameter layout.
pub type Gradients = MlpModel;

/// He-style uniform initialisation: weights in `±√(6 / fan_in)`, zero biases.
pub fn init_mlp(input_dim: usize, hidden: &[usize], seed: u64) -> MlpModel {
    assert!(input_dim > 0 && hidden.iter().all(|&w| w > 0), "layer widths must be positive");
    let mut rng = seed::rng(seed);
    let mut dims = vec![input_dim];
    dims.extend_from_slice(hidden);
    dims.push(1);
    let layers = dims
        .windows(2)
        .map(|w| {
            let bound = (6.0 / w[0] as f64).sqrt();
            Dense {
                weights: DMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-bound..bound)),
                bias: DVector::zeros(w[1]),
            }
        })
        .collect();
    MlpModel { layers }
}

/// Regularizer applied to potential differences in the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRegularizer {
    /// Adds `λ·Δh²` per pair.
    Trajectory,
    /// Unregularized loss; rely on weight decay / early stopping.
    None,
}

struct Tape {
    /// Layer inputs, `a_0 = X`, then post-activation hidden outputs.
    inputs: Vec<DMatrix<f64>>,
    output: DMatrix<f64>,
}

impl MlpModel {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    /// Layer widths from input to the scalar output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Dense::fan_out));
        d
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameter tensors in a fixed order: `w0, b0, w1, b1, …`.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn check_dim(&self, len: usize) -> Result<usize> {
        let d = self.input_dim();
        if !len.is_multiple_of(d) {
            return Err(Error::Dimension {
                expected: d,
                got: len,
            });
        }
        Ok(len / d)
    }

    fn run(&self, x: DMatrix<f64>, keep: bool) -> Tape {
        let mut inputs = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        let mut a = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = &a * &layer.weights;
            for mut row in z.row_iter_mut() {
                row += layer.bias.transpose();
            }
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            }
            let prev = std::mem::replace(&mut a, z);
            if keep {
                inputs.push(prev);
            }
        }
        Tape { inputs, output: a }
    }

    /// Evaluate `h` on a row-major batch of states.
    pub fn forward(&self, states: &[f64]) -> Result<Vec<f64>> {
        let rows = self.check_dim(states.len())?;
        if rows == 0 {
            return Ok(Vec::new());
        }
        let x = DMatrix::from_row_slice(rows, self.input_dim(), states);
        Ok(self.run(x, false).output.as_slice().to_vec())
    }

    pub fn forward_one(&self, state: &[f64]) -> Result<f64> {
        if state.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: state.len(),
            });
        }
        Ok(self.forward(state)?[0])
    }

    /// Reverse-mode pass: gradient of `Σ_i upstream_i · h(x_i)`.
    fn backward(&self, tape: &Tape, upstream: DMatrix<f64>) -> Gradients {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[i];
            let weights = input.tr_mul(&delta);
            let bias = DVector::from_iterator(
                delta.ncols(),
                delta.column_iter().map(|c| c.sum()),
            );
            grads.push(Dense { weights, bias });
            if i > 0 {
                let mut next = &delta * layer.weights.transpose();
                next.zip_apply(input, |d, a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = next;
            }
        }
        grads.reverse();
        MlpModel { layers: grads }
    }
}

/// Mean over the batch of `−Δh + λ·Δh²` (the `λ` term only for
/// [`PairRegularizer::Trajectory`]), `Δh = h(s_{t+1}) − h(s_t)`, and its
/// gradient with respect to every parameter.
pub fn loss_and_grad(
    model: &MlpModel,
    batch: &Minibatch,
    lambda: f64,
    reg: PairRegularizer,
) -> Result<(f64, Gradients)> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::EmptyBuffer);
    }
    if batch.dim != model.input_dim() {
        return Err(Error::Dimension {
            expected: model.input_dim(),
            got: batch.dim,
        });
    }
    let d = batch.dim;
    // both ends of every pair go through one stacked forward pass
    let mut stacked = Vec::with_capacity(2 * b * d);
    stacked.extend_from_slice(&batch.current);
    stacked.extend_from_slice(&batch.next);
    let x = DMatrix::from_row_slice(2 * b, d, &stacked);
    let tape = model.run(x, true);
    let h = tape.output.as_slice();
    let lam = match reg {
        PairRegularizer::Trajectory => lambda,
        PairRegularizer::None => 0.0,
    };
    let mut loss = 0.0;
    let mut upstream = DMatrix::zeros(2 * b, 1);
    for i in 0..b {
        let dh = h[b + i] - h[i];
        loss += -dh + lam * dh * dh;
        let g = (-1.0 + 2.0 * lam * dh) / b as f64;
        upstream[(i, 0)] = -g;
        upstream[(b + i, 0)] = g;
    }
    Ok((loss / b as f64, model.backward(&tape, upstream)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count() {
        let m = init_mlp(147, &[256, 256], 0);
        assert_eq!(m.num_params(), 147 * 256 + 256 + 256 * 256 + 256 + 256 + 1);
        assert_eq!(m.num_params(), 103_937);
        assert_eq!(m.dims(), vec![147, 256, 256, 1]);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_mlp(5, &[4], 3);
        assert_eq!(a, init_mlp(5, &[4], 3));
        assert_ne!(a, init_mlp(5, &[4], 4));
        let bound = (6.0f64 / 5.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= bound));
        assert!(a.tensors().skip(1).step_by(2).all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn no_hidden_layers_is_affine() {
        let mut m = init_mlp(3, &[], 0);
        assert_eq!(m.layers.len(), 1);
        m.layers[0].weights = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        m.layers[0].bias[0] = 0.25;
        let h = m.forward(&[1.0, 1.0, 2.0, -1.0, 0.0, 0.0]).unwrap();
        assert_eq!(h, vec![1.0 - 2.0 + 1.0 + 0.25, -1.0 + 0.25]);
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = init_mlp(4, &[8, 8], 1).zeros_like();
        assert!(m.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sum_model() {
        let mut m = init_mlp(4, &[], 1);
        m.layers[0].weights.fill(1.0);
        assert_eq!(m.forward_one(&[1.0, 2.0, 3.0, 4.5]).unwrap(), 10.5);
    }

    #[test]
    fn batch_matches_single() {
        let m = init_mlp(6, &[7, 5], 9);
        let mut rng = seed::rng(1);
        let xs: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let batch = m.forward(&xs).unwrap();
        for (i, chunk) in xs.chunks(6).enumerate() {
            assert!((m.forward_one(chunk).unwrap() - batch[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = init_mlp(6, &[7], 9);
        assert!(matches!(m.forward(&[0.0; 5]), Err(Error::Dimension { .. })));
        assert!(m.forward_one(&[0.0; 12]).is_err());
    }

    #[test]
    fn identical_pairs_have_zero_loss_and_gradient() {
        let m = init_mlp(3, &[4], 2);
        let s = [0.3, -0.2, 0.9];
        let batch = Minibatch::from_pairs(3, &[(&s, &s), (&s, &s)]).unwrap();
        let (loss, g) = loss_and_grad(&m, &batch, 0.7, PairRegularizer::Trajectory).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.tensors().all(|t| t.iter().all(|v| v.abs() < 1e-15)));
    }

    #[test]
    fn affine_gradient_by_hand() {
        let m = init_mlp(3, &[], 5);
        let a = [1.0, 2.0, 3.0];
        let b = [0.5, 4.0, -1.0];
        let batch = Minibatch::from_pairs(3, &[(&a, &b)]).unwrap();
        let (_, g) = loss_and_grad(&m, &batch, 0.0, PairRegularizer::None).unwrap();
        let expected: Vec<f64> = a.iter().zip(&b).map(|(x, y)| -(y - x)).collect();
        assert_eq!(g.layers[0].weights.as_slice(), expected.as_slice());
        assert_eq!(g.layers[0].bias[0], 0.0);
    }
}
