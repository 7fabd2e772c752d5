//! Feed-forward ReLU classifiers.
//!
//! A [`Network`] is a chain of affine layers. Every layer but the last is
//! followed by a ReLU; the last layer is affine only and produces the class
//! scores. Hidden neurons are addressed by [`NeuronId`] (1-based layer,
//! 0-based index) or by their ordinal in the global layer-major order fixed by
//! [`Signature`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One affine layer: `z = W * input + b`, one weight row per output neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        Self { weights, bias }
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// `W * input + b`.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| dot(row, input) + b)
            .collect()
    }

    /// `W^T * delta`.
    fn backward(&self, delta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.inputs()];
        for (row, d) in self.weights.iter().zip(delta) {
            if *d == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * d;
            }
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hidden neuron address. `layer` is 1-based and ranges over hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: usize,
    pub index: usize,
}

impl NeuronId {
    pub fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

/// Hidden layer sizes of a network. Fixes the layer-major, index-minor
/// neuron order used by every NAP vector and file encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(Vec<usize>);

impl Signature {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self(sizes)
    }

    /// A single hidden layer of `n` neurons; handy for synthetic oracles.
    pub fn flat(n: usize) -> Self {
        Self(vec![n])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.0
    }

    pub fn num_neurons(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn ordinal(&self, id: NeuronId) -> Result<usize> {
        if id.layer == 0 || id.layer > self.0.len() || id.index >= self.0[id.layer - 1] {
            return Err(Error::InvalidNeuron {
                layer: id.layer,
                index: id.index,
            });
        }
        Ok(self.0[..id.layer - 1].iter().sum::<usize>() + id.index)
    }

    pub fn neuron(&self, ordinal: usize) -> Result<NeuronId> {
        let mut rest = ordinal;
        for (l, &size) in self.0.iter().enumerate() {
            if rest < size {
                return Ok(NeuronId::new(l + 1, rest));
            }
            rest -= size;
        }
        Err(Error::InvalidNeuron {
            layer: 0,
            index: ordinal,
        })
    }

    /// All hidden neurons in global order.
    pub fn neurons(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(l, &size)| (0..size).map(move |i| NeuronId::new(l + 1, i)))
    }

    pub fn check_same(&self, other: &Signature) -> Result<()> {
        if self != other {
            return Err(Error::SignatureMismatch {
                left: self.0.clone(),
                right: other.0.clone(),
            });
        }
        Ok(())
    }
}

/// Pre- and post-activation values of every hidden layer plus the output.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ActivationTrace {
    /// Post-activations flattened in global neuron order.
    pub fn hidden_post(&self) -> impl Iterator<Item = f64> + '_ {
        self.post.iter().flatten().copied()
    }

    pub fn hidden_pre(&self) -> impl Iterator<Item = f64> + '_ {
        self.pre.iter().flatten().copied()
    }

    pub fn post_of(&self, id: NeuronId) -> f64 {
        self.post[id.layer - 1][id.index]
    }
}

/// A feed-forward ReLU classifier with `L >= 2` affine layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    signature: Signature,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::Model {
                layer: layers.len(),
                message: format!("a network needs at least 2 layers (one hidden), got {}", layers.len()),
            });
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            let number = i + 1;
            if layer.weights.len() != layer.bias.len() {
                return Err(Error::Model {
                    layer: number,
                    message: format!(
                        "{} weight rows but {} bias entries",
                        layer.weights.len(),
                        layer.bias.len()
                    ),
                });
            }
            if layer.bias.is_empty() {
                return Err(Error::Model {
                    layer: number,
                    message: "layer has no neurons".into(),
                });
            }
            if let Some(row) = layer.weights.iter().find(|r| r.len() != width) {
                return Err(Error::Model {
                    layer: number,
                    message: format!(
                        "weight matrix has {} columns, previous layer has width {}",
                        row.len(),
                        width
                    ),
                });
            }
            let finite = layer.weights.iter().flatten().chain(&layer.bias).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Model {
                    layer: number,
                    message: "non-finite entry".into(),
                });
            }
            width = layer.outputs();
        }
        let signature = Signature::new(layers[..layers.len() - 1].iter().map(Layer::outputs).collect());
        Ok(Self {
            input_dim,
            layers,
            signature,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::outputs)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Hidden layer sizes.
    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn num_hidden(&self) -> usize {
        self.signature.num_neurons()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Scalar-output networks accept any class id (the margin is `F(x)`).
    pub fn check_class(&self, class: usize) -> Result<()> {
        let outputs = self.output_dim();
        if outputs > 1 && class >= outputs {
            return Err(Error::InvalidClass { class, outputs });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ActivationTrace> {
        self.check_input(x)?;
        let hidden = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(hidden);
        let mut post = Vec::with_capacity(hidden);
        let mut current = x.to_vec();
        for layer in &self.layers[..hidden] {
            let z = layer.apply(&current);
            let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            pre.push(z);
            post.push(a.clone());
            current = a;
        }
        let output = self.layers[hidden].apply(&current);
        Ok(ActivationTrace { pre, post, output })
    }

    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.output)
    }

    /// Index of the largest output; ties go to the lowest index. Scalar
    /// outputs predict class 0 when `F(x) > 0` and class 1 otherwise.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let out = self.output(x)?;
        if out.len() == 1 {
            return Ok(if out[0] > 0.0 { 0 } else { 1 });
        }
        Ok(argmax(&out))
    }

    /// `F_c(x) - max_{k != c} F_k(x)`, or `F(x)` for scalar outputs.
    pub fn margin(&self, x: &[f64], class: usize) -> Result<f64> {
        self.check_class(class)?;
        Ok(margin_of(&self.output(x)?, class))
    }

    pub fn grad_margin_wrt_input(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        self.check_class(class)?;
        let trace = self.forward(x)?;
        let seed = output_seed(&trace.output, class);
        let grads = self.backprop(&trace, seed);
        Ok(grads.into_iter().next().unwrap_or_default())
    }

    /// Partial derivative of the margin with respect to the post-activation of
    /// `neuron`, holding all earlier layers fixed.
    pub fn grad_margin_wrt_hidden(&self, x: &[f64], class: usize, neuron: NeuronId) -> Result<f64> {
        self.check_class(class)?;
        self.signature.ordinal(neuron)?;
        let trace = self.forward(x)?;
        let seed = output_seed(&trace.output, class);
        let grads = self.backprop(&trace, seed);
        Ok(grads[neuron.layer][neuron.index])
    }

    /// Gradients of the margin for every hidden neuron of the trace, in
    /// global order.
    pub fn grad_margin_wrt_all_hidden(&self, trace: &ActivationTrace, class: usize) -> Vec<f64> {
        let seed = output_seed(&trace.output, class);
        self.backprop(trace, seed).into_iter().skip(1).flatten().collect()
    }

    /// Returns `d seed.output / d post^{(l)}` for `l = 0..L-1`, where
    /// `post^{(0)}` is the input itself.
    fn backprop(&self, trace: &ActivationTrace, seed: Vec<f64>) -> Vec<Vec<f64>> {
        let hidden = self.layers.len() - 1;
        let mut grads = vec![Vec::new(); hidden + 1];
        let mut g_post = self.layers[hidden].backward(&seed);
        for l in (0..hidden).rev() {
            grads[l + 1] = g_post.clone();
            // subgradient 0 at z = 0
            let delta: Vec<f64> = g_post
                .iter()
                .zip(&trace.pre[l])
                .map(|(g, z)| if *z > 0.0 { *g } else { 0.0 })
                .collect();
            g_post = self.layers[l].backward(&delta);
        }
        grads[0] = g_post;
        grads
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Highest-scoring class other than `class`; lowest index on ties.
pub fn best_rival(output: &[f64], class: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, v) in output.iter().enumerate() {
        if k == class {
            continue;
        }
        match best {
            Some(b) if output[b] >= *v => {}
            _ => best = Some(k),
        }
    }
    best
}

/// Margin of an output vector for `class`.
pub fn margin_of(output: &[f64], class: usize) -> f64 {
    if output.len() == 1 {
        return output[0];
    }
    match best_rival(output, class) {
        Some(k) => output[class] - output[k],
        None => output[class],
    }
}

fn output_seed(output: &[f64], class: usize) -> Vec<f64> {
    let mut seed = vec![0.0; output.len()];
    if output.len() == 1 {
        seed[0] = 1.0;
        return seed;
    }
    seed[class] = 1.0;
    if let Some(k) = best_rival(output, class) {
        seed[k] -= 1.0;
    }
    seed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hidden(w1: Vec<Vec<f64>>, b1: Vec<f64>, w2: Vec<Vec<f64>>, b2: Vec<f64>) -> Network {
        let d = w1[0].len();
        Network::new(d, vec![Layer::new(w1, b1), Layer::new(w2, b2)]).unwrap()
    }

    #[test]
    fn single_layer_is_rejected() {
        let err = Network::new(1, vec![Layer::new(vec![vec![1.0]], vec![0.0])]).unwrap_err();
        assert!(matches!(err, Error::Model { .. }));
    }

    #[test]
    fn dimension_mismatch_names_layer_one() {
        let layers = vec![
            Layer::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![0.0, 0.0]),
            Layer::new(vec![vec![1.0, 1.0]], vec![0.0]),
        ];
        match Network::new(2, layers).unwrap_err() {
            Error::Model { layer, .. } => assert_eq!(layer, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_entry_names_layer() {
        let layers = vec![
            Layer::new(vec![vec![1.0]], vec![0.0]),
            Layer::new(vec![vec![f64::NAN]], vec![0.0]),
        ];
        match Network::new(1, layers).unwrap_err() {
            Error::Model { layer, .. } => assert_eq!(layer, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn forward_hand_example() {
        let net = one_hidden(
            vec![vec![1.0], vec![-1.0]],
            vec![0.0, 0.0],
            vec![vec![1.0, 1.0]],
            vec![0.0],
        );
        let trace = net.forward(&[2.0]).unwrap();
        assert_eq!(trace.post[0], vec![2.0, 0.0]);
        assert_eq!(trace.pre[0], vec![2.0, -2.0]);
    }

    #[test]
    fn zero_network_is_zero_everywhere() {
        let net = one_hidden(
            vec![vec![0.0, 0.0]; 3],
            vec![0.0; 3],
            vec![vec![0.0; 3]; 2],
            vec![0.0; 2],
        );
        let trace = net.forward(&[0.3, -7.0]).unwrap();
        assert!(trace.hidden_pre().all(|v| v == 0.0));
        assert!(trace.hidden_post().all(|v| v == 0.0));
        assert_eq!(trace.output, vec![0.0, 0.0]);
        assert_eq!(net.grad_margin_wrt_input(&[0.3, -7.0], 0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = one_hidden(vec![vec![1.0]], vec![0.0], vec![vec![1.0]], vec![0.0]);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn margin_definitions() {
        assert_eq!(margin_of(&[3.0, 1.0], 0), 2.0);
        assert_eq!(margin_of(&[1.0, 1.0], 0), 0.0);
        assert_eq!(margin_of(&[-0.4], 0), -0.4);
    }

    #[test]
    fn margin_rejects_bad_class() {
        let net = one_hidden(vec![vec![1.0]], vec![0.0], vec![vec![1.0], vec![2.0]], vec![0.0, 0.0]);
        assert!(matches!(net.margin(&[1.0], 2), Err(Error::InvalidClass { .. })));
    }

    #[test]
    fn input_gradient_is_row_difference_of_linear_map() {
        // Both hidden units active at x = (1, 1): the map is affine.
        let net = one_hidden(
            vec![vec![1.0, 2.0], vec![3.0, -1.0]],
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
        );
        // output = (x0 + 2 x1 + .5, 3 x0 - x1 + .5) = (3.5, 2.5); rival of class 0 is 1
        let g = net.grad_margin_wrt_input(&[1.0, 1.0], 0).unwrap();
        assert_eq!(g, vec![1.0 - 3.0, 2.0 + 1.0]);
    }

    #[test]
    fn hidden_gradient_of_last_layer_is_weight_difference() {
        let net = one_hidden(
            vec![vec![1.0], vec![1.0]],
            vec![0.0, 0.0],
            vec![vec![2.0, -1.0], vec![0.5, 4.0]],
            vec![0.0, 0.0],
        );
        let x = [1.0];
        // outputs: (1, 4.5) -> class 0 rival is 1
        let g0 = net.grad_margin_wrt_hidden(&x, 0, NeuronId::new(1, 0)).unwrap();
        let g1 = net.grad_margin_wrt_hidden(&x, 0, NeuronId::new(1, 1)).unwrap();
        assert_eq!(g0, 2.0 - 0.5);
        assert_eq!(g1, -1.0 - 4.0);
    }

    #[test]
    fn hidden_gradient_zero_downstream() {
        let net = one_hidden(
            vec![vec![1.0], vec![1.0]],
            vec![0.0, 0.0],
            vec![vec![0.0, 1.0]],
            vec![0.0],
        );
        assert_eq!(net.grad_margin_wrt_hidden(&[1.0], 0, NeuronId::new(1, 0)).unwrap(), 0.0);
        assert!(net.grad_margin_wrt_hidden(&[1.0], 0, NeuronId::new(2, 0)).is_err());
    }

    #[test]
    fn signature_ordinals_round_trip() {
        let sig = Signature::new(vec![3, 2, 4]);
        for (ord, id) in sig.neurons().enumerate() {
            assert_eq!(sig.ordinal(id).unwrap(), ord);
            assert_eq!(sig.neuron(ord).unwrap(), id);
        }
        assert!(sig.neuron(9).is_err());
        assert!(sig.ordinal(NeuronId::new(0, 0)).is_err());
    }
}
