use crate::error::{Error, Result};
use crate::numerics::{matmul, RngStream, Tensor1, Tensor2};

/// One affine layer, `out = input * weight + bias` with `weight` of shape
/// `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Tensor2,
    pub bias: Tensor1,
}

#[derive(Clone, Debug)]
pub struct LayerGrad {
    pub weight: Tensor2,
    pub bias: Tensor1,
}

/// Fully connected feature extractor. ReLU follows every layer except the
/// last, so the embedding itself is linear in the final hidden state.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpBackbone {
    layers: Vec<Layer>,
    version: u64,
}

/// Cached activations from [`MlpBackbone::forward`].
#[derive(Clone, Debug)]
pub struct BackboneTape {
    // inputs[l] feeds layer l; pre[l] is its affine output.
    inputs: Vec<Tensor2>,
    pre: Vec<Tensor2>,
    output: Tensor2,
    version: u64,
}

impl BackboneTape {
    pub fn output(&self) -> &Tensor2 {
        &self.output
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

impl MlpBackbone {
    /// Gaussian weights scaled by `1/sqrt(fan_in)`, zero biases.
    pub fn new(dims: &[usize], rng: &mut RngStream) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Domain(format!("invalid layer widths {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let std = 1.0 / (fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| std * rng.standard_normal())
                    .collect();
                Ok(Layer {
                    weight: Tensor2::from_vec(fan_in, fan_out, data)?,
                    bias: Tensor1::zeros(fan_out),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MlpBackbone { layers, version: 0 })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Domain("backbone needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.cols() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias length {} vs {} outputs",
                    l.bias.len(),
                    l.weight.cols()
                )));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].weight.cols() != w[1].weight.rows() {
                return Err(Error::Shape(format!(
                    "layer {i} emits {} values but layer {} takes {}",
                    w[0].weight.cols(),
                    i + 1,
                    w[1].weight.rows()
                )));
            }
        }
        Ok(MlpBackbone { layers, version: 0 })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.rows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.cols()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, BackboneTape)> {
        super::check_batch(x, self.input_dim(), "backbone input")?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = matmul(&a, &layer.weight)?;
            for r in 0..h.rows() {
                for (v, b) in h.row_mut(r).iter_mut().zip(layer.bias.data()) {
                    *v += b;
                }
            }
            let next = if l == last { h.clone() } else { h.map(relu) };
            inputs.push(a);
            pre.push(h);
            a = next;
        }
        let tape = BackboneTape {
            inputs,
            pre,
            output: a.clone(),
            version: self.version,
        };
        Ok((a, tape))
    }

    /// Returns per-layer gradients and the gradient with respect to the input.
    pub fn backward(&self, tape: &BackboneTape, dout: &Tensor2) -> Result<(Vec<LayerGrad>, Tensor2)> {
        if tape.version != self.version || tape.pre.len() != self.layers.len() {
            return Err(Error::Contract(
                "backbone tape does not belong to the current parameters".into(),
            ));
        }
        if dout.shape() != tape.output.shape() {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} vs features {:?}",
                dout.shape(),
                tape.output.shape()
            )));
        }
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = dout.clone();
        for l in (0..self.layers.len()).rev() {
            if l != last {
                let pre = &tape.pre[l];
                for (dv, &h) in d.data_mut().iter_mut().zip(pre.data()) {
                    if h <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
            let weight = matmul(&tape.inputs[l].transpose(), &d)?;
            let mut bias = vec![0.0; d.cols()];
            for r in 0..d.rows() {
                for (b, v) in bias.iter_mut().zip(d.row(r)) {
                    *b += v;
                }
            }
            let dinput = matmul(&d, &self.layers[l].weight.transpose())?;
            grads.push(LayerGrad {
                weight,
                bias: Tensor1::from_vec(bias)?,
            });
            d = dinput;
        }
        grads.reverse();
        Ok((grads, d))
    }

    /// Invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.weight.data_mut());
            out.push(l.bias.data_mut());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: &[&[f64]], b: &[f64]) -> Layer {
        Layer {
            weight: Tensor2::from_rows(w).unwrap(),
            bias: Tensor1::from_vec(b.to_vec()).unwrap(),
        }
    }

    #[test]
    fn zero_parameters_give_zero_features() {
        let net = MlpBackbone::from_layers(vec![
            layer(&[&[0.0, 0.0], &[0.0, 0.0]], &[0.0, 0.0]),
            layer(&[&[0.0], &[0.0]], &[0.0]),
        ])
        .unwrap();
        let x = Tensor2::from_rows(&[[1.0, -3.0], [7.5, 2.0]]).unwrap();
        let (f, _) = net.forward(&x).unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_identity_layer_passes_input_through() {
        let net = MlpBackbone::from_layers(vec![Layer {
            weight: Tensor2::identity(3),
            bias: Tensor1::zeros(3),
        }])
        .unwrap();
        let x = Tensor2::from_rows(&[[1.0, -2.0, 0.5]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().0, x);
    }

    #[test]
    fn two_layer_forward_by_hand() {
        // h = x W1 + b1 = [1, 2] [[1, -1], [0.5, 1]] + [0, -1] = [2, 0]
        // relu -> [2, 0]; f = [2, 0] [[1, 2], [3, 4]] + [0.5, 0] = [2.5, 4]
        let net = MlpBackbone::from_layers(vec![
            layer(&[&[1.0, -1.0], &[0.5, 1.0]], &[0.0, -1.0]),
            layer(&[&[1.0, 2.0], &[3.0, 4.0]], &[0.5, 0.0]),
        ])
        .unwrap();
        let x = Tensor2::from_rows(&[[1.0, 2.0]]).unwrap();
        let (f, _) = net.forward(&x).unwrap();
        assert_eq!(f.row(0), &[2.5, 4.0]);

        // a negative pre-activation is clipped: x = [-1, 0] -> h = [-1, 0] -> [0, 0]
        let x = Tensor2::from_rows(&[[-1.0, 0.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().0.row(0), &[0.5, 0.0]);
    }

    #[test]
    fn mismatched_layers_rejected() {
        let r = MlpBackbone::from_layers(vec![
            layer(&[&[1.0, 0.0]], &[0.0, 0.0]),
            layer(&[&[1.0]], &[0.0]),
        ]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut rng = RngStream::new(1);
        let mut net = MlpBackbone::new(&[2, 3, 2], &mut rng).unwrap();
        let x = Tensor2::from_rows(&[[0.1, 0.2]]).unwrap();
        let (f, tape) = net.forward(&x).unwrap();
        let _ = net.params_mut();
        let r = net.backward(&tape, &f);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let mut rng = RngStream::new(5);
        let net = MlpBackbone::new(&[4, 8, 3], &mut rng).unwrap();
        let x = Tensor2::from_rows(&[[0.3, -0.1, 2.0, 1.1], [0.0, 0.5, -0.7, 0.2]]).unwrap();
        let a = net.forward(&x).unwrap().0;
        let b = net.forward(&x).unwrap().0;
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
