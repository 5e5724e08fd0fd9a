//! MLP feature extractor, classifier heads and checkpoints.
//!
//! Every backward pass here is derived by hand and checked against
//! central finite differences in the tests.

mod checkpoint;
mod head;
mod mlp;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use head::{CosineClassifier, CosineTape, Head, HeadGrad, HeadTape, LinearClassifier, LinearTape};
pub use mlp::{BackboneTape, Layer, LayerGrad, MlpBackbone};

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor2};

/// Norm floor below which a feature or anchor counts as zero.
pub const NORM_FLOOR: f64 = 1e-12;

/// Which classifier sits on top of the backbone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Cosine-normalized anchors, no bias.
    Cosine,
    /// Plain dot-product logits with a bias.
    Linear,
}

/// Backbone plus classifier head.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub backbone: MlpBackbone,
    pub head: Head,
}

/// Everything `Model::backward` needs from the matching forward call.
#[derive(Clone, Debug)]
pub struct ForwardTape {
    pub backbone: BackboneTape,
    pub head: HeadTape,
}

impl ForwardTape {
    pub fn features(&self) -> &Tensor2 {
        self.backbone.output()
    }
}

/// Gradients for every parameter plus the network input.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub head: HeadGrad,
    pub input: Tensor2,
}

impl Gradients {
    /// Gradient slices in the same order as [`Model::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            out.push(l.weight.data());
            out.push(l.bias.data());
        }
        out.extend(self.head.slices());
        out
    }

    /// Gradient slices in the same order as [`Model::head_params_mut`].
    pub fn head_slices(&self) -> Vec<&[f64]> {
        self.head.slices()
    }
}

impl Model {
    /// Random initialization: `dims` runs from the input width to the
    /// embedding width, e.g. `[32, 64, 64, 16]`.
    pub fn new(dims: &[usize], classes: usize, kind: HeadKind, rng: &mut RngStream) -> Result<Self> {
        let backbone = MlpBackbone::new(dims, rng)?;
        let embed = backbone.embedding_dim();
        let head = match kind {
            HeadKind::Cosine => Head::Cosine(CosineClassifier::new(embed, classes, rng)?),
            HeadKind::Linear => Head::Linear(LinearClassifier::new(embed, classes, rng)?),
        };
        Ok(Model { backbone, head })
    }

    pub fn head_kind(&self) -> HeadKind {
        self.head.kind()
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, ForwardTape)> {
        let (f, backbone) = self.backbone.forward(x)?;
        let (logits, head) = self.head.forward(&f)?;
        Ok((logits, ForwardTape { backbone, head }))
    }

    /// Logits without recording a tape.
    pub fn logits(&self, x: &Tensor2) -> Result<Tensor2> {
        Ok(self.forward(x)?.0)
    }

    /// Embedding features only.
    pub fn forward_features(&self, x: &Tensor2) -> Result<(Tensor2, BackboneTape)> {
        self.backbone.forward(x)
    }

    pub fn backward(&self, tape: &ForwardTape, dlogits: &Tensor2) -> Result<Gradients> {
        let (head, df) = self.head.backward(&tape.head, dlogits)?;
        let (layers, input) = self.backbone.backward(&tape.backbone, &df)?;
        Ok(Gradients { layers, head, input })
    }

    /// Head-only backward pass for a frozen backbone.
    pub fn backward_head(&self, tape: &HeadTape, dlogits: &Tensor2) -> Result<HeadGrad> {
        Ok(self.head.backward(tape, dlogits)?.0)
    }

    /// Mutable parameter slices: each layer's weight then bias, then the head.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.backbone.params_mut();
        out.extend(self.head.params_mut());
        out
    }

    pub fn head_params_mut(&mut self) -> Vec<&mut [f64]> {
        self.head.params_mut()
    }

    pub fn param_count(&self) -> usize {
        self.backbone.param_count() + self.head.param_count()
    }
}

pub(crate) fn row_norms(t: &Tensor2) -> Vec<f64> {
    (0..t.rows())
        .map(|r| t.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

pub(crate) fn check_batch(x: &Tensor2, cols: usize, what: &str) -> Result<()> {
    if x.cols() != cols {
        return Err(Error::Shape(format!(
            "{what}: expected {cols} columns, got {}",
            x.cols()
        )));
    }
    Ok(())
}
