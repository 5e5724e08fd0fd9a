use crate::error::{Error, Result};
use crate::numerics::{matmul, RngStream, Tensor1, Tensor2};

use super::{check_batch, row_norms, HeadKind, NORM_FLOOR};

/// Cosine-normalized classifier: `z[i][j] = <f_i, w_j> / (|f_i| |w_j|)`.
///
/// `weight` is `D x C`; column `j` is the anchor of class `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CosineClassifier {
    weight: Tensor2,
    version: u64,
}

#[derive(Clone, Debug)]
pub struct CosineTape {
    unit_features: Tensor2,
    unit_anchors: Tensor2,
    feature_norms: Vec<f64>,
    anchor_norms: Vec<f64>,
    version: u64,
}

fn check_anchors(weight: &Tensor2) -> Result<Vec<f64>> {
    let norms = row_norms(&weight.transpose());
    if let Some(j) = norms.iter().position(|&n| n < NORM_FLOOR) {
        return Err(Error::Degenerate(format!("anchor of class {j} has zero norm")));
    }
    Ok(norms)
}

impl CosineClassifier {
    pub fn new(dim: usize, classes: usize, rng: &mut RngStream) -> Result<Self> {
        let std = 1.0 / (dim as f64).sqrt();
        let data = (0..dim * classes).map(|_| std * rng.standard_normal()).collect();
        CosineClassifier::from_weight(Tensor2::from_vec(dim, classes, data)?)
    }

    pub fn from_weight(weight: Tensor2) -> Result<Self> {
        if weight.cols() < 2 {
            return Err(Error::Domain(format!(
                "need at least 2 classes, got {}",
                weight.cols()
            )));
        }
        check_anchors(&weight)?;
        Ok(CosineClassifier { weight, version: 0 })
    }

    pub fn weight(&self) -> &Tensor2 {
        &self.weight
    }

    pub fn classes(&self) -> usize {
        self.weight.cols()
    }

    /// Cosine logits in `[-1, 1]`; fails on a zero-norm feature row.
    pub fn logits(&self, f: &Tensor2) -> Result<(Tensor2, CosineTape)> {
        check_batch(f, self.weight.rows(), "cosine head input")?;
        let feature_norms = row_norms(f);
        if let Some(i) = feature_norms.iter().position(|&n| n < NORM_FLOOR) {
            return Err(Error::Degenerate(format!("feature row {i} has zero norm")));
        }
        let anchor_norms = check_anchors(&self.weight)?;
        let mut unit_features = f.clone();
        for (i, n) in feature_norms.iter().enumerate() {
            unit_features.row_mut(i).iter_mut().for_each(|v| *v /= n);
        }
        let mut unit_anchors = self.weight.clone();
        for r in 0..unit_anchors.rows() {
            for (v, n) in unit_anchors.row_mut(r).iter_mut().zip(&anchor_norms) {
                *v /= n;
            }
        }
        let z = matmul(&unit_features, &unit_anchors)?;
        let tape = CosineTape {
            unit_features,
            unit_anchors,
            feature_norms,
            anchor_norms,
            version: self.version,
        };
        Ok((z, tape))
    }

    /// Returns `(dL/dW, dL/df)`.
    pub fn backward(&self, tape: &CosineTape, dz: &Tensor2) -> Result<(Tensor2, Tensor2)> {
        if tape.version != self.version {
            return Err(Error::Contract(
                "cosine tape does not belong to the current anchors".into(),
            ));
        }
        let (u, v) = (&tape.unit_features, &tape.unit_anchors);
        if dz.shape() != (u.rows(), v.cols()) {
            return Err(Error::Shape(format!(
                "logit gradient {:?}, expected {:?}",
                dz.shape(),
                (u.rows(), v.cols())
            )));
        }
        // Through x / |x|: d/dx = (g - <g, x_hat> x_hat) / |x|.
        let mut df = matmul(dz, &v.transpose())?;
        for i in 0..df.rows() {
            let ui = u.row(i);
            let proj: f64 = df.row(i).iter().zip(ui).map(|(g, x)| g * x).sum();
            let n = tape.feature_norms[i];
            for (g, x) in df.row_mut(i).iter_mut().zip(ui) {
                *g = (*g - proj * x) / n;
            }
        }
        let gv = matmul(&u.transpose(), dz)?;
        let mut dw = gv.clone();
        for j in 0..v.cols() {
            let mut proj = 0.0;
            for d in 0..v.rows() {
                proj += gv.get(d, j) * v.get(d, j);
            }
            let n = tape.anchor_norms[j];
            for d in 0..v.rows() {
                dw.set(d, j, (gv.get(d, j) - proj * v.get(d, j)) / n);
            }
        }
        Ok((dw, df))
    }
}

/// Dot-product classifier with bias, `z = f W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearClassifier {
    weight: Tensor2,
    bias: Tensor1,
    version: u64,
}

#[derive(Clone, Debug)]
pub struct LinearTape {
    features: Tensor2,
    version: u64,
}

impl LinearClassifier {
    pub fn new(dim: usize, classes: usize, rng: &mut RngStream) -> Result<Self> {
        let std = 1.0 / (dim as f64).sqrt();
        let data = (0..dim * classes).map(|_| std * rng.standard_normal()).collect();
        LinearClassifier::from_parts(Tensor2::from_vec(dim, classes, data)?, Tensor1::zeros(classes))
    }

    pub fn from_parts(weight: Tensor2, bias: Tensor1) -> Result<Self> {
        if weight.cols() < 2 || bias.len() != weight.cols() {
            return Err(Error::Shape(format!(
                "linear head {:?} with bias of length {}",
                weight.shape(),
                bias.len()
            )));
        }
        Ok(LinearClassifier {
            weight,
            bias,
            version: 0,
        })
    }

    pub fn weight(&self) -> &Tensor2 {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor1 {
        &self.bias
    }

    pub fn logits(&self, f: &Tensor2) -> Result<(Tensor2, LinearTape)> {
        check_batch(f, self.weight.rows(), "linear head input")?;
        let mut z = matmul(f, &self.weight)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(self.bias.data()) {
                *v += b;
            }
        }
        Ok((
            z,
            LinearTape {
                features: f.clone(),
                version: self.version,
            },
        ))
    }

    /// Returns `(dL/dW, dL/db, dL/df)`.
    pub fn backward(&self, tape: &LinearTape, dz: &Tensor2) -> Result<(Tensor2, Tensor1, Tensor2)> {
        if tape.version != self.version {
            return Err(Error::Contract(
                "linear tape does not belong to the current weights".into(),
            ));
        }
        if dz.shape() != (tape.features.rows(), self.weight.cols()) {
            return Err(Error::Shape(format!("logit gradient {:?}", dz.shape())));
        }
        let dw = matmul(&tape.features.transpose(), dz)?;
        let mut db = vec![0.0; dz.cols()];
        for r in 0..dz.rows() {
            for (b, v) in db.iter_mut().zip(dz.row(r)) {
                *b += v;
            }
        }
        let df = matmul(dz, &self.weight.transpose())?;
        Ok((dw, Tensor1::from_vec(db)?, df))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    Cosine(CosineClassifier),
    Linear(LinearClassifier),
}

#[derive(Clone, Debug)]
pub enum HeadTape {
    Cosine(CosineTape),
    Linear(LinearTape),
}

#[derive(Clone, Debug)]
pub struct HeadGrad {
    pub weight: Tensor2,
    pub bias: Option<Tensor1>,
}

impl HeadGrad {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.weight.data()];
        if let Some(b) = &self.bias {
            out.push(b.data());
        }
        out
    }
}

impl Head {
    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Cosine(_) => HeadKind::Cosine,
            Head::Linear(_) => HeadKind::Linear,
        }
    }

    pub fn classes(&self) -> usize {
        self.weight().cols()
    }

    pub fn weight(&self) -> &Tensor2 {
        match self {
            Head::Cosine(c) => &c.weight,
            Head::Linear(l) => &l.weight,
        }
    }

    pub fn forward(&self, f: &Tensor2) -> Result<(Tensor2, HeadTape)> {
        match self {
            Head::Cosine(c) => c.logits(f).map(|(z, t)| (z, HeadTape::Cosine(t))),
            Head::Linear(l) => l.logits(f).map(|(z, t)| (z, HeadTape::Linear(t))),
        }
    }

    pub fn backward(&self, tape: &HeadTape, dz: &Tensor2) -> Result<(HeadGrad, Tensor2)> {
        match (self, tape) {
            (Head::Cosine(c), HeadTape::Cosine(t)) => {
                let (weight, df) = c.backward(t, dz)?;
                Ok((HeadGrad { weight, bias: None }, df))
            }
            (Head::Linear(l), HeadTape::Linear(t)) => {
                let (weight, bias, df) = l.backward(t, dz)?;
                Ok((
                    HeadGrad {
                        weight,
                        bias: Some(bias),
                    },
                    df,
                ))
            }
            _ => Err(Error::Contract("tape was recorded by a different head".into())),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Head::Cosine(c) => c.weight.data().len(),
            Head::Linear(l) => l.weight.data().len() + l.bias.len(),
        }
    }

    /// Invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Head::Cosine(c) => {
                c.version += 1;
                vec![c.weight.data_mut()]
            }
            Head::Linear(l) => {
                l.version += 1;
                vec![l.weight.data_mut(), l.bias.data_mut()]
            }
        }
    }
}
