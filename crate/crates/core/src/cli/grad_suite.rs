//! Finite-difference check of every hand-written gradient in the crate.

use std::fmt;

use crate::error::Result;
use crate::gcl::{ce_loss, compute_cloud_sizes, gcl_loss, sample_epsilon, CloudSizeTable, CloudStrategy, GclConfig};
use crate::model::{Head, HeadKind, Model};
use crate::numerics::{finite_diff_grad, matmul, relative_error, RngStream, Tensor1, Tensor2};

/// Central-difference step.
pub const STEP: f64 = 1e-6;

/// Gradients under test. MLP layers are numbered from the input side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    CeLoss,
    GclLoss,
    CosineHead,
    LinearHead,
    MlpLayer(usize),
}

pub const DEPTH: usize = 3;

impl Component {
    pub fn all() -> Vec<Component> {
        let mut out = vec![Component::CeLoss, Component::GclLoss, Component::CosineHead, Component::LinearHead];
        out.extend((0..DEPTH).map(Component::MlpLayer));
        out
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::CeLoss => f.write_str("ce_loss"),
            Component::GclLoss => f.write_str("gcl_loss"),
            Component::CosineHead => f.write_str("cosine_head"),
            Component::LinearHead => f.write_str("linear_head"),
            Component::MlpLayer(l) => write!(f, "mlp_layer{l}"),
        }
    }
}

impl std::str::FromStr for Component {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::all()
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| crate::Error::Config(format!("unknown gradient component `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComponentResult {
    pub component: Component,
    /// Worst relative error over all cases.
    pub max_rel_error: f64,
    pub cases: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    pub cases: usize,
    pub seed: u64,
    /// Negate the analytic gradient of one component (mutation canary).
    pub sign_flip: Option<Component>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            cases: 20,
            seed: 0,
            sign_flip: None,
        }
    }
}

struct Case {
    x: Tensor2,
    labels: Vec<usize>,
    eps: Vec<f64>,
    table: CloudSizeTable,
    gcl: GclConfig,
    cosine: Model,
    linear: Model,
}

fn normal(rng: &mut RngStream, rows: usize, cols: usize, scale: f64) -> Result<Tensor2> {
    Tensor2::from_vec(rows, cols, (0..rows * cols).map(|_| scale * rng.standard_normal()).collect())
}

/// Distance from the nearest point where finite differences break down:
/// a ReLU kink, a zero feature vector or a cosine at +-1.
fn kink_distance(m: &Model, x: &Tensor2) -> Result<f64> {
    let layers = m.backbone.layers();
    let mut h = x.clone();
    let mut closest = f64::INFINITY;
    for layer in &layers[..layers.len() - 1] {
        let mut a = matmul(&h, &layer.weight)?;
        for r in 0..a.rows() {
            for (v, b) in a.row_mut(r).iter_mut().zip(layer.bias.data()) {
                *v += b;
                closest = closest.min(v.abs());
            }
            // A sample with every unit off passes no signal to earlier layers.
            if a.row(r).iter().all(|&v| v <= 0.0) {
                closest = 0.0;
            }
        }
        h = a.map(|v| v.max(0.0));
    }
    // The cosine normalization is singular at a zero feature vector.
    let (f, _) = m.forward_features(x)?;
    for r in 0..f.rows() {
        closest = closest.min(f.row(r).iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    // Clouded logits require cosine values inside [-1, 1].
    if m.head_kind() == HeadKind::Cosine {
        let z = m.logits(x)?;
        closest = closest.min(z.data().iter().fold(f64::INFINITY, |c, v| c.min(1.0 - v.abs())));
    }
    Ok(closest)
}

/// Minimum distance from any ReLU kink for an accepted case.
const KINK_MARGIN: f64 = 1e-2;

fn make_case(rng: &mut RngStream) -> Result<Case> {
    loop {
        let case = draw_case(rng)?;
        if kink_distance(&case.cosine, &case.x)? > KINK_MARGIN && kink_distance(&case.linear, &case.x)? > KINK_MARGIN {
            return Ok(case);
        }
    }
}

fn draw_case(rng: &mut RngStream) -> Result<Case> {
    let batch = 2 + rng.index(5);
    let classes = 2 + rng.index(4);
    let mut dims = vec![2 + rng.index(5)];
    dims.extend((0..DEPTH).map(|_| 2 + rng.index(5)));
    let counts: Vec<usize> = (0..classes).map(|_| 1 + rng.index(500)).collect();
    let gcl = GclConfig {
        scale: 1.0 + 29.0 * rng.uniform(),
        ..GclConfig::default()
    };
    let table = compute_cloud_sizes(&counts, CloudStrategy::LogDiff)?;
    let eps = (0..batch).map(|_| sample_epsilon(rng, &gcl)).collect();
    let labels = (0..batch).map(|_| rng.index(classes)).collect();
    let mut cosine = Model::new(&dims, classes, HeadKind::Cosine, rng)?;
    let mut linear = Model::new(&dims, classes, HeadKind::Linear, rng)?;
    // Nonzero biases so the ReLU masks are not trivially symmetric.
    for m in [&mut cosine, &mut linear] {
        for l in m.backbone.params_mut().into_iter().skip(1).step_by(2) {
            for v in l.iter_mut() {
                *v = 0.1 * rng.standard_normal();
            }
        }
    }
    Ok(Case {
        x: normal(rng, batch, dims[0], 1.0)?,
        labels,
        eps,
        table,
        gcl,
        cosine,
        linear,
    })
}

impl Case {
    fn model_loss(&self, m: &Model) -> f64 {
        let run = || -> Result<f64> {
            let z = m.logits(&self.x)?;
            Ok(match m.head_kind() {
                HeadKind::Cosine => gcl_loss(&z, &self.labels, &self.table, &self.eps, &self.gcl)?.loss,
                HeadKind::Linear => ce_loss(&z, &self.labels)?.loss,
            })
        };
        run().unwrap_or(f64::NAN)
    }

    fn model_grads(&self, m: &Model) -> Result<Vec<Vec<f64>>> {
        let (z, tape) = m.forward(&self.x)?;
        let dz = match m.head_kind() {
            HeadKind::Cosine => gcl_loss(&z, &self.labels, &self.table, &self.eps, &self.gcl)?.grad,
            HeadKind::Linear => ce_loss(&z, &self.labels)?.grad,
        };
        let g = m.backward(&tape, &dz)?;
        Ok(g.slices().into_iter().map(|s| s.to_vec()).collect())
    }

    /// Numeric gradient of the model loss w.r.t. parameter slice `k`.
    fn param_fd(&self, m: &Model, k: usize) -> Result<Vec<f64>> {
        let mut probe = m.clone();
        let base = Tensor1::from_vec(probe.params_mut()[k].to_vec())?;
        let g = finite_diff_grad(
            |v| {
                probe.params_mut()[k].copy_from_slice(v);
                self.model_loss(&probe)
            },
            &base,
            STEP,
        )?;
        Ok(g.into_vec())
    }

    fn check(&self, c: Component, flip: bool) -> Result<f64> {
        let sign = if flip { -1.0 } else { 1.0 };
        let compare = |a: &[f64], n: &[f64]| {
            let a: Vec<f64> = a.iter().map(|v| sign * v).collect();
            relative_error(&a, n)
        };
        match c {
            Component::CeLoss => {
                let z = self.linear.logits(&self.x)?;
                let analytic = ce_loss(&z, &self.labels)?.grad;
                let numeric = finite_diff_grad(
                    |v| {
                        let zz = Tensor2::from_vec(z.rows(), z.cols(), v.to_vec()).unwrap();
                        ce_loss(&zz, &self.labels).map(|o| o.loss).unwrap_or(f64::NAN)
                    },
                    &Tensor1::from_vec(z.data().to_vec())?,
                    STEP,
                )?;
                Ok(compare(analytic.data(), numeric.data()))
            }
            Component::GclLoss => {
                let z = self.cosine.logits(&self.x)?;
                let analytic = gcl_loss(&z, &self.labels, &self.table, &self.eps, &self.gcl)?.grad;
                let numeric = finite_diff_grad(
                    |v| {
                        let zz = Tensor2::from_vec(z.rows(), z.cols(), v.to_vec()).unwrap();
                        gcl_loss(&zz, &self.labels, &self.table, &self.eps, &self.gcl)
                            .map(|o| o.loss)
                            .unwrap_or(f64::NAN)
                    },
                    &Tensor1::from_vec(z.data().to_vec())?,
                    STEP,
                )?;
                Ok(compare(analytic.data(), numeric.data()))
            }
            Component::CosineHead | Component::LinearHead => {
                let m = if c == Component::CosineHead { &self.cosine } else { &self.linear };
                let grads = self.model_grads(m)?;
                let first = 2 * DEPTH;
                let mut worst = 0.0f64;
                for k in first..grads.len() {
                    worst = worst.max(compare(&grads[k], &self.param_fd(m, k)?));
                }
                // Gradient w.r.t. the features feeding the head.
                let f = m.backbone.forward(&self.x)?.0;
                let (_, tape) = m.head.forward(&f)?;
                let z = m.head.forward(&f)?.0;
                let dz = match m.head {
                    Head::Cosine(_) => gcl_loss(&z, &self.labels, &self.table, &self.eps, &self.gcl)?.grad,
                    Head::Linear(_) => ce_loss(&z, &self.labels)?.grad,
                };
                let (_, df) = m.head.backward(&tape, &dz)?;
                let numeric = finite_diff_grad(
                    |v| {
                        let ff = Tensor2::from_vec(f.rows(), f.cols(), v.to_vec()).unwrap();
                        let run = || -> Result<f64> {
                            let zz = m.head.forward(&ff)?.0;
                            Ok(match m.head {
                                Head::Cosine(_) => gcl_loss(&zz, &self.labels, &self.table, &self.eps, &self.gcl)?.loss,
                                Head::Linear(_) => ce_loss(&zz, &self.labels)?.loss,
                            })
                        };
                        run().unwrap_or(f64::NAN)
                    },
                    &Tensor1::from_vec(f.data().to_vec())?,
                    STEP,
                )?;
                Ok(worst.max(compare(df.data(), numeric.data())))
            }
            Component::MlpLayer(l) => {
                let mut worst = 0.0f64;
                for m in [&self.cosine, &self.linear] {
                    let grads = self.model_grads(m)?;
                    for k in [2 * l, 2 * l + 1] {
                        worst = worst.max(compare(&grads[k], &self.param_fd(m, k)?));
                    }
                }
                Ok(worst)
            }
        }
    }
}

/// Runs every component over `opts.cases` random shapes and seeds.
pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<ComponentResult>> {
    let root = RngStream::new(opts.seed).child("grad-check");
    let cases = (0..opts.cases)
        .map(|i| make_case(&mut root.child(&format!("case{i}"))))
        .collect::<Result<Vec<_>>>()?;
    Component::all()
        .into_iter()
        .map(|c| {
            let mut worst = 0.0f64;
            for case in &cases {
                worst = worst.max(case.check(c, opts.sign_flip == Some(c))?);
            }
            Ok(ComponentResult {
                component: c,
                max_rel_error: worst,
                cases: cases.len(),
            })
        })
        .collect()
}

/// `component,max_rel_error,cases,status` rows.
pub fn format_table(results: &[ComponentResult], tolerance: f64) -> String {
    let mut out = format!("{:<12} {:>14} {:>6}  status\n", "component", "max_rel_error", "cases");
    for r in results {
        let status = if r.max_rel_error <= tolerance { "pass" } else { "FAIL" };
        out.push_str(&format!(
            "{:<12} {:>14.3e} {:>6}  {}\n",
            r.component.to_string(),
            r.max_rel_error,
            r.cases,
            status
        ));
    }
    out
}
