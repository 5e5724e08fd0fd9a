//! Class-aware batch sampling for classifier re-training.
//!
//! Every strategy assigns a per-sample rate `rho_j` to each sample of class
//! `j`. The probability of picking class `j` for a batch slot is then
//! `n_j * rho_j / sum_i n_i * rho_i`, after which an instance is drawn
//! uniformly from that class, with replacement.
//!
//! | strategy | per-sample rate `rho_j`        | class selection        |
//! |----------|--------------------------------|------------------------|
//! | IB       | uniform                        | `n_j / N`              |
//! | CB       | `1 / n_j`                      | `1 / C`                |
//! | EN       | `(1 - b) / (1 - b^n_j)`        | between IB and CB      |
//! | CBEN     | as EN, with `b = beta_j` rising with the cloud size |  |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gcl::CloudSizeTable;
use crate::numerics::{RngStream, Tensor1};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerStrategy {
    InstanceBalanced,
    ClassBalanced,
    EffectiveNumber,
    ClassBasedEffectiveNumber,
}

impl fmt::Display for SamplerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerStrategy::InstanceBalanced => "ib",
            SamplerStrategy::ClassBalanced => "cb",
            SamplerStrategy::EffectiveNumber => "en",
            SamplerStrategy::ClassBasedEffectiveNumber => "cben",
        })
    }
}

impl FromStr for SamplerStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ib" => Ok(SamplerStrategy::InstanceBalanced),
            "cb" => Ok(SamplerStrategy::ClassBalanced),
            "en" => Ok(SamplerStrategy::EffectiveNumber),
            "cben" => Ok(SamplerStrategy::ClassBasedEffectiveNumber),
            _ => Err(Error::Config(format!(
                "unknown sampler `{s}` (expected ib, cb, en or cben)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSpec {
    pub strategy: SamplerStrategy,
    /// Lower end of the CBEN `beta` range.
    pub a: f64,
    /// Width of the CBEN `beta` range, which is `[a, a + b]`.
    pub b: f64,
    /// Fixed `beta` for plain EN.
    pub en_beta: f64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            strategy: SamplerStrategy::ClassBasedEffectiveNumber,
            a: 0.999,
            b: 0.0009,
            en_beta: 0.999,
        }
    }
}

impl SamplerSpec {
    pub fn with_strategy(strategy: SamplerStrategy) -> Self {
        SamplerSpec {
            strategy,
            ..SamplerSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.a && self.a < self.a + self.b && self.a + self.b < 1.0) {
            return Err(Error::Config(format!(
                "sampler range needs 0 < a < a + b < 1, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(0.0 < self.en_beta && self.en_beta < 1.0) {
            return Err(Error::Config(format!(
                "sampler en_beta must be in (0, 1), got {}",
                self.en_beta
            )));
        }
        Ok(())
    }
}

/// Per-class sampling rates.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassProbTable {
    /// Per-class `beta` (EN and CBEN only).
    pub beta: Option<Tensor1>,
    /// Per-sample rate of each class, normalized to sum to 1 over classes.
    pub rho: Tensor1,
    /// Probability of selecting each class for a batch slot.
    pub selection: Tensor1,
}

impl ClassProbTable {
    pub fn classes(&self) -> usize {
        self.rho.len()
    }

    fn from_rates(counts: &[usize], raw: Vec<f64>, beta: Option<Tensor1>) -> Result<Self> {
        let rho_sum: f64 = raw.iter().sum();
        let rho: Vec<f64> = raw.iter().map(|r| r / rho_sum).collect();
        let mass: Vec<f64> = counts.iter().zip(&raw).map(|(&n, r)| n as f64 * r).collect();
        let mass_sum: f64 = mass.iter().sum();
        let selection = mass.iter().map(|m| m / mass_sum).collect();
        Ok(ClassProbTable {
            beta,
            rho: Tensor1::from_vec(rho)?,
            selection: Tensor1::from_vec(selection)?,
        })
    }
}

fn check_counts(counts: &[usize]) -> Result<()> {
    if counts.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 classes, got {}", counts.len())));
    }
    if let Some(j) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Domain(format!("class {j} has no samples")));
    }
    Ok(())
}

/// `beta_j = b * (delta_j - delta_min) / (delta_max - delta_min) + a`, using
/// the normalized cloud sizes. All `beta_j = a` when the sizes are equal.
pub fn compute_beta(table: &CloudSizeTable, spec: &SamplerSpec) -> Result<Tensor1> {
    if table.classes() < 2 {
        return Err(Error::Domain("need at least 2 classes".into()));
    }
    let delta = table.normalized();
    let (lo, hi) = (delta.min(), delta.max());
    let beta = delta
        .data()
        .iter()
        .map(|&d| {
            if hi > lo {
                spec.b * (d - lo) / (hi - lo) + spec.a
            } else {
                spec.a
            }
        })
        .collect();
    Tensor1::from_vec(beta)
}

/// Effective-number rates: `rho_j = (1 - beta_j) / (1 - beta_j^n_j)`, the
/// reciprocal of the effective number of class `j`.
pub fn compute_rho(counts: &[usize], beta: &Tensor1) -> Result<ClassProbTable> {
    check_counts(counts)?;
    if beta.len() != counts.len() {
        return Err(Error::Shape(format!(
            "{} betas for {} classes",
            beta.len(),
            counts.len()
        )));
    }
    if let Some(b) = beta.data().iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {b}")));
    }
    let raw = counts
        .iter()
        .zip(beta.data())
        .map(|(&n, &b)| {
            // 1 - b^n without cancellation
            let shortfall = -(n as f64 * b.ln()).exp_m1();
            (1.0 - b) / shortfall
        })
        .collect();
    ClassProbTable::from_rates(counts, raw, Some(beta.clone()))
}

pub fn class_probs(
    counts: &[usize],
    cloud: &CloudSizeTable,
    spec: &SamplerSpec,
) -> Result<ClassProbTable> {
    check_counts(counts)?;
    spec.validate()?;
    match spec.strategy {
        SamplerStrategy::InstanceBalanced => {
            ClassProbTable::from_rates(counts, vec![1.0; counts.len()], None)
        }
        SamplerStrategy::ClassBalanced => {
            let raw = counts.iter().map(|&n| 1.0 / n as f64).collect();
            ClassProbTable::from_rates(counts, raw, None)
        }
        SamplerStrategy::EffectiveNumber => {
            compute_rho(counts, &Tensor1::from_vec(vec![spec.en_beta; counts.len()])?)
        }
        SamplerStrategy::ClassBasedEffectiveNumber => {
            if cloud.classes() != counts.len() {
                return Err(Error::Shape("cloud table does not match class counts".into()));
            }
            compute_rho(counts, &compute_beta(cloud, spec)?)
        }
    }
}

/// Sample indices grouped by class.
pub fn class_pools(labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut pools = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        pools[y].push(i);
    }
    pools
}

struct ClassPicker {
    cumulative: Vec<f64>,
}

impl ClassPicker {
    fn new(selection: &Tensor1) -> Self {
        let mut acc = 0.0;
        let cumulative = selection
            .data()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        ClassPicker { cumulative }
    }

    fn pick(&self, rng: &mut RngStream) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.uniform() * total;
        let j = self.cumulative.partition_point(|&c| c <= u);
        // Guard against rounding at the top end and skip zero-mass classes.
        let j = j.min(self.cumulative.len() - 1);
        let mut k = j;
        while k > 0 && self.cumulative[k] == self.cumulative[k - 1] {
            k -= 1;
        }
        if k == 0 && self.cumulative[0] == 0.0 {
            j
        } else {
            k
        }
    }
}

/// Independent draws: class from `probs.selection`, then an instance
/// uniformly within the class pool, with replacement.
pub fn draw_batch(
    rng: &mut RngStream,
    probs: &ClassProbTable,
    pools: &[Vec<usize>],
    batch_size: usize,
) -> Result<Vec<usize>> {
    if pools.len() != probs.classes() {
        return Err(Error::Shape(format!(
            "{} class pools for {} classes",
            pools.len(),
            probs.classes()
        )));
    }
    for (j, pool) in pools.iter().enumerate() {
        if pool.is_empty() && probs.selection[j] > 0.0 {
            return Err(Error::Data(format!(
                "class {j} has sampling probability {} but no samples",
                probs.selection[j]
            )));
        }
    }
    let picker = ClassPicker::new(&probs.selection);
    Ok((0..batch_size)
        .map(|_| {
            let pool = &pools[picker.pick(rng)];
            pool[rng.index(pool.len())]
        })
        .collect())
}

/// Class frequencies over `draws` class selections.
pub fn empirical_class_frequencies(rng: &mut RngStream, probs: &ClassProbTable, draws: usize) -> Vec<f64> {
    let picker = ClassPicker::new(&probs.selection);
    let mut hits = vec![0u64; probs.classes()];
    for _ in 0..draws {
        hits[picker.pick(rng)] += 1;
    }
    hits.iter().map(|&h| h as f64 / draws as f64).collect()
}

/// CSV with header `class,count,beta,rho,selection,empirical`; `beta` is
/// empty for strategies without one.
pub fn diagnostics_csv(counts: &[usize], probs: &ClassProbTable, empirical: &[f64]) -> String {
    let mut out = String::from("class,count,beta,rho,selection,empirical\n");
    for j in 0..probs.classes() {
        let beta = probs
            .beta
            .as_ref()
            .map(|b| b[j].to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{j},{},{beta},{},{},{}\n",
            counts[j], probs.rho[j], probs.selection[j], empirical[j]
        ));
    }
    out
}
