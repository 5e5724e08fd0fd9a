use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::Tensor1;

/// How the raw per-class cloud size is derived from class counts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CloudStrategy {
    /// `ln n_max - ln n_j`
    LogDiff,
    /// `n_max^e - n_j^e`
    PowDiff { exponent: f64 },
    /// `cos(n_j / n_max * pi/2)`
    Cosine,
    /// No clouds; GCL reduces to scaled cosine cross-entropy.
    Zero,
}

impl fmt::Display for CloudStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CloudStrategy::LogDiff => write!(f, "log-diff"),
            CloudStrategy::PowDiff { exponent } => write!(f, "pow-diff:{exponent}"),
            CloudStrategy::Cosine => write!(f, "cosine"),
            CloudStrategy::Zero => write!(f, "zero"),
        }
    }
}

impl FromStr for CloudStrategy {
    type Err = Error;

    /// Accepts `log-diff`, `cosine`, `zero` and `pow-diff:<exponent>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log-diff" => Ok(CloudStrategy::LogDiff),
            "cosine" => Ok(CloudStrategy::Cosine),
            "zero" => Ok(CloudStrategy::Zero),
            _ => {
                let exp = s
                    .strip_prefix("pow-diff:")
                    .ok_or_else(|| Error::Config(format!("unknown cloud strategy `{s}`")))?;
                let exponent: f64 = exp
                    .parse()
                    .map_err(|_| Error::Config(format!("bad pow-diff exponent `{exp}`")))?;
                if !(exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::Config(format!("pow-diff exponent must be > 0, got {exponent}")));
                }
                Ok(CloudStrategy::PowDiff { exponent })
            }
        }
    }
}

/// Per-class cloud sizes, raw and max-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudSizeTable {
    counts: Vec<usize>,
    raw: Tensor1,
    normalized: Tensor1,
    strategy: CloudStrategy,
}

impl CloudSizeTable {
    /// Table of all zeros, i.e. plain scaled cosine cross-entropy.
    pub fn zeros(classes: usize) -> Self {
        CloudSizeTable {
            counts: vec![1; classes],
            raw: Tensor1::zeros(classes),
            normalized: Tensor1::zeros(classes),
            strategy: CloudStrategy::Zero,
        }
    }

    pub fn classes(&self) -> usize {
        self.raw.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn raw(&self) -> &Tensor1 {
        &self.raw
    }

    pub fn normalized(&self) -> &Tensor1 {
        &self.normalized
    }

    pub fn strategy(&self) -> CloudStrategy {
        self.strategy
    }

    /// CSV with header `class_index,count,raw_delta,normalized_delta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class_index,count,raw_delta,normalized_delta\n");
        for j in 0..self.classes() {
            out.push_str(&format!(
                "{j},{},{},{}\n",
                self.counts[j], self.raw[j], self.normalized[j]
            ));
        }
        out
    }
}

pub fn compute_cloud_sizes(counts: &[usize], strategy: CloudStrategy) -> Result<CloudSizeTable> {
    if counts.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 classes, got {}", counts.len())));
    }
    if let Some(j) = counts.iter().position(|&n| n < 1) {
        return Err(Error::Domain(format!("class {j} has no samples")));
    }
    let n_max = *counts.iter().max().unwrap();
    let max_f = n_max as f64;
    let raw: Vec<f64> = counts
        .iter()
        .map(|&n| {
            // The most frequent class gets exactly zero under every strategy
            // (cos(pi/2) is not exactly zero in floating point).
            if n == n_max {
                return 0.0;
            }
            let n = n as f64;
            match strategy {
                CloudStrategy::LogDiff => max_f.ln() - n.ln(),
                CloudStrategy::PowDiff { exponent } => max_f.powf(exponent) - n.powf(exponent),
                CloudStrategy::Cosine => (n / max_f * std::f64::consts::FRAC_PI_2).cos(),
                CloudStrategy::Zero => 0.0,
            }
        })
        .collect();
    let delta_max = raw.iter().copied().fold(0.0, f64::max);
    let normalized = if delta_max > 0.0 {
        raw.iter().map(|d| d / delta_max).collect()
    } else {
        vec![0.0; raw.len()]
    };
    Ok(CloudSizeTable {
        counts: counts.to_vec(),
        raw: Tensor1::from_vec(raw)?,
        normalized: Tensor1::from_vec(normalized)?,
        strategy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ALL: [CloudStrategy; 4] = [
        CloudStrategy::LogDiff,
        CloudStrategy::PowDiff { exponent: 0.25 },
        CloudStrategy::Cosine,
        CloudStrategy::Zero,
    ];

    #[test]
    fn balanced_counts_need_no_cloud() {
        for s in ALL {
            let t = compute_cloud_sizes(&[40, 40, 40], s).unwrap();
            assert!(t.raw().data().iter().all(|&d| d == 0.0));
            assert!(t.normalized().data().iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn log_diff_decades() {
        let t = compute_cloud_sizes(&[5000, 500, 50], CloudStrategy::LogDiff).unwrap();
        let raw = t.raw().data();
        assert_eq!(raw[0], 0.0);
        assert!((raw[1] - std::f64::consts::LN_10).abs() < 1e-12);
        assert!((raw[2] - 2.0 * std::f64::consts::LN_10).abs() < 1e-12);
        let n = t.normalized().data();
        assert_eq!(n[0], 0.0);
        assert!((n[1] - 0.5).abs() < 1e-12);
        assert_eq!(n[2], 1.0);
    }

    #[test]
    fn pow_diff_and_cosine_by_hand() {
        let t = compute_cloud_sizes(&[64, 8, 1], CloudStrategy::PowDiff { exponent: 1.0 / 3.0 }).unwrap();
        let raw = t.raw().data();
        assert!((raw[1] - 2.0).abs() < 1e-12);
        assert!((raw[2] - 3.0).abs() < 1e-12);

        let t = compute_cloud_sizes(&[4, 2], CloudStrategy::Cosine).unwrap();
        assert!((t.raw()[1] - (std::f64::consts::FRAC_PI_4).cos()).abs() < 1e-15);
        assert_eq!(t.normalized()[1], 1.0);
    }

    #[test]
    fn head_class_gets_exact_zero_under_cosine() {
        let t = compute_cloud_sizes(&[10, 10], CloudStrategy::Cosine).unwrap();
        assert_eq!(t.raw().data(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_empty_classes() {
        assert!(matches!(
            compute_cloud_sizes(&[10, 0], CloudStrategy::LogDiff),
            Err(Error::Domain(_))
        ));
        assert!(compute_cloud_sizes(&[10], CloudStrategy::LogDiff).is_err());
    }

    #[test]
    fn parse_strategies() {
        for s in ALL {
            assert_eq!(s.to_string().parse::<CloudStrategy>().unwrap(), s);
        }
        assert!("pow-diff:-1".parse::<CloudStrategy>().is_err());
        assert!("log".parse::<CloudStrategy>().is_err());
    }

    #[test]
    fn csv_export() {
        let t = compute_cloud_sizes(&[4, 1], CloudStrategy::LogDiff).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "class_index,count,raw_delta,normalized_delta");
        assert_eq!(lines[1], "0,4,0,0");
        assert!(lines[2].starts_with("1,1,1.386294361119890"));
        assert!(lines[2].ends_with(",1"));
    }

    proptest! {
        #[test]
        fn table_invariants(counts in prop::collection::vec(1usize..5000, 2..12), which in 0usize..4) {
            let s = ALL[which];
            let t = compute_cloud_sizes(&counts, s).unwrap();
            let n_max = *counts.iter().max().unwrap();
            let norm = t.normalized().data();
            for j in 0..counts.len() {
                prop_assert!(t.raw()[j] >= 0.0);
                prop_assert!((0.0..=1.0).contains(&norm[j]));
                if counts[j] == n_max {
                    prop_assert_eq!(t.raw()[j], 0.0);
                }
                for k in 0..counts.len() {
                    if counts[j] <= counts[k] {
                        prop_assert!(t.raw()[j] >= t.raw()[k]);
                    }
                }
            }
            let m = t.normalized().max();
            prop_assert!(m == 1.0 || t.raw().data().iter().all(|&d| d == 0.0));
        }
    }
}
