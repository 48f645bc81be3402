use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::exec::Execution;

use super::{AffinityMatrix, HypergraphError};

/// Square matrix with row/column labels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub labels: Vec<String>,
    pub data: Vec<f64>,
}

impl LabeledMatrix {
    pub fn new(labels: Vec<String>, data: Vec<f64>) -> Result<Self, HypergraphError> {
        if data.len() != labels.len() * labels.len() {
            return Err(HypergraphError::InvalidParameter(format!(
                "{} entries for {} labels",
                data.len(),
                labels.len()
            )));
        }
        Ok(Self { labels, data })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.data[i * n..(i + 1) * n]
    }
}

/// Divide every row by its sum.
pub fn row_normalize(m: &LabeledMatrix) -> Result<LabeledMatrix, HypergraphError> {
    let n = m.len();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        let row = m.row(i);
        let sum: f64 = row.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(HypergraphError::ZeroRow(i));
        }
        data.extend(row.iter().map(|a| a / sum));
    }
    Ok(LabeledMatrix {
        labels: m.labels.clone(),
        data,
    })
}

/// Row-stochastic Ā from an affinity matrix. The diagonal is always
/// positive for non-zero self weights, so isolated hyperedges normalize to
/// a unit self-loop.
pub fn normalize(a: &AffinityMatrix) -> Result<LabeledMatrix, HypergraphError> {
    row_normalize(&LabeledMatrix {
        labels: a.labels().to_vec(),
        data: a.entries().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntimacyMode {
    /// One damping step: S = αĀ + (1−α)/|E|.
    #[default]
    Literal,
    /// Fixed point of S ← αSĀ + (1−α)/|E|.
    Iterative,
}

impl fmt::Display for IntimacyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntimacyMode::Literal => "literal",
            IntimacyMode::Iterative => "iterative",
        })
    }
}

impl FromStr for IntimacyMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(IntimacyMode::Literal),
            "iterative" => Ok(IntimacyMode::Iterative),
            other => Err(format!("unknown intimacy mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntimacyMatrix {
    pub matrix: LabeledMatrix,
    pub alpha: f64,
    pub mode: IntimacyMode,
    /// Power iterations performed (0 in literal mode).
    pub iterations: usize,
    /// Max-abs change of the last iteration (0 in literal mode).
    pub residual: f64,
    pub converged: bool,
}

impl IntimacyMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }
}

pub const ITERATIVE_TOLERANCE: f64 = 1e-10;
pub const ITERATIVE_MAX_ITERATIONS: usize = 100;

pub fn intimacy(
    a_bar: &LabeledMatrix,
    alpha: f64,
    mode: IntimacyMode,
) -> Result<IntimacyMatrix, HypergraphError> {
    intimacy_with(a_bar, alpha, mode, Execution::default())
}

/// PageRank-damped intimacy from a row-stochastic Ā.
pub fn intimacy_with(
    a_bar: &LabeledMatrix,
    alpha: f64,
    mode: IntimacyMode,
    exec: Execution,
) -> Result<IntimacyMatrix, HypergraphError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(HypergraphError::InvalidParameter(format!(
            "alpha must be in [0,1], got {alpha}"
        )));
    }
    let n = a_bar.len();
    if n == 0 {
        return Ok(IntimacyMatrix {
            matrix: a_bar.clone(),
            alpha,
            mode,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let teleport = (1.0 - alpha) / n as f64;
    match mode {
        IntimacyMode::Literal => Ok(IntimacyMatrix {
            matrix: LabeledMatrix {
                labels: a_bar.labels.clone(),
                data: a_bar.data.iter().map(|a| alpha * a + teleport).collect(),
            },
            alpha,
            mode,
            iterations: 0,
            residual: 0.0,
            converged: true,
        }),
        IntimacyMode::Iterative => {
            let mut s = vec![1.0 / n as f64; n * n];
            let mut iterations = 0;
            let mut residual = f64::INFINITY;
            while iterations < ITERATIVE_MAX_ITERATIONS {
                let rows = exec.map_indexed(n, |i| {
                    let si = &s[i * n..(i + 1) * n];
                    (0..n)
                        .map(|j| {
                            let mut acc = 0.0;
                            for (m, sim) in si.iter().enumerate() {
                                acc += sim * a_bar.data[m * n + j];
                            }
                            alpha * acc + teleport
                        })
                        .collect::<Vec<f64>>()
                });
                let next: Vec<f64> = rows.into_iter().flatten().collect();
                residual = s
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                s = next;
                iterations += 1;
                if residual <= ITERATIVE_TOLERANCE {
                    break;
                }
            }
            Ok(IntimacyMatrix {
                matrix: LabeledMatrix {
                    labels: a_bar.labels.clone(),
                    data: s,
                },
                alpha,
                mode,
                iterations,
                residual,
                converged: residual <= ITERATIVE_TOLERANCE,
            })
        }
    }
}
