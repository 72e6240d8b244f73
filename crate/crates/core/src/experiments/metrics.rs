//! Agreement scores between a predicted partition and hidden labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::transitions::ProbabilityMatrix;
use crate::worlds::Field;

/// Rows are predicted labels, columns truth classes.
pub type Contingency = Vec<Vec<u64>>;

fn check_lengths(a: usize, b: usize) -> Result<(), ExperimentError> {
    if a != b {
        return Err(ExperimentError::Config(format!(
            "label vectors differ in length: {a} vs {b}"
        )));
    }
    Ok(())
}

/// Dense contingency table over the distinct labels of `pred` and `truth`,
/// each ordered by value.
pub fn contingency(pred: &[usize], truth: &[usize]) -> Result<Contingency, ExperimentError> {
    check_lengths(pred.len(), truth.len())?;
    let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
        let mut m: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
        for (i, v) in m.values_mut().enumerate() {
            *v = i;
        }
        m
    };
    let (pi, ti) = (index(pred), index(truth));
    let mut table = vec![vec![0u64; ti.len()]; pi.len()];
    for (p, t) in pred.iter().zip(truth) {
        table[pi[p]][ti[t]] += 1;
    }
    Ok(table)
}

fn pairs(n: u64) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Pair-counting ARI with the expected-index correction. Two partitions that
/// are both trivial (one cluster, or all singletons) score 1.
pub fn ari_from_contingency(table: &[Vec<u64>]) -> f64 {
    let n: u64 = table.iter().flatten().sum();
    let cols = table.first().map_or(0, Vec::len);
    let index: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let sum_b: f64 = (0..cols)
        .map(|j| pairs(table.iter().map(|r| r[j]).sum()))
        .sum();
    let total = pairs(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max_index = (sum_a + sum_b) / 2.0;
    let denom = max_index - expected;
    if denom == 0.0 {
        return 1.0;
    }
    (index - expected) / denom
}

pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, ExperimentError> {
    Ok(ari_from_contingency(&contingency(a, b)?))
}

pub fn purity_from_contingency(table: &[Vec<u64>]) -> f64 {
    let n: u64 = table.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    let hits: u64 = table
        .iter()
        .map(|r| r.iter().copied().max().unwrap_or(0))
        .sum();
    hits as f64 / n as f64
}

pub fn purity(pred: &[usize], truth: &[usize]) -> Result<f64, ExperimentError> {
    if pred.is_empty() {
        return Err(ExperimentError::Config(
            "purity of an empty labeling".into(),
        ));
    }
    Ok(purity_from_contingency(&contingency(pred, truth)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominanceStats {
    pub mean_on: f64,
    pub mean_off: f64,
    /// `None` when every off-diagonal entry is zero.
    pub ratio: Option<f64>,
}

/// For each command, compares the mean probability on the correspondence
/// diagonals `(a, k) -> (b, k)` with the mean over all other entries. States
/// are laid out as `field * clusters + cluster`; only observed rows count.
pub fn diagonal_dominance(
    t: &ProbabilityMatrix,
    tables: &[Vec<(Field, Field)>],
    clusters: usize,
) -> Result<Vec<DominanceStats>, ExperimentError> {
    let (n_from, n_to, n_cmd) = t.shape();
    let k = clusters;
    if tables.len() != n_cmd || n_from != n_to || n_from != Field::ALL.len() * k {
        return Err(ExperimentError::Config(format!(
            "matrix {n_from}x{n_to}x{n_cmd} with blocks of {k} does not match {} correspondence tables",
            tables.len()
        )));
    }
    Ok(tables
        .iter()
        .enumerate()
        .map(|(q, table)| {
            let mut on = vec![false; n_from * n_to];
            for &(a, b) in table {
                for c in 0..k {
                    on[(a.index() * k + c) * n_to + b.index() * k + c] = true;
                }
            }
            let (mut s_on, mut c_on, mut s_off, mut c_off) = (0.0, 0usize, 0.0, 0usize);
            for from in (0..n_from).filter(|&f| t.is_observed(f, q)) {
                for (to, &p) in t.row(from, q).iter().enumerate() {
                    if on[from * n_to + to] {
                        s_on += p;
                        c_on += 1;
                    } else {
                        s_off += p;
                        c_off += 1;
                    }
                }
            }
            let mean = |s: f64, c: usize| if c == 0 { 0.0 } else { s / c as f64 };
            let (mean_on, mean_off) = (mean(s_on, c_on), mean(s_off, c_off));
            DominanceStats {
                mean_on,
                mean_off,
                ratio: (mean_off > 0.0).then(|| mean_on / mean_off),
            }
        })
        .collect())
}
