//! Normalized spectral clustering (Ng, Jordan and Weiss) of transition graphs.

use serde::{Deserialize, Serialize};

use super::{kmeans_fit, symmetric_eigen, ClusteringError, Matrix, SymmetricEigen};
use crate::transitions::ProbabilityMatrix;

/// Symmetric non-negative affinity over the states that survived masking.
#[derive(Clone, Debug, PartialEq)]
pub struct Affinity {
    weights: Matrix,
    /// `index_map[i]` is the original state id of affinity node `i`.
    index_map: Vec<usize>,
    n_states: usize,
}

impl Affinity {
    /// Wraps a matrix whose nodes are the states themselves.
    pub fn new(weights: Matrix) -> Result<Self, ClusteringError> {
        let n = weights.rows();
        Self::with_index_map(weights, (0..n).collect(), n)
    }

    pub fn with_index_map(
        weights: Matrix,
        index_map: Vec<usize>,
        n_states: usize,
    ) -> Result<Self, ClusteringError> {
        if !weights.is_square() {
            return Err(ClusteringError::Validation(
                "affinity must be square".into(),
            ));
        }
        if index_map.len() != weights.rows() || index_map.iter().any(|&i| i >= n_states) {
            return Err(ClusteringError::Validation(
                "index map does not fit the state space".into(),
            ));
        }
        let n = weights.rows();
        for i in 0..n {
            for j in 0..n {
                let w = weights.get(i, j);
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(ClusteringError::Validation(format!(
                        "affinity entry ({i}, {j}) = {w}"
                    )));
                }
                if w != weights.get(j, i) {
                    return Err(ClusteringError::Validation(format!(
                        "affinity is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            weights,
            index_map,
            n_states,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n_nodes())
            .map(|i| self.weights.row(i).iter().sum())
            .collect()
    }
}

/// `W = (T + Tᵀ) / 2` over the observed rows of a square single-command
/// probability matrix. Masked rows and their columns are dropped.
pub fn symmetrize(t: &ProbabilityMatrix) -> Result<Affinity, ClusteringError> {
    let (n_from, n_to, n_cmd) = t.shape();
    if n_from != n_to || n_cmd != 1 {
        return Err(ClusteringError::Validation(format!(
            "expected a square 2D matrix, got {n_from}x{n_to}x{n_cmd}"
        )));
    }
    let dense = Matrix::from_vec(n_from, n_to, t.slice(0).to_vec());
    symmetrize_dense(&dense, t.observed_rows(0))
}

/// `W = (T + Tᵀ) / 2` restricted to the states flagged in `keep`.
pub fn symmetrize_dense(t: &Matrix, keep: &[bool]) -> Result<Affinity, ClusteringError> {
    if !t.is_square() {
        return Err(ClusteringError::Validation(format!(
            "expected a square matrix, got {}x{}",
            t.rows(),
            t.cols()
        )));
    }
    if keep.len() != t.rows() {
        return Err(ClusteringError::DimensionMismatch {
            expected: t.rows(),
            actual: keep.len(),
        });
    }
    let index_map: Vec<usize> = (0..t.rows()).filter(|&i| keep[i]).collect();
    let m = index_map.len();
    let mut w = Matrix::zeros(m, m);
    for (a, &i) in index_map.iter().enumerate() {
        for (b, &j) in index_map.iter().enumerate() {
            w.set(a, b, 0.5 * (t.get(i, j) + t.get(j, i)));
        }
    }
    Affinity::with_index_map(w, index_map, t.rows())
}

/// Assignment of every state to a subgraph. States that could not be
/// embedded (masked or isolated) share the residual label `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgraphPartition {
    pub k: usize,
    pub labels: Vec<usize>,
    pub residual_label: Option<usize>,
}

impl SubgraphPartition {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k + usize::from(self.residual_label.is_some())];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Number of distinct labels including the residual one.
    pub fn n_labels(&self) -> usize {
        self.k + usize::from(self.residual_label.is_some())
    }

    pub fn members(&self, label: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == label)
            .collect()
    }
}

/// `D^{-1/2} W D^{-1/2}` over the nodes with positive degree. Returns the
/// matrix and the affinity node index of each row.
pub fn normalized_affinity(w: &Affinity) -> (Matrix, Vec<usize>) {
    let degrees = w.degrees();
    let active: Vec<usize> = (0..w.n_nodes()).filter(|&i| degrees[i] > 0.0).collect();
    let scale: Vec<f64> = active.iter().map(|&i| 1.0 / degrees[i].sqrt()).collect();
    let m = active.len();
    let mut l = Matrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            l.set(
                a,
                b,
                scale[a] * w.weights().get(active[a], active[b]) * scale[b],
            );
        }
    }
    (l, active)
}

/// Eigendecomposition of the normalized affinity, shared by clustering and
/// the eigengap heuristic.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eig: SymmetricEigen,
    /// Affinity node of each row of the normalized matrix.
    active: Vec<usize>,
    index_map: Vec<usize>,
    n_states: usize,
}

pub fn spectral_decompose(w: &Affinity) -> Result<SpectralDecomposition, ClusteringError> {
    let (l, active) = normalized_affinity(w);
    let eig = symmetric_eigen(&l)?;
    Ok(SpectralDecomposition {
        eig,
        active,
        index_map: w.index_map().to_vec(),
        n_states: w.n_states(),
    })
}

impl SpectralDecomposition {
    /// Nodes with positive degree.
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    /// Row-normalized top-`k` embedding, clustered with k-means.
    pub fn cluster(&self, k: usize, seed: u64) -> Result<SubgraphPartition, ClusteringError> {
        if k < 2 {
            return Err(ClusteringError::Validation(
                "spectral clustering needs k >= 2".into(),
            ));
        }
        let m = self.active.len();
        if k > m {
            return Err(ClusteringError::InsufficientData(format!(
                "{m} connected nodes for {k} subgraphs"
            )));
        }
        let mut embedding = Matrix::zeros(m, k);
        for i in 0..m {
            let row = embedding.row_mut(i);
            for (c, slot) in row.iter_mut().enumerate() {
                *slot = self.eig.vectors.get(i, c);
            }
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|x| *x /= norm);
            }
        }
        let model = kmeans_fit(&embedding, k, seed, 300, 1e-6).map_err(|e| match e {
            ClusteringError::InsufficientData(msg) => {
                ClusteringError::Numerical(format!("degenerate embedding: {msg}"))
            }
            other => other,
        })?;

        // canonical ids: order of first appearance
        let mut relabel = vec![usize::MAX; k];
        let mut next = 0;
        let mut node_labels = Vec::with_capacity(m);
        for i in 0..m {
            let raw = model.assign(embedding.row(i))?;
            if relabel[raw] == usize::MAX {
                relabel[raw] = next;
                next += 1;
            }
            node_labels.push(relabel[raw]);
        }
        if next < k {
            return Err(ClusteringError::Numerical(format!(
                "only {next} of {k} subgraphs are non-empty"
            )));
        }

        let mut labels = vec![k; self.n_states];
        for (pos, &node) in self.active.iter().enumerate() {
            labels[self.index_map[node]] = node_labels[pos];
        }
        let residual_label = (m < self.n_states).then_some(k);
        Ok(SubgraphPartition {
            k,
            labels,
            residual_label,
        })
    }

    /// Picks the number of subgraphs at the largest gap of the spectrum,
    /// searching `k` in `[1, k_max]`. A largest gap right after the first
    /// eigenvalue yields the floor value 2 and flags the result degenerate.
    pub fn eigengap(&self, k_max: usize) -> Result<EigengapAnalysis, ClusteringError> {
        if k_max < 2 {
            return Err(ClusteringError::Validation(
                "k_max must be at least 2".into(),
            ));
        }
        let m = self.active.len();
        if k_max > m {
            return Err(ClusteringError::InsufficientData(format!(
                "k_max {k_max} exceeds {m} connected nodes"
            )));
        }
        let values = &self.eig.values;
        let mut best = (1, f64::NEG_INFINITY);
        for k in 1..=k_max.min(m - 1) {
            let gap = values[k - 1] - values[k];
            if gap > best.1 {
                best = (k, gap);
            }
        }
        let degenerate = best.0 == 1;
        Ok(EigengapAnalysis {
            suggested_k: best.0.max(2),
            degenerate,
            eigenvalues: values[..(k_max + 1).min(m)].to_vec(),
        })
    }
}

pub fn spectral_cluster(
    w: &Affinity,
    k: usize,
    seed: u64,
) -> Result<SubgraphPartition, ClusteringError> {
    if k < 2 {
        return Err(ClusteringError::Validation(
            "spectral clustering needs k >= 2".into(),
        ));
    }
    spectral_decompose(w)?.cluster(k, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigengapAnalysis {
    pub suggested_k: usize,
    /// True when the largest gap sits right after the leading eigenvalue,
    /// i.e. the graph looks like one block and the answer is the floor.
    pub degenerate: bool,
    /// Leading eigenvalues of the normalized affinity, descending.
    pub eigenvalues: Vec<f64>,
}

pub fn eigengap_analysis(w: &Affinity, k_max: usize) -> Result<EigengapAnalysis, ClusteringError> {
    if k_max < 2 {
        return Err(ClusteringError::Validation(
            "k_max must be at least 2".into(),
        ));
    }
    spectral_decompose(w)?.eigengap(k_max)
}

pub fn eigengap_suggest(w: &Affinity, k_max: usize) -> Result<usize, ClusteringError> {
    Ok(eigengap_analysis(w, k_max)?.suggested_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transitions::{normalize, TransitionCounts};

    pub(crate) fn cliques(sizes: &[usize]) -> Matrix {
        let n: usize = sizes.iter().sum();
        let mut w = Matrix::zeros(n, n);
        let mut start = 0;
        for &s in sizes {
            for i in start..start + s {
                for j in start..start + s {
                    if i != j {
                        w.set(i, j, 1.0);
                    }
                }
            }
            start += s;
        }
        w
    }

    #[test]
    fn symmetrize_averages_directions() {
        let mut counts = TransitionCounts::square(2);
        counts.record(0, 1, 0).unwrap();
        counts.record(1, 1, 0).unwrap();
        let w = symmetrize(&normalize(&counts)).unwrap();
        assert_eq!(w.weights().get(0, 1), 0.5);
        assert_eq!(w.weights().get(1, 0), 0.5);
    }

    #[test]
    fn symmetrize_keeps_symmetric_input_and_drops_masked_rows() {
        let mut counts = TransitionCounts::square(3);
        for (f, t) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            counts.record(f, t, 0).unwrap();
        }
        let t = normalize(&counts);
        let w = symmetrize(&t).unwrap();
        assert_eq!(w.index_map(), &[0, 2]);
        assert_eq!(
            w.weights(),
            &Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]])
        );
        assert!(symmetrize_dense(&Matrix::zeros(2, 3), &[true, true]).is_err());
    }

    #[test]
    fn disconnected_cliques_split_exactly() {
        let w = Affinity::new(cliques(&[5, 5])).unwrap();
        let p = spectral_cluster(&w, 2, 0).unwrap();
        assert_eq!(p.labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(p.residual_label, None);
    }

    #[test]
    fn uniform_complete_graph_uses_both_labels() {
        let mut w = Matrix::zeros(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                w.set(i, j, 1.0);
            }
        }
        let p = spectral_cluster(&Affinity::new(w).unwrap(), 2, 0).unwrap();
        assert!(p.labels.contains(&0) && p.labels.contains(&1));
    }

    #[test]
    fn isolated_nodes_get_the_residual_label() {
        let mut w = Matrix::zeros(7, 7);
        let base = cliques(&[3, 3]);
        for i in 0..6 {
            for j in 0..6 {
                w.set(i, j, base.get(i, j));
            }
        }
        let p = spectral_cluster(&Affinity::new(w).unwrap(), 2, 1).unwrap();
        assert_eq!(p.labels[6], 2);
        assert_eq!(p.residual_label, Some(2));
        assert_eq!(p.sizes(), vec![3, 3, 1]);
    }

    #[test]
    fn too_many_subgraphs() {
        let w = Affinity::new(cliques(&[2])).unwrap();
        assert!(matches!(
            spectral_cluster(&w, 3, 0),
            Err(ClusteringError::InsufficientData(_))
        ));
        assert!(matches!(
            spectral_cluster(&w, 1, 0),
            Err(ClusteringError::Validation(_))
        ));
    }

    #[test]
    fn eigengap_examples() {
        let two = Affinity::new(cliques(&[4, 6])).unwrap();
        assert_eq!(eigengap_suggest(&two, 5).unwrap(), 2);
        let many = Affinity::new(cliques(&[3; 15])).unwrap();
        assert_eq!(eigengap_suggest(&many, 20).unwrap(), 15);
        let one = Affinity::new(cliques(&[6])).unwrap();
        let analysis = eigengap_analysis(&one, 4).unwrap();
        assert_eq!(analysis.suggested_k, 2);
        assert!(analysis.degenerate);
        assert!(eigengap_analysis(&one, 7).is_err());
    }

    #[test]
    fn affinity_validation() {
        let asym = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.0]]);
        assert!(Affinity::new(asym).is_err());
        let negative = Matrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]);
        assert!(Affinity::new(negative).is_err());
    }
}
