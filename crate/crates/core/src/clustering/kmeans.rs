//! Lloyd's k-means with k-means++ seeding.
//!
//! Identical input rows are collapsed into one weighted point before fitting.
//! Lloyd iterations on weighted points produce exactly the centroids that the
//! duplicated data would, and sensorimotor data from noiseless simulators is
//! dominated by repeats.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClusteringError, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid displacement.
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    centroids: Matrix,
    inertia: f64,
    /// Inertia after every assignment step, the last entry being [`Self::inertia`].
    inertia_history: Vec<f64>,
    iterations: usize,
}

impl ClusterModel {
    pub fn from_centroids(centroids: Matrix) -> Result<Self, ClusteringError> {
        if centroids.rows() == 0 {
            return Err(ClusteringError::Validation(
                "a model needs at least one centroid".into(),
            ));
        }
        if centroids.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(ClusteringError::Validation("non-finite centroid".into()));
        }
        Ok(Self {
            centroids,
            inertia: 0.0,
            inertia_history: Vec::new(),
            iterations: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    pub fn centroids(&self) -> &Matrix {
        &self.centroids
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn inertia_history(&self) -> &[f64] {
        &self.inertia_history
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn assign(&self, point: &[f64]) -> Result<usize, ClusteringError> {
        if point.len() != self.dim() {
            return Err(ClusteringError::DimensionMismatch {
                expected: self.dim(),
                actual: point.len(),
            });
        }
        Ok(nearest(&self.centroids, point).0)
    }
}

/// Nearest-centroid index; ties go to the lowest index.
pub fn kmeans_assign(model: &ClusterModel, point: &[f64]) -> Result<usize, ClusteringError> {
    model.assign(point)
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &Matrix, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_distance(centroids.row(c), point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub fn kmeans_fit(
    points: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel, ClusteringError> {
    validate(points, k)?;
    let (unique, weights) = deduplicate(points);
    kmeans_fit_weighted(&unique, &weights, k, seed, max_iter, tol)
}

fn validate(points: &Matrix, k: usize) -> Result<(), ClusteringError> {
    if k == 0 {
        return Err(ClusteringError::Validation("k must be at least 1".into()));
    }
    if points.rows() < k {
        return Err(ClusteringError::InsufficientData(format!(
            "{} points for {k} clusters",
            points.rows()
        )));
    }
    if let Some(pos) = points.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(ClusteringError::Validation(format!(
            "non-finite value in row {}",
            pos / points.cols().max(1)
        )));
    }
    Ok(())
}

/// Collapses bitwise-identical rows, keeping first-occurrence order.
fn deduplicate(points: &Matrix) -> (Matrix, Vec<f64>) {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut data = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for i in 0..points.rows() {
        // +0.0 and -0.0 are the same point
        let key: Vec<u64> = points.row(i).iter().map(|v| (v + 0.0).to_bits()).collect();
        match index.get(&key) {
            Some(&slot) => weights[slot] += 1.0,
            None => {
                index.insert(key, weights.len());
                data.extend_from_slice(points.row(i));
                weights.push(1.0);
            }
        }
    }
    (
        Matrix::from_vec(weights.len(), points.cols(), data),
        weights,
    )
}

pub fn kmeans_fit_weighted(
    points: &Matrix,
    weights: &[f64],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel, ClusteringError> {
    validate(points, k)?;
    if weights.len() != points.rows() {
        return Err(ClusteringError::DimensionMismatch {
            expected: points.rows(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(ClusteringError::Validation(
            "weights must be positive and finite".into(),
        ));
    }
    let distinct = deduplicate(points).0.rows();
    if distinct < k {
        return Err(ClusteringError::InsufficientData(format!(
            "{distinct} distinct points for {k} clusters"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, weights, k, &mut rng);
    let n = points.rows();
    let dim = points.cols();
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let inertia = assign_all(points, weights, &centroids, &mut labels, &mut dists);
        history.push(inertia);
        if iterations == max_iter {
            break;
        }
        iterations += 1;

        let mut sums = Matrix::zeros(k, dim);
        let mut mass = vec![0.0; k];
        for i in 0..n {
            let c = labels[i];
            mass[c] += weights[i];
            for (s, &x) in sums.row_mut(c).iter_mut().zip(points.row(i)) {
                *s += weights[i] * x;
            }
        }
        let mut next = Matrix::zeros(k, dim);
        let mut had_empty = false;
        let mut reseeded = vec![false; n];
        for c in 0..k {
            if mass[c] > 0.0 {
                for (dst, &s) in next.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / mass[c];
                }
            } else {
                had_empty = true;
                // farthest point from its own centroid, lowest index on ties
                let mut pick = None;
                for i in 0..n {
                    if reseeded[i] {
                        continue;
                    }
                    if pick.is_none_or(|p: usize| dists[i] > dists[p]) {
                        pick = Some(i);
                    }
                }
                let p = pick
                    .ok_or_else(|| ClusteringError::Numerical("no point left to reseed".into()))?;
                reseeded[p] = true;
                next.row_mut(c).copy_from_slice(points.row(p));
            }
        }
        let shift = (0..k)
            .map(|c| squared_distance(centroids.row(c), next.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if shift < tol && !had_empty {
            let inertia = assign_all(points, weights, &centroids, &mut labels, &mut dists);
            history.push(inertia);
            break;
        }
    }

    let inertia = *history.last().expect("at least one assignment");
    Ok(ClusterModel {
        centroids,
        inertia,
        inertia_history: history,
        iterations,
    })
}

fn assign_all(
    points: &Matrix,
    weights: &[f64],
    centroids: &Matrix,
    labels: &mut [usize],
    dists: &mut [f64],
) -> f64 {
    let mut inertia = 0.0;
    for i in 0..points.rows() {
        let (c, d) = nearest(centroids, points.row(i));
        labels[i] = c;
        dists[i] = d;
        inertia += weights[i] * d;
    }
    inertia
}

/// k-means++: first centre drawn proportionally to weight, the rest
/// proportionally to weight times squared distance to the closest centre.
fn plus_plus_init(points: &Matrix, weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = sample_index(weights, rng);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut closest: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(first)))
        .collect();
    for c in 1..k {
        let scores: Vec<f64> = closest.iter().zip(weights).map(|(d, w)| d * w).collect();
        let pick = if scores.iter().sum::<f64>() > 0.0 {
            sample_index(&scores, rng)
        } else {
            // unreachable with k distinct points; keeps the draw total
            closest.iter().position(|&d| d > 0.0).unwrap_or(0)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for i in 0..n {
            let d = squared_distance(points.row(i), points.row(pick));
            if d < closest[i] {
                closest[i] = d;
            }
        }
    }
    centroids
}

fn sample_index(scores: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = scores.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s <= 0.0 {
            continue;
        }
        acc += s;
        last_positive = i;
        if target < acc {
            return i;
        }
    }
    last_positive
}
