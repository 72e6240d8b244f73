//! Cyclic Jacobi eigensolver for dense symmetric matrices.

use super::{ClusteringError, Matrix};

pub const JACOBI_MAX_SWEEPS: usize = 50;
const OFF_DIAGONAL_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenpairs sorted by descending eigenvalue; `vectors` holds one
/// orthonormal eigenvector per column.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
    pub sweeps: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }
}

pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen, ClusteringError> {
    if !a.is_square() {
        return Err(ClusteringError::Validation(format!(
            "matrix is {}x{}, not square",
            a.rows(),
            a.cols()
        )));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ClusteringError::Validation(
            "matrix has non-finite entries".into(),
        ));
    }
    let n = a.rows();
    let norm = a.frobenius_norm();
    let sym_tol = SYMMETRY_TOL * norm.max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.get(i, j) - a.get(j, i)).abs() > sym_tol {
                return Err(ClusteringError::Validation(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }

    // row-major working copies; rows of `vt` are the eigenvectors
    let mut m = a.as_slice().to_vec();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    let mut vt = Matrix::identity(n).as_slice().to_vec();
    let threshold = OFF_DIAGONAL_TOL * norm;

    let mut sweeps = 0;
    while max_off_diagonal(&m, n) >= threshold && norm > 0.0 {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(ClusteringError::Numerical(format!(
                "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps (off-diagonal {:e})",
                max_off_diagonal(&m, n)
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < threshold {
                    continue;
                }
                rotate(&mut m, &mut vt, n, p, q, apq);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, vt[src * n + k]);
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

fn max_off_diagonal(m: &[f64], n: usize) -> f64 {
    let mut max = 0.0f64;
    for i in 0..n {
        for (j, v) in m[i * n..(i + 1) * n].iter().enumerate() {
            if i != j {
                max = max.max(v.abs());
            }
        }
    }
    max
}

/// Two distinct rows `p < q` of a row-major buffer.
fn row_pair(data: &mut [f64], n: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    let (head, tail) = data.split_at_mut(q * n);
    (&mut head[p * n..(p + 1) * n], &mut tail[..n])
}

/// Applies the rotation that zeroes `m[p][q]`, accumulating it into `vt`.
/// Rows `p` and `q` are updated in place and mirrored into the columns.
fn rotate(m: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize, apq: f64) {
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    {
        let (row_p, row_q) = row_pair(m, n, p, q);
        for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
            let (akp, akq) = (*x, *y);
            *x = c * akp - s * akq;
            *y = s * akp + c * akq;
        }
        row_p[p] = app - t * apq;
        row_q[q] = aqq + t * apq;
        row_p[q] = 0.0;
        row_q[p] = 0.0;
    }
    for k in 0..n {
        if k != p && k != q {
            m[k * n + p] = m[p * n + k];
            m[k * n + q] = m[q * n + k];
        }
    }
    m[q * n + p] = 0.0;
    m[p * n + q] = 0.0;

    let (vp, vq) = row_pair(vt, n, p, q);
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_spectrum() {
        let eig = symmetric_eigen(&Matrix::identity(3)).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_is_sorted_with_coordinate_vectors() {
        let eig = symmetric_eigen(&Matrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);
        assert_eq!(eig.vector(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(eig.vector(1), vec![0.0, 0.0, 1.0]);
        assert_eq!(eig.vector(2), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let eig = symmetric_eigen(&a).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        let v = eig.vector(0);
        assert!((v[0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((v[0] - v[1]).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let asym = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(
            symmetric_eigen(&asym),
            Err(ClusteringError::Validation(_))
        ));
        assert!(matches!(
            symmetric_eigen(&Matrix::zeros(2, 3)),
            Err(ClusteringError::Validation(_))
        ));
    }

    #[test]
    fn zero_matrix() {
        let eig = symmetric_eigen(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(eig.values, vec![0.0; 3]);
        assert_eq!(eig.sweeps, 0);
    }
}
