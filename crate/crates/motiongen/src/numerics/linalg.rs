//! Small dense symmetric eigendecomposition (cyclic Jacobi) and singular
//! values. Dimensions stay at or below 64 here, so a dependency-free dense
//! sweep is plenty.

use crate::error::{Error, Result};

/// Eigenvalues and eigenvectors of a symmetric matrix (row-major `n*n`).
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns of the
/// returned row-major matrix, eigenvalues ascending.
pub fn sym_eigen(n: usize, a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != n * n {
        return Err(Error::shape(format!("sym_eigen: expected {n}x{n} matrix")));
    }
    let mut m = a.to_vec();
    // v starts as identity; accumulates rotations.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let max_sweeps = 64;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + frobenius(n, &m)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[i * n + i], i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
    let eigvals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut eigvecs = vec![0.0; n * n];
    for (new_col, &(_, old_col)) in pairs.iter().enumerate() {
        for r in 0..n {
            eigvecs[r * n + new_col] = v[r * n + old_col];
        }
    }
    Ok((eigvals, eigvecs))
}

fn frobenius(n: usize, m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt() / (n as f64)
}

/// Singular values of an `m x n` row-major matrix, descending.
///
/// One-sided Jacobi on the thinner orientation; unlike the Gram-matrix
/// shortcut this resolves near-zero singular values to machine precision,
/// which the low-rank bound checks depend on.
pub fn singular_values(m: usize, n: usize, a: &[f64]) -> Result<Vec<f64>> {
    if a.len() != m * n {
        return Err(Error::shape(format!("singular_values: expected {m}x{n} matrix")));
    }
    let (rows, cols, mut w) = if n <= m {
        (m, n, a.to_vec())
    } else {
        let mut t = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                t[j * m + i] = a[i * n + j];
            }
        }
        (n, m, t)
    };
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let x = w[i * cols + p];
                    let y = w[i * cols + q];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let x = w[i * cols + p];
                    let y = w[i * cols + q];
                    w[i * cols + p] = c * x - s * y;
                    w[i * cols + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| w[i * cols + j] * w[i * cols + j]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    Ok(sv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let a = vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let (vals, _) = sym_eigen(3, &a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_from_eigenpairs() {
        let n = 6;
        let raw = RngKey::new(11, "sym", 0).normal_vec(n * n);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
            }
        }
        let (vals, vecs) = sym_eigen(n, &a).unwrap();
        // A_ij ?= sum_k vals_k vecs_ik vecs_jk
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += vals[k] * vecs[i * n + k] * vecs[j * n + k];
                }
                assert!((acc - a[i * n + j]).abs() < 1e-9, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn singular_values_of_known_matrix() {
        // diag(3, 2) embedded in 2x3: singular values 3, 2.
        let a = vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0];
        let sv = singular_values(2, 3, &a).unwrap();
        assert!((sv[0] - 3.0).abs() < 1e-10);
        assert!((sv[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rank_one_outer_product() {
        let u = RngKey::new(2, "svu", 0).normal_vec(5);
        let v = RngKey::new(2, "svv", 0).normal_vec(7);
        let mut a = vec![0.0; 35];
        for i in 0..5 {
            for j in 0..7 {
                a[i * 7 + j] = u[i] * v[j];
            }
        }
        let sv = singular_values(5, 7, &a).unwrap();
        let un: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vn: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((sv[0] - un * vn).abs() < 1e-9);
        for s in &sv[1..] {
            assert!(s.abs() < 1e-9 * sv[0]);
        }
    }
}
