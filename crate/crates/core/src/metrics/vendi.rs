use nalgebra::{DMatrix, SymmetricEigen};

use super::MetricError;

/// Tolerance for the symmetry, unit-diagonal and PSD checks.
pub const VENDI_TOLERANCE: f64 = 1e-8;

/// `exp(-sum(l ln l))` over the eigenvalues `l` of `K / n`, with `0 ln 0 = 0`.
pub fn vendi_score(k: &DMatrix<f64>) -> Result<f64, MetricError> {
    let n = k.nrows();
    if n == 0 || k.ncols() != n {
        return Err(MetricError::Matrix(format!("expected a non-empty square matrix, got {}x{}", k.nrows(), k.ncols())));
    }
    for i in 0..n {
        if (k[(i, i)] - 1.0).abs() > VENDI_TOLERANCE {
            return Err(MetricError::Matrix(format!("diagonal entry {i} is {}, not 1", k[(i, i)])));
        }
        for j in 0..i {
            if (k[(i, j)] - k[(j, i)]).abs() > VENDI_TOLERANCE {
                return Err(MetricError::Matrix(format!("not symmetric at ({i}, {j})")));
            }
        }
    }
    let eig = SymmetricEigen::new(k / n as f64);
    let min = eig.eigenvalues.min();
    if min * (n as f64) < -VENDI_TOLERANCE {
        return Err(MetricError::Matrix(format!("not positive semidefinite (eigenvalue {})", min * n as f64)));
    }
    Ok(entropy_exp(eig.eigenvalues.iter().copied()))
}

/// Vendi score of the cosine-similarity kernel of the rows of `x`. When
/// there are fewer dimensions than rows the d×d dual matrix is used; it has
/// the same non-zero spectrum.
pub fn vendi_score_embeddings(x: &DMatrix<f64>) -> Result<f64, MetricError> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(MetricError::Matrix("embedding matrix is empty".into()));
    }
    let mut unit = x.clone();
    for (i, mut row) in unit.row_iter_mut().enumerate() {
        let norm = row.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(MetricError::Matrix(format!("embedding {i} has zero or non-finite norm")));
        }
        row /= norm;
    }
    if d < n {
        let dual = unit.transpose() * &unit / n as f64;
        Ok(entropy_exp(SymmetricEigen::new(dual).eigenvalues.iter().copied()))
    } else {
        vendi_score(&(&unit * unit.transpose()))
    }
}

fn entropy_exp(eigenvalues: impl Iterator<Item = f64>) -> f64 {
    let h: f64 = eigenvalues
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum();
    h.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identities() {
        assert_relative_eq!(vendi_score(&DMatrix::from_element(7, 7, 1.0)).unwrap(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(vendi_score(&DMatrix::identity(9, 9)).unwrap(), 9.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_bad_kernels() {
        let mut k = DMatrix::identity(3, 3);
        k[(0, 1)] = 0.5;
        assert!(vendi_score(&k).is_err());
        let not_psd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(vendi_score(&not_psd).is_err());
        assert!(vendi_score(&DMatrix::from_element(2, 2, 0.5)).is_err());
    }

    #[test]
    fn dual_matches_primal() {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.3, 0.7, -0.2, 1.0]);
        let mut unit = x.clone();
        for mut r in unit.row_iter_mut() {
            let n = r.norm();
            r /= n;
        }
        let primal = vendi_score(&(&unit * unit.transpose())).unwrap();
        assert_relative_eq!(vendi_score_embeddings(&x).unwrap(), primal, epsilon = 1e-10);
    }
}
