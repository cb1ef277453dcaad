use nalgebra::{DMatrix, SymmetricEigen};

/// `L` with `L L^T` equal to `m` after clipping negative eigenvalues at zero.
pub(crate) struct PsdFactor {
    pub factor: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// Largest magnitude among the clipped eigenvalues (0 if none).
    pub clipped: f64,
}

pub(crate) fn psd_factor(m: &DMatrix<f64>) -> PsdFactor {
    let eig = SymmetricEigen::new(m.clone());
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let clipped = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l < 0.0)
        .fold(0.0, |acc: f64, &l| acc.max(-l));
    let mut factor = eig.eigenvectors;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        factor.column_mut(j).scale_mut(s);
    }
    PsdFactor {
        factor,
        min_eigenvalue,
        clipped,
    }
}

/// Symmetric square root `Q diag(sqrt(l)) Q^T` of a PSD matrix.
pub(crate) fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    scaled * q.transpose()
}

#[inline]
pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reconstructs_psd() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = psd_factor(&m);
        assert!((&f.factor * f.factor.transpose() - &m).amax() < 1e-12);
        assert_eq!(f.clipped, 0.0);
        assert!((f.min_eigenvalue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn factor_clips_negative() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let f = psd_factor(&m);
        assert!((f.clipped - 0.5).abs() < 1e-12);
        let r = &f.factor * f.factor.transpose();
        assert!((r - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.36, 0.6, 1.0, 0.6, 0.36, 0.6, 1.0]);
        let r = sym_sqrt(&m);
        assert!((&r * &r - &m).amax() < 1e-12);
        assert!((&r - r.transpose()).amax() < 1e-12);
    }
}
