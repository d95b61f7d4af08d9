//! Least-squares section maps and the normalized cross-validation error.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};
use crate::section::{PairedDataset, TransitionKind};

/// Linear map predicting output residuals from input residuals: `y ≈ A x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionMap {
    pub a: DMatrix<f64>,
    pub kind: TransitionKind,
    pub n_train: usize,
}

impl SectionMap {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Default truncation threshold relative to the largest singular value.
pub fn default_rcond(d: usize) -> f64 {
    d.max(1) as f64 * f64::EPSILON
}

/// Moore–Penrose pseudoinverse through the SVD. Singular values at or below
/// `rcond · σ_max` are treated as zero.
pub fn pseudoinverse(x: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }
    let svd = SVD::try_new(x.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let sigma_max = svd.singular_values.max();
    let cutoff = rcond * sigma_max;
    let (u, v_t) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
    let k = svd.singular_values.len();
    let mut pinv = DMatrix::zeros(d, n);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s > cutoff && s > 0.0 {
            // X† = Σ_i v_i u_iᵀ / σ_i
            pinv.ger(1.0 / s, &v_t.row(i).transpose(), &u.column(i), 1.0);
        }
    }
    Ok(pinv)
}

/// `A = (X† Y)ᵀ`, the minimum-Frobenius-norm least-squares solution.
pub fn fit_matrix(x: &DMatrix<f64>, y: &DMatrix<f64>, rcond: f64) -> Result<DMatrix<f64>> {
    if x.nrows() != y.nrows() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.nrows() });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok((pseudoinverse(x, rcond)? * y).transpose())
}

pub fn fit_map(ds: &PairedDataset, rcond: f64) -> Result<SectionMap> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(SectionMap { a: fit_matrix(ds.x(), ds.y(), rcond)?, kind: ds.kind(), n_train: ds.len() })
}

/// `‖Yv − Xv Aᵀ‖² / ‖Yv‖²` with Frobenius norms.
pub fn cve_matrix(a: &DMatrix<f64>, xv: &DMatrix<f64>, yv: &DMatrix<f64>) -> Result<f64> {
    if xv.nrows() != yv.nrows() {
        return Err(Error::LengthMismatch { left: xv.nrows(), right: yv.nrows() });
    }
    if xv.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if xv.ncols() != a.ncols() || yv.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), found: xv.ncols() });
    }
    let denom = yv.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroNormalization);
    }
    Ok((yv - xv * a.transpose()).norm_squared() / denom)
}

pub fn cve(map: &SectionMap, xv: &DMatrix<f64>, yv: &DMatrix<f64>) -> Result<f64> {
    cve_matrix(&map.a, xv, yv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::section::MirrorSpec;
    use proptest::prelude::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn pinv_examples() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!((pseudoinverse(&eye, 1e-15).unwrap() - &eye).norm() < 1e-15);

        // rank one: X = u σ vᵀ with σ² = 5, X† = X ᵀ / 5
        let x = m(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let p = pseudoinverse(&x, default_rcond(2)).unwrap();
        assert!((p - m(2, 2, &[0.2, 0.4, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn pinv_of_zero_matrix_is_zero() {
        let z = DMatrix::<f64>::zeros(3, 2);
        assert_eq!(pseudoinverse(&z, 1e-10).unwrap(), DMatrix::zeros(2, 3));
    }

    #[test]
    fn fit_examples() {
        let ds =
            PairedDataset::new(TransitionKind::LR, DMatrix::identity(2, 2), m(2, 2, &[2.0, 0.0, 0.0, 3.0])).unwrap();
        let map = fit_map(&ds, default_rcond(2)).unwrap();
        assert!((map.a.clone() - m(2, 2, &[2.0, 0.0, 0.0, 3.0])).norm() < 1e-14);
        assert_eq!((map.kind, map.n_train), (TransitionKind::LR, 2));

        let x = m(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let ds = PairedDataset::new(TransitionKind::LL, x.clone(), x).unwrap();
        let map = fit_map(&ds, default_rcond(2)).unwrap();
        assert!((map.a - m(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn cve_examples() {
        let map = SectionMap { a: m(1, 1, &[1.0]), kind: TransitionKind::LR, n_train: 1 };
        let xv = m(2, 1, &[1.0, 1.0]);
        let yv = m(2, 1, &[2.0, 0.0]);
        assert_eq!(cve(&map, &xv, &yv).unwrap(), 0.5);

        let zero = SectionMap { a: m(1, 1, &[0.0]), ..map.clone() };
        assert_eq!(cve(&zero, &xv, &yv).unwrap(), 1.0);
        assert_eq!(cve(&map, &xv, &xv).unwrap(), 0.0);
        assert_eq!(cve(&map, &xv, &m(2, 1, &[0.0, 0.0])), Err(Error::ZeroNormalization));
    }

    fn mat(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
    }

    fn problem() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        (1usize..6, 0usize..10).prop_flat_map(|(d, extra)| {
            let n = d + 2 + extra;
            (mat(n, d), mat(n, d), mat(d, d))
        })
    }

    proptest! {
        #[test]
        fn pinv_reproduces_x((x, _, _) in problem()) {
            let p = pseudoinverse(&x, default_rcond(x.ncols())).unwrap();
            let err = (&x * &p * &x - &x).norm();
            prop_assert!(err <= 1e-8 * x.norm().max(1.0));
        }

        #[test]
        fn fit_is_least_squares_optimal((x, y, delta) in problem()) {
            let a = fit_matrix(&x, &y, default_rcond(x.ncols())).unwrap();
            let base = (&y - &x * a.transpose()).norm();
            let perturbed = (&y - &x * (&a + delta * 0.1).transpose()).norm();
            prop_assert!(perturbed >= base - 1e-9);
        }

        #[test]
        fn in_sample_cve_is_minimal((x, y, other) in problem()) {
            let a = fit_matrix(&x, &y, default_rcond(x.ncols())).unwrap();
            prop_assume!(y.norm() > 1e-6);
            let fitted = cve_matrix(&a, &x, &y).unwrap();
            prop_assert!(fitted <= cve_matrix(&other, &x, &y).unwrap() + 1e-12);
        }

        #[test]
        fn cve_invariant_to_row_order((x, y, a) in problem(), rot in 0usize..16) {
            prop_assume!(y.norm() > 1e-6);
            let n = x.nrows();
            let order: Vec<usize> = (0..n).map(|i| (i * 7 + rot) % n).collect();
            let mut seen = order.clone();
            seen.sort_unstable();
            seen.dedup();
            prop_assume!(seen.len() == n);
            let base = cve_matrix(&a, &x, &y).unwrap();
            let shuffled = cve_matrix(&a, &x.select_rows(&order), &y.select_rows(&order)).unwrap();
            prop_assert!((base - shuffled).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn fit_commutes_with_mirroring((x, y, _) in problem()) {
            let d = x.ncols();
            let perm: Vec<usize> = (0..d).map(|i| if i + 1 < d && i % 2 == 0 { i + 1 } else if i % 2 == 1 { i - 1 } else { i }).collect();
            let mirror = MirrorSpec::from_perm(perm).unwrap();
            let a = fit_matrix(&x, &y, default_rcond(d)).unwrap();
            let am = fit_matrix(&mirror.apply_rows(&x).unwrap(), &mirror.apply_rows(&y).unwrap(), default_rcond(d)).unwrap();
            let expected = mirror.conjugate(&a).unwrap();
            prop_assert!((am - expected).norm() <= 1e-10 * a.norm().max(1.0));
        }
    }
}
