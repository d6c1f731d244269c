use ndarray::{Array2, Axis};
use ndarray_linalg::error::LinalgError;
use ndarray_linalg::Eig;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Eigenpairs whose backward error is checked after each solve.
const CHECKED_PAIRS: usize = 5;
const BACKWARD_TOL: f64 = 1e-8;

fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn lapack_failure(e: LinalgError, n: usize) -> Error {
    match e {
        // geev reports the first eigenvalue index whose QR iteration failed
        LinalgError::Lapack(lax::error::Error::LapackComputationalFailure { return_code }) => {
            Error::QrNonConvergence { index: return_code.max(0) as usize }
        }
        _ => Error::QrNonConvergence { index: n },
    }
}

/// All eigenvalues of `a`, unsorted. LAPACK `zgeev` balances, reduces to
/// Hessenberg form and runs shifted QR with deflation; a few random
/// eigenpairs are then checked for backward error `‖Av − λv‖/(‖A‖‖v‖)`.
pub(crate) fn eigenvalues(a: &Array2<Complex64>, seed: u64) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (values, vectors) = a.eig().map_err(|e| lapack_failure(e, n))?;
    if let Some(k) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::QrNonConvergence { index: k });
    }
    let norm = frobenius(a).max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CHECKED_PAIRS.min(n) {
        let k = rng.gen_range(0..n);
        let v = vectors.index_axis(Axis(1), k);
        let r = a.dot(&v) - &v.mapv(|x| x * values[k]);
        let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(rn <= BACKWARD_TOL * norm * vn) {
            return Err(Error::QrNonConvergence { index: k });
        }
    }
    Ok(values.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal_spectrum() {
        let a = Array2::from_shape_fn((5, 5), |(i, j)| if i == j { c(i as f64 + 1.0, 0.0) } else { c(0.0, 0.0) });
        let v = sorted(eigenvalues(&a, 1).unwrap());
        for (k, z) in v.iter().enumerate() {
            assert!((z - c(k as f64 + 1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_spectrum() {
        let a = Array2::from_shape_vec((2, 2), vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let mut v = eigenvalues(&a, 1).unwrap();
        v.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((v[0] - c(0.0, -1.0)).norm() < 1e-12);
        assert!((v[1] - c(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn nonnormal_block() {
        let a = Array2::from_shape_vec(
            (3, 3),
            vec![c(2.0, 0.0), c(100.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0), c(50.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 2.0)],
        )
        .unwrap();
        let v = sorted(eigenvalues(&a, 7).unwrap());
        assert!((v[0] - c(-1.0, 2.0)).norm() < 1e-10);
        assert!((v[1] - c(2.0, 0.0)).norm() < 1e-10);
        assert!((v[2] - c(3.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn badly_scaled_matrix() {
        let a = Array2::from_shape_fn((6, 6), |(i, j)| c(((i + 1) * (j + 2)) as f64 * 10f64.powi(2 * (i as i32 - j as i32)), 0.1 * j as f64));
        let v = eigenvalues(&a, 3).unwrap();
        let trace: Complex64 = (0..6).map(|i| a[(i, i)]).sum();
        let sum: Complex64 = v.iter().sum();
        assert!((trace - sum).norm() < 1e-9 * trace.norm());
    }
}
