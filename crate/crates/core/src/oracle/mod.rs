//! Finite-difference discretization of the transverse operators and a dense
//! eigensolver, used as an independent check on the shooting eigenvalues.

mod eig;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curvemap::lowest_levels_box;
use crate::error::{Error, Result};
use crate::model::{centrifugal_potential, drift_coefficient, BoundaryCondition, BoundaryData, TransverseProblem};
use crate::spectrum::{find_eigenvalues, pair_nearest, sort_lambdas, SearchBox, SearchOptions};

pub const MIN_GRID: usize = 16;

/// Seed of the eigenpair backward-error check.
const CHECK_SEED: u64 = 0x5eed;

/// Three-point discretization on a uniform grid of `n` intervals over
/// `[−a, a]`. The unknowns are the nodal values `ψ₀…ψ_n` (one fewer when the
/// boundary condition ties `ψ_n` to `ψ₀`).
#[derive(Debug, Clone)]
pub struct FdMatrix {
    pub n: usize,
    pub h: f64,
    pub entries: Array2<Complex64>,
    pub bc_encoding: String,
}

impl FdMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Nodes carrying the unknowns.
    pub fn nodes(&self) -> Vec<f64> {
        let a = 0.5 * self.h * self.n as f64;
        (0..self.dim()).map(|i| -a + i as f64 * self.h).collect()
    }
}

/// Discretizes `−ψ'' + g ψ' + q ψ` with the given boundary data. Boundary
/// derivatives are central differences through ghost nodes `ψ₋₁`, `ψ_{n+1}`,
/// which the boundary condition eliminates.
pub fn build_from_coefficients(
    a: f64,
    drift: impl Fn(f64) -> f64,
    potential: impl Fn(f64) -> f64,
    boundary: &BoundaryData,
    n: usize,
) -> Result<FdMatrix> {
    if n < MIN_GRID {
        return Err(Error::InvalidParameter(format!("grid needs at least {MIN_GRID} intervals, got {n}")));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("half-width must be positive, got {a}")));
    }
    let h = 2.0 * a / n as f64;
    let h2 = 1.0 / (h * h);
    let re = |v: f64| Complex64::new(v, 0.0);
    let x = |i: usize| -a + i as f64 * h;
    // full nodal matrix on ψ₀…ψ_n; the boundary rows pick up D₀ = ψ'(−a) and D_n = ψ'(a)
    let mut full = Array2::zeros((n + 1, n + 1));
    for i in 0..=n {
        full[(i, i)] = re(2.0 * h2 + potential(x(i)));
        if i > 0 && i < n {
            let g = drift(x(i));
            full[(i, i - 1)] = re(-h2 - 0.5 * g / h);
            full[(i, i + 1)] = re(-h2 + 0.5 * g / h);
        }
    }
    full[(0, 1)] = re(-2.0 * h2);
    full[(n, n - 1)] = re(-2.0 * h2);
    let w0 = re(2.0 / h + drift(x(0)));
    let wn = re(-2.0 / h + drift(x(n)));
    let (entries, bc_encoding) = match *boundary {
        BoundaryData::Robin { left, right } => {
            full[(0, 0)] -= w0 * left;
            full[(n, n)] -= wn * right;
            (full, format!("robin ghost nodes: psi' = -({left}) psi at -a, psi' = -({right}) psi at a"))
        }
        BoundaryData::Transfer(b) => {
            let e = b.entries;
            let enc = format!(
                "transfer ghost nodes: (psi, psi')(a) = B (psi, psi')(-a), B = [[{}, {}], [{}, {}]]",
                e[0][0], e[0][1], e[1][0], e[1][1]
            );
            let scale = e.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
            if e[0][1].norm() > 1e-12 * scale {
                // D₀ = (ψ_n − B₁₁ψ₀)/B₁₂, D_n = B₂₁ψ₀ + B₂₂D₀
                let d0 = [-e[0][0] / e[0][1], 1.0 / e[0][1]];
                let dn = [e[1][0] + e[1][1] * d0[0], e[1][1] * d0[1]];
                for (k, col) in [0, n].into_iter().enumerate() {
                    full[(0, col)] += w0 * d0[k];
                    full[(n, col)] += wn * dn[k];
                }
                (full, enc)
            } else {
                (transfer_without_b12(full, e, w0, wn, n)?, enc)
            }
        }
    };
    if entries.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidParameter("finite-difference matrix has non-finite entries".into()));
    }
    Ok(FdMatrix { n, h, entries, bc_encoding })
}

/// `B₁₂ = 0` makes `ψ_n = B₁₁ψ₀` algebraic. Row `n` minus `B₁₁`·row `0` is
/// then free of `λ` and fixes `D₀`; the unknowns shrink to `ψ₀…ψ_{n−1}`.
fn transfer_without_b12(full: Array2<Complex64>, e: [[Complex64; 2]; 2], w0: Complex64, wn: Complex64, n: usize) -> Result<Array2<Complex64>> {
    let b11 = e[0][0];
    // row_n = Σ full[n, j] ψ_j + wn (B₂₁ψ₀ + B₂₂D₀), row_0 = Σ full[0, j] ψ_j + w0 D₀
    let d0_coef = wn * e[1][1] - b11 * w0;
    if d0_coef.norm() == 0.0 {
        return Err(Error::InvalidParameter("transfer matrix elimination is singular on this grid".into()));
    }
    // D₀ = Σ_j c_j ψ_j over j < n, after substituting ψ_n = B₁₁ψ₀
    let mut c = vec![Complex64::default(); n];
    for j in 0..n {
        c[j] = -(full[(n, j)] - b11 * full[(0, j)]) / d0_coef;
    }
    c[0] -= (full[(n, n)] * b11 + wn * e[1][0] - b11 * full[(0, n)] * b11) / d0_coef;
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = full[(i, j)];
        }
        out[(i, 0)] += full[(i, n)] * b11;
    }
    for j in 0..n {
        out[(0, j)] += w0 * c[j];
    }
    Ok(out)
}

/// Finite-difference matrix of the curved transverse operator `H^m`.
pub fn build_matrix(problem: &TransverseProblem, bc: &BoundaryCondition, n: usize) -> Result<FdMatrix> {
    let boundary = BoundaryData::from_condition(bc)?;
    let k = problem.curvature;
    build_from_coefficients(
        problem.a,
        |x| drift_coefficient(k, x).expect("grid lies inside the strip"),
        |x| centrifugal_potential(problem, x).expect("grid lies inside the strip"),
        &boundary,
        n,
    )
}

/// All eigenvalues of the matrix, sorted by `(Re, Im)`.
pub fn eig_all(matrix: &FdMatrix) -> Result<Vec<Complex64>> {
    let mut v = eig::eigenvalues(&matrix.entries, CHECK_SEED)?;
    sort_lambdas(&mut v);
    Ok(v)
}

/// Eigenvalues on grids `n` and `2n`, combined as `(4λ_{2n} − λ_n)/3` after
/// nearest pairing. Only values inside `window` are returned.
pub fn extrapolated_eigenvalues(problem: &TransverseProblem, bc: &BoundaryCondition, n: usize, window: &SearchBox) -> Result<Vec<Complex64>> {
    let (coarse, fine) = rayon::join(
        || eig_all(&build_matrix(problem, bc, n)?),
        || eig_all(&build_matrix(problem, bc, 2 * n)?),
    );
    let (coarse, fine) = (coarse?, fine?);
    let fine: Vec<Complex64> = fine.into_iter().filter(|z| window.contains_loose(*z, 0.1)).collect();
    let (partners, _) = pair_nearest(&fine, &coarse)?;
    let mut out: Vec<Complex64> = fine
        .iter()
        .zip(&partners)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .filter(|z| window.contains(*z))
        .collect();
    sort_lambdas(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub deviation: f64,
    /// Lowest shooting eigenvalues, with multiplicity.
    pub shooting: Vec<Complex64>,
    /// Their oracle partners.
    pub oracle: Vec<Complex64>,
    pub certificate: usize,
    pub oracle_count: usize,
}

/// Pairs the lowest `n_eigs` shooting eigenvalues with oracle eigenvalues on
/// grid `n_grid` (Richardson-extrapolated with `2·n_grid` if requested).
/// Fails if the two methods count differently in the certified box.
pub fn compare(problem: &TransverseProblem, bc: &BoundaryCondition, n_eigs: usize, n_grid: usize, extrapolate: bool) -> Result<OracleReport> {
    let opts = SearchOptions { diagnostics: false, ..SearchOptions::default() };
    let rect = lowest_levels_box(problem, bc, n_eigs);
    let found = find_eigenvalues(problem, bc, &rect, &opts)?.into_complete()?;
    let certified = found.search_box;
    let all: Vec<Complex64> =
        found.eigenvalues.iter().flat_map(|e| std::iter::repeat(e.lambda).take(e.multiplicity)).collect();
    if all.len() < n_eigs {
        return Err(Error::PairingFailure { expected: n_eigs, found: all.len() });
    }
    let oracle_all = if extrapolate {
        extrapolated_eigenvalues(problem, bc, n_grid, &certified)?
    } else {
        eig_all(&build_matrix(problem, bc, n_grid)?)?.into_iter().filter(|z| certified.contains(*z)).collect()
    };
    if oracle_all.len() != found.zero_count_certificate {
        return Err(Error::PairingFailure { expected: found.zero_count_certificate, found: oracle_all.len() });
    }
    let shooting: Vec<Complex64> = all.into_iter().take(n_eigs).collect();
    let (oracle, deviation) = pair_nearest(&shooting, &oracle_all)?;
    Ok(OracleReport { deviation, shooting, oracle, certificate: found.zero_count_certificate, oracle_count: oracle_all.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Curvature;
    use std::f64::consts::FRAC_PI_4;

    fn problem(k: Curvature, m: i64) -> TransverseProblem {
        TransverseProblem::new(k, m, FRAC_PI_4).unwrap()
    }

    fn sep(alpha: f64, beta: f64) -> BoundaryCondition {
        BoundaryCondition::separated(alpha, beta).unwrap()
    }

    fn lowest(v: &[Complex64], n: usize) -> Vec<Complex64> {
        v.iter().copied().take(n).collect()
    }

    #[test]
    fn neumann_levels() {
        let v = eig_all(&build_matrix(&problem(Curvature::Zero, 0), &sep(0.0, 0.0), 200).unwrap()).unwrap();
        for (z, want) in lowest(&v, 3).iter().zip([0.0, 4.0, 16.0]) {
            assert!((z - want).norm() < 1e-2, "{z} vs {want}");
        }
    }

    #[test]
    fn robin_ground_state_is_alpha_squared() {
        let v = eig_all(&build_matrix(&problem(Curvature::Zero, 0), &sep(1.0, 0.0), 200).unwrap()).unwrap();
        assert!((v[0] - 1.0).norm() < 1e-3, "{}", v[0]);
    }

    #[test]
    fn second_order_convergence() {
        let p = problem(Curvature::Positive, 1);
        let bc = sep(0.5, 0.0);
        let levels = [100, 200, 400].map(|n| eig_all(&build_matrix(&p, &bc, n).unwrap()).unwrap());
        for k in 0..3 {
            let e1 = (levels[0][k] - levels[1][k]).norm();
            let e2 = (levels[1][k] - levels[2][k]).norm();
            let order = (e1 / e2).log2();
            assert!((order - 2.0).abs() < 0.3, "level {k}: order {order}");
        }
    }

    #[test]
    fn conjugation_symmetric() {
        for (k, bc) in [
            (Curvature::Zero, sep(3.0, -0.5)),
            (Curvature::Negative, sep(2.0, 0.0)),
            (Curvature::Positive, BoundaryCondition::connected(0.01, 0.01, 1.0).unwrap()),
        ] {
            let v = eig_all(&build_matrix(&problem(k, 1), &bc, 120).unwrap()).unwrap();
            for z in &v {
                let d = v.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
                assert!(d <= 1e-8 * (1.0 + z.norm()), "{z} has no partner ({d})");
            }
        }
    }

    #[test]
    fn complex_pair_at_exceptional_side() {
        let p = problem(Curvature::Zero, 0);
        let bc = sep(3.0, -0.5);
        let rect = SearchBox::new(0.0, 20.0, -10.0, 10.0).unwrap();
        let v = extrapolated_eigenvalues(&p, &bc, 400, &rect).unwrap();
        let pair: Vec<&Complex64> = v.iter().filter(|z| z.im.abs() > 1e-3).collect();
        assert_eq!(pair.len(), 2, "{v:?}");
        assert!((pair[0] - pair[1].conj()).norm() < 1e-6, "{pair:?}");
        let shot = find_eigenvalues(&p, &bc, &rect, &SearchOptions::default()).unwrap();
        for z in pair {
            assert!((z.re - 9.25).abs() < 2.0);
            let d = shot.lambdas().iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-3, "{z}: {d}");
        }
    }

    #[test]
    fn transfer_without_off_diagonal() {
        // B₁₂ = 0 takes the reduced elimination
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::default();
        let periodic = BoundaryData::Transfer(crate::model::TransferMatrix::new(one, zero, zero, one));
        let m = build_from_coefficients(FRAC_PI_4, |_| 0.0, |_| 0.0, &periodic, 400).unwrap();
        assert_eq!(m.dim(), 400);
        let v = eig_all(&m).unwrap();
        // periodic on a period of π/2: 0, 16, 16, 64, 64
        for (z, want) in v.iter().take(5).zip([0.0, 16.0, 16.0, 64.0, 64.0]) {
            assert!((z - want).norm() < 1e-2, "{z} vs {want}");
        }
    }

    #[test]
    fn richardson_is_stable() {
        let p = problem(Curvature::Positive, 1);
        let bc = sep(0.0, 0.0);
        let window = SearchBox::new(-5.0, 60.0, -5.0, 5.0).unwrap();
        let a = extrapolated_eigenvalues(&p, &bc, 200, &window).unwrap();
        let b = extrapolated_eigenvalues(&p, &bc, 400, &window).unwrap();
        for k in 0..3 {
            assert!((a[k] - b[k]).norm() < 1e-5, "{} vs {}", a[k], b[k]);
        }
    }

    #[test]
    fn compare_flat_robin() {
        let r = compare(&problem(Curvature::Zero, 0), &sep(1.0, 0.0), 5, 400, true).unwrap();
        assert!(r.deviation < 1e-6, "{r:?}");
    }

    #[test]
    fn compare_curved_cases() {
        let r = compare(&problem(Curvature::Negative, 1), &sep(2.0, 0.0), 4, 400, true).unwrap();
        assert!(r.deviation < 1e-4, "{r:?}");
        let bc = BoundaryCondition::connected(0.01, 0.01, std::f64::consts::FRAC_PI_2).unwrap();
        let r = compare(&problem(Curvature::Positive, 0), &bc, 4, 400, true).unwrap();
        assert!(r.deviation < 1e-4, "{r:?}");
    }

    #[test]
    fn small_grid_rejected() {
        assert!(build_matrix(&problem(Curvature::Zero, 0), &sep(0.0, 0.0), 8).is_err());
    }
}
