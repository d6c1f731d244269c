use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::search::Eigenvalue;
use crate::charfn::CharFn;
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, TransverseProblem};
use crate::shoot::{eigenfunction_samples, Eigenfunction};

/// Boundary residual accepted when tracing eigenfunctions.
const EIGENFUNCTION_RESIDUAL: f64 = 1e-6;
const EIGENFUNCTION_TOL: f64 = 1e-12;

/// Conjugate partners must lie within this distance.
pub const PAIRING_TOL: f64 = 1e-8;

pub(crate) fn eigenfunction_of(f: &CharFn, lambda: Complex64, samples: usize) -> Result<Eigenfunction> {
    eigenfunction_samples(f.operator(), f.boundary(), lambda, samples, EIGENFUNCTION_TOL, EIGENFUNCTION_RESIDUAL)
}

pub(crate) fn square_integral_of(f: &CharFn, lambda: Complex64, samples: usize) -> Result<Complex64> {
    Ok(eigenfunction_of(f, lambda, samples)?.square_integral())
}

/// `∫ψ² dν` of the unit-normalized eigenfunction at `λ`, and whether its
/// modulus exceeds the degeneracy threshold `1e−6`.
pub fn simplicity_test(problem: &TransverseProblem, bc: &BoundaryCondition, lambda: Complex64) -> Result<(bool, Complex64)> {
    let f = CharFn::shooting(problem, bc, EIGENFUNCTION_TOL)?;
    let v = square_integral_of(&f, lambda, 4001)?;
    Ok((v.norm() > 1e-6, v))
}

/// Largest `|Im λ|` still treated as real.
fn is_nonreal(z: Complex64) -> bool {
    z.im.abs() > PAIRING_TOL * (1.0 + z.re.abs())
}

/// For each `λ` with `Im λ > 0`: checks that `conj λ` is listed and that its
/// eigenfunction is a multiple of `PT ψ_λ`. Returns the largest relative
/// projection defect (zero if the list is real).
pub fn pt_pair_check(problem: &TransverseProblem, bc: &BoundaryCondition, eigenvalues: &[Complex64]) -> Result<f64> {
    let mut pairs = Vec::new();
    for &z in eigenvalues.iter().filter(|z| is_nonreal(**z)) {
        let partner = eigenvalues
            .iter()
            .copied()
            .filter(|w| (w - z.conj()).norm() <= PAIRING_TOL * (1.0 + z.norm()).max(1.0) * 10.0)
            .min_by(|a, b| (a - z.conj()).norm().total_cmp(&(b - z.conj()).norm()));
        match partner {
            Some(w) if z.im > 0.0 => pairs.push((z, w)),
            Some(_) => {}
            None => return Err(Error::UnpairedEigenvalue(z)),
        }
    }
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let f = CharFn::shooting(problem, bc, EIGENFUNCTION_TOL)?;
    let mut worst = 0.0_f64;
    for (z, w) in pairs {
        let psi = eigenfunction_of(&f, z, 2001)?;
        let phi = eigenfunction_of(&f, w, 2001)?;
        worst = worst.max(projection_defect(&phi, &psi.pt()));
    }
    Ok(worst)
}

/// `‖φ − cχ‖/‖φ‖` minimized over `c`, in the weighted `L²` norm.
fn projection_defect(phi: &Eigenfunction, chi: &[Complex64]) -> f64 {
    let h = phi.x[1] - phi.x[0];
    let inner = |u: &[Complex64], v: &[Complex64]| {
        let vals: Vec<Complex64> = u.iter().zip(v).zip(&phi.weight).map(|((a, b), w)| a.conj() * b * *w).collect();
        crate::shoot::simpson(&vals, h)
    };
    let c = inner(chi, &phi.psi) / inner(chi, chi);
    let diff: Vec<Complex64> = phi.psi.iter().zip(chi).map(|(p, q)| p - c * q).collect();
    (inner(&diff, &diff).re.max(0.0) / inner(&phi.psi, &phi.psi).re).sqrt()
}

/// Largest off-diagonal `|∫ψᵢψⱼ dν|` after scaling the diagonal to one.
pub fn biorthogonality_check(problem: &TransverseProblem, bc: &BoundaryCondition, eigenvalues: &[Eigenvalue]) -> Result<f64> {
    if let Some(e) = eigenvalues.iter().find(|e| !e.simple) {
        return Err(Error::DegenerateEigenvalue(e.lambda));
    }
    let f = CharFn::shooting(problem, bc, EIGENFUNCTION_TOL)?;
    let fns: Vec<Eigenfunction> =
        eigenvalues.iter().map(|e| eigenfunction_of(&f, e.lambda, 4001)).collect::<Result<_>>()?;
    let diag: Vec<f64> = fns.iter().map(|p| p.square_integral().norm()).collect();
    let mut worst = 0.0_f64;
    for i in 0..fns.len() {
        for j in i + 1..fns.len() {
            let g = fns[i].pairing(&fns[j]).norm() / (diag[i] * diag[j]).sqrt();
            worst = worst.max(g);
        }
    }
    Ok(worst)
}

/// Constants of the sector `Re λ ≥ c₀ + m²`, `|Im λ| ≤ c₁ √(Re λ + |c₀| − m²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorConstants {
    pub c0: f64,
    pub c1: f64,
}

/// Fits the sector constants to mode-one eigenvalues.
pub fn fit_sector(mode_one: &[Complex64]) -> Result<SectorConstants> {
    if mode_one.is_empty() {
        return Err(Error::InvalidParameter("cannot fit sector constants to an empty list".into()));
    }
    let c0 = mode_one.iter().map(|z| z.re).fold(f64::INFINITY, f64::min) - 1.0;
    let c1 = mode_one
        .iter()
        .map(|z| {
            let base = (z.re + c0.abs() - 1.0).max(0.0).sqrt();
            if z.im.abs() <= PAIRING_TOL {
                0.0
            } else if base > 0.0 {
                z.im.abs() / base
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(SectorConstants { c0, c1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub ok: bool,
    pub violations: Vec<Complex64>,
}

/// Checks mode-`m` eigenvalues against the sector fitted at `m = 1`.
pub fn numerical_range_check(m: i64, eigenvalues: &[Complex64], sector: &SectorConstants) -> Result<SectorReport> {
    if m == 0 {
        return Err(Error::InvalidParameter("the sector bound is stated for m != 0".into()));
    }
    let m2 = (m * m) as f64;
    let slack = 1e-9;
    let violations: Vec<Complex64> = eigenvalues
        .iter()
        .copied()
        .filter(|z| {
            let base = (z.re + sector.c0.abs() - m2).max(0.0).sqrt();
            z.re < sector.c0 + m2 - slack || z.im.abs() > sector.c1 * base + slack
        })
        .collect();
    Ok(SectorReport { ok: violations.is_empty(), violations })
}
