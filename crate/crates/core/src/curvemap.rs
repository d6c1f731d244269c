//! Unitary maps from the curved transverse operators to flat ones.
//!
//! With `φ = f^{1/2} ψ` the drift disappears and `H^m` becomes
//! `−∂² + V^m_(K)` in the flat measure. The boundary data change as well:
//! separated couplings get an effective `β`, and the transfer matrix of a
//! connected condition is conjugated by the boundary jets of `f^{1/2}`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charfn::{CharFn, Route};
use crate::error::{Error, Result};
use crate::model::{
    metric_factor, transfer_matrix, BoundaryCondition, BoundaryData, ConnectedBc, Curvature, SeparatedBc,
    TransferMatrix, TransverseProblem,
};
use crate::shoot::TransverseOperator;
use crate::spectrum::{eigenfunction_of, find_with, pair_nearest, SearchBox, SearchOptions};

/// Boundary data of the flat problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectiveBc {
    Separated(SeparatedBc),
    Transfer(TransferMatrix),
}

impl EffectiveBc {
    pub fn boundary_data(&self) -> BoundaryData {
        match self {
            EffectiveBc::Separated(s) => BoundaryData::from_separated(s),
            EffectiveBc::Transfer(b) => BoundaryData::Transfer(*b),
        }
    }
}

/// Flat problem `−φ'' + V^m_(K) φ` on `(−a, a)` unitarily equivalent to a curved one.
#[derive(Debug, Clone)]
pub struct TransformedProblem {
    pub curvature: Curvature,
    pub m: i64,
    pub a: f64,
    pub operator: Arc<TransverseOperator>,
    pub effective_bc: EffectiveBc,
}

impl TransformedProblem {
    pub fn char_fn(&self, tol: f64) -> Result<CharFn> {
        CharFn::from_operator(Arc::clone(&self.operator), self.effective_bc.boundary_data(), Route::TransformedShooting, tol)
    }
}

fn curved_only(curvature: Curvature) -> Result<()> {
    if curvature.is_curved() {
        Ok(())
    } else {
        Err(Error::InvalidCurvature(curvature))
    }
}

/// `f'(a)/(2 f(a))` up to sign: `½ tan a` for `K = +1`, `½ tanh a` for `K = −1`.
fn half_log_slope(curvature: Curvature, a: f64) -> f64 {
    match curvature {
        Curvature::Positive => 0.5 * a.tan(),
        _ => 0.5 * a.tanh(),
    }
}

/// `β_eff = β + ½ tan a` (`K = +1`) or `β − ½ tanh a` (`K = −1`).
pub fn effective_beta(curvature: Curvature, a: f64, beta: f64) -> Result<f64> {
    curved_only(curvature)?;
    let s = half_log_slope(curvature, a);
    Ok(if curvature == Curvature::Positive { beta + s } else { beta - s })
}

/// Flat equivalent of a curved problem with separated conditions.
pub fn transform_separated(curvature: Curvature, m: i64, a: f64, bc: &SeparatedBc) -> Result<TransformedProblem> {
    curved_only(curvature)?;
    TransverseProblem::new(curvature, m, a)?;
    let beta = effective_beta(curvature, a, bc.beta)?;
    Ok(TransformedProblem {
        curvature,
        m,
        a,
        operator: Arc::new(TransverseOperator::transformed(curvature, m, a)?),
        effective_bc: EffectiveBc::Separated(SeparatedBc::new(bc.alpha, beta)?),
    })
}

/// `B_(K)` of the flat problem.
pub fn transformed_transfer_matrix(curvature: Curvature, a: f64, bc: &ConnectedBc) -> Result<TransferMatrix> {
    curved_only(curvature)?;
    let b = transfer_matrix(bc)?;
    // K = +1 uses −t, K = −1 uses +t
    let t = match curvature {
        Curvature::Positive => -a.tan(),
        _ => a.tanh(),
    };
    let s = bc.root();
    let e = b.entries;
    let shift = Complex64::new(0.5 * bc.b * t, 0.0);
    Ok(TransferMatrix::new(
        e[0][0] + shift,
        e[0][1],
        e[1][0] + s * t * bc.phi.cos() + 0.25 * bc.b * t * t,
        e[1][1] + shift,
    ))
}

/// Flat equivalent of a curved problem with connected conditions.
pub fn transform_connected(curvature: Curvature, m: i64, a: f64, bc: &ConnectedBc) -> Result<TransformedProblem> {
    curved_only(curvature)?;
    TransverseProblem::new(curvature, m, a)?;
    Ok(TransformedProblem {
        curvature,
        m,
        a,
        operator: Arc::new(TransverseOperator::transformed(curvature, m, a)?),
        effective_bc: EffectiveBc::Transfer(transformed_transfer_matrix(curvature, a, bc)?),
    })
}

pub fn transform(problem: &TransverseProblem, bc: &BoundaryCondition) -> Result<TransformedProblem> {
    match bc {
        BoundaryCondition::Separated(s) => transform_separated(problem.curvature, problem.m, problem.a, s),
        BoundaryCondition::Connected(c) => transform_connected(problem.curvature, problem.m, problem.a, c),
    }
}

/// Box that should hold the lowest `n` levels of `problem` (with margin).
pub fn lowest_levels_box(problem: &TransverseProblem, bc: &BoundaryCondition, n: usize) -> SearchBox {
    let m2 = (problem.m * problem.m) as f64;
    // connected conditions produce pairs whose |Im λ| grows with the level
    let (beta2, im) = match bc {
        BoundaryCondition::Separated(s) => (s.beta * s.beta, 10.0),
        BoundaryCondition::Connected(c) => (c.c.abs() / c.b.max(1e-3), 30.0),
    };
    let k = (n as f64 + 1.5) * std::f64::consts::PI / (2.0 * problem.a);
    let curved = if problem.curvature == Curvature::Positive { 2.0 * m2 } else { m2 };
    SearchBox { re_min: -6.0 - 4.0 * beta2, re_max: curved + k * k + 6.0, im_min: -im, im_max: im }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub deviation: f64,
    pub route_a: Vec<Complex64>,
    pub route_b: Vec<Complex64>,
}

/// Lowest `n_eigs` eigenvalues by curved shooting (route A) and by the flat
/// transformed problem (route B), paired in sorted order.
pub fn verify_equivalence(
    problem: &TransverseProblem,
    bc: &BoundaryCondition,
    n_eigs: usize,
    opts: &SearchOptions,
) -> Result<EquivalenceReport> {
    curved_only(problem.curvature)?;
    let rect = lowest_levels_box(problem, bc, n_eigs);
    let opts = SearchOptions { diagnostics: false, ..*opts };
    let fa = CharFn::shooting(problem, bc, opts.newton_tol)?;
    let fb = transform(problem, bc)?.char_fn(opts.newton_tol)?;
    // both routes must agree on the count in exactly the same box
    let a = find_with(&fa, problem, bc, &rect, &opts)?.into_complete()?;
    let b = find_with(&fb, problem, bc, &a.search_box, &opts)?.into_complete()?;
    if a.zero_count_certificate != b.zero_count_certificate {
        return Err(Error::PairingFailure { expected: a.zero_count_certificate, found: b.zero_count_certificate });
    }
    let la = expand(&a.eigenvalues);
    let lb = expand(&b.eigenvalues);
    if la.len() < n_eigs {
        return Err(Error::PairingFailure { expected: n_eigs, found: la.len() });
    }
    let route_a: Vec<Complex64> = la.into_iter().take(n_eigs).collect();
    let (route_b, deviation) = pair_nearest(&route_a, &lb)?;
    Ok(EquivalenceReport { deviation, route_a, route_b })
}

fn expand(eigs: &[crate::spectrum::Eigenvalue]) -> Vec<Complex64> {
    eigs.iter().flat_map(|e| std::iter::repeat(e.lambda).take(e.multiplicity)).collect()
}

/// Relative defect between `f^{1/2} ψ` (curved eigenfunction) and the flat
/// eigenfunction at the same `λ`, after optimal scaling.
pub fn eigenfunction_map_defect(problem: &TransverseProblem, bc: &BoundaryCondition, lambda: Complex64) -> Result<f64> {
    let fa = CharFn::shooting(problem, bc, 1e-12)?;
    let fb = transform(problem, bc)?.char_fn(1e-12)?;
    let psi = eigenfunction_of(&fa, lambda, 2001)?;
    let phi = eigenfunction_of(&fb, lambda, 2001)?;
    let mapped: Vec<Complex64> = psi
        .x
        .iter()
        .zip(&psi.psi)
        .map(|(&x, p)| Ok(p * metric_factor(problem.curvature, x)?.sqrt()))
        .collect::<Result<_>>()?;
    let dot = |u: &[Complex64], v: &[Complex64]| u.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<Complex64>();
    let c = dot(&mapped, &phi.psi) / dot(&mapped, &mapped);
    let diff: Vec<Complex64> = phi.psi.iter().zip(&mapped).map(|(p, q)| p - c * q).collect();
    Ok((dot(&diff, &diff).re / dot(&phi.psi, &phi.psi).re).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn effective_couplings() {
        let sep0 = SeparatedBc::new(0.0, 0.0).unwrap();
        let p = transform_separated(Curvature::Positive, 0, FRAC_PI_4, &sep0).unwrap();
        match p.effective_bc {
            EffectiveBc::Separated(s) => assert!((s.beta - 0.5).abs() < 1e-15),
            _ => panic!("expected separated data"),
        }
        let n = transform_separated(Curvature::Negative, 0, FRAC_PI_4, &sep0).unwrap();
        match n.effective_bc {
            EffectiveBc::Separated(s) => assert!((s.beta + 0.327_897_1).abs() < 1e-7),
            _ => panic!("expected separated data"),
        }
        let tiny = effective_beta(Curvature::Positive, 1e-8, 0.0).unwrap();
        assert!(tiny.abs() < 1e-8);
        assert!((p.operator.potential(0.0) - (-0.5)).abs() < 1e-15);
        assert!(transform_separated(Curvature::Zero, 0, 1.0, &sep0).is_err());
    }

    #[test]
    fn small_width_potential_is_nearly_constant() {
        let p = transform_separated(Curvature::Positive, 2, 1e-3, &SeparatedBc::new(0.0, 0.0).unwrap()).unwrap();
        for x in [-1e-3, 0.0, 5e-4] {
            assert!((p.operator.potential(x) - (4.0 - 0.5)).abs() < 1e-5);
        }
    }

    #[test]
    fn transformed_transfer_matrices() {
        let bc = ConnectedBc::new(0.01, 0.01, 0.0).unwrap();
        let s = 1.0001_f64.sqrt();
        let bp = transformed_transfer_matrix(Curvature::Positive, FRAC_PI_4, &bc).unwrap();
        assert!((bp.entries[0][1] - 0.01).norm() < 1e-15);
        assert!((bp.entries[0][0] - (s - 0.005)).norm() < 1e-15);
        let bm = transformed_transfer_matrix(Curvature::Negative, FRAC_PI_4, &bc).unwrap();
        assert!((bm.entries[0][0] - (s + 0.005 * FRAC_PI_4.tanh())).norm() < 1e-15);
        let b0 = transformed_transfer_matrix(Curvature::Positive, 0.0, &bc).unwrap();
        assert!(b0.max_abs_diff(&transfer_matrix(&bc).unwrap()) < 1e-15);
        // the lower-left entry picks up −√(1+bc)·t·cos φ + ¼ b t²
        let t = FRAC_PI_4.tan();
        assert!((bp.entries[1][0].re - (0.01 - s * t + 0.25 * 0.01 * t * t)).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn transformed_matrices_are_unimodular_and_pt(b in 1e-3..5.0f64, t in 1e-6..1.0f64, phi in -PI..PI, a in 0.05..1.5f64, positive: bool) {
            let c = -t / b + t * 3.0;
            let bc = ConnectedBc::new(b, c, phi).unwrap();
            let k = if positive { Curvature::Positive } else { Curvature::Negative };
            let m = transformed_transfer_matrix(k, a, &bc).unwrap();
            prop_assert!((m.det() - Complex64::new(1.0, 0.0)).norm() < 1e-12 * (1.0 + m.entries[1][0].norm() * b));
            // conj with φ → −φ reproduces the matrix
            let flipped = transformed_transfer_matrix(k, a, &ConnectedBc::new(b, c, crate::model::wrap_angle(-phi)).unwrap()).unwrap();
            prop_assert!(flipped.conj().max_abs_diff(&m) < 1e-12 * (1.0 + m.entries[1][0].norm()));
            prop_assert!(m.entries[0][1].im == 0.0 && m.entries[1][0].im == 0.0);
        }
    }

    #[test]
    fn equivalence_separated() {
        let opts = SearchOptions::default();
        let p = TransverseProblem::new(Curvature::Positive, 0, FRAC_PI_4).unwrap();
        let r = verify_equivalence(&p, &BoundaryCondition::separated(1.0, 0.0).unwrap(), 5, &opts).unwrap();
        assert!(r.deviation < 1e-7, "{r:?}");
        let p = TransverseProblem::new(Curvature::Negative, 2, FRAC_PI_4).unwrap();
        let r = verify_equivalence(&p, &BoundaryCondition::separated(0.5, 0.0).unwrap(), 5, &opts).unwrap();
        assert!(r.deviation < 1e-7, "{r:?}");
    }

    #[test]
    fn equivalence_connected() {
        let p = TransverseProblem::new(Curvature::Positive, 0, FRAC_PI_4).unwrap();
        let bc = BoundaryCondition::connected(0.01, 0.01, 1.0).unwrap();
        let r = verify_equivalence(&p, &bc, 4, &SearchOptions::default()).unwrap();
        assert!(r.deviation < 1e-7, "{r:?}");
    }

    #[test]
    fn eigenfunctions_correspond() {
        let p = TransverseProblem::new(Curvature::Negative, 1, FRAC_PI_4).unwrap();
        let bc = BoundaryCondition::separated(0.8, 0.2).unwrap();
        let r = verify_equivalence(&p, &bc, 2, &SearchOptions::default()).unwrap();
        for lambda in r.route_a {
            assert!(eigenfunction_map_defect(&p, &bc, lambda).unwrap() < 1e-7);
        }
    }
}
