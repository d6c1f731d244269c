//! Certified eigenvalue search in rectangles of the complex plane, plus
//! eigenfunction-level diagnostics and the mode-sum assembly of the strip
//! spectrum.

mod contour;
mod diagnostics;
mod search;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use contour::{count_zeros, ContourSettings, SearchBox, ZeroCount};
pub use diagnostics::{
    biorthogonality_check, fit_sector, numerical_range_check, pt_pair_check, simplicity_test, SectorConstants,
    SectorReport, PAIRING_TOL,
};
pub use search::{find_eigenvalues, find_with, find_zeros, sort_lambdas, Eigenvalue, RootFailure, SearchOptions, SpectrumResult};

pub(crate) use diagnostics::eigenfunction_of;

use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, Curvature, TransverseProblem};

/// Greedy nearest-neighbour matching of `wanted` into `pool`. Returns the
/// matched values in the order of `wanted` and the largest distance.
pub fn pair_nearest(wanted: &[Complex64], pool: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    if pool.len() < wanted.len() {
        return Err(Error::PairingFailure { expected: wanted.len(), found: pool.len() });
    }
    let mut used = vec![false; pool.len()];
    let mut out = Vec::with_capacity(wanted.len());
    let mut worst = 0.0_f64;
    for w in wanted {
        let (j, d) = pool
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, p)| (j, (p - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("pool has unused entries");
        used[j] = true;
        out.push(pool[j]);
        worst = worst.max(d);
    }
    Ok((out, worst))
}

/// One eigenvalue of the strip operator, tagged by its partial wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEigenvalue {
    /// `|m|`; modes `m` and `−m` coincide.
    pub m: i64,
    /// 1 for `m = 0`, 2 otherwise.
    pub mode_multiplicity: usize,
    pub eigenvalue: Eigenvalue,
}

/// Union over `m ∈ [−m_max, m_max]` of the mode spectra. The box for mode
/// `m` is `per_mode_box` shifted right by `m²`. Zero curvature solves mode
/// zero once and shifts; curved problems solve each `|m|` on its own.
pub fn assemble_2d_spectrum(
    curvature: Curvature,
    a: f64,
    bc: &BoundaryCondition,
    m_max: i64,
    per_mode_box: &SearchBox,
    opts: &SearchOptions,
) -> Result<Vec<ModeEigenvalue>> {
    if m_max < 0 {
        return Err(Error::InvalidParameter(format!("m_max must be non-negative, got {m_max}")));
    }
    let base = TransverseProblem::new(curvature, 0, a)?;
    let tag = |m: i64, e: Eigenvalue| ModeEigenvalue { m, mode_multiplicity: if m == 0 { 1 } else { 2 }, eigenvalue: e };
    let per_mode: Vec<Vec<ModeEigenvalue>> = if curvature == Curvature::Zero {
        let zero = find_eigenvalues(&base, bc, per_mode_box, opts)?.into_complete()?;
        (0..=m_max)
            .map(|m| {
                let shift = (m * m) as f64;
                zero.eigenvalues
                    .iter()
                    .map(|e| tag(m, Eigenvalue { lambda: e.lambda + shift, mode: m, ..*e }))
                    .collect()
            })
            .collect()
    } else {
        (0..=m_max)
            .into_par_iter()
            .map(|m| {
                let rect = per_mode_box.shifted((m * m) as f64);
                let r = find_eigenvalues(&base.with_mode(m), bc, &rect, opts)?.into_complete()?;
                Ok(r.eigenvalues.into_iter().map(|e| tag(m, e)).collect())
            })
            .collect::<Result<_>>()?
    };
    Ok(per_mode.into_iter().flatten().collect())
}
