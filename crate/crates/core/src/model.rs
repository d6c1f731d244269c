//! Problem definitions: curvature, transverse mode problems, PT-symmetric
//! boundary data and the closed-form coefficient functions of the
//! partial-wave operators
//!
//! ```text
//! H^m ψ = −ψ'' + g(x) ψ' + q(x) ψ,   x ∈ (−a, a)
//! ```
//!
//! with metric factor `f` solving `f'' + K f = 0`, `f(0) = 1`, `f'(0) = 0`,
//! drift `g = −f'/f` and centrifugal term `q = m² / f²`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-length of the strip along the reference geodesic. Only enters the
/// two-dimensional picture (mode index `m` is the Fourier index on it).
pub const STRIP_HALF_LENGTH: f64 = PI;

/// Sign of the constant Gauss curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Curvature {
    /// K = −1, pseudosphere.
    Negative,
    /// K = 0, cylinder.
    Zero,
    /// K = +1, sphere.
    Positive,
}

impl Curvature {
    pub const ALL: [Curvature; 3] = [Curvature::Negative, Curvature::Zero, Curvature::Positive];

    pub fn value(self) -> f64 {
        match self {
            Curvature::Negative => -1.0,
            Curvature::Zero => 0.0,
            Curvature::Positive => 1.0,
        }
    }

    pub fn from_value(k: i32) -> Result<Self> {
        match k {
            -1 => Ok(Curvature::Negative),
            0 => Ok(Curvature::Zero),
            1 => Ok(Curvature::Positive),
            other => Err(Error::InvalidParameter(format!(
                "curvature must be -1, 0 or +1, got {other}"
            ))),
        }
    }

    pub fn is_curved(self) -> bool {
        self != Curvature::Zero
    }

    fn check_domain(self, x: f64) -> Result<()> {
        if !x.is_finite() || (self == Curvature::Positive && x.abs() >= FRAC_PI_2) {
            return Err(Error::Domain { curvature: self, x });
        }
        Ok(())
    }
}

/// One partial-wave operator `H^m` on `(−a, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseProblem {
    pub curvature: Curvature,
    pub m: i64,
    pub a: f64,
}

impl TransverseProblem {
    pub fn new(curvature: Curvature, m: i64, a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("half-width a must be positive, got {a}")));
        }
        if curvature == Curvature::Positive && a >= FRAC_PI_2 {
            return Err(Error::InvalidParameter(format!(
                "positive curvature requires a < pi/2, got a = {a}"
            )));
        }
        Ok(Self { curvature, m, a })
    }

    pub fn with_mode(&self, m: i64) -> Self {
        Self { m, ..*self }
    }

    /// Density of the transverse measure dν = f(x) dx.
    pub fn weight(&self, x: f64) -> f64 {
        metric_factor_unchecked(self.curvature, x)
    }
}

/// Separated Robin-type data: `ψ'(±a) + (iα ± β) ψ(±a) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatedBc {
    pub alpha: f64,
    pub beta: f64,
}

impl SeparatedBc {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha and beta must be finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Coefficient `iα ± β` multiplying `ψ(±a)`.
    pub fn coupling(&self, right: bool) -> Complex64 {
        let sign = if right { 1.0 } else { -1.0 };
        Complex64::new(sign * self.beta, self.alpha)
    }
}

/// Connected data `Ψ(a) = B Ψ(−a)` with `Ψ = (ψ, ψ')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectedBc {
    pub b: f64,
    pub c: f64,
    pub phi: f64,
}

impl ConnectedBc {
    pub fn new(b: f64, c: f64, phi: f64) -> Result<Self> {
        if !(b.is_finite() && c.is_finite() && phi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "b, c, phi must be finite, got ({b}, {c}, {phi})"
            )));
        }
        if b <= 0.0 {
            return Err(Error::ConstraintViolation(format!("b must be positive, got {b}")));
        }
        if 1.0 + b * c < 0.0 {
            return Err(Error::ConstraintViolation(format!(
                "1 + b c must be non-negative, got {}",
                1.0 + b * c
            )));
        }
        if !(-PI..PI).contains(&phi) {
            return Err(Error::ConstraintViolation(format!("phi must lie in [-pi, pi), got {phi}")));
        }
        Ok(Self { b, c, phi })
    }

    /// `√(1 + b c)`.
    pub fn root(&self) -> f64 {
        (1.0 + self.b * self.c).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    Separated(SeparatedBc),
    Connected(ConnectedBc),
}

impl BoundaryCondition {
    pub fn separated(alpha: f64, beta: f64) -> Result<Self> {
        SeparatedBc::new(alpha, beta).map(Self::Separated)
    }

    pub fn connected(b: f64, c: f64, phi: f64) -> Result<Self> {
        ConnectedBc::new(b, c, phi).map(Self::Connected)
    }

    /// Boundary data of the adjoint operator: `α → −α`, resp. `φ → −φ`.
    pub fn adjoint(&self) -> Self {
        match *self {
            Self::Separated(bc) => Self::Separated(SeparatedBc { alpha: -bc.alpha, ..bc }),
            Self::Connected(bc) => Self::Connected(ConnectedBc { phi: wrap_angle(-bc.phi), ..bc }),
        }
    }
}

/// Maps an angle into `[−π, π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Boundary data in the form consumed by the shooting and determinant code:
/// either Robin couplings `ψ'(±a) + κ_± ψ(±a) = 0` or a transfer matrix
/// `Ψ(a) = B Ψ(−a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryData {
    Robin { left: Complex64, right: Complex64 },
    Transfer(TransferMatrix),
}

impl BoundaryData {
    pub fn from_separated(bc: &SeparatedBc) -> Self {
        BoundaryData::Robin { left: bc.coupling(false), right: bc.coupling(true) }
    }

    pub fn from_condition(bc: &BoundaryCondition) -> Result<Self> {
        Ok(match bc {
            BoundaryCondition::Separated(s) => Self::from_separated(s),
            BoundaryCondition::Connected(c) => BoundaryData::Transfer(transfer_matrix(c)?),
        })
    }
}

/// 2×2 complex matrix relating `Ψ(a)` to `Ψ(−a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub entries: [[Complex64; 2]; 2],
}

impl TransferMatrix {
    pub fn new(b11: Complex64, b12: Complex64, b21: Complex64, b22: Complex64) -> Self {
        Self { entries: [[b11, b12], [b21, b22]] }
    }

    pub fn det(&self) -> Complex64 {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }

    /// `Ψ ↦ B Ψ`.
    pub fn apply(&self, value: Complex64, derivative: Complex64) -> (Complex64, Complex64) {
        let e = &self.entries;
        (e[0][0] * value + e[0][1] * derivative, e[1][0] * value + e[1][1] * derivative)
    }

    /// PT constraint: `B₂₂ = conj(B₁₁)` and real off-diagonal entries.
    pub fn pt_defect(&self) -> f64 {
        let e = &self.entries;
        (e[1][1] - e[0][0].conj())
            .norm()
            .max(e[0][1].im.abs())
            .max(e[1][0].im.abs())
    }

    pub fn conj(&self) -> Self {
        let e = &self.entries;
        Self::new(e[0][0].conj(), e[0][1].conj(), e[1][0].conj(), e[1][1].conj())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.entries[i][j] - other.entries[i][j]).norm());
            }
        }
        worst
    }
}

pub(crate) fn metric_factor_unchecked(curvature: Curvature, x: f64) -> f64 {
    match curvature {
        Curvature::Negative => x.cosh(),
        Curvature::Zero => 1.0,
        Curvature::Positive => x.cos(),
    }
}

pub(crate) fn drift_unchecked(curvature: Curvature, x: f64) -> f64 {
    match curvature {
        Curvature::Negative => -x.tanh(),
        Curvature::Zero => 0.0,
        Curvature::Positive => x.tan(),
    }
}

/// Metric factor `f_(K)(x)`: `cosh x`, `1` or `cos x`.
pub fn metric_factor(curvature: Curvature, x: f64) -> Result<f64> {
    curvature.check_domain(x)?;
    Ok(metric_factor_unchecked(curvature, x))
}

/// Self-test of the metric factor against the Jacobi equation `f'' + K f = 0`
/// with geodesic initial data. Second derivatives are taken by central
/// differences with step `h`; the result is
/// `max |f'' + K f| + |f(0) − 1| + |f'(0)|`.
pub fn jacobi_check(curvature: Curvature, grid: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be positive, got {h}")));
    }
    let f = |x: f64| metric_factor(curvature, x);
    let k = curvature.value();
    let mut worst = 0.0_f64;
    for &x in grid {
        let second = (f(x - h)? - 2.0 * f(x)? + f(x + h)?) / (h * h);
        worst = worst.max((second + k * f(x)?).abs());
    }
    let at_zero = (f(0.0)? - 1.0).abs();
    let slope_zero = ((f(h)? - f(-h)?) / (2.0 * h)).abs();
    Ok(worst + at_zero + slope_zero)
}

/// First-order coefficient `g` of `H^m = −∂² + g ∂ + q`.
pub fn drift_coefficient(curvature: Curvature, x: f64) -> Result<f64> {
    curvature.check_domain(x)?;
    Ok(drift_unchecked(curvature, x))
}

/// Zeroth-order coefficient `q = m²/f²` (`m²` on the cylinder).
pub fn centrifugal_potential(problem: &TransverseProblem, x: f64) -> Result<f64> {
    let f = metric_factor(problem.curvature, x)?;
    let m2 = (problem.m * problem.m) as f64;
    Ok(m2 / (f * f))
}

pub(crate) fn transformed_potential_unchecked(curvature: Curvature, m: i64, x: f64) -> f64 {
    let m2 = (m * m) as f64;
    match curvature {
        Curvature::Positive => {
            let c = x.cos();
            (8.0 * m2 - 3.0 - (2.0 * x).cos()) / (8.0 * c * c)
        }
        Curvature::Negative => {
            let c = x.cosh();
            (8.0 * m2 + 3.0 + (2.0 * x).cosh()) / (8.0 * c * c)
        }
        Curvature::Zero => m2,
    }
}

/// Potential `V^m_(±1)` produced by the half-density conjugation
/// `ψ ↦ f^{1/2} ψ` that removes the drift term.
pub fn transformed_potential(curvature: Curvature, m: i64, x: f64) -> Result<f64> {
    if curvature == Curvature::Zero {
        return Err(Error::InvalidCurvature(curvature));
    }
    curvature.check_domain(x)?;
    Ok(transformed_potential_unchecked(curvature, m, x))
}

/// `B = [[√(1+bc) e^{iφ}, b], [c, √(1+bc) e^{−iφ}]]`.
pub fn transfer_matrix(bc: &ConnectedBc) -> Result<TransferMatrix> {
    let disc = 1.0 + bc.b * bc.c;
    if disc < 0.0 {
        return Err(Error::ConstraintViolation(format!("1 + b c = {disc} < 0")));
    }
    let s = disc.sqrt();
    let phase = Complex64::from_polar(s, bc.phi);
    Ok(TransferMatrix::new(
        phase,
        Complex64::new(bc.b, 0.0),
        Complex64::new(bc.c, 0.0),
        phase.conj(),
    ))
}

/// Maps an eigenvalue of the unit-curvature problem (with half-width
/// `√|K| a`) to the eigenvalue of the problem with curvature `K`.
pub fn scale_eigenvalue(lambda_unit: Complex64, k_general: f64) -> Result<Complex64> {
    if k_general == 0.0 || !k_general.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scaling needs a finite non-zero curvature, got {k_general}"
        )));
    }
    Ok(lambda_unit * k_general.abs())
}

/// Half-width of the unit-curvature problem equivalent to half-width `a`
/// at curvature `K`.
pub fn scaled_half_width(a: f64, k_general: f64) -> f64 {
    k_general.abs().sqrt() * a
}
