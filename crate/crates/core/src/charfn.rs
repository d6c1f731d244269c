//! Characteristic functions `D(λ)` whose zeros are the eigenvalues.
//!
//! Shooting routes build `D` from a [`FundamentalSystem`]. For zero curvature
//! the closed forms are also available, both in the wavenumber `k` and as
//! entire functions of `λ` scaled so that they coincide with the shooting
//! determinant exactly (`D_shoot = D_closed(k) / (−k)`).

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, BoundaryData, ConnectedBc, Curvature, SeparatedBc, TransverseProblem};
use crate::shoot::{integrate, FundamentalSystem, TransverseOperator, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    ShootingSeparated,
    ShootingConnected,
    ClosedFormK0Separated,
    ClosedFormK0Connected,
    TransformedShooting,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::ShootingSeparated => "shooting_separated",
            Route::ShootingConnected => "shooting_connected",
            Route::ClosedFormK0Separated => "closed_form_k0_separated",
            Route::ClosedFormK0Connected => "closed_form_k0_connected",
            Route::TransformedShooting => "transformed_shooting",
        }
    }
}

/// One evaluation of `D` and optionally its `λ`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharEval {
    pub lambda: Complex64,
    pub value: Complex64,
    pub route: Route,
    pub derivative: Option<Complex64>,
    pub second_derivative: Option<Complex64>,
    /// Error estimate inherited from the integrator (zero for closed forms).
    pub est_error: f64,
}

impl CharEval {
    /// `D / (1 + |λ|)`.
    pub fn normalized(&self) -> Complex64 {
        self.value / (1.0 + self.lambda.norm())
    }

    pub fn residual(&self) -> f64 {
        self.normalized().norm()
    }
}

/// `(k² − α² − β²) sin(2ka) − 2βk cos(2ka)`.
pub fn char_k0_separated_closed(bc: &SeparatedBc, a: f64, k: Complex64) -> Complex64 {
    let (s, c) = ((2.0 * a * k).sin(), (2.0 * a * k).cos());
    (k * k - bc.alpha * bc.alpha - bc.beta * bc.beta) * s - 2.0 * bc.beta * k * c
}

/// `−2k + 2k cos(2ak) √(1+bc) cos φ + (bk² − c) sin(2ak)`.
pub fn char_k0_connected_closed(bc: &ConnectedBc, a: f64, k: Complex64) -> Complex64 {
    let (s, c) = ((2.0 * a * k).sin(), (2.0 * a * k).cos());
    -2.0 * k + 2.0 * k * c * bc.root() * bc.phi.cos() + (bc.b * k * k - bc.c) * s
}

/// `C(z) = cos(2a√z)` and `S(z) = sin(2a√z)/√z` with two `z`-derivatives each.
fn trig_jets(a: f64, z: Complex64) -> ([Complex64; 3], [Complex64; 3]) {
    let w = 2.0 * a;
    if (z * w * w).norm() < 4.0 {
        // C = Σ (−1)ⁿ w²ⁿ zⁿ/(2n)!, S = Σ (−1)ⁿ w²ⁿ⁺¹ zⁿ/(2n+1)!
        let mut cc = [Complex64::default(); 3];
        let mut ss = [Complex64::default(); 3];
        let mut coef_c = 1.0_f64;
        let mut coef_s = w;
        for n in 0..40usize {
            let nf = n as f64;
            for d in 0..3usize {
                if n >= d {
                    let falling: f64 = (0..d).map(|j| nf - j as f64).product();
                    let pw = z.powu((n - d) as u32) * falling;
                    cc[d] += pw * coef_c;
                    ss[d] += pw * coef_s;
                }
            }
            coef_c *= -w * w / ((2.0 * nf + 1.0) * (2.0 * nf + 2.0));
            coef_s *= -w * w / ((2.0 * nf + 2.0) * (2.0 * nf + 3.0));
        }
        return (cc, ss);
    }
    let k = z.sqrt();
    let c0 = (w * k).cos();
    let s0 = (w * k).sin() / k;
    let c1 = -a * s0;
    let s1 = (a * c0 - 0.5 * s0) / z;
    let c2 = -a * s1;
    let s2 = (a * c1 - 1.5 * s1) / z;
    ([c0, c1, c2], [s0, s1, s2])
}

/// Determinant entries `D, D', D''` from a fundamental system.
pub fn determinant(fs: &FundamentalSystem, boundary: &BoundaryData, order: usize) -> [Complex64; 3] {
    let mut out = [Complex64::default(); 3];
    match boundary {
        BoundaryData::Robin { left, right } => {
            // rows: [ψᵢ'(a) + R ψᵢ(a)] and [L, 1] at −a; linear in the traces
            for (d, slot) in out.iter_mut().enumerate().take(order + 1) {
                let (p1, d1) = fs.right(0, d);
                let (p2, d2) = fs.right(1, d);
                *slot = (d1 + right * p1) - (d2 + right * p2) * left;
            }
        }
        BoundaryData::Transfer(b) => {
            let e = &b.entries;
            let m = |d: usize| {
                let (p1, d1) = fs.right(0, d);
                let (p2, d2) = fs.right(1, d);
                if d == 0 {
                    [[p1 - e[0][0], p2 - e[0][1]], [d1 - e[1][0], d2 - e[1][1]]]
                } else {
                    [[p1, p2], [d1, d2]]
                }
            };
            let m0 = m(0);
            out[0] = m0[0][0] * m0[1][1] - m0[0][1] * m0[1][0];
            if order >= 1 {
                let m1 = m(1);
                out[1] = m1[0][0] * m0[1][1] + m0[0][0] * m1[1][1] - m1[0][1] * m0[1][0] - m0[0][1] * m1[1][0];
                if order >= 2 {
                    let m2 = m(2);
                    out[2] = m2[0][0] * m0[1][1] + 2.0 * m1[0][0] * m1[1][1] + m0[0][0] * m2[1][1]
                        - m2[0][1] * m0[1][0]
                        - 2.0 * m1[0][1] * m1[1][0]
                        - m0[0][1] * m2[1][0];
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
enum Closed {
    Separated(SeparatedBc),
    Connected(ConnectedBc),
}

/// A characteristic function ready for evaluation anywhere in `ℂ`.
#[derive(Debug, Clone)]
pub struct CharFn {
    op: Arc<TransverseOperator>,
    boundary: BoundaryData,
    route: Route,
    closed: Option<(Closed, f64, f64)>,
    tol: f64,
}

impl CharFn {
    /// Shooting on the curved operator itself.
    pub fn shooting(problem: &TransverseProblem, bc: &BoundaryCondition, tol: f64) -> Result<Self> {
        let route = match bc {
            BoundaryCondition::Separated(_) => Route::ShootingSeparated,
            BoundaryCondition::Connected(_) => Route::ShootingConnected,
        };
        Ok(Self {
            op: Arc::new(TransverseOperator::curved(problem)),
            boundary: BoundaryData::from_condition(bc)?,
            route,
            closed: None,
            tol: check_tol(tol)?,
        })
    }

    /// Closed form, zero curvature only.
    pub fn closed_form(problem: &TransverseProblem, bc: &BoundaryCondition) -> Result<Self> {
        if problem.curvature != Curvature::Zero {
            return Err(Error::InvalidParameter("closed forms exist only for zero curvature".into()));
        }
        let (closed, route) = match bc {
            BoundaryCondition::Separated(s) => (Closed::Separated(*s), Route::ClosedFormK0Separated),
            BoundaryCondition::Connected(c) => (Closed::Connected(*c), Route::ClosedFormK0Connected),
        };
        let m2 = (problem.m * problem.m) as f64;
        Ok(Self {
            op: Arc::new(TransverseOperator::curved(problem)),
            boundary: BoundaryData::from_condition(bc)?,
            route,
            closed: Some((closed, problem.a, m2)),
            tol: DEFAULT_TOL,
        })
    }

    /// Closed form for zero curvature, shooting otherwise.
    pub fn preferred(problem: &TransverseProblem, bc: &BoundaryCondition, tol: f64) -> Result<Self> {
        if problem.curvature == Curvature::Zero {
            Ok(Self::closed_form(problem, bc)?.with_tol(tol))
        } else {
            Self::shooting(problem, bc, tol)
        }
    }

    /// Shooting on an arbitrary operator, e.g. a transformed flat problem.
    pub fn from_operator(op: Arc<TransverseOperator>, boundary: BoundaryData, route: Route, tol: f64) -> Result<Self> {
        Ok(Self { op, boundary, route, closed: None, tol: check_tol(tol)? })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        if tol > 0.0 {
            self.tol = tol;
        }
        self
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn operator(&self) -> &Arc<TransverseOperator> {
        &self.op
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    pub fn eval(&self, lambda: Complex64) -> Result<CharEval> {
        self.eval_order(lambda, 0, self.tol)
    }

    /// `D` and its first `order ≤ 2` derivatives, with integrator tolerance `tol`.
    pub fn eval_order(&self, lambda: Complex64, order: usize, tol: f64) -> Result<CharEval> {
        let order = order.min(2);
        let (vals, est) = match &self.closed {
            Some((closed, a, m2)) => {
                let z = lambda - m2;
                let ([c0, c1, c2], [s0, s1, s2]) = trig_jets(*a, z);
                let vals = match closed {
                    Closed::Separated(bc) => {
                        let ab = bc.alpha * bc.alpha + bc.beta * bc.beta;
                        let two_b = 2.0 * bc.beta;
                        [
                            -(z - ab) * s0 + two_b * c0,
                            -s0 - (z - ab) * s1 + two_b * c1,
                            -2.0 * s1 - (z - ab) * s2 + two_b * c2,
                        ]
                    }
                    Closed::Connected(bc) => {
                        let t = 2.0 * bc.root() * bc.phi.cos();
                        let (b, c) = (bc.b, bc.c);
                        [
                            2.0 - t * c0 + c * s0 - b * z * s0,
                            -t * c1 + c * s1 - b * s0 - b * z * s1,
                            -t * c2 + c * s2 - 2.0 * b * s1 - b * z * s2,
                        ]
                    }
                };
                (vals, 0.0)
            }
            None => {
                let fs = integrate(&self.op, lambda, tol, order)?;
                (determinant(&fs, &self.boundary, order), fs.est_error)
            }
        };
        for v in vals.iter().take(order + 1) {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("characteristic function is not finite at {lambda}")));
            }
        }
        Ok(CharEval {
            lambda,
            value: vals[0],
            route: self.route,
            derivative: (order >= 1).then_some(vals[1]),
            second_derivative: (order >= 2).then_some(vals[2]),
            est_error: est,
        })
    }
}

fn check_tol(tol: f64) -> Result<f64> {
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")))
    }
}

/// Shooting determinant for separated conditions at the default tolerance.
pub fn char_separated(problem: &TransverseProblem, bc: &SeparatedBc, lambda: Complex64) -> Result<CharEval> {
    CharFn::shooting(problem, &BoundaryCondition::Separated(*bc), DEFAULT_TOL)?.eval(lambda)
}

/// Shooting determinant for connected conditions at the default tolerance.
pub fn char_connected(problem: &TransverseProblem, bc: &ConnectedBc, lambda: Complex64) -> Result<CharEval> {
    CharFn::shooting(problem, &BoundaryCondition::Connected(*bc), DEFAULT_TOL)?.eval(lambda)
}
