//! Shooting for the transverse equation `−ψ'' + g ψ' + q ψ = λ ψ` on `[−a, a]`.
//!
//! The integrator is classical fourth-order Runge–Kutta on a uniform grid with
//! step doubling: the grid is refined by factors of two until successive
//! Richardson-extrapolated endpoint values agree to the requested tolerance.
//! Uniform grids keep `D(λ)` a smooth function of `λ` between refinements and
//! let coefficient tables be cached per grid size.
//!
//! Optionally the first and second `λ`-derivatives of both fundamental
//! solutions are carried along (variational equations), which gives exact
//! Newton derivatives for the characteristic functions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    drift_unchecked, metric_factor_unchecked, transformed_potential_unchecked, BoundaryData, Curvature,
    TransverseProblem,
};

/// Default absolute/relative tolerance on endpoint values.
pub const DEFAULT_TOL: f64 = 1e-10;

const MIN_STEPS: usize = 8;
const MAX_STEPS: usize = 1 << 20;

type CoefFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coefficients of one transverse operator together with its measure density.
pub struct TransverseOperator {
    a: f64,
    drift: CoefFn,
    potential: CoefFn,
    weight: CoefFn,
    drift_free: bool,
    /// Rough bound `max |g| + √max|q|`, used to pick the initial grid.
    stiffness: f64,
    max_potential: f64,
    tables: Mutex<HashMap<usize, Arc<Vec<[f64; 2]>>>>,
}

impl std::fmt::Debug for TransverseOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransverseOperator")
            .field("a", &self.a)
            .field("drift_free", &self.drift_free)
            .field("stiffness", &self.stiffness)
            .finish()
    }
}

impl TransverseOperator {
    /// General operator from callables. `drift = None` means `g ≡ 0`.
    pub fn new(
        a: f64,
        drift: Option<CoefFn>,
        potential: CoefFn,
        weight: CoefFn,
    ) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("half-width a must be positive, got {a}")));
        }
        let drift_free = drift.is_none();
        let drift = drift.unwrap_or_else(|| Arc::new(|_| 0.0));
        let (mut gmax, mut qmax) = (0.0_f64, 0.0_f64);
        for i in 0..=256 {
            let x = -a + 2.0 * a * i as f64 / 256.0;
            let (g, q) = (drift(x), potential(x));
            if !(g.is_finite() && q.is_finite()) {
                return Err(Error::InvalidParameter(format!("coefficients are not finite at x = {x}")));
            }
            gmax = gmax.max(g.abs());
            qmax = qmax.max(q.abs());
        }
        Ok(Self {
            a,
            drift,
            potential,
            weight,
            drift_free,
            stiffness: gmax + qmax.sqrt(),
            max_potential: qmax,
            tables: Mutex::new(HashMap::new()),
        })
    }

    /// `H^m` of the curved strip: drift `g = −f'/f`, potential `m²/f²`, measure `f dx`.
    pub fn curved(problem: &TransverseProblem) -> Self {
        let k = problem.curvature;
        let m2 = (problem.m * problem.m) as f64;
        let drift: Option<CoefFn> = match k {
            Curvature::Zero => None,
            _ => Some(Arc::new(move |x| drift_unchecked(k, x))),
        };
        Self::new(
            problem.a,
            drift,
            Arc::new(move |x| {
                let f = metric_factor_unchecked(k, x);
                m2 / (f * f)
            }),
            Arc::new(move |x| metric_factor_unchecked(k, x)),
        )
        .expect("validated problem has finite coefficients")
    }

    /// Drift-free operator `−∂² + V^m_(K)` in the flat measure.
    pub fn transformed(curvature: Curvature, m: i64, a: f64) -> Result<Self> {
        if curvature == Curvature::Zero {
            return Err(Error::InvalidCurvature(curvature));
        }
        Self::new(
            a,
            None,
            Arc::new(move |x| transformed_potential_unchecked(curvature, m, x)),
            Arc::new(|_| 1.0),
        )
    }

    pub fn half_width(&self) -> f64 {
        self.a
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn potential(&self, x: f64) -> f64 {
        (self.potential)(x)
    }

    pub fn weight(&self, x: f64) -> f64 {
        (self.weight)(x)
    }

    pub fn is_drift_free(&self) -> bool {
        self.drift_free
    }

    /// `(g, q)` on the half-step grid `x_j = −a + j h/2`, `j = 0..=2n`.
    fn table(&self, n: usize) -> Arc<Vec<[f64; 2]>> {
        let mut cache = self.tables.lock().expect("coefficient cache poisoned");
        if let Some(t) = cache.get(&n) {
            return Arc::clone(t);
        }
        let half = self.a / n as f64;
        let t: Vec<[f64; 2]> = (0..=2 * n)
            .map(|j| {
                let x = if j == 2 * n { self.a } else { -self.a + j as f64 * half };
                [(self.drift)(x), (self.potential)(x)]
            })
            .collect();
        let t = Arc::new(t);
        if cache.len() > 32 {
            cache.clear();
        }
        cache.insert(n, Arc::clone(&t));
        t
    }

    fn initial_steps(&self, lambda: Complex64, tol: f64) -> usize {
        let k = (lambda.norm() + self.max_potential).sqrt() + self.stiffness + 1.0;
        let phase = 2.0 * self.a * k;
        let omega = (720.0 * tol / phase).powf(0.2).clamp(1e-4, 0.5);
        // finest of the three initial runs uses 4n steps
        let n = (phase / omega / 4.0).ceil() as usize;
        n.clamp(MIN_STEPS, MAX_STEPS / 4)
    }
}

/// Values `(ψ, ψ')` of one solution at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointTrace {
    pub at_left: (Complex64, Complex64),
    pub at_right: (Complex64, Complex64),
}

/// Two solutions with `Ψ₁(−a) = (1, 0)`, `Ψ₂(−a) = (0, 1)`, and optionally
/// their first and second `λ`-derivatives (which vanish at `−a`).
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSystem {
    pub lambda: Complex64,
    pub psi1: EndpointTrace,
    pub psi2: EndpointTrace,
    /// `∂_λ` of (ψ₁, ψ₂).
    pub d_lambda: Option<[EndpointTrace; 2]>,
    /// `∂²_λ` of (ψ₁, ψ₂).
    pub d2_lambda: Option<[EndpointTrace; 2]>,
    pub step_count: usize,
    pub est_error: f64,
}

impl FundamentalSystem {
    /// `W(a) = ψ₁ψ₂' − ψ₂ψ₁'` at the right end (`W(−a) = 1`).
    pub fn wronskian(&self) -> Complex64 {
        let (p1, d1) = self.psi1.at_right;
        let (p2, d2) = self.psi2.at_right;
        p1 * d2 - p2 * d1
    }

    /// Column `[ψ(a), ψ'(a)]` of solution `i ∈ {0, 1}` at derivative order `order`.
    pub fn right(&self, solution: usize, order: usize) -> (Complex64, Complex64) {
        let traces = match order {
            0 => [self.psi1, self.psi2],
            1 => self.d_lambda.expect("first derivatives were not integrated"),
            _ => self.d2_lambda.expect("second derivatives were not integrated"),
        };
        traces[solution].at_right
    }

    pub fn conj(&self) -> Self {
        let c = |t: EndpointTrace| EndpointTrace {
            at_left: (t.at_left.0.conj(), t.at_left.1.conj()),
            at_right: (t.at_right.0.conj(), t.at_right.1.conj()),
        };
        Self {
            lambda: self.lambda.conj(),
            psi1: c(self.psi1),
            psi2: c(self.psi2),
            d_lambda: self.d_lambda.map(|d| [c(d[0]), c(d[1])]),
            d2_lambda: self.d2_lambda.map(|d| [c(d[0]), c(d[1])]),
            step_count: self.step_count,
            est_error: self.est_error,
        }
    }
}

/// State of `chains` linear solution chains. Chain `s·levels + l` holds the
/// `l`-th `λ`-derivative of solution `s` as `(y, y')`.
#[derive(Clone, Copy)]
struct State {
    y: [Complex64; 12],
    len: usize,
}

struct Chains {
    solutions: usize,
    levels: usize,
}

impl Chains {
    fn width(&self) -> usize {
        2 * self.solutions * self.levels
    }

    #[inline]
    fn rhs(&self, g: f64, q: f64, lambda: Complex64, y: &[Complex64; 12], out: &mut [Complex64; 12]) {
        let qm = Complex64::new(q, 0.0) - lambda;
        for s in 0..self.solutions {
            for l in 0..self.levels {
                let i = 2 * (s * self.levels + l);
                out[i] = y[i + 1];
                let mut acc = y[i + 1] * g + qm * y[i];
                if l > 0 {
                    acc -= y[i - 2] * l as f64;
                }
                out[i + 1] = acc;
            }
        }
    }
}

fn rk4_run(
    op: &TransverseOperator,
    chains: &Chains,
    lambda: Complex64,
    init: &State,
    n: usize,
    mut record: Option<(&mut Vec<State>, usize)>,
) -> State {
    let table = op.table(n);
    let h = 2.0 * op.a / n as f64;
    let w = chains.width();
    let mut y = *init;
    let (mut k1, mut k2, mut k3, mut k4) = ([Complex64::default(); 12], [Complex64::default(); 12], [Complex64::default(); 12], [Complex64::default(); 12]);
    let mut tmp = [Complex64::default(); 12];
    if let Some((rec, _)) = record.as_mut() {
        rec.push(y);
    }
    for step in 0..n {
        let [g0, q0] = table[2 * step];
        let [g1, q1] = table[2 * step + 1];
        let [g2, q2] = table[2 * step + 2];
        chains.rhs(g0, q0, lambda, &y.y, &mut k1);
        for i in 0..w {
            tmp[i] = y.y[i] + k1[i] * (0.5 * h);
        }
        chains.rhs(g1, q1, lambda, &tmp, &mut k2);
        for i in 0..w {
            tmp[i] = y.y[i] + k2[i] * (0.5 * h);
        }
        chains.rhs(g1, q1, lambda, &tmp, &mut k3);
        for i in 0..w {
            tmp[i] = y.y[i] + k3[i] * h;
        }
        chains.rhs(g2, q2, lambda, &tmp, &mut k4);
        for i in 0..w {
            y.y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        if let Some((rec, stride)) = record.as_mut() {
            if (step + 1) % *stride == 0 {
                rec.push(y);
            }
        }
    }
    y
}

fn extrapolate(coarse: &State, fine: &State) -> State {
    let mut out = *fine;
    for i in 0..fine.len {
        out.y[i] = fine.y[i] + (fine.y[i] - coarse.y[i]) / 15.0;
    }
    out
}

/// Error between two extrapolants, scaled per chain by `max(1, |y|)`.
fn scaled_difference(a: &State, b: &State) -> f64 {
    let mut worst = 0.0_f64;
    for chain in 0..a.len / 2 {
        let (i, j) = (2 * chain, 2 * chain + 1);
        let scale = 1.0_f64.max(b.y[i].norm()).max(b.y[j].norm());
        let diff = (a.y[i] - b.y[i]).norm().max((a.y[j] - b.y[j]).norm());
        worst = worst.max(diff / scale);
    }
    worst
}

fn fundamental_init(levels: usize) -> (Chains, State) {
    let chains = Chains { solutions: 2, levels };
    let mut s = State { y: [Complex64::default(); 12], len: chains.width() };
    s.y[0] = Complex64::new(1.0, 0.0);
    s.y[2 * levels + 1] = Complex64::new(1.0, 0.0);
    (chains, s)
}

/// Plain fixed-grid RK4 with `n` steps, no error control. Exposed for
/// convergence studies.
pub fn integrate_fixed(op: &TransverseOperator, lambda: Complex64, n: usize) -> FundamentalSystem {
    let (chains, init) = fundamental_init(1);
    let end = rk4_run(op, &chains, lambda, &init, n.max(1), None);
    assemble(lambda, &end, 1, n, 0.0)
}

fn assemble(lambda: Complex64, end: &State, levels: usize, steps: usize, est: f64) -> FundamentalSystem {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let trace = |s: usize, l: usize| {
        let i = 2 * (s * levels + l);
        let at_left = match (s, l) {
            (0, 0) => (one, zero),
            (1, 0) => (zero, one),
            _ => (zero, zero),
        };
        EndpointTrace { at_left, at_right: (end.y[i], end.y[i + 1]) }
    };
    FundamentalSystem {
        lambda,
        psi1: trace(0, 0),
        psi2: trace(1, 0),
        d_lambda: (levels > 1).then(|| [trace(0, 1), trace(1, 1)]),
        d2_lambda: (levels > 2).then(|| [trace(0, 2), trace(1, 2)]),
        step_count: steps,
        est_error: est,
    }
}

/// Integrates the fundamental system at `λ` with endpoint error `≤ tol`
/// (absolute for values of modulus below one, relative above).
/// `derivatives ∈ {0, 1, 2}` selects how many `λ`-derivatives to carry.
pub fn integrate(
    op: &TransverseOperator,
    lambda: Complex64,
    tol: f64,
    derivatives: usize,
) -> Result<FundamentalSystem> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lambda}")));
    }
    let levels = derivatives.min(2) + 1;
    let (chains, init) = fundamental_init(levels);
    let (end, n, est) = refine_endpoint(op, &chains, lambda, &init, tol)?;
    Ok(assemble(lambda, &end, levels, n, est))
}

fn refine_endpoint(
    op: &TransverseOperator,
    chains: &Chains,
    lambda: Complex64,
    init: &State,
    tol: f64,
) -> Result<(State, usize, f64)> {
    let mut n = op.initial_steps(lambda, tol);
    let mut coarse = rk4_run(op, chains, lambda, init, n, None);
    let mut mid = rk4_run(op, chains, lambda, init, 2 * n, None);
    let mut prev = extrapolate(&coarse, &mid);
    loop {
        let fine = rk4_run(op, chains, lambda, init, 4 * n, None);
        let next = extrapolate(&mid, &fine);
        let est = scaled_difference(&prev, &next);
        if !est.is_finite() {
            return Err(Error::StepUnderflow { lambda, steps: 4 * n });
        }
        if est <= tol {
            return Ok((next, 4 * n, est));
        }
        if 8 * n > MAX_STEPS {
            return Err(Error::StepUnderflow { lambda, steps: 4 * n });
        }
        coarse = mid;
        mid = fine;
        prev = extrapolate(&coarse, &mid);
        n *= 2;
    }
}

/// Uniformly sampled solution on `[−a, a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSolution {
    pub x: Vec<f64>,
    pub psi: Vec<Complex64>,
    pub dpsi: Vec<Complex64>,
}

/// Integrates one solution from `(ψ(−a), ψ'(−a)) = init` and returns
/// `n_points` equally spaced samples (including both ends).
pub fn trace_solution(
    op: &TransverseOperator,
    lambda: Complex64,
    init: (Complex64, Complex64),
    n_points: usize,
    tol: f64,
) -> Result<SampledSolution> {
    if n_points < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 sample points, got {n_points}")));
    }
    let intervals = n_points - 1;
    // grid size from the endpoint error control, rounded up to a multiple of the sample spacing
    let fs = integrate(op, lambda, tol, 0)?;
    let mut n = fs.step_count.div_ceil(intervals) * intervals;
    if n == 0 {
        n = intervals;
    }
    let chains = Chains { solutions: 1, levels: 1 };
    let mut state = State { y: [Complex64::default(); 12], len: 2 };
    state.y[0] = init.0;
    state.y[1] = init.1;
    let mut coarse = Vec::with_capacity(n_points);
    let mut fine = Vec::with_capacity(n_points);
    rk4_run(op, &chains, lambda, &state, n, Some((&mut coarse, n / intervals)));
    rk4_run(op, &chains, lambda, &state, 2 * n, Some((&mut fine, 2 * n / intervals)));
    let a = op.a;
    let mut out = SampledSolution {
        x: Vec::with_capacity(n_points),
        psi: Vec::with_capacity(n_points),
        dpsi: Vec::with_capacity(n_points),
    };
    for (i, (c, f)) in coarse.iter().zip(&fine).enumerate() {
        let e = extrapolate(c, f);
        out.x.push(if i == intervals { a } else { -a + 2.0 * a * i as f64 / intervals as f64 });
        out.psi.push(e.y[0]);
        out.dpsi.push(e.y[1]);
    }
    Ok(out)
}

/// Composite Simpson rule on an odd number of equally spaced samples.
pub fn simpson(values: &[Complex64], h: f64) -> Complex64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson rule needs an odd number (>= 3) of samples");
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += v * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * (h / 3.0)
}

/// Normalized eigenfunction sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    pub lambda: Complex64,
    pub x: Vec<f64>,
    pub psi: Vec<Complex64>,
    pub dpsi: Vec<Complex64>,
    /// Measure density `f(x_i)` at the samples.
    pub weight: Vec<f64>,
    /// Relative mismatch of the right boundary condition.
    pub boundary_residual: f64,
}

impl Eigenfunction {
    fn step(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// `∫ u v dν` of two sampled functions on this grid (no conjugation).
    pub fn pairing(&self, other: &Eigenfunction) -> Complex64 {
        let vals: Vec<Complex64> =
            self.psi.iter().zip(&other.psi).zip(&self.weight).map(|((u, v), w)| u * v * *w).collect();
        simpson(&vals, self.step())
    }

    /// `∫ ψ² dν`.
    pub fn square_integral(&self) -> Complex64 {
        self.pairing(self)
    }

    /// `∫ |ψ|² dν`.
    pub fn norm_sqr(&self) -> f64 {
        let vals: Vec<Complex64> =
            self.psi.iter().zip(&self.weight).map(|(u, w)| Complex64::new(u.norm_sqr() * w, 0.0)).collect();
        simpson(&vals, self.step()).re
    }

    /// `(PT ψ)(x) = conj ψ(−x)` on the same (symmetric) grid.
    pub fn pt(&self) -> Vec<Complex64> {
        self.psi.iter().rev().map(|z| z.conj()).collect()
    }
}

/// Initial data `(ψ(−a), ψ'(−a))` of a non-trivial solution obeying the left
/// condition (Robin), or the null vector of `Ψ(a) − BΨ(−a)` (transfer).
fn boundary_seed(fs: &FundamentalSystem, boundary: &BoundaryData) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    match boundary {
        BoundaryData::Robin { left, .. } => (one, -left),
        BoundaryData::Transfer(b) => {
            let e = &b.entries;
            let (p1, d1) = fs.psi1.at_right;
            let (p2, d2) = fs.psi2.at_right;
            let m = [[p1 - e[0][0], p2 - e[0][1]], [d1 - e[1][0], d2 - e[1][1]]];
            // null vector from the row of larger norm
            let r0 = m[0][0].norm() + m[0][1].norm();
            let r1 = m[1][0].norm() + m[1][1].norm();
            let row = if r0 >= r1 { m[0] } else { m[1] };
            let v = (-row[1], row[0]);
            let s = (v.0.norm_sqr() + v.1.norm_sqr()).sqrt();
            if s == 0.0 {
                (one, Complex64::default())
            } else {
                (v.0 / s, v.1 / s)
            }
        }
    }
}

fn right_residual(boundary: &BoundaryData, left: (Complex64, Complex64), right: (Complex64, Complex64)) -> f64 {
    match boundary {
        BoundaryData::Robin { right: kappa, .. } => {
            let r = right.1 + kappa * right.0;
            r.norm() / ((1.0 + kappa.norm()) * right.0.norm().max(right.1.norm())).max(1e-300)
        }
        BoundaryData::Transfer(b) => {
            let (bv, bd) = b.apply(left.0, left.1);
            let r = (right.0 - bv).norm() + (right.1 - bd).norm();
            r / (right.0.norm() + right.1.norm() + bv.norm() + bd.norm()).max(1e-300)
        }
    }
}

/// Eigenfunction at an eigenvalue `λ`, normalized to `∫|ψ|² dν = 1`.
/// `n_points` must be odd (Simpson quadrature). Fails with
/// [`Error::NotAnEigenvalue`] when the right boundary condition is violated
/// by more than `residual_tol`.
pub fn eigenfunction_samples(
    op: &TransverseOperator,
    boundary: &BoundaryData,
    lambda: Complex64,
    n_points: usize,
    tol: f64,
    residual_tol: f64,
) -> Result<Eigenfunction> {
    if n_points < 3 || n_points % 2 == 0 {
        return Err(Error::InvalidParameter(format!("n_points must be odd and >= 3, got {n_points}")));
    }
    let fs = integrate(op, lambda, tol, 0)?;
    let seed = boundary_seed(&fs, boundary);
    let sol = trace_solution(op, lambda, seed, n_points, tol)?;
    let last = n_points - 1;
    let residual = right_residual(boundary, (sol.psi[0], sol.dpsi[0]), (sol.psi[last], sol.dpsi[last]));
    if !(residual <= residual_tol) {
        return Err(Error::NotAnEigenvalue { lambda, residual });
    }
    let weight: Vec<f64> = sol.x.iter().map(|&x| op.weight(x)).collect();
    let mut ef = Eigenfunction { lambda, x: sol.x, psi: sol.psi, dpsi: sol.dpsi, weight, boundary_residual: residual };
    let norm = ef.norm_sqr().sqrt();
    for (p, d) in ef.psi.iter_mut().zip(ef.dpsi.iter_mut()) {
        *p /= norm;
        *d /= norm;
    }
    Ok(ef)
}
