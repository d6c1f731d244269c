use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::contour::{Contour, ContourSettings, SearchBox, ZeroCount};
use super::diagnostics::square_integral_of;
use crate::charfn::{CharFn, Route};
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, TransverseProblem};

/// A computed eigenvalue with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub lambda: Complex64,
    /// `|D(λ)| / (1 + |λ|)`.
    pub residual: f64,
    pub simple: bool,
    /// `∫ψ² dν` of the unit-normalized eigenfunction.
    pub square_integral: Complex64,
    /// Algebraic multiplicity from the winding count.
    pub multiplicity: usize,
    pub mode: i64,
    pub route: Route,
}

/// A region where refinement failed; siblings are unaffected.
#[derive(Debug, Clone, PartialEq)]
pub struct RootFailure {
    pub region: SearchBox,
    pub zeros: usize,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub problem: TransverseProblem,
    pub bc: BoundaryCondition,
    pub search_box: SearchBox,
    /// Sorted by `(Re λ, Im λ)`.
    pub eigenvalues: Vec<Eigenvalue>,
    pub zero_count_certificate: usize,
    pub failures: Vec<RootFailure>,
    pub evaluations: usize,
}

impl SpectrumResult {
    /// Number of eigenvalues counted with multiplicity.
    pub fn found(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.found() == self.zero_count_certificate
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|e| e.lambda).collect()
    }

    /// The first failure as an error, or the result itself.
    pub fn into_complete(self) -> Result<Self> {
        if let Some(f) = self.failures.first() {
            return Err(f.error.clone());
        }
        if self.found() != self.zero_count_certificate {
            return Err(Error::PairingFailure { expected: self.zero_count_certificate, found: self.found() });
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Acceptance threshold on the normalized residual.
    pub tol: f64,
    /// Integrator tolerance during Newton refinement.
    pub newton_tol: f64,
    pub contour: ContourSettings,
    pub max_newton: usize,
    /// Boxes below this relative diameter are not split further.
    pub min_box: f64,
    pub max_depth: usize,
    /// Quadrature points for eigenfunction diagnostics (odd).
    pub samples: usize,
    pub simplicity_threshold: f64,
    pub diagnostics: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            newton_tol: 1e-12,
            contour: ContourSettings::default(),
            max_newton: 60,
            min_box: 1e-3,
            max_depth: 60,
            samples: 4001,
            simplicity_threshold: 1e-6,
            diagnostics: true,
        }
    }
}

impl SearchOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

pub fn sort_lambdas(v: &mut [Complex64]) {
    v.sort_by(|a, b| cmp_complex(*a, *b));
}

pub(crate) fn cmp_complex(a: Complex64, b: Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

const CUTS: [f64; 4] = [0.5731, 0.4137, 0.6493, 0.3311];

struct Found {
    lambda: Complex64,
    residual: f64,
    multiplicity: usize,
}

struct Searcher<'a> {
    f: &'a CharFn,
    contour: Contour<'a>,
    opts: SearchOptions,
    found: Vec<Found>,
    failures: Vec<RootFailure>,
}

impl<'a> Searcher<'a> {
    /// Newton iteration on `D^{(order)}` with multiplicity factor `mult`.
    fn newton(&self, seed: Complex64, order: usize, mult: f64, region: &SearchBox) -> Result<Complex64> {
        let mut z = seed;
        let mut last_step = f64::INFINITY;
        let limit = region.diameter().max(1e-8);
        for _ in 0..self.opts.max_newton {
            let e = self.f.eval_order(z, order + 1, self.opts.newton_tol)?;
            let (g, dg) = match order {
                0 => (e.value, e.derivative.unwrap()),
                _ => (e.derivative.unwrap(), e.second_derivative.unwrap()),
            };
            if g == Complex64::default() {
                return Ok(z);
            }
            if dg.norm() == 0.0 {
                break;
            }
            let mut step = g / dg * mult;
            if step.norm() > 0.5 * limit {
                step *= 0.5 * limit / step.norm();
            }
            z -= step;
            if !region.contains_loose(z, 0.5) {
                break;
            }
            let s = step.norm();
            if s <= 1e-13 * (1.0 + z.norm()) || (s <= 1e-10 * (1.0 + z.norm()) && s >= 0.5 * last_step) {
                return Ok(z);
            }
            last_step = s;
        }
        Err(Error::NonConvergence { lambda: z, iterations: self.opts.max_newton })
    }

    fn residual(&self, z: Complex64) -> Result<f64> {
        Ok(self.f.eval_order(z, 0, self.opts.newton_tol)?.residual())
    }

    fn accept(&self, z: Complex64, region: &SearchBox) -> Result<Option<f64>> {
        if !region.contains_loose(z, 1e-9) {
            return Ok(None);
        }
        let r = self.residual(z)?;
        Ok((r <= self.opts.tol).then_some(r))
    }

    fn try_simple(&self, region: &SearchBox, seed: Complex64) -> Result<Option<Found>> {
        let Ok(z) = self.newton(region.clamp(seed), 0, 1.0, region) else { return Ok(None) };
        Ok(self.accept(z, region)?.map(|residual| Found { lambda: z, residual, multiplicity: 1 }))
    }

    /// Two zeros in a tiny box: a double zero, or two resolved via the
    /// quadratic model around the zero of `D'`.
    fn try_pair(&self, region: &SearchBox, seed: Complex64) -> Result<Vec<Found>> {
        let Ok(z) = self.newton(region.clamp(seed), 1, 1.0, region) else { return Ok(Vec::new()) };
        if let Some(residual) = self.accept(z, region)? {
            return Ok(vec![Found { lambda: z, residual, multiplicity: 2 }]);
        }
        let e = self.f.eval_order(z, 2, self.opts.newton_tol)?;
        let offset = (-2.0 * e.value / e.second_derivative.unwrap()).sqrt();
        let mut out: Vec<Found> = Vec::new();
        for s in [z + offset, z - offset] {
            if let Some(found) = self.try_simple(region, s)? {
                if out.iter().all(|o| (o.lambda - found.lambda).norm() > 1e-9 * (1.0 + found.lambda.norm())) {
                    out.push(found);
                }
            }
        }
        Ok(if out.len() == 2 { out } else { Vec::new() })
    }

    fn split_counts(&self, region: &SearchBox, count: usize) -> Result<(ZeroCount, ZeroCount)> {
        let mut last = None;
        for t in CUTS {
            let (lo, hi) = region.split(t);
            let attempt = (|| -> Result<(ZeroCount, ZeroCount)> {
                let (cl, ml) = self.contour.wind(&lo)?;
                let (ch, mh) = self.contour.wind(&hi)?;
                if cl + ch != count {
                    return Err(Error::PairingFailure { expected: count, found: cl + ch });
                }
                let z = |c, m, b| ZeroCount { count: c, search_box: b, moment: m, evaluations: 0 };
                Ok((z(cl, ml, lo), z(ch, mh, hi)))
            })();
            match attempt {
                Ok(v) => return Ok(v),
                Err(e @ (Error::ContourThroughZero(_) | Error::PhaseRefinementOverflow(_) | Error::PairingFailure { .. })) => {
                    last = Some(e)
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("cuts were attempted"))
    }

    fn search(&mut self, zc: ZeroCount, depth: usize) {
        if let Err(error) = self.search_inner(zc, depth) {
            self.failures.push(RootFailure { region: zc.search_box, zeros: zc.count, error });
        }
    }

    fn search_inner(&mut self, zc: ZeroCount, depth: usize) -> Result<()> {
        let region = zc.search_box;
        if zc.count == 0 {
            return Ok(());
        }
        let mean = zc.moment / zc.count as f64;
        let small = region.diameter() <= self.opts.min_box * (1.0 + region.center().norm());
        if zc.count == 1 {
            if let Some(found) = self.try_simple(&region, mean)? {
                self.found.push(found);
                return Ok(());
            }
        } else if zc.count == 2 && small {
            let pair = self.try_pair(&region, mean)?;
            if !pair.is_empty() {
                self.found.extend(pair);
                return Ok(());
            }
        }
        if depth >= self.opts.max_depth || (small && region.diameter() < 1e-10 * (1.0 + region.center().norm())) {
            return Err(Error::NonConvergence { lambda: mean, iterations: depth });
        }
        let (lo, hi) = self.split_counts(&region, zc.count)?;
        self.search(lo, depth + 1);
        self.search(hi, depth + 1);
        Ok(())
    }
}

/// Certified search of all zeros of `f` in `rect`.
pub fn find_zeros(f: &CharFn, rect: &SearchBox, opts: &SearchOptions) -> Result<(ZeroCount, Vec<(Complex64, f64, usize)>, Vec<RootFailure>, usize)> {
    let mut s = Searcher { f, contour: Contour::new(f, opts.contour), opts: *opts, found: Vec::new(), failures: Vec::new() };
    let top = s.contour.count_nudged(rect)?;
    s.search(top, 0);
    let mut roots: Vec<(Complex64, f64, usize)> = s.found.iter().map(|r| (r.lambda, r.residual, r.multiplicity)).collect();
    roots.sort_by(|a, b| cmp_complex(a.0, b.0));
    Ok((top, roots, s.failures, s.contour.evaluations()))
}

/// All eigenvalues of `problem` with boundary condition `bc` inside `rect`.
/// Zero curvature uses the closed-form characteristic function.
pub fn find_eigenvalues(
    problem: &TransverseProblem,
    bc: &BoundaryCondition,
    rect: &SearchBox,
    opts: &SearchOptions,
) -> Result<SpectrumResult> {
    let f = CharFn::preferred(problem, bc, opts.newton_tol)?;
    find_with(&f, problem, bc, rect, opts)
}

/// As [`find_eigenvalues`] with an explicit characteristic function.
pub fn find_with(
    f: &CharFn,
    problem: &TransverseProblem,
    bc: &BoundaryCondition,
    rect: &SearchBox,
    opts: &SearchOptions,
) -> Result<SpectrumResult> {
    let (top, roots, failures, evaluations) = find_zeros(f, rect, opts)?;
    let mut eigenvalues = Vec::with_capacity(roots.len());
    for (lambda, residual, multiplicity) in roots {
        let (simple, square_integral) = if opts.diagnostics {
            let v = square_integral_of(f, lambda, opts.samples)?;
            (multiplicity == 1 && v.norm() > opts.simplicity_threshold, v)
        } else {
            (multiplicity == 1, Complex64::new(f64::NAN, f64::NAN))
        };
        eigenvalues.push(Eigenvalue { lambda, residual, simple, square_integral, multiplicity, mode: problem.m, route: f.route() });
    }
    Ok(SpectrumResult {
        problem: *problem,
        bc: *bc,
        search_box: top.search_box,
        eigenvalues,
        zero_count_certificate: top.count,
        failures,
        evaluations,
    })
}
