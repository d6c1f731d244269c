//! Continuation of eigenvalue branches in a boundary parameter, with
//! detection of crossings and exceptional points.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charfn::CharFn;
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, ConnectedBc, SeparatedBc, TransverseProblem};
use crate::spectrum::{find_with, SearchBox, SearchOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// `α` of separated conditions.
    Alpha,
    /// `φ` of connected conditions.
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Crossing,
    PairCreation,
    PairAnnihilation,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Crossing => "crossing",
            EventKind::PairCreation => "pair_creation",
            EventKind::PairAnnihilation => "pair_annihilation",
        }
    }
}

/// An event between two branches, located to within the event tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    /// Grid point just before the event.
    pub parameter: f64,
    pub refined_location: f64,
    /// Ids of the two branches involved, smaller first.
    pub branches: (usize, usize),
    /// Eigenvalue (or pair mean) at the refined location.
    pub lambda: Complex64,
}

/// One eigenvalue branch sampled on the (possibly refined) parameter grid.
/// Points where the branch is absent from the box hold `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub parameter_grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub events: Vec<Event>,
}

impl Branch {
    pub fn is_present(&self, k: usize) -> bool {
        !self.values[k].re.is_nan()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub search: SearchOptions,
    /// Full certified search every this many grid points.
    pub recertify_every: usize,
    /// Parameter accuracy of event locations.
    pub event_tol: f64,
    /// Grid halvings allowed when branch matching is ambiguous.
    pub max_refinements: usize,
    /// `|Im λ| ≤ real_tol·(1 + |λ|)` counts as real.
    pub real_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            search: SearchOptions { diagnostics: false, ..SearchOptions::default() },
            recertify_every: 8,
            event_tol: 1e-6,
            max_refinements: 16,
            real_tol: 1e-8,
        }
    }
}

/// `bc_template` with the swept parameter set to `t`.
pub fn with_parameter(bc_template: &BoundaryCondition, which: SweepParameter, t: f64) -> Result<BoundaryCondition> {
    match (which, bc_template) {
        (SweepParameter::Alpha, BoundaryCondition::Separated(s)) => SeparatedBc::new(t, s.beta).map(BoundaryCondition::Separated),
        (SweepParameter::Phi, BoundaryCondition::Connected(c)) => ConnectedBc::new(c.b, c.c, t).map(BoundaryCondition::Connected),
        (SweepParameter::Alpha, _) => Err(Error::InvalidParameter("alpha sweeps need separated boundary conditions".into())),
        (SweepParameter::Phi, _) => Err(Error::InvalidParameter("phi sweeps need connected boundary conditions".into())),
    }
}

/// Uniform grid `start, start + step, …` up to `stop` (inclusive within rounding).
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidParameter(format!("bad grid [{start}, {stop}] with step {step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// `α_n = √(k_n² − β²)` with `k_n = (2n+1)π/(4a)`.
pub fn critical_alpha_prediction(beta: f64, a: f64, n: usize) -> Result<f64> {
    if !(a > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("need a > 0 and finite beta, got a = {a}, beta = {beta}")));
    }
    let k = (2 * n + 1) as f64 * std::f64::consts::PI / (4.0 * a);
    if k <= beta.abs() {
        return Err(Error::NoRealSolution(format!("k_{n} = {k} does not exceed |beta| = {}", beta.abs())));
    }
    Ok((k * k - beta * beta).sqrt())
}

fn nan() -> Complex64 {
    Complex64::new(f64::NAN, f64::NAN)
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * (1.0 + a.norm())
}

struct Tracker<'a> {
    problem: &'a TransverseProblem,
    template: &'a BoundaryCondition,
    which: SweepParameter,
    rect: SearchBox,
    opts: SweepOptions,
}

/// Branch values at grid index `k` are `rows[b][k]`.
struct State {
    ts: Vec<f64>,
    rows: Vec<Vec<Complex64>>,
}

impl State {
    fn last(&self, b: usize) -> Complex64 {
        *self.rows[b].last().unwrap()
    }

    /// Linear (or quadratic) extrapolation of branch `b` to `t`.
    fn predict(&self, b: usize, t: f64, quadratic: bool) -> Complex64 {
        let row = &self.rows[b];
        let k = row.len();
        let ok = |i: usize| !row[i].re.is_nan();
        if k >= 3 && quadratic && ok(k - 1) && ok(k - 2) && ok(k - 3) {
            let (t0, t1, t2) = (self.ts[k - 3], self.ts[k - 2], self.ts[k - 1]);
            let l0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2));
            let l1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2));
            let l2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1));
            return row[k - 3] * l0 + row[k - 2] * l1 + row[k - 1] * l2;
        }
        if k >= 2 && ok(k - 1) && ok(k - 2) {
            let (t0, t1) = (self.ts[k - 2], self.ts[k - 1]);
            return row[k - 1] + (row[k - 1] - row[k - 2]) * ((t - t1) / (t1 - t0));
        }
        row[k - 1]
    }
}

enum Matching {
    Assigned(Vec<Option<usize>>),
    Ambiguous,
}

impl<'a> Tracker<'a> {
    fn char_fn(&self, t: f64) -> Result<CharFn> {
        let bc = with_parameter(self.template, self.which, t)?;
        CharFn::preferred(self.problem, &bc, self.opts.search.newton_tol)
    }

    fn is_real(&self, z: Complex64) -> bool {
        z.im.abs() <= self.opts.real_tol * (1.0 + z.norm())
    }

    /// Certified eigenvalues in `rect` at `t`, repeated by multiplicity.
    fn certified(&self, t: f64, rect: &SearchBox) -> Result<Vec<Complex64>> {
        let f = self.char_fn(t)?;
        let bc = with_parameter(self.template, self.which, t)?;
        let r = find_with(&f, self.problem, &bc, rect, &self.opts.search)?.into_complete()?;
        Ok(r.eigenvalues.iter().flat_map(|e| std::iter::repeat(e.lambda).take(e.multiplicity)).collect())
    }

    fn newton(&self, f: &CharFn, seed: Complex64) -> Option<Complex64> {
        let mut z = seed;
        for _ in 0..self.opts.search.max_newton {
            let e = f.eval_order(z, 1, self.opts.search.newton_tol).ok()?;
            let d = e.derivative?;
            if e.value == Complex64::default() {
                return Some(z);
            }
            if d.norm() == 0.0 {
                return None;
            }
            let step = e.value / d;
            z -= step;
            if step.norm() <= 1e-12 * (1.0 + z.norm()) {
                let r = f.eval_order(z, 0, self.opts.search.newton_tol).ok()?.residual();
                return (r <= self.opts.search.tol).then_some(z);
            }
        }
        None
    }

    /// Newton from each prediction; `None` unless every root is closest to
    /// its own prediction and all roots are distinct.
    fn continue_from(&self, t: f64, preds: &[Complex64]) -> Result<Option<Vec<Complex64>>> {
        let f = self.char_fn(t)?;
        let mut out = Vec::with_capacity(preds.len());
        for p in preds {
            match self.newton(&f, *p) {
                Some(z) if self.rect.contains(z) => out.push(z),
                _ => return Ok(None),
            }
        }
        for (i, z) in out.iter().enumerate() {
            let own = (z - preds[i]).norm();
            if preds.iter().enumerate().any(|(j, p)| j != i && (z - p).norm() <= own) {
                return Ok(None);
            }
            if out.iter().enumerate().any(|(j, w)| j != i && close(*z, *w, 1e-8)) {
                return Ok(None);
            }
        }
        Ok(Some(out))
    }

    /// Greedy nearest matching of candidates to predictions.
    fn match_candidates(&self, preds: &[Complex64], cands: &[Complex64]) -> Matching {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (b, p) in preds.iter().enumerate() {
            for (c, z) in cands.iter().enumerate() {
                pairs.push(((p - z).norm(), b, c));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut assigned = vec![None; preds.len()];
        let mut taken = vec![false; cands.len()];
        for (_, b, c) in pairs {
            if assigned[b].is_none() && !taken[c] {
                assigned[b] = Some(c);
                taken[c] = true;
            }
        }
        for b1 in 0..preds.len() {
            for b2 in b1 + 1..preds.len() {
                let (Some(c1), Some(c2)) = (assigned[b1], assigned[b2]) else { continue };
                let (z1, z2) = (cands[c1], cands[c2]);
                let (p1, p2) = (preds[b1], preds[b2]);
                // equal values, or a branch point where real and nonreal pairs exchange
                if close(z1, z2, 1e-6)
                    || (close(z1, z2.conj(), 1e-6) && self.is_real(p1) && self.is_real(p2))
                    || (close(p1, p2.conj(), 1e-6) && self.is_real(z1) && self.is_real(z2))
                {
                    continue;
                }
                let kept = (p1 - z1).norm() + (p2 - z2).norm();
                let swapped = (p1 - z2).norm() + (p2 - z1).norm();
                if kept > 0.5 * swapped {
                    return Matching::Ambiguous;
                }
            }
        }
        Matching::Assigned(assigned)
    }

    /// Adds grid point `t` to `state`, refining towards it if matching is ambiguous.
    fn advance(&self, state: &mut State, t: f64, certify: bool, depth: usize) -> Result<()> {
        let alive: Vec<usize> = (0..state.rows.len())
            .filter(|&b| !state.last(b).re.is_nan())
            .filter(|&b| self.rect.contains(state.predict(b, t, false)))
            .collect();
        let attempt = |quadratic: bool| -> Result<Option<(Vec<Complex64>, Vec<Option<usize>>)>> {
            let preds: Vec<Complex64> = alive.iter().map(|&b| state.predict(b, t, quadratic)).collect();
            if !certify && !alive.is_empty() {
                if let Some(roots) = self.continue_from(t, &preds)? {
                    let n = roots.len();
                    return Ok(Some((roots, (0..n).map(Some).collect())));
                }
            }
            let cands = self.certified(t, &self.rect)?;
            Ok(match self.match_candidates(&preds, &cands) {
                Matching::Assigned(a) => Some((cands, a)),
                Matching::Ambiguous => None,
            })
        };
        let outcome = match attempt(false)? {
            Some(v) => Some(v),
            None => attempt(true)?,
        };
        let Some((cands, assigned)) = outcome else {
            let prev = *state.ts.last().unwrap();
            if depth >= self.opts.max_refinements {
                return Err(Error::BranchAmbiguity { parameter: t });
            }
            self.advance(state, 0.5 * (prev + t), true, depth + 1)?;
            return self.advance(state, t, true, depth + 1);
        };
        let mut used = vec![false; cands.len()];
        for b in 0..state.rows.len() {
            let v = match alive.iter().position(|&x| x == b).and_then(|i| assigned[i]) {
                Some(c) => {
                    used[c] = true;
                    cands[c]
                }
                None => nan(),
            };
            state.rows[b].push(v);
        }
        let len = state.ts.len();
        for (c, z) in cands.iter().enumerate() {
            if !used[c] {
                let mut row = vec![nan(); len];
                row.push(*z);
                state.rows.push(row);
            }
        }
        state.ts.push(t);
        Ok(())
    }

    /// Values of branches `i` and `j` at `t` by Newton from linear interpolation
    /// between grid points `k` and `l`.
    fn interpolated_pair(&self, state: &State, i: usize, j: usize, (k, l): (usize, usize), t: f64) -> Result<Option<(Complex64, Complex64)>> {
        let s = (t - state.ts[k]) / (state.ts[l] - state.ts[k]);
        let seed = |b: usize| state.rows[b][k] * (1.0 - s) + state.rows[b][l] * s;
        let f = self.char_fn(t)?;
        Ok(self.newton(&f, seed(i)).zip(self.newton(&f, seed(j))))
    }

    /// Bisection on the sign of `Re(λ_i − λ_j)` over `[t_k, t_l]`.
    /// Returns the location and the remaining gap.
    fn refine_crossing(&self, state: &State, i: usize, j: usize, (k, l): (usize, usize)) -> Result<Option<(f64, Complex64, f64)>> {
        let sign = |z: Complex64, w: Complex64| (z.re - w.re).signum();
        let s0 = sign(state.rows[i][k], state.rows[j][k]);
        let (mut lo, mut hi) = (state.ts[k], state.ts[l]);
        let mut last = None;
        while hi - lo > self.opts.event_tol {
            let mid = 0.5 * (lo + hi);
            let Some((zi, zj)) = self.interpolated_pair(state, i, j, (k, l), mid)? else { return Ok(None) };
            last = Some((mid, 0.5 * (zi + zj), (zi - zj).norm()));
            if close(zi, zj, 1e-10) {
                break;
            }
            if sign(zi, zj) == s0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(last)
    }

    /// The two eigenvalues nearest `center` at `t`, from a certified local search.
    fn local_pair(&self, t: f64, center: Complex64, radius: f64) -> Result<Vec<Complex64>> {
        let r = radius.max(1e-3 * (1.0 + center.norm()));
        let rect = SearchBox::new(center.re - r, center.re + r, center.im - r, center.im + r)?;
        let mut found = self.certified(t, &rect)?;
        found.sort_by(|a, b| (a - center).norm().total_cmp(&(b - center).norm()));
        found.truncate(2);
        Ok(found)
    }

    /// Bisection on whether the pair is real. `real_at_lo` gives the side.
    fn refine_exceptional(&self, state: &State, i: usize, j: usize, k: usize, real_at_lo: bool) -> Result<(f64, Complex64)> {
        let pts = [state.rows[i][k], state.rows[j][k], state.rows[i][k + 1], state.rows[j][k + 1]];
        let center = pts.iter().sum::<Complex64>() / 4.0;
        let radius = 1.5 * pts.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
        let (mut lo, mut hi) = (state.ts[k], state.ts[k + 1]);
        let mut mean = center;
        while hi - lo > self.opts.event_tol {
            let mid = 0.5 * (lo + hi);
            let pair = self.local_pair(mid, center, radius)?;
            mean = pair.iter().sum::<Complex64>() / pair.len().max(1) as f64;
            let real = pair.iter().all(|z| self.is_real(*z));
            if real == real_at_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi), Complex64::new(mean.re, 0.0)))
    }

    fn swap_tails(state: &mut State, i: usize, j: usize, from: usize) {
        for k in from..state.ts.len() {
            let tmp = state.rows[i][k];
            state.rows[i][k] = state.rows[j][k];
            state.rows[j][k] = tmp;
        }
    }

    fn events(&self, state: &mut State) -> Result<Vec<Event>> {
        let mut events = Vec::new();
        let nb = state.rows.len();
        for k in 0..state.ts.len().saturating_sub(1) {
            for i in 0..nb {
                for j in i + 1..nb {
                    let (a0, b0, a1, b1) = (state.rows[i][k], state.rows[j][k], state.rows[i][k + 1], state.rows[j][k + 1]);
                    if [a0, b0, a1, b1].iter().any(|z| z.re.is_nan()) {
                        continue;
                    }
                    let real0 = self.is_real(a0) && self.is_real(b0);
                    let real1 = self.is_real(a1) && self.is_real(b1);
                    let conj0 = !real0 && close(a0, b0.conj(), 1e-6);
                    let conj1 = !real1 && close(a1, b1.conj(), 1e-6);
                    let gap = |x: Complex64, y: Complex64| {
                        let d = x.re - y.re;
                        if d.abs() <= 1e-12 * (1.0 + x.norm()) { 0.0 } else { d }
                    };
                    // a crossing landing exactly on grid point k + 1 is bracketed by k and k + 2
                    let mut end = k + 1;
                    if real0 && real1 && gap(a1, b1) == 0.0 && k + 2 < state.ts.len() {
                        end = k + 2;
                    }
                    let (a2, b2) = (state.rows[i][end], state.rows[j][end]);
                    let kind = if real0 && conj1 {
                        EventKind::PairCreation
                    } else if conj0 && real1 {
                        EventKind::PairAnnihilation
                    } else if real0
                        && !a2.re.is_nan()
                        && !b2.re.is_nan()
                        && self.is_real(a2)
                        && self.is_real(b2)
                        && gap(a0, b0) * gap(a2, b2) < 0.0
                    {
                        EventKind::Crossing
                    } else {
                        continue;
                    };
                    let parameter = state.ts[k];
                    if kind == EventKind::Crossing {
                        match self.refine_crossing(state, i, j, (k, end))? {
                            Some((loc, lambda, gap)) if gap <= 1e-4 * (1.0 + lambda.norm()) => {
                                events.push(Event { kind, parameter, refined_location: loc, branches: (i, j), lambda })
                            }
                            // avoided crossing misread as a crossing by the matcher
                            _ => Self::swap_tails(state, i, j, end),
                        }
                    } else {
                        let (loc, lambda) = self.refine_exceptional(state, i, j, k, kind == EventKind::PairCreation)?;
                        events.push(Event { kind, parameter, refined_location: loc, branches: (i, j), lambda });
                    }
                }
            }
        }
        Ok(events)
    }
}

/// Tracks all eigenvalues inside `rect` along `grid` (strictly increasing).
pub fn sweep_parameter(
    problem: &TransverseProblem,
    bc_template: &BoundaryCondition,
    which: SweepParameter,
    grid: &[f64],
    rect: &SearchBox,
    opts: &SweepOptions,
) -> Result<Vec<Branch>> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("sweep grid must be non-empty and strictly increasing".into()));
    }
    with_parameter(bc_template, which, grid[0])?;
    let tracker = Tracker { problem, template: bc_template, which, rect: *rect, opts: *opts };
    let first = tracker.certified(grid[0], rect)?;
    let mut state = State { ts: vec![grid[0]], rows: first.iter().map(|z| vec![*z]).collect() };
    for (idx, &t) in grid.iter().enumerate().skip(1) {
        let certify = opts.recertify_every <= 1 || idx % opts.recertify_every == 0 || idx + 1 == grid.len();
        tracker.advance(&mut state, t, certify, 0)?;
    }
    let events = tracker.events(&mut state)?;
    Ok(state
        .rows
        .into_iter()
        .enumerate()
        .map(|(id, values)| Branch {
            id,
            parameter_grid: state.ts.clone(),
            values,
            events: events.iter().filter(|e| e.branches.0 == id || e.branches.1 == id).copied().collect(),
        })
        .collect())
}

/// One independent sweep: a problem and the boundary condition template.
#[derive(Debug, Clone, Copy)]
pub struct SweepFamily {
    pub problem: TransverseProblem,
    pub bc_template: BoundaryCondition,
}

/// Independent families swept concurrently; results keep the input order.
pub fn sweep_families(
    families: &[SweepFamily],
    which: SweepParameter,
    grid: &[f64],
    rect: &SearchBox,
    opts: &SweepOptions,
) -> Result<Vec<Vec<Branch>>> {
    families
        .par_iter()
        .map(|f| sweep_parameter(&f.problem, &f.bc_template, which, grid, rect, opts))
        .collect()
}

/// Pair creation and annihilation events of a sweep, in increasing parameter order.
pub fn detect_exceptional_points(branches: &[Branch]) -> Vec<Event> {
    all_events(branches).into_iter().filter(|e| e.kind != EventKind::Crossing).collect()
}

/// Every event of a sweep once, in increasing parameter order.
pub fn all_events(branches: &[Branch]) -> Vec<Event> {
    let mut out: Vec<Event> = Vec::new();
    for e in branches.iter().flat_map(|b| b.events.iter()) {
        if !out.contains(e) {
            out.push(*e);
        }
    }
    out.sort_by(|a, b| a.refined_location.total_cmp(&b.refined_location));
    out
}
