use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::charfn::CharFn;
use crate::error::{Error, Result};

/// Axis-parallel rectangle in the complex `λ`-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SearchBox {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let ok = [re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite()) && re_min < re_max && im_min < im_max;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "search box needs finite bounds with min < max, got [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Self { re_min, re_max, im_min, im_max })
    }

    /// `Re λ ∈ [−5, (2nπ/(2a))²]`, `Im λ ∈ [−25, 25]`.
    pub fn default_for(a: f64, n_wanted: usize) -> Self {
        let top = (2.0 * n_wanted.max(1) as f64 * PI / (2.0 * a)).powi(2);
        Self { re_min: -5.0, re_max: top.max(1.0), im_min: -25.0, im_max: 25.0 }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Containment with a relative margin of `frac` of the side lengths.
    pub fn contains_loose(&self, z: Complex64, frac: f64) -> bool {
        let (dr, di) = (frac * self.width(), frac * self.height());
        z.re >= self.re_min - dr && z.re <= self.re_max + dr && z.im >= self.im_min - di && z.im <= self.im_max + di
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn clamp(&self, z: Complex64) -> Complex64 {
        Complex64::new(z.re.clamp(self.re_min, self.re_max), z.im.clamp(self.im_min, self.im_max))
    }

    pub fn shifted(&self, re: f64) -> Self {
        Self { re_min: self.re_min + re, re_max: self.re_max + re, ..*self }
    }

    /// Mirror image under complex conjugation.
    pub fn conj(&self) -> Self {
        Self { im_min: -self.im_max, im_max: -self.im_min, ..*self }
    }

    /// Enlarged by `delta` with slightly uneven offsets so that edges avoid
    /// lattice-like root positions.
    pub fn nudged(&self, delta: f64) -> Self {
        Self {
            re_min: self.re_min - 0.613 * delta,
            re_max: self.re_max + 0.389 * delta,
            im_min: self.im_min - 0.547 * delta,
            im_max: self.im_max + 0.451 * delta,
        }
    }

    /// Splits across the longer side at fraction `t`.
    pub fn split(&self, t: f64) -> (Self, Self) {
        if self.width() >= self.height() {
            let cut = self.re_min + t * self.width();
            (Self { re_max: cut, ..*self }, Self { re_min: cut, ..*self })
        } else {
            let cut = self.im_min + t * self.height();
            (Self { im_max: cut, ..*self }, Self { im_min: cut, ..*self })
        }
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

/// Certificate of one argument-principle count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroCount {
    pub count: usize,
    /// Box actually used (after any nudging).
    pub search_box: SearchBox,
    /// `(1/2πi) ∮ z D'/D dz`, the sum of the enclosed zeros.
    pub moment: Complex64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ContourSettings {
    /// Integrator tolerance for contour samples.
    pub tol: f64,
    /// Maximum bisection depth of a single initial segment.
    pub max_depth: usize,
    pub max_evaluations: usize,
    /// `|D|/(1+|λ|)` below this on the contour counts as a zero on the contour.
    pub zero_threshold: f64,
    pub max_nudges: usize,
}

impl Default for ContourSettings {
    fn default() -> Self {
        Self { tol: 1e-7, max_depth: 24, max_evaluations: 200_000, zero_threshold: 1e-10, max_nudges: 4 }
    }
}

/// Memoized `D` samples shared by neighbouring contours.
pub(crate) struct Contour<'a> {
    f: &'a CharFn,
    pub(crate) settings: ContourSettings,
    memo: RefCell<HashMap<(u64, u64), (Complex64, f64)>>,
    evaluations: RefCell<usize>,
}

impl<'a> Contour<'a> {
    pub(crate) fn new(f: &'a CharFn, settings: ContourSettings) -> Self {
        Self { f, settings, memo: RefCell::new(HashMap::new()), evaluations: RefCell::new(0) }
    }

    pub(crate) fn evaluations(&self) -> usize {
        *self.evaluations.borrow()
    }

    /// `D(z)` and the log-derivative modulus `|D'/D|`.
    fn value(&self, z: Complex64) -> Result<(Complex64, f64)> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.memo.borrow().get(&key) {
            return Ok(*v);
        }
        let e = self.f.eval_order(z, 1, self.settings.tol)?;
        let d = e.value;
        if d.norm() / (1.0 + z.norm()) < self.settings.zero_threshold {
            return Err(Error::ContourThroughZero(z));
        }
        let rate = (e.derivative.expect("first derivative requested") / d).norm();
        *self.evaluations.borrow_mut() += 1;
        self.memo.borrow_mut().insert(key, (d, rate));
        Ok((d, rate))
    }

    /// Initial sample spacing: about one radian of `2a·k` per segment.
    fn spacing(&self, z: Complex64) -> f64 {
        let a = self.f.operator().half_width();
        (1.0 * (1.0 + z.norm()).sqrt() / (2.0 * a)).max(1e-3)
    }

    /// Winding number and first moment of `D` around `rect`.
    pub(crate) fn wind(&self, rect: &SearchBox) -> Result<(usize, Complex64)> {
        let start = self.evaluations();
        let corners = rect.corners();
        let mut total_arg = 0.0;
        let mut moment = Complex64::default();
        for e in 0..4 {
            let (za, zb) = (corners[e], corners[(e + 1) % 4]);
            let n = ((zb - za).norm() / self.spacing(0.5 * (za + zb))).ceil().clamp(2.0, 4000.0) as usize;
            let pts: Vec<Complex64> = (0..=n)
                .map(|j| if j == n { zb } else { za + (zb - za) * (j as f64 / n as f64) })
                .collect();
            let mut vals = Vec::with_capacity(pts.len());
            for &p in &pts {
                vals.push(self.value(p)?);
            }
            let mut stack: Vec<(Complex64, (Complex64, f64), Complex64, (Complex64, f64), usize)> =
                (0..n).map(|j| (pts[j], vals[j], pts[j + 1], vals[j + 1], 0)).collect();
            while let Some((z0, v0, z1, v1, depth)) = stack.pop() {
                // the log-derivative bound keeps log D from changing by more than one unit per segment
                let len = (z1 - z0).norm();
                let darg = (v1.0 / v0.0).arg();
                if darg.abs() >= FRAC_PI_4 || v0.1 * len > 1.0 || v1.1 * len > 1.0 {
                    if depth >= self.settings.max_depth
                        || self.evaluations() - start > self.settings.max_evaluations
                    {
                        return Err(Error::PhaseRefinementOverflow(z0));
                    }
                    let zm = 0.5 * (z0 + z1);
                    let vm = self.value(zm)?;
                    stack.push((z0, v0, zm, vm, depth + 1));
                    stack.push((zm, vm, z1, v1, depth + 1));
                    continue;
                }
                total_arg += darg;
                moment += 0.5 * (z0 + z1) * Complex64::new(v1.0.norm().ln() - v0.0.norm().ln(), darg);
            }
        }
        let winding = total_arg / (2.0 * PI);
        let count = winding.round();
        if count < 0.0 || (winding - count).abs() > 1e-3 {
            return Err(Error::PhaseRefinementOverflow(corners[0]));
        }
        Ok((count as usize, moment / Complex64::new(0.0, 2.0 * PI)))
    }

    /// Count with outward nudging when the contour hits a zero.
    pub(crate) fn count_nudged(&self, rect: &SearchBox) -> Result<ZeroCount> {
        let mut current = *rect;
        let mut last_err = None;
        for attempt in 0..=self.settings.max_nudges {
            let before = self.evaluations();
            match self.wind(&current) {
                Ok((count, moment)) => {
                    return Ok(ZeroCount {
                        count,
                        search_box: current,
                        moment,
                        evaluations: self.evaluations() - before,
                    })
                }
                Err(e @ (Error::ContourThroughZero(_) | Error::PhaseRefinementOverflow(_))) => {
                    last_err = Some(e);
                    let delta = 1e-3 * rect.diameter().max(1e-3) * (attempt + 1) as f64;
                    current = rect.nudged(delta);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.expect("at least one attempt was made"))
    }
}

/// Number of zeros of `D` inside `rect`, counted with multiplicity.
/// `max_subdiv` bounds the bisection depth of each contour segment.
pub fn count_zeros(f: &CharFn, rect: &SearchBox, max_subdiv: usize) -> Result<ZeroCount> {
    let settings = ContourSettings { max_depth: max_subdiv, ..ContourSettings::default() };
    Contour::new(f, settings).count_nudged(rect)
}
