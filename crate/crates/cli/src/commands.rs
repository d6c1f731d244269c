use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptcurved::charfn::CharFn;
use ptcurved::curvemap::{lowest_levels_box, verify_equivalence};
use ptcurved::model::{BoundaryCondition, Curvature, TransverseProblem};
use ptcurved::spectrum::{
    assemble_2d_spectrum, find_eigenvalues, find_with, pair_nearest, pt_pair_check, sort_lambdas, SearchBox, SearchOptions,
};
use ptcurved::sweep::{all_events, sweep_parameter, uniform_grid, SweepOptions, SweepParameter};
use ptcurved::{oracle, Error};

use crate::input::Config;
use crate::table::{Cell, Report, Table};
use crate::{CliError, ProblemArgs, Suite};

pub struct Global {
    pub tol: Option<f64>,
    pub seed: u64,
}

impl Global {
    fn search(&self, diagnostics: bool) -> SearchOptions {
        let opts = SearchOptions { diagnostics, ..SearchOptions::default() };
        match self.tol {
            Some(t) => opts.with_tol(t),
            None => opts,
        }
    }
}

pub struct SweepRange<'a> {
    pub param: &'a Option<String>,
    pub from: &'a Option<String>,
    pub to: &'a Option<String>,
    pub step: &'a Option<String>,
    pub m_list: &'a Option<String>,
}

/// A validated problem, boundary condition and search box.
#[derive(Debug, Clone, Copy)]
struct Setup {
    problem: TransverseProblem,
    bc: BoundaryCondition,
    rect: SearchBox,
    n_eigs: usize,
}

fn parse_curvature(text: &str) -> Result<Curvature, CliError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "+1" | "1" | "positive" | "sphere" => Ok(Curvature::Positive),
        "0" | "+0" | "-0" | "zero" | "flat" | "cylinder" => Ok(Curvature::Zero),
        "-1" | "negative" | "pseudosphere" => Ok(Curvature::Negative),
        other => Err(CliError::config(format!("--curvature must be -1, 0 or +1, got '{other}'"))),
    }
}

fn label(k: Curvature) -> &'static str {
    match k {
        Curvature::Negative => "-1",
        Curvature::Zero => "0",
        Curvature::Positive => "+1",
    }
}

fn bc_label(bc: &BoundaryCondition) -> String {
    match bc {
        BoundaryCondition::Separated(s) => format!("alpha={} beta={}", s.alpha, s.beta),
        BoundaryCondition::Connected(c) => format!("b={} c={} phi={}", c.b, c.c, c.phi),
    }
}

fn case_label(p: &TransverseProblem, bc: &BoundaryCondition) -> String {
    format!("K={} m={} a={} {}", label(p.curvature), p.m, p.a, bc_label(bc))
}

/// Library errors raised while validating input are configuration errors.
fn invalid(e: Error) -> CliError {
    CliError::config(e.to_string())
}

fn read_setup(cfg: &Config, p: &ProblemArgs) -> Result<Setup, CliError> {
    let curvature = match cfg.text("curvature", &p.curvature)? {
        Some(t) => parse_curvature(&t)?,
        None => Curvature::Zero,
    };
    let a = cfg.real_or("a", &p.a, FRAC_PI_4)?;
    let m = cfg.int("m", &p.m)?.unwrap_or(0);
    let problem = TransverseProblem::new(curvature, m, a).map_err(invalid)?;

    let alpha = cfg.real("alpha", &p.alpha)?;
    let beta = cfg.real("beta", &p.beta)?;
    let b = cfg.real("b", &p.b)?;
    let c = cfg.real("c", &p.c)?;
    let phi = cfg.real("phi", &p.phi)?;
    let connected = b.is_some() || c.is_some() || phi.is_some();
    if connected && (alpha.is_some() || beta.is_some()) {
        return Err(CliError::config("give either --alpha/--beta (separated) or --b/--c/--phi (connected), not both"));
    }
    let bc = if connected {
        let b = b.ok_or_else(|| CliError::config("connected conditions need --b > 0"))?;
        BoundaryCondition::connected(b, c.unwrap_or(0.0), phi.unwrap_or(0.0))
    } else {
        BoundaryCondition::separated(alpha.unwrap_or(0.0), beta.unwrap_or(0.0))
    }
    .map_err(invalid)?;

    let n_eigs = cfg.count_or("n_eigs", &p.n_eigs, 5)?;
    if n_eigs == 0 {
        return Err(CliError::config("--n-eigs must be at least 1"));
    }
    let d = lowest_levels_box(&problem, &bc, n_eigs);
    let rect = SearchBox::new(
        cfg.real_or("re_min", &p.re_min, d.re_min)?,
        cfg.real_or("re_max", &p.re_max, d.re_max)?,
        cfg.real_or("im_min", &p.im_min, d.im_min)?,
        cfg.real_or("im_max", &p.im_max, d.im_max)?,
    )
    .map_err(invalid)?;
    Ok(Setup { problem, bc, rect, n_eigs })
}

fn custom_box(cfg: &Config, p: &ProblemArgs) -> Result<bool, CliError> {
    for (key, flag) in [("re_min", &p.re_min), ("re_max", &p.re_max), ("im_min", &p.im_min), ("im_max", &p.im_max)] {
        if cfg.text(key, flag)?.is_some() {
            return Ok(true);
        }
    }
    Ok(false)
}

fn expand(eigs: &[ptcurved::spectrum::Eigenvalue]) -> Vec<Complex64> {
    eigs.iter().flat_map(|e| std::iter::repeat(e.lambda).take(e.multiplicity)).collect()
}

pub fn solve(cfg: &Config, global: &Global, p: &ProblemArgs) -> Result<Report, CliError> {
    let s = read_setup(cfg, p)?;
    let result = find_eigenvalues(&s.problem, &s.bc, &s.rect, &global.search(true))?.into_complete()?;
    let mut t = Table::new(vec!["index", "m", "re", "im", "residual", "simple", "multiplicity", "certificate"]);
    for (i, e) in result.eigenvalues.iter().enumerate() {
        t.push(vec![
            i.into(),
            e.mode.into(),
            e.lambda.re.into(),
            e.lambda.im.into(),
            e.residual.into(),
            e.simple.into(),
            e.multiplicity.into(),
            result.zero_count_certificate.into(),
        ]);
    }
    Ok(Report::new("solve", t)
        .meta("curvature", label(s.problem.curvature))
        .meta("a", s.problem.a)
        .meta("m", s.problem.m)
        .meta("boundary", bc_label(&s.bc))
        .meta("re_min", result.search_box.re_min)
        .meta("re_max", result.search_box.re_max)
        .meta("im_min", result.search_box.im_min)
        .meta("im_max", result.search_box.im_max)
        .meta("certificate", result.zero_count_certificate))
}

pub fn sweep(cfg: &Config, global: &Global, p: &ProblemArgs, range: &SweepRange) -> Result<Report, CliError> {
    let s = read_setup(cfg, p)?;
    let default_param = match s.bc {
        BoundaryCondition::Separated(_) => "alpha",
        BoundaryCondition::Connected(_) => "phi",
    };
    let which = match cfg.text("param", range.param)?.as_deref().unwrap_or(default_param) {
        "alpha" => SweepParameter::Alpha,
        "phi" => SweepParameter::Phi,
        other => return Err(CliError::config(format!("--param must be alpha or phi, got '{other}'"))),
    };
    let (from, to, step) = match which {
        SweepParameter::Alpha => (0.0, 6.0, 0.02),
        SweepParameter::Phi => (-PI, PI, PI / 100.0),
    };
    let from = cfg.real_or("from", range.from, from)?;
    let to = cfg.real_or("to", range.to, to)?;
    let step = cfg.real_or("step", range.step, step)?;
    let mut grid = uniform_grid(from, to, step).map_err(invalid)?;
    if which == SweepParameter::Phi {
        // phi lives in [-pi, pi)
        grid.retain(|t| *t < PI);
        if grid.is_empty() || grid[0] < -PI {
            return Err(CliError::config("phi sweeps must stay inside [-pi, pi)"));
        }
    }
    let modes = cfg.int_list("m_list", range.m_list)?.unwrap_or_else(|| vec![s.problem.m]);
    let own_box = custom_box(cfg, p)?;
    let opts = SweepOptions { search: global.search(false), ..SweepOptions::default() };

    let mut t = Table::new(vec!["parameter", "m", "branch", "re", "im"]);
    let mut ev = Table::new(vec!["m", "kind", "parameter", "location", "branch_a", "branch_b", "re", "im"]);
    for &m in &modes {
        let problem = TransverseProblem::new(s.problem.curvature, m, s.problem.a).map_err(invalid)?;
        let rect = if own_box { s.rect } else { lowest_levels_box(&problem, &s.bc, s.n_eigs) };
        let branches = sweep_parameter(&problem, &s.bc, which, &grid, &rect, &opts)?;
        for b in &branches {
            for (k, (&x, z)) in b.parameter_grid.iter().zip(&b.values).enumerate() {
                if b.is_present(k) {
                    t.push(vec![x.into(), m.into(), b.id.into(), z.re.into(), z.im.into()]);
                }
            }
        }
        for e in all_events(&branches) {
            ev.push(vec![
                m.into(),
                e.kind.name().into(),
                e.parameter.into(),
                e.refined_location.into(),
                e.branches.0.into(),
                e.branches.1.into(),
                e.lambda.re.into(),
                e.lambda.im.into(),
            ]);
        }
    }
    let mut r = Report::new("sweep", t)
        .meta("curvature", label(s.problem.curvature))
        .meta("a", s.problem.a)
        .meta("parameter", if which == SweepParameter::Alpha { "alpha" } else { "phi" })
        .meta("boundary", bc_label(&s.bc));
    r.side = Some(("events", ev));
    Ok(r)
}

pub fn oracle(cfg: &Config, _global: &Global, p: &ProblemArgs, grid: &Option<String>, raw: bool) -> Result<Report, CliError> {
    let s = read_setup(cfg, p)?;
    let n = cfg.count_or("grid", grid, 400)?;
    if n < oracle::MIN_GRID {
        return Err(CliError::config(format!("--grid must be at least {}, got {n}", oracle::MIN_GRID)));
    }
    let extrapolate = !cfg.flag("no_extrapolate", raw)?;
    let rep = oracle::compare(&s.problem, &s.bc, s.n_eigs, n, extrapolate)?;
    let mut t = Table::new(vec!["index", "shooting_re", "shooting_im", "oracle_re", "oracle_im", "deviation"]);
    for (i, (a, b)) in rep.shooting.iter().zip(&rep.oracle).enumerate() {
        t.push(vec![i.into(), a.re.into(), a.im.into(), b.re.into(), b.im.into(), (a - b).norm().into()]);
    }
    Ok(Report::new("oracle", t)
        .meta("case", case_label(&s.problem, &s.bc))
        .meta("grid", n)
        .meta("extrapolated", extrapolate)
        .meta("certificate", rep.certificate)
        .meta("oracle_count", rep.oracle_count)
        .meta("deviation", rep.deviation))
}

pub fn spectrum2d(cfg: &Config, global: &Global, p: &ProblemArgs, m_max: &Option<String>) -> Result<Report, CliError> {
    let s = read_setup(cfg, p)?;
    let m_max = cfg.int("m_max", m_max)?.unwrap_or(2);
    if m_max < 0 {
        return Err(CliError::config(format!("--m-max must be non-negative, got {m_max}")));
    }
    let base = s.problem.with_mode(0);
    let rect = if custom_box(cfg, p)? { s.rect } else { lowest_levels_box(&base, &s.bc, s.n_eigs) };
    let mut all = assemble_2d_spectrum(s.problem.curvature, s.problem.a, &s.bc, m_max, &rect, &global.search(true))?;
    all.sort_by(|x, y| {
        let (a, b) = (x.eigenvalue.lambda, y.eigenvalue.lambda);
        a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)).then(x.m.cmp(&y.m))
    });
    let mut t = Table::new(vec!["index", "m", "mode_multiplicity", "re", "im", "residual", "simple", "multiplicity"]);
    for (i, e) in all.iter().enumerate() {
        let v = &e.eigenvalue;
        t.push(vec![
            i.into(),
            e.m.into(),
            e.mode_multiplicity.into(),
            v.lambda.re.into(),
            v.lambda.im.into(),
            v.residual.into(),
            v.simple.into(),
            v.multiplicity.into(),
        ]);
    }
    Ok(Report::new("spectrum2d", t)
        .meta("curvature", label(s.problem.curvature))
        .meta("a", s.problem.a)
        .meta("m_max", m_max)
        .meta("boundary", bc_label(&s.bc)))
}

/// One row of a verification report.
struct Check {
    case: String,
    quantity: &'static str,
    deviation: f64,
    tolerance: f64,
    note: String,
}

impl Check {
    fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

fn tolerance(suite: Suite) -> f64 {
    match suite {
        Suite::Oracle => 1e-4,
        Suite::Transform => 1e-7,
        Suite::PtPairs => 1e-7,
        Suite::Adjoint => 1e-8,
        Suite::ClosedForm => 1e-8,
    }
}

/// Random parameters of the same kind as `s.bc`.
fn random_bc(rng: &mut ChaCha8Rng, template: &BoundaryCondition) -> BoundaryCondition {
    match template {
        BoundaryCondition::Separated(_) => {
            BoundaryCondition::separated(rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)).expect("finite data")
        }
        BoundaryCondition::Connected(_) => {
            BoundaryCondition::connected(rng.gen_range(0.01..1.0), rng.gen_range(-0.5..0.5), rng.gen_range(-PI..PI))
                .expect("1 + bc > 0 by construction")
        }
    }
}

fn check_case(suite: Suite, s: &Setup, opts: &SearchOptions, grid: usize) -> Result<(&'static str, f64), Error> {
    match suite {
        Suite::Oracle => Ok(("max |shooting - oracle|", oracle::compare(&s.problem, &s.bc, s.n_eigs, grid, true)?.deviation)),
        Suite::Transform => Ok(("max |route A - route B|", verify_equivalence(&s.problem, &s.bc, s.n_eigs, opts)?.deviation)),
        Suite::PtPairs => {
            let r = find_eigenvalues(&s.problem, &s.bc, &s.rect, opts)?.into_complete()?;
            Ok(("PT projection defect", pt_pair_check(&s.problem, &s.bc, &expand(&r.eigenvalues))?))
        }
        Suite::Adjoint => {
            let r = find_eigenvalues(&s.problem, &s.bc, &s.rect, opts)?.into_complete()?;
            let adj = find_eigenvalues(&s.problem, &s.bc.adjoint(), &r.search_box.conj(), opts)?.into_complete()?;
            let mut mirrored: Vec<Complex64> = expand(&adj.eigenvalues).iter().map(|z| z.conj()).collect();
            sort_lambdas(&mut mirrored);
            let own = expand(&r.eigenvalues);
            if own.len() != mirrored.len() {
                return Err(Error::PairingFailure { expected: own.len(), found: mirrored.len() });
            }
            Ok(("max |lambda - conj(adjoint)|", pair_nearest(&own, &mirrored)?.1))
        }
        Suite::ClosedForm => {
            let closed = CharFn::closed_form(&s.problem, &s.bc)?;
            let shot = CharFn::shooting(&s.problem, &s.bc, opts.newton_tol)?;
            let a = find_with(&closed, &s.problem, &s.bc, &s.rect, opts)?.into_complete()?;
            let b = find_with(&shot, &s.problem, &s.bc, &a.search_box, opts)?.into_complete()?;
            let (la, lb) = (expand(&a.eigenvalues), expand(&b.eigenvalues));
            if la.len() != lb.len() {
                return Err(Error::PairingFailure { expected: la.len(), found: lb.len() });
            }
            Ok(("max |closed form - shooting|", pair_nearest(&la, &lb)?.1))
        }
    }
}

pub fn verify(
    cfg: &Config,
    global: &Global,
    suite: Suite,
    p: &ProblemArgs,
    random_cases: &Option<String>,
    grid: &Option<String>,
) -> Result<(Report, bool), CliError> {
    let base = read_setup(cfg, p)?;
    match suite {
        Suite::Transform if !base.problem.curvature.is_curved() => {
            return Err(CliError::config("verify transform needs --curvature +1 or -1"));
        }
        Suite::ClosedForm if base.problem.curvature.is_curved() => {
            return Err(CliError::config("verify closed-form needs --curvature 0"));
        }
        _ => {}
    }
    let grid = cfg.count_or("grid", grid, 400)?;
    if grid < oracle::MIN_GRID {
        return Err(CliError::config(format!("--grid must be at least {}, got {grid}", oracle::MIN_GRID)));
    }
    let n_random = cfg.count_or("random_cases", random_cases, 0)?;
    let own_box = custom_box(cfg, p)?;
    let mut cases = vec![base];
    let mut rng = ChaCha8Rng::seed_from_u64(global.seed);
    for _ in 0..n_random {
        let bc = random_bc(&mut rng, &base.bc);
        let rect = if own_box { base.rect } else { lowest_levels_box(&base.problem, &bc, base.n_eigs) };
        cases.push(Setup { bc, rect, ..base });
    }

    let opts = global.search(false);
    let tol = tolerance(suite);
    let checks: Vec<Check> = cases
        .iter()
        .map(|s| {
            let case = case_label(&s.problem, &s.bc);
            match check_case(suite, s, &opts, grid) {
                Ok((quantity, deviation)) => Check { case, quantity, deviation, tolerance: tol, note: String::new() },
                Err(e) => Check { case, quantity: "error", deviation: f64::INFINITY, tolerance: tol, note: e.to_string() },
            }
        })
        .collect();

    let passed = checks.iter().all(Check::passed);
    let mut t = Table::new(vec!["case", "quantity", "deviation", "tolerance", "pass", "note"]);
    for c in &checks {
        t.push(vec![
            c.case.clone().into(),
            c.quantity.into(),
            c.deviation.into(),
            c.tolerance.into(),
            c.passed().into(),
            Cell::Text(c.note.clone()),
        ]);
    }
    let report = Report::new("verify", t)
        .meta("suite", suite.name())
        .meta("seed", global.seed as i64)
        .meta("cases", checks.len())
        .meta("passed", passed);
    Ok((report, passed))
}
