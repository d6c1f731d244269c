//! Acceptance suite. Runs without the libtest harness and prints one
//! `PASS`/`FAIL` line per criterion. With `ACCEPTANCE_STRICT=1` in the
//! environment a failed criterion makes the process exit nonzero; otherwise
//! the report alone carries the result, so the rest of the workspace tests
//! still run after it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ptcurved::charfn::CharFn;
use ptcurved::curvemap::{lowest_levels_box, verify_equivalence};
use ptcurved::model::{BoundaryCondition, Curvature, TransverseProblem};
use ptcurved::oracle;
use ptcurved::spectrum::{find_eigenvalues, find_with, pair_nearest, Eigenvalue, SearchBox, SearchOptions};
use ptcurved::sweep::{all_events, sweep_parameter, uniform_grid, Branch, EventKind, SweepOptions, SweepParameter};
use ptcurved::Result;

const A: f64 = FRAC_PI_4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn problem(k: Curvature, m: i64) -> TransverseProblem {
    TransverseProblem::new(k, m, A).unwrap()
}

fn sep(alpha: f64, beta: f64) -> BoundaryCondition {
    BoundaryCondition::separated(alpha, beta).unwrap()
}

fn conn(b: f64, c: f64, phi: f64) -> BoundaryCondition {
    BoundaryCondition::connected(b, c, phi).unwrap()
}

fn quiet() -> SearchOptions {
    SearchOptions { diagnostics: false, ..SearchOptions::default() }
}

fn expand(eigs: &[Eigenvalue]) -> Vec<Complex64> {
    eigs.iter().flat_map(|e| std::iter::repeat(e.lambda).take(e.multiplicity)).collect()
}

fn is_real(z: Complex64) -> bool {
    z.im.abs() <= 1e-8 * (1.0 + z.norm())
}

/// Flat closed-form levels `{α², 4, 16, 36}` below 40.
fn criterion_1() -> Result<Outcome> {
    let start = Instant::now();
    let rect = SearchBox::new(-1.0, 40.0, -5.0, 5.0)?;
    let mut worst = 0.0_f64;
    let mut ok = true;
    for alpha in [0.0, 1.0, 3.0] {
        let r = find_eigenvalues(&problem(Curvature::Zero, 0), &sep(alpha, 0.0), &rect, &SearchOptions::default())?.into_complete()?;
        let mut want = vec![alpha * alpha, 4.0, 16.0, 36.0];
        want.sort_by(f64::total_cmp);
        let got = expand(&r.eigenvalues);
        ok &= got.len() == want.len() && r.eigenvalues.iter().all(|e| e.simple);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).norm());
        }
    }
    let r = find_eigenvalues(&problem(Curvature::Zero, 0), &sep(2.0, 0.0), &rect, &SearchOptions::default())?.into_complete()?;
    let double = r.eigenvalues.iter().find(|e| (e.lambda - 4.0).norm() < 1e-8);
    let flagged = double.is_some_and(|e| !e.simple && e.multiplicity == 2);
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        ok && flagged && worst <= 1e-8 && elapsed < 1.0,
        format!("max error {worst:.2e} (tol 1e-8), alpha=2 degenerate at 4: {flagged}, {elapsed:.2} s (limit 1 s)"),
    )
}

/// Mode `m` spectra by shooting equal the mode-zero closed form plus `m²`.
fn criterion_2() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for bc in [sep(1.3, -0.5), sep(1.0, 0.3), sep(3.1, -0.5)] {
        let base_box = SearchBox::new(-3.0, 70.0, -10.0, 10.0)?;
        let zero = find_eigenvalues(&problem(Curvature::Zero, 0), &bc, &base_box, &quiet())?.into_complete()?;
        for m in [1, 2] {
            let p = problem(Curvature::Zero, m);
            let shift = (m * m) as f64;
            let f = CharFn::shooting(&p, &bc, 1e-12)?;
            let r = find_with(&f, &p, &bc, &zero.search_box.shifted(shift), &quiet())?.into_complete()?;
            let shifted: Vec<Complex64> = expand(&zero.eigenvalues).iter().map(|z| z + shift).collect();
            let got = expand(&r.eigenvalues);
            if got.len() != shifted.len() {
                return outcome(false, format!("m={m}: {} levels vs {} shifted", got.len(), shifted.len()));
            }
            worst = worst.max(pair_nearest(&shifted, &got)?.1);
        }
    }
    outcome(worst <= 1e-8, format!("max |lambda_m - lambda_0 - m^2| = {worst:.2e} (tol 1e-8)"))
}

/// No nonreal level for `β > 0` in 200 random flat cases.
fn criterion_3() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cases: Vec<(f64, f64)> = (0..200).map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(0.01..3.0))).collect();
    let worst = cases
        .par_iter()
        .map(|&(alpha, beta)| {
            let bc = sep(alpha, beta);
            let p = problem(Curvature::Zero, 0);
            let r = find_eigenvalues(&p, &bc, &lowest_levels_box(&p, &bc, 6), &quiet())?.into_complete()?;
            Ok(r.eigenvalues.iter().map(|e| e.lambda.im.abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && elapsed < 120.0,
        format!("max |Im lambda| = {worst:.2e} (tol 1e-8) over 200 cases, {elapsed:.1} s (limit 120 s)"),
    )
}

fn alpha_sweep(k: Curvature, m: i64, beta: f64) -> Result<Vec<Branch>> {
    let grid = uniform_grid(0.0, 6.0, 0.02)?;
    let rect = SearchBox::new(-3.0, 70.0, -12.0, 12.0)?;
    sweep_parameter(&problem(k, m), &sep(0.0, beta), SweepParameter::Alpha, &grid, &rect, &SweepOptions::default())
}

fn nonreal_at(branches: &[Branch], k: usize) -> Vec<Complex64> {
    branches.iter().filter(|b| b.is_present(k)).map(|b| b.values[k]).filter(|z| !is_real(*z)).collect()
}

/// Second pair creation for `K = 0`, `β = −0.5`, and the pair that follows.
fn criterion_4() -> Result<Outcome> {
    let beta = -0.5;
    let branches = alpha_sweep(Curvature::Zero, 0, beta)?;
    let events = all_events(&branches);
    let target = 8.75f64.sqrt();
    let Some(creation) = events
        .iter()
        .filter(|e| e.kind == EventKind::PairCreation)
        .min_by(|a, b| (a.refined_location - target).abs().total_cmp(&(b.refined_location - target).abs()))
    else {
        return outcome(false, "no pair creation detected".into());
    };
    let annihilation = events
        .iter()
        .filter(|e| e.kind == EventKind::PairAnnihilation && e.refined_location > creation.refined_location)
        .map(|e| e.refined_location)
        .next()
        .unwrap_or(f64::INFINITY);
    let location_error = (creation.refined_location - target).abs();

    let grid = &branches[0].parameter_grid;
    let mut one_pair = true;
    let mut re_worst = 0.0_f64;
    let mut samples = 0;
    for (k, &alpha) in grid.iter().enumerate() {
        if alpha <= creation.refined_location || alpha >= annihilation {
            continue;
        }
        samples += 1;
        let z = nonreal_at(&branches, k);
        if z.len() != 2 || (z[0] - z[1].conj()).norm() > 1e-8 * (1.0 + z[0].norm()) {
            one_pair = false;
            continue;
        }
        re_worst = re_worst.max((z[0].re - (alpha * alpha + beta * beta)).abs());
    }
    let at_creation = (creation.lambda.re - (creation.refined_location.powi(2) + beta * beta)).abs();
    outcome(
        location_error <= 5e-2 && one_pair && samples > 0 && re_worst <= 0.5,
        format!(
            "creation at {:.6} vs {target:.6} (|diff| {location_error:.2e}, tol 5e-2); one pair on ({:.4}, {annihilation:.4}): {one_pair}; \
             |Re lambda - (alpha^2+beta^2)| = {at_creation:.3} at creation, max {re_worst:.3} (tol 0.5)",
            creation.refined_location, creation.refined_location
        ),
    )
}

/// Curved shooting against the flat transformed problem.
fn criterion_5() -> Result<Outcome> {
    let mut tuples = Vec::new();
    for k in [Curvature::Positive, Curvature::Negative] {
        for m in 0..3 {
            tuples.push((k, m, sep(1.0 + 0.5 * m as f64, 0.3)));
            tuples.push((k, m, conn(0.5, 0.2, FRAC_PI_3)));
        }
    }
    let devs: Vec<f64> = tuples
        .par_iter()
        .map(|(k, m, bc)| Ok(verify_equivalence(&problem(*k, *m), bc, 5, &SearchOptions::default())?.deviation))
        .collect::<Result<_>>()?;
    let worst = devs.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-7, format!("{} tuples, max route deviation {worst:.2e} (tol 1e-7)", tuples.len()))
}

/// Extrapolated finite differences on grids 400 and 800 against shooting.
fn criterion_6() -> Result<Outcome> {
    let cases = [
        (Curvature::Zero, 0, sep(1.0, 0.5)),
        (Curvature::Zero, 1, sep(3.0, -0.5)),
        (Curvature::Zero, 0, conn(0.5, 0.2, 1.0)),
        (Curvature::Positive, 0, sep(1.0, 0.0)),
        (Curvature::Positive, 1, sep(2.0, -0.3)),
        (Curvature::Positive, 0, conn(0.5, 0.2, FRAC_PI_2)),
        (Curvature::Negative, 1, sep(2.0, 0.0)),
        (Curvature::Negative, 0, sep(0.5, 0.4)),
        (Curvature::Negative, 0, conn(0.3, -0.5, -1.0)),
    ];
    let devs: Vec<f64> = cases
        .par_iter()
        .map(|(k, m, bc)| Ok(oracle::compare(&problem(*k, *m), bc, 5, 400, true)?.deviation))
        .collect::<Result<_>>()?;
    let worst = devs.iter().copied().fold(0.0, f64::max);
    outcome(worst <= 1e-4, format!("{} cases, max |shooting - oracle| {worst:.2e} (tol 1e-4)", cases.len()))
}

/// Conjugate partners and the adjoint mirror.
fn criterion_7() -> Result<Outcome> {
    let cases = [
        (Curvature::Zero, 0, sep(3.1, -0.5)),
        (Curvature::Zero, 0, conn(0.01, 0.01, 2.0)),
        (Curvature::Positive, 0, sep(2.0, -0.3)),
        (Curvature::Positive, 1, conn(0.5, 0.2, FRAC_PI_2)),
        (Curvature::Negative, 0, sep(2.0, 0.0)),
        (Curvature::Negative, 2, conn(0.3, -0.5, -1.0)),
    ];
    let rows: Vec<(f64, f64, usize)> = cases
        .par_iter()
        .map(|(k, m, bc)| {
            let p = problem(*k, *m);
            let r = find_eigenvalues(&p, bc, &lowest_levels_box(&p, bc, 6), &quiet())?.into_complete()?;
            let own = expand(&r.eigenvalues);
            let mut pair = 0.0_f64;
            let mut nonreal = 0;
            for z in own.iter().filter(|z| !is_real(**z)) {
                nonreal += 1;
                let d = own.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
                pair = pair.max(d);
            }
            let adj = find_eigenvalues(&p, &bc.adjoint(), &r.search_box.conj(), &quiet())?.into_complete()?;
            let mirrored: Vec<Complex64> = expand(&adj.eigenvalues).iter().map(|z| z.conj()).collect();
            let mirror = if mirrored.len() == own.len() { pair_nearest(&own, &mirrored)?.1 } else { f64::INFINITY };
            Ok((pair, mirror, nonreal))
        })
        .collect::<Result<_>>()?;
    let pair = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let mirror = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let nonreal: usize = rows.iter().map(|r| r.2).sum();
    outcome(
        pair <= 1e-8 && mirror <= 1e-8 && nonreal > 0,
        format!("{nonreal} nonreal levels, max partner gap {pair:.2e}, max adjoint mirror gap {mirror:.2e} (tol 1e-8)"),
    )
}

fn all_real(branches: &[Branch]) -> bool {
    branches.iter().all(|b| (0..b.values.len()).all(|k| !b.is_present(k) || is_real(b.values[k])))
}

fn has_pair_events(branches: &[Branch]) -> bool {
    let events = all_events(branches);
    events.iter().any(|e| e.kind == EventKind::PairCreation) && events.iter().any(|e| e.kind == EventKind::PairAnnihilation)
}

/// Qualitative facts of the parameter sweeps.
fn criterion_8() -> Result<Outcome> {
    let start = Instant::now();
    let mut facts = Vec::new();

    let sphere: Vec<Vec<Branch>> = (0..3).into_par_iter().map(|m| alpha_sweep(Curvature::Positive, m, 0.0)).collect::<Result<_>>()?;
    facts.push(("K=+1 real", sphere.iter().all(|b| all_real(b) && !has_pair_events(b))));

    let flat = alpha_sweep(Curvature::Zero, 0, 0.0)?;
    let crossings: Vec<f64> = all_events(&flat).iter().filter(|e| e.kind == EventKind::Crossing).map(|e| e.refined_location).collect();
    let at_kj = [2.0, 4.0].iter().all(|k| crossings.iter().any(|c| (c - k).abs() <= 1e-6))
        && crossings.iter().all(|c| ((c / 2.0).round() * 2.0 - c).abs() <= 1e-6);
    facts.push(("K=0 beta=0 crossings at k_j", at_kj && all_real(&flat)));

    let pseudo = alpha_sweep(Curvature::Negative, 0, 0.0)?;
    facts.push(("K=-1 pairs", has_pair_events(&pseudo)));

    let positive = alpha_sweep(Curvature::Zero, 0, 0.5)?;
    facts.push(("K=0 beta>0 real", all_real(&positive) && !has_pair_events(&positive)));

    let negative = alpha_sweep(Curvature::Zero, 0, -0.5)?;
    facts.push(("K=0 beta<0 pairs", has_pair_events(&negative)));

    let p = problem(Curvature::Zero, 0);
    let template = conn(0.01, 0.01, 0.0);
    let grid: Vec<f64> = uniform_grid(-std::f64::consts::PI, std::f64::consts::PI, 0.02)?.into_iter().filter(|t| *t < std::f64::consts::PI).collect();
    let phi = sweep_parameter(&p, &template, SweepParameter::Phi, &grid, &lowest_levels_box(&p, &template, 4), &SweepOptions::default())?;
    let paired = (0..phi[0].parameter_grid.len()).all(|k| {
        let z = nonreal_at(&phi, k);
        z.iter().all(|a| z.iter().any(|b| (a - b.conj()).norm() <= 1e-8 * (1.0 + a.norm())))
    });
    let any_complex = (0..phi[0].parameter_grid.len()).any(|k| !nonreal_at(&phi, k).is_empty());
    facts.push(("connected phi sweep conjugate-paired", paired && any_complex));

    let elapsed = start.elapsed().as_secs_f64();
    let failed: Vec<&str> = facts.iter().filter(|f| !f.1).map(|f| f.0).collect();
    let detail = if failed.is_empty() {
        format!("{} facts hold, {elapsed:.1} s (limit 600 s)", facts.len())
    } else {
        format!("failed: {}; {elapsed:.1} s (limit 600 s)", failed.join(", "))
    };
    outcome(failed.is_empty() && elapsed < 600.0, detail)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 8] = [
        ("flat closed-form spectrum", criterion_1),
        ("m-shift", criterion_2),
        ("beta > 0 reality", criterion_3),
        ("exceptional-point location", criterion_4),
        ("unitary equivalence", criterion_5),
        ("oracle agreement", criterion_6),
        ("PT pairing and adjoint symmetry", criterion_7),
        ("sweep phenomenology", criterion_8),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {}: {} {name}: {detail} [{:.1} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failures == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
