//! Pair creation and annihilation along `α` for the three curvatures.

use std::f64::consts::FRAC_PI_4;

use ptcurved::model::{BoundaryCondition, Curvature, TransverseProblem};
use ptcurved::spectrum::SearchBox;
use ptcurved::sweep::{all_events, sweep_parameter, uniform_grid, SweepOptions, SweepParameter};

fn main() -> ptcurved::Result<()> {
    let grid = uniform_grid(0.0, 6.0, 0.02)?;
    let rect = SearchBox::new(-3.0, 60.0, -12.0, 12.0)?;
    for (k, beta) in [(Curvature::Zero, -0.5), (Curvature::Positive, 0.0), (Curvature::Negative, 0.0)] {
        let p = TransverseProblem::new(k, 0, FRAC_PI_4)?;
        let bc = BoundaryCondition::separated(0.0, beta)?;
        let branches = sweep_parameter(&p, &bc, SweepParameter::Alpha, &grid, &rect, &SweepOptions::default())?;
        println!("{k:?}, beta = {beta}: {} branches", branches.len());
        for e in all_events(&branches) {
            println!("  {:<18} alpha = {:.6}  lambda = {:.5}", e.kind.name(), e.refined_location, e.lambda);
        }
    }
    Ok(())
}
