//! Exact Ising moments, the Glauber gap, and samples of a continuous single-site measure.

use polchinski::ising::{ising_moments, IsingModel, Method};
use polchinski::lsi::glauber_gap;
use polchinski::model::ContinuousModel;
use polchinski::potential::Potential;
use polchinski::sampling::renorm_measure_grid;
use polchinski::lattice::Schedule;

fn main() -> polchinski::Result<()> {
    let ring = IsingModel::ring(8, 0.3)?;
    let m = ising_moments(&ring, None, Method::Auto)?;
    println!("ring N=8 beta=0.3: <s0 s1> = {:.6}, log Z = {:.6}", m.cov[(0, 1)], m.log_z);
    println!("Glauber spectral gap = {:.6}", glauber_gap(&ring)?);

    let model = ContinuousModel::single_site(1.0, Potential::double_well(1.0));
    let grid = renorm_measure_grid(&model, &Schedule::unit_1d(1.0), 0.0, 4000)?;
    let (mean, var) = grid.moments();
    let xs = grid.sample(5, 1);
    println!("double well: mean {mean:.3e}, variance {var:.6}, samples {xs:.3?}");
    Ok(())
}
