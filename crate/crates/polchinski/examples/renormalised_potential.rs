//! V_t for the double well by Gaussian quadrature and by the Polchinski PDE.

use polchinski::lattice::Schedule;
use polchinski::model::ContinuousModel;
use polchinski::pde::polchinski_pde_solve_1d;
use polchinski::potential::Potential;
use polchinski::renorm::{renorm_potential, Backend};

fn main() -> polchinski::Result<()> {
    let v0 = Potential::double_well(1.0);
    let model = ContinuousModel::single_site(1.0, v0.clone());
    let sched = Schedule::unit_1d(1.0);
    let grid = polchinski_pde_solve_1d(&v0, &sched, 4.0, 801, 0.5)?;
    println!("{:>6} {:>14} {:>14}", "phi", "quadrature", "pde");
    for i in (200..=600).step_by(50) {
        let x = grid.x(i);
        let q = renorm_potential(&model, &sched, 0.5, &[x], Backend::Quadrature { order: None })?.value;
        println!("{x:>6.2} {q:>14.8} {:>14.8}", grid.values[i]);
    }
    Ok(())
}
