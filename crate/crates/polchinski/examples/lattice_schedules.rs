//! Covariance schedules on a periodic lattice: C_t, Ċ_t and the transport scaling D_t mode by mode.

use polchinski::lattice::{build_torus, Schedule};
use polchinski::transport::scaling_modes;

fn main() -> polchinski::Result<()> {
    let torus = build_torus(2, 4.0, 1.0)?;
    let coupling = torus.laplacian().shifted(1.0);
    println!("{} sites, spectrum {:.3}..{:.3}", torus.sites(), coupling.eigen.min(), coupling.eigen.max());
    for sched in [Schedule::heat(coupling.clone(), 20.0)?, Schedule::pauli_villars(coupling, 20.0)?] {
        println!("{}", sched.describe());
        for t in [0.1, 1.0, 3.0] {
            let m = sched.modes(t)?;
            let d = scaling_modes(&sched, t)?;
            println!("  t={t:<5} c(lowest)={:.5} cdot(lowest)={:.5} D(lowest)={:.5}", m.c[0], m.cdot[0], d[0]);
        }
    }
    Ok(())
}
