//! Log-Sobolev bounds: multiscale Bakry-Emery for a continuous model and Ising rings.

use polchinski::ising::IsingModel;
use polchinski::lattice::{Coupling, Schedule};
use polchinski::lsi::{self, ProfileOptions};
use polchinski::model::ContinuousModel;
use polchinski::potential::Potential;

fn main() -> polchinski::Result<()> {
    let model = ContinuousModel::single_site(2.0, Potential::phi4(1.0, -0.5));
    let sched = Schedule::heat(Coupling::scalar(2.0), 40.0)?;
    let opts = ProfileOptions { per_decade: 10, verify: false, ..Default::default() };
    let (_, rep) = lsi::continuous_lsi_bound(&model, &sched, &opts)?;
    println!("phi4 with r = -0.5: 1/gamma <= {:.6}", rep.inverse_gamma);

    for beta in [0.3, 0.9, 1.5] {
        let ring = IsingModel::ring(8, beta)?;
        let (rep, _) = lsi::ising_lsi_bound(&ring, &ProfileOptions::default())?;
        let ht = lsi::high_temperature_bound(beta);
        println!(
            "ring N=8 beta={beta}: multiscale 1/gamma <= {:.4}, high-temperature {}, gap {:.4}",
            rep.inverse_gamma,
            if ht.divergent { "divergent".to_string() } else { format!("{:.4}", ht.inverse_gamma) },
            lsi::glauber_gap(&ring)?
        );
    }
    Ok(())
}
