//! Hopf-Lax solutions with shocks, and Curie-Weiss free energies approaching their limit.

use polchinski::hj::{curie_weiss_free_energy, hopf_lax_grid, potential_initial, HopfLaxOptions, Spins};
use polchinski::potential::Potential;

fn main() -> polchinski::Result<()> {
    let well = Potential::double_well(1.0);
    let v0 = potential_initial(&well, 1.0);
    let phis = [-1.0, -0.5, 0.0, 0.5, 1.0];
    for h in hopf_lax_grid(&v0, 0.5, &phis, &HopfLaxOptions::default())? {
        println!("phi={:>5} V={:.6} minimisers={:.4?}{}", h.phi, h.value, h.minimisers, if h.shock { " shock" } else { "" });
    }
    let limit = curie_weiss_free_energy(Spins::Infinite, 2.0, 0.0)?;
    for n in [10, 100, 1000, 10_000] {
        let f = curie_weiss_free_energy(Spins::Finite(n), 2.0, 0.0)?;
        println!("N={n:<6} F_N - F = {:.3e}", f - limit);
    }
    Ok(())
}
