//! Backward SDE sampling of the double well and the Follmer cost of a Gaussian.

use polchinski::lattice::Schedule;
use polchinski::model::ContinuousModel;
use polchinski::potential::Potential;
use polchinski::stats::{mean_stderr, variance};
use polchinski::stochastic::{follmer_cost, localization_sample, SdeConfig};

fn main() -> polchinski::Result<()> {
    let sched = Schedule::unit_1d(1.0);
    let dw = ContinuousModel::single_site(1.0, Potential::double_well(1.0));
    let s = localization_sample(&dw, &sched, 20_000, 1000, 7)?;
    let m = mean_stderr(&s.samples);
    println!("double well: mean {:.4} +- {:.4}, variance {:.4}", m.mean, m.stderr, variance(&s.samples));

    let gauss = ContinuousModel::single_site(1.0, Potential::quadratic(1.0));
    let rep = follmer_cost(&gauss, &sched, &SdeConfig { steps: 1000, count: 20_000, seed: 7, ..Default::default() })?;
    println!("Follmer cost {:.5} +- {:.5}, relative entropy {:.5}", rep.cost.mean, rep.cost.stderr, rep.reference);
    Ok(())
}
