//! Transport map of a Gaussian single site, its values along the flow, and the Lipschitz monitor.

use polchinski::lattice::{Coupling, Schedule};
use polchinski::lsi::{criterion_rate, default_rate_setup};
use polchinski::model::ContinuousModel;
use polchinski::potential::Potential;
use polchinski::quadrature::integrate;
use polchinski::renorm::Backend;
use polchinski::transport::{lipschitz_monitor, transport_flow, TransportOptions};

fn main() -> polchinski::Result<()> {
    let model = ContinuousModel::single_site(1.0, Potential::quadratic(1.0));
    let sched = Schedule::pauli_villars(Coupling::scalar(1.0), 10.0)?;
    let opts = TransportOptions { backend: Backend::Quadrature { order: Some(160) }, ..Default::default() };
    let base: Vec<Vec<f64>> = [-1.0, 0.0, 0.5, 2.0].iter().map(|x| vec![*x]).collect();
    let times = [0.5, 1.0, 2.0];
    let states = transport_flow(&model, &sched, &base, &times, &opts)?;
    for st in &states {
        let s: Vec<f64> = st.points.iter().map(|p| p[0]).collect();
        println!("t={:<4} S_t = {s:.5?}", st.t);
    }
    let (probes, backend) = default_rate_setup(&model, &sched)?;
    let rate = criterion_rate(&model, &sched, &probes, backend);
    let lambda = |t: f64| integrate(|s| rate(s).unwrap_or(f64::NAN), 0.0, t, 64);
    let rep = lipschitz_monitor(&states, lambda, &[], 1e-6)?;
    println!("min slack {:?}, passed {}", rep.min_slack, rep.passed);
    Ok(())
}
