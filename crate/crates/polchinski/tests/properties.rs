use proptest::prelude::*;

use polchinski::hj::{self, HopfLaxOptions, Spins};
use polchinski::ising::{covariance_domination, IsingModel};
use polchinski::lattice::{Schedule, TimeMap};
use polchinski::lsi::{self, SpinMeasure};
use polchinski::model::ContinuousModel;
use polchinski::potential::Potential;
use polchinski::renorm::{tilt_with, Backend};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaussian_convolution_is_exact(m in 0.1f64..5.0, t in 0.01f64..2.0, x in -3.0f64..3.0) {
        let sched = Schedule::unit_1d(2.0);
        let model = ContinuousModel::single_site(0.5, Potential::quadratic(m));
        let c = sched.eval(t).unwrap().c;
        let w = tilt_with(&model, &c, &[x], Backend::Quadrature { order: None }).unwrap();
        let s = t + 1.0 / m;
        prop_assert!((-w.log_mass - (x * x / (2.0 * s) + 0.5 * (m * t).ln_1p())).abs() < 1e-9);
        prop_assert!((w.hess[(0, 0)] - 1.0 / s).abs() < 1e-9);
    }

    #[test]
    fn time_maps_invert(p in 1.0f64..4.0, s in 0.0f64..3.0) {
        let map = TimeMap::Power { p };
        prop_assert!((map.value(map.inverse(s)) - s).abs() < 1e-12 * (1.0 + s));
    }

    #[test]
    fn high_temperature_inequality_on_small_rings(n in 3usize..6, beta in 0.0f64..0.9, seed in any::<u64>()) {
        let ring = IsingModel::ring(n, beta).unwrap();
        let sweep = lsi::check_entropy_inequality(&ring, lsi::high_temperature_constant(beta), 20, seed).unwrap();
        prop_assert!(sweep.min_slack >= -1e-12, "slack {}", sweep.min_slack);
    }

    #[test]
    fn entropy_is_nonnegative_and_vanishes_on_constants(n in 2usize..6, beta in 0.0f64..2.0, c in 0.1f64..10.0) {
        let m = SpinMeasure::of(&IsingModel::ring(n.max(3), beta).unwrap()).unwrap();
        let f = vec![c; m.probs.len()];
        prop_assert!(m.entropy(&f).unwrap().abs() < 1e-12);
        let g: Vec<f64> = (0..m.probs.len()).map(|i| 1.0 + (i % 3) as f64).collect();
        prop_assert!(m.entropy(&g).unwrap() >= 0.0);
    }

    #[test]
    fn ferromagnetic_covariance_peaks_at_zero_field(seed in any::<u64>()) {
        let c = covariance_domination(2, 3, 6, seed).unwrap();
        prop_assert!(c.min_slack >= -1e-12);
    }

    #[test]
    fn hopf_lax_lies_below_the_datum(x in -2.0f64..2.0, t in 0.01f64..1.0) {
        let well = Potential::double_well(1.0);
        let v0 = hj::potential_initial(&well, 1.0);
        let h = hj::hopf_lax(&v0, t, x, &HopfLaxOptions::default()).unwrap();
        prop_assert!(h.value <= well.value(x) + 1e-12);
        prop_assert!(h.value >= -1e-12);
    }

    #[test]
    fn curie_weiss_magnetisation_is_bounded(n in 1u64..500, beta in 0.0f64..3.0, h in -2.0f64..2.0) {
        let p = hj::curie_weiss(Spins::Finite(n), beta, h).unwrap();
        prop_assert!(p.magnetisation.abs() <= 1.0 + 1e-12);
        prop_assert!(p.second_moment + 1e-12 >= p.magnetisation * p.magnetisation);
    }
}
