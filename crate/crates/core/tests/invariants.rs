use proptest::prelude::*;

use theta_wave::spectral::{deriv, helmholtz_apply, helmholtz_solve};
use theta_wave::dynamics::ThetaParam;
use theta_wave::{evolve, Field, Grid, SimConfig};

fn bump(g: Grid, modes: &[(f64, f64)]) -> Field {
    let k0 = 2.0 * std::f64::consts::PI / g.length();
    let v = g
        .points()
        .iter()
        .map(|x| {
            modes
                .iter()
                .enumerate()
                .map(|(j, (a, b))| {
                    let k = k0 * (j + 1) as f64;
                    a * (k * x).cos() + b * (k * x).sin()
                })
                .sum()
        })
        .collect();
    Field::new(g, v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn helmholtz_inverse_round_trip(modes in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)) {
        let g = Grid::new(64, 20.0, -10.0).unwrap();
        let u = bump(g, &modes);
        let back = helmholtz_solve(&helmholtz_apply(&u).unwrap()).unwrap();
        for (a, b) in u.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_of_periodic_field_has_zero_mean(modes in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..8)) {
        let g = Grid::new(64, 20.0, -10.0).unwrap();
        let du = deriv(&bump(g, &modes)).unwrap();
        let mean: f64 = du.values().iter().sum::<f64>() / 64.0;
        prop_assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn mass_is_conserved(theta in 0.0f64..1.0, a in -0.3f64..0.3, b in -0.3f64..0.3) {
        let g = Grid::new(64, 20.0, -10.0).unwrap();
        let u0 = bump(g, &[(a, b), (0.5 * b, 0.5 * a)]);
        let mut cfg = SimConfig::new(ThetaParam::new(theta).unwrap(), 0.2);
        cfg.output_every = 1000;
        let traj = evolve(&u0, &cfg).unwrap();
        let first = traj.diagnostics.first().unwrap().mass_u;
        let last = traj.diagnostics.last().unwrap().mass_u;
        prop_assert!((first - last).abs() < 1e-10, "{first} -> {last}");
    }
}
