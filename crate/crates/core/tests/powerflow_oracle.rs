//! The sweep solver against independent references: the closed-form 2-bus
//! solution and a dense nodal-admittance solve on random radial feeders.

mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::nodal::*;
use umbra_core::feeder::*;

#[test]
fn sweep_matches_nodal_solve_on_random_feeders() {
    let (worst, worst_balance) = sweep_vs_nodal(2024, 100);
    assert!(worst <= 1e-7, "max |ΔV| = {worst:e}");
    assert!(worst_balance <= 1e-6, "max balance residual = {worst_balance:e}");
}

#[test]
fn two_bus_matches_quadratic() {
    let worst = two_bus_error(7, 50);
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn closed_form_is_exact_for_a_lossless_unloaded_line() {
    assert_eq!(two_bus_closed_form(C::new(0.01, 0.02), C::new(0.0, 0.0), 1.03), 1.03);
}

#[test]
fn zero_injection_is_flat_and_lossless() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let case = random_case(&mut rng);
    let zero = Injections::zero(&case.model);
    let taps = vec![[0; 3]; case.taps.len()];
    let sol = solve_powerflow(&case.model, &taps, &zero).unwrap();
    let vs = case.model.spec().source.voltage_pu;
    for b in 0..case.model.bus_count() {
        for p in case.model.bus_phases(b).iter() {
            assert!((sol.magnitude(b, p).unwrap() - vs).abs() < 1e-12);
        }
    }
    assert_eq!(sol.losses, C::new(0.0, 0.0));
}
