use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use vvbath::register::{bell_fidelity, bell_target, qst, RegisterState, Tomography};

#[test]
fn shot_tomography_of_a_bell_state() {
    let rho = RegisterState::from_pure(&bell_target()).unwrap().matrix().clone();
    let mut fidelities: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let est = qst(&rho, Tomography::Shots { shots: 10_000, seed }, 0.0, true).unwrap();
            bell_fidelity(&est)
        })
        .collect();
    fidelities.sort_by(f64::total_cmp);
    let median = 0.5 * (fidelities[49] + fidelities[50]);
    assert!(median > 0.98, "median fidelity {median}");
}

#[test]
fn zero_shots_is_rejected() {
    let rho = DMatrix::<Complex64>::identity(4, 4) * Complex64::new(0.25, 0.0);
    assert!(qst(&rho, Tomography::Shots { shots: 0, seed: 1 }, 0.0, true).is_err());
}
