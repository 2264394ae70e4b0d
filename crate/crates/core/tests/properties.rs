use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use vvbath::cce::{cce_coherence, CceOptions, SpinSystem};
use vvbath::ddgate::{magnetization_from_fields, SequenceKind};
use vvbath::fit::{fit_exp_decay, fit_stretched_points};
use vvbath::hyperfine::{ElectronModel, HyperfineModel};
use vvbath::lattice::{enumerate_sites, sample_bath, CrystalModel, IsotopeModel};
use vvbath::rbench::{average_gate_fidelity, sample_sequences, sequence_survival, CliffordGroup};
use vvbath::register::{
    apply_gate, optical_reinit_electron, ppt_min_eigenvalue, werner_state, GateOp, NoiseModel, RegisterState,
};
use vvbath::su2::Su2;

fn vec3(scale: f64) -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-scale..scale)
}

fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

fn gate() -> impl Strategy<Value = GateOp> {
    let theta = -6.3..6.3f64;
    prop_oneof![
        Just(GateOp::Identity),
        theta.clone().prop_map(|theta| GateOp::ElectronRot { theta }),
        theta.clone().prop_map(|theta| GateOp::NuclearRot { nucleus: 1, theta }),
        (theta.clone(), 0u8..2).prop_map(|(theta, control)| GateOp::CnRotE {
            nucleus: 1,
            control,
            theta
        }),
        (theta, 0u8..2).prop_map(|(theta, control)| GateOp::CeRotN {
            nucleus: 1,
            control,
            theta
        }),
        (0u8..2).prop_map(|control| GateOp::CnNotE { nucleus: 1, control }),
        (0u8..2).prop_map(|control| GateOp::CeNotN { nucleus: 1, control }),
        Just(GateOp::Swap { nucleus: 1 }),
    ]
}

#[test]
fn identical_branches_near_half_turn() {
    let h = [102888.88453383966, 18640.18735703606, 409132.7569998295];
    assert!((magnetization_from_fields(h, h, 70, 5.5780504944075455e-5) - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn propagators_are_unitary(h in vec3(1e6), t in 0.0..1e-3f64) {
        let u = Su2::evolve(h, t);
        prop_assert!((u.mul(u.adjoint()).trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn magnetization_is_bounded(h0 in vec3(1e6), h1 in vec3(1e6), half in 1u32..64, tau in 1e-8..1e-4f64) {
        let m = magnetization_from_fields(h0, h1, 2 * half, tau);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&m));
    }

    #[test]
    fn identical_branches_give_no_contrast(h in vec3(1e6), half in 1u32..64, tau in 1e-8..1e-4f64) {
        prop_assert!((magnetization_from_fields(h, h, 2 * half, tau) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_gates_keep_a_density_matrix(
        gates in prop::collection::vec(gate(), 1..6),
        p in 0.0..1.0f64,
        reinit in 0.5..1.0f64,
    ) {
        let noise = NoiseModel { p_gate: p, reinit_fidelity: reinit, readout_error: 0.0 };
        let mut s = RegisterState::maximally_mixed(2).unwrap();
        s = apply_gate(&s, &GateOp::NuclearRot { nucleus: 1, theta: 0.7 }, &NoiseModel::NOISELESS).unwrap();
        for g in &gates {
            s = apply_gate(&s, g, &noise).unwrap();
            s = optical_reinit_electron(&s, &noise).unwrap();
        }
        prop_assert!((s.trace() - 1.0).abs() < 1e-10);
        prop_assert!(min_eigenvalue(s.matrix()) > -1e-10);
        prop_assert!(s.purity() <= 1.0 + 1e-10);
    }

    #[test]
    fn werner_partial_transpose_is_linear(p in 0.0..1.0f64) {
        let lam = ppt_min_eigenvalue(&werner_state(p)).unwrap();
        prop_assert!((lam - (1.0 - 3.0 * p) / 4.0).abs() < 1e-10);
    }

    #[test]
    fn recovery_returns_to_identity(n in 1usize..200, seed in any::<u64>()) {
        let group = CliffordGroup::get();
        let seq = &sample_sequences(&[n], 1, seed).unwrap()[0];
        let mut all = seq.gates.clone();
        all.push(seq.recovery);
        prop_assert_eq!(group.product(&all), 0);
        prop_assert!((sequence_survival(seq, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn survival_follows_depolarizing_decay(n in 1usize..300, p in 0.0..0.02f64, seed in any::<u64>()) {
        let seq = &sample_sequences(&[n], 1, seed).unwrap()[0];
        let want = 0.5 + 0.5 * (1.0 - p).powi(n as i32 + 1);
        prop_assert!((sequence_survival(seq, p) - want).abs() < 1e-10);
    }

    #[test]
    fn exponential_fit_recovers_generator(a in 0.2..0.5f64, p in 0.95..0.9999f64, b in 0.3..0.5f64) {
        let x: Vec<f64> = [1.0, 5.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0].to_vec();
        let y: Vec<f64> = x.iter().map(|&n| a * p.powf(n) + b).collect();
        let fit = fit_exp_decay(&x, &y);
        prop_assert!((fit.p - p).abs() < 1e-6, "{} vs {}", fit.p, p);
        prop_assert!((average_gate_fidelity(fit.p) - average_gate_fidelity(p)).abs() < 1e-6);
    }

    #[test]
    fn stretched_fit_recovers_generator(t2 in 1e-5..1e-1f64, n in 0.8..3.5f64) {
        let t: Vec<f64> = (0..200).map(|i| t2 * 10f64.powf(-2.0 + 3.0 * i as f64 / 199.0)).collect();
        let l: Vec<f64> = t.iter().map(|&x| (-(x / t2).powf(n)).exp()).collect();
        let fit = fit_stretched_points(&t, &l).unwrap();
        prop_assert!((fit.t2 / t2 - 1.0).abs() < 1e-3);
        prop_assert!((fit.n - n).abs() < 0.02);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coherence_starts_at_one_and_stays_bounded(seed in any::<u64>(), n in 1u32..5) {
        let electron = ElectronModel::with_field_gauss(300.0);
        let sites = enumerate_sites(&CrystalModel::default(), 2.0).unwrap();
        let mut bath = sample_bath(&sites, &IsotopeModel::NATURAL, seed).unwrap();
        let hf = HyperfineModel::default();
        bath.spins.retain(|s| !hf.is_tabulated(&s.site));
        hf.attach(&mut bath).unwrap();
        let system = SpinSystem::nuclear(&bath, &electron).unwrap();
        let times = [0.0, 1e-5, 1e-4, 1e-3, 1e-2];
        let kind = if n == 1 { SequenceKind::Hahn } else { SequenceKind::Cpmg };
        let c = cce_coherence(&system, kind, n, &times, &CceOptions::default()).unwrap();
        prop_assert!((c.l[0] - 1.0).abs() < 1e-12);
        for (l, flagged) in c.l.iter().zip(&c.flagged) {
            if !flagged {
                prop_assert!(l.abs() <= 1.0 + 1e-9);
            }
        }
    }
}
