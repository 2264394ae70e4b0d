//! Core dynamics and expansions against the brute-force references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vvbath::cce::{build_clusters, cce_coherence_with_clusters, Cluster, DIVISION_GUARD};
use vvbath::ddgate::{magnetization, magnetization_from_fields, resonance_tau, Nucleus, SequenceKind};
use vvbath::hyperfine::{ElectronModel, HyperfineModel, SpinSpecies, GAMMA_C13, GAMMA_SI29};
use vvbath::lattice::{enumerate_sites, CrystalModel, Element, IsotopeModel};
use vvbath::memcensus::{site_crosstalk, CensusEngine, FidelityModel, MemoryCriteria};
use vvbath::{hz_to_rad, TWO_PI};
use vvbath_validation::oracle::{exact_coherence, product_magnetization, random_bath};

#[test]
fn closed_form_magnetization_matches_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mut field = || {
            let w = TWO_PI * 10f64.powf(rng.random_range(3.0..6.5));
            let th = rng.random_range(0.0..std::f64::consts::PI);
            let ph = rng.random_range(0.0..TWO_PI);
            [w * th.sin() * ph.cos(), w * th.sin() * ph.sin(), w * th.cos()]
        };
        let (h0, h1) = (field(), field());
        let n = 2 * rng.random_range(1..=32u32);
        let tau = 10f64.powf(rng.random_range(-7.0..-4.0));
        let a = magnetization_from_fields(h0, h1, n, tau);
        let b = product_magnetization(h0, h1, n, tau);
        worst = worst.max((a - b).abs());
    }
    assert!(worst < 1e-9, "worst deviation {worst:e}");
}

#[test]
fn resonance_formula_locates_dips() {
    let electron = ElectronModel::with_field_gauss(500.0);
    for (species, gamma) in [
        (SpinSpecies::for_element(Element::C), GAMMA_C13),
        (SpinSpecies::for_element(Element::Si), GAMMA_SI29),
    ] {
        let omega_l = gamma.abs() * electron.field_t;
        for a_par_khz in [-30.0, 4.0, 25.0] {
            for ratio in [0.005, 0.02] {
                let nucleus = Nucleus::new(species, hz_to_rad(a_par_khz * 1e3), ratio * omega_l);
                let shift = nucleus.precession_shift(&electron);
                for k in 0..=8u32 {
                    let tk = resonance_tau(k, omega_l, shift).unwrap();
                    let n = 16;
                    let grid: Vec<f64> = (0..4001).map(|i| tk * (0.97 + 0.06 * i as f64 / 4000.0)).collect();
                    let (best, _) = grid
                        .iter()
                        .map(|&t| (t, magnetization(&nucleus, &electron, n, t).unwrap()))
                        .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
                    let rel = (best - tk).abs() / tk;
                    assert!(rel < 0.01, "{species:?} A={a_par_khz} kHz ratio {ratio} k={k}: {rel:e}");
                }
            }
        }
    }
}

#[test]
fn full_order_expansion_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let electron = ElectronModel::with_field_gauss(300.0);
    let times: Vec<f64> = (0..40).map(|i| 2e-6 * 1.25f64.powi(i)).collect();
    for trial in 0..6 {
        let size = 2 + trial % 3;
        let system = random_bath(&mut rng, size, &electron, 1.4);
        let clusters = build_clusters(&system, size, f64::INFINITY).unwrap();
        for (kind, n) in [
            (SequenceKind::Ramsey, 0),
            (SequenceKind::Hahn, 1),
            (SequenceKind::Cpmg, 2),
            (SequenceKind::Cpmg, 3),
        ] {
            let c = cce_coherence_with_clusters(&system, &clusters, kind, n, &times, DIVISION_GUARD).unwrap();
            for (k, &t) in times.iter().enumerate() {
                if c.flagged[k] {
                    continue;
                }
                let exact = exact_coherence(&system, kind, n, t);
                assert!(
                    (c.l[k] - exact).abs() < 1e-9,
                    "size {size} {kind:?} N={n} t={t:e}: {} vs {exact}",
                    c.l[k]
                );
            }
        }
    }
}

#[test]
fn pair_expansion_close_on_three_spins() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let electron = ElectronModel::with_field_gauss(300.0);
    let times: Vec<f64> = (0..50).map(|i| 2e-6 * 1.25f64.powi(i)).collect();
    let mut checked = 0;
    for _ in 0..8 {
        let system = random_bath(&mut rng, 3, &electron, 3.0);
        let pairs = build_clusters(&system, 2, f64::INFINITY).unwrap();
        let c = cce_coherence_with_clusters(&system, &pairs, SequenceKind::Hahn, 1, &times, DIVISION_GUARD).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let exact = exact_coherence(&system, SequenceKind::Hahn, 1, t);
            if exact > 0.2 {
                assert!((c.l[k] - exact).abs() < 0.02, "t={t:e}: {} vs {exact}", c.l[k]);
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn single_clusters_reproduce_the_product_of_singles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let electron = ElectronModel::with_field_gauss(300.0);
    let system = random_bath(&mut rng, 3, &electron, 1.4);
    let singles: Vec<Cluster> = (0..3).map(|i| Cluster::new(vec![i]).unwrap()).collect();
    let times = [1e-5, 1e-4, 1e-3];
    let c = cce_coherence_with_clusters(&system, &singles, SequenceKind::Cpmg, 4, &times, DIVISION_GUARD).unwrap();
    for (k, &t) in times.iter().enumerate() {
        let tau = t / 8.0;
        let want: f64 = system
            .spins
            .iter()
            .map(|s| {
                let h0 = [0.0, 0.0, s.omega];
                let h1 = [-s.coupling[0], -s.coupling[1], s.omega - s.coupling[2]];
                product_magnetization(h0, h1, 4, tau)
            })
            .product();
        assert!((c.l[k] - want).abs() < 1e-10);
    }
}

#[test]
fn census_engine_matches_direct_crosstalk() {
    let sites = enumerate_sites(&CrystalModel::default(), 2.5).unwrap();
    let electron = ElectronModel::with_field_gauss(500.0);
    let hf = HyperfineModel::default();
    let engine = CensusEngine::build(&sites, &hf, &electron, std::f64::consts::FRAC_PI_2, 6, 1.5e-3, 0.5).unwrap();
    let criteria = MemoryCriteria {
        f_min: 0.5,
        ..MemoryCriteria::default()
    };
    for c in [1e-3, 1e-2, 0.05] {
        let iso = IsotopeModel::uniform(c).unwrap();
        let records = engine.records(&iso, &criteria, FidelityModel::Crosstalk).unwrap();
        let mut compared = 0;
        for r in records.iter().filter(|r| r.design.is_some()) {
            let target = sites.iter().position(|s| s.index == r.site_index).unwrap();
            let direct = site_crosstalk(target, &r.design.unwrap(), &sites, &hf, &iso, &electron).unwrap();
            assert!(
                (r.crosstalk - direct).abs() < 1e-10,
                "c={c} site {}: {} vs {direct}",
                r.site_index,
                r.crosstalk
            );
            compared += 1;
        }
        assert!(compared > 0);
    }
}

/// Pair-order error against sampling radius; close-packed triples are not
/// pair-dominated and deviate well beyond 0.02.
#[test]
#[ignore]
fn pair_deviation_survey() {
    let electron = ElectronModel::with_field_gauss(300.0);
    let times: Vec<f64> = (0..50).map(|i| 2e-6 * 1.25f64.powi(i)).collect();
    for radius in [1.4, 2.0, 3.0, 4.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        let mut bad = 0;
        for _ in 0..40 {
            let system = random_bath(&mut rng, 3, &electron, radius);
            let pairs = build_clusters(&system, 2, f64::INFINITY).unwrap();
            let c =
                cce_coherence_with_clusters(&system, &pairs, SequenceKind::Hahn, 1, &times, DIVISION_GUARD).unwrap();
            let mut w: f64 = 0.0;
            for (k, &t) in times.iter().enumerate() {
                let exact = exact_coherence(&system, SequenceKind::Hahn, 1, t);
                if exact > 0.2 {
                    w = w.max((c.l[k] - exact).abs());
                }
            }
            if w > 0.02 {
                bad += 1;
            }
            worst = worst.max(w);
        }
        println!("radius {radius}: worst {worst:.4} baths over 0.02: {bad}/40");
    }
}
