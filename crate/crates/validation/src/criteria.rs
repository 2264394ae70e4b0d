//! The acceptance criteria, each evaluated at its stated tolerance.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vvbath::cce::{
    build_clusters, cce_coherence_with_clusters, log_time_grid, total_coherence, CceOptions, CoherenceCurve,
    DIVISION_GUARD,
};
use vvbath::ddgate::{
    design_at_order, magnetization, magnetization_from_fields, resonance_tau, DesignOptions, Nucleus, SequenceKind,
};
use vvbath::ensemble::{coherence_ensemble, member_seeds, summarize, CoherenceRun, NuclearBath, ParamagneticBath};
use vvbath::hyperfine::{ElectronModel, HyperfineModel, SpinSpecies, GAMMA_C13, GAMMA_SI29};
use vvbath::lattice::{enumerate_sites, CrystalModel, Element, IsotopeModel};
use vvbath::memcensus::{concentration_sweep, log_concentrations, CensusEngine, FidelityModel, MemoryCriteria};
use vvbath::rbench::{fit_rb, sample_sequences, simulate_rb};
use vvbath::register::{
    bell_fidelity, entangle_bell, gate_noise, initialized_register, ppt_min_eigenvalue, prepared_bell_fidelity,
    werner_state, NoiseModel, RegisterState, BELL_GATE_NOISE, INIT_GATE_NOISE,
};
use vvbath::{hz_to_rad, TWO_PI};
use vvbath_cli::config::{load_str, Experiment};

use crate::oracle::{exact_coherence, product_magnetization, random_bath};

/// Result of one criterion.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn outcome(id: u32, name: &'static str, checks: &[(bool, String)]) -> Outcome {
    Outcome {
        id,
        name,
        pass: checks.iter().all(|c| c.0),
        detail: checks
            .iter()
            .map(|(ok, s)| if *ok { s.clone() } else { format!("{s} [failed]") })
            .collect::<Vec<_>>()
            .join("; "),
    }
}

pub fn conditional_dynamics() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let mut field = || {
            let w = TWO_PI * 10f64.powf(rng.random_range(3.0..6.5));
            let th = rng.random_range(0.0..PI);
            let ph = rng.random_range(0.0..TWO_PI);
            [w * th.sin() * ph.cos(), w * th.sin() * ph.sin(), w * th.cos()]
        };
        let (h0, h1) = (field(), field());
        let n = 2 * rng.random_range(1..=32u32);
        let tau = 10f64.powf(rng.random_range(-7.0..-4.0));
        worst = worst.max((magnetization_from_fields(h0, h1, n, tau) - product_magnetization(h0, h1, n, tau)).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        1,
        "closed-form magnetization vs SU(2) products",
        &[
            (worst < 1e-9, format!("worst deviation {worst:.1e} over 10^4 cases")),
            (elapsed < 10.0, format!("{elapsed:.2} s")),
        ],
    )
}

pub fn cluster_expansion() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let electron = ElectronModel::with_field_gauss(300.0);
    let times: Vec<f64> = (0..40).map(|i| 2e-6 * 1.25f64.powi(i)).collect();
    let mut worst_full: f64 = 0.0;
    for trial in 0..9 {
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
                if !c.flagged[k] {
                    worst_full = worst_full.max((c.l[k] - exact_coherence(&system, kind, n, t)).abs());
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let times: Vec<f64> = (0..50).map(|i| 2e-6 * 1.25f64.powi(i)).collect();
    let mut worst_pair: f64 = 0.0;
    for _ in 0..20 {
        let system = random_bath(&mut rng, 3, &electron, 3.0);
        let pairs = build_clusters(&system, 2, f64::INFINITY).unwrap();
        let c = cce_coherence_with_clusters(&system, &pairs, SequenceKind::Hahn, 1, &times, DIVISION_GUARD).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let exact = exact_coherence(&system, SequenceKind::Hahn, 1, t);
            if exact > 0.2 {
                worst_pair = worst_pair.max((c.l[k] - exact).abs());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        2,
        "cluster expansion vs full Hilbert space",
        &[
            (worst_full < 1e-9, format!("full order on 2-4 spins {worst_full:.1e}")),
            (worst_pair < 0.02, format!("pair order on 3 spins {worst_pair:.1e}")),
            (elapsed < 60.0, format!("{elapsed:.1} s")),
        ],
    )
}

pub fn resonance_formula() -> Outcome {
    let electron = ElectronModel::with_field_gauss(500.0);
    let mut worst: f64 = 0.0;
    for (species, gamma) in [
        (SpinSpecies::for_element(Element::C), GAMMA_C13),
        (SpinSpecies::for_element(Element::Si), GAMMA_SI29),
    ] {
        let omega_l = gamma.abs() * electron.field_t;
        for a_par_khz in [-30.0, -5.0, 4.0, 25.0] {
            for ratio in [0.005, 0.01, 0.02] {
                let nucleus = Nucleus::new(species, hz_to_rad(a_par_khz * 1e3), ratio * omega_l);
                let shift = nucleus.precession_shift(&electron);
                for k in 0..=8u32 {
                    let tk = resonance_tau(k, omega_l, shift).unwrap();
                    let best = (0..4001)
                        .map(|i| tk * (0.97 + 0.06 * f64::from(i) / 4000.0))
                        .map(|t| (t, magnetization(&nucleus, &electron, 16, t).unwrap()))
                        .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
                        .0;
                    worst = worst.max((best - tk).abs() / tk);
                }
            }
        }
    }
    outcome(
        3,
        "resonance formula locates dips, k = 0..8",
        &[(worst < 0.01, format!("worst relative offset {worst:.1e}"))],
    )
}

pub fn gate_design() -> Outcome {
    let electron = ElectronModel::with_field_gauss(584.0);
    let nucleus = Nucleus::new(SpinSpecies::SI29, hz_to_rad(650.0), hz_to_rad(11.45e3));
    let design = design_at_order(&nucleus, &electron, FRAC_PI_2, 6, 5e-3, &DesignOptions::default());
    let omega_l = (GAMMA_SI29 * electron.field_t).abs();
    let estimate = FRAC_PI_2 * omega_l / nucleus.a_perp;
    let fidelity = design.map_or(0.0, |d| d.fidelity);
    outcome(
        4,
        "conditional pi/2 design at k = 6",
        &[
            (
                design.is_some(),
                format!("design {:?}", design.map(|d| (d.n_pulses, d.tau * 1e6))),
            ),
            (fidelity >= 0.95, format!("intrinsic fidelity {fidelity:.4}")),
            (
                (28.0..=112.0).contains(&estimate),
                format!("linear estimate N = {estimate:.1} vs 56"),
            ),
        ],
    )
}

fn nuclear_median(
    kind: SequenceKind,
    n: u32,
    iso: IsotopeModel,
    times: &[f64],
    order: usize,
    sites: &[vvbath::lattice::LatticeSite],
) -> f64 {
    let run = CoherenceRun {
        sites,
        electron: ElectronModel::with_field_gauss(50.0),
        kind,
        n_pulses: n,
        times,
        cce: CceOptions {
            order,
            ..CceOptions::default()
        },
    };
    let bath = NuclearBath {
        isotopes: iso,
        hyperfine: HyperfineModel::default(),
        exclude_core: true,
    };
    let curves = coherence_ensemble(&run, Some(&bath), None, &member_seeds(1, 50)).unwrap();
    summarize(&curves).unwrap().median_t2
}

fn coherence_sites() -> Vec<vvbath::lattice::LatticeSite> {
    enumerate_sites(&CrystalModel::default(), 10.0).unwrap()
}

pub fn dephasing_time() -> Outcome {
    let sites = coherence_sites();
    let pur = nuclear_median(
        SequenceKind::Ramsey,
        0,
        IsotopeModel::PURIFIED,
        &log_time_grid(1e-7, 1e-3, 120).unwrap(),
        1,
        &sites,
    );
    let nat = nuclear_median(
        SequenceKind::Ramsey,
        0,
        IsotopeModel::NATURAL,
        &log_time_grid(1e-8, 1e-4, 120).unwrap(),
        1,
        &sites,
    );
    outcome(
        5,
        "Ramsey T2* at 50 G",
        &[
            ((24e-6..=97e-6).contains(&pur), format!("purified {:.1} us", pur * 1e6)),
            ((0.5e-6..=2.5e-6).contains(&nat), format!("natural {:.2} us", nat * 1e6)),
        ],
    )
}

fn pair_curves(n: u32, density: f64, times: &[f64]) -> Vec<CoherenceCurve> {
    let kind = if n == 1 { SequenceKind::Hahn } else { SequenceKind::Cpmg };
    let run = CoherenceRun {
        sites: &[],
        electron: ElectronModel::with_field_gauss(50.0),
        kind,
        n_pulses: n,
        times,
        cce: CceOptions::default(),
    };
    coherence_ensemble(
        &run,
        None,
        Some(&ParamagneticBath::scaled(density)),
        &member_seeds(1, 50),
    )
    .unwrap()
}

pub fn hahn_time() -> Outcome {
    let sites = coherence_sites();
    let times = log_time_grid(1e-5, 3.0, 150).unwrap();
    let run = CoherenceRun {
        sites: &sites,
        electron: ElectronModel::with_field_gauss(50.0),
        kind: SequenceKind::Hahn,
        n_pulses: 1,
        times: &times,
        cce: CceOptions::default(),
    };
    let bath = NuclearBath {
        isotopes: IsotopeModel::PURIFIED,
        hyperfine: HyperfineModel::default(),
        exclude_core: true,
    };
    let nuclear = coherence_ensemble(&run, Some(&bath), None, &member_seeds(1, 50)).unwrap();
    let t2_nuclear = summarize(&nuclear).unwrap().median_t2;
    let densities = [3e14, 6e14, 1e15, 2e15, 3e15];
    let totals: Vec<f64> = densities
        .iter()
        .map(|&d| {
            let pair = pair_curves(1, d, &times);
            let total: Vec<CoherenceCurve> = nuclear
                .iter()
                .zip(&pair)
                .map(|(a, b)| total_coherence(a, b).unwrap())
                .collect();
            summarize(&total).unwrap().median_t2
        })
        .collect();
    let t2_total = totals[2];
    let decreasing = totals.windows(2).all(|w| w[1] < w[0]);
    let listed: Vec<String> = totals.iter().map(|t| format!("{:.2}", t * 1e3)).collect();
    outcome(
        6,
        "Hahn T2, nuclear and paramagnetic baths",
        &[
            (
                (18e-3..=74e-3).contains(&t2_nuclear),
                format!("nuclear {:.1} ms", t2_nuclear * 1e3),
            ),
            (
                (0.8e-3..=7e-3).contains(&t2_total),
                format!("total at 1e15 {:.2} ms", t2_total * 1e3),
            ),
            (decreasing, format!("3e14..3e15: [{}] ms", listed.join(", "))),
        ],
    )
}

pub fn cpmg_scaling() -> Outcome {
    let times = log_time_grid(1e-5, 3.0, 150).unwrap();
    let pulses = [1u32, 2, 4, 8, 16, 32];
    let t2: Vec<f64> = pulses
        .iter()
        .map(|&n| summarize(&pair_curves(n, 1e15, &times)).unwrap().median_t2)
        .collect();
    let ratio = t2[5] / t2[0];
    let listed: Vec<String> = t2.iter().map(|t| format!("{:.2}", t * 1e3)).collect();
    outcome(
        7,
        "CPMG T2(N) scaling",
        &[
            (
                t2.windows(2).all(|w| w[1] >= w[0]),
                format!("N = 1..32: [{}] ms", listed.join(", ")),
            ),
            ((3.0..=12.0).contains(&ratio), format!("T2(32)/T2(1) = {ratio:.2}")),
        ],
    )
}

pub fn memory_census() -> Outcome {
    let sites = enumerate_sites(&CrystalModel::default(), 6.0).unwrap();
    let electron = ElectronModel::with_field_gauss(500.0);
    let hf = HyperfineModel::default();
    let engine = CensusEngine::build(&sites, &hf, &electron, FRAC_PI_2, 6, 2e-3, 0.8).unwrap();
    let low = MemoryCriteria::low_hyperfine();
    let model = FidelityModel::Crosstalk;
    let cs = log_concentrations(1e-4, 5e-2, 14).unwrap();
    let rows = concentration_sweep(&engine, &cs, &low, model).unwrap();
    let n_low: Vec<f64> = rows.iter().map(|r| r.n_mem_low).collect();
    let (argmax, peak) = n_low
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, x| if x.1 > a.1 { x } else { a });
    let interior = argmax > 0 && argmax + 1 < n_low.len();
    let natural = engine.census(&IsotopeModel::NATURAL, &low, model).unwrap().n_mem;

    // Median of all usable sites, one decade apart.
    let all = MemoryCriteria::default();
    let medians: Vec<f64> = cs
        .iter()
        .map(|&c| {
            engine
                .census(&IsotopeModel::uniform(c).unwrap(), &all, model)
                .unwrap()
                .median_a_par
        })
        .collect();
    let step = ((10f64.ln() / (cs[1] / cs[0]).ln()).round()) as usize;
    let lower_at_lower_c = medians.windows(step + 1).all(|w| w[0] < w[step]);

    let peak_at = |t_max: f64| {
        let c = MemoryCriteria { t_max, ..low };
        cs.iter()
            .map(|&x| {
                engine
                    .census(&IsotopeModel::uniform(x).unwrap(), &c, model)
                    .unwrap()
                    .n_mem
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let growth = peak_at(2e-3) / peak_at(1e-3);

    let c_opt = cs[argmax];
    let both = engine
        .census(&IsotopeModel::uniform(c_opt).unwrap(), &low, model)
        .unwrap()
        .n_mem;
    let si = engine
        .census(&IsotopeModel::new(c_opt, 0.0).unwrap(), &low, model)
        .unwrap()
        .n_mem;
    let c13 = engine
        .census(&IsotopeModel::new(0.0, c_opt).unwrap(), &low, model)
        .unwrap()
        .n_mem;
    let dual = (both - (si + c13)).abs() / (si + c13);
    outcome(
        8,
        "memory census over concentration",
        &[
            (interior, format!("low-A peak {peak:.2} at c = {c_opt:.2e}")),
            (
                natural < 0.2 * peak,
                format!("natural {:.0}% of peak", 100.0 * natural / peak),
            ),
            (
                lower_at_lower_c,
                format!(
                    "median A_par {:.1} kHz at 1e-4 to {:.1} kHz at 5e-2",
                    vvbath::rad_to_hz(medians[0]) / 1e3,
                    vvbath::rad_to_hz(medians[medians.len() - 1]) / 1e3
                ),
            ),
            (growth < 2.0, format!("peak growth 1 ms -> 2 ms x{growth:.2}")),
            (
                dual <= 0.3,
                format!("dual {both:.2} vs {si:.2} + {c13:.2} ({:.0}%)", 100.0 * dual),
            ),
        ],
    )
}

pub fn register() -> Outcome {
    let ideal = entangle_bell(&RegisterState::basis(2, 0).unwrap(), 1, &NoiseModel::NOISELESS).unwrap();
    let rho = ideal.state.matrix();
    let f_ideal = bell_fidelity(rho);
    let lam = ppt_min_eigenvalue(rho).unwrap();

    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ppt_min_eigenvalue(&werner_state(mid)).unwrap() < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let crossing = 0.5 * (lo + hi);

    let init_noise = gate_noise(INIT_GATE_NOISE);
    let init = initialized_register(2, &init_noise).unwrap().initialization;
    let bell = prepared_bell_fidelity(2, &init_noise, &gate_noise(BELL_GATE_NOISE)).unwrap();
    outcome(
        9,
        "register circuit, PPT and calibrated noise",
        &[
            (
                (f_ideal - 1.0).abs() < 1e-9 && (lam + 0.5).abs() < 1e-9,
                format!("noiseless fidelity {f_ideal:.12}, lambda_min {lam:.12}"),
            ),
            (
                (crossing - 1.0 / 3.0).abs() <= 0.01,
                format!("Werner crossing p = {crossing:.6}"),
            ),
            ((init - 0.93).abs() <= 0.01 * 0.93, format!("initialization {init:.4}")),
            ((bell - 0.81).abs() <= 0.01 * 0.81, format!("Bell fidelity {bell:.4}")),
        ],
    )
}

pub fn benchmarking() -> Outcome {
    let lengths = [1, 10, 50, 100, 200, 500, 1000, 2000, 4000];
    let seeds = member_seeds(1, 3);
    let seqs = sample_sequences(&lengths, 30, seeds[0]).unwrap();
    let data = simulate_rb(&seqs, 1.0 - 0.99968, Some(1000), seeds[1]).unwrap();
    let fit = fit_rb(&data, 200, seeds[2]).unwrap();
    let target = 0.99984;
    let clean = fit_rb(&simulate_rb(&seqs, 0.0, Some(1000), seeds[1]).unwrap(), 200, seeds[2]).unwrap();
    outcome(
        10,
        "randomized benchmarking",
        &[
            (
                fit.ci.0 <= target && target <= fit.ci.1,
                format!("F = {:.6} CI [{:.6}, {:.6}]", fit.fidelity, fit.ci.0, fit.ci.1),
            ),
            (clean.fidelity == 1.0, format!("noiseless F = {}", clean.fidelity)),
        ],
    )
}

fn read_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().is_some_and(|n| n != "manifest.json"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

pub fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut checks = Vec::new();
    for experiment in [
        Experiment::Spectrum,
        Experiment::Coherence,
        Experiment::Census,
        Experiment::Sweep,
        Experiment::Register,
        Experiment::Rb,
    ] {
        let mut runs = Vec::new();
        for rep in 0..2 {
            let mut cfg = load_str("", &[]).unwrap();
            cfg.seed = 17;
            cfg.out = tmp
                .path()
                .join(format!("{}-{rep}", experiment.name()))
                .display()
                .to_string();
            vvbath_cli::run(experiment, &cfg).unwrap();
            runs.push(read_artifacts(Path::new(&cfg.out)));
        }
        let same = !runs[0].is_empty() && runs[0] == runs[1];
        checks.push((same, format!("{} {} files", experiment.name(), runs[0].len())));
    }
    outcome(11, "byte-identical reruns", &checks)
}

/// Every criterion in order.
pub fn all() -> Vec<fn() -> Outcome> {
    vec![
        conditional_dynamics,
        cluster_expansion,
        resonance_formula,
        gate_design,
        dephasing_time,
        hahn_time,
        cpmg_scaling,
        memory_census,
        register,
        benchmarking,
        determinism,
    ]
}
