//! One function per experiment. Each writes its artifacts and returns the
//! seeds it used.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use vvbath::cce::log_time_grid;
use vvbath::ddgate::{bath_spectrum, mean_spectrum};
use vvbath::ensemble::{coherence_ensemble, member_seeds, summarize, CoherenceRun, NuclearBath};
use vvbath::fit::DecayFit;
use vvbath::lattice::{enumerate_sites, sample_bath, IsotopeModel};
use vvbath::memcensus::{concentration_sweep, log_concentrations, CensusEngine};
use vvbath::rbench::{fit_rb, sample_sequences, simulate_rb, CliffordGroup};
use vvbath::register::{
    bell_fidelity, entangle_bell, initialized_register, odmr_spectrum, optical_reinit_electron, ppt_min_eigenvalue,
    qst, NoiseModel, Tomography,
};
use vvbath::{cce::CceOptions, rad_to_hz};

use crate::artifacts::{cell, ArtifactWriter};
use crate::config::RunConfig;
use crate::RunError;

fn compute<T>(r: vvbath::Result<T>) -> Result<T, RunError> {
    r.map_err(|e| RunError::Compute(e.to_string()))
}

pub fn spectrum(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, RunError> {
    let s = &cfg.spectrum;
    let electron = cfg.electron.model();
    let hf = cfg.hyperfine.model();
    let iso = cfg.isotopes.model();
    let sites = compute(enumerate_sites(&cfg.crystal.model(), s.radius_nm))?;
    let taus: Vec<f64> = (0..s.points)
        .map(|i| s.tau_min_s + (s.tau_max_s - s.tau_min_s) * i as f64 / (s.points - 1) as f64)
        .collect();
    let seeds = member_seeds(cfg.seed, s.members);
    let spectra = compute(
        seeds
            .par_iter()
            .map(|&seed| {
                let mut bath = sample_bath(&sites, &iso, seed)?;
                hf.attach(&mut bath)?;
                bath_spectrum(&bath, &taus, s.n_pulses, &electron)
            })
            .collect::<vvbath::Result<Vec<_>>>(),
    )?;
    let mean = compute(mean_spectrum(&spectra))?;
    let rows: Vec<String> = mean
        .tau
        .iter()
        .zip(&mean.m)
        .map(|(t, m)| format!("{},{}", t * 1e6, m))
        .collect();
    w.write_csv("spectrum.csv", "tau_us,m_mean", &rows)?;
    w.write_json(
        "spectrum_summary.json",
        &json!({
            "members": s.members,
            "n_pulses": s.n_pulses,
            "dips_below_0.5": mean.count_dips(0.5),
            "fraction_below_0.5": mean.fraction_below(0.5),
        }),
    )?;
    Ok(json!({ "master": cfg.seed, "members": seeds }))
}

#[derive(Serialize)]
struct CoherenceSummary {
    members: usize,
    fitted_members: usize,
    median_t2_s: Option<f64>,
    mean_fit: Option<DecayFit>,
    flagged_points: usize,
}

pub fn coherence(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, RunError> {
    let co = &cfg.coherence;
    let times = compute(log_time_grid(co.t_min_s, co.t_max_s, co.points))?;
    let sites = if co.nuclear {
        compute(enumerate_sites(&cfg.crystal.model(), cfg.crystal.radius_nm))?
    } else {
        Vec::new()
    };
    let run = CoherenceRun {
        sites: &sites,
        electron: cfg.electron.model(),
        kind: co.sequence,
        n_pulses: co.n_pulses,
        times: &times,
        cce: CceOptions {
            order: co.order,
            pair_cutoff_nm: co.pair_cutoff_nm,
            ..CceOptions::default()
        },
    };
    let nuclear = co.nuclear.then(|| NuclearBath {
        isotopes: cfg.isotopes.model(),
        hyperfine: cfg.hyperfine.model(),
        exclude_core: co.exclude_core,
    });
    let para = co.paramagnetic();
    let seeds = member_seeds(cfg.seed, co.members);
    let curves = compute(coherence_ensemble(&run, nuclear.as_ref(), para.as_ref(), &seeds))?;
    let summary = compute(summarize(&curves))?;

    let rows: Vec<String> = (0..times.len())
        .map(|k| {
            format!(
                "{},{},{}",
                times[k],
                summary.mean.l[k],
                u8::from(summary.mean.flagged[k])
            )
        })
        .collect();
    w.write_csv("coherence.csv", "t_s,l_mean,flagged", &rows)?;
    let members: Vec<String> = seeds
        .iter()
        .zip(&summary.fits)
        .enumerate()
        .map(|(i, (seed, f))| {
            format!(
                "{i},{seed},{},{},{}",
                cell(f.map(|f| f.t2)),
                cell(f.map(|f| f.n)),
                cell(f.map(|f| f.residual))
            )
        })
        .collect();
    w.write_csv("members.csv", "member,seed,t2_s,n,residual", &members)?;
    w.write_json(
        "coherence_summary.json",
        &CoherenceSummary {
            members: curves.len(),
            fitted_members: summary.fits.iter().filter(|f| f.is_some()).count(),
            median_t2_s: summary.median_t2.is_finite().then_some(summary.median_t2),
            mean_fit: summary.mean_fit,
            flagged_points: summary.mean.flagged_count(),
        },
    )?;
    Ok(json!({ "master": cfg.seed, "members": seeds }))
}

fn census_engine(cfg: &RunConfig) -> Result<CensusEngine, RunError> {
    let ce = &cfg.census;
    let sites = compute(enumerate_sites(&cfg.crystal.model(), ce.radius_nm))?;
    compute(CensusEngine::build(
        &sites,
        &cfg.hyperfine.model(),
        &cfg.electron.model(),
        ce.theta_target_rad,
        ce.k_max,
        ce.t_max_s,
        ce.f_gate_floor,
    ))
}

pub fn census(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, RunError> {
    let engine = census_engine(cfg)?;
    let iso: IsotopeModel = cfg.isotopes.model();
    let result = compute(engine.census(&iso, &cfg.census.criteria(), cfg.census.model))?;
    let rows: Vec<String> = result
        .records
        .iter()
        .map(|r| {
            let d = r.design;
            format!(
                "{},{:?},{},{},{},{},{},{},{},{},{},{}",
                r.site_index,
                r.element,
                r.multiplicity,
                rad_to_hz(r.a_par),
                rad_to_hz(r.a_perp),
                d.map_or_else(String::new, |d| d.k.to_string()),
                d.map_or_else(String::new, |d| d.n_pulses.to_string()),
                cell(d.map(|d| d.tau * 1e6)),
                cell(d.map(|d| d.gate_time * 1e3)),
                cell(d.map(|d| d.fidelity)),
                r.crosstalk,
                r.fidelity
            )
        })
        .collect();
    w.write_csv(
        "census.csv",
        "site_index,element,multiplicity,a_par_hz,a_perp_hz,k,n_pulses,tau_us,gate_time_ms,gate_fidelity,crosstalk,fidelity",
        &rows,
    )?;
    let hist: Vec<String> = result.histogram.iter().map(|(b, v)| format!("{b},{v}")).collect();
    w.write_csv("histogram.csv", "a_par_khz_bin,weight", &hist)?;
    w.write_json(
        "census_summary.json",
        &json!({
            "n_mem": result.n_mem,
            "usable_classes": result.records.len(),
            "median_a_par_hz": result.median_a_par.is_finite().then(|| rad_to_hz(result.median_a_par)),
        }),
    )?;
    Ok(json!({ "master": cfg.seed }))
}

pub fn sweep(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, RunError> {
    let engine = census_engine(cfg)?;
    let sw = &cfg.sweep;
    let cs = compute(log_concentrations(sw.c_min, sw.c_max, sw.points))?;
    let rows = compute(concentration_sweep(
        &engine,
        &cs,
        &cfg.census.criteria(),
        cfg.census.model,
    ))?;
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{}",
                r.concentration,
                r.n_mem_all,
                r.n_mem_low,
                cell(r.median_a_par_khz.is_finite().then_some(r.median_a_par_khz))
            )
        })
        .collect();
    w.write_csv(
        "sweep.csv",
        "concentration,n_mem_all,n_mem_low,median_a_par_khz",
        &lines,
    )?;
    let best = rows
        .iter()
        .max_by(|a, b| a.n_mem_low.total_cmp(&b.n_mem_low))
        .map(|r| json!({ "concentration": r.concentration, "n_mem_low": r.n_mem_low }));
    w.write_json("sweep_summary.json", &json!({ "rows": rows.len(), "max_low": best }))?;
    Ok(json!({ "master": cfg.seed }))
}

pub fn register(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, RunError> {
    let r = &cfg.register;
    let init_noise = NoiseModel {
        p_gate: r.p_gate_init,
        reinit_fidelity: r.reinit_fidelity,
        readout_error: r.readout_error,
    };
    let bell_noise = NoiseModel {
        p_gate: r.p_gate_bell,
        ..init_noise
    };
    let cooled = compute(initialized_register(r.iterations, &init_noise))?;
    let reinit = compute(optical_reinit_electron(&cooled.state, &bell_noise))?;
    let bell = compute(entangle_bell(&reinit, 1, &bell_noise))?;
    let mode = match r.shots {
        Some(shots) => Tomography::Shots { shots, seed: cfg.seed },
        None => Tomography::Exact,
    };
    let rho = compute(qst(bell.state.matrix(), mode, r.readout_error, true))?;
    let lambda = compute(ppt_min_eigenvalue(&rho))?;

    let half = 0.5 * r.detuning_span_hz;
    let grid: Vec<f64> = (0..r.detuning_points)
        .map(|i| -half + r.detuning_span_hz * i as f64 / (r.detuning_points - 1) as f64)
        .collect();
    let odmr = compute(odmr_spectrum(cooled.initialization, r.a_par_hz, r.linewidth_hz, &grid))?;
    let rows: Vec<String> = odmr
        .detuning
        .iter()
        .zip(&odmr.contrast)
        .map(|(d, c)| format!("{},{}", d / 1e6, c))
        .collect();
    w.write_csv("odmr.csv", "detuning_MHz,contrast", &rows)?;

    let pairs: Vec<Vec<[f64; 2]>> = (0..4)
        .map(|i| (0..4).map(|j| [rho[(i, j)].re, rho[(i, j)].im]).collect())
        .collect();
    w.write_json("rho_bell.json", &pairs)?;
    w.write_json(
        "register_summary.json",
        &json!({
            "nuclear_initialization": cooled.initialization,
            "nuclear_polarization": cooled.polarization,
            "odmr_inferred_fidelity": odmr.inferred_fidelity,
            "bell_state_fidelity": bell_fidelity(bell.state.matrix()),
            "bell_tomography_fidelity": bell_fidelity(&rho),
            "ppt_min_eigenvalue": lambda,
            "uninitialized_input": bell.uninitialized,
        }),
    )?;
    Ok(json!({ "master": cfg.seed, "tomography": r.shots.map(|_| cfg.seed) }))
}

pub fn rb(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Value, RunError> {
    let rb = &cfg.rb;
    let s = member_seeds(cfg.seed, 3);
    let seqs = compute(sample_sequences(&rb.lengths, rb.per_length, s[0]))?;
    let data = compute(simulate_rb(&seqs, rb.p_depol, rb.shots, s[1]))?;
    let result = compute(fit_rb(&data, rb.bootstrap, s[2]))?;
    let mean = data.mean();
    let sem = data.sem();
    let rows: Vec<String> = data
        .lengths
        .iter()
        .enumerate()
        .map(|(i, n)| format!("{n},{},{}", mean[i], sem[i]))
        .collect();
    w.write_csv("rb.csv", "N,mean_survival,sem", &rows)?;
    w.write_json(
        "rb_fit.json",
        &json!({
            "a": result.fit.a,
            "p": result.fit.p,
            "b": result.fit.b,
            "residual": result.fit.residual,
            "average_gate_fidelity": result.fidelity,
            "ci_low": result.ci.0,
            "ci_high": result.ci.1,
            "no_decay": result.no_decay,
            "pulses_per_clifford": CliffordGroup::get().mean_pulses(),
        }),
    )?;
    Ok(json!({ "master": cfg.seed, "sequences": s[0], "shots": s[1], "bootstrap": s[2] }))
}
