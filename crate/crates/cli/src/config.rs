//! Run configuration: a single TOML file, overridable with `--set key=value`.
//!
//! Frequencies are linear (Hz) everywhere in the file and converted to
//! angular units only when handed to the simulation crate.

use serde::{Deserialize, Serialize};

use vvbath::ddgate::SequenceKind;
use vvbath::ensemble::{ParamagneticBath, ALL_PAIRS_NM, NUCLEAR_RADIUS_NM};
use vvbath::hyperfine::{ElectronModel, HyperfineModel, TabulatedHyperfine};
use vvbath::lattice::{CoreShell, CrystalModel, Divacancy, IsotopeModel, A_4H_NM, C_4H_NM};
use vvbath::memcensus::{FidelityModel, MemoryCriteria};
use vvbath::register::{BELL_GATE_NOISE, INIT_GATE_NOISE};
use vvbath::{hz_to_rad, memcensus};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Spectrum,
    Coherence,
    Census,
    Sweep,
    Register,
    Rb,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Spectrum => "spectrum",
            Experiment::Coherence => "coherence",
            Experiment::Census => "census",
            Experiment::Sweep => "sweep",
            Experiment::Register => "register",
            Experiment::Rb => "rb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Experiment run when no subcommand names one.
    pub experiment: Option<Experiment>,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub out: String,
    pub crystal: CrystalConfig,
    pub isotopes: IsotopeConfig,
    pub electron: ElectronConfig,
    pub hyperfine: HyperfineConfig,
    pub spectrum: SpectrumConfig,
    pub coherence: CoherenceConfig,
    pub census: CensusConfig,
    pub sweep: SweepConfig,
    pub register: RegisterConfig,
    pub rb: RbConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            experiment: None,
            seed: 1,
            workers: 0,
            out: "out".into(),
            crystal: CrystalConfig::default(),
            isotopes: IsotopeConfig::default(),
            electron: ElectronConfig::default(),
            hyperfine: HyperfineConfig::default(),
            spectrum: SpectrumConfig::default(),
            coherence: CoherenceConfig::default(),
            census: CensusConfig::default(),
            sweep: SweepConfig::default(),
            register: RegisterConfig::default(),
            rb: RbConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrystalConfig {
    pub a_nm: f64,
    pub c_nm: f64,
    pub divacancy: Divacancy,
    pub supercell_bound_nm: f64,
    /// Radius of the enumerated nuclear bath (nm).
    pub radius_nm: f64,
}

impl Default for CrystalConfig {
    fn default() -> Self {
        CrystalConfig {
            a_nm: A_4H_NM,
            c_nm: C_4H_NM,
            divacancy: Divacancy::Kk,
            supercell_bound_nm: 20.0,
            radius_nm: NUCLEAR_RADIUS_NM,
        }
    }
}

impl CrystalConfig {
    pub fn model(&self) -> CrystalModel {
        CrystalModel {
            supercell_bound_nm: self.supercell_bound_nm,
            ..CrystalModel::four_h(self.a_nm, self.c_nm, self.divacancy)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsotopeConfig {
    pub c_si29: f64,
    pub c_c13: f64,
}

impl Default for IsotopeConfig {
    fn default() -> Self {
        let n = IsotopeModel::PURIFIED;
        IsotopeConfig {
            c_si29: n.c_si29,
            c_c13: n.c_c13,
        }
    }
}

impl IsotopeConfig {
    pub fn model(&self) -> IsotopeModel {
        IsotopeModel {
            c_si29: self.c_si29,
            c_c13: self.c_c13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElectronConfig {
    pub field_gauss: f64,
    /// Active pseudospin branch, +1 or −1.
    pub branch: i8,
    pub zfs_hz: f64,
}

impl Default for ElectronConfig {
    fn default() -> Self {
        ElectronConfig {
            field_gauss: 500.0,
            branch: -1,
            zfs_hz: 1.336e9,
        }
    }
}

impl ElectronConfig {
    pub fn model(&self) -> ElectronModel {
        ElectronModel {
            zfs: hz_to_rad(self.zfs_hz),
            branch: self.branch,
            field_t: self.field_gauss * 1e-4,
            ..ElectronModel::default()
        }
    }
}

/// Tabulated core-shell couplings (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellCoupling {
    pub a_par_hz: f64,
    pub a_perp_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperfineConfig {
    pub c_i: Option<ShellCoupling>,
    pub si_i: Option<ShellCoupling>,
    pub si_iia: Option<ShellCoupling>,
    pub si_iib: Option<ShellCoupling>,
}

impl HyperfineConfig {
    pub fn model(&self) -> HyperfineModel {
        let mut m = HyperfineModel::default();
        for (shell, value) in [
            (CoreShell::CI, self.c_i),
            (CoreShell::SiI, self.si_i),
            (CoreShell::SiIIa, self.si_iia),
            (CoreShell::SiIIb, self.si_iib),
        ] {
            if let Some(v) = value {
                m.overrides.insert(
                    shell,
                    TabulatedHyperfine {
                        a_par: hz_to_rad(v.a_par_hz),
                        a_perp: hz_to_rad(v.a_perp_hz),
                    },
                );
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub radius_nm: f64,
    pub n_pulses: u32,
    pub tau_min_s: f64,
    pub tau_max_s: f64,
    pub points: usize,
    pub members: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            radius_nm: 4.0,
            n_pulses: 32,
            tau_min_s: 1e-6,
            tau_max_s: 20e-6,
            points: 2000,
            members: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceConfig {
    pub sequence: SequenceKind,
    pub n_pulses: u32,
    pub t_min_s: f64,
    pub t_max_s: f64,
    pub points: usize,
    pub members: usize,
    pub order: usize,
    pub pair_cutoff_nm: f64,
    pub nuclear: bool,
    pub exclude_core: bool,
    /// Paramagnetic pair bath density (cm⁻³); 0 disables it.
    pub paramagnetic_density_cm3: f64,
    /// Sphere radius (nm); unset scales with density.
    pub paramagnetic_radius_nm: Option<f64>,
    pub paramagnetic_pair_cutoff_nm: f64,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            sequence: SequenceKind::Hahn,
            n_pulses: 1,
            t_min_s: 1e-5,
            t_max_s: 3.0,
            points: 150,
            members: 50,
            order: 2,
            pair_cutoff_nm: 2.0,
            nuclear: true,
            exclude_core: true,
            paramagnetic_density_cm3: 0.0,
            paramagnetic_radius_nm: None,
            paramagnetic_pair_cutoff_nm: ALL_PAIRS_NM,
        }
    }
}

impl CoherenceConfig {
    pub fn paramagnetic(&self) -> Option<ParamagneticBath> {
        if self.paramagnetic_density_cm3 <= 0.0 {
            return None;
        }
        let mut b = ParamagneticBath::scaled(self.paramagnetic_density_cm3);
        if let Some(r) = self.paramagnetic_radius_nm {
            b.radius_nm = r;
        }
        b.pair_cutoff_nm = self.paramagnetic_pair_cutoff_nm;
        Some(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CensusConfig {
    pub radius_nm: f64,
    pub f_min: f64,
    pub t_max_s: f64,
    pub theta_target_rad: f64,
    pub k_max: u32,
    /// Upper bound on |A_∥| of counted sites (Hz); unset counts all sites.
    pub a_par_max_hz: Option<f64>,
    /// Designs below this intrinsic fidelity are never cached.
    pub f_gate_floor: f64,
    pub model: FidelityModel,
}

impl Default for CensusConfig {
    fn default() -> Self {
        let c = MemoryCriteria::default();
        CensusConfig {
            radius_nm: 6.0,
            f_min: c.f_min,
            t_max_s: c.t_max,
            theta_target_rad: c.theta_target,
            k_max: c.k_max,
            a_par_max_hz: Some(60e3),
            f_gate_floor: 0.8,
            model: FidelityModel::Crosstalk,
        }
    }
}

impl CensusConfig {
    pub fn criteria(&self) -> MemoryCriteria {
        MemoryCriteria {
            f_min: self.f_min,
            t_max: self.t_max_s,
            theta_target: self.theta_target_rad,
            k_max: self.k_max,
            a_par_window: self.a_par_max_hz.map(|hz| (0.0, hz_to_rad(hz))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub c_min: f64,
    pub c_max: f64,
    pub points: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            c_min: 1e-4,
            c_max: 5e-2,
            points: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegisterConfig {
    pub iterations: u32,
    pub p_gate_init: f64,
    pub p_gate_bell: f64,
    pub reinit_fidelity: f64,
    pub readout_error: f64,
    /// Tomography shots per setting; unset uses exact expectations.
    pub shots: Option<u64>,
    pub a_par_hz: f64,
    pub linewidth_hz: f64,
    pub detuning_span_hz: f64,
    pub detuning_points: usize,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        RegisterConfig {
            iterations: 2,
            p_gate_init: INIT_GATE_NOISE,
            p_gate_bell: BELL_GATE_NOISE,
            reinit_fidelity: 1.0,
            readout_error: 0.0,
            shots: None,
            a_par_hz: 13.2e6,
            linewidth_hz: 1.0e6,
            detuning_span_hz: 30e6,
            detuning_points: 601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub per_length: usize,
    pub p_depol: f64,
    /// Shots per sequence; unset uses exact survivals.
    pub shots: Option<u64>,
    pub bootstrap: usize,
}

impl Default for RbConfig {
    fn default() -> Self {
        RbConfig {
            lengths: vec![1, 10, 50, 100, 200, 500, 1000, 2000, 4000],
            per_length: 30,
            p_depol: 1.0 - 0.99968,
            shots: Some(1000),
            bootstrap: 200,
        }
    }
}

/// One field-level problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn check(out: &mut Vec<Diagnostic>, ok: bool, field: &str, message: &str) {
    if !ok {
        out.push(Diagnostic::new(field, message));
    }
}

fn from_error(out: &mut Vec<Diagnostic>, field: &str, r: vvbath::Result<()>) {
    if let Err(e) = r {
        out.push(Diagnostic::new(field, e.to_string()));
    }
}

impl RunConfig {
    /// Schema and physics sanity checks; empty when the config is usable.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        check(
            &mut d,
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            "unsupported schema version",
        );
        check(&mut d, !self.out.is_empty(), "out", "must not be empty");

        let c = &self.crystal;
        check(&mut d, c.a_nm > 0.0, "crystal.a_nm", "must be positive");
        check(&mut d, c.c_nm > 0.0, "crystal.c_nm", "must be positive");
        check(&mut d, c.radius_nm > 0.0, "crystal.radius_nm", "must be positive");
        check(
            &mut d,
            c.radius_nm <= c.supercell_bound_nm,
            "crystal.radius_nm",
            "exceeds crystal.supercell_bound_nm",
        );

        for (name, v) in [
            ("isotopes.c_si29", self.isotopes.c_si29),
            ("isotopes.c_c13", self.isotopes.c_c13),
        ] {
            check(&mut d, (0.0..=1.0).contains(&v), name, "must lie in [0, 1]");
        }

        let e = &self.electron;
        check(
            &mut d,
            e.field_gauss >= 0.0,
            "electron.field_gauss",
            "must be non-negative",
        );
        check(
            &mut d,
            e.branch == 1 || e.branch == -1,
            "electron.branch",
            "must be +1 or -1",
        );

        for (name, v) in [
            ("hyperfine.c_i", self.hyperfine.c_i),
            ("hyperfine.si_i", self.hyperfine.si_i),
            ("hyperfine.si_iia", self.hyperfine.si_iia),
            ("hyperfine.si_iib", self.hyperfine.si_iib),
        ] {
            if let Some(v) = v {
                check(
                    &mut d,
                    v.a_par_hz.is_finite() && v.a_perp_hz.is_finite(),
                    name,
                    "couplings must be finite",
                );
            }
        }

        let s = &self.spectrum;
        check(&mut d, s.radius_nm > 0.0, "spectrum.radius_nm", "must be positive");
        check(
            &mut d,
            s.radius_nm <= c.supercell_bound_nm,
            "spectrum.radius_nm",
            "exceeds crystal.supercell_bound_nm",
        );
        check(
            &mut d,
            s.n_pulses >= 2 && s.n_pulses.is_multiple_of(2),
            "spectrum.n_pulses",
            "must be even and at least 2",
        );
        check(
            &mut d,
            s.tau_min_s > 0.0 && s.tau_max_s > s.tau_min_s,
            "spectrum.tau_max_s",
            "need 0 < tau_min_s < tau_max_s",
        );
        check(&mut d, s.points >= 2, "spectrum.points", "need at least 2");
        check(&mut d, s.members >= 1, "spectrum.members", "need at least 1");

        let co = &self.coherence;
        check(
            &mut d,
            co.t_min_s > 0.0 && co.t_max_s > co.t_min_s,
            "coherence.t_max_s",
            "need 0 < t_min_s < t_max_s",
        );
        check(&mut d, co.points >= 2, "coherence.points", "need at least 2");
        check(&mut d, co.members >= 1, "coherence.members", "need at least 1");
        check(
            &mut d,
            (1..=4).contains(&co.order),
            "coherence.order",
            "must lie in 1..=4",
        );
        check(
            &mut d,
            co.pair_cutoff_nm >= 0.0,
            "coherence.pair_cutoff_nm",
            "must be non-negative",
        );
        check(
            &mut d,
            co.paramagnetic_density_cm3 >= 0.0,
            "coherence.paramagnetic_density_cm3",
            "must be non-negative",
        );
        match co.sequence {
            SequenceKind::Ramsey => check(&mut d, co.n_pulses == 0, "coherence.n_pulses", "Ramsey takes no pulses"),
            SequenceKind::Hahn => check(
                &mut d,
                co.n_pulses == 1,
                "coherence.n_pulses",
                "Hahn echo takes one pulse",
            ),
            _ => check(
                &mut d,
                co.n_pulses >= 1,
                "coherence.n_pulses",
                "need at least one pulse",
            ),
        }
        if let Some(p) = co.paramagnetic() {
            from_error(&mut d, "coherence.paramagnetic", p.validate());
        }

        let ce = &self.census;
        check(&mut d, ce.radius_nm > 0.0, "census.radius_nm", "must be positive");
        check(
            &mut d,
            ce.radius_nm <= c.supercell_bound_nm,
            "census.radius_nm",
            "exceeds crystal.supercell_bound_nm",
        );
        check(
            &mut d,
            ce.f_min > 0.0 && ce.f_min <= 1.0,
            "census.f_min",
            "must lie in (0, 1]",
        );
        check(&mut d, ce.t_max_s > 0.0, "census.t_max_s", "must be positive");
        check(
            &mut d,
            (0.0..=1.0).contains(&ce.f_gate_floor),
            "census.f_gate_floor",
            "must lie in [0, 1]",
        );
        check(
            &mut d,
            ce.f_gate_floor <= ce.f_min,
            "census.f_gate_floor",
            "must not exceed census.f_min",
        );
        if let Some(hz) = ce.a_par_max_hz {
            check(&mut d, hz > 0.0, "census.a_par_max_hz", "must be positive");
        }
        if ce.f_min > 0.0 && ce.t_max_s > 0.0 {
            from_error(&mut d, "census", ce.criteria().validate());
        }

        let sw = &self.sweep;
        if let Err(e) = memcensus::log_concentrations(sw.c_min, sw.c_max, sw.points) {
            d.push(Diagnostic::new("sweep", e.to_string()));
        }

        let r = &self.register;
        check(&mut d, r.iterations >= 1, "register.iterations", "need at least 1");
        for (name, v) in [
            ("register.p_gate_init", r.p_gate_init),
            ("register.p_gate_bell", r.p_gate_bell),
            ("register.reinit_fidelity", r.reinit_fidelity),
        ] {
            check(&mut d, (0.0..=1.0).contains(&v), name, "must lie in [0, 1]");
        }
        check(
            &mut d,
            (0.0..=0.5).contains(&r.readout_error),
            "register.readout_error",
            "must lie in [0, 0.5]",
        );
        if let Some(n) = r.shots {
            check(&mut d, n >= 1, "register.shots", "must be at least 1");
        }
        check(
            &mut d,
            r.linewidth_hz > 0.0,
            "register.linewidth_hz",
            "must be positive",
        );
        check(
            &mut d,
            r.detuning_points >= 2,
            "register.detuning_points",
            "need at least 2",
        );
        check(
            &mut d,
            r.detuning_span_hz > 0.0,
            "register.detuning_span_hz",
            "must be positive",
        );

        let rb = &self.rb;
        check(
            &mut d,
            rb.lengths.len() >= 3,
            "rb.lengths",
            "need at least three lengths",
        );
        check(
            &mut d,
            rb.lengths.iter().all(|&n| n >= 1),
            "rb.lengths",
            "every length must be at least 1",
        );
        check(
            &mut d,
            rb.lengths.windows(2).all(|w| w[1] > w[0]),
            "rb.lengths",
            "must be strictly increasing",
        );
        check(&mut d, rb.per_length >= 1, "rb.per_length", "need at least 1");
        check(
            &mut d,
            (0.0..=1.0).contains(&rb.p_depol),
            "rb.p_depol",
            "must lie in [0, 1]",
        );
        if let Some(n) = rb.shots {
            check(&mut d, n >= 1, "rb.shots", "must be at least 1");
        }
        d
    }
}

/// Failure to turn text into a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", d.field, d.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn single(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        diagnostics: vec![Diagnostic::new(field, message)],
    }
}

/// Parses a `--set` value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `key.path=value` overrides to a parsed table.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| single(item, "override must look like key=value"))?;
        let parts: Vec<&str> = key.trim().split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(single(key, "empty key segment"));
        }
        let mut cur = &mut *table;
        for p in &parts[..parts.len() - 1] {
            let entry = cur
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| single(key, format!("`{p}` is not a table")))?;
        }
        cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    }
    Ok(())
}

/// Parses, applies overrides, and validates.
pub fn load_str(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| single("config", e.message().to_string()))?;
    apply_overrides(&mut table, overrides)?;
    let config = RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| single("config", e.to_string()))?;
    let diagnostics = config.diagnostics();
    if diagnostics.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError { diagnostics })
    }
}

pub fn load_file(path: &std::path::Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| single("config", format!("{}: {e}", path.display())))?;
    load_str(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(load_str("", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        let e = load_str("[census]\nfmin = 0.9\n", &[]).unwrap_err();
        assert!(e.diagnostics[0].message.contains("fmin"), "{e}");
    }

    #[test]
    fn overrides_apply() {
        let c = load_str("", &["census.f_min=0.95".into(), "out=\"x\"".into(), "seed=9".into()]).unwrap();
        assert_eq!(c.census.f_min, 0.95);
        assert_eq!(c.out, "x");
        assert_eq!(c.seed, 9);
        let c = load_str("", &["out=plain".into()]).unwrap();
        assert_eq!(c.out, "plain");
    }

    #[test]
    fn physics_checks_name_fields() {
        let e = load_str("[isotopes]\nc_si29 = 1.5\n", &[]).unwrap_err();
        assert_eq!(e.diagnostics[0].field, "isotopes.c_si29");
        let e = load_str("[census]\nt_max_s = -1.0\n", &[]).unwrap_err();
        assert!(e.diagnostics.iter().any(|d| d.field == "census.t_max_s"));
    }
}
