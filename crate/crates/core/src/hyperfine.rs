//! Spin species, point-dipole hyperfine tensors, nuclear pair couplings and
//! the central-spin pseudospin model.
//!
//! All couplings are angular frequencies (rad/s) and positions are in nm.
//! The quantization axis `z` is the crystal c axis.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{norm, BathConfiguration, CoreShell, Element, LatticeSite};
use crate::{hz_to_rad, TWO_PI};

/// μ0/4π in T·m/A.
pub const MU0_OVER_4PI: f64 = 1e-7;
/// Reduced Planck constant (J·s, CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Electron gyromagnetic ratio magnitude, γ/2π = 28.025 GHz/T (g ≈ 2).
pub const GAMMA_E: f64 = TWO_PI * 28.025e9;
/// ²⁹Si gyromagnetic ratio, γ/2π = −8.465 MHz/T.
pub const GAMMA_SI29: f64 = -TWO_PI * 8.465e6;
/// ¹³C gyromagnetic ratio, γ/2π = +10.7084 MHz/T.
pub const GAMMA_C13: f64 = TWO_PI * 10.7084e6;
/// Point-dipole tensors are refused closer than this to the defect (nm).
pub const CORE_EXCLUSION_NM: f64 = 0.1;
/// Parallel hyperfine below which a nucleus counts as weakly coupled.
pub const WEAK_COUPLING_CUTOFF: f64 = TWO_PI * 60e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeciesKind {
    Si29,
    C13,
    /// Spin-1/2 paramagnetic defect (dark electron spin).
    Electron,
}

/// A spin-1/2 species with its signed gyromagnetic ratio (rad·s⁻¹·T⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSpecies {
    pub kind: SpeciesKind,
    pub gamma: f64,
}

impl SpinSpecies {
    pub const SI29: SpinSpecies = SpinSpecies {
        kind: SpeciesKind::Si29,
        gamma: GAMMA_SI29,
    };
    pub const C13: SpinSpecies = SpinSpecies {
        kind: SpeciesKind::C13,
        gamma: GAMMA_C13,
    };
    pub const DARK_ELECTRON: SpinSpecies = SpinSpecies {
        kind: SpeciesKind::Electron,
        gamma: GAMMA_E,
    };

    pub fn for_element(element: Element) -> SpinSpecies {
        match element {
            Element::Si => Self::SI29,
            Element::C => Self::C13,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SpeciesKind::Si29 => "29Si",
            SpeciesKind::C13 => "13C",
            SpeciesKind::Electron => "e",
        }
    }

    /// Every species in scope is spin-1/2.
    pub fn spin(&self) -> f64 {
        0.5
    }

    /// Signed Larmor frequency γ·B (rad/s).
    pub fn larmor(&self, field_t: f64) -> f64 {
        self.gamma * field_t
    }
}

/// Central divacancy spin reduced to a pseudospin {m_s = 0, m_s = branch}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectronModel {
    /// Zero-field splitting D (rad/s); only used for display.
    pub zfs: f64,
    pub gamma_e: f64,
    /// Active pseudospin branch, +1 or −1.
    pub branch: i8,
    /// Field along the c axis (T).
    pub field_t: f64,
}

impl Default for ElectronModel {
    fn default() -> Self {
        ElectronModel {
            zfs: hz_to_rad(1.336e9),
            gamma_e: GAMMA_E,
            branch: -1,
            field_t: 0.05,
        }
    }
}

impl ElectronModel {
    pub fn with_field_gauss(gauss: f64) -> Self {
        ElectronModel {
            field_t: gauss * 1e-4,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branch != 1 && self.branch != -1 {
            return Err(invalid("electron.branch", "must be +1 or -1"));
        }
        if !(self.field_t >= 0.0) {
            return Err(invalid("electron.field", "must be non-negative"));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        f64::from(self.branch)
    }
}

/// Symmetric 3×3 hyperfine tensor (rad/s), row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineTensor {
    pub m: [[f64; 3]; 3],
}

impl HyperfineTensor {
    /// Builds the secular part of a tensor from tabulated couplings with the
    /// transverse component pointing along `azimuth` (rad).
    pub fn from_components(a_par: f64, a_perp: f64, azimuth: f64) -> Self {
        let (s, c) = azimuth.sin_cos();
        let xz = a_perp * c;
        let yz = a_perp * s;
        HyperfineTensor {
            m: [[-0.5 * a_par, 0.0, xz], [0.0, -0.5 * a_par, yz], [xz, yz, a_par]],
        }
    }

    pub fn a_par(&self) -> f64 {
        self.m[2][2]
    }

    pub fn a_perp(&self) -> f64 {
        self.m[0][2].hypot(self.m[1][2])
    }

    /// The `(A_zx, A_zy, A_zz)` row that survives the secular approximation
    /// for the electron spin.
    pub fn secular_row(&self) -> [f64; 3] {
        [self.m[2][0], self.m[2][1], self.m[2][2]]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    /// Tensor in Hz for export.
    pub fn to_hz(&self) -> [[f64; 3]; 3] {
        let mut out = self.m;
        for row in &mut out {
            for v in row.iter_mut() {
                *v /= TWO_PI;
            }
        }
        out
    }
}

/// Dipolar prefactor (μ0/4π)·γ1γ2ħ/|r|³ in rad/s for `r` in nm.
pub fn dipolar_prefactor(r_nm: f64, gamma_1: f64, gamma_2: f64) -> f64 {
    let r_m = r_nm * 1e-9;
    MU0_OVER_4PI * gamma_1 * gamma_2 * HBAR / (r_m * r_m * r_m)
}

/// Point-dipole electron–nuclear hyperfine tensor
/// `A = (μ0/4π)(γ_e γ_n ħ/|r|³)(3 r̂ r̂ᵀ − 1)`.
pub fn dipolar_hyperfine(r_nm: [f64; 3], gamma_e: f64, gamma_n: f64) -> Result<HyperfineTensor> {
    let d = norm(r_nm);
    if !(d > CORE_EXCLUSION_NM) {
        return Err(Error::CoreExclusion(d));
    }
    let pref = dipolar_prefactor(d, gamma_e, gamma_n);
    let u = [r_nm[0] / d, r_nm[1] / d, r_nm[2] / d];
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            *v = pref * (3.0 * u[i] * u[j] - delta);
        }
    }
    // Exact symmetry regardless of rounding in the products above.
    for i in 0..3 {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    Ok(HyperfineTensor { m })
}

/// Secular dipolar coupling of two bath spins:
/// `H = c_zz I_z I_z + b_ff (I₊I₋ + I₋I₊)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCoupling {
    pub c_zz: f64,
    /// `−c_zz/4` for like spins, zero for unlike spins.
    pub b_ff: f64,
}

/// Secular dipolar pair coupling. Flip-flops between unlike species are
/// dropped since their Larmor mismatch exceeds the coupling.
pub fn nuclear_pair_coupling(r_ij_nm: [f64; 3], gamma_i: f64, gamma_j: f64) -> Result<PairCoupling> {
    let d = norm(r_ij_nm);
    if !(d > 0.0) {
        return Err(Error::ZeroSeparation);
    }
    let cos = r_ij_nm[2] / d;
    let c_zz = dipolar_prefactor(d, gamma_i, gamma_j) * (1.0 - 3.0 * cos * cos);
    let like = (gamma_i - gamma_j).abs() <= 1e-12 * gamma_i.abs().max(gamma_j.abs());
    Ok(PairCoupling {
        c_zz,
        b_ff: if like { -0.25 * c_zz } else { 0.0 },
    })
}

/// Conditional nuclear field `(ω_∥, ω_⊥)` for electron projection `alpha`:
/// `H_α = (ω_L + α A_∥) I_z + α A_⊥ I_x` with `ω_L = γ_n B`.
pub fn effective_fields(tensor: &HyperfineTensor, gamma_n: f64, electron: &ElectronModel, alpha: f64) -> (f64, f64) {
    let omega_l = gamma_n * electron.field_t;
    (omega_l + alpha * tensor.a_par(), alpha * tensor.a_perp())
}

/// Tabulated couplings (rad/s) for a contact-dominated core site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabulatedHyperfine {
    pub a_par: f64,
    pub a_perp: f64,
}

/// Fills bath hyperfine tensors: tabulated values on core shells, point
/// dipole elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperfineModel {
    pub gamma_e: f64,
    pub overrides: BTreeMap<CoreShell, TabulatedHyperfine>,
}

impl Default for HyperfineModel {
    fn default() -> Self {
        let mut overrides = BTreeMap::new();
        let tab = |par_mhz: f64, perp_mhz: f64| TabulatedHyperfine {
            a_par: hz_to_rad(par_mhz * 1e6),
            a_perp: hz_to_rad(perp_mhz * 1e6),
        };
        overrides.insert(CoreShell::CI, tab(50.0, 5.0));
        overrides.insert(CoreShell::SiI, tab(2.7, 0.3));
        overrides.insert(CoreShell::SiIIa, tab(13.2, 1.5));
        overrides.insert(CoreShell::SiIIb, tab(9.2, 1.0));
        HyperfineModel {
            gamma_e: GAMMA_E,
            overrides,
        }
    }
}

impl HyperfineModel {
    pub fn tensor_for_site(&self, site: &LatticeSite) -> Result<HyperfineTensor> {
        if let Some(tab) = site.core_shell.and_then(|s| self.overrides.get(&s)) {
            let azimuth = site.position[1].atan2(site.position[0]);
            return Ok(HyperfineTensor::from_components(tab.a_par, tab.a_perp, azimuth));
        }
        let species = SpinSpecies::for_element(site.element);
        dipolar_hyperfine(site.position, self.gamma_e, species.gamma)
    }

    /// True when the site's coupling comes from the tabulated core table.
    pub fn is_tabulated(&self, site: &LatticeSite) -> bool {
        site.core_shell.is_some_and(|s| self.overrides.contains_key(&s))
    }

    pub fn attach(&self, bath: &mut BathConfiguration) -> Result<()> {
        for spin in &mut bath.spins {
            spin.hyperfine = Some(self.tensor_for_site(&spin.site)?);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_sites, CrystalModel};
    use crate::rad_to_hz;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn axial_tensor_has_no_transverse_part() {
        let t = dipolar_hyperfine([0.0, 0.0, 0.8], GAMMA_E, GAMMA_SI29).unwrap();
        assert_eq!(t.a_perp(), 0.0);
        let pref = dipolar_prefactor(0.8, GAMMA_E, GAMMA_SI29);
        assert!(rel(t.a_par(), 2.0 * pref) < 1e-14);
    }

    #[test]
    fn magic_angle_has_no_parallel_part() {
        let theta = (1.0f64 / 3.0).sqrt().acos();
        let r = [theta.sin(), 0.0, theta.cos()];
        let t = dipolar_hyperfine(r, GAMMA_E, GAMMA_C13).unwrap();
        assert!(t.a_par().abs() < 1e-9 * t.a_perp());
    }

    #[test]
    fn si29_one_nm_matches_scalar_formula() {
        // Independent scalar evaluation with CODATA constants.
        let mu0 = 4.0 * std::f64::consts::PI * 1e-7;
        let scalar = mu0 / (4.0 * std::f64::consts::PI)
            * (2.0 * std::f64::consts::PI * 28.025e9)
            * (-2.0 * std::f64::consts::PI * 8.465e6)
            * 1.054571817e-34
            / 1e-27
            * 2.0;
        let t = dipolar_hyperfine([0.0, 0.0, 1.0], GAMMA_E, GAMMA_SI29).unwrap();
        assert!(rel(t.a_par(), scalar) < 1e-12);
        // About 31 kHz in magnitude at one nanometre.
        assert!((rad_to_hz(t.a_par()).abs() - 31.4e3).abs() < 0.5e3);
    }

    #[test]
    fn core_exclusion_is_an_error() {
        let err = dipolar_hyperfine([0.05, 0.0, 0.0], GAMMA_E, GAMMA_SI29).unwrap_err();
        assert!(err.to_string().contains("tabulated contact hyperfine"));
    }

    #[test]
    fn pair_coupling_magic_angle_and_scalar_oracle() {
        let theta = (1.0f64 / 3.0).sqrt().acos();
        let p = nuclear_pair_coupling([theta.sin(), 0.0, theta.cos()], GAMMA_SI29, GAMMA_SI29).unwrap();
        assert!(p.c_zz.abs() < 1e-12);

        let p = nuclear_pair_coupling([0.308, 0.0, 0.0], GAMMA_SI29, GAMMA_SI29).unwrap();
        let scalar = 1e-7 * GAMMA_SI29 * GAMMA_SI29 * 1.054571817e-34 / (0.308e-9f64).powi(3);
        assert!(rel(p.c_zz, scalar) < 1e-12);
        assert!(rel(p.b_ff, -0.25 * scalar) < 1e-12);
    }

    #[test]
    fn heteronuclear_pairs_do_not_flip_flop() {
        let p = nuclear_pair_coupling([0.3, 0.1, 0.2], GAMMA_SI29, GAMMA_C13).unwrap();
        assert_eq!(p.b_ff, 0.0);
        assert!(p.c_zz != 0.0);
        assert_eq!(
            nuclear_pair_coupling([0.0; 3], GAMMA_SI29, GAMMA_SI29).unwrap_err(),
            Error::ZeroSeparation
        );
    }

    #[test]
    fn effective_fields_limits() {
        let electron = ElectronModel::with_field_gauss(584.0);
        let t = HyperfineTensor::from_components(hz_to_rad(650.0), hz_to_rad(11.45e3), 0.3);
        let wl = GAMMA_SI29 * electron.field_t;
        assert_eq!(effective_fields(&t, GAMMA_SI29, &electron, 0.0), (wl, 0.0));
        let axial = HyperfineTensor::from_components(hz_to_rad(650.0), 0.0, 0.0);
        let (par, perp) = effective_fields(&axial, GAMMA_SI29, &electron, -1.0);
        assert_eq!(perp, 0.0);
        assert!((par - (wl - hz_to_rad(650.0))).abs() < 1e-9);

        let (up, _) = effective_fields(&t, GAMMA_SI29, &electron, 1.0);
        let (down, _) = effective_fields(&t, GAMMA_SI29, &electron, -1.0);
        assert!(((up - down) - hz_to_rad(1300.0)).abs() < 1e-9);
    }

    #[test]
    fn tabulated_core_sites_use_overrides() {
        let model = HyperfineModel::default();
        let sites = enumerate_sites(&CrystalModel::default(), 0.5).unwrap();
        let iia = sites.iter().find(|s| s.core_shell == Some(CoreShell::SiIIa)).unwrap();
        let t = model.tensor_for_site(iia).unwrap();
        assert!((rad_to_hz(t.a_par()) - 13.2e6).abs() < 1e-3);
        assert!(model.is_tabulated(iia));
    }
}
