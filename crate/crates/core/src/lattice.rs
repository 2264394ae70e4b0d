//! 4H-SiC crystal geometry around a c-axis divacancy and random bath sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hyperfine::{HyperfineTensor, SpinSpecies};

/// Default in-plane lattice constant of 4H-SiC (nm).
pub const A_4H_NM: f64 = 0.3079;
/// Default c-axis lattice constant of 4H-SiC (nm).
pub const C_4H_NM: f64 = 1.0082;
/// Fractional c-offset of each C atom above the Si of its bilayer (ideal tetrahedra).
pub const BOND_U: f64 = 3.0 / 16.0;
/// Default largest enumeration radius the supercell generator accepts (nm).
pub const DEFAULT_SUPERCELL_BOUND_NM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Element {
    Si,
    C,
}

/// Stacking environment of a lattice site: hexagonal or quasi-cubic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteClass {
    H,
    K,
}

/// Inequivalent c-axis divacancy configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Divacancy {
    #[default]
    Kk,
    Hh,
}

/// Lattice sites bonded to (or second neighbours of) the vacancies, whose
/// hyperfine couplings are dominated by contact terms and are tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CoreShell {
    /// Carbon dangling bonds around the silicon vacancy.
    CI,
    /// Silicon dangling bonds around the carbon vacancy.
    SiI,
    /// In-plane silicon second neighbours of the silicon vacancy.
    SiIIa,
    /// Silicon second neighbours of the silicon vacancy in the layer below.
    SiIIb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisAtom {
    pub element: Element,
    pub class: SiteClass,
    /// Fractional coordinates in the hexagonal cell.
    pub frac: [f64; 3],
}

/// Hexagonal 4H-SiC crystal with ABCB stacking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalModel {
    pub a_nm: f64,
    pub c_nm: f64,
    /// Lattice vectors as rows (nm).
    pub lattice: [[f64; 3]; 3],
    pub basis: Vec<BasisAtom>,
    /// Quantization axis (unit vector along [0001]).
    pub c_axis: [f64; 3],
    pub divacancy: Divacancy,
    pub supercell_bound_nm: f64,
}

impl Default for CrystalModel {
    fn default() -> Self {
        CrystalModel::four_h(A_4H_NM, C_4H_NM, Divacancy::Kk)
    }
}

impl CrystalModel {
    pub fn four_h(a_nm: f64, c_nm: f64, divacancy: Divacancy) -> Self {
        let s3 = 3f64.sqrt();
        let lattice = [[a_nm, 0.0, 0.0], [-0.5 * a_nm, 0.5 * s3 * a_nm, 0.0], [0.0, 0.0, c_nm]];
        // ABCB stacking: a layer is hexagonal when both of its neighbours
        // share a stacking position (A and C here), quasi-cubic otherwise.
        let layers = [
            ([0.0, 0.0], 0.0, SiteClass::H),
            ([1.0 / 3.0, 2.0 / 3.0], 0.25, SiteClass::K),
            ([2.0 / 3.0, 1.0 / 3.0], 0.5, SiteClass::H),
            ([1.0 / 3.0, 2.0 / 3.0], 0.75, SiteClass::K),
        ];
        let mut basis = Vec::with_capacity(8);
        for (xy, z, class) in layers {
            basis.push(BasisAtom {
                element: Element::Si,
                class,
                frac: [xy[0], xy[1], z],
            });
            basis.push(BasisAtom {
                element: Element::C,
                class,
                frac: [xy[0], xy[1], z + BOND_U],
            });
        }
        CrystalModel {
            a_nm,
            c_nm,
            lattice,
            basis,
            c_axis: [0.0, 0.0, 1.0],
            divacancy,
            supercell_bound_nm: DEFAULT_SUPERCELL_BOUND_NM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_nm > 0.0) || !(self.c_nm > 0.0) {
            return Err(invalid("crystal", "lattice constants must be positive"));
        }
        let n = norm(self.c_axis);
        if (n - 1.0).abs() > 1e-12 {
            return Err(invalid("crystal.c_axis", "must be unit norm"));
        }
        if self.basis.len() != 8 {
            return Err(invalid("crystal.basis", "4H cell holds 8 atoms"));
        }
        Ok(())
    }

    /// Nearest-neighbour Si–C bond length along the c axis (nm).
    pub fn bond_length(&self) -> f64 {
        BOND_U * self.c_nm
    }

    fn cartesian(&self, cell: [i64; 3], frac: [f64; 3]) -> [f64; 3] {
        let f = [
            cell[0] as f64 + frac[0],
            cell[1] as f64 + frac[1],
            cell[2] as f64 + frac[2],
        ];
        let l = &self.lattice;
        [
            f[0] * l[0][0] + f[1] * l[1][0] + f[2] * l[2][0],
            f[0] * l[0][1] + f[1] * l[1][1] + f[2] * l[2][1],
            f[0] * l[0][2] + f[1] * l[1][2] + f[2] * l[2][2],
        ]
    }

    /// Absolute positions of the silicon and carbon vacancies (nm) for the
    /// defect placed in the home cell.
    pub fn vacancy_positions(&self) -> ([f64; 3], [f64; 3]) {
        let (si_idx, c_idx) = match self.divacancy {
            Divacancy::Kk => (2, 3),
            Divacancy::Hh => (0, 1),
        };
        (
            self.cartesian([0, 0, 0], self.basis[si_idx].frac),
            self.cartesian([0, 0, 0], self.basis[c_idx].frac),
        )
    }

    /// Defect origin: midpoint of the two vacancies.
    pub fn defect_origin(&self) -> [f64; 3] {
        let (v_si, v_c) = self.vacancy_positions();
        [
            0.5 * (v_si[0] + v_c[0]),
            0.5 * (v_si[1] + v_c[1]),
            0.5 * (v_si[2] + v_c[2]),
        ]
    }
}

/// Spin-1/2 isotope fractions per element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotopeModel {
    pub c_si29: f64,
    pub c_c13: f64,
}

impl IsotopeModel {
    pub const NATURAL: IsotopeModel = IsotopeModel {
        c_si29: 0.047,
        c_c13: 0.011,
    };
    pub const PURIFIED: IsotopeModel = IsotopeModel {
        c_si29: 0.0015,
        c_c13: 0.0002,
    };

    pub fn new(c_si29: f64, c_c13: f64) -> Result<Self> {
        let m = IsotopeModel { c_si29, c_c13 };
        m.validate()?;
        Ok(m)
    }

    /// Equal fraction for both elements.
    pub fn uniform(c: f64) -> Result<Self> {
        Self::new(c, c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("isotopes.si29", self.c_si29), ("isotopes.c13", self.c_c13)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("{v} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn fraction(&self, element: Element) -> f64 {
        match element {
            Element::Si => self.c_si29,
            Element::C => self.c_c13,
        }
    }
}

/// A lattice site relative to the defect origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSite {
    /// Rank in the (distance, lattice key) ordering; stable across radii.
    pub index: usize,
    pub element: Element,
    pub class: SiteClass,
    pub position: [f64; 3],
    pub core_shell: Option<CoreShell>,
}

impl LatticeSite {
    pub fn distance(&self) -> f64 {
        norm(self.position)
    }
}

/// One occupied bath site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathSpin {
    pub site: LatticeSite,
    pub species: SpinSpecies,
    /// Filled in by [`crate::hyperfine::HyperfineModel::attach`].
    pub hyperfine: Option<HyperfineTensor>,
}

/// A seeded random isotopic configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathConfiguration {
    pub spins: Vec<BathSpin>,
    pub seed: u64,
    pub isotopes: IsotopeModel,
}

/// Flat export record of a bath spin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathRecord {
    pub site_index: usize,
    pub element: Element,
    pub position: [f64; 3],
    pub species: String,
}

impl BathConfiguration {
    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn records(&self) -> Vec<BathRecord> {
        self.spins
            .iter()
            .map(|s| BathRecord {
                site_index: s.site.index,
                element: s.site.element,
                position: s.site.position,
                species: s.species.name().to_string(),
            })
            .collect()
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// All lattice sites within `radius_nm` of the defect origin, sorted by
/// distance with a deterministic lattice-key tie break. Vacancy sites are
/// excluded.
pub fn enumerate_sites(crystal: &CrystalModel, radius_nm: f64) -> Result<Vec<LatticeSite>> {
    crystal.validate()?;
    if !(radius_nm >= 0.0) {
        return Err(invalid("radius", "must be non-negative"));
    }
    if radius_nm > crystal.supercell_bound_nm {
        return Err(Error::SupercellTooSmall {
            radius: radius_nm,
            bound: crystal.supercell_bound_nm,
        });
    }
    if radius_nm == 0.0 {
        return Ok(Vec::new());
    }
    let origin = crystal.defect_origin();
    let (v_si, v_c) = crystal.vacancy_positions();
    let in_plane = crystal.a_nm * 3f64.sqrt() / 2.0;
    let n_ab = (radius_nm / in_plane).ceil() as i64 + 2;
    let n_c = (radius_nm / crystal.c_nm).ceil() as i64 + 2;

    let bond = crystal.bond_length();
    let second = crystal.a_nm;
    let tol = 1e-6;

    let mut found: Vec<([i64; 4], LatticeSite, f64)> = Vec::new();
    for i in -n_ab..=n_ab {
        for j in -n_ab..=n_ab {
            for l in -n_c..=n_c {
                for (b, atom) in crystal.basis.iter().enumerate() {
                    let abs = crystal.cartesian([i, j, l], atom.frac);
                    let rel = sub(abs, origin);
                    let d = norm(rel);
                    if d > radius_nm {
                        continue;
                    }
                    let d_si = norm(sub(abs, v_si));
                    let d_c = norm(sub(abs, v_c));
                    if d_si < tol || d_c < tol {
                        continue;
                    }
                    let core_shell = match atom.element {
                        Element::C if (d_si - bond).abs() < 0.02 => Some(CoreShell::CI),
                        Element::Si if (d_c - bond).abs() < 0.02 => Some(CoreShell::SiI),
                        Element::Si if (d_si - second).abs() < 0.02 => {
                            if (abs[2] - v_si[2]).abs() < tol {
                                Some(CoreShell::SiIIa)
                            } else if abs[2] < v_si[2] {
                                Some(CoreShell::SiIIb)
                            } else {
                                None
                            }
                        }
                        _ => None,
                    };
                    found.push((
                        [l, i, j, b as i64],
                        LatticeSite {
                            index: 0,
                            element: atom.element,
                            class: atom.class,
                            position: rel,
                            core_shell,
                        },
                        d,
                    ));
                }
            }
        }
    }
    // Distances are rounded so symmetry-equivalent sites tie exactly and the
    // lattice key decides their order.
    found.sort_by(|x, y| {
        let dx = (x.2 * 1e9).round();
        let dy = (y.2 * 1e9).round();
        dx.total_cmp(&dy).then(x.0.cmp(&y.0))
    });
    Ok(found
        .into_iter()
        .enumerate()
        .map(|(k, (_, mut site, _))| {
            site.index = k;
            site
        })
        .collect())
}

/// Occupies each site with its spin-1/2 isotope independently with the
/// element's fraction.
pub fn sample_bath(sites: &[LatticeSite], isotopes: &IsotopeModel, seed: u64) -> Result<BathConfiguration> {
    isotopes.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spins = Vec::new();
    for site in sites {
        let c = isotopes.fraction(site.element);
        // One draw per site regardless of c keeps the stream aligned across
        // concentrations.
        let u: f64 = rng.random();
        if u < c {
            spins.push(BathSpin {
                site: *site,
                species: SpinSpecies::for_element(site.element),
                hyperfine: None,
            });
        }
    }
    Ok(BathConfiguration {
        spins,
        seed,
        isotopes: *isotopes,
    })
}

/// Poisson-distributed paramagnetic point defects, uniform in a sphere of
/// `radius_nm` around the defect. `density_cm3` is in cm⁻³.
pub fn sample_paramagnetic_bath(density_cm3: f64, radius_nm: f64, seed: u64) -> Result<Vec<[f64; 3]>> {
    if !(density_cm3 >= 0.0) {
        return Err(invalid("paramagnetic.density", "must be non-negative"));
    }
    if !(radius_nm >= 0.0) {
        return Err(invalid("paramagnetic.radius", "must be non-negative"));
    }
    let expected = expected_paramagnetic_count(density_cm3, radius_nm);
    if expected == 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(expected).map_err(|e| invalid("paramagnetic.density", e.to_string()))?;
    let count = poisson.sample(&mut rng) as usize;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if norm(p) <= 1.0 {
            out.push([p[0] * radius_nm, p[1] * radius_nm, p[2] * radius_nm]);
        }
    }
    Ok(out)
}

/// Expected number of paramagnetic defects in the sphere.
pub fn expected_paramagnetic_count(density_cm3: f64, radius_nm: f64) -> f64 {
    let r_cm = radius_nm * 1e-7;
    density_cm3 * 4.0 / 3.0 * std::f64::consts::PI * r_cm.powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_four_si_four_c_inside_cell() {
        let crystal = CrystalModel::default();
        crystal.validate().unwrap();
        let si = crystal.basis.iter().filter(|b| b.element == Element::Si).count();
        assert_eq!(si, 4);
        for b in &crystal.basis {
            assert!(b.frac.iter().all(|f| (0.0..1.0).contains(f)));
        }
    }

    #[test]
    fn zero_radius_is_empty() {
        let sites = enumerate_sites(&CrystalModel::default(), 0.0).unwrap();
        assert!(sites.is_empty());
    }

    #[test]
    fn radius_beyond_bound_errors() {
        let crystal = CrystalModel::default();
        let err = enumerate_sites(&crystal, 25.0).unwrap_err();
        assert!(err.to_string().contains("supercell too small"));
    }

    #[test]
    fn core_shells_have_expected_multiplicity() {
        let sites = enumerate_sites(&CrystalModel::default(), 0.6).unwrap();
        let count = |s| sites.iter().filter(|x| x.core_shell == Some(s)).count();
        assert_eq!(count(CoreShell::CI), 3);
        assert_eq!(count(CoreShell::SiI), 3);
        assert_eq!(count(CoreShell::SiIIa), 6);
        assert_eq!(count(CoreShell::SiIIb), 3);
    }

    #[test]
    fn vacancies_never_enumerated() {
        let crystal = CrystalModel::default();
        let sites = enumerate_sites(&crystal, 1.0).unwrap();
        assert!(sites.iter().all(|s| s.distance() > 0.05));
    }

    #[test]
    fn indices_are_stable_prefix_across_radii() {
        let crystal = CrystalModel::default();
        let small = enumerate_sites(&crystal, 1.0).unwrap();
        let big = enumerate_sites(&crystal, 1.5).unwrap();
        assert_eq!(&big[..small.len()], &small[..]);
    }

    #[test]
    fn full_occupancy_and_empty_bath() {
        let sites = enumerate_sites(&CrystalModel::default(), 1.0).unwrap();
        let none = sample_bath(&sites, &IsotopeModel::new(0.0, 0.0).unwrap(), 1).unwrap();
        assert!(none.is_empty());
        let all_si = sample_bath(&sites, &IsotopeModel::new(1.0, 0.0).unwrap(), 1).unwrap();
        let n_si = sites.iter().filter(|s| s.element == Element::Si).count();
        assert_eq!(all_si.len(), n_si);
        assert!(all_si.spins.iter().all(|s| s.site.element == Element::Si));
    }

    #[test]
    fn invalid_isotopes_rejected() {
        assert!(IsotopeModel::new(1.5, 0.0).is_err());
        assert!(IsotopeModel::new(0.0, -0.1).is_err());
    }

    #[test]
    fn paramagnetic_zero_density_and_determinism() {
        assert!(sample_paramagnetic_bath(0.0, 100.0, 3).unwrap().is_empty());
        let a = sample_paramagnetic_bath(1e15, 100.0, 9).unwrap();
        let b = sample_paramagnetic_bath(1e15, 100.0, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| norm(*p) <= 100.0));
    }

    #[test]
    fn expected_count_at_reference_density() {
        let n = expected_paramagnetic_count(1e15, 100.0);
        assert!((n - 4.18879).abs() < 1e-4);
    }
}
