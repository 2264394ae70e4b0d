//! Expected number of usable weakly coupled nuclear memories.
//!
//! A site `i` is usable when some gate design `(N, τ)` for it reaches the
//! fidelity threshold once the crosstalk from every other site is averaged
//! over isotopic occupancy: `P = ∏_{j≠i} (1 − c_j (1 − M_j))`. The census is
//! the occupancy-weighted count of usable sites.
//!
//! Sites sharing species and couplings are grouped into classes. Per class
//! and design, the terms `m_j = 1 − M_j` are reduced once to the large
//! entries plus power sums of the small ones, so any concentration can be
//! evaluated without touching the lattice again.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddgate::{candidate_designs, magnetization_from_fields, DesignOptions, GateDesign, Nucleus};
use crate::error::{invalid, Result};
use crate::hyperfine::{ElectronModel, HyperfineModel, SpinSpecies, WEAK_COUPLING_CUTOFF};
use crate::lattice::{Element, IsotopeModel, LatticeSite};

/// `m_j` above this is kept explicitly; below it enters the power sums.
const EXPLICIT_M: f64 = 0.1;
/// Power sums `Σ m^k`, `k = 1..=POWER_TERMS`. With `c·m ≤ 0.1` the truncated
/// log series is accurate to ~1e-14.
const POWER_TERMS: usize = 14;

/// Usability thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryCriteria {
    pub f_min: f64,
    /// Maximum gate time `2Nτ` (s).
    pub t_max: f64,
    pub theta_target: f64,
    pub k_max: u32,
    /// Optional bounds on `|A_∥|` (rad/s) of counted sites.
    pub a_par_window: Option<(f64, f64)>,
}

impl Default for MemoryCriteria {
    fn default() -> Self {
        MemoryCriteria {
            f_min: 0.9,
            t_max: 1.5e-3,
            theta_target: std::f64::consts::FRAC_PI_2,
            k_max: 6,
            a_par_window: None,
        }
    }
}

impl MemoryCriteria {
    /// Default criteria restricted to `|A_∥| < 2π·60 kHz`.
    pub fn low_hyperfine() -> Self {
        MemoryCriteria {
            a_par_window: Some((0.0, WEAK_COUPLING_CUTOFF)),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0 && self.f_min <= 1.0) {
            return Err(invalid("criteria.f_min", "must lie in (0, 1]"));
        }
        if !(self.t_max > 0.0) {
            return Err(invalid("criteria.t_max", "must be positive"));
        }
        if !(self.theta_target > 0.0 && self.theta_target <= std::f64::consts::PI) {
            return Err(invalid("criteria.theta_target", "must lie in (0, π]"));
        }
        if let Some((lo, hi)) = self.a_par_window {
            if !(lo >= 0.0 && hi > lo) {
                return Err(invalid("criteria.a_par_window", "need 0 ≤ low < high"));
            }
        }
        Ok(())
    }

    fn in_window(&self, a_par: f64) -> bool {
        self.a_par_window
            .is_none_or(|(lo, hi)| a_par.abs() >= lo && a_par.abs() < hi)
    }
}

/// How a design's fidelity is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityModel {
    /// `F = (1 + P)/2 · F_gate`.
    #[default]
    Crosstalk,
    /// `F = (1 − M_i P)/2`, meaningful for `θ = π`.
    Magnetization,
}

/// `∏ (1 − c_j (1 − M_j))` over `(c_j, M_j)` pairs.
pub fn expected_crosstalk(terms: &[(f64, f64)]) -> f64 {
    terms.iter().map(|(c, m)| 1.0 - c * (1.0 - m)).product()
}

/// One row of a census.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    /// Index of the class representative.
    pub site_index: usize,
    pub element: Element,
    pub multiplicity: u32,
    pub a_par: f64,
    pub a_perp: f64,
    pub tabulated: bool,
    pub design: Option<GateDesign>,
    pub crosstalk: f64,
    pub fidelity: f64,
    pub usable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusResult {
    pub n_mem: f64,
    /// Usable classes only.
    pub records: Vec<SiteRecord>,
    /// `(|A_∥| bin start in kHz, weight)` with weights `c_i`.
    pub histogram: Vec<(f64, f64)>,
    /// Weighted median `|A_∥|` (rad/s) over usable sites; NaN when none.
    pub median_a_par: f64,
}

/// Symmetry class of sites with equal species and couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteClass {
    pub representative: LatticeSite,
    pub species: SpinSpecies,
    pub multiplicity: u32,
    pub a_par: f64,
    pub a_perp: f64,
    pub tabulated: bool,
}

/// Groups sites by element and couplings (rounded to 1e-3 rad/s).
pub fn site_classes(sites: &[LatticeSite], hyperfine: &HyperfineModel) -> Result<Vec<SiteClass>> {
    let mut map: BTreeMap<(u8, i64, i64), SiteClass> = BTreeMap::new();
    for site in sites {
        let t = hyperfine.tensor_for_site(site)?;
        let (a_par, a_perp) = (t.a_par(), t.a_perp());
        let key = (
            site.element as u8,
            (a_par * 1e3).round() as i64,
            (a_perp * 1e3).round() as i64,
        );
        map.entry(key).and_modify(|c| c.multiplicity += 1).or_insert(SiteClass {
            representative: *site,
            species: SpinSpecies::for_element(site.element),
            multiplicity: 1,
            a_par,
            a_perp,
            tabulated: hyperfine.is_tabulated(site),
        });
    }
    let mut classes: Vec<SiteClass> = map.into_values().collect();
    classes.sort_by_key(|c| c.representative.index);
    Ok(classes)
}

fn element_slot(e: Element) -> usize {
    match e {
        Element::Si => 0,
        Element::C => 1,
    }
}

/// Crosstalk terms of one design, independent of concentration.
#[derive(Debug, Clone, PartialEq)]
struct CachedDesign {
    design: GateDesign,
    /// Own magnetization `M_i` at this design.
    m_self: f64,
    /// `(class, effective multiplicity, m_j)` with `m_j > EXPLICIT_M`.
    explicit: Vec<(u32, u32, f64)>,
    /// `[species][k-1] = Σ mult·m^k` over the remaining classes.
    power: [[f64; POWER_TERMS]; 2],
}

impl CachedDesign {
    fn crosstalk(&self, classes: &[SiteClass], isotopes: &IsotopeModel) -> f64 {
        let mut p = 1.0;
        for &(j, mult, m) in &self.explicit {
            let c = isotopes.fraction(classes[j as usize].representative.element);
            p *= (1.0 - c * m).powi(mult as i32);
        }
        let mut log = 0.0;
        for (slot, e) in [Element::Si, Element::C].into_iter().enumerate() {
            let c = isotopes.fraction(e);
            if c == 0.0 {
                continue;
            }
            let mut ck = 1.0;
            for k in 1..=POWER_TERMS {
                ck *= c;
                log -= ck * self.power[slot][k - 1] / k as f64;
            }
        }
        p * log.exp()
    }
}

/// Precomputed designs and crosstalk terms for every class.
#[derive(Debug, Clone)]
pub struct CensusEngine {
    pub classes: Vec<SiteClass>,
    designs: Vec<Vec<CachedDesign>>,
    electron: ElectronModel,
    theta_target: f64,
    t_max: f64,
    k_max: u32,
    f_gate_floor: f64,
}

impl CensusEngine {
    /// Builds the cache for designs with gate time `≤ t_max`, order `≤ k_max`
    /// and intrinsic fidelity `≥ f_gate_floor`. Criteria evaluated later must
    /// not exceed these bounds.
    pub fn build(
        sites: &[LatticeSite],
        hyperfine: &HyperfineModel,
        electron: &ElectronModel,
        theta_target: f64,
        k_max: u32,
        t_max: f64,
        f_gate_floor: f64,
    ) -> Result<Self> {
        electron.validate()?;
        let classes = site_classes(sites, hyperfine)?;
        let fields: Vec<([f64; 3], [f64; 3])> = classes
            .iter()
            .map(|c| Nucleus::new(c.species, c.a_par, c.a_perp).branch_fields(electron))
            .collect();
        let opts = DesignOptions::default();
        let designs = classes
            .par_iter()
            .enumerate()
            .map(|(i, ci)| {
                let nucleus = Nucleus::new(ci.species, ci.a_par, ci.a_perp);
                candidate_designs(&nucleus, electron, theta_target, k_max, t_max, &opts)
                    .into_iter()
                    .filter(|d| d.fidelity >= f_gate_floor)
                    .map(|d| cache_design(d, i, &classes, &fields))
                    .collect()
            })
            .collect();
        Ok(CensusEngine {
            classes,
            designs,
            electron: *electron,
            theta_target,
            t_max,
            k_max,
            f_gate_floor,
        })
    }

    pub fn electron(&self) -> &ElectronModel {
        &self.electron
    }

    fn check(&self, criteria: &MemoryCriteria) -> Result<()> {
        criteria.validate()?;
        if (criteria.theta_target - self.theta_target).abs() > 1e-12 {
            return Err(invalid("criteria.theta_target", "differs from the cached target"));
        }
        if criteria.t_max > self.t_max * (1.0 + 1e-12) {
            return Err(invalid("criteria.t_max", "exceeds the cached maximum gate time"));
        }
        if criteria.k_max > self.k_max {
            return Err(invalid("criteria.k_max", "exceeds the cached maximum order"));
        }
        if criteria.f_min < self.f_gate_floor {
            return Err(invalid("criteria.f_min", "below the cached fidelity floor"));
        }
        Ok(())
    }

    /// Best-scoring record of class `i`.
    fn evaluate_class(
        &self,
        i: usize,
        isotopes: &IsotopeModel,
        criteria: &MemoryCriteria,
        model: FidelityModel,
    ) -> SiteRecord {
        let class = &self.classes[i];
        let mut best: Option<(f64, f64, GateDesign)> = None;
        for cd in &self.designs[i] {
            let d = &cd.design;
            if d.gate_time > criteria.t_max || d.k > criteria.k_max {
                continue;
            }
            if best.is_some_and(|(f, _, _)| d.fidelity <= f) && model == FidelityModel::Crosstalk {
                // F ≤ F_gate, so this design cannot win.
                continue;
            }
            let p = cd.crosstalk(&self.classes, isotopes);
            let f = match model {
                FidelityModel::Crosstalk => 0.5 * (1.0 + p) * d.fidelity,
                FidelityModel::Magnetization => 0.5 * (1.0 - cd.m_self * p),
            };
            if best.is_none_or(|(bf, _, _)| f > bf) {
                best = Some((f, p, *d));
            }
        }
        let (fidelity, crosstalk, design) = match best {
            Some((f, p, d)) => (f, p, Some(d)),
            None => (0.0, 1.0, None),
        };
        SiteRecord {
            site_index: class.representative.index,
            element: class.representative.element,
            multiplicity: class.multiplicity,
            a_par: class.a_par,
            a_perp: class.a_perp,
            tabulated: class.tabulated,
            design,
            crosstalk,
            fidelity,
            usable: design.is_some() && fidelity >= criteria.f_min,
        }
    }

    /// All class records (usable or not) that fall in the criteria window.
    pub fn records(
        &self,
        isotopes: &IsotopeModel,
        criteria: &MemoryCriteria,
        model: FidelityModel,
    ) -> Result<Vec<SiteRecord>> {
        isotopes.validate()?;
        self.check(criteria)?;
        Ok((0..self.classes.len())
            .into_par_iter()
            .filter(|&i| criteria.in_window(self.classes[i].a_par))
            .map(|i| self.evaluate_class(i, isotopes, criteria, model))
            .collect())
    }

    pub fn census(
        &self,
        isotopes: &IsotopeModel,
        criteria: &MemoryCriteria,
        model: FidelityModel,
    ) -> Result<CensusResult> {
        let records: Vec<SiteRecord> = self
            .records(isotopes, criteria, model)?
            .into_iter()
            .filter(|r| r.usable && isotopes.fraction(r.element) > 0.0)
            .collect();
        let weights: Vec<(f64, f64)> = records
            .iter()
            .map(|r| (r.a_par.abs(), isotopes.fraction(r.element) * f64::from(r.multiplicity)))
            .collect();
        // Sequential sum in class order keeps the total reproducible.
        let n_mem = weights.iter().fold(0.0, |acc, w| acc + w.1);
        Ok(CensusResult {
            n_mem,
            histogram: histogram(&weights, 2.0),
            median_a_par: weighted_median(&weights),
            records,
        })
    }
}

fn cache_design(design: GateDesign, i: usize, classes: &[SiteClass], fields: &[([f64; 3], [f64; 3])]) -> CachedDesign {
    let mut explicit = Vec::new();
    let mut power = [[0.0; POWER_TERMS]; 2];
    let mut m_self = 1.0;
    for (j, (cj, &(h0, h1))) in classes.iter().zip(fields).enumerate() {
        let mag = magnetization_from_fields(h0, h1, design.n_pulses, design.tau);
        let mult = cj.multiplicity - u32::from(i == j);
        if i == j {
            m_self = mag;
        }
        if mult == 0 {
            continue;
        }
        let m = 1.0 - mag;
        if m > EXPLICIT_M {
            explicit.push((j as u32, mult, m));
        } else if m > 0.0 {
            let slot = element_slot(cj.representative.element);
            let mut mk = f64::from(mult);
            for k in 0..POWER_TERMS {
                mk *= m;
                power[slot][k] += mk;
            }
        }
    }
    CachedDesign {
        design,
        m_self,
        explicit,
        power,
    }
}

/// Weighted median of `(value, weight)` pairs; NaN when the total is zero.
pub fn weighted_median(items: &[(f64, f64)]) -> f64 {
    let total: f64 = items.iter().map(|i| i.1).sum();
    if !(total > 0.0) {
        return f64::NAN;
    }
    let mut v = items.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (x, w) in v {
        acc += w;
        if acc >= 0.5 * total {
            return x;
        }
    }
    f64::NAN
}

/// Histogram of `|A_∥|` in `bin_khz` bins.
fn histogram(items: &[(f64, f64)], bin_khz: f64) -> Vec<(f64, f64)> {
    let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
    for &(a, w) in items {
        let khz = crate::rad_to_hz(a) / 1e3;
        *bins.entry((khz / bin_khz).floor() as i64).or_default() += w;
    }
    bins.into_iter().map(|(b, w)| (b as f64 * bin_khz, w)).collect()
}

/// Direct, uncached evaluation of site `target` (an index into `sites`) at
/// one design. Used as a reference for the cached engine.
pub fn site_crosstalk(
    target: usize,
    design: &GateDesign,
    sites: &[LatticeSite],
    hyperfine: &HyperfineModel,
    isotopes: &IsotopeModel,
    electron: &ElectronModel,
) -> Result<f64> {
    let mut terms = Vec::with_capacity(sites.len());
    for (j, site) in sites.iter().enumerate() {
        if j == target {
            continue;
        }
        let t = hyperfine.tensor_for_site(site)?;
        let n = Nucleus::from_tensor(SpinSpecies::for_element(site.element), &t);
        let (h0, h1) = n.branch_fields(electron);
        let m = magnetization_from_fields(h0, h1, design.n_pulses, design.tau);
        terms.push((isotopes.fraction(site.element), m));
    }
    Ok(expected_crosstalk(&terms))
}

/// One row of a concentration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub concentration: f64,
    pub n_mem_all: f64,
    pub n_mem_low: f64,
    /// Median usable `|A_∥|` in the low-hyperfine subset (kHz).
    pub median_a_par_khz: f64,
    pub histogram: Vec<(f64, f64)>,
}

/// Census per concentration with `[¹³C] = [²⁹Si] = c`.
pub fn concentration_sweep(
    engine: &CensusEngine,
    concentrations: &[f64],
    criteria: &MemoryCriteria,
    model: FidelityModel,
) -> Result<Vec<SweepRow>> {
    if concentrations.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("concentrations", "must be strictly increasing"));
    }
    let all = MemoryCriteria {
        a_par_window: None,
        ..*criteria
    };
    let low = MemoryCriteria {
        a_par_window: criteria.a_par_window.or(Some((0.0, WEAK_COUPLING_CUTOFF))),
        ..*criteria
    };
    concentrations
        .iter()
        .map(|&c| {
            let iso = IsotopeModel::uniform(c)?;
            let a = engine.census(&iso, &all, model)?;
            let l = engine.census(&iso, &low, model)?;
            Ok(SweepRow {
                concentration: c,
                n_mem_all: a.n_mem,
                n_mem_low: l.n_mem,
                median_a_par_khz: crate::rad_to_hz(l.median_a_par) / 1e3,
                histogram: l.histogram,
            })
        })
        .collect()
}

/// `count` log-spaced concentrations between `lo` and `hi`.
pub fn log_concentrations(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi <= 1.0) || count < 2 {
        return Err(invalid("concentrations", "need 0 < low < high ≤ 1 and two points"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crosstalk_arithmetic() {
        assert_eq!(expected_crosstalk(&[]), 1.0);
        assert_eq!(expected_crosstalk(&[(0.0, -0.3), (0.0, 0.2)]), 1.0);
        assert_eq!(expected_crosstalk(&[(1.0, 0.37)]), 0.37);
        assert!((expected_crosstalk(&[(0.5, 0.8), (0.5, 0.6)]) - 0.72).abs() < 1e-15);
        assert_eq!(expected_crosstalk(&[(0.3, 1.0), (0.9, 1.0)]), 1.0);
    }

    #[test]
    fn weighted_median_picks_half_mass() {
        assert_eq!(weighted_median(&[(1.0, 1.0), (2.0, 1.0), (3.0, 5.0)]), 3.0);
        assert_eq!(weighted_median(&[(1.0, 3.0), (2.0, 1.0)]), 1.0);
        assert!(weighted_median(&[]).is_nan());
    }

    #[test]
    fn criteria_validation() {
        assert!(MemoryCriteria::default().validate().is_ok());
        let bad = MemoryCriteria {
            t_max: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = MemoryCriteria {
            f_min: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
