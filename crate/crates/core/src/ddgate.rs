//! Conditional nuclear dynamics under dynamical decoupling.
//!
//! A nucleus sees `H_0` while the electron sits in `m_s = 0` and `H_1` in the
//! active branch. One decoupling period `τ – π – 2τ – π – τ` produces the
//! conditional propagators `V_0 = U_0(τ)U_1(2τ)U_0(τ)` and
//! `V_1 = U_1(τ)U_0(2τ)U_1(τ)`, both rotations by the same angle about axes
//! `n̂0`, `n̂1`. Their overlap sets the electron magnetization
//! `M = 1 − (1 − n̂0·n̂1) sin²(Nφ/2)` after `N` pulses.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hyperfine::{effective_fields, ElectronModel, HyperfineTensor, SpinSpecies};
use crate::lattice::BathConfiguration;
use crate::su2::Su2;

/// Default number of τ points in the fine scan around each resonance.
pub const DEFAULT_SCAN_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Ramsey,
    Hahn,
    Cpmg,
    Xy8,
}

/// A Ramsey, Hahn-echo or multi-pulse decoupling sequence with ideal π pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub kind: SequenceKind,
    pub n_pulses: u32,
    /// Half inter-pulse spacing τ (s); for Ramsey, the free evolution time.
    pub tau: f64,
}

impl PulseSequence {
    pub fn ramsey(t: f64) -> Self {
        PulseSequence {
            kind: SequenceKind::Ramsey,
            n_pulses: 0,
            tau: t,
        }
    }

    pub fn hahn(tau: f64) -> Self {
        PulseSequence {
            kind: SequenceKind::Hahn,
            n_pulses: 1,
            tau,
        }
    }

    pub fn cpmg(n_pulses: u32, tau: f64) -> Self {
        PulseSequence {
            kind: SequenceKind::Cpmg,
            n_pulses,
            tau,
        }
    }

    pub fn xy8(n_pulses: u32, tau: f64) -> Self {
        PulseSequence {
            kind: SequenceKind::Xy8,
            n_pulses,
            tau,
        }
    }

    /// Same pulse pattern rescaled so the whole sequence lasts `t`.
    pub fn with_total_time(kind: SequenceKind, n_pulses: u32, t: f64) -> Self {
        match kind {
            SequenceKind::Ramsey => Self::ramsey(t),
            _ => PulseSequence {
                kind,
                n_pulses,
                tau: t / (2.0 * f64::from(n_pulses.max(1))),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(invalid("sequence.tau", "must be positive"));
        }
        match self.kind {
            SequenceKind::Ramsey if self.n_pulses != 0 => {
                Err(invalid("sequence.n_pulses", "Ramsey has no refocusing pulses"))
            }
            SequenceKind::Hahn if self.n_pulses != 1 => {
                Err(invalid("sequence.n_pulses", "Hahn echo has exactly one pulse"))
            }
            SequenceKind::Cpmg | SequenceKind::Xy8 if self.n_pulses == 0 => {
                Err(invalid("sequence.n_pulses", "decoupling needs at least one pulse"))
            }
            _ => Ok(()),
        }
    }

    /// Total sequence duration: `2Nτ`, or the free time for Ramsey.
    pub fn total_time(&self) -> f64 {
        match self.kind {
            SequenceKind::Ramsey => self.tau,
            _ => 2.0 * f64::from(self.n_pulses) * self.tau,
        }
    }

    /// Pulse phase labels for schedule export. Phases do not change the
    /// dynamics with ideal pulses.
    pub fn phases(&self) -> Vec<&'static str> {
        const XY8: [&str; 8] = ["X", "Y", "X", "Y", "Y", "X", "Y", "X"];
        (0..self.n_pulses as usize)
            .map(|i| match self.kind {
                SequenceKind::Xy8 => XY8[i % 8],
                _ => "X",
            })
            .collect()
    }

    /// Free-evolution segments `(branch_flipped, duration)` starting with the
    /// electron in its initial branch.
    pub fn segments(&self) -> Vec<(bool, f64)> {
        match self.kind {
            SequenceKind::Ramsey => vec![(false, self.tau)],
            _ => {
                let n = self.n_pulses as usize;
                let mut segs = Vec::with_capacity(n + 1);
                segs.push((false, self.tau));
                for i in 1..n {
                    segs.push((i % 2 == 1, 2.0 * self.tau));
                }
                segs.push((n % 2 == 1, self.tau));
                segs
            }
        }
    }
}

/// Conditional couplings of one nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nucleus {
    pub gamma: f64,
    pub a_par: f64,
    pub a_perp: f64,
}

impl Nucleus {
    pub fn new(species: SpinSpecies, a_par: f64, a_perp: f64) -> Self {
        Nucleus {
            gamma: species.gamma,
            a_par,
            a_perp,
        }
    }

    pub fn from_tensor(species: SpinSpecies, tensor: &HyperfineTensor) -> Self {
        Self::new(species, tensor.a_par(), tensor.a_perp())
    }

    /// Field vector `(ω_⊥, 0, ω_∥)` of `H_α` in rad/s.
    pub fn field(&self, electron: &ElectronModel, alpha: f64) -> [f64; 3] {
        let t = HyperfineTensor::from_components(self.a_par, self.a_perp, 0.0);
        let (par, perp) = effective_fields(&t, self.gamma, electron, alpha);
        [perp, 0.0, par]
    }

    /// Both conditional fields: `m_s = 0` and the active branch.
    pub fn branch_fields(&self, electron: &ElectronModel) -> ([f64; 3], [f64; 3]) {
        (self.field(electron, 0.0), self.field(electron, electron.alpha()))
    }

    /// Shift of the active-branch precession frequency relative to the bare
    /// Larmor frequency, `|ω_1| − |ω_0|`. This is the `A_∥` entering the
    /// resonance formula.
    pub fn precession_shift(&self, electron: &ElectronModel) -> f64 {
        let (h0, h1) = self.branch_fields(electron);
        norm3(h1) - norm3(h0)
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Per-period conditional rotation of a nucleus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRotation {
    pub n0: [f64; 3],
    pub n1: [f64; 3],
    /// SU(2) angle φ ∈ [0, π] with `V = cos φ − i sin φ (n̂·σ)`; the nucleus
    /// turns by `2φ` per period.
    pub phi: f64,
    pub dot: f64,
}

/// One-period propagators `(V_0, V_1)` for fields `h0`, `h1`.
#[inline]
pub fn period_propagators(h0: [f64; 3], h1: [f64; 3], tau: f64) -> (Su2, Su2) {
    let u0 = Su2::evolve(h0, tau);
    let u1 = Su2::evolve(h1, tau);
    let u0_2 = Su2::evolve(h0, 2.0 * tau);
    let u1_2 = Su2::evolve(h1, 2.0 * tau);
    (u0.mul(u1_2).mul(u0), u1.mul(u0_2).mul(u1))
}

#[inline]
fn rotation_from_fields(h0: [f64; 3], h1: [f64; 3], tau: f64) -> ConditionalRotation {
    let (v0, v1) = period_propagators(h0, h1, tau);
    let (n0, phi0) = v0.axis_angle();
    let (n1, phi1) = v1.axis_angle();
    debug_assert!((phi0 - phi1).abs() < 1e-9, "branch angles differ: {phi0} vs {phi1}");
    ConditionalRotation {
        n0,
        n1,
        phi: phi0,
        dot: dot3(n0, n1).clamp(-1.0, 1.0),
    }
}

/// Conditional rotation for one decoupling period at half-spacing `tau`.
pub fn conditional_rotation(nucleus: &Nucleus, electron: &ElectronModel, tau: f64) -> Result<ConditionalRotation> {
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    let (h0, h1) = nucleus.branch_fields(electron);
    Ok(rotation_from_fields(h0, h1, tau))
}

/// Magnetization from precomputed branch fields; `n_pulses` must be even.
///
/// With `α = |h0|τ`, `β = |h1|τ` and `m = ĥ0·ĥ1` the period angle obeys
/// `cos φ = cos α cos β − m sin α sin β` and the axis overlap
/// `1 − n̂0·n̂1 = (1 − m²)(1 − cos α)(1 − cos β)/(1 + cos φ)`. Near `φ = π`
/// the quotient is ill-conditioned and the propagators are used instead.
#[inline]
pub fn magnetization_from_fields(h0: [f64; 3], h1: [f64; 3], n_pulses: u32, tau: f64) -> f64 {
    if n_pulses == 0 {
        return 1.0;
    }
    let (w0, w1) = (norm3(h0), norm3(h1));
    if w0 > 0.0 && w1 > 0.0 {
        let m = (dot3(h0, h1) / (w0 * w1)).clamp(-1.0, 1.0);
        // sin² of the angle between the fields; exact zero when parallel.
        let sin2 = (norm3(cross3(h0, h1)) / (w0 * w1)).powi(2).min(1.0);
        let (s0, c0) = (w0 * tau).sin_cos();
        let (s1, c1) = (w1 * tau).sin_cos();
        let cos_phi = (c0 * c1 - m * s0 * s1).clamp(-1.0, 1.0);
        let denom = 1.0 + cos_phi;
        if denom > 1e-6 {
            let one_minus_d = sin2 * (1.0 - c0) * (1.0 - c1) / denom;
            let s = (0.5 * f64::from(n_pulses) * cos_phi.acos()).sin();
            return (1.0 - one_minus_d * s * s).clamp(-1.0, 1.0);
        }
    }
    magnetization_from_rotation(h0, h1, n_pulses, tau)
}

/// Same quantity from the axis–angle decomposition of the period propagators.
pub fn magnetization_from_rotation(h0: [f64; 3], h1: [f64; 3], n_pulses: u32, tau: f64) -> f64 {
    if n_pulses == 0 {
        return 1.0;
    }
    let r = rotation_from_fields(h0, h1, tau);
    let s = (0.5 * f64::from(n_pulses) * r.phi).sin();
    (1.0 - (1.0 - r.dot) * s * s).clamp(-1.0, 1.0)
}

/// Electron x-magnetization after `n_pulses` π pulses with one nucleus.
pub fn magnetization(nucleus: &Nucleus, electron: &ElectronModel, n_pulses: u32, tau: f64) -> Result<f64> {
    if n_pulses % 2 == 1 {
        return Err(Error::IncompleteDdPeriod(n_pulses));
    }
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    let (h0, h1) = nucleus.branch_fields(electron);
    Ok(magnetization_from_fields(h0, h1, n_pulses, tau))
}

/// Approximate dip position `τ_k = (2k+1)π / (2|ω_L| + A_∥)`.
///
/// `a_par` is the shift of the active-branch precession frequency (see
/// [`Nucleus::precession_shift`]); exact dips are found by scanning
/// [`magnetization`].
pub fn resonance_tau(k: u32, omega_l: f64, a_par: f64) -> Result<f64> {
    let denom = 2.0 * omega_l.abs() + a_par;
    if !(denom > 0.0) || denom.abs() < 1e-300 {
        return Err(Error::DegenerateResonance(denom));
    }
    Ok(f64::from(2 * k + 1) * PI / denom)
}

/// Magnetization spectrum over a τ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmrSpectrum {
    pub tau: Vec<f64>,
    pub m: Vec<f64>,
    pub n_pulses: u32,
    pub branch: i8,
}

impl NmrSpectrum {
    /// Fraction of grid points with `M` below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        if self.m.is_empty() {
            return 0.0;
        }
        self.m.iter().filter(|&&v| v < threshold).count() as f64 / self.m.len() as f64
    }

    /// Number of separate runs of grid points with `M` below `threshold`.
    pub fn count_dips(&self, threshold: f64) -> usize {
        let mut count = 0;
        let mut inside = false;
        for &v in &self.m {
            if v < threshold && !inside {
                count += 1;
            }
            inside = v < threshold;
        }
        count
    }
}

fn check_grid(taus: &[f64]) -> Result<()> {
    if taus.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("tau_grid", "all τ must be positive"));
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("tau_grid", "must be strictly increasing"));
    }
    Ok(())
}

/// Product of single-nucleus magnetizations over the bath for every τ.
/// Nuclear–nuclear interactions are neglected.
pub fn bath_spectrum(
    bath: &BathConfiguration,
    taus: &[f64],
    n_pulses: u32,
    electron: &ElectronModel,
) -> Result<NmrSpectrum> {
    check_grid(taus)?;
    if n_pulses % 2 == 1 {
        return Err(Error::IncompleteDdPeriod(n_pulses));
    }
    let fields = bath
        .spins
        .iter()
        .map(|s| {
            let t = s
                .hyperfine
                .ok_or_else(|| Error::Precondition("bath spin without hyperfine tensor".into()))?;
            Ok(Nucleus::from_tensor(s.species, &t).branch_fields(electron))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = taus
        .iter()
        .map(|&tau| {
            fields
                .iter()
                .map(|&(h0, h1)| magnetization_from_fields(h0, h1, n_pulses, tau))
                .product()
        })
        .collect();
    Ok(NmrSpectrum {
        tau: taus.to_vec(),
        m,
        n_pulses,
        branch: electron.branch,
    })
}

/// Pointwise mean of spectra sharing a grid (the ensemble ⟨M⟩).
pub fn mean_spectrum(spectra: &[NmrSpectrum]) -> Result<NmrSpectrum> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::Precondition("no spectra to average".into()))?;
    let mut m = vec![0.0; first.m.len()];
    for s in spectra {
        if s.tau != first.tau {
            return Err(Error::GridMismatch);
        }
        for (acc, v) in m.iter_mut().zip(&s.m) {
            *acc += v;
        }
    }
    let n = spectra.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    Ok(NmrSpectrum {
        tau: first.tau.clone(),
        m,
        n_pulses: first.n_pulses,
        branch: first.branch,
    })
}

/// A conditional-rotation gate at resonance order `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDesign {
    pub k: u32,
    pub n_pulses: u32,
    pub tau: f64,
    /// Rotation angle accumulated in each branch, `N·φ`.
    pub theta_total: f64,
    pub theta_target: f64,
    pub dot: f64,
    pub gate_time: f64,
    pub fidelity: f64,
}

/// Export record with human units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub k: u32,
    #[serde(rename = "N")]
    pub n: u32,
    pub tau_us: f64,
    pub theta_rad: f64,
    pub dot: f64,
    pub time_ms: f64,
    pub fidelity: f64,
}

impl From<&GateDesign> for GateRecord {
    fn from(d: &GateDesign) -> Self {
        GateRecord {
            k: d.k,
            n: d.n_pulses,
            tau_us: d.tau * 1e6,
            theta_rad: d.theta_total,
            dot: d.dot,
            time_ms: d.gate_time * 1e3,
            fidelity: d.fidelity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub scan_points: usize,
    /// Golden-section refinement of the best grid point.
    pub refine: bool,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            scan_points: DEFAULT_SCAN_POINTS,
            refine: true,
        }
    }
}

/// Best gate at a single resonance order, or `None` when the nucleus has no
/// conditional axis or the gate exceeds `t_max`.
pub fn design_at_order(
    nucleus: &Nucleus,
    electron: &ElectronModel,
    theta_target: f64,
    k: u32,
    t_max: f64,
    opts: &DesignOptions,
) -> Option<GateDesign> {
    if nucleus.a_perp == 0.0 || !(theta_target > 0.0) {
        return None;
    }
    let (h0, h1) = nucleus.branch_fields(electron);
    let sum = norm3(h0) + norm3(h1);
    if !(sum > 0.0) {
        return None;
    }
    let center = f64::from(2 * k + 1) * PI / sum;
    let half_width = PI / sum;
    let points = opts.scan_points.max(3);
    let step = 2.0 * half_width / (points - 1) as f64;
    let objective = |tau: f64| (rotation_from_fields(h0, h1, tau).dot + 1.0).abs();

    let mut best_tau = f64::NAN;
    let mut best = f64::INFINITY;
    for i in 0..points {
        let tau = center - half_width + step * i as f64;
        if tau <= 0.0 {
            continue;
        }
        let v = objective(tau);
        if v < best {
            best = v;
            best_tau = tau;
        }
    }
    if !best_tau.is_finite() {
        return None;
    }
    if opts.refine {
        let lo = (best_tau - step).max(step * 1e-3);
        let hi = best_tau + step;
        let (t, v) = golden_min(objective, lo, hi, 60);
        if v < best {
            best_tau = t;
        }
    }
    let rot = rotation_from_fields(h0, h1, best_tau);
    if rot.phi < 1e-12 {
        return None;
    }
    // φ and π − φ describe the same rotation up to a sign shared by both
    // branches.
    let phi = rot.phi.min(PI - rot.phi);
    if phi < 1e-12 {
        return None;
    }
    let half_periods = (theta_target / (2.0 * phi)).round().max(1.0);
    if half_periods > f64::from(u32::MAX / 4) {
        return None;
    }
    let n_pulses = 2 * half_periods as u32;
    let gate_time = 2.0 * f64::from(n_pulses) * best_tau;
    if gate_time > t_max {
        return None;
    }
    let mut design = GateDesign {
        k,
        n_pulses,
        tau: best_tau,
        theta_total: f64::from(n_pulses) * phi,
        theta_target,
        dot: rot.dot,
        gate_time,
        fidelity: 0.0,
    };
    design.fidelity = gate_fidelity(&design, nucleus, electron);
    Some(design)
}

/// Every per-order design with `k ≤ k_max` that fits in `t_max`.
pub fn candidate_designs(
    nucleus: &Nucleus,
    electron: &ElectronModel,
    theta_target: f64,
    k_max: u32,
    t_max: f64,
    opts: &DesignOptions,
) -> Vec<GateDesign> {
    (0..=k_max)
        .filter_map(|k| design_at_order(nucleus, electron, theta_target, k, t_max, opts))
        .collect()
}

/// The highest-fidelity conditional-rotation design over orders `0..=k_max`.
pub fn design_gate(
    nucleus: &Nucleus,
    electron: &ElectronModel,
    theta_target: f64,
    k_max: u32,
    t_max: f64,
) -> Option<GateDesign> {
    candidate_designs(nucleus, electron, theta_target, k_max, t_max, &DesignOptions::default())
        .into_iter()
        .fold(None, |best: Option<GateDesign>, d| match best {
            Some(b) if b.fidelity >= d.fidelity => Some(b),
            _ => Some(d),
        })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Row-major complex 2×2 block.
pub type Block2 = [[Complex64; 2]; 2];

/// Nuclear propagators in each electron branch after the full gate:
/// `(V_0^{N/2}, V_1^{N/2})`.
pub fn gate_branches(design: &GateDesign, nucleus: &Nucleus, electron: &ElectronModel) -> (Su2, Su2) {
    let (h0, h1) = nucleus.branch_fields(electron);
    let (v0, v1) = period_propagators(h0, h1, design.tau);
    let half = design.n_pulses / 2;
    (v0.pow(half), v1.pow(half))
}

/// Average gate fidelity of the achieved two-qubit unitary against the
/// ideal conditional `±θ_target` rotation about anti-parallel axes,
/// maximised over the electron phase and nuclear z-rotations before and
/// after the gate.
pub fn gate_fidelity(design: &GateDesign, nucleus: &Nucleus, electron: &ElectronModel) -> f64 {
    let (b0, b1) = gate_branches(design, nucleus, electron);
    gauge_optimized_fidelity(&[b0.to_matrix(), b1.to_matrix()], design.theta_target)
}

/// `Tr(a† b)`.
fn hs_overlap(a: &Block2, b: &Block2) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            acc += a[i][j].conj() * b[i][j];
        }
    }
    acc
}

/// Average gate fidelity `(|Tr(U_ideal† U)|² + 4)/20` of a block-diagonal
/// electron-controlled unitary, optimised over the declared gauge freedoms.
pub fn gauge_optimized_fidelity(actual: &[Block2; 2], theta: f64) -> f64 {
    let ideal = [
        Su2::rotation([1.0, 0.0, 0.0], theta),
        Su2::rotation([1.0, 0.0, 0.0], -theta),
    ];
    let score = |pre: f64, post: f64| -> f64 {
        let rz_pre = Su2::rotation([0.0, 0.0, 1.0], pre);
        let rz_post = Su2::rotation([0.0, 0.0, 1.0], post);
        (0..2)
            .map(|b| {
                let target = rz_post.mul(ideal[b]).mul(rz_pre).to_matrix();
                hs_overlap(&target, &actual[b]).norm()
            })
            .sum()
    };
    let grid = 24;
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..grid {
        for j in 0..grid {
            let pre = 2.0 * PI * i as f64 / grid as f64;
            let post = 2.0 * PI * j as f64 / grid as f64;
            let s = score(pre, post);
            if s > best.2 {
                best = (pre, post, s);
            }
        }
    }
    let (mut pre, mut post, mut s) = best;
    let mut width = 2.0 * PI / grid as f64;
    // Line searches along both axes and both diagonals, since the score
    // ridge is usually diagonal in (pre, post).
    let dirs = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)];
    for _ in 0..12 {
        for &(dx, dy) in &dirs {
            let (x, v) = golden_min(|x| -score(pre + dx * x, post + dy * x), -width, width, 48);
            if -v > s {
                pre += dx * x;
                post += dy * x;
                s = -v;
            }
        }
        width *= 0.6;
    }
    ((s * s + 4.0) / 20.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperfine::GAMMA_SI29;
    use crate::{hz_to_rad, TWO_PI};

    fn weak_si_nucleus() -> Nucleus {
        Nucleus::new(SpinSpecies::SI29, hz_to_rad(650.0), hz_to_rad(11.45e3))
    }

    #[test]
    fn axial_coupling_gives_parallel_axes_and_unit_magnetization() {
        let e = ElectronModel::with_field_gauss(500.0);
        let n = Nucleus::new(SpinSpecies::SI29, hz_to_rad(20e3), 0.0);
        let r = conditional_rotation(&n, &e, 1.3e-6).unwrap();
        assert!((r.dot - 1.0).abs() < 1e-12);
        for &tau in &[0.3e-6, 1.0e-6, 7.7e-6] {
            for &np in &[2, 16, 64] {
                assert!((magnetization(&n, &e, np, tau).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_field_axial_is_parallel() {
        let e = ElectronModel::with_field_gauss(0.0);
        let n = Nucleus::new(SpinSpecies::SI29, hz_to_rad(5e3), 0.0);
        for &tau in &[1e-6, 3.3e-5, 1e-4] {
            let r = conditional_rotation(&n, &e, tau).unwrap();
            assert!((r.dot - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pulses_and_odd_pulses() {
        let e = ElectronModel::default();
        let n = weak_si_nucleus();
        assert_eq!(magnetization(&n, &e, 0, 1e-6).unwrap(), 1.0);
        assert_eq!(
            magnetization(&n, &e, 3, 1e-6).unwrap_err(),
            Error::IncompleteDdPeriod(3)
        );
    }

    #[test]
    fn closed_form_matches_rotation_form() {
        let e = ElectronModel::with_field_gauss(500.0);
        let n = Nucleus::new(SpinSpecies::SI29, hz_to_rad(20e3), hz_to_rad(9e3));
        let (h0, h1) = n.branch_fields(&e);
        for i in 1..400 {
            let tau = i as f64 * 0.037e-6;
            for np in [2, 8, 32] {
                let a = magnetization_from_fields(h0, h1, np, tau);
                let b = magnetization_from_rotation(h0, h1, np, tau);
                assert!((a - b).abs() < 1e-10, "tau={tau} N={np}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn resonance_formula_values() {
        let tau = resonance_tau(0, TWO_PI * 0.5e6, 0.0).unwrap();
        assert!((tau - 0.5e-6).abs() < 1e-18);
        let t3 = resonance_tau(3, TWO_PI * 0.5e6, 1e4).unwrap();
        let t4 = resonance_tau(4, TWO_PI * 0.5e6, 1e4).unwrap();
        assert!(((t4 - t3) - 2.0 * PI / (2.0 * TWO_PI * 0.5e6 + 1e4)).abs() < 1e-18);
        assert!(resonance_tau(0, 0.0, 0.0).is_err());
    }

    #[test]
    fn phases_follow_xy8_pattern() {
        let s = PulseSequence::xy8(16, 1e-6);
        let p = s.phases();
        assert_eq!(p.len(), 16);
        assert_eq!(&p[..8], &["X", "Y", "X", "Y", "Y", "X", "Y", "X"]);
        assert!((s.total_time() - 32e-6).abs() < 1e-18);
        assert_eq!(PulseSequence::hahn(2e-6).total_time(), 4e-6);
    }

    #[test]
    fn segments_alternate_branches() {
        let s = PulseSequence::cpmg(3, 1.0);
        assert_eq!(s.segments(), vec![(false, 1.0), (true, 2.0), (false, 2.0), (true, 1.0)]);
        assert_eq!(PulseSequence::hahn(1.0).segments(), vec![(false, 1.0), (true, 1.0)]);
    }

    #[test]
    fn no_transverse_coupling_has_no_design() {
        let e = ElectronModel::with_field_gauss(584.0);
        let n = Nucleus::new(SpinSpecies::SI29, hz_to_rad(650.0), 0.0);
        assert!(design_gate(&n, &e, PI / 2.0, 8, 5e-3).is_none());
    }

    #[test]
    fn linear_pulse_estimate_near_reported_count() {
        let e = ElectronModel::with_field_gauss(584.0);
        let n = weak_si_nucleus();
        let omega_l = (GAMMA_SI29 * e.field_t).abs();
        let estimate = (PI / 2.0) * omega_l / n.a_perp;
        assert!(estimate > 28.0 && estimate < 112.0, "{estimate}");
    }

    #[test]
    fn isolated_design_hits_target_angle() {
        let e = ElectronModel::with_field_gauss(584.0);
        let n = weak_si_nucleus();
        let d = design_at_order(&n, &e, PI / 2.0, 6, 5e-3, &DesignOptions::default()).unwrap();
        assert!((d.theta_total - PI / 2.0).abs() < 0.02 * PI / 2.0, "{d:?}");
        assert!((d.gate_time - 2.0 * f64::from(d.n_pulses) * d.tau).abs() == 0.0);
        assert!(d.fidelity > 0.95);
    }

    #[test]
    fn gate_time_limit_rejects() {
        let e = ElectronModel::with_field_gauss(584.0);
        let n = weak_si_nucleus();
        assert!(design_at_order(&n, &e, PI / 2.0, 6, 1e-4, &DesignOptions::default()).is_none());
    }

    #[test]
    fn ideal_unitary_has_unit_fidelity_under_gauge() {
        let theta = 0.9;
        let b0 = Su2::rotation([1.0, 0.0, 0.0], theta).to_matrix();
        let b1 = Su2::rotation([1.0, 0.0, 0.0], -theta).to_matrix();
        assert!((gauge_optimized_fidelity(&[b0, b1], theta) - 1.0).abs() < 1e-12);

        // Electron z-rotation: opposite phases on the two branches.
        let phase = Complex64::from_polar(1.0, 0.37);
        let scale = |m: Block2, c: Complex64| [[m[0][0] * c, m[0][1] * c], [m[1][0] * c, m[1][1] * c]];
        let f = gauge_optimized_fidelity(&[scale(b0, phase), scale(b1, phase.conj())], theta);
        assert!((f - 1.0).abs() < 1e-12);

        // Rotated axis in the plane is a nuclear z gauge.
        let axis = [0.8f64.cos(), 0.8f64.sin(), 0.0];
        let r0 = Su2::rotation(axis, theta).to_matrix();
        let r1 = Su2::rotation(axis, -theta).to_matrix();
        let f = gauge_optimized_fidelity(&[r0, r1], theta);
        assert!((f - 1.0).abs() < 1e-10, "{f}");
    }

    #[test]
    fn identity_is_far_from_entangling_gate() {
        let id = Su2::IDENTITY.to_matrix();
        let f = gauge_optimized_fidelity(&[id, id], PI / 2.0);
        // Each branch overlaps with |Tr| = √2, so F = (8 + 4)/20.
        assert!((f - 0.6).abs() < 1e-9, "{f}");
    }
}
