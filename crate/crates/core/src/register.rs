//! Density-matrix model of the strongly coupled electron–nuclear register.
//!
//! Qubit 0 is the electron pseudospin (`|0⟩ = m_s 0`, `|1⟩ = m_s −1`);
//! qubits 1 and 2 are nuclei. Qubit 0 is the most significant bit of a basis
//! index. Noise is a depolarizing channel on the qubits a gate touches.

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

type CMat = DMatrix<Complex64>;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

fn pauli(k: usize) -> [[Complex64; 2]; 2] {
    match k {
        0 => [[C1, C0], [C0, C1]],
        1 => [[C0, C1], [C1, C0]],
        2 => [[C0, -CI], [CI, C0]],
        _ => [[C1, C0], [C0, -C1]],
    }
}

fn rx(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (0.5 * theta).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
        [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
    ]
}

/// `op` acting on `qubit` of an `n`-qubit register.
fn embed(op: &[[Complex64; 2]; 2], qubit: usize, n: usize) -> CMat {
    let dim = 1 << n;
    let shift = n - 1 - qubit;
    CMat::from_fn(dim, dim, |r, c| {
        let others = !(1usize << shift);
        if r & others != c & others {
            return C0;
        }
        op[(r >> shift) & 1][(c >> shift) & 1]
    })
}

/// `op` on `target` when `control` is in `state`, identity otherwise.
fn controlled(op: &[[Complex64; 2]; 2], control: usize, state: u8, target: usize, n: usize) -> CMat {
    let dim = 1 << n;
    let cs = n - 1 - control;
    let ts = n - 1 - target;
    CMat::from_fn(dim, dim, |r, c| {
        let others = !((1usize << ts) | (1usize << cs));
        if r & others != c & others || (r >> cs) & 1 != (c >> cs) & 1 {
            return C0;
        }
        if (c >> cs) & 1 == usize::from(state) {
            op[(r >> ts) & 1][(c >> ts) & 1]
        } else if (r >> ts) & 1 == (c >> ts) & 1 {
            C1
        } else {
            C0
        }
    })
}

/// Register gates. Nuclear indices count from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateOp {
    Identity,
    /// Electron x rotation.
    ElectronRot {
        theta: f64,
    },
    /// Nuclear x rotation.
    NuclearRot {
        nucleus: usize,
        theta: f64,
    },
    /// Electron x rotation conditional on the nucleus being in `control`.
    CnRotE {
        nucleus: usize,
        control: u8,
        theta: f64,
    },
    /// Nuclear x rotation conditional on the electron being in `control`.
    CeRotN {
        nucleus: usize,
        control: u8,
        theta: f64,
    },
    /// Electron NOT conditional on the nucleus.
    CnNotE {
        nucleus: usize,
        control: u8,
    },
    /// Nuclear NOT conditional on the electron.
    CeNotN {
        nucleus: usize,
        control: u8,
    },
    /// Electron–nucleus SWAP, compiled as `CnNOTe · CeNOTn · CnNOTe`.
    Swap {
        nucleus: usize,
    },
}

impl GateOp {
    pub fn electron_half_pi() -> Self {
        GateOp::ElectronRot {
            theta: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn electron_pi() -> Self {
        GateOp::ElectronRot {
            theta: std::f64::consts::PI,
        }
    }

    /// Qubits the gate acts on.
    pub fn touched(&self) -> Vec<usize> {
        match *self {
            GateOp::Identity => vec![],
            GateOp::ElectronRot { .. } => vec![0],
            GateOp::NuclearRot { nucleus, .. } => vec![nucleus],
            GateOp::CnRotE { nucleus, .. }
            | GateOp::CeRotN { nucleus, .. }
            | GateOp::CnNotE { nucleus, .. }
            | GateOp::CeNotN { nucleus, .. }
            | GateOp::Swap { nucleus } => vec![0, nucleus],
        }
    }

    /// Ideal unitary on an `n`-qubit register.
    pub fn unitary(&self, n: usize) -> Result<CMat> {
        for q in self.touched() {
            if q >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: q + 1,
                });
            }
        }
        let x = pauli(1);
        Ok(match *self {
            GateOp::Identity => CMat::identity(1 << n, 1 << n),
            GateOp::ElectronRot { theta } => embed(&rx(theta), 0, n),
            GateOp::NuclearRot { nucleus, theta } => embed(&rx(theta), nucleus, n),
            GateOp::CnRotE {
                nucleus,
                control,
                theta,
            } => controlled(&rx(theta), nucleus, control, 0, n),
            GateOp::CeRotN {
                nucleus,
                control,
                theta,
            } => controlled(&rx(theta), 0, control, nucleus, n),
            GateOp::CnNotE { nucleus, control } => controlled(&x, nucleus, control, 0, n),
            GateOp::CeNotN { nucleus, control } => controlled(&x, 0, control, nucleus, n),
            GateOp::Swap { nucleus } => {
                let a = controlled(&x, nucleus, 1, 0, n);
                let b = controlled(&x, 0, 1, nucleus, n);
                &a * &b * &a
            }
        })
    }
}

/// Gate-count noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Depolarizing probability after every gate on the touched qubits.
    pub p_gate: f64,
    /// Probability that optical reinitialization leaves the electron in `|0⟩`.
    pub reinit_fidelity: f64,
    /// Symmetric bit-flip probability of each qubit's readout.
    pub readout_error: f64,
}

impl NoiseModel {
    pub const NOISELESS: NoiseModel = NoiseModel {
        p_gate: 0.0,
        reinit_fidelity: 1.0,
        readout_error: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("noise.p_gate", self.p_gate),
            ("noise.reinit_fidelity", self.reinit_fidelity),
            ("noise.readout_error", self.readout_error),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::NOISELESS
    }
}

/// A validated register density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterState {
    rho: CMat,
    n: usize,
}

impl RegisterState {
    /// Validates Hermiticity and unit trace (1e-10) and positivity (−1e-8).
    pub fn new(rho: CMat) -> Result<Self> {
        let dim = rho.nrows();
        let n = match dim {
            4 => 2,
            8 => 3,
            _ => {
                return Err(Error::DimensionMismatch {
                    expected: 4,
                    found: dim,
                })
            }
        };
        if rho.ncols() != dim {
            return Err(Error::InvalidDensityMatrix("not square".into()));
        }
        check_density(&rho)?;
        Ok(RegisterState { rho, n })
    }

    /// Maximally mixed state of `n` qubits (2 or 3).
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let dim = 1usize << n;
        Self::new(CMat::identity(dim, dim).map(|v| v / dim as f64))
    }

    /// Pure computational basis state.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n;
        if index >= dim {
            return Err(invalid("basis.index", "outside the register"));
        }
        let mut rho = CMat::zeros(dim, dim);
        rho[(index, index)] = C1;
        Self::new(rho)
    }

    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let dim = psi.len();
        let rho = CMat::from_fn(dim, dim, |r, c| psi[r] * psi[c].conj() / (norm * norm));
        Self::new(rho)
    }

    pub fn matrix(&self) -> &CMat {
        &self.rho
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Probability that `qubit` reads `0`.
    pub fn population0(&self, qubit: usize) -> f64 {
        let shift = self.n - 1 - qubit;
        (0..self.rho.nrows())
            .filter(|i| (i >> shift) & 1 == 0)
            .map(|i| self.rho[(i, i)].re)
            .sum()
    }

    /// Reduced state on the listed qubits, in the given order.
    pub fn reduced(&self, keep: &[usize]) -> CMat {
        partial_trace_keep(&self.rho, self.n, keep)
    }

    /// `⟨ψ|ρ|ψ⟩` for a pure target on the full register.
    pub fn fidelity_pure(&self, psi: &[Complex64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(psi);
        (v.adjoint() * &self.rho * &v)[(0, 0)].re
    }
}

fn check_density(rho: &CMat) -> Result<()> {
    let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-10 {
        return Err(Error::InvalidDensityMatrix(format!("not Hermitian ({herm:e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
    }
    let min = hermitian_eigenvalues(rho).into_iter().fold(f64::INFINITY, f64::min);
    if min < -1e-8 {
        return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()).map(|v| v * 0.5);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// Keeps qubits `keep` (in that order) of an `n`-qubit matrix.
fn partial_trace_keep(rho: &CMat, n: usize, keep: &[usize]) -> CMat {
    let k = keep.len();
    let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
    let dk = 1usize << k;
    let compose = |kept: usize, env: usize| {
        let mut idx = 0usize;
        for (p, &q) in keep.iter().enumerate() {
            idx |= ((kept >> (k - 1 - p)) & 1) << (n - 1 - q);
        }
        for (p, &q) in traced.iter().enumerate() {
            idx |= ((env >> (traced.len() - 1 - p)) & 1) << (n - 1 - q);
        }
        idx
    };
    CMat::from_fn(dk, dk, |r, c| {
        (0..1usize << traced.len())
            .map(|e| rho[(compose(r, e), compose(c, e))])
            .sum()
    })
}

/// Depolarizing channel with probability `p` on `qubits`.
fn depolarize(rho: &CMat, n: usize, qubits: &[usize], p: f64) -> CMat {
    if p == 0.0 || qubits.is_empty() {
        return rho.clone();
    }
    let m = qubits.len();
    let count = 1usize << (2 * m);
    let mut twirl = CMat::zeros(rho.nrows(), rho.ncols());
    for code in 0..count {
        let mut op = CMat::identity(rho.nrows(), rho.ncols());
        for (slot, &q) in qubits.iter().enumerate() {
            let k = (code >> (2 * slot)) & 3;
            if k != 0 {
                op = embed(&pauli(k), q, n) * op;
            }
        }
        twirl += &op * rho * op.adjoint();
    }
    rho.map(|v| v * (1.0 - p)) + twirl.map(|v| v * (p / count as f64))
}

/// `ρ → U ρ U†`, then depolarizing noise on the touched qubits.
pub fn apply_gate(state: &RegisterState, gate: &GateOp, noise: &NoiseModel) -> Result<RegisterState> {
    noise.validate()?;
    let u = gate.unitary(state.n)?;
    let rho = &u * &state.rho * u.adjoint();
    let rho = depolarize(&rho, state.n, &gate.touched(), noise.p_gate);
    Ok(RegisterState { rho, n: state.n })
}

/// Replaces the electron with `f|0⟩⟨0| + (1 − f)|1⟩⟨1|`, keeping the nuclear
/// marginal.
pub fn optical_reinit_electron(state: &RegisterState, noise: &NoiseModel) -> Result<RegisterState> {
    noise.validate()?;
    let n = state.n;
    let nuclei: Vec<usize> = (1..n).collect();
    let nuc = state.reduced(&nuclei);
    let f = noise.reinit_fidelity;
    let dn = nuc.nrows();
    let mut rho = CMat::zeros(2 * dn, 2 * dn);
    for r in 0..dn {
        for c in 0..dn {
            rho[(r, c)] = nuc[(r, c)] * f;
            rho[(dn + r, dn + c)] = nuc[(r, c)] * (1.0 - f);
        }
    }
    Ok(RegisterState { rho, n })
}

/// Result of algorithmic cooling.
#[derive(Debug, Clone, PartialEq)]
pub struct CoolingResult {
    pub state: RegisterState,
    /// `⟨σ_z⟩` of the cooled nucleus.
    pub polarization: f64,
    /// Population of the nuclear `|0⟩`.
    pub initialization: f64,
}

/// `iterations` rounds of electron reinitialization followed by an
/// electron–nucleus SWAP built from three controlled NOTs.
pub fn algorithmic_cool(
    state: &RegisterState,
    nucleus: usize,
    iterations: u32,
    noise: &NoiseModel,
) -> Result<CoolingResult> {
    if iterations == 0 {
        return Err(Error::Precondition(
            "algorithmic cooling needs at least one iteration".into(),
        ));
    }
    if nucleus == 0 || nucleus >= state.n {
        return Err(invalid("nucleus", "not a nuclear qubit of this register"));
    }
    let mut s = state.clone();
    let swap = [
        GateOp::CnNotE { nucleus, control: 1 },
        GateOp::CeNotN { nucleus, control: 1 },
        GateOp::CnNotE { nucleus, control: 1 },
    ];
    for _ in 0..iterations {
        s = optical_reinit_electron(&s, noise)?;
        for g in &swap {
            s = apply_gate(&s, g, noise)?;
        }
    }
    let p0 = s.population0(nucleus);
    Ok(CoolingResult {
        polarization: 2.0 * p0 - 1.0,
        initialization: p0,
        state: s,
    })
}

/// Ideal output of the entangling circuit from `|0⟩_e|0⟩_n`:
/// `(|00⟩ − |11⟩)/√2` on (electron, nucleus).
pub fn bell_target() -> [Complex64; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [Complex64::new(h, 0.0), C0, C0, Complex64::new(-h, 0.0)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellOutcome {
    pub state: RegisterState,
    /// Noiseless run on an input with purity below 0.99.
    pub uninitialized: bool,
}

/// Electron π/2 followed by the electron-controlled nuclear π rotation.
pub fn entangle_bell(state: &RegisterState, nucleus: usize, noise: &NoiseModel) -> Result<BellOutcome> {
    let uninitialized = noise.p_gate == 0.0 && state.purity() < 0.99;
    let s = apply_gate(state, &GateOp::electron_half_pi(), noise)?;
    let s = apply_gate(
        &s,
        &GateOp::CeRotN {
            nucleus,
            control: 1,
            theta: std::f64::consts::PI,
        },
        noise,
    )?;
    Ok(BellOutcome {
        state: s,
        uninitialized,
    })
}

/// Fidelity of the (electron, nucleus) reduced state with [`bell_target`].
pub fn bell_fidelity(rho2: &CMat) -> f64 {
    let v = nalgebra::DVector::from_column_slice(&bell_target());
    (v.adjoint() * rho2 * &v)[(0, 0)].re
}

/// Tomography mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Tomography {
    Exact,
    Shots { shots: u64, seed: u64 },
}

/// Two-qubit tomography over the nine Pauli settings with linear inversion,
/// optionally projected to the nearest physical state. Readout error flips
/// each measured bit independently.
pub fn qst(rho2: &CMat, mode: Tomography, readout_error: f64, project: bool) -> Result<CMat> {
    if rho2.nrows() != 4 || rho2.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho2.nrows(),
        });
    }
    if !(0.0..=0.5).contains(&readout_error) {
        return Err(invalid("readout_error", "must lie in [0, 0.5]"));
    }
    let mut rng = match mode {
        Tomography::Shots { shots, seed } => {
            if shots < 1 {
                return Err(invalid("shots", "must be at least 1"));
            }
            Some((ChaCha8Rng::seed_from_u64(seed), shots))
        }
        Tomography::Exact => None,
    };
    // expectations[a][b] accumulates ⟨σ_a ⊗ σ_b⟩ (a, b ∈ 0..4).
    let mut sum = [[0.0f64; 4]; 4];
    let mut hits = [[0u32; 4]; 4];
    for a in 1..4 {
        for b in 1..4 {
            let probs = setting_probabilities(rho2, a, b, readout_error);
            let freq = match rng.as_mut() {
                None => probs,
                Some((r, shots)) => multinomial(r, *shots, probs)?,
            };
            // Outcome index = 2·bit_a + bit_b; eigenvalue (−1)^bit.
            let e = |f: &[f64; 4], sa: bool, sb: bool| -> f64 {
                (0..4)
                    .map(|o| {
                        let va = if sa && o >> 1 == 1 { -1.0 } else { 1.0 };
                        let vb = if sb && o & 1 == 1 { -1.0 } else { 1.0 };
                        va * vb * f[o]
                    })
                    .sum()
            };
            for (ia, ib, sa, sb) in [(a, b, true, true), (a, 0, true, false), (0, b, false, true)] {
                sum[ia][ib] += e(&freq, sa, sb);
                hits[ia][ib] += 1;
            }
        }
    }
    let mut rho = Matrix4::<Complex64>::zeros();
    for a in 0..4 {
        for b in 0..4 {
            let ev = if a == 0 && b == 0 {
                1.0
            } else {
                sum[a][b] / f64::from(hits[a][b])
            };
            rho += pauli2(a, b) * Complex64::new(ev / 4.0, 0.0);
        }
    }
    let rho = CMat::from_fn(4, 4, |r, c| rho[(r, c)]);
    Ok(if project { project_psd(&rho) } else { rho })
}

fn pauli2(a: usize, b: usize) -> Matrix4<Complex64> {
    let (pa, pb) = (pauli(a), pauli(b));
    Matrix4::from_fn(|r, c| pa[r >> 1][c >> 1] * pb[r & 1][c & 1])
}

/// Outcome probabilities of measuring `σ_a ⊗ σ_b`, outcome `2·bit_a + bit_b`.
fn setting_probabilities(rho2: &CMat, a: usize, b: usize, readout_error: f64) -> [f64; 4] {
    // Rotate each measured axis onto z: X via H, Y via H·S†.
    let basis_change = |k: usize| -> [[Complex64; 2]; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hc = Complex64::new(h, 0.0);
        match k {
            1 => [[hc, hc], [hc, -hc]],
            2 => [[hc, -CI * h], [hc, CI * h]],
            _ => [[C1, C0], [C0, C1]],
        }
    };
    let (ua, ub) = (basis_change(a), basis_change(b));
    let u = CMat::from_fn(4, 4, |r, c| ua[r >> 1][c >> 1] * ub[r & 1][c & 1]);
    let rot = &u * rho2 * u.adjoint();
    let p: [f64; 4] = std::array::from_fn(|o| rot[(o, o)].re.max(0.0));
    let e = readout_error;
    let flip = |bit_true: usize, bit_read: usize| if bit_true == bit_read { 1.0 - e } else { e };
    std::array::from_fn(|read| {
        (0..4)
            .map(|t| p[t] * flip(t >> 1, read >> 1) * flip(t & 1, read & 1))
            .sum()
    })
}

fn multinomial(rng: &mut ChaCha8Rng, shots: u64, probs: [f64; 4]) -> Result<[f64; 4]> {
    let total: f64 = probs.iter().sum();
    let mut left = shots;
    let mut mass = 1.0;
    let mut out = [0.0; 4];
    for k in 0..4 {
        let pk = probs[k] / total;
        let count = if k == 3 || left == 0 {
            left
        } else {
            let q = (pk / mass).clamp(0.0, 1.0);
            Binomial::new(left, q)
                .map_err(|e| Error::Precondition(e.to_string()))?
                .sample(rng)
        };
        out[k] = count as f64 / shots as f64;
        left -= count;
        mass -= pk;
    }
    Ok(out)
}

/// Nearest unit-trace positive semidefinite matrix in Frobenius norm.
pub fn project_psd(rho: &CMat) -> CMat {
    let h = (rho + rho.adjoint()).map(|v| v * 0.5);
    let eig = h.clone().symmetric_eigen();
    let d = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut lam: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let tr: f64 = lam.iter().sum();
    lam.iter_mut().for_each(|v| *v /= tr);
    // Zero the most negative eigenvalues and spread their weight evenly.
    let mut acc = 0.0;
    let mut i = d;
    while i > 0 && lam[i - 1] + acc / (i as f64) < 0.0 {
        acc += lam[i - 1];
        lam[i - 1] = 0.0;
        i -= 1;
    }
    for v in lam.iter_mut().take(i) {
        *v += acc / i as f64;
    }
    let mut out = CMat::zeros(d, d);
    for (k, &idx) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(idx);
        out += v * v.adjoint() * Complex64::new(lam[k], 0.0);
    }
    out
}

/// Smallest eigenvalue of the partial transpose over the second qubit.
pub fn ppt_min_eigenvalue(rho2: &CMat) -> Result<f64> {
    if rho2.nrows() != 4 || rho2.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho2.nrows(),
        });
    }
    check_density(rho2)?;
    let pt = CMat::from_fn(4, 4, |r, c| {
        let (ra, rb, ca, cb) = (r >> 1, r & 1, c >> 1, c & 1);
        rho2[((ra << 1) | cb, (ca << 1) | rb)]
    });
    Ok(hermitian_eigenvalues(&pt).into_iter().fold(f64::INFINITY, f64::min))
}

/// `p|Φ⁺⟩⟨Φ⁺| + (1 − p) I/4`.
pub fn werner_state(p: f64) -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let phi = [h, 0.0, 0.0, h];
    CMat::from_fn(4, 4, |r, c| {
        let mixed = if r == c { 0.25 } else { 0.0 };
        Complex64::new(p * phi[r] * phi[c] + (1.0 - p) * mixed, 0.0)
    })
}

/// ODMR contrast from two hyperfine-split Lorentzians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    /// Detuning (Hz).
    pub detuning: Vec<f64>,
    pub contrast: Vec<f64>,
    /// Line splitting (Hz).
    pub splitting: f64,
    /// Weights of the lines at `+A/2` (nuclear `|0⟩`) and `−A/2`.
    pub weights: [f64; 2],
    /// Dominant-line fraction inferred from the line heights.
    pub inferred_fidelity: f64,
}

fn lorentzian(x: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    g * g / (x * x + g * g)
}

/// Spectrum on `detuning` (Hz) for a nucleus with `|0⟩` population `p0`,
/// splitting `A_∥/2π` (Hz) and full width `linewidth` (Hz).
pub fn odmr_spectrum(p0: f64, a_par_hz: f64, linewidth: f64, detuning: &[f64]) -> Result<OdmrSpectrum> {
    if !(linewidth > 0.0) {
        return Err(invalid("linewidth", "must be positive"));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(invalid("population", "must lie in [0, 1]"));
    }
    let half = 0.5 * a_par_hz;
    let line = |x: f64| p0 * lorentzian(x - half, linewidth) + (1.0 - p0) * lorentzian(x + half, linewidth);
    let contrast: Vec<f64> = detuning.iter().map(|&x| line(x)).collect();
    // Heights at the two centres mix both lines; undo the overlap.
    let o = lorentzian(a_par_hz, linewidth);
    let (h_plus, h_minus) = (line(half), line(-half));
    let det = 1.0 - o * o;
    let (w0, w1) = if det.abs() < 1e-12 {
        (0.5, 0.5)
    } else {
        ((h_plus - o * h_minus) / det, (h_minus - o * h_plus) / det)
    };
    let inferred = w0.max(w1) / (w0 + w1);
    Ok(OdmrSpectrum {
        detuning: detuning.to_vec(),
        contrast,
        splitting: a_par_hz,
        weights: [w0, w1],
        inferred_fidelity: inferred,
    })
}

/// Number of distinct ODMR lines: those with weight above `threshold`.
pub fn odmr_line_count(spec: &OdmrSpectrum, threshold: f64) -> usize {
    spec.weights.iter().filter(|w| **w > threshold).count()
}

/// Bisection for the largest `x ∈ [lo, hi]` with `f(x) ≥ target`, assuming
/// `f` decreases in `x`.
fn bisect_decreasing(f: impl Fn(f64) -> Result<f64>, target: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    if f(lo)? < target || f(hi)? > target {
        return Err(Error::Precondition("target outside the calibration bracket".into()));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Two-qubit register after `iterations` cooling rounds from the maximally
/// mixed state.
pub fn initialized_register(iterations: u32, noise: &NoiseModel) -> Result<CoolingResult> {
    algorithmic_cool(&RegisterState::maximally_mixed(2)?, 1, iterations, noise)
}

/// Gate depolarizing probability giving nuclear initialization `target`
/// after `iterations` cooling rounds.
pub fn calibrate_gate_noise(target: f64, iterations: u32) -> Result<f64> {
    bisect_decreasing(
        |p| {
            let noise = NoiseModel {
                p_gate: p,
                ..NoiseModel::NOISELESS
            };
            Ok(initialized_register(iterations, &noise)?.initialization)
        },
        target,
        0.0,
        1.0,
    )
}

/// Cooling-stage gate noise giving 93% initialization after two rounds.
pub const INIT_GATE_NOISE: f64 = 0.049031458694;
/// Entangling-stage gate noise giving a Bell-state fidelity of 0.81 after
/// cooling under [`INIT_GATE_NOISE`].
pub const BELL_GATE_NOISE: f64 = 0.109689790685;

/// Noise with only the gate depolarizing probability set.
pub fn gate_noise(p_gate: f64) -> NoiseModel {
    NoiseModel {
        p_gate,
        ..NoiseModel::NOISELESS
    }
}

/// Fidelity with [`bell_target`] after cooling under `init_noise`, electron
/// reinitialization and the entangling circuit under `bell_noise`.
pub fn prepared_bell_fidelity(iterations: u32, init_noise: &NoiseModel, bell_noise: &NoiseModel) -> Result<f64> {
    let init = initialized_register(iterations, init_noise)?;
    let reinit = optical_reinit_electron(&init.state, bell_noise)?;
    let bell = entangle_bell(&reinit, 1, bell_noise)?;
    Ok(bell_fidelity(bell.state.matrix()))
}

/// Gate depolarizing probability of the entangling stage giving Bell
/// fidelity `target`, with the register cooled under `init_noise`.
pub fn calibrate_bell_noise(target: f64, iterations: u32, init_noise: &NoiseModel) -> Result<f64> {
    bisect_decreasing(
        |p| {
            let noise = NoiseModel {
                p_gate: p,
                ..NoiseModel::NOISELESS
            };
            prepared_bell_fidelity(iterations, init_noise, &noise)
        },
        target,
        0.0,
        1.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dist(a: &CMat, b: &CMat) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn gates_are_unitary() {
        let gates = [
            GateOp::Identity,
            GateOp::electron_half_pi(),
            GateOp::NuclearRot { nucleus: 2, theta: 0.3 },
            GateOp::CnRotE {
                nucleus: 1,
                control: 0,
                theta: 1.1,
            },
            GateOp::CeRotN {
                nucleus: 2,
                control: 1,
                theta: PI,
            },
            GateOp::CnNotE { nucleus: 1, control: 1 },
            GateOp::CeNotN { nucleus: 1, control: 0 },
            GateOp::Swap { nucleus: 2 },
        ];
        for g in gates {
            let u = g.unitary(3).unwrap();
            assert!(dist(&(&u * u.adjoint()), &CMat::identity(8, 8)) < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn double_pi_is_identity_up_to_phase() {
        let psi = [
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.48),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.64, 0.0),
        ];
        let s = RegisterState::from_pure(&psi).unwrap();
        let once = apply_gate(&s, &GateOp::electron_pi(), &NoiseModel::NOISELESS).unwrap();
        let twice = apply_gate(&once, &GateOp::electron_pi(), &NoiseModel::NOISELESS).unwrap();
        assert!(dist(twice.matrix(), s.matrix()) < 1e-12);
        assert!((twice.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reinit_of_mixed_input() {
        let s = RegisterState::maximally_mixed(2).unwrap();
        let out = optical_reinit_electron(&s, &NoiseModel::NOISELESS).unwrap();
        let mut want = CMat::zeros(4, 4);
        want[(0, 0)] = Complex64::new(0.5, 0.0);
        want[(1, 1)] = Complex64::new(0.5, 0.0);
        assert!(dist(out.matrix(), &want) < 1e-14);
    }

    #[test]
    fn mixed_input_stays_separable() {
        let s = RegisterState::maximally_mixed(2).unwrap();
        let b = entangle_bell(&s, 1, &NoiseModel::NOISELESS).unwrap();
        assert!(b.uninitialized);
        assert!(ppt_min_eigenvalue(b.state.matrix()).unwrap() >= -1e-8);
    }

    #[test]
    fn werner_crossing() {
        let below = ppt_min_eigenvalue(&werner_state(1.0 / 3.0 - 0.01)).unwrap();
        let above = ppt_min_eigenvalue(&werner_state(1.0 / 3.0 + 0.01)).unwrap();
        assert!(below > 0.0 && above < 0.0);
        assert!(ppt_min_eigenvalue(&werner_state(1.0 / 3.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn frozen_calibration() {
        let init = initialized_register(2, &gate_noise(INIT_GATE_NOISE)).unwrap();
        assert!((init.initialization - 0.93).abs() < 1e-9);
        let f = prepared_bell_fidelity(2, &gate_noise(INIT_GATE_NOISE), &gate_noise(BELL_GATE_NOISE)).unwrap();
        assert!((f - 0.81).abs() < 1e-9);
        assert!((calibrate_gate_noise(0.93, 2).unwrap() - INIT_GATE_NOISE).abs() < 1e-9);
    }

    #[test]
    fn swap_exchanges_basis_states() {
        let s = RegisterState::basis(2, 0b10).unwrap();
        let out = apply_gate(&s, &GateOp::Swap { nucleus: 1 }, &NoiseModel::NOISELESS).unwrap();
        assert!((out.matrix()[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn control_not_satisfied_leaves_state() {
        let s = RegisterState::basis(2, 0b01).unwrap();
        let g = GateOp::CeNotN { nucleus: 1, control: 1 };
        let out = apply_gate(&s, &g, &NoiseModel::NOISELESS).unwrap();
        assert!(dist(out.matrix(), s.matrix()) < 1e-14);
    }

    #[test]
    fn reinit_keeps_nuclear_marginal() {
        let psi = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, 0.3),
            Complex64::new(-0.4, 0.2),
            Complex64::new(0.6, -0.1),
        ];
        let s = RegisterState::from_pure(&psi).unwrap();
        let out = optical_reinit_electron(&s, &NoiseModel::NOISELESS).unwrap();
        assert!(dist(&out.reduced(&[1]), &s.reduced(&[1])) < 1e-12);
        assert!((out.population0(0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cooling_from_mixed_polarizes_in_one_round() {
        let r = initialized_register(1, &NoiseModel::NOISELESS).unwrap();
        assert!((r.polarization - 1.0).abs() < 1e-12);
        assert!(initialized_register(0, &NoiseModel::NOISELESS).is_err());
    }

    #[test]
    fn noiseless_bell_circuit() {
        let init = initialized_register(2, &NoiseModel::NOISELESS).unwrap();
        let s = optical_reinit_electron(&init.state, &NoiseModel::NOISELESS).unwrap();
        let b = entangle_bell(&s, 1, &NoiseModel::NOISELESS).unwrap();
        assert!(!b.uninitialized);
        assert!((bell_fidelity(b.state.matrix()) - 1.0).abs() < 1e-12);
        assert!((ppt_min_eigenvalue(b.state.matrix()).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_tomography_inverts() {
        let init = initialized_register(2, &NoiseModel::NOISELESS).unwrap();
        let b = entangle_bell(&init.state, 1, &NoiseModel::NOISELESS).unwrap();
        let rec = qst(b.state.matrix(), Tomography::Exact, 0.0, false).unwrap();
        assert!(dist(&rec, b.state.matrix()) < 1e-10);
        assert!(dist(&project_psd(&rec), &rec) < 1e-10);
        assert!(qst(b.state.matrix(), Tomography::Shots { shots: 0, seed: 1 }, 0.0, true).is_err());
    }

    #[test]
    fn depolarizing_preserves_trace() {
        let s = RegisterState::basis(3, 5).unwrap();
        let noise = NoiseModel {
            p_gate: 0.3,
            ..NoiseModel::NOISELESS
        };
        let out = apply_gate(&s, &GateOp::Swap { nucleus: 2 }, &noise).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-12);
        assert!(RegisterState::new(out.matrix().clone()).is_ok());
    }

    #[test]
    fn odmr_examples() {
        let grid: Vec<f64> = (-200..=200).map(|i| i as f64 * 1e5).collect();
        let pol = odmr_spectrum(1.0, 13.2e6, 1e6, &grid).unwrap();
        assert_eq!(odmr_line_count(&pol, 1e-6), 1);
        let mixed = odmr_spectrum(0.5, 13.2e6, 1e6, &grid).unwrap();
        assert!((mixed.weights[0] - mixed.weights[1]).abs() < 1e-12);
        let s = odmr_spectrum(0.93, 13.2e6, 1e6, &grid).unwrap();
        assert!((s.inferred_fidelity - 0.93).abs() < 1e-9);
        assert_eq!(s.splitting, 13.2e6);
    }
}
