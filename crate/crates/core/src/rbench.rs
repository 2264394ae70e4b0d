//! Single-qubit randomized benchmarking over the 24-element Clifford group.

use std::sync::OnceLock;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::member_seeds;
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_exp_decay, ExpDecayFit};

type U2 = Matrix2<Complex64>;

/// Physical pulses the group is generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pulse {
    X90,
    Y90,
    Xm90,
    Ym90,
    X180,
    Y180,
}

impl Pulse {
    const ALL: [Pulse; 6] = [
        Pulse::X90,
        Pulse::Y90,
        Pulse::Xm90,
        Pulse::Ym90,
        Pulse::X180,
        Pulse::Y180,
    ];

    fn unitary(self) -> U2 {
        let (axis, angle) = match self {
            Pulse::X90 => (0, 0.5),
            Pulse::Y90 => (1, 0.5),
            Pulse::Xm90 => (0, -0.5),
            Pulse::Ym90 => (1, -0.5),
            Pulse::X180 => (0, 1.0),
            Pulse::Y180 => (1, 1.0),
        };
        let (s, c) = (0.5 * angle * std::f64::consts::PI).sin_cos();
        let c = Complex64::new(c, 0.0);
        if axis == 0 {
            let m = Complex64::new(0.0, -s);
            U2::new(c, m, m, c)
        } else {
            let s = Complex64::new(s, 0.0);
            U2::new(c, -s, s, c)
        }
    }
}

/// The Clifford group with composition and inverse tables.
#[derive(Debug, Clone)]
pub struct CliffordGroup {
    elements: Vec<U2>,
    /// Shortest pulse decomposition, applied left to right.
    pub decompositions: Vec<Vec<Pulse>>,
    /// `compose[a][b]`: apply `a`, then `b`.
    pub compose: Vec<Vec<usize>>,
    pub inverse: Vec<usize>,
}

fn same_up_to_phase(a: &U2, b: &U2) -> bool {
    ((a.adjoint() * b).trace().norm() - 2.0).abs() < 1e-9
}

impl CliffordGroup {
    fn generate() -> Self {
        let mut elements = vec![U2::identity()];
        let mut decompositions = vec![Vec::new()];
        let mut frontier = 0;
        while frontier < elements.len() {
            for p in Pulse::ALL {
                let u = p.unitary() * elements[frontier];
                if !elements.iter().any(|e| same_up_to_phase(e, &u)) {
                    let mut d = decompositions[frontier].clone();
                    d.push(p);
                    elements.push(u);
                    decompositions.push(d);
                }
            }
            frontier += 1;
        }
        let find = |u: &U2| {
            elements
                .iter()
                .position(|e| same_up_to_phase(e, u))
                .expect("group closed under composition")
        };
        let n = elements.len();
        let compose: Vec<Vec<usize>> = (0..n)
            .map(|a| (0..n).map(|b| find(&(elements[b] * elements[a]))).collect())
            .collect();
        let inverse = (0..n).map(|a| find(&elements[a].adjoint())).collect();
        CliffordGroup {
            elements,
            decompositions,
            compose,
            inverse,
        }
    }

    /// Shared instance.
    pub fn get() -> &'static CliffordGroup {
        static GROUP: OnceLock<CliffordGroup> = OnceLock::new();
        GROUP.get_or_init(Self::generate)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn unitary(&self, index: usize) -> Matrix2<Complex64> {
        self.elements[index]
    }

    /// Index of the product of `indices` applied in order.
    pub fn product(&self, indices: &[usize]) -> usize {
        indices.iter().fold(0, |acc, &i| self.compose[acc][i])
    }

    /// Mean physical pulses per Clifford.
    pub fn mean_pulses(&self) -> f64 {
        self.decompositions.iter().map(Vec::len).sum::<usize>() as f64 / self.len() as f64
    }
}

/// `N` random Cliffords followed by the recovery gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliffordSequence {
    pub gates: Vec<usize>,
    pub recovery: usize,
}

impl CliffordSequence {
    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

/// `per_length` sequences for every length.
pub fn sample_sequences(lengths: &[usize], per_length: usize, seed: u64) -> Result<Vec<CliffordSequence>> {
    if lengths.iter().any(|&n| n < 1) {
        return Err(invalid("rb.lengths", "every length must be at least 1"));
    }
    let group = CliffordGroup::get();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(lengths.len() * per_length);
    for &n in lengths {
        for _ in 0..per_length {
            let gates: Vec<usize> = (0..n).map(|_| rng.random_range(0..group.len())).collect();
            let recovery = group.inverse[group.product(&gates)];
            out.push(CliffordSequence { gates, recovery });
        }
    }
    Ok(out)
}

/// Survival of `|0⟩` after the sequence with a depolarizing channel of
/// strength `p_depol` after every Clifford, recovery included.
pub fn sequence_survival(seq: &CliffordSequence, p_depol: f64) -> f64 {
    let group = CliffordGroup::get();
    let mut rho = U2::new(
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    );
    let half = U2::identity().scale(0.5);
    for &g in seq.gates.iter().chain(std::iter::once(&seq.recovery)) {
        let u = group.elements[g];
        rho = u * rho * u.adjoint();
        rho = rho.scale(1.0 - p_depol) + half.scale(p_depol);
    }
    rho[(0, 0)].re.clamp(0.0, 1.0)
}

/// Survival data grouped by length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbData {
    pub lengths: Vec<usize>,
    /// Per-length survivals of the individual sequences.
    pub survivals: Vec<Vec<f64>>,
}

impl RbData {
    pub fn mean(&self) -> Vec<f64> {
        self.survivals
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .collect()
    }

    /// Standard error of the mean per length.
    pub fn sem(&self) -> Vec<f64> {
        self.survivals
            .iter()
            .map(|s| {
                let k = s.len() as f64;
                if s.len() < 2 {
                    return 0.0;
                }
                let m = s.iter().sum::<f64>() / k;
                (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
            })
            .collect()
    }
}

/// Simulates every sequence; with `shots` each survival is a binomial
/// estimate drawn from a per-sequence seed.
pub fn simulate_rb(sequences: &[CliffordSequence], p_depol: f64, shots: Option<u64>, seed: u64) -> Result<RbData> {
    if !(0.0..=1.0).contains(&p_depol) {
        return Err(invalid("rb.p_depol", "must lie in [0, 1]"));
    }
    if shots == Some(0) {
        return Err(invalid("rb.shots", "must be at least 1"));
    }
    let seeds = member_seeds(seed, sequences.len());
    let values: Vec<(usize, f64)> = sequences
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(seq, &s)| {
            let p = sequence_survival(seq, p_depol);
            let v = match shots {
                None => p,
                Some(n) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    let k = Binomial::new(n, p).map(|b| b.sample(&mut rng)).unwrap_or(0);
                    k as f64 / n as f64
                }
            };
            (seq.len(), v)
        })
        .collect();
    let mut lengths: Vec<usize> = values.iter().map(|v| v.0).collect();
    lengths.sort_unstable();
    lengths.dedup();
    let survivals = lengths
        .iter()
        .map(|&n| values.iter().filter(|v| v.0 == n).map(|v| v.1).collect())
        .collect();
    Ok(RbData { lengths, survivals })
}

/// Fitted decay and derived average gate fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbResult {
    pub fit: ExpDecayFit,
    pub fidelity: f64,
    /// 95% bootstrap interval on the fidelity.
    pub ci: (f64, f64),
    /// Data show no decay; `p` is pinned at 1.
    pub no_decay: bool,
}

/// `F_avg = 1 − (1 − p)/2`.
pub fn average_gate_fidelity(p: f64) -> f64 {
    1.0 - 0.5 * (1.0 - p)
}

fn fit_means(lengths: &[f64], means: &[f64]) -> (ExpDecayFit, bool) {
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        let fit = ExpDecayFit {
            a: 0.0,
            p: 1.0,
            b: hi,
            residual: 0.0,
        };
        return (fit, true);
    }
    let mut fit = fit_exp_decay(lengths, means);
    fit.p = fit.p.clamp(0.0, 1.0);
    (fit, fit.p >= 1.0 - 1e-15 || fit.a <= 0.0)
}

/// Fits the mean survivals and bootstraps the fidelity interval by
/// resampling sequences within each length.
pub fn fit_rb(data: &RbData, bootstrap: usize, seed: u64) -> Result<RbResult> {
    if data.lengths.len() < 3 {
        return Err(Error::Precondition(
            "randomized benchmarking needs at least three lengths".into(),
        ));
    }
    let x: Vec<f64> = data.lengths.iter().map(|&n| n as f64).collect();
    let (fit, no_decay) = fit_means(&x, &data.mean());
    let fidelity = average_gate_fidelity(fit.p);
    let seeds = member_seeds(seed, bootstrap);
    let mut samples: Vec<f64> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let means: Vec<f64> = data
                .survivals
                .iter()
                .map(|v| (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).sum::<f64>() / v.len() as f64)
                .collect();
            average_gate_fidelity(fit_means(&x, &means).0.p)
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let ci = if samples.is_empty() {
        (fidelity, fidelity)
    } else {
        let at = |q: f64| samples[((q * (samples.len() - 1) as f64).round()) as usize];
        (at(0.025).min(fidelity), at(0.975).max(fidelity))
    };
    Ok(RbResult {
        fit,
        fidelity,
        ci,
        no_decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_has_24_elements_and_closes() {
        let g = CliffordGroup::get();
        assert_eq!(g.len(), 24);
        for a in 0..24 {
            assert_eq!(g.compose[a][g.inverse[a]], 0);
            assert_eq!(g.compose[0][a], a);
            assert_eq!(g.compose[a][0], a);
        }
        // Every decomposition reproduces its element.
        for (i, d) in g.decompositions.iter().enumerate() {
            let u = d.iter().fold(U2::identity(), |acc, p| p.unitary() * acc);
            assert!(same_up_to_phase(&u, &g.unitary(i)));
        }
    }

    #[test]
    fn recovery_inverts_exhaustively() {
        let g = CliffordGroup::get();
        for a in 0..24 {
            for b in 0..24 {
                for c in 0..24 {
                    let p = g.product(&[a, b, c]);
                    assert_eq!(g.compose[p][g.inverse[p]], 0);
                    let u = g.unitary(c) * g.unitary(b) * g.unitary(a);
                    assert!(same_up_to_phase(&(g.unitary(g.inverse[p]) * u), &U2::identity()));
                }
            }
        }
    }

    #[test]
    fn single_gate_recovery_is_inverse() {
        let seqs = sample_sequences(&[1], 50, 3).unwrap();
        let g = CliffordGroup::get();
        for s in &seqs {
            assert_eq!(s.recovery, g.inverse[s.gates[0]]);
        }
        assert_eq!(seqs, sample_sequences(&[1], 50, 3).unwrap());
        assert!(sample_sequences(&[0], 1, 3).is_err());
    }

    #[test]
    fn depolarizing_survival_is_analytic() {
        let seqs = sample_sequences(&[1, 5, 40], 5, 9).unwrap();
        for s in &seqs {
            assert!((sequence_survival(s, 0.0) - 1.0).abs() < 1e-12);
            let want = 0.5 + 0.5 * 0.99f64.powi(s.len() as i32 + 1);
            assert!((sequence_survival(s, 0.01) - want).abs() < 1e-12);
            assert!((sequence_survival(s, 1.0) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let seqs = sample_sequences(&[1, 10, 100], 3, 1).unwrap();
        let data = simulate_rb(&seqs, 0.0, None, 1).unwrap();
        let r = fit_rb(&data, 20, 2).unwrap();
        assert_eq!(r.fidelity, 1.0);
        assert!(r.no_decay);
    }

    #[test]
    fn recovers_injected_decay() {
        let seqs = sample_sequences(&[1, 100, 500, 1000, 2000, 4000], 4, 5).unwrap();
        let data = simulate_rb(&seqs, 1e-3, None, 5).unwrap();
        let r = fit_rb(&data, 10, 6).unwrap();
        assert!((r.fit.p - 0.999).abs() < 1e-9, "{r:?}");
        assert!((r.fit.b - 0.5).abs() < 1e-6);
        assert!(!r.no_decay);
    }
}
