//! Cluster-correlation expansion of the central-spin coherence.
//!
//! The bath is described by a [`SpinSystem`]: every spin couples to the
//! central spin through the secular row of its hyperfine tensor and to the
//! other bath spins through a secular dipolar term. For each cluster the two
//! conditional propagators are built by alternating `H_0` and `H_1` at the
//! π-pulse times and `L_C = Tr[U_1† U_0] / 2^|C|`.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddgate::{PulseSequence, SequenceKind};
use crate::error::{invalid, Error, Result};
use crate::fit::{fit_stretched_points, DecayFit};
use crate::hyperfine::{nuclear_pair_coupling, ElectronModel, PairCoupling, GAMMA_E};
use crate::lattice::{norm, BathConfiguration};
use crate::su2::Su2;

/// Default guard on the denominator of the cluster corrections.
pub const DIVISION_GUARD: f64 = 1e-6;
/// Largest supported cluster size.
pub const MAX_ORDER: usize = 4;

/// One bath spin as seen by the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpin {
    pub position: [f64; 3],
    pub gamma: f64,
    /// Bare precession frequency (rad/s) entering both branches.
    pub omega: f64,
    /// `(A_zx, A_zy, A_zz)` in rad/s; scaled by the electron projection.
    pub coupling: [f64; 3],
}

/// Bath spins plus the two electron projections defining the coherence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    pub spins: Vec<ClusterSpin>,
    /// Electron projection in the reference branch (`m_s = 0`).
    pub alpha_0: f64,
    /// Electron projection in the active branch.
    pub alpha_1: f64,
}

impl SpinSystem {
    /// Nuclear bath with attached hyperfine tensors.
    pub fn nuclear(bath: &BathConfiguration, electron: &ElectronModel) -> Result<Self> {
        let spins = bath
            .spins
            .iter()
            .map(|s| {
                let t = s
                    .hyperfine
                    .ok_or_else(|| Error::Precondition("bath spin without hyperfine tensor".into()))?;
                Ok(ClusterSpin {
                    position: s.site.position,
                    gamma: s.species.gamma,
                    omega: s.species.gamma * electron.field_t,
                    coupling: t.secular_row(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpinSystem {
            spins,
            alpha_0: 0.0,
            alpha_1: electron.alpha(),
        })
    }

    /// Dark S = 1/2 electron spins at `positions` (nm). Only the dipolar zz
    /// coupling to the central spin is kept; the common Zeeman term commutes
    /// with everything and is dropped.
    pub fn paramagnetic(positions: &[[f64; 3]], electron: &ElectronModel) -> Result<Self> {
        let spins = positions
            .iter()
            .map(|&p| {
                let c = nuclear_pair_coupling(p, electron.gamma_e, GAMMA_E)?;
                Ok(ClusterSpin {
                    position: p,
                    gamma: GAMMA_E,
                    omega: 0.0,
                    coupling: [0.0, 0.0, c.c_zz],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SpinSystem {
            spins,
            alpha_0: 0.0,
            alpha_1: electron.alpha(),
        })
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Conditional field on spin `i` for electron projection `alpha`.
    fn field(&self, i: usize, alpha: f64) -> [f64; 3] {
        let s = &self.spins[i];
        [
            alpha * s.coupling[0],
            alpha * s.coupling[1],
            s.omega + alpha * s.coupling[2],
        ]
    }

    fn pair(&self, i: usize, j: usize) -> Result<PairCoupling> {
        let (a, b) = (&self.spins[i], &self.spins[j]);
        let r = [
            b.position[0] - a.position[0],
            b.position[1] - a.position[1],
            b.position[2] - a.position[2],
        ];
        nuclear_pair_coupling(r, a.gamma, b.gamma)
    }

    fn separation(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.spins[i].position, self.spins[j].position);
        norm([b[0] - a[0], b[1] - a[1], b[2] - a[2]])
    }
}

/// A set of bath spin indices, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cluster {
    pub indices: Vec<usize>,
}

impl Cluster {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("cluster", "indices must be distinct"));
        }
        if indices.is_empty() || indices.len() > MAX_ORDER {
            return Err(Error::UnsupportedOrder(indices.len()));
        }
        Ok(Cluster { indices })
    }

    pub fn order(&self) -> usize {
        self.indices.len()
    }
}

/// All singletons plus every cluster up to `order` whose spins are connected
/// by separations `≤ cutoff_nm`. For `order = 2` these are the pairs within
/// the cutoff.
pub fn build_clusters(system: &SpinSystem, order: usize, cutoff_nm: f64) -> Result<Vec<Cluster>> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::UnsupportedOrder(order));
    }
    let n = system.len();
    let mut clusters: Vec<Cluster> = (0..n).map(|i| Cluster { indices: vec![i] }).collect();
    if order == 1 || n < 2 {
        return Ok(clusters);
    }
    let mut neighbours = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if system.separation(i, j) <= cutoff_nm {
                neighbours[i].push(j);
                neighbours[j].push(i);
            }
        }
    }
    let mut level: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for _ in 2..=order {
        let mut next = BTreeSet::new();
        for c in &level {
            for &i in c {
                for &j in &neighbours[i] {
                    if c.contains(&j) {
                        continue;
                    }
                    let mut grown = c.clone();
                    grown.push(j);
                    grown.sort_unstable();
                    next.insert(grown);
                }
            }
        }
        level = next.into_iter().collect();
        clusters.extend(level.iter().map(|c| Cluster { indices: c.clone() }));
    }
    Ok(clusters)
}

/// A coherence curve `L(t)` over total sequence times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceCurve {
    pub times: Vec<f64>,
    pub l: Vec<f64>,
    /// Points where a cluster correction hit the division guard.
    pub flagged: Vec<bool>,
}

impl CoherenceCurve {
    pub fn ones(times: &[f64]) -> Self {
        CoherenceCurve {
            times: times.to_vec(),
            l: vec![1.0; times.len()],
            flagged: vec![false; times.len()],
        }
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }
}

/// Expansion settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CceOptions {
    pub order: usize,
    pub pair_cutoff_nm: f64,
    pub division_guard: f64,
}

impl Default for CceOptions {
    fn default() -> Self {
        CceOptions {
            order: 2,
            pair_cutoff_nm: 2.0,
            division_guard: DIVISION_GUARD,
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(invalid("times", "must be finite and non-negative"));
    }
    Ok(())
}

/// Propagator pair `(U_0, U_1)` for one cluster at total time `t`.
trait Propagate {
    fn signal(&self, kind: SequenceKind, n_pulses: u32, t: f64) -> Complex64;
}

struct SingleSpin {
    h: [[f64; 3]; 2],
}

impl Propagate for SingleSpin {
    fn signal(&self, kind: SequenceKind, n_pulses: u32, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let seq = PulseSequence::with_total_time(kind, n_pulses, t);
        let u = compose(
            &seq,
            |b, d| Su2::evolve(self.h[b], d),
            |x, y| x.mul(*y),
            |x, m| x.pow(m),
        );
        Complex64::new(0.5 * u[1].overlap(u[0]), 0.0)
    }
}

/// Branch propagators `[U_0, U_1]` of a sequence, built from one decoupling
/// period `A_b B_b' A_b` raised to a power instead of pulse by pulse.
/// `expm(b, d)` evolves under branch `b` for `d`, `mul(x, y)` is `x·y`.
fn compose<M: Clone>(
    seq: &PulseSequence,
    expm: impl Fn(usize, f64) -> M,
    mul: impl Fn(&M, &M) -> M,
    pow: impl Fn(&M, u32) -> M,
) -> [M; 2] {
    if seq.kind == SequenceKind::Ramsey {
        return [expm(0, seq.tau), expm(1, seq.tau)];
    }
    let a = [expm(0, seq.tau), expm(1, seq.tau)];
    let b = [mul(&a[0], &a[0]), mul(&a[1], &a[1])];
    let n = seq.n_pulses;
    let branch = |x: usize| {
        let y = 1 - x;
        let period = mul(&a[x], &mul(&b[y], &a[x]));
        let p = pow(&period, n / 2);
        if n.is_multiple_of(2) {
            p
        } else {
            mul(&a[y], &mul(&a[x], &p))
        }
    };
    [branch(0), branch(1)]
}

/// Dense cluster Hamiltonians in their eigenbases.
struct DenseCluster {
    dim: usize,
    vecs: [DMatrix<Complex64>; 2],
    vals: [DVector<f64>; 2],
}

impl DenseCluster {
    fn new(system: &SpinSystem, cluster: &Cluster) -> Result<Self> {
        let h0 = cluster_hamiltonian(system, cluster, system.alpha_0)?;
        let h1 = cluster_hamiltonian(system, cluster, system.alpha_1)?;
        let e0 = h0.symmetric_eigen();
        let e1 = h1.symmetric_eigen();
        Ok(DenseCluster {
            dim: 1 << cluster.order(),
            vecs: [e0.eigenvectors, e1.eigenvectors],
            vals: [e0.eigenvalues, e1.eigenvalues],
        })
    }

    fn expm(&self, branch: usize, t: f64) -> DMatrix<Complex64> {
        let v = &self.vecs[branch];
        let mut scaled = v.clone();
        for (k, e) in self.vals[branch].iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -e * t);
            for r in 0..self.dim {
                scaled[(r, k)] *= phase;
            }
        }
        scaled * v.adjoint()
    }
}

impl Propagate for DenseCluster {
    fn signal(&self, kind: SequenceKind, n_pulses: u32, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let seq = PulseSequence::with_total_time(kind, n_pulses, t);
        let dim = self.dim;
        let u = compose(
            &seq,
            |b, d| self.expm(b, d),
            |x, y| x * y,
            |x, m| {
                let mut acc = DMatrix::<Complex64>::identity(dim, dim);
                let mut base = x.clone();
                let mut m = m;
                while m > 0 {
                    if m & 1 == 1 {
                        acc = &acc * &base;
                    }
                    m >>= 1;
                    if m > 0 {
                        base = &base * &base;
                    }
                }
                acc
            },
        );
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            for k in 0..dim {
                tr += u[1][(k, i)].conj() * u[0][(k, i)];
            }
        }
        tr / dim as f64
    }
}

/// Cluster Hamiltonian for electron projection `alpha`. Bit `k` of a basis
/// index is spin `k` of the cluster, `0 = ↑`.
pub fn cluster_hamiltonian(system: &SpinSystem, cluster: &Cluster, alpha: f64) -> Result<DMatrix<Complex64>> {
    let s = cluster.order();
    let dim = 1usize << s;
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    let m = |state: usize, k: usize| if state >> k & 1 == 0 { 0.5 } else { -0.5 };
    for (k, &i) in cluster.indices.iter().enumerate() {
        let f = system.field(i, alpha);
        for state in 0..dim {
            h[(state, state)] += Complex64::new(f[2] * m(state, k), 0.0);
            if state >> k & 1 == 0 {
                let down = state | 1 << k;
                // ⟨↓|f_x I_x + f_y I_y|↑⟩ = (f_x + i f_y)/2
                let v = Complex64::new(0.5 * f[0], 0.5 * f[1]);
                h[(down, state)] += v;
                h[(state, down)] += v.conj();
            }
        }
    }
    for a in 0..s {
        for b in a + 1..s {
            let c = system.pair(cluster.indices[a], cluster.indices[b])?;
            for state in 0..dim {
                h[(state, state)] += Complex64::new(c.c_zz * m(state, a) * m(state, b), 0.0);
                let (ba, bb) = (state >> a & 1, state >> b & 1);
                if ba != bb {
                    let other = state ^ (1 << a) ^ (1 << b);
                    h[(other, state)] += Complex64::new(c.b_ff, 0.0);
                }
            }
        }
    }
    Ok(h)
}

fn propagator(system: &SpinSystem, cluster: &Cluster) -> Result<Box<dyn Propagate + Sync>> {
    if cluster.order() == 1 {
        let i = cluster.indices[0];
        Ok(Box::new(SingleSpin {
            h: [system.field(i, system.alpha_0), system.field(i, system.alpha_1)],
        }))
    } else {
        Ok(Box::new(DenseCluster::new(system, cluster)?))
    }
}

/// Complex cluster signal `Tr[U_1† U_0]/2^|C|` over total times `times`.
pub fn cluster_signal(
    system: &SpinSystem,
    cluster: &Cluster,
    kind: SequenceKind,
    n_pulses: u32,
    times: &[f64],
) -> Result<Vec<Complex64>> {
    check_times(times)?;
    let p = propagator(system, cluster)?;
    Ok(times.iter().map(|&t| p.signal(kind, n_pulses, t)).collect())
}

/// Real cluster coherence `L_C(t) = Re Tr[ρ_C U_1† U_0]`.
pub fn cluster_coherence(
    system: &SpinSystem,
    cluster: &Cluster,
    kind: SequenceKind,
    n_pulses: u32,
    times: &[f64],
) -> Result<Vec<f64>> {
    Ok(cluster_signal(system, cluster, kind, n_pulses, times)?
        .into_iter()
        .map(|z| z.re)
        .collect())
}

/// Multiplies `items` as a balanced tree so the result does not depend on
/// how the work was split.
fn pairwise_product(items: &[Vec<Complex64>], len: usize) -> Vec<Complex64> {
    match items.len() {
        0 => vec![Complex64::new(1.0, 0.0); len],
        1 => items[0].clone(),
        n => {
            let (a, b) = items.split_at(n / 2);
            let (pa, pb) = (pairwise_product(a, len), pairwise_product(b, len));
            pa.iter().zip(&pb).map(|(x, y)| x * y).collect()
        }
    }
}

/// Coherence of the whole bath from the cluster expansion over `clusters`.
///
/// Each cluster's irreducible correction is its signal divided by the
/// corrections of all its sub-clusters present in the list. Where that
/// denominator is below the division guard the correction is set to one and
/// the time point flagged. Contributions are kept complex and the real part
/// of their product is returned.
pub fn cce_coherence_with_clusters(
    system: &SpinSystem,
    clusters: &[Cluster],
    kind: SequenceKind,
    n_pulses: u32,
    times: &[f64],
    division_guard: f64,
) -> Result<CoherenceCurve> {
    check_times(times)?;
    PulseSequence::with_total_time(kind, n_pulses, 1.0).validate()?;
    let len = times.len();
    let mut irreducible: HashMap<Vec<usize>, Vec<Complex64>> = HashMap::new();
    let mut flagged = vec![false; len];
    let mut ordered: Vec<Vec<Complex64>> = Vec::with_capacity(clusters.len());
    let max_order = clusters.iter().map(Cluster::order).max().unwrap_or(0);
    for order in 1..=max_order {
        let level: Vec<&Cluster> = clusters.iter().filter(|c| c.order() == order).collect();
        let signals = level
            .par_iter()
            .map(|c| cluster_signal(system, c, kind, n_pulses, times))
            .collect::<Result<Vec<_>>>()?;
        for (c, sig) in level.into_iter().zip(signals) {
            let tilde = if order == 1 {
                sig
            } else {
                let mut denom = vec![Complex64::new(1.0, 0.0); len];
                for mask in 1..(1u32 << order) - 1 {
                    let sub: Vec<usize> = (0..order)
                        .filter(|k| mask >> k & 1 == 1)
                        .map(|k| c.indices[k])
                        .collect();
                    if let Some(t) = irreducible.get(&sub) {
                        denom.iter_mut().zip(t).for_each(|(d, v)| *d *= v);
                    }
                }
                sig.iter()
                    .zip(&denom)
                    .enumerate()
                    .map(|(k, (s, d))| {
                        if d.norm() < division_guard {
                            flagged[k] = true;
                            Complex64::new(1.0, 0.0)
                        } else {
                            s / d
                        }
                    })
                    .collect()
            };
            ordered.push(tilde.clone());
            irreducible.insert(c.indices.clone(), tilde);
        }
    }
    let total = pairwise_product(&ordered, len);
    Ok(CoherenceCurve {
        times: times.to_vec(),
        l: total.iter().map(|z| z.re).collect(),
        flagged,
    })
}

/// Builds clusters per `opts` and runs the expansion.
pub fn cce_coherence(
    system: &SpinSystem,
    kind: SequenceKind,
    n_pulses: u32,
    times: &[f64],
    opts: &CceOptions,
) -> Result<CoherenceCurve> {
    let clusters = build_clusters(system, opts.order, opts.pair_cutoff_nm)?;
    cce_coherence_with_clusters(system, &clusters, kind, n_pulses, times, opts.division_guard)
}

/// Second-order expansion over a paramagnetic pair bath.
pub fn pair_bath_coherence(
    positions: &[[f64; 3]],
    electron: &ElectronModel,
    kind: SequenceKind,
    n_pulses: u32,
    times: &[f64],
    pair_cutoff_nm: f64,
) -> Result<CoherenceCurve> {
    let system = SpinSystem::paramagnetic(positions, electron)?;
    let opts = CceOptions {
        order: 2,
        pair_cutoff_nm,
        division_guard: DIVISION_GUARD,
    };
    cce_coherence(&system, kind, n_pulses, times, &opts)
}

/// Pointwise product of two curves on the same grid.
pub fn total_coherence(a: &CoherenceCurve, b: &CoherenceCurve) -> Result<CoherenceCurve> {
    if a.times != b.times {
        return Err(Error::GridMismatch);
    }
    Ok(CoherenceCurve {
        times: a.times.clone(),
        l: a.l.iter().zip(&b.l).map(|(x, y)| x * y).collect(),
        flagged: a.flagged.iter().zip(&b.flagged).map(|(x, y)| *x || *y).collect(),
    })
}

/// Stretched-exponential fit of a curve, skipping flagged points.
pub fn fit_stretched(curve: &CoherenceCurve) -> Result<DecayFit> {
    let (t, l): (Vec<f64>, Vec<f64>) = curve
        .times
        .iter()
        .zip(&curve.l)
        .zip(&curve.flagged)
        .filter(|(_, f)| !**f)
        .map(|((t, l), _)| (*t, *l))
        .unzip();
    fit_stretched_points(&t, &l)
}

/// `count` log-spaced times from `t_min` to `t_max` preceded by `t = 0`.
pub fn log_time_grid(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || count < 2 {
        return Err(invalid("time_grid", "need 0 < t_min < t_max and at least two points"));
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    let mut out = vec![0.0];
    out.extend((0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()));
    Ok(out)
}
