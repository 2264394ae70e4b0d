//! Brute-force references built without the closed forms or the cluster
//! expansion.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vvbath::cce::SpinSystem;
use vvbath::ddgate::SequenceKind;
use vvbath::hyperfine::{nuclear_pair_coupling, ElectronModel, HyperfineModel, SpinSpecies};
use vvbath::lattice::{enumerate_sites, BathConfiguration, BathSpin, CrystalModel, IsotopeModel};

type M2 = Matrix2<Complex64>;

/// `exp(−i t h·σ/2)` written out explicitly.
pub fn evolve(h: [f64; 3], t: f64) -> M2 {
    let w = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    if w == 0.0 {
        return M2::identity();
    }
    let (s, c) = (0.5 * w * t).sin_cos();
    let (x, y, z) = (h[0] / w, h[1] / w, h[2] / w);
    let i = Complex64::i();
    M2::new(
        Complex64::new(c, 0.0) - i * s * z,
        -i * s * Complex64::new(x, -y),
        -i * s * Complex64::new(x, y),
        Complex64::new(c, 0.0) + i * s * z,
    )
}

/// `½ Re Tr[U_1† U_0]` with `U_α` multiplied out one pulse period at a time.
pub fn product_magnetization(h0: [f64; 3], h1: [f64; 3], n: u32, tau: f64) -> f64 {
    let v0 = evolve(h0, tau) * evolve(h1, 2.0 * tau) * evolve(h0, tau);
    let v1 = evolve(h1, tau) * evolve(h0, 2.0 * tau) * evolve(h1, tau);
    let (mut u0, mut u1) = (M2::identity(), M2::identity());
    for _ in 0..n / 2 {
        u0 *= v0;
        u1 *= v1;
    }
    0.5 * (u1.adjoint() * u0).trace().re
}

/// Exact electron coherence of electron ⊗ bath under ideal σ_x pulses,
/// from the density matrix of the full Hilbert space.
pub fn exact_coherence(system: &SpinSystem, kind: SequenceKind, n_pulses: u32, t: f64) -> f64 {
    let n = system.len();
    let d = 1usize << n;
    let dim = 2 * d;
    let m = |state: usize, k: usize| if state >> k & 1 == 0 { 0.5 } else { -0.5 };
    let bath_h = |alpha: f64| {
        let mut h = DMatrix::<Complex64>::zeros(d, d);
        for (k, s) in system.spins.iter().enumerate() {
            let f = [
                alpha * s.coupling[0],
                alpha * s.coupling[1],
                s.omega + alpha * s.coupling[2],
            ];
            for st in 0..d {
                h[(st, st)] += f[2] * m(st, k);
                if st >> k & 1 == 0 {
                    let dn = st | 1 << k;
                    h[(dn, st)] += Complex64::new(0.5 * f[0], 0.5 * f[1]);
                    h[(st, dn)] += Complex64::new(0.5 * f[0], -0.5 * f[1]);
                }
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                let (pa, pb) = (system.spins[a].position, system.spins[b].position);
                let r = [pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]];
                let c = nuclear_pair_coupling(r, system.spins[a].gamma, system.spins[b].gamma).unwrap();
                for st in 0..d {
                    h[(st, st)] += c.c_zz * m(st, a) * m(st, b);
                    if (st >> a & 1) != (st >> b & 1) {
                        h[(st ^ (1 << a) ^ (1 << b), st)] += Complex64::new(c.b_ff, 0.0);
                    }
                }
            }
        }
        h
    };
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    h.view_mut((0, 0), (d, d)).copy_from(&bath_h(system.alpha_0));
    h.view_mut((d, d), (d, d)).copy_from(&bath_h(system.alpha_1));
    let free = |dt: f64| (h.map(|v| v * Complex64::new(0.0, -dt))).exp();
    let mut x = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..d {
        x[(i, d + i)] = Complex64::new(1.0, 0.0);
        x[(d + i, i)] = Complex64::new(1.0, 0.0);
    }
    let u = match kind {
        SequenceKind::Ramsey => free(t),
        _ => {
            let tau = t / (2.0 * f64::from(n_pulses));
            let mut u = free(tau);
            for p in 0..n_pulses {
                let gap = if p + 1 == n_pulses { tau } else { 2.0 * tau };
                u = free(gap) * &x * u;
            }
            u
        }
    };
    // ρ(0) = |+⟩⟨+| ⊗ I/d.
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..d {
        for (a, b) in [(0, 0), (0, d), (d, 0), (d, d)] {
            rho[(a + i, b + i)] = Complex64::new(0.5 / d as f64, 0.0);
        }
    }
    let rho = &u * rho * u.adjoint();
    let off: Complex64 = (0..d).map(|i| rho[(i, d + i)]).sum();
    let off = if n_pulses % 2 == 1 { off.conj() } else { off };
    2.0 * off.re
}

/// `spins` distinct non-core sites drawn uniformly within `radius_nm`.
pub fn random_bath(rng: &mut ChaCha8Rng, spins: usize, electron: &ElectronModel, radius_nm: f64) -> SpinSystem {
    let hf = HyperfineModel::default();
    let sites: Vec<_> = enumerate_sites(&CrystalModel::default(), radius_nm)
        .unwrap()
        .into_iter()
        .filter(|s| !hf.is_tabulated(s))
        .collect();
    let mut chosen = Vec::new();
    while chosen.len() < spins {
        let i = rng.random_range(0..sites.len());
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    let mut bath = BathConfiguration {
        spins: chosen
            .iter()
            .map(|&i| BathSpin {
                site: sites[i],
                species: SpinSpecies::for_element(sites[i].element),
                hyperfine: None,
            })
            .collect(),
        seed: 0,
        isotopes: IsotopeModel::NATURAL,
    };
    hf.attach(&mut bath).unwrap();
    SpinSystem::nuclear(&bath, electron).unwrap()
}
