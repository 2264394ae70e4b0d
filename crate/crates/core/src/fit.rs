//! Small nonlinear least-squares fits: stretched exponentials for coherence
//! decays and `A·pᴺ + B` for benchmarking decays.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Levenberg–Marquardt on `params`, given a model returning residuals and
/// their Jacobian (rows = data points). Returns the fitted parameters and the
/// final sum of squared residuals.
pub fn levenberg_marquardt<F>(mut params: Vec<f64>, model: F, max_iter: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> (Vec<f64>, Vec<Vec<f64>>),
{
    let n = params.len();
    let mut lambda = 1e-3;
    let (mut r, mut j) = model(&params);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..max_iter {
        let m = r.len();
        let jm = DMatrix::from_fn(m, n, |row, col| j[row][col]);
        let rv = DVector::from_vec(r.clone());
        let jtj = jm.transpose() * &jm;
        let jtr = jm.transpose() * &rv;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for d in 0..n {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let (rt, jt) = model(&trial);
            let ct: f64 = rt.iter().map(|v| v * v).sum();
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost.max(1e-300);
                params = trial;
                r = rt;
                j = jt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-15 {
                    return (params, cost);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (params, cost)
}

/// Stretched-exponential fit `L(t) = exp[−(t/T2)ⁿ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub t2: f64,
    pub n: f64,
    /// Root-mean-square residual over the fitted points.
    pub residual: f64,
}

pub const STRETCH_MIN: f64 = 0.5;
pub const STRETCH_MAX: f64 = 4.0;
/// Points below this value end the fitting window.
const FLOOR: f64 = 0.05;

/// Least-squares stretched-exponential fit on `(t, L)` samples. Only the
/// initial decay (up to the first drop below 0.05) is fitted.
pub fn fit_stretched_points(t: &[f64], l: &[f64]) -> Result<DecayFit> {
    assert_eq!(t.len(), l.len());
    let min = l.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min < (-1.0f64).exp()) {
        return Err(Error::InsufficientDecay(min));
    }
    let end = l.iter().position(|&v| v < FLOOR).map_or(l.len(), |i| i + 1);
    let pts: Vec<(f64, f64)> = t[..end]
        .iter()
        .zip(&l[..end])
        .filter(|(ti, _)| **ti > 0.0)
        .map(|(a, b)| (*a, *b))
        .collect();

    let (ln_t2, n0) = initial_guess(&pts);
    let model = |p: &[f64]| {
        let t2 = p[0].exp();
        let n = p[1].clamp(STRETCH_MIN, STRETCH_MAX);
        let mut r = Vec::with_capacity(pts.len());
        let mut jac = Vec::with_capacity(pts.len());
        for &(ti, li) in &pts {
            let x = ti / t2;
            let xn = x.powf(n);
            let f = (-xn).exp();
            r.push(f - li);
            jac.push(vec![f * n * xn, -f * xn * x.ln()]);
        }
        (r, jac)
    };
    let (p, cost) = levenberg_marquardt(vec![ln_t2, n0], model, 200);
    Ok(DecayFit {
        t2: p[0].exp(),
        n: p[1].clamp(STRETCH_MIN, STRETCH_MAX),
        residual: (cost / pts.len().max(1) as f64).sqrt(),
    })
}

fn initial_guess(pts: &[(f64, f64)]) -> (f64, f64) {
    let lin: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(_, l)| *l > FLOOR && *l < 0.95)
        .map(|(t, l)| (t.ln(), (-l.ln()).ln()))
        .collect();
    if lin.len() >= 2 {
        let k = lin.len() as f64;
        let mx = lin.iter().map(|p| p.0).sum::<f64>() / k;
        let my = lin.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = lin.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = lin.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if sxx > 0.0 {
            let n = (sxy / sxx).clamp(STRETCH_MIN, STRETCH_MAX);
            // ln(-ln L) = n ln t - n ln T2
            let ln_t2 = mx - my / n;
            if ln_t2.is_finite() {
                return (ln_t2, n);
            }
        }
    }
    let cross = pts
        .iter()
        .find(|(_, l)| *l < (-1.0f64).exp())
        .map_or(pts.last().map_or(1.0, |p| p.0), |p| p.0);
    (cross.ln(), 1.0)
}

/// `A·pᴺ + B` fit result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpDecayFit {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    pub residual: f64,
}

/// Least-squares fit of `y = A·pˣ + B`.
pub fn fit_exp_decay(x: &[f64], y: &[f64]) -> ExpDecayFit {
    assert_eq!(x.len(), y.len());
    let first = y.first().copied().unwrap_or(1.0);
    let last = y.last().copied().unwrap_or(0.5);
    let b0 = last.min(first).min(0.5);
    let a0 = (first - b0).max(1e-6);
    // Decay guess from the two ends.
    let (x0, x1) = (x.first().copied().unwrap_or(0.0), x.last().copied().unwrap_or(1.0));
    let ratio = ((last - b0).max(1e-9) / a0).min(1.0);
    let p0 = if x1 > x0 {
        ratio.powf(1.0 / (x1 - x0)).clamp(0.5, 1.0 - 1e-9)
    } else {
        0.99
    };
    // Parametrize p = 1 - exp(q) so p < 1 stays representable near unity.
    let q0 = (1.0 - p0).max(1e-12).ln();
    let model = |pr: &[f64]| {
        let (a, q, b) = (pr[0], pr[1], pr[2]);
        let eps = q.exp();
        let ln_p = (-eps).ln_1p();
        let mut r = Vec::with_capacity(x.len());
        let mut jac = Vec::with_capacity(x.len());
        for (&xi, &yi) in x.iter().zip(y) {
            let px = (xi * ln_p).exp();
            r.push(a * px + b - yi);
            // d(pˣ)/dq = x·p^(x-1)·dp/dq with dp/dq = -eps
            let dq = a * xi * px / (1.0 - eps) * (-eps);
            jac.push(vec![px, dq, 1.0]);
        }
        (r, jac)
    };
    let (pr, cost) = levenberg_marquardt(vec![a0, q0, b0], model, 500);
    ExpDecayFit {
        a: pr[0],
        p: 1.0 - pr[1].exp(),
        b: pr[2],
        residual: (cost / x.len().max(1) as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn recovers_gaussian_decay() {
        let t = grid(201, 3e-3);
        let l: Vec<f64> = t.iter().map(|&x| (-(x / 1e-3f64).powi(2)).exp()).collect();
        let f = fit_stretched_points(&t, &l).unwrap();
        assert!((f.t2 - 1e-3).abs() < 1e-6, "{f:?}");
        assert!((f.n - 2.0).abs() < 0.02);
    }

    #[test]
    fn recovers_simple_exponential() {
        let t = grid(301, 10e-3);
        let l: Vec<f64> = t.iter().map(|&x| (-x / 2e-3).exp()).collect();
        let f = fit_stretched_points(&t, &l).unwrap();
        assert!((f.t2 - 2e-3).abs() < 2e-6, "{f:?}");
        assert!((f.n - 1.0).abs() < 1e-3);
    }

    #[test]
    fn flat_curve_is_insufficient_decay() {
        let t = grid(11, 1.0);
        let l = vec![0.9; 11];
        assert!(matches!(fit_stretched_points(&t, &l), Err(Error::InsufficientDecay(_))));
    }

    #[test]
    fn noisy_decay_within_five_percent() {
        let t = grid(201, 3e-3);
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l: Vec<f64> = t
                .iter()
                .map(|&x| (-(x / 1e-3f64).powi(2)).exp() + 0.01 * (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt())
                .collect();
            let f = fit_stretched_points(&t, &l).unwrap();
            worst = worst.max((f.t2 - 1e-3).abs() / 1e-3);
        }
        assert!(worst < 0.05, "worst relative error {worst}");
    }

    #[test]
    fn exp_decay_fit_recovers_generator() {
        let x: Vec<f64> = [1.0, 10.0, 50.0, 100.0, 300.0, 1000.0, 3000.0].to_vec();
        let y: Vec<f64> = x.iter().map(|&n| 0.49 * 0.9995f64.powf(n) + 0.5).collect();
        let f = fit_exp_decay(&x, &y);
        assert!((f.p - 0.9995).abs() < 1e-9, "{f:?}");
        assert!((f.a - 0.49).abs() < 1e-6);
        assert!((f.b - 0.5).abs() < 1e-6);
    }
}
