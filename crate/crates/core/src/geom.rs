//! Small vector helpers and optimization on the unit sphere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    let r = norm(a);
    a.iter().map(|x| x / r).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Point on the unit circle.
pub fn circle(t: f64) -> [f64; 2] {
    [t.cos(), t.sin()]
}

/// Deterministic, roughly uniform points on the unit sphere in `R^n`.
///
/// Uniform angles in 2D, a Fibonacci lattice in 3D and seeded Gaussian
/// directions beyond that.
pub fn sphere_samples(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_5fe7e);
            (0..count)
                .map(|_| loop {
                    let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    if norm(&v) > 1e-6 {
                        break normalized(&v);
                    }
                })
                .collect()
        }
    }
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_min(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimizes `f` over the unit sphere in `R^n`: coarse sampling followed by
/// local refinement of the best few samples (golden section on the angle in
/// 2D, compass search in the tangent plane otherwise).
pub fn minimize_on_sphere(n: usize, samples: usize, f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let dirs = sphere_samples(n, samples);
    let vals: Vec<f64> = dirs.iter().map(|d| f(d)).collect();
    let mut order: Vec<usize> = (0..dirs.len()).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(i.cmp(&j)));
    let keep = order.len().min(3);
    let mut best = (vals[order[0]], dirs[order[0]].clone());
    for &k in &order[..keep] {
        let cand = if n == 2 {
            let t0 = dirs[k][1].atan2(dirs[k][0]);
            let dt = 2.0 * std::f64::consts::PI / samples as f64;
            let (t, v) = golden_min(t0 - 1.5 * dt, t0 + 1.5 * dt, 1e-13, |t| f(&circle(t)));
            (v, circle(t).to_vec())
        } else {
            let step0 = 2.0 * (4.0 * std::f64::consts::PI / samples as f64).sqrt();
            compass_on_sphere(&dirs[k], vals[k], step0, &f)
        };
        if cand.0 < best.0 {
            best = cand;
        }
    }
    best
}

fn compass_on_sphere(start: &[f64], f0: f64, step0: f64, f: &impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let n = start.len();
    let mut u = start.to_vec();
    let mut fu = f0;
    let mut step = step0;
    while step > 1e-11 {
        let basis = tangent_basis(&u);
        let mut improved = false;
        for e in &basis {
            for sgn in [1.0, -1.0] {
                let trial: Vec<f64> = (0..n).map(|i| u[i] + sgn * step * e[i]).collect();
                let trial = normalized(&trial);
                let ft = f(&trial);
                if ft < fu {
                    u = trial;
                    fu = ft;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (fu, u)
}

/// Orthonormal basis of the tangent space of the unit sphere at `u`.
pub fn tangent_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let c = dot(&e, u);
        for i in 0..n {
            e[i] -= c * u[i];
        }
        for b in &basis {
            let c = dot(&e, b);
            for i in 0..n {
                e[i] -= c * b[i];
            }
        }
        let r = norm(&e);
        if r > 1e-6 {
            basis.push(e.iter().map(|x| x / r).collect());
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

/// Uniform sample in `[lo, hi)`.
pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Golub-Welsch).
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Standard normal deviate.
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}
