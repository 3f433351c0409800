use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{cell_weights, ScalarField};
use crate::domain::{DistanceField, Grid};
use crate::error::{Error, Result};
use crate::exec;
use crate::geom;

/// Centers whose dyadic score is among the largest this many get a refined radius.
const REFINE_TOP: usize = 32;

#[derive(Clone, Copy, Debug)]
pub struct MorreyOptions {
    /// Centers are inside cells whose indices are all multiples of `stride`.
    pub stride: usize,
    /// Golden-section refinement of the best dyadic radius at the leading centers.
    pub refine: bool,
}

impl Default for MorreyOptions {
    fn default() -> Self {
        MorreyOptions { stride: 4, refine: true }
    }
}

/// Sampled lower bound of `sup_{x0, 0<r<D} r^{-lambda} integral_{B_r(x0)} |f|^p`.
#[derive(Clone, Debug, Serialize)]
pub struct MorreyEstimate {
    pub sup: f64,
    /// `sup^{1/p}`.
    pub norm: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Same estimate restricted to the centers of twice the stride.
    pub coarse_sup: f64,
    /// Relative gap to `coarse_sup` below 1%.
    pub converged: bool,
}

/// Morrey estimate of `f` with cut-cell masses `|f|^p W_k(0)`.
pub fn morrey_norm(f: &ScalarField, df: &DistanceField, p: f64, lambda: f64, opts: MorreyOptions) -> Result<MorreyEstimate> {
    if !(p >= 1.0) || !(lambda >= 0.0) {
        return Err(Error::Precondition(format!("Morrey norm needs p >= 1 and lambda >= 0, got {p}, {lambda}")));
    }
    let w = cell_weights(df, 0.0);
    let masses: Vec<f64> = f.values.iter().zip(&w).map(|(v, w)| v.abs().powf(p) * w).collect();
    morrey_from_masses(df.grid(), &masses, lambda, p, opts)
}

/// Row-wise prefix sums of cell masses along the last axis.
struct BallMass<'a> {
    grid: &'a Grid,
    prefix: Vec<f64>,
    masses: &'a [f64],
}

impl<'a> BallMass<'a> {
    fn new(grid: &'a Grid, masses: &'a [f64]) -> Self {
        let len = grid.dims[grid.n - 1];
        let rows = grid.len() / len;
        let mut prefix = Vec::with_capacity(rows * (len + 1));
        for r in 0..rows {
            let mut acc = 0.0;
            prefix.push(0.0);
            for j in 0..len {
                acc += masses[r * len + j];
                prefix.push(acc);
            }
        }
        BallMass { grid, prefix, masses }
    }

    /// Mass of the ball: every row whose axis passes within `r` of `x0`
    /// contributes the chord, with partial coverage of the end cells.
    fn mass(&self, x0: &[f64], r: f64) -> f64 {
        let g = self.grid;
        let n = g.n;
        let h = g.h;
        let last = n - 1;
        let len = g.dims[last];
        let mut lo = vec![0usize; last];
        let mut hi = vec![0usize; last];
        for i in 0..last {
            let a = ((x0[i] - r - g.origin[i]) / h - 0.5).ceil().max(0.0);
            let b = ((x0[i] + r - g.origin[i]) / h - 0.5).floor().min(g.dims[i] as f64 - 1.0);
            if b < a {
                return 0.0;
            }
            lo[i] = a as usize;
            hi[i] = b as usize;
        }
        let cum = |row: usize, t: f64| -> f64 {
            let t = t.clamp(0.0, len as f64);
            let j = (t.floor() as usize).min(len - 1);
            self.prefix[row * (len + 1) + j] + (t - j as f64) * self.masses[row * len + j]
        };
        let mut total = 0.0;
        let mut idx = lo.clone();
        loop {
            let mut rho2 = 0.0;
            let mut row = 0;
            for i in 0..last {
                let c = g.origin[i] + (idx[i] as f64 + 0.5) * h;
                rho2 += (c - x0[i]) * (c - x0[i]);
                row = row * g.dims[i] + idx[i];
            }
            if rho2 <= r * r {
                let w = (r * r - rho2).sqrt();
                let t0 = (x0[last] - w - g.origin[last]) / h;
                let t1 = (x0[last] + w - g.origin[last]) / h;
                total += cum(row, t1) - cum(row, t0);
            }
            let mut i = last;
            loop {
                if i == 0 {
                    return total;
                }
                i -= 1;
                if idx[i] < hi[i] {
                    idx[i] += 1;
                    for j in i + 1..last {
                        idx[j] = lo[j];
                    }
                    break;
                }
            }
        }
    }
}

/// Morrey estimate from precomputed per-cell masses (which may come from a singular weight).
pub fn morrey_from_masses(grid: &Grid, masses: &[f64], lambda: f64, p: f64, opts: MorreyOptions) -> Result<MorreyEstimate> {
    if let Some(k) = masses.iter().position(|m| !m.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    let stride = opts.stride.max(1);
    let diam = {
        let d = grid.domain().diameter();
        let span: f64 = grid.dims.iter().map(|&m| (m as f64 * grid.h).powi(2)).sum::<f64>().sqrt();
        d.min(span)
    };
    let rmax = diam * (1.0 - 1e-9);
    let rmin = (2.0 * grid.h).min(rmax);
    let mut radii = Vec::new();
    let mut r = rmin;
    while r < rmax {
        radii.push(r);
        r *= 2.0;
    }
    radii.push(rmax);

    let on_lattice = |k: usize, s: usize| grid.multi_index(k).iter().all(|i| i % s == 0);
    let centers: Vec<usize> = (0..grid.len()).filter(|&k| grid.inside[k] && on_lattice(k, stride)).collect();
    let bm = BallMass::new(grid, masses);
    let score = |x: &[f64], r: f64| bm.mass(x, r) / r.powf(lambda);
    let mut best: Vec<(f64, f64, usize)> = exec::map_slice(&centers, |&k| {
        let x = grid.center(k);
        let vals: Vec<f64> = radii.iter().map(|&r| score(&x, r)).collect();
        let (j, v) = exec::argmax(&vals).unwrap_or((0, 0.0));
        (v, radii[j], j)
    });
    if opts.refine {
        let mut order: Vec<usize> = (0..centers.len()).filter(|&i| best[i].0 > 0.0).collect();
        order.sort_by(|&a, &b| best[b].0.total_cmp(&best[a].0).then(a.cmp(&b)));
        order.truncate(REFINE_TOP);
        let refined = exec::map_slice(&order, |&i| {
            let x = grid.center(centers[i]);
            let j = best[i].2;
            let a = if j > 0 { radii[j - 1] } else { radii[j] };
            let b = if j + 1 < radii.len() { radii[j + 1] } else { radii[j] };
            if b > a {
                let (rr, neg) = geom::golden_min(a, b, 1e-6 * b, |r| -score(&x, r));
                if -neg > best[i].0 {
                    return Some((-neg, rr));
                }
            }
            None
        });
        for (&i, r) in order.iter().zip(refined) {
            if let Some((v, rr)) = r {
                best[i].0 = v;
                best[i].1 = rr;
            }
        }
    }
    let vals: Vec<f64> = best.iter().map(|b| b.0).collect();
    let (i, sup) = exec::argmax(&vals).unwrap_or((0, 0.0));
    let coarse_sup = centers
        .iter()
        .zip(&vals)
        .filter(|(&k, _)| on_lattice(k, 2 * stride))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let (center, radius) = match centers.get(i) {
        Some(&k) => (grid.center(k), best[i].1),
        None => (grid.domain().center(), rmax),
    };
    let converged = sup == 0.0 || (sup - coarse_sup) <= 0.01 * sup;
    Ok(MorreyEstimate { sup, norm: sup.powf(1.0 / p), center, radius, coarse_sup, converged })
}

/// `sup |u(x) - u(y)| / |x - y|^exponent` over inside cell centers: dyadic
/// axis and diagonal offsets from every cell plus `pairs` seeded random pairs.
pub fn holder_seminorm(u: &ScalarField, exponent: f64, seed: u64, pairs: usize) -> Result<f64> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(Error::Precondition(format!("Hölder exponent {exponent} not in (0, 1]")));
    }
    let grid = &u.grid;
    let n = grid.n;
    let v = &u.values;
    let cells: Vec<usize> = (0..grid.len()).filter(|&k| grid.inside[k]).collect();
    let xs = cell_centers(grid);
    let quotient = |a: usize, b: usize| {
        let d = geom::dist(&xs[a * n..(a + 1) * n], &xs[b * n..(b + 1) * n]);
        if d == 0.0 {
            0.0
        } else {
            (v[a] - v[b]).abs() / d.powf(exponent)
        }
    };
    let maxdim = grid.dims.iter().copied().max().unwrap_or(1);
    let local: Vec<f64> = exec::map_slice(&cells, |&k| {
        let idx = grid.multi_index(k);
        let mut best: f64 = 0.0;
        let mut step = 1;
        while step < maxdim {
            for a in 0..n {
                if let Some(j) = grid.neighbor(k, a, step as isize) {
                    if grid.inside[j] {
                        best = best.max(quotient(k, j));
                    }
                }
            }
            if idx.iter().zip(&grid.dims).all(|(&i, &m)| i + step < m) {
                let j = k + (0..n).map(|a| step * grid.stride(a)).sum::<usize>();
                if grid.inside[j] {
                    best = best.max(quotient(k, j));
                }
            }
            step *= 2;
        }
        best
    });
    let mut best = local.iter().copied().fold(0.0, f64::max);
    if cells.len() > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..pairs {
            let a = cells[rng.random_range(0..cells.len())];
            let b = cells[rng.random_range(0..cells.len())];
            best = best.max(quotient(a, b));
        }
    }
    Ok(best)
}

/// `sup` over sampled balls of the mean oscillation of `u`, with dyadic radii
/// from `2h` to the diameter. Centers lie on a lattice of stride at least 8,
/// coarsened by factors of two for large radii so that the spacing stays below `r/4`.
pub fn bmo_seminorm(u: &ScalarField, min_stride: usize) -> f64 {
    let grid = &u.grid;
    let n = grid.n;
    let h = grid.h;
    let inside: Vec<usize> = (0..grid.len()).filter(|&k| grid.inside[k]).collect();
    if inside.is_empty() {
        return 0.0;
    }
    let stride = min_stride.max(8).max((inside.len() as f64 / 400.0).powf(1.0 / n as f64).ceil() as usize);
    let diam = grid.domain().diameter().min(grid.dims.iter().map(|&m| m as f64 * h).fold(0.0, f64::max));
    let mut jobs: Vec<(usize, f64)> = Vec::new();
    let mut r = 2.0 * h;
    while r < diam {
        let mut s = stride;
        while 2.0 * s as f64 * h <= 0.25 * r {
            s *= 2;
        }
        jobs.extend(inside.iter().filter(|&&k| grid.multi_index(k).iter().all(|i| i % s == 0)).map(|&k| (k, r)));
        r *= 2.0;
    }
    let v = &u.values;
    let xs = cell_centers(grid);
    let osc: Vec<f64> = exec::map_slice(&jobs, |&(k, r)| {
        let x = &xs[k * n..(k + 1) * n];
        let mut members = Vec::new();
        ball_cells(grid, &xs, x, r, &mut members);
        members.retain(|&j| grid.inside[j]);
        let wsum: f64 = members.iter().map(|&j| grid.frac[j]).sum();
        if wsum == 0.0 {
            return 0.0;
        }
        let mean = members.iter().map(|&j| grid.frac[j] * v[j]).sum::<f64>() / wsum;
        members.iter().map(|&j| grid.frac[j] * (v[j] - mean).abs()).sum::<f64>() / wsum
    });
    osc.into_iter().fold(0.0, f64::max)
}

/// Cell centers, `n` coordinates per cell.
fn cell_centers(grid: &Grid) -> Vec<f64> {
    (0..grid.len()).flat_map(|k| grid.center(k)).collect()
}

/// Appends the cells whose centers lie in the closed ball.
fn ball_cells(grid: &Grid, xs: &[f64], x: &[f64], r: f64, out: &mut Vec<usize>) {
    let n = grid.n;
    let h = grid.h;
    let mut lo = vec![0usize; n];
    let mut hi = vec![0usize; n];
    for i in 0..n {
        let a = ((x[i] - r - grid.origin[i]) / h - 0.5).ceil().max(0.0);
        let b = ((x[i] + r - grid.origin[i]) / h - 0.5).floor().min(grid.dims[i] as f64 - 1.0);
        if b < a {
            return;
        }
        lo[i] = a as usize;
        hi[i] = b as usize;
    }
    let mut idx = lo.clone();
    loop {
        let k = grid.index(&idx);
        if geom::dist(&xs[k * n..(k + 1) * n], x) <= r {
            out.push(k);
        }
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < hi[i] {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = lo[j];
                }
                break;
            }
        }
    }
}
