use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Domain;
use crate::error::{Error, Result};
use crate::exec;
use crate::field::{gradient, ScalarField, VectorField};
use crate::gauge::Gauge;

/// Uniform spacing and the margin added around the domain's bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub h: f64,
    #[serde(default)]
    pub padding: f64,
}

impl GridSpec {
    pub fn refined(self, k: u32) -> GridSpec {
        GridSpec { h: self.h / 2f64.powi(k as i32), padding: self.padding }
    }
}

/// Cell-centered uniform grid over a padded bounding box of a domain.
/// Cells are stored in C order (last axis fastest).
#[derive(Clone, Debug)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub origin: Vec<f64>,
    pub dims: Vec<usize>,
    /// Volume fraction of each cell inside the domain.
    pub frac: Vec<f64>,
    /// Cell center inside the domain.
    pub inside: Vec<bool>,
    /// Cell may carry a test function: its 5^n neighborhood is fully inside
    /// and it lies in the bounding box shrunk by 2h.
    pub admissible: Vec<bool>,
    strides: Vec<usize>,
    spec: GridSpec,
    domain: Domain,
}

/// Subsamples per axis in cut cells.
const SUBSAMPLES: usize = 4;
/// Collar width in cells around non-admissible cells.
pub const COLLAR: usize = 2;

impl Grid {
    pub fn new(domain: &Domain, spec: GridSpec) -> Result<Grid> {
        if !(spec.h > 0.0 && spec.h.is_finite()) || !(spec.padding >= 0.0) {
            return Err(Error::InvalidDomain(format!("grid needs h > 0 and padding >= 0, got {spec:?}")));
        }
        let n = domain.dim();
        let h = spec.h;
        let (lo, hi) = domain.bbox();
        let m = ((spec.padding / h).ceil() as usize).max(3);
        let origin: Vec<f64> = lo.iter().map(|l| l - m as f64 * h).collect();
        let dims: Vec<usize> = (0..n).map(|i| ((hi[i] - lo[i]) / h - 1e-9).ceil() as usize + 2 * m).collect();
        let total: usize = dims.iter().product();
        if total > 60_000_000 {
            return Err(Error::InvalidDomain(format!("grid with {total} cells is too large")));
        }
        let mut strides = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let mut grid = Grid {
            n,
            h,
            origin,
            dims,
            frac: Vec::new(),
            inside: Vec::new(),
            admissible: Vec::new(),
            strides,
            spec,
            domain: domain.clone(),
        };
        let band = 0.5 * (n as f64).sqrt() * h;
        let sub = SUBSAMPLES.pow(n as u32);
        let cells: Vec<(f64, bool)> = exec::map_range(total, |k| {
            let c = grid.center(k);
            let s = domain.euclid_signed(&c);
            let frac = if s >= band {
                1.0
            } else if s <= -band {
                0.0
            } else {
                let mut hits = 0usize;
                let mut y = vec![0.0; n];
                for j in 0..sub {
                    let mut r = j;
                    for i in 0..n {
                        let t = (r % SUBSAMPLES) as f64;
                        r /= SUBSAMPLES;
                        y[i] = c[i] + h * ((t + 0.5) / SUBSAMPLES as f64 - 0.5);
                    }
                    if domain.contains(&y) {
                        hits += 1;
                    }
                }
                hits as f64 / sub as f64
            };
            (frac, s > 0.0)
        });
        grid.frac = cells.iter().map(|c| c.0).collect();
        grid.inside = cells.iter().map(|c| c.1).collect();
        let shrunk_lo: Vec<f64> = lo.iter().map(|l| l + COLLAR as f64 * h).collect();
        let shrunk_hi: Vec<f64> = hi.iter().map(|u| u - COLLAR as f64 * h).collect();
        grid.admissible = exec::map_range(total, |k| {
            let c = grid.center(k);
            if (0..n).any(|i| c[i] < shrunk_lo[i] || c[i] > shrunk_hi[i]) {
                return false;
            }
            grid.neighborhood(k, COLLAR).map_or(false, |cells| cells.iter().all(|&j| grid.frac[j] == 1.0))
        });
        Ok(grid)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.frac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frac.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        (0..self.n).map(|i| (k / self.strides[i]) % self.dims[i]).collect()
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn center(&self, k: usize) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.origin[i] + (((k / self.strides[i]) % self.dims[i]) as f64 + 0.5) * self.h)
            .collect()
    }

    /// Cell containing `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut k = 0;
        for i in 0..self.n {
            let t = ((x[i] - self.origin[i]) / self.h).floor();
            if t < 0.0 || t >= self.dims[i] as f64 {
                return None;
            }
            k += t as usize * self.strides[i];
        }
        Some(k)
    }

    /// Neighbor `offset` cells away along `axis`.
    pub fn neighbor(&self, k: usize, axis: usize, offset: isize) -> Option<usize> {
        let i = (k / self.strides[axis]) % self.dims[axis];
        let j = i as isize + offset;
        if j < 0 || j >= self.dims[axis] as isize {
            None
        } else {
            Some((k as isize + offset * self.strides[axis] as isize) as usize)
        }
    }

    /// All cells within Chebyshev distance `r`, or `None` if any falls off the grid.
    pub fn neighborhood(&self, k: usize, r: usize) -> Option<Vec<usize>> {
        let idx = self.multi_index(k);
        if (0..self.n).any(|i| idx[i] < r || idx[i] + r >= self.dims[i]) {
            return None;
        }
        let w = 2 * r + 1;
        let mut out = Vec::with_capacity(w.pow(self.n as u32));
        for j in 0..w.pow(self.n as u32) {
            let mut rem = j;
            let mut cell = 0isize;
            for i in 0..self.n {
                let o = (rem % w) as isize - r as isize;
                rem /= w;
                cell += o * self.strides[i] as isize;
            }
            out.push((k as isize + cell) as usize);
        }
        Some(out)
    }

    /// Total volume of the domain part covered by the grid.
    pub fn covered_volume(&self) -> f64 {
        exec::pairwise_sum(&self.frac) * self.cell_volume()
    }
}

/// Gridded `d_F` with the signed values and exact gradients used by cut-cell quadrature.
#[derive(Clone, Debug)]
pub struct DistanceField {
    /// `d_F` at inside cells, zero elsewhere; carries the ridge mask.
    pub field: ScalarField,
    /// Signed distance in a band around the boundary and inside; `-inf` far outside.
    pub signed: Vec<f64>,
    /// Exact gradient of the signed distance where it is computed.
    pub grad: VectorField,
}

impl DistanceField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.field.grid
    }
}

/// Evaluates `d_F` at the cell centers of `grid`.
pub fn distance_field(g: &Gauge, grid: &Arc<Grid>) -> Result<DistanceField> {
    if g.dim() != grid.n {
        return Err(Error::Precondition(format!("gauge dimension {} vs grid dimension {}", g.dim(), grid.n)));
    }
    let n = grid.n;
    let h = grid.h;
    let band = 3.0 * h * (n as f64).sqrt();
    let domain = grid.domain();
    let pts: Vec<(f64, Vec<f64>)> = exec::map_range(grid.len(), |k| {
        let c = grid.center(k);
        if domain.euclid_signed(&c) > -band {
            domain.signed_distance(g, &c)
        } else {
            (f64::NEG_INFINITY, vec![0.0; n])
        }
    });
    let signed: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let mut grad = Vec::with_capacity(n * grid.len());
    for p in &pts {
        grad.extend_from_slice(&p.1);
    }
    let values: Vec<f64> = (0..grid.len()).map(|k| if grid.inside[k] { signed[k].max(0.0) } else { 0.0 }).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    let ridge = ridge_mask(grid, &values);
    let field = ScalarField::new(grid.clone(), values)?.with_ridge(ridge);
    Ok(DistanceField { field, signed, grad: VectorField::new(grid.clone(), grad) })
}

/// Inside cells where some axis second difference of `d` exceeds `2/h` in magnitude.
fn ridge_mask(grid: &Grid, d: &[f64]) -> Vec<bool> {
    let h = grid.h;
    exec::map_range(grid.len(), |k| {
        grid.inside[k]
            && (0..grid.n).any(|a| match (grid.neighbor(k, a, -1), grid.neighbor(k, a, 1)) {
                (Some(l), Some(r)) if grid.inside[l] && grid.inside[r] => {
                    (d[l] - 2.0 * d[k] + d[r]).abs() / (h * h) > 2.0 / h
                }
                _ => false,
            })
    })
}

/// Summary of `|F(grad_h d_F) - 1|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EikonalStats {
    pub median: f64,
    pub mean: f64,
    pub max: f64,
    pub cells: usize,
}

/// Eikonal residual of the finite-difference gradient over admissible non-ridge cells.
pub fn eikonal_residual(df: &DistanceField, g: &Gauge) -> EikonalStats {
    let grid = df.grid();
    let grad = gradient(&df.field);
    let ridge = df.field.ridge.as_deref();
    let cells: Vec<usize> = (0..grid.len())
        .filter(|&k| grid.admissible[k] && !ridge.is_some_and(|r| r[k]))
        .collect();
    let mut res: Vec<f64> = exec::map_slice(&cells, |&k| (g.value(grad.at(k)) - 1.0).abs());
    if res.is_empty() {
        return EikonalStats { median: f64::NAN, mean: f64::NAN, max: f64::NAN, cells: 0 };
    }
    let mean = exec::pairwise_sum(&res) / res.len() as f64;
    res.sort_by(f64::total_cmp);
    let m = res.len();
    let median = if m % 2 == 1 { res[m / 2] } else { 0.5 * (res[m / 2 - 1] + res[m / 2]) };
    EikonalStats { median, mean, max: res[m - 1], cells: m }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::gauge::{make_gauge, GaugeSpec};
    use approx::assert_relative_eq;

    fn grid(spec: DomainSpec, h: f64) -> Arc<Grid> {
        Arc::new(Grid::new(&Domain::new(&spec).unwrap(), GridSpec { h, padding: 0.05 }).unwrap())
    }

    #[test]
    fn layout_and_fractions() {
        let g = grid(DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }, 0.125);
        assert_eq!(g.dims, vec![14, 14]);
        assert_relative_eq!(g.origin[0], -0.375);
        let k = g.index(&[3, 5]);
        assert_eq!(g.multi_index(k), vec![3, 5]);
        assert_eq!(g.locate(&g.center(k)), Some(k));
        assert_eq!(g.neighbor(k, 1, 1), Some(g.index(&[3, 6])));
        assert_relative_eq!(g.covered_volume(), 1.0, epsilon = 1e-12);
        assert!(g.frac.iter().all(|f| (0.0..=1.0).contains(f)));

        let b = grid(DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 1.0 / 64.0);
        assert!((b.covered_volume() - std::f64::consts::PI).abs() < 2e-3);
    }

    #[test]
    fn admissible_cells_keep_a_collar() {
        let g = grid(DomainSpec::HalfSpace { n: 2, axis: 1, offset: 0.0, window: 1.0 }, 1.0 / 32.0);
        for k in 0..g.len() {
            if g.admissible[k] {
                assert!(g.center(k)[1] > 2.0 * g.h);
            }
        }
        assert!(g.admissible.iter().any(|&a| a));
    }

    #[test]
    fn half_space_fields_are_exact() {
        let g = grid(DomainSpec::HalfSpace { n: 2, axis: 1, offset: 0.0, window: 1.0 }, 1.0 / 32.0);
        let e = make_gauge(&GaugeSpec::Euclidean { n: 2 }).unwrap();
        let df = distance_field(&e, &g).unwrap();
        let s = eikonal_residual(&df, &e);
        assert!(s.max < 1e-12, "{s:?}");
        let el = make_gauge(&GaugeSpec::Ellipse { a: vec![1.0, 0.0, 0.0, 4.0], n: 2 }).unwrap();
        let df = distance_field(&el, &g).unwrap();
        for k in 0..g.len() {
            if g.inside[k] {
                assert_relative_eq!(df.field.values[k], g.center(k)[1] / 2.0, epsilon = 1e-14);
                assert_relative_eq!(df.grad.at(k)[1], 0.5, epsilon = 1e-14);
            }
        }
        assert!(eikonal_residual(&df, &el).max < 1e-12);
    }

    #[test]
    fn box_eikonal_residual_and_ridge() {
        let g = grid(DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }, 1.0 / 128.0);
        let e = make_gauge(&GaugeSpec::Euclidean { n: 2 }).unwrap();
        let df = distance_field(&e, &g).unwrap();
        let s = eikonal_residual(&df, &e);
        assert!(s.median <= 0.05, "{s:?}");
        assert!(s.cells > 10_000);
    }

    #[test]
    fn ball_eikonal_residual_shrinks_under_refinement() {
        let e = make_gauge(&GaugeSpec::Euclidean { n: 2 }).unwrap();
        let spec = DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 };
        let r1 = eikonal_residual(&distance_field(&e, &grid(spec.clone(), 1.0 / 32.0)).unwrap(), &e).median;
        let r2 = eikonal_residual(&distance_field(&e, &grid(spec, 1.0 / 64.0)).unwrap(), &e).median;
        let ratio = r1 / r2;
        assert!((2.0 / 3.0..=6.0).contains(&ratio), "{r1} {r2}");
    }
}
