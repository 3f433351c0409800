//! Seeded families of compactly supported test functions and the ground-state transform.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DistanceField, Grid};
use crate::error::{Error, Result};
use crate::exec;
use crate::field::ScalarField;
use crate::geom;

/// `exp(1 - 1/(1 - s^2))` for `s < 1`, zero otherwise; equals 1 at the center.
pub fn bump_profile(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

/// `max_s |d/ds bump_profile(s^2)|`.
pub fn bump_profile_lipschitz() -> f64 {
    static L: OnceLock<f64> = OnceLock::new();
    *L.get_or_init(|| {
        let slope = |s: f64| {
            let q = 1.0 - s * s;
            2.0 * s / (q * q) * bump_profile(s * s)
        };
        -geom::golden_min(0.0, 0.99, 1e-12, |s| -slope(s)).1
    })
}

/// Smooth step from 0 (at `tau <= 0`) to 1 (at `tau >= 1`).
pub fn smooth_step(tau: f64) -> f64 {
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = psi(tau);
    let b = psi(1.0 - tau);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Rotated ellipsoid `{ |diag(1/a) R (x - c)| < 1 }`; rows of `rotation` are the local axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: Vec<f64>,
    pub semi_axes: Vec<f64>,
    /// Row-major `n x n` orthogonal matrix.
    pub rotation: Vec<f64>,
}

impl Ellipsoid {
    pub fn sphere(center: Vec<f64>, r: f64) -> Ellipsoid {
        let n = center.len();
        let rotation = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
        Ellipsoid { center, semi_axes: vec![r; n], rotation }
    }

    /// Normalized local coordinates `z`, with `|z| < 1` on the support.
    pub fn local(&self, x: &[f64]) -> Vec<f64> {
        let n = self.center.len();
        (0..n)
            .map(|i| {
                let row = &self.rotation[i * n..(i + 1) * n];
                let y: f64 = (0..n).map(|j| row[j] * (x[j] - self.center[j])).sum();
                y / self.semi_axes[i]
            })
            .collect()
    }

    pub fn bump(&self, x: &[f64]) -> f64 {
        let z = self.local(x);
        bump_profile(geom::dot(&z, &z))
    }

    fn scale(&mut self, f: f64) {
        self.semi_axes.iter_mut().for_each(|a| *a *= f);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Bump,
    PolyBump,
    DistanceProfile,
}

impl FamilyKind {
    pub fn all() -> Vec<FamilyKind> {
        vec![FamilyKind::Bump, FamilyKind::PolyBump, FamilyKind::DistanceProfile]
    }

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Bump => "bump",
            FamilyKind::PolyBump => "poly_bump",
            FamilyKind::DistanceProfile => "distance_profile",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunctionSpec {
    Bump {
        #[serde(flatten)]
        shape: Ellipsoid,
    },
    /// Bump times `1 + sum_m coeffs[m] z^m` over the monomials of degree 1 to 3
    /// in the local coordinates (see [`monomials`]).
    PolyBump {
        #[serde(flatten)]
        shape: Ellipsoid,
        coeffs: Vec<f64>,
    },
    /// `d^t * cutoff`, where the cutoff is a bump times a smooth step in `d`
    /// rising from 0 at `delta0` to 1 at `delta1`.
    DistanceProfile {
        t: f64,
        delta0: f64,
        delta1: f64,
        cutoff: Ellipsoid,
    },
}

/// Exponent vectors of the monomials of degree 1 to 3 in `n` variables.
pub fn monomials(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for k in 0..4usize.pow(n as u32) {
        let e: Vec<u32> = (0..n).map(|i| ((k / 4usize.pow(i as u32)) % 4) as u32).collect();
        let deg: u32 = e.iter().sum();
        if (1..=3).contains(&deg) {
            out.push(e);
        }
    }
    out.sort_by_key(|e| (e.iter().sum::<u32>(), std::cmp::Reverse(e.clone())));
    out
}

impl TestFunctionSpec {
    pub fn kind(&self) -> FamilyKind {
        match self {
            TestFunctionSpec::Bump { .. } => FamilyKind::Bump,
            TestFunctionSpec::PolyBump { .. } => FamilyKind::PolyBump,
            TestFunctionSpec::DistanceProfile { .. } => FamilyKind::DistanceProfile,
        }
    }

    /// Cutoff factor of a distance profile at a point with distance `d` (1 for other kinds).
    pub fn cutoff(&self, x: &[f64], d: f64) -> f64 {
        match self {
            TestFunctionSpec::DistanceProfile { delta0, delta1, cutoff, .. } => {
                cutoff.bump(x) * smooth_step((d - delta0) / (delta1 - delta0))
            }
            _ => 1.0,
        }
    }

    /// Value at `x`, where `d = d_F(x)`.
    pub fn value(&self, x: &[f64], d: f64) -> f64 {
        match self {
            TestFunctionSpec::Bump { shape } => shape.bump(x),
            TestFunctionSpec::PolyBump { shape, coeffs } => {
                let z = shape.local(x);
                let b = bump_profile(geom::dot(&z, &z));
                if b == 0.0 {
                    return 0.0;
                }
                let poly: f64 = monomials(z.len())
                    .iter()
                    .zip(coeffs)
                    .map(|(e, c)| c * e.iter().zip(&z).map(|(&k, zi)| zi.powi(k as i32)).product::<f64>())
                    .sum();
                b * (1.0 + poly)
            }
            TestFunctionSpec::DistanceProfile { t, .. } => {
                let c = self.cutoff(x, d);
                if c == 0.0 {
                    0.0
                } else {
                    d.powf(*t) * c
                }
            }
        }
    }

    /// Samples the function at the cell centers of the distance field's grid.
    pub fn evaluate(&self, df: &DistanceField) -> Result<ScalarField> {
        let grid = df.grid();
        let d = &df.field.values;
        let values = exec::map_range(grid.len(), |k| if grid.inside[k] { self.value(&grid.center(k), d[k]) } else { 0.0 });
        ScalarField::new(grid.clone(), values)
    }

    /// Lipschitz bound of a plain bump.
    pub fn bump_lipschitz(&self) -> Option<f64> {
        match self {
            TestFunctionSpec::Bump { shape } => {
                Some(bump_profile_lipschitz() / shape.semi_axes.iter().copied().fold(f64::INFINITY, f64::min))
            }
            _ => None,
        }
    }

    fn shrink(&mut self, l: f64) {
        match self {
            TestFunctionSpec::Bump { shape } | TestFunctionSpec::PolyBump { shape, .. } => shape.scale(0.8),
            TestFunctionSpec::DistanceProfile { delta0, delta1, cutoff, .. } => {
                *delta0 *= 1.25;
                *delta1 = *delta0 + 0.2 * l;
                cutoff.scale(0.95);
            }
        }
    }
}

/// A family member with its grid samples.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub id: String,
    pub spec: TestFunctionSpec,
    pub field: ScalarField,
}

/// Support, grown by one cell, lies in admissible cells.
pub fn support_is_admissible(f: &ScalarField) -> bool {
    let grid = &f.grid;
    f.support()
        .into_iter()
        .all(|k| grid.neighborhood(k, 1).is_some_and(|cells| cells.iter().all(|&j| grid.admissible[j])))
}

/// Length scale of the domain part covered by the grid.
fn length_scale(grid: &Grid) -> f64 {
    let d = grid.domain();
    let (lo, hi) = d.bbox();
    let half = (0..grid.n).map(|i| 0.5 * (hi[i] - lo[i])).fold(f64::INFINITY, f64::min);
    let deepest = (0..grid.len())
        .filter(|&k| grid.inside[k])
        .map(|k| d.euclid_signed(&grid.center(k)))
        .fold(0.0, f64::max);
    deepest.min(half)
}

fn random_rotation(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if n == 2 {
        let t = geom::uniform(rng, 0.0, 2.0 * std::f64::consts::PI);
        let (s, c) = t.sin_cos();
        return vec![c, s, -s, c];
    }
    let q = geom::normalized(&(0..4).map(|_| geom::gaussian(rng)).collect::<Vec<_>>());
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    vec![
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ]
}

/// Draws `count` functions, member `i` of kind `kinds[i % len]` from the
/// stream `i` of a ChaCha8 generator seeded with `seed`. Supports shrink
/// until they fit in the admissible cells.
pub fn sample_family(df: &DistanceField, count: usize, seed: u64, kinds: &[FamilyKind]) -> Result<Vec<TestFunction>> {
    if count == 0 || kinds.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let grid = df.grid();
    let domain = grid.domain();
    let n = grid.n;
    let l = length_scale(grid);
    let (lo, hi) = domain.bbox();
    let depth = |c: &[f64]| {
        (0..n).fold(domain.euclid_signed(c), |m, i| m.min(c[i] - lo[i]).min(hi[i] - c[i]))
    };
    let anchors: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            depth(&grid.center(k)) > 0.25 * l
                && grid.neighborhood(k, 1).is_some_and(|cells| cells.iter().all(|&j| grid.admissible[j]))
        })
        .collect();
    if anchors.is_empty() {
        return Err(Error::NoAdmissibleSupport(format!("no cell deeper than {:.3e} in {}", 0.25 * l, domain.label())));
    }
    let members: Vec<Result<TestFunction>> = exec::map_range(count, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let kind = kinds[i % kinds.len()];
        let mut spec = match kind {
            FamilyKind::Bump | FamilyKind::PolyBump => {
                let c = grid.center(anchors[rng.random_range(0..anchors.len())]);
                let r = depth(&c);
                let semi_axes = (0..n).map(|_| r * geom::uniform(&mut rng, 0.35, 0.9)).collect();
                let shape = Ellipsoid { center: c, semi_axes, rotation: random_rotation(n, &mut rng) };
                if kind == FamilyKind::Bump {
                    TestFunctionSpec::Bump { shape }
                } else {
                    let coeffs = (0..monomials(n).len()).map(|_| geom::uniform(&mut rng, -1.0, 1.0)).collect();
                    TestFunctionSpec::PolyBump { shape, coeffs }
                }
            }
            FamilyKind::DistanceProfile => {
                let t = geom::uniform(&mut rng, 0.4, 0.8);
                let mut center = domain.center();
                for c in center.iter_mut() {
                    *c += geom::uniform(&mut rng, -0.1, 0.1) * l;
                }
                let semi_axes = (0..n).map(|i| 0.9 * 0.5 * (hi[i] - lo[i])).collect();
                let mut cutoff = Ellipsoid::sphere(center, 1.0);
                cutoff.semi_axes = semi_axes;
                TestFunctionSpec::DistanceProfile { t, delta0: 0.05 * l, delta1: 0.25 * l, cutoff }
            }
        };
        for _ in 0..60 {
            let field = spec.evaluate(df)?;
            if support_is_admissible(&field) {
                if field.is_zero() {
                    break;
                }
                return Ok(TestFunction { id: format!("{}#{i}", kind.name()), spec, field });
            }
            spec.shrink(l);
        }
        Err(Error::NoAdmissibleSupport(format!("member {i} ({}) in {}", kind.name(), domain.label())))
    });
    members.into_iter().collect()
}

/// Nonnegative radial bumps hugging the boundary from inside, centered
/// along inner normals at evenly spaced boundary points.
pub fn probe_family(df: &DistanceField, count: usize) -> Result<Vec<ScalarField>> {
    if count == 0 {
        return Err(Error::EmptyFamily);
    }
    let grid = df.grid();
    let domain = grid.domain();
    let (lo, hi) = domain.bbox();
    let l = length_scale(grid);
    let rho = 0.12 * l;
    let mesh = domain.boundary_mesh(4.0 * count as f64 / l.max(1e-3));
    let pts: Vec<usize> = (0..mesh.points.len())
        .filter(|&j| (0..grid.n).all(|i| mesh.points[j][i] >= lo[i] && mesh.points[j][i] <= hi[i]))
        .collect();
    if pts.is_empty() {
        return Err(Error::NoAdmissibleSupport(format!("no boundary points in the window of {}", domain.label())));
    }
    let picks: Vec<usize> = (0..count.min(pts.len())).map(|i| pts[i * pts.len() / count.min(pts.len())]).collect();
    let h = grid.h;
    let fields: Vec<Option<ScalarField>> = exec::map_slice(&picks, |&j| {
        let y = &mesh.points[j];
        let nu = &mesh.normals[j];
        let mut gap = 2.0 * h;
        while gap < 0.5 * l {
            let c: Vec<f64> = (0..grid.n).map(|i| y[i] - nu[i] * (rho + gap)).collect();
            let shape = Ellipsoid::sphere(c, rho);
            let values = (0..grid.len()).map(|k| shape.bump(&grid.center(k))).collect();
            if let Ok(f) = ScalarField::new(grid.clone(), values) {
                if !f.is_zero() && support_is_admissible(&f) {
                    return Some(f);
                }
            }
            gap += h;
        }
        None
    });
    let out: Vec<ScalarField> = fields.into_iter().flatten().collect();
    if out.is_empty() {
        return Err(Error::NoAdmissibleSupport(format!("no boundary probe fits in {}", domain.label())));
    }
    Ok(out)
}

/// `u = d_F^{1 - 1/p} v`.
pub fn ground_state_transform(v: &ScalarField, df: &DistanceField, p: f64) -> Result<ScalarField> {
    if !(p > 1.0) {
        return Err(Error::Precondition(format!("ground-state transform needs p > 1, got {p}")));
    }
    let e = 1.0 - 1.0 / p;
    let values = v.values.iter().zip(&df.field.values).map(|(v, d)| if *v == 0.0 { 0.0 } else { d.powf(e) * v }).collect();
    ScalarField::new(v.grid.clone(), values)
}

/// `v = d_F^{1/p - 1} u` on the support of `u`, zero elsewhere.
pub fn inverse_ground_state_transform(u: &ScalarField, df: &DistanceField, p: f64) -> Result<ScalarField> {
    if !(p > 1.0) {
        return Err(Error::Precondition(format!("ground-state transform needs p > 1, got {p}")));
    }
    let e = 1.0 - 1.0 / p;
    let mut values = Vec::with_capacity(u.values.len());
    for (k, (u, d)) in u.values.iter().zip(&df.field.values).enumerate() {
        if *u == 0.0 {
            values.push(0.0);
        } else if *d > 0.0 {
            values.push(u / d.powf(e));
        } else {
            return Err(Error::NonFinite(k));
        }
    }
    ScalarField::new(u.grid.clone(), values)
}
