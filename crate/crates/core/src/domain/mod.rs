//! Domains, boundary meshes, the anisotropic distance `d_F` and grids.

mod grid;
mod mesh;

pub use grid::{distance_field, eikonal_residual, DistanceField, EikonalStats, Grid, GridSpec};
pub use mesh::{mesh_distance, BoundaryMesh, Patch};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::geom;

fn unit_window() -> f64 {
    1.0
}

/// Serializable description of a domain `Omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DomainSpec {
    /// `{x : x[axis] > offset}`. Grids cover the slab
    /// `offset <= x[axis] <= offset + window`, `|x[j]| <= window/2` for `j != axis`.
    HalfSpace {
        n: usize,
        axis: usize,
        offset: f64,
        #[serde(default = "unit_window")]
        window: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    #[serde(rename = "box")]
    Cuboid {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Counterclockwise vertices of a convex polygon.
    ConvexPolygon {
        vertices: Vec<[f64; 2]>,
    },
    Annulus {
        center: Vec<f64>,
        r_in: f64,
        r_out: f64,
    },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::HalfSpace { n, .. } => *n,
            DomainSpec::Ball { center, .. } | DomainSpec::Annulus { center, .. } => center.len(),
            DomainSpec::Cuboid { lo, .. } => lo.len(),
            DomainSpec::ConvexPolygon { .. } => 2,
        }
    }

    pub fn label(&self) -> String {
        let pt = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        match self {
            DomainSpec::HalfSpace { axis, offset, .. } => format!("half_space(x{axis}>{offset})"),
            DomainSpec::Ball { center, radius } => format!("ball(c={};r={radius})", pt(center)),
            DomainSpec::Cuboid { lo, hi } => format!("box({}..{})", pt(lo), pt(hi)),
            DomainSpec::ConvexPolygon { vertices } => format!("convex_polygon({} vertices)", vertices.len()),
            DomainSpec::Annulus { center, r_in, r_out } => format!("annulus(c={};{r_in}..{r_out})", pt(center)),
        }
    }
}

/// Half-space `{nu . x <= b}` with unit outer normal `nu`.
#[derive(Clone, Debug)]
pub(crate) struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Validated domain with precomputed facets.
#[derive(Clone, Debug)]
pub struct Domain {
    spec: DomainSpec,
    n: usize,
    facets: Vec<Facet>,
}

/// `sup d_F`, or unbounded for half-spaces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum InnerRadius {
    Finite(f64),
    Unbounded,
}

impl InnerRadius {
    pub fn finite(self) -> Option<f64> {
        match self {
            InnerRadius::Finite(r) => Some(r),
            InnerRadius::Unbounded => None,
        }
    }
}

impl Domain {
    pub fn new(spec: &DomainSpec) -> Result<Domain> {
        let n = spec.dim();
        let bad = |m: String| Err(Error::InvalidDomain(m));
        if !(n == 2 || n == 3) {
            return bad(format!("dimension {n} not in {{2, 3}}"));
        }
        let mut facets = Vec::new();
        match spec {
            DomainSpec::HalfSpace { axis, offset, window, .. } => {
                if *axis >= n || !offset.is_finite() || !(*window > 0.0) {
                    return bad("half_space needs axis < n, finite offset and window > 0".into());
                }
                let mut normal = vec![0.0; n];
                normal[*axis] = -1.0;
                facets.push(Facet { normal, offset: -offset });
            }
            DomainSpec::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return bad(format!("ball radius {radius} must be positive"));
                }
            }
            DomainSpec::Cuboid { lo, hi } => {
                if hi.len() != n || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return bad("box needs lo < hi componentwise".into());
                }
                for k in 0..n {
                    let mut e = vec![0.0; n];
                    e[k] = 1.0;
                    facets.push(Facet { normal: e.clone(), offset: hi[k] });
                    e[k] = -1.0;
                    facets.push(Facet { normal: e, offset: -lo[k] });
                }
            }
            DomainSpec::ConvexPolygon { vertices } => {
                let m = vertices.len();
                if m < 3 {
                    return bad("polygon needs at least 3 vertices".into());
                }
                let mut area = 0.0;
                for i in 0..m {
                    let (a, b, c) = (vertices[i], vertices[(i + 1) % m], vertices[(i + 2) % m]);
                    area += a[0] * b[1] - b[0] * a[1];
                    let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                    if cross < -1e-12 {
                        return bad("polygon is not convex and counterclockwise".into());
                    }
                }
                if !(area > 0.0) {
                    return bad("polygon vertices must be counterclockwise".into());
                }
                for i in 0..m {
                    let (a, b) = (vertices[i], vertices[(i + 1) % m]);
                    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                    let len = (dx * dx + dy * dy).sqrt();
                    if len == 0.0 {
                        return bad("repeated polygon vertex".into());
                    }
                    let normal = vec![dy / len, -dx / len];
                    facets.push(Facet { offset: normal[0] * a[0] + normal[1] * a[1], normal });
                }
            }
            DomainSpec::Annulus { r_in, r_out, .. } => {
                if !(*r_in > 0.0 && r_in < r_out) {
                    return bad(format!("annulus needs 0 < r_in < r_out, got {r_in}, {r_out}"));
                }
            }
        }
        Ok(Domain { spec: spec.clone(), n, facets })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> String {
        self.spec.label()
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.spec, DomainSpec::HalfSpace { .. })
    }

    /// Bounding box of `Omega`, or of the computational window for half-spaces.
    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        match &self.spec {
            DomainSpec::HalfSpace { axis, offset, window, .. } => {
                let mut lo = vec![-window / 2.0; n];
                let mut hi = vec![window / 2.0; n];
                lo[*axis] = *offset;
                hi[*axis] = offset + window;
                (lo, hi)
            }
            DomainSpec::Ball { center, radius: r } | DomainSpec::Annulus { center, r_out: r, .. } => {
                (center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
            }
            DomainSpec::Cuboid { lo, hi } => (lo.clone(), hi.clone()),
            DomainSpec::ConvexPolygon { vertices } => {
                let mut lo = vec![f64::INFINITY; 2];
                let mut hi = vec![f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// A representative interior point.
    pub fn center(&self) -> Vec<f64> {
        match &self.spec {
            DomainSpec::Annulus { center, r_in, r_out } => {
                let mut c = center.clone();
                c[0] += 0.5 * (r_in + r_out);
                c
            }
            DomainSpec::ConvexPolygon { vertices } => {
                let m = vertices.len() as f64;
                vec![vertices.iter().map(|v| v[0]).sum::<f64>() / m, vertices.iter().map(|v| v[1]).sum::<f64>() / m]
            }
            _ => {
                let (lo, hi) = self.bbox();
                lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
            }
        }
    }

    /// Euclidean diameter (infinite for half-spaces).
    pub fn diameter(&self) -> f64 {
        match &self.spec {
            DomainSpec::HalfSpace { .. } => f64::INFINITY,
            DomainSpec::Ball { radius, .. } => 2.0 * radius,
            DomainSpec::Annulus { r_out, .. } => 2.0 * r_out,
            DomainSpec::Cuboid { lo, hi } => geom::dist(lo, hi),
            DomainSpec::ConvexPolygon { vertices } => {
                let mut d: f64 = 0.0;
                for a in vertices {
                    for b in vertices {
                        d = d.max(geom::dist(a, b));
                    }
                }
                d
            }
        }
    }

    /// A cheap signed function, positive inside and negative outside, whose
    /// absolute value never exceeds the Euclidean distance to the boundary
    /// (and equals it inside convex pieces).
    pub fn euclid_signed(&self, x: &[f64]) -> f64 {
        match &self.spec {
            DomainSpec::Ball { center, radius } => radius - geom::dist(x, center),
            DomainSpec::Annulus { center, r_in, r_out } => {
                let r = geom::dist(x, center);
                (r_out - r).min(r - r_in)
            }
            _ => self
                .facets
                .iter()
                .map(|f| f.offset - geom::dot(&f.normal, x))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.euclid_signed(x) > 0.0
    }

    /// Signed anisotropic distance and its gradient (by the envelope theorem).
    ///
    /// Convex pieces use the support-function identity
    /// `d_F(x) = min_nu (h(nu) - nu . x) / F(nu)` over unit outer normals;
    /// the value is positive inside and `-inf_{y in K} F°(x - y)` outside.
    pub fn signed_distance(&self, g: &Gauge, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.spec {
            DomainSpec::Ball { center, radius } => ball_signed(g, center, *radius, x),
            DomainSpec::Annulus { center, r_in, r_out } => {
                let outer = ball_signed(g, center, *r_out, x);
                let inner = ball_signed(g, center, *r_in, x);
                if outer.0 <= -inner.0 {
                    outer
                } else {
                    (-inner.0, inner.1.iter().map(|v| -v).collect())
                }
            }
            _ => {
                let mut best = (f64::INFINITY, vec![0.0; self.n]);
                for f in &self.facets {
                    let fv = g.value(&f.normal);
                    let d = (f.offset - geom::dot(&f.normal, x)) / fv;
                    if d < best.0 {
                        best = (d, f.normal.iter().map(|v| -v / fv).collect());
                    }
                }
                best
            }
        }
    }

    /// `sup d_F`: coarse lattice search followed by compass refinement.
    pub fn inner_radius(&self, g: &Gauge) -> InnerRadius {
        if !self.is_bounded() {
            return InnerRadius::Unbounded;
        }
        let (lo, hi) = self.bbox();
        let n = self.n;
        let m: usize = if n == 2 { 65 } else { 21 };
        let total = m.pow(n as u32);
        let vals: Vec<(f64, Vec<f64>)> = crate::exec::map_range(total, |k| {
            let mut idx = k;
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let j = idx % m;
                    idx /= m;
                    lo[i] + (hi[i] - lo[i]) * (j as f64 + 0.5) / m as f64
                })
                .collect();
            if self.contains(&x) {
                (self.signed_distance(g, &x).0, x)
            } else {
                (f64::NEG_INFINITY, x)
            }
        });
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by(|&a, &b| vals[b].0.total_cmp(&vals[a].0).then(a.cmp(&b)));
        let span = (0..n).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
        let mut best: f64 = vals[order[0]].0;
        for &k in order.iter().take(3) {
            let mut x = vals[k].1.clone();
            let mut fx = vals[k].0;
            let mut step = span / m as f64;
            while step > 1e-12 * span {
                let mut moved = false;
                for i in 0..n {
                    for s in [1.0, -1.0] {
                        let mut y = x.clone();
                        y[i] += s * step;
                        if !self.contains(&y) {
                            continue;
                        }
                        let fy = self.signed_distance(g, &y).0;
                        if fy > fx {
                            x = y;
                            fx = fy;
                            moved = true;
                        }
                    }
                }
                if !moved {
                    step *= 0.5;
                }
            }
            best = best.max(fx);
        }
        InnerRadius::Finite(best)
    }

    /// Concentric copy scaled by `factor` about the domain center; for an
    /// annulus the shell is thinned about its mid radius. `None` for half-spaces.
    pub fn core(&self, factor: f64) -> Option<Domain> {
        let spec = match &self.spec {
            DomainSpec::HalfSpace { .. } => return None,
            DomainSpec::Ball { center, radius } => DomainSpec::Ball { center: center.clone(), radius: radius * factor },
            DomainSpec::Cuboid { lo, hi } => {
                let c: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                DomainSpec::Cuboid {
                    lo: lo.iter().zip(&c).map(|(a, c)| c + factor * (a - c)).collect(),
                    hi: hi.iter().zip(&c).map(|(b, c)| c + factor * (b - c)).collect(),
                }
            }
            DomainSpec::ConvexPolygon { vertices } => {
                let c = self.center();
                DomainSpec::ConvexPolygon {
                    vertices: vertices
                        .iter()
                        .map(|v| [c[0] + factor * (v[0] - c[0]), c[1] + factor * (v[1] - c[1])])
                        .collect(),
                }
            }
            DomainSpec::Annulus { center, r_in, r_out } => {
                let mid = 0.5 * (r_in + r_out);
                let half = 0.5 * (r_out - r_in) * factor;
                DomainSpec::Annulus { center: center.clone(), r_in: mid - half, r_out: mid + half }
            }
        };
        Domain::new(&spec).ok()
    }

    /// Euclidean distance from the subdomain `inner` to the boundary of `self`.
    pub fn gap_to(&self, inner: &Domain) -> f64 {
        let mesh = inner.boundary_mesh(400.0);
        mesh.points.iter().map(|y| self.euclid_signed(y)).fold(f64::INFINITY, f64::min)
    }

    /// Anisotropic distance from `x` to `partial Omega`.
    pub fn anisotropic_distance(&self, g: &Gauge, x: &[f64]) -> Result<f64> {
        anisotropic_distance(self, g, x)
    }
}

/// `d_F(x) = inf_{y on the boundary} F°(x - y)` for `x` in the closure of `Omega`.
pub fn anisotropic_distance(d: &Domain, g: &Gauge, x: &[f64]) -> Result<f64> {
    if x.len() != d.dim() || d.euclid_signed(x) < -1e-12 {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    Ok(d.signed_distance(g, x).0.max(0.0))
}

/// Signed distance to the sphere of radius `r` about `c`:
/// `min_nu (r - nu . (x - c)) / F(nu)` over unit `nu`.
fn ball_signed(g: &Gauge, c: &[f64], r: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let z = geom::sub(x, c);
    let n = z.len();
    if g.is_euclidean() {
        let rz = geom::norm(&z);
        let grad = if rz > 0.0 { z.iter().map(|v| -v / rz).collect() } else { vec![0.0; n] };
        return (r - rz, grad);
    }
    let obj = |nu: &[f64]| (r - geom::dot(nu, &z)) / g.value(nu);
    let (val, nu) = if n == 2 {
        let k = 48;
        let dt = 2.0 * std::f64::consts::PI / k as f64;
        let samples: Vec<f64> = (0..k).map(|i| obj(&geom::circle(i as f64 * dt))).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]).then(a.cmp(&b)));
        let mut best = (f64::INFINITY, 0.0);
        for &i in order.iter().take(2) {
            let t0 = i as f64 * dt;
            let (t, v) = geom::golden_min(t0 - dt, t0 + dt, 1e-14, |t| obj(&geom::circle(t)));
            if v < best.0 {
                best = (v, t);
            }
        }
        (best.0, geom::circle(best.1).to_vec())
    } else {
        geom::minimize_on_sphere(n, 300, obj)
    };
    let fnu = g.value(&nu);
    (val, nu.iter().map(|v| -v / fnu).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{make_gauge, polar, GaugeSpec};
    use approx::assert_relative_eq;

    fn euclid(n: usize) -> Gauge {
        make_gauge(&GaugeSpec::Euclidean { n }).unwrap()
    }

    #[test]
    fn json_shape() {
        let d: DomainSpec = serde_json::from_str(r#"{"variant":"ball","center":[0,0],"radius":1.0}"#).unwrap();
        assert_eq!(d, DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 });
        let b: DomainSpec = serde_json::from_str(r#"{"variant":"box","lo":[0,0],"hi":[1,1]}"#).unwrap();
        assert!(matches!(b, DomainSpec::Cuboid { .. }));
        let h: DomainSpec = serde_json::from_str(r#"{"variant":"half_space","n":2,"axis":1,"offset":0}"#).unwrap();
        assert_eq!(h, DomainSpec::HalfSpace { n: 2, axis: 1, offset: 0.0, window: 1.0 });
        assert!(serde_json::to_string(&b).unwrap().contains(r#""variant":"box""#));
    }

    #[test]
    fn rejects_invalid() {
        assert!(Domain::new(&DomainSpec::Annulus { center: vec![0.0, 0.0], r_in: 2.0, r_out: 1.0 }).is_err());
        assert!(Domain::new(&DomainSpec::Ball { center: vec![0.0], radius: 1.0 }).is_err());
        let cw = DomainSpec::ConvexPolygon { vertices: vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]] };
        assert!(Domain::new(&cw).is_err());
    }

    #[test]
    fn distance_examples() {
        let hs = Domain::new(&DomainSpec::HalfSpace { n: 2, axis: 1, offset: 0.0, window: 1.0 }).unwrap();
        assert_relative_eq!(hs.anisotropic_distance(&euclid(2), &[0.7, 0.3]).unwrap(), 0.3);
        let el = make_gauge(&GaugeSpec::Ellipse { a: vec![1.0, 0.0, 0.0, 4.0], n: 2 }).unwrap();
        assert_relative_eq!(hs.anisotropic_distance(&el, &[0.0, 0.3]).unwrap(), 0.15, epsilon = 1e-15);
        let ball = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
        assert_relative_eq!(ball.anisotropic_distance(&euclid(2), &[0.25, 0.0]).unwrap(), 0.75);
        assert!(ball.anisotropic_distance(&euclid(2), &[1.5, 0.0]).is_err());
        let _ = polar(&el);
    }

    #[test]
    fn anisotropic_ball_distance_matches_axis_reduction() {
        // along a principal axis of diag(1,4), the touching Wulff point is on that axis
        let el = make_gauge(&GaugeSpec::Ellipse { a: vec![1.0, 0.0, 0.0, 4.0], n: 2 }).unwrap();
        let ball = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
        let (d, grad) = ball.signed_distance(&el, &[0.0, 0.0]);
        // Wulff shape of F is {F° <= 1} with semi-axes F(e1)=1, F(e2)=2; largest copy in the unit disk has scale 1/2
        assert_relative_eq!(d, 0.5, epsilon = 1e-12);
        assert_relative_eq!(el.value(&grad), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inner_radius_examples() {
        let ball = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
        assert_relative_eq!(ball.inner_radius(&euclid(2)).finite().unwrap(), 1.0, epsilon = 1e-9);
        let bx = Domain::new(&DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }).unwrap();
        assert_relative_eq!(bx.inner_radius(&euclid(2)).finite().unwrap(), 0.5, epsilon = 1e-9);
        let hs = Domain::new(&DomainSpec::HalfSpace { n: 2, axis: 1, offset: 0.0, window: 1.0 }).unwrap();
        assert_eq!(hs.inner_radius(&euclid(2)), InnerRadius::Unbounded);
    }

    #[test]
    fn core_and_gap() {
        let bx = Domain::new(&DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }).unwrap();
        let core = bx.core(0.5).unwrap();
        assert_relative_eq!(bx.gap_to(&core), 0.25, epsilon = 1e-9);
        let ann = Domain::new(&DomainSpec::Annulus { center: vec![0.0, 0.0], r_in: 1.0, r_out: 2.0 }).unwrap();
        let core = ann.core(0.5).unwrap();
        assert_relative_eq!(ann.gap_to(&core), 0.25, epsilon = 1e-9);
    }
}
