use std::f64::consts::PI;

use super::{Domain, DomainSpec};
use crate::error::{Error, Result};
use crate::gauge::{omega_n, Gauge};
use crate::geom;

/// Parametrized piece of the boundary.
#[derive(Clone, Debug)]
pub enum Patch {
    /// `a + t (b - a)`, `t in [0, 1]`.
    Segment { a: Vec<f64>, b: Vec<f64> },
    /// `c + r (cos t, sin t)`.
    Circle { c: Vec<f64>, r: f64 },
    /// `o + s u + t v`, `(s, t) in [0, 1]^2`.
    Rect { o: Vec<f64>, u: Vec<f64>, v: Vec<f64> },
    /// `c + r (sqrt(1-z^2) cos t, sqrt(1-z^2) sin t, z)`, parameters `(z, t)`.
    Sphere { c: Vec<f64>, r: f64 },
}

impl Patch {
    pub fn point(&self, s: f64, t: f64) -> Vec<f64> {
        match self {
            Patch::Segment { a, b } => a.iter().zip(b).map(|(a, b)| a + s * (b - a)).collect(),
            Patch::Circle { c, r } => vec![c[0] + r * s.cos(), c[1] + r * s.sin()],
            Patch::Rect { o, u, v } => (0..o.len()).map(|i| o[i] + s * u[i] + t * v[i]).collect(),
            Patch::Sphere { c, r } => {
                let z = s.clamp(-1.0, 1.0);
                let q = (1.0 - z * z).sqrt();
                vec![c[0] + r * q * t.cos(), c[1] + r * q * t.sin(), c[2] + r * z]
            }
        }
    }

    fn params(&self) -> usize {
        match self {
            Patch::Segment { .. } | Patch::Circle { .. } => 1,
            _ => 2,
        }
    }

    fn bounds(&self) -> [(f64, f64); 2] {
        match self {
            Patch::Segment { .. } => [(0.0, 1.0), (0.0, 0.0)],
            Patch::Circle { .. } => [(f64::NEG_INFINITY, f64::INFINITY), (0.0, 0.0)],
            Patch::Rect { .. } => [(0.0, 1.0), (0.0, 1.0)],
            Patch::Sphere { .. } => [(-1.0, 1.0), (f64::NEG_INFINITY, f64::INFINITY)],
        }
    }
}

/// Sampled boundary with surface-measure weights and outer normals.
#[derive(Clone, Debug, Default)]
pub struct BoundaryMesh {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec<f64>>,
    pub patches: Vec<Patch>,
    /// Patch index and parameters of each point.
    pub params: Vec<(usize, [f64; 2])>,
    /// Parameter spacing of each point, used to bracket refinements.
    pub spacing: Vec<[f64; 2]>,
}

impl BoundaryMesh {
    pub fn total_weight(&self) -> f64 {
        crate::exec::pairwise_sum(&self.weights)
    }

    fn push_patch(&mut self, patch: Patch, density: f64, outward: f64) {
        let id = self.patches.len();
        match &patch {
            Patch::Segment { a, b } => {
                let len = geom::dist(a, b);
                let m = (len * density).ceil().max(1.0) as usize;
                let d = geom::sub(b, a);
                let normal = vec![outward * d[1] / len, -outward * d[0] / len];
                for j in 0..m {
                    let t = (j as f64 + 0.5) / m as f64;
                    self.add(patch.point(t, 0.0), len / m as f64, normal.clone(), id, [t, 0.0], [1.0 / m as f64, 0.0]);
                }
            }
            Patch::Circle { r, c } => {
                let m = (2.0 * PI * r * density).ceil().max(8.0) as usize;
                for j in 0..m {
                    let t = 2.0 * PI * (j as f64 + 0.5) / m as f64;
                    let p = patch.point(t, 0.0);
                    let normal: Vec<f64> = geom::sub(&p, c).iter().map(|x| outward * x / r).collect();
                    self.add(p, 2.0 * PI * r / m as f64, normal, id, [t, 0.0], [2.0 * PI / m as f64, 0.0]);
                }
            }
            Patch::Rect { u, v, .. } => {
                let (lu, lv) = (geom::norm(u), geom::norm(v));
                let root = density.sqrt();
                let mu = (lu * root).ceil().max(1.0) as usize;
                let mv = (lv * root).ceil().max(1.0) as usize;
                let cross = vec![u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                let area = geom::norm(&cross);
                let normal: Vec<f64> = cross.iter().map(|x| outward * x / area).collect();
                for a in 0..mu {
                    for b in 0..mv {
                        let (s, t) = ((a as f64 + 0.5) / mu as f64, (b as f64 + 0.5) / mv as f64);
                        let w = area / (mu * mv) as f64;
                        self.add(patch.point(s, t), w, normal.clone(), id, [s, t], [1.0 / mu as f64, 1.0 / mv as f64]);
                    }
                }
            }
            Patch::Sphere { c, r } => {
                let m = (4.0 * PI * r * r * density).ceil().max(32.0) as usize;
                let golden = PI * (3.0 - 5f64.sqrt());
                let step = (4.0 * PI / m as f64).sqrt();
                for k in 0..m {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let t = golden * k as f64;
                    let p = patch.point(z, t);
                    let normal: Vec<f64> = geom::sub(&p, c).iter().map(|x| outward * x / r).collect();
                    self.add(p, 4.0 * PI * r * r / m as f64, normal, id, [z, t], [step, step]);
                }
            }
        }
        self.patches.push(patch);
    }

    fn add(&mut self, p: Vec<f64>, w: f64, normal: Vec<f64>, id: usize, params: [f64; 2], spacing: [f64; 2]) {
        self.points.push(p);
        self.weights.push(w);
        self.normals.push(normal);
        self.params.push((id, params));
        self.spacing.push(spacing);
    }
}

impl Domain {
    /// Boundary sampled at about `density` points per unit length (2D) or area (3D).
    /// Half-space boundaries are cut to three window widths.
    pub fn boundary_mesh(&self, density: f64) -> BoundaryMesh {
        let (lo, hi) = match &self.spec {
            DomainSpec::HalfSpace { n, window, .. } => (vec![-1.5 * window; *n], vec![1.5 * window; *n]),
            _ => self.bbox(),
        };
        self.mesh_in(density, &lo, &hi)
    }

    /// Mesh of the boundary restricted (for half-spaces) to the box around `B_r(center)`.
    pub fn boundary_mesh_near(&self, density: f64, center: &[f64], r: f64) -> BoundaryMesh {
        match &self.spec {
            DomainSpec::HalfSpace { .. } => {
                let lo: Vec<f64> = center.iter().map(|c| c - r).collect();
                let hi: Vec<f64> = center.iter().map(|c| c + r).collect();
                self.mesh_in(density, &lo, &hi)
            }
            _ => self.boundary_mesh(density),
        }
    }

    fn mesh_in(&self, density: f64, lo: &[f64], hi: &[f64]) -> BoundaryMesh {
        let mut mesh = BoundaryMesh::default();
        let n = self.n;
        match &self.spec {
            DomainSpec::HalfSpace { axis, offset, .. } => {
                let others: Vec<usize> = (0..n).filter(|k| k != axis).collect();
                let mut o = vec![0.0; n];
                o[*axis] = *offset;
                for &k in &others {
                    o[k] = lo[k];
                }
                if n == 2 {
                    let mut b = o.clone();
                    b[others[0]] = hi[others[0]];
                    // the segment runs along +e_j with Omega on its left when axis=1
                    let outward = if (*axis == 1) == (others[0] == 0) { 1.0 } else { -1.0 };
                    mesh.push_patch(Patch::Segment { a: o, b }, density, outward);
                    // enforce the outer normal -e_axis regardless of orientation conventions
                    for nm in mesh.normals.iter_mut() {
                        *nm = vec![0.0; n];
                        nm[*axis] = -1.0;
                    }
                } else {
                    let mut u = vec![0.0; n];
                    let mut v = vec![0.0; n];
                    u[others[0]] = hi[others[0]] - lo[others[0]];
                    v[others[1]] = hi[others[1]] - lo[others[1]];
                    mesh.push_patch(Patch::Rect { o, u, v }, density, 1.0);
                    for nm in mesh.normals.iter_mut() {
                        *nm = vec![0.0; n];
                        nm[*axis] = -1.0;
                    }
                }
            }
            DomainSpec::Ball { center, radius } => {
                mesh.push_patch(round_patch(center, *radius), density, 1.0);
            }
            DomainSpec::Annulus { center, r_in, r_out } => {
                mesh.push_patch(round_patch(center, *r_out), density, 1.0);
                mesh.push_patch(round_patch(center, *r_in), density, -1.0);
            }
            DomainSpec::ConvexPolygon { vertices } => {
                let m = vertices.len();
                for i in 0..m {
                    let (a, b) = (vertices[i], vertices[(i + 1) % m]);
                    mesh.push_patch(Patch::Segment { a: a.to_vec(), b: b.to_vec() }, density, 1.0);
                }
            }
            DomainSpec::Cuboid { lo, hi } => {
                if n == 2 {
                    let c = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
                    for i in 0..4 {
                        mesh.push_patch(Patch::Segment { a: c[i].to_vec(), b: c[(i + 1) % 4].to_vec() }, density, 1.0);
                    }
                } else {
                    for k in 0..3 {
                        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                        for (side, outward) in [(lo[k], -1.0), (hi[k], 1.0)] {
                            let mut o = lo.clone();
                            o[k] = side;
                            let mut u = vec![0.0; 3];
                            let mut v = vec![0.0; 3];
                            u[i] = hi[i] - lo[i];
                            v[j] = hi[j] - lo[j];
                            mesh.push_patch(Patch::Rect { o, u, v }, density, outward);
                        }
                    }
                }
            }
        }
        mesh
    }

    /// `Q_r = H^{n-1}(B_r(center) on the boundary) / H^{n-1}(sphere of radius r)`.
    pub fn perimeter_ratio(&self, center: &[f64], r: f64) -> f64 {
        perimeter_ratio(self, center, r)
    }
}

fn round_patch(c: &[f64], r: f64) -> Patch {
    if c.len() == 2 {
        Patch::Circle { c: c.to_vec(), r }
    } else {
        Patch::Sphere { c: c.to_vec(), r }
    }
}

/// Boundary measure captured by `B_r(center)`, relative to the measure of `partial B_r`.
pub fn perimeter_ratio(d: &Domain, center: &[f64], r: f64) -> f64 {
    let n = d.dim();
    let density = match n {
        2 => (4000.0 / r).max(4000.0),
        _ => (4.0e5 / (r * r)).max(4.0e4),
    };
    let mesh = d.boundary_mesh_near(density, center, r);
    let inside: Vec<f64> = mesh
        .points
        .iter()
        .zip(&mesh.weights)
        .map(|(p, w)| if geom::dist(p, center) < r { *w } else { 0.0 })
        .collect();
    crate::exec::pairwise_sum(&inside) / (n as f64 * omega_n(n) * r.powi(n as i32 - 1))
}

/// Distance by brute force over a boundary mesh with `polar = F°`, each of
/// the three best samples refined by golden sections along its patch.
pub fn mesh_distance(d: &Domain, polar: &Gauge, mesh: &BoundaryMesh, x: &[f64]) -> Result<f64> {
    if d.euclid_signed(x) < -1e-12 {
        return Err(Error::OutsideDomain(x.to_vec()));
    }
    let vals: Vec<f64> = mesh.points.iter().map(|y| polar.value(&geom::sub(x, y))).collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let mut best = vals[order[0]];
    for &k in order.iter().take(3) {
        let (pid, mut prm) = mesh.params[k];
        let patch = &mesh.patches[pid];
        let bounds = patch.bounds();
        let f = |s: f64, t: f64| polar.value(&geom::sub(x, &patch.point(s, t)));
        let rounds = if patch.params() == 1 { 1 } else { 6 };
        let mut val = vals[k];
        for _ in 0..rounds {
            for axis in 0..patch.params() {
                let w = 1.5 * mesh.spacing[k][axis].max(1e-12);
                let lo = (prm[axis] - w).max(bounds[axis].0);
                let hi = (prm[axis] + w).min(bounds[axis].1);
                let (t, v) = if axis == 0 {
                    geom::golden_min(lo, hi, 1e-14, |s| f(s, prm[1]))
                } else {
                    geom::golden_min(lo, hi, 1e-14, |t| f(prm[0], t))
                };
                if v < val {
                    val = v;
                    prm[axis] = t;
                }
            }
        }
        best = best.min(val);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{make_gauge, polar, GaugeSpec};
    use approx::assert_relative_eq;

    #[test]
    fn mesh_total_weights() {
        let ball = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
        assert_relative_eq!(ball.boundary_mesh(1000.0).total_weight(), 2.0 * PI, epsilon = 1e-10);
        let bx = Domain::new(&DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }).unwrap();
        assert_relative_eq!(bx.boundary_mesh(100.0).total_weight(), 4.0, epsilon = 1e-12);
        let ann = Domain::new(&DomainSpec::Annulus { center: vec![0.0, 0.0], r_in: 1.0, r_out: 2.0 }).unwrap();
        assert_relative_eq!(ann.boundary_mesh(200.0).total_weight(), 6.0 * PI, epsilon = 1e-10);
        let cube = Domain::new(&DomainSpec::Cuboid { lo: vec![0.0; 3], hi: vec![1.0, 2.0, 0.5] }).unwrap();
        assert_relative_eq!(cube.boundary_mesh(400.0).total_weight(), 7.0, epsilon = 1e-12);
        let sph = Domain::new(&DomainSpec::Ball { center: vec![0.0; 3], radius: 2.0 }).unwrap();
        assert_relative_eq!(sph.boundary_mesh(50.0).total_weight(), 16.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn mesh_points_lie_on_boundary() {
        let ann = Domain::new(&DomainSpec::Annulus { center: vec![0.5, -0.25], r_in: 1.0, r_out: 2.0 }).unwrap();
        let mesh = ann.boundary_mesh(50.0);
        for (p, nrm) in mesh.points.iter().zip(&mesh.normals) {
            assert!(ann.euclid_signed(p).abs() < 1e-12);
            // stepping along the outer normal leaves the domain
            let q: Vec<f64> = p.iter().zip(nrm).map(|(a, b)| a + 1e-6 * b).collect();
            assert!(!ann.contains(&q));
        }
        let hs = Domain::new(&DomainSpec::HalfSpace { n: 2, axis: 1, offset: 0.2, window: 1.0 }).unwrap();
        for p in hs.boundary_mesh(20.0).points {
            assert!((p[1] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn perimeter_ratio_examples() {
        let hs = Domain::new(&DomainSpec::HalfSpace { n: 2, axis: 1, offset: 0.0, window: 1.0 }).unwrap();
        assert_relative_eq!(hs.perimeter_ratio(&[0.1, 0.0], 0.3), 1.0 / PI, epsilon = 1e-3);
        let ball = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
        assert_relative_eq!(ball.perimeter_ratio(&[0.0, 0.0], 2.0), 0.5, epsilon = 1e-12);
        assert_eq!(ball.perimeter_ratio(&[0.0, 0.0], 0.5), 0.0);
    }

    #[test]
    fn mesh_route_agrees_with_support_function_route() {
        let el = make_gauge(&GaugeSpec::Ellipse { a: vec![1.0, 0.0, 0.0, 4.0], n: 2 }).unwrap();
        let p4 = make_gauge(&GaugeSpec::PNorm { q: 4.0, n: 2 }).unwrap();
        let hs = Domain::new(&DomainSpec::HalfSpace { n: 2, axis: 1, offset: 0.0, window: 1.0 }).unwrap();
        let mesh = hs.boundary_mesh(200.0);
        let d = mesh_distance(&hs, &polar(&el), &mesh, &[0.0, 0.3]).unwrap();
        assert_relative_eq!(d, 0.15, epsilon = 1e-9);
        for spec in [
            DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 },
            DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] },
            DomainSpec::Annulus { center: vec![0.0, 0.0], r_in: 1.0, r_out: 2.0 },
        ] {
            let dom = Domain::new(&spec).unwrap();
            let mesh = dom.boundary_mesh(200.0);
            for g in [&el, &p4] {
                let gp = polar(g);
                let c = dom.center();
                for x in [c.clone(), c.iter().map(|v| v + 0.13).collect::<Vec<_>>()] {
                    let a = dom.anisotropic_distance(g, &x).unwrap();
                    let b = mesh_distance(&dom, &gp, &mesh, &x).unwrap();
                    assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", dom.label());
                }
            }
        }
    }
}
